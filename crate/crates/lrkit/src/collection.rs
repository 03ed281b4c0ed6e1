//! The common representation shared by all three refinement strategies:
//! a flat collection of tensor-product B-splines, each carrying a scaling
//! factor and a control value.

use crate::error::{Error, Result};
use crate::rational::{rat, to_f64, Rat};
use crate::splinecore::{KnotVector, Limit, LocalKnots, TensorBSpline};

/// Linear-independence status of a collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Independence {
    Independent,
    NotIndependent,
    NotTested,
}

impl std::fmt::Display for Independence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Independence::Independent => "Independent",
            Independence::NotIndependent => "NotIndependent",
            Independence::NotTested => "NotTested",
        };
        f.write_str(s)
    }
}

/// Control value in `R^g`, optionally with a positive rational weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPoint {
    pub coords: Vec<f64>,
    pub weight: Option<f64>,
}

impl ControlPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ControlPoint { coords, weight: None }
    }

    pub fn weighted(coords: Vec<f64>, weight: f64) -> Self {
        ControlPoint { coords, weight: Some(weight) }
    }

    pub fn scalar(v: f64) -> Self {
        ControlPoint::new(vec![v])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Homogeneous representation used by refinement arithmetic:
    /// `(w*c_1, ..., w*c_g, w)` when weighted, plain coords otherwise.
    pub(crate) fn homogeneous(&self) -> Vec<f64> {
        match self.weight {
            Some(w) => {
                let mut h: Vec<f64> = self.coords.iter().map(|c| c * w).collect();
                h.push(w);
                h
            }
            None => self.coords.clone(),
        }
    }

    pub(crate) fn from_homogeneous(h: &[f64], weighted: bool) -> Self {
        if weighted {
            let w = h[h.len() - 1];
            let coords = h[..h.len() - 1].iter().map(|c| c / w).collect();
            ControlPoint { coords, weight: Some(w) }
        } else {
            ControlPoint::new(h.to_vec())
        }
    }
}

/// A tensor-product B-spline with scaling factor and control value.
///
/// The scaling factor is kept both as an exact rational (so partition-of-unity
/// bookkeeping through arbitrarily long refinement chains stays exact) and as
/// a cached `f64` for evaluation.
#[derive(Debug, Clone)]
pub struct ScaledBSpline {
    spline: TensorBSpline,
    gamma_exact: Rat,
    gamma: f64,
    pub coeff: ControlPoint,
}

impl ScaledBSpline {
    pub fn new(spline: TensorBSpline, gamma: f64, coeff: ControlPoint) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!("scaling factor must be positive, got {gamma}")));
        }
        Ok(ScaledBSpline {
            spline,
            gamma_exact: rat(gamma),
            gamma,
            coeff,
        })
    }

    pub fn with_exact_gamma(spline: TensorBSpline, gamma: Rat, coeff: ControlPoint) -> Result<Self> {
        let g = to_f64(&gamma);
        if !(g > 0.0) {
            return Err(Error::invalid("scaling factor must be positive".to_string()));
        }
        Ok(ScaledBSpline {
            spline,
            gamma_exact: gamma,
            gamma: g,
            coeff,
        })
    }

    pub fn spline(&self) -> &TensorBSpline {
        &self.spline
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_exact(&self) -> &Rat {
        &self.gamma_exact
    }
}

/// A set of scaled tensor-product B-splines over a common domain.
#[derive(Debug, Clone)]
pub struct SplineCollection {
    domain: Vec<(f64, f64)>,
    degrees: Vec<usize>,
    splines: Vec<ScaledBSpline>,
    pub independence: Independence,
}

impl SplineCollection {
    pub fn new(
        domain: Vec<(f64, f64)>,
        degrees: Vec<usize>,
        splines: Vec<ScaledBSpline>,
        independence: Independence,
    ) -> Result<Self> {
        if domain.len() != degrees.len() || domain.is_empty() {
            return Err(Error::invalid("domain/degree dimension mismatch".to_string()));
        }
        if domain.iter().any(|&(a, b)| !(a < b)) {
            return Err(Error::invalid("degenerate domain".to_string()));
        }
        let gdim = splines.first().map(|s| s.coeff.dim());
        for s in &splines {
            if s.spline.dim() != domain.len() || s.spline.degrees() != degrees {
                return Err(Error::invalid(
                    "all members must share the collection's dimension and degrees".to_string(),
                ));
            }
            if Some(s.coeff.dim()) != gdim {
                return Err(Error::invalid(
                    "all members must share the control-value dimension".to_string(),
                ));
            }
        }
        Ok(SplineCollection {
            domain,
            degrees,
            splines,
            independence,
        })
    }

    /// Full tensor-product collection: one member per basis function, all
    /// scaling factors 1, coefficients in lexicographic order with the last
    /// direction varying fastest.
    pub fn from_tensor(kvs: &[KnotVector], coefficients: Vec<ControlPoint>) -> Result<Self> {
        if kvs.is_empty() || kvs.len() > 3 {
            return Err(Error::invalid("1 to 3 parameter directions supported".to_string()));
        }
        for kv in kvs {
            if !kv.is_clamped() {
                return Err(Error::invalid("tensor collections require clamped knot vectors".to_string()));
            }
        }
        let dims: Vec<usize> = kvs.iter().map(|kv| kv.dim()).collect();
        let total: usize = dims.iter().product();
        if coefficients.len() != total {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                total,
                coefficients.len()
            )));
        }
        let mut splines = Vec::with_capacity(total);
        let mut coeff_iter = coefficients.into_iter();
        let mut idx = vec![0usize; kvs.len()];
        loop {
            let factors: Vec<LocalKnots> = kvs
                .iter()
                .zip(&idx)
                .map(|(kv, &i)| kv.local(i))
                .collect();
            let spline = TensorBSpline::new(factors)?;
            splines.push(ScaledBSpline::new(spline, 1.0, coeff_iter.next().unwrap())?);
            // odometer increment, last direction fastest
            let mut k = kvs.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    let domain = kvs.iter().map(|kv| kv.domain()).collect();
                    let degrees = kvs.iter().map(|kv| kv.degree()).collect();
                    return SplineCollection::new(domain, degrees, splines, Independence::Independent);
                }
            }
        }
    }

    /// Like [`from_tensor`](Self::from_tensor) with the Greville points of the
    /// space as coefficients, so the collection reproduces the identity map.
    pub fn from_tensor_greville(kvs: &[KnotVector]) -> Result<Self> {
        let grevilles: Vec<Vec<f64>> = kvs.iter().map(|kv| kv.greville()).collect();
        let dims: Vec<usize> = kvs.iter().map(|kv| kv.dim()).collect();
        let total: usize = dims.iter().product();
        let mut coeffs = Vec::with_capacity(total);
        let mut idx = vec![0usize; kvs.len()];
        for _ in 0..total {
            coeffs.push(ControlPoint::new(
                idx.iter().enumerate().map(|(k, &i)| grevilles[k][i]).collect(),
            ));
            let mut k = kvs.len();
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        SplineCollection::from_tensor(kvs, coeffs)
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    /// Dimension of the control values.
    pub fn geo_dim(&self) -> usize {
        self.splines.first().map_or(0, |s| s.coeff.dim())
    }

    pub fn is_rational(&self) -> bool {
        self.splines.iter().any(|s| s.coeff.weight.is_some())
    }

    pub fn len(&self) -> usize {
        self.splines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splines.is_empty()
    }

    pub fn splines(&self) -> &[ScaledBSpline] {
        &self.splines
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.domain)
                .all(|(&xi, &(a, b))| xi >= a && xi <= b)
    }

    pub(crate) fn limits_for(&self, x: &[f64]) -> Vec<Limit> {
        x.iter()
            .zip(&self.domain)
            .map(|(&xi, &(_, b))| if xi == b { Limit::FromBelow } else { Limit::FromAbove })
            .collect()
    }

    /// `sum_i gamma_i B_i(x)` with the clamped right-edge convention.
    pub fn weighted_basis_sum(&self, x: &[f64]) -> Result<f64> {
        let limits = self.limits_for(x);
        let mut sum = 0.0;
        for s in &self.splines {
            sum += s.gamma() * s.spline().eval_limits(x, Some(&limits))?;
        }
        Ok(sum)
    }

    /// Evaluate the represented map at `x`.
    ///
    /// Without weights this is the plain combination
    /// `sum_i gamma_i c_i B_i(x)`; with weights the rational form
    /// `sum_i gamma_i w_i c_i B_i(x) / sum_i gamma_i w_i B_i(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.contains_point(x) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        let limits = self.limits_for(x);
        let g = self.geo_dim();
        let rational = self.is_rational();
        let mut num = vec![0.0f64; g];
        let mut den = 0.0f64;
        for s in &self.splines {
            let b = s.spline().eval_limits(x, Some(&limits))?;
            if b == 0.0 {
                continue;
            }
            let w = s.coeff.weight.unwrap_or(1.0);
            let gwb = s.gamma() * w * b;
            for (acc, c) in num.iter_mut().zip(&s.coeff.coords) {
                *acc += gwb * c;
            }
            den += gwb;
        }
        if rational {
            if den == 0.0 {
                return Err(Error::Inconsistency(format!(
                    "zero weight denominator at {x:?}"
                )));
            }
            for v in num.iter_mut() {
                *v /= den;
            }
        }
        Ok(num)
    }

    /// First partial derivative of the represented map in direction `dir`.
    /// Weighted collections use the quotient rule.
    pub fn eval_partial(&self, x: &[f64], dir: usize) -> Result<Vec<f64>> {
        if !self.contains_point(x) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        if dir >= self.dim() {
            return Err(Error::invalid(format!("direction {dir} out of range")));
        }
        let limits = self.limits_for(x);
        let g = self.geo_dim();
        let mut orders = vec![0usize; self.dim()];
        orders[dir] = 1;
        if !self.is_rational() {
            let mut out = vec![0.0f64; g];
            for s in &self.splines {
                let db = s.spline().eval_partial(x, &orders, Some(&limits))?;
                if db == 0.0 {
                    continue;
                }
                for (acc, c) in out.iter_mut().zip(&s.coeff.coords) {
                    *acc += s.gamma() * db * c;
                }
            }
            return Ok(out);
        }
        let mut num = vec![0.0f64; g];
        let mut num_d = vec![0.0f64; g];
        let mut den = 0.0f64;
        let mut den_d = 0.0f64;
        for s in &self.splines {
            let b = s.spline().eval_limits(x, Some(&limits))?;
            let db = s.spline().eval_partial(x, &orders, Some(&limits))?;
            let w = s.coeff.weight.unwrap_or(1.0);
            let gw = s.gamma() * w;
            for ((n, nd), c) in num.iter_mut().zip(num_d.iter_mut()).zip(&s.coeff.coords) {
                *n += gw * b * c;
                *nd += gw * db * c;
            }
            den += gw * b;
            den_d += gw * db;
        }
        if den == 0.0 {
            return Err(Error::Inconsistency(format!("zero weight denominator at {x:?}")));
        }
        Ok(num_d
            .iter()
            .zip(&num)
            .map(|(nd, n)| (nd * den - n * den_d) / (den * den))
            .collect())
    }

    /// Evaluate on a uniform grid of `counts[k]` samples per direction,
    /// in parallel. Points are listed with the last direction fastest.
    pub fn eval_grid(&self, counts: &[usize]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let pts = self.grid_points(counts)?;
        let results = crate::parallel::map_slice(&pts, |x| self.eval(x));
        pts.into_iter()
            .zip(results)
            .map(|(x, r)| r.map(|v| (x, v)))
            .collect()
    }

    pub(crate) fn grid_points(&self, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
        if counts.len() != self.dim() || counts.iter().any(|&c| c == 0) {
            return Err(Error::invalid("one positive sample count per direction required".to_string()));
        }
        let axes: Vec<Vec<f64>> = self
            .domain
            .iter()
            .zip(counts)
            .map(|(&(a, b), &n)| {
                (0..n)
                    .map(|i| {
                        if n == 1 {
                            0.5 * (a + b)
                        } else {
                            a + (b - a) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let total: usize = counts.iter().product();
        let mut pts = Vec::with_capacity(total);
        let mut idx = vec![0usize; counts.len()];
        for _ in 0..total {
            pts.push(idx.iter().enumerate().map(|(k, &i)| axes[k][i]).collect());
            let mut k = counts.len();
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(pts)
    }

    /// Members sorted by knot signature; used for deterministic output.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.splines.len()).collect();
        order.sort_by_key(|&i| self.splines[i].spline().bit_key());
        order
    }
}
