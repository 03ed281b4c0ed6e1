//! Univariate B-spline evaluation and refinement, plus tensor-product
//! B-splines assembled as products of univariate factors.

use crate::error::{Error, Result};
use crate::rational::{rat, Rat};
use num_traits::Zero;

/// Which one-sided limit the piecewise evaluation takes at a knot.
///
/// `FromAbove` is the usual half-open convention (value on `[t_i, t_{i+1})`);
/// `FromBelow` gives the left limit, used when evaluating at the right end of
/// a clamped domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    FromAbove,
    FromBelow,
}

/// A nondecreasing knot sequence spanning a full univariate spline space.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    values: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(degree: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() < degree + 2 {
            return Err(Error::invalid(format!(
                "need at least {} knots for degree {}, got {}",
                degree + 2,
                degree,
                values.len()
            )));
        }
        validate_nondecreasing(&values)?;
        for i in 0..values.len().saturating_sub(degree + 1) {
            if values[i] >= values[i + degree + 1] {
                return Err(Error::invalid(format!(
                    "knot {} repeats more than {} times",
                    values[i],
                    degree + 1
                )));
            }
        }
        Ok(KnotVector { values, degree })
    }

    /// Clamped knot vector with `cells` uniform spans on `[a, b]`.
    pub fn uniform_clamped(degree: usize, a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(a < b) || cells == 0 {
            return Err(Error::invalid("domain must be nondegenerate".to_string()));
        }
        let mut values = vec![a; degree];
        let h = (b - a) / cells as f64;
        for k in 0..=cells {
            // hit the endpoints exactly
            let t = if k == cells { b } else { a + h * k as f64 };
            values.push(t);
        }
        values.extend(std::iter::repeat(b).take(degree));
        KnotVector::new(degree, values)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dimension of the spanned spline space.
    pub fn dim(&self) -> usize {
        self.values.len() - self.degree - 1
    }

    /// Parameter interval `[t_{p+1}, t_{N+1}]` on which the basis is complete.
    pub fn domain(&self) -> (f64, f64) {
        (self.values[self.degree], self.values[self.dim()])
    }

    pub fn is_clamped(&self) -> bool {
        let p = self.degree;
        let n = self.dim();
        self.values[0] == self.values[p] && self.values[n] == self.values[n + p]
    }

    /// Local knots of basis function `i`.
    pub fn local(&self, i: usize) -> LocalKnots {
        LocalKnots {
            values: self.values[i..i + self.degree + 2].to_vec(),
            degree: self.degree,
        }
    }

    pub fn locals(&self) -> impl Iterator<Item = LocalKnots> + '_ {
        (0..self.dim()).map(move |i| self.local(i))
    }

    pub fn multiplicity(&self, value: f64) -> usize {
        self.values.iter().filter(|&&t| t == value).count()
    }

    /// Unique knot values paired with their multiplicities.
    pub fn unique_knots(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &t in &self.values {
            match out.last_mut() {
                Some((v, m)) if *v == t => *m += 1,
                _ => out.push((t, 1)),
            }
        }
        out
    }

    /// New knot vector with `value` inserted once.
    pub fn inserted(&self, value: f64) -> Result<Self> {
        let (a, b) = self.domain();
        if !(value > a && value < b) {
            return Err(Error::invalid(format!(
                "inserted knot {value} must lie strictly inside the domain"
            )));
        }
        let mut values = self.values.clone();
        let pos = values.partition_point(|&t| t <= value);
        values.insert(pos, value);
        KnotVector::new(self.degree, values)
    }

    /// Greville abscissae: averages of `p` consecutive interior knots.
    /// For degree 0 the convention is knot-span midpoints.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        let n = self.dim();
        if p == 0 {
            return (0..n)
                .map(|i| 0.5 * (self.values[i] + self.values[i + 1]))
                .collect();
        }
        (0..n)
            .map(|i| self.values[i + 1..i + 1 + p].iter().sum::<f64>() / p as f64)
            .collect()
    }
}

/// Continuity order `p - m` at a knot of multiplicity `m`.
pub fn continuity_at(kv: &KnotVector, value: f64) -> Result<i64> {
    let m = kv.multiplicity(value);
    if m == 0 {
        return Err(Error::NotAKnot(value));
    }
    Ok(kv.degree() as i64 - m as i64)
}

/// Control-point growth when one knot is inserted into a full tensor space:
/// the product of the dimensions in the other directions.
pub fn tensor_space_growth(dims: &[usize], direction: usize) -> usize {
    dims.iter()
        .enumerate()
        .filter(|&(k, _)| k != direction)
        .map(|(_, &n)| n)
        .product()
}

/// The `p + 2` knots defining a single B-spline.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalKnots {
    values: Vec<f64>,
    degree: usize,
}

impl LocalKnots {
    pub fn new(degree: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != degree + 2 {
            return Err(Error::invalid(format!(
                "a degree-{} B-spline needs exactly {} knots, got {}",
                degree,
                degree + 2,
                values.len()
            )));
        }
        validate_nondecreasing(&values)?;
        if values[0] >= values[degree + 1] {
            return Err(Error::invalid(
                "degenerate support: first knot must be below the last".to_string(),
            ));
        }
        Ok(LocalKnots { values, degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> (f64, f64) {
        (self.values[0], self.values[self.degree + 1])
    }

    pub fn multiplicity(&self, value: f64) -> usize {
        self.values.iter().filter(|&&t| t == value).count()
    }

    /// Nonempty knot spans of the support.
    pub fn spans(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .windows(2)
            .filter(|w| w[0] < w[1])
            .map(|w| (w[0], w[1]))
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_local(&self.values, self.degree, x, Limit::FromAbove)
    }

    pub fn eval_limit(&self, x: f64, limit: Limit) -> f64 {
        eval_local(&self.values, self.degree, x, limit)
    }

    pub fn eval_deriv(&self, x: f64, order: usize, limit: Limit) -> f64 {
        eval_local_deriv(&self.values, self.degree, x, order, limit)
    }

    /// Exact evaluation at a rational point. The point must not coincide with
    /// a knot; interior element nodes used by extraction satisfy this.
    pub fn eval_exact(&self, x: &Rat) -> Rat {
        let knots: Vec<Rat> = self.values.iter().map(|&t| rat(t)).collect();
        eval_local_exact(&knots, self.degree, x)
    }

    /// One-step knot insertion: `B = a1 * B1 + a2 * B2` where `B1`, `B2` are
    /// the two windows of the knots with `x` inserted. Weights are exact.
    pub fn split(&self, x: f64) -> Result<((LocalKnots, Rat), (LocalKnots, Rat))> {
        let p = self.degree;
        let k = &self.values;
        let (lo, hi) = self.support();
        if !(x > lo && x < hi) {
            return Err(Error::invalid(format!(
                "split value {x} must lie strictly inside the support ({lo}, {hi})"
            )));
        }
        let mut extended = k.clone();
        let pos = extended.partition_point(|&t| t <= x);
        extended.insert(pos, x);
        let left = LocalKnots::new(p, extended[..p + 2].to_vec())?;
        let right = LocalKnots::new(p, extended[1..].to_vec())?;
        let a1 = if x >= k[p] {
            Rat::from_integer(1.into())
        } else {
            (rat(x) - rat(k[0])) / (rat(k[p]) - rat(k[0]))
        };
        let a2 = if x <= k[1] {
            Rat::from_integer(1.into())
        } else {
            (rat(k[p + 1]) - rat(x)) / (rat(k[p + 1]) - rat(k[1]))
        };
        Ok(((left, a1), (right, a2)))
    }

    /// Stable sort key over the raw bit patterns (IEEE total order).
    pub fn bit_key(&self) -> Vec<u64> {
        self.values.iter().map(|&v| f64_total_key(v)).collect()
    }
}

/// Monotone mapping of `f64` to `u64` preserving numeric order.
pub(crate) fn f64_total_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 0 {
        bits | 0x8000_0000_0000_0000
    } else {
        !bits
    }
}

fn validate_nondecreasing(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("knots must be finite".to_string()));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("knots must be nondecreasing".to_string()));
    }
    Ok(())
}

/// Cox-de Boor recursion over a local window. Terms with zero denominator
/// contribute zero.
fn eval_local(knots: &[f64], degree: usize, x: f64, limit: Limit) -> f64 {
    let p = degree;
    let mut n = vec![0.0f64; p + 1];
    for (j, nj) in n.iter_mut().enumerate() {
        let inside = match limit {
            Limit::FromAbove => knots[j] <= x && x < knots[j + 1],
            Limit::FromBelow => knots[j] < x && x <= knots[j + 1],
        };
        *nj = if inside { 1.0 } else { 0.0 };
    }
    for q in 1..=p {
        for j in 0..=(p - q) {
            let d1 = knots[j + q] - knots[j];
            let d2 = knots[j + q + 1] - knots[j + 1];
            let a = if d1 > 0.0 { (x - knots[j]) / d1 * n[j] } else { 0.0 };
            let b = if d2 > 0.0 {
                (knots[j + q + 1] - x) / d2 * n[j + 1]
            } else {
                0.0
            };
            n[j] = a + b;
        }
    }
    n[0]
}

fn eval_local_deriv(knots: &[f64], degree: usize, x: f64, order: usize, limit: Limit) -> f64 {
    if order == 0 {
        return eval_local(knots, degree, x, limit);
    }
    if order > degree {
        return 0.0;
    }
    let p = degree;
    let d1 = knots[p] - knots[0];
    let d2 = knots[p + 1] - knots[1];
    let left = if d1 > 0.0 {
        p as f64 / d1 * eval_local_deriv(&knots[..p + 1], p - 1, x, order - 1, limit)
    } else {
        0.0
    };
    let right = if d2 > 0.0 {
        p as f64 / d2 * eval_local_deriv(&knots[1..], p - 1, x, order - 1, limit)
    } else {
        0.0
    };
    left - right
}

fn eval_local_exact(knots: &[Rat], degree: usize, x: &Rat) -> Rat {
    let p = degree;
    let mut n = vec![Rat::zero(); p + 1];
    for (j, nj) in n.iter_mut().enumerate() {
        if &knots[j] <= x && x < &knots[j + 1] {
            *nj = Rat::from_integer(1.into());
        }
    }
    for q in 1..=p {
        for j in 0..=(p - q) {
            let d1 = &knots[j + q] - &knots[j];
            let d2 = &knots[j + q + 1] - &knots[j + 1];
            let mut acc = Rat::zero();
            if !d1.is_zero() {
                acc += (x - &knots[j]) / d1 * &n[j];
            }
            if !d2.is_zero() {
                acc += (&knots[j + q + 1] - x) / d2 * &n[j + 1];
            }
            n[j] = acc;
        }
    }
    n[0].clone()
}

/// Product of univariate B-splines, one factor per parameter direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBSpline {
    factors: Vec<LocalKnots>,
}

impl TensorBSpline {
    pub fn new(factors: Vec<LocalKnots>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("tensor B-spline needs at least one factor".to_string()));
        }
        Ok(TensorBSpline { factors })
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.degree()).collect()
    }

    pub fn factor(&self, k: usize) -> &LocalKnots {
        &self.factors[k]
    }

    pub fn factors(&self) -> &[LocalKnots] {
        &self.factors
    }

    /// Cartesian product of the per-direction supports.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        self.factors.iter().map(|f| f.support()).collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_limits(x, None)
    }

    /// Evaluate with an optional per-direction one-sided limit override.
    pub fn eval_limits(&self, x: &[f64], limits: Option<&[Limit]>) -> Result<f64> {
        if x.len() != self.factors.len() {
            return Err(Error::invalid(format!(
                "point dimension {} does not match tensor dimension {}",
                x.len(),
                self.factors.len()
            )));
        }
        let mut prod = 1.0;
        for (k, f) in self.factors.iter().enumerate() {
            let limit = limits.map_or(Limit::FromAbove, |l| l[k]);
            prod *= f.eval_limit(x[k], limit);
            if prod == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(prod)
    }

    /// Partial derivative of given per-direction orders.
    pub fn eval_partial(&self, x: &[f64], orders: &[usize], limits: Option<&[Limit]>) -> Result<f64> {
        if x.len() != self.factors.len() || orders.len() != self.factors.len() {
            return Err(Error::invalid("dimension mismatch in partial evaluation".to_string()));
        }
        let mut prod = 1.0;
        for (k, f) in self.factors.iter().enumerate() {
            let limit = limits.map_or(Limit::FromAbove, |l| l[k]);
            prod *= f.eval_deriv(x[k], orders[k], limit);
        }
        Ok(prod)
    }

    pub fn bit_key(&self) -> Vec<Vec<u64>> {
        self.factors.iter().map(|f| f.bit_key()).collect()
    }
}

/// Coefficient map between nested spline spaces: `fine = A * coarse`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RefinementMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        RefinementMatrix { rows: n, cols: n, data }
    }

    /// Apply to a coefficient vector of the coarse space.
    pub fn apply(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        if coarse.len() != self.cols {
            return Err(Error::invalid(format!(
                "coefficient count {} does not match coarse dimension {}",
                coarse.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(coarse)
                    .map(|(a, c)| a * c)
                    .sum::<f64>()
            })
            .collect())
    }
}

/// Knot-insertion matrix computed by the discrete B-spline recursion.
///
/// `fine` must contain `coarse` as a sub-multiset with equal degree and the
/// same basis-complete domain; then `c_fine = A * c_coarse` reproduces the
/// coarse curve exactly.
pub fn oslo_refine(coarse: &KnotVector, fine: &KnotVector) -> Result<RefinementMatrix> {
    if coarse.degree() != fine.degree() {
        return Err(Error::invalid(format!(
            "degree mismatch: {} vs {}",
            coarse.degree(),
            fine.degree()
        )));
    }
    if !is_submultiset(coarse.values(), fine.values()) {
        return Err(Error::NotNested(
            "fine knots must contain the coarse knots".to_string(),
        ));
    }
    if coarse.domain() != fine.domain() {
        return Err(Error::NotNested(format!(
            "domains differ: {:?} vs {:?}",
            coarse.domain(),
            fine.domain()
        )));
    }
    let p = coarse.degree();
    let tau = coarse.values();
    let t = fine.values();
    let rows = fine.dim();
    let cols = coarse.dim();
    let nseg = tau.len() - 1;
    let mut data = vec![0.0f64; rows * cols];
    for i in 0..rows {
        // seed: degree-0 discrete B-spline is the indicator of the span of t[i]
        let mut a = vec![0.0f64; nseg + 1];
        let mut mu = None;
        for j in 0..nseg {
            if tau[j] <= t[i] && t[i] < tau[j + 1] {
                mu = Some(j);
                break;
            }
        }
        let mu = match mu {
            Some(m) => m,
            // fine function supported outside the coarse range contributes zero
            None => continue,
        };
        a[mu] = 1.0;
        for q in 1..=p {
            let x = t[i + q];
            for j in 0..(nseg - q) {
                let d1 = tau[j + q] - tau[j];
                let d2 = tau[j + q + 1] - tau[j + 1];
                let left = if d1 > 0.0 { (x - tau[j]) / d1 * a[j] } else { 0.0 };
                let right = if d2 > 0.0 {
                    (tau[j + q + 1] - x) / d2 * a[j + 1]
                } else {
                    0.0
                };
                a[j] = left + right;
            }
        }
        data[i * cols..i * cols + cols].copy_from_slice(&a[..cols]);
    }
    Ok(RefinementMatrix { rows, cols, data })
}

fn is_submultiset(sub: &[f64], sup: &[f64]) -> bool {
    // both sorted nondecreasing
    let mut i = 0;
    for &v in sup {
        if i < sub.len() && sub[i] == v {
            i += 1;
        }
    }
    i == sub.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal textbook recursion, kept independent of the iterative path.
    fn naive_bspline(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            return if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 };
        }
        let d1 = knots[i + p] - knots[i];
        let d2 = knots[i + p + 1] - knots[i + 1];
        let a = if d1 > 0.0 {
            (x - knots[i]) / d1 * naive_bspline(knots, i, p - 1, x)
        } else {
            0.0
        };
        let b = if d2 > 0.0 {
            (knots[i + p + 1] - x) / d2 * naive_bspline(knots, i + 1, p - 1, x)
        } else {
            0.0
        };
        a + b
    }

    #[test]
    fn base_case_box() {
        let b = LocalKnots::new(0, vec![0.0, 1.0]).unwrap();
        assert_eq!(b.eval(0.5), 1.0);
        assert_eq!(b.eval(0.0), 1.0);
        assert_eq!(b.eval(1.0), 0.0);
        assert_eq!(b.eval(-0.1), 0.0);
    }

    #[test]
    fn hat_apex() {
        let b = LocalKnots::new(1, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(b.eval(1.0), 1.0);
        assert_eq!(b.eval(0.5), 0.5);
    }

    #[test]
    fn cardinal_cubic_center() {
        let b = LocalKnots::new(3, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        // hand-unrolled recursion gives 2/3 at the center
        assert!((b.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((naive_bspline(&[0.0, 1.0, 2.0, 3.0, 4.0], 0, 3, 2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clamped_bernstein_endpoint() {
        let b = LocalKnots::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(b.eval(0.0), 1.0);
        assert_eq!(b.eval(1.0), 0.0);
        assert_eq!(b.eval_limit(1.0, Limit::FromBelow), 0.0);
        let last = LocalKnots::new(3, vec![0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(last.eval(1.0), 0.0);
        assert_eq!(last.eval_limit(1.0, Limit::FromBelow), 1.0);
    }

    #[test]
    fn malformed_local_knots_rejected() {
        assert!(LocalKnots::new(2, vec![0.0, 1.0, 2.0]).is_err());
        assert!(LocalKnots::new(1, vec![1.0, 0.5, 2.0]).is_err());
        assert!(LocalKnots::new(1, vec![1.0, 1.0, 1.0]).is_err());
        assert!(LocalKnots::new(1, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn support_is_half_open() {
        let b = LocalKnots::new(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(b.eval(-0.5), 0.0);
        assert_eq!(b.eval(3.0), 0.0);
        assert!(b.eval(2.999) > 0.0);
    }

    #[test]
    fn matches_naive_recursion_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let p = rng.gen_range(0..=4usize);
            let mut knots: Vec<f64> = (0..p + 2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            knots.sort_by(f64::total_cmp);
            if knots[0] >= knots[p + 1] {
                continue;
            }
            let b = match LocalKnots::new(p, knots.clone()) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let x = rng.gen_range(-3.5..3.5);
            let got = b.eval(x);
            let want = naive_bspline(&knots, 0, p, x);
            assert!((got - want).abs() < 1e-13, "p={p} knots={knots:?} x={x}");
        }
    }

    #[test]
    fn continuity_formula() {
        let kv = KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0]).unwrap();
        assert_eq!(continuity_at(&kv, 1.0).unwrap(), 2);
        assert_eq!(continuity_at(&kv, 2.0).unwrap(), 1);
        assert_eq!(continuity_at(&kv, 0.0).unwrap(), -1);
        assert!(matches!(continuity_at(&kv, 0.5), Err(Error::NotAKnot(_))));
        let kv2 = KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(continuity_at(&kv2, 1.0).unwrap(), 0);
    }

    #[test]
    fn greville_examples() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(kv.greville(), vec![0.0, 0.5, 1.0]);
        let kv = KnotVector::new(
            3,
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 3.0, 3.0, 3.0],
        )
        .unwrap();
        let g = kv.greville();
        let want = [0.0, 1.0 / 3.0, 1.0, 2.0, 8.0 / 3.0, 3.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let kv = KnotVector::new(1, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(kv.greville(), vec![1.0]);
        // degree 0 falls back to span midpoints
        let kv = KnotVector::new(0, vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(kv.greville(), vec![0.5, 2.0]);
    }

    #[test]
    fn local_partition_of_unity() {
        let kv = KnotVector::new(3, vec![0.0, 0.5, 1.0, 1.5, 2.5, 3.0, 4.0, 4.5, 5.0, 6.0]).unwrap();
        let (a, b) = kv.domain();
        for s in 0..200 {
            let x = a + (b - a) * (s as f64 + 0.31) / 200.5;
            let sum: f64 = kv.locals().map(|l| l.eval(x)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "x={x} sum={sum}");
        }
    }

    #[test]
    fn nonnegativity_everywhere() {
        let b = LocalKnots::new(4, vec![0.0, 0.1, 0.1, 2.0, 2.5, 3.0]).unwrap();
        for s in 0..300 {
            let x = -0.5 + 4.0 * s as f64 / 299.0;
            assert!(b.eval(x) >= 0.0);
        }
    }

    #[test]
    fn oslo_identity_when_equal() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        let m = oslo_refine(&kv, &kv).unwrap();
        assert_eq!(m, RefinementMatrix::identity(kv.dim()));
    }

    #[test]
    fn oslo_linear_reproduction_to_greville() {
        let coarse = KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let fine = coarse.inserted(0.5).unwrap();
        let m = oslo_refine(&coarse, &fine).unwrap();
        let refined = m.apply(&coarse.greville()).unwrap();
        let want = [0.0, 1.0 / 6.0, 0.5, 5.0 / 6.0, 1.0];
        for (a, b) in refined.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{refined:?}");
        }
        // rows of a clamped refinement matrix sum to one
        for i in 0..m.rows() {
            let s: f64 = m.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            assert!(m.row(i).iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn oslo_reproduces_random_curve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let coarse =
            KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 4.0, 4.0, 4.0]).unwrap();
        let coeffs: Vec<f64> = (0..coarse.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut fine = coarse.clone();
        for _ in 0..5 {
            let v = rng.gen_range(0.05..3.95);
            fine = fine.inserted(v).unwrap();
        }
        let m = oslo_refine(&coarse, &fine).unwrap();
        let fine_coeffs = m.apply(&coeffs).unwrap();
        let (a, b) = coarse.domain();
        let eval = |kv: &KnotVector, c: &[f64], x: f64| -> f64 {
            kv.locals()
                .zip(c)
                .map(|(l, &ci)| ci * l.eval(x))
                .sum()
        };
        for s in 0..1000 {
            let x = a + (b - a) * (s as f64 + 0.5) / 1001.0;
            let before = eval(&coarse, &coeffs, x);
            let after = eval(&fine, &fine_coeffs, x);
            assert!((before - after).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn oslo_handles_fine_functions_outside_the_coarse_range() {
        // an extra leading knot leaves the shared domain untouched; the fine
        // function supported below it gets a zero row
        let coarse = KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let fine = KnotVector::new(3, vec![-1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(coarse.domain(), fine.domain());
        let m = oslo_refine(&coarse, &fine).unwrap();
        assert!(m.row(0).iter().all(|&v| v == 0.0));
        let coeffs = coarse.greville();
        let refined = m.apply(&coeffs).unwrap();
        for s in 0..200 {
            let x = s as f64 / 200.0;
            let a: f64 = coarse.locals().zip(&coeffs).map(|(l, &c)| c * l.eval(x)).sum();
            let b: f64 = fine.locals().zip(&refined).map(|(l, &c)| c * l.eval(x)).sum();
            assert!((a - b).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn oslo_rejects_non_nested() {
        let a = KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        let b = KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.5, 2.0, 2.0, 2.0]).unwrap();
        assert!(matches!(oslo_refine(&a, &b), Err(Error::NotNested(_))));
        let c = KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0, 2.0]).unwrap();
        assert!(matches!(oslo_refine(&a, &c), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn derivative_continuity_orders() {
        // multiplicity m at an interior knot leaves derivatives 0..p-m continuous
        for p in 1..=4usize {
            for m in 1..=p {
                let mut values = vec![0.0; p + 1];
                values.extend(std::iter::repeat(1.0).take(m));
                values.extend(std::iter::repeat(2.0).take(p + 1));
                let kv = KnotVector::new(p, values).unwrap();
                // one-sided derivative sums of a spline with random coefficients
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64((p * 13 + m) as u64);
                let coeffs: Vec<f64> = (0..kv.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let deriv = |order: usize, limit: Limit| -> f64 {
                    kv.locals()
                        .zip(&coeffs)
                        .map(|(l, &c)| c * l.eval_deriv(1.0, order, limit))
                        .sum()
                };
                let continuous = p - m;
                for r in 0..=continuous {
                    let lo = deriv(r, Limit::FromBelow);
                    let hi = deriv(r, Limit::FromAbove);
                    let scale = lo.abs().max(hi.abs()).max(1.0);
                    assert!(
                        (lo - hi).abs() / scale < 1e-6,
                        "p={p} m={m} order {r}: {lo} vs {hi}"
                    );
                }
                let r = continuous + 1;
                if r <= p {
                    let lo = deriv(r, Limit::FromBelow);
                    let hi = deriv(r, Limit::FromAbove);
                    let scale = lo.abs().max(hi.abs()).max(1.0);
                    assert!(
                        (lo - hi).abs() / scale > 1e-8,
                        "p={p} m={m} derivative {r} should jump"
                    );
                }
            }
        }
    }

    #[test]
    fn tensor_eval_and_support() {
        let b0 = LocalKnots::new(0, vec![0.0, 1.0]).unwrap();
        let t = TensorBSpline::new(vec![b0.clone(), b0]).unwrap();
        assert_eq!(t.eval(&[0.5, 0.5]).unwrap(), 1.0);

        let c = LocalKnots::new(3, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = TensorBSpline::new(vec![c.clone(), c.clone()]).unwrap();
        assert!((t.eval(&[2.0, 2.0]).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(t.eval(&[5.0, 2.0]).unwrap(), 0.0);
        assert!(t.eval(&[1.0, 1.0, 1.0]).is_err());

        assert_eq!(t.support_box(), vec![(0.0, 4.0), (0.0, 4.0)]);
        let mixed = TensorBSpline::new(vec![
            LocalKnots::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
            LocalKnots::new(3, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(mixed.support_box(), vec![(0.0, 1.0), (1.0, 5.0)]);
        let unit = LocalKnots::new(0, vec![0.0, 1.0]).unwrap();
        let cube = TensorBSpline::new(vec![unit.clone(), unit.clone(), unit]).unwrap();
        assert_eq!(cube.support_box(), vec![(0.0, 1.0); 3]);
    }

    #[test]
    fn growth_counts() {
        assert_eq!(tensor_space_growth(&[10, 20, 30], 0), 600);
        assert_eq!(tensor_space_growth(&[7, 9], 0), 9);
        assert_eq!(tensor_space_growth(&[1, 1, 1], 0), 1);
    }

    #[test]
    fn split_preserves_function() {
        let b = LocalKnots::new(3, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let ((l, a1), (r, a2)) = b.split(2.5).unwrap();
        for s in 0..200 {
            let x = -0.2 + 4.4 * s as f64 / 199.0;
            let want = b.eval(x);
            let got = crate::rational::to_f64(&a1) * l.eval(x) + crate::rational::to_f64(&a2) * r.eval(x);
            assert!((want - got).abs() < 1e-13, "x={x}");
        }
        assert!(b.split(0.0).is_err());
        assert!(b.split(4.0).is_err());
    }

    #[test]
    fn exact_eval_matches_float() {
        let b = LocalKnots::new(3, vec![0.0, 0.5, 1.0, 2.0, 4.0]).unwrap();
        for &x in &[0.25, 0.75, 1.5, 3.0, 3.875] {
            let exact = crate::rational::to_f64(&b.eval_exact(&rat(x)));
            assert!((exact - b.eval(x)).abs() < 1e-14);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_knot_vector() -> impl Strategy<Value = KnotVector> {
            (1usize..=4, proptest::collection::vec(-20i32..20, 6..14)).prop_filter_map(
                "valid knot vector",
                |(p, raw)| {
                    let mut values: Vec<f64> = raw.iter().map(|&v| v as f64 * 0.25).collect();
                    values.sort_by(f64::total_cmp);
                    KnotVector::new(p, values).ok()
                },
            )
        }

        proptest! {
            #[test]
            fn local_partition_of_unity_holds(kv in arb_knot_vector(), t in 0.0f64..1.0) {
                let (a, b) = kv.domain();
                prop_assume!(a < b);
                let x = a + (b - a) * t * 0.999;
                let sum: f64 = kv.locals().map(|l| l.eval(x)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-12, "x={x} sum={sum}");
            }

            #[test]
            fn eval_is_nonnegative_and_supported(kv in arb_knot_vector(), t in -1.2f64..1.2) {
                let values = kv.values();
                let span = values[values.len() - 1] - values[0];
                let x = values[0] + span * t;
                for local in kv.locals() {
                    let v = local.eval(x);
                    prop_assert!(v >= 0.0);
                    let (lo, hi) = local.support();
                    if x < lo || x >= hi {
                        prop_assert_eq!(v, 0.0);
                    }
                }
            }

            #[test]
            fn split_weights_reproduce_the_function(kv in arb_knot_vector(), pick in 0usize..100, t in 0.0f64..1.0) {
                let local = kv.local(pick % kv.dim());
                let (lo, hi) = local.support();
                let x = lo + (hi - lo) * (0.05 + 0.9 * t);
                prop_assume!(x > lo && x < hi && local.multiplicity(x) == 0);
                let ((l, a1), (r, a2)) = local.split(x).unwrap();
                for s in 0..20 {
                    let u = lo - 0.1 + (hi - lo + 0.2) * s as f64 / 19.0;
                    let direct = local.eval(u);
                    let combined = crate::rational::to_f64(&a1) * l.eval(u)
                        + crate::rational::to_f64(&a2) * r.eval(u);
                    prop_assert!((direct - combined).abs() < 1e-12, "u={u}");
                }
            }
        }
    }
}
