//! Comparison instruments for spline collections: exact Bernstein
//! extraction, linear independence over rationals, partition of unity,
//! nestedness, polynomial reproduction per element, and basis-growth tables.

mod growth;
pub mod ratmat;

pub use growth::{growth_compare, GrowthScenario, GrowthStep, GrowthTable};

use crate::collection::{Independence, SplineCollection};
use crate::error::{Error, Result};
use crate::lrmesh::{BoxN, BoxPartition};
use crate::parallel;
use crate::rational::{invert, rat, rat_usize, to_f64, Rat};
use crate::splinecore::{LocalKnots, TensorBSpline};
use num_traits::{One, Zero};
use ratmat::{rank_with_certificate, Echelon, SparseRow};
use std::collections::{BTreeMap, HashMap};

/// Default sampling density per parameter direction.
pub const DEFAULT_SAMPLES: usize = 50;

/// A member expressed as an exact linear combination of tensor B-splines.
/// Plain collection members are singletons `(gamma_i, B_i)`; truncated
/// hierarchical functions carry their full expansion.
pub type LinearMember = Vec<(TensorBSpline, Rat)>;

/// Per-element Bernstein coefficients of every member of a collection.
pub struct ExtractionTable {
    elements: Vec<BoxN>,
    degrees: Vec<usize>,
    block: usize,
    rows: Vec<SparseRow>,
}

impl ExtractionTable {
    pub fn elements(&self) -> &[BoxN] {
        &self.elements
    }

    /// Bernstein coefficients per element per member row.
    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    /// Reconstruct member `row`'s value at `x` from the table (test oracle
    /// support: must match direct evaluation).
    pub fn eval_member(&self, row: usize, x: &[f64]) -> Option<f64> {
        let elem = self
            .elements
            .iter()
            .position(|e| e.iter().zip(x).all(|(&(a, b), &xi)| a <= xi && xi < b))?;
        let mut total = Rat::zero();
        for (local, coeff) in self.rows[row]
            .range(elem * self.block..(elem + 1) * self.block)
            .map(|(&c, v)| (c - elem * self.block, v))
        {
            let mut basis = Rat::one();
            let mut rem = local;
            for k in (0..self.degrees.len()).rev() {
                let p = self.degrees[k];
                let j = rem % (p + 1);
                rem /= p + 1;
                let (a, b) = self.elements[elem][k];
                let u = (rat(x[k]) - rat(a)) / (rat(b) - rat(a));
                basis *= bernstein_value(p, j, &u);
            }
            total += coeff * basis;
        }
        Some(to_f64(&total))
    }
}

fn bernstein_value(p: usize, j: usize, u: &Rat) -> Rat {
    let mut v = crate::rational::binomial(p, j);
    for _ in 0..j {
        v *= u;
    }
    let w = Rat::one() - u;
    for _ in 0..(p - j) {
        v *= &w;
    }
    v
}

/// Exact Bernstein extraction of a collection over a partition. Every
/// member's knots must lie on the partition.
pub fn extract(collection: &SplineCollection, partition: &BoxPartition) -> Result<ExtractionTable> {
    for s in collection.splines() {
        let b = s.spline();
        for dir in 0..b.dim() {
            let transverse: BoxN = (0..b.dim())
                .filter(|&j| j != dir)
                .map(|j| b.factor(j).support())
                .collect();
            for &v in b.factor(dir).values() {
                let m = b.factor(dir).multiplicity(v);
                if partition.covering_multiplicity(dir, v, &transverse) < m {
                    return Err(Error::Inconsistency(format!(
                        "member knot {v} in direction {dir} does not lie on the partition"
                    )));
                }
            }
        }
    }
    let members: Vec<LinearMember> = collection
        .splines()
        .iter()
        .map(|s| vec![(s.spline().clone(), s.gamma_exact().clone())])
        .collect();
    extract_members(&members, &partition.elements()?, collection.degrees())
}

/// Extraction of members given as exact linear combinations.
pub fn extract_members(
    members: &[LinearMember],
    elements: &[BoxN],
    degrees: &[usize],
) -> Result<ExtractionTable> {
    let block: usize = degrees.iter().map(|&p| p + 1).product();
    // univariate tasks are deduplicated, solved in parallel, then assembled
    let mut tasks: BTreeMap<UniKey, (LocalKnots, f64, f64)> = BTreeMap::new();
    for member in members {
        for (spline, _) in member {
            for (elem_idx, elem) in elements.iter().enumerate() {
                if !element_in_support(spline, elem)? {
                    continue;
                }
                let _ = elem_idx;
                for (k, factor) in spline.factors().iter().enumerate() {
                    let (a, b) = elem[k];
                    let key = uni_key(factor, a, b);
                    tasks.entry(key).or_insert_with(|| (factor.clone(), a, b));
                }
            }
        }
    }
    let task_list: Vec<(UniKey, LocalKnots, f64, f64)> = tasks
        .into_iter()
        .map(|(k, (f, a, b))| (k, f, a, b))
        .collect();
    let minv_cache: HashMap<usize, Vec<Vec<Rat>>> = {
        let mut cache = HashMap::new();
        for p in degrees {
            cache
                .entry(*p)
                .or_insert_with(|| bernstein_collocation_inverse(*p));
        }
        cache
    };
    let solved: Vec<Result<Vec<Rat>>> = parallel::map_slice(&task_list, |(_, factor, a, b)| {
        univariate_bernstein_coeffs(factor, *a, *b, &minv_cache[&factor.degree()])
    });
    let mut uni: HashMap<UniKey, Vec<Rat>> = HashMap::new();
    for ((key, _, _, _), coeffs) in task_list.into_iter().zip(solved) {
        uni.insert(key, coeffs?);
    }
    // assemble member rows as Kronecker products of univariate coefficients
    let mut rows: Vec<SparseRow> = Vec::with_capacity(members.len());
    for member in members {
        let mut row = SparseRow::new();
        for (spline, scale) in member {
            for (elem_idx, elem) in elements.iter().enumerate() {
                if !element_in_support(spline, elem)? {
                    continue;
                }
                let per_dir: Vec<&Vec<Rat>> = spline
                    .factors()
                    .iter()
                    .enumerate()
                    .map(|(k, f)| &uni[&uni_key(f, elem[k].0, elem[k].1)])
                    .collect();
                let d = degrees.len();
                let mut idx = vec![0usize; d];
                for local in 0..block {
                    let mut v = scale.clone();
                    for (k, &i) in idx.iter().enumerate() {
                        v *= &per_dir[k][i];
                    }
                    if !v.is_zero() {
                        let col = elem_idx * block + local;
                        let e = row.entry(col).or_insert_with(Rat::zero);
                        *e += v;
                        if e.is_zero() {
                            row.remove(&col);
                        }
                    }
                    let mut k = d;
                    while k > 0 {
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] <= degrees[k] {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(ExtractionTable {
        elements: elements.to_vec(),
        degrees: degrees.to_vec(),
        block,
        rows,
    })
}

type UniKey = (Vec<u64>, u64, u64);

fn uni_key(factor: &LocalKnots, a: f64, b: f64) -> UniKey {
    (factor.bit_key(), a.to_bits(), b.to_bits())
}

fn element_in_support(spline: &TensorBSpline, elem: &[(f64, f64)]) -> Result<bool> {
    for (k, factor) in spline.factors().iter().enumerate() {
        let (slo, shi) = factor.support();
        let (a, b) = elem[k];
        if b <= slo || a >= shi {
            return Ok(false);
        }
    }
    for (k, factor) in spline.factors().iter().enumerate() {
        let (slo, shi) = factor.support();
        let (a, b) = elem[k];
        if !(a >= slo && b <= shi) {
            return Err(Error::Inconsistency(format!(
                "element {elem:?} straddles a support boundary in direction {k}"
            )));
        }
        if factor.values().iter().any(|&t| t > a && t < b) {
            return Err(Error::Inconsistency(format!(
                "element {elem:?} contains an interior knot in direction {k}"
            )));
        }
    }
    Ok(true)
}

/// Inverse of the Bernstein collocation matrix at the interior nodes
/// `(m+1)/(p+2)`, shared across all elements of one degree.
fn bernstein_collocation_inverse(p: usize) -> Vec<Vec<Rat>> {
    let nodes: Vec<Rat> = (0..=p)
        .map(|m| rat_usize(m + 1) / rat_usize(p + 2))
        .collect();
    let mat: Vec<Vec<Rat>> = nodes
        .iter()
        .map(|u| (0..=p).map(|j| bernstein_value(p, j, u)).collect())
        .collect();
    invert(&mat).expect("Bernstein collocation matrix is invertible")
}

fn univariate_bernstein_coeffs(
    factor: &LocalKnots,
    a: f64,
    b: f64,
    minv: &[Vec<Rat>],
) -> Result<Vec<Rat>> {
    let p = factor.degree();
    let ra = rat(a);
    let rb = rat(b);
    let values: Vec<Rat> = (0..=p)
        .map(|m| {
            let x = &ra + (&rb - &ra) * rat_usize(m + 1) / rat_usize(p + 2);
            factor.eval_exact(&x)
        })
        .collect();
    Ok(minv
        .iter()
        .map(|row| {
            row.iter()
                .zip(&values)
                .map(|(m, v)| m * v)
                .fold(Rat::zero(), |acc, x| acc + x)
        })
        .collect())
}

/// Outcome of the exact independence test.
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    pub status: Independence,
    pub count: usize,
    pub rank: usize,
    /// Coefficients of a vanishing combination when dependent, scaled to
    /// unit max-norm.
    pub certificate: Option<Vec<f64>>,
}

/// Exact rank of the stacked extraction matrix over rationals.
pub fn linear_independence(
    collection: &SplineCollection,
    partition: &BoxPartition,
) -> Result<IndependenceReport> {
    let table = extract(collection, partition)?;
    Ok(independence_of_rows(table.rows.clone()))
}

/// Independence of members given directly as extraction rows.
pub fn independence_of_rows(rows: Vec<SparseRow>) -> IndependenceReport {
    let count = rows.len();
    let (rank, cert) = rank_with_certificate(rows);
    let certificate = cert.map(|c| {
        let floats: Vec<f64> = c.iter().map(to_f64).collect();
        let max = floats.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        floats.iter().map(|v| v / max).collect()
    });
    IndependenceReport {
        status: if rank == count {
            Independence::Independent
        } else {
            Independence::NotIndependent
        },
        count,
        rank,
        certificate,
    }
}

/// Partition-of-unity report: sampled maximum deviation of
/// `sum_i gamma_i B_i` from one, plus the exact per-element Bernstein check.
#[derive(Debug, Clone)]
pub struct PoUReport {
    pub max_deviation: f64,
    pub exact: bool,
}

pub fn partition_of_unity(
    collection: &SplineCollection,
    partition: &BoxPartition,
    samples_per_dir: usize,
) -> Result<PoUReport> {
    // exact route: the Bernstein coefficients of the scaled sum are all one
    let table = extract(collection, partition)?;
    let mut exact = true;
    'outer: for elem in 0..table.elements.len() {
        let mut sums = vec![Rat::zero(); table.block];
        for row in &table.rows {
            for (&col, v) in row.range(elem * table.block..(elem + 1) * table.block) {
                sums[col - elem * table.block] += v;
            }
        }
        for s in sums {
            if s != Rat::one() {
                exact = false;
                break 'outer;
            }
        }
    }
    // sampled route on knot-avoiding interior points
    let pts = sample_points(collection, samples_per_dir);
    let devs = parallel::map_slice(&pts, |x| {
        collection
            .weighted_basis_sum(x)
            .map(|s| (s - 1.0).abs())
            .unwrap_or(f64::INFINITY)
    });
    let max_deviation = devs.into_iter().fold(0.0f64, f64::max);
    Ok(PoUReport {
        max_deviation,
        exact,
    })
}

/// Chebyshev-spaced interior sample grid, nudged off any member knot value.
pub(crate) fn sample_points(collection: &SplineCollection, n: usize) -> Vec<Vec<f64>> {
    let d = collection.dim();
    let mut knot_sets: Vec<std::collections::BTreeSet<u64>> = vec![Default::default(); d];
    for s in collection.splines() {
        for (k, f) in s.spline().factors().iter().enumerate() {
            for &v in f.values() {
                knot_sets[k].insert(v.to_bits());
            }
        }
    }
    let axes: Vec<Vec<f64>> = collection
        .domain()
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            (0..n)
                .map(|i| {
                    let theta = std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * n as f64);
                    let mut x = a + (b - a) * 0.5 * (1.0 - theta.cos());
                    while knot_sets[k].contains(&x.to_bits()) {
                        x += (b - a) * 1e-9;
                    }
                    x.clamp(a, b)
                })
                .collect()
        })
        .collect();
    let total = n.pow(d as u32);
    let mut pts = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        pts.push(idx.iter().enumerate().map(|(k, &i)| axes[k][i]).collect());
        let mut k = d;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    pts
}

/// Nestedness verdict with the residual left when a coarse member falls
/// outside the fine span.
#[derive(Debug, Clone)]
pub struct NestednessReport {
    pub nested: bool,
    pub max_residual: f64,
}

/// True when every member of `coarse` lies in the span of `fine`, decided by
/// exact reduction against an echelon basis of the fine extraction rows.
pub fn nestedness(coarse: &SplineCollection, fine: &SplineCollection) -> Result<NestednessReport> {
    if coarse.domain() != fine.domain() {
        return Err(Error::invalid("collections live on different domains".to_string()));
    }
    if coarse.degrees() != fine.degrees() {
        return Err(Error::invalid("collections have different degrees".to_string()));
    }
    let partition = arrangement_partition(&[coarse, fine])?;
    let elements = partition.elements()?;
    let to_members = |c: &SplineCollection| -> Vec<LinearMember> {
        c.splines()
            .iter()
            .map(|s| vec![(s.spline().clone(), s.gamma_exact().clone())])
            .collect()
    };
    let fine_table = extract_members(&to_members(fine), &elements, fine.degrees())?;
    let coarse_table = extract_members(&to_members(coarse), &elements, coarse.degrees())?;
    nestedness_of_rows(coarse_table.rows, fine_table.rows)
}

pub fn nestedness_of_rows(
    coarse_rows: Vec<SparseRow>,
    fine_rows: Vec<SparseRow>,
) -> Result<NestednessReport> {
    let mut ech = Echelon::new();
    for row in fine_rows {
        ech.insert(row);
    }
    let mut max_residual = 0.0f64;
    let mut nested = true;
    for mut row in coarse_rows {
        ech.reduce(&mut row);
        if !row.is_empty() {
            nested = false;
            let r = row
                .values()
                .map(|v| to_f64(v).abs())
                .fold(0.0f64, f64::max);
            max_residual = max_residual.max(r);
        }
    }
    Ok(NestednessReport {
        nested,
        max_residual,
    })
}

/// Tensor-arrangement partition spanning all member knots of the given
/// collections: every unique knot value becomes a full-extent line carrying
/// the largest multiplicity seen.
pub fn arrangement_partition(collections: &[&SplineCollection]) -> Result<BoxPartition> {
    let first = collections
        .first()
        .ok_or_else(|| Error::invalid("no collections given".to_string()))?;
    let domain = first.domain().to_vec();
    let degrees = first.degrees().to_vec();
    let mut lines: BTreeMap<(usize, u64), (f64, usize)> = BTreeMap::new();
    for c in collections {
        if c.domain() != domain.as_slice() || c.degrees() != degrees.as_slice() {
            return Err(Error::invalid("collections are not on a common space".to_string()));
        }
        for s in c.splines() {
            for (k, f) in s.spline().factors().iter().enumerate() {
                let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
                for &v in f.values() {
                    *seen.entry(v.to_bits()).or_insert(0) += 1;
                }
                for (bits, m) in seen {
                    let v = f64::from_bits(bits);
                    let e = lines.entry((k, crate::splinecore::f64_total_key(v))).or_insert((v, 0));
                    e.1 = e.1.max(m);
                }
            }
        }
    }
    BoxPartition::from_full_lines(
        domain,
        degrees,
        lines.iter().map(|(&(dir, _), &(v, m))| (dir, v, m)),
    )
}

/// Per-element check that the members span the full tensor polynomial space.
pub fn polynomial_reproduction(
    collection: &SplineCollection,
    partition: &BoxPartition,
) -> Result<Vec<bool>> {
    let table = extract(collection, partition)?;
    let block = table.block;
    let n_elem = table.elements.len();
    let results = parallel::map_indexed(n_elem, |elem| {
        let lo = elem * block;
        let hi = lo + block;
        let mut ech = Echelon::new();
        for row in &table.rows {
            let sub: SparseRow = row.range(lo..hi).map(|(&c, v)| (c - lo, v.clone())).collect();
            if !sub.is_empty() {
                ech.insert(sub);
            }
        }
        ech.rank() == block
    });
    Ok(results)
}
