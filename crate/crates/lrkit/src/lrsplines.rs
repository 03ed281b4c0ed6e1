//! LR B-spline collections: refinement by meshrectangle insertion with
//! recursive splitting to minimal support, and structured (hierarchical-style)
//! refinement.

use crate::collection::{ControlPoint, Independence, ScaledBSpline, SplineCollection};
use crate::error::{Error, Result};
use crate::lrmesh::{splits_support, BoxPartition, MeshRectangle};
use crate::rational::{rat, to_f64, Rat};
use crate::splinecore::{KnotVector, LocalKnots, TensorBSpline};
use std::collections::BTreeMap;
use std::collections::VecDeque;

/// An LR B-spline collection: a box-partition mesh plus the minimal-support
/// B-splines living on it.
#[derive(Debug, Clone)]
pub struct LrCollection {
    mesh: BoxPartition,
    collection: SplineCollection,
    /// When set, linear independence is re-verified (exact rank) after every
    /// refinement step; otherwise the status degrades to `NotTested`.
    pub hand_in_hand: bool,
}

impl LrCollection {
    /// Start from a full tensor-product space.
    pub fn from_tensor(kvs: &[KnotVector], coefficients: Vec<ControlPoint>) -> Result<Self> {
        let mesh = BoxPartition::from_tensor_space(kvs)?;
        let collection = SplineCollection::from_tensor(kvs, coefficients)?;
        Ok(LrCollection {
            mesh,
            collection,
            hand_in_hand: false,
        })
    }

    pub fn from_tensor_greville(kvs: &[KnotVector]) -> Result<Self> {
        let mesh = BoxPartition::from_tensor_space(kvs)?;
        let collection = SplineCollection::from_tensor_greville(kvs)?;
        Ok(LrCollection {
            mesh,
            collection,
            hand_in_hand: false,
        })
    }

    pub fn mesh(&self) -> &BoxPartition {
        &self.mesh
    }

    pub fn collection(&self) -> &SplineCollection {
        &self.collection
    }

    pub fn len(&self) -> usize {
        self.collection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.collection.is_empty()
    }

    /// Insert a meshrectangle and recursively split every B-spline whose
    /// support it (or any stored mesh line) traverses, until the collection
    /// holds only minimal-support B-splines. Scaling factors are distributed
    /// exactly; coincident children are merged by summing contributions.
    pub fn refine(&self, r: &MeshRectangle) -> Result<Self> {
        let split_count = self
            .collection
            .splines()
            .iter()
            .filter(|s| splits_support(r, s.spline()))
            .count();
        if split_count == 0 {
            return Err(Error::NoSplit);
        }
        self.refine_allowing_noop(r).map(|(c, _)| c)
    }

    /// Like [`refine`](Self::refine) but reports per-step statistics and
    /// tolerates rectangles that split nothing (used by structured
    /// refinement, which skips already-present bisections silently).
    pub fn refine_allowing_noop(&self, r: &MeshRectangle) -> Result<(Self, RefineStats)> {
        let split: Vec<usize> = (0..self.collection.len())
            .filter(|&i| splits_support(r, self.collection.splines()[i].spline()))
            .collect();
        let mesh = self.mesh.insert(r)?;
        let weighted = self.collection.is_rational();
        let mut table = AccumTable::new(weighted);
        for s in self.collection.splines() {
            table.add(
                s.spline().clone(),
                s.gamma_exact().clone(),
                &s.coeff.homogeneous(),
            );
        }
        table.resolve(&mesh)?;
        let splines = table.into_splines()?;
        let produced = splines
            .iter()
            .filter(|s| {
                !self
                    .collection
                    .splines()
                    .iter()
                    .any(|old| old.spline() == s.spline())
            })
            .count();
        let stats = RefineStats {
            split: split.len(),
            produced,
        };
        let mut collection = SplineCollection::new(
            self.collection.domain().to_vec(),
            self.collection.degrees().to_vec(),
            splines,
            Independence::NotTested,
        )?;
        if self.hand_in_hand {
            let report = crate::diagnostics::linear_independence(&collection, &mesh)?;
            collection.independence = report.status;
        }
        Ok((
            LrCollection {
                mesh,
                collection,
                hand_in_hand: self.hand_in_hand,
            },
            stats,
        ))
    }

    /// Hierarchical-style refinement: bisect every knot span of each selected
    /// B-spline in every parameter direction. Verifies independence exactly.
    pub fn structured_refine(&self, selected: &[usize]) -> Result<Self> {
        if selected.is_empty() {
            return Err(Error::invalid("structured refinement needs a nonempty selection".to_string()));
        }
        if selected.iter().any(|&i| i >= self.collection.len()) {
            return Err(Error::invalid("selected index out of range".to_string()));
        }
        let snapshots: Vec<TensorBSpline> = selected
            .iter()
            .map(|&i| self.collection.splines()[i].spline().clone())
            .collect();
        let mut current = self.clone();
        for b in &snapshots {
            for dir in 0..b.dim() {
                let extent: Vec<(f64, f64)> = (0..b.dim())
                    .filter(|&j| j != dir)
                    .map(|j| b.factor(j).support())
                    .collect();
                for (a, z) in b.factor(dir).spans() {
                    let mid = 0.5 * (a + z);
                    let rect = MeshRectangle::new(dir, mid, extent.clone(), 1)?;
                    let any_split = current
                        .collection
                        .splines()
                        .iter()
                        .any(|s| splits_support(&rect, s.spline()));
                    if !any_split {
                        continue;
                    }
                    current = current.refine_allowing_noop(&rect)?.0;
                }
            }
        }
        let report = crate::diagnostics::linear_independence(&current.collection, &current.mesh)?;
        current.collection.independence = report.status;
        Ok(current)
    }

    /// True when no stored mesh line splits `b`.
    pub fn minimal_support(&self, b: &TensorBSpline) -> bool {
        self.mesh.has_minimal_support(b)
    }

    /// Check the collection invariants: minimal support for every member and
    /// member knots lying on mesh lines of sufficient multiplicity.
    pub fn validate(&self) -> Result<()> {
        for s in self.collection.splines() {
            let b = s.spline();
            if !self.minimal_support(b) {
                return Err(Error::Inconsistency(
                    "collection holds a non-minimal B-spline".to_string(),
                ));
            }
            for dir in 0..b.dim() {
                let transverse: Vec<(f64, f64)> = (0..b.dim())
                    .filter(|&j| j != dir)
                    .map(|j| b.factor(j).support())
                    .collect();
                let mut seen = std::collections::BTreeSet::new();
                for &v in b.factor(dir).values() {
                    if !seen.insert(v.to_bits()) {
                        continue;
                    }
                    let m = b.factor(dir).multiplicity(v);
                    if self.mesh.covering_multiplicity(dir, v, &transverse) < m {
                        return Err(Error::Inconsistency(format!(
                            "knot {v} in direction {dir} is not carried by the mesh"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-refinement statistics: how many stored B-splines the inserted
/// rectangle split, and how many new B-splines the step produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefineStats {
    pub split: usize,
    pub produced: usize,
}

/// Anchor point of a tensor B-spline: the middle knot for odd degrees, the
/// average of the two middle knots for even degrees.
pub fn anchor(b: &TensorBSpline) -> Vec<f64> {
    b.factors()
        .iter()
        .map(|f| {
            let p = f.degree();
            let v = f.values();
            if p % 2 == 1 {
                v[(p + 1) / 2]
            } else {
                0.5 * (v[p / 2] + v[p / 2 + 1])
            }
        })
        .collect()
}

/// Accumulation table used while splitting to minimal support: members keyed
/// by exact knot signature, carrying exact scaling factors and homogeneous
/// coefficient moments (`gamma * coeff`).
struct AccumTable {
    weighted: bool,
    entries: BTreeMap<Vec<Vec<u64>>, (TensorBSpline, Rat, Vec<Rat>)>,
}

impl AccumTable {
    fn new(weighted: bool) -> Self {
        AccumTable {
            weighted,
            entries: BTreeMap::new(),
        }
    }

    fn add(&mut self, spline: TensorBSpline, gamma: Rat, hcoeff_f64: &[f64]) {
        let moment: Vec<Rat> = hcoeff_f64.iter().map(|&c| rat(c) * &gamma).collect();
        self.add_exact(spline, gamma, moment);
    }

    fn add_exact(&mut self, spline: TensorBSpline, gamma: Rat, moment: Vec<Rat>) {
        let key = spline.bit_key();
        match self.entries.get_mut(&key) {
            Some((_, g, m)) => {
                *g += gamma;
                for (acc, v) in m.iter_mut().zip(moment) {
                    *acc += v;
                }
            }
            None => {
                self.entries.insert(key, (spline, gamma, moment));
            }
        }
    }

    /// Split entries against the mesh until every one has minimal support.
    fn resolve(&mut self, mesh: &BoxPartition) -> Result<()> {
        let mut queue: VecDeque<Vec<Vec<u64>>> = self.entries.keys().cloned().collect();
        let mut guard = 0usize;
        let cap = 1000 * (self.entries.len() + 16) * (mesh.meshrectangles().len() + 1);
        while let Some(key) = queue.pop_front() {
            guard += 1;
            if guard > cap {
                return Err(Error::FixpointFailure { iterations: guard });
            }
            let (spline, dir, value) = match self.entries.get(&key) {
                Some((spline, _, _)) => match mesh.find_split(spline) {
                    Some((dir, value)) => (spline.clone(), dir, value),
                    None => continue,
                },
                None => continue,
            };
            let (_, gamma, moment) = self.entries.remove(&key).unwrap();
            let ((left, a1), (right, a2)) = spline.factor(dir).split(value)?;
            for (child_factor, alpha) in [(left, a1), (right, a2)] {
                let mut factors: Vec<LocalKnots> = spline.factors().to_vec();
                factors[dir] = child_factor;
                let child = TensorBSpline::new(factors)?;
                let child_key = child.bit_key();
                let g = &gamma * &alpha;
                let m: Vec<Rat> = moment.iter().map(|v| v * &alpha).collect();
                self.add_exact(child, g, m);
                queue.push_back(child_key);
            }
        }
        Ok(())
    }

    fn into_splines(self) -> Result<Vec<ScaledBSpline>> {
        let weighted = self.weighted;
        self.entries
            .into_values()
            .map(|(spline, gamma, moment)| {
                let hcoeff: Vec<f64> = moment.iter().map(|m| to_f64(&(m / &gamma))).collect();
                let coeff = ControlPoint::from_homogeneous(&hcoeff, weighted);
                ScaledBSpline::with_exact_gamma(spline, gamma, coeff)
            })
            .collect()
    }
}
