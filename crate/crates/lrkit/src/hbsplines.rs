//! Hierarchical B-splines over dyadic grids with Kraft-style selection, and
//! their truncated variant restoring partition of unity.
//!
//! Levels are clamped uniform tensor spaces on the domain box; level `l+1`
//! halves every knot span of level `l`, so the spaces nest exactly. A
//! function at level `l` is active when its support lies inside the level-`l`
//! refined region but not inside the level-`l+1` one (level 0 region is the
//! whole domain).

use crate::collection::{ControlPoint, Independence, ScaledBSpline, SplineCollection};
use crate::diagnostics::LinearMember;
use crate::error::{Error, Result};
use crate::rational::rat;
use crate::splinecore::{oslo_refine, KnotVector, RefinementMatrix, TensorBSpline};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub const DEFAULT_MAX_LEVEL: usize = 10;

type CellIdx = Vec<usize>;
type FnIdx = Vec<usize>;

/// One dyadic level: the clamped uniform tensor space on the `2^l`-scaled
/// lattice restricted to the domain box.
#[derive(Debug, Clone)]
pub struct DyadicLevel {
    level: usize,
    kvs: Vec<KnotVector>,
    cells: Vec<usize>,
}

impl DyadicLevel {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn knot_vectors(&self) -> &[KnotVector] {
        &self.kvs
    }

    /// Cells per direction.
    pub fn cell_counts(&self) -> &[usize] {
        &self.cells
    }

    pub fn fn_counts(&self) -> Vec<usize> {
        self.kvs.iter().map(|kv| kv.dim()).collect()
    }

    pub fn tensor_bspline(&self, idx: &[usize]) -> TensorBSpline {
        TensorBSpline::new(
            self.kvs
                .iter()
                .zip(idx)
                .map(|(kv, &i)| kv.local(i))
                .collect(),
        )
        .expect("level window is valid")
    }

    /// Cell index range `[lo, hi)` covered by the support of function `j`
    /// in direction `k`.
    fn support_cells_1d(&self, k: usize, j: usize) -> (usize, usize) {
        let p = self.kvs[k].degree();
        (j.saturating_sub(p), (j + 1).min(self.cells[k]))
    }
}

/// Per-level active-B-spline selection over nested refined regions.
#[derive(Debug, Clone)]
pub struct HierarchySelection {
    domain: Vec<(f64, f64)>,
    degrees: Vec<usize>,
    levels: Vec<DyadicLevel>,
    /// refined region per level, as sets of that level's cell indices
    regions: Vec<BTreeSet<CellIdx>>,
    active: Vec<BTreeSet<FnIdx>>,
    controls: Option<BTreeMap<(usize, FnIdx), ControlPoint>>,
    pub max_level: usize,
}

impl HierarchySelection {
    /// Level-0 tensor space on `domain` with `base_cells` uniform spans per
    /// direction; every level-0 function starts active.
    pub fn new(domain: Vec<(f64, f64)>, degrees: Vec<usize>, base_cells: Vec<usize>) -> Result<Self> {
        if domain.is_empty()
            || domain.len() > 3
            || domain.len() != degrees.len()
            || domain.len() != base_cells.len()
        {
            return Err(Error::invalid(
                "1 to 3 directions with matching degrees/cells required".to_string(),
            ));
        }
        let level0 = make_level(&domain, &degrees, &base_cells, 0)?;
        let all_cells = enumerate_boxes(&level0.cells);
        let all_fns = enumerate_boxes(&level0.fn_counts());
        Ok(HierarchySelection {
            domain,
            degrees,
            levels: vec![level0],
            regions: vec![all_cells.into_iter().collect()],
            active: vec![all_fns.into_iter().collect()],
            controls: None,
            max_level: DEFAULT_MAX_LEVEL,
        })
    }

    /// Attach level-0 control values (one per level-0 function, lexicographic
    /// order, last direction fastest). Refinement keeps the represented map
    /// unchanged by pushing deactivated contributions to finer levels.
    pub fn with_controls(mut self, controls: Vec<ControlPoint>) -> Result<Self> {
        let n: usize = self.levels[0].fn_counts().iter().product();
        if controls.len() != n {
            return Err(Error::invalid(format!("expected {n} control values")));
        }
        if controls.iter().any(|c| c.weight.is_some()) {
            return Err(Error::invalid("hierarchical controls do not take weights".to_string()));
        }
        let fns = enumerate_boxes(&self.levels[0].fn_counts());
        self.controls = Some(
            fns.into_iter()
                .zip(controls)
                .map(|(idx, c)| ((0usize, idx), c))
                .collect(),
        );
        Ok(self)
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn levels(&self) -> &[DyadicLevel] {
        &self.levels
    }

    pub fn refined_region(&self, level: usize) -> Option<&BTreeSet<CellIdx>> {
        self.regions.get(level)
    }

    pub fn active(&self, level: usize) -> Option<&BTreeSet<FnIdx>> {
        self.active.get(level)
    }

    pub fn active_counts(&self) -> Vec<usize> {
        self.active.iter().map(|a| a.len()).collect()
    }

    pub fn total_active(&self) -> usize {
        self.active.iter().map(|a| a.len()).sum()
    }

    pub fn control(&self, level: usize, idx: &[usize]) -> Option<&ControlPoint> {
        self.controls.as_ref()?.get(&(level, idx.to_vec()))
    }

    /// Extend the refined region at `level + 1` by a union of level-`level+1`
    /// cells and recompute the selection. Each new cell's parent must already
    /// lie in the level-`level` region.
    pub fn hb_refine(&self, level: usize, cells: &[CellIdx]) -> Result<Self> {
        if level >= self.levels.len() {
            return Err(Error::invalid(format!(
                "cannot refine level {level}: only {} levels exist",
                self.levels.len()
            )));
        }
        if cells.is_empty() {
            return Ok(self.clone());
        }
        if level + 1 > self.max_level {
            return Err(Error::invalid(format!("level cap {} reached", self.max_level)));
        }
        let mut next = self.clone();
        if next.levels.len() == level + 1 {
            next.levels
                .push(make_level(&next.domain, &next.degrees, &next.levels[0].cells, level + 1)?);
            next.regions.push(BTreeSet::new());
            next.active.push(BTreeSet::new());
        }
        let child_counts = next.levels[level + 1].cells.clone();
        for cell in cells {
            if cell.len() != next.domain.len()
                || cell.iter().zip(&child_counts).any(|(&c, &n)| c >= n)
            {
                return Err(Error::invalid(format!(
                    "cell {cell:?} outside the level-{} grid",
                    level + 1
                )));
            }
            let parent: CellIdx = cell.iter().map(|&c| c >> 1).collect();
            if !next.regions[level].contains(&parent) {
                return Err(Error::invalid(format!(
                    "cell {cell:?} lies outside the refined region of level {level}"
                )));
            }
            next.regions[level + 1].insert(cell.clone());
        }
        let old_active = std::mem::take(&mut next.active);
        next.recompute_active();
        next.push_down_controls(&old_active)?;
        Ok(next)
    }

    fn recompute_active(&mut self) {
        self.active = (0..self.levels.len())
            .map(|j| {
                self.candidate_functions(j)
                    .into_iter()
                    .filter(|idx| self.is_active(j, idx))
                    .collect()
            })
            .collect();
    }

    /// Functions whose support intersects the level-`j` region.
    fn candidate_functions(&self, j: usize) -> BTreeSet<FnIdx> {
        let level = &self.levels[j];
        let d = self.domain.len();
        let mut out = BTreeSet::new();
        for cell in &self.regions[j] {
            // functions covering this cell: index ranges [c, c+p] per direction
            let ranges: Vec<(usize, usize)> = (0..d)
                .map(|k| {
                    let p = self.degrees[k];
                    let n = level.kvs[k].dim();
                    (cell[k], (cell[k] + p).min(n - 1))
                })
                .collect();
            for idx in enumerate_ranges(&ranges) {
                out.insert(idx);
            }
        }
        out
    }

    /// Kraft-style predicate: support inside region `j`, not inside region
    /// `j + 1`.
    pub fn is_active(&self, j: usize, idx: &[usize]) -> bool {
        let level = &self.levels[j];
        let d = self.domain.len();
        let supp: Vec<(usize, usize)> = (0..d).map(|k| level.support_cells_1d(k, idx[k])).collect();
        let supp_ranges: Vec<(usize, usize)> = supp.iter().map(|&(a, b)| (a, b - 1)).collect();
        for cell in enumerate_ranges(&supp_ranges) {
            if !self.regions[j].contains(&cell) {
                return false;
            }
        }
        if j + 1 >= self.levels.len() {
            return true;
        }
        // contained in the finer region iff every child cell of the support is in it
        let child_ranges: Vec<(usize, usize)> = supp.iter().map(|&(a, b)| (2 * a, 2 * b - 1)).collect();
        for cell in enumerate_ranges(&child_ranges) {
            if !self.regions[j + 1].contains(&cell) {
                return true;
            }
        }
        false
    }

    /// Re-express deactivated contributions in the new active set.
    fn push_down_controls(&mut self, old_active: &[BTreeSet<FnIdx>]) -> Result<()> {
        let Some(controls) = self.controls.take() else {
            return Ok(());
        };
        let mut kept: BTreeMap<(usize, FnIdx), ControlPoint> = BTreeMap::new();
        let mut pending: VecDeque<(usize, FnIdx, Vec<f64>)> = VecDeque::new();
        for ((level, idx), cp) in controls {
            if self.active[level].contains(&idx) {
                kept.insert((level, idx), cp);
            } else {
                debug_assert!(old_active[level].contains(&idx));
                pending.push_back((level, idx, cp.coords));
            }
        }
        let gdim = kept
            .values()
            .next()
            .map(|c| c.dim())
            .or_else(|| pending.front().map(|(_, _, c)| c.len()))
            .unwrap_or(0);
        // newly activated functions start from zero
        for (level, actives) in self.active.iter().enumerate() {
            for idx in actives {
                kept.entry((level, idx.clone()))
                    .or_insert_with(|| ControlPoint::new(vec![0.0; gdim]));
            }
        }
        let matrices = self.level_matrices()?;
        while let Some((level, idx, coords)) = pending.pop_front() {
            if level + 1 >= self.levels.len() {
                return Err(Error::Inconsistency(
                    "deactivated function has no finer level to absorb it".to_string(),
                ));
            }
            for (child, w) in expand_function(&matrices[level], &idx) {
                let contribution: Vec<f64> = coords.iter().map(|c| c * w).collect();
                if self.active[level + 1].contains(&child) {
                    let slot = kept
                        .get_mut(&(level + 1, child))
                        .expect("active control exists");
                    for (a, c) in slot.coords.iter_mut().zip(&contribution) {
                        *a += c;
                    }
                } else {
                    pending.push_back((level + 1, child, contribution));
                }
            }
        }
        self.controls = Some(kept);
        Ok(())
    }

    /// Per-direction knot-insertion matrices between consecutive levels.
    fn level_matrices(&self) -> Result<Vec<Vec<RefinementMatrix>>> {
        (0..self.levels.len().saturating_sub(1))
            .map(|j| {
                (0..self.domain.len())
                    .map(|k| oslo_refine(&self.levels[j].kvs[k], &self.levels[j + 1].kvs[k]))
                    .collect()
            })
            .collect()
    }

    /// Truncate every active function: cascade its fine-level expansion
    /// through all finer levels, zeroing coefficients of active functions.
    pub fn truncate(&self) -> Result<Vec<TruncatedFunction>> {
        let matrices = self.level_matrices()?;
        let finest = self.levels.len() - 1;
        let mut out = Vec::with_capacity(self.total_active());
        for (level, actives) in self.active.iter().enumerate() {
            for idx in actives {
                let mut terms: BTreeMap<FnIdx, f64> = BTreeMap::new();
                terms.insert(idx.clone(), 1.0);
                for j in level..finest {
                    let mut next: BTreeMap<FnIdx, f64> = BTreeMap::new();
                    for (cur, w) in terms {
                        for (child, cw) in expand_function(&matrices[j], &cur) {
                            if self.active[j + 1].contains(&child) {
                                continue;
                            }
                            *next.entry(child).or_insert(0.0) += w * cw;
                        }
                    }
                    next.retain(|_, w| *w != 0.0);
                    terms = next;
                }
                out.push(TruncatedFunction {
                    level,
                    index: idx.clone(),
                    finest_level: finest,
                    terms,
                });
            }
        }
        Ok(out)
    }

    /// Flatten the selection into a collection: plain active functions with
    /// unit scaling, or the expanded truncated functions with coincident
    /// fine-level terms merged by summation.
    pub fn hb_to_collection(&self, truncated: bool) -> Result<SplineCollection> {
        let gdim = self
            .controls
            .as_ref()
            .and_then(|c| c.values().next().map(|v| v.dim()))
            .unwrap_or(1);
        let control_of = |level: usize, idx: &FnIdx| -> ControlPoint {
            self.control(level, idx)
                .cloned()
                .unwrap_or_else(|| ControlPoint::new(vec![0.0; gdim]))
        };
        let splines = if !truncated {
            let mut splines = Vec::with_capacity(self.total_active());
            for (level, actives) in self.active.iter().enumerate() {
                for idx in actives {
                    splines.push(ScaledBSpline::new(
                        self.levels[level].tensor_bspline(idx),
                        1.0,
                        control_of(level, idx),
                    )?);
                }
            }
            splines
        } else {
            let finest = self.levels.len() - 1;
            // merge expanded terms: scaling adds up, controls blend by weight
            let mut acc: BTreeMap<FnIdx, (f64, Vec<f64>)> = BTreeMap::new();
            for t in self.truncate()? {
                let cp = control_of(t.level, &t.index);
                for (idx, w) in &t.terms {
                    let e = acc.entry(idx.clone()).or_insert((0.0, vec![0.0; gdim]));
                    e.0 += w;
                    for (a, c) in e.1.iter_mut().zip(&cp.coords) {
                        *a += w * c;
                    }
                }
            }
            acc.into_iter()
                .filter(|(_, (g, _))| *g > 0.0)
                .map(|(idx, (g, m))| {
                    let coords: Vec<f64> = m.iter().map(|v| v / g).collect();
                    ScaledBSpline::new(
                        self.levels[finest].tensor_bspline(&idx),
                        g,
                        ControlPoint::new(coords),
                    )
                })
                .collect::<Result<Vec<_>>>()?
        };
        SplineCollection::new(
            self.domain.clone(),
            self.degrees.clone(),
            splines,
            Independence::NotTested,
        )
    }

    /// Active functions as exact singleton members (for diagnostics).
    pub fn hb_members(&self) -> Vec<LinearMember> {
        let mut out = Vec::with_capacity(self.total_active());
        for (level, actives) in self.active.iter().enumerate() {
            for idx in actives {
                out.push(vec![(self.levels[level].tensor_bspline(idx), rat(1.0))]);
            }
        }
        out
    }

    /// Truncated functions as exact linear combinations of finest-level
    /// B-splines (for diagnostics).
    pub fn thb_members(&self) -> Result<Vec<LinearMember>> {
        let finest = self.levels.len() - 1;
        Ok(self
            .truncate()?
            .into_iter()
            .map(|t| {
                t.terms
                    .iter()
                    .map(|(idx, &w)| (self.levels[finest].tensor_bspline(idx), rat(w)))
                    .collect()
            })
            .collect())
    }

    /// Evaluate the hierarchical representation (requires controls).
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.hb_to_collection(false)?.eval(x)
    }
}

fn make_level(
    domain: &[(f64, f64)],
    degrees: &[usize],
    base_cells: &[usize],
    level: usize,
) -> Result<DyadicLevel> {
    let cells: Vec<usize> = base_cells.iter().map(|&n| n << level).collect();
    let kvs: Vec<KnotVector> = domain
        .iter()
        .zip(degrees)
        .zip(&cells)
        .map(|((&(a, b), &p), &n)| KnotVector::uniform_clamped(p, a, b, n))
        .collect::<Result<_>>()?;
    Ok(DyadicLevel { level, kvs, cells })
}

/// Tensor expansion of one function into the next level: children and
/// weights from the per-direction knot-insertion matrices.
fn expand_function(matrices: &[RefinementMatrix], idx: &FnIdx) -> Vec<(FnIdx, f64)> {
    let d = idx.len();
    let per_dir: Vec<Vec<(usize, f64)>> = (0..d)
        .map(|k| {
            let m = &matrices[k];
            (0..m.rows())
                .filter_map(|r| {
                    let w = m.get(r, idx[k]);
                    (w != 0.0).then_some((r, w))
                })
                .collect()
        })
        .collect();
    let total: usize = per_dir.iter().map(|v| v.len()).product();
    let mut out = Vec::with_capacity(total);
    let mut cursor = vec![0usize; d];
    for _ in 0..total {
        let mut child = Vec::with_capacity(d);
        let mut w = 1.0;
        for k in 0..d {
            let (r, wk) = per_dir[k][cursor[k]];
            child.push(r);
            w *= wk;
        }
        out.push((child, w));
        let mut k = d;
        while k > 0 {
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < per_dir[k].len() {
                break;
            }
            cursor[k] = 0;
        }
    }
    out
}

fn enumerate_boxes(counts: &[usize]) -> Vec<Vec<usize>> {
    if counts.iter().any(|&n| n == 0) {
        return Vec::new();
    }
    let ranges: Vec<(usize, usize)> = counts.iter().map(|&n| (0, n - 1)).collect();
    enumerate_ranges(&ranges)
}

/// All index tuples with `lo[k] <= i[k] <= hi[k]`.
fn enumerate_ranges(ranges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let d = ranges.len();
    let total: usize = ranges.iter().map(|&(a, b)| b - a + 1).product();
    let mut out = Vec::with_capacity(total);
    let mut idx: Vec<usize> = ranges.iter().map(|&(a, _)| a).collect();
    for _ in 0..total {
        out.push(idx.clone());
        let mut k = d;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] <= ranges[k].1 {
                break;
            }
            idx[k] = ranges[k].0;
        }
    }
    out
}

/// An active function together with its surviving finest-level expansion
/// after truncation.
#[derive(Debug, Clone)]
pub struct TruncatedFunction {
    pub level: usize,
    pub index: FnIdx,
    pub finest_level: usize,
    /// finest-level function index -> coefficient
    pub terms: BTreeMap<FnIdx, f64>,
}

impl TruncatedFunction {
    pub fn eval(&self, sel: &HierarchySelection, x: &[f64]) -> Result<f64> {
        let level = &sel.levels()[self.finest_level];
        let mut sum = 0.0;
        for (idx, w) in &self.terms {
            sum += w * level.tensor_bspline(idx).eval(x)?;
        }
        Ok(sum)
    }
}

/// True when the closure of the truncated function's support is connected on
/// the finest-level cell graph.
pub fn disjoint_support_check(t: &TruncatedFunction, sel: &HierarchySelection) -> bool {
    let level = &sel.levels()[t.finest_level];
    let d = sel.domain().len();
    // cells where the truncated function is not identically zero: a cell is
    // live iff some finest function covering it keeps a nonzero coefficient
    let mut live: BTreeSet<CellIdx> = BTreeSet::new();
    for (idx, w) in &t.terms {
        if *w == 0.0 {
            continue;
        }
        let ranges: Vec<(usize, usize)> = (0..d)
            .map(|k| {
                let (a, b) = level.support_cells_1d(k, idx[k]);
                (a, b - 1)
            })
            .collect();
        for cell in enumerate_ranges(&ranges) {
            live.insert(cell);
        }
    }
    if live.is_empty() {
        return true;
    }
    let start = live.iter().next().unwrap().clone();
    let mut seen: BTreeSet<CellIdx> = BTreeSet::new();
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    while let Some(cell) = queue.pop_front() {
        for k in 0..d {
            for delta in [-1i64, 1] {
                let nk = cell[k] as i64 + delta;
                if nk < 0 {
                    continue;
                }
                let mut n = cell.clone();
                n[k] = nk as usize;
                if live.contains(&n) && seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    seen.len() == live.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics;
    use rand::{Rng, SeedableRng};

    fn base() -> HierarchySelection {
        HierarchySelection::new(vec![(0.0, 4.0), (0.0, 4.0)], vec![3, 3], vec![4, 4]).unwrap()
    }

    /// level-`level` cells covering the box [lo, hi] per direction
    fn cells_in_box(level: usize, lo: [f64; 2], hi: [f64; 2]) -> Vec<Vec<usize>> {
        let n = 4usize << level;
        let h = 4.0 / n as f64;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let c = [i as f64 * h, j as f64 * h];
                if c[0] >= lo[0] - 1e-12
                    && c[0] + h <= hi[0] + 1e-12
                    && c[1] >= lo[1] - 1e-12
                    && c[1] + h <= hi[1] + 1e-12
                {
                    out.push(vec![i, j]);
                }
            }
        }
        out
    }

    #[test]
    fn empty_region_is_identity() {
        let sel = base();
        let refined = sel.hb_refine(0, &[]).unwrap();
        assert_eq!(refined.active_counts(), sel.active_counts());
        assert_eq!(sel.total_active(), 49);
    }

    #[test]
    fn full_refinement_replaces_the_space() {
        let sel = base();
        let all1 = cells_in_box(1, [0.0, 0.0], [4.0, 4.0]);
        let refined = sel.hb_refine(0, &all1).unwrap();
        assert_eq!(refined.active_counts()[0], 0);
        assert_eq!(refined.active_counts()[1], 11 * 11);
        // refining the whole domain again leaves only the finest space
        let all2 = cells_in_box(2, [0.0, 0.0], [4.0, 4.0]);
        let refined = refined.hb_refine(1, &all2).unwrap();
        assert_eq!(refined.active_counts(), vec![0, 0, 19 * 19]);
    }

    #[test]
    fn region_outside_parent_is_rejected() {
        let sel = base();
        let sub = cells_in_box(1, [0.0, 0.0], [2.0, 2.0]);
        let refined = sel.hb_refine(0, &sub).unwrap();
        // level-2 cell whose parent is not refined
        let bad = vec![vec![15usize, 15usize]];
        assert!(refined.hb_refine(1, &bad).is_err());
    }

    #[test]
    fn kraft_selection_matches_geometric_oracle() {
        let sel = base();
        let region1 = cells_in_box(1, [0.0, 0.0], [2.0, 2.0]);
        let refined = sel.hb_refine(0, &region1).unwrap();
        let region2 = cells_in_box(2, [0.0, 0.0], [1.0, 1.0]);
        let refined = refined.hb_refine(1, &region2).unwrap();

        // geometric oracle: support boxes from the level knot vectors, region
        // membership by midpoint sampling of the support box
        let regions_geo: Vec<Vec<([f64; 2], [f64; 2])>> = (0..refined.levels().len())
            .map(|l| {
                let n = 4usize << l;
                let h = 4.0 / n as f64;
                refined
                    .refined_region(l)
                    .unwrap()
                    .iter()
                    .map(|c| {
                        (
                            [c[0] as f64 * h, c[1] as f64 * h],
                            [(c[0] + 1) as f64 * h, (c[1] + 1) as f64 * h],
                        )
                    })
                    .collect()
            })
            .collect();
        let box_in_region = |supp: &[(f64, f64)], level: usize| -> bool {
            let cells = &regions_geo[level];
            let m = 16;
            for i in 0..m {
                for j in 0..m {
                    let x = supp[0].0 + (supp[0].1 - supp[0].0) * (i as f64 + 0.5) / m as f64;
                    let y = supp[1].0 + (supp[1].1 - supp[1].0) * (j as f64 + 0.5) / m as f64;
                    let inside = cells
                        .iter()
                        .any(|(lo, hi)| x > lo[0] && x < hi[0] && y > lo[1] && y < hi[1]);
                    if !inside {
                        return false;
                    }
                }
            }
            true
        };
        for l in 0..refined.levels().len() {
            let level = &refined.levels()[l];
            let mut oracle_count = 0usize;
            for idx in enumerate_boxes(&level.fn_counts()) {
                let b = level.tensor_bspline(&idx);
                let supp = b.support_box();
                let in_l = box_in_region(&supp, l);
                let in_next = l + 1 < refined.levels().len() && box_in_region(&supp, l + 1);
                if in_l && !in_next {
                    oracle_count += 1;
                    assert!(refined.is_active(l, &idx), "oracle says active: level {l} {idx:?}");
                } else {
                    assert!(!refined.is_active(l, &idx), "oracle says inactive: level {l} {idx:?}");
                }
            }
            assert_eq!(refined.active_counts()[l], oracle_count, "level {l}");
        }
    }

    #[test]
    fn single_level_truncation_is_identity() {
        let sel = base();
        let ts = sel.truncate().unwrap();
        assert_eq!(ts.len(), 49);
        for t in ts {
            assert_eq!(t.terms.len(), 1);
            assert_eq!(t.terms.values().next(), Some(&1.0));
        }
    }

    #[test]
    fn thb_partition_of_unity_and_hb_excess() {
        let sel = base();
        let region = cells_in_box(1, [0.0, 0.0], [2.0, 2.0]);
        let refined = sel.hb_refine(0, &region).unwrap();
        let ts = refined.truncate().unwrap();
        let hb = refined.hb_to_collection(false).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut max_hb: f64 = 0.0;
        for _ in 0..200 {
            let x = [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)];
            let thb_sum: f64 = ts.iter().map(|t| t.eval(&refined, &x).unwrap()).sum();
            assert!((thb_sum - 1.0).abs() < 1e-10, "THB sum at {x:?}: {thb_sum}");
            let hb_sum = hb.weighted_basis_sum(&x).unwrap();
            max_hb = max_hb.max(hb_sum - 1.0);
        }
        assert!(max_hb > 0.0, "untruncated sum should exceed one somewhere");
    }

    #[test]
    fn collections_flatten_correctly() {
        let sel = base();
        let flat = sel.hb_to_collection(false).unwrap();
        assert_eq!(flat.len(), 49);
        let region = cells_in_box(1, [2.0, 2.0], [4.0, 4.0]);
        let refined = sel.hb_refine(0, &region).unwrap();
        let thb = refined.hb_to_collection(true).unwrap();
        let p = diagnostics::arrangement_partition(&[&thb]).unwrap();
        let report = diagnostics::partition_of_unity(&thb, &p, 25).unwrap();
        assert!(report.max_deviation < 1e-10);
        let hb = refined.hb_to_collection(false).unwrap();
        assert!(hb.splines().iter().all(|s| s.gamma() == 1.0));
        let ph = diagnostics::arrangement_partition(&[&hb]).unwrap();
        let hb_report = diagnostics::partition_of_unity(&hb, &ph, 25).unwrap();
        assert!(hb_report.max_deviation > 0.0);
    }

    #[test]
    fn hb_independence_and_span_equality() {
        let sel = base();
        let region = cells_in_box(1, [0.0, 1.0], [2.0, 3.0]);
        let refined = sel.hb_refine(0, &region).unwrap();
        let hb = refined.hb_members();
        let thb = refined.thb_members().unwrap();
        let partition =
            diagnostics::arrangement_partition(&[&refined.hb_to_collection(true).unwrap()]).unwrap();
        let elements = partition.elements().unwrap();
        let hb_rows = diagnostics::extract_members(&hb, &elements, refined.degrees()).unwrap();
        let thb_rows = diagnostics::extract_members(&thb, &elements, refined.degrees()).unwrap();
        let hb_rank = diagnostics::independence_of_rows(hb_rows.rows().to_vec());
        let thb_rank = diagnostics::independence_of_rows(thb_rows.rows().to_vec());
        assert_eq!(hb_rank.rank, hb_rank.count);
        assert_eq!(thb_rank.rank, thb_rank.count);
        // equal spans: nested both ways
        let a = diagnostics::nestedness_of_rows(hb_rows.rows().to_vec(), thb_rows.rows().to_vec())
            .unwrap();
        let b = diagnostics::nestedness_of_rows(thb_rows.rows().to_vec(), hb_rows.rows().to_vec())
            .unwrap();
        assert!(a.nested && b.nested);
    }

    #[test]
    fn nesting_between_levels_is_exact() {
        let sel = base();
        let region = cells_in_box(1, [0.0, 0.0], [4.0, 4.0]);
        let refined = sel.hb_refine(0, &region).unwrap();
        for k in 0..2 {
            let coarse = &sel.levels()[0].knot_vectors()[k];
            let fine = &refined.levels()[1].knot_vectors()[k];
            oslo_refine(coarse, fine).expect("dyadic levels must nest exactly");
        }
    }

    #[test]
    fn geometry_preserved_through_refinement() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let controls: Vec<ControlPoint> = (0..49)
            .map(|_| {
                ControlPoint::new(vec![
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ])
            })
            .collect();
        let sel = base().with_controls(controls).unwrap();
        let region = cells_in_box(1, [0.0, 0.0], [2.0, 4.0]);
        let refined = sel.hb_refine(0, &region).unwrap();
        let region2 = cells_in_box(2, [0.0, 1.0], [1.0, 2.0]);
        let refined2 = refined.hb_refine(1, &region2).unwrap();
        for _ in 0..200 {
            let x = [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)];
            let a = sel.eval(&x).unwrap();
            let b = refined.eval(&x).unwrap();
            let c = refined2.eval(&x).unwrap();
            for ((u, v), w) in a.iter().zip(&b).zip(&c) {
                assert!((u - v).abs() < 1e-10 && (u - w).abs() < 1e-10, "at {x:?}");
            }
        }
    }

    #[test]
    fn truncation_disconnects_across_a_refined_band() {
        // three levels; a full-width band refined at levels 1 and 2 cuts the
        // center coarse function's truncated support in two
        let sel = base();
        let band1 = cells_in_box(1, [0.0, 0.5], [4.0, 3.5]);
        let refined = sel.hb_refine(0, &band1).unwrap();
        let band2 = cells_in_box(2, [0.0, 1.0], [4.0, 3.0]);
        let refined = refined.hb_refine(1, &band2).unwrap();
        let ts = refined.truncate().unwrap();
        // center level-0 function (support [0,4] x [0,4])
        let center = ts
            .iter()
            .find(|t| t.level == 0 && t.index == vec![3, 3])
            .expect("center function stays active");
        assert!(!disjoint_support_check(center, &refined), "support should split");
        // sampling oracle agrees: the function vanishes on the middle band
        // but not on either side of it
        let at = |y: f64| center.eval(&refined, &[2.0, y]).unwrap();
        assert!(at(0.25).abs() > 1e-8);
        assert!(at(3.75).abs() > 1e-8);
        assert!(at(2.0).abs() < 1e-12);
        // an untruncated (finest-level) function stays connected
        let plain = ts.iter().find(|t| t.terms.len() == 1).unwrap();
        assert!(disjoint_support_check(plain, &refined));
        // convex corner refinement keeps supports connected
        let corner = base()
            .hb_refine(0, &cells_in_box(1, [0.0, 0.0], [2.0, 2.0]))
            .unwrap();
        for t in corner.truncate().unwrap() {
            assert!(disjoint_support_check(&t, &corner));
        }
    }

    #[test]
    fn refined_region_stays_monotone() {
        let sel = base();
        let r1 = cells_in_box(1, [0.0, 0.0], [3.0, 3.0]);
        let s1 = sel.hb_refine(0, &r1).unwrap();
        let r2 = cells_in_box(2, [0.5, 0.5], [2.0, 2.0]);
        let s2 = s1.hb_refine(1, &r2).unwrap();
        for l in 1..s2.levels().len() {
            for cell in s2.refined_region(l).unwrap() {
                let parent: Vec<usize> = cell.iter().map(|&c| c >> 1).collect();
                assert!(s2.refined_region(l - 1).unwrap().contains(&parent));
            }
        }
    }
}
