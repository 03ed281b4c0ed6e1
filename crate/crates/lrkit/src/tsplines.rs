//! Bi-cubic T-splines: a T-mesh in index space with knot inference by ray
//! traversal, the standard-rule check, and semi-standard insertion driven to
//! a traversal-consistent fixpoint.
//!
//! The mesh lives on a grid of columns and rows (including the repeated
//! boundary indices of the clamped frame, which disambiguates coincident
//! boundary values). A traversal ray fired from an anchor picks up a column
//! when a vertical edge there covers the ray's row, or when an anchor sits
//! exactly on the ray; symmetrically for rows.

use crate::collection::{ControlPoint, Independence, ScaledBSpline, SplineCollection};
use crate::error::{Error, Result};
use crate::rational::{rat, to_f64, Rat};
use crate::splinecore::{KnotVector, LocalKnots, TensorBSpline};
use std::collections::{BTreeMap, BTreeSet};

const DEGREE: usize = 3;
/// 5 = DEGREE + 2 local knots per direction at bi-degree (3,3).
const WIN: usize = DEGREE + 2;

type Win = [usize; WIN];
type EntryKey = (Win, Win);

/// Classification of the collection a T-mesh produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsplineClass {
    /// Unscaled partition of unity (all scaling factors exactly one).
    Standard,
    /// Scaled partition of unity.
    SemiStandard,
    /// The scaled sum deviates from one; reported as-is.
    NonStandard,
}

impl std::fmt::Display for TsplineClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TsplineClass::Standard => "Standard",
            TsplineClass::SemiStandard => "SemiStandard",
            TsplineClass::NonStandard => "NonStandard",
        })
    }
}

#[derive(Debug, Clone)]
struct Entry {
    gamma: Rat,
    /// gamma-weighted control coordinates, kept exact across splits
    moment: Vec<Rat>,
}

/// Outcome of one semi-standard insertion.
#[derive(Debug, Clone)]
pub struct InsertReport {
    /// Parameter positions of the pre-existing anchors whose B-spline knot
    /// vectors were refined by the new knot value.
    pub refined_anchors: Vec<(f64, f64)>,
    /// Anchors the fixpoint loop had to add beyond the requested one.
    pub added_anchors: Vec<(f64, f64)>,
    pub passes: usize,
}

/// Bi-degree (3,3) T-mesh with anchors, edges and the accumulated B-spline
/// collection.
#[derive(Debug, Clone)]
pub struct TMesh {
    s_vals: Vec<f64>,
    t_vals: Vec<f64>,
    anchors: BTreeSet<(usize, usize)>,
    /// (col, row_lo, row_hi): vertical segment covering rows `lo..=hi`
    v_edges: Vec<(usize, usize, usize)>,
    /// (row, col_lo, col_hi)
    h_edges: Vec<(usize, usize, usize)>,
    entries: BTreeMap<EntryKey, Entry>,
}

impl TMesh {
    /// Tensor-product start: clamped bi-cubic knot vectors, full grid lines,
    /// one anchor and one unit-scaled B-spline per control point
    /// (lexicographic order, second direction fastest).
    pub fn tensor(kv_s: &KnotVector, kv_t: &KnotVector, controls: Vec<ControlPoint>) -> Result<Self> {
        for kv in [kv_s, kv_t] {
            if kv.degree() != DEGREE {
                return Err(Error::invalid("T-splines are supported at bi-degree (3,3) only".to_string()));
            }
            if !kv.is_clamped() {
                return Err(Error::invalid("the T-mesh frame requires clamped knot vectors".to_string()));
            }
            let (lo, hi) = kv.domain();
            let mut seen = BTreeSet::new();
            for &v in kv.values() {
                if !seen.insert(v.to_bits()) && v != lo && v != hi {
                    return Err(Error::invalid(
                        "interior knot multiplicities are not supported in a T-mesh".to_string(),
                    ));
                }
            }
        }
        let ns = kv_s.dim();
        let nt = kv_t.dim();
        if controls.len() != ns * nt {
            return Err(Error::invalid(format!("expected {} control values", ns * nt)));
        }
        let geo_dim = controls[0].dim();
        if controls.iter().any(|c| c.dim() != geo_dim || c.weight.is_some()) {
            return Err(Error::invalid(
                "uniform unweighted control values required".to_string(),
            ));
        }
        let s_vals = kv_s.values().to_vec();
        let t_vals = kv_t.values().to_vec();
        let ncols = s_vals.len();
        let nrows = t_vals.len();
        let mut mesh = TMesh {
            s_vals,
            t_vals,
            anchors: BTreeSet::new(),
            v_edges: (0..ncols).map(|c| (c, 0, nrows - 1)).collect(),
            h_edges: (0..nrows).map(|r| (r, 0, ncols - 1)).collect(),
            entries: BTreeMap::new(),
        };
        let mut it = controls.into_iter();
        for i in 0..ns {
            for j in 0..nt {
                let cp = it.next().unwrap();
                let key = (win_from(i), win_from(j));
                mesh.anchors.insert((i + 2, j + 2));
                mesh.entries.insert(
                    key,
                    Entry {
                        gamma: rat(1.0),
                        moment: cp.coords.iter().map(|&c| rat(c)).collect(),
                    },
                );
            }
        }
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    /// Anchor positions in parameter space.
    pub fn anchors_param(&self) -> Vec<(f64, f64)> {
        self.anchors
            .iter()
            .map(|&(c, r)| (self.s_vals[c], self.t_vals[r]))
            .collect()
    }

    pub fn domain(&self) -> ((f64, f64), (f64, f64)) {
        let ns = self.s_vals.len() - DEGREE - 1;
        let nt = self.t_vals.len() - DEGREE - 1;
        (
            (self.s_vals[DEGREE], self.s_vals[ns]),
            (self.t_vals[DEGREE], self.t_vals[nt]),
        )
    }

    fn col_of(&self, value: f64) -> Option<usize> {
        // boundary values repeat; interior values are unique
        self.s_vals.iter().position(|&v| v == value)
    }

    fn row_of(&self, value: f64) -> Option<usize> {
        self.t_vals.iter().position(|&v| v == value)
    }

    fn anchor_at_param(&self, p: (f64, f64)) -> Option<(usize, usize)> {
        self.anchors
            .iter()
            .find(|&&(c, r)| self.s_vals[c] == p.0 && self.t_vals[r] == p.1)
            .copied()
    }

    fn is_hit_col(&self, col: usize, row: usize) -> bool {
        self.anchors.contains(&(col, row))
            || self
                .v_edges
                .iter()
                .any(|&(c, lo, hi)| c == col && lo <= row && row <= hi)
    }

    fn is_hit_row(&self, row: usize, col: usize) -> bool {
        self.anchors.contains(&(col, row))
            || self
                .h_edges
                .iter()
                .any(|&(r, lo, hi)| r == row && lo <= col && col <= hi)
    }

    fn infer_window_s(&self, col: usize, row: usize) -> Result<Win> {
        let mut left = Vec::with_capacity(2);
        for c in (0..col).rev() {
            if self.is_hit_col(c, row) {
                left.push(c);
                if left.len() == 2 {
                    break;
                }
            }
        }
        let mut right = Vec::with_capacity(2);
        for c in col + 1..self.s_vals.len() {
            if self.is_hit_col(c, row) {
                right.push(c);
                if right.len() == 2 {
                    break;
                }
            }
        }
        if left.len() < 2 || right.len() < 2 {
            return Err(Error::MalformedMesh(format!(
                "fewer than two traversal lines around column {col} at row {row}"
            )));
        }
        Ok([left[1], left[0], col, right[0], right[1]])
    }

    fn infer_window_t(&self, col: usize, row: usize) -> Result<Win> {
        let mut down = Vec::with_capacity(2);
        for r in (0..row).rev() {
            if self.is_hit_row(r, col) {
                down.push(r);
                if down.len() == 2 {
                    break;
                }
            }
        }
        let mut up = Vec::with_capacity(2);
        for r in row + 1..self.t_vals.len() {
            if self.is_hit_row(r, col) {
                up.push(r);
                if up.len() == 2 {
                    break;
                }
            }
        }
        if down.len() < 2 || up.len() < 2 {
            return Err(Error::MalformedMesh(format!(
                "fewer than two traversal lines around row {row} at column {col}"
            )));
        }
        Ok([down[1], down[0], row, up[0], up[1]])
    }

    /// Knot inference by traversal from an anchor: two transversal hits per
    /// side in each direction, plus the anchor's own coordinates.
    pub fn infer_knots(&self, anchor: (f64, f64)) -> Result<([f64; WIN], [f64; WIN])> {
        let (c, r) = self
            .anchor_at_param(anchor)
            .ok_or_else(|| Error::invalid(format!("{anchor:?} is not an anchor of the mesh")))?;
        let ws = self.infer_window_s(c, r)?;
        let wt = self.infer_window_t(c, r)?;
        Ok((ws.map(|i| self.s_vals[i]), wt.map(|i| self.t_vals[i])))
    }

    /// All stored B-splines whose refinement the insertion of a new knot at
    /// `q` would trigger have to carry identical knot vectors in the other
    /// parameter direction.
    pub fn standard_rule_check(&self, q: (f64, f64)) -> Result<bool> {
        let orient = self.locate_insertion(q)?;
        for (parents, s_split) in self.split_parent_groups(&orient) {
            let transverse: BTreeSet<Win> = parents
                .iter()
                .map(|key| if s_split { key.1 } else { key.0 })
                .collect();
            if transverse.len() > 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Semi-standard insertion of a new control point `q` on an existing
    /// edge chain: refine the B-splines anchored on that chain with the new
    /// knot value, then repair the collection until every stored B-spline
    /// matches mesh traversal, adding further control points where a stored
    /// knot is not dictated by the mesh.
    pub fn semi_standard_insert(&self, q: (f64, f64)) -> Result<(Self, InsertReport)> {
        let orient = self.locate_insertion(q)?;
        let mut mesh = self.clone();
        let mut refined_anchors: BTreeSet<(u64, u64)> = BTreeSet::new();
        let split_plan = match orient {
            Insertion::Horizontal { row, value } => {
                let col = mesh.insert_column(value);
                mesh.anchors.insert((col, row));
                mesh.connect_anchor((col, row));
                Some((row, 0usize, col))
            }
            Insertion::Vertical { col, value } => {
                let row = mesh.insert_row(value);
                mesh.anchors.insert((col, row));
                mesh.connect_anchor((col, row));
                Some((col, 1usize, row))
            }
            Insertion::Crossing { col, row } => {
                // no new knot value: the anchor changes traversal and the
                // repair loop performs the induced refinements
                mesh.anchors.insert((col, row));
                mesh.connect_anchor((col, row));
                None
            }
        };
        if let Some((chain, split_dir, split_idx)) = split_plan {
            // refine every entry anchored on the insertion chain whose
            // support contains the new value in the split direction
            let parents: Vec<EntryKey> = mesh
                .entries
                .keys()
                .filter(|key| {
                    let (anchor_match, win) = if split_dir == 0 {
                        (key.1[2] == chain, &key.0)
                    } else {
                        (key.0[2] == chain, &key.1)
                    };
                    anchor_match && win[0] < split_idx && split_idx < win[WIN - 1]
                })
                .cloned()
                .collect();
            for key in parents {
                let (c, r) = (key.0[2], key.1[2]);
                refined_anchors.insert((mesh.s_vals[c].to_bits(), mesh.t_vals[r].to_bits()));
                mesh.split_entry(&key, split_dir, split_idx)?;
            }
        }
        let (added, passes) = mesh.run_fixpoint()?;
        let report = InsertReport {
            refined_anchors: refined_anchors
                .into_iter()
                .map(|(s, t)| (f64::from_bits(s), f64::from_bits(t)))
                .collect(),
            added_anchors: added,
            passes,
        };
        Ok((mesh, report))
    }

    /// Repair loop: split entries missing a traversal-dictated knot, add
    /// control points where an entry holds an undictated knot, repeat.
    fn run_fixpoint(&mut self) -> Result<(Vec<(f64, f64)>, usize)> {
        let mut added: Vec<(f64, f64)> = Vec::new();
        let mut passes = 0usize;
        loop {
            passes += 1;
            let cap = 20 + 10 * self.anchors.len();
            if passes > cap {
                return Err(Error::FixpointFailure { iterations: passes });
            }
            let mut missing: Vec<(EntryKey, usize, usize)> = Vec::new();
            let mut extras: Vec<(usize, usize)> = Vec::new();
            for key in self.entries.keys() {
                let (c, r) = (key.0[2], key.1[2]);
                let ws = self.infer_window_s(c, r)?;
                let wt = self.infer_window_t(c, r)?;
                for (dir, stored, dictated) in [(0usize, &key.0, &ws), (1, &key.1, &wt)] {
                    if stored == dictated {
                        continue;
                    }
                    for &d in dictated.iter() {
                        if !stored.contains(&d) && stored[0] < d && d < stored[WIN - 1] {
                            missing.push((*key, dir, d));
                            break;
                        }
                    }
                    for &s in stored.iter() {
                        if !dictated.contains(&s) {
                            // a control point at the offending knot on the
                            // anchor's constant-parameter line
                            let pos = if dir == 0 { (s, r) } else { (c, s) };
                            if !self.anchors.contains(&pos) {
                                extras.push(pos);
                            }
                        }
                    }
                }
            }
            if !missing.is_empty() {
                for (key, dir, idx) in missing {
                    if self.entries.contains_key(&key) {
                        self.split_entry(&key, dir, idx)?;
                    }
                }
                continue;
            }
            let extras: BTreeSet<(usize, usize)> = extras.into_iter().collect();
            if !extras.is_empty() {
                for pos in extras {
                    self.anchors.insert(pos);
                    self.connect_anchor(pos);
                    added.push((self.s_vals[pos.0], self.t_vals[pos.1]));
                }
                continue;
            }
            break;
        }
        if !self.is_consistent()? {
            return Err(Error::FixpointFailure { iterations: passes });
        }
        for &(c, r) in &self.anchors {
            let covered = self
                .entries
                .keys()
                .any(|key| key.0[2] == c && key.1[2] == r);
            if !covered {
                return Err(Error::FixpointFailure { iterations: passes });
            }
        }
        Ok((added, passes))
    }

    /// Every stored B-spline's knots agree with traversal from its anchor.
    pub fn is_consistent(&self) -> Result<bool> {
        for key in self.entries.keys() {
            let (c, r) = (key.0[2], key.1[2]);
            if self.infer_window_s(c, r)? != key.0 || self.infer_window_t(c, r)? != key.1 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Flatten into a scaled collection and classify it.
    pub fn to_collection(&self) -> Result<(SplineCollection, TsplineClass)> {
        let (ds, dt) = self.domain();
        let mut splines = Vec::with_capacity(self.entries.len());
        for (key, e) in &self.entries {
            let sk = LocalKnots::new(DEGREE, key.0.iter().map(|&i| self.s_vals[i]).collect())?;
            let tk = LocalKnots::new(DEGREE, key.1.iter().map(|&i| self.t_vals[i]).collect())?;
            let spline = TensorBSpline::new(vec![sk, tk])?;
            let coords: Vec<f64> = e.moment.iter().map(|m| to_f64(&(m / &e.gamma))).collect();
            splines.push(ScaledBSpline::with_exact_gamma(
                spline,
                e.gamma.clone(),
                ControlPoint::new(coords),
            )?);
        }
        let collection = SplineCollection::new(
            vec![ds, dt],
            vec![DEGREE, DEGREE],
            splines,
            Independence::NotTested,
        )?;
        let class = classify_collection(&collection)?;
        Ok((collection, class))
    }

    fn locate_insertion(&self, q: (f64, f64)) -> Result<Insertion> {
        let (ds, dt) = self.domain();
        if !(q.0 > ds.0 && q.0 < ds.1 && q.1 > dt.0 && q.1 < dt.1) {
            return Err(Error::invalid(format!(
                "insertion {q:?} must lie strictly inside the domain"
            )));
        }
        let col = self.col_of(q.0);
        let row = self.row_of(q.1);
        match (col, row) {
            (None, Some(r)) => {
                let on_chain = self.h_edges.iter().any(|&(er, lo, hi)| {
                    er == r && self.s_vals[lo] < q.0 && q.0 < self.s_vals[hi]
                });
                if !on_chain {
                    return Err(Error::invalid(format!(
                        "{q:?} does not lie on a horizontal edge chain"
                    )));
                }
                Ok(Insertion::Horizontal { row: r, value: q.0 })
            }
            (Some(c), None) => {
                let on_chain = self.v_edges.iter().any(|&(ec, lo, hi)| {
                    ec == c && self.t_vals[lo] < q.1 && q.1 < self.t_vals[hi]
                });
                if !on_chain {
                    return Err(Error::invalid(format!(
                        "{q:?} does not lie on a vertical edge chain"
                    )));
                }
                Ok(Insertion::Vertical { col: c, value: q.1 })
            }
            (Some(c), Some(r)) => {
                if self.anchors.contains(&(c, r)) {
                    return Err(Error::invalid(format!("an anchor already exists at {q:?}")));
                }
                let on_h = self
                    .h_edges
                    .iter()
                    .any(|&(er, lo, hi)| er == r && lo <= c && c <= hi);
                let on_v = self
                    .v_edges
                    .iter()
                    .any(|&(ec, lo, hi)| ec == c && lo <= r && r <= hi);
                if !on_h && !on_v {
                    return Err(Error::invalid(format!("{q:?} does not lie on any edge chain")));
                }
                Ok(Insertion::Crossing { col: c, row: r })
            }
            (None, None) => Err(Error::invalid(format!("{q:?} does not lie on any edge chain"))),
        }
    }

    /// Entries the insertion would refine, grouped by split direction
    /// (`true` when the split inserts an s-knot).
    fn split_parent_groups(&self, orient: &Insertion) -> Vec<(Vec<EntryKey>, bool)> {
        let on_row = |row: usize, value: f64| -> Vec<EntryKey> {
            self.entries
                .keys()
                .filter(|key| {
                    key.1[2] == row
                        && self.s_vals[key.0[0]] < value
                        && value < self.s_vals[key.0[WIN - 1]]
                })
                .cloned()
                .collect()
        };
        let on_col = |col: usize, value: f64| -> Vec<EntryKey> {
            self.entries
                .keys()
                .filter(|key| {
                    key.0[2] == col
                        && self.t_vals[key.1[0]] < value
                        && value < self.t_vals[key.1[WIN - 1]]
                })
                .cloned()
                .collect()
        };
        match *orient {
            Insertion::Horizontal { row, value } => vec![(on_row(row, value), true)],
            Insertion::Vertical { col, value } => vec![(on_col(col, value), false)],
            Insertion::Crossing { col, row } => {
                // refinements induced once the anchor makes traversal see the
                // crossing: entries on the row missing the column, and on the
                // column missing the row
                let h: Vec<EntryKey> = on_row(row, self.s_vals[col])
                    .into_iter()
                    .filter(|key| !key.0.contains(&col))
                    .collect();
                let v: Vec<EntryKey> = on_col(col, self.t_vals[row])
                    .into_iter()
                    .filter(|key| !key.1.contains(&row))
                    .collect();
                vec![(h, true), (v, false)]
            }
        }
    }

    fn insert_column(&mut self, value: f64) -> usize {
        let k = self.s_vals.partition_point(|&v| v <= value);
        self.s_vals.insert(k, value);
        let remap = |i: usize| if i >= k { i + 1 } else { i };
        self.anchors = self.anchors.iter().map(|&(c, r)| (remap(c), r)).collect();
        for e in self.v_edges.iter_mut() {
            e.0 = remap(e.0);
        }
        for e in self.h_edges.iter_mut() {
            e.1 = remap(e.1);
            e.2 = if e.2 >= k { e.2 + 1 } else { e.2 };
        }
        let old = std::mem::take(&mut self.entries);
        self.entries = old
            .into_iter()
            .map(|((ws, wt), e)| ((ws.map(remap), wt), e))
            .collect();
        k
    }

    fn insert_row(&mut self, value: f64) -> usize {
        let k = self.t_vals.partition_point(|&v| v <= value);
        self.t_vals.insert(k, value);
        let remap = |i: usize| if i >= k { i + 1 } else { i };
        self.anchors = self.anchors.iter().map(|&(c, r)| (c, remap(r))).collect();
        for e in self.h_edges.iter_mut() {
            e.0 = remap(e.0);
        }
        for e in self.v_edges.iter_mut() {
            e.1 = remap(e.1);
            e.2 = if e.2 >= k { e.2 + 1 } else { e.2 };
        }
        let old = std::mem::take(&mut self.entries);
        self.entries = old
            .into_iter()
            .map(|((ws, wt), e)| ((ws, wt.map(remap)), e))
            .collect();
        k
    }

    /// Connect a new anchor to its nearest mutually visible collinear
    /// anchors: no transversal edge and no other anchor strictly between.
    fn connect_anchor(&mut self, a: (usize, usize)) {
        let (col, row) = a;
        let mut above: Option<usize> = None;
        let mut below: Option<usize> = None;
        for &(c, r) in &self.anchors {
            if c != col || r == row {
                continue;
            }
            if r > row {
                above = Some(above.map_or(r, |b: usize| b.min(r)));
            } else {
                below = Some(below.map_or(r, |b: usize| b.max(r)));
            }
        }
        let mut new_v: Vec<(usize, usize, usize)> = Vec::new();
        for other in [below, above].into_iter().flatten() {
            let (lo, hi) = (row.min(other), row.max(other));
            let blocked = (lo + 1..hi).any(|r| {
                self.h_edges
                    .iter()
                    .any(|&(er, elo, ehi)| er == r && elo <= col && col <= ehi)
            });
            let covered = self
                .v_edges
                .iter()
                .any(|&(c, elo, ehi)| c == col && elo <= lo && hi <= ehi);
            if !blocked && !covered {
                new_v.push((col, lo, hi));
            }
        }
        for e in new_v {
            self.add_v_edge(e);
        }
        let mut right: Option<usize> = None;
        let mut left: Option<usize> = None;
        for &(c, r) in &self.anchors {
            if r != row || c == col {
                continue;
            }
            if c > col {
                right = Some(right.map_or(c, |b: usize| b.min(c)));
            } else {
                left = Some(left.map_or(c, |b: usize| b.max(c)));
            }
        }
        let mut new_h: Vec<(usize, usize, usize)> = Vec::new();
        for other in [left, right].into_iter().flatten() {
            let (lo, hi) = (col.min(other), col.max(other));
            let blocked = (lo + 1..hi).any(|c| {
                self.v_edges
                    .iter()
                    .any(|&(ec, elo, ehi)| ec == c && elo <= row && row <= ehi)
            });
            let covered = self
                .h_edges
                .iter()
                .any(|&(r, elo, ehi)| r == row && elo <= lo && hi <= ehi);
            if !blocked && !covered {
                new_h.push((row, lo, hi));
            }
        }
        for e in new_h {
            self.add_h_edge(e);
        }
    }

    fn add_v_edge(&mut self, e: (usize, usize, usize)) {
        self.v_edges.push(e);
        merge_segments(&mut self.v_edges);
    }

    fn add_h_edge(&mut self, e: (usize, usize, usize)) {
        self.h_edges.push(e);
        merge_segments(&mut self.h_edges);
    }

    /// Replace one entry by its two knot-insertion children.
    fn split_entry(&mut self, key: &EntryKey, dir: usize, idx: usize) -> Result<()> {
        let entry = self
            .entries
            .remove(key)
            .ok_or_else(|| Error::Inconsistency("entry vanished during split".to_string()))?;
        let (win, vals): (&Win, &Vec<f64>) = if dir == 0 {
            (&key.0, &self.s_vals)
        } else {
            (&key.1, &self.t_vals)
        };
        let values: Vec<f64> = win.iter().map(|&i| vals[i]).collect();
        let local = LocalKnots::new(DEGREE, values)?;
        let ((_, a1), (_, a2)) = local.split(vals[idx])?;
        let mut extended: Vec<usize> = win.to_vec();
        let pos = extended.partition_point(|&i| i <= idx);
        extended.insert(pos, idx);
        for (child_range, alpha) in [(0..WIN, a1), (1..WIN + 1, a2)] {
            let mut w: Win = [0; WIN];
            w.copy_from_slice(&extended[child_range]);
            let child_key = if dir == 0 { (w, key.1) } else { (key.0, w) };
            let gamma = &entry.gamma * &alpha;
            let moment: Vec<Rat> = entry.moment.iter().map(|m| m * &alpha).collect();
            match self.entries.get_mut(&child_key) {
                Some(e) => {
                    e.gamma += gamma;
                    for (acc, m) in e.moment.iter_mut().zip(moment) {
                        *acc += m;
                    }
                }
                None => {
                    self.entries.insert(child_key, Entry { gamma, moment });
                }
            }
        }
        Ok(())
    }
}

enum Insertion {
    Crossing { col: usize, row: usize },
    Horizontal { row: usize, value: f64 },
    Vertical { col: usize, value: f64 },
}

fn win_from(start: usize) -> Win {
    [start, start + 1, start + 2, start + 3, start + 4]
}

/// Merge overlapping or abutting collinear segments (same key in slot 0).
fn merge_segments(edges: &mut Vec<(usize, usize, usize)>) {
    edges.sort();
    let mut merged: Vec<(usize, usize, usize)> = Vec::with_capacity(edges.len());
    for &(k, lo, hi) in edges.iter() {
        match merged.last_mut() {
            Some((mk, _, mhi)) if *mk == k && lo <= *mhi => {
                *mhi = (*mhi).max(hi);
            }
            _ => merged.push((k, lo, hi)),
        }
    }
    *edges = merged;
}

/// Exact classification of a collection's partition-of-unity behaviour.
pub fn classify_collection(collection: &SplineCollection) -> Result<TsplineClass> {
    let partition = crate::diagnostics::arrangement_partition(&[collection])?;
    let report = crate::diagnostics::partition_of_unity(collection, &partition, 8)?;
    if !report.exact {
        return Ok(TsplineClass::NonStandard);
    }
    let unscaled = collection
        .splines()
        .iter()
        .all(|s| s.gamma_exact() == &rat(1.0));
    Ok(if unscaled {
        TsplineClass::Standard
    } else {
        TsplineClass::SemiStandard
    })
}
