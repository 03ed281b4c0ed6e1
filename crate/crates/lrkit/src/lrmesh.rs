//! Box-partitions of a d-box refined by axis-aligned, multiplicity-carrying
//! meshrectangles.
//!
//! A meshrectangle fixes one coordinate and spans a (d-1)-dimensional extent
//! in the others. Collinear rectangles at the same fixed value are stored as
//! a canonical set of disjoint constant-multiplicity pieces, which makes the
//! partition independent of insertion order.

use crate::error::{Error, Result};
use crate::splinecore::{f64_total_key, KnotVector, TensorBSpline};
use std::collections::BTreeMap;

/// Axis-aligned box, one closed interval per direction.
pub type BoxN = Vec<(f64, f64)>;

/// A knot-line segment (d=2) or knot-plane patch (d=3) with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshRectangle {
    pub fixed_direction: usize,
    pub fixed_value: f64,
    /// One interval per remaining direction, in increasing direction order.
    pub extent: Vec<(f64, f64)>,
    pub multiplicity: usize,
}

impl MeshRectangle {
    pub fn new(
        fixed_direction: usize,
        fixed_value: f64,
        extent: Vec<(f64, f64)>,
        multiplicity: usize,
    ) -> Result<Self> {
        if multiplicity == 0 {
            return Err(Error::invalid("multiplicity must be at least 1".to_string()));
        }
        if extent.iter().any(|&(a, b)| !(a < b)) {
            return Err(Error::invalid("extent intervals must have positive length".to_string()));
        }
        if !fixed_value.is_finite() || extent.iter().any(|&(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("meshrectangle coordinates must be finite".to_string()));
        }
        Ok(MeshRectangle {
            fixed_direction,
            fixed_value,
            extent,
            multiplicity,
        })
    }

    /// Extent interval for an absolute direction index (`!= fixed_direction`).
    pub fn extent_for(&self, direction: usize) -> (f64, f64) {
        let i = if direction < self.fixed_direction { direction } else { direction - 1 };
        self.extent[i]
    }
}

/// True if `r` splits the support of `b`: the fixed value lies strictly
/// inside the support in the fixed direction, the extent covers the support
/// in every other direction, and `b` does not already hold the value at the
/// rectangle's multiplicity.
pub fn splits_support(r: &MeshRectangle, b: &TensorBSpline) -> bool {
    if r.fixed_direction >= b.dim() || r.extent.len() + 1 != b.dim() {
        return false;
    }
    let k = r.fixed_direction;
    let (lo, hi) = b.factor(k).support();
    if !(r.fixed_value > lo && r.fixed_value < hi) {
        return false;
    }
    for j in 0..b.dim() {
        if j == k {
            continue;
        }
        let (slo, shi) = b.factor(j).support();
        let (elo, ehi) = r.extent_for(j);
        if !(elo <= slo && shi <= ehi) {
            return false;
        }
    }
    b.factor(k).multiplicity(r.fixed_value) < r.multiplicity
}

/// All knot lines of a partition at one (direction, value), stored as
/// disjoint constant-multiplicity pieces over the transverse coordinates.
#[derive(Debug, Clone, PartialEq)]
struct Line {
    value: f64,
    /// Disjoint (transverse box, multiplicity) pieces in canonical order.
    pieces: Vec<(BoxN, usize)>,
}

impl Line {
    fn canonicalize(pieces: Vec<(BoxN, usize)>) -> Vec<(BoxN, usize)> {
        if pieces.is_empty() {
            return pieces;
        }
        let tdim = pieces[0].0.len();
        if tdim == 0 {
            // d = 1: the line is a point; keep the maximum multiplicity
            let m = pieces.iter().map(|&(_, m)| m).max().unwrap();
            return vec![(Vec::new(), m)];
        }
        // grid of all piece boundaries per transverse direction
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); tdim];
        for (b, _) in &pieces {
            for (k, &(a, z)) in b.iter().enumerate() {
                axes[k].push(a);
                axes[k].push(z);
            }
        }
        for ax in axes.iter_mut() {
            ax.sort_by(f64::total_cmp);
            ax.dedup();
        }
        // multiplicity per grid cell = max over covering pieces
        let counts: Vec<usize> = axes.iter().map(|ax| ax.len() - 1).collect();
        let total: usize = counts.iter().product();
        let mut cells: Vec<(BoxN, usize)> = Vec::new();
        let mut idx = vec![0usize; tdim];
        for _ in 0..total {
            let cell: BoxN = idx
                .iter()
                .enumerate()
                .map(|(k, &i)| (axes[k][i], axes[k][i + 1]))
                .collect();
            let m = pieces
                .iter()
                .filter(|(b, _)| box_contains(b, &cell))
                .map(|&(_, m)| m)
                .max()
                .unwrap_or(0);
            if m > 0 {
                cells.push((cell, m));
            }
            let mut k = tdim;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        // merge runs along the last direction, then along earlier ones
        for dir in (0..tdim).rev() {
            cells.sort_by(|a, b| cmp_boxes_excluding(&a.0, &b.0, dir));
            let mut merged: Vec<(BoxN, usize)> = Vec::new();
            for (cell, m) in cells {
                if let Some((last, lm)) = merged.last_mut() {
                    if *lm == m
                        && last[dir].1 == cell[dir].0
                        && (0..tdim).all(|k| k == dir || last[k] == cell[k])
                    {
                        last[dir].1 = cell[dir].1;
                        continue;
                    }
                }
                merged.push((cell, m));
            }
            cells = merged;
        }
        cells.sort_by(|a, b| cmp_boxes(&a.0, &b.0));
        cells
    }

    /// Largest multiplicity by which this line's pieces cover the whole of
    /// `transverse` (0 when not fully covered at multiplicity 1).
    fn covering_multiplicity(&self, transverse: &[(f64, f64)]) -> usize {
        if transverse.is_empty() {
            return self.pieces.iter().map(|&(_, m)| m).max().unwrap_or(0);
        }
        // decompose the query by the union grid of piece and query boundaries
        let tdim = transverse.len();
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); tdim];
        for (k, &(a, z)) in transverse.iter().enumerate() {
            axes[k].push(a);
            axes[k].push(z);
        }
        for (b, _) in &self.pieces {
            for (k, &(a, z)) in b.iter().enumerate() {
                if a > transverse[k].0 && a < transverse[k].1 {
                    axes[k].push(a);
                }
                if z > transverse[k].0 && z < transverse[k].1 {
                    axes[k].push(z);
                }
            }
        }
        for ax in axes.iter_mut() {
            ax.sort_by(f64::total_cmp);
            ax.dedup();
        }
        let counts: Vec<usize> = axes.iter().map(|ax| ax.len() - 1).collect();
        let total: usize = counts.iter().product();
        let mut min_mult = usize::MAX;
        let mut idx = vec![0usize; tdim];
        for _ in 0..total {
            let cell: BoxN = idx
                .iter()
                .enumerate()
                .map(|(k, &i)| (axes[k][i], axes[k][i + 1]))
                .collect();
            let m = self
                .pieces
                .iter()
                .filter(|(b, _)| box_contains(b, &cell))
                .map(|&(_, m)| m)
                .max()
                .unwrap_or(0);
            min_mult = min_mult.min(m);
            if min_mult == 0 {
                return 0;
            }
            let mut k = tdim;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        min_mult
    }
}

fn box_contains(outer: &[(f64, f64)], inner: &[(f64, f64)]) -> bool {
    outer
        .iter()
        .zip(inner)
        .all(|(&(a, z), &(ia, iz))| a <= ia && iz <= z)
}

fn cmp_boxes(a: &[(f64, f64)], b: &[(f64, f64)]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

fn cmp_boxes_excluding(a: &[(f64, f64)], b: &[(f64, f64)], last: usize) -> std::cmp::Ordering {
    for k in (0..a.len()).filter(|&k| k != last) {
        let o = a[k].0.total_cmp(&b[k].0).then(a[k].1.total_cmp(&b[k].1));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    a[last].0.total_cmp(&b[last].0)
}

/// A d-box subdivided by meshrectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPartition {
    domain: BoxN,
    degrees: Vec<usize>,
    lines: BTreeMap<(usize, u64), Line>,
}

impl BoxPartition {
    /// Partition induced by a full tensor-product space: one full-extent
    /// meshrectangle per unique knot value per direction, carrying the knot
    /// multiplicity. Requires clamped knot vectors so the boundary reaches
    /// multiplicity `p + 1`.
    pub fn from_tensor_space(kvs: &[KnotVector]) -> Result<Self> {
        if kvs.is_empty() || kvs.len() > 3 {
            return Err(Error::invalid("1 to 3 directions supported".to_string()));
        }
        for kv in kvs {
            if !kv.is_clamped() {
                return Err(Error::invalid(
                    "tensor partition requires clamped knot vectors".to_string(),
                ));
            }
        }
        let domain: BoxN = kvs.iter().map(|kv| kv.domain()).collect();
        let degrees: Vec<usize> = kvs.iter().map(|kv| kv.degree()).collect();
        let mut bp = BoxPartition {
            domain: domain.clone(),
            degrees,
            lines: BTreeMap::new(),
        };
        for (k, kv) in kvs.iter().enumerate() {
            for (value, mult) in kv.unique_knots() {
                let extent: BoxN = domain
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, &iv)| iv)
                    .collect();
                bp.insert_unchecked(k, value, extent, mult)?;
            }
        }
        Ok(bp)
    }

    /// Partition made of full-extent lines only (a tensor arrangement).
    /// Used by diagnostics to give non-LR collections a common element grid.
    pub fn from_full_lines(
        domain: BoxN,
        degrees: Vec<usize>,
        lines: impl IntoIterator<Item = (usize, f64, usize)>,
    ) -> Result<Self> {
        if domain.is_empty() || domain.len() != degrees.len() {
            return Err(Error::invalid("domain/degree dimension mismatch".to_string()));
        }
        if domain.iter().any(|&(a, b)| !(a < b)) {
            return Err(Error::invalid("degenerate domain".to_string()));
        }
        let mut bp = BoxPartition {
            domain: domain.clone(),
            degrees,
            lines: BTreeMap::new(),
        };
        for (dir, value, mult) in lines {
            if dir >= domain.len() {
                return Err(Error::invalid("line direction out of range".to_string()));
            }
            let extent: BoxN = domain
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != dir)
                .map(|(_, &iv)| iv)
                .collect();
            bp.insert_unchecked(dir, value, extent, mult)?;
        }
        Ok(bp)
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

    /// Stored meshrectangles in canonical order: the maximal
    /// constant-multiplicity pieces of every line.
    pub fn meshrectangles(&self) -> Vec<MeshRectangle> {
        let mut out = Vec::new();
        for (&(dir, _), line) in &self.lines {
            for (extent, mult) in &line.pieces {
                out.push(MeshRectangle {
                    fixed_direction: dir,
                    fixed_value: line.value,
                    extent: extent.clone(),
                    multiplicity: *mult,
                });
            }
        }
        out
    }

    /// Insert a meshrectangle, merging with collinear pieces (maximum
    /// multiplicity on overlap). The result must remain a valid box
    /// partition: extent ends have to land on the boundary or on crossing
    /// mesh lines.
    pub fn insert(&self, r: &MeshRectangle) -> Result<Self> {
        let d = self.dim();
        if r.fixed_direction >= d || r.extent.len() != d.saturating_sub(1) {
            return Err(Error::invalid("meshrectangle dimension mismatch".to_string()));
        }
        let k = r.fixed_direction;
        let (dlo, dhi) = self.domain[k];
        if !(r.fixed_value >= dlo && r.fixed_value <= dhi) {
            return Err(Error::invalid(format!(
                "fixed value {} outside domain direction {k}",
                r.fixed_value
            )));
        }
        for j in (0..d).filter(|&j| j != k) {
            let (a, z) = r.extent_for(j);
            let (da, dz) = self.domain[j];
            if !(a >= da && z <= dz) {
                return Err(Error::invalid("meshrectangle extent outside domain".to_string()));
            }
        }
        if r.multiplicity > self.degrees[k] + 1 {
            return Err(Error::invalid(format!(
                "multiplicity {} exceeds degree+1 = {}",
                r.multiplicity,
                self.degrees[k] + 1
            )));
        }
        let mut next = self.clone();
        next.insert_unchecked(k, r.fixed_value, r.extent.clone(), r.multiplicity)?;
        // reject insertions that break the box-partition structure
        next.elements()?;
        Ok(next)
    }

    fn insert_unchecked(&mut self, dir: usize, value: f64, extent: BoxN, mult: usize) -> Result<()> {
        if mult > self.degrees[dir] + 1 {
            return Err(Error::invalid(format!(
                "multiplicity {} exceeds degree+1 = {}",
                mult,
                self.degrees[dir] + 1
            )));
        }
        let key = (dir, f64_total_key(value));
        let entry = self.lines.entry(key).or_insert_with(|| Line {
            value,
            pieces: Vec::new(),
        });
        let mut pieces = entry.pieces.clone();
        pieces.push((extent, mult));
        entry.pieces = Line::canonicalize(pieces);
        Ok(())
    }

    /// Largest multiplicity by which the partition's line at `(dir, value)`
    /// covers the whole transverse box; 0 when there is no such traversal.
    pub fn covering_multiplicity(&self, dir: usize, value: f64, transverse: &[(f64, f64)]) -> usize {
        match self.lines.get(&(dir, f64_total_key(value))) {
            Some(line) => line.covering_multiplicity(transverse),
            None => 0,
        }
    }

    /// Find a direction/value whose mesh line splits `b`, if any.
    pub fn find_split(&self, b: &TensorBSpline) -> Option<(usize, f64)> {
        for (&(dir, _), line) in &self.lines {
            let (lo, hi) = b.factor(dir).support();
            if !(line.value > lo && line.value < hi) {
                continue;
            }
            let transverse: BoxN = (0..self.dim())
                .filter(|&j| j != dir)
                .map(|j| b.factor(j).support())
                .collect();
            let m = line.covering_multiplicity(&transverse);
            if m > b.factor(dir).multiplicity(line.value) {
                return Some((dir, line.value));
            }
        }
        None
    }

    /// True when no mesh line of this partition splits `b`.
    pub fn has_minimal_support(&self, b: &TensorBSpline) -> bool {
        self.find_split(b).is_none()
    }

    /// The boxes of the partition induced by all meshrectangles. Errors if
    /// the mesh does not subdivide the domain into boxes.
    pub fn elements(&self) -> Result<Vec<BoxN>> {
        let d = self.dim();
        // per-direction breakpoints: domain bounds, line values, extent ends
        let mut axes: Vec<Vec<f64>> = (0..d)
            .map(|k| vec![self.domain[k].0, self.domain[k].1])
            .collect();
        for (&(dir, _), line) in &self.lines {
            if line.value > self.domain[dir].0 && line.value < self.domain[dir].1 {
                axes[dir].push(line.value);
            }
            for (piece, _) in &line.pieces {
                let mut pi = 0;
                for j in 0..d {
                    if j == dir {
                        continue;
                    }
                    for v in [piece[pi].0, piece[pi].1] {
                        if v > self.domain[j].0 && v < self.domain[j].1 {
                            axes[j].push(v);
                        }
                    }
                    pi += 1;
                }
            }
        }
        for ax in axes.iter_mut() {
            ax.sort_by(f64::total_cmp);
            ax.dedup();
        }
        let counts: Vec<usize> = axes.iter().map(|ax| ax.len() - 1).collect();
        let total: usize = counts.iter().product();
        if total == 0 {
            return Err(Error::MalformedMesh("empty cell grid".to_string()));
        }
        let strides = {
            let mut s = vec![1usize; d];
            for k in (0..d.saturating_sub(1)).rev() {
                s[k] = s[k + 1] * counts[k + 1];
            }
            s
        };
        let mut uf = UnionFind::new(total);
        let mut idx = vec![0usize; d];
        for cell in 0..total {
            // merge with the next cell in direction k unless a line covers the shared facet
            for k in 0..d {
                if idx[k] + 1 >= counts[k] {
                    continue;
                }
                let value = axes[k][idx[k] + 1];
                let facet: BoxN = (0..d)
                    .filter(|&j| j != k)
                    .map(|j| (axes[j][idx[j]], axes[j][idx[j] + 1]))
                    .collect();
                if self.covering_multiplicity(k, value, &facet) == 0 {
                    uf.union(cell, cell + strides[k]);
                }
            }
            let mut k = d;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        // gather components and verify each is a full box of cells
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for cell in 0..total {
            comps.entry(uf.find(cell)).or_default().push(cell);
        }
        let mut out: Vec<BoxN> = Vec::with_capacity(comps.len());
        for cells in comps.values() {
            let mut lo = vec![usize::MAX; d];
            let mut hi = vec![0usize; d];
            for &cell in cells {
                let mut rem = cell;
                for k in 0..d {
                    let i = rem / strides[k];
                    rem %= strides[k];
                    lo[k] = lo[k].min(i);
                    hi[k] = hi[k].max(i);
                }
            }
            let expect: usize = (0..d).map(|k| hi[k] - lo[k] + 1).product();
            if expect != cells.len() {
                return Err(Error::MalformedMesh(
                    "mesh lines do not subdivide the domain into boxes".to_string(),
                ));
            }
            out.push(
                (0..d)
                    .map(|k| (axes[k][lo[k]], axes[k][hi[k] + 1]))
                    .collect(),
            );
        }
        out.sort_by(|a, b| cmp_boxes(a, b));
        Ok(out)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splinecore::LocalKnots;

    fn kv33() -> KnotVector {
        KnotVector::new(
            3,
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 3.0, 3.0, 3.0],
        )
        .unwrap()
    }

    #[test]
    fn tensor_partition_multiplicities() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let rects = bp.meshrectangles();
        // per direction: two boundary values at multiplicity 4, two interior at 1
        for dir in 0..2 {
            let of_dir: Vec<_> = rects.iter().filter(|r| r.fixed_direction == dir).collect();
            assert_eq!(of_dir.len(), 4);
            for r in of_dir {
                let expected = if r.fixed_value == 0.0 || r.fixed_value == 3.0 { 4 } else { 1 };
                assert_eq!(r.multiplicity, expected, "value {}", r.fixed_value);
                assert_eq!(r.extent, vec![(0.0, 3.0)]);
            }
        }
    }

    #[test]
    fn bezier_patch_has_boundary_only_and_one_element() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        assert_eq!(bp.meshrectangles().len(), 4);
        assert_eq!(bp.elements().unwrap().len(), 1);
    }

    #[test]
    fn trivariate_boundary_multiplicity() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).unwrap();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv.clone(), kv]).unwrap();
        for r in bp.meshrectangles() {
            let expected = if r.fixed_value == 0.0 || r.fixed_value == 1.0 { 3 } else { 1 };
            assert_eq!(r.multiplicity, expected);
        }
        assert_eq!(bp.elements().unwrap().len(), 8);
    }

    #[test]
    fn element_grid_count() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        assert_eq!(bp.elements().unwrap().len(), 9);
    }

    #[test]
    fn insert_duplicate_is_idempotent() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let r = MeshRectangle::new(0, 1.0, vec![(0.0, 3.0)], 1).unwrap();
        let after = bp.insert(&r).unwrap();
        assert_eq!(bp, after);
    }

    #[test]
    fn abutting_segments_merge() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let a = MeshRectangle::new(0, 1.5, vec![(0.0, 1.0)], 1).unwrap();
        let b = MeshRectangle::new(0, 1.5, vec![(1.0, 2.0)], 1).unwrap();
        let bp2 = bp.insert(&a).unwrap().insert(&b).unwrap();
        let at_value: Vec<_> = bp2
            .meshrectangles()
            .into_iter()
            .filter(|r| r.fixed_value == 1.5)
            .collect();
        assert_eq!(at_value.len(), 1);
        assert_eq!(at_value[0].extent, vec![(0.0, 2.0)]);
    }

    #[test]
    fn new_fixed_value_adds_a_rectangle() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let n = bp.meshrectangles().len();
        let r = MeshRectangle::new(1, 2.5, vec![(0.0, 3.0)], 1).unwrap();
        let bp2 = bp.insert(&r).unwrap();
        assert_eq!(bp2.meshrectangles().len(), n + 1);
    }

    #[test]
    fn insert_rejections() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let outside = MeshRectangle::new(0, 5.0, vec![(0.0, 3.0)], 1).unwrap();
        assert!(bp.insert(&outside).is_err());
        let too_many = MeshRectangle::new(0, 1.5, vec![(0.0, 3.0)], 5).unwrap();
        assert!(bp.insert(&too_many).is_err());
    }

    #[test]
    fn partial_segment_splits_cells_it_crosses() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let before = bp.elements().unwrap().len();
        // crosses two cells: rows [0,1) and [1,2)
        let r = MeshRectangle::new(0, 1.5, vec![(0.0, 2.0)], 1).unwrap();
        let after = bp.insert(&r).unwrap().elements().unwrap().len();
        assert_eq!(after, before + 2);
    }

    #[test]
    fn splits_support_rules() {
        let quartic = |vals: Vec<f64>| LocalKnots::new(3, vals).unwrap();
        let b = TensorBSpline::new(vec![
            quartic(vec![0.0, 1.0, 2.0, 3.0, 4.0]),
            quartic(vec![0.0, 1.0, 2.0, 3.0, 4.0]),
        ])
        .unwrap();
        // transverse extent covering only half the support: no split
        let half = MeshRectangle::new(0, 2.5, vec![(0.0, 2.0)], 1).unwrap();
        assert!(!splits_support(&half, &b));
        // full traversal strictly inside: split
        let full = MeshRectangle::new(0, 2.5, vec![(0.0, 4.0)], 1).unwrap();
        assert!(splits_support(&full, &b));
        // existing knot at multiplicity 1, rectangle at multiplicity 2: split
        let raise = MeshRectangle::new(0, 2.0, vec![(0.0, 4.0)], 2).unwrap();
        assert!(splits_support(&raise, &b));
        // existing knot at multiplicity 1, rectangle at multiplicity 1: no split
        let same = MeshRectangle::new(0, 2.0, vec![(0.0, 4.0)], 1).unwrap();
        assert!(!splits_support(&same, &b));
        // value at the support edge: no split
        let edge = MeshRectangle::new(0, 0.0, vec![(0.0, 4.0)], 1).unwrap();
        assert!(!splits_support(&edge, &b));
    }

    #[test]
    fn covering_multiplicity_uses_level_sets() {
        let kv = kv33();
        let mut bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        // a mult-2 piece over [0,1] and mult-1 over [1,3] at the same value
        bp = bp
            .insert(&MeshRectangle::new(0, 1.5, vec![(0.0, 1.0)], 2).unwrap())
            .unwrap();
        bp = bp
            .insert(&MeshRectangle::new(0, 1.5, vec![(1.0, 3.0)], 1).unwrap())
            .unwrap();
        assert_eq!(bp.covering_multiplicity(0, 1.5, &[(0.0, 3.0)]), 1);
        assert_eq!(bp.covering_multiplicity(0, 1.5, &[(0.0, 1.0)]), 2);
        assert_eq!(bp.covering_multiplicity(0, 1.5, &[(0.5, 2.0)]), 1);
        assert_eq!(bp.covering_multiplicity(0, 1.25, &[(0.0, 1.0)]), 0);
    }

    #[test]
    fn element_volumes_tile_the_domain() {
        let kv = kv33();
        let mut bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        bp = bp
            .insert(&MeshRectangle::new(0, 1.5, vec![(0.0, 2.0)], 1).unwrap())
            .unwrap();
        bp = bp
            .insert(&MeshRectangle::new(1, 0.5, vec![(1.0, 3.0)], 1).unwrap())
            .unwrap();
        let vol: f64 = bp
            .elements()
            .unwrap()
            .iter()
            .map(|b| b.iter().map(|&(a, z)| z - a).product::<f64>())
            .sum();
        assert!((vol - 9.0).abs() < 1e-12 * 9.0);
    }

    #[test]
    fn insertion_refines_elements_monotonically() {
        let kv = kv33();
        let bp = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let r = MeshRectangle::new(1, 1.5, vec![(1.0, 3.0)], 1).unwrap();
        let old = bp.elements().unwrap();
        let new = bp.insert(&r).unwrap().elements().unwrap();
        for e in &new {
            let containing = old.iter().filter(|o| box_contains(o, e)).count();
            assert_eq!(containing, 1, "element {e:?} not nested in exactly one old element");
        }
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let kv = kv33();
        let base = BoxPartition::from_tensor_space(&[kv.clone(), kv]).unwrap();
        let rects = vec![
            MeshRectangle::new(0, 1.5, vec![(0.0, 2.0)], 1).unwrap(),
            MeshRectangle::new(0, 1.5, vec![(2.0, 3.0)], 2).unwrap(),
            MeshRectangle::new(1, 2.5, vec![(1.0, 3.0)], 1).unwrap(),
            MeshRectangle::new(1, 0.5, vec![(0.0, 2.0)], 1).unwrap(),
        ];
        let apply = |order: &[usize]| {
            let mut bp = base.clone();
            for &i in order {
                bp = bp.insert(&rects[i]).unwrap();
            }
            bp
        };
        let reference = apply(&[0, 1, 2, 3]);
        for order in [[3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]] {
            assert_eq!(apply(&order), reference);
        }
    }

    #[test]
    fn univariate_partition() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        let bp = BoxPartition::from_tensor_space(&[kv]).unwrap();
        assert_eq!(bp.elements().unwrap().len(), 2);
        let r = MeshRectangle::new(0, 0.5, vec![], 1).unwrap();
        let bp2 = bp.insert(&r).unwrap();
        assert_eq!(bp2.elements().unwrap().len(), 3);
    }
}
