//! Geometry-carrying spline objects: evaluation, iso-curve extraction,
//! minimal-basis conversion, chordal-tolerance tessellation, and plane
//! slicing of triangle soups.

use crate::collection::{ControlPoint, Independence, ScaledBSpline, SplineCollection};
use crate::error::{Error, Result};
use crate::parallel;
use crate::rational::{rat, to_f64, Rat};
use crate::splinecore::{KnotVector, Limit, LocalKnots, TensorBSpline};
use std::collections::BTreeMap;

/// A spline map into R^3 (surface when the parameter space is 2D, volume
/// when 3D), with optional positive rational weights on the members.
#[derive(Debug, Clone)]
pub struct SplineGeometry {
    collection: SplineCollection,
}

impl SplineGeometry {
    pub fn new(collection: SplineCollection) -> Result<Self> {
        if collection.geo_dim() != 3 {
            return Err(Error::invalid(format!(
                "geometry requires control points in R^3, got R^{}",
                collection.geo_dim()
            )));
        }
        if collection
            .splines()
            .iter()
            .any(|s| s.coeff.weight.is_some_and(|w| !(w > 0.0)))
        {
            return Err(Error::invalid("weights must be positive".to_string()));
        }
        Ok(SplineGeometry { collection })
    }

    pub fn collection(&self) -> &SplineCollection {
        &self.collection
    }

    pub fn eval(&self, u: &[f64]) -> Result<[f64; 3]> {
        let v = self.collection.eval(u)?;
        Ok([v[0], v[1], v[2]])
    }

    pub fn tessellate(&self, tolerance: f64) -> Result<TriangleSoup> {
        tessellate(&self.collection, tolerance)
    }
}

/// Fix one parameter direction of a collection at `value`, producing the
/// (d-1)-dimensional constant-parameter collection. The result is in general
/// not minimal-support and is flagged `NotTested`.
pub fn extract_isocurve(
    c: &SplineCollection,
    direction: usize,
    value: f64,
) -> Result<SplineCollection> {
    if direction >= c.dim() {
        return Err(Error::invalid(format!("direction {direction} out of range")));
    }
    if c.dim() < 2 {
        return Err(Error::invalid(
            "iso extraction needs at least two parameter directions".to_string(),
        ));
    }
    let (lo, hi) = c.domain()[direction];
    if !(value >= lo && value <= hi) {
        return Err(Error::OutOfDomain(vec![value]));
    }
    let limit = if value == hi { Limit::FromBelow } else { Limit::FromAbove };
    let mut members = Vec::new();
    for s in c.splines() {
        let b = s.spline().factor(direction).eval_limit(value, limit);
        if b == 0.0 {
            continue;
        }
        let factors: Vec<LocalKnots> = s
            .spline()
            .factors()
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != direction)
            .map(|(_, f)| f.clone())
            .collect();
        members.push(ScaledBSpline::with_exact_gamma(
            TensorBSpline::new(factors)?,
            s.gamma_exact() * rat(b),
            s.coeff.clone(),
        )?);
    }
    let domain: Vec<(f64, f64)> = c
        .domain()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != direction)
        .map(|(_, &iv)| iv)
        .collect();
    let degrees: Vec<usize> = c
        .degrees()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != direction)
        .map(|(_, &p)| p)
        .collect();
    SplineCollection::new(domain, degrees, members, Independence::NotTested)
}

/// Convert a univariate collection to the standard B-spline curve on the
/// union knot vector (per-value maximum multiplicity): same function, one
/// coefficient per basis function.
pub fn to_minimal_basis(c: &SplineCollection) -> Result<(KnotVector, Vec<ControlPoint>)> {
    if c.dim() != 1 {
        return Err(Error::invalid(
            "minimal-basis conversion expects a univariate collection".to_string(),
        ));
    }
    let p = c.degrees()[0];
    // union knot vector: per-value maximum multiplicity across members
    let mut mult: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for s in c.splines() {
        let mut local: BTreeMap<u64, usize> = BTreeMap::new();
        for &v in s.spline().factor(0).values() {
            *local.entry(v.to_bits()).or_insert(0) += 1;
        }
        for (bits, m) in local {
            let v = f64::from_bits(bits);
            let e = mult
                .entry(crate::splinecore::f64_total_key(v))
                .or_insert((v, 0));
            e.1 = e.1.max(m);
        }
    }
    let mut union_values = Vec::new();
    for &(v, m) in mult.values() {
        union_values.extend(std::iter::repeat(v).take(m));
    }
    let union_kv = KnotVector::new(p, union_values)?;
    let unique: Vec<(f64, usize)> = union_kv.unique_knots();

    // split members until each is a consecutive window of the union vector
    let weighted = c.is_rational();
    let hdim = if weighted { c.geo_dim() + 1 } else { c.geo_dim() };
    let mut queue: Vec<(LocalKnots, Rat, Vec<Rat>)> = c
        .splines()
        .iter()
        .map(|s| {
            let moment: Vec<Rat> = s
                .coeff
                .homogeneous()
                .iter()
                .map(|&h| rat(h) * s.gamma_exact())
                .collect();
            (s.spline().factor(0).clone(), s.gamma_exact().clone(), moment)
        })
        .collect();
    let mut windows: Vec<(LocalKnots, Vec<Rat>)> = Vec::new();
    while let Some((knots, gamma, moment)) = queue.pop() {
        let (lo, hi) = knots.support();
        let deficit = unique
            .iter()
            .find(|&&(v, m)| v > lo && v < hi && knots.multiplicity(v) < m);
        match deficit {
            Some(&(v, _)) => {
                let ((left, a1), (right, a2)) = knots.split(v)?;
                let lm: Vec<Rat> = moment.iter().map(|x| x * &a1).collect();
                let rm: Vec<Rat> = moment.iter().map(|x| x * &a2).collect();
                queue.push((left, &gamma * a1, lm));
                queue.push((right, &gamma * a2, rm));
            }
            None => windows.push((knots, moment)),
        }
    }
    // accumulate per basis function of the union space
    let mut moments: Vec<Vec<Rat>> = vec![vec![rat(0.0); hdim]; union_kv.dim()];
    for (knots, moment) in windows {
        let j = find_window(&union_kv, &knots).ok_or_else(|| {
            Error::Inconsistency("member knots are not a window of the union vector".to_string())
        })?;
        for (acc, m) in moments[j].iter_mut().zip(moment) {
            *acc += m;
        }
    }
    let coefficients: Vec<ControlPoint> = moments
        .into_iter()
        .map(|m| {
            let h: Vec<f64> = m.iter().map(to_f64).collect();
            if weighted {
                ControlPoint::from_homogeneous(&h, true)
            } else {
                ControlPoint::new(h)
            }
        })
        .collect();
    Ok((union_kv, coefficients))
}

fn find_window(kv: &KnotVector, local: &LocalKnots) -> Option<usize> {
    let values = kv.values();
    let w = local.values();
    (0..kv.dim()).find(|&j| &values[j..j + w.len()] == w)
}

/// A triangle with vertices in R^3 and an optional facet normal; `(0,0,0)`
/// means the orientation is implied by the vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [[f64; 3]; 3],
    pub normal: [f64; 3],
}

impl Triangle {
    /// Unit normal from the vertex orientation (right-hand rule), or zero
    /// for degenerate triangles.
    pub fn computed_normal(&self) -> [f64; 3] {
        let [a, b, c] = &self.vertices;
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len <= 0.0 {
            return [0.0; 3];
        }
        [n[0] / len, n[1] / len, n[2] / len]
    }

    /// Stored normal when present, otherwise inferred from vertex order.
    pub fn effective_normal(&self) -> [f64; 3] {
        if self.normal == [0.0; 3] {
            self.computed_normal()
        } else {
            self.normal
        }
    }
}

/// An unstructured facet list without topology guarantees.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleSoup {
    pub triangles: Vec<Triangle>,
}

impl TriangleSoup {
    /// Check that every nonzero stored normal agrees with the vertex
    /// orientation within an angular tolerance of 1e-6 rad.
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.triangles.iter().enumerate() {
            if t.normal == [0.0; 3] {
                continue;
            }
            let c = t.computed_normal();
            if c == [0.0; 3] {
                continue;
            }
            let norm = t.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = t.normal.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / norm;
            let angle = dot.clamp(-1.0, 1.0).acos();
            if angle > 1e-6 {
                return Err(Error::Validation {
                    record: i,
                    msg: format!("normal deviates from vertex orientation by {angle} rad"),
                });
            }
        }
        Ok(())
    }
}

/// Tessellate a surface collection into triangles whose chordal deviation is
/// at most `tolerance`, verified at edge midpoints and centroids. Vertices
/// lie exactly on the surface; facet normals come from the surface partial
/// derivatives, or `(0,0,0)` where those degenerate.
pub fn tessellate(c: &SplineCollection, tolerance: f64) -> Result<TriangleSoup> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive".to_string()));
    }
    if c.dim() != 2 || c.geo_dim() != 3 {
        return Err(Error::invalid("tessellation expects a surface in R^3".to_string()));
    }
    let partition = crate::diagnostics::arrangement_partition(&[c])?;
    let elements = partition.elements()?;
    let per_element: Vec<Result<Vec<Triangle>>> = parallel::map_slice(&elements, |elem| {
        let mut triangles = Vec::new();
        tessellate_rect(c, elem[0], elem[1], tolerance, 0, &mut triangles)?;
        Ok(triangles)
    });
    let mut soup = TriangleSoup::default();
    for t in per_element {
        soup.triangles.extend(t?);
    }
    Ok(soup)
}

const MAX_TESSELLATION_DEPTH: usize = 14;

fn tessellate_rect(
    c: &SplineCollection,
    (u0, u1): (f64, f64),
    (v0, v1): (f64, f64),
    tol: f64,
    depth: usize,
    out: &mut Vec<Triangle>,
) -> Result<()> {
    let eval = |u: f64, v: f64| -> Result<[f64; 3]> {
        let p = c.eval(&[u, v])?;
        Ok([p[0], p[1], p[2]])
    };
    let s00 = eval(u0, v0)?;
    let s01 = eval(u0, v1)?;
    let s10 = eval(u1, v0)?;
    let s11 = eval(u1, v1)?;
    let tris = [
        ([(u0, v0), (u1, v0), (u1, v1)], [s00, s10, s11]),
        ([(u0, v0), (u1, v1), (u0, v1)], [s00, s11, s01]),
    ];
    let mut flat = true;
    'check: for (params, corners) in &tris {
        // midpoints of the three edges and the centroid
        let probes = [
            (mid2(params[0], params[1]), midpoint(&corners[0], &corners[1])),
            (mid2(params[1], params[2]), midpoint(&corners[1], &corners[2])),
            (mid2(params[0], params[2]), midpoint(&corners[0], &corners[2])),
            (
                (
                    (params[0].0 + params[1].0 + params[2].0) / 3.0,
                    (params[0].1 + params[1].1 + params[2].1) / 3.0,
                ),
                centroid(corners),
            ),
        ];
        for ((u, v), lin) in probes {
            let s = eval(u, v)?;
            if dist(&s, &lin) > tol {
                flat = false;
                break 'check;
            }
        }
    }
    if !flat && depth < MAX_TESSELLATION_DEPTH {
        let um = 0.5 * (u0 + u1);
        let vm = 0.5 * (v0 + v1);
        tessellate_rect(c, (u0, um), (v0, vm), tol, depth + 1, out)?;
        tessellate_rect(c, (um, u1), (v0, vm), tol, depth + 1, out)?;
        tessellate_rect(c, (u0, um), (vm, v1), tol, depth + 1, out)?;
        tessellate_rect(c, (um, u1), (vm, v1), tol, depth + 1, out)?;
        return Ok(());
    }
    for (params, corners) in tris {
        let mut t = Triangle {
            vertices: corners,
            normal: [0.0; 3],
        };
        // degenerate (zero-area) triangles keep the zero normal
        if t.computed_normal() == [0.0; 3] {
            out.push(t);
            continue;
        }
        // the surface partial derivatives fix the orientation; the stored
        // normal is the facet normal under the right-hand rule, so it agrees
        // with the vertex order exactly
        let (cu, cv) = (
            (params[0].0 + params[1].0 + params[2].0) / 3.0,
            (params[0].1 + params[1].1 + params[2].1) / 3.0,
        );
        let du = c.eval_partial(&[cu, cv], 0)?;
        let dv = c.eval_partial(&[cu, cv], 1)?;
        let n = cross(&du, &dv);
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len > 1e-12 {
            let surface = [n[0] / len, n[1] / len, n[2] / len];
            let geo = t.computed_normal();
            let dot: f64 = geo.iter().zip(&surface).map(|(a, b)| a * b).sum();
            if dot < 0.0 {
                t.vertices.swap(1, 2);
            }
            t.normal = t.computed_normal();
        }
        out.push(t);
    }
    Ok(())
}

fn mid2(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))
}

fn midpoint(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

fn centroid(v: &[[f64; 3]; 3]) -> [f64; 3] {
    [
        (v[0][0] + v[1][0] + v[2][0]) / 3.0,
        (v[0][1] + v[1][1] + v[2][1]) / 3.0,
        (v[0][2] + v[1][2] + v[2][2]) / 3.0,
    ]
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// One polyline of a planar cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        let mut len = 0.0;
        for w in self.points.windows(2) {
            len += ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        }
        if self.closed && self.points.len() > 1 {
            let first = self.points[0];
            let last = self.points[self.points.len() - 1];
            len += ((first[0] - last[0]).powi(2) + (first[1] - last[1]).powi(2)).sqrt();
        }
        len
    }
}

/// Cross-section of a soup at one height.
#[derive(Debug, Clone)]
pub struct Section {
    /// Height actually used; moves up one ulp at a time while a vertex lies
    /// exactly on the plane.
    pub height: f64,
    pub perturbed: bool,
    pub polylines: Vec<Polyline>,
}

pub const CHAIN_TOLERANCE: f64 = 1e-9;

/// Slice a triangle soup with the plane `z = height`: intersection segments
/// chained into polylines by endpoint matching. Soups carry no topology, so
/// open chains are reported as such rather than silently closed.
pub fn slice(soup: &TriangleSoup, height: f64) -> Section {
    slice_with_tolerance(soup, height, CHAIN_TOLERANCE)
}

pub fn slice_with_tolerance(soup: &TriangleSoup, height: f64, tol: f64) -> Section {
    let mut h = height;
    let mut perturbed = false;
    loop {
        let coincides = soup
            .triangles
            .iter()
            .flat_map(|t| t.vertices.iter())
            .any(|v| v[2] == h);
        if !coincides {
            break;
        }
        h = next_after_up(h);
        perturbed = true;
    }
    let mut segments: Vec<[[f64; 2]; 2]> = Vec::new();
    for t in &soup.triangles {
        let z = [t.vertices[0][2], t.vertices[1][2], t.vertices[2][2]];
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for (i, j) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let (zi, zj) = (z[i], z[j]);
            if (zi < h) != (zj < h) {
                let s = (h - zi) / (zj - zi);
                let a = &t.vertices[i];
                let b = &t.vertices[j];
                pts.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            }
        }
        if pts.len() == 2 {
            segments.push([pts[0], pts[1]]);
        }
    }
    let polylines = chain_segments(&segments, tol);
    Section {
        height: h,
        perturbed,
        polylines,
    }
}

/// Slice at many heights in parallel.
pub fn slice_layers(soup: &TriangleSoup, heights: &[f64]) -> Vec<Section> {
    parallel::map_slice(heights, |&h| slice(soup, h))
}

fn next_after_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

fn chain_segments(segments: &[[[f64; 2]; 2]], tol: f64) -> Vec<Polyline> {
    // cluster endpoints on a tolerance grid
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
    let key =
        |p: &[f64; 2]| -> (i64, i64) { ((p[0] / tol).round() as i64, (p[1] / tol).round() as i64) };
    let mut node_of = |p: &[f64; 2], nodes: &mut Vec<[f64; 2]>| -> usize {
        let (kx, ky) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(cands) = grid.get(&(kx + dx, ky + dy)) {
                    for &idx in cands {
                        let q = &nodes[idx];
                        if (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol {
                            return idx;
                        }
                    }
                }
            }
        }
        nodes.push(*p);
        grid.entry((kx, ky)).or_default().push(nodes.len() - 1);
        nodes.len() - 1
    };
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut seg_nodes = Vec::with_capacity(segments.len());
    for seg in segments.iter() {
        let a = node_of(&seg[0], &mut nodes);
        let b = node_of(&seg[1], &mut nodes);
        if a == b {
            continue;
        }
        let idx = seg_nodes.len();
        seg_nodes.push((a, b));
        adjacency.entry(a).or_default().push(idx);
        adjacency.entry(b).or_default().push(idx);
    }
    let mut used = vec![false; seg_nodes.len()];
    let mut polylines = Vec::new();
    let walk = |start: usize, used: &mut Vec<bool>| -> Option<Polyline> {
        let first_seg = *adjacency.get(&start)?.iter().find(|&&s| !used[s])?;
        let mut chain = vec![start];
        let mut cur = start;
        let mut seg = first_seg;
        loop {
            used[seg] = true;
            let (a, b) = seg_nodes[seg];
            let next = if a == cur { b } else { a };
            chain.push(next);
            cur = next;
            match adjacency
                .get(&cur)
                .and_then(|segs| segs.iter().find(|&&s| !used[s]))
            {
                Some(&s) => seg = s,
                None => break,
            }
        }
        let closed = chain.len() > 2 && chain.first() == chain.last();
        let mut points: Vec<[f64; 2]> = chain.iter().map(|&n| nodes[n]).collect();
        if closed {
            points.pop();
        }
        Some(Polyline { points, closed })
    };
    // open chains start at odd-degree nodes; the rest are loops
    let starts: Vec<usize> = adjacency
        .iter()
        .filter(|(_, segs)| segs.len() % 2 == 1)
        .map(|(&n, _)| n)
        .collect();
    for start in starts {
        while let Some(p) = walk(start, &mut used) {
            polylines.push(p);
        }
    }
    for seg in 0..seg_nodes.len() {
        if !used[seg] {
            if let Some(p) = walk(seg_nodes[seg].0, &mut used) {
                polylines.push(p);
            }
        }
    }
    for p in polylines.iter_mut() {
        canonicalize_polyline(p);
    }
    polylines.sort_by(|a, b| {
        a.points
            .first()
            .map(|p| (p[0], p[1]))
            .partial_cmp(&b.points.first().map(|p| (p[0], p[1])))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    polylines
}

fn canonicalize_polyline(p: &mut Polyline) {
    if p.points.is_empty() {
        return;
    }
    if p.closed {
        // rotate the lexicographically smallest point to the front, then
        // pick the smaller of the two walk directions
        let min_idx = (0..p.points.len())
            .min_by(|&i, &j| {
                p.points[i]
                    .partial_cmp(&p.points[j])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        p.points.rotate_left(min_idx);
        if p.points.len() > 2 && p.points[p.points.len() - 1] < p.points[1] {
            p.points[1..].reverse();
        }
    } else if p.points.last() < p.points.first() {
        p.points.reverse();
    }
}
