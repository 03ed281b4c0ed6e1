//! Basis-growth comparison across the three refinement strategies.
//!
//! A scenario runs an equivalent sequence of localized refinements through
//! LR meshrectangle insertion, T-spline vertex insertion and hierarchical
//! region refinement, and reports the basis size per step for each method.
//! Steps a method cannot express mark that method's lane not-applicable from
//! that point on.

use crate::collection::ControlPoint;
use crate::error::{Error, Result};
use crate::hbsplines::HierarchySelection;
use crate::lrmesh::MeshRectangle;
use crate::lrsplines::LrCollection;
use crate::splinecore::KnotVector;
use crate::tsplines::TMesh;

/// One localized refinement request, expressed for all three methods.
#[derive(Debug, Clone)]
pub struct GrowthStep {
    /// Fixed direction of the inserted knot-line segment.
    pub direction: usize,
    /// New knot value.
    pub value: f64,
    /// Transverse extent of the LR meshrectangle.
    pub extent: (f64, f64),
    /// Existing transverse line carrying the T-spline control point.
    pub anchor_line: f64,
    /// Dyadic level of the equivalent hierarchical refinement.
    pub hb_level: usize,
    /// Region box refined at that level (cells intersecting it).
    pub hb_box: ((f64, f64), (f64, f64)),
}

/// Bi-cubic comparison scenario on a square domain.
#[derive(Debug, Clone)]
pub struct GrowthScenario {
    pub domain: (f64, f64),
    pub base_cells: usize,
    pub steps: Vec<GrowthStep>,
}

/// Basis sizes per method; `None` marks a step the method could not express.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodCounts {
    pub lr: Option<usize>,
    pub ts: Option<usize>,
    pub hb: Option<usize>,
    pub thb: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GrowthTable {
    pub initial: MethodCounts,
    pub steps: Vec<MethodCounts>,
}

impl GrowthTable {
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let cell = |v: Option<usize>| match v {
            Some(n) => n.to_string(),
            None => "n/a".to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(out, "step    LR      TS      HB      THB");
        let _ = writeln!(
            out,
            "{:<7} {:<7} {:<7} {:<7} {:<7}",
            0,
            cell(self.initial.lr),
            cell(self.initial.ts),
            cell(self.initial.hb),
            cell(self.initial.thb)
        );
        for (i, c) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<7} {:<7} {:<7} {:<7} {:<7}",
                i + 1,
                cell(c.lr),
                cell(c.ts),
                cell(c.hb),
                cell(c.thb)
            );
        }
        out
    }
}

/// Run a scenario through all methods.
pub fn growth_compare(scenario: &GrowthScenario) -> Result<GrowthTable> {
    let (a, b) = scenario.domain;
    if !(a < b) || scenario.base_cells == 0 {
        return Err(Error::invalid("degenerate growth scenario domain".to_string()));
    }
    let kv = KnotVector::uniform_clamped(3, a, b, scenario.base_cells)?;
    let n = kv.dim();
    let controls: Vec<ControlPoint> = (0..n * n).map(|_| ControlPoint::scalar(0.0)).collect();

    let mut lr = Some(LrCollection::from_tensor(
        &[kv.clone(), kv.clone()],
        controls.clone(),
    )?);
    let mut ts = Some(TMesh::tensor(&kv, &kv, controls)?);
    let mut hb = Some(HierarchySelection::new(
        vec![(a, b), (a, b)],
        vec![3, 3],
        vec![scenario.base_cells, scenario.base_cells],
    )?);

    let count = |lr: &Option<LrCollection>, ts: &Option<TMesh>, hb: &Option<HierarchySelection>| {
        MethodCounts {
            lr: lr.as_ref().map(|c| c.len()),
            ts: ts.as_ref().map(|m| m.len()),
            hb: hb.as_ref().map(|s| s.total_active()),
            thb: hb.as_ref().map(|s| s.total_active()),
        }
    };
    let initial = count(&lr, &ts, &hb);
    let mut steps = Vec::with_capacity(scenario.steps.len());
    for step in &scenario.steps {
        if let Some(cur) = lr.take() {
            let rect = MeshRectangle::new(
                step.direction,
                step.value,
                vec![(step.extent.0, step.extent.1)],
                1,
            )?;
            lr = cur.refine(&rect).ok();
        }
        if let Some(cur) = ts.take() {
            let anchor = if step.direction == 0 {
                (step.value, step.anchor_line)
            } else {
                (step.anchor_line, step.value)
            };
            ts = cur.semi_standard_insert(anchor).ok().map(|(m, _)| m);
        }
        if let Some(cur) = hb.take() {
            hb = hb_refine_box(&cur, step.hb_level, step.hb_box).ok();
        }
        steps.push(count(&lr, &ts, &hb));
    }
    Ok(GrowthTable { initial, steps })
}

/// Refine the hierarchy at `level` over all level cells intersecting `bbox`.
fn hb_refine_box(
    sel: &HierarchySelection,
    level: usize,
    bbox: ((f64, f64), (f64, f64)),
) -> Result<HierarchySelection> {
    if level == 0 || level > sel.levels().len() {
        return Err(Error::invalid(format!(
            "hierarchical step level {level} must extend the existing {} levels by at most one",
            sel.levels().len()
        )));
    }
    let (a, z) = (sel.domain()[0].0, sel.domain()[0].1);
    let base = sel.levels()[0].cell_counts()[0];
    let cells_n = base << level;
    let h = (z - a) / cells_n as f64;
    let mut cells = Vec::new();
    for i in 0..cells_n {
        for j in 0..cells_n {
            let lo = (a + i as f64 * h, a + j as f64 * h);
            let hi = (lo.0 + h, lo.1 + h);
            let intersects =
                hi.0 > bbox.0 .0 && lo.0 < bbox.0 .1 && hi.1 > bbox.1 .0 && lo.1 < bbox.1 .1;
            if intersects {
                cells.push(vec![i, j]);
            }
        }
    }
    sel.hb_refine(level - 1, &cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Five nested localized refinements toward the point (2, 2) on [0, 8].
    pub(crate) fn localized_scenario() -> GrowthScenario {
        let step = |value: f64, level: usize, half: f64| GrowthStep {
            direction: 0,
            value,
            extent: (0.0, 4.0),
            anchor_line: 2.0,
            hb_level: level,
            hb_box: ((2.0 - half, 2.0 + half), (2.0 - half, 2.0 + half)),
        };
        GrowthScenario {
            domain: (0.0, 8.0),
            base_cells: 8,
            steps: vec![
                step(2.5, 1, 2.0),
                step(2.25, 2, 1.0),
                step(2.75, 3, 0.5),
                step(2.125, 4, 0.25),
                step(2.375, 5, 0.125),
            ],
        }
    }

    #[test]
    fn empty_scenario_reports_equal_tensor_counts() {
        let scenario = GrowthScenario {
            domain: (0.0, 4.0),
            base_cells: 4,
            steps: vec![],
        };
        let table = growth_compare(&scenario).unwrap();
        assert_eq!(table.initial.lr, Some(49));
        assert_eq!(table.initial.ts, Some(49));
        assert_eq!(table.initial.hb, Some(49));
        assert_eq!(table.initial.thb, Some(49));
        assert!(table.steps.is_empty());
    }

    #[test]
    fn localized_refinement_grows_hb_fastest() {
        let table = growth_compare(&localized_scenario()).unwrap();
        for (i, c) in table.steps.iter().enumerate() {
            let (lr, ts, hb) = (c.lr.unwrap(), c.ts.unwrap(), c.hb.unwrap());
            assert_eq!(c.thb.unwrap(), hb);
            if i >= 1 {
                assert!(hb > lr, "step {}: hb {hb} should exceed lr {lr}", i + 1);
                assert!(hb > ts, "step {}: hb {hb} should exceed ts {ts}", i + 1);
            }
            // TS stays within a few functions of the previous count
            let prev_ts = if i == 0 { table.initial.ts } else { table.steps[i - 1].ts };
            assert!(ts - prev_ts.unwrap() <= 8, "TS grows by O(1) per step");
        }
        let render = table.render();
        assert!(render.contains("LR") && render.contains("THB"));
    }

    #[test]
    fn global_refinement_converges_for_lr_and_hb() {
        // full-extent midline insertions give the dyadically refined tensor
        // space for LR; refining the whole domain does the same for the
        // hierarchy
        let kv = KnotVector::uniform_clamped(3, 0.0, 4.0, 4).unwrap();
        let n = kv.dim();
        let controls: Vec<ControlPoint> = (0..n * n).map(|_| ControlPoint::scalar(0.0)).collect();
        let mut lr = LrCollection::from_tensor(&[kv.clone(), kv.clone()], controls.clone()).unwrap();
        for dir in 0..2 {
            for k in 0..4 {
                let mid = 0.5 + k as f64;
                let rect = MeshRectangle::new(dir, mid, vec![(0.0, 4.0)], 1).unwrap();
                lr = lr.refine(&rect).unwrap();
            }
        }
        let doubled = KnotVector::uniform_clamped(3, 0.0, 4.0, 8).unwrap();
        let expect = doubled.dim() * doubled.dim();
        assert_eq!(lr.len(), expect);

        let sel = HierarchySelection::new(vec![(0.0, 4.0); 2], vec![3, 3], vec![4, 4]).unwrap();
        let all: Vec<Vec<usize>> = (0..8)
            .flat_map(|i| (0..8).map(move |j| vec![i, j]))
            .collect();
        let refined = sel.hb_refine(0, &all).unwrap();
        assert_eq!(refined.total_active(), expect);
    }
}
