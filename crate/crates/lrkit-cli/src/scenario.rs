//! Scenario files (`.scn`, TOML): an initial tensor space plus an ordered
//! list of refinement steps, each tagged with the method that executes it,
//! with optional embedded expectations so figure scenarios double as
//! regression fixtures.

use anyhow::{anyhow, bail, Context};
use lrkit::collection::ControlPoint;
use lrkit::diagnostics::{GrowthScenario, GrowthStep};
use lrkit::hbsplines::HierarchySelection;
use lrkit::lrmesh::MeshRectangle;
use lrkit::lrsplines::LrCollection;
use lrkit::splinecore::KnotVector;
use lrkit::tsplines::TMesh;
use lrkit::SplineCollection;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub space: SpaceSpec,
    #[serde(default, rename = "step")]
    pub steps: Vec<StepSpec>,
    #[serde(default)]
    pub expect: Option<GlobalExpect>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub degrees: Vec<usize>,
    /// Explicit knot values per direction, or a uniform clamped space.
    pub knots: Option<Vec<Vec<f64>>>,
    pub domain: Option<Vec<(f64, f64)>>,
    pub cells: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub method: String,
    // lr-meshrectangle
    pub direction: Option<usize>,
    pub value: Option<f64>,
    pub extent: Option<Vec<(f64, f64)>>,
    pub multiplicity: Option<usize>,
    // hb-region
    pub level: Option<usize>,
    pub cells: Option<Vec<Vec<usize>>>,
    // ts-anchor
    pub at: Option<(f64, f64)>,
    // structured
    pub select: Option<Vec<usize>>,
    // growth-compare equivalents
    pub anchor_line: Option<f64>,
    pub hb_level: Option<usize>,
    pub hb_box: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub expect: Option<StepExpect>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepExpect {
    pub split: Option<usize>,
    pub produced: Option<usize>,
    pub refined_anchors: Option<usize>,
    pub added_anchors: Option<usize>,
    pub active_total: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalExpect {
    pub members: Option<usize>,
    pub pou_max: Option<f64>,
    pub independent: Option<bool>,
}

pub struct ScenarioOutcome {
    pub collection: SplineCollection,
    pub report: Vec<String>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let s: ScenarioFile = toml::from_str(text).context("malformed scenario file")?;
        Ok(s)
    }

    pub fn knot_vectors(&self) -> anyhow::Result<Vec<KnotVector>> {
        if let Some(knots) = &self.space.knots {
            if knots.len() != self.space.degrees.len() {
                bail!("one knot vector per direction required");
            }
            return knots
                .iter()
                .zip(&self.space.degrees)
                .map(|(values, &p)| {
                    KnotVector::new(p, values.clone()).map_err(|e| anyhow!(e.to_string()))
                })
                .collect();
        }
        let (domain, cells) = match (&self.space.domain, &self.space.cells) {
            (Some(d), Some(c)) if d.len() == self.space.degrees.len() && c.len() == d.len() => {
                (d, c)
            }
            _ => bail!("space needs either explicit knots or matching domain and cells"),
        };
        domain
            .iter()
            .zip(cells)
            .zip(&self.space.degrees)
            .map(|((&(a, b), &n), &p)| {
                KnotVector::uniform_clamped(p, a, b, n).map_err(|e| anyhow!(e.to_string()))
            })
            .collect()
    }

    fn method_family(&self) -> anyhow::Result<&str> {
        let mut family: Option<&str> = None;
        for s in &self.steps {
            let f = match s.method.as_str() {
                "lr-meshrectangle" | "structured" => "lr",
                "hb-region" => "hb",
                "ts-anchor" => "ts",
                other => bail!("unknown step method {other:?}"),
            };
            match family {
                None => family = Some(f),
                Some(prev) if prev == f => {}
                Some(prev) => bail!("scenario mixes {prev} and {f} steps"),
            }
        }
        Ok(family.unwrap_or("lr"))
    }

    /// Execute the scenario, checking embedded expectations as it goes.
    pub fn run(&self) -> anyhow::Result<ScenarioOutcome> {
        let kvs = self.knot_vectors()?;
        let mut report = Vec::new();
        let family = self.method_family()?;
        let collection = match family {
            "lr" => self.run_lr(&kvs, &mut report)?,
            "hb" => self.run_hb(&kvs, &mut report)?,
            "ts" => self.run_ts(&kvs, &mut report)?,
            _ => unreachable!(),
        };
        if let Some(expect) = &self.expect {
            if let Some(members) = expect.members {
                if collection.len() != members {
                    bail!(
                        "expectation failed: {} members, expected {members}",
                        collection.len()
                    );
                }
                report.push(format!("members {} as expected", members));
            }
            if expect.pou_max.is_some() || expect.independent.is_some() {
                let partition = lrkit::diagnostics::arrangement_partition(&[&collection])
                    .map_err(|e| anyhow!(e.to_string()))?;
                if let Some(limit) = expect.pou_max {
                    let pou = lrkit::diagnostics::partition_of_unity(&collection, &partition, 25)
                        .map_err(|e| anyhow!(e.to_string()))?;
                    if pou.max_deviation > limit {
                        bail!(
                            "expectation failed: partition-of-unity deviation {:.3e} exceeds {limit:.3e}",
                            pou.max_deviation
                        );
                    }
                    report.push(format!("partition of unity within {limit:.1e}"));
                }
                if let Some(want) = expect.independent {
                    let r = lrkit::diagnostics::linear_independence(&collection, &partition)
                        .map_err(|e| anyhow!(e.to_string()))?;
                    let got = r.rank == r.count;
                    if got != want {
                        bail!("expectation failed: independence {} (rank {} of {})", got, r.rank, r.count);
                    }
                    report.push(format!("independence {got} as expected"));
                }
            }
        }
        Ok(ScenarioOutcome { collection, report })
    }

    fn run_lr(
        &self,
        kvs: &[KnotVector],
        report: &mut Vec<String>,
    ) -> anyhow::Result<SplineCollection> {
        let mut lr = LrCollection::from_tensor_greville(kvs).map_err(|e| anyhow!(e.to_string()))?;
        for (i, s) in self.steps.iter().enumerate() {
            match s.method.as_str() {
                "lr-meshrectangle" => {
                    let rect = MeshRectangle::new(
                        s.direction
                            .ok_or_else(|| anyhow!("step {i}: missing direction"))?,
                        s.value.ok_or_else(|| anyhow!("step {i}: missing value"))?,
                        s.extent
                            .clone()
                            .ok_or_else(|| anyhow!("step {i}: missing extent"))?,
                        s.multiplicity.unwrap_or(1),
                    )
                    .map_err(|e| anyhow!(e.to_string()))?;
                    let (next, stats) = lr
                        .refine_allowing_noop(&rect)
                        .map_err(|e| anyhow!("step {i}: {e}"))?;
                    if stats.split == 0 {
                        bail!("step {i}: the meshrectangle splits no B-spline");
                    }
                    report.push(format!(
                        "step {} split {} produced {}",
                        i + 1,
                        stats.split,
                        stats.produced
                    ));
                    if let Some(e) = &s.expect {
                        check(i, "split", e.split, stats.split)?;
                        check(i, "produced", e.produced, stats.produced)?;
                    }
                    lr = next;
                }
                "structured" => {
                    let select = s
                        .select
                        .clone()
                        .ok_or_else(|| anyhow!("step {i}: missing selection"))?;
                    lr = lr
                        .structured_refine(&select)
                        .map_err(|e| anyhow!("step {i}: {e}"))?;
                    report.push(format!(
                        "step {} structured refinement -> {} members ({})",
                        i + 1,
                        lr.len(),
                        lr.collection().independence
                    ));
                }
                other => bail!("step {i}: {other:?} in an LR scenario"),
            }
        }
        Ok(lr.collection().clone())
    }

    fn run_hb(
        &self,
        kvs: &[KnotVector],
        report: &mut Vec<String>,
    ) -> anyhow::Result<SplineCollection> {
        // uniform clamped levels come from the space spec
        let (domain, cells) = match (&self.space.domain, &self.space.cells) {
            (Some(d), Some(c)) => (d.clone(), c.clone()),
            _ => bail!("hierarchical scenarios need domain and cells"),
        };
        let _ = kvs;
        let mut sel = HierarchySelection::new(domain, self.space.degrees.clone(), cells)
            .map_err(|e| anyhow!(e.to_string()))?;
        let n: usize = sel.levels()[0].fn_counts().iter().product();
        let grevilles: Vec<ControlPoint> = {
            let kvs = self
                .knot_vectors()
                .unwrap_or_default();
            let gs: Vec<Vec<f64>> = kvs.iter().map(|kv| kv.greville()).collect();
            let mut out = Vec::with_capacity(n);
            let dims: Vec<usize> = kvs.iter().map(|kv| kv.dim()).collect();
            let mut idx = vec![0usize; dims.len()];
            for _ in 0..n {
                out.push(ControlPoint::new(
                    idx.iter().enumerate().map(|(k, &i)| gs[k][i]).collect(),
                ));
                let mut k = dims.len();
                while k > 0 {
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < dims[k] {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            out
        };
        sel = sel
            .with_controls(grevilles)
            .map_err(|e| anyhow!(e.to_string()))?;
        for (i, s) in self.steps.iter().enumerate() {
            if s.method != "hb-region" {
                bail!("step {i}: {:?} in a hierarchical scenario", s.method);
            }
            let level = s.level.ok_or_else(|| anyhow!("step {i}: missing level"))?;
            let cells = s
                .cells
                .clone()
                .ok_or_else(|| anyhow!("step {i}: missing cells"))?;
            sel = sel
                .hb_refine(level, &cells)
                .map_err(|e| anyhow!("step {i}: {e}"))?;
            report.push(format!(
                "step {} active per level {:?}",
                i + 1,
                sel.active_counts()
            ));
            if let Some(e) = &s.expect {
                check(i, "active_total", e.active_total, sel.total_active())?;
            }
        }
        sel.hb_to_collection(true).map_err(|e| anyhow!(e.to_string()))
    }

    fn run_ts(
        &self,
        kvs: &[KnotVector],
        report: &mut Vec<String>,
    ) -> anyhow::Result<SplineCollection> {
        if kvs.len() != 2 {
            bail!("T-spline scenarios are bivariate");
        }
        let gs = kvs[0].greville();
        let gt = kvs[1].greville();
        let mut controls = Vec::new();
        for &s in &gs {
            for &t in &gt {
                controls.push(ControlPoint::new(vec![s, t]));
            }
        }
        let mut mesh =
            TMesh::tensor(&kvs[0], &kvs[1], controls).map_err(|e| anyhow!(e.to_string()))?;
        for (i, s) in self.steps.iter().enumerate() {
            if s.method != "ts-anchor" {
                bail!("step {i}: {:?} in a T-spline scenario", s.method);
            }
            let at = s.at.ok_or_else(|| anyhow!("step {i}: missing anchor position"))?;
            let (next, r) = mesh
                .semi_standard_insert(at)
                .map_err(|e| anyhow!("step {i}: {e}"))?;
            report.push(format!(
                "step {} refined {} anchors, added {} extra",
                i + 1,
                r.refined_anchors.len(),
                r.added_anchors.len()
            ));
            if let Some(e) = &s.expect {
                check(i, "refined_anchors", e.refined_anchors, r.refined_anchors.len())?;
                check(i, "added_anchors", e.added_anchors, r.added_anchors.len())?;
            }
            mesh = next;
        }
        let (collection, class) = mesh.to_collection().map_err(|e| anyhow!(e.to_string()))?;
        report.push(format!("classification {class}"));
        Ok(collection)
    }

    /// Growth-comparison form of the scenario (LR step specs with embedded
    /// hierarchical equivalents).
    pub fn growth_scenario(&self) -> anyhow::Result<GrowthScenario> {
        let (domain, cells) = match (&self.space.domain, &self.space.cells) {
            (Some(d), Some(c)) if d.len() == 2 && c[0] == c[1] && d[0] == d[1] => {
                (d[0], c[0])
            }
            _ => bail!("growth comparison needs a square uniform space"),
        };
        let steps = self
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.method != "lr-meshrectangle" {
                    bail!("growth scenarios use lr-meshrectangle steps with equivalents");
                }
                let extent = s
                    .extent
                    .clone()
                    .and_then(|e| e.first().copied())
                    .ok_or_else(|| anyhow!("step {i}: missing extent"))?;
                let hb_box = s
                    .hb_box
                    .clone()
                    .ok_or_else(|| anyhow!("step {i}: missing hb_box"))?;
                if hb_box.len() != 2 {
                    bail!("step {i}: hb_box needs two intervals");
                }
                Ok(GrowthStep {
                    direction: s.direction.unwrap_or(0),
                    value: s.value.ok_or_else(|| anyhow!("step {i}: missing value"))?,
                    extent,
                    anchor_line: s
                        .anchor_line
                        .ok_or_else(|| anyhow!("step {i}: missing anchor_line"))?,
                    hb_level: s.hb_level.ok_or_else(|| anyhow!("step {i}: missing hb_level"))?,
                    hb_box: (hb_box[0], hb_box[1]),
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(GrowthScenario {
            domain,
            base_cells: cells,
            steps,
        })
    }
}

fn check(step: usize, what: &str, expected: Option<usize>, got: usize) -> anyhow::Result<()> {
    if let Some(e) = expected {
        if e != got {
            bail!("step {step}: expected {what} = {e}, got {got}");
        }
    }
    Ok(())
}
