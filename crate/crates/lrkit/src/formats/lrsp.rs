//! The `.lrsp` exchange format: a line-oriented, versioned text encoding of
//! locally refined spline collections. One record per tensor-product
//! B-spline, each holding per-dimension knot values with parallel
//! multiplicities, a scaling factor, a control point and (for rational
//! splines) a weight.
//!
//! Knot values serialize as hex floats by default for bit-exact round trips;
//! a decimal mode (`%.17e`, also round-trip exact) is available for
//! readability. Readers accept both spellings.

use super::hexfloat::{format_hex, parse_hex};
use crate::collection::{ControlPoint, Independence, ScaledBSpline, SplineCollection};
use crate::error::{Error, Result};
use crate::splinecore::{LocalKnots, TensorBSpline};
use std::fmt::Write as _;

pub const LRSP_VERSION: u32 = 1;
const MAX_COUNT: usize = 1 << 20;

/// Spline-type tag of a document. Truncated hierarchical collections export
/// as `HierarchicalBSpline` with the truncation expanded into records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineType {
    AnalysisSuitableTSpline,
    HierarchicalBSpline,
    LRBSpline,
    SemiStandardTSpline,
    StandardTSpline,
}

impl SplineType {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplineType::AnalysisSuitableTSpline => "analysis_suitable_tspline",
            SplineType::HierarchicalBSpline => "hierarchical_bspline",
            SplineType::LRBSpline => "lr_bspline",
            SplineType::SemiStandardTSpline => "semi_standard_tspline",
            SplineType::StandardTSpline => "standard_tspline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "analysis_suitable_tspline" => SplineType::AnalysisSuitableTSpline,
            "hierarchical_bspline" => SplineType::HierarchicalBSpline,
            "lr_bspline" => SplineType::LRBSpline,
            "semi_standard_tspline" => SplineType::SemiStandardTSpline,
            "standard_tspline" => SplineType::StandardTSpline,
            _ => return None,
        })
    }
}

/// Per-dimension knot list with parallel multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct DimKnots {
    pub values: Vec<f64>,
    pub multiplicities: Vec<usize>,
}

impl DimKnots {
    /// Run-length encode local knots (values strictly increasing).
    pub fn from_local(local: &LocalKnots) -> Self {
        let mut values = Vec::new();
        let mut multiplicities = Vec::new();
        for &v in local.values() {
            match values.last() {
                Some(&last) if last == v => *multiplicities.last_mut().unwrap() += 1,
                _ => {
                    values.push(v);
                    multiplicities.push(1);
                }
            }
        }
        DimKnots {
            values,
            multiplicities,
        }
    }

    /// Expand back to local knots of the given degree.
    pub fn to_local(&self, degree: usize) -> Result<LocalKnots> {
        let mut values = Vec::new();
        for (&v, &m) in self.values.iter().zip(&self.multiplicities) {
            values.extend(std::iter::repeat(v).take(m));
        }
        LocalKnots::new(degree, values)
    }
}

/// One tensor-product B-spline entity.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBSplineRecord {
    pub dims: Vec<DimKnots>,
    pub gamma: f64,
    pub point: Vec<f64>,
    pub weight: Option<f64>,
}

/// A serialized locally refined spline collection.
#[derive(Debug, Clone, PartialEq)]
pub struct LRSplineDocument {
    pub spline_type: SplineType,
    pub independence: Independence,
    pub parametric_dim: usize,
    pub geometric_dim: usize,
    pub rational: bool,
    pub degrees: Vec<usize>,
    pub records: Vec<LocalBSplineRecord>,
}

impl LRSplineDocument {
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Validation {
                record: 0,
                msg: "a document needs at least one record".to_string(),
            });
        }
        if self.parametric_dim == 0
            || self.parametric_dim > 3
            || self.degrees.len() != self.parametric_dim
        {
            return Err(Error::Validation {
                record: 0,
                msg: "parametric dimension must be 1 to 3 with one degree per direction".to_string(),
            });
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.dims.len() != self.parametric_dim {
                return Err(Error::Validation {
                    record: i,
                    msg: "record dimension differs from the document header".to_string(),
                });
            }
            for (k, d) in r.dims.iter().enumerate() {
                if d.values.len() != d.multiplicities.len() {
                    return Err(Error::Validation {
                        record: i,
                        msg: format!("dimension {k}: values and multiplicities differ in length"),
                    });
                }
                if d.values.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Validation {
                        record: i,
                        msg: format!("dimension {k}: knot values must be strictly increasing"),
                    });
                }
                if d.multiplicities.iter().any(|&m| m == 0) {
                    return Err(Error::Validation {
                        record: i,
                        msg: format!("dimension {k}: multiplicities must be at least 1"),
                    });
                }
                let total: usize = d.multiplicities.iter().sum();
                if total != self.degrees[k] + 2 {
                    return Err(Error::Validation {
                        record: i,
                        msg: format!(
                            "dimension {k}: multiplicities sum to {total}, expected degree+2 = {}",
                            self.degrees[k] + 2
                        ),
                    });
                }
            }
            if !(r.gamma > 0.0) || !r.gamma.is_finite() {
                return Err(Error::Validation {
                    record: i,
                    msg: "scaling factor must be positive and finite".to_string(),
                });
            }
            if r.point.len() != self.geometric_dim || r.point.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation {
                    record: i,
                    msg: "control point must be finite with the document's geometric dimension"
                        .to_string(),
                });
            }
            if self.rational != r.weight.is_some() {
                return Err(Error::Validation {
                    record: i,
                    msg: "rational flag and per-record weights must agree".to_string(),
                });
            }
            if let Some(w) = r.weight {
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::Validation {
                        record: i,
                        msg: "weight must be positive and finite".to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Build a document from a collection, records in canonical knot order.
    pub fn from_collection(c: &SplineCollection, spline_type: SplineType) -> Self {
        let records = c
            .canonical_order()
            .into_iter()
            .map(|i| {
                let s = &c.splines()[i];
                LocalBSplineRecord {
                    dims: s
                        .spline()
                        .factors()
                        .iter()
                        .map(DimKnots::from_local)
                        .collect(),
                    gamma: s.gamma(),
                    point: s.coeff.coords.clone(),
                    weight: s.coeff.weight,
                }
            })
            .collect();
        LRSplineDocument {
            spline_type,
            independence: c.independence,
            parametric_dim: c.dim(),
            geometric_dim: c.geo_dim(),
            rational: c.is_rational(),
            degrees: c.degrees().to_vec(),
            records,
        }
    }

    /// Rebuild the collection; the domain is the bounding box of the member
    /// supports.
    pub fn to_collection(&self) -> Result<SplineCollection> {
        self.validate()?;
        let mut splines = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let factors: Vec<LocalKnots> = r
                .dims
                .iter()
                .zip(&self.degrees)
                .map(|(d, &p)| d.to_local(p))
                .collect::<Result<_>>()?;
            let spline = TensorBSpline::new(factors)?;
            let coeff = match r.weight {
                Some(w) => ControlPoint::weighted(r.point.clone(), w),
                None => ControlPoint::new(r.point.clone()),
            };
            splines.push(ScaledBSpline::new(spline, r.gamma, coeff)?);
        }
        let mut domain = vec![(f64::INFINITY, f64::NEG_INFINITY); self.parametric_dim];
        for s in &splines {
            for (k, f) in s.spline().factors().iter().enumerate() {
                let (lo, hi) = f.support();
                domain[k].0 = domain[k].0.min(lo);
                domain[k].1 = domain[k].1.max(hi);
            }
        }
        SplineCollection::new(domain, self.degrees.clone(), splines, self.independence)
    }
}

fn independence_str(i: Independence) -> &'static str {
    match i {
        Independence::Independent => "independent",
        Independence::NotIndependent => "not_independent",
        Independence::NotTested => "not_tested",
    }
}

fn parse_independence(s: &str) -> Option<Independence> {
    Some(match s {
        "independent" => Independence::Independent,
        "not_independent" => Independence::NotIndependent,
        "not_tested" => Independence::NotTested,
        _ => return None,
    })
}

/// Number formatting mode for knot values, scaling factors and points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumberFormat {
    #[default]
    Hex,
    Decimal,
}

fn fmt_num(x: f64, mode: NumberFormat) -> String {
    match mode {
        NumberFormat::Hex => format_hex(x),
        NumberFormat::Decimal => format!("{x:.17e}"),
    }
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    if s.starts_with("0x") || s.starts_with("-0x") || s.starts_with("+0x") {
        parse_hex(s).map_err(|_| Error::Parse {
            line,
            msg: format!("malformed hex float {s:?}"),
        })
    } else {
        let v: f64 = s.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("malformed number {s:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line,
                msg: format!("non-finite number {s:?}"),
            });
        }
        Ok(v)
    }
}

/// Serialize a document (validated first).
pub fn write_lr(doc: &LRSplineDocument, mode: NumberFormat) -> Result<String> {
    doc.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, "LRSP {LRSP_VERSION}");
    let _ = writeln!(out, "spline_type {}", doc.spline_type.as_str());
    let _ = writeln!(out, "independence {}", independence_str(doc.independence));
    let _ = writeln!(out, "parametric_dim {}", doc.parametric_dim);
    let _ = writeln!(out, "geometric_dim {}", doc.geometric_dim);
    let _ = writeln!(out, "rational {}", if doc.rational { 1 } else { 0 });
    let degrees: Vec<String> = doc.degrees.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(out, "degrees {}", degrees.join(" "));
    let _ = writeln!(
        out,
        "knot_format {}",
        match mode {
            NumberFormat::Hex => "hex",
            NumberFormat::Decimal => "decimal",
        }
    );
    let _ = writeln!(out, "records {}", doc.records.len());
    for r in &doc.records {
        let _ = writeln!(out, "record");
        for (k, d) in r.dims.iter().enumerate() {
            let knots: Vec<String> = d
                .values
                .iter()
                .zip(&d.multiplicities)
                .map(|(&v, &m)| format!("{}*{}", fmt_num(v, mode), m))
                .collect();
            let _ = writeln!(out, "knots {} {}", k, knots.join(" "));
        }
        let _ = writeln!(out, "gamma {}", fmt_num(r.gamma, mode));
        let point: Vec<String> = r.point.iter().map(|&v| fmt_num(v, mode)).collect();
        let _ = writeln!(out, "point {}", point.join(" "));
        if let Some(w) = r.weight {
            let _ = writeln!(out, "weight {}", fmt_num(w, mode));
        }
        let _ = writeln!(out, "end");
    }
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-empty, non-comment line with its 1-based number.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.inner.by_ref() {
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t));
        }
        None
    }
}

fn expect_field<'a>(lines: &mut Lines<'a>, key: &str) -> Result<(usize, &'a str)> {
    let (line, text) = lines.next_line().ok_or(Error::Parse {
        line: 0,
        msg: format!("unexpected end of input, expected {key:?}"),
    })?;
    let rest = text.strip_prefix(key).ok_or(Error::Parse {
        line,
        msg: format!("expected {key:?}, found {text:?}"),
    })?;
    if !rest.is_empty() && !rest.starts_with(' ') {
        return Err(Error::Parse {
            line,
            msg: format!("expected {key:?}, found {text:?}"),
        });
    }
    Ok((line, rest.trim()))
}

fn parse_count(s: &str, line: usize) -> Result<usize> {
    let n: usize = s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("malformed count {s:?}"),
    })?;
    if n > MAX_COUNT {
        return Err(Error::Parse {
            line,
            msg: format!("count {n} exceeds the supported maximum"),
        });
    }
    Ok(n)
}

/// Parse a document; the result satisfies all invariants.
pub fn read_lr(text: &str) -> Result<LRSplineDocument> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.next_line().ok_or(Error::Parse {
        line: 0,
        msg: "empty input".to_string(),
    })?;
    let version = header.strip_prefix("LRSP ").ok_or(Error::Parse {
        line,
        msg: "missing LRSP header".to_string(),
    })?;
    if version.trim() != LRSP_VERSION.to_string() {
        return Err(Error::Parse {
            line,
            msg: format!("unsupported version {version:?}"),
        });
    }
    let (line, v) = expect_field(&mut lines, "spline_type")?;
    let spline_type = SplineType::parse(v).ok_or(Error::Parse {
        line,
        msg: format!("unknown spline type {v:?}"),
    })?;
    let (line, v) = expect_field(&mut lines, "independence")?;
    let independence = parse_independence(v).ok_or(Error::Parse {
        line,
        msg: format!("unknown independence status {v:?}"),
    })?;
    let (line, v) = expect_field(&mut lines, "parametric_dim")?;
    let parametric_dim = parse_count(v, line)?;
    let (line, v) = expect_field(&mut lines, "geometric_dim")?;
    let geometric_dim = parse_count(v, line)?;
    let (line, v) = expect_field(&mut lines, "rational")?;
    let rational = match v {
        "0" => false,
        "1" => true,
        _ => {
            return Err(Error::Parse {
                line,
                msg: format!("rational must be 0 or 1, found {v:?}"),
            })
        }
    };
    let (line, v) = expect_field(&mut lines, "degrees")?;
    let degrees: Vec<usize> = v
        .split_whitespace()
        .map(|s| parse_count(s, line))
        .collect::<Result<_>>()?;
    let (line, v) = expect_field(&mut lines, "knot_format")?;
    if v != "hex" && v != "decimal" {
        return Err(Error::Parse {
            line,
            msg: format!("unknown knot format {v:?}"),
        });
    }
    let (line, v) = expect_field(&mut lines, "records")?;
    let expected_records = parse_count(v, line)?;
    let mut records = Vec::with_capacity(expected_records.min(4096));
    loop {
        let Some((line, text)) = lines.next_line() else {
            break;
        };
        if text != "record" {
            return Err(Error::Parse {
                line,
                msg: format!("expected \"record\", found {text:?}"),
            });
        }
        let mut dims: Vec<Option<DimKnots>> = vec![None; parametric_dim.min(MAX_COUNT)];
        let mut gamma: Option<f64> = None;
        let mut point: Option<Vec<f64>> = None;
        let mut weight: Option<f64> = None;
        loop {
            let (line, text) = lines.next_line().ok_or(Error::Parse {
                line: 0,
                msg: "unexpected end of input inside a record".to_string(),
            })?;
            if text == "end" {
                break;
            }
            let mut parts = text.split_whitespace();
            match parts.next() {
                Some("knots") => {
                    let k = parse_count(
                        parts.next().ok_or(Error::Parse {
                            line,
                            msg: "knots line is missing the dimension index".to_string(),
                        })?,
                        line,
                    )?;
                    if k >= dims.len() {
                        return Err(Error::Parse {
                            line,
                            msg: format!("knot dimension {k} out of range"),
                        });
                    }
                    let mut values = Vec::new();
                    let mut multiplicities = Vec::new();
                    for pair in parts {
                        let (v, m) = pair.split_once('*').ok_or(Error::Parse {
                            line,
                            msg: format!("expected value*multiplicity, found {pair:?}"),
                        })?;
                        values.push(parse_num(v, line)?);
                        multiplicities.push(parse_count(m, line)?);
                    }
                    dims[k] = Some(DimKnots {
                        values,
                        multiplicities,
                    });
                }
                Some("gamma") => {
                    gamma = Some(parse_num(
                        parts.next().ok_or(Error::Parse {
                            line,
                            msg: "gamma line is missing its value".to_string(),
                        })?,
                        line,
                    )?);
                }
                Some("point") => {
                    point = Some(
                        parts
                            .map(|s| parse_num(s, line))
                            .collect::<Result<Vec<f64>>>()?,
                    );
                }
                Some("weight") => {
                    weight = Some(parse_num(
                        parts.next().ok_or(Error::Parse {
                            line,
                            msg: "weight line is missing its value".to_string(),
                        })?,
                        line,
                    )?);
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unexpected record field {other:?}"),
                    });
                }
            }
        }
        let dims: Vec<DimKnots> = dims
            .into_iter()
            .enumerate()
            .map(|(k, d)| {
                d.ok_or(Error::Parse {
                    line,
                    msg: format!("record is missing knots for dimension {k}"),
                })
            })
            .collect::<Result<_>>()?;
        records.push(LocalBSplineRecord {
            dims,
            gamma: gamma.ok_or(Error::Parse {
                line,
                msg: "record is missing its scaling factor".to_string(),
            })?,
            point: point.ok_or(Error::Parse {
                line,
                msg: "record is missing its control point".to_string(),
            })?,
            weight,
        });
        if records.len() > expected_records {
            return Err(Error::Parse {
                line,
                msg: format!("more records than the declared {expected_records}"),
            });
        }
    }
    if records.len() != expected_records {
        return Err(Error::Parse {
            line: 0,
            msg: format!(
                "record count mismatch: declared {expected_records}, found {}",
                records.len()
            ),
        });
    }
    let doc = LRSplineDocument {
        spline_type,
        independence,
        parametric_dim,
        geometric_dim,
        rational,
        degrees,
        records,
    };
    doc.validate()?;
    Ok(doc)
}
