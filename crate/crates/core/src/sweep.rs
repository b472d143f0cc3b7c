//! One-parameter families of scenarios and the aggregated batch table.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::medium::{ContrastSign, FieldSampler, ScenarioConfig};
use crate::region::RegionSpec;
use crate::report::{VerdictReport, TOOL, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    /// Final time `T`.
    T,
    /// Constant obstacle contrast `h`; its sign sets the declared assumption.
    Contrast,
    /// Value of the first background layer; `m0`, `M0` widen to cover it.
    K0,
    /// Lower end of the obstacle along the first axis, size kept.
    Position,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::T => "T",
            SweepParameter::Contrast => "contrast",
            SweepParameter::K0 => "k0",
            SweepParameter::Position => "position",
        }
    }

    /// The scenario with this parameter set to `value`.
    pub fn apply(&self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParameter::T => c.run.t_final = value,
            SweepParameter::Contrast => {
                c.medium.h = FieldSampler::Constant(value);
                c.medium.h_sign = Some(if value >= 0.0 {
                    ContrastSign::Positive
                } else {
                    ContrastSign::Negative
                });
            }
            SweepParameter::K0 => {
                let layer = c.medium.layers.first_mut().ok_or_else(|| {
                    Error::invalid("k0 sweep needs a background layer", "scenario has none")
                })?;
                layer.value = FieldSampler::Constant(value);
                let root = value.sqrt();
                c.medium.m0 = c.medium.m0.min(root);
                c.medium.big_m0 = c.medium.big_m0.max(root);
            }
            SweepParameter::Position => c.medium.obstacle = shifted(&c.medium.obstacle, value)?,
        }
        Ok(c)
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "t" => Ok(SweepParameter::T),
            "contrast" | "h" => Ok(SweepParameter::Contrast),
            "k0" => Ok(SweepParameter::K0),
            "position" => Ok(SweepParameter::Position),
            other => Err(Error::invalid(
                "sweep parameter is one of T, contrast, k0, position",
                other.to_string(),
            )),
        }
    }
}

fn lower_x(r: &RegionSpec) -> Option<f64> {
    match r {
        RegionSpec::Empty => None,
        RegionSpec::Interval { lo, .. } => Some(*lo),
        RegionSpec::Box { lo, .. } => lo.first().copied(),
        RegionSpec::Ball { center, radius } => center.first().map(|x| x - radius),
        RegionSpec::Union { parts } => parts.iter().filter_map(lower_x).reduce(f64::min),
    }
}

fn translate(r: &RegionSpec, dx: f64) -> RegionSpec {
    let shift = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| if i == 0 { x + dx } else { *x })
            .collect()
    };
    match r {
        RegionSpec::Empty => RegionSpec::Empty,
        RegionSpec::Interval { lo, hi } => RegionSpec::Interval {
            lo: lo + dx,
            hi: hi + dx,
        },
        RegionSpec::Box { lo, hi } => RegionSpec::Box {
            lo: shift(lo),
            hi: shift(hi),
        },
        RegionSpec::Ball { center, radius } => RegionSpec::Ball {
            center: shift(center),
            radius: *radius,
        },
        RegionSpec::Union { parts } => RegionSpec::Union {
            parts: parts.iter().map(|p| translate(p, dx)).collect(),
        },
    }
}

fn shifted(r: &RegionSpec, lo: f64) -> Result<RegionSpec> {
    let x0 = lower_x(r)
        .ok_or_else(|| Error::invalid("position sweep needs an obstacle", "obstacle is empty"))?;
    Ok(translate(r, lo - x0))
}

/// One row of the batch table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub parameter: SweepParameter,
    pub value: f64,
    pub outcome: std::result::Result<VerdictReport, String>,
}

/// Batch CSV, one row per value in input order.
pub fn write_batch_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    let io = |source| Error::Io {
        path: "batch csv".into(),
        source,
    };
    writeln!(out, "# tool {TOOL} {VERSION}").map_err(io)?;
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io {
        path: "batch csv".into(),
        source: std::io::Error::other(e),
    };
    wtr.write_record([
        "parameter",
        "value",
        "status",
        "pipeline",
        "class",
        "sign",
        "rate",
        "slope",
        "distance_lo",
        "distance_hi",
        "g_change",
        "T",
        "dist_db",
        "time_threshold",
        "scenario_hash",
        "error",
    ])
    .map_err(err)?;
    let num = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    for row in rows {
        let mut rec = vec![row.parameter.as_str().to_string(), format!("{}", row.value)];
        match &row.outcome {
            Ok(r) => rec.extend([
                "ok".to_string(),
                r.pipeline.as_str().to_string(),
                r.class.as_str().to_string(),
                r.sign.map(|s| s.to_string()).unwrap_or_default(),
                num(r.rate),
                num(r.slope),
                num(r.distance_band.map(|b| b[0])),
                num(r.distance_band.map(|b| b[1])),
                num(r.g_change),
                format!("{}", r.t_final),
                num(r.dist_db),
                num(r.time_threshold),
                r.scenario_hash.clone(),
                String::new(),
            ]),
            Err(e) => {
                rec.push("failed".into());
                rec.extend(std::iter::repeat_n(String::new(), 12));
                rec.push(e.clone());
            }
        }
        wtr.write_record(&rec).map_err(err)?;
    }
    wtr.flush().map_err(io)
}
