//! Run artifacts: verdict JSON and a plain-text summary. Every artifact
//! carries the tool version and the scenario hash.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::indicator::{BoundCertificate, Pipeline, RunOutput, VerdictClass};
use crate::medium::{Mode, Scenario};

pub const TOOL: &str = "enclosure";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comment lines for CSV artifacts.
pub fn provenance_comments(scenario: &Scenario) -> Vec<String> {
    vec![
        format!("tool {TOOL} {VERSION}"),
        format!("scenario_hash {}", scenario.hash),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    /// Largest relative residual of the elliptic solves.
    pub solver: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario_hash: String,
    pub pipeline: Pipeline,
    pub mode: Mode,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub class: VerdictClass,
    pub sign: Option<i8>,
    pub rate: Option<f64>,
    /// Fitted slope of `ln|I|` against τ; twice the rate.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub log_coefficient: Option<f64>,
    pub fit_residual: Option<f64>,
    pub fit_points: usize,
    pub distance_band: Option<[f64; 2]>,
    pub window: [f64; 2],
    pub trimmed: Vec<f64>,
    pub g_change: Option<f64>,
    pub monotonicity_score: f64,
    pub sign_threshold: Option<f64>,
    pub m0: f64,
    #[serde(rename = "M0")]
    pub big_m0: f64,
    /// Ground-truth `dist(D, B)`; absent without an obstacle.
    pub dist_db: Option<f64>,
    pub time_threshold: Option<f64>,
    pub residuals: Residuals,
    pub certificates: Vec<BoundCertificate>,
    pub certificates_hold: Option<bool>,
    pub warnings: Vec<String>,
}

impl VerdictReport {
    pub fn new(scenario: &Scenario, out: &RunOutput) -> Self {
        let v = &out.verdict;
        VerdictReport {
            tool: TOOL,
            version: VERSION,
            scenario_hash: scenario.hash.clone(),
            pipeline: out.pipeline,
            mode: scenario.medium.mode,
            t_final: scenario.t_final,
            class: v.class,
            sign: v.sign,
            rate: v.rate_estimate,
            slope: v.fit.map(|f| f.slope),
            intercept: v.fit.map(|f| f.intercept),
            log_coefficient: v.fit.map(|f| f.log_coefficient),
            fit_residual: v.fit.map(|f| f.residual),
            fit_points: v.fit.map_or(0, |f| f.points),
            distance_band: v.distance_band,
            window: v.window,
            trimmed: v.trimmed.clone(),
            g_change: v.g_change,
            monotonicity_score: v.monotonicity_score,
            sign_threshold: v.sign_threshold,
            m0: scenario.medium.m0,
            big_m0: scenario.medium.big_m0,
            dist_db: scenario.derived.dist_db,
            time_threshold: scenario.derived.time_threshold,
            residuals: Residuals {
                solver: out.solver_residual,
            },
            certificates: out.certificates.clone(),
            certificates_hold: (!out.certificates.is_empty())
                .then(|| out.certificates.iter().all(|c| c.holds())),
            warnings: v.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

/// Human-readable summary of one or more pipeline runs on a scenario.
pub fn write_summary<W: Write>(
    mut out: W,
    scenario: &Scenario,
    source: &str,
    reports: &[VerdictReport],
) -> Result<()> {
    let io = |source| Error::Io {
        path: "summary".into(),
        source,
    };
    let d = &scenario.derived;
    let mut text = format!(
        "{TOOL} {VERSION}\nscenario {source}\nscenario_hash {}\n\nmode {}\ngrid {} cells, spacing {:?}\nT {}  dt {:.6e}  steps {}\ndist(D,B) {}  time threshold {}\n",
        scenario.hash,
        scenario.medium.mode.as_str(),
        scenario.grid.len(),
        scenario.grid.spacing(),
        scenario.t_final,
        d.dt,
        d.steps,
        opt(d.dist_db),
        opt(d.time_threshold),
    );
    for r in reports {
        text.push_str(&format!(
            "\n[{}]\nclass {}\nsign {}\nrate {}\nslope {}\ndistance band {}\nwindow tau in [{}, {}]\ng change {}\n",
            r.pipeline.as_str(),
            r.class.as_str(),
            r.sign.map_or("mixed".to_string(), |s| s.to_string()),
            opt(r.rate),
            opt(r.slope),
            r.distance_band.map_or("n/a".to_string(), |b| format!("[{:.6}, {:.6}]", b[0], b[1])),
            r.window[0],
            r.window[1],
            opt(r.g_change),
        ));
        if let Some(ok) = r.certificates_hold {
            text.push_str(&format!(
                "certificates {}\n",
                if ok { "hold" } else { "FAILED" }
            ));
        }
        for w in &r.warnings {
            text.push_str(&format!("warning: {w}\n"));
        }
    }
    out.write_all(text.as_bytes()).map_err(io)
}
