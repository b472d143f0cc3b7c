//! Verdicts from the τ series.
//!
//! With `g(τ) = τT + ln|I(τ)|` over the final window:
//! - `g` rises by more than `Δ_min` with one sign throughout: obstacle,
//!   `A.I` for a negative indicator and `A.II` for a positive one;
//! - `g` never rises, or falls by more than `Δ_min`: empty;
//! - anything else is inconclusive.
//!
//! The rate is half the fitted slope of `ln|I|` against τ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{Mode, Scenario};

use super::IndicatorSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictClass {
    Empty,
    #[serde(rename = "Obstacle_AI")]
    ObstacleAI,
    #[serde(rename = "Obstacle_AII")]
    ObstacleAII,
    Inconclusive,
}

impl VerdictClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictClass::Empty => "Empty",
            VerdictClass::ObstacleAI => "Obstacle_AI",
            VerdictClass::ObstacleAII => "Obstacle_AII",
            VerdictClass::Inconclusive => "Inconclusive",
        }
    }

    pub fn is_obstacle(&self) -> bool {
        matches!(self, VerdictClass::ObstacleAI | VerdictClass::ObstacleAII)
    }

    /// Sign the indicator has for this class.
    pub fn expected_sign(&self) -> Option<i8> {
        match self {
            VerdictClass::ObstacleAI => Some(-1),
            VerdictClass::ObstacleAII => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `ln|I| ≈ c + ŝτ`.
    Linear,
    /// `ln|I| ≈ c + ŝτ + m ln τ`, absorbing algebraic prefactors.
    LogCorrected,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOptions {
    pub mode: Mode,
    pub m0: f64,
    pub big_m0: f64,
    pub window_fraction: f64,
    pub delta_min: f64,
    /// Entries with `|I|` within this factor of their noise floor are dropped.
    pub floor_factor: f64,
    pub fit: FitModel,
    pub min_samples: usize,
    /// Required `τ_max / τ_min`.
    pub min_span: f64,
}

impl ClassifyOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        ClassifyOptions {
            mode: s.medium.mode,
            m0: s.medium.m0,
            big_m0: s.medium.big_m0,
            window_fraction: s.window_fraction,
            delta_min: s.delta_min,
            ..Self::new(s.medium.mode, s.medium.m0, s.medium.big_m0)
        }
    }

    pub fn new(mode: Mode, m0: f64, big_m0: f64) -> Self {
        ClassifyOptions {
            mode,
            m0,
            big_m0,
            window_fraction: 1.0 / 3.0,
            delta_min: 2.0,
            floor_factor: 10.0,
            fit: FitModel::LogCorrected,
            min_samples: 8,
            min_span: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of `ln τ` (zero for the linear model).
    pub log_coefficient: f64,
    /// RMS residual in log units.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub class: VerdictClass,
    /// Half the fitted slope of `ln|I|`.
    pub rate_estimate: Option<f64>,
    /// Distances `[−r/M0, −r/m0]` clipped at zero; a point in the dissipative mode.
    pub distance_band: Option<[f64; 2]>,
    pub fit: Option<Fit>,
    /// τ range of the fitted window.
    pub window: [f64; 2],
    /// τ values dropped for sitting on the noise floor.
    pub trimmed: Vec<f64>,
    /// `g(τ_last) − g(τ_first)` over the window.
    pub g_change: Option<f64>,
    /// Fraction of window steps on which `g` increases.
    pub monotonicity_score: f64,
    /// Common sign over the window, if any.
    pub sign: Option<i8>,
    /// Smallest τ from which every sample has that sign.
    pub sign_threshold: Option<f64>,
    pub warnings: Vec<String>,
}

/// Least squares for `y ≈ Σ_j β_j φ_j(x)` with 2 or 3 basis columns.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * yi;
        }
    }
    // Gaussian elimination with partial pivoting on the normal equations
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        for r in c + 1..p {
            let m = a[r][c] / a[c][c];
            for k in c..=p {
                a[r][k] -= m * a[c][k];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for c in (0..p).rev() {
        let s: f64 = (c + 1..p).map(|k| a[c][k] * beta[k]).sum();
        beta[c] = (a[c][p] - s) / a[c][c];
    }
    Some(beta)
}

/// Fits `ln|I|` against τ. Falls back to the linear model below four points.
pub fn fit_log_magnitude(taus: &[f64], ln_abs: &[f64], model: FitModel) -> Option<Fit> {
    let n = taus.len();
    if n < 2 {
        return None;
    }
    let model = if n < 4 { FitModel::Linear } else { model };
    // centre τ for conditioning
    let t0 = taus.iter().sum::<f64>() / n as f64;
    let rows: Vec<Vec<f64>> = taus
        .iter()
        .map(|&t| match model {
            FitModel::Linear => vec![1.0, t - t0],
            FitModel::LogCorrected => vec![1.0, t - t0, (t / t0).ln()],
        })
        .collect();
    let beta = least_squares(&rows, ln_abs)?;
    let residual = (rows
        .iter()
        .zip(ln_abs)
        .map(|(r, y)| {
            let pred: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (y - pred).powi(2)
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let log_coefficient = beta.get(2).copied().unwrap_or(0.0);
    Some(Fit {
        slope: beta[1],
        intercept: beta[0] - beta[1] * t0 - log_coefficient * t0.ln(),
        log_coefficient,
        residual,
        points: n,
    })
}

pub fn classify(series: &IndicatorSeries, opts: &ClassifyOptions) -> Result<Verdict> {
    let n = series.len();
    if n < opts.min_samples {
        return Err(Error::TooFewSamples(format!(
            "{n} tau samples, need {}",
            opts.min_samples
        )));
    }
    let entries = &series.entries;
    let span = entries[n - 1].tau / entries[0].tau;
    if !(span >= opts.min_span * (1.0 - 1e-12)) {
        return Err(Error::TooFewSamples(format!(
            "tau spans a factor {span:.3}, need {}",
            opts.min_span
        )));
    }
    let start = n - ((opts.window_fraction * n as f64).ceil() as usize).clamp(2, n);
    let window = [entries[start].tau, entries[n - 1].tau];
    let mut verdict = Verdict {
        class: VerdictClass::Inconclusive,
        rate_estimate: None,
        distance_band: None,
        fit: None,
        window,
        trimmed: Vec::new(),
        g_change: None,
        monotonicity_score: 0.0,
        sign: None,
        sign_threshold: None,
        warnings: Vec::new(),
    };
    if entries.iter().all(|e| e.is_zero()) {
        verdict.class = VerdictClass::Empty;
        verdict.sign = Some(0);
        verdict
            .warnings
            .push("indicator is identically zero".into());
        return Ok(verdict);
    }

    let mut kept = Vec::new();
    for e in &entries[start..] {
        if e.near_floor(opts.floor_factor) {
            verdict.trimmed.push(e.tau);
        } else {
            kept.push(*e);
        }
    }
    if kept.len() < 2 {
        verdict
            .warnings
            .push("fewer than two window samples above the noise floor".into());
        return Ok(verdict);
    }

    let first_sign = kept[0].value.sign();
    let stable = first_sign != 0 && kept.iter().all(|e| e.value.sign() == first_sign);
    if stable {
        verdict.sign = Some(first_sign);
        let mut threshold = entries[n - 1].tau;
        for e in entries.iter().rev() {
            if e.value.sign() != first_sign {
                break;
            }
            threshold = e.tau;
        }
        verdict.sign_threshold = Some(threshold);
    }

    let nonzero: Vec<_> = kept.iter().filter(|e| !e.is_zero()).collect();
    let g: Vec<f64> = nonzero.iter().filter_map(|e| e.g(series.t_final)).collect();
    if g.len() >= 2 {
        let steps = g.len() - 1;
        let ups = g.windows(2).filter(|p| p[1] > p[0]).count();
        verdict.monotonicity_score = ups as f64 / steps as f64;
        verdict.g_change = Some(g[steps] - g[0]);
        let taus: Vec<f64> = nonzero.iter().map(|e| e.tau).collect();
        let ln: Vec<f64> = nonzero.iter().map(|e| e.value.ln_abs()).collect();
        verdict.fit = fit_log_magnitude(&taus, &ln, opts.fit);
    }
    verdict.rate_estimate = verdict.fit.map(|f| f.slope / 2.0);

    let dg = verdict.g_change.unwrap_or(0.0);
    let non_increasing = verdict.g_change.is_some() && verdict.monotonicity_score == 0.0;
    verdict.class = if dg > opts.delta_min && stable {
        if first_sign < 0 {
            VerdictClass::ObstacleAI
        } else {
            VerdictClass::ObstacleAII
        }
    } else if dg < -opts.delta_min || non_increasing {
        VerdictClass::Empty
    } else {
        VerdictClass::Inconclusive
    };
    if verdict.class != VerdictClass::Empty {
        verdict.distance_band = verdict.rate_estimate.map(|r| distance_band(r, opts));
    }
    if !stable && dg > opts.delta_min {
        verdict
            .warnings
            .push("g grows but the indicator changes sign in the window".into());
    }
    Ok(verdict)
}

/// `[max(0, −r/M0), max(0, −r/m0)]`, or `[−r, −r]` clipped at zero when dissipative.
pub fn distance_band(rate: f64, opts: &ClassifyOptions) -> [f64; 2] {
    match opts.mode {
        Mode::Refractive => [(-rate / opts.big_m0).max(0.0), (-rate / opts.m0).max(0.0)],
        Mode::Dissipative => {
            let d = (-rate).max(0.0);
            [d, d]
        }
    }
}
