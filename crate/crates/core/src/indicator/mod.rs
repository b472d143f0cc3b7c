//! The indicator `I(τ) = ∫_B s (w − v) dx` with `s = α₀f` (refractive) or
//! `s = f` (dissipative), its τ series, classification and validators.

pub mod bounds;
pub mod classify;
pub mod identities;
pub mod pipeline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::SignedLog;

pub use bounds::{check_bounds, BoundCertificate};
pub use classify::{classify, ClassifyOptions, FitModel, Verdict, VerdictClass};
pub use identities::{check_lower_identity, check_upper_identity, IdentityInputs, IdentityReport};
pub use pipeline::{
    run_elliptic, run_pair, run_with_reference, simulate_pair, Pipeline, PipelineOptions,
    RunOutput, SimulatedPair,
};

/// One τ sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEntry {
    pub tau: f64,
    pub value: SignedLog,
    /// `ln` of the estimated rounding floor of `|I|`; `−∞` when unknown.
    pub ln_noise_floor: f64,
    /// The magnitude was not representable in `f64`.
    pub underflow: bool,
}

impl IndicatorEntry {
    pub fn new(tau: f64, value: SignedLog) -> Self {
        IndicatorEntry {
            tau,
            value,
            ln_noise_floor: f64::NEG_INFINITY,
            underflow: !value.is_zero() && value.try_to_f64().is_none(),
        }
    }

    pub fn with_noise_floor(mut self, ln_floor: f64) -> Self {
        self.ln_noise_floor = ln_floor;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    /// `τT + ln|I|`, `None` for an exact zero.
    pub fn g(&self, t_final: f64) -> Option<f64> {
        (!self.is_zero()).then(|| self.tau * t_final + self.value.ln_abs())
    }

    /// `ln|I| / (2τ)`, `None` for an exact zero.
    pub fn s(&self) -> Option<f64> {
        (!self.is_zero()).then(|| self.value.ln_abs() / (2.0 * self.tau))
    }

    /// `|I|` is within `factor` of the noise floor.
    pub fn near_floor(&self, factor: f64) -> bool {
        !self.is_zero() && self.value.ln_abs() < self.ln_noise_floor + factor.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub t_final: f64,
    pub entries: Vec<IndicatorEntry>,
}

impl IndicatorSeries {
    /// Fails unless τ is strictly increasing and every entry is a number.
    pub fn new(t_final: f64, entries: Vec<IndicatorEntry>) -> Result<Self> {
        for pair in entries.windows(2) {
            if !(pair[1].tau > pair[0].tau) {
                return Err(Error::invalid(
                    "tau strictly increasing",
                    format!("{} then {}", pair[0].tau, pair[1].tau),
                ));
            }
        }
        if let Some(e) = entries
            .iter()
            .find(|e| e.value.ln_abs().is_nan() || !e.tau.is_finite())
        {
            return Err(Error::MissingData(format!(
                "indicator at tau = {} is not a number",
                e.tau
            )));
        }
        Ok(IndicatorSeries { t_final, entries })
    }

    pub fn taus(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.tau).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Multiplies every `I(τ)` by `e^{c}`.
    pub fn rescaled(&self, ln_factor: f64) -> IndicatorSeries {
        let entries = self
            .entries
            .iter()
            .map(|e| IndicatorEntry {
                value: e.value.scale_exp(ln_factor),
                ln_noise_floor: e.ln_noise_floor + ln_factor,
                ..*e
            })
            .collect();
        IndicatorSeries {
            t_final: self.t_final,
            entries,
        }
    }

    /// Rows `tau, sign, log_abs_I, g, s`; zero entries leave the last three empty.
    pub fn write_csv<W: std::io::Write>(&self, comments: &[String], mut out: W) -> Result<()> {
        let io = |source| Error::Io {
            path: "series csv".into(),
            source,
        };
        for c in comments {
            writeln!(out, "# {c}").map_err(io)?;
        }
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Io {
            path: "series csv".into(),
            source: std::io::Error::other(e),
        };
        wtr.write_record(["tau", "sign", "log_abs_I", "g", "s"])
            .map_err(err)?;
        for e in &self.entries {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
            let ln = (!e.is_zero()).then(|| e.value.ln_abs());
            wtr.write_record([
                format!("{}", e.tau),
                e.value.sign().to_string(),
                opt(ln),
                opt(e.g(self.t_final)),
                opt(e.s()),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(io)
    }

    /// Parses the CSV written by [`write_csv`](Self::write_csv); `#` lines are skipped.
    pub fn read_csv<R: std::io::Read>(t_final: f64, input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let err = |e: csv::Error| Error::Parse {
            path: "series csv".into(),
            message: e.to_string(),
        };
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(err)?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        path: "series csv".into(),
                        message: format!("column {i}: {e}"),
                    })
            };
            let tau = num(0)?;
            let sign = num(1)? as i8;
            let value = if sign == 0 {
                SignedLog::ZERO
            } else {
                SignedLog::new(sign, num(2)?)
            };
            entries.push(IndicatorEntry::new(tau, value));
        }
        IndicatorSeries::new(t_final, entries)
    }
}

/// `Σ_c weight[c] (w[c] − v[c]) · vol` over the listed cells, in signed-log
/// form. `w` and `v` are indexed like `cells`; `weight` by cell index. An
/// all-zero integrand gives [`SignedLog::ZERO`].
pub fn indicator(
    weight: &[f64],
    w: &[f64],
    v: &[f64],
    cells: &[usize],
    cell_volume: f64,
) -> Result<SignedLog> {
    if w.len() != cells.len() || v.len() != cells.len() {
        return Err(Error::Shape {
            expected: cells.len(),
            actual: w.len().min(v.len()),
        });
    }
    let terms = cells.iter().enumerate().map(|(k, &c)| {
        SignedLog::from_f64(weight[c])
            * SignedLog::from_f64(w[k] - v[k])
            * SignedLog::from_f64(cell_volume)
    });
    Ok(SignedLog::sum(terms))
}
