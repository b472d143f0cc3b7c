//! Two-sided certificates for the indicator:
//! `κ²∫(ã₀ − ã)v² − slack ≤ I ≤ κ²∫(ã₀/ã)(ã₀ − ã)v² + slack`,
//! `κ² = τ²` or `σ²`, `ã = α + qρ/κ²`, with
//! `slack = e^{−τT}(|∫𝓕R| + |∫𝓕v|) + margin`.
//!
//! The bound integrals only involve `v` on the obstacle, so they keep full
//! relative precision in signed-log form. A negative upper bound certifies
//! `I < 0`; a positive lower bound certifies `I > 0`.

use serde::Serialize;

use crate::elliptic::Shift;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::logspace::SignedLog;

pub struct BoundInputs<'a> {
    pub tau: f64,
    pub t_final: f64,
    pub shift: Shift,
    /// Indicator with the source weight of the identity in use.
    pub indicator: SignedLog,
    pub v: &'a ScalarField,
    pub alpha: &'a ScalarField,
    pub alpha0: &'a ScalarField,
    pub q: &'a ScalarField,
    pub q0: &'a ScalarField,
    pub obstacle_cells: &'a [usize],
    /// `∫𝓕R` and `∫𝓕v`.
    pub final_pairings: (f64, f64),
    /// Relative rounding allowance on `|I|`, `|lower|` and `|upper|`.
    pub rel_margin: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundCertificate {
    pub tau: f64,
    pub indicator: f64,
    pub lower: f64,
    pub upper: f64,
    pub slack: f64,
    /// `ln|·|` of the four numbers, usable when they underflow.
    pub ln_abs: [f64; 4],
    pub lower_holds: bool,
    pub upper_holds: bool,
    /// `−1` when `upper + slack < 0`, `+1` when `lower − slack > 0`.
    pub certified_sign: Option<i8>,
}

impl BoundCertificate {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

/// Evaluates the certificate without failing on a violation.
pub fn evaluate_bounds(x: &BoundInputs) -> Result<BoundCertificate> {
    let n = x.v.values().len();
    for field in [x.alpha, x.alpha0, x.q, x.q0] {
        if field.values().len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: field.values().len(),
            });
        }
    }
    let (k2, rho) = x.shift.factors(x.tau);
    let vol = SignedLog::from_f64(x.v.grid().cell_volume() * k2);
    let mut lower = Vec::with_capacity(x.obstacle_cells.len());
    let mut upper = Vec::with_capacity(x.obstacle_cells.len());
    for &c in x.obstacle_cells {
        let a = x.alpha.values()[c] + x.q.values()[c] * rho / k2;
        let a0 = x.alpha0.values()[c] + x.q0.values()[c] * rho / k2;
        let v2 = SignedLog::from_f64(x.v.values()[c]).powi(2);
        lower.push(SignedLog::from_f64(a0 - a) * v2 * vol);
        upper.push(SignedLog::from_f64(a0 / a * (a0 - a)) * v2 * vol);
    }
    let lower = SignedLog::sum(lower);
    let upper = SignedLog::sum(upper);
    let (fr, fv) = x.final_pairings;
    let mut slack = SignedLog::from_f64(fr.abs() + fv.abs()).scale_exp(-x.tau * x.t_final);
    let scale = SignedLog::sum([x.indicator.abs(), lower.abs(), upper.abs()]);
    slack = slack.add(scale * SignedLog::from_f64(x.rel_margin));

    let ge = |a: SignedLog, b: SignedLog| a.cmp_value(&b) != std::cmp::Ordering::Less;
    let lower_holds = ge(x.indicator, lower.sub(slack));
    let upper_holds = ge(upper.add(slack), x.indicator);
    let certified_sign = if upper.add(slack).sign() < 0 {
        Some(-1)
    } else if lower.sub(slack).sign() > 0 {
        Some(1)
    } else {
        None
    };
    Ok(BoundCertificate {
        tau: x.tau,
        indicator: x.indicator.to_f64(),
        lower: lower.to_f64(),
        upper: upper.to_f64(),
        slack: slack.to_f64(),
        ln_abs: [
            x.indicator.ln_abs(),
            lower.ln_abs(),
            upper.ln_abs(),
            slack.ln_abs(),
        ],
        lower_holds,
        upper_holds,
        certified_sign,
    })
}

/// Like [`evaluate_bounds`] but a violation is a [`Error::BoundViolation`]
/// naming all four numbers.
pub fn check_bounds(x: &BoundInputs) -> Result<BoundCertificate> {
    let c = evaluate_bounds(x)?;
    if !c.holds() {
        return Err(Error::BoundViolation(format!(
            "tau = {}: indicator {:e}, lower {:e}, upper {:e}, slack {:e}",
            c.tau, c.indicator, c.lower, c.upper, c.slack
        )));
    }
    Ok(c)
}
