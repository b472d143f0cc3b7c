//! The two integral identities linking `w`, `v` and `R = w − v`.
//!
//! With `ã = α + q/τ`, `ã₀ = α₀ + q₀/τ`, `s = αf`, `s₀ = α₀f` and `𝓕` the
//! final-time data (`Δw − τ²ãw + s = e^{−τT}𝓕`, `Δv − τ²ã₀v + s₀ = 0`):
//!
//! lower: `∫(s₀ − s)v + sR = τ²∫(ã₀ − ã)v² + ∫|∇R|² + τ²ãR²
//!         + e^{−τT}(∫𝓕R − ∫𝓕v)`
//!
//! upper: `∫(s − s₀)w − s₀R = τ²∫(ã₀/ã)(ã − ã₀)v²
//!         + ∫|∇R|² + τ²ã|R + (1 − ã₀/ã)v|² + e^{−τT}(∫𝓕R + ∫𝓕v)`
//!
//! Both sides are evaluated with the grid quadrature and the discrete
//! gradient form. Under [`Shift::Discrete`] the time-step-consistent
//! `σ², ρ` replace `τ², τ` and the sources carry `1 − q²dt²/(4α²)`; the
//! rectangle transform then satisfies both identities to rounding.
//!
//! The gap is reported relative to `∫|s₀w| + ∫|sv|`, the size of the two
//! pairings whose difference the identities rearrange.

use serde::Serialize;

use crate::elliptic::Shift;
use crate::error::{Error, Result};
use crate::grid::ScalarField;

pub struct IdentityInputs<'a> {
    pub tau: f64,
    pub t_final: f64,
    pub shift: Shift,
    pub w: &'a ScalarField,
    pub v: &'a ScalarField,
    pub alpha: &'a ScalarField,
    pub alpha0: &'a ScalarField,
    pub q: &'a ScalarField,
    pub q0: &'a ScalarField,
    pub f: &'a ScalarField,
    /// `α(u′ + τu) + qu` at `T`, or its discrete counterpart.
    pub final_data: &'a ScalarField,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub name: &'static str,
    pub tau: f64,
    pub lhs: f64,
    /// Contrast, energy and final-time terms of the right side.
    pub contrast: f64,
    pub energy: f64,
    pub final_time: f64,
    pub rhs: f64,
    pub gap: f64,
    pub scale: f64,
    pub relative_gap: f64,
}

struct Prepared {
    n: usize,
    t2: f64,
    vol: f64,
    a: Vec<f64>,
    a0: Vec<f64>,
    s: Vec<f64>,
    s0: Vec<f64>,
    r: Vec<f64>,
    grad_r: f64,
    decay: f64,
    fr: f64,
    fv: f64,
    scale: f64,
}

fn prepare(x: &IdentityInputs) -> Result<Prepared> {
    let grid = x.w.grid();
    let n = grid.len();
    for field in [x.v, x.alpha, x.alpha0, x.q, x.q0, x.f, x.final_data] {
        if field.values().len() != n {
            return Err(Error::MissingData(format!(
                "identity check needs full fields: got {} of {n} cells",
                field.values().len()
            )));
        }
    }
    let tau = x.tau;
    let (t2, rho) = x.shift.factors(tau);
    let dt = match x.shift {
        Shift::Continuum => 0.0,
        Shift::Discrete { dt } => dt,
    };
    let (w, v, f) = (x.w.values(), x.v.values(), x.f.values());
    let tilde = |a: &ScalarField, q: &ScalarField| -> Vec<f64> {
        (0..n)
            .map(|i| a.values()[i] + q.values()[i] * rho / t2)
            .collect()
    };
    let source = |a: &ScalarField, q: &ScalarField| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let (a, q) = (a.values()[i], q.values()[i]);
                a * f[i] * (1.0 - q * q * dt * dt / (4.0 * a * a))
            })
            .collect()
    };
    let (a, a0) = (tilde(x.alpha, x.q), tilde(x.alpha0, x.q0));
    let (s, s0) = (source(x.alpha, x.q), source(x.alpha0, x.q0));
    let r: Vec<f64> = w.iter().zip(v).map(|(w, v)| w - v).collect();
    let vol = grid.cell_volume();
    let big_f = x.final_data.values();
    let scale = vol
        * (0..n)
            .map(|i| (s0[i] * w[i]).abs() + (s[i] * v[i]).abs())
            .sum::<f64>();
    Ok(Prepared {
        n,
        t2,
        vol,
        grad_r: grid.gradient_inner(&r, &r),
        decay: (-tau * x.t_final).exp(),
        fr: vol * big_f.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>(),
        fv: vol * big_f.iter().zip(v).map(|(a, b)| a * b).sum::<f64>(),
        a,
        a0,
        s,
        s0,
        r,
        scale,
    })
}

fn report(
    name: &'static str,
    tau: f64,
    lhs: f64,
    contrast: f64,
    energy: f64,
    final_time: f64,
    scale: f64,
) -> IdentityReport {
    let rhs = contrast + energy + final_time;
    let gap = (lhs - rhs).abs();
    IdentityReport {
        name,
        tau,
        lhs,
        contrast,
        energy,
        final_time,
        rhs,
        gap,
        scale,
        relative_gap: if scale > 0.0 { gap / scale } else { gap },
    }
}

/// The identity behind the lower bound `I ≥ τ²∫(ã₀ − ã)v²`.
pub fn check_lower_identity(x: &IdentityInputs) -> Result<IdentityReport> {
    let p = prepare(x)?;
    let (t2, v) = (p.t2, x.v.values());
    let mut lhs = 0.0;
    let mut contrast = 0.0;
    let mut mass = 0.0;
    for i in 0..p.n {
        lhs += (p.s0[i] - p.s[i]) * v[i] + p.s[i] * p.r[i];
        contrast += (p.a0[i] - p.a[i]) * v[i] * v[i];
        mass += p.a[i] * p.r[i] * p.r[i];
    }
    Ok(report(
        "lower",
        x.tau,
        lhs * p.vol,
        t2 * contrast * p.vol,
        p.grad_r + t2 * mass * p.vol,
        p.decay * (p.fr - p.fv),
        p.scale,
    ))
}

/// The identity behind the upper bound `I ≤ τ²∫(ã₀/ã)(ã₀ − ã)v²`.
pub fn check_upper_identity(x: &IdentityInputs) -> Result<IdentityReport> {
    let p = prepare(x)?;
    let (t2, v, w) = (p.t2, x.v.values(), x.w.values());
    let mut lhs = 0.0;
    let mut contrast = 0.0;
    let mut mass = 0.0;
    for i in 0..p.n {
        lhs += (p.s[i] - p.s0[i]) * w[i] - p.s0[i] * p.r[i];
        let ratio = p.a0[i] / p.a[i];
        contrast += ratio * (p.a[i] - p.a0[i]) * v[i] * v[i];
        let m = p.r[i] + (1.0 - ratio) * v[i];
        mass += p.a[i] * m * m;
    }
    Ok(report(
        "upper",
        x.tau,
        lhs * p.vol,
        t2 * contrast * p.vol,
        p.grad_r + t2 * mass * p.vol,
        p.decay * (p.fr + p.fv),
        p.scale,
    ))
}
