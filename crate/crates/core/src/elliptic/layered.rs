//! Closed-form comparison solution for the 1D wall medium
//! `α₀ = k0` on `]a, b[`, `α₀ = 1` elsewhere, source `χ_{]p−ε, p+ε[}`.
//!
//! Branches, with `s = √k0`:
//!
//! | region          | `v(x)`                              |
//! |-----------------|-------------------------------------|
//! | `x < p−ε`       | `A e^{τx}`                          |
//! | `]p−ε, p+ε[`    | `B e^{τx} + C e^{−τx} + 1/τ²`        |
//! | `]p+ε, a[`      | `D e^{τx} + G e^{−τx}`              |
//! | `]a, b[`        | `H e^{sτx} + K e^{−sτx}`            |
//! | `x > b`         | `L e^{−τx}`                         |
//!
//! With `r = (s−1)/(s+1)`, `E = e^{−sτ(b−a)}`:
//! `G = (e^{τ(p+ε)} − e^{τ(p−ε)})/(2τ²)`, `C = −e^{τ(p−ε)}/(2τ²)`,
//! `D e^{τa} = −r(1−E²)/(1−r²E²) · G e^{−τa}`,
//! `A = D + (e^{−τ(p−ε)} − e^{−τ(p+ε)})/(2τ²)`, `B = D − e^{−τ(p+ε)}/(2τ²)`,
//! `ℓ = L e^{−τb} = 4s E G e^{−τa} / ((s+1)²(1 − r²E²))`,
//! `H e^{sτb} = ℓ(s−1)/(2s)`, `K e^{−sτb} = ℓ(s+1)/(2s)`.
//!
//! Everything is held as [`SignedLog`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logspace::SignedLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayeredMedium1D {
    pub a: f64,
    pub b: f64,
    pub k0: f64,
    pub p: f64,
    pub eps: f64,
    pub c: f64,
    pub d: f64,
}

impl LayeredMedium1D {
    pub fn new(a: f64, b: f64, k0: f64, p: f64, eps: f64, c: f64, d: f64) -> Result<Self> {
        if !(p + eps < a && a < b && b < c && c < d && eps > 0.0 && k0 > 0.0) {
            return Err(Error::invalid(
                "p + eps < a < b < c < d, eps > 0, k0 > 0",
                format!("a={a} b={b} k0={k0} p={p} eps={eps} c={c} d={d}"),
            ));
        }
        Ok(LayeredMedium1D {
            a,
            b,
            k0,
            p,
            eps,
            c,
            d,
        })
    }

    /// Travel time `a − (p+ε) + √k0 (b−a) + (c−b)`.
    pub fn travel_time(&self) -> f64 {
        self.a - (self.p + self.eps) + self.k0.sqrt() * (self.b - self.a) + (self.c - self.b)
    }

    /// `α₀(x)`.
    pub fn alpha0(&self, x: f64) -> f64 {
        if x > self.a && x < self.b {
            self.k0
        } else {
            1.0
        }
    }
}

/// Branch coefficients at one τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayeredCoefficients {
    pub tau: f64,
    pub a: SignedLog,
    pub b: SignedLog,
    pub c: SignedLog,
    pub d: SignedLog,
    pub g: SignedLog,
    pub h: SignedLog,
    pub k: SignedLog,
    pub l: SignedLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticV1D {
    pub medium: LayeredMedium1D,
    pub coefficients: LayeredCoefficients,
}

/// `ln(1 − e^{−x})` for `x > 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    (-(-x).exp_m1()).ln()
}

pub fn analytic_v_1d(m: &LayeredMedium1D, tau: f64) -> Result<AnalyticV1D> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau > 0", tau.to_string()));
    }
    let s = m.k0.sqrt();
    let kappa = s * tau;
    let ln_2t2 = (2.0 * tau * tau).ln();
    let r = (s - 1.0) / (s + 1.0);
    let ln_e = -kappa * (m.b - m.a);
    // 1 − r²E² > 0 since |r| < 1
    let ln_den = (-(r * r) * (2.0 * ln_e).exp()).ln_1p();

    let g = SignedLog::exp(tau * (m.p + m.eps) + ln_one_minus_exp(2.0 * tau * m.eps) - ln_2t2);
    let ln_q = g.ln_abs() - tau * m.a;
    let d = if r == 0.0 {
        SignedLog::ZERO
    } else {
        SignedLog::new(
            -(r.signum() as i8),
            r.abs().ln() + ln_one_minus_exp(-2.0 * ln_e) - ln_den + ln_q - tau * m.a,
        )
    };
    let c = SignedLog::new(-1, tau * (m.p - m.eps) - ln_2t2);
    let left = SignedLog::exp(-tau * (m.p - m.eps) + ln_one_minus_exp(2.0 * tau * m.eps) - ln_2t2);
    let a = d.add(left);
    let b = d.add(SignedLog::new(-1, -tau * (m.p + m.eps) - ln_2t2));
    let ln_ell = (4.0 * s).ln() - 2.0 * (s + 1.0).ln() - ln_den + ln_q + ln_e;
    let h = if s == 1.0 {
        SignedLog::ZERO
    } else {
        SignedLog::new(
            (s - 1.0).signum() as i8,
            ln_ell + ((s - 1.0).abs() / (2.0 * s)).ln() - kappa * m.b,
        )
    };
    let k = SignedLog::exp(ln_ell + ((s + 1.0) / (2.0 * s)).ln() + kappa * m.b);
    let l = SignedLog::exp(ln_ell + tau * m.b);
    Ok(AnalyticV1D {
        medium: *m,
        coefficients: LayeredCoefficients {
            tau,
            a,
            b,
            c,
            d,
            g,
            h,
            k,
            l,
        },
    })
}

impl AnalyticV1D {
    fn terms(&self, x: f64, derivative: bool) -> Vec<SignedLog> {
        let m = &self.medium;
        let co = &self.coefficients;
        let tau = co.tau;
        let kappa = m.k0.sqrt() * tau;
        // c · e^{λx}, or its derivative
        let exp_term = |c: SignedLog, lambda: f64| {
            let t = c.scale_exp(lambda * x);
            if derivative {
                t * SignedLog::from_f64(lambda)
            } else {
                t
            }
        };
        if x < m.p - m.eps {
            vec![exp_term(co.a, tau)]
        } else if x < m.p + m.eps {
            let mut t = vec![exp_term(co.b, tau), exp_term(co.c, -tau)];
            if !derivative {
                t.push(SignedLog::exp(-2.0 * tau.ln()));
            }
            t
        } else if x < m.a {
            vec![exp_term(co.d, tau), exp_term(co.g, -tau)]
        } else if x < m.b {
            vec![exp_term(co.h, kappa), exp_term(co.k, -kappa)]
        } else {
            vec![exp_term(co.l, -tau)]
        }
    }

    /// `v(x)`; the branch is chosen by strict inequalities from the left.
    pub fn value(&self, x: f64) -> SignedLog {
        SignedLog::sum(self.terms(x, false))
    }

    pub fn derivative(&self, x: f64) -> SignedLog {
        SignedLog::sum(self.terms(x, true))
    }

    /// `v(x)` as `f64`; errors instead of flushing to zero.
    pub fn value_f64(&self, x: f64) -> Result<f64> {
        let v = self.value(x);
        v.try_to_f64().ok_or_else(|| {
            Error::Underflow(format!("v({x}) = {v} at tau = {}", self.coefficients.tau))
        })
    }

    /// `ln ∫_c^d v² dx` for `b ≤ c < d`.
    pub fn ln_integral_v2(&self, c: f64, d: f64) -> Result<f64> {
        if c < self.medium.b || d <= c {
            return Err(Error::invalid("b <= c < d", format!("c = {c}, d = {d}")));
        }
        let tau = self.coefficients.tau;
        Ok(
            2.0 * (self.coefficients.l.ln_abs() - tau * c) + ln_one_minus_exp(2.0 * tau * (d - c))
                - (2.0 * tau).ln(),
        )
    }

    /// `ln(2τ e^{2τφ} ∫_D v²)` over the obstacle interval.
    pub fn ln_normalized_obstacle_energy(&self) -> Result<f64> {
        let tau = self.coefficients.tau;
        let m = &self.medium;
        Ok((2.0 * tau).ln() + 2.0 * tau * m.travel_time() + self.ln_integral_v2(m.c, m.d)?)
    }

    /// Limit of `4τ⁴ · 2τ e^{2τφ} ∫_D v²` as `τ → ∞`: `(4s/(s+1)²)²`.
    pub fn transmission_limit(k0: f64) -> f64 {
        let s = k0.sqrt();
        (4.0 * s / ((s + 1.0) * (s + 1.0))).powi(2)
    }

    /// Coefficient table row: `tau` then `(sign, ln|·|)` for A..L.
    pub fn coefficient_row(&self) -> Vec<String> {
        let co = &self.coefficients;
        let mut row = vec![format!("{}", co.tau)];
        for c in [co.a, co.b, co.c, co.d, co.g, co.h, co.k, co.l] {
            row.push(c.sign().to_string());
            row.push(format!("{:e}", c.ln_abs()));
        }
        row
    }

    pub const COEFFICIENT_HEADER: [&'static str; 17] = [
        "tau", "sign_A", "ln_A", "sign_B", "ln_B", "sign_C", "ln_C", "sign_D", "ln_D", "sign_G",
        "ln_G", "sign_H", "ln_H", "sign_K", "ln_K", "sign_L", "ln_L",
    ];
}
