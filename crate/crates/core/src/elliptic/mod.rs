//! Comparison problems `(−Δ + k) v = s` with `k = α₀τ² + q₀τ`, `s = α₀f`.
//!
//! The refractive problem has `q₀ = 0`; the dissipative one has `α₀ = 1`,
//! so a single operator covers both. [`Shift::Discrete`] replaces `τ²`, `τ`
//! by the time-step-consistent `σ²`, `ρ` of the rectangle transform.

pub mod cg;
pub mod contraction;
pub mod kernel;
pub mod layered;

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::medium::Mode;

pub use cg::{Method, SolveOptions, SolveReport};
pub use contraction::{contraction_iteration, ContractionReport};
pub use kernel::{convolve, kernel_eval, mean_value_ball, Kernel};
pub use layered::{analytic_v_1d, AnalyticV1D, LayeredMedium1D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    /// `k = α₀τ² + q₀τ`.
    Continuum,
    /// `k = α₀σ² + q₀ρ` with `σ² = (2cosh τdt − 2)/dt²`, `ρ = sinh(τdt)/dt`,
    /// and source `α₀f(1 − q₀²dt²/(4α₀²))`.
    Discrete { dt: f64 },
}

impl Shift {
    /// `(σ², ρ)`, or `(τ², τ)` in the continuum.
    pub fn factors(&self, tau: f64) -> (f64, f64) {
        match *self {
            Shift::Continuum => (tau * tau, tau),
            Shift::Discrete { dt } => {
                let x = tau * dt;
                // 2cosh x − 2 = 4 sinh²(x/2)
                let s = (0.5 * x).sinh();
                (4.0 * s * s / (dt * dt), x.sinh() / dt)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticProblem<'a> {
    pub mode: Mode,
    pub tau: f64,
    pub alpha0: &'a ScalarField,
    pub q0: &'a ScalarField,
    pub f: &'a ScalarField,
    pub shift: Shift,
}

impl EllipticProblem<'_> {
    pub fn grid(&self) -> &Grid {
        self.f.grid()
    }

    /// Cellwise `k`.
    pub fn coefficient(&self) -> Vec<f64> {
        let (s2, r) = self.shift.factors(self.tau);
        self.alpha0
            .values()
            .iter()
            .zip(self.q0.values())
            .map(|(a, q)| a * s2 + q * r)
            .collect()
    }

    /// Cellwise source.
    pub fn source(&self) -> Vec<f64> {
        let dt = match self.shift {
            Shift::Continuum => 0.0,
            Shift::Discrete { dt } => dt,
        };
        self.alpha0
            .values()
            .iter()
            .zip(self.q0.values())
            .zip(self.f.values())
            .map(|((a, q), f)| a * f * (1.0 - q * q * dt * dt / (4.0 * a * a)))
            .collect()
    }

    /// Weight of `w − v` in the indicator: `α₀f` or `f`.
    pub fn indicator_weight(&self) -> Vec<f64> {
        match self.mode {
            Mode::Refractive => self
                .alpha0
                .values()
                .iter()
                .zip(self.f.values())
                .map(|(a, f)| a * f)
                .collect(),
            Mode::Dissipative => self.f.values().to_vec(),
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.f.values().len();
        for field in [self.alpha0, self.q0] {
            if field.values().len() != n {
                return Err(Error::Shape {
                    expected: n,
                    actual: field.values().len(),
                });
            }
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau > 0", self.tau.to_string()));
        }
        Ok(())
    }
}

/// Solves the comparison problem with homogeneous Dirichlet data on the box.
pub fn solve_v(
    problem: &EllipticProblem,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    problem.check()?;
    let k = problem.coefficient();
    if let Some((cell, value)) = k.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Indefinite {
            cell,
            value: *value,
        });
    }
    let (x, report) = cg::solve_shifted(problem.grid(), &k, &problem.source(), opts)?;
    Ok((ScalarField::from_values(problem.grid(), x)?, report))
}

/// Kernel bounds `lower ≤ v ≤ upper` on a cell set.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub cells: Vec<usize>,
    pub lower_rate: f64,
    pub upper_rate: f64,
    pub v: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `min (v − lower)/v` over the cells.
    pub lower_margin: f64,
    /// `min (upper − v)/v` over the cells.
    pub upper_margin: f64,
}

/// Evaluates the kernel bounds for `v` on `cells`: rates `M0τ` and `m0τ`
/// with source `α₀f` (refractive), `τ√(1 + sup q₀/τ)` and `τ` with source
/// `f` (dissipative). Fails when either relative margin is below `−tol`.
pub fn comparison_bounds(
    v: &ScalarField,
    problem: &EllipticProblem,
    m0: f64,
    big_m0: f64,
    cells: &[usize],
    tol: f64,
) -> Result<BoundReport> {
    problem.check()?;
    let tau = problem.tau;
    let (lower_rate, upper_rate) = match problem.mode {
        Mode::Refractive => (big_m0 * tau, m0 * tau),
        Mode::Dissipative => {
            let l0 = problem.q0.max().max(0.0);
            (tau * (1.0 + l0 / tau).sqrt(), tau)
        }
    };
    let grid = problem.grid();
    let src = problem.indicator_weight();
    let src_cells: Vec<usize> = (0..grid.len()).filter(|&i| src[i] != 0.0).collect();
    let lower = convolve(grid, lower_rate, &src, &src_cells, cells)?;
    let upper = convolve(grid, upper_rate, &src, &src_cells, cells)?;
    let vv = v.gather(cells);
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    for i in 0..cells.len() {
        let scale = vv[i].abs().max(f64::MIN_POSITIVE);
        lower_margin = lower_margin.min((vv[i] - lower[i]) / scale);
        upper_margin = upper_margin.min((upper[i] - vv[i]) / scale);
    }
    let report = BoundReport {
        cells: cells.to_vec(),
        lower_rate,
        upper_rate,
        v: vv,
        lower,
        upper,
        lower_margin,
        upper_margin,
    };
    if lower_margin < -tol || upper_margin < -tol {
        let (which, i) = if lower_margin < -tol {
            let i = (0..cells.len())
                .find(|&i| {
                    (report.v[i] - report.lower[i]) / report.v[i].abs().max(f64::MIN_POSITIVE)
                        < -tol
                })
                .unwrap_or(0);
            ("lower", i)
        } else {
            let i = (0..cells.len())
                .find(|&i| {
                    (report.upper[i] - report.v[i]) / report.v[i].abs().max(f64::MIN_POSITIVE)
                        < -tol
                })
                .unwrap_or(0);
            ("upper", i)
        };
        let x = grid.center(cells[i]);
        return Err(Error::BoundViolation(format!(
            "{which} kernel bound fails at cell {} (x = {:?}): v = {:e}, lower = {:e}, upper = {:e}",
            cells[i],
            &x[..grid.dimension()],
            report.v[i],
            report.lower[i],
            report.upper[i]
        )));
    }
    Ok(report)
}

/// CSV of a field on a cell set: `cell, x[, y, z], value`.
pub fn write_cells_csv<W: Write>(field: &ScalarField, cells: &[usize], out: W) -> Result<()> {
    let grid = field.grid();
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io {
        path: "field csv".into(),
        source: std::io::Error::other(e),
    };
    let mut header = vec!["cell"];
    header.extend(["x", "y", "z"][..grid.dimension()].iter());
    header.push("value");
    wtr.write_record(&header).map_err(err)?;
    for &c in cells {
        let x = grid.center(c);
        let mut rec = vec![c.to_string()];
        rec.extend(x[..grid.dimension()].iter().map(|v| format!("{v:e}")));
        rec.push(format!("{:e}", field.values()[c]));
        wtr.write_record(&rec).map_err(err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "field csv".into(),
        source,
    })
}

/// CSV of layered coefficients in log form, one row per τ.
pub fn write_coefficients_csv<W: Write>(rows: &[AnalyticV1D], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io {
        path: "coefficient csv".into(),
        source: std::io::Error::other(e),
    };
    wtr.write_record(AnalyticV1D::COEFFICIENT_HEADER)
        .map_err(err)?;
    for r in rows {
        wtr.write_record(r.coefficient_row()).map_err(err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "coefficient csv".into(),
        source,
    })
}
