//! Property checks on a scenario, at two levels.
//!
//! Fast: transform residual, the two integral identities in discrete form,
//! energy conservation, kernel bounds on the obstacle, the contraction
//! iteration and the bound certificates of the elliptic pipeline.
//! Full adds grid-refinement order studies of the continuum identities and
//! of the transform residual.

use std::io::Write;

use serde::Serialize;

use crate::elliptic::{
    comparison_bounds, contraction_iteration, solve_v, EllipticProblem, Method, Shift, SolveOptions,
};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::indicator::{
    check_lower_identity, check_upper_identity, run_elliptic, IdentityInputs, PipelineOptions,
};
use crate::medium::{MediumFields, Mode, OneOrMany, Scenario, ScenarioConfig};
use crate::report::{TOOL, VERSION};
use crate::wave::{simulate_fields, transform_residual, QuadratureRule, WaveOptions, WaveOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub level: Level,
    /// Negative control: perturb `w` before the residual and identity checks.
    pub corrupt_w: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    /// Limit the measured value is compared against.
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, threshold: f64, detail: String) -> Check {
        Check {
            name: name.into(),
            status: if measured <= threshold {
                Status::Pass
            } else {
                Status::Fail
            },
            measured,
            threshold,
            detail,
        }
    }

    fn at_least(name: &str, measured: f64, threshold: f64, detail: String) -> Check {
        Check {
            name: name.into(),
            status: if measured >= threshold {
                Status::Pass
            } else {
                Status::Fail
            },
            measured,
            threshold,
            detail,
        }
    }

    fn skip(name: &str, why: &str) -> Check {
        Check {
            name: name.into(),
            status: Status::Skip,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: why.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario_hash: String,
    pub level: Level,
    pub tau: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    /// `Err(CheckFailed)` naming the first failing check.
    pub fn into_result(self) -> Result<ValidationReport> {
        let failure = self.failures().next().map(|c| Error::CheckFailed {
            check: c.name.clone(),
            detail: format!(
                "measured {:e}, limit {:e}; {}",
                c.measured, c.threshold, c.detail
            ),
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// One line per check.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            writeln!(
                out,
                "{tag} {:<28} measured {:<12.4e} limit {:<12.4e} {}",
                c.name, c.measured, c.threshold, c.detail
            )?;
        }
        Ok(())
    }
}

const DISCRETE_IDENTITY_TOL: f64 = 1e-9;
const ENERGY_TOL: f64 = 1e-10;
const CONTINUUM_IDENTITY_TOL: f64 = 1e-2;
const ORDER_RANGE: (f64, f64) = (1.5, 2.2);

fn solve_opts() -> SolveOptions {
    SolveOptions {
        method: Method::Auto,
        rel_tol: 1e-12,
        max_iter: 50_000,
    }
}

fn full_run(
    s: &Scenario,
    fields: &MediumFields,
    tau: f64,
    rule: QuadratureRule,
    energy: bool,
) -> Result<WaveOutput> {
    let opts = WaveOptions {
        rule,
        full_field: true,
        energy,
        dt_override: Some(s.derived.dt),
        ..Default::default()
    };
    simulate_fields(
        &s.grid,
        &fields.alpha,
        &fields.q,
        &fields.f,
        &fields.source_cells,
        s.t_final,
        &[tau],
        s.cfl,
        &opts,
    )
}

fn corrupt(w: &mut ScalarField, fields: &MediumFields) {
    let peak = w.max().abs().max(w.min().abs());
    let c = fields.source_cells[fields.source_cells.len() / 2];
    w.values_mut()[c] += 1e-2 * peak;
}

fn identity_gaps(
    s: &Scenario,
    fields: &MediumFields,
    tau: f64,
    discrete: bool,
    corrupt_w: bool,
) -> Result<(f64, f64)> {
    let rule = if discrete {
        QuadratureRule::Rectangle
    } else {
        QuadratureRule::Trapezoid
    };
    let out = full_run(s, fields, tau, rule, false)?;
    let shift = if discrete {
        Shift::Discrete { dt: s.derived.dt }
    } else {
        Shift::Continuum
    };
    let problem = EllipticProblem {
        mode: s.medium.mode,
        tau,
        alpha0: &fields.alpha0,
        q0: &fields.q0,
        f: &fields.f,
        shift,
    };
    let (v, _) = solve_v(&problem, &solve_opts())?;
    let mut w = out.accumulator.field(&s.grid, 0)?;
    if corrupt_w {
        corrupt(&mut w, fields);
    }
    let final_data = if discrete {
        out.final_data
            .weighted_f_discrete(tau, &fields.alpha, &fields.q)
    } else {
        out.final_data.weighted_f(tau, &fields.alpha, &fields.q)
    };
    let x = IdentityInputs {
        tau,
        t_final: s.t_final,
        shift,
        w: &w,
        v: &v,
        alpha: &fields.alpha,
        alpha0: &fields.alpha0,
        q: &fields.q,
        q0: &fields.q0,
        f: &fields.f,
        final_data: &final_data,
    };
    Ok((
        check_lower_identity(&x)?.relative_gap,
        check_upper_identity(&x)?.relative_gap,
    ))
}

fn residual(
    s: &Scenario,
    fields: &MediumFields,
    tau: f64,
    corrupt_w: bool,
) -> Result<(f64, Option<f64>)> {
    let energy = fields.q.max() == 0.0 && fields.q.min() == 0.0;
    let out = full_run(s, fields, tau, QuadratureRule::Trapezoid, energy)?;
    let mut w = out.accumulator.field(&s.grid, 0)?;
    if corrupt_w {
        corrupt(&mut w, fields);
    }
    let r = transform_residual(
        &w,
        &fields.alpha,
        &fields.q,
        &fields.f,
        &out.final_data,
        tau,
    )?;
    let drift = energy.then(|| {
        let e0 = out.energy[0];
        out.energy
            .iter()
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max)
            / e0
    });
    Ok((r, drift))
}

/// Allowance for the residual of the trapezoid transform against the
/// continuum equation, led by `σ²/τ² − 1 ≈ (τ dt)²/12`.
fn residual_tolerance(s: &Scenario, tau: f64) -> f64 {
    let x = tau * s.derived.dt * s.derived.alpha_max.sqrt();
    (x * x / 12.0).max(1e-8)
}

/// Allowance for the kernel bounds: the discrete decay rate of `λ` differs
/// from `λ` by about `λ³h²/24` per unit length.
fn kernel_tolerance(s: &Scenario, lambda: f64) -> f64 {
    let h = s.grid.min_spacing();
    let reach: f64 = s
        .grid
        .bounds()
        .iter()
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    (lambda.powi(3) * h * h * reach / 12.0).max(1e-6)
}

fn refine(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.grid.spacing = match &cfg.grid.spacing {
        OneOrMany::One(h) => OneOrMany::One(h / 2.0),
        OneOrMany::Many(v) => OneOrMany::Many(v.iter().map(|h| h / 2.0).collect()),
    };
    c.grid.extent = cfg.grid.extent.as_ref().map(|e| match e {
        OneOrMany::One(n) => OneOrMany::One(2 * n),
        OneOrMany::Many(v) => OneOrMany::Many(v.iter().map(|n| 2 * n).collect()),
    });
    c
}

fn order_check(name: &str, coarse: f64, fine: f64) -> Check {
    let order = (coarse / fine).log2();
    let ok = order >= ORDER_RANGE.0 && order <= ORDER_RANGE.1;
    Check {
        name: name.into(),
        status: if ok { Status::Pass } else { Status::Fail },
        measured: order,
        threshold: ORDER_RANGE.0,
        detail: format!(
            "{coarse:.3e} -> {fine:.3e}, expected order in [{}, {}]",
            ORDER_RANGE.0, ORDER_RANGE.1
        ),
    }
}

pub fn validate(cfg: &ScenarioConfig, opts: &ValidateOptions) -> Result<ValidationReport> {
    let s = Scenario::from_config(cfg)?;
    let fields = s.sample_fields();
    let tau = s.tau_sweep[s.tau_sweep.len() / 2];
    let mut checks = Vec::new();

    let (res, drift) = residual(&s, &fields, tau, opts.corrupt_w)?;
    checks.push(Check::at_most(
        "transform_residual",
        res,
        residual_tolerance(&s, tau),
        format!("trapezoid transform at tau = {tau}"),
    ));
    let (lo, up) = identity_gaps(&s, &fields, tau, true, opts.corrupt_w)?;
    checks.push(Check::at_most(
        "lower_identity",
        lo,
        DISCRETE_IDENTITY_TOL,
        "discrete form, relative gap".into(),
    ));
    checks.push(Check::at_most(
        "upper_identity",
        up,
        DISCRETE_IDENTITY_TOL,
        "discrete form, relative gap".into(),
    ));
    checks.push(match drift {
        Some(d) => Check::at_most(
            "energy_conservation",
            d,
            ENERGY_TOL,
            "relative drift of the modified energy".into(),
        ),
        None => Check::skip("energy_conservation", "damped medium"),
    });

    let problem = EllipticProblem {
        mode: s.medium.mode,
        tau,
        alpha0: &fields.alpha0,
        q0: &fields.q0,
        f: &fields.f,
        shift: Shift::Continuum,
    };
    if fields.obstacle_cells.is_empty() {
        checks.push(Check::skip("kernel_bounds", "no obstacle"));
    } else {
        let (v, _) = solve_v(&problem, &solve_opts())?;
        let lambda = match s.medium.mode {
            Mode::Refractive => s.medium.big_m0 * tau,
            Mode::Dissipative => tau * (1.0 + fields.q0.max().max(0.0) / tau).sqrt(),
        };
        let tol = kernel_tolerance(&s, lambda);
        let r = comparison_bounds(
            &v,
            &problem,
            s.medium.m0,
            s.medium.big_m0,
            &fields.obstacle_cells,
            f64::INFINITY,
        )?;
        checks.push(Check::at_least(
            "kernel_bounds",
            r.lower_margin.min(r.upper_margin),
            -tol,
            format!(
                "margins lower {:.3e}, upper {:.3e}",
                r.lower_margin, r.upper_margin
            ),
        ));
    }

    if s.medium.mode == Mode::Refractive {
        checks.push(
            match contraction_iteration(
                &fields.f,
                &fields.alpha0,
                s.medium.m0,
                s.medium.big_m0,
                tau,
                400,
                Shift::Continuum,
                0.02,
                &solve_opts(),
            ) {
                Ok(r) => {
                    let (direct, _) = solve_v(&problem, &solve_opts())?;
                    let limit = r.limit.as_ref().expect("limit is kept");
                    let peak = direct.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    let gap = limit
                        .values()
                        .iter()
                        .zip(direct.values())
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                        / peak;
                    let mut c = Check::at_most(
                        "contraction",
                        gap,
                        1e-6,
                        format!(
                            "max ratio {:.4} (bound {:.4}), {} steps",
                            r.max_ratio,
                            r.bound,
                            r.increments.len()
                        ),
                    );
                    if !r.monotone || r.min_value < 0.0 {
                        c.status = Status::Fail;
                        c.detail.push_str("; iterates not monotone and nonnegative");
                    }
                    c
                }
                Err(Error::ContractionRatio { ratio, bound }) => Check {
                    name: "contraction".into(),
                    status: Status::Fail,
                    measured: ratio,
                    threshold: bound,
                    detail: "increment ratio above bound".into(),
                },
                Err(e) => return Err(e),
            },
        );
    } else {
        checks.push(Check::skip("contraction", "dissipative mode"));
    }

    let out = run_elliptic(
        &s,
        &PipelineOptions {
            certificates: true,
            ..Default::default()
        },
    )?;
    let failed = out.certificates.iter().filter(|c| !c.holds()).count();
    checks.push(Check {
        name: "bound_certificates".into(),
        status: if failed == 0 {
            Status::Pass
        } else {
            Status::Fail
        },
        measured: failed as f64,
        threshold: 0.0,
        detail: format!(
            "{} of {} tau values violate a bound",
            failed,
            out.certificates.len()
        ),
    });

    if opts.level == Level::Full {
        let fine_cfg = refine(cfg);
        let fine = Scenario::from_config(&fine_cfg)?;
        let fine_fields = fine.sample_fields();
        let (lo_c, up_c) = identity_gaps(&s, &fields, tau, false, opts.corrupt_w)?;
        let (lo_f, up_f) = identity_gaps(&fine, &fine_fields, tau, false, opts.corrupt_w)?;
        checks.push(Check::at_most(
            "lower_identity_continuum",
            lo_c,
            CONTINUUM_IDENTITY_TOL,
            "relative gap".into(),
        ));
        checks.push(Check::at_most(
            "upper_identity_continuum",
            up_c,
            CONTINUUM_IDENTITY_TOL,
            "relative gap".into(),
        ));
        checks.push(order_check("lower_identity_order", lo_c, lo_f));
        checks.push(order_check("upper_identity_order", up_c, up_f));
        let (res_f, _) = residual(&fine, &fine_fields, tau, opts.corrupt_w)?;
        checks.push(order_check("transform_residual_order", res, res_f));
    }

    Ok(ValidationReport {
        tool: TOOL,
        version: VERSION,
        scenario_hash: s.hash.clone(),
        level: opts.level,
        tau,
        checks,
    })
}
