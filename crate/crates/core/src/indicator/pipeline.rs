//! End-to-end indicator series.
//!
//! Both pipelines run the scheme twice with one time step: with the
//! obstacle (`α`, `q`) and without it (`α₀`, `q₀`). The difference of the
//! traces on B is transformed directly, so `w − w₀` keeps full relative
//! precision even when it is dozens of orders below `w`.
//!
//! - Reference: `I = ∫_B s(w − w₀)`.
//! - Elliptic: `I = ∫_B s(w − v)` where `v` is the time-step-consistent
//!   comparison solution. The rectangle transform satisfies
//!   `(−L + k₀) w₀ = s₀ − e^{−τT}G₀` exactly, so `v = w₀ − R₀` with
//!   `(−L + k₀) R₀ = −e^{−τT}G₀`, and
//!   `I = ∫_B s(w − w₀) + ∫_B sR₀`. `R₀` is solved at unit scale and the
//!   factor `e^{−τT}` is applied in log form.

use serde::{Deserialize, Serialize};

use crate::elliptic::cg::solve_shifted;
use crate::elliptic::{EllipticProblem, Method, Shift, SolveOptions};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::logspace::SignedLog;
use crate::medium::{MediumFields, Scenario};
use crate::wave::{simulate_fields, LaplaceAccumulator, QuadratureRule, WaveOptions, WaveOutput};

use super::bounds::{evaluate_bounds, BoundCertificate, BoundInputs};
use super::classify::{classify, ClassifyOptions, Verdict};
use super::{IndicatorEntry, IndicatorSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Elliptic,
    Reference,
}

impl Pipeline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::Elliptic => "elliptic",
            Pipeline::Reference => "reference",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Solver for `R₀`.
    pub solve: SolveOptions,
    /// Keep full fields and evaluate the two-sided bound certificates.
    pub certificates: bool,
    /// Overrides the scenario's noise setting for the measured run.
    pub noise: Option<(f64, u64)>,
    pub classify: Option<ClassifyOptions>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            solve: SolveOptions {
                method: Method::Auto,
                rel_tol: 1e-12,
                max_iter: 20_000,
            },
            certificates: false,
            noise: None,
            classify: None,
        }
    }
}

pub struct SimulatedPair {
    pub obstacle: WaveOutput,
    pub reference: WaveOutput,
    /// Transform of the trace difference on B, per τ.
    pub difference: LaplaceAccumulator,
    /// Transform of `|u| + |u₀|` on B over the steps where the runs differ.
    pub divergence_scale: LaplaceAccumulator,
}

/// Runs both media with the scenario's time step. Noise, if any, goes on
/// the measured (obstacle) run only.
pub fn simulate_pair(
    scenario: &Scenario,
    fields: &MediumFields,
    full_field: bool,
    noise: Option<(f64, u64)>,
) -> Result<SimulatedPair> {
    let base = WaveOptions {
        rule: QuadratureRule::Rectangle,
        full_field,
        dt_override: Some(scenario.derived.dt),
        ..Default::default()
    };
    let run = |alpha: &ScalarField, q: &ScalarField, noise| {
        simulate_fields(
            &scenario.grid,
            alpha,
            q,
            &fields.f,
            &fields.source_cells,
            scenario.t_final,
            &scenario.tau_sweep,
            scenario.cfl,
            &WaveOptions {
                noise,
                ..base.clone()
            },
        )
    };
    let obstacle = run(&fields.alpha, &fields.q, noise.or(scenario.noise))?;
    let reference = run(&fields.alpha0, &fields.q0, None)?;
    let diff = obstacle.traces.difference(&reference.traces)?;
    let difference = diff.transform(&scenario.tau_sweep, QuadratureRule::Rectangle);
    let masked: Vec<f64> = obstacle
        .traces
        .rows()
        .zip(reference.traces.rows())
        .flat_map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| if x != y { x.abs() + y.abs() } else { 0.0 })
                .collect::<Vec<_>>()
        })
        .collect();
    let width = fields.source_cells.len();
    let divergence_scale = LaplaceAccumulator::from_rows(
        &scenario.tau_sweep,
        QuadratureRule::Rectangle,
        diff.dt,
        Some(fields.source_cells.clone()),
        width,
        masked.chunks_exact(width.max(1)),
    );
    Ok(SimulatedPair {
        obstacle,
        reference,
        difference,
        divergence_scale,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub pipeline: Pipeline,
    pub series: IndicatorSeries,
    pub verdict: Verdict,
    pub certificates: Vec<BoundCertificate>,
    /// Largest relative residual of the `R₀` solves.
    pub solver_residual: f64,
}

const ROUNDING: f64 = 64.0 * f64::EPSILON;

fn weighted_sum(weight: &[f64], cells: &[usize], values: &[f64], vol: f64) -> SignedLog {
    SignedLog::sum(
        cells
            .iter()
            .zip(values)
            .map(|(&c, v)| SignedLog::from_f64(weight[c] * vol) * SignedLog::from_f64(*v)),
    )
}

fn abs_sum(weight: &[f64], cells: &[usize], values: &[f64], vol: f64) -> f64 {
    cells
        .iter()
        .zip(values)
        .map(|(&c, v)| (weight[c] * v).abs() * vol)
        .sum()
}

/// Builds the series and verdict for one pipeline from a simulated pair.
pub fn run_pair(
    scenario: &Scenario,
    fields: &MediumFields,
    pair: &SimulatedPair,
    pipeline: Pipeline,
    opts: &PipelineOptions,
) -> Result<RunOutput> {
    let grid = &scenario.grid;
    let vol = grid.cell_volume();
    let cells = &fields.source_cells;
    let dt = scenario.derived.dt;
    let t = scenario.t_final;
    let mode = scenario.medium.mode;
    let mut entries = Vec::with_capacity(scenario.tau_sweep.len());
    let mut certificates = Vec::new();
    let mut solver_residual: f64 = 0.0;

    for (k, &tau) in scenario.tau_sweep.iter().enumerate() {
        let problem = EllipticProblem {
            mode,
            tau,
            alpha0: &fields.alpha0,
            q0: &fields.q0,
            f: &fields.f,
            shift: Shift::Discrete { dt },
        };
        let s = problem.indicator_weight();
        let dw = pair.difference.values(k);
        let diff_part = weighted_sum(&s, cells, dw, vol);
        let mut floor = ROUNDING * abs_sum(&s, cells, pair.divergence_scale.values(k), vol);
        let value = match pipeline {
            Pipeline::Reference => diff_part,
            Pipeline::Elliptic => {
                let k0 = problem.coefficient();
                let g0 =
                    pair.reference
                        .final_data
                        .weighted_f_discrete(tau, &fields.alpha0, &fields.q0);
                let rhs: Vec<f64> = g0.values().iter().map(|g| -g).collect();
                let (r_unit, report) = solve_shifted(grid, &k0, &rhs, &opts.solve)?;
                solver_residual = solver_residual.max(report.residual);
                let r_b: Vec<f64> = cells.iter().map(|&c| r_unit[c]).collect();
                let r_part = weighted_sum(&s, cells, &r_b, vol).scale_exp(-tau * t);
                let r_abs = abs_sum(&s, cells, &r_b, vol) * (-tau * t).exp();
                floor += r_abs * ROUNDING.max(10.0 * report.residual);

                if opts.certificates {
                    certificates.push(certificate(
                        scenario, fields, pair, &problem, k, &r_unit, diff_part, r_part,
                    )?);
                }
                diff_part.add(r_part)
            }
        };
        let ln_floor = if floor > 0.0 {
            floor.ln()
        } else {
            f64::NEG_INFINITY
        };
        entries.push(IndicatorEntry::new(tau, value).with_noise_floor(ln_floor));
    }

    let series = IndicatorSeries::new(t, entries)?;
    let copts = opts
        .classify
        .clone()
        .unwrap_or_else(|| ClassifyOptions::from_scenario(scenario));
    let mut verdict = classify(&series, &copts)?;
    if let Some(threshold) = scenario.derived.time_threshold {
        if !verdict.class.is_obstacle() && t > threshold {
            verdict.warnings.push(format!(
                "T = {t} exceeds the time threshold {threshold} but no obstacle was reported"
            ));
        }
    } else if verdict.class.is_obstacle() {
        verdict
            .warnings
            .push("obstacle reported for a scenario without an obstacle".into());
    }
    if certificates.iter().any(|c| !c.holds()) {
        verdict.warnings.push("a bound certificate failed".into());
    }
    Ok(RunOutput {
        pipeline,
        series,
        verdict,
        certificates,
        solver_residual,
    })
}

/// Certificate at sample `k`, in the exact discrete form of the identities.
#[allow(clippy::too_many_arguments)]
fn certificate(
    scenario: &Scenario,
    fields: &MediumFields,
    pair: &SimulatedPair,
    problem: &EllipticProblem,
    k: usize,
    r_unit: &[f64],
    diff_part: SignedLog,
    r_part: SignedLog,
) -> Result<BoundCertificate> {
    let grid = &scenario.grid;
    let (w, w0) = (&pair.obstacle.accumulator, &pair.reference.accumulator);
    if w.cells().is_some() || w0.cells().is_some() {
        return Err(Error::MissingData(
            "bound certificates need full-field transforms".into(),
        ));
    }
    let tau = problem.tau;
    let decay = (-tau * scenario.t_final).exp();
    let v: Vec<f64> = w0
        .values(k)
        .iter()
        .zip(r_unit)
        .map(|(a, r)| a - decay * r)
        .collect();
    let v = ScalarField::from_values(grid, v)?;
    let g = pair
        .obstacle
        .final_data
        .weighted_f_discrete(tau, &fields.alpha, &fields.q);
    let vol = grid.cell_volume();
    let (mut fr, mut fv) = (0.0, 0.0);
    for i in 0..grid.len() {
        fr += g.values()[i] * (w.values(k)[i] - v.values()[i]) * vol;
        fv += g.values()[i] * v.values()[i] * vol;
    }
    // the identities weigh the indicator by the discrete source factor
    let dt = scenario.derived.dt;
    let c_f = |c: usize| {
        let (a, q) = (fields.alpha0.values()[c], fields.q0.values()[c]);
        1.0 - q * q * dt * dt / (4.0 * a * a)
    };
    let cells = &fields.source_cells;
    let uniform = cells.iter().all(|&c| c_f(c) == c_f(cells[0]));
    if !uniform {
        return Err(Error::MissingData(
            "bound certificates need a uniform source factor on B".into(),
        ));
    }
    let indicator = diff_part.add(r_part) * SignedLog::from_f64(c_f(cells[0]));
    evaluate_bounds(&BoundInputs {
        tau,
        t_final: scenario.t_final,
        shift: problem.shift,
        indicator,
        v: &v,
        alpha: &fields.alpha,
        alpha0: &fields.alpha0,
        q: &fields.q,
        q0: &fields.q0,
        obstacle_cells: &fields.obstacle_cells,
        final_pairings: (fr, fv),
        rel_margin: 1e-8,
    })
}

fn run(scenario: &Scenario, pipeline: Pipeline, opts: &PipelineOptions) -> Result<RunOutput> {
    let fields = scenario.sample_fields();
    let full = opts.certificates && pipeline == Pipeline::Elliptic;
    let pair = simulate_pair(scenario, &fields, full, opts.noise)?;
    run_pair(scenario, &fields, &pair, pipeline, opts)
}

/// Split elliptic pipeline.
pub fn run_elliptic(scenario: &Scenario, opts: &PipelineOptions) -> Result<RunOutput> {
    run(scenario, Pipeline::Elliptic, opts)
}

/// Reference pipeline: no elliptic solve at all.
pub fn run_with_reference(scenario: &Scenario, opts: &PipelineOptions) -> Result<RunOutput> {
    run(scenario, Pipeline::Reference, opts)
}
