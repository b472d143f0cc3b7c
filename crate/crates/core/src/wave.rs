//! Leapfrog time stepping for `α u_tt + q u_t − Δu = 0` with
//! `u(0) = 0`, `u_t(0) = f`, and streaming finite-time Laplace transforms.
//!
//! The damping term is centred,
//! `α(u⁺ − 2u + u⁻)/dt² + q(u⁺ − u⁻)/(2dt) = L u`,
//! and the initial velocity enters through the ghost value
//! `u⁻¹ = u¹ − 2 dt f`.

use std::io::{self, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::medium::{MediumFields, Scenario};

/// Time quadrature for `w(x, τ) = ∫₀ᵀ e^{−τt} u(x, t) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// `dt Σ_{n<N} e^{−τ t_n} uⁿ`. Satisfies the discrete elliptic identity
    /// of the scheme exactly.
    Rectangle,
    /// Composite trapezoid.
    Trapezoid,
    /// Exact integration of `e^{−τt}` against piecewise-linear `u`.
    ExponentialTrapezoid,
}

/// Which coefficients to run with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Medium {
    /// `α = α₀ + h 1_D` (or `q = q₀ + h 1_D`).
    Obstacle,
    /// Background only: `α₀`, `q₀`.
    Reference,
}

#[derive(Debug, Clone)]
pub struct WaveOptions {
    pub rule: QuadratureRule,
    /// Accumulate `w` on every cell instead of only on B.
    pub full_field: bool,
    /// Record the modified energy after every step.
    pub energy: bool,
    /// Steps at which full snapshots are kept.
    pub snapshot_steps: Vec<usize>,
    /// Time step to use instead of the CFL-derived one.
    pub dt_override: Option<f64>,
    /// Additive Gaussian noise on the recorded traces: `(sigma, seed)`.
    pub noise: Option<(f64, u64)>,
}

impl Default for WaveOptions {
    fn default() -> Self {
        WaveOptions {
            rule: QuadratureRule::Rectangle,
            full_field: false,
            energy: false,
            snapshot_steps: Vec::new(),
            dt_override: None,
            noise: None,
        }
    }
}

/// Streaming weighted sums `Σ_n c_n(τ) uⁿ` over a fixed cell set.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceAccumulator {
    taus: Vec<f64>,
    rule: QuadratureRule,
    dt: f64,
    steps: usize,
    cells: Option<Vec<usize>>,
    values: Vec<Vec<f64>>,
}

impl LaplaceAccumulator {
    /// `cells = None` accumulates over `len` cells (the whole grid).
    pub fn new(
        taus: &[f64],
        rule: QuadratureRule,
        dt: f64,
        steps: usize,
        cells: Option<Vec<usize>>,
        len: usize,
    ) -> Self {
        let n = cells.as_ref().map_or(len, Vec::len);
        LaplaceAccumulator {
            taus: taus.to_vec(),
            rule,
            dt,
            steps,
            cells,
            values: vec![vec![0.0; n]; taus.len()],
        }
    }

    /// Quadrature weight of `uⁿ` at `τ`.
    pub fn weight(&self, n: usize, tau: f64) -> f64 {
        let dt = self.dt;
        let big_n = self.steps;
        let e = |m: usize| (-tau * m as f64 * dt).exp();
        match self.rule {
            QuadratureRule::Rectangle => {
                if n < big_n {
                    dt * e(n)
                } else {
                    0.0
                }
            }
            QuadratureRule::Trapezoid => {
                let half = n == 0 || n == big_n;
                dt * e(n) * if half { 0.5 } else { 1.0 }
            }
            QuadratureRule::ExponentialTrapezoid => {
                let (a, b) = exp_trapezoid_coefficients(tau, dt);
                let mut c = 0.0;
                if n < big_n {
                    c += a * e(n);
                }
                if n > 0 {
                    c += b * e(n - 1);
                }
                c
            }
        }
    }

    /// Adds step `n`. `values` is indexed like the accumulator's cells.
    pub fn push(&mut self, n: usize, values: &[f64]) {
        for (k, &tau) in self.taus.iter().enumerate() {
            let c = self.weight(n, tau);
            if c == 0.0 {
                continue;
            }
            for (acc, u) in self.values[k].iter_mut().zip(values) {
                *acc += c * u;
            }
        }
    }

    /// Post-hoc transform of stored rows `u⁰ … u^N`.
    pub fn from_rows<'a>(
        taus: &[f64],
        rule: QuadratureRule,
        dt: f64,
        cells: Option<Vec<usize>>,
        width: usize,
        rows: impl ExactSizeIterator<Item = &'a [f64]>,
    ) -> Self {
        let steps = rows.len() - 1;
        let mut acc = LaplaceAccumulator::new(taus, rule, dt, steps, cells, width);
        for (n, row) in rows.enumerate() {
            acc.push(n, row);
        }
        acc
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }
    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn cells(&self) -> Option<&[usize]> {
        self.cells.as_deref()
    }
    /// Transform at the `k`-th τ.
    pub fn values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Full-grid transform at the `k`-th τ.
    pub fn field(&self, grid: &Grid, k: usize) -> Result<ScalarField> {
        if self.cells.is_some() {
            return Err(Error::MissingData(
                "transform was accumulated on B only".into(),
            ));
        }
        ScalarField::from_values(grid, self.values[k].clone())
    }

    /// CSV with columns `tau, cell, x[, y, z], w`.
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io {
            path: "w csv".into(),
            source: io::Error::other(e),
        };
        let axes = ["x", "y", "z"];
        let mut header = vec!["tau".to_string(), "cell".to_string()];
        header.extend(axes[..grid.dimension()].iter().map(|s| s.to_string()));
        header.push("w".into());
        wtr.write_record(&header).map_err(io)?;
        let all: Vec<usize>;
        let cells = match &self.cells {
            Some(c) => c.as_slice(),
            None => {
                all = (0..grid.len()).collect();
                &all
            }
        };
        for (k, tau) in self.taus.iter().enumerate() {
            for (j, &cell) in cells.iter().enumerate() {
                let x = grid.center(cell);
                let mut rec = vec![format!("{tau}"), cell.to_string()];
                rec.extend(x[..grid.dimension()].iter().map(|v| format!("{v:e}")));
                rec.push(format!("{:e}", self.values[k][j]));
                wtr.write_record(&rec).map_err(io)?;
            }
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "w csv".into(),
            source,
        })
    }
}

/// `(a, b)` with `∫₀^dt e^{−τs}[u₀(1 − s/dt) + u₁ s/dt] ds = a u₀ + b u₁`.
pub fn exp_trapezoid_coefficients(tau: f64, dt: f64) -> (f64, f64) {
    let x = tau * dt;
    if x < 1e-3 {
        // series in x keeps full relative precision
        let a = dt * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0);
        let b = dt * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
        return (a, b);
    }
    let c0 = -(-x).exp_m1() / tau;
    let b = (-(-x).exp_m1() - x * (-x).exp()) / (tau * x);
    (c0 - b, b)
}

/// Fields at the end of the run: `u^{N−1}`, `u^N`, `u^{N+1}`.
#[derive(Debug, Clone)]
pub struct FinalTimeData {
    pub dt: f64,
    pub t_final: f64,
    pub u_prev: ScalarField,
    pub u_t: ScalarField,
    pub u_next: ScalarField,
}

impl FinalTimeData {
    /// Central difference `(u^{N+1} − u^{N−1})/(2dt)`.
    pub fn ut(&self) -> ScalarField {
        let dt = self.dt;
        let v = self
            .u_next
            .values()
            .iter()
            .zip(self.u_prev.values())
            .map(|(a, b)| (a - b) / (2.0 * dt))
            .collect();
        ScalarField::from_values(self.u_t.grid(), v).expect("same grid")
    }

    /// `α(u′ + τu) + q u` at `T`; `αF` in the refractive mode and `F` in the
    /// dissipative one.
    pub fn weighted_f(&self, tau: f64, alpha: &ScalarField, q: &ScalarField) -> ScalarField {
        let ut = self.ut();
        let v = (0..ut.values().len())
            .map(|i| {
                let u = self.u_t.values()[i];
                alpha.values()[i] * (ut.values()[i] + tau * u) + q.values()[i] * u
            })
            .collect();
        ScalarField::from_values(self.u_t.grid(), v).expect("same grid")
    }

    /// Discrete counterpart of [`weighted_f`](Self::weighted_f) matched to
    /// the rectangle transform:
    /// `e^{τdt}[α(u^N − e^{−τdt}u^{N−1})/dt + q(u^N + e^{−τdt}u^{N−1})/2]`.
    pub fn weighted_f_discrete(
        &self,
        tau: f64,
        alpha: &ScalarField,
        q: &ScalarField,
    ) -> ScalarField {
        let dt = self.dt;
        let z = (-tau * dt).exp();
        let ez = (tau * dt).exp();
        let v = (0..self.u_t.values().len())
            .map(|i| {
                let un = self.u_t.values()[i];
                let um = self.u_prev.values()[i];
                ez * (alpha.values()[i] * (un - z * um) / dt + 0.5 * q.values()[i] * (un + z * um))
            })
            .collect();
        ScalarField::from_values(self.u_t.grid(), v).expect("same grid")
    }
}

/// Per-cell `u` on B at every step `0..=N`, row-major by step.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces {
    pub cells: Vec<usize>,
    pub dt: f64,
    pub steps: usize,
    values: Vec<f64>,
}

impl Traces {
    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.cells.len();
        &self.values[n * w..(n + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.cells.len().max(1))
    }

    /// `self − other`, cell by cell.
    pub fn difference(&self, other: &Traces) -> Result<Traces> {
        if self.cells != other.cells || self.steps != other.steps || self.dt != other.dt {
            return Err(Error::Shape {
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        Ok(Traces {
            cells: self.cells.clone(),
            dt: self.dt,
            steps: self.steps,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Transform of the traces with the given rule.
    pub fn transform(&self, taus: &[f64], rule: QuadratureRule) -> LaplaceAccumulator {
        LaplaceAccumulator::from_rows(
            taus,
            rule,
            self.dt,
            Some(self.cells.clone()),
            self.cells.len(),
            self.rows(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct WaveOutput {
    pub accumulator: LaplaceAccumulator,
    pub final_data: FinalTimeData,
    pub traces: Traces,
    /// Modified energy after each step, when requested.
    pub energy: Vec<f64>,
    pub snapshots: Vec<(usize, ScalarField)>,
}

/// CFL limit `cfl · h_min · √(min α) / √n`.
pub fn cfl_limit(grid: &Grid, alpha_min: f64, cfl: f64) -> f64 {
    cfl * grid.min_spacing() * alpha_min.sqrt() / (grid.dimension() as f64).sqrt()
}

/// Runs the scheme to `T` for the scenario's τ sweep.
pub fn simulate(
    scenario: &Scenario,
    fields: &MediumFields,
    medium: Medium,
    opts: &WaveOptions,
) -> Result<WaveOutput> {
    let (alpha, q) = match medium {
        Medium::Obstacle => (&fields.alpha, &fields.q),
        Medium::Reference => (&fields.alpha0, &fields.q0),
    };
    let noise = opts.noise.or(scenario.noise);
    let opts = WaveOptions {
        noise,
        ..opts.clone()
    };
    simulate_fields(
        &scenario.grid,
        alpha,
        q,
        &fields.f,
        &fields.source_cells,
        scenario.t_final,
        &scenario.tau_sweep,
        scenario.cfl,
        &opts,
    )
}

/// The scheme on explicit coefficient fields. `record_cells` are the cells
/// whose traces are kept (normally the cells of B).
#[allow(clippy::too_many_arguments)]
pub fn simulate_fields(
    grid: &Grid,
    alpha: &ScalarField,
    q: &ScalarField,
    f: &ScalarField,
    record_cells: &[usize],
    t_final: f64,
    taus: &[f64],
    cfl: f64,
    opts: &WaveOptions,
) -> Result<WaveOutput> {
    let n_cells = grid.len();
    for field in [alpha, q, f] {
        if field.values().len() != n_cells {
            return Err(Error::Shape {
                expected: n_cells,
                actual: field.values().len(),
            });
        }
    }
    let alpha_min = alpha.min();
    if !(alpha_min > 0.0) {
        return Err(Error::Indefinite {
            cell: alpha.values().iter().position(|a| !(*a > 0.0)).unwrap_or(0),
            value: alpha_min,
        });
    }
    let limit = cfl_limit(grid, alpha_min, 1.0);
    let (dt, steps) = match opts.dt_override {
        Some(dt) => (dt, (t_final / dt).round() as usize),
        None => {
            let steps = (t_final / cfl_limit(grid, alpha_min, cfl)).ceil() as usize;
            (t_final / steps as f64, steps)
        }
    };
    if dt > limit {
        return Err(Error::Cfl { dt, limit });
    }

    let a = alpha.values();
    let qv = q.values();
    let fv = f.values();
    // uⁿ⁺¹ = c1 uⁿ − c2 uⁿ⁻¹ + c3 L uⁿ
    let denom: Vec<f64> = a.iter().zip(qv).map(|(a, q)| a + 0.5 * q * dt).collect();
    let c1: Vec<f64> = a.iter().zip(&denom).map(|(a, d)| 2.0 * a / d).collect();
    let c2: Vec<f64> = a
        .iter()
        .zip(qv)
        .zip(&denom)
        .map(|((a, q), d)| (a - 0.5 * q * dt) / d)
        .collect();
    let c3: Vec<f64> = denom.iter().map(|d| dt * dt / d).collect();

    let mut u_prev = vec![0.0; n_cells];
    let mut u = vec![0.0; n_cells];
    // first step from the ghost relation
    let mut u_next: Vec<f64> = (0..n_cells)
        .map(|i| dt * fv[i] * (1.0 - 0.5 * qv[i] * dt / a[i]))
        .collect();
    let mut lap = vec![0.0; n_cells];

    let mut acc = LaplaceAccumulator::new(
        taus,
        opts.rule,
        dt,
        steps,
        if opts.full_field {
            None
        } else {
            Some(record_cells.to_vec())
        },
        n_cells,
    );
    let mut trace_values = Vec::with_capacity((steps + 1) * record_cells.len());
    let mut rng = opts.noise.map(|(sigma, seed)| {
        (
            Normal::new(0.0, sigma).expect("finite noise level"),
            ChaCha8Rng::seed_from_u64(seed),
        )
    });
    let mut energy = Vec::new();
    let mut snapshots = Vec::new();
    let mut row = vec![0.0; record_cells.len()];

    let mut record =
        |n: usize, u: &[f64], acc: &mut LaplaceAccumulator, trace_values: &mut Vec<f64>| {
            for (r, &c) in row.iter_mut().zip(record_cells) {
                *r = u[c];
            }
            if let Some((dist, rng)) = rng.as_mut() {
                for r in row.iter_mut() {
                    *r += dist.sample(rng);
                }
            }
            trace_values.extend_from_slice(&row);
            if acc.cells().is_some() {
                acc.push(n, &row);
            } else {
                acc.push(n, u);
            }
        };

    // n = 0: u⁰ = 0
    record(0, &u, &mut acc, &mut trace_values);
    if opts.snapshot_steps.contains(&0) {
        snapshots.push((0, ScalarField::from_values(grid, u.clone())?));
    }
    for n in 1..=steps + 1 {
        // rotate to u_prev = uⁿ⁻¹, u = uⁿ
        std::mem::swap(&mut u_prev, &mut u);
        std::mem::swap(&mut u, &mut u_next);
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { step: n });
        }
        if opts.energy && n <= steps {
            energy.push(modified_energy(grid, a, &u_prev, &u, dt));
        }
        if n <= steps {
            record(n, &u, &mut acc, &mut trace_values);
            if opts.snapshot_steps.contains(&n) {
                snapshots.push((n, ScalarField::from_values(grid, u.clone())?));
            }
        }
        if n == steps + 1 {
            break;
        }
        grid.laplacian(&u, &mut lap);
        for i in 0..n_cells {
            u_next[i] = c1[i] * u[i] - c2[i] * u_prev[i] + c3[i] * lap[i];
        }
    }
    // buffers rotated: u_prev = u^N, u = u^{N+1}, u_next = u^{N−1}
    let u_n = u_prev;
    let u_np1 = u;
    let final_data = FinalTimeData {
        dt,
        t_final: steps as f64 * dt,
        u_prev: ScalarField::from_values(grid, u_next)?,
        u_t: ScalarField::from_values(grid, u_n)?,
        u_next: ScalarField::from_values(grid, u_np1)?,
    };
    Ok(WaveOutput {
        accumulator: acc,
        final_data,
        traces: Traces {
            cells: record_cells.to_vec(),
            dt,
            steps,
            values: trace_values,
        },
        energy,
        snapshots,
    })
}

/// `Σ α((uⁿ⁺¹ − uⁿ)/dt)² h^n + ⟨∇uⁿ⁺¹, ∇uⁿ⟩`, conserved by the undamped
/// scheme.
pub fn modified_energy(grid: &Grid, alpha: &[f64], u_old: &[f64], u_new: &[f64], dt: f64) -> f64 {
    let kinetic: f64 = alpha
        .iter()
        .zip(u_old.iter().zip(u_new))
        .map(|(a, (o, n))| a * ((n - o) / dt).powi(2))
        .sum::<f64>()
        * grid.cell_volume();
    kinetic + grid.gradient_inner(u_new, u_old)
}

/// Relative L² residual of `Δw − (ατ² + qτ)w + αf = e^{−τT}[α(u′ + τu) + qu]`
/// over cells not adjacent to the box boundary.
#[allow(clippy::too_many_arguments)]
pub fn transform_residual(
    w: &ScalarField,
    alpha: &ScalarField,
    q: &ScalarField,
    f: &ScalarField,
    final_data: &FinalTimeData,
    tau: f64,
) -> Result<f64> {
    let grid = w.grid();
    let n = grid.len();
    for field in [alpha, q, f, &final_data.u_t] {
        if field.values().len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: field.values().len(),
            });
        }
    }
    let mut lap = vec![0.0; n];
    grid.laplacian(w.values(), &mut lap);
    let g = final_data.weighted_f(tau, alpha, q);
    let decay = (-tau * final_data.t_final).exp();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        if touches_boundary(grid, i) {
            continue;
        }
        let a = alpha.values()[i];
        let terms = [
            lap[i],
            -(a * tau * tau + q.values()[i] * tau) * w.values()[i],
            a * f.values()[i],
            -decay * g.values()[i],
        ];
        let r: f64 = terms.iter().sum();
        num += r * r;
        den += terms.iter().map(|t| t * t).sum::<f64>();
    }
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}

fn touches_boundary(grid: &Grid, i: usize) -> bool {
    let c = grid.coords(i);
    (0..grid.dimension()).any(|a| c[a] == 0 || c[a] + 1 == grid.extent()[a])
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"EWSNAP01";

/// Binary snapshot: magic `EWSNAP01`, `u32` dimension, origin `f64×3`,
/// spacing `f64×3`, extent `u64×3`, time `f64`, then the cell values as
/// `f64`, x fastest. All little-endian.
pub fn write_snapshot<W: Write>(mut out: W, field: &ScalarField, time: f64) -> io::Result<()> {
    let g = field.grid();
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&(g.dimension() as u32).to_le_bytes())?;
    for a in 0..3 {
        out.write_all(&g.origin().get(a).copied().unwrap_or(0.0).to_le_bytes())?;
    }
    for a in 0..3 {
        out.write_all(&g.spacing().get(a).copied().unwrap_or(1.0).to_le_bytes())?;
    }
    for a in 0..3 {
        out.write_all(&(g.extent().get(a).copied().unwrap_or(1) as u64).to_le_bytes())?;
    }
    out.write_all(&time.to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<(ScalarField, f64)> {
    let bad = |m: &str| Error::Parse {
        path: "snapshot".into(),
        message: m.into(),
    };
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|source| Error::Io {
        path: "snapshot".into(),
        source,
    })?;
    let header = 8 + 4 + 9 * 8 + 8;
    if buf.len() < header || &buf[..8] != SNAPSHOT_MAGIC {
        return Err(bad("bad magic or truncated header"));
    }
    let f = |off: usize| f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
    let u = |off: usize| u64::from_le_bytes(buf[off..off + 8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let origin: Vec<f64> = (0..dim).map(|a| f(12 + 8 * a)).collect();
    let spacing: Vec<f64> = (0..dim).map(|a| f(36 + 8 * a)).collect();
    let extent: Vec<usize> = (0..dim).map(|a| u(60 + 8 * a)).collect();
    let time = f(84);
    let grid = Grid::new(dim, &origin, &spacing, &extent)?;
    let body = &buf[header..];
    if body.len() != 8 * grid.len() {
        return Err(bad("payload length does not match extent"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((ScalarField::from_values(&grid, values)?, time))
}
