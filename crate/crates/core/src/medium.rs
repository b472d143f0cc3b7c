//! Media, obstacles, sources and scenario ingestion.
//!
//! A scenario file is TOML with four tables: `[grid]`, `[medium]`,
//! `[source]` and `[run]` (see `docs/scenario.md`). [`ScenarioConfig`] is the
//! raw, serialisable form; [`Scenario`] is the validated form with derived
//! quantities attached. Sampling onto the grid produces [`MediumFields`].

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::region::RegionSpec;

/// Relative tolerance used when checking sampled coefficients against
/// declared bounds.
const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `α ∂²u − Δu = 0`, contrast in `α`.
    Refractive,
    /// `∂²u − Δu + q ∂u = 0`, contrast in `q`.
    Dissipative,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Refractive => "refractive",
            Mode::Dissipative => "dissipative",
        }
    }
}

/// Sign assumption on the contrast `h` over the obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContrastSign {
    /// `h ≥ C > 0` on D.
    #[serde(rename = "A.I", alias = "AI")]
    Positive,
    /// `−h ≥ C > 0` on D.
    #[serde(rename = "A.II", alias = "AII")]
    Negative,
}

/// Cellwise values: a constant, or i.i.d. uniform draws from a seeded
/// stream (a rough, merely bounded coefficient).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSampler {
    Constant(f64),
    Uniform { lo: f64, hi: f64, seed: u64 },
}

impl FieldSampler {
    pub fn range(&self) -> (f64, f64) {
        match self {
            FieldSampler::Constant(v) => (*v, *v),
            FieldSampler::Uniform { lo, hi, .. } => (*lo, *hi),
        }
    }

    fn sample(&self, n: usize) -> Vec<f64> {
        match self {
            FieldSampler::Constant(v) => vec![*v; n],
            FieldSampler::Uniform { lo, hi, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n).map(|_| rng.random_range(*lo..=*hi)).collect()
            }
        }
    }

    fn scaled(&self, factor: f64) -> FieldSampler {
        match self {
            FieldSampler::Constant(v) => FieldSampler::Constant(v * factor),
            FieldSampler::Uniform { lo, hi, seed } => {
                let (a, b) = (lo * factor, hi * factor);
                FieldSampler::Uniform {
                    lo: a.min(b),
                    hi: a.max(b),
                    seed: *seed,
                }
            }
        }
    }
}

impl Default for FieldSampler {
    fn default() -> Self {
        FieldSampler::Constant(0.0)
    }
}

/// A background region overriding the base coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub region: RegionSpec,
    pub value: FieldSampler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, n: usize) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone(); n],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dimension: usize,
    pub spacing: OneOrMany<f64>,
    /// Cells per axis; sized from the truncation radius when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<OneOrMany<usize>>,
    /// Lower corner; the box is centred on the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumConfig {
    pub mode: Mode,
    #[serde(default = "one")]
    pub alpha0: FieldSampler,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<Layer>,
    pub m0: f64,
    #[serde(rename = "M0")]
    pub big_m0: f64,
    #[serde(default)]
    pub q0: FieldSampler,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q0_layers: Vec<Layer>,
    #[serde(default = "empty_region")]
    pub obstacle: RegionSpec,
    #[serde(default)]
    pub h: FieldSampler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_sign: Option<ContrastSign>,
}

fn one() -> FieldSampler {
    FieldSampler::Constant(1.0)
}
fn empty_region() -> RegionSpec {
    RegionSpec::Empty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// `amplitude · χ_B`.
    Indicator { amplitude: f64 },
    /// Linear radial taper from `center` at `p` to `edge` at `|x − p| = η`.
    Taper { center: f64, edge: f64 },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Indicator { amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub p: Vec<f64>,
    pub eta: f64,
    #[serde(default)]
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_count: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_window")]
    pub window_fraction: f64,
    #[serde(default = "default_delta")]
    pub delta_min: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Standard deviation of additive Gaussian noise on the traces at B
    /// (off when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub noise_seed: u64,
}

fn default_cfl() -> f64 {
    0.9
}
fn default_window() -> f64 {
    1.0 / 3.0
}
fn default_delta() -> f64 {
    2.0
}
fn default_margin() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub medium: MediumConfig,
    pub source: SourceConfig,
    pub run: RunConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    /// SHA-256 of the canonical TOML serialisation.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Multiplies the obstacle contrast by `factor`, flipping the declared
    /// sign assumption when `factor < 0`.
    pub fn scale_contrast(&mut self, factor: f64) {
        self.medium.h = self.medium.h.scaled(factor);
        if factor < 0.0 {
            self.medium.h_sign = self.medium.h_sign.map(|s| match s {
                ContrastSign::Positive => ContrastSign::Negative,
                ContrastSign::Negative => ContrastSign::Positive,
            });
        }
    }
}

/// Validated material description.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumSpec {
    pub mode: Mode,
    pub alpha0: FieldSampler,
    pub layers: Vec<Layer>,
    pub m0: f64,
    pub big_m0: f64,
    pub q0: FieldSampler,
    pub q0_layers: Vec<Layer>,
    pub obstacle: RegionSpec,
    pub h: FieldSampler,
    pub h_sign: Option<ContrastSign>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub profile: Profile,
}

impl SourceSpec {
    pub fn region(&self) -> RegionSpec {
        if self.center.len() == 1 {
            RegionSpec::Interval {
                lo: self.center[0] - self.radius,
                hi: self.center[0] + self.radius,
            }
        } else {
            RegionSpec::Ball {
                center: self.center.clone(),
                radius: self.radius,
            }
        }
    }

    fn value_at(&self, x: &[f64]) -> f64 {
        match self.profile {
            Profile::Indicator { amplitude } => amplitude,
            Profile::Taper { center, edge } => {
                let r = self
                    .center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| (c - v).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let t = (r / self.radius).min(1.0);
                center + (edge - center) * t
            }
        }
    }

    fn infimum(&self) -> f64 {
        match self.profile {
            Profile::Indicator { amplitude } => amplitude,
            Profile::Taper { center, edge } => center.min(edge),
        }
    }
}

/// Quantities derived during validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    /// `dist(D, B) = d_∂D(p) − η`; `None` for an empty obstacle.
    pub dist_db: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub truncation_radius: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// `2 M0 dist(D, B)` (refractive) or `2 dist(D, B)` (dissipative).
    pub time_threshold: Option<f64>,
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub medium: MediumSpec,
    pub source: SourceSpec,
    pub t_final: f64,
    pub tau_sweep: Vec<f64>,
    pub cfl: f64,
    pub window_fraction: f64,
    pub delta_min: f64,
    pub margin: f64,
    pub noise: Option<(f64, u64)>,
    pub derived: Derived,
    pub hash: String,
}

/// Coefficients and source sampled onto the grid.
#[derive(Debug, Clone)]
pub struct MediumFields {
    pub alpha0: ScalarField,
    pub alpha: ScalarField,
    pub q0: ScalarField,
    pub q: ScalarField,
    pub f: ScalarField,
    /// Cells with `f > 0`.
    pub source_cells: Vec<usize>,
    /// Cells touched by the obstacle.
    pub obstacle_cells: Vec<usize>,
}

impl MediumFields {
    /// The obstacle-free medium: `α = α₀`, `q = q₀`.
    pub fn background(&self) -> MediumFields {
        MediumFields {
            alpha: self.alpha0.clone(),
            q: self.q0.clone(),
            obstacle_cells: Vec::new(),
            ..self.clone()
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_config(&ScenarioConfig::from_path(path)?)
}

/// Half-width `L` of a box that no signal leaves before `t`:
/// support extent + `c_max t` + margin, with `c_max = 1/√(ess-inf α)`.
pub fn truncation_radius_for(support_extent: f64, alpha_min: f64, t: f64, margin: f64) -> f64 {
    support_extent + t / alpha_min.sqrt() + margin
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Scenario> {
        let dim = cfg.grid.dimension;
        if dim != 1 && dim != 3 {
            return Err(Error::invalid(
                "grid dimension in {1, 3}",
                format!("got {dim}"),
            ));
        }
        let m = &cfg.medium;
        if !(m.m0 > 0.0 && m.m0 <= m.big_m0) {
            return Err(Error::invalid(
                "0 < m0 <= M0",
                format!("m0 = {}, M0 = {}", m.m0, m.big_m0),
            ));
        }
        if m.mode == Mode::Dissipative {
            if m.alpha0 != FieldSampler::Constant(1.0) || !m.layers.is_empty() {
                return Err(Error::invalid(
                    "dissipative mode has alpha0 = 1",
                    "remove alpha0 layers or switch to refractive mode",
                ));
            }
            if m.m0 != 1.0 || m.big_m0 != 1.0 {
                return Err(Error::invalid(
                    "dissipative mode has m0 = M0 = 1",
                    format!("{} {}", m.m0, m.big_m0),
                ));
            }
        }
        m.obstacle.validate(dim)?;
        for l in m.layers.iter().chain(&m.q0_layers) {
            l.region.validate(dim)?;
        }
        if cfg.source.p.len() != dim {
            return Err(Error::invalid(
                "source centre matches dimension",
                format!("{:?}", cfg.source.p),
            ));
        }
        if !(cfg.source.eta > 0.0) {
            return Err(Error::invalid(
                "source radius eta > 0",
                format!("{}", cfg.source.eta),
            ));
        }
        let source = SourceSpec {
            center: cfg.source.p.clone(),
            radius: cfg.source.eta,
            profile: cfg.source.profile.clone(),
        };
        if !(source.infimum() > 0.0) {
            return Err(Error::invalid(
                "ess-inf of f over B is positive",
                format!("{:?}", source.profile),
            ));
        }

        let obstacle_empty = m.obstacle.is_empty();
        let d_boundary = m.obstacle.distance_to_point(&source.center);
        if !obstacle_empty && !(d_boundary > source.radius) {
            return Err(Error::invalid(
                "closure of B disjoint from closure of D",
                format!("d(p, D) = {d_boundary} <= eta = {}", source.radius),
            ));
        }
        if !obstacle_empty {
            let (hlo, hhi) = m.h.range();
            match m.h_sign {
                Some(ContrastSign::Positive) if hlo > 0.0 => {}
                Some(ContrastSign::Negative) if hhi < 0.0 => {}
                Some(s) => {
                    return Err(Error::invalid(
                        "contrast satisfies its declared sign assumption",
                        format!("{s:?} with h in [{hlo}, {hhi}]"),
                    ))
                }
                None => {
                    return Err(Error::invalid(
                        "h_sign given for a nonempty obstacle",
                        "missing h_sign",
                    ));
                }
            }
        }

        let r = &cfg.run;
        if !(r.t_final > 0.0) {
            return Err(Error::invalid("T > 0", format!("{}", r.t_final)));
        }
        if r.tau_count < 2 || !(r.tau_min > 0.0) || !(r.tau_max > r.tau_min) {
            return Err(Error::invalid(
                "tau sweep strictly increasing and positive",
                format!("[{}, {}] x {}", r.tau_min, r.tau_max, r.tau_count),
            ));
        }
        if !(r.cfl > 0.0 && r.cfl <= 1.0) {
            return Err(Error::invalid("cfl factor in (0, 1]", format!("{}", r.cfl)));
        }
        if !(r.window_fraction > 0.0 && r.window_fraction <= 1.0) {
            return Err(Error::invalid(
                "window fraction in (0, 1]",
                format!("{}", r.window_fraction),
            ));
        }
        let tau_sweep: Vec<f64> = (0..r.tau_count)
            .map(|i| r.tau_min + (r.tau_max - r.tau_min) * i as f64 / (r.tau_count - 1) as f64)
            .collect();

        // coefficient bounds known before sampling
        let alpha_lo_decl = m.m0 * m.m0;
        let (hlo, _) = m.h.range();
        let alpha_min_bound = if m.mode == Mode::Refractive && !obstacle_empty {
            (alpha_lo_decl + hlo.min(0.0)).min(alpha_lo_decl)
        } else {
            alpha_lo_decl
        };
        let support_extent = source
            .region()
            .max_abs_coordinate()
            .max(m.obstacle.max_abs_coordinate());
        if alpha_min_bound <= 0.0 && cfg.grid.extent.is_none() {
            return Err(Error::invalid(
                "ess-inf alpha > 0",
                format!("m0^2 + min h = {alpha_min_bound}; give an explicit grid extent to defer the check to sampling"),
            ));
        }
        let truncation_radius = truncation_radius_for(
            support_extent,
            alpha_min_bound.max(1e-12),
            r.t_final,
            r.margin,
        );

        let spacing = cfg.grid.spacing.expand(dim);
        if spacing.len() != dim {
            return Err(Error::invalid(
                "grid spacing matches dimension",
                format!("{spacing:?}"),
            ));
        }
        let extent = match &cfg.grid.extent {
            Some(e) => e.expand(dim),
            None => spacing
                .iter()
                .map(|h| {
                    let n = (2.0 * truncation_radius / h).ceil() as usize;
                    n + n % 2
                })
                .collect(),
        };
        let origin = match &cfg.grid.origin {
            Some(o) => o.clone(),
            None => spacing
                .iter()
                .zip(&extent)
                .map(|(h, n)| -0.5 * h * *n as f64)
                .collect(),
        };
        let grid = Grid::new(dim, &origin, &spacing, &extent)?;

        let medium = MediumSpec {
            mode: m.mode,
            alpha0: m.alpha0.clone(),
            layers: m.layers.clone(),
            m0: m.m0,
            big_m0: m.big_m0,
            q0: m.q0.clone(),
            q0_layers: m.q0_layers.clone(),
            obstacle: m.obstacle.clone(),
            h: m.h.clone(),
            h_sign: m.h_sign,
        };

        let bounds = grid.bounds();
        for (name, region) in [
            ("source ball", source.region()),
            ("obstacle", m.obstacle.clone()),
        ] {
            if let Some(bb) = region.bounding_box(dim) {
                for (a, ((lo, hi), (glo, ghi))) in bb.iter().zip(&bounds).enumerate() {
                    if *lo < *glo || *hi > *ghi {
                        return Err(Error::invalid(
                            "grid contains supp f and D",
                            format!("{name} leaves the box on axis {a}"),
                        ));
                    }
                }
            }
        }

        let mut scenario = Scenario {
            grid,
            medium,
            source,
            t_final: r.t_final,
            tau_sweep,
            cfl: r.cfl,
            window_fraction: r.window_fraction,
            delta_min: r.delta_min,
            margin: r.margin,
            noise: r.noise_sigma.map(|s| (s, r.noise_seed)),
            derived: Derived {
                dist_db: None,
                dt: 0.0,
                steps: 0,
                truncation_radius,
                alpha_min: 0.0,
                alpha_max: 0.0,
                time_threshold: None,
            },
            hash: cfg.hash(),
        };

        let fields = scenario.sample_fields();
        let alpha0_min = fields.alpha0.min();
        let alpha0_max = fields.alpha0.max();
        let tol = BOUND_TOL * alpha0_max.abs().max(1.0);
        if alpha0_min < m.m0 * m.m0 - tol || alpha0_max > m.big_m0 * m.big_m0 + tol {
            return Err(Error::invalid(
                "m0^2 <= alpha0 <= M0^2",
                format!(
                    "sampled alpha0 in [{alpha0_min}, {alpha0_max}], bounds [{}, {}]",
                    m.m0 * m.m0,
                    m.big_m0 * m.big_m0
                ),
            ));
        }
        // both runs share one time step
        let alpha_min = fields.alpha.min().min(alpha0_min);
        let alpha_max = fields.alpha.max().max(alpha0_max);
        if !(alpha_min > 0.0) {
            return Err(Error::invalid(
                "ess-inf alpha > 0",
                format!("sampled min {alpha_min}"),
            ));
        }
        if fields.q.min() < 0.0 || fields.q0.min() < 0.0 {
            return Err(Error::invalid(
                "q >= 0",
                format!("sampled min {}", fields.q.min().min(fields.q0.min())),
            ));
        }
        if fields.source_cells.is_empty() {
            return Err(Error::invalid(
                "B covers at least one cell",
                "source ball below grid resolution",
            ));
        }

        let c_max = 1.0 / alpha_min.sqrt();
        // a boundary echo needs 2 · gap / c_max to get back to B
        let gap = scenario
            .source
            .center
            .iter()
            .zip(&bounds)
            .map(|(p, (lo, hi))| (p - lo).min(hi - p) - scenario.source.radius)
            .fold(f64::INFINITY, f64::min);
        if 2.0 * gap / c_max <= r.t_final {
            return Err(Error::invalid(
                "no boundary echo reaches B within [0, T]",
                format!("echo arrives at {} <= T = {}", 2.0 * gap / c_max, r.t_final),
            ));
        }

        let dt_limit = r.cfl * grid.min_spacing() * alpha_min.sqrt() / (dim as f64).sqrt();
        let steps = (r.t_final / dt_limit).ceil() as usize;
        let dist_db = (!obstacle_empty).then_some(d_boundary - scenario.source.radius);
        let speed_factor = match m.mode {
            Mode::Refractive => m.big_m0,
            Mode::Dissipative => 1.0,
        };
        scenario.derived = Derived {
            dist_db,
            dt: r.t_final / steps as f64,
            steps,
            truncation_radius: truncation_radius_for(
                support_extent,
                alpha_min,
                r.t_final,
                r.margin,
            ),
            alpha_min,
            alpha_max,
            time_threshold: dist_db.map(|d| 2.0 * speed_factor * d),
        };
        Ok(scenario)
    }

    pub fn mode(&self) -> Mode {
        self.medium.mode
    }

    pub fn truncation_radius(&self) -> f64 {
        self.derived.truncation_radius
    }

    /// Cell-averaged sampling of `α₀`, `α`, `q₀`, `q` and `f`.
    pub fn sample_fields(&self) -> MediumFields {
        let grid = &self.grid;
        let n = grid.len();
        let m = &self.medium;
        let boxes: Vec<Vec<(f64, f64)>> = (0..n).map(|i| grid.cell_box(i)).collect();

        let layered = |base: &FieldSampler, layers: &[Layer]| -> Vec<f64> {
            let mut v = base.sample(n);
            for layer in layers {
                let vals = layer.value.sample(n);
                for (i, cell) in boxes.iter().enumerate() {
                    let frac = layer.region.coverage(cell);
                    if frac > 0.0 {
                        v[i] = v[i] * (1.0 - frac) + vals[i] * frac;
                    }
                }
            }
            v
        };
        let alpha0 = layered(&m.alpha0, &m.layers);
        let q0 = layered(&m.q0, &m.q0_layers);

        let hvals = m.h.sample(n);
        let mut alpha = alpha0.clone();
        let mut q = q0.clone();
        let mut obstacle_cells = Vec::new();
        if !m.obstacle.is_empty() {
            for (i, cell) in boxes.iter().enumerate() {
                let frac = m.obstacle.coverage(cell);
                if frac > 0.0 {
                    obstacle_cells.push(i);
                    match m.mode {
                        Mode::Refractive => alpha[i] += hvals[i] * frac,
                        Mode::Dissipative => q[i] += hvals[i] * frac,
                    }
                }
            }
        }

        let ball = self.source.region();
        let mut f = vec![0.0; n];
        let mut source_cells = Vec::new();
        for (i, cell) in boxes.iter().enumerate() {
            let frac = ball.coverage(cell);
            if frac > 0.0 {
                f[i] = frac * self.source.value_at(&grid.center(i)[..grid.dimension()]);
                source_cells.push(i);
            }
        }

        let wrap = |v: Vec<f64>| ScalarField::from_values(grid, v).expect("length matches grid");
        MediumFields {
            alpha0: wrap(alpha0),
            alpha: wrap(alpha),
            q0: wrap(q0),
            q: wrap(q),
            f: wrap(f),
            source_cells,
            obstacle_cells,
        }
    }
}
