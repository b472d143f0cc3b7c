use std::fs;
use std::path::{Path, PathBuf};

use enclosure::indicator::{run_pair, simulate_pair, Pipeline, PipelineOptions, RunOutput};
use enclosure::report::{provenance_comments, write_summary, VerdictReport, TOOL, VERSION};
use enclosure::sweep::{write_batch_csv, SweepParameter, SweepRow};
use enclosure::validate::{validate as validate_scenario, Level, ValidateOptions};
use enclosure::{Error, Result, Scenario, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::{LevelArg, PipelineArg};

pub struct RunArgs {
    pub scenario: PathBuf,
    pub pipeline: PipelineArg,
    pub out: PathBuf,
    pub certificates: bool,
    pub noise: Option<(f64, u64)>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: String,
    scenario_hash: &'a str,
    pipeline: &'static str,
    output: String,
    certificates: bool,
    noise_sigma: Option<f64>,
    noise_seed: Option<u64>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn load(path: &Path) -> Result<(ScenarioConfig, Scenario)> {
    let cfg = ScenarioConfig::from_path(path)?;
    let s = Scenario::from_config(&cfg)?;
    Ok((cfg, s))
}

fn pipelines(arg: PipelineArg) -> Vec<Pipeline> {
    match arg {
        PipelineArg::Elliptic => vec![Pipeline::Elliptic],
        PipelineArg::Reference => vec![Pipeline::Reference],
        PipelineArg::Both => vec![Pipeline::Elliptic, Pipeline::Reference],
    }
}

fn pipeline_name(arg: PipelineArg) -> &'static str {
    match arg {
        PipelineArg::Elliptic => "elliptic",
        PipelineArg::Reference => "reference",
        PipelineArg::Both => "both",
    }
}

/// Runs the requested pipelines on one simulated pair.
fn compute(
    s: &Scenario,
    pipeline: PipelineArg,
    certificates: bool,
    noise: Option<(f64, u64)>,
) -> Result<Vec<RunOutput>> {
    let fields = s.sample_fields();
    let wanted = pipelines(pipeline);
    let full = certificates && wanted.contains(&Pipeline::Elliptic);
    log::info!(
        "simulating {} cells, {} steps",
        s.grid.len(),
        s.derived.steps
    );
    let pair = simulate_pair(s, &fields, full, noise)?;
    let opts = PipelineOptions {
        certificates,
        noise,
        ..Default::default()
    };
    wanted
        .into_iter()
        .map(|p| run_pair(s, &fields, &pair, p, &opts))
        .collect()
}

/// Writes series and verdict files for each output, returning the reports.
fn write_outputs(dir: &Path, s: &Scenario, outputs: &[RunOutput]) -> Result<Vec<VerdictReport>> {
    let mut reports = Vec::new();
    for out in outputs {
        let name = out.pipeline.as_str();
        let mut csv = Vec::new();
        out.series.write_csv(&provenance_comments(s), &mut csv)?;
        write_file(&dir.join(format!("series_{name}.csv")), &csv)?;
        let report = VerdictReport::new(s, out);
        write_file(
            &dir.join(format!("verdict_{name}.json")),
            report.to_json().as_bytes(),
        )?;
        log::info!("{name}: {} (rate {:?})", report.class.as_str(), report.rate);
        for w in &report.warnings {
            log::warn!("{name}: {w}");
        }
        reports.push(report);
    }
    Ok(reports)
}

pub fn run(args: &RunArgs) -> Result<()> {
    let (_, s) = load(&args.scenario)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let noise = args.noise.or(s.noise);
    let outputs = compute(&s, args.pipeline, args.certificates, args.noise)?;
    let reports = write_outputs(&args.out, &s, &outputs)?;
    let source = args.scenario.display().to_string();
    let mut summary = Vec::new();
    write_summary(&mut summary, &s, &source, &reports)?;
    write_file(&args.out.join("summary.txt"), &summary)?;
    let manifest = RunManifest {
        tool: TOOL,
        version: VERSION,
        scenario: source,
        scenario_hash: &s.hash,
        pipeline: pipeline_name(args.pipeline),
        output: args.out.display().to_string(),
        certificates: args.certificates,
        noise_sigma: noise.map(|n| n.0),
        noise_seed: noise.map(|n| n.1),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    json.push('\n');
    write_file(&args.out.join("manifest.json"), json.as_bytes())
}

pub fn validate(
    scenario: &Path,
    level: LevelArg,
    out: Option<&Path>,
    corrupt_w: bool,
) -> Result<()> {
    let cfg = ScenarioConfig::from_path(scenario)?;
    let level = match level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    log::info!("validating {} at level {level:?}", scenario.display());
    let report = validate_scenario(&cfg, &ValidateOptions { level, corrupt_w })?;
    report
        .write_text(std::io::stdout().lock())
        .map_err(io_err(Path::new("stdout")))?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_file(&dir.join("validation.json"), report.to_json().as_bytes())?;
    }
    report.into_result().map(|_| ())
}

fn run_one(cfg: &ScenarioConfig, pipeline: PipelineArg, dir: &Path) -> Result<Vec<VerdictReport>> {
    let s = Scenario::from_config(cfg)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join("scenario.toml"), cfg.to_toml_string().as_bytes())?;
    let outputs = compute(&s, pipeline, false, None)?;
    write_outputs(dir, &s, &outputs)
}

pub fn sweep(
    scenario: &Path,
    parameter: &str,
    values: &[f64],
    pipeline: PipelineArg,
    out: &Path,
    jobs: usize,
) -> Result<()> {
    let cfg = ScenarioConfig::from_path(scenario)?;
    let param: SweepParameter = parameter.parse()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Io {
            path: "thread pool".into(),
            source: std::io::Error::other(e),
        })?;
    let results: Vec<(f64, Result<Vec<VerdictReport>>)> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| {
                let dir = out.join(format!("{i:03}_{}_{v}", param.as_str()));
                let r = param
                    .apply(&cfg, v)
                    .and_then(|c| run_one(&c, pipeline, &dir));
                if let Err(e) = &r {
                    log::warn!("{} = {v} failed: {e}", param.as_str());
                }
                (v, r)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (value, r) in results {
        match r {
            Ok(reports) => rows.extend(reports.into_iter().map(|rep| SweepRow {
                parameter: param,
                value,
                outcome: Ok(rep),
            })),
            Err(e) => {
                failures.push(format!("{} = {value}: {e}", param.as_str()));
                rows.push(SweepRow {
                    parameter: param,
                    value,
                    outcome: Err(e.to_string()),
                });
            }
        }
    }
    let mut csv = Vec::new();
    write_batch_csv(&rows, &mut csv)?;
    write_file(&out.join("batch.csv"), &csv)?;
    let mut text = format!(
        "{TOOL} {VERSION}\nsweep {} over {} values, {} failed\n",
        param.as_str(),
        values.len(),
        failures.len()
    );
    for f in &failures {
        text.push_str(&format!("failed: {f}\n"));
    }
    write_file(&out.join("sweep_summary.txt"), text.as_bytes())?;
    if !failures.is_empty() {
        log::warn!("{} of {} runs failed", failures.len(), values.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct Info<'a> {
    tool: &'static str,
    version: &'static str,
    scenario_hash: &'a str,
    mode: &'static str,
    dimension: usize,
    cells: usize,
    spacing: &'a [f64],
    dist_db: Option<f64>,
    dt: f64,
    steps: usize,
    truncation_radius: f64,
    time_threshold: Option<f64>,
    t_final: f64,
    alpha_min: f64,
    alpha_max: f64,
}

pub fn info(scenario: &Path, json: bool) -> Result<()> {
    let (_, s) = load(scenario)?;
    let d = &s.derived;
    let info = Info {
        tool: TOOL,
        version: VERSION,
        scenario_hash: &s.hash,
        mode: s.medium.mode.as_str(),
        dimension: s.grid.dimension(),
        cells: s.grid.len(),
        spacing: s.grid.spacing(),
        dist_db: d.dist_db,
        dt: d.dt,
        steps: d.steps,
        truncation_radius: d.truncation_radius,
        time_threshold: d.time_threshold,
        t_final: s.t_final,
        alpha_min: d.alpha_min,
        alpha_max: d.alpha_max,
    };
    let text = if json {
        let mut t = serde_json::to_string_pretty(&info).expect("info serialises");
        t.push('\n');
        t
    } else {
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v}"));
        format!(
            "scenario_hash      {}\nmode               {}\ngrid               {}D, {} cells, spacing {:?}\ndist_DB            {}\ndt (CFL)           {:e}\nsteps              {}\ntruncation radius  {}\ntime threshold     {}\nT                  {}\nalpha range        [{}, {}]\n",
            info.scenario_hash,
            info.mode,
            info.dimension,
            info.cells,
            info.spacing,
            opt(info.dist_db),
            info.dt,
            info.steps,
            info.truncation_radius,
            opt(info.time_threshold),
            info.t_final,
            info.alpha_min,
            info.alpha_max,
        )
    };
    use std::io::Write;
    std::io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(io_err(Path::new("stdout")))
}
