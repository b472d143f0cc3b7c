use std::path::PathBuf;

use enclosure::elliptic::{solve_v, EllipticProblem, Method, Shift, SolveOptions};
use enclosure::indicator::*;
use enclosure::medium::{MediumFields, OneOrMany, Scenario, ScenarioConfig};
use enclosure::wave::{simulate_fields, QuadratureRule, WaveOptions, WaveOutput};

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    ScenarioConfig::from_path(&path).unwrap()
}

fn scenario(name: &str) -> Scenario {
    Scenario::from_config(&config(name)).unwrap()
}

fn with_spacing(name: &str, h: f64) -> Scenario {
    let mut cfg = config(name);
    cfg.grid.spacing = OneOrMany::One(h);
    Scenario::from_config(&cfg).unwrap()
}

fn solve_opts() -> SolveOptions {
    SolveOptions {
        method: Method::Auto,
        rel_tol: 1e-13,
        max_iter: 50_000,
    }
}

fn full_run(s: &Scenario, fields: &MediumFields, taus: &[f64], rule: QuadratureRule) -> WaveOutput {
    let opts = WaveOptions {
        rule,
        full_field: true,
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
        taus,
        s.cfl,
        &opts,
    )
    .unwrap()
}

/// Both identity reports for one τ, continuum or discrete.
fn identities(s: &Scenario, tau: f64, discrete: bool) -> (IdentityReport, IdentityReport) {
    let fields = s.sample_fields();
    let rule = if discrete {
        QuadratureRule::Rectangle
    } else {
        QuadratureRule::Trapezoid
    };
    let out = full_run(s, &fields, &[tau], rule);
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
    let (v, _) = solve_v(&problem, &solve_opts()).unwrap();
    let w = out.accumulator.field(&s.grid, 0).unwrap();
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
    (
        check_lower_identity(&x).unwrap(),
        check_upper_identity(&x).unwrap(),
    )
}

#[test]
fn identity_gaps_shrink_under_refinement() {
    for name in ["layered", "dissipative"] {
        let coarse = identities(&with_spacing(name, 1.0 / 200.0), 4.0, false);
        let fine = identities(&with_spacing(name, 1.0 / 400.0), 4.0, false);
        for (c, f) in [(coarse.0, fine.0), (coarse.1, fine.1)] {
            assert!(
                c.relative_gap < 1e-2,
                "{name} {} gap {}",
                c.name,
                c.relative_gap
            );
            assert!(
                c.relative_gap >= 3.0 * f.relative_gap,
                "{name} {}: {} then {}",
                c.name,
                c.relative_gap,
                f.relative_gap
            );
        }
    }
}

#[test]
fn discrete_identities_hold_to_rounding() {
    for name in ["layered", "layered_aii", "dissipative"] {
        let s = with_spacing(name, 1.0 / 200.0);
        let (lower, upper) = identities(&s, 5.0, true);
        for r in [lower, upper] {
            assert!(
                r.relative_gap < 1e-9,
                "{name} {}: {}",
                r.name,
                r.relative_gap
            );
        }
    }
}

fn run(name: &str, pipeline: Pipeline, certificates: bool) -> RunOutput {
    let s = scenario(name);
    let opts = PipelineOptions {
        certificates,
        ..Default::default()
    };
    match pipeline {
        Pipeline::Elliptic => run_elliptic(&s, &opts).unwrap(),
        Pipeline::Reference => run_with_reference(&s, &opts).unwrap(),
    }
}

#[test]
fn certificates_hold_and_certify_the_sign() {
    for (name, sign) in [
        ("layered", Some(-1)),
        ("layered_aii", Some(1)),
        ("layered_empty", None),
    ] {
        let out = run(name, Pipeline::Elliptic, true);
        assert_eq!(out.certificates.len(), out.series.len());
        for c in &out.certificates {
            assert!(c.holds(), "{name} tau {}: {c:?}", c.tau);
        }
        let last = out.certificates.last().unwrap();
        assert_eq!(last.certified_sign, sign, "{name}: {last:?}");
        if sign.is_none() {
            assert!(out
                .certificates
                .iter()
                .all(|c| c.lower == 0.0 && c.upper == 0.0));
        }
    }
}

#[test]
fn pipelines_agree_on_class_and_rate() {
    for name in [
        "layered",
        "layered_aii",
        "layered_empty",
        "two_layer",
        "dissipative",
    ] {
        let e = run(name, Pipeline::Elliptic, false).verdict;
        let r = run(name, Pipeline::Reference, false).verdict;
        assert_eq!(e.class, r.class, "{name}");
        if e.class.is_obstacle() {
            let (a, b) = (e.rate_estimate.unwrap(), r.rate_estimate.unwrap());
            assert!((a - b).abs() <= 0.05, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn empty_reference_pipeline_is_exactly_zero() {
    let out = run("layered_empty", Pipeline::Reference, false);
    assert!(out.series.entries.iter().all(|e| e.is_zero()));
    assert_eq!(out.verdict.class, VerdictClass::Empty);
    assert_eq!(out.verdict.rate_estimate, None);
}

#[test]
fn verdict_is_invariant_under_rescaling() {
    let out = run("two_layer", Pipeline::Elliptic, false);
    let opts = ClassifyOptions::from_scenario(&scenario("two_layer"));
    for c in [-700.0, 1e-3, 50.0] {
        let v = classify(&out.series.rescaled(c), &opts).unwrap();
        assert_eq!(v.class, out.verdict.class);
        let (a, b) = (v.rate_estimate.unwrap(), out.verdict.rate_estimate.unwrap());
        assert!((a - b).abs() < 1e-9, "shift {c}: {a} vs {b}");
    }
}

#[test]
fn contrast_sign_flips_the_indicator() {
    let ai = run("layered", Pipeline::Elliptic, false);
    let aii = run("layered_aii", Pipeline::Elliptic, false);
    for (a, b) in ai.series.entries.iter().zip(&aii.series.entries) {
        assert_eq!(a.value.sign(), -1, "tau {}", a.tau);
        assert_eq!(b.value.sign(), 1, "tau {}", b.tau);
    }
}

#[test]
fn series_csv_round_trips_through_the_pipeline() {
    let out = run("layered", Pipeline::Elliptic, false);
    let mut buf = Vec::new();
    out.series.write_csv(&[], &mut buf).unwrap();
    let back = IndicatorSeries::read_csv(out.series.t_final, buf.as_slice()).unwrap();
    for (a, b) in out.series.entries.iter().zip(&back.entries) {
        assert_eq!(a.value.sign(), b.value.sign());
        assert!((a.value.ln_abs() - b.value.ln_abs()).abs() < 1e-10);
    }
}
