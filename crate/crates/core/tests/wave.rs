use enclosure::grid::{Grid, ScalarField};
use enclosure::wave::{
    exp_trapezoid_coefficients, modified_energy, read_snapshot, simulate_fields,
    transform_residual, write_snapshot, LaplaceAccumulator, QuadratureRule, WaveOptions,
};
use enclosure::Error;

struct Setup {
    grid: Grid,
    alpha: ScalarField,
    q: ScalarField,
    f: ScalarField,
    b_cells: Vec<usize>,
}

/// 1D box `[-half, half]` with an indicator source on `]-eta, eta[`.
fn line(h: f64, half: f64, eta: f64, alpha: f64, q: f64) -> Setup {
    let cells = (2.0 * half / h).round() as usize;
    let grid = Grid::centered(1, h, cells).unwrap();
    let f = ScalarField::from_fn(&grid, |i| {
        let (lo, hi) = (grid.cell_box(i)[0].0, grid.cell_box(i)[0].1);
        ((hi.min(eta) - lo.max(-eta)).max(0.0) / h).clamp(0.0, 1.0)
    });
    let b_cells = (0..grid.len()).filter(|&i| f.values()[i] > 0.0).collect();
    Setup {
        alpha: ScalarField::constant(&grid, alpha),
        q: ScalarField::constant(&grid, q),
        f,
        grid,
        b_cells,
    }
}

fn dalembert(x: f64, t: f64, eta: f64) -> f64 {
    0.5 * ((x + t).min(eta) - (x - t).max(-eta)).max(0.0)
}

fn run(s: &Setup, t: f64, taus: &[f64], opts: &WaveOptions) -> enclosure::wave::WaveOutput {
    simulate_fields(
        &s.grid, &s.alpha, &s.q, &s.f, &s.b_cells, t, taus, 0.9, opts,
    )
    .unwrap()
}

#[test]
fn matches_dalembert_and_converges() {
    let t = 1.0;
    let mut errors = Vec::new();
    for h in [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0] {
        let s = line(h, 2.0, 0.25, 1.0, 0.0);
        let steps = (t / (0.9 * h)).ceil() as usize;
        let out = run(
            &s,
            t,
            &[1.0],
            &WaveOptions {
                snapshot_steps: vec![steps],
                ..Default::default()
            },
        );
        let (_, snap) = &out.snapshots[0];
        let err: f64 = (0..s.grid.len())
            .map(|i| (snap.values()[i] - dalembert(s.grid.center(i)[0], t, 0.25)).abs() * h)
            .sum();
        errors.push(err);
    }
    assert!(errors[0] < 1e-2, "{errors:?}");
    let order = (errors[1] / errors[2]).log2();
    assert!(order > 0.9, "L1 order {order}, errors {errors:?}");
}

#[test]
fn zero_source_gives_zero_everything() {
    let mut s = line(0.01, 1.0, 0.1, 1.0, 0.0);
    s.f = ScalarField::zeros(&s.grid);
    let out = run(&s, 0.5, &[1.0, 3.0], &WaveOptions::default());
    assert!(out.accumulator.values(0).iter().all(|v| *v == 0.0));
    assert!(out.final_data.u_t.values().iter().all(|v| *v == 0.0));
}

#[test]
fn damped_single_mode_matches_ode() {
    // u_t(0) = sin(πx/ℓ) is a discrete eigenvector of the Dirichlet Laplacian
    let q = 0.8;
    let t = 1.3;
    let mut errs = Vec::new();
    for cells in [64usize, 128] {
        let grid = Grid::new(1, &[0.0], &[1.0 / cells as f64], &[cells]).unwrap();
        let h = 1.0 / cells as f64;
        let ell = 1.0 + h;
        let mode = |i: usize| (std::f64::consts::PI * (grid.center(i)[0] + 0.5 * h) / ell).sin();
        let f = ScalarField::from_fn(&grid, mode);
        let lambda = 4.0 / (h * h) * (std::f64::consts::PI * h / (2.0 * ell)).sin().powi(2);
        let s = Setup {
            alpha: ScalarField::constant(&grid, 1.0),
            q: ScalarField::constant(&grid, q),
            f,
            b_cells: vec![cells / 2],
            grid,
        };
        let out = run(&s, t, &[1.0], &WaveOptions::default());
        let omega = (lambda - q * q / 4.0).sqrt();
        let amp = (-q * t / 2.0).exp() * (omega * t).sin() / omega;
        let i = cells / 2;
        let got = out.final_data.u_t.values()[i] / mode(i);
        errs.push((got - amp).abs() / amp.abs());
    }
    assert!(errs[0] < 1e-3, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.0, "expected second order, {errs:?}");
}

#[test]
fn modified_energy_is_conserved_without_damping() {
    let s = line(0.01, 3.0, 0.3, 1.0, 0.0);
    let out = run(
        &s,
        2.0,
        &[1.0],
        &WaveOptions {
            energy: true,
            ..Default::default()
        },
    );
    let e0 = out.energy[0];
    let drift = out
        .energy
        .iter()
        .map(|e| (e - e0).abs())
        .fold(0.0, f64::max);
    assert!(drift <= 1e-12 * e0, "drift {drift} of {e0}");
}

#[test]
fn modified_energy_decreases_with_damping() {
    let s = line(0.01, 3.0, 0.3, 1.0, 0.7);
    let out = run(
        &s,
        2.0,
        &[1.0],
        &WaveOptions {
            energy: true,
            ..Default::default()
        },
    );
    for w in out.energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-13), "{} -> {}", w[0], w[1]);
    }
    assert!(out.energy.last().unwrap() < &(0.5 * out.energy[0]));
}

#[test]
fn finite_propagation_speed() {
    let s = line(0.005, 3.0, 0.2, 1.0, 0.0);
    let t: f64 = 1.0;
    let steps = (t / (0.9 * 0.005)).ceil() as usize;
    let out = run(
        &s,
        t,
        &[1.0],
        &WaveOptions {
            snapshot_steps: vec![steps],
            ..Default::default()
        },
    );
    let (_, snap) = &out.snapshots[0];
    let peak = snap.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // a few cells of numerical front beyond the light cone
    for i in 0..s.grid.len() {
        if s.grid.center(i)[0].abs() > 0.2 + t + 0.1 {
            assert!(snap.values()[i].abs() < 1e-10 * peak, "leak at cell {i}");
        }
    }
}

#[test]
fn streaming_transform_is_bit_identical_to_post_hoc() {
    let s = line(0.02, 2.0, 0.2, 1.0, 0.3);
    let taus = [0.5, 2.0, 7.0];
    for rule in [
        QuadratureRule::Rectangle,
        QuadratureRule::Trapezoid,
        QuadratureRule::ExponentialTrapezoid,
    ] {
        let out = run(
            &s,
            1.0,
            &taus,
            &WaveOptions {
                rule,
                ..Default::default()
            },
        );
        let post = out.traces.transform(&taus, rule);
        assert_eq!(post, out.accumulator);
    }
}

#[test]
fn exponential_trapezoid_is_exact_for_linear_data() {
    let (tau, dt) = (3.0, 0.2);
    let (a, b) = exp_trapezoid_coefficients(tau, dt);
    // ∫₀^dt e^{−τs} ds and ∫₀^dt e^{−τs} s/dt ds
    let c0 = (1.0 - (-tau * dt).exp()) / tau;
    let c1 = (1.0 - (-tau * dt).exp() * (1.0 + tau * dt)) / (tau * tau * dt);
    assert!((a + b - c0).abs() < 1e-15);
    assert!((b - c1).abs() < 1e-15);
    // the small-x series agrees with the closed form just below the switch
    let dt = 0.999e-3;
    let (a, b) = exp_trapezoid_coefficients(1.0, dt);
    let c0 = 1.0 - (-dt).exp();
    let c1 = (1.0 - (-dt).exp() * (1.0 + dt)) / dt;
    assert!(((a + b) - c0).abs() < 1e-9 * c0);
    assert!((b - c1).abs() < 1e-8 * c1);
}

#[test]
fn rectangle_transform_satisfies_discrete_identity_exactly() {
    // −L W + (ασ² + qρ) W = α f (1 − q²dt²/(4α²)) − e^{−τT} G_d
    for q in [0.0, 0.6] {
        let s = line(0.02, 3.0, 0.2, 1.0, q);
        let tau = 3.0;
        let out = run(
            &s,
            1.5,
            &[tau],
            &WaveOptions {
                full_field: true,
                ..Default::default()
            },
        );
        let w = out.accumulator.field(&s.grid, 0).unwrap();
        let dt = out.final_data.dt;
        let sigma2 = (2.0 * (tau * dt).cosh() - 2.0) / (dt * dt);
        let rho = (tau * dt).sinh() / dt;
        let g = out.final_data.weighted_f_discrete(tau, &s.alpha, &s.q);
        let decay = (-tau * out.final_data.t_final).exp();
        let mut lap = vec![0.0; s.grid.len()];
        s.grid.laplacian(w.values(), &mut lap);
        let mut worst: f64 = 0.0;
        for i in 0..s.grid.len() {
            let terms = [
                -lap[i],
                (sigma2 + q * rho) * w.values()[i],
                -s.f.values()[i] * (1.0 - q * q * dt * dt / 4.0),
                decay * g.values()[i],
            ];
            let scale: f64 = terms.iter().map(|t| t.abs()).sum::<f64>().max(1e-300);
            worst = worst.max(terms.iter().sum::<f64>().abs() / scale);
        }
        assert!(worst < 1e-12, "q = {q}: relative identity gap {worst}");
    }
}

#[test]
fn residual_converges_at_second_order() {
    let tau = 4.0;
    let mut res = Vec::new();
    for h in [1.0 / 100.0, 1.0 / 200.0] {
        let s = line(h, 6.0, 0.3, 1.0, 0.0);
        let out = run(
            &s,
            3.0,
            &[tau],
            &WaveOptions {
                rule: QuadratureRule::Trapezoid,
                full_field: true,
                ..Default::default()
            },
        );
        let w = out.accumulator.field(&s.grid, 0).unwrap();
        res.push(transform_residual(&w, &s.alpha, &s.q, &s.f, &out.final_data, tau).unwrap());
    }
    assert!(res[0] < 1e-3, "{res:?}");
    let order = (res[0] / res[1]).log2();
    assert!(order > 1.8 && order < 2.3, "order {order}, {res:?}");
}

#[test]
fn residual_zero_data_and_sensitivity() {
    let mut s = line(0.02, 2.0, 0.2, 1.0, 0.0);
    s.f = ScalarField::zeros(&s.grid);
    let out = run(
        &s,
        1.0,
        &[2.0],
        &WaveOptions {
            full_field: true,
            ..Default::default()
        },
    );
    let w = out.accumulator.field(&s.grid, 0).unwrap();
    assert_eq!(
        transform_residual(&w, &s.alpha, &s.q, &s.f, &out.final_data, 2.0).unwrap(),
        0.0
    );

    let s = line(0.01, 4.0, 0.2, 1.0, 0.0);
    let out = run(
        &s,
        2.0,
        &[2.0],
        &WaveOptions {
            rule: QuadratureRule::Trapezoid,
            full_field: true,
            ..Default::default()
        },
    );
    let mut w = out.accumulator.field(&s.grid, 0).unwrap();
    let clean = transform_residual(&w, &s.alpha, &s.q, &s.f, &out.final_data, 2.0).unwrap();
    let mid = s.grid.len() / 2 + 7;
    w.values_mut()[mid] += 1.0;
    let dirty = transform_residual(&w, &s.alpha, &s.q, &s.f, &out.final_data, 2.0).unwrap();
    assert!(dirty > clean, "{dirty} <= {clean}");
}

#[test]
fn cfl_violation_is_refused() {
    let s = line(0.01, 1.0, 0.1, 1.0, 0.0);
    let err = simulate_fields(
        &s.grid,
        &s.alpha,
        &s.q,
        &s.f,
        &s.b_cells,
        1.0,
        &[1.0],
        0.9,
        &WaveOptions {
            dt_override: Some(0.011),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, Error::Cfl { .. }));
    assert_eq!(err.family().exit_code(), 2);
}

#[test]
fn non_finite_data_aborts_with_step() {
    let mut s = line(0.01, 1.0, 0.1, 1.0, 0.0);
    s.f.values_mut()[s.b_cells[0]] = f64::NAN;
    let err = run_err(&s);
    assert!(matches!(err, Error::NonFinite { step: 1 }), "{err}");
}

fn run_err(s: &Setup) -> Error {
    simulate_fields(
        &s.grid,
        &s.alpha,
        &s.q,
        &s.f,
        &s.b_cells,
        0.5,
        &[1.0],
        0.9,
        &WaveOptions::default(),
    )
    .unwrap_err()
}

#[test]
fn noise_hook_is_seeded_and_off_by_default() {
    let s = line(0.02, 2.0, 0.2, 1.0, 0.0);
    let clean = run(&s, 1.0, &[1.0], &WaveOptions::default());
    let noisy = |seed| {
        run(
            &s,
            1.0,
            &[1.0],
            &WaveOptions {
                noise: Some((1e-3, seed)),
                ..Default::default()
            },
        )
    };
    let (a, b, c) = (noisy(1), noisy(1), noisy(2));
    assert_eq!(a.traces, b.traces);
    assert_ne!(a.traces, c.traces);
    assert_ne!(a.traces, clean.traces);
}

#[test]
fn snapshot_roundtrip() {
    let grid = Grid::new(3, &[-1.0, 0.0, 2.0], &[0.1, 0.2, 0.3], &[8, 9, 10]).unwrap();
    let field = ScalarField::from_fn(&grid, |i| i as f64 * 0.5 - 3.0);
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &field, 1.25).unwrap();
    assert_eq!(&buf[..8], b"EWSNAP01");
    assert_eq!(buf.len(), 8 + 4 + 72 + 8 + 8 * grid.len());
    let (back, t) = read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(t, 1.25);
    assert_eq!(back, field);
    assert!(read_snapshot(&buf[..50]).is_err());
}

#[test]
fn w_csv_has_one_row_per_cell_and_tau() {
    let s = line(0.02, 2.0, 0.2, 1.0, 0.0);
    let out = run(&s, 1.0, &[1.0, 2.0], &WaveOptions::default());
    let mut buf = Vec::new();
    out.accumulator.write_csv(&s.grid, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("tau,cell,x,w"));
    assert_eq!(text.lines().count(), 1 + 2 * s.b_cells.len());
}

#[test]
fn energy_helper_is_zero_on_zero_fields() {
    let grid = Grid::centered(1, 0.1, 10).unwrap();
    let z = vec![0.0; 10];
    assert_eq!(modified_energy(&grid, &[1.0; 10], &z, &z, 0.01), 0.0);
    let acc = LaplaceAccumulator::new(&[1.0], QuadratureRule::Rectangle, 0.1, 3, None, 10);
    assert_eq!(acc.weight(3, 1.0), 0.0);
}
