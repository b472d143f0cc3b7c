use enclosure::elliptic::*;
use enclosure::grid::{Grid, ScalarField};
use enclosure::medium::Mode;
use enclosure::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WALL: (f64, f64, f64, f64, f64, f64, f64) = (1.0, 1.5, 4.0, 0.0, 0.1, 2.5, 3.0);

fn wall() -> LayeredMedium1D {
    let (a, b, k0, p, eps, c, d) = WALL;
    LayeredMedium1D::new(a, b, k0, p, eps, c, d).unwrap()
}

struct Fields {
    grid: Grid,
    alpha0: ScalarField,
    q0: ScalarField,
    f: ScalarField,
}

/// Box `[−half, half]` with `n` cells per unit; cell edges land on multiples of `1/n`.
fn wall_fields(n: usize, half: usize) -> Fields {
    let m = wall();
    let grid = Grid::centered(1, 1.0 / n as f64, 2 * half * n).unwrap();
    let alpha0 = ScalarField::from_fn(&grid, |i| m.alpha0(grid.center(i)[0]));
    let q0 = ScalarField::zeros(&grid);
    let f = ScalarField::from_fn(&grid, |i| {
        if grid.center(i)[0].abs() < m.eps {
            1.0
        } else {
            0.0
        }
    });
    Fields {
        grid,
        alpha0,
        q0,
        f,
    }
}

fn problem(fl: &Fields, tau: f64) -> EllipticProblem<'_> {
    EllipticProblem {
        mode: Mode::Refractive,
        tau,
        alpha0: &fl.alpha0,
        q0: &fl.q0,
        f: &fl.f,
        shift: Shift::Continuum,
    }
}

fn cells_in(grid: &Grid, lo: f64, hi: f64) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| (lo..hi).contains(&grid.center(i)[0]))
        .collect()
}

#[test]
fn constant_coefficient_matches_kernel_convolution() {
    let tau = 1.0;
    let grid = Grid::centered(1, 1e-3, 32_000).unwrap();
    let one = ScalarField::constant(&grid, 1.0);
    let zero = ScalarField::zeros(&grid);
    let f = ScalarField::from_fn(&grid, |i| {
        if grid.center(i)[0].abs() < 0.1 {
            1.0
        } else {
            0.0
        }
    });
    let p = EllipticProblem {
        mode: Mode::Refractive,
        tau,
        alpha0: &one,
        q0: &zero,
        f: &f,
        shift: Shift::Continuum,
    };
    let (v, _) = solve_v(&p, &SolveOptions::default()).unwrap();
    let targets = cells_in(&grid, -3.0, 3.0);
    let src: Vec<usize> = (0..grid.len()).filter(|&i| f.values()[i] != 0.0).collect();
    let conv = convolve(&grid, tau, f.values(), &src, &targets).unwrap();
    let vv = v.gather(&targets);
    let num: f64 = vv.iter().zip(&conv).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = conv.iter().map(|b| b * b).sum();
    let gap = (num / den).sqrt();
    assert!(gap < 1e-6, "relative L2 gap {gap:e}");
}

#[test]
fn dissipative_constant_matches_shifted_kernel() {
    let (tau, q) = (2.0, 0.5);
    let grid = Grid::centered(1, 1e-3, 16_000).unwrap();
    let one = ScalarField::constant(&grid, 1.0);
    let q0 = ScalarField::constant(&grid, q);
    let f = ScalarField::from_fn(&grid, |i| {
        if grid.center(i)[0].abs() < 0.1 {
            1.0
        } else {
            0.0
        }
    });
    let p = EllipticProblem {
        mode: Mode::Dissipative,
        tau,
        alpha0: &one,
        q0: &q0,
        f: &f,
        shift: Shift::Continuum,
    };
    let (v, _) = solve_v(&p, &SolveOptions::default()).unwrap();
    let targets = cells_in(&grid, 0.5, 2.0);
    let src: Vec<usize> = (0..grid.len()).filter(|&i| f.values()[i] != 0.0).collect();
    let conv = convolve(
        &grid,
        (tau * tau + q * tau).sqrt(),
        f.values(),
        &src,
        &targets,
    )
    .unwrap();
    for (a, b) in v.gather(&targets).iter().zip(&conv) {
        assert!((a / b - 1.0).abs() < 1e-5, "{a:e} vs {b:e}");
    }
}

#[test]
fn three_dimensional_constant_matches_mean_value_formula() {
    let (tau, eta) = (4.0, 0.25);
    let grid = Grid::centered(3, 1.0 / 24.0, 64).unwrap();
    let one = ScalarField::constant(&grid, 1.0);
    let zero = ScalarField::zeros(&grid);
    let r = |i: usize| {
        let c = grid.center(i);
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
    };
    // Ball aligned with the cell centres; compare against the exact kernel of
    // the staircase ball actually sampled on the grid.
    let f = ScalarField::from_fn(&grid, |i| if r(i) < eta { 1.0 } else { 0.0 });
    let p = EllipticProblem {
        mode: Mode::Refractive,
        tau,
        alpha0: &one,
        q0: &zero,
        f: &f,
        shift: Shift::Continuum,
    };
    let opts = SolveOptions {
        rel_tol: 1e-12,
        ..Default::default()
    };
    let (v, report) = solve_v(&p, &opts).unwrap();
    assert!(report.residual <= 1e-12);
    let targets: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let c = grid.center(i);
            (0.5..0.7).contains(&r(i)) && c[1].abs() < 0.03 && c[2].abs() < 0.03
        })
        .collect();
    assert!(!targets.is_empty());
    let src: Vec<usize> = (0..grid.len()).filter(|&i| f.values()[i] != 0.0).collect();
    let conv = convolve(&grid, tau, f.values(), &src, &targets).unwrap();
    for (k, &t) in targets.iter().enumerate() {
        let got = v.values()[t];
        assert!(
            (got / conv[k] - 1.0).abs() < 0.03,
            "cell {t}: {got:e} vs {:e}",
            conv[k]
        );
        // the staircase ball has the volume of a slightly different sphere; the
        // closed form stays within the same band
        let mv = mean_value_ball(&[0.0; 3], eta, tau, &grid.center(t)).unwrap();
        assert!(
            (got / mv - 1.0).abs() < 0.15,
            "cell {t}: {got:e} vs mean value {mv:e}"
        );
    }
}

#[test]
fn solution_is_positive_and_obeys_norm_bound() {
    let fl = wall_fields(200, 8);
    let m0 = 1.0;
    for tau in [1.0, 3.0, 6.0, 10.0] {
        let p = problem(&fl, tau);
        let (v, _) = solve_v(&p, &SolveOptions::default()).unwrap();
        assert!(v.min() >= 0.0, "tau {tau}: min {}", v.min());
        let src = p.source();
        let bound = fl.grid.norm_l2(&src) / (m0 * m0 * tau * tau);
        let norm = v.norm_l2();
        assert!(
            norm <= bound * (1.0 + 1e-12),
            "tau {tau}: {norm:e} > {bound:e}"
        );
    }
}

#[test]
fn zero_source_gives_zero_solution() {
    let mut fl = wall_fields(100, 8);
    fl.f = ScalarField::zeros(&fl.grid);
    let (v, _) = solve_v(&problem(&fl, 3.0), &SolveOptions::default()).unwrap();
    assert!(v.values().iter().all(|x| *x == 0.0));
}

#[test]
fn layered_solution_matches_closed_form_after_extrapolation() {
    let m = wall();
    let tau = 2.0;
    let an = analytic_v_1d(&m, tau).unwrap();
    // relative error of cell values at fixed physical points, two resolutions
    let rel = |n: usize| -> Vec<f64> {
        let fl = wall_fields(n, 8);
        let (v, _) = solve_v(&problem(&fl, tau), &SolveOptions::default()).unwrap();
        (0..10)
            .map(|k| {
                let x = m.c + (k as f64 + 0.5) * (m.d - m.c) / 10.0;
                let i = ((x - fl.grid.origin()[0]) * n as f64).floor() as usize;
                let xc = fl.grid.center(i)[0];
                v.values()[i] / an.value_f64(xc).unwrap() - 1.0
            })
            .collect()
    };
    let coarse = rel(800);
    let fine = rel(1600);
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(f.abs() < c.abs() && c.abs() < 1e-5, "{c:e} {f:e}");
        let order = (c / f).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
        let extrapolated = (4.0 * f - c) / 3.0;
        assert!(
            extrapolated.abs() < 1e-8,
            "extrapolated relative error {extrapolated:e}"
        );
    }
}

#[test]
fn closed_form_is_continuous_and_solves_each_branch() {
    let m = wall();
    let tau = 3.0;
    let an = analytic_v_1d(&m, tau).unwrap();
    let v = |x: f64| an.value_f64(x).unwrap();
    let dv = |x: f64| an.derivative(x).try_to_f64().unwrap();
    let delta = 1e-9;
    for x in [m.p - m.eps, m.p + m.eps, m.a, m.b] {
        let (l, r) = (v(x - delta), v(x + delta));
        assert!((l / r - 1.0).abs() < 1e-7, "value jump at {x}: {l:e} {r:e}");
        let (l, r) = (dv(x - delta), dv(x + delta));
        assert!(
            (l - r).abs() < 1e-6 * l.abs().max(r.abs()),
            "slope jump at {x}: {l:e} {r:e}"
        );
    }
    let h = 1e-4;
    for x in [-0.7, -0.05, 0.05, 0.6, 1.2, 1.4, 2.0, 2.7] {
        let second = (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h);
        let a0 = m.alpha0(x);
        let f = if x.abs() < m.eps { 1.0 } else { 0.0 };
        let res = second - a0 * tau * tau * v(x) + a0 * f;
        let scale = a0 * tau * tau * v(x) + a0 * f;
        assert!(res.abs() < 1e-5 * scale, "x {x}: residual {res:e}");
    }
}

#[test]
fn kernel_bounds_hold_on_layered_medium() {
    let fl = wall_fields(400, 8);
    let tau = 6.0;
    let p = problem(&fl, tau);
    let (v, _) = solve_v(&p, &SolveOptions::default()).unwrap();
    let cells = cells_in(&fl.grid, 2.5, 3.0);
    let report = comparison_bounds(&v, &p, 1.0, 2.0, &cells, 0.0).unwrap();
    assert!(report.lower_margin > 0.0 && report.upper_margin > 0.0);
    assert_eq!(report.lower_rate, 12.0);
    assert_eq!(report.upper_rate, 6.0);
    // the closed form sits inside the same bounds
    let an = analytic_v_1d(&wall(), tau).unwrap();
    for (k, &c) in cells.iter().enumerate() {
        let x = fl.grid.center(c)[0];
        let exact = an.value_f64(x).unwrap();
        assert!(report.lower[k] < exact && exact < report.upper[k]);
    }
}

#[test]
fn kernel_bounds_collapse_for_constant_medium() {
    let grid = Grid::centered(1, 1e-3, 16_000).unwrap();
    let one = ScalarField::constant(&grid, 1.0);
    let zero = ScalarField::zeros(&grid);
    let f = ScalarField::from_fn(&grid, |i| {
        if grid.center(i)[0].abs() < 0.1 {
            1.0
        } else {
            0.0
        }
    });
    for mode in [Mode::Refractive, Mode::Dissipative] {
        let p = EllipticProblem {
            mode,
            tau: 2.0,
            alpha0: &one,
            q0: &zero,
            f: &f,
            shift: Shift::Continuum,
        };
        let (v, _) = solve_v(&p, &SolveOptions::default()).unwrap();
        let cells = cells_in(&grid, 0.5, 1.5);
        let r = comparison_bounds(&v, &p, 1.0, 1.0, &cells, 1e-5).unwrap();
        assert_eq!(r.lower_rate, r.upper_rate);
        assert_eq!(r.lower, r.upper);
        assert!(r.lower_margin.abs() < 1e-5 && r.upper_margin.abs() < 1e-5);
    }
}

#[test]
fn kernel_bound_violation_is_reported() {
    let fl = wall_fields(200, 8);
    let p = problem(&fl, 4.0);
    let (v, _) = solve_v(&p, &SolveOptions::default()).unwrap();
    let cells = cells_in(&fl.grid, 2.5, 3.0);
    // pretend the medium were slower than it is
    let err = comparison_bounds(&v, &p, 1.0, 1.0, &cells, 0.0).unwrap_err();
    assert!(matches!(err, Error::BoundViolation(_)));
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[test]
fn mean_value_formula_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let eta: f64 = rng.random_range(0.1..1.0);
        let lambda: f64 = rng.random_range(0.5..8.0);
        let dist: f64 = eta * rng.random_range(1.1..3.0);
        let dir = [0.6, -0.48, 0.64];
        let x = [dist * dir[0], dist * dir[1], dist * dir[2]];
        let exact = mean_value_ball(&[0.0; 3], eta, lambda, &x).unwrap();
        // ball in polar coordinates about its centre, axis through x
        let inner = |rho: f64| {
            let g = |mu: f64| {
                let r = (dist * dist + rho * rho - 2.0 * dist * rho * mu).sqrt();
                (-lambda * r).exp() / r
            };
            rho * rho * 2.0 * std::f64::consts::PI * simpson(&g, -1.0, 1.0, 1e-14)
        };
        let quad = simpson(&inner, 0.0, eta, 1e-14) / (4.0 * std::f64::consts::PI);
        assert!(
            (quad / exact - 1.0).abs() < 1e-6,
            "eta {eta} lambda {lambda} d {dist}: {quad:e} vs {exact:e}"
        );
    }
}

fn two_speed(n: usize) -> (Grid, ScalarField, ScalarField) {
    let grid = Grid::centered(1, 1.0 / n as f64, 8 * n).unwrap();
    let alpha0 = ScalarField::from_fn(&grid, |i| if grid.center(i)[0] < 0.5 { 1.0 } else { 4.0 });
    let f = ScalarField::from_fn(&grid, |i| {
        if grid.center(i)[0].abs() < 0.1 {
            1.0
        } else {
            0.0
        }
    });
    (grid, alpha0, f)
}

#[test]
fn contraction_converges_to_direct_solution() {
    let (grid, alpha0, f) = two_speed(200);
    let tau = 2.0;
    let r = contraction_iteration(
        &f,
        &alpha0,
        1.0,
        2.0,
        tau,
        150,
        Shift::Continuum,
        0.02,
        &SolveOptions::default(),
    )
    .unwrap();
    assert_eq!(r.bound, 0.75);
    assert!(r.max_ratio <= 0.77, "{}", r.max_ratio);
    assert!(r.ratios.len() >= 20);
    assert!(r.monotone);
    assert!(r.min_value >= 0.0);
    assert!(r.norm_bound_ratio <= 1.0 + 1e-9 && r.gradient_bound_ratio <= 1.0 + 1e-9);
    let q0 = ScalarField::zeros(&grid);
    let p = EllipticProblem {
        mode: Mode::Refractive,
        tau,
        alpha0: &alpha0,
        q0: &q0,
        f: &f,
        shift: Shift::Continuum,
    };
    let (v, _) = solve_v(&p, &SolveOptions::default()).unwrap();
    let limit = r.limit.unwrap();
    let peak = v.max();
    let gap = limit
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-6 * peak, "gap {gap:e}");
}

#[test]
fn contraction_stops_after_one_step_when_medium_is_fast() {
    let (grid, _, f) = two_speed(100);
    let alpha0 = ScalarField::constant(&grid, 4.0);
    let r = contraction_iteration(
        &f,
        &alpha0,
        2.0,
        2.0,
        3.0,
        10,
        Shift::Continuum,
        0.0,
        &SolveOptions::default(),
    )
    .unwrap();
    assert_eq!(r.increments.len(), 2);
    assert_eq!(r.increments[1], 0.0);
}

#[test]
fn contraction_ratio_failure_is_a_validation_error() {
    let (_, alpha0, f) = two_speed(100);
    // claiming m0 = M0 makes the admissible ratio zero
    let err = contraction_iteration(
        &f,
        &alpha0,
        2.0,
        2.0,
        2.0,
        10,
        Shift::Continuum,
        0.0,
        &SolveOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::ContractionRatio { .. }));
    assert_eq!(err.family(), enclosure::ErrorFamily::Validation);
}

#[test]
fn discrete_shift_tends_to_continuum() {
    let (s2, rho) = Shift::Discrete { dt: 1e-4 }.factors(5.0);
    assert!((s2 / 25.0 - 1.0).abs() < 1e-7);
    assert!((rho / 5.0 - 1.0).abs() < 1e-7);
    let (s2, rho) = Shift::Discrete { dt: 0.1 }.factors(5.0);
    assert!(s2 > 25.0 && rho > 5.0);
}

#[test]
fn coefficient_csv_has_one_row_per_tau() {
    let m = wall();
    let rows: Vec<_> = [2.0, 50.0, 500.0]
        .iter()
        .map(|&t| analytic_v_1d(&m, t).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_coefficients_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0].split(',').count(),
        AnalyticV1D::COEFFICIENT_HEADER.len()
    );
    assert!(!text.contains("inf") && !text.contains("NaN"));
}

/// `max τ²|y(τ) − target| / 5` over `τ = 5, 5.5, …, tau_max`, with
/// `y = 2τ e^{2τφ} ∫_D v²` scaled by `e^{ln_scale(τ)}`.
fn leading_order_constant(tau_max: f64, ln_scale: impl Fn(f64) -> f64, target: f64) -> f64 {
    let m = wall();
    let mut c: f64 = 0.0;
    let mut tau = 5.0;
    while tau <= tau_max {
        let ln_y = analytic_v_1d(&m, tau)
            .unwrap()
            .ln_normalized_obstacle_energy()
            .unwrap()
            + ln_scale(tau);
        assert!(ln_y.is_finite(), "tau {tau}");
        c = c.max(tau * tau * (ln_y.exp() - target).abs() / 5.0);
        tau += 0.5;
    }
    c
}

#[test]
fn obstacle_energy_times_4tau4_has_bounded_tau2_correction() {
    let target = AnalyticV1D::transmission_limit(4.0);
    let scale = |tau: f64| (4.0 * tau.powi(4)).ln();
    let c40 = leading_order_constant(40.0, scale, target);
    let c80 = leading_order_constant(80.0, scale, target);
    assert!(c40.is_finite() && c40 < 10.0, "{c40}");
    assert_eq!(c40, c80);
}

#[test]
fn unscaled_obstacle_energy_tends_to_zero() {
    let c40 = leading_order_constant(40.0, |_| 0.0, 1.0);
    let c80 = leading_order_constant(80.0, |_| 0.0, 1.0);
    assert!(c80 > 3.9 * c40, "{c40} {c80}");
    let v = analytic_v_1d(&wall(), 80.0).unwrap();
    assert!(v.ln_normalized_obstacle_energy().unwrap() < -15.0);
}
