//! Fixed-point iteration
//! `(−Δ + (M0τ)²) v_{j+1} = α₀f + τ²(M0² − α₀) v_j`, `v_0 = 0`,
//! whose increments contract by at most `1 − m0²/M0²` in L².

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

use super::cg::{solve_shifted, SolveOptions};
use super::Shift;

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    /// `‖v_1‖, ‖v_2 − v_1‖, ‖v_3 − v_2‖, …`
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
    pub bound: f64,
    pub max_ratio: f64,
    /// Every iterate is at least its predecessor, cell by cell.
    pub monotone: bool,
    pub min_value: f64,
    /// Largest `‖v_j‖ λ² / ‖rhs‖` over the sub-solves (at most 1).
    pub norm_bound_ratio: f64,
    /// Largest `‖∇v_j‖ 2λ / ‖rhs‖` over the sub-solves (at most 1).
    pub gradient_bound_ratio: f64,
    #[serde(skip)]
    pub limit: Option<ScalarField>,
}

/// Runs `j_max` steps. Ratios are only checked while the increment stays
/// above `floor · ‖v_1‖`, where rounding starts to dominate. Fails with
/// [`Error::ContractionRatio`] if a checked ratio exceeds `bound + slack`.
#[allow(clippy::too_many_arguments)]
pub fn contraction_iteration(
    f: &ScalarField,
    alpha0: &ScalarField,
    m0: f64,
    big_m0: f64,
    tau: f64,
    j_max: usize,
    shift: Shift,
    slack: f64,
    opts: &SolveOptions,
) -> Result<ContractionReport> {
    let grid = f.grid();
    let n = grid.len();
    if alpha0.values().len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: alpha0.values().len(),
        });
    }
    let (s2, _) = shift.factors(tau);
    let lambda2 = big_m0 * big_m0 * s2;
    let k = vec![lambda2; n];
    let src: Vec<f64> = alpha0
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, f)| a * f)
        .collect();
    let bound = 1.0 - (m0 * m0) / (big_m0 * big_m0);
    let floor = 1e-12;

    let mut v = vec![0.0; n];
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut monotone = true;
    let mut norm_ratio: f64 = 0.0;
    let mut grad_ratio: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    let mut rhs = vec![0.0; n];
    for _ in 0..j_max {
        for i in 0..n {
            rhs[i] = src[i] + s2 * (big_m0 * big_m0 - alpha0.values()[i]) * v[i];
        }
        let (next, _) = solve_shifted(grid, &k, &rhs, opts)?;
        let rhs_norm = grid.norm_l2(&rhs);
        if rhs_norm > 0.0 {
            norm_ratio = norm_ratio.max(grid.norm_l2(&next) * lambda2 / rhs_norm);
            grad_ratio = grad_ratio.max(
                grid.gradient_inner(&next, &next).max(0.0).sqrt() * 2.0 * lambda2.sqrt() / rhs_norm,
            );
        }
        let diff: Vec<f64> = next.iter().zip(&v).map(|(a, b)| a - b).collect();
        let peak = next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if diff.iter().any(|d| *d < -1e-13 * peak) {
            monotone = false;
        }
        let inc = grid.norm_l2(&diff);
        if let Some(&prev) = increments.last() {
            let first: f64 = increments[0];
            if prev > floor * first {
                let ratio = inc / prev;
                ratios.push(ratio);
                max_ratio = max_ratio.max(ratio);
            }
        }
        increments.push(inc);
        v = next;
        if inc == 0.0 {
            break;
        }
    }
    let min_value = v.iter().copied().fold(f64::INFINITY, f64::min);
    if max_ratio > bound + slack {
        return Err(Error::ContractionRatio {
            ratio: max_ratio,
            bound,
        });
    }
    Ok(ContractionReport {
        increments,
        ratios,
        bound,
        max_ratio,
        monotone,
        min_value,
        norm_bound_ratio: norm_ratio,
        gradient_bound_ratio: grad_ratio,
        limit: Some(ScalarField::from_values(grid, v)?),
    })
}
