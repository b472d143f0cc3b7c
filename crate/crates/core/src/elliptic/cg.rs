//! Solvers for `(−L + k) x = b` with `L` the Dirichlet grid Laplacian and
//! `k ≥ 0` a cellwise shift.

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Tridiagonal elimination in 1D, conjugate gradients otherwise.
    Auto,
    Cg,
    /// Thomas algorithm; 1D only.
    Tridiagonal,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub method: Method,
    /// Relative residual target for CG.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::Auto,
            rel_tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖`.
    pub residual: f64,
    pub history: Vec<f64>,
}

/// `y = (−L + k) x`.
pub fn apply(grid: &Grid, k: &[f64], x: &[f64], y: &mut [f64]) {
    grid.laplacian(x, y);
    for i in 0..x.len() {
        y[i] = k[i] * x[i] - y[i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve_shifted(
    grid: &Grid,
    k: &[f64],
    b: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = grid.len();
    for (name_len, len) in [(n, k.len()), (n, b.len())] {
        if name_len != len {
            return Err(Error::Shape {
                expected: n,
                actual: len,
            });
        }
    }
    if let Some((cell, value)) = k.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::Indefinite {
            cell,
            value: *value,
        });
    }
    let method = match opts.method {
        Method::Auto if grid.dimension() == 1 => Method::Tridiagonal,
        Method::Auto => Method::Cg,
        m => m,
    };
    match method {
        Method::Tridiagonal => tridiagonal(grid, k, b),
        _ => pcg(grid, k, b, opts),
    }
}

fn tridiagonal(grid: &Grid, k: &[f64], b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    if grid.dimension() != 1 {
        return Err(Error::Shape {
            expected: 1,
            actual: grid.dimension(),
        });
    }
    let n = grid.len();
    let c = 1.0 / (grid.spacing()[0] * grid.spacing()[0]);
    // diagonal 2c + k, off-diagonals −c; no pivoting needed (M-matrix)
    let mut diag: Vec<f64> = k.iter().map(|k| 2.0 * c + k).collect();
    let mut rhs = b.to_vec();
    for i in 1..n {
        let m = -c / diag[i - 1];
        diag[i] += m * c;
        rhs[i] -= m * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] + c * x[i + 1]) / diag[i];
    }
    let residual = relative_residual(grid, k, b, &x);
    Ok((
        x,
        SolveReport {
            iterations: 0,
            residual,
            history: vec![residual],
        },
    ))
}

fn relative_residual(grid: &Grid, k: &[f64], b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    apply(grid, k, x, &mut ax);
    let num: f64 = ax.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum();
    let den = dot(b, b);
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Jacobi-preconditioned conjugate gradients with sequential reductions.
fn pcg(grid: &Grid, k: &[f64], b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = grid.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport::default()));
    }
    let stencil: f64 = grid.spacing()[..grid.dimension()]
        .iter()
        .map(|h| 2.0 / (h * h))
        .sum();
    let inv_diag: Vec<f64> = k.iter().map(|k| 1.0 / (stencil + k)).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        apply(grid, k, &p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
        if rel <= opts.rel_tol {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    residual: rel,
                    history,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}
