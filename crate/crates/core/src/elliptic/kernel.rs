//! Free-space kernels of `Δ − λ²` and their convolutions with cell data.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub dimension: usize,
    pub lambda: f64,
}

impl Kernel {
    pub fn new(dimension: usize, lambda: f64) -> Result<Self> {
        if dimension != 1 && dimension != 3 {
            return Err(Error::invalid(
                "kernel dimension in {1, 3}",
                dimension.to_string(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(Error::invalid("kernel rate lambda > 0", lambda.to_string()));
        }
        Ok(Kernel { dimension, lambda })
    }
}

/// `e^{−λ|ξ|}/(2λ)` in 1D, `e^{−λ|ξ|}/(4π|ξ|)` in 3D.
pub fn kernel_eval(kernel: Kernel, xi: &[f64]) -> Result<f64> {
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let l = kernel.lambda;
    match kernel.dimension {
        1 => Ok((-l * r).exp() / (2.0 * l)),
        _ if r == 0.0 => Err(Error::KernelSingular),
        _ => Ok((-l * r).exp() / (4.0 * PI * r)),
    }
}

/// 1D: exact `∫_{lo}^{hi} e^{−λ|x−y|}/(2λ) dy`.
fn cell_integral_1d(lambda: f64, x: f64, lo: f64, hi: f64) -> f64 {
    let c = 1.0 / (2.0 * lambda * lambda);
    let prim = |d: f64| {
        // ∫₀^d e^{−λ|s|} ds · λ, odd in d
        let m = -(-lambda * d.abs()).exp_m1();
        m.copysign(d)
    };
    c * (prim(hi - x) - prim(lo - x))
}

/// `(s ⋆ K_λ)(x_t)` for every target cell, with `s` piecewise constant on
/// `source_cells`. Exact cell integrals in 1D; in 3D each source cell is
/// split into `sub³` midpoint subcells (the target's own cell is skipped
/// when it is a source cell, so targets should lie off the support).
pub fn convolve(
    grid: &Grid,
    lambda: f64,
    source: &[f64],
    source_cells: &[usize],
    targets: &[usize],
) -> Result<Vec<f64>> {
    let kernel = Kernel::new(grid.dimension(), lambda)?;
    if grid.dimension() == 1 {
        return Ok(targets
            .iter()
            .map(|&t| {
                let x = grid.center(t)[0];
                source_cells
                    .iter()
                    .map(|&c| {
                        let (lo, hi) = grid.cell_box(c)[0];
                        source[c] * cell_integral_1d(lambda, x, lo, hi)
                    })
                    .sum()
            })
            .collect());
    }
    let sub = 3usize;
    let h = grid.spacing();
    let dv = grid.cell_volume() / (sub * sub * sub) as f64;
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        let x = grid.center(t);
        let mut acc = 0.0;
        for &c in source_cells {
            if c == t || source[c] == 0.0 {
                continue;
            }
            let cb = grid.cell_box(c);
            for i in 0..sub {
                for j in 0..sub {
                    for k in 0..sub {
                        let y = [
                            cb[0].0 + (i as f64 + 0.5) * h[0] / sub as f64,
                            cb[1].0 + (j as f64 + 0.5) * h[1] / sub as f64,
                            cb[2].0 + (k as f64 + 0.5) * h[2] / sub as f64,
                        ];
                        let xi = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                        acc += source[c] * kernel_eval(kernel, &xi)? * dv;
                    }
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Exact 1D lattice Green's function of `(−L + λ²)` on the infinite
/// lattice with spacing `h`: `e^{−μ|ξ|}/(2 sinh(μh)/h)` with
/// `2cosh(μh) − 2 = λ²h²`. Its convolution reproduces the discrete solve
/// up to the truncation of the box.
pub fn lattice_kernel_1d(lambda: f64, h: f64, xi: f64) -> f64 {
    let mu = (1.0 + 0.5 * lambda * lambda * h * h).acosh() / h;
    (-mu * xi.abs()).exp() / (2.0 * (mu * h).sinh() / h)
}

/// `φ(ξ) = ξ cosh ξ − sinh ξ`, with a series near zero.
pub fn phi(xi: f64) -> f64 {
    if xi.abs() < 1e-2 {
        let x2 = xi * xi;
        // ξ³/3 + ξ⁵/30 + ξ⁷/840
        xi * x2 * (1.0 / 3.0 + x2 * (1.0 / 30.0 + x2 / 840.0))
    } else {
        xi * xi.cosh() - xi.sinh()
    }
}

/// `ln φ(ξ)` for `ξ > 0` without overflow.
pub fn ln_phi(xi: f64) -> f64 {
    if xi < 20.0 {
        phi(xi).ln()
    } else {
        // φ = ½e^ξ[(ξ − 1) + (ξ + 1)e^{−2ξ}]
        xi - 2f64.ln() + ((xi - 1.0) + (xi + 1.0) * (-2.0 * xi).exp()).ln()
    }
}

/// `(1/4π) ∫_B e^{−λ|x−y|}/|x−y| dy = φ(λη)/λ³ · e^{−λ|x−p|}/|x−p|` for
/// `x` outside the closed ball.
pub fn mean_value_ball(p: &[f64; 3], eta: f64, lambda: f64, x: &[f64; 3]) -> Result<f64> {
    let r = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2) + (x[2] - p[2]).powi(2)).sqrt();
    if r <= eta {
        return Err(Error::InsideBall {
            distance: r,
            radius: eta,
        });
    }
    let ln = ln_phi(lambda * eta) - 3.0 * lambda.ln() - lambda * r - r.ln();
    Ok(ln.exp())
}
