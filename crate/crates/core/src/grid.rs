//! Regular cell-centred grids in one or three dimensions and the fields
//! living on them.
//!
//! Cells are indexed x-fastest: `index = i + nx * (j + ny * k)`. In one
//! dimension only the first axis is active and the other two have extent 1.
//! Every discrete operator here assumes homogeneous Dirichlet data outside
//! the box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells per active axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dimension: usize,
    origin: [f64; 3],
    spacing: [f64; 3],
    extent: [usize; 3],
}

impl Grid {
    pub fn new(
        dimension: usize,
        origin: &[f64],
        spacing: &[f64],
        extent: &[usize],
    ) -> Result<Self> {
        if dimension != 1 && dimension != 3 {
            return Err(Error::invalid(
                "grid dimension in {1, 3}",
                format!("got {dimension}"),
            ));
        }
        if origin.len() != dimension || spacing.len() != dimension || extent.len() != dimension {
            return Err(Error::invalid(
                "grid vectors match dimension",
                format!(
                    "dimension {dimension}, origin {}, spacing {}, extent {}",
                    origin.len(),
                    spacing.len(),
                    extent.len()
                ),
            ));
        }
        let mut g = Grid {
            dimension,
            origin: [0.0; 3],
            spacing: [1.0; 3],
            extent: [1; 3],
        };
        for a in 0..dimension {
            if !(spacing[a] > 0.0) || !spacing[a].is_finite() {
                return Err(Error::invalid(
                    "spacing > 0",
                    format!("axis {a}: {}", spacing[a]),
                ));
            }
            if extent[a] < MIN_CELLS {
                return Err(Error::invalid(
                    "extent >= 8 cells per axis",
                    format!("axis {a}: {}", extent[a]),
                ));
            }
            if !origin[a].is_finite() {
                return Err(Error::invalid("finite origin", format!("axis {a}")));
            }
            g.origin[a] = origin[a];
            g.spacing[a] = spacing[a];
            g.extent[a] = extent[a];
        }
        Ok(g)
    }

    /// Box centred on the origin with `cells` cells of width `spacing` on each axis.
    pub fn centered(dimension: usize, spacing: f64, cells: usize) -> Result<Self> {
        let half = 0.5 * spacing * cells as f64;
        Grid::new(
            dimension,
            &vec![-half; dimension],
            &vec![spacing; dimension],
            &vec![cells; dimension],
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dimension]
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dimension]
    }
    pub fn extent(&self) -> &[usize] {
        &self.extent[..self.dimension]
    }
    pub fn len(&self) -> usize {
        self.extent.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Lower and upper corner of the box along each active axis.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dimension)
            .map(|a| {
                (
                    self.origin[a],
                    self.origin[a] + self.spacing[a] * self.extent[a] as f64,
                )
            })
            .collect()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.extent[0] * (j + self.extent[1] * k)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.extent[0];
        let ny = self.extent[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Cell centre, always as a 3-vector (unused axes are zero).
    pub fn center(&self, index: usize) -> [f64; 3] {
        let c = self.coords(index);
        let mut x = [0.0; 3];
        for a in 0..self.dimension {
            x[a] = self.origin[a] + (c[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    /// Closed cell box along each active axis.
    pub fn cell_box(&self, index: usize) -> Vec<(f64, f64)> {
        let c = self.coords(index);
        (0..self.dimension)
            .map(|a| {
                let lo = self.origin[a] + c[a] as f64 * self.spacing[a];
                let hi = self.origin[a] + (c[a] + 1) as f64 * self.spacing[a];
                (lo, hi)
            })
            .collect()
    }

    /// Same box with every spacing halved (twice the cells per axis).
    pub fn refined(&self) -> Grid {
        let mut g = *self;
        for a in 0..self.dimension {
            g.spacing[a] *= 0.5;
            g.extent[a] *= 2;
        }
        g
    }

    /// Discrete Laplacian (3- or 7-point stencil) with zero Dirichlet data
    /// outside the box. `out` is overwritten.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        let [nx, ny, nz] = self.extent;
        let inv: Vec<f64> = (0..3)
            .map(|a| 1.0 / (self.spacing[a] * self.spacing[a]))
            .collect();
        if self.dimension == 1 {
            let c = inv[0];
            for i in 0..nx {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i + 1 < nx { u[i + 1] } else { 0.0 };
                out[i] = c * (left - 2.0 * u[i] + right);
            }
            return;
        }
        let sx = 1;
        let sy = nx;
        let sz = nx * ny;
        for k in 0..nz {
            for j in 0..ny {
                let row = sy * j + sz * k;
                for i in 0..nx {
                    let idx = row + i;
                    let uc = u[idx];
                    let xm = if i > 0 { u[idx - sx] } else { 0.0 };
                    let xp = if i + 1 < nx { u[idx + sx] } else { 0.0 };
                    let ym = if j > 0 { u[idx - sy] } else { 0.0 };
                    let yp = if j + 1 < ny { u[idx + sy] } else { 0.0 };
                    let zm = if k > 0 { u[idx - sz] } else { 0.0 };
                    let zp = if k + 1 < nz { u[idx + sz] } else { 0.0 };
                    out[idx] = inv[0] * (xm - 2.0 * uc + xp)
                        + inv[1] * (ym - 2.0 * uc + yp)
                        + inv[2] * (zm - 2.0 * uc + zp);
                }
            }
        }
    }

    /// Sum over cell faces (including the boundary faces against the zero
    /// exterior) of `(Du)(Dv)`, times the cell volume. For these operators
    /// `gradient_inner(u, v) == -inner(u, laplacian(v))` exactly up to
    /// rounding.
    pub fn gradient_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let [nx, ny, nz] = self.extent;
        let strides = [1, nx, nx * ny];
        let mut total = 0.0;
        for a in 0..self.dimension {
            let n_a = self.extent[a];
            let inv = 1.0 / (self.spacing[a] * self.spacing[a]);
            let mut acc = 0.0;
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let c = [i, j, k];
                        let idx = i + nx * (j + ny * k);
                        // face on the low side of this cell
                        let (ul, vl) = if c[a] > 0 {
                            (u[idx - strides[a]], v[idx - strides[a]])
                        } else {
                            (0.0, 0.0)
                        };
                        acc += (u[idx] - ul) * (v[idx] - vl);
                        if c[a] + 1 == n_a {
                            acc += u[idx] * v[idx];
                        }
                    }
                }
            }
            total += acc * inv;
        }
        total * self.cell_volume()
    }

    /// Quadrature of the pointwise product over the whole box.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }

    pub fn norm_l2(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}

/// Real-valued cell data on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            grid: *grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(ScalarField {
            grid: *grid,
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(usize) -> f64) -> Self {
        ScalarField {
            grid: *grid,
            values: (0..grid.len()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_l2(&self) -> f64 {
        self.grid.norm_l2(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Values restricted to a list of cell indices.
    pub fn gather(&self, cells: &[usize]) -> Vec<f64> {
        cells.iter().map(|&c| self.values[c]).collect()
    }
}
