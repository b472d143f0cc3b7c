//! Bounded regions used for obstacles, source balls and background layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegionSpec {
    Empty,
    Interval { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Union { parts: Vec<RegionSpec> },
}

impl RegionSpec {
    pub fn is_empty(&self) -> bool {
        match self {
            RegionSpec::Empty => true,
            RegionSpec::Union { parts } => parts.iter().all(RegionSpec::is_empty),
            _ => false,
        }
    }

    /// Checks shape parameters against the grid dimension.
    pub fn validate(&self, dimension: usize) -> Result<()> {
        match self {
            RegionSpec::Empty => Ok(()),
            RegionSpec::Interval { lo, hi } => {
                if dimension != 1 {
                    return Err(Error::invalid(
                        "interval regions are one-dimensional",
                        format!("dimension {dimension}"),
                    ));
                }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::invalid(
                        "nonempty bounded region",
                        format!("interval ]{lo}, {hi}["),
                    ));
                }
                Ok(())
            }
            RegionSpec::Box { lo, hi } => {
                if lo.len() != dimension || hi.len() != dimension {
                    return Err(Error::invalid(
                        "box corners match dimension",
                        format!("{lo:?} {hi:?}"),
                    ));
                }
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
                {
                    return Err(Error::invalid(
                        "nonempty bounded region",
                        format!("box {lo:?} {hi:?}"),
                    ));
                }
                Ok(())
            }
            RegionSpec::Ball { center, radius } => {
                if center.len() != dimension {
                    return Err(Error::invalid(
                        "ball centre matches dimension",
                        format!("{center:?}"),
                    ));
                }
                if !(*radius > 0.0) || !radius.is_finite() || center.iter().any(|c| !c.is_finite())
                {
                    return Err(Error::invalid(
                        "nonempty bounded region",
                        format!("ball radius {radius}"),
                    ));
                }
                Ok(())
            }
            RegionSpec::Union { parts } => parts.iter().try_for_each(|p| p.validate(dimension)),
        }
    }

    /// Euclidean distance from `p` to the closure of the region
    /// (zero inside, infinite for the empty region).
    pub fn distance_to_point(&self, p: &[f64]) -> f64 {
        match self {
            RegionSpec::Empty => f64::INFINITY,
            RegionSpec::Interval { lo, hi } => {
                let x = p[0];
                if x < *lo {
                    lo - x
                } else if x > *hi {
                    x - hi
                } else {
                    0.0
                }
            }
            RegionSpec::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .zip(p)
                .map(|((l, h), x)| {
                    let d = if x < l {
                        l - x
                    } else if x > h {
                        x - h
                    } else {
                        0.0
                    };
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            RegionSpec::Ball { center, radius } => {
                let d = center
                    .iter()
                    .zip(p)
                    .map(|(c, x)| (c - x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (d - radius).max(0.0)
            }
            RegionSpec::Union { parts } => parts
                .iter()
                .map(|r| r.distance_to_point(p))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Largest absolute coordinate over the region (0 for the empty region).
    pub fn max_abs_coordinate(&self) -> f64 {
        match self {
            RegionSpec::Empty => 0.0,
            RegionSpec::Interval { lo, hi } => lo.abs().max(hi.abs()),
            RegionSpec::Box { lo, hi } => lo
                .iter()
                .chain(hi.iter())
                .map(|v| v.abs())
                .fold(0.0, f64::max),
            RegionSpec::Ball { center, radius } => {
                center.iter().map(|c| c.abs() + radius).fold(0.0, f64::max)
            }
            RegionSpec::Union { parts } => parts
                .iter()
                .map(|p| p.max_abs_coordinate())
                .fold(0.0, f64::max),
        }
    }

    /// Per-axis bounding interval, `None` for the empty region.
    pub fn bounding_box(&self, dimension: usize) -> Option<Vec<(f64, f64)>> {
        match self {
            RegionSpec::Empty => None,
            RegionSpec::Interval { lo, hi } => Some(vec![(*lo, *hi)]),
            RegionSpec::Box { lo, hi } => {
                Some(lo.iter().cloned().zip(hi.iter().cloned()).collect())
            }
            RegionSpec::Ball { center, radius } => {
                Some(center.iter().map(|c| (c - radius, c + radius)).collect())
            }
            RegionSpec::Union { parts } => parts
                .iter()
                .filter_map(|p| p.bounding_box(dimension))
                .reduce(|a, b| {
                    a.iter()
                        .zip(&b)
                        .map(|(x, y)| (x.0.min(y.0), x.1.max(y.1)))
                        .collect()
                }),
        }
    }

    /// Translates the region by `shift`.
    pub fn translated(&self, shift: &[f64]) -> RegionSpec {
        match self {
            RegionSpec::Empty => RegionSpec::Empty,
            RegionSpec::Interval { lo, hi } => RegionSpec::Interval {
                lo: lo + shift[0],
                hi: hi + shift[0],
            },
            RegionSpec::Box { lo, hi } => RegionSpec::Box {
                lo: lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
                hi: hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
            },
            RegionSpec::Ball { center, radius } => RegionSpec::Ball {
                center: center.iter().zip(shift).map(|(a, s)| a + s).collect(),
                radius: *radius,
            },
            RegionSpec::Union { parts } => RegionSpec::Union {
                parts: parts.iter().map(|p| p.translated(shift)).collect(),
            },
        }
    }

    /// Fraction of the axis-aligned cell `[lo_a, hi_a]` covered by the region.
    ///
    /// Intervals and boxes are exact. Balls integrate the exact chord length
    /// along x over the cell cross-section with adaptive Simpson quadrature.
    /// Union parts are assumed disjoint; the sum is clipped at 1.
    pub fn coverage(&self, cell: &[(f64, f64)]) -> f64 {
        let frac = self.raw_coverage(cell);
        // rounding slivers at faces that coincide with region boundaries
        if frac < COVERAGE_SNAP {
            0.0
        } else if frac > 1.0 - COVERAGE_SNAP {
            1.0
        } else {
            frac
        }
    }

    fn raw_coverage(&self, cell: &[(f64, f64)]) -> f64 {
        match self {
            RegionSpec::Empty => 0.0,
            RegionSpec::Interval { lo, hi } => {
                overlap(cell[0], (*lo, *hi)) / (cell[0].1 - cell[0].0)
            }
            RegionSpec::Box { lo, hi } => cell
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(c, (l, h))| overlap(*c, (*l, *h)) / (c.1 - c.0))
                .product(),
            RegionSpec::Ball { center, radius } => ball_coverage(center, *radius, cell),
            RegionSpec::Union { parts } => parts
                .iter()
                .map(|p| p.raw_coverage(cell))
                .sum::<f64>()
                .min(1.0),
        }
    }
}

/// Coverage fractions this close to 0 or 1 are snapped.
const COVERAGE_SNAP: f64 = 1e-9;

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

fn ball_coverage(center: &[f64], radius: f64, cell: &[(f64, f64)]) -> f64 {
    let dim = cell.len();
    // nearest and farthest cell points from the centre
    let mut near = 0.0;
    let mut far = 0.0;
    for a in 0..dim {
        let (l, h) = cell[a];
        let c = center[a];
        let dn = if c < l {
            l - c
        } else if c > h {
            c - h
        } else {
            0.0
        };
        let df = (c - l).abs().max((h - c).abs());
        near += dn * dn;
        far += df * df;
    }
    let r2 = radius * radius;
    if near >= r2 {
        return 0.0;
    }
    if far <= r2 {
        return 1.0;
    }
    if dim == 1 {
        return overlap(cell[0], (center[0] - radius, center[0] + radius))
            / (cell[0].1 - cell[0].0);
    }
    let (x0, x1) = cell[0];
    let (y0, y1) = cell[1];
    let (z0, z1) = cell[2];
    let (cx, cy, cz) = (center[0], center[1], center[2]);
    let vol = (x1 - x0) * (y1 - y0) * (z1 - z0);
    let tol = 1e-12 * vol;
    let chord = |y: f64, z: f64| -> f64 {
        let s2 = r2 - (y - cy).powi(2) - (z - cz).powi(2);
        if s2 <= 0.0 {
            return 0.0;
        }
        let s = s2.sqrt();
        overlap((x0, x1), (cx - s, cx + s))
    };
    let inner = |y: f64| -> f64 {
        let rho2 = r2 - (y - cy).powi(2);
        if rho2 <= 0.0 {
            return 0.0;
        }
        // kinks of the chord as a function of z
        let mut breaks = vec![z0, z1];
        let rho = rho2.sqrt();
        breaks.push(cz - rho);
        breaks.push(cz + rho);
        for xb in [x0, x1] {
            let d2 = rho2 - (xb - cx).powi(2);
            if d2 > 0.0 {
                breaks.push(cz - d2.sqrt());
                breaks.push(cz + d2.sqrt());
            }
        }
        piecewise(&mut breaks, z0, z1, |z| chord(y, z), tol / (y1 - y0))
    };
    let mut ybreaks = vec![y0, y1, cy - radius, cy + radius];
    for zb in [z0, z1] {
        let d2 = r2 - (zb - cz).powi(2);
        if d2 > 0.0 {
            ybreaks.push(cy - d2.sqrt());
            ybreaks.push(cy + d2.sqrt());
        }
        for xb in [x0, x1] {
            let d2 = r2 - (zb - cz).powi(2) - (xb - cx).powi(2);
            if d2 > 0.0 {
                ybreaks.push(cy - d2.sqrt());
                ybreaks.push(cy + d2.sqrt());
            }
        }
    }
    for xb in [x0, x1] {
        let d2 = r2 - (xb - cx).powi(2);
        if d2 > 0.0 {
            ybreaks.push(cy - d2.sqrt());
            ybreaks.push(cy + d2.sqrt());
        }
    }
    let v = piecewise(&mut ybreaks, y0, y1, inner, tol);
    (v / vol).clamp(0.0, 1.0)
}

/// Integrates `f` over `[a, b]` split at the breakpoints that fall inside.
fn piecewise(breaks: &mut Vec<f64>, a: f64, b: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    breaks.retain(|x| *x >= a && *x <= b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let pieces = breaks.len().saturating_sub(1).max(1);
    breaks
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], tol / pieces as f64, 40))
        .sum()
}

pub(crate) fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
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
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
