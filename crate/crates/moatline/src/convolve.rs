//! Convolution engine: direct 2-D, separable and 1-D directional passes
//! with explicit boundary policies.
//!
//! Sampling is correlation-style: kernel weight `(i, j)` pairs with the
//! input sample at the same offset from the anchor. Per-pixel sums are
//! accumulated relative to the anchor sample, which makes zero-sum
//! kernels respond with exactly 0.0 on constant inputs instead of a
//! rounding residue.

use crate::error::{Error, Result};
use crate::kernels::{CoeffVector, Kernel2D};
use crate::raster::Raster;

/// How samples outside the raster are synthesized. Output dimensions
/// always equal input dimensions under every policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Mirror without edge duplication: `-1 -> 1`, `n -> n-2`.
    #[default]
    Reflect,
    /// Clamp to the nearest edge pixel.
    Replicate,
    /// Treat everything outside as 0.
    Zero,
}

/// Axis and orientation for the 1-D fractional pass. `PosX` takes its
/// samples toward decreasing x (a backward difference along +x).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Direction {
    /// Per-lag pixel step `(dx, dy)`: the sample for lag k sits at
    /// `p - k * step`.
    fn step(self) -> (i64, i64) {
        match self {
            Direction::PosX => (1, 0),
            Direction::NegX => (-1, 0),
            Direction::PosY => (0, 1),
            Direction::NegY => (0, -1),
        }
    }

    fn axis_extent(self, r: &Raster) -> (u32, &'static str) {
        match self {
            Direction::PosX | Direction::NegX => (r.width(), "x"),
            Direction::PosY | Direction::NegY => (r.height(), "y"),
        }
    }
}

/// Maps a possibly out-of-range index to an in-range one, or `None` for
/// the zero policy.
#[inline]
fn resolve(mut i: i64, n: u32, policy: BoundaryPolicy) -> Option<usize> {
    let n = n as i64;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match policy {
        BoundaryPolicy::Zero => None,
        BoundaryPolicy::Replicate => Some(i.clamp(0, n - 1) as usize),
        BoundaryPolicy::Reflect => {
            if n == 1 {
                return Some(0);
            }
            loop {
                if i < 0 {
                    i = -i;
                } else if i >= n {
                    i = 2 * n - 2 - i;
                } else {
                    return Some(i as usize);
                }
            }
        }
    }
}

/// Boundary-extended sample at a possibly out-of-range position.
#[inline]
pub fn sample_at(r: &Raster, x: i64, y: i64, policy: BoundaryPolicy) -> f64 {
    sample(r, x, y, policy)
}

#[inline]
fn sample(r: &Raster, x: i64, y: i64, policy: BoundaryPolicy) -> f64 {
    match (
        resolve(x, r.width(), policy),
        resolve(y, r.height(), policy),
    ) {
        (Some(xi), Some(yi)) => r.data()[yi * r.width() as usize + xi],
        _ => 0.0,
    }
}

/// Direct 2-D pass: `out(x,y) = Σ k(i,j) · r(x + i - ax, y + j - ay)`
/// with boundary extension per policy. Output values may be signed.
pub fn convolve2d(r: &Raster, k: &Kernel2D, policy: BoundaryPolicy) -> Result<Raster> {
    if k.width() > r.width() || k.height() > r.height() {
        return Err(Error::KernelTooLarge {
            kernel_width: k.width(),
            kernel_height: k.height(),
            width: r.width(),
            height: r.height(),
        });
    }
    let (ax, ay) = k.anchor();
    let weight_sum = k.weights().iter().fold(0.0, |acc, w| acc + w);
    let out = Raster::from_fn(r.width(), r.height(), |x, y| {
        let center = r.get(x, y);
        let mut acc = weight_sum * center;
        for j in 0..k.height() {
            let sy = y as i64 + j as i64 - ay as i64;
            for i in 0..k.width() {
                let w = k.weight(i, j);
                if w == 0.0 {
                    continue;
                }
                let sx = x as i64 + i as i64 - ax as i64;
                acc += w * (sample(r, sx, sy, policy) - center);
            }
        }
        acc
    });
    Ok(out)
}

/// Separable pass equivalent to `convolve2d` with the outer-product
/// kernel `column ⊗ row`. Odd-length vectors anchor at their center,
/// even-length at `len / 2`.
pub fn convolve_separable(
    r: &Raster,
    column: &[f64],
    row: &[f64],
    policy: BoundaryPolicy,
) -> Result<Raster> {
    if row.len() > r.width() as usize || column.len() > r.height() as usize {
        return Err(Error::KernelTooLarge {
            kernel_width: row.len() as u32,
            kernel_height: column.len() as u32,
            width: r.width(),
            height: r.height(),
        });
    }
    let horizontal = pass_1d(r, row, policy, true);
    Ok(pass_1d(&horizontal, column, policy, false))
}

fn pass_1d(r: &Raster, taps: &[f64], policy: BoundaryPolicy, along_x: bool) -> Raster {
    let anchor = (taps.len() - 1) / 2;
    let tap_sum = taps.iter().fold(0.0, |acc, t| acc + t);
    Raster::from_fn(r.width(), r.height(), |x, y| {
        let center = r.get(x, y);
        let mut acc = tap_sum * center;
        for (i, &t) in taps.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let offset = i as i64 - anchor as i64;
            let v = if along_x {
                sample(r, x as i64 + offset, y as i64, policy)
            } else {
                sample(r, x as i64, y as i64 + offset, policy)
            };
            acc += t * (v - center);
        }
        acc
    })
}

/// One-sided fractional pass: `out(p) = Σ_k c_k · r(p - k·dir)`.
pub fn directional_conv1d(
    r: &Raster,
    c: &CoeffVector,
    direction: Direction,
    policy: BoundaryPolicy,
) -> Result<Raster> {
    let (extent, axis) = direction.axis_extent(r);
    if c.coeffs().len() > extent as usize {
        return Err(Error::WindowTooLarge {
            window: c.window(),
            extent,
            axis,
        });
    }
    let (dx, dy) = direction.step();
    let taps = c.coeffs();
    let tap_sum = c.tap_sum();
    Ok(Raster::from_fn(r.width(), r.height(), |x, y| {
        let center = r.get(x, y);
        let mut acc = tap_sum * center;
        for (k, &t) in taps.iter().enumerate().skip(1) {
            if t == 0.0 {
                continue;
            }
            let sx = x as i64 - k as i64 * dx;
            let sy = y as i64 - k as i64 * dy;
            acc += t * (sample(r, sx, sy, policy) - center);
        }
        acc
    }))
}
