//! Grünwald–Letnikov fractional-derivative coefficients and Sobel kernels.
//!
//! The GL weights follow the recurrence `c_0 = 1`,
//! `c_k = c_{k-1} * (k - 1 - nu) / k`, equivalently
//! `c_k = (-1)^k * binom(nu, k)`. Truncating the series leaves a positive
//! residual sum, so a flat region would respond with a nonzero bias; the
//! optional DC compensator appends one extra tap that makes the weights
//! sum to exactly zero.

use crate::error::{Error, Result};

/// Truncated GL coefficient sequence for fractional order `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    nu: f64,
    window: usize,
    coeffs: Vec<f64>,
    dc_compensated: bool,
}

impl CoeffVector {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Truncation length K; the sequence holds K+1 taps (K+2 when
    /// DC-compensated).
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_dc_compensated(&self) -> bool {
        self.dc_compensated
    }

    /// Sequential floating-point sum of the taps. Exactly 0.0 for
    /// DC-compensated vectors by construction.
    pub fn tap_sum(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc + c)
    }
}

/// Generates the truncated GL coefficients `c_0 .. c_K` for order `nu`.
///
/// Accepts `0 < nu <= 2` and `K >= 1`.
pub fn gl_coefficients(nu: f64, window: usize) -> Result<CoeffVector> {
    if !(nu > 0.0 && nu <= 2.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "fractional order nu = {nu} outside (0, 2]"
        )));
    }
    if window < 1 {
        return Err(Error::InvalidParameter("window K must be >= 1".into()));
    }
    let mut coeffs = Vec::with_capacity(window + 1);
    coeffs.push(1.0);
    for k in 1..=window {
        let prev = coeffs[k - 1];
        coeffs.push(prev * ((k as f64 - 1.0 - nu) / k as f64));
    }
    Ok(CoeffVector {
        nu,
        window,
        coeffs,
        dc_compensated: false,
    })
}

/// Appends the compensator `c_{K+1} = -(c_0 + .. + c_K)` so the taps sum
/// to exactly zero and constant regions produce no response.
pub fn zero_dc(c: &CoeffVector) -> CoeffVector {
    assert!(!c.dc_compensated, "coefficient vector already compensated");
    let mut coeffs = c.coeffs.clone();
    let sum = coeffs.iter().fold(0.0, |acc, v| acc + v);
    coeffs.push(-sum);
    CoeffVector {
        nu: c.nu,
        window: c.window,
        coeffs,
        dc_compensated: true,
    }
}

/// A small dense convolution kernel with odd extents, anchored at its
/// center.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    width: u32,
    height: u32,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(width: u32, height: u32, weights: Vec<f64>) -> Self {
        assert!(
            width % 2 == 1 && height % 2 == 1,
            "kernel extents must be odd"
        );
        assert_eq!(weights.len(), width as usize * height as usize);
        Self {
            width,
            height,
            weights,
        }
    }

    /// Outer product `column ⊗ row` (column length = height, row = width).
    pub fn outer(column: &[f64], row: &[f64]) -> Self {
        let width = row.len() as u32;
        let height = column.len() as u32;
        let mut weights = Vec::with_capacity(row.len() * column.len());
        for &c in column {
            for &r in row {
                weights.push(c * r);
            }
        }
        Self::new(width, height, weights)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn anchor(&self) -> (u32, u32) {
        ((self.width - 1) / 2, (self.height - 1) / 2)
    }

    #[inline]
    pub fn weight(&self, i: u32, j: u32) -> f64 {
        self.weights[j as usize * self.width as usize + i as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn transpose(&self) -> Self {
        let mut weights = Vec::with_capacity(self.weights.len());
        for i in 0..self.width {
            for j in 0..self.height {
                weights.push(self.weight(i, j));
            }
        }
        Self::new(self.height, self.width, weights)
    }
}

/// The 3x3 Sobel pair: `Gx = [1,2,1] ⊗ [-1,0,1]` and `Gy` its transpose.
pub fn sobel_kernels() -> (Kernel2D, Kernel2D) {
    let gx = Kernel2D::outer(&[1.0, 2.0, 1.0], &[-1.0, 0.0, 1.0]);
    let gy = gx.transpose();
    (gx, gy)
}
