//! Uniform square grids in the physical (z) and spectral (k) planes.
//!
//! A [`GridSpec`] `(n, L)` fixes both planes at once. The z-plane is the box
//! `[-L, L)^2` with spacing `h = 2L/n`. The k-plane is its dual lattice: spacing
//! `dk = pi/(2L)` and half-width `K = pi*n/(4L)`. These are chosen so that the
//! discrete Fourier pair is an exact isometry (see [`crate::spectral`]).
//!
//! Samples are stored row-major with the row index running along the imaginary
//! axis: entry `row * n + col` sits at `-a + col*d + i(-a + row*d)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Which of the two dual planes a field lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "k")]
    K,
}

impl Space {
    pub fn dual(self) -> Space {
        match self {
            Space::Z => Space::K,
            Space::K => Space::Z,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Space::Z => "z",
            Space::K => "k",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be even and at least 8")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("L = {half_width} must be positive and finite")));
        }
        Ok(GridSpec { n, half_width })
    }

    /// Grid whose k-plane has the given half-width.
    pub fn with_k_half_width(n: usize, k_half_width: f64) -> Result<Self> {
        if !(k_half_width.is_finite() && k_half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("K = {k_half_width} must be positive and finite")));
        }
        GridSpec::new(n, PI * n as f64 / (4.0 * k_half_width))
    }

    pub fn plane(&self, space: Space) -> Plane {
        match space {
            Space::Z => Plane::new(self.n, self.half_width),
            Space::K => Plane::new(self.n, PI * self.n as f64 / (4.0 * self.half_width)),
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Exact equality of both parameters.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.half_width.to_bits() == other.half_width.to_bits()
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                n_a: self.n,
                l_a: self.half_width,
                n_b: other.n,
                l_b: other.half_width,
            })
        }
    }
}

/// One concrete sampling plane: `n x n` points of spacing `d` covering `[-a, a)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub n: usize,
    pub half_width: f64,
    pub spacing: f64,
}

impl Plane {
    pub fn new(n: usize, half_width: f64) -> Self {
        Plane { n, half_width, spacing: 2.0 * half_width / n as f64 }
    }

    /// Sub-plane of `m` points per side centred in this one, same spacing.
    pub fn window(&self, m: usize) -> Plane {
        Plane { n: m, half_width: 0.5 * m as f64 * self.spacing, spacing: self.spacing }
    }

    pub fn coord(&self, idx: usize) -> f64 {
        -self.half_width + idx as f64 * self.spacing
    }

    pub fn point(&self, row: usize, col: usize) -> Complex64 {
        Complex64::new(self.coord(col), self.coord(row))
    }

    pub fn point_at(&self, flat: usize) -> Complex64 {
        self.point(flat / self.n, flat % self.n)
    }

    /// Quadrature weight of a single cell.
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// Nearest lattice index pair `(row, col)` to `w`, if `w` lies inside the box.
    pub fn nearest(&self, w: Complex64) -> Option<(usize, usize)> {
        let col = ((w.re + self.half_width) / self.spacing).round();
        let row = ((w.im + self.half_width) / self.spacing).round();
        let n = self.n as f64;
        if col < 0.0 || row < 0.0 || col >= n || row >= n {
            return None;
        }
        Some((row as usize, col as usize))
    }

    /// Signed Fourier wavenumber of DFT bin `v`, for modes `exp(i xi x)`.
    pub fn wavenumber(&self, v: usize) -> f64 {
        let m = if v < self.n / 2 { v as i64 } else { v as i64 - self.n as i64 };
        PI * m as f64 / self.half_width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_lattice_parameters() {
        let g = GridSpec::new(128, 16.0).unwrap();
        let z = g.plane(Space::Z);
        let k = g.plane(Space::K);
        assert_eq!(z.spacing, 0.25);
        assert!((k.spacing - PI / 32.0).abs() < 1e-15);
        assert!((k.half_width - 2.0 * PI).abs() < 1e-12);
        assert!((z.spacing * k.spacing - PI / 128.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(7, 1.0).is_err());
        assert!(GridSpec::new(64, 0.0).is_err());
        assert!(GridSpec::new(64, f64::NAN).is_err());
    }

    #[test]
    fn centre_index_is_origin() {
        let p = Plane::new(64, 3.0);
        assert_eq!(p.point(32, 32), Complex64::new(0.0, 0.0));
        assert_eq!(p.nearest(Complex64::new(0.01, -0.02)), Some((32, 32)));
        assert_eq!(p.nearest(Complex64::new(3.5, 0.0)), None);
    }

    #[test]
    fn k_half_width_constructor() {
        let g = GridSpec::with_k_half_width(512, 64.0).unwrap();
        assert!((g.plane(Space::K).half_width - 64.0).abs() < 1e-12);
    }
}
