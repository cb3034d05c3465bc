use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Plane, Space};

/// Complex samples on one of the two planes of a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    space: Space,
    data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: GridSpec, space: Space) -> Self {
        Field { grid, space, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_vec(grid: GridSpec, space: Space, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Field { grid, space, data })
    }

    /// Samples `f` at every lattice point of the chosen plane.
    pub fn from_fn(grid: GridSpec, space: Space, f: impl Fn(Complex64) -> Complex64) -> Self {
        let plane = grid.plane(space);
        let data = (0..grid.len()).map(|i| f(plane.point_at(i))).collect();
        Field { grid, space, data }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn plane(&self) -> Plane {
        self.grid.plane(self.space)
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.grid.n + col]
    }

    /// Value at the lattice point nearest to `w`.
    pub fn sample_nearest(&self, w: Complex64) -> Option<Complex64> {
        self.plane().nearest(w).map(|(r, c)| self.at(r, c))
    }

    pub fn expect_space(&self, space: Space) -> Result<()> {
        if self.space == space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { expected: space, found: self.space })
        }
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.space != other.space {
            return Err(Error::SpaceMismatch { expected: self.space, found: other.space });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field { grid: self.grid, space: self.space, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise map that also sees the lattice coordinate.
    pub fn map_with_point(&self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Field {
        let plane = self.plane();
        let data = self.data.iter().enumerate().map(|(i, &v)| f(plane.point_at(i), v)).collect();
        Field { grid: self.grid, space: self.space, data }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, space: self.space, data })
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }

    pub fn scale(&self, s: Complex64) -> Field {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Quadrature L2 norm, `sqrt(d^2 sum |f|^2)`.
    pub fn norm_l2(&self) -> f64 {
        let p = self.plane();
        (p.cell_area() * self.data.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Quadrature L2 norm restricted to `|w| <= radius`.
    pub fn norm_l2_disk(&self, radius: f64) -> f64 {
        let p = self.plane();
        let s: f64 = self
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| p.point_at(*i).norm() <= radius)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        (p.cell_area() * s).sqrt()
    }

    /// Fraction of the L2 norm carried by `|w| > a/2`, with `a` the plane half-width.
    pub fn outer_mass_fraction(&self) -> f64 {
        let total = self.norm_l2();
        if total == 0.0 {
            return 0.0;
        }
        let p = self.plane();
        let outer: f64 = self
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| p.point_at(*i).norm() > 0.5 * p.half_width)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        (p.cell_area() * outer).sqrt() / total
    }

    /// Errors unless the outer-half mass fraction is below `limit`.
    pub fn check_boundary_mass(&self, limit: f64) -> Result<()> {
        let fraction = self.outer_mass_fraction();
        if fraction < limit {
            Ok(())
        } else {
            Err(Error::BoundaryMass { fraction, limit })
        }
    }

    /// Quadrature value of `int f dm`.
    pub fn integral(&self) -> Complex64 {
        self.data.iter().sum::<Complex64>() * self.plane().cell_area()
    }

    /// Relative L2 distance `|a - b| / |b|` (absolute when `b` vanishes).
    pub fn rel_l2_error(&self, reference: &Field) -> Result<f64> {
        let d = self.sub(reference)?.norm_l2();
        let r = reference.norm_l2();
        Ok(if r > 0.0 { d / r } else { d })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Reflection `f(w) -> f(-w)`, exact on the periodic lattice.
    pub fn reflect(&self) -> Field {
        let n = self.grid.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                data[r * n + c] = self.data[((n - r) % n) * n + (n - c) % n];
            }
        }
        Field { grid: self.grid, space: self.space, data }
    }
}

/// Gaussian `A exp(-|z - c|^2 / w^2)`.
pub fn gaussian(amplitude: f64, width: f64, centre: Complex64) -> impl Fn(Complex64) -> Complex64 {
    move |z| Complex64::new(amplitude * (-(z - centre).norm_sqr() / (width * width)).exp(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_norm_matches_closed_form() {
        let g = GridSpec::new(128, 16.0).unwrap();
        let f = Field::from_fn(g, Space::Z, gaussian(1.0, 1.0, Complex64::new(0.0, 0.0)));
        // int exp(-2|z|^2) = pi/2
        assert!((f.norm_l2() - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
        assert!(f.outer_mass_fraction() < 1e-20);
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = GridSpec::new(16, 2.0).unwrap();
        let f = Field::from_fn(g, Space::Z, |z| z * z.conj() + z);
        assert_eq!(f.reflect().reflect(), f);
        let z = g.plane(Space::Z).point(5, 3);
        let mz = f.reflect().sample_nearest(-z).unwrap();
        assert_eq!(mz, f.sample_nearest(z).unwrap());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Field::zeros(GridSpec::new(16, 2.0).unwrap(), Space::Z);
        let b = Field::zeros(GridSpec::new(16, 3.0).unwrap(), Space::Z);
        let c = Field::zeros(GridSpec::new(16, 2.0).unwrap(), Space::K);
        assert!(a.add(&b).is_err());
        assert!(matches!(a.add(&c), Err(Error::SpaceMismatch { .. })));
    }
}
