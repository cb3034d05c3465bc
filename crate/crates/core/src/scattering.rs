//! The scattering transform `R` and its inverse `I` as whole-lattice maps.
//!
//! `R q(k) = -(1/pi) int e_k q conj(mu1(., k)) dm` on the k-lattice of the
//! grid, and `I r(z) = -(1/pi) int conj(e_k(z)) r nu1(z, .) dm` on the
//! z-lattice. Both reduce to the same generic sweep: the inverse is the
//! conjugate of the forward formula applied to `conj(r)` with the two planes
//! swapped.
//!
//! Each point is an independent solve. When the data occupy only part of the
//! box, solves run on the smallest centred window that still holds every pair
//! separation inside the free-space range of `P`. Points are swept row by row;
//! within a row each solve starts from its neighbour's solution, and rows are
//! distributed over workers, so results do not depend on the worker count.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dbar::{sweep, telemetry, Kernel, SolveStats, SolverConfig};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Plane, Space};
use crate::spectral::{effective_radius, extract_window, window_size};

type C = Complex64;

/// Largest admissible outer-half L2 fraction for z-plane data.
pub const Z_BOUNDARY_LIMIT: f64 = 1e-8;
/// Same for k-plane data, whose decay is set by the smoothness of `q`.
pub const K_BOUNDARY_LIMIT: f64 = 1e-2;
/// Largest admissible fraction of non-converged points.
pub const MAX_FAILED_FRACTION: f64 = 1e-3;
/// Relative magnitude below which data count as outside the support.
const SUPPORT_THRESHOLD: f64 = 1e-16;

#[derive(Clone, Debug)]
pub struct ScatteringResult {
    pub field: Field,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub mean_iterations: f64,
    pub max_amplification: f64,
    /// `(row, col)` of points whose solve missed the tolerance.
    pub failed_points: Vec<(usize, usize)>,
}

/// Summary written next to transformed fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformSummary {
    pub l2_in: f64,
    pub l2_out: f64,
    pub plancherel_defect: f64,
    pub max_residual: f64,
    pub failed_points: Vec<(usize, usize)>,
}

impl ScatteringResult {
    pub fn summary(&self, input: &Field) -> TransformSummary {
        let l2_in = input.norm_l2();
        let l2_out = self.field.norm_l2();
        TransformSummary {
            l2_in,
            l2_out,
            plancherel_defect: if l2_in > 0.0 { (l2_out - l2_in).abs() / l2_in } else { l2_out },
            max_residual: self.max_residual,
            failed_points: self.failed_points.clone(),
        }
    }
}

/// Potential restricted to its solve window.
struct Windowed {
    plane: Plane,
    data: Vec<C>,
}

fn windowed(potential: &Field) -> Windowed {
    let plane = potential.plane();
    let support = effective_radius(potential, SUPPORT_THRESHOLD);
    let m = window_size(&plane, support);
    Windowed { plane: plane.window(m), data: extract_window(potential.data(), plane.n, m) }
}

/// `-(d^2/pi) sum e_p V conj(m1)` for the kernel's weight `(1/2) e_p V`.
fn quadrature(plane: &Plane, kernel: &Kernel, m1: &[C]) -> C {
    let s: C = kernel.weight().iter().zip(m1).map(|(w, m)| w * m.conj()).sum();
    s * (-2.0 * plane.cell_area() / PI)
}

struct PointResult {
    value: C,
    stats: SolveStats,
}

fn sweep_lattice(potential: &Field, target: Plane, cfg: &SolverConfig, label: &str) -> Result<Vec<PointResult>> {
    cfg.validate()?;
    let win = windowed(potential);
    let n = target.n;
    let rows = sweep(cfg.threads, n, |row| {
        let mut guess: Option<Vec<C>> = None;
        let mut out = Vec::with_capacity(n);
        for col in 0..n {
            let p = target.point(row, col);
            let kernel = Kernel::new(win.plane, &win.data, p);
            let (m1, _m2, stats) = kernel.solve(cfg, guess.as_deref());
            telemetry(cfg, label, p, &stats);
            let value = quadrature(&win.plane, &kernel, &m1);
            guess = if stats.converged { Some(m1.iter().map(|v| v - 1.0).collect()) } else { None };
            out.push(PointResult { value, stats });
        }
        out
    })?;
    Ok(rows.into_iter().flatten().collect())
}

fn assemble(points: Vec<PointResult>, grid: crate::grid::GridSpec, space: Space, conjugate: bool) -> Result<ScatteringResult> {
    let n = grid.n;
    let total = points.len();
    let mut failed_points = Vec::new();
    let (mut max_r, mut sum_r, mut sum_it, mut max_amp) = (0.0f64, 0.0, 0.0, 0.0f64);
    let mut data = Vec::with_capacity(total);
    for (i, p) in points.iter().enumerate() {
        if !p.stats.converged {
            failed_points.push((i / n, i % n));
        }
        max_r = max_r.max(p.stats.residual);
        sum_r += p.stats.residual;
        sum_it += p.stats.iterations as f64;
        max_amp = max_amp.max(p.stats.amplification);
        data.push(if conjugate { p.value.conj() } else { p.value });
    }
    if failed_points.len() as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(Error::ScatteringFailure { failed: failed_points.len(), total });
    }
    Ok(ScatteringResult {
        field: Field::from_vec(grid, space, data)?,
        max_residual: max_r,
        mean_residual: sum_r / total as f64,
        mean_iterations: sum_it / total as f64,
        max_amplification: max_amp,
        failed_points,
    })
}

/// `r = R q` on the full k-lattice.
pub fn forward_r(q: &Field, cfg: &SolverConfig) -> Result<ScatteringResult> {
    q.expect_space(Space::Z)?;
    q.check_boundary_mass(Z_BOUNDARY_LIMIT)?;
    let grid = q.grid();
    let points = sweep_lattice(q, grid.plane(Space::K), cfg, "mu")?;
    assemble(points, grid, Space::K, false)
}

/// `q = I r` on the full z-lattice.
pub fn inverse_i(r: &Field, cfg: &SolverConfig) -> Result<ScatteringResult> {
    r.expect_space(Space::K)?;
    r.check_boundary_mass(K_BOUNDARY_LIMIT)?;
    let grid = r.grid();
    let points = sweep_lattice(&r.conj(), grid.plane(Space::Z), cfg, "nu")?;
    assemble(points, grid, Space::Z, true)
}

fn at_points(potential: &Field, points: &[C], cfg: &SolverConfig, label: &str) -> Result<Vec<(C, SolveStats)>> {
    cfg.validate()?;
    let win = windowed(potential);
    let out = sweep(cfg.threads, points.len(), |i| {
        let kernel = Kernel::new(win.plane, &win.data, points[i]);
        let (m1, _m2, stats) = kernel.solve(cfg, None);
        telemetry(cfg, label, points[i], &stats);
        (quadrature(&win.plane, &kernel, &m1), stats)
    })?;
    for (_, s) in &out {
        if !s.converged {
            return Err(Error::NoConvergence { residual: s.residual, iterations: s.iterations });
        }
    }
    Ok(out)
}

/// `R q` at arbitrary spectral points.
pub fn forward_at(q: &Field, ks: &[C], cfg: &SolverConfig) -> Result<Vec<C>> {
    q.expect_space(Space::Z)?;
    q.check_boundary_mass(Z_BOUNDARY_LIMIT)?;
    Ok(at_points(q, ks, cfg, "mu")?.into_iter().map(|(v, _)| v).collect())
}

/// `I r` at arbitrary physical points.
pub fn inverse_at(r: &Field, zs: &[C], cfg: &SolverConfig) -> Result<Vec<C>> {
    r.expect_space(Space::K)?;
    r.check_boundary_mass(K_BOUNDARY_LIMIT)?;
    Ok(at_points(&r.conj(), zs, cfg, "nu")?.into_iter().map(|(v, _)| v.conj()).collect())
}

/// Outcome of the symmetry suite. Discrepancies are relative L2 errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// `q -> -q` against `r -> -r`.
    pub negation: f64,
    /// `q(z) -> -q(-z)` against `r(k) -> -r(-k)`.
    pub odd_reflection: f64,
    /// `q -> conj(q)` against `r(k) -> -conj(r(k))`.
    pub conjugation_statement: f64,
    /// `q -> conj(q)` against `r(k) -> conj(r(-k))`.
    pub conjugation_proof: f64,
    /// `q(z) -> conj(q(-z))` against `r -> conj(r)`.
    pub dual_data: f64,
    /// Which reading of the conjugation rule the numerics support.
    pub conjugation_verdict: ConjugationVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationVerdict {
    /// `r(k) -> conj(r(-k))`.
    Proof,
    /// `r(k) -> -conj(r(k))`.
    Statement,
    Both,
    Neither,
}

/// Tolerance separating a satisfied symmetry from a violated one.
pub const SYMMETRY_TOL: f64 = 1e-6;

pub fn symmetry_check(q: &Field, cfg: &SolverConfig) -> Result<SymmetryReport> {
    let r = forward_r(q, cfg)?.field;
    let rel = |a: &Field, b: &Field| a.rel_l2_error(b);
    let minus = C::new(-1.0, 0.0);

    let r_neg = forward_r(&q.scale(minus), cfg)?.field;
    let negation = rel(&r_neg, &r.scale(minus))?;

    let r_odd = forward_r(&q.reflect().scale(minus), cfg)?.field;
    let odd_reflection = rel(&r_odd, &r.reflect().scale(minus))?;

    let r_conj = forward_r(&q.conj(), cfg)?.field;
    let conjugation_statement = rel(&r_conj, &r.conj().scale(minus))?;
    let conjugation_proof = rel(&r_conj, &r.reflect().conj())?;

    let r_dual = forward_r(&q.reflect().conj(), cfg)?.field;
    let dual_data = rel(&r_dual, &r.conj())?;

    let conjugation_verdict = match (conjugation_proof < SYMMETRY_TOL, conjugation_statement < SYMMETRY_TOL) {
        (true, false) => ConjugationVerdict::Proof,
        (false, true) => ConjugationVerdict::Statement,
        (true, true) => ConjugationVerdict::Both,
        (false, false) => ConjugationVerdict::Neither,
    };
    Ok(SymmetryReport {
        negation,
        odd_reflection,
        conjugation_statement,
        conjugation_proof,
        dual_data,
        conjugation_verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian;
    use crate::grid::GridSpec;
    use crate::spectral::fourier_forward;

    #[test]
    fn zero_maps_to_zero() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let r = forward_r(&Field::zeros(g, Space::Z), &SolverConfig::default()).unwrap();
        assert_eq!(r.field.norm_sup(), 0.0);
        assert!(r.failed_points.is_empty());
        let q = inverse_i(&Field::zeros(g, Space::K), &SolverConfig::default()).unwrap();
        assert_eq!(q.field.norm_sup(), 0.0);
    }

    #[test]
    fn small_data_linearise_to_fourier() {
        let g = GridSpec::new(32, 10.0).unwrap();
        let q = Field::from_fn(g, Space::Z, gaussian(1e-3, 1.0, C::new(0.3, -0.2)));
        let r = forward_r(&q, &SolverConfig::default()).unwrap().field;
        let f = fourier_forward(&q).unwrap();
        assert!(r.rel_l2_error(&f).unwrap() < 1e-5);
    }

    #[test]
    fn point_evaluation_matches_the_sweep() {
        let g = GridSpec::new(32, 10.0).unwrap();
        let q = Field::from_fn(g, Space::Z, gaussian(0.8, 1.0, C::new(0.3, -0.2)));
        let cfg = SolverConfig::default();
        let r = forward_r(&q, &cfg).unwrap().field;
        let kp = g.plane(Space::K);
        let ks = [kp.point(16, 16), kp.point(10, 20)];
        let vals = forward_at(&q, &ks, &cfg).unwrap();
        assert!((vals[0] - r.at(16, 16)).norm() < 1e-9);
        assert!((vals[1] - r.at(10, 20)).norm() < 1e-9);
    }

    #[test]
    fn boundary_mass_is_enforced() {
        let g = GridSpec::new(16, 2.0).unwrap();
        let q = Field::from_fn(g, Space::Z, gaussian(1.0, 1.0, C::new(0.0, 0.0)));
        assert!(matches!(forward_r(&q, &SolverConfig::default()), Err(Error::BoundaryMass { .. })));
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let g = GridSpec::new(16, 10.0).unwrap();
        let q = Field::from_fn(g, Space::Z, gaussian(0.7, 0.8, C::new(0.2, 0.1)));
        let a = forward_r(&q, &SolverConfig { threads: 1, ..SolverConfig::default() }).unwrap();
        let b = forward_r(&q, &SolverConfig { threads: 3, ..SolverConfig::default() }).unwrap();
        assert_eq!(a.field, b.field);
    }
}
