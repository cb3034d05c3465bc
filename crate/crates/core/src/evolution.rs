//! Time evolution by inverse scattering, the linear comparison flow and the
//! large-time diagnostics around the stationary point of the phase.
//!
//! On the scattering side the flow is trivial: `r(t) = exp(4it Re k^2) r`.
//! Everything expensive sits in the transforms on either end.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dbar::{Kernel, SolverConfig};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{GridSpec, Space};
use crate::scattering::{forward_r, inverse_at, inverse_i};
use crate::spectral::{cauchy, check_budget, dbar, effective_radius, fourier_forward, fourier_inverse, BUDGET_THRESHOLD};

type C = Complex64;

/// Largest lattice the asymptotics harness will build when it enlarges the box.
pub const MAX_BOX_N: usize = 4096;

/// `exp(4it Re k^2) r(k)`.
pub fn evolve_r(r: &Field, t: f64) -> Result<Field> {
    r.expect_space(Space::K)?;
    Ok(r.map_with_point(|k, v| v * C::from_polar(1.0, 4.0 * t * (k * k).re)))
}

/// `q(t) = I(exp(4it Re k^2) R q0)` on the full lattice.
pub fn solve_ds2(q0: &Field, t: f64, cfg: &SolverConfig) -> Result<Field> {
    let r = forward_r(q0, cfg)?.field;
    Ok(inverse_i(&evolve_r(&r, t)?, cfg)?.field)
}

/// Solution of the linear problem with data `F^{-1} r`, refusing `t` beyond
/// the oscillation budget.
pub fn linear_u(r: &Field, t: f64) -> Result<Field> {
    check_budget(r, t)?;
    fourier_inverse(&evolve_r(r, t)?)
}

/// Resamples k-plane data onto a lattice `factor` times finer by zero-padding
/// `F^{-1} r` in a box `factor` times wider. The k half-width is unchanged and
/// the original samples sit at indices multiplied by `factor`.
pub fn extend_box(r: &Field, factor: usize) -> Result<Field> {
    r.expect_space(Space::K)?;
    if factor == 0 {
        return Err(Error::InvalidConfig("box factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(r.clone());
    }
    let g = r.grid();
    let u0 = fourier_inverse(r)?;
    let big = GridSpec::new(g.n * factor, g.half_width * factor as f64)?;
    let n1 = big.n;
    let off = (n1 - g.n) / 2;
    let mut data = vec![C::new(0.0, 0.0); n1 * n1];
    for row in 0..g.n {
        let dst = (row + off) * n1 + off;
        data[dst..dst + g.n].copy_from_slice(&u0.data()[row * g.n..(row + 1) * g.n]);
    }
    fourier_forward(&Field::from_vec(big, Space::Z, data)?)
}

fn smooth(mut m: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}

/// Smallest smooth box factor that puts `t` inside the budget of `r`.
fn budget_factor(r: &Field, t: f64) -> Result<usize> {
    // One cell of slack: the finer lattice can resolve support up to a cell further out.
    let k_eff = effective_radius(r, BUDGET_THRESHOLD) + r.plane().spacing;
    let need = (8.0 * t.abs() * k_eff / r.grid().half_width).ceil().max(1.0) as usize;
    let mut f = need;
    while !smooth(f) {
        f += 1;
    }
    let t_max = r.grid().half_width * (MAX_BOX_N / r.n()) as f64 / (8.0 * k_eff);
    if r.n() * f > MAX_BOX_N {
        return Err(Error::Budget { t, t_max });
    }
    Ok(f)
}

/// One row of the asymptotics table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub t: f64,
    /// `max |q - u|` over the probe points.
    pub sup_gap: f64,
    pub t_times_gap: f64,
    /// `| |u(t)|_2 - |q0|_2 | / |q0|_2`; by Plancherel this is also the
    /// defect of `q(t)`.
    pub l2_conservation_defect: f64,
}

/// Probe offsets `kappa`; the probe at time `t` is `z = 4 t kappa`, the point
/// whose stationary phase sits at `k_c = i kappa`.
pub const PROBE_OFFSETS: [(f64, f64); 9] = [
    (0.0, 0.0),
    (0.5, 0.0),
    (-0.5, 0.0),
    (0.0, 0.5),
    (0.0, -0.5),
    (0.5, 0.5),
    (-0.5, 0.5),
    (0.5, -0.5),
    (-0.5, -0.5),
];

/// `g(t) = t max_probes |solve_ds2(q0, t) - linear_u(R q0, t)|` for each `t`.
///
/// `r = R q0` is computed once on the lattice of `q0`. For each `t` the box is
/// enlarged by the smallest factor that brings `t` inside the oscillation
/// budget, and the nonlinear solution is evaluated only at the probe points.
pub fn asymptotic_gap(q0: &Field, tlist: &[f64], cfg: &SolverConfig) -> Result<Vec<GapRow>> {
    if tlist.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidConfig("times must be positive".into()));
    }
    let r = forward_r(q0, cfg)?.field;
    let q0_norm = q0.norm_l2();
    let mut rows = Vec::with_capacity(tlist.len());
    for &t in tlist {
        let r1 = extend_box(&r, budget_factor(&r, t)?)?;
        let u = linear_u(&r1, t)?;
        let zp = u.plane();
        let idx: Vec<(usize, usize)> = PROBE_OFFSETS
            .iter()
            .map(|&(a, b)| zp.nearest(C::new(a, b) * (4.0 * t)).ok_or(Error::Budget { t, t_max: 0.0 }))
            .collect::<Result<_>>()?;
        let zs: Vec<C> = idx.iter().map(|&(row, col)| zp.point(row, col)).collect();
        let q = inverse_at(&evolve_r(&r1, t)?, &zs, cfg)?;
        let sup_gap = idx.iter().zip(&q).map(|(&(row, col), qv)| (qv - u.at(row, col)).norm()).fold(0.0, f64::max);
        let l2_conservation_defect =
            if q0_norm > 0.0 { (u.norm_l2() - q0_norm).abs() / q0_norm } else { u.norm_l2() };
        rows.push(GapRow { t, sup_gap, t_times_gap: t * sup_gap, l2_conservation_defect });
    }
    Ok(rows)
}

/// Power-iteration estimate of `|M^2|` for `M psi = P_k exp(-itS) conj(r) conj(psi)`
/// with the phase of the point `z`.
pub fn m_norm_probe(r: &Field, z: C, t: f64, iters: usize) -> Result<f64> {
    if iters < 5 {
        return Err(Error::Precondition(format!("m_norm_probe needs at least 5 iterations, got {iters}")));
    }
    // The kernel weight is (1/2) e_z(k) V; e_z(k) exp(-4it Re k^2) = exp(-itS).
    let v = evolve_r(r, t)?.conj().scale(C::new(2.0, 0.0));
    Ok(Kernel::new(r.plane(), v.data(), z).t2_norm(iters))
}

/// Stationary-phase geometry of `S(k) = (kz - conj(kz))/(it) + 4 Re k^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub z: C,
    pub t: f64,
}

impl PhaseParams {
    pub fn new(z: C, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidConfig(format!("phase needs t > 0, got {t}")));
        }
        Ok(PhaseParams { z, t })
    }

    /// Critical point `i z / (4t)`.
    pub fn k_c(&self) -> C {
        C::new(0.0, 1.0) * self.z / (4.0 * self.t)
    }

    /// Critical value `S(k_c) = (1/4) Re(z^2 / t^2)`.
    ///
    /// Completing the square gives `S = 4 Re((k - k_c)^2) - 4 Re(k_c^2)`, and
    /// `-4 Re(k_c^2) = +(1/4) Re(z^2/t^2)`.
    pub fn s0(&self) -> f64 {
        0.25 * (self.z * self.z / (self.t * self.t)).re
    }

    /// `S(k)` from its definition.
    pub fn s(&self, k: C) -> f64 {
        2.0 * (k * self.z).im / self.t + 4.0 * (k * k).re
    }

    /// `S(k)` from the completed square `S0 + 4 Re((k - k_c)^2)`.
    pub fn s_centred(&self, k: C) -> f64 {
        let d = k - self.k_c();
        self.s0() + 4.0 * (d * d).re
    }

    /// `dS/dkbar = 4 (conj(k) - conj(k_c))`.
    pub fn s_kbar(&self, k: C) -> C {
        4.0 * (k - self.k_c()).conj()
    }
}

/// `chi(k) = eta(t^{1/4} |k - k_c|)` with `eta = 1` on `[0, 1]` and `0` on `[2, inf)`.
///
/// `eta` is the smooth step `psi(2 - s) / (psi(2 - s) + psi(s - 1))` with
/// `psi(x) = exp(-1/x)` for `x > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi {
    pub center: C,
    pub t: f64,
}

impl CutoffChi {
    pub fn new(phase: &PhaseParams) -> Self {
        CutoffChi { center: phase.k_c(), t: phase.t }
    }

    pub fn eta(s: f64) -> f64 {
        let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
        let (a, b) = (psi(2.0 - s), psi(s - 1.0));
        a / (a + b)
    }

    /// `eta'(s)`, nonzero only on `(1, 2)`.
    pub fn eta_prime(s: f64) -> f64 {
        if s <= 1.0 || s >= 2.0 {
            return 0.0;
        }
        let (a, b) = ((-1.0 / (2.0 - s)).exp(), (-1.0 / (s - 1.0)).exp());
        let (da, db) = (-a / (2.0 - s).powi(2), b / (s - 1.0).powi(2));
        (da * b - a * db) / (a + b).powi(2)
    }

    pub fn radius(&self) -> f64 {
        self.t.powf(-0.25)
    }

    pub fn chi(&self, k: C) -> f64 {
        Self::eta((k - self.center).norm() / self.radius())
    }
}

/// Relative L2 defect of
/// `P(e^{i phi} f) = e^{i phi} f / (i phi_kbar) - P(e^{i phi} dbar(f / (i phi_kbar)))`
/// for `phi = -tS`, measured on the inner half of the k-box. `f` is first
/// multiplied by `1 - chi` so that it vanishes near the critical point.
pub fn ip_identity_check(f: &Field, phase: &PhaseParams) -> Result<f64> {
    f.expect_space(Space::K)?;
    let chi = CutoffChi::new(phase);
    let t = phase.t;
    let i = C::new(0.0, 1.0);
    let g = f.map_with_point(|k, v| v * (1.0 - chi.chi(k)));
    let wave = |k: C| C::from_polar(1.0, -t * phase.s(k));
    let lhs = cauchy(&g.map_with_point(|k, v| v * wave(k)));
    let h = g.map_with_point(|k, v| if v == C::new(0.0, 0.0) { v } else { v / (i * (-t) * phase.s_kbar(k)) });
    let tail = cauchy(&dbar(&h).map_with_point(|k, v| v * wave(k)));
    let rhs = h.map_with_point(|k, v| v * wave(k)).sub(&tail)?;
    let radius = 0.5 * f.grid().plane(Space::K).half_width;
    let diff = lhs.sub(&rhs)?.norm_l2_disk(radius);
    let scale = lhs.norm_l2_disk(radius);
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian;
    use crate::spectral::oscillation_budget;

    fn gauss_k(g: GridSpec, amp: f64, width: f64) -> Field {
        Field::from_fn(g, Space::K, gaussian(amp, width, C::new(0.0, 0.0)))
    }

    #[test]
    fn evolution_is_a_unitary_group() {
        let g = GridSpec::new(32, 6.0).unwrap();
        let r = gauss_k(g, 1.0, 1.0).map_with_point(|k, v| v * (1.0 + C::new(0.0, 0.3) * k));
        assert_eq!(evolve_r(&r, 0.0).unwrap(), r);
        let a = evolve_r(&evolve_r(&r, 0.3).unwrap(), 0.45).unwrap();
        let b = evolve_r(&r, 0.75).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).norm() < 1e-12);
        }
        for (x, y) in b.data().iter().zip(r.data()) {
            assert!((x.norm() - y.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn phase_formulas_agree() {
        let p = PhaseParams::new(C::new(1.3, -0.7), 2.5).unwrap();
        let plane = GridSpec::new(32, 4.0).unwrap().plane(Space::K);
        for i in 0..32 * 32 {
            let k = plane.point_at(i);
            assert!((p.s(k) - p.s_centred(k)).abs() < 1e-12 * (1.0 + p.s(k).abs()));
        }
        let k = C::new(0.4, 0.9);
        let h = 1e-6;
        let sx = (p.s(k + h) - p.s(k - h)) / (2.0 * h);
        let sy = (p.s(k + C::new(0.0, h)) - p.s(k - C::new(0.0, h))) / (2.0 * h);
        let fd = 0.5 * C::new(sx, sy);
        assert!((fd - p.s_kbar(k)).norm() < 1e-6);
        assert!(PhaseParams::new(C::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn cutoff_profile() {
        let p = PhaseParams::new(C::new(2.0, 1.0), 16.0).unwrap();
        let chi = CutoffChi::new(&p);
        let kc = p.k_c();
        assert_eq!(chi.chi(kc + 0.99 * chi.radius()), 1.0);
        assert_eq!(chi.chi(kc + C::new(0.0, 2.0 * chi.radius())), 0.0);
        for s in 0..=300 {
            let v = CutoffChi::eta(s as f64 * 0.01);
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(CutoffChi::eta(1.2) > CutoffChi::eta(1.7));
    }

    #[test]
    fn linear_flow_is_unitary_and_starts_at_the_inverse_transform() {
        let g = GridSpec::new(64, 16.0).unwrap();
        let r = gauss_k(g, 0.7, 1.0);
        let u0 = linear_u(&r, 0.0).unwrap();
        assert_eq!(u0, fourier_inverse(&r).unwrap());
        let u = linear_u(&r, 0.3).unwrap();
        assert!((u.norm_l2() - u0.norm_l2()).abs() < 1e-12 * u0.norm_l2());
    }

    #[test]
    fn budget_is_refused_not_aliased() {
        let g = GridSpec::new(64, 16.0).unwrap();
        let r = gauss_k(g, 1.0, 1.0);
        let t_max = oscillation_budget(&r).unwrap();
        assert!(linear_u(&r, 0.9 * t_max).is_ok());
        assert!(matches!(linear_u(&r, 1.1 * t_max), Err(Error::Budget { .. })));
    }

    #[test]
    fn dispersive_decay_of_the_linear_flow() {
        let g = GridSpec::with_k_half_width(1536, 5.0).unwrap();
        let r = gauss_k(g, 1.0, 1.0);
        let vals: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|&t| t * linear_u(&r, t).unwrap().norm_sup()).collect();
        let mean = vals.iter().sum::<f64>() / 3.0;
        for v in &vals {
            assert!((v - mean).abs() < 0.2 * mean, "{vals:?}");
        }
        // Exact value at the origin: t sigma^2 / sqrt(1 + 16 t^2 sigma^4).
        assert!((vals[2] - 8.0 / 1025f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn extended_box_keeps_the_original_samples() {
        let g = GridSpec::new(32, 6.0).unwrap();
        let r = gauss_k(g, 1.0, 0.8).map_with_point(|k, v| v * C::from_polar(1.0, k.re));
        let r3 = extend_box(&r, 3).unwrap();
        assert_eq!(r3.grid().half_width, 18.0);
        for row in 0..32 {
            for col in 0..32 {
                assert!((r3.at(3 * row, 3 * col) - r.at(row, col)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn m_probe_is_quadratic_in_the_data() {
        let g = GridSpec::with_k_half_width(64, 4.0).unwrap();
        let r = gauss_k(g, 0.3, 0.6);
        assert_eq!(m_norm_probe(&r.scale(C::new(0.0, 0.0)), C::new(0.0, 0.0), 1.0, 10).unwrap(), 0.0);
        let a = m_norm_probe(&r, C::new(0.5, 0.0), 1.0, 30).unwrap();
        let b = m_norm_probe(&r.scale(C::new(2.0, 0.0)), C::new(0.5, 0.0), 1.0, 30).unwrap();
        assert!((b / a - 4.0).abs() < 0.4, "{}", b / a);
        assert!(m_norm_probe(&r, C::new(0.0, 0.0), 1.0, 4).is_err());
    }

    #[test]
    fn integration_by_parts_away_from_the_critical_point() {
        // Gaussian ring of radius 1.5 around k_c; below 1e-10 inside 2 t^{-1/4} = 1.
        let phase = PhaseParams::new(C::new(0.0, 0.0), 16.0).unwrap();
        let g = GridSpec::with_k_half_width(1024, 4.5).unwrap();
        let f = Field::from_fn(g, Space::K, |k| C::new((-(k.norm() - 1.5).powi(2) / 0.01).exp(), 0.0));
        let defect = ip_identity_check(&f, &phase).unwrap();
        assert!(defect < 1e-6, "{defect:e}");
        assert_eq!(ip_identity_check(&f.scale(C::new(0.0, 0.0)), &phase).unwrap(), 0.0);
    }
}
