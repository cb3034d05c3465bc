//! Large-k expansion of the Jost-type solutions and the moment identity.
//!
//! `nu = (mu1, e_k conj(mu2))` solves `dbar nu1 = q nu2 / 2`,
//! `(d + k) nu2 = conj(q) nu1 / 2` and behaves like
//! `(1, 0) + Σ_l k^{-(l+1)} (nu_{1,l}, nu_{2,l})` for large k. The coefficients
//! obey
//!
//! ```text
//! nu_{2,0} = qbar / 2,             nu_{1,l} = P(q nu_{2,l}) / 2,
//! nu_{2,l} = qbar nu_{1,l-1} / 2 - d nu_{2,l-1}.
//! ```
//!
//! All coefficients are built from the truncated Cauchy transform, so they are
//! exact on the inner half of the box for data supported there.

use serde::{Deserialize, Serialize};

use crate::dbar::{solve_mu, sweep, SolverConfig};
use crate::error::{Error, Result};
use crate::evolution::CutoffChi;
use crate::field::Field;
use crate::grid::{GridSpec, Space};
use crate::spectral::{cauchy, d, e_k};
use crate::Complex64;

type C = Complex64;

fn c(v: f64) -> C {
    C::new(v, 0.0)
}

/// Closed forms of the first five expansion coefficients.
#[derive(Clone, Debug)]
pub struct ExpansionCoeffs {
    pub nu10: Field,
    pub nu20: Field,
    pub nu11: Field,
    pub nu21: Field,
    pub nu22: Field,
}

/// Distances between the closed forms and the recursion, measured on the
/// inner half of the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub nu10: f64,
    pub nu21: f64,
    pub nu11: f64,
    pub nu22: f64,
    /// Distance between the recursion and `nu_{2,2}` read with `+` where the
    /// `- (1/8) d(qbar P|q|^2)` term should be. Expected to be O(1).
    pub nu22_plus_reading: f64,
}

impl RecursionReport {
    pub fn max_defect(&self) -> f64 {
        self.nu10.max(self.nu21).max(self.nu11).max(self.nu22)
    }
}

pub fn compute_coeffs(q: &Field) -> Result<ExpansionCoeffs> {
    q.expect_space(Space::Z)?;
    let qb = q.conj();
    let abs2 = q.map(|v| c(v.norm_sqr()));
    let p_abs2 = cauchy(&abs2);
    let dqb = d(&qb);
    let qb_p = qb.mul(&p_abs2)?;

    let nu10 = p_abs2.scale(c(0.25));
    let nu20 = qb.scale(c(0.5));
    let nu11 = cauchy(&abs2.mul(&p_abs2)?).scale(c(1.0 / 16.0)).sub(&cauchy(&q.mul(&dqb)?).scale(c(0.25)))?;
    let nu21 = qb_p.scale(c(0.125)).sub(&dqb.scale(c(0.5)))?;
    let nu22 = qb
        .mul(&cauchy(&abs2.mul(&p_abs2)?))?
        .scale(c(1.0 / 32.0))
        .sub(&d(&qb_p).scale(c(0.125)))?
        .sub(&qb.mul(&cauchy(&q.mul(&dqb)?))?.scale(c(0.125)))?
        .add(&d(&dqb).scale(c(0.5)))?;
    Ok(ExpansionCoeffs { nu10, nu20, nu11, nu21, nu22 })
}

/// `nu_{1,l}` and `nu_{2,l}` for `l = 0, 1, 2` from the recursion alone.
fn recursion(q: &Field) -> Result<[(Field, Field); 3]> {
    let qb = q.conj();
    let mut nu2 = qb.scale(c(0.5));
    let mut nu1 = cauchy(&q.mul(&nu2)?).scale(c(0.5));
    let first = (nu1.clone(), nu2.clone());
    let mut out = vec![first];
    for _ in 1..3 {
        nu2 = qb.mul(&nu1)?.scale(c(0.5)).sub(&d(&nu2))?;
        nu1 = cauchy(&q.mul(&nu2)?).scale(c(0.5));
        out.push((nu1.clone(), nu2.clone()));
    }
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

fn inner_distance(a: &Field, b: &Field) -> Result<f64> {
    let r = a.plane().half_width / 2.0;
    let diff = a.sub(b)?.norm_l2_disk(r);
    let scale = b.norm_l2_disk(r);
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Compares the closed forms with the recursion.
pub fn recursion_check(q: &Field) -> Result<RecursionReport> {
    let cf = compute_coeffs(q)?;
    let [(r10, _), (r11, r21), (_, r22)] = recursion(q)?;
    let qb = q.conj();
    let plus = cf.nu22.add(&d(&qb.mul(&cauchy(&q.map(|v| c(v.norm_sqr()))))?).scale(c(0.25)))?;
    Ok(RecursionReport {
        nu10: inner_distance(&cf.nu10, &r10)?,
        nu21: inner_distance(&cf.nu21, &r21)?,
        nu11: inner_distance(&cf.nu11, &r11)?,
        nu22: inner_distance(&cf.nu22, &r22)?,
        nu22_plus_reading: inner_distance(&plus, &r22)?,
    })
}

/// Smallest ladder entry accepted by [`fit_expansion`].
pub const MIN_LADDER_K: f64 = 4.0;
/// Largest condition number of the least-squares design matrix.
pub const MAX_FIT_CONDITION: f64 = 1e8;

/// One row of the fit: `nu(z, k)` from a solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSample {
    pub k: f64,
    pub nu1: C,
    pub nu2: C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub z: C,
    pub nu10: C,
    pub nu20: C,
    pub nu11: C,
    pub nu21: C,
    /// RMS misfit of the two-term model over the ladder and both components.
    pub residual: f64,
    pub condition: f64,
    pub samples: Vec<LadderSample>,
}

/// Least squares `y ≈ a x + b x^2` with real `x`; returns `(a, b)`.
fn fit_two_terms(xs: &[f64], ys: &[C]) -> (C, C) {
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    let (mut t1, mut t2) = (c(0.0), c(0.0));
    for (&x, &y) in xs.iter().zip(ys) {
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
        t1 += y * x;
        t2 += y * x * x;
    }
    let det = s2 * s4 - s3 * s3;
    ((t1 * s4 - t2 * s3) / det, (t2 * s2 - t1 * s3) / det)
}

fn design_condition(xs: &[f64]) -> f64 {
    // Condition number of the design with unit columns `x` and `x^2`. The
    // squared sine between them uses the Lagrange identity
    // `s2 s4 - s3^2 = Σ_{i<j} x_i^2 x_j^2 (x_i - x_j)^2`, which avoids cancellation.
    let s2: f64 = xs.iter().map(|x| x * x).sum();
    let s4: f64 = xs.iter().map(|x| x.powi(4)).sum();
    let mut gram = 0.0;
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i + 1..] {
            gram += (a * b * (a - b)).powi(2);
        }
    }
    let sin2 = gram / (s2 * s4);
    if !(sin2 > 0.0) {
        return f64::INFINITY;
    }
    let cos = (1.0 - sin2).max(0.0).sqrt();
    (1.0 + cos) / sin2.sqrt()
}

/// Fits `nu(z, k) - (1, 0) ≈ nu^(0) / k + nu^(1) / k^2` over real `k` in the
/// ladder, with `nu = (mu1, e_k conj(mu2))` from [`solve_mu`]. `z` is snapped to
/// the nearest lattice point.
pub fn fit_expansion(q: &Field, z: C, kladder: &[f64], cfg: &SolverConfig) -> Result<FitResult> {
    q.expect_space(Space::Z)?;
    if kladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("kladder must be strictly increasing".into()));
    }
    if kladder.first().map_or(true, |&k| k < MIN_LADDER_K) {
        return Err(Error::Precondition(format!("kladder must be nonempty with every k >= {MIN_LADDER_K}")));
    }
    let plane = q.plane();
    let (row, col) =
        plane.nearest(z).ok_or_else(|| Error::Precondition(format!("probe point {z} lies outside the box")))?;
    let z = plane.point(row, col);
    let xs: Vec<f64> = kladder.iter().map(|k| 1.0 / k).collect();
    let condition = design_condition(&xs);
    if !(condition < MAX_FIT_CONDITION) {
        return Err(Error::IllConditioned(format!("design condition number {condition:.3e}")));
    }
    // e_k carries wavenumber 2|k|.
    let available = std::f64::consts::PI / (2.0 * plane.spacing);
    let k_max = kladder[kladder.len() - 1];
    if k_max >= available {
        return Err(Error::Aliasing { requested: k_max, available });
    }
    let solves = sweep(cfg.threads, kladder.len(), |i| {
        let k = c(kladder[i]);
        let inner = SolverConfig { threads: 1, ..cfg.clone() };
        solve_mu(q, k, &inner).map(|s| LadderSample {
            k: kladder[i],
            nu1: s.mu1.at(row, col),
            nu2: e_k(k, z) * s.mu2.at(row, col).conj(),
        })
    })?;
    let samples = solves.into_iter().collect::<Result<Vec<_>>>()?;
    let y1: Vec<C> = samples.iter().map(|s| s.nu1 - 1.0).collect();
    let y2: Vec<C> = samples.iter().map(|s| s.nu2).collect();
    let (nu10, nu11) = fit_two_terms(&xs, &y1);
    let (nu20, nu21) = fit_two_terms(&xs, &y2);
    let misfit: f64 = xs
        .iter()
        .zip(y1.iter().zip(&y2))
        .map(|(&x, (a, b))| (a - nu10 * x - nu11 * x * x).norm_sqr() + (b - nu20 * x - nu21 * x * x).norm_sqr())
        .sum();
    let residual = (misfit / (2 * xs.len()) as f64).sqrt();
    Ok(FitResult { z, nu10, nu20, nu11, nu21, residual, condition, samples })
}

/// `h(k) = chi_far(|k| / R) Σ_j c_j k^{-(j+1)}`, where `chi_far = 1 - eta`
/// vanishes for `|k| <= R` and equals 1 for `|k| >= 2R`. Its expansion
/// coefficients are `h_j = c_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarFieldProfile {
    pub coeffs: Vec<C>,
    pub radius: f64,
}

impl FarFieldProfile {
    pub fn monomial(n: usize, radius: f64) -> Self {
        let mut coeffs = vec![c(0.0); n + 1];
        coeffs[n] = c(1.0);
        FarFieldProfile { coeffs, radius }
    }

    fn tail(&self, k: C) -> C {
        let inv = k.inv();
        let mut p = inv;
        let mut s = c(0.0);
        for cj in &self.coeffs {
            s += cj * p;
            p *= inv;
        }
        s
    }

    pub fn h(&self, k: C) -> C {
        let s = k.norm() / self.radius;
        if s <= 1.0 {
            c(0.0)
        } else {
            self.tail(k) * (1.0 - CutoffChi::eta(s))
        }
    }

    /// `dbar h = dbar(chi_far) Σ c_j k^{-(j+1)}` with
    /// `dbar f(|k|) = f'(|k|) k / (2|k|)`.
    pub fn dbar_h(&self, k: C) -> C {
        let rho = k.norm();
        let s = rho / self.radius;
        let slope = -CutoffChi::eta_prime(s) / self.radius;
        if slope == 0.0 {
            return c(0.0);
        }
        self.tail(k) * k * (slope / (2.0 * rho))
    }

    pub fn coefficient(&self, n: usize) -> C {
        self.coeffs.get(n).copied().unwrap_or(c(0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    /// `∫ k^n dbar h dkbar ^ dk`, i.e. `2i` times the Lebesgue integral.
    pub lhs: C,
    pub expected: C,
    /// `|lhs - 2 pi i h_n| / |2 pi i h_n|`, absolute when `h_n = 0`.
    pub defect: f64,
}

/// Quadrature of `∫ k^n dbar h` on the k-lattice of `grid`.
pub fn moment_identity_check(h: &FarFieldProfile, n: usize, grid: GridSpec) -> Result<MomentCheck> {
    let plane = grid.plane(Space::K);
    if 2.0 * h.radius > plane.half_width {
        return Err(Error::Aliasing { requested: 2.0 * h.radius, available: plane.half_width });
    }
    let f = Field::from_fn(grid, Space::K, |k| k.powu(n as u32) * h.dbar_h(k));
    let lhs = f.integral() * C::new(0.0, 2.0);
    let expected = C::new(0.0, 2.0 * std::f64::consts::PI) * h.coefficient(n);
    let err = (lhs - expected).norm();
    let defect = if expected.norm() > 0.0 { err / expected.norm() } else { err };
    Ok(MomentCheck { lhs, expected, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian;
    use proptest::prelude::*;

    fn bump(g: GridSpec) -> Field {
        Field::from_fn(g, Space::Z, gaussian(0.8, 1.0, C::new(0.3, -0.2)))
            .map_with_point(|z, v| v * C::from_polar(1.0, 0.7 * z.im))
    }

    #[test]
    fn zero_data_gives_zero_coefficients() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let cf = compute_coeffs(&Field::zeros(g, Space::Z)).unwrap();
        for f in [&cf.nu10, &cf.nu20, &cf.nu11, &cf.nu21, &cf.nu22] {
            assert_eq!(f.norm_sup(), 0.0);
        }
    }

    #[test]
    fn closed_forms_follow_the_recursion() {
        let g = GridSpec::new(128, 10.0).unwrap();
        let q = bump(g);
        let cf = compute_coeffs(&q).unwrap();
        for (a, b) in cf.nu20.data().iter().zip(q.data()) {
            assert_eq!(*a, b.conj() * 0.5);
        }
        let rep = recursion_check(&q).unwrap();
        assert!(rep.max_defect() < 1e-10, "{rep:?}");
        assert!(rep.nu22_plus_reading > 1e-2, "{rep:?}");
    }

    #[test]
    fn dbar_h_matches_finite_differences() {
        let h = FarFieldProfile { coeffs: vec![c(1.0), C::new(0.5, -0.2), c(0.3)], radius: 2.0 };
        let eps = 1e-6;
        for k in [C::new(2.5, 1.0), C::new(-1.2, 2.9), C::new(0.3, -3.1)] {
            let dx = (h.h(k + eps) - h.h(k - eps)) / (2.0 * eps);
            let dy = (h.h(k + C::new(0.0, eps)) - h.h(k - C::new(0.0, eps))) / (2.0 * eps);
            let fd = (dx + C::new(0.0, 1.0) * dy) * 0.5;
            assert!((fd - h.dbar_h(k)).norm() < 1e-7, "{k}");
        }
    }

    #[test]
    fn moment_identity() {
        let g = GridSpec::with_k_half_width(512, 64.0).unwrap();
        let zero = FarFieldProfile { coeffs: vec![], radius: 8.0 };
        assert_eq!(moment_identity_check(&zero, 0, g).unwrap().defect, 0.0);
        assert!(moment_identity_check(&FarFieldProfile::monomial(0, 8.0), 0, g).unwrap().defect < 1e-4);
        assert!(moment_identity_check(&FarFieldProfile::monomial(2, 8.0), 2, g).unwrap().defect < 1e-3);
        // Lower coefficients do not leak into higher moments.
        let mixed = FarFieldProfile { coeffs: vec![c(2.0), c(-1.0), C::new(0.0, 3.0)], radius: 8.0 };
        let m = moment_identity_check(&mixed, 1, g).unwrap();
        assert!(m.defect < 1e-6, "{m:?}");
        assert!(moment_identity_check(&mixed, 1, GridSpec::with_k_half_width(64, 8.0).unwrap()).is_err());
    }

    #[test]
    fn fit_on_zero_data_is_zero() {
        let g = GridSpec::new(128, 8.0).unwrap();
        let fit = fit_expansion(&Field::zeros(g, Space::Z), c(0.0), &[4.0, 6.0, 8.0], &SolverConfig::default()).unwrap();
        assert_eq!([fit.nu10, fit.nu20, fit.nu11, fit.nu21], [c(0.0); 4]);
        assert_eq!(fit.residual, 0.0);
    }

    #[test]
    fn bad_ladders_are_refused() {
        let g = GridSpec::new(32, 8.0).unwrap();
        let q = Field::zeros(g, Space::Z);
        let cfg = SolverConfig::default();
        assert!(matches!(fit_expansion(&q, c(0.0), &[8.0, 4.0], &cfg), Err(Error::Precondition(_))));
        assert!(matches!(fit_expansion(&q, c(0.0), &[2.0, 4.0], &cfg), Err(Error::Precondition(_))));
        assert!(matches!(fit_expansion(&q, c(0.0), &[8.0], &cfg), Err(Error::IllConditioned(_))));
        assert!(matches!(fit_expansion(&q, c(0.0), &[1e6, 1e6 + 1e-3], &cfg), Err(Error::IllConditioned(_))));
        assert!(matches!(fit_expansion(&q, c(0.0), &[4.0, 8.0], &cfg), Err(Error::Aliasing { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn square_of_the_cauchy_transform(
            amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
            centres in prop::collection::vec((-0.75f64..0.75, -0.75f64..0.75), 3),
            width in 0.5f64..0.9,
        ) {
            let g = GridSpec::new(256, 12.0).unwrap();
            let f = Field::from_fn(g, Space::Z, |z| {
                amps.iter().zip(&centres).map(|(a, c0)| {
                    C::new(a.0, a.1) * (-(z - C::new(c0.0, c0.1)).norm_sqr() / (width * width)).exp()
                }).sum()
            });
            let pf = cauchy(&f);
            let lhs = pf.mul(&pf).unwrap();
            let rhs = cauchy(&f.mul(&pf).unwrap()).scale(c(2.0));
            let dist = inner_distance(&lhs, &rhs).unwrap();
            prop_assert!(dist < 1e-9, "{dist:e}");
        }
    }
}
