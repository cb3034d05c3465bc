//! Solver for the coupled dbar system
//!
//! ```text
//! dbar m1 = (1/2) e_p V conj(m2),   dbar m2 = (1/2) e_p V conj(m1),   (m1, m2) -> (1, 0)
//! ```
//!
//! with potential `V` and parameter `p`. In the z-plane (`V = q`, `p = k`) this
//! is the direct problem for `mu`; in the k-plane (`V = conj(r)`, `p = z`) it is
//! the inverse problem for `nu`. Writing `T psi = (1/2) P(e_p V conj psi)`, the
//! system is `m1 = 1 + T m2`, `m2 = T m1`. `T` is antilinear but `T^2` is
//! complex linear, so `(I - T^2) x = T^2 1` with `x = m1 - 1` is solved by
//! restarted GMRES and then `m2 = T m1`.
//!
//! `P` is the true inverse of `dbar`, so `m2 ~ +(1/(pi z)) int (1/2) e_p V conj(m1)`.
//! For the direct problem that is `mu2 ~ -r(k)/(2z)`.
//!
//! The free-space `P` is exact for `|w| <= a/2`, so potentials must carry
//! negligible mass outside the inner half of their plane.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Plane, Space};
use crate::krylov::{gmres, GmresOptions};
use crate::ops::{PlaneOps, Symbol};
use crate::spectral::{dbar, e_k};

type C = Complex64;

/// Seed of the random start vector used by every norm probe.
pub const PROBE_SEED: u64 = 0x5eed_d8a2;

/// `|T^2|` below which a requested Neumann solve is allowed to proceed.
pub const NEUMANN_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Fixed-point iteration `x <- T^2 1 + T^2 x`, guarded by a norm probe.
    Neumann,
    /// Restarted GMRES on `(I - T^2) x = T^2 1`.
    Krylov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Worker count for grid sweeps; 0 uses every available core.
    #[serde(default)]
    pub threads: usize,
    /// Emit one JSON line per solve on stderr.
    #[serde(default)]
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::Krylov, tol: 1e-10, max_iter: 200, restart: 30, threads: 0, verbose: false }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidConfig(format!("tol = {} must lie in (0, 1)", self.tol)));
        }
        if self.restart == 0 || self.max_iter == 0 {
            return Err(Error::InvalidConfig("restart and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Convergence record of one solve.
///
/// `amplification = |x| / |T^2 1|` is a cheap lower bound for
/// `|(I - T^2)^{-1}|`; large values flag near-singular problems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub amplification: f64,
    pub converged: bool,
    pub method: Method,
}

#[derive(Clone, Debug)]
pub struct MuSolution {
    pub k: C,
    pub mu1: Field,
    pub mu2: Field,
    pub stats: SolveStats,
}

#[derive(Clone, Debug)]
pub struct NuSolution {
    pub z: C,
    pub nu1: Field,
    pub nu2: Field,
    pub stats: SolveStats,
}

/// The operator `T` for one potential and parameter on one plane.
pub(crate) struct Kernel {
    ops: Arc<PlaneOps>,
    weight: Vec<C>,
}

impl Kernel {
    pub(crate) fn new(plane: Plane, potential: &[C], p: C) -> Self {
        let ops = PlaneOps::shared(plane);
        let weight = potential
            .iter()
            .enumerate()
            .map(|(i, &v)| if v == C::new(0.0, 0.0) { v } else { 0.5 * e_k(p, plane.point_at(i)) * v })
            .collect();
        Kernel { ops, weight }
    }

    /// `(1/2) e_p V` at every sample.
    pub(crate) fn weight(&self) -> &[C] {
        &self.weight
    }

    /// `out = T psi`.
    pub(crate) fn apply_t(&self, psi: &[C], out: &mut [C]) {
        for ((o, w), s) in out.iter_mut().zip(&self.weight).zip(psi) {
            *o = w * s.conj();
        }
        self.ops.apply(Symbol::Cauchy, out);
    }

    pub(crate) fn apply_t2(&self, psi: &[C], out: &mut [C]) {
        let mut tmp = vec![C::new(0.0, 0.0); psi.len()];
        self.apply_t(psi, &mut tmp);
        self.apply_t(&tmp, out);
    }

    /// `out = (T^2)^* psi`, the L2 adjoint of the linear map `T^2`.
    ///
    /// With `W` multiplication by the weight, `T^2 = P W Pbar Wbar`, so the
    /// adjoint is `W Pbar^* Wbar P^*`; `Pbar^*` has symbol `p(-xi)`, which is
    /// reflection, `P`, reflection.
    pub(crate) fn apply_t2_adjoint(&self, psi: &[C], out: &mut [C]) {
        let n = self.ops.n();
        out.copy_from_slice(psi);
        self.ops.apply(Symbol::CauchyAdjoint, out);
        for (o, w) in out.iter_mut().zip(&self.weight) {
            *o *= w.conj();
        }
        reflect(out, n);
        self.ops.apply(Symbol::Cauchy, out);
        reflect(out, n);
        for (o, w) in out.iter_mut().zip(&self.weight) {
            *o *= w;
        }
    }

    /// Power-iteration estimate of `|T^2|` from a fixed-seed random start.
    pub(crate) fn t2_norm(&self, iters: usize) -> f64 {
        if self.weight.iter().all(|w| *w == C::new(0.0, 0.0)) {
            return 0.0;
        }
        let len = self.weight.len();
        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
        let mut v: Vec<C> = (0..len).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let mut av = vec![C::new(0.0, 0.0); len];
        let mut est = 0.0;
        for _ in 0..iters {
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            self.apply_t2(&v, &mut av);
            est = norm(&av);
            if est == 0.0 {
                return 0.0;
            }
            self.apply_t2_adjoint(&av, &mut v);
        }
        est
    }

    /// Returns `(m1, m2, stats)`, warm-starting from `guess = m1 - 1` if given.
    pub(crate) fn solve(&self, cfg: &SolverConfig, guess: Option<&[C]>) -> (Vec<C>, Vec<C>, SolveStats) {
        let len = self.weight.len();
        let zero = C::new(0.0, 0.0);
        let ones = vec![C::new(1.0, 0.0); len];
        let mut t1 = vec![zero; len];
        self.apply_t(&ones, &mut t1);
        let mut b = vec![zero; len];
        self.apply_t(&t1, &mut b);
        let bnorm = norm(&b);
        let mut x = match guess {
            Some(g) if bnorm > 0.0 => g.to_vec(),
            _ => vec![zero; len],
        };
        let method = match cfg.method {
            Method::Neumann if bnorm == 0.0 || self.t2_norm(8) < NEUMANN_THRESHOLD => Method::Neumann,
            _ => Method::Krylov,
        };
        let mut tmp = vec![zero; len];
        let (iterations, residual, converged) = match method {
            Method::Krylov => {
                let opts = GmresOptions { restart: cfg.restart, tol: cfg.tol, max_iter: cfg.max_iter };
                let out = gmres(
                    |v, o| {
                        self.apply_t(v, &mut tmp);
                        self.apply_t(&tmp, o);
                        for (oi, vi) in o.iter_mut().zip(v) {
                            *oi = vi - *oi;
                        }
                    },
                    &b,
                    &mut x,
                    &opts,
                );
                (out.iterations, out.residual, out.converged)
            }
            Method::Neumann => self.neumann(cfg, &b, bnorm, &mut x),
        };
        let mut m2 = t1;
        self.apply_t(&x, &mut tmp);
        for (m, t) in m2.iter_mut().zip(&tmp) {
            *m += t;
        }
        let amplification = if bnorm > 0.0 { norm(&x) / bnorm } else { 0.0 };
        let m1 = x.iter().map(|v| v + 1.0).collect();
        (m1, m2, SolveStats { iterations, residual, amplification, converged, method })
    }

    fn neumann(&self, cfg: &SolverConfig, b: &[C], bnorm: f64, x: &mut [C]) -> (usize, f64, bool) {
        if bnorm == 0.0 {
            return (0, 0.0, true);
        }
        let mut t2x = vec![C::new(0.0, 0.0); b.len()];
        let mut it = 0;
        loop {
            self.apply_t2(x, &mut t2x);
            let res = x.iter().zip(&t2x).zip(b).map(|((xi, ti), bi)| (bi - (xi - ti)).norm_sqr()).sum::<f64>().sqrt()
                / bnorm;
            if res <= cfg.tol || it >= cfg.max_iter || !res.is_finite() {
                return (it, res, res <= cfg.tol);
            }
            for ((xi, ti), bi) in x.iter_mut().zip(&t2x).zip(b) {
                *xi = bi + ti;
            }
            it += 1;
        }
    }
}

fn reflect(data: &mut [C], n: usize) {
    for r in 0..n {
        for c in 0..n {
            let (r2, c2) = ((n - r) % n, (n - c) % n);
            let (i, j) = (r * n + c, r2 * n + c2);
            if i < j {
                data.swap(i, j);
            }
        }
    }
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn telemetry(cfg: &SolverConfig, label: &str, p: C, stats: &SolveStats) {
    if cfg.verbose {
        eprintln!(
            "{{\"solve\":\"{label}\",\"param\":[{:e},{:e}],\"method\":\"{:?}\",\"iterations\":{},\"residual\":{:e},\"amplification\":{:e}}}",
            p.re, p.im, stats.method, stats.iterations, stats.residual, stats.amplification
        );
    }
}

/// Runs `f(0..count)` on a pool of `threads` workers (0 = all cores).
///
/// Results come back in index order whatever the width.
pub fn sweep<T: Send>(threads: usize, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

fn run(potential: &Field, p: C, cfg: &SolverConfig, guess: Option<&Field>, label: &str) -> Result<(Field, Field, SolveStats)> {
    cfg.validate()?;
    if let Some(g) = guess {
        potential.check_compatible(g)?;
    }
    let kernel = Kernel::new(potential.plane(), potential.data(), p);
    let x0: Option<Vec<C>> = guess.map(|g| g.data().iter().map(|v| v - 1.0).collect());
    let (m1, m2, stats) = kernel.solve(cfg, x0.as_deref());
    telemetry(cfg, label, p, &stats);
    if !stats.converged {
        return Err(Error::NoConvergence { residual: stats.residual, iterations: stats.iterations });
    }
    Ok((
        Field::from_vec(potential.grid(), potential.space(), m1)?,
        Field::from_vec(potential.grid(), potential.space(), m2)?,
        stats,
    ))
}

/// Solves the direct problem for `mu(., k)` given `q` on the z-plane.
pub fn solve_mu(q: &Field, k: C, cfg: &SolverConfig) -> Result<MuSolution> {
    q.expect_space(Space::Z)?;
    let (mu1, mu2, stats) = run(q, k, cfg, None, "mu")?;
    Ok(MuSolution { k, mu1, mu2, stats })
}

/// [`solve_mu`] started from a caller-supplied guess for `mu1`.
pub fn solve_mu_from(q: &Field, k: C, cfg: &SolverConfig, mu1_guess: &Field) -> Result<MuSolution> {
    q.expect_space(Space::Z)?;
    let (mu1, mu2, stats) = run(q, k, cfg, Some(mu1_guess), "mu")?;
    Ok(MuSolution { k, mu1, mu2, stats })
}

/// Solves the inverse problem for `nu(z, .)` given `r` on the k-plane.
pub fn solve_nu(r: &Field, z: C, cfg: &SolverConfig) -> Result<NuSolution> {
    r.expect_space(Space::K)?;
    let (nu1, nu2, stats) = run(&r.conj(), z, cfg, None, "nu")?;
    Ok(NuSolution { z, nu1, nu2, stats })
}

/// `T psi = (1/2) P(e_k q conj psi)`.
pub fn apply_t(q: &Field, k: C, psi: &Field) -> Result<Field> {
    q.check_compatible(psi)?;
    let kernel = Kernel::new(q.plane(), q.data(), k);
    let mut out = psi.clone();
    kernel.apply_t(psi.data(), out.data_mut());
    Ok(out)
}

/// `T^2 psi = (1/4) P(e_k q Pbar(e_{-k} conj(q) psi))`, evaluated in that form.
pub fn apply_t2(q: &Field, k: C, psi: &Field) -> Result<Field> {
    q.check_compatible(psi)?;
    let inner = q.map_with_point(|z, v| e_k(-k, z) * v.conj()).mul(psi)?;
    let pbar = crate::spectral::cauchy_bar(&inner);
    let outer = q.map_with_point(|z, v| e_k(k, z) * v).mul(&pbar)?;
    Ok(crate::spectral::cauchy(&outer).scale(C::new(0.25, 0.0)))
}

/// Power-iteration estimate of `|T^2|` on the discrete L2 space.
pub fn t2_norm_probe(q: &Field, k: C, iters: usize) -> Result<f64> {
    if iters < 5 {
        return Err(Error::InvalidConfig(format!("iters = {iters} must be at least 5")));
    }
    Ok(Kernel::new(q.plane(), q.data(), k).t2_norm(iters))
}

/// `[T^2 1, T^4 1, ..., T^{2N} 1]`, the terms of the Neumann series for `mu1 - 1`.
pub fn neumann_terms(q: &Field, k: C, count: usize) -> Result<Vec<Field>> {
    if count == 0 {
        return Err(Error::InvalidConfig("need at least one Neumann term".into()));
    }
    let kernel = Kernel::new(q.plane(), q.data(), k);
    let mut cur = vec![C::new(1.0, 0.0); q.grid().len()];
    let mut next = cur.clone();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        kernel.apply_t2(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        out.push(Field::from_vec(q.grid(), q.space(), cur.clone())?);
    }
    Ok(out)
}

/// Relative residual of the dbar system, measured on `|w| <= a/2`.
fn system_residual(potential: &Field, p: C, m1: &Field, m2: &Field) -> Result<f64> {
    potential.check_compatible(m1)?;
    potential.check_compatible(m2)?;
    let half = potential.plane().half_width * 0.5;
    let w = potential.map_with_point(|z, v| 0.5 * e_k(p, z) * v);
    let rhs1 = w.mul(&m2.conj())?;
    let rhs2 = w.mul(&m1.conj())?;
    let d1 = dbar(m1).sub(&rhs1)?.norm_l2_disk(half);
    let d2 = dbar(m2).sub(&rhs2)?.norm_l2_disk(half);
    let scale = rhs1.norm_l2_disk(half) + rhs2.norm_l2_disk(half);
    Ok(if scale > 0.0 { (d1 + d2) / scale } else { d1 + d2 })
}

pub fn mu_residual(q: &Field, sol: &MuSolution) -> Result<f64> {
    system_residual(q, sol.k, &sol.mu1, &sol.mu2)
}

pub fn nu_residual(r: &Field, sol: &NuSolution) -> Result<f64> {
    system_residual(&r.conj(), sol.z, &sol.nu1, &sol.nu2)
}

/// Independent estimate of `r(k)` from the far field of `mu2`.
///
/// Fits `mu2 ~ c/z` by least squares on `L/4 < |z| < L/2`. Because `P` is the
/// true inverse of `dbar`, `mu2 ~ -r/(2z)` and the estimate is `-2c`.
pub fn extract_r_farfield(q: &Field, k: C, cfg: &SolverConfig) -> Result<C> {
    let sol = solve_mu(q, k, cfg)?;
    farfield_coefficient(&sol.mu2).map(|c| -2.0 * c)
}

/// Least-squares `c` in `f ~ c/z` over `L/4 < |z| < L/2`.
pub fn farfield_coefficient(f: &Field) -> Result<C> {
    let plane = f.plane();
    let a = plane.half_width;
    let mut num = C::new(0.0, 0.0);
    let mut den = 0.0;
    for (i, v) in f.data().iter().enumerate() {
        let z = plane.point_at(i);
        let s = z.norm();
        if s > 0.25 * a && s < 0.5 * a {
            let basis = z.inv();
            num += basis.conj() * v;
            den += basis.norm_sqr();
        }
    }
    if den == 0.0 {
        return Err(Error::IllConditioned("no samples in the fitting annulus".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian;
    use crate::grid::GridSpec;

    fn bump(g: GridSpec, amp: f64) -> Field {
        Field::from_fn(g, Space::Z, gaussian(amp, 1.0, C::new(0.0, 0.0)))
    }

    fn random_field(g: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..g.len()).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        Field::from_vec(g, Space::Z, data).unwrap()
    }

    #[test]
    fn zero_potential_gives_trivial_solution() {
        let g = GridSpec::new(32, 8.0).unwrap();
        let q = Field::zeros(g, Space::Z);
        let sol = solve_mu(&q, C::new(1.0, 2.0), &SolverConfig::default()).unwrap();
        assert_eq!(sol.stats.iterations, 0);
        assert!(sol.mu1.data().iter().all(|v| *v == C::new(1.0, 0.0)));
        assert!(sol.mu2.data().iter().all(|v| *v == C::new(0.0, 0.0)));
        assert_eq!(t2_norm_probe(&q, C::new(0.0, 0.0), 5).unwrap(), 0.0);
        let r = Field::zeros(g, Space::K);
        let nu = solve_nu(&r, C::new(0.5, 0.0), &SolverConfig::default()).unwrap();
        assert!(nu.nu1.data().iter().all(|v| *v == C::new(1.0, 0.0)));
        assert!(nu.nu2.data().iter().all(|v| *v == C::new(0.0, 0.0)));
    }

    #[test]
    fn antilinear_and_linear_structure() {
        let g = GridSpec::new(32, 8.0).unwrap();
        let q = bump(g, 1.0);
        let k = C::new(0.4, -0.9);
        let psi = random_field(g, 1);
        let i = C::new(0.0, 1.0);
        let a = apply_t(&q, k, &psi.scale(i)).unwrap();
        let b = apply_t(&q, k, &psi).unwrap().scale(-i);
        assert!(a.sub(&b).unwrap().norm_sup() < 1e-14);
        let t2 = apply_t2(&q, k, &psi).unwrap();
        let tt = apply_t(&q, k, &apply_t(&q, k, &psi).unwrap()).unwrap();
        assert!(t2.rel_l2_error(&tt).unwrap() < 1e-12);
        let lin = apply_t2(&q, k, &psi.scale(i)).unwrap();
        assert!(lin.sub(&t2.scale(i)).unwrap().norm_sup() < 1e-14);
        assert!(apply_t(&q, k, &Field::zeros(g, Space::Z)).unwrap().norm_sup() == 0.0);
    }

    #[test]
    fn t2_adjoint_is_exact() {
        let g = GridSpec::new(32, 8.0).unwrap();
        let q = bump(g, 1.0);
        let kernel = Kernel::new(q.plane(), q.data(), C::new(1.5, 0.5));
        let x = random_field(g, 2);
        let y = random_field(g, 3);
        let mut ax = x.clone();
        kernel.apply_t2(x.data(), ax.data_mut());
        let mut aty = y.clone();
        kernel.apply_t2_adjoint(y.data(), aty.data_mut());
        let lhs: C = ax.data().iter().zip(y.data()).map(|(a, b)| a.conj() * b).sum();
        let rhs: C = x.data().iter().zip(aty.data()).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
    }

    #[test]
    fn solution_satisfies_the_system() {
        let g = GridSpec::new(96, 12.0).unwrap();
        let q = bump(g, 1.0);
        let k = C::new(0.0, 0.0);
        let sol = solve_mu(&q, k, &SolverConfig::default()).unwrap();
        assert!(sol.stats.converged && sol.stats.residual <= 1e-10);
        let res = mu_residual(&q, &sol).unwrap();
        assert!(res < 1e-9, "{res}");
    }

    #[test]
    fn different_starts_agree() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let q = bump(g, 1.0);
        let k = C::new(0.3, 0.2);
        let cfg = SolverConfig::default();
        let a = solve_mu(&q, k, &cfg).unwrap();
        let guess = random_field(g, 9).scale(C::new(0.1, 0.0)).map(|v| v + 1.0);
        let b = solve_mu_from(&q, k, &cfg, &guess).unwrap();
        assert!(a.mu1.sub(&b.mu1).unwrap().norm_l2() < 100.0 * cfg.tol * a.mu1.norm_l2());
    }

    #[test]
    fn neumann_is_used_only_when_certified() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let cfg = SolverConfig { method: Method::Neumann, ..SolverConfig::default() };
        let k = C::new(0.2, 0.5);
        let small = bump(g, 0.3);
        let a = solve_mu(&small, k, &cfg).unwrap();
        assert_eq!(a.stats.method, Method::Neumann);
        let b = solve_mu(&small, k, &SolverConfig::default()).unwrap();
        assert!(a.mu1.rel_l2_error(&b.mu1).unwrap() < 1e-9);
        let big = bump(g, 4.0);
        let c = solve_mu(&big, C::new(0.0, 0.0), &cfg).unwrap();
        assert_eq!(c.stats.method, Method::Krylov);
    }

    #[test]
    fn neumann_partial_sums_improve() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let q = bump(g, 0.1);
        let k = C::new(0.5, 0.0);
        let sol = solve_mu(&q, k, &SolverConfig::default()).unwrap();
        let terms = neumann_terms(&q, k, 2).unwrap();
        let target = sol.mu1.map(|v| v - 1.0);
        let e1 = target.sub(&terms[0]).unwrap().norm_l2();
        let e2 = target.sub(&terms[0].add(&terms[1]).unwrap()).unwrap().norm_l2();
        assert!(e2 <= e1);
        let ratio = terms[1].norm_l2() / terms[0].norm_l2();
        let probe = t2_norm_probe(&q, k, 20).unwrap();
        assert!(ratio <= 3.0 * probe && ratio >= probe / 3.0, "{ratio} {probe}");
    }

    #[test]
    fn probe_is_quadratic_in_amplitude() {
        let g = GridSpec::new(32, 8.0).unwrap();
        let a = t2_norm_probe(&bump(g, 1.0), C::new(0.0, 0.0), 10).unwrap();
        let b = t2_norm_probe(&bump(g, 2.0), C::new(0.0, 0.0), 10).unwrap();
        assert!((b / a - 4.0).abs() < 0.2);
    }

    #[test]
    fn mu_decays_to_one_at_large_k() {
        let g = GridSpec::new(128, 8.0).unwrap();
        let q = bump(g, 1.0);
        let cfg = SolverConfig::default();
        let s0 = solve_mu(&q, C::new(0.0, 0.0), &cfg).unwrap();
        let s20 = solve_mu(&q, C::new(20.0, 0.0), &cfg).unwrap();
        let d0 = s0.mu1.map(|v| v - 1.0).norm_sup();
        let d20 = s20.mu1.map(|v| v - 1.0).norm_sup();
        assert!(d20 < d0, "{d20} {d0}");
    }

    #[test]
    fn far_field_recovers_linear_scattering_data() {
        // For small q, r = Rq is F q up to O(|q|^3), and F of the Gaussian is known.
        let g = GridSpec::new(128, 16.0).unwrap();
        let eps = 1e-3;
        let q = bump(g, eps);
        let k = C::new(0.5, 0.25);
        let r = extract_r_farfield(&q, k, &SolverConfig::default()).unwrap();
        let want = -(-k.norm_sqr()).exp() * eps;
        assert!((r - want).norm() < 1e-2 * eps, "{r} vs {want}");
        let zero = extract_r_farfield(&Field::zeros(g, Space::Z), k, &SolverConfig::default()).unwrap();
        assert_eq!(zero, C::new(0.0, 0.0));
    }

    #[test]
    fn nu_solution_satisfies_its_system() {
        let g = GridSpec::with_k_half_width(96, 12.0).unwrap();
        let r = Field::from_fn(g, Space::K, |k| C::new(-(-k.norm_sqr()).exp(), 0.0));
        let sol = solve_nu(&r, C::new(0.0, 0.0), &SolverConfig::default()).unwrap();
        let res = nu_residual(&r, &sol).unwrap();
        assert!(res < 1e-9, "{res}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let q = Field::zeros(g, Space::Z);
        let cfg = SolverConfig { tol: 0.0, ..SolverConfig::default() };
        assert!(matches!(solve_mu(&q, C::new(0.0, 0.0), &cfg), Err(Error::InvalidConfig(_))));
        assert!(t2_norm_probe(&q, C::new(0.0, 0.0), 2).is_err());
    }

    #[test]
    fn sweep_preserves_order() {
        let v = sweep(3, 10, |i| i * i).unwrap();
        assert_eq!(v, (0..10).map(|i| i * i).collect::<Vec<_>>());
    }
}
