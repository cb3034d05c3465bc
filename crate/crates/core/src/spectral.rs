//! Discrete transforms and multipliers shared by every solver.
//!
//! Conventions:
//! * `e_k(z) = exp(conj(k z) - k z) = exp(-2i(k1 y + k2 x))`, symmetric in `k, z`.
//! * `F psi(k) = -(1/pi) int e_k(z) psi(z) dm(z)` and
//!   `F^{-1} r(z) = -(1/pi) int conj(e_k(z)) r(k) dm(k)`.
//!   On the dual lattice of a [`GridSpec`] both are evaluated exactly by one
//!   FFT each, `F^{-1} F = id` to rounding, and `|F psi|_K = |psi|_Z` with
//!   quadrature norms on each side.
//! * `P = dbar^{-1}` is the Cauchy transform `(1/pi) int f(w)/(z - w) dm(w)`.
//!   The discrete version is exact for data supported in the inner half of the
//!   box, evaluated anywhere in that inner half.
//! * The pairing is `<f, g> = -(1/pi) int conj(f) g dm`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Plane, Space};
use crate::ops::{PlaneOps, Symbol};

type C = Complex64;

/// `e_k(z)`.
#[inline]
pub fn e_k(k: C, z: C) -> C {
    let phase = -2.0 * (k.re * z.im + k.im * z.re);
    C::new(phase.cos(), phase.sin())
}

/// `f(z) e_k(z)` on the z-plane, or `f(k) e_z(k)` on the k-plane.
pub fn ek_multiply(f: &Field, p: C) -> Field {
    f.map_with_point(|w, v| v * e_k(p, w))
}

/// `<f, g> = -(1/pi) d^2 sum conj(f) g`, summed in storage order.
pub fn pairing(f: &Field, g: &Field) -> Result<C> {
    f.check_compatible(g)?;
    let s: C = f.data().iter().zip(g.data()).map(|(a, b)| a.conj() * b).sum();
    Ok(s * (-f.plane().cell_area() / std::f64::consts::PI))
}

fn apply(f: &Field, s: Symbol) -> Field {
    let ops = PlaneOps::shared(f.plane());
    let mut out = f.clone();
    ops.apply(s, out.data_mut());
    out
}

/// `P f = dbar^{-1} f`.
pub fn cauchy(f: &Field) -> Field {
    apply(f, Symbol::Cauchy)
}

/// `Pbar f = conj(P conj f)`.
pub fn cauchy_bar(f: &Field) -> Field {
    cauchy(&f.conj()).conj()
}

/// L2 adjoint `P^*`; equals `-Pbar`.
pub fn cauchy_adjoint(f: &Field) -> Field {
    apply(f, Symbol::CauchyAdjoint)
}

/// Periodic `dbar^{-1}` on the torus, mean dropped.
pub fn cauchy_periodic(f: &Field) -> Field {
    apply(f, Symbol::CauchyPeriodic)
}

/// Periodic Beurling transform `S = d dbar^{-1}`.
pub fn beurling(f: &Field) -> Field {
    apply(f, Symbol::Beurling)
}

pub fn dbar(f: &Field) -> Field {
    apply(f, Symbol::Dbar)
}

pub fn d(f: &Field) -> Field {
    apply(f, Symbol::D)
}

/// Applies the multiplier `sigma(xi1, xi2)` for modes `exp(i(xi1 x + xi2 y))`.
pub fn multiplier(f: &Field, sigma: impl Fn(f64, f64) -> C) -> Field {
    let ops = PlaneOps::shared(f.plane());
    let table = ops.build_symbol(sigma);
    let mut out = f.clone();
    ops.apply_table(&table, out.data_mut());
    out
}

fn checkerboard(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `F : Z -> K`.
pub fn fourier_forward(psi: &Field) -> Result<Field> {
    psi.expect_space(Space::Z)?;
    let grid = psi.grid();
    let n = grid.n;
    let ops = PlaneOps::shared(psi.plane());
    let mut buf = psi.data().to_vec();
    let mut scratch = ops.scratch();
    ops.forward_raw(&mut buf, &mut scratch);
    let h = psi.plane().spacing;
    let c = -h * h / std::f64::consts::PI;
    let mut out = vec![C::new(0.0, 0.0); n * n];
    for i2 in 0..n {
        let s2 = (i2 + n / 2) % n;
        for i1 in 0..n {
            let s1 = (i1 + n / 2) % n;
            out[i2 * n + i1] = buf[s2 * n + s1] * (c * checkerboard(i1 + i2));
        }
    }
    Field::from_vec(grid, Space::K, out)
}

/// `F` with an explicit request that `|k| <= k_max` be represented.
pub fn fourier_forward_range(psi: &Field, k_max: f64) -> Result<Field> {
    let available = psi.grid().plane(Space::K).half_width;
    if k_max > available {
        return Err(Error::Aliasing { requested: k_max, available });
    }
    fourier_forward(psi)
}

/// `F^{-1} : K -> Z`.
pub fn fourier_inverse(r: &Field) -> Result<Field> {
    r.expect_space(Space::K)?;
    let grid = r.grid();
    let n = grid.n;
    let ops = PlaneOps::shared(grid.plane(Space::Z));
    let dk = r.plane().spacing;
    let c = -dk * dk / std::f64::consts::PI;
    let mut buf = vec![C::new(0.0, 0.0); n * n];
    let data = r.data();
    for i2 in 0..n {
        let s2 = (i2 + n / 2) % n;
        for i1 in 0..n {
            let s1 = (i1 + n / 2) % n;
            buf[s2 * n + s1] = data[i2 * n + i1] * (c * checkerboard(i1 + i2));
        }
    }
    let mut scratch = ops.scratch();
    ops.inverse_raw(&mut buf, &mut scratch);
    Field::from_vec(grid, Space::Z, buf)
}

/// Radius beyond which `|f| <= threshold * max|f|`.
pub fn effective_radius(f: &Field, threshold: f64) -> f64 {
    let plane = f.plane();
    let cut = threshold * f.norm_sup();
    f.data()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > cut)
        .map(|(i, _)| plane.point_at(i).norm())
        .fold(0.0, f64::max)
}

/// Relative magnitude below which spectral data count as absent when sizing
/// the oscillation budget.
pub const BUDGET_THRESHOLD: f64 = 1e-6;

/// Largest `|t|` for which `exp(4it Re k^2) r` stays resolved on the dual grid.
///
/// The phase changes by `8 t |k| dk` per k-cell, and the pulse it launches
/// travels to `|z| = 4 t |k|`; both stay inside the grid while
/// `t <= L / (8 k_eff)`, with `k_eff` the effective support radius of `r`.
pub fn oscillation_budget(r: &Field) -> Result<f64> {
    r.expect_space(Space::K)?;
    let k_eff = effective_radius(r, BUDGET_THRESHOLD);
    if k_eff == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(r.grid().half_width / (8.0 * k_eff))
}

pub fn check_budget(r: &Field, t: f64) -> Result<()> {
    let t_max = oscillation_budget(r)?;
    if t.abs() > t_max {
        Err(Error::Budget { t, t_max })
    } else {
        Ok(())
    }
}

/// Copies the centred `m x m` block of a plane's samples.
pub(crate) fn extract_window(data: &[C], n: usize, m: usize) -> Vec<C> {
    let off = (n - m) / 2;
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        out.extend_from_slice(&data[(off + r) * n + off..(off + r) * n + off + m]);
    }
    out
}

/// Smallest even window size on `plane` that keeps the `support`-radius disc
/// and all pair separations inside the free-space range of [`cauchy`].
pub(crate) fn window_size(plane: &Plane, support: f64) -> usize {
    let need = (4.0 * support / plane.spacing).ceil() as usize + 8;
    let mut m = need + need % 2;
    while !smooth_size(m) {
        m += 2;
    }
    m.min(plane.n)
}

fn smooth_size(mut m: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}
