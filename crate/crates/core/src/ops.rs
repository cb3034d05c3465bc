//! FFT-backed Fourier multipliers on a single periodic plane.
//!
//! A 2-D transform is done as row FFTs, an in-place transpose and row FFTs
//! again, which leaves the spectrum in transposed order `[xi_x][xi_y]`. Symbols
//! are stored in that same order with the `1/n^2` normalisation folded in, so
//! applying a multiplier costs two 2-D passes and no extra transposes.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::grid::Plane;

type C = Complex64;

/// Multipliers with a cached symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    /// `d/dzbar`, symbol `(i/2)(xi1 + i xi2)`.
    Dbar,
    /// `d/dz`, symbol `(i/2)(xi1 - i xi2)`.
    D,
    /// Free-space inverse of `d/dzbar` for data supported in the inner half of
    /// the box: the Cauchy kernel `1/(pi z)` truncated at `|z| = a`, whose
    /// transform is `-2i (1 - J0(a|xi|)) / (xi1 + i xi2)`.
    Cauchy,
    /// L2 adjoint of [`Symbol::Cauchy`].
    CauchyAdjoint,
    /// Periodic inverse of `d/dzbar` (zero mode dropped).
    CauchyPeriodic,
    /// Periodic Beurling transform `(xi1 - i xi2)/(xi1 + i xi2)`, zero mode dropped.
    Beurling,
}

impl Symbol {
    fn value(self, a: f64, xi1: f64, xi2: f64) -> C {
        let i = C::new(0.0, 1.0);
        let zeta = C::new(xi1, xi2);
        let origin = xi1 == 0.0 && xi2 == 0.0;
        match self {
            Symbol::Dbar => 0.5 * i * zeta,
            Symbol::D => 0.5 * i * zeta.conj(),
            Symbol::Cauchy | Symbol::CauchyAdjoint => {
                if origin {
                    return C::new(0.0, 0.0);
                }
                let r = zeta.norm();
                let p = -2.0 * i * (1.0 - libm::j0(a * r)) / zeta;
                if self == Symbol::Cauchy {
                    p
                } else {
                    p.conj()
                }
            }
            Symbol::CauchyPeriodic => {
                if origin {
                    C::new(0.0, 0.0)
                } else {
                    -2.0 * i / zeta
                }
            }
            Symbol::Beurling => {
                if origin {
                    C::new(0.0, 0.0)
                } else {
                    zeta.conj() / zeta
                }
            }
        }
    }
}

pub struct PlaneOps {
    plane: Plane,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    symbols: HashMap<Symbol, OnceLock<Vec<C>>>,
}

static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<PlaneOps>>>> = OnceLock::new();

const ALL_SYMBOLS: [Symbol; 6] = [
    Symbol::Dbar,
    Symbol::D,
    Symbol::Cauchy,
    Symbol::CauchyAdjoint,
    Symbol::CauchyPeriodic,
    Symbol::Beurling,
];

impl PlaneOps {
    pub fn new(plane: Plane) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(plane.n);
        let inv = planner.plan_fft_inverse(plane.n);
        let symbols = ALL_SYMBOLS.iter().map(|&s| (s, OnceLock::new())).collect();
        PlaneOps { plane, fwd, inv, symbols }
    }

    /// Process-wide shared instance for `plane`.
    pub fn shared(plane: Plane) -> Arc<PlaneOps> {
        let key = (plane.n, plane.half_width.to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        if map.len() > 64 {
            map.clear();
        }
        map.entry(key).or_insert_with(|| Arc::new(PlaneOps::new(plane))).clone()
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn n(&self) -> usize {
        self.plane.n
    }

    /// Normalised symbol table in transposed spectral order.
    pub fn symbol(&self, s: Symbol) -> &[C] {
        self.symbols[&s].get_or_init(|| {
            let a = self.plane.half_width;
            self.build_symbol(|x1, x2| s.value(a, x1, x2))
        })
    }

    /// Tabulates an arbitrary multiplier `sigma(xi1, xi2)`.
    pub fn build_symbol(&self, sigma: impl Fn(f64, f64) -> C) -> Vec<C> {
        let n = self.plane.n;
        let norm = 1.0 / (n * n) as f64;
        let mut out = Vec::with_capacity(n * n);
        for v1 in 0..n {
            let xi1 = self.plane.wavenumber(v1);
            for v2 in 0..n {
                out.push(sigma(xi1, self.plane.wavenumber(v2)) * norm);
            }
        }
        out
    }

    pub fn apply(&self, s: Symbol, data: &mut [C]) {
        let sym = self.symbol(s);
        self.apply_table(sym, data);
    }

    /// Applies a table produced by [`PlaneOps::build_symbol`] or [`PlaneOps::symbol`].
    pub fn apply_table(&self, sym: &[C], data: &mut [C]) {
        let mut scratch = self.scratch();
        self.forward_raw(data, &mut scratch);
        for (d, s) in data.iter_mut().zip(sym) {
            *d *= s;
        }
        self.inverse_raw(data, &mut scratch);
    }

    pub fn scratch(&self) -> Vec<C> {
        let len = self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len());
        vec![C::new(0.0, 0.0); len]
    }

    /// Unnormalised forward DFT; output in transposed order `[v_x][v_y]`.
    pub fn forward_raw(&self, data: &mut [C], scratch: &mut [C]) {
        let n = self.plane.n;
        self.fwd.process_with_scratch(data, scratch);
        transpose_in_place(data, n);
        self.fwd.process_with_scratch(data, scratch);
    }

    /// Unnormalised inverse DFT taking transposed order back to `[y][x]`.
    pub fn inverse_raw(&self, data: &mut [C], scratch: &mut [C]) {
        let n = self.plane.n;
        self.inv.process_with_scratch(data, scratch);
        transpose_in_place(data, n);
        self.inv.process_with_scratch(data, scratch);
    }
}

fn transpose_in_place(data: &mut [C], n: usize) {
    const B: usize = 16;
    let mut bi = 0;
    while bi < n {
        let mut bj = bi;
        while bj < n {
            for i in bi..(bi + B).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
            bj += B;
        }
        bi += B;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_roundtrip() {
        let n = 37;
        let orig: Vec<C> = (0..n * n).map(|i| C::new(i as f64, 0.0)).collect();
        let mut d = orig.clone();
        transpose_in_place(&mut d, n);
        assert_eq!(d[3 * n + 5], orig[5 * n + 3]);
        transpose_in_place(&mut d, n);
        assert_eq!(d, orig);
    }

    #[test]
    fn derivative_of_plane_wave() {
        let plane = Plane::new(32, 3.0);
        let ops = PlaneOps::new(plane);
        let (xi1, xi2) = (plane.wavenumber(3), plane.wavenumber(30));
        let wave = |z: C| (C::new(0.0, xi1 * z.re + xi2 * z.im)).exp();
        let mut d: Vec<C> = (0..32 * 32).map(|i| wave(plane.point_at(i))).collect();
        ops.apply(Symbol::Dbar, &mut d);
        let want = 0.5 * C::new(0.0, 1.0) * C::new(xi1, xi2);
        for (i, v) in d.iter().enumerate() {
            assert!((v - want * wave(plane.point_at(i))).norm() < 1e-12);
        }
    }
}
