//! Restarted GMRES for matrix-free complex operators.

use num_complex::Complex64;

type C = Complex64;

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    /// Krylov dimension between restarts.
    pub restart: usize,
    /// Target relative residual `|b - Ax| / |b|`.
    pub tol: f64,
    /// Cap on operator applications across all cycles.
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { restart: 30, tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b`, starting from the contents of `x`.
///
/// `apply(v, out)` must write `A v` into `out`.
pub fn gmres(
    mut apply: impl FnMut(&[C], &mut [C]),
    b: &[C],
    x: &mut [C],
    opts: &GmresOptions,
) -> GmresOutcome {
    let len = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        return GmresOutcome { iterations: 0, residual: 0.0, converged: true };
    }
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut ax = vec![C::new(0.0, 0.0); len];
    let mut basis: Vec<Vec<C>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![C::new(0.0, 0.0); m]; m + 1];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![C::new(0.0, 0.0); m];
    let mut g = vec![C::new(0.0, 0.0); m + 1];

    loop {
        apply(x, &mut ax);
        let mut r: Vec<C> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= opts.tol || iterations >= opts.max_iter {
            return GmresOutcome { iterations, residual: rel, converged: rel <= opts.tol };
        }
        r.iter_mut().for_each(|v| *v /= beta);
        basis.clear();
        basis.push(r);
        g.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        g[0] = C::new(beta, 0.0);

        let mut used = 0;
        for j in 0..m {
            if iterations >= opts.max_iter {
                break;
            }
            let mut w = vec![C::new(0.0, 0.0); len];
            apply(&basis[j], &mut w);
            iterations += 1;
            for i in 0..=j {
                let h = dot(&basis[i], &w);
                hess[i][j] = h;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= h * vk;
                }
            }
            let hnext = norm(&w);
            hess[j + 1][j] = C::new(hnext, 0.0);
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i].conj() * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (c, s) = givens(hess[j][j], hess[j + 1][j]);
            cs[j] = c;
            sn[j] = s;
            hess[j][j] = c * hess[j][j] + s * hess[j + 1][j];
            hess[j + 1][j] = C::new(0.0, 0.0);
            g[j + 1] = -s.conj() * g[j];
            g[j] *= c;
            used = j + 1;
            let est = g[j + 1].norm() / bnorm;
            if est <= opts.tol || hnext == 0.0 {
                break;
            }
            w.iter_mut().for_each(|v| *v /= hnext);
            basis.push(w);
        }

        let mut y = vec![C::new(0.0, 0.0); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= hess[i][k] * y[k];
            }
            y[i] = s / hess[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[k]) {
                *xi += yk * vi;
            }
        }
    }
}

/// Rotation with `c` real that zeroes `b` in `(a, b)`.
fn givens(a: C, b: C) -> (f64, C) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, C::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = (an * an + bn * bn).sqrt();
    let phase = a / an;
    (an / r, phase * b.conj() / r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_dense(a: &[Vec<C>]) -> impl FnMut(&[C], &mut [C]) + '_ {
        move |v, out| {
            for (i, row) in a.iter().enumerate() {
                out[i] = row.iter().zip(v).map(|(x, y)| x * y).sum();
            }
        }
    }

    #[test]
    fn solves_a_nonsymmetric_complex_system() {
        let n = 12;
        let a: Vec<Vec<C>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let base = if i == j { 4.0 } else { 0.0 };
                        C::new(base + ((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.2 - 0.2)
                    })
                    .collect()
            })
            .collect();
        let want: Vec<C> = (0..n).map(|i| C::new(i as f64, 1.0 - i as f64 * 0.5)).collect();
        let mut b = vec![C::new(0.0, 0.0); n];
        apply_dense(&a)(&want, &mut b);
        let mut x = vec![C::new(0.0, 0.0); n];
        let out = gmres(apply_dense(&a), &b, &mut x, &GmresOptions { restart: 5, tol: 1e-12, max_iter: 500 });
        assert!(out.converged, "{out:?}");
        for (xi, wi) in x.iter().zip(&want) {
            assert!((xi - wi).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let a = vec![vec![C::new(1.0, 0.0)]];
        let mut x = vec![C::new(3.0, 0.0)];
        let out = gmres(apply_dense(&a), &[C::new(0.0, 0.0)], &mut x, &GmresOptions::default());
        assert_eq!(out.iterations, 0);
        assert_eq!(x[0], C::new(0.0, 0.0));
    }

    #[test]
    fn reports_failure_when_capped() {
        let n = 30;
        let a: Vec<Vec<C>> = (0..n)
            .map(|i| (0..n).map(|j| C::new(if (i + 1) % n == j { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        let mut b = vec![C::new(0.0, 0.0); n];
        b[0] = C::new(1.0, 0.0);
        let mut x = vec![C::new(0.0, 0.0); n];
        let out = gmres(apply_dense(&a), &b, &mut x, &GmresOptions { restart: 4, tol: 1e-12, max_iter: 8 });
        assert!(!out.converged);
        assert!(out.iterations <= 8);
    }
}
