//! Split-step spectral solver for DS-II that never touches the scattering
//! transform. It is the independent oracle for the inverse-scattering solver.
//!
//! The equation is `i q_t + 2(dbar^2 + d^2) q + (g + conj g) q = 0` with
//! `dbar g = -d |q|^2`, i.e. `g = -S(|q|^2)` for the Beurling transform `S`.
//!
//! Frequencies: a mode `exp(i(a x + b y))` has `2(dbar^2 + d^2) = d_x^2 - d_y^2`
//! eigenvalue `b^2 - a^2`, so the linear group multiplies it by
//! `exp(it(b^2 - a^2))`. On the k-lattice `F` pairs `(a, b)` with
//! `(2 k2, 2 k1)` up to sign, so in the coordinates `xi = (2 k1, 2 k2)` of the
//! scattering side the same multiplier reads `exp(it(xi1^2 - xi2^2)) =
//! exp(4it Re k^2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Space;
use crate::ops::{PlaneOps, Symbol};
use crate::spectral::{beurling, cauchy_periodic, check_budget, d, fourier_forward, multiplier};

type C = Complex64;

/// `S(t) q`, the linear DS-II group.
pub fn linear_group(q: &Field, t: f64) -> Result<Field> {
    q.expect_space(Space::Z)?;
    check_budget(&fourier_forward(q)?, t)?;
    Ok(multiplier(q, |a, b| C::from_polar(1.0, t * (b * b - a * a))))
}

/// `g = -S(|q|^2)`.
pub fn nonlocal_g(q: &Field) -> Result<Field> {
    q.expect_space(Space::Z)?;
    Ok(beurling(&q.map(|v| C::new(v.norm_sqr(), 0.0))).scale(C::new(-1.0, 0.0)))
}

/// `g + conj(g)`, the real potential.
pub fn nonlocal_potential(q: &Field) -> Result<Field> {
    Ok(nonlocal_g(q)?.map(|g| C::new(2.0 * g.re, 0.0)))
}

/// The same potential by the integral-equation route, `-2 Re(dbar^{-1} d)(|q|^2)`,
/// applying `d` and the periodic `dbar^{-1}` separately.
pub fn nonlocal_potential_duhamel(q: &Field) -> Result<Field> {
    q.expect_space(Space::Z)?;
    let inner = cauchy_periodic(&d(&q.map(|v| C::new(v.norm_sqr(), 0.0))));
    Ok(inner.map(|v| C::new(-2.0 * v.re, 0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Strang,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Largest allowed step; the actual step divides `t` exactly.
    pub dt: f64,
    pub scheme: Scheme,
    #[serde(default)]
    pub verbose: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig { dt: 1e-3, scheme: Scheme::Strang, verbose: false }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    /// `(steps, step)` with `steps * step == t`.
    pub fn steps_for(&self, t: f64) -> (usize, f64) {
        let steps = (t.abs() / self.dt).ceil() as usize;
        if steps == 0 {
            (0, 0.0)
        } else {
            (steps, t / steps as f64)
        }
    }
}

/// Largest nonlinear phase `|V| dt` accepted in one step.
pub const MAX_STEP_PHASE: f64 = std::f64::consts::FRAC_PI_4;

fn half_kick(q: &mut Field, half: f64) -> Result<()> {
    let v = nonlocal_potential(q)?;
    let vmax = v.norm_sup();
    if 2.0 * vmax * half.abs() > MAX_STEP_PHASE {
        return Err(Error::Precondition(format!(
            "nonlinear phase per step {:.3e} exceeds pi/4; reduce dt",
            2.0 * vmax * half.abs()
        )));
    }
    for (x, p) in q.data_mut().iter_mut().zip(v.data()) {
        *x *= C::from_polar(1.0, half * p.re);
    }
    Ok(())
}

/// Strang splitting: half kick, linear flow over the full step, half kick.
pub fn split_step(q0: &Field, t: f64, cfg: &StepConfig) -> Result<Field> {
    cfg.validate()?;
    q0.expect_space(Space::Z)?;
    check_budget(&fourier_forward(q0)?, t)?;
    let (steps, dt) = cfg.steps_for(t);
    let ops = PlaneOps::shared(q0.plane());
    let table = ops.build_symbol(|a, b| C::from_polar(1.0, dt * (b * b - a * a)));
    // Warm the Beurling table outside the loop.
    ops.symbol(Symbol::Beurling);
    let mut q = q0.clone();
    for step in 0..steps {
        let before = q.norm_sup();
        half_kick(&mut q, 0.5 * dt)?;
        ops.apply_table(&table, q.data_mut());
        half_kick(&mut q, 0.5 * dt)?;
        let after = q.norm_sup();
        let now = (step + 1) as f64 * dt;
        if !q.is_finite() || after > 2.0 * before {
            return Err(Error::BlowUp { t: now });
        }
        if cfg.verbose {
            eprintln!(
                "{{\"split_step\":{},\"t\":{:e},\"sup\":{:e},\"l2\":{:e}}}",
                step + 1,
                now,
                after,
                q.norm_l2()
            );
        }
    }
    Ok(q)
}
