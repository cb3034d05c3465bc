//! Brascamp-Lieb style criticality checks and a Monte-Carlo estimate of the
//! multilinear form `Lambda_n`.
//!
//! # Why enumerating closed index sets is enough
//!
//! Take rank-one maps `l_1..l_m` on `F^N` and exponents `p_j`. For a subspace
//! `V` let `A(V) = {j : l_j = 0 on V}` and `V_A = ∩_{j in A} ker l_j`.
//! Then `RHS(V) = Σ_{j not in A(V)} 1/p_j`, because a rank-one map restricted
//! to `V` has image of dimension 0 or 1.
//!
//! 1. `V ⊆ V_{A(V)}` by definition, and `A(V_{A(V)}) = A(V)`: a map outside
//!    `A(V)` is nonzero on `V`, hence on the larger `V_{A(V)}`.
//! 2. So `RHS(V) = RHS(V_{A(V)})` and `dim V <= dim V_{A(V)}`. If
//!    `V_{A(V)}` is subcritical so is `V`. If it is critical then every proper
//!    `V ⊊ V_{A(V)}` with the same pattern is subcritical.
//!
//! Hence it suffices to classify `V_A` for the closed sets `A = A(V_A)`,
//! which are exactly the flats of the row matroid. The flats are reached by
//! adding one row at a time to smaller flats, so the search is a breadth-first
//! walk over ranks. The maps have integer entries, so ranks over `Q`, `R`
//! and `C` agree and all arithmetic is exact over `Q`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::Complex64;

type Q = Ratio<i128>;
type C = Complex64;

/// Largest number of maps accepted by [`criticality_check`].
pub const MAX_MAPS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarField {
    Real,
    Complex,
}

/// An exponent `p` in `[1, inf]`, kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Exponent {
    Finite(Ratio<i64>),
    Infinite,
}

impl Exponent {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidConfig("exponent with zero denominator".into()));
        }
        let p = Ratio::new(num, den);
        if p < Ratio::from_integer(1) {
            return Err(Error::InvalidConfig(format!("exponent {p} is below 1")));
        }
        Ok(Exponent::Finite(p))
    }

    pub fn recip(&self) -> Q {
        match self {
            Exponent::Finite(p) => Q::new(*p.denom() as i128, *p.numer() as i128),
            Exponent::Infinite => Q::from_integer(0),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Exponent::Infinite);
        }
        let bad = || Error::InvalidConfig(format!("cannot parse exponent {s:?}"));
        match s.split_once('/') {
            Some((a, b)) => Exponent::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => Exponent::new(s.parse().map_err(|_| bad())?, 1),
        }
    }
}

impl TryFrom<String> for Exponent {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Exponent> for String {
    fn from(e: Exponent) -> String {
        e.to_string()
    }
}

/// A family of linear maps `l_j : F^N -> F^{N_j}` with exponents `p_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BLInstance {
    pub dim: usize,
    pub field: ScalarField,
    /// `maps[j]` is an `N_j x N` integer matrix, row major.
    pub maps: Vec<Vec<Vec<i64>>>,
    pub exponents: Vec<Exponent>,
}

impl BLInstance {
    pub fn validate(&self) -> Result<()> {
        if self.maps.is_empty() || self.dim == 0 {
            return Err(Error::InvalidConfig("need at least one map on a nonzero space".into()));
        }
        if self.maps.len() != self.exponents.len() {
            return Err(Error::InvalidConfig(format!(
                "{} maps but {} exponents",
                self.maps.len(),
                self.exponents.len()
            )));
        }
        for (j, m) in self.maps.iter().enumerate() {
            if m.is_empty() || m.iter().any(|row| row.len() != self.dim) {
                return Err(Error::InvalidConfig(format!("map {j} is not an N_j x {} matrix", self.dim)));
            }
            let rows: Vec<Vec<Q>> = m.iter().map(|r| to_q(r)).collect();
            if rref(&rows).1.len() != m.len() {
                return Err(Error::InvalidConfig(format!("map {j} does not have full row rank")));
            }
        }
        Ok(())
    }

    /// Same maps, every exponent replaced by `p`.
    pub fn with_uniform_exponent(&self, p: Exponent) -> Self {
        BLInstance { exponents: vec![p; self.maps.len()], ..self.clone() }
    }
}

/// The maps behind the Brown inequality for `Lambda_n`, over `C^{2n+1}`.
pub fn build_brown_instance(n: usize) -> Result<BLInstance> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let dim = 2 * n + 1;
    let mut maps = Vec::with_capacity(4 * n + 2);
    for j in 0..dim {
        let mut row = vec![0; dim];
        row[j] = 1;
        maps.push(vec![row]);
    }
    for j in 1..dim {
        let mut row = vec![0; dim];
        row[j] = 1;
        row[j - 1] = -1;
        maps.push(vec![row]);
    }
    maps.push(vec![(0..dim).map(|j| if j % 2 == 0 { 1 } else { -1 }).collect()]);
    let two = Exponent::Finite(Ratio::from_integer(2));
    Ok(BLInstance { dim, field: ScalarField::Complex, exponents: vec![two; maps.len()], maps })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Critical,
    Subcritical,
    Supercritical,
}

fn classify(dim: i128, rhs: Q) -> Criticality {
    let d = Q::from_integer(dim);
    if d == rhs {
        Criticality::Critical
    } else if d < rhs {
        Criticality::Subcritical
    } else {
        Criticality::Supercritical
    }
}

/// A proper nonzero subspace that is not subcritical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Integer basis vectors of the subspace.
    pub basis: Vec<Vec<i64>>,
    pub dim: usize,
    /// `Σ 1/p_j dim l_j(V)` as an exact fraction.
    pub rhs: String,
    pub kind: Criticality,
    /// Indices of the maps that vanish on the subspace.
    pub vanishing: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub whole_space: Criticality,
    pub whole_space_rhs: String,
    pub violations: Vec<Violation>,
    /// Number of subspaces `V_A` that were classified.
    pub checked_count: usize,
}

impl CriticalityReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.whole_space == Criticality::Critical && self.violations.is_empty()
    }

    pub fn verdict(&self) -> &'static str {
        if self.hypotheses_hold() {
            "hypotheses hold"
        } else {
            "hypotheses fail"
        }
    }
}

fn to_q(row: &[i64]) -> Vec<Q> {
    row.iter().map(|&v| Q::from_integer(v as i128)).collect()
}

/// Reduced row echelon form and pivot columns.
fn rref(rows: &[Vec<Q>]) -> (Vec<Vec<Q>>, Vec<usize>) {
    let zero = Q::from_integer(0);
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c] != zero) else { continue };
        m.swap(r, p);
        let lead = m[r][c];
        for v in m[r].iter_mut() {
            *v /= lead;
        }
        for i in 0..m.len() {
            if i != r && m[i][c] != zero {
                let f = m[i][c];
                for k in 0..cols {
                    let s = m[r][k] * f;
                    m[i][k] -= s;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

fn in_row_space(echelon: &[Vec<Q>], pivots: &[usize], row: &[Q]) -> bool {
    let zero = Q::from_integer(0);
    let mut v = row.to_vec();
    for (e, &c) in echelon.iter().zip(pivots) {
        let f = v[c];
        if f != zero {
            for (x, y) in v.iter_mut().zip(e) {
                *x -= *y * f;
            }
        }
    }
    v.iter().all(|x| *x == zero)
}

/// Integer basis of `{x : E x = 0}` from an echelon form.
fn nullspace(echelon: &[Vec<Q>], pivots: &[usize], dim: usize) -> Vec<Vec<i64>> {
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![Q::from_integer(0); dim];
            x[f] = Q::from_integer(1);
            for (e, &c) in echelon.iter().zip(pivots) {
                x[c] = -e[f];
            }
            let lcm = x.iter().fold(1i128, |acc, v| num_integer_lcm(acc, *v.denom()));
            x.iter().map(|v| (v.numer() * (lcm / v.denom())) as i64).collect()
        })
        .collect()
}

fn num_integer_lcm(a: i128, b: i128) -> i128 {
    let (mut x, mut y) = (a.abs(), b.abs());
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a.abs() / x * b.abs()
}

struct Flat {
    mask: u32,
    rank: usize,
}

fn closure(rows: &[Vec<Q>], seed: u32) -> Flat {
    let chosen: Vec<Vec<Q>> = (0..rows.len()).filter(|j| seed >> j & 1 == 1).map(|j| rows[j].clone()).collect();
    let (e, piv) = rref(&chosen);
    let mut mask = 0u32;
    for (j, row) in rows.iter().enumerate() {
        if in_row_space(&e, &piv, row) {
            mask |= 1 << j;
        }
    }
    Flat { mask, rank: piv.len() }
}

/// Exact criticality check for families of rank-one maps.
pub fn criticality_check(inst: &BLInstance) -> Result<CriticalityReport> {
    inst.validate()?;
    if let Some(j) = inst.maps.iter().position(|m| m.len() != 1) {
        return Err(Error::Precondition(format!(
            "map {j} has rank {}; the flat enumeration is only complete for rank-one maps",
            inst.maps[j].len()
        )));
    }
    let m = inst.maps.len();
    if m > MAX_MAPS {
        return Err(Error::Precondition(format!("{m} maps exceed the limit of {MAX_MAPS}")));
    }
    let rows: Vec<Vec<Q>> = inst.maps.iter().map(|mat| to_q(&mat[0])).collect();
    let recips: Vec<Q> = inst.exponents.iter().map(Exponent::recip).collect();
    let rhs_of = |mask: u32| {
        (0..m).filter(|j| mask >> j & 1 == 0).fold(Q::from_integer(0), |acc, j| acc + recips[j])
    };
    let n = inst.dim as i128;

    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut level = vec![closure(&rows, 0)];
    seen.insert(level[0].mask);
    let whole_rhs = rhs_of(level[0].mask);
    let whole_space = classify(n - level[0].rank as i128, whole_rhs);
    let mut violations = Vec::new();

    while !level.is_empty() {
        for flat in &level {
            let dim = n - flat.rank as i128;
            if flat.rank == 0 || dim == 0 {
                continue;
            }
            let rhs = rhs_of(flat.mask);
            let kind = classify(dim, rhs);
            if kind != Criticality::Subcritical {
                let chosen: Vec<Vec<Q>> =
                    (0..m).filter(|j| flat.mask >> j & 1 == 1).map(|j| rows[j].clone()).collect();
                let (e, piv) = rref(&chosen);
                violations.push(Violation {
                    basis: nullspace(&e, &piv, inst.dim),
                    dim: dim as usize,
                    rhs: rhs.to_string(),
                    kind,
                    vanishing: (0..m).filter(|j| flat.mask >> j & 1 == 1).collect(),
                });
            }
        }
        let candidates: Vec<Flat> = level
            .par_iter()
            .flat_map_iter(|f| {
                let rows = &rows;
                (0..m).filter(move |j| f.mask >> j & 1 == 0).map(move |j| closure(rows, f.mask | 1 << j))
            })
            .collect();
        let mut next = Vec::new();
        for f in candidates {
            if seen.insert(f.mask) {
                next.push(f);
            }
        }
        next.sort_by_key(|f| f.mask);
        level = next;
    }
    violations.sort_by(|a, b| a.vanishing.cmp(&b.vanishing));
    Ok(CriticalityReport {
        whole_space,
        whole_space_rhs: whole_rhs.to_string(),
        violations,
        checked_count: seen.len(),
    })
}

/// An input function of the form `Lambda_n`.
#[derive(Clone, Debug)]
pub enum Profile {
    /// `amplitude * exp(-|z - centre|^2 / width^2)`.
    Gaussian { amplitude: f64, width: f64, centre: C },
    /// Grid samples, zero off the grid.
    Grid(Field),
}

impl Profile {
    pub fn unit_gaussian() -> Self {
        Profile::Gaussian { amplitude: 1.0, width: 1.0, centre: C::new(0.0, 0.0) }
    }

    fn eval_abs(&self, z: C) -> f64 {
        match self {
            Profile::Gaussian { amplitude, width, centre } => {
                amplitude.abs() * (-(z - centre).norm_sqr() / (width * width)).exp()
            }
            Profile::Grid(f) => f.sample_nearest(z).map_or(0.0, |v| v.norm()),
        }
    }

    fn norm_l2(&self) -> f64 {
        match self {
            Profile::Gaussian { amplitude, width, .. } => {
                amplitude.abs() * width * (std::f64::consts::PI / 2.0).sqrt()
            }
            Profile::Grid(f) => f.norm_l2(),
        }
    }

    /// Centre and spread of `|f|^2`, used to size the proposal.
    fn scale(&self) -> (C, f64) {
        match self {
            Profile::Gaussian { width, centre, .. } => (*centre, *width),
            Profile::Grid(f) => {
                let p = f.plane();
                let (mut m0, mut m1) = (0.0, C::new(0.0, 0.0));
                for (i, v) in f.data().iter().enumerate() {
                    let w = v.norm_sqr();
                    m0 += w;
                    m1 += p.point_at(i) * w;
                }
                if m0 == 0.0 {
                    return (C::new(0.0, 0.0), 1.0);
                }
                let c = m1 / m0;
                let m2: f64 =
                    f.data().iter().enumerate().map(|(i, v)| v.norm_sqr() * (p.point_at(i) - c).norm_sqr()).sum();
                // A Gaussian of width w has second moment w^2 / 2 under |f|^2.
                (c, (2.0 * m2 / m0).sqrt().max(1e-12))
            }
        }
    }
}

/// Samples drawn per RNG stream; the reduction runs over streams in order.
pub const MC_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub samples: usize,
    pub ratio: f64,
    pub std_err: f64,
    /// Tail index of the importance weights, infinite when they look bounded.
    pub tail_index: f64,
}

/// Tail index `1/xi` from a generalised Pareto fit to the largest weights.
///
/// The shape `xi` comes from probability-weighted moments of the excesses
/// over the `M = max(10, 3 sqrt N)`-th largest weight. Bounded weights give
/// `xi <= 0` and an infinite index; the variance is infinite once `xi >= 1/2`.
fn tail_index(weights: &mut [f64]) -> f64 {
    let m = ((3.0 * (weights.len() as f64).sqrt()) as usize).max(10).min(weights.len() / 5);
    if m < 5 {
        return f64::INFINITY;
    }
    weights.sort_by(|a, b| b.total_cmp(a));
    let u = weights[m];
    // Excesses in ascending order.
    let y: Vec<f64> = weights[..m].iter().rev().map(|w| w - u).collect();
    let mf = m as f64;
    let a0 = y.iter().sum::<f64>() / mf;
    let a1 = y.iter().enumerate().map(|(i, v)| (1.0 - (i as f64 + 0.65) / mf) * v).sum::<f64>() / mf;
    if a0 <= 0.0 {
        return f64::INFINITY;
    }
    let xi = 2.0 - a0 / (a0 - 2.0 * a1);
    if xi <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / xi
    }
}

/// Importance-sampled estimate of
/// `Lambda_n(rho, q_0..q_2n) / (|rho|_2 prod |q_j|_2)` where
/// `Lambda_n = ∫ |rho(zeta)| prod |q_j(z_j)| / prod_{j>=1} |z_{j-1} - z_j|`
/// and `zeta = Σ (-1)^j z_j`.
///
/// `z_0` is drawn from a complex Gaussian and each difference
/// `w_j = z_{j-1} - z_j` from the density `c exp(-|w|^2 / 2 s^2) / |w|`, which
/// cancels the singular factor exactly.
pub fn lambda_mc(n: usize, rho: &Profile, qs: &[Profile], samples: usize, seed: u64) -> Result<McEstimate> {
    if !(1..=2).contains(&n) {
        return Err(Error::Precondition(format!("n must be 1 or 2, got {n}")));
    }
    if qs.len() != 2 * n + 1 {
        return Err(Error::Precondition(format!("need {} functions q_j, got {}", 2 * n + 1, qs.len())));
    }
    if samples < 2 {
        return Err(Error::InvalidConfig("need at least two samples".into()));
    }
    let norm = qs.iter().fold(rho.norm_l2(), |acc, q| acc * q.norm_l2());
    if norm == 0.0 {
        return Ok(McEstimate { samples, ratio: 0.0, std_err: 0.0, tail_index: f64::INFINITY });
    }
    let (centre, _) = qs[0].scale();
    let s = 2.0 * std::iter::once(rho).chain(qs).map(|p| p.scale().1).fold(0.0, f64::max);
    let pi = std::f64::consts::PI;
    let log_c = -(s * pi * (2.0 * pi).sqrt()).ln();
    let log_g0 = -(2.0 * pi * s * s).ln();

    let chunks = samples.div_ceil(MC_CHUNK);
    let per_chunk: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut zs = vec![C::new(0.0, 0.0); 2 * n + 1];
            let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
            (0..count)
                .map(|_| {
                    let d0 = C::new(normal(&mut rng), normal(&mut rng)) * s;
                    zs[0] = centre + d0;
                    let mut log_q = log_g0 - d0.norm_sqr() / (2.0 * s * s);
                    for j in 1..zs.len() {
                        let r = normal(&mut rng).abs() * s;
                        let theta = rng.gen::<f64>() * 2.0 * pi;
                        zs[j] = zs[j - 1] - C::from_polar(r, theta);
                        log_q += log_c - r * r / (2.0 * s * s);
                    }
                    let zeta: C = zs.iter().enumerate().map(|(j, z)| if j % 2 == 0 { *z } else { -z }).sum();
                    let f = zs.iter().zip(qs).fold(rho.eval_abs(zeta), |acc, (z, q)| acc * q.eval_abs(*z));
                    if f == 0.0 {
                        0.0
                    } else {
                        (f.ln() - log_q).exp()
                    }
                })
                .collect()
        })
        .collect();

    let (mut sum, mut sumsq) = (0.0, 0.0);
    for chunk in &per_chunk {
        for w in chunk {
            sum += w;
            sumsq += w * w;
        }
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    let mut weights: Vec<f64> = per_chunk.into_iter().flatten().collect();
    let tail_index = tail_index(&mut weights);
    if tail_index < 2.0 {
        return Err(Error::DivergentVariance { tail_index });
    }
    Ok(McEstimate { samples, ratio: mean / norm, std_err: (var / nf).sqrt() / norm, tail_index })
}
