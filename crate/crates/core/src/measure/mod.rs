//! Coupling measures: absolutely continuous pieces, atoms, periodic combs and
//! dyadic cascades, together with their moments and the second-moment
//! function `G(λ) = ∫ dκ(λ') / (λ - λ')²`.

mod cascade;
mod density;
pub mod model;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FlError, FlResult};
use crate::quad::{integrate_real, QuadOptions};
use crate::special::{expint_en, trigamma};

pub use cascade::DyadicCascade;
pub(crate) use density::{interp, is_sinusoid_zero};
pub use density::{DensityFamily, DensityPiece, Interval, ScalarFn};
pub use model::{
    pushforward, pushforward_raw, DispersionModel, DispersionPiece, FormFactor, Geometry, MuMeasure,
};

/// Default threshold above which a cascade partial sum counts as divergent.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: f64, weight: f64) -> FlResult<Self> {
        if !location.is_finite() || !(weight > 0.0 && weight.is_finite()) {
            return Err(FlError::InvalidMeasure(format!(
                "atom needs finite location and positive weight, got ({location}, {weight})"
            )));
        }
        Ok(Self { location, weight })
    }
}

/// Atoms of weight `beta * tau / (2π)` at every point of `tau ℤ`.
///
/// Sums are taken explicitly for `|j| ≤ window` and the rest is added in
/// closed form through digamma/trigamma remainders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicComb {
    pub beta: f64,
    pub tau: f64,
    pub window: u32,
}

impl PeriodicComb {
    pub fn new(beta: f64, tau: f64) -> FlResult<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(tau > 0.0 && tau.is_finite()) {
            return Err(FlError::InvalidMeasure(format!(
                "comb needs beta > 0 and tau > 0, got ({beta}, {tau})"
            )));
        }
        Ok(Self {
            beta,
            tau,
            window: 32,
        })
    }

    pub fn atom_weight(&self) -> f64 {
        self.beta * self.tau / (2.0 * PI)
    }

    pub fn is_atom(&self, x: f64) -> bool {
        let u = x / self.tau;
        u == u.round()
    }

    pub fn sigma(&self, z: Complex64) -> Complex64 {
        let w = self.atom_weight();
        let j_max = self.window as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in -j_max..=j_max {
            let l = j as f64 * self.tau;
            acc += (Complex64::new(l, 0.0) - z).inv() - l / (1.0 + l * l);
        }
        let u = z / self.tau;
        let n1 = Complex64::new(j_max as f64 + 1.0, 0.0);
        let tail = crate::special::digamma(n1 + u) - crate::special::digamma(n1 - u);
        acc * w + tail * (w / self.tau)
    }

    pub fn sigma_derivative(&self, z: Complex64) -> Complex64 {
        let w = self.atom_weight();
        let u = z / self.tau;
        let j_max = self.window as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in -j_max..=j_max {
            let d = u - j as f64;
            acc += (d * d).inv();
        }
        let n1 = Complex64::new(j_max as f64 + 1.0, 0.0);
        acc += trigamma(n1 - u) + trigamma(n1 + u);
        acc * (w / (self.tau * self.tau))
    }

    pub fn g_value(&self, lambda: f64) -> f64 {
        if self.is_atom(lambda) {
            return f64::INFINITY;
        }
        self.sigma_derivative(Complex64::new(lambda, 0.0)).re
    }

    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if !(a.is_finite() && b.is_finite()) {
            return if a <= b { f64::INFINITY } else { 0.0 };
        }
        let lo = (a / self.tau).ceil();
        let hi = (b / self.tau).floor();
        (hi - lo + 1.0).max(0.0) * self.atom_weight()
    }

    pub fn m2(&self) -> f64 {
        let r = PI / self.tau;
        self.atom_weight() * r / r.tanh()
    }
}

/// Moment summary and the resulting form-factor class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthMoments {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub class: RegularityClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularityClass {
    /// Finite total mass.
    H,
    /// `∫ dκ / (1 + |λ|) < ∞` but infinite mass.
    HMinus1,
    /// Only the second moment is finite.
    HMinus2,
}

#[derive(Debug, Clone, Default)]
pub struct CouplingMeasure {
    pub ac: Vec<DensityPiece>,
    pub atoms: Vec<Atom>,
    pub combs: Vec<PeriodicComb>,
    pub cascades: Vec<DyadicCascade>,
}

impl CouplingMeasure {
    /// Builds a measure and enforces `∫ dκ / (1 + λ²) < ∞`.
    pub fn new(
        ac: Vec<DensityPiece>,
        atoms: Vec<Atom>,
        combs: Vec<PeriodicComb>,
        cascades: Vec<DyadicCascade>,
    ) -> FlResult<Self> {
        let k = Self {
            ac,
            atoms,
            combs,
            cascades,
        };
        growth_moments(&k)?;
        Ok(k)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Density `beta / 2π` on the whole line.
    pub fn flat_line(beta: f64) -> FlResult<Self> {
        Self::new(
            vec![DensityPiece::flat(beta / (2.0 * PI), Interval::REAL_LINE)?],
            vec![],
            vec![],
            vec![],
        )
    }

    /// Density `beta` on `[0, ∞)`.
    pub fn flat_half_line(beta: f64) -> FlResult<Self> {
        Self::new(
            vec![DensityPiece::flat(beta, Interval::half_line())?],
            vec![],
            vec![],
            vec![],
        )
    }

    pub fn sinusoidal(beta: f64, tau: f64) -> FlResult<Self> {
        Self::new(
            vec![DensityPiece::sinusoidal(beta, tau, Interval::REAL_LINE)?],
            vec![],
            vec![],
            vec![],
        )
    }

    pub fn periodic_comb(beta: f64, tau: f64) -> FlResult<Self> {
        Self::new(vec![], vec![], vec![PeriodicComb::new(beta, tau)?], vec![])
    }

    /// Cascade with `a_n = beta 2^{-n}`.
    pub fn dyadic(beta: f64, depth: u32) -> FlResult<Self> {
        Self::new(
            vec![],
            vec![],
            vec![],
            vec![DyadicCascade::new(beta, 0.5, depth)?],
        )
    }

    pub fn single_atom(location: f64, weight: f64) -> FlResult<Self> {
        Self::new(vec![], vec![Atom::new(location, weight)?], vec![], vec![])
    }

    pub fn is_zero(&self) -> bool {
        self.ac.is_empty()
            && self.atoms.is_empty()
            && self.combs.is_empty()
            && self.cascades.is_empty()
    }

    /// The measure `c κ`, `c > 0`.
    pub fn scaled(&self, c: f64) -> CouplingMeasure {
        CouplingMeasure {
            ac: self.ac.iter().map(|p| p.scaled(c)).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: a.weight * c,
                })
                .collect(),
            combs: self
                .combs
                .iter()
                .map(|m| PeriodicComb {
                    beta: m.beta * c,
                    ..*m
                })
                .collect(),
            cascades: self
                .cascades
                .iter()
                .map(|d| DyadicCascade {
                    scale: d.scale * c,
                    ..*d
                })
                .collect(),
        }
    }

    /// Absolutely continuous density at `λ`.
    pub fn ac_density(&self, lambda: f64) -> f64 {
        self.ac.iter().map(|p| p.density(lambda)).sum()
    }

    /// Point mass carried exactly at `λ`.
    pub fn point_mass(&self, lambda: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location == lambda)
            .map(|a| a.weight)
            .sum();
        let combs: f64 = self
            .combs
            .iter()
            .filter(|c| c.is_atom(lambda))
            .map(|c| c.atom_weight())
            .sum();
        let cascades: f64 = self.cascades.iter().map(|c| c.weight_at(lambda)).sum();
        atoms + combs + cascades
    }

    /// `κ([a, b])`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return 0.0;
        }
        let ac: f64 = self.ac.iter().map(|p| p.mass(a, b)).sum();
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|x| x.location >= a && x.location <= b)
            .map(|x| x.weight)
            .sum();
        let combs: f64 = self.combs.iter().map(|c| c.mass(a, b)).sum();
        let cascades: f64 = self.cascades.iter().map(|c| c.mass(a, b)).sum();
        ac + atoms + combs + cascades
    }
}

/// Mass of the closed interval `[a, b]`.
pub fn measure_of_interval(kappa: &CouplingMeasure, a: f64, b: f64) -> f64 {
    kappa.mass(a, b)
}

fn moment_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_intervals: 4000,
    }
}

/// `∫ ρ(λ) w(λ) dλ` over a piece with finite support.
fn finite_moment(p: &DensityPiece, w: impl Fn(f64) -> f64) -> (f64, bool) {
    let s = p.support;
    let mut breaks = p.kinks();
    breaks.push(0.0);
    let (v, _, ok) = integrate_real(|x| p.density(x) * w(x), s.lo, s.hi, &breaks, moment_opts());
    (v, ok)
}

/// Moment over an infinite support: quadrature on `|λ| ≤ L` plus a tail
/// estimate `ρ(±L) w(±L) L`. The moment is declared divergent when that
/// estimate fails to shrink between two scales.
fn infinite_moment(p: &DensityPiece, w: impl Fn(f64) -> f64) -> f64 {
    const L1: f64 = 1e6;
    const L2: f64 = 1e8;
    let tail = |l: f64| -> f64 {
        let mut t = 0.0;
        if p.support.hi.is_infinite() {
            t += p.density(l) * w(l) * l;
        }
        if p.support.lo.is_infinite() {
            t += p.density(-l) * w(-l) * l;
        }
        t
    };
    let (t1, t2) = (tail(L1), tail(L2));
    if !t2.is_finite() || (t2 > 1e-12 && t2 >= 0.5 * t1) {
        return f64::INFINITY;
    }
    let (a, b) = (p.support.lo.max(-L2), p.support.hi.min(L2));
    let (ta, tb) = (a.atan(), b.atan());
    let mut breaks: Vec<f64> = p.kinks().iter().map(|x| x.atan()).collect();
    breaks.push(0.0);
    let (v, _, ok) = integrate_real(
        |t| {
            let c = t.cos();
            let x = t.tan();
            p.density(x) * w(x) / (c * c)
        },
        ta,
        tb,
        &breaks,
        moment_opts(),
    );
    if ok {
        v + t2
    } else {
        f64::INFINITY
    }
}

/// `∫_a^b cos(τλ) / (1 + λ²) dλ`.
fn cos_lorentz(tau: f64, a: f64, b: f64) -> f64 {
    let l = 400.0 / tau.abs() + 400.0;
    let (lo, hi) = (a.max(-l), b.min(l));
    let mut total = 0.0;
    if lo < hi {
        let n = (((hi - lo) * tau.abs() / (2.0 * PI)).ceil() as usize).clamp(1, 4000);
        let breaks: Vec<f64> = (1..n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect();
        total += integrate_real(
            |x| (tau * x).cos() / (1.0 + x * x),
            lo,
            hi,
            &breaks,
            moment_opts(),
        )
        .0;
    }
    // h = Im 1/(λ - i): h^{(m)} = Im[(-1)^m m! (λ - i)^{-m-1}]
    let deriv = |m: usize, x: f64| {
        let fact: f64 = (1..=m).map(|k| k as f64).product();
        let s = if m % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(
            (Complex64::new(x, -1.0).powi(-(m as i32) - 1) * (s * fact)).im,
            0.0,
        )
    };
    let tail = |x: f64, upper: bool| crate::quad::fourier_tail(tau, x, deriv, 6, upper).re;
    if b > l {
        total += tail(l, true) - if b.is_finite() { tail(b, true) } else { 0.0 };
    }
    if a < -l {
        total += tail(l, false) - if a.is_finite() { tail(-a, false) } else { 0.0 };
    }
    total
}

fn signed_log1p_abs(x: f64) -> f64 {
    if x.is_infinite() {
        return x;
    }
    x.signum() * x.abs().ln_1p()
}

fn piece_moments(p: &DensityPiece) -> FlResult<(f64, f64, f64)> {
    let s = p.support;
    let lorentz = |x: f64| 1.0 / (1.0 + x * x);
    let (m0, m1, m2) = match &p.family {
        DensityFamily::Flat { level } => (
            level * s.width(),
            level * (signed_log1p_abs(s.hi) - signed_log1p_abs(s.lo)),
            level * (s.hi.atan() - s.lo.atan()),
        ),
        DensityFamily::Sinusoidal { beta, tau } => {
            let c = beta / (2.0 * PI);
            let m2 = c * (s.hi.atan() - s.lo.atan() - cos_lorentz(*tau, s.lo, s.hi));
            if s.is_finite() {
                (
                    p.mass(s.lo, s.hi),
                    finite_moment(p, |x| 1.0 / (1.0 + x.abs())).0,
                    m2,
                )
            } else {
                (f64::INFINITY, f64::INFINITY, m2)
            }
        }
        _ if s.is_finite() => (
            finite_moment(p, |_| 1.0).0,
            finite_moment(p, |x| 1.0 / (1.0 + x.abs())).0,
            finite_moment(p, lorentz).0,
        ),
        _ => (
            infinite_moment(p, |_| 1.0),
            infinite_moment(p, |x| 1.0 / (1.0 + x.abs())),
            infinite_moment(p, lorentz),
        ),
    };
    if !m2.is_finite() {
        return Err(FlError::DivergentM2(format!(
            "second moment of density piece on [{}, {}] does not converge",
            s.lo, s.hi
        )));
    }
    Ok((m0, m1, m2))
}

/// `m0 = ∫dκ`, `m1 = ∫dκ/(1+|λ|)`, `m2 = ∫dκ/(1+λ²)` and the regularity class.
pub fn growth_moments(kappa: &CouplingMeasure) -> FlResult<GrowthMoments> {
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for p in &kappa.ac {
        let (a, b, c) = piece_moments(p)?;
        m0 += a;
        m1 += b;
        m2 += c;
    }
    for a in &kappa.atoms {
        m0 += a.weight;
        m1 += a.weight / (1.0 + a.location.abs());
        m2 += a.weight / (1.0 + a.location * a.location);
    }
    for c in &kappa.combs {
        m0 = f64::INFINITY;
        m1 = f64::INFINITY;
        m2 += c.m2();
    }
    for c in &kappa.cascades {
        m0 += c.total_mass();
        m1 += c.m1();
        m2 += c.m2();
    }
    if !m2.is_finite() {
        return Err(FlError::DivergentM2(format!("second moment is {m2}")));
    }
    let class = if m0.is_finite() {
        RegularityClass::H
    } else if m1.is_finite() {
        RegularityClass::HMinus1
    } else {
        RegularityClass::HMinus2
    };
    Ok(GrowthMoments { m0, m1, m2, class })
}

/// `G(λ) = ∫ dκ(λ') / (λ - λ')²`, possibly `∞`.
///
/// Cascades are treated as truncations of an infinite rule: the truncated
/// partial sum plus a lower bound for the missing levels is compared with
/// `divergence_threshold`.
pub fn g_function(kappa: &CouplingMeasure, lambda: f64, divergence_threshold: f64) -> f64 {
    let mut total = 0.0;
    for a in &kappa.atoms {
        if a.location == lambda {
            return f64::INFINITY;
        }
        let d = lambda - a.location;
        total += a.weight / (d * d);
    }
    for c in &kappa.combs {
        total += c.g_value(lambda);
    }
    for p in &kappa.ac {
        if p.positive_near(lambda) {
            return f64::INFINITY;
        }
        total += piece_g(p, lambda);
    }
    for c in &kappa.cascades {
        let partial = c.g_partial_sums(lambda).last().copied().unwrap_or(0.0);
        let g = partial + c.tail_lower_bound(lambda);
        if !(g <= divergence_threshold) {
            return f64::INFINITY;
        }
        total += g;
    }
    total
}

/// `∫_piece ρ(λ') / (λ - λ')² dλ'` for `λ` where the density vanishes at least quadratically.
fn piece_g(p: &DensityPiece, lambda: f64) -> f64 {
    let s = p.support;
    match &p.family {
        DensityFamily::Flat { level } => {
            let inv = |x: f64| {
                if x.is_infinite() {
                    0.0
                } else {
                    1.0 / (lambda - x)
                }
            };
            level * (inv(s.hi) - inv(s.lo))
        }
        DensityFamily::Sinusoidal { beta, tau } => sinusoid_g(
            beta / (2.0 * PI),
            *tau,
            lambda,
            s.lo - lambda,
            s.hi - lambda,
        ),
        DensityFamily::Tabulated { grid, values } => {
            let mut acc = 0.0;
            for i in 0..grid.len() - 1 {
                let (a, b) = (grid[i], grid[i + 1]);
                let (ya, yb) = (values[i], values[i + 1]);
                if ya == 0.0 && yb == 0.0 {
                    continue;
                }
                let gamma = (yb - ya) / (b - a);
                let at = ya + gamma * (lambda - a);
                let (u0, u1) = (a - lambda, b - lambda);
                acc += at * (1.0 / u0 - 1.0 / u1) + gamma * (u1.abs() / u0.abs()).ln();
            }
            acc
        }
        DensityFamily::Function { .. } => {
            let f = |x: f64| {
                let d = lambda - x;
                let r = p.density(x);
                if r == 0.0 {
                    0.0
                } else {
                    r / (d * d)
                }
            };
            let breaks = [lambda];
            if s.is_finite() {
                integrate_real(f, s.lo, s.hi, &breaks, moment_opts()).0
            } else {
                let (v, _, _) = integrate_real(
                    |t| {
                        let c = t.cos();
                        if c <= 0.0 {
                            return 0.0;
                        }
                        f(t.tan()) / (c * c)
                    },
                    s.lo.atan(),
                    s.hi.atan(),
                    &[lambda.atan()],
                    moment_opts(),
                );
                v
            }
        }
    }
}

/// `c ∫_{u0}^{u1} (1 - cos(τ(λ + u))) / u² du`, assuming the integrand is
/// integrable at `u = 0` whenever `0 ∈ [u0, u1]`.
fn sinusoid_g(c: f64, tau: f64, lambda: f64, u0: f64, u1: f64) -> f64 {
    let (cl, sl) = ((tau * lambda).cos(), (tau * lambda).sin());
    let f = |u: f64| {
        if u == 0.0 {
            return 0.5 * tau * tau;
        }
        let s = (0.5 * tau * (lambda + u)).sin();
        2.0 * s * s / (u * u)
    };
    let cut = (200.0 / tau.abs()).max(200.0);
    let (a, b) = (u0.max(-cut), u1.min(cut));
    let mut total = 0.0;
    if a < b {
        let n = (((b - a) * tau.abs() / (2.0 * PI)).ceil() as usize).clamp(1, 4000);
        let breaks: Vec<f64> = (1..n)
            .map(|i| a + (b - a) * i as f64 / n as f64)
            .chain([0.0])
            .collect();
        total += integrate_real(f, a, b, &breaks, moment_opts()).0;
    }
    // ∫_U^∞ e^{iτu}/u² du = E₂(-iτU)/U
    let tail = |uu: f64, sign: f64| -> f64 {
        let e2 = expint_en(Complex64::new(0.0, -tau * uu), 2)[1] / uu;
        // ∫_U^∞ [1 - cl cos(τu) ± sl sin(τu)] / u²
        1.0 / uu - cl * e2.re + sign * sl * e2.im
    };
    if u1 > cut {
        total += tail(cut, 1.0) - if u1.is_finite() { tail(u1, 1.0) } else { 0.0 };
    }
    if u0 < -cut {
        // u -> -u flips the sign of the sine term
        total += tail(cut, -1.0) - if u0.is_finite() { tail(-u0, -1.0) } else { 0.0 };
    }
    c * total
}
