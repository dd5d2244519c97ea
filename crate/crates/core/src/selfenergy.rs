//! The regularised Borel transform
//! `Σ(z) = ∫ (1/(λ - z) - λ/(1 + λ²)) dκ(λ)`,
//! its boundary values from above, its derivative and Stieltjes inversion.
//!
//! All piece evaluations work in the upper half-plane; lower half-plane values
//! follow from `Σ(z̄) = conj Σ(z)`. Boundary values are evaluated at `λ + i0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FlError, FlResult};
use crate::measure::{is_sinusoid_zero, CouplingMeasure, DensityFamily, DensityPiece, Interval};
use crate::quad::{fourier_tail, integrate_with_breaks, QuadOptions};
use crate::special::cot_pi;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyValue {
    #[serde(with = "crate::schema::num")]
    pub re: f64,
    #[serde(with = "crate::schema::num")]
    pub im: f64,
    /// The imaginary part is infinite (an atom sits at the evaluation point).
    pub im_divergent: bool,
    /// The real part has a logarithmic singularity (density jump at the point).
    pub log_singular: bool,
    #[serde(with = "crate::schema::num")]
    pub pv_error_estimate: f64,
}

impl SelfEnergyValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Both parts are usable numbers.
    pub fn is_regular(&self) -> bool {
        !self.im_divergent && !self.log_singular
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValue {
    #[serde(with = "crate::schema::num")]
    pub lambda: f64,
    pub sigma_plus: SelfEnergyValue,
    #[serde(with = "crate::schema::num")]
    pub ac_density_at_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaOptions {
    pub quad: QuadOptions,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self {
            quad: QuadOptions::with_abs_tol(1e-9),
        }
    }
}

impl SigmaOptions {
    pub fn with_abs_tol(tol: f64) -> Self {
        Self {
            quad: QuadOptions::with_abs_tol(tol),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Acc {
    value: Complex64,
    error: f64,
    converged: bool,
    log_singular: bool,
}

impl Acc {
    fn zero() -> Self {
        Acc {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            converged: true,
            log_singular: false,
        }
    }

    fn exact(value: Complex64) -> Self {
        Acc {
            value,
            ..Acc::zero()
        }
    }

    fn add(&mut self, o: Acc) {
        self.value += o.value;
        self.error += o.error;
        self.converged &= o.converged;
        self.log_singular |= o.log_singular;
    }
}

/// Evaluation point: either `z` with `Im z > 0`, or the boundary point `λ + i0`.
#[derive(Debug, Clone, Copy)]
struct Point {
    z: Complex64,
    boundary: bool,
}

impl Point {
    /// `log(x - z)`, with `log(x - λ - i0) = ln|x - λ| - iπ [x < λ]` on the boundary.
    fn log_from(&self, x: f64) -> Complex64 {
        if self.boundary {
            let d = x - self.z.re;
            Complex64::new(d.abs().ln(), if d < 0.0 { -PI } else { 0.0 })
        } else {
            (Complex64::new(x, 0.0) - self.z).ln()
        }
    }

    /// `log(b - z) - log(a - z)` for finite `a < b`.
    fn log_diff(&self, a: f64, b: f64) -> Complex64 {
        self.log_from(b) - self.log_from(a)
    }

    fn touches(&self, x: f64) -> bool {
        self.boundary && x == self.z.re
    }
}

/// `L(x) = log(x - z) - ½ log(1 + x²)`, the antiderivative of the regularised
/// kernel, with its limits at ±∞.
fn kernel_antiderivative(x: f64, p: &Point) -> Complex64 {
    if x == f64::INFINITY {
        return Complex64::new(0.0, 0.0);
    }
    if x == f64::NEG_INFINITY {
        return Complex64::new(0.0, -PI);
    }
    p.log_from(x) - 1f64.hypot(x).ln()
}

/// `c ∫_a^b (1/(λ - z) - λ/(1+λ²)) dλ`.
fn flat_sigma(c: f64, s: Interval, p: &Point) -> Acc {
    let mut acc = Acc::exact((kernel_antiderivative(s.hi, p) - kernel_antiderivative(s.lo, p)) * c);
    if p.touches(s.lo) || p.touches(s.hi) {
        acc.log_singular = true;
        acc.value = Complex64::new(f64::NAN, PI * c);
    }
    acc
}

fn flat_sigma_derivative(c: f64, s: Interval, z: Complex64) -> Complex64 {
    let inv = |x: f64| {
        if x.is_infinite() {
            Complex64::new(0.0, 0.0)
        } else {
            (Complex64::new(x, 0.0) - z).inv()
        }
    };
    (inv(s.lo) - inv(s.hi)) * c
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// `m`-th derivative of the regularised kernel `h(λ) = 1/(λ - z) - λ/(1+λ²)`.
fn kernel_derivative(m: usize, x: f64, z: Complex64) -> Complex64 {
    let s = if m % 2 == 0 { 1.0 } else { -1.0 } * factorial(m);
    let e = -(m as i32) - 1;
    let xc = Complex64::new(x, 0.0);
    ((xc - z).powi(e) - ((xc - I).powi(e) + (xc + I).powi(e)) * 0.5) * s
}

/// `m`-th derivative of `1/(λ - z)²`.
fn square_kernel_derivative(m: usize, x: f64, z: Complex64) -> Complex64 {
    let s = if m % 2 == 0 { 1.0 } else { -1.0 } * factorial(m + 1);
    (Complex64::new(x, 0.0) - z).powi(-(m as i32) - 2) * s
}

const TAIL_TERMS: usize = 8;

fn sinusoid_cut(tau: f64, z: Complex64) -> f64 {
    z.re.abs() + z.im.abs() + 400.0 / tau.abs() + 50.0
}

fn period_breaks(tau: f64, lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
    let n = (((hi - lo) * tau.abs() / (2.0 * PI)).ceil() as usize).clamp(1, 4000);
    (1..n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .chain(extra.iter().copied())
        .collect()
}

/// `∫_a^b cos(τλ) k(λ) dλ` beyond the cut, where `deriv(m, x)` gives `k^{(m)}`.
fn cosine_tails(
    tau: f64,
    a: f64,
    b: f64,
    l: f64,
    deriv: impl Fn(usize, f64) -> Complex64 + Copy,
) -> Complex64 {
    let both = |x: f64, upper: bool| {
        (fourier_tail(tau, x, deriv, TAIL_TERMS, upper)
            + fourier_tail(-tau, x, deriv, TAIL_TERMS, upper))
            * 0.5
    };
    let mut total = Complex64::new(0.0, 0.0);
    if b > l {
        total += both(l, true)
            - if b.is_finite() {
                both(b, true)
            } else {
                Complex64::new(0.0, 0.0)
            };
    }
    if a < -l {
        total += both(l, false)
            - if a.is_finite() {
                both(-a, false)
            } else {
                Complex64::new(0.0, 0.0)
            };
    }
    total
}

/// `∫_a^b cos(τλ) h(λ) dλ` with the regularised kernel `h`.
fn cosine_transform(tau: f64, s: Interval, p: &Point, opts: QuadOptions) -> Acc {
    let z = p.z;
    let x0 = z.re;
    let l = sinusoid_cut(tau, z);
    let (lo, hi) = (s.lo.max(-l), s.hi.min(l));
    let mut acc = Acc::zero();
    if lo < hi {
        let subtract = x0 > lo && x0 < hi;
        let f0 = if subtract { (tau * x0).cos() } else { 0.0 };
        let breaks = period_breaks(tau, lo, hi, &[x0, 0.0]);
        let r = integrate_with_breaks(
            |x| {
                let c = (tau * x).cos();
                let d = Complex64::new(x, 0.0) - z;
                let sing = if d.norm_sqr() == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    (c - f0) / d
                };
                sing - c * x / (1.0 + x * x)
            },
            lo,
            hi,
            &breaks,
            opts,
        );
        acc.value += r.value;
        acc.error += r.error;
        acc.converged &= r.converged;
        if subtract {
            acc.value += p.log_diff(lo, hi) * f0;
        }
    }
    acc.value += cosine_tails(tau, s.lo, s.hi, l, move |m, x| kernel_derivative(m, x, z));
    acc
}

fn sinusoid_sigma(beta: f64, tau: f64, s: Interval, p: &Point, opts: QuadOptions) -> Acc {
    let c = beta / (2.0 * PI);
    if p.touches(s.lo) || p.touches(s.hi) {
        let x = p.z.re;
        if is_sinusoid_zero(tau, x) {
            return combined_sinusoid_at_zero(c, tau, s, p, opts);
        }
        let mut acc = Acc::zero();
        acc.log_singular = true;
        acc.value = Complex64::new(f64::NAN, PI * c * (1.0 - (tau * x).cos()));
        return acc;
    }
    let mut acc = flat_sigma(c, s, p);
    let mut ct = cosine_transform(tau, s, p, opts);
    ct.value *= -c;
    ct.error *= c;
    acc.add(ct);
    acc
}

/// Boundary value at an endpoint of the support where the sinusoidal density
/// vanishes: integrate `c (1 - cos τλ) h(λ)` directly, which is regular there.
fn combined_sinusoid_at_zero(c: f64, tau: f64, s: Interval, p: &Point, opts: QuadOptions) -> Acc {
    let z = p.z;
    let l = sinusoid_cut(tau, z);
    let (lo, hi) = (s.lo.max(-l), s.hi.min(l));
    let mut acc = Acc::zero();
    if lo < hi {
        let breaks = period_breaks(tau, lo, hi, &[z.re, 0.0]);
        let r = integrate_with_breaks(
            |x| {
                let d = x - z.re;
                let half = (0.5 * tau * x).sin();
                let rho = 2.0 * half * half;
                let sing = if d == 0.0 { 0.0 } else { rho / d };
                Complex64::new(sing - rho * x / (1.0 + x * x), 0.0)
            },
            lo,
            hi,
            &breaks,
            opts,
        );
        acc.value += r.value;
        acc.error += r.error;
        acc.converged &= r.converged;
    }
    // tails: flat part analytically, cosine part asymptotically
    let mut tail = Complex64::new(0.0, 0.0);
    if s.hi > l {
        tail += kernel_antiderivative(s.hi, p) - kernel_antiderivative(l, p);
    }
    if s.lo < -l {
        tail += kernel_antiderivative(-l, p) - kernel_antiderivative(s.lo, p);
    }
    tail -= cosine_tails(tau, s.lo, s.hi, l, move |m, x| kernel_derivative(m, x, z));
    acc.value = acc.value * c + tail * c;
    acc.error *= c;
    acc
}

fn sinusoid_sigma_derivative(
    beta: f64,
    tau: f64,
    s: Interval,
    z: Complex64,
    opts: QuadOptions,
) -> Acc {
    let c = beta / (2.0 * PI);
    let x0 = z.re;
    let l = sinusoid_cut(tau, z);
    let (lo, hi) = (s.lo.max(-l), s.hi.min(l));
    let mut acc = Acc::exact(flat_sigma_derivative(c, s, z));
    let mut ct = Complex64::new(0.0, 0.0);
    if lo < hi {
        let subtract = x0 > lo && x0 < hi;
        let (f0, f1) = if subtract {
            ((tau * x0).cos(), -tau * (tau * x0).sin())
        } else {
            (0.0, 0.0)
        };
        let breaks = period_breaks(tau, lo, hi, &[x0]);
        let r = integrate_with_breaks(
            |x| {
                let d = Complex64::new(x, 0.0) - z;
                if d.norm_sqr() == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                ((tau * x).cos() - f0 - f1 * (x - x0)) / (d * d)
            },
            lo,
            hi,
            &breaks,
            opts,
        );
        ct += r.value;
        acc.error += c * r.error;
        acc.converged &= r.converged;
        if subtract {
            let inv_diff =
                (Complex64::new(lo, 0.0) - z).inv() - (Complex64::new(hi, 0.0) - z).inv();
            let logd = (Complex64::new(hi, 0.0) - z).ln() - (Complex64::new(lo, 0.0) - z).ln();
            // (λ - x0)/(λ - z)² = 1/(λ - z) + i y/(λ - z)²
            ct += inv_diff * f0 + (logd + I * z.im * inv_diff) * f1;
        }
    }
    ct += cosine_tails(tau, s.lo, s.hi, l, move |m, x| {
        square_kernel_derivative(m, x, z)
    });
    acc.value -= ct * c;
    acc
}

fn tabulated_sigma(grid: &[f64], values: &[f64], p: &Point) -> Acc {
    let z = p.z;
    let n = grid.len();
    let mut acc = Acc::zero();
    // log(x_k - z), with the cancelling node logs dropped on the boundary
    let logs: Vec<Complex64> = grid
        .iter()
        .map(|&x| {
            if p.touches(x) {
                Complex64::new(0.0, 0.0)
            } else {
                p.log_from(x)
            }
        })
        .collect();
    for i in 0..n - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (ya, yb) = (values[i], values[i + 1]);
        if ya == 0.0 && yb == 0.0 {
            continue;
        }
        let gamma = (yb - ya) / (b - a);
        let alpha = ya - gamma * a;
        let coeff = if p.boundary {
            // density at λ extended linearly from this cell
            Complex64::new(alpha + gamma * z.re, 0.0)
        } else {
            z * gamma + alpha
        };
        let cauchy = coeff * (logs[i + 1] - logs[i]) + gamma * (b - a);
        let reg = alpha * 0.5 * ((1.0 + b * b) / (1.0 + a * a)).ln()
            + gamma * ((b - a) - (b.atan() - a.atan()));
        acc.value += cauchy - reg;
    }
    let ends = [(grid[0], values[0]), (grid[n - 1], values[n - 1])];
    if ends.iter().any(|&(x, v)| p.touches(x) && v != 0.0) {
        acc.log_singular = true;
        acc.value = Complex64::new(f64::NAN, acc.value.im);
    }
    acc
}

fn tabulated_sigma_derivative(grid: &[f64], values: &[f64], z: Complex64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (ya, yb) = (values[i], values[i + 1]);
        if ya == 0.0 && yb == 0.0 {
            continue;
        }
        let gamma = (yb - ya) / (b - a);
        let alpha = ya - gamma * a;
        let (da, db) = (Complex64::new(a, 0.0) - z, Complex64::new(b, 0.0) - z);
        total += (db.ln() - da.ln()) * gamma + (z * gamma + alpha) * (da.inv() - db.inv());
    }
    total
}

/// Cut-off for function densities on infinite supports; beyond it the density
/// is frozen at its value on the cut and integrated in closed form.
fn function_cut(z: Complex64) -> f64 {
    (10.0 * (z.norm() + 1.0)).max(1e4)
}

fn function_sigma(piece: &DensityPiece, p: &Point, opts: QuadOptions) -> Acc {
    let s = piece.support;
    let z = p.z;
    let l = function_cut(z);
    let (lo, hi) = (s.lo.max(-l), s.hi.min(l));
    let mut acc = Acc::zero();
    if p.touches(s.lo) && piece.density(s.lo) != 0.0
        || p.touches(s.hi) && piece.density(s.hi) != 0.0
    {
        acc.log_singular = true;
        acc.value = Complex64::new(f64::NAN, PI * piece.density(z.re));
        return acc;
    }
    let x0 = z.re;
    let subtract = x0 > lo && x0 < hi;
    let f0 = if subtract { piece.density(x0) } else { 0.0 };
    let r = integrate_with_breaks(
        |x| {
            let rho = piece.density(x);
            let d = Complex64::new(x, 0.0) - z;
            let sing = if d.norm_sqr() == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (rho - f0) / d
            };
            sing - rho * x / (1.0 + x * x)
        },
        lo,
        hi,
        &[x0, 0.0],
        opts,
    );
    acc.value = r.value;
    acc.error = r.error;
    acc.converged = r.converged;
    if subtract {
        acc.value += p.log_diff(lo, hi) * f0;
    }
    for (edge, far, upper) in [(hi, s.hi, true), (lo, s.lo, false)] {
        if edge == far {
            continue;
        }
        let level = piece.density(edge);
        let iv = if upper {
            Interval { lo: edge, hi: far }
        } else {
            Interval { lo: far, hi: edge }
        };
        let t = flat_sigma(level, iv, p);
        let drift = (piece.density(2.0 * edge) - level).abs();
        acc.value += t.value;
        acc.error += drift * t.value.norm() / level.max(f64::MIN_POSITIVE);
    }
    acc
}

fn function_sigma_derivative(piece: &DensityPiece, z: Complex64, opts: QuadOptions) -> Acc {
    let s = piece.support;
    let l = function_cut(z);
    let (lo, hi) = (s.lo.max(-l), s.hi.min(l));
    let x0 = z.re;
    let subtract = x0 > lo && x0 < hi;
    let f0 = if subtract { piece.density(x0) } else { 0.0 };
    let r = integrate_with_breaks(
        |x| {
            let d = Complex64::new(x, 0.0) - z;
            (piece.density(x) - f0) / (d * d)
        },
        lo,
        hi,
        &[x0],
        opts,
    );
    let mut acc = Acc {
        value: r.value,
        error: r.error,
        converged: r.converged,
        log_singular: false,
    };
    if subtract {
        acc.value +=
            ((Complex64::new(lo, 0.0) - z).inv() - (Complex64::new(hi, 0.0) - z).inv()) * f0;
    }
    if s.hi > hi {
        acc.value += flat_sigma_derivative(piece.density(hi), Interval { lo: hi, hi: s.hi }, z);
    }
    if s.lo < lo {
        acc.value += flat_sigma_derivative(piece.density(lo), Interval { lo: s.lo, hi: lo }, z);
    }
    acc
}

fn piece_sigma(piece: &DensityPiece, p: &Point, opts: QuadOptions) -> Acc {
    match &piece.family {
        DensityFamily::Flat { level } => flat_sigma(*level, piece.support, p),
        DensityFamily::Sinusoidal { beta, tau } => {
            sinusoid_sigma(*beta, *tau, piece.support, p, opts)
        }
        DensityFamily::Tabulated { grid, values } => tabulated_sigma(grid, values, p),
        DensityFamily::Function { .. } => function_sigma(piece, p, opts),
    }
}

fn piece_sigma_derivative(piece: &DensityPiece, z: Complex64, opts: QuadOptions) -> Acc {
    match &piece.family {
        DensityFamily::Flat { level } => {
            Acc::exact(flat_sigma_derivative(*level, piece.support, z))
        }
        DensityFamily::Sinusoidal { beta, tau } => {
            sinusoid_sigma_derivative(*beta, *tau, piece.support, z, opts)
        }
        DensityFamily::Tabulated { grid, values } => {
            Acc::exact(tabulated_sigma_derivative(grid, values, z))
        }
        DensityFamily::Function { .. } => function_sigma_derivative(piece, z, opts),
    }
}

fn check(acc: &Acc, opts: &SigmaOptions) -> FlResult<()> {
    let tol = 10.0 * opts.quad.abs_tol.max(opts.quad.rel_tol * acc.value.norm());
    if !acc.converged && acc.error > tol {
        return Err(FlError::QuadratureFailure {
            estimate: acc.error,
            tolerance: tol,
        });
    }
    Ok(())
}

fn upper_sigma(kappa: &CouplingMeasure, z: Complex64, opts: &SigmaOptions) -> Acc {
    let p = Point { z, boundary: false };
    let mut acc = Acc::zero();
    for piece in &kappa.ac {
        acc.add(piece_sigma(piece, &p, opts.quad));
    }
    for a in &kappa.atoms {
        acc.value += ((Complex64::new(a.location, 0.0) - z).inv()
            - a.location / (1.0 + a.location * a.location))
            * a.weight;
    }
    for c in &kappa.combs {
        acc.value += c.sigma(z);
    }
    for c in &kappa.cascades {
        acc.value += c.sigma(z);
    }
    acc
}

/// `Σ(z)` with default tolerances.
pub fn sigma(kappa: &CouplingMeasure, z: Complex64) -> FlResult<SelfEnergyValue> {
    sigma_with(kappa, z, &SigmaOptions::default())
}

pub fn sigma_with(
    kappa: &CouplingMeasure,
    z: Complex64,
    opts: &SigmaOptions,
) -> FlResult<SelfEnergyValue> {
    if z.im == 0.0 || !z.is_finite() {
        return Err(FlError::InvalidArgument(format!(
            "sigma needs Im z != 0, got {z}"
        )));
    }
    let flip = z.im < 0.0;
    let acc = upper_sigma(kappa, if flip { z.conj() } else { z }, opts);
    check(&acc, opts)?;
    let v = if flip { acc.value.conj() } else { acc.value };
    Ok(SelfEnergyValue {
        re: v.re,
        im: v.im,
        im_divergent: false,
        log_singular: false,
        pv_error_estimate: acc.error,
    })
}

/// `Σ(z)` as a complex number.
pub fn sigma_value(
    kappa: &CouplingMeasure,
    z: Complex64,
    opts: &SigmaOptions,
) -> FlResult<Complex64> {
    sigma_with(kappa, z, opts).map(|v| v.value())
}

/// `Σ⁺(λ) = lim_{δ↓0} Σ(λ + iδ)`.
///
/// At points carrying mass the result has `im_divergent` set; at density
/// jumps the real part is replaced by NaN and `log_singular` is set.
pub fn sigma_boundary(kappa: &CouplingMeasure, lambda: f64) -> FlResult<BoundaryValue> {
    sigma_boundary_with(kappa, lambda, &SigmaOptions::default())
}

pub fn sigma_boundary_with(
    kappa: &CouplingMeasure,
    lambda: f64,
    opts: &SigmaOptions,
) -> FlResult<BoundaryValue> {
    if !lambda.is_finite() {
        return Err(FlError::InvalidArgument(format!(
            "boundary point must be finite, got {lambda}"
        )));
    }
    let rho = kappa.ac_density(lambda);
    if kappa.point_mass(lambda) > 0.0 {
        return Ok(BoundaryValue {
            lambda,
            sigma_plus: SelfEnergyValue {
                re: f64::NAN,
                im: f64::INFINITY,
                im_divergent: true,
                log_singular: false,
                pv_error_estimate: 0.0,
            },
            ac_density_at_lambda: rho,
        });
    }
    let z = Complex64::new(lambda, 0.0);
    let p = Point { z, boundary: true };
    let mut acc = Acc::zero();
    for piece in &kappa.ac {
        acc.add(piece_sigma(piece, &p, opts.quad));
    }
    for a in &kappa.atoms {
        acc.value +=
            a.weight * (1.0 / (a.location - lambda) - a.location / (1.0 + a.location * a.location));
    }
    for c in &kappa.combs {
        acc.value += c.sigma(z).re;
    }
    for c in &kappa.cascades {
        acc.value += c.sigma(z).re;
    }
    check(&acc, opts)?;
    let im = if acc.log_singular {
        PI * rho
    } else {
        acc.value.im
    };
    Ok(BoundaryValue {
        lambda,
        sigma_plus: SelfEnergyValue {
            re: if acc.log_singular {
                f64::NAN
            } else {
                acc.value.re
            },
            im,
            im_divergent: false,
            log_singular: acc.log_singular,
            pv_error_estimate: acc.error,
        },
        ac_density_at_lambda: rho,
    })
}

/// `Σ′(z) = ∫ dκ(λ) / (λ - z)²`.
pub fn sigma_derivative(kappa: &CouplingMeasure, z: Complex64) -> FlResult<Complex64> {
    sigma_derivative_with(kappa, z, &SigmaOptions::default())
}

pub fn sigma_derivative_with(
    kappa: &CouplingMeasure,
    z: Complex64,
    opts: &SigmaOptions,
) -> FlResult<Complex64> {
    if z.im == 0.0 || !z.is_finite() {
        return Err(FlError::InvalidArgument(format!(
            "sigma_derivative needs Im z != 0, got {z}"
        )));
    }
    let flip = z.im < 0.0;
    let zz = if flip { z.conj() } else { z };
    let mut acc = Acc::zero();
    for piece in &kappa.ac {
        acc.add(piece_sigma_derivative(piece, zz, opts.quad));
    }
    for a in &kappa.atoms {
        let d = Complex64::new(a.location, 0.0) - zz;
        acc.value += (d * d).inv() * a.weight;
    }
    for c in &kappa.combs {
        acc.value += c.sigma_derivative(zz);
    }
    for c in &kappa.cascades {
        acc.value += c.sigma_derivative(zz);
    }
    check(&acc, opts)?;
    Ok(if flip { acc.value.conj() } else { acc.value })
}

/// Default δ ladder for Stieltjes inversion.
pub const STIELTJES_DELTAS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// `(1/π) ∫_a^b Im Σ(λ + iδ) dλ`, extrapolated to `δ → 0`.
///
/// Each consecutive pair of δ values gives a Richardson estimate that removes
/// the linear term; the last one is returned. The difference to the previous
/// estimate, scaled by `(δ_n/δ_{n-1})²`, serves as its error bound.
pub fn stieltjes_invert(kappa: &CouplingMeasure, a: f64, b: f64, deltas: &[f64]) -> FlResult<f64> {
    stieltjes_invert_with(kappa, a, b, deltas, 1e-6)
}

pub fn stieltjes_invert_with(
    kappa: &CouplingMeasure,
    a: f64,
    b: f64,
    deltas: &[f64],
    tolerance: f64,
) -> FlResult<f64> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(FlError::InvalidArgument(format!(
            "need finite a < b, got [{a}, {b}]"
        )));
    }
    if deltas.len() < 3
        || deltas.windows(2).any(|w| !(w[1] < w[0]))
        || deltas.iter().any(|d| !(*d > 0.0))
    {
        return Err(FlError::InvalidArgument(
            "need at least three decreasing positive deltas".into(),
        ));
    }
    let mut breaks: Vec<f64> = kappa.atoms.iter().map(|x| x.location).collect();
    for p in &kappa.ac {
        breaks.push(p.support.lo);
        breaks.push(p.support.hi);
        breaks.extend(p.kinks());
    }
    for c in &kappa.combs {
        let (j0, j1) = ((a / c.tau).ceil() as i64, (b / c.tau).floor() as i64);
        if j1 - j0 < 10_000 {
            breaks.extend((j0..=j1).map(|j| j as f64 * c.tau));
        }
    }
    breaks.retain(|x| x.is_finite());
    let opts = SigmaOptions::with_abs_tol(1e-12);
    let mut estimates = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let mut failure = None;
        let r = integrate_with_breaks(
            |x| match sigma_with(kappa, Complex64::new(x, d), &opts) {
                Ok(v) => Complex64::new(v.im / PI, 0.0),
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            },
            a,
            b,
            &breaks,
            QuadOptions {
                abs_tol: 1e-11,
                rel_tol: 1e-12,
                max_intervals: 20_000,
            },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        estimates.push(r.value.re);
    }
    let richardson: Vec<f64> = deltas
        .windows(2)
        .zip(estimates.windows(2))
        .map(|(d, e)| {
            let r = d[0] / d[1];
            (r * e[1] - e[0]) / (r - 1.0)
        })
        .collect();
    let n = richardson.len();
    let value = richardson[n - 1];
    let ratio = deltas[deltas.len() - 1] / deltas[deltas.len() - 2];
    let spread = (richardson[n - 1] - richardson[n - 2]).abs() * ratio * ratio;
    if spread > tolerance * value.abs().max(1.0) {
        return Err(FlError::NonConvergent { spread, tolerance });
    }
    Ok(value)
}

/// Families with a closed-form self-energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClosedFormFamily {
    /// Density `beta / 2π` on ℝ.
    FlatLine { beta: f64 },
    /// Density `beta` on `[0, ∞)`.
    FlatHalfLine { beta: f64 },
    /// Density `(beta / 2π)(1 - cos τλ)` on ℝ.
    Sinusoidal { beta: f64, tau: f64 },
    /// Atoms of weight `beta τ / 2π` on `τ ℤ`.
    PeriodicComb { beta: f64, tau: f64 },
}

impl ClosedFormFamily {
    pub fn measure(&self) -> FlResult<CouplingMeasure> {
        match *self {
            ClosedFormFamily::FlatLine { beta } => CouplingMeasure::flat_line(beta),
            ClosedFormFamily::FlatHalfLine { beta } => CouplingMeasure::flat_half_line(beta),
            ClosedFormFamily::Sinusoidal { beta, tau } => CouplingMeasure::sinusoidal(beta, tau),
            ClosedFormFamily::PeriodicComb { beta, tau } => {
                CouplingMeasure::periodic_comb(beta, tau)
            }
        }
    }

    /// Recognises a measure consisting of exactly one family piece.
    pub fn detect(kappa: &CouplingMeasure) -> Option<Self> {
        if !kappa.atoms.is_empty() || !kappa.cascades.is_empty() {
            return None;
        }
        match (kappa.ac.as_slice(), kappa.combs.as_slice()) {
            ([p], []) => match p.family {
                DensityFamily::Flat { level } if p.support == Interval::REAL_LINE => {
                    Some(ClosedFormFamily::FlatLine {
                        beta: 2.0 * PI * level,
                    })
                }
                DensityFamily::Flat { level } if p.support == Interval::half_line() => {
                    Some(ClosedFormFamily::FlatHalfLine { beta: level })
                }
                DensityFamily::Sinusoidal { beta, tau } if p.support == Interval::REAL_LINE => {
                    Some(ClosedFormFamily::Sinusoidal { beta, tau })
                }
                _ => None,
            },
            ([], [c]) => Some(ClosedFormFamily::PeriodicComb {
                beta: c.beta,
                tau: c.tau,
            }),
            _ => None,
        }
    }
}

pub fn sigma_closed_form(family: ClosedFormFamily, z: Complex64) -> FlResult<Complex64> {
    let domain = |msg: &str| Err(FlError::DomainViolation(format!("{msg}, got z = {z}")));
    match family {
        ClosedFormFamily::FlatLine { beta } => {
            if z.im == 0.0 {
                return domain("flat line needs Im z != 0");
            }
            Ok(Complex64::new(0.0, 0.5 * beta * z.im.signum()))
        }
        ClosedFormFamily::FlatHalfLine { beta } => {
            if z.im == 0.0 && z.re >= 0.0 {
                return domain("half line needs z outside [0, ∞)");
            }
            Ok(-(-z).ln() * beta)
        }
        ClosedFormFamily::Sinusoidal { beta, tau } => {
            if z.im == 0.0 {
                return domain("sinusoidal family needs Im z != 0");
            }
            let t = tau.abs();
            if z.im > 0.0 {
                Ok(I * (0.5 * beta) * (1.0 - (I * t * z).exp()))
            } else {
                Ok(-I * (0.5 * beta) * (1.0 - (-I * t * z).exp()))
            }
        }
        ClosedFormFamily::PeriodicComb { beta, tau } => {
            let u = z / tau;
            if z.im == 0.0 && u.re == u.re.round() {
                return domain("comb needs z off τℤ");
            }
            Ok(-cot_pi(u) * (0.5 * beta))
        }
    }
}
