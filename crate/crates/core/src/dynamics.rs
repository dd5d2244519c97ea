//! Survival amplitude `x(t)`, boson wavefunction `ξ(t, k)` and the unitarity
//! check, all from the spectral measure `ν` of `Π(z) = 1/(ε - z - Σ(z))`.
//!
//! `ν` is a sum of poles (weights `1/(1+G)`) and the density
//! `ρ(λ) / |ε - λ - Σ⁺(λ)|²` on the a.c. support. Beyond a cut `L` the
//! density is modelled as `ρ_∞(λ) / (λ - a)²` with `a = ε - Re Σ⁺(±L)` and
//! the Fourier tails are done with `E₂`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FlError, FlResult};
use crate::measure::{
    pushforward, Atom, CouplingMeasure, DensityFamily, DispersionModel, DyadicCascade, Interval,
    DEFAULT_DIVERGENCE_THRESHOLD,
};
use crate::quad::{fourier_integral, integrate_with_breaks, QuadOptions, QuadResult};
use crate::selfenergy::{
    sigma_boundary_with, sigma_closed_form, sigma_value, ClosedFormFamily, SigmaOptions,
};
use crate::special::expint_en;
use crate::spectral::{ac_intervals, solve_pole_equation_with, SpectralOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Depth to which cascades are truncated before their (finite) pp dynamics is summed.
pub const CASCADE_TRUNCATION: u32 = 8;
/// Number of comb periods on either side of `ε` whose eigenvalues are kept.
pub const COMB_HALF_WIDTH: f64 = 500.0;

pub fn pi_function(kappa: &CouplingMeasure, epsilon: f64, z: Complex64) -> FlResult<Complex64> {
    pi_function_with(kappa, epsilon, z, &SigmaOptions::default())
}

pub fn pi_function_with(
    kappa: &CouplingMeasure,
    epsilon: f64,
    z: Complex64,
    opts: &SigmaOptions,
) -> FlResult<Complex64> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(FlError::DomainViolation(format!(
            "Π needs Im z ≠ 0, got {z}"
        )));
    }
    let s = sigma_value(kappa, z, opts)?;
    Ok(1.0 / (epsilon - z - s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTrace {
    #[serde(with = "crate::schema::num::vec")]
    pub times: Vec<f64>,
    #[serde(with = "crate::schema::num::cvec")]
    pub amplitudes: Vec<Complex64>,
    #[serde(with = "crate::schema::num::vec")]
    pub quadrature_error: Vec<f64>,
    /// Set when part of the spectrum could only be approximated (combs, cascades).
    pub approximate: bool,
    pub warnings: Vec<String>,
}

impl SurvivalTrace {
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|x| x.norm_sqr()).collect()
    }

    /// CSV with columns `t, re_x, im_x, abs2, error`.
    pub fn to_csv(&self) -> String {
        use crate::schema::num::round12;
        let mut out = String::from("t,re_x,im_x,abs2,error\n");
        for ((t, x), e) in self
            .times
            .iter()
            .zip(&self.amplitudes)
            .zip(&self.quadrature_error)
        {
            // abs2 from the written components, so re-reading reproduces the row
            let x = Complex64::new(round12(x.re), round12(x.im));
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt12(*t),
                fmt12(x.re),
                fmt12(x.im),
                fmt12(x.norm_sqr()),
                fmt12(*e)
            ));
        }
        out
    }
}

pub(crate) fn fmt12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let r = crate::schema::num::round12(x);
        if r != 0.0 && !(1e-4..1e15).contains(&r.abs()) {
            format!("{r:e}")
        } else {
            format!("{r}")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    pub sigma: SigmaOptions,
    /// Absolute tolerance of the spectral integrals.
    pub abs_tol: f64,
    pub pole_grid: usize,
    pub root_tol: f64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            sigma: SigmaOptions::default(),
            abs_tol: 1e-11,
            pole_grid: 2048,
            root_tol: 1e-12,
        }
    }
}

/// `ρ(λ) ≈ Σ c_k e^{i q_k λ}` far out on one side.
#[derive(Debug, Clone, Default)]
struct TailModel {
    terms: Vec<(f64, f64)>,
    shift: f64,
    /// Change of the tail value when the shift is frozen at `2L` instead of `L`.
    spread_shift: f64,
}

#[derive(Debug, Clone)]
struct Segment {
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
    lower_tail: Option<TailModel>,
    upper_tail: Option<TailModel>,
}

/// Spectral measure of `Π`: poles plus a.c. density.
pub struct PiSpectrum {
    kappa: CouplingMeasure,
    epsilon: f64,
    opts: DynamicsOptions,
    /// `(λ_j, weight_j)`.
    pub poles: Vec<(f64, f64)>,
    segments: Vec<Segment>,
    cut: f64,
    /// Closed-form boundary values, used far out where quadrature gets expensive.
    family: Option<ClosedFormFamily>,
    pub approximate: bool,
    pub warnings: Vec<String>,
}

fn truncate_cascade(c: &DyadicCascade) -> Vec<Atom> {
    let depth = c.depth.min(CASCADE_TRUNCATION);
    let t = DyadicCascade { depth, ..*c };
    let m = (depth as f64).exp2() as u64;
    (1..=m)
        .map(|j| {
            let x = j as f64 / m as f64;
            Atom {
                location: x,
                weight: t.weight_at(x),
            }
        })
        .collect()
}

fn finite_extent(kappa: &CouplingMeasure) -> f64 {
    let mut r: f64 = 1.0;
    for p in &kappa.ac {
        for x in [p.support.lo, p.support.hi] {
            if x.is_finite() {
                r = r.max(x.abs());
            }
        }
    }
    for a in &kappa.atoms {
        r = r.max(a.location.abs());
    }
    r
}

fn geometric_breaks(lo: f64, hi: f64, r0: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = r0;
    while x < hi.abs().max(lo.abs()) {
        for s in [x, -x] {
            if s > lo && s < hi {
                out.push(s);
            }
        }
        x *= 2.0;
    }
    out
}

/// `∫_L^∞ e^{-isλ} / (λ - a)² dλ` for `L > a`.
fn inv_square_tail(l: f64, a: f64, s: f64) -> Complex64 {
    let d = l - a;
    if s == 0.0 {
        return Complex64::new(1.0 / d, 0.0);
    }
    let e2 = expint_en(Complex64::new(0.0, s * d), 2)[1];
    Complex64::new(0.0, -s * a).exp() * e2 / d
}

impl TailModel {
    /// Upper (`λ > L`) or lower (`λ < -L`) tail of `∫ e^{-iλt} ρ(λ)/(λ - a)² dλ`.
    fn integral(&self, l: f64, t: f64, shift: f64, upper: bool) -> Complex64 {
        self.terms
            .iter()
            .map(|&(c, q)| {
                if upper {
                    c * inv_square_tail(l, shift, t - q)
                } else {
                    c * inv_square_tail(l, -shift, -(t - q))
                }
            })
            .sum()
    }

    fn value(&self, l: f64, t: f64, upper: bool) -> (Complex64, f64) {
        let v = self.integral(l, t, self.shift, upper);
        let alt = self.integral(l, t, self.spread_shift, upper);
        (v, (v - alt).norm())
    }
}

impl PiSpectrum {
    pub fn new(kappa: &CouplingMeasure, epsilon: f64, opts: &DynamicsOptions) -> FlResult<Self> {
        let mut warnings = Vec::new();
        let mut approximate = false;
        let mut k = kappa.clone();
        if !k.cascades.is_empty() {
            approximate = true;
            warnings.push(format!(
                "UnresolvedScPart: cascades truncated at depth {CASCADE_TRUNCATION}"
            ));
            for c in std::mem::take(&mut k.cascades) {
                k.atoms.extend(truncate_cascade(&c));
            }
        }
        let family = continuous_family(&k);
        let r = finite_extent(&k);
        let cut = (100.0 * (1.0 + epsilon.abs() + r)).max(1e4);
        let sopts = SpectralOptions {
            grid_n: opts.pole_grid,
            root_tol: opts.root_tol,
            sigma: opts.sigma,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            cascade_probes: 0,
        };

        let window = if let Some(tau) = k.combs.iter().map(|c| c.tau).reduce(f64::max) {
            approximate = true;
            warnings.push(format!(
                "comb eigenvalues kept within {COMB_HALF_WIDTH} periods of epsilon"
            ));
            Interval {
                lo: epsilon - COMB_HALF_WIDTH * tau,
                hi: epsilon + COMB_HALF_WIDTH * tau,
            }
        } else {
            let far = 10.0 * (1.0 + r + epsilon.abs());
            let mut shift = 0.0;
            for x in [-far, far] {
                let re = boundary_re(&k, family, x, &opts.sigma)?;
                if re.is_finite() {
                    shift += re.abs();
                }
            }
            let w = 10.0 + 2.0 * (epsilon.abs() + r + shift);
            Interval { lo: -w, hi: w }
        };
        let poles = match solve_pole_equation_with(&k, epsilon, window, &sopts) {
            Ok(s) => {
                warnings.extend(s.warnings);
                s.solutions
                    .into_iter()
                    .filter_map(|p| p.weight.map(|w| (p.lambda, w)))
                    .collect()
            }
            Err(FlError::WindowInsideAcSupport { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };

        let mut segments = Vec::new();
        let all = Interval::REAL_LINE;
        let mut kinks: Vec<f64> = vec![epsilon];
        for p in &k.ac {
            kinks.extend(p.kinks());
            kinks.extend(
                [p.support.lo, p.support.hi]
                    .into_iter()
                    .filter(|x| x.is_finite()),
            );
        }
        for iv in ac_intervals_unbounded(&k, &all) {
            let lo = iv.lo.max(-cut);
            let hi = iv.hi.min(cut);
            if lo >= hi {
                continue;
            }
            let mut breaks = geometric_breaks(lo, hi, 1.0 + epsilon.abs().max(r));
            breaks.extend(kinks.iter().copied().filter(|x| *x > lo && *x < hi));
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let lower_tail = (iv.lo < -cut)
                .then(|| tail_model(&k, family, epsilon, -cut, opts))
                .transpose()?;
            let upper_tail = (iv.hi > cut)
                .then(|| tail_model(&k, family, epsilon, cut, opts))
                .transpose()?;
            segments.push(Segment {
                lo,
                hi,
                breaks,
                lower_tail,
                upper_tail,
            });
        }
        let spec = Self {
            kappa: k,
            epsilon,
            opts: *opts,
            poles,
            segments,
            cut,
            family,
            approximate,
            warnings,
        };
        Ok(spec)
    }

    /// Density of `ν` at `λ`.
    pub fn density(&self, lambda: f64) -> FlResult<f64> {
        let rho = self.kappa.ac_density(lambda);
        if rho == 0.0 {
            return Ok(0.0);
        }
        let re = boundary_re(&self.kappa, self.family, lambda, &self.opts.sigma)?;
        if re.is_nan() {
            return Ok(0.0);
        }
        let d = self.epsilon - lambda - re;
        Ok(rho / (d * d + (PI * rho) * (PI * rho)))
    }

    /// `∫ e^{-iλt} f(λ) dν_ac(λ)` with `f` smooth and bounded; `f = 1` uses the tails.
    fn ac_fourier(
        &self,
        t: f64,
        with_tails: bool,
        f: &dyn Fn(f64) -> Complex64,
    ) -> FlResult<QuadResult> {
        let err: RefCell<Option<FlError>> = RefCell::new(None);
        let dens = |x: f64| match self.density(x) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let mut total = QuadResult::ZERO;
        for s in &self.segments {
            let mut pts = vec![s.lo];
            pts.extend(&s.breaks);
            pts.push(s.hi);
            let tol = self.opts.abs_tol / pts.len() as f64;
            let qo = QuadOptions {
                abs_tol: tol,
                rel_tol: 1e-13,
                max_intervals: 4000,
            };
            for w in pts.windows(2) {
                let r = fourier_integral(|x| dens(x) * f(x), w[0], w[1], t, &[], qo);
                total = total.add(r);
            }
            if with_tails {
                for (tail, upper) in [(&s.lower_tail, false), (&s.upper_tail, true)] {
                    if let Some(m) = tail {
                        let (v, e) = m.value(self.cut, t, upper);
                        total = total.add(QuadResult {
                            value: v,
                            error: e,
                            converged: true,
                        });
                    }
                }
            }
        }
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(total)
    }

    /// `x(t)` and its error estimate.
    pub fn survival(&self, t: f64) -> FlResult<(Complex64, f64)> {
        let mut x: Complex64 = self
            .poles
            .iter()
            .map(|&(l, w)| w * Complex64::new(0.0, -l * t).exp())
            .sum();
        let ac = self.ac_fourier(t, true, &|_| Complex64::new(1.0, 0.0))?;
        x += ac.value;
        Ok((x, ac.error))
    }

    /// Total pole weight plus a.c. mass.
    pub fn total_mass(&self) -> FlResult<f64> {
        Ok(self.survival(0.0)?.0.re)
    }

    /// `Φ(t, w) = ∫ dν(λ) (e^{-iλt} - e^{-iwt}) / (w - λ)`, so that `ξ(t,k) = -g(k) Φ(t, ω(k))`.
    pub fn phi(&self, t: f64, w: f64) -> FlResult<Complex64> {
        let mut acc: Complex64 = self.poles.iter().map(|&(l, wt)| wt * kernel(t, w, l)).sum();
        if self.segments.is_empty() {
            return Ok(acc);
        }
        let err: RefCell<Option<FlError>> = RefCell::new(None);
        let dens = |x: f64| match self.density(x) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        // near w the kernel is used as is; far away it splits into a Fourier
        // integral and a plain Cauchy integral
        let near = (20.0f64).max(4.0 * PI / t.max(1e-300)).min(self.cut);
        let ew = Complex64::new(0.0, -w * t).exp();
        let qo = QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4000,
        };
        for s in &self.segments {
            let (nlo, nhi) = ((w - near).max(s.lo), (w + near).min(s.hi));
            let mut pts: Vec<f64> = s.breaks.clone();
            pts.push(w);
            if nlo < nhi {
                let r = integrate_with_breaks(|x| dens(x) * kernel(t, w, x), nlo, nhi, &pts, qo);
                acc += r.value;
            }
            for (a, b) in [(s.lo, nlo.min(s.hi)), (nhi.max(s.lo), s.hi)] {
                if a >= b {
                    continue;
                }
                let inner: Vec<f64> = pts.iter().copied().filter(|x| *x > a && *x < b).collect();
                let mut edges = vec![a];
                edges.extend(inner);
                edges.push(b);
                for e in edges.windows(2) {
                    let f1 = fourier_integral(
                        |x| Complex64::new(dens(x) / (w - x), 0.0),
                        e[0],
                        e[1],
                        t,
                        &[],
                        qo,
                    );
                    let f2 = integrate_with_breaks(
                        |x| Complex64::new(dens(x) / (w - x), 0.0),
                        e[0],
                        e[1],
                        &[],
                        qo,
                    );
                    acc += f1.value - ew * f2.value;
                }
            }
        }
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(acc)
    }
}

/// `(e^{-iλt} - e^{-iwt}) / (w - λ)` without cancellation.
fn kernel(t: f64, w: f64, lambda: f64) -> Complex64 {
    let d = lambda - w;
    let half = 0.5 * d * t;
    // (1 - e^{-idt}) / d = i t e^{-idt/2} sinc(dt/2)
    let sinc = if half.abs() < 1e-8 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    Complex64::new(0.0, -w * t).exp() * I * t * Complex64::new(0.0, -half).exp() * sinc
}

/// Families whose boundary values are continuous across the real axis.
fn continuous_family(kappa: &CouplingMeasure) -> Option<ClosedFormFamily> {
    ClosedFormFamily::detect(kappa).filter(|f| !matches!(f, ClosedFormFamily::PeriodicComb { .. }))
}

/// `Re Σ⁺(x)`, NaN where it is singular.
fn boundary_re(
    kappa: &CouplingMeasure,
    family: Option<ClosedFormFamily>,
    x: f64,
    opts: &SigmaOptions,
) -> FlResult<f64> {
    if let Some(f) = family {
        let v = sigma_closed_form(f, Complex64::new(x, f64::MIN_POSITIVE))?.re;
        return Ok(if v.is_finite() { v } else { f64::NAN });
    }
    let b = sigma_boundary_with(kappa, x, opts)?;
    Ok(if b.sigma_plus.is_regular() {
        b.sigma_plus.re
    } else {
        f64::NAN
    })
}

fn tail_model(
    kappa: &CouplingMeasure,
    family: Option<ClosedFormFamily>,
    epsilon: f64,
    at: f64,
    opts: &DynamicsOptions,
) -> FlResult<TailModel> {
    let mut terms = Vec::new();
    for p in &kappa.ac {
        if !p.support.contains(at) {
            continue;
        }
        match &p.family {
            DensityFamily::Flat { level } => terms.push((*level, 0.0)),
            DensityFamily::Sinusoidal { beta, tau } => {
                let c = beta / (2.0 * PI);
                terms.extend([(c, 0.0), (-0.5 * c, *tau), (-0.5 * c, -*tau)]);
            }
            _ => terms.push((p.density(at), 0.0)),
        }
    }
    let shift_at = |x: f64| -> FlResult<f64> {
        let re = boundary_re(kappa, family, x, &opts.sigma)?;
        Ok(epsilon - if re.is_finite() { re } else { 0.0 })
    };
    Ok(TailModel {
        terms,
        shift: shift_at(at)?,
        spread_shift: shift_at(2.0 * at)?,
    })
}

/// A.c. intervals of the whole line, unbounded ends kept.
fn ac_intervals_unbounded(kappa: &CouplingMeasure, _all: &Interval) -> Vec<Interval> {
    let big = 1e300;
    ac_intervals(kappa, &Interval { lo: -big, hi: big })
        .into_iter()
        .map(|iv| Interval {
            lo: if iv.lo <= -big {
                f64::NEG_INFINITY
            } else {
                iv.lo
            },
            hi: if iv.hi >= big { f64::INFINITY } else { iv.hi },
        })
        .collect()
}

pub fn survival_amplitude(
    kappa: &CouplingMeasure,
    epsilon: f64,
    times: &[f64],
) -> FlResult<SurvivalTrace> {
    survival_amplitude_with(kappa, epsilon, times, &DynamicsOptions::default())
}

pub fn survival_amplitude_with(
    kappa: &CouplingMeasure,
    epsilon: f64,
    times: &[f64],
    opts: &DynamicsOptions,
) -> FlResult<SurvivalTrace> {
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(FlError::InvalidArgument(format!(
            "times must be finite and ≥ 0, got {t}"
        )));
    }
    let spec = PiSpectrum::new(kappa, epsilon, opts)?;
    trace_from(&spec, times)
}

/// Evaluates a trace over an existing spectrum; times are sorted on output.
pub fn trace_from(spec: &PiSpectrum, times: &[f64]) -> FlResult<SurvivalTrace> {
    let mut ts = times.to_vec();
    ts.sort_by(f64::total_cmp);
    let mut amplitudes = Vec::with_capacity(ts.len());
    let mut errors = Vec::with_capacity(ts.len());
    for &t in &ts {
        let (x, e) = spec.survival(t)?;
        amplitudes.push(x);
        errors.push(e);
    }
    let mut warnings = spec.warnings.clone();
    if !spec.approximate {
        let mass = spec.total_mass()?;
        if (mass - 1.0).abs() > 1e-6 {
            warnings.push(format!("total spectral mass {mass} differs from 1"));
        }
    }
    Ok(SurvivalTrace {
        times: ts,
        amplitudes,
        quadrature_error: errors,
        approximate: spec.approximate,
        warnings,
    })
}

pub fn boson_wavefunction(
    model: &DispersionModel,
    epsilon: f64,
    t: f64,
    k_samples: &[f64],
) -> FlResult<Vec<Complex64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(FlError::InvalidArgument(format!(
            "t must be finite and ≥ 0, got {t}"
        )));
    }
    let kappa = pushforward(model)?;
    if t == 0.0 || kappa.is_zero() {
        return Ok(vec![Complex64::new(0.0, 0.0); k_samples.len()]);
    }
    let spec = PiSpectrum::new(&kappa, epsilon, &DynamicsOptions::default())?;
    k_samples
        .iter()
        .map(|&k| match model.omega(k) {
            Some(w) => {
                let g = model.form_factor.eval(k);
                if g == Complex64::new(0.0, 0.0) {
                    Ok(g)
                } else {
                    Ok(-g * spec.phi(t, w)?)
                }
            }
            None => Ok(Complex64::new(0.0, 0.0)),
        })
        .collect()
}

/// `‖ξ(t)‖² = ∫ |Φ(t, λ)|² dκ(λ)` over the pushed-forward coupling measure.
pub fn boson_norm_sq(spec: &PiSpectrum, kappa: &CouplingMeasure, t: f64) -> FlResult<f64> {
    let mut total = 0.0;
    for a in &kappa.atoms {
        total += a.weight * spec.phi(t, a.location)?.norm_sqr();
    }
    if !kappa.combs.is_empty() || !kappa.cascades.is_empty() {
        return Err(FlError::InvalidArgument(
            "boson norm needs a coupling measure without combs or cascades".into(),
        ));
    }
    if kappa.ac.is_empty() {
        return Ok(total);
    }
    let (x, _) = spec.survival(t)?;
    let cut = 200.0 * (1.0 + spec.epsilon.abs() + finite_extent(kappa));
    let err: RefCell<Option<FlError>> = RefCell::new(None);
    let f = |w: f64| -> Complex64 {
        let rho = kappa.ac_density(w);
        if rho == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match spec.phi(t, w) {
            Ok(p) => Complex64::new(rho * p.norm_sqr(), 0.0),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let qo = QuadOptions {
        abs_tol: 1e-8,
        rel_tol: 1e-10,
        max_intervals: 20000,
    };
    for iv in ac_intervals_unbounded(kappa, &Interval::REAL_LINE) {
        let lo = iv.lo.max(-cut);
        let hi = iv.hi.min(cut);
        if lo < hi {
            let mut br = geometric_breaks(lo, hi, 1.0);
            br.push(spec.epsilon);
            // resolve the oscillation e^{-iwt} inside |Φ|²
            let step = PI / t.max(1e-3);
            let mut x = (lo / step).ceil() * step;
            while x < hi.min(50.0 * step + lo.max(-50.0 * step)) {
                br.push(x);
                x += step;
            }
            total += integrate_with_breaks(f, lo, hi, &br, qo).value.re;
        }
        // far out Φ(t, w) ≈ (x(t) - e^{-iwt}) / w
        for (edge, upper) in [(iv.lo, false), (iv.hi, true)] {
            if (upper && edge > cut) || (!upper && edge < -cut) {
                let at = if upper { cut } else { -cut };
                let rho = kappa.ac_density(at);
                let osc = if upper {
                    inv_square_tail(cut, 0.0, t)
                } else {
                    inv_square_tail(cut, 0.0, -t)
                };
                total += rho * ((x.norm_sqr() + 1.0) / cut - 2.0 * (x.conj() * osc).re);
            }
        }
    }
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(total)
}

/// `|x(t)|² + ‖ξ(t)‖² - 1`.
pub fn unitarity_check(model: &DispersionModel, epsilon: f64, t: f64) -> FlResult<f64> {
    let kappa = pushforward(model)?;
    if kappa.is_zero() {
        return Ok(0.0);
    }
    let spec = PiSpectrum::new(&kappa, epsilon, &DynamicsOptions::default())?;
    let (x, _) = spec.survival(t)?;
    Ok(x.norm_sqr() + boson_norm_sq(&spec, &kappa, t)? - 1.0)
}
