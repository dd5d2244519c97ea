//! Pole equation `ε - λ = Σ⁺(λ)`, spectral classification, eigenvalue
//! weights and eigenvectors.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FlError, FlResult};
use crate::measure::{
    g_function, pushforward, CouplingMeasure, DensityFamily, DispersionModel, DyadicCascade,
    Interval, DEFAULT_DIVERGENCE_THRESHOLD,
};
use crate::quad::{integrate_real, QuadOptions};
use crate::selfenergy::{sigma_boundary_with, SigmaOptions};
use crate::special::{lambert_w0, lambert_w0_ln};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleSolution {
    #[serde(with = "crate::schema::num")]
    pub lambda: f64,
    #[serde(with = "crate::schema::num")]
    pub residual: f64,
    #[serde(with = "crate::schema::num")]
    pub g_value: f64,
    /// `1 / (1 + G)` when `G` is finite.
    #[serde(with = "crate::schema::num::opt")]
    pub weight: Option<f64>,
}

impl PoleSolution {
    fn new(kappa: &CouplingMeasure, lambda: f64, residual: f64, threshold: f64) -> Self {
        let g = g_function(kappa, lambda, threshold);
        Self {
            lambda,
            residual,
            g_value: g,
            weight: g.is_finite().then(|| 1.0 / (1.0 + g)),
        }
    }
}

/// Divergence evidence at a probe point of a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScFlag {
    /// Dyadic point next to which the pole equation was solved.
    #[serde(with = "crate::schema::num")]
    pub probe: f64,
    /// Root of the truncated pole equation in the adjacent gap.
    #[serde(with = "crate::schema::num")]
    pub root: f64,
    /// Truncated second-moment partial sum at the root.
    #[serde(with = "crate::schema::num")]
    pub partial_sum: f64,
    /// Whether the partial sum plus tail bound exceeds the threshold.
    pub divergent: bool,
}

/// Part of the spectrum of the free field not seen by the coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct UncoupledPart {
    pub available: bool,
    pub intervals: Vec<Interval>,
    #[serde(with = "crate::schema::num::vec")]
    pub eigenvalues: Vec<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    #[serde(with = "crate::schema::num")]
    pub epsilon: f64,
    pub window: Interval,
    pub ac_intervals: Vec<Interval>,
    pub pp_points: Vec<PoleSolution>,
    pub sc_flags: Vec<ScFlag>,
    pub uncoupled_part: UncoupledPart,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub grid_n: usize,
    pub root_tol: f64,
    pub sigma: SigmaOptions,
    pub divergence_threshold: f64,
    pub cascade_probes: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            root_tol: 1e-10,
            sigma: SigmaOptions::default(),
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            cascade_probes: 20,
        }
    }
}

/// Solutions found in a window, with numerical warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSearch {
    pub solutions: Vec<PoleSolution>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    Window,
    Atom,
    Support,
}

#[derive(Debug, Clone, Copy)]
struct Gap {
    lo: f64,
    hi: f64,
    lo_end: End,
    hi_end: End,
}

fn check_window(w: &Interval) -> FlResult<()> {
    if !(w.lo.is_finite() && w.hi.is_finite() && w.lo < w.hi) {
        return Err(FlError::InvalidArgument(format!(
            "window must be finite with lo < hi, got [{}, {}]",
            w.lo, w.hi
        )));
    }
    Ok(())
}

/// Closed intervals of the window on which the coupling density is positive
/// (up to isolated zeros), together with the hulls of cascades.
fn blocked_intervals(kappa: &CouplingMeasure, window: &Interval) -> Vec<Interval> {
    let mut out = Vec::new();
    for p in &kappa.ac {
        match &p.family {
            DensityFamily::Tabulated { grid, values } => {
                for i in 0..grid.len() - 1 {
                    if values[i] > 0.0 || values[i + 1] > 0.0 {
                        out.push(Interval {
                            lo: grid[i],
                            hi: grid[i + 1],
                        });
                    }
                }
            }
            _ => out.push(p.support),
        }
    }
    for _ in &kappa.cascades {
        out.push(Interval { lo: 0.0, hi: 1.0 });
    }
    let mut clipped: Vec<Interval> = out
        .into_iter()
        .filter_map(|iv| {
            let lo = iv.lo.max(window.lo);
            let hi = iv.hi.min(window.hi);
            (lo <= hi).then_some(Interval { lo, hi })
        })
        .collect();
    clipped.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut merged: Vec<Interval> = Vec::new();
    for iv in clipped {
        match merged.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => merged.push(iv),
        }
    }
    merged
}

/// Atom locations of the window that are not covered by blocked intervals.
fn point_masses_in(kappa: &CouplingMeasure, window: &Interval) -> Vec<f64> {
    let mut pts: Vec<f64> = kappa
        .atoms
        .iter()
        .map(|a| a.location)
        .filter(|x| window.contains(*x))
        .collect();
    for c in &kappa.combs {
        let (j0, j1) = (
            (window.lo / c.tau).ceil() as i64,
            (window.hi / c.tau).floor() as i64,
        );
        pts.extend((j0..=j1).map(|j| j as f64 * c.tau));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn admissible_gaps(kappa: &CouplingMeasure, window: &Interval) -> Vec<Gap> {
    let blocked = blocked_intervals(kappa, window);
    let points = point_masses_in(kappa, window);
    let mut free: Vec<Gap> = Vec::new();
    let mut cursor = (window.lo, End::Window);
    for b in &blocked {
        if b.lo > cursor.0 {
            free.push(Gap {
                lo: cursor.0,
                hi: b.lo,
                lo_end: cursor.1,
                hi_end: End::Support,
            });
        }
        cursor = (b.hi, End::Support);
    }
    if cursor.0 < window.hi {
        free.push(Gap {
            lo: cursor.0,
            hi: window.hi,
            lo_end: cursor.1,
            hi_end: End::Window,
        });
    }
    // split at point masses
    let mut gaps = Vec::new();
    for g in free {
        let mut cur = (g.lo, g.lo_end);
        for &p in points.iter().filter(|&&p| p >= g.lo && p <= g.hi) {
            if p > cur.0 {
                gaps.push(Gap {
                    lo: cur.0,
                    hi: p,
                    lo_end: cur.1,
                    hi_end: End::Atom,
                });
            }
            cur = (p, End::Atom);
        }
        if cur.0 < g.hi || (cur.0 == g.hi && g.lo == g.hi) {
            gaps.push(Gap {
                lo: cur.0,
                hi: g.hi,
                lo_end: cur.1,
                hi_end: g.hi_end,
            });
        }
    }
    gaps.retain(|g| g.lo < g.hi);
    gaps
}

/// Isolated zeros of the a.c. density inside blocked regions.
fn isolated_zero_candidates(kappa: &CouplingMeasure, window: &Interval) -> Vec<f64> {
    let mut out = Vec::new();
    for p in &kappa.ac {
        let Some(iv) = p.support.intersect(window).or_else(|| {
            // degenerate intersection at a single point
            let lo = p.support.lo.max(window.lo);
            (lo == p.support.hi.min(window.hi)).then_some(Interval { lo, hi: lo })
        }) else {
            continue;
        };
        match &p.family {
            DensityFamily::Sinusoidal { tau, .. } => {
                let period = 2.0 * PI / tau.abs();
                let j0 = (iv.lo / period).ceil() as i64;
                let j1 = (iv.hi / period).floor() as i64;
                out.extend((j0..=j1).map(|j| j as f64 * period));
            }
            DensityFamily::Tabulated { grid, values } => {
                out.extend(
                    grid.iter()
                        .zip(values)
                        .filter(|(x, v)| **v == 0.0 && iv.contains(**x))
                        .map(|(x, _)| *x),
                );
            }
            _ => {}
        }
    }
    out.retain(|&x| kappa.ac_density(x) == 0.0 && kappa.point_mass(x) == 0.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `F(λ) = ε - λ - Re Σ⁺(λ)`; NaN at log singularities.
fn pole_function(
    kappa: &CouplingMeasure,
    epsilon: f64,
    lambda: f64,
    opts: &SigmaOptions,
) -> FlResult<f64> {
    let b = sigma_boundary_with(kappa, lambda, opts)?;
    if b.sigma_plus.im_divergent {
        return Ok(f64::NAN);
    }
    Ok(epsilon - lambda - b.sigma_plus.re)
}

fn end_value(
    kappa: &CouplingMeasure,
    epsilon: f64,
    x: f64,
    end: End,
    left: bool,
    opts: &SigmaOptions,
) -> FlResult<f64> {
    match end {
        // right of an atom Re Σ⁺ → -∞, left of it → +∞
        End::Atom => Ok(if left {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }),
        End::Window => pole_function(kappa, epsilon, x, opts),
        End::Support => {
            let v = pole_function(kappa, epsilon, x, opts)?;
            if v.is_finite() {
                return Ok(v);
            }
            let h = 1e-12 * x.abs().max(1.0);
            pole_function(kappa, epsilon, if left { x + h } else { x - h }, opts)
        }
    }
}

/// Refines a bracket with `F(a) > 0 > F(b)` by bisection, switching to
/// Illinois false position once both ends are finite.
fn refine(
    f: &dyn Fn(f64) -> FlResult<f64>,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    tol: f64,
) -> FlResult<(f64, f64)> {
    let mut best = if fa.abs() < fb.abs() {
        (a, fa)
    } else {
        (b, fb)
    };
    let mut side = 0i32;
    for _ in 0..400 {
        let x = if fa.is_finite() && fb.is_finite() && fa != fb {
            let s = b - fb * (b - a) / (fb - fa);
            if s > a && s < b {
                s
            } else {
                0.5 * (a + b)
            }
        } else {
            0.5 * (a + b)
        };
        if !(x > a && x < b) {
            break;
        }
        let fx = f(x)?;
        if !fx.is_finite() {
            return Ok(best);
        }
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() < tol {
            return Ok((x, fx));
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(best)
}

/// All solutions of `ε - λ = Re Σ⁺(λ)` with `Im Σ⁺(λ) = 0` in the window.
pub fn solve_pole_equation(
    kappa: &CouplingMeasure,
    epsilon: f64,
    window: Interval,
    grid_n: usize,
) -> FlResult<Vec<PoleSolution>> {
    let opts = SpectralOptions {
        grid_n,
        ..SpectralOptions::default()
    };
    solve_pole_equation_with(kappa, epsilon, window, &opts).map(|s| s.solutions)
}

pub fn solve_pole_equation_with(
    kappa: &CouplingMeasure,
    epsilon: f64,
    window: Interval,
    opts: &SpectralOptions,
) -> FlResult<PoleSearch> {
    check_window(&window)?;
    if opts.grid_n < 2 {
        return Err(FlError::InvalidArgument("grid_n must be at least 2".into()));
    }
    let gaps = admissible_gaps(kappa, &window);
    let candidates = isolated_zero_candidates(kappa, &window);
    if gaps.is_empty() && candidates.is_empty() {
        return Err(FlError::WindowInsideAcSupport {
            lo: window.lo,
            hi: window.hi,
        });
    }
    let f = |x: f64| pole_function(kappa, epsilon, x, &opts.sigma);
    let step = window.width() / (opts.grid_n - 1) as f64;
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let mut warnings = Vec::new();
    for g in &gaps {
        let mut samples = vec![(
            g.lo,
            end_value(kappa, epsilon, g.lo, g.lo_end, true, &opts.sigma)?,
        )];
        let i0 = ((g.lo - window.lo) / step).floor() as usize + 1;
        let mut i = i0;
        loop {
            let x = window.lo + i as f64 * step;
            if x >= g.hi {
                break;
            }
            if x > g.lo {
                samples.push((x, f(x)?));
            }
            i += 1;
        }
        samples.push((
            g.hi,
            end_value(kappa, epsilon, g.hi, g.hi_end, false, &opts.sigma)?,
        ));
        let mut changes = 0;
        for w in samples.windows(2) {
            let ((a, fa), (b, fb)) = (w[0], w[1]);
            if fa.is_nan() || fb.is_nan() {
                continue;
            }
            if fa == 0.0 && a > g.lo {
                roots.push((a, 0.0));
                changes += 1;
            } else if fa > 0.0 && fb < 0.0 {
                roots.push(refine(&f, a, fa, b, fb, opts.root_tol)?);
                changes += 1;
            } else if fa < 0.0 && fb > 0.0 {
                changes += 1;
            }
        }
        if changes > 1 {
            warnings.push(format!(
                "GridTooCoarse: {changes} sign changes in admissible interval ({}, {})",
                g.lo, g.hi
            ));
        }
    }
    // isolated zeros of the density: the root must sit exactly there
    let cand_tol = opts.root_tol.max(10.0 * opts.sigma.quad.abs_tol);
    for x in candidates {
        let b = sigma_boundary_with(kappa, x, &opts.sigma)?;
        if !b.sigma_plus.is_regular() || b.sigma_plus.im != 0.0 {
            continue;
        }
        let r = epsilon - x - b.sigma_plus.re;
        if r.abs() <= cand_tol {
            roots.push((x, r));
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    roots.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-12 * a.0.abs().max(1.0));
    let solutions = roots
        .into_iter()
        .filter(|(x, _)| window.contains(*x))
        .map(|(x, r)| PoleSolution::new(kappa, x, r.abs(), opts.divergence_threshold))
        .collect();
    Ok(PoleSearch {
        solutions,
        warnings,
    })
}

/// Closure of `{λ : 0 < Im Σ⁺(λ) < ∞}` within the window.
pub(crate) fn ac_intervals(kappa: &CouplingMeasure, window: &Interval) -> Vec<Interval> {
    let mut reduced = kappa.clone();
    reduced.cascades.clear();
    blocked_intervals(&reduced, window)
        .into_iter()
        .filter(|iv| iv.lo < iv.hi)
        .collect()
}

/// Low-order dyadics in `(0, 1)` ordered by order then position.
fn dyadic_probes(n: usize, window: &Interval) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..=30u32 {
        let m = (k as f64).exp2();
        for j in (1..m as u64).step_by(2) {
            let x = j as f64 / m;
            if window.contains(x) {
                out.push(x);
                if out.len() == n {
                    return out;
                }
            }
        }
    }
    out
}

fn cascade_flags(
    kappa: &CouplingMeasure,
    cascade: &DyadicCascade,
    epsilon: f64,
    window: &Interval,
    opts: &SpectralOptions,
) -> FlResult<(Vec<ScFlag>, Vec<PoleSolution>)> {
    let f = |x: f64| pole_function(kappa, epsilon, x, &opts.sigma);
    let gap = (-(cascade.depth as f64)).exp2();
    let mut flags = Vec::new();
    let mut pp = Vec::new();
    for d in dyadic_probes(opts.cascade_probes, window) {
        // F → +∞ just right of an atom and → -∞ just left of the next one
        let (root, resid) = refine(
            &f,
            d,
            f64::INFINITY,
            d + gap,
            f64::NEG_INFINITY,
            opts.root_tol,
        )?;
        let partial = cascade.g_partial_sums(root).last().copied().unwrap_or(0.0);
        let g = g_function(kappa, root, opts.divergence_threshold);
        flags.push(ScFlag {
            probe: d,
            root,
            partial_sum: partial,
            divergent: g.is_infinite(),
        });
        if g.is_finite() && resid.abs() < opts.root_tol {
            pp.push(PoleSolution::new(
                kappa,
                root,
                resid.abs(),
                opts.divergence_threshold,
            ));
        }
    }
    Ok((flags, pp))
}

pub fn classify(
    kappa: &CouplingMeasure,
    epsilon: f64,
    window: Interval,
) -> FlResult<SpectralReport> {
    classify_with(kappa, epsilon, window, &SpectralOptions::default())
}

pub fn classify_with(
    kappa: &CouplingMeasure,
    epsilon: f64,
    window: Interval,
    opts: &SpectralOptions,
) -> FlResult<SpectralReport> {
    check_window(&window)?;
    let mut warnings = Vec::new();
    let mut pp_points = match solve_pole_equation_with(kappa, epsilon, window, opts) {
        Ok(s) => {
            warnings.extend(s.warnings);
            s.solutions
        }
        Err(FlError::WindowInsideAcSupport { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let mut sc_flags = Vec::new();
    for c in &kappa.cascades {
        let (flags, pp) = cascade_flags(kappa, c, epsilon, &window, opts)?;
        sc_flags.extend(flags);
        pp_points.extend(pp);
        warnings.push(format!(
            "cascade support [0, 1] examined at {} probe gaps only",
            opts.cascade_probes
        ));
    }
    pp_points.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(SpectralReport {
        epsilon,
        window,
        ac_intervals: ac_intervals(kappa, &window),
        pp_points,
        sc_flags,
        uncoupled_part: UncoupledPart {
            available: false,
            note: "measure-level input: only the coupled part is visible".into(),
            ..UncoupledPart::default()
        },
        warnings,
    })
}

/// Classification of a physical model, including the part of the free
/// field spectrum outside the support of the coupling measure.
pub fn classify_model(
    model: &DispersionModel,
    epsilon: f64,
    window: Interval,
    opts: &SpectralOptions,
) -> FlResult<SpectralReport> {
    let kappa = pushforward(model)?;
    let mut report = classify_with(&kappa, epsilon, window, opts)?;
    let coupled = ac_intervals(&kappa, &window);
    let mut free: Vec<Interval> = Vec::new();
    if model.mu.density.is_some() {
        for p in &model.pieces {
            if let Some(iv) = p.image().intersect(&window) {
                free.push(iv);
            }
        }
    }
    // subtract coupled intervals from the free spectrum
    let mut rest: Vec<Interval> = Vec::new();
    for f in free {
        let mut pieces = vec![f];
        for c in &coupled {
            pieces = pieces
                .into_iter()
                .flat_map(|p| {
                    let mut out = Vec::new();
                    if p.lo < c.lo {
                        out.push(Interval {
                            lo: p.lo,
                            hi: p.hi.min(c.lo),
                        });
                    }
                    if p.hi > c.hi {
                        out.push(Interval {
                            lo: p.lo.max(c.hi),
                            hi: p.hi,
                        });
                    }
                    out.into_iter().filter(|i| i.lo < i.hi).collect::<Vec<_>>()
                })
                .collect();
        }
        rest.extend(pieces);
    }
    let eigenvalues: Vec<f64> = model
        .mu
        .atoms
        .iter()
        .filter(|(k, _)| model.form_factor.abs2(*k) == 0.0)
        .filter_map(|(k, _)| model.omega(*k))
        .filter(|x| window.contains(*x))
        .collect();
    report.uncoupled_part = UncoupledPart {
        available: true,
        intervals: rest,
        eigenvalues,
        note: "free field spectrum outside the support of the coupling measure".into(),
    };
    Ok(report)
}

/// Roots `E_j ∈ (jτ, (j+1)τ)` of `cot(πλ/τ) = 2(λ - ε)/β` for `j` in the range.
///
/// Written in `u = λ/τ - j` as `u = arccot(2(τ(j+u) - ε)/β)/π`, whose right
/// side minus `u` decreases strictly on `(0, 1)`; bisection is exact to the
/// last bit even when the root hugs an endpoint.
pub fn comb_eigenvalues(beta: f64, tau: f64, epsilon: f64, j_range: (i64, i64)) -> Vec<f64> {
    (j_range.0..=j_range.1)
        .map(|j| {
            let g = |u: f64| {
                let r = 2.0 * (tau * (j as f64 + u) - epsilon) / beta;
                1f64.atan2(r) / PI - u
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            tau * (j as f64 + 0.5 * (lo + hi))
        })
        .collect()
}

/// Bound state `E = -β W₀(e^{-ε/β}/β)` of the half-line flat model.
pub fn lambert_eigenvalue(beta: f64, epsilon: f64) -> f64 {
    let ln_x = -epsilon / beta - beta.ln();
    let w = if ln_x > 700.0 {
        lambert_w0_ln(ln_x)
    } else {
        lambert_w0(ln_x.exp())
    };
    -beta * w
}

/// Eigenvector `(x, ξ)` of a model at a solution of the pole equation.
#[derive(Debug, Clone)]
pub struct Eigenvector {
    pub lambda0: f64,
    pub x: Complex64,
    /// `‖ξ‖²` by quadrature over the model's reduced variable.
    pub xi_norm_sq: f64,
    pub g_value: f64,
    model: DispersionModel,
}

impl Eigenvector {
    /// Boson component `ξ(k) = -x g(k) / (ω(k) - λ₀)`.
    pub fn xi(&self, k: f64) -> Complex64 {
        match self.model.omega(k) {
            Some(w) => -self.x * self.model.form_factor.eval(k) / (w - self.lambda0),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// The regularised expression `-x (1/(ω - λ₀) - ω/(ω² + 1)) g(k)`.
    pub fn xi_regularised(&self, k: f64) -> Complex64 {
        match self.model.omega(k) {
            Some(w) => {
                -self.x
                    * self.model.form_factor.eval(k)
                    * (1.0 / (w - self.lambda0) - w / (w * w + 1.0))
            }
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `|x|² + ‖ξ‖²`.
    pub fn total_norm_sq(&self) -> f64 {
        self.x.norm_sqr() + self.xi_norm_sq
    }

    /// The vector rescaled to unit norm.
    pub fn normalised(&self) -> Eigenvector {
        let n = self.total_norm_sq().sqrt();
        Eigenvector {
            x: self.x / n,
            xi_norm_sq: self.xi_norm_sq / (n * n),
            ..self.clone()
        }
    }
}

/// `∫ f(k) |g(k)|² dμ(k) J(k)` over the model's pieces and μ-atoms.
pub(crate) fn model_integral(model: &DispersionModel, f: impl Fn(f64, f64) -> f64) -> (f64, bool) {
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 8000,
    };
    let mut total = 0.0;
    let mut ok = true;
    if model.mu.density.is_some() {
        for p in &model.pieces {
            let d = p.domain;
            let integrand = |k: f64| {
                let w = p.w.eval(k);
                let v = model.weight_density(k);
                if v == 0.0 {
                    0.0
                } else {
                    v * f(k, w)
                }
            };
            let (v, _, conv) = if d.is_finite() {
                integrate_real(integrand, d.lo, d.hi, &[0.0], opts)
            } else {
                integrate_real(
                    |t| {
                        let c = t.cos();
                        integrand(t.tan()) / (c * c)
                    },
                    d.lo.atan(),
                    d.hi.atan(),
                    &[0.0],
                    opts,
                )
            };
            total += v;
            ok &= conv;
        }
    }
    for &(k, m) in &model.mu.atoms {
        if let Some(w) = model.omega(k) {
            total += m * model.form_factor.abs2(k) * f(k, w);
        }
    }
    (total, ok)
}

/// Eigenvector of the model at `λ₀` with atom amplitude `x`.
pub fn eigenvector(
    model: &DispersionModel,
    epsilon: f64,
    lambda0: f64,
    x: Complex64,
) -> FlResult<Eigenvector> {
    let kappa = pushforward(model)?;
    let b = sigma_boundary_with(&kappa, lambda0, &SigmaOptions::default())?;
    let residual = if b.sigma_plus.is_regular() {
        (epsilon - lambda0 - b.sigma_plus.re).abs()
    } else {
        f64::INFINITY
    };
    if !(residual < 1e-8) || b.sigma_plus.im != 0.0 {
        return Err(FlError::NotAnEigenvalue {
            lambda: lambda0,
            residual,
        });
    }
    let g = g_function(&kappa, lambda0, DEFAULT_DIVERGENCE_THRESHOLD);
    if !g.is_finite() {
        return Err(FlError::NotAnEigenvalue {
            lambda: lambda0,
            residual,
        });
    }
    let (norm, _) = model_integral(model, |_, w| {
        let d = w - lambda0;
        1.0 / (d * d)
    });
    Ok(Eigenvector {
        lambda0,
        x,
        xi_norm_sq: x.norm_sqr() * norm,
        g_value: g,
        model: model.clone(),
    })
}
