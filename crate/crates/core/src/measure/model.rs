//! Physical models `(X, μ, ω, g)` reduced to one variable, and their
//! pushforward to a coupling measure.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{DensityPiece, Interval, ScalarFn};
use super::{Atom, CouplingMeasure, DensityFamily};
use crate::error::{FlError, FlResult};

/// How the reduced variable enters the measure.
///
/// For `Radial` the reduced variable is the radius and the angular profile is
/// a declared unit-norm function, so the Jacobian is `r^{d-1}`. `Slab` keeps
/// the first coordinate and a unit-norm transverse profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Line,
    Slab { dim: u32 },
    Radial { dim: u32 },
}

impl Geometry {
    pub fn jacobian(&self, k: f64) -> f64 {
        match self {
            Geometry::Radial { dim } => k.abs().powi(*dim as i32 - 1),
            _ => 1.0,
        }
    }
}

/// One monotone branch of the dispersion relation.
#[derive(Debug, Clone)]
pub struct DispersionPiece {
    pub name: String,
    pub domain: Interval,
    pub w: ScalarFn,
    pub dw: ScalarFn,
}

impl DispersionPiece {
    pub fn new(name: impl Into<String>, domain: Interval, w: ScalarFn, dw: ScalarFn) -> Self {
        Self {
            name: name.into(),
            domain,
            w,
            dw,
        }
    }

    /// `w(k) = slope k + offset` on the given domain.
    pub fn linear(slope: f64, offset: f64, domain: Interval) -> Self {
        Self::new(
            "linear",
            domain,
            ScalarFn::new(move |k| slope * k + offset),
            ScalarFn::new(move |_| slope),
        )
    }

    /// `w(k) = coef k^p` on `[0, ∞)`.
    pub fn power(coef: f64, p: f64) -> Self {
        Self::new(
            "power",
            Interval::half_line(),
            ScalarFn::new(move |k| coef * k.powf(p)),
            ScalarFn::new(move |k| coef * p * k.powf(p - 1.0)),
        )
    }

    /// `w(k) = coef k³` split at the critical point.
    pub fn cubic(coef: f64) -> Vec<Self> {
        let w = ScalarFn::new(move |k| coef * k * k * k);
        let dw = ScalarFn::new(move |k| 3.0 * coef * k * k);
        vec![
            Self::new(
                "cubic-",
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                },
                w.clone(),
                dw.clone(),
            ),
            Self::new("cubic+", Interval::half_line(), w, dw),
        ]
    }

    /// `w(k) = coef k² + offset` split at `k = 0`.
    pub fn quadratic(coef: f64, offset: f64) -> Vec<Self> {
        let w = ScalarFn::new(move |k| coef * k * k + offset);
        let dw = ScalarFn::new(move |k| 2.0 * coef * k);
        vec![
            Self::new(
                "quadratic-",
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                },
                w.clone(),
                dw.clone(),
            ),
            Self::new("quadratic+", Interval::half_line(), w, dw),
        ]
    }

    /// `w(k) = height - slope |k|`, increasing then decreasing.
    pub fn tent(height: f64, slope: f64) -> Vec<Self> {
        let w = ScalarFn::new(move |k: f64| height - slope * k.abs());
        let dw = ScalarFn::new(move |k: f64| if k < 0.0 { slope } else { -slope });
        vec![
            Self::new(
                "tent-",
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                },
                w.clone(),
                dw.clone(),
            ),
            Self::new("tent+", Interval::half_line(), w, dw),
        ]
    }

    fn w_at(&self, k: f64) -> f64 {
        let v = self.w.eval(k);
        if v.is_nan() && k.is_infinite() {
            return self.w.eval(k.signum() * 1e150);
        }
        v
    }

    /// Image of the domain, as a sorted interval.
    pub fn image(&self) -> Interval {
        let (a, b) = (self.w_at(self.domain.lo), self.w_at(self.domain.hi));
        Interval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    /// Sample points inside the domain, denser towards infinite ends.
    fn samples(&self, n: usize) -> Vec<f64> {
        let (t0, t1) = (self.domain.lo.atan(), self.domain.hi.atan());
        (1..n)
            .map(|i| (t0 + (t1 - t0) * i as f64 / n as f64).tan())
            .collect()
    }

    fn increasing(&self) -> bool {
        self.samples(33)
            .iter()
            .map(|&k| self.dw.eval(k))
            .find(|d| *d != 0.0 && !d.is_nan())
            .map(|d| d > 0.0)
            .unwrap_or(true)
    }

    /// Solves `w(k) = λ` inside the domain.
    pub fn inverse(&self, lambda: f64, index: usize) -> FlResult<f64> {
        let out = || FlError::EvaluationDomain {
            piece: index,
            lambda,
        };
        let inc = self.increasing();
        // g(k) = ±(w(k) - λ) is increasing in k
        let g = |k: f64| {
            if inc {
                self.w.eval(k) - lambda
            } else {
                lambda - self.w.eval(k)
            }
        };
        let img = self.image();
        if !(lambda >= img.lo && lambda <= img.hi) {
            return Err(out());
        }
        let mut lo = self.domain.lo;
        let mut hi = self.domain.hi;
        let start = 0.0f64.clamp(
            if lo.is_finite() { lo } else { f64::MIN },
            if hi.is_finite() { hi } else { f64::MAX },
        );
        if lo.is_infinite() {
            let mut step = 1.0;
            let mut k = start.min(if hi.is_finite() { hi } else { start });
            while g(k) > 0.0 {
                k = start - step;
                step *= 2.0;
                if !k.is_finite() {
                    return Err(out());
                }
            }
            lo = k;
        }
        if hi.is_infinite() {
            let mut step = 1.0;
            let mut k = start.max(lo);
            while g(k) < 0.0 {
                k = start.max(lo) + step;
                step *= 2.0;
                if !k.is_finite() {
                    return Err(out());
                }
            }
            hi = k;
        }
        if g(lo) >= 0.0 {
            return Ok(lo);
        }
        if g(hi) <= 0.0 {
            return Ok(hi);
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..300 {
            let fx = g(x);
            if fx == 0.0 {
                return Ok(x);
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = if inc {
                self.dw.eval(x)
            } else {
                -self.dw.eval(x)
            };
            let newton = x - fx / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * (lo.abs().max(hi.abs()) + f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(x)
    }
}

/// Form factor `g` as a function of the reduced variable.
#[derive(Clone)]
pub struct FormFactor {
    pub g: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    pub label: String,
}

impl fmt::Debug for FormFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormFactor({})", self.label)
    }
}

impl FormFactor {
    pub fn new<F: Fn(f64) -> Complex64 + Send + Sync + 'static>(
        label: impl Into<String>,
        g: F,
    ) -> Self {
        Self {
            g: Arc::new(g),
            label: label.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), move |_| Complex64::new(c, 0.0))
    }

    /// `coef |k|^p`.
    pub fn power(coef: f64, p: f64) -> Self {
        Self::new(format!("power({coef},{p})"), move |k: f64| {
            Complex64::new(coef * k.abs().powf(p), 0.0)
        })
    }

    /// `√(β (1 - cos τk) / 2π)`.
    pub fn sinusoidal(beta: f64, tau: f64) -> Self {
        Self::new(format!("sinusoidal({beta},{tau})"), move |k: f64| {
            Complex64::new(
                (beta * (1.0 - (tau * k).cos()) / (2.0 * std::f64::consts::PI)).sqrt(),
                0.0,
            )
        })
    }

    /// Linear interpolation of real samples, zero outside the grid.
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> FlResult<Self> {
        if grid.len() < 2 || grid.len() != values.len() || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FlError::InvalidArgument(
                "tabulated form factor needs a strictly increasing grid".into(),
            ));
        }
        Ok(Self::new("tabulated", move |k| {
            Complex64::new(super::interp(&grid, &values, k), 0.0)
        }))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    #[inline]
    pub fn eval(&self, k: f64) -> Complex64 {
        (self.g)(k)
    }

    pub fn abs2(&self, k: f64) -> f64 {
        self.eval(k).norm_sqr()
    }
}

/// Reference measure μ on the reduced variable.
#[derive(Debug, Clone)]
pub struct MuMeasure {
    /// Density with respect to Lebesgue measure; `None` means no a.c. part.
    pub density: Option<ScalarFn>,
    /// Point masses `(k, mass)`.
    pub atoms: Vec<(f64, f64)>,
}

impl MuMeasure {
    pub fn lebesgue() -> Self {
        Self {
            density: Some(ScalarFn::new(|_| 1.0)),
            atoms: Vec::new(),
        }
    }

    pub fn with_density(density: ScalarFn) -> Self {
        Self {
            density: Some(density),
            atoms: Vec::new(),
        }
    }

    pub fn point(k: f64, mass: f64) -> Self {
        Self {
            density: None,
            atoms: vec![(k, mass)],
        }
    }

    pub fn density_at(&self, k: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.eval(k))
    }
}

#[derive(Debug, Clone)]
pub struct DispersionModel {
    pub geometry: Geometry,
    pub pieces: Vec<DispersionPiece>,
    pub mu: MuMeasure,
    pub form_factor: FormFactor,
}

impl DispersionModel {
    pub fn new(
        geometry: Geometry,
        pieces: Vec<DispersionPiece>,
        mu: MuMeasure,
        form_factor: FormFactor,
    ) -> FlResult<Self> {
        let m = Self {
            geometry,
            pieces,
            mu,
            form_factor,
        };
        m.validate()?;
        Ok(m)
    }

    /// Line model `w(k) = k` with Lebesgue μ and the given form factor.
    pub fn line(form_factor: FormFactor) -> Self {
        Self {
            geometry: Geometry::Line,
            pieces: vec![DispersionPiece::linear(1.0, 0.0, Interval::REAL_LINE)],
            mu: MuMeasure::lebesgue(),
            form_factor,
        }
    }

    /// Flat model: `w(k) = k`, `g = √(β/2π)`.
    pub fn flat_line(beta: f64) -> Self {
        Self::line(FormFactor::constant(
            (beta / (2.0 * std::f64::consts::PI)).sqrt(),
        ))
    }

    /// One boson mode at momentum `k0` with energy `a`: the measure has a single atom.
    pub fn single_mode(a: f64, mass: f64, coupling: f64) -> Self {
        Self {
            geometry: Geometry::Line,
            pieces: vec![DispersionPiece::linear(1.0, 0.0, Interval::REAL_LINE)],
            mu: MuMeasure::point(a, mass),
            form_factor: FormFactor::constant(coupling),
        }
    }

    pub fn validate(&self) -> FlResult<()> {
        if self.pieces.is_empty() {
            return Err(FlError::InvalidArgument("dispersion has no pieces".into()));
        }
        if let Geometry::Radial { dim } | Geometry::Slab { dim } = self.geometry {
            if dim == 0 {
                return Err(FlError::InvalidArgument(
                    "dimension must be at least 1".into(),
                ));
            }
        }
        for (i, p) in self.pieces.iter().enumerate() {
            if matches!(self.geometry, Geometry::Radial { .. }) && p.domain.lo < 0.0 {
                return Err(FlError::InvalidArgument(format!(
                    "radial piece {i} extends below r = 0"
                )));
            }
            let d: Vec<f64> = p.samples(257).iter().map(|&k| p.dw.eval(k)).collect();
            if d.iter().any(|x| x.is_nan()) {
                return Err(FlError::EvaluationDomain {
                    piece: i,
                    lambda: f64::NAN,
                });
            }
            if d.iter().any(|x| *x > 0.0) && d.iter().any(|x| *x < 0.0) {
                return Err(FlError::NonMonotonePiece { piece: i });
            }
            if d.windows(2).any(|w| w[0] == 0.0 && w[1] == 0.0) || d.iter().all(|x| *x == 0.0) {
                return Err(FlError::ZeroDerivative { piece: i });
            }
        }
        Ok(())
    }

    /// Piece index and value of `ω(k)`.
    pub fn omega(&self, k: f64) -> Option<f64> {
        self.pieces
            .iter()
            .find(|p| p.domain.contains(k))
            .map(|p| p.w.eval(k))
    }

    /// Density of `|g|² dμ` in the reduced variable, including the geometric factor.
    pub fn weight_density(&self, k: f64) -> f64 {
        self.form_factor.abs2(k) * self.mu.density_at(k) * self.geometry.jacobian(k)
    }

    /// Pushed-forward density of piece `i` at energy `λ` in its image.
    pub fn piece_density(&self, i: usize, lambda: f64) -> FlResult<f64> {
        let p = &self.pieces[i];
        let mut k = p.inverse(lambda, i)?;
        let mut value = self.weight_density(k) / p.dw.eval(k).abs();
        if !value.is_finite() {
            // critical point at a piece boundary: step inside
            let h = 1e-9 * (1.0 + k.abs());
            k = if p.domain.interior_contains(k + h) {
                k + h
            } else {
                k - h
            };
            value = self.weight_density(k) / p.dw.eval(k).abs();
        }
        Ok(if value.is_finite() { value } else { 0.0 })
    }
}

/// Pushforward without simplification: every piece becomes a function density.
pub fn pushforward_raw(model: &DispersionModel) -> FlResult<CouplingMeasure> {
    model.validate()?;
    let mut ac = Vec::new();
    if model.mu.density.is_some() {
        for (i, p) in model.pieces.iter().enumerate() {
            let img = p.image();
            if !(img.lo < img.hi) {
                continue;
            }
            let m = model.clone();
            let dens = ScalarFn::new(move |x| m.piece_density(i, x).unwrap_or(0.0));
            ac.push(DensityPiece::function(
                dens,
                format!("pushforward:{}", p.name),
                img,
            ));
        }
    }
    let mut atoms = Vec::new();
    for &(k0, mass) in &model.mu.atoms {
        let Some(lambda) = model.omega(k0) else {
            return Err(FlError::EvaluationDomain {
                piece: 0,
                lambda: k0,
            });
        };
        let w = model.form_factor.abs2(k0) * mass;
        if w > 0.0 {
            atoms.push(Atom::new(lambda, w)?);
        }
    }
    CouplingMeasure::new(ac, atoms, vec![], vec![])
}

/// Pushforward `κ = ω_*(|g|² μ)`. Pieces whose density is constant are
/// recognised and stored as flat pieces; adjacent equal flats are merged.
pub fn pushforward(model: &DispersionModel) -> FlResult<CouplingMeasure> {
    let raw = pushforward_raw(model)?;
    let mut ac: Vec<DensityPiece> = Vec::new();
    for p in raw.ac {
        let piece = match constant_level(&p) {
            Some(level) if level > 0.0 => DensityPiece::flat(level, p.support)?,
            Some(_) => continue,
            None => p,
        };
        ac.push(piece);
    }
    ac.sort_by(|a, b| a.support.lo.total_cmp(&b.support.lo));
    let mut merged: Vec<DensityPiece> = Vec::new();
    for p in ac {
        if let Some(last) = merged.last_mut() {
            if let (DensityFamily::Flat { level: l0 }, DensityFamily::Flat { level: l1 }) =
                (&last.family, &p.family)
            {
                if last.support.hi == p.support.lo && (l0 - l1).abs() <= 1e-12 * l0.abs() {
                    last.support.hi = p.support.hi;
                    continue;
                }
            }
        }
        merged.push(p);
    }
    CouplingMeasure::new(merged, raw.atoms, vec![], vec![])
}

fn constant_level(p: &DensityPiece) -> Option<f64> {
    let s = p.support;
    let (t0, t1) = (s.lo.atan(), s.hi.atan());
    let mut first = None;
    for i in 1..64 {
        let x = (t0 + (t1 - t0) * i as f64 / 64.0).tan();
        let v = p.density(x);
        match first {
            None => first = Some(v),
            Some(f) => {
                if (v - f).abs() > 1e-12 * f.abs().max(f64::MIN_POSITIVE) {
                    return None;
                }
            }
        }
    }
    first
}
