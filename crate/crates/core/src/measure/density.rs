//! Absolutely continuous pieces of a coupling measure.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FlError, FlResult};
use crate::quad::{integrate_real, QuadOptions};

/// Closed interval with endpoints in ℝ ∪ {±∞}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::schema::num")]
    pub lo: f64,
    #[serde(with = "crate::schema::num")]
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> FlResult<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(FlError::InvalidArgument(format!(
                "bad interval [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn half_line() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn interior_contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Shared scalar evaluator.
#[derive(Clone)]
pub struct ScalarFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ScalarFn {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

#[derive(Debug, Clone)]
pub enum DensityFamily {
    /// Constant density `level`.
    Flat { level: f64 },
    /// `(beta / 2π) (1 - cos(tau λ))`.
    Sinusoidal { beta: f64, tau: f64 },
    /// Piecewise-linear interpolation of `values` on `grid`, zero outside.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
    /// Arbitrary nonnegative evaluator, as produced by a pushforward.
    Function { density: ScalarFn, label: String },
}

/// One absolutely continuous piece: a density family restricted to `support`.
#[derive(Debug, Clone)]
pub struct DensityPiece {
    pub family: DensityFamily,
    pub support: Interval,
}

impl DensityPiece {
    pub fn flat(level: f64, support: Interval) -> FlResult<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(FlError::InvalidMeasure(format!(
                "flat level must be positive, got {level}"
            )));
        }
        Ok(Self {
            family: DensityFamily::Flat { level },
            support,
        })
    }

    pub fn sinusoidal(beta: f64, tau: f64, support: Interval) -> FlResult<Self> {
        if !(beta > 0.0 && beta.is_finite()) || tau == 0.0 || !tau.is_finite() {
            return Err(FlError::InvalidMeasure(format!(
                "sinusoidal density needs beta > 0 and tau != 0, got ({beta}, {tau})"
            )));
        }
        Ok(Self {
            family: DensityFamily::Sinusoidal { beta, tau },
            support,
        })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> FlResult<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(FlError::InvalidMeasure(
                "tabulated density needs at least two grid points and matching values".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
            return Err(FlError::InvalidMeasure(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(FlError::InvalidMeasure(
                "tabulated values must be finite and nonnegative".into(),
            ));
        }
        let support = Interval {
            lo: grid[0],
            hi: *grid.last().unwrap(),
        };
        Ok(Self {
            family: DensityFamily::Tabulated { grid, values },
            support,
        })
    }

    pub fn function(density: ScalarFn, label: impl Into<String>, support: Interval) -> Self {
        Self {
            family: DensityFamily::Function {
                density,
                label: label.into(),
            },
            support,
        }
    }

    /// Density at `x`; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.family {
            DensityFamily::Flat { level } => *level,
            DensityFamily::Sinusoidal { beta, tau } => beta / (2.0 * PI) * (1.0 - (tau * x).cos()),
            DensityFamily::Tabulated { grid, values } => interp(grid, values, x),
            DensityFamily::Function { density, .. } => density.eval(x).max(0.0),
        }
    }

    /// Scales the density by `c > 0`.
    pub fn scaled(&self, c: f64) -> DensityPiece {
        let family = match &self.family {
            DensityFamily::Flat { level } => DensityFamily::Flat { level: level * c },
            DensityFamily::Sinusoidal { beta, tau } => DensityFamily::Sinusoidal {
                beta: beta * c,
                tau: *tau,
            },
            DensityFamily::Tabulated { grid, values } => DensityFamily::Tabulated {
                grid: grid.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
            DensityFamily::Function { density, label } => {
                let d = density.clone();
                DensityFamily::Function {
                    density: ScalarFn::new(move |x| c * d.eval(x)),
                    label: format!("{c}*{label}"),
                }
            }
        };
        DensityPiece {
            family,
            support: self.support,
        }
    }

    /// Mass of `[a, b] ∩ support`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let Some(iv) = self.support.intersect(&Interval { lo: a, hi: b }) else {
            return 0.0;
        };
        match &self.family {
            DensityFamily::Flat { level } => level * iv.width(),
            DensityFamily::Sinusoidal { beta, tau } => {
                let c = beta / (2.0 * PI);
                if !iv.is_finite() {
                    return f64::INFINITY;
                }
                c * (iv.width() - ((tau * iv.hi).sin() - (tau * iv.lo).sin()) / tau)
            }
            DensityFamily::Tabulated { grid, values } => tabulated_mass(grid, values, iv.lo, iv.hi),
            DensityFamily::Function { density, .. } => function_mass(density, iv),
        }
    }

    /// Whether the density is strictly positive on a neighbourhood of `x`
    /// (so that the second moment `∫ dκ / (x - λ)²` diverges).
    pub fn positive_near(&self, x: f64) -> bool {
        if !self.support.contains(x) {
            return false;
        }
        match &self.family {
            DensityFamily::Flat { .. } => true,
            DensityFamily::Sinusoidal { tau, .. } => {
                // zeros at 2πj/τ are quadratic; anywhere else the density is positive
                !is_sinusoid_zero(*tau, x)
            }
            DensityFamily::Tabulated { grid, values } => {
                // positive on either adjacent cell means at least linear growth
                let (l, r) = adjacent_values(grid, values, x);
                interp(grid, values, x) > 0.0 || l > 0.0 || r > 0.0
            }
            DensityFamily::Function { density, .. } => {
                let h = 1e-7 * (1.0 + x.abs());
                density.eval(x) > 0.0 || density.eval(x - h) > 0.0 || density.eval(x + h) > 0.0
            }
        }
    }

    /// Breakpoints inside the support where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.family {
            DensityFamily::Tabulated { grid, .. } => grid.clone(),
            _ => Vec::new(),
        }
    }
}

pub(crate) fn is_sinusoid_zero(tau: f64, x: f64) -> bool {
    let u = tau * x / (2.0 * PI);
    (u - u.round()).abs() < 1e-12 * (1.0 + u.abs())
}

pub(crate) fn interp(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x < grid[0] || x > *grid.last().unwrap() {
        return 0.0;
    }
    let idx = match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => return values[i],
        Err(i) => i,
    };
    let (x0, x1) = (grid[idx - 1], grid[idx]);
    let (y0, y1) = (values[idx - 1], values[idx]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Values of the two cells adjacent to `x` (max over each cell).
fn adjacent_values(grid: &[f64], values: &[f64], x: f64) -> (f64, f64) {
    let n = grid.len();
    let pos = grid.partition_point(|g| *g < x);
    let left = if pos == 0 {
        0.0
    } else if pos < n && grid[pos] == x {
        if pos == 0 {
            0.0
        } else {
            values[pos - 1].max(values[pos])
        }
    } else {
        values[pos - 1].max(values.get(pos).copied().unwrap_or(0.0))
    };
    let right = if pos < n && grid[pos] == x {
        if pos + 1 < n {
            values[pos].max(values[pos + 1])
        } else {
            0.0
        }
    } else {
        left
    };
    (left, right)
}

fn tabulated_mass(grid: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..grid.len() - 1 {
        let lo = grid[i].max(a);
        let hi = grid[i + 1].min(b);
        if lo < hi {
            total += 0.5 * (interp(grid, values, lo) + interp(grid, values, hi)) * (hi - lo);
        }
    }
    total
}

fn function_mass(density: &ScalarFn, iv: Interval) -> f64 {
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 8000,
    };
    if iv.is_finite() {
        let (v, _, _) = integrate_real(|x| density.eval(x).max(0.0), iv.lo, iv.hi, &[], opts);
        return v;
    }
    // λ = tan θ maps the line onto (-π/2, π/2)
    let (t0, t1) = (iv.lo.atan(), iv.hi.atan());
    let (v, _, ok) = integrate_real(
        |t| {
            let c = t.cos();
            if c == 0.0 {
                return 0.0;
            }
            density.eval(t.tan()).max(0.0) / (c * c)
        },
        t0,
        t1,
        &[],
        opts,
    );
    if ok {
        v
    } else {
        f64::INFINITY
    }
}
