//! Pure point measures on the dyadic rationals of (0, 1].
//!
//! Level `n` puts `2^n` atoms of weight `a_n / 2^n` at `j / 2^n`, `j = 1..=2^n`.
//! Level sums over `j` are evaluated with digamma/trigamma once `2^n` is large.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FlError, FlResult};
use crate::special::{digamma, trigamma};

/// Levels up to this depth are summed term by term.
const DIRECT_LEVELS: u32 = 12;
/// Riemann sums of smooth functions switch to Euler-Maclaurin at this depth.
const EM_LEVELS: u32 = 16;

/// Weights `a_n = scale * ratio^n`, `n = 1..=depth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicCascade {
    pub scale: f64,
    pub ratio: f64,
    pub depth: u32,
}

impl DyadicCascade {
    pub fn new(scale: f64, ratio: f64, depth: u32) -> FlResult<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !(ratio > 0.0 && ratio.is_finite()) {
            return Err(FlError::InvalidMeasure(format!(
                "cascade weights must be positive, got scale {scale} ratio {ratio}"
            )));
        }
        if depth == 0 || depth > 52 {
            return Err(FlError::InvalidMeasure(format!(
                "cascade depth must be in 1..=52, got {depth}"
            )));
        }
        Ok(Self {
            scale,
            ratio,
            depth,
        })
    }

    pub fn level_weight(&self, n: u32) -> f64 {
        self.scale * self.ratio.powi(n as i32)
    }

    pub fn total_mass(&self) -> f64 {
        (1..=self.depth).map(|n| self.level_weight(n)).sum()
    }

    /// Total weight sitting exactly at `x` (zero unless `x` is a dyadic of order ≤ depth).
    pub fn weight_at(&self, x: f64) -> f64 {
        match self.dyadic_order(x) {
            Some(k) => (k.max(1)..=self.depth)
                .map(|n| self.level_weight(n) / (n as f64).exp2())
                .sum(),
            None => 0.0,
        }
    }

    /// Smallest `k` with `x * 2^k` an integer, if `x ∈ (0, 1]` and `k ≤ depth`.
    pub fn dyadic_order(&self, x: f64) -> Option<u32> {
        if !(x > 0.0 && x <= 1.0) {
            return None;
        }
        (0..=self.depth).find(|&k| {
            let s = x * (k as f64).exp2();
            s == s.trunc()
        })
    }

    /// Mass of the closed interval `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return 0.0;
        }
        (1..=self.depth)
            .map(|n| {
                let m = (n as f64).exp2();
                let lo = (a * m).ceil().max(1.0);
                let hi = (b * m).floor().min(m);
                let count = (hi - lo + 1.0).max(0.0);
                self.level_weight(n) * count / m
            })
            .sum()
    }

    /// Σ over the truncated cascade at complex `z` (off the atoms).
    pub fn sigma(&self, z: Complex64) -> Complex64 {
        (1..=self.depth)
            .map(|n| self.level_weight(n) * (cauchy_level(n, z) - riemann_regulariser(n)))
            .sum()
    }

    /// Σ′(z) = ∫ dκ / (λ - z)².
    pub fn sigma_derivative(&self, z: Complex64) -> Complex64 {
        (1..=self.depth)
            .map(|n| self.level_weight(n) * square_level(n, z))
            .sum()
    }

    /// Partial sums `Σ_{n ≤ N} a_n L_n(λ)` of the second moment for `N = 1..=depth`.
    /// Entries are `∞` once `λ` is an atom of some level.
    pub fn g_partial_sums(&self, lambda: f64) -> Vec<f64> {
        let mut acc = 0.0f64;
        (1..=self.depth)
            .map(|n| {
                let m = (n as f64).exp2();
                let s = lambda * m;
                if acc.is_finite() && s == s.trunc() && s >= 1.0 && s <= m {
                    acc = f64::INFINITY;
                } else if acc.is_finite() {
                    acc += self.level_weight(n) * square_level(n, Complex64::new(lambda, 0.0)).re;
                }
                acc
            })
            .collect()
    }

    /// Lower bound for the contribution of the levels beyond `depth` of the
    /// untruncated rule at a point of `[0, 1]`: every level has an atom within
    /// `2^{-n}` of `λ`, so level `n` contributes at least `a_n 2^n`.
    pub fn tail_lower_bound(&self, lambda: f64) -> f64 {
        if !(0.0..=1.0).contains(&lambda) {
            return 0.0;
        }
        let q = 2.0 * self.ratio;
        if q >= 1.0 {
            return f64::INFINITY;
        }
        let next = self.level_weight(self.depth + 1) * ((self.depth + 1) as f64).exp2();
        next / (1.0 - q)
    }

    pub fn m1(&self) -> f64 {
        (1..=self.depth)
            .map(|n| self.level_weight(n) * riemann_sum(n, |x| 1.0 / (1.0 + x), LN_2, -0.5, 0.75))
            .sum()
    }

    pub fn m2(&self) -> f64 {
        (1..=self.depth)
            .map(|n| {
                self.level_weight(n) * riemann_sum(n, |x| 1.0 / (1.0 + x * x), PI / 4.0, -0.5, -0.5)
            })
            .sum()
    }
}

/// `(1/M) Σ_j 1/(j/M - z) = Σ_j 1/(j - x)` with `M = 2^n`, `x = M z`.
fn cauchy_level(n: u32, z: Complex64) -> Complex64 {
    let m = (n as f64).exp2();
    let x = z * m;
    if n <= DIRECT_LEVELS {
        return (1..=m as u64)
            .map(|j| (Complex64::new(j as f64, 0.0) - x).inv())
            .sum();
    }
    let one = Complex64::new(1.0, 0.0);
    digamma(one * (m + 1.0) - x) - digamma(one - x)
}

/// `(1/M) Σ_j 1/(j/M - z)² = M Σ_j 1/(j - x)²`.
fn square_level(n: u32, z: Complex64) -> Complex64 {
    let m = (n as f64).exp2();
    let x = z * m;
    if n <= DIRECT_LEVELS {
        let s: Complex64 = (1..=m as u64)
            .map(|j| {
                let d = Complex64::new(j as f64, 0.0) - x;
                (d * d).inv()
            })
            .sum();
        return s * m;
    }
    let one = Complex64::new(1.0, 0.0);
    (trigamma(one - x) - trigamma(one * (m + 1.0) - x)) * m
}

/// `(1/M) Σ_j f(j/M)` with `f(λ) = λ/(1+λ²)`.
fn riemann_regulariser(n: u32) -> f64 {
    riemann_sum(n, |x| x / (1.0 + x * x), 0.5 * LN_2, 0.5, -1.0)
}

/// Right Riemann sum of `f` on `(0, 1]`. Beyond `EM_LEVELS` the sum is replaced
/// by `∫f + (f(1)-f(0))/(2M) + (f'(1)-f'(0))/(12M²)`, given the integral and the
/// boundary differences of `f` and `f'`.
fn riemann_sum(n: u32, f: impl Fn(f64) -> f64, integral: f64, df: f64, ddf: f64) -> f64 {
    let m = (n as f64).exp2();
    if n < EM_LEVELS {
        let s: f64 = (1..=m as u64).map(|j| f(j as f64 / m)).sum();
        return s / m;
    }
    integral + df / (2.0 * m) + ddf / (12.0 * m * m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_formulas_match_direct_sums() {
        let z = Complex64::new(0.3141, 0.002);
        for n in [13u32, 14] {
            let m = (n as f64).exp2();
            let direct: Complex64 = (1..=m as u64)
                .map(|j| (Complex64::new(j as f64 / m, 0.0) - z).inv() / m)
                .sum();
            assert!((cauchy_level(n, z) - direct).norm() < 1e-9 * direct.norm());
            let direct2: Complex64 = (1..=m as u64)
                .map(|j| {
                    let d = Complex64::new(j as f64 / m, 0.0) - z;
                    (d * d).inv() / m
                })
                .sum();
            assert!((square_level(n, z) - direct2).norm() < 1e-9 * direct2.norm());
        }
    }

    #[test]
    fn euler_maclaurin_regulariser() {
        let m = (EM_LEVELS as f64).exp2();
        let direct: f64 = (1..=m as u64)
            .map(|j| {
                let x = j as f64 / m;
                x / (1.0 + x * x)
            })
            .sum::<f64>()
            / m;
        assert!((riemann_regulariser(EM_LEVELS) - direct).abs() < 1e-13);
    }

    #[test]
    fn masses() {
        let c = DyadicCascade::new(1.0, 0.5, 10).unwrap();
        assert!((c.mass(0.0, 1.0) - c.total_mass()).abs() < 1e-15);
        assert!((c.weight_at(1.0) - (1..=10).map(|n| 0.25f64.powi(n)).sum::<f64>()).abs() < 1e-15);
        assert_eq!(c.weight_at(1.0 / 3.0), 0.0);
        assert_eq!(c.dyadic_order(0.75), Some(2));
    }

    #[test]
    fn partial_sums_are_nondecreasing() {
        let c = DyadicCascade::new(0.1, 0.5, 40).unwrap();
        let p = c.g_partial_sums(1.0 / 3.0);
        assert!(p.windows(2).all(|w| w[1] >= w[0]));
        assert!(p[39].is_finite());
        assert!(c.tail_lower_bound(1.0 / 3.0).is_infinite());
    }
}
