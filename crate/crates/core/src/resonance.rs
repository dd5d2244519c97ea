//! Continuation of `Σ` through the a.c. cut and resonances `ε - z = Σ_II(z)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FlError, FlResult};
use crate::measure::CouplingMeasure;
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::selfenergy::{sigma_closed_form, ClosedFormFamily};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Families whose density continues analytically off the real axis.
pub fn continuation_family(kappa: &CouplingMeasure) -> FlResult<ClosedFormFamily> {
    match ClosedFormFamily::detect(kappa) {
        Some(ClosedFormFamily::PeriodicComb { .. }) => Err(FlError::NoContinuation(
            "comb measures have no a.c. cut to continue through".into(),
        )),
        Some(f) => Ok(f),
        None => Err(FlError::NoContinuation(
            "only the flat, half-line and sinusoidal families carry an analytic density".into(),
        )),
    }
}

/// Continued density `ρ_c(z)`.
pub fn continued_density(family: ClosedFormFamily, z: Complex64) -> FlResult<Complex64> {
    match family {
        ClosedFormFamily::FlatLine { beta } => Ok(Complex64::new(beta / (2.0 * PI), 0.0)),
        ClosedFormFamily::FlatHalfLine { beta } => Ok(Complex64::new(beta, 0.0)),
        ClosedFormFamily::Sinusoidal { beta, tau } => {
            Ok(beta / (2.0 * PI) * (1.0 - (tau * z).cos()))
        }
        ClosedFormFamily::PeriodicComb { .. } => Err(FlError::NoContinuation("comb".into())),
    }
}

/// Whether `z` lies in the region where [`sigma_second_sheet`] is defined.
pub fn in_valid_region(family: ClosedFormFamily, z: Complex64) -> bool {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return false;
    }
    match family {
        // keep clear of the log branch on the negative axis
        ClosedFormFamily::FlatHalfLine { .. } => {
            !(z.re <= 0.0 && z.im.abs() < 1e-3 * (1.0 + z.re.abs()))
        }
        ClosedFormFamily::PeriodicComb { .. } => false,
        _ => true,
    }
}

/// `Σ_II(z)`: `Σ(z)` above the axis, `Σ(z) + 2πi ρ_c(z)` below it, `Σ⁺` on the cut.
///
/// For the half-line, `Σ_II(z) = -β (ln|z| + i (Arg z - π))` with
/// `Arg z ∈ (-π, π]`, which is `Σ` above the axis and meets `Σ⁺` on `(0, ∞)`.
pub fn sigma_second_sheet(family: ClosedFormFamily, z: Complex64) -> FlResult<Complex64> {
    if !in_valid_region(family, z) {
        return Err(FlError::NoContinuation(format!(
            "{z} is outside the continuation region"
        )));
    }
    match family {
        ClosedFormFamily::FlatLine { beta } => Ok(Complex64::new(0.0, 0.5 * beta)),
        ClosedFormFamily::FlatHalfLine { beta } => {
            Ok(-beta * Complex64::new(z.norm().ln(), z.arg() - PI))
        }
        ClosedFormFamily::Sinusoidal { beta, tau } => {
            let t = tau.abs();
            Ok(I * (0.5 * beta) * (1.0 - (I * t * z).exp()))
        }
        ClosedFormFamily::PeriodicComb { .. } => unreachable!(),
    }
}

fn sigma_second_sheet_derivative(family: ClosedFormFamily, z: Complex64) -> Complex64 {
    match family {
        ClosedFormFamily::FlatLine { .. } => Complex64::new(0.0, 0.0),
        ClosedFormFamily::FlatHalfLine { beta } => -beta / z,
        ClosedFormFamily::Sinusoidal { beta, tau } => {
            let t = tau.abs();
            0.5 * beta * t * (I * t * z).exp()
        }
        ClosedFormFamily::PeriodicComb { .. } => Complex64::new(f64::NAN, f64::NAN),
    }
}

/// Rectangle `[re.0, re.1] × [im.0, im.1]` of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    #[serde(with = "crate::schema::num::complex")]
    pub z0: Complex64,
    #[serde(with = "crate::schema::num")]
    pub residual: f64,
    #[serde(with = "crate::schema::num::complex")]
    pub basin_seed: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceOptions {
    pub max_iter: usize,
    pub residual_tol: f64,
    pub dedup_tol: f64,
    /// Central differences replace the analytic derivative.
    pub numerical_derivative: bool,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            residual_tol: 1e-10,
            dedup_tol: 1e-8,
            numerical_derivative: false,
        }
    }
}

pub fn find_resonances(
    family: ClosedFormFamily,
    epsilon: f64,
    rect: Rect,
    seeds_n: usize,
) -> FlResult<Vec<Resonance>> {
    find_resonances_with(family, epsilon, rect, seeds_n, &ResonanceOptions::default())
}

pub fn find_resonances_with(
    family: ClosedFormFamily,
    epsilon: f64,
    rect: Rect,
    seeds_n: usize,
    opts: &ResonanceOptions,
) -> FlResult<Vec<Resonance>> {
    if matches!(family, ClosedFormFamily::PeriodicComb { .. }) {
        return Err(FlError::NoContinuation(
            "comb measures have no a.c. cut".into(),
        ));
    }
    if seeds_n < 4 {
        return Err(FlError::InvalidArgument(format!(
            "seeds_n must be at least 4, got {seeds_n}"
        )));
    }
    if !(rect.re.0 < rect.re.1 && rect.im.0 < rect.im.1 && rect.im.1 <= 0.0) {
        return Err(FlError::InvalidArgument(
            "rect must be non-empty and in the closed lower half-plane".into(),
        ));
    }
    let f = |z: Complex64| -> Option<Complex64> {
        sigma_second_sheet(family, z).ok().map(|s| epsilon - z - s)
    };
    let df = |z: Complex64| -> Complex64 {
        if opts.numerical_derivative {
            let h = 1e-6 * (1.0 + z.norm());
            match (f(z + h), f(z - h)) {
                (Some(a), Some(b)) => (a - b) / (2.0 * h),
                _ => Complex64::new(f64::NAN, f64::NAN),
            }
        } else {
            -1.0 - sigma_second_sheet_derivative(family, z)
        }
    };
    let newton = |seed: Complex64, found: &[Complex64]| -> Option<Complex64> {
        let mut z = seed;
        let mut fz = f(z)?;
        for _ in 0..opts.max_iter {
            if fz.norm() < 1e-14 * (1.0 + z.norm()) {
                break;
            }
            // deflate previously found roots
            let defl: Complex64 = found.iter().map(|r| 1.0 / (z - r)).sum();
            let q = df(z) / fz - defl;
            if !q.re.is_finite() || !q.im.is_finite() || q.norm() == 0.0 {
                return None;
            }
            let step = 1.0 / q;
            let deflated = |x: Complex64, fx: Complex64| {
                found.iter().fold(fx.norm(), |m, r| m / (x - r).norm())
            };
            let current = deflated(z, fz);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=20 {
                let cand = z - lambda * step;
                if let Some(fc) = f(cand) {
                    if deflated(cand, fc) < current {
                        accepted = Some((cand, fc));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let (zn, fzn) = accepted?;
            let done = (zn - z).norm() < 1e-15 * (1.0 + z.norm());
            z = zn;
            fz = fzn;
            if done {
                break;
            }
        }
        Some(z)
    };
    let polish = |mut z: Complex64| -> Option<(Complex64, f64)> {
        for _ in 0..8 {
            let fz = f(z)?;
            let step = fz / df(z);
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            let zn = z - step;
            if f(zn).map_or(true, |v| v.norm() > fz.norm()) {
                break;
            }
            z = zn;
        }
        Some((z, f(z)?.norm()))
    };

    let mut roots: Vec<Resonance> = Vec::new();
    let mut found: Vec<Complex64> = Vec::new();
    for i in 0..seeds_n {
        for j in 0..seeds_n {
            let seed = Complex64::new(
                rect.re.0 + (i as f64 + 0.5) / seeds_n as f64 * (rect.re.1 - rect.re.0),
                rect.im.0 + (j as f64 + 0.5) / seeds_n as f64 * (rect.im.1 - rect.im.0),
            );
            let Some(z) = newton(seed, &found) else {
                continue;
            };
            let Some((z, residual)) = polish(z) else {
                continue;
            };
            if !(residual < opts.residual_tol) || !(z.im < 0.0) || !rect.contains(z) {
                continue;
            }
            if found
                .iter()
                .any(|r| (r - z).norm() < opts.dedup_tol * (1.0 + z.norm()))
            {
                continue;
            }
            found.push(z);
            roots.push(Resonance {
                z0: z,
                residual,
                basin_seed: seed,
            });
        }
    }
    roots.sort_by(|a, b| {
        a.z0.re
            .total_cmp(&b.z0.re)
            .then(a.z0.im.total_cmp(&b.z0.im))
    });
    Ok(roots)
}

/// Resonances of a measure, after recognising its family.
pub fn find_resonances_for(
    kappa: &CouplingMeasure,
    epsilon: f64,
    rect: Rect,
    seeds_n: usize,
) -> FlResult<Vec<Resonance>> {
    find_resonances(continuation_family(kappa)?, epsilon, rect, seeds_n)
}

/// Anchor of the deformed self-energy; `Σ(z, w) - Σ(z₀)` is a convergent integral.
pub const DEFORMATION_ANCHOR: Complex64 = Complex64::new(0.0, 1.0);

/// `Σ(z, w)` for the flat line along the translated contour `ω(k) = k - w`.
///
/// The regulariser is replaced by the value at the anchor `z₀ = i`:
/// `Σ(z, w) = Σ(z₀) + c ∫ (z - z₀) / ((k - w - z)(k - w - z₀)) dk`.
pub fn deformed_sigma(beta: f64, w: Complex64, z: Complex64) -> FlResult<Complex64> {
    if !(w.im > 0.0) {
        return Err(FlError::InvalidArgument(format!(
            "flow shift needs Im w > 0, got {w}"
        )));
    }
    if !(z.im > -w.im) {
        return Err(FlError::InvalidArgument(format!(
            "z = {z} lies below the shifted cut"
        )));
    }
    let family = ClosedFormFamily::FlatLine { beta };
    let z0 = DEFORMATION_ANCHOR;
    let c = beta / (2.0 * PI);
    let (p1, p2) = (w + z, w + z0);
    let integrand = |theta: f64| {
        let (s, co) = theta.sin_cos();
        if co.abs() < 1e-300 {
            return c * (z - z0);
        }
        let k = s / co;
        let jac = 1.0 / (co * co);
        c * (z - z0) / ((k - p1) * (k - p2)) * jac
    };
    let breaks = [p1.re.atan(), p2.re.atan()];
    let opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-13,
        max_intervals: 8000,
    };
    let r = integrate_with_breaks(integrand, -0.5 * PI, 0.5 * PI, &breaks, opts).checked(1e-9)?;
    Ok(sigma_closed_form(family, z0)? + r.value)
}

/// `|Σ(z, w) - Σ_II(z)|` for the flat line.
pub fn deformed_sigma_invariance(
    w: Complex64,
    family: ClosedFormFamily,
    z: Complex64,
) -> FlResult<f64> {
    let ClosedFormFamily::FlatLine { beta } = family else {
        return Err(FlError::InvalidArgument(
            "the translation flow is implemented for the flat line".into(),
        ));
    };
    Ok((deformed_sigma(beta, w, z)? - sigma_second_sheet(family, z)?).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfenergy::sigma_boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FLAT: ClosedFormFamily = ClosedFormFamily::FlatLine { beta: 1.0 };
    const SINE: ClosedFormFamily = ClosedFormFamily::Sinusoidal {
        beta: 1.0,
        tau: 1.0,
    };
    const HALF: ClosedFormFamily = ClosedFormFamily::FlatHalfLine { beta: 1.0 };

    #[test]
    fn second_sheet_examples() {
        let v = sigma_second_sheet(FLAT, Complex64::new(1.0, -1.0)).unwrap();
        assert!((v - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let v = sigma_second_sheet(SINE, Complex64::new(0.0, -1.0)).unwrap();
        let e = I * 0.5 * (1.0 - std::f64::consts::E);
        assert!((v - e).norm() < 1e-14);
    }

    #[test]
    fn jump_is_two_pi_i_density() {
        for fam in [FLAT, SINE, HALF] {
            for z in [Complex64::new(0.7, -0.3), Complex64::new(2.0, -1.5)] {
                let lower = sigma_closed_form(fam, z).unwrap();
                let jump = sigma_second_sheet(fam, z).unwrap() - lower;
                let expected = 2.0 * PI * I * continued_density(fam, z).unwrap();
                assert!((jump - expected).norm() < 1e-12, "{fam:?} {z}");
            }
        }
    }

    #[test]
    fn cut_matching() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fam in [FLAT, SINE, HALF] {
            let kappa = fam.measure().unwrap();
            for _ in 0..100 {
                let l: f64 = rng.gen_range(0.01..20.0);
                let plus = sigma_boundary(&kappa, l).unwrap().sigma_plus.value();
                let ii = sigma_second_sheet(fam, Complex64::new(l, -1e-8)).unwrap();
                assert!((plus - ii).norm() < 1e-6, "{fam:?} λ={l}: {plus} vs {ii}");
            }
        }
    }

    #[test]
    fn flat_line_single_resonance() {
        let rect = Rect {
            re: (0.0, 4.0),
            im: (-2.0, 0.0),
        };
        let r = find_resonances(FLAT, 2.0, rect, 6).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].z0 - Complex64::new(2.0, -0.5)).norm() < 1e-12);
        for beta in [0.1, 1.0, 10.0] {
            let r = find_resonances(
                ClosedFormFamily::FlatLine { beta },
                2.0,
                Rect {
                    re: (0.0, 4.0),
                    im: (-8.0, 0.0),
                },
                4,
            )
            .unwrap();
            assert!((r[0].z0.im + beta / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sinusoid_resonances_have_small_residuals() {
        let rect = Rect {
            re: (-20.0, 20.0),
            im: (-6.0, -0.01),
        };
        let r = find_resonances(SINE, 0.0, rect, 12).unwrap();
        assert!(!r.is_empty());
        for res in &r {
            // independent residual from the lower closed form plus the jump
            let s = sigma_closed_form(SINE, res.z0).unwrap()
                + 2.0 * PI * I * continued_density(SINE, res.z0).unwrap();
            assert!((-res.z0 - s).norm() < 1e-10, "{:?}", res);
        }
        let numeric = find_resonances_with(
            SINE,
            0.0,
            rect,
            12,
            &ResonanceOptions {
                numerical_derivative: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(numeric.len(), r.len());
    }

    #[test]
    fn no_cut_no_continuation() {
        assert!(matches!(
            continuation_family(&CouplingMeasure::zero()),
            Err(FlError::NoContinuation(_))
        ));
        assert!(continuation_family(&CouplingMeasure::periodic_comb(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn translation_flow_matches_continuation() {
        let d = deformed_sigma_invariance(I, FLAT, Complex64::new(1.0, 0.5)).unwrap();
        assert!(d < 1e-6, "{d}");
        let d = deformed_sigma_invariance(2.0 * I, FLAT, Complex64::new(1.0, -0.5)).unwrap();
        assert!(d < 1e-6, "{d}");
        let d = deformed_sigma_invariance(I, FLAT, Complex64::new(1.0, 10.0)).unwrap();
        assert!(d < 1e-8, "{d}");
    }
}
