//! Special functions: Lambert W₀, complex digamma/trigamma, exponential
//! integrals, and a cotangent with exact period reduction.

use num_complex::Complex64;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Principal branch W₀(x) for x ≥ -1/e by Halley iteration.
pub fn lambert_w0(x: f64) -> f64 {
    assert!(x >= -1.0 / std::f64::consts::E, "W0 undefined below -1/e");
    if x == 0.0 {
        return 0.0;
    }
    if x > 3.0 {
        return lambert_w0_ln(x.ln());
    }
    let mut w = if x < -0.25 {
        // branch point expansion
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0
    } else {
        x.ln_1p()
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// W₀(e^{ln_x}) for ln_x large enough that e^{ln_x} may overflow.
/// Solves w + ln w = ln_x by Halley iteration.
pub fn lambert_w0_ln(ln_x: f64) -> f64 {
    if ln_x < 1.0 {
        return lambert_w0(ln_x.exp());
    }
    let l2 = ln_x.ln();
    let mut w = ln_x - l2 + l2 / ln_x;
    for _ in 0..64 {
        let g = w + w.ln() - ln_x;
        let g1 = 1.0 + 1.0 / w;
        let g2 = -1.0 / (w * w);
        let step = g / (g1 - 0.5 * g * g2 / g1);
        w -= step;
        if step.abs() <= 1e-16 * w.abs() {
            break;
        }
    }
    w
}

/// cot(πw) with the real part reduced modulo 1 before evaluation.
pub fn cot_pi(w: Complex64) -> Complex64 {
    let a = w.re - w.re.round();
    let y = PI * w.im;
    if y.abs() > 20.0 {
        return Complex64::new(0.0, -y.signum());
    }
    let x = PI * a;
    let denom = (2.0 * y).cosh() - (2.0 * x).cos();
    Complex64::new((2.0 * x).sin() / denom, -(2.0 * y).sinh() / denom)
}

/// 1/sin²(πw) = 1 + cot²(πw).
pub fn csc2_pi(w: Complex64) -> Complex64 {
    let c = cot_pi(w);
    Complex64::new(1.0, 0.0) + c * c
}

pub fn digamma(w: Complex64) -> Complex64 {
    if w.re < 0.5 {
        // ψ(w) = ψ(1-w) - π cot(πw)
        return digamma(Complex64::new(1.0, 0.0) - w) - cot_pi(w) * PI;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut z = w;
    while z.re < 10.0 {
        acc -= z.inv();
        z += 1.0;
    }
    let iz2 = (z * z).inv();
    let series = iz2
        * (-1.0 / 12.0
            + iz2
                * (1.0 / 120.0
                    + iz2 * (-1.0 / 252.0 + iz2 * (1.0 / 240.0 + iz2 * (-1.0 / 132.0)))));
    acc + z.ln() - z.inv() * 0.5 + series
}

pub fn trigamma(w: Complex64) -> Complex64 {
    if w.re < 0.5 {
        // ψ'(1-w) + ψ'(w) = π² / sin²(πw)
        return csc2_pi(w) * (PI * PI) - trigamma(Complex64::new(1.0, 0.0) - w);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut z = w;
    while z.re < 10.0 {
        acc += (z * z).inv();
        z += 1.0;
    }
    let iz = z.inv();
    let iz2 = iz * iz;
    let series = iz
        + iz2 * 0.5
        + iz2
            * iz
            * (1.0 / 6.0
                + iz2
                    * (-1.0 / 30.0
                        + iz2 * (1.0 / 42.0 + iz2 * (-1.0 / 30.0 + iz2 * (5.0 / 66.0)))));
    acc + series
}

/// Exponential integral E₁(z) for Re z ≥ 0, z ≠ 0.
pub fn expint_e1(z: Complex64) -> Complex64 {
    if z.norm() <= 1.0 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..200 {
            term *= -z / k as f64;
            let contrib = term / k as f64;
            sum += contrib;
            if contrib.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() - sum;
    }
    // Modified Lentz on the even continued fraction.
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = (d * an + b).inv();
        c = b + Complex64::new(an, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// Generalised exponential integrals E_1..=E_n(z), returned as a vector indexed from E_1.
pub fn expint_en(z: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    let e = (-z).exp();
    out.push(expint_e1(z));
    for k in 1..n {
        let prev = out[k - 1];
        out.push((e - z * prev) / k as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_constant() {
        let w = lambert_w0(1.0);
        assert!((w * w.exp() - 1.0).abs() < 1e-15);
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-15);
    }

    #[test]
    fn w0_residuals_across_range() {
        for &x in &[1e-12, 1e-3, 0.3, 2.5, 10.0, 1e5, 1e100] {
            let w = lambert_w0(x);
            let rel = (w * w.exp() - x).abs() / x;
            assert!(rel < 1e-14, "x={x} rel={rel}");
        }
        let w = lambert_w0(-0.3);
        assert!((w * w.exp() + 0.3).abs() < 1e-14);
    }

    #[test]
    fn w0_log_form_handles_overflow() {
        let w = lambert_w0_ln(1000.0);
        assert!((w + w.ln() - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn digamma_known_values() {
        let one = digamma(Complex64::new(1.0, 0.0));
        assert!(
            (one.re + EULER_GAMMA).abs() < 1e-13,
            "{}",
            one.re + EULER_GAMMA
        );
        let half = digamma(Complex64::new(0.5, 0.0));
        assert!((half.re - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() < 1e-13);
        // recurrence at a negative non-integer argument
        let w = Complex64::new(-3.3, 0.7);
        let lhs = digamma(w + 1.0) - digamma(w);
        assert!((lhs - w.inv()).norm() < 1e-13);
    }

    #[test]
    fn trigamma_known_values() {
        let one = trigamma(Complex64::new(1.0, 0.0));
        assert!((one.re - PI * PI / 6.0).abs() < 1e-13);
        let w = Complex64::new(-7.25, -0.4);
        let lhs = trigamma(w) - trigamma(w + 1.0);
        assert!((lhs - (w * w).inv()).norm() < 1e-12);
    }

    #[test]
    fn e1_matches_sici_relation() {
        // E1(ix) = -Ci(x) + i(Si(x) - π/2); check E1(i) against tabulated Ci(1), Si(1)
        let ci1 = 0.337_403_922_900_968_1;
        let si1 = 0.946_083_070_367_183;
        let e = expint_e1(Complex64::new(0.0, 1.0));
        assert!((e.re + ci1).abs() < 1e-13, "{e}");
        assert!((e.im - (si1 - PI / 2.0)).abs() < 1e-13);
        // continued fraction branch
        let ci5 = -0.190_029_749_656_643_9;
        let si5 = 1.549_931_244_944_674;
        let e = expint_e1(Complex64::new(0.0, 5.0));
        assert!((e.re + ci5).abs() < 1e-13);
        assert!((e.im - (si5 - PI / 2.0)).abs() < 1e-13);
    }
}
