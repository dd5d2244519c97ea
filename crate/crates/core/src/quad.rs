//! Globally adaptive 10/21-point Gauss-Kronrod quadrature for complex valued
//! integrands, plus a panel-based oscillatory integrator that switches
//! to Filon-type panels once a panel spans more than one period.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{FlError, FlResult};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_043_639_946,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub converged: bool,
}

impl QuadResult {
    pub const ZERO: QuadResult = QuadResult {
        value: Complex64::new(0.0, 0.0),
        error: 0.0,
        converged: true,
    };

    pub fn add(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            error: self.error + other.error,
            converged: self.converged && other.converged,
        }
    }

    pub fn scale(self, c: f64) -> QuadResult {
        QuadResult {
            value: self.value * c,
            error: self.error * c.abs(),
            converged: self.converged,
        }
    }

    /// Turns a non-converged result into a `QuadratureFailure`.
    pub fn checked(self, tolerance: f64) -> FlResult<QuadResult> {
        if self.converged || self.error <= tolerance {
            Ok(self)
        } else {
            Err(FlError::QuadratureFailure {
                estimate: self.error,
                tolerance,
            })
        }
    }
}

fn gk21<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    let mut samples = [(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        samples[j] = (f1, f2);
        let pair = f1 + f2;
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        resasc += WGK[j] * ((samples[j].0 - mean).norm() + (samples[j].1 - mean).norm());
    }
    resasc *= half.abs();
    let value = kronrod * half;
    let mut err = ((kronrod - gauss) * half).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * value.norm();
    (value, err.max(floor))
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

/// Integrates `f` over `[a, b]` (finite), splitting first at `breaks`.
pub fn integrate_with_breaks<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> QuadResult
where
    F: FnMut(f64) -> Complex64,
{
    if !(a.is_finite() && b.is_finite()) {
        return QuadResult {
            value: Complex64::new(f64::NAN, f64::NAN),
            error: f64::INFINITY,
            converged: false,
        };
    }
    if a == b {
        return QuadResult::ZERO;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut points: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| *p > lo && *p < hi)
        .collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    points.extend(inner);
    points.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (v, e) = gk21(&mut f, w[0], w[1]);
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    let mut converged = false;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= target {
            converged = true;
            break;
        }
        if heap.len() >= opts.max_intervals {
            break;
        }
        let seg = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further in floating point.
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk21(&mut f, seg.a, mid);
        let (v2, e2) = gk21(&mut f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to avoid drift from incremental updates.
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    QuadResult {
        value: value * sign,
        error,
        converged: converged || error <= opts.abs_tol.max(opts.rel_tol * value.norm()),
    }
}

pub fn integrate<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> Complex64,
{
    integrate_with_breaks(f, a, b, &[], opts)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> (f64, f64, bool)
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_with_breaks(|x| Complex64::new(f(x), 0.0), a, b, breaks, opts);
    (r.value.re, r.error, r.converged)
}

// ---------------------------------------------------------------------------
// Oscillatory integrals  ∫_a^b f(λ) e^{-iλt} dλ
// ---------------------------------------------------------------------------

const FILON_DEGREE: usize = 8;

/// Chebyshev-Lobatto nodes on [-1, 1] and the inverse Vandermonde matrix that
/// maps node values to monomial coefficients.
fn filon_basis(n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let nodes: Vec<f64> = (0..=n)
        .map(|j| -(std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    let m = n + 1;
    // Solve V c = e_j for each j by Gauss-Jordan with partial pivoting.
    let mut aug: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = (0..m).map(|k| nodes[i].powi(k as i32)).collect();
            row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| aug[x][col].abs().partial_cmp(&aug[y][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..m {
            if r != col {
                let factor = aug[r][col];
                if factor != 0.0 {
                    for k in 0..2 * m {
                        aug[r][k] -= factor * aug[col][k];
                    }
                }
            }
        }
    }
    // aug right half is V^{-1}: coefficient k of basis j is inv[k][j].
    let inv: Vec<Vec<f64>> = aug.iter().map(|row| row[m..].to_vec()).collect();
    (nodes, inv)
}

/// Moments ∫_{-1}^{1} u^k e^{-iωu} du for k = 0..=n, by upward recursion.
/// Only used for ω ≥ π where the recursion is well conditioned for n ≤ 8.
fn exp_moments(omega: f64, n: usize) -> Vec<Complex64> {
    let i = Complex64::i();
    let ep = (-i * omega).exp(); // e^{-iω}
    let em = (i * omega).exp(); // e^{iω}
    let mut m = Vec::with_capacity(n + 1);
    // ∫ u^k e^{-iωu} = [u^k e^{-iωu}/(-iω)]_{-1}^{1} + k/(iω) ∫ u^{k-1} e^{-iωu}
    let inv = 1.0 / (-i * omega);
    m.push((ep - em) * inv);
    for k in 1..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let boundary = (ep - em * sign) * inv;
        let prev = m[k - 1];
        m.push(boundary - prev * inv * k as f64);
    }
    m
}

fn filon_panel<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    t: f64,
    degree: usize,
    basis: &(Vec<f64>, Vec<Vec<f64>>),
) -> Complex64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let omega = t * h;
    let (nodes, inv) = basis;
    let vals: Vec<Complex64> = nodes.iter().map(|u| f(c + h * u)).collect();
    let moments = exp_moments(omega, degree);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..=degree {
        let mut coeff = Complex64::new(0.0, 0.0);
        for (j, v) in vals.iter().enumerate() {
            coeff += v * inv[k][j];
        }
        acc += coeff * moments[k];
    }
    acc * h * (Complex64::i() * (-t * c)).exp()
}

/// Adaptive panel quadrature for `∫_a^b f(λ) e^{-iλt} dλ`.
///
/// Panels with `t * width <= 2π` use Gauss-Kronrod on the full integrand;
/// wider panels use Filon interpolation of `f` (degree 8, checked against
/// degree 6). Panels are bisected until their error share is met.
pub fn fourier_integral<F>(
    mut f: F,
    a: f64,
    b: f64,
    t: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> QuadResult
where
    F: FnMut(f64) -> Complex64,
{
    if a >= b {
        return QuadResult::ZERO;
    }
    let hi_basis = filon_basis(FILON_DEGREE);
    let lo_basis = filon_basis(FILON_DEGREE - 2);
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| *p > a && *p < b)
        .collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    pts.extend(inner);
    pts.push(b);

    let total_width = b - a;
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut converged = true;
    let mut stack: Vec<(f64, f64, usize)> = pts.windows(2).rev().map(|w| (w[0], w[1], 0)).collect();
    let mut evaluations = 0usize;
    while let Some((p, q, depth)) = stack.pop() {
        let width = q - p;
        let share = opts.abs_tol * (width / total_width).max(1e-3);
        let (v, e) = if t.abs() * width <= 2.0 * std::f64::consts::PI {
            let mut g = |x: f64| f(x) * Complex64::new(0.0, -x * t).exp();
            gk21(&mut g, p, q)
        } else {
            let v_hi = filon_panel(&mut f, p, q, t, FILON_DEGREE, &hi_basis);
            let v_lo = filon_panel(&mut f, p, q, t, FILON_DEGREE - 2, &lo_basis);
            (v_hi, (v_hi - v_lo).norm())
        };
        evaluations += 1;
        let mid = 0.5 * (p + q);
        if e <= share || depth >= 48 || mid <= p || mid >= q || evaluations > 200_000 {
            if e > share {
                converged = false;
            }
            value += v;
            error += e;
        } else {
            stack.push((mid, q, depth + 1));
            stack.push((p, mid, depth + 1));
        }
    }
    QuadResult {
        value,
        error,
        converged,
    }
}

/// Asymptotic expansion of `∫_L^∞ e^{iσλ} h(λ) dλ` (`upper`) or
/// `∫_{-∞}^{-L} e^{iσλ} h(λ) dλ`, by repeated integration by parts.
/// `deriv(m, x)` returns `h^{(m)}(x)`; `h` must decay with all derivatives.
pub fn fourier_tail<F>(sigma: f64, l: f64, deriv: F, terms: usize, upper: bool) -> Complex64
where
    F: Fn(usize, f64) -> Complex64,
{
    let is = Complex64::new(0.0, sigma);
    let x = if upper { l } else { -l };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut pow = is;
    for m in 0..terms {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        acc += deriv(m, x) * sign / pow;
        pow *= is;
    }
    let phase = Complex64::new(0.0, sigma * x).exp();
    if upper {
        -phase * acc
    } else {
        phase * acc
    }
}
