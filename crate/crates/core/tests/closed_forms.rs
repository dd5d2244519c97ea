use num_complex::Complex64;

use fl_core::selfenergy::{sigma, sigma_boundary, sigma_closed_form, ClosedFormFamily};

const FAMILIES: [ClosedFormFamily; 4] = [
    ClosedFormFamily::FlatLine { beta: 1.3 },
    ClosedFormFamily::FlatHalfLine { beta: 0.7 },
    ClosedFormFamily::Sinusoidal {
        beta: 1.0,
        tau: 1.5,
    },
    ClosedFormFamily::PeriodicComb {
        beta: 2.0,
        tau: 0.8,
    },
];

/// 10 × 10 grid off the real axis, both half-planes.
fn grid() -> Vec<Complex64> {
    let mut out = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            let re = -12.0 + 2.6 * i as f64 + 0.137;
            let im = [0.05, 0.3, 1.0, 3.0, 8.0][j % 5] * if j < 5 { 1.0 } else { -1.0 };
            out.push(Complex64::new(re, im));
        }
    }
    out
}

#[test]
fn quadrature_matches_closed_forms_on_a_grid() {
    for fam in FAMILIES {
        let k = fam.measure().unwrap();
        for z in grid() {
            let q = sigma(&k, z).unwrap().value();
            let exact = sigma_closed_form(fam, z).unwrap();
            assert!((q - exact).norm() < 1e-6, "{fam:?} z={z}: {q} vs {exact}");
        }
    }
}

#[test]
fn boundary_values_match_closed_forms() {
    // continuous families: the closed form just above the axis
    for fam in &FAMILIES[..3] {
        let k = fam.measure().unwrap();
        for l in [-7.3, -1.1, 0.4, 2.9, 15.2] {
            let b = sigma_boundary(&k, l).unwrap().sigma_plus;
            let exact = sigma_closed_form(*fam, Complex64::new(l, 1e-12)).unwrap();
            assert!(
                (b.value() - exact).norm() < 1e-6,
                "{fam:?} λ={l}: {:?} vs {exact}",
                b.value()
            );
        }
    }
}

#[test]
fn sinusoid_quarter_period() {
    let k = ClosedFormFamily::Sinusoidal {
        beta: 1.0,
        tau: 1.0,
    }
    .measure()
    .unwrap();
    let b = sigma_boundary(&k, std::f64::consts::FRAC_PI_2)
        .unwrap()
        .sigma_plus;
    assert!((b.re - 0.5).abs() < 1e-6 && (b.im - 0.5).abs() < 1e-12);
}
