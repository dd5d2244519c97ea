#![allow(dead_code)]

use fl_core::measure::{Atom, CouplingMeasure, DensityPiece, Interval};
use num_complex::Complex64;
use rand::Rng;

/// One to three components drawn from flat, sinusoidal, tabulated and atomic pieces.
pub fn random_measure<R: Rng>(rng: &mut R) -> CouplingMeasure {
    let mut ac = Vec::new();
    let mut atoms = Vec::new();
    let n = rng.gen_range(1..=3);
    for _ in 0..n {
        match rng.gen_range(0..5) {
            0 => {
                ac.push(DensityPiece::flat(rng.gen_range(0.05..1.0), Interval::REAL_LINE).unwrap())
            }
            1 => {
                let a = rng.gen_range(-5.0..3.0);
                let b = a + rng.gen_range(0.5..6.0);
                ac.push(
                    DensityPiece::flat(rng.gen_range(0.05..1.0), Interval::new(a, b).unwrap())
                        .unwrap(),
                );
            }
            2 => ac.push(
                DensityPiece::sinusoidal(
                    rng.gen_range(0.1..2.0),
                    rng.gen_range(0.5..3.0),
                    Interval::REAL_LINE,
                )
                .unwrap(),
            ),
            3 => {
                let lo = rng.gen_range(-4.0..2.0);
                let grid: Vec<f64> = (0..6).map(|i| lo + 0.5 * i as f64).collect();
                let values: Vec<f64> = (0..6)
                    .map(|i| {
                        if i == 0 || i == 5 {
                            0.0
                        } else {
                            rng.gen_range(0.0..1.0)
                        }
                    })
                    .collect();
                ac.push(DensityPiece::tabulated(grid, values).unwrap());
            }
            _ => {
                atoms.push(Atom::new(rng.gen_range(-10.0..10.0), rng.gen_range(0.05..2.0)).unwrap())
            }
        }
    }
    CouplingMeasure::new(ac, atoms, vec![], vec![]).unwrap()
}

/// A point of the upper half-plane with `Im z ∈ [im_lo, 10]`.
pub fn random_upper<R: Rng>(rng: &mut R, im_lo: f64) -> Complex64 {
    Complex64::new(rng.gen_range(-20.0..20.0), rng.gen_range(im_lo..10.0))
}
