use std::f64::consts::PI;

use microcavity::optics::{
    matching_points_separation, rayleigh_length, roc_from_separation, waist_half_symmetric, wavefront_radius,
    CavityGeometry, Curvature,
};
use microcavity::units::{MM, NM, UM};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// Self-consistent q at the flat mirror from the round-trip ABCD matrix.
fn abcd_waist(length: f64, roc: f64, wavelength: f64) -> f64 {
    let (a1, b1, c1, d1) = (1.0, length, 0.0, 1.0);
    // space · mirror
    let (a2, b2, c2, d2) = (a1 - b1 * 2.0 / roc, b1, c1 - d1 * 2.0 / roc, d1);
    // (space · mirror) · space
    let (a, b, _c, d) = (a2, a2 * length + b2, c2, c2 * length + d2);
    let m = 0.5 * (a + d);
    (wavelength * b.abs() / (PI * (1.0 - m * m).sqrt())).sqrt()
}

#[test]
fn waist_matches_abcd_eigenmode() {
    let mut worst: f64 = 0.0;
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut uniform = || {
        // xorshift; independent of the crates under test
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..100 {
        let roc = (0.5 + 99.5 * uniform()) * MM;
        let length = (0.01 + 0.98 * uniform()) * roc;
        let lambda = (400.0 + 1200.0 * uniform()) * NM;
        let w = waist_half_symmetric(length, roc, lambda).unwrap();
        worst = worst.max(rel(w, abcd_waist(length, roc, lambda)));
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn general_waist_reduces_to_half_symmetric() {
    let geom = CavityGeometry::half_symmetric(0.32 * MM, 2.0 * MM).unwrap();
    let mode = geom.mode_waist(780.0 * NM).unwrap();
    let w = waist_half_symmetric(0.32 * MM, 2.0 * MM, 780.0 * NM).unwrap();
    assert!(rel(mode.radius, w) < 1e-12);
    assert!(mode.distance_from_mirror_1.abs() < 1e-15);
}

#[test]
fn symmetric_cavity_waist_is_centred() {
    let geom = CavityGeometry::new(1.0 * MM, Curvature::Radius(5.0 * MM), Curvature::Radius(5.0 * MM)).unwrap();
    let mode = geom.mode_waist(780.0 * NM).unwrap();
    assert!((mode.distance_from_mirror_1 - 0.5 * MM).abs() < 1e-15);
}

#[test]
fn wavefront_minimum_at_rayleigh_length() {
    let zr = rayleigh_length(2.0 * UM, 780.0 * NM).unwrap();
    let r = wavefront_radius(zr, zr).as_radius().unwrap();
    assert!(rel(r, 2.0 * zr) < 1e-15);
    assert_eq!(wavefront_radius(0.0, zr), Curvature::Flat);
}

proptest! {
    #[test]
    fn separation_round_trip(zr_um in 1.0f64..1000.0, t in 0.0f64..1.0) {
        let zr = zr_um * UM;
        let lo = 2.0 * zr * (1.0 + 1e-9);
        let r = lo + t * (1.0 - lo);
        let s = matching_points_separation(r, zr).unwrap();
        prop_assert!(rel(roc_from_separation(s, zr).unwrap(), r) < 1e-12);
    }

    #[test]
    fn wavefront_radius_bounded_below(z_um in 1e-3f64..1e5, zr_um in 1.0f64..1000.0) {
        let r = wavefront_radius(z_um * UM, zr_um * UM).as_radius().unwrap();
        prop_assert!(r >= 2.0 * zr_um * UM * (1.0 - 1e-15));
    }

    #[test]
    fn waist_rises_then_falls(roc_mm in 0.5f64..100.0, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let roc = roc_mm * MM;
        let (l1, l2) = (a.min(b) * roc, a.max(b) * roc);
        prop_assume!(l2 - l1 > 1e-6 * roc);
        let w1 = waist_half_symmetric(l1, roc, 780.0 * NM).unwrap();
        let w2 = waist_half_symmetric(l2, roc, 780.0 * NM).unwrap();
        if l2 <= 0.5 * roc {
            prop_assert!(w2 > w1);
        } else if l1 >= 0.5 * roc {
            prop_assert!(w2 < w1);
        }
    }

    #[test]
    fn stability_flags_long_cavities(roc_mm in 0.5f64..100.0, f in 1.0f64..3.0) {
        let geom = CavityGeometry::half_symmetric(f * roc_mm * MM, roc_mm * MM).unwrap();
        prop_assert!(geom.mode_waist(780.0 * NM).is_err());
    }
}
