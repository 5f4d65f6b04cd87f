use std::f64::consts::PI;

use microcavity::qed::{
    cooperativity, coupling_rates, finesse_from_linewidth, finesse_jacobian, is_strong_coupling,
    linewidth_from_finesse, propagate_uncertainty, scattering_loss, AtomSpec, CavityDesign, Measurement,
    ScatterForm,
};
use microcavity::units::{MHZ, MM, NM, PPM, SPEED_OF_LIGHT, UM};
use microcavity::Error;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

const TABLE: [(f64, f64, f64, f64, f64); 4] = [
    // R [mm], L [mm], T [ppm], F obtained, published η
    (100.0, 2.075, 100.0, 32200.0, 1.0),
    (5.0, 2.53, 200.0, 19900.0, 3.8),
    (2.0, 0.32, 350.0, 14200.0, 9.2),
    (0.7, 0.25, 1500.0, 3820.0, 5.4),
];

fn design(r: f64, l: f64, t: f64) -> CavityDesign {
    CavityDesign::half_symmetric("row", l * MM, r * MM, 100.0 * PPM, t * PPM, 780.0 * NM).unwrap()
}

#[test]
fn table_rows_cooperativity_and_finesse() {
    let expected = [31400.0, 22000.0, 13870.0, 3850.0];
    for ((r, l, t, f, eta_pub), f_pub) in TABLE.into_iter().zip(expected) {
        let d = design(r, l, t);
        let eta = cooperativity(f, d.atom_waist().unwrap(), d.wavelength).unwrap();
        let tol = if eta_pub == 1.0 { 0.075 } else { 0.05 };
        assert!(rel(eta, eta_pub) < tol, "R = {r}: {eta}");
        assert!(rel(d.expected_finesse().unwrap(), f_pub) < 0.06, "R = {r}");
    }
}

#[test]
fn strong_coupling_rows() {
    let atom = AtomSpec::rubidium_d2();
    let strong: Vec<f64> = TABLE
        .into_iter()
        .filter(|&(r, l, t, f, _)| coupling_rates(&design(r, l, t), &atom, f).unwrap().strong_coupling)
        .map(|row| row.0)
        .collect();
    assert_eq!(strong, [5.0, 2.0]);
}

#[test]
fn rates_reproduce_cooperativity() {
    let d = design(2.0, 0.32, 350.0);
    let c = coupling_rates(&d, &AtomSpec::rubidium_d2(), 14200.0).unwrap();
    let eta = cooperativity(14200.0, d.atom_waist().unwrap(), d.wavelength).unwrap();
    assert!(rel(c.cooperativity, eta) < 1e-12);
    let lw = linewidth_from_finesse(d.length, 14200.0).unwrap();
    assert!(rel(c.kappa, PI * lw) < 1e-15);
}

#[test]
fn mismatched_atom_is_rejected() {
    let d = design(2.0, 0.32, 350.0);
    let atom = AtomSpec::new(852.0 * NM, 2.0 * PI * 2.6 * MHZ).unwrap();
    assert!(matches!(coupling_rates(&d, &atom, 14200.0), Err(Error::WavelengthMismatch(..))));
}

#[test]
fn unstable_design_has_no_rates() {
    let d = design(2.0, 2.5, 350.0);
    assert!(matches!(coupling_rates(&d, &AtomSpec::rubidium_d2(), 1e4), Err(Error::UnstableCavity { .. })));
    assert!(propagate_uncertainty(&d, Measurement::exact(1.0 * MHZ)).is_err());
}

#[test]
fn jacobian_matches_analytic_finesse_partials() {
    for (r, l, t, f, _) in TABLE {
        let d = design(r, l, t);
        let lw = linewidth_from_finesse(d.length, f).unwrap();
        let jac = finesse_jacobian(&d, lw).unwrap();
        let f0 = SPEED_OF_LIGHT / (2.0 * d.length * lw);
        assert!(rel(jac.finesse[0], -f0 / d.length) < 1e-6);
        assert!(rel(jac.finesse[3], -f0 / lw) < 1e-6);
        assert_eq!(jac.finesse[1], 0.0);
        assert!(jac.finesse[2].abs() * r * MM / f0 < 1e-6);
    }
}

#[test]
fn uncertainty_combines_in_quadrature() {
    let d = design(2.0, 0.32, 350.0).with_uncertainties(25.0 * UM, 20.0 * UM).unwrap();
    let lw = linewidth_from_finesse(d.length, 14200.0).unwrap();
    let u = propagate_uncertainty(&d, Measurement::new(lw, 0.01 * lw)).unwrap();
    // F = c/(2LΔν): relative errors of L and Δν add in quadrature
    let expect = 14200.0 * (25.0f64 / 320.0).hypot(0.01);
    assert!(rel(u.finesse.uncertainty, expect) < 1e-5, "{}", u.finesse.uncertainty);
    assert!(!u.near_boundary);
}

proptest! {
    #[test]
    fn scatter_forms_agree_to_second_order(sigma_nm in 0.0f64..6.0, lambda_nm in 400.0f64..1600.0) {
        let x = 4.0 * PI * sigma_nm / lambda_nm;
        prop_assume!(x > 0.0 && x < 0.1);
        let exact = scattering_loss(sigma_nm * NM, lambda_nm * NM, ScatterForm::Exact).unwrap();
        let approx = scattering_loss(sigma_nm * NM, lambda_nm * NM, ScatterForm::Approximate).unwrap();
        prop_assert!((exact - approx).abs() / approx <= x * x);
        prop_assert!(exact <= approx);
    }

    #[test]
    fn finesse_linewidth_inverse(l_mm in 0.01f64..100.0, f in 10.0f64..1e6) {
        let lw = linewidth_from_finesse(l_mm * MM, f).unwrap();
        prop_assert!(rel(finesse_from_linewidth(l_mm * MM, lw).unwrap(), f) < 1e-12);
    }

    #[test]
    fn cooperativity_scaling(f in 10.0f64..1e6, w_um in 1.0f64..100.0, k in 0.1f64..10.0) {
        let base = cooperativity(f, w_um * UM, 780.0 * NM).unwrap();
        prop_assert!(rel(cooperativity(k * f, w_um * UM, 780.0 * NM).unwrap(), k * base) < 1e-12);
        prop_assert!(rel(cooperativity(f, k.sqrt() * w_um * UM, 780.0 * NM).unwrap(), base / k) < 1e-12);
    }

    #[test]
    fn strong_coupling_scale_invariant(g in 1e3f64..1e9, kappa in 1e3f64..1e9, gamma in 1e3f64..1e9, s in 1e-3f64..1e3) {
        prop_assert_eq!(is_strong_coupling(g, kappa, gamma), is_strong_coupling(s * g, s * kappa, s * gamma));
    }
}
