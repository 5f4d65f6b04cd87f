use microcavity::reflow::{
    anneal_schedule, cap_radius, cap_volume, equilibrium_deformation, inverse_design, predict_roc_sweep,
    validate_schedule, AnnealSettings, FreeVariable, ReflowRecipe, ScheduleLimits,
};
use microcavity::units::{MBAR, MM};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn recipe(a_mm: f64, d_mm: f64, seal_mbar: f64, ratio: f64, tension: f64) -> ReflowRecipe {
    ReflowRecipe {
        hole_radius: a_mm * MM,
        hole_depth: d_mm * MM,
        seal_pressure: seal_mbar * MBAR,
        forming_pressure: ratio * seal_mbar * MBAR,
        membrane_tension: tension,
        ..ReflowRecipe::default()
    }
}

#[test]
fn cap_volume_matches_disc_integration() {
    for (a, h) in [(0.5, 0.1), (0.5, 0.5), (0.5, 1.2), (1.0, 0.01)] {
        let r = cap_radius(a, h).as_radius().unwrap();
        // stack of discs from the apex down to the rim plane
        let n = 200_000;
        let dz = h / n as f64;
        let v: f64 = (0..n)
            .map(|i| {
                let depth = (i as f64 + 0.5) * dz;
                let rho2 = r * r - (r - depth).powi(2);
                std::f64::consts::PI * rho2 * dz
            })
            .sum();
        assert!(rel(cap_volume(a, h), v) < 1e-8, "a = {a}, h = {h}");
    }
}

#[test]
fn reference_recipe_in_published_range() {
    let d = equilibrium_deformation(&ReflowRecipe::default()).unwrap();
    let r = d.roc.as_radius().unwrap();
    assert!((0.55 * MM..=0.70 * MM).contains(&r), "{r}");
}

#[test]
fn hole_diameters_span_achievable_range() {
    let radii: Vec<f64> = (0..=10).map(|i| (0.5 + 0.1 * i as f64) * MM).collect();
    let rows = predict_roc_sweep(&ReflowRecipe::default(), &radii, &[700.0 * MBAR]);
    assert_eq!(rows.len(), radii.len());
    for row in rows {
        let r = row.result.unwrap().roc.as_radius().unwrap();
        assert!((0.5 * MM..=5.0 * MM).contains(&r), "{r}");
    }
}

#[test]
fn no_deformation_below_seal_pressure_balance() {
    let r = ReflowRecipe { forming_pressure: 300.0 * MBAR, ..ReflowRecipe::default() };
    let d = equilibrium_deformation(&r).unwrap();
    assert_eq!(d.sag, 0.0);
    assert!(d.roc.is_flat());
}

#[test]
fn default_schedule_respects_limits() {
    let s = anneal_schedule(&ReflowRecipe::default(), &AnnealSettings::default()).unwrap();
    validate_schedule(&s, &ScheduleLimits::default()).unwrap();
    let fast = AnnealSettings { cool_rate_to_strain: 50.0 / 60.0, ..AnnealSettings::default() };
    let s = anneal_schedule(&ReflowRecipe::default(), &fast).unwrap();
    assert!(validate_schedule(&s, &ScheduleLimits::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn volume_consistent_with_gas_law(
        a in 0.2f64..1.5, d in 0.5f64..3.0, seal in 100.0f64..500.0, ratio in 1.05f64..4.0, tension in 0.0f64..1.0,
    ) {
        let r = recipe(a, d, seal, ratio, tension);
        let Ok(res) = equilibrium_deformation(&r) else { return Ok(()) };
        let v0 = r.hole_volume();
        prop_assert!(rel(v0 - cap_volume(r.hole_radius, res.sag), res.gas_volume) < 1e-9);
        let implied = r.seal_pressure * r.forming_temperature / r.seal_temperature * v0 / res.internal_pressure;
        prop_assert!(rel(implied, res.gas_volume) < 1e-9);
    }

    #[test]
    fn gas_only_limit(a in 0.2f64..1.5, d in 0.5f64..3.0, seal in 100.0f64..500.0, ratio in 1.05f64..10.0) {
        let r = recipe(a, d, seal, ratio, 0.0);
        let res = equilibrium_deformation(&r).unwrap();
        prop_assert!(rel(r.hole_volume() / res.gas_volume, ratio) < 1e-9);
    }

    #[test]
    fn sub_hemispherical_radius_falls_with_pressure(
        a in 0.3f64..1.5, d in 0.5f64..3.0, ratio in 1.02f64..1.5, step in 0.01f64..0.2,
    ) {
        let lo = equilibrium_deformation(&recipe(a, d, 300.0, ratio, 0.3)).unwrap();
        let hi = equilibrium_deformation(&recipe(a, d, 300.0, ratio + step, 0.3)).unwrap();
        prop_assume!(hi.sag < a * MM && lo.sag > 0.0);
        prop_assert!(hi.roc.as_radius().unwrap() < lo.roc.as_radius().unwrap());
    }

    #[test]
    fn inverse_design_round_trip(a in 0.3f64..1.5, d in 1.0f64..3.0, ratio in 1.2f64..3.0) {
        let r = recipe(a, d, 300.0, ratio, 0.3);
        let target = equilibrium_deformation(&r).unwrap().roc.as_radius().unwrap();
        // R(P) can take the target twice; the template value picks the branch
        let p = inverse_design(&r, target, FreeVariable::FormingPressure, None).unwrap();
        prop_assert!(rel(p, r.forming_pressure) < 1e-3, "{} vs {}", p, r.forming_pressure);
        let back = equilibrium_deformation(&ReflowRecipe { forming_pressure: p, ..r }).unwrap();
        prop_assert!(rel(back.roc.as_radius().unwrap(), target) < 1e-3);
        let a_fit = inverse_design(&r, target, FreeVariable::HoleRadius, None).unwrap();
        prop_assert!(rel(a_fit, r.hole_radius) < 1e-3, "{} vs {}", a_fit, r.hole_radius);
    }
}
