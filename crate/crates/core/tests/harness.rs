mod common;

use common::c;
use ruelle_core::critical::critical_data;
use ruelle_core::gamma::GammaCombination;
use ruelle_core::harness::{contraction_check, duality_check, neumann_bound_check, DualityConfig};
use ruelle_core::presets::{landing_case, sine_standard, Bump};
use ruelle_core::QuadratureConfig;

#[test]
fn contraction_of_zero_is_trivial() {
    let cd = critical_data(&sine_standard().unwrap(), 20.0).unwrap();
    let r = contraction_check(&cd, &GammaCombination::new(), None).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    assert!(r.passed);
}

#[test]
fn contraction_budget_shrinks_under_refinement() {
    let case = landing_case().unwrap();
    let cd = critical_data(&case.map, 40.0).unwrap();
    let phi = GammaCombination::single(c(-0.6, 1.2)).unwrap();
    let mut poles = phi.poles();
    poles.extend(ruelle_core::ruelle::apply(&cd, &phi).unwrap().terms().iter().map(|t| t.a));
    let base = QuadratureConfig::fitted(&poles);
    let coarse = contraction_check(&cd, &phi, Some(&base)).unwrap();
    let fine = contraction_check(&cd, &phi, Some(&base.refined(2))).unwrap();
    assert!(coarse.passed && fine.passed);
    assert!(fine.error_budget <= coarse.error_budget);
    assert!((fine.lhs - coarse.lhs).abs() <= coarse.error_budget);
}

#[test]
fn neumann_at_x_zero_is_equality() {
    let cd = critical_data(&sine_standard().unwrap(), 20.0).unwrap();
    let r = neumann_bound_check(&cd, c(0.0, 0.0), c(-0.5, 0.3), 5, None).unwrap();
    assert!((r.lhs - r.rhs).abs() <= r.error_budget);
    assert!(r.passed);
}

#[test]
fn neumann_rejects_unit_x() {
    let cd = critical_data(&sine_standard().unwrap(), 20.0).unwrap();
    assert!(neumann_bound_check(&cd, c(1.0, 0.0), c(-0.5, 0.3), 5, None).is_err());
}

#[test]
fn duality_of_empty_combination() {
    let case = landing_case().unwrap();
    let cd = critical_data(&case.map, 40.0).unwrap();
    let bump = Bump::new(c(-0.6, 1.2), 0.3).unwrap();
    let r = duality_check(&cd, &bump, &GammaCombination::new(), &DualityConfig::default()).unwrap();
    assert!(r.passed && r.lhs == 0.0);
}

#[test]
fn duality_rejects_bump_on_critical_value() {
    let case = landing_case().unwrap();
    let cd = critical_data(&case.map, 40.0).unwrap();
    let bump = Bump::new(case.d2, 0.3).unwrap();
    let phi = GammaCombination::single(c(0.3, 0.8)).unwrap();
    assert!(duality_check(&cd, &bump, &phi, &DualityConfig::default()).is_err());
}

#[test]
fn duality_holds_as_the_bump_shrinks() {
    let case = landing_case().unwrap();
    let cd = critical_data(&case.map, 40.0).unwrap();
    let phi = GammaCombination::single(c(0.3, 0.8)).unwrap();
    for r in [0.3, 0.15, 0.075] {
        let bump = Bump::new(c(-0.6, 1.2), r).unwrap();
        let res = duality_check(&cd, &bump, &phi, &DualityConfig::default()).unwrap();
        let scale = res.detail["pushforward"][0].as_f64().unwrap().hypot(res.detail["pushforward"][1].as_f64().unwrap());
        assert!(res.passed, "radius {r}: {res:?}");
        assert!(scale > 0.0 && res.lhs <= 1e-6 * scale);
    }
}
