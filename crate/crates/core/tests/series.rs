mod common;

use common::{c, gamma, SineShape};
use ruelle_core::critical::critical_data;
use ruelle_core::presets::landing_case;
use ruelle_core::series::{a_at_point, a_at_point_terms, a_series, limit_x_to_1, s_by_neumann, s_by_system, LimitTarget};
use ruelle_core::summability::{classify, classify_value, Verdict};
use ruelle_core::Error;

#[test]
fn a_series_matches_independent_orbit_sum() {
    let case = landing_case().unwrap();
    let shape = SineShape::of(&case.map);
    let x = c(0.5, 0.0);
    let z = c(0.7, 1.3);
    let (pts, ders) = shape.orbit(case.d1, 60);
    let mut want = c(0.0, 0.0);
    let mut xn = c(1.0, 0.0);
    for n in 0..=60 {
        want += xn * gamma(pts[n], z) / ders[n];
        xn *= x;
    }
    let got = a_series(&case.map, x, case.d1, z, 200, 1e-15).unwrap();
    assert!(got.converged);
    assert!(got.tail_estimate <= 1e-15);
    assert!((got.value - want).norm() <= 1e-10 * want.norm());
}

#[test]
fn fixed_point_limit_trend() {
    let case = landing_case().unwrap();
    let z = c(-0.4, 0.9);
    let r = limit_x_to_1(&case.map, &[0.9, 0.99, 0.999], case.p, LimitTarget::Field(z), 400, 1e-15).unwrap();
    let lam = case.lambda;
    let exact1 = gamma(case.p, z) / (1.0 - 1.0 / lam);
    assert!((r.limit - exact1).norm() <= 1e-12 * exact1.norm());
    for (x, t) in r.schedule.iter().zip(&r.trend) {
        let exact = (gamma(case.p, z) / (1.0 - x / lam) - exact1).norm();
        assert!((t - exact).abs() <= 1e-10 * exact1.norm());
    }
    assert!(r.decreasing);
    assert!(r.corollary_sums.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn lemma_bound_holds_when_orbit_nears_critical_point() {
    // The orbit of d1 is d1, p, p, ...; evaluate at a point placed next to p,
    // where γ_p blows up but γ·f' stays bounded.
    let case = landing_case().unwrap();
    let near = case.p + c(1e-6, 0.0);
    let terms = a_at_point_terms(&case.map, c(1.0, 0.0), case.d1, near, 30).unwrap();
    let k1 = terms.iter().map(|t| t.k1).fold(0.0, f64::max);
    assert!(k1.is_finite());
    for t in &terms {
        assert!(t.term.norm() <= k1 * t.next_inverse_derivative * (1.0 + 1e-12));
    }
    let r = a_at_point(&case.map, c(1.0, 0.0), case.d1, near, 200, 1e-10).unwrap();
    assert!(r.converged);
}

#[test]
fn exact_hit_is_an_error() {
    let case = landing_case().unwrap();
    let r = a_at_point(&case.map, c(0.5, 0.0), case.d1, case.p, 50, 1e-12);
    assert!(matches!(r, Err(Error::DegenerateOrbit { .. })));
}

#[test]
fn system_without_coupling_reduces_to_a() {
    let case = landing_case().unwrap();
    let cd = critical_data(&case.map, 20.0).unwrap().with_zeroed_residues();
    let (x, z) = (c(0.5, 0.0), c(0.2, 1.1));
    let s = s_by_system(&cd, x, case.d1, z, 200, 1e-14).unwrap();
    let a = a_series(&case.map, x, case.d1, z, 200, 1e-14).unwrap();
    assert!((s.value - a.value).norm() <= 1e-14 * a.value.norm());
    for f in [s_by_system, s_by_neumann] {
        let r = f(&cd, c(0.0, 0.0), case.d1, z, 10, 1e-14).unwrap();
        assert_eq!(r.value, gamma(case.d1, z));
    }
}

#[test]
fn complex_x_cross_oracle() {
    let case = landing_case().unwrap();
    let cd = critical_data(&case.map, 40.0).unwrap();
    let x = c(0.3, 0.4);
    for z in [c(0.2, 1.1), c(-1.5, -0.7)] {
        let s = s_by_system(&cd, x, case.d2, z, 200, 1e-14).unwrap();
        let n = s_by_neumann(&cd, x, case.d2, z, 200, 1e-14).unwrap();
        assert!((s.value - n.value).norm() <= 1e-9 * n.value.norm());
    }
}

#[test]
fn limit_requires_summable_base() {
    // An orbit attracted to a fixed point with multiplier 0.5·cos p.
    let f = ruelle_core::EntireMap::sine_family(c(1.0, 0.0), c(0.5, 0.0)).unwrap();
    let r = limit_x_to_1(&f, &[0.9], c(0.3, 0.2), LimitTarget::Field(c(2.0, 2.0)), 200, 1e-12);
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn verdicts_are_stable_under_doubling() {
    let case = landing_case().unwrap();
    let attract = ruelle_core::EntireMap::sine_family(c(1.0, 0.0), c(0.5, 0.0)).unwrap();
    let cases = [(&case.map, case.d1), (&case.map, case.d2), (&attract, c(0.3, 0.2)), (&attract, c(2.0, -1.0))];
    for (map, d) in cases {
        let mut prev: Option<Verdict> = None;
        for n in [4, 8, 16, 32, 64, 128, 256] {
            let v = classify_value(map, d, n, 1e-12).unwrap().verdict;
            if let Some(p) = prev {
                let flipped = matches!((p, v), (Verdict::Summable, Verdict::NotSummable) | (Verdict::NotSummable, Verdict::Summable));
                assert!(!flipped, "{p:?} → {v:?} at n_max {n}");
            }
            prev = Some(v);
        }
    }
}

#[test]
fn classify_uses_the_image_point() {
    let case = landing_case().unwrap();
    let cd = critical_data(&case.map, 10.0).unwrap();
    let e = cd.entries().iter().find(|e| (e.d - case.d1).norm() < 1e-9).unwrap();
    let r = classify(&case.map, e.c, 200, 1e-12).unwrap();
    assert!((r.point - case.d1).norm() < 1e-9);
    assert_eq!(r.verdict, Verdict::Summable);
}
