//! Checks that need plane integration: L1 contraction of `f*`, the Neumann
//! bound on partial sums of `S`, and the duality between `f*` and the
//! Beltrami pullback.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::CriticalData;
use crate::error::{Error, Result};
use crate::gamma::{gamma_unchecked, GammaCombination};
use crate::gauss::Rule;
use crate::map::EntireMap;
use crate::presets::Bump;
use crate::quadrature::{l1_norm, L1Estimate, QuadratureConfig};
use crate::ruelle::{apply, apply_truncation_estimate, preimages, BranchWindow};
use crate::series::neumann_partial_sums;
use crate::sum::{ComplexNeumaier, Neumaier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub error_budget: f64,
    /// `lhs ≤ rhs + error_budget`.
    pub passed: bool,
    /// Check-specific diagnostics.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub detail: serde_json::Value,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, error_budget: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            error_budget,
            passed: lhs <= rhs + error_budget,
            detail: serde_json::Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = detail;
        self
    }
}

fn norm_with(phi: &GammaCombination, cfg: Option<&QuadratureConfig>) -> Result<L1Estimate> {
    match cfg {
        Some(c) => l1_norm(phi, c),
        None => l1_norm(phi, &QuadratureConfig::for_combination(phi)),
    }
}

/// L1 bound on the coefficient error of [`apply`]: the truncation estimate
/// times the largest `‖γ_{d_i}‖₁`.
fn truncation_budget(cd: &CriticalData, coeff_error: f64) -> Result<f64> {
    if coeff_error == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for d in cd.class_values() {
        let e = norm_with(&GammaCombination::single(d)?, None)?;
        worst = worst.max(e.value + e.error_bound);
    }
    Ok(coeff_error * worst)
}

/// `‖f*φ‖₁ ≤ ‖φ‖₁`. With `cfg = None` each side uses its fitted resolution.
pub fn contraction_check(cd: &CriticalData, phi: &GammaCombination, cfg: Option<&QuadratureConfig>) -> Result<CheckResult> {
    let image = apply(cd, phi)?;
    let lhs = norm_with(&image, cfg)?;
    let rhs = norm_with(phi, cfg)?;
    let trunc = truncation_budget(cd, apply_truncation_estimate(cd, phi))?;
    let budget = lhs.error_bound + rhs.error_bound + trunc;
    Ok(CheckResult::new("contraction", lhs.value, rhs.value, budget).with_detail(serde_json::json!({
        "image_terms": image.len(),
        "lhs_error": lhs.error_bound,
        "rhs_error": rhs.error_bound,
        "truncation": trunc,
    })))
}

/// `‖Σ_{n≤N} xⁿ f^{*n}γ_a‖₁ ≤ ‖γ_a‖₁/(1 − |x|)`.
pub fn neumann_bound_check(cd: &CriticalData, x: Complex64, a: Complex64, n: usize, cfg: Option<&QuadratureConfig>) -> Result<CheckResult> {
    if x.norm() >= 1.0 {
        return Err(Error::Precondition(format!("|x| = {} ≥ 1", x.norm())));
    }
    let sums = neumann_partial_sums(cd, x, a, n)?;
    let partial = sums.last().expect("partial sums include N = 0");
    let lhs = norm_with(partial, cfg)?;
    let base = norm_with(&GammaCombination::single(a)?, cfg)?;
    let k = 1.0 / (1.0 - x.norm());
    // Coefficient truncation accumulates through the iterates.
    let mut coeff = Neumaier::new();
    let mut term = GammaCombination::single(a)?;
    let mut xn = 1.0;
    for _ in 0..n {
        xn *= x.norm();
        coeff.add(xn * apply_truncation_estimate(cd, &term));
        term = apply(cd, &term)?;
    }
    let trunc = truncation_budget(cd, coeff.value())?;
    let budget = lhs.error_bound + k * base.error_bound + trunc;
    Ok(CheckResult::new("neumann_bound", lhs.value, k * base.value, budget).with_detail(serde_json::json!({
        "x": [x.re, x.im],
        "n": n,
        "partial_terms": partial.len(),
        "gamma_norm": base.value,
    })))
}

/// Resolution of the duality pairings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityConfig {
    /// Inverse-branch window for the pullback side.
    pub k_range: i64,
    /// Gauss–Legendre nodes along each ray.
    pub radial_nodes: usize,
    /// Trapezoid angles per disc.
    pub angles: usize,
}

impl Default for DualityConfig {
    fn default() -> Self {
        Self {
            k_range: 200,
            radial_nodes: 24,
            angles: 96,
        }
    }
}

/// Polar integral of `g` over the star-shaped region `{s < s*(θ)}` about `o`.
fn star_integral(
    o: Complex64,
    extent: impl Fn(Complex64) -> Result<f64>,
    g: impl Fn(Complex64) -> Complex64,
    radial: usize,
    angles: usize,
) -> Result<Complex64> {
    let rule = Rule::new(radial);
    let mut acc = ComplexNeumaier::new();
    for j in 0..angles {
        let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / angles as f64);
        let smax = extent(e)?;
        for (s, w) in rule.on(0.0, smax) {
            acc.add(g(o + e * s) * (w * s));
        }
    }
    Ok(acc.value() * (2.0 * PI / angles as f64))
}

/// Distance along `o + s·e` to the level `|f − w0| = ρ`, from `s = 0` where
/// `f(o) = w0`.
fn level_crossing(map: &EntireMap, o: Complex64, e: Complex64, bump: &Bump, guess: f64) -> Result<f64> {
    let h = |s: f64| -> Result<f64> { Ok((map.f(o + e * s)? - bump.center).norm() - bump.radius) };
    let mut hi = guess;
    let mut tries = 0;
    while h(hi)? <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 20 {
            return Err(Error::Precondition("bump preimage is not bounded along a ray".into()));
        }
    }
    let mut lo = 0.0;
    // The first crossing from inside: bisection to full precision is cheap
    // next to the integrand evaluations.
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if h(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

struct Pairing {
    value: Complex64,
    tail: f64,
    terms: usize,
}

/// `∬ μ(f(z))·conj(f'(z))/f'(z)·φ(z) dA(z)`, summed over the preimage
/// components of the bump disc.
fn pullback_pairing(map: &EntireMap, bump: &Bump, phi: &GammaCombination, radial: usize, angles: usize, k_range: i64) -> Result<Pairing> {
    let pre = preimages(map, bump.center, BranchWindow::new(k_range)?)?;
    let parts: Vec<(i64, Complex64)> = pre
        .par_iter()
        .map(|&(k, y)| -> Result<(i64, Complex64)> {
            let f1 = map.evaluate(y, 1)?;
            let guess = bump.radius / f1.norm();
            let v = star_integral(
                y,
                |e| level_crossing(map, y, e, bump, guess),
                |z| match map.eval_all(z) {
                    Ok([f0, f1, _]) => bump.eval(f0) * (f1.conj() / f1) * phi.eval_unchecked(z),
                    Err(_) => Complex64::new(f64::NAN, 0.0),
                },
                radial,
                angles,
            )?;
            Ok((k, v))
        })
        .collect::<Result<_>>()?;
    let mut acc = ComplexNeumaier::new();
    let (mut inner, mut outer) = (Neumaier::new(), Neumaier::new());
    for (k, v) in &parts {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Range { what: "pullback pairing", z: bump.center });
        }
        acc.add(*v);
        let ak = k.abs();
        if 2 * ak > k_range {
            outer.add(v.norm());
        } else if 4 * ak > k_range {
            inner.add(v.norm());
        }
    }
    let (s1, s2) = (inner.value(), outer.value());
    let tail = if s2 == 0.0 {
        0.0
    } else if s2 >= s1 {
        f64::INFINITY
    } else {
        s2 * (s2 / s1) / (1.0 - s2 / s1)
    };
    Ok(Pairing {
        value: acc.value(),
        tail,
        terms: parts.len(),
    })
}

/// `∬ μ(w)·(f*φ)(w) dA(w)` with the closed-form image.
fn pushforward_pairing(image: &GammaCombination, bump: &Bump, radial: usize, angles: usize) -> Result<Complex64> {
    star_integral(
        bump.center,
        |_| Ok(bump.radius),
        |w| bump.eval(w) * image.eval_unchecked(w),
        radial,
        angles,
    )
}

/// `⟨B_f μ, φ⟩ = ⟨μ, f*φ⟩` for a polynomial bump `μ` away from the critical
/// values. `lhs` is the discrepancy between the two pairings.
pub fn duality_check(cd: &CriticalData, bump: &Bump, phi: &GammaCombination, cfg: &DualityConfig) -> Result<CheckResult> {
    let map = cd.map();
    if phi.is_empty() {
        return Ok(CheckResult::new("duality", 0.0, 0.0, 0.0));
    }
    if cfg.radial_nodes < 4 || cfg.angles < 8 {
        return Err(Error::Config(format!("duality resolution too coarse: {cfg:?}")));
    }
    for d in cd.class_values() {
        if (d - bump.center).norm() < 2.0 * bump.radius {
            return Err(Error::Precondition(format!("bump meets the critical value {d}")));
        }
    }
    let image = apply(cd, phi)?;
    for p in image.poles() {
        if (p - bump.center).norm() < 1.5 * bump.radius {
            return Err(Error::Precondition(format!("bump meets the pole {p} of f*φ")));
        }
    }
    for p in phi.poles() {
        if (map.f(p)? - bump.center).norm() < 1.5 * bump.radius {
            return Err(Error::Precondition(format!("a preimage component of the bump meets the pole {p}")));
        }
    }
    let (nr, na) = (cfg.radial_nodes, cfg.angles);
    let fine = pullback_pairing(map, bump, phi, nr, na, cfg.k_range)?;
    let coarse = pullback_pairing(map, bump, phi, nr / 2, na / 2, cfg.k_range)?;
    let push_f = pushforward_pairing(&image, bump, nr, na)?;
    let push_c = pushforward_pairing(&image, bump, nr / 2, na / 2)?;
    let sup_gamma = cd
        .class_values()
        .iter()
        .map(|d| {
            // |γ_d| on the bump disc is bounded by its value at the nearest
            // point to d, up to the factor from the other two poles.
            let dist = ((d - bump.center).norm() - bump.radius).max(1e-300);
            let near0 = (bump.center.norm() - bump.radius).max(1e-300);
            let near1 = ((bump.center - 1.0).norm() - bump.radius).max(1e-300);
            (d * (d - 1.0)).norm() / (dist * near0 * near1)
        })
        .fold(0.0, f64::max);
    let trunc = apply_truncation_estimate(cd, phi) * sup_gamma * bump.mass();
    let quad = (fine.value - coarse.value).norm() + (push_f - push_c).norm();
    let scale = fine.value.norm().max(push_f.norm());
    let budget = quad + fine.tail + trunc + 1e-12 * scale;
    let discrepancy = (fine.value - push_f).norm();
    Ok(CheckResult::new("duality", discrepancy, 0.0, budget).with_detail(serde_json::json!({
        "pullback": [fine.value.re, fine.value.im],
        "pushforward": [push_f.re, push_f.im],
        "branch_tail": fine.tail,
        "quadrature": quad,
        "truncation": trunc,
        "components": fine.terms,
    })))
}

/// `∬ μ(w) γ_a(w) dA` against a bump, evaluated pointwise; used by tests as
/// a smooth reference integral.
pub fn bump_gamma_pairing(bump: &Bump, a: Complex64, radial: usize, angles: usize) -> Result<Complex64> {
    star_integral(bump.center, |_| Ok(bump.radius), |w| bump.eval(w) * gamma_unchecked(a, w), radial, angles)
}
