//! The transfer operator `f*φ(z) = Σ_{f(y)=z} φ(y)/f'(y)²`.
//!
//! [`apply`] acts in closed form on the γ span,
//! `f*γ_a = γ_{f(a)}/f'(a) + Σ_i b_i γ_a(c_i) γ_{d_i}`, which requires
//! `f(0) = 0` and `f(1) = 1`. [`apply_direct`] sums over explicit inverse
//! branches and is independent of the critical data.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::critical::CriticalData;
use crate::error::{Error, Result};
use crate::gamma::{GammaCombination, BASE_TOL};
use crate::map::EntireMap;
use crate::sum::{ComplexNeumaier, Neumaier};

pub const NEAR_CRITICAL_TOL: f64 = 1e-8;
pub const BRANCH_DERIV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchWindow {
    /// Branch indices `|k| ≤ k_range`.
    pub k_range: i64,
    /// Include the second arcsin sheet `π − arcsin u`.
    pub both_sheets: bool,
}

impl BranchWindow {
    pub fn new(k_range: i64) -> Result<Self> {
        if k_range < 1 {
            return Err(Error::Config(format!("k_range must be ≥ 1, got {k_range}")));
        }
        Ok(Self {
            k_range,
            both_sheets: true,
        })
    }
}

/// Weight applied to each inverse branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pushforward {
    /// `1/f'(y)²`, the transfer operator.
    Ruelle,
    /// `1/|f'(y)|²`, its modulus.
    Modulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectResult {
    #[serde(with = "crate::serde_complex")]
    pub value: Complex64,
    pub tail_estimate: f64,
    pub terms_used: usize,
    /// Branches dropped because `|f'(y)| < 1e−10`.
    pub skipped: usize,
}

fn check_normalized(map: &EntireMap) -> Result<()> {
    if map.fixes_zero_and_one() {
        Ok(())
    } else {
        Err(Error::Precondition("the closed form needs f(0) = 0 and f(1) = 1".into()))
    }
}

fn push_image(out: &mut GammaCombination, a: Complex64, w: Complex64) -> Result<()> {
    match out.push(a, w) {
        Err(Error::InvalidBase(a)) => Err(Error::PoleCollision(a)),
        other => other,
    }
}

/// Reject bases within [`NEAR_CRITICAL_TOL`] of a critical point: explicit
/// entries first, then the Newton distance `|f'/f''|`.
fn check_not_critical(cd: &CriticalData, a: Complex64, f1: Complex64, f2: Complex64) -> Result<()> {
    if let Some(e) = cd.entries().iter().find(|e| (e.c - a).norm() < NEAR_CRITICAL_TOL) {
        return Err(Error::NearCritical {
            a,
            c: e.c,
            dist: (e.c - a).norm(),
        });
    }
    if f1.norm() < NEAR_CRITICAL_TOL * f2.norm() {
        return Err(Error::NearCritical {
            a,
            c: a - f1 / f2,
            dist: (f1 / f2).norm(),
        });
    }
    Ok(())
}

/// Image bases this close (relative) to a base already present are identified
/// with it; otherwise a repelling cycle drifts by its multiplier at every
/// application and splits into nearly coincident poles.
pub const SNAP_TOL: f64 = 1e-7;

fn snap(fa: Complex64, known: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let tol = SNAP_TOL * fa.norm().max(1.0);
    known
        .into_iter()
        .map(|b| (b, (b - fa).norm()))
        .filter(|(_, d)| *d <= tol)
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map_or(fa, |(b, _)| b)
}

/// Closed-form `f*φ`. Terms are emitted per input term as the image base
/// followed by the critical-value classes, merging on insertion.
pub fn apply(cd: &CriticalData, phi: &GammaCombination) -> Result<GammaCombination> {
    let map = cd.map();
    check_normalized(map)?;
    let values = cd.class_values();
    let mut out = GammaCombination::new();
    for t in phi.terms() {
        let [fa, f1, f2] = map.eval_all(t.a)?;
        check_not_critical(cd, t.a, f1, f2)?;
        let known: Vec<Complex64> = phi
            .terms()
            .iter()
            .map(|u| u.a)
            .chain(out.terms().iter().map(|u| u.a))
            .chain(values.iter().cloned())
            .collect();
        let fa = snap(fa, known);
        push_image(&mut out, fa, t.w / f1)?;
        for (d, s) in values.iter().zip(cd.class_gamma_sums(t.a)) {
            push_image(&mut out, *d, t.w * s)?;
        }
    }
    Ok(out)
}

/// Bound on the summed absolute coefficient error of [`apply`] from critical
/// points not represented in `cd`.
pub fn apply_truncation_estimate(cd: &CriticalData, phi: &GammaCombination) -> f64 {
    let mut acc = Neumaier::new();
    for t in phi.terms() {
        acc.add(t.w.norm() * cd.truncation_estimate(t.a));
    }
    acc.value()
}

/// `f^{*n} γ_a` by `n` applications of [`apply`].
pub fn iterate(cd: &CriticalData, a: Complex64, n: usize) -> Result<GammaCombination> {
    let mut phi = GammaCombination::single(a)?;
    for _ in 0..n {
        phi = apply(cd, &phi)?;
    }
    Ok(phi)
}

/// `P1` constant and `P2` linear: the preimage equation is `sin(P3(y)) = u`.
struct BranchShape {
    p1: Complex64,
    m0: Complex64,
    m1: Complex64,
}

fn branch_shape(map: &EntireMap) -> Result<BranchShape> {
    if !map.p1().is_constant() {
        return Err(Error::UnsupportedBranchStructure("P1 must be constant".into()));
    }
    if map.p2().degree() != Some(1) {
        return Err(Error::UnsupportedBranchStructure("P2 must be linear".into()));
    }
    Ok(BranchShape {
        p1: map.p1().coeff(0),
        m0: map.p2().coeff(0),
        m1: map.p2().coeff(1),
    })
}

/// Critical values for the supported branch shape: `P1 + P2(±1)` and the
/// images of the zeros of `P3'`.
pub fn branch_critical_values(map: &EntireMap) -> Result<Vec<Complex64>> {
    let s = branch_shape(map)?;
    let mut out = vec![s.p1 + s.m0 + s.m1, s.p1 + s.m0 - s.m1];
    if let Ok(roots) = map.p3().derivative().roots() {
        for r in roots {
            out.push(map.f(r)?);
        }
    }
    Ok(out)
}

/// Preimages `y` of `z` tagged with their branch index `k`, ordered by `k`,
/// then sheet, then root of `P3(y) = w`.
pub fn preimages(map: &EntireMap, z: Complex64, win: BranchWindow) -> Result<Vec<(i64, Complex64)>> {
    let s = branch_shape(map)?;
    for d in branch_critical_values(map)? {
        let dist = (z - d).norm();
        if dist < NEAR_CRITICAL_TOL {
            return Err(Error::NearCriticalValue { z, d, dist });
        }
    }
    let u = (z - s.p1 - s.m0) / s.m1;
    let base = u.asin();
    let p3 = map.p3();
    let linear = p3.degree() == Some(1);
    let (a3, b3) = (p3.coeff(1), p3.coeff(0));
    let mut out = Vec::new();
    for k in -win.k_range..=win.k_range {
        let shift = 2.0 * PI * k as f64;
        let mut ws = vec![base + shift];
        if win.both_sheets {
            ws.push(Complex64::new(PI, 0.0) - base + shift);
        }
        for w in ws {
            if linear {
                out.push((k, (w - b3) / a3));
            } else {
                for y in p3.add_constant(-w).roots()? {
                    out.push((k, y));
                }
            }
        }
    }
    Ok(out)
}

/// Truncated branch sum of `φ(y)·weight(f'(y))` over `f(y) = z`.
///
/// The tail estimate extrapolates the absolute shell sums over
/// `K/4 < |k| ≤ K/2` and `K/2 < |k| ≤ K` geometrically.
pub fn apply_direct(
    map: &EntireMap,
    phi: impl Fn(Complex64) -> Complex64,
    z: Complex64,
    win: BranchWindow,
    kind: Pushforward,
) -> Result<DirectResult> {
    let pre = preimages(map, z, win)?;
    let kk = win.k_range;
    let mut acc = ComplexNeumaier::new();
    let mut inner = Neumaier::new();
    let mut outer = Neumaier::new();
    let mut terms_used = 0;
    let mut skipped = 0;
    for (k, y) in pre {
        let f1 = map.evaluate(y, 1)?;
        if f1.norm() < BRANCH_DERIV_TOL {
            skipped += 1;
            continue;
        }
        let weight = match kind {
            Pushforward::Ruelle => 1.0 / (f1 * f1),
            Pushforward::Modulus => Complex64::new(1.0 / f1.norm_sqr(), 0.0),
        };
        let term = phi(y) * weight;
        if !(term.re.is_finite() && term.im.is_finite()) {
            return Err(Error::Range { what: "branch term", z: y });
        }
        acc.add(term);
        terms_used += 1;
        let ak = k.abs();
        if 2 * ak > kk {
            outer.add(term.norm());
        } else if 4 * ak > kk {
            inner.add(term.norm());
        }
    }
    let (s1, s2) = (inner.value(), outer.value());
    let tail_estimate = if s2 == 0.0 {
        0.0
    } else if s1 == 0.0 || s2 >= s1 {
        f64::INFINITY
    } else {
        let r = s2 / s1;
        s2 * r / (1.0 - r)
    };
    Ok(DirectResult {
        value: acc.value(),
        tail_estimate,
        terms_used,
        skipped,
    })
}

/// Direct transfer of a γ combination; poles of `φ` at preimages are errors.
pub fn apply_direct_combo(
    map: &EntireMap,
    phi: &GammaCombination,
    z: Complex64,
    win: BranchWindow,
) -> Result<DirectResult> {
    apply_direct(map, |y| phi.eval_unchecked(y), z, win, Pushforward::Ruelle)
}

/// Whether `a` is a usable base: away from 0, 1 within the base tolerance.
pub fn is_valid_base(a: Complex64) -> bool {
    a.norm() > BASE_TOL && (a - 1.0).norm() > BASE_TOL
}
