//! Poincaré series `A(x,a,z) = Σ xⁿ γ_{fⁿ(a)}(z)/(fⁿ)'(a)` and
//! `S(x,a,z) = Σ xⁿ f^{*n}γ_a(z)`.
//!
//! Iterating `f*γ_a = γ_{f(a)}/f'(a) + Σ_k b_k γ_a(c_k) γ_{d_k}` along the
//! orbit of `a` gives the functional equation
//! `S(x,a,z) = A(x,a,z) + x Σ_k b_k A(x,a,c_k) S(x,d_k,z)`, which closes over
//! the `q` distinct critical values.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::CriticalData;
use crate::error::{Error, Pole, Result};
use crate::gamma::{gamma_unchecked, GammaCombination};
use crate::map::EntireMap;
use crate::orbit::{orbit, OrbitData, DEGENERACY_TOL};
use crate::ruelle::apply;
use crate::sum::{ComplexNeumaier, Neumaier};
use crate::summability::{classify_value, Verdict};

pub const ESCAPE_RADIUS: f64 = 1e6;
/// Ratios used for the decay-rate fit.
pub const RATE_WINDOW: usize = 10;
/// Successive sub-tolerance tails required for convergence.
pub const CONFIRMATIONS: usize = 3;
pub const POINT_POLE_TOL: f64 = 1e-10;
pub const EXACT_HIT_TOL: f64 = 1e-12;
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesEval {
    #[serde(with = "crate::serde_complex")]
    pub value: Complex64,
    pub n_used: usize,
    pub tail_estimate: f64,
    pub converged: bool,
}

impl SeriesEval {
    fn exact(value: Complex64) -> Self {
        Self {
            value,
            n_used: 1,
            tail_estimate: 0.0,
            converged: true,
        }
    }
}

/// Tail of a series whose last term magnitudes are `mags`, extrapolated with
/// the geometric mean of the last [`RATE_WINDOW`] ratios.
pub fn geometric_tail(mags: &[f64]) -> f64 {
    let Some(&last) = mags.last() else {
        return f64::INFINITY;
    };
    if last == 0.0 {
        return 0.0;
    }
    let lo = mags.len().saturating_sub(RATE_WINDOW + 1);
    let window = &mags[lo..];
    if window.len() < 2 || window.iter().any(|m| *m == 0.0 || !m.is_finite()) {
        return f64::INFINITY;
    }
    let mean_log = window.windows(2).map(|w| (w[1] / w[0]).ln()).sum::<f64>() / (window.len() - 1) as f64;
    let rho = mean_log.exp();
    if rho >= 1.0 {
        f64::INFINITY
    } else {
        last * rho / (1.0 - rho)
    }
}

/// Sum `Σ_n xⁿ/(fⁿ)'(a) · g(n, fⁿ(a))` along a stored orbit.
///
/// `dominating(n)` bounds `|term_n|` up to the running sup factor returned by
/// `g`'s magnitude; the tail is the geometric extrapolation of
/// `dominating(n)·sup`.
fn orbit_sum(
    orb: &OrbitData,
    x: Complex64,
    tol: f64,
    mut g: impl FnMut(usize, Complex64) -> Result<(Complex64, f64)>,
    dominating: impl Fn(usize) -> f64,
) -> Result<SeriesEval> {
    let mut acc = ComplexNeumaier::new();
    let mut dom: Vec<f64> = Vec::new();
    let mut sup: f64 = 0.0;
    let mut hits = 0;
    let mut xn = Complex64::new(1.0, 0.0);
    let mut tail = f64::INFINITY;
    let n_avail = orb.points.len();
    for n in 0..n_avail {
        let (val, factor) = g(n, orb.points[n])?;
        let term = xn * val / orb.derivs[n];
        acc.add(term);
        sup = sup.max(factor);
        dom.push(x.norm().powi(n as i32) * dominating(n));
        tail = geometric_tail(&dom) * sup;
        if tail < tol {
            hits += 1;
            if hits >= CONFIRMATIONS {
                return Ok(SeriesEval {
                    value: acc.value(),
                    n_used: n + 1,
                    tail_estimate: tail,
                    converged: true,
                });
            }
        } else {
            hits = 0;
        }
        xn *= x;
    }
    Ok(SeriesEval {
        value: acc.value(),
        n_used: n_avail,
        tail_estimate: tail,
        converged: false,
    })
}

fn check_x(x: Complex64, closed: bool) -> Result<()> {
    let ok = if closed { x.norm() <= 1.0 } else { x.norm() < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(format!("|x| = {} out of range", x.norm())))
    }
}

/// `A(x, a, z)` by direct summation along the orbit of `a`.
pub fn a_series(map: &EntireMap, x: Complex64, a: Complex64, z: Complex64, n_max: usize, tol: f64) -> Result<SeriesEval> {
    check_x(x, true)?;
    let orb = orbit(map, a, n_max, ESCAPE_RADIUS);
    a_series_on(&orb, x, z, tol)
}

/// `A(x, a, z)` on a precomputed orbit of `a`.
pub fn a_series_on(orb: &OrbitData, x: Complex64, z: Complex64, tol: f64) -> Result<SeriesEval> {
    let a = orb.start;
    if x == Complex64::new(0.0, 0.0) {
        return Ok(SeriesEval::exact(crate::gamma::gamma_eval(a, z)?));
    }
    let res = orbit_sum(
        orb,
        x,
        tol,
        |n, p| {
            orb.check_degeneracy(n)?;
            if (z - p).norm() <= POINT_POLE_TOL {
                return Err(Error::PoleEvaluation { pole: Pole::Base, a: p, z });
            }
            let v = crate::gamma::gamma_eval(p, z)?;
            Ok((v, v.norm()))
        },
        |n| 1.0 / orb.derivs[n].norm(),
    )?;
    Ok(res)
}

/// One term of `A(x, a, c)` with its Lemma-4 domination data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTerm {
    pub term: Complex64,
    /// `|γ_{fⁿ(a)}(c)·f'(fⁿ(a))|`, bounded even as `fⁿ(a) → c`.
    pub k1: f64,
    /// `|xⁿ/(f^{n+1})'(a)|`.
    pub next_inverse_derivative: f64,
}

/// Terms of `A(x, a, c)` with `|term_n| = k1_n · |xⁿ/(f^{n+1})'(a)|`.
pub fn a_at_point_terms(map: &EntireMap, x: Complex64, a: Complex64, c: Complex64, n: usize) -> Result<Vec<PointTerm>> {
    let orb = orbit(map, a, n + 1, ESCAPE_RADIUS);
    let mut out = Vec::new();
    let mut xn = Complex64::new(1.0, 0.0);
    for k in 0..orb.points.len().saturating_sub(1) {
        let p = orb.points[k];
        if (p - c).norm() <= EXACT_HIT_TOL {
            return Err(Error::DegenerateOrbit {
                index: k,
                point: p,
                kind: "the evaluation point (exact hit)",
            });
        }
        let g = gamma_unchecked(p, c);
        let f1 = map.evaluate(p, 1)?;
        out.push(PointTerm {
            term: xn * g / orb.derivs[k],
            k1: (g * f1).norm(),
            next_inverse_derivative: xn.norm() / orb.derivs[k + 1].norm(),
        });
        xn *= x;
    }
    Ok(out)
}

/// `A(x, a, c)` at a critical point `c`. The tail is driven by
/// `K₁·|xⁿ/(f^{n+1})'(a)|` with `K₁ = max |γ_{fⁿ(a)}(c) f'(fⁿ(a))|`, which
/// stays finite when the orbit accumulates on `c`.
pub fn a_at_point(map: &EntireMap, x: Complex64, a: Complex64, c: Complex64, n_max: usize, tol: f64) -> Result<SeriesEval> {
    check_x(x, true)?;
    if x == Complex64::new(0.0, 0.0) {
        return Ok(SeriesEval::exact(crate::gamma::gamma_eval(a, c)?));
    }
    let orb = orbit(map, a, n_max + 1, ESCAPE_RADIUS);
    let fprime: Vec<Complex64> = orb
        .points
        .iter()
        .map(|&p| map.evaluate(p, 1))
        .collect::<Result<_>>()?;
    let derivs = orb.derivs.clone();
    let mut trimmed = orb.clone();
    let keep = orb.points.len().saturating_sub(1).max(1).min(n_max + 1);
    trimmed.points.truncate(keep);
    trimmed.derivs.truncate(keep);
    orbit_sum(
        &trimmed,
        x,
        tol,
        |n, p| {
            if p.norm() < DEGENERACY_TOL || (p - 1.0).norm() < DEGENERACY_TOL {
                orb.check_degeneracy(n)?;
            }
            if (p - c).norm() <= EXACT_HIT_TOL {
                return Err(Error::DegenerateOrbit {
                    index: n,
                    point: p,
                    kind: "the evaluation point (exact hit)",
                });
            }
            let g = gamma_unchecked(p, c);
            Ok((g, (g * fprime[n]).norm()))
        },
        |n| 1.0 / derivs.get(n + 1).map_or(f64::NAN, |d| d.norm()),
    )
}

/// Per-class sums `Σ_{c_k ∈ i} b_k A(x, a, c_k)` over explicit and far
/// critical points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCoupling {
    #[serde(with = "crate::serde_complex::vec")]
    pub values: Vec<Complex64>,
    /// Series tail plus critical-data truncation, per class.
    pub tails: Vec<f64>,
    pub n_used: usize,
    pub converged: bool,
}

pub fn class_coupling(cd: &CriticalData, x: Complex64, a: Complex64, n_max: usize, tol: f64) -> Result<ClassCoupling> {
    check_x(x, true)?;
    let map = cd.map();
    let q = cd.classes().len();
    let orb = orbit(map, a, n_max + 1, ESCAPE_RADIUS);
    let mut acc = vec![ComplexNeumaier::new(); q];
    let mut trunc = Neumaier::new();
    let mut dom: Vec<f64> = Vec::new();
    let mut sup: f64 = 0.0;
    let mut hits = 0;
    let mut xn = Complex64::new(1.0, 0.0);
    let mut tail = f64::INFINITY;
    let mut n_used = 0;
    let mut converged = false;
    let n_avail = orb.points.len().saturating_sub(1).max(1);
    for n in 0..n_avail {
        let p = orb.points[n];
        if p.norm() < DEGENERACY_TOL || (p - 1.0).norm() < DEGENERACY_TOL {
            orb.check_degeneracy(n)?;
        }
        if let Some(e) = cd.entries().iter().find(|e| (e.c - p).norm() <= EXACT_HIT_TOL) {
            return Err(Error::DegenerateOrbit {
                index: n,
                point: e.c,
                kind: "a critical point (exact hit)",
            });
        }
        let w = xn / orb.derivs[n];
        let sums = cd.class_gamma_sums(p);
        let mut mag = 0.0;
        for (i, s) in sums.iter().enumerate() {
            acc[i].add(w * s);
            mag += s.norm();
        }
        trunc.add(w.norm() * cd.truncation_estimate(p));
        let f1 = map.evaluate(p, 1)?;
        sup = sup.max(mag * f1.norm());
        dom.push(x.norm().powi(n as i32) / orb.derivs.get(n + 1).map_or(f64::NAN, |d| d.norm()));
        tail = geometric_tail(&dom) * sup;
        n_used = n + 1;
        if tail < tol {
            hits += 1;
            if hits >= CONFIRMATIONS {
                converged = true;
                break;
            }
        } else {
            hits = 0;
        }
        xn *= x;
    }
    let t = tail + trunc.value();
    Ok(ClassCoupling {
        values: acc.iter().map(ComplexNeumaier::value).collect(),
        tails: vec![t; q],
        n_used,
        converged,
    })
}

/// The `q×q` system `S_j = A(x,d_j,z) + Σ_i M[j][i] S_i` over critical-value
/// classes, `M[j][i] = x Σ_{c_k ∈ i} b_k A(x,d_j,c_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSystem {
    pub q: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(with = "crate::serde_complex::vec")]
    pub rhs: Vec<Complex64>,
    /// 2-norm condition number of `I − M`.
    pub condition: f64,
    pub tail: f64,
}

fn to_pairs(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|j| (0..m.ncols()).map(|i| [m[(j, i)].re, m[(j, i)].im]).collect())
        .collect()
}

/// Condition number from singular values; infinite when singular.
pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_value_system(cd: &CriticalData, x: Complex64, z: Complex64, n_max: usize, tol: f64) -> Result<(ValueSystem, Vec<Complex64>)> {
    let map = cd.map();
    let values = cd.class_values();
    let q = values.len();
    let rows: Vec<Result<(ClassCoupling, SeriesEval)>> = values
        .par_iter()
        .map(|&d| {
            let cc = class_coupling(cd, x, d, n_max, tol)?;
            let rhs = a_series(map, x, d, z, n_max, tol)?;
            Ok((cc, rhs))
        })
        .collect();
    let mut m = DMatrix::<Complex64>::zeros(q, q);
    let mut rhs = DVector::<Complex64>::zeros(q);
    let mut tail: f64 = 0.0;
    for (j, row) in rows.into_iter().enumerate() {
        let (cc, a) = row?;
        for i in 0..q {
            m[(j, i)] = x * cc.values[i];
        }
        rhs[j] = a.value;
        tail = tail.max(x.norm() * cc.tails[0]).max(a.tail_estimate);
    }
    let lhs = DMatrix::<Complex64>::identity(q, q) - &m;
    let condition = condition_number(&lhs);
    let system = ValueSystem {
        q,
        matrix: to_pairs(&m),
        rhs: rhs.iter().cloned().collect(),
        condition,
        tail,
    };
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    Ok((system, sol.iter().cloned().collect()))
}

/// The value system at `(x, z)` without solving it.
pub fn value_system(cd: &CriticalData, x: Complex64, z: Complex64, n_max: usize, tol: f64) -> Result<ValueSystem> {
    match solve_value_system(cd, x, z, n_max, tol) {
        Ok((s, _)) => Ok(s),
        Err(e) => Err(e),
    }
}

/// `S(x, a, z)` from the value system.
pub fn s_by_system(cd: &CriticalData, x: Complex64, a: Complex64, z: Complex64, n_max: usize, tol: f64) -> Result<SeriesEval> {
    check_x(x, false)?;
    let map = cd.map();
    if x == Complex64::new(0.0, 0.0) {
        return Ok(SeriesEval::exact(crate::gamma::gamma_eval(a, z)?));
    }
    let base = a_series(map, x, a, z, n_max, tol)?;
    if cd.classes().is_empty() {
        return Ok(base);
    }
    let (system, s) = solve_value_system(cd, x, z, n_max, tol)?;
    let cc = class_coupling(cd, x, a, n_max, tol)?;
    let mut acc = ComplexNeumaier::new();
    acc.add(base.value);
    let mut smax: f64 = 0.0;
    let mut cmax: f64 = 0.0;
    for i in 0..s.len() {
        acc.add(x * cc.values[i] * s[i]);
        smax = smax.max(s[i].norm());
        cmax = cmax.max(cc.values[i].norm());
    }
    let q = s.len() as f64;
    let tail = base.tail_estimate
        + x.norm() * q * (cc.tails[0] * smax + cmax * system.condition * system.tail * (1.0 + smax));
    Ok(SeriesEval {
        value: acc.value(),
        n_used: base.n_used.max(cc.n_used),
        tail_estimate: tail,
        converged: base.converged && cc.converged,
    })
}

/// Partial sums of `S(x, a, ·)` as γ combinations, `Σ_{n≤N} xⁿ f^{*n}γ_a` for
/// `N = 0..=n_max`, built incrementally.
pub fn neumann_partial_sums(cd: &CriticalData, x: Complex64, a: Complex64, n_max: usize) -> Result<Vec<GammaCombination>> {
    let mut term = GammaCombination::single(a)?;
    let mut sum = term.clone();
    let mut out = vec![sum.clone()];
    let mut xn = Complex64::new(1.0, 0.0);
    for _ in 0..n_max {
        term = apply(cd, &term)?;
        xn *= x;
        sum = sum.linear(Complex64::new(1.0, 0.0), &term, xn);
        out.push(sum.clone());
    }
    Ok(out)
}

/// `S(x, a, z)` by partial sums `Σ_{n≤N} xⁿ (f^{*n}γ_a)(z)`; the pointwise tail
/// extrapolates the observed term decay.
pub fn s_by_neumann(cd: &CriticalData, x: Complex64, a: Complex64, z: Complex64, n_max: usize, tol: f64) -> Result<SeriesEval> {
    check_x(x, false)?;
    if x == Complex64::new(0.0, 0.0) {
        return Ok(SeriesEval::exact(crate::gamma::gamma_eval(a, z)?));
    }
    let mut term = GammaCombination::single(a)?;
    let mut acc = ComplexNeumaier::new();
    let mut mags = Vec::new();
    let mut xn = Complex64::new(1.0, 0.0);
    let mut hits = 0;
    let mut tail = f64::INFINITY;
    for n in 0..=n_max {
        if n > 0 {
            term = apply(cd, &term)?;
            xn *= x;
        }
        let v = xn * term.eval(z)?;
        acc.add(v);
        mags.push(v.norm());
        tail = geometric_tail(&mags);
        if tail < tol {
            hits += 1;
            if hits >= CONFIRMATIONS {
                return Ok(SeriesEval {
                    value: acc.value(),
                    n_used: n + 1,
                    tail_estimate: tail,
                    converged: true,
                });
            }
        } else {
            hits = 0;
        }
    }
    Ok(SeriesEval {
        value: acc.value(),
        n_used: n_max + 1,
        tail_estimate: tail,
        converged: false,
    })
}

/// Where `A(x, a, ·)` is evaluated in [`limit_x_to_1`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitTarget {
    Field(#[serde(with = "crate::serde_complex")] Complex64),
    Point(#[serde(with = "crate::serde_complex")] Complex64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub schedule: Vec<f64>,
    #[serde(with = "crate::serde_complex::vec")]
    pub values: Vec<Complex64>,
    #[serde(with = "crate::serde_complex")]
    pub limit: Complex64,
    pub limit_tail: f64,
    /// `|A(x) − A(1)|` along the schedule.
    pub trend: Vec<f64>,
    pub decreasing: bool,
    /// `Σ |xⁿ − 1|/|(fⁿ)'(a)|` along the schedule.
    pub corollary_sums: Vec<f64>,
}

/// Evaluate `A(x, a, ·)` along `schedule` and at `x = 1`. Requires `a` to be
/// classified summable.
pub fn limit_x_to_1(map: &EntireMap, schedule: &[f64], a: Complex64, target: LimitTarget, n_max: usize, tol: f64) -> Result<LimitReport> {
    let report = classify_value(map, a, n_max, tol)?;
    if report.verdict != Verdict::Summable {
        return Err(Error::Precondition(format!("{a} is not classified summable ({:?})", report.verdict)));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule.iter().any(|x| !(0.0..1.0).contains(x)) {
        return Err(Error::Config("schedule must increase within [0, 1)".into()));
    }
    let eval = |x: f64| -> Result<SeriesEval> {
        let x = Complex64::new(x, 0.0);
        match target {
            LimitTarget::Field(z) => a_series(map, x, a, z, n_max, tol),
            LimitTarget::Point(c) => a_at_point(map, x, a, c, n_max, tol),
        }
    };
    let limit = eval(1.0)?;
    let values = schedule
        .par_iter()
        .map(|&x| eval(x).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?;
    let trend: Vec<f64> = values.iter().map(|v| (v - limit.value).norm()).collect();
    let decreasing = trend.windows(2).all(|w| w[1] < w[0]);
    let orb = orbit(map, a, n_max, ESCAPE_RADIUS);
    let corollary_sums = schedule
        .iter()
        .map(|&x| {
            let mut acc = Neumaier::new();
            for (n, d) in orb.derivs.iter().enumerate() {
                acc.add((x.powi(n as i32) - 1.0).abs() / d.norm());
            }
            acc.value()
        })
        .collect();
    Ok(LimitReport {
        schedule: schedule.to_vec(),
        values,
        limit: limit.value,
        limit_tail: limit.tail_estimate,
        trend,
        decreasing,
        corollary_sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn geometric_tail_of_exact_geometric() {
        let mags: Vec<f64> = (0..20).map(|n| 0.5f64.powi(n)).collect();
        let t = geometric_tail(&mags);
        assert!((t - 0.5f64.powi(19)).abs() < 1e-15);
        assert!(geometric_tail(&[1.0]).is_infinite());
        assert!(geometric_tail(&[1.0, 2.0, 4.0]).is_infinite());
    }

    #[test]
    fn x_zero_is_gamma() {
        let f = EntireMap::sine_family(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let (a, z) = (c(2.0, 1.0), c(0.3, 0.4));
        let r = a_series(&f, c(0.0, 0.0), a, z, 50, 1e-12).unwrap();
        assert_eq!(r.value, crate::gamma::gamma_eval(a, z).unwrap());
        assert_eq!(r.n_used, 1);
        let r = a_at_point(&f, c(0.0, 0.0), a, z, 50, 1e-12).unwrap();
        assert_eq!(r.value, crate::gamma::gamma_eval(a, z).unwrap());
    }

    #[test]
    fn x_out_of_range_rejected() {
        let f = EntireMap::sine_family(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(a_series(&f, c(1.1, 0.0), c(2.0, 0.0), c(0.5, 0.5), 10, 1e-12).is_err());
    }
}
