//! Three-valued summability classification of critical orbits.
//!
//! Convergence of an infinite series is not decidable from finitely many
//! terms. Every verdict carries its ratio trace so the evidence can be read.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::CriticalData;
use crate::error::Result;
use crate::map::EntireMap;
use crate::orbit::{orbit, Boundedness, OrbitData};
use crate::ruelle::{preimages, BranchWindow};
use crate::sum::Neumaier;

pub const ESCAPE_RADIUS: f64 = 1e6;
pub const WINDOW: usize = 10;
pub const DELTA: f64 = 0.05;
/// A term at least this large with a non-decaying window rules out
/// convergence.
pub const DIVERGENCE_TERM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Summable,
    NotSummable,
    Undecided,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Summable => "summable",
            Verdict::NotSummable => "not_summable",
            Verdict::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    /// The point whose orbit is summed (`f(a)` for [`classify`]).
    #[serde(with = "crate::serde_complex")]
    pub point: Complex64,
    pub boundedness: Boundedness,
    /// `Σ_{n≥0} 1/|(fⁿ)'(point)|` over the stored orbit.
    pub series1_partial: f64,
    pub series1_tail: f64,
    /// `Σ_{n≥0} |fⁿ(point)|·|ln|fⁿ(point)||/|(fⁿ)'(point)|`; only populated
    /// for unbounded orbits.
    pub series2_partial: Option<f64>,
    pub series2_tail: Option<f64>,
    pub verdict: Verdict,
    /// `t_n/t_{n−1}` for the series-1 terms.
    pub ratio_trace: Vec<f64>,
    pub terms_used: usize,
    /// Multiplier of a detected cycle.
    pub cycle_multiplier: Option<f64>,
}

/// Geometric-mean ratio over the last [`WINDOW`] log-ratios.
fn window_rate(log_terms: &[f64]) -> Option<f64> {
    if log_terms.len() < WINDOW + 1 {
        return None;
    }
    let w = &log_terms[log_terms.len() - WINDOW - 1..];
    Some(((w[WINDOW] - w[0]) / WINDOW as f64).exp())
}

struct SeriesEvidence {
    partial: f64,
    tail: f64,
    converged: bool,
    diverged: bool,
}

fn assess(log_terms: &[f64], tol: f64) -> SeriesEvidence {
    let mut acc = Neumaier::new();
    for l in log_terms {
        acc.add(l.exp());
    }
    let last = log_terms.last().copied().unwrap_or(f64::NEG_INFINITY);
    let (tail, converged, diverged) = match window_rate(log_terms) {
        Some(rho) if rho < 1.0 - DELTA => {
            let t = last.exp() * rho / (1.0 - rho);
            (t, t < tol, false)
        }
        Some(rho) => (f64::INFINITY, false, rho >= 1.0 && last >= DIVERGENCE_TERM.ln()),
        None => (f64::INFINITY, false, false),
    };
    SeriesEvidence {
        partial: acc.value(),
        tail,
        converged,
        diverged,
    }
}

fn report_from_orbit(orb: &OrbitData, map: &EntireMap, tol: f64) -> Result<SummabilityReport> {
    orb.check_degeneracy(orb.len())?;
    let log1: Vec<f64> = orb.derivs.iter().map(|d| -d.norm().ln()).collect();
    let ratio_trace: Vec<f64> = log1.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    let s1 = assess(&log1, tol);

    // Terms of a convergent series tend to zero; a cycle with multiplier of
    // modulus ≤ 1 makes `1/|(fⁿ)'|` bounded below.
    let cycle_multiplier = match orb.cycle {
        Some(c) => {
            let mut m = Complex64::new(1.0, 0.0);
            for k in c.preperiod..c.preperiod + c.period {
                m *= map.evaluate(orb.points[k], 1)?;
            }
            Some(m.norm())
        }
        None => None,
    };
    let cycle_blocks = cycle_multiplier.is_some_and(|m| m <= 1.0);

    let (s2, series2_partial, series2_tail) = if orb.boundedness == Boundedness::Unbounded {
        let log2: Vec<f64> = orb
            .points
            .iter()
            .zip(&orb.derivs)
            .map(|(p, d)| {
                let r = p.norm().ln();
                r + r.abs().ln() - d.norm().ln()
            })
            .collect();
        let e = assess(&log2, tol);
        let (p, t) = (e.partial, e.tail);
        (Some(e), Some(p), Some(t))
    } else {
        (None, None, None)
    };

    let verdict = if cycle_blocks || s1.diverged || s2.as_ref().is_some_and(|e| e.diverged) {
        Verdict::NotSummable
    } else if s1.converged && s2.as_ref().map_or(true, |e| e.converged) {
        Verdict::Summable
    } else {
        Verdict::Undecided
    };
    Ok(SummabilityReport {
        point: orb.start,
        boundedness: orb.boundedness,
        series1_partial: s1.partial,
        series1_tail: s1.tail,
        series2_partial,
        series2_tail,
        verdict,
        ratio_trace,
        terms_used: orb.derivs.len(),
        cycle_multiplier,
    })
}

/// Classify the point `a` through the orbit of `f(a)`.
pub fn classify(map: &EntireMap, a: Complex64, n_max: usize, tol: f64) -> Result<SummabilityReport> {
    let d = map.f(a)?;
    classify_value(map, d, n_max, tol)
}

/// Classify with the orbit started at `d` itself, typically a critical value.
pub fn classify_value(map: &EntireMap, d: Complex64, n_max: usize, tol: f64) -> Result<SummabilityReport> {
    let orb = orbit(map, d, n_max, ESCAPE_RADIUS);
    report_from_orbit(&orb, map, tol)
}

/// Classify every critical-value class of `cd`.
pub fn classify_classes(cd: &CriticalData, n_max: usize, tol: f64) -> Vec<Result<SummabilityReport>> {
    cd.class_values()
        .par_iter()
        .map(|&d| classify_value(cd.map(), d, n_max, tol))
        .collect()
}

/// CSV header for [`csv_row`].
pub const CSV_HEADER: &str = "param_re,param_im,point_re,point_im,verdict,series1,boundedness";

/// One batch row: parameters, verdict, series-1 partial sum, boundedness.
pub fn csv_row(param: Complex64, report: &SummabilityReport) -> String {
    format!(
        "{:e},{:e},{:e},{:e},{},{:e},{:?}",
        param.re,
        param.im,
        report.point.re,
        report.point.im,
        report.verdict.as_str(),
        report.series1_partial,
        report.boundedness
    )
}

/// Finitely checkable surrogates for the hypotheses on the orbit closure
/// `X_a`. Plane separation, measure and Fatou-boundary conditions are not
/// decided here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationDiagnostics {
    #[serde(with = "crate::serde_complex")]
    pub point: Complex64,
    pub boundedness: Boundedness,
    /// Number of points of a finite (eventually periodic) orbit closure.
    pub finite_closure: Option<usize>,
    pub orbit_points: usize,
    /// `[re_min, re_max, im_min, im_max]` of the stored orbit.
    pub bounding_box: [f64; 4],
    /// Minimum distance from sampled preimages of `f(a)` to the stored orbit
    /// of `f(a)`; `None` when the branch solver does not apply.
    pub preimage_distance: Option<f64>,
    pub preimages_sampled: usize,
    pub summary: String,
}

pub const PREIMAGE_WINDOW: i64 = 8;

pub fn separation_diagnostics(map: &EntireMap, a: Complex64, n_max: usize) -> Result<SeparationDiagnostics> {
    let d = map.f(a)?;
    let orb = orbit(map, d, n_max, ESCAPE_RADIUS);
    let pts = match orb.cycle {
        Some(c) => &orb.points[..(c.preperiod + c.period).min(orb.points.len())],
        None => &orb.points[..],
    };
    let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in pts {
        bbox[0] = bbox[0].min(p.re);
        bbox[1] = bbox[1].max(p.re);
        bbox[2] = bbox[2].min(p.im);
        bbox[3] = bbox[3].max(p.im);
    }
    let (preimage_distance, preimages_sampled) = match preimages(map, d, BranchWindow::new(PREIMAGE_WINDOW)?) {
        Ok(pre) => {
            let dist = pre
                .iter()
                .flat_map(|(_, y)| pts.iter().map(move |p| (y - p).norm()))
                .fold(f64::INFINITY, f64::min);
            (Some(dist), pre.len())
        }
        Err(_) => (None, 0),
    };
    let finite_closure = orb.cycle.map(|c| c.preperiod + c.period);
    let mut summary = match (finite_closure, orb.boundedness) {
        (Some(k), _) => format!("finite orbit closure, {k} points"),
        (None, Boundedness::Unbounded) => "unbounded orbit".to_string(),
        (None, _) => format!("no recurrence detected in {} points", pts.len()),
    };
    if let Some(dist) = preimage_distance {
        summary.push_str(&format!("; preimage distance {dist:.3e} over {preimages_sampled} preimages"));
    }
    Ok(SeparationDiagnostics {
        point: d,
        boundedness: orb.boundedness,
        finite_closure,
        orbit_points: pts.len(),
        bounding_box: bbox,
        preimage_distance,
        preimages_sampled,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn attracting_orbit_not_summable() {
        // 1 + 0.5 sin z has an attracting fixed point near 1.5.
        let f = EntireMap::sine_family(c(1.0, 0.0), c(0.5, 0.0)).unwrap();
        let r = classify_value(&f, c(0.3, 0.1), 400, 1e-12).unwrap();
        assert_eq!(r.verdict, Verdict::NotSummable);
    }

    #[test]
    fn short_orbit_undecided() {
        let f = EntireMap::sine_family(c(0.0, 0.0), c(3.0, 0.0)).unwrap();
        let r = classify_value(&f, c(0.7, 0.2), 3, 1e-12).unwrap();
        assert_eq!(r.verdict, Verdict::Undecided);
        assert_eq!(r.ratio_trace.len(), r.terms_used - 1);
    }

    #[test]
    fn series1_non_decreasing() {
        let f = EntireMap::sine_family(c(0.0, 0.0), c(3.0, 0.0)).unwrap();
        let mut prev = 0.0;
        for n in 1..30 {
            let r = classify_value(&f, c(0.7, 0.2), n, 1e-12).unwrap();
            assert!(r.series1_partial >= prev);
            prev = r.series1_partial;
        }
    }

    #[test]
    fn escaping_orbit_reported_unbounded() {
        let f = EntireMap::new(
            crate::poly::Poly::new(vec![c(0.0, 0.0), c(2.0, 0.0)]),
            crate::poly::Poly::new(vec![c(0.0, 0.0), c(0.1, 0.0)]),
            crate::poly::Poly::z(),
        )
        .unwrap();
        let r = classify_value(&f, c(10.0, 0.0), 200, 1e-12).unwrap();
        assert_eq!(r.boundedness, Boundedness::Unbounded);
        assert!(r.series2_partial.is_some());
        let d = separation_diagnostics(&f, c(10.0, 0.0), 200).unwrap();
        assert_eq!(d.boundedness, Boundedness::Unbounded);
    }

    #[test]
    fn csv_row_has_all_columns() {
        let f = EntireMap::sine_family(c(1.0, 0.0), c(0.5, 0.0)).unwrap();
        let r = classify_value(&f, c(0.3, 0.1), 100, 1e-12).unwrap();
        let row = csv_row(c(0.0, 0.5), &r);
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
    }
}
