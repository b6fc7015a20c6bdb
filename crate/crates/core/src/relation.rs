//! The critical-value relation `F(d₁)(1 − Ψ₁) = Σ_{i≥2} F(d_i) Ψ_i` with
//! `Ψ_i = Σ_{f(c_k) = d_i} b_k A(1, d₁, c_k)`, and the operator identities
//! that `φ = A(1, d₁, ·)` satisfies.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::CriticalData;
use crate::error::{Error, Result};
use crate::gamma::{gamma_unchecked, GammaCombination};
use crate::map::EntireMap;
use crate::orbit::orbit;
use crate::ruelle::{apply_direct_combo, BranchWindow};
use crate::series::{class_coupling, ESCAPE_RADIUS};
use crate::sum::{ComplexNeumaier, Neumaier};
use crate::summability::{classify_value, Verdict};

/// Default absolute tolerance on Ψ values.
pub const TRIVIAL_TOL: f64 = 1e-6;
/// A deviation is established when it exceeds this multiple of its tail.
pub const MARGIN: f64 = 3.0;
/// Samples closer than this to a pole are rejected.
pub const SAMPLE_POLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiEntry {
    /// Index into the critical-value classes of the critical data.
    pub class: usize,
    #[serde(with = "crate::serde_complex")]
    pub value: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub psi: Complex64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    #[serde(with = "crate::serde_complex")]
    pub d1: Complex64,
    /// `psi[0]` is the class of `d1`; the rest follow class order.
    pub psi: Vec<PsiEntry>,
    pub trivial: bool,
    pub instability_evidence: bool,
    pub tol: f64,
    pub n_used: usize,
    pub converged: bool,
}

impl RelationReport {
    /// Deviation from the trivial relation per entry: `|Ψ₁ − 1|`, `|Ψ_i|`.
    pub fn deviations(&self) -> Vec<f64> {
        self.psi
            .iter()
            .enumerate()
            .map(|(j, e)| if j == 0 { (e.psi - 1.0).norm() } else { e.psi.norm() })
            .collect()
    }

    fn with_psi(d1: Complex64, psi: Vec<PsiEntry>, tol: f64, n_used: usize, converged: bool) -> Self {
        let mut r = Self {
            d1,
            psi,
            trivial: false,
            instability_evidence: false,
            tol,
            n_used,
            converged,
        };
        r.trivial = r.deviations().iter().all(|d| *d <= tol);
        r.instability_evidence = !r.trivial;
        r
    }

    /// Report from explicit Ψ entries, `entries[0]` being the class of `d1`.
    pub fn from_entries(d1: Complex64, entries: Vec<PsiEntry>, tol: f64) -> Self {
        Self::with_psi(d1, entries, tol, 0, true)
    }

    pub fn psi_values(&self) -> Vec<Complex64> {
        self.psi.iter().map(|e| e.psi).collect()
    }
}

fn require_summable(map: &EntireMap, d: Complex64, n_max: usize, tol: f64) -> Result<()> {
    let r = classify_value(map, d, n_max, tol)?;
    if r.verdict == Verdict::Summable {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{d} is not classified summable ({})", r.verdict.as_str())))
    }
}

fn d1_class(cd: &CriticalData, d1: Complex64) -> Result<usize> {
    cd.class_index(d1)
        .ok_or_else(|| Error::Precondition(format!("{d1} is not a critical value of the data")))
}

/// Ψ coefficients for the summable critical value `d1`.
pub fn psi_coefficients(cd: &CriticalData, d1: Complex64, n_max: usize, tol: f64) -> Result<RelationReport> {
    let map = cd.map();
    if !map.fixes_zero_and_one() {
        return Err(Error::Precondition("the relation needs f(0) = 0 and f(1) = 1".into()));
    }
    let i1 = d1_class(cd, d1)?;
    require_summable(map, d1, n_max, series_tol(tol))?;
    let cc = class_coupling(cd, Complex64::new(1.0, 0.0), d1, n_max, series_tol(tol))?;
    let values = cd.class_values();
    let order = std::iter::once(i1).chain((0..values.len()).filter(|&i| i != i1));
    let psi = order
        .map(|i| PsiEntry {
            class: i,
            value: values[i],
            psi: cc.values[i],
            tail: cc.tails[i],
        })
        .collect();
    Ok(RelationReport::with_psi(d1, psi, tol, cc.n_used, cc.converged))
}

/// Series are summed two orders below the relation tolerance.
fn series_tol(tol: f64) -> f64 {
    (tol * 1e-2).max(1e-15)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstabilityVerdict {
    Yes,
    NoEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: InstabilityVerdict,
    /// Per Ψ entry: deviation established beyond the margin.
    pub established: Vec<bool>,
    pub message: String,
}

/// Evidence of a non-trivial relation. Never asserts stability.
pub fn instability_verdict(report: &RelationReport) -> VerdictRecord {
    let dev = report.deviations();
    let established: Vec<bool> = dev
        .iter()
        .zip(&report.psi)
        .map(|(d, e)| *d > report.tol && *d > MARGIN * e.tail)
        .collect();
    let (verdict, message) = if established.iter().any(|b| *b) {
        (InstabilityVerdict::Yes, "instability evidence: yes".to_string())
    } else if dev.iter().all(|d| *d <= report.tol) {
        (
            InstabilityVerdict::NoEvidence,
            "no evidence: the relation is trivial to tolerance (this is not a stability proof)".to_string(),
        )
    } else {
        (
            InstabilityVerdict::Inconclusive,
            "inconclusive: deviations do not clear their tail bounds".to_string(),
        )
    };
    VerdictRecord {
        verdict,
        established,
        message,
    }
}

/// The orbit sum `A_N(1, d1, ·) = Σ_{n≤N} γ_{fⁿ(d1)}/(fⁿ)'(d1)` as a
/// combination.
pub fn truncated_a(map: &EntireMap, d1: Complex64, n: usize) -> Result<GammaCombination> {
    let orb = orbit(map, d1, n, ESCAPE_RADIUS);
    orb.check_degeneracy(n)?;
    if orb.len() < n {
        return Err(Error::Precondition(format!("orbit of {d1} stops after {} steps", orb.len())));
    }
    let mut out = GammaCombination::new();
    for k in 0..=n {
        out.push(orb.points[k], 1.0 / orb.derivs[k])?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub max_residual: f64,
    pub residuals: Vec<f64>,
    #[serde(with = "crate::serde_complex::vec")]
    pub rejected: Vec<Complex64>,
    pub n_terms: usize,
    /// Largest branch-sum tail estimate over the accepted samples.
    pub direct_tail: f64,
}

/// `R(z) = f*[A_N](z) − A_{N+1}(z) + γ_{d₁}(z) − Σ_i Ψ_i γ_{d_i}(z)`, with
/// `f*` summed over explicit inverse branches and `Ψ` taken from `report`.
pub fn defect_identity(
    cd: &CriticalData,
    report: &RelationReport,
    samples: &[Complex64],
    n_terms: usize,
    win: BranchWindow,
) -> Result<DefectReport> {
    let map = cd.map();
    let d1 = report.d1;
    let a_n = truncated_a(map, d1, n_terms)?;
    let a_next = truncated_a(map, d1, n_terms + 1)?;
    let mut poles: Vec<Complex64> = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    poles.extend(a_next.poles());
    poles.extend(report.psi.iter().map(|e| e.value));
    let results: Vec<Option<(f64, f64)>> = samples
        .par_iter()
        .map(|&z| -> Result<Option<(f64, f64)>> {
            if poles.iter().any(|p| (z - p).norm() < SAMPLE_POLE_TOL) {
                return Ok(None);
            }
            let direct = match apply_direct_combo(map, &a_n, z, win) {
                Ok(d) => d,
                Err(Error::NearCriticalValue { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut acc = ComplexNeumaier::new();
            acc.add(direct.value);
            acc.add(-a_next.eval_unchecked(z));
            acc.add(gamma_unchecked(d1, z));
            for e in &report.psi {
                acc.add(-e.psi * gamma_unchecked(e.value, z));
            }
            Ok(Some((acc.value().norm(), direct.tail_estimate)))
        })
        .collect::<Result<_>>()?;
    let mut residuals = Vec::new();
    let mut rejected = Vec::new();
    let mut direct_tail: f64 = 0.0;
    for (z, r) in samples.iter().zip(results) {
        match r {
            Some((res, tail)) => {
                residuals.push(res);
                direct_tail = direct_tail.max(tail);
            }
            None => rejected.push(*z),
        }
    }
    Ok(DefectReport {
        max_residual: residuals.iter().cloned().fold(0.0, f64::max),
        residuals,
        rejected,
        n_terms,
        direct_tail,
    })
}

/// Orbit points `xᵢ = fⁱ(d₁)` and weights `wᵢ = 1/(fⁱ)'(d₁)`, summed until the
/// geometric tail of `|wᵢ|(1 + |xᵢ|)` falls below `tol` three times running.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitWeights {
    pub weights: Vec<(Complex64, Complex64)>,
    pub tail: f64,
}

pub fn orbit_weights(map: &EntireMap, d1: Complex64, n_max: usize, tol: f64) -> Result<OrbitWeights> {
    let orb = orbit(map, d1, n_max, ESCAPE_RADIUS);
    let mut weights: Vec<(Complex64, Complex64)> = Vec::new();
    let mut mags = Vec::new();
    let mut hits = 0;
    let mut tail = f64::INFINITY;
    for (x, d) in orb.points.iter().zip(&orb.derivs) {
        orb.check_degeneracy(weights.len())?;
        let w = 1.0 / d;
        weights.push((*x, w));
        mags.push(w.norm() * (1.0 + x.norm()));
        tail = crate::series::geometric_tail(&mags);
        if tail < tol {
            hits += 1;
            if hits >= crate::series::CONFIRMATIONS {
                break;
            }
        } else {
            hits = 0;
        }
    }
    Ok(OrbitWeights { weights, tail })
}

/// `φ = A(1, d₁, ·)` as a γ combination, with the tail of the dropped terms.
pub fn phi_combination(map: &EntireMap, d1: Complex64, n_max: usize, tol: f64) -> Result<(GammaCombination, f64)> {
    let ow = orbit_weights(map, d1, n_max, tol)?;
    let mut out = GammaCombination::new();
    for (x, w) in &ow.weights {
        out.push(*x, *w)?;
    }
    Ok((out, ow.tail))
}

/// `g(z) = yz/(z + y − 1)`, a Möbius map fixing 0 and 1.
pub fn mobius_g(y: Complex64, z: Complex64) -> Complex64 {
    y * z / (z + y - 1.0)
}

pub fn mobius_g_prime(y: Complex64, z: Complex64) -> Complex64 {
    let d = z + y - 1.0;
    y * (y - 1.0) / (d * d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    #[serde(with = "crate::serde_complex")]
    pub y: Complex64,
    pub max_residual: f64,
    /// `max |φ(z)|` over accepted samples.
    pub scale: f64,
    #[serde(with = "crate::serde_complex")]
    pub c1: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub c2: Complex64,
    /// Tail of the three orbit series summed into `φ`, `C₁`, `C₂`.
    pub tail: f64,
    #[serde(with = "crate::serde_complex::vec")]
    pub rejected: Vec<Complex64>,
    pub n_used: usize,
}

/// Transport `φ = A(1, d₁, ·)` through `g`: with
/// `C₁ = Σ (xᵢ − 1)wᵢ`, `C₂ = Σ xᵢwᵢ`, `xᵢ = fⁱ(d₁)`, `wᵢ = 1/(fⁱ)'(d₁)`,
/// `G(w) = C₁/w − C₂/(w − 1) + Σ wᵢ/(w − g(xᵢ))` satisfies
/// `G(g(z))g'(z) = φ(z)`. Returns the largest residual over `samples`.
pub fn mobius_transport(
    map: &EntireMap,
    d1: Complex64,
    y: Complex64,
    samples: &[Complex64],
    n_max: usize,
    tol: f64,
) -> Result<TransportReport> {
    if (y - 1.0).norm() < 1e-9 || y.norm() < 1e-9 {
        return Err(Error::Precondition(format!("g is degenerate for y = {y}")));
    }
    require_summable(map, d1, n_max, tol)?;
    let orb = orbit(map, d1, n_max, ESCAPE_RADIUS);
    let closure = match orb.cycle {
        Some(c) => &orb.points[..(c.preperiod + c.period).min(orb.points.len())],
        None => &orb.points[..],
    };
    let one_minus_y = Complex64::new(1.0, 0.0) - y;
    if closure.iter().any(|x| (x - one_minus_y).norm() < 1e-6) {
        return Err(Error::Precondition(format!("1 − y = {one_minus_y} meets the orbit of {d1}")));
    }
    let OrbitWeights { weights, tail } = orbit_weights(map, d1, n_max, tol)?;
    let mut c1 = ComplexNeumaier::new();
    let mut c2 = ComplexNeumaier::new();
    for (x, w) in &weights {
        c1.add((x - 1.0) * w);
        c2.add(x * w);
    }
    let (c1, c2) = (c1.value(), c2.value());
    let images: Vec<(Complex64, Complex64)> = weights.iter().map(|(x, w)| (mobius_g(y, *x), *w)).collect();
    let g_big = |w: Complex64| -> Complex64 {
        let mut acc = ComplexNeumaier::new();
        acc.add(c1 / w);
        acc.add(-c2 / (w - 1.0));
        for (gx, wi) in &images {
            acc.add(wi / (w - gx));
        }
        acc.value()
    };
    let phi = |z: Complex64| -> Complex64 {
        let mut acc = ComplexNeumaier::new();
        for (x, w) in &weights {
            acc.add(w * gamma_unchecked(*x, z));
        }
        acc.value()
    };
    let mut rejected = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &z in samples {
        let near_pole = z.norm() < SAMPLE_POLE_TOL
            || (z - 1.0).norm() < SAMPLE_POLE_TOL
            || (z + y - 1.0).norm() < SAMPLE_POLE_TOL
            || weights.iter().any(|(x, _)| (z - x).norm() < SAMPLE_POLE_TOL);
        if near_pole {
            rejected.push(z);
            continue;
        }
        let lhs = g_big(mobius_g(y, z)) * mobius_g_prime(y, z);
        let rhs = phi(z);
        max_residual = max_residual.max((lhs - rhs).norm());
        scale = scale.max(rhs.norm());
    }
    Ok(TransportReport {
        y,
        max_residual,
        scale,
        c1,
        c2,
        tail,
        rejected,
        n_used: weights.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    #[serde(with = "crate::serde_complex::vec")]
    pub values: Vec<Complex64>,
    /// Row `j`: `1 − Ψ_jj` on the diagonal, `−Ψ_ji` off it, where `Ψ_ji` is
    /// the coupling of class `i` seen from base `d_j`.
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub full_rank: bool,
    /// Largest series tail among the entries.
    pub tail: f64,
}

/// Relative singular-value threshold for the numerical rank.
pub const RANK_TOL: f64 = 1e-9;

/// Singular values (descending) and numerical rank of `m`.
pub fn numerical_rank(m: &DMatrix<Complex64>, abs_floor: f64) -> (Vec<f64>, usize) {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    let cut = (top * RANK_TOL * sv.len() as f64).max(abs_floor);
    let rank = sv.iter().filter(|s| **s > cut).count();
    (sv, rank)
}

/// The homogeneous system satisfied by the values `F(d_j)` over the listed
/// summable critical values; full rank forces them to vanish.
pub fn theorem_b_system(cd: &CriticalData, values: &[Complex64], n_max: usize, tol: f64) -> Result<RankReport> {
    let map = cd.map();
    let classes: Vec<usize> = values.iter().map(|&d| d1_class(cd, d)).collect::<Result<_>>()?;
    for &d in values {
        require_summable(map, d, n_max, series_tol(tol))?;
    }
    let rows: Vec<_> = values
        .par_iter()
        .map(|&d| class_coupling(cd, Complex64::new(1.0, 0.0), d, n_max, series_tol(tol)))
        .collect::<Result<_>>()?;
    let m = values.len();
    let mut mat = DMatrix::<Complex64>::zeros(m, m);
    let mut tail: f64 = 0.0;
    for j in 0..m {
        for (col, &i) in classes.iter().enumerate() {
            let psi = rows[j].values[i];
            mat[(j, col)] = if col == j { 1.0 - psi } else { -psi };
        }
        tail = tail.max(rows[j].tails[0]);
    }
    let (singular_values, rank) = numerical_rank(&mat, MARGIN * tail);
    Ok(RankReport {
        values: values.to_vec(),
        matrix: (0..m)
            .map(|j| (0..m).map(|i| [mat[(j, i)].re, mat[(j, i)].im]).collect())
            .collect(),
        singular_values,
        rank,
        full_rank: rank == m,
        tail,
    })
}

/// Sum of `|Ψ|` deviations for diagnostics in sweeps.
pub fn csv_row(param: Complex64, report: &RelationReport) -> String {
    let mut acc = Neumaier::new();
    for d in report.deviations() {
        acc.add(d);
    }
    let v = instability_verdict(report);
    format!(
        "{:e},{:e},{},{},{:e}",
        param.re,
        param.im,
        report.trivial,
        match v.verdict {
            InstabilityVerdict::Yes => "yes",
            InstabilityVerdict::NoEvidence => "no_evidence",
            InstabilityVerdict::Inconclusive => "inconclusive",
        },
        acc.value()
    )
}

pub const CSV_HEADER: &str = "param_re,param_im,trivial,instability,total_deviation";

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn entry(class: usize, psi: Complex64, tail: f64) -> PsiEntry {
        PsiEntry {
            class,
            value: c(2.0 + class as f64, 1.0),
            psi,
            tail,
        }
    }

    #[test]
    fn margin_rule() {
        let yes = RelationReport::from_entries(c(2.0, 1.0), vec![entry(0, c(1.0, 0.0), 1e-9), entry(1, c(0.1, 0.0), 1e-3)], TRIVIAL_TOL);
        assert_eq!(instability_verdict(&yes).verdict, InstabilityVerdict::Yes);
        let unsure = RelationReport::from_entries(c(2.0, 1.0), vec![entry(0, c(1.0, 0.0), 1e-9), entry(1, c(1e-3, 0.0), 1e-2)], TRIVIAL_TOL);
        assert_eq!(instability_verdict(&unsure).verdict, InstabilityVerdict::Inconclusive);
        let trivial = RelationReport::from_entries(c(2.0, 1.0), vec![entry(0, c(1.0, 0.0), 1e-9), entry(1, c(0.0, 0.0), 1e-9)], TRIVIAL_TOL);
        assert!(trivial.trivial);
        assert_eq!(instability_verdict(&trivial).verdict, InstabilityVerdict::NoEvidence);
    }

    #[test]
    fn mobius_fixes_zero_and_one() {
        let y = c(2.0, 1.0);
        assert_eq!(mobius_g(y, c(0.0, 0.0)), c(0.0, 0.0));
        assert!((mobius_g(y, c(1.0, 0.0)) - 1.0).norm() < 1e-15);
        let z = c(0.3, -0.4);
        let h = 1e-6;
        let fd = (mobius_g(y, z + h) - mobius_g(y, z - h)) / (2.0 * h);
        assert!((fd - mobius_g_prime(y, z)).norm() < 1e-8);
    }

    #[test]
    fn rank_of_zero_row_matrix() {
        let mut m = DMatrix::<Complex64>::identity(3, 3);
        m[(1, 1)] = c(0.0, 0.0);
        let (sv, rank) = numerical_rank(&m, 0.0);
        assert_eq!(rank, 2);
        assert_eq!(sv.len(), 3);
    }
}
