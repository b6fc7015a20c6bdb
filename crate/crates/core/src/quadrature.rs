//! L1 norms of γ combinations over the whole plane.
//!
//! The plane is split by a `C³` partition of unity: a polar patch around
//! each pole (where `ρ|φ|` is bounded), a polar grid about the origin for the
//! remaining mid-field, and the exterior `|z| > far_radius` mapped to
//! `s = far_radius/|z| ∈ (0, 1]`. Gauss–Legendre panels in the radial
//! direction, trapezoid in angle. The error bound is the change against a
//! half-resolution pass plus a rounding floor.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaCombination;
use crate::gauss::Rule;
use crate::sum::Neumaier;

const GL_NODES: usize = 8;
const T0: f64 = 0.25;
const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Radius of the polar patch around each pole.
    pub pole_radius: f64,
    /// Start of the mapped exterior region.
    pub far_radius: f64,
    /// Radial Gauss–Legendre panels per pole patch; the patch uses
    /// `16·cells_per_patch` angles.
    pub cells_per_patch: usize,
    /// Angular nodes of the mid-field grid; radial spacing follows the arc
    /// spacing at the outermost pole.
    pub mid_grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Estimate {
    pub value: f64,
    pub error_bound: f64,
}

fn min_pair_distance(poles: &[Complex64]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            m = m.min((poles[i] - poles[j]).norm());
        }
    }
    m
}

fn max_modulus(poles: &[Complex64]) -> f64 {
    poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
}

impl QuadratureConfig {
    /// Default resolution adapted to a pole set.
    pub fn fitted(poles: &[Complex64]) -> Self {
        let dmin = min_pair_distance(poles);
        let pole_radius = if dmin.is_finite() { (0.4 * dmin).min(0.5) } else { 0.5 };
        let outer = max_modulus(poles) + pole_radius;
        let far_radius = (2.5 * max_modulus(poles)).max(outer + 2.0).max(8.0);
        let want = 2.0 * PI * outer * 16.0 / pole_radius;
        let mid_grid = ((want / 64.0).ceil() as usize * 64).clamp(256, 16384);
        Self {
            pole_radius,
            far_radius,
            cells_per_patch: 8,
            mid_grid,
        }
    }

    pub fn for_combination(phi: &GammaCombination) -> Self {
        Self::fitted(&phi.poles())
    }

    /// Both resolution knobs multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            cells_per_patch: self.cells_per_patch * factor,
            mid_grid: self.mid_grid * factor,
            ..*self
        }
    }

    pub fn validate(&self, poles: &[Complex64]) -> Result<()> {
        if !(self.pole_radius > 0.0) || self.cells_per_patch < 2 || self.mid_grid < 16 {
            return Err(Error::Config(format!("invalid quadrature resolution {self:?}")));
        }
        let dmin = min_pair_distance(poles);
        if self.pole_radius >= dmin / 2.0 {
            return Err(Error::Config(format!(
                "pole patches overlap: radius {} ≥ half the minimum pole distance {}",
                self.pole_radius, dmin
            )));
        }
        let pmax = max_modulus(poles);
        if self.far_radius <= 2.0 * pmax || self.far_radius <= pmax + self.pole_radius {
            return Err(Error::Config(format!(
                "far radius {} must exceed twice the largest pole modulus {}",
                self.far_radius, pmax
            )));
        }
        Ok(())
    }
}

/// `C³` cutoff: 1 on `[0, T0]`, 0 on `[1, ∞)`.
fn cutoff(t: f64) -> f64 {
    if t <= T0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let u = (t - T0) / (1.0 - T0);
    1.0 - u * u * u * u * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u * u * u)
}

/// The plane integrand and its singular points.
struct Integrand<'a, F: Fn(Complex64) -> f64 + Sync> {
    f: &'a F,
    poles: &'a [Complex64],
    r: f64,
}

impl<F: Fn(Complex64) -> f64 + Sync> Integrand<'_, F> {
    fn patch_weight(&self, z: Complex64) -> f64 {
        self.poles.iter().map(|p| cutoff((z - p).norm() / self.r)).sum()
    }

    fn patch(&self, p: Complex64, cells: usize, rule: &Rule) -> f64 {
        let n_theta = 16 * cells;
        let h = self.r / cells as f64;
        let rows: Vec<f64> = (0..cells)
            .into_par_iter()
            .map(|j| {
                let mut acc = Neumaier::new();
                for (rho, w) in rule.on(j as f64 * h, (j + 1) as f64 * h) {
                    let psi = cutoff(rho / self.r);
                    if psi == 0.0 {
                        continue;
                    }
                    let mut ring = Neumaier::new();
                    for k in 0..n_theta {
                        let t = 2.0 * PI * (k as f64 + 0.5) / n_theta as f64;
                        ring.add((self.f)(p + Complex64::from_polar(rho, t)));
                    }
                    acc.add(w * psi * rho * ring.value() * 2.0 * PI / n_theta as f64);
                }
                acc.value()
            })
            .collect();
        let mut acc = Neumaier::new();
        for v in rows {
            acc.add(v);
        }
        acc.value()
    }

    /// Radial panel edges on `[0, far]`: uniform to `inner`, geometric after.
    fn mid_edges(inner: f64, far: f64, spacing: f64) -> Vec<f64> {
        let width = GL_NODES as f64 * spacing;
        let n_in = (inner / width).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..=n_in).map(|j| inner * j as f64 / n_in as f64).collect();
        let q = 1.0 + width / inner;
        let mut r = inner;
        while r < far {
            r = (r * q).min(far);
            edges.push(r);
        }
        edges
    }

    fn mid_field(&self, inner: f64, far: f64, n_theta: usize, rule: &Rule) -> f64 {
        let spacing = 2.0 * PI * inner / n_theta as f64;
        let edges = Self::mid_edges(inner, far, spacing);
        let rows: Vec<f64> = edges
            .par_windows(2)
            .map(|e| {
                let mut acc = Neumaier::new();
                for (rho, w) in rule.on(e[0], e[1]) {
                    let mut ring = Neumaier::new();
                    for k in 0..n_theta {
                        let t = 2.0 * PI * (k as f64 + 0.5) / n_theta as f64;
                        let z = Complex64::from_polar(rho, t);
                        let keep = 1.0 - self.patch_weight(z);
                        if keep > 0.0 {
                            ring.add(keep * (self.f)(z));
                        }
                    }
                    acc.add(w * rho * ring.value() * 2.0 * PI / n_theta as f64);
                }
                acc.value()
            })
            .collect();
        let mut acc = Neumaier::new();
        for v in rows {
            acc.add(v);
        }
        acc.value()
    }

    /// `∫_{|z|>R} = ∫₀¹ ds ∫ dθ |φ(R e^{iθ}/s)| R²/s³`.
    fn exterior(&self, far: f64, panels: usize, n_theta: usize, rule: &Rule) -> f64 {
        let mut acc = Neumaier::new();
        for j in 0..panels {
            for (s, w) in rule.on(j as f64 / panels as f64, (j + 1) as f64 / panels as f64) {
                let mut ring = Neumaier::new();
                for k in 0..n_theta {
                    let t = 2.0 * PI * (k as f64 + 0.5) / n_theta as f64;
                    ring.add((self.f)(Complex64::from_polar(far / s, t)));
                }
                acc.add(w * far * far / (s * s * s) * ring.value() * 2.0 * PI / n_theta as f64);
            }
        }
        acc.value()
    }
}

/// Quadrature of a non-negative integrand `f` whose singularities are at most
/// `C/|z − p|` at the listed poles and which decays like `|z|⁻³`.
pub fn plane_integral(
    f: &(impl Fn(Complex64) -> f64 + Sync),
    poles: &[Complex64],
    cfg: &QuadratureConfig,
) -> Result<L1Estimate> {
    cfg.validate(poles)?;
    let rule = Rule::new(GL_NODES);
    let integrand = Integrand {
        f,
        poles,
        r: cfg.pole_radius,
    };
    let inner = max_modulus(poles) + cfg.pole_radius;
    let pass = |cells: usize, grid: usize| -> (f64, f64) {
        let mut acc = Neumaier::new();
        for &p in poles {
            acc.add(integrand.patch(p, cells, &rule));
        }
        acc.add(integrand.mid_field(inner, cfg.far_radius, grid, &rule));
        let ext = integrand.exterior(cfg.far_radius, (cells / 2).max(2), (grid / 8).max(64), &rule);
        (acc.value(), ext)
    };
    let (near_f, ext_f) = pass(cfg.cells_per_patch, cfg.mid_grid);
    let (near_c, ext_c) = pass((cfg.cells_per_patch / 2).max(1), (cfg.mid_grid / 2).max(8));
    let value = near_f + ext_f;
    let error_bound = (near_f - near_c).abs() + (ext_f - ext_c).abs() + ROUNDING_FLOOR * value.abs();
    Ok(L1Estimate { value, error_bound })
}

/// `∬ |φ| dm` over the plane.
pub fn l1_norm(phi: &GammaCombination, cfg: &QuadratureConfig) -> Result<L1Estimate> {
    if phi.is_empty() {
        return Ok(L1Estimate {
            value: 0.0,
            error_bound: 0.0,
        });
    }
    let f = |z: Complex64| phi.eval_unchecked(z).norm();
    plane_integral(&f, &phi.poles(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cutoff_is_a_partition_step() {
        assert_eq!(cutoff(0.2), 1.0);
        assert_eq!(cutoff(1.2), 0.0);
        assert!((cutoff(0.5 * (T0 + 1.0)) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = cutoff(T0 + 0.01 * (1.0 - T0) * k as f64);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn gaussian_bump_integral() {
        // ∬ e^{-|z|²} = π, with a fictitious pole set to exercise the patches.
        let poles = [c(0.0, 0.0), c(1.0, 0.0)];
        let cfg = QuadratureConfig::fitted(&poles);
        let f = |z: Complex64| (-z.norm_sqr()).exp();
        let est = plane_integral(&f, &poles, &cfg).unwrap();
        let err = (est.value - PI).abs();
        assert!(err < 1e-6 * PI && err <= est.error_bound, "{est:?}");
    }

    #[test]
    fn cubic_decay_exterior_is_exact() {
        // 1/(1+|z|²)² integrates to π and decays like |z|⁻⁴.
        let poles = [c(0.0, 0.0), c(1.0, 0.0)];
        let cfg = QuadratureConfig::fitted(&poles);
        let f = |z: Complex64| 1.0 / (1.0 + z.norm_sqr()).powi(2);
        let est = plane_integral(&f, &poles, &cfg).unwrap();
        let err = (est.value - PI).abs();
        assert!(err < 1e-6 * PI && err <= est.error_bound, "{est:?}");
    }

    #[test]
    fn singular_integrand_near_exact() {
        // ∬ e^{-|z|²}/|z| = π^{3/2}.
        let poles = [c(0.0, 0.0), c(1.0, 0.0)];
        let cfg = QuadratureConfig::fitted(&poles);
        let f = |z: Complex64| (-z.norm_sqr()).exp() / z.norm();
        let est = plane_integral(&f, &poles, &cfg).unwrap();
        let err = (est.value - PI.powf(1.5)).abs();
        assert!(err < 1e-6 * PI.powf(1.5) && err <= est.error_bound, "{est:?}");
    }

    #[test]
    fn overlapping_patches_rejected() {
        let phi = GammaCombination::single(c(2.0, 0.0)).unwrap();
        let mut cfg = QuadratureConfig::for_combination(&phi);
        cfg.pole_radius = 0.6;
        assert!(matches!(l1_norm(&phi, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn empty_combination_is_zero() {
        let cfg = QuadratureConfig::fitted(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let est = l1_norm(&GammaCombination::new(), &cfg).unwrap();
        assert_eq!((est.value, est.error_bound), (0.0, 0.0));
    }

    #[test]
    fn homogeneous_and_refinement_consistent() {
        let a = c(2.0, 1.0);
        let phi = GammaCombination::single(a).unwrap();
        let cfg = QuadratureConfig::for_combination(&phi);
        let one = l1_norm(&phi, &cfg).unwrap();
        let two = l1_norm(&phi.scaled(c(2.0, 0.0)), &cfg).unwrap();
        assert!((two.value - 2.0 * one.value).abs() <= two.error_bound + 2.0 * one.error_bound);
        let fine = l1_norm(&phi, &cfg.refined(2)).unwrap();
        assert!((fine.value - one.value).abs() < one.error_bound, "{one:?} {fine:?}");
    }
}
