//! The kernels `γ_a(z) = a(a−1)/(z(z−1)(z−a))` and their finite combinations.
//!
//! `γ_a = (a−1)/z − a/(z−1) + 1/(z−a)`: residues `a−1`, `−a`, `1` sum to zero
//! and `γ_a(z) = a(a−1)/z³ + O(|z|⁻⁴)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Pole, Result};
use crate::map::EntireMap;
use crate::sum::ComplexNeumaier;

pub const BASE_TOL: f64 = 1e-9;
pub const POLE_TOL: f64 = 1e-12;

/// `γ_a(z)` without pole checks.
#[inline]
pub fn gamma_unchecked(a: Complex64, z: Complex64) -> Complex64 {
    a * (a - 1.0) / (z * (z - 1.0) * (z - a))
}

pub fn gamma_eval(a: Complex64, z: Complex64) -> Result<Complex64> {
    if a.norm() <= BASE_TOL || (a - 1.0).norm() <= BASE_TOL {
        return Err(Error::InvalidBase(a));
    }
    let pole = if z.norm() <= POLE_TOL {
        Some(Pole::Zero)
    } else if (z - 1.0).norm() <= POLE_TOL {
        Some(Pole::One)
    } else if (z - a).norm() <= POLE_TOL {
        Some(Pole::Base)
    } else {
        None
    };
    match pole {
        Some(pole) => Err(Error::PoleEvaluation { pole, a, z }),
        None => Ok(gamma_unchecked(a, z)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTerm {
    #[serde(with = "crate::serde_complex")]
    pub a: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub w: Complex64,
}

/// `Σ w_j γ_{a_j}` with pairwise distinct bases, none at 0 or 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GammaTerm>", into = "Vec<GammaTerm>")]
pub struct GammaCombination {
    terms: Vec<GammaTerm>,
}

impl TryFrom<Vec<GammaTerm>> for GammaCombination {
    type Error = Error;

    fn try_from(terms: Vec<GammaTerm>) -> Result<Self> {
        let mut out = Self::new();
        for t in terms {
            out.push(t.a, t.w)?;
        }
        Ok(out)
    }
}

impl From<GammaCombination> for Vec<GammaTerm> {
    fn from(c: GammaCombination) -> Self {
        c.terms
    }
}

fn same_base(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= BASE_TOL * a.norm().max(1.0)
}

impl GammaCombination {
    pub fn new() -> Self {
        Self::default()
    }

    /// The single kernel `γ_a`.
    pub fn single(a: Complex64) -> Result<Self> {
        let mut c = Self::new();
        c.push(a, Complex64::new(1.0, 0.0))?;
        Ok(c)
    }

    pub fn terms(&self) -> &[GammaTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Add `w·γ_a`, merging into an existing base within tolerance. A merge
    /// that cancels exactly removes the term.
    pub fn push(&mut self, a: Complex64, w: Complex64) -> Result<()> {
        if !(a.re.is_finite() && a.im.is_finite()) || a.norm() <= BASE_TOL || (a - 1.0).norm() <= BASE_TOL {
            return Err(Error::InvalidBase(a));
        }
        match self.terms.iter().position(|t| same_base(t.a, a)) {
            Some(i) => {
                self.terms[i].w += w;
                if self.terms[i].w == Complex64::new(0.0, 0.0) {
                    self.terms.remove(i);
                }
            }
            None => {
                if w != Complex64::new(0.0, 0.0) {
                    self.terms.push(GammaTerm { a, w });
                }
            }
        }
        Ok(())
    }

    /// Weight on the base matching `a`, zero if absent.
    pub fn weight_of(&self, a: Complex64) -> Complex64 {
        self.terms
            .iter()
            .find(|t| same_base(t.a, a))
            .map_or(Complex64::new(0.0, 0.0), |t| t.w)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = Self::new();
        for t in &self.terms {
            // Bases were validated on insertion.
            let _ = out.push(t.a, t.w * s);
        }
        out
    }

    /// `α·self + β·other`.
    pub fn linear(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Self {
        let mut out = self.scaled(alpha);
        for t in &other.terms {
            let _ = out.push(t.a, t.w * beta);
        }
        out
    }

    /// `Σ w_j γ_{a_j}(z)` in stored order.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let mut acc = ComplexNeumaier::new();
        for t in &self.terms {
            acc.add(t.w * gamma_eval(t.a, z)?);
        }
        Ok(acc.value())
    }

    /// `Σ w_j γ_{a_j}(z)` without pole checks.
    pub fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        let mut acc = ComplexNeumaier::new();
        for t in &self.terms {
            acc.add(t.w * gamma_unchecked(t.a, z));
        }
        acc.value()
    }

    /// Coefficient of `z⁻³` at infinity.
    pub fn cubic_coefficient(&self) -> Complex64 {
        let mut acc = ComplexNeumaier::new();
        for t in &self.terms {
            acc.add(t.w * t.a * (t.a - 1.0));
        }
        acc.value()
    }

    /// Poles of the combination: 0, 1 and every base.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut p = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        p.extend(self.terms.iter().map(|t| t.a));
        p
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn combo_eval(phi: &GammaCombination, z: Complex64) -> Result<Complex64> {
    phi.eval(z)
}

/// `μ(f(z))·conj(f'(z))/f'(z)`.
pub fn beltrami_pullback(
    mu: impl Fn(Complex64) -> Complex64,
    map: &EntireMap,
    z: Complex64,
) -> Result<Complex64> {
    let [f0, f1, _] = map.eval_all(z)?;
    if f1.norm() == 0.0 {
        return Err(Error::Precondition(format!("f'({z}) = 0")));
    }
    Ok(mu(f0) * f1.conj() / f1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn direct_arithmetic() {
        assert!((gamma_eval(c(2.0, 0.0), c(3.0, 0.0)).unwrap() - c(1.0 / 3.0, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn pole_errors_name_the_pole() {
        let a = c(2.0, 1.0);
        for (z, want) in [(c(0.0, 0.0), Pole::Zero), (c(1.0, 0.0), Pole::One), (a, Pole::Base)] {
            match gamma_eval(a, z) {
                Err(Error::PoleEvaluation { pole, .. }) => assert_eq!(pole, want),
                other => panic!("expected pole error, got {other:?}"),
            }
        }
        assert!(matches!(gamma_eval(c(1.0, 0.0), c(3.0, 0.0)), Err(Error::InvalidBase(_))));
    }

    #[test]
    fn partial_fractions_and_residues() {
        let a = c(-0.7, 2.2);
        let z = c(0.4, -1.3);
        let pf = (a - 1.0) / z - a / (z - 1.0) + 1.0 / (z - a);
        assert!((gamma_unchecked(a, z) - pf).norm() < 1e-14);
        let eps = 1e-7;
        let res: Vec<Complex64> = [c(0.0, 0.0), c(1.0, 0.0), a]
            .iter()
            .map(|&p| eps * gamma_unchecked(a, p + eps))
            .collect();
        assert!((res[0] - (a - 1.0)).norm() < 1e-5);
        assert!((res[1] + a).norm() < 1e-5);
        assert!((res[2] - 1.0).norm() < 1e-5);
        assert!(((a - 1.0) - a + 1.0).norm() <= 1e-10);
    }

    #[test]
    fn cubic_decay_along_rays() {
        let a = c(3.0, -1.0);
        for t in [0.3, 1.7, 4.0] {
            let z = Complex64::from_polar(1e6, t);
            let v = gamma_unchecked(a, z).norm() * z.norm().powi(3);
            assert!((v / (a * (a - 1.0)).norm() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn combination_merges_and_cancels() {
        let mut phi = GammaCombination::new();
        assert_eq!(phi.eval(c(0.5, 0.5)).unwrap(), c(0.0, 0.0));
        let a = c(2.0, 0.5);
        phi.push(a, c(1.0, 0.0)).unwrap();
        assert_eq!(phi.eval(c(0.3, 0.2)).unwrap(), gamma_eval(a, c(0.3, 0.2)).unwrap());
        phi.push(a + 1e-12, c(-1.0, 0.0)).unwrap();
        assert!(phi.is_empty());
        assert_eq!(phi.eval(c(0.3, 0.2)).unwrap(), c(0.0, 0.0));
        assert!(phi.push(c(1e-10, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn json_shape() {
        let phi: GammaCombination = serde_json::from_str(r#"[{"a":[2,0],"w":[1,0.5]},{"a":[2,0],"w":[1,0]}]"#).unwrap();
        assert_eq!(phi.len(), 1);
        assert_eq!(phi.terms()[0].w, c(2.0, 0.5));
        let text = phi.to_json().unwrap();
        assert_eq!(text, r#"[{"a":[2.0,0.0],"w":[2.0,0.5]}]"#);
        assert!(serde_json::from_str::<GammaCombination>(r#"[{"a":[0,0],"w":[1,0]}]"#).is_err());
    }

    #[test]
    fn beltrami_modulus() {
        let f = EntireMap::sine_family(c(0.3, 0.0), c(0.7, 0.0)).unwrap();
        let z = c(0.2, 0.9);
        let v = beltrami_pullback(|_| c(1.0, 0.0), &f, z).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        assert_eq!(beltrami_pullback(|_| c(0.0, 0.0), &f, z).unwrap(), c(0.0, 0.0));
        let mu = |w: Complex64| w * 0.1;
        let v = beltrami_pullback(mu, &f, z).unwrap();
        assert!((v.norm() - mu(f.f(z).unwrap()).norm()).abs() < 1e-15);
        assert!(beltrami_pullback(|_| c(1.0, 0.0), &f, c(std::f64::consts::FRAC_PI_2, 0.0)).is_err()
            || f.evaluate(c(std::f64::consts::FRAC_PI_2, 0.0), 1).unwrap().norm() > 0.0);
    }
}
