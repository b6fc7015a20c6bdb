//! Dense complex polynomials in ascending coefficient order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    #[serde(with = "crate::serde_complex::vec")]
    coeffs: Vec<Complex64>,
}

impl Poly {
    /// Trailing zero coefficients are dropped; the zero polynomial has no
    /// coefficients.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// The identity polynomial `z`.
    pub fn z() -> Self {
        Self::from_real(&[0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `z^k`, zero beyond the stored degree.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value, first and second derivative by a single Horner pass.
    pub fn eval2(&self, z: Complex64) -> [Complex64; 3] {
        let zero = Complex64::new(0.0, 0.0);
        let (mut p, mut d1, mut d2) = (zero, zero, zero);
        for &c in self.coeffs.iter().rev() {
            d2 = d2 * z + d1 * 2.0;
            d1 = d1 * z + p;
            p = p * z + c;
        }
        [p, d1, d2]
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn add_constant(&self, s: Complex64) -> Self {
        let mut coeffs = self.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        coeffs[0] += s;
        Self::new(coeffs)
    }

    /// `P(αz + β)` expanded by repeated Horner steps.
    pub fn compose_affine(&self, alpha: Complex64, beta: Complex64) -> Self {
        let mut out: Vec<Complex64> = Vec::new();
        for &c in self.coeffs.iter().rev() {
            // out <- out * (αz + β) + c
            let mut next = vec![Complex64::new(0.0, 0.0); out.len() + 1];
            for (k, &o) in out.iter().enumerate() {
                next[k] += o * beta;
                next[k + 1] += o * alpha;
            }
            next[0] += c;
            out = next;
        }
        Self::new(out)
    }

    /// All complex roots by Aberth–Ehrlich iteration followed by a Newton
    /// polish on the original coefficients.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = match self.degree() {
            None => return Err(Error::InvalidMap("roots of the zero polynomial".into())),
            Some(0) => return Ok(Vec::new()),
            Some(n) => n,
        };
        let lead = self.coeffs[n];
        if n == 1 {
            return Ok(vec![-self.coeffs[0] / lead]);
        }
        // Cauchy bound for the initial circle.
        let bound = 1.0
            + self.coeffs[..n]
                .iter()
                .map(|c| (c / lead).norm())
                .fold(0.0, f64::max);
        let r0 = bound.min(1e6).max(1e-3) * 0.5;
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
                Complex64::from_polar(r0, t)
            })
            .collect();
        for _ in 0..500 {
            let mut max_step: f64 = 0.0;
            for i in 0..n {
                let [p, dp, _] = self.eval2(z[i]);
                if p == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ratio = p / dp;
                let mut s = Complex64::new(0.0, 0.0);
                for (j, &zj) in z.iter().enumerate() {
                    if j != i {
                        s += 1.0 / (z[i] - zj);
                    }
                }
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * s);
                if step.re.is_finite() && step.im.is_finite() {
                    z[i] -= step;
                    max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
                }
            }
            if max_step < 1e-15 {
                break;
            }
        }
        for zi in z.iter_mut() {
            for _ in 0..3 {
                let [p, dp, _] = self.eval2(*zi);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if !(step.re.is_finite() && step.im.is_finite()) {
                    break;
                }
                *zi -= step;
            }
        }
        z.sort_by(|a, b| {
            (a.norm(), a.arg())
                .partial_cmp(&(b.norm(), b.arg()))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(z)
    }
}
