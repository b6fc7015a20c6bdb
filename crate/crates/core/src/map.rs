//! Entire maps `f = P1 + P2(sin(P3))` and their affine normalization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Affine conjugacy `A(z) = scale·z + shift`; a normalized map is
/// `A⁻¹ ∘ f ∘ A` in the original map's coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    #[serde(with = "crate::serde_complex")]
    pub scale: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub shift: Complex64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            scale: Complex64::new(1.0, 0.0),
            shift: Complex64::new(0.0, 0.0),
        }
    }

    /// Normalized coordinate to original coordinate.
    pub fn to_original(&self, z: Complex64) -> Complex64 {
        self.scale * z + self.shift
    }

    /// Original coordinate to normalized coordinate.
    pub fn from_original(&self, w: Complex64) -> Complex64 {
        (w - self.shift) / self.scale
    }

    /// `self ∘ inner`.
    fn compose(&self, inner: &Normalization) -> Normalization {
        Normalization {
            scale: self.scale * inner.scale,
            shift: self.scale * inner.shift + self.shift,
        }
    }
}

/// Rectangular seed grid for Newton searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedGrid {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub n: usize,
}

impl Default for SeedGrid {
    fn default() -> Self {
        Self {
            re: (-8.0, 8.0),
            im: (-8.0, 8.0),
            n: 49,
        }
    }
}

impl SeedGrid {
    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        let n = self.n.max(2);
        let step = move |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        (0..n).flat_map(move |i| {
            (0..n).map(move |j| Complex64::new(step(self.re, i), step(self.im, j)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntireMap {
    p1: Poly,
    p2: Poly,
    p3: Poly,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<Normalization>,
}

const FIXES_TOL: f64 = 1e-10;

impl EntireMap {
    pub fn new(p1: Poly, p2: Poly, p3: Poly) -> Result<Self> {
        let map = Self {
            p1,
            p2,
            p3,
            normalization: None,
        };
        map.validate()?;
        Ok(map)
    }

    /// `a + b·sin z`.
    pub fn sine_family(a: Complex64, b: Complex64) -> Result<Self> {
        Self::new(
            Poly::new(vec![a]),
            Poly::new(vec![Complex64::new(0.0, 0.0), b]),
            Poly::z(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: Self = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    fn validate(&self) -> Result<()> {
        if self.p2.is_constant() {
            return Err(Error::InvalidMap("P2 must be non-constant".into()));
        }
        if self.p3.is_constant() {
            return Err(Error::InvalidMap("P3 must be non-constant".into()));
        }
        if !(self.p1.is_finite() && self.p2.is_finite() && self.p3.is_finite()) {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        Ok(())
    }

    pub fn p1(&self) -> &Poly {
        &self.p1
    }

    pub fn p2(&self) -> &Poly {
        &self.p2
    }

    pub fn p3(&self) -> &Poly {
        &self.p3
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// `[f, f', f'']` at `z` by the chain and product rules.
    pub fn eval_all(&self, z: Complex64) -> Result<[Complex64; 3]> {
        let [q1, q1d, q1dd] = self.p1.eval2(z);
        let [w, w1, w2] = self.p3.eval2(z);
        let (s, c) = (w.sin(), w.cos());
        let [g, g1, g2] = self.p2.eval2(s);
        let cw1 = c * w1;
        let f0 = q1 + g;
        let f1 = q1d + g1 * cw1;
        let f2 = q1dd + g2 * cw1 * cw1 + g1 * (c * w2 - s * w1 * w1);
        for (v, what) in [(f0, "f"), (f1, "f'"), (f2, "f''")] {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Range { what, z });
            }
        }
        Ok([f0, f1, f2])
    }

    /// `f`, `f'` or `f''` at `z`.
    pub fn evaluate(&self, z: Complex64, order: u8) -> Result<Complex64> {
        if order > 2 {
            return Err(Error::InvalidOrder(order));
        }
        Ok(self.eval_all(z)?[order as usize])
    }

    pub fn f(&self, z: Complex64) -> Result<Complex64> {
        let v = self.p1.eval(z) + self.p2.eval(self.p3.eval(z).sin());
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::Range { what: "f", z })
        }
    }

    pub fn fixes_zero_and_one(&self) -> bool {
        let one = Complex64::new(1.0, 0.0);
        matches!(self.f(Complex64::new(0.0, 0.0)), Ok(v) if v.norm() <= FIXES_TOL)
            && matches!(self.f(one), Ok(v) if (v - one).norm() <= FIXES_TOL)
    }

    /// Newton refinement of a fixed point; `None` if it does not converge.
    pub fn refine_fixed_point(&self, z0: Complex64) -> Option<Complex64> {
        let mut z = z0;
        for _ in 0..80 {
            let [f0, f1, _] = self.eval_all(z).ok()?;
            let step = (f0 - z) / (f1 - 1.0);
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            z -= step;
            if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        let r = (self.f(z).ok()? - z).norm();
        (r <= FIXES_TOL * (1.0 + z.norm())).then_some(z)
    }

    /// Distinct fixed points reached by Newton from `grid`, sorted by modulus
    /// then argument.
    pub fn fixed_points(&self, grid: &SeedGrid) -> Vec<Complex64> {
        let mut found: Vec<Complex64> = Vec::new();
        for seed in grid.points() {
            if let Some(z) = self.refine_fixed_point(seed) {
                if !found.iter().any(|w| (w - z).norm() <= 1e-8 * (1.0 + z.norm())) {
                    found.push(z);
                }
            }
        }
        found.sort_by(|a, b| {
            let (ma, mb) = (a.norm(), b.norm());
            if (ma - mb).abs() > 1e-9 * (1.0 + ma) {
                ma.total_cmp(&mb)
            } else {
                a.arg().total_cmp(&b.arg())
            }
        });
        found
    }

    /// Conjugate by the affine map sending 0, 1 to the two smallest fixed
    /// points found from the default seed grid.
    pub fn normalize(&self) -> Result<Self> {
        self.normalize_with(&SeedGrid::default())
    }

    pub fn normalize_with(&self, grid: &SeedGrid) -> Result<Self> {
        if self.fixes_zero_and_one() {
            return Ok(self.conjugate(Normalization::identity()));
        }
        let fps = self.fixed_points(grid);
        if fps.len() < 2 {
            return Err(Error::NormalizationFailure { found: fps.len() });
        }
        self.normalize_at(fps[0], fps[1])
    }

    /// Conjugate so that `p0 ↦ 0` and `p1 ↦ 1`; both must be fixed points.
    pub fn normalize_at(&self, p0: Complex64, p1: Complex64) -> Result<Self> {
        for p in [p0, p1] {
            if (self.f(p)? - p).norm() > FIXES_TOL * (1.0 + p.norm()) {
                return Err(Error::Precondition(format!("{p} is not a fixed point")));
            }
        }
        if (p1 - p0).norm() <= 1e-9 {
            return Err(Error::NormalizationFailure { found: 1 });
        }
        let out = self.conjugate(Normalization {
            scale: p1 - p0,
            shift: p0,
        });
        if !out.fixes_zero_and_one() {
            return Err(Error::Precondition(
                "conjugate does not fix 0 and 1 to tolerance".into(),
            ));
        }
        Ok(out)
    }

    /// `A⁻¹ ∘ f ∘ A` with `A` absorbed into `P1` and `P3`.
    pub fn conjugate(&self, a: Normalization) -> Self {
        let inv = Complex64::new(1.0, 0.0) / a.scale;
        let p1 = self
            .p1
            .compose_affine(a.scale, a.shift)
            .add_constant(-a.shift)
            .scale(inv);
        let p2 = self.p2.scale(inv);
        let p3 = self.p3.compose_affine(a.scale, a.shift);
        let record = match &self.normalization {
            Some(prev) => prev.compose(&a),
            None => a,
        };
        Self {
            p1,
            p2,
            p3,
            normalization: Some(record),
        }
    }
}
