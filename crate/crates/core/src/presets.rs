//! Standard maps, bump fields and sample sets used by the checks and the CLI.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::EntireMap;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `0.3 + 0.7 sin z`, conjugated to fix 0 and 1.
pub fn sine_standard() -> Result<EntireMap> {
    EntireMap::sine_family(c(0.3, 0.0), c(0.7, 0.0))?.normalize()
}

/// Real parameters of `a + b sin z` whose two critical values land on
/// repelling fixed points in one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingParameters {
    pub a: f64,
    pub b: f64,
    /// `f(a + b) = p`, `f(p) = p`.
    pub p: f64,
    /// `f(a − b) = p2`, `f(p2) = p2`.
    pub p2: f64,
}

impl LandingParameters {
    pub const SEED: LandingParameters = LandingParameters {
        a: -11.35653,
        b: -8.08136,
        p: -6.87153,
        p2: -12.4328,
    };

    fn residual(&self) -> Vector4<f64> {
        let Self { a, b, p, p2 } = *self;
        Vector4::new(
            a + b * p.sin() - p,
            a + b * p2.sin() - p2,
            a + b * (a + b).sin() - p,
            a + b * (a - b).sin() - p2,
        )
    }

    fn jacobian(&self) -> Matrix4<f64> {
        let Self { a, b, p, p2 } = *self;
        let (s, t) = (a + b, a - b);
        Matrix4::new(
            1.0, p.sin(), b * p.cos() - 1.0, 0.0,
            1.0, p2.sin(), 0.0, b * p2.cos() - 1.0,
            1.0 + b * s.cos(), s.sin() + b * s.cos(), -1.0, 0.0,
            1.0 + b * t.cos(), t.sin() - b * t.cos(), 0.0, -1.0,
        )
    }

    /// Newton from `seed` to machine precision.
    pub fn solve(seed: LandingParameters) -> Result<Self> {
        let mut x = seed;
        for _ in 0..50 {
            let r = x.residual();
            if r.amax() < 1e-14 {
                return Ok(x);
            }
            let step = x
                .jacobian()
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Precondition("singular landing Jacobian".into()))?;
            x = LandingParameters {
                a: x.a - step[0],
                b: x.b - step[1],
                p: x.p - step[2],
                p2: x.p2 - step[3],
            };
        }
        let r = x.residual().amax();
        if r < 1e-12 {
            Ok(x)
        } else {
            Err(Error::Precondition(format!("landing system residual {r:e}")))
        }
    }

    /// Multiplier `b cos p` at the first landing point.
    pub fn multiplier(&self) -> f64 {
        self.b * self.p.cos()
    }

    pub fn multiplier2(&self) -> f64 {
        self.b * self.p2.cos()
    }
}

/// Fixed points used to normalize the landing map; chosen off the real line so
/// that the poles 0, 1 are well separated from the critical orbits.
pub const LANDING_ANCHOR: Complex64 = Complex64::new(-1.68699, 0.62932);

/// The landing-orbit map with its orbit data expressed in normalized
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingCase {
    pub params: LandingParameters,
    pub map: EntireMap,
    /// Critical value landing on `p`.
    pub d1: Complex64,
    pub p: Complex64,
    /// Critical value landing on `p2`.
    pub d2: Complex64,
    pub p2: Complex64,
    /// `f'(p)`.
    pub lambda: Complex64,
    pub lambda2: Complex64,
    /// `f'(d1)`.
    pub d1_derivative: Complex64,
}

pub fn landing_case() -> Result<LandingCase> {
    let params = LandingParameters::solve(LandingParameters::SEED)?;
    let raw = EntireMap::sine_family(c(params.a, 0.0), c(params.b, 0.0))?;
    let q = raw
        .refine_fixed_point(LANDING_ANCHOR)
        .ok_or_else(|| Error::Precondition("anchor fixed point not found".into()))?;
    let map = raw.normalize_at(q, q.conj())?;
    let norm = *map.normalization().expect("normalized map records its conjugacy");
    let to = |x: f64| norm.from_original(c(x, 0.0));
    let d1 = to(params.a + params.b);
    let d2 = to(params.a - params.b);
    let (p, p2) = (to(params.p), to(params.p2));
    Ok(LandingCase {
        params,
        lambda: map.evaluate(p, 1)?,
        lambda2: map.evaluate(p2, 1)?,
        d1_derivative: map.evaluate(d1, 1)?,
        map,
        d1,
        p,
        d2,
        p2,
    })
}

/// `μ(w) = (1 − |w − w0|²/ρ²)²` on the disc `|w − w0| < ρ`, zero outside; C¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    #[serde(with = "crate::serde_complex")]
    pub center: Complex64,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::Config(format!("bad bump ({center}, {radius})")));
        }
        Ok(Self { center, radius })
    }

    pub fn eval(&self, w: Complex64) -> f64 {
        let t = (w - self.center).norm_sqr() / (self.radius * self.radius);
        if t >= 1.0 {
            0.0
        } else {
            (1.0 - t) * (1.0 - t)
        }
    }

    /// `∬ μ = πρ²/3`.
    pub fn mass(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius / 3.0
    }
}

/// Deterministic samples in `[re0, re1] × [im0, im1]` at distance at least
/// `min_dist` from every point of `avoid`.
pub fn sample_points(seed: u64, n: usize, rect: [f64; 4], avoid: &[Complex64], min_dist: f64) -> Result<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        if tries > 1000 * (n + 1) {
            return Err(Error::Config("sample region too crowded".into()));
        }
        let z = c(rng.gen_range(rect[0]..rect[1]), rng.gen_range(rect[2]..rect[3]));
        if avoid.iter().all(|a| (z - a).norm() >= min_dist) {
            out.push(z);
        }
    }
    Ok(out)
}
