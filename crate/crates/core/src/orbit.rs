//! Forward orbits with chain-rule derivatives.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::EntireMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    Bounded,
    Unbounded,
    Undecided,
}

/// Eventual periodicity: `points[preperiod + k + period] = points[preperiod + k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub preperiod: usize,
    pub period: usize,
}

/// First orbit point close to a singular location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub index: usize,
    #[serde(with = "crate::serde_complex")]
    pub point: Complex64,
    pub kind: DegeneracyKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyKind {
    Zero,
    One,
    CriticalPoint,
}

impl DegeneracyKind {
    pub fn describe(self) -> &'static str {
        match self {
            DegeneracyKind::Zero => "0",
            DegeneracyKind::One => "1",
            DegeneracyKind::CriticalPoint => "a critical point",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitData {
    #[serde(with = "crate::serde_complex")]
    pub start: Complex64,
    /// `f^n(start)` for `n = 0..=N`.
    #[serde(with = "crate::serde_complex::vec")]
    pub points: Vec<Complex64>,
    /// `(f^n)'(start)`; `derivs[n + 1] = derivs[n] · f'(points[n])`.
    #[serde(with = "crate::serde_complex::vec")]
    pub derivs: Vec<Complex64>,
    pub boundedness: Boundedness,
    pub escape_radius: f64,
    pub cycle: Option<Cycle>,
    pub degeneracy: Option<Degeneracy>,
}

pub const RECURRENCE_TOL: f64 = 1e-9;
pub const DEGENERACY_TOL: f64 = 1e-8;
const RECURRENCE_MEMORY: usize = 64;

impl OrbitData {
    /// Number of stored steps `N` (points hold `N + 1` entries).
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.points.len() <= 1
    }

    /// Error if the orbit was flagged degenerate at or before `upto`.
    pub fn check_degeneracy(&self, upto: usize) -> Result<()> {
        match self.degeneracy {
            Some(d) if d.index <= upto => Err(Error::DegenerateOrbit {
                index: d.index,
                point: d.point,
                kind: d.kind.describe(),
            }),
            _ => Ok(()),
        }
    }

    /// Distinct points of the stored orbit; for an eventually periodic orbit
    /// this is the whole forward orbit.
    pub fn distinct_points(&self) -> usize {
        match self.cycle {
            Some(c) => c.preperiod + c.period,
            None => self.points.len(),
        }
    }
}

fn degeneracy_of(index: usize, z: Complex64, f1: Complex64, f2: Complex64) -> Option<Degeneracy> {
    let kind = if z.norm() < DEGENERACY_TOL {
        DegeneracyKind::Zero
    } else if (z - 1.0).norm() < DEGENERACY_TOL {
        DegeneracyKind::One
    } else if f1.norm() < DEGENERACY_TOL * f2.norm() {
        DegeneracyKind::CriticalPoint
    } else {
        return None;
    };
    Some(Degeneracy {
        index,
        point: z,
        kind,
    })
}

/// Iterate `f` from `start` for at most `n_max` steps.
///
/// Once a new point recurs within [`RECURRENCE_TOL`] of one of the previous
/// 64 points the orbit is continued by exact periodic extension, so that
/// repelling cycles are not polluted by rounding.
pub fn orbit(map: &EntireMap, start: Complex64, n_max: usize, escape_radius: f64) -> OrbitData {
    let mut points = vec![start];
    let mut derivs = vec![Complex64::new(1.0, 0.0)];
    let mut fprime: Vec<Complex64> = Vec::new();
    let mut boundedness = Boundedness::Undecided;
    let mut cycle = None;
    let mut degeneracy = None;

    for n in 0..n_max {
        let z = points[n];
        let Ok([f0, f1, f2]) = map.eval_all(z) else {
            boundedness = Boundedness::Unbounded;
            break;
        };
        if degeneracy.is_none() {
            degeneracy = degeneracy_of(n, z, f1, f2);
        }
        let next_deriv = derivs[n] * f1;
        if !(next_deriv.re.is_finite() && next_deriv.im.is_finite()) || next_deriv.norm() == 0.0 {
            break;
        }
        fprime.push(f1);
        let lo = (n + 1).saturating_sub(RECURRENCE_MEMORY);
        let hit = (lo..=n).find(|&j| (f0 - points[j]).norm() <= RECURRENCE_TOL * (1.0 + f0.norm()));
        if let Some(j) = hit {
            let period = n + 1 - j;
            cycle = Some(Cycle {
                preperiod: j,
                period,
            });
            for m in n + 1..=n_max {
                let p = points[m - period];
                let fp = fprime[m - period];
                let d = derivs[m - 1] * fprime[m - 1];
                points.push(p);
                derivs.push(d);
                if m < n_max {
                    fprime.push(fp);
                }
            }
            boundedness = if points[..=n].iter().all(|p| p.norm() <= escape_radius) {
                Boundedness::Bounded
            } else {
                Boundedness::Undecided
            };
            // Overflowing derivative products along an attracting or
            // repelling cycle are truncated like any other overflow.
            if let Some(k) = derivs.iter().position(|d| !(d.re.is_finite() && d.im.is_finite()) || d.norm() == 0.0) {
                points.truncate(k);
                derivs.truncate(k);
            }
            break;
        }
        points.push(f0);
        derivs.push(next_deriv);
        let m = points.len();
        if f0.norm() > escape_radius
            && m >= 3
            && points[m - 3].norm() < points[m - 2].norm()
            && points[m - 2].norm() < f0.norm()
        {
            boundedness = Boundedness::Unbounded;
            break;
        }
    }
    if degeneracy.is_none() {
        if let Some(&z) = points.last() {
            let idx = points.len() - 1;
            if let Ok([_, f1, f2]) = map.eval_all(z) {
                degeneracy = degeneracy_of(idx, z, f1, f2);
            }
        }
    }
    OrbitData {
        start,
        points,
        derivs,
        boundedness,
        escape_radius,
        cycle,
        degeneracy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::EntireMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sine_fixed_point_at_zero() {
        let f = EntireMap::sine_family(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let o = orbit(&f, c(0.0, 0.0), 10, 1e6);
        assert_eq!(o.points.len(), 11);
        assert!(o.points.iter().all(|p| *p == c(0.0, 0.0)));
        assert!(o.derivs.iter().all(|d| *d == c(1.0, 0.0)));
        assert_eq!(o.boundedness, Boundedness::Bounded);
        assert_eq!(o.cycle, Some(Cycle { preperiod: 0, period: 1 }));
        assert_eq!(o.degeneracy.map(|d| d.kind), Some(DegeneracyKind::Zero));
    }

    #[test]
    fn repelling_fixed_point_derivatives_are_powers() {
        // b sin p = p with b = 3: p ≈ 2.2789
        let b = 3.0;
        let (mut lo, mut hi) = (2.0f64, 3.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if b * m.sin() - m > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let p = 0.5 * (lo + hi);
        let f = EntireMap::sine_family(c(0.0, 0.0), c(b, 0.0)).unwrap();
        let p = f.refine_fixed_point(c(p, 0.0)).unwrap();
        let lambda = f.evaluate(p, 1).unwrap();
        assert!(lambda.norm() > 1.0);
        let o = orbit(&f, p, 12, 1e6);
        for (n, d) in o.derivs.iter().enumerate() {
            let want = lambda.powi(n as i32);
            assert!((d - want).norm() <= 1e-12 * want.norm());
        }
    }

    #[test]
    fn escaping_orbit_is_unbounded() {
        let f = EntireMap::new(
            crate::poly::Poly::from_real(&[0.0, 2.0]),
            crate::poly::Poly::from_real(&[0.0, 0.1]),
            crate::poly::Poly::z(),
        )
        .unwrap();
        let o = orbit(&f, c(10.0, 0.0), 60, 1e6);
        assert_eq!(o.boundedness, Boundedness::Unbounded);
        assert!(o.points.iter().all(|p| p.re.is_finite() && p.im.is_finite()));
    }

    #[test]
    fn attracted_orbit_detected_as_cycle() {
        let f = EntireMap::sine_family(c(0.3, 0.0), c(0.7, 0.0)).unwrap();
        let o = orbit(&f, c(1.0, 0.0), 200, 1e6);
        assert_eq!(o.boundedness, Boundedness::Bounded);
        assert_eq!(o.cycle.unwrap().period, 1);
        assert_eq!(o.points.len(), 201);
    }

    #[test]
    fn degeneracy_error_reports_index() {
        let f = EntireMap::sine_family(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let o = orbit(&f, c(std::f64::consts::FRAC_PI_2, 0.0), 3, 1e6);
        let d = o.degeneracy.unwrap();
        assert_eq!((d.index, d.kind), (0, DegeneracyKind::CriticalPoint));
        assert!(o.check_degeneracy(0).is_err());
    }
}
