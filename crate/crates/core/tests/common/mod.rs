//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's orbit, series or solver code.
#![allow(dead_code)]

use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Real solution of `f(p) = p`, `f(p2) = p2`, `f(a+b) = p`, `f(a−b) = p2`
/// for `f = a + b sin z`, by Newton with a forward-difference Jacobian and
/// Gaussian elimination with partial pivoting.
pub fn solve_landing(seed: [f64; 4]) -> [f64; 4] {
    let f = |x: [f64; 4]| -> [f64; 4] {
        let [a, b, p, q] = x;
        [
            a + b * p.sin() - p,
            a + b * q.sin() - q,
            a + b * (a + b).sin() - p,
            a + b * (a - b).sin() - q,
        ]
    };
    let mut x = seed;
    for _ in 0..100 {
        let r = f(x);
        if r.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        let mut m = [[0.0f64; 5]; 4];
        for j in 0..4 {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xh = x;
            xh[j] += h;
            let rh = f(xh);
            for i in 0..4 {
                m[i][j] = (rh[i] - r[i]) / h;
            }
        }
        for i in 0..4 {
            m[i][4] = -r[i];
        }
        for col in 0..4 {
            let piv = (col..4).max_by(|&i, &k| m[i][col].abs().total_cmp(&m[k][col].abs())).unwrap();
            m.swap(col, piv);
            for i in col + 1..4 {
                let t = m[i][col] / m[col][col];
                for k in col..5 {
                    m[i][k] -= t * m[col][k];
                }
            }
        }
        let mut dx = [0.0; 4];
        for i in (0..4).rev() {
            let s: f64 = (i + 1..4).map(|k| m[i][k] * dx[k]).sum();
            dx[i] = (m[i][4] - s) / m[i][i];
        }
        for i in 0..4 {
            x[i] += dx[i];
        }
    }
    x
}

/// `f(z) = p1 + m·sin(α z + β)` and its derivative, from raw coefficients.
#[derive(Clone, Copy, Debug)]
pub struct SineShape {
    pub p1: Complex64,
    pub m: Complex64,
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl SineShape {
    pub fn of(map: &ruelle_core::EntireMap) -> Self {
        assert_eq!(map.p1().degree().unwrap_or(0), 0);
        assert_eq!(map.p2().degree(), Some(1));
        assert_eq!(map.p3().degree(), Some(1));
        Self {
            p1: map.p1().coeff(0) + map.p2().coeff(0),
            m: map.p2().coeff(1),
            alpha: map.p3().coeff(1),
            beta: map.p3().coeff(0),
        }
    }

    pub fn f(&self, z: Complex64) -> Complex64 {
        self.p1 + self.m * (self.alpha * z + self.beta).sin()
    }

    pub fn df(&self, z: Complex64) -> Complex64 {
        self.m * self.alpha * (self.alpha * z + self.beta).cos()
    }

    /// Orbit points and chain-rule derivatives, `n + 1` of each.
    pub fn orbit(&self, z0: Complex64, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut pts = vec![z0];
        let mut ders = vec![c(1.0, 0.0)];
        for k in 0..n {
            let z = pts[k];
            ders.push(ders[k] * self.df(z));
            pts.push(self.f(z));
        }
        (pts, ders)
    }
}

pub fn gamma(a: Complex64, z: Complex64) -> Complex64 {
    a * (a - 1.0) / (z * (z - 1.0) * (z - a))
}

/// Deterministic points in a rectangle away from `avoid`, from a simple
/// additive recurrence.
pub fn spread_points(n: usize, rect: [f64; 4], avoid: &[Complex64], min_dist: f64) -> Vec<Complex64> {
    let (g1, g2) = (0.7548776662466927, 0.5698402909980532);
    let mut out = Vec::new();
    let mut k = 1.0;
    while out.len() < n {
        let u = (0.5 + g1 * k) % 1.0;
        let v = (0.5 + g2 * k) % 1.0;
        k += 1.0;
        let z = c(rect[0] + (rect[1] - rect[0]) * u, rect[2] + (rect[3] - rect[2]) * v);
        if avoid.iter().all(|a| (z - a).norm() >= min_dist) {
            out.push(z);
        }
    }
    out
}
