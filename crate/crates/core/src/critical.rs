//! Critical points, critical values and residues of `1/f'`.
//!
//! When `P3` is linear and `P1` has degree at most one, the critical points
//! form finitely many exact lattices `z = (w₀ + 2πk − β₃)/α₃`, one per base
//! angle `w₀`. Points outside the enumeration disc are then known exactly and,
//! when `P1` is constant (so each lattice has a single critical value), are
//! kept as a far field that [`CriticalData::class_gamma_sums`] adds to the
//! explicit entries.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::gamma_unchecked;
use crate::map::EntireMap;
use crate::poly::Poly;
use crate::sum::{ComplexNeumaier, Neumaier};

pub const VALUE_CLASS_TOL: f64 = 1e-9;
pub const SIMPLE_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-12;
const DEDUP_TOL: f64 = 1e-8;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEntry {
    #[serde(with = "crate::serde_complex")]
    pub c: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub d: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub b: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueClass {
    #[serde(with = "crate::serde_complex")]
    pub value: Complex64,
    /// Indices into the entry list.
    pub members: Vec<usize>,
}

/// One exact lattice of critical points sharing `f''` and, when `P1` is
/// constant, the critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Family {
    w0: Complex64,
}

/// Critical points with `radius ≤ |c| < far_radius`, grouped by class.
#[derive(Debug, Clone, PartialEq)]
struct FarField {
    radius: f64,
    points: Vec<Vec<(Complex64, Complex64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalData {
    map: EntireMap,
    radius: f64,
    entries: Vec<CriticalEntry>,
    classes: Vec<ValueClass>,
    entry_class: Vec<usize>,
    tail_bound: f64,
    /// Bound on `Σ |b|/|c|³` over critical points not represented at all.
    neglected_tail: f64,
    far: Option<FarField>,
}

/// Enumeration options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalOptions {
    /// Keep the exact far lattice for `radius ≤ |c| < far_radius` when
    /// available.
    pub far_field: bool,
    /// Defaults to `max(64·radius, 2048)`.
    pub far_radius: Option<f64>,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self {
            far_field: true,
            far_radius: None,
        }
    }
}

fn default_far_radius(radius: f64) -> f64 {
    (64.0 * radius).max(2048.0)
}

/// Exact lattice structure: `P3(z) = α z + β` and `deg P1 ≤ 1`.
#[derive(Debug, Clone)]
struct Lattice {
    alpha: Complex64,
    beta: Complex64,
    families: Vec<Family>,
}

impl Lattice {
    fn of(map: &EntireMap) -> Option<Lattice> {
        if map.p3().degree() != Some(1) || map.p1().degree().unwrap_or(0) > 1 {
            return None;
        }
        let alpha = map.p3().coeff(1);
        let beta = map.p3().coeff(0);
        let kappa = -map.p1().coeff(1) / alpha;
        let dp2 = map.p2().derivative();
        let mut w0s: Vec<Complex64> = Vec::new();
        let i = Complex64::new(0.0, 1.0);
        if kappa == c0() {
            w0s.push(Complex64::new(PI / 2.0, 0.0));
            w0s.push(Complex64::new(-PI / 2.0, 0.0));
            if !dp2.is_constant() {
                for s in dedup(dp2.roots().ok()?) {
                    let a = s.asin();
                    w0s.push(a);
                    w0s.push(Complex64::new(PI, 0.0) - a);
                }
            }
        } else {
            // P2'(s)²(1 − s²) = κ² with cos w = κ / P2'(s).
            let q = mul(&mul(&dp2, &dp2), &Poly::from_real(&[1.0, 0.0, -1.0])).add_constant(-kappa * kappa);
            for s in dedup(q.roots().ok()?) {
                let g = dp2.eval(s);
                if g.norm() == 0.0 {
                    continue;
                }
                let cw = kappa / g;
                w0s.push(-i * (cw + i * s).ln());
            }
        }
        let mut families: Vec<Family> = Vec::new();
        for w in w0s {
            let w = Complex64::new(w.re.rem_euclid(2.0 * PI), w.im);
            let dup = families.iter().any(|f| {
                let dw = f.w0 - w;
                let dre = dw.re.rem_euclid(2.0 * PI);
                dre.min(2.0 * PI - dre).hypot(dw.im) < 1e-10
            });
            if !dup {
                families.push(Family { w0: w });
            }
        }
        Some(Lattice {
            alpha,
            beta,
            families,
        })
    }

    fn point(&self, fam: &Family, k: i64) -> Complex64 {
        (fam.w0 + 2.0 * PI * k as f64 - self.beta) / self.alpha
    }

    /// Points of `fam` with `r_lo ≤ |z| < r_hi`, in increasing `k`.
    fn points_in(&self, fam: &Family, r_lo: f64, r_hi: f64) -> Vec<Complex64> {
        let kmax = ((r_hi * self.alpha.norm() + (fam.w0 - self.beta).norm()) / (2.0 * PI)).ceil() as i64 + 1;
        (-kmax..=kmax)
            .map(|k| self.point(fam, k))
            .filter(|z| z.norm() >= r_lo && z.norm() < r_hi)
            .collect()
    }

    fn spacing(&self) -> f64 {
        2.0 * PI / self.alpha.norm()
    }
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let (ac, bc) = (a.coeffs(), b.coeffs());
    if ac.is_empty() || bc.is_empty() {
        return Poly::zero();
    }
    let mut out = vec![c0(); ac.len() + bc.len() - 1];
    for (i, &x) in ac.iter().enumerate() {
        for (j, &y) in bc.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    Poly::new(out)
}

fn dedup(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    for z in v {
        if !out.iter().any(|w| (w - z).norm() <= 1e-7 * (1.0 + z.norm())) {
            out.push(z);
        }
    }
    out
}

/// Newton on `f'`; returns the refined point when it converges to a zero.
fn refine_critical(map: &EntireMap, z0: Complex64) -> Option<Complex64> {
    let mut z = z0;
    for _ in 0..60 {
        let [_, f1, f2] = map.eval_all(z).ok()?;
        let step = f1 / f2;
        if !finite(step) {
            return None;
        }
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    let [_, f1, f2] = map.eval_all(z).ok()?;
    let converged = f1.norm() <= NEWTON_TOL * (1.0 + f2.norm())
        || (f1 / f2).norm() <= 4e-16 * (1.0 + z.norm());
    (converged && f1.norm() < 1e-9).then_some(z)
}

/// `(1/2π)·Δarg f'` around `|z| = radius`, tracked with adaptive subdivision.
pub fn winding_count(map: &EntireMap, radius: f64, base_samples: usize) -> Result<i64> {
    let fp = |t: f64| -> Result<Complex64> {
        let z = Complex64::from_polar(radius, t);
        let v = map.evaluate(z, 1)?;
        if v.norm() == 0.0 {
            return Err(Error::Precondition(format!("f' vanishes on |z| = {radius}")));
        }
        Ok(v)
    };
    fn arc(
        fp: &dyn Fn(f64) -> Result<Complex64>,
        ta: f64,
        tb: f64,
        fa: Complex64,
        fb: Complex64,
        depth: u32,
    ) -> Result<f64> {
        let d = (fb / fa).arg();
        if d.abs() < 0.5 || depth > 40 {
            return Ok(d);
        }
        let tm = 0.5 * (ta + tb);
        let fm = fp(tm)?;
        Ok(arc(fp, ta, tm, fa, fm, depth + 1)? + arc(fp, tm, tb, fm, fb, depth + 1)?)
    }
    let n = base_samples.max(64);
    let mut acc = Neumaier::new();
    let mut prev = fp(0.0)?;
    for j in 0..n {
        let ta = 2.0 * PI * j as f64 / n as f64;
        let tb = 2.0 * PI * (j + 1) as f64 / n as f64;
        let fb = fp(tb)?;
        acc.add(arc(&fp, ta, tb, prev, fb, 0)?);
        prev = fb;
    }
    let w = acc.value() / (2.0 * PI);
    if (w - w.round()).abs() > 0.1 {
        return Err(Error::Precondition(format!("winding {w} is not near an integer")));
    }
    Ok(w.round() as i64)
}

/// Seeds for Newton inside `|z| < r_hi` outside the exact lattice regime.
fn approximate_seeds(map: &EntireMap, r_lo: f64, r_hi: f64) -> Vec<Complex64> {
    let p3 = map.p3();
    let mut bases = vec![Complex64::new(PI / 2.0, 0.0)];
    let dp2 = map.p2().derivative();
    if !dp2.is_constant() {
        if let Ok(roots) = dp2.roots() {
            for s in roots {
                bases.push(s.asin());
                bases.push(Complex64::new(PI, 0.0) - s.asin());
            }
        }
    }
    let m: f64 = p3
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c.norm() * r_hi.powi(k as i32))
        .sum();
    let kmax = ((m / PI).ceil() as i64 + 1).min(200_000);
    let mut seeds = Vec::new();
    for base in &bases {
        let step = if *base == Complex64::new(PI / 2.0, 0.0) { PI } else { 2.0 * PI };
        for k in -kmax..=kmax {
            let target = base + step * k as f64;
            if let Ok(roots) = p3.add_constant(-target).roots() {
                seeds.extend(roots.into_iter().filter(|z| z.norm() < r_hi * 1.05 && z.norm() >= r_lo * 0.95));
            }
        }
    }
    if let Ok(roots) = p3.derivative().roots() {
        seeds.extend(roots.into_iter().filter(|z| z.norm() < r_hi));
    }
    seeds
}

fn grid_seeds(r: f64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = -r + 2.0 * r * (i as f64 + 0.5) / n as f64;
            let y = -r + 2.0 * r * (j as f64 + 0.5) / n as f64;
            let z = Complex64::new(x, y);
            if z.norm() < r {
                out.push(z);
            }
        }
    }
    out
}

fn refine_all(map: &EntireMap, seeds: &[Complex64], r_lo: f64, r_hi: f64) -> Vec<Complex64> {
    let mut found: Vec<Complex64> = Vec::new();
    for &s in seeds {
        if let Some(z) = refine_critical(map, s) {
            if z.norm() < r_hi
                && z.norm() >= r_lo
                && !found.iter().any(|w| (w - z).norm() <= DEDUP_TOL * (1.0 + z.norm()))
            {
                found.push(z);
            }
        }
    }
    found
}

fn canonical_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() > 1e-12 * (1.0 + ma) {
        ma.total_cmp(&mb)
    } else {
        a.arg().total_cmp(&b.arg())
    }
}

/// All zeros of `f'` in `|z| < radius`, canonically ordered, with the count
/// certified by the winding number of `f'` on the circle. The radius is
/// perturbed outward when a zero sits on the circle; the radius actually used
/// is returned alongside.
pub fn critical_points_with_radius(map: &EntireMap, radius: f64) -> Result<(Vec<Complex64>, f64)> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    let lattice = Lattice::of(map);
    let mut r = radius;
    for attempt in 0..6 {
        let mut seeds = match &lattice {
            Some(l) => l
                .families
                .iter()
                .flat_map(|f| l.points_in(f, 0.0, r * 1.05))
                .collect::<Vec<_>>(),
            None => approximate_seeds(map, 0.0, r),
        };
        let mut found = refine_all(map, &seeds, 0.0, r);
        let near_circle = found
            .iter()
            .any(|z| (z.norm() - r).abs() <= 1e-6 * r);
        if near_circle {
            r *= 1.0 + 1e-3 * (attempt + 1) as f64;
            continue;
        }
        let expected = match winding_count(map, r, 8 * found.len() + 512) {
            Ok(w) => w,
            Err(Error::Precondition(_)) => {
                r *= 1.0 + 1e-3 * (attempt + 1) as f64;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut grid_n = ((4.0 * r) as usize).clamp(64, 512);
        let mut tries = 0;
        while found.len() as i64 != expected && tries < 2 {
            seeds.extend(grid_seeds(r, grid_n));
            found = refine_all(map, &seeds, 0.0, r);
            grid_n *= 2;
            tries += 1;
        }
        if found.len() as i64 != expected {
            return Err(Error::EnumerationFailure {
                radius: r,
                found: found.len(),
                expected,
            });
        }
        found.sort_by(canonical_order);
        return Ok((found, r));
    }
    Err(Error::Config(format!(
        "could not find a radius near {radius} free of critical points"
    )))
}

pub fn critical_points(map: &EntireMap, radius: f64) -> Result<Vec<Complex64>> {
    Ok(critical_points_with_radius(map, radius)?.0)
}

/// `max_θ |(z − c)/f'(z) − b|` over eight points `z = c + ε e^{iθ}`.
pub fn residue_check(map: &EntireMap, c: Complex64, b: Complex64, eps: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..8 {
        let off = Complex64::from_polar(eps, 2.0 * PI * (k as f64 + 0.5) / 8.0);
        let f1 = map.evaluate(c + off, 1)?;
        worst = worst.max((off / f1 - b).norm());
    }
    Ok(worst)
}

fn entry_at(map: &EntireMap, c: Complex64) -> Result<CriticalEntry> {
    let [d, _, f2] = map.eval_all(c)?;
    if f2.norm() <= SIMPLE_TOL {
        return Err(Error::NonSimpleCritical { c, f2_abs: f2.norm() });
    }
    Ok(CriticalEntry { c, d, b: 1.0 / f2 })
}

fn group_classes(entries: &[CriticalEntry]) -> (Vec<ValueClass>, Vec<usize>) {
    let mut classes: Vec<ValueClass> = Vec::new();
    let mut of = Vec::with_capacity(entries.len());
    for (k, e) in entries.iter().enumerate() {
        match classes
            .iter()
            .position(|cl| (cl.value - e.d).norm() <= VALUE_CLASS_TOL * (1.0 + e.d.norm()))
        {
            Some(i) => {
                classes[i].members.push(k);
                of.push(i);
            }
            None => {
                of.push(classes.len());
                classes.push(ValueClass {
                    value: e.d,
                    members: vec![k],
                });
            }
        }
    }
    (classes, of)
}

/// `Σ_{j≥0} (t0 + j h)⁻³ ≤ t0⁻³ + 1/(2 h t0²)`.
fn ray_tail(t0: f64, h: f64) -> f64 {
    t0.powi(-3) + 1.0 / (2.0 * h * t0 * t0)
}

pub fn critical_data(map: &EntireMap, radius: f64) -> Result<CriticalData> {
    CriticalData::build(map, radius, CriticalOptions::default())
}

impl CriticalData {
    pub fn build(map: &EntireMap, radius: f64, opts: CriticalOptions) -> Result<Self> {
        let (points, r) = critical_points_with_radius(map, radius)?;
        let entries = points
            .into_iter()
            .map(|c| entry_at(map, c))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(map.clone(), r, entries, opts)
    }

    /// Canonically order `entries`, group classes and attach the far field
    /// and tail bound for `map` at `radius`.
    pub fn assemble(
        map: EntireMap,
        radius: f64,
        mut entries: Vec<CriticalEntry>,
        opts: CriticalOptions,
    ) -> Result<Self> {
        entries.sort_by(|a, b| canonical_order(&a.c, &b.c));
        let (mut classes, entry_class) = group_classes(&entries);
        let far_radius = opts.far_radius.unwrap_or_else(|| default_far_radius(radius));
        let mut far = None;
        let tail_bound;
        let neglected_tail;
        match Lattice::of(&map) {
            Some(l) => {
                let mut acc = Neumaier::new();
                let mut beyond = Neumaier::new();
                let mut far_points: Vec<Vec<(Complex64, Complex64)>> = vec![Vec::new(); classes.len()];
                let keep_far = opts.far_field && map.p1().is_constant() && far_radius > radius;
                let h = l.spacing();
                for fam in &l.families {
                    let pts = l.points_in(fam, radius, far_radius.max(radius));
                    let z_ref = l.point(fam, 0);
                    let [d_fam, _, f2] = map.eval_all(z_ref)?;
                    let b_abs = 1.0 / f2.norm();
                    let mut cls = None;
                    if keep_far && !pts.is_empty() {
                        let i = match classes
                            .iter()
                            .position(|cl| (cl.value - d_fam).norm() <= VALUE_CLASS_TOL * (1.0 + d_fam.norm()))
                        {
                            Some(i) => i,
                            None => {
                                classes.push(ValueClass {
                                    value: d_fam,
                                    members: Vec::new(),
                                });
                                far_points.push(Vec::new());
                                classes.len() - 1
                            }
                        };
                        cls = Some(i);
                    }
                    for z in pts {
                        let b = 1.0 / map.evaluate(z, 2)?;
                        acc.add(b.norm() / z.norm().powi(3));
                        if let Some(i) = cls {
                            far_points[i].push((z, b));
                        }
                    }
                    // Beyond far_radius: two rays of lattice points.
                    let dist = {
                        let dir = 1.0 / l.alpha;
                        let u = dir / dir.norm();
                        (z_ref * u.conj()).im.abs()
                    };
                    let t0 = (far_radius.max(radius).powi(2) - dist * dist).max(0.0).sqrt().max(h);
                    beyond.add(2.0 * b_abs * ray_tail(t0, h));
                }
                tail_bound = acc.value() + beyond.value();
                neglected_tail = if keep_far { beyond.value() } else { tail_bound };
                if keep_far {
                    far = Some(FarField {
                        radius: far_radius,
                        points: far_points,
                    });
                }
            }
            None => {
                tail_bound = Self::estimate_tail(&map, radius)?;
                neglected_tail = tail_bound;
            }
        }
        Ok(Self {
            map,
            radius,
            entries,
            classes,
            entry_class,
            tail_bound,
            neglected_tail,
            far,
        })
    }

    /// Refined critical points on `[R, 2R)` and `[2R, 4R)` with a dyadic
    /// extrapolation of the remainder.
    fn estimate_tail(map: &EntireMap, radius: f64) -> Result<f64> {
        let shell = |lo: f64, hi: f64| -> Result<f64> {
            let seeds = approximate_seeds(map, lo, hi);
            let pts = refine_all(map, &seeds, lo, hi);
            let mut acc = Neumaier::new();
            for z in pts {
                let f2 = map.evaluate(z, 2)?;
                acc.add(1.0 / (f2.norm() * z.norm().powi(3)));
            }
            Ok(acc.value())
        };
        let s1 = shell(radius, 2.0 * radius)?;
        let s2 = shell(2.0 * radius, 4.0 * radius)?;
        if s1 == 0.0 && s2 == 0.0 {
            return Ok(0.0);
        }
        let ratio = if s1 > 0.0 { s2 / s1 } else { f64::INFINITY };
        if ratio >= 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(s1 + s2 + s2 * ratio / (1.0 - ratio))
    }

    pub fn map(&self) -> &EntireMap {
        &self.map
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn entries(&self) -> &[CriticalEntry] {
        &self.entries
    }

    pub fn classes(&self) -> &[ValueClass] {
        &self.classes
    }

    /// Class index of entry `k`.
    pub fn class_of(&self, k: usize) -> usize {
        self.entry_class[k]
    }

    pub fn class_values(&self) -> Vec<Complex64> {
        self.classes.iter().map(|c| c.value).collect()
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn has_far_field(&self) -> bool {
        self.far.is_some()
    }

    pub fn far_radius(&self) -> Option<f64> {
        self.far.as_ref().map(|f| f.radius)
    }

    /// Number of far-field points.
    pub fn far_len(&self) -> usize {
        self.far.as_ref().map_or(0, |f| f.points.iter().map(Vec::len).sum())
    }

    /// Class index of a critical value, if any.
    pub fn class_index(&self, d: Complex64) -> Option<usize> {
        self.classes
            .iter()
            .position(|cl| (cl.value - d).norm() <= VALUE_CLASS_TOL * (1.0 + d.norm()))
    }

    /// Per class `i`, `Σ_{c_k ∈ i} b_k γ_w(c_k)` over explicit and far points,
    /// in canonical order.
    pub fn class_gamma_sums(&self, w: Complex64) -> Vec<Complex64> {
        self.class_sums_with(|c| gamma_unchecked(w, c))
    }

    /// Per class `i`, `Σ_{c_k ∈ i} b_k g(c_k)`.
    pub fn class_sums_with(&self, g: impl Fn(Complex64) -> Complex64) -> Vec<Complex64> {
        let mut acc = vec![ComplexNeumaier::new(); self.classes.len()];
        for (k, e) in self.entries.iter().enumerate() {
            acc[self.entry_class[k]].add(e.b * g(e.c));
        }
        if let Some(far) = &self.far {
            for (i, pts) in far.points.iter().enumerate() {
                for &(c, b) in pts {
                    acc[i].add(b * g(c));
                }
            }
        }
        acc.iter().map(ComplexNeumaier::value).collect()
    }

    /// Bound on `Σ |b|/|c|³` over critical points that neither the entries
    /// nor the far field represent.
    pub fn neglected_tail(&self) -> f64 {
        self.neglected_tail
    }

    /// Bound on `|Σ_neglected b γ_w(c)|`, using
    /// `|γ_w(c)| ≤ |w(w−1)|/(|c|³ (1 − 1/r)(1 − |w|/r))` for `|c| ≥ r`.
    pub fn truncation_estimate(&self, w: Complex64) -> f64 {
        if self.neglected_tail == 0.0 {
            return 0.0;
        }
        let r = self.far_radius().unwrap_or(self.radius);
        if w.norm() >= r || r <= 1.0 {
            return f64::INFINITY;
        }
        (w * (w - 1.0)).norm() * self.neglected_tail / ((1.0 - 1.0 / r) * (1.0 - w.norm() / r))
    }

    /// Copy with the residue of entry `index` negated; far field untouched.
    pub fn with_negated_residue(&self, index: usize) -> Self {
        let mut out = self.clone();
        if let Some(e) = out.entries.get_mut(index) {
            e.b = -e.b;
        }
        out
    }

    /// Copy with every residue zero and no far field.
    pub fn with_zeroed_residues(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.b = c0();
        }
        out.far = None;
        out.tail_bound = 0.0;
        out.neglected_tail = 0.0;
        out
    }

    /// Copy with the residues of class `i` zeroed, far field included.
    pub fn with_zeroed_class(&self, i: usize) -> Self {
        let mut out = self.clone();
        for (k, e) in out.entries.iter_mut().enumerate() {
            if self.entry_class[k] == i {
                e.b = c0();
            }
        }
        if let Some(far) = &mut out.far {
            if let Some(pts) = far.points.get_mut(i) {
                pts.clear();
            }
        }
        out
    }

    /// Copy with the far field dropped; `tail_bound` is unchanged.
    pub fn without_far_field(&self) -> Self {
        let mut out = self.clone();
        out.far = None;
        out.neglected_tail = out.tail_bound;
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CriticalDataJson::from(self))?)
    }

    /// Entries are taken as given; ordering, classes and the far field are
    /// rebuilt deterministically.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CriticalDataJson = serde_json::from_str(text)?;
        let opts = CriticalOptions {
            far_field: raw.far_radius.is_some(),
            far_radius: raw.far_radius,
        };
        Self::assemble(raw.map, raw.radius, raw.entries, opts)
    }
}

#[derive(Serialize, Deserialize)]
struct CriticalDataJson {
    map: EntireMap,
    radius: f64,
    tail_bound: f64,
    #[serde(default)]
    far_radius: Option<f64>,
    entries: Vec<CriticalEntry>,
    value_classes: Vec<ValueClass>,
}

impl From<&CriticalData> for CriticalDataJson {
    fn from(cd: &CriticalData) -> Self {
        Self {
            map: cd.map.clone(),
            radius: cd.radius,
            tail_bound: cd.tail_bound,
            far_radius: cd.far_radius(),
            entries: cd.entries.clone(),
            value_classes: cd.classes.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sin_map() -> EntireMap {
        EntireMap::sine_family(c(0.0, 0.0), c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn sine_radius_ten_has_six_points() {
        let pts = critical_points(&sin_map(), 10.0).unwrap();
        assert_eq!(pts.len(), 6);
        for k in [-3i32, -2, -1, 0, 1, 2] {
            let want = FRAC_PI_2 + PI * k as f64;
            assert!(pts.iter().any(|z| (z - c(want, 0.0)).norm() < 1e-13));
        }
    }

    #[test]
    fn sine_family_shares_points() {
        let f = EntireMap::sine_family(c(0.4, -1.0), c(2.5, 0.5)).unwrap();
        let a = critical_points(&f, 10.0).unwrap();
        let b = critical_points(&sin_map(), 10.0).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn sine_residues() {
        let cd = critical_data(&sin_map(), 10.0).unwrap();
        for e in cd.entries() {
            let want = -1.0 / e.c.sin();
            assert!((e.b - want).norm() < 1e-14);
        }
        let plus = cd.entries().iter().find(|e| (e.c - c(FRAC_PI_2, 0.0)).norm() < 1e-12).unwrap();
        assert!((plus.b - c(-1.0, 0.0)).norm() < 1e-15);
        let minus = cd.entries().iter().find(|e| (e.c + c(FRAC_PI_2, 0.0)).norm() < 1e-12).unwrap();
        assert!((minus.b - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(cd.classes().len(), 2);
    }

    #[test]
    fn residue_check_detects_sign() {
        let f = sin_map();
        let cp = c(FRAC_PI_2, 0.0);
        assert!(residue_check(&f, cp, c(-1.0, 0.0), 1e-4).unwrap() <= 1e-3);
        assert!(residue_check(&f, -cp, c(1.0, 0.0), 1e-4).unwrap() <= 1e-3);
        let wrong = residue_check(&f, cp, c(1.0, 0.0), 1e-4).unwrap();
        assert!((wrong - 2.0).abs() < 1e-3);
    }

    #[test]
    fn tail_bound_against_brute_force() {
        for n in [3usize, 6, 12] {
            let cd = critical_data(&sin_map(), n as f64 * PI).unwrap();
            let allowed: f64 = 2.0 * (n..1_000_000).map(|k| (PI * (k as f64 - 0.5)).powi(-3)).sum::<f64>();
            let actual: f64 = 2.0 * (n + 1..1_000_000).map(|k| (PI * (k as f64 - 0.5)).powi(-3)).sum::<f64>();
            assert!(cd.tail_bound() <= allowed, "n={n}");
            assert!(cd.tail_bound() >= actual * (1.0 - 1e-12), "n={n}");
        }
    }

    #[test]
    fn tail_bound_decreases_like_inverse_square() {
        let radii = [10.0, 20.0, 40.0, 80.0, 160.0];
        let tails: Vec<f64> = radii
            .iter()
            .map(|&r| critical_data(&sin_map(), r).unwrap().tail_bound())
            .collect();
        assert!(tails.windows(2).all(|w| w[1] < w[0]));
        let slope = (tails[4] / tails[0]).ln() / (radii[4] / radii[0]).ln();
        assert!((slope + 2.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn winding_matches_count_with_linear_p1() {
        let f = EntireMap::new(
            Poly::from_real(&[0.0, 0.5]),
            Poly::from_real(&[0.0, 1.0]),
            Poly::z(),
        )
        .unwrap();
        let pts = critical_points(&f, 20.0).unwrap();
        for p in &pts {
            let want = p.cos() + 0.5;
            assert!(want.norm() < 1e-12);
        }
        assert_eq!(pts.len() as i64, winding_count(&f, 20.0, 1024).unwrap());
    }

    #[test]
    fn nonlinear_p3_enumerates() {
        let f = EntireMap::new(
            Poly::zero(),
            Poly::from_real(&[0.0, 1.0]),
            Poly::from_real(&[0.0, 0.0, 1.0]),
        )
        .unwrap();
        let pts = critical_points(&f, 4.0).unwrap();
        // f' = 2z cos(z²): z = 0 plus z² = π/2 + kπ.
        let mut want = 1;
        for k in 0..10 {
            let r2 = PI / 2.0 + PI * k as f64;
            if r2.sqrt() < 4.0 {
                want += 4;
            }
        }
        assert_eq!(pts.len(), want);
        assert!(critical_data(&f, 4.0).unwrap().tail_bound().is_finite());
    }

    #[test]
    fn canonical_order_makes_classes_reorder_invariant() {
        let cd = critical_data(&sin_map(), 20.0).unwrap();
        let mut shuffled = cd.entries().to_vec();
        shuffled.reverse();
        let cd2 = CriticalData::assemble(cd.map().clone(), cd.radius(), shuffled, CriticalOptions::default()).unwrap();
        assert_eq!(cd.entries(), cd2.entries());
        let w = c(0.3, 0.7);
        assert_eq!(cd.class_gamma_sums(w), cd2.class_gamma_sums(w));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let f = EntireMap::sine_family(c(0.3, 0.0), c(0.7, 0.0)).unwrap().normalize().unwrap();
        let cd = critical_data(&f, 12.0).unwrap();
        let back = CriticalData::from_json(&cd.to_json().unwrap()).unwrap();
        assert_eq!(back, cd);
    }
}
