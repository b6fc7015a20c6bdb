//! Subcommand bodies. Each returns the document to write and whether every
//! check it ran passed.

use num_complex::Complex64;
use ruelle_core::critical::{critical_data, CriticalData};
use ruelle_core::gamma::GammaCombination;
use ruelle_core::harness::{contraction_check, duality_check, CheckResult, DualityConfig};
use ruelle_core::presets::sample_points;
use ruelle_core::relation::{
    defect_identity, instability_verdict, mobius_transport, phi_combination, psi_coefficients, theorem_b_system,
};
use ruelle_core::ruelle::{apply, apply_direct_combo, BranchWindow};
use ruelle_core::series::{limit_x_to_1, LimitTarget};
use ruelle_core::summability::{classify, classify_classes, classify_value, csv_row, separation_diagnostics, Verdict, CSV_HEADER};
use ruelle_core::{EntireMap, Error, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const CHECK_NAMES: [&str; 5] = ["oracle", "contraction", "defect", "transport", "duality"];

pub fn cmd_critical(cfg: &RunConfig) -> Result<String> {
    let map = cfg.build_map()?;
    critical_data(&map, cfg.radius)?.to_json()
}

pub fn cmd_summability(cfg: &RunConfig, csv: bool) -> Result<String> {
    let map = cfg.build_map()?;
    let tol = cfg.tolerances.classify;
    let reports = match cfg.point() {
        Some(p) => vec![(p, classify(&map, p, cfg.n_max, tol)?)],
        None => {
            let cd = critical_data(&map, cfg.radius)?;
            cd.class_values()
                .into_iter()
                .zip(classify_classes(&cd, cfg.n_max, tol))
                .map(|(d, r)| r.map(|r| (d, r)))
                .collect::<Result<_>>()?
        }
    };
    if csv {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (p, r) in &reports {
            out.push_str(&csv_row(*p, r));
            out.push('\n');
        }
        return Ok(out);
    }
    let docs: Vec<Value> = reports
        .iter()
        .map(|(p, r)| {
            let diag = separation_diagnostics(&map, *p, cfg.n_max).ok();
            json!({"input": [p.re, p.im], "report": r, "separation": diag})
        })
        .collect();
    Ok(serde_json::to_string_pretty(&docs)?)
}

/// `d1` from the configuration, else the first summable critical value.
pub fn choose_d1(cfg: &RunConfig, cd: &CriticalData) -> Result<Complex64> {
    if let Some(d) = cfg.d1() {
        return Ok(d);
    }
    for d in cd.class_values() {
        if let Ok(r) = classify_value(cd.map(), d, cfg.n_max, cfg.tolerances.classify) {
            if r.verdict == Verdict::Summable {
                return Ok(d);
            }
        }
    }
    Err(Error::Precondition("no critical value is classified summable".into()))
}

pub fn cmd_relation(cfg: &RunConfig) -> Result<String> {
    let map = cfg.build_map()?;
    let cd = critical_data(&map, cfg.radius)?;
    let d1 = choose_d1(cfg, &cd)?;
    let report = psi_coefficients(&cd, d1, cfg.n_max, cfg.tolerances.relation)?;
    let verdict = instability_verdict(&report);
    let summable: Vec<Complex64> = cd
        .class_values()
        .into_iter()
        .filter(|d| {
            classify_value(&map, *d, cfg.n_max, cfg.tolerances.classify).is_ok_and(|r| r.verdict == Verdict::Summable)
        })
        .collect();
    let rank = theorem_b_system(&cd, &summable, cfg.n_max, cfg.tolerances.relation).ok();
    let limit = cd.entries().first().and_then(|e| {
        limit_x_to_1(&map, &cfg.x_schedule, d1, LimitTarget::Point(e.c), cfg.n_max, cfg.tolerances.series).ok()
    });
    Ok(serde_json::to_string_pretty(&json!({
        "relation": report,
        "verdict": verdict,
        "rank": rank,
        "limit": limit,
    }))?)
}

fn sample_set(cfg: &RunConfig, map: &EntireMap, cd: &CriticalData, d1: Option<Complex64>) -> Result<Vec<Complex64>> {
    let mut avoid = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    avoid.extend(cd.class_values());
    avoid.extend(cfg.bases());
    for a in cfg.bases() {
        avoid.push(map.f(a)?);
    }
    if let Some(d) = d1 {
        let (phi, _) = phi_combination(map, d, cfg.n_max, cfg.tolerances.series)?;
        avoid.extend(phi.poles());
    }
    sample_points(cfg.seed, cfg.samples, cfg.sample_rect, &avoid, cfg.sample_min_dist)
}

fn oracle_check(cfg: &RunConfig, cd: &CriticalData, samples: &[Complex64]) -> Result<CheckResult> {
    let win = BranchWindow::new(cfg.window)?;
    let mut worst: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for a in cfg.bases() {
        let phi = GammaCombination::single(a)?;
        let closed = apply(cd, &phi)?;
        for &z in samples {
            let direct = apply_direct_combo(cd.map(), &phi, z, win)?;
            worst = worst.max((closed.eval(z)? - direct.value).norm() / direct.value.norm());
            tail = tail.max(direct.tail_estimate / direct.value.norm());
        }
    }
    Ok(CheckResult::new("oracle", worst, cfg.tolerances.oracle, 0.0).with_detail(json!({"direct_tail": tail})))
}

/// The verification suite on the configured map. `fault` negates the residue
/// of the first critical entry before any check runs.
pub fn run_checks(cfg: &RunConfig, names: &[String], fault: bool) -> Result<Vec<CheckResult>> {
    for n in names {
        if !CHECK_NAMES.contains(&n.as_str()) {
            return Err(Error::Config(format!("unknown check {n:?}; known: {}", CHECK_NAMES.join(", "))));
        }
    }
    if names.is_empty() {
        return Ok(Vec::new());
    }
    let map = cfg.build_map()?;
    let mut cd = critical_data(&map, cfg.radius)?;
    if fault {
        cd = cd.with_negated_residue(0);
    }
    let wants = |n: &str| names.iter().any(|x| x == n);
    let needs_d1 = wants("defect") || wants("transport");
    let d1 = if needs_d1 { Some(choose_d1(cfg, &cd)?) } else { None };
    let samples = sample_set(cfg, &map, &cd, d1)?;
    let mut out = Vec::new();
    if wants("oracle") {
        out.push(oracle_check(cfg, &cd, &samples)?);
    }
    if wants("contraction") {
        for (i, a) in cfg.bases().into_iter().enumerate() {
            let mut r = contraction_check(&cd, &GammaCombination::single(a)?, None)?;
            r.name = format!("contraction[{i}]");
            out.push(r);
        }
    }
    if let Some(d1) = d1 {
        if wants("defect") {
            let report = psi_coefficients(&cd, d1, cfg.n_max, cfg.tolerances.relation)?;
            let n_terms = report.n_used.max(2);
            let d = defect_identity(&cd, &report, &samples, n_terms, BranchWindow::new(cfg.window)?)?;
            out.push(
                CheckResult::new("defect", d.max_residual, cfg.tolerances.defect, 0.0)
                    .with_detail(json!({"n_terms": n_terms, "rejected": d.rejected.len(), "direct_tail": d.direct_tail})),
            );
        }
        if wants("transport") {
            let mut runs = Vec::new();
            for y in cfg.transport_y() {
                let t = mobius_transport(&map, d1, y, &samples, cfg.n_max, cfg.tolerances.series)?;
                out.push(
                    CheckResult::new(format!("transport[{}]", runs.len()), t.max_residual / t.scale, cfg.tolerances.transport, 0.0)
                        .with_detail(json!({"y": [y.re, y.im], "tail": t.tail, "rejected": t.rejected.len()})),
                );
                runs.push(t);
            }
            if runs.len() >= 2 {
                let spread = runs.iter().map(|t| t.max_residual).fold(0.0, f64::max)
                    - runs.iter().map(|t| t.max_residual).fold(f64::INFINITY, f64::min);
                let tails: f64 = runs.iter().map(|t| t.tail * t.scale).sum();
                let scale = runs.iter().map(|t| t.scale).fold(0.0, f64::max);
                out.push(CheckResult::new("transport_agreement", spread, tails, cfg.tolerances.transport * scale));
            }
        }
    }
    if wants("duality") {
        let phi = GammaCombination::single(cfg.bases().first().copied().ok_or_else(|| Error::Config("no bases".into()))?)?;
        let dcfg = DualityConfig {
            k_range: cfg.window,
            ..DualityConfig::default()
        };
        out.push(duality_check(&cd, &cfg.bump, &phi, &dcfg)?);
    }
    Ok(out)
}

pub struct Field {
    pub csv: String,
    pub pgm: String,
    pub rows: usize,
}

/// `φ = A(1, d₁, ·)` on the configured grid: CSV with full precision and a
/// text graymap of clipped `log|φ|`, pole pixels saturated.
pub fn cmd_field(cfg: &RunConfig) -> Result<Field> {
    let map = cfg.build_map()?;
    let cd = critical_data(&map, cfg.radius)?;
    let d1 = choose_d1(cfg, &cd)?;
    let (phi, _) = phi_combination(&map, d1, cfg.n_max, cfg.tolerances.series)?;
    field_of(&phi, cfg)
}

pub fn grid_node(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * (i as f64 / (n - 1) as f64)
}

pub fn field_of(phi: &GammaCombination, cfg: &RunConfig) -> Result<Field> {
    let g = &cfg.grid;
    let n = g.n;
    let [re0, re1, im0, im1] = g.rect;
    let [lo, hi] = g.log_range;
    let mut csv = String::from("re,im,value_re,value_im,log_abs\n");
    let mut pix = vec![0u8; n * n];
    // Rows run from the top (largest imaginary part) down.
    for row in 0..n {
        let im = grid_node(im0, im1, n - 1 - row, n);
        for col in 0..n {
            let re = grid_node(re0, re1, col, n);
            let z = Complex64::new(re, im);
            let v = phi.eval_unchecked(z);
            let l = v.norm().ln();
            csv.push_str(&format!("{re:e},{im:e},{:e},{:e},{l:e}\n", v.re, v.im));
            let level = if l.is_finite() {
                (((l - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                255
            };
            pix[row * n + col] = level;
        }
    }
    let mut poles = phi.poles();
    poles.extend([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    for p in poles {
        let col = ((p.re - re0) / (re1 - re0) * (n - 1) as f64).round();
        let row = ((im1 - p.im) / (im1 - im0) * (n - 1) as f64).round();
        if (0.0..n as f64).contains(&col) && (0.0..n as f64).contains(&row) {
            pix[row as usize * n + col as usize] = 255;
        }
    }
    let mut pgm = format!("P2\n{n} {n}\n255\n");
    for row in pix.chunks(n) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        pgm.push_str(&line.join(" "));
        pgm.push('\n');
    }
    Ok(Field { csv, pgm, rows: n * n })
}
