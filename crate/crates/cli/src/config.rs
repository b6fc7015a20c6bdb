//! Run configuration: one JSON document, with command-line overrides.

use std::path::Path;

use num_complex::Complex64;
use ruelle_core::presets::{self, Bump};
use ruelle_core::{EntireMap, Error, Result};
use serde::{Deserialize, Serialize};

fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Orbit-series truncation.
    pub series: f64,
    /// Absolute tolerance on Ψ values.
    pub relation: f64,
    /// Relative closed-form vs branch-sum error.
    pub oracle: f64,
    pub defect: f64,
    /// Relative Möbius transport residual.
    pub transport: f64,
    pub classify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            series: 1e-14,
            relation: 1e-6,
            oracle: 1e-6,
            defect: 1e-6,
            transport: 1e-8,
            classify: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Nodes per side, endpoints included; `n → 2n − 1` nests grids.
    pub n: usize,
    /// `[re_min, re_max, im_min, im_max]`.
    pub rect: [f64; 4],
    /// `log|φ|` range mapped onto the gray levels.
    pub log_range: [f64; 2],
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 64,
            rect: [-3.0, 3.0, -3.0, 3.0],
            log_range: [-4.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Explicit map; takes precedence over `preset`.
    pub map: Option<EntireMap>,
    /// `landing` or `sine`.
    pub preset: String,
    /// Conjugate to fix 0 and 1 when the map does not already.
    pub normalize: bool,
    pub radius: f64,
    pub n_max: usize,
    pub tolerances: Tolerances,
    pub x_schedule: Vec<f64>,
    pub seed: u64,
    pub samples: usize,
    pub sample_rect: [f64; 4],
    pub sample_min_dist: f64,
    /// Inverse-branch window for direct sums.
    pub window: i64,
    /// Base critical value of the relation; defaults to the first summable class.
    pub d1: Option<[f64; 2]>,
    /// Point for `summability`; defaults to every critical-value class.
    pub point: Option<[f64; 2]>,
    /// γ bases for the oracle and contraction checks.
    pub bases: Vec<[f64; 2]>,
    pub transport_y: Vec<[f64; 2]>,
    pub bump: Bump,
    pub grid: GridSpec,
    /// Check names for `verify`; all when absent.
    pub checks: Option<Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: None,
            preset: "landing".into(),
            normalize: true,
            radius: 40.0,
            n_max: 200,
            tolerances: Tolerances::default(),
            x_schedule: vec![0.9, 0.99, 0.999, 0.9999],
            seed: 1,
            samples: 20,
            sample_rect: [-3.0, 3.0, -3.0, 3.0],
            sample_min_dist: 0.2,
            window: 200,
            d1: None,
            point: None,
            bases: vec![[-0.5, 0.3], [1.4, -0.5], [0.3, 0.8]],
            transport_y: vec![[2.0, 1.0], [-1.0, 2.0]],
            bump: Bump {
                center: Complex64::new(-0.6, 1.2),
                radius: 0.3,
            },
            grid: GridSpec::default(),
            checks: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        let tols = [t.series, t.relation, t.oracle, t.defect, t.transport, t.classify];
        if tols.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.radius > 0.0) || self.n_max == 0 || self.window < 1 || self.grid.n < 2 {
            return Err(Error::Config("radius, n_max, window and grid.n must be positive".into()));
        }
        if self.x_schedule.windows(2).any(|w| w[1] <= w[0]) || self.x_schedule.iter().any(|x| !(0.0..1.0).contains(x)) {
            return Err(Error::Config("x_schedule must increase within [0, 1)".into()));
        }
        let r = self.sample_rect;
        if !(r[0] < r[1] && r[2] < r[3]) {
            return Err(Error::Config("sample_rect must be [re_min, re_max, im_min, im_max]".into()));
        }
        Bump::new(self.bump.center, self.bump.radius)?;
        Ok(())
    }

    /// The normalized map named by the configuration.
    pub fn build_map(&self) -> Result<EntireMap> {
        let map = match (&self.map, self.preset.as_str()) {
            (Some(m), _) => m.clone(),
            (None, "landing") => return Ok(presets::landing_case()?.map),
            (None, "sine") => return presets::sine_standard(),
            (None, other) => return Err(Error::Config(format!("unknown preset {other:?}"))),
        };
        if self.normalize && !map.fixes_zero_and_one() {
            map.normalize()
        } else {
            Ok(map)
        }
    }

    pub fn bases(&self) -> Vec<Complex64> {
        self.bases.iter().map(|p| c(*p)).collect()
    }

    pub fn transport_y(&self) -> Vec<Complex64> {
        self.transport_y.iter().map(|p| c(*p)).collect()
    }

    pub fn d1(&self) -> Option<Complex64> {
        self.d1.map(c)
    }

    pub fn point(&self) -> Option<Complex64> {
        self.point.map(c)
    }
}

/// `re,im` on the command line.
pub fn parse_complex(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected RE,IM, got {s:?}"));
    }
    let re = parts[0].parse::<f64>().map_err(|e| e.to_string())?;
    let im = parts[1].parse::<f64>().map_err(|e| e.to_string())?;
    Ok([re, im])
}

pub fn parse_schedule(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad x value {p:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_json(r#"{"radiu": 3}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"radius": 10, "preset": "sine"}"#).unwrap();
        assert_eq!(cfg.radius, 10.0);
        assert_eq!(cfg.n_max, 200);
    }

    #[test]
    fn complex_and_schedule_parsing() {
        assert_eq!(parse_complex("1.5, -2").unwrap(), [1.5, -2.0]);
        assert!(parse_complex("1").is_err());
        assert_eq!(parse_schedule("0.5,0.9").unwrap(), vec![0.5, 0.9]);
    }
}
