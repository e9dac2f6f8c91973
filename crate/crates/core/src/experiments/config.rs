use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical_flow::PhasePoint;
use crate::error::{Error, Result};
use crate::quantum_propagator::PropagatorConfig;
use crate::symbols::ModelConfig;
use crate::wavefront_detector::{ProbeSearch, VerdictThresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    /// Number of random starting points drawn from `seed`.
    #[serde(default = "defaults::seeds")]
    pub seeds: usize,
    /// Explicit starting points used before the random ones.
    #[serde(default)]
    pub starts: Vec<PhasePoint>,
    /// Half-width of the position box for random starts.
    #[serde(default = "defaults::x_box")]
    pub x_box: f64,
    /// Range of `|xi|` for random starts.
    #[serde(default = "defaults::xi_range")]
    pub xi_range: [f64; 2],
    #[serde(default = "defaults::t_max")]
    pub t_max: f64,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::phase_tol")]
    pub phase_tol: f64,
    /// Tolerance of the effective-Hamiltonian reconstruction.
    #[serde(default = "defaults::consistency_tol")]
    pub consistency_tol: f64,
    /// Largest `|t|` of the reconstruction.
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    /// Scaling ladder of the high-energy limit.
    #[serde(default = "defaults::lambdas")]
    pub lambdas: Vec<f64>,
    /// Times of the high-energy limit.
    #[serde(default = "defaults::times")]
    pub times: Vec<f64>,
    /// Allowed high-energy limit versus asymptote discrepancy.
    #[serde(default = "defaults::limit_tol")]
    pub limit_tol: f64,
    /// Times of the phase-correction bounds.
    #[serde(default = "defaults::bound_times")]
    pub bound_times: Vec<f64>,
    #[serde(default = "defaults::bound_xi")]
    pub bound_xi: [f64; 2],
    #[serde(default = "defaults::slack")]
    pub slope_slack: f64,
    /// Allowed extrapolation error of the asymptotes.
    #[serde(default = "defaults::round_trip_tol")]
    pub asymptote_tol: f64,
    /// Allowed round-trip error of the wave maps.
    #[serde(default = "defaults::round_trip_tol")]
    pub round_trip_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    #[serde(default = "defaults::n")]
    pub n: usize,
    #[serde(default = "defaults::extent")]
    pub extent: f64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::absorb_fraction")]
    pub absorb_fraction: f64,
    #[serde(default = "defaults::absorb_strength")]
    pub absorb_strength: f64,
    #[serde(default = "defaults::truncation_fraction")]
    pub truncation_fraction: f64,
    #[serde(default = "defaults::max_norm_loss")]
    pub max_norm_loss: f64,
    /// Repeat lattice runs at `2 n`.
    #[serde(default = "defaults::yes")]
    pub refine: bool,
    /// Lattice of the weighted-norm checks.
    #[serde(default = "defaults::norm_n")]
    pub norm_n: usize,
    #[serde(default = "defaults::norm_extent")]
    pub norm_extent: f64,
}

impl GridSection {
    pub fn propagator(&self, strict: bool) -> PropagatorConfig {
        PropagatorConfig {
            dt: self.dt,
            absorb_fraction: self.absorb_fraction,
            absorb_strength: self.absorb_strength,
            truncation_fraction: self.truncation_fraction,
            max_norm_loss: self.max_norm_loss,
            strict,
        }
    }

    pub fn sizes(&self, n: usize) -> Vec<usize> {
        vec![n; self.dim]
    }

    pub fn extents(&self, l: f64) -> Vec<f64> {
        vec![l; self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "defaults::ladder")]
    pub ladder: Vec<f64>,
    #[serde(default)]
    pub thresholds: VerdictThresholds,
    /// Evolution time of the shift and smoothing checks.
    #[serde(default = "defaults::one")]
    pub t: f64,
    /// Coherent-state source of the shift check.
    #[serde(default = "defaults::source")]
    pub source: PhasePoint,
    #[serde(default)]
    pub search: ProbeSearch,
    /// Width of the Gaussian probed for smoothing.
    #[serde(default = "defaults::one")]
    pub width: f64,
    /// Width of the Gaussian used for the weighted norms.
    #[serde(default = "defaults::norm_width")]
    pub norm_width: f64,
    #[serde(default = "defaults::panel_x")]
    pub panel_x: Vec<f64>,
    #[serde(default = "defaults::panel_xi")]
    pub panel_xi: Vec<f64>,
    #[serde(default = "defaults::translate_radius")]
    pub translate_radius: f64,
    #[serde(default = "defaults::translates")]
    pub translates: usize,
    #[serde(default = "defaults::sigma_count")]
    pub sigma_count: usize,
    #[serde(default = "defaults::weights")]
    pub weights: Vec<u32>,
    #[serde(default = "defaults::max_spread")]
    pub max_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "defaults::out_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: defaults::out_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub flow: FlowSection,
    pub grid: GridSection,
    pub detector: DetectorSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
}

mod defaults {
    use std::path::PathBuf;

    use crate::classical_flow::PhasePoint;

    pub fn seeds() -> usize {
        5
    }
    pub fn x_box() -> f64 {
        1.0
    }
    pub fn xi_range() -> [f64; 2] {
        [0.5, 1.5]
    }
    pub fn t_max() -> f64 {
        1e4
    }
    pub fn tol() -> f64 {
        1e-11
    }
    pub fn phase_tol() -> f64 {
        1e-12
    }
    pub fn consistency_tol() -> f64 {
        1e-9
    }
    pub fn horizon() -> f64 {
        4.0
    }
    pub fn lambdas() -> Vec<f64> {
        (2..=10).map(|k| 2f64.powi(k)).collect()
    }
    pub fn times() -> Vec<f64> {
        vec![-1.0, 1.0]
    }
    pub fn limit_tol() -> f64 {
        1e-3
    }
    pub fn bound_times() -> Vec<f64> {
        vec![-2.0, -0.5, 0.5, 2.0]
    }
    pub fn bound_xi() -> [f64; 2] {
        [1.0, 1e3]
    }
    pub fn slack() -> f64 {
        0.1
    }
    pub fn round_trip_tol() -> f64 {
        1e-6
    }
    pub fn n() -> usize {
        4096
    }
    pub fn extent() -> f64 {
        175.0
    }
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn absorb_fraction() -> f64 {
        0.1
    }
    pub fn absorb_strength() -> f64 {
        20.0
    }
    pub fn truncation_fraction() -> f64 {
        0.8
    }
    pub fn max_norm_loss() -> f64 {
        0.1
    }
    pub fn yes() -> bool {
        true
    }
    pub fn norm_n() -> usize {
        512
    }
    pub fn norm_extent() -> f64 {
        10.0
    }
    pub fn ladder() -> Vec<f64> {
        vec![4.0, 8.0, 16.0, 32.0, 64.0]
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn source() -> PhasePoint {
        PhasePoint {
            x: vec![4.0],
            xi: vec![0.125],
        }
    }
    pub fn norm_width() -> f64 {
        0.35
    }
    pub fn panel_x() -> Vec<f64> {
        vec![-2.0, 0.0, 2.0]
    }
    pub fn panel_xi() -> Vec<f64> {
        vec![-1.2, 1.0, 1.2]
    }
    pub fn translate_radius() -> f64 {
        2.5
    }
    pub fn translates() -> usize {
        10
    }
    pub fn sigma_count() -> usize {
        5
    }
    pub fn weights() -> Vec<u32> {
        vec![1, 2]
    }
    pub fn max_spread() -> f64 {
        1e2
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn seed() -> u64 {
        20_240_601
    }
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key.path=value` overrides and validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        if !overrides.is_empty() {
            seed_nested_defaults(&mut table)?;
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::ConfigParse(m) => Error::ConfigParse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.dim;
        if d == 0 {
            return Err(Error::Configuration("model.dim must be positive".into()));
        }
        if self.grid.dim != d {
            return Err(Error::Configuration(format!(
                "grid.dim = {} but model.dim = {d}",
                self.grid.dim
            )));
        }
        for (i, p) in self.flow.starts.iter().enumerate() {
            if p.dim() != d || p.xi.len() != d {
                return Err(Error::Configuration(format!(
                    "flow.starts[{i}] does not have {d} components"
                )));
            }
        }
        let src = &self.detector.source;
        if src.x.len() != d || src.xi.len() != d {
            return Err(Error::Configuration(format!(
                "detector.source does not have {d} components"
            )));
        }
        let positive = [
            ("flow.t_max", self.flow.t_max),
            ("flow.tol", self.flow.tol),
            ("flow.phase_tol", self.flow.phase_tol),
            ("flow.consistency_tol", self.flow.consistency_tol),
            ("flow.horizon", self.flow.horizon),
            ("flow.limit_tol", self.flow.limit_tol),
            ("flow.slope_slack", self.flow.slope_slack),
            ("flow.asymptote_tol", self.flow.asymptote_tol),
            ("flow.round_trip_tol", self.flow.round_trip_tol),
            ("flow.x_box", self.flow.x_box),
            ("grid.extent", self.grid.extent),
            ("grid.dt", self.grid.dt),
            ("grid.norm_extent", self.grid.norm_extent),
            ("detector.width", self.detector.width),
            ("detector.norm_width", self.detector.norm_width),
            ("detector.max_spread", self.detector.max_spread),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Configuration(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let [lo, hi] = self.flow.xi_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Configuration(format!(
                "flow.xi_range [{lo}, {hi}] must be positive and ordered"
            )));
        }
        let [lo, hi] = self.flow.bound_xi;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Configuration(format!(
                "flow.bound_xi [{lo}, {hi}] must be positive and ordered"
            )));
        }
        if self.flow.seeds + self.flow.starts.len() == 0 {
            return Err(Error::Configuration(
                "flow needs at least one starting point".into(),
            ));
        }
        self.grid.propagator(false).validate()?;
        self.detector.thresholds.validate()?;
        self.detector.search.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("configuration serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Explicit starts followed by `flow.seeds` random ones drawn from
    /// `seed`: positions uniform in the box, `|xi|` uniform in the range
    /// with a uniformly random direction.
    pub fn starting_points(&self) -> Vec<PhasePoint> {
        let d = self.model.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = self.flow.starts.clone();
        let [lo, hi] = self.flow.xi_range;
        for _ in 0..self.flow.seeds {
            let x: Vec<f64> = (0..d)
                .map(|_| rng.random_range(-self.flow.x_box..=self.flow.x_box))
                .collect();
            let dir: Vec<f64> = loop {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if n > 1e-3 && n <= 1.0 {
                    break v.iter().map(|c| c / n).collect();
                }
            };
            let r = rng.random_range(lo..=hi);
            out.push(PhasePoint {
                x,
                xi: dir.iter().map(|c| c * r).collect(),
            });
        }
        out
    }
}

/// Sets `a.b.c = value` in a parsed table. The value is read as a TOML
/// literal when it parses as one, otherwise as a string.
/// Fills absent nested tables with their defaults so that a single-field
/// override such as `detector.source.x=[1.0]` keeps the other fields.
fn seed_nested_defaults(table: &mut toml::Table) -> Result<()> {
    let nested = [
        ("source", toml::Value::try_from(defaults::source())),
        ("search", toml::Value::try_from(ProbeSearch::default())),
    ];
    let detector = table
        .entry("detector")
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| Error::ConfigParse("`detector` is not a table".into()))?;
    for (key, value) in nested {
        if !detector.contains_key(key) {
            let value = value.map_err(|e| Error::ConfigParse(e.to_string()))?;
            detector.insert(key.to_string(), value);
        }
    }
    Ok(())
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::ConfigParse(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::ConfigParse(format!(
            "override path `{path}` has an empty segment"
        )));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = keys.split_last().expect("nonempty path");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::ConfigParse(format!("override path `{path}`: `{k}` is not a table"))
        })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
