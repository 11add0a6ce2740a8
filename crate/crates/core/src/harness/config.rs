//! Experiment configuration: a single JSON document plus `key=value`
//! overrides applied before deserialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::branching::{CountWidth, OffspringLaw};
use crate::error::Error;
use crate::exact_dist::DEFAULT_ELEMENT_BUDGET;
use crate::llt::identities::DEFAULT_PANELS;
use crate::step_law::{RawStepLaw, StepLaw};

/// Default output directory when the config names no output path.
pub const OUT_DIR_ENV: &str = "BRWLLT_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LltCheck,
    CoeffFit,
    Identities,
    MartingaleCheck,
    BrwCheck,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::LltCheck => "llt-check",
            ExperimentKind::CoeffFit => "coeff-fit",
            ExperimentKind::Identities => "identities",
            ExperimentKind::MartingaleCheck => "martingale-check",
            ExperimentKind::BrwCheck => "brw-check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringConfig {
    /// `p_k` for `k = 0, 1, …`
    pub probs: Vec<f64>,
}

/// Assertion thresholds. Every experiment checks the ones that apply to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// `|convolution − cf_invert|`
    pub dual_oracle: f64,
    /// `|defect| / (1 + |f|)`
    pub harmonicity: f64,
    /// Standard errors allowed in the one-step martingale check.
    pub mc_sigmas: f64,
    pub identity_rel: f64,
    pub c1_rel: f64,
    pub c2_rel: f64,
    /// Require decreasing trends (residual sups, medians, variances).
    pub trends: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            dual_oracle: 1e-9,
            harmonicity: 1e-9,
            mc_sigmas: 4.0,
            identity_rel: 1e-8,
            c1_rel: 0.01,
            c2_rel: 0.05,
            trends: true,
        }
    }
}

fn default_replicates() -> u64 {
    64
}
fn default_kappa() -> f64 {
    0.15
}
fn default_c_bound() -> f64 {
    1.0
}
fn default_budget() -> usize {
    DEFAULT_ELEMENT_BUDGET
}
fn default_panels() -> usize {
    DEFAULT_PANELS
}
fn default_harmonic_samples() -> usize {
    1000
}
fn default_mc_replicates() -> u64 {
    10_000
}
fn default_mc_parent_generation() -> u64 {
    3
}
fn default_trajectory_n_max() -> u64 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub step_law: RawStepLaw,
    #[serde(default)]
    pub offspring: Option<OffspringConfig>,
    /// Step counts (walk experiments) or probe generations (brw-check).
    #[serde(default)]
    pub n_values: Vec<u64>,
    /// Evaluation points; empty means every admissible point.
    #[serde(default)]
    pub z: Vec<Vec<i64>>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// `C` in `‖z‖ ≤ C·n^κ`.
    #[serde(default = "default_c_bound")]
    pub c_bound: f64,
    /// Generation at which limit estimates are frozen; defaults to the
    /// largest probe.
    #[serde(default)]
    pub n_est: Option<u64>,
    #[serde(default)]
    pub count_width: CountWidth,
    #[serde(default = "default_budget")]
    pub element_budget: usize,
    #[serde(default = "default_panels")]
    pub quadrature_panels: usize,
    #[serde(default = "default_harmonic_samples")]
    pub harmonic_samples: usize,
    #[serde(default = "default_mc_replicates")]
    pub mc_replicates: u64,
    #[serde(default = "default_mc_parent_generation")]
    pub mc_parent_generation: u64,
    #[serde(default = "default_trajectory_n_max")]
    pub trajectory_n_max: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Output CSV path. Not part of the config hash.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Parses `value` as JSON, falling back to a bare string.
fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets a dotted key (`thresholds.c2_rel`, `step_law.axes.0.1`) in a JSON tree.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), Error> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), parse_override_value(raw));
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` is not an array index in `{key}`")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range (len {len}) in `{key}`")))?;
                if last {
                    *slot = parse_override_value(raw);
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("`{key}` descends into a scalar"))),
        };
    }
    unreachable!("loop returns on the last key part")
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self, Error> {
        let mut doc: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(doc)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, overrides)
    }

    /// Structural checks that do not need the laws themselves.
    pub fn check(&self) -> Result<(), Error> {
        if !(self.kappa > 0.0 && self.kappa < 1.0 / 6.0) {
            return Err(Error::Config(format!("kappa = {} must lie in (0, 1/6)", self.kappa)));
        }
        if !(self.c_bound > 0.0 && self.c_bound.is_finite()) {
            return Err(Error::Config("c_bound must be positive".into()));
        }
        if let Some(bad) = self.z.iter().find(|z| z.len() != self.step_law.d) {
            return Err(Error::Config(format!(
                "z = {bad:?} does not have dimension {}",
                self.step_law.d
            )));
        }
        let needs_n = !matches!(
            self.experiment,
            ExperimentKind::Identities | ExperimentKind::MartingaleCheck
        );
        if needs_n && self.n_values.is_empty() {
            return Err(Error::Config("n_values must not be empty".into()));
        }
        if self.n_values.contains(&0) {
            return Err(Error::Config("n_values must be positive".into()));
        }
        let needs_offspring = matches!(
            self.experiment,
            ExperimentKind::MartingaleCheck | ExperimentKind::BrwCheck
        );
        if needs_offspring && self.offspring.is_none() {
            return Err(Error::Config(format!(
                "{} needs an offspring law",
                self.experiment.tag()
            )));
        }
        if self.experiment == ExperimentKind::BrwCheck && self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        Ok(())
    }

    pub fn law(&self) -> Result<StepLaw, Error> {
        Ok(StepLaw::validate(&self.step_law)?)
    }

    pub fn offspring_law(&self) -> Result<Option<OffspringLaw>, Error> {
        self.offspring
            .as_ref()
            .map(|o| OffspringLaw::validate(&o.probs).map_err(Error::from))
            .transpose()
    }

    /// Canonical JSON (sorted keys, defaults filled in, output path removed).
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("output");
        }
        v.to_string()
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Sorted, deduplicated step counts.
    pub fn schedule(&self) -> Vec<u64> {
        let mut n = self.n_values.clone();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// The configured output path, or `<$BRWLLT_OUT_DIR or .>/<experiment>-<hash>.csv`.
    pub fn output_path(&self) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        let dir = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
        dir.join(format!("{}-{}.csv", self.experiment.tag(), &self.hash()[..12]))
    }
}
