//! Experiment configuration: TOML schema, defaults, validation and
//! `key=value` overrides.
//!
//! Every table is optional and every key has a default, so an empty file is a
//! valid configuration. Unknown keys are rejected.
//!
//! ```toml
//! mode = "ssfl"            # ssfl | sfl | local
//! num_clients = 10
//! rounds = 40
//! steps_per_round = 10
//! batch_size = 32
//! seed = 1
//! layer_dims = [16, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32]   # input width, then 12 encoder widths
//! # target_accuracy = 0.9                     # for rounds-to-target in summaries
//!
//! [dataset]
//! num_classes = 10
//! input_dim = 16
//! train_size = 4000
//! test_size = 1000
//! cluster_spread = 1.0
//!
//! [partition]
//! concentration = 0.5
//! min_samples_per_client = 0
//!
//! [allocation]
//! alpha = 0.5
//! beta = 4.0
//! epsilon = 1e-8
//! # profiles = [{ memory_gb = 8.0, latency_ms = 50.0 }, ...]  # one per client, overrides sampling
//!
//! [tpgf]
//! tau = 0.5
//! eta = 0.05
//! epsilon = 1e-8
//! timeout_s = 5.0
//! fusion = "full"          # full | depth_only | loss_only | equal | { fixed = 0.3 }
//!
//! [aggregation]
//! lambda = 0.01
//! epsilon = 1e-8
//! renormalize_weights = false
//! resync_on_reconnect = false
//! audit = false
//!
//! [connectivity]
//! availability_p = 1.0
//!
//! [timing]
//! compute_s_per_flop = 1e-9
//!
//! [sfl]
//! # split_depth = 3        # defaults to floor(L / 2)
//! server_update = "federated"   # federated | sequential
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationConfig;
use crate::allocation::{AllocationConfig, ClientProfile};
use crate::error::{Error, Result};
use crate::tpgf::{FusionRule, TpgfConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Resource-aware splits with gradient fusion and local fallback.
    Ssfl,
    /// Baseline split federated learning: one split depth, server gradients only.
    Sfl,
    /// Clients train prefix and head locally; only aggregation is shared.
    Local,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ssfl => "ssfl",
            Mode::Sfl => "sfl",
            Mode::Local => "local",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub num_classes: usize,
    pub input_dim: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub cluster_spread: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { num_classes: 10, input_dim: 16, train_size: 4000, test_size: 1000, cluster_spread: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub concentration: f64,
    pub min_samples_per_client: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { concentration: 0.5, min_samples_per_client: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationSection {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<ClientProfile>>,
}

impl Default for AllocationSection {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 4.0, epsilon: 1e-8, profiles: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpgfSection {
    pub tau: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub timeout_s: f64,
    pub fusion: FusionRule,
}

impl Default for TpgfSection {
    fn default() -> Self {
        let d = TpgfConfig::default();
        Self { tau: d.tau, eta: d.eta, epsilon: d.epsilon, timeout_s: d.timeout_s, fusion: d.rule }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationSection {
    pub lambda: f64,
    pub epsilon: f64,
    pub renormalize_weights: bool,
    /// Overwrite a client's encoder with the global prefix as soon as the
    /// server becomes reachable again, instead of at the next aggregation.
    pub resync_on_reconnect: bool,
    /// Keep per-round, per-client weights and losses for audit output.
    pub audit: bool,
}

impl Default for AggregationSection {
    fn default() -> Self {
        Self { lambda: 0.01, epsilon: 1e-8, renormalize_weights: false, resync_on_reconnect: false, audit: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectivitySection {
    pub availability_p: f64,
}

impl Default for ConnectivitySection {
    fn default() -> Self {
        Self { availability_p: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub compute_s_per_flop: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self { compute_s_per_flop: 1e-9 }
    }
}

/// How the baseline's server-side layers are trained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerUpdate {
    /// One server-side copy per client, trained in parallel and averaged at
    /// the end of every round, like the client-side prefixes.
    #[default]
    Federated,
    /// A single server-side model updated by every client's batches in turn.
    Sequential,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SflSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_depth: Option<usize>,
    pub server_update: ServerUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub num_clients: usize,
    pub rounds: usize,
    pub steps_per_round: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub layer_dims: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_accuracy: Option<f64>,
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub allocation: AllocationSection,
    pub tpgf: TpgfSection,
    pub aggregation: AggregationSection,
    pub connectivity: ConnectivitySection,
    pub timing: TimingSection,
    pub sfl: SflSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Ssfl,
            num_clients: 10,
            rounds: 40,
            steps_per_round: 10,
            batch_size: 32,
            seed: 1,
            layer_dims: std::iter::once(16).chain(std::iter::repeat_n(32, 12)).collect(),
            target_accuracy: None,
            dataset: DatasetConfig::default(),
            partition: PartitionConfig::default(),
            allocation: AllocationSection::default(),
            tpgf: TpgfSection::default(),
            aggregation: AggregationSection::default(),
            connectivity: ConnectivitySection::default(),
            timing: TimingSection::default(),
            sfl: SflSection::default(),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be a finite positive number, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and >= 0, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be >= {min}, got {v}")))
    }
}

impl ExperimentConfig {
    /// Number of encoder layers `L`.
    pub fn total_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn sfl_split_depth(&self) -> usize {
        self.sfl.split_depth.unwrap_or(self.total_layers() / 2)
    }

    pub fn allocation_config(&self) -> AllocationConfig {
        AllocationConfig {
            alpha: self.allocation.alpha,
            beta: self.allocation.beta,
            epsilon: self.allocation.epsilon,
            total_layers: self.total_layers(),
        }
    }

    pub fn tpgf_config(&self) -> TpgfConfig {
        TpgfConfig {
            tau: self.tpgf.tau,
            eta: self.tpgf.eta,
            epsilon: self.tpgf.epsilon,
            timeout_s: self.tpgf.timeout_s,
            rule: self.tpgf.fusion,
        }
    }

    pub fn aggregation_config(&self) -> AggregationConfig {
        AggregationConfig {
            lambda: self.aggregation.lambda,
            epsilon: self.aggregation.epsilon,
            renormalize_weights: self.aggregation.renormalize_weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        at_least("num_clients", self.num_clients, 1)?;
        at_least("rounds", self.rounds, 1)?;
        at_least("steps_per_round", self.steps_per_round, 1)?;
        at_least("batch_size", self.batch_size, 1)?;
        if self.layer_dims.len() < 3 {
            return Err(Error::config("layer_dims", "need the input width plus at least two encoder widths"));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::config("layer_dims", "widths must be positive"));
        }
        if self.layer_dims[0] != self.dataset.input_dim {
            return Err(Error::config(
                "layer_dims",
                format!("first width {} must equal dataset.input_dim {}", self.layer_dims[0], self.dataset.input_dim),
            ));
        }
        if let Some(t) = self.target_accuracy {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("target_accuracy", format!("must lie in [0, 1], got {t}")));
            }
        }

        let d = &self.dataset;
        at_least("dataset.num_classes", d.num_classes, 2)?;
        at_least("dataset.input_dim", d.input_dim, 2)?;
        at_least("dataset.train_size", d.train_size, 10 * d.num_classes)?;
        at_least("dataset.test_size", d.test_size, 1)?;
        non_negative("dataset.cluster_spread", d.cluster_spread)?;

        positive("partition.concentration", self.partition.concentration)?;
        if self.partition.min_samples_per_client * self.num_clients > d.train_size {
            return Err(Error::config(
                "partition.min_samples_per_client",
                "minimum per client times num_clients exceeds the training set",
            ));
        }

        self.allocation_config().validate()?;
        if let Some(profiles) = &self.allocation.profiles {
            if profiles.len() != self.num_clients {
                return Err(Error::config(
                    "allocation.profiles",
                    format!("{} profiles for {} clients", profiles.len(), self.num_clients),
                ));
            }
            for (i, p) in profiles.iter().enumerate() {
                p.validate().map_err(|e| Error::config(format!("allocation.profiles[{i}]"), e.to_string()))?;
            }
        }

        positive("tpgf.tau", self.tpgf.tau)?;
        positive("tpgf.eta", self.tpgf.eta)?;
        positive("tpgf.epsilon", self.tpgf.epsilon)?;
        positive("tpgf.timeout_s", self.tpgf.timeout_s)?;
        self.tpgf.fusion.validate()?;

        non_negative("aggregation.lambda", self.aggregation.lambda)?;
        positive("aggregation.epsilon", self.aggregation.epsilon)?;

        let p = self.connectivity.availability_p;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config("connectivity.availability_p", format!("must lie in [0, 1], got {p}")));
        }
        non_negative("timing.compute_s_per_flop", self.timing.compute_s_per_flop)?;

        if self.mode == Mode::Sfl {
            let s = self.sfl_split_depth();
            if s == 0 || s >= self.total_layers() {
                return Err(Error::config(
                    "sfl.split_depth",
                    format!("must lie in [1, {}], got {s}", self.total_layers() - 1),
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        parse_with_overrides(text, &[], Path::new("<inline>"))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// A copy with `key=value` overrides applied, validated.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        parse_with_overrides(&self.to_toml_string(), overrides, Path::new("<overrides>"))
    }
}

/// Reads `path` (or starts from defaults when `None`), applies `key=value`
/// overrides in order, and validates. Overrides use dotted keys
/// (`tpgf.eta=0.1`) and TOML value syntax; bare words are taken as strings.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let (text, origin) = match path {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| Error::ConfigFile { path: p.to_path_buf(), msg: e.to_string() })?,
            p,
        ),
        None => (String::new(), Path::new("<defaults>")),
    };
    parse_with_overrides(&text, overrides, origin)
}

fn parse_with_overrides(text: &str, overrides: &[String], origin: &Path) -> Result<ExperimentConfig> {
    let file_err = |msg: String| Error::ConfigFile { path: origin.to_path_buf(), msg };
    let mut table: toml::Table = toml::from_str(text).map_err(|e| file_err(e.to_string()))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| file_err(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(item, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty path segment"));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a table")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn paper_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.allocation.alpha, c.allocation.beta), (0.5, 4.0));
        assert_eq!(c.aggregation.lambda, 0.01);
        assert_eq!(c.tpgf.tau, 0.5);
        assert_eq!(c.tpgf.timeout_s, 5.0);
        assert_eq!(c.partition.concentration, 0.5);
    }

    #[test]
    fn negative_lambda_names_key() {
        let err = ExperimentConfig::from_toml_str("[aggregation]\nlambda = -1.0\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "aggregation.lambda"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_toml_str("[tpgf]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = ExperimentConfig::from_toml_str("nope = true\n").unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }

    #[test]
    fn malformed_file_reports_line() {
        let err = ExperimentConfig::from_toml_str("rounds = 3\nseed = = 4\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn override_beats_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "num_clients = 7\n[tpgf]\neta = 0.2\n").unwrap();
        let cfg = parse_config(Some(&path), &["num_clients=12".into(), "tpgf.fusion=equal".into()]).unwrap();
        assert_eq!(cfg.num_clients, 12);
        assert_eq!(cfg.tpgf.eta, 0.2);
        assert_eq!(cfg.tpgf.fusion, FusionRule::Equal);
        let cfg = parse_config(Some(&path), &["tpgf.fusion={ fixed = 0.25 }".into()]).unwrap();
        assert_eq!(cfg.tpgf.fusion, FusionRule::Fixed(0.25));
    }

    #[test]
    fn bad_override() {
        assert!(parse_config(None, &["num_clients".into()]).is_err());
        assert!(parse_config(None, &["seed.x=1".into()]).is_err());
        assert!(parse_config(None, &["connectivity.availability_p=1.5".into()]).is_err());
    }

    #[test]
    fn mode_specific_checks() {
        assert!(parse_config(None, &["mode=sfl".into(), "sfl.split_depth=12".into()]).is_err());
        assert!(parse_config(None, &["mode=sfl".into(), "sfl.split_depth=11".into()]).is_ok());
        assert!(parse_config(None, &["layer_dims=[8, 4, 4]".into()]).is_err());
    }

    #[test]
    fn round_trip_with_profiles() {
        let mut cfg = ExperimentConfig { num_clients: 2, target_accuracy: Some(0.8), ..Default::default() };
        cfg.allocation.profiles = Some(vec![
            ClientProfile { memory_gb: 3.5, latency_ms: 40.0 },
            ClientProfile { memory_gb: 12.0, latency_ms: 180.0 },
        ]);
        cfg.tpgf.fusion = FusionRule::Fixed(0.3);
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
