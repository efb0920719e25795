use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, DEFAULT_EN_BETA};
use crate::error::{Error, Result};
use crate::gnn::{Arch, TrainConfig};
use crate::graph::{load_dataset, make_synthetic_graph, DatasetFormat, Graph, LoadOptions, SyntheticSpec};
use crate::rl::RlConfig;

/// A baseline or the RL selection pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Baseline(BaselineKind),
    GraphSr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline(k) => k.name(),
            Method::GraphSr => "graphsr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("graphsr") {
            Ok(Method::GraphSr)
        } else {
            s.parse().map(Method::Baseline)
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset directory; ignored when `synthetic` is set.
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub drop_dangling_edges: bool,
    pub synthetic: Option<SyntheticSpec>,
    pub arch: Arch,
    pub method: Method,
    pub imbalance_ratio: f64,
    /// Explicit minority classes; when absent, `num_minority` classes are
    /// drawn from each seed.
    pub minority_classes: Option<Vec<usize>>,
    pub num_minority: usize,
    pub majority_count: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    /// Candidates kept per minority class.
    pub k: usize,
    pub en_beta: f64,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub run_id: Option<String>,
    /// Run seeds on the rayon pool.
    pub parallel: bool,
    pub train: TrainConfig,
    pub rl: RlConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            format: DatasetFormat::Canonical,
            drop_dangling_edges: false,
            synthetic: None,
            arch: Arch::Gcn,
            method: Method::GraphSr,
            imbalance_ratio: 0.3,
            minority_classes: None,
            num_minority: 3,
            majority_count: 20,
            val_per_class: 30,
            test_per_class: 100,
            k: 20,
            en_beta: DEFAULT_EN_BETA,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: None,
            run_id: None,
            parallel: true,
            train: TrainConfig::default(),
            rl: RlConfig::default(),
        }
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `a.b.c = value` inside a TOML table, creating tables as needed.
fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, then applies `key=value` overrides (dotted keys
    /// address nested tables, values are TOML literals or bare strings).
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            apply_override(&mut table, key.trim(), value.trim())?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.imbalance_ratio > 0.0 && self.imbalance_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "imbalance_ratio {} outside (0, 1]",
                self.imbalance_ratio
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.dataset.is_none() && self.synthetic.is_none() {
            return Err(Error::Config("either `dataset` or a [synthetic] table is required".into()));
        }
        self.train.validate()?;
        self.rl.validate()
    }

    pub fn load_graph(&self) -> Result<Graph> {
        if let Some(spec) = &self.synthetic {
            return make_synthetic_graph(spec);
        }
        let path = self
            .dataset
            .as_ref()
            .ok_or_else(|| Error::Config("no dataset configured".into()))?;
        load_dataset(
            path,
            self.format,
            LoadOptions {
                drop_dangling_edges: self.drop_dangling_edges,
            },
        )
    }

    /// Short dataset label for reports.
    pub fn dataset_name(&self) -> String {
        match (&self.synthetic, &self.dataset) {
            (Some(_), _) => "synthetic".to_string(),
            (None, Some(p)) => p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            (None, None) => "unknown".to_string(),
        }
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| {
            format!(
                "{}-{}-{}-rho{}",
                self.dataset_name(),
                self.arch,
                self.method,
                self.imbalance_ratio
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            "dataset = \"data/cora\"\nmethod = \"vanilla\"\n[rl]\nepochs = 3\n",
            &["rl.clip_eps=0.1".into(), "arch=sage".into(), "train.max_epochs=500".into()],
        )
        .unwrap();
        assert_eq!(cfg.method, Method::Baseline(BaselineKind::Vanilla));
        assert_eq!(cfg.arch, Arch::Sage);
        assert_eq!(cfg.rl.epochs, 3);
        assert_eq!(cfg.rl.clip_eps, 0.1);
        assert_eq!(cfg.train.max_epochs, 500);
        assert_eq!(cfg.k, 20);
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.dataset_name(), "cora");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("dataset = \"x\"\nimbalance_ratio = 0.0", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("dataset = \"x\"\nseeds = []", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("dataset = \"x\"\nbogus = 1", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("dataset = \"x\"", &["novalue".into()]).is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig {
            dataset: Some("d".into()),
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap(), &[]).unwrap();
        assert_eq!(back, cfg);
    }
}
