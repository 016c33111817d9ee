//! Run configuration files.
//!
//! A config is a flat TOML document. Every hyperparameter accepts either a
//! single value or a list; lists span the grid explored by `sweep`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use graphboost::appnp::AppnpConfig;
use graphboost::boost::{AlphaRule, BoostConfig};
use graphboost::data::ColumnKind;
use graphboost::graph::{ExpertEdge, DEFAULT_EDGE_CAP, DEFAULT_PAIR_CAP};
use serde::Deserialize;

pub const DEFAULT_SPLIT: [f64; 3] = [0.64, 0.16, 0.2];
pub const DEFAULT_GRID_CAP: usize = 64;

/// A scalar or a list of candidate values.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Grid<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Grid<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Grid::One(v) => vec![v.clone()],
            Grid::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Labeled CSV used for fitting.
    pub data: Option<PathBuf>,
    #[serde(default = "default_label")]
    pub label: String,
    /// Train, validation and test fractions.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    /// Columns forced to a kind regardless of their cells.
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<String>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,

    #[serde(default = "default_estimators")]
    pub estimators: Grid<usize>,
    #[serde(default = "default_one")]
    pub boost_learning_rate: Grid<f64>,
    #[serde(default)]
    pub alpha_rule: AlphaRule,
    #[serde(default = "default_pair_cap")]
    pub pair_cap: usize,
    #[serde(default = "default_edge_cap")]
    pub edge_cap: usize,
    #[serde(default)]
    pub expert_edges: Vec<ExpertEdge>,

    #[serde(default = "default_hidden")]
    pub hidden: Grid<usize>,
    #[serde(default = "default_steps")]
    pub steps: Grid<usize>,
    #[serde(default = "default_teleport")]
    pub teleport: Grid<f64>,
    #[serde(default = "default_dropout")]
    pub dropout: Grid<f64>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: Grid<f64>,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: Grid<f64>,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: Grid<usize>,
    #[serde(default = "default_patience")]
    pub patience: Grid<usize>,

    /// Largest grid `sweep` will enumerate.
    #[serde(default = "default_grid_cap")]
    pub grid_cap: usize,
}

fn default_label() -> String {
    "label".into()
}
fn default_split() -> [f64; 3] {
    DEFAULT_SPLIT
}
fn default_estimators() -> Grid<usize> {
    Grid::One(BoostConfig::default().estimators)
}
fn default_one() -> Grid<f64> {
    Grid::One(1.0)
}
fn default_pair_cap() -> usize {
    DEFAULT_PAIR_CAP
}
fn default_edge_cap() -> usize {
    DEFAULT_EDGE_CAP
}
fn default_hidden() -> Grid<usize> {
    Grid::One(AppnpConfig::default().hidden)
}
fn default_steps() -> Grid<usize> {
    Grid::One(AppnpConfig::default().steps)
}
fn default_teleport() -> Grid<f64> {
    Grid::One(AppnpConfig::default().teleport)
}
fn default_dropout() -> Grid<f64> {
    Grid::One(AppnpConfig::default().dropout)
}
fn default_learning_rate() -> Grid<f64> {
    Grid::One(AppnpConfig::default().learning_rate)
}
fn default_weight_decay() -> Grid<f64> {
    Grid::One(AppnpConfig::default().weight_decay)
}
fn default_max_epochs() -> Grid<usize> {
    Grid::One(AppnpConfig::default().max_epochs)
}
fn default_patience() -> Grid<usize> {
    Grid::One(AppnpConfig::default().patience)
}
fn default_grid_cap() -> usize {
    DEFAULT_GRID_CAP
}

impl RunConfig {
    /// Parses `text`; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        for p in [&mut cfg.data, &mut cfg.model, &mut cfg.report].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    fn check(&self) -> anyhow::Result<()> {
        let lens = [
            ("estimators", self.estimators.values().len()),
            ("boost_learning_rate", self.boost_learning_rate.values().len()),
            ("hidden", self.hidden.values().len()),
            ("steps", self.steps.values().len()),
            ("teleport", self.teleport.values().len()),
            ("dropout", self.dropout.values().len()),
            ("learning_rate", self.learning_rate.values().len()),
            ("weight_decay", self.weight_decay.values().len()),
            ("max_epochs", self.max_epochs.values().len()),
            ("patience", self.patience.values().len()),
        ];
        if let Some((key, _)) = lens.iter().find(|(_, n)| *n == 0) {
            bail!("`{key}` must not be an empty list");
        }
        if let Some(c) = self.categorical.iter().find(|c| self.numeric.contains(c)) {
            bail!("column `{c}` is listed as both categorical and numeric");
        }
        Ok(())
    }

    pub fn kind_hints(&self) -> std::collections::HashMap<String, ColumnKind> {
        self.categorical
            .iter()
            .map(|c| (c.clone(), ColumnKind::Categorical))
            .chain(self.numeric.iter().map(|c| (c.clone(), ColumnKind::Numeric)))
            .collect()
    }

    /// Number of grid points before deduplication.
    pub fn grid_size(&self) -> usize {
        self.estimators.values().len()
            * self.boost_learning_rate.values().len()
            * self.hidden.values().len()
            * self.steps.values().len()
            * self.teleport.values().len()
            * self.dropout.values().len()
            * self.learning_rate.values().len()
            * self.weight_decay.values().len()
            * self.max_epochs.values().len()
            * self.patience.values().len()
    }

    /// Every distinct grid point, in a fixed enumeration order.
    pub fn points(&self) -> anyhow::Result<Vec<BoostConfig>> {
        let size = self.grid_size();
        if size > self.grid_cap {
            bail!(
                "grid has {size} points, more than grid_cap = {}",
                self.grid_cap
            );
        }
        let mut out: Vec<BoostConfig> = Vec::new();
        for estimators in self.estimators.values() {
            for boost_lr in self.boost_learning_rate.values() {
                for hidden in self.hidden.values() {
                    for steps in self.steps.values() {
                        for teleport in self.teleport.values() {
                            for dropout in self.dropout.values() {
                                for learning_rate in self.learning_rate.values() {
                                    for weight_decay in self.weight_decay.values() {
                                        for max_epochs in self.max_epochs.values() {
                                            for patience in self.patience.values() {
                                                let point = BoostConfig {
                                                    estimators,
                                                    learning_rate: boost_lr,
                                                    weak: AppnpConfig {
                                                        hidden,
                                                        steps,
                                                        teleport,
                                                        dropout,
                                                        learning_rate,
                                                        weight_decay,
                                                        max_epochs,
                                                        patience,
                                                        seed: 0,
                                                    },
                                                    expert_edges: self.expert_edges.clone(),
                                                    workers: self.workers,
                                                    seed: self.seed,
                                                    pair_cap: self.pair_cap,
                                                    edge_cap: self.edge_cap,
                                                    alpha_rule: self.alpha_rule,
                                                };
                                                if !out.contains(&point) {
                                                    out.push(point);
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        for p in &out {
            p.validate()?;
        }
        Ok(out)
    }

    /// The single configuration `train` uses; grids are rejected.
    pub fn single(&self) -> anyhow::Result<BoostConfig> {
        let mut points = self.points()?;
        if points.len() != 1 {
            bail!(
                "config describes {} grid points; `train` needs exactly one (use `sweep`)",
                points.len()
            );
        }
        Ok(points.remove(0))
    }
}
