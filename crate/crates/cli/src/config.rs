//! Experiment configuration. Every hyperparameter is a named field whose
//! default is the standard Leduc setting (buffers of one million, 1500
//! traversals, 750 value updates and 5000 average updates of batch 2048,
//! three layers of 64 units).

use std::path::PathBuf;

use sdcfr_core::deep_cfr::{AdvantageMode, DeepCfrConfig};
use sdcfr_core::games::LeducConfig;
use sdcfr_core::nn::TrainConfig;
use sdcfr_core::sd_cfr::ModelStorage;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Kuhn,
    Leduc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSection {
    pub kind: GameKind,
    pub n_ranks: u8,
    pub n_suits: u8,
    pub max_raises_per_round: u8,
    pub ante: i32,
    pub bet_sizes: [i32; 2],
    /// Node limit when the full tree is built for exact evaluation.
    pub tree_budget: usize,
}

impl Default for GameSection {
    fn default() -> Self {
        let l = LeducConfig::default();
        GameSection {
            kind: GameKind::Leduc,
            n_ranks: l.n_ranks,
            n_suits: l.n_suits,
            max_raises_per_round: l.max_raises_per_round,
            ante: l.ante,
            bet_sizes: l.bet_sizes,
            tree_budget: 20_000_000,
        }
    }
}

impl GameSection {
    pub fn leduc(&self) -> LeducConfig {
        LeducConfig {
            n_ranks: self.n_ranks,
            n_suits: self.n_suits,
            max_raises_per_round: self.max_raises_per_round,
            ante: self.ante,
            bet_sizes: self.bet_sizes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    TabularVanilla,
    TabularLinear,
    DeepCfr,
    /// Deep CFR and SD-CFR evaluated from the same value networks.
    SdCfrShared,
}

impl Algorithm {
    pub fn is_tabular(self) -> bool {
        matches!(self, Algorithm::TabularVanilla | Algorithm::TabularLinear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Simultaneous,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub updates: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub grad_clip: f64,
}

impl TrainSection {
    fn from_train(c: TrainConfig) -> Self {
        TrainSection {
            batch_size: c.batch_size,
            updates: c.n_updates,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            grad_clip: c.grad_clip,
        }
    }

    pub fn value_default() -> Self {
        Self::from_train(TrainConfig::value_default())
    }

    pub fn average_default() -> Self {
        Self::from_train(TrainConfig::average_default())
    }

    pub fn to_train(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            n_updates: self.updates,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            grad_clip: self.grad_clip,
        }
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        let f = |name: &str| format!("{field}.{name}");
        if self.batch_size == 0 {
            return Err(CliError::config(&f("batch_size"), "must be positive"));
        }
        if self.updates == 0 {
            return Err(CliError::config(&f("updates"), "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CliError::config(&f("learning_rate"), "must be a positive number"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CliError::config(&f("beta1"), "betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(CliError::config(&f("epsilon"), "must be positive"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(CliError::config(&f("grad_clip"), "must be positive"));
        }
        Ok(())
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        Self::value_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageKind {
    KeepAll,
    Reservoir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBufferSection {
    pub storage: StorageKind,
    /// Networks kept per player in reservoir mode.
    pub capacity: usize,
    /// Extra reservoir buffers fed the same networks, evaluated alongside.
    pub probes: Vec<usize>,
    /// Write every value network to disk (required for resume).
    pub checkpoints: bool,
}

impl Default for ModelBufferSection {
    fn default() -> Self {
        ModelBufferSection { storage: StorageKind::KeepAll, capacity: 1000, probes: Vec::new(), checkpoints: true }
    }
}

impl ModelBufferSection {
    pub fn storage(&self) -> ModelStorage {
        match self.storage {
            StorageKind::KeepAll => ModelStorage::KeepAll,
            StorageKind::Reservoir => ModelStorage::Reservoir(self.capacity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Prefix of run ids; a run is `{name}-s{seed}`.
    pub name: String,
    pub algorithm: Algorithm,
    pub iterations: u64,
    /// Evaluate every this many iterations (and always at the last one).
    pub eval_every: u64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Update schedule for the tabular algorithms.
    pub tabular_updates: UpdateMode,
    pub traversals: u64,
    pub advantage_capacity: usize,
    pub strategy_capacity: usize,
    pub hidden: Vec<usize>,
    pub game: GameSection,
    pub value_net: TrainSection,
    pub average_net: TrainSection,
    pub model_buffer: ModelBufferSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "leduc".into(),
            algorithm: Algorithm::SdCfrShared,
            iterations: 150,
            eval_every: 10,
            seeds: vec![0],
            out: PathBuf::from("runs"),
            tabular_updates: UpdateMode::Simultaneous,
            traversals: 1500,
            advantage_capacity: 1_000_000,
            strategy_capacity: 1_000_000,
            hidden: vec![64, 64, 64],
            game: GameSection::default(),
            value_net: TrainSection::value_default(),
            average_net: TrainSection::average_default(),
            model_buffer: ModelBufferSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::config("name", "must be a non-empty file name"));
        }
        if self.iterations == 0 {
            return Err(CliError::config("iterations", "must be positive"));
        }
        if self.eval_every == 0 {
            return Err(CliError::config("eval_every", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds", "list at least one seed"));
        }
        if self.game.kind == GameKind::Leduc {
            self.game.leduc().validate().map_err(|e| CliError::config("game", e.to_string()))?;
        }
        if self.game.tree_budget == 0 {
            return Err(CliError::config("game.tree_budget", "must be positive"));
        }
        if !self.algorithm.is_tabular() {
            if self.traversals == 0 {
                return Err(CliError::config("traversals", "must be positive"));
            }
            if self.advantage_capacity == 0 {
                return Err(CliError::config("advantage_capacity", "must be positive"));
            }
            if self.strategy_capacity == 0 {
                return Err(CliError::config("strategy_capacity", "must be positive"));
            }
            if self.hidden.contains(&0) {
                return Err(CliError::config("hidden", "layer widths must be positive"));
            }
            self.value_net.validate("value_net")?;
            self.average_net.validate("average_net")?;
            if self.model_buffer.storage == StorageKind::Reservoir && self.model_buffer.capacity == 0 {
                return Err(CliError::config("model_buffer.capacity", "must be positive"));
            }
            if self.model_buffer.probes.contains(&0) {
                return Err(CliError::config("model_buffer.probes", "capacities must be positive"));
            }
        }
        Ok(())
    }

    pub fn run_id(&self, seed: u64) -> String {
        format!("{}-s{seed}", self.name)
    }

    /// Core training configuration for one seed.
    pub fn deep_config(&self, seed: u64, checkpoint_dir: Option<PathBuf>) -> DeepCfrConfig {
        DeepCfrConfig {
            traversals: self.traversals,
            advantage_capacity: self.advantage_capacity,
            strategy_capacity: self.strategy_capacity,
            hidden: self.hidden.clone(),
            value_train: self.value_net.to_train(),
            fill_strategy_buffer: true,
            seed,
            record_keys: false,
            mode: AdvantageMode::Network,
            checkpoint_dir,
            model_storage: self.model_buffer.storage(),
        }
    }

    /// Built-in experiment recipes.
    pub fn recipe(name: &str) -> Option<Self> {
        let base = ExperimentConfig::default();
        let cfg = match name {
            // two exploitability curves per seed from shared value networks
            "fig1a" => ExperimentConfig { name: "fig1a".into(), seeds: (0..5).collect(), ..base },
            // the same run with reservoir buffers of networks evaluated alongside
            "fig1b" => ExperimentConfig {
                name: "fig1b".into(),
                iterations: 3000,
                eval_every: 100,
                seeds: (0..3).collect(),
                model_buffer: ModelBufferSection { probes: vec![250, 500, 1000], ..ModelBufferSection::default() },
                ..base
            },
            "bigleduc" => ExperimentConfig {
                name: "bigleduc".into(),
                traversals: 8800,
                advantage_capacity: 4_000_000,
                strategy_capacity: 4_000_000,
                game: GameSection { n_ranks: 12, max_raises_per_round: 6, ..GameSection::default() },
                value_net: TrainSection { batch_size: 2816, updates: 1200, ..TrainSection::value_default() },
                average_net: TrainSection { batch_size: 5632, updates: 10_000, ..TrainSection::average_default() },
                ..base
            },
            // reduced profile that finishes in minutes on one core
            "smoke" => ExperimentConfig {
                name: "smoke".into(),
                eval_every: 30,
                seeds: (0..3).collect(),
                traversals: 300,
                value_net: TrainSection { updates: 150, ..TrainSection::value_default() },
                average_net: TrainSection { updates: 1000, ..TrainSection::average_default() },
                ..base
            },
            "kuhn" => ExperimentConfig {
                name: "kuhn".into(),
                algorithm: Algorithm::TabularVanilla,
                iterations: 10_000,
                eval_every: 1000,
                game: GameSection { kind: GameKind::Kuhn, ..GameSection::default() },
                ..base
            },
            _ => return None,
        };
        Some(cfg)
    }

    pub const RECIPES: [&'static str; 5] = ["fig1a", "fig1b", "bigleduc", "smoke", "kuhn"];
}

/// Line diff of two serialized configs: `-` lines only in `old`, `+` only in `new`.
pub fn config_diff(old: &str, new: &str) -> String {
    let a: Vec<&str> = old.lines().collect();
    let b: Vec<&str> = new.lines().collect();
    let mut out = String::new();
    for l in &a {
        if !b.contains(l) {
            out.push_str(&format!("- {l}\n"));
        }
    }
    for l in &b {
        if !a.contains(l) {
            out.push_str(&format!("+ {l}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.value_net.updates, 750);
        assert_eq!(cfg.average_net.updates, 5000);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("iterations = 20\n[game]\nkind = \"kuhn\"\n").unwrap();
        assert_eq!(cfg.iterations, 20);
        assert_eq!(cfg.game.kind, GameKind::Kuhn);
        assert_eq!(cfg.traversals, 1500);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_toml("traversals = 0").unwrap_err();
        assert!(e.to_string().contains("traversals"), "{e}");
        let e = ExperimentConfig::from_toml("[value_net]\nbatch_size = 0").unwrap_err();
        assert!(e.to_string().contains("value_net.batch_size"), "{e}");
        assert!(matches!(ExperimentConfig::from_toml("bogus = 1"), Err(CliError::Parse(_))));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn recipes_validate() {
        for r in ExperimentConfig::RECIPES {
            ExperimentConfig::recipe(r).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::recipe("nope").is_none());
    }

    #[test]
    fn diff_lists_changed_lines() {
        let d = config_diff("a = 1\nb = 2\n", "a = 1\nb = 3\n");
        assert_eq!(d, "- b = 2\n+ b = 3\n");
    }
}
