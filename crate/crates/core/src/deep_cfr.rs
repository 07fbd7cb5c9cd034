//! The Deep CFR training loop: alternating traversals, value-network fits,
//! iteration strategies read off predicted advantages, and the average
//! strategy network trained at the end.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;
use thiserror::Error;

use crate::game::{DecisionPoint, Distribution, Game, GameError, InfoSetKey, LegalMask, Player};
use crate::nn::{train, CheckpointMeta, Mlp, NetConfig, NnError, TrainConfig, TrainStats};
use crate::parallel::Workers;
use crate::policy::{OwnStep, Policy, PolicyError};
use crate::rng::{stream, Purpose};
use crate::sampling::{run_traversals, AdvantageSample, ReservoirBuffer, SamplingError, StrategySample, StrategySource};
use crate::sd_cfr::{IterationPolicy, ModelBuffer, ModelEntry, ModelSource, ModelStorage, SdCfrError};
use crate::tabular::instantaneous_regrets;
use crate::tree::GameTree;

#[derive(Debug, Error)]
pub enum DeepCfrError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Models(#[from] SdCfrError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Iteration strategy from advantages listed in legal order: positive parts
/// normalized, or a one-hot on the largest advantage when none is positive.
/// The flag reports whether the one-hot fallback fired.
pub fn advantage_policy_legal(advantages: &[f64]) -> Result<(Distribution, bool), PolicyError> {
    if advantages.is_empty() {
        return Err(PolicyError::NoLegalAction);
    }
    let total: f64 = advantages.iter().map(|a| a.max(0.0)).sum();
    if total > 0.0 {
        let probs = advantages.iter().map(|a| a.max(0.0) / total).collect();
        Ok((Distribution::from_vec_unchecked(probs), false))
    } else {
        let best = (0..advantages.len()).fold(0, |b, a| if advantages[a] > advantages[b] { a } else { b });
        Ok((Distribution::one_hot(advantages.len(), best), true))
    }
}

fn legal_outputs(outputs: &[f32], mask: LegalMask) -> Vec<f64> {
    mask.slots().map(|s| outputs.get(s).copied().unwrap_or(0.0) as f64).collect()
}

/// [`advantage_policy_legal`] over slot-space network outputs.
pub fn advantage_policy_outputs(outputs: &[f32], mask: LegalMask) -> Result<(Distribution, bool), PolicyError> {
    advantage_policy_legal(&legal_outputs(outputs, mask))
}

/// Iteration strategy a value network prescribes at `features`.
pub fn advantage_policy(net: &Mlp<f32>, features: &[f32], mask: LegalMask) -> Result<Distribution, PolicyError> {
    if mask.is_empty() {
        return Err(PolicyError::NoLegalAction);
    }
    let out = net.forward(features).map_err(|e| PolicyError::Model(e.to_string()))?;
    Ok(advantage_policy_outputs(&out, mask)?.0)
}

/// Average-strategy network outputs clipped at zero and renormalized; uniform if all vanish.
pub fn avg_policy_outputs(outputs: &[f32], mask: LegalMask) -> Result<Distribution, PolicyError> {
    let vals: Vec<f64> = legal_outputs(outputs, mask).into_iter().map(|v| v.max(0.0)).collect();
    if vals.is_empty() {
        return Err(PolicyError::NoLegalAction);
    }
    let total: f64 = vals.iter().sum();
    if total > 0.0 {
        Ok(Distribution::from_vec_unchecked(vals.into_iter().map(|v| v / total).collect()))
    } else {
        Ok(Distribution::uniform(vals.len()))
    }
}

pub fn avg_policy(net: &Mlp<f32>, features: &[f32], mask: LegalMask) -> Result<Distribution, PolicyError> {
    let out = net.forward(features).map_err(|e| PolicyError::Model(e.to_string()))?;
    avg_policy_outputs(&out, mask)
}

fn batch_outputs(net: &Mlp<f32>, points: &[&DecisionPoint]) -> Result<Vec<f32>, PolicyError> {
    let mut x = Vec::with_capacity(points.len() * net.input_dim());
    for p in points {
        x.extend_from_slice(&p.features);
    }
    net.forward_batch(&x, points.len()).map_err(|e| PolicyError::Model(e.to_string()))
}

impl IterationPolicy for Mlp<f32> {
    fn derive(&self, points: &[&DecisionPoint]) -> Result<Vec<(Distribution, bool)>, PolicyError> {
        let out = batch_outputs(self, points)?;
        let d = self.output_dim();
        points.iter().enumerate().map(|(k, p)| advantage_policy_outputs(&out[k * d..(k + 1) * d], p.mask)).collect()
    }
}

/// Exact advantages stored per infoset in legal order; stands in for a value
/// network to separate approximation error from the algorithm itself.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularAdvantage {
    values: HashMap<InfoSetKey, Vec<f64>>,
}

impl TabularAdvantage {
    pub fn new(values: HashMap<InfoSetKey, Vec<f64>>) -> Self {
        TabularAdvantage { values }
    }

    pub fn get(&self, key: &InfoSetKey) -> Option<&[f64]> {
        self.values.get(key).map(Vec::as_slice)
    }
}

impl IterationPolicy for TabularAdvantage {
    fn derive(&self, points: &[&DecisionPoint]) -> Result<Vec<(Distribution, bool)>, PolicyError> {
        points
            .iter()
            .map(|p| {
                let v = self.values.get(&p.key).ok_or_else(|| PolicyError::UnknownInfoSet(p.key.clone()))?;
                advantage_policy_legal(v)
            })
            .collect()
    }
}

/// Average-strategy network used as a policy.
#[derive(Debug, Clone)]
pub struct AvgNetPolicy(pub Arc<Mlp<f32>>);

impl Policy for AvgNetPolicy {
    fn query(&mut self, point: &DecisionPoint, _: &[OwnStep]) -> Result<Distribution, PolicyError> {
        avg_policy(&self.0, &point.features, point.mask)
    }
}

/// Fits a freshly initialized network to strategy samples, weighting sample
/// `t` by `t / current_iteration`.
pub fn train_average_network<R: Rng + ?Sized>(
    samples: &[StrategySample],
    net_config: &NetConfig,
    train_config: &TrainConfig,
    current_iteration: u64,
    rng: &mut R,
) -> Result<(Mlp<f32>, TrainStats), NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyBuffer);
    }
    let mut net = Mlp::init(net_config, rng)?;
    let stats = train(&mut net, samples, train_config, current_iteration, rng)?;
    Ok((net, stats))
}

/// How the per-player advantage model is produced each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageMode {
    /// Train a value network on the advantage buffer.
    Network,
    /// Test hook: exact linearly weighted cumulative regrets on the full tree.
    ExactTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepCfrConfig {
    pub traversals: u64,
    pub advantage_capacity: usize,
    pub strategy_capacity: usize,
    pub hidden: Vec<usize>,
    pub value_train: TrainConfig,
    /// Keep filling the strategy buffers (needed for the average network).
    pub fill_strategy_buffer: bool,
    pub seed: u64,
    /// Store infoset keys with samples for diagnostics.
    pub record_keys: bool,
    pub mode: AdvantageMode,
    /// Write value networks here as checkpoints instead of keeping them in memory.
    pub checkpoint_dir: Option<PathBuf>,
    pub model_storage: ModelStorage,
}

impl DeepCfrConfig {
    /// 1500 traversals, buffers of one million, three layers of 64 units.
    pub fn standard(seed: u64) -> Self {
        DeepCfrConfig {
            traversals: 1500,
            advantage_capacity: 1_000_000,
            strategy_capacity: 1_000_000,
            hidden: vec![64, 64, 64],
            value_train: TrainConfig::value_default(),
            fill_strategy_buffer: true,
            seed,
            record_keys: false,
            mode: AdvantageMode::Network,
            checkpoint_dir: None,
            model_storage: ModelStorage::KeepAll,
        }
    }

    pub fn validate(&self) -> Result<(), DeepCfrError> {
        if self.traversals == 0 || self.advantage_capacity == 0 || self.strategy_capacity == 0 {
            return Err(DeepCfrError::Config("traversals and capacities must be positive".into()));
        }
        self.value_train.validate()?;
        Ok(())
    }
}

/// What one iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iteration: u64,
    pub traverser: Player,
    pub advantage_samples: u64,
    pub strategy_samples: u64,
    pub advantage_len: [usize; 2],
    pub strategy_len: [usize; 2],
    /// Mean sampled root value for the traverser.
    pub root_value: f64,
    pub train: Option<TrainStats>,
    /// Infosets where the iteration strategy came from the argmax fallback.
    pub fallbacks: u64,
}

/// Memoizing strategy source over the current per-player models.
struct CurrentStrategies {
    models: [Option<Arc<dyn IterationPolicy>>; 2],
    memo: Mutex<HashMap<(usize, InfoSetKey), Distribution>>,
    fallbacks: AtomicU64,
}

impl CurrentStrategies {
    fn new(models: [Option<Arc<dyn IterationPolicy>>; 2]) -> Self {
        CurrentStrategies { models, memo: Mutex::new(HashMap::new()), fallbacks: AtomicU64::new(0) }
    }
}

impl StrategySource for CurrentStrategies {
    fn strategy(&self, player: Player, point: &DecisionPoint) -> Result<Distribution, PolicyError> {
        let Some(model) = &self.models[player.seat()] else {
            return Ok(Distribution::uniform(point.num_actions()));
        };
        let key = (player.seat(), point.key.clone());
        if let Some(d) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(d.clone());
        }
        let (d, fallback) = model.derive(&[point])?.pop().expect("one result");
        let mut memo = self.memo.lock().expect("memo lock");
        if memo.insert(key, d.clone()).is_none() && fallback {
            self.fallbacks.fetch_add(1, Ordering::Relaxed);
        }
        Ok(d)
    }
}

struct ExactState {
    tree: Arc<GameTree>,
    cumulative: Vec<Vec<f64>>,
    tables: [Option<Arc<TabularAdvantage>>; 2],
}

/// State of a Deep CFR run: buffers, current value networks and the store of
/// every iteration's network.
pub struct DeepCfrRun<G: Game> {
    game: Arc<G>,
    config: DeepCfrConfig,
    net_config: NetConfig,
    iteration: u64,
    advantages: [ReservoirBuffer<AdvantageSample>; 2],
    strategies: [ReservoirBuffer<StrategySample>; 2],
    nets: [Option<Arc<Mlp<f32>>>; 2],
    models: ModelBuffer,
    workers: Workers,
    exact: Option<ExactState>,
    last_entry: Option<ModelEntry>,
}

impl<G: Game> DeepCfrRun<G> {
    pub fn new(game: Arc<G>, config: DeepCfrConfig) -> Result<Self, DeepCfrError> {
        config.validate()?;
        let net_config = NetConfig::new(game.feature_len(), config.hidden.clone(), game.max_actions());
        net_config.validate()?;
        let exact = match config.mode {
            AdvantageMode::Network => None,
            AdvantageMode::ExactTable => {
                let tree = Arc::new(GameTree::build(&*game)?);
                let cumulative = tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect();
                Some(ExactState { tree, cumulative, tables: [None, None] })
            }
        };
        Ok(DeepCfrRun {
            advantages: [ReservoirBuffer::new(config.advantage_capacity), ReservoirBuffer::new(config.advantage_capacity)],
            strategies: [ReservoirBuffer::new(config.strategy_capacity), ReservoirBuffer::new(config.strategy_capacity)],
            models: ModelBuffer::new(config.model_storage),
            nets: [None, None],
            iteration: 0,
            workers: Workers::single(),
            exact,
            last_entry: None,
            net_config,
            game,
            config,
        })
    }

    /// Continues a network-mode run from saved state after `iteration`
    /// completed iterations. `current` holds each player's latest value
    /// network, the warm start for its next fit.
    pub fn restore(
        game: Arc<G>,
        config: DeepCfrConfig,
        iteration: u64,
        advantages: [ReservoirBuffer<AdvantageSample>; 2],
        strategies: [ReservoirBuffer<StrategySample>; 2],
        models: ModelBuffer,
        current: [Option<Mlp<f32>>; 2],
    ) -> Result<Self, DeepCfrError> {
        if config.mode != AdvantageMode::Network {
            return Err(DeepCfrError::Config("only network runs can be restored".into()));
        }
        let mut run = DeepCfrRun::new(game, config)?;
        for net in current.iter().flatten() {
            if net.input_dim() != run.net_config.input_dim || net.output_dim() != run.net_config.output_dim {
                return Err(DeepCfrError::Config("restored network does not fit the game".into()));
            }
        }
        run.iteration = iteration;
        run.advantages = advantages;
        run.strategies = strategies;
        run.models = models;
        run.nets = current.map(|n| n.map(Arc::new));
        Ok(run)
    }

    pub fn with_workers(mut self, workers: Workers) -> Self {
        self.workers = workers;
        self
    }

    pub fn game(&self) -> &Arc<G> {
        &self.game
    }

    pub fn config(&self) -> &DeepCfrConfig {
        &self.config
    }

    pub fn net_config(&self) -> &NetConfig {
        &self.net_config
    }

    /// Completed iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn advantage_buffer(&self, player: Player) -> &ReservoirBuffer<AdvantageSample> {
        &self.advantages[player.seat()]
    }

    pub fn strategy_buffer(&self, player: Player) -> &ReservoirBuffer<StrategySample> {
        &self.strategies[player.seat()]
    }

    pub fn current_net(&self, player: Player) -> Option<&Arc<Mlp<f32>>> {
        self.nets[player.seat()].as_ref()
    }

    pub fn models(&self) -> &ModelBuffer {
        &self.models
    }

    /// The network produced by the most recent iteration, whether or not the
    /// model buffer kept it.
    pub fn last_entry(&self) -> Option<&ModelEntry> {
        self.last_entry.as_ref()
    }

    fn current_models(&self) -> [Option<Arc<dyn IterationPolicy>>; 2] {
        match &self.exact {
            Some(ex) => ex.tables.clone().map(|t| t.map(|t| t as Arc<dyn IterationPolicy>)),
            None => self.nets.clone().map(|n| n.map(|n| n as Arc<dyn IterationPolicy>)),
        }
    }

    /// The strategy each player would play on the next iteration, at every
    /// infoset of `tree`, and the number of infosets where the fallback fired.
    pub fn next_iteration_profile(&self, tree: &GameTree) -> Result<(Vec<Distribution>, u64), PolicyError> {
        let models = self.current_models();
        let mut out = Vec::with_capacity(tree.infosets().len());
        let mut fallbacks = 0;
        for info in tree.infosets() {
            match &models[info.player.seat()] {
                None => out.push(Distribution::uniform(info.num_actions())),
                Some(m) => {
                    let (d, f) = m.derive(&[&info.decision_point()])?.pop().expect("one result");
                    fallbacks += f as u64;
                    out.push(d);
                }
            }
        }
        Ok((out, fallbacks))
    }

    /// Runs iteration `t = iteration() + 1` with traverser `t mod 2`.
    pub fn iterate(&mut self) -> Result<IterationStats, DeepCfrError> {
        let t = self.iteration + 1;
        let traverser = Player::from_seat((t % 2) as usize);
        let me = traverser.seat();
        let seed = self.config.seed;

        let source = CurrentStrategies::new(self.current_models());
        let outs = run_traversals(
            &*self.game,
            traverser,
            &source,
            t as u32,
            self.config.traversals,
            seed,
            &self.workers,
            self.config.record_keys,
        )?;
        let mut rng_v = stream(seed, Purpose::BufferInsert, t, 0);
        let mut rng_s = stream(seed, Purpose::BufferInsert, t, 1);
        let (mut n_adv, mut n_strat, mut root) = (0u64, 0u64, 0.0);
        for out in outs {
            root += out.value;
            for s in out.advantages {
                self.advantages[me].insert(s, &mut rng_v);
                n_adv += 1;
            }
            if self.config.fill_strategy_buffer {
                for s in out.strategies {
                    self.strategies[1 - me].insert(s, &mut rng_s);
                    n_strat += 1;
                }
            }
        }

        let mut fallbacks = source.fallbacks.load(Ordering::Relaxed);
        let mut train_stats = None;
        let source_entry = match &mut self.exact {
            None => {
                let mut net = match &self.nets[me] {
                    None => Mlp::init(&self.net_config, &mut stream(seed, Purpose::NetInit, t, 0))?,
                    Some(prev) => (**prev).clone(),
                };
                let mut rng = stream(seed, Purpose::NetTrain, t, 0);
                train_stats = Some(train(&mut net, self.advantages[me].entries(), &self.config.value_train, t, &mut rng)?);
                let net = Arc::new(net);
                self.nets[me] = Some(net.clone());
                match &self.config.checkpoint_dir {
                    None => ModelSource::Resident(net),
                    Some(dir) => ModelSource::write_checkpoint(
                        &net,
                        CheckpointMeta { player: me as u8, iteration: t as u32 },
                        &dir.join(checkpoint_file_name(traverser, t)),
                    )?,
                }
            }
            Some(_) => {
                let tree = self.exact.as_ref().expect("exact state").tree.clone();
                let (profile, f) = self.next_iteration_profile(&tree)?;
                fallbacks = f;
                let regrets = instantaneous_regrets(&tree, &profile, traverser);
                let ex = self.exact.as_mut().expect("exact state");
                let mut values = HashMap::new();
                for &i in tree.player_infosets(traverser) {
                    for (c, r) in ex.cumulative[i].iter_mut().zip(&regrets[i]) {
                        *c += t as f64 * r;
                    }
                    values.insert(tree.infoset(i).key.clone(), ex.cumulative[i].clone());
                }
                let table = Arc::new(TabularAdvantage::new(values));
                ex.tables[me] = Some(table.clone());
                ModelSource::Resident(table)
            }
        };
        let mut rng_m = stream(seed, Purpose::ModelReservoir, t, 0);
        let entry = ModelEntry { player: traverser, iteration: t, source: source_entry };
        self.last_entry = Some(entry.clone());
        self.models.push(entry, &mut rng_m)?;
        self.iteration = t;
        Ok(IterationStats {
            iteration: t,
            traverser,
            advantage_samples: n_adv,
            strategy_samples: n_strat,
            advantage_len: [self.advantages[0].len(), self.advantages[1].len()],
            strategy_len: [self.strategies[0].len(), self.strategies[1].len()],
            root_value: root / self.config.traversals as f64,
            train: train_stats,
            fallbacks,
        })
    }

    /// Trains an average-strategy network for `player` on its strategy buffer.
    pub fn train_average(&self, player: Player, train_config: &TrainConfig) -> Result<(Mlp<f32>, TrainStats), NnError> {
        let mut rng = stream(self.config.seed, Purpose::AverageNet, self.iteration, player.seat() as u64);
        train_average_network(self.strategies[player.seat()].entries(), &self.net_config, train_config, self.iteration, &mut rng)
    }
}

/// File name used for `player`'s value network of iteration `t`.
pub fn checkpoint_file_name(player: Player, t: u64) -> String {
    format!("p{}_t{:06}.sdcn", player.seat(), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantage_policy_examples() {
        let mask = LegalMask::prefix(3);
        assert_eq!(advantage_policy_outputs(&[3.0, 1.0, -2.0], mask).unwrap().0.probs(), &[0.75, 0.25, 0.0]);
        let (d, fb) = advantage_policy_outputs(&[-1.0, -3.0], LegalMask::prefix(2)).unwrap();
        assert_eq!((d.probs(), fb), (&[1.0, 0.0][..], true));
        let d = advantage_policy_outputs(&[1.0, 1.0, 99.0], LegalMask::from_slots(&[0, 1])).unwrap().0;
        assert_eq!(d.to_slots(LegalMask::from_slots(&[0, 1]), 3), vec![0.5, 0.5, 0.0]);
        assert_eq!(advantage_policy_legal(&[]), Err(PolicyError::NoLegalAction));
    }

    #[test]
    fn avg_policy_clips_and_falls_back_to_uniform() {
        let mask = LegalMask::prefix(3);
        assert_eq!(avg_policy_outputs(&[0.5, -1.0, 1.5], mask).unwrap().probs(), &[0.25, 0.0, 0.75]);
        assert_eq!(avg_policy_outputs(&[0.0, -1.0, -2.0], mask).unwrap(), Distribution::uniform(3));
    }
}
