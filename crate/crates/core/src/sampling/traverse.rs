use rand::Rng;

use crate::game::{DecisionPoint, Distribution, Game, InfoSetKey, LegalMask, NodeKind, Player};
use crate::parallel::Workers;
use crate::policy::PolicyError;
use crate::rng::{stream, Purpose};

use super::SamplingError;

/// A regression example: features, a slot-space target and the legal mask.
pub trait TrainingSample {
    fn features(&self) -> &[f32];
    /// One entry per action slot; illegal slots hold 0.
    fn target(&self) -> &[f32];
    fn mask(&self) -> LegalMask;
    fn iteration(&self) -> u32;
}

/// Sampled instantaneous regrets of the traverser at one infoset.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSample {
    pub features: Vec<f32>,
    pub target: Vec<f32>,
    pub mask: LegalMask,
    pub iteration: u32,
    /// Only filled when key recording is switched on.
    pub key: Option<InfoSetKey>,
}

/// The opponent's iteration strategy at one infoset it reached.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySample {
    pub features: Vec<f32>,
    pub target: Vec<f32>,
    pub mask: LegalMask,
    pub iteration: u32,
    pub key: Option<InfoSetKey>,
}

macro_rules! training_sample {
    ($t:ty) => {
        impl TrainingSample for $t {
            fn features(&self) -> &[f32] {
                &self.features
            }
            fn target(&self) -> &[f32] {
                &self.target
            }
            fn mask(&self) -> LegalMask {
                self.mask
            }
            fn iteration(&self) -> u32 {
                self.iteration
            }
        }
    };
}
training_sample!(AdvantageSample);
training_sample!(StrategySample);

/// Where traversals get the current iteration strategy from.
pub trait StrategySource: Sync {
    fn strategy(&self, player: Player, point: &DecisionPoint) -> Result<Distribution, PolicyError>;
}

impl<F> StrategySource for F
where
    F: Fn(Player, &DecisionPoint) -> Result<Distribution, PolicyError> + Sync,
{
    fn strategy(&self, player: Player, point: &DecisionPoint) -> Result<Distribution, PolicyError> {
        self(player, point)
    }
}

/// Samples produced by one traversal, in visiting order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraversalSamples {
    pub value: f64,
    pub advantages: Vec<AdvantageSample>,
    pub strategies: Vec<StrategySample>,
}

/// One external-sampling traversal from `state`. Pushes advantage samples for
/// `traverser` and strategy samples for the opponent into `out` and returns
/// the sampled value of `state` for `traverser`.
pub fn external_sampling_traverse<G: Game, R: Rng + ?Sized>(
    game: &G,
    state: &G::State,
    traverser: Player,
    source: &dyn StrategySource,
    iteration: u32,
    rng: &mut R,
    out: &mut TraversalSamples,
    record_keys: bool,
) -> Result<f64, SamplingError> {
    match game.node_kind(state) {
        NodeKind::Terminal => Ok(game.terminal_utility(state, traverser)? as f64),
        NodeKind::Chance => {
            let outcomes = game.chance_outcomes(state)?;
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = outcomes[outcomes.len() - 1].0;
            for &(slot, p) in &outcomes {
                acc += p;
                if u < acc {
                    pick = slot;
                    break;
                }
            }
            let next = game.apply_action(state, pick)?;
            external_sampling_traverse(game, &next, traverser, source, iteration, rng, out, record_keys)
        }
        NodeKind::Decision(p) => {
            let point = game.decision_point(state)?;
            let sigma = source.strategy(p, &point)?;
            let n_slots = game.max_actions();
            if p == traverser {
                let mut values = Vec::with_capacity(point.num_actions());
                for slot in point.mask.slots() {
                    let next = game.apply_action(state, slot)?;
                    values.push(external_sampling_traverse(
                        game, &next, traverser, source, iteration, rng, out, record_keys,
                    )?);
                }
                let ev: f64 = values.iter().zip(sigma.probs()).map(|(v, p)| v * p).sum();
                let mut target = vec![0.0f32; n_slots];
                for (slot, v) in point.mask.slots().zip(&values) {
                    target[slot] = (v - ev) as f32;
                }
                out.advantages.push(AdvantageSample {
                    target,
                    mask: point.mask,
                    iteration,
                    key: record_keys.then(|| point.key.clone()),
                    features: point.features,
                });
                Ok(ev)
            } else {
                let idx = sigma.sample_with(rng.gen());
                let slot = point.mask.slot_of(idx).expect("sampled index is legal");
                out.strategies.push(StrategySample {
                    target: sigma.to_slots(point.mask, n_slots).into_iter().map(|p| p as f32).collect(),
                    mask: point.mask,
                    iteration,
                    key: record_keys.then(|| point.key.clone()),
                    features: point.features,
                });
                let next = game.apply_action(state, slot)?;
                external_sampling_traverse(game, &next, traverser, source, iteration, rng, out, record_keys)
            }
        }
    }
}

/// Runs `n` traversals from the root. Traversal `k` of iteration `t` always
/// draws from the same random stream, whatever the worker count.
pub fn run_traversals<G: Game>(
    game: &G,
    traverser: Player,
    source: &dyn StrategySource,
    iteration: u32,
    n: u64,
    seed: u64,
    workers: &Workers,
    record_keys: bool,
) -> Result<Vec<TraversalSamples>, SamplingError> {
    let root = game.root();
    workers
        .map(n, |k| {
            let mut rng = stream(seed, Purpose::Traversal, iteration as u64, k);
            let mut out = TraversalSamples::default();
            out.value =
                external_sampling_traverse(game, &root, traverser, source, iteration, &mut rng, &mut out, record_keys)?;
            Ok(out)
        })
        .into_iter()
        .collect()
}
