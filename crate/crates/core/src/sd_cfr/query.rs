use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::game::{DecisionPoint, Distribution, InfoSetKey, Player};
use crate::policy::{OwnStep, Policy, PolicyError};
use crate::tree::GameTree;

use super::{IterationPolicy, ModelBuffer, SdCfrError};

/// Draws one of `player`'s networks with probability proportional to its iteration.
pub fn sample_iteration_network<R: Rng + ?Sized>(
    buffer: &ModelBuffer,
    player: Player,
    rng: &mut R,
) -> Result<(u64, Arc<dyn IterationPolicy>), SdCfrError> {
    let entries = buffer.entries(player);
    let total: u64 = entries.iter().map(|e| e.iteration).sum();
    if entries.is_empty() || total == 0 {
        return Err(SdCfrError::EmptyModelBuffer(player));
    }
    let mut u = rng.gen_range(0..total);
    for e in entries {
        if u < e.iteration {
            return Ok((e.iteration, buffer.load(e)?));
        }
        u -= e.iteration;
    }
    unreachable!("draw below the total weight")
}

/// Plays a whole game with one network drawn at [`Policy::reset`].
#[derive(Debug)]
pub struct TrajectoryPolicy {
    buffer: Arc<ModelBuffer>,
    player: Player,
    current: Option<(u64, Arc<dyn IterationPolicy>)>,
}

impl TrajectoryPolicy {
    pub fn new(buffer: Arc<ModelBuffer>, player: Player) -> Self {
        TrajectoryPolicy { buffer, player, current: None }
    }

    /// Iteration of the network drawn for the current game.
    pub fn current_iteration(&self) -> Option<u64> {
        self.current.as_ref().map(|c| c.0)
    }
}

impl Policy for TrajectoryPolicy {
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<(), PolicyError> {
        self.current = Some(sample_iteration_network(&self.buffer, self.player, rng)?);
        Ok(())
    }

    fn query(&mut self, point: &DecisionPoint, _: &[OwnStep]) -> Result<Distribution, PolicyError> {
        let (_, net) = self.current.as_ref().ok_or(PolicyError::QueryBeforeReset)?;
        net.strategy(point)
    }
}

/// Reach-weighted running sums of the combination rule.
struct Mix {
    num: Vec<f64>,
    den: f64,
}

impl Mix {
    fn new(n: usize) -> Self {
        Mix { num: vec![0.0; n], den: 0.0 }
    }

    fn add(&mut self, iteration: u64, reach: f64, sigma: &Distribution) {
        let w = iteration as f64 * reach;
        for (n, p) in self.num.iter_mut().zip(sigma.probs()) {
            *n += w * p;
        }
        self.den += w;
    }

    fn finish(self) -> Distribution {
        if self.den > 0.0 {
            let d = self.den;
            Distribution::from_vec_unchecked(self.num.into_iter().map(|x| x / d).collect())
        } else {
            Distribution::uniform(self.num.len())
        }
    }
}

/// The average strategy of `player` at `point`, computed from every stored
/// network: `sum_t t * reach_t * sigma_t(point) / sum_t t * reach_t`, where
/// `reach_t` is the product of the probabilities network `t` gave the
/// player's own actions in `history`. Uniform when every reach is zero.
pub fn explicit_average_distribution(
    buffer: &ModelBuffer,
    player: Player,
    history: &[OwnStep],
    point: &DecisionPoint,
) -> Result<Distribution, SdCfrError> {
    let mut passes = 0;
    explicit_average_distribution_with(buffer, player, history, point, true, &mut passes)
}

/// As [`explicit_average_distribution`]; `prune` stops querying a network once
/// its reach hits zero, and `passes` counts network evaluations.
pub fn explicit_average_distribution_with(
    buffer: &ModelBuffer,
    player: Player,
    history: &[OwnStep],
    point: &DecisionPoint,
    prune: bool,
    passes: &mut u64,
) -> Result<Distribution, SdCfrError> {
    let entries = buffer.entries(player);
    if entries.is_empty() {
        return Err(SdCfrError::EmptyModelBuffer(player));
    }
    let mut mix = Mix::new(point.num_actions());
    for e in entries {
        let net = buffer.load(e)?;
        let mut reach = 1.0;
        for step in history {
            if prune && reach == 0.0 {
                break;
            }
            *passes += 1;
            reach *= net.strategy(&step.point)?[step.action];
        }
        if prune && reach == 0.0 {
            continue;
        }
        *passes += 1;
        mix.add(e.iteration, reach, &net.strategy(point)?);
    }
    Ok(mix.finish())
}

/// Stateless policy answering every query with an explicit computation.
#[derive(Debug)]
pub struct ExplicitAveragePolicy {
    buffer: Arc<ModelBuffer>,
    player: Player,
}

impl ExplicitAveragePolicy {
    pub fn new(buffer: Arc<ModelBuffer>, player: Player) -> Self {
        ExplicitAveragePolicy { buffer, player }
    }
}

impl Policy for ExplicitAveragePolicy {
    fn query(&mut self, point: &DecisionPoint, history: &[OwnStep]) -> Result<Distribution, PolicyError> {
        Ok(explicit_average_distribution(&self.buffer, self.player, history, point)?)
    }
}

/// Per-network own-reach products along the current trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachCache {
    products: Vec<f64>,
    depth: usize,
}

impl ReachCache {
    pub fn new(n_networks: usize) -> Self {
        ReachCache { products: vec![1.0; n_networks], depth: 0 }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn products(&self) -> &[f64] {
        &self.products
    }

    /// Whether network `n` has zero reach and needs no more queries.
    pub fn skipped(&self, n: usize) -> bool {
        self.products[n] == 0.0
    }

    /// Extends the trajectory by the own decision at depth `depth`, where
    /// `sigmas[n]` is network `n`'s strategy at that decision (`None` for
    /// skipped networks) and `action` the legal index taken.
    pub fn step(&mut self, depth: usize, sigmas: &[Option<Distribution>], action: usize) -> Result<(), SdCfrError> {
        if depth != self.depth {
            return Err(SdCfrError::DepthMismatch { expected: self.depth, found: depth });
        }
        for (p, s) in self.products.iter_mut().zip(sigmas) {
            if *p != 0.0 {
                *p *= s.as_ref().map_or(0.0, |s| s[action]);
            }
        }
        self.depth += 1;
        Ok(())
    }
}

#[derive(Debug)]
struct Frame {
    key: InfoSetKey,
    sigmas: Vec<Option<Distribution>>,
}

/// Explicit average-strategy queries that reuse reach products along the
/// trajectory; suited to depth-first walks and sequential play.
#[derive(Debug)]
pub struct CachedAveragePolicy {
    buffer: Arc<ModelBuffer>,
    player: Player,
    frames: Vec<Frame>,
    /// `caches[k]`: reach products before the own decision at depth `k`.
    caches: Vec<ReachCache>,
    /// `actions[k]`: action taken at depth `k` when `caches[k + 1]` was built.
    actions: Vec<usize>,
    forward_passes: u64,
}

impl CachedAveragePolicy {
    pub fn new(buffer: Arc<ModelBuffer>, player: Player) -> Self {
        let n = buffer.len(player);
        CachedAveragePolicy {
            buffer,
            player,
            frames: Vec::new(),
            caches: vec![ReachCache::new(n)],
            actions: Vec::new(),
            forward_passes: 0,
        }
    }

    /// Network evaluations performed so far.
    pub fn forward_passes(&self) -> u64 {
        self.forward_passes
    }

    fn sigmas_at(&mut self, point: &DecisionPoint, cache: &ReachCache) -> Result<Vec<Option<Distribution>>, SdCfrError> {
        let entries = self.buffer.entries(self.player);
        let mut out = Vec::with_capacity(entries.len());
        for (n, e) in entries.iter().enumerate() {
            if cache.skipped(n) {
                out.push(None);
            } else {
                self.forward_passes += 1;
                out.push(Some(self.buffer.load(e)?.strategy(point)?));
            }
        }
        Ok(out)
    }
}

impl Policy for CachedAveragePolicy {
    fn reset(&mut self, _: &mut dyn RngCore) -> Result<(), PolicyError> {
        self.frames.clear();
        self.caches.truncate(1);
        self.actions.clear();
        Ok(())
    }

    fn query(&mut self, point: &DecisionPoint, history: &[OwnStep]) -> Result<Distribution, PolicyError> {
        if self.buffer.is_empty(self.player) {
            return Err(PolicyError::EmptyModelBuffer(self.player));
        }
        let k = history.len();
        // keep the longest cached prefix that agrees with `history`
        let mut keep = 0;
        while keep < k && keep < self.frames.len() && self.frames[keep].key == history[keep].point.key {
            keep += 1;
        }
        let mut valid = 0;
        while valid < keep && valid < self.actions.len() && self.actions[valid] == history[valid].action {
            valid += 1;
        }
        self.frames.truncate(keep);
        self.caches.truncate(valid + 1);
        self.actions.truncate(valid);
        for j in keep..k {
            let cache = self.caches[j].clone();
            let sigmas = self.sigmas_at(&history[j].point, &cache)?;
            self.frames.push(Frame { key: history[j].point.key.clone(), sigmas });
        }
        while self.caches.len() <= k {
            let j = self.caches.len() - 1;
            let mut next = self.caches[j].clone();
            next.step(j, &self.frames[j].sigmas, history[j].action)?;
            self.caches.push(next);
            self.actions.push(history[j].action);
        }
        let cache = self.caches[k].clone();
        let sigmas = self.sigmas_at(point, &cache)?;
        let mut mix = Mix::new(point.num_actions());
        for ((e, s), reach) in self.buffer.entries(self.player).iter().zip(&sigmas).zip(cache.products()) {
            if let Some(s) = s {
                mix.add(e.iteration, *reach, s);
            }
        }
        self.frames.truncate(k);
        self.frames.push(Frame { key: point.key.clone(), sigmas });
        Ok(mix.finish())
    }
}

/// Average strategy of `player` at each of its infosets of `tree` (`None`
/// elsewhere). Networks are the outer loop, so each is loaded once and
/// evaluated on all infosets in one batch.
pub fn average_strategies(
    tree: &GameTree,
    buffer: &ModelBuffer,
    player: Player,
) -> Result<Vec<Option<Distribution>>, SdCfrError> {
    let entries = buffer.entries(player);
    if entries.is_empty() {
        return Err(SdCfrError::EmptyModelBuffer(player));
    }
    let ids = tree.player_infosets(player);
    let points: Vec<DecisionPoint> = ids.iter().map(|&i| tree.infoset(i).decision_point()).collect();
    let refs: Vec<&DecisionPoint> = points.iter().collect();
    let mut local = vec![usize::MAX; tree.infosets().len()];
    for (j, &i) in ids.iter().enumerate() {
        local[i] = j;
    }
    let mut mixes: Vec<Mix> = points.iter().map(|p| Mix::new(p.num_actions())).collect();
    let mut reach = vec![0.0f64; ids.len()];
    for e in entries {
        let sigmas = buffer.load(e)?.strategies(&refs)?;
        // parents are numbered before their children
        for (j, &i) in ids.iter().enumerate() {
            reach[j] = match tree.infoset(i).parent {
                None => 1.0,
                Some((p, a)) => reach[local[p]] * sigmas[local[p]][a],
            };
            if reach[j] != 0.0 {
                mixes[j].add(e.iteration, reach[j], &sigmas[j]);
            }
        }
    }
    let mut out = vec![None; tree.infosets().len()];
    for (mix, &i) in mixes.into_iter().zip(ids) {
        out[i] = Some(mix.finish());
    }
    Ok(out)
}

/// Both players' average strategies as a full profile.
pub fn average_profile(tree: &GameTree, buffer: &ModelBuffer) -> Result<Vec<Distribution>, SdCfrError> {
    let a = average_strategies(tree, buffer, Player::P0)?;
    let b = average_strategies(tree, buffer, Player::P1)?;
    Ok(a.into_iter().zip(b).map(|(x, y)| x.or(y).expect("every infoset belongs to a player")).collect())
}
