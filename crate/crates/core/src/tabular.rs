//! Exact full-traversal CFR over an enumerated tree: vanilla or linear
//! weighting, simultaneous or alternating updates.
//!
//! Iteration `t` weights both the regret and the average-strategy
//! contributions by `w(t)` (1 for vanilla, `t` for linear). In alternating
//! mode only player `t mod 2` is updated on iteration `t`, and each such
//! update counts as one iteration.

use std::io::{self, Read, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::game::{Distribution, InfoSetKey, Player};
use crate::tree::{GameTree, TreeNode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegretError {
    #[error("empty action set")]
    EmptyActionSet,
}

/// Positive-part normalization; uniform when no regret is positive.
pub fn regret_matching(regrets: &[f64]) -> Result<Distribution, RegretError> {
    if regrets.is_empty() {
        return Err(RegretError::EmptyActionSet);
    }
    let positive: f64 = regrets.iter().map(|r| r.max(0.0)).sum();
    if positive > 0.0 {
        Ok(Distribution::from_vec_unchecked(regrets.iter().map(|r| r.max(0.0) / positive).collect()))
    } else {
        Ok(Distribution::uniform(regrets.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Vanilla,
    Linear,
}

impl Weighting {
    pub fn weight(self, t: u64) -> f64 {
        match self {
            Weighting::Vanilla => 1.0,
            Weighting::Linear => t as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSchedule {
    Simultaneous,
    Alternating,
}

impl UpdateSchedule {
    /// Players updated on iteration `t`.
    pub fn updates(self, t: u64, player: Player) -> bool {
        match self {
            UpdateSchedule::Simultaneous => true,
            UpdateSchedule::Alternating => player.seat() as u64 == t % 2,
        }
    }
}

/// Accumulated regret per infoset and action (absent ≡ zeros).
#[derive(Debug, Clone)]
pub struct RegretTable {
    tree: Arc<GameTree>,
    regrets: Vec<Vec<f64>>,
}

impl RegretTable {
    fn new(tree: Arc<GameTree>) -> Self {
        let regrets = tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect();
        RegretTable { tree, regrets }
    }

    pub fn get(&self, key: &InfoSetKey) -> Option<&[f64]> {
        self.tree.infoset_id(key).map(|i| self.regrets[i].as_slice())
    }

    pub fn by_index(&self, infoset: usize) -> &[f64] {
        &self.regrets[infoset]
    }
}

/// Numerator and denominator of the weighted average strategy.
#[derive(Debug, Clone)]
pub struct AvgStrategyTable {
    tree: Arc<GameTree>,
    numerators: Vec<Vec<f64>>,
    denominators: Vec<f64>,
}

impl AvgStrategyTable {
    fn new(tree: Arc<GameTree>) -> Self {
        let numerators = tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect();
        let denominators = vec![0.0; tree.infosets().len()];
        AvgStrategyTable { tree, numerators, denominators }
    }

    /// Normalized average; uniform for unknown or never-reached infosets.
    pub fn average_strategy(&self, key: &InfoSetKey) -> Option<Distribution> {
        self.tree.infoset_id(key).map(|i| self.by_index(i))
    }

    pub fn by_index(&self, infoset: usize) -> Distribution {
        let den = self.denominators[infoset];
        let num = &self.numerators[infoset];
        if den > 0.0 {
            Distribution::from_vec_unchecked(num.iter().map(|n| n / den).collect())
        } else {
            Distribution::uniform(num.len())
        }
    }

    pub fn numerator(&self, infoset: usize) -> &[f64] {
        &self.numerators[infoset]
    }

    pub fn denominator(&self, infoset: usize) -> f64 {
        self.denominators[infoset]
    }

    /// Average strategy at every infoset of the tree.
    pub fn profile(&self) -> Vec<Distribution> {
        (0..self.denominators.len()).map(|i| self.by_index(i)).collect()
    }
}

/// Iteration strategies of the players updated on one iteration.
#[derive(Debug, Clone)]
pub struct IterationStrategySnapshot {
    pub iteration: u64,
    /// Per seat: strategy at every infoset of the tree (only that seat's
    /// entries are meaningful), or `None` when the seat was not updated.
    pub strategies: [Option<Arc<Vec<Distribution>>>; 2],
}

impl IterationStrategySnapshot {
    pub fn get(&self, tree: &GameTree, player: Player, key: &InfoSetKey) -> Option<&Distribution> {
        let table = self.strategies[player.seat()].as_ref()?;
        tree.infoset_id(key).map(|i| &table[i])
    }

    /// Writes the players' entries as `(u32 key length, key, u32 action count, f64 probabilities)` records.
    pub fn write_to<W: Write>(&self, tree: &GameTree, mut w: W) -> io::Result<()> {
        for seat in 0..2 {
            let Some(table) = &self.strategies[seat] else { continue };
            for &i in tree.player_infosets(Player::from_seat(seat)) {
                let key = tree.infoset(i).key.as_bytes();
                w.write_all(&(key.len() as u32).to_le_bytes())?;
                w.write_all(key)?;
                let probs = table[i].probs();
                w.write_all(&(probs.len() as u32).to_le_bytes())?;
                for p in probs {
                    w.write_all(&p.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Parses a dump written by [`IterationStrategySnapshot::write_to`].
    pub fn read_records<R: Read>(mut r: R) -> io::Result<Vec<(InfoSetKey, Distribution)>> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut out = Vec::new();
        let mut pos = 0;
        let bad = || io::Error::new(io::ErrorKind::UnexpectedEof, "truncated snapshot record");
        let take = |n: usize, pos: &mut usize| -> io::Result<Vec<u8>> {
            let s = buf.get(*pos..*pos + n).ok_or_else(bad)?.to_vec();
            *pos += n;
            Ok(s)
        };
        while pos < buf.len() {
            let klen = u32::from_le_bytes(take(4, &mut pos)?.try_into().unwrap()) as usize;
            let key = InfoSetKey::new(take(klen, &mut pos)?);
            let n = u32::from_le_bytes(take(4, &mut pos)?.try_into().unwrap()) as usize;
            let mut probs = Vec::with_capacity(n);
            for _ in 0..n {
                probs.push(f64::from_le_bytes(take(8, &mut pos)?.try_into().unwrap()));
            }
            let dist = Distribution::new(probs)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
            out.push((key, dist));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CfrConfig {
    pub weighting: Weighting,
    pub schedule: UpdateSchedule,
    pub record_snapshots: bool,
}

impl CfrConfig {
    pub fn new(weighting: Weighting, schedule: UpdateSchedule) -> Self {
        CfrConfig { weighting, schedule, record_snapshots: false }
    }
}

/// Tabular CFR solver over a shared tree.
#[derive(Debug, Clone)]
pub struct CfrSolver {
    tree: Arc<GameTree>,
    config: CfrConfig,
    weight_fn: fn(u64) -> f64,
    regrets: RegretTable,
    avg: AvgStrategyTable,
    iteration: u64,
    snapshots: Vec<IterationStrategySnapshot>,
}

fn vanilla_weight(_: u64) -> f64 {
    1.0
}

fn linear_weight(t: u64) -> f64 {
    t as f64
}

impl CfrSolver {
    pub fn new(tree: Arc<GameTree>, config: CfrConfig) -> Self {
        let weight_fn = match config.weighting {
            Weighting::Vanilla => vanilla_weight,
            Weighting::Linear => linear_weight,
        };
        CfrSolver {
            regrets: RegretTable::new(tree.clone()),
            avg: AvgStrategyTable::new(tree.clone()),
            tree,
            config,
            weight_fn,
            iteration: 0,
            snapshots: Vec::new(),
        }
    }

    /// Replaces the iteration weight function (test hook).
    pub fn with_weight_fn(mut self, f: fn(u64) -> f64) -> Self {
        self.weight_fn = f;
        self
    }

    pub fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    pub fn config(&self) -> &CfrConfig {
        &self.config
    }

    /// Iterations completed so far.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn regrets(&self) -> &RegretTable {
        &self.regrets
    }

    pub fn avg_table(&self) -> &AvgStrategyTable {
        &self.avg
    }

    pub fn snapshots(&self) -> &[IterationStrategySnapshot] {
        &self.snapshots
    }

    pub fn average_strategy(&self, key: &InfoSetKey) -> Option<Distribution> {
        self.avg.average_strategy(key)
    }

    pub fn average_profile(&self) -> Vec<Distribution> {
        self.avg.profile()
    }

    /// Regret-matched strategy at every infoset (the next iteration strategy).
    pub fn current_profile(&self) -> Vec<Distribution> {
        self.regrets.regrets.iter().map(|r| regret_matching(r).expect("non-empty action set")).collect()
    }

    /// Runs iterations until `t` have been completed.
    pub fn run(&mut self, iterations: u64) {
        while self.iteration < iterations {
            self.iterate();
        }
    }

    /// One iteration; returns its index `t`.
    pub fn iterate(&mut self) -> u64 {
        let t = self.iteration + 1;
        let strategy = self.current_profile();
        let updating = Player::BOTH.map(|p| self.config.schedule.updates(t, p));
        let weight = (self.weight_fn)(t);
        Walk {
            tree: &self.tree,
            strategy: &strategy,
            updating,
            weight,
            regrets: &mut self.regrets.regrets,
            numerators: &mut self.avg.numerators,
            denominators: &mut self.avg.denominators,
        }
        .run(self.tree.root(), [1.0, 1.0], 1.0);
        if self.config.record_snapshots {
            let shared = Arc::new(strategy);
            self.snapshots.push(IterationStrategySnapshot {
                iteration: t,
                strategies: updating.map(|u| u.then(|| shared.clone())),
            });
        }
        self.iteration = t;
        t
    }
}

/// Counterfactual instantaneous regrets of `player` under `profile` (weight
/// 1), indexed by infoset id; other infosets hold zeros.
pub fn instantaneous_regrets(tree: &GameTree, profile: &[Distribution], player: Player) -> Vec<Vec<f64>> {
    let mut regrets: Vec<Vec<f64>> = tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect();
    let mut numerators = regrets.clone();
    let mut denominators = vec![0.0; regrets.len()];
    let mut updating = [false; 2];
    updating[player.seat()] = true;
    Walk {
        tree,
        strategy: profile,
        updating,
        weight: 1.0,
        regrets: &mut regrets,
        numerators: &mut numerators,
        denominators: &mut denominators,
    }
    .run(tree.root(), [1.0, 1.0], 1.0);
    regrets
}

struct Walk<'a> {
    tree: &'a GameTree,
    strategy: &'a [Distribution],
    updating: [bool; 2],
    weight: f64,
    regrets: &'a mut [Vec<f64>],
    numerators: &'a mut [Vec<f64>],
    denominators: &'a mut [f64],
}

impl Walk<'_> {
    /// Post-order recursion returning player 0's expected utility at `node`.
    fn run(&mut self, node: usize, reach: [f64; 2], chance: f64) -> f64 {
        let tree = self.tree;
        match tree.node(node) {
            TreeNode::Terminal { utility } => *utility as f64,
            TreeNode::Chance { children } => {
                children.iter().map(|&(c, p)| p * self.run(c, reach, chance * p)).sum()
            }
            TreeNode::Decision { player, infoset, children } => {
                let seat = player.seat();
                let sigma = self.strategy[*infoset].probs();
                let mut child_values = [0.0f64; 32];
                let mut value = 0.0;
                for (a, &c) in children.iter().enumerate() {
                    let mut r = reach;
                    r[seat] *= sigma[a];
                    child_values[a] = self.run(c, r, chance);
                    value += sigma[a] * child_values[a];
                }
                if self.updating[seat] {
                    let sign = if seat == 0 { 1.0 } else { -1.0 };
                    let cf_reach = reach[1 - seat] * chance;
                    let regrets = &mut self.regrets[*infoset];
                    for a in 0..children.len() {
                        regrets[a] += self.weight * cf_reach * sign * (child_values[a] - value);
                    }
                    let own = self.weight * reach[seat];
                    let num = &mut self.numerators[*infoset];
                    for a in 0..children.len() {
                        num[a] += own * sigma[a];
                    }
                    self.denominators[*infoset] += own;
                }
                value
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Kuhn;

    #[test]
    fn regret_matching_examples() {
        assert_eq!(regret_matching(&[3.0, 1.0, -2.0]).unwrap().probs(), &[0.75, 0.25, 0.0]);
        assert_eq!(regret_matching(&[-1.0, -5.0]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(regret_matching(&[0.0; 3]).unwrap(), Distribution::uniform(3));
        assert_eq!(regret_matching(&[]), Err(RegretError::EmptyActionSet));
    }

    #[test]
    fn first_iteration_is_uniform_and_average_equals_it() {
        let tree = Arc::new(GameTree::build(&Kuhn).unwrap());
        let mut s = CfrSolver::new(tree.clone(), CfrConfig::new(Weighting::Vanilla, UpdateSchedule::Simultaneous));
        assert!(s.current_profile().iter().all(|d| *d == Distribution::uniform(2)));
        s.iterate();
        for d in s.average_profile() {
            assert_eq!(d, Distribution::uniform(2));
        }
    }

    #[test]
    fn unvisited_key_is_none_and_zero_denominator_is_uniform() {
        let tree = Arc::new(GameTree::build(&Kuhn).unwrap());
        let s = CfrSolver::new(tree.clone(), CfrConfig::new(Weighting::Linear, UpdateSchedule::Alternating));
        assert!(s.average_strategy(&InfoSetKey::new(vec![9, 9])).is_none());
        assert_eq!(s.average_strategy(&tree.infoset(0).key), Some(Distribution::uniform(2)));
    }

    #[test]
    fn alternating_updates_one_player_per_iteration() {
        let tree = Arc::new(GameTree::build(&Kuhn).unwrap());
        let mut cfg = CfrConfig::new(Weighting::Linear, UpdateSchedule::Alternating);
        cfg.record_snapshots = true;
        let mut s = CfrSolver::new(tree.clone(), cfg);
        s.iterate();
        for &i in tree.player_infosets(Player::P0) {
            assert_eq!(s.avg_table().denominator(i), 0.0);
            assert!(s.regrets().by_index(i).iter().all(|r| *r == 0.0));
        }
        assert!(tree.player_infosets(Player::P1).iter().any(|&i| s.avg_table().denominator(i) > 0.0));
        assert!(s.snapshots()[0].strategies[0].is_none());
        assert!(s.snapshots()[0].strategies[1].is_some());
    }

    #[test]
    fn snapshot_dump_round_trips() {
        let tree = Arc::new(GameTree::build(&Kuhn).unwrap());
        let mut cfg = CfrConfig::new(Weighting::Linear, UpdateSchedule::Simultaneous);
        cfg.record_snapshots = true;
        let mut s = CfrSolver::new(tree.clone(), cfg);
        s.run(3);
        let snap = &s.snapshots()[2];
        let mut bytes = Vec::new();
        snap.write_to(&tree, &mut bytes).unwrap();
        let records = IterationStrategySnapshot::read_records(bytes.as_slice()).unwrap();
        assert_eq!(records.len(), 12);
        for (key, d) in &records {
            let p = key.player().unwrap();
            assert_eq!(snap.get(&tree, p, key), Some(d));
        }
        assert!(IterationStrategySnapshot::read_records(&bytes[..bytes.len() - 3]).is_err());
    }
}
