use std::collections::BTreeMap;

use rand::Rng;

use crate::game::{Distribution, Game, NodeKind, Player};
use crate::policy::{OwnStep, Policy};
use crate::rng::{stream, Purpose};

use super::{EvalError, Moments};

/// Disagreement statistics for one (own-decision depth, betting round) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementRow {
    pub depth: usize,
    /// `None` for rows pooled over rounds.
    pub round: Option<usize>,
    /// Player-averaged mean L1 distance between the two strategies.
    pub mean: f64,
    pub ci95: f64,
    pub std: f64,
    pub n: u64,
}

#[derive(Debug, Clone, Default)]
pub struct DisagreementTable {
    cells: BTreeMap<(usize, Option<usize>), [Moments; 2]>,
}

impl DisagreementTable {
    fn push(&mut self, seat: usize, depth: usize, round: usize, l1: f64) {
        for round in [Some(round), None] {
            self.cells.entry((depth, round)).or_default()[seat].push(l1);
        }
    }

    fn row(depth: usize, round: Option<usize>, m: &[Moments; 2]) -> DisagreementRow {
        let present: Vec<&Moments> = m.iter().filter(|m| m.count() > 0).collect();
        let mean = present.iter().map(|m| m.mean()).sum::<f64>() / present.len() as f64;
        let mut pooled = Moments::default();
        // pooled spread over both players' samples
        let n: u64 = present.iter().map(|m| m.count()).sum();
        let grand = present.iter().map(|m| m.mean() * m.count() as f64).sum::<f64>() / n as f64;
        let ss: f64 = present
            .iter()
            .map(|m| m.std().powi(2) * (m.count().saturating_sub(1)) as f64 + m.count() as f64 * (m.mean() - grand).powi(2))
            .sum();
        pooled.n = n;
        pooled.m2 = ss;
        let std = pooled.std();
        DisagreementRow { depth, round, mean, ci95: 1.96 * std / (n as f64).sqrt(), std, n }
    }

    /// Rows per (depth, round), ordered by depth then round.
    pub fn rows(&self) -> Vec<DisagreementRow> {
        self.cells
            .iter()
            .filter(|((_, r), _)| r.is_some())
            .map(|(&(d, r), m)| Self::row(d, r, m))
            .collect()
    }

    /// Rows pooled over rounds, one per depth.
    pub fn by_depth(&self) -> Vec<DisagreementRow> {
        self.cells
            .iter()
            .filter(|((_, r), _)| r.is_none())
            .map(|(&(d, r), m)| Self::row(d, r, m))
            .collect()
    }
}

/// Rolls out `n_rollouts` games per player where that player follows
/// `reference` (sampling its actions) and the opponent plays uniformly at
/// random; at every own decision the L1 distance between `reference` and
/// `other` is recorded by own-decision depth and betting round.
pub fn strategy_disagreement<G: Game>(
    game: &G,
    reference: [&mut dyn Policy; 2],
    other: [&mut dyn Policy; 2],
    n_rollouts: u64,
    seed: u64,
) -> Result<DisagreementTable, EvalError> {
    let mut table = DisagreementTable::default();
    let [r0, r1] = reference;
    let [o0, o1] = other;
    let mut pairs: [(&mut dyn Policy, &mut dyn Policy); 2] = [(r0, o0), (r1, o1)];
    for seat in 0..2 {
        let (reference, other) = &mut pairs[seat];
        for k in 0..n_rollouts {
            let mut rng = stream(seed, Purpose::Rollout, seat as u64, k);
            reference.reset(&mut rng)?;
            other.reset(&mut rng)?;
            let mut history: Vec<OwnStep> = Vec::new();
            let mut state = game.root();
            loop {
                match game.node_kind(&state) {
                    NodeKind::Terminal => break,
                    NodeKind::Chance => {
                        let outcomes = game.chance_outcomes(&state)?;
                        let probs: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
                        let idx = Distribution::from_vec_unchecked(probs).sample_with(rng.gen());
                        state = game.apply_action(&state, outcomes[idx].0)?;
                    }
                    NodeKind::Decision(p) if p == Player::from_seat(seat) => {
                        let point = game.decision_point(&state)?;
                        let a = reference.query(&point, &history)?;
                        let b = other.query(&point, &history)?;
                        table.push(seat, history.len(), game.round(&state), a.l1_distance(&b));
                        let idx = a.sample_with(rng.gen());
                        let slot = point.mask.slot_of(idx).expect("legal index");
                        history.push(OwnStep { point, action: idx });
                        state = game.apply_action(&state, slot)?;
                    }
                    NodeKind::Decision(_) => {
                        let mask = game.legal_mask(&state);
                        let idx = rng.gen_range(0..mask.count());
                        state = game.apply_action(&state, mask.slot_of(idx).unwrap())?;
                    }
                }
            }
        }
    }
    Ok(table)
}
