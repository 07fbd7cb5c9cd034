//! Behavioural policies and their tabulation over an enumerated tree.

use std::collections::HashMap;

use rand::RngCore;
use thiserror::Error;

use crate::game::{DecisionPoint, Distribution, InfoSetKey, Player};
use crate::tree::GameTree;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no legal action")]
    NoLegalAction,
    #[error("episodic policy queried before reset")]
    QueryBeforeReset,
    #[error("model buffer holds no network for {0:?}")]
    EmptyModelBuffer(Player),
    #[error("no strategy stored for infoset {0}")]
    UnknownInfoSet(InfoSetKey),
    #[error("model failure: {0}")]
    Model(String),
}

/// One of the acting player's earlier decisions on the current trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnStep {
    pub point: DecisionPoint,
    /// Index into the legal-action list at `point`.
    pub action: usize,
}

/// A behavioural strategy for one player.
///
/// `history` lists the player's own earlier decisions on the current
/// trajectory; stateless policies ignore it. Episodic policies (trajectory
/// sampling) are reset at the start of every game.
pub trait Policy {
    fn reset(&mut self, _rng: &mut dyn RngCore) -> Result<(), PolicyError> {
        Ok(())
    }

    fn query(&mut self, point: &DecisionPoint, history: &[OwnStep]) -> Result<Distribution, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<(), PolicyError> {
        (**self).reset(rng)
    }

    fn query(&mut self, point: &DecisionPoint, history: &[OwnStep]) -> Result<Distribution, PolicyError> {
        (**self).query(point, history)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn query(&mut self, point: &DecisionPoint, _: &[OwnStep]) -> Result<Distribution, PolicyError> {
        match point.num_actions() {
            0 => Err(PolicyError::NoLegalAction),
            n => Ok(Distribution::uniform(n)),
        }
    }
}

/// Always plays the given action slot when legal, otherwise the highest legal slot below it.
#[derive(Debug, Clone, Copy)]
pub struct FixedActionPolicy(pub usize);

impl Policy for FixedActionPolicy {
    fn query(&mut self, point: &DecisionPoint, _: &[OwnStep]) -> Result<Distribution, PolicyError> {
        let n = point.num_actions();
        if n == 0 {
            return Err(PolicyError::NoLegalAction);
        }
        let idx = point
            .mask
            .slots()
            .enumerate()
            .filter(|(_, s)| *s <= self.0)
            .map(|(i, _)| i)
            .last()
            .unwrap_or(0);
        Ok(Distribution::one_hot(n, idx))
    }
}

/// Lookup-table policy keyed by infoset; missing keys are an error.
#[derive(Debug, Clone, Default)]
pub struct TablePolicy {
    table: HashMap<InfoSetKey, Distribution>,
}

impl TablePolicy {
    pub fn new(table: HashMap<InfoSetKey, Distribution>) -> Self {
        TablePolicy { table }
    }

    /// Table over every infoset of `tree` from a per-infoset profile.
    pub fn from_profile(tree: &GameTree, profile: &[Distribution]) -> Self {
        let table = tree.infosets().iter().zip(profile).map(|(i, d)| (i.key.clone(), d.clone())).collect();
        TablePolicy { table }
    }

    pub fn get(&self, key: &InfoSetKey) -> Option<&Distribution> {
        self.table.get(key)
    }
}

impl Policy for TablePolicy {
    fn query(&mut self, point: &DecisionPoint, _: &[OwnStep]) -> Result<Distribution, PolicyError> {
        self.table.get(&point.key).cloned().ok_or_else(|| PolicyError::UnknownInfoSet(point.key.clone()))
    }
}

/// The own-decision history leading to `infoset`, in the form policies consume.
pub fn own_history(tree: &GameTree, infoset: usize) -> Vec<OwnStep> {
    tree.own_trajectory(infoset)
        .into_iter()
        .map(|(i, a)| OwnStep { point: tree.infoset(i).decision_point(), action: a })
        .collect()
}

/// Queries `policy` at every infoset of `player`, parents before children.
/// Entries for the other player's infosets are `None`.
pub fn tabulate(
    tree: &GameTree,
    player: Player,
    policy: &mut dyn Policy,
) -> Result<Vec<Option<Distribution>>, PolicyError> {
    let mut out = vec![None; tree.infosets().len()];
    for &i in tree.player_infosets(player) {
        let info = tree.infoset(i);
        let dist = policy.query(&info.decision_point(), &own_history(tree, i))?;
        if dist.len() != info.num_actions() {
            return Err(PolicyError::Model(format!(
                "policy returned {} probabilities for {} actions",
                dist.len(),
                info.num_actions()
            )));
        }
        out[i] = Some(dist);
    }
    Ok(out)
}

/// Full profile (both players) indexed by infoset id.
pub fn tabulate_profile(
    tree: &GameTree,
    p0: &mut dyn Policy,
    p1: &mut dyn Policy,
) -> Result<Vec<Distribution>, PolicyError> {
    merge_profiles(tabulate(tree, Player::P0, p0)?, tabulate(tree, Player::P1, p1)?)
}

/// Combines two per-player tabulations into one full profile.
pub fn merge_profiles(
    a: Vec<Option<Distribution>>,
    b: Vec<Option<Distribution>>,
) -> Result<Vec<Distribution>, PolicyError> {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| x.or(y).ok_or_else(|| PolicyError::Model("profile has a hole".into())))
        .collect()
}

/// Uniform strategy at every infoset of the tree.
pub fn uniform_profile(tree: &GameTree) -> Vec<Distribution> {
    tree.infosets().iter().map(|i| Distribution::uniform(i.num_actions())).collect()
}
