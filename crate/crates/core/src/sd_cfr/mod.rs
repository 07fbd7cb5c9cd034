//! Single Deep CFR: the average strategy rebuilt from the stored sequence of
//! value networks, by trajectory sampling or by exact reach-weighted queries.

mod buffer;
mod query;

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::game::{DecisionPoint, Distribution, InfoSetKey, Player};
use crate::nn::CheckpointError;
use crate::policy::PolicyError;
use crate::tabular::IterationStrategySnapshot;
use crate::tree::GameTree;

pub use buffer::{read_manifest, ModelBuffer, ModelEntry, ModelSource, ModelStorage, DEFAULT_LRU_CAPACITY};
pub use query::{
    average_profile, average_strategies, explicit_average_distribution, explicit_average_distribution_with,
    sample_iteration_network, CachedAveragePolicy, ExplicitAveragePolicy, ReachCache, TrajectoryPolicy,
};

#[derive(Debug, Error)]
pub enum SdCfrError {
    #[error("reach cache at depth {expected} was stepped with depth {found}")]
    DepthMismatch { expected: usize, found: usize },
    #[error("model buffer holds no network for {0:?}")]
    EmptyModelBuffer(Player),
    #[error("iteration {got} pushed after {last} in keep-all mode")]
    NonMonotonic { last: u64, got: u64 },
    #[error("corrupt checkpoint {path}: {reason}")]
    CorruptCheckpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl From<SdCfrError> for PolicyError {
    fn from(e: SdCfrError) -> Self {
        match e {
            SdCfrError::EmptyModelBuffer(p) => PolicyError::EmptyModelBuffer(p),
            SdCfrError::Policy(p) => p,
            other => PolicyError::Model(other.to_string()),
        }
    }
}

/// The strategy one stored iteration played: a value network read through
/// the advantage rule, or an exact table.
pub trait IterationPolicy: Send + Sync + fmt::Debug {
    /// Iteration strategy at each point, with a flag telling whether the
    /// all-nonpositive fallback produced it.
    fn derive(&self, points: &[&DecisionPoint]) -> Result<Vec<(Distribution, bool)>, PolicyError>;

    fn strategies(&self, points: &[&DecisionPoint]) -> Result<Vec<Distribution>, PolicyError> {
        Ok(self.derive(points)?.into_iter().map(|d| d.0).collect())
    }

    fn strategy(&self, point: &DecisionPoint) -> Result<Distribution, PolicyError> {
        Ok(self.derive(&[point])?.pop().expect("one point in, one out").0)
    }
}

/// An iteration strategy stored as a per-infoset table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableStrategy {
    table: HashMap<InfoSetKey, Distribution>,
}

impl TableStrategy {
    pub fn new(table: HashMap<InfoSetKey, Distribution>) -> Self {
        TableStrategy { table }
    }

    /// `player`'s part of a tabular snapshot, or `None` if that player was not
    /// updated on the snapshot's iteration.
    pub fn from_snapshot(tree: &GameTree, snapshot: &IterationStrategySnapshot, player: Player) -> Option<Self> {
        let strategies = snapshot.strategies[player.seat()].as_ref()?;
        let table = tree
            .player_infosets(player)
            .iter()
            .map(|&i| (tree.infoset(i).key.clone(), strategies[i].clone()))
            .collect();
        Some(TableStrategy { table })
    }
}

impl IterationPolicy for TableStrategy {
    fn derive(&self, points: &[&DecisionPoint]) -> Result<Vec<(Distribution, bool)>, PolicyError> {
        points
            .iter()
            .map(|p| {
                self.table
                    .get(&p.key)
                    .map(|d| (d.clone(), false))
                    .ok_or_else(|| PolicyError::UnknownInfoSet(p.key.clone()))
            })
            .collect()
    }
}
