//! Counterfactual regret minimization for two-player zero-sum games:
//! tabular CFR, Deep CFR and Single Deep CFR, with exact and sampled evaluation.

pub mod deep_cfr;
pub mod eval;
pub mod game;
pub mod games;
pub mod nn;
pub mod parallel;
pub mod policy;
pub mod rng;
pub mod sampling;
pub mod sd_cfr;
pub mod tabular;
pub mod tree;

pub use game::{Action, DecisionPoint, Distribution, Game, GameError, InfoSetKey, LegalMask, NodeKind, Player};
