//! Strategy evaluation: exact best response and exploitability, duplicate
//! head-to-head matches, and per-depth strategy disagreement.

mod best_response;
mod disagreement;
mod head_to_head;

use std::fmt;

use thiserror::Error;

use crate::game::GameError;
use crate::policy::PolicyError;

pub use best_response::{
    best_response, best_response_to_policy, expected_value, exploitability, exploitability_of_policies,
    BestResponse, Exploitability,
};
pub use disagreement::{strategy_disagreement, DisagreementRow, DisagreementTable};
pub use head_to_head::{head_to_head, play_hand, Pairing};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Game(GameError),
    #[error(transparent)]
    Policy(PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// Milli-antes per game.
    MilliAntes,
    /// Milli-big-blinds per game.
    MilliBigBlinds,
}

impl Units {
    pub fn label(self) -> &'static str {
        match self {
            Units::MilliAntes => "mA/g",
            Units::MilliBigBlinds => "mbb/g",
        }
    }

    /// Units for a game and the chips-to-units factor.
    pub fn for_game(ante: i32, big_blind: Option<i32>) -> (Units, f64) {
        match big_blind {
            Some(bb) => (Units::MilliBigBlinds, 1000.0 / bb as f64),
            None => (Units::MilliAntes, 1000.0 / ante as f64),
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One evaluation result.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub units: Units,
    pub samples: u64,
    /// 95% confidence half-width; zero for exact metrics.
    pub ci95: f64,
    pub seed: Option<u64>,
}

impl EvalReport {
    pub fn exact(metric: &str, value: f64, units: Units) -> Self {
        EvalReport { metric: metric.into(), value, units, samples: 0, ci95: 0.0, seed: None }
    }
}

/// Running mean / variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation.
    pub fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }

    pub fn ci95(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            1.96 * self.std() / (self.n as f64).sqrt()
        }
    }
}
