//! Extensive-form game abstraction: players, actions, information-set keys,
//! behavioural distributions and the [`Game`] trait implemented by every
//! concrete game.

use std::fmt;

use thiserror::Error;

/// Errors raised by game engines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("action {action} is not legal here (legal mask {legal:#b})")]
    IllegalAction { action: usize, legal: u32 },
    #[error("state is terminal")]
    TerminalState,
    #[error("state is not terminal")]
    NonTerminal,
    #[error("operation is undefined for the chance player")]
    ChancePlayer,
    #[error("current node is not a chance node")]
    NotChanceNode,
    #[error("chance is to act")]
    ChanceNode,
    #[error("player {0:?} is not the acting player")]
    NotActing(Player),
    #[error("game tree exceeds the node budget of {budget}")]
    GameTooLarge { budget: usize },
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
}

/// Who moves at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    P0,
    P1,
    Chance,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::P0, Player::P1];

    pub fn opponent(self) -> Result<Player, GameError> {
        match self {
            Player::P0 => Ok(Player::P1),
            Player::P1 => Ok(Player::P0),
            Player::Chance => Err(GameError::ChancePlayer),
        }
    }

    /// Seat index (0 or 1). Panics for chance; callers check first.
    pub fn seat(self) -> usize {
        match self {
            Player::P0 => 0,
            Player::P1 => 1,
            Player::Chance => panic!("chance has no seat"),
        }
    }

    pub fn from_seat(seat: usize) -> Player {
        match seat {
            0 => Player::P0,
            1 => Player::P1,
            _ => panic!("seat {seat} out of range"),
        }
    }
}

/// A move at a decision or chance node.
///
/// `id` is the action's slot in the game's fixed action space; for the poker
/// games in this crate legal actions always form a prefix of that space, so
/// `id` doubles as the index into the legal-action list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    pub id: usize,
    pub label: String,
}

/// Bit set of legal action slots (at most 32 slots).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LegalMask(pub u32);

impl LegalMask {
    pub fn from_slots(slots: &[usize]) -> Self {
        LegalMask(slots.iter().fold(0, |m, &s| m | (1 << s)))
    }

    /// Mask with the first `n` slots set.
    pub fn prefix(n: usize) -> Self {
        LegalMask(if n >= 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    pub fn contains(self, slot: usize) -> bool {
        slot < 32 && self.0 & (1 << slot) != 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Legal slots in increasing order.
    pub fn slots(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |s| bits & (1 << s) != 0)
    }

    /// Slot of the `idx`-th legal action.
    pub fn slot_of(self, idx: usize) -> Option<usize> {
        self.slots().nth(idx)
    }

    /// Position of `slot` within the legal list.
    pub fn index_of(self, slot: usize) -> Option<usize> {
        if !self.contains(slot) {
            return None;
        }
        Some((self.0 & ((1u32 << slot) - 1)).count_ones() as usize)
    }
}

/// Canonical byte encoding of an information set:
/// `[player, private cards.., public cards.., action history..]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct InfoSetKey(Vec<u8>);

impl InfoSetKey {
    pub fn new(bytes: Vec<u8>) -> Self {
        InfoSetKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Acting player encoded in the first byte.
    pub fn player(&self) -> Option<Player> {
        match self.0.first() {
            Some(0) => Some(Player::P0),
            Some(1) => Some(Player::P1),
            _ => None,
        }
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for InfoSetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InfoSetKey({})", self.to_hex())
    }
}

impl fmt::Display for InfoSetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Probability vector over the legal actions of a decision point, in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("empty action set")]
    Empty,
    #[error("probabilities must be finite and non-negative")]
    Negative,
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
}

impl Distribution {
    pub const TOLERANCE: f64 = 1e-9;

    /// Validating constructor.
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(DistributionError::Negative);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(DistributionError::NotNormalized(sum));
        }
        Ok(Distribution(probs))
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{probs:?}");
        Distribution(probs)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero actions");
        Distribution(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, idx: usize) -> Self {
        let mut p = vec![0.0; n];
        p[idx] = 1.0;
        Distribution(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Scatter into a slot-indexed vector of length `n_slots` (zeros elsewhere).
    pub fn to_slots(&self, mask: LegalMask, n_slots: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_slots];
        for (p, slot) in self.0.iter().zip(mask.slots()) {
            out[slot] = *p;
        }
        out
    }

    /// Sum of absolute differences.
    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self.l1_distance(other)
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Inverse-CDF sample given `u` in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding: fall back to the last action with positive mass
        self.0.iter().rposition(|p| *p > 0.0).unwrap_or(self.0.len() - 1)
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// What a policy sees when asked to act: the infoset key, the feature
/// encoding, and the legal actions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoint {
    pub key: InfoSetKey,
    pub features: Vec<f32>,
    pub mask: LegalMask,
}

impl DecisionPoint {
    pub fn num_actions(&self) -> usize {
        self.mask.count()
    }
}

/// Kind of node a state represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Terminal,
    Chance,
    Decision(Player),
}

/// A finite two-player zero-sum extensive-form game with explicit chance nodes.
///
/// States are immutable values; [`Game::apply_action`] returns a fresh successor.
pub trait Game: Send + Sync {
    type State: Clone + Send + Sync + fmt::Debug;

    fn name(&self) -> String;

    fn root(&self) -> Self::State;

    fn node_kind(&self, state: &Self::State) -> NodeKind;

    /// Size of the fixed action space (network output width).
    fn max_actions(&self) -> usize;

    /// Legal actions at a decision node; empty at chance and terminal nodes.
    fn legal_mask(&self, state: &Self::State) -> LegalMask;

    fn action_label(&self, state: &Self::State, slot: usize) -> String;

    fn apply_action(&self, state: &Self::State, slot: usize) -> Result<Self::State, GameError>;

    /// Outcome slots and their probabilities at a chance node.
    fn chance_outcomes(&self, state: &Self::State) -> Result<Vec<(usize, f64)>, GameError>;

    /// Net chips won by `player` at a terminal.
    fn terminal_utility(&self, state: &Self::State, player: Player) -> Result<i32, GameError>;

    fn infoset_key(&self, state: &Self::State, player: Player) -> Result<InfoSetKey, GameError>;

    fn feature_len(&self) -> usize;

    fn encode_features(&self, state: &Self::State, player: Player) -> Result<Vec<f32>, GameError>;

    /// Betting round index of the state.
    fn round(&self, state: &Self::State) -> usize;

    /// Chips per ante (unit of mA/g).
    fn ante(&self) -> i32 {
        1
    }

    /// Big blind size for games played with blinds.
    fn big_blind(&self) -> Option<i32> {
        None
    }

    fn current_player(&self, state: &Self::State) -> Result<Player, GameError> {
        match self.node_kind(state) {
            NodeKind::Terminal => Err(GameError::TerminalState),
            NodeKind::Chance => Ok(Player::Chance),
            NodeKind::Decision(p) => Ok(p),
        }
    }

    fn is_terminal(&self, state: &Self::State) -> bool {
        self.node_kind(state) == NodeKind::Terminal
    }

    fn legal_actions(&self, state: &Self::State) -> Vec<Action> {
        self.legal_mask(state)
            .slots()
            .map(|id| Action { id, label: self.action_label(state, id) })
            .collect()
    }

    /// Key, features and mask for the acting player.
    fn decision_point(&self, state: &Self::State) -> Result<DecisionPoint, GameError> {
        let player = match self.node_kind(state) {
            NodeKind::Decision(p) => p,
            NodeKind::Chance => return Err(GameError::ChanceNode),
            NodeKind::Terminal => return Err(GameError::TerminalState),
        };
        Ok(DecisionPoint {
            key: self.infoset_key(state, player)?,
            features: self.encode_features(state, player)?,
            mask: self.legal_mask(state),
        })
    }
}
