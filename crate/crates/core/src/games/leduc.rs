//! Leduc Hold'em with a configurable deck and raise cap.
//!
//! Cards are numbered `rank * n_suits + suit`; a higher rank index beats a
//! lower one and pairing the board beats any unpaired hand. Both players
//! ante, receive one private card, and play a preflop round; a public card is
//! then revealed and a flop round follows. Player 0 acts first in each round.
//! Fold is always offered, call doubles as check, raise is capped per round.

use crate::game::{Game, GameError, InfoSetKey, LegalMask, NodeKind, Player};

pub const FOLD: usize = 0;
pub const CALL: usize = 1;
pub const RAISE: usize = 2;

const NO_CARD: u8 = 0xFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeducConfig {
    pub n_ranks: u8,
    pub n_suits: u8,
    pub max_raises_per_round: u8,
    pub ante: i32,
    /// Raise size in the preflop and flop rounds.
    pub bet_sizes: [i32; 2],
}

impl Default for LeducConfig {
    fn default() -> Self {
        LeducConfig { n_ranks: 3, n_suits: 2, max_raises_per_round: 2, ante: 1, bet_sizes: [2, 4] }
    }
}

impl LeducConfig {
    /// The 12-rank, 6-raise variant.
    pub fn big() -> Self {
        LeducConfig { n_ranks: 12, max_raises_per_round: 6, ..Self::default() }
    }

    pub fn deck_size(&self) -> usize {
        self.n_ranks as usize * self.n_suits as usize
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.deck_size() < 3 {
            return Err(GameError::InvalidConfig(format!(
                "deck of {} cards cannot deal two hands and a board",
                self.deck_size()
            )));
        }
        if self.deck_size() >= NO_CARD as usize {
            return Err(GameError::InvalidConfig("deck too large".into()));
        }
        if self.bet_sizes.iter().any(|b| *b <= 0) || self.ante <= 0 {
            return Err(GameError::InvalidConfig("ante and bet sizes must be positive".into()));
        }
        if self.max_raises_per_round == 0 || self.max_raises_per_round > 12 {
            return Err(GameError::InvalidConfig("max_raises_per_round must be in 1..=12".into()));
        }
        Ok(())
    }

    /// Largest pot reachable: both players match every allowed raise.
    pub fn max_pot(&self) -> i32 {
        let r = self.max_raises_per_round as i32;
        2 * (self.ante + r * (self.bet_sizes[0] + self.bet_sizes[1]))
    }
}

#[derive(Debug, Clone)]
pub struct Leduc {
    cfg: LeducConfig,
}

impl Leduc {
    pub fn new(cfg: LeducConfig) -> Result<Self, GameError> {
        cfg.validate()?;
        Ok(Leduc { cfg })
    }

    pub fn standard() -> Self {
        Leduc { cfg: LeducConfig::default() }
    }

    pub fn config(&self) -> &LeducConfig {
        &self.cfg
    }

    fn rank(&self, card: u8) -> u8 {
        card / self.cfg.n_suits
    }

    /// Positions of the per-round action-history block.
    fn history_slots(&self) -> usize {
        self.cfg.max_raises_per_round as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LeducState {
    private: [Option<u8>; 2],
    board: Option<u8>,
    round: u8,
    contrib: [i32; 2],
    actions: [Vec<u8>; 2],
    raises: [u8; 2],
    folded: Option<u8>,
    showdown: bool,
}

impl LeducState {
    pub fn private_cards(&self) -> [Option<u8>; 2] {
        self.private
    }

    pub fn board(&self) -> Option<u8> {
        self.board
    }

    pub fn contributions(&self) -> [i32; 2] {
        self.contrib
    }

    pub fn pot(&self) -> i32 {
        self.contrib[0] + self.contrib[1]
    }

    pub fn raises_in_round(&self, round: usize) -> u8 {
        self.raises[round]
    }

    pub fn round_actions(&self, round: usize) -> &[u8] {
        &self.actions[round]
    }

    fn dealt(&self) -> impl Iterator<Item = u8> + '_ {
        self.private.iter().chain(std::iter::once(&self.board)).flatten().copied()
    }
}

impl Game for Leduc {
    type State = LeducState;

    fn name(&self) -> String {
        let c = &self.cfg;
        if *c == LeducConfig::default() {
            "leduc".into()
        } else {
            format!("leduc-{}x{}-r{}", c.n_ranks, c.n_suits, c.max_raises_per_round)
        }
    }

    fn root(&self) -> LeducState {
        LeducState {
            private: [None, None],
            board: None,
            round: 0,
            contrib: [self.cfg.ante; 2],
            actions: [Vec::new(), Vec::new()],
            raises: [0, 0],
            folded: None,
            showdown: false,
        }
    }

    fn node_kind(&self, s: &LeducState) -> NodeKind {
        if s.folded.is_some() || s.showdown {
            NodeKind::Terminal
        } else if s.private.iter().any(Option::is_none) || (s.round == 1 && s.board.is_none()) {
            NodeKind::Chance
        } else {
            NodeKind::Decision(Player::from_seat(s.actions[s.round as usize].len() % 2))
        }
    }

    fn max_actions(&self) -> usize {
        3
    }

    fn legal_mask(&self, s: &LeducState) -> LegalMask {
        match self.node_kind(s) {
            NodeKind::Decision(_) => {
                if s.raises[s.round as usize] < self.cfg.max_raises_per_round {
                    LegalMask::prefix(3)
                } else {
                    LegalMask::prefix(2)
                }
            }
            _ => LegalMask(0),
        }
    }

    fn action_label(&self, s: &LeducState, slot: usize) -> String {
        match self.node_kind(s) {
            NodeKind::Chance => {
                let rank = slot / self.cfg.n_suits as usize;
                let suit = slot % self.cfg.n_suits as usize;
                format!("R{rank}S{suit}")
            }
            _ => match slot {
                FOLD => "FOLD".into(),
                CALL => "CALL".into(),
                RAISE => "RAISE".into(),
                _ => format!("?{slot}"),
            },
        }
    }

    fn apply_action(&self, s: &LeducState, slot: usize) -> Result<LeducState, GameError> {
        match self.node_kind(s) {
            NodeKind::Terminal => Err(GameError::TerminalState),
            NodeKind::Chance => {
                if slot >= self.cfg.deck_size() || s.dealt().any(|c| c as usize == slot) {
                    return Err(GameError::IllegalAction { action: slot, legal: 0 });
                }
                let mut next = s.clone();
                let card = Some(slot as u8);
                if next.private[0].is_none() {
                    next.private[0] = card;
                } else if next.private[1].is_none() {
                    next.private[1] = card;
                } else {
                    next.board = card;
                }
                Ok(next)
            }
            NodeKind::Decision(p) => {
                let mask = self.legal_mask(s);
                if !mask.contains(slot) {
                    return Err(GameError::IllegalAction { action: slot, legal: mask.0 });
                }
                let seat = p.seat();
                let round = s.round as usize;
                let mut next = s.clone();
                match slot {
                    FOLD => next.folded = Some(seat as u8),
                    CALL => {
                        next.contrib[seat] = next.contrib[1 - seat];
                        next.actions[round].push(CALL as u8);
                        if next.actions[round].len() >= 2 {
                            if round == 0 {
                                next.round = 1;
                            } else {
                                next.showdown = true;
                            }
                        }
                    }
                    _ => {
                        next.contrib[seat] = next.contrib[1 - seat] + self.cfg.bet_sizes[round];
                        next.actions[round].push(RAISE as u8);
                        next.raises[round] += 1;
                    }
                }
                Ok(next)
            }
        }
    }

    fn chance_outcomes(&self, s: &LeducState) -> Result<Vec<(usize, f64)>, GameError> {
        if self.node_kind(s) != NodeKind::Chance {
            return Err(GameError::NotChanceNode);
        }
        let remaining: Vec<usize> = (0..self.cfg.deck_size())
            .filter(|c| !s.dealt().any(|d| d as usize == *c))
            .collect();
        let p = 1.0 / remaining.len() as f64;
        Ok(remaining.into_iter().map(|c| (c, p)).collect())
    }

    fn terminal_utility(&self, s: &LeducState, player: Player) -> Result<i32, GameError> {
        if self.node_kind(s) != NodeKind::Terminal {
            return Err(GameError::NonTerminal);
        }
        let seat = match player {
            Player::Chance => return Err(GameError::ChancePlayer),
            p => p.seat(),
        };
        let u0 = if let Some(folder) = s.folded {
            if folder == 0 {
                -s.contrib[0]
            } else {
                s.contrib[1]
            }
        } else {
            let board = self.rank(s.board.unwrap());
            let strength = |c: u8| {
                let r = self.rank(c);
                (r == board, r)
            };
            let (a, b) = (strength(s.private[0].unwrap()), strength(s.private[1].unwrap()));
            match a.cmp(&b) {
                std::cmp::Ordering::Greater => s.contrib[1],
                std::cmp::Ordering::Less => -s.contrib[0],
                std::cmp::Ordering::Equal => 0,
            }
        };
        Ok(if seat == 0 { u0 } else { -u0 })
    }

    /// `[player, private card, board card or 0xFF, preflop actions.., flop actions..]`.
    fn infoset_key(&self, s: &LeducState, player: Player) -> Result<InfoSetKey, GameError> {
        let seat = match player {
            Player::Chance => return Err(GameError::ChancePlayer),
            p => p.seat(),
        };
        let mut bytes = Vec::with_capacity(3 + s.actions[0].len() + s.actions[1].len());
        bytes.push(seat as u8);
        bytes.push(s.private[seat].unwrap_or(NO_CARD));
        bytes.push(s.board.unwrap_or(NO_CARD));
        bytes.extend_from_slice(&s.actions[0]);
        bytes.extend_from_slice(&s.actions[1]);
        Ok(InfoSetKey::new(bytes))
    }

    /// `deck` private one-hot, `deck` board one-hot, pot / max pot, raise
    /// counters per round, position flag, then for each round and each
    /// history position a (call, raise) indicator pair.
    fn feature_len(&self) -> usize {
        2 * self.cfg.deck_size() + 4 + 2 * 2 * self.history_slots()
    }

    fn encode_features(&self, s: &LeducState, player: Player) -> Result<Vec<f32>, GameError> {
        match self.node_kind(s) {
            NodeKind::Chance => return Err(GameError::ChanceNode),
            NodeKind::Terminal => return Err(GameError::TerminalState),
            NodeKind::Decision(p) if p != player => return Err(GameError::NotActing(player)),
            NodeKind::Decision(_) => {}
        }
        let seat = player.seat();
        let deck = self.cfg.deck_size();
        let max_r = self.cfg.max_raises_per_round as f32;
        let mut f = vec![0.0f32; self.feature_len()];
        f[s.private[seat].unwrap() as usize] = 1.0;
        if let Some(b) = s.board {
            f[deck + b as usize] = 1.0;
        }
        let base = 2 * deck;
        f[base] = s.pot() as f32 / self.cfg.max_pot() as f32;
        f[base + 1] = s.raises[0] as f32 / max_r;
        f[base + 2] = s.raises[1] as f32 / max_r;
        f[base + 3] = seat as f32;
        let hist = base + 4;
        let slots = self.history_slots();
        for round in 0..2 {
            for (pos, a) in s.actions[round].iter().enumerate() {
                let kind = if *a as usize == RAISE { 1 } else { 0 };
                f[hist + (round * slots + pos) * 2 + kind] = 1.0;
            }
        }
        Ok(f)
    }

    fn round(&self, s: &LeducState) -> usize {
        s.round as usize
    }

    fn ante(&self) -> i32 {
        self.cfg.ante
    }
}
