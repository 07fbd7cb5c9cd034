//! Three-card Kuhn poker: ante 1, one betting round, a single bet of 1.

use crate::game::{Game, GameError, InfoSetKey, LegalMask, NodeKind, Player};

pub const PASS: u8 = 0;
pub const BET: u8 = 1;
const N_CARDS: u8 = 3;
const MAX_POT: f32 = 4.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct Kuhn;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KuhnState {
    cards: [Option<u8>; 2],
    history: Vec<u8>,
}

impl KuhnState {
    pub fn cards(&self) -> [Option<u8>; 2] {
        self.cards
    }

    pub fn history(&self) -> &[u8] {
        &self.history
    }

    fn is_terminal(&self) -> bool {
        matches!(self.history.as_slice(), [PASS, PASS] | [BET, _] | [PASS, BET, _])
    }

    fn contributions(&self) -> [i32; 2] {
        let mut c = [1, 1];
        for (i, a) in self.history.iter().enumerate() {
            if *a == BET {
                c[i % 2] += 1;
            }
        }
        c
    }
}

impl Game for Kuhn {
    type State = KuhnState;

    fn name(&self) -> String {
        "kuhn".into()
    }

    fn root(&self) -> KuhnState {
        KuhnState { cards: [None, None], history: Vec::new() }
    }

    fn node_kind(&self, s: &KuhnState) -> NodeKind {
        if s.cards.iter().any(Option::is_none) {
            NodeKind::Chance
        } else if s.is_terminal() {
            NodeKind::Terminal
        } else {
            NodeKind::Decision(Player::from_seat(s.history.len() % 2))
        }
    }

    fn max_actions(&self) -> usize {
        2
    }

    fn legal_mask(&self, s: &KuhnState) -> LegalMask {
        match self.node_kind(s) {
            NodeKind::Decision(_) => LegalMask::prefix(2),
            _ => LegalMask(0),
        }
    }

    fn action_label(&self, s: &KuhnState, slot: usize) -> String {
        match self.node_kind(s) {
            NodeKind::Chance => ["J", "Q", "K"].get(slot).unwrap_or(&"?").to_string(),
            _ => if slot == PASS as usize { "PASS" } else { "BET" }.to_string(),
        }
    }

    fn apply_action(&self, s: &KuhnState, slot: usize) -> Result<KuhnState, GameError> {
        match self.node_kind(s) {
            NodeKind::Terminal => Err(GameError::TerminalState),
            NodeKind::Chance => {
                let seat = if s.cards[0].is_none() { 0 } else { 1 };
                if slot >= N_CARDS as usize || s.cards.contains(&Some(slot as u8)) {
                    return Err(GameError::IllegalAction { action: slot, legal: 0 });
                }
                let mut next = s.clone();
                next.cards[seat] = Some(slot as u8);
                Ok(next)
            }
            NodeKind::Decision(_) => {
                if slot > 1 {
                    return Err(GameError::IllegalAction { action: slot, legal: 0b11 });
                }
                let mut next = s.clone();
                next.history.push(slot as u8);
                Ok(next)
            }
        }
    }

    fn chance_outcomes(&self, s: &KuhnState) -> Result<Vec<(usize, f64)>, GameError> {
        if self.node_kind(s) != NodeKind::Chance {
            return Err(GameError::NotChanceNode);
        }
        let remaining: Vec<usize> =
            (0..N_CARDS).filter(|c| !s.cards.contains(&Some(*c))).map(usize::from).collect();
        let p = 1.0 / remaining.len() as f64;
        Ok(remaining.into_iter().map(|c| (c, p)).collect())
    }

    fn terminal_utility(&self, s: &KuhnState, player: Player) -> Result<i32, GameError> {
        if self.node_kind(s) != NodeKind::Terminal {
            return Err(GameError::NonTerminal);
        }
        let seat = match player {
            Player::Chance => return Err(GameError::ChancePlayer),
            p => p.seat(),
        };
        let contrib = s.contributions();
        let u0 = match s.history.as_slice() {
            [BET, PASS] => contrib[1],
            [PASS, BET, PASS] => -contrib[0],
            _ => {
                let (c0, c1) = (s.cards[0].unwrap(), s.cards[1].unwrap());
                if c0 > c1 {
                    contrib[1]
                } else {
                    -contrib[0]
                }
            }
        };
        Ok(if seat == 0 { u0 } else { -u0 })
    }

    fn infoset_key(&self, s: &KuhnState, player: Player) -> Result<InfoSetKey, GameError> {
        let seat = match player {
            Player::Chance => return Err(GameError::ChancePlayer),
            p => p.seat(),
        };
        let mut bytes = Vec::with_capacity(2 + s.history.len());
        bytes.push(seat as u8);
        bytes.push(s.cards[seat].unwrap_or(0xFF));
        bytes.extend_from_slice(&s.history);
        Ok(InfoSetKey::new(bytes))
    }

    fn feature_len(&self) -> usize {
        N_CARDS as usize + 3
    }

    /// `[card one-hot (3), pot / 4, bets so far, position]`.
    fn encode_features(&self, s: &KuhnState, player: Player) -> Result<Vec<f32>, GameError> {
        match self.node_kind(s) {
            NodeKind::Chance => return Err(GameError::ChanceNode),
            NodeKind::Terminal => return Err(GameError::TerminalState),
            NodeKind::Decision(p) if p != player => return Err(GameError::NotActing(player)),
            NodeKind::Decision(_) => {}
        }
        let seat = player.seat();
        let mut f = vec![0.0f32; self.feature_len()];
        f[s.cards[seat].unwrap() as usize] = 1.0;
        let c = s.contributions();
        f[3] = (c[0] + c[1]) as f32 / MAX_POT;
        f[4] = s.history.iter().filter(|a| **a == BET).count() as f32;
        f[5] = seat as f32;
        Ok(f)
    }

    fn round(&self, _s: &KuhnState) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deal(c0: u8, c1: u8) -> KuhnState {
        let g = Kuhn;
        let s = g.apply_action(&g.root(), c0 as usize).unwrap();
        g.apply_action(&s, c1 as usize).unwrap()
    }

    fn play(s: &KuhnState, actions: &[usize]) -> KuhnState {
        actions.iter().fold(s.clone(), |s, a| Kuhn.apply_action(&s, *a).unwrap())
    }

    #[test]
    fn fold_and_showdown_payoffs() {
        let g = Kuhn;
        let s = deal(0, 2);
        assert_eq!(g.terminal_utility(&play(&s, &[1, 0]), Player::P0), Ok(1));
        assert_eq!(g.terminal_utility(&play(&s, &[0, 0]), Player::P0), Ok(-1));
        assert_eq!(g.terminal_utility(&play(&s, &[0, 1, 1]), Player::P1), Ok(2));
        assert_eq!(g.terminal_utility(&play(&s, &[0, 1, 0]), Player::P1), Ok(1));
        assert_eq!(g.terminal_utility(&s, Player::P0), Err(GameError::NonTerminal));
    }

    #[test]
    fn chance_deals_remaining_cards() {
        let g = Kuhn;
        assert_eq!(g.chance_outcomes(&g.root()).unwrap().len(), 3);
        let s = g.apply_action(&g.root(), 1).unwrap();
        let outcomes = g.chance_outcomes(&s).unwrap();
        assert_eq!(outcomes.iter().map(|o| o.0).collect::<Vec<_>>(), vec![0, 2]);
        assert!(g.apply_action(&s, 1).is_err());
    }

    #[test]
    fn features_distinguish_infosets() {
        let g = Kuhn;
        let s = deal(2, 0);
        let a = g.encode_features(&s, Player::P0).unwrap();
        let b = g.encode_features(&play(&s, &[0]), Player::P1).unwrap();
        assert_ne!(a, b);
        assert!(g.encode_features(&s, Player::P1).is_err());
    }
}
