//! Fully enumerated game trees for games small enough to walk exhaustively.
//!
//! The tree is stored as a flat arena with information sets resolved to dense
//! indices. Information sets are numbered in order of first discovery during a
//! depth-first walk, so a player's earlier infoset on any path always has a
//! smaller index than a later one.

use std::collections::HashMap;

use crate::game::{DecisionPoint, Game, GameError, InfoSetKey, LegalMask, NodeKind, Player};

/// Default cap on the number of nodes materialized by [`GameTree::build`].
pub const DEFAULT_NODE_BUDGET: usize = 5_000_000;

#[derive(Debug, Clone)]
pub enum TreeNode {
    /// Net chips for player 0 (player 1 receives the negation).
    Terminal { utility: i32 },
    Chance { children: Vec<(usize, f64)> },
    Decision { player: Player, infoset: usize, children: Vec<usize> },
}

/// One information set of the enumerated tree.
#[derive(Debug, Clone)]
pub struct InfoSetInfo {
    pub key: InfoSetKey,
    pub player: Player,
    pub mask: LegalMask,
    pub features: Vec<f32>,
    pub round: usize,
    /// Number of the player's own decisions before reaching this infoset.
    pub depth: usize,
    /// Previous own infoset and the legal-action index taken there.
    pub parent: Option<(usize, usize)>,
    /// Tree nodes belonging to this infoset.
    pub nodes: Vec<usize>,
}

impl InfoSetInfo {
    pub fn num_actions(&self) -> usize {
        self.mask.count()
    }

    pub fn decision_point(&self) -> DecisionPoint {
        DecisionPoint { key: self.key.clone(), features: self.features.clone(), mask: self.mask }
    }
}

#[derive(Debug, Clone)]
pub struct GameTree {
    nodes: Vec<TreeNode>,
    infosets: Vec<InfoSetInfo>,
    index: HashMap<InfoSetKey, usize>,
    per_player: [Vec<usize>; 2],
    ante: i32,
    name: String,
}

impl GameTree {
    pub fn build<G: Game>(game: &G) -> Result<Self, GameError> {
        Self::build_with_budget(game, DEFAULT_NODE_BUDGET)
    }

    pub fn build_with_budget<G: Game>(game: &G, budget: usize) -> Result<Self, GameError> {
        let mut tree = GameTree {
            nodes: Vec::new(),
            infosets: Vec::new(),
            index: HashMap::new(),
            per_player: [Vec::new(), Vec::new()],
            ante: game.ante(),
            name: game.name(),
        };
        let mut last_own: [Option<(usize, usize)>; 2] = [None, None];
        tree.expand(game, &game.root(), &mut last_own, budget)?;
        Ok(tree)
    }

    fn expand<G: Game>(
        &mut self,
        game: &G,
        state: &G::State,
        last_own: &mut [Option<(usize, usize)>; 2],
        budget: usize,
    ) -> Result<usize, GameError> {
        if self.nodes.len() >= budget {
            return Err(GameError::GameTooLarge { budget });
        }
        let id = self.nodes.len();
        match game.node_kind(state) {
            NodeKind::Terminal => {
                let utility = game.terminal_utility(state, Player::P0)?;
                self.nodes.push(TreeNode::Terminal { utility });
            }
            NodeKind::Chance => {
                self.nodes.push(TreeNode::Chance { children: Vec::new() });
                let mut children = Vec::new();
                for (slot, p) in game.chance_outcomes(state)? {
                    let child = game.apply_action(state, slot)?;
                    children.push((self.expand(game, &child, last_own, budget)?, p));
                }
                self.nodes[id] = TreeNode::Chance { children };
            }
            NodeKind::Decision(player) => {
                let seat = player.seat();
                let key = game.infoset_key(state, player)?;
                let infoset = match self.index.get(&key) {
                    Some(&i) => {
                        debug_assert_eq!(self.infosets[i].parent, last_own[seat], "imperfect recall");
                        i
                    }
                    None => {
                        let i = self.infosets.len();
                        self.infosets.push(InfoSetInfo {
                            key: key.clone(),
                            player,
                            mask: game.legal_mask(state),
                            features: game.encode_features(state, player)?,
                            round: game.round(state),
                            depth: last_own[seat].map_or(0, |(p, _)| self.infosets[p].depth + 1),
                            parent: last_own[seat],
                            nodes: Vec::new(),
                        });
                        self.index.insert(key, i);
                        self.per_player[seat].push(i);
                        i
                    }
                };
                self.infosets[infoset].nodes.push(id);
                self.nodes.push(TreeNode::Decision { player, infoset, children: Vec::new() });
                let saved = last_own[seat];
                let mut children = Vec::new();
                for (idx, slot) in game.legal_mask(state).slots().enumerate() {
                    let child = game.apply_action(state, slot)?;
                    last_own[seat] = Some((infoset, idx));
                    children.push(self.expand(game, &child, last_own, budget)?);
                }
                last_own[seat] = saved;
                self.nodes[id] = TreeNode::Decision { player, infoset, children };
            }
        }
        Ok(id)
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn infosets(&self) -> &[InfoSetInfo] {
        &self.infosets
    }

    pub fn infoset(&self, id: usize) -> &InfoSetInfo {
        &self.infosets[id]
    }

    pub fn infoset_id(&self, key: &InfoSetKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Infoset ids of `player`, parents before children.
    pub fn player_infosets(&self, player: Player) -> &[usize] {
        &self.per_player[player.seat()]
    }

    pub fn ante(&self) -> i32 {
        self.ante
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Own decision trajectory leading to `infoset`: `(infoset, action index)` pairs.
    pub fn own_trajectory(&self, infoset: usize) -> Vec<(usize, usize)> {
        let mut steps = Vec::new();
        let mut cur = self.infosets[infoset].parent;
        while let Some((p, a)) = cur {
            steps.push((p, a));
            cur = self.infosets[p].parent;
        }
        steps.reverse();
        steps
    }
}

/// Per-player listing of `(key, |A(I)|)`.
pub fn enumerate_infosets<G: Game>(game: &G) -> Result<[Vec<(InfoSetKey, usize)>; 2], GameError> {
    let tree = GameTree::build(game)?;
    Ok(Player::BOTH.map(|p| {
        tree.player_infosets(p)
            .iter()
            .map(|&i| (tree.infoset(i).key.clone(), tree.infoset(i).num_actions()))
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{Kuhn, Leduc, LeducConfig};

    #[test]
    fn kuhn_has_twelve_infosets() {
        let sets = enumerate_infosets(&Kuhn).unwrap();
        assert_eq!(sets[0].len(), 6);
        assert_eq!(sets[1].len(), 6);
    }

    #[test]
    fn leduc_action_counts() {
        let sets = enumerate_infosets(&Leduc::standard()).unwrap();
        for (_, n) in sets.iter().flatten() {
            assert!(*n == 2 || *n == 3);
        }
    }

    #[test]
    fn node_budget() {
        let big = Leduc::new(LeducConfig::big()).unwrap();
        assert_eq!(
            GameTree::build_with_budget(&big, 10_000).unwrap_err(),
            GameError::GameTooLarge { budget: 10_000 }
        );
    }

    #[test]
    fn parents_precede_children() {
        let tree = GameTree::build(&Leduc::standard()).unwrap();
        for (i, info) in tree.infosets().iter().enumerate() {
            if let Some((p, a)) = info.parent {
                assert!(p < i);
                assert!(a < tree.infoset(p).num_actions());
                assert_eq!(tree.infoset(p).player, info.player);
                assert_eq!(info.depth, tree.infoset(p).depth + 1);
            }
        }
    }
}
