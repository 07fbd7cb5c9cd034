use crate::game::{Distribution, Game, GameError, Player};
use crate::policy::{tabulate, Policy, PolicyError};
use crate::tree::{GameTree, TreeNode};

use super::{EvalError, EvalReport, Units};

/// Best-response value and the deterministic responder strategy.
#[derive(Debug, Clone)]
pub struct BestResponse {
    /// Responder's expected chips per game.
    pub value: f64,
    /// Chosen legal-action index at each responder infoset (`None` elsewhere).
    pub actions: Vec<Option<usize>>,
}

impl BestResponse {
    /// The best response as a full-profile fragment (one-hot at responder infosets).
    pub fn as_profile(&self, tree: &GameTree) -> Vec<Option<Distribution>> {
        self.actions
            .iter()
            .enumerate()
            .map(|(i, a)| a.map(|a| Distribution::one_hot(tree.infoset(i).num_actions(), a)))
            .collect()
    }
}

/// Exact best response of `responder` against the other player's strategy in
/// `profile` (indexed by infoset id; responder entries are ignored).
///
/// Responder infosets are resolved deepest-first: the value of each action is
/// the opponent-and-chance-reach-weighted sum over the infoset's histories,
/// with deeper responder choices already fixed.
pub fn best_response(tree: &GameTree, profile: &[Distribution], responder: Player) -> BestResponse {
    let seat = responder.seat();
    let n = tree.num_nodes();

    // opponent * chance reach of every node
    let mut reach = vec![0.0f64; n];
    reach[tree.root()] = 1.0;
    for id in 0..n {
        // children always have larger ids than their parent
        let r = reach[id];
        match tree.node(id) {
            TreeNode::Terminal { .. } => {}
            TreeNode::Chance { children } => {
                for &(c, p) in children {
                    reach[c] = r * p;
                }
            }
            TreeNode::Decision { player, infoset, children } => {
                let sigma = profile[*infoset].probs();
                for (a, &c) in children.iter().enumerate() {
                    reach[c] = if player.seat() == seat { r } else { r * sigma[a] };
                }
            }
        }
    }

    let mut actions: Vec<Option<usize>> = vec![None; tree.infosets().len()];
    let mut memo = vec![f64::NAN; n];
    let own = tree.player_infosets(responder);
    for &i in own.iter().rev() {
        let info = tree.infoset(i);
        let mut q = vec![0.0f64; info.num_actions()];
        for &h in &info.nodes {
            if reach[h] == 0.0 {
                continue;
            }
            let TreeNode::Decision { children, .. } = tree.node(h) else { unreachable!() };
            for (a, &c) in children.iter().enumerate() {
                q[a] += reach[h] * value(tree, profile, seat, &actions, &mut memo, c);
            }
        }
        let best = q
            .iter()
            .enumerate()
            .fold(0, |best, (a, v)| if *v > q[best] { a } else { best });
        actions[i] = Some(best);
    }
    let value = value(tree, profile, seat, &actions, &mut memo, tree.root());
    BestResponse { value, actions }
}

fn value(
    tree: &GameTree,
    profile: &[Distribution],
    seat: usize,
    actions: &[Option<usize>],
    memo: &mut [f64],
    node: usize,
) -> f64 {
    if !memo[node].is_nan() {
        return memo[node];
    }
    let v = match tree.node(node) {
        TreeNode::Terminal { utility } => {
            if seat == 0 {
                *utility as f64
            } else {
                -(*utility as f64)
            }
        }
        TreeNode::Chance { children } => {
            children.iter().map(|&(c, p)| p * value(tree, profile, seat, actions, memo, c)).sum()
        }
        TreeNode::Decision { player, infoset, children } => {
            if player.seat() == seat {
                let a = actions[*infoset].expect("deeper responder infosets resolved first");
                value(tree, profile, seat, actions, memo, children[a])
            } else {
                let sigma = profile[*infoset].probs();
                children
                    .iter()
                    .zip(sigma)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(&c, p)| p * value(tree, profile, seat, actions, memo, c))
                    .sum()
            }
        }
    };
    memo[node] = v;
    v
}

/// Player 0's expected chips when both players follow `profile`.
pub fn expected_value(tree: &GameTree, profile: &[Distribution]) -> f64 {
    fn walk(tree: &GameTree, profile: &[Distribution], node: usize) -> f64 {
        match tree.node(node) {
            TreeNode::Terminal { utility } => *utility as f64,
            TreeNode::Chance { children } => children.iter().map(|&(c, p)| p * walk(tree, profile, c)).sum(),
            TreeNode::Decision { infoset, children, .. } => children
                .iter()
                .zip(profile[*infoset].probs())
                .filter(|(_, p)| **p > 0.0)
                .map(|(&c, p)| p * walk(tree, profile, c))
                .sum(),
        }
    }
    walk(tree, profile, tree.root())
}

/// Exploitability of a profile in chips: the sum over players of the best-response value against them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploitability {
    /// `[BR value of player 1 vs player 0's strategy, BR value of player 0 vs player 1's]`.
    pub br_values: [f64; 2],
    pub ante: i32,
}

impl Exploitability {
    pub fn total_chips(&self) -> f64 {
        self.br_values[0] + self.br_values[1]
    }

    pub fn total_milli(&self) -> f64 {
        self.total_chips() * 1000.0 / self.ante as f64
    }

    /// Half of the total, the per-player convention.
    pub fn per_player_milli(&self) -> f64 {
        self.total_milli() / 2.0
    }

    pub fn report(&self) -> EvalReport {
        EvalReport::exact("exploitability", self.total_milli(), Units::MilliAntes)
    }
}

pub fn exploitability(tree: &GameTree, profile: &[Distribution]) -> Exploitability {
    let vs_p0 = best_response(tree, profile, Player::P1).value;
    let vs_p1 = best_response(tree, profile, Player::P0).value;
    Exploitability { br_values: [vs_p0, vs_p1], ante: tree.ante() }
}

/// Builds the tree (subject to `node_budget`), tabulates both policies and
/// computes exploitability.
pub fn exploitability_of_policies<G: Game>(
    game: &G,
    p0: &mut dyn Policy,
    p1: &mut dyn Policy,
    node_budget: usize,
) -> Result<Exploitability, EvalError> {
    let tree = GameTree::build_with_budget(game, node_budget)?;
    let profile = crate::policy::tabulate_profile(&tree, p0, p1)?;
    Ok(exploitability(&tree, &profile))
}

/// Best response of `responder` against a single policy for the other seat.
pub fn best_response_to_policy<G: Game>(
    game: &G,
    opponent: &mut dyn Policy,
    responder: Player,
    node_budget: usize,
) -> Result<BestResponse, EvalError> {
    let tree = GameTree::build_with_budget(game, node_budget)?;
    let opp = responder.opponent()?;
    let table = tabulate(&tree, opp, opponent)?;
    let profile: Vec<Distribution> = table
        .into_iter()
        .zip(tree.infosets())
        .map(|(d, info)| d.unwrap_or_else(|| Distribution::uniform(info.num_actions())))
        .collect();
    Ok(best_response(&tree, &profile, responder))
}

impl From<GameError> for EvalError {
    fn from(e: GameError) -> Self {
        EvalError::Game(e)
    }
}

impl From<PolicyError> for EvalError {
    fn from(e: PolicyError) -> Self {
        EvalError::Policy(e)
    }
}
