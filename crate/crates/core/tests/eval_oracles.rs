use std::collections::HashMap;
use std::sync::Arc;

use proptest::prelude::*;
use sdcfr_core::eval::{
    best_response, exploitability, expected_value, head_to_head, strategy_disagreement, Pairing,
};
use sdcfr_core::games::leduc::{CALL, FOLD};
use sdcfr_core::games::{Kuhn, Leduc};
use sdcfr_core::policy::{FixedActionPolicy, OwnStep, Policy, PolicyError, TablePolicy, UniformPolicy};
use sdcfr_core::tabular::{CfrConfig, CfrSolver, UpdateSchedule, Weighting};
use sdcfr_core::tree::GameTree;
use sdcfr_core::{DecisionPoint, Distribution, Game, InfoSetKey, NodeKind, Player};

/// Kuhn value for player 0 in chips.
const KUHN_VALUE: f64 = -1.0 / 18.0;

/// Exploitability of uniform random play in Kuhn, frozen from `brute_force_br`.
const KUHN_UNIFORM_EXPLOITABILITY_MA: f64 = 916.666_666_666_666_7;

/// Expected utility for `seat` when each infoset maps to a distribution, by
/// direct recursion over game states.
fn ev<G: Game>(game: &G, s: &G::State, strat: &HashMap<InfoSetKey, Vec<f64>>, seat: usize) -> f64 {
    match game.node_kind(s) {
        NodeKind::Terminal => game.terminal_utility(s, Player::from_seat(seat)).unwrap() as f64,
        NodeKind::Chance => game
            .chance_outcomes(s)
            .unwrap()
            .into_iter()
            .map(|(a, p)| p * ev(game, &game.apply_action(s, a).unwrap(), strat, seat))
            .sum(),
        NodeKind::Decision(p) => {
            let key = game.infoset_key(s, p).unwrap();
            let probs = &strat[&key];
            game.legal_mask(s)
                .slots()
                .zip(probs)
                .filter(|(_, q)| **q > 0.0)
                .map(|(a, q)| q * ev(game, &game.apply_action(s, a).unwrap(), strat, seat))
                .sum()
        }
    }
}

fn collect_keys<G: Game>(game: &G, s: &G::State, out: &mut HashMap<InfoSetKey, (Player, usize)>) {
    match game.node_kind(s) {
        NodeKind::Terminal => {}
        NodeKind::Chance => {
            for (a, _) in game.chance_outcomes(s).unwrap() {
                collect_keys(game, &game.apply_action(s, a).unwrap(), out);
            }
        }
        NodeKind::Decision(p) => {
            out.insert(game.infoset_key(s, p).unwrap(), (p, game.legal_mask(s).count()));
            for a in game.legal_mask(s).slots() {
                collect_keys(game, &game.apply_action(s, a).unwrap(), out);
            }
        }
    }
}

/// Best-response value by trying every pure strategy of the responder.
fn brute_force_br(strat: &HashMap<InfoSetKey, Vec<f64>>, responder: Player) -> f64 {
    let mut keys = HashMap::new();
    collect_keys(&Kuhn, &Kuhn.root(), &mut keys);
    let mine: Vec<InfoSetKey> = keys.iter().filter(|(_, v)| v.0 == responder).map(|(k, _)| k.clone()).collect();
    let mut best = f64::NEG_INFINITY;
    for bits in 0u32..(1 << mine.len()) {
        let mut s = strat.clone();
        for (j, k) in mine.iter().enumerate() {
            s.insert(k.clone(), if bits >> j & 1 == 1 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
        }
        best = best.max(ev(&Kuhn, &Kuhn.root(), &s, responder.seat()));
    }
    best
}

fn as_map(tree: &GameTree, profile: &[Distribution]) -> HashMap<InfoSetKey, Vec<f64>> {
    tree.infosets().iter().zip(profile).map(|(i, d)| (i.key.clone(), d.probs().to_vec())).collect()
}

/// Kuhn equilibrium with P0 never bluffing.
fn kuhn_nash(tree: &GameTree) -> Vec<Distribution> {
    tree.infosets()
        .iter()
        .map(|i| {
            let k = i.key.as_bytes();
            let (card, hist) = (k[1], &k[2..]);
            let bet = match (k[0], hist) {
                (0, []) => 0.0,
                (0, [0, 1]) => [0.0, 1.0 / 3.0, 1.0][card as usize],
                (1, [0]) => [1.0 / 3.0, 0.0, 1.0][card as usize],
                (1, [1]) => [0.0, 1.0 / 3.0, 1.0][card as usize],
                _ => unreachable!("{k:?}"),
            };
            Distribution::new(vec![1.0 - bet, bet]).unwrap()
        })
        .collect()
}

#[test]
fn uniform_kuhn_matches_brute_force() {
    let tree = GameTree::build(&Kuhn).unwrap();
    let profile: Vec<Distribution> = tree.infosets().iter().map(|i| Distribution::uniform(i.num_actions())).collect();
    let map = as_map(&tree, &profile);
    for p in Player::BOTH {
        let oracle = brute_force_br(&map, p);
        assert!((best_response(&tree, &profile, p).value - oracle).abs() < 1e-12);
    }
    let e = exploitability(&tree, &profile);
    let oracle = (brute_force_br(&map, Player::P0) + brute_force_br(&map, Player::P1)) * 1000.0;
    assert!((oracle - KUHN_UNIFORM_EXPLOITABILITY_MA).abs() < 1e-9, "oracle {oracle}");
    assert!((e.total_milli() - KUHN_UNIFORM_EXPLOITABILITY_MA).abs() < 1e-9);
    assert!((e.per_player_milli() * 2.0 - e.total_milli()).abs() < 1e-12);
}

#[test]
fn nash_profile_has_zero_exploitability_and_game_value() {
    let tree = GameTree::build(&Kuhn).unwrap();
    let nash = kuhn_nash(&tree);
    assert!(exploitability(&tree, &nash).total_chips().abs() < 1e-9);
    assert!((expected_value(&tree, &nash) - KUHN_VALUE).abs() < 1e-12);
    // best response of P1 to P0's equilibrium half earns exactly the negated value
    assert!((best_response(&tree, &nash, Player::P1).value + KUHN_VALUE).abs() * 1000.0 < 1.0);
}

#[test]
fn vanilla_cfr_converges_on_kuhn() {
    let tree = Arc::new(GameTree::build(&Kuhn).unwrap());
    let mut s = CfrSolver::new(tree.clone(), CfrConfig::new(Weighting::Vanilla, UpdateSchedule::Simultaneous));
    s.run(10_000);
    let avg = s.average_profile();
    let e = exploitability(&tree, &avg);
    assert!(e.total_milli() < 5.0, "{}", e.total_milli());
    // a converged opponent half gives the game value within 1 mA/g
    let br = best_response(&tree, &avg, Player::P1).value;
    assert!((br + KUHN_VALUE).abs() * 1000.0 < 1.0 + e.total_milli());
}

#[test]
fn first_iteration_regrets_match_direct_counterfactual_values() {
    // uniform play: regret of action a at I is sum over h in I of
    // (opponent and chance reach) * (v(h.a) - v(h)) from the acting player's view
    let tree = Arc::new(GameTree::build(&Kuhn).unwrap());
    let mut s = CfrSolver::new(tree.clone(), CfrConfig::new(Weighting::Vanilla, UpdateSchedule::Simultaneous));
    s.iterate();
    let uniform: HashMap<InfoSetKey, Vec<f64>> =
        tree.infosets().iter().map(|i| (i.key.clone(), vec![0.5, 0.5])).collect();
    let mut expected: HashMap<InfoSetKey, Vec<f64>> = HashMap::new();
    for c0 in 0..3usize {
        for c1 in (0..3).filter(|&c| c != c0) {
            let chance = 1.0 / 6.0;
            let deal = Kuhn.apply_action(&Kuhn.apply_action(&Kuhn.root(), c0).unwrap(), c1).unwrap();
            // (state, own-action reach per seat)
            let mut stack = vec![(deal, [1.0f64, 1.0])];
            while let Some((st, reach)) = stack.pop() {
                let NodeKind::Decision(p) = Kuhn.node_kind(&st) else { continue };
                let key = Kuhn.infoset_key(&st, p).unwrap();
                let v = ev(&Kuhn, &st, &uniform, p.seat());
                let entry = expected.entry(key).or_insert_with(|| vec![0.0, 0.0]);
                for a in 0..2 {
                    let next = Kuhn.apply_action(&st, a).unwrap();
                    entry[a] += chance * reach[1 - p.seat()] * (ev(&Kuhn, &next, &uniform, p.seat()) - v);
                    let mut r = reach;
                    r[p.seat()] *= 0.5;
                    stack.push((next, r));
                }
            }
        }
    }
    for (key, r) in expected {
        let got = s.regrets().get(&key).unwrap();
        for a in 0..2 {
            assert!((got[a] - r[a]).abs() < 1e-12, "{key}: {got:?} vs {r:?}");
        }
    }
}

#[test]
fn always_fold_first_in_loses_the_ante() {
    let g = Leduc::standard();
    let tree = GameTree::build(&g).unwrap();
    let mut folder = FixedActionPolicy(FOLD);
    let table = sdcfr_core::policy::tabulate(&tree, Player::P0, &mut folder).unwrap();
    let profile: Vec<Distribution> = table
        .into_iter()
        .zip(tree.infosets())
        .map(|(d, i)| d.unwrap_or_else(|| Distribution::uniform(i.num_actions())))
        .collect();
    let br = best_response(&tree, &profile, Player::P1);
    assert!((br.value * 1000.0 - 1000.0).abs() < 1e-9);
}

#[test]
fn fold_versus_call_in_leduc_costs_one_ante_per_hand() {
    let g = Leduc::standard();
    let mut folder = FixedActionPolicy(FOLD);
    let mut caller = FixedActionPolicy(CALL);
    let r = head_to_head(&g, &mut folder, &mut caller, 5_000, 3, Pairing::Duplicate).unwrap();
    assert_eq!((r.value, r.samples, r.ci95), (-1000.0, 10_000, 0.0));
}

#[test]
fn self_play_is_exactly_zero_under_duplicate_pairing() {
    let g = Leduc::standard();
    let mut a = UniformPolicy;
    let mut b = UniformPolicy;
    let r = head_to_head(&g, &mut a, &mut b, 2_000, 17, Pairing::Duplicate).unwrap();
    assert_eq!(r.value, 0.0);
    let tree = GameTree::build(&Kuhn).unwrap();
    let mut n1 = TablePolicy::from_profile(&tree, &kuhn_nash(&tree));
    let mut n2 = TablePolicy::from_profile(&tree, &kuhn_nash(&tree));
    assert_eq!(head_to_head(&Kuhn, &mut n1, &mut n2, 2_000, 5, Pairing::Duplicate).unwrap().value, 0.0);
}

/// Calls or checks, raising only with the highest private card.
struct RaiseHigh;

impl Policy for RaiseHigh {
    fn query(&mut self, point: &DecisionPoint, _: &[OwnStep]) -> Result<Distribution, PolicyError> {
        let n = point.num_actions();
        let strong = point.features[4] > 0.0 || point.features[5] > 0.0;
        let pick = if strong && n == 3 { 2 } else { 1 };
        Ok(Distribution::one_hot(n, pick))
    }
}

#[test]
fn duplicate_pairing_narrows_the_interval() {
    let g = Leduc::standard();
    let paired = head_to_head(&g, &mut RaiseHigh, &mut UniformPolicy, 5_000, 8, Pairing::Duplicate).unwrap();
    let plain = head_to_head(&g, &mut RaiseHigh, &mut UniformPolicy, 5_000, 8, Pairing::Independent).unwrap();
    assert_eq!(paired.samples, plain.samples);
    assert!(paired.ci95 <= plain.ci95, "{} vs {}", paired.ci95, plain.ci95);
}

#[test]
fn disagreement_of_identical_and_disjoint_policies() {
    let g = Leduc::standard();
    let (mut a0, mut a1, mut b0, mut b1) = (UniformPolicy, UniformPolicy, UniformPolicy, UniformPolicy);
    let t = strategy_disagreement(&g, [&mut a0, &mut a1], [&mut b0, &mut b1], 500, 1).unwrap();
    assert!(t.rows().iter().all(|r| r.mean == 0.0 && r.n > 0));

    let (mut f0, mut f1, mut c0, mut c1) =
        (FixedActionPolicy(FOLD), FixedActionPolicy(FOLD), FixedActionPolicy(CALL), FixedActionPolicy(CALL));
    let t = strategy_disagreement(&g, [&mut c0, &mut c1], [&mut f0, &mut f1], 200, 2).unwrap();
    let d0 = &t.by_depth()[0];
    assert_eq!((d0.depth, d0.mean), (0, 2.0));
}

fn random_profile(tree: &GameTree, seeds: &[f64]) -> Vec<Distribution> {
    tree.infosets()
        .iter()
        .enumerate()
        .map(|(i, info)| {
            let raw: Vec<f64> = (0..info.num_actions()).map(|a| 0.05 + seeds[(i * 3 + a) % seeds.len()]).collect();
            let s: f64 = raw.iter().sum();
            Distribution::new(raw.into_iter().map(|x| x / s).collect()).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn best_response_dominates_alternatives(
        fixed in prop::collection::vec(0.0f64..1.0, 36),
        alt in prop::collection::vec(0.0f64..1.0, 36),
    ) {
        let tree = GameTree::build(&Kuhn).unwrap();
        let base = random_profile(&tree, &fixed);
        let other = random_profile(&tree, &alt);
        for p in Player::BOTH {
            let br = best_response(&tree, &base, p).value;
            let mixed: Vec<Distribution> = tree.infosets().iter().enumerate()
                .map(|(i, info)| if info.player == p { other[i].clone() } else { base[i].clone() })
                .collect();
            let v0 = expected_value(&tree, &mixed);
            let v = if p == Player::P0 { v0 } else { -v0 };
            prop_assert!(br >= v - 1e-12);
        }
    }

    #[test]
    fn exploitability_is_symmetric_and_nonnegative(seeds in prop::collection::vec(0.0f64..1.0, 36)) {
        let tree = GameTree::build(&Kuhn).unwrap();
        let prof = random_profile(&tree, &seeds);
        let e = exploitability(&tree, &prof);
        let other_order = best_response(&tree, &prof, Player::P0).value + best_response(&tree, &prof, Player::P1).value;
        prop_assert!((e.total_chips() - other_order).abs() < 1e-12);
        prop_assert!(e.total_chips() >= -1e-12);
    }
}
