use rand::Rng;

use crate::game::{Game, NodeKind, Player};
use crate::policy::{OwnStep, Policy};
use crate::rng::{stream, Purpose, StreamRng};

use super::{EvalError, EvalReport, Moments, Units};

/// How hands are dealt across the two seats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Every card sequence is played twice with seats swapped.
    Duplicate,
    /// Independent deals, seats alternating hand by hand.
    Independent,
}

/// Plays one hand. `chance` drives the deal; `seat_rngs[s]` drives seat
/// `s`'s policy reset and action sampling. Returns seat 0's net chips.
pub fn play_hand<G: Game>(
    game: &G,
    seats: [&mut dyn Policy; 2],
    chance: &mut StreamRng,
    seat_rngs: &mut [StreamRng; 2],
) -> Result<i32, EvalError> {
    let [p0, p1] = seats;
    let seats: [&mut dyn Policy; 2] = [p0, p1];
    for s in 0..2 {
        seats[s].reset(&mut seat_rngs[s])?;
    }
    let mut history: [Vec<OwnStep>; 2] = [Vec::new(), Vec::new()];
    let mut state = game.root();
    loop {
        match game.node_kind(&state) {
            NodeKind::Terminal => return Ok(game.terminal_utility(&state, Player::P0)?),
            NodeKind::Chance => {
                let outcomes = game.chance_outcomes(&state)?;
                let u: f64 = chance.gen();
                let mut acc = 0.0;
                let mut pick = outcomes[outcomes.len() - 1].0;
                for (slot, p) in &outcomes {
                    acc += p;
                    if u < acc {
                        pick = *slot;
                        break;
                    }
                }
                state = game.apply_action(&state, pick)?;
            }
            NodeKind::Decision(p) => {
                let s = p.seat();
                let point = game.decision_point(&state)?;
                let dist = seats[s].query(&point, &history[s])?;
                let idx = dist.sample_with(seat_rngs[s].gen());
                let slot = point.mask.slot_of(idx).expect("sampled index within legal set");
                history[s].push(OwnStep { point, action: idx });
                state = game.apply_action(&state, slot)?;
            }
        }
    }
}

/// Plays `n_pairs` pairs of hands between `a` and `b` and reports `a`'s mean
/// winnings per hand with a normal-approximation 95% interval.
///
/// Under [`Pairing::Duplicate`] both hands of a pair reuse the same chance
/// stream and per-seat streams, so identical policies cancel exactly.
pub fn head_to_head<G: Game>(
    game: &G,
    a: &mut dyn Policy,
    b: &mut dyn Policy,
    n_pairs: u64,
    seed: u64,
    pairing: Pairing,
) -> Result<EvalReport, EvalError> {
    let (units, scale) = Units::for_game(game.ante(), game.big_blind());
    let mut moments = Moments::default();
    for k in 0..n_pairs {
        match pairing {
            Pairing::Duplicate => {
                let streams = || {
                    (
                        stream(seed, Purpose::Match, k, 0),
                        [stream(seed, Purpose::Match, k, 1), stream(seed, Purpose::Match, k, 2)],
                    )
                };
                let (mut chance, mut seat_rngs) = streams();
                let first = play_hand(game, [&mut *a, &mut *b], &mut chance, &mut seat_rngs)?;
                let (mut chance, mut seat_rngs) = streams();
                let second = play_hand(game, [&mut *b, &mut *a], &mut chance, &mut seat_rngs)?;
                // a sits in seat 0, then seat 1
                moments.push((first - second) as f64 * scale / 2.0);
            }
            Pairing::Independent => {
                for h in 0..2u64 {
                    let idx = 2 * k + h;
                    let mut chance = stream(seed, Purpose::Match, idx, 10);
                    let mut seat_rngs = [stream(seed, Purpose::Match, idx, 11), stream(seed, Purpose::Match, idx, 12)];
                    let v = if h == 0 {
                        play_hand(game, [&mut *a, &mut *b], &mut chance, &mut seat_rngs)? as f64
                    } else {
                        -(play_hand(game, [&mut *b, &mut *a], &mut chance, &mut seat_rngs)? as f64)
                    };
                    moments.push(v * scale);
                }
            }
        }
    }
    Ok(EvalReport {
        metric: "head_to_head".into(),
        value: moments.mean(),
        units,
        samples: 2 * n_pairs,
        ci95: moments.ci95(),
        seed: Some(seed),
    })
}
