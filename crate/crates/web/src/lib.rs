//! WebAssembly bindings for the demo page in `www/`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use sdcfr_core::eval::exploitability;
use sdcfr_core::games::{Kuhn, Leduc};
use sdcfr_core::policy::{OwnStep, Policy};
use sdcfr_core::rng::{stream, Purpose};
use sdcfr_core::sampling::ReservoirBuffer;
use sdcfr_core::sd_cfr::{
    explicit_average_distribution, ModelBuffer, ModelEntry, ModelSource, ModelStorage, TableStrategy, TrajectoryPolicy,
};
use sdcfr_core::tabular::{CfrConfig, CfrSolver, UpdateSchedule, Weighting};
use sdcfr_core::tree::GameTree;
use sdcfr_core::{Distribution, Game, InfoSetKey, NodeKind, Player};
use wasm_bindgen::prelude::*;

fn tree_for(game: &str) -> Result<GameTree, String> {
    let built = match game {
        "kuhn" => GameTree::build(&Kuhn),
        "leduc" => GameTree::build(&Leduc::standard()),
        other => return Err(format!("unknown game {other}")),
    };
    built.map_err(|e| e.to_string())
}

/// Exploitability in mA/g of the average strategy after every `every`
/// iterations, as `[t, e, t, e, ...]`.
#[wasm_bindgen]
pub fn cfr_curve(game: &str, linear: bool, alternating: bool, iterations: u32, every: u32) -> Result<Vec<f64>, String> {
    if every == 0 {
        return Err("every must be positive".into());
    }
    let tree = Arc::new(tree_for(game)?);
    let weighting = if linear { Weighting::Linear } else { Weighting::Vanilla };
    let schedule = if alternating { UpdateSchedule::Alternating } else { UpdateSchedule::Simultaneous };
    let mut solver = CfrSolver::new(tree.clone(), CfrConfig::new(weighting, schedule));
    let mut out = Vec::new();
    while solver.iteration() < iterations as u64 {
        let t = solver.iterate();
        if t % every as u64 == 0 || t == iterations as u64 {
            out.push(t as f64);
            out.push(exploitability(&tree, &solver.average_profile()).total_milli());
        }
    }
    Ok(out)
}

fn kuhn_label(key: &InfoSetKey) -> String {
    let b = key.as_bytes();
    let card = ["J", "Q", "K"].get(b[1] as usize).unwrap_or(&"?");
    let hist: String = b[2..].iter().map(|a| if *a == 0 { 'p' } else { 'b' }).collect();
    format!("P{} {card} {}", b[0] + 1, if hist.is_empty() { "-".into() } else { hist })
}

/// One row per Kuhn infoset: label, bet probability of the explicit
/// average, empirical bet frequency under trajectory sampling, visits.
///
/// The buffer holds the iteration strategies of `iterations` rounds of
/// linear CFR; `episodes` games are played with one strategy drawn per
/// player and game.
pub fn trajectory_rows(iterations: u32, episodes: u32, seed: u64) -> Result<Vec<(String, f64, f64, u64)>, String> {
    let tree = tree_for("kuhn")?;
    let mut cfg = CfrConfig::new(Weighting::Linear, UpdateSchedule::Alternating);
    cfg.record_snapshots = true;
    let mut solver = CfrSolver::new(Arc::new(tree.clone()), cfg);
    solver.run(iterations.max(2) as u64);
    let mut buffer = ModelBuffer::new(ModelStorage::KeepAll);
    let mut rng = stream(seed, Purpose::ModelReservoir, 0, 0);
    for snap in solver.snapshots() {
        for player in Player::BOTH {
            if let Some(ts) = TableStrategy::from_snapshot(&tree, snap, player) {
                let entry = ModelEntry { player, iteration: snap.iteration, source: ModelSource::Resident(Arc::new(ts)) };
                buffer.push(entry, &mut rng).map_err(|e| e.to_string())?;
            }
        }
    }
    let buffer = Arc::new(buffer);
    let mut policies = Player::BOTH.map(|p| TrajectoryPolicy::new(buffer.clone(), p));
    let mut counts: HashMap<InfoSetKey, (u64, u64)> = HashMap::new();
    for k in 0..episodes as u64 {
        let mut rng = stream(seed, Purpose::Match, 0, k);
        let mut histories: [Vec<OwnStep>; 2] = [Vec::new(), Vec::new()];
        for p in policies.iter_mut() {
            p.reset(&mut rng).map_err(|e| e.to_string())?;
        }
        let mut state = Kuhn.root();
        while Kuhn.node_kind(&state) != NodeKind::Terminal {
            let slot = match Kuhn.node_kind(&state) {
                NodeKind::Decision(p) => {
                    let point = Kuhn.decision_point(&state).map_err(|e| e.to_string())?;
                    let seat = p.seat();
                    let d = policies[seat].query(&point, &histories[seat]).map_err(|e| e.to_string())?;
                    let idx = d.sample_with(rng.gen());
                    let c = counts.entry(point.key.clone()).or_default();
                    c.0 += 1;
                    c.1 += idx as u64;
                    let slot = point.mask.slot_of(idx).expect("legal index");
                    histories[seat].push(OwnStep { point, action: idx });
                    slot
                }
                _ => {
                    let outcomes = Kuhn.chance_outcomes(&state).map_err(|e| e.to_string())?;
                    let probs = outcomes.iter().map(|o| o.1).collect();
                    let d = Distribution::new(probs).map_err(|e| e.to_string())?;
                    outcomes[d.sample_with(rng.gen())].0
                }
            };
            state = Kuhn.apply_action(&state, slot).map_err(|e| e.to_string())?;
        }
    }
    let mut rows = Vec::new();
    for (i, info) in tree.infosets().iter().enumerate() {
        let hist = sdcfr_core::policy::own_history(&tree, i);
        let exact = explicit_average_distribution(&buffer, info.player, &hist, &info.decision_point())
            .map_err(|e| e.to_string())?;
        let (n, bets) = counts.get(&info.key).copied().unwrap_or((0, 0));
        let freq = if n > 0 { bets as f64 / n as f64 } else { f64::NAN };
        rows.push((kuhn_label(&info.key), exact.probs()[1], freq, n));
    }
    Ok(rows)
}

/// [`trajectory_rows`] as tab-separated lines for the page.
#[wasm_bindgen]
pub fn trajectory_vs_explicit(iterations: u32, episodes: u32, seed: u32) -> Result<String, String> {
    let rows = trajectory_rows(iterations, episodes, seed as u64)?;
    Ok(rows.iter().map(|(l, p, f, n)| format!("{l}\t{p}\t{f}\t{n}\n")).collect())
}

/// Fraction of `trials` in which each of `stream_len` items survived in a
/// reservoir of `capacity`.
#[wasm_bindgen]
pub fn reservoir_retention(capacity: u32, stream_len: u32, trials: u32, seed: u32) -> Result<Vec<f64>, String> {
    if capacity == 0 {
        return Err("capacity must be positive".into());
    }
    let mut kept = vec![0u32; stream_len as usize];
    for k in 0..trials as u64 {
        let mut rng = stream(seed as u64, Purpose::BufferInsert, 0, k);
        let mut b = ReservoirBuffer::new(capacity as usize);
        for item in 0..stream_len as usize {
            b.insert(item, &mut rng);
        }
        for &item in b.entries() {
            kept[item] += 1;
        }
    }
    Ok(kept.iter().map(|&c| c as f64 / trials.max(1) as f64).collect())
}
