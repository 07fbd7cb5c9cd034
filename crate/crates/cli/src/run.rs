//! Training runs: fresh starts, periodic evaluation, state saving and resume.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use sdcfr_core::deep_cfr::{AvgNetPolicy, DeepCfrError, DeepCfrRun, IterationStats};
use sdcfr_core::eval::{exploitability, Exploitability};
use sdcfr_core::nn::{decode_checkpoint, encode_checkpoint, CheckpointMeta, Mlp};
use sdcfr_core::parallel::Workers;
use sdcfr_core::policy::{merge_profiles, tabulate};
use sdcfr_core::rng::{stream, Purpose};
use sdcfr_core::sampling::spill::SpillRecord;
use sdcfr_core::sampling::{read_spill, write_spill, AdvantageSample, ReservoirBuffer, StrategySample};
use sdcfr_core::sd_cfr::{average_profile, read_manifest, ModelBuffer, ModelStorage};
use sdcfr_core::tabular::{CfrConfig, CfrSolver, IterationStrategySnapshot, UpdateSchedule, Weighting};
use sdcfr_core::tree::GameTree;
use sdcfr_core::{Game, Player};
use serde::{Deserialize, Serialize};

use crate::config::{config_diff, Algorithm, ExperimentConfig, UpdateMode};
use crate::error::CliError;
use crate::games::{with_game, GameTask};
use crate::logs::{self, append_row, num};

pub const CONFIG_FILE: &str = "config.toml";
pub const STATE_FILE: &str = "run_state.toml";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const TABULAR_AVERAGE_FILE: &str = "average_strategy.bin";
const BUFFER_DIR: &str = "buffers";
const CHECKPOINT_DIR: &str = "checkpoints";

pub fn probe_manifest(capacity: usize) -> String {
    format!("manifest_reservoir_{capacity}.tsv")
}

pub fn average_net_file(player: Player) -> String {
    format!("avg_p{}.sdcn", player.seat())
}

fn current_net_file(player: Player) -> String {
    format!("current_p{}.sdcn", player.seat())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Traversal threads; 1 gives the strict reproducibility guarantee
    /// (results do not depend on it either way).
    pub workers: usize,
    /// Save state and stop after this iteration.
    pub stop_after: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    pub capacity: usize,
    pub seen: [u64; 2],
}

/// What a run directory records about its own progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub seed: u64,
    /// Last iteration whose buffers, networks and CSV rows are on disk.
    pub iteration: u64,
    pub complete: bool,
    pub models_seen: [u64; 2],
    pub probes: Vec<ProbeState>,
    /// The config the run started with, as written to `config.toml`.
    pub config: String,
}

pub fn read_state(dir: &Path) -> Result<RunState, CliError> {
    let text = fs::read_to_string(dir.join(STATE_FILE))
        .map_err(|e| CliError::CorruptRun(format!("{}: {e}", dir.join(STATE_FILE).display())))?;
    toml::from_str(&text).map_err(|e| CliError::CorruptRun(format!("{STATE_FILE}: {e}")))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

fn write_state(dir: &Path, state: &RunState) -> Result<(), CliError> {
    write_atomic(&dir.join(STATE_FILE), toml::to_string(state).expect("state serializes").as_bytes())
}

/// Loads a run's config and checks it against the copy stored in its state.
pub fn load_run(dir: &Path) -> Result<(ExperimentConfig, RunState), CliError> {
    let state = read_state(dir)?;
    let text = fs::read_to_string(dir.join(CONFIG_FILE))
        .map_err(|e| CliError::CorruptRun(format!("{CONFIG_FILE}: {e}")))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let now = cfg.to_toml();
    if now != state.config {
        return Err(CliError::ConfigMismatch(config_diff(&state.config, &now)));
    }
    Ok((cfg, state))
}

/// Runs every seed of `cfg`, each in `cfg.out/{name}-s{seed}`.
pub fn train(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    cfg.seeds.iter().map(|&seed| start_run(cfg, seed, opts)).collect()
}

/// Starts a fresh run for one seed.
pub fn start_run(cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let mut run_cfg = cfg.clone();
    run_cfg.seeds = vec![seed];
    run_cfg.validate()?;
    let dir = cfg.out.join(cfg.run_id(seed));
    if dir.join(STATE_FILE).exists() {
        return Err(CliError::Usage(format!("{} already holds a run; use resume", dir.display())));
    }
    fs::create_dir_all(&dir)?;
    let text = run_cfg.to_toml();
    fs::write(dir.join(CONFIG_FILE), &text)?;
    let state = RunState {
        run_id: cfg.run_id(seed),
        seed,
        iteration: 0,
        complete: false,
        models_seen: [0, 0],
        probes: run_cfg.model_buffer.probes.iter().map(|&capacity| ProbeState { capacity, seen: [0, 0] }).collect(),
        config: text,
    };
    write_state(&dir, &state)?;
    execute(&dir, &run_cfg, state, opts, false)?;
    Ok(dir)
}

/// Continues a run from its last saved iteration. Rows written after that
/// point are discarded and regenerated.
pub fn resume(dir: &Path, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let (cfg, state) = load_run(dir)?;
    if state.complete {
        return Ok(dir.to_path_buf());
    }
    for f in [logs::METRICS, logs::EXPLOITABILITY, logs::TIMING] {
        logs::truncate_after(&dir.join(f), state.iteration)?;
    }
    execute(dir, &cfg, state, opts, true)?;
    Ok(dir.to_path_buf())
}

fn execute(dir: &Path, cfg: &ExperimentConfig, state: RunState, opts: &RunOptions, resumed: bool) -> Result<(), CliError> {
    let task = Execute { dir, cfg, state, opts, resumed };
    with_game(&cfg.game, task)
}

struct Execute<'a> {
    dir: &'a Path,
    cfg: &'a ExperimentConfig,
    state: RunState,
    opts: &'a RunOptions,
    resumed: bool,
}

impl GameTask for Execute<'_> {
    type Output = Result<(), CliError>;

    fn run<G: Game + 'static>(self, game: Arc<G>) -> Self::Output {
        if self.cfg.algorithm.is_tabular() {
            run_tabular(&*game, self)
        } else {
            run_deep(game, self)
        }
    }
}

fn is_eval_point(cfg: &ExperimentConfig, t: u64) -> bool {
    t % cfg.eval_every == 0 || t == cfg.iterations
}

fn exploitability_row(dir: &Path, run_id: &str, t: u64, e: &Exploitability, method: &str) -> Result<(), CliError> {
    append_row(
        dir,
        logs::EXPLOITABILITY,
        &logs::EXPLOITABILITY_HEADER,
        &[run_id.into(), t.to_string(), num(e.total_milli()), num(e.per_player_milli()), method.into()],
    )
}

fn timing_row(dir: &Path, run_id: &str, t: u64, phase: &str, since: Instant) -> Result<(), CliError> {
    let secs = since.elapsed().as_secs_f64();
    append_row(dir, logs::TIMING, &logs::TIMING_HEADER, &[run_id.into(), t.to_string(), phase.into(), format!("{secs:.6}")])
}

fn build_tree<G: Game>(game: &G, cfg: &ExperimentConfig) -> Result<GameTree, CliError> {
    Ok(GameTree::build_with_budget(game, cfg.game.tree_budget)?)
}

fn run_tabular<G: Game>(game: &G, ex: Execute<'_>) -> Result<(), CliError> {
    let Execute { dir, cfg, mut state, opts, .. } = ex;
    let tree = Arc::new(build_tree(game, cfg)?);
    let weighting = if cfg.algorithm == Algorithm::TabularVanilla { Weighting::Vanilla } else { Weighting::Linear };
    let schedule = match cfg.tabular_updates {
        UpdateMode::Simultaneous => UpdateSchedule::Simultaneous,
        UpdateMode::Alternating => UpdateSchedule::Alternating,
    };
    let mut solver = CfrSolver::new(tree.clone(), CfrConfig::new(weighting, schedule));
    // tabular state is cheap to regenerate, so a resume replays it
    solver.run(state.iteration);
    for t in state.iteration + 1..=cfg.iterations {
        let start = Instant::now();
        solver.iterate();
        timing_row(dir, &state.run_id, t, "iterate", start)?;
        let stop = opts.stop_after == Some(t);
        if is_eval_point(cfg, t) {
            let start = Instant::now();
            let e = exploitability(&tree, &solver.average_profile());
            exploitability_row(dir, &state.run_id, t, &e, "tabular")?;
            timing_row(dir, &state.run_id, t, "eval", start)?;
        }
        if is_eval_point(cfg, t) || stop {
            state.iteration = t;
            state.complete = t == cfg.iterations;
            if state.complete {
                let profile = Arc::new(solver.average_profile());
                let snap = IterationStrategySnapshot { iteration: t, strategies: [Some(profile.clone()), Some(profile)] };
                let mut bytes = Vec::new();
                snap.write_to(&tree, &mut bytes)?;
                write_atomic(&dir.join(TABULAR_AVERAGE_FILE), &bytes)?;
            }
            write_state(dir, &state)?;
        }
        if stop {
            break;
        }
    }
    Ok(())
}

fn spill_path(dir: &Path, kind: &str, player: Player) -> PathBuf {
    dir.join(BUFFER_DIR).join(format!("{kind}_p{}.sdcb", player.seat()))
}

fn save_spill<T: SpillRecord>(buffer: &ReservoirBuffer<T>, n_slots: usize, path: &Path) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    write_spill(buffer, n_slots, &mut bytes)?;
    write_atomic(path, &bytes)
}

fn load_spill<T: SpillRecord>(path: &Path) -> Result<ReservoirBuffer<T>, CliError> {
    let f = File::open(path).map_err(|e| CliError::CorruptRun(format!("{}: {e}", path.display())))?;
    Ok(read_spill(BufReader::new(f))?)
}

fn save_manifest(buffer: &ModelBuffer, dir: &Path, file: &str) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    buffer.write_manifest(&mut bytes, dir)?;
    write_atomic(&dir.join(file), &bytes)
}

/// Reads a manifest and checks every checkpoint it lists.
pub fn load_models(dir: &Path, file: &str, storage: ModelStorage, seen: [u64; 2]) -> Result<ModelBuffer, CliError> {
    let path = dir.join(file);
    let f = File::open(&path).map_err(|e| CliError::CorruptRun(format!("{}: {e}", path.display())))?;
    let entries = read_manifest(BufReader::new(f), dir)?;
    let buffer = ModelBuffer::restore(storage, entries, seen)?;
    buffer.verify()?;
    Ok(buffer)
}

pub fn save_net(path: &Path, net: &Mlp<f32>, player: Player, iteration: u64) -> Result<(), CliError> {
    write_atomic(path, &encode_checkpoint(net, CheckpointMeta { player: player.seat() as u8, iteration: iteration as u32 }))
}

pub fn load_net(path: &Path) -> Result<Mlp<f32>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::CorruptRun(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
        .map(|(_, net)| net)
        .map_err(|e| CliError::CorruptRun(format!("{}: {e}", path.display())))
}

struct DeepState<G: Game> {
    run: DeepCfrRun<G>,
    probes: Vec<(usize, ModelBuffer)>,
    tree: Option<Arc<GameTree>>,
}

fn run_deep<G: Game + 'static>(game: Arc<G>, ex: Execute<'_>) -> Result<(), CliError> {
    let Execute { dir, cfg, mut state, opts, resumed } = ex;
    let seed = state.seed;
    let checkpoints = cfg.model_buffer.checkpoints.then(|| dir.join(CHECKPOINT_DIR));
    let deep_cfg = cfg.deep_config(seed, checkpoints.clone());
    let mut ds = if !resumed {
        let run = DeepCfrRun::new(game, deep_cfg)?;
        let probes =
            cfg.model_buffer.probes.iter().map(|&c| (c, ModelBuffer::new(ModelStorage::Reservoir(c)))).collect();
        DeepState { run, probes, tree: None }
    } else {
        if checkpoints.is_none() {
            return Err(CliError::Usage("runs without checkpoints cannot be resumed".into()));
        }
        let storage = cfg.model_buffer.storage();
        let models = load_models(dir, MANIFEST_FILE, storage, state.models_seen)?;
        let mut probes = Vec::new();
        for p in &state.probes {
            let b = load_models(dir, &probe_manifest(p.capacity), ModelStorage::Reservoir(p.capacity), p.seen)?;
            probes.push((p.capacity, b));
        }
        let adv = Player::BOTH.map(|p| load_spill::<AdvantageSample>(&spill_path(dir, "advantage", p)));
        let strat = Player::BOTH.map(|p| load_spill::<StrategySample>(&spill_path(dir, "strategy", p)));
        let [a0, a1] = adv;
        let [s0, s1] = strat;
        let mut current = [None, None];
        for p in Player::BOTH {
            let path = dir.join(current_net_file(p));
            if path.exists() {
                current[p.seat()] = Some(load_net(&path)?);
            }
        }
        let run = DeepCfrRun::restore(game, deep_cfg, state.iteration, [a0?, a1?], [s0?, s1?], models, current)?;
        DeepState { run, probes, tree: None }
    };
    ds.run = ds.run.with_workers(Workers::new(opts.workers.max(1)));

    for t in state.iteration + 1..=cfg.iterations {
        let start = Instant::now();
        let stats = ds.run.iterate()?;
        if let Some(entry) = ds.run.last_entry() {
            for (k, (_, probe)) in ds.probes.iter_mut().enumerate() {
                probe.push(entry.clone(), &mut stream(seed, Purpose::ModelReservoir, t, 1 + k as u64))?;
            }
        }
        timing_row(dir, &state.run_id, t, "iterate", start)?;
        metrics_row(dir, &state.run_id, &stats)?;
        let stop = opts.stop_after == Some(t);
        if is_eval_point(cfg, t) {
            let start = Instant::now();
            evaluate_deep(dir, cfg, &state.run_id, &mut ds, t)?;
            timing_row(dir, &state.run_id, t, "eval", start)?;
        }
        if (is_eval_point(cfg, t) || stop) && checkpoints.is_some() {
            state.iteration = t;
            state.complete = t == cfg.iterations;
            save_deep_state(dir, &ds, &mut state)?;
        }
        if stop {
            break;
        }
    }
    Ok(())
}

fn metrics_row(dir: &Path, run_id: &str, s: &IterationStats) -> Result<(), CliError> {
    let (first, last) = s.train.as_ref().map(|t| (num(t.first_loss), num(t.final_loss))).unwrap_or_default();
    append_row(
        dir,
        logs::METRICS,
        &logs::METRICS_HEADER,
        &[
            run_id.into(),
            s.iteration.to_string(),
            s.traverser.seat().to_string(),
            s.advantage_samples.to_string(),
            s.strategy_samples.to_string(),
            s.advantage_len[0].to_string(),
            s.advantage_len[1].to_string(),
            s.strategy_len[0].to_string(),
            s.strategy_len[1].to_string(),
            num(s.root_value),
            first,
            last,
            s.fallbacks.to_string(),
        ],
    )
}

fn evaluate_deep<G: Game>(
    dir: &Path,
    cfg: &ExperimentConfig,
    run_id: &str,
    ds: &mut DeepState<G>,
    t: u64,
) -> Result<(), CliError> {
    if ds.tree.is_none() {
        ds.tree = Some(Arc::new(build_tree(&**ds.run.game(), cfg)?));
    }
    let tree = ds.tree.clone().expect("tree built");
    let both = |b: &ModelBuffer| Player::BOTH.iter().all(|p| !b.is_empty(*p));
    if cfg.algorithm == Algorithm::SdCfrShared && both(ds.run.models()) {
        let e = exploitability(&tree, &average_profile(&tree, ds.run.models())?);
        exploitability_row(dir, run_id, t, &e, "sd_cfr")?;
        for (c, probe) in &ds.probes {
            if both(probe) {
                let e = exploitability(&tree, &average_profile(&tree, probe)?);
                exploitability_row(dir, run_id, t, &e, &format!("sd_cfr_reservoir_{c}"))?;
            }
        }
    }
    if Player::BOTH.iter().all(|p| !ds.run.strategy_buffer(*p).is_empty()) {
        let avg_cfg = cfg.average_net.to_train();
        let mut tables = Vec::new();
        for p in Player::BOTH {
            let (net, _) = ds.run.train_average(p, &avg_cfg).map_err(DeepCfrError::from)?;
            save_net(&dir.join(average_net_file(p)), &net, p, t)?;
            tables.push(tabulate(&tree, p, &mut AvgNetPolicy(Arc::new(net))).map_err(DeepCfrError::from)?);
        }
        let b = tables.pop().expect("two tables");
        let a = tables.pop().expect("two tables");
        let profile = merge_profiles(a, b).map_err(DeepCfrError::from)?;
        exploitability_row(dir, run_id, t, &exploitability(&tree, &profile), "deep_cfr")?;
    }
    Ok(())
}

fn save_deep_state<G: Game>(dir: &Path, ds: &DeepState<G>, state: &mut RunState) -> Result<(), CliError> {
    fs::create_dir_all(dir.join(BUFFER_DIR))?;
    let n_slots = ds.run.game().max_actions();
    for p in Player::BOTH {
        save_spill(ds.run.advantage_buffer(p), n_slots, &spill_path(dir, "advantage", p))?;
        save_spill(ds.run.strategy_buffer(p), n_slots, &spill_path(dir, "strategy", p))?;
        if let Some(net) = ds.run.current_net(p) {
            save_net(&dir.join(current_net_file(p)), net, p, state.iteration)?;
        }
    }
    save_manifest(ds.run.models(), dir, MANIFEST_FILE)?;
    let models = ds.run.models();
    state.models_seen = [models.seen(Player::P0), models.seen(Player::P1)];
    state.probes.clear();
    for (c, probe) in &ds.probes {
        save_manifest(probe, dir, &probe_manifest(*c))?;
        state.probes.push(ProbeState { capacity: *c, seen: [probe.seen(Player::P0), probe.seen(Player::P1)] });
    }
    // the state file goes last: it is what marks the snapshot as usable
    write_state(dir, state)
}
