//! Subcommands that read a finished (or partial) run directory.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::RngCore;
use sdcfr_core::deep_cfr::AvgNetPolicy;
use sdcfr_core::eval::{
    exploitability, head_to_head, strategy_disagreement, DisagreementRow, EvalReport, Exploitability, Pairing,
};
use sdcfr_core::policy::{tabulate_profile, OwnStep, Policy, PolicyError, TablePolicy, UniformPolicy};
use sdcfr_core::sd_cfr::{
    average_profile, CachedAveragePolicy, ExplicitAveragePolicy, ModelBuffer, ModelStorage, TrajectoryPolicy,
};
use sdcfr_core::tabular::{CfrConfig, CfrSolver, IterationStrategySnapshot, UpdateSchedule, Weighting};
use sdcfr_core::tree::GameTree;
use sdcfr_core::{DecisionPoint, Distribution, Game, Player};

use crate::config::{ExperimentConfig, GameSection};
use crate::error::CliError;
use crate::games::{with_game, GameTask};
use crate::logs::{self, append_row, num};
use crate::run::{average_net_file, load_models, load_net, load_run, RunState, MANIFEST_FILE, TABULAR_AVERAGE_FILE};

/// Strategies a run directory can provide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// SD-CFR by trajectory sampling.
    SdCfr,
    /// SD-CFR by explicit per-infoset queries.
    SdCfrExplicit,
    /// Deep CFR's average-strategy networks.
    DeepCfr,
    /// The tabular average strategy.
    Tabular,
    Uniform,
}

impl PolicyKind {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "sd_cfr" => PolicyKind::SdCfr,
            "sd_cfr_explicit" => PolicyKind::SdCfrExplicit,
            "deep_cfr" => PolicyKind::DeepCfr,
            "tabular" => PolicyKind::Tabular,
            "uniform" => PolicyKind::Uniform,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown policy {other:?} (sd_cfr, sd_cfr_explicit, deep_cfr, tabular, uniform)"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::SdCfr => "sd_cfr",
            PolicyKind::SdCfrExplicit => "sd_cfr_explicit",
            PolicyKind::DeepCfr => "deep_cfr",
            PolicyKind::Tabular => "tabular",
            PolicyKind::Uniform => "uniform",
        }
    }
}

/// One policy per seat, picked by the player recorded in the infoset key.
pub struct SeatPolicy {
    seats: [Box<dyn Policy>; 2],
}

impl SeatPolicy {
    pub fn new(p0: Box<dyn Policy>, p1: Box<dyn Policy>) -> Self {
        SeatPolicy { seats: [p0, p1] }
    }

    pub fn seat(&mut self, player: Player) -> &mut dyn Policy {
        &mut *self.seats[player.seat()]
    }
}

impl Policy for SeatPolicy {
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<(), PolicyError> {
        self.seats[0].reset(rng)?;
        self.seats[1].reset(rng)
    }

    fn query(&mut self, point: &DecisionPoint, history: &[OwnStep]) -> Result<Distribution, PolicyError> {
        let p = point.key.player().ok_or_else(|| PolicyError::Model("infoset key names no player".into()))?;
        self.seats[p.seat()].query(point, history)
    }
}

/// A run directory opened for evaluation.
pub struct RunView {
    pub dir: std::path::PathBuf,
    pub config: ExperimentConfig,
    pub state: RunState,
    models: Option<Arc<ModelBuffer>>,
}

impl RunView {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let (config, state) = load_run(dir)?;
        Ok(RunView { dir: dir.to_path_buf(), config, state, models: None })
    }

    /// Every stored value network, all kept decoded.
    pub fn models(&mut self) -> Result<Arc<ModelBuffer>, CliError> {
        if self.models.is_none() {
            let b = load_models(&self.dir, MANIFEST_FILE, ModelStorage::KeepAll, [0, 0])?;
            let n = b.len(Player::P0) + b.len(Player::P1);
            self.models = Some(Arc::new(b.with_lru_capacity(n)));
        }
        Ok(self.models.clone().expect("loaded"))
    }

    fn has_models(&self) -> bool {
        self.dir.join(MANIFEST_FILE).exists()
    }

    fn has_average_nets(&self) -> bool {
        Player::BOTH.iter().all(|p| self.dir.join(average_net_file(*p)).exists())
    }

    fn tabular_table(&self) -> Result<TablePolicy, CliError> {
        let path = self.dir.join(TABULAR_AVERAGE_FILE);
        let f = File::open(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let records = IterationStrategySnapshot::read_records(f)
            .map_err(|e| CliError::CorruptRun(format!("{}: {e}", path.display())))?;
        Ok(TablePolicy::new(records.into_iter().collect::<HashMap<_, _>>()))
    }

    /// Builds a two-seat policy of the given kind.
    pub fn policy(&mut self, kind: PolicyKind) -> Result<SeatPolicy, CliError> {
        let seat = |p: Player| -> Result<Box<dyn Policy>, CliError> {
            Ok(match kind {
                PolicyKind::DeepCfr => {
                    let path = self.dir.join(average_net_file(p));
                    if !path.exists() {
                        return Err(CliError::Usage(format!("{} has no average network", self.dir.display())));
                    }
                    Box::new(AvgNetPolicy(Arc::new(load_net(&path)?)))
                }
                PolicyKind::Tabular => Box::new(self.tabular_table()?),
                PolicyKind::Uniform => Box::new(UniformPolicy),
                PolicyKind::SdCfr | PolicyKind::SdCfrExplicit => unreachable!(),
            })
        };
        match kind {
            PolicyKind::SdCfr | PolicyKind::SdCfrExplicit => {
                let m = self.models()?;
                let make = |p: Player| -> Box<dyn Policy> {
                    if kind == PolicyKind::SdCfr {
                        Box::new(TrajectoryPolicy::new(m.clone(), p))
                    } else {
                        Box::new(ExplicitAveragePolicy::new(m.clone(), p))
                    }
                };
                Ok(SeatPolicy::new(make(Player::P0), make(Player::P1)))
            }
            _ => Ok(SeatPolicy::new(seat(Player::P0)?, seat(Player::P1)?)),
        }
    }
}

/// Exploitability of every strategy the run directory holds.
pub fn eval_exploitability(dir: &Path) -> Result<Vec<(String, Exploitability)>, CliError> {
    let mut view = RunView::open(dir)?;
    let section = view.config.game.clone();
    with_game(&section, EvalAll { view: &mut view })
}

struct EvalAll<'a> {
    view: &'a mut RunView,
}

impl GameTask for EvalAll<'_> {
    type Output = Result<Vec<(String, Exploitability)>, CliError>;

    fn run<G: Game + 'static>(self, game: Arc<G>) -> Self::Output {
        let view = self.view;
        let tree = GameTree::build_with_budget(&*game, view.config.game.tree_budget)?;
        let mut out = Vec::new();
        if view.has_models() {
            let m = view.models()?;
            if Player::BOTH.iter().all(|p| !m.is_empty(*p)) {
                out.push(("sd_cfr".to_string(), exploitability(&tree, &average_profile(&tree, &m)?)));
            }
        }
        let mut kinds = Vec::new();
        if view.has_average_nets() {
            kinds.push(PolicyKind::DeepCfr);
        }
        if view.dir.join(TABULAR_AVERAGE_FILE).exists() {
            kinds.push(PolicyKind::Tabular);
        }
        for kind in kinds {
            let mut p = view.policy(kind)?;
            let mut p1 = view.policy(kind)?;
            let profile = tabulate_profile(&tree, p.seat(Player::P0), p1.seat(Player::P1))
                .map_err(sdcfr_core::eval::EvalError::from)?;
            out.push((kind.name().to_string(), exploitability(&tree, &profile)));
        }
        Ok(out)
    }
}

/// Plays `a` against `b` and appends the result to `head_to_head.csv`.
pub fn head2head(
    dir: &Path,
    a: PolicyKind,
    b: PolicyKind,
    n_pairs: u64,
    seed: u64,
    pairing: Pairing,
) -> Result<EvalReport, CliError> {
    let mut view = RunView::open(dir)?;
    let mut pa = view.policy(a)?;
    let mut pb = view.policy(b)?;
    let section = view.config.game.clone();
    let report = with_game(&section, Match { a: &mut pa, b: &mut pb, n_pairs, seed, pairing })?;
    append_row(
        dir,
        logs::HEAD_TO_HEAD,
        &logs::HEAD_TO_HEAD_HEADER,
        &[
            view.state.iteration.to_string(),
            num(report.value),
            num(report.ci95),
            report.samples.to_string(),
            report.units.label().into(),
            a.name().into(),
            b.name().into(),
            seed.to_string(),
        ],
    )?;
    Ok(report)
}

struct Match<'a> {
    a: &'a mut SeatPolicy,
    b: &'a mut SeatPolicy,
    n_pairs: u64,
    seed: u64,
    pairing: Pairing,
}

impl GameTask for Match<'_> {
    type Output = Result<EvalReport, CliError>;

    fn run<G: Game + 'static>(self, game: Arc<G>) -> Self::Output {
        Ok(head_to_head(&*game, self.a, self.b, self.n_pairs, self.seed, self.pairing)?)
    }
}

pub fn round_label(round: Option<usize>) -> String {
    match round {
        None => "all".into(),
        Some(0) => "PF".into(),
        Some(1) => "FL".into(),
        Some(r) => r.to_string(),
    }
}

/// Disagreement between SD-CFR's and Deep CFR's average strategies, with
/// SD-CFR choosing the actions; rows go to `disagreement.csv`.
pub fn compare_strategies(dir: &Path, n_rollouts: u64, seed: u64) -> Result<Vec<DisagreementRow>, CliError> {
    let mut view = RunView::open(dir)?;
    let models = view.models()?;
    let mut reference: [Box<dyn Policy>; 2] = Player::BOTH.map(|p| -> Box<dyn Policy> {
        Box::new(CachedAveragePolicy::new(models.clone(), p))
    });
    let mut other = view.policy(PolicyKind::DeepCfr)?;
    let mut other1 = view.policy(PolicyKind::DeepCfr)?;
    let section = view.config.game.clone();
    let [r0, r1] = &mut reference;
    let task = Disagree {
        reference: [&mut **r0, &mut **r1],
        other: [other.seat(Player::P0), other1.seat(Player::P1)],
        n_rollouts,
        seed,
    };
    let rows = with_game(&section, task)?;
    for r in &rows {
        append_row(
            dir,
            logs::DISAGREEMENT,
            &logs::DISAGREEMENT_HEADER,
            &[
                r.depth.to_string(),
                round_label(r.round),
                num(r.mean),
                num(r.ci95),
                num(r.std),
                r.n.to_string(),
                view.state.iteration.to_string(),
            ],
        )?;
    }
    Ok(rows)
}

struct Disagree<'a> {
    reference: [&'a mut dyn Policy; 2],
    other: [&'a mut dyn Policy; 2],
    n_rollouts: u64,
    seed: u64,
}

impl GameTask for Disagree<'_> {
    type Output = Result<Vec<DisagreementRow>, CliError>;

    fn run<G: Game + 'static>(self, game: Arc<G>) -> Self::Output {
        let table = strategy_disagreement(&*game, self.reference, self.other, self.n_rollouts, self.seed)?;
        let mut rows = table.rows();
        rows.extend(table.by_depth());
        rows.sort_by_key(|r| (r.depth, r.round.is_none(), r.round));
        Ok(rows)
    }
}

/// Oracle dumps: the infoset list of a game and, for `iterations > 0`, the
/// iteration strategies and average of tabular linear CFR.
pub fn enumerate(section: &GameSection, iterations: u64, out: &Path) -> Result<usize, CliError> {
    fs::create_dir_all(out)?;
    with_game(section, Enumerate { section, iterations, out })
}

struct Enumerate<'a> {
    section: &'a GameSection,
    iterations: u64,
    out: &'a Path,
}

impl GameTask for Enumerate<'_> {
    type Output = Result<usize, CliError>;

    fn run<G: Game + 'static>(self, game: Arc<G>) -> Self::Output {
        let tree = Arc::new(GameTree::build_with_budget(&*game, self.section.tree_budget)?);
        let mut f = std::io::BufWriter::new(File::create(self.out.join("infosets.tsv"))?);
        writeln!(f, "player\tkey\tround\tdepth\tactions")?;
        for info in tree.infosets() {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}",
                info.player.seat(),
                info.key.to_hex(),
                info.round,
                info.depth,
                info.num_actions()
            )?;
        }
        f.flush()?;
        if self.iterations > 0 {
            let mut cfg = CfrConfig::new(Weighting::Linear, UpdateSchedule::Alternating);
            cfg.record_snapshots = true;
            let mut solver = CfrSolver::new(tree.clone(), cfg);
            solver.run(self.iterations);
            let snaps = self.out.join("snapshots");
            fs::create_dir_all(&snaps)?;
            for s in solver.snapshots() {
                let mut bytes = Vec::new();
                s.write_to(&tree, &mut bytes)?;
                fs::write(snaps.join(format!("iter_{:06}.bin", s.iteration)), bytes)?;
            }
            let avg = Arc::new(solver.average_profile());
            let snap = IterationStrategySnapshot { iteration: self.iterations, strategies: [Some(avg.clone()), Some(avg)] };
            let mut bytes = Vec::new();
            snap.write_to(&tree, &mut bytes)?;
            fs::write(self.out.join(TABULAR_AVERAGE_FILE), bytes)?;
        }
        Ok(tree.infosets().len())
    }
}
