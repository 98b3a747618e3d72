//! `skyroute`: map generation, agent training, evaluation and AC/DDQN
//! comparison as one binary. Every run writes its fully resolved config
//! next to its outputs so any artifact can be reproduced from that file
//! alone.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use skyroute_core::{
    compute_metrics, export_artifacts, generate_synthetic_map, load_checkpoint, load_map,
    rollout_greedy, save_checkpoint, save_map, train_ac, train_ddqn, AcHyperparams,
    AgentCheckpoint, AgentError, DdqnHyperparams, EnvConfig, EpisodeTrace, GridEnv,
    MapGenConfig, RadioMap, TrajectoryMetrics,
};

const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

/// Exit codes: 0 success, 1 validation failure, 2 runtime abort.
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

// Config-time errors are validation; anything that fails mid-pipeline
// (NaN guard, i/o on outputs) is a runtime abort.
fn validation(err: impl std::fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

fn runtime(err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

fn agent_error(err: AgentError) -> CliError {
    match err {
        AgentError::InvalidHyperparams(_) | AgentError::Env(_) => validation(err),
        other => runtime(other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AgentKind {
    Ac,
    Ddqn,
}

impl AgentKind {
    fn name(self) -> &'static str {
        match self {
            AgentKind::Ac => "ac",
            AgentKind::Ddqn => "ddqn",
        }
    }
}

/// Start/goal/step-limit section of the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EnvSettings {
    start_cell: (usize, usize),
    goal_cell: (usize, usize),
    max_steps: usize,
}

impl Default for EnvSettings {
    // Matches the default 20x20 map: a diagonal hop across the corner of
    // the central shadow block, where the shortest-distance route and the
    // best-SINR route are equally long but differ sharply in signal.
    fn default() -> Self {
        Self {
            start_cell: (4, 5),
            goal_cell: (5, 4),
            max_steps: 16,
        }
    }
}

impl EnvSettings {
    fn to_env_config(&self) -> EnvConfig {
        EnvConfig::new(self.start_cell, self.goal_cell, self.max_steps)
    }
}

/// The full run configuration. Loaded from `--config <toml>`, then
/// overridden by CLI flags; the resolved result is written next to the
/// outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    /// Master seed. Map fading, network init and exploration all derive
    /// from it through named sub-streams.
    seed: u64,
    /// Output directory for artifacts.
    out: PathBuf,
    /// Optional map file; when absent, subcommands generate from `map_gen`.
    map: Option<PathBuf>,
    /// Agent selection for `train`.
    agent: AgentKind,
    /// Seed set for `compare`.
    compare_seeds: Vec<u64>,
    map_gen: MapGenConfig,
    env: EnvSettings,
    ac: AcHyperparams,
    ddqn: DdqnHyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 3,
            out: PathBuf::from("out"),
            map: None,
            agent: AgentKind::Ac,
            compare_seeds: vec![3, 9, 13, 25, 34],
            map_gen: MapGenConfig::default(),
            env: EnvSettings::default(),
            ac: AcHyperparams::default(),
            ddqn: DdqnHyperparams::default(),
        }
    }
}

#[derive(Debug, Args)]
struct CommonFlags {
    /// TOML config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Map file override (skips the synthetic generator).
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "skyroute", version, about = "UAV path optimization over radio maps")]
enum Cli {
    /// Generate a synthetic radio map and write it as CSV.
    GenerateMap {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Train an agent and write checkpoint plus learning curve.
    Train {
        #[command(flatten)]
        common: CommonFlags,
        /// Which agent to train.
        #[arg(long, value_enum)]
        agent: Option<AgentKind>,
    },
    /// Greedy rollout of a trained checkpoint; exports trace and metrics.
    Evaluate {
        #[command(flatten)]
        common: CommonFlags,
        /// Checkpoint file produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train AC and DDQN across the seed set and tabulate the metrics.
    Compare {
        #[command(flatten)]
        common: CommonFlags,
    },
}

fn resolve_config(common: &CommonFlags, agent: Option<AgentKind>) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| validation(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    if let Some(map) = &common.map {
        config.map = Some(map.clone());
    }
    if let Some(agent) = agent {
        config.agent = agent;
    }
    // Single-seed rule: the generator's fading stream follows the run seed.
    config.map_gen.seed = config.seed;
    Ok(config)
}

/// Load the configured map file, or generate one from `map_gen`.
fn obtain_map(config: &RunConfig) -> Result<RadioMap, CliError> {
    match &config.map {
        Some(path) => load_map(path).map_err(validation),
        None => generate_synthetic_map(&config.map_gen).map_err(validation),
    }
}

fn write_resolved_config(config: &RunConfig, map: &RadioMap) -> Result<(), CliError> {
    // Resolution records the dimensions actually used, so downstream
    // commands can detect checkpoint/map mismatches.
    let mut resolved = config.clone();
    resolved.map_gen.width_cells = map.width_cells;
    resolved.map_gen.height_cells = map.height_cells;
    std::fs::create_dir_all(&config.out)
        .map_err(|e| runtime(format!("cannot create {}: {e}", config.out.display())))?;
    let text = toml::to_string_pretty(&resolved).map_err(runtime)?;
    let path = config.out.join(RESOLVED_CONFIG_FILE);
    std::fs::write(&path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn build_env(map: Arc<RadioMap>, config: &RunConfig) -> Result<GridEnv, CliError> {
    GridEnv::new(map, config.env.to_env_config()).map_err(validation)
}

fn cmd_generate_map(config: &RunConfig) -> Result<(), CliError> {
    if config.map.is_some() {
        return Err(CliError::Validation(
            "generate-map writes a new map; --map is not applicable".into(),
        ));
    }
    let map = generate_synthetic_map(&config.map_gen).map_err(validation)?;
    write_resolved_config(config, &map)?;
    let path = config.out.join("map.csv");
    save_map(&map, &path).map_err(runtime)?;
    let (lo, hi) = sinr_range(&map);
    println!(
        "map: {}x{} cells, {} gNBs, best-SINR range [{lo:.2}, {hi:.2}] dB -> {}",
        map.width_cells,
        map.height_cells,
        map.num_gnbs(),
        path.display()
    );
    Ok(())
}

fn sinr_range(map: &RadioMap) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for cx in 0..map.width_cells {
        for cy in 0..map.height_cells {
            let s = map.cell_info(cx, cy).expect("in range").best_sinr_db;
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    (lo, hi)
}

fn cmd_train(config: &RunConfig) -> Result<(), CliError> {
    let map = Arc::new(obtain_map(config)?);
    write_resolved_config(config, &map)?;
    let mut env = build_env(map.clone(), config)?;

    let (checkpoint, episodes) = match config.agent {
        AgentKind::Ac => {
            let result = train_ac(&mut env, config.ac, config.seed, None).map_err(agent_error)?;
            (AgentCheckpoint::Ac(result.agent), result.episodes)
        }
        AgentKind::Ddqn => {
            let result = train_ddqn(&mut env, config.ddqn, config.seed).map_err(agent_error)?;
            (AgentCheckpoint::Ddqn(result.agent), result.episodes)
        }
    };

    let ck_path = config.out.join("checkpoint.json");
    save_checkpoint(&checkpoint, &ck_path).map_err(runtime)?;
    let curve_path = config.out.join("learning_curve.csv");
    std::fs::write(&curve_path, skyroute_core::eval::learning_curve_to_csv(&episodes))
        .map_err(|e| runtime(format!("cannot write {}: {e}", curve_path.display())))?;

    let reached = episodes.iter().filter(|e| e.reached_goal).count();
    println!(
        "trained {} for {} episodes ({} reached goal) -> {}",
        config.agent.name(),
        episodes.len(),
        reached,
        ck_path.display()
    );
    Ok(())
}

fn cmd_evaluate(config: &RunConfig, checkpoint_path: &Path) -> Result<(), CliError> {
    let map = Arc::new(obtain_map(config)?);
    check_checkpoint_map_dims(checkpoint_path, &map)?;
    let checkpoint = load_checkpoint(checkpoint_path).map_err(validation)?;
    write_resolved_config(config, &map)?;
    let mut env = build_env(map.clone(), config)?;

    let trace = match &checkpoint {
        AgentCheckpoint::Ac(agent) => rollout_greedy(agent, &mut env),
        AgentCheckpoint::Ddqn(agent) => rollout_greedy(agent, &mut env),
    };
    let metrics = compute_metrics(&trace, map.cell_size_m).map_err(runtime)?;
    export_artifacts(&config.out, &trace, &metrics, &[], &map).map_err(runtime)?;
    println!(
        "evaluated {} steps, reached_goal={}, mean SINR {:.3} dB, {} handovers",
        metrics.steps, metrics.reached_goal, metrics.average_sinr_db, metrics.handover_count
    );
    Ok(())
}

/// A checkpoint trained on one grid is meaningless on another: the policy
/// reads normalized coordinates. The training run's resolved config (written
/// next to the checkpoint) records the grid; reject evaluation on a map with
/// different dimensions.
fn check_checkpoint_map_dims(checkpoint_path: &Path, map: &RadioMap) -> Result<(), CliError> {
    let sidecar = match checkpoint_path.parent() {
        Some(dir) => dir.join(RESOLVED_CONFIG_FILE),
        None => return Ok(()),
    };
    let Ok(text) = std::fs::read_to_string(&sidecar) else {
        return Ok(()); // no provenance available; accept
    };
    let trained: RunConfig = toml::from_str(&text)
        .map_err(|e| validation(format!("corrupt resolved config {}: {e}", sidecar.display())))?;
    if trained.map_gen.width_cells != map.width_cells
        || trained.map_gen.height_cells != map.height_cells
    {
        return Err(CliError::Validation(format!(
            "checkpoint was trained on a {}x{} grid but the map is {}x{}",
            trained.map_gen.width_cells,
            trained.map_gen.height_cells,
            map.width_cells,
            map.height_cells
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareRow {
    agent: &'static str,
    average_sinr_db: f64,
    mean_handovers: f64,
    mean_distance_km: f64,
    goal_rate: f64,
}

fn mean_metrics(agent: &'static str, per_seed: &[TrajectoryMetrics]) -> CompareRow {
    let n = per_seed.len() as f64;
    CompareRow {
        agent,
        average_sinr_db: per_seed.iter().map(|m| m.average_sinr_db).sum::<f64>() / n,
        mean_handovers: per_seed.iter().map(|m| m.handover_count as f64).sum::<f64>() / n,
        mean_distance_km: per_seed.iter().map(|m| m.distance_covered_km).sum::<f64>() / n,
        goal_rate: per_seed.iter().filter(|m| m.reached_goal).count() as f64 / n,
    }
}

fn cmd_compare(config: &RunConfig) -> Result<(), CliError> {
    if config.compare_seeds.is_empty() {
        return Err(CliError::Validation("compare_seeds must not be empty".into()));
    }
    let map = Arc::new(obtain_map(config)?);
    write_resolved_config(config, &map)?;

    let mut ac_metrics = Vec::new();
    let mut ddqn_metrics = Vec::new();
    for &seed in &config.compare_seeds {
        // The map is shared read-only; the two agents train concurrently.
        let (ac, ddqn) = std::thread::scope(|scope| {
            let ac = scope.spawn(|| -> Result<EpisodeTrace, CliError> {
                let mut env = build_env(map.clone(), config)?;
                let result = train_ac(&mut env, config.ac, seed, None).map_err(agent_error)?;
                Ok(rollout_greedy(&result.agent, &mut env))
            });
            let ddqn = scope.spawn(|| -> Result<EpisodeTrace, CliError> {
                let mut env = build_env(map.clone(), config)?;
                let result = train_ddqn(&mut env, config.ddqn, seed).map_err(agent_error)?;
                Ok(rollout_greedy(&result.agent, &mut env))
            });
            (ac.join().expect("ac thread"), ddqn.join().expect("ddqn thread"))
        });
        ac_metrics.push(compute_metrics(&ac?, map.cell_size_m).map_err(runtime)?);
        ddqn_metrics.push(compute_metrics(&ddqn?, map.cell_size_m).map_err(runtime)?);
    }

    let rows = [
        mean_metrics("ac", &ac_metrics),
        mean_metrics("ddqn", &ddqn_metrics),
    ];
    let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
    let json_path = config.out.join("comparison.json");
    std::fs::write(&json_path, &json)
        .map_err(|e| runtime(format!("cannot write {}: {e}", json_path.display())))?;

    // The table prints the same f64 values the JSON carries, full precision.
    let mut table = String::from("agent,average_sinr_db,mean_handovers,mean_distance_km,goal_rate\n");
    for row in &rows {
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            row.agent, row.average_sinr_db, row.mean_handovers, row.mean_distance_km, row.goal_rate
        ));
    }
    print!("{table}");
    let table_path = config.out.join("comparison.csv");
    std::fs::write(&table_path, table)
        .map_err(|e| runtime(format!("cannot write {}: {e}", table_path.display())))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli {
        Cli::GenerateMap { common } => {
            let config = resolve_config(&common, None)?;
            cmd_generate_map(&config)
        }
        Cli::Train { common, agent } => {
            let config = resolve_config(&common, agent)?;
            cmd_train(&config)
        }
        Cli::Evaluate { common, checkpoint } => {
            let config = resolve_config(&common, None)?;
            cmd_evaluate(&config, &checkpoint)
        }
        Cli::Compare { common } => {
            let config = resolve_config(&common, None)?;
            cmd_compare(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1, // usage problems are validation failures
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
