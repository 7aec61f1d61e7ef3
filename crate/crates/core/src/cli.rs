//! The `bhikar` command line: trace one game, simulate one configuration, or
//! sweep a grid, writing figure-ready CSV and JSON.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 at least one game
//! hit the turn cap.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use rand_core::{OsRng, TryRngCore};
use serde::Serialize;
use thiserror::Error;

use crate::engine::{run_game, EngineError, GameConfig, TurnEvent, DEFAULT_TURN_CAP};
use crate::randomness::{SeedPlan, GENERATOR_NAME, SEED_DERIVATION};
use crate::stats::{BinRow, ConfigReport, HistogramReport, StatsError};
use crate::stats::{DEFAULT_HAND_BIN_WIDTH, DEFAULT_TURN_BIN_WIDTH};
use crate::sweep::{run_sweep, Progress, SweepError, SweepReport, SweepSpec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_ABORTED: u8 = 3;

pub const GRID_ORDERING: &str =
    "row-major over ascending player counts, then ascending deck counts; cell index is the position";

#[derive(Debug, Parser)]
#[command(
    name = "bhikar",
    version,
    about = "Monte Carlo simulator for the Bhikar-Sawkar card game"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play one game and print every event.
    Trace(TraceArgs),
    /// Simulate many games of one configuration.
    Simulate(SimulateArgs),
    /// Simulate every (players, decks) combination of a grid.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Text,
    Jsonl,
}

#[derive(Debug, clap::Args)]
pub struct SeedArgs {
    /// Master seed.
    #[arg(long, default_value_t = 0, conflicts_with = "entropy_seed")]
    pub seed: u64,
    /// Draw the master seed from the OS; the chosen seed is recorded in the output.
    #[arg(long)]
    pub entropy_seed: bool,
}

impl SeedArgs {
    fn resolve(&self) -> Result<(u64, SeedSource), CliError> {
        if self.entropy_seed {
            let seed = OsRng
                .try_next_u64()
                .map_err(|e| CliError::Io(io::Error::other(e.to_string())))?;
            Ok((seed, SeedSource::Entropy))
        } else {
            Ok((self.seed, SeedSource::Fixed))
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub players: usize,
    #[arg(long)]
    pub decks: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long, value_enum, default_value_t = TraceFormat::Text)]
    pub format: TraceFormat,
    #[arg(long, default_value_t = DEFAULT_TURN_CAP)]
    pub turn_cap: u64,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Games per configuration.
    #[arg(long, default_value_t = 1_000_000)]
    pub games: u64,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TURN_BIN_WIDTH)]
    pub turn_bin_width: u64,
    #[arg(long, default_value_t = DEFAULT_HAND_BIN_WIDTH)]
    pub hand_bin_width: u64,
    #[arg(long, default_value_t = DEFAULT_TURN_CAP)]
    pub turn_cap: u64,
    /// Report progress on stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub players: usize,
    #[arg(long)]
    pub decks: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub players: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub decks: Vec<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_IO,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidSpec(_) | SweepError::NotInGrid { .. } | SweepError::Engine(_) => {
                CliError::Usage(e.to_string())
            }
            SweepError::Stats(StatsError::ZeroBinWidth) => CliError::Usage(e.to_string()),
            SweepError::Stats(s) => CliError::Stats(s),
            SweepError::Pool(p) => CliError::Pool(p.to_string()),
        }
    }
}

/// What a successful command observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Aborted,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Completed => EXIT_OK,
            Outcome::Aborted => EXIT_ABORTED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Fixed,
    Entropy,
}

/// Everything needed to reproduce an output file exactly.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub generator: &'static str,
    pub seed_derivation: &'static str,
    pub master_seed: u64,
    pub seed_source: SeedSource,
    pub grid_ordering: &'static str,
    pub player_numbering: &'static str,
}

impl Metadata {
    fn new(master_seed: u64, seed_source: SeedSource) -> Self {
        Metadata {
            tool: "bhikar",
            version: env!("CARGO_PKG_VERSION"),
            generator: GENERATOR_NAME,
            seed_derivation: SEED_DERIVATION,
            master_seed,
            seed_source,
            grid_ordering: GRID_ORDERING,
            player_numbering: "0-based; player 0 is dealt to first and starts the game",
        }
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub metadata: Metadata,
    pub cell_index: u64,
    pub players: usize,
    pub decks: usize,
    pub turn_cap: u64,
    pub games: u64,
    pub completed_games: u64,
    pub aborted: u64,
    pub min_turns: Option<u64>,
    pub max_turns: Option<u64>,
    pub mean_turns: Option<f64>,
    pub total_turns_sum: u128,
    pub turn_bin_width: u64,
    pub hand_bin_width: u64,
    pub total_hands: u64,
    pub hand_wins: Vec<u64>,
    pub hand_win_probability: Vec<f64>,
    pub game_wins: Vec<u64>,
    pub game_win_probability: Vec<f64>,
}

impl Summary {
    pub fn new(metadata: Metadata, cell_index: u64, report: &ConfigReport) -> Self {
        Summary {
            metadata,
            cell_index,
            players: report.config.players,
            decks: report.config.decks,
            turn_cap: report.config.turn_cap,
            games: report.games,
            completed_games: report.completed_games,
            aborted: report.aborted,
            min_turns: report.min_turns,
            max_turns: report.max_turns,
            mean_turns: report.mean_turns,
            total_turns_sum: report.total_turns_sum,
            turn_bin_width: report.turns.bin_width,
            hand_bin_width: report.hand_sizes.bin_width,
            total_hands: report.total_hands,
            hand_wins: report.hand_wins.clone(),
            hand_win_probability: report.hand_win_pdf.clone(),
            game_wins: report.game_wins.clone(),
            game_win_probability: report.game_win_pdf.clone(),
        }
    }
}

#[derive(Serialize)]
struct SweepMetadata<'a> {
    metadata: Metadata,
    player_counts: Vec<usize>,
    deck_counts: Vec<usize>,
    games_per_config: u64,
    turn_cap: u64,
    cells: Vec<CellEntry<'a>>,
    total_aborted: u64,
}

#[derive(Serialize)]
struct CellEntry<'a> {
    cell_index: usize,
    players: usize,
    decks: usize,
    directory: &'a str,
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const TURNS_FILE: &str = "turns_hist.csv";
pub const HAND_SIZES_FILE: &str = "hand_sizes_hist.csv";
pub const GRID_SUMMARY_FILE: &str = "grid_summary.csv";
pub const SWEEP_METADATA_FILE: &str = "sweep.json";

pub fn cell_dir_name(players: usize, decks: usize) -> String {
    format!("N{players}_K{decks}")
}

/// Runs a parsed command. Anything meant for standard output goes to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Trace(args) => trace(&args, out),
        Command::Simulate(args) => simulate(&args),
        Command::Sweep(args) => sweep(&args),
    }
}

/// Parses `args` (including the program name) and runs, returning the exit
/// code. Errors are written to `err`.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match run(cli, out) {
        Ok(outcome) => {
            if outcome == Outcome::Aborted {
                let _ = writeln!(err, "bhikar: at least one game hit the turn cap");
            }
            outcome.exit_code()
        }
        Err(e) => {
            let _ = writeln!(err, "bhikar: {e}");
            e.exit_code()
        }
    }
}

#[derive(Serialize)]
struct AbortRecord {
    event: &'static str,
    total_turns: u64,
    turn_cap: u64,
}

fn trace(args: &TraceArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let config = GameConfig::with_turn_cap(args.players, args.decks, args.turn_cap)?;
    let (seed, _) = args.seed.resolve()?;
    // Same stream as game 0 of `simulate` with this seed.
    let mut rng = SeedPlan::new(seed).stream_for(0, 0);
    let mut out = BufWriter::new(out);
    let mut write_error: Option<io::Error> = None;
    let format = args.format;
    let mut sink = |event: &TurnEvent| {
        if write_error.is_some() {
            return;
        }
        let written = match format {
            TraceFormat::Text => writeln!(out, "{event}"),
            TraceFormat::Jsonl => serde_json::to_writer(&mut out, event)
                .map_err(io::Error::from)
                .and_then(|_| writeln!(out)),
        };
        if let Err(e) = written {
            write_error = Some(e);
        }
    };
    let result = run_game(&config, &mut rng, &mut sink)?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    if !result.terminated {
        match format {
            TraceFormat::Text => writeln!(
                out,
                "aborted: turn cap of {} reached after {} turns",
                config.turn_cap, result.total_turns
            )?,
            TraceFormat::Jsonl => {
                serde_json::to_writer(
                    &mut out,
                    &AbortRecord {
                        event: "aborted",
                        total_turns: result.total_turns,
                        turn_cap: config.turn_cap,
                    },
                )?;
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(if result.terminated {
        Outcome::Completed
    } else {
        Outcome::Aborted
    })
}

fn sweep_spec(players: Vec<usize>, decks: Vec<usize>, run: &RunArgs, seed: u64) -> SweepSpec {
    SweepSpec {
        player_counts: players,
        deck_counts: decks,
        games_per_config: run.games,
        master_seed: seed,
        workers: run.workers,
        turn_cap: run.turn_cap,
        turn_bin_width: run.turn_bin_width,
        hand_bin_width: run.hand_bin_width,
    }
}

fn execute(spec: &SweepSpec, show_progress: bool) -> Result<SweepReport, CliError> {
    if !show_progress {
        return Ok(run_sweep(spec, None)?);
    }
    let last = Mutex::new(Instant::now() - Duration::from_secs(60));
    let sink = |p: &Progress| {
        let mut last = last.lock().unwrap();
        if p.games_done == p.games_total || last.elapsed() >= Duration::from_secs(1) {
            *last = Instant::now();
            eprintln!(
                "[cell {} N={} K={}] {}/{} games, {:.1}s",
                p.cell_index,
                p.players,
                p.decks,
                p.games_done,
                p.games_total,
                p.elapsed.as_secs_f64()
            );
        }
    };
    Ok(run_sweep(spec, Some(&sink))?)
}

fn simulate(args: &SimulateArgs) -> Result<Outcome, CliError> {
    let (seed, source) = args.run.seed.resolve()?;
    let spec = sweep_spec(vec![args.players], vec![args.decks], &args.run, seed);
    let report = execute(&spec, args.run.progress)?;
    let cell = report
        .get(args.players, args.decks)
        .expect("single-cell sweep has its cell");
    write_bundle(
        &args.run.out,
        &Summary::new(Metadata::new(seed, source), 0, cell),
        cell,
    )?;
    Ok(outcome_of(&report))
}

fn sweep(args: &SweepArgs) -> Result<Outcome, CliError> {
    let (seed, source) = args.run.seed.resolve()?;
    let spec = sweep_spec(args.players.clone(), args.decks.clone(), &args.run, seed);
    let report = execute(&spec, args.run.progress)?;
    write_sweep(&args.run.out, &report, source)?;
    Ok(outcome_of(&report))
}

fn outcome_of(report: &SweepReport) -> Outcome {
    if report.total_aborted() > 0 {
        Outcome::Aborted
    } else {
        Outcome::Completed
    }
}

/// Writes `summary.json` and both histogram CSVs into `dir`.
pub fn write_bundle(dir: &Path, summary: &Summary, report: &ConfigReport) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut json = BufWriter::new(File::create(dir.join(SUMMARY_FILE))?);
    serde_json::to_writer_pretty(&mut json, summary)?;
    writeln!(json)?;
    json.flush()?;
    write_histogram(&dir.join(TURNS_FILE), &report.turns)?;
    write_histogram(&dir.join(HAND_SIZES_FILE), &report.hand_sizes)?;
    Ok(())
}

/// Header `bin_start,bin_end,count,probability`; only non-empty bins are
/// listed, in increasing order.
pub fn write_histogram(path: &Path, hist: &HistogramReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    if hist.bins.is_empty() {
        w.write_record(["bin_start", "bin_end", "count", "probability"])?;
    }
    for row in &hist.bins {
        w.serialize::<&BinRow>(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one bundle per cell plus `grid_summary.csv` and `sweep.json`.
pub fn write_sweep(dir: &Path, report: &SweepReport, source: SeedSource) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let spec = &report.spec;
    let grid = spec.grid();
    let names: Vec<String> = grid.iter().map(|&(n, k)| cell_dir_name(n, k)).collect();
    let max_players = grid.iter().map(|&(n, _)| n).max().unwrap_or(0);

    let mut table = csv::Writer::from_path(dir.join(GRID_SUMMARY_FILE))?;
    let mut header: Vec<String> = [
        "players",
        "decks",
        "games",
        "min_turns",
        "max_turns",
        "mean_turns",
        "aborts",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..max_players).map(|p| format!("win_prob_p{p}")));
    table.write_record(&header)?;

    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (index, (&(n, k), name)) in grid.iter().zip(&names).enumerate() {
        let cell = report.get(n, k).expect("every grid cell is reported");
        let summary = Summary::new(Metadata::new(spec.master_seed, source), index as u64, cell);
        write_bundle(&dir.join(name), &summary, cell)?;

        let mut row = vec![
            n.to_string(),
            k.to_string(),
            cell.games.to_string(),
            opt(cell.min_turns),
            opt(cell.max_turns),
            cell.mean_turns.map(|m| m.to_string()).unwrap_or_default(),
            cell.aborted.to_string(),
        ];
        row.extend((0..max_players).map(|p| {
            cell.game_win_pdf
                .get(p)
                .map(|x| x.to_string())
                .unwrap_or_default()
        }));
        table.write_record(&row)?;
    }
    table.flush()?;

    let meta = SweepMetadata {
        metadata: Metadata::new(spec.master_seed, source),
        player_counts: sorted_unique(&spec.player_counts),
        deck_counts: sorted_unique(&spec.deck_counts),
        games_per_config: spec.games_per_config,
        turn_cap: spec.turn_cap,
        cells: grid
            .iter()
            .zip(&names)
            .enumerate()
            .map(|(i, (&(n, k), name))| CellEntry {
                cell_index: i,
                players: n,
                decks: k,
                directory: name,
            })
            .collect(),
        total_aborted: report.total_aborted(),
    };
    let mut json = BufWriter::new(File::create(dir.join(SWEEP_METADATA_FILE))?);
    serde_json::to_writer_pretty(&mut json, &meta)?;
    writeln!(json)?;
    json.flush()?;
    Ok(())
}

fn sorted_unique(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}
