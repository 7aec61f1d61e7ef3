//! Deterministic parallel sweeps over a grid of `(players, decks)` cells.
//!
//! Game `g` of cell `c` always draws from `SeedPlan::stream_for(c, g)`, and
//! per-worker accumulators are merged with exact integer arithmetic, so the
//! output does not depend on the worker count or on scheduling.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run_game, EngineError, GameConfig, NoEvents, DEFAULT_TURN_CAP};
use crate::randomness::SeedPlan;
use crate::stats::{
    ConfigAccumulator, ConfigReport, StatsError, DEFAULT_HAND_BIN_WIDTH, DEFAULT_TURN_BIN_WIDTH,
};

/// Games handed to a worker at a time.
const CHUNK: u64 = 256;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("({players} players, {decks} decks) is not part of the grid")]
    NotInGrid { players: usize, decks: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("failed to start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSpec {
    pub player_counts: Vec<usize>,
    pub deck_counts: Vec<usize>,
    pub games_per_config: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub turn_cap: u64,
    pub turn_bin_width: u64,
    pub hand_bin_width: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            player_counts: vec![2, 3, 4, 5],
            deck_counts: vec![1, 2, 3, 4, 5],
            games_per_config: 1_000_000,
            master_seed: 0,
            workers: 1,
            turn_cap: DEFAULT_TURN_CAP,
            turn_bin_width: DEFAULT_TURN_BIN_WIDTH,
            hand_bin_width: DEFAULT_HAND_BIN_WIDTH,
        }
    }
}

impl SweepSpec {
    /// A one-cell grid.
    pub fn single(players: usize, decks: usize, games: u64, master_seed: u64) -> Self {
        SweepSpec {
            player_counts: vec![players],
            deck_counts: vec![decks],
            games_per_config: games,
            master_seed,
            ..SweepSpec::default()
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.player_counts.is_empty() || self.deck_counts.is_empty() {
            return Err(SweepError::InvalidSpec(
                "player and deck lists must be non-empty".into(),
            ));
        }
        if self.games_per_config == 0 {
            return Err(SweepError::InvalidSpec(
                "games per config must be positive".into(),
            ));
        }
        if self.workers == 0 {
            return Err(SweepError::InvalidSpec("need at least one worker".into()));
        }
        for (players, decks) in self.grid() {
            GameConfig::with_turn_cap(players, decks, self.turn_cap)?;
        }
        ConfigAccumulator::with_bin_widths(
            GameConfig::with_turn_cap(2, 1, self.turn_cap)?,
            self.turn_bin_width,
            self.hand_bin_width,
        )?;
        Ok(())
    }

    fn sorted(values: &[usize]) -> Vec<usize> {
        let mut v = values.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// All cells, row-major over sorted player counts then sorted deck counts.
    pub fn grid(&self) -> Vec<(usize, usize)> {
        let decks = Self::sorted(&self.deck_counts);
        Self::sorted(&self.player_counts)
            .into_iter()
            .flat_map(|n| decks.iter().map(move |&k| (n, k)))
            .collect()
    }

    /// Stable id of a cell, used as the `config_id` for seed derivation.
    pub fn cell_index(&self, players: usize, decks: usize) -> Result<u64, SweepError> {
        self.grid()
            .iter()
            .position(|&cell| cell == (players, decks))
            .map(|i| i as u64)
            .ok_or(SweepError::NotInGrid { players, decks })
    }

    pub fn total_games(&self) -> u64 {
        self.grid().len() as u64 * self.games_per_config
    }
}

/// Side-channel progress for one cell.
#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub players: usize,
    pub decks: usize,
    pub cell_index: u64,
    pub games_done: u64,
    pub games_total: u64,
    pub elapsed: Duration,
}

pub type ProgressSink<'a> = &'a (dyn Fn(&Progress) + Sync);

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub cells: BTreeMap<(usize, usize), ConfigReport>,
}

impl SweepReport {
    pub fn total_aborted(&self) -> u64 {
        self.cells.values().map(|r| r.aborted).sum()
    }

    pub fn get(&self, players: usize, decks: usize) -> Option<&ConfigReport> {
        self.cells.get(&(players, decks))
    }
}

/// Runs every cell of the grid and returns one report per cell.
pub fn run_sweep(
    spec: &SweepSpec,
    progress: Option<ProgressSink>,
) -> Result<SweepReport, SweepError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()?;
    let plan = SeedPlan::new(spec.master_seed);
    let mut cells = BTreeMap::new();
    for (index, (players, decks)) in spec.grid().into_iter().enumerate() {
        let config = GameConfig::with_turn_cap(players, decks, spec.turn_cap)?;
        let proto =
            ConfigAccumulator::with_bin_widths(config, spec.turn_bin_width, spec.hand_bin_width)?;
        let acc = pool.install(|| {
            simulate_cell(&proto, &plan, index as u64, spec.games_per_config, progress)
        })?;
        cells.insert((players, decks), acc.finalize()?);
    }
    Ok(SweepReport {
        spec: spec.clone(),
        cells,
    })
}

/// Plays `games` games of one cell on the current rayon pool and merges them
/// into a copy of `proto` (which should be empty).
pub fn simulate_cell(
    proto: &ConfigAccumulator,
    plan: &SeedPlan,
    cell_index: u64,
    games: u64,
    progress: Option<ProgressSink>,
) -> Result<ConfigAccumulator, SweepError> {
    let config = proto.config;
    let started = Instant::now();
    let done = AtomicU64::new(0);
    let chunks = games.div_ceil(CHUNK);

    let merged = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<ConfigAccumulator, SweepError> {
            let mut acc = proto.empty_like();
            let end = ((chunk + 1) * CHUNK).min(games);
            for game in chunk * CHUNK..end {
                let mut rng = plan.stream_for(cell_index, game);
                let result = run_game(&config, &mut rng, &mut NoEvents)?;
                acc.record(&result)?;
            }
            if let Some(report) = progress {
                let so_far =
                    done.fetch_add(end - chunk * CHUNK, Ordering::Relaxed) + (end - chunk * CHUNK);
                report(&Progress {
                    players: config.players,
                    decks: config.decks,
                    cell_index,
                    games_done: so_far,
                    games_total: games,
                    elapsed: started.elapsed(),
                });
            }
            Ok(acc)
        })
        .try_reduce(
            || proto.empty_like(),
            |a, b| a.merged(&b).map_err(SweepError::from),
        )?;
    Ok(proto.clone().merged(&merged)?)
}
