//! Mergeable per-configuration statistics.
//!
//! Everything is accumulated as exact integers so that any sharding of the
//! same set of games merges to a bit-identical result. Floating point shows up
//! only in [`ConfigAccumulator::finalize`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{GameConfig, GameResult};

pub const DEFAULT_TURN_BIN_WIDTH: u64 = 100;
pub const DEFAULT_HAND_BIN_WIDTH: u64 = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("bin width must be positive")]
    ZeroBinWidth,
    #[error("bin width mismatch: {0} vs {1}")]
    BinWidthMismatch(u64, u64),
    #[error("configuration mismatch: accumulator is {expected:?}, got {found:?}")]
    ConfigMismatch {
        expected: GameConfig,
        found: GameConfig,
    },
    #[error("game result is inconsistent with its configuration: {0}")]
    MalformedResult(String),
    #[error("cannot finalize a report with no recorded games")]
    Empty,
}

/// Fixed-width histogram over non-negative integers. Bin `b` covers
/// `[b * width, (b + 1) * width)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bin_width: u64,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width: u64) -> Result<Self, StatsError> {
        if bin_width == 0 {
            return Err(StatsError::ZeroBinWidth);
        }
        Ok(Histogram {
            bin_width,
            counts: Vec::new(),
        })
    }

    pub fn bin_width(&self) -> u64 {
        self.bin_width
    }

    pub fn bin_of(&self, value: u64) -> usize {
        (value / self.bin_width) as usize
    }

    #[inline]
    pub fn record(&mut self, value: u64) {
        let bin = self.bin_of(value);
        if bin >= self.counts.len() {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
    }

    pub fn count(&self, bin: usize) -> u64 {
        self.counts.get(bin).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Non-empty bins as `(index, count)`, in increasing order.
    pub fn nonzero_bins(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (b, c))
    }

    /// Index of the most populated bin; ties go to the lowest index.
    pub fn mode(&self) -> Option<usize> {
        let mut best: Option<(usize, u64)> = None;
        for (b, c) in self.nonzero_bins() {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((b, c));
            }
        }
        best.map(|(b, _)| b)
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<(), StatsError> {
        if self.bin_width != other.bin_width {
            return Err(StatsError::BinWidthMismatch(
                self.bin_width,
                other.bin_width,
            ));
        }
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            *mine += theirs;
        }
        Ok(())
    }

    pub fn report(&self) -> HistogramReport {
        let total = self.total();
        let bins = self
            .nonzero_bins()
            .map(|(b, count)| {
                let bin_start = b as u64 * self.bin_width;
                BinRow {
                    bin_start,
                    bin_end: bin_start + self.bin_width,
                    count,
                    probability: ratio(count, total),
                }
            })
            .collect();
        HistogramReport {
            bin_width: self.bin_width,
            total,
            bins,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin_start: u64,
    pub bin_end: u64,
    pub count: u64,
    pub probability: f64,
}

/// Non-empty bins of a histogram with their probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub bin_width: u64,
    pub total: u64,
    pub bins: Vec<BinRow>,
}

impl HistogramReport {
    /// Probability mass of all bins starting at or above `value`.
    pub fn mass_from(&self, value: u64) -> f64 {
        self.bins
            .iter()
            .filter(|row| row.bin_start >= value)
            .map(|row| row.probability)
            .sum()
    }
}

fn ratio(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Running statistics for one `(players, decks)` cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigAccumulator {
    pub config: GameConfig,
    pub games: u64,
    pub aborted: u64,
    /// Over completed games only.
    pub min_turns: Option<u64>,
    pub max_turns: Option<u64>,
    pub total_turns_sum: u128,
    pub turn_hist: Histogram,
    pub hand_size_hist: Histogram,
    pub hand_wins: Vec<u64>,
    pub game_wins: Vec<u64>,
    pub total_hands: u64,
}

impl ConfigAccumulator {
    pub fn new(config: GameConfig) -> Self {
        Self::with_bin_widths(config, DEFAULT_TURN_BIN_WIDTH, DEFAULT_HAND_BIN_WIDTH)
            .expect("default bin widths are positive")
    }

    pub fn with_bin_widths(
        config: GameConfig,
        turn_bin_width: u64,
        hand_bin_width: u64,
    ) -> Result<Self, StatsError> {
        Ok(ConfigAccumulator {
            config,
            games: 0,
            aborted: 0,
            min_turns: None,
            max_turns: None,
            total_turns_sum: 0,
            turn_hist: Histogram::new(turn_bin_width)?,
            hand_size_hist: Histogram::new(hand_bin_width)?,
            hand_wins: vec![0; config.players],
            game_wins: vec![0; config.players],
            total_hands: 0,
        })
    }

    /// An empty accumulator with the same configuration and bin widths.
    pub fn empty_like(&self) -> Self {
        Self::with_bin_widths(
            self.config,
            self.turn_hist.bin_width(),
            self.hand_size_hist.bin_width(),
        )
        .expect("widths already validated")
    }

    pub fn completed_games(&self) -> u64 {
        self.games - self.aborted
    }

    pub fn record(&mut self, result: &GameResult) -> Result<(), StatsError> {
        if result.config != self.config {
            return Err(StatsError::ConfigMismatch {
                expected: self.config,
                found: result.config,
            });
        }
        let players = self.config.players;
        if result.hand_wins.len() != players {
            return Err(StatsError::MalformedResult(format!(
                "{} hand-win counters for {players} players",
                result.hand_wins.len()
            )));
        }
        let hands: u64 = result.hand_wins.iter().sum();
        if hands != result.hand_sizes.len() as u64 {
            return Err(StatsError::MalformedResult(format!(
                "{hands} hand wins but {} hand sizes",
                result.hand_sizes.len()
            )));
        }

        self.games += 1;
        let winner = match (result.terminated, result.winner) {
            (true, Some(w)) if w < players => w,
            (false, _) => {
                self.aborted += 1;
                return Ok(());
            }
            (true, w) => {
                self.games -= 1;
                return Err(StatsError::MalformedResult(format!("bad winner {w:?}")));
            }
        };

        let turns = result.total_turns;
        self.min_turns = Some(self.min_turns.map_or(turns, |m| m.min(turns)));
        self.max_turns = Some(self.max_turns.map_or(turns, |m| m.max(turns)));
        self.total_turns_sum += u128::from(turns);
        self.turn_hist.record(turns);
        for &size in &result.hand_sizes {
            self.hand_size_hist.record(u64::from(size));
        }
        for (acc, &w) in self.hand_wins.iter_mut().zip(&result.hand_wins) {
            *acc += w;
        }
        self.total_hands += hands;
        self.game_wins[winner] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfigAccumulator) -> Result<(), StatsError> {
        if other.config != self.config {
            return Err(StatsError::ConfigMismatch {
                expected: self.config,
                found: other.config,
            });
        }
        // Check both widths before mutating anything.
        if self.turn_hist.bin_width() != other.turn_hist.bin_width() {
            return Err(StatsError::BinWidthMismatch(
                self.turn_hist.bin_width(),
                other.turn_hist.bin_width(),
            ));
        }
        if self.hand_size_hist.bin_width() != other.hand_size_hist.bin_width() {
            return Err(StatsError::BinWidthMismatch(
                self.hand_size_hist.bin_width(),
                other.hand_size_hist.bin_width(),
            ));
        }
        self.turn_hist.merge(&other.turn_hist)?;
        self.hand_size_hist.merge(&other.hand_size_hist)?;
        self.games += other.games;
        self.aborted += other.aborted;
        self.min_turns = match (self.min_turns, other.min_turns) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max_turns = self.max_turns.max(other.max_turns);
        self.total_turns_sum += other.total_turns_sum;
        for (a, b) in self.hand_wins.iter_mut().zip(&other.hand_wins) {
            *a += b;
        }
        for (a, b) in self.game_wins.iter_mut().zip(&other.game_wins) {
            *a += b;
        }
        self.total_hands += other.total_hands;
        Ok(())
    }

    pub fn merged(mut self, other: &ConfigAccumulator) -> Result<Self, StatsError> {
        self.merge(other)?;
        Ok(self)
    }

    pub fn finalize(&self) -> Result<ConfigReport, StatsError> {
        if self.games == 0 {
            return Err(StatsError::Empty);
        }
        let completed = self.completed_games();
        let pdf = |counts: &[u64], total: u64| -> Vec<f64> {
            counts.iter().map(|&c| ratio(c, total)).collect()
        };
        Ok(ConfigReport {
            config: self.config,
            games: self.games,
            completed_games: completed,
            aborted: self.aborted,
            min_turns: self.min_turns,
            max_turns: self.max_turns,
            mean_turns: (completed > 0).then(|| self.total_turns_sum as f64 / completed as f64),
            total_turns_sum: self.total_turns_sum,
            total_hands: self.total_hands,
            hand_win_pdf: pdf(&self.hand_wins, self.total_hands),
            hand_wins: self.hand_wins.clone(),
            game_win_pdf: pdf(&self.game_wins, completed),
            game_wins: self.game_wins.clone(),
            turns: self.turn_hist.report(),
            hand_sizes: self.hand_size_hist.report(),
        })
    }
}

/// Finalized statistics for one cell. Exact counts are kept next to every
/// derived probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub config: GameConfig,
    pub games: u64,
    pub completed_games: u64,
    pub aborted: u64,
    pub min_turns: Option<u64>,
    pub max_turns: Option<u64>,
    /// `total_turns_sum / completed_games`.
    pub mean_turns: Option<f64>,
    pub total_turns_sum: u128,
    pub total_hands: u64,
    pub hand_wins: Vec<u64>,
    /// Hands won per player over all hands pooled across games.
    pub hand_win_pdf: Vec<f64>,
    pub game_wins: Vec<u64>,
    pub game_win_pdf: Vec<f64>,
    pub turns: HistogramReport,
    pub hand_sizes: HistogramReport,
}

impl ConfigReport {
    pub fn spread(pdf: &[f64]) -> f64 {
        let max = pdf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = pdf.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}
