//! Rules of Bhikar-Sawkar as a step-at-a-time state machine.
//!
//! Cards are reduced to their rank since suits never affect play. Each call to
//! [`GameState::step`] plays exactly one card and reports what happened through
//! an [`EventSink`]. Given the same starting decks and the same random stream
//! the event sequence is fully determined.
//!
//! Elimination happens at rotation time: a player whose deck is empty is only
//! removed when the turn passes to them. A game with no matches therefore
//! plays every card in the shoe before it ends.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::randomness::{shuffle, RandomStream};

pub const CARDS_PER_DECK: usize = 52;
pub const DEFAULT_TURN_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rank {0} is outside 0..=12")]
    InvalidRank(u8),
    #[error("game is not running (status: {0:?})")]
    NotRunning(GameStatus),
}

/// Face value of a card, `0` (ace) through `12` (king).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Rank(u8);

impl Rank {
    pub const COUNT: u8 = 13;

    pub fn new(value: u8) -> Result<Self, EngineError> {
        if value < Self::COUNT {
            Ok(Rank(value))
        } else {
            Err(EngineError::InvalidRank(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        const LABELS: [&str; 13] = [
            "A", "2", "3", "4", "5", "6", "7", "8", "9", "10", "J", "Q", "K",
        ];
        LABELS[self.0 as usize]
    }
}

impl TryFrom<u8> for Rank {
    type Error = EngineError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Rank::new(value)
    }
}

impl From<Rank> for u8 {
    fn from(rank: Rank) -> u8 {
        rank.0
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One cell of the experiment grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameConfig {
    pub players: usize,
    pub decks: usize,
    pub turn_cap: u64,
}

impl GameConfig {
    pub fn new(players: usize, decks: usize) -> Result<Self, EngineError> {
        Self::with_turn_cap(players, decks, DEFAULT_TURN_CAP)
    }

    pub fn with_turn_cap(players: usize, decks: usize, turn_cap: u64) -> Result<Self, EngineError> {
        let config = GameConfig {
            players,
            decks,
            turn_cap,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.players < 2 {
            return Err(EngineError::InvalidConfig(format!(
                "need at least 2 players, got {}",
                self.players
            )));
        }
        if self.decks < 1 {
            return Err(EngineError::InvalidConfig("need at least 1 deck".into()));
        }
        if self.turn_cap == 0 {
            return Err(EngineError::InvalidConfig(
                "turn cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn total_cards(&self) -> usize {
        CARDS_PER_DECK * self.decks
    }
}

/// All ranks of `decks` standard decks in canonical order.
pub fn build_shoe(decks: usize) -> Result<Vec<Rank>, EngineError> {
    if decks == 0 {
        return Err(EngineError::InvalidConfig("need at least 1 deck".into()));
    }
    let per_rank = 4 * decks;
    Ok((0..Rank::COUNT)
        .flat_map(|r| std::iter::repeat_n(Rank(r), per_rank))
        .collect())
}

/// A player's private face-down deck. The front is the top.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlayerDeck {
    cards: VecDeque<Rank>,
}

impl PlayerDeck {
    pub fn new(cards: impl IntoIterator<Item = Rank>) -> Self {
        PlayerDeck {
            cards: cards.into_iter().collect(),
        }
    }

    pub fn draw(&mut self) -> Option<Rank> {
        self.cards.pop_front()
    }

    /// Puts `cards` under the deck, preserving their order.
    pub fn append_bottom(&mut self, cards: impl IntoIterator<Item = Rank>) {
        self.cards.extend(cards);
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Rank> + '_ {
        self.cards.iter().copied()
    }
}

/// Round-robin deal starting with player 0. Player `p` receives shoe
/// positions `p, p + n, p + 2n, ...`, the first of which ends up on top.
pub fn deal(shoe: &[Rank], players: usize) -> Vec<PlayerDeck> {
    let mut decks = vec![PlayerDeck::default(); players];
    for (i, &card) in shoe.iter().enumerate() {
        decks[i % players].cards.push_back(card);
    }
    decks
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameStatus {
    Running,
    Finished { winner: usize },
    Aborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TurnEvent {
    CardPlayed {
        player: usize,
        rank: Rank,
        turn: u64,
    },
    HandWon {
        player: usize,
        pile_size: usize,
        turn: u64,
    },
    PlayerEliminated {
        player: usize,
        turn: u64,
    },
    GameEnded {
        winner: usize,
        total_turns: u64,
    },
}

impl fmt::Display for TurnEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TurnEvent::CardPlayed { player, rank, turn } => {
                write!(f, "turn {turn}: player {player} plays {rank}")
            }
            TurnEvent::HandWon {
                player,
                pile_size,
                turn,
            } => write!(
                f,
                "turn {turn}: player {player} wins a hand of {pile_size} cards"
            ),
            TurnEvent::PlayerEliminated { player, turn } => {
                write!(f, "turn {turn}: player {player} is eliminated")
            }
            TurnEvent::GameEnded {
                winner,
                total_turns,
            } => write!(
                f,
                "game over: player {winner} wins after {total_turns} turns"
            ),
        }
    }
}

/// Receives engine events as they happen.
pub trait EventSink {
    fn event(&mut self, event: &TurnEvent);
}

/// Discards all events.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoEvents;

impl EventSink for NoEvents {
    #[inline(always)]
    fn event(&mut self, _: &TurnEvent) {}
}

impl EventSink for Vec<TurnEvent> {
    fn event(&mut self, event: &TurnEvent) {
        self.push(*event);
    }
}

impl<F: FnMut(&TurnEvent)> EventSink for F {
    fn event(&mut self, event: &TurnEvent) {
        self(event)
    }
}

#[derive(Clone, Debug)]
pub struct GameState {
    config: GameConfig,
    decks: Vec<PlayerDeck>,
    pile: Vec<Rank>,
    current: usize,
    eliminated: Vec<bool>,
    turns: u64,
    status: GameStatus,
    total_cards: usize,
}

impl GameState {
    /// Deals an already shuffled shoe and seats player 0 to start.
    pub fn deal(config: GameConfig, shoe: &[Rank]) -> Result<Self, EngineError> {
        config.validate()?;
        Self::from_decks(config, deal(shoe, config.players))
    }

    /// Starts a game from explicit decks. The shoe size is whatever the decks
    /// add up to, which lets tests play reduced games.
    pub fn from_decks(config: GameConfig, decks: Vec<PlayerDeck>) -> Result<Self, EngineError> {
        config.validate()?;
        if decks.len() != config.players {
            return Err(EngineError::InvalidConfig(format!(
                "{} decks given for {} players",
                decks.len(),
                config.players
            )));
        }
        if decks[0].is_empty() {
            return Err(EngineError::InvalidConfig(
                "the starting player has no cards".into(),
            ));
        }
        let total_cards = decks.iter().map(PlayerDeck::len).sum();
        Ok(GameState {
            config,
            eliminated: vec![false; decks.len()],
            pile: Vec::with_capacity(total_cards),
            decks,
            current: 0,
            turns: 0,
            status: GameStatus::Running,
            total_cards,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn decks(&self) -> &[PlayerDeck] {
        &self.decks
    }

    /// The central pile, most recent card last.
    pub fn pile(&self) -> &[Rank] {
        &self.pile
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn eliminated(&self) -> &[bool] {
        &self.eliminated
    }

    pub fn turns(&self) -> u64 {
        self.turns
    }

    pub fn status(&self) -> GameStatus {
        self.status
    }

    pub fn total_cards(&self) -> usize {
        self.total_cards
    }

    /// Cards currently held in decks and on the pile.
    pub fn cards_in_play(&self) -> usize {
        self.decks.iter().map(PlayerDeck::len).sum::<usize>() + self.pile.len()
    }

    /// Plays one card.
    ///
    /// A match collects and shuffles the pile into the bottom of the player's
    /// deck and the same player goes again. Otherwise the turn moves clockwise,
    /// eliminating every player it reaches with an empty deck. Requesting a
    /// step once `turn_cap` turns have been played aborts the game instead.
    pub fn step<S: EventSink>(
        &mut self,
        rng: &mut RandomStream,
        sink: &mut S,
    ) -> Result<(), EngineError> {
        if self.status != GameStatus::Running {
            return Err(EngineError::NotRunning(self.status));
        }
        if self.turns >= self.config.turn_cap {
            self.status = GameStatus::Aborted;
            return Ok(());
        }

        let player = self.current;
        let rank = self.decks[player]
            .draw()
            .expect("the current player always holds a card");
        self.turns += 1;
        let matched = self.pile.last() == Some(&rank);
        self.pile.push(rank);
        sink.event(&TurnEvent::CardPlayed {
            player,
            rank,
            turn: self.turns,
        });

        if matched {
            shuffle(&mut self.pile, rng);
            let pile_size = self.pile.len();
            self.decks[player].append_bottom(self.pile.drain(..));
            sink.event(&TurnEvent::HandWon {
                player,
                pile_size,
                turn: self.turns,
            });
        } else {
            self.pass_turn(sink);
        }
        Ok(())
    }

    fn pass_turn<S: EventSink>(&mut self, sink: &mut S) {
        let players = self.decks.len();
        let mut next = (self.current + 1) % players;
        while next != self.current {
            if !self.eliminated[next] {
                if !self.decks[next].is_empty() {
                    self.current = next;
                    return;
                }
                self.eliminated[next] = true;
                sink.event(&TurnEvent::PlayerEliminated {
                    player: next,
                    turn: self.turns,
                });
            }
            next = (next + 1) % players;
        }
        // Rotation came back around: everyone else is out. The survivor wins
        // even if their own deck is empty too.
        self.status = GameStatus::Finished {
            winner: self.current,
        };
        sink.event(&TurnEvent::GameEnded {
            winner: self.current,
            total_turns: self.turns,
        });
    }
}

/// Observables of one finished (or aborted) game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameResult {
    pub config: GameConfig,
    pub total_turns: u64,
    /// `None` only when the game was aborted.
    pub winner: Option<usize>,
    pub hand_wins: Vec<u64>,
    /// Size of every hand won, in order.
    pub hand_sizes: Vec<u32>,
    pub terminated: bool,
}

struct Recorder<'a, S> {
    hand_wins: Vec<u64>,
    hand_sizes: Vec<u32>,
    inner: &'a mut S,
}

impl<S: EventSink> EventSink for Recorder<'_, S> {
    #[inline]
    fn event(&mut self, event: &TurnEvent) {
        if let TurnEvent::HandWon {
            player, pile_size, ..
        } = *event
        {
            self.hand_wins[player] += 1;
            self.hand_sizes.push(pile_size as u32);
        }
        self.inner.event(event);
    }
}

/// Builds and shuffles a shoe, deals it, and plays to the end.
pub fn run_game<S: EventSink>(
    config: &GameConfig,
    rng: &mut RandomStream,
    observer: &mut S,
) -> Result<GameResult, EngineError> {
    config.validate()?;
    let mut shoe = build_shoe(config.decks)?;
    shuffle(&mut shoe, rng);
    run_game_with_shoe(config, shoe, rng, observer)
}

/// Plays a game from a shoe whose order is already fixed. `rng` is only used
/// for pile shuffles.
pub fn run_game_with_shoe<S: EventSink>(
    config: &GameConfig,
    shoe: Vec<Rank>,
    rng: &mut RandomStream,
    observer: &mut S,
) -> Result<GameResult, EngineError> {
    let state = GameState::deal(*config, &shoe)?;
    run_to_end(state, rng, observer)
}

/// Steps `state` until it finishes or aborts.
pub fn run_to_end<S: EventSink>(
    mut state: GameState,
    rng: &mut RandomStream,
    observer: &mut S,
) -> Result<GameResult, EngineError> {
    let mut recorder = Recorder {
        hand_wins: vec![0; state.config.players],
        hand_sizes: Vec::new(),
        inner: observer,
    };
    while state.status == GameStatus::Running {
        state.step(rng, &mut recorder)?;
    }
    let winner = match state.status {
        GameStatus::Finished { winner } => Some(winner),
        _ => None,
    };
    Ok(GameResult {
        config: state.config,
        total_turns: state.turns,
        winner,
        hand_wins: recorder.hand_wins,
        hand_sizes: recorder.hand_sizes,
        terminated: winner.is_some(),
    })
}
