//! The game engine.
//!
//! A deck holds `m` copies of each of the labels `1..=n`. Each round the
//! guesser names a label, the top card is drawn and discarded, and the
//! guesser learns whether the guess was right. Under complete feedback the
//! drawn card is also revealed.
//!
//! Strategies never see a [`DeckState`]. The engine hands them a
//! [`VisibleHistory`], which only contains their own guesses, the feedback
//! bits and (in complete mode) the revealed labels.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::strategy::Strategy;

/// A card label, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(u32);

impl Label {
    /// Returns `None` for `0`.
    pub fn new(k: u32) -> Option<Self> {
        (k >= 1).then_some(Label(k))
    }

    /// Label whose 0-based index is `i`.
    pub fn from_index(i: usize) -> Self {
        Label(i as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// 0-based position, for indexing per-label tables.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Only the correct/incorrect bit is revealed.
    #[default]
    Partial,
    /// The drawn card is revealed after every round.
    Complete,
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackMode::Partial => "partial",
            FeedbackMode::Complete => "complete",
        })
    }
}

/// Parameters of one game instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameConfig {
    /// Copies of each label.
    pub m: u32,
    /// Number of distinct labels.
    pub n: u32,
    pub feedback: FeedbackMode,
    pub seed: u64,
}

impl GameConfig {
    /// Partial-feedback game with seed 0.
    pub fn new(m: u32, n: u32) -> Result<Self> {
        let config = GameConfig { m, n, feedback: FeedbackMode::Partial, seed: 0 };
        config.validate()?;
        Ok(config)
    }

    pub fn with_feedback(mut self, feedback: FeedbackMode) -> Self {
        self.feedback = feedback;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig(format!(
                "m and n must be positive (m={}, n={})",
                self.m, self.n
            )));
        }
        if self.n > u16::MAX as u32 || (self.m as u64) * (self.n as u64) > u32::MAX as u64 {
            return Err(Error::InvalidConfig(format!("deck too large (m={}, n={})", self.m, self.n)));
        }
        Ok(())
    }

    /// Total number of cards, `m * n`, which is also the number of rounds.
    pub fn rounds(&self) -> usize {
        self.m as usize * self.n as usize
    }

    pub fn check_label(&self, label: Label) -> Result<()> {
        if label.get() > self.n {
            Err(Error::InvalidLabel { label: label.get(), n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        (1..=self.n).map(Label)
    }
}

/// What the guesser learns after one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feedback {
    pub guess: Label,
    pub correct: bool,
    /// Present only under complete feedback.
    pub revealed: Option<Label>,
}

/// The dealer's deck.
#[derive(Debug, Clone)]
pub struct DeckState {
    order: Vec<Label>,
    cursor: usize,
    mode: FeedbackMode,
    n: u32,
}

impl DeckState {
    /// A deck in a given order. Every label must appear exactly `m` times.
    pub fn from_order(config: &GameConfig, order: Vec<Label>) -> Result<Self> {
        config.validate()?;
        if order.len() != config.rounds() {
            return Err(Error::InvalidConfig(format!(
                "deck has {} cards, expected {}",
                order.len(),
                config.rounds()
            )));
        }
        let mut counts = vec![0u32; config.n as usize];
        for &card in &order {
            config.check_label(card)?;
            counts[card.index()] += 1;
        }
        if counts.iter().any(|&c| c != config.m) {
            return Err(Error::InvalidConfig("deck is not m copies of each label".into()));
        }
        Ok(DeckState { order, cursor: 0, mode: config.feedback, n: config.n })
    }

    pub fn order(&self) -> &[Label] {
        &self.order
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor == self.order.len()
    }

    /// Cards already drawn, in draw order.
    pub fn drawn(&self) -> &[Label] {
        &self.order[..self.cursor]
    }

    /// Cards still in the deck, top first.
    pub fn remaining(&self) -> &[Label] {
        &self.order[self.cursor..]
    }
}

/// A uniformly random arrangement of the `m`-of-each multiset.
pub fn new_deck<R: Rng + ?Sized>(config: &GameConfig, rng: &mut R) -> DeckState {
    let mut order = Vec::with_capacity(config.rounds());
    for label in config.labels() {
        order.extend(std::iter::repeat_n(label, config.m as usize));
    }
    order.shuffle(rng);
    DeckState { order, cursor: 0, mode: config.feedback, n: config.n }
}

/// Draws the top card and scores `guess` against it.
pub fn play_round(deck: &mut DeckState, guess: Label) -> Result<Feedback> {
    if guess.get() > deck.n {
        return Err(Error::InvalidLabel { label: guess.get(), n: deck.n });
    }
    let card = *deck
        .order
        .get(deck.cursor)
        .ok_or(Error::DeckExhausted { rounds: deck.order.len() })?;
    deck.cursor += 1;
    Ok(Feedback {
        guess,
        correct: card == guess,
        revealed: match deck.mode {
            FeedbackMode::Complete => Some(card),
            FeedbackMode::Partial => None,
        },
    })
}

/// Per-label guess counts `a(k, t)` and hit counts `b(k, t)` over rounds `1..t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyTable {
    a: Vec<u32>,
    b: Vec<u32>,
    /// The round these counts precede (1-based), so `t - 1` rounds are counted.
    t: usize,
    hits: u32,
}

impl TallyTable {
    pub fn new(n: u32) -> Self {
        TallyTable { a: vec![0; n as usize], b: vec![0; n as usize], t: 1, hits: 0 }
    }

    pub fn record(&mut self, guess: Label, correct: bool) {
        self.a[guess.index()] += 1;
        if correct {
            self.b[guess.index()] += 1;
            self.hits += 1;
        }
        self.t += 1;
    }

    pub fn a(&self, k: Label) -> u32 {
        self.a[k.index()]
    }

    pub fn b(&self, k: Label) -> u32 {
        self.b[k.index()]
    }

    pub fn guesses(&self) -> &[u32] {
        &self.a
    }

    pub fn correct(&self) -> &[u32] {
        &self.b
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of correct guesses so far.
    pub fn hits(&self) -> u32 {
        self.hits
    }

    pub fn n(&self) -> u32 {
        self.a.len() as u32
    }

    /// Checks the bookkeeping identities: the guess counts sum to `t - 1`,
    /// the hit counts sum to the number of hits, and `b <= min(a, m)`.
    pub fn check_invariants(&self, m: u32) -> bool {
        let sum_a: u64 = self.a.iter().map(|&x| x as u64).sum();
        let sum_b: u64 = self.b.iter().map(|&x| x as u64).sum();
        sum_a == (self.t - 1) as u64
            && sum_b == self.hits as u64
            && self.a.iter().zip(&self.b).all(|(&a, &b)| b <= a && b <= m)
    }
}

/// Everything a strategy is allowed to see.
#[derive(Debug, Clone)]
pub struct VisibleHistory {
    m: u32,
    n: u32,
    mode: FeedbackMode,
    guesses: Vec<Label>,
    hits: Vec<bool>,
    revealed: Vec<Label>,
    tallies: TallyTable,
}

impl VisibleHistory {
    pub fn new(config: &GameConfig) -> Self {
        VisibleHistory {
            m: config.m,
            n: config.n,
            mode: config.feedback,
            guesses: Vec::new(),
            hits: Vec::new(),
            revealed: Vec::new(),
            tallies: TallyTable::new(config.n),
        }
    }

    /// Rebuilds a partial-feedback history from guess and hit sequences.
    pub fn from_partial(config: &GameConfig, guesses: &[Label], hits: &[bool]) -> Result<Self> {
        let mut history = VisibleHistory::new(&config.with_feedback(FeedbackMode::Partial));
        for (&guess, &correct) in guesses.iter().zip(hits) {
            config.check_label(guess)?;
            history.push(&Feedback { guess, correct, revealed: None });
        }
        Ok(history)
    }

    pub fn push(&mut self, feedback: &Feedback) {
        self.guesses.push(feedback.guess);
        self.hits.push(feedback.correct);
        if let Some(card) = feedback.revealed {
            self.revealed.push(card);
        }
        self.tallies.record(feedback.guess, feedback.correct);
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn rounds(&self) -> usize {
        self.m as usize * self.n as usize
    }

    /// Rounds played so far.
    pub fn len(&self) -> usize {
        self.guesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.guesses.is_empty()
    }

    pub fn guesses(&self) -> &[Label] {
        &self.guesses
    }

    pub fn hits(&self) -> &[bool] {
        &self.hits
    }

    /// Revealed cards; empty under partial feedback.
    pub fn revealed(&self) -> &[Label] {
        &self.revealed
    }

    pub fn tallies(&self) -> &TallyTable {
        &self.tallies
    }
}

/// The record of a game: guesses `g` and outcomes `y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "TranscriptJson", try_from = "TranscriptJson")]
pub struct Transcript {
    pub config: GameConfig,
    pub g: Vec<Label>,
    pub y: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct TranscriptJson {
    m: u32,
    n: u32,
    feedback: FeedbackMode,
    seed: u64,
    g: Vec<u32>,
    y: Vec<u8>,
}

impl From<Transcript> for TranscriptJson {
    fn from(tr: Transcript) -> Self {
        TranscriptJson {
            m: tr.config.m,
            n: tr.config.n,
            feedback: tr.config.feedback,
            seed: tr.config.seed,
            g: tr.g.iter().map(|l| l.get()).collect(),
            y: tr.y.iter().map(|&b| b as u8).collect(),
        }
    }
}

impl TryFrom<TranscriptJson> for Transcript {
    type Error = Error;

    fn try_from(raw: TranscriptJson) -> Result<Self> {
        let config = GameConfig { m: raw.m, n: raw.n, feedback: raw.feedback, seed: raw.seed };
        config.validate()?;
        if raw.g.len() != raw.y.len() || raw.g.len() > config.rounds() {
            return Err(Error::InvalidConfig("g and y lengths disagree or exceed m*n".into()));
        }
        let g = raw
            .g
            .iter()
            .map(|&k| {
                let label = Label::new(k).ok_or(Error::InvalidLabel { label: k, n: config.n })?;
                config.check_label(label).map(|_| label)
            })
            .collect::<Result<Vec<_>>>()?;
        let y = raw
            .y
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::InvalidConfig(format!("y entries must be 0 or 1, got {v}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Transcript { config, g, y })
    }
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.g.len() == self.config.rounds()
    }
}

/// Total number of correct guesses of a finished game.
pub fn payoff(tr: &Transcript) -> Result<u32> {
    if !tr.is_complete() {
        return Err(Error::IncompleteTranscript { played: tr.len(), rounds: tr.config.rounds() });
    }
    Ok(tr.y.iter().filter(|&&y| y).count() as u32)
}

/// Tallies over the first `t - 1` rounds. Valid for `1 <= t <= len + 1`.
pub fn tallies_at(tr: &Transcript, t: usize) -> Result<TallyTable> {
    if t == 0 || t > tr.len() + 1 {
        return Err(Error::IndexOutOfRange { t, max: tr.len() + 1 });
    }
    let mut table = TallyTable::new(tr.config.n);
    for (&g, &y) in tr.g.iter().zip(&tr.y).take(t - 1) {
        table.record(g, y);
    }
    Ok(table)
}

/// Plays a full game against a deck shuffled from `config.seed`.
pub fn play_game(config: &GameConfig, strategy: &mut dyn Strategy) -> Result<Transcript> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, Stream::Deck);
    let deck = new_deck(config, &mut rng);
    play_game_with_deck(config, deck, strategy)
}

/// Plays a full game against a given deck.
pub fn play_game_with_deck(
    config: &GameConfig,
    mut deck: DeckState,
    strategy: &mut dyn Strategy,
) -> Result<Transcript> {
    let mut history = VisibleHistory::new(config);
    for _ in 0..config.rounds() {
        let guess = strategy.next_guess(&history)?;
        let feedback = play_round(&mut deck, guess)?;
        history.push(&feedback);
        strategy.observe(&feedback);
    }
    Ok(Transcript { config: *config, g: history.guesses, y: history.hits })
}
