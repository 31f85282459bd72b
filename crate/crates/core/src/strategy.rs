//! Guessing strategies.
//!
//! A strategy is asked for a guess with the [`VisibleHistory`] of the game
//! so far and is told the outcome of every round through
//! [`Strategy::observe`]. It never sees the deck.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Feedback, FeedbackMode, GameConfig, Label, VisibleHistory};
use crate::oracle::PosteriorOracle;
use crate::rng::{self, GameRng, Stream};

pub trait Strategy: Send {
    fn name(&self) -> String;

    /// The guess for the next round.
    fn next_guess(&mut self, history: &VisibleHistory) -> Result<Label>;

    /// Called after every round with what the guesser was told.
    fn observe(&mut self, _feedback: &Feedback) {}

    /// Whether the guess is a function of the visible history alone.
    fn is_deterministic(&self) -> bool {
        true
    }

    fn box_clone(&self) -> Box<dyn Strategy>;
}

impl Clone for Box<dyn Strategy> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Always guesses the same label. Scores exactly `m`.
#[derive(Debug, Clone)]
pub struct FixedLabel {
    label: Label,
}

impl FixedLabel {
    pub fn new(label: Label) -> Self {
        FixedLabel { label }
    }
}

impl Strategy for FixedLabel {
    fn name(&self) -> String {
        format!("fixed:{}", self.label)
    }

    fn next_guess(&mut self, _history: &VisibleHistory) -> Result<Label> {
        Ok(self.label)
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Guesses the smallest label that has not yet been guessed correctly `m`
/// times.
#[derive(Debug, Clone)]
pub struct StickyAdvance {
    m: u32,
    correct: Vec<u32>,
    current: usize,
}

impl StickyAdvance {
    pub fn new(config: &GameConfig) -> Self {
        StickyAdvance { m: config.m, correct: vec![0; config.n as usize], current: 0 }
    }
}

impl Strategy for StickyAdvance {
    fn name(&self) -> String {
        "sticky".into()
    }

    fn next_guess(&mut self, _history: &VisibleHistory) -> Result<Label> {
        if self.current < self.correct.len() {
            Ok(Label::from_index(self.current))
        } else {
            Ok(Label::from_index(self.correct.len() - 1))
        }
    }

    fn observe(&mut self, feedback: &Feedback) {
        if feedback.correct {
            self.correct[feedback.guess.index()] += 1;
        }
        while self.current < self.correct.len() && self.correct[self.current] >= self.m {
            self.current += 1;
        }
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Guesses uniformly at random from its own substream.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    n: u32,
    rng: GameRng,
}

impl UniformRandom {
    pub fn new(config: &GameConfig) -> Self {
        UniformRandom { n: config.n, rng: rng::stream(config.seed, Stream::Strategy) }
    }
}

impl Strategy for UniformRandom {
    fn name(&self) -> String {
        "random".into()
    }

    fn next_guess(&mut self, _history: &VisibleHistory) -> Result<Label> {
        Ok(Label::from_index(self.rng.random_range(0..self.n as usize)))
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Maximizes the upper bound `(m - b_k) / (mn - a_k - hits)` on the chance
/// that the next card is `k`.
///
/// Only labels whose denominator is positive compete. Within a fixed `b`
/// the score grows with `a`, so one ordered set per `b` value suffices to
/// find the maximizer. Labels that were never guessed are tracked by a
/// pointer instead of being stored.
#[derive(Debug, Clone)]
pub struct GreedyBound {
    m: u32,
    rounds: i64,
    hits: i64,
    a: Vec<u32>,
    b: Vec<u32>,
    // groups[b] holds the guessed labels with that many hits and b < m.
    groups: Vec<BTreeSet<(Reverse<u32>, u32)>>,
    next_fresh: usize,
}

impl GreedyBound {
    pub fn new(config: &GameConfig) -> Self {
        GreedyBound {
            m: config.m,
            rounds: config.rounds() as i64,
            hits: 0,
            a: vec![0; config.n as usize],
            b: vec![0; config.n as usize],
            groups: vec![BTreeSet::new(); config.m as usize],
            next_fresh: 0,
        }
    }

    fn fallback(&self) -> Label {
        self.b
            .iter()
            .position(|&b| b < self.m)
            .map(Label::from_index)
            .unwrap_or(Label::from_index(0))
    }
}

impl Strategy for GreedyBound {
    fn name(&self) -> String {
        "greedy-bound".into()
    }

    fn next_guess(&mut self, _history: &VisibleHistory) -> Result<Label> {
        let denom = self.rounds - self.hits;
        // (numerator, denominator, label index)
        let mut best: Option<(i64, i64, usize)> = None;
        let mut consider = |num: i64, den: i64, idx: usize| {
            let better = match best {
                None => true,
                Some((bn, bd, bi)) => {
                    let lhs = num as i128 * bd as i128;
                    let rhs = bn as i128 * den as i128;
                    lhs > rhs || (lhs == rhs && idx < bi)
                }
            };
            if better {
                best = Some((num, den, idx));
            }
        };
        for (hits, group) in self.groups.iter().enumerate() {
            let num = (self.m as usize - hits) as i64;
            let top = group.iter().find(|(Reverse(a), _)| denom - (*a as i64) > 0);
            match top {
                Some(&(Reverse(a), idx)) => consider(num, denom - a as i64, idx as usize),
                None if hits == 0 && self.next_fresh < self.a.len() => {
                    consider(num, denom, self.next_fresh)
                }
                None => {}
            }
        }
        Ok(best.map(|(_, _, idx)| Label::from_index(idx)).unwrap_or_else(|| self.fallback()))
    }

    fn observe(&mut self, feedback: &Feedback) {
        let k = feedback.guess.index();
        let (old_a, old_b) = (self.a[k], self.b[k]);
        if old_a > 0 && old_b < self.m {
            self.groups[old_b as usize].remove(&(Reverse(old_a), k as u32));
        }
        self.a[k] += 1;
        if feedback.correct {
            self.b[k] += 1;
            self.hits += 1;
        }
        if self.b[k] < self.m {
            self.groups[self.b[k] as usize].insert((Reverse(self.a[k]), k as u32));
        }
        while self.next_fresh < self.a.len() && self.a[self.next_fresh] > 0 {
            self.next_fresh += 1;
        }
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Guesses the label most likely to be next given the visible history,
/// using the exact posterior.
#[derive(Debug, Clone)]
pub struct ExactGreedy {
    oracle: Arc<PosteriorOracle>,
}

impl ExactGreedy {
    pub fn new(oracle: Arc<PosteriorOracle>) -> Self {
        ExactGreedy { oracle }
    }
}

impl Strategy for ExactGreedy {
    fn name(&self) -> String {
        "exact-greedy".into()
    }

    fn next_guess(&mut self, history: &VisibleHistory) -> Result<Label> {
        let counts = self.oracle.next_card_counts(history.tallies())?;
        // max_by_key keeps the last maximum; reverse so ties go to the smallest label
        let idx = counts
            .by_label
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|&(_, &c)| c)
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(Label::from_index(idx))
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Complete feedback only: guesses a label with the most copies left,
/// breaking ties towards the smallest label.
#[derive(Debug, Clone)]
pub struct GreedyRemaining {
    remaining: Vec<u32>,
    /// `buckets[r]` is a bitset of the labels with `r` copies left.
    buckets: Vec<Vec<u64>>,
    sizes: Vec<usize>,
    top: usize,
    /// No set bit in `buckets[top]` precedes this word.
    first_word: usize,
}

impl GreedyRemaining {
    pub fn new(config: &GameConfig) -> Self {
        let (m, n) = (config.m as usize, config.n as usize);
        let words = n.div_ceil(64);
        let mut buckets = vec![vec![0u64; words]; m + 1];
        for k in 0..n {
            buckets[m][k / 64] |= 1 << (k % 64);
        }
        let mut sizes = vec![0; m + 1];
        sizes[m] = n;
        GreedyRemaining { remaining: vec![config.m; n], buckets, sizes, top: m, first_word: 0 }
    }
}

impl Strategy for GreedyRemaining {
    fn name(&self) -> String {
        "greedy-remaining".into()
    }

    fn next_guess(&mut self, history: &VisibleHistory) -> Result<Label> {
        if history.mode() != FeedbackMode::Complete {
            return Err(Error::WrongFeedbackMode(self.name()));
        }
        while self.top > 0 && self.sizes[self.top] == 0 {
            self.top -= 1;
            self.first_word = 0;
        }
        // the top bucket only loses members, so the scan start never moves back
        let words = &self.buckets[self.top];
        while self.first_word < words.len() && words[self.first_word] == 0 {
            self.first_word += 1;
        }
        let k = match words.get(self.first_word) {
            Some(&w) => self.first_word * 64 + w.trailing_zeros() as usize,
            None => 0,
        };
        Ok(Label::from_index(k))
    }

    fn observe(&mut self, feedback: &Feedback) {
        if let Some(card) = feedback.revealed {
            let k = card.index();
            let r = self.remaining[k] as usize;
            if r > 0 {
                let bit = 1u64 << (k % 64);
                self.buckets[r][k / 64] &= !bit;
                self.buckets[r - 1][k / 64] |= bit;
                self.sizes[r] -= 1;
                self.sizes[r - 1] += 1;
                self.remaining[k] -= 1;
            }
        }
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Replays a fixed guess sequence. Handy for engine tests.
#[derive(Debug, Clone)]
pub struct Scripted {
    guesses: Vec<Label>,
}

impl Scripted {
    pub fn new(guesses: Vec<Label>) -> Self {
        Scripted { guesses }
    }
}

impl Strategy for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn next_guess(&mut self, history: &VisibleHistory) -> Result<Label> {
        Ok(self.guesses.get(history.len()).copied().unwrap_or(Label::from_index(0)))
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Named strategy, as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategySpec {
    FixedLabel(u32),
    StickyAdvance,
    UniformRandom,
    GreedyBound,
    ExactGreedy,
    GreedyRemaining,
}

impl StrategySpec {
    /// Every strategy that plays under partial feedback, with `fixed:1`
    /// standing in for the fixed family.
    pub const PARTIAL: [StrategySpec; 5] = [
        StrategySpec::FixedLabel(1),
        StrategySpec::StickyAdvance,
        StrategySpec::UniformRandom,
        StrategySpec::GreedyBound,
        StrategySpec::ExactGreedy,
    ];

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, StrategySpec::UniformRandom)
    }

    /// Checks that this strategy can play `config` and prepares shared state.
    pub fn factory(&self, config: &GameConfig) -> Result<StrategyFactory> {
        config.validate()?;
        let oracle = match self {
            StrategySpec::FixedLabel(k) => {
                let label = Label::new(*k).ok_or(Error::InvalidLabel { label: *k, n: config.n })?;
                config.check_label(label)?;
                None
            }
            StrategySpec::ExactGreedy => Some(Arc::new(PosteriorOracle::new(config.m, config.n)?)),
            StrategySpec::GreedyRemaining if config.feedback != FeedbackMode::Complete => {
                return Err(Error::WrongFeedbackMode(self.to_string()));
            }
            _ => None,
        };
        Ok(StrategyFactory { spec: *self, oracle })
    }

    /// Builds a fresh instance for the game `config`.
    pub fn build(&self, config: &GameConfig) -> Result<Box<dyn Strategy>> {
        Ok(self.factory(config)?.instantiate(config))
    }
}

/// A validated strategy spec plus any state shared between games.
#[derive(Debug, Clone)]
pub struct StrategyFactory {
    spec: StrategySpec,
    oracle: Option<Arc<PosteriorOracle>>,
}

impl StrategyFactory {
    pub fn spec(&self) -> StrategySpec {
        self.spec
    }

    /// A fresh strategy for one game; randomized strategies draw their
    /// substream from `config.seed`.
    pub fn instantiate(&self, config: &GameConfig) -> Box<dyn Strategy> {
        match self.spec {
            StrategySpec::FixedLabel(k) => Box::new(FixedLabel::new(Label::new(k).expect("validated"))),
            StrategySpec::StickyAdvance => Box::new(StickyAdvance::new(config)),
            StrategySpec::UniformRandom => Box::new(UniformRandom::new(config)),
            StrategySpec::GreedyBound => Box::new(GreedyBound::new(config)),
            StrategySpec::ExactGreedy => {
                Box::new(ExactGreedy::new(self.oracle.clone().expect("validated")))
            }
            StrategySpec::GreedyRemaining => Box::new(GreedyRemaining::new(config)),
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::FixedLabel(k) => write!(f, "fixed:{k}"),
            StrategySpec::StickyAdvance => f.write_str("sticky"),
            StrategySpec::UniformRandom => f.write_str("random"),
            StrategySpec::GreedyBound => f.write_str("greedy-bound"),
            StrategySpec::ExactGreedy => f.write_str("exact-greedy"),
            StrategySpec::GreedyRemaining => f.write_str("greedy-remaining"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = match s {
            "sticky" => StrategySpec::StickyAdvance,
            "random" => StrategySpec::UniformRandom,
            "greedy-bound" => StrategySpec::GreedyBound,
            "exact-greedy" => StrategySpec::ExactGreedy,
            "greedy-remaining" => StrategySpec::GreedyRemaining,
            _ => {
                let k = s
                    .strip_prefix("fixed:")
                    .and_then(|k| k.parse::<u32>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| Error::UnknownStrategy(s.to_string()))?;
                StrategySpec::FixedLabel(k)
            }
        };
        Ok(spec)
    }
}

impl TryFrom<String> for StrategySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategySpec> for String {
    fn from(spec: StrategySpec) -> Self {
        spec.to_string()
    }
}
