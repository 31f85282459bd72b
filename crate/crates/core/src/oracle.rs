//! Exact ground truth for small decks.
//!
//! Everything here works with integer counts of deck orderings. A visible
//! history (guesses and hit bits) pins the label at every hit position and
//! forbids one label at every miss position; the posterior probability of
//! an event is the number of consistent orderings where it happens divided
//! by the number of consistent orderings.
//!
//! Two counting routes are provided:
//!
//! * [`count_by_enumeration`] walks every multiset permutation of the deck
//!   and checks it against an explicit history. It is slow and obviously
//!   right.
//! * [`PosteriorOracle`] counts by dynamic programming over the remaining
//!   composition of the deck. It only needs the per-label tallies
//!   `(a_k, b_k)`: past positions are exchangeable under a uniform shuffle,
//!   so the order of past rounds does not matter, and relabeling is a
//!   symmetry too. Results are cached under the sorted multiset of
//!   `(a_k, b_k)` pairs.
//!
//! The test suite checks the two routes against each other on every
//! history of the small decks.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, RwLock};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    play_game_with_deck, payoff, DeckState, Feedback, FeedbackMode, GameConfig, Label, TallyTable,
    VisibleHistory,
};
use crate::strategy::Strategy;

/// Default cap on `m * n` for anything that enumerates.
pub const DEFAULT_ORACLE_LIMIT: usize = 12;

/// Cap on `m * n` for [`optimal_value`].
pub const OPTIMAL_VALUE_LIMIT: usize = 8;

/// Environment variable overriding [`DEFAULT_ORACLE_LIMIT`].
pub const ORACLE_LIMIT_ENV: &str = "CARDGAME_ORACLE_LIMIT";

/// The enumeration cap in effect: the environment override if it parses,
/// otherwise [`DEFAULT_ORACLE_LIMIT`].
pub fn oracle_limit() -> usize {
    std::env::var(ORACLE_LIMIT_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ORACLE_LIMIT)
}

/// Largest deck the u128 counts can represent without overflow.
const HARD_LIMIT: usize = 30;

fn check_limit(m: u32, n: u32, limit: usize) -> Result<()> {
    GameConfig::new(m, n)?;
    let mn = m as usize * n as usize;
    if mn > limit.min(HARD_LIMIT) {
        return Err(Error::OracleLimitExceeded { mn, limit: limit.min(HARD_LIMIT) });
    }
    Ok(())
}

fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of arrangements of a multiset with the given multiplicities.
pub fn multinomial(parts: &[u32]) -> u128 {
    let mut total = 0;
    let mut acc: u128 = 1;
    for &p in parts {
        total += p;
        acc *= binomial(total, p);
    }
    acc
}

/// Number of distinct deck orderings, `(mn)! / (m!)^n`.
pub fn number_of_orderings(m: u32, n: u32) -> u128 {
    multinomial(&vec![m; n as usize])
}

/// Counts of consistent orderings: in total, and split by the label of the
/// next card.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosteriorCounts {
    pub total: u128,
    pub by_label: Vec<u128>,
}

impl PosteriorCounts {
    pub fn probability(&self, k: Label) -> f64 {
        self.by_label[k.index()] as f64 / self.total as f64
    }

    /// `P(next card = k)` as an exact fraction.
    pub fn exact(&self, k: Label) -> Ratio<i128> {
        Ratio::new(self.by_label[k.index()] as i128, self.total as i128)
    }

    pub fn distribution(&self) -> Vec<f64> {
        self.by_label.iter().map(|&c| c as f64 / self.total as f64).collect()
    }
}

/// Every arrangement of `m` copies of each of `n` labels (0-based), in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct MultisetPermutations {
    current: Option<Vec<u8>>,
}

impl MultisetPermutations {
    pub fn new(m: u32, n: u32) -> Self {
        let mut first = Vec::with_capacity(m as usize * n as usize);
        for k in 0..n {
            first.extend(std::iter::repeat_n(k as u8, m as usize));
        }
        MultisetPermutations { current: Some(first) }
    }
}

impl Iterator for MultisetPermutations {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        let current = self.current.take()?;
        let mut next = current.clone();
        // standard next-permutation step
        if let Some(i) = (1..next.len()).rev().find(|&i| next[i - 1] < next[i]) {
            let j = (i..next.len()).rev().find(|&j| next[j] > next[i - 1]).expect("pivot");
            next.swap(i - 1, j);
            next[i..].reverse();
            self.current = Some(next);
        }
        Some(current)
    }
}

/// Counts orderings consistent with an explicit partial-feedback history by
/// walking all of them.
pub fn count_by_enumeration(
    m: u32,
    n: u32,
    guesses: &[Label],
    hits: &[bool],
) -> Result<PosteriorCounts> {
    check_limit(m, n, oracle_limit())?;
    let rounds = m as usize * n as usize;
    let t = guesses.len();
    if t >= rounds || hits.len() != t {
        return Err(Error::IndexOutOfRange { t: t + 1, max: rounds });
    }
    let mut by_label = vec![0u128; n as usize];
    let mut total = 0;
    for order in MultisetPermutations::new(m, n) {
        let consistent = guesses
            .iter()
            .zip(hits)
            .enumerate()
            .all(|(i, (&g, &y))| (order[i] as usize == g.index()) == y);
        if consistent {
            total += 1;
            by_label[order[t] as usize] += 1;
        }
    }
    if total == 0 {
        return Err(Error::InfeasibleHistory);
    }
    Ok(PosteriorCounts { total, by_label })
}

/// Sorted `(a_k, b_k)` pairs; the symmetry class of a history.
pub type CanonicalKey = Vec<(u32, u32)>;

/// The canonical key and, for each slot of the key, the label it came from.
pub fn canonicalize(tallies: &TallyTable) -> (CanonicalKey, Vec<usize>) {
    let mut order: Vec<usize> = (0..tallies.n() as usize).collect();
    let pair = |k: usize| (tallies.guesses()[k], tallies.correct()[k]);
    order.sort_by_key(|&k| (pair(k), k));
    (order.iter().map(|&k| pair(k)).collect(), order)
}

/// Counts for a tally state by dynamic programming over the remaining
/// composition. `key[k] = (a_k, b_k)`.
fn count_by_composition(m: u32, key: &[(u32, u32)]) -> PosteriorCounts {
    let n = key.len();
    let rounds = m as usize * n;
    let played: u32 = key.iter().map(|&(a, _)| a).sum();
    let free = rounds as u32 - played;
    let zero = PosteriorCounts { total: 0, by_label: vec![0; n] };
    if key.iter().any(|&(a, b)| b > a || b > m) {
        return zero;
    }
    // copies of each label not pinned by a hit
    let start: Vec<u8> = key.iter().map(|&(_, b)| (m - b) as u8).collect();
    let mut layer: HashMap<Vec<u8>, u128> = HashMap::from([(start, 1)]);
    for (forbidden, &(a, b)) in key.iter().enumerate() {
        for _ in 0..(a - b) {
            let mut next: HashMap<Vec<u8>, u128> = HashMap::with_capacity(layer.len() * 2);
            for (state, ways) in &layer {
                for label in 0..n {
                    if label != forbidden && state[label] > 0 {
                        let mut s = state.clone();
                        s[label] -= 1;
                        *next.entry(s).or_insert(0) += ways;
                    }
                }
            }
            layer = next;
        }
    }
    let mut total = 0;
    let mut by_label = vec![0u128; n];
    let mut parts = vec![0u32; n];
    for (state, ways) in &layer {
        for (p, &s) in parts.iter_mut().zip(state) {
            *p = s as u32;
        }
        total += ways * multinomial(&parts);
        if free == 0 {
            continue;
        }
        for k in 0..n {
            if parts[k] > 0 {
                parts[k] -= 1;
                by_label[k] += ways * multinomial(&parts);
                parts[k] += 1;
            }
        }
    }
    PosteriorCounts { total, by_label }
}

/// Exact posterior of the next card for one `(m, n)`, with a shared cache.
#[derive(Debug)]
pub struct PosteriorOracle {
    m: u32,
    n: u32,
    cache: RwLock<HashMap<CanonicalKey, Arc<PosteriorCounts>>>,
}

impl PosteriorOracle {
    /// Fails with `OracleLimitExceeded` when `m * n` is above [`oracle_limit`].
    pub fn new(m: u32, n: u32) -> Result<Self> {
        Self::with_limit(m, n, oracle_limit())
    }

    pub fn with_limit(m: u32, n: u32, limit: usize) -> Result<Self> {
        check_limit(m, n, limit)?;
        Ok(PosteriorOracle { m, n, cache: RwLock::new(HashMap::new()) })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rounds(&self) -> usize {
        self.m as usize * self.n as usize
    }

    /// Counts for a canonical key, slot by slot.
    fn counts_for_key(&self, key: &CanonicalKey) -> Arc<PosteriorCounts> {
        if let Some(hit) = self.cache.read().expect("cache poisoned").get(key) {
            return hit.clone();
        }
        let counts = Arc::new(count_by_composition(self.m, key));
        self.cache.write().expect("cache poisoned").insert(key.clone(), counts.clone());
        counts
    }

    /// Number of orderings consistent with a canonical key.
    pub fn consistent_orderings(&self, key: &CanonicalKey) -> u128 {
        self.counts_for_key(key).total
    }

    /// Counts of consistent orderings split by the next card's label.
    pub fn next_card_counts(&self, tallies: &TallyTable) -> Result<PosteriorCounts> {
        if tallies.n() != self.n {
            return Err(Error::InvalidConfig(format!(
                "tallies have {} labels, oracle expects {}",
                tallies.n(),
                self.n
            )));
        }
        if tallies.t() > self.rounds() {
            return Err(Error::IndexOutOfRange { t: tallies.t(), max: self.rounds() });
        }
        let (key, order) = canonicalize(tallies);
        let slots = self.counts_for_key(&key);
        if slots.total == 0 {
            return Err(Error::InfeasibleHistory);
        }
        let mut by_label = vec![0; self.n as usize];
        for (slot, &label) in order.iter().enumerate() {
            by_label[label] = slots.by_label[slot];
        }
        Ok(PosteriorCounts { total: slots.total, by_label })
    }

    /// Distribution of the next card given everything the guesser has seen.
    pub fn next_card_distribution(&self, history: &VisibleHistory) -> Result<Vec<f64>> {
        if history.mode() != FeedbackMode::Partial {
            return Err(Error::InvalidConfig("the oracle models partial feedback".into()));
        }
        Ok(self.next_card_counts(history.tallies())?.distribution())
    }

    /// `P(y_t = 1 | history)` for guessing `guess` next, exactly.
    pub fn hit_probability(&self, tallies: &TallyTable, guess: Label) -> Result<Ratio<i128>> {
        Ok(self.next_card_counts(tallies)?.exact(guess))
    }
}

/// Result of the exhaustive check of the hit-probability bound
/// `P(y_t = 1 | history) <= (m - b) / (mn - a - hits)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerification {
    pub mn_checked: usize,
    /// Distinct histories visited (up to label and round-order symmetry).
    pub histories: u64,
    /// Number of (history, guess) pairs where the bound applies.
    pub guesses_checked: u64,
    /// Largest `LHS - RHS` seen; nonpositive when the bound holds.
    pub max_slack: f64,
    pub pass: bool,
}

/// Outcome of one (history, guess) check.
struct BoundCheck {
    holds: bool,
    slack: f64,
}

fn check_bound(m: u32, rounds: usize, pair: (u32, u32), hits: u32, count: u128, total: u128) -> Option<BoundCheck> {
    let (a, b) = pair;
    let denom = rounds as i128 - a as i128 - hits as i128;
    if denom <= 0 {
        return None;
    }
    let num = m as i128 - b as i128;
    // count / total <= num / denom
    let holds = (count as i128) * denom <= num * (total as i128);
    let slack = count as f64 / total as f64 - num as f64 / denom as f64;
    Some(BoundCheck { holds, slack })
}

/// Checks the hit-probability bound at every reachable history and every
/// guess for which its denominator is positive.
///
/// Histories are visited once per symmetry class; the check at a history
/// only depends on the class.
pub fn verify_hit_bound(m: u32, n: u32) -> Result<BoundVerification> {
    let oracle = PosteriorOracle::new(m, n)?;
    let rounds = oracle.rounds();
    let root = TallyTable::new(n);
    let mut seen: HashSet<CanonicalKey> = HashSet::new();
    let mut stack = vec![root];
    let mut report = BoundVerification {
        mn_checked: rounds,
        histories: 0,
        guesses_checked: 0,
        max_slack: f64::NEG_INFINITY,
        pass: true,
    };
    while let Some(tallies) = stack.pop() {
        if tallies.t() > rounds || !seen.insert(canonicalize(&tallies).0) {
            continue;
        }
        report.histories += 1;
        let counts = oracle.next_card_counts(&tallies)?;
        for k in 0..n as usize {
            let label = Label::from_index(k);
            // labels with equal tallies give identical checks and children
            if (0..k).any(|j| tallies.guesses()[j] == tallies.guesses()[k] && tallies.correct()[j] == tallies.correct()[k]) {
                continue;
            }
            let pair = (tallies.a(label), tallies.b(label));
            if let Some(c) = check_bound(m, rounds, pair, tallies.hits(), counts.by_label[k], counts.total) {
                report.guesses_checked += 1;
                report.pass &= c.holds;
                report.max_slack = report.max_slack.max(c.slack);
            }
            for correct in [true, false] {
                let possible = if correct { counts.by_label[k] > 0 } else { counts.by_label[k] < counts.total };
                if possible {
                    let mut child = tallies.clone();
                    child.record(label, correct);
                    stack.push(child);
                }
            }
        }
    }
    report.pass &= report.max_slack <= 1e-12;
    Ok(report)
}

/// The same check without symmetry reduction: every raw history, counted by
/// explicit enumeration. Only practical for tiny decks.
pub fn verify_hit_bound_raw(m: u32, n: u32) -> Result<BoundVerification> {
    check_limit(m, n, oracle_limit())?;
    let rounds = m as usize * n as usize;
    let mut report = BoundVerification {
        mn_checked: rounds,
        histories: 0,
        guesses_checked: 0,
        max_slack: f64::NEG_INFINITY,
        pass: true,
    };
    let mut stack: Vec<(Vec<Label>, Vec<bool>)> = vec![(vec![], vec![])];
    while let Some((guesses, hits)) = stack.pop() {
        if guesses.len() >= rounds {
            continue;
        }
        report.histories += 1;
        let counts = count_by_enumeration(m, n, &guesses, &hits)?;
        let history = VisibleHistory::from_partial(&GameConfig::new(m, n)?, &guesses, &hits)?;
        let tallies = history.tallies();
        for k in 0..n as usize {
            let label = Label::from_index(k);
            let pair = (tallies.a(label), tallies.b(label));
            if let Some(c) = check_bound(m, rounds, pair, tallies.hits(), counts.by_label[k], counts.total) {
                report.guesses_checked += 1;
                report.pass &= c.holds;
                report.max_slack = report.max_slack.max(c.slack);
            }
            for correct in [true, false] {
                let possible = if correct { counts.by_label[k] > 0 } else { counts.by_label[k] < counts.total };
                if possible {
                    let mut g = guesses.clone();
                    let mut y = hits.clone();
                    g.push(label);
                    y.push(correct);
                    stack.push((g, y));
                }
            }
        }
    }
    report.pass &= report.max_slack <= 1e-12;
    Ok(report)
}

/// Exact optimal expected payoff as a fraction of integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactValue {
    /// Sum over deck orderings of the payoff obtained on that ordering.
    pub weighted: u128,
    pub orderings: u128,
}

impl ExactValue {
    pub fn as_f64(&self) -> f64 {
        self.weighted as f64 / self.orderings as f64
    }

    pub fn as_ratio(&self) -> Ratio<i128> {
        Ratio::new(self.weighted as i128, self.orderings as i128)
    }
}

/// Optimal expected payoff under partial feedback, over all strategies.
///
/// Works with `W(h) = #consistent(h) * V(h)`, which satisfies
/// `W(h) = max_k [#hit(h,k) + W(h + hit) + W(h + miss)]` in integers.
pub fn optimal_value(m: u32, n: u32) -> Result<ExactValue> {
    check_limit(m, n, OPTIMAL_VALUE_LIMIT.min(oracle_limit()))?;
    let oracle = PosteriorOracle::new(m, n)?;
    let mut memo: HashMap<CanonicalKey, u128> = HashMap::new();
    let weighted = weighted_optimum(&oracle, &TallyTable::new(n), &mut memo)?;
    Ok(ExactValue { weighted, orderings: number_of_orderings(m, n) })
}

fn weighted_optimum(
    oracle: &PosteriorOracle,
    tallies: &TallyTable,
    memo: &mut HashMap<CanonicalKey, u128>,
) -> Result<u128> {
    if tallies.t() > oracle.rounds() {
        return Ok(0);
    }
    let (key, _) = canonicalize(tallies);
    if let Some(&w) = memo.get(&key) {
        return Ok(w);
    }
    let counts = oracle.next_card_counts(tallies)?;
    let mut best = 0;
    let mut tried: HashSet<(u32, u32)> = HashSet::new();
    for label in (1..=oracle.n()).map(|k| Label::new(k).expect("positive")) {
        if !tried.insert((tallies.a(label), tallies.b(label))) {
            continue;
        }
        let hit = counts.by_label[label.index()];
        let mut value = hit;
        for (correct, weight) in [(true, hit), (false, counts.total - hit)] {
            if weight > 0 {
                let mut child = tallies.clone();
                child.record(label, correct);
                value += weighted_optimum(oracle, &child, memo)?;
            }
        }
        best = best.max(value);
    }
    memo.insert(key, best);
    Ok(best)
}

/// [`optimal_value`] without symmetry reduction: memoized on the raw
/// history, every label tried, counts by explicit enumeration.
pub fn optimal_value_raw(m: u32, n: u32) -> Result<ExactValue> {
    check_limit(m, n, OPTIMAL_VALUE_LIMIT.min(oracle_limit()))?;
    let mut memo: HashMap<(Vec<Label>, Vec<bool>), u128> = HashMap::new();
    let weighted = weighted_optimum_raw(m, n, &mut vec![], &mut vec![], &mut memo)?;
    Ok(ExactValue { weighted, orderings: number_of_orderings(m, n) })
}

fn weighted_optimum_raw(
    m: u32,
    n: u32,
    guesses: &mut Vec<Label>,
    hits: &mut Vec<bool>,
    memo: &mut HashMap<(Vec<Label>, Vec<bool>), u128>,
) -> Result<u128> {
    if guesses.len() == m as usize * n as usize {
        return Ok(0);
    }
    let key = (guesses.clone(), hits.clone());
    if let Some(&w) = memo.get(&key) {
        return Ok(w);
    }
    let counts = count_by_enumeration(m, n, guesses, hits)?;
    let mut best = 0;
    for label in (1..=n).map(|k| Label::new(k).expect("positive")) {
        let hit = counts.by_label[label.index()];
        let mut value = hit;
        for (correct, weight) in [(true, hit), (false, counts.total - hit)] {
            if weight > 0 {
                guesses.push(label);
                hits.push(correct);
                value += weighted_optimum_raw(m, n, guesses, hits, memo)?;
                guesses.pop();
                hits.pop();
            }
        }
        best = best.max(value);
    }
    memo.insert(key, best);
    Ok(best)
}

/// Optimal expected payoff when every drawn card is revealed.
///
/// The state is the remaining composition; with `C(r)` the number of
/// arrangements of `r`, `W(r) = C(r) V(r)` obeys
/// `W(r) = max_k C(r - e_k) + sum_j W(r - e_j)`.
pub fn optimal_value_complete(m: u32, n: u32) -> Result<ExactValue> {
    check_limit(m, n, oracle_limit())?;
    let mut memo: HashMap<Vec<u32>, u128> = HashMap::new();
    let weighted = weighted_complete(&mut vec![m; n as usize], &mut memo);
    Ok(ExactValue { weighted, orderings: number_of_orderings(m, n) })
}

fn weighted_complete(remaining: &mut Vec<u32>, memo: &mut HashMap<Vec<u32>, u128>) -> u128 {
    if remaining.iter().all(|&r| r == 0) {
        return 0;
    }
    let mut key = remaining.clone();
    key.sort_unstable();
    if let Some(&w) = memo.get(&key) {
        return w;
    }
    let mut best_hit = 0;
    let mut rest = 0;
    for k in 0..remaining.len() {
        if remaining[k] == 0 {
            continue;
        }
        remaining[k] -= 1;
        best_hit = best_hit.max(multinomial(remaining));
        rest += weighted_complete(remaining, memo);
        remaining[k] += 1;
    }
    memo.insert(key, best_hit + rest);
    best_hit + rest
}

/// Exact expected payoff of a deterministic strategy, by walking the tree of
/// feedback sequences with their exact ordering counts.
pub fn strategy_exact_value(strategy: &dyn Strategy, config: &GameConfig) -> Result<ExactValue> {
    if !strategy.is_deterministic() {
        return Err(Error::RandomizedStrategyUnsupported(strategy.name()));
    }
    let config = config.with_feedback(FeedbackMode::Partial);
    let oracle = PosteriorOracle::new(config.m, config.n)?;
    let weighted =
        weighted_strategy_value(&oracle, strategy.box_clone(), &VisibleHistory::new(&config))?;
    Ok(ExactValue { weighted, orderings: number_of_orderings(config.m, config.n) })
}

fn weighted_strategy_value(
    oracle: &PosteriorOracle,
    mut strategy: Box<dyn Strategy>,
    history: &VisibleHistory,
) -> Result<u128> {
    if history.len() == oracle.rounds() {
        return Ok(0);
    }
    let counts = oracle.next_card_counts(history.tallies())?;
    let guess = strategy.next_guess(history)?;
    let hit = counts.by_label[guess.index()];
    let mut total = 0;
    for (correct, weight) in [(true, hit), (false, counts.total - hit)] {
        if weight == 0 {
            continue;
        }
        let mut child_strategy = strategy.box_clone();
        let feedback = Feedback { guess, correct, revealed: None };
        child_strategy.observe(&feedback);
        let mut child = history.clone();
        child.push(&feedback);
        if correct {
            total += weight;
        }
        total += weighted_strategy_value(oracle, child_strategy, &child)?;
    }
    Ok(total)
}

/// Exact expected payoff of a deterministic strategy as a plain average over
/// every deck ordering.
pub fn strategy_value_by_orderings(strategy: &dyn Strategy, config: &GameConfig) -> Result<ExactValue> {
    if !strategy.is_deterministic() {
        return Err(Error::RandomizedStrategyUnsupported(strategy.name()));
    }
    check_limit(config.m, config.n, oracle_limit())?;
    let mut weighted = 0u128;
    let mut orderings = 0u128;
    for order in MultisetPermutations::new(config.m, config.n) {
        let deck = DeckState::from_order(config, order.iter().map(|&k| Label::from_index(k as usize)).collect())?;
        let tr = play_game_with_deck(config, deck, strategy.box_clone().as_mut())?;
        weighted += payoff(&tr)? as u128;
        orderings += 1;
    }
    Ok(ExactValue { weighted, orderings })
}
