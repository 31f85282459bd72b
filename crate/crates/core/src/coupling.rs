//! The coupled Boolean process and its supermartingale.
//!
//! Alongside a real game, with outcomes `y_t`, we build a second Boolean
//! sequence `z_t` whose conditional success probability given the guesses
//! and its own past is exactly
//!
//! ```text
//! p_t = (m - c(g_t, t)) / (mn - a(g_t, t) - Y),    Y = floor(sqrt(m) * n / 6)
//! ```
//!
//! where `c(k, t)` counts earlier rounds with `g_i = k` and `z_i = 1`. Once
//! `a(g_t, t) >= mn - Y` the process is frozen at `z_t = 0`. Writing
//! `q_t = P(y_t = 1 | g_<=t, y_<t)` for the true hit probability, `z_t` is a
//! Bernoulli draw whose mean given `y_t` is
//!
//! ```text
//! ((1 - p_t) y_t + p_t - q_t) / (1 - q_t)   if p_t >= q_t
//! p_t y_t / q_t                              if p_t <  q_t
//! ```
//!
//! which averages to `p_t` and forces `z_t >= y_t` whenever `q_t <= p_t`.
//! The degenerate `q_t = 1` (then `p_t = 1`) is resolved by continuity to a
//! mean of `p_t y_t`.
//!
//! `q_t` comes from the exact [`PosteriorOracle`], so the construction only
//! runs on oracle-sized decks. All of `p_t`, `q_t` and the Bernoulli mean
//! are exact fractions.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    new_deck, play_round, FeedbackMode, GameConfig, Label, TallyTable, Transcript, VisibleHistory,
};
use crate::oracle::PosteriorOracle;
use crate::rng::{self, Stream};
use crate::stats::RunningStats;
use crate::strategy::{Strategy, StrategySpec};

type Frac = Ratio<i128>;

/// Mass, `z = 1` count, `p_t` and a consistency flag for one `(g_<=t, z_<t)` class.
type ZClasses = HashMap<(Vec<u32>, Vec<bool>), (u64, u64, Option<Frac>, bool)>;

/// Weight and weighted drift for one `(label, g_<=t, z_<t)` class.
type DriftClasses = HashMap<(usize, Vec<u32>, Vec<bool>), (f64, f64)>;

fn frac_f64(r: &Frac) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `floor(sqrt(m) * n / 6)`, computed in integers as the largest `Y` with
/// `36 Y^2 <= m n^2`.
pub fn y_cap(m: u32, n: u32) -> u64 {
    let target = (m as u128 * n as u128 * n as u128) / 36;
    isqrt(target) as u64
}

fn isqrt(x: u128) -> u128 {
    if x < 2 {
        return x;
    }
    let mut r = (x as f64).sqrt() as u128;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

/// The dimensions of a coupling run and its cap `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub m: u32,
    pub n: u32,
    pub y_cap: u64,
}

impl CouplingParams {
    /// Requires `m <= mn - Y`, the lower bound of the `c` envelope at the
    /// first round.
    pub fn new(m: u32, n: u32) -> Result<Self> {
        GameConfig::new(m, n)?;
        let y_cap = y_cap(m, n);
        let rounds = m as u64 * n as u64;
        if m as u64 + y_cap > rounds {
            return Err(Error::InvalidConfig(format!(
                "cap Y={y_cap} leaves no room for the coupling at m={m}, n={n}"
            )));
        }
        Ok(CouplingParams { m, n, y_cap })
    }

    pub fn rounds(&self) -> u64 {
        self.m as u64 * self.n as u64
    }

    /// Guess counts at or above this freeze the coupled process.
    pub fn freeze_at(&self) -> u64 {
        self.rounds() - self.y_cap
    }

    /// `p_t` for a label guessed `a` times with `c` coupled successes, or
    /// `None` once frozen.
    pub fn success_probability(&self, a: u32, c: u32) -> Option<Frac> {
        if a as u64 >= self.freeze_at() {
            return None;
        }
        let den = self.freeze_at() as i128 - a as i128;
        Some(Frac::new(self.m as i128 - c as i128, den))
    }

    /// `f(c - a/n) - 3c - 3a/n`.
    pub fn potential(&self, a: u32, c: u32) -> f64 {
        let n = self.n as f64;
        let x = c as f64 - a as f64 / n;
        f_penalty(x, self.y_cap, self.n) - 3.0 * c as f64 - 3.0 * a as f64 / n
    }

    /// The two-sided envelope `m - max(mn - a - Y, 0) <= c <= m`.
    pub fn envelope_holds(&self, a: u32, c: u32) -> bool {
        let slack = (self.freeze_at() as i64 - a as i64).max(0);
        self.m as i64 - slack <= c as i64 && c <= self.m
    }
}

/// Zero on `(0, Y/n)`, quadratic distance to that interval outside it.
pub fn f_penalty(x: f64, y_cap: u64, n: u32) -> f64 {
    let upper = y_cap as f64 / n as f64;
    if x <= 0.0 {
        x * x
    } else if x < upper {
        0.0
    } else {
        (x - upper) * (x - upper)
    }
}

/// Whether `f(x) >= max(0, x^2/2 - Y^2/n^2)` holds at `x`, up to 1e-12.
pub fn f_lower_bound_check(x: f64, y_cap: u64, n: u32) -> bool {
    let upper = y_cap as f64 / n as f64;
    let bound = (x * x / 2.0 - upper * upper).max(0.0);
    f_penalty(x, y_cap, n) >= bound - 1e-12
}

/// Conditional mean of `z_t` given `y_t`, from `p_t` and `q_t`.
pub fn bernoulli_mean(p: Frac, q: Frac, y: bool) -> Frac {
    let one = Frac::from_integer(1);
    let yv = Frac::from_integer(y as i128);
    if p >= q {
        if q == one {
            p * yv
        } else {
            ((one - p) * yv + p - q) / (one - q)
        }
    } else {
        p * yv / q
    }
}

/// One round of a coupled game.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRound {
    pub g: Label,
    pub y: bool,
    pub z: bool,
    /// `q_t`, the exact hit probability of `g` given the visible history.
    pub q: Frac,
    /// `p_t`, or `None` when the guessed label is frozen.
    pub p: Option<Frac>,
    /// Mean of `z_t` given `y_t` used for the draw.
    pub z_mean: Frac,
    /// `a(g_t, t) <= mn / 2`.
    pub w: bool,
}

impl CoupledRound {
    /// `E(z_t | g_<=t, z_<t)`: `p_t`, or zero when frozen.
    pub fn z_target(&self) -> Frac {
        self.p.unwrap_or_else(|| Frac::from_integer(0))
    }
}

/// A game together with its coupled process.
#[derive(Debug, Clone)]
pub struct CoupledTranscript {
    pub params: CouplingParams,
    pub base: Transcript,
    pub rounds: Vec<CoupledRound>,
}

/// Which stopping time to use for the late-round split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauRule {
    /// First round with `w = 0`, whatever label was guessed.
    FirstLate,
    /// First round with `w = 0` in which label `k` was guessed.
    FirstLateOfLabel,
}

impl CoupledTranscript {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn z(&self) -> impl Iterator<Item = bool> + '_ {
        self.rounds.iter().map(|r| r.z)
    }

    pub fn sum_y(&self) -> u64 {
        self.rounds.iter().filter(|r| r.y).count() as u64
    }

    pub fn sum_z(&self) -> u64 {
        self.rounds.iter().filter(|r| r.z).count() as u64
    }

    /// `(a(k, t), b(k, t), c(k, t))` for every label, over rounds `1..t`.
    pub fn counts_at(&self, t: usize) -> Vec<(u32, u32, u32)> {
        let mut out = vec![(0, 0, 0); self.params.n as usize];
        for r in self.rounds.iter().take(t - 1) {
            let e = &mut out[r.g.index()];
            e.0 += 1;
            e.1 += r.y as u32;
            e.2 += r.z as u32;
        }
        out
    }

    /// Visits `(t, counts at t)` for `t = 1..=len+1`.
    fn for_each_time(&self, mut visit: impl FnMut(usize, &[(u32, u32, u32)])) {
        let mut counts = vec![(0u32, 0u32, 0u32); self.params.n as usize];
        visit(1, &counts);
        for (i, r) in self.rounds.iter().enumerate() {
            let e = &mut counts[r.g.index()];
            e.0 += 1;
            e.1 += r.y as u32;
            e.2 += r.z as u32;
            visit(i + 2, &counts);
        }
    }

    /// The envelope on `c(k, t)` at every label and time.
    pub fn check_property_a(&self) -> bool {
        let mut ok = true;
        self.for_each_time(|_, counts| {
            ok &= counts.iter().all(|&(a, _, c)| self.params.envelope_holds(a, c));
        });
        ok
    }

    /// Dominance: wherever `q_t <= E(z_t | g_<=t, z_<t)`, `y_t <= z_t`.
    /// `q_t` is recomputed from `oracle` rather than read back.
    pub fn check_property_d(&self, oracle: &PosteriorOracle) -> Result<bool> {
        let mut tallies = TallyTable::new(self.params.n);
        for r in &self.rounds {
            let q = oracle.hit_probability(&tallies, r.g)?;
            if q != r.q {
                return Ok(false);
            }
            if q <= r.z_target() && r.y && !r.z {
                return Ok(false);
            }
            tallies.record(r.g, r.y);
        }
        Ok(true)
    }

    /// `b(k, t) <= c(k, t)` for all `k, t`, unless the game scored more than `Y`.
    pub fn compare_b_c(&self) -> bool {
        if self.sum_y() > self.params.y_cap {
            return true;
        }
        let mut ok = true;
        self.for_each_time(|_, counts| {
            ok &= counts.iter().all(|&(_, b, c)| b <= c);
        });
        ok
    }

    /// First round `t` with `w_t = 0` (restricted to rounds guessing `k`
    /// under [`TauRule::FirstLateOfLabel`]), or `mn + 1`.
    pub fn tau_stop(&self, k: Label, rule: TauRule) -> usize {
        self.rounds
            .iter()
            .position(|r| !r.w && (rule == TauRule::FirstLate || r.g == k))
            .map(|i| i + 1)
            .unwrap_or(self.params.rounds() as usize + 1)
    }

    /// `X_{k,t}`.
    pub fn potential(&self, k: Label, t: usize) -> f64 {
        let (a, _, c) = self.counts_at(t)[k.index()];
        self.params.potential(a, c)
    }

    /// `sum_i (1 - w_i)(z_i - 1/n)`.
    pub fn late_sum(&self) -> f64 {
        let inv_n = 1.0 / self.params.n as f64;
        self.rounds.iter().filter(|r| !r.w).map(|r| r.z as u8 as f64 - inv_n).sum()
    }
}

/// Plays a game from `config.seed` and builds its coupled process.
pub fn couple_game(
    config: &GameConfig,
    strategy: &mut dyn Strategy,
    oracle: &PosteriorOracle,
) -> Result<CoupledTranscript> {
    if config.feedback != FeedbackMode::Partial {
        return Err(Error::InvalidConfig("coupling runs under partial feedback".into()));
    }
    if (oracle.m(), oracle.n()) != (config.m, config.n) {
        return Err(Error::InvalidConfig("oracle built for a different deck".into()));
    }
    let params = CouplingParams::new(config.m, config.n)?;
    let mut deck = new_deck(config, &mut rng::stream(config.seed, Stream::Deck));
    let mut coin = rng::stream(config.seed, Stream::Coupling);
    let mut history = VisibleHistory::new(config);
    let mut c = vec![0u32; config.n as usize];
    let mut rounds = Vec::with_capacity(config.rounds());
    let half = params.rounds();
    for _ in 0..config.rounds() {
        let g = strategy.next_guess(&history)?;
        let q = oracle.hit_probability(history.tallies(), g)?;
        let a = history.tallies().a(g);
        let feedback = play_round(&mut deck, g)?;
        let y = feedback.correct;
        let p = params.success_probability(a, c[g.index()]);
        let z_mean = match p {
            Some(p) => bernoulli_mean(p, q, y),
            None => Frac::from_integer(0),
        };
        if z_mean < Frac::from_integer(0) || z_mean > Frac::from_integer(1) {
            return Err(Error::NumericalRange(frac_f64(&z_mean)));
        }
        let u: f64 = coin.random();
        let z = if z_mean == Frac::from_integer(1) {
            true
        } else {
            u < frac_f64(&z_mean)
        };
        c[g.index()] += z as u32;
        rounds.push(CoupledRound { g, y, z, q, p, z_mean, w: 2 * a as u64 <= half });
        history.push(&feedback);
        strategy.observe(&feedback);
    }
    let base = Transcript {
        config: *config,
        g: history.guesses().to_vec(),
        y: history.hits().to_vec(),
    };
    Ok(CoupledTranscript { params, base, rounds })
}

/// Coupled trajectories of independent games.
#[derive(Debug, Clone)]
pub struct CoupledBatch {
    pub params: CouplingParams,
    pub strategy: StrategySpec,
    pub trajectories: Vec<CoupledTranscript>,
}

const BATCH_CHUNK: usize = 1024;

/// Runs `trials` coupled games; game `i` uses seed `mix(master_seed, i)`.
/// The result does not depend on the thread count.
pub fn run_coupled_batch(
    m: u32,
    n: u32,
    spec: StrategySpec,
    trials: usize,
    master_seed: u64,
) -> Result<CoupledBatch> {
    let params = CouplingParams::new(m, n)?;
    let base = GameConfig::new(m, n)?;
    let oracle = PosteriorOracle::new(m, n)?;
    let factory = spec.factory(&base)?;
    let chunks: Vec<usize> = (0..trials.div_ceil(BATCH_CHUNK)).collect();
    let parts: Vec<Result<Vec<CoupledTranscript>>> = chunks
        .par_iter()
        .map(|&chunk| {
            let lo = chunk * BATCH_CHUNK;
            let hi = (lo + BATCH_CHUNK).min(trials);
            (lo..hi)
                .map(|i| {
                    let config = base.with_seed(rng::mix(master_seed, i as u64));
                    let mut strategy = factory.instantiate(&config);
                    couple_game(&config, strategy.as_mut(), &oracle)
                })
                .collect()
        })
        .collect();
    let mut trajectories = Vec::with_capacity(trials);
    for part in parts {
        trajectories.extend(part?);
    }
    Ok(CoupledBatch { params, strategy: spec, trajectories })
}

/// Largest |z-score| of class means of `z_t` against `p_t`, over classes of
/// `(g_<=t, z_<t)` with at least `min_class` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCheck {
    pub classes: usize,
    pub worst_z: f64,
}

fn z_score(observed: f64, expected: f64, sigma: f64) -> f64 {
    let diff = (observed - expected).abs();
    if diff <= 1e-12 {
        0.0
    } else if sigma == 0.0 {
        f64::INFINITY
    } else {
        diff / sigma
    }
}

impl CoupledBatch {
    pub fn trials(&self) -> usize {
        self.trajectories.len()
    }

    pub fn property_a(&self) -> bool {
        self.trajectories.iter().all(|t| t.check_property_a())
    }

    pub fn property_d(&self, oracle: &PosteriorOracle) -> Result<bool> {
        for t in &self.trajectories {
            if !t.check_property_d(oracle)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn compare_b_c(&self) -> bool {
        self.trajectories.iter().all(|t| t.compare_b_c())
    }

    /// Class means of `z_t` over `(g_<=t, z_<t)` against `p_t`.
    pub fn property_c(&self, min_class: u64) -> ClassCheck {
        // key: guesses g_1..g_t then z_1..z_{t-1}
        let mut classes = ZClasses::new();
        for tr in &self.trajectories {
            let mut g = Vec::with_capacity(tr.len());
            let mut z = Vec::with_capacity(tr.len());
            for r in &tr.rounds {
                g.push(r.g.get());
                let entry = classes.entry((g.clone(), z.clone())).or_insert((0, 0, r.p, true));
                entry.0 += 1;
                entry.1 += r.z as u64;
                entry.3 &= entry.2 == r.p;
                z.push(r.z);
            }
        }
        let mut check = ClassCheck { classes: 0, worst_z: 0.0 };
        for (count, ones, p, consistent) in classes.into_values() {
            if count < min_class {
                continue;
            }
            let Some(p) = p else { continue };
            check.classes += 1;
            if !consistent {
                check.worst_z = f64::INFINITY;
                continue;
            }
            let p = frac_f64(&p);
            let sigma = (p * (1.0 - p) / count as f64).sqrt();
            check.worst_z = check.worst_z.max(z_score(ones as f64 / count as f64, p, sigma));
        }
        check
    }

    /// Correlation of `z_t` with each later `y_{t'}` within classes of
    /// `(g_<=t, y_<=t)`, scaled to a z-score by `sqrt(count)`.
    pub fn property_b(&self, min_class: u64) -> ClassCheck {
        struct Acc {
            count: u64,
            z: u64,
            y: Vec<u64>,
            zy: Vec<u64>,
        }
        let rounds = self.params.rounds() as usize;
        let mut classes: HashMap<(Vec<u32>, Vec<bool>), Acc> = HashMap::new();
        for tr in &self.trajectories {
            let mut g = Vec::with_capacity(rounds);
            let mut y = Vec::with_capacity(rounds);
            for (t, r) in tr.rounds.iter().enumerate() {
                g.push(r.g.get());
                y.push(r.y);
                let later = rounds - t - 1;
                let acc = classes.entry((g.clone(), y.clone())).or_insert_with(|| Acc {
                    count: 0,
                    z: 0,
                    y: vec![0; later],
                    zy: vec![0; later],
                });
                acc.count += 1;
                acc.z += r.z as u64;
                for (j, fut) in tr.rounds[t + 1..].iter().enumerate() {
                    acc.y[j] += fut.y as u64;
                    acc.zy[j] += (fut.y && r.z) as u64;
                }
            }
        }
        let mut check = ClassCheck { classes: 0, worst_z: 0.0 };
        for acc in classes.into_values() {
            if acc.count < min_class {
                continue;
            }
            check.classes += 1;
            let n = acc.count as f64;
            let mz = acc.z as f64 / n;
            for (&sy, &szy) in acc.y.iter().zip(&acc.zy) {
                let my = sy as f64 / n;
                let var = mz * (1.0 - mz) * my * (1.0 - my);
                if var <= 0.0 {
                    continue;
                }
                let r = (szy as f64 / n - mz * my) / var.sqrt();
                check.worst_z = check.worst_z.max(r.abs() * n.sqrt());
            }
        }
        check
    }

    /// Moments of `sum_i z_i`.
    pub fn sum_z(&self) -> RunningStats {
        self.trajectories.iter().map(|t| t.sum_z() as f64).collect()
    }

    /// Moments of `X_{k, tau}` for each label.
    pub fn stopped_potential(&self, rule: TauRule) -> Vec<RunningStats> {
        (1..=self.params.n)
            .map(|k| {
                let k = Label::new(k).expect("positive");
                self.trajectories.iter().map(|t| t.potential(k, t.tau_stop(k, rule))).collect()
            })
            .collect()
    }

    /// Moments of `sum_i (1 - w_i)(z_i - 1/n)`.
    pub fn late_sum(&self) -> RunningStats {
        self.trajectories.iter().map(|t| t.late_sum()).collect()
    }

    /// Moments of `w_t (z_t - 1/n)` for each round `t`.
    pub fn early_terms(&self) -> Vec<RunningStats> {
        let inv_n = 1.0 / self.params.n as f64;
        (0..self.params.rounds() as usize)
            .map(|t| {
                self.trajectories
                    .iter()
                    .map(|tr| {
                        let r = &tr.rounds[t];
                        if r.w {
                            r.z as u8 as f64 - inv_n
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Minimum class size for the sampled class checks.
pub const MIN_CLASS: u64 = 1000;

/// Largest admissible |z-score| in the sampled class checks.
pub const CLASS_Z_LIMIT: f64 = 5.0;

/// Summary of a coupled batch and, optionally, of the exact drift tree.
/// Sampled fields are `None` when no trajectories were drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub config: CouplingParams,
    pub strategy: StrategySpec,
    pub trials: usize,
    pub seed: u64,
    pub prop_a_pass: Option<bool>,
    pub prop_b_worst_z: Option<f64>,
    pub prop_c_worst_z: Option<f64>,
    pub prop_d_pass: Option<bool>,
    /// `b <= c` or payoff above the cap, on every trajectory.
    pub comparison_pass: Option<bool>,
    pub mean_sum_z: Option<f64>,
    pub max_drift: Option<f64>,
}

impl CouplingReport {
    /// Runs `trials` coupled games and, when `exact_drift` is set, the exact
    /// drift tree of `spec`.
    pub fn run(m: u32, n: u32, spec: StrategySpec, trials: usize, seed: u64, exact_drift: bool) -> Result<Self> {
        let config = CouplingParams::new(m, n)?;
        let oracle = PosteriorOracle::new(m, n)?;
        let mut report = CouplingReport {
            config,
            strategy: spec,
            trials,
            seed,
            prop_a_pass: None,
            prop_b_worst_z: None,
            prop_c_worst_z: None,
            prop_d_pass: None,
            comparison_pass: None,
            mean_sum_z: None,
            max_drift: None,
        };
        if trials > 0 {
            let batch = run_coupled_batch(m, n, spec, trials, seed)?;
            report.prop_a_pass = Some(batch.property_a());
            report.prop_b_worst_z = Some(batch.property_b(MIN_CLASS).worst_z);
            report.prop_c_worst_z = Some(batch.property_c(MIN_CLASS).worst_z);
            report.prop_d_pass = Some(batch.property_d(&oracle)?);
            report.comparison_pass = Some(batch.compare_b_c());
            report.mean_sum_z = Some(batch.sum_z().mean());
        }
        if exact_drift {
            let game = GameConfig::new(m, n)?;
            let strategy = spec.build(&game)?;
            report.max_drift = Some(drift_step_check(&game, strategy.as_ref(), &oracle)?.max_drift);
        }
        Ok(report)
    }

    pub fn pass(&self) -> bool {
        let z_ok = |z: Option<f64>| z.is_none_or(|z| z <= CLASS_Z_LIMIT);
        self.prop_a_pass != Some(false)
            && self.prop_d_pass != Some(false)
            && self.comparison_pass != Some(false)
            && z_ok(self.prop_b_worst_z)
            && z_ok(self.prop_c_worst_z)
            && self.max_drift.is_none_or(|d| d <= DRIFT_TOLERANCE)
    }
}

/// Exact conditional drift of the potentials over the whole probability tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Largest `E(X_{k,t+1} | g_<=t, z_<t) - X_{k,t}` over all conditioning
    /// classes and labels.
    pub max_drift: f64,
    pub classes: usize,
    pub nodes: u64,
    pub pass: bool,
}

/// Cap on `m * n` for [`drift_step_check`]; the tree has up to `4^(mn)` leaves.
pub const DRIFT_TREE_LIMIT: usize = 8;

/// Tolerance for exact-tree identities.
pub const DRIFT_TOLERANCE: f64 = 1e-9;

struct DriftNode {
    strategy: Box<dyn Strategy>,
    history: VisibleHistory,
    z: Vec<bool>,
    c: Vec<u32>,
    weight: f64,
}

/// Walks every `(y, z)` branch of a deterministic strategy's game and
/// evaluates `E(X_{k,t+1} | g_<=t, z_<t) - X_{k,t}` exactly for every label.
pub fn drift_step_check(
    config: &GameConfig,
    strategy: &dyn Strategy,
    oracle: &PosteriorOracle,
) -> Result<DriftReport> {
    if !strategy.is_deterministic() {
        return Err(Error::RandomizedStrategyUnsupported(strategy.name()));
    }
    if config.rounds() > DRIFT_TREE_LIMIT {
        return Err(Error::OracleLimitExceeded { mn: config.rounds(), limit: DRIFT_TREE_LIMIT });
    }
    let params = CouplingParams::new(config.m, config.n)?;
    let n = config.n as usize;
    let zero = Frac::from_integer(0);
    let one = Frac::from_integer(1);
    // (label, guesses g_<=t, z_<t) -> (weight, weighted drift)
    let mut classes = DriftClasses::new();
    let mut nodes = 0u64;
    let mut stack = vec![DriftNode {
        strategy: strategy.box_clone(),
        history: VisibleHistory::new(&config.with_feedback(FeedbackMode::Partial)),
        z: vec![],
        c: vec![0; n],
        weight: 1.0,
    }];
    while let Some(mut node) = stack.pop() {
        if node.history.len() == config.rounds() {
            continue;
        }
        nodes += 1;
        let g = node.strategy.next_guess(&node.history)?;
        let q = oracle.hit_probability(node.history.tallies(), g)?;
        let a = node.history.tallies().a(g);
        let p = params.success_probability(a, node.c[g.index()]);
        let mut children = Vec::with_capacity(4);
        // expected value of c(g, t+1) - c(g, t) at this node
        let mut expected_step = 0.0;
        for y in [true, false] {
            let py = if y { q } else { one - q };
            if py == zero {
                continue;
            }
            let mean = p.map_or(zero, |p| bernoulli_mean(p, q, y));
            for z in [true, false] {
                let pz = if z { mean } else { one - mean };
                if pz == zero {
                    continue;
                }
                let w = frac_f64(&(py * pz));
                expected_step += w * z as u8 as f64;
                children.push((y, z, w));
            }
        }
        let mut guesses: Vec<u32> = node.history.guesses().iter().map(|l| l.get()).collect();
        guesses.push(g.get());
        for k in 0..n {
            let (ak, ck) = (node.history.tallies().guesses()[k], node.c[k]);
            let before = params.potential(ak, ck);
            let drift = if k == g.index() {
                expected_step * params.potential(ak + 1, ck + 1)
                    + (1.0 - expected_step) * params.potential(ak + 1, ck)
                    - before
            } else {
                0.0
            };
            let e = classes.entry((k, guesses.clone(), node.z.clone())).or_insert((0.0, 0.0));
            e.0 += node.weight;
            e.1 += node.weight * drift;
        }
        for (y, z, w) in children {
            let feedback = crate::game::Feedback { guess: g, correct: y, revealed: None };
            let mut strategy = node.strategy.box_clone();
            strategy.observe(&feedback);
            let mut history = node.history.clone();
            history.push(&feedback);
            let mut zs = node.z.clone();
            zs.push(z);
            let mut c = node.c.clone();
            c[g.index()] += z as u32;
            stack.push(DriftNode { strategy, history, z: zs, c, weight: node.weight * w });
        }
        node.z.clear();
    }
    let max_drift = classes
        .values()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, s)| s / w)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DriftReport {
        max_drift,
        classes: classes.len(),
        nodes,
        pass: max_drift <= DRIFT_TOLERANCE,
    })
}
