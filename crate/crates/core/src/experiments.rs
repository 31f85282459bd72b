//! Monte Carlo estimates, bound checks and parameter sweeps.
//!
//! Game `i` of a run with master seed `s` is played from
//! `GameConfig::seed = mix(s, i)`, so every game is fixed by its index alone.
//! Games are processed in fixed-size chunks; chunk accumulators are merged
//! in chunk order, which makes every report independent of the number of
//! worker threads.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{run_coupled_batch, y_cap, CoupledBatch};
use crate::error::{Error, Result};
use crate::game::{payoff, play_game, FeedbackMode, GameConfig};
use crate::oracle::{optimal_value_complete, strategy_exact_value};
use crate::rng;
use crate::stats::{RunningStats, Z95};
use crate::strategy::StrategySpec;

/// Games per work unit.
pub const CHUNK: usize = 512;

/// Estimated expected payoff of one strategy on one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub config: GameConfig,
    pub strategy: StrategySpec,
    pub trials: u64,
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    /// Games whose payoff exceeded the cap `Y`.
    pub above_cap: u64,
}

impl EstimateReport {
    fn from_stats(config: &GameConfig, strategy: StrategySpec, stats: &RunningStats, above_cap: u64) -> Self {
        let std_error = stats.std_error();
        EstimateReport {
            config: *config,
            strategy,
            trials: stats.count(),
            mean: stats.mean(),
            std_error,
            ci95: (stats.mean() - Z95 * std_error, stats.mean() + Z95 * std_error),
            above_cap,
        }
    }

    pub fn excess(&self) -> f64 {
        self.mean - self.config.m as f64
    }
}

/// Plays `trials` games of `spec` from `master_seed`; `config.seed` is ignored.
pub fn run_monte_carlo(
    config: &GameConfig,
    spec: StrategySpec,
    trials: u64,
    master_seed: u64,
) -> Result<EstimateReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let factory = spec.factory(config)?;
    let cap = y_cap(config.m, config.n);
    let chunks = (trials as usize).div_ceil(CHUNK);
    let parts: Vec<Result<(RunningStats, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = (chunk * CHUNK) as u64;
            let hi = (lo + CHUNK as u64).min(trials);
            let mut stats = RunningStats::new();
            let mut above = 0;
            for i in lo..hi {
                let game = config.with_seed(rng::mix(master_seed, i));
                let mut strategy = factory.instantiate(&game);
                let score = payoff(&play_game(&game, strategy.as_mut())?)?;
                stats.push(score as f64);
                above += (score as u64 > cap) as u64;
            }
            Ok((stats, above))
        })
        .collect();
    let mut stats = RunningStats::new();
    let mut above = 0;
    for part in parts {
        let (s, a) = part?;
        stats.merge(&s);
        above += a;
    }
    Ok(EstimateReport::from_stats(config, spec, &stats, above))
}

/// Which quantity a [`BoundCheck`] compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Expected payoff at most `m + 500 sqrt(m)` once `n >= 1200 sqrt(m)`.
    #[serde(rename = "upper-500")]
    Upper500,
    /// Some strategy beats `m` when `n >= 8m`.
    #[serde(rename = "lower-40")]
    Lower40,
    /// Growth of the complete-feedback excess like `sqrt(m log m)`.
    CompleteTrend,
    /// `|E(sum z) - m| <= 300 sqrt(m)`.
    #[serde(rename = "z-deviation-300")]
    ZDeviation300,
    /// `P(sum y > Y) <= 2 exp(-sqrt(m) n / 72)`.
    #[serde(rename = "tail-72")]
    Tail72,
    /// Late-round sum of the coupled process.
    LateRounds,
    /// Per-round early terms of the coupled process.
    EarlyRounds,
    /// `E(X_{k, tau}) <= 0` for each label.
    OptionalStopping,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Upper500 => "upper-500",
            BoundKind::Lower40 => "lower-40",
            BoundKind::CompleteTrend => "complete-trend",
            BoundKind::ZDeviation300 => "z-deviation-300",
            BoundKind::Tail72 => "tail-72",
            BoundKind::LateRounds => "late-rounds",
            BoundKind::EarlyRounds => "early-rounds",
            BoundKind::OptionalStopping => "optional-stopping",
        }
    }
}

/// An observed value against a threshold. `pass` is `None` when the
/// configuration lies outside the bound's hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub kind: BoundKind,
    pub m: u32,
    pub n: u32,
    pub threshold: f64,
    pub observed: f64,
    pub pass: Option<bool>,
    /// Values reported alongside the check without being asserted.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reported: BTreeMap<String, f64>,
}

impl BoundCheck {
    fn new(kind: BoundKind, m: u32, n: u32, threshold: f64, observed: f64, pass: Option<bool>) -> Self {
        BoundCheck { kind, m, n, threshold, observed, pass, reported: BTreeMap::new() }
    }

    fn report(mut self, key: &str, value: f64) -> Self {
        self.reported.insert(key.to_string(), value);
        self
    }

    pub fn in_scope(&self) -> bool {
        self.pass.is_some()
    }

    pub fn passed(&self) -> bool {
        self.pass == Some(true)
    }
}

/// Whether `n >= 1200 sqrt(m)`, in integers.
pub fn upper_bound_in_scope(m: u32, n: u32) -> bool {
    (n as u64).pow(2) >= 1200u64.pow(2) * m as u64
}

/// `ci95.hi <= m + 500 sqrt(m)`, for `n >= 1200 sqrt(m)`.
pub fn check_upper_bound(report: &EstimateReport) -> BoundCheck {
    let (m, n) = (report.config.m, report.config.n);
    let threshold = m as f64 + 500.0 * (m as f64).sqrt();
    let pass = upper_bound_in_scope(m, n).then_some(report.ci95.1 <= threshold);
    BoundCheck::new(BoundKind::Upper500, m, n, threshold, report.ci95.1, pass)
        .report("excess", report.excess())
}

/// `ci95.lo > m`, for `n >= 8m`. The `sqrt(m)/40` benchmark is reported only.
pub fn check_lower_direction(report: &EstimateReport) -> BoundCheck {
    let (m, n) = (report.config.m, report.config.n);
    let pass = (n as u64 >= 8 * m as u64).then_some(report.ci95.0 > m as f64);
    BoundCheck::new(BoundKind::Lower40, m, n, m as f64, report.ci95.0, pass)
        .report("excess", report.excess())
        .report("benchmark", (m as f64).sqrt() / 40.0)
}

/// `|mean(sum z) - m| + 3 sigma <= 300 sqrt(m)` over a coupled batch.
/// Single-label decks are outside the scope.
pub fn check_z_deviation(batch: &CoupledBatch) -> BoundCheck {
    let (m, n) = (batch.params.m, batch.params.n);
    let stats = batch.sum_z();
    let deviation = (stats.mean() - m as f64).abs();
    let observed = deviation + 3.0 * stats.std_error();
    let threshold = 300.0 * (m as f64).sqrt();
    BoundCheck::new(BoundKind::ZDeviation300, m, n, threshold, observed, (n >= 2).then_some(observed <= threshold))
        .report("deviation", deviation)
        .report("mean_sum_z", stats.mean())
        .report("std_error", stats.std_error())
}

fn moment_bound(batch: &CoupledBatch) -> f64 {
    (6.0 * batch.sum_z().mean() + 8.0 * batch.params.m as f64).sqrt()
}

/// `|E sum (1 - w_i)(z_i - 1/n)| + 3 sigma <= 2 sqrt(6 E sum z + 8m)`.
pub fn check_late_rounds(batch: &CoupledBatch) -> BoundCheck {
    let stats = batch.late_sum();
    let observed = stats.mean().abs() + 3.0 * stats.std_error();
    let threshold = 2.0 * moment_bound(batch);
    BoundCheck::new(BoundKind::LateRounds, batch.params.m, batch.params.n, threshold, observed, Some(observed <= threshold))
        .report("mean", stats.mean())
}

/// `max_t |E w_t (z_t - 1/n)| + 3 sigma <= 4/(mn) sqrt(6 E sum z + 8m)`.
pub fn check_early_rounds(batch: &CoupledBatch) -> BoundCheck {
    let observed = batch
        .early_terms()
        .iter()
        .map(|s| s.mean().abs() + 3.0 * s.std_error())
        .fold(0.0, f64::max);
    let threshold = 4.0 / batch.params.rounds() as f64 * moment_bound(batch);
    BoundCheck::new(BoundKind::EarlyRounds, batch.params.m, batch.params.n, threshold, observed, Some(observed <= threshold))
}

/// `max_k mean(X_{k, tau}) - 3 sigma <= 0`, under both stopping rules.
pub fn check_optional_stopping(batch: &CoupledBatch) -> BoundCheck {
    use crate::coupling::TauRule;
    let mut worst = f64::NEG_INFINITY;
    let mut check = BoundCheck::new(BoundKind::OptionalStopping, batch.params.m, batch.params.n, 0.0, 0.0, None);
    for (name, rule) in [("first_late", TauRule::FirstLate), ("first_late_of_label", TauRule::FirstLateOfLabel)] {
        let rule_worst = batch
            .stopped_potential(rule)
            .iter()
            .map(|s| s.mean() - 3.0 * s.std_error())
            .fold(f64::NEG_INFINITY, f64::max);
        check = check.report(name, rule_worst);
        worst = worst.max(rule_worst);
    }
    check.observed = worst;
    check.pass = Some(worst <= 1e-12);
    check
}

/// Frequency of `sum y > Y` against `min(1, 2 exp(-sqrt(m) n / 72))`,
/// passing when the frequency is at most the bound plus three standard errors.
pub fn check_tail(report: &EstimateReport) -> BoundCheck {
    let (m, n) = (report.config.m, report.config.n);
    let trials = report.trials as f64;
    let freq = report.above_cap as f64 / trials;
    let sigma = (freq * (1.0 - freq) / trials).sqrt();
    let threshold = (2.0 * (-(m as f64).sqrt() * n as f64 / 72.0).exp()).min(1.0);
    BoundCheck::new(BoundKind::Tail72, m, n, threshold, freq, Some(freq <= threshold + 3.0 * sigma))
        .report("occurrences", report.above_cap as f64)
        .report("cap", y_cap(m, n) as f64)
}

/// Complete-feedback scaling `(pi / sqrt 2) sqrt(m ln m)`.
pub fn complete_feedback_scale(m: u32) -> f64 {
    let m = m as f64;
    PI / SQRT_2 * (m * m.ln()).sqrt()
}

/// One row of [`complete_feedback_trend`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub m: u32,
    pub report: EstimateReport,
    pub excess: f64,
    /// `None` at `m = 1`, where the scale vanishes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    pub increasing: bool,
    pub ratios_in_range: bool,
}

impl TrendReport {
    pub fn pass(&self) -> bool {
        self.increasing && self.ratios_in_range
    }

    pub fn as_check(&self) -> BoundCheck {
        let last = self.rows.last();
        let (m, ratio) = last.map_or((0, 0.0), |r| (r.m, r.ratio.unwrap_or(0.0)));
        let mut check = BoundCheck::new(BoundKind::CompleteTrend, m, m, 3.0, ratio, Some(self.pass()));
        for row in &self.rows {
            check = check.report(&format!("excess_m{}", row.m), row.excess);
            if let Some(r) = row.ratio {
                check = check.report(&format!("ratio_m{}", row.m), r);
            }
        }
        check
    }
}

/// Admissible range for the complete-feedback ratio.
pub const TREND_RATIO_RANGE: (f64, f64) = (0.3, 3.0);

/// `greedy-remaining` under complete feedback at `m = n` for each `m`.
/// Row `j` uses master seed `mix(master_seed, j)`.
pub fn complete_feedback_trend(m_list: &[u32], trials: u64, master_seed: u64) -> Result<TrendReport> {
    let mut rows = Vec::with_capacity(m_list.len());
    for (j, &m) in m_list.iter().enumerate() {
        let config = GameConfig::new(m, m)?.with_feedback(FeedbackMode::Complete);
        let report = run_monte_carlo(&config, StrategySpec::GreedyRemaining, trials, rng::mix(master_seed, j as u64))?;
        let excess = report.excess();
        let ratio = (m > 1).then(|| excess / complete_feedback_scale(m));
        rows.push(TrendRow { m, report, excess, ratio });
    }
    let increasing = rows.windows(2).all(|w| w[1].excess > w[0].excess);
    let (lo, hi) = TREND_RATIO_RANGE;
    let ratios_in_range = rows.iter().filter_map(|r| r.ratio).all(|r| (lo..=hi).contains(&r));
    Ok(TrendReport { rows, increasing, ratios_in_range })
}

/// Monte Carlo mean against the exact expected payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementCheck {
    pub report: EstimateReport,
    pub exact: f64,
    pub z: f64,
    pub pass: bool,
}

/// Exact expected payoff of `spec` on an oracle-sized deck. A uniformly
/// random guess is independent of the card, so that strategy scores `m`.
pub fn exact_expected_payoff(config: &GameConfig, spec: StrategySpec) -> Result<f64> {
    match spec {
        StrategySpec::UniformRandom => Ok(config.m as f64),
        StrategySpec::GreedyRemaining => Ok(optimal_value_complete(config.m, config.n)?.as_f64()),
        _ => Ok(strategy_exact_value(spec.build(config)?.as_ref(), config)?.as_f64()),
    }
}

/// Mean within `5 sigma` of the exact value. A zero-variance estimate must
/// match to 1e-9.
pub fn check_oracle_agreement(
    config: &GameConfig,
    spec: StrategySpec,
    trials: u64,
    master_seed: u64,
) -> Result<AgreementCheck> {
    let exact = exact_expected_payoff(config, spec)?;
    let report = run_monte_carlo(config, spec, trials, master_seed)?;
    let diff = (report.mean - exact).abs();
    let z = if report.std_error > 0.0 {
        diff / report.std_error
    } else if diff <= 1e-9 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(AgreementCheck { report, exact, z, pass: z <= 5.0 })
}

/// Runs `trials` coupled games of `spec` and evaluates every coupled bound.
pub fn coupled_bound_checks(m: u32, n: u32, spec: StrategySpec, trials: usize, master_seed: u64) -> Result<Vec<BoundCheck>> {
    let batch = run_coupled_batch(m, n, spec, trials, master_seed)?;
    Ok(vec![
        check_z_deviation(&batch),
        check_late_rounds(&batch),
        check_early_rounds(&batch),
        check_optional_stopping(&batch),
    ])
}

/// A Cartesian grid of sweep rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub m: Vec<u32>,
    pub n: Vec<u32>,
    pub strategies: Vec<StrategySpec>,
    pub trials: u64,
    #[serde(default = "partial")]
    pub feedback: FeedbackMode,
}

fn partial() -> FeedbackMode {
    FeedbackMode::Partial
}

impl GridSpec {
    /// Rows in order `m`, then `n`, then strategy.
    pub fn rows(&self) -> Vec<(u32, u32, StrategySpec)> {
        let mut rows = Vec::new();
        for &m in &self.m {
            for &n in &self.n {
                for &s in &self.strategies {
                    rows.push((m, n, s));
                }
            }
        }
        rows
    }
}

/// One sweep row. Failed rows carry `error` and no numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub row: usize,
    pub m: u32,
    pub n: u32,
    pub strategy: StrategySpec,
    pub trials: u64,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub bound_kind: Option<BoundKind>,
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Header of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 11] =
    ["m", "n", "strategy", "trials", "mean", "std_error", "ci_lo", "ci_hi", "bound_kind", "threshold", "pass"];

impl SweepRow {
    /// CSV fields in [`SWEEP_COLUMNS`] order; a failed row reads `error` in
    /// its last two columns.
    pub fn csv_record(&self) -> Vec<String> {
        let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let (kind, pass) = match &self.error {
            Some(_) => ("error".to_string(), "error".to_string()),
            None => (
                self.bound_kind.map(|k| k.as_str().to_string()).unwrap_or_default(),
                self.pass.map(|p| p.to_string()).unwrap_or_default(),
            ),
        };
        vec![
            self.m.to_string(),
            self.n.to_string(),
            self.strategy.to_string(),
            self.trials.to_string(),
            num(self.mean),
            num(self.std_error),
            num(self.ci_lo),
            num(self.ci_hi),
            kind,
            num(self.threshold),
            pass,
        ]
    }

    pub fn failed(&self) -> bool {
        self.error.is_some() || self.pass == Some(false)
    }
}

/// Runs grid rows `from_row..`; row `r` uses master seed `mix(master_seed, r)`.
/// Each row carries the upper-bound check when in scope, else the
/// lower-direction check when in scope.
pub fn sweep(grid: &GridSpec, master_seed: u64, from_row: usize) -> Vec<SweepRow> {
    grid.rows()
        .into_iter()
        .enumerate()
        .skip(from_row)
        .map(|(row, (m, n, strategy))| {
            let mut out = SweepRow {
                row,
                m,
                n,
                strategy,
                trials: grid.trials,
                mean: None,
                std_error: None,
                ci_lo: None,
                ci_hi: None,
                bound_kind: None,
                threshold: None,
                pass: None,
                error: None,
            };
            let result = GameConfig::new(m, n).and_then(|c| {
                run_monte_carlo(&c.with_feedback(grid.feedback), strategy, grid.trials, rng::mix(master_seed, row as u64))
            });
            match result {
                Ok(report) => {
                    out.mean = Some(report.mean);
                    out.std_error = Some(report.std_error);
                    out.ci_lo = Some(report.ci95.0);
                    out.ci_hi = Some(report.ci95.1);
                    let upper = check_upper_bound(&report);
                    let lower = check_lower_direction(&report);
                    let check = if upper.in_scope() {
                        Some(upper)
                    } else if lower.in_scope() {
                        Some(lower)
                    } else {
                        None
                    };
                    if let Some(check) = check {
                        out.bound_kind = Some(check.kind);
                        out.threshold = Some(check.threshold);
                        out.pass = check.pass;
                    }
                }
                Err(e) => out.error = Some(e.to_string()),
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: u32, n: u32) -> GameConfig {
        GameConfig::new(m, n).unwrap()
    }

    #[test]
    fn bound_kind_json_matches_csv_name() {
        use BoundKind::*;
        for kind in [Upper500, Lower40, CompleteTrend, ZDeviation300, Tail72, LateRounds, EarlyRounds, OptionalStopping] {
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.as_str()));
            assert_eq!(serde_json::from_str::<BoundKind>(&json).unwrap(), kind);
        }
    }

    #[test]
    fn fixed_label_has_no_variance() {
        for (m, n) in [(1, 2), (3, 5), (4, 40)] {
            let r = run_monte_carlo(&cfg(m, n), StrategySpec::FixedLabel(1), 300, 5).unwrap();
            assert_eq!((r.mean, r.std_error, r.trials), (m as f64, 0.0, 300));
            assert_eq!(r.ci95, (m as f64, m as f64));
        }
    }

    #[test]
    fn reports_are_reproducible_and_thread_independent() {
        let config = cfg(3, 7);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_monte_carlo(&config, StrategySpec::UniformRandom, 2000, 11).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_eq!(a, run(4));
        assert_ne!(a, run_monte_carlo(&config, StrategySpec::UniformRandom, 2000, 12).unwrap());
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(run_monte_carlo(&cfg(1, 2), StrategySpec::StickyAdvance, 0, 1).is_err());
    }

    fn report(m: u32, n: u32, mean: f64, half: f64) -> EstimateReport {
        EstimateReport {
            config: cfg(m, n),
            strategy: StrategySpec::StickyAdvance,
            trials: 100,
            mean,
            std_error: half / Z95,
            ci95: (mean - half, mean + half),
            above_cap: 0,
        }
    }

    #[test]
    fn upper_bound_scope_and_threshold() {
        assert!(upper_bound_in_scope(1, 1200));
        assert!(!upper_bound_in_scope(1, 1199));
        assert!(upper_bound_in_scope(4, 2400));
        assert!(!upper_bound_in_scope(4, 2399));
        let c = check_upper_bound(&report(1, 1199, 2.0, 0.1));
        assert_eq!(c.pass, None);
        let c = check_upper_bound(&report(4, 2400, 5.0, 0.1));
        assert_eq!((c.threshold, c.pass), (1004.0, Some(true)));
        assert_eq!(check_upper_bound(&report(1, 1200, 600.0, 0.1)).pass, Some(false));
    }

    #[test]
    fn lower_direction_gate_and_negative_control() {
        assert_eq!(check_lower_direction(&report(2, 15, 3.0, 0.1)).pass, None);
        let fixed = run_monte_carlo(&cfg(2, 16), StrategySpec::FixedLabel(1), 50, 1).unwrap();
        let c = check_lower_direction(&fixed);
        assert_eq!(c.pass, Some(false));
        assert_eq!(c.reported["excess"], 0.0);
        assert_eq!(c.reported["benchmark"], 2f64.sqrt() / 40.0);
    }

    #[test]
    fn tail_examples() {
        let r = run_monte_carlo(&cfg(1, 6), StrategySpec::FixedLabel(1), 200, 3).unwrap();
        let c = check_tail(&r);
        assert_eq!((c.observed, c.pass), (0.0, Some(true)));
        // Y = 0 at (1, 2) and every game scores at least one
        let r = run_monte_carlo(&cfg(1, 2), StrategySpec::ExactGreedy, 200, 3).unwrap();
        let c = check_tail(&r);
        assert_eq!(c.observed, 1.0);
        assert!((c.threshold - 1.0).abs() < 1e-15);
        assert_eq!(c.pass, Some(true));
    }

    #[test]
    fn trend_at_one() {
        let t = complete_feedback_trend(&[1], 20, 2).unwrap();
        assert_eq!(t.rows[0].excess, 0.0);
        assert_eq!(t.rows[0].ratio, None);
        assert!(t.pass());
    }

    #[test]
    fn z_deviation_gate() {
        let batch = run_coupled_batch(2, 1, StrategySpec::StickyAdvance, 10, 1).unwrap();
        assert_eq!(check_z_deviation(&batch).pass, None);
        let batch = run_coupled_batch(1, 2, StrategySpec::StickyAdvance, 2000, 1).unwrap();
        let c = check_z_deviation(&batch);
        assert_eq!((c.threshold, c.pass), (300.0, Some(true)));
    }

    #[test]
    fn agreement_on_small_decks() {
        for (m, n) in [(1, 2), (2, 2), (1, 3)] {
            for spec in StrategySpec::PARTIAL {
                let c = check_oracle_agreement(&cfg(m, n), spec, 4000, 21).unwrap();
                assert!(c.pass, "{spec} ({m},{n}): {c:?}");
            }
        }
    }

    #[test]
    fn sweep_shapes() {
        let grid = GridSpec {
            m: vec![1, 2],
            n: vec![2, 16],
            strategies: vec![StrategySpec::StickyAdvance],
            trials: 50,
            feedback: FeedbackMode::Partial,
        };
        let rows = sweep(&grid, 4, 0);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows, sweep(&grid, 4, 0));
        assert_eq!(&rows[2..], &sweep(&grid, 4, 2)[..]);
        assert_eq!(rows[1].bound_kind, Some(BoundKind::Lower40));
        assert_eq!(rows[0].bound_kind, None);
        let empty = GridSpec { m: vec![], ..grid.clone() };
        assert!(sweep(&empty, 4, 0).is_empty());
        let bad = GridSpec { strategies: vec![StrategySpec::FixedLabel(99)], ..grid };
        let rows = sweep(&bad, 4, 0);
        assert!(rows.iter().all(|r| r.error.is_some() && r.failed()));
        assert_eq!(rows[0].csv_record()[10], "error");
    }

    #[test]
    fn grid_json() {
        let g: GridSpec = serde_json::from_str(r#"{"m":[1],"n":[2,3],"strategies":["sticky","fixed:2"],"trials":10}"#).unwrap();
        assert_eq!(g.rows().len(), 4);
        assert_eq!(g.feedback, FeedbackMode::Partial);
        assert!(serde_json::from_str::<GridSpec>(r#"{"m":[1],"n":[2],"strategies":["nope"],"trials":1}"#).is_err());
    }
}
