//! The acceptance suite: eleven numbered criteria, each a self-contained
//! runner returning a [`CriterionResult`].
//!
//! Criteria 3, 5 and 9 share one coupled batch at `(2, 3)`; [`CouplingSuite`]
//! builds it once.

use std::fmt;
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::coupling::{drift_step_check, run_coupled_batch, CoupledBatch};
use crate::error::Result;
use crate::experiments::{
    check_early_rounds, check_late_rounds, check_lower_direction, check_optional_stopping,
    check_oracle_agreement, check_tail, check_upper_bound, check_z_deviation,
    complete_feedback_trend, run_monte_carlo, sweep, GridSpec,
};
use crate::game::{FeedbackMode, GameConfig};
use crate::oracle::{
    optimal_value, optimal_value_raw, strategy_exact_value, verify_hit_bound, PosteriorOracle,
};
use crate::rng;
use crate::strategy::StrategySpec;

/// Trial count shared by the large Monte Carlo criteria.
pub const BIG_TRIALS: usize = 100_000;

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<28} {} ({:.1}s) {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

fn timed(id: u8, name: &str, body: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let start = Instant::now();
    let (pass, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name: name.into(), pass, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Every `(m, n)` with `mn <= max_rounds`.
pub fn small_configs(max_rounds: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for m in 1..=max_rounds {
        for n in 1..=max_rounds / m {
            out.push((m, n));
        }
    }
    out
}

/// 1: the hit-probability bound over every reachable history with `mn <= 9`.
pub fn criterion_1() -> CriterionResult {
    timed(1, "hit-probability bound", || {
        let mut histories = 0u64;
        let mut worst: f64 = f64::NEG_INFINITY;
        let mut failures = Vec::new();
        for (m, n) in small_configs(9) {
            let v = verify_hit_bound(m, n)?;
            histories += v.histories;
            worst = worst.max(v.max_slack);
            if !v.pass {
                failures.push(format!("({m},{n})"));
            }
        }
        Ok((
            failures.is_empty(),
            format!("histories={histories} max_slack={worst:.3e} failures=[{}]", failures.join(",")),
        ))
    })
}

/// Deterministic strategies compared in criterion 2 at `(m, n)`.
fn deterministic_specs(n: u32) -> Vec<StrategySpec> {
    let mut specs: Vec<StrategySpec> = (1..=n).map(StrategySpec::FixedLabel).collect();
    specs.extend([StrategySpec::StickyAdvance, StrategySpec::GreedyBound, StrategySpec::ExactGreedy]);
    specs
}

/// 2: golden optimal values and strategy values below the optimum.
pub fn criterion_2() -> CriterionResult {
    timed(2, "optimal values", || {
        let mut notes = Vec::new();
        let v11 = optimal_value(1, 1)?.as_ratio();
        let ok11 = v11 == Ratio::from_integer(1);
        let v12 = optimal_value(1, 2)?.as_f64();
        let ok12 = (v12 - 1.5).abs() <= 1e-12;
        let canon = optimal_value(1, 3)?.as_f64();
        let raw = optimal_value_raw(1, 3)?.as_f64();
        let ok13 = (canon - raw).abs() <= 1e-12;
        notes.push(format!("V(1,1)={v11} V(1,2)={v12} V(1,3)={canon}/{raw}"));
        let mut below = true;
        for (m, n) in [(1, 2), (1, 3), (2, 2)] {
            let config = GameConfig::new(m, n)?;
            let best = optimal_value(m, n)?.as_ratio();
            for spec in deterministic_specs(n) {
                let v = strategy_exact_value(spec.build(&config)?.as_ref(), &config)?.as_ratio();
                if v > best {
                    below = false;
                    notes.push(format!("{spec} exceeds optimum at ({m},{n})"));
                }
            }
        }
        Ok((ok11 && ok12 && ok13 && below, notes.join("; ")))
    })
}

/// The coupled batch at `(2, 3)` shared by criteria 3, 5 and 9.
pub struct CouplingSuite {
    pub batch: CoupledBatch,
    pub oracle: PosteriorOracle,
    pub seconds: f64,
}

impl CouplingSuite {
    /// `greedy-bound` at `(2, 3)` over `trials` games.
    pub fn new(trials: usize, master_seed: u64) -> Result<Self> {
        let start = Instant::now();
        let batch = run_coupled_batch(2, 3, StrategySpec::GreedyBound, trials, master_seed)?;
        let oracle = PosteriorOracle::new(2, 3)?;
        Ok(CouplingSuite { batch, oracle, seconds: start.elapsed().as_secs_f64() })
    }

    /// 3: envelope, class means, conditional correlations and dominance.
    pub fn criterion_3(&self) -> CriterionResult {
        timed(3, "coupling properties (a)-(d)", || {
            let a = self.batch.property_a();
            let d = self.batch.property_d(&self.oracle)?;
            let c = self.batch.property_c(1000);
            let b = self.batch.property_b(1000);
            let pass = a && d && c.worst_z <= 5.0 && b.worst_z <= 5.0 && c.classes > 0 && b.classes > 0;
            Ok((
                pass,
                format!(
                    "trials={} a={a} d={d} c: classes={} worst_z={:.2} b: classes={} worst_z={:.2}",
                    self.batch.trials(),
                    c.classes,
                    c.worst_z,
                    b.classes,
                    b.worst_z
                ),
            ))
        })
    }

    /// 5: `b <= c` or a payoff above the cap, on every trajectory.
    pub fn criterion_5(&self) -> CriterionResult {
        timed(5, "b <= c comparison", || {
            let failing = self.batch.trajectories.iter().filter(|t| !t.compare_b_c()).count();
            Ok((failing == 0, format!("trials={} failing={failing}", self.batch.trials())))
        })
    }
}

/// 4: exact drift of every label's potential at `(1,2)` and `(2,2)`.
pub fn criterion_4() -> CriterionResult {
    timed(4, "exact supermartingale drift", || {
        let mut worst = f64::NEG_INFINITY;
        let mut pass = true;
        for (m, n) in [(1, 2), (2, 2)] {
            let config = GameConfig::new(m, n)?;
            let oracle = PosteriorOracle::new(m, n)?;
            for spec in [StrategySpec::StickyAdvance, StrategySpec::GreedyBound] {
                let r = drift_step_check(&config, spec.build(&config)?.as_ref(), &oracle)?;
                worst = worst.max(r.max_drift);
                pass &= r.pass;
            }
        }
        Ok((pass, format!("max_drift={worst:.3e}")))
    })
}

const FULL_SCALE_CONFIGS: [(u32, u32); 2] = [(1, 1200), (4, 2400)];

/// 6: upper bound at full scale.
pub fn criterion_6(master_seed: u64) -> CriterionResult {
    timed(6, "upper bound at scale", || {
        let mut pass = true;
        let mut notes = Vec::new();
        for (i, &(m, n)) in FULL_SCALE_CONFIGS.iter().enumerate() {
            let config = GameConfig::new(m, n)?;
            for (j, spec) in [StrategySpec::StickyAdvance, StrategySpec::GreedyBound, StrategySpec::UniformRandom]
                .into_iter()
                .enumerate()
            {
                let seed = rng::mix(master_seed, (3 * i + j) as u64);
                let report = run_monte_carlo(&config, spec, 10_000, seed)?;
                let check = check_upper_bound(&report);
                pass &= check.passed();
                notes.push(format!("({m},{n}) {spec}: hi={:.3} excess={:.3} <= {}", check.observed, report.excess(), check.threshold));
            }
        }
        Ok((pass, notes.join("; ")))
    })
}

/// 7: `sticky` beats `m` at `(25, 200)`.
pub fn criterion_7(master_seed: u64) -> CriterionResult {
    timed(7, "lower-bound direction", || {
        let config = GameConfig::new(25, 200)?;
        let report = run_monte_carlo(&config, StrategySpec::StickyAdvance, BIG_TRIALS as u64, master_seed)?;
        let check = check_lower_direction(&report);
        Ok((
            check.passed(),
            format!(
                "mean={:.4} ci_lo={:.4} excess={:.4} benchmark={}",
                report.mean,
                report.ci95.0,
                report.excess(),
                check.reported["benchmark"]
            ),
        ))
    })
}

/// Every strategy that runs at full scale, with its feedback mode.
pub fn scalable_strategies() -> Vec<(StrategySpec, FeedbackMode)> {
    vec![
        (StrategySpec::FixedLabel(1), FeedbackMode::Partial),
        (StrategySpec::StickyAdvance, FeedbackMode::Partial),
        (StrategySpec::UniformRandom, FeedbackMode::Partial),
        (StrategySpec::GreedyBound, FeedbackMode::Partial),
        (StrategySpec::GreedyRemaining, FeedbackMode::Complete),
    ]
}

/// 8: no payoff above `Y` at `(4, 2400)`. `exact-greedy` needs the exact
/// posterior and cannot play a deck this size.
pub fn criterion_8(master_seed: u64, trials: u64) -> CriterionResult {
    timed(8, "tail bound", || {
        let mut pass = true;
        let mut notes = Vec::new();
        for (j, (spec, mode)) in scalable_strategies().into_iter().enumerate() {
            let config = GameConfig::new(4, 2400)?.with_feedback(mode);
            let report = run_monte_carlo(&config, spec, trials, rng::mix(master_seed, j as u64))?;
            let check = check_tail(&report);
            pass &= report.above_cap == 0 && check.passed();
            notes.push(format!("{spec}: {}/{} max_mean={:.2}", report.above_cap, report.trials, report.mean));
        }
        Ok((pass, format!("bound={:.3e}; {}", 2.0 * (-(4f64.sqrt()) * 2400.0 / 72.0).exp(), notes.join("; "))))
    })
}

/// 9: deviation of `E(sum z)` from `m` at `(2,3)` and `(1,2)`.
pub fn criterion_9(suite: &CouplingSuite, master_seed: u64) -> CriterionResult {
    timed(9, "coupled sum deviation", || {
        let other = run_coupled_batch(1, 2, StrategySpec::GreedyBound, suite.batch.trials(), master_seed)?;
        let mut pass = true;
        let mut notes = Vec::new();
        for batch in [&suite.batch, &other] {
            let check = check_z_deviation(batch);
            pass &= check.passed();
            notes.push(format!(
                "({},{}): |dev|={:.4} +3se={:.4} <= {}",
                batch.params.m, batch.params.n, check.reported["deviation"], check.observed, check.threshold
            ));
            for extra in [check_late_rounds(batch), check_early_rounds(batch), check_optional_stopping(batch)] {
                notes.push(format!("{}={:.3}/{:.3}", extra.kind.as_str(), extra.observed, extra.threshold));
            }
        }
        Ok((pass, notes.join("; ")))
    })
}

/// 10: complete-feedback excess grows and sits near its asymptotic scale.
pub fn criterion_10(master_seed: u64) -> CriterionResult {
    timed(10, "complete-feedback trend", || {
        let trend = complete_feedback_trend(&[10, 20, 40], 10_000, master_seed)?;
        let rows: Vec<String> = trend
            .rows
            .iter()
            .map(|r| format!("m={} excess={:.3} ratio={:.3}", r.m, r.excess, r.ratio.unwrap_or(f64::NAN)))
            .collect();
        Ok((trend.pass(), rows.join("; ")))
    })
}

/// Oracle-sized grid for criterion 11.
pub fn agreement_grid() -> Vec<(u32, u32)> {
    vec![(1, 1), (2, 1), (1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (3, 2), (2, 4), (3, 3), (4, 2), (3, 4)]
}

/// 11: Monte Carlo against exact values, and thread-count independence.
pub fn criterion_11(master_seed: u64) -> CriterionResult {
    timed(11, "infrastructure", || {
        let mut worst = 0.0f64;
        let mut failures = Vec::new();
        let mut checked = 0;
        for (i, &(m, n)) in agreement_grid().iter().enumerate() {
            for (j, (spec, mode)) in all_strategies(n).into_iter().enumerate() {
                let config = GameConfig::new(m, n)?.with_feedback(mode);
                let seed = rng::mix(master_seed, (16 * i + j) as u64);
                let c = check_oracle_agreement(&config, spec, 10_000, seed)?;
                worst = worst.max(c.z);
                checked += 1;
                if !c.pass {
                    failures.push(format!("{spec}@({m},{n}) z={:.2}", c.z));
                }
            }
        }
        let identical = thread_independent(master_seed)?;
        Ok((
            failures.is_empty() && identical,
            format!("points={checked} worst_z={worst:.2} thread_independent={identical} failures=[{}]", failures.join(",")),
        ))
    })
}

fn all_strategies(n: u32) -> Vec<(StrategySpec, FeedbackMode)> {
    let mut out: Vec<_> = StrategySpec::PARTIAL.into_iter().map(|s| (s, FeedbackMode::Partial)).collect();
    out.push((StrategySpec::FixedLabel(n), FeedbackMode::Partial));
    out.push((StrategySpec::GreedyRemaining, FeedbackMode::Complete));
    out
}

/// Runs the same experiments on one and on four worker threads and compares
/// the outputs exactly.
pub fn thread_independent(master_seed: u64) -> Result<bool> {
    let run = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::InvalidConfig(e.to_string()))?;
        pool.install(|| {
            let config = GameConfig::new(3, 40)?;
            let mut out = String::new();
            for spec in [StrategySpec::UniformRandom, StrategySpec::GreedyBound] {
                let r = run_monte_carlo(&config, spec, 5000, master_seed)?;
                out += &serde_json::to_string(&r).expect("serializable");
            }
            let batch = run_coupled_batch(2, 3, StrategySpec::UniformRandom, 5000, master_seed)?;
            for t in &batch.trajectories {
                out.extend(t.z().map(|z| if z { '1' } else { '0' }));
            }
            let grid = GridSpec {
                m: vec![1, 2],
                n: vec![8, 16],
                strategies: vec![StrategySpec::UniformRandom, StrategySpec::StickyAdvance],
                trials: 500,
                feedback: FeedbackMode::Partial,
            };
            out += &serde_json::to_string(&sweep(&grid, master_seed, 0)).expect("serializable");
            Ok(out)
        })
    };
    Ok(run(1)? == run(4)?)
}

/// Which criteria a suite covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Bounds,
    Coupling,
    All,
}

impl SuiteKind {
    pub fn ids(&self) -> Vec<u8> {
        match self {
            SuiteKind::Bounds => vec![1, 2, 6, 7, 8, 10, 11],
            SuiteKind::Coupling => vec![3, 4, 5, 9],
            SuiteKind::All => (1..=11).collect(),
        }
    }
}

/// Runs the criteria of `kind` in numeric order, reporting each through
/// `on_result` as it finishes.
pub fn run_suite(kind: SuiteKind, master_seed: u64, mut on_result: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let ids = kind.ids();
    let needs_batch = ids.iter().any(|id| [3, 5, 9].contains(id));
    let suite = needs_batch.then(|| CouplingSuite::new(BIG_TRIALS, rng::mix(master_seed, 3)));
    let mut results = Vec::new();
    for id in ids {
        let r = match (id, &suite) {
            (1, _) => criterion_1(),
            (2, _) => criterion_2(),
            (4, _) => criterion_4(),
            (6, _) => criterion_6(rng::mix(master_seed, 6)),
            (7, _) => criterion_7(rng::mix(master_seed, 7)),
            (8, _) => criterion_8(rng::mix(master_seed, 8), BIG_TRIALS as u64),
            (10, _) => criterion_10(rng::mix(master_seed, 10)),
            (11, _) => criterion_11(rng::mix(master_seed, 11)),
            (_, Some(Err(e))) => CriterionResult {
                id,
                name: "coupled batch".into(),
                pass: false,
                detail: format!("error: {e}"),
                seconds: 0.0,
            },
            (3, Some(Ok(s))) => s.criterion_3(),
            (5, Some(Ok(s))) => s.criterion_5(),
            (9, Some(Ok(s))) => criterion_9(s, rng::mix(master_seed, 9)),
            _ => unreachable!("criterion ids are 1..=11"),
        };
        on_result(&r);
        results.push(r);
    }
    results
}
