//! Exact checks of the coupled process over every deck ordering and every
//! coupled outcome path, using a re-derivation of the construction that
//! shares no code with the library beyond the strategies and the engine.

use std::collections::HashMap;

use cardguess::coupling::{
    drift_step_check, f_lower_bound_check, f_penalty, run_coupled_batch, y_cap, TauRule,
};
use cardguess::game::{play_game_with_deck, DeckState, GameConfig, Label};
use cardguess::oracle::PosteriorOracle;
use cardguess::strategy::StrategySpec;
use rand::{Rng, SeedableRng};

const TOL: f64 = 1e-12;

fn orderings(m: u32, n: u32) -> Vec<Vec<usize>> {
    fn go(left: &mut Vec<u32>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.iter().all(|&c| c == 0) {
            out.push(prefix.clone());
        }
        for k in 0..left.len() {
            if left[k] > 0 {
                left[k] -= 1;
                prefix.push(k);
                go(left, prefix, out);
                prefix.pop();
                left[k] += 1;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut vec![m; n as usize], &mut Vec::new(), &mut out);
    out
}

struct Model {
    m: f64,
    n: f64,
    rounds: usize,
    cap: f64,
}

impl Model {
    fn new(m: u32, n: u32) -> Self {
        let cap = ((m as f64).sqrt() * n as f64 / 6.0 + 1e-9).floor();
        Model { m: m as f64, n: n as f64, rounds: (m * n) as usize, cap }
    }

    fn p(&self, a: usize, c: usize) -> f64 {
        if a as f64 >= self.rounds as f64 - self.cap {
            0.0
        } else {
            (self.m - c as f64) / (self.rounds as f64 - a as f64 - self.cap)
        }
    }

    fn mean(p: f64, q: f64, y: bool) -> f64 {
        let y = y as u8 as f64;
        if p >= q {
            if q >= 1.0 {
                p * y
            } else {
                ((1.0 - p) * y + p - q) / (1.0 - q)
            }
        } else {
            p * y / q
        }
    }

    fn x(&self, a: usize, c: usize) -> f64 {
        let x = c as f64 - a as f64 / self.n;
        let hi = self.cap / self.n;
        let f = if x <= 0.0 {
            x * x
        } else if x < hi {
            0.0
        } else {
            (x - hi) * (x - hi)
        };
        f - 3.0 * c as f64 - 3.0 * a as f64 / self.n
    }
}

type History = (Vec<usize>, Vec<bool>);
type LabelHistory = (usize, Vec<usize>, Vec<bool>);

#[derive(Default)]
struct Tables {
    // (g_<=t, z_<t) -> (mass, mass of z_t = 1, p_t)
    c_classes: HashMap<History, (f64, f64, f64)>,
    // (g_<=t, y_<=t) -> (mass, z_t mass, y_t' masses, joint masses)
    b_classes: HashMap<History, (f64, f64, Vec<f64>, Vec<f64>)>,
    // (k, g_<=t, z_<t) -> (mass, mass-weighted drift)
    drift: HashMap<LabelHistory, (f64, f64)>,
}

fn exact_tables(m: u32, n: u32, spec: StrategySpec) -> Tables {
    let model = Model::new(m, n);
    let config = GameConfig::new(m, n).unwrap();
    let all = orderings(m, n);
    let weight = 1.0 / all.len() as f64;
    let paths: Vec<(Vec<usize>, Vec<bool>)> = all
        .iter()
        .map(|o| {
            let deck = DeckState::from_order(&config, o.iter().map(|&k| Label::from_index(k)).collect()).unwrap();
            let tr = play_game_with_deck(&config, deck, spec.build(&config).unwrap().as_mut()).unwrap();
            (tr.g.iter().map(|l| l.index()).collect(), tr.y)
        })
        .collect();
    let mut tables = Tables::default();
    for (g, y) in &paths {
        // q_t from the paths sharing (g_<t, y_<t), which fixes g_t too
        let q: Vec<f64> = (0..model.rounds)
            .map(|t| {
                let same: Vec<_> = paths.iter().filter(|(g2, y2)| g2[..t] == g[..t] && y2[..t] == y[..t]).collect();
                same.iter().filter(|(_, y2)| y2[t]).count() as f64 / same.len() as f64
            })
            .collect();
        walk(&model, g, y, &q, 0, &mut vec![], &mut vec![0; n as usize], weight, &mut tables);
    }
    tables
}

#[allow(clippy::too_many_arguments)]
fn walk(
    model: &Model,
    g: &[usize],
    y: &[bool],
    q: &[f64],
    t: usize,
    z: &mut Vec<bool>,
    c: &mut Vec<usize>,
    mass: f64,
    tables: &mut Tables,
) {
    if t == model.rounds {
        return;
    }
    let k = g[t];
    let a = g[..t].iter().filter(|&&x| x == k).count();
    let p = model.p(a, c[k]);
    let mean = Model::mean(p, q[t], y[t]);
    assert!((-TOL..=1.0 + TOL).contains(&mean));

    let e = tables.c_classes.entry((g[..=t].to_vec(), z.clone())).or_insert((0.0, 0.0, p));
    assert!((e.2 - p).abs() < TOL, "p_t must be a function of the class");
    e.0 += mass;
    e.1 += mass * mean;

    let later = model.rounds - t - 1;
    let e = tables
        .b_classes
        .entry((g[..=t].to_vec(), y[..=t].to_vec()))
        .or_insert_with(|| (0.0, 0.0, vec![0.0; later], vec![0.0; later]));
    e.0 += mass;
    e.1 += mass * mean;
    for (j, &yf) in y[t + 1..].iter().enumerate() {
        if yf {
            e.2[j] += mass;
            e.3[j] += mass * mean;
        }
    }

    for (label, &cl) in c.iter().enumerate() {
        let ak = g[..t].iter().filter(|&&x| x == label).count();
        let drift = if label == k {
            mean * model.x(ak + 1, cl + 1) + (1.0 - mean) * model.x(ak + 1, cl) - model.x(ak, cl)
        } else {
            0.0
        };
        let e = tables.drift.entry((label, g[..=t].to_vec(), z.clone())).or_insert((0.0, 0.0));
        e.0 += mass;
        e.1 += mass * drift;
    }

    for (bit, pz) in [(true, mean), (false, 1.0 - mean)] {
        if pz <= 0.0 {
            continue;
        }
        z.push(bit);
        c[k] += bit as usize;
        walk(model, g, y, q, t + 1, z, c, mass * pz, tables);
        c[k] -= bit as usize;
        z.pop();
    }
}

const EXACT_CASES: [(u32, u32); 5] = [(1, 2), (2, 2), (1, 4), (2, 3), (1, 6)];
const EXACT_SPECS: [StrategySpec; 3] = [StrategySpec::StickyAdvance, StrategySpec::GreedyBound, StrategySpec::ExactGreedy];

#[test]
fn model_cap_agrees_with_library() {
    for (m, n) in EXACT_CASES {
        assert_eq!(Model::new(m, n).cap as u64, y_cap(m, n));
    }
    assert_eq!(y_cap(1, 6), 1);
}

#[test]
fn class_means_equal_success_probability() {
    for (m, n) in EXACT_CASES {
        for spec in EXACT_SPECS {
            let tables = exact_tables(m, n, spec);
            for ((g, z), (mass, ones, p)) in &tables.c_classes {
                assert!((ones / mass - p).abs() < 1e-9, "{spec} ({m},{n}) g={g:?} z={z:?}");
            }
        }
    }
}

#[test]
fn coupled_bit_uncorrelated_with_future_hits_given_visible_history() {
    for (m, n) in EXACT_CASES {
        for spec in EXACT_SPECS {
            let tables = exact_tables(m, n, spec);
            for (mass, z_mass, y_mass, joint) in tables.b_classes.values() {
                for (ym, jm) in y_mass.iter().zip(joint) {
                    let cov = jm / mass - (z_mass / mass) * (ym / mass);
                    assert!(cov.abs() < 1e-9, "{spec} ({m},{n}) cov={cov}");
                }
            }
        }
    }
}

#[test]
fn drift_matches_library_and_is_nonpositive() {
    for (m, n) in EXACT_CASES {
        let config = GameConfig::new(m, n).unwrap();
        let oracle = PosteriorOracle::new(m, n).unwrap();
        for spec in EXACT_SPECS {
            let tables = exact_tables(m, n, spec);
            let ours = tables.drift.values().map(|(w, s)| s / w).fold(f64::NEG_INFINITY, f64::max);
            let lib = drift_step_check(&config, spec.build(&config).unwrap().as_ref(), &oracle).unwrap();
            assert!(ours <= 1e-9, "{spec} ({m},{n}) drift {ours}");
            assert!((ours - lib.max_drift).abs() < 1e-9, "{spec} ({m},{n}) {ours} vs {}", lib.max_drift);
            // labels other than the guessed one never move
            for ((k, g, _), (_, s)) in &tables.drift {
                if *g.last().unwrap() != *k {
                    assert_eq!(*s, 0.0);
                }
            }
        }
    }
}

#[test]
fn sampled_batches_pass_pathwise_checks() {
    let oracle = PosteriorOracle::new(2, 3).unwrap();
    for spec in [StrategySpec::UniformRandom, StrategySpec::ExactGreedy] {
        let batch = run_coupled_batch(2, 3, spec, 20_000, 5).unwrap();
        assert!(batch.property_a());
        assert!(batch.property_d(&oracle).unwrap());
        assert!(batch.compare_b_c());
        assert!(batch.property_c(1000).worst_z <= 5.0);
        assert!(batch.property_b(1000).worst_z <= 5.0);
        for rule in [TauRule::FirstLate, TauRule::FirstLateOfLabel] {
            for s in batch.stopped_potential(rule) {
                assert!(s.mean() - 3.0 * s.std_error() <= TOL);
            }
        }
    }
}

#[test]
fn coupling_rejects_oversized_decks() {
    assert!(run_coupled_batch(3, 5, StrategySpec::StickyAdvance, 1, 1).is_err());
}

#[test]
fn penalty_bound_on_a_million_points() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for (cap, n) in [(5u64, 10u32), (1, 6), (200, 1200), (0, 3)] {
        let span = 10.0 * (cap.max(1) as f64) / n as f64;
        for _ in 0..250_000 {
            let x = rng.random_range(-span..=span);
            assert!(f_lower_bound_check(x, cap, n), "x={x} Y={cap} n={n}");
        }
        // dense grid, including both kinks
        for i in -2000..=2000 {
            let x = span * i as f64 / 2000.0;
            assert!(f_penalty(x, cap, n) >= (x * x / 2.0 - (cap as f64 / n as f64).powi(2)).max(0.0) - TOL);
        }
    }
}
