//! Cross-checks of the exact oracle against brute force over explicit lists
//! of deck orderings, written independently of the library.

use cardguess::game::{GameConfig, Label, TallyTable};
use cardguess::oracle::{
    number_of_orderings, optimal_value, optimal_value_complete, strategy_exact_value,
    strategy_value_by_orderings, verify_hit_bound, verify_hit_bound_raw, PosteriorOracle,
};
use cardguess::strategy::StrategySpec;
use num_rational::Ratio;
use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};

/// All arrangements of `m` copies of `0..n`, built by recursion on counts.
fn orderings(m: u32, n: u32) -> Vec<Vec<usize>> {
    fn go(left: &mut Vec<u32>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.iter().all(|&c| c == 0) {
            out.push(prefix.clone());
            return;
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

fn consistent<'a>(all: &'a [Vec<usize>], g: &[usize], y: &[bool]) -> Vec<&'a Vec<usize>> {
    all.iter()
        .filter(|o| g.iter().zip(y).enumerate().all(|(i, (&gi, &yi))| (o[i] == gi) == yi))
        .collect()
}

/// Best total hits summed over the orderings in `set`, from round `t` on.
fn brute_optimum(set: &[&Vec<usize>], t: usize, n: usize) -> u64 {
    if set.is_empty() || t == set[0].len() {
        return 0;
    }
    (0..n)
        .map(|k| {
            let (hit, miss): (Vec<&Vec<usize>>, Vec<&Vec<usize>>) = set.iter().partition(|o| o[t] == k);
            hit.len() as u64 + brute_optimum(&hit, t + 1, n) + brute_optimum(&miss, t + 1, n)
        })
        .max()
        .unwrap()
}

#[test]
fn ordering_lists_have_multinomial_size() {
    for (m, n) in [(1, 1), (2, 3), (3, 2), (1, 5), (2, 4)] {
        assert_eq!(orderings(m, n).len() as u128, number_of_orderings(m, n));
    }
}

#[test]
fn optimal_values_match_brute_force() {
    for (m, n) in [(1, 1), (2, 1), (1, 2), (1, 3), (2, 2), (1, 4), (2, 3), (3, 2), (4, 2)] {
        let all = orderings(m, n);
        let refs: Vec<&Vec<usize>> = all.iter().collect();
        let brute = Ratio::new(brute_optimum(&refs, 0, n as usize) as i128, all.len() as i128);
        assert_eq!(optimal_value(m, n).unwrap().as_ratio(), brute, "({m},{n})");
    }
}

#[test]
fn golden_values() {
    assert_eq!(optimal_value(1, 1).unwrap().as_ratio(), Ratio::from_integer(1));
    assert_eq!(optimal_value(1, 2).unwrap().as_ratio(), Ratio::new(3, 2));
    assert_eq!(optimal_value(1, 3).unwrap().as_ratio(), Ratio::new(5, 3));
}

#[test]
fn exact_greedy_and_optimum_at_one_three() {
    let config = GameConfig::new(1, 3).unwrap();
    let greedy = strategy_exact_value(StrategySpec::ExactGreedy.build(&config).unwrap().as_ref(), &config).unwrap();
    let best = optimal_value(1, 3).unwrap();
    assert!(greedy.as_ratio() <= best.as_ratio());
    let by_orderings =
        strategy_value_by_orderings(StrategySpec::ExactGreedy.build(&config).unwrap().as_ref(), &config).unwrap();
    assert_eq!(greedy.as_ratio(), by_orderings.as_ratio());
}

#[test]
fn tree_walk_matches_ordering_average() {
    for (m, n) in [(1, 2), (1, 3), (2, 2), (2, 3), (1, 5), (3, 3)] {
        let config = GameConfig::new(m, n).unwrap();
        let mut specs: Vec<StrategySpec> = (1..=n).map(StrategySpec::FixedLabel).collect();
        specs.extend([StrategySpec::StickyAdvance, StrategySpec::GreedyBound, StrategySpec::ExactGreedy]);
        for spec in specs {
            let s = spec.build(&config).unwrap();
            let a = strategy_exact_value(s.as_ref(), &config).unwrap().as_ratio();
            let b = strategy_value_by_orderings(s.as_ref(), &config).unwrap().as_ratio();
            assert_eq!(a, b, "{spec} ({m},{n})");
            if let StrategySpec::FixedLabel(_) = spec {
                assert_eq!(a, Ratio::from_integer(m as i128));
            }
        }
    }
}

#[test]
fn complete_feedback_dominates_partial() {
    for (m, n) in [(1, 2), (1, 3), (2, 2), (1, 4), (2, 3), (3, 2), (4, 2), (2, 4)] {
        assert!(optimal_value_complete(m, n).unwrap().as_ratio() >= optimal_value(m, n).unwrap().as_ratio());
    }
}

#[test]
fn deduplicated_bound_check_agrees_with_raw_walk() {
    for (m, n) in [(1, 2), (1, 3), (2, 2), (1, 4), (2, 3), (3, 2)] {
        let fast = verify_hit_bound(m, n).unwrap();
        let raw = verify_hit_bound_raw(m, n).unwrap();
        assert!(fast.pass && raw.pass, "({m},{n})");
        assert!((fast.max_slack - raw.max_slack).abs() < 1e-15);
    }
    // (1,1): the bound is attained at the only history
    assert_eq!(verify_hit_bound(1, 1).unwrap().max_slack, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn posterior_matches_filtered_orderings(
        (m, n) in proptest::sample::select(vec![(1u32, 3u32), (2, 2), (2, 3), (1, 6), (3, 2), (2, 4)]),
        deck_pick in 0usize..10_000,
        guess_seed in proptest::collection::vec(0usize..8, 12),
        len in 0usize..12,
    ) {
        let all = orderings(m, n);
        let deck = &all[deck_pick % all.len()];
        let len = len.min(deck.len() - 1);
        let g: Vec<usize> = guess_seed[..len].iter().map(|&x| x % n as usize).collect();
        let y: Vec<bool> = g.iter().enumerate().map(|(i, &gi)| deck[i] == gi).collect();
        let set = consistent(&all, &g, &y);
        let mut tallies = TallyTable::new(n);
        for (&gi, &yi) in g.iter().zip(&y) {
            tallies.record(Label::from_index(gi), yi);
        }
        let counts = PosteriorOracle::new(m, n).unwrap().next_card_counts(&tallies).unwrap();
        prop_assert_eq!(counts.total, set.len() as u128);
        for k in 0..n as usize {
            let expect = set.iter().filter(|o| o[len] == k).count() as u128;
            prop_assert_eq!(counts.by_label[k], expect);
        }
    }
}
