//! Runs the eleven acceptance criteria with a pinned seed and prints one
//! line per criterion. Exits non-zero if any criterion fails.

use cardguess::suite::{run_suite, SuiteKind};

const SEED: u64 = 1;

fn main() {
    println!("acceptance suite, seed {SEED}");
    let results = run_suite(SuiteKind::All, SEED, |r| println!("{r}"));
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
