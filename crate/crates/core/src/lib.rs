//! A laboratory for the card guessing game with partial feedback.
//!
//! A deck holds `m` copies of each of `n` labels and is perfectly shuffled.
//! The guesser names a label before each card is drawn and is told only
//! whether the guess was right. The crate provides
//!
//! * a game engine with an information barrier between deck and guesser
//!   ([`game`]),
//! * a family of guessing strategies ([`strategy`]),
//! * exact posteriors, optimal values and an exhaustive check of the
//!   hit-probability bound for small decks ([`oracle`]),
//! * the coupled Boolean process, its penalty potential and the per-label
//!   supermartingale, with trajectory and exact-tree diagnostics
//!   ([`coupling`]),
//! * a deterministic parallel Monte Carlo harness and bound checks
//!   ([`experiments`], [`suite`]).

pub mod coupling;
pub mod error;
pub mod experiments;
pub mod game;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod strategy;
pub mod suite;

pub use error::{Error, Result};
pub use game::{FeedbackMode, GameConfig, Label, Transcript};
pub use strategy::{Strategy, StrategySpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/game.md")]
    mod game {}
    #[doc = include_str!("../../../book/src/strategies.md")]
    mod strategies {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
