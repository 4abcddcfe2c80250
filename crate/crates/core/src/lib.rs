//! Deterministic agent-based simulator of culturally mediated economic
//! valuation.
//!
//! Agents carry a three-segment genome and a geometric soft classifier over
//! concept space. Objects change hands through two mechanisms: a minimal
//! market of pairwise exchanges and a compositional market of one-to-all
//! auctions over linked ensembles with feedback repricing. Purchases pass a
//! two-stage gate — a cipher match of the offered value against the agent's
//! endogenous hash string, then a price-band check around the kernel-implied
//! value — unless imitation of a neighbor's completed trade overrides
//! cognition. Every evaluation lands in an append-only trace, which the
//! analysis detectors (value fluctuation, transitivity violations, bubbles
//! against fundamental value, valuation-regime classification) consume
//! post hoc.
//!
//! Runs are pure functions of (config, seed): one seeded RNG stream drives
//! every stochastic choice in a documented order, so traces are
//! byte-reproducible. The `simctl` binary wraps the engine: `run`,
//! `analyze`, `gen-config` and `replay` subcommands.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod genome;
pub mod kernel;
pub mod market;
pub mod network;
pub mod trace;
pub mod valuation;

pub use config::Config;
pub use engine::{run, RunOutput};
pub use trace::Trace;
