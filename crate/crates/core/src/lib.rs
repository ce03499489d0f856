//! Contextual combinatorial bandits for negotiation.
//!
//! The crate is `no_std` (with `alloc`). It contains the kernel machinery,
//! the NegUCB learner, comparison agents, simulated negotiation domains and
//! the episode loop; file formats and the command line live in the companion
//! harness crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod baselines;
pub mod bounds;
pub mod context;
pub mod env;
pub mod episode;
pub mod error;
pub mod gram;
mod grouped;
pub mod kernel;
pub mod learner;
pub mod linalg;
pub mod negucb;
pub mod oracle;
pub mod primal;

pub use context::{BidVector, ContextSet, Encoding};
pub use error::{Error, Result};
pub use gram::{GramMatrix, KernelRidge};
pub use grouped::ContextRegistry;
pub use kernel::{KernelKind, KernelSpec};
pub use learner::{decide_incoming, select_bid, Estimate, Learner, PairQuery, Selection};
pub use episode::{run_episode, run_stream, BanditAgent, LoopOptions, Negotiator, Protocol, RuleAgent, StepRecord, Transcript};
pub use negucb::{NegUcb, NegUcbConfig};
pub use oracle::{oracle_check, OracleReport};
pub use primal::{FeatureMap, PrimalConfig, PrimalOnline, PrimalState};
