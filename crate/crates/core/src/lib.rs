//! Top-k selection from approval profiles under justified representation (JR).
//!
//! - [`model`]: profiles, group partitions, instances, committees.
//! - [`scoring`]: additive item-scoring rules.
//! - [`jr`]: cohesive groups, representation, n/k-justifying checks.
//! - [`solve`]: optimal, JR-optimal and GreedyCC committees, price of JR,
//!   worst-case constructions.
//! - [`mallows`]: Mallows mixture sampling, analytic bounds and the price sweep.

pub mod error;
pub mod fixtures;
pub mod jr;
pub mod mallows;
pub mod model;
pub mod scoring;
pub mod solve;

pub use error::{Error, Result};
pub use jr::{verify_jr, verify_jr_bruteforce, JrCheck, JrWitness};
pub use mallows::{
    kendall_tau, mallows_normalizer, mixture_price_bound, run_price_sweep,
    sample_mallows_bottom_up, sample_mixture_instance, top_s_miss_bound, MallowsConfig,
    MallowsMixtureConfig, PriceBound, SimulationReport, SweepConfig,
};
pub use model::{
    build_instance, ApprovalProfile, Committee, GroupPartition, Instance, ItemSet, JrStatus,
};
pub use scoring::{format_sig, ItemScores, Rational, Rule, Score, ScoringRule};
pub use solve::{
    greedy_cc, optimal_jr_set_exact, optimal_set, price_of_jr, Method, Price, PriceMethod,
    PriceReport, SelectionResult,
};
