//! Submodular subset selection when observed utilities are distorted by
//! group-dependent bias.
//!
//! Objectives have the concave-over-modular form
//! `F(S) = Σ_j g_j(Σ_{i∈S} W_ij)`. A latent matrix `W` is observed through
//! per-group increasing transforms, and the crate provides greedy
//! baselines, cap-constrained selection, a reference-group debiasing
//! algorithm, exact oracles for small instances, data generators, and an
//! experiment harness.

pub mod bias;
pub mod config;
pub mod curve;
pub mod datagen;
pub mod debias;
pub mod error;
pub mod groups;
pub mod harness;
pub mod maximizers;
pub mod objective;
pub mod rng;
pub mod utility;

pub use bias::{apply_bias, reduce_overlapping_groups, BiasFunction, BiasSpec};
pub use config::KvConfig;
pub use curve::ConcaveCurve;
pub use datagen::{
    gen_negative, gen_synthetic1, gen_synthetic2, NegativeCase, NegativeInstance, SyntheticData, SyntheticParams1,
};
pub use debias::{algorithm1, part1_budgets, part2_select, rescaled_objective, BudgetVector};
pub use error::{Error, Result};
pub use groups::{fairness_caps, sample_groups, CategoryStructure, FairnessConstraint, GroupStructure};
pub use harness::{
    ingest_movielens, normalized_latent_utility, run_algorithm, run_movielens_experiment, run_negative_demo, run_sweep, Algorithm,
    MovieLensPaths, MovieTable, NegativeReport, SweepConfig, TrialRecord,
};
pub use maximizers::{
    exhaustive_opt, greedy_cardinality, greedy_with_caps, two_type_exact_opt, Flag, Flags, SelectionResult,
};
pub use objective::{eval_objective, marginal_gain, ObjectiveSpec, SetObjective};
pub use utility::UtilityMatrix;
