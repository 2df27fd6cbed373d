//! Neuro-symbolic engines that learn convergent term rewriting systems
//! for formula-simplification problems, together with the symbolic
//! ground-truth oracle, dataset generators, a small transformer substrate,
//! training loops and evaluation tooling.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod engine;
pub mod eval;
pub mod models;
pub mod nn;
pub mod term;
pub mod training;
