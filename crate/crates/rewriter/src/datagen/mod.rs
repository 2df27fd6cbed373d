//! Benchmark dataset generation.

pub mod datasets;
pub mod gen;

pub use datasets::{
    build_selector_dataset, build_solver_dataset, build_test_set, selector_inputs,
    selector_records, solver_records, test_records, DatasetRecord, DatasetSizes, Mode,
    SelectorDataset, SelectorExample, SolverDataset, SolverExample, Split, TestRecord,
};
pub use gen::{generate_formula, generate_with_rng, substream, GenSpec};
