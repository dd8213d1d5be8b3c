//! Rank-1 constraint systems for FHE evaluation circuits.

pub mod builder;
mod circuit;
mod compile;
mod field;
pub mod lazy;
pub mod mimc;
mod system;

pub use builder::{BuildMode, Builder, Ledger, Schedule, SlotVec};
pub use circuit::{plaintext_domain, predicate_holds, CtShape, FheCircuit, Op, Predicate, Trace};
pub use compile::{
    build_full, compile, compile_counts, generate_witness, public_inputs, CompileContext, Compiled, CostStats,
    CountReport, Witness,
};
pub use field::FieldParams;
pub use lazy::{chain_experiment, reduction_cost_ratio, ChainReport};
pub use system::{Constraint, ConstraintSystem, Lc, Row, ONE};

#[cfg(test)]
mod tests;
