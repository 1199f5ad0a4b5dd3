//! Ground-truth dynamics: exact path sampling and the truncated master-equation oracle.

mod cme;
mod ssa;

pub use cme::{
    cme_moment, cme_solve, CmeError, CmeSolution, TruncatedGenerator, TruncationSpec,
    MAX_BOX_STATES,
};
pub use ssa::{
    empirical_pmf, ssa_endpoint, ssa_ensemble, ssa_simulate, ssa_simulate_with_rng, SsaError,
    SsaOptions, SsaPath, DEFAULT_MAX_JUMPS,
};
