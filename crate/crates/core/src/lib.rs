//! Stochastic chemical kinetics on the integer lattice: reaction networks,
//! exact simulation and master-equation solutions, tau-leap kernels, the
//! moment-variation error norms, and checks of the conditions under which
//! tau-leaping converges.
//!
//! ```
//! use tauleap_core::model::parse_network;
//! use tauleap_core::pmf::LatticeState;
//!
//! let net = parse_network("species A\nreaction r1: A -> 0 @ mass_action 2.0\n").unwrap();
//! assert_eq!(net.propensity(0, &LatticeState::from([5])), 10.0);
//! ```

pub mod exact;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pmf;
pub mod rng;
pub mod tauleap;
pub mod verify;

use thiserror::Error;

/// Toolkit version stamped into every output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] model::ParseError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Cme(#[from] exact::CmeError),
    #[error(transparent)]
    Ssa(#[from] exact::SsaError),
    #[error(transparent)]
    Kernel(#[from] tauleap::KernelError),
    #[error(transparent)]
    Convergence(#[from] metrics::ConvergenceError),
    #[error(transparent)]
    Norm(#[from] metrics::NormError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error(transparent)]
    PmfCsv(#[from] io::PmfCsvError),
}
