//! Tau-leap kernels, meshes and exact propagation of their transition laws.

mod count;
mod kernel;
mod mesh;
pub(crate) mod series;
mod transition;

use thiserror::Error;

pub use count::{ConcreteCount, CountDistribution, CountParam};
pub use kernel::{midpoint_state, KernelName, RemmOverrides, RemmRoles, TauLeapKernel};
pub use mesh::Mesh;
pub use transition::{
    EnumerationOptions, PushForward, TauLeapPath, TransitionPmf, MAX_DERIVATIVE_ORDER,
};

pub(crate) use count::binomial_coefficient;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("reaction {reaction}: count parameter {parameter} = {value} is out of range")]
    ParameterOutOfRange {
        reaction: usize,
        parameter: &'static str,
        value: f64,
    },
    #[error("network is not covered by this kernel: {0}")]
    NotCoverable(String),
    #[error("unknown kernel `{0}` (expected explicit, midpoint or remm)")]
    UnknownKernel(String),
    #[error("state has dimension {found}, network has {expected} species")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("count vector has length {found}, network has {expected} reactions")]
    CountLengthMismatch { expected: usize, found: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: u32, max: u32 },
    #[error("count enumeration box has {size} points, cap is {cap}")]
    EnumerationTooLarge { size: usize, cap: usize },
    #[error("propagated support has {size} states, cap is {cap}")]
    SupportTooLarge { size: usize, cap: usize },
    #[error("invalid step size {0}")]
    InvalidTau(f64),
    #[error("mass tolerance {0} must lie in (0, 1)")]
    InvalidTolerance(f64),
}
