//! Supercritical branching processes in an iid random environment.
//!
//! Simulation of Z_n in log space, the standardized log-increment
//! Z_{n0,n} = (ln(Z_{n0+n}/Z_{n0}) − nμ)/(σ√n), confidence intervals for the
//! criticality parameter μ, and a Monte Carlo harness that checks the normal
//! approximation of Z_{n0,n} (Berry–Esseen rate, tail ratios, moderate
//! deviations, interval coverage) uniformly over n0.

// Domain checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod environment;
pub mod error;
pub mod harness;
pub mod inference;
pub mod offspring;
pub mod rng;
pub mod sampling;
pub mod simulator;
pub mod stats;

pub use environment::{Atom, Capability, EnvMoments, EnvironmentModel};
pub use error::{Error, Result};
pub use offspring::OffspringLaw;
pub use rng::{RandomStream, ReplicateStreams, StreamRole};
pub use simulator::{simulate, SimCaps, Trajectory};
