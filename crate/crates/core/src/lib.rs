//! Exactness certificates for the Shor relaxation of diagonal QCQPs.
//!
//! The crate is `no_std` with `alloc`. It holds the instance model, the
//! convex relaxations, the ladder of sufficient exactness conditions and a
//! brute-force global oracle for small instances.

#![no_std]

extern crate alloc;

mod math;

pub mod assumption;
pub mod conditions;
pub mod instance;
pub mod numerics;
pub mod partition;
pub mod oracle;
pub mod relaxations;

pub use instance::{
    evaluate, example_e1, perturb, perturb_keeping_quadratics, validate_instance, Constraint, DiagonalQcqp,
    InstanceError, RawInstance,
};
pub use partition::{compute_partition, PartitionInfo, DEFAULT_GROUP_TOL};
