//! Discrete-time quantum walks on lattices and their Gaussian-optics
//! counterparts: walk engine, band topology, mode networks and noise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian;
pub mod lattice;
pub mod noise;
pub mod topology;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::{
    inner_product, make_localized_state, position_distribution, reduce_angle, Axis, Boundary, Coin,
    CoinProfile, LatticeSpec, SpinorField,
};
pub use walk::{
    coin_rotate, evolve, materialize_unitary, spin_translate, step, step_simple, step_split,
    step_split_2d, unitarity_residual, Protocol, Shift, StepOperator, Support, WalkSpec,
    WalkStepper, DENSE_CAP,
};

pub use num_complex::Complex64;
