//! Zero-sum differential games whose state moves along horizontal curves of
//! the first Heisenberg group, and the Hamilton–Jacobi–Isaacs equations they
//! solve.
//!
//! - [`group`]: group law, dilations, gauge and distance.
//! - [`flow`]: horizontal dynamics under piecewise-constant controls.
//! - [`grid`]: box grids, trilinear interpolation and on-disk storage.
//! - [`game`]: backward induction for the lower and upper values and the
//!   checks run against it.
//! - [`hji`]: initial-value Hamilton–Jacobi problems through an associated game.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod flow;
pub mod game;
pub mod grid;
pub mod group;
pub mod hji;
pub mod scalar;

pub use error::{Error, Result};
pub use flow::{exact_step, integrate, PiecewiseConstantControl, PlaneVector, SignConvention, Trajectory};
pub use game::{backward_induction, make_lattice, ControlLattice, GameConstants, GameSpec, Value};
pub use grid::{GridSpec, Grid3, ValueGrid};
pub use group::{dilate, dist_g, gauge, group_mul, inverse, BoxRegion, HPoint};
pub use hji::{build_game, HjiProblem};
