//! Finite-volume discretization, implicit time stepping and reference
//! solutions.

pub mod banded;
mod field;
mod fv;
mod grid;
mod manufactured;
mod newton;
mod transfer;

pub use field::Field;
pub use fv::{fv_residual, Forcing};
pub use grid::{Face, Grid};
pub use manufactured::{manufactured_strong, ManufacturedSolution, StrongProxy};
pub use newton::{simulate, step_implicit, NewtonOptions, StepMeta, Trajectory};
pub use transfer::{prolong, restrict, transfer};
