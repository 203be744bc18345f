//! Entropy-variable finite volumes and relative-entropy diagnostics for
//! Shigesada-Kawasaki-Teramoto cross-diffusion systems
//! `d_t u_i = div( sum_j A_ij(u) grad u_j - u_i b_i ) + f_i(u)` with
//! `A_ij(u) = delta_ij (a_i0 + sum_k a_ik u_k) + a_ij u_i` and no-flux
//! boundaries.

pub mod audit;
pub mod entropy;
pub mod error;
pub mod model;
pub mod oracle;
pub mod reactions;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
pub use model::ModelSpec;
pub use reactions::ReactionSpec;
pub use sampling::Sampling;
pub use solver::{Field, Grid, Trajectory};
