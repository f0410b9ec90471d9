//! Discretized network Tikhonov (NETT) regularization for a masked
//! photoacoustic tomography problem.
//!
//! The crate covers the whole pipeline: a Kaiser–Bessel discretization of the
//! wave forward operator in truncated-SVD form ([`linops`], [`pat`]), synthetic
//! phantoms and training pairs ([`phantom`]), the learned regularizer
//! `R(x) = ||x - Phi(x)||^2 + beta TV_eps(x)` with a residual U-Net written
//! from scratch ([`regularizer`], [`training`]), forward-backward minimization
//! of the NETT functional ([`solver`]), numerical checks of convergence and
//! convergence rates ([`theory`]) and the experiment front end ([`harness`]).

pub mod error;
pub mod harness;
pub mod linops;
pub mod pat;
pub mod phantom;
pub mod regularizer;
pub mod rng;
pub mod solver;
pub mod theory;
pub mod training;

pub use error::{NettError, Result};
pub use linops::{DenseMatrix, ForwardOperator};
