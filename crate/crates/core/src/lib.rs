//! Time integration of `du/dt + A^alpha u = 0` for the five-point Dirichlet
//! Laplacian `A` on the unit square, with `A^alpha` replaced by a sum of
//! resolvents and advanced by unconditionally stable splitting schemes.
//!
//! * [`grid`]: interior-node fields, inner products and norms.
//! * [`laplacian`]: the matrix-free stencil and shifted CG solves.
//! * [`spectral`]: exact reference solutions in the sine eigenbasis.
//! * [`rational`]: resolvent-sum approximations of `A^{-beta}`.
//! * [`splitting`]: componentwise, mass-weighted and regularized schemes.
//! * [`experiment`]: stationary tables, evolution errors and order estimates.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod laplacian;
pub mod quadrature;
pub mod rational;
pub mod spectral;
pub mod splitting;

pub use error::{Error, Result};
pub use experiment::{estimate_order, ExperimentKind, ExperimentSpec, OrderEstimate, Report};
pub use grid::{delta_lower_bound, inner_product, norm_l2, norm_linf, GridFunction, GridSpec};
pub use laplacian::{apply_a, lambda_max, solve_shifted, ShiftedSolveConfig};
pub use rational::{Method, RationalCoefficients};
pub use spectral::EigenBasis;
pub use splitting::{MassOperator, SchemeConfig, SchemeKind, TermOrdering, Trajectory};
