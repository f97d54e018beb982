//! Numerical laboratory for Hamiltonian stationary Lagrangian gradient graphs.
//!
//! The gradient graph of a potential `u : Ω ⊂ ℝⁿ → ℝ` is the Lagrangian
//! submanifold `Γ_u = {(x, Du(x))}` of `ℂⁿ`. This crate provides the discrete
//! machinery to study when `Γ_u` is critical for volume under Hamiltonian
//! (vertical) variations:
//!
//! * [`fields`] — structured grids, finite-difference calculus, difference
//!   quotients, mollification, quadrature, and pairwise convexity certificates.
//! * [`phase`] — induced metric `g = I + (D²u)ᵀD²u`, Lagrangian phase
//!   `θ = Σᵢ arctan λᵢ`, volume, mean-curvature magnitude `|∇θ|_g`, and the
//!   Grassmannian spread of tangent planes.
//! * [`variation`] — both first-variation forms of the volume functional, the
//!   weak-harmonicity residual `Δ_g θ`, the exact gradient of the discrete
//!   functional, and a descent driver with Armijo line search.
//! * [`rotation`] — the Lewy-Yuan unitary rotation of sampled potentials:
//!   forward rotation, monotone inversion of the coordinate change,
//!   resampling, convexity propagation, and the C^{1,1} bound.
//! * [`ellipticity`] — the coefficient tensor `√g gⁱʲ δᵏˡ`, its exact
//!   derivative, ellipticity lower bounds, and a seeded search for the radius
//!   within which the perturbed quadratic form stays coercive.
//!
//! Hot per-node loops run on rayon when the `parallel` feature (default) is
//! enabled and fall back to sequential execution otherwise; reductions are
//! chunked identically in both modes so results never depend on thread count.

pub mod ellipticity;
pub mod error;
mod exec;
pub mod fields;
pub mod linalg;
pub mod phase;
pub mod rotation;
pub mod variation;

pub use error::{Error, Result};
pub use fields::{
    difference_quotient, gradient, hessian, integrate, k_convexity_margin, mollify, Grid,
    MarginReport, PairPlan, ScalarField, SymmetricMatrixField, VectorField,
};
pub use phase::{
    grassmannian_spread, induced_metric, mean_curvature_norm, phase, phase_via_complex_det,
    volume, MetricField, PhaseField, SpreadReport,
};
pub use rotation::{
    c11_bound, convexity_propagation_check, inverse_rotate, invert_coordinates, rotate_graph,
    rotate_to_grid, rotated_gradient_check, RotatedGraph, RotationParams,
};
pub use variation::{
    descend, first_variation_divergence, first_variation_phase, harmonicity_residual,
    volume_gradient, BoundaryMask, DescentParams, DescentTrace,
};
