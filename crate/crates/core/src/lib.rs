//! Age-structured logistic population dynamics.
//!
//! The library simulates a population whose age density `p(a, t)` obeys a
//! transport equation with population-dependent mortality and a renewal
//! (birth) boundary condition with population-dependent fertility. Because
//! the fertility kernel is a polynomial in age times an exponential (or a
//! sum of exponentials), the dynamics close exactly into a finite system of
//! moment ODEs for the total population `P(t)` and weighted age moments
//! `P_0(t) … P_n(t)`.
//!
//! The crate provides:
//!
//! - [`model`]: model definition and validation of the standing assumptions
//!   on fertility and mortality,
//! - [`moments`]: initial moments from an initial age density by adaptive
//!   quadrature with a controlled truncation tail,
//! - [`reproduction`]: the net reproduction rate `R_n(x)`, its derivative
//!   and inverse, regime classification by `R_0`, and the nontrivial
//!   equilibrium when it exists,
//! - [`dynamics`]: the moment ODE system, an adaptive embedded Runge-Kutta
//!   5(4) integrator with dense output, and runtime monitors for the
//!   structural guarantees (positivity, moment ordering, equilibrium
//!   bounds),
//! - [`reconstruction`]: the full age density rebuilt from a trajectory by
//!   the method of characteristics, with moment-consistency checks,
//! - [`oracle`]: independent cross-checks — a semi-Lagrangian solver for
//!   the original transport equation and the frozen-coefficient comparison
//!   system that dominates the nonlinear dynamics.

// `!(v > 0.0)` guards are kept as written: they reject NaN along with the
// nonpositive values. Index loops mirror the tableau and matrix layouts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod model;
pub mod moments;
pub mod oracle;
pub mod quad;
pub mod reconstruction;
pub mod reproduction;

pub use dynamics::{
    assemble_matrix, integrate, rhs, run_monitors, IntegrationSettings, MonitorFinding,
    MonitorReport, RateMatrix, Trajectory,
};
pub use error::{Error, Result};
pub use model::{
    default_validation_grid, Condition, Fertility, InitialDensity, Kernel, ModelSpec, Mortality,
    ValidationReport, Violation,
};
pub use moments::{moments_from_density, InitialMoments, StateVector};
pub use oracle::{compare_bound, comparison_trajectory, pde_solve, BoundCheck, PdeRun};
pub use quad::QuadratureSettings;
pub use reconstruction::{
    moment_consistency, reconstruct_density, uniform_age_grid, AgeDensityGrid,
};
pub use reproduction::{
    classify, equilibrium_residual, net_reproduction_rate, nontrivial_equilibrium, rn_derivative,
    rn_inverse, EquilibriumReport, Regime, ReproductionSummary,
};
