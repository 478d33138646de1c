//! Net reproduction rate, regime classification, and equilibria.
//!
//! `R_n(x)` is the expected lifetime offspring of one individual while the
//! total population is held at `x`. For the polynomial-age kernel
//! `R_n(x) = sum_i beta_i(x) i! / (rho + mu(x))^{i+1}`, evaluated through
//! the recursion `w_0 = 1/(rho + mu)`, `w_i = w_{i-1} i / (rho + mu)` so no
//! explicit factorial appears; for the multi-exponential kernel
//! `R_n(x) = sum_i beta_i(x) / (rho_i + mu(x))`.
//!
//! `R_n` is strictly decreasing with range `(0, R_0]`, so a nontrivial
//! equilibrium `R_n(P*) = 1` exists exactly when `R_0 = R_n(0) > 1`, and is
//! then unique.

use serde::Serialize;

use crate::dynamics;
use crate::error::{Error, Result};
use crate::model::{Kernel, ModelSpec};
use crate::moments::StateVector;

/// Half-width of the band around `R_0 = 1` classified as critical.
pub const CRITICAL_BAND: f64 = 1e-9;

/// Residual tolerance of the inverse: `|R_n(x) - y| <= RN_INVERSE_TOL * max(1, y)`.
pub const RN_INVERSE_TOL: f64 = 1e-12;

/// Equilibrium residual budget, relative to `1 + P*`.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-8;

const MAX_BRACKET_DOUBLINGS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Supercritical => "supercritical",
            Regime::Critical => "critical",
            Regime::Subcritical => "subcritical",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproductionSummary {
    pub r0: f64,
    pub regime: Regime,
}

/// Equilibrium state and the residual of the stationarity equations at it.
/// Subcritical and critical regimes carry the trivial equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub regime: Regime,
    pub total: f64,
    pub moments: Vec<f64>,
    pub residual_inf_norm: f64,
}

impl EquilibriumReport {
    pub fn trivial(model: &ModelSpec, regime: Regime) -> Self {
        EquilibriumReport {
            regime,
            total: 0.0,
            moments: vec![0.0; model.order() + 1],
            residual_inf_norm: 0.0,
        }
    }

    pub fn state(&self) -> StateVector {
        StateVector {
            total: self.total,
            moments: self.moments.clone(),
        }
    }
}

/// `R_n(x)` for `x >= 0`.
pub fn net_reproduction_rate(model: &ModelSpec, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let mu = model.eval_mu(x);
    match model.kernel() {
        Kernel::PolynomialAge { rho } => {
            let denom = rho + mu;
            let mut weight = 1.0 / denom;
            let mut sum = 0.0;
            for i in 0..=model.order() {
                if i > 0 {
                    weight *= i as f64 / denom;
                }
                sum += model.beta_unchecked(i, x) * weight;
            }
            sum
        }
        Kernel::MultiExponential { rhos } => (0..=model.order())
            .map(|i| model.beta_unchecked(i, x) / (rhos[i] + mu))
            .sum(),
    }
}

/// Closed-form `R_n'(x)`: the `beta_i'` sum plus the `mu'` sum, both
/// strictly negative for admissible models. Errors for families without
/// closed-form derivatives.
pub fn rn_derivative(model: &ModelSpec, x: f64) -> Result<f64> {
    debug_assert!(x >= 0.0);
    if !model.has_closed_form_derivatives() {
        return Err(Error::Unsupported(
            "net reproduction derivative needs closed-form fertility and mortality derivatives"
                .to_string(),
        ));
    }
    let mu = model.eval_mu(x);
    let dmu = model.mu_derivative(x).unwrap();
    match model.kernel() {
        Kernel::PolynomialAge { rho } => {
            let denom = rho + mu;
            let mut weight = 1.0 / denom; // i! / (rho + mu)^{i+1}
            let mut sum = 0.0;
            for i in 0..=model.order() {
                if i > 0 {
                    weight *= i as f64 / denom;
                }
                let beta = model.beta_unchecked(i, x);
                let dbeta = model.beta_derivative(i, x).unwrap();
                sum += dbeta * weight - (i as f64 + 1.0) * beta * weight * dmu / denom;
            }
            Ok(sum)
        }
        Kernel::MultiExponential { rhos } => {
            let mut sum = 0.0;
            for i in 0..=model.order() {
                let denom = rhos[i] + mu;
                let beta = model.beta_unchecked(i, x);
                let dbeta = model.beta_derivative(i, x).unwrap();
                sum += dbeta / denom - beta * dmu / (denom * denom);
            }
            Ok(sum)
        }
    }
}

/// Solves `R_n(x) = y` for `0 < y <= R_0` by bracket expansion and
/// bisection; strict monotonicity makes the root unique. An optional Newton
/// polish runs when closed-form derivatives are available.
pub fn rn_inverse(model: &ModelSpec, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::OutOfRange {
            what: "reproduction rate target".to_string(),
            value: y,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    let r0 = net_reproduction_rate(model, 0.0);
    // Targets within the residual tolerance of R_0 map to zero; the range
    // of R_n is (0, R_0] and rounding of the endpoint must not reject it.
    if y >= r0 {
        return if y - r0 <= RN_INVERSE_TOL * y.max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::NoSolution(format!(
                "target {y} exceeds the base reproduction rate {r0}; \
                 the attainable range is (0, {r0}]"
            )))
        };
    }

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut doublings = 0;
    while net_reproduction_rate(model, hi) >= y {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Numerical(format!(
                "bracket expansion exceeded {MAX_BRACKET_DOUBLINGS} doublings; \
                 the reproduction rate does not fall below {y}"
            )));
        }
    }

    // Bisect to interval exhaustion; ~60 halvings reach machine resolution.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if net_reproduction_rate(model, mid) >= y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = lo;

    if model.has_closed_form_derivatives() {
        for _ in 0..2 {
            let f = net_reproduction_rate(model, x) - y;
            let df = rn_derivative(model, x)?;
            if df == 0.0 {
                break;
            }
            let candidate = x - f / df;
            if candidate.is_finite()
                && candidate >= 0.0
                && (net_reproduction_rate(model, candidate) - y).abs() < f.abs()
            {
                x = candidate;
            } else {
                break;
            }
        }
    }

    let residual = (net_reproduction_rate(model, x) - y).abs();
    if residual > RN_INVERSE_TOL * y.max(1.0) {
        return Err(Error::Numerical(format!(
            "inverse residual {residual:e} above tolerance at x = {x}"
        )));
    }
    Ok(x)
}

/// `R_0 = R_n(0)` and its regime, with `|R_0 - 1| <= 1e-9` classified as
/// critical.
pub fn classify(model: &ModelSpec) -> ReproductionSummary {
    let r0 = net_reproduction_rate(model, 0.0);
    let regime = if (r0 - 1.0).abs() <= CRITICAL_BAND {
        Regime::Critical
    } else if r0 > 1.0 {
        Regime::Supercritical
    } else {
        Regime::Subcritical
    };
    ReproductionSummary { r0, regime }
}

/// The unique positive equilibrium of a supercritical model:
/// `P* = R_n^{-1}(1)`, `P_0* = mu(P*) P* / (rho + mu(P*))` and
/// `P_i* = P_{i-1}* i / (rho + mu(P*))` for the polynomial-age kernel;
/// `P_i* = mu(P*) P* / (rho_i + mu(P*))` for the multi-exponential kernel.
/// Errors for subcritical or critical models, where the trivial state is
/// the only equilibrium.
pub fn nontrivial_equilibrium(model: &ModelSpec) -> Result<EquilibriumReport> {
    let summary = classify(model);
    if summary.regime != Regime::Supercritical {
        return Err(Error::Precondition(format!(
            "base reproduction rate {} is not above 1: the trivial state is the only equilibrium",
            summary.r0
        )));
    }
    let p_star = rn_inverse(model, 1.0)?;
    let mu = model.eval_mu(p_star);
    let n = model.order();
    let moments = match model.kernel() {
        Kernel::PolynomialAge { rho } => {
            let denom = rho + mu;
            let mut moments = Vec::with_capacity(n + 1);
            moments.push(mu * p_star / denom);
            for i in 1..=n {
                let prev = moments[i - 1];
                moments.push(prev * i as f64 / denom);
            }
            moments
        }
        Kernel::MultiExponential { rhos } => {
            let births = mu * p_star;
            rhos.iter().map(|rho_i| births / (rho_i + mu)).collect()
        }
    };
    let state = StateVector {
        total: p_star,
        moments,
    };
    let residual = equilibrium_residual(model, &state);
    let inf_norm = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let budget = EQUILIBRIUM_RESIDUAL_TOL * (1.0 + p_star);
    if inf_norm > budget {
        return Err(Error::Numerical(format!(
            "equilibrium residual {inf_norm:e} above budget {budget:e}"
        )));
    }
    Ok(EquilibriumReport {
        regime: Regime::Supercritical,
        total: state.total,
        moments: state.moments,
        residual_inf_norm: inf_norm,
    })
}

/// Residual of the stationarity equations at `state`: the time derivative
/// of the moment system evaluated there, component by component.
pub fn equilibrium_residual(model: &ModelSpec, state: &StateVector) -> Vec<f64> {
    dynamics::rhs(model, state)
}
