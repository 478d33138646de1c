//! Moment state and initial moments from an age density.
//!
//! The moment reduction tracks the total population `P` together with the
//! weighted age moments `P_i = int w_i(a) p(a, t) da`, where the weight is
//! `a^i e^{-rho a}` for the polynomial-age kernel and `e^{-rho_i a}` for the
//! multi-exponential kernel. Initial moments are computed on a truncated age
//! interval `[0, a_max]` with a closed-form bound on the discarded tail.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{InitialDensity, Kernel, ModelSpec};
use crate::quad::{adaptive_simpson, QuadratureSettings};

/// Moment state at one instant: the total population and the `n + 1`
/// weighted age moments. Entries are finite and non-negative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVector {
    pub total: f64,
    pub moments: Vec<f64>,
}

impl StateVector {
    pub fn new(total: f64, moments: Vec<f64>) -> Result<Self> {
        if moments.is_empty() {
            return Err(Error::config(
                "state.moments",
                "at least one moment required",
            ));
        }
        for (i, v) in std::iter::once(&total).chain(&moments).enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::config(
                    &format!("state[{i}]"),
                    format!("entries must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(StateVector { total, moments })
    }

    pub fn zeros(order: usize) -> Self {
        StateVector {
            total: 0.0,
            moments: vec![0.0; order + 1],
        }
    }

    /// Number of components, `n + 2`.
    pub fn dim(&self) -> usize {
        self.moments.len() + 1
    }

    /// Kernel order `n`.
    pub fn order(&self) -> usize {
        self.moments.len() - 1
    }

    /// Flat layout `[P, P_0, ..., P_n]` used by the matrix form.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.dim());
        g.push(self.total);
        g.extend_from_slice(&self.moments);
        g
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        debug_assert!(flat.len() >= 2);
        StateVector {
            total: flat[0],
            moments: flat[1..].to_vec(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        StateVector {
            total: c * self.total,
            moments: self.moments.iter().map(|m| c * m).collect(),
        }
    }
}

/// Initial moments plus the closed-form truncation tail bound per component
/// (same layout as the flat state: total first).
#[derive(Debug, Clone, Serialize)]
pub struct InitialMoments {
    pub state: StateVector,
    pub tail_bounds: Vec<f64>,
}

/// Computes `P(0)` and `P_i(0)` from the initial density by adaptive
/// Simpson quadrature on `[0, a_max]`. Each integral is resolved to
/// `abs_tol`; the discarded tail beyond `a_max` is bounded in closed form
/// using the density's declared exponential tail rate and reported as
/// metadata. A tail bound larger than `abs_tol * 1e3` is a truncation
/// error; a panel that cannot meet its tolerance within the subdivision cap
/// is a numerical failure.
pub fn moments_from_density(
    p0: &InitialDensity,
    model: &ModelSpec,
    settings: &QuadratureSettings,
) -> Result<InitialMoments> {
    if !(settings.a_max > 0.0) || !(settings.abs_tol > 0.0) {
        return Err(Error::config(
            "quadrature",
            "a_max and abs_tol must be positive",
        ));
    }
    let a_max = settings.a_max;
    let tail_rate = p0.declared_tail_rate();
    let p_edge = p0.eval(a_max);
    let budget = settings.abs_tol * 1e3;
    let n = model.order();

    // Integrate piecewise between the density's breakpoints so table kinks
    // and the end of a table's support never straddle a panel.
    let edges = p0.breakpoints(a_max);
    let piece_tol = settings.abs_tol / (edges.len() - 1) as f64;
    let integrate = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let mut sum = 0.0;
        for pair in edges.windows(2) {
            sum += adaptive_simpson(f, pair[0], pair[1], piece_tol, settings.max_subdivisions)?;
        }
        Ok(sum)
    };

    let mut flat = Vec::with_capacity(n + 2);
    let mut tails = Vec::with_capacity(n + 2);

    let total = integrate(&|a| p0.eval(a))?;
    let total_tail = p_edge * exp_poly_tail(a_max, 0, tail_rate);
    flat.push(total);
    tails.push(total_tail);

    for i in 0..=n {
        let (value, tail) = match model.kernel() {
            Kernel::PolynomialAge { rho } => {
                let rho = *rho;
                let v = integrate(&|a: f64| a.powi(i as i32) * (-rho * a).exp() * p0.eval(a))?;
                (v, p_edge * exp_poly_tail(a_max, i, rho + tail_rate))
            }
            Kernel::MultiExponential { rhos } => {
                let rho_i = rhos[i];
                let v = integrate(&|a: f64| (-rho_i * a).exp() * p0.eval(a))?;
                (v, p_edge * exp_poly_tail(a_max, 0, rho_i + tail_rate))
            }
        };
        flat.push(value);
        tails.push(tail);
    }

    for &tail in &tails {
        if tail > budget {
            return Err(Error::Truncation {
                bound: tail,
                budget,
            });
        }
    }
    let state = StateVector::new(
        flat[0].max(0.0),
        flat[1..].iter().map(|v| v.max(0.0)).collect(),
    )?;
    Ok(InitialMoments {
        state,
        tail_bounds: tails,
    })
}

/// Closed form of `int_A^inf a^i e^{-s (a - A)} da` as
/// `sum_j C(i, j) A^{i-j} j! / s^{j+1}`.
pub(crate) fn exp_poly_tail(a_edge: f64, i: usize, s: f64) -> f64 {
    debug_assert!(s > 0.0);
    let mut sum = 0.0;
    let mut binom = 1.0; // C(i, j)
    let mut a_pow = a_edge.powi(i as i32); // A^{i-j}
    let mut fact_over_s = 1.0 / s; // j! / s^{j+1}
    for j in 0..=i {
        sum += binom * a_pow * fact_over_s;
        if j < i {
            binom *= (i - j) as f64 / (j + 1) as f64;
            a_pow /= a_edge;
            fact_over_s *= (j + 1) as f64 / s;
        }
    }
    sum
}
