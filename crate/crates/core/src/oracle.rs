//! Independent cross-checks for the moment reduction.
//!
//! [`pde_solve`] discretizes the original transport equation directly with
//! a unit-CFL semi-Lagrangian scheme (`da = dt`), so age advection is an
//! exact shift and the only discretization errors are the per-step
//! mortality freeze and the boundary quadrature. [`comparison_trajectory`]
//! integrates the frozen-coefficient linear system (mortality and fertility
//! pinned at zero population), which dominates the nonlinear dynamics
//! pointwise; [`compare_bound`] checks that domination on stored runs.

use serde::Serialize;

use crate::dynamics::{
    assemble_matrix, integrate_system, IntegrationSettings, LinearSystem, Trajectory,
};
use crate::error::{Error, Result};
use crate::model::{InitialDensity, Kernel, ModelSpec};
use crate::moments::StateVector;

/// Direct discretization of the age-structured transport equation.
#[derive(Debug, Clone)]
pub struct PdeRun {
    /// Time nodes, step `dt`.
    pub times: Vec<f64>,
    /// Age nodes, spacing `dt` (unit CFL).
    pub ages: Vec<f64>,
    /// Density row per time node.
    pub density: Vec<Vec<f64>>,
    /// Total population per time node, by trapezoid quadrature.
    pub totals: Vec<f64>,
    /// Weighted moments per time node.
    pub moments: Vec<Vec<f64>>,
}

/// Age-specific fertility `beta(a, x)` for either kernel.
fn fertility_kernel(model: &ModelSpec, a: f64, x: f64) -> f64 {
    match model.kernel() {
        Kernel::PolynomialAge { rho } => {
            let mut poly = 0.0;
            for i in (0..=model.order()).rev() {
                poly = poly * a + model.beta_unchecked(i, x);
            }
            poly * (-rho * a).exp()
        }
        Kernel::MultiExponential { rhos } => (0..=model.order())
            .map(|i| model.beta_unchecked(i, x) * (-rhos[i] * a).exp())
            .sum(),
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

/// Semi-Lagrangian solve of the transport equation with unit CFL.
///
/// Interior update: `p_j^{m+1} = p_{j-1}^m e^{-mu(P^m) dt}` (exact shift
/// along the characteristic with mortality frozen over the step). Boundary:
/// the renewal integral by composite trapezoid over the age-shifted row,
/// fertility frozen at `P^m`; the newborn cell appears in its own quadrature
/// weight, giving one scalar semi-implicit solve. Requires `a_max/dt` and
/// `t_end/dt` integral.
pub fn pde_solve(
    model: &ModelSpec,
    p0: &InitialDensity,
    a_max: f64,
    dt: f64,
    t_end: f64,
) -> Result<PdeRun> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("dt", format!("must be positive, got {dt}")));
    }
    let n_ages = (a_max / dt).round() as usize;
    if n_ages == 0 || (a_max - n_ages as f64 * dt).abs() > 1e-9 * dt {
        return Err(Error::config(
            "a_max",
            format!("a_max = {a_max} must be an integer multiple of dt = {dt}"),
        ));
    }
    let n_steps = (t_end / dt).round() as usize;
    if (t_end - n_steps as f64 * dt).abs() > 1e-9 * dt.max(1.0) {
        return Err(Error::config(
            "t_end",
            format!("t_end = {t_end} must be an integer multiple of dt = {dt}"),
        ));
    }

    let ages: Vec<f64> = (0..=n_ages).map(|j| j as f64 * dt).collect();
    let mut row: Vec<f64> = ages.iter().map(|&a| p0.eval(a)).collect();

    let mut run = PdeRun {
        times: Vec::with_capacity(n_steps + 1),
        ages: ages.clone(),
        density: Vec::with_capacity(n_steps + 1),
        totals: Vec::with_capacity(n_steps + 1),
        moments: Vec::with_capacity(n_steps + 1),
    };
    let record = |run: &mut PdeRun, t: f64, row: &[f64], total: f64| {
        run.times.push(t);
        run.totals.push(total);
        let n = model.order();
        let mut moments = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let weighted: Vec<f64> = match model.kernel() {
                Kernel::PolynomialAge { rho } => ages
                    .iter()
                    .zip(row)
                    .map(|(&a, &p)| a.powi(i as i32) * (-rho * a).exp() * p)
                    .collect(),
                Kernel::MultiExponential { rhos } => ages
                    .iter()
                    .zip(row)
                    .map(|(&a, &p)| (-rhos[i] * a).exp() * p)
                    .collect(),
            };
            moments.push(trapezoid(&weighted, dt));
        }
        run.moments.push(moments);
        run.density.push(row.to_vec());
    };

    let mut total = trapezoid(&row, dt);
    record(&mut run, 0.0, &row, total);

    let mut next = vec![0.0; row.len()];
    for m in 1..=n_steps {
        let survival = (-model.eval_mu(total) * dt).exp();
        for j in 1..row.len() {
            next[j] = row[j - 1] * survival;
        }
        // Renewal integral over the shifted row; the unknown newborn cell
        // carries the trapezoid endpoint weight dt/2.
        let mut shifted_births = 0.0;
        for j in 1..next.len() {
            let w = if j == next.len() - 1 { 0.5 } else { 1.0 };
            shifted_births += w * fertility_kernel(model, ages[j], total) * next[j];
        }
        shifted_births *= dt;
        let newborn_gain = 0.5 * dt * fertility_kernel(model, 0.0, total);
        if newborn_gain >= 1.0 {
            return Err(Error::Numerical(format!(
                "dt = {dt} is too large for the renewal quadrature (gain {newborn_gain})"
            )));
        }
        next[0] = shifted_births / (1.0 - newborn_gain);
        std::mem::swap(&mut row, &mut next);

        for &p in &row {
            if p < 0.0 {
                return Err(Error::Numerical(format!(
                    "negative density at step {m}; the scheme cannot produce this"
                )));
            }
        }
        total = trapezoid(&row, dt);
        record(&mut run, m as f64 * dt, &row, total);
    }
    Ok(run)
}

/// Integrates the frozen-coefficient linear system `G' = A(0) G` with the
/// same stepper and settings as the nonlinear run. Its total population
/// dominates the nonlinear one for matching initial data.
pub fn comparison_trajectory(
    model: &ModelSpec,
    init: &StateVector,
    t_end: f64,
    settings: &IntegrationSettings,
) -> Result<Trajectory> {
    let system = LinearSystem {
        matrix: assemble_matrix(model, 0.0),
        mortality: model.eval_mu(0.0),
        betas: (0..=model.order())
            .map(|i| model.beta_unchecked(i, 0.0))
            .collect(),
    };
    integrate_system(&system, init, t_end, settings)
}

/// Outcome of the domination check `P(t) <= P_frozen(t) + slack`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub holds: bool,
    pub first_violation: Option<BoundViolation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundViolation {
    pub t: f64,
    pub total: f64,
    pub frozen_total: f64,
}

/// Checks the comparison bound on the union of both node grids, evaluating
/// each trajectory through its dense output. The horizons must agree.
pub fn compare_bound(
    nonlinear: &Trajectory,
    frozen: &Trajectory,
    slack: f64,
) -> Result<BoundCheck> {
    let (ta, tb) = (nonlinear.t_end(), frozen.t_end());
    if (ta - tb).abs() > 1e-9 * (1.0 + ta.abs().max(tb.abs())) {
        return Err(Error::HorizonMismatch(ta, tb));
    }
    for &t in union_times(nonlinear, frozen).iter() {
        let p = nonlinear.total_at(t)?;
        let p_frozen = frozen.total_at(t)?;
        if p > p_frozen + slack {
            return Ok(BoundCheck {
                holds: false,
                first_violation: Some(BoundViolation {
                    t,
                    total: p,
                    frozen_total: p_frozen,
                }),
            });
        }
    }
    Ok(BoundCheck {
        holds: true,
        first_violation: None,
    })
}

/// Sorted union of the two node grids, deduplicated, clipped to the common
/// horizon.
pub fn union_times(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    let horizon = a.t_end().min(b.t_end());
    let mut times: Vec<f64> = a
        .times()
        .iter()
        .chain(b.times())
        .copied()
        .filter(|&t| t <= horizon)
        .collect();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    times.dedup_by(|x, y| (*x - *y).abs() <= f64::EPSILON * horizon.max(1.0));
    times
}
