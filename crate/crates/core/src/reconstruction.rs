//! Age-density reconstruction by the method of characteristics.
//!
//! With `B(t)` the birth rate and `M(t)` the cumulative mortality carried
//! by the trajectory, the age density is explicit along characteristics:
//!
//! - birth cohorts (`t >= a`): `p(a, t) = B(t - a) e^{-(M(t) - M(t - a))}`,
//! - initial cohorts (`t < a`): `p(a, t) = p_0(a - t) e^{-M(t)}`.
//!
//! The seam `a = t` is evaluated from the birth-cohort branch; its jump
//! against the initial-cohort branch (zero only for compatible initial
//! data, `p_0(0) = B(0)`) is reported as metadata.

use serde::Serialize;

use crate::dynamics::{birth_rate, Trajectory, EXTINCTION_FLOOR};
use crate::error::{Error, Result};
use crate::model::{InitialDensity, Kernel, ModelSpec};

/// Reconstructed age density and normalized profile at one time.
#[derive(Debug, Clone, Serialize)]
pub struct AgeDensityGrid {
    pub t: f64,
    pub ages: Vec<f64>,
    /// `p(a, t)` per age, non-negative.
    pub density: Vec<f64>,
    /// `phi(a, t) = p(a, t) / P(t)` per age.
    pub profile: Vec<f64>,
    /// Magnitude of the branch mismatch at the seam `a = t`, when the seam
    /// lies inside the grid.
    pub seam_jump: Option<f64>,
}

/// Uniform age grid of `points` nodes on `[0, a_max]`.
pub fn uniform_age_grid(a_max: f64, points: usize) -> Vec<f64> {
    debug_assert!(points >= 2 && a_max > 0.0);
    let h = a_max / (points - 1) as f64;
    (0..points).map(|j| j as f64 * h).collect()
}

/// Rebuilds `p(a, t)` and `phi(a, t)` on `ages` from the trajectory's dense
/// output. Errors when `t` lies outside the trajectory horizon or when
/// `P(t)` is below the extinction floor (the profile is then undefined).
pub fn reconstruct_density(
    model: &ModelSpec,
    traj: &Trajectory,
    p0: &InitialDensity,
    ages: &[f64],
    t: f64,
) -> Result<AgeDensityGrid> {
    let total = traj.total_at(t)?;
    if total < EXTINCTION_FLOOR {
        return Err(Error::DegenerateProfile(total));
    }
    let m_t = traj.mortality_integral_at(t)?;

    let mut density = Vec::with_capacity(ages.len());
    for &a in ages {
        let p = if t >= a {
            let tau = t - a;
            let b = birth_rate(model, &traj.state_at(tau)?);
            let m_tau = traj.mortality_integral_at(tau)?;
            b * (-(m_t - m_tau)).exp()
        } else {
            p0.eval(a - t) * (-m_t).exp()
        };
        density.push(p.max(0.0));
    }
    let profile = density.iter().map(|p| p / total).collect();

    let seam_jump = if t <= *ages.last().unwrap_or(&0.0) {
        let b0 = birth_rate(model, &traj.state_at(0.0)?);
        Some((b0 - p0.eval(0.0)).abs() * (-m_t).exp())
    } else {
        None
    };

    Ok(AgeDensityGrid {
        t,
        ages: ages.to_vec(),
        density,
        profile,
        seam_jump,
    })
}

/// Compares the moments of a reconstructed density against the trajectory
/// state at the same time. Returns `n + 2` relative errors: the total
/// first, then each weighted moment.
pub fn moment_consistency(
    model: &ModelSpec,
    grid: &AgeDensityGrid,
    traj: &Trajectory,
) -> Result<Vec<f64>> {
    let state = traj.state_at(grid.t)?;
    let n = model.order();
    let mut errors = Vec::with_capacity(n + 2);

    let quad_total = integrate_across_seam(&grid.ages, &grid.density, grid.t);
    errors.push(relative_error(quad_total, state.total));

    for i in 0..=n {
        let weighted: Vec<f64> = match model.kernel() {
            Kernel::PolynomialAge { rho } => grid
                .ages
                .iter()
                .zip(&grid.density)
                .map(|(&a, &p)| a.powi(i as i32) * (-rho * a).exp() * p)
                .collect(),
            Kernel::MultiExponential { rhos } => grid
                .ages
                .iter()
                .zip(&grid.density)
                .map(|(&a, &p)| (-rhos[i] * a).exp() * p)
                .collect(),
        };
        let quad = integrate_across_seam(&grid.ages, &weighted, grid.t);
        errors.push(relative_error(quad, state.moments[i]));
    }
    Ok(errors)
}

/// Integrates sampled data that may jump at the seam `a = t` (incompatible
/// initial data) by splitting there. Sample values carry the birth-cohort
/// branch up to and including the seam; the right piece replaces the seam
/// value with a linear extrapolation of the initial-cohort side so neither
/// piece straddles the jump.
fn integrate_across_seam(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let tol = 1e-9 * (1.0 + t.abs());
    if t <= xs[0] + tol || t >= *xs.last().unwrap() - tol {
        return integrate_samples(xs, ys);
    }
    let k = xs.partition_point(|&a| a < t - tol);
    if (xs[k] - t).abs() <= tol {
        // Seam on a node: ys[k] is the left limit; the right limit is
        // extrapolated from the two nodes past the seam.
        let left = integrate_samples(&xs[..=k], &ys[..=k]);
        let mut right_ys = ys[k..].to_vec();
        right_ys[0] = if ys.len() > k + 2 {
            2.0 * ys[k + 1] - ys[k + 2]
        } else {
            ys[k + 1]
        };
        left + integrate_samples(&xs[k..], &right_ys)
    } else {
        // Seam strictly inside (xs[k-1], xs[k]): append the seam point to
        // each side with one-sided linear extrapolations.
        let left_limit = if k >= 2 {
            ys[k - 1] + (ys[k - 1] - ys[k - 2]) / (xs[k - 1] - xs[k - 2]) * (t - xs[k - 1])
        } else {
            ys[k - 1]
        };
        let right_limit = if k + 1 < ys.len() {
            ys[k] + (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]) * (t - xs[k])
        } else {
            ys[k]
        };
        let mut left_xs = xs[..k].to_vec();
        let mut left_ys = ys[..k].to_vec();
        left_xs.push(t);
        left_ys.push(left_limit);
        let mut right_xs = vec![t];
        let mut right_ys = vec![right_limit];
        right_xs.extend_from_slice(&xs[k..]);
        right_ys.extend_from_slice(&ys[k..]);
        integrate_samples(&left_xs, &left_ys) + integrate_samples(&right_xs, &right_ys)
    }
}

fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// Composite Simpson on a uniform grid with an even interval count;
/// trapezoid otherwise.
fn integrate_samples(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return 0.0;
    }
    let h = xs[1] - xs[0];
    let uniform = xs
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
    if uniform && xs.len() % 2 == 1 {
        let mut sum = ys[0] + ys[ys.len() - 1];
        for (j, y) in ys.iter().enumerate().take(ys.len() - 1).skip(1) {
            sum += if j % 2 == 1 { 4.0 * y } else { 2.0 * y };
        }
        sum * h / 3.0
    } else {
        xs.windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}
