//! Adaptive Simpson quadrature on a finite interval.

use serde::Serialize;

use crate::error::{Error, Result};

/// Settings for the initial-moment quadratures: truncation age, absolute
/// tolerance per integral, and the recursion depth cap.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureSettings {
    pub a_max: f64,
    pub abs_tol: f64,
    pub max_subdivisions: u32,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            a_max: 50.0,
            abs_tol: 1e-10,
            max_subdivisions: 48,
        }
    }
}

/// Splits every panel down to this depth before the acceptance test may
/// fire, so integrands whose mass is invisible at the first few sample
/// points cannot be mistaken for zero.
const MIN_DEPTH: u32 = 8;

/// Integrates `f` over `[a, b]` by adaptive composite Simpson with
/// recursive bisection, accepting a panel when the Richardson estimate of
/// its error is within the panel's share of `abs_tol`.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, abs_tol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    debug_assert!(b >= a && abs_tol > 0.0);
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    panel(
        f,
        a,
        m,
        b,
        fa,
        fm,
        fb,
        whole,
        abs_tol,
        max_depth.max(MIN_DEPTH),
        max_depth.max(MIN_DEPTH).saturating_sub(MIN_DEPTH),
    )
}

#[allow(clippy::too_many_arguments)]
fn panel<F>(
    f: &F,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    accept_below: u32,
) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth <= accept_below && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "quadrature did not converge on [{a}, {b}] within the subdivision cap"
        )));
    }
    let l = panel(
        f,
        a,
        lm,
        m,
        fa,
        flm,
        fm,
        left,
        0.5 * tol,
        depth - 1,
        accept_below,
    )?;
    let r = panel(
        f,
        m,
        rm,
        b,
        fm,
        frm,
        fb,
        right,
        0.5 * tol,
        depth - 1,
        accept_below,
    )?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_against_antiderivative() {
        let v = adaptive_simpson(&|a: f64| (-a).exp(), 0.0, 50.0, 1e-10, 48).unwrap();
        assert!((v - (1.0 - (-50.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn weighted_exponentials_against_antiderivatives() {
        // int_0^X e^{-3a} da = (1 - e^{-3X})/3
        let v0 = adaptive_simpson(&|a: f64| (-3.0 * a).exp(), 0.0, 50.0, 1e-10, 48).unwrap();
        assert!((v0 - (1.0 - (-150.0f64).exp()) / 3.0).abs() < 1e-10);
        // int_0^X a e^{-3a} da = (1 - (1 + 3X) e^{-3X})/9
        let v1 = adaptive_simpson(&|a: f64| a * (-3.0 * a).exp(), 0.0, 50.0, 1e-10, 48).unwrap();
        assert!((v1 - (1.0 - 151.0 * (-150.0f64).exp()) / 9.0).abs() < 1e-10);
    }

    #[test]
    fn zero_width_interval() {
        assert_eq!(adaptive_simpson(&|a| a, 3.0, 3.0, 1e-12, 8).unwrap(), 0.0);
    }

    #[test]
    fn depth_cap_reports_failure() {
        // A kink forces subdivision; depth 0 cannot resolve it.
        let f = |a: f64| (a - 0.3333).abs().sqrt();
        assert!(matches!(
            adaptive_simpson(&f, 0.0, 1.0, 1e-14, 0),
            Err(Error::Numerical(_))
        ));
    }
}
