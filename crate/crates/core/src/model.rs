//! Model definition and validation.
//!
//! A [`ModelSpec`] bundles the fertility kernel, the population-dependent
//! fertility coefficients and the population-dependent mortality rate. The
//! standing assumptions on those functions (positivity, strict monotonicity,
//! vanishing respectively unbounded limits) are not enforced at construction
//! time; [`ModelSpec::validate_assumptions`] checks them on a sample grid and
//! reports every violation as data.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest admissible polynomial order of the fertility kernel. The
/// factorial weights in the net reproduction rate grow like `n!`, so the
/// order is capped to keep them representable.
pub const MAX_ORDER: usize = 20;

/// Strict-inequality tolerance for the pairwise monotonicity checks.
pub const MONOTONE_TOL: f64 = 1e-12;

/// A fertility coefficient evaluated at the last grid point must have fallen
/// below this value for the vanishing-limit check on user-supplied families.
pub const VANISHING_TOL: f64 = 1e-3;

/// User-supplied rate function of the total population size.
pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Age dependence of the fertility kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `beta(a, x) = e^{-rho a} * sum_i beta_i(x) a^i`
    PolynomialAge { rho: f64 },
    /// `beta(a, x) = sum_i beta_i(x) e^{-rho_i a}`
    MultiExponential { rhos: Vec<f64> },
}

/// Population dependence of the fertility coefficients `beta_i`.
#[derive(Clone)]
pub enum Fertility {
    /// `beta_i(x) = coeffs[i] * e^{-rate * x}`
    ExpDecline { coeffs: Vec<f64>, rate: f64 },
    /// `beta_i(x) = coeffs[i] * (1 + x)^{-exponent}`
    PowerDecline { coeffs: Vec<f64>, exponent: f64 },
    /// One arbitrary coefficient function per index. No closed-form
    /// derivatives; assumption checks fall back to the numeric grid.
    Custom(Vec<RateFn>),
}

/// Population dependence of the mortality rate.
#[derive(Clone)]
pub enum Mortality {
    /// `mu(x) = base + scale * x^exponent`
    PowerLaw {
        base: f64,
        scale: f64,
        exponent: f64,
    },
    /// Arbitrary mortality function. No closed-form derivative.
    Custom(RateFn),
}

impl fmt::Debug for Fertility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fertility::ExpDecline { coeffs, rate } => f
                .debug_struct("ExpDecline")
                .field("coeffs", coeffs)
                .field("rate", rate)
                .finish(),
            Fertility::PowerDecline { coeffs, exponent } => f
                .debug_struct("PowerDecline")
                .field("coeffs", coeffs)
                .field("exponent", exponent)
                .finish(),
            Fertility::Custom(fns) => f.debug_tuple("Custom").field(&fns.len()).finish(),
        }
    }
}

impl fmt::Debug for Mortality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mortality::PowerLaw {
                base,
                scale,
                exponent,
            } => f
                .debug_struct("PowerLaw")
                .field("base", base)
                .field("scale", scale)
                .field("exponent", exponent)
                .finish(),
            Mortality::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Immutable demographic model. Construct with [`ModelSpec::new`]; all
/// evaluation operations are pure, so a spec can be shared freely across
/// threads.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    n: usize,
    kernel: Kernel,
    fertility: Fertility,
    mortality: Mortality,
}

impl ModelSpec {
    /// Builds a model after checking the structural parameter constraints
    /// (positivity of decay rates, coefficient count, order cap). The
    /// analytic standing assumptions are checked separately by
    /// [`ModelSpec::validate_assumptions`].
    pub fn new(kernel: Kernel, fertility: Fertility, mortality: Mortality) -> Result<Self> {
        let n_coeffs = match &fertility {
            Fertility::ExpDecline { coeffs, rate } => {
                require_finite_positive("fertility.rate", *rate)?;
                check_coeffs(coeffs)?;
                coeffs.len()
            }
            Fertility::PowerDecline { coeffs, exponent } => {
                require_finite_positive("fertility.exponent", *exponent)?;
                check_coeffs(coeffs)?;
                coeffs.len()
            }
            Fertility::Custom(fns) => {
                if fns.is_empty() {
                    return Err(Error::config(
                        "fertility",
                        "at least one coefficient function is required",
                    ));
                }
                fns.len()
            }
        };
        if n_coeffs > MAX_ORDER + 1 {
            return Err(Error::config(
                "fertility.coeffs",
                format!(
                    "{} coefficients exceed the order cap n <= {MAX_ORDER}",
                    n_coeffs
                ),
            ));
        }
        match &kernel {
            Kernel::PolynomialAge { rho } => require_finite_positive("kernel.rho", *rho)?,
            Kernel::MultiExponential { rhos } => {
                if rhos.len() != n_coeffs {
                    return Err(Error::config(
                        "kernel.rhos",
                        format!(
                            "{} decay rates do not match {} fertility coefficients",
                            rhos.len(),
                            n_coeffs
                        ),
                    ));
                }
                for (i, rho) in rhos.iter().enumerate() {
                    require_finite_positive(&format!("kernel.rhos[{i}]"), *rho)?;
                }
            }
        }
        match &mortality {
            Mortality::PowerLaw {
                base,
                scale,
                exponent,
            } => {
                require_finite_positive("mortality.base", *base)?;
                require_finite_positive("mortality.scale", *scale)?;
                if !exponent.is_finite() || *exponent < 0.0 {
                    return Err(Error::config(
                        "mortality.exponent",
                        format!("must be finite and >= 0, got {exponent}"),
                    ));
                }
            }
            Mortality::Custom(_) => {}
        }
        Ok(ModelSpec {
            n: n_coeffs - 1,
            kernel,
            fertility,
            mortality,
        })
    }

    /// Polynomial order `n`; there are `n + 1` fertility coefficients.
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn fertility(&self) -> &Fertility {
        &self.fertility
    }

    pub fn mortality(&self) -> &Mortality {
        &self.mortality
    }

    /// `beta_i(x)`. Errors when `i > n`.
    pub fn eval_beta(&self, i: usize, x: f64) -> Result<f64> {
        if i > self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                order: self.n,
            });
        }
        Ok(self.beta_unchecked(i, x))
    }

    pub(crate) fn beta_unchecked(&self, i: usize, x: f64) -> f64 {
        match &self.fertility {
            Fertility::ExpDecline { coeffs, rate } => coeffs[i] * (-rate * x).exp(),
            Fertility::PowerDecline { coeffs, exponent } => coeffs[i] * (1.0 + x).powf(-exponent),
            Fertility::Custom(fns) => fns[i](x),
        }
    }

    /// `mu(x)`.
    pub fn eval_mu(&self, x: f64) -> f64 {
        match &self.mortality {
            Mortality::PowerLaw {
                base,
                scale,
                exponent,
            } => base + scale * x.powf(*exponent),
            Mortality::Custom(f) => f(x),
        }
    }

    /// `beta_i'(x)` where the family exposes it.
    pub fn beta_derivative(&self, i: usize, x: f64) -> Option<f64> {
        match &self.fertility {
            Fertility::ExpDecline { coeffs, rate } => Some(-rate * coeffs[i] * (-rate * x).exp()),
            Fertility::PowerDecline { coeffs, exponent } => {
                Some(-exponent * coeffs[i] * (1.0 + x).powf(-exponent - 1.0))
            }
            Fertility::Custom(_) => None,
        }
    }

    /// `mu'(x)` where the family exposes it.
    pub fn mu_derivative(&self, x: f64) -> Option<f64> {
        match &self.mortality {
            Mortality::PowerLaw {
                base: _,
                scale,
                exponent,
            } => {
                if *exponent == 0.0 {
                    Some(0.0)
                } else {
                    Some(scale * exponent * x.powf(exponent - 1.0))
                }
            }
            Mortality::Custom(_) => None,
        }
    }

    pub fn has_closed_form_derivatives(&self) -> bool {
        !matches!(self.fertility, Fertility::Custom(_))
            && !matches!(self.mortality, Mortality::Custom(_))
    }

    /// A built-in coefficient with `coeffs[i] == 0` counts as absent: it is
    /// exempt from the fertility shape checks and contributes nothing.
    pub fn coefficient_active(&self, i: usize) -> bool {
        match &self.fertility {
            Fertility::ExpDecline { coeffs, .. } => coeffs[i] > 0.0,
            Fertility::PowerDecline { coeffs, .. } => coeffs[i] > 0.0,
            Fertility::Custom(_) => true,
        }
    }

    /// Checks the standing assumptions on `beta_i` and `mu` over `grid` and
    /// returns every violation. The grid must be finite, strictly
    /// increasing, and start at 0.
    ///
    /// Built-in families are checked through their closed-form derivative
    /// signs, so they pass on any grid when the parameters are admissible.
    /// Custom families are checked pointwise and pairwise on the grid, with
    /// the vanishing/unbounded limits sampled at the last grid point.
    pub fn validate_assumptions(&self, grid: &[f64]) -> ValidationReport {
        assert!(
            grid.len() >= 2 && grid[0] == 0.0,
            "validation grid must start at 0 and hold at least two points"
        );
        assert!(
            grid.windows(2).all(|w| w[0] < w[1] && w[1].is_finite()),
            "validation grid must be strictly increasing and finite"
        );
        let mut violations = Vec::new();
        self.check_fertility(grid, &mut violations);
        self.check_mortality(grid, &mut violations);
        ValidationReport::new(violations)
    }

    fn check_fertility(&self, grid: &[f64], out: &mut Vec<Violation>) {
        let x_last = *grid.last().unwrap();
        match &self.fertility {
            // Admissible parameters make every condition hold analytically:
            // coeffs[i] > 0 and rate/exponent > 0 give positivity, strict
            // decrease and a vanishing limit. The constructor enforces them,
            // so there is nothing to flag.
            Fertility::ExpDecline { .. } | Fertility::PowerDecline { .. } => {}
            Fertility::Custom(fns) => {
                for (i, f) in fns.iter().enumerate() {
                    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
                    if i == 0 && values[0].abs() <= MONOTONE_TOL {
                        out.push(Violation::new(
                            Condition::FertilityShape,
                            0.0,
                            vec![values[0]],
                            "leading coefficient vanishes at x = 0",
                        ));
                    }
                    for (&x, &v) in grid.iter().zip(&values) {
                        if !(v > 0.0) {
                            out.push(Violation::new(
                                Condition::FertilityShape,
                                x,
                                vec![v],
                                format!("beta_{i} must be positive"),
                            ));
                        }
                    }
                    for (w, xs) in values.windows(2).zip(grid.windows(2)) {
                        if !(w[0] - w[1] > MONOTONE_TOL) {
                            out.push(Violation::new(
                                Condition::FertilityShape,
                                xs[1],
                                vec![w[0], w[1]],
                                format!("beta_{i} must be strictly decreasing"),
                            ));
                        }
                    }
                    let tail = values[values.len() - 1];
                    if tail > VANISHING_TOL {
                        out.push(Violation::new(
                            Condition::FertilityShape,
                            x_last,
                            vec![tail],
                            format!("beta_{i} does not vanish at large population sizes"),
                        ));
                    }
                }
            }
        }
    }

    fn check_mortality(&self, grid: &[f64], out: &mut Vec<Violation>) {
        let x_last = *grid.last().unwrap();
        match &self.mortality {
            Mortality::PowerLaw { exponent, .. } => {
                // base > 0 and scale > 0 hold by construction; positivity and,
                // for exponent > 0, strict increase and unbounded growth
                // follow. A zero exponent makes mu constant.
                if *exponent == 0.0 {
                    for xs in grid.windows(2) {
                        out.push(Violation::new(
                            Condition::MortalityIncreasing,
                            xs[1],
                            vec![self.eval_mu(xs[0]), self.eval_mu(xs[1])],
                            "mortality is constant, not strictly increasing",
                        ));
                    }
                    out.push(Violation::new(
                        Condition::MortalityUnbounded,
                        x_last,
                        vec![self.eval_mu(x_last)],
                        "constant mortality stays bounded",
                    ));
                }
            }
            Mortality::Custom(f) => {
                let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
                for (&x, &v) in grid.iter().zip(&values) {
                    if !(v > 0.0) {
                        out.push(Violation::new(
                            Condition::MortalityPositive,
                            x,
                            vec![v],
                            "mu must be positive",
                        ));
                    }
                }
                for (w, xs) in values.windows(2).zip(grid.windows(2)) {
                    if !(w[1] - w[0] > MONOTONE_TOL) {
                        out.push(Violation::new(
                            Condition::MortalityIncreasing,
                            xs[1],
                            vec![w[0], w[1]],
                            "mu must be strictly increasing",
                        ));
                    }
                }
                // Finite surrogate for unbounded growth: by the end of the
                // grid the rate must clearly have left its starting scale.
                let bound = (2.0 * values[0]).max(10.0);
                let tail = values[values.len() - 1];
                if tail < bound {
                    out.push(Violation::new(
                        Condition::MortalityUnbounded,
                        x_last,
                        vec![tail],
                        format!("mu({x_last}) = {tail} has not exceeded the growth bound {bound}"),
                    ));
                }
            }
        }
    }
}

fn check_coeffs(coeffs: &[f64]) -> Result<()> {
    if coeffs.is_empty() {
        return Err(Error::config(
            "fertility.coeffs",
            "at least one coefficient is required",
        ));
    }
    if !(coeffs[0] > 0.0) {
        return Err(Error::config(
            "fertility.coeffs[0]",
            format!("leading coefficient must be > 0, got {}", coeffs[0]),
        ));
    }
    for (i, b) in coeffs.iter().enumerate() {
        if !b.is_finite() || *b < 0.0 {
            return Err(Error::config(
                &format!("fertility.coeffs[{i}]"),
                format!("must be finite and >= 0, got {b}"),
            ));
        }
    }
    Ok(())
}

fn require_finite_positive(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::config(
            field,
            format!("must be finite and > 0, got {v}"),
        ));
    }
    Ok(())
}

/// Default validation grid: 0 followed by 32 log-spaced points in
/// `[1e-3, 1e3]`.
pub fn default_validation_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(33);
    grid.push(0.0);
    let (lo, hi) = (1e-3f64.ln(), 1e3f64.ln());
    for k in 0..32 {
        let t = k as f64 / 31.0;
        grid.push((lo + t * (hi - lo)).exp());
    }
    grid
}

/// Standing assumptions that `validate_assumptions` checks. The serialized
/// codes are the condition identifiers used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// Fertility coefficients: positive, strictly decreasing, vanishing at
    /// infinity, leading coefficient nonzero at 0.
    #[serde(rename = "cb")]
    FertilityShape,
    /// Mortality positive.
    #[serde(rename = "cm")]
    MortalityPositive,
    /// Mortality strictly increasing.
    #[serde(rename = "cmd")]
    MortalityIncreasing,
    /// Mortality unbounded as the population grows.
    #[serde(rename = "li")]
    MortalityUnbounded,
    /// Initial density positive on its support.
    #[serde(rename = "in")]
    DensityPositive,
    /// Initial density has a finite integral.
    #[serde(rename = "pn")]
    DensityIntegrable,
}

impl Condition {
    pub fn code(&self) -> &'static str {
        match self {
            Condition::FertilityShape => "cb",
            Condition::MortalityPositive => "cm",
            Condition::MortalityIncreasing => "cmd",
            Condition::MortalityUnbounded => "li",
            Condition::DensityPositive => "in",
            Condition::DensityIntegrable => "pn",
        }
    }
}

/// One failed check: which condition, at which sample point, and the
/// observed values (one for point checks, two for pair checks).
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub x: f64,
    pub observed: Vec<f64>,
    pub detail: String,
}

impl Violation {
    fn new(condition: Condition, x: f64, observed: Vec<f64>, detail: impl Into<String>) -> Self {
        Violation {
            condition,
            x,
            observed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn new(violations: Vec<Violation>) -> Self {
        ValidationReport {
            passed: violations.is_empty(),
            violations,
        }
    }
}

/// Initial age density `p_0(a)`, positive on its support with a finite
/// integral. `declared_tail_rate` is the caller's exponential bound on the
/// decay of `p_0` beyond the truncation age, used for closed-form tail
/// estimates.
#[derive(Debug, Clone)]
pub struct InitialDensity {
    profile: DensityProfile,
    declared_tail_rate: f64,
}

#[derive(Debug, Clone)]
pub enum DensityProfile {
    /// `p_0(a) = scale * e^{-rate * a}`
    ExpDecay { scale: f64, rate: f64 },
    /// Piecewise-linear table on `ages`; zero beyond the last age.
    Table { ages: Vec<f64>, values: Vec<f64> },
}

impl InitialDensity {
    /// Exponentially decaying density. The declared tail rate defaults to
    /// the decay rate itself.
    pub fn exp_decay(scale: f64, rate: f64) -> Result<Self> {
        require_finite_positive("initial.scale", scale)?;
        require_finite_positive("initial.rate", rate)?;
        Ok(InitialDensity {
            profile: DensityProfile::ExpDecay { scale, rate },
            declared_tail_rate: rate,
        })
    }

    /// Tabulated density, linearly interpolated. Every value must be
    /// positive and the ages strictly increasing from 0.
    pub fn table(ages: Vec<f64>, values: Vec<f64>, declared_tail_rate: f64) -> Result<Self> {
        require_finite_positive("initial.declared_tail_rate", declared_tail_rate)?;
        if ages.len() != values.len() || ages.len() < 2 {
            return Err(Error::config(
                "initial.table",
                "ages and values must have equal length >= 2",
            ));
        }
        if ages[0] != 0.0 || ages.windows(2).any(|w| !(w[0] < w[1]) || !w[1].is_finite()) {
            return Err(Error::config(
                "initial.table.ages",
                "must be strictly increasing starting at 0",
            ));
        }
        for (a, v) in ages.iter().zip(&values) {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::config(
                    "initial.table.values",
                    format!("density must be positive on its support, got {v} at age {a}"),
                ));
            }
        }
        Ok(InitialDensity {
            profile: DensityProfile::Table { ages, values },
            declared_tail_rate,
        })
    }

    pub fn with_tail_rate(mut self, declared_tail_rate: f64) -> Result<Self> {
        require_finite_positive("initial.declared_tail_rate", declared_tail_rate)?;
        self.declared_tail_rate = declared_tail_rate;
        Ok(self)
    }

    pub fn declared_tail_rate(&self) -> f64 {
        self.declared_tail_rate
    }

    pub fn profile(&self) -> &DensityProfile {
        &self.profile
    }

    /// Edges of the smooth pieces of the density inside `[0, a_max]`:
    /// table nodes, ending at the table's support (the density is exactly
    /// zero beyond it). Quadratures split here and skip the zero part.
    pub fn breakpoints(&self, a_max: f64) -> Vec<f64> {
        let mut edges = vec![0.0];
        let mut end = a_max;
        if let DensityProfile::Table { ages, .. } = &self.profile {
            end = ages.last().unwrap().min(a_max);
            for &a in ages {
                if a > 0.0 && a < end {
                    edges.push(a);
                }
            }
        }
        edges.push(end);
        edges
    }

    /// `p_0(a)` for `a >= 0`; zero beyond a table's support.
    pub fn eval(&self, a: f64) -> f64 {
        match &self.profile {
            DensityProfile::ExpDecay { scale, rate } => scale * (-rate * a).exp(),
            DensityProfile::Table { ages, values } => {
                if a < 0.0 || a > *ages.last().unwrap() {
                    return 0.0;
                }
                let k = ages.partition_point(|&g| g <= a);
                if k == 0 {
                    return values[0];
                }
                if k == ages.len() {
                    return values[values.len() - 1];
                }
                let (a0, a1) = (ages[k - 1], ages[k]);
                let s = (a - a0) / (a1 - a0);
                values[k - 1] * (1.0 - s) + values[k] * s
            }
        }
    }
}
