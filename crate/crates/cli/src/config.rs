//! Scenario configuration: one JSON document describing the model, the
//! initial age density, integration settings, and output targets.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use agepop::model::{Fertility, Mortality};
use agepop::{InitialDensity, IntegrationSettings, Kernel, ModelSpec, QuadratureSettings};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub kernel: KernelSection,
    pub fertility: FertilitySection,
    pub mortality: MortalitySection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSection {
    PolynomialAge { rho: f64 },
    MultiExponential { rhos: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FertilitySection {
    ExpDecline { coeffs: Vec<f64>, rate: f64 },
    PowerDecline { coeffs: Vec<f64>, exponent: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MortalitySection {
    PowerLaw {
        base: f64,
        scale: f64,
        exponent: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySection {
    ExpDecay { scale: f64, rate: f64 },
    Table { ages: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub density: DensitySection,
    /// Exponential bound on the density decay beyond `a_max`; defaults to
    /// the decay rate of an `exp_decay` density.
    pub declared_tail_rate: Option<f64>,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_age_grid_points")]
    pub age_grid_points: usize,
}

fn default_a_max() -> f64 {
    50.0
}
fn default_abs_tol() -> f64 {
    1e-10
}
fn default_t_end() -> f64 {
    100.0
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-14
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_age_grid_points() -> usize {
    2001
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            t_end: default_t_end(),
            rtol: default_rtol(),
            atol: default_atol(),
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            age_grid_points: default_age_grid_points(),
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::config(format!(
                "configuration error at `{}`: {}",
                e.path(),
                e.inner()
            ))
        })?;
        config.check_counts()?;
        Ok(config)
    }

    fn check_counts(&self) -> Result<(), CliError> {
        let n = self.model.n;
        let coeffs = match &self.model.fertility {
            FertilitySection::ExpDecline { coeffs, .. } => coeffs.len(),
            FertilitySection::PowerDecline { coeffs, .. } => coeffs.len(),
        };
        if coeffs != n + 1 {
            return Err(CliError::config(format!(
                "configuration error at `model.fertility.coeffs`: {coeffs} coefficients do not match n = {n}"
            )));
        }
        if let KernelSection::MultiExponential { rhos } = &self.model.kernel {
            if rhos.len() != n + 1 {
                return Err(CliError::config(format!(
                    "configuration error at `model.kernel.rhos`: {} decay rates do not match n = {n}",
                    rhos.len()
                )));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ModelSpec, CliError> {
        let kernel = match &self.model.kernel {
            KernelSection::PolynomialAge { rho } => Kernel::PolynomialAge { rho: *rho },
            KernelSection::MultiExponential { rhos } => {
                Kernel::MultiExponential { rhos: rhos.clone() }
            }
        };
        let fertility = match &self.model.fertility {
            FertilitySection::ExpDecline { coeffs, rate } => Fertility::ExpDecline {
                coeffs: coeffs.clone(),
                rate: *rate,
            },
            FertilitySection::PowerDecline { coeffs, exponent } => Fertility::PowerDecline {
                coeffs: coeffs.clone(),
                exponent: *exponent,
            },
        };
        let mortality = match &self.model.mortality {
            MortalitySection::PowerLaw {
                base,
                scale,
                exponent,
            } => Mortality::PowerLaw {
                base: *base,
                scale: *scale,
                exponent: *exponent,
            },
        };
        ModelSpec::new(kernel, fertility, mortality).map_err(CliError::from)
    }

    pub fn build_density(&self) -> Result<InitialDensity, CliError> {
        let density = match &self.initial.density {
            DensitySection::ExpDecay { scale, rate } => InitialDensity::exp_decay(*scale, *rate),
            DensitySection::Table { ages, values } => InitialDensity::table(
                ages.clone(),
                values.clone(),
                self.initial.declared_tail_rate.unwrap_or(1.0),
            ),
        }
        .map_err(CliError::from)?;
        match self.initial.declared_tail_rate {
            Some(rate) => density.with_tail_rate(rate).map_err(CliError::from),
            None => Ok(density),
        }
    }

    pub fn quadrature_settings(&self) -> QuadratureSettings {
        QuadratureSettings {
            a_max: self.initial.a_max,
            abs_tol: self.initial.abs_tol,
            ..QuadratureSettings::default()
        }
    }

    pub fn integration_settings(&self) -> IntegrationSettings {
        IntegrationSettings {
            rtol: self.sim.rtol,
            atol: self.sim.atol,
            ..IntegrationSettings::default()
        }
    }
}
