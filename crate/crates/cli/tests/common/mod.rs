//! Shared helpers for the CLI integration and acceptance tests: scenario
//! builders, a binary runner, and seeded random model families.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::rngs::StdRng;
use rand::Rng;

use agepop::model::{Fertility, Mortality};
use agepop::{InitialDensity, Kernel, ModelSpec, StateVector};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_agepop")
}

pub struct CmdResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str]) -> CmdResult {
    let output = Command::new(bin())
        .args(args)
        .output()
        .expect("failed to launch the binary");
    CmdResult {
        code: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

/// Fresh scratch directory under the target tmp root.
pub fn scratch_dir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("agepop-test-{label}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Reference scenario (n = 1, rho = 2, exponentially declining fertility,
/// quadratic mortality) with all fertility coefficients scaled.
pub fn reference_scenario_json(fertility_scale: f64) -> String {
    format!(
        r#"{{
  "model": {{
    "n": 1,
    "kernel": {{ "type": "polynomial_age", "rho": 2.0 }},
    "fertility": {{ "family": "exp_decline", "coeffs": [{}, {}], "rate": 1.0 }},
    "mortality": {{ "family": "power_law", "base": 1.0, "scale": 1.0, "exponent": 2.0 }}
  }},
  "initial": {{
    "density": {{ "family": "exp_decay", "scale": 1.0, "rate": 1.0 }},
    "a_max": 50.0
  }},
  "sim": {{ "t_end": 100.0, "rtol": 1e-8, "atol": 1e-14 }},
  "output": {{ "dir": "out", "age_grid_points": 2001 }}
}}
"#,
        fertility_scale,
        4.5 * fertility_scale
    )
}

pub fn write_scenario(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

/// Reference model built directly against the core API.
pub fn reference_model(fertility_scale: f64) -> ModelSpec {
    ModelSpec::new(
        Kernel::PolynomialAge { rho: 2.0 },
        Fertility::ExpDecline {
            coeffs: vec![fertility_scale, 4.5 * fertility_scale],
            rate: 1.0,
        },
        Mortality::PowerLaw {
            base: 1.0,
            scale: 1.0,
            exponent: 2.0,
        },
    )
    .unwrap()
}

pub fn reference_density() -> InitialDensity {
    InitialDensity::exp_decay(1.0, 1.0).unwrap()
}

/// Random admissible model with the fertility coefficients rescaled so the
/// base reproduction rate equals `target_r0` exactly.
pub fn random_model(rng: &mut StdRng, target_r0: f64, polynomial_only: bool) -> ModelSpec {
    let order = rng.random_range(0..=3usize);
    let polynomial = polynomial_only || rng.random_bool(0.5);
    let kernel = if polynomial {
        Kernel::PolynomialAge {
            rho: rng.random_range(0.5..3.0),
        }
    } else {
        Kernel::MultiExponential {
            rhos: (0..=order).map(|_| rng.random_range(0.5..3.0)).collect(),
        }
    };
    let coeffs: Vec<f64> = (0..=order).map(|_| rng.random_range(0.2..4.0)).collect();
    let rate = rng.random_range(0.3..2.0);
    let mortality = Mortality::PowerLaw {
        base: rng.random_range(0.5..2.0),
        scale: rng.random_range(0.3..2.0),
        exponent: rng.random_range(1.0..3.0),
    };
    let draft = ModelSpec::new(
        kernel.clone(),
        Fertility::ExpDecline {
            coeffs: coeffs.clone(),
            rate,
        },
        mortality.clone(),
    )
    .unwrap();
    let r0 = agepop::net_reproduction_rate(&draft, 0.0);
    let scale = target_r0 / r0;
    ModelSpec::new(
        kernel,
        Fertility::ExpDecline {
            coeffs: coeffs.iter().map(|b| b * scale).collect(),
            rate,
        },
        mortality,
    )
    .unwrap()
}

/// Random model from the window where the moment-ordering chain is
/// guaranteed: polynomial kernel, n <= 1, rho + mu(0) >= 4 and a base
/// reproduction rate far enough above the fertility-sum threshold.
pub fn random_chain_model(rng: &mut StdRng) -> ModelSpec {
    let order = rng.random_range(0..=1usize);
    let kernel = Kernel::PolynomialAge {
        rho: rng.random_range(2.5..3.0),
    };
    let coeffs: Vec<f64> = (0..=order).map(|_| rng.random_range(0.2..4.0)).collect();
    let rate = rng.random_range(0.3..1.0);
    let mortality = Mortality::PowerLaw {
        base: rng.random_range(1.5..2.5),
        scale: rng.random_range(0.3..2.0),
        exponent: rng.random_range(1.0..3.0),
    };
    let target_r0 = rng.random_range(0.55..0.9);
    let draft = ModelSpec::new(
        kernel.clone(),
        Fertility::ExpDecline {
            coeffs: coeffs.clone(),
            rate,
        },
        mortality.clone(),
    )
    .unwrap();
    let r0 = agepop::net_reproduction_rate(&draft, 0.0);
    let scale = target_r0 / r0;
    ModelSpec::new(
        kernel,
        Fertility::ExpDecline {
            coeffs: coeffs.iter().map(|b| b * scale).collect(),
            rate,
        },
        mortality,
    )
    .unwrap()
}

/// Strictly ordered initial data for the chain runs, kept small so the
/// fertility sum stays above one along the transient.
pub fn ordered_small_init(rng: &mut StdRng, order: usize) -> StateVector {
    let total = rng.random_range(0.2..0.5);
    let ratio = rng.random_range(0.15..0.85);
    let mut moments = Vec::with_capacity(order + 1);
    let mut v = total;
    for _ in 0..=order {
        v *= ratio;
        moments.push(v);
    }
    StateVector::new(total, moments).unwrap()
}

pub fn positive_random_init(rng: &mut StdRng, order: usize) -> StateVector {
    StateVector::new(
        rng.random_range(0.2..4.0),
        (0..=order).map(|_| rng.random_range(0.05..2.0)).collect(),
    )
    .unwrap()
}
