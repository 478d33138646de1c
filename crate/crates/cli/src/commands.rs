//! Subcommand implementations. Every command loads a scenario, runs the
//! corresponding pipeline, writes machine-readable outputs into the output
//! directory, and prints a short human summary.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use agepop::model::default_validation_grid;
use agepop::reproduction::{classify, net_reproduction_rate, nontrivial_equilibrium};
use agepop::{
    compare_bound, comparison_trajectory, integrate, moment_consistency, moments_from_density,
    pde_solve, reconstruct_density, run_monitors, uniform_age_grid, AgeDensityGrid,
    EquilibriumReport, Regime, StateVector, Trajectory,
};

use crate::config::{KernelSection, ScenarioConfig};
use crate::output::{ensure_dir, fmt_f64, out_path, write_json, CsvWriter};
use crate::CliError;

pub fn cmd_validate(config: &ScenarioConfig, out_dir: &Path) -> Result<i32, CliError> {
    let model = config.build_model()?;
    config.build_density()?;
    let report = model.validate_assumptions(&default_validation_grid());
    ensure_dir(out_dir)?;
    write_json(&out_path(out_dir, "validation.json"), &report)?;
    if report.passed {
        println!("assumptions: pass");
        Ok(0)
    } else {
        println!("assumptions: FAIL ({} violations)", report.violations.len());
        for v in &report.violations {
            println!(
                "  ({}) at x = {}: {}",
                v.condition.code(),
                fmt_f64(v.x),
                v.detail
            );
        }
        Ok(3)
    }
}

#[derive(Serialize)]
struct EquilibriumOutput {
    r0: f64,
    regime: Regime,
    p_star: f64,
    moments_star: Vec<f64>,
    residual_inf_norm: f64,
}

pub fn cmd_equilibrium(config: &ScenarioConfig, out_dir: &Path) -> Result<i32, CliError> {
    let model = config.build_model()?;
    let summary = classify(&model);
    let report = match summary.regime {
        Regime::Supercritical => nontrivial_equilibrium(&model)?,
        regime => EquilibriumReport::trivial(&model, regime),
    };
    let output = EquilibriumOutput {
        r0: summary.r0,
        regime: report.regime,
        p_star: report.total,
        moments_star: report.moments.clone(),
        residual_inf_norm: report.residual_inf_norm,
    };
    ensure_dir(out_dir)?;
    write_json(&out_path(out_dir, "equilibrium.json"), &output)?;

    println!("regime              {}", output.regime);
    println!("R0                  {}", fmt_f64(output.r0));
    println!("P_star              {}", fmt_f64(output.p_star));
    for (i, m) in output.moments_star.iter().enumerate() {
        println!("P{i}_star             {}", fmt_f64(*m));
    }
    println!("residual_inf_norm   {}", fmt_f64(output.residual_inf_norm));
    Ok(0)
}

fn simulate_pipeline(
    config: &ScenarioConfig,
    t_end: f64,
) -> Result<
    (
        agepop::ModelSpec,
        agepop::InitialDensity,
        StateVector,
        Trajectory,
    ),
    CliError,
> {
    let model = config.build_model()?;
    let density = config.build_density()?;
    let init = moments_from_density(&density, &model, &config.quadrature_settings())?;
    let traj = integrate(&model, &init.state, t_end, &config.integration_settings())?;
    Ok((model, density, init.state, traj))
}

fn write_series(model: &agepop::ModelSpec, traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    let n = model.order();
    let mut header: Vec<String> = vec!["t".into(), "P".into()];
    for i in 0..=n {
        header.push(format!("P{i}"));
    }
    header.extend(["B".to_string(), "Rn_of_P".to_string(), "M".to_string()]);
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = CsvWriter::new(&header_refs);
    for (idx, &t) in traj.times().iter().enumerate() {
        let state = traj.state(idx);
        let mut row = Vec::with_capacity(n + 5);
        row.push(t);
        row.push(state.total);
        row.extend_from_slice(&state.moments);
        row.push(traj.births()[idx]);
        row.push(net_reproduction_rate(model, state.total.max(0.0)));
        row.push(traj.cum_mortality()[idx]);
        csv.row_f64(&row);
    }
    csv.write(path)
}

pub fn cmd_simulate(
    config: &ScenarioConfig,
    t_end: Option<f64>,
    out_dir: &Path,
) -> Result<i32, CliError> {
    let t_end = t_end.unwrap_or(config.sim.t_end);
    let (model, _, _, traj) = simulate_pipeline(config, t_end)?;
    ensure_dir(out_dir)?;
    write_series(&model, &traj, &out_path(out_dir, "simulate.csv"))?;
    let monitors = run_monitors(&model, &traj)?;
    write_json(&out_path(out_dir, "monitors.json"), &monitors)?;

    let last = traj.state(traj.len() - 1);
    println!(
        "simulated {} steps to t = {}; final P = {}{}",
        traj.len() - 1,
        fmt_f64(traj.t_end()),
        fmt_f64(last.total),
        if traj.hit_extinction_floor() {
            " (extinction floor reached)"
        } else {
            ""
        }
    );
    println!(
        "monitors: positivity {}, ordering chain {}",
        describe(&monitors.positivity),
        describe(&monitors.ordering_chain),
    );
    Ok(0)
}

fn describe(finding: &agepop::MonitorFinding) -> &'static str {
    if !finding.hypothesis_held {
        "not applicable"
    } else if finding.conclusion_held == Some(true) {
        "held"
    } else {
        "VIOLATED"
    }
}

#[derive(Serialize)]
struct ConsistencyEntry {
    t: f64,
    relative_errors: Vec<f64>,
    seam_jump: Option<f64>,
}

pub fn cmd_reconstruct(
    config: &ScenarioConfig,
    times: &str,
    out_dir: &Path,
) -> Result<i32, CliError> {
    let times = parse_list(times, "--times")?;
    let (model, density, _, traj) = simulate_pipeline(config, config.sim.t_end)?;
    let ages = uniform_age_grid(config.initial.a_max, config.output.age_grid_points);
    ensure_dir(out_dir)?;

    let mut entries = Vec::with_capacity(times.len());
    for &t in &times {
        let grid: AgeDensityGrid = reconstruct_density(&model, &traj, &density, &ages, t)?;
        let mut csv = CsvWriter::new(&["a", "p", "phi"]);
        for ((a, p), phi) in grid.ages.iter().zip(&grid.density).zip(&grid.profile) {
            csv.row_f64(&[*a, *p, *phi]);
        }
        csv.write(&out_path(
            out_dir,
            &format!("reconstruct_t{}.csv", fmt_f64(t)),
        ))?;
        let errors = moment_consistency(&model, &grid, &traj)?;
        println!(
            "t = {}: max moment-consistency error {}",
            fmt_f64(t),
            fmt_f64(errors.iter().copied().fold(0.0, f64::max))
        );
        entries.push(ConsistencyEntry {
            t,
            relative_errors: errors,
            seam_jump: grid.seam_jump,
        });
    }
    write_json(&out_path(out_dir, "consistency.json"), &entries)?;
    Ok(0)
}

enum SweepParam {
    FertilityScale,
    MortalityBase,
    MortalityScale,
    KernelRho,
}

impl SweepParam {
    fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "fertility.scale" => Ok(SweepParam::FertilityScale),
            "mortality.base" => Ok(SweepParam::MortalityBase),
            "mortality.scale" => Ok(SweepParam::MortalityScale),
            "kernel.rho" => Ok(SweepParam::KernelRho),
            other => Err(CliError::config(format!(
                "unknown sweep parameter `{other}`; expected fertility.scale, \
                 mortality.base, mortality.scale, or kernel.rho"
            ))),
        }
    }

    fn apply(&self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, CliError> {
        let mut patched = config.clone();
        match self {
            SweepParam::FertilityScale => {
                use crate::config::FertilitySection::*;
                match &mut patched.model.fertility {
                    ExpDecline { coeffs, .. } | PowerDecline { coeffs, .. } => {
                        for b in coeffs.iter_mut() {
                            *b *= value;
                        }
                    }
                }
            }
            SweepParam::MortalityBase => {
                let crate::config::MortalitySection::PowerLaw { base, .. } =
                    &mut patched.model.mortality;
                *base = value;
            }
            SweepParam::MortalityScale => {
                let crate::config::MortalitySection::PowerLaw { scale, .. } =
                    &mut patched.model.mortality;
                *scale = value;
            }
            SweepParam::KernelRho => match &mut patched.model.kernel {
                KernelSection::PolynomialAge { rho } => *rho = value,
                KernelSection::MultiExponential { .. } => {
                    return Err(CliError::config(
                        "kernel.rho sweeps apply to the polynomial_age kernel only".to_string(),
                    ))
                }
            },
        }
        Ok(patched)
    }
}

struct SweepRow {
    value: f64,
    r0: f64,
    regime: Regime,
    p_star: Option<f64>,
    p_end: f64,
}

pub fn cmd_sweep(
    config: &ScenarioConfig,
    param: &str,
    values: &str,
    t_end: Option<f64>,
    out_dir: &Path,
) -> Result<i32, CliError> {
    let param = SweepParam::parse(param)?;
    let values = parse_list(values, "--values")?;
    let t_end = t_end.unwrap_or(config.sim.t_end);

    // Fan out over the requested values; the indexed collect keeps the
    // output rows in input order whatever the execution order.
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| -> Result<SweepRow, CliError> {
            let patched = param.apply(config, value)?;
            let model = patched.build_model()?;
            let summary = classify(&model);
            let p_star = match summary.regime {
                Regime::Supercritical => Some(nontrivial_equilibrium(&model)?.total),
                _ => None,
            };
            let density = patched.build_density()?;
            let init = moments_from_density(&density, &model, &patched.quadrature_settings())?;
            let traj = integrate(&model, &init.state, t_end, &patched.integration_settings())?;
            Ok(SweepRow {
                value,
                r0: summary.r0,
                regime: summary.regime,
                p_star,
                p_end: traj.state(traj.len() - 1).total,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    ensure_dir(out_dir)?;
    let mut csv = CsvWriter::new(&["value", "R0", "regime", "P_star", "P_at_t_end"]);
    for row in &rows {
        csv.row(&[
            fmt_f64(row.value),
            fmt_f64(row.r0),
            row.regime.to_string(),
            row.p_star.map(fmt_f64).unwrap_or_default(),
            fmt_f64(row.p_end),
        ]);
    }
    csv.write(&out_path(out_dir, "sweep.csv"))?;
    println!("swept {} values; sweep.csv written", rows.len());
    Ok(0)
}

pub fn cmd_compare(
    config: &ScenarioConfig,
    t_end: Option<f64>,
    out_dir: &Path,
) -> Result<i32, CliError> {
    let t_end = t_end.unwrap_or(config.sim.t_end);
    let (model, _, init, nonlinear) = simulate_pipeline(config, t_end)?;
    let frozen = comparison_trajectory(&model, &init, t_end, &config.integration_settings())?;
    let check = compare_bound(&nonlinear, &frozen, 1e-10)?;

    ensure_dir(out_dir)?;
    let mut csv = CsvWriter::new(&["t", "P", "P_bar"]);
    for &t in agepop::oracle::union_times(&nonlinear, &frozen).iter() {
        csv.row_f64(&[t, nonlinear.total_at(t)?, frozen.total_at(t)?]);
    }
    csv.write(&out_path(out_dir, "compare.csv"))?;
    write_json(&out_path(out_dir, "compare.json"), &check)?;
    println!("comparison bound holds: {}", check.holds);
    Ok(0)
}

pub fn cmd_oracle_pde(
    config: &ScenarioConfig,
    dt: f64,
    t_end: Option<f64>,
    out_dir: &Path,
) -> Result<i32, CliError> {
    let t_end = t_end.unwrap_or(config.sim.t_end);
    let model = config.build_model()?;
    let density = config.build_density()?;
    let run = pde_solve(&model, &density, config.initial.a_max, dt, t_end)?;
    let init = moments_from_density(&density, &model, &config.quadrature_settings())?;
    let traj = integrate(&model, &init.state, t_end, &config.integration_settings())?;

    ensure_dir(out_dir)?;
    let mut csv = CsvWriter::new(&["t", "P_ode", "P_pde", "rel_err"]);
    let mut max_rel = 0.0f64;
    for (&t, &p_pde) in run.times.iter().zip(&run.totals) {
        let p_ode = traj.total_at(t)?;
        let rel = (p_pde - p_ode).abs() / p_ode.abs().max(f64::MIN_POSITIVE);
        max_rel = max_rel.max(rel);
        csv.row_f64(&[t, p_ode, p_pde, rel]);
    }
    csv.write(&out_path(out_dir, "oracle_pde.csv"))?;
    println!("max relative gap vs moment reduction: {}", fmt_f64(max_rel));
    Ok(0)
}

fn parse_list(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<f64>)
        .collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err(CliError::config(format!(
            "{flag} must list at least one value"
        ))),
        Err(e) => Err(CliError::config(format!("invalid {flag}: {e}"))),
    }
}
