use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ippt_core::hypothesis::{GridSettings, ThresholdTable};
use ippt_core::power::{battery_curves, limit_curves, write_limit_csv, write_power_csv};
use ippt_core::process::sample_experiment_par;
use ippt_core::{fisher_information, local_scale, IntensityModel, TestBattery, TestKind, ThresholdSettings};

use crate::config::{RunConfig, UGrid};
use crate::error::CliError;

/// Test sizes of the BT1 threshold table.
pub const TABLE1_EPSILONS: [f64; 6] = [0.01, 0.05, 0.10, 0.2, 0.4, 0.5];

/// Paths per experiment at or below which the default u-grid reaches 30.
const SMALL_N: usize = 20;

fn default_u_grid(n: usize) -> UGrid {
    if n <= SMALL_N {
        UGrid { start: 0.0, stop: 30.0, count: 31 }
    } else {
        UGrid { start: 0.0, stop: 6.0, count: 13 }
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

/// Record the effective configuration next to the outputs of a run.
fn write_run_config(cfg: &RunConfig, dir: &Path, stem: &str) -> Result<(), CliError> {
    let (path, mut w) = create(dir, &format!("{stem}.run.toml"))?;
    w.write_all(cfg.to_toml().as_bytes())?;
    w.flush()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn settings(cfg: &RunConfig) -> ThresholdSettings {
    ThresholdSettings { draws: cfg.draws, seed: cfg.seed }
}

pub fn fisher(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let info = fisher_information(&model, model.theta1())?;
    let scale = local_scale(&model, cfg.n)?;
    writeln!(out, "model   {}", model.name())?;
    writeln!(out, "theta1  {}", model.theta1())?;
    writeln!(out, "b       {}", model.b())?;
    writeln!(out, "tau     {}", model.tau())?;
    writeln!(out, "fisher  {info:.10}")?;
    writeln!(out, "n       {}", cfg.n)?;
    writeln!(out, "phi_n   {:.10}", scale.phi_n)?;
    writeln!(out, "u_max   {:.10}", scale.u_max)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let scale = local_scale(&model, cfg.n)?;
    let theta = scale.theta_at(cfg.u)?;
    let experiment = sample_experiment_par(&model, theta, cfg.n, cfg.seed)?;
    let dir = cfg.output_dir();
    experiment.save(&dir, "experiment")?;
    eprintln!(
        "wrote {} ({} paths, {} events, theta = {theta})",
        dir.join("experiment.csv").display(),
        experiment.n(),
        experiment.total_events()
    );
    write_run_config(cfg, &dir, "experiment")
}

fn write_thresholds(table: &ThresholdTable, cfg: &RunConfig, stem: &str) -> Result<(), CliError> {
    let dir = cfg.output_dir();
    let (path, mut w) = create(&dir, &format!("{stem}.csv"))?;
    table.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("wrote {}", path.display());
    write_run_config(cfg, &dir, stem)
}

pub fn thresholds(cfg: &RunConfig, closed_form: bool) -> Result<(), CliError> {
    let kinds = cfg.kinds(&TestKind::ALL);
    let eps = cfg.epsilons(&[0.05]);
    let table = if closed_form {
        ThresholdTable::closed_form(&kinds, &eps)?
    } else {
        ThresholdTable::calibrate(&kinds, &eps, settings(cfg))?
    };
    write_thresholds(&table, cfg, "thresholds")
}

pub fn table1(cfg: &RunConfig) -> Result<(), CliError> {
    let eps = cfg.epsilons(&TABLE1_EPSILONS);
    let table = ThresholdTable::calibrate(&[TestKind::Bt1], &eps, settings(cfg))?;
    write_thresholds(&table, cfg, "table1")
}

fn run_power(
    cfg: &RunConfig,
    model: &IntensityModel,
    kinds: &[TestKind],
    limit: bool,
    stem: &str,
) -> Result<(), CliError> {
    for &kind in kinds {
        for &eps in &cfg.epsilons(&[0.05]) {
            if !kind.within_guarantee(eps) {
                eprintln!("warning: {kind} at epsilon = {eps} is outside the size guarantee (epsilon <= 0.5)");
            }
        }
    }
    let scale = local_scale(model, cfg.n)?;
    let u_grid = cfg.u_grid.unwrap_or_else(|| default_u_grid(cfg.n)).points();
    let prior = if kinds.iter().any(|k| k.needs_prior()) { Some(cfg.prior.build(model)?) } else { None };
    let mut curves = Vec::new();
    let mut limits = Vec::new();
    for eps in cfg.epsilons(&[0.05]) {
        let battery =
            TestBattery::new(model, scale, eps, kinds, prior.as_ref(), settings(cfg), GridSettings::default())?;
        curves.extend(battery_curves(&battery, &u_grid, cfg.replicates, cfg.seed)?);
        if limit {
            limits.extend(limit_curves(kinds, eps, &u_grid, settings(cfg))?);
        }
    }
    let dir = cfg.output_dir();
    let (path, mut w) = create(&dir, &format!("{stem}.csv"))?;
    write_power_csv(&curves, &mut w)?;
    w.flush()?;
    eprintln!("wrote {}", path.display());
    if limit {
        let (path, mut w) = create(&dir, &format!("{stem}_limit.csv"))?;
        write_limit_csv(&limits, &mut w)?;
        w.flush()?;
        eprintln!("wrote {}", path.display());
    }
    write_run_config(cfg, &dir, stem)
}

pub fn power(cfg: &RunConfig, limit: bool) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    run_power(cfg, &model, &cfg.kinds(&[TestKind::Sft]), limit, "power")
}

/// Power curves of SFT and BT1 with their limits.
pub fn fig1(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    run_power(cfg, &model, &cfg.kinds(&[TestKind::Sft, TestKind::Bt1]), true, "fig1")
}

/// Power curves of GLRT and Wald, with SFT for reference, and `β*`.
pub fn fig2(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    run_power(cfg, &model, &cfg.kinds(&[TestKind::Glrt, TestKind::Wald, TestKind::Sft]), true, "fig2")
}
