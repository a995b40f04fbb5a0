use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use inaragg_core::charfn::{panel_cf, write_cf_csv};
use inaragg_core::limits::{growth_diagnostic, limit_gap_table};
use inaragg_core::sim::{aggregate_panel_with, simulate_panels};
use inaragg_core::verify::{
    formula_equality_sweep, mc_cf_check, random_equality_cases, simulator_equivalence,
    stationarity_tests, theta_line_grid, PathCheck,
};
use inaragg_core::{
    CfError, CfValue, Centering, InitialState, LimitRegime, MixingLaw, ModelParams, PanelSample,
    PanelSpec, QuadratureSpec, TimeGrid, VerifyReport,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Format, Suite};
use crate::config::{CfConfig, FormulaChoice, LimitConfig, SimulateConfig, VerifyConfig};
use crate::error::CliError;

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(CliError::io(p))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn finish(mut out: Box<dyn Write>) -> Result<(), CliError> {
    out.flush().map_err(CliError::io("<output>"))
}

pub fn simulate(
    cfg: &SimulateConfig,
    format: Format,
    out: Box<dyn Write>,
    dump_paths: Option<&Path>,
) -> Result<(), CliError> {
    let samples: Vec<PanelSample> = match dump_paths {
        None => simulate_panels(&cfg.panel, cfg.seed, cfg.reps)?,
        Some(path) => {
            let file = File::create(path).map_err(CliError::io(path))?;
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            w.write_record(["replicate", "copy", "k", "x"])?;
            let mut res = Ok(());
            let mut samples = Vec::with_capacity(cfg.reps as usize);
            for r in 0..cfg.reps {
                let s = aggregate_panel_with(&cfg.panel, cfg.seed, r, |copy, _, xs| {
                    for (k, x) in xs.iter().enumerate() {
                        if res.is_ok() {
                            res = w.write_record([r.to_string(), copy.to_string(), k.to_string(), x.to_string()]);
                        }
                    }
                })?;
                samples.push(s);
            }
            res?;
            w.flush().map_err(CliError::io(path))?;
            samples
        }
    };
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let m = cfg.panel.grid.len();
            let mut header = vec!["replicate".to_string()];
            header.extend((1..=m).map(|i| format!("s_{i}")));
            w.write_record(&header)?;
            for s in &samples {
                let mut row = vec![s.replicate.to_string()];
                row.extend(s.s_values.iter().map(f64::to_string));
                w.write_record(&row)?;
            }
            w.flush().map_err(CliError::io("<output>"))
        }
        Format::Json => {
            let mut out = out;
            for s in &samples {
                serde_json::to_writer(&mut out, s)?;
                writeln!(out).map_err(CliError::io("<output>"))?;
            }
            finish(out)
        }
    }
}

#[derive(Serialize)]
struct CfRow<'a> {
    theta: &'a [f64],
    re: Option<f64>,
    im: Option<f64>,
    abs: Option<f64>,
    quad_err: Option<f64>,
    converged: bool,
}

/// Value usable for output: converged, or the partial estimate.
fn usable(r: &Result<CfValue, CfError>) -> Option<(CfValue, bool)> {
    match r {
        Ok(v) => Some((*v, true)),
        Err(CfError::QuadratureNotConverged { partial, error, .. }) => Some((
            CfValue { value: *partial, error: *error },
            false,
        )),
        Err(_) => None,
    }
}

pub fn cf(cfg: &CfConfig, format: Format, out: Box<dyn Write>) -> Result<(), CliError> {
    let formulas = cfg.formulas();
    let results: Vec<Vec<Result<CfValue, CfError>>> = cfg
        .points
        .par_iter()
        .map(|th| {
            formulas
                .iter()
                .map(|&f| {
                    panel_cf(cfg.copies, cfg.scale, cfg.n, &cfg.grid, th, &cfg.mixing, &cfg.params, f, &cfg.quad)
                })
                .collect()
        })
        .collect();
    // Hard failures abort before anything is written.
    for r in results.iter().flatten() {
        if let Err(e) = r {
            if !matches!(e, CfError::QuadratureNotConverged { .. }) {
                return Err(e.clone().into());
            }
        }
    }
    let unconverged = results.iter().flatten().filter(|r| r.is_err()).count();

    match (cfg.formula, format) {
        (FormulaChoice::Both, Format::Csv) => {
            let m = cfg.grid.len();
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<String> = (1..=m).map(|i| format!("theta_{i}")).collect();
            header.extend(
                ["re_k", "im_k", "re_ktilde", "im_ktilde", "abs_diff", "quad_err", "converged"]
                    .map(String::from),
            );
            w.write_record(&header)?;
            for (p, r) in cfg.points.iter().zip(&results) {
                let (k, ok_k) = usable(&r[0]).expect("hard errors rejected above");
                let (kt, ok_kt) = usable(&r[1]).expect("hard errors rejected above");
                let mut row: Vec<String> = p.thetas.iter().map(f64::to_string).collect();
                row.extend(
                    [
                        k.value.re,
                        k.value.im,
                        kt.value.re,
                        kt.value.im,
                        (k.value - kt.value).norm(),
                        k.error.max(kt.error),
                    ]
                    .map(|x| x.to_string()),
                );
                row.push((ok_k && ok_kt).to_string());
                w.write_record(&row)?;
            }
            w.flush().map_err(CliError::io("<output>"))?;
        }
        (_, Format::Csv) => {
            let first: Vec<Result<CfValue, CfError>> = results.iter().map(|r| r[0].clone()).collect();
            write_cf_csv(out, &cfg.points, &first).map_err(CliError::io("<output>"))?;
        }
        (_, Format::Json) => {
            #[derive(Serialize)]
            struct Entry<'a> {
                formula: &'static str,
                #[serde(flatten)]
                row: CfRow<'a>,
            }
            let names: Vec<&'static str> = formulas
                .iter()
                .map(|f| match f {
                    inaragg_core::ExponentFormula::K => "k",
                    inaragg_core::ExponentFormula::KTilde => "ktilde",
                })
                .collect();
            let mut entries = Vec::new();
            for (p, r) in cfg.points.iter().zip(&results) {
                for (name, v) in names.iter().zip(r) {
                    let u = usable(v);
                    entries.push(Entry {
                        formula: name,
                        row: CfRow {
                            theta: &p.thetas,
                            re: u.map(|(c, _)| c.value.re),
                            im: u.map(|(c, _)| c.value.im),
                            abs: u.map(|(c, _)| c.value.norm()),
                            quad_err: u.map(|(c, _)| c.error),
                            converged: u.is_some_and(|(_, ok)| ok),
                        },
                    });
                }
            }
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &entries)?;
            writeln!(out).map_err(CliError::io("<output>"))?;
            finish(out)?;
        }
    }
    if unconverged > 0 {
        return Err(CliError::NotConverged(format!(
            "{unconverged} CF value(s) are partial estimates (converged = false)"
        )));
    }
    Ok(())
}

pub fn limit(cfg: &LimitConfig, format: Format, out: Box<dyn Write>) -> Result<(), CliError> {
    let regime = LimitRegime::for_law(&cfg.mixing)?;
    let table = limit_gap_table(
        &regime,
        &cfg.schedule,
        &cfg.grid,
        &cfg.thetas,
        &cfg.mixing,
        &cfg.params,
        &cfg.quad,
    )?;
    let growth = growth_diagnostic(&regime, &cfg.schedule);
    eprintln!(
        "growth condition ratios: {:?} (increasing: {})",
        growth.ratios, growth.increasing
    );
    if table.growth_warning {
        eprintln!("warning: the growth ratios do not increase along this schedule");
    }
    match format {
        Format::Csv => table.write_csv(out).map_err(CliError::io("<output>"))?,
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &serde_json::json!({ "table": table, "growth": growth }))?;
            writeln!(out).map_err(CliError::io("<output>"))?;
            finish(out)?;
        }
    }
    if !table.all_converged() {
        return Err(CliError::NotConverged(
            "some rows hold partial quadrature estimates (converged = false)".into(),
        ));
    }
    Ok(())
}

const EMPIRICAL_CF_MIN_FRACTION: f64 = 0.95;
const EQUALITY_TOLERANCE: f64 = 1e-10;
const SERIES_TAIL_TOLERANCE: f64 = 1e-10;

fn empirical_cf_suite(cfg: &VerifyConfig) -> Result<Vec<VerifyReport>, CliError> {
    let quad = QuadratureSpec::default();
    let mut reports = Vec::new();
    let mut offset = 0;
    for beta in [-0.5, 0.0] {
        for times in [vec![1.0], vec![0.5, 1.0]] {
            for n in [4u64, 16] {
                let m = times.len();
                let spec = PanelSpec {
                    copies: 1,
                    n,
                    grid: TimeGrid::new(times.clone())?,
                    mixing: MixingLaw::beta_form(0.0, beta),
                    params: ModelParams { lambda: 1.0 },
                    centering: Centering::Conditional,
                };
                let points = theta_line_grid(m, 15, 1.5);
                let seed = cfg.seed.wrapping_add(offset);
                offset += 1;
                reports.push(mc_cf_check(
                    &spec,
                    1.0,
                    &points,
                    cfg.reps,
                    seed,
                    EMPIRICAL_CF_MIN_FRACTION,
                    cfg.inject_bias,
                    &quad,
                )?);
            }
        }
    }
    Ok(reports)
}

fn stationarity_suite(cfg: &VerifyConfig) -> Result<Vec<VerifyReport>, CliError> {
    let mut reports = Vec::new();
    let mut offset = 100;
    for alpha in [0.3, 0.7] {
        for lambda in [0.5, 2.0] {
            let check = PathCheck {
                alpha,
                lambda,
                path_len: 20,
                replicates: cfg.reps,
                seed: cfg.seed.wrapping_add(offset),
            };
            offset += 1;
            reports.extend(stationarity_tests(&check, InitialState::Stationary)?);
        }
    }
    let control = PathCheck {
        alpha: 0.7,
        lambda: 2.0,
        path_len: 20,
        replicates: cfg.reps,
        seed: cfg.seed.wrapping_add(offset),
    };
    reports.extend(stationarity_tests(&control, InitialState::Fixed(0))?);
    Ok(reports)
}

fn simulator_suite(cfg: &VerifyConfig) -> Result<Vec<VerifyReport>, CliError> {
    let mut reports = Vec::new();
    for (i, alpha) in [0.3, 0.9].into_iter().enumerate() {
        let check = PathCheck {
            alpha,
            lambda: 1.0,
            path_len: 8,
            replicates: cfg.reps,
            seed: cfg.seed.wrapping_add(200 + i as u64),
        };
        reports.extend(simulator_equivalence(&check, SERIES_TAIL_TOLERANCE)?);
    }
    Ok(reports)
}

pub fn verify(cfg: &VerifyConfig, format: Format, out: Box<dyn Write>) -> Result<(), CliError> {
    let suites = match cfg.suite {
        Suite::All => vec![Suite::EmpiricalCf, Suite::Equality, Suite::Stationarity, Suite::Simulators],
        s => vec![s],
    };
    let mut reports = Vec::new();
    for suite in suites {
        match suite {
            Suite::EmpiricalCf => reports.extend(empirical_cf_suite(cfg)?),
            Suite::Equality => {
                let cases = random_equality_cases(cfg.cases, cfg.m, cfg.n_max, cfg.seed);
                reports.push(formula_equality_sweep(&cases, EQUALITY_TOLERANCE));
            }
            Suite::Stationarity => reports.extend(stationarity_suite(cfg)?),
            Suite::Simulators => reports.extend(simulator_suite(cfg)?),
            Suite::All => unreachable!("expanded above"),
        }
    }
    match format {
        Format::Json => {
            let mut out = out;
            for r in &reports {
                writeln!(out, "{}", r.to_json_line()).map_err(CliError::io("<output>"))?;
            }
            finish(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["test_name", "statistic", "threshold", "passed", "negative_control", "ok"])?;
            for r in &reports {
                w.write_record([
                    r.test_name.clone(),
                    r.statistic.to_string(),
                    r.threshold.to_string(),
                    r.passed.to_string(),
                    r.negative_control.to_string(),
                    r.ok().to_string(),
                ])?;
            }
            w.flush().map_err(CliError::io("<output>"))?;
        }
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.ok()).map(|r| r.test_name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerificationFailed(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            reports.len(),
            failed.join(", ")
        )))
    }
}
