use std::path::Path;

use hodge_proj::curves::Chart;
use hodge_proj::kernel::KernelDump;
use hodge_proj::make_curve;
use hodge_proj::moduli::{dbar_sample, genus2_section_trace, DbarConfig, PathKind, TraceConfig};
use hodge_proj::projective::{connection_from_kernel, diagonal_jet, JetConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{self, Check, Context};
use crate::config::{default_curves, default_grid, ConfigError, RunConfig};
use crate::output::{table, timestamp, write_csv, write_json};

fn perturbation(cfg: &RunConfig) -> Option<DMatrix<Complex64>> {
    cfg.perturbation.as_ref().map(|rows| {
        let g = rows.len();
        DMatrix::from_fn(g, g, |i, j| rows[i][j])
    })
}

fn contexts(cfg: &RunConfig) -> anyhow::Result<Vec<Context>> {
    let specs = if cfg.curves.is_empty() {
        default_curves()
    } else {
        cfg.curves.clone()
    };
    let curves = specs
        .iter()
        .map(make_curve)
        .collect::<hodge_proj::Result<Vec<_>>>()?;
    let m = perturbation(cfg);
    if let Some(m) = &m {
        if !curves.iter().any(|c| c.genus() == m.nrows()) {
            return Err(ConfigError::Invalid(format!(
                "no curve of genus {} to perturb",
                m.nrows()
            ))
            .into());
        }
    }
    let many = curves.len() > 1;
    let built: hodge_proj::Result<Vec<Context>> = curves
        .into_par_iter()
        .enumerate()
        .map(|(i, curve)| {
            let label = if many {
                format!("curve{i}/g{}", curve.genus())
            } else {
                format!("g{}", curve.genus())
            };
            let pert = m.as_ref().filter(|m| m.nrows() == curve.genus());
            Context::new(label, curve, &cfg.points, &cfg.tolerances, pert)
        })
        .collect();
    Ok(built?)
}

fn file_stem(stem: &str, i: usize, count: usize) -> String {
    if count > 1 {
        format!("{stem}-{i}")
    } else {
        stem.to_string()
    }
}

#[derive(Debug, Serialize)]
struct PointDiagnostic {
    point: Complex64,
    biresidue: Complex64,
    residue_term: Complex64,
    finite_part: Complex64,
    jet_error: f64,
    obstruction_norm: f64,
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    chart: String,
    period_matrix: Vec<Vec<Complex64>>,
    points: Vec<PointDiagnostic>,
    /// `s` in `cup(eta_x, v_k) = s 2 pi i v_k(x)`.
    cup_sign: f64,
    checks: Vec<Check>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct KernelFile {
    timestamp: String,
    kernel: KernelDump,
    diagnostics: Diagnostics,
}

#[derive(Debug, Serialize)]
struct ConnectionRow {
    chart: String,
    x_re: f64,
    x_im: f64,
    s_re: f64,
    s_im: f64,
    error: f64,
}

fn diagnostics(ctx: &Context) -> hodge_proj::Result<(Diagnostics, Vec<ConnectionRow>)> {
    let checks = checks::kernel_checks(ctx)?;
    let norms = checks::obstruction_norms(ctx)?;
    let (_, cup_sign) = checks::cup_deviation(ctx)?;
    let ch = ctx.chart();
    let mut points = Vec::new();
    for (p, &obstruction_norm) in ctx.points.iter().zip(&norms) {
        let jet = diagonal_jet(&ctx.eta, ch, p, &ctx.jet)?;
        points.push(PointDiagnostic {
            point: p.x(),
            biresidue: jet.biresidue,
            residue_term: jet.residue_term,
            finite_part: jet.finite_part,
            jet_error: jet.error,
            obstruction_norm,
        });
    }
    let g = ctx.curve.genus();
    let tau = &ctx.pd.tau;
    let connection = match connection_from_kernel(&ctx.eta, ch, &ctx.points, &ctx.jet) {
        Ok(samples) => samples
            .iter()
            .map(|s| ConnectionRow {
                chart: s.chart.to_string(),
                x_re: s.point.x().re,
                x_im: s.point.x().im,
                s_re: s.value.re,
                s_im: s.value.im,
                error: s.error,
            })
            .collect(),
        // A kernel failing the contract has no connection; the checks already say so.
        Err(hodge_proj::Error::ContractViolation(_)) => Vec::new(),
        Err(e) => return Err(e),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok((
        Diagnostics {
            chart: ch.to_string(),
            period_matrix: (0..g).map(|i| (0..g).map(|j| tau[(i, j)]).collect()).collect(),
            points,
            cup_sign,
            checks,
            passed,
        },
        connection,
    ))
}

pub fn compute_eta(cfg: &RunConfig, out: &Path, stem: &str) -> anyhow::Result<bool> {
    let ctxs = contexts(cfg)?;
    let results: hodge_proj::Result<Vec<_>> = ctxs.par_iter().map(diagnostics).collect();
    let results = results?;
    let ts = timestamp();
    let mut all = Vec::new();
    let mut passed = true;
    for (i, (ctx, (diag, rows))) in ctxs.iter().zip(results).enumerate() {
        let name = file_stem(stem, i, ctxs.len());
        passed &= diag.passed;
        all.extend(diag.checks.iter().cloned());
        write_json(
            &out.join(format!("{name}.kernel.json")),
            &KernelFile {
                timestamp: ts.clone(),
                kernel: ctx.eta.dump(),
                diagnostics: diag,
            },
        )?;
        write_csv(&out.join(format!("{name}.connection.csv")), &rows)?;
    }
    print!("{}", table(&all));
    Ok(passed)
}

#[derive(Debug, Serialize)]
struct Report {
    timestamp: String,
    passed: bool,
    checks: Vec<Check>,
}

pub fn verify(cfg: &RunConfig, out: &Path, stem: &str) -> anyhow::Result<bool> {
    let ctxs = contexts(cfg)?;
    let suites: hodge_proj::Result<Vec<Vec<Check>>> = ctxs.par_iter().map(checks::suite).collect();
    let mut all: Vec<Check> = suites?.into_iter().flatten().collect();
    // One global sign for the cup identity across all curves.
    let signs: hodge_proj::Result<Vec<f64>> = ctxs
        .iter()
        .map(|c| Ok(checks::cup_deviation(c)?.1))
        .collect();
    let signs = signs?;
    let consistent = signs.iter().all(|&s| s == signs[0]);
    all.push(Check {
        curve: "all".into(),
        name: "cup sign".into(),
        value: signs[0],
        threshold: f64::NAN,
        passed: consistent,
        detail: format!("signs {signs:?}"),
    });
    let passed = all.iter().all(|c| c.passed);
    let text = table(&all);
    print!("{text}");
    std::fs::write(out.join(format!("{stem}.report.txt")), &text)?;
    write_json(
        &out.join(format!("{stem}.report.json")),
        &Report {
            timestamp: timestamp(),
            passed,
            checks: all,
        },
    )?;
    Ok(passed)
}

#[derive(Debug, Serialize)]
struct ScanRow {
    tau_re: f64,
    tau_im: f64,
    c_re: f64,
    c_im: f64,
    dbar_c_re: f64,
    dbar_c_im: f64,
    kappa_re: f64,
    kappa_im: f64,
    richardson_residual: f64,
}

pub fn moduli_scan(cfg: &RunConfig, out: &Path, stem: &str) -> anyhow::Result<bool> {
    let grid = cfg.grid.clone().unwrap_or_else(default_grid);
    let dcfg = DbarConfig {
        step: cfg.tolerances.step,
        rel_tol: cfg.tolerances.richardson,
        jet: JetConfig::wide(),
    };
    let samples: hodge_proj::Result<Vec<_>> =
        grid.par_iter().map(|&t| dbar_sample(t, &dcfg)).collect();
    let samples = samples?;
    let rows: Vec<ScanRow> = samples
        .iter()
        .map(|s| ScanRow {
            tau_re: s.tau.re,
            tau_im: s.tau.im,
            c_re: s.c.re,
            c_im: s.c.im,
            dbar_c_re: s.dbar_c.re,
            dbar_c_im: s.dbar_c.im,
            kappa_re: s.kappa.re,
            kappa_im: s.kappa.im,
            richardson_residual: s.richardson_residual,
        })
        .collect();
    write_csv(&out.join(format!("{stem}.scan.csv")), &rows)?;
    let k0 = samples[0].kappa;
    let spread = samples
        .iter()
        .map(|s| (s.kappa - k0).norm() / k0.norm())
        .fold(0.0, f64::max);
    let worst = samples.iter().map(|s| s.kappa_error()).fold(0.0, f64::max);
    println!(
        "{} samples, kappa = {k0}, spread {spread:.3e}, max deviation from 3 pi i {worst:.3e}",
        samples.len()
    );
    Ok(spread < cfg.tolerances.kappa && worst < cfg.tolerances.kappa && k0.norm() > 0.0)
}

#[derive(Debug, Serialize)]
struct TraceRow {
    lambda_re: f64,
    lambda_im: f64,
    s_re: f64,
    s_im: f64,
}

#[derive(Debug, Serialize)]
struct TraceSummary {
    timestamp: String,
    roots: Vec<Complex64>,
    root_index: usize,
    point: Complex64,
    chart: String,
    dbar: Option<Complex64>,
    d: Option<Complex64>,
    richardson_residual: Option<f64>,
    inconclusive: bool,
}

pub fn genus2_trace(cfg: &RunConfig, out: &Path, stem: &str) -> anyhow::Result<bool> {
    let spec = cfg
        .trace
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("genus2-trace needs a `trace` section".into()))?;
    let mut tcfg = TraceConfig::new(spec.roots.clone(), spec.root_index, spec.point);
    if let Some(d) = spec.direction {
        tcfg.direction = d;
    }
    if let Some(k) = spec.kind {
        tcfg.kind = k;
    }
    if let Some(n) = spec.samples {
        tcfg.samples = n;
    }
    tcfg.step = cfg.tolerances.step;
    let report = genus2_section_trace(&tcfg)?;
    let rows: Vec<TraceRow> = report
        .samples
        .iter()
        .map(|s| TraceRow {
            lambda_re: s.lambda.re,
            lambda_im: s.lambda.im,
            s_re: s.connection.re,
            s_im: s.connection.im,
        })
        .collect();
    write_csv(&out.join(format!("{stem}.trace.csv")), &rows)?;
    write_json(
        &out.join(format!("{stem}.trace.json")),
        &TraceSummary {
            timestamp: timestamp(),
            roots: tcfg.roots.clone(),
            root_index: tcfg.root_index,
            point: tcfg.point,
            chart: Chart::AffineX(hodge_proj::curves::Sheet::Plus).to_string(),
            dbar: report.dbar,
            d: report.d,
            richardson_residual: report.residual,
            inconclusive: report.inconclusive,
        },
    )?;
    match (report.dbar, report.residual) {
        (Some(dbar), Some(r)) => println!("dbar {dbar}, Richardson residual {r:.3e}"),
        _ => println!(
            "{} path: holomorphic and antiholomorphic parts cannot be separated (inconclusive)",
            match tcfg.kind {
                PathKind::Real => "real",
                PathKind::Complex => "complex",
            }
        ),
    }
    Ok(true)
}
