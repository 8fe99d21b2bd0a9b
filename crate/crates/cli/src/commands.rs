//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use nalgebra::DMatrix;
use nomix::gls::{fit_gls_from, threshold_curve, GlsPosterior, GlsProblem, DEFAULT_SWEEPS, DEFAULT_TOL};
use nomix::ppca::{fit_ppca, PpcaOptions, PpcaProblem};
use nomix::Scheme;
use nomix_simbench::bench::SPARSITY_THRESHOLD;
use nomix_simbench::{run_gls_benchmark, run_ppca_benchmark, BenchmarkRecord, GlsSimConfig, PpcaSimConfig};
use serde::{Deserialize, Serialize};

use crate::args::{BenchArgs, FitGlsArgs, FitPpcaArgs, Preset, SchemeArg, ThresholdArgs};
use crate::error::{CliError, Result};
use crate::io::{fmt_f64, fmt_opt, read_matrix, read_vector, CsvTable};
use crate::manifest::{layer_toml, RunManifest, ELBO_NOTE};
use crate::summary::{summary_table, Metric};

/// How a command ended when it did not fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Interrupted; outputs hold the finished part and are marked.
    Truncated,
}

const TRUNCATION_MARKER: &str = "truncated: run interrupted before every replicate finished";

fn resolve_scheme(kind: SchemeArg, sigma_0_2: Option<f64>) -> Result<Scheme> {
    let scheme = match (kind, sigma_0_2) {
        (SchemeArg::Sparse, _) => Scheme::Sparse,
        (SchemeArg::Naive, Some(s)) => Scheme::Naive { sigma_0_2: s },
        (SchemeArg::Naive, None) => {
            return Err(CliError::Input(
                "the naive scheme needs a spike variance (--sigma0)".into(),
            ))
        }
    };
    scheme.validate()?;
    Ok(scheme)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn relative_to_config(path: Option<PathBuf>, config: Option<&Path>) -> Option<PathBuf> {
    let base = config.and_then(Path::parent);
    path.map(|p| match base {
        Some(base) if p.is_relative() => base.join(p),
        _ => p,
    })
}

fn read_input(manifest: &mut RunManifest, path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    manifest.add_input(path, &bytes);
    Ok(())
}

fn elbo_table(trace: &[f64]) -> CsvTable {
    let mut table = CsvTable::new(&["sweep", "elbo"]);
    for (i, v) in trace.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), fmt_f64(*v)]);
    }
    table
}

fn write_table(table: &CsvTable, dir: &Path, name: &str, manifest: &mut RunManifest) -> Result<()> {
    table.write(&dir.join(name))?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitGlsConfig {
    pub beta_hat: Option<PathBuf>,
    pub corr: Option<PathBuf>,
    pub sigma_e2: f64,
    pub sigma_1_2: f64,
    pub p0: f64,
    pub scheme: SchemeArg,
    pub sigma_0_2: Option<f64>,
    pub sweeps: usize,
    pub tol: f64,
}

impl Default for FitGlsConfig {
    fn default() -> Self {
        Self {
            beta_hat: None,
            corr: None,
            sigma_e2: 1.0,
            sigma_1_2: 1.0,
            p0: 0.99,
            scheme: SchemeArg::Sparse,
            sigma_0_2: None,
            sweeps: DEFAULT_SWEEPS,
            tol: DEFAULT_TOL,
        }
    }
}

pub fn resolve_fit_gls(args: &FitGlsArgs) -> Result<FitGlsConfig> {
    let config_path = args.config.as_deref();
    let mut cfg = layer_toml(&FitGlsConfig::default(), config_path)?;
    cfg.beta_hat = relative_to_config(cfg.beta_hat, config_path);
    cfg.corr = relative_to_config(cfg.corr, config_path);
    if let Some(p) = &args.beta_hat {
        cfg.beta_hat = Some(p.clone());
    }
    if let Some(p) = &args.corr {
        cfg.corr = Some(p.clone());
    }
    cfg.sigma_e2 = args.sigma_e2.unwrap_or(cfg.sigma_e2);
    cfg.sigma_1_2 = args.sigma1.unwrap_or(cfg.sigma_1_2);
    cfg.p0 = args.p0.unwrap_or(cfg.p0);
    cfg.scheme = args.scheme.unwrap_or(cfg.scheme);
    cfg.sigma_0_2 = args.sigma0.or(cfg.sigma_0_2);
    cfg.sweeps = args.sweeps.unwrap_or(cfg.sweeps);
    cfg.tol = args.tol.unwrap_or(cfg.tol);
    if cfg.scheme == SchemeArg::Sparse {
        cfg.sigma_0_2 = None;
    }
    Ok(cfg)
}

pub fn cmd_fit_gls(args: &FitGlsArgs) -> Result<Outcome> {
    let cfg = resolve_fit_gls(args)?;
    let scheme = resolve_scheme(cfg.scheme, cfg.sigma_0_2)?;
    let beta_path = cfg
        .beta_hat
        .clone()
        .ok_or_else(|| CliError::Input("missing beta_hat (--beta-hat)".into()))?;
    let corr_path = cfg
        .corr
        .clone()
        .ok_or_else(|| CliError::Input("missing corr (--corr)".into()))?;
    let mut manifest = RunManifest::start("fit-gls", &cfg, None)?;
    read_input(&mut manifest, &beta_path)?;
    read_input(&mut manifest, &corr_path)?;
    let beta_hat = read_vector(&beta_path)?;
    let corr = read_matrix(&corr_path)?;

    let problem = GlsProblem::new(beta_hat, corr, cfg.sigma_e2, cfg.sigma_1_2, cfg.p0)?;
    let init = GlsPosterior::initial(&problem, scheme);
    let report = fit_gls_from(&problem, scheme, init, cfg.sweeps, cfg.tol)?;

    let out = &args.out.out;
    prepare_out(out)?;
    let mean = report.posterior_mean();
    let post = &report.posterior;
    let mut table = CsvTable::new(&["index", "psi", "mu", "s2", "post_mean"]);
    for i in 0..problem.dim() {
        table.push(vec![
            i.to_string(),
            fmt_f64(post.psi[i]),
            fmt_f64(post.mu[i]),
            fmt_f64(post.s2[i]),
            fmt_f64(mean[i]),
        ]);
    }
    write_table(&table, out, "posterior.csv", &mut manifest)?;
    write_table(&elbo_table(&report.elbo_trace), out, "elbo.csv", &mut manifest)?;
    manifest.notes.push(ELBO_NOTE.into());
    manifest.notes.push(format!(
        "{} sweeps, converged: {}, saturated log-odds updates: {}",
        report.sweeps, report.converged, report.saturated
    ));
    manifest.finish(out)?;
    Ok(Outcome::Complete)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitPpcaConfig {
    pub data: Option<PathBuf>,
    pub k: usize,
    pub sigma_e2: f64,
    pub sigma_1_2: f64,
    pub p0: f64,
    pub scheme: SchemeArg,
    pub sigma_0_2: Option<f64>,
    pub sweeps: usize,
    pub elbo_rel_tol: Option<f64>,
}

impl Default for FitPpcaConfig {
    fn default() -> Self {
        Self {
            data: None,
            k: 2,
            sigma_e2: 1.0,
            sigma_1_2: 0.5,
            p0: 0.99,
            scheme: SchemeArg::Sparse,
            sigma_0_2: None,
            sweeps: nomix::ppca::DEFAULT_SWEEPS,
            elbo_rel_tol: None,
        }
    }
}

pub fn resolve_fit_ppca(args: &FitPpcaArgs) -> Result<FitPpcaConfig> {
    let config_path = args.config.as_deref();
    let mut cfg = layer_toml(&FitPpcaConfig::default(), config_path)?;
    cfg.data = relative_to_config(cfg.data, config_path);
    if let Some(p) = &args.data {
        cfg.data = Some(p.clone());
    }
    cfg.k = args.k.unwrap_or(cfg.k);
    cfg.sigma_e2 = args.sigma_e2.unwrap_or(cfg.sigma_e2);
    cfg.sigma_1_2 = args.sigma1.unwrap_or(cfg.sigma_1_2);
    cfg.p0 = args.p0.unwrap_or(cfg.p0);
    cfg.scheme = args.scheme.unwrap_or(cfg.scheme);
    cfg.sigma_0_2 = args.sigma0.or(cfg.sigma_0_2);
    cfg.sweeps = args.sweeps.unwrap_or(cfg.sweeps);
    cfg.elbo_rel_tol = args.elbo_rel_tol.or(cfg.elbo_rel_tol);
    if cfg.scheme == SchemeArg::Sparse {
        cfg.sigma_0_2 = None;
    }
    Ok(cfg)
}

fn wide_table(prefix: &str, row_label: &str, blocks: &[(&str, &DMatrix<f64>)]) -> CsvTable {
    let k = blocks[0].1.ncols();
    let mut header = vec![row_label.to_string()];
    for (name, _) in blocks {
        header.extend((1..=k).map(|c| format!("{prefix}{name}_{c}")));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = CsvTable::new(&header);
    for i in 0..blocks[0].1.nrows() {
        let mut row = vec![i.to_string()];
        for (_, m) in blocks {
            row.extend(m.row(i).iter().map(|v| fmt_f64(*v)));
        }
        table.push(row);
    }
    table
}

pub fn cmd_fit_ppca(args: &FitPpcaArgs) -> Result<Outcome> {
    let cfg = resolve_fit_ppca(args)?;
    let scheme = resolve_scheme(cfg.scheme, cfg.sigma_0_2)?;
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Input("missing data (--data)".into()))?;
    if let Some(t) = cfg.elbo_rel_tol {
        if t.is_nan() || t < 0.0 {
            return Err(CliError::Input(format!("elbo_rel_tol must be non-negative (got {t})")));
        }
    }
    let mut manifest = RunManifest::start("fit-ppca", &cfg, None)?;
    read_input(&mut manifest, &data_path)?;
    let data = read_matrix(&data_path)?;
    let problem = PpcaProblem::new(data, cfg.k, cfg.sigma_e2, cfg.sigma_1_2, cfg.p0)?;
    let options = PpcaOptions {
        sweeps: cfg.sweeps,
        elbo_rel_tol: cfg.elbo_rel_tol,
    };
    let fit = fit_ppca(&problem, scheme, &options)?;

    let out = &args.out.out;
    prepare_out(out)?;
    let post = &fit.posterior;
    let scores = wide_table("", "observation", &[("score", &post.mu_z)]);
    write_table(&scores, out, "scores.csv", &mut manifest)?;
    let means = fit.loading_means();
    let loadings = wide_table(
        "",
        "feature",
        &[
            ("mean", &means),
            ("psi", &post.psi_w),
            ("slab_mean", &post.mu_w),
            ("slab_var", &post.s2_w),
        ],
    );
    write_table(&loadings, out, "loadings.csv", &mut manifest)?;
    write_table(&elbo_table(&fit.elbo_trace), out, "elbo.csv", &mut manifest)?;
    manifest.notes.push(ELBO_NOTE.into());
    manifest.notes.push(format!(
        "{} sweeps; fraction of loading means below {SPARSITY_THRESHOLD:e}: {}",
        fit.sweeps,
        nomix::ppca::fraction_below(&means, SPARSITY_THRESHOLD)
    ));
    manifest.finish(out)?;
    Ok(Outcome::Complete)
}

/// Applies `--scheme` and `--sigma0` to a naive spike-variance grid.
pub fn apply_scheme_flags(grid: &mut Vec<f64>, scheme: Option<SchemeArg>, sigma0: Option<f64>) -> Result<()> {
    if let Some(v) = sigma0 {
        Scheme::Naive { sigma_0_2: v }.validate()?;
    }
    match (scheme, sigma0) {
        (Some(SchemeArg::Sparse), Some(_)) => {
            return Err(CliError::Input("--sigma0 applies only to the naive scheme".into()))
        }
        (Some(SchemeArg::Sparse), None) => grid.clear(),
        (_, Some(v)) => *grid = vec![v],
        (Some(SchemeArg::Naive), None) if grid.is_empty() => {
            return Err(CliError::Input(
                "the naive scheme needs a spike variance (--sigma0)".into(),
            ))
        }
        _ => {}
    }
    Ok(())
}

pub fn resolve_bench_gls(args: &BenchArgs) -> Result<GlsSimConfig> {
    let base = match args.preset {
        Preset::Smoke => GlsSimConfig::smoke(),
        Preset::Paper => GlsSimConfig::full_scale(),
    };
    let mut cfg = layer_toml(&base, args.config.as_deref())?;
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.replicates = args.replicates.unwrap_or(cfg.replicates);
    apply_scheme_flags(&mut cfg.sigma_0_2_grid, args.scheme, args.sigma0)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve_bench_ppca(args: &BenchArgs) -> Result<PpcaSimConfig> {
    let base = match args.preset {
        Preset::Smoke => PpcaSimConfig::smoke(),
        Preset::Paper => PpcaSimConfig::full_scale(),
    };
    let mut cfg = layer_toml(&base, args.config.as_deref())?;
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.replicates = args.replicates.unwrap_or(cfg.replicates);
    apply_scheme_flags(&mut cfg.sigma_0_2_grid, args.scheme, args.sigma0)?;
    cfg.validate()?;
    Ok(cfg)
}

fn elapsed(r: &BenchmarkRecord, timing: bool) -> String {
    if timing {
        r.wall_time_ms.to_string()
    } else {
        String::new()
    }
}

fn trace_table(records: &[BenchmarkRecord]) -> CsvTable {
    let mut table = CsvTable::new(&["replicate", "method", "sigma_e2", "sweep", "elbo"]);
    for r in records {
        for (i, v) in r.elbo_trace.iter().enumerate() {
            table.push(vec![
                r.replicate.to_string(),
                r.method.clone(),
                fmt_f64(r.sigma_e2),
                (i + 1).to_string(),
                fmt_f64(*v),
            ]);
        }
    }
    table
}

fn finish_bench(
    mut manifest: RunManifest,
    out: &Path,
    tables: [(&str, CsvTable); 3],
    truncated: bool,
) -> Result<Outcome> {
    for (name, mut table) in tables {
        if truncated {
            table.set_trailer(TRUNCATION_MARKER);
        }
        write_table(&table, out, name, &mut manifest)?;
    }
    manifest.truncated = truncated;
    manifest.notes.push(ELBO_NOTE.into());
    manifest.finish(out)?;
    Ok(if truncated {
        Outcome::Truncated
    } else {
        Outcome::Complete
    })
}

pub fn cmd_bench_gls(args: &BenchArgs, cancel: &AtomicBool) -> Result<Outcome> {
    let cfg = resolve_bench_gls(args)?;
    let out = &args.out.out;
    prepare_out(out)?;
    let manifest = RunManifest::start("bench-gls", &cfg, Some(cfg.seed))?;
    let run = run_gls_benchmark(&cfg, Some(cancel))?;

    let mut records = CsvTable::new(&[
        "replicate",
        "method",
        "sigma_e2",
        "mse",
        "correlation",
        "elapsed_ms",
        "error",
    ]);
    for r in &run.records {
        records.push(vec![
            r.replicate.to_string(),
            r.method.clone(),
            fmt_f64(r.sigma_e2),
            fmt_opt(r.mse),
            fmt_opt(r.correlation),
            elapsed(r, args.timing),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    let metrics: Vec<Metric> = vec![
        ("mse".into(), Box::new(|r| r.mse)),
        ("correlation".into(), Box::new(|r| r.correlation)),
        ("elbo_final".into(), Box::new(|r| r.elbo_final)),
    ];
    let summary = summary_table(&run.records, &metrics);
    finish_bench(
        manifest,
        out,
        [
            ("records.csv", records),
            ("summary.csv", summary),
            ("elbo_traces.csv", trace_table(&run.records)),
        ],
        run.truncated,
    )
}

pub fn cmd_bench_ppca(args: &BenchArgs, cancel: &AtomicBool) -> Result<Outcome> {
    let cfg = resolve_bench_ppca(args)?;
    let out = &args.out.out;
    prepare_out(out)?;
    let manifest = RunManifest::start("bench-ppca", &cfg, Some(cfg.seed))?;
    let run = run_ppca_benchmark(&cfg, Some(cancel))?;

    let k = cfg.k_fit;
    let score_cols: Vec<String> = (1..=k).map(|c| format!("score_corr_pc{c}")).collect();
    let mut header = vec![
        "replicate",
        "method",
        "sigma_e2",
        "reconstruction_error",
        "loading_sparsity",
    ];
    header.extend(score_cols.iter().map(String::as_str));
    header.extend(["elbo_final", "elapsed_ms", "error"]);
    let mut records = CsvTable::new(&header);
    for r in &run.records {
        let mut row = vec![
            r.replicate.to_string(),
            r.method.clone(),
            fmt_f64(r.sigma_e2),
            fmt_opt(r.reconstruction_error),
            fmt_opt(r.loading_sparsity),
        ];
        row.extend((0..k).map(|c| fmt_opt(r.score_correlations.get(c).copied())));
        row.extend([
            fmt_opt(r.elbo_final),
            elapsed(r, args.timing),
            r.error.clone().unwrap_or_default(),
        ]);
        records.push(row);
    }

    let mut metrics: Vec<Metric> = vec![
        ("reconstruction_error".into(), Box::new(|r| r.reconstruction_error)),
        ("loading_sparsity".into(), Box::new(|r| r.loading_sparsity)),
        ("elbo_final".into(), Box::new(|r| r.elbo_final)),
    ];
    for (c, name) in score_cols.iter().enumerate() {
        metrics.push((name.clone(), Box::new(move |r| r.score_correlations.get(c).copied())));
    }
    let summary = summary_table(&run.records, &metrics);
    finish_bench(
        manifest,
        out,
        [
            ("records.csv", records),
            ("summary.csv", summary),
            ("elbo_traces.csv", trace_table(&run.records)),
        ],
        run.truncated,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub p0: f64,
    pub sigma_e2: f64,
    pub sigma_1_2: f64,
    pub sigma_0_2: f64,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    /// Explicit grid; overrides from/to/step when present.
    pub grid: Option<Vec<f64>>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            p0: 0.99,
            sigma_e2: 1.0,
            sigma_1_2: 1.0,
            sigma_0_2: 1e-10,
            from: 0.0,
            to: 6.0,
            step: 0.05,
            grid: None,
        }
    }
}

impl ThresholdConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        if let Some(g) = &self.grid {
            if g.is_empty() {
                return Err(CliError::Input("grid is empty".into()));
            }
            return Ok(g.clone());
        }
        let (from, to, step) = (self.from, self.to, self.step);
        if !(from.is_finite() && to.is_finite() && step > 0.0 && step.is_finite() && to >= from) {
            return Err(CliError::Input(format!(
                "grid needs finite from <= to and step > 0 (got from {from}, to {to}, step {step})"
            )));
        }
        let n = ((to - from) / step + 1e-9).floor() as usize;
        // rounding keeps 0.05 * 3 from printing as 0.15000000000000002
        Ok((0..=n)
            .map(|i| ((from + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    }
}

pub fn resolve_threshold(args: &ThresholdArgs) -> Result<ThresholdConfig> {
    let mut cfg = layer_toml(&ThresholdConfig::default(), args.config.as_deref())?;
    cfg.p0 = args.p0.unwrap_or(cfg.p0);
    cfg.sigma_e2 = args.sigma_e2.unwrap_or(cfg.sigma_e2);
    cfg.sigma_1_2 = args.sigma1.unwrap_or(cfg.sigma_1_2);
    cfg.sigma_0_2 = args.sigma0.unwrap_or(cfg.sigma_0_2);
    cfg.from = args.from.unwrap_or(cfg.from);
    cfg.to = args.to.unwrap_or(cfg.to);
    cfg.step = args.step.unwrap_or(cfg.step);
    if args.grid.is_some() {
        cfg.grid = args.grid.clone();
    }
    Ok(cfg)
}

pub fn cmd_threshold_curve(args: &ThresholdArgs) -> Result<Outcome> {
    let cfg = resolve_threshold(args)?;
    Scheme::Naive {
        sigma_0_2: cfg.sigma_0_2,
    }
    .validate()?;
    let grid = cfg.points()?;
    let manifest_cfg = ThresholdConfig {
        grid: Some(grid.clone()),
        ..cfg.clone()
    };
    let mut manifest = RunManifest::start("threshold-curve", &manifest_cfg, None)?;
    let rows = threshold_curve(cfg.p0, cfg.sigma_e2, cfg.sigma_1_2, cfg.sigma_0_2, &grid)?;

    let out = &args.out.out;
    prepare_out(out)?;
    let mut table = CsvTable::new(&["beta_hat", "naive_mean", "sparse_mean", "exact_mean"]);
    for r in &rows {
        table.push(vec![
            fmt_f64(r.beta_hat),
            fmt_f64(r.naive_mean),
            fmt_f64(r.sparse_mean),
            fmt_f64(r.exact_mean),
        ]);
    }
    write_table(&table, out, "threshold_curve.csv", &mut manifest)?;
    manifest
        .notes
        .push("naive means are the higher-ELBo fit of starts at psi = 1 and psi = 0".into());
    manifest.finish(out)?;
    Ok(Outcome::Complete)
}
