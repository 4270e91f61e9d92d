//! Command execution.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use flatgp_core::doftools::{isofreedom_gamma, matched_approximation, tail_slope, IsofreedomPoint};
use flatgp_core::flatlimit::{
    check_pred_equiv, convergence_study, limit_model, match_scale, prediction_curve, StudyOptions,
};
use flatgp_core::gp::{
    gp_posterior_with_nugget, loo_mse, loo_nll, nlml, sure, GpHyperparameters, SpectralCache,
};
use flatgp_core::spm::{spm_fit, spm_smoother};
use flatgp_core::Design;
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CommandKind, ExperimentConfig, OutputFormat, UsageError};
use crate::dataset::{parse_dataset, parse_points, Dataset, DatasetOptions, ParseError};
use crate::output::{Cell, ErrorRecord, RunStatus, Summary, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(#[from] UsageError),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(e) => e.code(),
            CliError::Io(_) => "io_error",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(UsageError),
    Numeric(flatgp_core::Error),
}

impl From<flatgp_core::Error> for Failure {
    fn from(e: flatgp_core::Error) -> Self {
        Failure::Numeric(e)
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

struct Report {
    metrics: Value,
    table: Option<Table>,
    errors: Vec<ErrorRecord>,
}

pub struct RunOutput {
    pub summary: Summary,
    pub table: Option<Table>,
    pub exit_code: i32,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    data: Dataset,
    query: Option<Design>,
}

impl Context<'_> {
    fn query_or_data(&self) -> Design {
        self.query.clone().unwrap_or_else(|| self.data.x.clone())
    }

    fn theta(&self, eps: f64, gamma: f64) -> GpHyperparameters {
        GpHyperparameters::new(eps, gamma, self.cfg.sigma2).with_nugget(self.cfg.nugget.unwrap_or(0.0))
    }
}

fn status_of<T>(r: &flatgp_core::Result<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => e.code().into(),
    }
}

fn point_cells(x: &Design, i: usize) -> Vec<Cell> {
    x.point(i).iter().map(|&v| Cell::Num(v)).collect()
}

fn point_header(names: &[String]) -> Vec<String> {
    names.iter().map(|n| format!("x_{n}")).collect()
}

fn header_with(prefix: Vec<String>, rest: &[&str]) -> Table {
    let mut h = prefix;
    h.extend(rest.iter().map(|s| s.to_string()));
    Table {
        header: h,
        rows: Vec::new(),
    }
}

fn fit(ctx: &Context) -> Result<Report, Failure> {
    let (cfg, x, y) = (ctx.cfg, &ctx.data.x, &ctx.data.y);
    let mut t = header_with(
        point_header(&ctx.data.feature_names),
        &["y", "fitted", "residual", "leverage", "status"],
    );
    let (m, metrics) = if let Some(spec) = cfg.model {
        let model = spec.model(x.d()).scaled(cfg.gamma.unwrap_or(1.0));
        let m = spm_smoother(&model, x, cfg.sigma2)?;
        let metrics = json!({
            "model": spec,
            "dof": m.trace,
            "loo_mse": loo_mse(&m, y).ok().map(|c| c.value),
            "loo_nll": loo_nll(&m, y, cfg.sigma2).ok().map(|c| c.value),
            "sure": sure(&m, y, cfg.sigma2).value,
        });
        (m, metrics)
    } else {
        let shape = cfg.shape()?;
        let theta = ctx.theta(cfg.eps()?, cfg.gamma()?);
        let m = SpectralCache::new(&shape.with_epsilon(theta.epsilon), x).smoother(&theta)?;
        let noise = theta.effective_noise();
        let metrics = json!({
            "hyperparameters": theta,
            "dof": m.trace,
            "loo_mse": loo_mse(&m, y).ok().map(|c| c.value),
            "loo_nll": loo_nll(&m, y, noise).ok().map(|c| c.value),
            "sure": sure(&m, y, noise).value,
            "nlml": nlml(&shape, x, y, &theta).ok().map(|c| c.value),
        });
        (m, metrics)
    };
    let fitted = m.apply(y);
    for i in 0..x.n() {
        let mut row = point_cells(x, i);
        row.extend([
            Cell::Num(y[i]),
            Cell::Num(fitted[i]),
            Cell::Num(y[i] - fitted[i]),
            Cell::Num(m.matrix[(i, i)]),
            "ok".into(),
        ]);
        t.push(row);
    }
    Ok(Report {
        metrics,
        table: Some(t),
        errors: Vec::new(),
    })
}

fn predict(ctx: &Context) -> Result<Report, Failure> {
    let (cfg, x, y) = (ctx.cfg, &ctx.data.x, &ctx.data.y);
    let q = ctx.query_or_data();
    let (mean, var) = if let Some(spec) = cfg.model {
        let model = spec.model(x.d()).scaled(cfg.gamma.unwrap_or(1.0));
        let f = spm_fit(&model, x, y, cfg.sigma2)?;
        (f.mean(&q)?, f.variance(&q)?)
    } else {
        let theta = ctx.theta(cfg.eps()?, cfg.gamma()?);
        gp_posterior_with_nugget(&theta.apply(&cfg.shape()?), x, y, cfg.sigma2, theta.nugget, &q)?
    };
    let mut t = header_with(point_header(&ctx.data.feature_names), &["mean", "variance", "status"]);
    for i in 0..q.n() {
        let mut row = point_cells(&q, i);
        row.extend([Cell::Num(mean[i]), Cell::Num(var[i]), "ok".into()]);
        t.push(row);
    }
    Ok(Report {
        metrics: json!({ "queries": q.n(), "max_variance": var.max(), "min_variance": var.min() }),
        table: Some(t),
        errors: Vec::new(),
    })
}

/// Evaluate f over the (ε, γ) grid, columns in parallel, rows in grid order.
fn over_grid<T: Send>(
    ctx: &Context,
    f: impl Fn(&SpectralCache, &GpHyperparameters) -> flatgp_core::Result<T> + Sync,
) -> Result<Vec<(f64, f64, flatgp_core::Result<T>)>, Failure> {
    let shape = ctx.cfg.shape()?;
    let eps = ctx.cfg.eps_values()?;
    let gammas = ctx.cfg.gamma_values()?;
    let cols: Vec<Vec<(f64, f64, flatgp_core::Result<T>)>> = eps
        .par_iter()
        .map(|&e| {
            let cache = SpectralCache::new(&shape.with_epsilon(e), &ctx.data.x);
            gammas
                .iter()
                .map(|&g| (e, g, f(&cache, &ctx.theta(e, g))))
                .collect()
        })
        .collect();
    Ok(cols.into_iter().flatten().collect())
}

fn cell_error(e: &flatgp_core::Error, eps: f64, gamma: f64) -> ErrorRecord {
    ErrorRecord::from_core(e, Some(format!("eps={eps:e} gamma={gamma:e}")))
}

fn dof_grid(ctx: &Context) -> Result<Report, Failure> {
    let cells = over_grid(ctx, |c, th| c.dof(th))?;
    let mut t = Table::new(&["eps", "gamma", "dof", "status"]);
    let mut errors = Vec::new();
    for (e, g, r) in &cells {
        if let Err(err) = r {
            errors.push(cell_error(err, *e, *g));
        }
        t.push(vec![
            Cell::Num(*e),
            Cell::Num(*g),
            Cell::Num(*r.as_ref().unwrap_or(&f64::NAN)),
            status_of(r).into(),
        ]);
    }
    let ok = cells.iter().filter(|c| c.2.is_ok()).count();
    Ok(Report {
        metrics: json!({ "cells": cells.len(), "ok_cells": ok, "n": ctx.data.x.n() }),
        table: Some(t),
        errors,
    })
}

fn criteria_grid(ctx: &Context) -> Result<Report, Failure> {
    let (x, y) = (&ctx.data.x, &ctx.data.y);
    let shape = ctx.cfg.shape()?;
    let cells = over_grid(ctx, |c, th| {
        let m = c.smoother(th)?;
        let noise = th.effective_noise();
        let crit = [
            loo_mse(&m, y).map(|v| v.value),
            loo_nll(&m, y, noise).map(|v| v.value),
            Ok(sure(&m, y, noise).value),
            nlml(&shape, x, y, th).map(|v| v.value),
        ];
        Ok((m.trace, crit))
    })?;
    let mut t = Table::new(&["eps", "gamma", "dof", "loo_mse", "loo_nll", "sure", "nlml", "status"]);
    let mut errors = Vec::new();
    for (e, g, r) in &cells {
        let mut row = vec![Cell::Num(*e), Cell::Num(*g)];
        match r {
            Ok((dof, crit)) => {
                row.push(Cell::Num(*dof));
                let mut status = "ok".to_string();
                for c in crit {
                    row.push(Cell::Num(*c.as_ref().unwrap_or(&f64::NAN)));
                    if let Err(err) = c {
                        if status == "ok" {
                            status = err.code().into();
                        }
                        errors.push(cell_error(err, *e, *g));
                    }
                }
                row.push(status.into());
            }
            Err(err) => {
                row.extend(std::iter::repeat_n(Cell::Num(f64::NAN), 5));
                row.push(err.code().into());
                errors.push(cell_error(err, *e, *g));
            }
        }
        t.push(row);
    }
    Ok(Report {
        metrics: json!({ "cells": cells.len(), "failed_cells": errors.len() }),
        table: Some(t),
        errors,
    })
}

fn isofreedom(ctx: &Context) -> Result<Report, Failure> {
    let cfg = ctx.cfg;
    let shape = cfg.shape()?;
    let eps = cfg.eps_values()?;
    let mut t = Table::new(&["dof_target", "eps", "gamma", "dof_achieved", "residual", "status"]);
    let mut errors = Vec::new();
    let mut curves = Vec::new();
    for &m in &cfg.dof {
        let results: Vec<flatgp_core::Result<IsofreedomPoint>> = eps
            .par_iter()
            .map(|&e| isofreedom_gamma(&shape, &ctx.data.x, cfg.sigma2, e, m))
            .collect();
        let mut ok = Vec::new();
        for (&e, r) in eps.iter().zip(&results) {
            match r {
                Ok(p) => {
                    t.push(vec![
                        Cell::Num(m),
                        Cell::Num(e),
                        Cell::Num(p.gamma),
                        Cell::Num(p.dof_achieved),
                        Cell::Num(p.residual),
                        "ok".into(),
                    ]);
                    ok.push(*p);
                }
                Err(err) => {
                    t.push(vec![
                        Cell::Num(m),
                        Cell::Num(e),
                        Cell::Num(f64::NAN),
                        Cell::Num(f64::NAN),
                        Cell::Num(f64::NAN),
                        err.code().into(),
                    ]);
                    errors.push(ErrorRecord::from_core(err, Some(format!("dof={m} eps={e:e}"))));
                }
            }
        }
        let slope = if ok.len() >= 2 { Some(tail_slope(&ok)) } else { None };
        curves.push(json!({ "dof": m, "points": ok.len(), "slope": slope }));
    }
    Ok(Report {
        metrics: json!({ "curves": curves }),
        table: Some(t),
        errors,
    })
}

fn matched(ctx: &Context) -> Result<Report, Failure> {
    let cfg = ctx.cfg;
    let (x, y) = (&ctx.data.x, &ctx.data.y);
    let shape = cfg.shape()?;
    let eps = cfg.eps()?;
    let gamma = match cfg.gamma {
        Some(g) => g,
        None => isofreedom_gamma(&shape, x, cfg.sigma2, eps, cfg.dof[0])?.gamma,
    };
    let ma = matched_approximation(&shape, eps, gamma, cfg.sigma2, x)?;
    let q = ctx.query_or_data();
    let kernel = shape.with_epsilon(eps).with_gamma(gamma);
    let (gm, gv) = gp_posterior_with_nugget(&kernel, x, y, cfg.sigma2, 0.0, &q)?;
    let fit = spm_fit(&ma.target, x, y, cfg.sigma2)?;
    let (mm, mv) = (fit.mean(&q)?, fit.variance(&q)?);
    let mut t = header_with(
        point_header(&ctx.data.feature_names),
        &["gp_mean", "matched_mean", "gp_variance", "matched_variance", "status"],
    );
    for i in 0..q.n() {
        let mut row = point_cells(&q, i);
        row.extend([
            Cell::Num(gm[i]),
            Cell::Num(mm[i]),
            Cell::Num(gv[i]),
            Cell::Num(mv[i]),
            "ok".into(),
        ]);
        t.push(row);
    }
    Ok(Report {
        metrics: json!({
            "epsilon": eps,
            "gamma": gamma,
            "kind": ma.kind,
            "gain": ma.gain,
            "source_dof": ma.source_dof,
            "achieved_dof": ma.achieved_dof,
            "max_mean_deviation": (&gm - &mm).amax(),
            "max_variance_deviation": (&gv - &mv).amax(),
        }),
        table: Some(t),
        errors: Vec::new(),
    })
}

fn equiv_check(ctx: &Context) -> Result<Report, Failure> {
    let cfg = ctx.cfg;
    let x = &ctx.data.x;
    let family = cfg.family()?;
    let case = limit_model(&family, x)?;
    let b = cfg.model.ok_or_else(|| UsageError("equiv-check needs --model".into()))?.model(x.d());
    let tol = cfg.tol.unwrap_or(1e-8);
    let sigma2 = if cfg.sigma2 > 0.0 { cfg.sigma2 } else { 1.0 };
    let alpha = if case.scale_free {
        match match_scale(&case.equivalent_model, &b, x, sigma2, tol) {
            Ok(a) => Some(a),
            Err(flatgp_core::Error::NotProportional { deviation }) => {
                return Ok(Report {
                    metrics: json!({
                        "limit": case.kind,
                        "scale_free": true,
                        "equivalent": false,
                        "scale_deviation": deviation,
                    }),
                    table: None,
                    errors: Vec::new(),
                })
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let b = b.scaled(alpha.unwrap_or(1.0));
    let rep = match check_pred_equiv(&case.equivalent_model, &b, x, cfg.trials, tol, cfg.seed) {
        Ok(r) => r,
        Err(e @ flatgp_core::Error::IncomparableModels(..)) => {
            return Ok(Report {
                metrics: json!({
                    "limit": case.kind,
                    "scale_free": case.scale_free,
                    "equivalent": false,
                    "reason": e.to_string(),
                }),
                table: None,
                errors: Vec::new(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Report {
        metrics: json!({
            "limit": case.kind,
            "scale_free": case.scale_free,
            "alpha": alpha,
            "equivalent": rep.equivalent,
            "report": rep,
        }),
        table: None,
        errors: Vec::new(),
    })
}

fn std_dev(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = y.mean();
    (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// 50 equispaced points over the data range in one dimension, the data itself otherwise.
fn default_query(x: &Design) -> Design {
    if x.d() != 1 {
        return x.clone();
    }
    let pts: Vec<f64> = x.points().map(|p| p[0]).collect();
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let q: Vec<f64> = (0..50).map(|i| lo + (hi - lo) * i as f64 / 49.0).collect();
    Design::univariate(&q).unwrap_or_else(|_| x.clone())
}

fn converge(ctx: &Context) -> Result<Report, Failure> {
    let cfg = ctx.cfg;
    let (x, y) = (&ctx.data.x, &ctx.data.y);
    let family = cfg.family()?;
    let eps = cfg.eps_values()?;
    let q = ctx.query.clone().unwrap_or_else(|| default_query(x));
    let tol = cfg.tol.unwrap_or(0.05 * std_dev(y));
    let opts = StudyOptions {
        sigma2: cfg.sigma2,
        tol,
        target: None,
    };
    let rep = convergence_study(&family, x, &q, &eps, std::slice::from_ref(y), &opts)?;
    let mut t = Table::new(&[
        "eps",
        "gamma",
        "mean_deviation",
        "var_deviation",
        "smoother_deviation",
        "alpha",
        "gp_dof",
        "status",
    ]);
    let mut errors = Vec::new();
    for &e in &eps {
        if let Some(p) = rep.points.iter().find(|p| p.epsilon == e) {
            t.push(vec![
                Cell::Num(e),
                Cell::Num(p.gamma),
                Cell::Num(p.mean_deviation),
                Cell::Num(p.var_deviation),
                Cell::Num(p.smoother_deviation),
                Cell::Num(p.alpha),
                Cell::Num(p.gp_dof),
                "ok".into(),
            ]);
        } else {
            let msg = rep
                .dropped
                .iter()
                .find(|d| d.0 == e)
                .map_or_else(String::new, |d| d.1.clone());
            let mut row = vec![Cell::Num(e), Cell::Num(family.gamma(e))];
            row.extend(std::iter::repeat_n(Cell::Num(f64::NAN), 5));
            row.push("dropped".into());
            t.push(row);
            errors.push(ErrorRecord {
                code: "dropped".into(),
                message: msg,
                context: Some(format!("eps={e:e}")),
            });
        }
    }
    Ok(Report {
        metrics: json!({
            "limit": rep.case,
            "slope": rep.mean_slope,
            "var_slope": rep.var_slope,
            "smoother_slope": rep.smoother_slope,
            "final_mean_deviation": rep.final_mean_deviation(),
            "tol": tol,
            "pass": rep.pass,
        }),
        table: Some(t),
        errors,
    })
}

fn pred_curve(ctx: &Context) -> Result<Report, Failure> {
    let cfg = ctx.cfg;
    let q = ctx
        .query
        .as_ref()
        .ok_or_else(|| UsageError("pred-curve needs --query".into()))?;
    if q.n() != 2 {
        return Err(UsageError(format!("pred-curve needs exactly 2 query points, got {}", q.n())).into());
    }
    let curve = prediction_curve(
        &cfg.shape()?,
        &ctx.data.x,
        &ctx.data.y,
        cfg.sigma2,
        cfg.eps()?,
        &cfg.gamma_values()?,
        q.point(0),
        q.point(1),
    )?;
    let mut t = Table::new(&["gamma", "at_a", "at_b", "status"]);
    let mut errors = Vec::new();
    for p in &curve.points {
        let status = p.status.clone().unwrap_or_else(|| "ok".into());
        if status != "ok" {
            errors.push(ErrorRecord {
                code: status.clone(),
                message: format!("no prediction at gamma={:e}", p.gamma),
                context: Some(format!("gamma={:e}", p.gamma)),
            });
        }
        t.push(vec![Cell::Num(p.gamma), Cell::Num(p.at_a), Cell::Num(p.at_b), status.into()]);
    }
    Ok(Report {
        metrics: json!({ "anchors": curve.anchors, "points": curve.points.len() }),
        table: Some(t),
        errors,
    })
}

fn nugget_compare(ctx: &Context) -> Result<Report, Failure> {
    let cfg = ctx.cfg;
    let eps = cfg.eps()?;
    let nugget = cfg.nugget.unwrap_or(1e-6);
    let cache = SpectralCache::new(&cfg.shape()?.with_epsilon(eps), &ctx.data.x);
    let gammas = cfg.gamma_values()?;
    let mut t = Table::new(&["gamma", "dof_nugget", "status_nugget", "dof_plain", "status_plain"]);
    let mut errors = Vec::new();
    let mut last_plain = None;
    let mut plateau = None;
    for &g in &gammas {
        let theta = GpHyperparameters::new(eps, g, cfg.sigma2);
        let with = cache.dof(&theta.with_nugget(nugget));
        let plain = cache.dof(&theta);
        for (r, which) in [(&with, "nugget"), (&plain, "plain")] {
            if let Err(e) = r {
                errors.push(ErrorRecord::from_core(e, Some(format!("{which} gamma={g:e}"))));
            }
        }
        if plain.is_ok() {
            last_plain = Some(g);
        }
        if let Ok(v) = with {
            plateau = Some(v);
        }
        t.push(vec![
            Cell::Num(g),
            Cell::Num(*with.as_ref().unwrap_or(&f64::NAN)),
            status_of(&with).into(),
            Cell::Num(*plain.as_ref().unwrap_or(&f64::NAN)),
            status_of(&plain).into(),
        ]);
    }
    Ok(Report {
        metrics: json!({
            "epsilon": eps,
            "nugget": nugget,
            "nugget_scale": cfg.sigma2 / nugget,
            "dof_at_largest_gamma": plateau,
            "dof_supremum": cache.eigenvalues().iter().filter(|&&l| l > 0.0).count(),
            "last_factorizable_gamma_without_nugget": last_plain,
        }),
        table: Some(t),
        errors,
    })
}

/// Validate, load inputs and run one command.
pub fn run_command(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let opts = DatasetOptions {
        target: cfg.target.clone(),
        features: cfg.features.clone(),
    };
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| UsageError(format!("{} needs --data", cfg.command.name())))?;
    let data = parse_dataset(data_path, &opts)?;
    let query = match &cfg.query {
        Some(p) => Some(parse_points(p, data.x.d())?),
        None => None,
    };
    let ctx = Context { cfg, data, query };
    let result = match cfg.command {
        CommandKind::Fit => fit(&ctx),
        CommandKind::Predict => predict(&ctx),
        CommandKind::DofGrid => dof_grid(&ctx),
        CommandKind::CriteriaGrid => criteria_grid(&ctx),
        CommandKind::Isofreedom => isofreedom(&ctx),
        CommandKind::Matched => matched(&ctx),
        CommandKind::EquivCheck => equiv_check(&ctx),
        CommandKind::Converge => converge(&ctx),
        CommandKind::PredCurve => pred_curve(&ctx),
        CommandKind::NuggetCompare => nugget_compare(&ctx),
    };
    let config = serde_json::to_value(cfg).unwrap_or(Value::Null);
    let (status, metrics, table, errors) = match result {
        Ok(r) if r.errors.is_empty() => (RunStatus::Ok, r.metrics, r.table, r.errors),
        Ok(r) => (RunStatus::Partial, r.metrics, r.table, r.errors),
        Err(Failure::Usage(e)) => return Err(e.into()),
        Err(Failure::Numeric(e)) => (
            RunStatus::Failed,
            Value::Null,
            None,
            vec![ErrorRecord::from_core(&e, None)],
        ),
    };
    let exit_code = if status == RunStatus::Ok { 0 } else { 2 };
    Ok(RunOutput {
        summary: Summary {
            command: cfg.command.name().into(),
            seed: cfg.seed,
            status,
            config,
            metrics,
            errors,
        },
        table,
        exit_code,
    })
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Write PREFIX.json and PREFIX.csv, or print the chosen format.
pub fn emit(cfg: &ExperimentConfig, out: &RunOutput) -> io::Result<()> {
    let summary = serde_json::to_string_pretty(&out.summary)?;
    match &cfg.out {
        Some(prefix) => {
            if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            writeln!(File::create(with_extension(prefix, "json"))?, "{summary}")?;
            if let Some(t) = &out.table {
                t.write(File::create(with_extension(prefix, "csv"))?, &out.summary.config)?;
            }
        }
        None => match (&cfg.format, &out.table) {
            (OutputFormat::Csv, Some(t)) => t.write(io::stdout().lock(), &out.summary.config)?,
            _ => println!("{summary}"),
        },
    }
    Ok(())
}

/// Run and emit; returns the process exit code.
pub fn run(cfg: &ExperimentConfig) -> i32 {
    match run_command(cfg) {
        Ok(out) => {
            if let Err(e) = emit(cfg, &out) {
                eprintln!("flatgp: cannot write output: {e}");
                return 1;
            }
            let errs = &out.summary.errors;
            for e in errs.iter().take(5) {
                eprintln!("flatgp: {}: {}", e.code, e.message);
            }
            if errs.len() > 5 {
                eprintln!("flatgp: ... {} more errors in the summary", errs.len() - 5);
            }
            out.exit_code
        }
        Err(e) => {
            eprintln!("flatgp: {} ({})", e, e.code());
            1
        }
    }
}
