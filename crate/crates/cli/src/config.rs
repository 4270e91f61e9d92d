//! Command-line configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use flatgp_core::flatlimit::ScaledKernelFamily;
use flatgp_core::linalg::logspace;
use flatgp_core::spm::{polyharmonic_spm, Basis, SemiParametricModel};
use flatgp_core::Kernel;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    /// Fit on the training data; in-sample diagnostics and criteria.
    Fit,
    /// Posterior mean and variance at query points.
    Predict,
    /// Degrees of freedom over an (ε, γ) grid.
    DofGrid,
    /// LOO-MSE, LOO-NLL, SURE and NLML over an (ε, γ) grid.
    CriteriaGrid,
    /// γ(ε) curves of constant degrees of freedom.
    Isofreedom,
    /// Flat-limit model with matched degrees of freedom.
    Matched,
    /// Prediction equivalence between the flat limit and a given model.
    EquivCheck,
    /// Convergence of the scaled family towards its flat limit.
    Converge,
    /// Predictions at two points as γ sweeps a grid.
    PredCurve,
    /// Degrees of freedom with and without a nugget.
    NuggetCompare,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Fit => "fit",
            CommandKind::Predict => "predict",
            CommandKind::DofGrid => "dof-grid",
            CommandKind::CriteriaGrid => "criteria-grid",
            CommandKind::Isofreedom => "isofreedom",
            CommandKind::Matched => "matched",
            CommandKind::EquivCheck => "equiv-check",
            CommandKind::Converge => "converge",
            CommandKind::PredCurve => "pred-curve",
            CommandKind::NuggetCompare => "nugget-compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Gaussian,
    Exponential,
    Matern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Log-spaced grid `a:b:k` with k points from a to b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            vec![self.start]
        } else {
            logspace(self.start, self.end, self.count)
        }
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected a:b:k, got {s:?}"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
        let (start, end) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("not a count: {:?}", parts[2]))?;
        if !(start > 0.0 && end > 0.0 && start.is_finite() && end.is_finite()) {
            return Err("grid endpoints must be positive and finite".into());
        }
        if count == 0 {
            return Err("grid must have at least one point".into());
        }
        Ok(Grid { start, end, count })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.count)
    }
}

/// Semi-parametric model named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    /// `phs:r`, polyharmonic spline of order r with polynomials of degree < r.
    Phs(u32),
    /// `poly:s`, unpenalized polynomials of degree ≤ s.
    Poly(usize),
    /// `dot:m`, kernel (xᵀy)^m with polynomials of degree < m.
    Dot(u32),
}

impl ModelSpec {
    pub fn model(self, d: usize) -> SemiParametricModel {
        match self {
            ModelSpec::Phs(r) => polyharmonic_spm(r, d),
            ModelSpec::Poly(s) => SemiParametricModel::polynomial(s, d),
            ModelSpec::Dot(m) => SemiParametricModel::new(Kernel::polynomial(m), Basis::below(m as usize), d),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, arg) = s.split_once(':').ok_or_else(|| format!("expected name:order, got {s:?}"))?;
        let k: u32 = arg.trim().parse().map_err(|_| format!("bad order {arg:?}"))?;
        match name.trim() {
            "phs" if k >= 1 => Ok(ModelSpec::Phs(k)),
            "poly" => Ok(ModelSpec::Poly(k as usize)),
            "dot" if k >= 1 => Ok(ModelSpec::Dot(k)),
            _ => Err(format!("unknown model {s:?} (phs:r, poly:s, dot:m with r, m >= 1)")),
        }
    }
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "flatgp", version, about = "Flat-limit experiments for GP regression")]
pub struct ExperimentConfig {
    #[arg(value_enum)]
    pub command: CommandKind,
    /// Training data CSV: header row, feature columns, then the target column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column name (default: last column).
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated feature column names (default: all but the target).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelFamily,
    /// Matérn smoothness ν (half-integer).
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Log grid a:b:k for ε.
    #[arg(long)]
    pub eps_grid: Option<Grid>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Log grid a:b:k for γ.
    #[arg(long)]
    pub gamma_grid: Option<Grid>,
    /// Gain exponent, γ(ε) = γ₀ ε^(-p).
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma2: f64,
    #[arg(long)]
    pub nugget: Option<f64>,
    /// Target degrees of freedom (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub dof: Vec<f64>,
    /// Query points CSV: header row and one column per feature.
    #[arg(long)]
    pub query: Option<PathBuf>,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// What to print on stdout when --out is absent.
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    /// Semi-parametric model: phs:r, poly:s or dot:m.
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Tolerance for equiv-check and converge.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Random trials for equiv-check.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

impl ExperimentConfig {
    /// Shape of the kernel at ε = 1 and unit gain.
    pub fn shape(&self) -> Result<Kernel, UsageError> {
        match self.kernel {
            KernelFamily::Gaussian => Ok(Kernel::gaussian(1.0, 1.0)),
            KernelFamily::Exponential => Ok(Kernel::exponential(1.0, 1.0)),
            KernelFamily::Matern => {
                Kernel::matern(self.nu.unwrap_or(1.5), 1.0, 1.0).map_err(|e| UsageError(e.to_string()))
            }
        }
    }

    pub fn family(&self) -> Result<ScaledKernelFamily, UsageError> {
        let p = self.p.ok_or_else(|| UsageError(format!("{} needs --p", self.command.name())))?;
        Ok(ScaledKernelFamily::new(self.shape()?, p, self.gamma0))
    }

    fn need<T: Copy>(&self, v: Option<T>, flag: &str) -> Result<T, UsageError> {
        v.ok_or_else(|| UsageError(format!("{} needs {flag}", self.command.name())))
    }

    pub fn eps(&self) -> Result<f64, UsageError> {
        self.need(self.eps, "--eps")
    }

    pub fn gamma(&self) -> Result<f64, UsageError> {
        self.need(self.gamma, "--gamma")
    }

    pub fn eps_values(&self) -> Result<Vec<f64>, UsageError> {
        Ok(self.need(self.eps_grid, "--eps-grid")?.values())
    }

    pub fn gamma_values(&self) -> Result<Vec<f64>, UsageError> {
        Ok(self.need(self.gamma_grid, "--gamma-grid")?.values())
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<(), UsageError> {
        let positive = |v: Option<f64>, flag: &str| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(UsageError(format!("{flag} must be positive"))),
            _ => Ok(()),
        };
        positive(self.eps, "--eps")?;
        positive(self.gamma, "--gamma")?;
        positive(Some(self.gamma0), "--gamma0")?;
        positive(self.tol, "--tol")?;
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(UsageError("--sigma2 must be non-negative".into()));
        }
        if let Some(nu) = self.nugget {
            if !(nu >= 0.0 && nu.is_finite()) {
                return Err(UsageError("--nugget must be non-negative".into()));
            }
        }
        if self.dof.iter().any(|m| !(*m > 0.0)) {
            return Err(UsageError("--dof values must be positive".into()));
        }
        if self.data.is_none() && self.command != CommandKind::EquivCheck {
            return Err(UsageError(format!("{} needs --data", self.command.name())));
        }
        self.shape()?;
        use CommandKind::*;
        match self.command {
            Fit | Predict => {
                if self.model.is_none() {
                    self.eps()?;
                    self.gamma()?;
                }
            }
            DofGrid | CriteriaGrid => {
                self.eps_values()?;
                self.gamma_values()?;
            }
            Isofreedom => {
                self.eps_values()?;
                if self.dof.is_empty() {
                    return Err(UsageError("isofreedom needs --dof".into()));
                }
            }
            Matched => {
                self.eps()?;
                if self.gamma.is_none() && self.dof.len() != 1 {
                    return Err(UsageError("matched needs --gamma or a single --dof".into()));
                }
            }
            EquivCheck => {
                self.family()?;
                self.need(self.model, "--model")?;
                if self.data.is_none() {
                    return Err(UsageError("equiv-check needs --data for the design".into()));
                }
            }
            Converge => {
                self.family()?;
                let eps = self.eps_values()?;
                if eps.len() < 3 {
                    return Err(UsageError("converge needs at least 3 eps values".into()));
                }
            }
            PredCurve => {
                self.eps()?;
                self.gamma_values()?;
                self.need(self.query.as_ref(), "--query")?;
            }
            NuggetCompare => {
                self.eps()?;
                self.gamma_values()?;
            }
        }
        if matches!(self.command, Isofreedom | Converge) {
            let eps = self.eps_values()?;
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(UsageError("--eps-grid must be decreasing (a > b)".into()));
            }
        }
        Ok(())
    }
}
