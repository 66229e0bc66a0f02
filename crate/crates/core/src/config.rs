//! TOML run configuration.
//!
//! ```toml
//! [problem]
//! n = 3
//! R = 1.0
//! u0 = 1.0
//! varsigma = 1.0
//! p = 1.0
//! m = [{ a = { kind = "power", c = 0.125, e = -2.0 } }]
//! q_plus = { kind = "constant", value = 0.5 }
//! gamma = { form = "derived-linear" }
//!
//! [grid]
//! n = 4096
//! tmax_mult = 1e6
//! ```
//!
//! Every section except `[problem]` is optional; unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::checker::CheckerConfig;
use crate::discretization::{Discretization, DEFAULT_NODES, DEFAULT_TMAX_MULT};
use crate::error::{Error, Result};
use crate::problem::{GammaSpec, Nonlinearity, ProblemSpec};
use crate::radial::RESIDUAL_REL_TOL;
use crate::scalar_map::ScalarMap;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: u32,
    #[serde(rename = "R")]
    pub r_inner: f64,
    pub u0: f64,
    pub varsigma: f64,
    pub p: f64,
    #[serde(default)]
    pub m: Nonlinearity,
    #[serde(default)]
    pub g: ScalarMap,
    #[serde(default)]
    pub q_minus: ScalarMap,
    pub q_plus: ScalarMap,
    /// Defaults to the form derived from `m` (linear or Emden–Fowler), or
    /// zero when `m ≡ 0` and `g ≡ 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub tmax_mult: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: DEFAULT_NODES,
            tmax_mult: DEFAULT_TMAX_MULT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialConfig {
    /// One-sided tolerance on `E(r)` relative to its term magnitudes.
    pub residual_rel_tol: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig {
            residual_rel_tol: RESIDUAL_REL_TOL,
        }
    }
}

/// File names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub report: String,
    pub series: String,
    pub plot: String,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            report: "report.toml".into(),
            series: "series.dat".into(),
            plot: "plot.dat".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checker: CheckerConfig,
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

fn config_error(path: &str, detail: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        detail: detail.into(),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::new(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(if path.is_empty() { "." } else { &path }, e.into_inner().message().trim())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// The built-in first canonical instance: `n = 3`, `m = U/(8r²)`,
    /// `g = 0`, `q₋ = 0`, `q₊ = 1/2`.
    pub fn canonical() -> Self {
        RunConfig {
            problem: ProblemConfig {
                n: 3,
                r_inner: 1.0,
                u0: 1.0,
                varsigma: 1.0,
                p: 1.0,
                m: Nonlinearity::linear(ScalarMap::power(0.125, -2.0)),
                g: ScalarMap::Zero,
                q_minus: ScalarMap::Zero,
                q_plus: ScalarMap::constant(0.5),
                gamma: Some(GammaSpec::DerivedLinear),
            },
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            checker: CheckerConfig::default(),
            radial: RadialConfig::default(),
            outputs: OutputsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem_spec()?;
        if self.grid.n < 64 {
            return Err(config_error("grid.n", format!("N = {} must be at least 64", self.grid.n)));
        }
        if !(self.grid.tmax_mult >= 100.0 && self.grid.tmax_mult.is_finite()) {
            return Err(config_error(
                "grid.tmax_mult",
                format!("T_max/t0 = {} must be finite and at least 100", self.grid.tmax_mult),
            ));
        }
        self.solver.validate()?;
        if !(self.radial.residual_rel_tol > 0.0) {
            return Err(config_error("radial.residual_rel_tol", "must be positive"));
        }
        for (key, name) in [
            ("outputs.report", &self.outputs.report),
            ("outputs.series", &self.outputs.series),
            ("outputs.plot", &self.outputs.plot),
        ] {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(config_error(key, format!("`{name}` must be a plain file name")));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> Result<GammaSpec> {
        if let Some(g) = &self.problem.gamma {
            return Ok(g.clone());
        }
        let pr = &self.problem;
        if pr.m.is_zero() && pr.g.is_zero() {
            Ok(GammaSpec::Zero)
        } else if pr.m.is_linear() {
            Ok(GammaSpec::DerivedLinear)
        } else if pr.g.is_zero() && pr.m.emden_fowler_form().is_some() {
            Ok(GammaSpec::DerivedEmdenFowler)
        } else {
            Err(config_error(
                "problem.gamma",
                "required: the modulus cannot be derived for this nonlinearity",
            ))
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let pr = &self.problem;
        ProblemSpec::new(
            pr.n,
            pr.r_inner,
            pr.u0,
            pr.varsigma,
            pr.p,
            pr.m.clone(),
            pr.g.clone(),
            pr.q_minus.clone(),
            pr.q_plus.clone(),
            self.gamma()?,
        )
    }

    pub fn discretization(&self) -> Result<Discretization> {
        Discretization::new(self.problem_spec()?, self.grid.n, self.grid.tmax_mult)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
