//! Subcommand orchestration, report assembly and output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::checker::{self, CheckItem, ConditionId, Coverage, HypothesisReport, Location, Tally, Verdict};
use crate::config::RunConfig;
use crate::discretization::Discretization;
use crate::error::Result;
use crate::radial::{self, DecayReport, RadialProfile, ResidualReport};
use crate::solver::{self, PicardOutcome, SolutionBundle, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Check,
    Solve,
    Lift,
    Verify,
    Demo,
}

impl Command {
    fn stage(self) -> u8 {
        match self {
            Command::Check => 0,
            Command::Solve => 1,
            Command::Lift => 2,
            Command::Verify | Command::Demo => 3,
        }
    }
}

/// Command-line overrides of configuration values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid_n: Option<usize>,
    pub tmax_mult: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(n) = self.grid_n {
            cfg.grid.n = n;
        }
        if let Some(m) = self.tmax_mult {
            cfg.grid.tmax_mult = m;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
        }
        if let Some(s) = self.seed {
            cfg.checker.seed = s;
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub command: Command,
    pub version: &'static str,
    pub grid_nodes: usize,
    pub t0: f64,
    pub t_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub overall: Verdict,
    pub exit_status: i32,
    pub strict: bool,
    pub failed: Vec<String>,
    pub inconclusive: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_delta: f64,
    /// `sup |T(b0) − b0|·t`
    pub fixed_point_residual: f64,
    pub quadrature_error: f64,
    /// `b0·t`: min, max, at `t0`, at `T_max`.
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_t0: f64,
    pub kappa_tmax: f64,
    /// `max |u'' + F| / max F` over interior nodes.
    pub ode_relative_residual: f64,
    pub ode_max_abs_residual: f64,
    pub ode_residual_tol: f64,
    pub u_tmax_over_tmax: f64,
    pub growth_bound: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub items: Vec<CheckItem>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialReport {
    pub points: usize,
    pub r_inner: f64,
    pub r_max: f64,
    /// `max U`, bounded by `u0/t0 ≤ ς`.
    pub u_max: f64,
    pub u_cap: f64,
    pub measured_slope: f64,
    pub slope_error: f64,
    /// `(λ − 1)(n − 2)`
    pub decay_bound: f64,
    pub comparison: &'static str,
    pub residual: ResidualReport,
    pub decay: DecayReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub run: RunInfo,
    pub summary: Summary,
    pub config: RunConfig,
    pub hypotheses: HypothesisReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<CheckItem>,
}

impl Report {
    pub fn all_items(&self) -> impl Iterator<Item = &CheckItem> {
        let sol = self.solution.iter().flat_map(|s| s.items.iter());
        let rad = self
            .radial
            .iter()
            .flat_map(|r| [&r.residual.item, &r.decay.item].into_iter());
        self.hypotheses.items.iter().chain(sol).chain(rad).chain(self.diagnostics.iter())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// Everything produced by one run, before it is written.
pub struct Outcome {
    pub report: Report,
    pub solution: Option<SolutionBundle>,
    pub profile: Option<(RadialProfile, Vec<f64>)>,
    pub disc: Discretization,
}

impl Outcome {
    pub fn overall(&self) -> Verdict {
        self.report.summary.overall
    }

    pub fn exit_status(&self) -> i32 {
        self.report.summary.exit_status
    }
}

pub fn exit_status(v: Verdict, strict: bool) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Inconclusive if !strict => 2,
        _ => 1,
    }
}

/// Relative ODE residual accepted by the `ode-residual` item.
pub const ODE_RESIDUAL_TOL: f64 = 1e-3;
const GROWTH_FLOOR: f64 = 1e-12;
const COMPARISON_NOTE: &str =
    "a solution with 0 < u ≤ U exists by the comparison principle given the certified inequalities";

fn solution_items(disc: &Discretization, out: &PicardOutcome, sol: &SolutionBundle, lambda: f64, tol: f64) -> Vec<CheckItem> {
    let t_max = disc.t_max();
    let fixed = CheckItem {
        id: ConditionId::FixedPoint,
        verdict: match out.status {
            SolveStatus::Converged => Verdict::Pass,
            SolveStatus::Inconclusive => Verdict::Inconclusive,
        },
        margin: tol - out.iterations.last().map(|s| s.delta).unwrap_or(0.0),
        error_bound: out.quad_error,
        location: Location::default(),
        coverage: Coverage::Direct,
        values: Default::default(),
        warnings: out.warnings.clone(),
    }
    .with_value("fixed_point_residual", out.residual);

    let mut band = Tally::new();
    band.record(sol.bracket_lower.min(sol.bracket_upper), 0.0, 1e-12, Location::default().sample("b0"));
    let band = band.finish(ConditionId::BandMembership, Coverage::Direct);

    let mut ode = Tally::new();
    ode.record(ODE_RESIDUAL_TOL - sol.relative_residual, 0.0, 0.0, Location::default());
    let mut ode = ode
        .finish(ConditionId::OdeResidual, Coverage::Direct)
        .with_value("relative_residual", sol.relative_residual)
        .with_value("tolerance", ODE_RESIDUAL_TOL);
    if out.status == SolveStatus::Inconclusive && ode.verdict == Verdict::Fail {
        ode.verdict = Verdict::Inconclusive;
        ode.warnings.push("residual of an unconverged iterate".into());
    }

    let (lhs, rhs) = sol.sublinear_growth(disc, lambda);
    let mut growth = Tally::new();
    growth.record((rhs - lhs) / rhs, 0.0, GROWTH_FLOOR, Location::at(t_max));
    let growth = growth
        .finish(ConditionId::SublinearGrowth, Coverage::Direct)
        .with_value("u_over_t", lhs)
        .with_value("bound", rhs);

    let mut window = sol.window_check.clone();
    window.warnings.push("evaluated along the computed solution".into());
    vec![fixed, band, ode, window, growth]
}

/// Runs the stages required by `cmd`.
pub fn run_pipeline(cfg: &RunConfig, cmd: Command, strict: bool) -> Result<Outcome> {
    cfg.validate()?;
    let disc = cfg.discretization()?;
    let hypotheses = checker::run_checks(&disc, &cfg.checker)?;
    let lambda = hypotheses.lambda;

    let mut solution = None;
    let mut sol_report = None;
    if cmd.stage() >= 1 {
        let out = solver::picard_solve(&disc, &cfg.solver)?;
        let sol = solver::assemble_solution(&disc, &out.b0).map_err(|e| e.in_op("fixed_point_solver", "assemble_solution"))?;
        let (lhs, rhs) = sol.sublinear_growth(&disc, lambda);
        sol_report = Some(SolutionReport {
            status: out.status,
            iterations: out.iterations.len(),
            final_delta: out.iterations.last().map(|s| s.delta).unwrap_or(0.0),
            fixed_point_residual: out.residual,
            quadrature_error: out.quad_error,
            kappa_min: sol.kappa.0,
            kappa_max: sol.kappa.1,
            kappa_t0: sol.kappa.2,
            kappa_tmax: sol.kappa.3,
            ode_relative_residual: sol.relative_residual,
            ode_max_abs_residual: sol.max_abs_residual,
            ode_residual_tol: ODE_RESIDUAL_TOL,
            u_tmax_over_tmax: lhs,
            growth_bound: rhs,
            warnings: out.warnings.clone(),
            items: solution_items(&disc, &out, &sol, lambda, cfg.solver.tol),
        });
        solution = Some(sol);
    }

    let mut profile = None;
    let mut radial_report = None;
    if cmd.stage() >= 2 {
        let sol = solution.as_ref().expect("solve stage ran");
        let p = &disc.problem;
        let prof = radial::lift(p, &sol.u);
        let residual = radial::radial_residual(p, &prof, cfg.radial.residual_rel_tol)
            .map_err(|e| e.in_op("radial_lift", "radial_residual"))?;
        let decay = radial::decay_rate(&prof, lambda).map_err(|e| e.in_op("radial_lift", "decay_rate"))?;
        radial_report = Some(RadialReport {
            points: prof.len(),
            r_inner: prof.r_inner,
            r_max: *prof.radii.last().unwrap(),
            u_max: prof.values.iter().cloned().fold(0.0, f64::max),
            u_cap: p.u0 / p.t0(),
            measured_slope: decay.slope,
            slope_error: decay.slope_error,
            decay_bound: decay.bound,
            comparison: COMPARISON_NOTE,
            decay,
            residual: residual.clone(),
        });
        profile = Some((prof, residual.e));
    }

    let mut diagnostics = Vec::new();
    if cmd.stage() >= 3 {
        let family = disc.sample_family(cfg.checker.samples, cfg.checker.seed)?;
        diagnostics.push(solver::band_membership(&disc, &family).map_err(|e| e.in_op("fixed_point_solver", "apply_T"))?);
        let c = solver::compactness_diagnostics(&disc, &family)
            .map_err(|e| e.in_op("fixed_point_solver", "compactness_diagnostics"))?;
        diagnostics.extend([c.monotone, c.equicontinuity, c.equiconvergence]);
    }

    let mut report = Report {
        run: RunInfo {
            command: cmd,
            version: env!("CARGO_PKG_VERSION"),
            grid_nodes: disc.grid.len(),
            t0: disc.grid.t0(),
            t_max: disc.t_max(),
            seed: cfg.checker.seed,
        },
        summary: Summary {
            overall: Verdict::Pass,
            exit_status: 0,
            strict,
            failed: Vec::new(),
            inconclusive: Vec::new(),
        },
        config: cfg.clone(),
        hypotheses,
        solution: sol_report,
        radial: radial_report,
        diagnostics,
    };
    let mut overall = Verdict::Pass;
    let (mut failed, mut inconclusive) = (Vec::new(), Vec::new());
    for item in report.all_items() {
        overall = overall.and(item.verdict);
        match item.verdict {
            Verdict::Fail => failed.push(item.id.as_str().to_string()),
            Verdict::Inconclusive => inconclusive.push(item.id.as_str().to_string()),
            Verdict::Pass => {}
        }
    }
    report.summary = Summary {
        overall,
        exit_status: exit_status(overall, strict),
        strict,
        failed,
        inconclusive,
    };
    Ok(Outcome {
        report,
        solution,
        profile,
        disc,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// Comma-delimited columns `t, b0, u, uprime, residual` and, after a lift,
/// `r, U, E`; one row per grid node.
pub fn series_text(outcome: &Outcome) -> Option<String> {
    let sol = outcome.solution.as_ref()?;
    let nodes = outcome.disc.nodes();
    let mut s = String::new();
    s.push_str("# t,b0,u,uprime,residual");
    if outcome.profile.is_some() {
        s.push_str(",r,U,E");
    }
    s.push('\n');
    for i in 0..nodes.len() {
        let mut row = vec![
            fmt(nodes[i]),
            fmt(sol.b0.values[i]),
            fmt(sol.u.values[i]),
            fmt(sol.u_prime.values[i]),
            fmt(sol.residual.values[i]),
        ];
        if let Some((prof, e)) = &outcome.profile {
            row.extend([fmt(prof.radii[i]), fmt(prof.values[i]), fmt(e[i])]);
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    Some(s)
}

/// Two-column curves separated by blank lines, each headed by a `#` line.
pub fn plot_text(outcome: &Outcome) -> Option<String> {
    let sol = outcome.solution.as_ref()?;
    let disc = &outcome.disc;
    let nodes = disc.nodes();
    let mut curves: Vec<(&str, Vec<(f64, f64)>)> = vec![
        ("t b0*t", nodes.iter().zip(&sol.b0.values).map(|(t, b)| (*t, b * t)).collect()),
        ("t alpha*t", nodes.iter().zip(&disc.alpha.values).map(|(t, b)| (*t, b * t)).collect()),
        ("t beta*t", nodes.iter().zip(&disc.beta.values).map(|(t, b)| (*t, b * t)).collect()),
        ("t u", nodes.iter().cloned().zip(sol.u.values.iter().cloned()).collect()),
        ("t residual", nodes.iter().cloned().zip(sol.residual.values.iter().cloned()).collect()),
    ];
    if let Some((prof, e)) = &outcome.profile {
        curves.push(("r U", prof.radii.iter().cloned().zip(prof.values.iter().cloned()).collect()));
        curves.push(("r E", prof.radii.iter().cloned().zip(e.iter().cloned()).collect()));
    }
    let mut s = String::new();
    for (k, (name, pts)) in curves.iter().enumerate() {
        if k > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "# {name}");
        for (x, y) in pts {
            let _ = writeln!(s, "{} {}", fmt(*x), fmt(*y));
        }
    }
    Some(s)
}

/// Writes the report and, when a solution exists, the series and plot files.
pub fn emit_outputs(outcome: &Outcome, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let names = &outcome.report.config.outputs;
    let mut written = Vec::new();
    let mut write = |name: &str, text: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| crate::Error::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
        Ok(())
    };
    write(&names.report, outcome.report.to_toml())?;
    if let Some(s) = series_text(outcome) {
        write(&names.series, s)?;
    }
    if let Some(p) = plot_text(outcome) {
        write(&names.plot, p)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut cfg: RunConfig) -> RunConfig {
        cfg.grid.n = 256;
        cfg.grid.tmax_mult = 1e4;
        cfg.checker.samples = 2;
        cfg
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_status(Verdict::Pass, false), 0);
        assert_eq!(exit_status(Verdict::Inconclusive, false), 2);
        assert_eq!(exit_status(Verdict::Inconclusive, true), 1);
        assert_eq!(exit_status(Verdict::Fail, false), 1);
    }

    #[test]
    fn check_emits_only_the_report() {
        let out = run_pipeline(&small(RunConfig::canonical()), Command::Check, false).unwrap();
        assert!(series_text(&out).is_none() && plot_text(&out).is_none());
        assert!(out.report.to_toml().contains("hale-onuchic"));
    }

    #[test]
    fn series_shape() {
        let out = run_pipeline(&small(RunConfig::canonical()), Command::Lift, false).unwrap();
        let s = series_text(&out).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "# t,b0,u,uprime,residual,r,U,E");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 256);
        let t0: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
        assert_eq!(t0, out.disc.grid.t0());
        let plot = plot_text(&out).unwrap();
        assert_eq!(plot.split("\n\n").count(), 7);
    }

    #[test]
    fn report_is_deterministic() {
        let cfg = small(RunConfig::canonical());
        let a = run_pipeline(&cfg, Command::Verify, false).unwrap().report.to_toml();
        let b = run_pipeline(&cfg, Command::Verify, false).unwrap().report.to_toml();
        assert_eq!(a, b);
        assert!(a.contains("decay_bound = -0.5"));
    }
}
