//! The integral operator on logarithmic derivatives, its damped Picard
//! iteration, assembly of the ODE solution, and the numerical analogues of
//! the compactness (bounded / equicontinuous / equiconvergent) estimates.

use serde::{Deserialize, Serialize};

use crate::checker::{self, CheckItem, ConditionId, Coverage, Location, Tally};
use crate::discretization::{BandSample, Discretization};
use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::{self, GridSeries, DEFAULT_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Stopping tolerance on `sup |b_{k+1} − b_k|·t`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `ω ∈ (0, 1]`.
    pub damping: f64,
    /// Clamp every iterate into `[α, β]`.
    pub projection: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 200,
            damping: 1.0,
            projection: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config {
                path: "solver.tol".into(),
                detail: "must be positive".into(),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::Config {
                path: "solver.max_iter".into(),
                detail: "must be at least 1".into(),
            });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config {
                path: "solver.damping".into(),
                detail: format!("ω = {} must lie in (0, 1]", self.damping),
            });
        }
        Ok(())
    }
}

/// `T(b)` on the grid with per-node error (quadrature plus tail).
#[derive(Debug, Clone)]
pub struct OperatorImage {
    pub value: GridSeries,
    pub error: Vec<f64>,
}

impl OperatorImage {
    pub fn max_error(&self) -> f64 {
        self.error.iter().cloned().fold(0.0, f64::max)
    }
}

/// `T(b)(t) = ∫_t^∞ b² + (1/u0)∫_t^∞ F(s, u_b)·exp(−∫_{t0}^s b) ds`.
///
/// Since `u_b = u0·exp(∫b)`, the second integrand is `F(s, u_b)/u_b`.
pub fn apply_operator(disc: &Discretization, b: &GridSeries) -> Result<OperatorImage> {
    let prof = disc.forcing_profile(b)?;
    let ext = disc.extension(b, *prof.u.values.last().unwrap());
    let sq_tail = ext.square_tail()?;
    let integrand: Vec<f64> = b.values.iter().zip(&prof.ratio).map(|(bv, g)| bv * bv + g).collect();
    let (mut sums, mut errs) = disc.grid.cumulative_to_end(&integrand);
    for (s, e) in sums.iter_mut().zip(errs.iter_mut()) {
        *s += sq_tail.value + prof.tail.value;
        *e += sq_tail.total_error() + prof.tail.total_error();
    }
    Ok(OperatorImage {
        value: disc.series("T(b)", sums)?,
        error: errs,
    })
}

/// Worst signed `t`-scaled distance of `b` to the band `[α, β]`
/// (negative when outside).
pub fn band_distance(disc: &Discretization, b: &[f64]) -> (f64, f64) {
    let mut worst = f64::INFINITY;
    let mut at = disc.grid.t0();
    for (i, &t) in disc.nodes().iter().enumerate() {
        let d = (b[i] - disc.alpha.values[i]).min(disc.beta.values[i] - b[i]) * t;
        if d < worst {
            worst = d;
            at = t;
        }
    }
    (worst, at)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateState {
    pub k: usize,
    /// `sup |b_k − b_{k−1}|·t`
    pub delta: f64,
    /// Band distance of the unprojected iterate.
    pub in_band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted; existence is not contradicted.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub b0: GridSeries,
    pub status: SolveStatus,
    pub iterations: Vec<IterateState>,
    /// `sup |T(b0) − b0|·t`
    pub residual: f64,
    pub quad_error: f64,
    pub warnings: Vec<String>,
}

/// Damped Picard iteration `b ← (1−ω)b + ω·T(b)` from `b⁰ = α`.
pub fn picard_solve(disc: &Discretization, cfg: &SolverConfig) -> Result<PicardOutcome> {
    cfg.validate()?;
    let n = disc.grid.len();
    let nodes = disc.nodes();
    let mut b = disc.alpha.clone();
    let mut best = (f64::INFINITY, b.clone());
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut rising = 0;
    let mut converged = false;
    for k in 1..=cfg.max_iter {
        let image = apply_operator(disc, &b).map_err(|e| e.in_op("fixed_point_solver", "apply_T"))?;
        let mut next: Vec<f64> = (0..n)
            .map(|i| (1.0 - cfg.damping) * b.values[i] + cfg.damping * image.value.values[i])
            .collect();
        let (in_band, _) = band_distance(disc, &next);
        if cfg.projection {
            for (i, v) in next.iter_mut().enumerate() {
                *v = v.clamp(disc.alpha.values[i], disc.beta.values[i]);
            }
        }
        let delta = (0..n)
            .map(|i| (next[i] - b.values[i]).abs() * nodes[i])
            .fold(0.0, f64::max);
        if let Some(prev) = history.last().map(|s: &IterateState| s.delta) {
            rising = if delta > prev { rising + 1 } else { 0 };
            if rising == 5 {
                warnings.push(format!(
                    "delta increased for 5 consecutive steps at k = {k}; try a smaller damping than ω = {}",
                    cfg.damping
                ));
            }
        }
        history.push(IterateState { k, delta, in_band });
        b = disc.series("b", next)?;
        if delta < best.0 {
            best = (delta, b.clone());
        }
        if delta <= cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        b = best.1;
        warnings.push(format!(
            "no convergence within {} iterations; existence not contradicted, iteration inconclusive",
            cfg.max_iter
        ));
    }
    let image = apply_operator(disc, &b)?;
    let residual = (0..n)
        .map(|i| (image.value.values[i] - b.values[i]).abs() * nodes[i])
        .fold(0.0, f64::max);
    Ok(PicardOutcome {
        b0: b,
        status: if converged {
            SolveStatus::Converged
        } else {
            SolveStatus::Inconclusive
        },
        iterations: history,
        residual,
        quad_error: image.max_error(),
        warnings,
    })
}

/// Fixed point turned into the ODE solution plus its verification series.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub b0: GridSeries,
    pub u: GridSeries,
    pub u_prime: GridSeries,
    pub forcing: GridSeries,
    /// `u'' + F(t, u)`
    pub residual: GridSeries,
    /// Nodes whose stencil is one-sided.
    pub low_order: Vec<bool>,
    /// `max_interior |u'' + F| / max F` (zero when `F ≡ 0` and `u'' ≡ 0`).
    pub relative_residual: f64,
    pub max_abs_residual: f64,
    /// `min (u'/u − α)·t` and `min (β − u'/u)·t`.
    pub bracket_lower: f64,
    pub bracket_upper: f64,
    /// Windowed `∫F/u ≤ γ` along the solution.
    pub window_check: CheckItem,
    /// `b0·t` summary: `(min, max, at t0, at T_max)`.
    pub kappa: (f64, f64, f64, f64),
}

pub fn assemble_solution(disc: &Discretization, b0: &GridSeries) -> Result<SolutionBundle> {
    let p = &disc.problem;
    let nodes = disc.nodes();
    let u = quadrature::cumulative_exp_integral(b0, p.u0)?;
    let u_prime: Vec<f64> = b0.values.iter().zip(&u.values).map(|(b, u)| b * u).collect();
    let forcing = par::map_indices(nodes.len(), |i| p.forcing_f(nodes[i], u.values[i]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let (d2, low_order) = quadrature::second_derivative(&u)?;
    let residual: Vec<f64> = d2.values.iter().zip(&forcing).map(|(a, f)| a + f).collect();
    let max_f = forcing.iter().cloned().fold(0.0, f64::max);
    let max_abs_residual = residual
        .iter()
        .zip(&low_order)
        .filter(|(_, low)| !**low)
        .map(|(r, _)| r.abs())
        .fold(0.0, f64::max);
    let relative_residual = if max_f > 0.0 {
        max_abs_residual / max_f
    } else {
        max_abs_residual
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
    for (i, &t) in nodes.iter().enumerate() {
        lo = lo.min((b0.values[i] - disc.alpha.values[i]) * t);
        hi = hi.min((disc.beta.values[i] - b0.values[i]) * t);
    }
    let sample = BandSample {
        label: "b0".into(),
        b: b0.clone(),
    };
    let window_check = checker::window_check(disc, std::slice::from_ref(&sample), ConditionId::Equicont)?;
    let kt: Vec<f64> = b0.values.iter().zip(nodes).map(|(b, t)| b * t).collect();
    let kappa = (
        kt.iter().cloned().fold(f64::INFINITY, f64::min),
        kt.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        kt[0],
        *kt.last().unwrap(),
    );
    Ok(SolutionBundle {
        b0: b0.clone(),
        u_prime: disc.series("u'", u_prime)?,
        forcing: disc.series("F", forcing)?,
        residual: disc.series("residual", residual)?,
        u,
        low_order,
        relative_residual,
        max_abs_residual,
        bracket_lower: lo,
        bracket_upper: hi,
        window_check,
        kappa,
    })
}

impl SolutionBundle {
    /// `u(T)/T ≤ (u0/t0)·(T/t0)^{λ−1}` at `T = T_max`; returns
    /// `(u(T)/T, bound)`.
    pub fn sublinear_growth(&self, disc: &Discretization, lambda: f64) -> (f64, f64) {
        let t0 = disc.grid.t0();
        let t = disc.t_max();
        let lhs = *self.u.values.last().unwrap() / t;
        let rhs = disc.problem.u0 / t0 * (t / t0).powf(lambda - 1.0);
        (lhs, rhs)
    }
}

/// Worst margins of the three compactness estimates over a sampled family.
#[derive(Debug, Clone)]
pub struct CompactnessReport {
    /// `T(b)` nonincreasing.
    pub monotone: CheckItem,
    /// `T(b)(t1) − T(b)(t2) ≤ ‖β‖²(t2 − t1) + γ(t1, t2)`.
    pub equicontinuity: CheckItem,
    /// `0 ≤ T(b)(t) ≤ β(t)` on the last decade.
    pub equiconvergence: CheckItem,
}

pub fn compactness_diagnostics(disc: &Discretization, family: &[BandSample]) -> Result<CompactnessReport> {
    let nodes = disc.nodes();
    let n = nodes.len();
    let beta_norm = disc.beta.values.iter().cloned().fold(0.0, f64::max);
    let mut mono = Tally::new();
    let mut equi = Tally::new();
    let mut conv = Tally::new();
    let decade = disc.grid.index_at_or_after(disc.t_max() / 10.0);
    for s in family {
        let image = apply_operator(disc, &s.b)?;
        let tb = &image.value.values;
        for i in 0..n - 1 {
            // scaled by t_i² so power-law images compare at unit size
            let scale = nodes[i] * nodes[i] / (nodes[i + 1] - nodes[i]);
            let m = (tb[i] - tb[i + 1]) * scale;
            let err = (image.error[i] + image.error[i + 1]) * scale;
            mono.record(m, err, 1e-12 * tb[i].abs() * scale, Location::at(nodes[i]).sample(&s.label));
        }
        for i in decade..n {
            let t = nodes[i];
            let err = image.error[i] * t;
            conv.record(tb[i] * t, err, 1e-12 * tb[i].abs() * t, Location::at(t).sample(&s.label));
            conv.record(
                (disc.beta.values[i] - tb[i]) * t,
                err,
                1e-12 * disc.beta.values[i] * t,
                Location::at(t).sample(&s.label),
            );
        }
        let prof = disc.forcing_profile(&s.b)?;
        let gamma = checker::GammaDensity::new(disc)?;
        for (t1, t2) in checker::windows(disc) {
            let b_sq = |t: f64| {
                let v = s.b.interp(t);
                v * v
            };
            let g = |t: f64| checker::forcing_ratio_interp(disc, &prof, t);
            let lhs = quadrature::integrate_segment(|t| b_sq(t) + g(t).unwrap_or(f64::NAN), t1, t2, DEFAULT_REL_TOL)?;
            let gam = gamma.integral(t1, t2)?;
            let rhs = beta_norm * beta_norm * (t2 - t1) + gam.value;
            let scale = lhs.value.abs() + rhs.abs();
            equi.record(
                rhs - lhs.value,
                lhs.error + gam.error,
                1e-12 * scale,
                Location::window(t1, t2).sample(&s.label),
            );
        }
    }
    let coverage = Coverage::Sampled;
    Ok(CompactnessReport {
        monotone: mono.finish(ConditionId::CompactMonotone, coverage),
        equicontinuity: equi.finish(ConditionId::CompactEquicontinuity, coverage),
        equiconvergence: conv.finish(ConditionId::CompactEquiconvergence, coverage),
    })
}

/// `T(b) ∈ [α − ε, β + ε]` over a family, `ε` = quadrature error plus
/// `1e-9`; margins scaled by `t`.
pub fn band_membership(disc: &Discretization, family: &[BandSample]) -> Result<CheckItem> {
    let nodes = disc.nodes();
    let mut tally = Tally::new();
    let mut worst_err = 0.0f64;
    for s in family {
        let image = apply_operator(disc, &s.b)?;
        for (i, &t) in nodes.iter().enumerate() {
            let v = image.value.values[i];
            let m = (v - disc.alpha.values[i]).min(disc.beta.values[i] - v) * t;
            let err = (image.error[i] + disc.limits.error[i]) * t;
            worst_err = worst_err.max(image.error[i]);
            tally.record(m, err, BAND_SLACK * t, Location::at(t).sample(&s.label));
        }
    }
    let coverage = if disc.problem.m.is_linear() {
        Coverage::Certified
    } else {
        Coverage::Sampled
    };
    Ok(tally
        .finish(ConditionId::BandMembership, coverage)
        .with_value("max_quadrature_error", worst_err)
        .with_value("slack", BAND_SLACK))
}

/// Absolute slack on `T(b) ∈ [α, β]` beyond the quadrature error.
pub const BAND_SLACK: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{GammaSpec, Nonlinearity, ProblemSpec};
    use crate::scalar_map::ScalarMap;
    use approx::assert_relative_eq;

    fn problem(c: f64, g: ScalarMap, q_plus: f64) -> ProblemSpec {
        ProblemSpec::new(
            3,
            1.0,
            1.0,
            1.0,
            1.0,
            Nonlinearity::linear(ScalarMap::power(c, -2.0)),
            g,
            ScalarMap::Zero,
            ScalarMap::constant(q_plus),
            GammaSpec::DerivedLinear,
        )
        .unwrap()
    }

    #[test]
    fn operator_on_power_law_b() {
        let d = Discretization::new(problem(0.125, ScalarMap::Zero, 0.5), 1024, 1e6).unwrap();
        let kappa = 0.3;
        let b = GridSeries::from_fn(d.grid.clone(), "b", |t| kappa / t).unwrap();
        let img = apply_operator(&d, &b).unwrap();
        for (v, t) in img.value.values.iter().zip(d.nodes()) {
            assert_relative_eq!(v * t, kappa * kappa + 0.125, max_relative = 1e-9);
        }
    }

    #[test]
    fn operator_without_forcing() {
        let d = Discretization::new(problem(0.0, ScalarMap::Zero, 0.5), 512, 1e4).unwrap();
        let img = apply_operator(&d, &d.beta).unwrap();
        for (v, t) in img.value.values.iter().zip(d.nodes()) {
            assert_relative_eq!(v * t, 0.25, max_relative = 1e-8);
        }
        let zero = problem(0.0, ScalarMap::Zero, 0.0);
        let d = Discretization::new(zero, 256, 1e4).unwrap();
        let img = apply_operator(&d, &d.alpha).unwrap();
        assert!(img.value.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trivial_problem_converges_in_one_step() {
        let d = Discretization::new(problem(0.0, ScalarMap::Zero, 0.0), 256, 1e4).unwrap();
        let out = picard_solve(&d, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert_eq!(out.iterations.len(), 1);
        assert!(out.b0.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn damping_does_not_change_the_fixed_point() {
        let d = Discretization::new(problem(0.125, ScalarMap::Zero, 0.5), 512, 1e4).unwrap();
        let full = picard_solve(&d, &SolverConfig::default()).unwrap();
        let half = picard_solve(
            &d,
            &SolverConfig {
                damping: 0.5,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        for ((a, b), t) in full.b0.values.iter().zip(&half.b0.values).zip(d.nodes()) {
            assert!((a - b).abs() * t <= 1e-8);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let d = Discretization::new(problem(0.125, ScalarMap::Zero, 0.5), 256, 1e4).unwrap();
        let out = picard_solve(
            &d,
            &SolverConfig {
                max_iter: 2,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.status, SolveStatus::Inconclusive);
        assert!(!out.warnings.is_empty());
        assert!(SolverConfig {
            damping: 0.0,
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
    }
}
