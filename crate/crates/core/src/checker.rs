//! Decides every hypothesis of the existence construction with explicit
//! signed margins.
//!
//! Conditions quantified over the whole band `B` (or the class `C` of
//! solutions with `u'/u ∈ B`) are evaluated on the envelopes, their midpoint
//! and `k` seeded random members. When `F/u` does not depend on `u` (linear
//! `m`), or `m` is declared monotone and the declaration is consistent on the
//! grid, the envelope checks bound the whole family and the item is marked
//! certified; otherwise it is marked sampled.
//!
//! Pass/fail uses one-sided error accounting: a point passes when its margin
//! is at least its error budget, fails when the margin is below minus the
//! budget, and is inconclusive in between. Two sides that agree to roundoff
//! with no quadrature uncertainty (an identity) pass with margin zero.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{BandSample, Discretization, ForcingProfile};
use crate::error::{Error, Result};
use crate::par;
use crate::problem::GammaSpec;
use crate::quadrature::{self, Estimate, Grid, DEFAULT_REL_TOL};

/// Roundoff floor relative to the compared magnitudes.
pub const ROUNDOFF_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// Conjunction: any failure fails, else any inconclusive is inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coverage {
    /// The checked instances bound every member of the class.
    Certified,
    /// Only the listed samples were checked.
    Sampled,
    /// Pointwise data condition, no class quantifier.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionId {
    #[serde(rename = "range-q")]
    RangeQ,
    #[serde(rename = "L2-decay")]
    L2Decay,
    #[serde(rename = "gamma-modulus")]
    GammaModulus,
    #[serde(rename = "hale-onuchic")]
    HaleOnuchic,
    #[serde(rename = "equicont")]
    Equicont,
    #[serde(rename = "sign-compHa")]
    SignCompHa,
    #[serde(rename = "thm2-tail")]
    Thm2Tail,
    #[serde(rename = "thm2-window")]
    Thm2Window,
    #[serde(rename = "coupling")]
    Coupling,
    #[serde(rename = "linear-case")]
    LinearCase,
    #[serde(rename = "emden-fowler")]
    EmdenFowler,
    #[serde(rename = "compact-monotone")]
    CompactMonotone,
    #[serde(rename = "compact-equicontinuity")]
    CompactEquicontinuity,
    #[serde(rename = "compact-equiconvergence")]
    CompactEquiconvergence,
    #[serde(rename = "band-membership")]
    BandMembership,
    #[serde(rename = "fixed-point")]
    FixedPoint,
    #[serde(rename = "sublinear-growth")]
    SublinearGrowth,
    #[serde(rename = "ode-residual")]
    OdeResidual,
    #[serde(rename = "radial-residual")]
    RadialResidual,
    #[serde(rename = "decay-rate")]
    DecayRate,
}

impl ConditionId {
    pub fn as_str(&self) -> &'static str {
        use ConditionId::*;
        match self {
            RangeQ => "range-q",
            L2Decay => "L2-decay",
            GammaModulus => "gamma-modulus",
            HaleOnuchic => "hale-onuchic",
            Equicont => "equicont",
            SignCompHa => "sign-compHa",
            Thm2Tail => "thm2-tail",
            Thm2Window => "thm2-window",
            Coupling => "coupling",
            LinearCase => "linear-case",
            EmdenFowler => "emden-fowler",
            CompactMonotone => "compact-monotone",
            CompactEquicontinuity => "compact-equicontinuity",
            CompactEquiconvergence => "compact-equiconvergence",
            BandMembership => "band-membership",
            FixedPoint => "fixed-point",
            SublinearGrowth => "sublinear-growth",
            OdeResidual => "ode-residual",
            RadialResidual => "radial-residual",
            DecayRate => "decay-rate",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Location {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<String>,
}

impl Location {
    pub fn is_empty(&self) -> bool {
        self.t.is_none() && self.t2.is_none() && self.sample.is_none()
    }

    pub fn at(t: f64) -> Self {
        Location {
            t: Some(t),
            ..Default::default()
        }
    }

    pub fn window(t1: f64, t2: f64) -> Self {
        Location {
            t: Some(t1),
            t2: Some(t2),
            sample: None,
        }
    }

    pub fn sample(mut self, label: &str) -> Self {
        self.sample = Some(label.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub id: ConditionId,
    pub verdict: Verdict,
    /// Worst signed margin (item-specific scaling, see the check).
    pub margin: f64,
    /// Error budget at the worst location.
    pub error_bound: f64,
    #[serde(default, skip_serializing_if = "Location::is_empty")]
    pub location: Location,
    pub coverage: Coverage,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl CheckItem {
    pub fn with_value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Verdict of one inequality `margin ≥ 0` with error budget `err` and
/// roundoff floor `floor`.
pub fn decide(margin: f64, err: f64, floor: f64) -> Verdict {
    if !margin.is_finite() {
        return Verdict::Fail;
    }
    if margin >= err || (margin >= -floor && err <= floor) {
        Verdict::Pass
    } else if margin < -(err + floor) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Running worst case over many inequality evaluations.
#[derive(Debug, Clone)]
pub struct Tally {
    verdict: Verdict,
    worst: Option<(f64, f64, Location)>,
    max_err: f64,
}

impl Default for Tally {
    fn default() -> Self {
        Self::new()
    }
}

impl Tally {
    pub fn new() -> Self {
        Tally {
            verdict: Verdict::Pass,
            worst: None,
            max_err: 0.0,
        }
    }

    pub fn record(&mut self, margin: f64, err: f64, floor: f64, loc: Location) {
        let v = decide(margin, err, floor);
        // identities that pass within roundoff are reported as exact
        let margin = if v == Verdict::Pass && margin < 0.0 { 0.0 } else { margin };
        self.verdict = self.verdict.and(v);
        self.max_err = self.max_err.max(err);
        let replace = match &self.worst {
            None => true,
            Some((m, _, _)) => margin < *m || margin.is_nan(),
        };
        if replace {
            self.worst = Some((margin, err, loc));
        }
    }

    pub fn merge(&mut self, other: Tally) {
        self.verdict = self.verdict.and(other.verdict);
        self.max_err = self.max_err.max(other.max_err);
        if let Some((m, e, l)) = other.worst {
            let replace = match &self.worst {
                None => true,
                Some((mine, _, _)) => m < *mine,
            };
            if replace {
                self.worst = Some((m, e, l));
            }
        }
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn worst_margin(&self) -> f64 {
        self.worst.as_ref().map(|w| w.0).unwrap_or(0.0)
    }

    pub fn finish(self, id: ConditionId, coverage: Coverage) -> CheckItem {
        let (margin, error_bound, location) = self.worst.unwrap_or((0.0, 0.0, Location::default()));
        CheckItem {
            id,
            verdict: self.verdict,
            margin,
            error_bound: error_bound.max(0.0),
            location,
            coverage,
            values: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DeclaredForm {
    #[default]
    None,
    Linear,
    EmdenFowler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckerConfig {
    /// Random band members in addition to `α`, `β` and the midpoint.
    pub samples: usize,
    pub seed: u64,
    /// User declaration that `F(t, u)/u` is monotone in `u`.
    pub monotone_m: bool,
    pub form: DeclaredForm,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig {
            samples: 8,
            seed: 1,
            monotone_m: false,
            form: DeclaredForm::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingInfo {
    pub samples: usize,
    pub seed: u64,
    pub members: Vec<String>,
    pub grid_nodes: usize,
    pub t_max: f64,
    /// Grid ratio `t_{i+1}/t_i` at which `q±` and pointwise conditions are sampled.
    pub grid_ratio: f64,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub overall: Verdict,
    pub lambda: f64,
    pub t_lambda: f64,
    pub sampling: SamplingInfo,
    pub items: Vec<CheckItem>,
}

impl HypothesisReport {
    pub fn item(&self, id: ConditionId) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.id == id)
    }
}

/// `γ` as an integral of a density, bound to a discretization.
pub struct GammaDensity<'a> {
    disc: &'a Discretization,
    spec: GammaSpec,
    sigma: f64,
}

impl<'a> GammaDensity<'a> {
    pub fn new(disc: &'a Discretization) -> Result<Self> {
        let p = &disc.problem;
        let mut sigma = 1.0;
        match &p.gamma {
            GammaSpec::DerivedLinear if !p.m.is_linear() => {
                return Err(Error::invalid(
                    "γ derived from the linear form needs m(r,U) = a(r)·U; supply γ explicitly",
                ))
            }
            GammaSpec::DerivedEmdenFowler => {
                sigma = p.emden_fowler_parts()?.1;
            }
            GammaSpec::Linear { k } if !(*k >= 0.0) => {
                return Err(Error::invalid(format!("γ = k·(t2 − t1) needs k ≥ 0, got {k}")));
            }
            _ => {}
        }
        Ok(GammaDensity {
            disc,
            spec: p.gamma.clone(),
            sigma,
        })
    }

    pub fn is_zero(&self) -> bool {
        match &self.spec {
            GammaSpec::Zero => true,
            GammaSpec::Density { density } => density.is_zero(),
            GammaSpec::Linear { k } => *k == 0.0,
            GammaSpec::DerivedLinear | GammaSpec::DerivedEmdenFowler => {
                self.disc.problem.m.is_zero() && self.disc.problem.g.is_zero()
            }
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let p = &self.disc.problem;
        match &self.spec {
            GammaSpec::Zero => Ok(0.0),
            GammaSpec::Density { density } => Ok(density.eval(s)),
            GammaSpec::Linear { k } => Ok(*k),
            GammaSpec::DerivedLinear => p.linear_rate(s),
            GammaSpec::DerivedEmdenFowler => {
                let (a, _) = p.emden_fowler_rate(s)?;
                let ia = p.alpha_map().integral(p.t0(), s, DEFAULT_REL_TOL)?.value;
                Ok(p.u0.powf(self.sigma - 1.0) * a * (-(1.0 - self.sigma) * ia).exp())
            }
        }
    }

    /// `γ(t1, t2)`.
    pub fn integral(&self, t1: f64, t2: f64) -> Result<Estimate> {
        match &self.spec {
            GammaSpec::Zero => Ok(Estimate::exact(0.0)),
            GammaSpec::Linear { k } => Ok(Estimate::exact(k * (t2 - t1))),
            GammaSpec::Density { density } => density.integral(t1, t2, DEFAULT_REL_TOL),
            _ => integrate_fallible(|s| self.eval(s), t1, t2, 0.0),
        }
    }
}

/// Adaptive quadrature of a fallible integrand; the first error wins.
/// `abs_tol` bounds refinement when the integrand is a cancelling difference.
pub fn integrate_fallible(f: impl Fn(f64) -> Result<f64>, t1: f64, t2: f64, abs_tol: f64) -> Result<Estimate> {
    if !(t1 > 0.0 && t2 >= t1) {
        return Err(Error::invalid(format!("segment [{t1}, {t2}] is not positive and ordered")));
    }
    let failure = std::cell::RefCell::new(None);
    let est = quadrature::integrate_log(
        |s| match f(s) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        t1,
        t2,
        DEFAULT_REL_TOL,
        abs_tol,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    est
}

const MAX_WINDOW_STARTS: usize = 256;
const WINDOW_FRACTIONS: [f64; 3] = [0.25, 0.5, 1.0];

/// Sampled windows `(t1, t2)` with `t1` on the grid and `t2 − t1 ∈ (0, p]`,
/// `t2 ≤ T_max`.
pub fn windows(disc: &Discretization) -> Vec<(f64, f64)> {
    let nodes = disc.nodes();
    let stride = nodes.len().div_ceil(MAX_WINDOW_STARTS).max(1);
    let p = disc.problem.p;
    let t_max = disc.t_max();
    let mut out = Vec::new();
    for &t1 in nodes.iter().step_by(stride) {
        for f in WINDOW_FRACTIONS {
            let t2 = t1 + f * p;
            if t2 <= t_max {
                out.push((t1, t2));
            }
        }
    }
    out
}

/// `F(t, u_b(t))/u_b(t)` between nodes, with `u_b` interpolated.
pub fn forcing_ratio_interp(disc: &Discretization, prof: &ForcingProfile, t: f64) -> Result<f64> {
    let p = &disc.problem;
    let u = if p.m.is_linear() {
        p.u0.min(p.varsigma * t)
    } else {
        prof.u.interp(t)
    };
    p.forcing_ratio(t, u)
}

/// Coverage of a class-quantified check given the monotonicity declaration.
fn class_coverage(disc: &Discretization, cfg: &CheckerConfig, warnings: &mut Vec<String>) -> Result<Coverage> {
    let p = &disc.problem;
    if p.m.is_linear() {
        return Ok(Coverage::Certified);
    }
    if !cfg.monotone_m {
        return Ok(Coverage::Sampled);
    }
    // the declaration must be consistent with F/u along α, midpoint and β
    let lo = disc.forcing_profile(&disc.alpha)?;
    let hi = disc.forcing_profile(&disc.beta)?;
    let mid_b = disc.series(
        "b",
        disc.alpha.values.iter().zip(&disc.beta.values).map(|(a, b)| 0.5 * (a + b)).collect(),
    )?;
    let mid = disc.forcing_profile(&mid_b)?;
    let n = disc.grid.len();
    let mut up = true;
    let mut down = true;
    for i in 0..n {
        let (a, m, b) = (lo.ratio[i], mid.ratio[i], hi.ratio[i]);
        let tol = ROUNDOFF_REL * (a.abs() + b.abs());
        up &= a <= m + tol && m <= b + tol;
        down &= a + tol >= m && m + tol >= b;
    }
    if up || down {
        Ok(Coverage::Certified)
    } else {
        warnings.push("monotonicity declaration contradicted on the grid; coverage downgraded to sampled".into());
        Ok(Coverage::Sampled)
    }
}

/// `range-q` and `L2-decay`; also returns `(λ, t_λ)`.
pub fn check_regularity(disc: &Discretization) -> Result<(CheckItem, CheckItem, f64, f64)> {
    let p = &disc.problem;
    let nodes = disc.nodes();
    let mut range = Tally::new();
    for &t in nodes {
        let (qm, qp) = (p.q_minus.eval(t), p.q_plus.eval(t));
        range.record(qm.min(qp - qm).min(1.0 - qp), 0.0, 1e-15, Location::at(t));
    }
    let range = range
        .finish(ConditionId::RangeQ, Coverage::Direct)
        .with_value("grid_ratio", disc.grid.ratio());

    let beta_sq: Vec<f64> = disc.beta.values.iter().map(|b| b * b).collect();
    let tail = p.beta_sq_tail(disc.t_max()).map_err(|e| e.in_op("hypothesis_checker", "check_regularity"))?;
    let (sums, errs) = disc.tail_sums(&beta_sq, &tail);
    let l2 = sums[0];
    let decade = disc.grid.index_at_or_after(disc.t_max() / 10.0);
    let last = nodes.len() - 1;
    let t_max = disc.t_max();
    let mut decay = Tally::new();
    // β must keep decreasing across the last decade
    let drop = (disc.beta.values[decade] - disc.beta.values[last]) * t_max;
    decay.record(
        if l2.is_finite() { drop } else { f64::NEG_INFINITY },
        0.0,
        1e-12 * disc.beta.values[decade] * t_max,
        Location::at(nodes[decade]),
    );
    let lambda = (decade..=last).map(|i| p.q_plus.eval(nodes[i])).fold(0.0, f64::max);
    let t_lambda = nodes[decade];
    let mut item = decay
        .finish(ConditionId::L2Decay, Coverage::Direct)
        .with_value("beta_l2_norm_sq", l2)
        .with_value("beta_l2_error", errs[0])
        .with_value("lambda", lambda)
        .with_value("t_lambda", t_lambda);
    if lambda >= 1.0 {
        item = item.with_warning("λ = 1: the decay law u = O(t^λ) = o(t) is not certified");
    }
    Ok((range, item, lambda, t_lambda))
}

pub const MODULUS_EPSILONS: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
const MODULUS_BISECTIONS: u32 = 40;
const MODULUS_STARTS: usize = 64;

/// Largest `ζ ≤ p` with `sup_{t1} γ(t1, t1 + ζ) < ε` for each tabulated `ε`.
pub fn check_gamma_modulus(disc: &Discretization) -> Result<CheckItem> {
    let gamma = GammaDensity::new(disc)?;
    let p = disc.problem.p;
    let nodes = disc.nodes();
    let stride = nodes.len().div_ceil(MODULUS_STARTS).max(1);
    let starts: Vec<f64> = nodes.iter().step_by(stride).cloned().collect();
    let sup_gamma = |zeta: f64| -> Result<f64> {
        let vals = par::map_slice(&starts, |&t1| gamma.integral(t1, t1 + zeta).map(|e| e.value))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    };
    let mut tally = Tally::new();
    let mut zetas = BTreeMap::new();
    let resolution = p * 0.5f64.powi(MODULUS_BISECTIONS as i32);
    // negative density makes γ non-monotone
    let mut min_density = f64::INFINITY;
    if !gamma.is_zero() {
        for &t in nodes.iter().step_by(stride) {
            min_density = min_density.min(gamma.eval(t)?);
        }
    } else {
        min_density = 0.0;
    }
    for eps in MODULUS_EPSILONS {
        let zeta = if gamma.is_zero() || sup_gamma(p)? < eps {
            p
        } else {
            let (mut lo, mut hi) = (0.0, p);
            for _ in 0..MODULUS_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if sup_gamma(mid)? < eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        zetas.insert(format!("zeta_eps_{eps:e}"), zeta);
        let at_res = if gamma.is_zero() { 0.0 } else { sup_gamma(resolution)? };
        tally.record((eps - at_res) / eps, 0.0, 0.0, Location::default());
    }
    if min_density < 0.0 {
        tally.record(min_density, 0.0, 0.0, Location::default().sample("density"));
    }
    let mut item = tally.finish(ConditionId::GammaModulus, Coverage::Direct);
    item.values = zetas;
    Ok(item
        .with_value("resolution", resolution)
        .with_value("min_density", min_density))
}

/// Hale–Onuchic sandwich `B₋ ≤ ∫_t^∞ F(s,u_b)/u_b ds ≤ B₊`, margins scaled by `t`.
pub fn check_hale_onuchic(disc: &Discretization, family: &[BandSample], cfg: &CheckerConfig) -> Result<CheckItem> {
    let mut warnings = Vec::new();
    let coverage = class_coverage(disc, cfg, &mut warnings)?;
    let nodes = disc.nodes();
    let lim = &disc.limits;
    let mut tally = Tally::new();
    for s in family {
        let prof = disc.forcing_profile(&s.b).map_err(|e| e.in_op("hypothesis_checker", "check_hale_onuchic"))?;
        let (ints, errs) = disc.tail_sums(&prof.ratio, &prof.tail);
        for (i, &t) in nodes.iter().enumerate() {
            let err = (errs[i] + lim.error[i]) * t;
            let floor = ROUNDOFF_REL * (ints[i].abs() + lim.upper[i].abs() + lim.lower[i].abs()) * t;
            tally.record((ints[i] - lim.lower[i]) * t, err, floor, Location::at(t).sample(&s.label));
            tally.record((lim.upper[i] - ints[i]) * t, err, floor, Location::at(t).sample(&s.label));
        }
    }
    let mut item = tally.finish(ConditionId::HaleOnuchic, coverage);
    item.warnings = warnings;
    Ok(item)
}

/// Windowed integral bound `∫_{t1}^{t2} F/u ≤ γ(t1, t2)` (absolute margins).
///
/// With `id = Thm2Window` the same windows are mapped to radii and the radial
/// kernel `M` is integrated in `τ` instead.
pub fn window_check(disc: &Discretization, family: &[BandSample], id: ConditionId) -> Result<CheckItem> {
    let gamma = GammaDensity::new(disc)?;
    let p = &disc.problem;
    let k = (p.n - 2) as f64;
    let wins = windows(disc);
    let mut tally = Tally::new();
    for s in family {
        let prof = disc.forcing_profile(&s.b)?;
        let results = par::map_slice(&wins, |&(t1, t2)| -> Result<(f64, f64, f64)> {
            match id {
                ConditionId::Thm2Window => {
                    let (r1, r2) = (p.theta(t1), p.theta(t2));
                    let diff = |tau: f64| -> Result<f64> {
                        let t = p.time_of_radius(tau);
                        let jac = k * k * tau.powi(p.n as i32 - 3);
                        let u = if p.m.is_linear() { p.u0.min(p.varsigma * t) } else { prof.u.interp(t) };
                        Ok(gamma.eval(t)? * jac - p.kernel_m(tau, u)?)
                    };
                    let scale = (r2 - r1)
                        * (diff_scale(&gamma, p, &prof, r1, k)? + diff_scale(&gamma, p, &prof, r2, k)?);
                    let est = integrate_fallible(diff, r1, r2, ROUNDOFF_REL * scale)?;
                    Ok((est.value, est.error, scale))
                }
                _ => {
                    let diff = |t: f64| -> Result<f64> { Ok(gamma.eval(t)? - forcing_ratio_interp(disc, &prof, t)?) };
                    let scale = (t2 - t1)
                        * (gamma.eval(t1)?.abs()
                            + gamma.eval(t2)?.abs()
                            + forcing_ratio_interp(disc, &prof, t1)?.abs()
                            + forcing_ratio_interp(disc, &prof, t2)?.abs());
                    let est = integrate_fallible(diff, t1, t2, ROUNDOFF_REL * scale)?;
                    Ok((est.value, est.error, scale))
                }
            }
        });
        for (&(t1, t2), r) in wins.iter().zip(results) {
            let (m, e, scale) = r?;
            tally.record(m, e, ROUNDOFF_REL * scale, Location::window(t1, t2).sample(&s.label));
        }
    }
    let coverage = if p.m.is_linear() {
        Coverage::Certified
    } else {
        Coverage::Sampled
    };
    Ok(tally.finish(id, coverage).with_value("windows", wins.len() as f64))
}

fn diff_scale(
    gamma: &GammaDensity<'_>,
    p: &crate::problem::ProblemSpec,
    prof: &ForcingProfile,
    tau: f64,
    k: f64,
) -> Result<f64> {
    let t = p.time_of_radius(tau);
    let jac = k * k * tau.powi(p.n as i32 - 3);
    let u = if p.m.is_linear() { p.u0.min(p.varsigma * t) } else { prof.u.interp(t) };
    Ok((gamma.eval(t)? * jac).abs() + p.kernel_m(tau, u)?.abs())
}

/// `g ≥ 0` on the radii and `H/u ≥ (1 − q₊)·h/t` along sampled members of
/// `C`; margins relative to the compared magnitudes. Returns the combined
/// item and, for linear `m`, the coupling item `0 ≤ g ≤ a/(n−2)`.
pub fn check_sign_comp_ha(disc: &Discretization, family: &[BandSample]) -> Result<(CheckItem, Option<CheckItem>)> {
    let p = &disc.problem;
    let nodes = disc.nodes();
    let mut sign = Tally::new();
    let mut g_min = f64::INFINITY;
    for &t in nodes {
        let r = p.theta(t);
        let g = p.g.eval(r);
        g_min = g_min.min(g);
        if g < 0.0 {
            sign.record(g, 0.0, 0.0, Location::at(r).sample("g"));
        }
    }
    let mut envelope = Tally::new();
    let mut class = Tally::new();
    for s in family {
        let u = quadrature::cumulative_exp_integral(&s.b, p.u0)?;
        let margins = par::map_indices(nodes.len(), |i| -> Result<(f64, f64)> {
            let t = nodes[i];
            let (h_big, h_small) = p.coefficients_hh(t, u.values[i])?;
            let lhs = h_big / u.values[i];
            let rhs = (1.0 - p.q_plus.eval(t)) * h_small / t;
            let scale = lhs.abs() + rhs.abs();
            Ok((if scale > 0.0 { (lhs - rhs) / scale } else { 0.0 }, t))
        });
        let is_envelope = s.label == "alpha" || s.label == "beta";
        for r in margins {
            let (m, t) = r?;
            class.record(m, 0.0, ROUNDOFF_REL, Location::at(t).sample(&s.label));
            if is_envelope {
                envelope.record(m, 0.0, ROUNDOFF_REL, Location::at(t).sample(&s.label));
            }
        }
    }
    let envelope_margin = envelope.worst_margin();
    let class_margin = class.worst_margin();
    sign.merge(class);
    let coverage = if p.m.is_linear() {
        Coverage::Certified
    } else {
        Coverage::Sampled
    };
    let item = sign
        .finish(ConditionId::SignCompHa, coverage)
        .with_value("envelope_margin", envelope_margin)
        .with_value("class_margin", class_margin)
        .with_value("g_min", g_min);

    let coupling = match p.m.linear_coefficient() {
        None => None,
        Some(a) => {
            let k = (p.n - 2) as f64;
            let mut tally = Tally::new();
            for &t in nodes {
                let r = p.theta(t);
                let (g, cap) = (p.g.eval(r), a.eval(r) / k);
                let scale = g.abs().max(cap.abs());
                let m = if scale > 0.0 { g.min(cap - g) / scale } else { 0.0 };
                tally.record(m, 0.0, ROUNDOFF_REL, Location::at(r));
            }
            Some(tally.finish(ConditionId::Coupling, Coverage::Direct))
        }
    };
    Ok((item, coupling))
}

/// The radial tail condition `∫_r^∞ M(τ, u(t(τ))) dτ ≤ B₊(t(r))` on the
/// radii `θ(t_i)`, integrated in `τ` on its own geometric grid.
pub fn check_thm2_tail(disc: &Discretization, family: &[BandSample]) -> Result<CheckItem> {
    let p = &disc.problem;
    let nodes = disc.nodes();
    let radii = Arc::new(Grid::geometric(p.r_inner, p.theta(disc.t_max()), nodes.len())?);
    let mut tally = Tally::new();
    for s in family {
        let prof = disc.forcing_profile(&s.b)?;
        let kernel = par::map_indices(nodes.len(), |i| p.kernel_m(radii.nodes()[i], prof.u.values[i]))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let ext = disc.extension(&s.b, *prof.u.values.last().unwrap());
        let tail = ext.forcing_tail(true)?;
        let (mut sums, mut errs) = radii.cumulative_to_end(&kernel);
        for (v, e) in sums.iter_mut().zip(errs.iter_mut()) {
            *v += tail.value;
            *e += tail.total_error();
        }
        for (i, &t) in nodes.iter().enumerate() {
            let upper = disc.limits.upper[i];
            let err = (errs[i] + disc.limits.error[i]) * t;
            let floor = ROUNDOFF_REL * (sums[i].abs() + upper.abs()) * t;
            tally.record((upper - sums[i]) * t, err, floor, Location::at(radii.nodes()[i]).sample(&s.label));
        }
    }
    let coverage = if p.m.is_linear() {
        Coverage::Certified
    } else {
        Coverage::Sampled
    };
    Ok(tally.finish(ConditionId::Thm2Tail, coverage))
}

/// Linear (`F = A(t)·u`) or Emden–Fowler (`F = A(t)·u^σ`) specialisations
/// of the sandwich, checked without sampling `B`.
pub fn check_special_forms(disc: &Discretization, form: DeclaredForm) -> Result<Option<CheckItem>> {
    let p = &disc.problem;
    let nodes = disc.nodes();
    let t_max = disc.t_max();
    let lim = &disc.limits;
    match form {
        DeclaredForm::None => Ok(None),
        DeclaredForm::Linear => {
            let a = par::map_slice(nodes, |&t| p.linear_rate(t))
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            let bound = p.forcing_ratio_bound(t_max);
            let tail = if p.m.is_zero() && p.g.is_zero() {
                quadrature::TailEstimate::closed(0.0)
            } else {
                quadrature::integrate_tail(
                    |s| p.linear_rate(s).unwrap_or(f64::NAN),
                    t_max,
                    t_max * crate::problem::TAIL_CUTOFF_MULT,
                    bound,
                    DEFAULT_REL_TOL,
                )?
            };
            let (ints, errs) = disc.tail_sums(&a, &tail);
            let mut tally = Tally::new();
            for (i, &t) in nodes.iter().enumerate() {
                let err = (errs[i] + lim.error[i]) * t;
                let floor = ROUNDOFF_REL * (ints[i].abs() + lim.upper[i].abs()) * t;
                tally.record((ints[i] - lim.lower[i]) * t, err, floor, Location::at(t));
                tally.record((lim.upper[i] - ints[i]) * t, err, floor, Location::at(t));
            }
            Ok(Some(tally.finish(ConditionId::LinearCase, Coverage::Certified)))
        }
        DeclaredForm::EmdenFowler => {
            let (_, sigma) = p.emden_fowler_parts()?;
            let scale = p.u0.powf(sigma - 1.0);
            let (cum_alpha, _) = disc.grid.cumulative_from_start(&disc.alpha.values);
            let (cum_beta, _) = disc.grid.cumulative_from_start(&disc.beta.values);
            let a = par::map_slice(nodes, |&t| p.emden_fowler_rate(t).map(|r| r.0))
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            let n = nodes.len();
            let integrand = |cum: &[f64]| -> Vec<f64> {
                (0..n).map(|i| scale * a[i] * (-(1.0 - sigma) * cum[i]).exp()).collect()
            };
            let bound = p.emden_fowler_rate_bound(t_max).map(|b| b.scale(scale));
            let tail_for = |map: &crate::scalar_map::ScalarMap, cum_end: f64| {
                quadrature::integrate_tail(
                    |s| {
                        let ia = map.integral(t_max, s, DEFAULT_REL_TOL).map(|e| e.value).unwrap_or(f64::NAN);
                        let (ar, _) = p.emden_fowler_rate(s).unwrap_or((f64::NAN, 0.0));
                        scale * ar * (-(1.0 - sigma) * (cum_end + ia)).exp()
                    },
                    t_max,
                    t_max * crate::problem::TAIL_CUTOFF_MULT,
                    bound,
                    DEFAULT_REL_TOL,
                )
            };
            let lower_tail = tail_for(p.beta_map(), cum_beta[n - 1])?;
            let upper_tail = tail_for(p.alpha_map(), cum_alpha[n - 1])?;
            let (low_int, low_err) = disc.tail_sums(&integrand(&cum_beta), &lower_tail);
            let (up_int, up_err) = disc.tail_sums(&integrand(&cum_alpha), &upper_tail);
            let mut tally = Tally::new();
            for (i, &t) in nodes.iter().enumerate() {
                let fl = ROUNDOFF_REL * (low_int[i].abs() + lim.lower[i].abs()) * t;
                tally.record(
                    (low_int[i] - lim.lower[i]) * t,
                    (low_err[i] + lim.error[i]) * t,
                    fl,
                    Location::at(t).sample("lower"),
                );
                let fu = ROUNDOFF_REL * (up_int[i].abs() + lim.upper[i].abs()) * t;
                tally.record(
                    (lim.upper[i] - up_int[i]) * t,
                    (up_err[i] + lim.error[i]) * t,
                    fu,
                    Location::at(t).sample("upper"),
                );
            }
            Ok(Some(
                tally
                    .finish(ConditionId::EmdenFowler, Coverage::Certified)
                    .with_value("sigma", sigma),
            ))
        }
    }
}

/// Runs every hypothesis check and assembles the report.
pub fn run_checks(disc: &Discretization, cfg: &CheckerConfig) -> Result<HypothesisReport> {
    let family = disc.sample_family(cfg.samples, cfg.seed)?;
    let (range, l2, lambda, t_lambda) = check_regularity(disc)?;
    let mut items = vec![range, l2];
    items.push(check_gamma_modulus(disc).map_err(|e| e.in_op("hypothesis_checker", "check_gamma_modulus"))?);
    items.push(check_hale_onuchic(disc, &family, cfg)?);
    items.push(
        window_check(disc, &family, ConditionId::Equicont)
            .map_err(|e| e.in_op("hypothesis_checker", "check_equicontinuity_bound"))?,
    );
    let (sign, coupling) = check_sign_comp_ha(disc, &family)?;
    items.push(sign);
    if let Some(c) = coupling {
        items.push(c);
    }
    items.push(check_thm2_tail(disc, &family).map_err(|e| e.in_op("hypothesis_checker", "check_theorem2"))?);
    items.push(
        window_check(disc, &family, ConditionId::Thm2Window)
            .map_err(|e| e.in_op("hypothesis_checker", "check_theorem2"))?,
    );
    if let Some(s) =
        check_special_forms(disc, cfg.form).map_err(|e| e.in_op("hypothesis_checker", "check_special_forms"))?
    {
        items.push(s);
    }
    let overall = items.iter().fold(Verdict::Pass, |v, i| v.and(i.verdict));
    Ok(HypothesisReport {
        overall,
        lambda,
        t_lambda,
        sampling: SamplingInfo {
            samples: cfg.samples,
            seed: cfg.seed,
            members: family.iter().map(|s| s.label.clone()).collect(),
            grid_nodes: disc.grid.len(),
            t_max: disc.t_max(),
            grid_ratio: disc.grid.ratio(),
            windows: windows(disc).len(),
        },
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Nonlinearity, ProblemSpec};
    use crate::scalar_map::ScalarMap;
    use approx::assert_relative_eq;

    fn problem(n: u32, c: f64, g: ScalarMap, q_plus: f64, gamma: GammaSpec) -> ProblemSpec {
        ProblemSpec::new(
            n,
            1.0,
            1.0,
            1.0,
            1.0,
            Nonlinearity::linear(ScalarMap::power(c, -2.0)),
            g,
            ScalarMap::Zero,
            ScalarMap::constant(q_plus),
            gamma,
        )
        .unwrap()
    }

    fn disc(p: ProblemSpec) -> Discretization {
        Discretization::new(p, 512, 1e4).unwrap()
    }

    #[test]
    fn decide_rules() {
        assert_eq!(decide(1.0, 0.1, 0.0), Verdict::Pass);
        assert_eq!(decide(0.0, 0.0, 0.0), Verdict::Pass);
        assert_eq!(decide(-1e-20, 0.0, 1e-18), Verdict::Pass);
        assert_eq!(decide(0.05, 0.1, 0.0), Verdict::Inconclusive);
        assert_eq!(decide(-0.05, 0.1, 0.0), Verdict::Inconclusive);
        assert_eq!(decide(-1.0, 0.1, 0.0), Verdict::Fail);
        assert_eq!(decide(f64::NAN, 0.0, 0.0), Verdict::Fail);
    }

    #[test]
    fn regularity_examples() {
        let d = disc(problem(3, 0.125, ScalarMap::Zero, 0.5, GammaSpec::DerivedLinear));
        let (range, l2, lambda, _) = check_regularity(&d).unwrap();
        assert!(range.passed() && l2.passed());
        assert_eq!(lambda, 0.5);
        assert!((l2.values["beta_l2_norm_sq"] - 0.25).abs() <= l2.values["beta_l2_error"]);
        let d = disc(problem(3, 0.125, ScalarMap::Zero, 1.0, GammaSpec::DerivedLinear));
        let (_, l2, lambda, _) = check_regularity(&d).unwrap();
        assert_eq!(lambda, 1.0);
        assert!(l2.passed());
        assert!(!l2.warnings.is_empty());
    }

    #[test]
    fn inverse_log_q_is_o1() {
        let p = ProblemSpec::new(
            3,
            3.0,
            1.0,
            1.0,
            1.0,
            Nonlinearity::zero(),
            ScalarMap::Zero,
            ScalarMap::Zero,
            ScalarMap::log_power(1.0, 0.0, -1.0),
            GammaSpec::Zero,
        )
        .unwrap();
        let d = disc(p);
        let (range, l2, lambda, t_lambda) = check_regularity(&d).unwrap();
        assert!(range.passed() && l2.passed());
        assert_relative_eq!(lambda, 1.0 / t_lambda.ln(), max_relative = 1e-12);
        assert!(lambda < 0.15);
    }

    #[test]
    fn gamma_modulus_examples() {
        let d = disc(problem(
            3,
            0.125,
            ScalarMap::Zero,
            0.5,
            GammaSpec::Linear { k: 0.5 },
        ));
        let item = check_gamma_modulus(&d).unwrap();
        assert!(item.passed());
        for eps in MODULUS_EPSILONS {
            let z = item.values[&format!("zeta_eps_{eps:e}")];
            assert!((z - (eps / 0.5).min(1.0)).abs() <= 2.0 * item.values["resolution"]);
        }
        let d = disc(problem(3, 0.125, ScalarMap::Zero, 0.5, GammaSpec::Zero));
        let item = check_gamma_modulus(&d).unwrap();
        assert!(item.passed());
        assert!(item.values.iter().filter(|(k, _)| k.starts_with("zeta")).all(|(_, &z)| z == 1.0));
        // γ(t1,t2) = (1/8)(1/t1 − 1/t2) ≤ (t2 − t1)/8
        let d = disc(problem(
            3,
            0.125,
            ScalarMap::Zero,
            0.5,
            GammaSpec::Density {
                density: ScalarMap::power(0.125, -2.0),
            },
        ));
        let item = check_gamma_modulus(&d).unwrap();
        assert!(item.passed());
        for eps in MODULUS_EPSILONS {
            assert!(item.values[&format!("zeta_eps_{eps:e}")] >= (8.0 * eps).min(1.0) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn hale_onuchic_discriminates() {
        let cfg = CheckerConfig::default();
        let d = disc(problem(3, 0.125, ScalarMap::Zero, 0.5, GammaSpec::DerivedLinear));
        let fam = d.sample_family(2, 3).unwrap();
        let ok = check_hale_onuchic(&d, &fam, &cfg).unwrap();
        assert!(ok.passed());
        assert_eq!(ok.coverage, Coverage::Certified);
        assert_relative_eq!(ok.margin, 0.125, max_relative = 1e-6);
        let d = disc(problem(3, 1.0, ScalarMap::Zero, 0.5, GammaSpec::DerivedLinear));
        let bad = check_hale_onuchic(&d, &fam, &cfg).unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);
        assert_relative_eq!(bad.margin, -0.75, max_relative = 1e-6);
    }

    #[test]
    fn coupling_depends_on_dimension() {
        let a = ScalarMap::power(1.0, -4.0);
        for (n, expect) in [(3, Verdict::Pass), (4, Verdict::Fail)] {
            let p = ProblemSpec::new(
                n,
                1.0,
                0.5,
                1.0,
                1.0,
                Nonlinearity::linear(a.clone()),
                a.clone(),
                ScalarMap::Zero,
                ScalarMap::constant(0.5),
                GammaSpec::DerivedLinear,
            )
            .unwrap();
            let d = disc(p);
            let fam = d.sample_family(0, 1).unwrap();
            let (_, coupling) = check_sign_comp_ha(&d, &fam).unwrap();
            let coupling = coupling.unwrap();
            assert_eq!(coupling.verdict, expect, "n = {n}");
            if n == 3 {
                assert_eq!(coupling.margin, 0.0);
            }
        }
    }

    #[test]
    fn windows_agree_for_linear_m() {
        let d = disc(problem(3, 0.125, ScalarMap::Zero, 0.5, GammaSpec::DerivedLinear));
        let fam = d.sample_family(1, 5).unwrap();
        let e = window_check(&d, &fam, ConditionId::Equicont).unwrap();
        let w = window_check(&d, &fam, ConditionId::Thm2Window).unwrap();
        assert!(e.passed() && w.passed());
        assert_eq!((e.margin, w.margin), (0.0, 0.0));
        // a modulus that is too small fails both ways
        let d = disc(problem(
            4,
            0.125,
            ScalarMap::Zero,
            0.5,
            GammaSpec::Linear { k: 1e-9 },
        ));
        let fam = d.sample_family(1, 5).unwrap();
        let e = window_check(&d, &fam, ConditionId::Equicont).unwrap();
        let w = window_check(&d, &fam, ConditionId::Thm2Window).unwrap();
        assert_eq!(e.verdict, Verdict::Fail);
        assert_eq!(w.verdict, Verdict::Fail);
    }

    #[test]
    fn special_forms() {
        let d = disc(problem(3, 0.125, ScalarMap::Zero, 0.5, GammaSpec::DerivedLinear));
        let lin = check_special_forms(&d, DeclaredForm::Linear).unwrap().unwrap();
        let fam = d.sample_family(0, 1).unwrap();
        let ho = check_hale_onuchic(&d, &fam, &CheckerConfig::default()).unwrap();
        assert_eq!(lin.verdict, ho.verdict);
        assert!((lin.margin - ho.margin).abs() <= 1e-9);
        assert!(check_special_forms(&d, DeclaredForm::EmdenFowler).is_err());
    }
}
