//! Problem data, the change of variables `r = θ(t)`, and every closed-form
//! coefficient built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{TailEstimate, DEFAULT_REL_TOL};
use crate::scalar_map::{PowerBound, ScalarMap};

/// Relative slack within which `U = u/t` above `ς` is clamped rather than
/// rejected.
pub const CAP_CLAMP_REL: f64 = 1e-12;

/// Far cutoff used for quadrature of tails without a closed form.
pub const TAIL_CUTOFF_MULT: f64 = 1e12;

/// `r = θ(t) = (t/(n−2))^{1/(n−2)}` and `θ'(t) = θ/((n−2)t)`.
pub fn change_of_variables(t: f64, n: u32) -> Result<(f64, f64)> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::invalid(format!("t must be positive and finite, got {t}")));
    }
    if n < 3 {
        return Err(Error::invalid(format!("dimension n must satisfy n ≥ 3, got {n}")));
    }
    let k = (n - 2) as f64;
    let r = (t / k).powf(1.0 / k);
    Ok((r, r / (k * t)))
}

/// Inverse map `t = (n−2)·r^{n−2}`.
pub fn time_of_radius(r: f64, n: u32) -> f64 {
    let k = (n - 2) as f64;
    k * r.powi((n - 2) as i32)
}

/// One term `a(r)·U^σ` of the radial majorant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MTerm {
    pub a: ScalarMap,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

/// Radial majorant `m(r, U) = Σ a_k(r)·U^{σ_k}` of the nonlinearity `f`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nonlinearity {
    pub terms: Vec<MTerm>,
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity { terms: Vec::new() }
    }

    pub fn linear(a: ScalarMap) -> Self {
        Nonlinearity {
            terms: vec![MTerm { a, sigma: 1.0 }],
        }
    }

    pub fn emden_fowler(a: ScalarMap, sigma: f64) -> Self {
        Nonlinearity {
            terms: vec![MTerm { a, sigma }],
        }
    }

    pub fn eval(&self, r: f64, u: f64) -> f64 {
        self.terms.iter().map(|t| t.a.eval(r) * u.powf(t.sigma)).sum()
    }

    /// `m(r, U)/U`; finite for `U > 0`.
    pub fn eval_over_u(&self, r: f64, u: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                if t.sigma == 1.0 {
                    t.a.eval(r)
                } else {
                    t.a.eval(r) * u.powf(t.sigma - 1.0)
                }
            })
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.a.is_zero())
    }

    pub fn is_linear(&self) -> bool {
        self.terms.iter().all(|t| t.sigma == 1.0 || t.a.is_zero())
    }

    /// `a(r)` when `m(r, U) = a(r)·U`.
    pub fn linear_coefficient(&self) -> Option<ScalarMap> {
        if !self.is_linear() {
            return None;
        }
        Some(self.terms.iter().fold(ScalarMap::Zero, |acc, t| acc.plus(&t.a)))
    }

    /// `(a, σ)` when `m(r, U) = a(r)·U^σ` with a single `σ ∈ (0, 1)`.
    pub fn emden_fowler_form(&self) -> Option<(ScalarMap, f64)> {
        let live: Vec<&MTerm> = self.terms.iter().filter(|t| !t.a.is_zero()).collect();
        let sigma = live.first()?.sigma;
        if !(sigma > 0.0 && sigma < 1.0) || live.iter().any(|t| t.sigma != sigma) {
            return None;
        }
        Some((live.iter().fold(ScalarMap::Zero, |acc, t| acc.plus(&t.a)), sigma))
    }
}

/// How the equicontinuity modulus `γ(t1, t2)` is supplied.
///
/// Every form is an integral of a nonnegative density over `[t1, t2]`,
/// which makes `γ(t, t) = 0` and monotonicity in `t2` structural.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GammaSpec {
    Zero,
    /// `γ(t1, t2) = ∫_{t1}^{t2} density`.
    Density { density: ScalarMap },
    /// `γ(t1, t2) = k·(t2 − t1)`.
    Linear { k: f64 },
    /// `γ = ∫ A` where `F(t, u) = A(t)·u`.
    DerivedLinear,
    /// `γ = u0^{σ−1}·∫ A(s)·exp(−(1−σ)∫_{t0}^s α)` where `F = A(t)·u^σ`.
    DerivedEmdenFowler,
}

/// Full problem data. Construct with [`ProblemSpec::new`] so `t0` and the
/// admissibility conditions are enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: u32,
    pub r_inner: f64,
    pub u0: f64,
    pub varsigma: f64,
    pub p: f64,
    pub m: Nonlinearity,
    pub g: ScalarMap,
    pub q_minus: ScalarMap,
    pub q_plus: ScalarMap,
    pub gamma: GammaSpec,
    t0: f64,
    alpha: ScalarMap,
    beta: ScalarMap,
    alpha_sq: ScalarMap,
    beta_sq: ScalarMap,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: u32,
        r_inner: f64,
        u0: f64,
        varsigma: f64,
        p: f64,
        m: Nonlinearity,
        g: ScalarMap,
        q_minus: ScalarMap,
        q_plus: ScalarMap,
        gamma: GammaSpec,
    ) -> Result<Self> {
        let violation = |condition: &str, detail: String| Error::HypothesisViolation {
            condition: condition.to_string(),
            detail,
        };
        if n < 3 {
            return Err(violation("n ≥ 3", format!("dimension n = {n}")));
        }
        if !(r_inner > 0.0 && r_inner.is_finite()) {
            return Err(violation("R > 0", format!("exterior radius R = {r_inner}")));
        }
        if !(u0 > 0.0 && u0.is_finite()) {
            return Err(violation("u0 > 0", format!("u0 = {u0}")));
        }
        if !(varsigma > 0.0) {
            return Err(violation("ς > 0", format!("ς = {varsigma}")));
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(violation("p > 0", format!("p = {p}")));
        }
        let t0 = time_of_radius(r_inner, n);
        if u0 / t0 > varsigma {
            return Err(violation(
                "u0/t0 ≤ ς",
                format!("u0/t0 = {} exceeds ς = {varsigma} (t0 = {t0})", u0 / t0),
            ));
        }
        for (name, f) in [("g", &g), ("q_minus", &q_minus), ("q_plus", &q_plus)] {
            f.validate(name)?;
        }
        for (i, term) in m.terms.iter().enumerate() {
            term.a.validate(&format!("m[{i}].a"))?;
            if !(term.sigma > 0.0 && term.sigma.is_finite()) {
                return Err(Error::Config {
                    path: format!("m[{i}].sigma"),
                    detail: format!("exponent σ = {} must be positive", term.sigma),
                });
            }
        }
        if let GammaSpec::Density { density } = &gamma {
            density.validate("gamma.density")?;
        }
        for (name, f) in [("q_minus", &q_minus), ("q_plus", &q_plus)] {
            let v = f.eval(t0);
            if !v.is_finite() || f.domain_start() > t0 {
                return Err(Error::Config {
                    path: name.to_string(),
                    detail: format!("not defined at t0 = {t0} (value {v})"),
                });
            }
        }
        let alpha = q_minus.times_power(-1.0);
        let beta = q_plus.times_power(-1.0);
        let alpha_sq = alpha.times(&alpha);
        let beta_sq = beta.times(&beta);
        Ok(ProblemSpec {
            n,
            r_inner,
            u0,
            varsigma,
            p,
            m,
            g,
            q_minus,
            q_plus,
            gamma,
            t0,
            alpha,
            beta,
            alpha_sq,
            beta_sq,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    fn k(&self) -> f64 {
        (self.n - 2) as f64
    }

    pub fn theta(&self, t: f64) -> f64 {
        (t / self.k()).powf(1.0 / self.k())
    }

    pub fn time_of_radius(&self, r: f64) -> f64 {
        time_of_radius(r, self.n)
    }

    /// `θ(t)·θ'(t) = θ²/((n−2)t)`.
    fn theta_theta_prime(&self, t: f64) -> f64 {
        let th = self.theta(t);
        th * th / (self.k() * t)
    }

    pub fn alpha_map(&self) -> &ScalarMap {
        &self.alpha
    }

    pub fn beta_map(&self) -> &ScalarMap {
        &self.beta
    }

    /// `(α(t), β(t)) = (q₋(t)/t, q₊(t)/t)`; q values outside `[0, 1]` are
    /// reported as a hypothesis violation.
    pub fn envelopes(&self, t: f64) -> Result<(f64, f64)> {
        let (qm, qp) = (self.q_minus.eval(t), self.q_plus.eval(t));
        if !(0.0 <= qm && qm <= qp && qp <= 1.0) {
            return Err(Error::HypothesisViolation {
                condition: "0 ≤ q₋ ≤ q₊ ≤ 1".into(),
                detail: format!("q₋ = {qm}, q₊ = {qp} at t = {t}"),
            });
        }
        Ok((qm / t, qp / t))
    }

    /// Envelopes without the range check.
    pub fn envelopes_unchecked(&self, t: f64) -> (f64, f64) {
        (self.alpha.eval(t), self.beta.eval(t))
    }

    pub fn alpha_sq_tail(&self, t: f64) -> Result<TailEstimate> {
        self.alpha_sq.tail(t, t * TAIL_CUTOFF_MULT, DEFAULT_REL_TOL)
    }

    pub fn beta_sq_tail(&self, t: f64) -> Result<TailEstimate> {
        self.beta_sq.tail(t, t * TAIL_CUTOFF_MULT, DEFAULT_REL_TOL)
    }

    /// `B₋(t) = α − ∫_t^∞ α²`, `B₊(t) = β − ∫_t^∞ β²`, with the combined
    /// tail error.
    pub fn envelope_b(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (a, b) = self.envelopes_unchecked(t);
        let ta = self.alpha_sq_tail(t)?;
        let tb = self.beta_sq_tail(t)?;
        Ok((a - ta.value, b - tb.value, ta.total_error().max(tb.total_error())))
    }

    /// `U = u/t`, clamped to `ς` within [`CAP_CLAMP_REL`].
    pub fn admissible_u_over_t(&self, t: f64, u: f64) -> Result<f64> {
        let v = u / t;
        if v <= self.varsigma {
            Ok(v)
        } else if v <= self.varsigma * (1.0 + CAP_CLAMP_REL) {
            Ok(self.varsigma)
        } else {
            Err(Error::DomainViolation {
                t,
                value: v,
                cap: self.varsigma,
            })
        }
    }

    /// `H(t, u)/u` and `h(t)/t`.
    fn ratios(&self, t: f64, u: f64) -> Result<(f64, f64)> {
        let big_u = self.admissible_u_over_t(t, u)?;
        let th = self.theta(t);
        let tt = self.theta_theta_prime(t);
        let h_over_u = tt / self.k() * self.m.eval_over_u(th, big_u) / t;
        let small_h_over_t = tt * self.g.eval(th) / t;
        Ok((h_over_u, small_h_over_t))
    }

    /// `H(t,u) = θθ'·m(θ, u/t)/(n−2)` and `h(t) = θθ'·g(θ)`.
    pub fn coefficients_hh(&self, t: f64, u: f64) -> Result<(f64, f64)> {
        let big_u = self.admissible_u_over_t(t, u)?;
        let th = self.theta(t);
        let tt = self.theta_theta_prime(t);
        Ok((tt / self.k() * self.m.eval(th, big_u), tt * self.g.eval(th)))
    }

    /// `H/u − (1 − q₊)·h/t`, the quantity under the absolute value of `F/u`.
    pub fn signed_forcing_ratio(&self, t: f64, u: f64) -> Result<f64> {
        let (hu, ht) = self.ratios(t, u)?;
        Ok(hu - (1.0 - self.q_plus.eval(t)) * ht)
    }

    /// `F(t,u)/u = |H/u − (1 − q₊)·h/t|`.
    pub fn forcing_ratio(&self, t: f64, u: f64) -> Result<f64> {
        Ok(self.signed_forcing_ratio(t, u)?.abs())
    }

    /// `F(t,u) = |H/u − (1 − q₊)·h/t|·u`.
    pub fn forcing_f(&self, t: f64, u: f64) -> Result<f64> {
        Ok(self.forcing_ratio(t, u)? * u)
    }

    /// Certified majorant of `|F(s,u)/u|` for `s ≥ from` over admissible
    /// `u ≥ u0`.
    pub fn forcing_ratio_bound(&self, from: f64) -> Option<PowerBound> {
        let k = self.k();
        let c_theta = k.powf(-1.0 / k);
        let p_theta = 1.0 / k;
        let theta_from = self.theta(from);
        // θθ'/(n−2)/s = c_θ²·s^{2/(n−2) − 2}/(n−2)²
        let pre_h = PowerBound::monomial(c_theta * c_theta / (k * k), 2.0 * p_theta - 2.0, from);
        let mut acc = PowerBound::zero(from);
        for term in &self.m.terms {
            if term.a.is_zero() {
                continue;
            }
            let a = term.a.power_bound(theta_from)?.compose_power(c_theta, p_theta, from);
            // U^{σ−1} ≤ (u0/s)^{σ−1} for σ < 1, ≤ ς^{σ−1} otherwise
            let u_pow = if term.sigma < 1.0 {
                PowerBound::monomial(self.u0.powf(term.sigma - 1.0), 1.0 - term.sigma, from)
            } else {
                PowerBound::monomial(self.varsigma.powf(term.sigma - 1.0), 0.0, from)
            };
            acc = acc.add(pre_h.mul(a).mul(u_pow));
        }
        if !self.g.is_zero() {
            // |h|/s = c_θ²·s^{2/(n−2) − 2}·|g(θ)|/(n−2)
            let pre = PowerBound::monomial(c_theta * c_theta / k, 2.0 * p_theta - 2.0, from);
            let g = self.g.power_bound(theta_from)?.compose_power(c_theta, p_theta, from);
            acc = acc.add(pre.mul(g));
        }
        Some(acc)
    }

    /// `M(τ, u)` of the radial tail condition.
    pub fn kernel_m(&self, tau: f64, u: f64) -> Result<f64> {
        let k = self.k();
        let tau_pow = tau.powi((self.n - 2) as i32);
        let t = k * tau_pow;
        let big_u = self.admissible_u_over_t(t, u)?;
        let m_over_u = self.m.eval(tau, big_u) / u;
        let g_term = (1.0 - self.q_plus.eval(t)) * self.g.eval(tau) / tau_pow;
        Ok(tau / k * (m_over_u - g_term))
    }

    /// `n(r)` for linear `m(r, U) = a(r)·U`.
    pub fn n_of_r(&self, r: f64) -> Result<f64> {
        let a = self
            .m
            .linear_coefficient()
            .ok_or_else(|| Error::invalid("n(r) is only defined for linear m(r, U) = a(r)·U"))?;
        let k = self.k();
        let t = self.time_of_radius(r);
        Ok(r.powi(3 - self.n as i32) / k * (a.eval(r) / k - (1.0 - self.q_plus.eval(t)) * self.g.eval(r)))
    }

    /// `A(t)` with `F(t, u) = A(t)·u`, when `m` is linear.
    pub fn linear_rate(&self, t: f64) -> Result<f64> {
        if !self.m.is_linear() {
            return Err(Error::invalid("linear form declared but m is not linear in U"));
        }
        self.forcing_ratio(t, self.u0.min(self.varsigma * t))
    }

    /// `(A(t), σ)` with `F(t, u) = A(t)·u^σ`; requires `g ≡ 0` and a single
    /// exponent `σ ∈ (0, 1)`.
    pub fn emden_fowler_rate(&self, t: f64) -> Result<(f64, f64)> {
        let (a, sigma) = self.emden_fowler_parts()?;
        let th = self.theta(t);
        Ok((self.theta_theta_prime(t) / self.k() * a.eval(th) * t.powf(-sigma), sigma))
    }

    pub(crate) fn emden_fowler_parts(&self) -> Result<(ScalarMap, f64)> {
        let (a, sigma) = self
            .m
            .emden_fowler_form()
            .ok_or_else(|| Error::invalid("Emden–Fowler form needs m(r,U) = a(r)·U^σ with σ ∈ (0, 1)"))?;
        if !self.g.is_zero() {
            return Err(Error::invalid("Emden–Fowler form needs g ≡ 0 (otherwise F is not A(t)·u^σ)"));
        }
        Ok((a, sigma))
    }

    /// Majorant of the Emden–Fowler coefficient `A(s)` for `s ≥ from`.
    pub fn emden_fowler_rate_bound(&self, from: f64) -> Option<PowerBound> {
        let (a, sigma) = self.emden_fowler_parts().ok()?;
        let k = self.k();
        let c_theta = k.powf(-1.0 / k);
        let p_theta = 1.0 / k;
        let pre = PowerBound::monomial(c_theta * c_theta / (k * k), 2.0 * p_theta - 1.0 - sigma, from);
        Some(pre.mul(a.power_bound(self.theta(from))?.compose_power(c_theta, p_theta, from)))
    }
}
