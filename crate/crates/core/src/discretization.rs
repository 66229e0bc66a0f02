//! A problem bound to a grid: envelope samples, `B±` on the nodes, the
//! tail extension of a logarithmic derivative beyond `T_max`, and the
//! seeded family of band members used by the checks.

use std::cell::RefCell;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::problem::{ProblemSpec, TAIL_CUTOFF_MULT};
use crate::quadrature::{self, build_grid, Grid, GridSeries, TailEstimate, DEFAULT_REL_TOL};
use crate::scalar_map::PowerBound;

pub const DEFAULT_NODES: usize = 4096;
pub const DEFAULT_TMAX_MULT: f64 = 1e6;

/// `B₋`, `B₊` sampled on the grid with per-node error.
#[derive(Debug, Clone)]
pub struct BandLimits {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub error: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub problem: Arc<ProblemSpec>,
    pub grid: Arc<Grid>,
    pub alpha: GridSeries,
    pub beta: GridSeries,
    pub limits: BandLimits,
}

impl Discretization {
    pub fn new(problem: ProblemSpec, nodes: usize, tmax_mult: f64) -> Result<Self> {
        let t0 = problem.t0();
        let grid = Arc::new(build_grid(t0, t0 * tmax_mult, nodes)?);
        let problem = Arc::new(problem);
        let alpha = GridSeries::from_fn(grid.clone(), "alpha", |t| problem.alpha_map().eval(t))?;
        let beta = GridSeries::from_fn(grid.clone(), "beta", |t| problem.beta_map().eval(t))?;
        let limits = band_limits(&problem, &grid, &alpha, &beta)?;
        Ok(Discretization {
            problem,
            grid,
            alpha,
            beta,
            limits,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn t_max(&self) -> f64 {
        self.grid.t_max()
    }

    pub fn series(&self, tag: &'static str, values: Vec<f64>) -> Result<GridSeries> {
        GridSeries::new(self.grid.clone(), values, tag)
    }

    /// `∫_{t_i}^∞ f` on every node: grid quadrature to `T_max` plus a tail.
    pub fn tail_sums(&self, values: &[f64], tail: &TailEstimate) -> (Vec<f64>, Vec<f64>) {
        let (mut sums, mut errs) = self.grid.cumulative_to_end(values);
        for (s, e) in sums.iter_mut().zip(errs.iter_mut()) {
            *s += tail.value;
            *e += tail.total_error();
        }
        (sums, errs)
    }

    /// Continuation of `b` beyond `T_max` that keeps its relative position in
    /// the band `[α, β]`.
    pub fn extension(&self, b: &GridSeries, u_end: f64) -> TailExtension<'_> {
        let last = self.grid.len() - 1;
        let (a, bt) = (self.alpha.values[last], self.beta.values[last]);
        let xi = if bt > a {
            ((b.values[last] - a) / (bt - a)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        TailExtension {
            problem: &self.problem,
            t_end: self.t_max(),
            xi,
            u_end,
        }
    }

    /// `u = u0·exp(∫b)`, `F(t,u)/u` on the nodes, and `∫_{T_max}^∞ F/u`
    /// along the extension.
    pub fn forcing_profile(&self, b: &GridSeries) -> Result<ForcingProfile> {
        let u = quadrature::cumulative_exp_integral(b, self.problem.u0)?;
        let ratio = par::map_indices(self.grid.len(), |i| {
            self.problem.forcing_ratio(self.grid.nodes()[i], u.values[i])
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let ext = self.extension(b, *u.values.last().unwrap());
        let tail = ext.forcing_tail(false)?;
        Ok(ForcingProfile {
            u,
            ratio,
            tail,
            xi: ext.xi,
        })
    }

    /// Band members used to probe hypotheses quantified over `B`: the two
    /// envelopes, their midpoint, and `k` seeded random members
    /// `α + ξ·(β − α)` with smooth `ξ ∈ [0, 1]`.
    pub fn sample_family(&self, k: usize, seed: u64) -> Result<Vec<BandSample>> {
        let mut out = vec![
            BandSample {
                label: "alpha".into(),
                b: self.alpha.clone(),
            },
            BandSample {
                label: "beta".into(),
                b: self.beta.clone(),
            },
            self.blend("midpoint".into(), |_| 0.5)?,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = (self.t_max() / self.grid.t0()).ln();
        for j in 0..k {
            let modes: Vec<(f64, f64, f64)> = (1..=3)
                .map(|m| {
                    let amp = rng.gen_range(0.0..(0.5 / 3.0));
                    let freq = std::f64::consts::PI * m as f64 * rng.gen_range(0.5..2.0);
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    (amp, freq, phase)
                })
                .collect();
            let center = rng.gen_range(0.3..0.7);
            let t0 = self.grid.t0();
            out.push(self.blend(format!("random-{j}"), move |t| {
                let y = (t / t0).ln() / span;
                let s: f64 = modes.iter().map(|(a, w, ph)| a * (w * y + ph).sin()).sum();
                (center + s).clamp(0.0, 1.0)
            })?);
        }
        Ok(out)
    }

    fn blend(&self, label: String, xi: impl Fn(f64) -> f64 + Sync + Send) -> Result<BandSample> {
        let values = self
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let (a, b) = (self.alpha.values[i], self.beta.values[i]);
                a + xi(t) * (b - a)
            })
            .collect();
        Ok(BandSample {
            label,
            b: self.series("b", values)?,
        })
    }
}

fn band_limits(problem: &ProblemSpec, grid: &Grid, alpha: &GridSeries, beta: &GridSeries) -> Result<BandLimits> {
    let t_max = grid.t_max();
    let a2: Vec<f64> = alpha.values.iter().map(|v| v * v).collect();
    let b2: Vec<f64> = beta.values.iter().map(|v| v * v).collect();
    let ta = problem.alpha_sq_tail(t_max)?;
    let tb = problem.beta_sq_tail(t_max)?;
    let (ia, ea) = grid.cumulative_to_end(&a2);
    let (ib, eb) = grid.cumulative_to_end(&b2);
    let n = grid.len();
    let mut lim = BandLimits {
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        error: Vec::with_capacity(n),
    };
    for i in 0..n {
        lim.lower.push(alpha.values[i] - (ia[i] + ta.value));
        lim.upper.push(beta.values[i] - (ib[i] + tb.value));
        lim.error.push((ea[i] + ta.total_error()).max(eb[i] + tb.total_error()));
    }
    Ok(lim)
}

/// `b`, `u` and `F/u` continued past `T_max`.
pub struct TailExtension<'a> {
    problem: &'a ProblemSpec,
    pub t_end: f64,
    /// Relative band position `(b − α)/(β − α)` held fixed in the tail.
    pub xi: f64,
    pub u_end: f64,
}

impl TailExtension<'_> {
    pub fn b(&self, s: f64) -> f64 {
        let a = self.problem.alpha_map().eval(s);
        a + self.xi * (self.problem.beta_map().eval(s) - a)
    }

    /// `∫_{T_max}^s b`.
    pub fn log_growth(&self, s: f64) -> Result<f64> {
        let ia = self.problem.alpha_map().integral(self.t_end, s, DEFAULT_REL_TOL)?.value;
        let ib = self.problem.beta_map().integral(self.t_end, s, DEFAULT_REL_TOL)?.value;
        Ok(ia + self.xi * (ib - ia))
    }

    pub fn u(&self, s: f64) -> Result<f64> {
        Ok(self.u_end * self.log_growth(s)?.exp())
    }

    fn integrate(&self, f: impl Fn(f64) -> Result<f64>, bound: Option<PowerBound>) -> Result<TailEstimate> {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let est = quadrature::integrate_tail(
            |s| match f(s) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            self.t_end,
            self.t_end * TAIL_CUTOFF_MULT,
            bound,
            DEFAULT_REL_TOL,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        est
    }

    /// `∫_{T_max}^∞ F(s,u)/u`; with `signed`, the quantity without the
    /// absolute value (what the radial kernel integrates).
    pub fn forcing_tail(&self, signed: bool) -> Result<TailEstimate> {
        let p = self.problem;
        let bound = p.forcing_ratio_bound(self.t_end);
        if p.m.is_zero() && p.g.is_zero() {
            return Ok(TailEstimate::closed(0.0));
        }
        let linear = p.m.is_linear();
        self.integrate(
            |s| {
                // F/u does not depend on u for linear m
                let u = if linear { p.u0.min(p.varsigma * s) } else { self.u(s)? };
                if signed {
                    p.signed_forcing_ratio(s, u)
                } else {
                    p.forcing_ratio(s, u)
                }
            },
            bound,
        )
    }

    /// `∫_{T_max}^∞ b²`.
    pub fn square_tail(&self) -> Result<TailEstimate> {
        if self.problem.beta_map().is_zero() {
            return Ok(TailEstimate::closed(0.0));
        }
        let bound = self
            .problem
            .beta_map()
            .times(self.problem.beta_map())
            .power_bound(self.t_end)
            .or(Some(PowerBound::monomial(1.0, -2.0, self.t_end)));
        self.integrate(
            |s| {
                let b = self.b(s);
                Ok(b * b)
            },
            bound,
        )
    }
}

#[derive(Debug, Clone)]
pub struct ForcingProfile {
    pub u: GridSeries,
    /// `F(t_i, u_i)/u_i`
    pub ratio: Vec<f64>,
    pub tail: TailEstimate,
    pub xi: f64,
}

#[derive(Debug, Clone)]
pub struct BandSample {
    pub label: String,
    pub b: GridSeries,
}
