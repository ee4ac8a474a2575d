//! Monte Carlo oracle: direct simulation of the defining path functionals.
//!
//! Cramér–Lundberg paths are simulated exactly, event by event. Brownian paths
//! are sampled on a random skeleton (clock marks, observations, killing times)
//! with level crossings between skeleton points decided by the Brownian-bridge
//! crossing law and returns to 0 by inverse-Gaussian hitting times; a fixed
//! grid `grid_dt` is added only for fixed delays and lower barriers.
//!
//! Discounting `e^{−qT}` is implemented by killing at an independent `Exp(q)`
//! time. Infinite-horizon paths stop once the surplus exceeds an escape level
//! outside any excursion; the classical ruin probability from that level is
//! reported as `truncation_bound`.
//!
//! Replication `i` draws from the ChaCha8 stream `(seed, i)` and replications are
//! reduced in fixed blocks, so results do not depend on the worker count.

mod bm;
mod cl;
pub mod functional;
pub mod rng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use functional::{Clock, CountingMode, PathFunctional, Payoff, Target};

use crate::error::{ensure_positive, Error, Result};
use crate::model::LevyModel;
use crate::scale::ScaleContext;
use rng::Stream;

/// How infinite-horizon paths are stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HorizonMode {
    /// Stop above `level` when no excursion is in progress.
    EscapeLevel { level: f64 },
    /// Stop at time `t_max`; the functional is then the finite-time one.
    FixedTime { t_max: f64 },
}

/// Settings of a simulation campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub replications: u64,
    pub seed: u64,
    /// `None` picks an escape level whose residual ruin bound is `1e−10`.
    pub horizon: Option<HorizonMode>,
    /// Grid step of the Brownian simulator where a grid is used.
    pub grid_dt: f64,
    pub antithetic: bool,
    /// Rerun Brownian campaigns at `grid_dt/2` and add any discrepancy beyond
    /// two combined standard errors to `truncation_bound`.
    pub grid_check: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(replications: u64, seed: u64) -> Self {
        McConfig {
            replications,
            seed,
            horizon: None,
            grid_dt: 0.01,
            antithetic: false,
            grid_check: false,
            workers: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Input("replications must be >= 1".into()));
        }
        ensure_positive("grid_dt", self.grid_dt)?;
        match self.horizon {
            Some(HorizonMode::EscapeLevel { level }) => ensure_positive("escape level", level),
            Some(HorizonMode::FixedTime { t_max }) => ensure_positive("t_max", t_max),
            None => Ok(()),
        }
    }
}

/// Estimator of a path functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation over `√replications` (antithetic pairs count as one sample).
    pub std_error: f64,
    pub replications: u64,
    /// Bound on the bias from horizon truncation and, with `grid_check`, grid refinement.
    pub truncation_bound: f64,
}

/// Residual ruin probability from level `level`: `e^{−2μB/σ²}` (Brownian),
/// `(η/(cα))e^{(η/c−α)B}` (Cramér–Lundberg).
pub fn escape_bound(model: &LevyModel, level: f64) -> f64 {
    match *model {
        LevyModel::BrownianRisk { mu, sigma } => (-2.0 * mu * level / (sigma * sigma)).exp(),
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            (eta / (c * alpha)) * ((eta / c - alpha) * level).exp()
        }
    }
}

fn auto_escape_level(model: &LevyModel) -> f64 {
    let target = 1e-10f64;
    match *model {
        LevyModel::BrownianRisk { mu, sigma } => sigma * sigma / (2.0 * mu) * (1.0 / target).ln(),
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            ((target * c * alpha / eta).ln() / (eta / c - alpha)).max(0.0)
        }
    }
}

/// Read-only data shared by all replications.
pub(crate) struct Env {
    pub escape: f64,
    pub t_max: f64,
    pub grid_dt: f64,
    pub w_p: Option<ScaleContext>,
}

impl Env {
    /// Value of the payoff when the target event happens with surplus `x`.
    pub(crate) fn payoff_at(&self, payoff: &Payoff, x: f64) -> f64 {
        match *payoff {
            Payoff::Exp { theta, .. } => {
                if theta == 0.0 {
                    1.0
                } else {
                    (theta * x).exp()
                }
            }
            Payoff::Deficit { .. } => -x,
            Payoff::DelayedW { z, .. } => self.w_p.as_ref().map_or(0.0, |c| c.w(x + z)),
            Payoff::Laplace { .. } | Payoff::Atom | Payoff::Value => 0.0,
        }
    }
}

fn path_value(model: &LevyModel, f: &PathFunctional, env: &Env, s: &mut Stream) -> f64 {
    let raw = match *model {
        LevyModel::BrownianRisk { mu, sigma } => bm::run(mu, sigma, f, env, s),
        LevyModel::CramerLundbergExp { c, eta, alpha } => cl::run(c, eta, alpha, f, env, s),
    };
    match f.payoff {
        Payoff::Laplace { p } => (-p * raw).exp(),
        Payoff::Atom => f64::from(u8::from(raw == 0.0)),
        _ => raw,
    }
}

/// Running mean and sum of squared deviations of one block.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }
}

const BLOCK: u64 = 1024;

fn prepare(model: &LevyModel, config: &McConfig, f: &PathFunctional) -> Result<Env> {
    model.validate()?;
    config.validate()?;
    f.validate()?;
    let (escape, t_max) = match config.horizon {
        Some(HorizonMode::FixedTime { t_max }) => (f64::INFINITY, t_max),
        Some(HorizonMode::EscapeLevel { level }) => (level, f64::INFINITY),
        None => (f64::INFINITY, f64::INFINITY),
    };
    let escape = if t_max.is_finite() || !f.needs_escape() {
        f64::INFINITY
    } else {
        model.require_positive_drift(&format!("simulating `{}`", f.name))?;
        if escape.is_finite() {
            escape
        } else {
            auto_escape_level(model)
        }
    };
    if t_max.is_infinite() && f.payoff.kill_rate() == 0.0 {
        model.require_positive_drift(&format!("simulating `{}`", f.name))?;
    }
    let w_p = match f.payoff {
        Payoff::DelayedW { p, .. } => Some(ScaleContext::new(*model, p)?),
        _ => None,
    };
    Ok(Env {
        escape,
        t_max,
        grid_dt: config.grid_dt,
        w_p,
    })
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Input(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

fn run(model: &LevyModel, config: &McConfig, f: &PathFunctional) -> Result<McEstimate> {
    let env = prepare(model, config, f)?;
    let units = if config.antithetic {
        config.replications.div_ceil(2)
    } else {
        config.replications
    };
    let blocks = units.div_ceil(BLOCK);
    let parts: Vec<Moments> = in_pool(config.workers, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut m = Moments::default();
                for i in b * BLOCK..((b + 1) * BLOCK).min(units) {
                    let v = if config.antithetic {
                        let a = path_value(model, f, &env, &mut Stream::new(config.seed, i, false));
                        let z = path_value(model, f, &env, &mut Stream::new(config.seed, i, true));
                        0.5 * (a + z)
                    } else {
                        path_value(model, f, &env, &mut Stream::new(config.seed, i, false))
                    };
                    m.push(v);
                }
                m
            })
            .collect()
    })?;
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if m.n > 1 {
        (m.m2 / (m.n - 1) as f64).sqrt() / (m.n as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        value: m.mean,
        std_error,
        replications: if config.antithetic { 2 * units } else { units },
        truncation_bound: if env.escape.is_finite() {
            escape_bound(model, env.escape)
        } else {
            0.0
        },
    })
}

/// Estimates `E_x[functional]` by simulation.
pub fn estimate(model: &LevyModel, config: &McConfig, f: &PathFunctional) -> Result<McEstimate> {
    let mut est = run(model, config, f)?;
    if config.grid_check && model.is_brownian() {
        let half = McConfig {
            grid_dt: 0.5 * config.grid_dt,
            grid_check: false,
            ..*config
        };
        let fine = run(model, &half, f)?;
        let noise = 2.0 * est.std_error.hypot(fine.std_error);
        est.truncation_bound += ((est.value - fine.value).abs() - noise).max(0.0);
    }
    log::debug!("{}: {est:?}", f.name);
    Ok(est)
}

/// Exact event-driven estimate for the Cramér–Lundberg model.
pub fn simulate_cl_path(model: &LevyModel, config: &McConfig, f: &PathFunctional) -> Result<McEstimate> {
    if model.is_brownian() {
        return Err(Error::Model("simulate_cl_path needs a Cramér–Lundberg model".into()));
    }
    estimate(model, config, f)
}

/// Skeleton-and-bridge estimate for the Brownian model.
pub fn simulate_bm_path(model: &LevyModel, config: &McConfig, f: &PathFunctional) -> Result<McEstimate> {
    if !model.is_brownian() {
        return Err(Error::Model("simulate_bm_path needs a Brownian model".into()));
    }
    estimate(model, config, f)
}

/// Per-replication values of the functional, in replication order.
pub fn sample_values(model: &LevyModel, config: &McConfig, f: &PathFunctional) -> Result<Vec<f64>> {
    let env = prepare(model, config, f)?;
    in_pool(config.workers, || {
        (0..config.replications)
            .into_par_iter()
            .map(|i| path_value(model, f, &env, &mut Stream::new(config.seed, i, false)))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(1.0, 1.0, 2.0).unwrap()
    }

    fn sum_exp_ruin(x: f64) -> PathFunctional {
        PathFunctional::new(
            "rho_sum_exp",
            x,
            Target::Ruin {
                clock: Clock::sum_exp(2.0, 2.0),
                b: None,
                a: None,
            },
            Payoff::indicator(),
        )
    }

    #[test]
    fn worker_count_does_not_change_results() {
        for m in [bm(), cl()] {
            let mut c = McConfig::new(5000, 42);
            c.workers = Some(1);
            let one = estimate(&m, &c, &sum_exp_ruin(0.2)).unwrap();
            c.workers = Some(8);
            let eight = estimate(&m, &c, &sum_exp_ruin(0.2)).unwrap();
            assert_eq!(one.value.to_bits(), eight.value.to_bits());
            assert_eq!(one.std_error.to_bits(), eight.std_error.to_bits());
        }
    }

    #[test]
    fn certain_events_are_degenerate() {
        let up = PathFunctional::new(
            "tau_b_plus",
            0.0,
            Target::Upcross {
                clock: Clock::Never,
                b: 1.0,
                a: None,
            },
            Payoff::indicator(),
        );
        let e = estimate(&bm(), &McConfig::new(2000, 3), &up).unwrap();
        assert_eq!((e.value, e.std_error), (1.0, 0.0));
        let at_b = PathFunctional { x: 1.0, ..up };
        let e = estimate(&cl(), &McConfig::new(10, 3), &at_b).unwrap();
        assert_eq!((e.value, e.std_error), (1.0, 0.0));
    }

    #[test]
    fn std_error_follows_root_n() {
        let f = sum_exp_ruin(0.0);
        let a = estimate(&cl(), &McConfig::new(20_000, 5), &f).unwrap();
        let b = estimate(&cl(), &McConfig::new(80_000, 5), &f).unwrap();
        let ratio = a.std_error / b.std_error;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn antithetic_counts_pairs() {
        let mut c = McConfig::new(1001, 9);
        c.antithetic = true;
        let e = estimate(&cl(), &c, &sum_exp_ruin(0.0)).unwrap();
        assert_eq!(e.replications, 1002);
        assert!(e.truncation_bound > 0.0 && e.truncation_bound <= 1e-10 * 1.0001);
    }

    #[test]
    fn wrong_model_kind_is_rejected() {
        let c = McConfig::new(10, 1);
        assert!(matches!(simulate_cl_path(&bm(), &c, &sum_exp_ruin(0.0)), Err(Error::Model(_))));
        assert!(matches!(simulate_bm_path(&cl(), &c, &sum_exp_ruin(0.0)), Err(Error::Model(_))));
    }

    #[test]
    fn sample_values_are_ordered_and_reproducible() {
        let f = PathFunctional::new(
            "occupation_poisson",
            0.0,
            Target::Occupation {
                lambda: 2.0,
                n: 1,
                mode: CountingMode::FirstObservation,
                horizon_q: None,
            },
            Payoff::Value,
        );
        let mut c = McConfig::new(300, 8);
        let a = sample_values(&bm(), &c, &f).unwrap();
        c.workers = Some(3);
        let b = sample_values(&bm(), &c, &f).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v >= 0.0));
    }
}
