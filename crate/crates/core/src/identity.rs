//! Flat registry of the analytic identities and their simulation counterparts.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::{self, Clock, CountingMode, McConfig, McEstimate, PathFunctional, Payoff, Target};
use crate::model::LevyModel;
use crate::occupation;
use crate::parisian::{self, ParisianQuery};

/// Parameter map keyed by parameter name.
pub type Params = BTreeMap<String, f64>;

/// Registry entry.
#[derive(Debug, Clone, Copy)]
pub struct IdentitySpec {
    pub name: &'static str,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
    pub summary: &'static str,
}

macro_rules! spec {
    ($name:literal, [$($req:literal),*], [$($opt:literal),*], $summary:literal) => {
        IdentitySpec { name: $name, required: &[$($req),*], optional: &[$($opt),*], summary: $summary }
    };
}

/// Every registered identity.
pub const REGISTRY: [IdentitySpec; 21] = [
    spec!("joint_lt_upcross", ["x", "b", "q", "p", "lambda"], [], "E_x[e^{-q tau_b+}; tau_b+ < rho^(p,lambda)]"),
    spec!("lt_occupation_inf", ["x", "p", "lambda"], [], "E_x[e^{-p O_inf,lambda}]"),
    spec!("occupation_law", ["x", "lambda"], ["r"], "atom P_x(O = 0), or the density at r"),
    spec!("ruin_prob_sum_exp", ["x", "p", "lambda"], [], "P_x(rho^(p,lambda) < inf)"),
    spec!("gs_lt_two_sided", ["x", "b", "q", "p", "lambda", "theta"], [], "E_x[e^{-q rho + theta X_rho}; rho < tau_b+]"),
    spec!("gs_lt_infinite", ["x", "q", "p", "lambda", "theta"], [], "E_x[e^{-q rho + theta X_rho}; rho < inf]"),
    spec!("up_cross_three_barrier", ["x", "b", "a", "q", "p", "lambda"], [], "E_x[e^{-q tau_b+}; tau_b+ < rho and tau_-a-]"),
    spec!("up_cross_before_ruin", ["x", "b", "q", "p", "lambda"], [], "E_x[e^{-q tau_b+}; tau_b+ < rho^(p,lambda)]"),
    spec!("gerber_shiu_density", ["x", "b", "y", "q", "p", "lambda"], [], "density in y of E_x[e^{-q rho}; X_rho in dy, rho < tau_b+]"),
    spec!("lt_occupation_exp_horizon", ["x", "p", "q", "lambda"], [], "E_x[e^{-p O_{e_q},lambda}]"),
    spec!("ruin_prob_erlang2", ["x", "lambda"], [], "P_x(rho^(2)_lambda < inf)"),
    spec!("gs_density_e2", ["x", "b", "y", "q", "lambda"], [], "Erlang(2) Gerber-Shiu density"),
    spec!("gs_lt_two_sided_e2", ["x", "b", "q", "lambda", "theta"], [], "Erlang(2) two-sided transform"),
    spec!("gs_lt_infinite_e2", ["x", "q", "lambda", "theta"], [], "Erlang(2) infinite-horizon transform"),
    spec!("up_cross_e2", ["x", "b", "q", "lambda"], [], "E_x[e^{-q tau_b+}; tau_b+ < rho^(2)_lambda]"),
    spec!("ruin_prob_erlang_n", ["x", "lambda", "n"], [], "P_x(rho^(n)_lambda < inf), hybrid for n >= 4"),
    spec!("fixed_delay_approx", ["x", "r", "n"], [], "Erlang(n, n/r) approximation of P_x(kappa_r < inf)"),
    spec!("T0_joint_lt", ["x", "b", "q", "lambda", "theta"], [], "E_x[e^{-q T0- + theta X_T0-}; T0- < tau_b+]"),
    spec!("upcross_before_T0_two_sided", ["x", "b", "a", "q", "lambda"], [], "E_x[e^{-q tau_b+}; tau_b+ < T0- and tau_-a-]"),
    spec!("upcross_before_T0", ["x", "b", "q", "lambda"], [], "E_x[e^{-q tau_b+}; tau_b+ < T0-]"),
    spec!("delayed_W_functional", ["x", "b", "a", "q", "p", "lambda", "z"], [], "E_x[e^{-q T0-} W_p(X_T0- + z); T0- < tau_b+ and tau_-a-], z <= a"),
];

pub fn lookup(name: &str) -> Option<&'static IdentitySpec> {
    REGISTRY.iter().find(|s| s.name == name)
}

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|s| s.name).collect()
}

/// Identities whose value is also estimated by simulation (for some parameters).
pub fn validatable() -> Vec<&'static str> {
    names()
        .into_iter()
        .filter(|n| !matches!(*n, "gerber_shiu_density" | "gs_density_e2"))
        .collect()
}

/// Rejects missing and unknown parameter names.
pub fn check_params(spec: &IdentitySpec, params: &Params) -> std::result::Result<(), String> {
    for key in params.keys() {
        if !spec.required.contains(&key.as_str()) && !spec.optional.contains(&key.as_str()) {
            return Err(format!(
                "unknown parameter `{key}` for `{}`; accepted: {:?} optional: {:?}",
                spec.name, spec.required, spec.optional
            ));
        }
    }
    for key in spec.required {
        if !params.contains_key(*key) {
            return Err(format!("missing parameter `{key}` for `{}`", spec.name));
        }
    }
    Ok(())
}

/// Analytic value, flagged when part of it was simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub hybrid: bool,
    pub std_error: f64,
}

impl Evaluation {
    fn exact(value: f64) -> Self {
        Evaluation {
            value,
            hybrid: false,
            std_error: 0.0,
        }
    }
}

fn get(params: &Params, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::Input(format!("missing parameter `{key}`")))
}

fn get_n(params: &Params) -> Result<usize> {
    let n = get(params, "n")?;
    if n < 1.0 || n.fract() != 0.0 || n > 1e6 {
        return Err(Error::Input(format!("n must be a positive integer, got {n}")));
    }
    Ok(n as usize)
}

fn query(model: LevyModel, params: &Params) -> ParisianQuery {
    let mut q = ParisianQuery::new(model);
    let v = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    q.x = v("x", 0.0);
    q.b = params.get("b").copied();
    q.a = params.get("a").copied();
    q.q = v("q", 0.0);
    q.p = v("p", 1.0);
    q.lambda = v("lambda", 1.0);
    q.theta = v("theta", 0.0);
    q.y = v("y", 0.0);
    q.r = v("r", 1.0);
    q.z = v("z", 1.0);
    q
}

fn known(name: &str) -> Result<&'static IdentitySpec> {
    lookup(name).ok_or_else(|| Error::Input(format!("unknown identity `{name}`; known: {:?}", names())))
}

/// Erlang(n) ruin with simulated tilted transforms for `n ≥ 4`.
fn erlang_n(model: LevyModel, x: f64, lambda: f64, n: usize, mc: Option<&McConfig>) -> Result<Evaluation> {
    if n <= 3 {
        return Ok(Evaluation::exact(parisian::ruin_prob_erlang_n(model, x, lambda, n)?));
    }
    let cfg = mc.ok_or_else(|| {
        Error::Precondition(format!("n = {n} uses simulated transforms; a simulation config is required"))
    })?;
    // Independent of the streams used when the same campaign validates the value.
    let cfg = McConfig {
        seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        ..*cfg
    };
    let theta = model.phi(lambda)?;
    let r = parisian::ruin_prob_erlang_n_with(model, x, lambda, n, |k, at| {
        let f = PathFunctional::new(
            "rho_erlang_tilt",
            at,
            Target::Ruin {
                clock: Clock::erlang(k, lambda),
                b: None,
                a: None,
            },
            Payoff::Exp { q: 0.0, theta },
        );
        let e = mc::estimate(&model, &cfg, &f)?;
        Ok((e.value, e.std_error))
    })?;
    Ok(Evaluation {
        value: r.value,
        hybrid: r.hybrid,
        std_error: r.std_error,
    })
}

/// Evaluates identity `name`; `mc` is only used by the hybrid Erlang(n ≥ 4) recursion.
pub fn evaluate(model: LevyModel, name: &str, params: &Params, mc: Option<&McConfig>) -> Result<Evaluation> {
    let spec = known(name)?;
    check_params(spec, params).map_err(Error::Input)?;
    let q = query(model, params);
    let g = |k: &str| get(params, k);
    let v = match name {
        "joint_lt_upcross" => occupation::joint_lt_upcross(model, q.x, g("b")?, q.q, q.p, q.lambda)?,
        "lt_occupation_inf" => occupation::lt_occupation_inf(model, q.x, q.p, q.lambda)?,
        "occupation_law" => {
            let law = occupation::occupation_law(model, q.x, q.lambda)?;
            match params.get("r") {
                Some(&r) => law.density(r)?,
                None => law.atom_at_zero,
            }
        }
        "ruin_prob_sum_exp" => parisian::ruin_prob_sum_exp(model, q.x, q.p, q.lambda)?,
        "gs_lt_two_sided" => parisian::gs_lt_two_sided(&q)?,
        "gs_lt_infinite" => parisian::gs_lt_infinite(&q)?,
        "up_cross_three_barrier" => parisian::up_cross_three_barrier(&q)?,
        "up_cross_before_ruin" => parisian::up_cross_before_ruin(&q)?,
        "gerber_shiu_density" => parisian::gerber_shiu_density(&q)?,
        "lt_occupation_exp_horizon" => parisian::lt_occupation_exp_horizon(model, q.x, q.p, q.q, q.lambda)?,
        "ruin_prob_erlang2" => parisian::ruin_prob_erlang2(model, q.x, q.lambda)?,
        "gs_density_e2" | "gs_lt_two_sided_e2" | "gs_lt_infinite_e2" | "up_cross_e2" => {
            parisian::erlang2_identities(name, &q)?
        }
        "ruin_prob_erlang_n" => return erlang_n(model, q.x, q.lambda, get_n(params)?, mc),
        "fixed_delay_approx" => {
            let n = get_n(params)?;
            let r = g("r")?;
            crate::error::ensure_positive("r", r)?;
            return erlang_n(model, q.x, n as f64 / r, n, mc);
        }
        "T0_joint_lt" | "upcross_before_T0_two_sided" | "upcross_before_T0" | "delayed_W_functional" => {
            parisian::appendix_lemmas(name, &q)?
        }
        _ => unreachable!("registry entry without evaluator"),
    };
    Ok(Evaluation::exact(v))
}

/// Simulation counterpart of identity `name`, if it has one for these parameters.
pub fn functional(model: LevyModel, name: &str, params: &Params) -> Result<Option<PathFunctional>> {
    let spec = known(name)?;
    check_params(spec, params).map_err(Error::Input)?;
    let q = query(model, params);
    let g = |k: &str| get(params, k);
    let sum_exp = |p: f64| if p == 0.0 { Clock::Never } else { Clock::sum_exp(p, q.lambda) };
    let t0 = Clock::Observed {
        lambda: q.lambda,
        n: 1,
    };
    let disc = Payoff::Exp { q: q.q, theta: 0.0 };
    let tilt = Payoff::Exp { q: q.q, theta: q.theta };
    let occ = |horizon_q| Target::Occupation {
        lambda: q.lambda,
        n: 1,
        mode: CountingMode::FirstObservation,
        horizon_q,
    };
    let ruin = |clock: Clock, b: Option<f64>, a: Option<f64>| Target::Ruin { clock, b, a };
    let up = |clock: Clock, a: Option<f64>| -> Result<Target> { Ok(Target::Upcross { clock, b: g("b")?, a }) };
    let (target, payoff) = match name {
        "joint_lt_upcross" | "up_cross_before_ruin" => (up(sum_exp(q.p), None)?, disc),
        "lt_occupation_inf" => (occ(None), Payoff::Laplace { p: q.p }),
        "occupation_law" => {
            if params.contains_key("r") {
                return Ok(None);
            }
            (occ(None), Payoff::Atom)
        }
        "ruin_prob_sum_exp" => (ruin(sum_exp(q.p), None, None), Payoff::indicator()),
        "gs_lt_two_sided" => (ruin(sum_exp(q.p), Some(g("b")?), None), tilt),
        "gs_lt_infinite" => (ruin(sum_exp(q.p), None, None), tilt),
        "up_cross_three_barrier" => (up(sum_exp(q.p), Some(g("a")?))?, disc),
        "lt_occupation_exp_horizon" => (occ(Some(g("q")?)), Payoff::Laplace { p: q.p }),
        "ruin_prob_erlang2" => (ruin(Clock::erlang(2, q.lambda), None, None), Payoff::indicator()),
        "gs_lt_two_sided_e2" => (ruin(Clock::erlang(2, q.lambda), Some(g("b")?), None), tilt),
        "gs_lt_infinite_e2" => (ruin(Clock::erlang(2, q.lambda), None, None), tilt),
        "up_cross_e2" => (up(Clock::erlang(2, q.lambda), None)?, disc),
        "ruin_prob_erlang_n" => (ruin(Clock::erlang(get_n(params)?, q.lambda), None, None), Payoff::indicator()),
        "fixed_delay_approx" => {
            let n = get_n(params)?;
            (ruin(Clock::erlang(n, n as f64 / g("r")?), None, None), Payoff::indicator())
        }
        "T0_joint_lt" => (ruin(t0, Some(g("b")?), None), tilt),
        "upcross_before_T0_two_sided" => (up(t0, Some(g("a")?))?, disc),
        "upcross_before_T0" => (up(t0, None)?, disc),
        "delayed_W_functional" => (
            ruin(t0, Some(g("b")?), Some(g("a")?)),
            Payoff::DelayedW {
                q: q.q,
                p: q.p,
                z: g("z")?,
            },
        ),
        _ => return Ok(None),
    };
    Ok(Some(PathFunctional::new(name, q.x, target, payoff)))
}

/// Outcome of a validation campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Fewer than [`MIN_REPLICATIONS`] replications: standard errors are not trusted.
    Informational,
}

/// Replication floor below which a campaign is only informational.
pub const MIN_REPLICATIONS: u64 = 100;

/// Analytic value against its simulation estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub identity: String,
    pub params: Params,
    pub analytic: f64,
    pub hybrid: bool,
    pub mc: McEstimate,
    pub seed: u64,
    pub z_score: f64,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn new(identity: &str, params: Params, analytic: Evaluation, mc: McEstimate, seed: u64) -> Self {
        let diff = mc.value - analytic.value;
        let z_score = if mc.std_error > 0.0 {
            diff / mc.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let verdict = if mc.replications < MIN_REPLICATIONS {
            Verdict::Informational
        } else if diff.abs() <= 3.0 * mc.std_error + mc.truncation_bound {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ValidationReport {
            identity: identity.to_string(),
            params,
            analytic: analytic.value,
            hybrid: analytic.hybrid,
            mc,
            seed,
            z_score,
            verdict,
        }
    }
}

/// Runs both sides of identity `name`.
pub fn validate(model: LevyModel, name: &str, params: &Params, config: &McConfig) -> Result<ValidationReport> {
    let f = functional(model, name, params)?.ok_or_else(|| {
        Error::Input(format!(
            "`{name}` has no simulation counterpart for these parameters; validatable: {:?}",
            validatable()
        ))
    })?;
    let analytic = evaluate(model, name, params, Some(config))?;
    let est = mc::estimate(&model, config, &f)?;
    Ok(ValidationReport::new(name, params.clone(), analytic, est, config.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 2f64.sqrt()).unwrap()
    }

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn registry_is_unique_and_complete() {
        let mut n = names();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), REGISTRY.len());
        for s in REGISTRY {
            let mut p: Params = s.required.iter().map(|k| (k.to_string(), 0.5)).collect();
            if s.required.contains(&"n") {
                p.insert("n".into(), 2.0);
            }
            // Every entry dispatches; domain errors are allowed, panics are not.
            let _ = evaluate(bm(), s.name, &p, None);
            let _ = functional(bm(), s.name, &p);
        }
    }

    #[test]
    fn strict_parameters() {
        let s = lookup("ruin_prob_erlang2").unwrap();
        assert!(check_params(s, &params(&[("x", 0.0), ("lambda", 2.0)])).is_ok());
        assert!(check_params(s, &params(&[("x", 0.0)])).is_err());
        assert!(check_params(s, &params(&[("x", 0.0), ("lambda", 2.0), ("p", 1.0)])).is_err());
        assert!(evaluate(bm(), "nope", &Params::new(), None).is_err());
    }

    #[test]
    fn headline_evaluations() {
        let e = evaluate(bm(), "ruin_prob_erlang2", &params(&[("x", 0.0), ("lambda", 2.0)]), None).unwrap();
        assert!((e.value - 0.25).abs() < 1e-13 && !e.hybrid);
        let p = params(&[("x", 1.0), ("b", 1.0), ("q", 0.0), ("p", 2.0), ("lambda", 2.0)]);
        assert_eq!(evaluate(bm(), "joint_lt_upcross", &p, None).unwrap().value, 1.0);
        let p = params(&[("x", 0.0), ("lambda", 1.0), ("n", 4.0)]);
        assert!(matches!(evaluate(bm(), "ruin_prob_erlang_n", &p, None), Err(Error::Precondition(_))));
    }

    #[test]
    fn verdict_policy() {
        let a = Evaluation::exact(0.5);
        let mk = |value, std_error, replications| McEstimate {
            value,
            std_error,
            replications,
            truncation_bound: 0.0,
        };
        assert_eq!(ValidationReport::new("i", Params::new(), a, mk(0.52, 0.01, 1000), 0).verdict, Verdict::Pass);
        assert_eq!(ValidationReport::new("i", Params::new(), a, mk(0.54, 0.01, 1000), 0).verdict, Verdict::Fail);
        assert_eq!(ValidationReport::new("i", Params::new(), a, mk(1.0, 0.0, 1), 0).verdict, Verdict::Informational);
    }
}
