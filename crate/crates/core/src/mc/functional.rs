//! Path functionals estimated by the simulators.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};

/// Rule deciding when an excursion below 0 turns into ruin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Clock {
    /// No ruin; only barrier crossings matter.
    Never,
    /// `τ₀⁻`: ruin as soon as the surplus is below 0.
    Classical,
    /// Ruin at the `n`-th Poisson(λ) observation that falls in one excursion
    /// below 0 (`T₀⁻` for `n = 1`, `n` consecutive observations otherwise).
    Observed { lambda: f64, n: usize },
    /// Ruin once one excursion outlasts a fresh `Exp(r₁) + … + Exp(r_k)` delay.
    Delay { rates: Vec<f64> },
    /// `κ_r`: ruin once one excursion lasts `r`.
    Fixed { r: f64 },
}

impl Clock {
    pub fn sum_exp(p: f64, lambda: f64) -> Self {
        Clock::Delay { rates: vec![p, lambda] }
    }

    pub fn erlang(n: usize, lambda: f64) -> Self {
        Clock::Delay { rates: vec![lambda; n] }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Clock::Never | Clock::Classical => Ok(()),
            Clock::Observed { lambda, n } => {
                ensure_positive("lambda", *lambda)?;
                if *n == 0 {
                    return Err(Error::Input("observation count n must be >= 1".into()));
                }
                Ok(())
            }
            Clock::Delay { rates } => {
                if rates.is_empty() {
                    return Err(Error::Input("delay needs at least one rate".into()));
                }
                rates.iter().try_for_each(|&r| ensure_positive("delay rate", r))
            }
            Clock::Fixed { r } => ensure_positive("r", *r),
        }
    }
}

/// How Poisson observations inside one excursion contribute to occupation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CountingMode {
    /// Only the `n`-th observation of each excursion adds its time to recovery.
    #[default]
    FirstObservation,
    /// Every observation from the `n`-th on adds its own time to recovery, so
    /// overlapping recovery intervals are summed.
    Literal,
}

/// Stopping structure of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Ruin under `clock` before `τ_b⁺` (if `b`) and `τ_{−a}⁻` (if `a`).
    Ruin { clock: Clock, b: Option<f64>, a: Option<f64> },
    /// `τ_b⁺` before ruin under `clock` and before `τ_{−a}⁻` (if `a`).
    Upcross { clock: Clock, b: f64, a: Option<f64> },
    /// `O_{∞,λ,n}`, or `O_{e_q,λ,n}` with an independent `Exp(q)` horizon.
    Occupation {
        lambda: f64,
        n: usize,
        mode: CountingMode,
        horizon_q: Option<f64>,
    },
}

/// Quantity averaged over paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    /// `e^{−qT + θX_T}` on the target event at time `T`, 0 otherwise.
    Exp { q: f64, theta: f64 },
    /// `e^{−qT}(−X_T)` at ruin.
    Deficit { q: f64 },
    /// `e^{−qT}W_p(X_T + z)` at ruin.
    DelayedW { q: f64, p: f64, z: f64 },
    /// `e^{−pO}` for an occupation target.
    Laplace { p: f64 },
    /// `1{O = 0}` for an occupation target.
    Atom,
    /// The occupation time itself.
    Value,
}

impl Payoff {
    pub fn indicator() -> Self {
        Payoff::Exp { q: 0.0, theta: 0.0 }
    }

    /// Killing rate that implements the discount `e^{−qT}`.
    pub(crate) fn kill_rate(&self) -> f64 {
        match *self {
            Payoff::Exp { q, .. } | Payoff::Deficit { q } | Payoff::DelayedW { q, .. } => q,
            Payoff::Laplace { .. } | Payoff::Atom | Payoff::Value => 0.0,
        }
    }
}

/// A path functional started from `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFunctional {
    pub name: String,
    pub x: f64,
    pub target: Target,
    pub payoff: Payoff,
}

impl PathFunctional {
    pub fn new(name: impl Into<String>, x: f64, target: Target, payoff: Payoff) -> Self {
        PathFunctional {
            name: name.into(),
            x,
            target,
            payoff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("x", self.x)?;
        match (&self.target, &self.payoff) {
            (Target::Occupation { lambda, n, horizon_q, .. }, Payoff::Laplace { .. } | Payoff::Atom | Payoff::Value) => {
                ensure_positive("lambda", *lambda)?;
                if *n == 0 {
                    return Err(Error::Input("observation count n must be >= 1".into()));
                }
                if let Some(q) = horizon_q {
                    ensure_positive("horizon q", *q)?;
                }
            }
            (Target::Occupation { .. }, _) => {
                return Err(Error::Input("occupation targets take a laplace, atom or value payoff".into()))
            }
            (_, Payoff::Laplace { .. } | Payoff::Atom | Payoff::Value) => {
                return Err(Error::Input("laplace, atom and value payoffs need an occupation target".into()))
            }
            (Target::Upcross { clock, b, a }, p) => {
                clock.validate()?;
                if !matches!(p, Payoff::Exp { theta, .. } if *theta == 0.0) {
                    return Err(Error::Input("up-crossing targets take an untilted exp payoff".into()));
                }
                ensure_finite("b", *b)?;
                self.check_window(Some(*b), *a)?;
            }
            (Target::Ruin { clock, b, a }, _) => {
                clock.validate()?;
                if *clock == Clock::Never {
                    return Err(Error::Input("ruin target needs a clock".into()));
                }
                self.check_window(*b, *a)?;
            }
        }
        match self.payoff {
            Payoff::Exp { q, theta } => {
                ensure_nonnegative("q", q)?;
                ensure_nonnegative("theta", theta)
            }
            Payoff::Deficit { q } => ensure_nonnegative("q", q),
            Payoff::DelayedW { q, p, z } => {
                ensure_nonnegative("q", q)?;
                ensure_nonnegative("p", p)?;
                ensure_positive("z", z)
            }
            Payoff::Laplace { p } => ensure_nonnegative("p", p),
            Payoff::Atom | Payoff::Value => Ok(()),
        }
    }

    fn check_window(&self, b: Option<f64>, a: Option<f64>) -> Result<()> {
        if let Some(b) = b {
            if self.x > b {
                return Err(Error::Input(format!("need x <= b, got x = {}, b = {b}", self.x)));
            }
        }
        if let Some(a) = a {
            ensure_nonnegative("a", a)?;
            if self.x < -a {
                return Err(Error::Input(format!("need x >= -a, got x = {}, a = {a}", self.x)));
            }
        }
        Ok(())
    }

    /// Whether the path can run forever without a barrier, so that the
    /// escape level is needed to stop it.
    pub(crate) fn needs_escape(&self) -> bool {
        match &self.target {
            Target::Ruin { b, .. } => b.is_none(),
            Target::Upcross { .. } => false,
            Target::Occupation { .. } => true,
        }
    }
}

/// Excursion bookkeeping shared by the simulators.
#[derive(Debug, Clone, Default)]
pub(crate) struct ClockState {
    pub in_excursion: bool,
    /// Completed delay phases (memoryless representation) or observations in
    /// the current excursion.
    pub count: usize,
    /// Absolute ruin time of the current excursion (explicit delays).
    pub deadline: Option<f64>,
}

impl ClockState {
    pub fn reset(&mut self) {
        self.in_excursion = false;
        self.count = 0;
        self.deadline = None;
    }

    pub fn begin(&mut self) {
        self.in_excursion = true;
        self.count = 0;
        self.deadline = None;
    }
}

/// Rate of the marks that advance `clock` when delays are represented by
/// memoryless phases.
pub(crate) fn mark_rate(clock: &Clock, state: &ClockState) -> f64 {
    match clock {
        Clock::Observed { lambda, .. } => *lambda,
        Clock::Delay { rates } => rates[state.count.min(rates.len() - 1)],
        Clock::Never | Clock::Classical | Clock::Fixed { .. } => 0.0,
    }
}

/// Largest mark rate of `clock`; marks are thinned from a stream of this rate
/// so that phase changes inside a step are honoured.
pub(crate) fn max_mark_rate(clock: &Clock) -> f64 {
    match clock {
        Clock::Observed { lambda, .. } => *lambda,
        Clock::Delay { rates } => rates.iter().copied().fold(0.0, f64::max),
        Clock::Never | Clock::Classical | Clock::Fixed { .. } => 0.0,
    }
}

/// Number of marks within one excursion that make up ruin.
pub(crate) fn marks_to_ruin(clock: &Clock) -> usize {
    match clock {
        Clock::Observed { n, .. } => *n,
        Clock::Delay { rates } => rates.len(),
        _ => usize::MAX,
    }
}

/// Occupation added by one excursion below 0 ending at `end`, from the
/// Poisson observation epochs that fall inside it (increasing, all `< end`).
pub(crate) fn occupation_from_epochs(epochs: &[f64], end: f64, horizon: f64, n: usize, mode: CountingMode) -> f64 {
    let stop = end.min(horizon);
    epochs
        .iter()
        .enumerate()
        .filter(|&(k, &e)| e < stop && (k + 1 == n || (mode == CountingMode::Literal && k + 1 > n)))
        .map(|(_, &e)| stop - e)
        .sum()
}

/// Samples the observation epochs of one excursion ending at `end`, given the
/// first one at `first < end`, and returns its occupation together with the
/// first epoch after the excursion (or past `horizon`).
pub(crate) fn excursion_occupation(
    first: f64,
    end: f64,
    horizon: f64,
    lambda: f64,
    n: usize,
    mode: CountingMode,
    s: &mut super::rng::Stream,
) -> (f64, f64) {
    let stop = end.min(horizon);
    let mut epochs = vec![first];
    loop {
        let next = epochs[epochs.len() - 1] + s.exp(lambda);
        if next >= stop {
            return (occupation_from_epochs(&epochs, end, horizon, n, mode), next);
        }
        epochs.push(next);
    }
}
