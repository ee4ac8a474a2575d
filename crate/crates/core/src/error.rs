use thiserror::Error;

/// Errors raised by analytic evaluation and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the documented domain (non-finite, wrong sign, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A mathematical precondition of the identity is violated (e.g. the drift condition).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested point is a pole (or a removable point that is off-domain for this entry point).
    #[error("pole at {name} = {value}: {detail}")]
    Pole {
        name: String,
        value: f64,
        detail: String,
    },

    /// The confluent case p = λ must be evaluated through the Erlang(2) entry point.
    #[error("p = lambda is the Erlang(2) confluence; use `{0}` instead")]
    UseErlang2(&'static str),

    /// Numerical evaluation produced a value that violates a hard invariant.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A simulation was requested for a model kind it does not support.
    #[error("unsupported model: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must be finite, got {v}")))
    }
}

pub(crate) fn ensure_positive(name: &str, v: f64) -> Result<()> {
    ensure_finite(name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must be > 0, got {v}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &str, v: f64) -> Result<()> {
    ensure_finite(name, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must be >= 0, got {v}")))
    }
}

/// Clamp a probability-like value into [0, 1] when it overshoots by at most
/// `1e-9`; anything larger is reported as a numerical failure.
pub(crate) fn clamp_unit(name: &str, v: f64) -> Result<f64> {
    const SLACK: f64 = 1e-9;
    if !v.is_finite() {
        return Err(Error::Numerical(format!("{name} evaluated to {v}")));
    }
    if v < -SLACK || v > 1.0 + SLACK {
        return Err(Error::Numerical(format!(
            "{name} = {v} lies outside [0, 1] beyond tolerance"
        )));
    }
    Ok(v.clamp(0.0, 1.0))
}
