//! Parametric spectrally negative Lévy risk models.
//!
//! Two families are supported:
//!
//! - Brownian risk: `X_t = x + μt + σB_t`, with `ψ(θ) = μθ + σ²θ²/2`;
//! - Cramér–Lundberg with exponential claims: premium rate `c`, claim
//!   intensity `η`, claim sizes `Exp(α)`, with `ψ(θ) = cθ − η + αη/(θ + α)`.
//!
//! Everything downstream (scale functions, fluctuation identities) only needs
//! `ψ`, its derivatives and its real roots, so the root finders here work on
//! `ψ` alone and never use the closed forms available for these two families.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};

/// Poisson tail mass below which the Cramér–Lundberg transition series is truncated.
pub const POISSON_TAIL_CUTOFF: f64 = 1e-12;

/// A spectrally negative Lévy risk model.
///
/// Serialized as `{"kind": "brownian", "mu": .., "sigma": ..}` or
/// `{"kind": "cramer_lundberg", "c": .., "eta": .., "alpha": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyModel {
    /// Drifted Brownian motion.
    #[serde(rename = "brownian")]
    BrownianRisk { mu: f64, sigma: f64 },
    /// Compound Poisson with exponential jumps and linear premium income.
    #[serde(rename = "cramer_lundberg")]
    CramerLundbergExp { c: f64, eta: f64, alpha: f64 },
}

impl LevyModel {
    /// Brownian risk model. `sigma = 0` is rejected (monotone paths).
    pub fn brownian(mu: f64, sigma: f64) -> Result<Self> {
        let m = LevyModel::BrownianRisk { mu, sigma };
        m.validate()?;
        Ok(m)
    }

    /// Cramér–Lundberg model with exponentially distributed claims.
    pub fn cramer_lundberg(c: f64, eta: f64, alpha: f64) -> Result<Self> {
        let m = LevyModel::CramerLundbergExp { c, eta, alpha };
        m.validate()?;
        Ok(m)
    }

    /// Checks parameter signs. Deserialized models should be validated before use.
    pub fn validate(&self) -> Result<()> {
        match *self {
            LevyModel::BrownianRisk { mu, sigma } => {
                ensure_finite("mu", mu)?;
                ensure_positive("sigma", sigma)
            }
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                ensure_positive("c", c)?;
                ensure_positive("eta", eta)?;
                ensure_positive("alpha", alpha)
            }
        }
    }

    pub fn is_brownian(&self) -> bool {
        matches!(self, LevyModel::BrownianRisk { .. })
    }

    /// Left end of the open interval on which `ψ` is finite.
    pub fn domain_lower(&self) -> f64 {
        match *self {
            LevyModel::BrownianRisk { .. } => f64::NEG_INFINITY,
            LevyModel::CramerLundbergExp { alpha, .. } => -alpha,
        }
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        ensure_finite("theta", theta)?;
        if theta <= self.domain_lower() {
            return Err(Error::Input(format!(
                "theta = {theta} is outside the domain of psi (> {})",
                self.domain_lower()
            )));
        }
        Ok(())
    }

    /// Laplace exponent `ψ(θ) = log E[e^{θX₁}]`.
    pub fn psi(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.psi_unchecked(theta))
    }

    pub(crate) fn psi_unchecked(&self, theta: f64) -> f64 {
        match *self {
            LevyModel::BrownianRisk { mu, sigma } => theta * (mu + 0.5 * sigma * sigma * theta),
            // cθ − η + αη/(θ+α) rewritten without the cancellation near θ = 0.
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                theta * (c - eta / (theta + alpha))
            }
        }
    }

    /// First derivative of `ψ`.
    pub fn psi_prime(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.psi_prime_unchecked(theta))
    }

    pub(crate) fn psi_prime_unchecked(&self, theta: f64) -> f64 {
        match *self {
            LevyModel::BrownianRisk { mu, sigma } => mu + sigma * sigma * theta,
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                let s = theta + alpha;
                c - alpha * eta / (s * s)
            }
        }
    }

    /// Mean increment `E[X₁] = ψ′(0)`.
    pub fn mean(&self) -> f64 {
        self.psi_prime_unchecked(0.0)
    }

    /// Returns an error unless `E[X₁] > 0`; `what` names the identity that needs it.
    pub fn require_positive_drift(&self, what: &str) -> Result<()> {
        let m = self.mean();
        if m > 0.0 {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "{what} requires E[X1] > 0, model has E[X1] = {m}"
            )))
        }
    }

    /// Minimiser of `ψ` and the minimum value `ψ(m) ≤ 0`.
    pub fn psi_minimum(&self) -> (f64, f64) {
        let m = self.argmin_psi();
        (m, self.psi_unchecked(m))
    }

    /// Minimiser of the strictly convex `ψ` over its domain.
    fn argmin_psi(&self) -> f64 {
        let d0 = self.psi_prime_unchecked(0.0);
        if d0 == 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = if d0 > 0.0 {
            let mut k = 0;
            let mut lo = self.step_toward_lower(k);
            while self.psi_prime_unchecked(lo) >= 0.0 {
                k += 1;
                lo = self.step_toward_lower(k);
            }
            (lo, 0.0)
        } else {
            let mut hi = 1.0;
            while self.psi_prime_unchecked(hi) <= 0.0 {
                hi *= 2.0;
            }
            (0.0, hi)
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.psi_prime_unchecked(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// k-th probe point on the negative axis, approaching the domain boundary.
    fn step_toward_lower(&self, k: i32) -> f64 {
        let lower = self.domain_lower();
        if lower.is_finite() {
            lower * (1.0 - 0.5f64.powi(k + 1))
        } else {
            -(2f64.powi(k))
        }
    }

    /// Right inverse `Φ_q = sup{θ ≥ 0 : ψ(θ) = q}`.
    ///
    /// Newton iteration started to the right of the root; on the increasing
    /// convex branch this converges monotonically, so no safeguarding is needed
    /// beyond the initial bracket.
    pub fn phi(&self, q: f64) -> Result<f64> {
        ensure_nonnegative("q", q)?;
        let m = self.argmin_psi();
        let lo = m.max(0.0);
        if q == 0.0 && m <= 0.0 {
            return Ok(0.0);
        }
        let mut hi = lo.max(1.0);
        while self.psi_unchecked(hi) <= q {
            hi *= 2.0;
        }
        Ok(self.newton_monotone(hi, q, lo))
    }

    /// Magnitude `ζ_q ≥ 0` of the other real root `−ζ_q ≤ 0` of `ψ(θ) = q`.
    ///
    /// Fails when `q = 0` and `E[X₁] = 0` (double root at the origin).
    pub fn zeta(&self, q: f64) -> Result<f64> {
        ensure_nonnegative("q", q)?;
        let m = self.argmin_psi();
        if q == 0.0 {
            if m == 0.0 {
                return Err(Error::Precondition(
                    "psi - q has a double root at 0 (q = 0 and E[X1] = 0)".into(),
                ));
            }
            if m > 0.0 {
                return Ok(0.0);
            }
        }
        let mut k = 0;
        let mut start = self.step_toward_lower(k).min(m);
        while self.psi_unchecked(start) <= q {
            k += 1;
            start = self.step_toward_lower(k);
        }
        Ok(-self.newton_monotone(start, q, m))
    }

    /// Newton on the convex `ψ − q` from a point where `ψ > q`; `stop` is the
    /// minimiser side of the bracket, used only as a bisection fallback.
    fn newton_monotone(&self, start: f64, q: f64, stop: f64) -> f64 {
        let mut t = start;
        for _ in 0..200 {
            let f = self.psi_unchecked(t) - q;
            let d = self.psi_prime_unchecked(t);
            if f == 0.0 || d == 0.0 {
                return t;
            }
            let mut next = t - f / d;
            // Guard against rounding pushing the iterate past the minimiser.
            if (start > stop && next < stop) || (start < stop && next > stop) {
                next = 0.5 * (t + stop);
            }
            if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
                return next;
            }
            t = next;
        }
        t
    }

    /// Derivative of `q ↦ Φ_q`, equal to `1/ψ′(Φ_q)`.
    pub fn phi_prime(&self, q: f64) -> Result<f64> {
        let phi = self.phi(q)?;
        let d = self.psi_prime_unchecked(phi);
        if d <= 0.0 {
            return Err(Error::Pole {
                name: "q".into(),
                value: q,
                detail: "psi'(Phi_q) = 0".into(),
            });
        }
        Ok(1.0 / d)
    }

    /// Law of `X_r` started from 0.
    pub fn transition(&self, r: f64) -> Result<TransitionDensity> {
        ensure_positive("r", r)?;
        Ok(match *self {
            LevyModel::BrownianRisk { mu, sigma } => TransitionDensity {
                kind: TransitionKind::Gaussian {
                    mean: mu * r,
                    sd: sigma * r.sqrt(),
                },
                atom_location: 0.0,
                atom_mass: 0.0,
            },
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                let lam = eta * r;
                // Number of Poisson terms needed for the tail to drop below the cutoff.
                let mut pmf = (-lam).exp();
                let mut cdf = pmf;
                let mut k_max = 0usize;
                while 1.0 - cdf > POISSON_TAIL_CUTOFF || (k_max as f64) < lam {
                    k_max += 1;
                    pmf *= lam / k_max as f64;
                    cdf += pmf;
                    if k_max > 100_000 {
                        break;
                    }
                }
                TransitionDensity {
                    kind: TransitionKind::CompoundPoisson {
                        lam,
                        alpha,
                        top: c * r,
                        k_max: k_max.max(1),
                    },
                    atom_location: c * r,
                    atom_mass: (-lam).exp(),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TransitionKind {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// `top − Σ_{i ≤ N} C_i` with `N ~ Poisson(lam)`, `C_i ~ Exp(alpha)`.
    CompoundPoisson {
        lam: f64,
        alpha: f64,
        top: f64,
        k_max: usize,
    },
}

/// `P(X_r ∈ dz)` as an optional atom plus an absolutely continuous part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionDensity {
    kind: TransitionKind,
    /// Location of the atom (`cr` for Cramér–Lundberg, unused otherwise).
    pub atom_location: f64,
    /// Mass of the atom (`e^{−ηr}` for Cramér–Lundberg, 0 for Brownian).
    pub atom_mass: f64,
}

impl TransitionDensity {
    /// Density of the absolutely continuous part at `z`.
    pub fn density(&self, z: f64) -> f64 {
        match self.kind {
            TransitionKind::Gaussian { mean, sd } => {
                let u = (z - mean) / sd;
                (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            TransitionKind::CompoundPoisson {
                lam,
                alpha,
                top,
                k_max,
            } => {
                let u = top - z;
                if u <= 0.0 {
                    return 0.0;
                }
                // Σ_k Poisson(lam){k} · Erlang(k, alpha)(u), by the term recurrence
                // t_{k+1} = t_k · lam·alpha·u / (k(k+1)).
                let mut term = (-lam - alpha * u).exp() * lam * alpha;
                let mut sum = term;
                let x = lam * alpha * u;
                for k in 1..k_max {
                    term *= x / (k as f64 * (k + 1) as f64);
                    sum += term;
                }
                sum
            }
        }
    }

    /// Interval outside of which the continuous part carries negligible mass.
    pub fn effective_support(&self) -> (f64, f64) {
        match self.kind {
            TransitionKind::Gaussian { mean, sd } => (mean - 40.0 * sd, mean + 40.0 * sd),
            TransitionKind::CompoundPoisson {
                alpha, top, k_max, ..
            } => {
                let k = k_max as f64;
                (top - (k + 40.0 * k.sqrt() + 60.0) / alpha, top)
            }
        }
    }
}
