//! Poissonian occupation time below zero.
//!
//! `O_{t,λ}` adds, for every Poisson(λ) observation epoch at which the surplus
//! is negative, the time the path needs to climb back to 0. This module gives
//! its joint transform with the first passage above a barrier, its Laplace
//! transform over an infinite horizon and its full law (atom plus density).

use rayon::prelude::*;

use crate::error::{clamp_unit, ensure_finite, ensure_positive, Error, Result};
use crate::model::{LevyModel, TransitionDensity};
use crate::quad::{integrate, integrate_to_inf, integrate_with_breaks};
use crate::scale::ScaleContext;

/// `E_x[e^{−qτ_b⁺ − p·O_{τ_b⁺,λ}}; τ_b⁺ < ∞] = Z̃_q(x, Φ_{λ+q}, Φ_{p+q}) / Z̃_q(b, Φ_{λ+q}, Φ_{p+q})`.
pub fn joint_lt_upcross(model: LevyModel, x: f64, b: f64, q: f64, p: f64, lambda: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("b", b)?;
    ensure_positive("lambda", lambda)?;
    if p < 0.0 || !p.is_finite() {
        return Err(Error::Input(format!("p must be >= 0, got {p}")));
    }
    if x > b {
        return Err(Error::Input(format!("need x <= b, got x = {x}, b = {b}")));
    }
    let (lo, hi) = if p <= lambda { (p, lambda) } else { (lambda, p) };
    let ctx = ScaleContext::new(model, q)?;
    let al = model.phi(hi + q)?;
    let be = model.phi(lo + q)?;
    let v = ctx.z_tilde(x, al, be)? / ctx.z_tilde(b, al, be)?;
    clamp_unit("joint_lt_upcross", v)
}

/// `E_x[e^{−p·O_{∞,λ}}] = E[X₁] Φ_p Φ_λ/(λp) · Z̃(x, Φ_λ, Φ_p)`.
pub fn lt_occupation_inf(model: LevyModel, x: f64, p: f64, lambda: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("p", p)?;
    ensure_positive("lambda", lambda)?;
    model.require_positive_drift("lt_occupation_inf")?;
    // The formula is symmetric in (p, λ); a fixed order makes the symmetry bitwise.
    let (lo, hi) = if p <= lambda { (p, lambda) } else { (lambda, p) };
    let ctx = ScaleContext::new(model, 0.0)?;
    let pl = model.phi(hi)?;
    let pp = model.phi(lo)?;
    let v = model.mean() * (pp / lo) * (pl / hi) * ctx.z_tilde(x, pl, pp)?;
    clamp_unit("lt_occupation_inf", v)
}

/// `P_x(T₀⁻ = ∞) = E[X₁] (Φ_λ/λ) Z(x, Φ_λ)`: no Poisson observation ever finds the surplus negative.
pub fn prob_never_observed_negative(model: LevyModel, x: f64, lambda: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("lambda", lambda)?;
    model.require_positive_drift("prob_never_observed_negative")?;
    let ctx = ScaleContext::new(model, 0.0)?;
    let pl = model.phi(lambda)?;
    clamp_unit(
        "prob_never_observed_negative",
        model.mean() * pl / lambda * ctx.z(x, pl)?,
    )
}

/// `∫₀^∞ (u/r) g(u) P(X_r ∈ du)`, the atom of the Cramér–Lundberg law included.
///
/// By Kendall's identity `(u/r) P(X_r ∈ du)` is the density in `r` of the first
/// passage time above `u`. `tilt` is the exponential growth rate of `g`, used
/// to place the upper integration limit for the Gaussian case.
fn kendall_integral<G: Fn(f64) -> f64>(
    law: &TransitionDensity,
    r: f64,
    g: G,
    tilt: f64,
    breaks: &[f64],
    sigma2: f64,
) -> f64 {
    let (lo, hi) = law.effective_support();
    let (lo, hi) = if law.atom_mass > 0.0 {
        (lo.max(0.0), hi)
    } else {
        // Gaussian tilted by e^{tilt·u} is again Gaussian with shifted mean.
        let shift = tilt * sigma2 * r;
        (0.0, (hi + shift).max(0.0))
    };
    let mut total = 0.0;
    if hi > lo {
        total = integrate_with_breaks(|u| u / r * law.density(u) * g(u), lo, hi, breaks, 1e-15, 1e-11).value;
    }
    if law.atom_mass > 0.0 && law.atom_location > 0.0 {
        total += law.atom_location / r * law.atom_mass * g(law.atom_location);
    }
    total
}

fn sigma2(model: &LevyModel) -> f64 {
    match *model {
        LevyModel::BrownianRisk { sigma, .. } => sigma * sigma,
        _ => 0.0,
    }
}

/// `Γ_λ(r) = ∫₀^∞ e^{Φ_λ z} (z/r) P(X_r ∈ dz)`.
pub fn gamma_lambda(model: LevyModel, lambda: f64, r: f64) -> Result<f64> {
    ensure_positive("r", r)?;
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("lambda must be >= 0, got {lambda}")));
    }
    let pl = model.phi(lambda)?;
    let law = model.transition(r)?;
    Ok(kendall_integral(&law, r, |u| (pl * u).exp(), pl, &[], sigma2(&model)))
}

/// `Λ′(x, r) = ∫₀^∞ W′(x + z) (z/r) P(X_r ∈ dz)`.
///
/// For `x < 0` and a process of bounded variation, `W′` carries the mass
/// `W(0)` at `z = −x`. Its pairing with the density of `X_r` is included here;
/// its pairing with the atom of `X_r` is a point mass in `r`, returned by
/// [`lambda_prime_atom`]. Together they give
/// `∫ e^{−pr} Λ′(x, dr) + W(x) = Φ_p Z(x, Φ_p)/p` on the whole line.
pub fn lambda_prime(model: LevyModel, x: f64, r: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("r", r)?;
    model.require_positive_drift("lambda_prime")?;
    let ctx = ScaleContext::new(model, 0.0)?;
    let law = model.transition(r)?;
    let g = |u: f64| {
        if x + u > 0.0 {
            ctx.w_prime_unchecked(x + u)
        } else {
            0.0
        }
    };
    let mut v = kendall_integral(&law, r, g, 0.0, &[-x], sigma2(&model));
    if x < 0.0 && ctx.w0() > 0.0 {
        v += ctx.w0() * (-x / r) * law.density(-x);
    }
    Ok(v)
}

/// Point mass `(r₀, m)` of `Λ′(x, ·)`: for the Cramér–Lundberg model and `x < 0`,
/// the path climbs `−x` without a claim with probability `e^{−η(−x)/c}`.
pub fn lambda_prime_atom(model: LevyModel, x: f64) -> Result<Option<(f64, f64)>> {
    ensure_finite("x", x)?;
    model.require_positive_drift("lambda_prime_atom")?;
    Ok(match model {
        LevyModel::CramerLundbergExp { c, eta, .. } if x < 0.0 => {
            let r0 = -x / c;
            Some((r0, ScaleContext::new(model, 0.0)?.w0() * (-eta * r0).exp()))
        }
        _ => None,
    })
}

/// Law of `O_{∞,λ}` under `P_x`: an atom at zero plus a density on `(0, ∞)`.
#[derive(Debug, Clone, Copy)]
pub struct OccupationLaw {
    pub model: LevyModel,
    pub x: f64,
    pub lambda: f64,
    /// `P_x(O_{∞,λ} = 0) = P_x(T₀⁻ = ∞)`.
    pub atom_at_zero: f64,
    ctx: ScaleContext,
    phi_lambda: f64,
}

/// Builds the law of the infinite-horizon Poissonian occupation time.
pub fn occupation_law(model: LevyModel, x: f64, lambda: f64) -> Result<OccupationLaw> {
    let atom_at_zero = prob_never_observed_negative(model, x, lambda)?;
    Ok(OccupationLaw {
        model,
        x,
        lambda,
        atom_at_zero,
        ctx: ScaleContext::new(model, 0.0)?,
        phi_lambda: model.phi(lambda)?,
    })
}

impl OccupationLaw {
    /// `M(u) = ∫_{[u,∞)} e^{−Φ_λ(y−u)} W(x + dy)`, the jump of `W` at 0 included.
    fn tail_weight(&self, u: f64) -> f64 {
        let (_, b) = self.ctx.coeffs;
        let z = self.ctx.zeta_q;
        let pl = self.phi_lambda;
        let smooth = -b * z / (pl + z);
        if self.x < 0.0 && u <= -self.x {
            (-pl * (-self.x - u)).exp() * (self.ctx.w0() + smooth)
        } else {
            smooth * (-z * (self.x + u)).exp()
        }
    }

    /// Density of `O_{∞,λ}` at `r > 0`.
    ///
    /// Evaluated as `E[X₁] Φ_λ ∫ (u/r) M(u) P(X_r ∈ du)`, which has the same
    /// Laplace transform in `r` as the `Γ_λ`/`Λ′` representation but a positive
    /// integrand; the latter subtracts two terms growing like `e^{λr}` and
    /// loses all accuracy beyond moderate `r`. See [`Self::density_literal`].
    pub fn density(&self, r: f64) -> Result<f64> {
        ensure_positive("r", r)?;
        let law = self.model.transition(r)?;
        let v = kendall_integral(&law, r, |u| self.tail_weight(u), 0.0, &[-self.x], sigma2(&self.model));
        Ok((self.model.mean() * self.phi_lambda * v).max(0.0))
    }

    /// Density through `Γ_λ`, `Λ′` and their convolution, term by term.
    ///
    /// Only reliable for small `r` because of cancellation; kept as an
    /// independent cross-check of [`Self::density`].
    pub fn density_literal(&self, r: f64) -> Result<f64> {
        ensure_positive("r", r)?;
        let m = self.model;
        let e = m.mean();
        let pl = self.phi_lambda;
        let lead = e * pl / self.lambda
            * gamma_lambda(m, self.lambda, r)?
            * (pl * self.ctx.z(self.x, pl)? - self.lambda * self.ctx.w(self.x));
        // s = r(1 − cos πt)/2 absorbs the inverse-square-root endpoint behaviour
        // of both factors.
        let conv = integrate(
            |t| {
                let s = 0.5 * r * (1.0 - (std::f64::consts::PI * t).cos());
                let ds = 0.5 * r * std::f64::consts::PI * (std::f64::consts::PI * t).sin();
                if s <= 0.0 || s >= r {
                    return 0.0;
                }
                let g = gamma_lambda(m, self.lambda, r - s).unwrap_or(f64::NAN);
                let l = lambda_prime(m, self.x, s).unwrap_or(f64::NAN);
                g * l * ds
            },
            0.0,
            1.0,
            1e-12,
            1e-9,
        )
        .value;
        let mut v = lead - e * pl * conv;
        if let Some((r0, mass)) = lambda_prime_atom(m, self.x)? {
            if r > r0 {
                v -= e * pl * gamma_lambda(m, self.lambda, r - r0)? * mass;
            }
        }
        if !v.is_finite() {
            return Err(Error::Numerical(format!("literal density at r = {r} is {v}")));
        }
        if v < 0.0 {
            if v < -1e-9 {
                return Err(Error::Numerical(format!("literal density at r = {r} is {v}")));
            }
            log::warn!("clamping literal occupation density {v} at r = {r} to 0");
            return Ok(0.0);
        }
        Ok(v)
    }

    /// Density on a grid, evaluated point-wise in parallel.
    pub fn density_grid(&self, rs: &[f64]) -> Result<Vec<f64>> {
        rs.par_iter().map(|&r| self.density(r)).collect()
    }

    /// `P_x(O_{∞,λ} ∈ (r0, r1])` for `0 ≤ r0 < r1 ≤ ∞`, excluding the atom.
    pub fn mass_between(&self, r0: f64, r1: f64) -> Result<f64> {
        if !(r0 >= 0.0 && r1 > r0) {
            return Err(Error::Input(format!("need 0 <= r0 < r1, got ({r0}, {r1})")));
        }
        // r = t² removes the 1/√r behaviour of the Brownian density at 0.
        let f = |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            2.0 * t * self.density(t * t).unwrap_or(f64::NAN)
        };
        let v = if r1.is_finite() {
            integrate(f, r0.sqrt(), r1.sqrt(), 1e-11, 1e-9).value
        } else {
            integrate_to_inf(f, r0.sqrt(), 1e-11, 1e-9).value
        };
        if v.is_nan() {
            return Err(Error::Numerical("density evaluation failed".into()));
        }
        Ok(v)
    }

    /// Exponential decay rate of the density, `−min ψ`.
    pub fn tail_rate(&self) -> f64 {
        -self.model.psi_minimum().1
    }

    /// A point beyond which the density carries mass of order `tol`.
    pub fn tail_r_max(&self, tol: f64) -> f64 {
        let rate = self.tail_rate().max(1e-12);
        // Add a margin for the polynomial prefactor of the tail.
        (1.0 / tol).ln() / rate * 1.5 + 1.0
    }
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

    #[test]
    fn joint_lt_examples() {
        assert_eq!(joint_lt_upcross(bm(), 1.0, 1.0, 0.3, 2.0, 2.0).unwrap(), 1.0);
        let v = joint_lt_upcross(bm(), 0.0, 1.0, 0.0, 2.0, 2.0).unwrap();
        assert!((v - 3.0 / (4.0 - (-1f64).exp())).abs() < 1e-13);
        for m in [bm(), cl()] {
            let q = 0.4;
            let phi = m.phi(q).unwrap();
            let v = joint_lt_upcross(m, -0.5, 1.5, q, 0.0, 1.3).unwrap();
            assert!((v - (-phi * 2.0).exp()).abs() < 1e-12);
        }
        assert!(joint_lt_upcross(bm(), 2.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lt_inf_examples() {
        assert!((lt_occupation_inf(bm(), 0.0, 2.0, 2.0).unwrap() - 0.75).abs() < 1e-13);
        assert!((lt_occupation_inf(bm(), 0.0, 1e-8, 2.0).unwrap() - 1.0).abs() < 1e-6);
        let v = lt_occupation_inf(bm(), 0.0, 1e6, 2.0).unwrap();
        assert!((v - 0.5).abs() < 1e-3);
        let neg = LevyModel::brownian(-0.1, 1.0).unwrap();
        assert!(matches!(lt_occupation_inf(neg, 0.0, 1.0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn atom_example() {
        let law = occupation_law(bm(), 0.0, 2.0).unwrap();
        assert!((law.atom_at_zero - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gamma_lambda_matches_midpoint_rule() {
        // Brownian μ = 1, σ² = 2, λ = 2, r = 1: integrand e^{z} z φ(z; 1, 2).
        let v = gamma_lambda(bm(), 2.0, 1.0).unwrap();
        let h = 1e-4;
        let mut s = 0.0;
        let mut z: f64 = 0.5 * h;
        while z < 40.0 {
            s += z.exp() * z * (-(z - 1.0) * (z - 1.0) / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt();
            z += h;
        }
        assert!((v - s * h).abs() < 1e-5 * s * h);
    }

    #[test]
    fn stable_and_literal_densities_agree_for_small_r() {
        for (m, x) in [(bm(), 0.0), (bm(), 0.7), (cl(), 0.5), (cl(), -0.4)] {
            let law = occupation_law(m, x, 1.5).unwrap();
            for r in [0.2, 0.6, 1.0] {
                let a = law.density(r).unwrap();
                let b = law.density_literal(r).unwrap();
                assert!((a - b).abs() < 1e-6 * (1.0 + a), "{m:?} x={x} r={r}: {a} vs {b}");
            }
        }
    }
}
