//! Scale functions in two-exponential form.
//!
//! For both supported models `ψ(θ) − q` has exactly two real roots `Φ_q ≥ 0`
//! and `−ζ_q ≤ 0`, and `1/(ψ(θ) − q)` decomposes into simple fractions. Hence
//!
//! ```text
//! W_q(x) = A e^{Φ_q x} + B e^{−ζ_q x},   A = 1/ψ′(Φ_q),  B = 1/ψ′(−ζ_q),
//! ```
//!
//! and every other member of the family (`Z_q`, `Z̃_q`, second-generation
//! convolutions) reduces to finite sums of exponentials. All formulas below are
//! written so that no `e^{θx}` growth has to cancel against another large term.

use crate::error::{ensure_finite, ensure_nonnegative, Error, Result};
use crate::model::LevyModel;

/// Relative width of the band in which `Z̃` switches to its confluent form.
pub const EPS_MERGE: f64 = 1e-8;

/// Cached roots and coefficients of `W_q` for one model and killing rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleContext {
    pub model: LevyModel,
    pub q: f64,
    pub phi_q: f64,
    pub zeta_q: f64,
    /// `(A, B)` with `W_q(x) = A e^{Φ_q x} + B e^{−ζ_q x}` for `x ≥ 0`.
    pub coeffs: (f64, f64),
}

/// `∫₀^t e^{k u} du`, accurate for small `|k t|`.
fn exp_integral(k: f64, t: f64) -> f64 {
    if k == 0.0 {
        t
    } else {
        (k * t).exp_m1() / k
    }
}

/// `∫₀^t e^{k1 u} e^{k2 (x − u)} du` without forming overflowing intermediates.
fn exp_convolution(k1: f64, k2: f64, x: f64, t: f64) -> f64 {
    let d = k1 - k2;
    if d > 0.0 {
        (k1 * t + k2 * (x - t)).exp() * (-(-d * t).exp_m1()) / d
    } else {
        (k2 * x).exp() * exp_integral(d, t)
    }
}

impl ScaleContext {
    pub fn new(model: LevyModel, q: f64) -> Result<Self> {
        model.validate()?;
        ensure_nonnegative("q", q)?;
        let phi_q = model.phi(q)?;
        let zeta_q = model.zeta(q)?;
        let a = 1.0 / model.psi_prime_unchecked(phi_q);
        let b = 1.0 / model.psi_prime_unchecked(-zeta_q);
        let ctx = ScaleContext {
            model,
            q,
            phi_q,
            zeta_q,
            coeffs: (a, b),
        };
        ctx.self_check()?;
        Ok(ctx)
    }

    /// Cheap consistency checks of the partial-fraction data: residues of the
    /// right sign and `W_q(0)` equal to `0` (Brownian) or `1/c` (Cramér–Lundberg).
    fn self_check(&self) -> Result<()> {
        let (a, b) = self.coeffs;
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b < 0.0) {
            return Err(Error::Numerical(format!(
                "scale coefficients A = {a}, B = {b} at q = {}",
                self.q
            )));
        }
        let expected = match self.model {
            LevyModel::BrownianRisk { .. } => 0.0,
            LevyModel::CramerLundbergExp { c, .. } => 1.0 / c,
        };
        let scale = a.abs().max(b.abs());
        if ((a + b) - expected).abs() > 1e-9 * scale {
            return Err(Error::Numerical(format!(
                "W_q(0) = {} but expected {expected}",
                a + b
            )));
        }
        Ok(())
    }

    /// Context for the same model at killing rate `q + s`.
    pub fn shifted(&self, s: f64) -> Result<Self> {
        ScaleContext::new(self.model, self.q + s)
    }

    /// `ψ_q(θ) = ψ(θ) − q`.
    pub fn psi_q(&self, theta: f64) -> Result<f64> {
        Ok(self.model.psi(theta)? - self.q)
    }

    pub fn psi_q_prime(&self, theta: f64) -> Result<f64> {
        self.model.psi_prime(theta)
    }

    /// `W_q(0)`: 0 for unbounded-variation paths, `1/c` otherwise.
    pub fn w0(&self) -> f64 {
        match self.model {
            LevyModel::BrownianRisk { .. } => 0.0,
            _ => self.coeffs.0 + self.coeffs.1,
        }
    }

    /// `W_q(x)`, zero on the negative half-line.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let (a, b) = self.coeffs;
        a * (self.phi_q * x).exp() + b * (-self.zeta_q * x).exp()
    }

    /// `W_q′(x)` for `x > 0`.
    pub fn w_prime(&self, x: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        if x <= 0.0 {
            return Err(Error::Input(format!("w_prime needs x > 0, got {x}")));
        }
        Ok(self.w_prime_unchecked(x))
    }

    pub(crate) fn w_prime_unchecked(&self, x: f64) -> f64 {
        let (a, b) = self.coeffs;
        a * self.phi_q * (self.phi_q * x).exp() - b * self.zeta_q * (-self.zeta_q * x).exp()
    }

    /// `∫₀^x W_q(y) dy` for `x ≥ 0`.
    pub fn w_integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (a, b) = self.coeffs;
        a * exp_integral(self.phi_q, x) + b * exp_integral(-self.zeta_q, x)
    }

    /// `D(θ) = A(θ + ζ_q) + B(θ − Φ_q) = (θ − Φ_q)(θ + ζ_q)/ψ_q(θ)`, positive for `θ ≥ 0`.
    fn denom(&self, theta: f64) -> f64 {
        let (a, b) = self.coeffs;
        a * (theta + self.zeta_q) + b * (theta - self.phi_q)
    }

    fn check_z_theta(&self, theta: f64) -> Result<f64> {
        ensure_finite("theta", theta)?;
        let d = self.denom(theta);
        if d <= 0.0 || theta <= self.model.domain_lower() {
            return Err(Error::Input(format!(
                "theta = {theta} is outside the domain of Z_q"
            )));
        }
        Ok(d)
    }

    fn z_numerator(&self, x: f64, theta: f64) -> f64 {
        let (a, b) = self.coeffs;
        a * (theta + self.zeta_q) * (self.phi_q * x).exp()
            + b * (theta - self.phi_q) * (-self.zeta_q * x).exp()
    }

    /// `Z_q(x, θ)`; `e^{θx}` for `x < 0`.
    pub fn z(&self, x: f64, theta: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        let d = self.check_z_theta(theta)?;
        if x < 0.0 {
            return Ok((theta * x).exp());
        }
        Ok(self.z_numerator(x, theta) / d)
    }

    /// `Z_q(x) = Z_q(x, 0)`.
    pub fn z0(&self, x: f64) -> Result<f64> {
        self.z(x, 0.0)
    }

    /// `∂Z_q(x, θ)/∂θ`.
    ///
    /// The two-exponential form is regular at `θ = 0`, so unlike the textbook
    /// closed forms no exclusion of that point is needed.
    pub fn z_prime_theta(&self, x: f64, theta: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        let d = self.check_z_theta(theta)?;
        if x < 0.0 {
            return Ok(x * (theta * x).exp());
        }
        let n = self.z_numerator(x, theta);
        Ok((self.w(x) * d - n * self.w0()) / (d * d))
    }

    /// `Z̃_q(x, α, β) = (ψ_q(α)Z_q(x, β) − ψ_q(β)Z_q(x, α))/(α − β)`, exactly symmetric.
    pub fn z_tilde(&self, x: f64, alpha: f64, beta: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        let da = self.check_z_theta(alpha)?;
        let db = self.check_z_theta(beta)?;
        if x >= 0.0 {
            let (a, b) = self.coeffs;
            let up = a * (self.phi_q * x).exp() * ((alpha + self.zeta_q) * (beta + self.zeta_q));
            let down = b * (-self.zeta_q * x).exp() * ((alpha - self.phi_q) * (beta - self.phi_q));
            return Ok((up + down) / (da * db));
        }
        if (alpha - beta).abs() <= EPS_MERGE * (1.0 + alpha.max(beta)) {
            let m = 0.5 * (alpha + beta);
            let e = (m * x).exp();
            return Ok(self.psi_q_prime(m)? * e - self.psi_q(m)? * x * e);
        }
        let pa = self.psi_q(alpha)?;
        let pb = self.psi_q(beta)?;
        Ok((pa * (beta * x).exp() - pb * (alpha * x).exp()) / (alpha - beta))
    }

    /// Confluent value `ψ_q′(α)Z_q(x, α) − ψ_q(α)Z_q′(x, α)` written out term by term.
    pub fn z_tilde_confluent(&self, x: f64, alpha: f64) -> Result<f64> {
        Ok(self.psi_q_prime(alpha)? * self.z(x, alpha)?
            - self.psi_q(alpha)? * self.z_prime_theta(x, alpha)?)
    }

    /// Second-generation scale function `𝒲_a^{(q, s)}(x)` with `shifted` the
    /// context at rate `q + s`:
    /// `W_q(x) + s ∫_a^x W_{q+s}(x − y) W_q(y) dy`.
    pub fn script_w_with(&self, shifted: &ScaleContext, a: f64, x: f64) -> f64 {
        let s = shifted.q - self.q;
        let lower = a.max(0.0);
        if x <= lower || s == 0.0 {
            return self.w(x);
        }
        let (a1, b1) = shifted.coeffs;
        let (a0, b0) = self.coeffs;
        let t = x - lower;
        // Substituting u = x − y turns each product of exponentials into
        // ∫₀^t e^{k1 u} e^{k2 (x − u)} du.
        let k1 = [shifted.phi_q, -shifted.zeta_q];
        let c1 = [a1, b1];
        let k2 = [self.phi_q, -self.zeta_q];
        let c2 = [a0, b0];
        let mut conv = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                conv += c1[i] * c2[j] * exp_convolution(k1[i], k2[j], x, t);
            }
        }
        self.w(x) + s * conv
    }

    /// `𝒲_a^{(q, s)}(x)`; builds the context at `q + s`.
    pub fn script_w(&self, s: f64, a: f64, x: f64) -> Result<f64> {
        ensure_finite("a", a)?;
        ensure_finite("x", x)?;
        if self.q + s < 0.0 {
            return Err(Error::Input(format!("q + s must be >= 0, got {}", self.q + s)));
        }
        if s == 0.0 {
            return Ok(self.w(x));
        }
        Ok(self.script_w_with(&self.shifted(s)?, a, x))
    }
}

/// Composite `W̃_q^{(p,λ)}(x, a) = λ𝒲_x^{(q,p)}(x+a)W_{q+λ}(a) − p𝒲_x^{(q,λ)}(x+a)W_{p+q}(a)`.
pub fn w_tilde(model: LevyModel, q: f64, p: f64, lambda: f64, x: f64, a: f64) -> Result<f64> {
    let ctx = ScaleContext::new(model, q)?;
    let cp = ctx.shifted(p)?;
    let cl = ctx.shifted(lambda)?;
    Ok(w_tilde_with(&ctx, &cp, &cl, x, a))
}

pub(crate) fn w_tilde_with(
    ctx: &ScaleContext,
    cp: &ScaleContext,
    cl: &ScaleContext,
    x: f64,
    a: f64,
) -> f64 {
    let p = cp.q - ctx.q;
    let lambda = cl.q - ctx.q;
    lambda * ctx.script_w_with(cp, x, x + a) * cl.w(a) - p * ctx.script_w_with(cl, x, x + a) * cp.w(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(1.0, 1.0, 2.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn w_examples() {
        let ctx = ScaleContext::new(bm(), 0.0).unwrap();
        // (1/μ)(1 − e^{−2μx/σ²}) at x = ln 2.
        assert!(close(ctx.w(2f64.ln()), 0.5, 1e-14));
        assert_eq!(ctx.w(-1.0), 0.0);
        assert_eq!(ctx.w0(), 0.0);
        let c = ScaleContext::new(cl(), 0.0).unwrap();
        assert!(close(c.w(0.0), 1.0, 1e-14));
        // (1/(c − η/α))(1 − (η/(cα))e^{(η/c − α)x}).
        for x in [0.3f64, 1.0, 4.0] {
            let oracle = 2.0 * (1.0 - 0.5 * (-x).exp());
            assert!(close(c.w(x), oracle, 1e-13));
        }
    }

    #[test]
    fn w_prime_examples() {
        let ctx = ScaleContext::new(bm(), 0.0).unwrap();
        assert!(close(ctx.w_prime(2f64.ln()).unwrap(), 0.5, 1e-14));
        assert!(ctx.w_prime(0.0).is_err());
        for m in [bm(), cl()] {
            let ctx = ScaleContext::new(m, 0.7).unwrap();
            for x in [0.5, 1.0] {
                let h = 1e-5;
                let fd = (ctx.w(x + h) - ctx.w(x - h)) / (2.0 * h);
                assert!(close(ctx.w_prime(x).unwrap(), fd, 1e-7));
            }
        }
    }

    #[test]
    fn z_examples() {
        for m in [bm(), cl()] {
            let ctx = ScaleContext::new(m, 0.5).unwrap();
            assert!(close(ctx.z(-2.0, 0.5).unwrap(), (-1f64).exp(), 1e-15));
            for x in [0.0, 0.7, 3.0] {
                let v = ctx.z(x, ctx.phi_q).unwrap();
                assert!(close(v, (ctx.phi_q * x).exp(), 1e-13));
            }
        }
        let ctx = ScaleContext::new(bm(), 0.0).unwrap();
        assert!(close(ctx.z(1.0, 1.0).unwrap(), 2.0 - (-1f64).exp(), 1e-14));
    }

    #[test]
    fn z_matches_definition_by_quadrature() {
        for m in [bm(), cl()] {
            let ctx = ScaleContext::new(m, 0.4).unwrap();
            for (x, theta) in [(0.8, 0.3), (2.0, 1.7), (1.5, 0.0)] {
                let integral = integrate(|y| (-theta * y).exp() * ctx.w(y), 0.0, x, 1e-14, 1e-14).value;
                let direct = (theta * x).exp() * (1.0 - ctx.psi_q(theta).unwrap() * integral);
                assert!(close(ctx.z(x, theta).unwrap(), direct, 1e-12));
            }
            // Z_q(x) = 1 + q ∫₀^x W_q.
            let x = 1.3;
            assert!(close(ctx.z0(x).unwrap(), 1.0 + ctx.q * ctx.w_integral(x), 1e-13));
        }
    }

    #[test]
    fn z_prime_theta_examples() {
        let ctx = ScaleContext::new(bm(), 0.0).unwrap();
        assert!(ctx.z_prime_theta(0.0, 0.8).unwrap().abs() < 1e-15);
        assert!(close(ctx.z_prime_theta(1.0, 1.0).unwrap(), 1.0 - (-1f64).exp(), 1e-14));
        assert!(close(ctx.z_prime_theta(-1.0, 1.0).unwrap(), -(-1f64).exp(), 1e-15));
        for m in [bm(), cl()] {
            let ctx = ScaleContext::new(m, 0.3).unwrap();
            for (x, t) in [(0.5, 0.2), (2.0, 1.5), (1.0, 0.0)] {
                let h = 1e-5;
                let fd = (ctx.z(x, t + h).unwrap() - ctx.z(x, t - h).unwrap()) / (2.0 * h);
                assert!(close(ctx.z_prime_theta(x, t).unwrap(), fd, 1e-7));
            }
        }
    }

    #[test]
    fn z_tilde_examples() {
        let ctx = ScaleContext::new(bm(), 0.0).unwrap();
        for (a, b) in [(0.5, 2.0), (1.0, 3.0), (0.0, 0.7)] {
            assert!(close(ctx.z_tilde(0.0, a, b).unwrap(), 1.0 + a + b, 1e-13));
        }
        assert!(close(ctx.z_tilde(1.0, 1.0, 1.0).unwrap(), 4.0 - (-1f64).exp(), 1e-13));
        for m in [bm(), cl()] {
            let ctx = ScaleContext::new(m, 0.25).unwrap();
            for x in [-1.5, 0.0, 0.9, 4.0] {
                let (a, b) = (0.6, 2.1);
                assert_eq!(ctx.z_tilde(x, a, b).unwrap(), ctx.z_tilde(x, b, a).unwrap());
                let lit = (ctx.psi_q(a).unwrap() * ctx.z(x, b).unwrap()
                    - ctx.psi_q(b).unwrap() * ctx.z(x, a).unwrap())
                    / (a - b);
                assert!(close(ctx.z_tilde(x, a, b).unwrap(), lit, 1e-12));
                let conf = ctx.z_tilde_confluent(x, a).unwrap();
                assert!(close(ctx.z_tilde(x, a, a).unwrap(), conf, 1e-12));
            }
        }
    }

    #[test]
    fn script_w_examples() {
        let c = ScaleContext::new(cl(), 0.0).unwrap();
        let c1 = c.shifted(1.0).unwrap();
        assert_eq!(c.script_w(1.0, 2.0, 1.5).unwrap(), c.w(1.5));
        assert_eq!(c.script_w(0.0, 0.0, 1.5).unwrap(), c.w(1.5));
        // With a = 0 both lines of the definition collapse to W_{q+s}.
        assert!(close(c.script_w(1.0, 0.0, 1.0).unwrap(), c1.w(1.0), 1e-12));
        for (a, x) in [(0.3, 1.2), (1.0, 2.5), (0.0, 0.4)] {
            let first = c.w(x)
                + integrate(|y| c1.w(x - y) * c.w(y), a, x, 1e-14, 1e-13).value;
            let second = c1.w(x) - integrate(|y| c1.w(x - y) * c.w(y), 0.0, a, 1e-14, 1e-13).value;
            let got = c.script_w(1.0, a, x).unwrap();
            assert!(close(got, first, 1e-10));
            assert!(close(got, second, 1e-9));
        }
    }

    #[test]
    fn negative_shift_is_allowed() {
        let c = ScaleContext::new(bm(), 2.0).unwrap();
        let lower = c.shifted(-1.5).unwrap();
        let (a, x) = (0.2, 1.1);
        let direct = c.w(x) - 1.5 * integrate(|y| lower.w(x - y) * c.w(y), a, x, 1e-14, 1e-13).value;
        assert!(close(c.script_w(-1.5, a, x).unwrap(), direct, 1e-10));
        assert!(c.script_w(-2.5, a, x).is_err());
    }

    #[test]
    fn w_tilde_limits() {
        let m = cl();
        let (q, p, l) = (0.1, 0.5, 1.0);
        // a → ∞ normalised limit.
        let ctx = ScaleContext::new(m, q).unwrap();
        let cp = ctx.shifted(p).unwrap();
        let clam = ctx.shifted(l).unwrap();
        let a = 50.0;
        let x = 0.7;
        let norm = w_tilde(m, q, p, l, x, a).unwrap() / (cp.w(a) * clam.w(a));
        let lim = l * ctx.z(x, cp.phi_q).unwrap() - p * ctx.z(x, clam.phi_q).unwrap();
        assert!(close(norm, lim, 1e-8));
        // W̃ vanishes at p = λ; the barrier ratio it feeds stays continuous.
        let ratio = |p: f64| w_tilde(m, q, p, l, x, 1.0).unwrap() / w_tilde(m, q, p, l, 2.0, 1.0).unwrap();
        let at = w_tilde(m, q, l, l, x, 1.0).unwrap();
        assert!(at.abs() < 1e-12);
        assert!((ratio(l * (1.0 - 1e-4)) - ratio(l * (1.0 + 1e-4))).abs() < 1e-4);
    }

    #[test]
    fn double_root_context_is_rejected() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        assert!(ScaleContext::new(m, 0.0).is_err());
        assert!(ScaleContext::new(m, 0.1).is_ok());
    }
}
