//! Parisian ruin with exponential-sum, Erlang(2) and Erlang(n) implementation delays.
//!
//! Notation: `ρ^{(p,λ)}` is ruin once an excursion below 0 outlasts a fresh
//! `Exp(p) + Exp(λ)` clock, `ρ^{(n)}_λ` the same with an `Erlang(n, λ)` clock and
//! `T₀⁻` the first Poisson(λ) observation of a negative surplus.
//!
//! Removable singularities (`p = λ`, `p = q + λ`, `θ = Φ_q`, `θ = Φ_λ` in the
//! Erlang recursion) are evaluated through regular closed forms, confluent
//! branches or symmetric bridging across the point, never by dividing two
//! vanishing quantities.

use crate::error::{clamp_unit, ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};
use crate::model::LevyModel;
use crate::occupation::{lt_occupation_inf, prob_never_observed_negative};
use crate::scale::{w_tilde_with, ScaleContext};

/// Full parameter vector of a Parisian identity. Unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParisianQuery {
    pub model: LevyModel,
    pub x: f64,
    pub b: Option<f64>,
    pub a: Option<f64>,
    pub q: f64,
    pub p: f64,
    pub lambda: f64,
    pub theta: f64,
    pub n: usize,
    pub y: f64,
    pub r: f64,
    /// Shift `z` of the delayed scale-function functional.
    pub z: f64,
}

impl ParisianQuery {
    pub fn new(model: LevyModel) -> Self {
        ParisianQuery {
            model,
            x: 0.0,
            b: None,
            a: None,
            q: 0.0,
            p: 1.0,
            lambda: 1.0,
            theta: 0.0,
            n: 1,
            y: 0.0,
            r: 1.0,
            z: 1.0,
        }
    }

    fn b(&self) -> Result<f64> {
        let b = self.b.ok_or_else(|| Error::Input("missing parameter b".into()))?;
        ensure_finite("b", b)?;
        if self.x > b {
            return Err(Error::Input(format!("need x <= b, got x = {}, b = {b}", self.x)));
        }
        Ok(b)
    }

    fn a(&self) -> Result<f64> {
        let a = self.a.ok_or_else(|| Error::Input("missing parameter a".into()))?;
        ensure_nonnegative("a", a)?;
        if self.x < -a {
            return Err(Error::Input(format!("need x >= -a, got x = {}, a = {a}", self.x)));
        }
        Ok(a)
    }

    fn rates(&self) -> Result<()> {
        ensure_finite("x", self.x)?;
        ensure_nonnegative("q", self.q)?;
        ensure_positive("p", self.p)?;
        ensure_positive("lambda", self.lambda)?;
        ensure_nonnegative("theta", self.theta)
    }
}

/// Half-width of the band around a removable point that is bridged by
/// interpolating between its two edges.
const BRIDGE: f64 = 1e-4;

/// Evaluates `f(p)` away from the removable point `p = c`, and linearly
/// interpolates between `f(c ± δ)` inside the band.
fn bridge<F: Fn(f64) -> Result<f64>>(p: f64, c: f64, f: F) -> Result<f64> {
    let d = BRIDGE * (1.0 + c.abs());
    if (p - c).abs() >= d {
        return f(p);
    }
    let lo = f(c - d)?;
    let hi = f(c + d)?;
    let t = (p - (c - d)) / (2.0 * d);
    Ok(lo + t * (hi - lo))
}

/// Central difference in `λ` with one Richardson step.
pub(crate) fn d_dlambda<F: Fn(f64) -> Result<f64>>(f: F, lambda: f64) -> Result<f64> {
    let h = 1e-5 * (1.0 + lambda);
    let d1 = (f(lambda + h)? - f(lambda - h)?) / (2.0 * h);
    let d2 = (f(lambda + 0.5 * h)? - f(lambda - 0.5 * h)?) / h;
    if (d1 - d2).abs() > 1e-6 * (1.0 + d2.abs()) {
        log::warn!("lambda-derivative Richardson disagreement {d1} vs {d2} at lambda = {lambda}");
    }
    Ok((4.0 * d2 - d1) / 3.0)
}

/// `ℰ^{(q,λ)}(x, θ) = λZ_q(x, θ) − ψ_q(θ)Z_q(x, Φ_{λ+q})`.
fn script_e(ctx: &ScaleContext, lambda: f64, phi_lq: f64, x: f64, theta: f64) -> Result<f64> {
    Ok(lambda * ctx.z(x, theta)? - ctx.psi_q(theta)? * ctx.z(x, phi_lq)?)
}

fn check_not_at(name: &str, theta: f64, root: f64, what: &str) -> Result<()> {
    if (theta - root).abs() <= 1e-9 * (1.0 + root) {
        return Err(Error::Pole {
            name: name.into(),
            value: theta,
            detail: format!("removable point theta = {what} = {root}; not evaluated at this entry point"),
        });
    }
    Ok(())
}

/// `P_x(τ₀⁻ < ∞) = 1 − E[X₁]W(x)`.
pub fn classical_ruin_prob(model: LevyModel, x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    model.require_positive_drift("classical_ruin_prob")?;
    let ctx = ScaleContext::new(model, 0.0)?;
    clamp_unit("classical_ruin_prob", 1.0 - model.mean() * ctx.w(x))
}

/// `P_x(T₀⁻ < ∞) = 1 − E[X₁](Φ_λ/λ)Z(x, Φ_λ)`.
pub fn ruin_prob_exp(model: LevyModel, x: f64, lambda: f64) -> Result<f64> {
    Ok(1.0 - prob_never_observed_negative(model, x, lambda)?)
}

/// `P_x(ρ^{(p,λ)} < ∞) = 1 − E[X₁](Φ_λΦ_p/(λp))Z̃(x, Φ_λ, Φ_p)`.
pub fn ruin_prob_sum_exp(model: LevyModel, x: f64, p: f64, lambda: f64) -> Result<f64> {
    Ok(1.0 - lt_occupation_inf(model, x, p, lambda)?)
}

/// `P_x(ρ^{(2)}_λ < ∞) = 1 − E[X₁](Φ_λ²/λ²)Z̃(x, Φ_λ, Φ_λ)`.
pub fn ruin_prob_erlang2(model: LevyModel, x: f64, lambda: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("lambda", lambda)?;
    model.require_positive_drift("ruin_prob_erlang2")?;
    let ctx = ScaleContext::new(model, 0.0)?;
    let pl = model.phi(lambda)?;
    let surv = model.mean() * (pl / lambda) * (pl / lambda) * ctx.z_tilde(x, pl, pl)?;
    clamp_unit("ruin_prob_erlang2", 1.0 - surv)
}

/// `E_x[e^{−qρ + θX_ρ}; ρ < τ_b⁺]` for `ρ = ρ^{(p,λ)}`.
pub fn gs_lt_two_sided(query: &ParisianQuery) -> Result<f64> {
    query.rates()?;
    let b = query.b()?;
    let (m, q, p, l, th) = (query.model, query.q, query.p, query.lambda, query.theta);
    let ctx = ScaleContext::new(m, q)?;
    let phi_l = m.phi(l + q)?;
    let phi_p = m.phi(p + q)?;
    check_not_at("theta", th, phi_l, "Phi_{q+lambda}")?;
    check_not_at("theta", th, phi_p, "Phi_{q+p}")?;
    if query.x == b {
        return Ok(0.0);
    }
    let ratio = ctx.z_tilde(query.x, phi_l, phi_p)? / ctx.z_tilde(b, phi_l, phi_p)?;
    let pre = p / ((ctx.psi_q(th)? - l) * (ctx.psi_q(th)? - p));
    let e_x = script_e(&ctx, l, phi_l, query.x, th)?;
    let e_b = script_e(&ctx, l, phi_l, b, th)?;
    Ok(pre * (e_x - ratio * e_b))
}

/// `ψ_q(θ)/(θ − Φ_q)` in a form that is regular at `θ = Φ_q`.
fn psi_over_gap(ctx: &ScaleContext, theta: f64) -> f64 {
    let (a, b) = ctx.coeffs;
    let d = a * (theta + ctx.zeta_q) + b * (theta - ctx.phi_q);
    (theta + ctx.zeta_q) / d
}

/// Body of the infinite-horizon transform without pole screening.
fn gs_lt_infinite_raw(ctx: &ScaleContext, x: f64, p: f64, lambda: f64, theta: f64) -> Result<f64> {
    let m = ctx.model;
    let q = ctx.q;
    let phi_l = m.phi(lambda + q)?;
    let phi_p = m.phi(p + q)?;
    let pre = p / ((ctx.psi_q(theta)? - lambda) * (ctx.psi_q(theta)? - p));
    let k = psi_over_gap(ctx, theta) * (phi_l - theta) * (phi_p - ctx.phi_q) / p;
    Ok(pre * (script_e(ctx, lambda, phi_l, x, theta)? - k * ctx.z_tilde(x, phi_l, phi_p)?))
}

fn require_infinite_horizon(model: &LevyModel, q: f64, what: &str) -> Result<()> {
    if q > 0.0 {
        Ok(())
    } else {
        model.require_positive_drift(what)
    }
}

/// `E_x[e^{−qρ + θX_ρ}; ρ < ∞]` for `ρ = ρ^{(p,λ)}`.
///
/// The constant `ψ_q(θ)/(θ − Φ_q)` is evaluated in closed form, so `θ = Φ_q` is
/// an ordinary point here.
pub fn gs_lt_infinite(query: &ParisianQuery) -> Result<f64> {
    query.rates()?;
    let (m, q, p, l, th) = (query.model, query.q, query.p, query.lambda, query.theta);
    require_infinite_horizon(&m, q, "gs_lt_infinite")?;
    check_not_at("theta", th, m.phi(l + q)?, "Phi_{q+lambda}")?;
    check_not_at("theta", th, m.phi(p + q)?, "Phi_{q+p}")?;
    let ctx = ScaleContext::new(m, q)?;
    gs_lt_infinite_raw(&ctx, query.x, p, l, th)
}

/// `E_x[e^{−qτ_b⁺}; τ_b⁺ < ρ^{(p,λ)}] = Z̃_q(x, Φ_{λ+q}, Φ_{p+q})/Z̃_q(b, Φ_{λ+q}, Φ_{p+q})`.
pub fn up_cross_before_ruin(query: &ParisianQuery) -> Result<f64> {
    query.rates()?;
    let b = query.b()?;
    crate::occupation::joint_lt_upcross(query.model, query.x, b, query.q, query.p, query.lambda)
}

/// `E_x[e^{−qτ_b⁺}; τ_b⁺ < ρ^{(p,λ)} ∧ τ_{−a}⁻] = W̃_q^{(p,λ)}(x, a)/W̃_q^{(p,λ)}(b, a)`.
///
/// Both composites vanish at `p = λ`; the ratio is bridged across that point.
pub fn up_cross_three_barrier(query: &ParisianQuery) -> Result<f64> {
    query.rates()?;
    let b = query.b()?;
    let a = query.a()?;
    let (m, q, l, x) = (query.model, query.q, query.lambda, query.x);
    if x == b {
        return Ok(1.0);
    }
    let ctx = ScaleContext::new(m, q)?;
    let cl = ctx.shifted(l)?;
    let ratio = |p: f64| -> Result<f64> {
        let cp = ctx.shifted(p)?;
        Ok(w_tilde_with(&ctx, &cp, &cl, x, a) / w_tilde_with(&ctx, &cp, &cl, b, a))
    };
    clamp_unit("up_cross_three_barrier", bridge(query.p, l, ratio)?)
}

/// `ℰ_y^{(q,λ)}(x)` of the Gerber–Shiu density, for `p ≠ λ`.
fn script_e_y(
    ctx: &ScaleContext,
    cp: &ScaleContext,
    cl: &ScaleContext,
    x: f64,
    y: f64,
) -> Result<f64> {
    let p = cp.q - ctx.q;
    let l = cl.q - ctx.q;
    let conv = (ctx.script_w_with(cl, x, x - y) - ctx.script_w_with(cp, x, x - y)) / (l - p);
    let edge = (l * cl.w(-y) - p * cp.w(-y)) / (l - p);
    Ok(l * conv - ctx.z(x, cl.phi_q)? * edge)
}

/// `Σ (c + d·t)e^{kt}` in the depth `t = −y` below 0, stored as `(k, c, d)`.
///
/// For `t ≥ max(0, −x)` every ingredient of the Gerber–Shiu densities is such a
/// sum. The densities are integrable in `y`, so the coefficients of the
/// exponents `k ≥ 0` cancel exactly; summing them in floating point instead
/// leaves residues of order `ε e^{Φ_{q+λ} t}`, so only the decaying part is kept.
#[derive(Debug, Clone, Default)]
struct ExpPoly(Vec<(f64, f64, f64)>);

impl ExpPoly {
    fn push(&mut self, k: f64, c: f64) {
        self.0.push((k, c, 0.0));
    }

    fn add(&mut self, other: &ExpPoly, s: f64) {
        self.0.extend(other.0.iter().map(|&(k, c, d)| (k, s * c, s * d)));
    }

    fn scaled(mut self, s: f64) -> Self {
        for term in &mut self.0 {
            term.1 *= s;
            term.2 *= s;
        }
        self
    }

    fn decaying(&self, t: f64) -> f64 {
        self.0
            .iter()
            .filter(|term| term.0 < 0.0)
            .map(|&(k, c, d)| (c + d * t) * (k * t).exp())
            .sum()
    }

    /// Largest merged coefficient of a non-decaying exponent, relative to the largest coefficient.
    #[cfg(test)]
    fn growing_residue(&self) -> f64 {
        let mut merged: Vec<(f64, f64, f64)> = Vec::new();
        for &(k, c, d) in &self.0 {
            match merged.iter_mut().find(|m| (m.0 - k).abs() <= 1e-12 * (1.0 + k.abs())) {
                Some(m) => {
                    m.1 += c;
                    m.2 += d;
                }
                None => merged.push((k, c, d)),
            }
        }
        let scale = self.0.iter().map(|t| t.1.abs().max(t.2.abs())).fold(0.0, f64::max);
        merged
            .iter()
            .filter(|m| m.0 >= 0.0)
            .map(|m| m.1.abs().max(m.2.abs()))
            .fold(0.0, f64::max)
            / scale
    }
}

/// `W_q(t)` for `t ≥ 0`.
fn w_terms(ctx: &ScaleContext) -> ExpPoly {
    let (a, b) = ctx.coeffs;
    ExpPoly(vec![(ctx.phi_q, a, 0.0), (-ctx.zeta_q, b, 0.0)])
}

/// `𝒲_x^{(q,s)}(x + t)` for `t ≥ max(0, −x)`, `shifted` at rate `q + s`.
fn script_w_terms(base: &ScaleContext, shifted: &ScaleContext, x: f64) -> ExpPoly {
    let s = shifted.q - base.q;
    let lower = x.max(0.0);
    let (a1, b1) = shifted.coeffs;
    let (a0, b0) = base.coeffs;
    let k1 = [shifted.phi_q, -shifted.zeta_q];
    let c1 = [a1, b1];
    let k2 = [base.phi_q, -base.zeta_q];
    let c2 = [a0, b0];
    let mut out = ExpPoly::default();
    for j in 0..2 {
        out.push(k2[j], c2[j] * (k2[j] * x).exp());
    }
    for i in 0..2 {
        for j in 0..2 {
            let w = s * c1[i] * c2[j] / (k1[i] - k2[j]);
            out.push(k1[i], w * (k2[j] * lower + k1[i] * (x - lower)).exp());
            out.push(k2[j], -w * (k2[j] * x).exp());
        }
    }
    out
}

/// [`script_e_y`] as an exponential sum in `t = −y`.
fn script_e_terms(ctx: &ScaleContext, cp: &ScaleContext, cl: &ScaleContext, x: f64) -> Result<ExpPoly> {
    let p = cp.q - ctx.q;
    let l = cl.q - ctx.q;
    let mut out = script_w_terms(ctx, cl, x).scaled(l / (l - p));
    out.add(&script_w_terms(ctx, cp, x), -l / (l - p));
    let z = ctx.z(x, cl.phi_q)?;
    out.add(&w_terms(cl), -z * l / (l - p));
    out.add(&w_terms(cp), z * p / (l - p));
    Ok(out)
}

/// `λ`-derivative of an exponential sum whose terms keep their order in `λ`.
fn d_dlambda_terms<F: Fn(f64) -> Result<ExpPoly>>(f: F, lambda: f64) -> Result<ExpPoly> {
    let h = 1e-5 * (1.0 + lambda);
    let at = f(lambda)?;
    let diff = |h: f64| -> Result<Vec<(f64, f64)>> {
        let (hi, lo) = (f(lambda + h)?, f(lambda - h)?);
        Ok(hi
            .0
            .iter()
            .zip(&lo.0)
            .map(|(u, v)| ((u.0 - v.0) / (2.0 * h), (u.1 - v.1) / (2.0 * h)))
            .collect())
    };
    let (d1, d2) = (diff(h)?, diff(0.5 * h)?);
    Ok(ExpPoly(
        at.0
            .iter()
            .zip(d1.iter().zip(&d2))
            .map(|(&(k, c, _), (u, v))| {
                let dk = (4.0 * v.0 - u.0) / 3.0;
                let dc = (4.0 * v.1 - u.1) / 3.0;
                (k, dc, c * dk)
            })
            .collect(),
    ))
}

/// [`script_e_y_erlang2`] as an exponential sum in `t = −y`.
fn script_e_terms_erlang2(ctx: &ScaleContext, lambda: f64, x: f64) -> Result<ExpPoly> {
    let cl = ctx.shifted(lambda)?;
    let z = ctx.z(x, cl.phi_q)?;
    let mut out = d_dlambda_terms(|l| Ok(script_w_terms(ctx, &ctx.shifted(l)?, x)), lambda)?.scaled(lambda);
    out.add(&w_terms(&cl), -z);
    out.add(&d_dlambda_terms(|l| Ok(w_terms(&ctx.shifted(l)?)), lambda)?, -z * lambda);
    Ok(out)
}

fn gs_density_raw(query: &ParisianQuery, b: f64) -> Result<f64> {
    let (m, q, p, l, x, y) = (query.model, query.q, query.p, query.lambda, query.x, query.y);
    let ctx = ScaleContext::new(m, q)?;
    let cp = ctx.shifted(p)?;
    let cl = ctx.shifted(l)?;
    let ratio = ctx.z_tilde(x, cl.phi_q, cp.phi_q)? / ctx.z_tilde(b, cl.phi_q, cp.phi_q)?;
    if x < 0.0 && y > x {
        return Ok(p * (script_e_y(&ctx, &cp, &cl, x, y)? - ratio * script_e_y(&ctx, &cp, &cl, b, y)?));
    }
    let mut e = script_e_terms(&ctx, &cp, &cl, x)?;
    e.add(&script_e_terms(&ctx, &cp, &cl, b)?, -ratio);
    Ok(p * e.decaying(-y))
}

/// Density in `y ≤ 0` of `E_x[e^{−qρ}; X_ρ ∈ dy, ρ < τ_b⁺]` for `ρ = ρ^{(p,λ)}`, `p ≠ λ`.
pub fn gerber_shiu_density(query: &ParisianQuery) -> Result<f64> {
    query.rates()?;
    let b = query.b()?;
    ensure_finite("y", query.y)?;
    if query.y > 0.0 {
        return Err(Error::Input(format!("need y <= 0, got {}", query.y)));
    }
    if query.p == query.lambda {
        return Err(Error::UseErlang2("gs_density_e2"));
    }
    if query.x == b {
        return Ok(0.0);
    }
    let v = bridge(query.p, query.lambda, |p| {
        gs_density_raw(&ParisianQuery { p, ..*query }, b)
    })?;
    nonnegative("gerber_shiu_density", v)
}

fn nonnegative(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v < -1e-9 {
        return Err(Error::Numerical(format!("{name} = {v}")));
    }
    Ok(v.max(0.0))
}

/// `E_x[e^{−p·O_{e_q,λ}}]` with `e_q` an independent `Exp(q)` horizon.
pub fn lt_occupation_exp_horizon(model: LevyModel, x: f64, p: f64, q: f64, lambda: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_positive("q", q)?;
    ensure_positive("lambda", lambda)?;
    ensure_nonnegative("p", p)?;
    if p == 0.0 {
        return Ok(1.0);
    }
    let ctx = ScaleContext::new(model, q)?;
    let phi_l = model.phi(q + lambda)?;
    let phi_p = model.phi(p + q)?;
    let k = q * phi_l * (phi_p - ctx.phi_q) / (p * ctx.phi_q);
    let inner = script_e(&ctx, lambda, phi_l, x, 0.0)? - k * ctx.z_tilde(x, phi_l, phi_p)?;
    clamp_unit(
        "lt_occupation_exp_horizon",
        1.0 - p / ((lambda + q) * (p + q)) * inner,
    )
}

/// Continuous-monitoring limit `λ → ∞` of [`lt_occupation_exp_horizon`].
pub fn lt_occupation_exp_horizon_continuous(model: LevyModel, x: f64, p: f64, q: f64) -> Result<f64> {
    ensure_positive("q", q)?;
    ensure_positive("p", p)?;
    let ctx = ScaleContext::new(model, q)?;
    let phi_p = model.phi(p + q)?;
    let k = q * (phi_p - ctx.phi_q) / (p * ctx.phi_q);
    Ok(1.0 - p / (p + q) * (ctx.z0(x)? - k * ctx.z(x, phi_p)?))
}

/// Names accepted by [`erlang2_identities`].
pub const ERLANG2_IDENTITIES: [&str; 4] = [
    "gs_density_e2",
    "gs_lt_two_sided_e2",
    "gs_lt_infinite_e2",
    "up_cross_e2",
];

/// `ℰ_y^λ(x) = λ∂_λ𝒲_x^{(q,λ)}(x − y) − Z_q(x, Φ_{λ+q})(W_{q+λ}(−y) + λ∂_λW_{q+λ}(−y))`.
fn script_e_y_erlang2(ctx: &ScaleContext, lambda: f64, x: f64, y: f64) -> Result<f64> {
    let dw_conv = d_dlambda(|l| Ok(ctx.script_w_with(&ctx.shifted(l)?, x, x - y)), lambda)?;
    let dw_edge = d_dlambda(|l| Ok(ctx.shifted(l)?.w(-y)), lambda)?;
    let cl = ctx.shifted(lambda)?;
    Ok(lambda * dw_conv - ctx.z(x, cl.phi_q)? * (cl.w(-y) + lambda * dw_edge))
}

/// Erlang(2, λ) versions of the Parisian identities (`p = λ`).
///
/// - `gs_density_e2`: density in `y` of `E_x[e^{−qρ}; X_ρ ∈ dy, ρ < τ_b⁺]`;
/// - `gs_lt_two_sided_e2`: `E_x[e^{−qρ + θX_ρ}; ρ < τ_b⁺]`;
/// - `gs_lt_infinite_e2`: `E_x[e^{−qρ + θX_ρ}; ρ < ∞]`;
/// - `up_cross_e2`: `E_x[e^{−qτ_b⁺}; τ_b⁺ < ρ]`;
///
/// all with `ρ = ρ^{(2)}_λ`; `query.p` is ignored.
pub fn erlang2_identities(name: &str, query: &ParisianQuery) -> Result<f64> {
    let qe = ParisianQuery { p: query.lambda, ..*query };
    match name {
        "gs_lt_two_sided_e2" => gs_lt_two_sided(&qe),
        "gs_lt_infinite_e2" => gs_lt_infinite(&qe),
        "up_cross_e2" => up_cross_before_ruin(&qe),
        "gs_density_e2" => {
            qe.rates()?;
            let b = qe.b()?;
            ensure_finite("y", qe.y)?;
            if qe.y > 0.0 {
                return Err(Error::Input(format!("need y <= 0, got {}", qe.y)));
            }
            if qe.x == b {
                return Ok(0.0);
            }
            let ctx = ScaleContext::new(qe.model, qe.q)?;
            let pl = qe.model.phi(qe.lambda + qe.q)?;
            let ratio = ctx.z_tilde(qe.x, pl, pl)? / ctx.z_tilde(b, pl, pl)?;
            let v = if qe.x < 0.0 && qe.y > qe.x {
                qe.lambda
                    * (script_e_y_erlang2(&ctx, qe.lambda, qe.x, qe.y)?
                        - ratio * script_e_y_erlang2(&ctx, qe.lambda, b, qe.y)?)
            } else {
                let mut e = script_e_terms_erlang2(&ctx, qe.lambda, qe.x)?;
                e.add(&script_e_terms_erlang2(&ctx, qe.lambda, b)?, -ratio);
                qe.lambda * e.decaying(-qe.y)
            };
            nonnegative("gs_density_e2", v)
        }
        other => Err(Error::Input(format!(
            "unknown Erlang(2) identity `{other}`; expected one of {ERLANG2_IDENTITIES:?}"
        ))),
    }
}

/// Right-hand side of the Erlang(2) discounted ruin check at `θ = x = 0`, as printed:
/// `λ/(λ+q) − (λ/(λ+q)²)Φ_{λ+q}(Φ_{λ+q} − Φ_q)/(Φ_q Φ′_{λ+q})`.
pub fn erlang2_origin_check_printed(model: LevyModel, q: f64, lambda: f64) -> Result<f64> {
    origin_check(model, q, lambda, lambda)
}

/// The same check with the weight `q/(λ+q)²` that follows from substituting
/// `θ = x = 0` into the infinite-horizon Erlang(2) transform.
pub fn erlang2_origin_check_derived(model: LevyModel, q: f64, lambda: f64) -> Result<f64> {
    origin_check(model, q, lambda, q)
}

fn origin_check(model: LevyModel, q: f64, lambda: f64, weight: f64) -> Result<f64> {
    ensure_positive("q", q)?;
    ensure_positive("lambda", lambda)?;
    let pl = model.phi(lambda + q)?;
    let pq = model.phi(q)?;
    let dphi = model.phi_prime(lambda + q)?;
    let s = lambda + q;
    Ok(lambda / s - weight / (s * s) * pl * (pl - pq) / (pq * dphi))
}

/// The Erlang(2) ruin probabilities as printed in the worked examples for the
/// two models, reproduced verbatim for comparison.
pub fn erlang2_printed_example(model: LevyModel, x: f64, lambda: f64) -> Result<f64> {
    let pl = model.phi(lambda)?;
    Ok(match model {
        LevyModel::BrownianRisk { mu, sigma } => {
            let s2 = sigma * sigma;
            let k = 2.0 * mu / s2;
            let lead = ((mu * mu + 2.0 * s2 * lambda).sqrt() - mu).powi(2) / (lambda * lambda * s2 * s2);
            1.0 - lead * (1.0 / pl - (-k * x).exp() / (pl + k))
        }
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            let k = alpha - eta / c;
            1.0 - (1.0 / lambda)
                * (1.0 / (pl * pl) - eta / (c * alpha) * (-k * x).exp() / ((pl + k) * (pl + k)))
        }
    })
}

/// `E_x[e^{Φ_λ X_{T₀⁻}}; T₀⁻ < ∞]` (q = 0), the `θ → Φ_λ` limit of the
/// `b → ∞` transform `λ/(λ − ψ(θ))(Z(x, θ) − Z(x, Φ_λ)ψ(θ)Φ_λ/(θλ))`.
pub fn tilted_transform_exp(model: LevyModel, x: f64, lambda: f64) -> Result<f64> {
    model.require_positive_drift("tilted_transform_exp")?;
    let ctx = ScaleContext::new(model, 0.0)?;
    let pl = model.phi(lambda)?;
    let v = (ctx.z_tilde(x, pl, pl)? - lambda * ctx.z(x, pl)? / pl) / model.psi_prime(pl)?;
    clamp_unit("tilted_transform_exp", v)
}

/// `E_x[e^{Φ_λ X_{ρ^{(2)}}}; ρ^{(2)} < ∞]` (q = 0).
///
/// The Erlang(2) transform has a double pole in its prefactor at `θ = Φ_λ`
/// matched by a double zero of the bracket. It is evaluated from symmetric
/// points `Φ_λ ± h`, `Φ_λ ± h/2` with one Richardson step.
pub fn tilted_transform_erlang2(model: LevyModel, x: f64, lambda: f64) -> Result<f64> {
    model.require_positive_drift("tilted_transform_erlang2")?;
    let ctx = ScaleContext::new(model, 0.0)?;
    let t0 = model.phi(lambda)?;
    let h = 1e-3 * (1.0 + t0);
    let f = |t: f64| gs_lt_infinite_raw(&ctx, x, lambda, lambda, t);
    let avg = |h: f64| -> Result<f64> { Ok(0.5 * (f(t0 + h)? + f(t0 - h)?)) };
    let v = (4.0 * avg(0.5 * h)? - avg(h)?) / 3.0;
    clamp_unit("tilted_transform_erlang2", v)
}

/// Result of the Erlang(n) recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangRuin {
    pub n: usize,
    /// `P_x(ρ^{(n)}_λ < ∞)`.
    pub value: f64,
    /// True when some tilted transforms came from simulation.
    pub hybrid: bool,
    /// Delta-method standard error from the simulated inputs (0 if analytic).
    pub std_error: f64,
}

/// `P_x(ρ^{(n)}_λ < ∞)` for `n ≤ 3`, fully analytic.
pub fn ruin_prob_erlang_n(model: LevyModel, x: f64, lambda: f64, n: usize) -> Result<f64> {
    if n >= 4 {
        return Err(Error::Precondition(format!(
            "n = {n} needs simulated tilted transforms; use the hybrid recursion"
        )));
    }
    let no_oracle = |_: usize, _: f64| -> Result<(f64, f64)> { unreachable!() };
    Ok(ruin_prob_erlang_n_with(model, x, lambda, n, no_oracle)?.value)
}

/// Survival recursion
/// `S_n(x) = S_{n−1}(x) + S_{n−1}(0) L_{n−1}(x)/(1 − L_{n−1}(0))`,
/// `L_k(x) = E_x[e^{Φ_λ X_{ρ^{(k)}}}; ρ^{(k)} < ∞]`.
///
/// `L_1`, `L_2` are analytic; for `k ≥ 3` the `oracle(k, x)` supplies an
/// estimate `(value, std_error)`.
pub fn ruin_prob_erlang_n_with<F>(model: LevyModel, x: f64, lambda: f64, n: usize, mut oracle: F) -> Result<ErlangRuin>
where
    F: FnMut(usize, f64) -> Result<(f64, f64)>,
{
    ensure_finite("x", x)?;
    ensure_positive("lambda", lambda)?;
    if n == 0 {
        return Err(Error::Input("n must be >= 1".into()));
    }
    model.require_positive_drift("ruin_prob_erlang_n")?;
    let s1x = prob_never_observed_negative(model, x, lambda)?;
    let s10 = prob_never_observed_negative(model, 0.0, lambda)?;
    // Tilted transforms per stage k = 1..n−1, at x and at 0, with standard errors.
    let mut inputs: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(n);
    for k in 1..n {
        inputs.push(match k {
            1 => (
                tilted_transform_exp(model, x, lambda)?,
                0.0,
                tilted_transform_exp(model, 0.0, lambda)?,
                0.0,
            ),
            2 => (
                tilted_transform_erlang2(model, x, lambda)?,
                0.0,
                tilted_transform_erlang2(model, 0.0, lambda)?,
                0.0,
            ),
            _ => {
                let (lx, sx) = oracle(k, x)?;
                let (l0, s0) = oracle(k, 0.0)?;
                (lx, sx, l0, s0)
            }
        });
    }
    let survive = |inp: &[(f64, f64, f64, f64)]| -> f64 {
        let (mut sx, mut s0) = (s1x, s10);
        for &(lx, _, l0, _) in inp {
            let k = s0 / (1.0 - l0);
            sx += k * lx;
            s0 = k;
        }
        sx
    };
    let s = survive(&inputs);
    let hybrid = n >= 4;
    let mut var = 0.0;
    if hybrid {
        for i in 0..inputs.len() {
            for which in 0..2 {
                let se = if which == 0 { inputs[i].1 } else { inputs[i].3 };
                if se == 0.0 {
                    continue;
                }
                let mut bumped = inputs.clone();
                let h = 1e-6;
                if which == 0 {
                    bumped[i].0 += h;
                } else {
                    bumped[i].2 += h;
                }
                let g = (survive(&bumped) - s) / h;
                var += g * g * se * se;
            }
        }
    }
    Ok(ErlangRuin {
        n,
        value: clamp_unit("ruin_prob_erlang_n", 1.0 - s)?,
        hybrid,
        std_error: var.sqrt(),
    })
}

/// Erlang(n, n/r) approximation of the fixed-delay ruin probability `P_x(κ_r < ∞)`, `n ≤ 3`.
pub fn fixed_delay_approx(model: LevyModel, x: f64, r: f64, n: usize) -> Result<f64> {
    ensure_positive("r", r)?;
    if n == 0 {
        return Err(Error::Input("n must be >= 1".into()));
    }
    ruin_prob_erlang_n(model, x, n as f64 / r, n)
}

/// Names accepted by [`appendix_lemmas`].
pub const APPENDIX_IDENTITIES: [&str; 4] = [
    "T0_joint_lt",
    "upcross_before_T0_two_sided",
    "upcross_before_T0",
    "delayed_W_functional",
];

/// Identities for `T₀⁻`, the first Poisson(λ) observation of a negative surplus.
///
/// - `T0_joint_lt`: `E_x[e^{−qT₀⁻ + θX_{T₀⁻}}; T₀⁻ < τ_b⁺]`;
/// - `upcross_before_T0_two_sided`: `E_x[e^{−qτ_b⁺}; τ_b⁺ < T₀⁻ ∧ τ_{−a}⁻]`;
/// - `upcross_before_T0`: `E_x[e^{−qτ_b⁺}; τ_b⁺ < T₀⁻]`;
/// - `delayed_W_functional`: `E_x[e^{−qT₀⁻} W_p(X_{T₀⁻} + z); T₀⁻ < τ_b⁺ ∧ τ_{−a}⁻]`, for `z ≤ a`.
pub fn appendix_lemmas(name: &str, query: &ParisianQuery) -> Result<f64> {
    let (m, q, l, x) = (query.model, query.q, query.lambda, query.x);
    ensure_finite("x", x)?;
    ensure_nonnegative("q", q)?;
    ensure_positive("lambda", l)?;
    match name {
        "T0_joint_lt" => {
            let b = query.b()?;
            let th = query.theta;
            ensure_nonnegative("theta", th)?;
            let ctx = ScaleContext::new(m, q)?;
            let pl = m.phi(l + q)?;
            check_not_at("theta", th, pl, "Phi_{q+lambda}")?;
            let v = l / (l - ctx.psi_q(th)?)
                * (ctx.z(x, th)? - ctx.z(x, pl)? * ctx.z(b, th)? / ctx.z(b, pl)?);
            Ok(v)
        }
        "upcross_before_T0_two_sided" => {
            let b = query.b()?;
            let a = query.a()?;
            let ctx = ScaleContext::new(m, q)?;
            let cl = ctx.shifted(l)?;
            let v = ctx.script_w_with(&cl, x, x + a) / ctx.script_w_with(&cl, b, b + a);
            clamp_unit(name, v)
        }
        "upcross_before_T0" => {
            let b = query.b()?;
            let ctx = ScaleContext::new(m, q)?;
            let pl = m.phi(l + q)?;
            clamp_unit(name, ctx.z(x, pl)? / ctx.z(b, pl)?)
        }
        "delayed_W_functional" => {
            let b = query.b()?;
            let a = query.a()?;
            let (p, z) = (query.p, query.z);
            ensure_nonnegative("p", p)?;
            ensure_positive("z", z)?;
            if z > a {
                return Err(Error::Precondition(format!(
                    "delayed_W_functional needs z <= a (got z = {z}, a = {a}); below -a the payoff is not killed"
                )));
            }
            let ctx = ScaleContext::new(m, q)?;
            let cl = ctx.shifted(l)?;
            let r_a = ctx.script_w_with(&cl, x, x + a) / ctx.script_w_with(&cl, b, b + a);
            // (𝒲^{(q,s)} − 𝒲^{(q,λ)})/(s − λ) with s = p − q, removable at s = λ.
            let quotient = |at: f64, s: f64| -> Result<f64> {
                bridge(s, l, |s| {
                    let ws = ctx.script_w_with(&ctx.shifted(s)?, at, at + z);
                    Ok((ws - ctx.script_w_with(&cl, at, at + z)) / (s - l))
                })
            };
            let s = p - q;
            Ok(l * (r_a * quotient(b, s)? - quotient(x, s)?))
        }
        other => Err(Error::Input(format!(
            "unknown appendix identity `{other}`; expected one of {APPENDIX_IDENTITIES:?}"
        ))),
    }
}
