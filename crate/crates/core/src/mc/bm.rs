//! Skeleton simulation of `X_t = x + μt + σB_t` with bridge crossing checks.

use super::functional::{
    excursion_occupation, marks_to_ruin, mark_rate, max_mark_rate, Clock, ClockState, CountingMode, PathFunctional,
    Target,
};
use super::rng::Stream;
use super::Env;

/// Skeleton step used when no stream or grid forces one.
const FREE_STEP: f64 = 1.0;

pub(super) fn run(mu: f64, sigma: f64, f: &PathFunctional, env: &Env, s: &mut Stream) -> f64 {
    match &f.target {
        Target::Ruin { clock, b, a } => barrier(mu, sigma, f, clock, *b, *a, false, env, s),
        Target::Upcross { clock, b, a } => barrier(mu, sigma, f, clock, Some(*b), *a, true, env, s),
        Target::Occupation {
            lambda,
            n,
            mode,
            horizon_q,
        } => {
            let horizon = horizon_q.map_or(f64::INFINITY, |q| s.exp(q)).min(env.t_max);
            occupation(mu, sigma, f.x, *lambda, *n, *mode, horizon, env, s)
        }
    }
}

/// Probability that a Brownian bridge of variance `var` between `u` and `v`,
/// both on the same side of `level`, touches it.
fn bridge_hit(level: f64, u: f64, v: f64, var: f64) -> f64 {
    (-2.0 * (level - u) * (level - v) / var).exp()
}

#[allow(clippy::too_many_arguments)]
fn barrier(
    mu: f64,
    sigma: f64,
    f: &PathFunctional,
    clock: &Clock,
    b: Option<f64>,
    a: Option<f64>,
    upcross: bool,
    env: &Env,
    s: &mut Stream,
) -> f64 {
    let ruin = |x: f64| if upcross { 0.0 } else { env.payoff_at(&f.payoff, x) };
    let b = b.unwrap_or(f64::INFINITY);
    let floor = a.map_or(f64::NEG_INFINITY, |a| -a);
    let kill = f.payoff.kill_rate();
    let fixed = match clock {
        Clock::Fixed { r } => Some(*r),
        _ => None,
    };
    let classical = *clock == Clock::Classical;
    let mark_max = max_mark_rate(clock);
    let needed = marks_to_ruin(clock);
    let rate = mark_max + kill;
    let grid = if fixed.is_some() || a.is_some() {
        env.grid_dt
    } else {
        f64::INFINITY
    };
    let mut st = ClockState::default();
    let mut t = 0.0;
    let mut x = f.x;
    if x >= b {
        return if upcross { 1.0 } else { 0.0 };
    }
    if x < 0.0 || (classical && x == 0.0) {
        if classical {
            return ruin(x);
        }
        st.begin();
        st.deadline = fixed;
    }
    loop {
        if !st.in_excursion && x >= env.escape {
            return 0.0;
        }
        let mut dt = if rate > 0.0 { s.exp(rate) } else { f64::INFINITY };
        let mut event = rate > 0.0;
        if grid < dt {
            dt = grid;
            event = false;
        }
        if dt.is_infinite() {
            dt = FREE_STEP;
        }
        let mut fired = false;
        if let Some(d) = st.deadline {
            if d - t <= dt {
                dt = d - t;
                event = false;
                fired = true;
            }
        }
        let stop = t + dt >= env.t_max;
        if stop {
            dt = env.t_max - t;
            event = false;
        }
        let var = sigma * sigma * dt;
        let xe = x + mu * dt + (var).sqrt() * s.normal();
        let p_up = if b.is_infinite() {
            0.0
        } else if xe >= b {
            1.0
        } else {
            bridge_hit(b, x, xe, var)
        };
        if s.chance(p_up) {
            return if upcross { 1.0 } else { 0.0 };
        }
        if classical {
            let p0 = if xe < 0.0 { 1.0 } else { bridge_hit(0.0, x, xe, var) };
            if s.chance(p0) {
                return ruin(0.0);
            }
        }
        if floor.is_finite() {
            let p_dn = if xe <= floor { 1.0 } else { bridge_hit(floor, x, xe, var) };
            if s.chance(p_dn) {
                return 0.0;
            }
        }
        match (x < 0.0, xe < 0.0) {
            (false, true) => {
                st.begin();
                fired = false;
                st.deadline = fixed.map(|r| t + dt * x / (x - xe) + r);
            }
            (true, false) => {
                st.reset();
                fired = false;
            }
            (true, true) => {
                // Return to 0 given that b was not reached; reaching b implies it.
                let p0 = bridge_hit(0.0, x, xe, var);
                let p = if p_up > 0.0 { ((p0 - p_up) / (1.0 - p_up)).max(0.0) } else { p0 };
                if s.chance(p) {
                    st.begin();
                    fired = false;
                    st.deadline = fixed.map(|r| t + 0.5 * dt + r);
                }
            }
            (false, false) => {}
        }
        t += dt;
        x = xe;
        if fired || (st.in_excursion && st.deadline.is_some_and(|d| d <= t)) {
            return ruin(x);
        }
        if stop {
            return 0.0;
        }
        if !event {
            continue;
        }
        let w = s.uniform() * rate;
        if w < mark_max {
            if st.in_excursion && w < mark_rate(clock, &st) {
                st.count += 1;
                if st.count >= needed {
                    return ruin(x);
                }
            }
        } else {
            return 0.0;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn occupation(
    mu: f64,
    sigma: f64,
    x0: f64,
    lambda: f64,
    n: usize,
    mode: CountingMode,
    horizon: f64,
    env: &Env,
    s: &mut Stream,
) -> f64 {
    let s2 = sigma * sigma;
    let recovery = |t: f64, y: f64, s: &mut Stream| t + s.inverse_gaussian(-y / mu, y * y / s2);
    let mut occ = 0.0;
    let mut t = 0.0;
    let mut x = x0;
    let mut obs = s.exp(lambda);
    if x < 0.0 {
        let end = recovery(t, x, s);
        if obs < end.min(horizon) {
            let (add, next) = excursion_occupation(obs, end, horizon, lambda, n, mode, s);
            occ += add;
            obs = next;
        }
        t = end;
        x = 0.0;
    }
    loop {
        if t >= horizon || obs >= horizon || x >= env.escape {
            return occ;
        }
        let dt = obs - t;
        x += mu * dt + (s2 * dt).sqrt() * s.normal();
        t = obs;
        if x < 0.0 {
            let end = recovery(t, x, s);
            let (add, next) = excursion_occupation(t, end, horizon, lambda, n, mode, s);
            occ += add;
            obs = next;
            t = end;
            x = 0.0;
        } else {
            obs = t + s.exp(lambda);
        }
    }
}
