//! Exact event-driven simulation of `X_t = x + ct − Σ claims`.

use super::functional::{
    excursion_occupation, marks_to_ruin, mark_rate, max_mark_rate, Clock, ClockState, CountingMode, PathFunctional,
    Target,
};
use super::rng::Stream;
use super::Env;

pub(super) fn run(c: f64, eta: f64, alpha: f64, f: &PathFunctional, env: &Env, s: &mut Stream) -> f64 {
    match &f.target {
        Target::Ruin { clock, b, a } => barrier(c, eta, alpha, f, clock, *b, *a, false, env, s),
        Target::Upcross { clock, b, a } => barrier(c, eta, alpha, f, clock, Some(*b), *a, true, env, s),
        Target::Occupation {
            lambda,
            n,
            mode,
            horizon_q,
        } => {
            let horizon = horizon_q.map_or(f64::INFINITY, |q| s.exp(q)).min(env.t_max);
            occupation(c, eta, alpha, f.x, *lambda, *n, *mode, horizon, env, s)
        }
    }
}

fn delay(clock: &Clock, s: &mut Stream) -> Option<f64> {
    match clock {
        Clock::Delay { rates } => Some(rates.iter().map(|&r| s.exp(r)).sum()),
        Clock::Fixed { r } => Some(*r),
        _ => None,
    }
}

#[allow(clippy::too_many_arguments)]
fn barrier(
    c: f64,
    eta: f64,
    alpha: f64,
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
    // Explicit delays are drawn per excursion; observations are marks.
    let explicit = matches!(clock, Clock::Delay { .. } | Clock::Fixed { .. });
    let mark_max = if explicit { 0.0 } else { max_mark_rate(clock) };
    let needed = marks_to_ruin(clock);
    let rate = eta + mark_max + kill;
    let mut st = ClockState::default();
    let mut t = 0.0;
    let mut x = f.x;
    if x >= b {
        return if upcross { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        st.begin();
        if *clock == Clock::Classical {
            return ruin(x);
        }
        st.deadline = delay(clock, s);
    }
    loop {
        if !st.in_excursion && x >= env.escape {
            return 0.0;
        }
        let mut dt = s.exp(rate);
        let mut event = true;
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
        let xe = x + c * dt;
        if st.in_excursion && xe >= 0.0 {
            st.reset();
            fired = false;
        }
        if x < b && xe >= b {
            return if upcross { 1.0 } else { 0.0 };
        }
        t += dt;
        x = xe;
        if fired {
            return ruin(x);
        }
        if stop {
            return 0.0;
        }
        if !event {
            continue;
        }
        let u = s.uniform() * rate;
        if u < eta {
            x -= s.exp(alpha);
            if x < floor {
                return 0.0;
            }
            if x < 0.0 && !st.in_excursion {
                st.begin();
                if *clock == Clock::Classical {
                    return ruin(x);
                }
                st.deadline = delay(clock, s).map(|d| t + d);
            }
        } else if u < eta + mark_max {
            if st.in_excursion && (u - eta) < mark_rate(clock, &st) {
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

/// Time at which the path started at `x < 0` at time `t` first reaches 0.
fn recovery(c: f64, eta: f64, alpha: f64, mut t: f64, mut x: f64, s: &mut Stream) -> f64 {
    loop {
        let dt = s.exp(eta);
        if x + c * dt >= 0.0 {
            return t - x / c;
        }
        x += c * dt - s.exp(alpha);
        t += dt;
    }
}

#[allow(clippy::too_many_arguments)]
fn occupation(
    c: f64,
    eta: f64,
    alpha: f64,
    x0: f64,
    lambda: f64,
    n: usize,
    mode: CountingMode,
    horizon: f64,
    env: &Env,
    s: &mut Stream,
) -> f64 {
    let mut occ = 0.0;
    let mut t = 0.0;
    let mut x = x0;
    let mut obs = s.exp(lambda);
    if x < 0.0 {
        let end = recovery(c, eta, alpha, t, x, s);
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
        // Move to the next observation.
        loop {
            let tc = t + s.exp(eta);
            if tc >= obs {
                x += c * (obs - t);
                t = obs;
                break;
            }
            x += c * (tc - t) - s.exp(alpha);
            t = tc;
        }
        if x < 0.0 {
            let end = recovery(c, eta, alpha, t, x, s);
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
