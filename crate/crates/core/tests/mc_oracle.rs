use levy_occupation::identity::{self, Params, Verdict};
use levy_occupation::mc::{self, Clock, CountingMode, McConfig, PathFunctional, Payoff, Target};
use levy_occupation::{parisian, LevyModel};

fn bm() -> LevyModel {
    LevyModel::brownian(1.0, 2f64.sqrt()).unwrap()
}

fn cl() -> LevyModel {
    LevyModel::cramer_lundberg(1.0, 1.0, 2.0).unwrap()
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn campaign(model: LevyModel, cases: &[(&str, Params)], reps: u64) {
    let mut failures = Vec::new();
    for (i, (name, p)) in cases.iter().enumerate() {
        let r = identity::validate(model, name, p, &McConfig::new(reps, 100 + i as u64)).unwrap();
        println!(
            "{name}: analytic {:.6} mc {:.6} +- {:.6} z {:.2}",
            r.analytic, r.mc.value, r.mc.std_error, r.z_score
        );
        if r.verdict != Verdict::Pass {
            failures.push(format!("{name} {p:?}: z = {:.2}", r.z_score));
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

fn shared_cases() -> Vec<(&'static str, Params)> {
    vec![
        ("joint_lt_upcross", params(&[("x", 0.2), ("b", 1.5), ("q", 0.1), ("p", 0.8), ("lambda", 1.5)])),
        ("joint_lt_upcross", params(&[("x", 0.5), ("b", 2.0), ("q", 0.3), ("p", 0.0), ("lambda", 1.0)])),
        ("lt_occupation_inf", params(&[("x", 0.3), ("p", 1.5), ("lambda", 1.0)])),
        ("occupation_law", params(&[("x", 0.4), ("lambda", 1.5)])),
        ("ruin_prob_sum_exp", params(&[("x", 0.2), ("p", 2.5), ("lambda", 1.0)])),
        ("gs_lt_two_sided", params(&[("x", 0.5), ("b", 2.0), ("q", 0.2), ("p", 1.5), ("lambda", 0.8), ("theta", 0.4)])),
        ("gs_lt_infinite", params(&[("x", 0.3), ("q", 0.5), ("p", 1.0), ("lambda", 2.0), ("theta", 0.3)])),
        ("up_cross_three_barrier", params(&[("x", 0.3), ("b", 1.5), ("a", 1.0), ("q", 0.1), ("p", 1.5), ("lambda", 1.0)])),
        ("up_cross_before_ruin", params(&[("x", 0.0), ("b", 1.0), ("q", 0.2), ("p", 3.0), ("lambda", 1.0)])),
        ("lt_occupation_exp_horizon", params(&[("x", 0.2), ("p", 1.0), ("q", 0.5), ("lambda", 1.5)])),
        ("ruin_prob_erlang2", params(&[("x", 0.5), ("lambda", 1.5)])),
        ("gs_lt_two_sided_e2", params(&[("x", 0.4), ("b", 2.0), ("q", 0.2), ("lambda", 1.2), ("theta", 0.5)])),
        ("gs_lt_infinite_e2", params(&[("x", 0.0), ("q", 0.3), ("lambda", 1.0), ("theta", 0.2)])),
        ("up_cross_e2", params(&[("x", 0.2), ("b", 1.2), ("q", 0.1), ("lambda", 2.0)])),
        ("ruin_prob_erlang_n", params(&[("x", 0.0), ("lambda", 2.0), ("n", 3.0)])),
        ("T0_joint_lt", params(&[("x", 0.4), ("b", 2.0), ("q", 0.2), ("lambda", 1.0), ("theta", 0.5)])),
        ("upcross_before_T0_two_sided", params(&[("x", 0.3), ("b", 1.5), ("a", 0.8), ("q", 0.1), ("lambda", 1.0)])),
        ("upcross_before_T0", params(&[("x", 0.2), ("b", 1.0), ("q", 0.3), ("lambda", 2.0)])),
        ("delayed_W_functional", params(&[("x", 0.3), ("b", 1.5), ("a", 1.0), ("q", 0.2), ("p", 0.7), ("lambda", 1.0), ("z", 0.8)])),
    ]
}

#[test]
fn registry_campaign_cramer_lundberg() {
    campaign(cl(), &shared_cases(), 200_000);
}

#[test]
fn registry_campaign_brownian() {
    campaign(bm(), &shared_cases(), 200_000);
}

#[test]
fn hybrid_erlang4_agrees_with_simulation() {
    let p = params(&[("x", 0.0), ("lambda", 1.0), ("n", 4.0)]);
    let e = identity::evaluate(cl(), "ruin_prob_erlang_n", &p, Some(&McConfig::new(200_000, 9))).unwrap();
    assert!(e.hybrid && e.std_error > 0.0);
    let r = identity::validate(cl(), "ruin_prob_erlang_n", &p, &McConfig::new(200_000, 9)).unwrap();
    let se = r.mc.std_error.hypot(e.std_error);
    assert!((r.mc.value - e.value).abs() <= 3.0 * se, "{} vs {}", r.mc.value, e.value);
    assert!(e.value < parisian::ruin_prob_erlang_n(cl(), 0.0, 1.0, 3).unwrap());
}

#[test]
fn classical_ruin_is_one_half_for_the_reference_model() {
    let f = PathFunctional::new("classical", 0.0, Target::Ruin { clock: Clock::Classical, b: None, a: None }, Payoff::indicator());
    let e = mc::simulate_cl_path(&cl(), &McConfig::new(200_000, 21), &f).unwrap();
    assert!((e.value - 0.5).abs() <= 3.0 * e.std_error + e.truncation_bound);
    assert!((parisian::classical_ruin_prob(cl(), 0.0).unwrap() - 0.5).abs() < 1e-14);
}

#[test]
fn fixed_delay_lies_below_its_erlang_approximation() {
    // Deterministic delays dominate Erlang delays of the same mean in the convex order.
    let f = PathFunctional::new("fixed", 0.0, Target::Ruin { clock: Clock::Fixed { r: 1.0 }, b: None, a: None }, Payoff::indicator());
    let e = mc::simulate_cl_path(&cl(), &McConfig::new(200_000, 22), &f).unwrap();
    let approx = parisian::fixed_delay_approx(cl(), 0.0, 1.0, 3).unwrap();
    assert!(e.value < approx);
}

#[test]
fn literal_counting_differs_from_first_observation() {
    let target = |mode| Target::Occupation { lambda: 2.0, n: 1, mode, horizon_q: None };
    let first = PathFunctional::new("first", 0.0, target(CountingMode::FirstObservation), Payoff::Laplace { p: 2.0 });
    let literal = PathFunctional::new("literal", 0.0, target(CountingMode::Literal), Payoff::Laplace { p: 2.0 });
    let cfg = McConfig::new(200_000, 23);
    let a = mc::estimate(&bm(), &cfg, &first).unwrap();
    let b = mc::estimate(&bm(), &cfg, &literal).unwrap();
    assert!((a.value - 0.75).abs() <= 3.0 * a.std_error);
    // Summing overlapping recovery times lowers the transform well below 0.75.
    assert!(b.value < 0.75 - 10.0 * b.std_error);
}
