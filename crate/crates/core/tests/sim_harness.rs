use proptest::prelude::*;
use snowsim::dag::AvalancheParams;
use snowsim::markov::{absorption_probability, build_slush_chain};
use snowsim::prob::SimRng;
use snowsim::sim::{
    adversary_respond, conflicting, monte_carlo, run_avalanche, run_slush, run_slush_with, run_snow,
    run_snow_with, AdversaryState, AvalancheAdversary, AvalancheConfig, NetworkConfig, NetworkView,
    Strategy, Workload,
};
use snowsim::snow::{Color, ProtocolParams, SnowState, Variant};
use snowsim::Error;

fn params(k: u32, a: u32, beta: u32) -> ProtocolParams {
    ProtocolParams::new(k, a, beta, 1000).unwrap()
}

fn states(reds: usize, blues: usize, variant: Variant) -> Vec<SnowState> {
    (0..reds + blues)
        .map(|i| SnowState::new(variant, if i < reds { Color::Red } else { Color::Blue }))
        .collect()
}

#[test]
fn slush_unanimous_start_takes_no_rounds() {
    let cfg = NetworkConfig::new(30, 0, params(5, 4, 1), 1000, Strategy::None, 1).unwrap();
    for reds in [0, 30] {
        let out = run_slush(&cfg, reds).unwrap();
        assert_eq!(out.rounds_used, 0);
        assert_eq!(out.unanimous_at, Some(0));
        assert_eq!(out.messages_sent, 0);
    }
}

#[test]
fn slush_rejects_byzantine_nodes() {
    let cfg = NetworkConfig::new(30, 3, params(5, 4, 1), 1000, Strategy::None, 1).unwrap();
    assert!(matches!(run_slush(&cfg, 15), Err(Error::Config(_))));
    let cfg = NetworkConfig::new(30, 0, params(5, 4, 1), 1000, Strategy::None, 1).unwrap();
    assert!(matches!(run_slush(&cfg, 31), Err(Error::Argument(_))));
    assert!(matches!(run_snow(&cfg, Variant::Slush, 15), Err(Error::Argument(_))));
}

#[test]
fn config_validation() {
    assert!(matches!(
        NetworkConfig::new(10, 0, params(10, 8, 1), 100, Strategy::None, 0),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        NetworkConfig::new(1, 0, params(1, 1, 1), 100, Strategy::None, 0),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        NetworkConfig::new(20, 2, params(5, 4, 1), 0, Strategy::None, 0),
        Err(Error::Config(_))
    ));
    // refusing nodes leave only c - 1 peers that answer
    assert!(matches!(
        NetworkConfig::new(6, 4, params(6, 4, 1), 100, Strategy::Refuse, 0),
        Err(Error::Config(_))
    ));
    assert!(NetworkConfig::new(6, 4, params(5, 4, 1), 100, Strategy::Refuse, 0).is_ok());
}

#[test]
fn slush_absorption_matches_chain() {
    let (c, k, a) = (20usize, 3u32, 2u32);
    let chain = build_slush_chain(c as u64, k as u64, a as u64).unwrap();
    let cfg = NetworkConfig::new(c, 0, params(k, a, 1), 1_000_000, Strategy::None, 7).unwrap();
    for start in [10usize, 6] {
        let p_red = 1.0 - absorption_probability(&chain, start).unwrap();
        let trials = 4000u64;
        let mc = monte_carlo(
            trials,
            start as u64,
            |_, rng| run_slush_with(&cfg, start, rng),
            |o| (o.final_reds == c) as u8 as f64,
        )
        .unwrap();
        assert!(mc.records.iter().all(|o| o.unanimous_at.is_some()));
        let sigma = (p_red * (1.0 - p_red) / trials as f64).sqrt();
        assert!(
            (mc.mean - p_red).abs() < 3.0 * sigma,
            "start {start}: simulated {} vs chain {p_red}",
            mc.mean
        );
    }
}

#[test]
fn adversary_answers() {
    // BalanceKeeper: even split, the querier's half hears its own color
    let nodes = states(5, 5, Variant::Snowflake);
    let view = NetworkView { nodes: &nodes, reds: 5 };
    let adv = AdversaryState::new(Strategy::BalanceKeeper, &view, 3);
    for q in 0..10 {
        assert_eq!(adversary_respond(&adv, &view, q, 0), Some(nodes[q].col));
    }
    assert_eq!(adv.assignments.iter().filter(|c| **c == Color::Red).count(), 5);

    // an uneven network is split evenly by moving majority nodes across
    let nodes = states(7, 3, Variant::Snowflake);
    let view = NetworkView { nodes: &nodes, reds: 7 };
    let adv = AdversaryState::new(Strategy::BalanceKeeper, &view, 3);
    assert_eq!(adv.assignments.iter().filter(|c| **c == Color::Red).count(), 5);
    // ties in skew go to the lowest ids
    assert_eq!(adv.assignments[0], Color::Blue);
    assert_eq!(adv.assignments[1], Color::Blue);
    assert_eq!(adv.assignments[2], Color::Red);

    // MinorityPush answers against the majority
    let nodes = states(6, 4, Variant::Snowflake);
    let view = NetworkView { nodes: &nodes, reds: 6 };
    let adv = AdversaryState::new(Strategy::MinorityPush, &view, 2);
    assert_eq!(adversary_respond(&adv, &view, 0, 1), Some(Color::Blue));
    assert_eq!(adversary_respond(&adv, &view, 9, 0), Some(Color::Blue));

    let adv = AdversaryState::new(Strategy::Refuse, &view, 2);
    assert_eq!(adversary_respond(&adv, &view, 3, 0), None);

    let adv = AdversaryState::new(Strategy::None, &view, 4);
    let answers: Vec<_> = (0..4).map(|j| adversary_respond(&adv, &view, 0, j)).collect();
    assert_eq!(answers, vec![Some(Color::Red), Some(Color::Blue), Some(Color::Red), Some(Color::Blue)]);
}

#[test]
fn balance_keeper_prefers_least_committed() {
    let mut nodes = states(4, 2, Variant::Snowflake);
    nodes[0].cnt = 5;
    nodes[1].cnt = 3;
    nodes[2].cnt = 0;
    nodes[3].cnt = 4;
    let view = NetworkView { nodes: &nodes, reds: 4 };
    let adv = AdversaryState::new(Strategy::BalanceKeeper, &view, 2);
    assert_eq!(
        adv.assignments,
        vec![Color::Red, Color::Red, Color::Blue, Color::Red, Color::Blue, Color::Blue]
    );
}

#[test]
fn unanimous_start_decides_under_every_adversary() {
    for strategy in Strategy::ALL {
        for variant in [Variant::Snowflake, Variant::Snowball] {
            let beta = 12;
            let cfg = NetworkConfig::new(40, 5, params(8, 7, beta), 200_000, strategy, 3).unwrap();
            let out = run_snow(&cfg, variant, 40).unwrap();
            assert!(
                out.decisions.iter().all(|d| *d == Some(Color::Red)),
                "{strategy} {variant}"
            );
            assert!(!out.safety_violation);
            assert!(out.samples_at_decision.iter().all(|s| s.unwrap() >= beta as u64));
            assert!(out.decided_at.iter().all(|r| r.unwrap() <= out.rounds_used));
        }
    }
}

#[test]
fn refused_queries_are_replaced() {
    let cfg = NetworkConfig::new(30, 10, params(10, 8, 5), 100_000, Strategy::Refuse, 9).unwrap();
    let out = run_snow(&cfg, Variant::Snowball, 30).unwrap();
    assert!(out.decisions.iter().all(|d| *d == Some(Color::Red)));
    let polls: u64 = out.samples_at_decision.iter().map(|s| s.unwrap()).sum();
    // each poll sends k queries plus replacements for the refused ones
    assert!(out.messages_sent > polls * 10);

    let cfg = NetworkConfig::new(30, 10, params(10, 8, 5), 100_000, Strategy::None, 9).unwrap();
    let out = run_snow(&cfg, Variant::Snowball, 30).unwrap();
    let polls: u64 = out.samples_at_decision.iter().map(|s| s.unwrap()).sum();
    assert_eq!(out.messages_sent, polls * 10);
}

#[test]
fn scheduler_is_fair() {
    let (c, phi) = (50usize, 100_000u64);
    // beta out of reach keeps every node polling for the whole budget
    let cfg = NetworkConfig::new(c, 0, params(5, 3, 1_000_000), phi, Strategy::None, 11).unwrap();
    let out = run_snow(&cfg, Variant::Snowflake, 25).unwrap();
    assert_eq!(out.rounds_used, phi);
    assert_eq!(out.picks.iter().sum::<u64>(), phi);
    let p = 1.0 / c as f64;
    let mean = phi as f64 * p;
    let sigma = (phi as f64 * p * (1.0 - p)).sqrt();
    for (i, &n) in out.picks.iter().enumerate() {
        assert!((n as f64 - mean).abs() < 4.0 * sigma, "node {i} picked {n} times");
    }
}

/// Safety read off the raw decision list.
fn disagree(decisions: &[Option<Color>]) -> bool {
    let reds = decisions.iter().any(|d| *d == Some(Color::Red));
    let blues = decisions.iter().any(|d| *d == Some(Color::Blue));
    reds && blues
}

#[test]
fn weak_parameters_break_safety() {
    // beta = 1 with a strong adversary splits decisions quickly
    let cfg = NetworkConfig::new(20, 10, params(4, 3, 1), 10_000, Strategy::BalanceKeeper, 5).unwrap();
    let mut seen = false;
    for t in 0..20 {
        let out = run_snow_with(&cfg, Variant::Snowflake, 10, &mut SimRng::new(5, t)).unwrap();
        assert_eq!(out.safety_violation, disagree(&out.decisions));
        seen |= out.safety_violation;
    }
    assert!(seen);
}

#[test]
fn runs_are_reproducible() {
    let cfg = NetworkConfig::new(40, 6, params(8, 6, 10), 50_000, Strategy::MinorityPush, 21).unwrap();
    let a = run_snow(&cfg, Variant::Snowball, 20).unwrap();
    let b = run_snow(&cfg, Variant::Snowball, 20).unwrap();
    assert_eq!(a, b);
    let other = NetworkConfig { seed: 22, ..cfg };
    assert_ne!(run_snow(&other, Variant::Snowball, 20).unwrap().picks, a.picks);
}

#[test]
fn monte_carlo_basics() {
    let cfg = NetworkConfig::new(30, 0, params(5, 4, 1), 100_000, Strategy::None, 0).unwrap();
    let one = monte_carlo(1, 3, |_, rng| run_slush_with(&cfg, 15, rng), |o| o.per_node_iterations).unwrap();
    assert_eq!(one.stddev, 0.0);
    assert_eq!(one.mean, one.records[0].per_node_iterations);

    let run = || monte_carlo(16, 3, |_, rng| run_slush_with(&cfg, 15, rng), |o| o.per_node_iterations).unwrap();
    let (x, y) = (run(), run());
    assert_eq!(x, y);
    // trial i is independent of how many trials run alongside it
    let first = monte_carlo(4, 3, |_, rng| run_slush_with(&cfg, 15, rng), |o| o.rounds_used as f64).unwrap();
    assert_eq!(&x.records[..4], &first.records[..]);
    assert!(matches!(
        monte_carlo(0, 3, |_, rng| run_slush_with(&cfg, 15, rng), |o| o.rounds_used as f64),
        Err(Error::Argument(_))
    ));
}

fn avalanche(c: usize, b: usize, adversary: AvalancheAdversary, phi: u64) -> AvalancheConfig {
    let params = AvalancheParams::new(8, 6, 8, 60).unwrap();
    AvalancheConfig::new(c, b, params, adversary, phi, 4).unwrap()
}

#[test]
fn avalanche_all_virtuous_accepts_everything() {
    let cfg = avalanche(20, 0, AvalancheAdversary::None, 500_000);
    let work = Workload { transactions: 40, rogue_fraction: 0.0, interval: 30 };
    let out = run_avalanche(&cfg, &work, 1000).unwrap();
    assert!(out.virtuous_all_accepted());
    assert_eq!(out.max_virtuous_set, 1);
    assert!(!out.conflicting_acceptance);
    assert!(out.rounds_used < cfg.phi);
    assert_eq!(out.messages_sent, out.queries + out.fetched);
    for t in &out.transactions {
        assert_eq!(t.accepted_by, 20);
        assert!(t.issued_at <= t.first_accepted_at.unwrap());
        assert!(t.first_accepted_at <= t.all_accepted_at);
    }
    assert_eq!(out, run_avalanche(&cfg, &work, 1000).unwrap());
}

#[test]
fn avalanche_byzantine_voters() {
    for adversary in [AvalancheAdversary::Withhold, AvalancheAdversary::Refuse] {
        let cfg = avalanche(20, 2, adversary, 500_000);
        let work = Workload { transactions: 20, rogue_fraction: 0.0, interval: 30 };
        let out = run_avalanche(&cfg, &work, 1000).unwrap();
        assert!(out.virtuous_all_accepted(), "{adversary:?}");
    }
}

#[test]
fn avalanche_rogue_transactions() {
    let cfg = avalanche(20, 0, AvalancheAdversary::None, 60_000);
    let work = Workload { transactions: 40, rogue_fraction: 0.25, interval: 30 };
    let out = run_avalanche(&cfg, &work, 1000).unwrap();
    assert!(out.transactions.iter().any(|t| t.rogue));
    assert!(!out.conflicting_acceptance);
    assert_eq!(out.max_virtuous_set, 1);
    for t in out.transactions.iter().filter(|t| !t.rogue && !t.rogue_ancestry) {
        assert!(t.all_accepted_at.is_some(), "virtuous tx at {} not accepted", t.issued_at);
    }
}

#[test]
fn early_termination_saves_messages() {
    let work = Workload { transactions: 20, rogue_fraction: 0.0, interval: 30 };
    let full = avalanche(20, 0, AvalancheAdversary::None, 500_000);
    let early = AvalancheConfig { early_termination: true, ..full.clone() };
    let a = run_avalanche(&full, &work, 1000).unwrap();
    let b = run_avalanche(&early, &work, 1000).unwrap();
    assert!(a.virtuous_all_accepted() && b.virtuous_all_accepted());
    assert!(b.queries < a.queries);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outcome_accounting(seed in any::<u64>(), reds in 0usize..=16, s in 0usize..4, snowball in any::<bool>()) {
        let strategy = Strategy::ALL[s];
        let variant = if snowball { Variant::Snowball } else { Variant::Snowflake };
        let cfg = NetworkConfig::new(16, 4, params(5, 4, 3), 3000, strategy, seed).unwrap();
        let out = run_snow(&cfg, variant, reds).unwrap();
        prop_assert_eq!(out.safety_violation, disagree(&out.decisions));
        prop_assert_eq!(out.safety_violation, conflicting(&out.decisions));
        prop_assert_eq!(out.picks.iter().sum::<u64>(), out.rounds_used);
        prop_assert!(out.final_reds <= 16);
        for i in 0..16 {
            prop_assert_eq!(out.decisions[i].is_some(), out.decided_at[i].is_some());
            if let Some(n) = out.samples_at_decision[i] {
                prop_assert!(n >= 3 && n <= out.picks[i]);
            }
        }
        if out.rounds_used < cfg.phi {
            prop_assert!(out.decisions.iter().all(Option::is_some));
        }
    }
}
