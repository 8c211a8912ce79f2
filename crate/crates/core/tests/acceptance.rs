//! Acceptance gate: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::sync::Mutex;
use std::time::Instant;

use fedkl::bounds::{
    check_cpo_bound, check_federation_advantage_bound, check_global_return_bound,
    check_minorization_equality, check_mixture_tv, check_monotone_history, check_pinsker,
    check_trpo_bound,
};
use fedkl::env::{
    make_garnet_family, make_gridworld_family, GarnetSpec, GoalCell, GridSpec, InitRegions,
};
use fedkl::fed::{
    aggregate_policies, optimize_local_objective_from, run_federated_policy_iteration, Algorithm,
    FedConfig, PenaltyCoefficients,
};
use fedkl::hetero::{
    heterogeneity_report, heterogeneity_report_from, penalized_local_advantage, uniform_weights,
    FamilyEval,
};
use fedkl::mdp::{FiniteMdp, TabularPolicy};
use fedkl::rng::RngStream;
use fedkl::sweep::{random_instance, random_policy, random_simplex, run_bound_sweep, SweepSizes};
use fedkl::trainer::{
    run_fedkl, surrogate_objective, Architecture, ParamKind, PenaltyController, SoftmaxPolicy,
    TrainerConfig,
};

fn pass(number: usize, name: &str) {
    println!("ACCEPTANCE {number:02} {name}: PASS");
}

/// The budgeted criteria hold this lock while they run so their wall-clock
/// measurements are not distorted by other tests sharing the cores.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_guard() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn exact_fed_config(n_agents: usize, rounds: usize, master_seed: u64) -> FedConfig {
    FedConfig {
        n_agents,
        participants_per_round: n_agents,
        local_iters: 1,
        timesteps: 1,
        epochs: 1,
        weights: None,
        sample_counts: None,
        rounds,
        master_seed,
        algorithm: Algorithm::ExactTabular,
        d_local: 0.003,
        d_global: 0.5,
        c1_init: 1.0,
        c2_init: 1.0,
        fedprox_mu: 0.02,
        record_heterogeneity: true,
    }
}

#[test]
fn criterion_01_bound_certification() {
    let _lock = heavy_guard();
    let start = Instant::now();
    let records = run_bound_sweep(500, 2024, &SweepSizes::default(), false).unwrap();
    let expected = [
        "trpo_kl",
        "cpo_tv",
        "federation_advantage",
        "global_return",
        "pinsker",
        "mixture_tv",
        "advantage_linearity",
    ];
    for name in expected {
        let of_kind: Vec<_> = records.iter().filter(|r| r.check.name == name).collect();
        assert!(of_kind.len() >= 500, "{name}: only {} instances", of_kind.len());
        for record in of_kind {
            assert!(
                record.check.holds && record.check.slack >= -1e-8,
                "{name} violated at seed {}: slack {}",
                record.seed,
                record.check.slack
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "sweep took {elapsed:?}, budget is 2 minutes");
    pass(1, "bound certification (7 checks x 500 seeded instances)");
}

#[test]
fn criterion_02_equality_cases() {
    for seed in 0..50u64 {
        let inst = random_instance(777, seed, &SweepSizes::default());
        let pi = &inst.pi;

        let check = check_trpo_bound(&inst.family[0], pi, pi).unwrap();
        assert!((check.lhs - check.rhs).abs() <= 1e-9, "trpo_kl: {}", check.lhs - check.rhs);
        let check = check_cpo_bound(&inst.family[0], pi, pi).unwrap();
        assert!((check.lhs - check.rhs).abs() <= 1e-9, "cpo_tv: {}", check.lhs - check.rhs);
        let check = check_federation_advantage_bound(
            &inst.family,
            &inst.weights,
            pi,
            pi,
            inst.agent,
            false,
        )
        .unwrap();
        assert!(
            (check.lhs - check.rhs).abs() <= 1e-9,
            "federation bound: {}",
            check.lhs - check.rhs
        );
        let check =
            check_global_return_bound(&inst.family, &inst.weights, pi, pi, inst.agent).unwrap();
        assert!(
            (check.lhs - check.rhs).abs() <= 1e-9,
            "global return bound: {}",
            check.lhs - check.rhs
        );
        let row = pi.row(0);
        let check = check_pinsker(row, row);
        assert!((check.lhs - check.rhs).abs() <= 1e-9);
        let copies = vec![pi.clone(); inst.family.len()];
        let check = check_mixture_tv(&copies, &inst.weights, pi).unwrap();
        assert!((check.lhs - check.rhs).abs() <= 1e-9);

        // minorization: the surrogate touches the objective at the reference
        let check =
            check_minorization_equality(&inst.family, &inst.weights, pi, inst.agent).unwrap();
        assert!(check.slack.abs() <= 1e-9, "minorization slack {}", check.slack);
    }
    pass(2, "equality cases at pi' = pi and surrogate touching");
}

#[test]
fn criterion_03_necessary_condition_gate() {
    let mut checked = 0;
    for seed in 0..5u64 {
        let mut stream = RngStream::derive(31, &[seed]);
        let n_states = 4 + stream.gen_range(4);
        let n_actions = 2 + stream.gen_range(3);
        let gamma = 0.4 + 0.3 * stream.next_f64();
        // agent 0 has nearly flat rewards, agent 1 strong ones: the
        // federation average then dominates agent 0's own advantage
        let weak = scaled_random_mdp(&mut stream, n_states, n_actions, gamma, 0.01);
        let strong = scaled_random_mdp(&mut stream, n_states, n_actions, gamma, 1.0);
        let family = vec![weak, strong];
        let weights = vec![0.5, 0.5];
        let pi = random_policy(&mut stream, n_states, n_actions);

        let eval = FamilyEval::compute(&family, &pi).unwrap();
        let report = heterogeneity_report_from(&family, &eval, &weights).unwrap();
        let (b_norm, a_norm) = (report.agents[0].b_norm, report.agents[0].a_norm);
        assert!(
            b_norm >= a_norm,
            "construction failed at seed {seed}: b_norm {b_norm} < a_norm {a_norm}"
        );

        let alpha = report.agents[0].alpha;
        for candidate in 0..1000 {
            let mut cand_stream = RngStream::derive(32, &[seed, candidate]);
            let cand = random_policy(&mut cand_stream, n_states, n_actions);
            let penalized = penalized_local_advantage(&eval, 0, alpha, &pi, &cand);
            assert!(
                penalized <= 1e-9,
                "seed {seed} candidate {candidate}: penalized advantage {penalized}"
            );
        }
        checked += 1;
    }
    assert_eq!(checked, 5);
    pass(3, "necessary-condition gate (||B|| >= ||A|| blocks improvement)");
}

fn scaled_random_mdp(
    stream: &mut RngStream,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    reward_scale: f64,
) -> FiniteMdp {
    let mu = random_simplex(stream, n_states);
    let reward: Vec<Vec<f64>> = (0..n_states)
        .map(|_| (0..n_actions).map(|_| reward_scale * (stream.next_f64() * 2.0 - 1.0)).collect())
        .collect();
    let transition: Vec<Vec<Vec<f64>>> = (0..n_states)
        .map(|_| (0..n_actions).map(|_| random_simplex(stream, n_states)).collect())
        .collect();
    FiniteMdp::new(n_states, n_actions, gamma, mu, reward, transition).unwrap()
}

#[test]
fn criterion_04_exact_loop_monotonicity() {
    let _lock = heavy_guard();
    let start = Instant::now();
    for seed in 0..20u64 {
        let spec = GarnetSpec {
            n_states: 8,
            n_actions: 3,
            branching: 3,
            reward_sparsity: 0.5,
            seed,
            n_agents: 3,
            gamma: 0.1,
            transition_perturbation: 0.05,
            mu_perturbation: 0.05,
        };
        let family = make_garnet_family(&spec).unwrap();
        let history =
            run_federated_policy_iteration(&exact_fed_config(3, 30, seed), &family, 1).unwrap();
        let etas = history.eta_series();
        assert_eq!(etas.len(), 31);

        // the family is genuinely heterogeneous
        let b0 = history.rounds[0].agents[0].b_norm.unwrap();
        assert!(b0 > 0.0, "seed {seed}: family is not heterogeneous");

        let check = check_monotone_history(&etas);
        assert!(check.holds, "seed {seed}: monotonicity slack {}", check.slack);
        let tail = (etas[30] - etas[29]).abs();
        assert!(tail < 1e-6, "seed {seed}: tail difference {tail}");

        // bounded above by R_max / (1 - gamma)
        let r_max = family.iter().map(|m| m.max_reward()).fold(f64::NEG_INFINITY, f64::max);
        let bound = r_max / (1.0 - 0.1);
        assert!(etas.iter().all(|&e| e <= bound + 1e-9));
    }

    // observational tail check on one family: the policy itself stops moving
    let spec = GarnetSpec {
        n_states: 8,
        n_actions: 3,
        branching: 3,
        reward_sparsity: 0.5,
        seed: 0,
        n_agents: 3,
        gamma: 0.1,
        transition_perturbation: 0.05,
        mu_perturbation: 0.05,
    };
    let family = make_garnet_family(&spec).unwrap();
    let weights = uniform_weights(3);
    let mut pi = TabularPolicy::uniform(8, 3);
    let mut last_step = f64::INFINITY;
    for _ in 0..30 {
        let eval = FamilyEval::compute(&family, &pi).unwrap();
        let report = heterogeneity_report_from(&family, &eval, &weights).unwrap();
        let locals: Vec<TabularPolicy> = (0..3)
            .map(|n| {
                let coeffs = PenaltyCoefficients {
                    alpha: report.agents[n].alpha,
                    beta: report.beta,
                    delta: report.agents[n].delta,
                };
                optimize_local_objective_from(
                    &eval.visitation[n].rho,
                    &eval.values[n].adv,
                    &coeffs,
                    &pi,
                )
                .0
            })
            .collect();
        let next = aggregate_policies(&locals, &weights).unwrap();
        last_step = (0..8)
            .flat_map(|s| (0..3).map(move |a| (s, a)))
            .map(|(s, a)| (next.prob(s, a) - pi.prob(s, a)).abs())
            .fold(0.0, f64::max);
        pi = next;
    }
    assert!(last_step < 1e-6, "policy still moving by {last_step} at round 30");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget is 5 minutes");
    pass(4, "exact federated policy iteration is monotone with vanishing tail");
}

#[test]
fn criterion_05_iid_degeneracy() {
    let garnet = GarnetSpec {
        n_states: 6,
        n_actions: 3,
        branching: 2,
        reward_sparsity: 0.6,
        seed: 9,
        n_agents: 4,
        gamma: 0.8,
        transition_perturbation: 0.0,
        mu_perturbation: 0.0,
    };
    let grid = GridSpec {
        width: 4,
        height: 4,
        gamma: 0.95,
        slip_prob: 0.1,
        goal_cells: vec![GoalCell { x: 3, y: 3, reward: 1.0 }],
        step_penalty: -0.02,
        n_agents: 3,
        init_regions: InitRegions::Shared,
        dynamics_noise: vec![0.0, 0.0, 0.0],
    };
    let families = [make_garnet_family(&garnet).unwrap(), make_gridworld_family(&grid).unwrap()];
    let mut stream = RngStream::from_seed(55);
    for family in &families {
        let weights = uniform_weights(family.len());
        let (s, a) = (family[0].n_states(), family[0].n_actions());
        for trial in 0..20 {
            let pi = if trial == 0 {
                TabularPolicy::uniform(s, a)
            } else {
                random_policy(&mut stream, s, a)
            };
            let report = heterogeneity_report(family, &weights, &pi).unwrap();
            for agent in &report.agents {
                assert!(
                    agent.b_norm < 1e-9,
                    "agent {}: b_norm {} under policy {trial}",
                    agent.agent,
                    agent.b_norm
                );
                assert!(agent.alpha < 2e-9);
            }
        }
    }
    pass(5, "IID families have vanishing heterogeneity level and alpha penalty");
}

#[test]
fn criterion_06_heterogeneity_ordering() {
    // agent 0 keeps sigma = 0 everywhere, so its own visitation-scaled
    // advantage norm is fixed across scenarios and only the deviation term
    // moves with the family's noise level
    let make = |sigma: f64| {
        let spec = GridSpec {
            width: 5,
            height: 5,
            gamma: 0.99,
            slip_prob: 0.1,
            goal_cells: vec![GoalCell { x: 2, y: 2, reward: 1.0 }],
            step_penalty: -0.01,
            n_agents: 3,
            init_regions: InitRegions::Shared,
            dynamics_noise: vec![0.0, sigma / 2.0, sigma],
        };
        make_gridworld_family(&spec).unwrap()
    };
    let pi = TabularPolicy::uniform(25, 4);
    let weights = uniform_weights(3);
    let g = |sigma: f64| -> f64 {
        heterogeneity_report(&make(sigma), &weights, &pi).unwrap().agents[0].g_scaled
    };
    let (g_iid, g_02, g_04) = (g(0.0), g(0.2), g(0.4));
    assert!(g_04 < g_02 - 1e-9, "expected strict ordering, got g(0.4) = {g_04}, g(0.2) = {g_02}");
    assert!(g_02 < g_iid - 1e-9, "expected strict ordering, got g(0.2) = {g_02}, g(iid) = {g_iid}");
    pass(6, "g_scaled strictly decreases with the dynamics-noise level");
}

#[test]
fn criterion_07_gradient_checks() {
    let _lock = heavy_guard();
    for arch in [
        Architecture::TabularSoftmax { n_states: 3, n_actions: 3 },
        Architecture::Mlp { n_states: 3, n_actions: 3, hidden: 5 },
    ] {
        let mdp = scaled_random_mdp(&mut RngStream::from_seed(77), 3, 3, 0.9, 1.0);
        for point in 0..50u64 {
            let mut stream = RngStream::derive(4040, &[point]);
            let batch =
                fedkl::env::sample_trajectory(&mdp, &TabularPolicy::uniform(3, 3), 32, &mut stream)
                    .unwrap();
            let steps = &batch.transitions;

            let mut prev_policy = SoftmaxPolicy::init_random(arch, 0.6, &mut stream);
            for x in prev_policy.theta.iter_mut() {
                *x += 0.3 * (stream.next_f64() - 0.5);
            }
            let mut global_policy = prev_policy.clone();
            for x in global_policy.theta.iter_mut() {
                *x += 0.3 * (stream.next_f64() - 0.5);
            }
            let mut policy = prev_policy.clone();
            for x in policy.theta.iter_mut() {
                *x += 0.3 * (stream.next_f64() - 0.5);
            }
            let prev_probs: Vec<Vec<f64>> =
                steps.iter().map(|t| prev_policy.probs(t.state)).collect();
            let global_probs: Vec<Vec<f64>> =
                steps.iter().map(|t| global_policy.probs(t.state)).collect();
            let advantages: Vec<f64> =
                (0..steps.len()).map(|_| stream.next_f64() * 2.0 - 1.0).collect();
            let indices: Vec<usize> = (0..steps.len()).collect();
            let (c1, c2) = (0.8, 1.4);

            let eval = surrogate_objective(
                steps,
                &indices,
                &policy,
                &prev_probs,
                &global_probs,
                &advantages,
                c1,
                c2,
                None,
            );
            let eps = 1e-6;
            for i in 0..policy.theta.len() {
                let mut plus = policy.clone();
                plus.theta[i] += eps;
                let mut minus = policy.clone();
                minus.theta[i] -= eps;
                let op = surrogate_objective(
                    steps,
                    &indices,
                    &plus,
                    &prev_probs,
                    &global_probs,
                    &advantages,
                    c1,
                    c2,
                    None,
                )
                .objective;
                let om = surrogate_objective(
                    steps,
                    &indices,
                    &minus,
                    &prev_probs,
                    &global_probs,
                    &advantages,
                    c1,
                    c2,
                    None,
                )
                .objective;
                let fd = (op - om) / (2.0 * eps);
                let denom = fd.abs().max(eval.gradient[i].abs()).max(1e-6);
                assert!(
                    (fd - eval.gradient[i]).abs() / denom < 1e-4,
                    "{arch:?} point {point} param {i}: fd {fd} vs grad {}",
                    eval.gradient[i]
                );
            }
        }
    }
    pass(7, "surrogate gradients match central differences at 50 points per parameterization");
}

#[test]
fn criterion_08_controller_rules() {
    let c = PenaltyController::new(1.0, 1.0, 0.0003, 0.6);
    // the two worked update examples
    assert_eq!(c.adapt(0.0001, 0.6).c2, 0.5);
    let c4 = PenaltyController::new(4.0, 1.0, 0.0003, 0.6);
    assert_eq!(c4.adapt(0.0003, 0.9).c1, 8.0);

    // boundary cases: strict inequalities at the band edges
    for (d_local, d_global) in [(0.0003, 0.6), (0.01, 0.15), (1.0, 1.0)] {
        let c = PenaltyController::new(2.0, 3.0, d_local, d_global);
        assert_eq!(c.adapt(d_local, d_global), c, "exact target must not move");
        assert_eq!(c.adapt(d_local / 1.1, d_global / 1.1), c, "lower edge must not move");
        assert_eq!(c.adapt(d_local * 1.1, d_global * 1.1), c, "upper edge must not move");
        let below = c.adapt(d_local / 1.1 - 1e-12, d_global / 1.1 - 1e-12);
        assert_eq!(below.c2, 1.5);
        assert_eq!(below.c1, 1.0);
        let above = c.adapt(d_local * 1.1 + 1e-9, d_global * 1.1 + 1e-9);
        assert_eq!(above.c2, 6.0);
        assert_eq!(above.c1, 4.0);
    }
    pass(8, "three-phase controller reproduces the update table on all boundary cases");
}

#[test]
fn criterion_09_divergence_and_stabilization() {
    let _lock = heavy_guard();
    let start = Instant::now();
    let spec = GridSpec {
        width: 5,
        height: 5,
        gamma: 0.99,
        slip_prob: 0.1,
        goal_cells: vec![GoalCell { x: 2, y: 2, reward: 1.0 }],
        step_penalty: -0.01,
        n_agents: 4,
        init_regions: InitRegions::Columns,
        dynamics_noise: vec![0.0, 0.2, 0.4, 0.6],
    };
    let family = make_gridworld_family(&spec).unwrap();
    let trainer = TrainerConfig {
        parameterization: ParamKind::Mlp,
        hidden_width: 24,
        learning_rate: 0.5,
        value_learning_rate: Some(0.1),
        batch_size: 64,
        lambda: 0.95,
        eval_episodes: 4,
        max_episode_len: 150,
        value_epochs: 5,
        init_scale: 0.5,
    };
    // d_local is deliberately enormous (the local step-size cap is off);
    // d_global = 0.45 sits slightly above the 0.38 average global step
    // measured on a c1 = 0 run, per the documented tuning procedure
    let fed = |algorithm: Algorithm, master_seed: u64| FedConfig {
        n_agents: 4,
        participants_per_round: 4,
        local_iters: 10,
        timesteps: 256,
        epochs: 10,
        weights: None,
        sample_counts: None,
        rounds: 80,
        master_seed,
        algorithm,
        d_local: 50.0,
        d_global: 0.45,
        c1_init: 4.0,
        c2_init: 1.0,
        fedprox_mu: 0.02,
        record_heterogeneity: false,
    };

    let rep_seeds = fedkl::cli::compare_rep_seeds(1);
    let mut phenomenon_pairs = 0;
    for &seed in &rep_seeds {
        let avg = run_fedkl(&fed(Algorithm::Fedavg, seed), &trainer, &family, 2).unwrap();
        let kl = run_fedkl(&fed(Algorithm::Fedkl, seed), &trainer, &family, 2).unwrap();
        let stats = |etas: &[f64]| -> (f64, f64) {
            let peak = etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tail = &etas[etas.len() - 10..];
            (peak, tail.iter().sum::<f64>() / tail.len() as f64)
        };
        let (avg_peak, avg_final) = stats(&avg.eta_series());
        let (kl_peak, kl_final) = stats(&kl.eta_series());
        let avg_dropped = avg_final <= avg_peak - 0.20 * avg_peak.abs();
        let kl_stable = kl_final >= kl_peak - 0.10 * kl_peak.abs();
        println!(
            "  seed {seed}: fedavg peak {avg_peak:.3} final {avg_final:.3} (dropped: {avg_dropped}); \
             fedkl peak {kl_peak:.3} final {kl_final:.3} (stable: {kl_stable})"
        );
        if avg_dropped && kl_stable {
            phenomenon_pairs += 1;
        }
    }
    assert!(
        phenomenon_pairs >= 2,
        "divergence/stabilization seen in only {phenomenon_pairs} of 3 pairs"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 900, "took {elapsed:?}, budget is 15 minutes");
    pass(9, "fedavg diverges post-peak while fedkl stays near its peak (>= 2 of 3 seeds)");
}

#[test]
fn criterion_10_byte_identical_outputs() {
    let scratch = std::env::temp_dir().join(format!("fedkl_acceptance_{}", std::process::id()));
    std::fs::create_dir_all(&scratch).unwrap();
    let config_path = scratch.join("determinism.json");
    std::fs::write(
        &config_path,
        r#"{
  "env": {"garnet": {"n_states": 6, "n_actions": 3, "branching": 2,
           "reward_sparsity": 0.5, "seed": 12, "n_agents": 3, "gamma": 0.1,
           "transition_perturbation": 0.1, "mu_perturbation": 0.1}},
  "fed": {"n_agents": 3, "participants_per_round": 3, "local_iters": 2,
           "timesteps": 64, "epochs": 2, "rounds": 6, "master_seed": 42,
           "algorithm": "exact-tabular", "d_local": 0.01, "d_global": 0.5},
  "trainer": {"parameterization": "tabular-softmax", "learning_rate": 0.3},
  "bounds": {"sweeps": 5}
}"#,
    )
    .unwrap();

    let bin = env!("CARGO_BIN_EXE_fedkl");
    let run = |sub: &str, out: &str, extra: &[&str]| {
        let mut cmd = std::process::Command::new(bin);
        cmd.arg(sub)
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(scratch.join(out))
            .args(extra);
        let status = cmd.status().unwrap();
        assert!(status.success(), "{sub} failed");
    };
    let read_dir = |out: &str| -> Vec<(String, Vec<u8>)> {
        let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(scratch.join(out))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        entries.sort();
        entries
    };

    for (sub, extra) in [
        ("train", &[][..]),
        ("analyze", &[][..]),
        ("verify-bounds", &[][..]),
        ("gen-env", &[][..]),
        ("compare", &["--algorithms", "exact-tabular,exact-tabular"][..]),
    ] {
        run(sub, "a", extra);
        run(sub, "b", extra);
        let (a, b) = (read_dir("a"), read_dir("b"));
        assert!(!a.is_empty());
        assert_eq!(a.len(), b.len());
        for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
            assert_eq!(name_a, name_b);
            assert_eq!(bytes_a, bytes_b, "{sub}: {name_a} differs between identical runs");
        }
        // clean between subcommands so files never leak across checks
        std::fs::remove_dir_all(scratch.join("a")).unwrap();
        std::fs::remove_dir_all(scratch.join("b")).unwrap();
    }

    // a sampled run exercises the iteration CSV too, and more workers must
    // not change a single byte
    let fed_config = scratch.join("sampled.json");
    std::fs::write(
        &fed_config,
        r#"{
  "env": {"gridworld": {"width": 4, "height": 4, "gamma": 0.99, "slip_prob": 0.1,
           "goal_cells": [{"x": 3, "y": 3, "reward": 1.0}], "step_penalty": -0.01,
           "n_agents": 2, "init_regions": "columns", "dynamics_noise": [0.0, 0.2]}},
  "fed": {"n_agents": 2, "participants_per_round": 2, "local_iters": 2,
           "timesteps": 64, "epochs": 2, "rounds": 4, "master_seed": 7,
           "algorithm": "fedkl", "d_local": 0.01, "d_global": 0.5},
  "trainer": {"parameterization": "tabular-softmax", "learning_rate": 0.3,
               "eval_episodes": 4, "max_episode_len": 80}
}"#,
    )
    .unwrap();
    for (out, workers) in [("a", "1"), ("b", "4")] {
        let status = std::process::Command::new(bin)
            .args(["train", "--config"])
            .arg(&fed_config)
            .arg("--out")
            .arg(scratch.join(out))
            .args(["--workers", workers])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let (a, b) = (read_dir("a"), read_dir("b"));
    assert!(a.iter().any(|(name, _)| name == "iterations.csv"));
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs across worker counts");
    }

    std::fs::remove_dir_all(&scratch).unwrap();
    pass(10, "identical (config, seed) runs produce byte-identical outputs");
}
