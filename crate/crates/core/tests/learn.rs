mod common;

use rlspec::learn::*;
use rlspec::mdp::{CountingSimulator, Discount, Mdp, MdpBuilder, MdpSimulator, PositionalPolicy};
use rlspec::random::{random_mdp, random_rm, MdpParams};
use rlspec::rng::{derive_seed, seeded};
use rlspec::spec::{optimal_value, spec_value, RewardMachine, Specification};

fn discounted_spec(rm: &RewardMachine<f64>, gamma: f64) -> Specification<f64> {
    Specification::DiscountedRm { machine: rm.clone().into(), gamma: Discount::Constant(gamma) }
}

#[test]
fn zero_discount_learns_immediate_rewards() {
    // With γ = 0 every episode is one step long, so only the initial state
    // is visited; run once from each state.
    for start in 0..2 {
        let mdp = MdpBuilder::<f64>::new(2, 2)
            .initial(start)
            .transition(0, 0, 0, 0.5).transition(0, 0, 1, 0.5)
            .transition(0, 1, 1, 1.0)
            .transition(1, 0, 0, 0.3).transition(1, 0, 1, 0.7)
            .transition(1, 1, 0, 1.0)
            .build().unwrap();
        let rm = RewardMachine::from_fn(1, 0, 2, 2, |_, _| 0, |_, s, a, t| (s + a + 2 * t) as f64 / 4.0).unwrap();
        let config = LearnerConfig { step_budget: 100_000, eval_every: 100_000, ..Default::default() };
        let (_, q) = q_learning(&mut MdpSimulator::new(&mdp, start as u64), &rm, 0.0, &config).unwrap();
        for a in 0..2 {
            let expected: f64 = mdp.row(start, a).iter().map(|&(t, p)| p * rm.reward(0, start, a, t)).sum();
            assert!((q.get(start, 0, a) - expected).abs() < 0.02, "{start} {a}: {} vs {expected}", q.get(start, 0, a));
        }
    }
}

#[test]
fn chain_with_reward_at_the_end() {
    let mdp = MdpBuilder::<f64>::new(3, 2)
        .transition(0, 0, 1, 1.0).transition(0, 1, 0, 1.0)
        .transition(1, 0, 2, 1.0).transition(1, 1, 0, 1.0)
        .transition_all(2, 2, 1.0)
        .build().unwrap();
    let rm = RewardMachine::from_fn(1, 0, 3, 2, |_, _| 0, |_, s, _, _| if s == 2 { 1.0 } else { 0.0 }).unwrap();
    let spec = discounted_spec(&rm, 0.9);
    let config = LearnerConfig { step_budget: 50_000, eval_every: 5_000, ..Default::default() };
    let (trace, _) = q_learning(&mut MdpSimulator::new(&mdp, 1), &rm, 0.9, &config).unwrap();
    let conv = convergence_trace(&trace, &mdp, &spec).unwrap();
    assert!(conv.final_gap().unwrap() <= 0.05);
    assert_eq!(trace.len(), 10);
}

#[test]
fn q_learning_on_random_mdps() {
    for i in 0..5 {
        let mdp: Mdp<f64> = random_mdp(&mut seeded(derive_seed(40, i)), &MdpParams::new(5, 2)).unwrap();
        let rm = random_rm(&mut seeded(derive_seed(41, i)), 1, &mdp.shape()).unwrap();
        let spec = discounted_spec(&rm, 0.9);
        let config = LearnerConfig { step_budget: 1_000_000, eval_every: 100_000, ..Default::default() };
        let (trace, q) = q_learning(&mut MdpSimulator::new(&mdp, i), &rm, 0.9, &config).unwrap();
        assert!(q.max_abs() <= 1.0 / (1.0 - 0.9) + 1e-9);
        let conv = convergence_trace(&trace, &mdp, &spec).unwrap();
        assert!(conv.final_gap().unwrap() <= 0.05, "mdp {i}: gap {}", conv.final_gap().unwrap());
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let mdp: Mdp<f64> = random_mdp(&mut seeded(3), &MdpParams::new(4, 2)).unwrap();
    let rm = random_rm(&mut seeded(4), 2, &mdp.shape()).unwrap();
    let config = LearnerConfig { step_budget: 20_000, eval_every: 1_000, seed: 9, ..Default::default() };
    let a = q_learning(&mut MdpSimulator::new(&mdp, 5), &rm, 0.8, &config).unwrap();
    let b = q_learning(&mut MdpSimulator::new(&mdp, 5), &rm, 0.8, &config).unwrap();
    assert_eq!(a, b);
    let spec = Specification::reach(&["b"]);
    let x = model_based_learner(&mut MdpSimulator::new(&mdp, 5), &mdp.shape(), &spec, &config).unwrap();
    let y = model_based_learner(&mut MdpSimulator::new(&mdp, 5), &mdp.shape(), &spec, &config).unwrap();
    assert_eq!(x, y);
}

#[test]
fn model_based_budget_accounting() {
    let mdp = rlspec_fig4(1.0, 1.0);
    let spec = Specification::safe(&["b"]);
    for k in [0u64, 1, 7, 21] {
        let mut sim = CountingSimulator::new(MdpSimulator::new(&mdp, 0));
        let config = LearnerConfig { step_budget: k, eval_every: 1_000, ..Default::default() };
        let trace = model_based_learner(&mut sim, &mdp.shape(), &spec, &config).unwrap();
        assert_eq!(sim.steps() as u64, k);
        assert_eq!(trace.len(), 1);
    }
    // With no data every row is a self-loop; the estimate is then safe
    // everywhere and the solver's choice is the lowest action.
    let config = LearnerConfig { step_budget: 0, ..Default::default() };
    let trace = model_based_learner(&mut MdpSimulator::new(&mdp, 0), &mdp.shape(), &spec, &config).unwrap();
    assert_eq!(trace.snapshots[0].policy.act(0, 0), &[1.0, 0.0]);
}

fn rlspec_fig4(p1: f64, p2: f64) -> Mdp<f64> {
    MdpBuilder::new(3, 2)
        .propositions(&["b"]).label(0, "b").label(2, "b")
        .transition(0, 0, 0, p1).transition(0, 0, 1, 1.0 - p1)
        .transition(0, 1, 2, 1.0)
        .transition_all(1, 1, 1.0)
        .transition_all(2, 2, p2).transition_all(2, 1, 1.0 - p2)
        .build().unwrap()
}

#[test]
fn model_based_estimates_concentrate() {
    let mdp = MdpBuilder::<f64>::new(3, 1)
        .transition(0, 0, 1, 0.5).transition(0, 0, 2, 0.5)
        .transition(1, 0, 0, 1.0).transition(2, 0, 0, 1.0)
        .build().unwrap();
    let mut good = 0;
    for seed in 0..40 {
        let mut sim = MdpSimulator::new(&mdp, seed);
        let mut counts = vec![0u64; 9];
        let mut visits = 0;
        use rlspec::mdp::Simulator;
        while visits < 10_000 {
            let s = sim.state();
            let t = sim.step(0).unwrap();
            counts[s * 3 + t] += 1;
            if s == 0 {
                visits += 1;
            }
        }
        let est = estimate_mdp(&mdp.shape(), &counts).unwrap();
        if (est.prob(0, 0, 1) - 0.5).abs() <= 0.02 {
            good += 1;
        }
    }
    assert!(good as f64 / 40.0 >= 0.95);
}

#[test]
fn model_based_reaches_zero_gap_on_deterministic_mdp() {
    let mdp = MdpBuilder::<f64>::new(3, 2)
        .propositions(&["b"]).label(0, "b").label(2, "b")
        .transition(0, 0, 0, 1.0).transition(0, 1, 2, 1.0)
        .transition_all(1, 1, 1.0).transition_all(2, 2, 1.0)
        .build().unwrap();
    let spec = Specification::safe(&["b"]);
    let config = LearnerConfig { step_budget: 40, eval_every: 4, ..Default::default() };
    let trace = model_based_learner(&mut MdpSimulator::new(&mdp, 0), &mdp.shape(), &spec, &config).unwrap();
    let conv = convergence_trace(&trace, &mdp, &spec).unwrap();
    assert!(conv.rows.iter().all(|r| r.gap.abs() < 1e-12));
}

#[test]
fn mistake_counts() {
    let mdp = rlspec_fig4(1.0, 0.5);
    let spec = Specification::safe(&["b"]);
    let (_, best) = optimal_value(&mdp, &spec).unwrap();
    let bad = PositionalPolicy::constant(3, 2, 1).to_finite_memory();
    assert!(spec_value(&mdp, &spec, &bad).unwrap() < 0.5);
    let mut all_good = PolicyTrace::default();
    let mut alternating = PolicyTrace::default();
    for i in 0..10 {
        all_good.push(i, best.clone()).unwrap();
        alternating.push(i, if i % 2 == 0 { best.clone() } else { bad.clone() }).unwrap();
    }
    assert_eq!(pac_mistake_count(&all_good, &mdp, &spec, 0.1).unwrap(), 0);
    assert_eq!(pac_mistake_count(&alternating, &mdp, &spec, 0.1).unwrap(), 5);
    for k in 0..10 {
        assert!(pac_mistake_count(&alternating.suffix(k), &mdp, &spec, 0.1).unwrap() <= 5);
    }
    let conv = convergence_trace(&all_good, &mdp, &spec).unwrap();
    assert!(conv.rows.iter().all(|r| r.gap == 0.0 && r.policy_id == 0));
    assert!(conv.to_csv().starts_with("iteration,policy-id,J,gap\n0,0,"));
    assert!(all_good.push(3, best).is_err());
}

#[test]
fn q_learning_tail_is_eps_optimal() {
    let mdp: Mdp<f64> = random_mdp(&mut seeded(77), &MdpParams::new(4, 2)).unwrap();
    let rm = random_rm(&mut seeded(78), 1, &mdp.shape()).unwrap();
    let spec = discounted_spec(&rm, 0.8);
    let config = LearnerConfig { step_budget: 300_000, eval_every: 10_000, ..Default::default() };
    let (trace, _) = q_learning(&mut MdpSimulator::new(&mdp, 2), &rm, 0.8, &config).unwrap();
    let total = pac_mistake_count(&trace, &mdp, &spec, 0.1).unwrap();
    assert!(total <= trace.len());
    assert_eq!(pac_mistake_count(&trace.suffix(trace.len() - 5), &mdp, &spec, 0.1).unwrap(), 0);
}
