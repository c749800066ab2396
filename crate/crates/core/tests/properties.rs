//! Property tests for invariants that span modules.

mod common;

use std::collections::HashMap;

use common::{gain, joint, random_policy};

use proptest::prelude::*;
use rand::Rng;
use rlspec::learn::{pac_mistake_count, q_learning, LearnerConfig};
use rlspec::mdp::{
    discounted_value, limit_avg_value, max_reach_prob, max_safe_prob, validate_mdp, Discount, Mdp, MdpSimulator,
    PositionalPolicy, RewardTable, Simulator,
};
use rlspec::random::{random_descriptor, random_mdp, random_rm, MdpParams};
use rlspec::reduce::wrap_simulator;
use rlspec::rng::seeded;
use rlspec::spec::{
    build_reach_arm, ltl_eval_lasso, optimal_value, parse_ltl, spec_value, BuchiAutomaton, LassoWord, Specification,
};

fn instance(seed: u64, n: usize, m: usize) -> Mdp<f64> {
    random_mdp(&mut seeded(seed), &MdpParams::new(n, m)).unwrap()
}

/// Minimal probability of reaching `target`, by its own fixpoint: states
/// that can avoid `target` surely get 0, the rest iterate the min-Bellman
/// operator from 0 until it stalls.
fn min_reach(mdp: &Mdp<f64>, target: &[bool]) -> Vec<f64> {
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut avoid: Vec<bool> = target.iter().map(|t| !t).collect();
    loop {
        let next: Vec<bool> = (0..n)
            .map(|s| avoid[s] && (0..m).any(|a| mdp.row(s, a).iter().all(|&(t, _)| avoid[t])))
            .collect();
        if next == avoid {
            break;
        }
        avoid = next;
    }
    let mut v: Vec<f64> = (0..n).map(|s| if target[s] { 1.0 } else { 0.0 }).collect();
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if target[s] {
                    1.0
                } else if avoid[s] {
                    0.0
                } else {
                    (0..m)
                        .map(|a| mdp.row(s, a).iter().map(|&(t, p)| p * v[t]).sum::<f64>())
                        .fold(f64::INFINITY, f64::min)
                }
            })
            .collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change < 1e-14 {
            break;
        }
    }
    v
}

/// Accepting-state recurrence of a deterministic automaton on a lasso,
/// found by running it until a (state, cycle position) pair repeats.
fn automaton_accepts(aut: &BuchiAutomaton, word: &LassoWord) -> bool {
    let mut q = aut.initial();
    for &l in &word.prefix {
        q = aut.next(q, l);
    }
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut visits = Vec::new();
    let mut i = 0;
    loop {
        let pos = i % word.cycle.len();
        if let Some(&start) = seen.get(&(q, pos)) {
            return visits[start..].iter().any(|&v| aut.is_accepting(v));
        }
        seen.insert((q, pos), visits.len());
        q = aut.next(q, word.cycle[pos]);
        visits.push(q);
        i += 1;
    }
}

fn all_deterministic(n: usize, m: usize) -> Vec<PositionalPolicy<f64>> {
    let mut out = Vec::new();
    let mut actions = vec![0; n];
    loop {
        out.push(PositionalPolicy::deterministic(m, &actions));
        let mut i = 0;
        while i < n && actions[i] == m - 1 {
            actions[i] = 0;
            i += 1;
        }
        if i == n {
            return out;
        }
        actions[i] += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn validation_matches_row_sums(seed in any::<u64>(), n in 1usize..5, m in 1usize..3, scale in 0.5f64..1.5) {
        let mdp = instance(seed, n, m);
        let mut rng = seeded(seed ^ 9);
        let row = rng.gen_range(0..n * m);
        let rows: Vec<Vec<(usize, f64)>> = mdp
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|&(t, p)| (t, if i == row { p * scale } else { p })).collect())
            .collect();
        let perturbed = Mdp::from_parts_unchecked(
            n, m, mdp.initial(), mdp.propositions().to_vec(), mdp.labels().to_vec(), rows.clone(),
        );
        let rows_ok = rows.iter().all(|r| {
            (r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() <= 1e-9 && r.iter().all(|e| (0.0..=1.0).contains(&e.1))
        });
        prop_assert_eq!(validate_mdp(&perturbed).is_empty(), rows_ok);
    }

    #[test]
    fn safety_is_dual_to_minimal_reachability(seed in any::<u64>(), n in 1usize..6, m in 1usize..3) {
        let mdp = instance(seed, n, m);
        let safe: Vec<bool> = (0..n).map(|s| mdp.label(s) & 1 == 1).collect();
        let unsafe_: Vec<bool> = safe.iter().map(|x| !x).collect();
        let (v, _) = max_safe_prob(&mdp, &safe).unwrap();
        let w = min_reach(&mdp, &unsafe_);
        for s in 0..n {
            prop_assert!((v[s] - (1.0 - w[s])).abs() < 1e-9, "state {}: {} vs {}", s, v[s], 1.0 - w[s]);
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&v[s]));
        }
        let (r, _) = max_reach_prob(&mdp, &unsafe_).unwrap();
        prop_assert!(r.iter().all(|x| (-1e-9..=1.0 + 1e-9).contains(x)));
    }

    #[test]
    fn linear_solve_agrees_with_value_iteration(seed in any::<u64>(), n in 1usize..6, g in 0.1f64..0.95) {
        let mdp = instance(seed, n, 1);
        let mut rng = seeded(seed ^ 3);
        let reward = RewardTable::from_fn(&mdp, |_, _, _| rng.gen_range(0.0..1.0));
        let gamma = Discount::Constant(g);
        let policy = PositionalPolicy::constant(n, 1, 0);
        let exact = discounted_value(&mdp, &reward, &gamma, &policy).unwrap();
        let (iterated, _) = rlspec::mdp::value_iteration_discounted(&mdp, &reward, &gamma, 1e-11).unwrap();
        for s in 0..n {
            prop_assert!((exact[s] - iterated[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn accepting_indicator_gain_is_an_accepting_frequency(seed in any::<u64>(), n in 1usize..6, m in 1usize..3) {
        let mdp = instance(seed, n, m);
        let accepting: Vec<bool> = (0..n).map(|s| mdp.label(s) & 1 == 1).collect();
        let reward = RewardTable::from_fn(&mdp, |s, _, _| if accepting[s] { 1.0 } else { 0.0 });
        for policy in all_deterministic(n, m) {
            let gain_value = limit_avg_value(&mdp, &reward, &policy).unwrap().at_initial();
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&gain_value));
            // The long-run frequency of accepting states, from the Cesàro
            // limit of the chain.
            let chain = joint(&mdp, &policy.to_finite_memory(), 0, |_, _| 0, |_, s, _, _| if accepting[s] { 1.0 } else { 0.0 });
            prop_assert!((gain_value - gain(&chain)).abs() < 1e-9);
            // No accepting state reachable under the policy means zero gain.
            let chain_reach = max_reach_prob(
                &Mdp::new(
                    n, 1, mdp.initial(), mdp.propositions().to_vec(), mdp.labels().to_vec(),
                    (0..n).map(|s| mdp.row(s, policy.action(s).unwrap()).to_vec()).collect(),
                ).unwrap(),
                &accepting,
            ).unwrap().0[mdp.initial()];
            if chain_reach < 1e-12 {
                prop_assert!(gain_value.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn policy_values_never_exceed_the_optimum(seed in any::<u64>(), n in 1usize..5, m in 1usize..3) {
        let mdp = instance(seed, n, m);
        let mut rng = seeded(seed ^ 5);
        let rm = random_rm::<f64>(&mut rng, 2, &mdp.shape()).unwrap();
        let specs = vec![
            Specification::reach(&["b"]),
            Specification::safe(&["b"]),
            Specification::ltl(parse_ltl("G F b", &["b"]).unwrap()),
            Specification::DiscountedRm { machine: rm.clone().into(), gamma: Discount::Constant(0.8) },
            Specification::LimitAvgRm { machine: rm.into() },
            Specification::LimitAvgRm { machine: build_reach_arm::<f64, _>(&["b"]).unwrap().into() },
        ];
        for spec in &specs {
            let (opt, best) = optimal_value(&mdp, spec).unwrap();
            prop_assert!((spec_value(&mdp, spec, &best).unwrap() - opt).abs() < 1e-9);
            for _ in 0..4 {
                let policy = random_policy(&mut rng, n, m);
                let v = spec_value(&mdp, spec, &policy).unwrap();
                prop_assert!(v <= opt + 1e-9, "{:?}: {} > {}", spec, v, opt);
                if spec.is_probabilistic() {
                    prop_assert!((-1e-9..=1.0 + 1e-9).contains(&v));
                }
            }
        }
    }

    #[test]
    fn lasso_semantics_agree_with_builtin_automata(
        prefix in prop::collection::vec(0u64..4, 0..4),
        cycle in prop::collection::vec(0u64..4, 1..4),
        which in 0usize..6,
    ) {
        let formulas = ["F a", "G a", "G F a", "F (a & !b)", "G (a | b)", "G F (a & b)"];
        let formula = parse_ltl(formulas[which], &["a", "b"]).unwrap();
        let aut = BuchiAutomaton::for_builtin(&formula).expect("built-in shape");
        let word = LassoWord::new(prefix, cycle);
        prop_assert_eq!(ltl_eval_lasso(&formula, &word), automaton_accepts(&aut, &word));
    }

    #[test]
    fn parser_never_panics(text in "[abFGXU!&|()<> \\[\\]-]{0,24}") {
        match parse_ltl(&text, &["a", "b"]) {
            Ok(f) => {
                // Printing and reparsing gives the same formula.
                let again = parse_ltl(&f.to_string(), &["a", "b"]).unwrap();
                prop_assert_eq!(again, f);
            }
            Err(e) => prop_assert!(e.position <= text.len()),
        }
    }

    #[test]
    fn wrapper_state_projects_to_inner_state(seed in any::<u64>(), n in 1usize..5, extra in 0usize..3) {
        let mdp = instance(seed, n, 2);
        let rd = random_descriptor::<f64>(&mut seeded(seed ^ 7), &mdp.shape(), extra, 2);
        let inner = MdpSimulator::new(&mdp, seed);
        let mut sim = wrap_simulator(&rd, &mdp.shape(), inner, seed ^ 11).unwrap();
        let mut rng = seeded(seed ^ 13);
        for _ in 0..200 {
            prop_assert_eq!(rd.beta[sim.state()], sim.inner().state());
            let a = rng.gen_range(0..rd.num_actions);
            sim.step(a).unwrap();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn q_values_stay_bounded(seed in any::<u64>(), n in 1usize..5, g in 0.5f64..0.95, init in -1.0f64..1.0) {
        let mdp = instance(seed, n, 2);
        let rm = random_rm::<f64>(&mut seeded(seed ^ 17), 2, &mdp.shape()).unwrap();
        let mut sim = MdpSimulator::new(&mdp, seed);
        let config = LearnerConfig { seed, step_budget: 5_000, eval_every: 1_000, initial_q: init, ..Default::default() };
        let (_, q) = q_learning(&mut sim, &rm, g, &config).unwrap();
        // Rewards lie in [0, 1].
        prop_assert!(q.max_abs() <= 1.0 / (1.0 - g) + init.abs() + 1e-9);
    }

    #[test]
    fn mistakes_on_a_suffix_never_exceed_the_whole(seed in any::<u64>(), n in 2usize..5, k in 0usize..6) {
        let mdp = instance(seed, n, 2);
        let rm = random_rm::<f64>(&mut seeded(seed ^ 19), 1, &mdp.shape()).unwrap();
        let mut sim = MdpSimulator::new(&mdp, seed);
        let config = LearnerConfig { seed, step_budget: 3_000, eval_every: 500, ..Default::default() };
        let (trace, _) = q_learning(&mut sim, &rm, 0.8, &config).unwrap();
        let spec = Specification::DiscountedRm { machine: rm.into(), gamma: Discount::Constant(0.8) };
        let whole = pac_mistake_count(&trace, &mdp, &spec, 0.05).unwrap();
        let tail = pac_mistake_count(&trace.suffix(k), &mdp, &spec, 0.05).unwrap();
        prop_assert!(tail <= whole);
    }
}

#[test]
fn parser_is_total_on_random_inputs() {
    let alphabet: Vec<char> = "abcFGXU!&|()<>-[] \t1tfrueals".chars().collect();
    let mut rng = seeded(2024);
    for _ in 0..10_000 {
        let len = rng.gen_range(0..20);
        let text: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        if let Err(e) = parse_ltl(&text, &["a", "b", "c"]) {
            assert!(e.position <= text.len(), "{text:?}: {e}");
        }
    }
}
