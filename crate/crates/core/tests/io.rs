use rand::Rng;
use rlspec::io::*;
use rlspec::mdp::{validate_mdp, Discount};
use rlspec::random::{random_arm, random_descriptor, random_mdp, random_rm, MdpParams};
use rlspec::reduce::{
    automaton_product_reduction, multidiscount_reduction, product_rm_reduction, validate_reduction, Aggregation,
};
use rlspec::refute::{fig1_mdp, fig3_mdp, fig4_mdp};
use rlspec::rng::seeded;
use rlspec::spec::{build_reach_arm, parse_ltl, BuchiAutomaton, Machine, RewardMachine, Specification};

#[test]
fn figures_round_trip() {
    for mdp in [fig1_mdp(0.7, 0.3, 0.9).unwrap(), fig3_mdp(0.25, 1.0).unwrap(), fig4_mdp(1.0, 0.995).unwrap()] {
        let text = mdp_to_json(&mdp);
        let back = mdp_from_json(&text).unwrap();
        assert_eq!(back, mdp);
        assert_eq!(mdp_to_json(&back), text);
    }
}

#[test]
fn random_mdps_round_trip_bitwise() {
    let mut rng = seeded(1);
    for _ in 0..50 {
        let n = rng.gen_range(1..6);
        let m = rng.gen_range(1..4);
        let mdp = random_mdp::<f64>(&mut rng, &MdpParams::new(n, m)).unwrap();
        assert_eq!(mdp_from_json(&mdp_to_json(&mdp)).unwrap(), mdp);
    }
}

#[test]
fn invalid_mdp_documents() {
    let bad = r#"{"propositions":["b"],"states":2,"initial":0,"actions":["a"],"labels":[["b"],[]],
        "transitions":[{"from":0,"action":0,"to":1,"prob":0.9},{"from":1,"action":0,"to":1,"prob":1.0}]}"#;
    assert!(mdp_from_json(bad).is_err());
    let doc: MdpDoc = serde_json::from_str(bad).unwrap();
    let raw = doc.to_mdp_unchecked().unwrap();
    assert_eq!(validate_mdp(&raw).len(), 1);
    let unknown = bad.replace(r#"[["b"],[]]"#, r#"[["c"],[]]"#);
    assert!(mdp_from_json(&unknown).is_err());
    let twice = bad.replace(r#""to":1,"prob":0.9"#, r#""to":1,"prob":0.5},{"from":0,"action":0,"to":1,"prob":0.5"#);
    assert!(mdp_from_json(&twice).is_err());
}

#[test]
fn machines_round_trip() {
    let mut rng = seeded(2);
    let mdp = random_mdp::<f64>(&mut rng, &MdpParams::new(4, 2)).unwrap();
    for k in 1..4 {
        let rm = Machine::State(random_rm::<f64>(&mut rng, k, &mdp.shape()).unwrap());
        assert_eq!(machine_from_json(&machine_to_json(&rm)).unwrap(), rm);
        let arm = Machine::Abstract(random_arm::<f64, _>(&mut rng, &["b", "c"], k).unwrap());
        assert_eq!(machine_from_json(&machine_to_json(&arm)).unwrap(), arm);
    }
    let reach = Machine::Abstract(build_reach_arm::<f64, _>(&["b"]).unwrap());
    assert_eq!(machine_from_json(&machine_to_json(&reach)).unwrap(), reach);
}

#[test]
fn hand_written_machines() {
    // Reach machine for b, written compactly.
    let text = r#"{"states":2,"initial":0,"kind":"arm","propositions":["b"],
        "update":[{"from":0,"on":["b"],"to":1}],
        "rewards":[{"at":0,"on":["b"],"value":1},{"at":1,"value":1}],"normalized":true}"#;
    let m = machine_from_json(text).unwrap();
    assert_eq!(m, Machine::Abstract(build_reach_arm::<f64, _>(&["b"]).unwrap()));

    let rm = r#"{"states":1,"initial":0,"kind":"rm","mdp_states":2,"mdp_actions":1,
        "update":[],"rewards":[{"at":0,"on":{"state":1},"value":0.5}]}"#;
    let Machine::State(rm) = machine_from_json(rm).unwrap() else { panic!() };
    assert_eq!(rm.reward(0, 0, 0, 1), 0.5);
    assert_eq!(rm.reward(0, 1, 0, 0), 0.0);
    let bad_kind = r#"{"states":1,"initial":0,"kind":"rm","update":[],"rewards":[]}"#;
    assert!(machine_from_json(bad_kind).is_err());
}

#[test]
fn automata_round_trip() {
    for f in ["F b", "G b", "G F b"] {
        let formula = parse_ltl(f, &["b", "c"]).unwrap();
        let aut = BuchiAutomaton::for_builtin(&formula).unwrap();
        assert_eq!(buchi_from_json(&buchi_to_json(&aut)).unwrap(), aut);
    }
    let nondet = r#"{"propositions":["b"],"states":2,"initial":0,"accepting":[1],
        "edges":[{"from":0,"to":[0]},{"from":0,"on":["b"],"to":[1]},{"from":1,"on":["b"],"to":[1]}]}"#;
    let aut = buchi_from_json(nondet).unwrap();
    assert_eq!(aut.successors(0, 1), &[0, 1]);
    assert!(aut.successors(1, 0).is_empty());
    assert!(!aut.is_deterministic());
}

#[test]
fn specifications_round_trip() {
    let props = vec!["b".to_string()];
    let shape = fig1_mdp(1.0, 1.0, 1.0).unwrap().shape();
    let rm: RewardMachine<f64> = random_rm(&mut seeded(3), 2, &shape).unwrap();
    let specs: Vec<Specification<f64>> = vec![
        Specification::reach(&["b"]),
        Specification::safe(&["b"]),
        Specification::ltl(parse_ltl("G F b", &props).unwrap()),
        Specification::DiscountedRm { machine: rm.clone().into(), gamma: Discount::PerState(vec![0.5, 0.9, 0.9, 0.7]) },
        Specification::LimitAvgRm { machine: rm.into() },
    ];
    for spec in specs {
        let doc = SpecDoc::from_spec(&spec);
        let text = serde_json::to_string(&doc).unwrap();
        let back: SpecDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_spec(&props).unwrap(), spec);
    }
}

#[test]
fn descriptors_round_trip() {
    let mut rng = seeded(4);
    let mdp = random_mdp::<f64>(&mut rng, &MdpParams::new(3, 2)).unwrap();
    let shape = mdp.shape();
    let rm = random_rm::<f64>(&mut rng, 2, &shape).unwrap();
    let mut descriptors = vec![
        product_rm_reduction(&shape, &Machine::from(rm), &Aggregation::LimitAverage).unwrap(),
        automaton_product_reduction::<f64>(&shape, &BuchiAutomaton::for_builtin(&parse_ltl("G F b", &["b"]).unwrap()).unwrap())
            .unwrap()
            .descriptor,
    ];
    let one = RewardMachine::<f64>::from_fn(1, 0, 3, 2, |_, _| 0, |_, _, _, t| t as f64 / 2.0).unwrap();
    descriptors.push(multidiscount_reduction(&shape, &one, &Discount::PerState(vec![0.5, 0.9, 0.8])).unwrap());
    for _ in 0..10 {
        descriptors.push(random_descriptor::<f64>(&mut rng, &shape, 2, 2));
    }
    for rd in descriptors {
        let text = descriptor_to_json(&rd);
        let back = descriptor_from_json(&text).unwrap();
        assert_eq!(back, rd);
        assert!(validate_reduction(&back, &shape).is_empty());
    }
}

#[test]
fn reduction_report_shape() {
    let mdp = fig1_mdp(1.0, 1.0, 1.0).unwrap();
    let rd = random_descriptor::<f64>(&mut seeded(9), &mdp.shape(), 1, 2);
    let report = ReductionReport::validate(&rd, &mdp);
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    for key in ["valid", "violations", "preserved", "witness", "sweep"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["valid"], true);
    assert!(v["preserved"].is_null());
}
