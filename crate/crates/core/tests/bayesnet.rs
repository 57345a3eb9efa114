mod common;

use common::{brute_marginal, random_network};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ugfbn::bayesnet::{deterministic_cpt, validate_cpt, CptViolationKind};
use ugfbn::{
    compose, make_ufunction, BayesianNetwork, BnError, Cpt, DiscreteNode, StructureFunction,
};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Every node the target depends on, in some order.
fn ancestors(net: &BayesianNetwork, target: usize) -> Vec<usize> {
    let mut seen = vec![false; net.len()];
    let mut stack = vec![target];
    while let Some(v) = stack.pop() {
        for &p in net.parents_of(v) {
            if !seen[p] {
                seen[p] = true;
                stack.push(p);
            }
        }
    }
    (0..net.len()).filter(|&i| seen[i]).collect()
}

#[test]
fn variable_elimination_matches_enumeration() {
    for seed in 0..100u64 {
        let n = 2 + (seed % 11) as usize;
        let cpts = random_network(seed, n);
        let net = BayesianNetwork::new(cpts.clone()).unwrap();
        for target in [format!("v{}", n - 1), format!("v{}", n / 2)] {
            let ve = net.marginal(&target).unwrap();
            let joint = net.joint_enumeration(&target).unwrap();
            let brute = brute_marginal(&cpts, &target);
            assert!(max_diff(&ve, &joint) <= 1e-9, "seed {seed}");
            assert!(max_diff(&ve, &brute) <= 1e-9, "seed {seed}");
            assert!((ve.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn marginal_does_not_depend_on_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..40u64 {
        let n = 4 + (seed % 9) as usize;
        let net = BayesianNetwork::new(random_network(1000 + seed, n)).unwrap();
        let target = format!("v{}", n - 1);
        let t = net.node_index(&target).unwrap();
        let reference = net.marginal(&target).unwrap();
        let mut order = ancestors(&net, t);
        for _ in 0..6 {
            order.shuffle(&mut rng);
            let m = net.marginal_with_order(&target, &order).unwrap();
            assert!(
                max_diff(&m, &reference) <= 1e-12,
                "seed {seed} order {order:?}"
            );
        }
    }
}

#[test]
fn deterministic_cpts() {
    let a = DiscreteNode::new("a", vec![0.0, 1.0]);
    let b = DiscreteNode::new("b", vec![0.0, 1.0]);
    let c = DiscreteNode::new("c", vec![0.0, 1.0, 2.0]);
    let s = deterministic_cpt("s", &StructureFunction::Series, &[&a, &b]).unwrap();
    assert_eq!(s.child_states, vec![0.0, 1.0]);
    assert_eq!(
        s.rows,
        vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0]
        ]
    );

    let p = deterministic_cpt("p", &StructureFunction::Parallel, &[&a, &c]).unwrap();
    assert_eq!(p.child_states, vec![0.0, 1.0, 2.0, 3.0]);
    for (row, (x, y)) in p
        .rows
        .iter()
        .zip([(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)])
    {
        let mut hot = vec![0.0; 4];
        hot[x + y] = 1.0;
        assert_eq!(row, &hot);
    }

    let x = deterministic_cpt("x", &StructureFunction::Xor, &[&a, &b]).unwrap();
    assert_eq!(x.rows[3], vec![1.0, 0.0]);
}

#[test]
fn table_examples() {
    let a = Cpt::root("A", vec![0.0, 1.0], vec![0.5, 0.5]);
    assert!(validate_cpt(&a).is_empty());
    let b = Cpt {
        child: "B".into(),
        child_states: vec![0.0, 1.0],
        parents: vec!["A".into()],
        parent_states: vec![vec![0.0, 1.0]],
        rows: vec![vec![0.2, 0.7], vec![0.8, 0.3]],
    };
    let report = validate_cpt(&b);
    assert!(report
        .iter()
        .any(|v| v.kind == CptViolationKind::Normalization));
    assert!(report
        .iter()
        .any(|v| v.message.contains("CPT column for A=0 sums to 0.9")));
    let net = BayesianNetwork::new(vec![a.clone()]).unwrap();
    assert!(max_diff(&net.marginal("A").unwrap(), &[0.5, 0.5]) < 1e-15);
    assert!(matches!(
        BayesianNetwork::new(vec![a, b]),
        Err(BnError::InvalidCpt { .. })
    ));

    let short_row = Cpt::root("Z", vec![0.0, 1.0], vec![1.0]);
    assert!(validate_cpt(&short_row)
        .iter()
        .any(|v| v.kind == CptViolationKind::Dimension));
}

#[test]
fn series_of_two_reliable_parents() {
    let p = Cpt::root("p", vec![0.0, 1.0], vec![0.1, 0.9]);
    let q = Cpt::root("q", vec![0.0, 1.0], vec![0.1, 0.9]);
    let s = deterministic_cpt("s", &StructureFunction::Series, &[&p.node(), &q.node()]).unwrap();
    let net = BayesianNetwork::new(vec![p, q, s]).unwrap();
    assert!(max_diff(&net.marginal("s").unwrap(), &[0.19, 0.81]) < 1e-12);
}

#[test]
fn identity_chain() {
    let root = Cpt::root("a", vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]);
    let mut cpts = vec![root];
    for (prev, next) in [("a", "b"), ("b", "c"), ("c", "d")] {
        cpts.push(Cpt {
            child: next.into(),
            child_states: vec![0.0, 1.0, 2.0],
            parents: vec![prev.into()],
            parent_states: vec![vec![0.0, 1.0, 2.0]],
            rows: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        });
    }
    let net = BayesianNetwork::new(cpts).unwrap();
    assert_eq!(net.joint_enumeration("d").unwrap(), vec![0.2, 0.3, 0.5]);
    assert!(max_diff(&net.marginal("d").unwrap(), &[0.2, 0.3, 0.5]) < 1e-15);
}

/// A deterministic CPT over independent roots gives the same distribution
/// as composing the roots' u-functions.
#[test]
fn deterministic_cpt_bridges_to_composition() {
    let dists = [
        (vec![0.0, 1.0], vec![0.4, 0.6]),
        (vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]),
        (vec![0.0, 1.0], vec![0.5, 0.5]),
    ];
    for w in [
        StructureFunction::Series,
        StructureFunction::Parallel,
        StructureFunction::Xor,
    ] {
        let roots: Vec<Cpt> = dists
            .iter()
            .enumerate()
            .map(|(i, (g, p))| Cpt::root(format!("r{i}"), g.clone(), p.clone()))
            .collect();
        let nodes: Vec<DiscreteNode> = roots.iter().map(Cpt::node).collect();
        let child = deterministic_cpt("y", &w, &nodes.iter().collect::<Vec<_>>()).unwrap();
        for row in &child.rows {
            assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&x| x == 0.0).count(), row.len() - 1);
        }
        let states = child.child_states.clone();
        let mut cpts = roots;
        cpts.push(child);
        let m = BayesianNetwork::new(cpts).unwrap().marginal("y").unwrap();
        let us: Vec<_> = dists
            .iter()
            .map(|(g, p)| make_ufunction(g, p).unwrap())
            .collect();
        let u = compose(&us, &w).unwrap();
        for (s, p) in states.iter().zip(&m) {
            assert!((u.probability_of(*s) - p).abs() <= 1e-12, "{w:?}");
        }
    }
}

#[test]
fn cycles_and_unknown_nodes() {
    let mk = |c: &str, p: &str| Cpt {
        child: c.into(),
        child_states: vec![0.0, 1.0],
        parents: vec![p.into()],
        parent_states: vec![vec![0.0, 1.0]],
        rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    };
    assert!(matches!(
        BayesianNetwork::new(vec![mk("a", "b"), mk("b", "a")]),
        Err(BnError::CycleDetected(_))
    ));
    assert!(matches!(
        BayesianNetwork::new(vec![mk("a", "zz")]),
        Err(BnError::UnknownNode(_))
    ));
    let net = BayesianNetwork::new(random_network(5, 4)).unwrap();
    assert!(matches!(
        net.marginal("missing"),
        Err(BnError::UnknownNode(_))
    ));
}
