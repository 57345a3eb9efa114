mod common;

use common::{dist_diff, enumerate, gate, merge};
use proptest::prelude::*;
use ugfbn::ugf::CustomTable;
use ugfbn::{compose, make_ufunction, prob_at_least, StructureFunction, UFunction, UgfError};

fn pairs(u: &UFunction) -> Vec<(f64, f64)> {
    u.terms()
        .iter()
        .map(|t| (t.performance, t.probability))
        .collect()
}

fn assert_canonical(u: &UFunction) {
    let t = u.terms();
    assert!(t
        .windows(2)
        .all(|w| w[1].performance - w[0].performance > 1e-9));
    assert!(t.iter().all(|x| (0.0..=1.0).contains(&x.probability)));
    assert!((u.total_probability() - 1.0).abs() <= 1e-9);
}

/// Up to 4 integer performance levels with random weights.
fn ufn() -> impl Strategy<Value = UFunction> {
    prop::collection::vec((0u8..6, 1u32..100), 1..=4).prop_map(|raw| {
        let total: u32 = raw.iter().map(|r| r.1).sum();
        let g: Vec<f64> = raw.iter().map(|r| f64::from(r.0)).collect();
        let p: Vec<f64> = raw
            .iter()
            .map(|r| f64::from(r.1) / f64::from(total))
            .collect();
        make_ufunction(&g, &p).unwrap()
    })
}

fn sp() -> impl Strategy<Value = StructureFunction> {
    prop_oneof![
        Just(StructureFunction::Series),
        Just(StructureFunction::Parallel)
    ]
}

fn fig1() -> (UFunction, UFunction, UFunction) {
    (
        make_ufunction(&[0.0, 1.0], &[0.4, 0.6]).unwrap(),
        make_ufunction(&[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]).unwrap(),
        make_ufunction(&[0.0, 1.0], &[0.5, 0.5]).unwrap(),
    )
}

#[test]
fn make_examples() {
    let (u1, u2, _) = fig1();
    assert_eq!(pairs(&u1), vec![(0.0, 0.4), (1.0, 0.6)]);
    assert_eq!(pairs(&u2), vec![(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]);
    let merged = make_ufunction(&[1.0, 1.0], &[0.3, 0.7]).unwrap();
    assert_eq!(pairs(&merged), vec![(1.0, 1.0)]);
}

#[test]
fn make_errors() {
    assert!(matches!(
        make_ufunction(&[0.0, 1.0], &[1.0]),
        Err(UgfError::LengthMismatch { .. })
    ));
    assert!(matches!(
        make_ufunction(&[0.0, 1.0], &[1.2, -0.2]),
        Err(UgfError::ProbabilityOutOfRange { .. })
    ));
    match make_ufunction(&[0.0, 1.0], &[0.5, 0.4]) {
        Err(UgfError::NotNormalized { sum }) => assert!((sum - 0.9).abs() < 1e-15),
        other => panic!("{other:?}"),
    }
}

#[test]
fn worked_example_composition() {
    let (u1, u2, u3) = fig1();
    let par = compose(&[u2.clone(), u3.clone()], &StructureFunction::Parallel).unwrap();
    // Six state pairs summed per g2 + g3.
    let oracle = enumerate(&[pairs(&u2), pairs(&u3)], |x| x[0] + x[1]);
    assert!(dist_diff(&pairs(&par), &oracle) < 1e-15);
    let expected = [(0.0, 0.10), (1.0, 0.25), (2.0, 0.40), (3.0, 0.25)];
    assert!(dist_diff(&pairs(&par), &expected) < 1e-12);
    assert!((prob_at_least(&par, 2.0) - 0.65).abs() < 1e-12);

    let top = compose(&[par, u1], &StructureFunction::Series).unwrap();
    assert!(dist_diff(&pairs(&top), &[(0.0, 0.46), (1.0, 0.54)]) < 1e-12);
    assert!((prob_at_least(&top, 1.0) - 0.54).abs() < 1e-12);
    assert_eq!(prob_at_least(&top, 0.0), 1.0);
}

#[test]
fn incomplete_custom_table_reports_tuple() {
    let (u1, _, u3) = fig1();
    let table = CustomTable::new(2, vec![(vec![0.0, 0.0], 0.0), (vec![1.0, 1.0], 1.0)]).unwrap();
    match compose(&[u1.clone(), u3], &StructureFunction::Custom(table)) {
        Err(UgfError::IncompleteCustomTable { tuple }) => assert_eq!(tuple, vec![0.0, 1.0]),
        other => panic!("{other:?}"),
    }
    let unary = CustomTable::new(1, vec![(vec![0.0], 0.0), (vec![1.0], 1.0)]).unwrap();
    assert!(matches!(
        compose(&[u1.clone(), u1], &StructureFunction::Custom(unary)),
        Err(UgfError::ArityMismatch { .. })
    ));
}

#[test]
fn xor_of_two_working_units_is_down() {
    let a = make_ufunction(&[0.0, 1.0], &[0.1, 0.9]).unwrap();
    let out = compose(&[a.clone(), a], &StructureFunction::Xor).unwrap();
    assert!(dist_diff(&pairs(&out), &[(0.0, 0.82), (1.0, 0.18)]) < 1e-12);
}

#[test]
fn long_chains_stay_normalized() {
    let (u1, u2, u3) = fig1();
    let inputs = [u1, u2, u3];
    for w in [
        StructureFunction::Series,
        StructureFunction::Parallel,
        StructureFunction::Xor,
    ] {
        let mut acc = inputs[0].clone();
        for k in 0..60 {
            acc = compose(&[acc, inputs[k % 3].clone()], &w).unwrap();
            assert_canonical(&acc);
        }
    }
}

/// Every system of up to 4 components with up to 4 states under every
/// built-in gate, checked against direct product-space enumeration.
#[test]
fn small_instances_match_enumeration() {
    let shapes: Vec<Vec<(f64, f64)>> = vec![
        vec![(1.0, 1.0)],
        vec![(0.0, 0.3), (2.0, 0.7)],
        vec![(0.0, 0.1), (1.0, 0.2), (3.0, 0.7)],
        vec![(0.0, 0.25), (0.5, 0.25), (1.0, 0.3), (2.5, 0.2)],
    ];
    let gates = [
        StructureFunction::Series,
        StructureFunction::Parallel,
        StructureFunction::Xor,
    ];
    let mut checked = 0;
    for n in 1..=4usize {
        let mut idx = vec![0usize; n];
        loop {
            let inputs: Vec<Vec<(f64, f64)>> = idx.iter().map(|&i| shapes[i].clone()).collect();
            let us: Vec<UFunction> = inputs
                .iter()
                .map(|d| {
                    let (g, p): (Vec<f64>, Vec<f64>) = d.iter().cloned().unzip();
                    make_ufunction(&g, &p).unwrap()
                })
                .collect();
            for w in &gates {
                let got = compose(&us, w).unwrap();
                let want = enumerate(&inputs, |x| gate(w, x));
                assert!(dist_diff(&pairs(&got), &want) < 1e-12, "{w:?} {idx:?}");
                checked += 1;
            }
            let mut k = n;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < shapes.len() {
                    break;
                }
                idx[k] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    assert_eq!(checked, 3 * (4 + 16 + 64 + 256));
}

#[test]
fn custom_table_matches_enumeration() {
    let (u1, _, u3) = fig1();
    let rows = vec![
        (vec![0.0, 0.0], 0.0),
        (vec![0.0, 1.0], 2.0),
        (vec![1.0, 0.0], 1.0),
        (vec![1.0, 1.0], 2.0),
    ];
    let table = CustomTable::new(2, rows.clone()).unwrap();
    let got = compose(&[u1.clone(), u3.clone()], &StructureFunction::Custom(table)).unwrap();
    let want = enumerate(&[pairs(&u1), pairs(&u3)], |x| {
        rows.iter().find(|r| r.0 == x).unwrap().1
    });
    assert!(dist_diff(&pairs(&got), &merge(want)) < 1e-15);
}

proptest! {
    #[test]
    fn commutative(a in ufn(), b in ufn(), w in sp()) {
        let ab = compose(&[a.clone(), b.clone()], &w).unwrap();
        let ba = compose(&[b, a], &w).unwrap();
        prop_assert!(ab.max_abs_diff(&ba) <= 1e-12);
        prop_assert_eq!(ab.performances(), ba.performances());
    }

    #[test]
    fn associative(a in ufn(), b in ufn(), c in ufn(), w in sp()) {
        let left = compose(&[compose(&[a.clone(), b.clone()], &w).unwrap(), c.clone()], &w).unwrap();
        let right = compose(&[a.clone(), compose(&[b.clone(), c.clone()], &w).unwrap()], &w).unwrap();
        let flat = compose(&[a, b, c], &w).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
        prop_assert!(left.max_abs_diff(&flat) <= 1e-12);
    }

    #[test]
    fn identities(a in ufn(), extra in 0.0f64..10.0) {
        let top = UFunction::degenerate(a.max_performance() + extra);
        let s = compose(&[a.clone(), top], &StructureFunction::Series).unwrap();
        prop_assert_eq!(&s, &a);
        let p = compose(&[a.clone(), UFunction::degenerate(0.0)], &StructureFunction::Parallel).unwrap();
        prop_assert_eq!(&p, &a);
    }

    #[test]
    fn compose_output_is_canonical(xs in prop::collection::vec(ufn(), 1..6), w in sp()) {
        assert_canonical(&compose(&xs, &w).unwrap());
    }

    #[test]
    fn prob_at_least_is_bounded_and_monotone(a in ufn(), d1 in -1.0f64..7.0, d2 in -1.0f64..7.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (plo, phi) = (prob_at_least(&a, lo), prob_at_least(&a, hi));
        prop_assert!((0.0..=1.0).contains(&plo));
        prop_assert!(phi <= plo);
        prop_assert!((prob_at_least(&a, a.min_performance()) - 1.0).abs() <= 1e-12);
    }
}
