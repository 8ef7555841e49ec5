use bsde_core::expectation::{
    build_backend, grid_quadrature_step, mc_step_expectations, BackendConfig, BackendKind, CubatureTree, NextSlice,
};
use bsde_core::problem::builtin;
use bsde_core::{BsdeError, Partition};

#[test]
fn grid_and_monte_carlo_steps_agree() {
    type Case = (&'static str, f64, fn(f64) -> f64);
    let cases: [Case; 3] = [
        ("bm_linear", 0.2, f64::sin),
        ("manufactured_sin", 1.0, |x| (x * x).cos()),
        ("call_lipschitz", 1.1, |x| (x - 1.0).max(0.0)),
    ];
    for (name, x, f) in cases {
        let p = builtin(name, &[]).unwrap();
        for delta in [0.5, 0.05] {
            let g = grid_quadrature_step(&p, f, x, delta, 40).unwrap();
            let mc = mc_step_expectations(&p, f, x, delta, 200_000, 77).unwrap();
            let pairs = [
                (g.plain, mc.mean.plain, mc.std_error.plain),
                (g.euler_weighted, mc.mean.euler_weighted, mc.std_error.euler_weighted),
                (g.second_order_weighted, mc.mean.second_order_weighted, mc.std_error.second_order_weighted),
            ];
            for (k, (a, b, se)) in pairs.into_iter().enumerate() {
                assert!((a - b).abs() <= 3.5 * se, "{name} delta={delta} component {k}: grid {a} mc {b} +/- {se}");
            }
        }
    }
}

#[test]
fn monte_carlo_step_is_seed_deterministic() {
    let p = builtin("bm_linear", &[]).unwrap();
    let a = mc_step_expectations(&p, f64::sin, 0.0, 0.1, 5000, 9).unwrap();
    let b = mc_step_expectations(&p, f64::sin, 0.0, 0.1, 5000, 9).unwrap();
    let c = mc_step_expectations(&p, f64::sin, 0.0, 0.1, 5000, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mean, c.mean);
}

#[test]
fn tower_property_on_the_tree() {
    let p = builtin("manufactured_sin", &[]).unwrap();
    let f = |x: f64| (0.7 * x).sin() + 0.3 * x * x;
    for degree in [3u8, 5] {
        let kind = if degree == 3 { BackendKind::Cubature3 } else { BackendKind::Cubature5 };
        let coarse = build_backend(kind, &p, &Partition::uniform(1, 0.2).unwrap(), &BackendConfig::default()).unwrap();
        let fine = build_backend(kind, &p, &Partition::uniform(2, 0.2).unwrap(), &BackendConfig::default()).unwrap();
        let one = coarse.step(0, &[NextSlice::Exact(&f)]).unwrap()[0][0].plain;
        let mid = fine.step(1, &[NextSlice::Exact(&f)]).unwrap();
        let mid_values: Vec<f64> = mid[0].iter().map(|e| e.plain).collect();
        let two = fine.step(0, &[NextSlice::Values(&mid_values)]).unwrap()[0][0].plain;
        // Both are within the rule's own error of E[f]; degree 5 is much tighter.
        let tol = if degree == 3 { 1e-3 } else { 1e-5 };
        assert!((one - two).abs() <= tol, "degree {degree}: {one} vs {two}");
    }
}

#[test]
fn tree_sizes_and_budget() {
    let p = builtin("bm_linear", &[]).unwrap();
    let part = Partition::uniform(3, 1.0).unwrap();
    let t = CubatureTree::build(&p, &part, 5, 1_000_000).unwrap();
    let leaves = t.weights(3);
    assert_eq!(leaves.len(), t.branching().pow(3));
    assert!((leaves.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    let big = Partition::uniform(40, 1.0).unwrap();
    match CubatureTree::build(&p, &big, 5, 1_000_000) {
        Err(BsdeError::Resource { n, .. }) => assert_eq!(n, 40),
        other => panic!("expected a resource error, got {other:?}"),
    }
}

#[test]
fn constant_functional_has_zero_weighted_parts() {
    let p = builtin("call_lipschitz", &[]).unwrap();
    let part = Partition::uniform(4, 1.0).unwrap();
    let one = |_: f64| 1.0;
    for kind in BackendKind::ALL {
        let b = build_backend(kind, &p, &part, &BackendConfig::default()).unwrap();
        for level in 0..4 {
            for e in &b.step(level, &[NextSlice::Exact(&one)]).unwrap()[0] {
                assert!((e.plain - 1.0).abs() < 1e-12, "{kind}");
                assert!(e.euler_weighted.abs() < 1e-9 && e.second_order_weighted.abs() < 1e-9, "{kind} {e:?}");
            }
        }
    }
}
