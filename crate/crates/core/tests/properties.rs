//! Randomized properties across the pipeline.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weylstrat::expr::{parse_expression, BinaryOp, Func, ScalarExpr, UnaryOp};
use weylstrat::geometries::{catalog_entry, Params};
use weylstrat::tensor::{Interval, JetCurvature, MetricChart, SymbolicCurvature};
use weylstrat::weyl::{
    enumerate_invariants, random_analytic_metric, singer_bound, InvariantCaps, SampleGrid, WeylEvaluator,
};

const COORDS: [&str; 2] = ["x", "y"];

/// Expressions that are finite and smooth on `[-1, 1]²`.
fn arb_expr() -> impl Strategy<Value = ScalarExpr> {
    let leaf = prop_oneof![
        Just(ScalarExpr::var("x")),
        Just(ScalarExpr::var("y")),
        (1i64..6).prop_map(ScalarExpr::int),
        (-2.0f64..2.0).prop_map(|v| ScalarExpr::constant((v * 8.0).round() / 8.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let safe = [Func::Sin, Func::Cos, Func::Tanh, Func::Exp];
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarExpr::raw_binary(BinaryOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarExpr::raw_binary(BinaryOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarExpr::raw_binary(BinaryOp::Mul, a, b)),
            // a / (2 + b²) never divides by zero
            (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                let den = ScalarExpr::raw_binary(
                    BinaryOp::Add,
                    ScalarExpr::int(2),
                    ScalarExpr::raw_binary(BinaryOp::Pow, b, ScalarExpr::int(2)),
                );
                ScalarExpr::raw_binary(BinaryOp::Div, a, den)
            }),
            (inner.clone(), 2i64..4).prop_map(|(a, k)| ScalarExpr::raw_binary(BinaryOp::Pow, a, ScalarExpr::int(k))),
            inner.clone().prop_map(|a| ScalarExpr::raw_unary(UnaryOp::Neg, a)),
            // tanh keeps the argument of exp bounded
            (inner, 0usize..4).prop_map(move |(a, f)| {
                let a = if safe[f] == Func::Exp { ScalarExpr::raw_call(Func::Tanh, a) } else { a };
                ScalarExpr::raw_call(safe[f], a)
            }),
        ]
    })
}

fn eval(e: &ScalarExpr, x: f64, y: f64) -> f64 {
    e.evaluate(&[("x", x), ("y", y)]).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_then_parse_is_structural_identity(e in arb_expr()) {
        let text = e.to_string();
        let back = parse_expression(&text, &COORDS).unwrap();
        prop_assert!(back.simplify() == e.simplify(), "{text} reparsed as {back}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplify_preserves_value(e in arb_expr(), seed in any::<u64>()) {
        let s = e.simplify();
        prop_assert!(s.node_count() <= e.node_count());
        prop_assert!(s.simplify() == s, "not idempotent: {s}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (a, b) = (eval(&e, x, y), eval(&s, x, y));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0), "{e} -> {s} at ({x}, {y}): {a} vs {b}");
        }
    }

    #[test]
    fn derivative_matches_richardson_difference(e in arb_expr(), x in -0.9f64..0.9, y in -0.9f64..0.9) {
        let exact = eval(&e.differentiate("x"), x, y);
        let central = |h: f64| (eval(&e, x + h, y) - eval(&e, x - h, y)) / (2.0 * h);
        // second-order error cancels between h = 1e-3 and h = 1e-4
        let richardson = (100.0 * central(1e-4) - central(1e-3)) / 99.0;
        // roundoff in the quotient is about ε·|e|/h
        let scale = exact.abs().max(1.0).max(eval(&e, x, y).abs());
        prop_assert!((exact - richardson).abs() < 1e-6 * scale, "{e}: {exact} vs {richardson}");
    }

    #[test]
    fn derivatives_commute(e in arb_expr(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let xy = e.differentiate("x").differentiate("y");
        let yx = e.differentiate("y").differentiate("x");
        prop_assert!(close(eval(&xy, x, y), eval(&yx, x, y), 1e-9));
    }

    #[test]
    fn singer_bound_formula(n in 1usize..64) {
        prop_assert_eq!(singer_bound(n), n * (n - 1) / 2);
        let caps = InvariantCaps::default_for(n);
        prop_assert!(caps.max_order <= singer_bound(n));
    }

    #[test]
    fn grid_indices_round_trip(a in 1usize..6, b in 1usize..6, c in 1usize..6, k in 0usize..216) {
        let grid = SampleGrid::from_axes(vec![
            (0..a).map(|i| i as f64).collect(),
            (0..b).map(|i| i as f64).collect(),
            (0..c).map(|i| i as f64).collect(),
        ]);
        let k = k % grid.len();
        prop_assert_eq!(grid.linear_index(&grid.multi_index(k)), k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The symmetries of `R` and the Bianchi identities on random metrics,
    /// through both evaluation routes.
    #[test]
    fn curvature_identities_on_random_metrics(seed in any::<u64>(), px in -0.8f64..0.8, py in -0.8f64..0.8, pz in -0.8f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chart = Arc::new(random_analytic_metric(3, &mut rng));
        let p = [px, py, pz];
        let sym = SymbolicCurvature::new(&chart, 1).unwrap().at(&p).unwrap();
        let jet = JetCurvature::new(&chart, 1).unwrap().at(&p).unwrap();
        let n = 3;
        let r = &sym.nabla_riemann[0];
        let d = &sym.nabla_riemann[1];
        let scale = r.max_abs();
        for l in 0..n { for k in 0..n { for i in 0..n { for j in 0..n {
            let v = r.get(&[l, k, i, j]);
            prop_assert!((v + r.get(&[l, k, j, i])).abs() < 1e-9 * scale);
            prop_assert!((v + r.get(&[k, l, i, j])).abs() < 1e-9 * scale);
            prop_assert!((v - r.get(&[i, j, l, k])).abs() < 1e-9 * scale);
            prop_assert!((v + r.get(&[l, i, j, k]) + r.get(&[l, j, k, i])).abs() < 1e-9 * scale);
            for m in 0..n {
                let b2 = d.get(&[l, k, i, j, m]) + d.get(&[l, k, j, m, i]) + d.get(&[l, k, m, i, j]);
                prop_assert!(b2.abs() < 1e-8 * (scale + d.max_abs()));
            }
        }}}}
        prop_assert!(sym.nabla_riemann[1].max_abs_diff(&jet.nabla_riemann[1]) < 1e-9 * (1.0 + d.max_abs()));
        prop_assert!(sym.nabla_metric.max_abs() < 1e-10);
    }

    /// Under `g → c g` an invariant scales by `c` to its scaling exponent.
    #[test]
    fn invariants_scale_with_the_metric(seed in any::<u64>(), c in prop_oneof![Just(0.25f64), Just(4.0), 0.5f64..3.0]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_analytic_metric(2, &mut rng);
        let upper: Vec<ScalarExpr> = base.upper_components().iter().map(|e| e.mul(&ScalarExpr::constant(c))).collect();
        let scaled = MetricChart::new("scaled", base.coords().to_vec(), upper, vec![Interval::new(-1.0, 1.0); 2]).unwrap();
        let (base, scaled) = (Arc::new(base), Arc::new(scaled));
        let specs = enumerate_invariants(2, 2, 2);
        let p = [0.3, -0.4];
        let a = WeylEvaluator::new(&base, 2).unwrap().evaluate(&specs, &p).unwrap();
        let b = WeylEvaluator::new(&scaled, 2).unwrap().evaluate(&specs, &p).unwrap();
        for ((spec, x), y) in specs.iter().zip(&a).zip(&b) {
            let predicted = x * c.powi(spec.scaling_exponent());
            prop_assert!(close(*y, predicted, 1e-9), "{spec}: {y} vs {predicted}");
        }
    }
}

#[test]
fn sphere_scalar_curvature_scales_inversely() {
    for c in [0.25, 4.0] {
        let mut params = Params::new();
        params.insert("scale".into(), weylstrat::geometries::Param::Number(c));
        let e = catalog_entry("sphere2", &params).unwrap();
        let w = weylstrat::weyl::evaluate_invariant(
            &weylstrat::weyl::InvariantSpec::scalar_curvature(),
            e.chart(),
            &[1.0, 2.0],
        )
        .unwrap();
        // radius c means g is multiplied by c²
        assert!((w - 2.0 / (c * c)).abs() < 1e-12, "{c}: {w}");
    }
}
