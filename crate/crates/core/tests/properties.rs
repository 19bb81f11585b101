use adsym_core::gen::{random_dag, random_expr, random_tree, rng, sample_valuation, Regularity};
use adsym_core::{
    compare_op_logs, compare_structural, cons_tree, eval, forward_derivative, parse_expr, pretty,
    swell_report, symbolic_derivative, to_forest, unfold, DiffPolicy, ExprStore, Node, NodeId,
    OpKind, SubtreePolicy,
};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn hash_consing_is_sound(seed in any::<u64>()) {
        let e = random_dag(&mut rng(seed), 80, 3);
        let nodes = e.store.nodes();
        // distinct ids hold distinct payloads, compared bitwise for constants
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let same = match (nodes[i], nodes[j]) {
                    (Node::Const(a), Node::Const(b)) => a.to_bits() == b.to_bits(),
                    (a, b) => a == b,
                };
                prop_assert!(!same, "{i} and {j} share a payload");
            }
        }
        // rebuilding any payload returns the existing id
        let mut s = e.store.clone();
        for (i, &n) in nodes.iter().enumerate() {
            prop_assert_eq!(s.make_node(n).unwrap(), NodeId(i as u32));
        }
        prop_assert_eq!(s.len(), nodes.len());
    }

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>()) {
        let e = random_expr(&mut rng(seed), 8, 3);
        let text = pretty(&e.store, e.root);
        let vars: Vec<&str> = e.store.vars().iter().map(String::as_str).collect();
        let back = adsym_core::parse_expr_with_vars(&text, &vars).unwrap();
        let v = compare_structural(&e.store, e.root, &back.store, back.root).unwrap();
        prop_assert!(v.is_equal(), "{text}: {v:?}");
        prop_assert_eq!(pretty(&back.store, back.root), text);
    }

    #[test]
    fn cons_tree_after_unfold_restores_the_dag(seed in any::<u64>()) {
        let e = random_dag(&mut rng(seed), 30, 2);
        prop_assume!(e.tree_size() <= 100_000);
        let t = unfold(&e.store, e.root, 100_000).unwrap();
        prop_assert_eq!(t.node_count() as u128, e.tree_size());
        let back = cons_tree(&t.store, t.root).unwrap();
        let g = compare_structural(&back.store, back.root, &e.store, e.root).unwrap();
        prop_assert!(g.is_equal(), "{g:?}");
        prop_assert_eq!(back.node_count(), e.node_count());
    }

    #[test]
    fn representations_evaluate_identically(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = random_expr(&mut r, 7, 3);
        let vars = e.var_ids();
        let at = sample_valuation(&mut r, &e.store, e.root, &vars, (-2.0, 2.0), Regularity::default(), 50);
        prop_assume!(at.is_some());
        let at = at.unwrap();
        let v = eval(&e.store, e.root, &at).unwrap().to_bits();
        let t = unfold(&e.store, e.root, 1_000_000).unwrap();
        prop_assert_eq!(eval(&t.store, t.root, &at).unwrap().to_bits(), v);
        let f = to_forest(&e.store, e.root).unwrap();
        prop_assert_eq!(eval(&f.store, f.main, &at).unwrap().to_bits(), v);
    }

    #[test]
    fn forest_size_is_dag_plus_bindings(seed in any::<u64>()) {
        let e = random_dag(&mut rng(seed), 60, 3);
        let r = swell_report(&e.store, e.root, 10_000).unwrap();
        prop_assert_eq!(r.forest_nodes, r.dag_nodes + r.forest_bindings);
        prop_assert!(r.tree_nodes >= r.dag_nodes as u128);
    }

    #[test]
    fn engines_agree_on_random_dags(seed in any::<u64>(), simplify in any::<bool>()) {
        let e = random_dag(&mut rng(seed), 50, 3);
        for v in e.var_ids() {
            let fwd = forward_derivative(&e.store, e.root, v, simplify).unwrap();
            for policy in [SubtreePolicy::Share, SubtreePolicy::Cse] {
                let sym = symbolic_derivative(&e, v, DiffPolicy::new(policy, true), simplify).unwrap();
                prop_assert!(compare_op_logs(fwd.log(), &sym.log).equal, "{policy:?}");
                let g = compare_structural(&fwd.expr.store, fwd.expr.root, sym.store(), sym.root()).unwrap();
                prop_assert!(g.is_equal(), "{policy:?}: {g:?}");
            }
        }
    }

    #[test]
    fn memoization_never_changes_the_result(seed in any::<u64>(), simplify in any::<bool>()) {
        let e = random_dag(&mut rng(seed), 16, 2);
        prop_assume!(e.tree_size() <= 5_000);
        for v in e.var_ids() {
            for policy in SubtreePolicy::ALL {
                let on = symbolic_derivative(&e, v, DiffPolicy::new(policy, true), simplify).unwrap();
                let off = symbolic_derivative(&e, v, DiffPolicy::new(policy, false), simplify).unwrap();
                let g = compare_structural(
                    &cons_tree(on.store(), on.root()).unwrap().store,
                    cons_tree(on.store(), on.root()).unwrap().root,
                    &cons_tree(off.store(), off.root()).unwrap().store,
                    cons_tree(off.store(), off.root()).unwrap().root,
                ).unwrap();
                prop_assert!(g.is_equal(), "{policy:?}: {g:?}");
                prop_assert!(off.log.total() >= on.log.total());
            }
        }
    }

    #[test]
    fn copy_output_unfolds_the_shared_output(seed in any::<u64>()) {
        let e = random_dag(&mut rng(seed), 14, 2);
        prop_assume!(e.tree_size() <= 2_000);
        for v in e.var_ids() {
            let copy = symbolic_derivative(&e, v, DiffPolicy::new(SubtreePolicy::Copy, true), false).unwrap();
            let share = symbolic_derivative(&e, v, DiffPolicy::new(SubtreePolicy::Share, true), false).unwrap();
            prop_assert!(copy.store().is_tree(copy.root()));
            prop_assert_eq!(copy.size() as u128, share.store().tree_size(share.root()));
            prop_assert_eq!(pretty(copy.store(), copy.root()), pretty(share.store(), share.root()));
        }
    }

    #[test]
    fn tree_derivatives_stay_linear_under_sharing(seed in any::<u64>(), n in 1usize..400) {
        let t = random_tree(&mut rng(seed), n, 3);
        let vars = t.var_ids();
        let d = symbolic_derivative(&t, vars[0], DiffPolicy::new(SubtreePolicy::Share, true), false).unwrap();
        // at most three new nodes per input node, plus the two seed constants
        prop_assert!(d.size() <= 3 * n + 2);
    }
}

#[test]
fn squaring_chain_size_law() {
    for k in 1..=20u32 {
        let mut s = ExprStore::hash_consed();
        let mut t = s.var("x");
        for _ in 0..k {
            t = s.binary(OpKind::Mul, t, t).unwrap();
        }
        let r = swell_report(&s, t, 100_000).unwrap();
        assert_eq!(r.dag_nodes, k as usize + 1);
        assert_eq!(r.tree_nodes, (1u128 << (k + 1)) - 1);
        assert_eq!(r.tree_constructed, r.tree_nodes <= 100_000);
        assert_eq!(r.forest_bindings, k as usize - 1);
        assert_eq!(r.forest_nodes, r.dag_nodes + r.forest_bindings);
    }
}

#[test]
fn parse_errors_do_not_panic() {
    for text in [
        "", "(", ")", "x +", "sin()", "x^", "x^y", "1..2", "--", "x ** 2", "ln(x", "3 4",
    ] {
        assert!(parse_expr(text).is_err(), "{text}");
    }
}
