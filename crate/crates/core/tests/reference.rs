//! A plain recursive differentiator on boxed trees, used as an oracle for
//! the copy policy and for derivative values.

use adsym_core::gen::{random_dag, random_expr, rng, sample_valuation, Regularity};
use adsym_core::{
    eval, finite_difference, pretty, symbolic_derivative, DiffPolicy, ExprStore, Node, NodeId,
    OpKind, SubtreePolicy, VarId,
};

#[derive(Clone, Debug)]
enum T {
    Var(u32),
    Const(f64),
    Un(OpKind, Box<T>),
    Bin(OpKind, Box<T>, Box<T>),
}

fn to_tree(s: &ExprStore, id: NodeId) -> T {
    match s.node(id) {
        Node::Var(v) => T::Var(v.0),
        Node::Const(c) => T::Const(c),
        Node::Unary(op, c) => T::Un(op, Box::new(to_tree(s, c))),
        Node::Binary(op, l, r) => T::Bin(op, Box::new(to_tree(s, l)), Box::new(to_tree(s, r))),
        Node::SymbolRef(b) => to_tree(s, s.binding(b).unwrap().root),
    }
}

fn c(v: f64) -> T {
    T::Const(v)
}

fn mul(a: T, b: T) -> T {
    T::Bin(OpKind::Mul, Box::new(a), Box::new(b))
}

fn div(a: T, b: T) -> T {
    T::Bin(OpKind::Div, Box::new(a), Box::new(b))
}

fn diff(t: &T, x: u32) -> T {
    match t {
        T::Var(v) => c(if *v == x { 1.0 } else { 0.0 }),
        T::Const(_) => c(0.0),
        T::Un(op, g) => {
            let g0 = (**g).clone();
            let p = match op {
                OpKind::Neg => c(-1.0),
                OpKind::Sin => T::Un(OpKind::Cos, Box::new(g0)),
                OpKind::Cos => T::Un(OpKind::Neg, Box::new(T::Un(OpKind::Sin, Box::new(g0)))),
                OpKind::Exp => t.clone(),
                OpKind::Ln => div(c(1.0), g0),
                OpKind::Sqrt => div(c(0.5), t.clone()),
                OpKind::PowConst(0) => c(0.0),
                OpKind::PowConst(1) => c(1.0),
                OpKind::PowConst(n) => {
                    mul(c(*n as f64), T::Un(OpKind::PowConst(n - 1), Box::new(g0)))
                }
                _ => unreachable!(),
            };
            mul(p, diff(g, x))
        }
        T::Bin(op, l, r) => {
            let (u, v) = ((**l).clone(), (**r).clone());
            let (pl, pr) = match op {
                OpKind::Add => (c(1.0), c(1.0)),
                OpKind::Sub => (c(1.0), c(-1.0)),
                OpKind::Mul => (v, u),
                OpKind::Div => (
                    div(c(1.0), v.clone()),
                    div(T::Un(OpKind::Neg, Box::new(u)), mul(v.clone(), v)),
                ),
                _ => unreachable!(),
            };
            T::Bin(
                OpKind::Add,
                Box::new(mul(pl, diff(l, x))),
                Box::new(mul(pr, diff(r, x))),
            )
        }
    }
}

fn size(t: &T) -> usize {
    match t {
        T::Var(_) | T::Const(_) => 1,
        T::Un(_, g) => 1 + size(g),
        T::Bin(_, l, r) => 1 + size(l) + size(r),
    }
}

fn build(t: &T, s: &mut ExprStore) -> NodeId {
    match t {
        T::Var(v) => s.make_node(Node::Var(VarId(*v))).unwrap(),
        T::Const(v) => s.constant(*v),
        T::Un(op, g) => {
            let g = build(g, s);
            s.unary(*op, g).unwrap()
        }
        T::Bin(op, l, r) => {
            let l = build(l, s);
            let r = build(r, s);
            s.binary(*op, l, r).unwrap()
        }
    }
}

const COPY: DiffPolicy = DiffPolicy::new(SubtreePolicy::Copy, true);

#[test]
fn copy_policy_matches_reference_tree() {
    let mut r = rng(11);
    for _ in 0..200 {
        let e = random_expr(&mut r, 6, 3);
        let t = to_tree(&e.store, e.root);
        for v in e.var_ids() {
            let want = diff(&t, v.0);
            let d = symbolic_derivative(&e, v, COPY, false).unwrap();
            assert_eq!(d.size(), size(&want));
            let mut s = e.store.empty_like(adsym_core::Sharing::TreeOnly);
            let w = build(&want, &mut s);
            assert_eq!(pretty(d.store(), d.root()), pretty(&s, w));
        }
    }
}

#[test]
fn copy_sizes_on_shared_dags() {
    let mut r = rng(12);
    for _ in 0..100 {
        let e = random_dag(&mut r, 14, 2);
        if e.tree_size() > 2_000 {
            continue;
        }
        let t = to_tree(&e.store, e.root);
        for v in e.var_ids() {
            let d = symbolic_derivative(&e, v, COPY, false).unwrap();
            assert_eq!(d.size(), size(&diff(&t, v.0)));
        }
    }
}

#[test]
fn every_engine_agrees_with_reference_values() {
    let mut r = rng(13);
    let mut checked = 0;
    while checked < 200 {
        let e = random_expr(&mut r, 6, 2);
        let vars = e.var_ids();
        let Some(at) = sample_valuation(
            &mut r,
            &e.store,
            e.root,
            &vars,
            (-2.0, 2.0),
            Regularity::default(),
            50,
        ) else {
            continue;
        };
        let t = to_tree(&e.store, e.root);
        for &v in &vars {
            let mut s = e.store.empty_like(adsym_core::Sharing::TreeOnly);
            let w = build(&diff(&t, v.0), &mut s);
            let Ok(want) = eval(&s, w, &at) else { continue };
            for policy in SubtreePolicy::ALL {
                let d = symbolic_derivative(&e, v, DiffPolicy::new(policy, true), false).unwrap();
                let got = eval(d.store(), d.root(), &at).unwrap();
                assert_eq!(got.to_bits(), want.to_bits(), "{policy:?}");
            }
            let fd = finite_difference(&e.store, e.root, v, &at, 1e-6).unwrap();
            assert!(want.is_finite() && fd.is_finite());
        }
        checked += 1;
    }
}
