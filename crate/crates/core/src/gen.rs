//! Seeded random generators for expressions and evaluation points.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{node_value, Valuation};
use crate::op::OpKind;
use crate::store::{Expr, ExprStore, Node, NodeId, VarId};

/// The generator used throughout; identical streams on every platform.
pub type GenRng = ChaCha8Rng;

pub fn rng(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

const CONSTANTS: [f64; 7] = [0.0, 1.0, 2.0, 3.0, 0.5, -1.5, 2.25];
const EXPONENTS: [i32; 7] = [-2, -1, 0, 1, 2, 3, 4];

/// Any operator kind, each with equal weight.
pub fn random_op<R: Rng>(rng: &mut R) -> OpKind {
    let unary = OpKind::UNARY.len() + 1;
    let k = rng.gen_range(0..OpKind::BINARY.len() + unary);
    if k < OpKind::BINARY.len() {
        OpKind::BINARY[k]
    } else if k - OpKind::BINARY.len() < OpKind::UNARY.len() {
        OpKind::UNARY[k - OpKind::BINARY.len()]
    } else {
        OpKind::PowConst(*EXPONENTS.choose(rng).expect("non-empty"))
    }
}

fn var_names(store: &mut ExprStore, n_vars: usize) -> Vec<NodeId> {
    (1..=n_vars.max(1))
        .map(|i| store.var(&format!("x{i}")))
        .collect()
}

/// A variable or constant leaf. Variables are re-made through the store so
/// a tree-only store gets a fresh node per occurrence.
fn leaf<R: Rng>(rng: &mut R, store: &mut ExprStore, vars: &[NodeId]) -> NodeId {
    if rng.gen_bool(0.75) {
        let Node::Var(v) = store.node(*vars.choose(rng).expect("at least one variable")) else {
            unreachable!("variable nodes")
        };
        store.make_node(Node::Var(v)).expect("known variable")
    } else {
        store.constant(*CONSTANTS.choose(rng).expect("non-empty"))
    }
}

/// Fraction of reachable nodes with two or more incoming edges.
pub fn shared_fraction(store: &ExprStore, root: NodeId) -> f64 {
    let live = store.reachable(root);
    let parents = store.parent_counts(root);
    let total = live.iter().filter(|&&l| l).count();
    let shared = (0..live.len())
        .filter(|&i| live[i] && parents[i] >= 2)
        .count();
    shared as f64 / total as f64
}

/// Random hash-consed DAG with at most `max_nodes` nodes (at least a few)
/// over variables `x1..x{n_vars}`. Children are drawn from already built
/// nodes, so subexpressions are reused; parentless nodes are summed into the
/// root. At least 20% of the nodes have several parents.
pub fn random_dag<R: Rng>(rng: &mut R, max_nodes: usize, n_vars: usize) -> Expr {
    let max_nodes = max_nodes.max(n_vars.max(1) + 3);
    loop {
        let e = dag_attempt(rng, max_nodes, n_vars);
        if shared_fraction(&e.store, e.root) >= 0.2 {
            return e;
        }
    }
}

fn dag_attempt<R: Rng>(rng: &mut R, max_nodes: usize, n_vars: usize) -> Expr {
    let mut s = ExprStore::hash_consed();
    let mut pool = var_names(&mut s, n_vars);
    pool.push(s.constant(*CONSTANTS.choose(rng).expect("non-empty")));
    let target = rng.gen_range(pool.len() + 1..=max_nodes);
    let mut sink = Vec::new();
    let mut stalls = 0;
    // each sink left over costs one extra Add when the root is assembled
    while s.len() + sink.iter().filter(|&&b| b).count() < target && stalls < 100 {
        let pick = |rng: &mut R, pool: &[NodeId]| {
            if rng.gen_bool(0.5) {
                pool[pool.len().saturating_sub(6)..]
                    .choose(rng)
                    .copied()
                    .expect("non-empty")
            } else {
                *pool.choose(rng).expect("non-empty")
            }
        };
        let op = random_op(rng);
        let payload = if op.is_binary() {
            Node::Binary(op, pick(rng, &pool), pick(rng, &pool))
        } else {
            Node::Unary(op, pick(rng, &pool))
        };
        let before = s.len();
        let id = s.make_node(payload).expect("children exist");
        if s.len() == before {
            stalls += 1;
            continue;
        }
        stalls = 0;
        sink.resize(s.len(), false);
        for c in payload.children() {
            sink[c.index()] = false;
        }
        sink[id.index()] = true;
        pool.push(id);
    }
    let mut roots = (0..s.len())
        .filter(|&i| sink.get(i) == Some(&true))
        .map(|i| NodeId(i as u32));
    let first = roots.next().unwrap_or(*pool.last().expect("non-empty"));
    let root = roots.fold(first, |acc, r| {
        s.binary(OpKind::Add, acc, r).expect("children exist")
    });
    Expr::new(s, root)
}

/// Random tree of exactly `n` nodes in a tree-only store, over the ops
/// `+ - * / neg sin cos exp ln sqrt`.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, n_vars: usize) -> Expr {
    assert!(n >= 1, "a tree has at least one node");
    let mut s = ExprStore::tree_only();
    let vars = var_names(&mut s, n_vars);
    let root = tree_of_size(rng, &mut s, &vars, n);
    Expr::new(s, root)
}

fn tree_of_size<R: Rng>(rng: &mut R, s: &mut ExprStore, vars: &[NodeId], n: usize) -> NodeId {
    if n == 1 {
        return leaf(rng, s, vars);
    }
    if n == 2 || rng.gen_bool(0.2) {
        let c = tree_of_size(rng, s, vars, n - 1);
        let op = *OpKind::UNARY.choose(rng).expect("non-empty");
        return s.unary(op, c).expect("child exists");
    }
    let left = rng.gen_range(1..n - 1);
    let l = tree_of_size(rng, s, vars, left);
    let r = tree_of_size(rng, s, vars, n - 1 - left);
    let op = *OpKind::BINARY.choose(rng).expect("non-empty");
    s.binary(op, l, r).expect("children exist")
}

/// Random hash-consed expression with at most `max_depth` nodes on any
/// root-to-leaf path, using every operator kind.
pub fn random_expr<R: Rng>(rng: &mut R, max_depth: usize, n_vars: usize) -> Expr {
    let mut s = ExprStore::hash_consed();
    let vars = var_names(&mut s, n_vars);
    let root = expr_of_depth(rng, &mut s, &vars, max_depth);
    Expr::new(s, root)
}

fn expr_of_depth<R: Rng>(rng: &mut R, s: &mut ExprStore, vars: &[NodeId], depth: usize) -> NodeId {
    if depth <= 1 || rng.gen_bool(0.2) {
        return leaf(rng, s, vars);
    }
    let op = random_op(rng);
    if op.is_binary() {
        let l = expr_of_depth(rng, s, vars, depth - 1);
        let r = expr_of_depth(rng, s, vars, depth - 1);
        s.binary(op, l, r).expect("children exist")
    } else {
        let c = expr_of_depth(rng, s, vars, depth - 1);
        s.unary(op, c).expect("child exists")
    }
}

/// Margin kept from singularities and domain edges, and the largest
/// magnitude any intermediate value may take.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularity {
    pub margin: f64,
    pub max_magnitude: f64,
}

impl Default for Regularity {
    fn default() -> Self {
        Regularity {
            margin: 1e-3,
            max_magnitude: 1e6,
        }
    }
}

/// True when every node reachable from `root` evaluates at `at` away from
/// singularities: denominators and negative-power bases at least `margin`
/// from zero, `ln`/`sqrt` arguments at least `margin` above zero, and all
/// values finite and bounded.
pub fn is_regular(store: &ExprStore, root: NodeId, at: &Valuation, reg: Regularity) -> bool {
    let live = store.reachable(root);
    let mut vals: Vec<f64> = alloc::vec![0.0; root.index() + 1];
    for i in (0..=root.index()).filter(|&i| live[i]) {
        let node = store.node(NodeId(i as u32));
        let ok = match node {
            Node::Binary(OpKind::Div, _, r) => vals[r.index()].abs() >= reg.margin,
            Node::Unary(OpKind::Ln | OpKind::Sqrt, c) => vals[c.index()] >= reg.margin,
            Node::Unary(OpKind::PowConst(n), c) if n < 0 => vals[c.index()].abs() >= reg.margin,
            _ => true,
        };
        if !ok {
            return false;
        }
        match node_value(store, node, &vals, at) {
            Ok(v) if v.is_finite() && v.abs() <= reg.max_magnitude => vals[i] = v,
            _ => return false,
        }
    }
    true
}

/// Draws each listed variable uniformly from `[lo, hi)` until the point is
/// regular; `None` after `tries` rejections.
pub fn sample_valuation<R: Rng>(
    rng: &mut R,
    store: &ExprStore,
    root: NodeId,
    vars: &[VarId],
    range: (f64, f64),
    reg: Regularity,
    tries: usize,
) -> Option<Valuation> {
    for _ in 0..tries {
        let mut at = Valuation::new();
        for &v in vars {
            at.set(v, rng.gen_range(range.0..range.1));
        }
        if is_regular(store, root, &at, reg) {
            return Some(at);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dags_respect_size_and_sharing() {
        let mut r = rng(1);
        for _ in 0..200 {
            let e = random_dag(&mut r, 60, 3);
            assert!(e.store.len() <= 60, "{}", e.store.len());
            assert!(shared_fraction(&e.store, e.root) >= 0.2);
            // every interior node feeds the root
            let live = e.store.reachable(e.root);
            assert!(e
                .store
                .nodes()
                .iter()
                .zip(&live)
                .all(|(n, &l)| l || n.is_leaf()));
        }
    }

    #[test]
    fn trees_have_exact_size() {
        let mut r = rng(2);
        for n in [1, 2, 3, 16, 100, 1024] {
            let t = random_tree(&mut r, n, 4);
            assert_eq!(t.tree_size(), n as u128);
            assert!(t.store.is_tree(t.root));
        }
    }

    #[test]
    fn expressions_respect_depth() {
        fn depth(s: &ExprStore, id: NodeId) -> usize {
            1 + s
                .node(id)
                .children()
                .map(|c| depth(s, c))
                .max()
                .unwrap_or(0)
        }
        let mut r = rng(3);
        for _ in 0..100 {
            let e = random_expr(&mut r, 8, 3);
            assert!(depth(&e.store, e.root) <= 8);
        }
    }

    #[test]
    fn same_seed_same_expression() {
        let a = random_dag(&mut rng(9), 80, 2);
        let b = random_dag(&mut rng(9), 80, 2);
        assert_eq!(a.store.nodes(), b.store.nodes());
    }

    #[test]
    fn sampler_avoids_singularities() {
        let e = crate::parser::parse_expr("ln(x) / (x - 1)").unwrap();
        let mut r = rng(4);
        for _ in 0..50 {
            let at = sample_valuation(
                &mut r,
                &e.store,
                e.root,
                &[VarId(0)],
                (-2.0, 2.0),
                Regularity::default(),
                1000,
            )
            .unwrap();
            let x = at.get(VarId(0)).unwrap();
            assert!(x >= 1e-3 && (x - 1.0).abs() >= 1e-3);
        }
        let never = crate::parser::parse_expr("sqrt(-1 - x^2)").unwrap();
        assert!(sample_valuation(
            &mut r,
            &never.store,
            never.root,
            &[VarId(0)],
            (-2.0, 2.0),
            Regularity::default(),
            100
        )
        .is_none());
    }
}
