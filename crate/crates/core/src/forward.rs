//! Forward-mode differentiation: one sweep over the DAG in id order storing
//! the tangent `v̇ = ∂v/∂x_j` of every reachable node.
//!
//! For an interior node the tangent is the sum over its child edges of
//! `local_partial · child_tangent`. Terms are combined left before right and
//! the partial is always the left factor; the symbolic engine follows the
//! same convention so the two produce identical graphs.

use alloc::vec;
use alloc::vec::Vec;

use crate::emit::{Emitter, Refs};
use crate::op::OpKind;
use crate::oplog::{OpLog, Role};
use crate::rules::{DerivRuleTable, Partials, Site};
use crate::store::{Expr, ExprStore, Node, NodeId, Sharing, VarId};
use crate::{Error, Result};

/// Tangent node for every input node reached by a sweep.
#[derive(Clone, Debug)]
pub struct DerivativeTable {
    wrt: VarId,
    entries: Vec<Option<NodeId>>,
    log: OpLog,
}

impl DerivativeTable {
    pub fn wrt(&self) -> VarId {
        self.wrt
    }

    /// Tangent of an input node, if the sweep reached it.
    pub fn get(&self, node: NodeId) -> Option<NodeId> {
        self.entries.get(node.index()).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|d| (NodeId(i as u32), d)))
    }

    pub fn len(&self) -> usize {
        self.entries.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn log(&self) -> &OpLog {
        &self.log
    }
}

/// Result of one sweep: the input store extended with derivative nodes.
#[derive(Clone, Debug)]
pub struct Derivative {
    pub expr: Expr,
    pub table: DerivativeTable,
    /// Number of nodes that came from the input.
    pub input_len: usize,
}

impl Derivative {
    pub fn log(&self) -> &OpLog {
        self.table.log()
    }

    /// Nodes reachable from the derivative root that the sweep added.
    pub fn size(&self) -> usize {
        added_size(&self.expr.store, self.expr.root, self.input_len)
    }
}

pub(crate) fn added_size(store: &ExprStore, root: NodeId, input_len: usize) -> usize {
    store
        .reachable(root)
        .iter()
        .skip(input_len)
        .filter(|&&r| r)
        .count()
}

/// Differentiates `root` with respect to `wrt` into a copy of `dag`.
pub fn forward_derivative(
    dag: &ExprStore,
    root: NodeId,
    wrt: VarId,
    simplify: bool,
) -> Result<Derivative> {
    let mut store = dag.clone();
    let input_len = store.len();
    let (d, table) = forward_derivative_in(&mut store, root, wrt, simplify)?;
    Ok(Derivative {
        expr: Expr::new(store, d),
        table,
        input_len,
    })
}

/// Sweep that appends derivative nodes to `store` itself and sets its
/// simplify flag to `simplify`.
pub fn forward_derivative_in(
    store: &mut ExprStore,
    root: NodeId,
    wrt: VarId,
    simplify: bool,
) -> Result<(NodeId, DerivativeTable)> {
    if store.sharing() != Sharing::HashConsed || store.is_forest() {
        return Err(Error::Contract("forward mode runs on a hash-consed DAG"));
    }
    if root.index() >= store.len() {
        return Err(Error::DanglingNode {
            node: root,
            len: store.len(),
        });
    }
    store.set_simplify(simplify);
    let rules = DerivRuleTable::standard();
    let live = store.reachable(root);
    let n = root.index() + 1;
    let mut entries: Vec<Option<NodeId>> = vec![None; n];
    let mut log = OpLog::new();
    let mut em = Emitter::new(store, &mut log, Refs::Identity, usize::MAX);

    for i in (0..n).filter(|&i| live[i]) {
        let id = NodeId(i as u32);
        let tangent =
            |e: &[Option<NodeId>], c: NodeId| e[c.index()].expect("children precede parents");
        let payload = em.out.node(id);
        let d = match payload {
            Node::Var(v) => em.make(Role::Seed, Node::Const(if v == wrt { 1.0 } else { 0.0 }))?,
            Node::Const(_) => em.make(Role::Seed, Node::Const(0.0))?,
            Node::Unary(_, g) => {
                let site = Site::of(id, payload)?;
                let Partials::One(p) = rules.partials(&mut em, &site)? else {
                    unreachable!("arity checked by the rule table")
                };
                em.make(
                    Role::ChainMultiply,
                    Node::Binary(OpKind::Mul, p, tangent(&entries, g)),
                )?
            }
            Node::Binary(_, l, r) => {
                let site = Site::of(id, payload)?;
                let Partials::Two(pl, pr) = rules.partials(&mut em, &site)? else {
                    unreachable!("arity checked by the rule table")
                };
                let tl = em.make(
                    Role::ChainMultiply,
                    Node::Binary(OpKind::Mul, pl, tangent(&entries, l)),
                )?;
                let tr = em.make(
                    Role::ChainMultiply,
                    Node::Binary(OpKind::Mul, pr, tangent(&entries, r)),
                )?;
                em.make(Role::FanInAdd, Node::Binary(OpKind::Add, tl, tr))?
            }
            Node::SymbolRef(_) => unreachable!("forest stores rejected above"),
        };
        entries[i] = Some(d);
    }
    let d = entries[root.index()].expect("root is reachable");
    Ok((d, DerivativeTable { wrt, entries, log }))
}

/// One independent sweep per variable, each with its own store and log.
pub fn forward_gradient(
    dag: &ExprStore,
    root: NodeId,
    vars: &[VarId],
    simplify: bool,
) -> Result<Vec<(VarId, Derivative)>> {
    if vars.is_empty() {
        return Err(Error::Contract("gradient needs at least one variable"));
    }
    vars.iter()
        .map(|&v| forward_derivative(dag, root, v, simplify).map(|d| (v, d)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{eval, finite_difference, Valuation};
    use crate::parser::parse_expr;

    fn value(d: &Derivative, at: &Valuation) -> f64 {
        eval(&d.expr.store, d.expr.root, at).unwrap()
    }

    #[test]
    fn seed_of_the_variable_itself() {
        let f = parse_expr("x1").unwrap();
        let d = forward_derivative(&f.store, f.root, VarId(0), false).unwrap();
        assert_eq!(d.expr.store.node(d.expr.root), Node::Const(1.0));
        assert_eq!(d.size(), 1);
    }

    #[test]
    fn absent_variable_gives_zero() {
        let f = parse_expr("sin(x)*x").unwrap();
        let d = forward_derivative(&f.store, f.root, VarId(9), true).unwrap();
        assert_eq!(d.expr.store.node(d.expr.root), Node::Const(0.0));
    }

    #[test]
    fn figure_one_slope_matches_finite_differences() {
        let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        let at = Valuation::new().with(VarId(0), 0.3).with(VarId(1), 0.4);
        let d = forward_derivative(&f.store, f.root, VarId(0), false).unwrap();
        let fd = finite_difference(&f.store, f.root, VarId(0), &at, 1e-6).unwrap();
        let got = value(&d, &at);
        // frozen from the finite-difference oracle: cos(1.4)
        assert!((fd - 0.169_967_142_900_241_2).abs() < 1e-8);
        assert!((got - fd).abs() < 1e-8);
        assert!((got - libm::cos(1.4)).abs() < 1e-14);
    }

    #[test]
    fn speelpenning_three() {
        let f = parse_expr("x1*x2*x3").unwrap();
        let at = Valuation::new()
            .with(VarId(0), 2.0)
            .with(VarId(1), 3.0)
            .with(VarId(2), 5.0);
        let grad = forward_gradient(&f.store, f.root, &f.var_ids(), false).unwrap();
        let values: Vec<f64> = grad.iter().map(|(_, d)| value(d, &at)).collect();
        assert_eq!(values, vec![15.0, 10.0, 6.0]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let f = parse_expr("x1+x2").unwrap();
        let at = Valuation::new().with(VarId(0), -4.5).with(VarId(1), 11.0);
        for (_, d) in forward_gradient(&f.store, f.root, &f.var_ids(), false).unwrap() {
            assert_eq!(value(&d, &at), 1.0);
        }
    }

    #[test]
    fn square_via_pow() {
        let f = parse_expr("x1^2").unwrap();
        let at = Valuation::new().with(VarId(0), 3.0);
        let d = forward_derivative(&f.store, f.root, VarId(0), false).unwrap();
        let fd = finite_difference(&f.store, f.root, VarId(0), &at, 1e-6).unwrap();
        assert!((fd - 6.0).abs() < 1e-6);
        assert_eq!(value(&d, &at), 6.0);
    }

    #[test]
    fn sum_tangent_is_one_fan_in_add() {
        let f = parse_expr("a+b").unwrap();
        let d = forward_derivative(&f.store, f.root, VarId(0), false).unwrap();
        let s = &d.expr.store;
        let Node::Binary(OpKind::Add, l, r) = s.node(d.expr.root) else {
            panic!("expected add")
        };
        let one = |n: NodeId| s.node(n) == Node::Const(1.0);
        let Node::Binary(OpKind::Mul, p, t) = s.node(l) else {
            panic!()
        };
        assert!(one(p) && one(t));
        let Node::Binary(OpKind::Mul, p, t) = s.node(r) else {
            panic!()
        };
        assert!(one(p) && s.node(t) == Node::Const(0.0));
        // simplified form collapses to the constant 1
        let d = forward_derivative(&f.store, f.root, VarId(0), true).unwrap();
        assert_eq!(d.expr.store.node(d.expr.root), Node::Const(1.0));
    }

    #[test]
    fn every_reachable_node_gets_a_tangent() {
        let mut f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        // an unreachable node is skipped
        let x1 = NodeId(0);
        f.store.unary(OpKind::Ln, x1).unwrap();
        let d = forward_derivative(&f.store, f.root, VarId(0), false).unwrap();
        assert_eq!(d.table.len(), 6);
        assert!(d.table.get(NodeId(6)).is_none());
    }

    #[test]
    fn operation_count_depends_on_dag_not_tree() {
        // x^(2^k) by repeated squaring: work grows linearly in k
        let mut totals = Vec::new();
        for k in [10, 20, 40] {
            let mut s = ExprStore::hash_consed();
            let mut t = s.var("x");
            for _ in 0..k {
                t = s.binary(OpKind::Mul, t, t).unwrap();
            }
            let d = forward_derivative(&s, t, VarId(0), false).unwrap();
            totals.push(d.log().total());
        }
        // seed + 3 constructions per squaring
        assert_eq!(totals, vec![31, 61, 121]);
    }

    #[test]
    fn rejects_tree_only_input() {
        let mut s = ExprStore::tree_only();
        let x = s.var("x");
        assert!(forward_derivative(&s, x, VarId(0), false).is_err());
    }
}
