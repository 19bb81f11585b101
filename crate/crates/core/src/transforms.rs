//! Conversions between the three representations of an expression (DAG,
//! tree, forest) and the size metrics that compare them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::emit::{append_tree, flatten_tree};
use crate::store::{Expr, ExprForest, ExprStore, Node, NodeId, Sharing};
use crate::{Error, Result};

/// Unfolds the expression under `root` into a tree-only store, duplicating
/// every shared subexpression. Fails before allocating when the tree would
/// exceed `budget` nodes.
pub fn unfold(dag: &ExprStore, root: NodeId, budget: usize) -> Result<Expr> {
    if budget == 0 {
        return Err(Error::Contract("unfold budget must be at least 1"));
    }
    check(dag, root)?;
    let size = dag.tree_size(root);
    if size > budget as u128 {
        return Err(Error::BudgetExceeded {
            estimated: size,
            budget,
        });
    }
    let mut out = dag.empty_like(Sharing::TreeOnly);
    let flat = flatten_tree(dag, root);
    let root = append_tree(&mut out, &flat);
    Ok(Expr::new(out, root))
}

/// Rebuilds the part reachable from `root` in a fresh hash-consed store,
/// merging structurally identical subtrees and inlining symbol references.
/// Sharing already present is preserved.
pub fn cons_tree(tree: &ExprStore, root: NodeId) -> Result<Expr> {
    check(tree, root)?;
    let mut out = tree.empty_like(Sharing::HashConsed);
    let mut map: Vec<Option<NodeId>> = vec![None; root.index() + 1];
    for id in tree.reachable_ids(root) {
        let new = match tree.node(id) {
            Node::SymbolRef(b) => {
                map[tree.binding(b)?.root.index()].expect("binding precedes reference")
            }
            n => out.intern(n.map_children(|c| map[c.index()].expect("children precede parents"))),
        };
        map[id.index()] = Some(new);
    }
    let root = map[root.index()].expect("root is reachable");
    Ok(Expr::new(out, root))
}

/// Expands every binding reference of a forest in place, keeping sharing.
pub fn inline_forest(forest: &ExprForest) -> Result<Expr> {
    cons_tree(&forest.store, forest.main)
}

/// Converts a DAG into a forest: every interior node with two or more
/// incoming edges becomes a binding `t1`, `t2`, … (in topological order) and
/// its uses become symbol references.
pub fn to_forest(dag: &ExprStore, root: NodeId) -> Result<ExprForest> {
    check(dag, root)?;
    if dag.sharing() != Sharing::HashConsed || dag.is_forest() {
        return Err(Error::Contract("to_forest expects a hash-consed DAG"));
    }
    let parents = dag.parent_counts(root);
    let mut out = ExprStore::forest();
    for name in dag.vars() {
        out.intern_var(name);
    }
    let mut map: Vec<Option<NodeId>> = vec![None; root.index() + 1];
    let mut next = 1;
    for id in dag.reachable_ids(root) {
        let node = dag.node(id);
        let new =
            out.intern(node.map_children(|c| map[c.index()].expect("children precede parents")));
        map[id.index()] = Some(if !node.is_leaf() && parents[id.index()] >= 2 {
            let b = out.add_binding(&format!("t{next}"), new)?;
            next += 1;
            out.make_node(Node::SymbolRef(b))?
        } else {
            new
        });
    }
    let main = map[root.index()].expect("root is reachable");
    Ok(ExprForest { store: out, main })
}

/// Sizes of one expression in each representation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SwellReport {
    pub dag_nodes: usize,
    /// Unfolded tree size; exact even when it was not constructed.
    pub tree_nodes: u128,
    /// False when the tree exceeded the budget and its size comes from
    /// counting path multiplicities instead of construction.
    pub tree_constructed: bool,
    /// Distinct forest nodes, each symbol reference counted once.
    pub forest_nodes: usize,
    pub forest_bindings: usize,
    /// Forest size when every binding and main is written out as a tree,
    /// counting every symbol-reference occurrence.
    pub forest_occurrences: u128,
    pub swell_ratio: f64,
}

pub fn swell_report(dag: &ExprStore, root: NodeId, budget: usize) -> Result<SwellReport> {
    check(dag, root)?;
    let consed;
    let (dag, root) = if dag.sharing() == Sharing::HashConsed && !dag.is_forest() {
        (dag, root)
    } else {
        consed = cons_tree(dag, root)?;
        (&consed.store, consed.root)
    };
    let dag_nodes = dag.node_count(root);
    let (tree_nodes, tree_constructed) = match unfold(dag, root, budget.max(1)) {
        Ok(tree) => (tree.node_count() as u128, true),
        Err(Error::BudgetExceeded { estimated, .. }) => (estimated, false),
        Err(e) => return Err(e),
    };
    let forest = to_forest(dag, root)?;
    Ok(SwellReport {
        dag_nodes,
        tree_nodes,
        tree_constructed,
        forest_nodes: forest.node_count(),
        forest_bindings: forest.bindings().len(),
        forest_occurrences: forest.occurrence_count(),
        swell_ratio: tree_nodes as f64 / dag_nodes as f64,
    })
}

fn check(store: &ExprStore, root: NodeId) -> Result<()> {
    if root.index() < store.len() {
        Ok(())
    } else {
        Err(Error::DanglingNode {
            node: root,
            len: store.len(),
        })
    }
}
