//! Checks that forward mode and symbolic differentiation did the same work
//! and built the same graph, plus a randomized driver over many DAGs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::forward::forward_derivative;
use crate::gen::{random_dag, rng};
use crate::oplog::{LogEntry, OpLog};
use crate::store::{ExprStore, Node, NodeId};
use crate::symbolic::{
    symbolic_derivative, symbolic_derivative_with, DiffOptions, DiffPolicy, SubtreePolicy,
};
use crate::transforms::cons_tree;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpLogVerdict {
    pub equal: bool,
    pub totals: (u64, u64),
    /// Entries whose counts differ, with the count on each side.
    pub differences: Vec<(LogEntry, u64, u64)>,
}

/// Multiset comparison of two operation logs.
pub fn compare_op_logs(a: &OpLog, b: &OpLog) -> OpLogVerdict {
    let mut differences = Vec::new();
    for (e, n) in a.iter() {
        if b.count(e) != n {
            differences.push((e, n, b.count(e)));
        }
    }
    for (e, n) in b.iter() {
        if a.count(e) == 0 {
            differences.push((e, 0, n));
        }
    }
    differences.sort();
    OpLogVerdict {
        equal: differences.is_empty(),
        totals: (a.total(), b.total()),
        differences,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum StructuralVerdict {
    /// The graphs are isomorphic; `nodes` distinct nodes were matched.
    Equal { nodes: usize },
    /// First mismatch found. `path` lists child positions from the roots.
    Differ { path: Vec<usize>, reason: String },
}

impl StructuralVerdict {
    pub fn is_equal(&self) -> bool {
        matches!(self, StructuralVerdict::Equal { .. })
    }
}

/// Graph isomorphism of the parts reachable from two roots, by simultaneous
/// traversal. Payloads must match exactly (constants bitwise, variables by
/// name) and node identity must correspond one to one, so a shared node
/// never matches two copies. Forest inputs are inlined first.
pub fn compare_structural(
    a: &ExprStore,
    a_root: NodeId,
    b: &ExprStore,
    b_root: NodeId,
) -> Result<StructuralVerdict> {
    let (ai, bi);
    let (a, a_root) = if a.is_forest() {
        ai = cons_tree(a, a_root)?;
        (&ai.store, ai.root)
    } else {
        (a, a_root)
    };
    let (b, b_root) = if b.is_forest() {
        bi = cons_tree(b, b_root)?;
        (&bi.store, bi.root)
    } else {
        (b, b_root)
    };
    for (s, r) in [(a, a_root), (b, b_root)] {
        if r.index() >= s.len() {
            return Err(crate::Error::DanglingNode {
                node: r,
                len: s.len(),
            });
        }
    }
    let mut a_to_b: Vec<Option<NodeId>> = vec![None; a.len()];
    let mut b_to_a: Vec<Option<NodeId>> = vec![None; b.len()];
    // (a node, b node, parent visit, child position)
    let mut visits: Vec<(NodeId, NodeId, usize, usize)> = Vec::new();
    let mut stack = vec![(a_root, b_root, usize::MAX, 0)];
    let mut matched = 0;
    while let Some((x, y, parent, pos)) = stack.pop() {
        let here = visits.len();
        visits.push((x, y, parent, pos));
        let fail = |reason: String| {
            let mut path = Vec::new();
            let mut at = here;
            while visits[at].2 != usize::MAX {
                path.push(visits[at].3);
                at = visits[at].2;
            }
            path.reverse();
            Ok(StructuralVerdict::Differ { path, reason })
        };
        match (a_to_b[x.index()], b_to_a[y.index()]) {
            (Some(y2), _) if y2 != y => {
                return fail(format!("left node {} already matched elsewhere", x.0))
            }
            (_, Some(x2)) if x2 != x => {
                return fail(format!("right node {} already matched elsewhere", y.0))
            }
            (Some(_), Some(_)) => continue,
            _ => {}
        }
        let (p, q) = (a.node(x), b.node(y));
        let same = match (p, q) {
            (Node::Var(u), Node::Var(v)) => a.var_name(u) == b.var_name(v),
            (Node::Const(u), Node::Const(v)) => u.to_bits() == v.to_bits(),
            (Node::Unary(f, _), Node::Unary(g, _)) | (Node::Binary(f, ..), Node::Binary(g, ..)) => {
                f == g
            }
            _ => false,
        };
        if !same {
            return fail(format!("payloads differ: {p:?} vs {q:?}"));
        }
        a_to_b[x.index()] = Some(y);
        b_to_a[y.index()] = Some(x);
        matched += 1;
        let kids: Vec<(NodeId, NodeId)> = p.children().zip(q.children()).collect();
        for (i, &(c, d)) in kids.iter().enumerate().rev() {
            stack.push((c, d, here, i));
        }
    }
    Ok(StructuralVerdict::Equal { nodes: matched })
}

/// One failed comparison in the randomized suite.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CaseFailure {
    pub case: usize,
    /// Regenerate the DAG with `random_dag(&mut rng(case_seed), max_nodes, n_vars)`.
    pub case_seed: u64,
    pub n_vars: usize,
    pub var: String,
    pub simplify: bool,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SuiteSummary {
    pub seed: u64,
    pub cases: usize,
    /// Forward versus symbolic (share, memoized) comparisons made.
    pub comparisons: usize,
    pub failures: Vec<CaseFailure>,
    /// Comparisons where symbolic (cse, memoized) logged a different
    /// operation multiset than forward mode.
    pub cse_log_mismatches: usize,
    /// Negative control: runs of symbolic differentiation without
    /// memoization, and how many of them logged strictly more operations
    /// than forward mode.
    pub unmemoized_runs: usize,
    pub unmemoized_more_work: usize,
    pub total_nodes: usize,
    pub shared_nodes: usize,
}

/// Largest unfolded size for which the unmemoized control is attempted.
const CONTROL_LIMIT: u128 = 50_000;

/// Generates `n_cases` random DAGs of at most `max_nodes` nodes and, for
/// every variable with simplification off and on, compares forward mode
/// against memoized symbolic differentiation under the share policy.
pub fn randomized_equivalence_suite(seed: u64, n_cases: usize, max_nodes: usize) -> SuiteSummary {
    let mut master = rng(seed);
    let mut summary = SuiteSummary {
        seed,
        cases: n_cases,
        ..SuiteSummary::default()
    };
    for case in 0..n_cases {
        let case_seed = master.next_u64();
        let mut r = rng(case_seed);
        let n_vars = r.gen_range(1..=4);
        let dag = random_dag(&mut r, max_nodes, n_vars);
        let parents = dag.store.parent_counts(dag.root);
        summary.total_nodes += dag.node_count();
        summary.shared_nodes += parents.iter().filter(|&&c| c >= 2).count();
        let control = dag.tree_size() <= CONTROL_LIMIT;
        for v in dag.var_ids() {
            for simplify in [false, true] {
                summary.comparisons += 1;
                let mut fail = |reason: String| {
                    summary.failures.push(CaseFailure {
                        case,
                        case_seed,
                        n_vars,
                        var: String::from(dag.store.var_name(v).unwrap_or("?")),
                        simplify,
                        reason,
                    })
                };
                match compare_case(&dag.store, dag.root, v, simplify) {
                    Ok(CaseOutcome {
                        log_ok,
                        graph,
                        cse_log_ok,
                        forward_total,
                    }) => {
                        if !log_ok.equal {
                            fail(format!("operation logs differ: {:?}", log_ok.differences));
                        } else if let StructuralVerdict::Differ { path, reason } = graph {
                            fail(format!("graphs differ at {path:?}: {reason}"));
                        }
                        if !cse_log_ok {
                            summary.cse_log_mismatches += 1;
                        }
                        if control {
                            let opts = DiffOptions::new(
                                DiffPolicy::new(SubtreePolicy::Share, false),
                                simplify,
                            );
                            if let Ok(d) = symbolic_derivative_with(&dag, v, &opts) {
                                summary.unmemoized_runs += 1;
                                if d.log.total() > forward_total {
                                    summary.unmemoized_more_work += 1;
                                }
                            }
                        }
                    }
                    Err(e) => fail(format!("engine error: {e}")),
                }
            }
        }
    }
    summary
}

struct CaseOutcome {
    log_ok: OpLogVerdict,
    graph: StructuralVerdict,
    cse_log_ok: bool,
    forward_total: u64,
}

fn compare_case(
    store: &ExprStore,
    root: NodeId,
    v: crate::VarId,
    simplify: bool,
) -> Result<CaseOutcome> {
    let fwd = forward_derivative(store, root, v, simplify)?;
    let share = symbolic_derivative(
        (store, root),
        v,
        DiffPolicy::new(SubtreePolicy::Share, true),
        simplify,
    )?;
    let cse = symbolic_derivative(
        (store, root),
        v,
        DiffPolicy::new(SubtreePolicy::Cse, true),
        simplify,
    )?;
    Ok(CaseOutcome {
        log_ok: compare_op_logs(fwd.log(), &share.log),
        graph: compare_structural(&fwd.expr.store, fwd.expr.root, share.store(), share.root())?,
        cse_log_ok: compare_op_logs(fwd.log(), &cse.log).equal,
        forward_total: fwd.log().total(),
    })
}
