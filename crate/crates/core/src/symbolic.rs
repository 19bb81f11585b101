//! Symbolic differentiation by recursive rewriting.
//!
//! A unary node `f(g)` becomes `∂f/∂g · dg`; a binary node `f(g1, g2)`
//! becomes `∂f/∂g1 · dg1 + ∂f/∂g2 · dg2`. Where the result mentions a
//! subexpression of the input, [`SubtreePolicy`] decides whether it is
//! copied, pointed to, or named as a common subexpression. With memoization
//! on, each distinct input node is differentiated once per call.
//!
//! The recursion runs on an explicit stack so deep inputs do not exhaust the
//! thread stack.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::emit::{Emitter, Refs};
use crate::forward::added_size;
use crate::op::OpKind;
use crate::oplog::{OpLog, Role};
use crate::rules::{DerivRuleTable, Partials, Site};
use crate::store::{BindingId, Expr, ExprForest, ExprStore, Node, NodeId, Sharing, VarId};
use crate::transforms::{cons_tree, inline_forest, to_forest, unfold};
use crate::{Error, Result, DEFAULT_BUDGET};

/// Where original subexpressions referenced by the derivative live.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SubtreePolicy {
    /// Copy the whole subtree; the output is a tree.
    Copy,
    /// Point at the subtree; the output is a DAG.
    Share,
    /// Name shared subtrees as bindings; the output is a forest.
    Cse,
}

impl SubtreePolicy {
    pub const ALL: [SubtreePolicy; 3] = [
        SubtreePolicy::Copy,
        SubtreePolicy::Share,
        SubtreePolicy::Cse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubtreePolicy::Copy => "copy",
            SubtreePolicy::Share => "share",
            SubtreePolicy::Cse => "cse",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiffPolicy {
    pub subtree: SubtreePolicy,
    pub memoize: bool,
}

impl DiffPolicy {
    pub const fn new(subtree: SubtreePolicy, memoize: bool) -> DiffPolicy {
        DiffPolicy { subtree, memoize }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiffOptions {
    pub policy: DiffPolicy,
    pub simplify: bool,
    /// Caps output size under `Copy` and differentiation visits when
    /// memoization is off.
    pub budget: usize,
}

impl DiffOptions {
    pub fn new(policy: DiffPolicy, simplify: bool) -> DiffOptions {
        DiffOptions {
            policy,
            simplify,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> DiffOptions {
        self.budget = budget;
        self
    }
}

/// What to differentiate.
#[derive(Clone, Copy, Debug)]
pub enum SymbolicInput<'a> {
    Expr(&'a ExprStore, NodeId),
    Forest(&'a ExprForest),
}

impl<'a> From<&'a Expr> for SymbolicInput<'a> {
    fn from(e: &'a Expr) -> Self {
        SymbolicInput::Expr(&e.store, e.root)
    }
}

impl<'a> From<(&'a ExprStore, NodeId)> for SymbolicInput<'a> {
    fn from((s, r): (&'a ExprStore, NodeId)) -> Self {
        SymbolicInput::Expr(s, r)
    }
}

impl<'a> From<&'a ExprForest> for SymbolicInput<'a> {
    fn from(f: &'a ExprForest) -> Self {
        SymbolicInput::Forest(f)
    }
}

#[derive(Clone, Debug)]
pub enum SymbolicOutput {
    Tree(Expr),
    Dag(Expr),
    Forest(ExprForest),
}

#[derive(Clone, Debug)]
pub struct SymbolicDerivative {
    pub output: SymbolicOutput,
    pub log: OpLog,
    /// Nodes of the output store that belong to the input expression.
    pub input_len: usize,
    /// Number of differentiation visits, counting memo hits.
    pub visits: usize,
}

impl SymbolicDerivative {
    pub fn store(&self) -> &ExprStore {
        match &self.output {
            SymbolicOutput::Tree(e) | SymbolicOutput::Dag(e) => &e.store,
            SymbolicOutput::Forest(f) => &f.store,
        }
    }

    pub fn root(&self) -> NodeId {
        match &self.output {
            SymbolicOutput::Tree(e) | SymbolicOutput::Dag(e) => e.root,
            SymbolicOutput::Forest(f) => f.main,
        }
    }

    /// Size of the derivative: tree nodes counting repeats under `Copy`,
    /// otherwise distinct nodes added by differentiation (input nodes the
    /// result points at are shared, not counted).
    pub fn size(&self) -> usize {
        match &self.output {
            SymbolicOutput::Tree(e) => e.node_count(),
            _ => added_size(self.store(), self.root(), self.input_len),
        }
    }
}

/// Differentiates with the default budget.
pub fn symbolic_derivative<'a>(
    input: impl Into<SymbolicInput<'a>>,
    wrt: VarId,
    policy: DiffPolicy,
    simplify: bool,
) -> Result<SymbolicDerivative> {
    symbolic_derivative_with(input, wrt, &DiffOptions::new(policy, simplify))
}

pub fn symbolic_derivative_with<'a>(
    input: impl Into<SymbolicInput<'a>>,
    wrt: VarId,
    opts: &DiffOptions,
) -> Result<SymbolicDerivative> {
    let input = input.into();
    let mut log = OpLog::new();
    match opts.policy.subtree {
        SubtreePolicy::Share => {
            let owned;
            let (src, root) = match input {
                SymbolicInput::Expr(s, r)
                    if s.sharing() == Sharing::HashConsed && !s.is_forest() =>
                {
                    (s, r)
                }
                SymbolicInput::Expr(s, r) => {
                    owned = cons_tree(s, r)?;
                    (&owned.store, owned.root)
                }
                SymbolicInput::Forest(f) => {
                    owned = inline_forest(f)?;
                    (&owned.store, owned.root)
                }
            };
            let mut out = src.clone();
            out.set_simplify(opts.simplify);
            let mut em = Emitter::new(&mut out, &mut log, Refs::Identity, usize::MAX);
            let (d, visits) = differentiate(src, &mut em, root, wrt, opts)?;
            Ok(SymbolicDerivative {
                output: SymbolicOutput::Dag(Expr::new(out, d)),
                log,
                input_len: src.len(),
                visits,
            })
        }
        SubtreePolicy::Cse => {
            let owned;
            let src: &ExprForest = match input {
                SymbolicInput::Forest(f) => f,
                SymbolicInput::Expr(s, r) => {
                    owned = if s.sharing() == Sharing::HashConsed && !s.is_forest() {
                        to_forest(s, r)?
                    } else {
                        let c = cons_tree(s, r)?;
                        to_forest(&c.store, c.root)?
                    };
                    &owned
                }
            };
            let roots: BTreeMap<NodeId, BindingId> =
                src.bindings().iter().map(|b| (b.root, b.id)).collect();
            let mut out = src.store.clone();
            out.set_simplify(opts.simplify);
            let mut em = Emitter::new(&mut out, &mut log, Refs::Forest(&roots), usize::MAX);
            let (d, visits) = differentiate(&src.store, &mut em, src.main, wrt, opts)?;
            Ok(SymbolicDerivative {
                output: SymbolicOutput::Forest(ExprForest {
                    store: out,
                    main: d,
                }),
                log,
                input_len: src.store.len(),
                visits,
            })
        }
        SubtreePolicy::Copy => {
            let tree = match input {
                SymbolicInput::Expr(s, r) => unfold(s, r, opts.budget)?,
                SymbolicInput::Forest(f) => unfold(&f.store, f.main, opts.budget)?,
            };
            let mut out = tree.store.empty_like(Sharing::TreeOnly);
            out.set_simplify(opts.simplify);
            let mut em = Emitter::new(&mut out, &mut log, Refs::Copy(&tree.store), opts.budget);
            let (d, visits) = differentiate(&tree.store, &mut em, tree.root, wrt, opts)?;
            Ok(SymbolicDerivative {
                output: SymbolicOutput::Tree(Expr::new(out, d)),
                log,
                input_len: 0,
                visits,
            })
        }
    }
}

enum Frame {
    Enter(NodeId),
    Exit(NodeId),
    Bind(BindingId, NodeId),
}

fn differentiate(
    src: &ExprStore,
    em: &mut Emitter<'_>,
    root: NodeId,
    wrt: VarId,
    opts: &DiffOptions,
) -> Result<(NodeId, usize)> {
    let rules = DerivRuleTable::standard();
    let memoize = opts.policy.memoize;
    let copying = opts.policy.subtree == SubtreePolicy::Copy;
    let mut memo: Vec<Option<NodeId>> = vec![None; if memoize { src.len() } else { 0 }];
    let mut bound: BTreeMap<BindingId, NodeId> = BTreeMap::new();
    let mut vals: Vec<NodeId> = Vec::new();
    let mut stack = vec![Frame::Enter(root)];
    let mut visits = 0usize;

    while let Some(frame) = stack.pop() {
        let (id, d) = match frame {
            Frame::Enter(id) => {
                visits += 1;
                if !memoize && visits > opts.budget {
                    return Err(Error::BudgetExceeded {
                        estimated: src.tree_size(root),
                        budget: opts.budget,
                    });
                }
                if let Some(d) = memo.get(id.index()).copied().flatten() {
                    let d = if copying { em.duplicate(d)? } else { d };
                    vals.push(d);
                    continue;
                }
                match src.node(id) {
                    Node::Var(v) => (
                        id,
                        em.make(Role::Seed, Node::Const(if v == wrt { 1.0 } else { 0.0 }))?,
                    ),
                    Node::Const(_) => (id, em.make(Role::Seed, Node::Const(0.0))?),
                    Node::SymbolRef(b) => match bound.get(&b) {
                        Some(&d) => (id, d),
                        None => {
                            stack.push(Frame::Bind(b, id));
                            stack.push(Frame::Enter(src.binding(b)?.root));
                            continue;
                        }
                    },
                    Node::Unary(_, g) => {
                        stack.push(Frame::Exit(id));
                        stack.push(Frame::Enter(g));
                        continue;
                    }
                    Node::Binary(_, l, r) => {
                        stack.push(Frame::Exit(id));
                        stack.push(Frame::Enter(r));
                        stack.push(Frame::Enter(l));
                        continue;
                    }
                }
            }
            Frame::Exit(id) => {
                let site = Site::of(id, src.node(id))?;
                let d = match rules.partials(em, &site)? {
                    Partials::One(p) => {
                        let dg = vals.pop().expect("child derivative");
                        em.make(Role::ChainMultiply, Node::Binary(OpKind::Mul, p, dg))?
                    }
                    Partials::Two(pl, pr) => {
                        let dr = vals.pop().expect("right derivative");
                        let dl = vals.pop().expect("left derivative");
                        let tl = em.make(Role::ChainMultiply, Node::Binary(OpKind::Mul, pl, dl))?;
                        let tr = em.make(Role::ChainMultiply, Node::Binary(OpKind::Mul, pr, dr))?;
                        em.make(Role::FanInAdd, Node::Binary(OpKind::Add, tl, tr))?
                    }
                };
                (id, d)
            }
            Frame::Bind(b, id) => {
                let d = vals.pop().expect("binding derivative");
                // trivial derivatives are inlined so simplification sees them
                let d = if em.out.node(d).is_leaf() {
                    d
                } else {
                    let name = format!("d{}", src.binding(b)?.name);
                    let nb = em.out.add_binding(&name, d)?;
                    em.plain(Node::SymbolRef(nb))?
                };
                bound.insert(b, d);
                (id, d)
            }
        };
        if memoize {
            memo[id.index()] = Some(d);
        }
        vals.push(d);
    }
    Ok((vals.pop().expect("root derivative"), visits))
}

/// Size of the derivative of `input` under `policy`.
pub fn derivative_size<'a>(
    input: impl Into<SymbolicInput<'a>>,
    wrt: VarId,
    policy: DiffPolicy,
    simplify: bool,
    budget: usize,
) -> Result<usize> {
    let opts = DiffOptions::new(policy, simplify).with_budget(budget);
    symbolic_derivative_with(input, wrt, &opts).map(|d| d.size())
}
