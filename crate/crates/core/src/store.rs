//! Append-only expression store.
//!
//! Nodes are addressed by dense [`NodeId`]s in creation order, and every child
//! id is smaller than its parent's id, so a single forward scan of the store
//! visits children before parents. In [`Sharing::HashConsed`] mode a cons
//! table maps each payload to its unique node; in [`Sharing::TreeOnly`] mode
//! every construction appends.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::op::OpKind;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct BindingId(pub u32);

impl BindingId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Node payload.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Var(VarId),
    Const(f64),
    Unary(OpKind, NodeId),
    Binary(OpKind, NodeId, NodeId),
    /// Reference to a named binding; only valid in forest stores.
    SymbolRef(BindingId),
}

impl Node {
    /// Child references (not following symbol references).
    pub fn children(&self) -> Ids {
        match *self {
            Node::Unary(_, c) => Ids::one(c),
            Node::Binary(_, l, r) => Ids::two(l, r),
            _ => Ids::none(),
        }
    }

    pub fn op(&self) -> Option<OpKind> {
        match *self {
            Node::Unary(op, _) | Node::Binary(op, _, _) => Some(op),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Var(_) | Node::Const(_) | Node::SymbolRef(_))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Same payload with every child id passed through `f`.
    pub fn map_children(self, mut f: impl FnMut(NodeId) -> NodeId) -> Node {
        match self {
            Node::Unary(op, c) => Node::Unary(op, f(c)),
            Node::Binary(op, l, r) => {
                let l = f(l);
                Node::Binary(op, l, f(r))
            }
            other => other,
        }
    }

    fn key(&self) -> Key {
        match *self {
            Node::Var(v) => Key::Var(v.0),
            Node::Const(c) => Key::Const(c.to_bits()),
            Node::Unary(op, c) => Key::Unary(op, c.0),
            Node::Binary(op, l, r) => Key::Binary(op, l.0, r.0),
            Node::SymbolRef(b) => Key::Symbol(b.0),
        }
    }
}

/// Up to two node ids, iterable in order.
#[derive(Clone, Copy, Debug)]
pub struct Ids {
    ids: [NodeId; 2],
    len: u8,
    pos: u8,
}

impl Ids {
    fn none() -> Ids {
        Ids {
            ids: [NodeId(0); 2],
            len: 0,
            pos: 0,
        }
    }
    fn one(a: NodeId) -> Ids {
        Ids {
            ids: [a, NodeId(0)],
            len: 1,
            pos: 0,
        }
    }
    fn two(a: NodeId, b: NodeId) -> Ids {
        Ids {
            ids: [a, b],
            len: 2,
            pos: 0,
        }
    }
}

impl Iterator for Ids {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.pos < self.len {
            self.pos += 1;
            Some(self.ids[self.pos as usize - 1])
        } else {
            None
        }
    }
}

/// Cons-table key: operation tag, child ids and constant bit pattern. No
/// commutative canonicalization, so `a+b` and `b+a` stay distinct.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Var(u32),
    Const(u64),
    Unary(OpKind, u32),
    Binary(OpKind, u32, u32),
    Symbol(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Sharing {
    HashConsed,
    TreeOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub id: BindingId,
    pub name: String,
    pub root: NodeId,
}

enum Rewrite {
    Existing(NodeId),
    Const(f64),
}

#[derive(Clone, Debug)]
pub struct ExprStore {
    nodes: Vec<Node>,
    cons: BTreeMap<Key, NodeId>,
    sharing: Sharing,
    simplify: bool,
    forest: bool,
    vars: Vec<String>,
    bindings: Vec<Binding>,
    calls: usize,
    hits: usize,
}

impl Default for ExprStore {
    fn default() -> Self {
        ExprStore::new(Sharing::HashConsed)
    }
}

impl ExprStore {
    pub fn new(sharing: Sharing) -> ExprStore {
        ExprStore {
            nodes: Vec::new(),
            cons: BTreeMap::new(),
            sharing,
            simplify: false,
            forest: false,
            vars: Vec::new(),
            bindings: Vec::new(),
            calls: 0,
            hits: 0,
        }
    }

    pub fn hash_consed() -> ExprStore {
        ExprStore::new(Sharing::HashConsed)
    }

    pub fn tree_only() -> ExprStore {
        ExprStore::new(Sharing::TreeOnly)
    }

    /// Hash-consed store that accepts bindings and symbol references.
    pub fn forest() -> ExprStore {
        let mut s = ExprStore::hash_consed();
        s.forest = true;
        s
    }

    /// Empty store with the same variable table.
    pub fn empty_like(&self, sharing: Sharing) -> ExprStore {
        let mut s = ExprStore::new(sharing);
        s.vars = self.vars.clone();
        s
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Panics if `id` is out of range.
    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }

    pub fn get(&self, id: NodeId) -> Option<Node> {
        self.nodes.get(id.index()).copied()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn sharing(&self) -> Sharing {
        self.sharing
    }

    pub fn simplify(&self) -> bool {
        self.simplify
    }

    pub fn set_simplify(&mut self, on: bool) {
        self.simplify = on;
    }

    pub fn is_forest(&self) -> bool {
        self.forest
    }

    /// Number of `make_node` calls and how many of them hit the cons table.
    pub fn stats(&self) -> (usize, usize) {
        (self.calls, self.hits)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_name(&self, v: VarId) -> Option<&str> {
        self.vars.get(v.index()).map(String::as_str)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars
            .iter()
            .position(|n| n == name)
            .map(|i| VarId(i as u32))
    }

    /// Registers a variable name without creating a node.
    pub fn intern_var(&mut self, name: &str) -> VarId {
        match self.var_id(name) {
            Some(v) => v,
            None => {
                self.vars.push(String::from(name));
                VarId(self.vars.len() as u32 - 1)
            }
        }
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn binding(&self, id: BindingId) -> Result<&Binding> {
        self.bindings
            .get(id.index())
            .ok_or(Error::UnknownBinding(id))
    }

    pub fn binding_by_name(&self, name: &str) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.name == name)
    }

    pub fn add_binding(&mut self, name: &str, root: NodeId) -> Result<BindingId> {
        if !self.forest {
            return Err(Error::NotAForest);
        }
        self.check(root)?;
        let id = BindingId(self.bindings.len() as u32);
        self.bindings.push(Binding {
            id,
            name: String::from(name),
            root,
        });
        Ok(id)
    }

    pub fn var(&mut self, name: &str) -> NodeId {
        let v = self.intern_var(name);
        self.make_node(Node::Var(v))
            .expect("variable was just interned")
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.make_node(Node::Const(value))
            .expect("constants have no children")
    }

    pub fn unary(&mut self, op: OpKind, child: NodeId) -> Result<NodeId> {
        self.make_node(Node::Unary(op, child))
    }

    pub fn binary(&mut self, op: OpKind, left: NodeId, right: NodeId) -> Result<NodeId> {
        self.make_node(Node::Binary(op, left, right))
    }

    /// The shared node constructor. Validates the payload, applies the
    /// smart-constructor rewrites when simplification is on, and returns the
    /// existing node on a cons-table hit.
    pub fn make_node(&mut self, payload: Node) -> Result<NodeId> {
        self.validate(&payload)?;
        self.calls += 1;
        if self.simplify {
            match self.rewrite(&payload) {
                Some(Rewrite::Existing(id)) => return Ok(id),
                Some(Rewrite::Const(v)) => return Ok(self.intern(Node::Const(v))),
                None => {}
            }
        }
        let before = self.nodes.len();
        let id = self.intern(payload);
        if self.nodes.len() == before {
            self.hits += 1;
        }
        Ok(id)
    }

    /// Inserts without simplification or bookkeeping. Payload must already
    /// be valid for this store.
    pub(crate) fn intern(&mut self, payload: Node) -> NodeId {
        if self.sharing == Sharing::HashConsed {
            let key = payload.key();
            if let Some(&id) = self.cons.get(&key) {
                return id;
            }
            let id = NodeId(self.nodes.len() as u32);
            self.nodes.push(payload);
            self.cons.insert(key, id);
            id
        } else {
            self.nodes.push(payload);
            NodeId(self.nodes.len() as u32 - 1)
        }
    }

    pub(crate) fn validate(&self, payload: &Node) -> Result<()> {
        match *payload {
            Node::Var(v) if v.index() >= self.vars.len() => Err(Error::UnknownVariable(v)),
            Node::SymbolRef(_) if !self.forest => Err(Error::NotAForest),
            Node::SymbolRef(b) => self.binding(b).map(|_| ()),
            Node::Unary(op, _) | Node::Binary(op, _, _)
                if op.arity() != payload.children().count() =>
            {
                Err(Error::Contract("operation arity does not match payload"))
            }
            _ => payload.children().try_for_each(|c| self.check(c)),
        }
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::DanglingNode {
                node: id,
                len: self.nodes.len(),
            })
        }
    }

    fn const_of(&self, id: NodeId) -> Option<f64> {
        self.nodes[id.index()].as_const()
    }

    fn rewrite(&self, payload: &Node) -> Option<Rewrite> {
        match *payload {
            Node::Unary(OpKind::Neg, c) => self.const_of(c).map(|v| Rewrite::Const(-v)),
            Node::Binary(op, l, r) => {
                let (a, b) = (self.const_of(l), self.const_of(r));
                if let (Some(a), Some(b)) = (a, b) {
                    if let Ok(v) = op.apply_binary(a, b) {
                        return Some(Rewrite::Const(v));
                    }
                }
                match op {
                    OpKind::Add if b == Some(0.0) => Some(Rewrite::Existing(l)),
                    OpKind::Add if a == Some(0.0) => Some(Rewrite::Existing(r)),
                    OpKind::Mul if a == Some(0.0) || b == Some(0.0) => Some(Rewrite::Const(0.0)),
                    OpKind::Mul if b == Some(1.0) => Some(Rewrite::Existing(l)),
                    OpKind::Mul if a == Some(1.0) => Some(Rewrite::Existing(r)),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Outgoing edges of a node for traversal: its children, or the binding
    /// root for a symbol reference.
    pub fn successors(&self, id: NodeId) -> Ids {
        match self.nodes[id.index()] {
            Node::SymbolRef(b) => Ids::one(self.bindings[b.index()].root),
            n => n.children(),
        }
    }

    /// Reachability mask over the whole store, following symbol references.
    pub fn reachable(&self, root: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        seen[root.index()] = true;
        while let Some(id) = stack.pop() {
            for c in self.successors(id) {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Reachable node ids in ascending (topological) order.
    pub fn reachable_ids(&self, root: NodeId) -> Vec<NodeId> {
        self.reachable(root)
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    pub fn reachable_count(&self, root: NodeId) -> usize {
        self.reachable(root).iter().filter(|&&r| r).count()
    }

    /// Size of the fully unfolded tree below `root`, counting repeats and
    /// expanding symbol references. Saturates at `u128::MAX`.
    pub fn tree_size(&self, root: NodeId) -> u128 {
        self.tree_size_with(root, true)
    }

    /// Like [`tree_size`](Self::tree_size) but counts a symbol reference as a
    /// single leaf instead of expanding it.
    pub fn occurrence_size(&self, root: NodeId) -> u128 {
        self.tree_size_with(root, false)
    }

    fn tree_size_with(&self, root: NodeId, expand_symbols: bool) -> u128 {
        let live = self.reachable(root);
        let mut size = vec![0u128; root.index() + 1];
        for i in 0..=root.index() {
            if !live[i] {
                continue;
            }
            let id = NodeId(i as u32);
            let below: u128 = match self.nodes[i] {
                Node::SymbolRef(_) if !expand_symbols => 0,
                _ => self
                    .successors(id)
                    .fold(0u128, |acc, c| acc.saturating_add(size[c.index()])),
            };
            size[i] = below.saturating_add(1);
        }
        size[root.index()]
    }

    /// Size metric for the expression under `root`: distinct reachable nodes
    /// in a hash-consed store, tree nodes counting repeats in a tree-only one.
    pub fn node_count(&self, root: NodeId) -> usize {
        match self.sharing {
            Sharing::HashConsed => self.reachable_count(root),
            Sharing::TreeOnly => usize::try_from(self.tree_size(root)).unwrap_or(usize::MAX),
        }
    }

    /// Number of incoming edges per node within the part reachable from
    /// `root`, counted with multiplicity (`x*x` gives `x` two).
    pub fn parent_counts(&self, root: NodeId) -> Vec<u32> {
        let live = self.reachable(root);
        let mut counts = vec![0u32; self.nodes.len()];
        for (i, _) in live.iter().enumerate().filter(|(_, &r)| r) {
            for c in self.successors(NodeId(i as u32)) {
                counts[c.index()] += 1;
            }
        }
        counts
    }

    /// True when every node below `root` has exactly one incoming edge.
    pub fn is_tree(&self, root: NodeId) -> bool {
        let live = self.reachable(root);
        self.parent_counts(root)
            .iter()
            .enumerate()
            .all(|(i, &c)| !live[i] || i == root.index() || c == 1)
    }
}

/// A store together with the root of the expression of interest.
#[derive(Clone, Debug)]
pub struct Expr {
    pub store: ExprStore,
    pub root: NodeId,
}

impl Expr {
    pub fn new(store: ExprStore, root: NodeId) -> Expr {
        Expr { store, root }
    }

    pub fn node_count(&self) -> usize {
        self.store.node_count(self.root)
    }

    pub fn tree_size(&self) -> u128 {
        self.store.tree_size(self.root)
    }

    /// Variables in the store's table, in id order.
    pub fn var_ids(&self) -> Vec<VarId> {
        (0..self.store.vars().len() as u32).map(VarId).collect()
    }
}

/// Named common subexpressions (`t1`, `t2`, …) plus a main expression.
/// Bindings reference only earlier bindings through [`Node::SymbolRef`].
#[derive(Clone, Debug)]
pub struct ExprForest {
    pub store: ExprStore,
    pub main: NodeId,
}

impl ExprForest {
    pub fn bindings(&self) -> &[Binding] {
        self.store.bindings()
    }

    /// Distinct nodes across all bindings and main, each symbol reference
    /// counted once.
    pub fn node_count(&self) -> usize {
        self.store.reachable_count(self.main)
    }

    /// Sum of per-tree sizes when each binding and main are written out as
    /// trees, counting every symbol-reference occurrence.
    pub fn occurrence_count(&self) -> u128 {
        let live = self.store.reachable(self.main);
        self.bindings()
            .iter()
            .filter(|b| live[b.root.index()])
            .map(|b| self.store.occurrence_size(b.root))
            .fold(self.store.occurrence_size(self.main), u128::saturating_add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(k: usize) -> (ExprStore, NodeId) {
        let mut s = ExprStore::hash_consed();
        let mut t = s.var("x");
        for _ in 0..k {
            t = s.binary(OpKind::Mul, t, t).unwrap();
        }
        (s, t)
    }

    #[test]
    fn hash_consing_is_idempotent() {
        let mut s = ExprStore::hash_consed();
        let a = s.var("a");
        let b = s.var("b");
        let m1 = s.binary(OpKind::Mul, a, b).unwrap();
        let m2 = s.binary(OpKind::Mul, a, b).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(s.len(), 3);
        // no commutative canonicalization
        let m3 = s.binary(OpKind::Mul, b, a).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn tree_only_never_shares() {
        let mut s = ExprStore::tree_only();
        let a = s.var("a");
        let b = s.var("a");
        assert_ne!(a, b);
    }

    #[test]
    fn simplify_rules() {
        let mut s = ExprStore::hash_consed();
        s.set_simplify(true);
        let x = s.var("x");
        let zero = s.constant(0.0);
        let one = s.constant(1.0);
        assert_eq!(s.binary(OpKind::Add, x, zero).unwrap(), x);
        assert_eq!(s.binary(OpKind::Add, zero, x).unwrap(), x);
        assert_eq!(s.binary(OpKind::Mul, x, one).unwrap(), x);
        assert_eq!(s.binary(OpKind::Mul, one, x).unwrap(), x);
        assert_eq!(s.binary(OpKind::Mul, x, zero).unwrap(), zero);
        let two = s.constant(2.0);
        let three = s.constant(3.0);
        let six = s.binary(OpKind::Mul, two, three).unwrap();
        assert_eq!(s.node(six), Node::Const(6.0));
        let neg = s.unary(OpKind::Neg, two).unwrap();
        assert_eq!(s.node(neg), Node::Const(-2.0));
        // x - 0 is not in the rule set
        let sub = s.binary(OpKind::Sub, x, zero).unwrap();
        assert!(matches!(s.node(sub), Node::Binary(OpKind::Sub, _, _)));
        // division by a zero constant is left for evaluation to reject
        let div = s.binary(OpKind::Div, two, zero).unwrap();
        assert!(matches!(s.node(div), Node::Binary(OpKind::Div, _, _)));
    }

    #[test]
    fn strict_mode_never_rewrites() {
        let mut s = ExprStore::hash_consed();
        let x = s.var("x");
        let zero = s.constant(0.0);
        let sum = s.binary(OpKind::Add, x, zero).unwrap();
        assert_ne!(sum, x);
        s.binary(OpKind::Add, x, zero).unwrap();
        let (calls, hits) = s.stats();
        assert_eq!(s.len(), calls - hits);
    }

    #[test]
    fn zero_constants_keep_their_sign() {
        let mut s = ExprStore::hash_consed();
        let p = s.constant(0.0);
        let n = s.constant(-0.0);
        assert_ne!(p, n);
    }

    #[test]
    fn dangling_child_is_rejected() {
        let mut s = ExprStore::hash_consed();
        let x = s.var("x");
        let err = s.binary(OpKind::Add, x, NodeId(7)).unwrap_err();
        assert_eq!(
            err,
            Error::DanglingNode {
                node: NodeId(7),
                len: 1
            }
        );
    }

    #[test]
    fn symbol_refs_need_a_forest() {
        let mut s = ExprStore::hash_consed();
        assert_eq!(
            s.make_node(Node::SymbolRef(BindingId(0))),
            Err(Error::NotAForest)
        );
        let mut f = ExprStore::forest();
        assert_eq!(
            f.make_node(Node::SymbolRef(BindingId(0))),
            Err(Error::UnknownBinding(BindingId(0)))
        );
    }

    #[test]
    fn chain_counts() {
        let (s, root) = chain(3);
        assert_eq!(s.node_count(root), 4);
        assert_eq!(s.tree_size(root), 15);
        let mut v = ExprStore::hash_consed();
        let x = v.var("x");
        assert_eq!(v.node_count(x), 1);
    }

    #[test]
    fn tree_size_saturates() {
        let (s, root) = chain(200);
        assert_eq!(s.tree_size(root), u128::MAX);
        assert_eq!(s.node_count(root), 201);
    }

    #[test]
    fn child_ids_precede_parents() {
        let (s, _) = chain(5);
        for (i, n) in s.nodes().iter().enumerate() {
            assert!(n.children().all(|c| c.index() < i));
        }
    }
}
