//! The instrumented construction layer shared by both engines.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::oplog::{LogOp, OpLog, Role};
use crate::rules::PartialBuilder;
use crate::store::{BindingId, ExprStore, Node, NodeId};
use crate::{Error, Result};

/// How references to nodes of the input expression land in the output.
pub(crate) enum Refs<'a> {
    /// Output store extends the input store; ids carry over.
    Identity,
    /// As `Identity`, but binding roots are referred to by symbol.
    Forest(&'a BTreeMap<NodeId, BindingId>),
    /// Every reference is a fresh copy of the source subtree.
    Copy(&'a ExprStore),
}

pub(crate) struct Emitter<'a> {
    pub out: &'a mut ExprStore,
    pub log: &'a mut OpLog,
    refs: Refs<'a>,
    budget: usize,
}

impl<'a> Emitter<'a> {
    pub fn new(out: &'a mut ExprStore, log: &'a mut OpLog, refs: Refs<'a>, budget: usize) -> Self {
        Emitter {
            out,
            log,
            refs,
            budget,
        }
    }

    /// Logged construction.
    pub fn make(&mut self, role: Role, payload: Node) -> Result<NodeId> {
        self.out.validate(&payload)?;
        if let Some(op) = LogOp::of(&payload) {
            self.log.record(op, role);
        }
        let id = self.out.make_node(payload)?;
        self.within_budget(0)?;
        Ok(id)
    }

    /// Unlogged construction, for symbol references.
    pub fn plain(&mut self, payload: Node) -> Result<NodeId> {
        self.out.make_node(payload)
    }

    pub fn reference(&mut self, orig: NodeId) -> Result<NodeId> {
        match self.refs {
            Refs::Identity => Ok(orig),
            Refs::Forest(roots) => match roots.get(&orig) {
                Some(&b) => self.out.make_node(Node::SymbolRef(b)),
                None => Ok(orig),
            },
            Refs::Copy(src) => {
                let flat = flatten_tree(src, orig);
                self.within_budget(flat.len())?;
                Ok(append_tree(self.out, &flat))
            }
        }
    }

    /// Copy of a subtree already in the output store.
    pub fn duplicate(&mut self, id: NodeId) -> Result<NodeId> {
        let flat = flatten_tree(self.out, id);
        self.within_budget(flat.len())?;
        Ok(append_tree(self.out, &flat))
    }

    fn within_budget(&self, extra: usize) -> Result<()> {
        let total = self.out.len() + extra;
        if total > self.budget {
            Err(Error::BudgetExceeded {
                estimated: total as u128,
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }
}

impl PartialBuilder for Emitter<'_> {
    fn original(&mut self, id: NodeId) -> Result<NodeId> {
        self.reference(id)
    }

    fn build(&mut self, payload: Node) -> Result<NodeId> {
        self.make(Role::LocalPartial, payload)
    }
}

/// Unfolds the expression under `root` into post-order payloads whose child
/// ids index into the returned vector. Symbol references are expanded.
pub(crate) fn flatten_tree(src: &ExprStore, root: NodeId) -> Vec<Node> {
    enum Frame {
        Enter(NodeId),
        Exit(Node),
    }
    let mut flat = Vec::new();
    let mut vals: Vec<NodeId> = Vec::new();
    let mut stack = alloc::vec![Frame::Enter(root)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(id) => match src.node(id) {
                Node::SymbolRef(b) => stack.push(Frame::Enter(src.bindings()[b.index()].root)),
                Node::Unary(op, c) => {
                    stack.push(Frame::Exit(Node::Unary(op, c)));
                    stack.push(Frame::Enter(c));
                }
                Node::Binary(op, l, r) => {
                    stack.push(Frame::Exit(Node::Binary(op, l, r)));
                    stack.push(Frame::Enter(r));
                    stack.push(Frame::Enter(l));
                }
                leaf => {
                    vals.push(NodeId(flat.len() as u32));
                    flat.push(leaf);
                }
            },
            Frame::Exit(node) => {
                let node = match node {
                    Node::Unary(op, _) => Node::Unary(op, vals.pop().expect("child value")),
                    Node::Binary(op, _, _) => {
                        let r = vals.pop().expect("right value");
                        let l = vals.pop().expect("left value");
                        Node::Binary(op, l, r)
                    }
                    leaf => leaf,
                };
                vals.push(NodeId(flat.len() as u32));
                flat.push(node);
            }
        }
    }
    flat
}

/// Appends a flattened tree without simplification; returns the new root.
pub(crate) fn append_tree(dst: &mut ExprStore, flat: &[Node]) -> NodeId {
    let mut ids: Vec<NodeId> = Vec::with_capacity(flat.len());
    for node in flat {
        let id = dst.intern(node.map_children(|c| ids[c.index()]));
        ids.push(id);
    }
    *ids.last().expect("non-empty tree")
}
