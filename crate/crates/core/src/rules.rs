//! Local partial derivatives `∂f/∂g` of every primitive, written once and
//! used by both engines.

use alloc::vec::Vec;

use crate::emit::{Emitter, Refs};
use crate::op::OpKind;
use crate::oplog::OpLog;
use crate::store::{ExprStore, Node, NodeId};
use crate::{Error, Result};

/// Which child edge a partial belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChildEdge {
    Only,
    Left,
    Right,
}

/// Construction interface handed to a rule.
///
/// `original` maps a node of the expression being differentiated into the
/// output; depending on the storage policy that is the same id, a symbol
/// reference, or a fresh copy. `build` constructs a local-partial node
/// through the instrumented constructor.
pub trait PartialBuilder {
    fn original(&mut self, id: NodeId) -> Result<NodeId>;
    fn build(&mut self, payload: Node) -> Result<NodeId>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Args {
    Unary(NodeId),
    Binary(NodeId, NodeId),
}

/// An interior node seen by a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Site {
    pub node: NodeId,
    pub op: OpKind,
    pub args: Args,
}

impl Site {
    pub fn of(node: NodeId, payload: Node) -> Result<Site> {
        match payload {
            Node::Unary(op, g) => Ok(Site {
                node,
                op,
                args: Args::Unary(g),
            }),
            Node::Binary(op, l, r) => Ok(Site {
                node,
                op,
                args: Args::Binary(l, r),
            }),
            _ => Err(Error::Contract("local partials need an interior node")),
        }
    }

    fn unary(&self) -> Result<NodeId> {
        match self.args {
            Args::Unary(g) => Ok(g),
            Args::Binary(..) => Err(Error::Contract("unary rule applied to a binary node")),
        }
    }

    fn binary(&self) -> Result<(NodeId, NodeId)> {
        match self.args {
            Args::Binary(l, r) => Ok((l, r)),
            Args::Unary(_) => Err(Error::Contract("binary rule applied to a unary node")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partials {
    One(NodeId),
    Two(NodeId, NodeId),
}

pub type Rule = fn(&mut dyn PartialBuilder, &Site) -> Result<Partials>;

/// One rule per operation tag.
#[derive(Clone)]
pub struct DerivRuleTable {
    rules: [Rule; OpKind::TAGS],
}

impl Default for DerivRuleTable {
    fn default() -> Self {
        DerivRuleTable::standard()
    }
}

impl DerivRuleTable {
    pub fn standard() -> DerivRuleTable {
        let mut rules: [Rule; OpKind::TAGS] = [d_add; OpKind::TAGS];
        rules[OpKind::Add.tag()] = d_add;
        rules[OpKind::Sub.tag()] = d_sub;
        rules[OpKind::Mul.tag()] = d_mul;
        rules[OpKind::Div.tag()] = d_div;
        rules[OpKind::Neg.tag()] = d_neg;
        rules[OpKind::Sin.tag()] = d_sin;
        rules[OpKind::Cos.tag()] = d_cos;
        rules[OpKind::Exp.tag()] = d_exp;
        rules[OpKind::Ln.tag()] = d_ln;
        rules[OpKind::Sqrt.tag()] = d_sqrt;
        rules[OpKind::PowConst(0).tag()] = d_pow;
        DerivRuleTable { rules }
    }

    pub fn rule(&self, op: OpKind) -> Rule {
        self.rules[op.tag()]
    }

    pub fn partials(&self, b: &mut dyn PartialBuilder, site: &Site) -> Result<Partials> {
        let out = (self.rule(site.op))(b, site)?;
        match (out, site.args) {
            (Partials::One(_), Args::Unary(_)) | (Partials::Two(..), Args::Binary(..)) => Ok(out),
            _ => Err(Error::Contract("rule arity does not match operation arity")),
        }
    }
}

fn konst(b: &mut dyn PartialBuilder, v: f64) -> Result<NodeId> {
    b.build(Node::Const(v))
}

fn d_add(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    s.binary()?;
    Ok(Partials::Two(konst(b, 1.0)?, konst(b, 1.0)?))
}

fn d_sub(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    s.binary()?;
    Ok(Partials::Two(konst(b, 1.0)?, konst(b, -1.0)?))
}

// ∂(uv)/∂u = v, ∂(uv)/∂v = u
fn d_mul(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    let (u, v) = s.binary()?;
    let dl = b.original(v)?;
    let dr = b.original(u)?;
    Ok(Partials::Two(dl, dr))
}

// ∂(u/v)/∂u = 1/v, ∂(u/v)/∂v = -u/(v·v)
fn d_div(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    let (u, v) = s.binary()?;
    let one = konst(b, 1.0)?;
    let den = b.original(v)?;
    let left = b.build(Node::Binary(OpKind::Div, one, den))?;
    let num = b.original(u)?;
    let neg = b.build(Node::Unary(OpKind::Neg, num))?;
    let v1 = b.original(v)?;
    let v2 = b.original(v)?;
    let sq = b.build(Node::Binary(OpKind::Mul, v1, v2))?;
    let right = b.build(Node::Binary(OpKind::Div, neg, sq))?;
    Ok(Partials::Two(left, right))
}

fn d_neg(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    s.unary()?;
    Ok(Partials::One(konst(b, -1.0)?))
}

fn d_sin(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    let g = b.original(s.unary()?)?;
    Ok(Partials::One(b.build(Node::Unary(OpKind::Cos, g))?))
}

fn d_cos(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    let g = b.original(s.unary()?)?;
    let sin = b.build(Node::Unary(OpKind::Sin, g))?;
    Ok(Partials::One(b.build(Node::Unary(OpKind::Neg, sin))?))
}

// exp' = exp: the node itself
fn d_exp(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    s.unary()?;
    Ok(Partials::One(b.original(s.node)?))
}

fn d_ln(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    let g = s.unary()?;
    let one = konst(b, 1.0)?;
    let g = b.original(g)?;
    Ok(Partials::One(b.build(Node::Binary(OpKind::Div, one, g))?))
}

// sqrt(g)' = 0.5 / sqrt(g)
fn d_sqrt(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    s.unary()?;
    let half = konst(b, 0.5)?;
    let me = b.original(s.node)?;
    Ok(Partials::One(b.build(Node::Binary(
        OpKind::Div,
        half,
        me,
    ))?))
}

// (g^n)' = n · g^(n-1)
fn d_pow(b: &mut dyn PartialBuilder, s: &Site) -> Result<Partials> {
    let g = s.unary()?;
    let n = match s.op {
        OpKind::PowConst(n) => n,
        _ => return Err(Error::Contract("power rule applied to another operation")),
    };
    let p = match n {
        0 => konst(b, 0.0)?,
        1 => konst(b, 1.0)?,
        _ => {
            let coeff = konst(b, n as f64)?;
            let g = b.original(g)?;
            let pow = b.build(Node::Unary(OpKind::PowConst(n - 1), g))?;
            b.build(Node::Binary(OpKind::Mul, coeff, pow))?
        }
    };
    Ok(Partials::One(p))
}

/// Local partials of `node` built directly in `store`, one per child edge.
pub fn local_partials(
    rules: &DerivRuleTable,
    node: NodeId,
    store: &mut ExprStore,
    log: &mut OpLog,
) -> Result<Vec<(ChildEdge, NodeId)>> {
    let payload = store.get(node).ok_or(Error::DanglingNode {
        node,
        len: store.len(),
    })?;
    let site = Site::of(node, payload)?;
    let mut em = Emitter::new(store, log, Refs::Identity, usize::MAX);
    Ok(match rules.partials(&mut em, &site)? {
        Partials::One(p) => alloc::vec![(ChildEdge::Only, p)],
        Partials::Two(l, r) => alloc::vec![(ChildEdge::Left, l), (ChildEdge::Right, r)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{eval, Valuation};
    use crate::store::VarId;
    use rand::{Rng, SeedableRng};

    fn site_store(op: OpKind) -> (ExprStore, NodeId) {
        let mut s = ExprStore::hash_consed();
        let u = s.var("u");
        let v = s.var("v");
        let n = if op.is_binary() {
            s.binary(op, u, v)
        } else {
            s.unary(op, u)
        }
        .unwrap();
        (s, n)
    }

    #[test]
    fn mul_partials_swap_operands() {
        let (mut s, n) = site_store(OpKind::Mul);
        let mut log = OpLog::new();
        let p = local_partials(&DerivRuleTable::standard(), n, &mut s, &mut log).unwrap();
        let u = NodeId(0);
        let v = NodeId(1);
        assert_eq!(p, alloc::vec![(ChildEdge::Left, v), (ChildEdge::Right, u)]);
        assert!(log.is_empty());
    }

    #[test]
    fn sin_partial_is_cos() {
        let (mut s, n) = site_store(OpKind::Sin);
        let mut log = OpLog::new();
        let p = local_partials(&DerivRuleTable::standard(), n, &mut s, &mut log).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(s.node(p[0].1), Node::Unary(OpKind::Cos, NodeId(0)));
        assert_eq!(log.total(), 1);
    }

    #[test]
    fn leaves_have_no_partials() {
        let mut s = ExprStore::hash_consed();
        let x = s.var("x");
        let c = s.constant(2.0);
        let rules = DerivRuleTable::standard();
        let mut log = OpLog::new();
        assert!(matches!(
            local_partials(&rules, x, &mut s, &mut log),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            local_partials(&rules, c, &mut s, &mut log),
            Err(Error::Contract(_))
        ));
    }

    // Every rule against a central difference of the operation itself at
    // random points away from singularities.
    #[test]
    fn rules_match_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ops = [
            OpKind::Add,
            OpKind::Sub,
            OpKind::Mul,
            OpKind::Div,
            OpKind::Neg,
            OpKind::Sin,
            OpKind::Cos,
            OpKind::Exp,
            OpKind::Ln,
            OpKind::Sqrt,
            OpKind::PowConst(0),
            OpKind::PowConst(1),
            OpKind::PowConst(2),
            OpKind::PowConst(5),
            OpKind::PowConst(-3),
        ];
        let rules = DerivRuleTable::standard();
        let h = 1e-6;
        for op in ops {
            let (mut s, n) = site_store(op);
            let mut log = OpLog::new();
            let partials = local_partials(&rules, n, &mut s, &mut log).unwrap();
            for _ in 0..20 {
                let u: f64 = rng.gen_range(0.2..3.0);
                let v: f64 = rng.gen_range(0.2..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let f = |a: f64, b: f64| -> f64 {
                    if op.is_binary() {
                        op.apply_binary(a, b).unwrap()
                    } else {
                        op.apply_unary(a).unwrap()
                    }
                };
                let at = Valuation::new().with(VarId(0), u).with(VarId(1), v);
                for &(edge, p) in &partials {
                    let got = eval(&s, p, &at).unwrap();
                    let fd = match edge {
                        ChildEdge::Only | ChildEdge::Left => {
                            (f(u + h, v) - f(u - h, v)) / (2.0 * h)
                        }
                        ChildEdge::Right => (f(u, v + h) - f(u, v - h)) / (2.0 * h),
                    };
                    let err = (got - fd).abs() / got.abs().max(1.0);
                    assert!(err < 1e-6, "{op:?} {edge:?} at ({u}, {v}): {got} vs {fd}");
                }
            }
        }
    }
}
