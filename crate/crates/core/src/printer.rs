//! Text rendering in the parser's grammar, with the fewest parentheses that
//! still parse back to the same structure.

use alloc::string::String;
use core::fmt::Write;

use crate::op::OpKind;
use crate::store::{ExprForest, ExprStore, Node, NodeId};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const PREFIX: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn level(store: &ExprStore, id: NodeId) -> u8 {
    match store.node(id) {
        Node::Binary(OpKind::Add | OpKind::Sub, ..) => SUM,
        Node::Binary(..) => PRODUCT,
        Node::Unary(OpKind::Neg, _) => PREFIX,
        Node::Const(c) if c.is_sign_negative() => PREFIX,
        Node::Unary(OpKind::PowConst(_), _) => POWER,
        _ => ATOM,
    }
}

/// Renders the expression under `root` as a tree. Shared subexpressions are
/// written out at every use; symbol references print as their binding name.
pub fn pretty(store: &ExprStore, root: NodeId) -> String {
    let mut out = String::new();
    write_node(store, root, &mut out);
    out
}

fn write_child(store: &ExprStore, id: NodeId, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_node(store, id, out);
        out.push(')');
    } else {
        write_node(store, id, out);
    }
}

fn write_node(store: &ExprStore, id: NodeId, out: &mut String) {
    match store.node(id) {
        Node::Var(v) => match store.var_name(v) {
            Some(name) => out.push_str(name),
            None => {
                let _ = write!(out, "#{}", v.0);
            }
        },
        Node::Const(c) => {
            let _ = write!(out, "{c}");
        }
        Node::SymbolRef(b) => match store.binding(b) {
            Ok(binding) => out.push_str(&binding.name),
            Err(_) => {
                let _ = write!(out, "#t{}", b.0);
            }
        },
        Node::Unary(OpKind::Neg, c) => {
            out.push('-');
            // `-2` would read back as a negative literal
            let literal = matches!(store.node(c), Node::Const(k) if k.is_sign_positive());
            write_child(store, c, literal || level(store, c) < PREFIX, out);
        }
        Node::Unary(OpKind::PowConst(n), c) => {
            write_child(store, c, level(store, c) < ATOM, out);
            let _ = write!(out, "^{n}");
        }
        Node::Unary(op, c) => {
            out.push_str(op.name());
            write_child(store, c, true, out);
        }
        Node::Binary(op, l, r) => {
            let own = level(store, id);
            write_child(store, l, level(store, l) < own, out);
            let _ = write!(out, " {} ", symbol(op));
            write_child(store, r, level(store, r) <= own, out);
        }
    }
}

fn symbol(op: OpKind) -> &'static str {
    match op {
        OpKind::Add => "+",
        OpKind::Sub => "-",
        OpKind::Mul => "*",
        _ => "/",
    }
}

/// One `let name = expr;` line per binding, then the main expression.
pub fn pretty_forest(forest: &ExprForest) -> String {
    let mut out = String::new();
    for b in forest.bindings() {
        let _ = writeln!(out, "let {} = {};", b.name, pretty(&forest.store, b.root));
    }
    write_node(&forest.store, forest.main, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;

    fn round(text: &str) -> String {
        let e = parse_expr(text).unwrap();
        pretty(&e.store, e.root)
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(
            round("sin(x1+x2)*cos(x1+x2)"),
            "sin(x1 + x2) * cos(x1 + x2)"
        );
        assert_eq!(round("(a+b)+c"), "a + b + c");
        assert_eq!(round("a+(b+c)"), "a + (b + c)");
        assert_eq!(round("a-(b-c)"), "a - (b - c)");
        assert_eq!(round("a/(b*c)"), "a / (b * c)");
        assert_eq!(round("(a*b)/c"), "a * b / c");
        assert_eq!(round("-(x^2)"), "-x^2");
        assert_eq!(round("(-x)^2"), "(-x)^2");
        assert_eq!(round("(x^2)^3"), "(x^2)^3");
        assert_eq!(round("-(a+b)"), "-(a + b)");
        assert_eq!(round("x^-2"), "x^-2");
        assert_eq!(round("2.5*x"), "2.5 * x");
        assert_eq!(round("x - -3"), "x - -3");
        assert_eq!(round("(-3)^2"), "(-3)^2");
        assert_eq!(round("-(3)"), "-(3)");
        let mut s = ExprStore::hash_consed();
        let three = s.constant(3.0);
        let neg = s.unary(OpKind::Neg, three).unwrap();
        assert_eq!(pretty(&s, neg), "-(3)");
    }

    #[test]
    fn negative_literal_is_a_constant() {
        let e = parse_expr("-3").unwrap();
        assert_eq!(e.store.node(e.root), Node::Const(-3.0));
        let p = parse_expr("-3^2").unwrap();
        assert!(matches!(p.store.node(p.root), Node::Unary(OpKind::Neg, _)));
    }
}
