//! Numeric evaluation and finite-difference checks.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::forward::forward_derivative;
use crate::store::{ExprForest, ExprStore, Node, NodeId, VarId};
use crate::symbolic::{symbolic_derivative, DiffPolicy, SubtreePolicy};
use crate::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Differences below this are accepted regardless of relative error.
pub const ABSOLUTE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Valuation {
    values: BTreeMap<VarId, f64>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn with(mut self, var: VarId, value: f64) -> Valuation {
        self.values.insert(var, value);
        self
    }

    pub fn set(&mut self, var: VarId, value: f64) {
        self.values.insert(var, value);
    }

    pub fn get(&self, var: VarId) -> Option<f64> {
        self.values.get(&var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    /// Binds variables by name using the store's variable table.
    pub fn from_names(store: &ExprStore, pairs: &[(&str, f64)]) -> Result<Valuation> {
        let mut at = Valuation::new();
        for &(name, value) in pairs {
            let v = store
                .var_id(name)
                .ok_or_else(|| Error::UnboundVariable(name.to_string()))?;
            at.set(v, value);
        }
        Ok(at)
    }
}

pub(crate) fn node_value(
    store: &ExprStore,
    node: Node,
    vals: &[f64],
    at: &Valuation,
) -> Result<f64> {
    match node {
        Node::Var(v) => at.get(v).ok_or_else(|| {
            let name = store
                .var_name(v)
                .map_or_else(|| alloc::format!("#{}", v.0), String::from);
            Error::UnboundVariable(name)
        }),
        Node::Const(c) => Ok(c),
        Node::Unary(op, c) => op.apply_unary(vals[c.index()]),
        Node::Binary(op, l, r) => op.apply_binary(vals[l.index()], vals[r.index()]),
        Node::SymbolRef(b) => Ok(vals[store.binding(b)?.root.index()]),
    }
}

/// Evaluates the expression under `root` in one forward scan over the nodes
/// it reaches. Forest bindings evaluate before their references because
/// they have smaller ids.
pub fn eval(store: &ExprStore, root: NodeId, at: &Valuation) -> Result<f64> {
    if root.index() >= store.len() {
        return Err(Error::DanglingNode {
            node: root,
            len: store.len(),
        });
    }
    let live = store.reachable(root);
    let mut vals = vec![0.0; root.index() + 1];
    for i in 0..=root.index() {
        if live[i] {
            vals[i] = node_value(store, store.node(NodeId(i as u32)), &vals, at)?;
        }
    }
    Ok(vals[root.index()])
}

pub fn eval_forest(forest: &ExprForest, at: &Valuation) -> Result<f64> {
    eval(&forest.store, forest.main, at)
}

/// Central difference `(f(x + h e) - f(x - h e)) / 2h` along `wrt`.
pub fn finite_difference(
    store: &ExprStore,
    root: NodeId,
    wrt: VarId,
    at: &Valuation,
    h: f64,
) -> Result<f64> {
    let x = at.get(wrt).unwrap_or(0.0);
    let plus = eval(store, root, &at.clone().with(wrt, x + h))?;
    let minus = eval(store, root, &at.clone().with(wrt, x - h))?;
    Ok((plus - minus) / (2.0 * h))
}

/// `|value - reference| / max(1, |value|)`.
pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / value.abs().max(1.0)
}

pub fn within_tolerance(value: f64, reference: f64, tol: f64) -> bool {
    (value - reference).abs() <= ABSOLUTE_FLOOR || relative_error(value, reference) <= tol
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EngineValue {
    pub engine: String,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GradientEntry {
    pub var: VarId,
    pub name: String,
    pub finite_difference: Option<f64>,
    pub engines: Vec<EngineValue>,
    pub max_relative_error: f64,
    /// All analytic engines produced the same bits.
    pub engines_agree: bool,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GradientReport {
    pub value: Option<f64>,
    pub entries: Vec<GradientEntry>,
    pub pass: bool,
    pub error: Option<String>,
}

/// Compares forward mode, symbolic differentiation under every storage
/// policy (memoized), and central differences for each variable. Failures
/// are reported, never returned as errors.
pub fn check_gradient(
    store: &ExprStore,
    root: NodeId,
    vars: &[VarId],
    at: &Valuation,
    tol: f64,
) -> GradientReport {
    let value = match eval(store, root, at) {
        Ok(v) => v,
        Err(e) => {
            return GradientReport {
                value: None,
                entries: Vec::new(),
                pass: false,
                error: Some(e.to_string()),
            }
        }
    };
    let entries: Vec<GradientEntry> = vars
        .iter()
        .map(|&v| check_one(store, root, v, at, tol))
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    GradientReport {
        value: Some(value),
        entries,
        pass,
        error: None,
    }
}

fn check_one(
    store: &ExprStore,
    root: NodeId,
    var: VarId,
    at: &Valuation,
    tol: f64,
) -> GradientEntry {
    let name = store
        .var_name(var)
        .map_or_else(|| alloc::format!("#{}", var.0), String::from);
    let mut engines = Vec::new();
    let record = |engines: &mut Vec<EngineValue>, engine: String, r: Result<f64>| {
        let (value, error) = match r {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        engines.push(EngineValue {
            engine,
            value,
            error,
        });
    };
    let fwd = forward_derivative(store, root, var, false)
        .and_then(|d| eval(&d.expr.store, d.expr.root, at));
    record(&mut engines, String::from("forward"), fwd);
    for subtree in SubtreePolicy::ALL {
        let r = symbolic_derivative((store, root), var, DiffPolicy::new(subtree, true), false)
            .and_then(|d| eval(d.store(), d.root(), at));
        record(
            &mut engines,
            alloc::format!("symbolic-{}", subtree.name()),
            r,
        );
    }
    let fd = finite_difference(store, root, var, at, DEFAULT_STEP);
    let mut error = engines.iter().find_map(|e| e.error.clone());
    let (fd, max_relative_error, close) = match fd {
        Ok(fd) => {
            let vals: Vec<f64> = engines.iter().filter_map(|e| e.value).collect();
            let max = vals
                .iter()
                .map(|&v| relative_error(v, fd))
                .fold(0.0, f64::max);
            (
                Some(fd),
                max,
                vals.iter().all(|&v| within_tolerance(v, fd, tol)),
            )
        }
        Err(e) => {
            error = error.or(Some(e.to_string()));
            (None, f64::INFINITY, false)
        }
    };
    let bits: Vec<u64> = engines
        .iter()
        .filter_map(|e| e.value.map(f64::to_bits))
        .collect();
    let engines_agree = bits.len() == engines.len() && bits.windows(2).all(|w| w[0] == w[1]);
    let pass = error.is_none() && close && engines_agree;
    GradientEntry {
        var,
        name,
        finite_difference: fd,
        engines,
        max_relative_error,
        engines_agree,
        pass,
        error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;

    #[test]
    fn chain_at_two() {
        let f = parse_expr("((x*x)*(x*x))*((x*x)*(x*x))").unwrap();
        let at = Valuation::new().with(VarId(0), 2.0);
        assert_eq!(eval(&f.store, f.root, &at).unwrap(), 256.0);
    }

    #[test]
    fn simple_values() {
        let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        let at = Valuation::from_names(&f.store, &[("x1", 0.0), ("x2", 0.0)]).unwrap();
        assert_eq!(eval(&f.store, f.root, &at).unwrap(), 0.0);
        let g = parse_expr("x1*x2*x3").unwrap();
        let at = Valuation::from_names(&g.store, &[("x1", 2.0), ("x2", 3.0), ("x3", 5.0)]).unwrap();
        assert_eq!(eval(&g.store, g.root, &at).unwrap(), 30.0);
    }

    #[test]
    fn unbound_and_domain_errors() {
        let f = parse_expr("ln(x)+y").unwrap();
        let at = Valuation::from_names(&f.store, &[("x", 1.0)]).unwrap();
        assert_eq!(
            eval(&f.store, f.root, &at),
            Err(Error::UnboundVariable("y".into()))
        );
        let at = at.with(VarId(1), 0.0).with(VarId(0), -1.0);
        assert!(matches!(
            eval(&f.store, f.root, &at),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn central_differences() {
        let sq = parse_expr("x^2").unwrap();
        let at = Valuation::new().with(VarId(0), 3.0);
        let d = finite_difference(&sq.store, sq.root, VarId(0), &at, 1e-6).unwrap();
        assert!((d - 6.0).abs() / 6.0 < 1e-6);

        let sp = parse_expr("x1*x2*x3").unwrap();
        let at = Valuation::new()
            .with(VarId(0), 2.0)
            .with(VarId(1), 3.0)
            .with(VarId(2), 5.0);
        let d = finite_difference(&sp.store, sp.root, VarId(1), &at, 1e-6).unwrap();
        assert!((d - 2.0 * 5.0).abs() < 1e-6);

        let s = parse_expr("sin(x)").unwrap();
        let d = finite_difference(
            &s.store,
            s.root,
            VarId(0),
            &Valuation::new().with(VarId(0), 0.0),
            1e-6,
        )
        .unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_check_figure_one() {
        let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        let at = Valuation::new().with(VarId(0), 0.3).with(VarId(1), 0.4);
        let r = check_gradient(&f.store, f.root, &[VarId(0), VarId(1)], &at, 1e-5);
        assert!(r.pass, "{r:?}");
        for e in &r.entries {
            assert!(e.engines_agree);
            assert_eq!(e.engines.len(), 4);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = parse_expr("3*4+sin(2)").unwrap();
        let r = check_gradient(&f.store, f.root, &[VarId(0)], &Valuation::new(), 1e-5);
        assert!(r.pass);
        assert!(r.entries[0].engines.iter().all(|e| e.value == Some(0.0)));
    }

    #[test]
    fn domain_error_is_reported() {
        let f = parse_expr("ln(x)*x").unwrap();
        let r = check_gradient(
            &f.store,
            f.root,
            &[VarId(0)],
            &Valuation::new().with(VarId(0), -2.0),
            1e-5,
        );
        assert!(!r.pass);
        assert!(r.error.unwrap().contains("ln"));
    }

    #[test]
    fn forest_evaluates_like_dag() {
        let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        let forest = crate::transforms::to_forest(&f.store, f.root).unwrap();
        let at = Valuation::new().with(VarId(0), 0.3).with(VarId(1), 0.4);
        assert_eq!(
            eval_forest(&forest, &at).unwrap().to_bits(),
            eval(&f.store, f.root, &at).unwrap().to_bits()
        );
    }
}
