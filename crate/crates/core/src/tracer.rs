//! Tracing interpreter for the mini language. Running a program at concrete
//! inputs records only the arithmetic it performs; branches and loops are
//! resolved numerically and leave no nodes behind.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::eval::{eval, node_value, Valuation};
use crate::forward::forward_derivative;
use crate::op::OpKind;
use crate::parser::{Ast, Cond, Program, Stmt};
use crate::store::{Expr, ExprStore, NodeId};
use crate::symbolic::{symbolic_derivative, DiffPolicy};
use crate::transforms::cons_tree;
use crate::{Error, Result};

pub const DEFAULT_STEP_LIMIT: usize = 100_000;

/// Execution trace of one run.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Hash-consed DAG of the returned value; contains only the nodes the
    /// result depends on.
    pub dag: Expr,
    pub inputs: Valuation,
    pub value: f64,
    /// `(statement id, taken)` for every condition evaluated, in order. For a
    /// loop, `taken` means the body ran once more.
    pub branch_decisions: Vec<(usize, bool)>,
    pub steps: usize,
}

struct Interp {
    store: ExprStore,
    vals: Vec<f64>,
    env: BTreeMap<String, NodeId>,
    inputs: Valuation,
    decisions: Vec<(usize, bool)>,
    steps: usize,
    limit: usize,
}

impl Interp {
    fn step(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(Error::StepLimitExceeded(self.limit));
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Result<NodeId> {
        self.env
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnboundVariable(name.to_string()))
    }

    fn build(&mut self, e: &Ast) -> Result<NodeId> {
        let env = &self.env;
        let id = e.lower(&mut self.store, &mut |name, _, _| {
            env.get(name)
                .copied()
                .ok_or_else(|| Error::UnboundVariable(name.to_string()))
        })?;
        for i in self.vals.len()..self.store.len() {
            let v = node_value(
                &self.store,
                self.store.node(NodeId(i as u32)),
                &self.vals,
                &self.inputs,
            )?;
            self.vals.push(v);
        }
        Ok(id)
    }

    /// Numeric value of an expression, without touching the store.
    fn value(&self, e: &Ast) -> Result<f64> {
        Ok(match e {
            Ast::Num(v) => *v,
            Ast::Name(n, _) => self.vals[self.lookup(n)?.index()],
            Ast::Neg(c) => OpKind::Neg.apply_unary(self.value(c)?)?,
            Ast::Call(op, c) => op.apply_unary(self.value(c)?)?,
            Ast::Pow(c, n) => OpKind::PowConst(*n).apply_unary(self.value(c)?)?,
            Ast::Bin(op, l, r) => op.apply_binary(self.value(l)?, self.value(r)?)?,
        })
    }

    fn test(&mut self, id: usize, cond: &Cond) -> Result<bool> {
        self.step()?;
        let taken = cond
            .cmp
            .holds(self.value(&cond.lhs)?, self.value(&cond.rhs)?);
        self.decisions.push((id, taken));
        Ok(taken)
    }

    fn run(&mut self, stmts: &[Stmt]) -> Result<Option<NodeId>> {
        for s in stmts {
            match s {
                Stmt::Assign { name, expr, .. } => {
                    self.step()?;
                    let id = self.build(expr)?;
                    self.env.insert(name.clone(), id);
                }
                Stmt::If {
                    id,
                    cond,
                    then,
                    els,
                } => {
                    let branch = if self.test(*id, cond)? { then } else { els };
                    if let Some(r) = self.run(branch)? {
                        return Ok(Some(r));
                    }
                }
                Stmt::While { id, cond, body } => {
                    while self.test(*id, cond)? {
                        if let Some(r) = self.run(body)? {
                            return Ok(Some(r));
                        }
                    }
                }
                Stmt::Return(e) => {
                    self.step()?;
                    return self.build(e).map(Some);
                }
            }
        }
        Ok(None)
    }
}

/// Interprets `program` at `inputs` (one value per parameter, by name).
pub fn trace_program(
    program: &Program,
    inputs: &[(&str, f64)],
    step_limit: usize,
) -> Result<Trace> {
    if step_limit == 0 {
        return Err(Error::Contract("step limit must be at least 1"));
    }
    let mut store = ExprStore::hash_consed();
    let mut at = Valuation::new();
    let mut env = BTreeMap::new();
    let mut vals = Vec::new();
    for p in &program.params {
        let id = store.var(p);
        let v = store.var_id(p).expect("just interned");
        let value = inputs
            .iter()
            .find(|(n, _)| n == p)
            .map(|&(_, x)| x)
            .ok_or_else(|| Error::UnboundVariable(p.clone()))?;
        at.set(v, value);
        vals.push(value);
        env.insert(p.clone(), id);
    }
    if let Some((extra, _)) = inputs
        .iter()
        .find(|(n, _)| !program.params.iter().any(|p| p == n))
    {
        return Err(Error::UnboundVariable(alloc::format!(
            "{extra} (not a parameter)"
        )));
    }
    let mut it = Interp {
        store,
        vals,
        env,
        inputs: at,
        decisions: Vec::new(),
        steps: 0,
        limit: step_limit,
    };
    let root = it
        .run(&program.body)?
        .ok_or(Error::Contract("program finished without returning"))?;
    let value = it.vals[root.index()];
    let dag = cons_tree(&it.store, root)?;
    Ok(Trace {
        dag,
        inputs: it.inputs,
        value,
        branch_decisions: it.decisions,
        steps: it.steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceMode {
    Forward,
    Symbolic(DiffPolicy),
}

/// Value and derivative with respect to parameter `wrt` at `inputs`. The
/// derivative is that of the traced branch only.
pub fn trace_derivative(
    program: &Program,
    inputs: &[(&str, f64)],
    wrt: &str,
    mode: TraceMode,
) -> Result<(f64, f64)> {
    let trace = trace_program(program, inputs, DEFAULT_STEP_LIMIT)?;
    let dag = &trace.dag;
    let v = dag
        .store
        .var_id(wrt)
        .ok_or_else(|| Error::UnboundVariable(wrt.to_string()))?;
    let slope = match mode {
        TraceMode::Forward => {
            let d = forward_derivative(&dag.store, dag.root, v, false)?;
            eval(&d.expr.store, d.expr.root, &trace.inputs)?
        }
        TraceMode::Symbolic(policy) => {
            let d = symbolic_derivative(dag, v, policy, false)?;
            eval(d.store(), d.root(), &trace.inputs)?
        }
    };
    Ok((trace.value, slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr, parse_program};
    use crate::store::Node;
    use crate::symbolic::SubtreePolicy;

    const ABS: &str = "if x > 0 { f = x } else { f = -x }\nreturn f";
    const SQUARING: &str =
        "params x\ny = x\ni = 0\nwhile i < 3 {\n  y = y * y\n  i = i + 1\n}\nreturn y";

    #[test]
    fn abs_traces_are_branch_free() {
        let p = parse_program(ABS).unwrap();
        let t = trace_program(&p, &[("x", -2.0)], 100).unwrap();
        assert_eq!(t.dag.node_count(), 2);
        assert_eq!(
            t.dag.store.node(t.dag.root),
            Node::Unary(OpKind::Neg, NodeId(0))
        );
        assert_eq!(t.value, 2.0);
        assert_eq!(t.branch_decisions, [(0, false)]);
        let t = trace_program(&p, &[("x", 2.0)], 100).unwrap();
        assert_eq!(t.dag.node_count(), 1);
    }

    #[test]
    fn abs_derivatives() {
        let p = parse_program(ABS).unwrap();
        for mode in [
            TraceMode::Forward,
            TraceMode::Symbolic(DiffPolicy::new(SubtreePolicy::Share, true)),
        ] {
            assert_eq!(
                trace_derivative(&p, &[("x", 2.0)], "x", mode).unwrap(),
                (2.0, 1.0)
            );
            assert_eq!(
                trace_derivative(&p, &[("x", -2.0)], "x", mode).unwrap(),
                (2.0, -1.0)
            );
        }
    }

    #[test]
    fn squaring_loop_matches_unrolled_chain() {
        let p = parse_program(SQUARING).unwrap();
        let t = trace_program(&p, &[("x", 2.0)], 100).unwrap();
        let unrolled = parse_expr("((x*x)*(x*x))*((x*x)*(x*x))").unwrap();
        assert_eq!(t.dag.store.nodes(), unrolled.store.nodes());
        assert_eq!(t.value, 256.0);
        assert_eq!(
            t.branch_decisions,
            [(0, true), (0, true), (0, true), (0, false)]
        );
        let (_, d) = trace_derivative(&p, &[("x", 2.0)], "x", TraceMode::Forward).unwrap();
        assert_eq!(d, 1024.0);
    }

    #[test]
    fn straight_line_program_is_figure_one() {
        let p = parse_program("t1 = x1 + x2\nf = sin(t1)*cos(t1)\nreturn f").unwrap();
        let t = trace_program(&p, &[("x1", 0.3), ("x2", 0.4)], 100).unwrap();
        let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        assert_eq!(t.dag.store.nodes(), f.store.nodes());
        assert_eq!(t.dag.node_count(), 6);
    }

    #[test]
    fn runaway_loop_hits_the_step_limit() {
        let p = parse_program("y = x\nwhile 1 > 0 { y = y + 1 }\nreturn y").unwrap();
        assert_eq!(
            trace_program(&p, &[("x", 0.0)], 1000).unwrap_err(),
            Error::StepLimitExceeded(1000)
        );
    }

    #[test]
    fn inputs_must_match_parameters() {
        let p = parse_program(ABS).unwrap();
        assert!(matches!(
            trace_program(&p, &[], 100),
            Err(Error::UnboundVariable(_))
        ));
        assert!(trace_program(&p, &[("x", 1.0), ("z", 1.0)], 100).is_err());
        assert!(trace_derivative(&p, &[("x", 1.0)], "q", TraceMode::Forward).is_err());
    }

    #[test]
    fn domain_errors_surface() {
        let p = parse_program("return ln(x)").unwrap();
        assert!(matches!(
            trace_program(&p, &[("x", -1.0)], 100),
            Err(Error::Domain { .. })
        ));
    }
}
