//! Forward-mode automatic differentiation and symbolic differentiation over
//! one shared expression IR.
//!
//! Both engines build derivative nodes through the same instrumented
//! constructor ([`ExprStore::make_node`] plus an [`OpLog`]), so their work can
//! be compared operation by operation:
//!
//! * [`forward`] sweeps an expression DAG once in topological order, storing
//!   the tangent of every node.
//! * [`symbolic`] rewrites trees, DAGs or forests recursively with the unary
//!   chain rule and the binary total-derivative rule, under a configurable
//!   subtree-storage policy ([`SubtreePolicy`]) and optional memoization.
//! * [`equivalence`] compares the resulting operation multisets and
//!   derivative graphs.
//!
//! [`transforms`] converts between the DAG, tree and forest representations
//! and measures how much each one costs, [`tracer`] turns small imperative
//! programs into branch-free execution traces, and [`eval`] provides numeric
//! evaluation and finite-difference oracles.
//!
//! # `no_std`
//!
//! The crate is `no_std` and only needs `alloc`. Transcendental functions come
//! from `libm`, which keeps evaluation bit-reproducible across platforms.
//!
//! ```
//! use adsym_core::{forward_derivative, parse_expr, eval, Valuation};
//!
//! let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
//! assert_eq!(f.node_count(), 6);
//!
//! let x1 = f.store.var_id("x1").unwrap();
//! let x2 = f.store.var_id("x2").unwrap();
//! let d = forward_derivative(&f.store, f.root, x1, false).unwrap();
//! let at = Valuation::new().with(x1, 0.3).with(x2, 0.4);
//! let slope = eval(&d.expr.store, d.expr.root, &at).unwrap();
//! assert!((slope - libm::cos(1.4)).abs() < 1e-12);
//! ```

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod equivalence;
pub mod error;
pub mod eval;
pub mod forward;
pub mod gen;
pub mod op;
pub mod oplog;
pub mod parser;
pub mod printer;
pub mod rules;
pub mod store;
pub mod symbolic;
pub mod tracer;
pub mod transforms;

mod emit;

pub use equivalence::{
    compare_op_logs, compare_structural, randomized_equivalence_suite, OpLogVerdict,
    StructuralVerdict, SuiteSummary,
};
pub use error::Error;
pub use eval::{check_gradient, eval, finite_difference, GradientReport, Valuation};
pub use forward::{forward_derivative, forward_gradient, Derivative, DerivativeTable};
pub use op::OpKind;
pub use oplog::{LogEntry, LogOp, OpLog, Role};
pub use parser::{parse_expr, parse_expr_with_vars, parse_program, Program};
pub use printer::{pretty, pretty_forest};
pub use rules::{local_partials, ChildEdge, DerivRuleTable};
pub use store::{BindingId, Expr, ExprForest, ExprStore, Node, NodeId, Sharing, VarId};
pub use symbolic::{
    derivative_size, symbolic_derivative, symbolic_derivative_with, DiffOptions, DiffPolicy,
    SubtreePolicy, SymbolicDerivative, SymbolicOutput,
};
pub use tracer::{trace_derivative, trace_program, Trace, TraceMode};
pub use transforms::{cons_tree, inline_forest, swell_report, to_forest, unfold, SwellReport};

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Default node budget for unfolding and copy-policy differentiation.
pub const DEFAULT_BUDGET: usize = 1_000_000;
