use alloc::string::String;
use core::fmt;

use crate::op::OpKind;
use crate::store::{BindingId, NodeId, VarId};

/// Errors raised by construction, transformation, evaluation and parsing.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A child reference points past the end of the store.
    DanglingNode {
        node: NodeId,
        len: usize,
    },
    UnknownVariable(VarId),
    UnknownBinding(BindingId),
    /// Symbol references and bindings are only valid in forest stores.
    NotAForest,
    /// An operation was handed a node or store it does not accept.
    Contract(&'static str),
    /// The result would exceed the node budget. `estimated` saturates at
    /// `u128::MAX` when the exact size is not representable.
    BudgetExceeded {
        estimated: u128,
        budget: usize,
    },
    UnboundVariable(String),
    Domain {
        op: OpKind,
        value: f64,
    },
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    UseBeforeAssign {
        name: String,
        line: usize,
        column: usize,
    },
    AssignToParam(String),
    StepLimitExceeded(usize),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DanglingNode { node, len } => {
                write!(
                    f,
                    "node {} does not exist (store has {} nodes)",
                    node.0, len
                )
            }
            Error::UnknownVariable(v) => write!(f, "unknown variable id {}", v.0),
            Error::UnknownBinding(b) => write!(f, "unknown binding id {}", b.0),
            Error::NotAForest => f.write_str("symbol references require a forest store"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::BudgetExceeded { estimated, budget } => {
                if *estimated == u128::MAX {
                    write!(
                        f,
                        "result exceeds budget of {budget} nodes (size overflows u128)"
                    )
                } else {
                    write!(f, "result of {estimated} nodes exceeds budget of {budget}")
                }
            }
            Error::UnboundVariable(name) => write!(f, "variable `{name}` is not bound"),
            Error::Domain { op, value } => {
                write!(f, "{} is undefined at {}", op.name(), value)
            }
            Error::Syntax {
                line,
                column,
                message,
            } => {
                write!(f, "syntax error at {line}:{column}: {message}")
            }
            Error::UseBeforeAssign { name, line, column } => {
                write!(f, "`{name}` used before assignment at {line}:{column}")
            }
            Error::AssignToParam(name) => write!(f, "parameter `{name}` cannot be reassigned"),
            Error::StepLimitExceeded(limit) => {
                write!(f, "program did not finish within {limit} steps")
            }
        }
    }
}

impl core::error::Error for Error {}
