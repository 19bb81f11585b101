//! Operation log: the multiset of constructor calls a differentiation made.

use alloc::collections::BTreeMap;
use core::fmt;

use crate::op::OpKind;
use crate::store::Node;

/// Why a derivative node was constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Role {
    /// Derivative of a leaf: `1` or `0`.
    Seed,
    /// Part of a local partial `∂f/∂g`.
    LocalPartial,
    /// `∂f/∂g · dg`.
    ChainMultiply,
    /// Sum of the two chain terms of a binary node.
    FanInAdd,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Seed => "seed",
            Role::LocalPartial => "local-partial",
            Role::ChainMultiply => "chain-multiply",
            Role::FanInAdd => "fan-in-add",
        }
    }
}

/// What was constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogOp {
    Const,
    Var,
    Op(OpKind),
}

impl LogOp {
    /// `None` for symbol references, which are presentation rather than work.
    pub fn of(payload: &Node) -> Option<LogOp> {
        match *payload {
            Node::Const(_) => Some(LogOp::Const),
            Node::Var(_) => Some(LogOp::Var),
            Node::Unary(op, _) | Node::Binary(op, _, _) => Some(LogOp::Op(op)),
            Node::SymbolRef(_) => None,
        }
    }
}

impl fmt::Display for LogOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogOp::Const => f.write_str("const"),
            LogOp::Var => f.write_str("var"),
            LogOp::Op(op) => op.fmt(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogEntry {
    pub op: LogOp,
    pub role: Role,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpLog {
    entries: BTreeMap<LogEntry, u64>,
}

impl OpLog {
    pub fn new() -> OpLog {
        OpLog::default()
    }

    pub fn record(&mut self, op: LogOp, role: Role) {
        *self.entries.entry(LogEntry { op, role }).or_insert(0) += 1;
    }

    pub fn count(&self, entry: LogEntry) -> u64 {
        self.entries.get(&entry).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(entry, multiplicity)` pairs in a fixed order.
    pub fn iter(&self) -> impl Iterator<Item = (LogEntry, u64)> + '_ {
        self.entries.iter().map(|(e, &c)| (*e, c))
    }

    /// Counts per constructed operation, summed over roles.
    pub fn by_op(&self) -> BTreeMap<LogOp, u64> {
        let mut out = BTreeMap::new();
        for (e, c) in self.iter() {
            *out.entry(e.op).or_insert(0) += c;
        }
        out
    }

    pub fn by_role(&self) -> BTreeMap<Role, u64> {
        let mut out = BTreeMap::new();
        for (e, c) in self.iter() {
            *out.entry(e.role).or_insert(0) += c;
        }
        out
    }

    pub fn merge(&mut self, other: &OpLog) {
        for (e, c) in other.iter() {
            *self.entries.entry(e).or_insert(0) += c;
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for LogEntry {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use alloc::string::ToString;
        use serde::ser::SerializeStruct;

        let mut st = ser.serialize_struct("LogEntry", 2)?;
        st.serialize_field("op", &self.op.to_string())?;
        st.serialize_field("role", &self.role)?;
        st.end()
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for OpLog {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use alloc::string::ToString;
        use serde::ser::SerializeSeq;

        #[derive(serde::Serialize)]
        struct Row {
            op: alloc::string::String,
            role: Role,
            count: u64,
        }
        let mut seq = ser.serialize_seq(Some(self.entries.len()))?;
        for (e, count) in self.iter() {
            seq.serialize_element(&Row {
                op: e.op.to_string(),
                role: e.role,
                count,
            })?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_sums_counters() {
        let mut a = OpLog::new();
        a.record(LogOp::Op(OpKind::Mul), Role::ChainMultiply);
        a.record(LogOp::Const, Role::Seed);
        let mut b = OpLog::new();
        b.record(LogOp::Op(OpKind::Mul), Role::ChainMultiply);
        a.merge(&b);
        assert_eq!(
            a.count(LogEntry {
                op: LogOp::Op(OpKind::Mul),
                role: Role::ChainMultiply
            }),
            2
        );
        assert_eq!(a.total(), 3);
        assert_eq!(a.by_op()[&LogOp::Op(OpKind::Mul)], 2);
    }
}
