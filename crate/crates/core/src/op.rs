use core::fmt;

use crate::{Error, Result};

/// Primitive operations. `Sub` and `Div` are primitive rather than sugar so
/// operation counts stay comparable between engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    /// Integer power `g^n`.
    PowConst(i32),
}

impl OpKind {
    pub const BINARY: [OpKind; 4] = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div];
    pub const UNARY: [OpKind; 6] = [
        OpKind::Neg,
        OpKind::Sin,
        OpKind::Cos,
        OpKind::Exp,
        OpKind::Ln,
        OpKind::Sqrt,
    ];

    pub fn arity(self) -> usize {
        match self {
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => 2,
            _ => 1,
        }
    }

    pub fn is_binary(self) -> bool {
        self.arity() == 2
    }

    /// Dense index of the operation tag, ignoring the exponent of `PowConst`.
    pub fn tag(self) -> usize {
        match self {
            OpKind::Add => 0,
            OpKind::Sub => 1,
            OpKind::Mul => 2,
            OpKind::Div => 3,
            OpKind::Neg => 4,
            OpKind::Sin => 5,
            OpKind::Cos => 6,
            OpKind::Exp => 7,
            OpKind::Ln => 8,
            OpKind::Sqrt => 9,
            OpKind::PowConst(_) => 10,
        }
    }

    pub const TAGS: usize = 11;

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Neg => "neg",
            OpKind::Sin => "sin",
            OpKind::Cos => "cos",
            OpKind::Exp => "exp",
            OpKind::Ln => "ln",
            OpKind::Sqrt => "sqrt",
            OpKind::PowConst(_) => "pow",
        }
    }

    /// Function-call spelling used by the parser, for the named unary ops.
    pub fn from_function(name: &str) -> Option<OpKind> {
        Some(match name {
            "sin" => OpKind::Sin,
            "cos" => OpKind::Cos,
            "exp" => OpKind::Exp,
            "ln" => OpKind::Ln,
            "sqrt" => OpKind::Sqrt,
            _ => return None,
        })
    }

    pub fn apply_unary(self, x: f64) -> Result<f64> {
        let domain = |ok: bool, v: f64| {
            if ok {
                Ok(v)
            } else {
                Err(Error::Domain { op: self, value: x })
            }
        };
        match self {
            OpKind::Neg => Ok(-x),
            OpKind::Sin => Ok(libm::sin(x)),
            OpKind::Cos => Ok(libm::cos(x)),
            OpKind::Exp => Ok(libm::exp(x)),
            OpKind::Ln => domain(x > 0.0, libm::log(x)),
            OpKind::Sqrt => domain(x >= 0.0, libm::sqrt(x)),
            OpKind::PowConst(n) => domain(n >= 0 || x != 0.0, powi(x, n)),
            _ => Err(Error::Contract("binary operation applied to one operand")),
        }
    }

    pub fn apply_binary(self, a: f64, b: f64) -> Result<f64> {
        match self {
            OpKind::Add => Ok(a + b),
            OpKind::Sub => Ok(a - b),
            OpKind::Mul => Ok(a * b),
            OpKind::Div if b == 0.0 => Err(Error::Domain { op: self, value: b }),
            OpKind::Div => Ok(a / b),
            _ => Err(Error::Contract("unary operation applied to two operands")),
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpKind::PowConst(n) => write!(f, "pow{n}"),
            op => f.write_str(op.name()),
        }
    }
}

/// Integer power by repeated squaring. Deterministic, so every engine and
/// every representation of the same expression rounds identically.
pub fn powi(x: f64, n: i32) -> f64 {
    let mut e = (n as i64).unsigned_abs();
    let mut base = x;
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        e >>= 1;
        if e > 0 {
            base *= base;
        }
    }
    if n < 0 {
        1.0 / acc
    } else {
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_matches_tag_class() {
        for op in OpKind::BINARY {
            assert_eq!(op.arity(), 2);
        }
        for op in OpKind::UNARY {
            assert_eq!(op.arity(), 1);
        }
        assert_eq!(OpKind::PowConst(3).arity(), 1);
    }

    #[test]
    fn powi_small_cases() {
        assert_eq!(powi(2.0, 0), 1.0);
        assert_eq!(powi(2.0, 8), 256.0);
        assert_eq!(powi(3.0, 2), 9.0);
        assert_eq!(powi(2.0, -2), 0.25);
        assert_eq!(powi(-1.5, 3), -3.375);
    }

    #[test]
    fn domain_errors() {
        assert!(OpKind::Ln.apply_unary(-1.0).is_err());
        assert!(OpKind::Ln.apply_unary(0.0).is_err());
        assert!(OpKind::Sqrt.apply_unary(-0.1).is_err());
        assert_eq!(OpKind::Sqrt.apply_unary(0.0), Ok(0.0));
        assert!(OpKind::Div.apply_binary(1.0, 0.0).is_err());
        assert!(OpKind::PowConst(-1).apply_unary(0.0).is_err());
        assert_eq!(OpKind::PowConst(0).apply_unary(0.0), Ok(1.0));
    }
}
