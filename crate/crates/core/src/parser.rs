//! Parsers for the expression grammar and the mini imperative language.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | atom ('^' ['-'] integer)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Programs are statements separated by newlines or `;`:
//! `name = expr`, `if cond { ... } else { ... }`, `while cond { ... }` and a
//! final `return expr`. An optional first line `params a, b` fixes the
//! parameter list; otherwise every name read before any assignment to it is
//! a parameter, in order of first use. `#` starts a comment.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::op::OpKind;
use crate::store::{Expr, ExprStore, NodeId};
use crate::{Error, Result};

const MAX_NESTING: usize = 256;

/// Line and column (both 1-based) of a token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

/// Expression syntax tree, before lowering into a store.
#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Num(f64),
    Name(String, Pos),
    Neg(Box<Ast>),
    Call(OpKind, Box<Ast>),
    Pow(Box<Ast>, i32),
    Bin(OpKind, Box<Ast>, Box<Ast>),
}

impl Ast {
    /// Names read by the expression, left to right.
    pub fn names(&self) -> Vec<(&str, Pos)> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(a) = stack.pop() {
            match a {
                Ast::Num(_) => {}
                Ast::Name(n, p) => out.push((n.as_str(), *p)),
                Ast::Neg(c) | Ast::Call(_, c) | Ast::Pow(c, _) => stack.push(c),
                Ast::Bin(_, l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out
    }

    /// Builds the expression in `store`, resolving names through `resolve`.
    pub fn lower(
        &self,
        store: &mut ExprStore,
        resolve: &mut dyn FnMut(&str, Pos, &mut ExprStore) -> Result<NodeId>,
    ) -> Result<NodeId> {
        match self {
            Ast::Num(v) => Ok(store.constant(*v)),
            Ast::Name(n, p) => resolve(n, *p, store),
            Ast::Neg(c) => {
                let c = c.lower(store, resolve)?;
                store.unary(OpKind::Neg, c)
            }
            Ast::Call(op, c) => {
                let c = c.lower(store, resolve)?;
                store.unary(*op, c)
            }
            Ast::Pow(c, n) => {
                let c = c.lower(store, resolve)?;
                store.unary(OpKind::PowConst(*n), c)
            }
            Ast::Bin(op, l, r) => {
                let l = l.lower(store, resolve)?;
                let r = r.lower(store, resolve)?;
                store.binary(*op, l, r)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Cmp {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cond {
    pub lhs: Ast,
    pub cmp: Cmp,
    pub rhs: Ast,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Assign {
        name: String,
        expr: Ast,
        pos: Pos,
    },
    /// `id` numbers the branching statements in source order.
    If {
        id: usize,
        cond: Cond,
        then: Vec<Stmt>,
        els: Vec<Stmt>,
    },
    While {
        id: usize,
        cond: Cond,
        body: Vec<Stmt>,
    },
    Return(Ast),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub params: Vec<String>,
    /// Top-level statements; the last one is the only `Return`.
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn count_statements(&self) -> (usize, usize, usize) {
        fn walk(stmts: &[Stmt], acc: &mut (usize, usize, usize)) {
            for s in stmts {
                match s {
                    Stmt::Assign { .. } | Stmt::Return(_) => acc.0 += 1,
                    Stmt::If { then, els, .. } => {
                        acc.1 += 1;
                        walk(then, acc);
                        walk(els, acc);
                    }
                    Stmt::While { body, .. } => {
                        acc.2 += 1;
                        walk(body, acc);
                    }
                }
            }
        }
        let mut acc = (0, 0, 0);
        walk(&self.body, &mut acc);
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Sym(&'static str),
    Newline,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: Pos,
}

const SYMBOLS: [&str; 19] = [
    "<=", ">=", "==", "!=", "+", "-", "*", "/", "^", "(", ")", "{", "}", "=", ",", ";", "<", ">",
    "!",
];

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut depth = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c == '\n' {
            if depth == 0 {
                out.push(Token {
                    tok: Tok::Newline,
                    pos,
                });
            }
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let mut integral = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(pos, format!("bad number `{s}`")))?;
            out.push(Token {
                tok: Tok::Num(v, integral),
                pos,
            });
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
        } else {
            let sym = SYMBOLS.iter().find(|s| {
                let sc: Vec<char> = s.chars().collect();
                chars[i..].starts_with(&sc)
            });
            let Some(&sym) = sym else {
                return Err(syntax(pos, format!("unexpected character `{c}`")));
            };
            if sym == "!" {
                return Err(syntax(pos, String::from("unexpected character `!`")));
            }
            match sym {
                "(" => depth += 1,
                ")" => depth = depth.saturating_sub(1),
                _ => {}
            }
            i += sym.len();
            out.push(Token {
                tok: Tok::Sym(sym),
                pos,
            });
        }
        col += i - start;
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, column: col },
    });
    Ok(out)
}

fn syntax(pos: Pos, message: String) -> Error {
    Error::Syntax {
        line: pos.line,
        column: pos.column,
        message,
    }
}

const KEYWORDS: [&str; 5] = ["if", "else", "while", "return", "params"];

struct Parser {
    toks: Vec<Token>,
    at: usize,
    depth: usize,
    next_branch: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Parser> {
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
            depth: 0,
            next_branch: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(t) if *t == s)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(t) if t == k)
    }

    fn expect_sym(&mut self, s: &str) -> Result<Pos> {
        if self.is_sym(s) {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> Error {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Num(v, _) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Newline => String::from("end of line"),
            Tok::Eof => String::from("end of input"),
        };
        syntax(t.pos, format!("expected {wanted}, found {found}"))
    }

    fn ident(&mut self) -> Result<(String, Pos)> {
        match self.peek().tok.clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok((s, self.bump().pos)),
            _ => Err(self.unexpected("a name")),
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_sym("+") {
                OpKind::Add
            } else if self.is_sym("-") {
                OpKind::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.is_sym("*") {
                OpKind::Mul
            } else if self.is_sym("/") {
                OpKind::Div
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Parser) -> Result<T>) -> Result<T> {
        if self.depth >= MAX_NESTING {
            return Err(syntax(
                self.peek().pos,
                String::from("expression nested too deeply"),
            ));
        }
        self.depth += 1;
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn factor(&mut self) -> Result<Ast> {
        if self.is_sym("-") {
            self.bump();
            // a bare literal after the minus is a negative constant
            if let (Tok::Num(v, _), Some(next)) = (&self.peek().tok, self.toks.get(self.at + 1)) {
                if next.tok != Tok::Sym("^") {
                    let v = -*v;
                    self.bump();
                    return Ok(Ast::Num(v));
                }
            }
            let inner = self.nested(Parser::factor)?;
            return Ok(Ast::Neg(Box::new(inner)));
        }
        let base = self.atom()?;
        if !self.is_sym("^") {
            return Ok(base);
        }
        self.bump();
        let negative = self.is_sym("-");
        if negative {
            self.bump();
        }
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v, true) if v <= i32::MAX as f64 => {
                self.bump();
                let n = v as i32;
                Ok(Ast::Pow(Box::new(base), if negative { -n } else { n }))
            }
            _ => Err(self.unexpected("an integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Ast> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v, _) => {
                self.bump();
                Ok(Ast::Num(v))
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                if !self.is_sym("(") {
                    return Ok(Ast::Name(name, t.pos));
                }
                let op = OpKind::from_function(&name)
                    .ok_or_else(|| syntax(t.pos, format!("unknown function `{name}`")))?;
                self.bump();
                let arg = self.nested(Parser::expr)?;
                self.expect_sym(")")?;
                Ok(Ast::Call(op, Box::new(arg)))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.nested(Parser::expr)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn at_separator(&self) -> bool {
        matches!(self.peek().tok, Tok::Newline) || self.is_sym(";")
    }

    fn skip_separators(&mut self) {
        while self.at_separator() {
            self.bump();
        }
    }

    /// Statements up to `}` or end of input.
    fn block_body(&mut self) -> Result<Vec<Stmt>> {
        let mut stmts = Vec::new();
        self.skip_separators();
        while !self.is_sym("}") && self.peek().tok != Tok::Eof {
            stmts.push(self.stmt()?);
            if !self.at_separator() && !self.is_sym("}") && self.peek().tok != Tok::Eof {
                return Err(self.unexpected("end of statement"));
            }
            self.skip_separators();
        }
        Ok(stmts)
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect_sym("{")?;
        let body = self.nested(Parser::block_body)?;
        self.expect_sym("}")?;
        Ok(body)
    }

    fn cond(&mut self) -> Result<Cond> {
        let lhs = self.expr()?;
        let cmp = match &self.peek().tok {
            Tok::Sym("<") => Cmp::Lt,
            Tok::Sym("<=") => Cmp::Le,
            Tok::Sym(">") => Cmp::Gt,
            Tok::Sym(">=") => Cmp::Ge,
            Tok::Sym("==") => Cmp::Eq,
            Tok::Sym("!=") => Cmp::Ne,
            _ => return Err(self.unexpected("a comparison")),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Cond { lhs, cmp, rhs })
    }

    fn stmt(&mut self) -> Result<Stmt> {
        if self.is_keyword("if") {
            self.bump();
            let id = self.next_branch;
            self.next_branch += 1;
            let cond = self.cond()?;
            let then = self.block()?;
            let mut els = Vec::new();
            // `else` may sit on the line after the closing brace
            let save = self.at;
            while matches!(self.peek().tok, Tok::Newline) {
                self.bump();
            }
            if self.is_keyword("else") {
                self.bump();
                els = if self.is_keyword("if") {
                    alloc::vec![self.nested(Parser::stmt)?]
                } else {
                    self.block()?
                };
            } else {
                self.at = save;
            }
            Ok(Stmt::If {
                id,
                cond,
                then,
                els,
            })
        } else if self.is_keyword("while") {
            self.bump();
            let id = self.next_branch;
            self.next_branch += 1;
            let cond = self.cond()?;
            let body = self.block()?;
            Ok(Stmt::While { id, cond, body })
        } else if self.is_keyword("return") {
            self.bump();
            Ok(Stmt::Return(self.expr()?))
        } else {
            let (name, pos) = self.ident()?;
            self.expect_sym("=")?;
            Ok(Stmt::Assign {
                name,
                expr: self.expr()?,
                pos,
            })
        }
    }
}

/// Parses an expression into a fresh hash-consed store. Variables are
/// interned in order of first appearance.
pub fn parse_expr(text: &str) -> Result<Expr> {
    parse_expr_with_vars(text, &[])
}

/// As [`parse_expr`], but the listed variables are interned first so their
/// ids are fixed regardless of where (or whether) they appear.
pub fn parse_expr_with_vars(text: &str, vars: &[&str]) -> Result<Expr> {
    let mut p = Parser::new(text)?;
    // line breaks carry no meaning inside a single expression
    p.toks.retain(|t| t.tok != Tok::Newline);
    let ast = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.unexpected("an operator or end of input"));
    }
    let mut store = ExprStore::hash_consed();
    for v in vars {
        store.intern_var(v);
    }
    let root = ast.lower(&mut store, &mut |name, _, s| Ok(s.var(name)))?;
    Ok(Expr::new(store, root))
}

pub fn parse_program(text: &str) -> Result<Program> {
    let mut p = Parser::new(text)?;
    p.skip_separators();
    let mut declared = None;
    if p.is_keyword("params") {
        p.bump();
        let mut names = Vec::new();
        if !p.at_separator() && p.peek().tok != Tok::Eof {
            loop {
                let (n, pos) = p.ident()?;
                if names.contains(&n) {
                    return Err(syntax(pos, format!("duplicate parameter `{n}`")));
                }
                names.push(n);
                if !p.is_sym(",") {
                    break;
                }
                p.bump();
            }
        }
        if !p.at_separator() {
            return Err(p.unexpected("end of line"));
        }
        declared = Some(names);
    }
    let body = p.block_body()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.unexpected("a statement"));
    }
    check_returns(&body, p.peek().pos)?;
    let params = check_assignments(&body, declared)?;
    Ok(Program { params, body })
}

fn check_returns(body: &[Stmt], end: Pos) -> Result<()> {
    fn nested(stmts: &[Stmt]) -> bool {
        stmts.iter().any(|s| match s {
            Stmt::Return(_) => true,
            Stmt::If { then, els, .. } => nested(then) || nested(els),
            Stmt::While { body, .. } => nested(body),
            Stmt::Assign { .. } => false,
        })
    }
    let Some((last, rest)) = body.split_last() else {
        return Err(syntax(end, String::from("program has no return statement")));
    };
    let inner = body
        .iter()
        .any(|s| !matches!(s, Stmt::Return(_)) && nested(core::slice::from_ref(s)));
    if inner || rest.iter().any(|s| matches!(s, Stmt::Return(_))) {
        return Err(syntax(
            end,
            String::from("return is only allowed as the last top-level statement"),
        ));
    }
    if !matches!(last, Stmt::Return(_)) {
        return Err(syntax(
            end,
            String::from("program must end with a return statement"),
        ));
    }
    Ok(())
}

/// Definite-assignment analysis. Returns the parameter list.
fn check_assignments(body: &[Stmt], declared: Option<Vec<String>>) -> Result<Vec<String>> {
    struct Ctx {
        explicit: bool,
        params: Vec<String>,
        assigned: BTreeSet<String>,
    }
    impl Ctx {
        fn reads(&mut self, e: &Ast, defined: &BTreeSet<String>) -> Result<()> {
            for (name, pos) in e.names() {
                if defined.contains(name) || self.params.iter().any(|p| p == name) {
                    continue;
                }
                if !self.explicit && !self.assigned.contains(name) {
                    self.params.push(name.to_string());
                    continue;
                }
                return Err(Error::UseBeforeAssign {
                    name: name.to_string(),
                    line: pos.line,
                    column: pos.column,
                });
            }
            Ok(())
        }

        fn stmts(&mut self, stmts: &[Stmt], defined: &mut BTreeSet<String>) -> Result<()> {
            for s in stmts {
                match s {
                    Stmt::Assign { name, expr, .. } => {
                        self.reads(expr, defined)?;
                        if self.params.contains(name) {
                            return Err(Error::AssignToParam(name.clone()));
                        }
                        defined.insert(name.clone());
                    }
                    Stmt::If {
                        cond, then, els, ..
                    } => {
                        self.reads(&cond.lhs, defined)?;
                        self.reads(&cond.rhs, defined)?;
                        let mut a = defined.clone();
                        self.stmts(then, &mut a)?;
                        let mut b = defined.clone();
                        self.stmts(els, &mut b)?;
                        *defined = a.intersection(&b).cloned().collect();
                    }
                    Stmt::While { cond, body, .. } => {
                        self.reads(&cond.lhs, defined)?;
                        self.reads(&cond.rhs, defined)?;
                        let mut inner = defined.clone();
                        self.stmts(body, &mut inner)?;
                    }
                    Stmt::Return(e) => self.reads(e, defined)?,
                }
            }
            Ok(())
        }
    }
    fn collect(stmts: &[Stmt], out: &mut BTreeSet<String>) {
        for s in stmts {
            match s {
                Stmt::Assign { name, .. } => {
                    out.insert(name.clone());
                }
                Stmt::If { then, els, .. } => {
                    collect(then, out);
                    collect(els, out);
                }
                Stmt::While { body, .. } => collect(body, out),
                Stmt::Return(_) => {}
            }
        }
    }
    let mut assigned = BTreeSet::new();
    collect(body, &mut assigned);
    let explicit = declared.is_some();
    if let Some(ps) = &declared {
        if let Some(p) = ps.iter().find(|p| assigned.contains(*p)) {
            return Err(Error::AssignToParam(p.clone()));
        }
    }
    let mut ctx = Ctx {
        explicit,
        params: declared.unwrap_or_default(),
        assigned,
    };
    ctx.stmts(body, &mut BTreeSet::new())?;
    Ok(ctx.params)
}
