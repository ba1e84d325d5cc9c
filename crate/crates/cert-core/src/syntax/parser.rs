//! Recursive-descent parser for the concrete syntax.
//!
//! ```text
//! comp  ::= binder "<-" comp1 ";" comp          -- bind
//!         | comp1 (";" comp)?                   -- ";" sequences via the "_" binder
//! comp1 ::= "\" binder (":" vtype)? "." comp
//!         | "let" ident "=" value "in" comp
//!         | "if0" value "then" comp "else" comp
//!         | "unpair" value "as" "(" binder "," binder ")" "in" comp
//!         | "case" value "of" "nil" "=>" comp "|" "cons" binder binder "=>" comp
//!         | "choose" prob "{" comp "}" "{" comp "}"
//!         | "fix" ident (":" ctype)? "." comp
//!         | atom valueAtom*                     -- application
//! atom  ::= "produce" valueAtom | "force" valueAtom | "charge" "(" value ")"
//!         | "uniform" | "rand" valueAtom | opName "(" value,* ")" | "(" comp ")"
//! value ::= valueAtom ("+" valueAtom)*          -- cost addition
//! valueAtom ::= ident | "()" | nat | rational | "cost" nat | "nil"
//!         | "cons" valueAtom valueAtom | "thunk" atom | "[" value,* "]"
//!         | "(" value ")" | "(" value "," value ")" | "(" "nil" ":" vtype ")"
//! ```
//!
//! Binder bodies extend as far right as grammar allows; parenthesize to cut
//! them short.  Alongside the term the parser returns a [`SpanTree`] mirroring
//! the term's shape (children in the order documented in the path module), so
//! the type checker can report source positions without the syntax tree
//! itself carrying spans.

use num::{One, Signed};
use thiserror::Error;

use crate::rational::Rat;
use crate::syntax::ast::{CompTerm, CompType, OpName, ValueTerm, ValueType};
use crate::syntax::lexer::{lex, Token, TokenKind};

/// A source position, 1-based.  `Span::UNKNOWN` marks terms built
/// programmatically rather than parsed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const UNKNOWN: Span = Span { line: 0, col: 0 };
}

/// Source spans arranged in the same shape as the term they were parsed
/// from: the n-th child here covers the n-th child in path order.
#[derive(Clone, Debug)]
pub struct SpanTree {
    pub span: Span,
    pub children: Vec<SpanTree>,
}

impl SpanTree {
    fn new(span: Span, children: Vec<SpanTree>) -> SpanTree {
        SpanTree { span, children }
    }

    fn leaf(span: Span) -> SpanTree {
        SpanTree { span, children: Vec::new() }
    }

    pub fn child(&self, i: usize) -> Option<&SpanTree> {
        self.children.get(i)
    }
}

/// Parse failures, with the position they occurred at.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: unexpected character {ch:?}")]
    BadChar { line: u32, col: u32, ch: char },
    #[error("{line}:{col}: malformed numeric literal")]
    BadNumber { line: u32, col: u32 },
    #[error("{line}:{col}: unexpected {found}, expected {}", join_expected(expected))]
    Unexpected { line: u32, col: u32, found: String, expected: Vec<String> },
    #[error("{line}:{col}: probability {p} lies outside [0, 1]")]
    BadProbability { line: u32, col: u32, p: String },
}

fn join_expected(expected: &[String]) -> String {
    match expected {
        [] => "something else".to_owned(),
        [one] => one.clone(),
        _ => {
            let (last, init) = expected.split_last().unwrap();
            format!("{} or {}", init.join(", "), last)
        }
    }
}

impl ParseError {
    /// Position the error points at.
    pub fn line_col(&self) -> (u32, u32) {
        match self {
            ParseError::BadChar { line, col, .. }
            | ParseError::BadNumber { line, col }
            | ParseError::Unexpected { line, col, .. }
            | ParseError::BadProbability { line, col, .. } => (*line, *col),
        }
    }
}

/// Parse a closed program (a computation).
pub fn parse(src: &str) -> Result<CompTerm, ParseError> {
    parse_with_spans(src).map(|(t, _)| t)
}

/// Parse a computation together with its span tree.
pub fn parse_with_spans(src: &str) -> Result<(CompTerm, SpanTree), ParseError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let (t, spans) = p.comp()?;
    p.expect_eof()?;
    Ok((t, spans))
}

/// Parse a standalone value (used for reward tables and CLI arguments).
pub fn parse_value(src: &str) -> Result<ValueTerm, ParseError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let (v, _) = p.value()?;
    p.expect_eof()?;
    Ok(v)
}

/// Parse a standalone value type (used for ascriptions in tooling).
pub fn parse_value_type(src: &str) -> Result<ValueType, ParseError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let ty = p.vtype()?;
    p.expect_eof()?;
    Ok(ty)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn tok(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn kind(&self) -> &TokenKind {
        &self.tok().kind
    }

    fn kind_at(&self, offset: usize) -> &TokenKind {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)].kind
    }

    fn span(&self) -> Span {
        let t = self.tok();
        Span { line: t.line, col: t.col }
    }

    fn bump(&mut self) -> Token {
        let t = self.tok().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let t = self.tok();
        Err(ParseError::Unexpected {
            line: t.line,
            col: t.col,
            found: t.kind.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expect(&mut self, kind: &TokenKind, expected: &str) -> Result<Token, ParseError> {
        if self.kind() == kind {
            Ok(self.bump())
        } else {
            self.unexpected(&[expected])
        }
    }

    fn expect_keyword(&mut self, kw: &'static str) -> Result<Token, ParseError> {
        self.expect(&TokenKind::Keyword(kw), &format!("`{kw}`"))
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if matches!(self.kind(), TokenKind::Eof) {
            Ok(())
        } else {
            self.unexpected(&["end of input"])
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.kind() {
            TokenKind::Ident(name) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            _ => self.unexpected(&[what]),
        }
    }

    /// A binder position: an identifier or the throwaway `_`.
    fn binder(&mut self) -> Result<String, ParseError> {
        match self.kind() {
            TokenKind::Underscore => {
                self.bump();
                Ok("_".to_owned())
            }
            _ => self.ident("a binder"),
        }
    }

    // -- computations -----------------------------------------------------

    fn comp(&mut self) -> Result<(CompTerm, SpanTree), ParseError> {
        let span = self.span();
        let is_bind_head = matches!(self.kind(), TokenKind::Ident(_) | TokenKind::Underscore)
            && matches!(self.kind_at(1), TokenKind::BindArrow);
        if is_bind_head {
            let x = self.binder()?;
            self.bump(); // <-
            let (t, t_spans) = self.comp1()?;
            self.expect(&TokenKind::Semi, "`;`")?;
            let (u, u_spans) = self.comp()?;
            let term = CompTerm::Bind(x, Box::new(t), Box::new(u));
            return Ok((term, SpanTree::new(span, vec![t_spans, u_spans])));
        }
        let (t, t_spans) = self.comp1()?;
        if matches!(self.kind(), TokenKind::Semi) {
            self.bump();
            let (u, u_spans) = self.comp()?;
            let term = CompTerm::Bind("_".to_owned(), Box::new(t), Box::new(u));
            return Ok((term, SpanTree::new(span, vec![t_spans, u_spans])));
        }
        Ok((t, t_spans))
    }

    fn comp1(&mut self) -> Result<(CompTerm, SpanTree), ParseError> {
        let span = self.span();
        match self.kind() {
            TokenKind::Backslash => {
                self.bump();
                let x = self.binder()?;
                let ann = if matches!(self.kind(), TokenKind::Colon) {
                    self.bump();
                    Some(self.vtype()?)
                } else {
                    None
                };
                self.expect(&TokenKind::Dot, "`.`")?;
                let (body, body_spans) = self.comp()?;
                Ok((
                    CompTerm::Lam(x, ann, Box::new(body)),
                    SpanTree::new(span, vec![body_spans]),
                ))
            }
            TokenKind::Keyword("let") => {
                self.bump();
                let x = self.binder()?;
                self.expect(&TokenKind::Eq, "`=`")?;
                let (v, v_spans) = self.value()?;
                self.expect_keyword("in")?;
                let (body, body_spans) = self.comp()?;
                Ok((
                    CompTerm::LetVal(x, v, Box::new(body)),
                    SpanTree::new(span, vec![v_spans, body_spans]),
                ))
            }
            TokenKind::Keyword("if0") => {
                self.bump();
                let (v, v_spans) = self.value()?;
                self.expect_keyword("then")?;
                let (t, t_spans) = self.comp()?;
                self.expect_keyword("else")?;
                let (u, u_spans) = self.comp()?;
                Ok((
                    CompTerm::IfZero(v, Box::new(t), Box::new(u)),
                    SpanTree::new(span, vec![v_spans, t_spans, u_spans]),
                ))
            }
            TokenKind::Keyword("unpair") => {
                self.bump();
                let (v, v_spans) = self.value()?;
                self.expect_keyword("as")?;
                self.expect(&TokenKind::LParen, "`(`")?;
                let x = self.binder()?;
                self.expect(&TokenKind::Comma, "`,`")?;
                let y = self.binder()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                self.expect_keyword("in")?;
                let (body, body_spans) = self.comp()?;
                Ok((
                    CompTerm::Unpair(x, y, v, Box::new(body)),
                    SpanTree::new(span, vec![v_spans, body_spans]),
                ))
            }
            TokenKind::Keyword("case") => {
                self.bump();
                let (v, v_spans) = self.value()?;
                self.expect_keyword("of")?;
                self.expect_keyword("nil")?;
                self.expect(&TokenKind::FatArrow, "`=>`")?;
                let (nil_branch, nil_spans) = self.comp()?;
                self.expect(&TokenKind::Bar, "`|`")?;
                self.expect_keyword("cons")?;
                let h = self.binder()?;
                let tl = self.binder()?;
                self.expect(&TokenKind::FatArrow, "`=>`")?;
                let (cons_branch, cons_spans) = self.comp()?;
                Ok((
                    CompTerm::CaseList(v, Box::new(nil_branch), h, tl, Box::new(cons_branch)),
                    SpanTree::new(span, vec![v_spans, nil_spans, cons_spans]),
                ))
            }
            TokenKind::Keyword("choose") => {
                self.bump();
                let p = self.probability()?;
                self.expect(&TokenKind::LBrace, "`{`")?;
                let (t, t_spans) = self.comp()?;
                self.expect(&TokenKind::RBrace, "`}`")?;
                self.expect(&TokenKind::LBrace, "`{`")?;
                let (u, u_spans) = self.comp()?;
                self.expect(&TokenKind::RBrace, "`}`")?;
                Ok((
                    CompTerm::Choose(p, Box::new(t), Box::new(u)),
                    SpanTree::new(span, vec![t_spans, u_spans]),
                ))
            }
            TokenKind::Keyword("fix") => {
                self.bump();
                let x = self.ident("a recursion variable")?;
                let ann = if matches!(self.kind(), TokenKind::Colon) {
                    self.bump();
                    Some(self.ctype()?)
                } else {
                    None
                };
                self.expect(&TokenKind::Dot, "`.`")?;
                let (body, body_spans) = self.comp()?;
                Ok((
                    CompTerm::Fix(x, ann, Box::new(body)),
                    SpanTree::new(span, vec![body_spans]),
                ))
            }
            _ => self.application(),
        }
    }

    fn application(&mut self) -> Result<(CompTerm, SpanTree), ParseError> {
        let span = self.span();
        let (mut t, mut spans) = self.comp_atom()?;
        while self.starts_value_atom() {
            let (v, v_spans) = self.value_atom()?;
            t = CompTerm::App(Box::new(t), v);
            spans = SpanTree::new(span, vec![spans, v_spans]);
        }
        Ok((t, spans))
    }

    fn starts_value_atom(&self) -> bool {
        matches!(
            self.kind(),
            TokenKind::Ident(_)
                | TokenKind::Nat(_)
                | TokenKind::Rational(_)
                | TokenKind::LParen
                | TokenKind::LBracket
                | TokenKind::Keyword("nil")
                | TokenKind::Keyword("cons")
                | TokenKind::Keyword("thunk")
                | TokenKind::Keyword("cost")
        )
    }

    fn comp_atom(&mut self) -> Result<(CompTerm, SpanTree), ParseError> {
        let span = self.span();
        match self.kind().clone() {
            TokenKind::Keyword("produce") => {
                self.bump();
                let (v, v_spans) = self.value_atom()?;
                Ok((CompTerm::Produce(v), SpanTree::new(span, vec![v_spans])))
            }
            TokenKind::Keyword("force") => {
                self.bump();
                let (v, v_spans) = self.value_atom()?;
                Ok((CompTerm::Force(v), SpanTree::new(span, vec![v_spans])))
            }
            TokenKind::Keyword("charge") => {
                self.bump();
                self.expect(&TokenKind::LParen, "`(`")?;
                let (v, v_spans) = self.value()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok((CompTerm::Charge(v), SpanTree::new(span, vec![v_spans])))
            }
            TokenKind::Keyword("uniform") => {
                self.bump();
                Ok((CompTerm::Uniform, SpanTree::leaf(span)))
            }
            TokenKind::Keyword("rand") => {
                self.bump();
                let (v, v_spans) = self.value_atom()?;
                Ok((CompTerm::RandNat(v), SpanTree::new(span, vec![v_spans])))
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.comp()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                let Some(op) = OpName::from_name(&name) else {
                    return self.unexpected(&[
                        "a computation (did you mean `force` on this variable, or a built-in operator?)",
                    ]);
                };
                self.bump();
                self.expect(&TokenKind::LParen, "`(`")?;
                let mut args = Vec::new();
                let mut arg_spans = Vec::new();
                loop {
                    let (v, v_spans) = self.value()?;
                    args.push(v);
                    arg_spans.push(v_spans);
                    if matches!(self.kind(), TokenKind::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok((CompTerm::PrimOp(op, args), SpanTree::new(span, arg_spans)))
            }
            _ => self.unexpected(&["a computation"]),
        }
    }

    fn probability(&mut self) -> Result<Rat, ParseError> {
        let t = self.tok().clone();
        let p = match &t.kind {
            TokenKind::Nat(n) => {
                self.bump();
                Rat::from_integer((*n).into())
            }
            TokenKind::Rational(q) => {
                let q = q.clone();
                self.bump();
                q
            }
            _ => return self.unexpected(&["a probability"]),
        };
        if p.is_negative() || p > Rat::one() {
            return Err(ParseError::BadProbability {
                line: t.line,
                col: t.col,
                p: crate::rational::fmt_rat(&p),
            });
        }
        Ok(p)
    }

    // -- values -----------------------------------------------------------

    fn value(&mut self) -> Result<(ValueTerm, SpanTree), ParseError> {
        let span = self.span();
        let (mut v, mut spans) = self.value_atom()?;
        while matches!(self.kind(), TokenKind::Plus) {
            self.bump();
            let (w, w_spans) = self.value_atom()?;
            v = ValueTerm::CostAdd(Box::new(v), Box::new(w));
            spans = SpanTree::new(span, vec![spans, w_spans]);
        }
        Ok((v, spans))
    }

    fn value_atom(&mut self) -> Result<(ValueTerm, SpanTree), ParseError> {
        let span = self.span();
        match self.kind().clone() {
            TokenKind::Ident(name) => {
                self.bump();
                Ok((ValueTerm::Var(name), SpanTree::leaf(span)))
            }
            TokenKind::Nat(n) => {
                self.bump();
                Ok((ValueTerm::NatLit(n), SpanTree::leaf(span)))
            }
            TokenKind::Rational(q) => {
                self.bump();
                Ok((ValueTerm::RealLit(q), SpanTree::leaf(span)))
            }
            TokenKind::Keyword("cost") => {
                self.bump();
                match *self.kind() {
                    TokenKind::Nat(n) => {
                        self.bump();
                        Ok((ValueTerm::CostLit(n), SpanTree::leaf(span)))
                    }
                    _ => self.unexpected(&["a natural number after `cost`"]),
                }
            }
            TokenKind::Keyword("nil") => {
                self.bump();
                Ok((ValueTerm::Nil(None), SpanTree::leaf(span)))
            }
            TokenKind::Keyword("cons") => {
                self.bump();
                let (h, h_spans) = self.value_atom()?;
                let (t, t_spans) = self.value_atom()?;
                Ok((
                    ValueTerm::Cons(Box::new(h), Box::new(t)),
                    SpanTree::new(span, vec![h_spans, t_spans]),
                ))
            }
            TokenKind::Keyword("thunk") => {
                self.bump();
                let (t, t_spans) = self.comp_atom()?;
                Ok((
                    ValueTerm::Thunk(std::rc::Rc::new(t)),
                    SpanTree::new(span, vec![t_spans]),
                ))
            }
            TokenKind::LBracket => {
                self.bump();
                let mut elems = Vec::new();
                if !matches!(self.kind(), TokenKind::RBracket) {
                    loop {
                        elems.push(self.value()?);
                        if matches!(self.kind(), TokenKind::Comma) {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(&TokenKind::RBracket, "`]`")?;
                // Desugar to a cons chain ending in an uninscribed nil; the
                // element type is inferred from the heads.
                let mut v = ValueTerm::Nil(None);
                let mut spans = SpanTree::leaf(span);
                for (elem, elem_spans) in elems.into_iter().rev() {
                    v = ValueTerm::Cons(Box::new(elem), Box::new(v));
                    spans = SpanTree::new(span, vec![elem_spans, spans]);
                }
                Ok((v, spans))
            }
            TokenKind::LParen => {
                self.bump();
                if matches!(self.kind(), TokenKind::RParen) {
                    self.bump();
                    return Ok((ValueTerm::UnitLit, SpanTree::leaf(span)));
                }
                // `(nil : list a)` — the one place an ascription is allowed.
                if matches!(self.kind(), TokenKind::Keyword("nil"))
                    && matches!(self.kind_at(1), TokenKind::Colon)
                {
                    let nil_span = self.span();
                    self.bump();
                    self.bump();
                    let ascription_start = self.span();
                    let ty = self.vtype()?;
                    let ValueType::List(elem) = ty else {
                        return Err(ParseError::Unexpected {
                            line: ascription_start.line,
                            col: ascription_start.col,
                            found: format!("type `{ty}`"),
                            expected: vec!["a list type".to_owned()],
                        });
                    };
                    self.expect(&TokenKind::RParen, "`)`")?;
                    return Ok((ValueTerm::Nil(Some(*elem)), SpanTree::leaf(nil_span)));
                }
                let (v, v_spans) = self.value()?;
                if matches!(self.kind(), TokenKind::Comma) {
                    self.bump();
                    let (w, w_spans) = self.value()?;
                    self.expect(&TokenKind::RParen, "`)`")?;
                    return Ok((
                        ValueTerm::Pair(Box::new(v), Box::new(w)),
                        SpanTree::new(span, vec![v_spans, w_spans]),
                    ));
                }
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok((v, v_spans))
            }
            _ => self.unexpected(&["a value"]),
        }
    }

    // -- types ------------------------------------------------------------

    fn vtype(&mut self) -> Result<ValueType, ParseError> {
        let head = self.vtype_app()?;
        if matches!(self.kind(), TokenKind::Star) {
            self.bump();
            let rest = self.vtype()?;
            return Ok(ValueType::Prod(Box::new(head), Box::new(rest)));
        }
        Ok(head)
    }

    fn vtype_app(&mut self) -> Result<ValueType, ParseError> {
        match self.kind().clone() {
            TokenKind::Ident(name) if name == "list" => {
                self.bump();
                let elem = self.vtype_app()?;
                Ok(ValueType::List(Box::new(elem)))
            }
            TokenKind::Ident(name) if name == "U" => {
                self.bump();
                let c = self.ctype_atom()?;
                Ok(ValueType::Thunked(Box::new(c)))
            }
            _ => self.vtype_atom(),
        }
    }

    fn vtype_atom(&mut self) -> Result<ValueType, ParseError> {
        match self.kind().clone() {
            TokenKind::Ident(name) => {
                let ty = match name.as_str() {
                    "Nat" => ValueType::Nat,
                    "Real" => ValueType::Real,
                    "Unit" => ValueType::Unit,
                    "Cost" => ValueType::Cost,
                    _ => return self.unexpected(&["a value type"]),
                };
                self.bump();
                Ok(ty)
            }
            TokenKind::LParen => {
                self.bump();
                let ty = self.vtype()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(ty)
            }
            _ => self.unexpected(&["a value type"]),
        }
    }

    fn ctype(&mut self) -> Result<CompType, ParseError> {
        if let TokenKind::Ident(name) = self.kind() {
            if name == "F" {
                self.bump();
                let a = self.vtype_app()?;
                return Ok(CompType::F(Box::new(a)));
            }
        }
        // Either `vtype -> ctype` or a parenthesized ctype; try the arrow
        // first and backtrack.
        let save = self.pos;
        if let Ok(dom) = self.vtype() {
            if matches!(self.kind(), TokenKind::Arrow) {
                self.bump();
                let cod = self.ctype()?;
                return Ok(CompType::Arrow(Box::new(dom), Box::new(cod)));
            }
        }
        self.pos = save;
        let inner = {
            self.expect(&TokenKind::LParen, "a computation type")?;
            let c = self.ctype()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            c
        };
        if matches!(self.kind(), TokenKind::Arrow) {
            // `(...) -> c` would need the parenthesized part to be a value
            // type, which the backtracking branch above already rejected.
            return self.unexpected(&["`.` (arrow domains must be value types)"]);
        }
        Ok(inner)
    }

    fn ctype_atom(&mut self) -> Result<CompType, ParseError> {
        if let TokenKind::Ident(name) = self.kind() {
            if name == "F" {
                self.bump();
                let a = self.vtype_app()?;
                return Ok(CompType::F(Box::new(a)));
            }
        }
        self.expect(&TokenKind::LParen, "a computation type")?;
        let c = self.ctype()?;
        self.expect(&TokenKind::RParen, "`)`")?;
        Ok(c)
    }
}
