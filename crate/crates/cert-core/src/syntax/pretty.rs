//! Pretty-printer, inverse to the parser.
//!
//! The printer emits the minimal parentheses the grammar needs, so
//! `parse(pretty(t)) == t` holds structurally for every term (the round-trip
//! property tests pin this down).  The subtle spots are the bound position of
//! `<-`, whose grammar rule stops at `;` only for application-level terms and
//! `choose`, and integer-valued real literals, which print as `n.0` so they
//! do not re-parse as naturals.

use num::One;

use crate::rational::{fmt_rat, Rat};
use crate::syntax::ast::{CompTerm, ValueTerm};

/// Where a computation is being printed, which decides parenthesization.
#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    /// Statement position: program top level and binder bodies.
    Top,
    /// Bound position of `x <- _ ; u`: must not swallow the `;`.
    BoundPart,
    /// Callee position of an application.
    Callee,
}

/// Render a computation as concrete syntax.
pub fn pretty_comp(t: &CompTerm) -> String {
    let mut out = String::new();
    comp(&mut out, t, Ctx::Top);
    out
}

/// Render a value as concrete syntax.
pub fn pretty_value(v: &ValueTerm) -> String {
    let mut out = String::new();
    value(&mut out, v);
    out
}

fn comp(out: &mut String, t: &CompTerm, ctx: Ctx) {
    use CompTerm::*;
    let needs_parens = match t {
        // Atoms and applications parse the same everywhere.
        Produce(_) | Force(_) | Charge(_) | Uniform | RandNat(_) | PrimOp(..) | App(..) => false,
        // Brace-delimited, so safe in bound position but not as a callee.
        Choose(..) => ctx == Ctx::Callee,
        // Everything that extends rightward must be cut off outside Top.
        Bind(..) | Lam(..) | LetVal(..) | IfZero(..) | Unpair(..) | CaseList(..) | Fix(..) => {
            ctx != Ctx::Top
        }
    };
    if needs_parens {
        out.push('(');
        comp(out, t, Ctx::Top);
        out.push(')');
        return;
    }
    match t {
        Produce(v) => {
            out.push_str("produce ");
            value_atom(out, v);
        }
        Force(v) => {
            out.push_str("force ");
            value_atom(out, v);
        }
        Charge(v) => {
            out.push_str("charge(");
            value(out, v);
            out.push(')');
        }
        Uniform => out.push_str("uniform"),
        RandNat(v) => {
            out.push_str("rand ");
            value_atom(out, v);
        }
        PrimOp(op, args) => {
            out.push_str(op.name());
            out.push('(');
            for (i, v) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                value(out, v);
            }
            out.push(')');
        }
        App(t1, v) => {
            comp(out, t1, Ctx::Callee);
            out.push(' ');
            value_atom(out, v);
        }
        Bind(x, t1, t2) => {
            if x == "_" {
                comp(out, t1, Ctx::BoundPart);
                out.push_str("; ");
            } else {
                out.push_str(x);
                out.push_str(" <- ");
                comp(out, t1, Ctx::BoundPart);
                out.push_str("; ");
            }
            comp(out, t2, Ctx::Top);
        }
        Lam(x, ann, body) => {
            out.push('\\');
            out.push_str(x);
            if let Some(a) = ann {
                out.push_str(&format!(" : {a}"));
            }
            out.push_str(". ");
            comp(out, body, Ctx::Top);
        }
        LetVal(x, v, body) => {
            out.push_str("let ");
            out.push_str(x);
            out.push_str(" = ");
            value(out, v);
            out.push_str(" in ");
            comp(out, body, Ctx::Top);
        }
        IfZero(v, t1, t2) => {
            out.push_str("if0 ");
            value_atom(out, v);
            out.push_str(" then ");
            comp(out, t1, Ctx::Top);
            out.push_str(" else ");
            comp(out, t2, Ctx::Top);
        }
        Unpair(x, y, v, body) => {
            out.push_str("unpair ");
            value_atom(out, v);
            out.push_str(&format!(" as ({x}, {y}) in "));
            comp(out, body, Ctx::Top);
        }
        CaseList(v, nil_branch, h, tl, cons_branch) => {
            out.push_str("case ");
            value_atom(out, v);
            out.push_str(" of nil => ");
            comp(out, nil_branch, Ctx::Top);
            out.push_str(&format!(" | cons {h} {tl} => "));
            comp(out, cons_branch, Ctx::Top);
        }
        Choose(p, t1, t2) => {
            out.push_str("choose ");
            out.push_str(&fmt_rat(p));
            out.push_str(" { ");
            comp(out, t1, Ctx::Top);
            out.push_str(" } { ");
            comp(out, t2, Ctx::Top);
            out.push_str(" }");
        }
        Fix(x, ann, body) => {
            out.push_str("fix ");
            out.push_str(x);
            if let Some(c) = ann {
                out.push_str(&format!(" : {c}"));
            }
            out.push_str(". ");
            comp(out, body, Ctx::Top);
        }
    }
}

fn value(out: &mut String, v: &ValueTerm) {
    if let ValueTerm::CostAdd(a, b) = v {
        // Left-associated chain prints flat.
        value(out, a);
        out.push_str(" + ");
        value_atom(out, b);
        return;
    }
    value_atom(out, v)
}

fn value_atom(out: &mut String, v: &ValueTerm) {
    use ValueTerm::*;
    match v {
        Var(x) => out.push_str(x),
        UnitLit => out.push_str("()"),
        NatLit(n) => out.push_str(&n.to_string()),
        RealLit(q) => out.push_str(&real_literal(q)),
        CostLit(n) => {
            out.push_str("cost ");
            out.push_str(&n.to_string());
        }
        CostAdd(..) => {
            out.push('(');
            value(out, v);
            out.push(')');
        }
        Pair(a, b) => {
            out.push('(');
            value(out, a);
            out.push_str(", ");
            value(out, b);
            out.push(')');
        }
        Thunk(t) => {
            out.push_str("thunk (");
            comp(out, t, Ctx::Top);
            out.push(')');
        }
        Nil(None) => out.push_str("nil"),
        Nil(Some(elem)) => out.push_str(&format!("(nil : list {})", paren_vtype(elem))),
        Cons(h, t) => {
            out.push_str("cons ");
            value_atom(out, h);
            out.push(' ');
            value_atom(out, t);
        }
    }
}

fn paren_vtype(t: &crate::syntax::ast::ValueType) -> String {
    use crate::syntax::ast::ValueType::*;
    match t {
        Prod(..) | List(..) => format!("({t})"),
        _ => t.to_string(),
    }
}

/// Real literals print so they re-parse as reals: integers gain a `.0`.
fn real_literal(q: &Rat) -> String {
    if q.denom().is_one() {
        format!("{}.0", q.numer())
    } else {
        fmt_rat(q)
    }
}
