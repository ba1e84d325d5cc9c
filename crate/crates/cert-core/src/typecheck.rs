//! Bidirectional type checker.
//!
//! Synthesis covers most of the language; checking mode exists so that
//! lambdas and `fix` pick up their types from an enclosing ascription (a
//! `fix f : c.` annotation, or the expected type pushed into branches and
//! thunk arguments).  A `fix` or bare lambda with no type information in
//! scope is a [`TypeErrorKind::MissingAnnotation`].
//!
//! `charge` accepts either `Cost` or `Nat`: costs are counted in naturals,
//! and programs overwhelmingly charge quantities they just computed as
//! naturals.

use std::fmt;

use num::{One, Signed};
use thiserror::Error;

use crate::rational::fmt_rat;
use crate::syntax::ast::{CompTerm, CompType, OpName, ValueTerm, ValueType};
use crate::syntax::parser::{Span, SpanTree};

/// A typing context: name/type pairs, innermost last.
pub type Context = Vec<(String, ValueType)>;

/// A type error together with the source position it points at
/// (`Span::UNKNOWN` for programmatically built terms).
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{kind}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypeErrorKind {
    UnboundVariable { name: String },
    ValueMismatch { expected: ValueType, found: ValueType },
    CompMismatch { expected: CompType, found: CompType },
    /// Application head is not an arrow.
    NotAFunction { found: CompType },
    /// `force` applied to a non-thunk.
    NotAThunk { found: ValueType },
    /// `unpair` scrutinee is not a pair.
    NotAPair { found: ValueType },
    /// `case` scrutinee is not a list.
    NotAList { found: ValueType },
    /// `<-` binds a computation that is not of `F` type.
    NotAReturner { found: CompType },
    /// A bare `nil` met an expected type that is not a list.
    NilNeedsListType { expected: ValueType },
    /// `fix`, a lambda, or `nil` in a position where no type can be inferred.
    MissingAnnotation { construct: &'static str },
    /// A `choose` weight outside `[0, 1]` (possible only in built terms; the
    /// parser validates literals).
    ProbabilityRange { p: String },
    /// Operator applied to the wrong number of arguments.
    WrongArity { op: OpName, expected: usize, found: usize },
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TypeErrorKind::*;
        match self {
            UnboundVariable { name } => write!(f, "unbound variable: expected a name in scope, found `{name}`"),
            ValueMismatch { expected, found } => {
                write!(f, "type mismatch: expected {expected}, found {found}")
            }
            CompMismatch { expected, found } => {
                write!(f, "type mismatch: expected {expected}, found {found}")
            }
            NotAFunction { found } => {
                write!(f, "not a function: expected an arrow type, found {found}")
            }
            NotAThunk { found } => write!(f, "not a thunk: expected U (...), found {found}"),
            NotAPair { found } => write!(f, "not a pair: expected a product type, found {found}"),
            NotAList { found } => write!(f, "not a list: expected a list type, found {found}"),
            NotAReturner { found } => {
                write!(f, "not a returner: expected F (...) on the left of `<-`, found {found}")
            }
            NilNeedsListType { expected } => {
                write!(f, "type mismatch: expected {expected}, found nil (a list)")
            }
            MissingAnnotation { construct } => {
                write!(f, "missing annotation: cannot infer the type of this {construct}")
            }
            ProbabilityRange { p } => {
                write!(f, "probability out of range: expected a weight in [0, 1], found {p}")
            }
            WrongArity { op, expected, found } => {
                write!(f, "operator arity: `{op}` takes {expected} argument(s), found {found}")
            }
        }
    }
}

fn err<T>(kind: TypeErrorKind, spans: Option<&SpanTree>) -> Result<T, TypeError> {
    Err(TypeError {
        kind,
        span: spans.map(|s| s.span).unwrap_or(Span::UNKNOWN),
    })
}

fn child<'s>(spans: Option<&'s SpanTree>, i: usize) -> Option<&'s SpanTree> {
    spans.and_then(|s| s.child(i))
}

/// Check a closed program, synthesizing its type.
pub fn check_program(t: &CompTerm) -> Result<CompType, TypeError> {
    synth_comp(&mut Context::new(), t, None)
}

/// Check a closed program with the span tree the parser produced, so errors
/// carry source positions.
pub fn check_program_spanned(t: &CompTerm, spans: &SpanTree) -> Result<CompType, TypeError> {
    synth_comp(&mut Context::new(), t, Some(spans))
}

/// Synthesize the type of a computation in a context.
pub fn check_comp(ctx: &Context, t: &CompTerm) -> Result<CompType, TypeError> {
    synth_comp(&mut ctx.clone(), t, None)
}

/// Synthesize the type of a value in a context.
pub fn check_value(ctx: &Context, v: &ValueTerm) -> Result<ValueType, TypeError> {
    synth_value(&mut ctx.clone(), v, None)
}

/// Check a computation against an expected type in a context.
pub fn check_comp_against(
    ctx: &Context,
    t: &CompTerm,
    expected: &CompType,
) -> Result<(), TypeError> {
    ck_comp(&mut ctx.clone(), t, expected, None)
}

fn lookup(ctx: &Context, name: &str) -> Option<ValueType> {
    ctx.iter().rev().find(|(n, _)| n == name).map(|(_, ty)| ty.clone())
}

fn with_binding<R>(
    ctx: &mut Context,
    name: &str,
    ty: ValueType,
    f: impl FnOnce(&mut Context) -> R,
) -> R {
    ctx.push((name.to_owned(), ty));
    let r = f(ctx);
    ctx.pop();
    r
}

fn synth_comp(
    ctx: &mut Context,
    t: &CompTerm,
    spans: Option<&SpanTree>,
) -> Result<CompType, TypeError> {
    use CompTerm::*;
    match t {
        Produce(v) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            Ok(CompType::F(Box::new(a)))
        }
        Bind(x, t1, t2) => {
            let a = bind_source(ctx, t1, child(spans, 0))?;
            with_binding(ctx, x, a, |ctx| synth_comp(ctx, t2, child(spans, 1)))
        }
        Lam(x, Some(a), body) => {
            let c = with_binding(ctx, x, a.clone(), |ctx| {
                synth_comp(ctx, body, child(spans, 0))
            })?;
            Ok(CompType::Arrow(Box::new(a.clone()), Box::new(c)))
        }
        Lam(_, None, _) => err(TypeErrorKind::MissingAnnotation { construct: "lambda" }, spans),
        App(t1, v) => {
            let c = synth_comp(ctx, t1, child(spans, 0))?;
            match c {
                CompType::Arrow(a, c) => {
                    ck_value(ctx, v, &a, child(spans, 1))?;
                    Ok(*c)
                }
                found => err(TypeErrorKind::NotAFunction { found }, child(spans, 0)),
            }
        }
        Force(v) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            match a {
                ValueType::Thunked(c) => Ok(*c),
                found => err(TypeErrorKind::NotAThunk { found }, child(spans, 0)),
            }
        }
        LetVal(x, v, body) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            with_binding(ctx, x, a, |ctx| synth_comp(ctx, body, child(spans, 1)))
        }
        IfZero(v, t1, t2) => {
            ck_value(ctx, v, &ValueType::Nat, child(spans, 0))?;
            let c = synth_comp(ctx, t1, child(spans, 1))?;
            ck_comp(ctx, t2, &c, child(spans, 2))?;
            Ok(c)
        }
        Unpair(x, y, v, body) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            let ValueType::Prod(a1, a2) = a else {
                return err(TypeErrorKind::NotAPair { found: a }, child(spans, 0));
            };
            with_binding(ctx, x, *a1, |ctx| {
                with_binding(ctx, y, *a2, |ctx| synth_comp(ctx, body, child(spans, 1)))
            })
        }
        CaseList(v, nil_branch, h, tl, cons_branch) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            let ValueType::List(elem) = a else {
                return err(TypeErrorKind::NotAList { found: a }, child(spans, 0));
            };
            let c = synth_comp(ctx, nil_branch, child(spans, 1))?;
            with_binding(ctx, h, (*elem).clone(), |ctx| {
                with_binding(ctx, tl, ValueType::List(elem.clone()), |ctx| {
                    ck_comp(ctx, cons_branch, &c, child(spans, 2))
                })
            })?;
            Ok(c)
        }
        Charge(v) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            if a != ValueType::Cost && a != ValueType::Nat {
                return err(
                    TypeErrorKind::ValueMismatch { expected: ValueType::Cost, found: a },
                    child(spans, 0),
                );
            }
            Ok(CompType::F(Box::new(ValueType::Unit)))
        }
        Uniform => Ok(CompType::F(Box::new(ValueType::Real))),
        RandNat(v) => {
            ck_value(ctx, v, &ValueType::Nat, child(spans, 0))?;
            Ok(CompType::F(Box::new(ValueType::Nat)))
        }
        Choose(p, t1, t2) => {
            if p.is_negative() || *p > num::BigRational::one() {
                return err(TypeErrorKind::ProbabilityRange { p: fmt_rat(p) }, spans);
            }
            let c = synth_comp(ctx, t1, child(spans, 0))?;
            ck_comp(ctx, t2, &c, child(spans, 1))?;
            Ok(c)
        }
        Fix(x, Some(c), body) => {
            with_binding(ctx, x, ValueType::Thunked(Box::new(c.clone())), |ctx| {
                ck_comp(ctx, body, c, child(spans, 0))
            })?;
            Ok(c.clone())
        }
        Fix(_, None, _) => err(TypeErrorKind::MissingAnnotation { construct: "fix" }, spans),
        PrimOp(op, args) => {
            let sig = op.arg_types();
            if sig.len() != args.len() {
                return err(
                    TypeErrorKind::WrongArity { op: *op, expected: sig.len(), found: args.len() },
                    spans,
                );
            }
            for (i, (arg, want)) in args.iter().zip(sig).enumerate() {
                ck_value(ctx, arg, want, child(spans, i))?;
            }
            Ok(CompType::F(Box::new(op.result_type())))
        }
    }
}

fn bind_source(
    ctx: &mut Context,
    t: &CompTerm,
    spans: Option<&SpanTree>,
) -> Result<ValueType, TypeError> {
    match synth_comp(ctx, t, spans)? {
        CompType::F(a) => Ok(*a),
        found => err(TypeErrorKind::NotAReturner { found }, spans),
    }
}

fn ck_comp(
    ctx: &mut Context,
    t: &CompTerm,
    expected: &CompType,
    spans: Option<&SpanTree>,
) -> Result<(), TypeError> {
    use CompTerm::*;
    match (t, expected) {
        (Lam(x, ann, body), CompType::Arrow(a, c)) => {
            if let Some(ann) = ann {
                if ann != a.as_ref() {
                    return err(
                        TypeErrorKind::ValueMismatch {
                            expected: (**a).clone(),
                            found: ann.clone(),
                        },
                        spans,
                    );
                }
            }
            with_binding(ctx, x, (**a).clone(), |ctx| {
                ck_comp(ctx, body, c, child(spans, 0))
            })
        }
        (Fix(x, ann, body), _) => {
            if let Some(ann) = ann {
                if ann != expected {
                    return err(
                        TypeErrorKind::CompMismatch {
                            expected: expected.clone(),
                            found: ann.clone(),
                        },
                        spans,
                    );
                }
            }
            with_binding(
                ctx,
                x,
                ValueType::Thunked(Box::new(expected.clone())),
                |ctx| ck_comp(ctx, body, expected, child(spans, 0)),
            )
        }
        (Bind(x, t1, t2), _) => {
            let a = bind_source(ctx, t1, child(spans, 0))?;
            with_binding(ctx, x, a, |ctx| ck_comp(ctx, t2, expected, child(spans, 1)))
        }
        (LetVal(x, v, body), _) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            with_binding(ctx, x, a, |ctx| ck_comp(ctx, body, expected, child(spans, 1)))
        }
        (IfZero(v, t1, t2), _) => {
            ck_value(ctx, v, &ValueType::Nat, child(spans, 0))?;
            ck_comp(ctx, t1, expected, child(spans, 1))?;
            ck_comp(ctx, t2, expected, child(spans, 2))
        }
        (Unpair(x, y, v, body), _) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            let ValueType::Prod(a1, a2) = a else {
                return err(TypeErrorKind::NotAPair { found: a }, child(spans, 0));
            };
            with_binding(ctx, x, *a1, |ctx| {
                with_binding(ctx, y, *a2, |ctx| {
                    ck_comp(ctx, body, expected, child(spans, 1))
                })
            })
        }
        (CaseList(v, nil_branch, h, tl, cons_branch), _) => {
            let a = synth_value(ctx, v, child(spans, 0))?;
            let ValueType::List(elem) = a else {
                return err(TypeErrorKind::NotAList { found: a }, child(spans, 0));
            };
            ck_comp(ctx, nil_branch, expected, child(spans, 1))?;
            with_binding(ctx, h, (*elem).clone(), |ctx| {
                with_binding(ctx, tl, ValueType::List(elem.clone()), |ctx| {
                    ck_comp(ctx, cons_branch, expected, child(spans, 2))
                })
            })
        }
        (Choose(p, t1, t2), _) => {
            if p.is_negative() || *p > num::BigRational::one() {
                return err(TypeErrorKind::ProbabilityRange { p: fmt_rat(p) }, spans);
            }
            ck_comp(ctx, t1, expected, child(spans, 0))?;
            ck_comp(ctx, t2, expected, child(spans, 1))
        }
        _ => {
            let found = synth_comp(ctx, t, spans)?;
            if &found == expected {
                Ok(())
            } else {
                err(
                    TypeErrorKind::CompMismatch { expected: expected.clone(), found },
                    spans,
                )
            }
        }
    }
}

fn synth_value(
    ctx: &mut Context,
    v: &ValueTerm,
    spans: Option<&SpanTree>,
) -> Result<ValueType, TypeError> {
    use ValueTerm::*;
    match v {
        Var(name) => match lookup(ctx, name) {
            Some(ty) => Ok(ty),
            None => err(TypeErrorKind::UnboundVariable { name: name.clone() }, spans),
        },
        UnitLit => Ok(ValueType::Unit),
        NatLit(_) => Ok(ValueType::Nat),
        RealLit(_) => Ok(ValueType::Real),
        CostLit(_) => Ok(ValueType::Cost),
        CostAdd(a, b) => {
            ck_value(ctx, a, &ValueType::Cost, child(spans, 0))?;
            ck_value(ctx, b, &ValueType::Cost, child(spans, 1))?;
            Ok(ValueType::Cost)
        }
        Pair(a, b) => {
            let ta = synth_value(ctx, a, child(spans, 0))?;
            let tb = synth_value(ctx, b, child(spans, 1))?;
            Ok(ValueType::Prod(Box::new(ta), Box::new(tb)))
        }
        Thunk(t) => {
            let c = synth_comp(ctx, t, child(spans, 0))?;
            Ok(ValueType::Thunked(Box::new(c)))
        }
        Nil(Some(elem)) => Ok(ValueType::List(Box::new(elem.clone()))),
        Nil(None) => err(TypeErrorKind::MissingAnnotation { construct: "nil" }, spans),
        Cons(h, tl) => {
            let elem = synth_value(ctx, h, child(spans, 0))?;
            let list = ValueType::List(Box::new(elem));
            ck_value(ctx, tl, &list, child(spans, 1))?;
            Ok(list)
        }
    }
}

fn ck_value(
    ctx: &mut Context,
    v: &ValueTerm,
    expected: &ValueType,
    spans: Option<&SpanTree>,
) -> Result<(), TypeError> {
    use ValueTerm::*;
    match (v, expected) {
        (Nil(None), ValueType::List(_)) => Ok(()),
        (Nil(None), _) => err(
            TypeErrorKind::NilNeedsListType { expected: expected.clone() },
            spans,
        ),
        (Cons(h, tl), ValueType::List(elem)) => {
            ck_value(ctx, h, elem, child(spans, 0))?;
            ck_value(ctx, tl, expected, child(spans, 1))
        }
        (Pair(a, b), ValueType::Prod(ta, tb)) => {
            ck_value(ctx, a, ta, child(spans, 0))?;
            ck_value(ctx, b, tb, child(spans, 1))
        }
        (Thunk(t), ValueType::Thunked(c)) => ck_comp(ctx, t, c, child(spans, 0)),
        _ => {
            let found = synth_value(ctx, v, spans)?;
            if &found == expected {
                Ok(())
            } else {
                err(
                    TypeErrorKind::ValueMismatch { expected: expected.clone(), found },
                    spans,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse, parse_with_spans};

    fn check_src(src: &str) -> Result<CompType, TypeError> {
        let (t, spans) = parse_with_spans(src).expect("parse");
        check_program_spanned(&t, &spans)
    }

    #[test]
    fn literals_and_produce() {
        assert_eq!(check_src("produce 3").unwrap().to_string(), "F Nat");
        assert_eq!(check_src("produce ()").unwrap().to_string(), "F Unit");
        assert_eq!(check_src("produce 1/2").unwrap().to_string(), "F Real");
        assert_eq!(check_src("produce (1, ())").unwrap().to_string(), "F (Nat * Unit)");
    }

    #[test]
    fn charge_accepts_nat_and_cost() {
        assert_eq!(check_src("charge(3)").unwrap().to_string(), "F Unit");
        assert_eq!(check_src("charge(cost 3)").unwrap().to_string(), "F Unit");
        assert!(check_src("charge(1/2)").is_err());
    }

    #[test]
    fn fix_ascription_types_recursion() {
        let src = "fix f : Nat -> F Nat. \\n. if0 n then produce 1 else \
                   m <- pred(n); r <- force f m; mul(n, r)";
        assert_eq!(check_src(src).unwrap().to_string(), "Nat -> F Nat");
    }

    #[test]
    fn unannotated_fix_fails_in_synthesis_position() {
        let e = check_src("fix f. force f").unwrap_err();
        assert!(matches!(e.kind, TypeErrorKind::MissingAnnotation { construct: "fix" }));
    }

    #[test]
    fn application_of_non_function_reports_position() {
        let e = check_src("(produce 0) 1").unwrap_err();
        assert!(matches!(e.kind, TypeErrorKind::NotAFunction { .. }));
        assert_eq!((e.span.line, e.span.col), (1, 2));
    }

    #[test]
    fn nil_infers_from_cons_or_needs_ascription() {
        assert_eq!(check_src("produce cons 1 nil").unwrap().to_string(), "F (list Nat)");
        assert_eq!(check_src("produce [1, 2, 3]").unwrap().to_string(), "F (list Nat)");
        assert_eq!(
            check_src("produce (nil : list Real)").unwrap().to_string(),
            "F (list Real)"
        );
        assert!(matches!(
            check_src("produce nil").unwrap_err().kind,
            TypeErrorKind::MissingAnnotation { construct: "nil" }
        ));
    }

    #[test]
    fn uniform_and_rand_have_their_types() {
        assert_eq!(check_src("uniform").unwrap().to_string(), "F Real");
        assert_eq!(check_src("rand 6").unwrap().to_string(), "F Nat");
        assert!(check_src("rand 1/2").is_err());
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = check_src("produce x").unwrap_err();
        assert!(matches!(e.kind, TypeErrorKind::UnboundVariable { .. }));
    }

    #[test]
    fn shadowing_uses_innermost_binding() {
        let src = "x <- produce 1; x <- produce (); produce x";
        assert_eq!(check_src(src).unwrap().to_string(), "F Unit");
    }

    #[test]
    fn weakening_holds_for_a_closed_term() {
        let t = parse("x <- produce 1; produce x").unwrap();
        let empty = check_comp(&Context::new(), &t).unwrap();
        let mut ctx = Context::new();
        ctx.push(("y".to_owned(), ValueType::Real));
        assert_eq!(check_comp(&ctx, &t).unwrap(), empty);
    }
}
