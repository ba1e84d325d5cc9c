//! Lowering of the discrete randomness constructs onto `uniform`.
//!
//! `rand` and `choose` are primitive in the syntax — the discrete analysis
//! engines handle them directly — but both are definable from a single
//! uniform draw on the unit interval.  This pass rewrites them away so the
//! sampler can be cross-checked against its own lowering:
//!
//! - `choose p { t } { u }` becomes `x <- uniform; w <- rleq(x, p);
//!   if0 w then t else u`, which takes the left branch exactly when the
//!   draw lands in `[0, p]`.
//! - `rand n` (literal `n > 0`) becomes `x <- uniform; floor(rmul(n.0, x))`.
//!   Non-literal arguments stay primitive: the operator table has no
//!   natural-to-real cast, so there is nothing to multiply a runtime natural
//!   into.  `rand 0` also stays primitive (it returns `0`; the lowered form
//!   would too, but only by the floor clamping).
//!
//! Fresh names for the introduced binders are chosen against the free
//! variables of the branches, so lowering never captures.

use num::{BigInt, Zero};

use crate::rational::Rat;
use crate::syntax::ast::{CompTerm, OpName, ValueTerm};
use crate::syntax::binding::{free_vars_comp, fresh_name};

/// Rewrite `choose` and literal `rand` into `uniform` draws, recursively.
/// With `lower == false` this is the identity (useful for uniform treatment
/// in the harness).
pub fn desugar(t: &CompTerm, lower: bool) -> CompTerm {
    if !lower {
        return t.clone();
    }
    lower_comp(t)
}

fn lower_comp(t: &CompTerm) -> CompTerm {
    use CompTerm::*;
    match t {
        Produce(v) => Produce(lower_value(v)),
        Force(v) => Force(lower_value(v)),
        Charge(v) => Charge(lower_value(v)),
        Bind(x, t1, t2) => Bind(x.clone(), Box::new(lower_comp(t1)), Box::new(lower_comp(t2))),
        Lam(x, ann, body) => Lam(x.clone(), ann.clone(), Box::new(lower_comp(body))),
        Fix(x, ann, body) => Fix(x.clone(), ann.clone(), Box::new(lower_comp(body))),
        App(t1, v) => App(Box::new(lower_comp(t1)), lower_value(v)),
        LetVal(x, v, body) => LetVal(x.clone(), lower_value(v), Box::new(lower_comp(body))),
        IfZero(v, t1, t2) => IfZero(
            lower_value(v),
            Box::new(lower_comp(t1)),
            Box::new(lower_comp(t2)),
        ),
        Unpair(x, y, v, body) => {
            Unpair(x.clone(), y.clone(), lower_value(v), Box::new(lower_comp(body)))
        }
        CaseList(v, nil_branch, h, tl, cons_branch) => CaseList(
            lower_value(v),
            Box::new(lower_comp(nil_branch)),
            h.clone(),
            tl.clone(),
            Box::new(lower_comp(cons_branch)),
        ),
        Uniform => Uniform,
        PrimOp(op, args) => PrimOp(*op, args.iter().map(lower_value).collect()),
        RandNat(v) => {
            let v = lower_value(v);
            match &v {
                ValueTerm::NatLit(n) if *n > 0 => {
                    let x = "x".to_owned();
                    // x <- uniform; r <- rmul(n.0, x); floor(r)
                    let scaled = CompTerm::PrimOp(
                        OpName::MulReal,
                        vec![
                            ValueTerm::RealLit(Rat::from_integer(BigInt::from(*n))),
                            ValueTerm::Var(x.clone()),
                        ],
                    );
                    let r = "r".to_owned();
                    CompTerm::Bind(
                        x,
                        Box::new(Uniform),
                        Box::new(CompTerm::Bind(
                            r.clone(),
                            Box::new(scaled),
                            Box::new(CompTerm::PrimOp(
                                OpName::FloorToNat,
                                vec![ValueTerm::Var(r)],
                            )),
                        )),
                    )
                }
                _ => RandNat(v),
            }
        }
        Choose(p, t1, t2) => {
            if p.is_zero() {
                // A zero-probability left branch lowers to the right branch
                // directly; the comparison form would take the left branch on
                // the measure-zero draw of exactly 0.
                return lower_comp(t2);
            }
            let t1 = lower_comp(t1);
            let t2 = lower_comp(t2);
            let mut avoid = free_vars_comp(&t1);
            avoid.extend(free_vars_comp(&t2));
            let x = fresh_name("x", &avoid);
            avoid.insert(x.clone());
            let w = fresh_name("w", &avoid);
            // x <- uniform; w <- rleq(x, p); if0 w then t1 else t2
            CompTerm::Bind(
                x.clone(),
                Box::new(Uniform),
                Box::new(CompTerm::Bind(
                    w.clone(),
                    Box::new(CompTerm::PrimOp(
                        OpName::LeqReal,
                        vec![ValueTerm::Var(x), ValueTerm::RealLit(p.clone())],
                    )),
                    Box::new(CompTerm::IfZero(
                        ValueTerm::Var(w),
                        Box::new(t1),
                        Box::new(t2),
                    )),
                )),
            )
        }
    }
}

fn lower_value(v: &ValueTerm) -> ValueTerm {
    use ValueTerm::*;
    match v {
        Var(_) | UnitLit | NatLit(_) | RealLit(_) | CostLit(_) | Nil(_) => v.clone(),
        CostAdd(a, b) => CostAdd(Box::new(lower_value(a)), Box::new(lower_value(b))),
        Pair(a, b) => Pair(Box::new(lower_value(a)), Box::new(lower_value(b))),
        Cons(a, b) => Cons(Box::new(lower_value(a)), Box::new(lower_value(b))),
        Thunk(t) => Thunk(std::rc::Rc::new(lower_comp(t))),
    }
}
