//! Runtime values and the pure fragment of evaluation.
//!
//! All three engines (sampler, distribution, expected-cost) share this
//! layer: closed value terms evaluate to [`RunValue`]s, built-in operators
//! compute on them, and `quote` turns a runtime value back into syntax for
//! substitution into a continuation.
//!
//! `RunValue` compares and hashes *up to alpha* in its thunks, so that
//! distributions merge outcomes that differ only in bound names.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use thiserror::Error;

use crate::rational::{fmt_rat, Rat};
use crate::syntax::ast::{CompTerm, OpName, ValueTerm};
use crate::syntax::binding::{alpha_cmp_comp, alpha_hash_comp};

/// A fully evaluated value.
#[derive(Clone, Debug)]
pub enum RunValue {
    Unit,
    Nat(u64),
    Real(Rat),
    Cost(u64),
    Pair(Box<RunValue>, Box<RunValue>),
    List(Vec<RunValue>),
    /// A suspended (closed) computation.  Shared, so that cloning a value
    /// (distributions and memo tables do this a lot) never copies the
    /// suspended term.
    Thunk(Rc<CompTerm>),
}

impl fmt::Display for RunValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunValue::Unit => write!(f, "()"),
            RunValue::Nat(n) => write!(f, "{n}"),
            RunValue::Real(q) => write!(f, "{}", fmt_rat(q)),
            RunValue::Cost(c) => write!(f, "cost {c}"),
            RunValue::Pair(a, b) => write!(f, "({a}, {b})"),
            RunValue::List(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            RunValue::Thunk(t) => write!(f, "thunk ({})", crate::syntax::pretty::pretty_comp(t)),
        }
    }
}

fn rank(v: &RunValue) -> u8 {
    match v {
        RunValue::Unit => 0,
        RunValue::Nat(_) => 1,
        RunValue::Real(_) => 2,
        RunValue::Cost(_) => 3,
        RunValue::Pair(..) => 4,
        RunValue::List(_) => 5,
        RunValue::Thunk(_) => 6,
    }
}

impl PartialEq for RunValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RunValue {}

impl PartialOrd for RunValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RunValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use RunValue::*;
        rank(self).cmp(&rank(other)).then_with(|| match (self, other) {
            (Unit, Unit) => Ordering::Equal,
            (Nat(a), Nat(b)) | (Cost(a), Cost(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.cmp(b),
            (Pair(a1, a2), Pair(b1, b2)) => a1.cmp(b1).then_with(|| a2.cmp(b2)),
            (List(xs), List(ys)) => xs.cmp(ys),
            (Thunk(t), Thunk(u)) => {
                if Rc::ptr_eq(t, u) {
                    Ordering::Equal
                } else {
                    alpha_cmp_comp(t, u)
                }
            }
            _ => unreachable!("ranks matched"),
        })
    }
}

impl Hash for RunValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        use RunValue::*;
        rank(self).hash(state);
        match self {
            Unit => {}
            Nat(n) | Cost(n) => n.hash(state),
            Real(q) => q.hash(state),
            Pair(a, b) => {
                a.hash(state);
                b.hash(state);
            }
            List(xs) => {
                xs.len().hash(state);
                for x in xs {
                    x.hash(state);
                }
            }
            Thunk(t) => alpha_hash_comp(t, state),
        }
    }
}

/// Runtime failures.  A well-typed closed program can only hit the overflow
/// cases; the rest guard against misuse of the engine APIs.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound variable `{0}` at runtime (program not closed?)")]
    Unbound(String),
    #[error("natural-number arithmetic overflowed in `{0}`")]
    Overflow(&'static str),
    #[error("`{op}` applied to an argument of the wrong shape")]
    BadOperand { op: &'static str },
    #[error("`force` hit a non-thunk value")]
    ForceNonThunk,
    #[error("a computation got stuck: {0}")]
    Stuck(&'static str),
    #[error("`uniform` is not part of the discrete fragment this engine handles")]
    ContinuousUnsupported,
    #[error("the program has a function type; apply it to arguments first")]
    UnappliedFunction,
    #[error("`rand {0}` has too many outcomes to enumerate exactly")]
    RandTooLarge(u64),
}

/// Evaluate a closed value term.
pub fn value_eval(v: &ValueTerm) -> Result<RunValue, EvalError> {
    use ValueTerm::*;
    match v {
        Var(x) => Err(EvalError::Unbound(x.clone())),
        UnitLit => Ok(RunValue::Unit),
        NatLit(n) => Ok(RunValue::Nat(*n)),
        RealLit(q) => Ok(RunValue::Real(q.clone())),
        CostLit(c) => Ok(RunValue::Cost(*c)),
        CostAdd(a, b) => {
            let a = cost_amount(&value_eval(a)?)?;
            let b = cost_amount(&value_eval(b)?)?;
            a.checked_add(b)
                .map(RunValue::Cost)
                .ok_or(EvalError::Overflow("+"))
        }
        Pair(a, b) => Ok(RunValue::Pair(
            Box::new(value_eval(a)?),
            Box::new(value_eval(b)?),
        )),
        Thunk(t) => Ok(RunValue::Thunk(Rc::clone(t))),
        Nil(_) => Ok(RunValue::List(Vec::new())),
        Cons(h, tl) => {
            let h = value_eval(h)?;
            match value_eval(tl)? {
                RunValue::List(mut xs) => {
                    xs.insert(0, h);
                    Ok(RunValue::List(xs))
                }
                _ => Err(EvalError::BadOperand { op: "cons" }),
            }
        }
    }
}

/// Turn a runtime value back into a (closed) value term.
pub fn quote(v: &RunValue) -> ValueTerm {
    use RunValue::*;
    match v {
        Unit => ValueTerm::UnitLit,
        Nat(n) => ValueTerm::NatLit(*n),
        Real(q) => ValueTerm::RealLit(q.clone()),
        Cost(c) => ValueTerm::CostLit(*c),
        Pair(a, b) => ValueTerm::Pair(Box::new(quote(a)), Box::new(quote(b))),
        List(xs) => {
            let mut out = ValueTerm::Nil(None);
            for x in xs.iter().rev() {
                out = ValueTerm::Cons(Box::new(quote(x)), Box::new(out));
            }
            out
        }
        Thunk(t) => ValueTerm::Thunk(Rc::clone(t)),
    }
}

/// The amount a `charge` argument spends: a `Cost` or (equivalently) a `Nat`.
pub fn cost_amount(v: &RunValue) -> Result<u64, EvalError> {
    match v {
        RunValue::Cost(c) => Ok(*c),
        RunValue::Nat(n) => Ok(*n),
        _ => Err(EvalError::BadOperand { op: "charge" }),
    }
}

/// Guard for constructs of returner type: they cannot be applied, so any
/// pending arguments mean the program was stuck.
pub(crate) fn expect_no_args(args: &[RunValue], what: &'static str) -> Result<(), EvalError> {
    if args.is_empty() {
        Ok(())
    } else {
        Err(EvalError::Stuck(what))
    }
}

/// Apply a built-in operator to evaluated arguments.
pub fn primop_apply(op: OpName, args: &[RunValue]) -> Result<RunValue, EvalError> {
    use OpName::*;
    use RunValue::*;
    let nat = |v: &RunValue| match v {
        Nat(n) => Ok(*n),
        _ => Err(EvalError::BadOperand { op: op.name() }),
    };
    let real = |v: &RunValue| match v {
        Real(q) => Ok(q.clone()),
        _ => Err(EvalError::BadOperand { op: op.name() }),
    };
    let wrong_shape = || EvalError::BadOperand { op: op.name() };
    match (op, args) {
        (AddNat, [a, b]) => nat(a)?
            .checked_add(nat(b)?)
            .map(Nat)
            .ok_or(EvalError::Overflow("add")),
        (Monus, [a, b]) => Ok(Nat(nat(a)?.saturating_sub(nat(b)?))),
        (MulNat, [a, b]) => nat(a)?
            .checked_mul(nat(b)?)
            .map(Nat)
            .ok_or(EvalError::Overflow("mul")),
        (LeqNat, [a, b]) => Ok(Nat(if nat(a)? <= nat(b)? { 0 } else { 1 })),
        (AddReal, [a, b]) => Ok(Real(real(a)? + real(b)?)),
        (SubReal, [a, b]) => Ok(Real(real(a)? - real(b)?)),
        (MulReal, [a, b]) => Ok(Real(real(a)? * real(b)?)),
        (LeqReal, [a, b]) => Ok(Nat(if real(a)? <= real(b)? { 0 } else { 1 })),
        (FloorToNat, [a]) => {
            let q = real(a)?;
            if q < Rat::from_integer(0.into()) {
                return Ok(Nat(0));
            }
            let floored = q.floor();
            u64::try_from(floored.to_integer())
                .map(Nat)
                .map_err(|_| EvalError::Overflow("floor"))
        }
        (Succ, [a]) => nat(a)?
            .checked_add(1)
            .map(Nat)
            .ok_or(EvalError::Overflow("succ")),
        (Pred, [a]) => Ok(Nat(nat(a)?.saturating_sub(1))),
        _ => Err(wrong_shape()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::syntax::parser::parse;

    #[test]
    fn evaluates_list_and_cost_values() {
        let v = crate::syntax::parser::parse_value("[1, 2]").unwrap();
        assert_eq!(
            value_eval(&v).unwrap(),
            RunValue::List(vec![RunValue::Nat(1), RunValue::Nat(2)])
        );
        let v = crate::syntax::parser::parse_value("cost 2 + cost 3").unwrap();
        assert_eq!(value_eval(&v).unwrap(), RunValue::Cost(5));
    }

    #[test]
    fn quote_round_trips_through_value_eval() {
        let v = RunValue::Pair(
            Box::new(RunValue::List(vec![RunValue::Nat(1)])),
            Box::new(RunValue::Real(rat(1, 2))),
        );
        assert_eq!(value_eval(&quote(&v)).unwrap(), v);
    }

    #[test]
    fn operators_compute() {
        use RunValue::*;
        assert_eq!(primop_apply(OpName::Monus, &[Nat(3), Nat(5)]).unwrap(), Nat(0));
        assert_eq!(primop_apply(OpName::LeqNat, &[Nat(3), Nat(5)]).unwrap(), Nat(0));
        assert_eq!(primop_apply(OpName::LeqNat, &[Nat(6), Nat(5)]).unwrap(), Nat(1));
        assert_eq!(
            primop_apply(OpName::FloorToNat, &[Real(rat(7, 2))]).unwrap(),
            Nat(3)
        );
        assert_eq!(
            primop_apply(OpName::FloorToNat, &[Real(rat(-1, 2))]).unwrap(),
            Nat(0)
        );
        assert_eq!(
            primop_apply(OpName::MulReal, &[Real(rat(1, 2)), Real(rat(2, 3))]).unwrap(),
            Real(rat(1, 3))
        );
        assert!(matches!(
            primop_apply(OpName::Succ, &[Nat(u64::MAX)]),
            Err(EvalError::Overflow(_))
        ));
    }

    #[test]
    fn thunks_compare_up_to_alpha() {
        let t1 = RunValue::Thunk(Rc::new(parse("\\x. produce x").unwrap()));
        let t2 = RunValue::Thunk(Rc::new(parse("\\y. produce y").unwrap()));
        assert_eq!(t1, t2);
        let mut h1 = std::collections::hash_map::DefaultHasher::new();
        let mut h2 = std::collections::hash_map::DefaultHasher::new();
        t1.hash(&mut h1);
        t2.hash(&mut h2);
        assert_eq!(h1.finish(), h2.finish());
    }
}
