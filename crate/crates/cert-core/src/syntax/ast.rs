//! Abstract syntax for the metalanguage.
//!
//! The language splits terms and types into a value layer and a computation
//! layer.  Values are inert data (numbers, pairs, lists, thunks); computations
//! are the things that run, spend cost, and flip coins.  `U` and `F` shuttle
//! between the layers: `U c` is the value type of suspended computations of
//! type `c`, and `F v` is the computation type that terminates with a value of
//! type `v`.

use std::fmt;
use std::rc::Rc;

use crate::rational::Rat;

/// Types of the value layer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueType {
    /// `Unit` — the one-element type.
    Unit,
    /// `Nat` — natural numbers.
    Nat,
    /// `Real` — real-valued samples (represented as exact rationals).
    Real,
    /// `Cost` — the cost monoid the `charge` effect draws from.
    Cost,
    /// `U c` — a suspended computation of type `c`.
    Thunked(Box<CompType>),
    /// `a * b` — pairs.
    Prod(Box<ValueType>, Box<ValueType>),
    /// `list a` — finite lists.
    List(Box<ValueType>),
}

/// Types of the computation layer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompType {
    /// `F a` — computations that return a value of type `a`.
    F(Box<ValueType>),
    /// `a -> c` — computations awaiting a value argument.
    Arrow(Box<ValueType>, Box<CompType>),
}

/// Built-in arithmetic and comparison operators.
///
/// Each operator is a computation: applying it costs nothing but returns
/// through `F`, so operator calls sequence with `<-` like any other
/// computation.  Comparisons return naturals (`0` means "yes" so they compose
/// with `if0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpName {
    /// `add : Nat * Nat -> F Nat`.
    AddNat,
    /// `monus : Nat * Nat -> F Nat` — truncated subtraction.
    Monus,
    /// `mul : Nat * Nat -> F Nat`.
    MulNat,
    /// `leq : Nat * Nat -> F Nat` — `0` iff the first is at most the second.
    LeqNat,
    /// `radd : Real * Real -> F Real`.
    AddReal,
    /// `rsub : Real * Real -> F Real`.
    SubReal,
    /// `rmul : Real * Real -> F Real`.
    MulReal,
    /// `rleq : Real * Real -> F Nat` — `0` iff the first is at most the second.
    LeqReal,
    /// `floor : Real -> F Nat` — truncation towards zero, clamped at zero.
    FloorToNat,
    /// `succ : Nat -> F Nat`.
    Succ,
    /// `pred : Nat -> F Nat` — truncated predecessor.
    Pred,
}

impl OpName {
    /// Concrete-syntax name of the operator.
    pub fn name(self) -> &'static str {
        match self {
            OpName::AddNat => "add",
            OpName::Monus => "monus",
            OpName::MulNat => "mul",
            OpName::LeqNat => "leq",
            OpName::AddReal => "radd",
            OpName::SubReal => "rsub",
            OpName::MulReal => "rmul",
            OpName::LeqReal => "rleq",
            OpName::FloorToNat => "floor",
            OpName::Succ => "succ",
            OpName::Pred => "pred",
        }
    }

    /// Look an operator up by its concrete-syntax name.
    pub fn from_name(name: &str) -> Option<OpName> {
        ALL_OPS.iter().copied().find(|op| op.name() == name)
    }

    /// Argument types, in order.
    pub fn arg_types(self) -> &'static [ValueType] {
        use OpName::*;
        match self {
            AddNat | Monus | MulNat | LeqNat => &[ValueType::Nat, ValueType::Nat],
            AddReal | SubReal | MulReal | LeqReal => &[ValueType::Real, ValueType::Real],
            FloorToNat => &[ValueType::Real],
            Succ | Pred => &[ValueType::Nat],
        }
    }

    /// Type of value the operator produces (through `F`).
    pub fn result_type(self) -> ValueType {
        use OpName::*;
        match self {
            AddReal | SubReal | MulReal => ValueType::Real,
            _ => ValueType::Nat,
        }
    }
}

/// Every operator, in a fixed order.
pub const ALL_OPS: [OpName; 11] = [
    OpName::AddNat,
    OpName::Monus,
    OpName::MulNat,
    OpName::LeqNat,
    OpName::AddReal,
    OpName::SubReal,
    OpName::MulReal,
    OpName::LeqReal,
    OpName::FloorToNat,
    OpName::Succ,
    OpName::Pred,
];

/// Terms of the value layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValueTerm {
    /// A variable.
    Var(String),
    /// `()`.
    UnitLit,
    /// A natural-number literal.
    NatLit(u64),
    /// A real literal, written as a fraction or finite decimal.
    RealLit(Rat),
    /// `cost n` — a literal of the cost monoid.
    CostLit(u64),
    /// `v + w` — addition in the cost monoid.
    CostAdd(Box<ValueTerm>, Box<ValueTerm>),
    /// `(v, w)`.
    Pair(Box<ValueTerm>, Box<ValueTerm>),
    /// `thunk t` — suspend a computation into a value.
    ///
    /// The body is reference-counted so that cloning a term that carries a
    /// large suspended computation (recursive unfoldings do this constantly)
    /// shares the body instead of copying it.
    Thunk(Rc<CompTerm>),
    /// `nil`, optionally ascribed `(nil : list a)` when the element type
    /// cannot be inferred from context.  The field holds the element type.
    Nil(Option<ValueType>),
    /// `cons v w`.
    Cons(Box<ValueTerm>, Box<ValueTerm>),
}

/// Terms of the computation layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CompTerm {
    /// `produce v` — return a value.
    Produce(ValueTerm),
    /// `x <- t; u` — run `t`, bind its result to `x`, continue as `u`.
    /// The binder `_` marks pure sequencing.
    Bind(String, Box<CompTerm>, Box<CompTerm>),
    /// `\x. t` — abstraction, with an optional domain ascription `\x : a. t`.
    Lam(String, Option<ValueType>, Box<CompTerm>),
    /// `t v` — application of a computation to a value argument.
    App(Box<CompTerm>, ValueTerm),
    /// `force v` — resume a thunk.
    Force(ValueTerm),
    /// `let x = v in t` — name a value.
    LetVal(String, ValueTerm, Box<CompTerm>),
    /// `if0 v then t else u` — branch on whether a natural is zero.
    IfZero(ValueTerm, Box<CompTerm>, Box<CompTerm>),
    /// `unpair v as (x, y) in t` — destructure a pair.
    Unpair(String, String, ValueTerm, Box<CompTerm>),
    /// `case v of nil => t | cons x y => u` — destructure a list.
    CaseList(ValueTerm, Box<CompTerm>, String, String, Box<CompTerm>),
    /// `charge(v)` — spend `v` units of cost, then return `()`.
    Charge(ValueTerm),
    /// `uniform` — draw a real uniformly from the unit interval.
    Uniform,
    /// `rand v` — draw a natural uniformly from `{0, ..., v-1}`.
    /// `rand 0` returns `0`.
    RandNat(ValueTerm),
    /// `choose p { t } { u }` — run `t` with probability `p`, else `u`.
    Choose(Rat, Box<CompTerm>, Box<CompTerm>),
    /// `fix x. t` — recursion; `x` is bound to the thunk of the whole
    /// computation.  Carries an optional ascription `fix x : c. t`, required
    /// when the type cannot be synthesized from an enclosing checking
    /// position.
    Fix(String, Option<CompType>, Box<CompTerm>),
    /// `op(v1, ..., vn)` — a built-in operator applied to value arguments.
    PrimOp(OpName, Vec<ValueTerm>),
}

impl ValueTerm {
    /// Convenience constructor for variables.
    pub fn var(name: &str) -> ValueTerm {
        ValueTerm::Var(name.to_owned())
    }
}

impl CompTerm {
    /// `produce ()` — the trivial computation.
    pub fn produce_unit() -> CompTerm {
        CompTerm::Produce(ValueTerm::UnitLit)
    }

    /// True for the terminal forms that a closed computation of ground type
    /// can stop at: `produce`, `\x.`, and the effect heads that the sampler
    /// resolves in place never remain terminal.
    pub fn is_terminal(&self) -> bool {
        matches!(self, CompTerm::Produce(_) | CompTerm::Lam(..))
    }
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Unit => write!(f, "Unit"),
            ValueType::Nat => write!(f, "Nat"),
            ValueType::Real => write!(f, "Real"),
            ValueType::Cost => write!(f, "Cost"),
            ValueType::Thunked(c) => write!(f, "U ({c})"),
            ValueType::Prod(a, b) => {
                write!(f, "{} * {}", VtAtom(a), VtAtom(b))
            }
            ValueType::List(a) => write!(f, "list {}", VtAtom(a)),
        }
    }
}

/// Wraps a value type in parentheses when it is not syntactically atomic.
struct VtAtom<'a>(&'a ValueType);

impl fmt::Display for VtAtom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            ValueType::Prod(..) | ValueType::List(..) => write!(f, "({})", self.0),
            _ => write!(f, "{}", self.0),
        }
    }
}

impl fmt::Display for CompType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompType::F(a) => write!(f, "F {}", VtAtom(a)),
            CompType::Arrow(a, c) => write!(f, "{} -> {}", VtAtom(a), c),
        }
    }
}

impl fmt::Display for OpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
