//! Exact semantics over subdistributions of (cost, value) outcomes.
//!
//! A closed program of returner type denotes, at each recursion depth `d`, a
//! finite subdistribution over pairs of an accumulated cost and a result
//! value, with rational probabilities computed exactly.  The depth bounds
//! recursion only: every `fix` consumes one unit and unfolds, and at depth
//! zero a `fix` denotes the empty subdistribution (the missing probability
//! mass is the mass still "in flight" through deeper recursion).  All other
//! constructs — sequencing included — pass the depth through unchanged, so
//! the approximants grow pointwise with `d` and their limit is the semantics
//! of the program.
//!
//! Evaluation is defunctionalised: instead of building mathematical function
//! spaces for arrow types, the engine carries a stack of pending arguments,
//! which lambdas pop.  A program of arrow type must therefore be applied to
//! arguments before it can be evaluated (see [`eval_cost_applied`]), or
//! queried through the [`CostFun`] wrapper returned by [`eval_cost`].
//!
//! `uniform` has no finite-support semantics and is rejected here; the
//! discrete fragment (`choose`, `rand`) is handled exactly.
//!
//! The traversal itself — interning, memoisation, argument stacks — lives in
//! the shared engine; this module supplies the subdistribution domain.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};

use crate::engine::{eval_dfs, Dom};
use crate::rational::{dyadic_add_assign, dyadic_mul, rat_u, Rat};
use crate::syntax::ast::{CompTerm, ValueTerm};
use crate::value::{EvalError, RunValue};

pub use crate::engine::RAND_ENUM_LIMIT;

/// A finite subdistribution over (cost, value) outcomes: non-negative
/// rational weights summing to at most one.  Zero-weight entries are never
/// stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SubDist {
    entries: BTreeMap<(u64, RunValue), Rat>,
}

impl SubDist {
    pub fn zero() -> Self {
        SubDist::default()
    }

    /// The Dirac distribution on a single outcome.
    pub fn point(cost: u64, v: RunValue) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert((cost, v), Rat::one());
        SubDist { entries }
    }

    pub fn from_entries<I: IntoIterator<Item = (u64, RunValue, Rat)>>(items: I) -> Self {
        let mut d = SubDist::zero();
        for (c, v, p) in items {
            d.insert_add(c, v, &p);
        }
        d
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &RunValue, &Rat)> {
        self.entries.iter().map(|((c, v), p)| (*c, v, p))
    }

    /// Total probability mass (at most one for engine results).
    pub fn mass(&self) -> Rat {
        let mut m = Rat::zero();
        for p in self.entries.values() {
            dyadic_add_assign(&mut m, p);
        }
        m
    }

    /// Expected cost of the outcomes present; mass lost to the depth cutoff
    /// contributes nothing.
    pub fn expected_cost(&self) -> Rat {
        let mut e = Rat::zero();
        for ((c, _), p) in &self.entries {
            dyadic_add_assign(&mut e, &dyadic_mul(&rat_u(*c), p));
        }
        e
    }

    pub fn insert_add(&mut self, cost: u64, v: RunValue, p: &Rat) {
        if p.is_zero() {
            return;
        }
        match self.entries.entry((cost, v)) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                dyadic_add_assign(e.get_mut(), p);
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(p.clone());
            }
        }
    }

    /// `self += w * other`.
    pub fn add_weighted(&mut self, other: &SubDist, w: &Rat) {
        if w.is_zero() {
            return;
        }
        for ((c, v), p) in &other.entries {
            self.insert_add(*c, v.clone(), &dyadic_mul(w, p));
        }
    }

    /// `self += w * (other with every cost increased by c0)`.
    pub fn add_shifted(&mut self, other: &SubDist, c0: u64, w: &Rat) -> Result<(), EvalError> {
        if w.is_zero() {
            return Ok(());
        }
        for ((c, v), p) in &other.entries {
            let cost = c0.checked_add(*c).ok_or(EvalError::Overflow("cost"))?;
            self.insert_add(cost, v.clone(), &dyadic_mul(w, p));
        }
        Ok(())
    }

    /// Marginal distribution of the cost.
    pub fn cost_marginal(&self) -> BTreeMap<u64, Rat> {
        let mut out: BTreeMap<u64, Rat> = BTreeMap::new();
        for ((c, _), p) in &self.entries {
            *out.entry(*c).or_insert_with(Rat::zero) += p;
        }
        out
    }

    /// Marginal distribution of the result value.
    pub fn value_marginal(&self) -> BTreeMap<RunValue, Rat> {
        let mut out: BTreeMap<RunValue, Rat> = BTreeMap::new();
        for ((_, v), p) in &self.entries {
            *out.entry(v.clone()).or_insert_with(Rat::zero) += p;
        }
        out
    }

    /// Pointwise order: every outcome of `self` has at most the weight it
    /// has in `other`.  Approximants are increasing in depth in this order.
    pub fn le(&self, other: &SubDist) -> bool {
        self.entries.iter().all(|(k, p)| {
            other
                .entries
                .get(k)
                .map(|q| p <= q)
                .unwrap_or(false)
        })
    }

    /// True when the weights are non-negative and sum to at most one.
    pub fn is_subdist(&self) -> bool {
        self.entries.values().all(|p| !p.is_negative()) && self.mass() <= Rat::one()
    }
}

impl num::traits::Zero for SubDist {
    fn zero() -> Self {
        SubDist::zero()
    }
    fn is_zero(&self) -> bool {
        self.is_empty()
    }
    fn set_zero(&mut self) {
        self.entries.clear();
    }
}

impl std::ops::Add for SubDist {
    type Output = SubDist;
    fn add(mut self, rhs: SubDist) -> SubDist {
        for ((c, v), p) in rhs.entries {
            self.insert_add(c, v, &p);
        }
        self
    }
}

/// The (cost, value)-subdistribution domain.
pub(crate) struct CostDom;

impl Dom for CostDom {
    type Out = SubDist;

    fn bottom() -> SubDist {
        SubDist::zero()
    }

    fn pure(v: RunValue) -> SubDist {
        SubDist::point(0, v)
    }

    fn charge(c: u64) -> SubDist {
        SubDist::point(c, RunValue::Unit)
    }

    fn uniform_nat(m: u64) -> SubDist {
        let w = Rat::one() / rat_u(m);
        SubDist::from_entries((0..m).map(|k| (0, RunValue::Nat(k), w.clone())))
    }

    fn bind(
        left: &SubDist,
        cont: &mut dyn FnMut(&RunValue) -> Result<SubDist, EvalError>,
    ) -> Result<SubDist, EvalError> {
        // One continuation evaluation per distinct returned value.
        let mut by_value: BTreeMap<&RunValue, Vec<(u64, &Rat)>> = BTreeMap::new();
        for (c, v, p) in left.iter() {
            by_value.entry(v).or_default().push((c, p));
        }
        let mut out = SubDist::zero();
        for (v, costs) in by_value {
            let d = cont(v)?;
            for (c, p) in costs {
                out.add_shifted(&d, c, p)?;
            }
        }
        Ok(out)
    }

    fn mix(p: &Rat, l: Option<SubDist>, r: Option<SubDist>) -> SubDist {
        let mut out = SubDist::zero();
        if let Some(d) = l {
            out.add_weighted(&d, p);
        }
        if let Some(d) = r {
            out.add_weighted(&d, &(Rat::one() - p));
        }
        out
    }
}

/// Semantic object of a computation: a subdistribution at returner types, a
/// function awaiting an argument at arrow types.
#[derive(Clone, Debug, PartialEq)]
pub enum CostSemResult {
    Dist(SubDist),
    Fun(CostFun),
}

/// The semantics of an arrow-typed program, represented as the program
/// closed over the arguments applied so far.
#[derive(Clone, Debug, PartialEq)]
pub struct CostFun {
    term: CompTerm,
    depth: u64,
    pending: Vec<RunValue>,
}

impl CostFun {
    /// Apply one more argument, yielding either the next function layer or
    /// the final subdistribution.
    pub fn apply(&self, v: RunValue) -> Result<CostSemResult, EvalError> {
        let mut pending = self.pending.clone();
        pending.push(v);
        // Arguments are popped innermost-first, so seed the stack reversed.
        let stack: Vec<RunValue> = pending.iter().rev().cloned().collect();
        match eval_dfs::<CostDom>(&self.term, self.depth, stack) {
            Ok(d) => Ok(CostSemResult::Dist(d)),
            Err(EvalError::UnappliedFunction) => Ok(CostSemResult::Fun(CostFun {
                term: self.term.clone(),
                depth: self.depth,
                pending,
            })),
            Err(e) => Err(e),
        }
    }
}

/// Depth-bounded semantics of a closed program: the (cost, value)
/// subdistribution at returner types, a [`CostFun`] at arrow types.
pub fn eval_cost(t: &CompTerm, depth: u64) -> Result<CostSemResult, EvalError> {
    match eval_cost_dist(t, depth) {
        Ok(d) => Ok(CostSemResult::Dist(d)),
        Err(EvalError::UnappliedFunction) => Ok(CostSemResult::Fun(CostFun {
            term: t.clone(),
            depth,
            pending: Vec::new(),
        })),
        Err(e) => Err(e),
    }
}

/// Exact (cost, value) subdistribution of a closed returner-typed program at
/// the given recursion depth.  Fails with `UnappliedFunction` on programs of
/// arrow type; see [`eval_cost_applied`].
pub fn eval_cost_dist(t: &CompTerm, depth: u64) -> Result<SubDist, EvalError> {
    let d = eval_dfs::<CostDom>(t, depth, Vec::new())?;
    debug_assert!(d.is_subdist());
    Ok(d)
}

/// Like [`eval_cost_dist`], after applying `t` to the given (closed)
/// argument values left to right.
pub fn eval_cost_applied(
    t: &CompTerm,
    args: &[ValueTerm],
    depth: u64,
) -> Result<SubDist, EvalError> {
    eval_cost_dist(&apply_to_args(t, args), depth)
}

/// Expected value of the cost marginal of a subdistribution.
pub fn expected_of_marginal(d: &SubDist) -> Rat {
    d.expected_cost()
}

/// `t v1 ... vn` as syntax.
pub fn apply_to_args(t: &CompTerm, args: &[ValueTerm]) -> CompTerm {
    let mut out = t.clone();
    for v in args {
        out = CompTerm::App(Box::new(out), v.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::syntax::parser::parse;
    use crate::syntax::subst::substitute_comp;
    use std::rc::Rc;

    fn geometric() -> CompTerm {
        parse("fix go. choose 1/2 { produce 0 } { charge (cost 1); y <- force go; succ(y) }")
            .unwrap()
    }

    #[test]
    fn geometric_truncates_to_dyadic_weights() {
        let d = eval_cost_dist(&geometric(), 4).unwrap();
        let want = SubDist::from_entries((0..4u64).map(|k| {
            (k, RunValue::Nat(k), rat(1, 2i64.pow(k as u32 + 1)))
        }));
        assert_eq!(d, want);
        assert_eq!(d.mass(), rat(15, 16));
        assert_eq!(d.expected_cost(), rat(11, 16));
    }

    #[test]
    fn approximants_grow_with_depth() {
        let t = geometric();
        let mut prev = eval_cost_dist(&t, 0).unwrap();
        assert!(prev.is_empty());
        for d in 1..=8 {
            let next = eval_cost_dist(&t, d).unwrap();
            assert!(prev.le(&next));
            assert!(next.is_subdist());
            prev = next;
        }
    }

    #[test]
    fn unfolding_shifts_depth_by_one() {
        let t = geometric();
        let CompTerm::Fix(f, _, body) = &t else { panic!() };
        let unfolded = substitute_comp(body, f, &ValueTerm::Thunk(Rc::new(t.clone())));
        for d in 0..6 {
            assert_eq!(
                eval_cost_dist(&t, d + 1).unwrap(),
                eval_cost_dist(&unfolded, d).unwrap()
            );
        }
    }

    #[test]
    fn recursion_free_programs_ignore_depth() {
        let t = parse("x <- rand 3; charge (x); produce x").unwrap();
        let d0 = eval_cost_dist(&t, 0).unwrap();
        assert_eq!(d0, eval_cost_dist(&t, 9).unwrap());
        let want = SubDist::from_entries((0..3u64).map(|k| (k, RunValue::Nat(k), rat(1, 3))));
        assert_eq!(d0, want);
    }

    #[test]
    fn choose_splits_mass() {
        let t = parse("choose 1/3 { charge (cost 1); produce 0 } { produce 1 }").unwrap();
        let d = eval_cost_dist(&t, 0).unwrap();
        let want = SubDist::from_entries([
            (1, RunValue::Nat(0), rat(1, 3)),
            (0, RunValue::Nat(1), rat(2, 3)),
        ]);
        assert_eq!(d, want);
    }

    #[test]
    fn pending_arguments_flow_through_force_and_bind() {
        let t = parse("(force (thunk (\\x. produce x))) 7").unwrap();
        assert_eq!(eval_cost_dist(&t, 0).unwrap(), SubDist::point(0, RunValue::Nat(7)));

        let t = parse("(y <- produce 2; \\x. z <- add(x, y); charge (z); produce z) 3").unwrap();
        assert_eq!(eval_cost_dist(&t, 0).unwrap(), SubDist::point(5, RunValue::Nat(5)));
    }

    #[test]
    fn unapplied_function_is_reported() {
        let t = parse("\\x. produce x").unwrap();
        assert_eq!(eval_cost_dist(&t, 5), Err(EvalError::UnappliedFunction));
    }

    #[test]
    fn divergence_denotes_the_empty_subdistribution() {
        let t = parse("fix x : F Nat. force x").unwrap();
        assert_eq!(eval_cost_dist(&t, 50).unwrap(), SubDist::zero());
    }

    #[test]
    fn uniform_is_rejected_by_the_exact_engine() {
        let t = parse("x <- uniform; produce 0").unwrap();
        assert_eq!(eval_cost_dist(&t, 3), Err(EvalError::ContinuousUnsupported));
    }

    #[test]
    fn applied_arguments_match_syntactic_application() {
        let fact = parse(
            "fix f : Nat -> F Nat. \\n. charge (cost 1); \
             if0 n then produce 1 else (p <- pred(n); m <- force f p; mul(n, m))",
        )
        .unwrap();
        let d = eval_cost_applied(&fact, &[ValueTerm::NatLit(5)], 10).unwrap();
        assert_eq!(d, SubDist::point(6, RunValue::Nat(120)));
    }

    #[test]
    fn arrow_programs_denote_functions() {
        let two_arg = parse("\\x. \\y. z <- add(x, y); charge (z); produce z").unwrap();
        let f = match eval_cost(&two_arg, 4).unwrap() {
            CostSemResult::Fun(f) => f,
            CostSemResult::Dist(_) => panic!("expected a function"),
        };
        let g = match f.apply(RunValue::Nat(2)).unwrap() {
            CostSemResult::Fun(g) => g,
            CostSemResult::Dist(_) => panic!("still expected a function"),
        };
        match g.apply(RunValue::Nat(3)).unwrap() {
            CostSemResult::Dist(d) => assert_eq!(d, SubDist::point(5, RunValue::Nat(5))),
            CostSemResult::Fun(_) => panic!("expected a distribution after two arguments"),
        }
    }

    #[test]
    fn layered_evaluation_matches_direct_evaluation() {
        let t = geometric();
        for depth in [0, 1, 2, 3, 8, 33] {
            let direct = eval_cost_dist(&t, depth).unwrap();
            let layered = crate::engine::eval_layered::<CostDom>(&t, depth).unwrap();
            assert_eq!(direct, layered, "depth {depth}");
        }
    }
}
