//! Expected-cost semantics: a scalar expected cost paired with a value
//! subdistribution, computed compositionally.
//!
//! In contrast to [`crate::dist`], which keeps the whole joint (cost, value)
//! subdistribution, this engine collapses cost to its expectation as it goes:
//! a returner-typed program denotes a pair of a non-negative rational `ec`
//! and a finite subdistribution over result values.  Sequencing composes the
//! expectations directly — the cost of the first computation is charged in
//! full even on branches whose continuation is cut off by the depth bound —
//! so the `ec` component can strictly exceed the expectation of the cost
//! marginal computed by [`crate::dist::eval_cost_dist`] at the same depth,
//! and the two agree in the limit only under extra conditions (see the
//! documentation of the comparison checks in the law suite).
//!
//! The recursion-depth convention, the defunctionalised argument stack, and
//! the memoisation strategy are those of the shared engine; this module
//! supplies the (expected cost, value distribution) domain.  For depths in
//! the thousands, [`eval_ec_pair_deep`] computes the same result with memory
//! proportional to two depth layers of recursion states instead of all of
//! them; [`analyze`] switches to it automatically.
//!
//! This module also provides [`eval_pre`], a pre-expectation backward pass:
//! given a reward on result values, it computes expected cost *plus* expected
//! reward in one sweep, by continuation passing rather than by building any
//! distribution.  [`check_factorization`] confirms, exactly, that this single
//! number factors as `ec + Σ_v reward(v) · dist(v)` from the forward engine.
//!
//! Hot-path arithmetic goes through the dyadic helpers in
//! [`crate::rational`]: deep evaluations produce rationals whose denominators
//! are powers of two thousands of bits wide, and the general gcd hidden in
//! `Ratio`'s operators is quadratic on exactly that shape.

use std::collections::BTreeMap;
use std::rc::Rc;

use num::{One, Signed, Zero};

use crate::dist::{apply_to_args, RAND_ENUM_LIMIT};
use crate::engine::{eval_dfs, eval_layered, Dom};
use crate::rational::{dyadic_add, dyadic_add_assign, dyadic_mul, rat_u, Rat};
use crate::syntax::ast::{CompTerm, ValueTerm};
use crate::syntax::subst::{apply_closed_comp, subst_closed_comp, Subst};
use crate::value::{
    cost_amount, expect_no_args, primop_apply, quote, value_eval, EvalError, RunValue,
};

/// A finite subdistribution over result values: non-negative rational
/// weights summing to at most one.  Zero-weight entries are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct VDist {
    entries: BTreeMap<RunValue, Rat>,
}

impl VDist {
    pub fn zero() -> Self {
        VDist::default()
    }

    /// The Dirac distribution on a single value.
    pub fn point(v: RunValue) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(v, Rat::one());
        VDist { entries }
    }

    pub fn from_entries<I: IntoIterator<Item = (RunValue, Rat)>>(items: I) -> Self {
        let mut d = VDist::zero();
        for (v, p) in items {
            d.insert_add(v, &p);
        }
        d
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RunValue, &Rat)> {
        self.entries.iter()
    }

    /// Weight of one value (zero when absent).
    pub fn get(&self, v: &RunValue) -> Rat {
        self.entries.get(v).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn mass(&self) -> Rat {
        let mut m = Rat::zero();
        for p in self.entries.values() {
            dyadic_add_assign(&mut m, p);
        }
        m
    }

    pub fn insert_add(&mut self, v: RunValue, p: &Rat) {
        if p.is_zero() {
            return;
        }
        match self.entries.entry(v) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(p.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                dyadic_add_assign(e.get_mut(), p);
            }
        }
    }

    /// `self += w * other`.
    pub fn add_weighted(&mut self, other: &VDist, w: &Rat) {
        if w.is_zero() {
            return;
        }
        for (v, p) in &other.entries {
            self.insert_add(v.clone(), &dyadic_mul(w, p));
        }
    }

    /// Pointwise order: every value of `self` has at most the weight it has
    /// in `other`.
    pub fn le(&self, other: &VDist) -> bool {
        self.entries
            .iter()
            .all(|(v, p)| other.entries.get(v).map(|q| p <= q).unwrap_or(false))
    }

    /// True when the weights are non-negative and sum to at most one.
    pub fn is_subdist(&self) -> bool {
        self.entries.values().all(|p| !p.is_negative()) && self.mass() <= Rat::one()
    }
}

/// Expected cost paired with the subdistribution of result values, at some
/// recursion depth.  Both components grow pointwise with depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ECPair {
    pub ec: Rat,
    pub dist: VDist,
}

impl ECPair {
    pub fn zero() -> Self {
        ECPair {
            ec: Rat::zero(),
            dist: VDist::zero(),
        }
    }

    /// Cost-free computation returning a single value.
    pub fn unit(v: RunValue) -> Self {
        ECPair {
            ec: Rat::zero(),
            dist: VDist::point(v),
        }
    }

    pub fn mass(&self) -> Rat {
        self.dist.mass()
    }

    /// `self += w * other`, on both components.
    pub fn add_weighted(&mut self, other: &ECPair, w: &Rat) {
        if w.is_zero() {
            return;
        }
        dyadic_add_assign(&mut self.ec, &dyadic_mul(w, &other.ec));
        self.dist.add_weighted(&other.dist, w);
    }

    /// Componentwise order: `ec` no larger and every value weight no larger.
    pub fn le(&self, other: &ECPair) -> bool {
        self.ec <= other.ec && self.dist.le(&other.dist)
    }
}

/// The (expected cost, value subdistribution) domain.
pub(crate) struct EcDom;

impl Dom for EcDom {
    type Out = ECPair;

    fn bottom() -> ECPair {
        ECPair::zero()
    }

    fn pure(v: RunValue) -> ECPair {
        ECPair::unit(v)
    }

    fn charge(c: u64) -> ECPair {
        ECPair {
            ec: rat_u(c),
            dist: VDist::point(RunValue::Unit),
        }
    }

    fn uniform_nat(m: u64) -> ECPair {
        let w = Rat::one() / rat_u(m);
        ECPair {
            ec: Rat::zero(),
            dist: VDist::from_entries((0..m).map(|k| (RunValue::Nat(k), w.clone()))),
        }
    }

    fn bind(
        left: &ECPair,
        cont: &mut dyn FnMut(&RunValue) -> Result<ECPair, EvalError>,
    ) -> Result<ECPair, EvalError> {
        // The cost of the first computation counts in full, even for the
        // mass the depth bound cuts off downstream.
        let mut out = ECPair {
            ec: left.ec.clone(),
            dist: VDist::zero(),
        };
        for (v, p) in left.dist.iter() {
            let c = cont(v)?;
            out.add_weighted(&c, p);
        }
        Ok(out)
    }

    fn mix(p: &Rat, l: Option<ECPair>, r: Option<ECPair>) -> ECPair {
        let mut out = ECPair::zero();
        if let Some(a) = l {
            out.add_weighted(&a, p);
        }
        if let Some(b) = r {
            out.add_weighted(&b, &(Rat::one() - p));
        }
        out
    }
}

/// Semantic object of a computation under the expected-cost semantics: an
/// (expected cost, value subdistribution) pair at returner types, a function
/// awaiting an argument at arrow types.
#[derive(Clone, Debug, PartialEq)]
pub enum ECResult {
    Pair(ECPair),
    Fun(ECFun),
}

/// The expected-cost semantics of an arrow-typed program, represented as the
/// program closed over the arguments applied so far.
#[derive(Clone, Debug, PartialEq)]
pub struct ECFun {
    term: CompTerm,
    depth: u64,
    pending: Vec<RunValue>,
}

impl ECFun {
    /// Apply one more argument, yielding either the next function layer or
    /// the final pair.
    pub fn apply(&self, v: RunValue) -> Result<ECResult, EvalError> {
        let mut pending = self.pending.clone();
        pending.push(v);
        // Arguments are popped innermost-first, so seed the stack reversed.
        let stack: Vec<RunValue> = pending.iter().rev().cloned().collect();
        match eval_dfs::<EcDom>(&self.term, self.depth, stack) {
            Ok(p) => Ok(ECResult::Pair(p)),
            Err(EvalError::UnappliedFunction) => Ok(ECResult::Fun(ECFun {
                term: self.term.clone(),
                depth: self.depth,
                pending,
            })),
            Err(e) => Err(e),
        }
    }
}

/// Depth-bounded expected-cost semantics of a closed program: an [`ECPair`]
/// at returner types, an [`ECFun`] at arrow types.
pub fn eval_ec(t: &CompTerm, depth: u64) -> Result<ECResult, EvalError> {
    match eval_ec_pair(t, depth) {
        Ok(p) => Ok(ECResult::Pair(p)),
        Err(EvalError::UnappliedFunction) => Ok(ECResult::Fun(ECFun {
            term: t.clone(),
            depth,
            pending: Vec::new(),
        })),
        Err(e) => Err(e),
    }
}

/// Expected cost and value subdistribution of a closed returner-typed
/// program at the given recursion depth.  Fails with `UnappliedFunction` on
/// programs of arrow type; see [`eval_ec_applied`].
pub fn eval_ec_pair(t: &CompTerm, depth: u64) -> Result<ECPair, EvalError> {
    let p = eval_dfs::<EcDom>(t, depth, Vec::new())?;
    debug_assert!(!p.ec.is_negative() && p.dist.is_subdist());
    Ok(p)
}

/// Same result as [`eval_ec_pair`], computed layer by layer: memory stays
/// proportional to two depth layers of recursion states rather than to the
/// whole `(fix, depth, arguments)` memo table.  Worth it from depths in the
/// high hundreds; pure overhead below that.
pub fn eval_ec_pair_deep(t: &CompTerm, depth: u64) -> Result<ECPair, EvalError> {
    let p = eval_layered::<EcDom>(t, depth)?;
    debug_assert!(!p.ec.is_negative() && p.dist.is_subdist());
    Ok(p)
}

/// Depth from which [`analyze`] probes with [`eval_ec_pair_deep`].
const DEEP_PROBE_THRESHOLD: u64 = 512;

/// Like [`eval_ec_pair`], after applying `t` to the given (closed) argument
/// values left to right.
pub fn eval_ec_applied(
    t: &CompTerm,
    args: &[ValueTerm],
    depth: u64,
) -> Result<ECPair, EvalError> {
    eval_ec_pair(&apply_to_args(t, args), depth)
}

/// One depth probe of [`analyze`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbePoint {
    pub depth: u64,
    pub ec: Rat,
    pub mass: Rat,
}

/// Result of the iterative-deepening expected-cost analysis.
///
/// The reported `ec` is a lower bound on the limit expected cost (the
/// approximants are nondecreasing in depth); `mass` is the probability that
/// the program terminates within the reported depth.  `converged` only means
/// the chosen stopping rule fired — it is evidence, not proof, that the
/// bound is tight.  Programs that never commit any termination mass within
/// `max_depth` are reported as not converged: with zero mass observed, a
/// stationary probe pair certifies nothing (the recursion may simply not
/// have reached its productive region yet, as in a program that recurses
/// before its first `charge`).
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisReport {
    pub converged: bool,
    pub depth: u64,
    pub ec: Rat,
    pub mass: Rat,
    pub probes: Vec<ProbePoint>,
}

/// Iterative-deepening analysis: evaluate at depth 1, 2, 4, ... (capped at
/// `max_depth`), stopping as soon as both the expected cost and the
/// termination mass move by less than `tol` between consecutive probes.
///
/// Each probe uses a fresh evaluator, so peak memory is that of the deepest
/// single evaluation; deep probes use the layered evaluator and hold only
/// two depth layers of state.
pub fn analyze(t: &CompTerm, tol: &Rat, max_depth: u64) -> Result<AnalysisReport, EvalError> {
    let within_tol = |a: &Rat, b: &Rat| -> bool {
        let delta = dyadic_add(a, &(-b.clone()));
        delta.abs() < *tol
    };
    let mut probes: Vec<ProbePoint> = Vec::new();
    let mut depth = 1u64.min(max_depth);
    loop {
        let pair = if depth >= DEEP_PROBE_THRESHOLD {
            eval_ec_pair_deep(t, depth)?
        } else {
            eval_ec_pair(t, depth)?
        };
        let point = ProbePoint {
            depth,
            mass: pair.dist.mass(),
            ec: pair.ec,
        };
        let converged = match probes.last() {
            Some(prev) => {
                within_tol(&point.ec, &prev.ec) && within_tol(&point.mass, &prev.mass)
            }
            None => false,
        };
        probes.push(point);
        if converged || depth >= max_depth {
            let last = probes.last().expect("at least one probe");
            return Ok(AnalysisReport {
                converged,
                depth: last.depth,
                ec: last.ec.clone(),
                mass: last.mass.clone(),
                probes,
            });
        }
        depth = depth.saturating_mul(2).min(max_depth);
    }
}

/// A reward on result values; values not present are rewarded zero.
pub type Reward = BTreeMap<RunValue, Rat>;

/// Pre-expectation of a closed returner-typed program: expected cost plus
/// expected reward of the result, in one backward sweep.
///
/// This pass is deliberately independent of the forward engines: it carries
/// a continuation instead of building distributions, and it does not
/// memoise, so shared recursive calls are re-traversed (exponential in the
/// worst case — intended for moderate depths, as a cross-check).
pub fn eval_pre(t: &CompTerm, reward: &Reward, depth: u64) -> Result<Rat, EvalError> {
    let mut k = |v: RunValue| Ok(reward.get(&v).cloned().unwrap_or_else(Rat::zero));
    pre(t, depth, Vec::new(), &mut k)
}

fn pre(
    t: &CompTerm,
    depth: u64,
    mut args: Vec<RunValue>,
    k: &mut dyn FnMut(RunValue) -> Result<Rat, EvalError>,
) -> Result<Rat, EvalError> {
    stacker::maybe_grow(128 * 1024, 16 * 1024 * 1024, || match t {
        CompTerm::Produce(v) => {
            expect_no_args(&args, "produce")?;
            k(value_eval(v)?)
        }
        CompTerm::Lam(x, _, body) => match args.pop() {
            Some(a) => pre(&subst_closed_comp(body, x, &quote(&a)), depth, args, k),
            None => Err(EvalError::UnappliedFunction),
        },
        CompTerm::App(f, v) => {
            args.push(value_eval(v)?);
            pre(f, depth, args, k)
        }
        CompTerm::Force(v) => match value_eval(v)? {
            RunValue::Thunk(u) => pre(&u, depth, args, k),
            _ => Err(EvalError::ForceNonThunk),
        },
        CompTerm::Bind(x, t1, t2) => {
            let mut inner = |a: RunValue| -> Result<Rat, EvalError> {
                pre(&subst_closed_comp(t2, x, &quote(&a)), depth, args.clone(), &mut *k)
            };
            pre(t1, depth, Vec::new(), &mut inner)
        }
        CompTerm::LetVal(x, v, body) => {
            let rv = value_eval(v)?;
            pre(&subst_closed_comp(body, x, &quote(&rv)), depth, args, k)
        }
        CompTerm::IfZero(v, t1, t2) => match value_eval(v)? {
            RunValue::Nat(0) => pre(t1, depth, args, k),
            RunValue::Nat(_) => pre(t2, depth, args, k),
            _ => Err(EvalError::Stuck("if0 on a non-number")),
        },
        CompTerm::Unpair(x, y, v, body) => match value_eval(v)? {
            RunValue::Pair(a, b) => {
                let mut sub = Subst::new();
                sub.insert(x.clone(), quote(&a));
                sub.insert(y.clone(), quote(&b));
                pre(&apply_closed_comp(body, &sub), depth, args, k)
            }
            _ => Err(EvalError::Stuck("unpair on a non-pair")),
        },
        CompTerm::CaseList(v, nil_t, h, tl, cons_t) => match value_eval(v)? {
            RunValue::List(xs) => {
                if let Some((head, rest)) = xs.split_first() {
                    let mut sub = Subst::new();
                    sub.insert(h.clone(), quote(head));
                    sub.insert(tl.clone(), quote(&RunValue::List(rest.to_vec())));
                    pre(&apply_closed_comp(cons_t, &sub), depth, args, k)
                } else {
                    pre(nil_t, depth, args, k)
                }
            }
            _ => Err(EvalError::Stuck("case on a non-list")),
        },
        CompTerm::Charge(v) => {
            expect_no_args(&args, "charge")?;
            let c = cost_amount(&value_eval(v)?)?;
            Ok(dyadic_add(&rat_u(c), &k(RunValue::Unit)?))
        }
        CompTerm::Uniform => Err(EvalError::ContinuousUnsupported),
        CompTerm::RandNat(v) => {
            expect_no_args(&args, "rand")?;
            match value_eval(v)? {
                RunValue::Nat(0) => k(RunValue::Nat(0)),
                RunValue::Nat(m) if m <= RAND_ENUM_LIMIT => {
                    let mut total = Rat::zero();
                    for i in 0..m {
                        dyadic_add_assign(&mut total, &k(RunValue::Nat(i))?);
                    }
                    Ok(total / rat_u(m))
                }
                RunValue::Nat(m) => Err(EvalError::RandTooLarge(m)),
                _ => Err(EvalError::Stuck("rand on a non-number")),
            }
        }
        CompTerm::Choose(p, t1, t2) => {
            let mut total = Rat::zero();
            if !p.is_zero() {
                let l = pre(t1, depth, args.clone(), &mut *k)?;
                dyadic_add_assign(&mut total, &dyadic_mul(p, &l));
            }
            let q = Rat::one() - p;
            if !q.is_zero() {
                let r = pre(t2, depth, args, &mut *k)?;
                dyadic_add_assign(&mut total, &dyadic_mul(&q, &r));
            }
            Ok(total)
        }
        CompTerm::Fix(f, _, body) => {
            if depth == 0 {
                return Ok(Rat::zero());
            }
            let unrolled = ValueTerm::Thunk(Rc::new(t.clone()));
            pre(&subst_closed_comp(body, f, &unrolled), depth - 1, args, k)
        }
        CompTerm::PrimOp(op, operands) => {
            expect_no_args(&args, "operator call")?;
            let mut vals = Vec::with_capacity(operands.len());
            for a in operands {
                vals.push(value_eval(a)?);
            }
            k(primop_apply(*op, &vals)?)
        }
    })
}

/// Outcome of comparing [`eval_pre`] against its factorisation through the
/// forward expected-cost engine.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationReport {
    /// The backward pass: expected cost plus expected reward.
    pub pre_value: Rat,
    /// Expected cost from the forward engine.
    pub ec: Rat,
    /// Expected reward of the forward engine's value subdistribution.
    pub expected_reward: Rat,
    /// `ec + expected_reward`.
    pub factored: Rat,
    /// `pre_value - factored`; zero exactly when the two pipelines agree.
    pub discrepancy: Rat,
    pub equal: bool,
}

/// Check, in exact arithmetic, that the backward pre-expectation equals
/// expected cost plus expected reward computed forward, at one depth.
pub fn check_factorization(
    t: &CompTerm,
    reward: &Reward,
    depth: u64,
) -> Result<FactorizationReport, EvalError> {
    let pre_value = eval_pre(t, reward, depth)?;
    let pair = eval_ec_pair(t, depth)?;
    let mut expected_reward = Rat::zero();
    for (v, p) in pair.dist.iter() {
        if let Some(r) = reward.get(v) {
            dyadic_add_assign(&mut expected_reward, &dyadic_mul(p, r));
        }
    }
    let factored = dyadic_add(&pair.ec, &expected_reward);
    let discrepancy = dyadic_add(&pre_value, &(-factored.clone()));
    Ok(FactorizationReport {
        pre_value,
        ec: pair.ec,
        expected_reward,
        factored,
        equal: discrepancy.is_zero(),
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{eval_cost_dist, expected_of_marginal};
    use crate::rational::rat;
    use crate::syntax::parser::parse;
    use crate::syntax::subst::substitute_comp;
    use num::traits::Pow;

    fn instrumented_geometric() -> CompTerm {
        parse(
            "fix go : F Nat. charge (cost 1); \
             choose 1/2 { produce 0 } { y <- force go; succ(y) }",
        )
        .unwrap()
    }

    fn diverge() -> CompTerm {
        parse("fix x : F Unit. force x").unwrap()
    }

    #[test]
    fn charges_in_sequence_sum() {
        let t = parse("charge (cost 2); charge (cost 3); produce ()").unwrap();
        let p = eval_ec_pair(&t, 0).unwrap();
        assert_eq!(p.ec, rat(5, 1));
        assert_eq!(p.dist, VDist::point(RunValue::Unit));
    }

    #[test]
    fn instrumented_geometric_closed_forms() {
        // At depth d: expected cost 2 - 2^(1-d), termination mass 1 - 2^-d.
        for d in 1..=10u32 {
            let p = eval_ec_pair(&instrumented_geometric(), d as u64).unwrap();
            let pow = 1i64 << d;
            assert_eq!(p.ec, rat(2, 1) - rat(2, pow), "ec at depth {d}");
            assert_eq!(p.mass(), rat(pow - 1, pow), "mass at depth {d}");
        }
        let p10 = eval_ec_pair(&instrumented_geometric(), 10).unwrap();
        assert_eq!(p10.ec, rat(1023, 512));
    }

    #[test]
    fn expected_cost_dominates_marginal_expectation() {
        // The joint-distribution engine only counts cost on paths that
        // terminate in-depth; this engine also counts the cost already spent
        // on the cut-off mass, so it is strictly larger here.
        let t = instrumented_geometric();
        let from_dist = expected_of_marginal(&eval_cost_dist(&t, 10).unwrap());
        let ec = eval_ec_pair(&t, 10).unwrap().ec;
        assert_eq!(from_dist, rat(509, 256));
        assert_eq!(ec, rat(1023, 512));
        assert!(from_dist < ec);
    }

    #[test]
    fn sequencing_with_divergence_is_order_sensitive() {
        // Both programs terminate with probability zero, but the expected
        // cost records whether the charge happens before or after the
        // divergence.
        let bot_first = parse("(fix x : F Unit. force x); charge (cost 1); produce ()").unwrap();
        let charge_first = parse("charge (cost 1); (fix x : F Unit. force x); produce ()").unwrap();
        for depth in [0, 3, 25] {
            let a = eval_ec_pair(&bot_first, depth).unwrap();
            let b = eval_ec_pair(&charge_first, depth).unwrap();
            assert_eq!((a.ec.clone(), a.mass()), (rat(0, 1), rat(0, 1)));
            assert_eq!((b.ec.clone(), b.mass()), (rat(1, 1), rat(0, 1)));
        }
    }

    #[test]
    fn upfront_cost_counts_even_when_continuation_may_diverge() {
        // charge 2; then on result 0, flip between divergence and charge 4.
        // Joint-distribution expectation: only the terminating path shows,
        // (cost 6) * 1/2 = 3.  Expected-cost semantics: 2 + 4/2 = 4.
        let t = parse(
            "x <- (charge (cost 2); produce 0); \
             if0 x then (choose 1/2 { fix d : F Nat. force d } { charge (cost 4); produce 0 }) \
             else (fix d : F Nat. force d)",
        )
        .unwrap();
        let pair = eval_ec_pair(&t, 8).unwrap();
        assert_eq!(pair.ec, rat(4, 1));
        assert_eq!(pair.dist, VDist::from_entries([(RunValue::Nat(0), rat(1, 2))]));
        let d = eval_cost_dist(&t, 8).unwrap();
        assert_eq!(expected_of_marginal(&d), rat(3, 1));
    }

    #[test]
    fn approximants_grow_with_depth() {
        let t = instrumented_geometric();
        let mut prev = eval_ec_pair(&t, 0).unwrap();
        assert_eq!(prev, ECPair::zero());
        for d in 1..=8 {
            let next = eval_ec_pair(&t, d).unwrap();
            assert!(prev.le(&next));
            prev = next;
        }
    }

    #[test]
    fn unfolding_shifts_depth_by_one() {
        let t = instrumented_geometric();
        let CompTerm::Fix(f, _, body) = &t else { panic!() };
        let unfolded = substitute_comp(body, f, &ValueTerm::Thunk(Rc::new(t.clone())));
        for d in 0..6 {
            assert_eq!(
                eval_ec_pair(&t, d + 1).unwrap(),
                eval_ec_pair(&unfolded, d).unwrap()
            );
        }
    }

    #[test]
    fn choose_mixes_both_components() {
        let t = parse("choose 1/4 { charge (cost 1); produce 0 } { produce 1 }").unwrap();
        let p = eval_ec_pair(&t, 0).unwrap();
        assert_eq!(p.ec, rat(1, 4));
        assert_eq!(
            p.dist,
            VDist::from_entries([(RunValue::Nat(0), rat(1, 4)), (RunValue::Nat(1), rat(3, 4))])
        );
    }

    #[test]
    fn arrow_programs_denote_functions() {
        let two_arg = parse("\\x. \\y. z <- add(x, y); charge (z); produce z").unwrap();
        let f = match eval_ec(&two_arg, 4).unwrap() {
            ECResult::Fun(f) => f,
            ECResult::Pair(_) => panic!("expected a function"),
        };
        let g = match f.apply(RunValue::Nat(2)).unwrap() {
            ECResult::Fun(g) => g,
            ECResult::Pair(_) => panic!("still expected a function"),
        };
        match g.apply(RunValue::Nat(3)).unwrap() {
            ECResult::Pair(p) => {
                assert_eq!(p.ec, rat(5, 1));
                assert_eq!(p.dist, VDist::point(RunValue::Nat(5)));
            }
            ECResult::Fun(_) => panic!("expected a pair after two arguments"),
        }
    }

    #[test]
    fn deep_evaluation_matches_direct_evaluation() {
        let with_args = parse(
            "f <- produce (thunk (fix w : Nat -> F Nat. \\i. charge (cost 1); \
             if0 i then produce 0 else \
             choose 1/3 { p <- pred(i); force w p } { force w i })); \
             force f 3",
        )
        .unwrap();
        let multi_value_bind = parse(
            "x <- (fix go : F Nat. choose 1/2 { produce 0 } \
             { y <- force go; succ(y) }); \
             charge (x); choose 1/2 { produce x } { fix d : F Nat. force d }",
        )
        .unwrap();
        let programs = [
            instrumented_geometric(),
            diverge(),
            with_args,
            multi_value_bind,
            parse("x <- rand 3; charge (x); produce x").unwrap(),
        ];
        for t in &programs {
            for depth in [0, 1, 2, 3, 7, 16, 33] {
                let direct = eval_ec_pair(t, depth).unwrap();
                let deep = eval_ec_pair_deep(t, depth).unwrap();
                assert_eq!(direct, deep, "depth {depth}");
            }
        }
    }

    #[test]
    fn analyze_converges_on_the_instrumented_geometric() {
        let t = instrumented_geometric();
        let report = analyze(&t, &rat(1, 1_000_000), 1 << 14).unwrap();
        assert!(report.converged);
        assert_eq!(report.depth, 64);
        // ec at depth 64 is 2 - 2^-63.
        let tail = rat(1, 2).pow(63i32);
        assert_eq!(report.ec, rat(2, 1) - tail);
        let got: Vec<u64> = report.probes.iter().map(|p| p.depth).collect();
        assert_eq!(got, vec![1, 2, 4, 8, 16, 32, 64]);
        assert!(report.mass >= rat(999_999, 1_000_000));
    }

    #[test]
    fn analyze_respects_the_depth_cap() {
        let report = analyze(&instrumented_geometric(), &rat(1, 1_000_000), 12).unwrap();
        assert!(!report.converged);
        assert_eq!(report.depth, 12);
        let got: Vec<u64> = report.probes.iter().map(|p| p.depth).collect();
        assert_eq!(got, vec![1, 2, 4, 8, 12]);
    }

    #[test]
    fn analyze_reports_divergence_as_zero() {
        let report = analyze(&diverge(), &rat(1, 1_000_000), 1 << 14).unwrap();
        assert!(report.converged);
        assert_eq!(report.depth, 2);
        assert_eq!(report.ec, rat(0, 1));
        assert_eq!(report.mass, rat(0, 1));
    }

    #[test]
    fn pre_expectation_of_straight_line_programs() {
        let t = parse("charge (cost 3); produce 7").unwrap();
        assert_eq!(eval_pre(&t, &Reward::new(), 0).unwrap(), rat(3, 1));
        let mut reward = Reward::new();
        reward.insert(RunValue::Nat(7), rat(11, 1));
        assert_eq!(eval_pre(&t, &reward, 0).unwrap(), rat(14, 1));

        let v = parse("produce 5").unwrap();
        let mut reward5 = Reward::new();
        reward5.insert(RunValue::Nat(5), rat(11, 1));
        assert_eq!(eval_pre(&v, &reward5, 0).unwrap(), rat(11, 1));
    }

    #[test]
    fn factorization_is_exact_on_the_geometric() {
        let t = instrumented_geometric();
        let mut reward = Reward::new();
        for k in 0..16u64 {
            reward.insert(RunValue::Nat(k), rat_u(k));
        }
        let report = check_factorization(&t, &reward, 16).unwrap();
        assert!(report.equal, "discrepancy {}", report.discrepancy);
        assert_eq!(report.discrepancy, rat(0, 1));
        // pre = ec + E[value]: ec_16 = 2 - 2^-15 and the value distribution
        // puts 2^-(k+1) on k, so E = sum k/2^(k+1) truncated at 15.
        assert_eq!(report.ec, rat(2, 1) - rat(2, 1i64 << 16));
    }

    #[test]
    fn factorization_handles_non_dyadic_weights() {
        let t = parse("x <- rand 3; charge (x); produce x").unwrap();
        let mut reward = Reward::new();
        for k in 0..3u64 {
            reward.insert(RunValue::Nat(k), rat_u(k * k));
        }
        let report = check_factorization(&t, &reward, 5).unwrap();
        assert!(report.equal);
        // E[cost] = (0+1+2)/3 = 1, E[reward] = (0+1+4)/3 = 5/3.
        assert_eq!(report.pre_value, rat(8, 3));
    }
}
