//! The shared depth-bounded evaluation engine.
//!
//! The exact semantics (cost distributions, expected cost, and the support
//! pre-pass behind deep evaluation) interpret programs identically and
//! differ only in the *domain* their results live in.  [`Machine`]
//! implements the one traversal, generic over a [`Dom`]; a domain says what
//! `produce`, `charge`, exhausted recursion, `rand`, sequencing, and
//! probabilistic mixing mean.
//!
//! Recursion depth is the only approximation: `fix` unfolds `depth` times
//! and evaluates to the domain's bottom when exhausted, so results are
//! depth-indexed lower approximations of the program's meaning, monotone in
//! `depth`.
//!
//! Two mechanisms keep the state space tractable:
//!
//! - every `fix` term is interned and every `(fix, depth, arguments)` triple
//!   memoised, collapsing the exponentially many probabilistic paths into
//!   the set of distinct call states;
//! - for very deep evaluations, [`eval_layered`] first discovers the
//!   reachable call states in the cheap support domain, then recomputes
//!   them in the target domain bottom-up one depth layer at a time.  A
//!   layer's recursive calls resolve by lookup in the previous layer — the
//!   unfolding of `fix` is the only place evaluation crosses from one depth
//!   to the next — so only two layers of results are ever live, instead of
//!   a memo table proportional to `depth`.
//!
//! The traversal grows its own stack on demand as the unfolding chain
//! deepens, so callers do not need oversized threads.

use std::collections::{BTreeMap, HashMap};
use std::marker::PhantomData;
use std::rc::Rc;

use num::{One, Zero};

use crate::rational::Rat;
use crate::syntax::ast::{CompTerm, ValueTerm};
use crate::syntax::subst::{apply_closed_comp, subst_closed_comp, Subst};
use crate::value::{
    cost_amount, expect_no_args, primop_apply, quote, value_eval, EvalError, RunValue,
};

/// Largest `rand n` modulus the exact engines will enumerate.
pub const RAND_ENUM_LIMIT: u64 = 1 << 22;

/// Head-room the recursive walk keeps in hand before growing the stack, and
/// the size of each segment it grows by.
const STACK_RED_ZONE: usize = 128 * 1024;
const STACK_SEGMENT: usize = 16 * 1024 * 1024;

/// A semantic domain for computations of returner type.
///
/// All operations are pure on the domain side; the machine owns every bit of
/// mutable state (interning and memo tables).
pub(crate) trait Dom {
    /// The meaning of a computation of returner type.
    type Out: Clone;

    /// Recursion exhausted: the least element.
    fn bottom() -> Self::Out;
    /// `produce v`.
    fn pure(v: RunValue) -> Self::Out;
    /// `charge(c)`: spend `c`, return `()`.
    fn charge(c: u64) -> Self::Out;
    /// `rand m` for `m >= 1`: uniform on `{0, ..., m-1}`.
    fn uniform_nat(m: u64) -> Self::Out;
    /// `x <- left; ...`: run the continuation for each value `left` can
    /// return and combine the results.
    fn bind(
        left: &Self::Out,
        cont: &mut dyn FnMut(&RunValue) -> Result<Self::Out, EvalError>,
    ) -> Result<Self::Out, EvalError>;
    /// `choose p { l } { r }`: mix with weights `p` and `1 - p`.  `l` is
    /// present iff `p > 0`, `r` iff `p < 1`.
    fn mix(p: &Rat, l: Option<Self::Out>, r: Option<Self::Out>) -> Self::Out;
}

/// Interning of `fix` terms: structural the first time a term is seen,
/// by address afterwards.
///
/// The address index is sound because every address it stores is pinned by a
/// strong reference (`canon` or `pinned`) for the table's whole lifetime, so
/// the allocator cannot reuse it.  Unfoldings substitute the canonical
/// shared term, so after the first unfolding of a given `fix` every `force`
/// of it hits the address index and no structural hashing happens.
#[derive(Default)]
struct FixTable {
    by_term: HashMap<CompTerm, u32>,
    by_addr: HashMap<usize, u32>,
    canon: Vec<Rc<CompTerm>>,
    pinned: Vec<Rc<CompTerm>>,
}

impl FixTable {
    fn id_of_term(&mut self, t: &CompTerm) -> u32 {
        if let Some(&id) = self.by_term.get(t) {
            return id;
        }
        let id = self.canon.len() as u32;
        let rc = Rc::new(t.clone());
        self.by_addr.insert(Rc::as_ptr(&rc) as usize, id);
        self.canon.push(rc);
        self.by_term.insert(t.clone(), id);
        id
    }

    fn id_of_rc(&mut self, rc: &Rc<CompTerm>) -> u32 {
        let addr = Rc::as_ptr(rc) as usize;
        if let Some(&id) = self.by_addr.get(&addr) {
            return id;
        }
        let id = self.id_of_term(rc);
        self.by_addr.insert(addr, id);
        self.pinned.push(Rc::clone(rc));
        id
    }
}

/// Interners for recursion states.  Shared between the passes of a layered
/// evaluation so that state identifiers agree.
#[derive(Default)]
struct Tables {
    fixes: FixTable,
    arg_ids: HashMap<Vec<RunValue>, u32>,
    args_by_id: Vec<Vec<RunValue>>,
}

impl Tables {
    fn arg_id(&mut self, args: &[RunValue]) -> u32 {
        if let Some(&id) = self.arg_ids.get(args) {
            return id;
        }
        let id = self.args_by_id.len() as u32;
        self.arg_ids.insert(args.to_vec(), id);
        self.args_by_id.push(args.to_vec());
        id
    }
}

/// A recursion state: interned `fix` term, remaining depth, interned
/// pending arguments.
type StateKey = (u32, u64, u32);

/// The depth-bounded evaluator over a domain `D`.
pub(crate) struct Machine<D: Dom> {
    tables: Tables,
    memo: HashMap<StateKey, D::Out>,
    /// `Some((d, table))` puts the machine in layered lookup mode: a
    /// recursive call at depth `d` resolves from `table` instead of
    /// descending.  Layered evaluation only ever demands depth `d`.
    layer: Option<(u64, HashMap<(u32, u32), D::Out>)>,
    _domain: PhantomData<D>,
}

impl<D: Dom> Machine<D> {
    pub(crate) fn new() -> Self {
        Machine {
            tables: Tables::default(),
            memo: HashMap::new(),
            layer: None,
            _domain: PhantomData,
        }
    }

    pub(crate) fn eval(
        &mut self,
        t: &CompTerm,
        depth: u64,
        args: Vec<RunValue>,
    ) -> Result<D::Out, EvalError> {
        self.go(t, depth, args)
    }

    fn go(&mut self, t: &CompTerm, depth: u64, args: Vec<RunValue>) -> Result<D::Out, EvalError> {
        stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || self.step(t, depth, args))
    }

    fn step(
        &mut self,
        t: &CompTerm,
        depth: u64,
        mut args: Vec<RunValue>,
    ) -> Result<D::Out, EvalError> {
        match t {
            CompTerm::Produce(v) => {
                expect_no_args(&args, "produce")?;
                Ok(D::pure(value_eval(v)?))
            }
            CompTerm::Lam(x, _, body) => match args.pop() {
                Some(a) => self.go(&subst_closed_comp(body, x, &quote(&a)), depth, args),
                None => Err(EvalError::UnappliedFunction),
            },
            CompTerm::App(f, v) => {
                args.push(value_eval(v)?);
                self.go(f, depth, args)
            }
            CompTerm::Force(v) => match value_eval(v)? {
                RunValue::Thunk(rc) => {
                    if matches!(&*rc, CompTerm::Fix(..)) {
                        let id = self.tables.fixes.id_of_rc(&rc);
                        self.run_fix(id, depth, args)
                    } else {
                        self.go(&rc, depth, args)
                    }
                }
                _ => Err(EvalError::ForceNonThunk),
            },
            CompTerm::Bind(x, t1, t2) => {
                let left = self.go(t1, depth, Vec::new())?;
                D::bind(&left, &mut |v| {
                    self.go(&subst_closed_comp(t2, x, &quote(v)), depth, args.clone())
                })
            }
            CompTerm::LetVal(x, v, body) => {
                let rv = value_eval(v)?;
                self.go(&subst_closed_comp(body, x, &quote(&rv)), depth, args)
            }
            CompTerm::IfZero(v, t1, t2) => match value_eval(v)? {
                RunValue::Nat(0) => self.go(t1, depth, args),
                RunValue::Nat(_) => self.go(t2, depth, args),
                _ => Err(EvalError::Stuck("if0 on a non-number")),
            },
            CompTerm::Unpair(x, y, v, body) => match value_eval(v)? {
                RunValue::Pair(a, b) => {
                    let mut sub = Subst::new();
                    sub.insert(x.clone(), quote(&a));
                    sub.insert(y.clone(), quote(&b));
                    self.go(&apply_closed_comp(body, &sub), depth, args)
                }
                _ => Err(EvalError::Stuck("unpair on a non-pair")),
            },
            CompTerm::CaseList(v, nil_t, h, tl, cons_t) => match value_eval(v)? {
                RunValue::List(xs) => {
                    if let Some((head, rest)) = xs.split_first() {
                        let mut sub = Subst::new();
                        sub.insert(h.clone(), quote(head));
                        sub.insert(tl.clone(), quote(&RunValue::List(rest.to_vec())));
                        self.go(&apply_closed_comp(cons_t, &sub), depth, args)
                    } else {
                        self.go(nil_t, depth, args)
                    }
                }
                _ => Err(EvalError::Stuck("case on a non-list")),
            },
            CompTerm::Charge(v) => {
                expect_no_args(&args, "charge")?;
                let c = cost_amount(&value_eval(v)?)?;
                Ok(D::charge(c))
            }
            CompTerm::Uniform => Err(EvalError::ContinuousUnsupported),
            CompTerm::RandNat(v) => {
                expect_no_args(&args, "rand")?;
                match value_eval(v)? {
                    RunValue::Nat(0) => Ok(D::pure(RunValue::Nat(0))),
                    RunValue::Nat(m) if m <= RAND_ENUM_LIMIT => Ok(D::uniform_nat(m)),
                    RunValue::Nat(m) => Err(EvalError::RandTooLarge(m)),
                    _ => Err(EvalError::Stuck("rand on a non-number")),
                }
            }
            CompTerm::Choose(p, t1, t2) => {
                let l = if !p.is_zero() {
                    Some(self.go(t1, depth, args.clone())?)
                } else {
                    None
                };
                let q = Rat::one() - p;
                let r = if !q.is_zero() {
                    Some(self.go(t2, depth, args)?)
                } else {
                    None
                };
                Ok(D::mix(p, l, r))
            }
            CompTerm::Fix(..) => {
                if depth == 0 {
                    return Ok(D::bottom());
                }
                let id = self.tables.fixes.id_of_term(t);
                self.run_fix(id, depth, args)
            }
            CompTerm::PrimOp(op, operands) => {
                expect_no_args(&args, "operator call")?;
                let mut vals = Vec::with_capacity(operands.len());
                for a in operands {
                    vals.push(value_eval(a)?);
                }
                Ok(D::pure(primop_apply(*op, &vals)?))
            }
        }
    }

    fn run_fix(&mut self, id: u32, depth: u64, args: Vec<RunValue>) -> Result<D::Out, EvalError> {
        if depth == 0 {
            return Ok(D::bottom());
        }
        let aid = self.tables.arg_id(&args);
        if let Some((ld, table)) = &self.layer {
            assert_eq!(
                depth, *ld,
                "layered evaluation demanded a recursion depth outside the current layer"
            );
            let out = table
                .get(&(id, aid))
                .expect("layered evaluation missing a call state found by the discovery pass");
            return Ok(out.clone());
        }
        let key = (id, depth, aid);
        if let Some(out) = self.memo.get(&key) {
            return Ok(out.clone());
        }
        let rc = Rc::clone(&self.tables.fixes.canon[id as usize]);
        let CompTerm::Fix(f, _, body) = &*rc else {
            unreachable!("fix table holds only fix terms")
        };
        let unrolled = ValueTerm::Thunk(Rc::clone(&rc));
        let out = self.go(&subst_closed_comp(body, f, &unrolled), depth - 1, args)?;
        self.memo.insert(key, out.clone());
        Ok(out)
    }
}

/// One-shot evaluation in domain `D` with a fresh machine.
pub(crate) fn eval_dfs<D: Dom>(
    t: &CompTerm,
    depth: u64,
    args: Vec<RunValue>,
) -> Result<D::Out, EvalError> {
    Machine::<D>::new().eval(t, depth, args)
}

/// Evaluation in domain `D` that holds only two depth layers of recursion
/// states live at a time.
///
/// Pass 1 evaluates in the support domain, whose memo table records every
/// reachable `(fix, depth, arguments)` state.  Because all mixing weights
/// are positive and both passes prune zero-weight branches syntactically,
/// the support-domain value sets equal the value supports in any exact
/// domain, so pass 1 discovers exactly the states pass 2 needs.
///
/// Pass 2 recomputes the states bottom-up by depth layer.  A state at layer
/// `x` evaluates the unfolded body at depth `x - 1`, and the only construct
/// that moves between depths is the unfolding of `fix`, so every recursive
/// call inside that evaluation demands layer `x - 1` — available by lookup.
/// Equal outputs to [`eval_dfs`] follow by induction over layers.
pub(crate) fn eval_layered<D: Dom>(t: &CompTerm, depth: u64) -> Result<D::Out, EvalError> {
    let mut sup: Machine<SupportDom> = Machine::new();
    sup.eval(t, depth, Vec::new())?;

    let mut by_layer: BTreeMap<u64, Vec<(u32, u32)>> = BTreeMap::new();
    for &(fid, d, aid) in sup.memo.keys() {
        by_layer.entry(d).or_default().push((fid, aid));
    }
    let Machine { tables, .. } = sup;

    let mut m: Machine<D> = Machine {
        tables,
        memo: HashMap::new(),
        layer: None,
        _domain: PhantomData,
    };
    let mut prev: HashMap<(u32, u32), D::Out> = HashMap::new();
    for x in 1..=depth {
        let states = by_layer.remove(&x).unwrap_or_default();
        let mut cur = HashMap::with_capacity(states.len());
        m.layer = Some((x - 1, prev));
        for (fid, aid) in states {
            let rc = Rc::clone(&m.tables.fixes.canon[fid as usize]);
            let CompTerm::Fix(f, _, body) = &*rc else {
                unreachable!("fix table holds only fix terms")
            };
            let unrolled = ValueTerm::Thunk(Rc::clone(&rc));
            let args = m.tables.args_by_id[aid as usize].clone();
            let out = m.go(&subst_closed_comp(body, f, &unrolled), x - 1, args)?;
            cur.insert((fid, aid), out);
        }
        prev = cur;
    }
    m.layer = Some((depth, prev));
    m.go(t, depth, Vec::new())
}

/// The support domain: the set of values a computation can return, ignoring
/// weights and costs.  Sets are sorted, deduplicated, and shared; the
/// overwhelmingly common singleton results propagate without allocation.
pub(crate) struct SupportDom;

impl Dom for SupportDom {
    type Out = Rc<Vec<RunValue>>;

    fn bottom() -> Self::Out {
        Rc::new(Vec::new())
    }

    fn pure(v: RunValue) -> Self::Out {
        Rc::new(vec![v])
    }

    fn charge(_c: u64) -> Self::Out {
        Rc::new(vec![RunValue::Unit])
    }

    fn uniform_nat(m: u64) -> Self::Out {
        Rc::new((0..m).map(RunValue::Nat).collect())
    }

    fn bind(
        left: &Self::Out,
        cont: &mut dyn FnMut(&RunValue) -> Result<Self::Out, EvalError>,
    ) -> Result<Self::Out, EvalError> {
        match left.len() {
            0 => Ok(Rc::new(Vec::new())),
            1 => cont(&left[0]),
            _ => {
                let mut acc: Vec<RunValue> = Vec::new();
                for v in left.iter() {
                    acc.extend(cont(v)?.iter().cloned());
                }
                acc.sort();
                acc.dedup();
                Ok(Rc::new(acc))
            }
        }
    }

    fn mix(_p: &Rat, l: Option<Self::Out>, r: Option<Self::Out>) -> Self::Out {
        match (l, r) {
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => Rc::new(Vec::new()),
            (Some(a), Some(b)) => {
                if Rc::ptr_eq(&a, &b) || a == b {
                    a
                } else {
                    let mut acc = (*a).clone();
                    acc.extend(b.iter().cloned());
                    acc.sort();
                    acc.dedup();
                    Rc::new(acc)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn support_of(src: &str, depth: u64) -> Vec<RunValue> {
        let t = parse(src).unwrap();
        let s = eval_dfs::<SupportDom>(&t, depth, Vec::new()).unwrap();
        (*s).clone()
    }

    #[test]
    fn support_of_geometric_counts_unfoldings() {
        let src = "fix go : F Nat. choose 1/2 { produce 0 } { y <- force go; n <- succ(y); produce n }";
        assert_eq!(support_of(src, 1), vec![RunValue::Nat(0)]);
        assert_eq!(
            support_of(src, 3),
            vec![RunValue::Nat(0), RunValue::Nat(1), RunValue::Nat(2)]
        );
    }

    #[test]
    fn support_of_bottom_is_empty() {
        assert!(support_of("fix d : F Nat. force d", 64).is_empty());
    }

    #[test]
    fn zero_weight_branches_are_pruned() {
        let src = "choose 1 { produce 1 } { x <- rand 1000000000000; produce x }";
        // The right branch would be rejected (modulus too large) if visited.
        assert_eq!(support_of(src, 4), vec![RunValue::Nat(1)]);
    }

    #[test]
    fn layered_support_matches_dfs() {
        let src = "fix go : F Nat. choose 1/3 { produce 0 } { y <- force go; n <- succ(y); produce n }";
        let t = parse(src).unwrap();
        for depth in [0, 1, 2, 5, 17] {
            let a = eval_dfs::<SupportDom>(&t, depth, Vec::new()).unwrap();
            let b = eval_layered::<SupportDom>(&t, depth).unwrap();
            assert_eq!(a, b, "depth {depth}");
        }
    }
}
