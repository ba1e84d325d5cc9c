//! Seeded Monte-Carlo execution of programs under a fuelled operational
//! semantics.
//!
//! Fuel bounds the *nesting depth* of the evaluation derivation rather than
//! acting as a threaded step counter:
//!
//! - terminals (`produce v`, a lambda) need no fuel at all;
//! - `charge`, `force`, `let`, `if0`, `choose`, `uniform`, `rand`, and
//!   operator calls run their continuation at the same fuel;
//! - application, `<-` sequencing, `fix`, `unpair`, and both arms of `case`
//!   require fuel `>= 1` and run the continuation (or unfolded body) at
//!   fuel - 1, while the scrutinised sub-computation of an application or a
//!   sequencing runs at the *same* fuel.
//!
//! Consequently a run that terminates at fuel `n` makes exactly the same
//! random draws and returns exactly the same outcome at every fuel `>= n`:
//! raising fuel only ever converts `OutOfFuel` into longer runs.
//!
//! Randomness comes from a ChaCha stream cipher.  `uniform` returns the
//! dyadic rational `k / 2^53` for a 53-bit draw `k`, so sampled reals are
//! exact and reproducible; `choose p` takes the left branch iff
//! `k < floor(p * 2^53)`, which is exact for dyadic `p` and within `2^-53`
//! otherwise.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::rational::{rat_u, Rat};
use crate::syntax::ast::{CompTerm, ValueTerm};
use crate::syntax::subst::{apply_comp, substitute_comp, Subst};
use crate::value::{cost_amount, primop_apply, quote, value_eval, EvalError, RunValue};

/// Number of mantissa bits used for `uniform` and `choose` draws.
pub const DRAW_BITS: u32 = 53;

/// How a single run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// Reached `produce v`.
    Returned(RunValue),
    /// Reached a lambda (the program has an arrow type).
    Fun(CompTerm),
    /// Hit a fuel-consuming construct with no fuel left.
    OutOfFuel,
}

/// Result of one run: accumulated cost, nesting depth actually used, and how
/// the run ended.  For an `OutOfFuel` run the cost covers only the charges
/// made before the cutoff, so it is a lower bound on the cost of the
/// completed run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub cost: u64,
    pub steps_used: u64,
    pub outcome: Outcome,
}

impl RunOutcome {
    pub fn terminated(&self) -> bool {
        !matches!(self.outcome, Outcome::OutOfFuel)
    }
}

enum Frame {
    App { arg: ValueTerm, resume_fuel: u64 },
    Bind { var: String, body: CompTerm, resume_fuel: u64 },
}

fn draw53<R: Rng>(rng: &mut R) -> u64 {
    rng.next_u64() >> (64 - DRAW_BITS)
}

/// Left-branch threshold for `choose p`: `floor(p * 2^53)`, clamped to the
/// draw range.
fn choose_threshold(p: &Rat) -> u64 {
    use num::{BigInt, Zero};
    let scaled = p * rat_u(1u64 << DRAW_BITS);
    let floored = scaled.floor().to_integer();
    if floored <= BigInt::zero() {
        0
    } else {
        u64::try_from(floored).unwrap_or(1 << DRAW_BITS)
    }
}

/// Run `t` once with the given fuel, consuming randomness from `rng`.
pub fn run_once<R: Rng>(t: &CompTerm, fuel: u64, rng: &mut R) -> Result<RunOutcome, EvalError> {
    let mut cur = t.clone();
    let mut n = fuel;
    let mut min_fuel = fuel;
    let mut cost: u64 = 0;
    let mut stack: Vec<Frame> = Vec::new();

    loop {
        min_fuel = min_fuel.min(n);
        match cur {
            // Terminals: unwind into the enclosing frame, or finish.
            CompTerm::Produce(v) => {
                let rv = value_eval(&v)?;
                match stack.pop() {
                    None => {
                        return Ok(RunOutcome {
                            cost,
                            steps_used: fuel - min_fuel,
                            outcome: Outcome::Returned(rv),
                        })
                    }
                    Some(Frame::Bind { var, body, resume_fuel }) => {
                        cur = substitute_comp(&body, &var, &quote(&rv));
                        n = resume_fuel;
                    }
                    Some(Frame::App { .. }) => {
                        return Err(EvalError::Stuck("applied a computation that returns"))
                    }
                }
            }
            CompTerm::Lam(x, ann, body) => match stack.pop() {
                None => {
                    return Ok(RunOutcome {
                        cost,
                        steps_used: fuel - min_fuel,
                        outcome: Outcome::Fun(CompTerm::Lam(x, ann, body)),
                    })
                }
                Some(Frame::App { arg, resume_fuel }) => {
                    let rv = value_eval(&arg)?;
                    cur = substitute_comp(&body, &x, &quote(&rv));
                    n = resume_fuel;
                }
                Some(Frame::Bind { .. }) => {
                    return Err(EvalError::Stuck("sequenced into a function"))
                }
            },

            // Fuel-consuming constructs.
            CompTerm::App(t, arg) => {
                if n == 0 {
                    return Ok(out_of_fuel(cost, fuel));
                }
                stack.push(Frame::App { arg, resume_fuel: n - 1 });
                cur = *t;
            }
            CompTerm::Bind(x, t, u) => {
                if n == 0 {
                    return Ok(out_of_fuel(cost, fuel));
                }
                stack.push(Frame::Bind { var: x, body: *u, resume_fuel: n - 1 });
                cur = *t;
            }
            CompTerm::Fix(f, _, body) => {
                if n == 0 {
                    return Ok(out_of_fuel(cost, fuel));
                }
                let unrolled = ValueTerm::Thunk(Rc::new(CompTerm::Fix(
                    f.clone(),
                    None,
                    body.clone(),
                )));
                cur = substitute_comp(&body, &f, &unrolled);
                n -= 1;
            }
            CompTerm::Unpair(x, y, v, t) => {
                if n == 0 {
                    return Ok(out_of_fuel(cost, fuel));
                }
                match value_eval(&v)? {
                    RunValue::Pair(a, b) => {
                        let mut sub = Subst::new();
                        sub.insert(x, quote(&a));
                        sub.insert(y, quote(&b));
                        cur = apply_comp(&t, &sub);
                        n -= 1;
                    }
                    _ => return Err(EvalError::Stuck("unpair on a non-pair")),
                }
            }
            CompTerm::CaseList(v, nil_t, h, tl, cons_t) => {
                if n == 0 {
                    return Ok(out_of_fuel(cost, fuel));
                }
                match value_eval(&v)? {
                    RunValue::List(xs) => {
                        if let Some((head, rest)) = xs.split_first() {
                            let mut sub = Subst::new();
                            sub.insert(h, quote(head));
                            sub.insert(tl, quote(&RunValue::List(rest.to_vec())));
                            cur = apply_comp(&cons_t, &sub);
                        } else {
                            cur = *nil_t;
                        }
                        n -= 1;
                    }
                    _ => return Err(EvalError::Stuck("case on a non-list")),
                }
            }

            // Fuel-free steps.
            CompTerm::Force(v) => match value_eval(&v)? {
                RunValue::Thunk(t) => {
                    cur = Rc::try_unwrap(t).unwrap_or_else(|rc| (*rc).clone());
                }
                _ => return Err(EvalError::ForceNonThunk),
            },
            CompTerm::LetVal(x, v, t) => {
                let rv = value_eval(&v)?;
                cur = substitute_comp(&t, &x, &quote(&rv));
            }
            CompTerm::IfZero(v, t, u) => match value_eval(&v)? {
                RunValue::Nat(0) => cur = *t,
                RunValue::Nat(_) => cur = *u,
                _ => return Err(EvalError::Stuck("if0 on a non-number")),
            },
            CompTerm::Charge(v) => {
                let amount = cost_amount(&value_eval(&v)?)?;
                cost = cost
                    .checked_add(amount)
                    .ok_or(EvalError::Overflow("charge"))?;
                cur = CompTerm::Produce(ValueTerm::UnitLit);
            }
            CompTerm::Uniform => {
                let k = draw53(rng);
                let q = rat_u(k) / rat_u(1u64 << DRAW_BITS);
                cur = CompTerm::Produce(ValueTerm::RealLit(q));
            }
            CompTerm::RandNat(v) => match value_eval(&v)? {
                RunValue::Nat(0) => cur = CompTerm::Produce(ValueTerm::NatLit(0)),
                RunValue::Nat(m) => {
                    let k = rng.gen_range(0..m);
                    cur = CompTerm::Produce(ValueTerm::NatLit(k));
                }
                _ => return Err(EvalError::Stuck("rand on a non-number")),
            },
            CompTerm::Choose(p, t, u) => {
                let k = draw53(rng);
                cur = if k < choose_threshold(&p) { *t } else { *u };
            }
            CompTerm::PrimOp(op, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in &args {
                    vals.push(value_eval(a)?);
                }
                let out = primop_apply(op, &vals)?;
                cur = CompTerm::Produce(quote(&out));
            }
        }
    }
}

fn out_of_fuel(cost: u64, fuel: u64) -> RunOutcome {
    RunOutcome {
        cost,
        // Running out means the whole fuel allowance was consumed.
        steps_used: fuel,
        outcome: Outcome::OutOfFuel,
    }
}

/// RNG for run number `index` of a batch seeded with `seed`.  Each run gets
/// its own ChaCha stream, so batches can be split across threads and still
/// reproduce the single-threaded results run for run.
pub fn rng_for_run(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Run `t` once with the RNG a batch would use for its first run.
pub fn run_with_seed(t: &CompTerm, fuel: u64, seed: u64) -> Result<RunOutcome, EvalError> {
    run_once(t, fuel, &mut rng_for_run(seed, 0))
}

/// Aggregated statistics over a batch of runs.  The cost sums are exact
/// integers, so merging partial batches is exact and order-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub samples: u64,
    pub terminated: u64,
    pub out_of_fuel: u64,
    pub sum_cost: u128,
    pub sum_cost_sq: u128,
    pub min_cost: u64,
    pub max_cost: u64,
    pub max_steps: u64,
}

impl Estimate {
    pub fn empty() -> Self {
        Estimate {
            samples: 0,
            terminated: 0,
            out_of_fuel: 0,
            sum_cost: 0,
            sum_cost_sq: 0,
            min_cost: u64::MAX,
            max_cost: 0,
            max_steps: 0,
        }
    }

    fn record(&mut self, run: &RunOutcome) -> Result<(), EvalError> {
        self.samples += 1;
        if run.terminated() {
            self.terminated += 1;
        } else {
            self.out_of_fuel += 1;
        }
        let c = run.cost as u128;
        self.sum_cost = self
            .sum_cost
            .checked_add(c)
            .ok_or(EvalError::Overflow("cost sum"))?;
        self.sum_cost_sq = self
            .sum_cost_sq
            .checked_add(c * c)
            .ok_or(EvalError::Overflow("cost sum of squares"))?;
        self.min_cost = self.min_cost.min(run.cost);
        self.max_cost = self.max_cost.max(run.cost);
        self.max_steps = self.max_steps.max(run.steps_used);
        Ok(())
    }

    /// Combine two disjoint batches.
    pub fn merge(&self, other: &Estimate) -> Result<Estimate, EvalError> {
        Ok(Estimate {
            samples: self.samples + other.samples,
            terminated: self.terminated + other.terminated,
            out_of_fuel: self.out_of_fuel + other.out_of_fuel,
            sum_cost: self
                .sum_cost
                .checked_add(other.sum_cost)
                .ok_or(EvalError::Overflow("cost sum"))?,
            sum_cost_sq: self
                .sum_cost_sq
                .checked_add(other.sum_cost_sq)
                .ok_or(EvalError::Overflow("cost sum of squares"))?,
            min_cost: self.min_cost.min(other.min_cost),
            max_cost: self.max_cost.max(other.max_cost),
            max_steps: self.max_steps.max(other.max_steps),
        })
    }

    /// Mean accumulated cost over *all* runs, including the partial costs of
    /// runs that ran out of fuel.
    pub fn mean(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        self.mean_rat()
            .map(|q| crate::rational::rat_to_f64(&q))
            .unwrap_or(0.0)
    }

    pub fn mean_rat(&self) -> Option<Rat> {
        if self.samples == 0 {
            return None;
        }
        Some(Rat::new(self.sum_cost.into(), u128::from(self.samples).into()))
    }

    /// Unbiased sample variance of the per-run cost.
    pub fn sample_variance(&self) -> f64 {
        if self.samples < 2 {
            return 0.0;
        }
        let n = Rat::from_integer(u128::from(self.samples).into());
        let s1 = Rat::from_integer(self.sum_cost.into());
        let s2 = Rat::from_integer(self.sum_cost_sq.into());
        let var = (s2 - &s1 * &s1 / &n) / (&n - Rat::from_integer(1.into()));
        crate::rational::rat_to_f64(&var).max(0.0)
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        (self.sample_variance() / self.samples as f64).sqrt()
    }

    pub fn ci95(&self) -> (f64, f64) {
        let m = self.mean();
        let half = 1.96 * self.stderr();
        (m - half, m + half)
    }

    pub fn termination_rate(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        self.terminated as f64 / self.samples as f64
    }
}

/// Run a batch of `samples` seeded runs and aggregate the costs.
pub fn estimate(t: &CompTerm, fuel: u64, samples: u64, seed: u64) -> Result<Estimate, EvalError> {
    estimate_range(t, fuel, seed, 0, samples)
}

fn estimate_range(
    t: &CompTerm,
    fuel: u64,
    seed: u64,
    start: u64,
    end: u64,
) -> Result<Estimate, EvalError> {
    let mut acc = Estimate::empty();
    for i in start..end {
        let run = run_once(t, fuel, &mut rng_for_run(seed, i))?;
        acc.record(&run)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse;

    fn geometric() -> CompTerm {
        parse("fix go. choose 1/2 { produce 0 } { charge (cost 1); y <- force go; succ(y) }")
            .unwrap()
    }

    #[test]
    fn terminals_need_no_fuel() {
        let t = parse("produce 42").unwrap();
        let run = run_with_seed(&t, 0, 7).unwrap();
        assert_eq!(run.outcome, Outcome::Returned(RunValue::Nat(42)));
        assert_eq!(run.cost, 0);
        assert_eq!(run.steps_used, 0);
    }

    #[test]
    fn charge_accumulates_without_fuel() {
        let t = parse("charge (cost 3)").unwrap();
        let run = run_with_seed(&t, 0, 7).unwrap();
        assert_eq!(run.outcome, Outcome::Returned(RunValue::Unit));
        assert_eq!(run.cost, 3);
    }

    #[test]
    fn geometric_at_fuel_one_terminates_only_via_left_branch() {
        let t = geometric();
        let mut left = 0u32;
        let mut cut = 0u32;
        for i in 0..2000 {
            let run = run_once(&t, 1, &mut rng_for_run(11, i)).unwrap();
            match run.outcome {
                Outcome::Returned(RunValue::Nat(0)) => left += 1,
                Outcome::OutOfFuel => cut += 1,
                other => panic!("unexpected outcome {other:?}"),
            }
        }
        assert_eq!(left + cut, 2000);
        // P(left) = 1/2; 2000 draws stay well inside 5 sigma of 1000.
        assert!((left as f64 - 1000.0).abs() < 5.0 * (2000.0f64 * 0.25).sqrt());
    }

    #[test]
    fn more_fuel_reproduces_terminated_runs_exactly() {
        let t = geometric();
        for i in 0..200 {
            let lo = run_once(&t, 30, &mut rng_for_run(3, i)).unwrap();
            let hi = run_once(&t, 1000, &mut rng_for_run(3, i)).unwrap();
            if lo.terminated() {
                assert_eq!(lo, hi);
            } else {
                assert!(hi.cost >= lo.cost);
            }
        }
    }

    #[test]
    fn geometric_mean_cost_is_near_one() {
        let t = geometric();
        let est = estimate(&t, 500, 4000, 42).unwrap();
        assert_eq!(est.out_of_fuel, 0);
        // E[cost] = 1, Var = 2: stay within 5 sigma.
        assert!((est.mean() - 1.0).abs() < 5.0 * (2.0f64 / 4000.0).sqrt());
    }

    #[test]
    fn batch_splitting_does_not_change_the_estimate() {
        // Every run draws from its own RNG stream, so estimates merge
        // exactly no matter how the index range is partitioned.
        let t = geometric();
        let whole = estimate(&t, 100, 1111, 9).unwrap();
        let front = estimate_range(&t, 100, 9, 0, 300).unwrap();
        let back = estimate_range(&t, 100, 9, 300, 1111).unwrap();
        assert_eq!(whole, front.merge(&back).unwrap());
    }

    #[test]
    fn choose_threshold_is_exact_at_the_endpoints() {
        assert_eq!(choose_threshold(&crate::rational::rat(0, 1)), 0);
        assert_eq!(choose_threshold(&crate::rational::rat(1, 1)), 1 << DRAW_BITS);
        assert_eq!(
            choose_threshold(&crate::rational::rat(1, 2)),
            1 << (DRAW_BITS - 1)
        );
    }

    #[test]
    fn uniform_draws_are_dyadic_and_seed_stable() {
        let t = parse("x <- uniform; produce x").unwrap();
        let a = run_with_seed(&t, 5, 123).unwrap();
        let b = run_with_seed(&t, 5, 123).unwrap();
        assert_eq!(a, b);
        match a.outcome {
            Outcome::Returned(RunValue::Real(q)) => {
                let denom = q.denom();
                // Denominator divides 2^53.
                assert_eq!((1u64 << DRAW_BITS) % u64::try_from(denom).unwrap(), 0);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn application_and_fix_consume_fuel() {
        let t = parse("(\\x. produce x) 5").unwrap();
        let run0 = run_with_seed(&t, 0, 1).unwrap();
        assert_eq!(run0.outcome, Outcome::OutOfFuel);
        let run1 = run_with_seed(&t, 1, 1).unwrap();
        assert_eq!(run1.outcome, Outcome::Returned(RunValue::Nat(5)));
        assert_eq!(run1.steps_used, 1);

        let diverge = parse("fix x : F Nat. force x").unwrap();
        let run = run_with_seed(&diverge, 10_000, 1).unwrap();
        assert_eq!(run.outcome, Outcome::OutOfFuel);
        assert_eq!(run.steps_used, 10_000);
    }

    #[test]
    fn factorial_of_five_costs_six_calls() {
        let fact = "(fix f : Nat -> F Nat. \\n. charge (cost 1); \
                    if0 n then produce 1 else (p <- pred(n); m <- force f p; mul(n, m)))";
        let t = parse(&format!("{fact} 5")).unwrap();
        let run = run_with_seed(&t, 100, 1).unwrap();
        assert_eq!(run.outcome, Outcome::Returned(RunValue::Nat(120)));
        assert_eq!(run.cost, 6);
    }
}
