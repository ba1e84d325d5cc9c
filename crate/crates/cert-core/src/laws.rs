//! The algebraic structure behind the two exact semantics, checkable on
//! finite data.
//!
//! Both result types carry a monad structure:
//!
//! - [`SubDist`], subdistributions over (cost, value) pairs: the unit puts a
//!   point mass at cost 0, and bind runs a kernel on each value, shifting
//!   its costs by the cost already spent ([`dist_unit`], [`dist_bind`]);
//! - [`ECPair`], an expected cost paired with a value subdistribution: the
//!   unit is (0, point mass), and bind adds the left expected cost to the
//!   average of the kernel's expected costs ([`ec_unit`], [`ec_bind`]).
//!
//! [`expectation`] maps the first structure to the second by taking the
//! expected cost of the cost marginal and forgetting costs in the value
//! marginal.  On probability distributions (mass exactly 1, total kernels)
//! it commutes with unit and bind; on subdistributions it does not — a
//! two-point distribution and a kernel that drops all its mass witness the
//! failure, because the left side forgets cost spent on vanished mass while
//! the right side keeps it.  [`monad_law_suite`] checks the monad laws, the
//! linearity of expectation under kernel averaging, and both sides of that
//! commutation story on seeded generated data, in exact arithmetic; it
//! reports failures rather than panicking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use num::{One, Zero};

use crate::dist::SubDist;
use crate::expected::{ECPair, VDist};
use crate::rational::{dyadic_add_assign, dyadic_mul, rat, Rat};
use crate::value::{EvalError, RunValue};

/// Unit of the cost-distribution monad: all mass on `v` at cost 0.
pub fn dist_unit(v: RunValue) -> SubDist {
    SubDist::point(0, v)
}

/// Bind of the cost-distribution monad: run `f` on each value in the
/// support, shift its costs by the cost already incurred, and mix with the
/// incoming weights.  Fails only if a shifted cost overflows.
pub fn dist_bind<F: FnMut(&RunValue) -> SubDist>(
    m: &SubDist,
    mut f: F,
) -> Result<SubDist, EvalError> {
    let mut out = SubDist::zero();
    for (c, v, p) in m.iter() {
        out.add_shifted(&f(v), c, p)?;
    }
    Ok(out)
}

/// Unit of the expected-cost monad: zero cost, all mass on `v`.
pub fn ec_unit(v: RunValue) -> ECPair {
    ECPair::unit(v)
}

/// Bind of the expected-cost monad: the left expected cost plus the
/// weighted average of the kernel's expected costs, over the bound value
/// distribution.
pub fn ec_bind<F: FnMut(&RunValue) -> ECPair>(m: &ECPair, mut f: F) -> ECPair {
    let mut out = ECPair {
        ec: m.ec.clone(),
        dist: VDist::zero(),
    };
    for (v, p) in m.dist.iter() {
        out.add_weighted(&f(v), p);
    }
    out
}

/// Collapse a cost distribution to (expected cost, value marginal).
pub fn expectation(m: &SubDist) -> ECPair {
    ECPair {
        ec: m.expected_cost(),
        dist: VDist::from_entries(m.value_marginal()),
    }
}

/// One failed check: which law, on which generated instance, and how the
/// two sides differed.
#[derive(Clone, Debug)]
pub struct LawFailure {
    pub law: &'static str,
    pub instance: u64,
    pub detail: String,
}

/// Outcome of [`monad_law_suite`].
#[derive(Clone, Debug)]
pub struct LawSuiteReport {
    /// Generated instances per law family.
    pub instances: u64,
    /// Individual equations checked (all exact-rational comparisons).
    pub checks: u64,
    pub failures: Vec<LawFailure>,
    /// Left side of the pinned subdistribution counterexample:
    /// expectation after dist-bind.
    pub sub_morphism_lhs: ECPair,
    /// Right side: ec-bind after expectation.
    pub sub_morphism_rhs: ECPair,
    /// The two sides differ, as they must: expectation does not commute
    /// with bind once mass can be lost.
    pub sub_morphism_separates: bool,
}

impl LawSuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.sub_morphism_separates
    }
}

const COST_CAP: u64 = 4;

fn pool() -> Vec<RunValue> {
    vec![
        RunValue::Unit,
        RunValue::Nat(0),
        RunValue::Nat(1),
        RunValue::Nat(2),
        RunValue::Nat(3),
        RunValue::Pair(Box::new(RunValue::Nat(0)), Box::new(RunValue::Nat(1))),
        RunValue::List(vec![RunValue::Nat(1), RunValue::Nat(2)]),
    ]
}

/// A small random weight a/24 with a ≤ 6, so that up to four entries stay a
/// subdistribution; denominator 24 keeps thirds in play, not just dyadics.
fn gen_weight(rng: &mut ChaCha12Rng) -> Rat {
    rat(rng.gen_range(0..=6), 24)
}

fn gen_subdist(rng: &mut ChaCha12Rng, pool: &[RunValue]) -> SubDist {
    let mut d = SubDist::zero();
    for _ in 0..rng.gen_range(0..=3u32) {
        let v = pool[rng.gen_range(0..pool.len())].clone();
        d.insert_add(rng.gen_range(0..=COST_CAP), v, &gen_weight(rng));
    }
    d
}

/// A full (mass-1) distribution: at least one entry, scaled to total mass 1.
fn gen_total_dist(rng: &mut ChaCha12Rng, pool: &[RunValue]) -> SubDist {
    loop {
        let d = gen_subdist(rng, pool);
        let mass = d.mass();
        if mass.is_zero() {
            continue;
        }
        let mut total = SubDist::zero();
        total.add_weighted(&d, &(Rat::one() / mass));
        return total;
    }
}

fn gen_kernel(rng: &mut ChaCha12Rng, pool: &[RunValue], total: bool) -> Vec<(RunValue, SubDist)> {
    pool.iter()
        .map(|v| {
            let d = if total {
                gen_total_dist(rng, pool)
            } else {
                gen_subdist(rng, pool)
            };
            (v.clone(), d)
        })
        .collect()
}

fn kernel_apply(kernel: &[(RunValue, SubDist)], v: &RunValue) -> SubDist {
    kernel
        .iter()
        .find(|(u, _)| u == v)
        .map(|(_, d)| d.clone())
        .unwrap_or_else(SubDist::zero)
}

fn gen_ec_pair(rng: &mut ChaCha12Rng, pool: &[RunValue]) -> ECPair {
    let mut dist = VDist::zero();
    for _ in 0..rng.gen_range(0..=3u32) {
        let v = pool[rng.gen_range(0..pool.len())].clone();
        dist.insert_add(v, &gen_weight(rng));
    }
    ECPair {
        ec: rat(rng.gen_range(0..=12), 6),
        dist,
    }
}

fn gen_ec_kernel(rng: &mut ChaCha12Rng, pool: &[RunValue]) -> Vec<(RunValue, ECPair)> {
    pool.iter()
        .map(|v| (v.clone(), gen_ec_pair(rng, pool)))
        .collect()
}

fn ec_kernel_apply(kernel: &[(RunValue, ECPair)], v: &RunValue) -> ECPair {
    kernel
        .iter()
        .find(|(u, _)| u == v)
        .map(|(_, p)| p.clone())
        .unwrap_or_else(ECPair::zero)
}

/// Plain bind on value distributions (no costs): mix `f`'s outputs with the
/// incoming weights.
fn vdist_bind(m: &VDist, f: &[(RunValue, VDist)]) -> VDist {
    let mut out = VDist::zero();
    for (v, p) in m.iter() {
        if let Some((_, d)) = f.iter().find(|(u, _)| u == v) {
            out.add_weighted(d, p);
        }
    }
    out
}

/// Expected value of a distribution over numbers.
fn nat_expectation(d: &VDist) -> Rat {
    let mut e = Rat::zero();
    for (v, p) in d.iter() {
        if let RunValue::Nat(n) = v {
            dyadic_add_assign(&mut e, &dyadic_mul(p, &rat(*n as i64, 1)));
        }
    }
    e
}

/// The pinned witness that [`expectation`] stops being structure-preserving
/// on subdistributions: half the mass sits at cost 1, and the kernel drops
/// every value that mass lands on, so the cost spent on it survives on one
/// side of the equation and not the other.
pub fn sub_morphism_counterexample() -> Result<(ECPair, ECPair), EvalError> {
    let mu = SubDist::from_entries([
        (0, RunValue::Nat(1), rat(1, 2)),
        (1, RunValue::Nat(2), rat(1, 2)),
    ]);
    let f = |v: &RunValue| match v {
        RunValue::Nat(0) => SubDist::from_entries([(0, RunValue::Nat(0), rat(1, 2))]),
        _ => SubDist::zero(),
    };
    let lhs = expectation(&dist_bind(&mu, f)?);
    let rhs = ec_bind(&expectation(&mu), |v| expectation(&f(v)));
    Ok((lhs, rhs))
}

/// Check the monad laws of both structures, the linearity of expectation,
/// and the behaviour of [`expectation`] as a map between them, on `instances`
/// seeded random instances per law.  All comparisons are exact.
pub fn monad_law_suite(seed: u64, instances: u64) -> LawSuiteReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let pool = pool();
    let mut checks = 0u64;
    let mut failures = Vec::new();
    // Generated costs stay far below u64, so shifted binds cannot overflow.
    let bind = |m: &SubDist, f: &dyn Fn(&RunValue) -> SubDist| {
        dist_bind(m, f).expect("generated costs stay tiny")
    };

    for i in 0..instances {
        let mut check = |law: &'static str, ok: bool, detail: String| {
            checks += 1;
            if !ok {
                failures.push(LawFailure {
                    law,
                    instance: i,
                    detail,
                });
            }
        };

        // Cost-distribution monad.
        let mu = gen_subdist(&mut rng, &pool);
        let f = gen_kernel(&mut rng, &pool, false);
        let g = gen_kernel(&mut rng, &pool, false);
        let fk = |v: &RunValue| kernel_apply(&f, v);
        let gk = |v: &RunValue| kernel_apply(&g, v);
        for v in &pool {
            let lhs = bind(&dist_unit(v.clone()), &fk);
            let rhs = fk(v);
            check("dist left unit", lhs == rhs, format!("at value {v:?}"));
        }
        let lhs = bind(&mu, &|v: &RunValue| dist_unit(v.clone()));
        check("dist right unit", lhs == mu, format!("{lhs:?} vs {mu:?}"));
        let lhs = bind(&bind(&mu, &fk), &gk);
        let rhs = bind(&mu, &|v: &RunValue| bind(&fk(v), &gk));
        check("dist associativity", lhs == rhs, format!("{lhs:?} vs {rhs:?}"));

        // Expected-cost monad.
        let m = gen_ec_pair(&mut rng, &pool);
        let ef = gen_ec_kernel(&mut rng, &pool);
        let eg = gen_ec_kernel(&mut rng, &pool);
        let efk = |v: &RunValue| ec_kernel_apply(&ef, v);
        let egk = |v: &RunValue| ec_kernel_apply(&eg, v);
        for v in &pool {
            let lhs = ec_bind(&ec_unit(v.clone()), efk);
            let rhs = efk(v);
            check("ec left unit", lhs == rhs, format!("at value {v:?}"));
        }
        let lhs = ec_bind(&m, |v| ec_unit(v.clone()));
        check("ec right unit", lhs == m, format!("{lhs:?} vs {m:?}"));
        let lhs = ec_bind(&ec_bind(&m, efk), egk);
        let rhs = ec_bind(&m, |v| ec_bind(&efk(v), egk));
        check("ec associativity", lhs == rhs, format!("{lhs:?} vs {rhs:?}"));

        // Linearity of expectation under kernel averaging, on plain value
        // distributions over numbers.
        let vm = {
            let mut d = VDist::zero();
            for _ in 0..rng.gen_range(0..=3u32) {
                let v = pool[rng.gen_range(0..pool.len())].clone();
                d.insert_add(v, &gen_weight(&mut rng));
            }
            d
        };
        let nf: Vec<(RunValue, VDist)> = pool
            .iter()
            .map(|v| {
                let mut d = VDist::zero();
                for _ in 0..rng.gen_range(0..=3u32) {
                    d.insert_add(RunValue::Nat(rng.gen_range(0..=5)), &gen_weight(&mut rng));
                }
                (v.clone(), d)
            })
            .collect();
        let lhs = nat_expectation(&vdist_bind(&vm, &nf));
        let mut rhs = Rat::zero();
        for (v, p) in vm.iter() {
            if let Some((_, d)) = nf.iter().find(|(u, _)| u == v) {
                dyadic_add_assign(&mut rhs, &dyadic_mul(p, &nat_expectation(d)));
            }
        }
        check("expectation linearity", lhs == rhs, format!("{lhs} vs {rhs}"));

        // On full distributions and total kernels, expectation commutes
        // with unit and bind.
        for v in &pool {
            check(
                "expectation preserves unit",
                expectation(&dist_unit(v.clone())) == ec_unit(v.clone()),
                format!("at value {v:?}"),
            );
        }
        let tmu = gen_total_dist(&mut rng, &pool);
        let tf = gen_kernel(&mut rng, &pool, true);
        let tfk = |v: &RunValue| kernel_apply(&tf, v);
        let lhs = expectation(&bind(&tmu, &tfk));
        let rhs = ec_bind(&expectation(&tmu), |v| expectation(&tfk(v)));
        check(
            "expectation commutes with bind at mass 1",
            lhs == rhs,
            format!("{lhs:?} vs {rhs:?}"),
        );
    }

    let (sub_morphism_lhs, sub_morphism_rhs) =
        sub_morphism_counterexample().expect("tiny fixed costs");
    let sub_morphism_separates = sub_morphism_lhs != sub_morphism_rhs;
    LawSuiteReport {
        instances,
        checks,
        failures,
        sub_morphism_lhs,
        sub_morphism_rhs,
        sub_morphism_separates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bind_shifts_costs_and_mixes() {
        // 1/2 at (cost 1, value 0); kernel sends 0 to (cost 2, unit).
        let mu = SubDist::from_entries([(1, RunValue::Nat(0), rat(1, 2))]);
        let out = dist_bind(&mu, |_| SubDist::point(2, RunValue::Unit)).unwrap();
        assert_eq!(
            out,
            SubDist::from_entries([(3, RunValue::Unit, rat(1, 2))])
        );
    }

    #[test]
    fn ec_bind_charges_left_cost_in_full() {
        // Left: cost 3, half the mass on 0; kernel maps 0 to cost 5.
        let m = ECPair {
            ec: rat(3, 1),
            dist: VDist::from_entries([(RunValue::Nat(0), rat(1, 2))]),
        };
        let out = ec_bind(&m, |_| ECPair {
            ec: rat(5, 1),
            dist: VDist::point(RunValue::Unit),
        });
        assert_eq!(out.ec, rat(11, 2));
        assert_eq!(out.dist, VDist::from_entries([(RunValue::Unit, rat(1, 2))]));
    }

    #[test]
    fn pinned_counterexample_separates_the_sides() {
        let (lhs, rhs) = sub_morphism_counterexample().unwrap();
        assert_eq!(lhs, ECPair::zero());
        assert_eq!(
            rhs,
            ECPair {
                ec: rat(1, 2),
                dist: VDist::zero()
            }
        );
        assert_ne!(lhs, rhs);
    }

    #[test]
    fn suite_passes_on_generated_data() {
        let report = monad_law_suite(7, 60);
        assert!(
            report.passed(),
            "failures: {:?}",
            &report.failures[..report.failures.len().min(3)]
        );
        assert_eq!(report.instances, 60);
        assert!(report.checks >= 60 * 6);
    }

    #[test]
    fn suite_is_seed_deterministic() {
        let a = monad_law_suite(11, 10);
        let b = monad_law_suite(11, 10);
        assert_eq!(a.checks, b.checks);
        assert_eq!(a.failures.len(), b.failures.len());
    }
}
