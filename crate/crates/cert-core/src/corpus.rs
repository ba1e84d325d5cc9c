//! Built-in example programs, embedded from `corpus/*.cert` at the
//! workspace root.
//!
//! Each entry records the program's documented type, which engines can run
//! it, default arguments that close it off to an `F`-typed program, and —
//! where a closed form is known — an expected-cost oracle coded directly
//! from the defining recurrence, independent of the evaluators it is
//! checked against.

use num::{BigInt, One, Zero};

use crate::rational::{rat, rat_u, Rat};
use crate::syntax::ast::{CompTerm, CompType, ValueTerm};
use crate::syntax::parser::{parse, parse_value};
use crate::typecheck::{check_program, TypeError};

/// Which engines an entry is meant for.  `All` entries avoid `uniform` and
/// keep value types enumerable, so the exact semantics apply alongside the
/// sampler; `SamplerOnly` entries are exercised operationally only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineSupport {
    SamplerOnly,
    All,
}

/// Closed-form expected cost attached to an entry.
#[derive(Clone, Copy)]
pub enum Oracle {
    /// Expected cost of the program applied to its default arguments.
    Fixed(fn() -> Rat),
    /// Expected cost as a function of a single `Nat` argument, meaningful
    /// on the inclusive range `lo..=hi` (the range cross-checked against
    /// the analyzer).
    PerArg { ec: fn(u64) -> Rat, lo: u64, hi: u64 },
}

/// One embedded example program.
pub struct CorpusEntry {
    pub name: &'static str,
    /// Path of the source file relative to the workspace root.
    pub path: &'static str,
    /// Embedded source text.
    pub source: &'static str,
    /// Documented type, as rendered by the checker.
    pub ty: &'static str,
    pub support: EngineSupport,
    /// Value literals the program is applied to (left to right) before
    /// running; empty when the program is already of `F` type.
    pub default_args: &'static [&'static str],
    pub oracle: Option<Oracle>,
    /// Whether the iterative-deepening analysis is expected to settle on
    /// the default arguments.  Meaningful only for `All` entries.
    pub converges: bool,
}

impl CorpusEntry {
    /// The parsed program.  Panics only if the embedded source is broken,
    /// which the corpus tests rule out.
    pub fn term(&self) -> CompTerm {
        parse(self.source).unwrap_or_else(|e| panic!("corpus entry {}: {e}", self.name))
    }

    /// The parsed default arguments.
    pub fn args(&self) -> Vec<ValueTerm> {
        self.default_args
            .iter()
            .map(|s| {
                parse_value(s)
                    .unwrap_or_else(|e| panic!("corpus entry {} argument {s:?}: {e}", self.name))
            })
            .collect()
    }

    /// The program applied to its default arguments: a closed `F`-typed
    /// computation ready for any engine.
    pub fn applied(&self) -> CompTerm {
        crate::dist::apply_to_args(&self.term(), &self.args())
    }

    /// Type-check the (unapplied) program.
    pub fn check(&self) -> Result<CompType, TypeError> {
        check_program(&self.term())
    }

    /// Whether the exact engines are meant to run this entry.
    pub fn exact(&self) -> bool {
        self.support == EngineSupport::All
    }
}

fn zero() -> Rat {
    Rat::zero()
}

fn one() -> Rat {
    Rat::one()
}

fn two() -> Rat {
    rat_u(2)
}

fn four() -> Rat {
    rat_u(4)
}

fn half() -> Rat {
    rat(1, 2)
}

/// Cost of the instrumented factorial: one charge per recursive call.
fn factorial_ec(n: u64) -> Rat {
    rat_u(n)
}

/// Expected flips until `n` heads in a row: `2 (2^n - 1)`.
pub fn coin_tosses_ec(n: u64) -> Rat {
    let pow = BigInt::from(2u32).pow(u32::try_from(n).expect("argument fits in u32"));
    Rat::from_integer(2 * (pow - 1))
}

/// Expected comparison count of randomized quicksort on `n` distinct
/// elements, from the recurrence `T(0) = 0`,
/// `T(n) = n - 1 + (2/n) * sum_{i<n} T(i)`, evaluated exactly.
pub fn qck_ec(n: u64) -> Rat {
    let n = usize::try_from(n).expect("argument fits in usize");
    let mut table: Vec<Rat> = Vec::with_capacity(n + 1);
    let mut prefix = Rat::zero();
    table.push(Rat::zero());
    for m in 1..=n {
        prefix += &table[m - 1];
        let m_rat = rat_u(m as u64);
        let t = (&m_rat - Rat::one()) + rat(2, m as i64) * &prefix;
        table.push(t);
    }
    table.pop().expect("table is nonempty")
}

/// The instrumented geometric program with stopping probability
/// `num/den`, built on demand for sweeps over several biases.  Its
/// limiting expected cost is `den/num`.
pub fn biased_geometric(num: u64, den: u64) -> CompTerm {
    let src = format!(
        "fix x : F Nat. charge (cost 1); choose {num}/{den} {{ produce 0 }} {{ y <- force x; succ(y) }}"
    );
    parse(&src).expect("generated source parses")
}

/// The embedded corpus, in presentation order.
pub const CORPUS: &[CorpusEntry] = &[
    CorpusEntry {
        name: "geometric",
        path: "corpus/geometric.cert",
        source: include_str!("../../../corpus/geometric.cert"),
        ty: "F Nat",
        support: EngineSupport::All,
        default_args: &[],
        oracle: Some(Oracle::Fixed(zero)),
        converges: true,
    },
    CorpusEntry {
        name: "geometric_instrumented",
        path: "corpus/geometric_instrumented.cert",
        source: include_str!("../../../corpus/geometric_instrumented.cert"),
        ty: "F Nat",
        support: EngineSupport::All,
        default_args: &[],
        oracle: Some(Oracle::Fixed(two)),
        converges: true,
    },
    CorpusEntry {
        name: "geometric_biased",
        path: "corpus/geometric_biased.cert",
        source: include_str!("../../../corpus/geometric_biased.cert"),
        ty: "F Nat",
        support: EngineSupport::All,
        default_args: &[],
        oracle: Some(Oracle::Fixed(four)),
        converges: true,
    },
    CorpusEntry {
        name: "factorial",
        path: "corpus/factorial.cert",
        source: include_str!("../../../corpus/factorial.cert"),
        ty: "Nat -> F Nat",
        support: EngineSupport::All,
        default_args: &["5"],
        oracle: Some(Oracle::PerArg { ec: factorial_ec, lo: 0, hi: 8 }),
        converges: true,
    },
    CorpusEntry {
        name: "length",
        path: "corpus/length.cert",
        source: include_str!("../../../corpus/length.cert"),
        ty: "(list Nat) -> F Nat",
        support: EngineSupport::All,
        default_args: &["[1, 2, 3]"],
        oracle: Some(Oracle::Fixed(zero)),
        converges: true,
    },
    CorpusEntry {
        name: "bifilter",
        path: "corpus/bifilter.cert",
        source: include_str!("../../../corpus/bifilter.cert"),
        ty: "(list Nat) -> U (Nat -> F Nat) -> F ((list Nat) * (list Nat))",
        support: EngineSupport::All,
        default_args: &["[1, 2, 3, 4]", "thunk (\\x : Nat. charge (cost 1); leq(x, 2))"],
        oracle: Some(Oracle::Fixed(four)),
        converges: true,
    },
    CorpusEntry {
        name: "coin_tosses",
        path: "corpus/coin_tosses.cert",
        source: include_str!("../../../corpus/coin_tosses.cert"),
        ty: "Nat -> F Unit",
        support: EngineSupport::All,
        default_args: &["3"],
        oracle: Some(Oracle::PerArg { ec: coin_tosses_ec, lo: 0, hi: 6 }),
        converges: true,
    },
    CorpusEntry {
        name: "qck_nat",
        path: "corpus/qck_nat.cert",
        source: include_str!("../../../corpus/qck_nat.cert"),
        ty: "Nat -> F Nat",
        support: EngineSupport::All,
        default_args: &["6"],
        oracle: Some(Oracle::PerArg { ec: qck_ec, lo: 0, hi: 10 }),
        converges: true,
    },
    CorpusEntry {
        name: "quicksort",
        path: "corpus/quicksort.cert",
        source: include_str!("../../../corpus/quicksort.cert"),
        ty: "(list Nat) -> F (list Nat)",
        support: EngineSupport::SamplerOnly,
        default_args: &["[3, 1, 2]"],
        oracle: None,
        converges: true,
    },
    CorpusEntry {
        name: "random_walk",
        path: "corpus/random_walk.cert",
        source: include_str!("../../../corpus/random_walk.cert"),
        ty: "Nat -> Nat -> F Unit",
        support: EngineSupport::All,
        default_args: &["2", "1"],
        oracle: None,
        converges: false,
    },
    CorpusEntry {
        name: "diverge",
        path: "corpus/diverge.cert",
        source: include_str!("../../../corpus/diverge.cert"),
        ty: "F Unit",
        support: EngineSupport::All,
        default_args: &[],
        oracle: Some(Oracle::Fixed(zero)),
        converges: true,
    },
    CorpusEntry {
        name: "bot_then_charge",
        path: "corpus/bot_then_charge.cert",
        source: include_str!("../../../corpus/bot_then_charge.cert"),
        ty: "F Unit",
        support: EngineSupport::All,
        default_args: &[],
        oracle: Some(Oracle::Fixed(zero)),
        converges: true,
    },
    CorpusEntry {
        name: "charge_then_bot",
        path: "corpus/charge_then_bot.cert",
        source: include_str!("../../../corpus/charge_then_bot.cert"),
        ty: "F Unit",
        support: EngineSupport::All,
        default_args: &[],
        oracle: Some(Oracle::Fixed(one)),
        converges: true,
    },
    CorpusEntry {
        name: "mix",
        path: "corpus/mix.cert",
        source: include_str!("../../../corpus/mix.cert"),
        ty: "F Nat",
        support: EngineSupport::All,
        default_args: &[],
        oracle: Some(Oracle::Fixed(half)),
        converges: true,
    },
];

/// Look an entry up by name.
pub fn find(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{eval_cost_dist, expected_of_marginal};
    use crate::expected::{analyze, eval_ec_pair};
    use crate::rational::rat_to_f64;
    use crate::typecheck::{check_comp_against, Context};
    use crate::value::RunValue;

    #[test]
    fn every_entry_parses_and_checks_at_its_documented_type() {
        for entry in CORPUS {
            let ty = entry
                .check()
                .unwrap_or_else(|e| panic!("{} fails to check: {e}", entry.name));
            assert_eq!(ty.to_string(), entry.ty, "{} type drifted", entry.name);
        }
    }

    #[test]
    fn every_applied_entry_is_a_returner() {
        for entry in CORPUS {
            let applied = entry.applied();
            let ty = check_program(&applied)
                .unwrap_or_else(|e| panic!("{} applied fails to check: {e}", entry.name));
            assert!(
                matches!(ty, CompType::F(_)),
                "{} applied has type {ty}, not an F type",
                entry.name
            );
        }
    }

    #[test]
    fn single_token_mutations_fail_to_check() {
        // Curated near-miss programs: each is one token away from a corpus
        // entry and must be rejected.
        let mutants = [
            // geometric with the recursive result consumed as a thunk
            "fix x : F Nat. choose 1/2 { produce 0 } { y <- force x; force y }",
            // factorial forcing its numeric argument instead of the thunk
            "fix f : Nat -> F Nat. \\n : Nat. if0 n then produce 1 else (m <- pred(n); r <- (force n) m; mul(n, r))",
            // length producing the tail instead of a number
            "fix f : (list Nat) -> F Nat. \\l : list Nat. case l of nil => produce 0 | cons hd tl => produce tl",
            // mix with a probability out of range is a parse error instead
            // of a type error, so mutate the charge argument's type
            "choose 1/2 { charge (thunk (produce 0)); produce 0 } { produce 2 }",
            // walk comparing a pair to a number
            "fix f : Nat -> Nat -> F Unit. \\i : Nat. \\j : Nat. if0 (i, j) then produce () else force f i j",
        ];
        for src in mutants {
            let t = parse(src).expect("mutant parses");
            assert!(check_program(&t).is_err(), "mutant unexpectedly checks: {src}");
        }
    }

    #[test]
    fn default_args_fit_the_documented_argument_types() {
        for entry in CORPUS {
            let mut ty = entry.check().unwrap();
            for (i, arg) in entry.args().iter().enumerate() {
                let CompType::Arrow(dom, cod) = ty else {
                    panic!("{}: more default args than arrows", entry.name)
                };
                check_comp_against(
                    &Context::new(),
                    &CompTerm::Produce(arg.clone()),
                    &CompType::F(dom),
                )
                .unwrap_or_else(|e| panic!("{} argument {i}: {e}", entry.name));
                ty = *cod;
            }
        }
    }

    #[test]
    fn fixed_oracles_match_the_analyzer() {
        for entry in CORPUS {
            let Some(Oracle::Fixed(ec)) = entry.oracle else { continue };
            let report = analyze(&entry.applied(), &rat(1, 1_000_000), 256).unwrap();
            assert!(report.converged, "{} did not settle", entry.name);
            let err = rat_to_f64(&(report.ec - ec())).abs();
            assert!(err < 1e-4, "{}: analyzer off by {err}", entry.name);
        }
    }

    #[test]
    fn per_arg_oracles_match_the_analyzer_at_small_arguments() {
        for entry in CORPUS {
            let Some(Oracle::PerArg { ec, lo, .. }) = entry.oracle else { continue };
            for n in lo..=lo.max(3) {
                let applied =
                    crate::dist::apply_to_args(&entry.term(), &[ValueTerm::NatLit(n)]);
                let report = analyze(&applied, &rat(1, 1_000_000), 512).unwrap();
                assert!(report.converged, "{}({n}) did not settle", entry.name);
                let err = rat_to_f64(&(report.ec - ec(n))).abs();
                assert!(err < 1e-4, "{}({n}): analyzer off by {err}", entry.name);
            }
        }
    }

    #[test]
    fn qck_recurrence_small_values() {
        assert_eq!(qck_ec(0), Rat::zero());
        assert_eq!(qck_ec(1), Rat::zero());
        assert_eq!(qck_ec(2), Rat::one());
        assert_eq!(qck_ec(3), rat(8, 3));
    }

    #[test]
    fn coin_tosses_closed_form_small_values() {
        let expect = [0u64, 2, 6, 14, 30, 62, 126];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(coin_tosses_ec(n as u64), rat_u(*e));
        }
    }

    #[test]
    fn biased_geometric_limit_is_reciprocal_of_bias() {
        for (num, den) in [(1u64, 4u64), (1, 3), (1, 2), (3, 4)] {
            let t = biased_geometric(num, den);
            let report = analyze(&t, &rat(1, 1_000_000), 4096).unwrap();
            assert!(report.converged);
            let err = rat_to_f64(&(report.ec - rat(den as i64, num as i64))).abs();
            assert!(err < 1e-4, "bias {num}/{den} off by {err}");
        }
    }

    #[test]
    fn quicksort_sorts_under_the_sampler() {
        let entry = find("quicksort").unwrap();
        let applied = entry.applied();
        for seed in 0..20 {
            let run = crate::sampler::run_with_seed(&applied, 200, seed).unwrap();
            let crate::sampler::Outcome::Returned(v) = run.outcome else {
                panic!("quicksort ran out of fuel at seed {seed}")
            };
            let expect = RunValue::List(vec![
                RunValue::Nat(1),
                RunValue::Nat(2),
                RunValue::Nat(3),
            ]);
            assert_eq!(v, expect, "seed {seed}");
            // two comparisons at best (pivot 2), three at worst
            assert!((2..=3).contains(&run.cost), "seed {seed} cost {}", run.cost);
        }
    }

    #[test]
    fn commutation_pair_is_distinguished_by_expected_cost_only() {
        let bot_charge = find("bot_then_charge").unwrap().applied();
        let charge_bot = find("charge_then_bot").unwrap().applied();
        for depth in [0u64, 1, 4, 16] {
            let d1 = eval_cost_dist(&bot_charge, depth).unwrap();
            let d2 = eval_cost_dist(&charge_bot, depth).unwrap();
            assert!(d1.is_empty() && d2.is_empty(), "depth {depth}");
            let e1 = eval_ec_pair(&bot_charge, depth).unwrap();
            let e2 = eval_ec_pair(&charge_bot, depth).unwrap();
            assert_eq!(e1.ec, Rat::zero(), "depth {depth}");
            assert_eq!(e2.ec, Rat::one(), "depth {depth}");
            assert!(e1.dist.is_empty() && e2.dist.is_empty(), "depth {depth}");
        }
    }

    #[test]
    fn mix_expectations_agree_exactly() {
        let t = find("mix").unwrap().applied();
        let d = eval_cost_dist(&t, 1).unwrap();
        assert_eq!(expected_of_marginal(&d), rat(1, 2));
        let e = eval_ec_pair(&t, 1).unwrap();
        assert_eq!(e.ec, rat(1, 2));
        assert_eq!(e.dist.mass(), Rat::one());
    }
}
