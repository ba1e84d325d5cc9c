//! Core library for the `cert` metalanguage: a call-by-push-value calculus
//! with probabilistic choice and a cost-counting effect, together with three
//! ways of running it that are kept in agreement with each other:
//!
//! - a seeded Monte-Carlo sampler over a fuelled operational semantics;
//! - an exact subdistribution semantics over (cost, value) outcomes;
//! - an exact expected-cost semantics pairing a scalar with a value
//!   distribution, plus its pre-expectation (continuation) form.
//!
//! Recursion is handled by finite unfolding: each engine takes a depth (or
//! fuel) bound and produces the corresponding approximant, monotone in the
//! bound.  A rewriter implements the equational theory, and the crosscheck
//! module ties the engines to each other and to closed-form oracles.

pub mod corpus;
pub mod dist;
pub(crate) mod engine;
pub mod expected;
pub mod laws;
pub mod rational;
pub mod rewrite;
pub mod sampler;
pub mod syntax;
pub mod typecheck;
pub mod value;

pub use corpus::{biased_geometric, coin_tosses_ec, qck_ec, CorpusEntry, EngineSupport, Oracle, CORPUS};
pub use dist::{
    apply_to_args, eval_cost, eval_cost_applied, eval_cost_dist, expected_of_marginal,
    CostSemResult, SubDist,
};
pub use expected::{
    analyze, check_factorization, eval_ec, eval_ec_applied, eval_ec_pair, eval_ec_pair_deep,
    eval_pre, AnalysisReport, ECPair, ECResult, Reward, VDist,
};
pub use laws::{monad_law_suite, LawSuiteReport};
pub use rational::{fmt_rat, parse_rational, rat, rat_from_f64, rat_to_f64, rat_u, Rat, RatJson};
pub use rewrite::{
    apply_rule, check_preservation, normalize, preservation_mode_for, replay, ComparisonMode,
    NormalizeResult, PreservationReport, RewriteError, RewriteStep, RuleName, ALL_RULES,
};
pub use syntax::{
    parse, parse_value, pretty_comp, pretty_value, CompTerm, CompType, OpName, ParseError,
    ValueTerm, ValueType,
};
pub use value::{primop_apply, quote, value_eval, EvalError, RunValue};
