//! Directed rewriting for the equational theory.
//!
//! Each rule is oriented left to right and applied at an explicit path
//! ([`apply_rule`]), or repeatedly at the leftmost-outermost redex under a
//! fuel bound ([`normalize`]), producing a step log that [`replay`] can run
//! back.  After a successful rewrite of a well-typed program the result is
//! re-checked against the original type; a failure there
//! ([`RewriteError::TypeRegression`]) signals a bug in a rule, not in the
//! input.
//!
//! Every rule except [`RuleName::FixUnfold`] preserves both exact semantics
//! at *every* recursion depth; unfolding a recursion consumes one unit of
//! depth budget, so the rewritten term at depth d matches the original at
//! d + 1.  [`check_preservation`] makes these statements testable: exact
//! comparison at equal depths, exact comparison at shifted depths for a
//! root-level unfolding, and comparison of iterated-deepening limits within
//! a tolerance for rewrites (such as a non-root unfolding) where no single
//! depth alignment exists.
//!
//! Expansion directions (η-expansion, wrapping a value as `thunk (force v)`)
//! are deliberately not rules: they grow terms forever under a dumb
//! strategy.  Their contractions are.

use std::fmt;
use std::rc::Rc;

use num::{One, Signed, Zero};

use crate::expected::analyze;
use crate::rational::{rat, Rat};
use crate::syntax::ast::{CompTerm, ValueTerm};
use crate::syntax::binding::{alpha_eq_comp, free_vars_comp, free_vars_value};
use crate::syntax::path::{get_at, preorder, replace_at, TermNode, TermRef};
use crate::syntax::subst::{apply_comp, substitute_comp, Subst};
use crate::typecheck::{check_comp_against, check_program, TypeError};
use crate::value::EvalError;
use crate::{dist::eval_cost_dist, expected::eval_ec_pair};

/// The rewrite rules, oriented left to right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleName {
    /// `(\x. t) v  →  t[v/x]`
    Beta,
    /// `\x. t x  →  t` when `x` is not free in `t`
    EtaArrow,
    /// `let x = v in t  →  t[v/x]`
    LetBeta,
    /// `force (thunk t)  →  t`
    ThunkForce,
    /// `thunk (force v)  →  v` (a value-position rule)
    ForceThunkValue,
    /// `x <- produce v; u  →  u[v/x]`
    SeqReturn,
    /// `x <- t; produce x  →  t`
    SeqEta,
    /// `if0 0 then t else u  →  t`
    IfZ,
    /// `if0 (n+1) then t else u  →  u`
    IfS,
    /// `if0 v then t else t  →  t` (branches equal up to renaming)
    IfSame,
    /// `case nil of nil => t | cons h tl => u  →  t`
    CaseNil,
    /// `case (cons a b) of nil => t | cons h tl => u  →  u[a/h, b/tl]`
    CaseCons,
    /// `unpair (a, b) as (x, y) in t  →  t[a/x, b/y]`
    UnpairBeta,
    /// `charge (0); u  →  u` when the bound unit is unused
    ChargeZero,
    /// `x <- charge (c); y <- charge (d); k  →  y <- charge (c+d); k`
    ChargeMerge,
    /// `x <- charge (v); y <- charge (w); k  →  x <- charge (w); y <- charge (v); k`
    ChargeSwap,
    /// `choose 1 { t } { u }  →  t`
    ChooseUnit,
    /// `choose p { t } { u }  →  choose 1−p { u } { t }`
    ChooseSym,
    /// `choose p { t } { t }  →  t` (branches equal up to renaming)
    ChooseIdem,
    /// `choose p { t } { choose q { u } { w } }  →`
    /// `choose p+q−pq { choose p/(p+q−pq) { t } { u } } { w }`
    ChooseAssoc,
    /// `fix f. t  →  t[thunk (fix f. t) / f]`
    FixUnfold,
}

pub const ALL_RULES: [RuleName; 21] = [
    RuleName::Beta,
    RuleName::EtaArrow,
    RuleName::LetBeta,
    RuleName::ThunkForce,
    RuleName::ForceThunkValue,
    RuleName::SeqReturn,
    RuleName::SeqEta,
    RuleName::IfZ,
    RuleName::IfS,
    RuleName::IfSame,
    RuleName::CaseNil,
    RuleName::CaseCons,
    RuleName::UnpairBeta,
    RuleName::ChargeZero,
    RuleName::ChargeMerge,
    RuleName::ChargeSwap,
    RuleName::ChooseUnit,
    RuleName::ChooseSym,
    RuleName::ChooseIdem,
    RuleName::ChooseAssoc,
    RuleName::FixUnfold,
];

impl RuleName {
    pub fn name(self) -> &'static str {
        match self {
            RuleName::Beta => "Beta",
            RuleName::EtaArrow => "EtaArrow",
            RuleName::LetBeta => "LetBeta",
            RuleName::ThunkForce => "ThunkForce",
            RuleName::ForceThunkValue => "ForceThunkValue",
            RuleName::SeqReturn => "SeqReturn",
            RuleName::SeqEta => "SeqEta",
            RuleName::IfZ => "IfZ",
            RuleName::IfS => "IfS",
            RuleName::IfSame => "IfSame",
            RuleName::CaseNil => "CaseNil",
            RuleName::CaseCons => "CaseCons",
            RuleName::UnpairBeta => "UnpairBeta",
            RuleName::ChargeZero => "ChargeZero",
            RuleName::ChargeMerge => "ChargeMerge",
            RuleName::ChargeSwap => "ChargeSwap",
            RuleName::ChooseUnit => "ChooseUnit",
            RuleName::ChooseSym => "ChooseSym",
            RuleName::ChooseIdem => "ChooseIdem",
            RuleName::ChooseAssoc => "ChooseAssoc",
            RuleName::FixUnfold => "FixUnfold",
        }
    }

    pub fn from_name(s: &str) -> Option<RuleName> {
        ALL_RULES.iter().copied().find(|r| r.name() == s)
    }
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum RewriteError {
    /// The addressed subterm does not have the rule's shape (or a side
    /// condition failed).
    #[error("rule does not match at this position")]
    NoMatch,
    /// The path does not address a subterm, or addresses the wrong layer.
    #[error("path does not address a subterm")]
    BadPath,
    /// The rewritten program no longer checks against the original type —
    /// a rule implementation bug.
    #[error("rewrite broke typing: {0}")]
    TypeRegression(TypeError),
}

/// Apply one rule at one position.  If the input program is closed and
/// well-typed, the output is re-checked against the input's type.
pub fn apply_rule(t: &CompTerm, rule: RuleName, path: &[u32]) -> Result<CompTerm, RewriteError> {
    let node = get_at(t, path).ok_or(RewriteError::BadPath)?;
    let new = rewrite_node(node, rule).ok_or(RewriteError::NoMatch)?;
    let out = replace_at(t, path, new).ok_or(RewriteError::BadPath)?;
    if let Ok(ty) = check_program(t) {
        check_comp_against(&Vec::new(), &out, &ty).map_err(RewriteError::TypeRegression)?;
    }
    Ok(out)
}

/// The single-node matcher behind [`apply_rule`].
fn rewrite_node(node: TermRef<'_>, rule: RuleName) -> Option<TermNode> {
    match node {
        TermRef::Comp(t) => rewrite_comp(t, rule).map(TermNode::Comp),
        TermRef::Value(v) => rewrite_value(v, rule).map(TermNode::Value),
    }
}

fn is_zero_literal(v: &ValueTerm) -> bool {
    matches!(v, ValueTerm::NatLit(0) | ValueTerm::CostLit(0))
}

fn literal_amount(v: &ValueTerm) -> Option<(u64, bool)> {
    match v {
        ValueTerm::NatLit(n) => Some((*n, true)),
        ValueTerm::CostLit(n) => Some((*n, false)),
        _ => None,
    }
}

fn rewrite_comp(t: &CompTerm, rule: RuleName) -> Option<CompTerm> {
    use CompTerm::*;
    match (rule, t) {
        (RuleName::Beta, App(f, v)) => match f.as_ref() {
            Lam(x, _, body) => Some(substitute_comp(body, x, v)),
            _ => None,
        },
        (RuleName::EtaArrow, Lam(x, _, body)) => match body.as_ref() {
            App(f, ValueTerm::Var(y)) if y == x && !free_vars_comp(f).contains(x) => {
                Some((**f).clone())
            }
            _ => None,
        },
        (RuleName::LetBeta, LetVal(x, v, body)) => Some(substitute_comp(body, x, v)),
        (RuleName::ThunkForce, Force(ValueTerm::Thunk(body))) => Some((**body).clone()),
        (RuleName::SeqReturn, Bind(x, t1, u)) => match t1.as_ref() {
            Produce(v) => Some(substitute_comp(u, x, v)),
            _ => None,
        },
        (RuleName::SeqEta, Bind(x, t1, u)) => match u.as_ref() {
            Produce(ValueTerm::Var(y)) if y == x => Some((**t1).clone()),
            _ => None,
        },
        (RuleName::IfZ, IfZero(ValueTerm::NatLit(0), t1, _)) => Some((**t1).clone()),
        (RuleName::IfS, IfZero(ValueTerm::NatLit(n), _, t2)) if *n > 0 => Some((**t2).clone()),
        (RuleName::IfSame, IfZero(_, t1, t2)) if alpha_eq_comp(t1, t2) => Some((**t1).clone()),
        (RuleName::CaseNil, CaseList(ValueTerm::Nil(_), nil_t, _, _, _)) => {
            Some((**nil_t).clone())
        }
        (RuleName::CaseCons, CaseList(ValueTerm::Cons(a, b), _, h, tl, cons_t)) => {
            let mut sub = Subst::new();
            sub.insert(h.clone(), (**a).clone());
            sub.insert(tl.clone(), (**b).clone());
            Some(apply_comp(cons_t, &sub))
        }
        (RuleName::UnpairBeta, Unpair(x, y, ValueTerm::Pair(a, b), body)) => {
            let mut sub = Subst::new();
            sub.insert(x.clone(), (**a).clone());
            sub.insert(y.clone(), (**b).clone());
            Some(apply_comp(body, &sub))
        }
        (RuleName::ChargeZero, Bind(x, t1, u)) => match t1.as_ref() {
            Charge(v) if is_zero_literal(v) && !free_vars_comp(u).contains(x) => {
                Some((**u).clone())
            }
            _ => None,
        },
        (RuleName::ChargeMerge, Bind(x1, t1, rest)) => match (t1.as_ref(), rest.as_ref()) {
            (Charge(v1), Bind(x2, t2, k)) => match t2.as_ref() {
                Charge(v2) => {
                    let (c1, n1) = literal_amount(v1)?;
                    let (c2, n2) = literal_amount(v2)?;
                    if free_vars_comp(k).contains(x1) {
                        return None;
                    }
                    let sum = c1.checked_add(c2)?;
                    let lit = if n1 && n2 {
                        ValueTerm::NatLit(sum)
                    } else {
                        ValueTerm::CostLit(sum)
                    };
                    Some(Bind(x2.clone(), Box::new(Charge(lit)), k.clone()))
                }
                _ => None,
            },
            _ => None,
        },
        (RuleName::ChargeSwap, Bind(x1, t1, rest)) => match (t1.as_ref(), rest.as_ref()) {
            (Charge(v1), Bind(x2, t2, k)) => match t2.as_ref() {
                Charge(v2)
                    if !free_vars_value(v2).contains(x1)
                        && !free_vars_value(v1).contains(x2) =>
                {
                    Some(Bind(
                        x1.clone(),
                        Box::new(Charge(v2.clone())),
                        Box::new(Bind(x2.clone(), Box::new(Charge(v1.clone())), k.clone())),
                    ))
                }
                _ => None,
            },
            _ => None,
        },
        (RuleName::ChooseUnit, Choose(p, t1, _)) if p.is_one() => Some((**t1).clone()),
        (RuleName::ChooseSym, Choose(p, t1, t2)) => {
            Some(Choose(Rat::one() - p, t2.clone(), t1.clone()))
        }
        (RuleName::ChooseIdem, Choose(_, t1, t2)) if alpha_eq_comp(t1, t2) => Some((**t1).clone()),
        (RuleName::ChooseAssoc, Choose(p, t1, rest)) => match rest.as_ref() {
            Choose(q, u, w) => {
                // Regroup t ⊕_p (u ⊕_q w): the pair (t, u) gets the mass
                // p + q − pq, and within it t keeps p of it.
                let outer = p + q - p * q;
                if outer.is_zero() {
                    return None;
                }
                let inner = p / &outer;
                Some(Choose(
                    outer.clone(),
                    Box::new(Choose(inner, t1.clone(), u.clone())),
                    w.clone(),
                ))
            }
            _ => None,
        },
        (RuleName::FixUnfold, Fix(f, _, body)) => {
            let rolled = ValueTerm::Thunk(Rc::new(t.clone()));
            Some(substitute_comp(body, f, &rolled))
        }
        _ => None,
    }
}

fn rewrite_value(v: &ValueTerm, rule: RuleName) -> Option<ValueTerm> {
    match (rule, v) {
        (RuleName::ForceThunkValue, ValueTerm::Thunk(body)) => match body.as_ref() {
            CompTerm::Force(inner) => Some(inner.clone()),
            _ => None,
        },
        _ => None,
    }
}

/// One recorded rewrite: enough to replay it and to display it.
#[derive(Clone, Debug, PartialEq)]
pub struct RewriteStep {
    pub rule: RuleName,
    pub path: Vec<u32>,
    pub before: TermNode,
    pub after: TermNode,
}

#[derive(Clone, Debug)]
pub struct NormalizeResult {
    pub term: CompTerm,
    pub steps: Vec<RewriteStep>,
    /// True when the fuel ran out with a redex still present.
    pub fuel_exhausted: bool,
}

/// Find the leftmost-outermost position where any of `rules` (tried in the
/// given order) matches.
fn find_redex(t: &CompTerm, rules: &[RuleName]) -> Option<(Vec<u32>, RuleName, TermNode)> {
    for (path, node) in preorder(t) {
        for &rule in rules {
            if let Some(new) = rewrite_node(node, rule) {
                return Some((path, rule, new));
            }
        }
    }
    None
}

/// Repeatedly rewrite at the leftmost-outermost redex until no rule in the
/// set matches or `fuel` steps have been taken.  Include
/// [`RuleName::FixUnfold`] in the set only with the fuel you mean it to get.
pub fn normalize(
    t: &CompTerm,
    rules: &[RuleName],
    fuel: u64,
) -> Result<NormalizeResult, RewriteError> {
    let original_ty = check_program(t).ok();
    let mut current = t.clone();
    let mut steps = Vec::new();
    for _ in 0..fuel {
        let Some((path, rule, new)) = find_redex(&current, rules) else {
            return Ok(NormalizeResult {
                term: current,
                steps,
                fuel_exhausted: false,
            });
        };
        let before = match get_at(&current, &path).ok_or(RewriteError::BadPath)? {
            TermRef::Comp(c) => TermNode::Comp(c.clone()),
            TermRef::Value(v) => TermNode::Value(v.clone()),
        };
        current = replace_at(&current, &path, new.clone()).ok_or(RewriteError::BadPath)?;
        if let Some(ty) = &original_ty {
            check_comp_against(&Vec::new(), &current, ty)
                .map_err(RewriteError::TypeRegression)?;
        }
        steps.push(RewriteStep {
            rule,
            path,
            before,
            after: new,
        });
    }
    let fuel_exhausted = find_redex(&current, rules).is_some();
    Ok(NormalizeResult {
        term: current,
        steps,
        fuel_exhausted,
    })
}

/// Re-run a step log from its source term.  Each step's recorded `before`
/// must match the current subterm exactly; the result is the term the log
/// was recorded from.
pub fn replay(t: &CompTerm, steps: &[RewriteStep]) -> Result<CompTerm, RewriteError> {
    let mut current = t.clone();
    for step in steps {
        let found = match get_at(&current, &step.path).ok_or(RewriteError::BadPath)? {
            TermRef::Comp(c) => TermNode::Comp(c.clone()),
            TermRef::Value(v) => TermNode::Value(v.clone()),
        };
        if found != step.before {
            return Err(RewriteError::NoMatch);
        }
        current =
            replace_at(&current, &step.path, step.after.clone()).ok_or(RewriteError::BadPath)?;
    }
    Ok(current)
}

/// How [`check_preservation`] should line the two programs up.
#[derive(Clone, Debug, PartialEq)]
pub enum ComparisonMode {
    /// Same depth on both sides; exact equality of both semantics.
    Exact,
    /// Left side gets one extra unit of depth; exact equality.  This is the
    /// alignment for a root-level recursion unfolding, which consumes one
    /// unit of the budget.
    DepthShifted,
    /// Compare iterated-deepening analyses within `tol`.  The alignment of
    /// choice when no single depth shift relates the two sides, e.g. an
    /// unfolding somewhere under other recursion or branching.
    Limit { tol: Rat, max_depth: u64 },
}

/// The mode under which a given rule application is expected to preserve
/// semantics.
pub fn preservation_mode_for(rule: RuleName, path: &[u32]) -> ComparisonMode {
    if rule == RuleName::FixUnfold {
        if path.is_empty() {
            ComparisonMode::DepthShifted
        } else {
            ComparisonMode::Limit {
                tol: rat(1, 1_000_000),
                max_depth: 1 << 14,
            }
        }
    } else {
        ComparisonMode::Exact
    }
}

/// Outcome of comparing two programs under both exact semantics.
#[derive(Clone, Debug)]
pub enum PreservationReport {
    Exact {
        depth: u64,
        dist_equal: bool,
        ec_equal: bool,
    },
    DepthShifted {
        depth: u64,
        dist_equal: bool,
        ec_equal: bool,
    },
    Limit {
        ec_delta: Rat,
        mass_delta: Rat,
        within: bool,
    },
}

impl PreservationReport {
    pub fn ok(&self) -> bool {
        match self {
            PreservationReport::Exact {
                dist_equal,
                ec_equal,
                ..
            }
            | PreservationReport::DepthShifted {
                dist_equal,
                ec_equal,
                ..
            } => *dist_equal && *ec_equal,
            PreservationReport::Limit { within, .. } => *within,
        }
    }
}

/// Compare the joint cost distribution and the expected-cost pair of two
/// closed returner-typed programs under the given alignment.
pub fn check_preservation(
    t: &CompTerm,
    u: &CompTerm,
    depth: u64,
    mode: &ComparisonMode,
) -> Result<PreservationReport, EvalError> {
    match mode {
        ComparisonMode::Exact => Ok(PreservationReport::Exact {
            depth,
            dist_equal: eval_cost_dist(t, depth)? == eval_cost_dist(u, depth)?,
            ec_equal: eval_ec_pair(t, depth)? == eval_ec_pair(u, depth)?,
        }),
        ComparisonMode::DepthShifted => Ok(PreservationReport::DepthShifted {
            depth,
            dist_equal: eval_cost_dist(t, depth + 1)? == eval_cost_dist(u, depth)?,
            ec_equal: eval_ec_pair(t, depth + 1)? == eval_ec_pair(u, depth)?,
        }),
        ComparisonMode::Limit { tol, max_depth } => {
            let a = analyze(t, tol, *max_depth)?;
            let b = analyze(u, tol, *max_depth)?;
            let ec_delta = (a.ec - b.ec).abs();
            let mass_delta = (a.mass - b.mass).abs();
            let within = ec_delta < *tol && mass_delta < *tol;
            Ok(PreservationReport::Limit {
                ec_delta,
                mass_delta,
                within,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse;

    fn try_root(src: &str, rule: RuleName) -> Result<CompTerm, RewriteError> {
        apply_rule(&parse(src).unwrap(), rule, &[])
    }

    fn root(src: &str, rule: RuleName) -> CompTerm {
        try_root(src, rule).unwrap()
    }

    #[test]
    fn beta_contracts_an_application() {
        assert_eq!(
            root("(\\x : Nat. produce x) 3", RuleName::Beta),
            parse("produce 3").unwrap()
        );
    }

    #[test]
    fn eta_contracts_only_when_the_variable_is_unused() {
        assert_eq!(
            root("\\x : Nat. force g x", RuleName::EtaArrow),
            parse("force g").unwrap()
        );
        // Here the function part mentions the bound variable: no match.
        assert!(matches!(
            try_root("\\x : U (Nat -> F Nat). force x x", RuleName::EtaArrow),
            Err(RewriteError::NoMatch)
        ));
    }

    #[test]
    fn charge_rules_follow_the_monoid() {
        assert_eq!(
            root("charge (cost 2); charge (cost 3); produce ()", RuleName::ChargeMerge),
            parse("charge (cost 5); produce ()").unwrap()
        );
        assert_eq!(
            root("charge (0); produce 7", RuleName::ChargeZero),
            parse("produce 7").unwrap()
        );
        assert_eq!(
            root("charge (2); charge (3); produce ()", RuleName::ChargeSwap),
            parse("charge (3); charge (2); produce ()").unwrap()
        );
    }

    #[test]
    fn sequencing_rules() {
        assert_eq!(
            root("x <- produce 4; produce x", RuleName::SeqReturn),
            parse("produce 4").unwrap()
        );
        assert_eq!(
            root("x <- charge (1); produce x", RuleName::SeqEta),
            parse("charge (1)").unwrap()
        );
    }

    #[test]
    fn conditional_and_data_rules() {
        assert_eq!(
            root("if0 0 then produce 1 else produce 2", RuleName::IfZ),
            parse("produce 1").unwrap()
        );
        assert_eq!(
            root("if0 9 then produce 1 else produce 2", RuleName::IfS),
            parse("produce 2").unwrap()
        );
        assert_eq!(
            root("if0 x then produce 1 else produce 1", RuleName::IfSame),
            parse("produce 1").unwrap()
        );
        assert_eq!(
            root(
                "case (nil : list Nat) of nil => produce 0 | cons h t => produce 1",
                RuleName::CaseNil
            ),
            parse("produce 0").unwrap()
        );
        assert_eq!(
            root(
                "case cons 5 (nil : list Nat) of nil => produce 0 | cons h t => produce h",
                RuleName::CaseCons
            ),
            parse("produce 5").unwrap()
        );
        assert_eq!(
            root("unpair (1, 2) as (a, b) in produce (b, a)", RuleName::UnpairBeta),
            parse("produce (2, 1)").unwrap()
        );
    }

    #[test]
    fn thunk_force_both_ways() {
        assert_eq!(
            root("force (thunk (produce 1))", RuleName::ThunkForce),
            parse("produce 1").unwrap()
        );
        // The value-position contraction needs a path into the value layer.
        let t = parse("produce (thunk (force v))").unwrap();
        let u = apply_rule(&t, RuleName::ForceThunkValue, &[0]).unwrap();
        assert_eq!(u, parse("produce v").unwrap());
    }

    #[test]
    fn choose_rules_are_barycentric() {
        assert_eq!(
            root("choose 1 { produce 1 } { produce 2 }", RuleName::ChooseUnit),
            parse("produce 1").unwrap()
        );
        assert_eq!(
            root("choose 1/4 { produce 1 } { produce 2 }", RuleName::ChooseSym),
            parse("choose 3/4 { produce 2 } { produce 1 }").unwrap()
        );
        assert_eq!(
            root("choose 1/4 { produce 1 } { produce 1 }", RuleName::ChooseIdem),
            parse("produce 1").unwrap()
        );
        let regrouped = root(
            "choose 1/2 { produce 0 } { choose 1/3 { produce 1 } { produce 2 } }",
            RuleName::ChooseAssoc,
        );
        assert_eq!(
            regrouped,
            parse("choose 2/3 { choose 3/4 { produce 0 } { produce 1 } } { produce 2 }").unwrap()
        );
        // Regrouping must not move any mass.
        let before = parse("choose 1/2 { produce 0 } { choose 1/3 { produce 1 } { produce 2 } }")
            .unwrap();
        let report =
            check_preservation(&before, &regrouped, 4, &ComparisonMode::Exact).unwrap();
        assert!(report.ok());
    }

    #[test]
    fn fix_unfold_shifts_depth() {
        let t = parse(
            "fix go : F Nat. charge (cost 1); \
             choose 1/2 { produce 0 } { y <- force go; succ(y) }",
        )
        .unwrap();
        let u = apply_rule(&t, RuleName::FixUnfold, &[]).unwrap();
        let mode = preservation_mode_for(RuleName::FixUnfold, &[]);
        assert_eq!(mode, ComparisonMode::DepthShifted);
        for d in 0..5 {
            assert!(check_preservation(&t, &u, d, &mode).unwrap().ok());
        }
        // At the same depth they differ (the unfolded term is one level
        // deeper into the recursion), so the shift is doing real work.
        let same = check_preservation(&t, &u, 3, &ComparisonMode::Exact).unwrap();
        assert!(!same.ok());
    }

    #[test]
    fn normalize_merges_charges_and_replays() {
        let t = parse("charge (1); charge (2); charge (3); produce ()").unwrap();
        let result = normalize(&t, &[RuleName::ChargeMerge], 100).unwrap();
        assert_eq!(result.term, parse("charge (6); produce ()").unwrap());
        assert_eq!(result.steps.len(), 2);
        assert!(!result.fuel_exhausted);
        assert_eq!(replay(&t, &result.steps).unwrap(), result.term);
    }

    #[test]
    fn normalize_reports_fuel_exhaustion() {
        let t = parse("fix x : F Unit. force x").unwrap();
        let result = normalize(&t, &[RuleName::FixUnfold, RuleName::ThunkForce], 5).unwrap();
        assert_eq!(result.steps.len(), 5);
        assert!(result.fuel_exhausted);
    }

    #[test]
    fn normal_forms_are_fixed_points() {
        let t = parse("produce 0").unwrap();
        let result = normalize(&t, &ALL_RULES, 10).unwrap();
        assert_eq!(result.term, t);
        assert!(result.steps.is_empty());
    }

    #[test]
    fn rules_do_not_fire_where_side_conditions_fail() {
        // Binder used in the continuation: the zero charge cannot vanish.
        assert!(matches!(
            try_root("u <- charge (0); produce u", RuleName::ChargeZero),
            Err(RewriteError::NoMatch)
        ));
        // Different branches: no IfSame.
        assert!(matches!(
            try_root("if0 x then produce 1 else produce 2", RuleName::IfSame),
            Err(RewriteError::NoMatch)
        ));
        // choose 1/2 is not a unit.
        assert!(matches!(
            try_root("choose 1/2 { produce 1 } { produce 2 }", RuleName::ChooseUnit),
            Err(RewriteError::NoMatch)
        ));
        // p = q = 0 would need division by zero mass on the left pair.
        assert!(matches!(
            try_root(
                "choose 0 { produce 0 } { choose 0 { produce 1 } { produce 2 } }",
                RuleName::ChooseAssoc
            ),
            Err(RewriteError::NoMatch)
        ));
    }

    #[test]
    fn beta_is_capture_avoiding() {
        // The substituted value mentions a free y and lands inside the
        // scope of a binder also named y, which must be renamed.
        let t = parse(
            "(\\x : U (F Nat). y <- produce 0; z <- force x; produce z) (thunk (produce y))",
        )
        .unwrap();
        let u = apply_rule(&t, RuleName::Beta, &[]).unwrap();
        let CompTerm::Bind(bound, _, rest) = &u else {
            panic!("expected a bind, got {u:?}")
        };
        assert_ne!(bound, "y");
        let CompTerm::Bind(_, forced, _) = rest.as_ref() else {
            panic!("expected an inner bind, got {rest:?}")
        };
        assert_eq!(**forced, parse("force (thunk (produce y))").unwrap());
        assert!(free_vars_comp(&u).contains("y"));
    }

    #[test]
    fn rule_names_round_trip() {
        for r in ALL_RULES {
            assert_eq!(RuleName::from_name(r.name()), Some(r));
        }
        assert_eq!(RuleName::from_name("NoSuchRule"), None);
    }
}
