//! Capture-avoiding substitution of values for variables.
//!
//! Substitution is simultaneous: all variables in the map are replaced in one
//! pass, so `case`/`unpair` contractions are safe even when one replacement
//! mentions the other binder's name.
//!
//! There are two tiers.  When every replacement value is closed no binder can
//! capture anything, so a copy-on-write walk applies: subtrees without a free
//! occurrence of a substituted name are returned as-is (`None`), which lets
//! the caller clone them shallowly — in particular any thunk inside survives
//! with its reference count bumped instead of its body copied.  The
//! evaluators substitute closed values only and call the `*_closed_*` entry
//! points, which skip even the closedness scan.  Open replacement values —
//! the rewriter can produce them when contracting under binders — take the
//! general tier, which restricts the substitution at each binder and renames
//! when a replacement mentions the binder's name.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use super::ast::{CompTerm, ValueTerm};
use super::binding::{free_vars_comp, free_vars_value, fresh_name};

/// A simultaneous substitution.
pub type Subst = BTreeMap<String, ValueTerm>;

/// Replace `x` by `v` in a computation.
pub fn substitute_comp(t: &CompTerm, x: &str, v: &ValueTerm) -> CompTerm {
    if free_vars_value(v).is_empty() {
        subst_closed_comp(t, x, v)
    } else {
        let mut sub = Subst::new();
        sub.insert(x.to_owned(), v.clone());
        general_apply_comp(t, &sub)
    }
}

/// Replace `x` by `v` in a value.
pub fn substitute_value(w: &ValueTerm, x: &str, v: &ValueTerm) -> ValueTerm {
    if free_vars_value(v).is_empty() {
        let sub = [(x, v)];
        cow_value(w, &sub, &mut Vec::new()).unwrap_or_else(|| w.clone())
    } else {
        let mut sub = Subst::new();
        sub.insert(x.to_owned(), v.clone());
        general_apply_value(w, &sub)
    }
}

/// Apply a simultaneous substitution to a computation.
pub fn apply_comp(t: &CompTerm, sub: &Subst) -> CompTerm {
    if sub.is_empty() {
        return t.clone();
    }
    if sub.values().all(|v| free_vars_value(v).is_empty()) {
        apply_closed_comp(t, sub)
    } else {
        general_apply_comp(t, sub)
    }
}

/// Apply a simultaneous substitution to a value.
pub fn apply_value(w: &ValueTerm, sub: &Subst) -> ValueTerm {
    if sub.is_empty() {
        return w.clone();
    }
    if sub.values().all(|v| free_vars_value(v).is_empty()) {
        let pairs: Vec<(&str, &ValueTerm)> =
            sub.iter().map(|(k, v)| (k.as_str(), v)).collect();
        cow_value(w, &pairs, &mut Vec::new()).unwrap_or_else(|| w.clone())
    } else {
        general_apply_value(w, sub)
    }
}

/// Replace `x` by the *closed* value `v` in `t`.
///
/// Contract: `v` has no free variables.  The evaluators' substitutions all
/// satisfy this by construction (they substitute quoted runtime values and
/// interned recursive thunks), and it lets this path skip both the
/// closedness scan and all capture handling.
pub fn subst_closed_comp(t: &CompTerm, x: &str, v: &ValueTerm) -> CompTerm {
    let sub = [(x, v)];
    cow_comp(t, &sub, &mut Vec::new()).unwrap_or_else(|| t.clone())
}

/// Apply a substitution whose values are all *closed* (same contract as
/// [`subst_closed_comp`]) to a computation.
pub fn apply_closed_comp(t: &CompTerm, sub: &Subst) -> CompTerm {
    if sub.is_empty() {
        return t.clone();
    }
    let pairs: Vec<(&str, &ValueTerm)> =
        sub.iter().map(|(k, v)| (k.as_str(), v)).collect();
    cow_comp(t, &pairs, &mut Vec::new()).unwrap_or_else(|| t.clone())
}

// ---------------------------------------------------------------------------
// Copy-on-write tier (closed replacement values).
//
// `None` means "no free occurrence of any substituted name here": the caller
// reuses the original subtree.  `shadow` is the stack of binders in scope;
// a shadowed name is no longer substituted.
// ---------------------------------------------------------------------------

fn shadowed(shadow: &[&str], name: &str) -> bool {
    shadow.iter().rev().any(|s| *s == name)
}

fn reuse<T: Clone>(changed: Option<T>, original: &T) -> T {
    changed.unwrap_or_else(|| original.clone())
}

fn cow_comp<'a>(
    t: &'a CompTerm,
    sub: &[(&str, &ValueTerm)],
    shadow: &mut Vec<&'a str>,
) -> Option<CompTerm> {
    use CompTerm::*;
    match t {
        Produce(v) => cow_value(v, sub, shadow).map(Produce),
        Force(v) => cow_value(v, sub, shadow).map(Force),
        Charge(v) => cow_value(v, sub, shadow).map(Charge),
        RandNat(v) => cow_value(v, sub, shadow).map(RandNat),
        Uniform => None,
        Bind(x, t1, t2) => {
            let a = cow_comp(t1, sub, shadow);
            shadow.push(x);
            let b = cow_comp(t2, sub, shadow);
            shadow.pop();
            if a.is_none() && b.is_none() {
                None
            } else {
                Some(Bind(
                    x.clone(),
                    Box::new(reuse(a, t1)),
                    Box::new(reuse(b, t2)),
                ))
            }
        }
        Lam(x, ann, body) => {
            shadow.push(x);
            let b = cow_comp(body, sub, shadow);
            shadow.pop();
            b.map(|nb| Lam(x.clone(), ann.clone(), Box::new(nb)))
        }
        Fix(f, ann, body) => {
            shadow.push(f);
            let b = cow_comp(body, sub, shadow);
            shadow.pop();
            b.map(|nb| Fix(f.clone(), ann.clone(), Box::new(nb)))
        }
        App(t1, v) => {
            let a = cow_comp(t1, sub, shadow);
            let w = cow_value(v, sub, shadow);
            if a.is_none() && w.is_none() {
                None
            } else {
                Some(App(Box::new(reuse(a, t1)), reuse(w, v)))
            }
        }
        LetVal(x, v, body) => {
            let w = cow_value(v, sub, shadow);
            shadow.push(x);
            let b = cow_comp(body, sub, shadow);
            shadow.pop();
            if w.is_none() && b.is_none() {
                None
            } else {
                Some(LetVal(x.clone(), reuse(w, v), Box::new(reuse(b, body))))
            }
        }
        IfZero(v, t1, t2) => {
            let w = cow_value(v, sub, shadow);
            let a = cow_comp(t1, sub, shadow);
            let b = cow_comp(t2, sub, shadow);
            if w.is_none() && a.is_none() && b.is_none() {
                None
            } else {
                Some(IfZero(
                    reuse(w, v),
                    Box::new(reuse(a, t1)),
                    Box::new(reuse(b, t2)),
                ))
            }
        }
        Unpair(x, y, v, body) => {
            let w = cow_value(v, sub, shadow);
            shadow.push(x);
            shadow.push(y);
            let b = cow_comp(body, sub, shadow);
            shadow.pop();
            shadow.pop();
            if w.is_none() && b.is_none() {
                None
            } else {
                Some(Unpair(
                    x.clone(),
                    y.clone(),
                    reuse(w, v),
                    Box::new(reuse(b, body)),
                ))
            }
        }
        CaseList(v, nil_t, h, tl, cons_t) => {
            let w = cow_value(v, sub, shadow);
            let a = cow_comp(nil_t, sub, shadow);
            shadow.push(h);
            shadow.push(tl);
            let b = cow_comp(cons_t, sub, shadow);
            shadow.pop();
            shadow.pop();
            if w.is_none() && a.is_none() && b.is_none() {
                None
            } else {
                Some(CaseList(
                    reuse(w, v),
                    Box::new(reuse(a, nil_t)),
                    h.clone(),
                    tl.clone(),
                    Box::new(reuse(b, cons_t)),
                ))
            }
        }
        Choose(p, t1, t2) => {
            let a = cow_comp(t1, sub, shadow);
            let b = cow_comp(t2, sub, shadow);
            if a.is_none() && b.is_none() {
                None
            } else {
                Some(Choose(
                    p.clone(),
                    Box::new(reuse(a, t1)),
                    Box::new(reuse(b, t2)),
                ))
            }
        }
        PrimOp(op, args) => {
            let mut news: Vec<Option<ValueTerm>> = Vec::with_capacity(args.len());
            let mut any = false;
            for a in args {
                let n = cow_value(a, sub, shadow);
                any |= n.is_some();
                news.push(n);
            }
            if !any {
                None
            } else {
                Some(PrimOp(
                    *op,
                    news.into_iter()
                        .zip(args)
                        .map(|(n, a)| reuse(n, a))
                        .collect(),
                ))
            }
        }
    }
}

fn cow_value<'a>(
    w: &'a ValueTerm,
    sub: &[(&str, &ValueTerm)],
    shadow: &mut Vec<&'a str>,
) -> Option<ValueTerm> {
    use ValueTerm::*;
    match w {
        Var(y) => {
            if shadowed(shadow, y) {
                None
            } else {
                sub.iter().find(|(k, _)| *k == y).map(|(_, v)| (*v).clone())
            }
        }
        UnitLit | NatLit(_) | RealLit(_) | CostLit(_) | Nil(_) => None,
        CostAdd(a, b) => cow_value2(a, b, sub, shadow).map(|(x, y)| CostAdd(x, y)),
        Pair(a, b) => cow_value2(a, b, sub, shadow).map(|(x, y)| Pair(x, y)),
        Cons(a, b) => cow_value2(a, b, sub, shadow).map(|(x, y)| Cons(x, y)),
        Thunk(body) => {
            cow_comp(body, sub, shadow).map(|nb| Thunk(Rc::new(nb)))
        }
    }
}

fn cow_value2<'a>(
    a: &'a ValueTerm,
    b: &'a ValueTerm,
    sub: &[(&str, &ValueTerm)],
    shadow: &mut Vec<&'a str>,
) -> Option<(Box<ValueTerm>, Box<ValueTerm>)> {
    let na = cow_value(a, sub, shadow);
    let nb = cow_value(b, sub, shadow);
    if na.is_none() && nb.is_none() {
        None
    } else {
        Some((Box::new(reuse(na, a)), Box::new(reuse(nb, b))))
    }
}

// ---------------------------------------------------------------------------
// General tier (open replacement values): restrict at each binder, rename
// when a replacement value mentions the binder's name.
// ---------------------------------------------------------------------------

fn general_apply_comp(t: &CompTerm, sub: &Subst) -> CompTerm {
    if sub.is_empty() {
        return t.clone();
    }
    use CompTerm::*;
    match t {
        Produce(v) => Produce(general_apply_value(v, sub)),
        Force(v) => Force(general_apply_value(v, sub)),
        Charge(v) => Charge(general_apply_value(v, sub)),
        RandNat(v) => RandNat(general_apply_value(v, sub)),
        Bind(x, t1, t2) => {
            let t1 = general_apply_comp(t1, sub);
            let (x, t2) = binder1(x, t2, sub);
            Bind(x, Box::new(t1), Box::new(t2))
        }
        Lam(x, ann, body) => {
            let (x, body) = binder1(x, body, sub);
            Lam(x, ann.clone(), Box::new(body))
        }
        Fix(x, ann, body) => {
            let (x, body) = binder1(x, body, sub);
            Fix(x, ann.clone(), Box::new(body))
        }
        App(t1, v) => App(
            Box::new(general_apply_comp(t1, sub)),
            general_apply_value(v, sub),
        ),
        LetVal(x, v, body) => {
            let v = general_apply_value(v, sub);
            let (x, body) = binder1(x, body, sub);
            LetVal(x, v, Box::new(body))
        }
        IfZero(v, t1, t2) => IfZero(
            general_apply_value(v, sub),
            Box::new(general_apply_comp(t1, sub)),
            Box::new(general_apply_comp(t2, sub)),
        ),
        Unpair(x, y, v, body) => {
            let v = general_apply_value(v, sub);
            let (x, y, body) = binder2(x, y, body, sub);
            Unpair(x, y, v, Box::new(body))
        }
        CaseList(v, nil_branch, h, tl, cons_branch) => {
            let v = general_apply_value(v, sub);
            let nil_branch = general_apply_comp(nil_branch, sub);
            let (h, tl, cons_branch) = binder2(h, tl, cons_branch, sub);
            CaseList(v, Box::new(nil_branch), h, tl, Box::new(cons_branch))
        }
        Uniform => Uniform,
        Choose(p, t1, t2) => Choose(
            p.clone(),
            Box::new(general_apply_comp(t1, sub)),
            Box::new(general_apply_comp(t2, sub)),
        ),
        PrimOp(op, args) => PrimOp(
            *op,
            args.iter().map(|v| general_apply_value(v, sub)).collect(),
        ),
    }
}

fn general_apply_value(w: &ValueTerm, sub: &Subst) -> ValueTerm {
    if sub.is_empty() {
        return w.clone();
    }
    use ValueTerm::*;
    match w {
        Var(x) => sub.get(x).cloned().unwrap_or_else(|| w.clone()),
        UnitLit | NatLit(_) | RealLit(_) | CostLit(_) | Nil(_) => w.clone(),
        CostAdd(a, b) => CostAdd(
            Box::new(general_apply_value(a, sub)),
            Box::new(general_apply_value(b, sub)),
        ),
        Pair(a, b) => Pair(
            Box::new(general_apply_value(a, sub)),
            Box::new(general_apply_value(b, sub)),
        ),
        Cons(a, b) => Cons(
            Box::new(general_apply_value(a, sub)),
            Box::new(general_apply_value(b, sub)),
        ),
        Thunk(t) => Thunk(Rc::new(general_apply_comp(t, sub))),
    }
}

/// Push a substitution under one binder, renaming it when a replacement
/// value mentions its name.
fn binder1(x: &str, body: &CompTerm, sub: &Subst) -> (String, CompTerm) {
    let (live, vals_fv) = live_part(&[x], body, sub);
    if live.is_empty() {
        return (x.to_owned(), body.clone());
    }
    if !vals_fv.contains(x) {
        return (x.to_owned(), general_apply_comp(body, &live));
    }
    let mut avoid = avoid_set(&vals_fv, &live, body);
    let fresh = fresh_name(x, &avoid);
    avoid.insert(fresh.clone());
    let renamed = substitute_comp(body, x, &ValueTerm::Var(fresh.clone()));
    (fresh, general_apply_comp(&renamed, &live))
}

/// Push a substitution under two binders bound by the same construct.
fn binder2(x: &str, y: &str, body: &CompTerm, sub: &Subst) -> (String, String, CompTerm) {
    if x == y {
        // The second binder shadows the first completely; only it can be
        // referenced from the body.
        let (y2, body2) = binder1(y, body, sub);
        return (x.to_owned(), y2, body2);
    }
    let (live, vals_fv) = live_part(&[x, y], body, sub);
    if live.is_empty() {
        return (x.to_owned(), y.to_owned(), body.clone());
    }
    let mut avoid = avoid_set(&vals_fv, &live, body);
    avoid.insert(x.to_owned());
    avoid.insert(y.to_owned());
    let mut renames = Subst::new();
    let x2 = if vals_fv.contains(x) {
        let f = fresh_name(x, &avoid);
        avoid.insert(f.clone());
        renames.insert(x.to_owned(), ValueTerm::Var(f.clone()));
        f
    } else {
        x.to_owned()
    };
    let y2 = if vals_fv.contains(y) {
        let f = fresh_name(y, &avoid);
        avoid.insert(f.clone());
        renames.insert(y.to_owned(), ValueTerm::Var(f.clone()));
        f
    } else {
        y.to_owned()
    };
    let body = if renames.is_empty() {
        body.clone()
    } else {
        general_apply_comp(body, &renames)
    };
    (x2, y2, general_apply_comp(&body, &live))
}

/// Restrict a substitution to what can matter under the given binders:
/// drop the binders themselves and any key not free in the body.  Returns
/// the restriction together with the free variables of its values.
fn live_part(
    binders: &[&str],
    body: &CompTerm,
    sub: &Subst,
) -> (Subst, BTreeSet<String>) {
    let body_fv = free_vars_comp(body);
    let mut live = Subst::new();
    let mut vals_fv = BTreeSet::new();
    for (k, v) in sub {
        if binders.contains(&k.as_str()) || !body_fv.contains(k) {
            continue;
        }
        vals_fv.extend(free_vars_value(v));
        live.insert(k.clone(), v.clone());
    }
    (live, vals_fv)
}

/// Names a renamed binder must avoid: anything free in a replacement value,
/// any key still being substituted, and anything free in the body.
fn avoid_set(vals_fv: &BTreeSet<String>, live: &Subst, body: &CompTerm) -> BTreeSet<String> {
    let mut avoid = vals_fv.clone();
    avoid.extend(live.keys().cloned());
    avoid.extend(free_vars_comp(body));
    avoid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::ast::CompTerm::*;
    use crate::syntax::ast::ValueTerm::*;
    use crate::syntax::binding::alpha_eq_comp;

    #[test]
    fn substitutes_free_occurrences_only() {
        // x <- produce y; produce y   with y := 7
        let t = Bind(
            "x".into(),
            Box::new(Produce(Var("y".into()))),
            Box::new(Produce(Var("y".into()))),
        );
        let r = substitute_comp(&t, "y", &NatLit(7));
        let expect = Bind(
            "x".into(),
            Box::new(Produce(NatLit(7))),
            Box::new(Produce(NatLit(7))),
        );
        assert_eq!(r, expect);
    }

    #[test]
    fn binder_shadows_substitution() {
        // x <- produce 0; produce x   with x := 7 leaves the bound x alone
        let t = Bind(
            "x".into(),
            Box::new(Produce(NatLit(0))),
            Box::new(Produce(Var("x".into()))),
        );
        let r = substitute_comp(&t, "x", &NatLit(7));
        assert_eq!(r, t);
    }

    #[test]
    fn renames_to_avoid_capture() {
        // (\x. produce (x, y))[y := x] must not capture the substituted x.
        let t = Lam(
            "x".into(),
            None,
            Box::new(Produce(Pair(
                Box::new(Var("x".into())),
                Box::new(Var("y".into())),
            ))),
        );
        let r = substitute_comp(&t, "y", &Var("x".into()));
        let expect = Lam(
            "x1".into(),
            None,
            Box::new(Produce(Pair(
                Box::new(Var("x1".into())),
                Box::new(Var("x".into())),
            ))),
        );
        assert_eq!(r, expect);
        assert!(!alpha_eq_comp(&r, &t));
    }

    #[test]
    fn simultaneous_substitution_does_not_chain() {
        // produce (x, y) [x := y, y := 4]: the x-replacement must see the old y.
        let t = Produce(Pair(Box::new(Var("x".into())), Box::new(Var("y".into()))));
        let mut sub = Subst::new();
        sub.insert("x".into(), Var("y".into()));
        sub.insert("y".into(), NatLit(4));
        let r = apply_comp(&t, &sub);
        let expect = Produce(Pair(Box::new(Var("y".into())), Box::new(NatLit(4))));
        assert_eq!(r, expect);
    }

    #[test]
    fn untouched_thunks_keep_their_allocation() {
        use std::rc::Rc;
        // Substituting for y must not copy the body of a thunk that does not
        // mention y.
        let shared = Rc::new(Produce(NatLit(0)));
        let t = Bind(
            "z".into(),
            Box::new(Produce(Var("y".into()))),
            Box::new(Produce(Thunk(Rc::clone(&shared)))),
        );
        let r = subst_closed_comp(&t, "y", &NatLit(7));
        let Bind(_, _, u) = &r else { panic!("shape") };
        let Produce(Thunk(rc)) = &**u else { panic!("shape") };
        assert!(Rc::ptr_eq(rc, &shared));
    }

    #[test]
    fn closed_fast_path_matches_general_tier() {
        let cases = [
            "x <- produce y; produce (x, y)",
            "\\x. w <- force y; produce (x, w)",
            "unpair y as (a, b) in n <- add(a, b); produce (n, y)",
            "case y of nil => produce y | cons h t => produce (h, t)",
            "fix f : F Nat. z <- force f; if0 y then produce z else produce y",
        ];
        for src in cases {
            let t = crate::syntax::parse(src).unwrap();
            let v = Pair(Box::new(NatLit(3)), Box::new(UnitLit));
            let fast = subst_closed_comp(&t, "y", &v);
            let mut sub = Subst::new();
            sub.insert("y".into(), v.clone());
            let slow = general_apply_comp(&t, &sub);
            assert_eq!(fast, slow, "paths disagree on `{src}`");
        }
    }
}
