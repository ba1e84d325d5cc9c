//! Variable binding utilities: free variables, alpha-equivalence, fresh names.
//!
//! Alpha-aware comparison and hashing exist because runtime values can carry
//! thunks, and distributions must merge outcomes that differ only in bound
//! names.  The orderings here are total and agree with [`alpha_eq`], so thunk
//! values can key ordered maps.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use super::ast::{CompTerm, ValueTerm};

/// Free variables of a computation.
pub fn free_vars_comp(t: &CompTerm) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_comp(t, &mut Vec::new(), &mut out);
    out
}

/// Free variables of a value.
pub fn free_vars_value(v: &ValueTerm) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_value(v, &mut Vec::new(), &mut out);
    out
}

fn collect_comp(t: &CompTerm, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match t {
        CompTerm::Produce(v) | CompTerm::Force(v) | CompTerm::Charge(v) | CompTerm::RandNat(v) => {
            collect_value(v, bound, out)
        }
        CompTerm::Bind(x, t1, t2) => {
            collect_comp(t1, bound, out);
            bound.push(x.clone());
            collect_comp(t2, bound, out);
            bound.pop();
        }
        CompTerm::Lam(x, _, body) | CompTerm::Fix(x, _, body) => {
            bound.push(x.clone());
            collect_comp(body, bound, out);
            bound.pop();
        }
        CompTerm::App(t1, v) => {
            collect_comp(t1, bound, out);
            collect_value(v, bound, out);
        }
        CompTerm::LetVal(x, v, body) => {
            collect_value(v, bound, out);
            bound.push(x.clone());
            collect_comp(body, bound, out);
            bound.pop();
        }
        CompTerm::IfZero(v, t1, t2) => {
            collect_value(v, bound, out);
            collect_comp(t1, bound, out);
            collect_comp(t2, bound, out);
        }
        CompTerm::Unpair(x, y, v, body) => {
            collect_value(v, bound, out);
            bound.push(x.clone());
            bound.push(y.clone());
            collect_comp(body, bound, out);
            bound.pop();
            bound.pop();
        }
        CompTerm::CaseList(v, nil_branch, h, tl, cons_branch) => {
            collect_value(v, bound, out);
            collect_comp(nil_branch, bound, out);
            bound.push(h.clone());
            bound.push(tl.clone());
            collect_comp(cons_branch, bound, out);
            bound.pop();
            bound.pop();
        }
        CompTerm::Uniform => {}
        CompTerm::Choose(_, t1, t2) => {
            collect_comp(t1, bound, out);
            collect_comp(t2, bound, out);
        }
        CompTerm::PrimOp(_, args) => {
            for v in args {
                collect_value(v, bound, out);
            }
        }
    }
}

fn collect_value(v: &ValueTerm, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match v {
        ValueTerm::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.insert(x.clone());
            }
        }
        ValueTerm::UnitLit
        | ValueTerm::NatLit(_)
        | ValueTerm::RealLit(_)
        | ValueTerm::CostLit(_)
        | ValueTerm::Nil(_) => {}
        ValueTerm::CostAdd(a, b) | ValueTerm::Pair(a, b) | ValueTerm::Cons(a, b) => {
            collect_value(a, bound, out);
            collect_value(b, bound, out);
        }
        ValueTerm::Thunk(t) => collect_comp(t, bound, out),
    }
}

/// Pick a name based on `base` that avoids every name in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_owned();
    }
    for i in 1u64.. {
        let candidate = format!("{base}{i}");
        if !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

// ---------------------------------------------------------------------------
// Alpha-equivalence, ordering, hashing
// ---------------------------------------------------------------------------

/// How a variable occurrence resolves: a de Bruijn index counted from the
/// innermost binder, or a free name.
enum VarRef<'a> {
    Bound(usize),
    Free(&'a str),
}

fn resolve<'a>(stack: &[&str], name: &'a str) -> VarRef<'a> {
    match stack.iter().rposition(|b| *b == name) {
        Some(i) => VarRef::Bound(stack.len() - 1 - i),
        None => VarRef::Free(name),
    }
}

/// Alpha-equivalence of computations.
pub fn alpha_eq_comp(a: &CompTerm, b: &CompTerm) -> bool {
    alpha_cmp_comp(a, b) == Ordering::Equal
}

/// Alpha-equivalence of values.
pub fn alpha_eq_value(a: &ValueTerm, b: &ValueTerm) -> bool {
    alpha_cmp_value(a, b) == Ordering::Equal
}

/// Total order on computations that quotients by alpha: bound occurrences
/// compare by de Bruijn index, free occurrences by name, and every bound
/// occurrence sorts before every free one.
pub fn alpha_cmp_comp(a: &CompTerm, b: &CompTerm) -> Ordering {
    cmp_comp(a, b, &mut Vec::new(), &mut Vec::new())
}

/// Value counterpart of [`alpha_cmp_comp`].
pub fn alpha_cmp_value(a: &ValueTerm, b: &ValueTerm) -> Ordering {
    cmp_value(a, b, &mut Vec::new(), &mut Vec::new())
}

fn comp_rank(t: &CompTerm) -> u8 {
    match t {
        CompTerm::Produce(_) => 0,
        CompTerm::Bind(..) => 1,
        CompTerm::Lam(..) => 2,
        CompTerm::App(..) => 3,
        CompTerm::Force(_) => 4,
        CompTerm::LetVal(..) => 5,
        CompTerm::IfZero(..) => 6,
        CompTerm::Unpair(..) => 7,
        CompTerm::CaseList(..) => 8,
        CompTerm::Charge(_) => 9,
        CompTerm::Uniform => 10,
        CompTerm::RandNat(_) => 11,
        CompTerm::Choose(..) => 12,
        CompTerm::Fix(..) => 13,
        CompTerm::PrimOp(..) => 14,
    }
}

fn value_rank(v: &ValueTerm) -> u8 {
    match v {
        ValueTerm::Var(_) => 0,
        ValueTerm::UnitLit => 1,
        ValueTerm::NatLit(_) => 2,
        ValueTerm::RealLit(_) => 3,
        ValueTerm::CostLit(_) => 4,
        ValueTerm::CostAdd(..) => 5,
        ValueTerm::Pair(..) => 6,
        ValueTerm::Thunk(_) => 7,
        ValueTerm::Nil(_) => 8,
        ValueTerm::Cons(..) => 9,
    }
}

fn cmp_comp<'a>(
    a: &'a CompTerm,
    b: &'a CompTerm,
    sa: &mut Vec<&'a str>,
    sb: &mut Vec<&'a str>,
) -> Ordering {
    use CompTerm::*;
    let rank = comp_rank(a).cmp(&comp_rank(b));
    if rank != Ordering::Equal {
        return rank;
    }
    match (a, b) {
        (Produce(v), Produce(w)) | (Force(v), Force(w)) | (Charge(v), Charge(w))
        | (RandNat(v), RandNat(w)) => cmp_value(v, w, sa, sb),
        (Bind(x, t1, t2), Bind(y, u1, u2)) => cmp_comp(t1, u1, sa, sb).then_with(|| {
            sa.push(x);
            sb.push(y);
            let r = cmp_comp(t2, u2, sa, sb);
            sa.pop();
            sb.pop();
            r
        }),
        (Lam(x, ta, t), Lam(y, tb, u)) => option_cmp(ta, tb).then_with(|| {
            sa.push(x);
            sb.push(y);
            let r = cmp_comp(t, u, sa, sb);
            sa.pop();
            sb.pop();
            r
        }),
        (Fix(x, ca, t), Fix(y, cb, u)) => option_cmp(ca, cb).then_with(|| {
            sa.push(x);
            sb.push(y);
            let r = cmp_comp(t, u, sa, sb);
            sa.pop();
            sb.pop();
            r
        }),
        (App(t, v), App(u, w)) => {
            cmp_comp(t, u, sa, sb).then_with(|| cmp_value(v, w, sa, sb))
        }
        (LetVal(x, v, t), LetVal(y, w, u)) => cmp_value(v, w, sa, sb).then_with(|| {
            sa.push(x);
            sb.push(y);
            let r = cmp_comp(t, u, sa, sb);
            sa.pop();
            sb.pop();
            r
        }),
        (IfZero(v, t1, t2), IfZero(w, u1, u2)) => cmp_value(v, w, sa, sb)
            .then_with(|| cmp_comp(t1, u1, sa, sb))
            .then_with(|| cmp_comp(t2, u2, sa, sb)),
        (Unpair(x1, x2, v, t), Unpair(y1, y2, w, u)) => cmp_value(v, w, sa, sb).then_with(|| {
            sa.push(x1);
            sa.push(x2);
            sb.push(y1);
            sb.push(y2);
            let r = cmp_comp(t, u, sa, sb);
            sa.truncate(sa.len() - 2);
            sb.truncate(sb.len() - 2);
            r
        }),
        (CaseList(v, n1, h1, tl1, c1), CaseList(w, n2, h2, tl2, c2)) => cmp_value(v, w, sa, sb)
            .then_with(|| cmp_comp(n1, n2, sa, sb))
            .then_with(|| {
                sa.push(h1);
                sa.push(tl1);
                sb.push(h2);
                sb.push(tl2);
                let r = cmp_comp(c1, c2, sa, sb);
                sa.truncate(sa.len() - 2);
                sb.truncate(sb.len() - 2);
                r
            }),
        (Uniform, Uniform) => Ordering::Equal,
        (Choose(p, t1, t2), Choose(q, u1, u2)) => p
            .cmp(q)
            .then_with(|| cmp_comp(t1, u1, sa, sb))
            .then_with(|| cmp_comp(t2, u2, sa, sb)),
        (PrimOp(op1, vs), PrimOp(op2, ws)) => op1.cmp(op2).then_with(|| {
            vs.len().cmp(&ws.len()).then_with(|| {
                for (v, w) in vs.iter().zip(ws) {
                    let r = cmp_value(v, w, sa, sb);
                    if r != Ordering::Equal {
                        return r;
                    }
                }
                Ordering::Equal
            })
        }),
        _ => unreachable!("ranks matched"),
    }
}

fn option_cmp<T: Ord>(a: &Option<T>, b: &Option<T>) -> Ordering {
    a.cmp(b)
}

fn cmp_value<'a>(
    a: &'a ValueTerm,
    b: &'a ValueTerm,
    sa: &mut Vec<&'a str>,
    sb: &mut Vec<&'a str>,
) -> Ordering {
    use ValueTerm::*;
    let rank = value_rank(a).cmp(&value_rank(b));
    if rank != Ordering::Equal {
        return rank;
    }
    match (a, b) {
        (Var(x), Var(y)) => match (resolve(sa, x), resolve(sb, y)) {
            (VarRef::Bound(i), VarRef::Bound(j)) => i.cmp(&j),
            (VarRef::Bound(_), VarRef::Free(_)) => Ordering::Less,
            (VarRef::Free(_), VarRef::Bound(_)) => Ordering::Greater,
            (VarRef::Free(x), VarRef::Free(y)) => x.cmp(y),
        },
        (UnitLit, UnitLit) => Ordering::Equal,
        (NatLit(m), NatLit(n)) => m.cmp(n),
        (RealLit(p), RealLit(q)) => p.cmp(q),
        (CostLit(m), CostLit(n)) => m.cmp(n),
        (CostAdd(a1, a2), CostAdd(b1, b2))
        | (Pair(a1, a2), Pair(b1, b2))
        | (Cons(a1, a2), Cons(b1, b2)) => {
            cmp_value(a1, b1, sa, sb).then_with(|| cmp_value(a2, b2, sa, sb))
        }
        (Thunk(t), Thunk(u)) => cmp_comp(t, u, sa, sb),
        (Nil(ta), Nil(tb)) => option_cmp(ta, tb),
        _ => unreachable!("ranks matched"),
    }
}

/// Hash a computation up to alpha: feeds de Bruijn indices for bound
/// occurrences so the hash agrees with [`alpha_eq_comp`].
pub fn alpha_hash_comp<H: Hasher>(t: &CompTerm, state: &mut H) {
    hash_comp(t, &mut Vec::new(), state)
}

/// Value counterpart of [`alpha_hash_comp`].
pub fn alpha_hash_value<H: Hasher>(v: &ValueTerm, state: &mut H) {
    hash_value(v, &mut Vec::new(), state)
}

fn hash_comp<'a, H: Hasher>(t: &'a CompTerm, stack: &mut Vec<&'a str>, state: &mut H) {
    use CompTerm::*;
    comp_rank(t).hash(state);
    match t {
        Produce(v) | Force(v) | Charge(v) | RandNat(v) => hash_value(v, stack, state),
        Bind(x, t1, t2) => {
            hash_comp(t1, stack, state);
            stack.push(x);
            hash_comp(t2, stack, state);
            stack.pop();
        }
        Lam(x, ann, body) => {
            ann.hash(state);
            stack.push(x);
            hash_comp(body, stack, state);
            stack.pop();
        }
        Fix(x, ann, body) => {
            ann.hash(state);
            stack.push(x);
            hash_comp(body, stack, state);
            stack.pop();
        }
        App(t1, v) => {
            hash_comp(t1, stack, state);
            hash_value(v, stack, state);
        }
        LetVal(x, v, body) => {
            hash_value(v, stack, state);
            stack.push(x);
            hash_comp(body, stack, state);
            stack.pop();
        }
        IfZero(v, t1, t2) => {
            hash_value(v, stack, state);
            hash_comp(t1, stack, state);
            hash_comp(t2, stack, state);
        }
        Unpair(x, y, v, body) => {
            hash_value(v, stack, state);
            stack.push(x);
            stack.push(y);
            hash_comp(body, stack, state);
            stack.truncate(stack.len() - 2);
        }
        CaseList(v, nil_branch, h, tl, cons_branch) => {
            hash_value(v, stack, state);
            hash_comp(nil_branch, stack, state);
            stack.push(h);
            stack.push(tl);
            hash_comp(cons_branch, stack, state);
            stack.truncate(stack.len() - 2);
        }
        Uniform => {}
        Choose(p, t1, t2) => {
            p.hash(state);
            hash_comp(t1, stack, state);
            hash_comp(t2, stack, state);
        }
        PrimOp(op, args) => {
            op.hash(state);
            for v in args {
                hash_value(v, stack, state);
            }
        }
    }
}

fn hash_value<'a, H: Hasher>(v: &'a ValueTerm, stack: &mut Vec<&'a str>, state: &mut H) {
    use ValueTerm::*;
    value_rank(v).hash(state);
    match v {
        Var(x) => match resolve(stack, x) {
            VarRef::Bound(i) => {
                0u8.hash(state);
                i.hash(state);
            }
            VarRef::Free(name) => {
                1u8.hash(state);
                name.hash(state);
            }
        },
        UnitLit => {}
        NatLit(n) | CostLit(n) => n.hash(state),
        RealLit(q) => q.hash(state),
        CostAdd(a, b) | Pair(a, b) | Cons(a, b) => {
            hash_value(a, stack, state);
            hash_value(b, stack, state);
        }
        Thunk(t) => hash_comp(t, stack, state),
        Nil(ann) => ann.hash(state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::ast::{CompTerm, ValueTerm};

    fn bind(x: &str, t: CompTerm, u: CompTerm) -> CompTerm {
        CompTerm::Bind(x.to_owned(), Box::new(t), Box::new(u))
    }

    #[test]
    fn alpha_equates_renamed_binders() {
        let t = bind(
            "x",
            CompTerm::Produce(ValueTerm::NatLit(1)),
            CompTerm::Produce(ValueTerm::var("x")),
        );
        let u = bind(
            "y",
            CompTerm::Produce(ValueTerm::NatLit(1)),
            CompTerm::Produce(ValueTerm::var("y")),
        );
        assert!(alpha_eq_comp(&t, &u));
        assert_ne!(t, u);
    }

    #[test]
    fn alpha_distinguishes_free_variables() {
        let t = CompTerm::Produce(ValueTerm::var("x"));
        let u = CompTerm::Produce(ValueTerm::var("y"));
        assert!(!alpha_eq_comp(&t, &u));
    }

    #[test]
    fn free_vars_respect_shadowing() {
        let t = bind(
            "x",
            CompTerm::Produce(ValueTerm::var("x")),
            CompTerm::Produce(ValueTerm::var("x")),
        );
        let fv = free_vars_comp(&t);
        assert!(fv.contains("x"), "the bound occurrence is only the second");
        assert_eq!(fv.len(), 1);
    }

    #[test]
    fn fresh_name_avoids_collisions() {
        let mut avoid = std::collections::BTreeSet::new();
        avoid.insert("x".to_owned());
        avoid.insert("x1".to_owned());
        assert_eq!(fresh_name("x", &avoid), "x2");
        assert_eq!(fresh_name("y", &avoid), "y");
    }
}
