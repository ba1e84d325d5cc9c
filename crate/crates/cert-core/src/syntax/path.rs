//! Tree addressing for subterms.
//!
//! A path is a sequence of child indices from the root.  Children are
//! numbered in syntactic order, counting value and computation children
//! together:
//!
//! - `produce v`, `force v`, `charge(v)`, `rand v`: `[v]`
//! - `x <- t; u`: `[t, u]`
//! - `\x. t`, `fix x. t`: `[t]`
//! - `t v`: `[t, v]`
//! - `let x = v in t`: `[v, t]`
//! - `if0 v then t else u`: `[v, t, u]`
//! - `unpair v as (x, y) in t`: `[v, t]`
//! - `case v of nil => t | cons h tl => u`: `[v, t, u]`
//! - `choose p { t } { u }`: `[t, u]`
//! - `op(v1, ..., vn)`: `[v1, ..., vn]`
//! - `v + w`, `(v, w)`, `cons v w`: `[v, w]`
//! - `thunk t`: `[t]`
//!
//! The rewriter uses paths to aim a rule at a redex; the parser emits source
//! spans in the same order so diagnostics can follow paths too.

use super::ast::{CompTerm, ValueTerm};

/// A borrowed subterm, which can sit in either layer.
#[derive(Clone, Copy, Debug)]
pub enum TermRef<'a> {
    Comp(&'a CompTerm),
    Value(&'a ValueTerm),
}

/// An owned subterm, for splicing back in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermNode {
    Comp(CompTerm),
    Value(ValueTerm),
}

/// Children of a node, in path order.
pub fn children(node: TermRef<'_>) -> Vec<TermRef<'_>> {
    match node {
        TermRef::Comp(t) => comp_children(t),
        TermRef::Value(v) => value_children(v),
    }
}

fn comp_children(t: &CompTerm) -> Vec<TermRef<'_>> {
    use CompTerm::*;
    match t {
        Produce(v) | Force(v) | Charge(v) | RandNat(v) => vec![TermRef::Value(v)],
        Bind(_, t1, t2) => vec![TermRef::Comp(t1), TermRef::Comp(t2)],
        Lam(_, _, body) | Fix(_, _, body) => vec![TermRef::Comp(body)],
        App(t1, v) => vec![TermRef::Comp(t1), TermRef::Value(v)],
        LetVal(_, v, body) => vec![TermRef::Value(v), TermRef::Comp(body)],
        IfZero(v, t1, t2) => vec![TermRef::Value(v), TermRef::Comp(t1), TermRef::Comp(t2)],
        Unpair(_, _, v, body) => vec![TermRef::Value(v), TermRef::Comp(body)],
        CaseList(v, nil_branch, _, _, cons_branch) => vec![
            TermRef::Value(v),
            TermRef::Comp(nil_branch),
            TermRef::Comp(cons_branch),
        ],
        Uniform => vec![],
        Choose(_, t1, t2) => vec![TermRef::Comp(t1), TermRef::Comp(t2)],
        PrimOp(_, args) => args.iter().map(TermRef::Value).collect(),
    }
}

fn value_children(v: &ValueTerm) -> Vec<TermRef<'_>> {
    use ValueTerm::*;
    match v {
        Var(_) | UnitLit | NatLit(_) | RealLit(_) | CostLit(_) | Nil(_) => vec![],
        CostAdd(a, b) | Pair(a, b) | Cons(a, b) => {
            vec![TermRef::Value(a), TermRef::Value(b)]
        }
        Thunk(t) => vec![TermRef::Comp(t)],
    }
}

/// Resolve a path from the root; `None` when the path walks off the tree.
pub fn get_at<'a>(root: &'a CompTerm, path: &[u32]) -> Option<TermRef<'a>> {
    let mut node = TermRef::Comp(root);
    for &i in path {
        node = children(node).into_iter().nth(i as usize)?;
    }
    Some(node)
}

/// Rebuild the tree with the subterm at `path` replaced.  Fails when the path
/// is invalid or the replacement sits in the wrong layer for the slot.
pub fn replace_at(root: &CompTerm, path: &[u32], replacement: TermNode) -> Option<CompTerm> {
    match replace_node(TermRef::Comp(root), path, replacement)? {
        TermNode::Comp(t) => Some(t),
        TermNode::Value(_) => None,
    }
}

fn replace_node(node: TermRef<'_>, path: &[u32], replacement: TermNode) -> Option<TermNode> {
    let Some((&head, rest)) = path.split_first() else {
        return match (node, replacement) {
            (TermRef::Comp(_), r @ TermNode::Comp(_)) => Some(r),
            (TermRef::Value(_), r @ TermNode::Value(_)) => Some(r),
            _ => None,
        };
    };
    let child = children(node).into_iter().nth(head as usize)?;
    let rebuilt = replace_node(child, rest, replacement)?;
    Some(match node {
        TermRef::Comp(t) => TermNode::Comp(rebuild_comp(t, head, rebuilt)?),
        TermRef::Value(v) => TermNode::Value(rebuild_value(v, head, rebuilt)?),
    })
}

fn rebuild_comp(t: &CompTerm, index: u32, new: TermNode) -> Option<CompTerm> {
    use CompTerm::*;
    let mut t = t.clone();
    {
        let slot: &mut dyn SlotMut = match (&mut t, index) {
            (Produce(v), 0) | (Force(v), 0) | (Charge(v), 0) | (RandNat(v), 0) => v,
            (Bind(_, t1, _), 0) => t1.as_mut(),
            (Bind(_, _, t2), 1) => t2.as_mut(),
            (Lam(_, _, body), 0) | (Fix(_, _, body), 0) => body.as_mut(),
            (App(t1, _), 0) => t1.as_mut(),
            (App(_, v), 1) => v,
            (LetVal(_, v, _), 0) => v,
            (LetVal(_, _, body), 1) => body.as_mut(),
            (IfZero(v, _, _), 0) => v,
            (IfZero(_, t1, _), 1) => t1.as_mut(),
            (IfZero(_, _, t2), 2) => t2.as_mut(),
            (Unpair(_, _, v, _), 0) => v,
            (Unpair(_, _, _, body), 1) => body.as_mut(),
            (CaseList(v, _, _, _, _), 0) => v,
            (CaseList(_, nil_branch, _, _, _), 1) => nil_branch.as_mut(),
            (CaseList(_, _, _, _, cons_branch), 2) => cons_branch.as_mut(),
            (Choose(_, t1, _), 0) => t1.as_mut(),
            (Choose(_, _, t2), 1) => t2.as_mut(),
            (PrimOp(_, args), i) => args.get_mut(i as usize)?,
            _ => return None,
        };
        slot.set(new)?;
    }
    Some(t)
}

fn rebuild_value(v: &ValueTerm, index: u32, new: TermNode) -> Option<ValueTerm> {
    use ValueTerm::*;
    let mut v = v.clone();
    {
        let slot: &mut dyn SlotMut = match (&mut v, index) {
            (CostAdd(a, _), 0) | (Pair(a, _), 0) | (Cons(a, _), 0) => a.as_mut(),
            (CostAdd(_, b), 1) | (Pair(_, b), 1) | (Cons(_, b), 1) => b.as_mut(),
            (Thunk(t), 0) => std::rc::Rc::<CompTerm>::make_mut(t),
            _ => return None,
        };
        slot.set(new)?;
    }
    Some(v)
}

/// A mutable slot that accepts a replacement of the matching layer.
trait SlotMut {
    fn set(&mut self, new: TermNode) -> Option<()>;
}

impl SlotMut for CompTerm {
    fn set(&mut self, new: TermNode) -> Option<()> {
        match new {
            TermNode::Comp(t) => {
                *self = t;
                Some(())
            }
            TermNode::Value(_) => None,
        }
    }
}

impl SlotMut for ValueTerm {
    fn set(&mut self, new: TermNode) -> Option<()> {
        match new {
            TermNode::Value(v) => {
                *self = v;
                Some(())
            }
            TermNode::Comp(_) => None,
        }
    }
}

/// All subterm positions in preorder, paired with their paths.
pub fn preorder(root: &CompTerm) -> Vec<(Vec<u32>, TermRef<'_>)> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::new(), TermRef::Comp(root))];
    while let Some((path, node)) = stack.pop() {
        out.push((path.clone(), node));
        let kids = children(node);
        // Reverse so the leftmost child is visited first.
        for (i, child) in kids.into_iter().enumerate().rev() {
            let mut p = path.clone();
            p.push(i as u32);
            stack.push((p, child));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::ast::{CompTerm, ValueTerm};

    fn sample() -> CompTerm {
        // x <- produce 1; produce (x, ())
        CompTerm::Bind(
            "x".into(),
            Box::new(CompTerm::Produce(ValueTerm::NatLit(1))),
            Box::new(CompTerm::Produce(ValueTerm::Pair(
                Box::new(ValueTerm::var("x")),
                Box::new(ValueTerm::UnitLit),
            ))),
        )
    }

    #[test]
    fn get_and_replace_roundtrip() {
        let t = sample();
        match get_at(&t, &[1, 0, 0]) {
            Some(TermRef::Value(ValueTerm::Var(x))) => assert_eq!(x, "x"),
            other => panic!("unexpected node: {other:?}"),
        }
        let replaced = replace_at(&t, &[1, 0, 0], TermNode::Value(ValueTerm::NatLit(9))).unwrap();
        match get_at(&replaced, &[1, 0, 0]) {
            Some(TermRef::Value(ValueTerm::NatLit(9))) => {}
            other => panic!("replacement missed: {other:?}"),
        }
        // Replacing with the wrong layer is rejected.
        assert!(replace_at(&t, &[1, 0, 0], TermNode::Comp(CompTerm::Uniform)).is_none());
    }

    #[test]
    fn preorder_visits_left_to_right() {
        let t = sample();
        let nodes = preorder(&t);
        assert_eq!(nodes[0].0, Vec::<u32>::new());
        assert_eq!(nodes[1].0, vec![0]);
        let paths: Vec<_> = nodes.iter().map(|(p, _)| p.clone()).collect();
        assert!(paths.contains(&vec![1, 0, 1]));
        assert_eq!(nodes.len(), 7);
    }
}
