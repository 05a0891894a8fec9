//! The core judgments: updated objects, per-object two-state invariants,
//! good states, good transitions and legal transitions.

use serde::Serialize;

use super::state::{State, Transition};
use super::value::{ObjId, ObjSet};
use crate::lang::eval::{EvalCtx, EvalError};
use crate::lang::model::{ClauseKind, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseTag {
    Invariant,
    Timed,
    Approval,
    OnUnwrap,
    /// Nonvolatile fields do not change while the object stays closed.
    NonvolatileFrame,
    /// The set of owned objects does not change while the owner stays closed.
    OwnsFrame,
    /// Open objects are owned by threads.
    OpenOwner,
    /// The time object is always closed.
    TimeClosed,
}

impl From<ClauseKind> for ClauseTag {
    fn from(k: ClauseKind) -> Self {
        match k {
            ClauseKind::Invariant => ClauseTag::Invariant,
            ClauseKind::Timed => ClauseTag::Timed,
            ClauseKind::Approval(_) => ClauseTag::Approval,
            ClauseKind::OnUnwrap => ClauseTag::OnUnwrap,
        }
    }
}

/// The first clause of `object` that fails on a transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Violation {
    pub object: ObjId,
    pub tag: ClauseTag,
    pub clause: String,
}

impl Violation {
    pub fn describe(&self, m: &Model) -> String {
        format!("{}: {}", m.name_of(self.object), self.clause)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Legality {
    Legal,
    Illegal(Violation),
}

impl Legality {
    pub fn is_legal(&self) -> bool {
        matches!(self, Legality::Legal)
    }
}

/// Which clauses an invariant check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clauses {
    All,
    WithoutApproval,
    ApprovalOnly,
}

/// Objects with at least one differing field or meta-field. An object whose
/// set of owned objects changes counts as updated.
pub fn updated_objects(m: &Model, tr: Transition<'_>) -> ObjSet {
    let (pre, post) = (tr.pre, tr.post);
    let mut out = ObjSet::EMPTY;
    for o in m.object_ids() {
        let changed = pre.is_closed(o) != post.is_closed(o)
            || pre.is_valid(o) != post.is_valid(o)
            || pre.owner(o) != post.owner(o)
            || m.slots_of(o).any(|i| pre.slot(i) != post.slot(i));
        if changed {
            out = out.with(o, true);
        }
        let (a, b) = (pre.owner(o), post.owner(o));
        if a != b {
            out = out.with(a, true).with(b, true);
        }
    }
    out
}

/// The two-state invariant of `o` on `tr`.
pub fn object_inv2(m: &Model, tr: Transition<'_>, o: ObjId) -> Result<bool, EvalError> {
    object_inv2_at(m, tr, o, 0)
}

pub fn object_inv2_at(m: &Model, tr: Transition<'_>, o: ObjId, depth: u32) -> Result<bool, EvalError> {
    Ok(object_violation(m, tr, o, depth, Clauses::All)?.is_none())
}

/// The first failing clause of `o` on `tr`, if any. User clauses are tried
/// before built-in ones, approvals last.
pub fn object_violation(
    m: &Model,
    tr: Transition<'_>,
    o: ObjId,
    depth: u32,
    which: Clauses,
) -> Result<Option<Violation>, EvalError> {
    let Some(decl) = m.type_decl(o) else {
        return Ok(None);
    };
    let (pre, post) = (tr.pre, tr.post);
    let ctx = EvalCtx {
        model: m,
        tr,
        this: o,
        stamps: &[],
        depth,
    };
    let fail = |tag: ClauseTag, clause: &str| {
        Ok(Some(Violation {
            object: o,
            tag,
            clause: clause.to_string(),
        }))
    };
    if which != Clauses::ApprovalOnly {
        for c in &decl.clauses {
            match c.kind {
                ClauseKind::Approval(_) => continue,
                ClauseKind::Invariant if !post.is_closed(o) => continue,
                _ => {}
            }
            if !ctx.eval_bool(&c.expr)? {
                return fail(c.kind.into(), &c.text);
            }
        }
        let stays_closed = pre.is_closed(o) && post.is_closed(o);
        if stays_closed {
            for (f, fd) in decl.fields.iter().enumerate() {
                let i = m.slot(o, f);
                if !fd.volatile && pre.slot(i) != post.slot(i) {
                    return fail(
                        ClauseTag::NonvolatileFrame,
                        &format!("nonvolatile field `{}` unchanged while closed", fd.name),
                    );
                }
            }
            if pre.owns(o) != post.owns(o) {
                return fail(ClauseTag::OwnsFrame, "owned objects unchanged while closed");
            }
        }
        if !post.is_closed(o) && !m.is_thread(post.owner(o)) {
            return fail(ClauseTag::OpenOwner, "open objects are owned by threads");
        }
        if o == m.time && !post.is_closed(o) {
            return fail(ClauseTag::TimeClosed, "the time object is always closed");
        }
    }
    if which != Clauses::WithoutApproval {
        for c in &decl.clauses {
            if matches!(c.kind, ClauseKind::Approval(_)) && !ctx.eval_bool(&c.expr)? {
                return fail(ClauseTag::Approval, &c.text);
            }
        }
    }
    Ok(None)
}

/// The first valid object whose invariant fails on the stutter of `s`.
pub fn bad_object(m: &Model, s: &State) -> Result<Option<Violation>, EvalError> {
    let tr = Transition::stutter(s);
    for o in m.object_ids() {
        if !s.is_valid(o) {
            continue;
        }
        if let Some(v) = object_violation(m, tr, o, 0, Clauses::All)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

pub fn is_good_state(m: &Model, s: &State) -> Result<bool, EvalError> {
    Ok(bad_object(m, s)?.is_none())
}

pub fn is_good_transition(m: &Model, tr: Transition<'_>) -> Result<bool, EvalError> {
    for o in m.object_ids() {
        if !object_inv2(m, tr, o)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Legal iff the prestate is not good or every updated object's invariant
/// holds. The witness is the first failing clause, trying all non-approval
/// clauses of all updated objects before any approval clause.
pub fn is_legal_transition(m: &Model, tr: Transition<'_>) -> Result<Legality, EvalError> {
    if !is_good_state(m, tr.pre)? {
        return Ok(Legality::Legal);
    }
    legality_from_good(m, tr)
}

/// [`is_legal_transition`] for a prestate already known to be good.
pub fn legality_from_good(m: &Model, tr: Transition<'_>) -> Result<Legality, EvalError> {
    let updated = updated_objects(m, tr);
    for pass in [Clauses::WithoutApproval, Clauses::ApprovalOnly] {
        for o in updated.iter() {
            if let Some(v) = object_violation(m, tr, o, 0, pass)? {
                return Ok(Legality::Illegal(v));
            }
        }
    }
    Ok(Legality::Legal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::value::Value;
    use crate::lang::model::{PRIM_T, TIME_CUR, TIME_TIMED};
    use crate::lang::parse_model;

    fn deadline_model() -> (Model, ObjId) {
        let m = parse_model("object d : Deadline { t = 15; closed = true; }").unwrap();
        let d = m.object_by_name("d").unwrap();
        (m, d)
    }

    fn with_cur(m: &Model, s: &State, cur: i64) -> State {
        let mut t = s.clone();
        t.set_slot(m.slot(m.time, TIME_CUR), Value::Int(cur));
        t
    }

    #[test]
    fn updated_objects_counts_fields_and_meta() {
        let (m, d) = deadline_model();
        let s = m.initial_state();
        assert_eq!(updated_objects(&m, Transition::stutter(&s)), ObjSet::EMPTY);
        let t = with_cur(&m, &s, 5);
        let u = updated_objects(&m, Transition::new(&s, &t, ObjId::ENV));
        assert_eq!(u.iter().collect::<Vec<_>>(), vec![m.time]);
        let mut o = s.clone();
        o.set_closed(d, false);
        let u = updated_objects(&m, Transition::new(&s, &o, ObjId::ENV));
        assert_eq!(u.iter().collect::<Vec<_>>(), vec![d]);
    }

    #[test]
    fn deadline_invariant_on_transitions() {
        let (m, d) = deadline_model();
        let s10 = with_cur(&m, &m.initial_state(), 10);
        let s12 = with_cur(&m, &s10, 12);
        assert!(object_inv2(&m, Transition::new(&s10, &s12, ObjId::ENV), d).unwrap());
        let s14 = with_cur(&m, &s10, 14);
        let s16 = with_cur(&m, &s10, 16);
        assert!(!object_inv2(&m, Transition::new(&s14, &s16, ObjId::ENV), d).unwrap());
        let mut open14 = s14.clone();
        open14.set_closed(d, false);
        let mut open16 = s16.clone();
        open16.set_closed(d, false);
        assert!(object_inv2(&m, Transition::new(&open14, &open16, ObjId::ENV), d).unwrap());
    }

    #[test]
    fn good_state_examples() {
        let (m, d) = deadline_model();
        let s = with_cur(&m, &m.initial_state(), 10);
        assert!(is_good_state(&m, &s).unwrap());
        let late = with_cur(&m, &s, 16);
        assert!(!is_good_state(&m, &late).unwrap());
        let mut open = late.clone();
        open.set_closed(d, false);
        assert!(is_good_state(&m, &open).unwrap());
    }

    #[test]
    fn legality_examples() {
        let (m, d) = deadline_model();
        let late = with_cur(&m, &m.initial_state(), 16);
        // A bad prestate makes everything legal.
        let mut wild = late.clone();
        wild.set_slot(m.slot(d, PRIM_T), Value::Int(99));
        assert!(is_legal_transition(&m, Transition::new(&late, &wild, ObjId::ENV))
            .unwrap()
            .is_legal());
        // A non-owner changing t is refused by the approval clause.
        let owner = parse_model("object d : Deadline { t = 15; closed = true; owner = w; }\nthread w { }\nthread x { }")
            .unwrap();
        let d = owner.object_by_name("d").unwrap();
        let x = owner.object_by_name("x").unwrap();
        let w = owner.object_by_name("w").unwrap();
        let pre = owner.initial_state();
        let mut post = pre.clone();
        post.set_slot(owner.slot(d, PRIM_T), Value::Int(20));
        match is_legal_transition(&owner, Transition::new(&pre, &post, x)).unwrap() {
            Legality::Illegal(v) => {
                assert_eq!(v.object, d);
                assert_eq!(v.tag, ClauseTag::Approval);
            }
            Legality::Legal => panic!("non-owner update accepted"),
        }
        assert!(is_legal_transition(&owner, Transition::new(&pre, &post, w))
            .unwrap()
            .is_legal());
    }

    #[test]
    fn timed_removal_is_an_update_of_time() {
        let (m, d) = deadline_model();
        let s = m.initial_state();
        let mut t = s.clone();
        let timed = m.timed_set(&s).with(d, false);
        t.set_slot(m.slot(m.time, TIME_TIMED), Value::Set(timed));
        let u = updated_objects(&m, Transition::new(&s, &t, ObjId::ENV));
        assert!(u.contains(m.time));
        assert!(!is_legal_transition(&m, Transition::new(&s, &t, ObjId::ENV))
            .unwrap()
            .is_legal());
    }
}
