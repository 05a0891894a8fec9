//! Lifecycle operations of the built-in Deadline and Timer types, and the
//! thread-local timer stamps behind `timer_record` / `elapsed`.
//!
//! Every operation is a function from a state to the sequence of states it
//! passes through; each step is checked for legality with the acting
//! thread as actor.

use crate::kernel::judge::{legality_from_good, object_violation, ClauseTag, Clauses, Legality, Violation};
use crate::kernel::state::{State, Transition};
use crate::kernel::value::{ObjId, Value};
use crate::lang::ast::PrimKind;
use crate::lang::eval::EvalError;
use crate::lang::model::{Model, PRIM_T, TIME_TIMED};
use crate::time::now;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrimitiveError {
    #[error("object is not owned by the acting thread")]
    NotOwned(ObjId),
    #[error("object is already closed")]
    AlreadyClosed(ObjId),
    #[error("object is not closed")]
    NotClosed(ObjId),
    #[error("deadline has expired and is frozen")]
    Frozen(ObjId),
    #[error("update not approved by the owner")]
    Approval(Violation),
    #[error("deadline expired before destruction")]
    DeadlineExpired(ObjId),
    #[error("timer stamp read before it was recorded")]
    UnknownStamp(usize),
    #[error("wrapped object violates its invariant")]
    Invariant(Violation),
    #[error("illegal transition")]
    Illegal(Violation),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PrimitiveError {
    pub fn code(&self) -> &'static str {
        match self {
            PrimitiveError::NotOwned(_) => "E_NOT_OWNED",
            PrimitiveError::AlreadyClosed(_) => "E_ALREADY_CLOSED",
            PrimitiveError::NotClosed(_) => "E_NOT_CLOSED",
            PrimitiveError::Frozen(_) => "E_FROZEN",
            PrimitiveError::Approval(_) => "E_APPROVAL",
            PrimitiveError::DeadlineExpired(_) => "E_DEADLINE_EXPIRED",
            PrimitiveError::UnknownStamp(_) => "E_UNKNOWN_STAMP",
            PrimitiveError::Invariant(_) => "E_INVARIANT",
            PrimitiveError::Illegal(_) => "E_ILLEGAL",
            PrimitiveError::Eval(_) => "E_EVAL",
        }
    }

    pub fn message(&self, m: &Model) -> String {
        match self {
            PrimitiveError::NotOwned(o)
            | PrimitiveError::AlreadyClosed(o)
            | PrimitiveError::NotClosed(o)
            | PrimitiveError::Frozen(o)
            | PrimitiveError::DeadlineExpired(o) => format!("{}: {self}", m.name_of(*o)),
            PrimitiveError::Approval(v) | PrimitiveError::Invariant(v) | PrimitiveError::Illegal(v) => {
                format!("{self}: {}", v.describe(m))
            }
            other => other.to_string(),
        }
    }
}

fn check(m: &Model, pre: &State, post: &State, actor: ObjId) -> Result<(), PrimitiveError> {
    match legality_from_good(m, Transition::new(pre, post, actor))? {
        Legality::Legal => Ok(()),
        Legality::Illegal(v) if v.tag == ClauseTag::Approval => Err(PrimitiveError::Approval(v)),
        Legality::Illegal(v) => Err(PrimitiveError::Illegal(v)),
    }
}

fn set_t(m: &Model, s: &mut State, d: ObjId, t: i64) {
    s.set_slot(m.slot(d, PRIM_T), Value::Int(t));
}

pub fn expiry(m: &Model, s: &State, d: ObjId) -> i64 {
    s.slot(m.slot(d, PRIM_T)).as_int()
}

fn set_timed(m: &Model, s: &mut State, o: ObjId, member: bool) {
    let i = m.slot(m.time, TIME_TIMED);
    let set = s.slot(i).as_set().with(o, member);
    s.set_slot(i, Value::Set(set));
}

/// Creates a Deadline or Timer: sets `t = T + delta` while the object is
/// open, registers it with time, then wraps it. Returns the three
/// intermediate poststates. The prestate must be good.
pub fn prim_new(
    m: &Model,
    s: &State,
    thread: ObjId,
    d: ObjId,
    delta: i64,
) -> Result<Vec<State>, PrimitiveError> {
    if s.is_closed(d) {
        return Err(PrimitiveError::AlreadyClosed(d));
    }
    if s.owner(d) != thread {
        return Err(PrimitiveError::NotOwned(d));
    }
    let t = now(m, s).checked_add(delta).ok_or(EvalError::Overflow)?;
    let mut a = s.clone();
    set_t(m, &mut a, d, t);
    check(m, s, &a, thread)?;
    let mut b = a.clone();
    set_timed(m, &mut b, d, true);
    check(m, &a, &b, thread)?;
    let mut c = b.clone();
    c.set_closed(d, true);
    if let Some(v) = object_violation(m, Transition::stutter(&c), d, 0, Clauses::All)? {
        return Err(PrimitiveError::Invariant(v));
    }
    check(m, &b, &c, thread)?;
    Ok(vec![a, b, c])
}

/// The state update of a reset, applied inside an atomic block to the
/// block's working poststate. Legality is checked when the block ends.
pub fn apply_reset(
    m: &Model,
    work: &mut State,
    kind: PrimKind,
    d: ObjId,
    delta: i64,
) -> Result<(), PrimitiveError> {
    let t_now = now(m, work);
    if kind == PrimKind::Deadline && work.is_closed(d) && t_now >= expiry(m, work, d) {
        return Err(PrimitiveError::Frozen(d));
    }
    let t = t_now.checked_add(delta).ok_or(EvalError::Overflow)?;
    set_t(m, work, d, t);
    Ok(())
}

/// A reset performed as its own atomic action.
pub fn prim_reset(
    m: &Model,
    s: &State,
    thread: ObjId,
    kind: PrimKind,
    d: ObjId,
    delta: i64,
) -> Result<State, PrimitiveError> {
    let mut post = s.clone();
    apply_reset(m, &mut post, kind, d, delta)?;
    check(m, s, &post, thread)?;
    Ok(post)
}

/// Destroys a Deadline or Timer: opens it and removes it from the timed
/// set in one transition.
pub fn prim_destroy(
    m: &Model,
    s: &State,
    thread: ObjId,
    kind: PrimKind,
    d: ObjId,
) -> Result<State, PrimitiveError> {
    if s.owner(d) != thread {
        return Err(PrimitiveError::NotOwned(d));
    }
    if !s.is_closed(d) {
        return Err(PrimitiveError::NotClosed(d));
    }
    if kind == PrimKind::Deadline && now(m, s) >= expiry(m, s, d) {
        return Err(PrimitiveError::DeadlineExpired(d));
    }
    let mut post = s.clone();
    post.set_closed(d, false);
    set_timed(m, &mut post, d, false);
    check(m, s, &post, thread)?;
    Ok(post)
}

/// Records the current time under stamp `k`.
pub fn timer_record(m: &Model, s: &State, stamps: &mut [Option<i64>], k: usize) {
    stamps[k] = Some(now(m, s));
}

/// Time elapsed since stamp `k` was recorded.
pub fn timer_elapsed(m: &Model, s: &State, stamps: &[Option<i64>], k: usize) -> Result<i64, PrimitiveError> {
    let at = stamps
        .get(k)
        .copied()
        .flatten()
        .ok_or(PrimitiveError::UnknownStamp(k))?;
    Ok(now(m, s) - at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::model::TIME_CUR;
    use crate::lang::parse_model;
    use crate::time::is_timed;

    const TWO: &str = "object d : Deadline { owner = w; }\nobject r : Timer { owner = w; }\nthread w { }\nthread x { }";

    fn setup(cur: i64) -> (Model, State, ObjId, ObjId, ObjId, ObjId) {
        let m = parse_model(TWO).unwrap();
        let mut s = m.initial_state();
        s.set_slot(m.slot(m.time, TIME_CUR), Value::Int(cur));
        let d = m.object_by_name("d").unwrap();
        let r = m.object_by_name("r").unwrap();
        let w = m.object_by_name("w").unwrap();
        let x = m.object_by_name("x").unwrap();
        (m, s, d, r, w, x)
    }

    #[test]
    fn new_sets_expiry_registers_and_wraps() {
        let (m, s, d, _, w, _) = setup(0);
        let steps = prim_new(&m, &s, w, d, 15).unwrap();
        let last = steps.last().unwrap();
        assert_eq!(expiry(&m, last, d), 15);
        assert!(last.is_closed(d));
        assert!(is_timed(&m, last, d));
        assert_eq!(now(&m, last), 0);
    }

    #[test]
    fn new_with_zero_delta_cannot_be_destroyed() {
        let (m, s, d, _, w, _) = setup(0);
        let c = prim_new(&m, &s, w, d, 0).unwrap().pop().unwrap();
        assert_eq!(expiry(&m, &c, d), 0);
        assert_eq!(
            prim_destroy(&m, &c, w, PrimKind::Deadline, d),
            Err(PrimitiveError::DeadlineExpired(d))
        );
    }

    #[test]
    fn new_requires_ownership_and_open_object() {
        let (m, s, d, _, w, x) = setup(0);
        assert_eq!(prim_new(&m, &s, x, d, 15), Err(PrimitiveError::NotOwned(d)));
        let c = prim_new(&m, &s, w, d, 15).unwrap().pop().unwrap();
        assert_eq!(prim_new(&m, &c, w, d, 15), Err(PrimitiveError::AlreadyClosed(d)));
    }

    #[test]
    fn reset_examples() {
        let (m, s, d, _, w, x) = setup(0);
        let mut c = prim_new(&m, &s, w, d, 15).unwrap().pop().unwrap();
        c.set_slot(m.slot(m.time, TIME_CUR), Value::Int(7));
        let r = prim_reset(&m, &c, w, PrimKind::Deadline, d, 15).unwrap();
        assert_eq!(expiry(&m, &r, d), 22);
        assert!(matches!(
            prim_reset(&m, &c, x, PrimKind::Deadline, d, 15),
            Err(PrimitiveError::Approval(_))
        ));
        c.set_slot(m.slot(m.time, TIME_CUR), Value::Int(15));
        assert_eq!(
            prim_reset(&m, &c, w, PrimKind::Deadline, d, 3),
            Err(PrimitiveError::Frozen(d))
        );
    }

    #[test]
    fn destroy_examples() {
        let (m, s, d, _, w, x) = setup(0);
        let mut c = prim_new(&m, &s, w, d, 15).unwrap().pop().unwrap();
        c.set_slot(m.slot(m.time, TIME_CUR), Value::Int(10));
        assert_eq!(prim_destroy(&m, &c, x, PrimKind::Deadline, d), Err(PrimitiveError::NotOwned(d)));
        let gone = prim_destroy(&m, &c, w, PrimKind::Deadline, d).unwrap();
        assert!(!gone.is_closed(d));
        assert!(!is_timed(&m, &gone, d));
        c.set_slot(m.slot(m.time, TIME_CUR), Value::Int(15));
        assert_eq!(
            prim_destroy(&m, &c, w, PrimKind::Deadline, d),
            Err(PrimitiveError::DeadlineExpired(d))
        );
    }

    #[test]
    fn timers_have_no_freeze_and_no_expiry_check() {
        let (m, s, _, r, w, _) = setup(0);
        let mut c = prim_new(&m, &s, w, r, 15).unwrap().pop().unwrap();
        assert_eq!(expiry(&m, &c, r), 15);
        c.set_slot(m.slot(m.time, TIME_CUR), Value::Int(15));
        let reset = prim_reset(&m, &c, w, PrimKind::Timer, r, 4).unwrap();
        assert_eq!(expiry(&m, &reset, r), 19);
        let gone = prim_destroy(&m, &c, w, PrimKind::Timer, r).unwrap();
        assert!(!gone.is_closed(r));
    }

    #[test]
    fn stamps_measure_elapsed_time() {
        let (m, mut s, ..) = setup(7);
        let mut stamps = vec![None];
        assert_eq!(timer_elapsed(&m, &s, &stamps, 0), Err(PrimitiveError::UnknownStamp(0)));
        timer_record(&m, &s, &mut stamps, 0);
        assert_eq!(timer_elapsed(&m, &s, &stamps, 0), Ok(0));
        s.set_slot(m.slot(m.time, TIME_CUR), Value::Int(9));
        assert_eq!(timer_elapsed(&m, &s, &stamps, 0), Ok(2));
    }
}
