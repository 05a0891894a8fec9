//! The built-in `Time` object: accessors and a direct implementation of
//! its three clauses.
//!
//! The clauses are also installed as ordinary declarations (see
//! [`crate::lang::prelude`]) and evaluated by the generic evaluator;
//! [`check_time_clauses`] is a second, hand-written route used to
//! cross-check it and to name a witness object on failure.

use crate::kernel::judge::object_inv2;
use crate::kernel::state::{State, Transition};
use crate::kernel::value::ObjId;
use crate::lang::diag::Diagnostics;
use crate::lang::eval::EvalError;
use crate::lang::model::{Model, TIME_CUR, TIME_TIMED};
use crate::lang::{ast::ModelAst, resolve};

/// Resolves a user model with `Time` and the `time` object installed.
/// Declaring a type named `Time` is reported as a diagnostic.
pub fn install_time(ast: ModelAst) -> Result<Model, Diagnostics> {
    resolve(ast)
}

pub fn now(m: &Model, s: &State) -> i64 {
    s.slot(m.slot(m.time, TIME_CUR)).as_int()
}

/// How far time moved on a transition.
pub fn delta(m: &Model, tr: Transition<'_>) -> i64 {
    now(m, tr.post) - now(m, tr.pre)
}

pub fn is_timed(m: &Model, s: &State, o: ObjId) -> bool {
    s.slot(m.slot(m.time, TIME_TIMED)).as_set().contains(o)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeClause {
    Monotonic,
    Stability,
    RespectsTimed,
}

impl TimeClause {
    pub fn text(self) -> &'static str {
        match self {
            TimeClause::Monotonic => "old(cur) <= cur",
            TimeClause::Stability => "forall o: old(timed[o]) ==> timed[o] || inv2(o)",
            TimeClause::RespectsTimed => "forall o: timed[o] && closed(o) ==> unchanged(cur) || inv2(o)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeVerdict {
    Pass,
    Fail {
        clause: TimeClause,
        witness: Option<ObjId>,
    },
}

/// Evaluates the three clauses of `Time` on `tr`, in declaration order.
pub fn check_time_clauses(m: &Model, tr: Transition<'_>) -> Result<TimeVerdict, EvalError> {
    let (pre, post) = (tr.pre, tr.post);
    if now(m, pre) > now(m, post) {
        return Ok(TimeVerdict::Fail {
            clause: TimeClause::Monotonic,
            witness: None,
        });
    }
    for o in m.object_ids() {
        if is_timed(m, pre, o) && !is_timed(m, post, o) && !object_inv2(m, tr, o)? {
            return Ok(TimeVerdict::Fail {
                clause: TimeClause::Stability,
                witness: Some(o),
            });
        }
    }
    let unchanged = now(m, pre) == now(m, post);
    for o in m.object_ids() {
        if is_timed(m, post, o) && post.is_closed(o) && !unchanged && !object_inv2(m, tr, o)? {
            return Ok(TimeVerdict::Fail {
                clause: TimeClause::RespectsTimed,
                witness: Some(o),
            });
        }
    }
    Ok(TimeVerdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::value::Value;
    use crate::lang::parse_model;

    const BOILER: &str = "
        type Boiler timed {
          volatile int level;
          volatile bool on;
          invariant level == old(level) + (old(on) ? dT : 0 - dT);
        }
        object boiler : Boiler { level = 50; on = true; closed = true; }
    ";

    fn set_cur(m: &Model, s: &State, cur: i64) -> State {
        let mut t = s.clone();
        t.set_slot(m.slot(m.time, TIME_CUR), Value::Int(cur));
        t
    }

    #[test]
    fn empty_model_has_only_time() {
        let m = parse_model("").unwrap();
        assert_eq!(m.objects.len(), 1);
        let s = m.initial_state();
        assert_eq!(now(&m, &s), 0);
        assert!(s.is_closed(m.time));
        assert_eq!(m.timed_set(&s).iter().count(), 0);
    }

    #[test]
    fn initially_closed_timed_objects_are_registered() {
        let m = parse_model(BOILER).unwrap();
        let b = m.object_by_name("boiler").unwrap();
        assert!(is_timed(&m, &m.initial_state(), b));
    }

    #[test]
    fn backwards_time_fails_monotonicity() {
        let m = parse_model("").unwrap();
        let pre = set_cur(&m, &m.initial_state(), 5);
        let post = set_cur(&m, &pre, 4);
        let v = check_time_clauses(&m, Transition::new(&pre, &post, ObjId::ENV)).unwrap();
        assert_eq!(
            v,
            TimeVerdict::Fail {
                clause: TimeClause::Monotonic,
                witness: None
            }
        );
    }

    #[test]
    fn removing_closed_boiler_from_timed_fails_stability() {
        let m = parse_model(BOILER).unwrap();
        let b = m.object_by_name("boiler").unwrap();
        let pre = m.initial_state();
        let mut post = pre.clone();
        let timed = m.timed_set(&pre).with(b, false);
        post.set_slot(m.slot(m.time, TIME_TIMED), Value::Set(timed));
        let v = check_time_clauses(&m, Transition::new(&pre, &post, ObjId::ENV)).unwrap();
        assert_eq!(
            v,
            TimeVerdict::Fail {
                clause: TimeClause::Stability,
                witness: Some(b)
            }
        );
    }

    #[test]
    fn advance_with_dynamics_passes_and_frozen_level_fails() {
        let m = parse_model(BOILER).unwrap();
        let b = m.object_by_name("boiler").unwrap();
        let pre = set_cur(&m, &m.initial_state(), 5);
        let mut post = set_cur(&m, &pre, 10);
        post.set_slot(m.slot(b, 0), Value::Int(55));
        let tr = Transition::new(&pre, &post, ObjId::ENV);
        assert_eq!(check_time_clauses(&m, tr).unwrap(), TimeVerdict::Pass);
        let frozen = set_cur(&m, &pre, 10);
        let v = check_time_clauses(&m, Transition::new(&pre, &frozen, ObjId::ENV)).unwrap();
        assert_eq!(
            v,
            TimeVerdict::Fail {
                clause: TimeClause::RespectsTimed,
                witness: Some(b)
            }
        );
    }

    #[test]
    fn redeclaring_time_is_rejected() {
        let err = parse_model("type Time { int cur; }").unwrap_err();
        assert!(err.first().message.contains("built in"));
    }

    #[test]
    fn unwrapping_time_is_rejected_statically() {
        let err = parse_model("thread w { unwrap time; }").unwrap_err();
        assert!(err.first().message.contains("eternal"));
    }
}
