use std::sync::OnceLock;

use proptest::prelude::*;

use chronoverify::explorer::canon::{canonicalize, min_time, shift};
use chronoverify::explorer::{explore, Exploration, Options};
use chronoverify::kernel::judge::{
    is_good_state, is_legal_transition, object_violation, updated_objects, Clauses, Legality,
};
use chronoverify::kernel::state::{State, Transition};
use chronoverify::kernel::value::{ObjId, ObjSet, Value};
use chronoverify::lang::model::{ClauseKind, TIME_CUR, TIME_TIMED};
use chronoverify::lang::pretty::expr_to_string;
use chronoverify::lang::{parse_expr, parse_model, Model};

const PRIMS: &str = "\
type Strict timed {
  volatile ghost int t;
  approves(owner, t);
  invariant T <= t;
  invariant unchanged(t) || old(T < t);
  on_unwrap old(T < t);
}
object d : Deadline { closed = true; }
object s : Strict { closed = true; }
object k : Timer { closed = true; }
thread w { }
";

fn prims() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| parse_model(PRIMS).unwrap())
}

/// Clock, expiry, closedness, timed membership and owner of each primitive.
#[derive(Debug, Clone)]
struct Snap {
    cur: i64,
    t: i64,
    closed: bool,
    timed: bool,
    thread_owned: bool,
}

fn snap() -> impl Strategy<Value = Snap> {
    (0i64..6, 0i64..6, any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(cur, t, closed, timed, thread_owned)| Snap {
        cur,
        t,
        closed,
        timed,
        thread_owned,
    })
}

/// Every primitive gets the same values.
fn mirror(m: &Model, s: &Snap) -> State {
    let mut st = m.initial_state();
    st.set_slot(m.slot(m.time, TIME_CUR), Value::Int(s.cur));
    let w = m.object_by_name("w").unwrap();
    let mut timed = ObjSet::EMPTY;
    for name in ["d", "s", "k"] {
        let o = m.object_by_name(name).unwrap();
        st.set_slot(m.slot(o, 0), Value::Int(s.t));
        st.set_closed(o, s.closed);
        st.set_owner(o, if s.thread_owned { w } else { ObjId::ENV });
        timed = timed.with(o, s.timed);
    }
    st.set_slot(m.slot(m.time, TIME_TIMED), Value::Set(timed));
    st
}

fn fails(m: &Model, tr: Transition<'_>, name: &str) -> bool {
    let o = m.object_by_name(name).unwrap();
    object_violation(m, tr, o, 0, Clauses::All).unwrap().is_some()
}

/// Integer expressions over `x` and `y`.
fn int_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (0i64..100).prop_map(|n| n.to_string()),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| format!("(({a} < {b}) ? {c} : {a})")),
            inner.clone().prop_map(|a| format!("(0 - {a})")),
        ]
    })
}

fn bool_expr(with_old: bool) -> impl Strategy<Value = String> {
    let atom = (int_expr(), int_expr(), prop_oneof![Just("<"), Just("<="), Just("=="), Just("!="), Just(">=")])
        .prop_map(|(a, b, op)| format!("{a} {op} {b}"));
    atom.prop_recursive(3, 12, 2, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} && {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} || {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} ==> {b})")),
            inner.clone().prop_map(|a| format!("!({a})")),
            inner.prop_map(move |a| if with_old { format!("old({a})") } else { a }),
        ]
    })
}

fn boiler() -> &'static (Model, Exploration) {
    static X: OnceLock<(Model, Exploration)> = OnceLock::new();
    X.get_or_init(|| {
        let m = chronoverify::corpus::fixture("boiler_deadline").unwrap().model().unwrap();
        let x = explore(&m, &Options::default()).unwrap();
        (m, x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn updated_objects_are_exactly_the_changed_ones(a in snap(), b in snap()) {
        let m = prims();
        let (pre, post) = (mirror(m, &a), mirror(m, &b));
        let got = updated_objects(m, Transition::new(&pre, &post, ObjId::ENV));
        for o in m.object_ids() {
            let changed = pre.is_closed(o) != post.is_closed(o)
                || pre.owner(o) != post.owner(o)
                || m.slots_of(o).any(|i| pre.slot(i) != post.slot(i))
                || pre.owns(o) != post.owns(o);
            prop_assert_eq!(got.contains(o), changed, "object {}", m.name_of(o));
        }
        prop_assert!(updated_objects(m, Transition::stutter(&pre)).is_empty());
    }

    #[test]
    fn stutter_is_legal_and_bad_prestates_permit_anything(a in snap(), b in snap()) {
        let m = prims();
        let (pre, post) = (mirror(m, &a), mirror(m, &b));
        prop_assert_eq!(is_legal_transition(m, Transition::stutter(&pre)).unwrap(), Legality::Legal);
        if !is_good_state(m, &pre).unwrap() {
            prop_assert_eq!(is_legal_transition(m, Transition::new(&pre, &post, ObjId::ENV)).unwrap(), Legality::Legal);
        }
    }

    #[test]
    fn deadline_is_timer_plus_freeze_clauses(a in snap(), b in snap(), thread in any::<bool>()) {
        let m = prims();
        let (pre, post) = (mirror(m, &a), mirror(m, &b));
        let actor = if thread { m.object_by_name("w").unwrap() } else { ObjId::ENV };
        let tr = Transition::new(&pre, &post, actor);
        prop_assert_eq!(fails(m, tr, "d"), fails(m, tr, "s"));
        if fails(m, tr, "k") {
            prop_assert!(fails(m, tr, "d"));
        }
    }

    #[test]
    fn old_is_identity_on_stutters(e in int_expr(), x in 0i64..100, y in 0i64..100, b in bool_expr(false)) {
        let src = format!(
            "type S {{ volatile int x in 0..100; volatile int y in 0..100; invariant old({e}) == {e}; invariant old({b}) == ({b}); }}\nobject o : S {{ closed = true; }}"
        );
        let m = parse_model(&src).unwrap();
        let o = m.object_by_name("o").unwrap();
        let mut s = m.initial_state();
        s.set_slot(m.slot(o, 0), Value::Int(x));
        s.set_slot(m.slot(o, 1), Value::Int(y));
        prop_assert!(is_good_state(&m, &s).unwrap());
    }

    #[test]
    fn printed_expressions_parse_back(src in bool_expr(true)) {
        let e = parse_expr(&src).unwrap();
        let printed = expr_to_string(&e);
        let again = parse_expr(&printed).unwrap();
        prop_assert_eq!(expr_to_string(&again), printed);
    }

    #[test]
    fn canonical_form_ignores_time_shifts(i in any::<prop::sample::Index>(), k in -50i64..50) {
        let (m, x) = boiler();
        let c = &x.configs[i.index(x.configs.len())];
        prop_assert_eq!(min_time(m, c), 0);
        let (canon, off) = canonicalize(m, &shift(m, c, k));
        prop_assert_eq!(&canon, c);
        prop_assert_eq!(off, k);
    }
}

#[test]
fn deadline_clauses_extend_timer_clauses_by_two() {
    let m = prims();
    let texts = |name: &str| -> Vec<(ClauseKind, String)> {
        let o = m.object_by_name(name).unwrap();
        m.type_decl(o).unwrap().clauses.iter().map(|c| (c.kind, c.text.clone())).collect()
    };
    let (d, k) = (texts("d"), texts("k"));
    let extra: Vec<_> = d.iter().filter(|c| !k.contains(c)).collect();
    assert!(k.iter().all(|c| d.contains(c)));
    assert_eq!(extra.len(), 2, "{extra:?}");
}
