//! Built-in declarations, written in the model language itself and
//! installed ahead of every user model.

pub const PRELUDE: &str = "\
type Time {
  volatile ghost int cur;
  volatile ghost objset timed;
  invariant old(cur) <= cur;
  invariant forall o: old(timed[o]) ==> timed[o] || inv2(o);
  invariant forall o: timed[o] && closed(o) ==> unchanged(cur) || inv2(o);
}

type Deadline timed {
  volatile ghost int t;
  approves(owner, t);
  invariant T <= t;
  invariant unchanged(t) || old(T < t);
  on_unwrap old(T < t);
}

type Timer timed {
  volatile ghost int t;
  approves(owner, t);
  invariant T <= t;
}
";

pub const TIME_OBJECT: &str = "time";
