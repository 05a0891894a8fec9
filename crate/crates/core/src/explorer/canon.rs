//! Canonical form of configurations: every absolute time (the clock, the
//! expiry of each primitive, time-valued shadow fields, timer stamps) is
//! shifted so that the least of them is 0.

use crate::kernel::value::Value;
use crate::lang::model::Model;
use crate::program::Config;

/// Adds `k` to every absolute time in `c`.
pub fn shift(m: &Model, c: &Config, k: i64) -> Config {
    let mut out = c.clone();
    if k == 0 {
        return out;
    }
    for &i in m.time_slots() {
        let v = out.state.slot(i).as_int();
        out.state.set_slot(i, Value::Int(v + k));
    }
    for t in &mut out.threads {
        for s in t.stamps.iter_mut().flatten() {
            *s += k;
        }
    }
    out
}

/// The smallest absolute time in `c`.
pub fn min_time(m: &Model, c: &Config) -> i64 {
    let slots = m.time_slots().iter().map(|&i| c.state.slot(i).as_int());
    let stamps = c.threads.iter().flat_map(|t| t.stamps.iter().flatten().copied());
    slots.chain(stamps).min().unwrap_or(0)
}

/// Canonical representative of `c` and the offset that restores it:
/// `shift(m, &canon, offset) == *c`. Models whose expressions are not
/// invariant under a common time shift are left as they are.
pub fn canonicalize(m: &Model, c: &Config) -> (Config, i64) {
    if !m.dims.shift_invariant {
        return (c.clone(), 0);
    }
    let k = min_time(m, c);
    (shift(m, c, -k), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::model::{PRIM_T, TIME_CUR};
    use crate::lang::parse_model;
    use crate::program::initial_config;

    #[test]
    fn shift_round_trips_and_canonical_min_is_zero() {
        let m = parse_model("object d : Deadline { t = 20; closed = true; }\nthread w { timer_record(s); }").unwrap();
        let mut c = initial_config(&m);
        c.state.set_slot(m.slot(m.time, TIME_CUR), Value::Int(12));
        c.threads[0].stamps[0] = Some(9);
        let (canon, k) = canonicalize(&m, &c);
        assert_eq!(k, 9);
        assert_eq!(min_time(&m, &canon), 0);
        assert_eq!(shift(&m, &canon, k), c);
        let d = m.object_by_name("d").unwrap();
        assert_eq!(canon.state.slot(m.slot(d, PRIM_T)), Value::Int(11));
        let (again, _) = canonicalize(&m, &shift(&m, &c, 100));
        assert_eq!(again, canon);
    }
}
