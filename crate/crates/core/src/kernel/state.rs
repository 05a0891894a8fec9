use super::value::{ObjId, ObjSet, Value};

/// A program state: every declared field's value plus the per-object meta
/// fields. States are immutable snapshots; updates go through `with_*`
/// builders or an explicit clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    slots: Vec<Value>,
    closed: ObjSet,
    valid: ObjSet,
    owner: Vec<ObjId>,
}

impl State {
    pub fn from_parts(slots: Vec<Value>, closed: Vec<bool>, owner: Vec<ObjId>, valid: Vec<bool>) -> Self {
        assert_eq!(closed.len(), owner.len());
        assert_eq!(valid.len(), owner.len());
        let pack = |bits: &[bool]| {
            bits.iter()
                .enumerate()
                .fold(ObjSet::EMPTY, |s, (i, b)| s.with(ObjId(i as u16), *b))
        };
        State {
            slots,
            closed: pack(&closed),
            valid: pack(&valid),
            owner,
        }
    }

    pub fn num_objects(&self) -> usize {
        self.owner.len()
    }

    pub fn slots(&self) -> &[Value] {
        &self.slots
    }

    pub fn slot(&self, i: usize) -> Value {
        self.slots[i]
    }

    pub fn set_slot(&mut self, i: usize, v: Value) {
        self.slots[i] = v;
    }

    pub fn is_closed(&self, o: ObjId) -> bool {
        self.closed.contains(o)
    }

    pub fn set_closed(&mut self, o: ObjId, closed: bool) {
        self.closed = self.closed.with(o, closed);
    }

    pub fn closed_set(&self) -> ObjSet {
        self.closed
    }

    pub fn is_valid(&self, o: ObjId) -> bool {
        self.valid.contains(o)
    }

    pub fn set_valid(&mut self, o: ObjId, valid: bool) {
        self.valid = self.valid.with(o, valid);
    }

    /// The environment owns itself.
    pub fn owner(&self, o: ObjId) -> ObjId {
        if o.is_env() {
            ObjId::ENV
        } else {
            self.owner[o.index()]
        }
    }

    pub fn set_owner(&mut self, o: ObjId, owner: ObjId) {
        self.owner[o.index()] = owner;
    }

    pub fn owners(&self) -> &[ObjId] {
        &self.owner
    }

    /// Objects whose owner is `o`.
    pub fn owns(&self, o: ObjId) -> ObjSet {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, w)| **w == o)
            .fold(ObjSet::EMPTY, |s, (i, _)| s.with(ObjId(i as u16), true))
    }

    /// Whether `o` is owned by `root` directly or through a chain of owners.
    pub fn transitively_owned_by(&self, o: ObjId, root: ObjId) -> bool {
        let mut cur = o;
        for _ in 0..=self.owner.len() {
            if cur.is_env() {
                return false;
            }
            let w = self.owner[cur.index()];
            if w == root {
                return true;
            }
            cur = w;
        }
        false
    }
}

/// An ordered pair of states together with the acting party. The actor is
/// a thread, or [`ObjId::ENV`] for environment moves.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub pre: &'a State,
    pub post: &'a State,
    pub actor: ObjId,
}

impl<'a> Transition<'a> {
    pub fn new(pre: &'a State, post: &'a State, actor: ObjId) -> Self {
        Transition { pre, post, actor }
    }

    pub fn stutter(s: &'a State) -> Self {
        Transition {
            pre: s,
            post: s,
            actor: ObjId::ENV,
        }
    }

    pub fn is_stutter(&self) -> bool {
        std::ptr::eq(self.pre, self.post) || self.pre == self.post
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> State {
        State::from_parts(
            vec![Value::Int(1), Value::Bool(true)],
            vec![true, false, false],
            vec![ObjId::ENV, ObjId(2), ObjId::ENV],
            vec![true; 3],
        )
    }

    #[test]
    fn owns_is_derived_from_owner_map() {
        let s = sample();
        assert_eq!(s.owns(ObjId(2)).iter().collect::<Vec<_>>(), vec![ObjId(1)]);
        assert!(s.transitively_owned_by(ObjId(1), ObjId(2)));
        assert!(!s.transitively_owned_by(ObjId(0), ObjId(2)));
    }

    #[test]
    fn value_semantics() {
        let s = sample();
        let mut t = s.clone();
        t.set_slot(0, Value::Int(2));
        assert_eq!(s.slot(0), Value::Int(1));
        assert_ne!(s, t);
    }
}
