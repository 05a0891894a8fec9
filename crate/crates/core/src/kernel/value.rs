use std::fmt;

use serde::Serialize;

/// Index of an object in a model's fixed universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ObjId(pub u16);

impl ObjId {
    /// The environment pseudo-thread: owner of `time`, actor of time advances.
    pub const ENV: ObjId = ObjId(u16::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_env(self) -> bool {
        self == ObjId::ENV
    }
}

/// Largest universe an [`ObjSet`] can represent.
pub const MAX_OBJECTS: usize = 64;

/// A total map from objects to booleans, false by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ObjSet(pub u64);

impl ObjSet {
    pub const EMPTY: ObjSet = ObjSet(0);

    pub fn contains(self, o: ObjId) -> bool {
        !o.is_env() && o.index() < MAX_OBJECTS && self.0 & (1u64 << o.index()) != 0
    }

    #[must_use]
    pub fn with(self, o: ObjId, member: bool) -> ObjSet {
        if o.is_env() {
            return self;
        }
        let bit = 1u64 << o.index();
        if member {
            ObjSet(self.0 | bit)
        } else {
            ObjSet(self.0 & !bit)
        }
    }

    pub fn iter(self) -> impl Iterator<Item = ObjId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            Some(ObjId(i as u16))
        })
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Ref(ObjId),
    Set(ObjSet),
}

impl Value {
    pub fn as_int(self) -> i64 {
        match self {
            Value::Int(n) => n,
            other => panic!("expected integer, found {other:?}"),
        }
    }

    pub fn as_bool(self) -> bool {
        match self {
            Value::Bool(b) => b,
            other => panic!("expected boolean, found {other:?}"),
        }
    }

    pub fn as_ref(self) -> ObjId {
        match self {
            Value::Ref(o) => o,
            other => panic!("expected object reference, found {other:?}"),
        }
    }

    pub fn as_set(self) -> ObjSet {
        match self {
            Value::Set(s) => s,
            other => panic!("expected object set, found {other:?}"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Ref(o) if o.is_env() => write!(f, "<env>"),
            Value::Ref(o) => write!(f, "#{}", o.0),
            Value::Set(s) => {
                let items: Vec<String> = s.iter().map(|o| format!("#{}", o.0)).collect();
                write!(f, "{{{}}}", items.join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objset_membership() {
        let s = ObjSet::EMPTY.with(ObjId(3), true).with(ObjId(5), true);
        assert!(s.contains(ObjId(3)));
        assert!(!s.contains(ObjId(4)));
        assert!(!s.contains(ObjId::ENV));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![ObjId(3), ObjId(5)]);
        assert!(!s.with(ObjId(3), false).contains(ObjId(3)));
    }
}
