//! Objects, states, transitions and the judgments over them.

pub mod judge;
pub mod state;
pub mod value;

pub use judge::{
    is_good_state, is_good_transition, is_legal_transition, object_inv2, updated_objects, Legality,
    Violation,
};
pub use state::{State, Transition};
pub use value::{ObjId, ObjSet, Value};
