//! Resolved, sort-checked model: types with expanded clauses, the object
//! universe, and compiled thread programs.

use std::collections::BTreeSet;

use super::ast::{BinOp, ModelAst, PrimKind};
use crate::kernel::state::State;
use crate::kernel::value::{ObjId, ObjSet, Value};

pub type TypeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Int,
    Bool,
    Ref(Option<TypeId>),
    Set,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Int => "int",
            Sort::Bool => "bool",
            Sort::Ref(_) => "objref",
            Sort::Set => "objset",
        }
    }

    /// Whether values of the two sorts may be compared for equality.
    pub fn compatible(self, other: Sort) -> bool {
        match (self, other) {
            (Sort::Ref(_), Sort::Ref(_)) => true,
            (a, b) => a == b,
        }
    }

    pub fn default_value(self) -> Value {
        match self {
            Sort::Int => Value::Int(0),
            Sort::Bool => Value::Bool(false),
            Sort::Ref(_) => Value::Ref(ObjId::ENV),
            Sort::Set => Value::Set(ObjSet::EMPTY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldSel {
    pub ty: TypeId,
    pub field: usize,
}

/// Resolved expression. `Owner`, `IsThread` and `Actor` have no surface
/// syntax; they appear only in expanded approval clauses.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    SelfRef,
    Obj(ObjId),
    /// Quantifier-bound object; the index is the binding depth.
    Var(usize),
    Actor,
    Field(Box<Expr>, FieldSel),
    Index(Box<Expr>, Box<Expr>),
    Old(Box<Expr>),
    Now,
    Delta,
    Inv2(Box<Expr>),
    Mine(Box<Expr>),
    Closed(Box<Expr>),
    Owner(Box<Expr>),
    IsThread(Box<Expr>),
    Elapsed(usize),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Forall(Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Field(a, _)
            | Expr::Old(a)
            | Expr::Inv2(a)
            | Expr::Mine(a)
            | Expr::Closed(a)
            | Expr::Owner(a)
            | Expr::IsThread(a)
            | Expr::Not(a)
            | Expr::Neg(a)
            | Expr::Forall(a) => a.visit(f),
            Expr::Index(a, b) | Expr::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Cond(a, b, c) => {
                a.visit(f);
                b.visit(f);
                c.visit(f);
            }
            _ => {}
        }
    }

    /// True when the value depends on the prestate or on other objects'
    /// two-state invariants.
    pub fn is_two_state(&self) -> bool {
        let mut two = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Old(_) | Expr::Delta | Expr::Inv2(_) | Expr::Actor) {
                two = true;
            }
        });
        two
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub sort: Sort,
    pub volatile: bool,
    pub ghost: bool,
    pub range: Option<(i64, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Time,
    Deadline,
    Timer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseKind {
    /// User invariant; holds only while the object is closed in the poststate.
    Invariant,
    /// `closed(self) ==> time.timed[self]`, added for timed types.
    Timed,
    /// Owner approval of changes to the given field.
    Approval(usize),
    /// Checked on closed-to-open transitions.
    OnUnwrap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub kind: ClauseKind,
    pub expr: Expr,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub builtin: Option<Builtin>,
    pub timed: bool,
    pub fields: Vec<FieldDecl>,
    pub invariants: Vec<(Expr, String)>,
    pub approvals: Vec<usize>,
    pub on_unwrap: Vec<(Expr, String)>,
    pub dynamics: Vec<(usize, Expr)>,
    /// Expanded clause list; see [`super::expand::expand_macros`].
    pub clauses: Vec<Clause>,
}

impl TypeDecl {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjKind {
    Plain(TypeId),
    Thread,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDecl {
    pub name: String,
    pub kind: ObjKind,
    pub init: Vec<Value>,
    pub closed: bool,
    pub owner: ObjId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionKind {
    Assign {
        base: Expr,
        sel: FieldSel,
        value: Expr,
    },
    Assume(Expr),
    Assert(Expr),
    Reset {
        kind: PrimKind,
        obj: ObjId,
        delta: i64,
    },
    Record(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub id: u32,
    pub kind: ActionKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstrKind {
    Atomic(Vec<Action>),
    Seq(Action),
    Wrap(ObjId),
    Unwrap(ObjId),
    Own {
        child: ObjId,
        owner: ObjId,
    },
    New {
        kind: PrimKind,
        obj: ObjId,
        delta: i64,
    },
    Destroy {
        kind: PrimKind,
        obj: ObjId,
    },
    LoopHead {
        loop_idx: usize,
        bound: u64,
        invariant: Expr,
        inv_text: String,
        writes: Vec<ObjId>,
        exit: usize,
    },
    LoopEnd {
        loop_idx: usize,
        head: usize,
    },
    Nop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instr {
    /// Ordinal of the source statement.
    pub id: u32,
    pub line: u32,
    pub kind: InstrKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub thread: ObjId,
    pub name: String,
    pub instrs: Vec<Instr>,
    pub stamps: Vec<String>,
    pub loops: usize,
}

impl Program {
    /// Obligation scope of the instruction at `pc`: 0 for the thread body,
    /// `loop_idx + 1` inside a loop body (innermost).
    pub fn scope_at(&self, pc: usize) -> usize {
        let mut stack: Vec<usize> = Vec::new();
        for (i, ins) in self.instrs.iter().enumerate() {
            if i == pc {
                break;
            }
            match ins.kind {
                InstrKind::LoopHead { loop_idx, .. } => stack.push(loop_idx + 1),
                InstrKind::LoopEnd { .. } => {
                    stack.pop();
                }
                _ => {}
            }
        }
        stack.last().copied().unwrap_or(0)
    }
}

/// Which integer fields hold absolute times, and whether every expression
/// in the model is invariant under a common shift of all absolute times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeDims {
    pub time_fields: BTreeSet<FieldSel>,
    pub shift_invariant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub types: Vec<TypeDecl>,
    pub objects: Vec<ObjectDecl>,
    pub programs: Vec<Program>,
    pub time: ObjId,
    pub time_type: TypeId,
    pub deadline_type: TypeId,
    pub timer_type: TypeId,
    pub dims: TimeDims,
    /// User-written declarations, as parsed.
    pub source: ModelAst,
    pub(crate) offsets: Vec<usize>,
    pub(crate) n_slots: usize,
    pub(crate) time_slots: Vec<usize>,
}

pub const TIME_CUR: usize = 0;
pub const TIME_TIMED: usize = 1;
pub const PRIM_T: usize = 0;

impl Model {
    pub fn object_ids(&self) -> impl Iterator<Item = ObjId> + '_ {
        (0..self.objects.len() as u16).map(ObjId)
    }

    pub fn object(&self, o: ObjId) -> &ObjectDecl {
        &self.objects[o.index()]
    }

    pub fn object_by_name(&self, name: &str) -> Option<ObjId> {
        self.objects
            .iter()
            .position(|o| o.name == name)
            .map(|i| ObjId(i as u16))
    }

    pub fn type_by_name(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn name_of(&self, o: ObjId) -> &str {
        if o.is_env() {
            "<env>"
        } else {
            &self.objects[o.index()].name
        }
    }

    pub fn type_of(&self, o: ObjId) -> Option<TypeId> {
        if o.is_env() {
            return None;
        }
        match self.objects[o.index()].kind {
            ObjKind::Plain(t) => Some(t),
            ObjKind::Thread => None,
        }
    }

    pub fn type_decl(&self, o: ObjId) -> Option<&TypeDecl> {
        self.type_of(o).map(|t| &self.types[t])
    }

    /// Threads and the environment may own open objects.
    pub fn is_thread(&self, o: ObjId) -> bool {
        o.is_env() || matches!(self.objects[o.index()].kind, ObjKind::Thread)
    }

    pub fn is_of_type(&self, o: ObjId, ty: TypeId) -> bool {
        self.type_of(o) == Some(ty)
    }

    pub fn slot(&self, o: ObjId, field: usize) -> usize {
        self.offsets[o.index()] + field
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Slot range of an object's fields.
    pub fn slots_of(&self, o: ObjId) -> std::ops::Range<usize> {
        let start = self.offsets[o.index()];
        let len = self.type_decl(o).map_or(0, |t| t.fields.len());
        start..start + len
    }

    /// Object and field index owning a slot.
    pub fn slot_owner(&self, slot: usize) -> (ObjId, usize) {
        let i = self.offsets.partition_point(|&off| off <= slot) - 1;
        // Skip objects without fields that share the same offset.
        let mut i = i;
        while self.slots_of(ObjId(i as u16)).is_empty() && i > 0 {
            i -= 1;
        }
        (ObjId(i as u16), slot - self.offsets[i])
    }

    pub fn field_decl(&self, sel: FieldSel) -> &FieldDecl {
        &self.types[sel.ty].fields[sel.field]
    }

    /// Slots that hold absolute times (shifted together by canonicalization).
    pub fn time_slots(&self) -> &[usize] {
        &self.time_slots
    }

    pub fn now(&self, s: &State) -> i64 {
        s.slot(self.slot(self.time, TIME_CUR)).as_int()
    }

    pub fn timed_set(&self, s: &State) -> ObjSet {
        s.slot(self.slot(self.time, TIME_TIMED)).as_set()
    }

    pub fn program_of(&self, thread: ObjId) -> Option<&Program> {
        self.programs.iter().find(|p| p.thread == thread)
    }

    pub fn initial_state(&self) -> State {
        let mut slots = vec![Value::Int(0); self.n_slots];
        let mut closed = Vec::with_capacity(self.objects.len());
        let mut owner = Vec::with_capacity(self.objects.len());
        for (i, obj) in self.objects.iter().enumerate() {
            let off = self.offsets[i];
            for (f, v) in obj.init.iter().enumerate() {
                slots[off + f] = *v;
            }
            closed.push(obj.closed);
            owner.push(obj.owner);
        }
        let valid = vec![true; self.objects.len()];
        State::from_parts(slots, closed, owner, valid)
    }

    /// Objects whose type is `Deadline`.
    pub fn deadlines(&self) -> impl Iterator<Item = ObjId> + '_ {
        self.object_ids()
            .filter(move |o| self.is_of_type(*o, self.deadline_type))
    }

    pub fn prim_type(&self, kind: PrimKind) -> TypeId {
        match kind {
            PrimKind::Deadline => self.deadline_type,
            PrimKind::Timer => self.timer_type,
        }
    }

    /// Renders a value with object names.
    pub fn show(&self, v: Value) -> String {
        match v {
            Value::Ref(o) => self.name_of(o).to_string(),
            Value::Set(s) => {
                let items: Vec<&str> = s.iter().map(|o| self.name_of(o)).collect();
                format!("{{{}}}", items.join(", "))
            }
            other => other.to_string(),
        }
    }
}
