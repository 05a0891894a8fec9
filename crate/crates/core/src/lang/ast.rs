//! Surface syntax tree of the `.tvk` model language.
//!
//! Nodes carry source positions so the resolver can report positioned
//! diagnostics. Statements carry a stable ordinal (`id`) assigned in
//! pre-order by the parser; it survives model rewrites and is used to
//! identify control points across related models.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: Span) -> Self {
        Ident {
            name: name.into(),
            span,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelAst {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Type(TypeAst),
    Object(ObjectAst),
    Thread(ThreadAst),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeAst {
    pub name: Ident,
    pub timed: bool,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    Field(FieldAst),
    Invariant(ExprAst),
    Approves(Ident),
    OnUnwrap(ExprAst),
    Dynamics(Ident, ExprAst),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldAst {
    pub volatile: bool,
    pub ghost: bool,
    pub sort: SortAst,
    pub name: Ident,
    pub range: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SortAst {
    Int,
    Bool,
    ObjRef(Option<Ident>),
    ObjSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectAst {
    pub name: Ident,
    pub ty: Ident,
    pub inits: Vec<(Ident, LiteralAst)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LiteralAst {
    Int(i64),
    Bool(bool),
    Ref(Ident),
    Set(Vec<Ident>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadAst {
    pub name: Ident,
    pub body: Vec<StmtAst>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StmtAst {
    pub id: u32,
    pub span: Span,
    pub kind: StmtKind,
}

/// Which built-in timed primitive a lifecycle statement targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimKind {
    Deadline,
    Timer,
}

impl PrimKind {
    pub fn type_name(self) -> &'static str {
        match self {
            PrimKind::Deadline => "Deadline",
            PrimKind::Timer => "Timer",
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            PrimKind::Deadline => "deadline",
            PrimKind::Timer => "timer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Atomic(Vec<StmtAst>),
    Assign { target: ExprAst, value: ExprAst },
    Wrap(Ident),
    Unwrap(Ident),
    Own { child: Ident, owner: Ident },
    Assume(ExprAst),
    Assert(ExprAst),
    Loop {
        bound: u64,
        invariant: ExprAst,
        writes: Vec<Ident>,
        body: Vec<StmtAst>,
    },
    New { kind: PrimKind, obj: Ident, delta: u64 },
    Reset { kind: PrimKind, obj: Ident, delta: u64 },
    Destroy { kind: PrimKind, obj: Ident },
    Record(Ident),
    /// Framing annotations (`bump_volatile_version`, `domain`) accepted as no-ops.
    Annotation { keyword: String, args: Vec<Ident> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne => 5,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 6,
            BinOp::Add | BinOp::Sub => 7,
            BinOp::Mul => 8,
        }
    }

    pub fn right_assoc(self) -> bool {
        matches!(self, BinOp::Implies)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Name(String),
    SelfRef,
    Field(Box<ExprAst>, Ident),
    Index(Box<ExprAst>, Box<ExprAst>),
    Old(Box<ExprAst>),
    Now,
    Delta,
    Unchanged(Box<ExprAst>),
    Inv2(Box<ExprAst>),
    Mine(Box<ExprAst>),
    Closed(Box<ExprAst>),
    Elapsed(Ident),
    Unary(UnOp, Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Cond(Box<ExprAst>, Box<ExprAst>, Box<ExprAst>),
    Forall(Ident, Box<ExprAst>),
}

impl ExprAst {
    pub fn new(span: Span, kind: ExprKind) -> Self {
        ExprAst { span, kind }
    }

    /// Visits every node in pre-order.
    pub fn walk(&self, f: &mut dyn FnMut(&ExprAst)) {
        f(self);
        match &self.kind {
            ExprKind::Int(_)
            | ExprKind::Bool(_)
            | ExprKind::Name(_)
            | ExprKind::SelfRef
            | ExprKind::Now
            | ExprKind::Delta
            | ExprKind::Elapsed(_) => {}
            ExprKind::Field(b, _) => b.walk(f),
            ExprKind::Old(e)
            | ExprKind::Unchanged(e)
            | ExprKind::Inv2(e)
            | ExprKind::Mine(e)
            | ExprKind::Closed(e)
            | ExprKind::Unary(_, e)
            | ExprKind::Forall(_, e) => e.walk(f),
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Cond(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
        }
    }

    /// Splits a top-level conjunction into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&ExprAst> {
        match &self.kind {
            ExprKind::Binary(BinOp::And, a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            _ => vec![self],
        }
    }

    /// Rebuilds a left-nested conjunction; `true` when empty.
    pub fn conjoin(parts: Vec<ExprAst>, span: Span) -> ExprAst {
        let mut it = parts.into_iter();
        match it.next() {
            None => ExprAst::new(span, ExprKind::Bool(true)),
            Some(first) => it.fold(first, |acc, e| {
                ExprAst::new(acc.span, ExprKind::Binary(BinOp::And, Box::new(acc), Box::new(e)))
            }),
        }
    }
}
