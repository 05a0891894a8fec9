//! Name resolution and sort checking: turns a syntax tree into a [`Model`].
//!
//! Errors are collected rather than returned eagerly, so one run reports
//! as many independent problems as it can find.

use std::collections::HashMap;

use super::ast::*;
use super::diag::{DiagCode, Diagnostic, Diagnostics};
use super::dims::infer_time_dims;
use super::expand::expand_macros;
use super::model::*;
use super::parser::parse_ast;
use super::prelude::{PRELUDE, TIME_OBJECT};
use super::pretty::{expr_to_string, stmt_to_string};
use crate::kernel::value::{ObjId, ObjSet, Value, MAX_OBJECTS};

/// Parses and resolves a model. No partial model is returned on failure.
pub fn parse_model(src: &str) -> Result<Model, Diagnostics> {
    let ast = parse_ast(src)?;
    resolve(ast)
}

pub fn resolve(ast: ModelAst) -> Result<Model, Diagnostics> {
    let prelude = parse_ast(PRELUDE).expect("built-in declarations parse");
    let mut r = Resolver::default();
    r.declare_types(&prelude, true);
    r.declare_types(&ast, false);
    r.declare_fields(&prelude, &ast);
    r.declare_objects(&ast);
    r.resolve_members(&prelude, &ast);
    r.resolve_inits(&ast);
    r.resolve_threads(&ast);
    if !r.diags.is_empty() {
        return Err(Diagnostics::normalized(r.diags));
    }
    Ok(r.finish(ast))
}

struct Scope {
    self_ty: Option<TypeId>,
    thread: Option<ObjId>,
    stamps: Vec<String>,
    vars: Vec<String>,
    in_old: bool,
}

impl Scope {
    fn of_type(ty: TypeId) -> Self {
        Scope {
            self_ty: Some(ty),
            thread: None,
            stamps: Vec::new(),
            vars: Vec::new(),
            in_old: false,
        }
    }
}

#[derive(Default)]
struct Resolver {
    diags: Vec<Diagnostic>,
    types: Vec<TypeDecl>,
    type_index: HashMap<String, TypeId>,
    /// Parallel to `types`: index of the declaring item, or None for the
    /// prelude. Duplicate declarations are dropped and map to nothing.
    user_type_item: Vec<Option<usize>>,
    objects: Vec<ObjectDecl>,
    obj_index: HashMap<String, ObjId>,
    obj_item: Vec<Option<usize>>,
    programs: Vec<Program>,
}

fn sort_name(s: Sort, types: &[TypeDecl]) -> String {
    match s {
        Sort::Ref(Some(t)) => format!("objref<{}>", types[t].name),
        other => other.name().to_string(),
    }
}

impl Resolver {
    fn err(&mut self, code: DiagCode, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(code, span, msg));
    }

    fn time_type(&self) -> TypeId {
        self.type_index["Time"]
    }

    // ---- declarations ----

    fn declare_types(&mut self, ast: &ModelAst, builtin: bool) {
        for (idx, item) in ast.items.iter().enumerate() {
            let Item::Type(t) = item else { continue };
            let name = &t.name.name;
            if !builtin && name == "Time" {
                self.err(
                    DiagCode::InvalidDeclaration,
                    t.name.span,
                    "type `Time` is built in and cannot be redeclared",
                );
                continue;
            }
            if self.type_index.contains_key(name) {
                let what = if matches!(name.as_str(), "Deadline" | "Timer") {
                    format!("duplicate type `{name}` (declared by the built-in prelude)")
                } else {
                    format!("duplicate type `{name}`")
                };
                self.err(DiagCode::DuplicateType, t.name.span, what);
                continue;
            }
            let builtin_kind = builtin.then_some(match name.as_str() {
                "Time" => Builtin::Time,
                "Deadline" => Builtin::Deadline,
                _ => Builtin::Timer,
            });
            self.type_index.insert(name.clone(), self.types.len());
            self.user_type_item.push(if builtin { None } else { Some(idx) });
            self.types.push(TypeDecl {
                name: name.clone(),
                builtin: builtin_kind,
                timed: t.timed,
                fields: Vec::new(),
                invariants: Vec::new(),
                approvals: Vec::new(),
                on_unwrap: Vec::new(),
                dynamics: Vec::new(),
                clauses: Vec::new(),
            });
        }
    }

    /// Yields (type id, syntax) for every successfully declared type.
    fn declared<'a>(&self, prelude: &'a ModelAst, ast: &'a ModelAst) -> Vec<(TypeId, &'a TypeAst)> {
        let mut out = Vec::new();
        let mut builtin = prelude.items.iter().filter_map(|i| match i {
            Item::Type(t) => Some(t),
            _ => None,
        });
        for (ty, item) in self.user_type_item.iter().enumerate() {
            let t = match item {
                None => builtin.next().expect("prelude type"),
                Some(i) => match &ast.items[*i] {
                    Item::Type(t) => t,
                    _ => unreachable!(),
                },
            };
            out.push((ty, t));
        }
        out
    }

    fn declare_fields(&mut self, prelude: &ModelAst, ast: &ModelAst) {
        for (ty, t) in self.declared(prelude, ast) {
            let mut fields: Vec<FieldDecl> = Vec::new();
            for m in &t.members {
                let Member::Field(f) = m else { continue };
                if fields.iter().any(|g| g.name == f.name.name) {
                    self.err(
                        DiagCode::DuplicateField,
                        f.name.span,
                        format!("duplicate field `{}` in type `{}`", f.name.name, t.name.name),
                    );
                    continue;
                }
                let sort = match &f.sort {
                    SortAst::Int => Sort::Int,
                    SortAst::Bool => Sort::Bool,
                    SortAst::ObjSet => Sort::Set,
                    SortAst::ObjRef(None) => Sort::Ref(None),
                    SortAst::ObjRef(Some(target)) => match self.type_index.get(&target.name) {
                        Some(id) => Sort::Ref(Some(*id)),
                        None => {
                            self.err(
                                DiagCode::UnknownIdentifier,
                                target.span,
                                format!("unknown type `{}`", target.name),
                            );
                            Sort::Ref(None)
                        }
                    },
                };
                if let Some((lo, hi)) = f.range {
                    if sort != Sort::Int {
                        self.err(
                            DiagCode::InvalidDeclaration,
                            f.name.span,
                            format!("range given for non-integer field `{}`", f.name.name),
                        );
                    } else if lo > hi {
                        self.err(
                            DiagCode::InvalidDeclaration,
                            f.name.span,
                            format!("empty range {lo}..{hi} for field `{}`", f.name.name),
                        );
                    }
                }
                fields.push(FieldDecl {
                    name: f.name.name.clone(),
                    sort,
                    volatile: f.volatile,
                    ghost: f.ghost,
                    range: f.range,
                });
            }
            self.types[ty].fields = fields;
        }
    }

    fn add_object(&mut self, name: &Ident, kind: ObjKind, item: Option<usize>) {
        if self.obj_index.contains_key(&name.name) {
            self.err(
                DiagCode::DuplicateObject,
                name.span,
                format!("duplicate object `{}`", name.name),
            );
            return;
        }
        if self.objects.len() >= MAX_OBJECTS {
            self.err(
                DiagCode::InvalidDeclaration,
                name.span,
                format!("too many objects (at most {MAX_OBJECTS} are supported)"),
            );
            return;
        }
        let id = ObjId(self.objects.len() as u16);
        self.obj_index.insert(name.name.clone(), id);
        self.obj_item.push(item);
        self.objects.push(ObjectDecl {
            name: name.name.clone(),
            kind,
            init: Vec::new(),
            closed: false,
            owner: ObjId::ENV,
        });
    }

    fn declare_objects(&mut self, ast: &ModelAst) {
        let time_ty = self.time_type();
        self.add_object(&Ident::new(TIME_OBJECT, Span::default()), ObjKind::Plain(time_ty), None);
        for (idx, item) in ast.items.iter().enumerate() {
            match item {
                Item::Object(o) => {
                    let Some(&ty) = self.type_index.get(&o.ty.name) else {
                        self.err(
                            DiagCode::UnknownIdentifier,
                            o.ty.span,
                            format!("unknown type `{}`", o.ty.name),
                        );
                        continue;
                    };
                    if o.name.name == TIME_OBJECT {
                        if ty != time_ty {
                            self.err(
                                DiagCode::InvalidDeclaration,
                                o.name.span,
                                "the name `time` is reserved for the object of type `Time`",
                            );
                        } else {
                            self.obj_item[0] = Some(idx);
                        }
                        continue;
                    }
                    if ty == time_ty {
                        self.err(
                            DiagCode::InvalidDeclaration,
                            o.name.span,
                            "only the object `time` may have type `Time`",
                        );
                        continue;
                    }
                    self.add_object(&o.name, ObjKind::Plain(ty), Some(idx));
                }
                Item::Thread(t) => self.add_object(&t.name, ObjKind::Thread, Some(idx)),
                Item::Type(_) => {}
            }
        }
    }

    // ---- type members ----

    fn resolve_members(&mut self, prelude: &ModelAst, ast: &ModelAst) {
        for (ty, t) in self.declared(prelude, ast) {
            let mut sc = Scope::of_type(ty);
            for m in &t.members {
                match m {
                    Member::Field(_) => {}
                    Member::Invariant(e) => {
                        if let Some(x) = self.bool_expr(e, &mut sc) {
                            self.types[ty].invariants.push((x, expr_to_string(e)));
                        }
                    }
                    Member::OnUnwrap(e) => {
                        if let Some(x) = self.bool_expr(e, &mut sc) {
                            self.types[ty].on_unwrap.push((x, expr_to_string(e)));
                        }
                    }
                    Member::Approves(f) => match self.types[ty].field_index(&f.name) {
                        None => self.err(
                            DiagCode::UnknownField,
                            f.span,
                            format!("unknown field `{}` in type `{}`", f.name, t.name.name),
                        ),
                        Some(i) if !self.types[ty].fields[i].volatile => self.err(
                            DiagCode::InvalidDeclaration,
                            f.span,
                            format!("approval on nonvolatile field `{}`", f.name),
                        ),
                        Some(i) => {
                            if !self.types[ty].approvals.contains(&i) {
                                self.types[ty].approvals.push(i);
                            }
                        }
                    },
                    Member::Dynamics(f, e) => {
                        if !t.timed {
                            self.err(
                                DiagCode::InvalidDeclaration,
                                f.span,
                                format!("dynamics for `{}` in a type that is not timed", f.name),
                            );
                            continue;
                        }
                        let Some(i) = self.types[ty].field_index(&f.name) else {
                            self.err(
                                DiagCode::UnknownField,
                                f.span,
                                format!("unknown field `{}` in type `{}`", f.name, t.name.name),
                            );
                            continue;
                        };
                        if self.types[ty].dynamics.iter().any(|(g, _)| *g == i) {
                            self.err(
                                DiagCode::InvalidDeclaration,
                                f.span,
                                format!("second dynamics rule for `{}`", f.name),
                            );
                            continue;
                        }
                        let want = self.types[ty].fields[i].sort;
                        if let Some((x, s)) = self.expr(e, &mut sc) {
                            if s.compatible(want) {
                                self.types[ty].dynamics.push((i, x));
                            } else {
                                self.err(
                                    DiagCode::SortMismatch,
                                    e.span,
                                    format!(
                                        "dynamics for `{}` must be {}, found {}",
                                        f.name,
                                        sort_name(want, &self.types),
                                        sort_name(s, &self.types)
                                    ),
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    // ---- object initializers ----

    fn lookup_obj(&mut self, id: &Ident) -> Option<ObjId> {
        let found = self.obj_index.get(&id.name).copied();
        if found.is_none() {
            self.err(
                DiagCode::UnknownIdentifier,
                id.span,
                format!("unknown object `{}`", id.name),
            );
        }
        found
    }

    fn literal(&mut self, lit: &LiteralAst, want: Sort, key: &Ident) -> Option<Value> {
        let mismatch = |r: &mut Self, found: &str| {
            let w = sort_name(want, &r.types);
            r.err(
                DiagCode::SortMismatch,
                key.span,
                format!("`{}` expects {w}, found {found}", key.name),
            );
            None
        };
        match (lit, want) {
            (LiteralAst::Int(n), Sort::Int) => Some(Value::Int(*n)),
            (LiteralAst::Bool(b), Sort::Bool) => Some(Value::Bool(*b)),
            (LiteralAst::Ref(r), Sort::Ref(target)) => {
                let o = self.lookup_obj(r)?;
                if let Some(t) = target {
                    if self.objects[o.index()].kind != ObjKind::Plain(t) {
                        let tn = self.types[t].name.clone();
                        self.err(
                            DiagCode::SortMismatch,
                            r.span,
                            format!("`{}` is not an object of type `{tn}`", r.name),
                        );
                        return None;
                    }
                }
                Some(Value::Ref(o))
            }
            (LiteralAst::Set(items), Sort::Set) => {
                let mut s = ObjSet::EMPTY;
                for i in items {
                    s = s.with(self.lookup_obj(i)?, true);
                }
                Some(Value::Set(s))
            }
            (LiteralAst::Int(_), _) => mismatch(self, "an integer"),
            (LiteralAst::Bool(_), _) => mismatch(self, "a boolean"),
            (LiteralAst::Ref(_), _) => mismatch(self, "an object name"),
            (LiteralAst::Set(_), _) => mismatch(self, "an object set"),
        }
    }

    fn resolve_inits(&mut self, ast: &ModelAst) {
        let time = ObjId(0);
        for i in 0..self.objects.len() {
            let o = ObjId(i as u16);
            let ObjKind::Plain(ty) = self.objects[i].kind else { continue };
            let is_time = o == time;
            let mut init: Vec<Option<Value>> = vec![None; self.types[ty].fields.len()];
            let mut closed = is_time;
            let mut owner = ObjId::ENV;
            if let Some(idx) = self.obj_item[i] {
                let Item::Object(decl) = &ast.items[idx] else { unreachable!() };
                for (key, lit) in &decl.inits {
                    match key.name.as_str() {
                        "closed" => {
                            if let Some(v) = self.literal(lit, Sort::Bool, key) {
                                closed = v.as_bool();
                                if is_time && !closed {
                                    self.err(
                                        DiagCode::InvalidDeclaration,
                                        key.span,
                                        "the time object is eternal and always closed",
                                    );
                                }
                            }
                        }
                        "owner" => {
                            if is_time {
                                self.err(
                                    DiagCode::InvalidDeclaration,
                                    key.span,
                                    "the time object has no owner",
                                );
                                continue;
                            }
                            if let Some(v) = self.literal(lit, Sort::Ref(None), key) {
                                owner = v.as_ref();
                                if owner == time || owner == o {
                                    self.err(
                                        DiagCode::InvalidDeclaration,
                                        key.span,
                                        format!("`{}` cannot own `{}`", self.objects[owner.index()].name, decl.name.name),
                                    );
                                }
                            }
                        }
                        name => match self.types[ty].field_index(name) {
                            None => {
                                let tn = self.types[ty].name.clone();
                                self.err(
                                    DiagCode::UnknownField,
                                    key.span,
                                    format!("unknown field `{name}` in type `{tn}`"),
                                );
                            }
                            Some(f) => {
                                if init[f].is_some() {
                                    self.err(
                                        DiagCode::DuplicateField,
                                        key.span,
                                        format!("field `{name}` initialized twice"),
                                    );
                                }
                                let want = self.types[ty].fields[f].sort;
                                init[f] = self.literal(lit, want, key).or(Some(want.default_value()));
                            }
                        },
                    }
                }
            }
            let mut values = Vec::with_capacity(init.len());
            for (f, v) in init.into_iter().enumerate() {
                let fd = self.types[ty].fields[f].clone();
                match v {
                    Some(v) => values.push(v),
                    None if matches!(fd.sort, Sort::Ref(_)) => {
                        let span = self.obj_item[i]
                            .and_then(|idx| match &ast.items[idx] {
                                Item::Object(d) => Some(d.name.span),
                                _ => None,
                            })
                            .unwrap_or_default();
                        let msg = format!(
                            "objref field `{}` of `{}` needs an initial value",
                            fd.name, self.objects[i].name
                        );
                        self.err(DiagCode::InvalidDeclaration, span, msg);
                        values.push(fd.sort.default_value());
                    }
                    None => values.push(fd.sort.default_value()),
                }
            }
            self.objects[i].init = values;
            self.objects[i].closed = closed;
            self.objects[i].owner = owner;
        }
        // Objects that start closed and timed are registered with time.
        let mut timed = self.objects[0].init[TIME_TIMED].as_set();
        for (i, obj) in self.objects.iter().enumerate() {
            if let ObjKind::Plain(ty) = obj.kind {
                if obj.closed && self.types[ty].timed {
                    timed = timed.with(ObjId(i as u16), true);
                }
            }
        }
        self.objects[0].init[TIME_TIMED] = Value::Set(timed);
    }

    // ---- threads ----

    fn resolve_threads(&mut self, ast: &ModelAst) {
        for item in &ast.items {
            let Item::Thread(t) = item else { continue };
            let Some(&thread) = self.obj_index.get(&t.name.name) else { continue };
            if self.objects[thread.index()].kind != ObjKind::Thread {
                continue;
            }
            let mut stamps = Vec::new();
            collect_stamps(&t.body, &mut stamps);
            let mut sc = Scope {
                self_ty: None,
                thread: Some(thread),
                stamps: stamps.clone(),
                vars: Vec::new(),
                in_old: false,
            };
            let mut instrs = Vec::new();
            let mut loops = 0;
            self.compile_block(&t.body, &mut sc, &mut instrs, &mut loops);
            self.programs.push(Program {
                thread,
                name: t.name.name.clone(),
                instrs,
                stamps,
                loops,
            });
        }
    }

    fn plain_object(&mut self, id: &Ident, what: &str) -> Option<ObjId> {
        let o = self.lookup_obj(id)?;
        if o == ObjId(0) {
            self.err(
                DiagCode::InvalidDeclaration,
                id.span,
                format!("the time object is eternal and cannot be {what}"),
            );
            return None;
        }
        if self.objects[o.index()].kind == ObjKind::Thread {
            self.err(
                DiagCode::InvalidDeclaration,
                id.span,
                format!("thread `{}` cannot be {what}", id.name),
            );
            return None;
        }
        Some(o)
    }

    fn prim_object(&mut self, id: &Ident, kind: PrimKind) -> Option<ObjId> {
        let o = self.lookup_obj(id)?;
        let want = self.type_index[kind.type_name()];
        if self.objects[o.index()].kind != ObjKind::Plain(want) {
            self.err(
                DiagCode::SortMismatch,
                id.span,
                format!("`{}` is not a {}", id.name, kind.type_name()),
            );
            return None;
        }
        Some(o)
    }

    fn delta(&mut self, d: u64, span: Span) -> i64 {
        i64::try_from(d).unwrap_or_else(|_| {
            self.err(DiagCode::InvalidDeclaration, span, "delta is too large");
            0
        })
    }

    fn compile_block(&mut self, body: &[StmtAst], sc: &mut Scope, out: &mut Vec<Instr>, loops: &mut usize) {
        for s in body {
            let text = stmt_to_string(s);
            let kind = match &s.kind {
                StmtKind::Atomic(inner) => {
                    let mut actions = Vec::new();
                    for a in inner {
                        if let StmtKind::Annotation { args, .. } = &a.kind {
                            for x in args {
                                self.lookup_obj(x);
                            }
                            continue;
                        }
                        if let Some(act) = self.action(a, sc) {
                            actions.push(act);
                        }
                    }
                    let parts: Vec<String> = inner.iter().map(stmt_to_string).collect();
                    let label = format!("atomic {{ {} }}", parts.join(" "));
                    out.push(Instr {
                        id: s.id,
                        line: s.span.line,
                        kind: InstrKind::Atomic(actions),
                        text: label,
                    });
                    continue;
                }
                StmtKind::Assign { .. } | StmtKind::Assume(_) | StmtKind::Assert(_) | StmtKind::Record(_) => {
                    match self.action(s, sc) {
                        Some(a) => InstrKind::Seq(a),
                        None => continue,
                    }
                }
                StmtKind::Reset { kind, .. } => {
                    self.err(
                        DiagCode::InvalidDeclaration,
                        s.span,
                        format!("`{}_reset` must appear inside an atomic block", kind.keyword()),
                    );
                    continue;
                }
                StmtKind::Wrap(o) => match self.plain_object(o, "wrapped") {
                    Some(o) => InstrKind::Wrap(o),
                    None => continue,
                },
                StmtKind::Unwrap(o) => match self.plain_object(o, "unwrapped") {
                    Some(o) => InstrKind::Unwrap(o),
                    None => continue,
                },
                StmtKind::Own { child, owner } => {
                    let c = self.plain_object(child, "transferred");
                    let w = self.lookup_obj(owner);
                    if w == Some(ObjId(0)) {
                        self.err(DiagCode::InvalidDeclaration, owner.span, "the time object owns nothing");
                        continue;
                    }
                    match (c, w) {
                        (Some(child), Some(owner)) if child != owner => InstrKind::Own { child, owner },
                        (Some(_), Some(_)) => {
                            self.err(DiagCode::InvalidDeclaration, owner.span, "an object cannot own itself");
                            continue;
                        }
                        _ => continue,
                    }
                }
                StmtKind::New { kind, obj, delta } => {
                    let delta = self.delta(*delta, s.span);
                    match self.prim_object(obj, *kind) {
                        Some(obj) => InstrKind::New { kind: *kind, obj, delta },
                        None => continue,
                    }
                }
                StmtKind::Destroy { kind, obj } => match self.prim_object(obj, *kind) {
                    Some(obj) => InstrKind::Destroy { kind: *kind, obj },
                    None => continue,
                },
                StmtKind::Annotation { args, .. } => {
                    for a in args {
                        self.lookup_obj(a);
                    }
                    InstrKind::Nop
                }
                StmtKind::Loop {
                    bound,
                    invariant,
                    writes,
                    body,
                } => {
                    let loop_idx = *loops;
                    *loops += 1;
                    let inv = self.bool_expr(invariant, sc);
                    let mut ws = Vec::new();
                    for w in writes {
                        if let Some(o) = self.lookup_obj(w) {
                            ws.push(o);
                        }
                    }
                    let head = out.len();
                    out.push(Instr {
                        id: s.id,
                        line: s.span.line,
                        kind: InstrKind::Nop,
                        text: format!("loop head: invariant {}", expr_to_string(invariant)),
                    });
                    self.compile_block(body, sc, out, loops);
                    out.push(Instr {
                        id: s.id,
                        line: s.span.line,
                        kind: InstrKind::LoopEnd { loop_idx, head },
                        text: "loop back".to_string(),
                    });
                    let exit = out.len();
                    out[head].kind = InstrKind::LoopHead {
                        loop_idx,
                        bound: *bound,
                        invariant: inv.unwrap_or(Expr::Bool(true)),
                        inv_text: expr_to_string(invariant),
                        writes: ws,
                        exit,
                    };
                    continue;
                }
            };
            out.push(Instr {
                id: s.id,
                line: s.span.line,
                kind,
                text,
            });
        }
    }

    fn action(&mut self, s: &StmtAst, sc: &mut Scope) -> Option<Action> {
        let text = stmt_to_string(s);
        let kind = match &s.kind {
            StmtKind::Assign { target, value } => {
                let (t, ts) = self.expr(target, sc)?;
                let Expr::Field(base, sel) = t else {
                    self.err(
                        DiagCode::InvalidDeclaration,
                        target.span,
                        "assignment target must be a field",
                    );
                    return None;
                };
                let (v, vs) = self.expr(value, sc)?;
                let ok = match (ts, vs) {
                    (Sort::Ref(Some(a)), Sort::Ref(b)) => b == Some(a),
                    (Sort::Ref(None), Sort::Ref(_)) => true,
                    (a, b) => a == b,
                };
                if !ok {
                    self.err(
                        DiagCode::SortMismatch,
                        value.span,
                        format!(
                            "cannot assign {} to a field of sort {}",
                            sort_name(vs, &self.types),
                            sort_name(ts, &self.types)
                        ),
                    );
                    return None;
                }
                ActionKind::Assign {
                    base: *base,
                    sel,
                    value: v,
                }
            }
            StmtKind::Assume(e) => ActionKind::Assume(self.bool_expr(e, sc)?),
            StmtKind::Assert(e) => ActionKind::Assert(self.bool_expr(e, sc)?),
            StmtKind::Reset { kind, obj, delta } => {
                let delta = self.delta(*delta, s.span);
                ActionKind::Reset {
                    kind: *kind,
                    obj: self.prim_object(obj, *kind)?,
                    delta,
                }
            }
            StmtKind::Record(n) => {
                let k = sc.stamps.iter().position(|x| *x == n.name).expect("collected");
                ActionKind::Record(k)
            }
            other => {
                let word = match other {
                    StmtKind::Atomic(_) => "atomic",
                    StmtKind::Wrap(_) => "wrap",
                    StmtKind::Unwrap(_) => "unwrap",
                    StmtKind::Own { .. } => "own",
                    StmtKind::Loop { .. } => "loop",
                    StmtKind::New { .. } => "creation",
                    _ => "destruction",
                };
                self.err(
                    DiagCode::InvalidDeclaration,
                    s.span,
                    format!("{word} is not allowed inside an atomic block"),
                );
                return None;
            }
        };
        Some(Action { id: s.id, kind, text })
    }

    // ---- expressions ----

    fn bool_expr(&mut self, e: &ExprAst, sc: &mut Scope) -> Option<Expr> {
        let (x, s) = self.expr(e, sc)?;
        if s != Sort::Bool {
            self.err(
                DiagCode::SortMismatch,
                e.span,
                format!("expected a boolean expression, found {}", sort_name(s, &self.types)),
            );
            return None;
        }
        Some(x)
    }

    fn expect_sort(&mut self, e: &ExprAst, sc: &mut Scope, want: Sort, ctx: &str) -> Option<Expr> {
        let (x, s) = self.expr(e, sc)?;
        if !s.compatible(want) {
            self.err(
                DiagCode::SortMismatch,
                e.span,
                format!("{ctx} expects {}, found {}", want.name(), sort_name(s, &self.types)),
            );
            return None;
        }
        Some(x)
    }

    fn two_state_only(&mut self, span: Span, sc: &Scope, what: &str) -> bool {
        if sc.thread.is_some() {
            self.err(
                DiagCode::InvalidDeclaration,
                span,
                format!("{what} is only meaningful in type declarations"),
            );
            return false;
        }
        if sc.in_old {
            self.err(DiagCode::InvalidDeclaration, span, format!("{what} cannot appear inside old(...)"));
            return false;
        }
        true
    }

    fn expr(&mut self, e: &ExprAst, sc: &mut Scope) -> Option<(Expr, Sort)> {
        let span = e.span;
        let r = match &e.kind {
            ExprKind::Int(n) => (Expr::Int(*n), Sort::Int),
            ExprKind::Bool(b) => (Expr::Bool(*b), Sort::Bool),
            ExprKind::Now => (Expr::Now, Sort::Int),
            ExprKind::Delta => {
                if !self.two_state_only(span, sc, "`dT`") {
                    return None;
                }
                (Expr::Delta, Sort::Int)
            }
            ExprKind::SelfRef => (Expr::SelfRef, Sort::Ref(sc.self_ty)),
            ExprKind::Name(n) => {
                if let Some(k) = sc.vars.iter().rposition(|v| v == n) {
                    (Expr::Var(k), Sort::Ref(None))
                } else if let Some((ty, f)) = sc
                    .self_ty
                    .and_then(|ty| self.types[ty].field_index(n).map(|f| (ty, f)))
                {
                    let sort = self.types[ty].fields[f].sort;
                    (Expr::Field(Box::new(Expr::SelfRef), FieldSel { ty, field: f }), sort)
                } else if let Some(&o) = self.obj_index.get(n) {
                    let sort = match self.objects[o.index()].kind {
                        ObjKind::Plain(t) => Sort::Ref(Some(t)),
                        ObjKind::Thread => Sort::Ref(None),
                    };
                    (Expr::Obj(o), sort)
                } else if let Some(ty) = sc.self_ty {
                    let tn = self.types[ty].name.clone();
                    self.err(
                        DiagCode::UnknownField,
                        span,
                        format!("unknown field `{n}` in type `{tn}`"),
                    );
                    return None;
                } else {
                    self.err(DiagCode::UnknownIdentifier, span, format!("unknown identifier `{n}`"));
                    return None;
                }
            }
            ExprKind::Field(base, f) => {
                let (b, bs) = self.expr(base, sc)?;
                match bs {
                    Sort::Ref(Some(ty)) => match self.types[ty].field_index(&f.name) {
                        Some(i) => {
                            let sort = self.types[ty].fields[i].sort;
                            (Expr::Field(Box::new(b), FieldSel { ty, field: i }), sort)
                        }
                        None => {
                            let tn = self.types[ty].name.clone();
                            self.err(
                                DiagCode::UnknownField,
                                f.span,
                                format!("unknown field `{}` in type `{tn}`", f.name),
                            );
                            return None;
                        }
                    },
                    Sort::Ref(None) => {
                        self.err(
                            DiagCode::SortMismatch,
                            f.span,
                            format!("cannot access field `{}` through an untyped reference", f.name),
                        );
                        return None;
                    }
                    other => {
                        self.err(
                            DiagCode::SortMismatch,
                            f.span,
                            format!("cannot access field `{}` of a value of sort {}", f.name, other.name()),
                        );
                        return None;
                    }
                }
            }
            ExprKind::Index(m, k) => {
                let m = self.expect_sort(m, sc, Sort::Set, "indexing")?;
                let k = self.expect_sort(k, sc, Sort::Ref(None), "an index")?;
                (Expr::Index(Box::new(m), Box::new(k)), Sort::Bool)
            }
            ExprKind::Old(inner) => {
                if !self.two_state_only(span, sc, "`old`") {
                    return None;
                }
                sc.in_old = true;
                let r = self.expr(inner, sc);
                sc.in_old = false;
                let (x, s) = r?;
                (Expr::Old(Box::new(x)), s)
            }
            ExprKind::Unchanged(inner) => {
                if !self.two_state_only(span, sc, "`unchanged`") {
                    return None;
                }
                let (x, _) = self.expr(inner, sc)?;
                (Expr::bin(BinOp::Eq, Expr::Old(Box::new(x.clone())), x), Sort::Bool)
            }
            ExprKind::Inv2(inner) => {
                if sc.in_old {
                    self.err(DiagCode::InvalidDeclaration, span, "`inv2` cannot appear inside old(...)");
                    return None;
                }
                let x = self.expect_sort(inner, sc, Sort::Ref(None), "`inv2`")?;
                (Expr::Inv2(Box::new(x)), Sort::Bool)
            }
            ExprKind::Mine(inner) => {
                let x = self.expect_sort(inner, sc, Sort::Ref(None), "`mine`")?;
                (Expr::Mine(Box::new(x)), Sort::Bool)
            }
            ExprKind::Closed(inner) => {
                let x = self.expect_sort(inner, sc, Sort::Ref(None), "`closed`")?;
                (Expr::Closed(Box::new(x)), Sort::Bool)
            }
            ExprKind::Elapsed(n) => {
                if sc.thread.is_none() {
                    self.err(
                        DiagCode::InvalidDeclaration,
                        span,
                        "`elapsed` is only meaningful in thread code",
                    );
                    return None;
                }
                match sc.stamps.iter().position(|s| *s == n.name) {
                    Some(k) => (Expr::Elapsed(k), Sort::Int),
                    None => {
                        self.err(
                            DiagCode::UnknownIdentifier,
                            n.span,
                            format!("unknown timer stamp `{}`", n.name),
                        );
                        return None;
                    }
                }
            }
            ExprKind::Unary(UnOp::Not, a) => {
                let a = self.expect_sort(a, sc, Sort::Bool, "`!`")?;
                (Expr::Not(Box::new(a)), Sort::Bool)
            }
            ExprKind::Unary(UnOp::Neg, a) => {
                let a = self.expect_sort(a, sc, Sort::Int, "unary `-`")?;
                (Expr::Neg(Box::new(a)), Sort::Int)
            }
            ExprKind::Binary(op, a, b) => {
                let ctx = format!("operator `{}`", op.symbol());
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        let x = self.expect_sort(a, sc, Sort::Int, &ctx);
                        let y = self.expect_sort(b, sc, Sort::Int, &ctx);
                        (Expr::bin(*op, x?, y?), Sort::Int)
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        let x = self.expect_sort(a, sc, Sort::Int, &ctx);
                        let y = self.expect_sort(b, sc, Sort::Int, &ctx);
                        (Expr::bin(*op, x?, y?), Sort::Bool)
                    }
                    BinOp::And | BinOp::Or | BinOp::Implies => {
                        let x = self.expect_sort(a, sc, Sort::Bool, &ctx);
                        let y = self.expect_sort(b, sc, Sort::Bool, &ctx);
                        (Expr::bin(*op, x?, y?), Sort::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let x = self.expr(a, sc);
                        let y = self.expr(b, sc);
                        let ((x, xs), (y, ys)) = (x?, y?);
                        if !xs.compatible(ys) {
                            self.err(
                                DiagCode::SortMismatch,
                                span,
                                format!(
                                    "{ctx} compares {} with {}",
                                    sort_name(xs, &self.types),
                                    sort_name(ys, &self.types)
                                ),
                            );
                            return None;
                        }
                        (Expr::bin(*op, x, y), Sort::Bool)
                    }
                }
            }
            ExprKind::Cond(c, a, b) => {
                let c = self.expect_sort(c, sc, Sort::Bool, "a condition");
                let x = self.expr(a, sc);
                let y = self.expr(b, sc);
                let (c, (x, xs), (y, ys)) = (c?, x?, y?);
                if !xs.compatible(ys) {
                    self.err(
                        DiagCode::SortMismatch,
                        span,
                        format!(
                            "conditional branches have sorts {} and {}",
                            sort_name(xs, &self.types),
                            sort_name(ys, &self.types)
                        ),
                    );
                    return None;
                }
                (Expr::Cond(Box::new(c), Box::new(x), Box::new(y)), xs)
            }
            ExprKind::Forall(v, body) => {
                sc.vars.push(v.name.clone());
                let r = self.expect_sort(body, sc, Sort::Bool, "a quantifier body");
                sc.vars.pop();
                (Expr::Forall(Box::new(r?)), Sort::Bool)
            }
        };
        Some(r)
    }

    // ---- assembly ----

    fn finish(self, source: ModelAst) -> Model {
        let time_type = self.type_index["Time"];
        let deadline_type = self.type_index["Deadline"];
        let timer_type = self.type_index["Timer"];
        let time = ObjId(0);
        let types: Vec<TypeDecl> = self
            .types
            .iter()
            .enumerate()
            .map(|(ty, t)| expand_macros(t, ty, time, time_type))
            .collect();
        let mut offsets = Vec::with_capacity(self.objects.len());
        let mut n_slots = 0;
        for obj in &self.objects {
            offsets.push(n_slots);
            if let ObjKind::Plain(ty) = obj.kind {
                n_slots += types[ty].fields.len();
            }
        }
        let mut model = Model {
            types,
            objects: self.objects,
            programs: self.programs,
            time,
            time_type,
            deadline_type,
            timer_type,
            dims: TimeDims::default(),
            source,
            offsets,
            n_slots,
            time_slots: Vec::new(),
        };
        model.dims = infer_time_dims(&model);
        let mut time_slots = Vec::new();
        for o in model.object_ids() {
            if let Some(ty) = model.type_of(o) {
                for f in 0..model.types[ty].fields.len() {
                    if model.dims.time_fields.contains(&FieldSel { ty, field: f }) {
                        time_slots.push(model.slot(o, f));
                    }
                }
            }
        }
        model.time_slots = time_slots;
        model
    }
}

fn collect_stamps(body: &[StmtAst], out: &mut Vec<String>) {
    for s in body {
        match &s.kind {
            StmtKind::Record(n) if !out.contains(&n.name) => out.push(n.name.clone()),
            StmtKind::Atomic(b) | StmtKind::Loop { body: b, .. } => collect_stamps(b, out),
            _ => {}
        }
    }
}
