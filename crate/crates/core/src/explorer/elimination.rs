//! Checks that Deadlines do not influence the rest of a program: the model
//! is explored again with every Deadline, every reference to one, and
//! every Deadline statement erased, and the two reachable sets are
//! compared after projecting away time-valued and ghost data.

use std::collections::{BTreeSet, HashSet};

use super::{explore, ExploreError, Exploration, Options};
use crate::kernel::value::Value;
use crate::lang::ast::{BinOp, ExprAst, ExprKind, Item, Member, ModelAst, PrimKind, SortAst, StmtAst, StmtKind};
use crate::lang::diag::Diagnostics;
use crate::lang::model::{InstrKind, Model, Sort};
use crate::lang::resolve;
use crate::program::{point, Config, Point};

#[derive(Debug, thiserror::Error)]
pub enum EliminationError {
    #[error("model without deadlines does not resolve: {0:?}")]
    Resolve(Diagnostics),
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationResult {
    pub with_deadlines: usize,
    pub without_deadlines: usize,
    /// Projected states reachable only with the deadlines in place.
    pub only_with: Vec<String>,
    /// Projected states reachable only once the deadlines are erased.
    pub only_without: Vec<String>,
}

impl EliminationResult {
    pub fn equal(&self) -> bool {
        self.only_with.is_empty() && self.only_without.is_empty()
    }
}

struct Eraser {
    objects: HashSet<String>,
    fields: HashSet<String>,
}

impl Eraser {
    fn mentions(&self, e: &ExprAst, in_type: bool) -> bool {
        let mut hit = false;
        e.walk(&mut |x| match &x.kind {
            ExprKind::Name(n) if self.objects.contains(n) || (in_type && self.fields.contains(n)) => hit = true,
            ExprKind::Field(_, f) if self.fields.contains(&f.name) => hit = true,
            _ => {}
        });
        hit
    }

    /// Drops the top-level conjuncts of `e` that mention a deadline.
    fn prune(&self, e: &ExprAst, in_type: bool) -> Option<ExprAst> {
        if let ExprKind::Binary(BinOp::And, a, b) = &e.kind {
            return match (self.prune(a, in_type), self.prune(b, in_type)) {
                (Some(a), Some(b)) => Some(ExprAst::new(e.span, ExprKind::Binary(BinOp::And, Box::new(a), Box::new(b)))),
                (x, None) | (None, x) => x,
            };
        }
        (!self.mentions(e, in_type)).then(|| e.clone())
    }

    /// Ghost fields tied to a deadline by an erased clause or assignment
    /// are erased as well, until nothing changes.
    fn taint_ghosts(&mut self, ast: &ModelAst) {
        let mut ghosts = HashSet::new();
        for item in &ast.items {
            if let Item::Type(t) = item {
                for mem in &t.members {
                    if let Member::Field(f) = mem {
                        if f.ghost {
                            ghosts.insert(f.name.name.clone());
                        }
                    }
                }
            }
        }
        loop {
            let mut found = Vec::new();
            for item in &ast.items {
                match item {
                    Item::Type(t) => {
                        for mem in &t.members {
                            let (Member::Invariant(e) | Member::OnUnwrap(e)) = mem else { continue };
                            for c in conjuncts(e) {
                                if self.mentions(c, true) {
                                    c.walk(&mut |x| match &x.kind {
                                        ExprKind::Name(n) if ghosts.contains(n) => found.push(n.clone()),
                                        ExprKind::Field(_, f) if ghosts.contains(&f.name) => found.push(f.name.clone()),
                                        _ => {}
                                    });
                                }
                            }
                        }
                    }
                    Item::Thread(th) => self.tainted_assigns(&th.body, &ghosts, &mut found),
                    Item::Object(_) => {}
                }
            }
            let before = self.fields.len();
            self.fields.extend(found);
            if self.fields.len() == before {
                return;
            }
        }
    }

    fn tainted_assigns(&self, body: &[StmtAst], ghosts: &HashSet<String>, out: &mut Vec<String>) {
        for s in body {
            match &s.kind {
                StmtKind::Assign { target, value } if self.mentions(value, false) => {
                    if let ExprKind::Field(_, f) = &target.kind {
                        if ghosts.contains(&f.name) {
                            out.push(f.name.clone());
                        }
                    }
                }
                StmtKind::Atomic(inner) | StmtKind::Loop { body: inner, .. } => self.tainted_assigns(inner, ghosts, out),
                _ => {}
            }
        }
    }

    fn stmts(&self, body: &[StmtAst]) -> Vec<StmtAst> {
        body.iter().filter_map(|s| self.stmt(s)).collect()
    }

    fn stmt(&self, s: &StmtAst) -> Option<StmtAst> {
        let is_dl = |name: &str| self.objects.contains(name);
        let kind = match &s.kind {
            StmtKind::New { kind: PrimKind::Deadline, .. }
            | StmtKind::Reset { kind: PrimKind::Deadline, .. }
            | StmtKind::Destroy { kind: PrimKind::Deadline, .. } => return None,
            StmtKind::Wrap(o) | StmtKind::Unwrap(o) if is_dl(&o.name) => return None,
            StmtKind::Own { child, owner } if is_dl(&child.name) || is_dl(&owner.name) => return None,
            StmtKind::Assign { target, value } if self.mentions(target, false) || self.mentions(value, false) => {
                return None
            }
            StmtKind::Assume(e) => StmtKind::Assume(self.prune(e, false)?),
            StmtKind::Assert(e) => StmtKind::Assert(self.prune(e, false)?),
            StmtKind::Atomic(inner) => StmtKind::Atomic(self.stmts(inner)),
            StmtKind::Loop {
                bound,
                invariant,
                writes,
                body,
            } => StmtKind::Loop {
                bound: *bound,
                invariant: self
                    .prune(invariant, false)
                    .unwrap_or_else(|| ExprAst::new(invariant.span, ExprKind::Bool(true))),
                writes: writes.iter().filter(|w| !is_dl(&w.name)).cloned().collect(),
                body: self.stmts(body),
            },
            StmtKind::Annotation { keyword, args } => StmtKind::Annotation {
                keyword: keyword.clone(),
                args: args.iter().filter(|a| !is_dl(&a.name)).cloned().collect(),
            },
            other => other.clone(),
        };
        Some(StmtAst {
            id: s.id,
            span: s.span,
            kind,
        })
    }
}

fn conjuncts(e: &ExprAst) -> Vec<&ExprAst> {
    match &e.kind {
        ExprKind::Binary(BinOp::And, a, b) => {
            let mut out = conjuncts(a);
            out.extend(conjuncts(b));
            out
        }
        _ => vec![e],
    }
}

/// The model with all Deadline objects and everything that refers to
/// them removed, including ghost fields that only shadow them. Statement
/// ids are kept.
pub fn erase_deadlines(ast: &ModelAst) -> ModelAst {
    let deadline = PrimKind::Deadline.type_name();
    let mut er = Eraser {
        objects: HashSet::new(),
        fields: HashSet::new(),
    };
    for item in &ast.items {
        match item {
            Item::Object(o) if o.ty.name == deadline => {
                er.objects.insert(o.name.name.clone());
            }
            Item::Type(t) => {
                for mem in &t.members {
                    if let Member::Field(f) = mem {
                        if matches!(&f.sort, SortAst::ObjRef(Some(ty)) if ty.name == deadline) {
                            er.fields.insert(f.name.name.clone());
                        }
                    }
                }
            }
            _ => {}
        }
    }
    er.taint_ghosts(ast);
    let mut items = Vec::new();
    for item in &ast.items {
        match item {
            Item::Object(o) if er.objects.contains(&o.name.name) => {}
            Item::Object(o) => {
                let mut o = o.clone();
                o.inits.retain(|(k, _)| !er.fields.contains(&k.name));
                items.push(Item::Object(o));
            }
            Item::Type(t) => {
                let mut t = t.clone();
                t.members = t
                    .members
                    .iter()
                    .filter_map(|mem| match mem {
                        Member::Field(f) if er.fields.contains(&f.name.name) => None,
                        Member::Invariant(e) => er.prune(e, true).map(Member::Invariant),
                        Member::OnUnwrap(e) => er.prune(e, true).map(Member::OnUnwrap),
                        Member::Approves(f) if er.fields.contains(&f.name) => None,
                        Member::Dynamics(f, e) if er.fields.contains(&f.name) || er.mentions(e, true) => None,
                        other => Some(other.clone()),
                    })
                    .collect();
                items.push(Item::Type(t));
            }
            Item::Thread(th) => {
                let mut th = th.clone();
                th.body = er.stmts(&th.body);
                items.push(Item::Thread(th));
            }
        }
    }
    ModelAst { items }
}

/// Identity of a control point that survives erasure.
fn point_key(m: &Model, pc: usize, prog: usize) -> String {
    let ins = &m.programs[prog].instrs[pc];
    let role = match ins.kind {
        InstrKind::LoopHead { .. } => "head",
        InstrKind::LoopEnd { .. } => "back",
        _ => "stmt",
    };
    format!("{}#{role}", ins.id)
}

/// For each thread, the key of the control point every pc maps to: its
/// own if it survives in `target`, else the next surviving one.
fn point_map(m: &Model, target: &Model) -> Vec<Vec<String>> {
    m.programs
        .iter()
        .enumerate()
        .map(|(ti, p)| {
            let keep: HashSet<String> = match target.programs.iter().position(|q| q.name == p.name) {
                Some(qi) => (0..target.programs[qi].instrs.len())
                    .map(|pc| point_key(target, pc, qi))
                    .collect(),
                None => HashSet::new(),
            };
            let mut out = vec![String::new(); p.instrs.len()];
            let mut next = "exit".to_string();
            for pc in (0..p.instrs.len()).rev() {
                let k = point_key(m, pc, ti);
                if keep.contains(&k) {
                    next = k;
                }
                out[pc] = next.clone();
            }
            out
        })
        .collect()
}

fn show(m: &Model, v: Value) -> String {
    match v {
        Value::Ref(_) | Value::Set(_) => m.show(v),
        other => other.to_string(),
    }
}

/// A configuration with Deadlines, ghost data and absolute times removed.
pub fn project(m: &Model, c: &Config, points: &[Vec<String>]) -> String {
    let mut parts = Vec::new();
    let now = m.now(&c.state);
    for (ti, (p, t)) in m.programs.iter().zip(&c.threads).enumerate() {
        let at = match point(p, t) {
            Point::Instr(pc) => points[ti][pc].clone(),
            Point::Exit => "exit".to_string(),
            Point::Done => "done".to_string(),
        };
        let stamps: Vec<String> = t
            .stamps
            .iter()
            .map(|s| s.map_or("-".to_string(), |s| (now - s).to_string()))
            .collect();
        parts.push(format!("{}@{at} loops={:?} since=[{}]", p.name, t.counters, stamps.join(",")));
    }
    let hidden = [m.deadline_type, m.timer_type, m.time_type];
    for o in m.object_ids() {
        let Some(ty) = m.type_of(o) else { continue };
        if hidden.contains(&ty) {
            continue;
        }
        let decl = &m.types[ty];
        let mut fs = vec![
            format!("closed={}", c.state.is_closed(o)),
            format!("owner={}", m.name_of(c.state.owner(o))),
        ];
        for (f, fd) in decl.fields.iter().enumerate() {
            let time_ref = matches!(fd.sort, Sort::Ref(Some(t)) if hidden.contains(&t));
            if fd.ghost || time_ref {
                continue;
            }
            fs.push(format!("{}={}", fd.name, show(m, c.state.slot(m.slot(o, f)))));
        }
        parts.push(format!("{}{{{}}}", m.name_of(o), fs.join(" ")));
    }
    parts.join(" ")
}

fn projected(m: &Model, x: &Exploration, points: &[Vec<String>]) -> BTreeSet<String> {
    x.configs.iter().map(|c| project(m, c, points)).collect()
}

/// Explores `m` with and without its Deadlines and compares the projected
/// reachable sets.
pub fn deadline_elimination_check(m: &Model, opts: &Options) -> Result<EliminationResult, EliminationError> {
    let erased = resolve(erase_deadlines(&m.source)).map_err(EliminationError::Resolve)?;
    let with = explore(m, opts)?;
    let without = explore(&erased, opts)?;
    let a = projected(m, &with, &point_map(m, &erased));
    let b = projected(&erased, &without, &point_map(&erased, &erased));
    Ok(EliminationResult {
        with_deadlines: a.len(),
        without_deadlines: b.len(),
        only_with: a.difference(&b).cloned().collect(),
        only_without: b.difference(&a).cloned().collect(),
    })
}

/// Names of the objects erased from `ast`, in declaration order.
pub fn erased_objects(ast: &ModelAst) -> Vec<String> {
    let objects = |ast: &ModelAst| -> Vec<String> {
        ast.items
            .iter()
            .filter_map(|i| match i {
                Item::Object(o) => Some(o.name.name.clone()),
                _ => None,
            })
            .collect()
    };
    let kept = objects(&erase_deadlines(ast));
    objects(ast).into_iter().filter(|n| !kept.contains(n)).collect()
}
