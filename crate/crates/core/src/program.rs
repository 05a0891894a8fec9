//! Small-step semantics of thread programs over configurations.
//!
//! A configuration is a kernel state plus, per thread, a program counter,
//! loop counters, timer stamps and the live deadline obligations. Threads
//! interleave at statement granularity; the environment (time) moves only
//! immediately before an atomic block or a thread's exit, which the
//! explorer arranges.

use serde::Serialize;

use crate::kernel::judge::{bad_object, legality_from_good, object_violation, ClauseTag, Clauses, Legality, Violation};
use crate::kernel::state::{State, Transition};
use crate::kernel::value::{ObjId, Value};
use crate::lang::ast::PrimKind;
use crate::lang::eval::{EvalCtx, EvalError};
use crate::lang::model::{Action, ActionKind, Expr, FieldSel, InstrKind, Model, Program, PRIM_T, TIME_CUR, TIME_TIMED};
use crate::primitives::{self, PrimitiveError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    InvariantViolation,
    IllegalTransition,
    AssertionFailure,
    AccessViolation,
    DeadlineExpired,
    ObligationLeak,
    TimeFrozen,
    VacuousAssume,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::InvariantViolation => "invariant-violation",
            FindingKind::IllegalTransition => "illegal-transition",
            FindingKind::AssertionFailure => "assertion-failure",
            FindingKind::AccessViolation => "access-violation",
            FindingKind::DeadlineExpired => "deadline-expired",
            FindingKind::ObligationLeak => "obligation-leak",
            FindingKind::TimeFrozen => "time-frozen",
            FindingKind::VacuousAssume => "vacuous-assume",
        }
    }
}

/// What went wrong, without the trace leading to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Finding {
    pub kind: FindingKind,
    /// Object and clause (or statement) held responsible.
    pub culprit: String,
    pub message: String,
}

impl Finding {
    fn new(kind: FindingKind, culprit: impl Into<String>, message: impl Into<String>) -> Self {
        Finding {
            kind,
            culprit: culprit.into(),
            message: message.into(),
        }
    }

    fn violation(kind: FindingKind, m: &Model, v: &Violation, what: &str) -> Self {
        let culprit = v.describe(m);
        Finding::new(kind, culprit.clone(), format!("{what}: {culprit}"))
    }
}

/// Who performed a transition and why.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Env { delta: i64 },
    Instr { thread: ObjId, pc: u32, part: u8 },
}

/// One transition of a step, given by its poststate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRec {
    pub actor: ObjId,
    pub label: Label,
    pub post: State,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadCfg {
    pub pc: u32,
    pub counters: Vec<u32>,
    pub stamps: Vec<Option<i64>>,
    /// Live deadlines and the scope that created them.
    pub obligations: Vec<(ObjId, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    pub state: State,
    pub threads: Vec<ThreadCfg>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Next { cfg: Config, steps: Vec<StepRec> },
    Found { finding: Finding, steps: Vec<StepRec> },
    Pruned,
}

pub fn initial_config(m: &Model) -> Config {
    let threads = m
        .programs
        .iter()
        .map(|p| ThreadCfg {
            pc: 0,
            counters: vec![0; p.loops],
            stamps: vec![None; p.stamps.len()],
            obligations: Vec::new(),
        })
        .collect();
    Config {
        state: m.initial_state(),
        threads,
    }
}

/// Position of a thread relative to its program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Point {
    Instr(usize),
    Exit,
    Done,
}

pub fn point(p: &Program, t: &ThreadCfg) -> Point {
    let pc = t.pc as usize;
    match pc.cmp(&p.instrs.len()) {
        std::cmp::Ordering::Less => Point::Instr(pc),
        std::cmp::Ordering::Equal => Point::Exit,
        std::cmp::Ordering::Greater => Point::Done,
    }
}

pub fn is_terminal(m: &Model, c: &Config) -> bool {
    m.programs
        .iter()
        .zip(&c.threads)
        .all(|(p, t)| point(p, t) == Point::Done)
}

/// Whether the environment may move before thread `ti`'s next step.
pub fn at_boundary(m: &Model, c: &Config, ti: usize) -> bool {
    let p = &m.programs[ti];
    match point(p, &c.threads[ti]) {
        Point::Instr(pc) => matches!(p.instrs[pc].kind, InstrKind::Atomic(_)),
        Point::Exit => true,
        Point::Done => false,
    }
}

/// Evaluates the assumes that open thread `ti`'s upcoming atomic block
/// against `state`. False means every run through `state` is cut by the
/// block.
pub fn leading_assumes_hold(m: &Model, c: &Config, ti: usize, state: &State) -> Result<bool, EvalError> {
    let p = &m.programs[ti];
    let t = &c.threads[ti];
    let Point::Instr(pc) = point(p, t) else {
        return Ok(true);
    };
    let InstrKind::Atomic(actions) = &p.instrs[pc].kind else {
        return Ok(true);
    };
    let ctx = EvalCtx::new(m, Transition::stutter(state), p.thread).with_stamps(&t.stamps);
    for a in actions {
        let ActionKind::Assume(e) = &a.kind else { break };
        if !ctx.eval_bool(e)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A closed Deadline whose expiry has been reached: time cannot advance.
pub fn frozen_deadline(m: &Model, s: &State) -> Option<ObjId> {
    let now = m.now(s);
    m.deadlines()
        .find(|&d| s.is_closed(d) && now >= s.slot(m.slot(d, PRIM_T)).as_int())
}

pub fn frozen_finding(m: &Model, d: ObjId, s: &State) -> Finding {
    Finding::new(
        FindingKind::TimeFrozen,
        m.name_of(d),
        format!(
            "deadline {} reached its expiry t = {} at T = {}; time cannot advance",
            m.name_of(d),
            s.slot(m.slot(d, PRIM_T)).as_int(),
            m.now(s)
        ),
    )
}

/// Advances time by `delta` and rewrites the dynamics-bearing fields of
/// closed timed objects. Returns None when the advance is not legal.
pub fn env_move(m: &Model, pre: &State, delta: i64) -> Result<Option<State>, EvalError> {
    let mut post = pre.clone();
    let cur = m.now(pre).checked_add(delta).ok_or(EvalError::Overflow)?;
    post.set_slot(m.slot(m.time, TIME_CUR), Value::Int(cur));
    let timed = m.timed_set(pre);
    let base = post.clone();
    for o in m.object_ids() {
        if !timed.contains(o) || !pre.is_closed(o) {
            continue;
        }
        let Some(decl) = m.type_decl(o) else { continue };
        for (f, e) in &decl.dynamics {
            let v = EvalCtx::new(m, Transition::new(pre, &base, ObjId::ENV), o).eval(e)?;
            post.set_slot(m.slot(o, *f), v);
        }
    }
    match legality_from_good(m, Transition::new(pre, &post, ObjId::ENV))? {
        Legality::Legal => Ok(Some(post)),
        Legality::Illegal(_) => Ok(None),
    }
}

/// Legal environment moves from a good state, one per delta in 1..=max_dt.
pub fn env_moves(m: &Model, s: &State, max_dt: i64) -> Result<Vec<(i64, State)>, EvalError> {
    let mut out = Vec::new();
    for d in 1..=max_dt {
        if let Some(post) = env_move(m, s, d)? {
            out.push((d, post));
        }
    }
    Ok(out)
}

/// Where an expression is evaluated, for the access rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    /// Assignment to a concrete field.
    Concrete,
    /// Ghost assignment, assume, assert or loop invariant.
    Ghost,
}

struct Access<'a> {
    m: &'a Model,
    thread: ObjId,
    state: &'a State,
    atomic: bool,
    stamps: &'a [Option<i64>],
}

impl Access<'_> {
    fn obj_of(&self, base: &Expr) -> Result<ObjId, EvalError> {
        let ctx = EvalCtx::new(self.m, Transition::stutter(self.state), self.thread).with_stamps(self.stamps);
        Ok(ctx.eval(base)?.as_ref())
    }

    fn reads(&self, e: &Expr, ctx: Ctx) -> Result<Option<String>, EvalError> {
        let mut err = None;
        let mut fields = Vec::new();
        collect_reads(e, &mut fields);
        for (base, sel) in fields {
            if let Some(msg) = self.read_field(base, sel, ctx)? {
                err.get_or_insert(msg);
            }
        }
        if err.is_none() && ctx == Ctx::Concrete && reads_clock(e) {
            err = Some("concrete data may not depend on ghost time".to_string());
        }
        Ok(err)
    }

    fn read_field(&self, base: &Expr, sel: FieldSel, ctx: Ctx) -> Result<Option<String>, EvalError> {
        let m = self.m;
        let o = self.obj_of(base)?;
        let fd = m.field_decl(sel);
        let name = format!("{}.{}", m.name_of(o), fd.name);
        if ctx == Ctx::Ghost {
            return Ok(None);
        }
        if fd.ghost {
            return Ok(Some(format!("concrete assignment reads ghost field {name}")));
        }
        if self.atomic {
            return Ok(None);
        }
        let s = self.state;
        if !s.is_closed(o) {
            if s.owner(o) != self.thread {
                return Ok(Some(format!("{name} belongs to an open object not owned by this thread")));
            }
            return Ok(None);
        }
        if fd.volatile {
            return Ok(Some(format!("volatile field {name} read outside an atomic block")));
        }
        if !s.transitively_owned_by(o, self.thread) {
            return Ok(Some(format!("{name} is read sequentially but not owned by this thread")));
        }
        Ok(None)
    }

    fn write(&self, target: ObjId, sel: FieldSel, writes: Option<&[ObjId]>) -> Option<String> {
        let m = self.m;
        let s = self.state;
        let fd = m.field_decl(sel);
        let name = format!("{}.{}", m.name_of(target), fd.name);
        if target == m.time {
            return Some("time is advanced only by the environment".to_string());
        }
        if !s.is_closed(target) {
            return (s.owner(target) != self.thread)
                .then(|| format!("{name} belongs to an open object not owned by this thread"));
        }
        if !self.atomic {
            return Some(format!("{name} written outside an atomic block while its object is closed"));
        }
        if !fd.volatile {
            return Some(format!("nonvolatile field {name} written while its object is closed"));
        }
        if let Some(ws) = writes {
            let framed = ws
                .iter()
                .any(|&w| w == target || s.transitively_owned_by(target, w));
            if !framed {
                return Some(format!("{name} is outside the loop's writes clause"));
            }
        }
        None
    }
}

fn collect_reads<'e>(e: &'e Expr, out: &mut Vec<(&'e Expr, FieldSel)>) {
    match e {
        Expr::Field(base, sel) => {
            collect_reads(base, out);
            out.push((base, *sel));
        }
        // Quantified bodies depend on bound variables; only specification
        // contexts use them.
        Expr::Forall(_) => {}
        Expr::Old(a) | Expr::Inv2(a) | Expr::Mine(a) | Expr::Closed(a) | Expr::Owner(a) | Expr::IsThread(a) | Expr::Not(a) | Expr::Neg(a) => {
            collect_reads(a, out)
        }
        Expr::Index(a, b) | Expr::Bin(_, a, b) => {
            collect_reads(a, out);
            collect_reads(b, out);
        }
        Expr::Cond(c, a, b) => {
            collect_reads(c, out);
            collect_reads(a, out);
            collect_reads(b, out);
        }
        _ => {}
    }
}

fn reads_clock(e: &Expr) -> bool {
    let mut hit = false;
    e.visit(&mut |x| {
        if matches!(x, Expr::Now | Expr::Elapsed(_) | Expr::Delta) {
            hit = true;
        }
    });
    hit
}

/// Innermost enclosing loop's writes clause at `pc`, if any.
fn writes_at(p: &Program, pc: usize) -> Option<&[ObjId]> {
    let mut stack: Vec<&[ObjId]> = Vec::new();
    for ins in &p.instrs[..pc] {
        match &ins.kind {
            InstrKind::LoopHead { writes, .. } => stack.push(writes),
            InstrKind::LoopEnd { .. } => {
                stack.pop();
            }
            _ => {}
        }
    }
    stack.pop().filter(|w| !w.is_empty())
}

/// Atomic blocks with more than one access to concrete volatile data.
pub fn static_warnings(m: &Model) -> Vec<String> {
    let mut out = Vec::new();
    for p in &m.programs {
        for ins in &p.instrs {
            let InstrKind::Atomic(actions) = &ins.kind else { continue };
            let mut physical = Vec::new();
            for a in actions {
                let mut fields = Vec::new();
                match &a.kind {
                    ActionKind::Assign { base, sel, value } => {
                        if !m.field_decl(*sel).ghost {
                            physical.push((base.clone(), *sel));
                            collect_reads(value, &mut fields);
                        }
                    }
                    _ => continue,
                }
                for (b, sel) in fields {
                    let fd = m.field_decl(sel);
                    if fd.volatile && !fd.ghost {
                        physical.push((b.clone(), sel));
                    }
                }
            }
            let mut distinct: Vec<(Expr, FieldSel)> = Vec::new();
            for x in physical {
                if !distinct.contains(&x) {
                    distinct.push(x);
                }
            }
            if distinct.len() > 1 {
                out.push(format!(
                    "thread {}, line {}: {} physical accesses in one atomic block",
                    p.name,
                    ins.line,
                    distinct.len()
                ));
            }
        }
    }
    out
}

/// Per-step settings.
#[derive(Debug, Clone, Copy)]
pub struct StepOpts {
    /// Upper bound on loop iterations, applied on top of each loop's own bound.
    pub loop_bound: u64,
}

impl Default for StepOpts {
    fn default() -> Self {
        StepOpts { loop_bound: 100 }
    }
}

struct Stepper<'a> {
    m: &'a Model,
    p: &'a Program,
    ti: usize,
    pc: usize,
    cfg: Config,
    steps: Vec<StepRec>,
}

type StepResult = Result<Outcome, EvalError>;

impl Stepper<'_> {
    fn thread(&self) -> ObjId {
        self.p.thread
    }

    fn tcfg(&mut self) -> &mut ThreadCfg {
        &mut self.cfg.threads[self.ti]
    }

    fn found(self, finding: Finding) -> StepResult {
        Ok(Outcome::Found {
            finding,
            steps: self.steps,
        })
    }

    fn record(&mut self, post: State) {
        let part = self.steps.len() as u8;
        self.steps.push(StepRec {
            actor: self.thread(),
            label: Label::Instr {
                thread: self.thread(),
                pc: self.pc as u32,
                part,
            },
            post: post.clone(),
        });
        self.cfg.state = post;
    }

    fn goto(mut self, pc: usize) -> StepResult {
        self.tcfg().pc = pc as u32;
        let state = &self.cfg.state;
        self.cfg.threads[self.ti]
            .obligations
            .retain(|&(d, _)| state.is_closed(d));
        Ok(Outcome::Next {
            cfg: self.cfg,
            steps: self.steps,
        })
    }

    fn next(self) -> StepResult {
        let pc = self.pc + 1;
        self.goto(pc)
    }

    fn ctx<'s>(&'s self, s: &'s State) -> EvalCtx<'s> {
        EvalCtx::new(self.m, Transition::stutter(s), self.thread()).with_stamps(&self.cfg.threads[self.ti].stamps)
    }

    /// Records the transition to `post`, then checks its legality and the
    /// goodness of the poststate.
    fn commit(&mut self, post: State, what: &str) -> Result<Option<Finding>, EvalError> {
        let m = self.m;
        let legality = legality_from_good(m, Transition::new(&self.cfg.state, &post, self.thread()))?;
        let bad = bad_object(m, &post)?;
        self.record(post);
        if let Legality::Illegal(v) = legality {
            let kind = illegal_kind(m, &v);
            return Ok(Some(Finding::violation(kind, m, &v, &format!("{what} is not a legal transition"))));
        }
        Ok(bad.map(|v| {
            Finding::violation(FindingKind::InvariantViolation, m, &v, &format!("invariant broken after {what}"))
        }))
    }

    fn commit_next(mut self, post: State, what: &str) -> StepResult {
        match self.commit(post, what)? {
            Some(f) => self.found(f),
            None => self.next(),
        }
    }

    fn obligation_leak(&self, scope: u32) -> Option<Finding> {
        let t = &self.cfg.threads[self.ti];
        t.obligations
            .iter()
            .find(|&&(d, sc)| sc == scope && self.cfg.state.is_closed(d))
            .map(|&(d, _)| {
                Finding::new(
                    FindingKind::ObligationLeak,
                    self.m.name_of(d),
                    format!("deadline {} is still live when its scope ends", self.m.name_of(d)),
                )
            })
    }
}

fn illegal_kind(m: &Model, v: &Violation) -> FindingKind {
    if v.tag == ClauseTag::OnUnwrap && m.is_of_type(v.object, m.deadline_type) {
        FindingKind::DeadlineExpired
    } else {
        FindingKind::IllegalTransition
    }
}

fn prim_finding(m: &Model, e: &PrimitiveError, what: &str) -> Finding {
    let kind = match e {
        PrimitiveError::NotOwned(_) | PrimitiveError::AlreadyClosed(_) | PrimitiveError::NotClosed(_) => {
            FindingKind::AccessViolation
        }
        PrimitiveError::Frozen(_) | PrimitiveError::DeadlineExpired(_) => FindingKind::DeadlineExpired,
        PrimitiveError::Invariant(_) => FindingKind::InvariantViolation,
        _ => FindingKind::IllegalTransition,
    };
    let culprit = match e {
        PrimitiveError::NotOwned(o)
        | PrimitiveError::AlreadyClosed(o)
        | PrimitiveError::NotClosed(o)
        | PrimitiveError::Frozen(o)
        | PrimitiveError::DeadlineExpired(o) => m.name_of(*o).to_string(),
        PrimitiveError::Approval(v) | PrimitiveError::Invariant(v) | PrimitiveError::Illegal(v) => v.describe(m),
        _ => what.to_string(),
    };
    Finding::new(kind, culprit, format!("{what}: {}", e.message(m)))
}

/// Executes the next statement of thread `ti`. The configuration's state
/// must be good.
pub fn thread_step(m: &Model, cfg: &Config, ti: usize, opts: StepOpts) -> StepResult {
    let p = &m.programs[ti];
    let pc = match point(p, &cfg.threads[ti]) {
        Point::Instr(pc) => pc,
        Point::Exit => {
            let st = Stepper {
                m,
                p,
                ti,
                pc: p.instrs.len(),
                cfg: cfg.clone(),
                steps: Vec::new(),
            };
            if let Some(f) = st.obligation_leak(0) {
                return st.found(f);
            }
            return st.next();
        }
        Point::Done => return Ok(Outcome::Pruned),
    };
    let mut st = Stepper {
        m,
        p,
        ti,
        pc,
        cfg: cfg.clone(),
        steps: Vec::new(),
    };
    let ins = &p.instrs[pc];
    let thread = p.thread;
    match &ins.kind {
        InstrKind::Nop => st.next(),
        InstrKind::Seq(a) => seq_action(st, a),
        InstrKind::Atomic(actions) => atomic(st, actions),
        InstrKind::Wrap(o) => {
            let o = *o;
            let s = &st.cfg.state;
            if s.is_closed(o) || s.owner(o) != thread {
                let why = if s.is_closed(o) { "is already closed" } else { "is not owned by this thread" };
                let msg = format!("wrap {}: object {why}", m.name_of(o));
                return st.found(Finding::new(FindingKind::AccessViolation, m.name_of(o), msg));
            }
            if let Some(c) = m.object_ids().find(|&c| s.owner(c) == o && !s.is_closed(c)) {
                let msg = format!("wrap {}: owned object {} is open", m.name_of(o), m.name_of(c));
                return st.found(Finding::new(FindingKind::AccessViolation, m.name_of(c), msg));
            }
            let mut post = s.clone();
            post.set_closed(o, true);
            if let Some(v) = object_violation(m, Transition::stutter(&post), o, 0, Clauses::All)? {
                st.record(post);
                return st.found(Finding::violation(
                    FindingKind::InvariantViolation,
                    m,
                    &v,
                    &format!("wrap {} with a failing invariant", m.name_of(o)),
                ));
            }
            st.commit_next(post, &ins.text)
        }
        InstrKind::Unwrap(o) => {
            let o = *o;
            let s = &st.cfg.state;
            if !s.is_closed(o) || s.owner(o) != thread {
                let why = if !s.is_closed(o) { "is not closed" } else { "is not owned by this thread" };
                let msg = format!("unwrap {}: object {why}", m.name_of(o));
                return st.found(Finding::new(FindingKind::AccessViolation, m.name_of(o), msg));
            }
            let mut post = s.clone();
            post.set_closed(o, false);
            for c in m.object_ids() {
                if s.owner(c) == o {
                    post.set_owner(c, thread);
                }
            }
            st.commit_next(post, &ins.text)
        }
        InstrKind::Own { child, owner } => {
            let (c, w) = (*child, *owner);
            let s = &st.cfg.state;
            if s.owner(c) != thread {
                let msg = format!("{}: {} is not owned by this thread", ins.text, m.name_of(c));
                return st.found(Finding::new(FindingKind::AccessViolation, m.name_of(c), msg));
            }
            if !m.is_thread(w) && (s.is_closed(w) || s.owner(w) != thread) {
                let msg = format!("{}: new owner {} is not open and owned by this thread", ins.text, m.name_of(w));
                return st.found(Finding::new(FindingKind::AccessViolation, m.name_of(w), msg));
            }
            let mut post = s.clone();
            post.set_owner(c, w);
            st.commit_next(post, &ins.text)
        }
        InstrKind::New { kind, obj, delta } => {
            match primitives::prim_new(m, &st.cfg.state, thread, *obj, *delta) {
                Ok(states) => {
                    for s in states {
                        st.record(s);
                    }
                    if *kind == PrimKind::Deadline {
                        let scope = p.scope_at(pc) as u32;
                        st.tcfg().obligations.push((*obj, scope));
                    }
                    st.next()
                }
                Err(PrimitiveError::Eval(e)) => Err(e),
                Err(e) => st.found(prim_finding(m, &e, &ins.text)),
            }
        }
        InstrKind::Destroy { kind, obj } => match primitives::prim_destroy(m, &st.cfg.state, thread, *kind, *obj) {
            Ok(post) => st.commit_next(post, &ins.text),
            Err(PrimitiveError::Eval(e)) => Err(e),
            Err(e) => {
                // Report the refused transition itself so the trace shows it.
                let mut post = st.cfg.state.clone();
                post.set_closed(*obj, false);
                let timed = m.timed_set(&post).with(*obj, false);
                post.set_slot(m.slot(m.time, TIME_TIMED), Value::Set(timed));
                if matches!(e, PrimitiveError::DeadlineExpired(_) | PrimitiveError::Illegal(_) | PrimitiveError::Approval(_)) {
                    st.record(post);
                }
                st.found(prim_finding(m, &e, &ins.text))
            }
        },
        InstrKind::LoopHead {
            loop_idx,
            bound,
            invariant,
            inv_text,
            exit,
            ..
        } => {
            if !st.ctx(&cfg.state).eval_bool(invariant)? {
                let msg = format!("loop invariant `{inv_text}` does not hold at line {}", ins.line);
                return st.found(Finding::new(
                    FindingKind::AssertionFailure,
                    format!("{}: loop invariant {inv_text}", p.name),
                    msg,
                ));
            }
            let limit = (*bound).min(opts.loop_bound);
            let k = &mut st.tcfg().counters[*loop_idx];
            if u64::from(*k) < limit {
                *k += 1;
                st.next()
            } else {
                *k = 0;
                let exit = *exit;
                st.goto(exit)
            }
        }
        InstrKind::LoopEnd { loop_idx, head } => {
            if let Some(f) = st.obligation_leak(*loop_idx as u32 + 1) {
                return st.found(f);
            }
            let head = *head;
            st.goto(head)
        }
    }
}

fn seq_action(mut st: Stepper<'_>, a: &Action) -> StepResult {
    let m = st.m;
    let thread = st.thread();
    match &a.kind {
        ActionKind::Assume(e) => {
            if st.ctx(&st.cfg.state).eval_bool(e)? {
                st.next()
            } else {
                Ok(Outcome::Pruned)
            }
        }
        ActionKind::Assert(e) => {
            if st.ctx(&st.cfg.state).eval_bool(e)? {
                st.next()
            } else {
                let f = Finding::new(
                    FindingKind::AssertionFailure,
                    format!("{}: {}", st.p.name, a.text),
                    format!("`{}` fails", a.text),
                );
                st.found(f)
            }
        }
        ActionKind::Record(k) => {
            let now = m.now(&st.cfg.state);
            st.tcfg().stamps[*k] = Some(now);
            st.next()
        }
        ActionKind::Reset { .. } => unreachable!("resets are compiled only inside atomic blocks"),
        ActionKind::Assign { .. } => {
            let mut work = st.cfg.state.clone();
            let pc = st.pc;
            let writes = writes_at(st.p, pc);
            let acc = Access {
                m,
                thread,
                state: &st.cfg.state,
                atomic: false,
                stamps: &st.cfg.threads[st.ti].stamps,
            };
            if let Some(msg) = assign(&acc, a, &mut work, writes)? {
                return st.found(Finding::new(FindingKind::AccessViolation, a.text.clone(), msg));
            }
            st.commit_next(work, &a.text)
        }
    }
}

/// Applies an assignment to `work` after the access checks; returns the
/// violated rule, if any.
fn assign(acc: &Access<'_>, a: &Action, work: &mut State, writes: Option<&[ObjId]>) -> Result<Option<String>, EvalError> {
    let ActionKind::Assign { base, sel, value } = &a.kind else {
        return Ok(None);
    };
    let m = acc.m;
    let ghost_target = m.field_decl(*sel).ghost;
    let ctx = if ghost_target { Ctx::Ghost } else { Ctx::Concrete };
    let target = acc.obj_of(base)?;
    if !m.is_of_type(target, sel.ty) {
        return Err(EvalError::BadRef(m.name_of(target).to_string()));
    }
    if let Some(msg) = acc.reads(base, ctx)? {
        return Ok(Some(msg));
    }
    if let Some(msg) = acc.reads(value, ctx)? {
        return Ok(Some(msg));
    }
    if let Some(msg) = acc.write(target, *sel, writes) {
        return Ok(Some(msg));
    }
    let v = EvalCtx::new(m, Transition::stutter(acc.state), acc.thread)
        .with_stamps(acc.stamps)
        .eval(value)?;
    work.set_slot(m.slot(target, sel.field), v);
    Ok(None)
}

fn atomic(mut st: Stepper<'_>, actions: &[Action]) -> StepResult {
    let m = st.m;
    let thread = st.thread();
    let writes = writes_at(st.p, st.pc);
    let mut work = st.cfg.state.clone();
    let mut stamps = st.cfg.threads[st.ti].stamps.clone();
    for a in actions {
        match &a.kind {
            ActionKind::Assume(e) | ActionKind::Assert(e) => {
                let holds = EvalCtx::new(m, Transition::stutter(&work), thread)
                    .with_stamps(&stamps)
                    .eval_bool(e)?;
                if holds {
                    continue;
                }
                if matches!(a.kind, ActionKind::Assume(_)) {
                    return Ok(Outcome::Pruned);
                }
                let f = Finding::new(
                    FindingKind::AssertionFailure,
                    format!("{}: {}", st.p.name, a.text),
                    format!("`{}` fails inside atomic block at line {}", a.text, st.p.instrs[st.pc].line),
                );
                return st.found(f);
            }
            ActionKind::Record(k) => stamps[*k] = Some(m.now(&work)),
            ActionKind::Reset { kind, obj, delta } => {
                let s = &work;
                if !s.transitively_owned_by(*obj, thread) {
                    let msg = format!("{}: {} is not owned by this thread", a.text, m.name_of(*obj));
                    return st.found(Finding::new(FindingKind::AccessViolation, m.name_of(*obj), msg));
                }
                match primitives::apply_reset(m, &mut work, *kind, *obj, *delta) {
                    Ok(()) => {}
                    Err(PrimitiveError::Eval(e)) => return Err(e),
                    Err(e) => return st.found(prim_finding(m, &e, &a.text)),
                }
            }
            ActionKind::Assign { .. } => {
                let snapshot = work.clone();
                let acc = Access {
                    m,
                    thread,
                    state: &snapshot,
                    atomic: true,
                    stamps: &stamps,
                };
                if let Some(msg) = assign(&acc, a, &mut work, writes)? {
                    return st.found(Finding::new(FindingKind::AccessViolation, a.text.clone(), msg));
                }
            }
        }
    }
    st.tcfg().stamps = stamps;
    let text = st.p.instrs[st.pc].text.clone();
    st.commit_next(work, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_model;

    const BOILER: &str = "
type Boiler timed {
  volatile int level;
  volatile bool on;
  dynamics level = old(level) + (old(on) ? dT : 0 - dT);
}
object boiler : Boiler { level = 50; on = false; closed = true; owner = w; }
object box : Box { owner = w; }
type Box { int x; volatile int y; }
thread w {
  atomic { boiler.on := boiler.level < 50; }
  box.x := 3;
  wrap box;
  box.x := 4;
}
";

    fn run(m: &Model, mut c: Config) -> (Config, Option<Finding>) {
        loop {
            if is_terminal(m, &c) {
                return (c, None);
            }
            match thread_step(m, &c, 0, StepOpts::default()).unwrap() {
                Outcome::Next { cfg, .. } => c = cfg,
                Outcome::Found { finding, .. } => return (c, Some(finding)),
                Outcome::Pruned => panic!("pruned"),
            }
        }
    }

    #[test]
    fn env_moves_follow_dynamics() {
        let m = parse_model(BOILER).unwrap();
        let s = m.initial_state();
        let moves = env_moves(&m, &s, 4).unwrap();
        let b = m.object_by_name("boiler").unwrap();
        let levels: Vec<i64> = moves.iter().map(|(_, t)| t.slot(m.slot(b, 0)).as_int()).collect();
        assert_eq!(levels, vec![49, 48, 47, 46]);
    }

    #[test]
    fn deadline_caps_env_moves() {
        let m = parse_model("object d : Deadline { t = 15; closed = true; }").unwrap();
        let mut s = m.initial_state();
        s.set_slot(m.slot(m.time, TIME_CUR), Value::Int(14));
        let moves = env_moves(&m, &s, 4).unwrap();
        assert_eq!(moves.iter().map(|(d, _)| *d).collect::<Vec<_>>(), vec![1]);
        let frozen = &moves[0].1;
        assert!(env_moves(&m, frozen, 4).unwrap().is_empty());
        assert!(frozen_deadline(&m, frozen).is_some());
    }

    #[test]
    fn sequential_write_to_closed_object_is_refused() {
        let m = parse_model(BOILER).unwrap();
        let (_, f) = run(&m, initial_config(&m));
        let f = f.expect("write after wrap must be refused");
        assert_eq!(f.kind, FindingKind::AccessViolation);
        assert!(f.message.contains("box.x"), "{}", f.message);
    }

    #[test]
    fn volatile_read_outside_atomic_is_refused() {
        let src = BOILER.replace("box.x := 3;", "box.x := boiler.level;");
        let m = parse_model(&src).unwrap();
        let (_, f) = run(&m, initial_config(&m));
        let f = f.unwrap();
        assert_eq!(f.kind, FindingKind::AccessViolation);
        assert!(f.message.contains("boiler.level"), "{}", f.message);
    }

    #[test]
    fn atomic_write_of_volatile_field_is_one_transition() {
        let m = parse_model(BOILER).unwrap();
        let c = initial_config(&m);
        match thread_step(&m, &c, 0, StepOpts::default()).unwrap() {
            Outcome::Next { cfg, steps } => {
                assert_eq!(steps.len(), 1);
                let b = m.object_by_name("boiler").unwrap();
                assert_eq!(cfg.state.slot(m.slot(b, 1)), Value::Bool(false));
                assert_eq!(cfg.threads[0].pc, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrap_with_failing_invariant_is_reported() {
        let src = "type C { int x; invariant x <= 70; }\nobject c : C { x = 80; owner = w; }\nthread w { wrap c; }";
        let m = parse_model(src).unwrap();
        let (_, f) = run(&m, initial_config(&m));
        let f = f.unwrap();
        assert_eq!(f.kind, FindingKind::InvariantViolation);
        assert!(f.culprit.contains("x <= 70"), "{}", f.culprit);
    }

    #[test]
    fn leaked_deadline_is_an_obligation_finding() {
        let src = "object d : Deadline { owner = w; }\nthread w { deadline_new(d, 5); }";
        let m = parse_model(src).unwrap();
        let (_, f) = run(&m, initial_config(&m));
        assert_eq!(f.unwrap().kind, FindingKind::ObligationLeak);
        let src = "object d : Deadline { owner = w; }\nthread w { deadline_new(d, 5); deadline_destroy(d); }";
        let m = parse_model(src).unwrap();
        let (c, f) = run(&m, initial_config(&m));
        assert!(f.is_none());
        assert!(c.threads[0].obligations.is_empty());
    }

    #[test]
    fn loops_run_to_their_bound_and_check_invariants() {
        let src = "type C { int n; }\nobject c : C { owner = w; }\n\
                   thread w { loop 3 invariant c.n <= 3 { c.n := c.n + 1; } }";
        let m = parse_model(src).unwrap();
        let (cfg, f) = run(&m, initial_config(&m));
        assert!(f.is_none());
        let c = m.object_by_name("c").unwrap();
        assert_eq!(cfg.state.slot(m.slot(c, 0)), Value::Int(3));
        let src = src.replace("c.n <= 3", "c.n <= 1");
        let m = parse_model(&src).unwrap();
        let (_, f) = run(&m, initial_config(&m));
        assert_eq!(f.unwrap().kind, FindingKind::AssertionFailure);
    }

    #[test]
    fn failing_assume_prunes() {
        let m = parse_model("thread w { assume false; }").unwrap();
        let r = thread_step(&m, &initial_config(&m), 0, StepOpts::default()).unwrap();
        assert_eq!(r, Outcome::Pruned);
    }

    #[test]
    fn multiple_physical_accesses_warn() {
        let m = parse_model(BOILER).unwrap();
        let w = static_warnings(&m);
        assert_eq!(w.len(), 1, "{w:?}");
    }
}
