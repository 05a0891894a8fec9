//! Brute-force admissibility: enumerate every state and transition of a
//! small universe and look for a legal transition that breaks the subject's
//! invariant (condition 1) or a good transition whose poststate does not
//! satisfy it (condition 2).

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::exec::{map_range, Mode};
use crate::explorer::report::{change_json, ChangeJson, Verdict, SCHEMA};
use crate::explorer::trace::diff;
use crate::kernel::judge::{
    is_good_state, is_good_transition, is_legal_transition, legality_from_good, object_violation, Clauses, Legality,
    Violation,
};
use crate::kernel::state::{State, Transition};
use crate::kernel::value::{ObjId, ObjSet, Value};
use crate::lang::eval::EvalError;
use crate::lang::model::{Model, ObjKind, Sort, TIME_TIMED};

pub const DEFAULT_CAP: u64 = 10_000_000;
/// Materialized states; beyond this the enumeration is refused outright.
const STATE_LIMIT: u64 = 2_000_000;
const CHUNK: u64 = 64;

#[derive(Debug, Error)]
pub enum AdmError {
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("object `{0}` has no field `{1}`")]
    UnknownField(String, String),
    #[error("no object of type `{0}` in the universe")]
    NoSubject(String),
    #[error("malformed universe setting `{0}`")]
    Malformed(String),
    #[error("field `{0}` has no finite range; give one with --range")]
    Unbounded(String),
    #[error("enumeration needs {count} {what}, above the cap of {cap}")]
    TooLarge { what: &'static str, count: u64, cap: u64 },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

impl AdmError {
    pub fn code(&self) -> &'static str {
        match self {
            AdmError::UnknownType(_) | AdmError::UnknownObject(_) | AdmError::UnknownField(..) => "E_UNKNOWN",
            AdmError::NoSubject(_) => "E_NO_SUBJECT",
            AdmError::Malformed(_) => "E_USAGE",
            AdmError::Unbounded(_) => "E_UNBOUNDED",
            AdmError::TooLarge { .. } => "E_TOO_LARGE",
            AdmError::Eval(_) => "E_EVAL",
        }
    }
}

/// Which objects vary and over which values. Objects left out keep their
/// declared initial state. Integer fields take their declared range unless
/// overridden; owners stay as declared unless candidates are given.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UniverseSpec {
    pub objects: Option<Vec<String>>,
    pub ranges: Vec<(String, String, Vec<i64>)>,
    pub owners: Vec<(String, Vec<String>)>,
}

impl UniverseSpec {
    /// `obj.field=lo..hi,v,...`
    pub fn add_range(&mut self, text: &str) -> Result<(), AdmError> {
        let bad = || AdmError::Malformed(text.to_string());
        let (lhs, rhs) = text.split_once('=').ok_or_else(bad)?;
        let (obj, field) = lhs.trim().split_once('.').ok_or_else(bad)?;
        let mut vals = Vec::new();
        for part in rhs.split(',') {
            let part = part.trim();
            if let Some((a, b)) = part.split_once("..") {
                let a: i64 = a.trim().parse().map_err(|_| bad())?;
                let b: i64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                vals.extend(a..=b);
            } else {
                vals.push(part.parse().map_err(|_| bad())?);
            }
        }
        vals.sort_unstable();
        vals.dedup();
        self.ranges.push((obj.to_string(), field.to_string(), vals));
        Ok(())
    }

    /// `obj=owner|owner...`
    pub fn add_owners(&mut self, text: &str) -> Result<(), AdmError> {
        let (obj, rhs) = text.split_once('=').ok_or_else(|| AdmError::Malformed(text.to_string()))?;
        let names = rhs.split('|').map(|s| s.trim().to_string()).collect();
        self.owners.push((obj.trim().to_string(), names));
        Ok(())
    }

    /// Comma-separated object names.
    pub fn set_objects(&mut self, text: &str) {
        self.objects = Some(text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdmOptions {
    pub mode: Mode,
    pub cap: u64,
    /// Only enumerate prestates whose least absolute time is the least
    /// available one. Used only when the model is shift invariant.
    pub shift: bool,
}

impl Default for AdmOptions {
    fn default() -> Self {
        AdmOptions {
            mode: Mode::default(),
            cap: DEFAULT_CAP,
            shift: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmResult {
    Admissible,
    Inadmissible,
}

impl AdmResult {
    pub fn as_str(self) -> &'static str {
        match self {
            AdmResult::Admissible => "admissible",
            AdmResult::Inadmissible => "inadmissible",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            AdmResult::Admissible => 0,
            AdmResult::Inadmissible => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// 1: legal transition breaking the invariant; 2: good transition
    /// whose poststate does not satisfy it.
    pub condition: u8,
    pub pre: State,
    pub post: State,
    pub actor: ObjId,
    pub witness: ObjId,
    pub clause: Violation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AdmStats {
    pub states: u64,
    pub good_prestates: u64,
    pub pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissibilityVerdict {
    pub type_name: String,
    pub subject: ObjId,
    pub result: AdmResult,
    pub counterexample: Option<Counterexample>,
    pub stats: AdmStats,
}

/// One object's varying part: field values, closedness and owner.
#[derive(Debug, Clone)]
struct Choice {
    slots: Vec<(usize, Value)>,
    closed: bool,
    owner: ObjId,
}

struct Space {
    objects: Vec<ObjId>,
    comps: Vec<Vec<Choice>>,
    states: Vec<State>,
}

impl Space {
    fn digit(&self, mut idx: usize, k: usize) -> usize {
        for c in self.comps[k + 1..].iter() {
            idx /= c.len();
        }
        idx % self.comps[k].len()
    }

    /// All state indices agreeing with `idx` on component `k`.
    fn same_digit(&self, idx: usize, k: usize) -> impl Iterator<Item = usize> + '_ {
        let inner: usize = self.comps[k + 1..].iter().map(Vec::len).product();
        let width = inner * self.comps[k].len();
        let d = self.digit(idx, k);
        (0..self.states.len()).filter(move |j| (j % width) / inner == d)
    }
}

fn product<T: Clone>(domains: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for d in domains {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                d.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

fn subsets(items: &[ObjId]) -> Result<Vec<Value>, AdmError> {
    if items.len() > 16 {
        return Err(AdmError::TooLarge {
            what: "set values",
            count: 1 << items.len().min(63),
            cap: 1 << 16,
        });
    }
    Ok((0u32..1 << items.len())
        .map(|mask| {
            let set = items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .fold(ObjSet::EMPTY, |s, (_, o)| s.with(*o, true));
            Value::Set(set)
        })
        .collect())
}

fn lookup(m: &Model, name: &str) -> Result<ObjId, AdmError> {
    if name == "env" || name == "<env>" {
        return Ok(ObjId::ENV);
    }
    m.object_by_name(name).ok_or_else(|| AdmError::UnknownObject(name.to_string()))
}

fn build_space(m: &Model, spec: &UniverseSpec) -> Result<Space, AdmError> {
    let mut ranges: HashMap<(ObjId, usize), Vec<i64>> = HashMap::new();
    for (obj, field, vals) in &spec.ranges {
        let o = lookup(m, obj)?;
        let f = m
            .type_decl(o)
            .and_then(|t| t.field_index(field))
            .ok_or_else(|| AdmError::UnknownField(obj.clone(), field.clone()))?;
        ranges.insert((o, f), vals.clone());
    }
    let mut owners: HashMap<ObjId, Vec<ObjId>> = HashMap::new();
    for (obj, names) in &spec.owners {
        let o = lookup(m, obj)?;
        let ws = names.iter().map(|n| lookup(m, n)).collect::<Result<Vec<_>, _>>()?;
        owners.insert(o, ws);
    }
    let mut objects = vec![m.time];
    match &spec.objects {
        Some(names) => {
            for n in names {
                let o = lookup(m, n)?;
                if m.type_of(o).is_none() {
                    return Err(AdmError::Malformed(n.clone()));
                }
                if !objects.contains(&o) {
                    objects.push(o);
                }
            }
        }
        None => objects.extend(m.object_ids().filter(|o| *o != m.time && m.type_of(*o).is_some())),
    }
    let base = m.initial_state();
    let timed_objs: Vec<ObjId> = m
        .object_ids()
        .filter(|o| m.type_decl(*o).is_some_and(|t| t.timed))
        .collect();
    let plain: Vec<ObjId> = m.object_ids().filter(|o| m.type_of(*o).is_some()).collect();
    let mut comps = Vec::new();
    for &o in &objects {
        let decl = m.type_decl(o).expect("universe objects are typed");
        let mut domains: Vec<Vec<Value>> = Vec::new();
        for (f, fd) in decl.fields.iter().enumerate() {
            let d = match fd.sort {
                Sort::Int => {
                    let vals = match ranges.get(&(o, f)) {
                        Some(v) => v.clone(),
                        None => match fd.range {
                            Some((lo, hi)) => (lo..=hi).collect(),
                            None => return Err(AdmError::Unbounded(format!("{}.{}", m.name_of(o), fd.name))),
                        },
                    };
                    vals.into_iter().map(Value::Int).collect()
                }
                Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
                Sort::Ref(Some(ty)) => {
                    let v: Vec<Value> = m.object_ids().filter(|x| m.is_of_type(*x, ty)).map(Value::Ref).collect();
                    if v.is_empty() {
                        vec![base.slot(m.slot(o, f))]
                    } else {
                        v
                    }
                }
                Sort::Ref(None) => plain.iter().copied().map(Value::Ref).collect(),
                Sort::Set if o == m.time && f == TIME_TIMED => subsets(&timed_objs)?,
                Sort::Set => subsets(&plain)?,
            };
            domains.push(d);
        }
        let closed = if o == m.time { vec![true] } else { vec![false, true] };
        let owner_dom = owners.get(&o).cloned().unwrap_or_else(|| vec![base.owner(o)]);
        let mut choices = Vec::new();
        for vals in product(&domains) {
            for &c in &closed {
                for &w in &owner_dom {
                    choices.push(Choice {
                        slots: vals.iter().enumerate().map(|(f, v)| (m.slot(o, f), *v)).collect(),
                        closed: c,
                        owner: w,
                    });
                }
            }
        }
        comps.push(choices);
    }
    let count = comps.iter().try_fold(1u64, |acc, c| acc.checked_mul(c.len() as u64)).unwrap_or(u64::MAX);
    if count > STATE_LIMIT {
        return Err(AdmError::TooLarge {
            what: "states",
            count,
            cap: STATE_LIMIT,
        });
    }
    let mut states = Vec::with_capacity(count as usize);
    for idx in 0..count as usize {
        let mut s = base.clone();
        let mut rest = idx;
        for (k, comp) in comps.iter().enumerate().rev() {
            let ch = &comp[rest % comp.len()];
            rest /= comp.len();
            for &(i, v) in &ch.slots {
                s.set_slot(i, v);
            }
            s.set_closed(objects[k], ch.closed);
            s.set_owner(objects[k], ch.owner);
        }
        states.push(s);
    }
    Ok(Space {
        objects,
        comps,
        states,
    })
}

/// Actors that may perform a transition: the environment and every thread.
fn actors(m: &Model) -> Vec<ObjId> {
    let mut out = vec![ObjId::ENV];
    out.extend(m.object_ids().filter(|o| matches!(m.object(*o).kind, ObjKind::Thread)));
    out
}

fn min_time(m: &Model, s: &State) -> Option<i64> {
    m.time_slots().iter().map(|&i| s.slot(i).as_int()).min()
}

/// Finds the first result of `f` over `0..n` in index order, evaluating
/// chunks in parallel and stopping after the first chunk with a hit.
fn first_hit<R, F>(mode: Mode, n: u64, f: F) -> Result<Option<R>, AdmError>
where
    R: Send,
    F: Fn(u64) -> Result<Option<R>, AdmError> + Sync + Send,
{
    let mut start = 0;
    while start < n {
        let len = CHUNK.min(n - start);
        for r in map_range(mode, len, |i| f(start + i)) {
            if let Some(hit) = r? {
                return Ok(Some(hit));
            }
        }
        start += len;
    }
    Ok(None)
}

pub fn check_admissibility(
    m: &Model,
    type_name: &str,
    spec: &UniverseSpec,
    opts: &AdmOptions,
) -> Result<AdmissibilityVerdict, AdmError> {
    let ty = m.type_by_name(type_name).ok_or_else(|| AdmError::UnknownType(type_name.to_string()))?;
    let space = build_space(m, spec)?;
    let k = space
        .objects
        .iter()
        .position(|o| m.is_of_type(*o, ty))
        .ok_or_else(|| AdmError::NoSubject(type_name.to_string()))?;
    let subject = space.objects[k];
    let actors = actors(m);
    let n = space.states.len();

    let good: Vec<bool> = map_range(opts.mode, n as u64, |i| is_good_state(m, &space.states[i as usize]))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let mut pres: Vec<usize> = (0..n).filter(|&i| good[i]).collect();
    if opts.shift && m.dims.shift_invariant {
        if let Some(lo) = space.states.iter().filter_map(|s| min_time(m, s)).min() {
            pres.retain(|&i| min_time(m, &space.states[i]) == Some(lo));
        }
    }
    // Poststates where the subject's own stutter invariant fails.
    let bad_posts: Vec<usize> = map_range(opts.mode, n as u64, |i| {
        let s = &space.states[i as usize];
        Ok::<_, EvalError>(
            object_violation(m, Transition::stutter(s), subject, 0, Clauses::All)?
                .is_some()
                .then_some(i as usize),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?
    .into_iter()
    .flatten()
    .collect();

    let per_pre = (n / space.comps[k].len()) as u64;
    let a = actors.len() as u64;
    let pairs1 = pres.len() as u64 * per_pre * a;
    let good_count = good.iter().filter(|g| **g).count() as u64;
    let pairs2 = bad_posts.len() as u64 * good_count * a;
    let pairs = pairs1.saturating_add(pairs2);
    if pairs > opts.cap {
        return Err(AdmError::TooLarge {
            what: "transition pairs",
            count: pairs,
            cap: opts.cap,
        });
    }
    let stats = AdmStats {
        states: n as u64,
        good_prestates: pres.len() as u64,
        pairs,
    };

    let owns_subject = |s: &State| s.owns(subject);
    let cond1 = first_hit(opts.mode, pres.len() as u64, |pi| {
        let i = pres[pi as usize];
        let pre = &space.states[i];
        let owned = owns_subject(pre);
        for j in space.same_digit(i, k) {
            let post = &space.states[j];
            if owns_subject(post) != owned {
                continue;
            }
            for &actor in &actors {
                let tr = Transition::new(pre, post, actor);
                let Some(v) = object_violation(m, tr, subject, 0, Clauses::All)? else {
                    continue;
                };
                if legality_from_good(m, tr)?.is_legal() {
                    return Ok(Some(Counterexample {
                        condition: 1,
                        pre: pre.clone(),
                        post: post.clone(),
                        actor,
                        witness: subject,
                        clause: v,
                    }));
                }
            }
        }
        Ok(None)
    })?;
    let cx = match cond1 {
        Some(cx) => Some(cx),
        None => first_hit(opts.mode, bad_posts.len() as u64, |bi| {
            let j = bad_posts[bi as usize];
            let post = &space.states[j];
            let v = object_violation(m, Transition::stutter(post), subject, 0, Clauses::All)?
                .expect("bad poststates fail the stutter invariant");
            for i in (0..n).filter(|&i| good[i]) {
                let pre = &space.states[i];
                for &actor in &actors {
                    if is_good_transition(m, Transition::new(pre, post, actor))? {
                        return Ok(Some(Counterexample {
                            condition: 2,
                            pre: pre.clone(),
                            post: post.clone(),
                            actor,
                            witness: subject,
                            clause: v.clone(),
                        }));
                    }
                }
            }
            Ok(None)
        })?,
    };
    Ok(AdmissibilityVerdict {
        type_name: type_name.to_string(),
        subject,
        result: if cx.is_some() {
            AdmResult::Inadmissible
        } else {
            AdmResult::Admissible
        },
        counterexample: cx,
        stats,
    })
}

#[derive(Serialize)]
struct ValueJson {
    object: String,
    field: String,
    value: String,
}

#[derive(Serialize)]
struct CounterexampleJson {
    kind: &'static str,
    condition: u8,
    culprit: String,
    message: String,
    actor: String,
    prestate: Vec<ValueJson>,
    changes: Vec<ChangeJson>,
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    schema: &'static str,
    verdict: Verdict,
    #[serde(rename = "type")]
    type_name: &'a str,
    subject: &'a str,
    result: AdmResult,
    findings: Vec<CounterexampleJson>,
    stats: AdmStats,
}

/// Every field and meta-field of every typed object in `s`.
fn state_values(m: &Model, s: &State) -> Vec<ValueJson> {
    let mut out = Vec::new();
    for o in m.object_ids() {
        let Some(decl) = m.type_decl(o) else { continue };
        let name = m.name_of(o);
        let mut push = |field: &str, value: String| {
            out.push(ValueJson {
                object: name.to_string(),
                field: field.to_string(),
                value,
            })
        };
        for (f, fd) in decl.fields.iter().enumerate() {
            push(&fd.name, m.show(s.slot(m.slot(o, f))));
        }
        push("closed", s.is_closed(o).to_string());
        push("owner", m.name_of(s.owner(o)).to_string());
    }
    out
}

impl Counterexample {
    pub fn message(&self, m: &Model) -> String {
        match self.condition {
            1 => format!(
                "a legal transition by {} leaves {} unchanged but breaks its invariant",
                m.name_of(self.actor),
                m.name_of(self.witness)
            ),
            _ => format!(
                "a good transition by {} ends in a state where the invariant of {} fails",
                m.name_of(self.actor),
                m.name_of(self.witness)
            ),
        }
    }

    fn json(&self, m: &Model) -> CounterexampleJson {
        CounterexampleJson {
            kind: "inadmissible",
            condition: self.condition,
            culprit: self.clause.describe(m),
            message: self.message(m),
            actor: m.name_of(self.actor).to_string(),
            prestate: state_values(m, &self.pre),
            changes: diff(m, &self.pre, &self.post).iter().map(|c| change_json(m, c)).collect(),
        }
    }
}

impl AdmissibilityVerdict {
    pub fn verdict(&self) -> Verdict {
        match self.result {
            AdmResult::Admissible => Verdict::Pass,
            AdmResult::Inadmissible => Verdict::Fail,
        }
    }

    pub fn to_structured(&self, m: &Model) -> String {
        let doc = VerdictJson {
            schema: SCHEMA,
            verdict: self.verdict(),
            type_name: &self.type_name,
            subject: m.name_of(self.subject),
            result: self.result,
            findings: self.counterexample.iter().map(|c| c.json(m)).collect(),
            stats: self.stats,
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("verdict serializes");
        out.push('\n');
        out
    }

    pub fn to_human(&self, m: &Model) -> String {
        let s = self.stats;
        let mut out = format!(
            "{} {}: {} (subject {})\nenumerated {} states, {} good prestates, {} transition pairs\n",
            self.result.as_str(),
            self.type_name,
            self.verdict().as_str(),
            m.name_of(self.subject),
            s.states,
            s.good_prestates,
            s.pairs
        );
        if let Some(cx) = &self.counterexample {
            let c = cx.json(m);
            out += &format!("\ncounterexample (condition {}): {}\n  {}\n  prestate:\n", c.condition, c.culprit, c.message);
            for v in &c.prestate {
                out += &format!("    {}.{} = {}\n", v.object, v.field, v.value);
            }
            out += "  changes:\n";
            for ch in &c.changes {
                out += &format!("    {}.{}: {} -> {}\n", ch.object, ch.field, ch.from, ch.to);
            }
        }
        out
    }
}

/// Re-checks a counterexample with the kernel judgments alone.
pub fn confirm(m: &Model, cx: &Counterexample) -> Result<(), String> {
    let e = |e: EvalError| e.to_string();
    if !is_good_state(m, &cx.pre).map_err(e)? {
        return Err("prestate is not good".into());
    }
    let tr = Transition::new(&cx.pre, &cx.post, cx.actor);
    match cx.condition {
        1 => {
            if is_legal_transition(m, tr).map_err(e)? != Legality::Legal {
                return Err("transition is not legal".into());
            }
            if object_violation(m, tr, cx.witness, 0, Clauses::All).map_err(e)?.as_ref() != Some(&cx.clause) {
                return Err("the witness invariant holds".into());
            }
        }
        2 => {
            if !is_good_transition(m, tr).map_err(e)? {
                return Err("transition is not good".into());
            }
            let stutter = Transition::stutter(&cx.post);
            if object_violation(m, stutter, cx.witness, 0, Clauses::All).map_err(e)?.as_ref() != Some(&cx.clause) {
                return Err("the witness invariant holds in the poststate".into());
            }
        }
        c => return Err(format!("no condition {c}")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_model;

    fn spec(ranges: &[&str]) -> UniverseSpec {
        let mut s = UniverseSpec::default();
        for r in ranges {
            s.add_range(r).unwrap();
        }
        s
    }

    #[test]
    fn range_syntax() {
        let s = spec(&["b.level=28..30,70,69..69"]);
        assert_eq!(s.ranges[0].2, vec![28, 29, 30, 69, 70]);
        assert!(UniverseSpec::default().add_range("b.level").is_err());
        assert!(UniverseSpec::default().add_range("b.level=5..2").is_err());
    }

    #[test]
    fn deadline_and_timer_are_admissible() {
        let m = parse_model("object d : Deadline { closed = true; }\nobject k : Timer { closed = true; }").unwrap();
        let s = spec(&["time.cur=0..3", "d.t=0..3", "k.t=0..3"]);
        for ty in ["Deadline", "Timer"] {
            let v = check_admissibility(&m, ty, &s, &AdmOptions::default()).unwrap();
            assert_eq!(v.result, AdmResult::Admissible, "{ty}");
            assert!(v.stats.pairs > 0);
        }
    }

    #[test]
    fn unbounded_field_is_refused() {
        let m = parse_model("object d : Deadline { }").unwrap();
        let err = check_admissibility(&m, "Deadline", &spec(&["d.t=0..3"]), &AdmOptions::default()).unwrap_err();
        assert_eq!(err.code(), "E_UNBOUNDED");
    }

    #[test]
    fn unsupported_invariant_is_caught_and_confirmed() {
        // `seen` must stay below the clock but nothing forces time to stop.
        let m = parse_model("type Log { volatile ghost int seen in 0..3; invariant seen >= T; }\nobject l : Log { closed = true; }")
            .unwrap();
        let v = check_admissibility(&m, "Log", &spec(&["time.cur=0..3"]), &AdmOptions::default()).unwrap();
        assert_eq!(v.result, AdmResult::Inadmissible);
        let cx = v.counterexample.unwrap();
        assert_eq!(cx.condition, 1);
        confirm(&m, &cx).unwrap();
        assert!(m.now(&cx.post) > m.now(&cx.pre));
    }
}
