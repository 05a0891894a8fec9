//! Bundled fixtures with their expected outcomes, and the tiny universes
//! used to check the fixture types for admissibility.

use crate::admissibility::{check_admissibility, AdmError, AdmOptions, AdmResult, UniverseSpec};
use crate::explorer::report::Verdict;
use crate::explorer::{explore, ExploreError, Options};
use crate::lang::{parse_model, Diagnostics, Model};
use crate::program::FindingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    /// Exploration verdict, and finding kinds that must all be present.
    Explore(Verdict, &'static [FindingKind]),
    ParseError,
}

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub source: &'static str,
    pub expect: Expect,
}

impl Fixture {
    pub fn model(&self) -> Result<Model, Diagnostics> {
        parse_model(self.source)
    }
}

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "boiler_deadline",
        source: include_str!("../fixtures/boiler_deadline.tvk"),
        expect: Expect::Explore(Verdict::Pass, &[]),
    },
    Fixture {
        name: "boiler_timer",
        source: include_str!("../fixtures/boiler_timer.tvk"),
        expect: Expect::Explore(Verdict::Pass, &[]),
    },
    Fixture {
        name: "mutants/no_reset",
        source: include_str!("../fixtures/mutants/no_reset.tvk"),
        expect: Expect::Explore(Verdict::Fail, &[FindingKind::TimeFrozen]),
    },
    Fixture {
        name: "mutants/threshold_80",
        source: include_str!("../fixtures/mutants/threshold_80.tvk"),
        expect: Expect::Explore(Verdict::Fail, &[FindingKind::IllegalTransition]),
    },
    Fixture {
        name: "mutants/assume_20",
        source: include_str!("../fixtures/mutants/assume_20.tvk"),
        expect: Expect::Explore(Verdict::Fail, &[FindingKind::TimeFrozen]),
    },
    Fixture {
        name: "mutants/missing_coupling",
        source: include_str!("../fixtures/mutants/missing_coupling.tvk"),
        expect: Expect::Explore(Verdict::Pass, &[]),
    },
    Fixture {
        name: "malformed",
        source: include_str!("../fixtures/malformed.tvk"),
        expect: Expect::ParseError,
    },
];

pub fn fixture(name: &str) -> Option<&'static Fixture> {
    let name = name.trim_end_matches(".tvk");
    FIXTURES.iter().find(|f| f.name == name)
}

/// A type checked on a small universe built from a fixture.
#[derive(Debug, Clone, Copy)]
pub struct AdmCase {
    pub fixture: &'static str,
    pub type_name: &'static str,
    pub objects: Option<&'static str>,
    pub ranges: &'static [&'static str],
    pub owners: &'static [&'static str],
    pub expect: AdmResult,
}

impl AdmCase {
    pub fn universe(&self) -> UniverseSpec {
        let mut u = UniverseSpec::default();
        if let Some(o) = self.objects {
            u.set_objects(o);
        }
        for r in self.ranges {
            u.add_range(r).expect("bundled ranges are well formed");
        }
        for o in self.owners {
            u.add_owners(o).expect("bundled owners are well formed");
        }
        u
    }
}

const BOILER_RANGES: &[&str] = &["time.cur=0..2", "boiler.level=28..31,69..72", "ctrl.deadline=0..2", "ctrlDeadline.t=0..2"];

pub const ADM_CASES: &[AdmCase] = &[
    AdmCase {
        fixture: "boiler_deadline",
        type_name: "Deadline",
        objects: Some("ctrlDeadline"),
        ranges: &["time.cur=0..3", "ctrlDeadline.t=0..3"],
        owners: &[],
        expect: AdmResult::Admissible,
    },
    AdmCase {
        fixture: "boiler_timer",
        type_name: "Timer",
        objects: Some("ctrlTimer"),
        ranges: &["time.cur=0..3", "ctrlTimer.t=0..3"],
        owners: &[],
        expect: AdmResult::Admissible,
    },
    AdmCase {
        fixture: "boiler_deadline",
        type_name: "Boiler",
        objects: Some("boiler"),
        ranges: &["time.cur=0..3", "boiler.level=28..32,68..72"],
        owners: &["boiler=driver|ctrl"],
        expect: AdmResult::Admissible,
    },
    AdmCase {
        fixture: "boiler_deadline",
        type_name: "BoilerCtrl",
        objects: None,
        ranges: BOILER_RANGES,
        owners: &["boiler=ctrl", "ctrlDeadline=ctrl"],
        expect: AdmResult::Admissible,
    },
    AdmCase {
        fixture: "mutants/missing_coupling",
        type_name: "BoilerCtrl",
        objects: None,
        ranges: BOILER_RANGES,
        owners: &["boiler=ctrl", "ctrlDeadline=ctrl"],
        expect: AdmResult::Inadmissible,
    },
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLine {
    pub name: String,
    pub expected: String,
    pub got: String,
    pub ok: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{0}: {1}")]
    Explore(String, ExploreError),
    #[error("{0}: {1}")]
    Adm(String, AdmError),
}

fn expect_text(e: Expect) -> String {
    match e {
        Expect::ParseError => "parse error".into(),
        Expect::Explore(v, kinds) => {
            let mut s = v.as_str().to_string();
            for k in kinds {
                s += &format!(" {}", k.as_str());
            }
            s
        }
    }
}

/// Runs every fixture and admissibility case against its expected outcome.
pub fn run_corpus(opts: &Options, adm: &AdmOptions) -> Result<Vec<CorpusLine>, CorpusError> {
    let mut out = Vec::new();
    for f in FIXTURES {
        let (got, ok) = match (f.model(), f.expect) {
            (Err(d), Expect::ParseError) => (format!("parse error at {}:{}", d.0[0].line, d.0[0].col), true),
            (Err(d), _) => (format!("parse error: {d}"), false),
            (Ok(_), Expect::ParseError) => ("parsed".into(), false),
            (Ok(m), Expect::Explore(v, kinds)) => {
                let x = explore(&m, opts).map_err(|e| CorpusError::Explore(f.name.into(), e))?;
                let r = &x.report;
                let mut found: Vec<FindingKind> = r.findings.iter().map(|f| f.finding.kind).collect();
                found.sort_by_key(|k| k.as_str());
                found.dedup();
                let ok = r.verdict == v && kinds.iter().all(|k| found.contains(k));
                let kinds: Vec<&str> = found.iter().map(|k| k.as_str()).collect();
                (format!("{} {}", r.verdict.as_str(), kinds.join(" ")).trim_end().to_string(), ok)
            }
        };
        out.push(CorpusLine {
            name: f.name.to_string(),
            expected: expect_text(f.expect),
            got,
            ok,
        });
    }
    for c in ADM_CASES {
        let m = fixture(c.fixture)
            .and_then(|f| f.model().ok())
            .expect("admissibility cases use parsing fixtures");
        let name = format!("{} {}", c.fixture, c.type_name);
        let v = check_admissibility(&m, c.type_name, &c.universe(), adm).map_err(|e| CorpusError::Adm(name.clone(), e))?;
        out.push(CorpusLine {
            name,
            expected: c.expect.as_str().to_string(),
            got: v.result.as_str().to_string(),
            ok: v.result == c.expect,
        });
    }
    Ok(out)
}
