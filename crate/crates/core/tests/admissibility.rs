use chronoverify::admissibility::{check_admissibility, confirm, AdmOptions, AdmResult, UniverseSpec};
use chronoverify::corpus::{fixture, ADM_CASES};
use chronoverify::exec::Mode;
use chronoverify::lang::Model;

fn model(name: &str) -> Model {
    fixture(name).unwrap().model().unwrap()
}

fn universe(ranges: &[&str]) -> UniverseSpec {
    let mut u = UniverseSpec::default();
    for r in ranges {
        u.add_range(r).unwrap();
    }
    u.add_owners("boiler=ctrl").unwrap();
    u.add_owners("ctrlDeadline=ctrl").unwrap();
    u
}

#[test]
fn larger_ranges_keep_the_counterexample() {
    let m = model("mutants/missing_coupling");
    let small = universe(&["time.cur=0..1", "boiler.level=29..31", "ctrl.deadline=0..1", "ctrlDeadline.t=0..1"]);
    let large = universe(&["time.cur=0..2", "boiler.level=28..31,69..72", "ctrl.deadline=0..2", "ctrlDeadline.t=0..2"]);
    for u in [small, large] {
        let v = check_admissibility(&m, "BoilerCtrl", &u, &AdmOptions::default()).unwrap();
        assert_eq!(v.result, AdmResult::Inadmissible);
        confirm(&m, v.counterexample.as_ref().unwrap()).unwrap();
    }
}

#[test]
fn passing_fixture_types_are_admissible_over_their_reachable_levels() {
    // Exploring boiler_deadline reaches levels 46..53 only.
    let m = model("boiler_deadline");
    let u = universe(&["time.cur=0..1", "boiler.level=45..55", "ctrl.deadline=0..1", "ctrlDeadline.t=0..1"]);
    for ty in ["Boiler", "BoilerCtrl", "Deadline"] {
        let v = check_admissibility(&m, ty, &u, &AdmOptions::default()).unwrap();
        assert_eq!(v.result, AdmResult::Admissible, "{ty}");
    }
}

#[test]
fn partitioning_and_shift_reduction_do_not_change_verdicts() {
    for c in ADM_CASES {
        let m = model(c.fixture);
        let u = c.universe();
        let par = check_admissibility(&m, c.type_name, &u, &AdmOptions::default()).unwrap();
        let seq = AdmOptions {
            mode: Mode::Sequential,
            ..AdmOptions::default()
        };
        assert_eq!(par, check_admissibility(&m, c.type_name, &u, &seq).unwrap());
        let full = AdmOptions {
            shift: false,
            ..AdmOptions::default()
        };
        assert_eq!(check_admissibility(&m, c.type_name, &u, &full).unwrap().result, par.result);
    }
}

#[test]
fn cap_and_ranges_are_enforced() {
    let m = model("boiler_deadline");
    let tiny = AdmOptions {
        cap: 10,
        ..AdmOptions::default()
    };
    let u = universe(&["time.cur=0..2", "boiler.level=28..31", "ctrl.deadline=0..2", "ctrlDeadline.t=0..2"]);
    assert_eq!(check_admissibility(&m, "BoilerCtrl", &u, &tiny).unwrap_err().code(), "E_TOO_LARGE");
    let no_time = universe(&["ctrl.deadline=0..2", "ctrlDeadline.t=0..2"]);
    assert_eq!(check_admissibility(&m, "BoilerCtrl", &no_time, &AdmOptions::default()).unwrap_err().code(), "E_UNBOUNDED");
    assert_eq!(check_admissibility(&m, "Nope", &u, &AdmOptions::default()).unwrap_err().code(), "E_UNKNOWN");
}
