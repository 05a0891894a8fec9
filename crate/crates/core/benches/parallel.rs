use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use chronoverify::admissibility::{check_admissibility, AdmOptions};
use chronoverify::corpus::{fixture, ADM_CASES};
use chronoverify::exec::Mode;
use chronoverify::explorer::{explore, Options};

const MODES: [(&str, Mode); 2] = [("parallel", Mode::Parallel), ("sequential", Mode::Sequential)];

fn exploration(c: &mut Criterion) {
    let mut g = c.benchmark_group("explore");
    g.sample_size(10);
    for name in ["boiler_deadline", "mutants/no_reset"] {
        let m = fixture(name).unwrap().model().unwrap();
        for (label, mode) in MODES {
            let opts = Options {
                mode,
                ..Options::default()
            };
            g.bench_with_input(BenchmarkId::new(label, name), &opts, |b, opts| b.iter(|| explore(&m, opts).unwrap()));
        }
    }
    g.finish();
}

fn admissibility(c: &mut Criterion) {
    let mut g = c.benchmark_group("admissible");
    g.sample_size(10);
    for case in ADM_CASES.iter().filter(|c| c.type_name == "Boiler" || c.fixture.contains("missing")) {
        let m = fixture(case.fixture).unwrap().model().unwrap();
        let u = case.universe();
        let id = format!("{} {}", case.fixture, case.type_name);
        for (label, mode) in MODES {
            let opts = AdmOptions {
                mode,
                ..AdmOptions::default()
            };
            g.bench_with_input(BenchmarkId::new(label, &id), &opts, |b, opts| {
                b.iter(|| check_admissibility(&m, case.type_name, &u, opts).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, exploration, admissibility);
criterion_main!(benches);
