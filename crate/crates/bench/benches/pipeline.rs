use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgchat_bench::{selector_instance, UTTERANCES};
use kgchat_core::action::select_actions;
use kgchat_core::engine::{Engine, EngineConfig, TurnRequest};
use kgchat_core::fixture_dir;
use kgchat_core::nlu::Hypothesis;
use std::hint::black_box;

fn handle_turn(c: &mut Criterion) {
    let engine = Engine::open(&fixture_dir(), None, EngineConfig::default()).unwrap();
    let conv = engine.create_conversation("bench").unwrap();
    let requests: Vec<TurnRequest> = UTTERANCES.iter().map(|u| TurnRequest::typed(&conv, u).unwrap()).collect();
    let mut i = 0;
    c.bench_function("handle_turn", |b| {
        b.iter(|| {
            let r = engine.handle_turn(&requests[i % requests.len()]).unwrap();
            i += 1;
            black_box(r)
        })
    });
}

fn selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("select_actions");
    for (segments, per) in [(2, 3), (4, 6), (6, 6)] {
        let groups = selector_instance(segments, per);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{segments}x{per}")), &groups, |b, g| {
            b.iter(|| select_actions(black_box(g)))
        });
    }
    group.finish();
}

fn annotate(c: &mut Criterion) {
    let engine = Engine::open(&fixture_dir(), None, EngineConfig::default()).unwrap();
    let hyps: Vec<Hypothesis> = UTTERANCES[..3].iter().map(|u| Hypothesis::new(u, 0.9).unwrap()).collect();
    c.bench_function("annotate_batch/3_hypotheses", |b| b.iter(|| engine.nlu().annotate_batch(black_box(&hyps)).unwrap()));
    c.bench_function("annotate_sequential/3_hypotheses", |b| {
        b.iter(|| engine.nlu().annotate_sequential(black_box(&hyps)).unwrap())
    });
}

criterion_group!(benches, handle_turn, selection, annotate);
criterion_main!(benches);
