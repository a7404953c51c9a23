#![allow(clippy::field_reassign_with_default)]

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wecs::dynamics::{compose_block_channels, Generator, LindbladRhs, OdeSystem, QuantumChannel};
use wecs::model::{blocks_signature, build_collapse_ops, build_h_i4_td, BlockParams, SystemParams};
use wecs::protocol::ideal_expansion;
use wecs::tensor::{coherent_state, make_boson_ops};
use wecs::C64;

fn lindblad_rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("lindblad_rhs");
    group.sample_size(20);
    for (blocks, n_c, n_b) in [(1, 3, 12), (2, 2, 4)] {
        let mut p = SystemParams::uniform(blocks, BlockParams::default());
        p.n_c = n_c;
        p.n_b = n_b;
        let sig = blocks_signature(&p, true);
        let h = build_h_i4_td(&p, &sig).unwrap();
        let ops = build_collapse_ops(&p, &sig).unwrap();
        let d = sig.total_dim();
        let y: Vec<C64> = (0..d * d).map(|k| if k % (d + 1) == 0 { C64::new(1.0 / d as f64, 0.0) } else { C64::new(0.0, 0.0) }).collect();
        let mut dy = vec![C64::new(0.0, 0.0); d * d];
        for hermitian in [false, true] {
            let mut rhs = LindbladRhs::new(Generator::new(&h, &ops).unwrap());
            rhs.hermitian = hermitian;
            let id = BenchmarkId::new(if hermitian { "hermitian" } else { "general" }, d);
            group.bench_function(id, |b| b.iter(|| rhs.rhs(black_box(0.3), black_box(&y), &mut dy)));
        }
    }
    group.finish();
}

fn kron(c: &mut Criterion) {
    let (a, _, _) = make_boson_ops(12).unwrap();
    let (b, _, _) = make_boson_ops(16).unwrap();
    c.bench_function("csr_kron_12x16", |bench| bench.iter(|| a.csr().kron(&b.csr())));
    let psi = coherent_state(C64::new(1.2, 0.0), 12).unwrap();
    let pair = psi.relabel("b1").unwrap().tensor(&psi.relabel("b2").unwrap()).unwrap();
    let three = psi.relabel("b3").unwrap();
    c.bench_function("state_tensor_12^3", |bench| bench.iter(|| black_box(&pair).tensor(black_box(&three)).unwrap()));
}

fn channel_composition(c: &mut Criterion) {
    let mut p = SystemParams::default();
    p.n_c = 2;
    for n_b in [6, 12] {
        p.n_b = n_b;
        let target = ideal_expansion(&p, 3).unwrap();
        let input = target.to_operator().unwrap();
        let channels: Vec<QuantumChannel> = target.kets.iter().map(|k| QuantumChannel::identity(k.clone()).unwrap()).collect();
        let refs: Vec<&QuantumChannel> = channels.iter().collect();
        c.bench_with_input(BenchmarkId::new("compose_block_channels", n_b), &n_b, |b, _| {
            b.iter(|| compose_block_channels(black_box(&refs), black_box(&input), black_box(&target)).unwrap())
        });
    }
}

criterion_group!(benches, lindblad_rhs, kron, channel_composition);
criterion_main!(benches);
