use wecs::dynamics::IntegratorConfig;
use wecs::model::{BlockParams, SystemParams};
use wecs::protocol::{run_protocol, Engine, ProtocolMode};

fn two_blocks() -> SystemParams {
    let mut p = SystemParams::uniform(2, BlockParams::default());
    p.n_c = 2;
    p.n_b = 4;
    p.target_beta = 0.3;
    p
}

fn mode(engine: Engine, lossy: bool) -> ProtocolMode {
    ProtocolMode { engine, lossy, ..Default::default() }
}

#[test]
fn brute_and_factorized_agree_on_two_blocks() {
    let p = two_blocks();
    for lossy in [false, true] {
        let samples = vec![0.0, 0.2, 0.5];
        let tight = IntegratorConfig::default().with_tolerances(1e-10, 1e-12);
        let run = |engine| {
            run_protocol(&p, &ProtocolMode { samples: samples.clone(), integrator: tight.clone(), ..mode(engine, lossy) }).unwrap()
        };
        let (f, b) = (run(Engine::Factorized), run(Engine::Brute));
        let tol = if lossy { 1e-6 } else { 1e-8 };
        assert!((f.fidelity - b.fidelity).abs() < tol, "lossy={lossy}: {} vs {}", f.fidelity, b.fidelity);
        for (x, y) in f.trace.iter().zip(&b.trace) {
            assert_eq!(x.t, y.t);
            assert!((x.fidelity - y.fidelity).abs() < tol, "t={}: {} vs {}", x.t, x.fidelity, y.fidelity);
            assert!((x.beta_abs - y.beta_abs).abs() < 1e-5);
            for (a, c) in x.mean_photon.iter().zip(&y.mean_photon) {
                assert!((a - c).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn brute_ideal_preparation_matches() {
    let p = two_blocks();
    let m = |engine| ProtocolMode { ideal_preparation: true, ..mode(engine, true) };
    let f = run_protocol(&p, &m(Engine::Factorized)).unwrap().fidelity;
    let b = run_protocol(&p, &m(Engine::Brute)).unwrap().fidelity;
    assert!((f - b).abs() < 1e-6, "{f} vs {b}");
}

#[test]
fn lossless_ideal_run_is_nearly_perfect() {
    let p = two_blocks();
    let r = run_protocol(&p, &ProtocolMode { ideal_preparation: true, ..mode(Engine::Effective, false) }).unwrap();
    assert!(r.fidelity > 1.0 - 1e-6, "{}", r.fidelity);
}

#[test]
fn step_four_starts_with_empty_ensembles() {
    let r = run_protocol(&SystemParams::default(), &ProtocolMode { samples: vec![0.0], ..Default::default() }).unwrap();
    let start = &r.trace[0];
    assert_eq!(start.t, 0.0);
    assert!(start.beta_abs < 1e-6, "{}", start.beta_abs);
    assert!(start.mean_photon.iter().all(|&n| (0.0..0.02).contains(&n)), "{:?}", start.mean_photon);
    assert!(start.fidelity < r.fidelity);
}

#[test]
fn ideal_preparation_beats_lossy_preparation() {
    let p = SystemParams::default();
    let blue = run_protocol(&p, &Default::default()).unwrap();
    let red = run_protocol(&p, &ProtocolMode { ideal_preparation: true, ..Default::default() }).unwrap();
    assert!(red.fidelity >= blue.fidelity, "{} < {}", red.fidelity, blue.fidelity);
    assert!((blue.beta_abs - 1.2).abs() < 0.1, "{}", blue.beta_abs);
}

#[test]
fn halving_tolerances_moves_fidelity_below_1e7() {
    let p = SystemParams::default();
    let at = |rtol: f64, atol: f64| {
        let integrator = IntegratorConfig::default().with_tolerances(rtol, atol);
        run_protocol(&p, &ProtocolMode { integrator, ..Default::default() }).unwrap().fidelity
    };
    let (a, b) = (at(1e-8, 1e-10), at(5e-9, 5e-11));
    assert!((a - b).abs() < 1e-7, "{a} vs {b}");
}
