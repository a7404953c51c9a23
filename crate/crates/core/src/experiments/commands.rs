use super::config::{EngineChoice, RunConfig, SweepSpec};
use super::table::{photon_columns, sweep_table, SweepRecord, Table};
use crate::error::{Error, Result};
use crate::model::{bright_state_coupling, collective_mode_check, mhz, to_mhz, EnsembleMicroModel, SystemParams};
use crate::protocol::{run_protocol, state_transfer, step_fidelity, ProtocolMode, ProtocolResult, StepPlan};
use crate::C64;
use log::{info, warn};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::time::Instant;

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Evaluate `f` at every value on `jobs` workers, keeping input order.
fn par_map<T: Send>(jobs: usize, values: &[f64], f: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    pool(jobs)?.install(|| values.par_iter().map(|&v| f(v)).collect())
}

fn wall_ms(cfg: &RunConfig, start: Instant) -> f64 {
    if cfg.deterministic {
        f64::NAN
    } else {
        start.elapsed().as_secs_f64() * 1e3
    }
}

fn base_params(cfg: &RunConfig) -> SystemParams {
    if cfg.engine == EngineChoice::Lossless {
        cfg.params.lossless()
    } else {
        cfg.params.clone()
    }
}

/// Name of the parameter swept for each preparation step.
pub fn step_variable(step: usize) -> &'static str {
    match step {
        1 => "g_a",
        2 => "g_r",
        _ => "omega_eg",
    }
}

/// Isolated fidelity of `cfg.step` while its coupling runs over the sweep
/// range (MHz), each point fed with the ideal previous-step output.
pub fn cmd_step_fidelity(cfg: &RunConfig, jobs: usize) -> Result<Table> {
    let spec = cfg.sweep(SweepSpec { min: 5.0, max: 50.0, points: 19 })?;
    let base = base_params(cfg);
    let k = cfg.step;
    let n = base.n_blocks();
    let records = par_map(jobs, &spec.values(), |v| {
        let start = Instant::now();
        let mut p = base.clone();
        match k {
            1 => p.g_a = mhz(v),
            2 => p.for_blocks(|b| b.g_r = mhz(v)),
            _ => p.for_blocks(|b| b.omega_eg = mhz(v)),
        }
        let f = step_fidelity(&p, k, &cfg.integrator)?;
        info!("step {k}: {} = {v} MHz, F = {f:.6}", step_variable(k));
        let mut r = SweepRecord::empty(v, n);
        r.fidelity = f;
        r.wall_ms = wall_ms(cfg, start);
        Ok(r)
    })?;
    Ok(sweep_table(n, &records))
}

fn record_from(v: f64, blue: &ProtocolResult, red: Option<&ProtocolResult>, wall: f64) -> SweepRecord {
    SweepRecord {
        sweep_value: v,
        fidelity: blue.fidelity,
        fidelity_ideal_steps: red.map_or(f64::NAN, |r| r.fidelity),
        beta_abs: blue.beta_abs,
        mean_photon: blue.mean_photon.clone(),
        t4_us: blue.plan.t4[0],
        wall_ms: wall,
    }
}

fn both_modes(p: &SystemParams, mode: &ProtocolMode) -> Result<(ProtocolResult, ProtocolResult)> {
    let red_mode = ProtocolMode { ideal_preparation: true, ..mode.clone() };
    let (blue, red) = rayon::join(|| run_protocol(p, mode), || run_protocol(p, &red_mode));
    Ok((blue?, red?))
}

/// Full protocol against D = δ_b/g_b, with lossy (`fidelity`) and ideal
/// (`fidelity_ideal_steps`) preparation. `t4` is re-solved at every D.
pub fn cmd_sweep_d(cfg: &RunConfig, jobs: usize) -> Result<Table> {
    let spec = cfg.sweep(SweepSpec { min: 5.0, max: 15.0, points: 11 })?;
    let base = base_params(cfg);
    let n = base.n_blocks();
    let mode = cfg.mode();
    let records = par_map(jobs, &spec.values(), |d| {
        let start = Instant::now();
        let p = base.with_reduced_detuning(d, cfg.track_delta_a);
        match both_modes(&p, &mode) {
            Ok((blue, red)) => {
                info!("D = {d}: F = {:.6}, F(ideal 1-3) = {:.6}", blue.fidelity, red.fidelity);
                Ok(record_from(d, &blue, Some(&red), wall_ms(cfg, start)))
            }
            Err(e @ Error::Infeasible { .. }) if cfg.skip_infeasible => {
                warn!("D = {d} skipped: {e}");
                Ok(SweepRecord::empty(d, n))
            }
            Err(e) => Err(e),
        }
    })?;
    Ok(sweep_table(n, &records))
}

/// Step-4 sample times `[0, trace_span · t4]`.
pub fn trace_times(cfg: &RunConfig) -> Result<Vec<f64>> {
    let t4 = StepPlan::new(&cfg.params)?.t4[0];
    let end = cfg.trace_span * t4;
    let m = cfg.trace_points;
    Ok((0..m).map(|i| end * i as f64 / (m - 1) as f64).collect())
}

/// Fidelity against the fixed target, |β| and cavity photon numbers during
/// step 4, with time measured from the start of that step.
pub fn cmd_time_trace(cfg: &RunConfig) -> Result<Table> {
    let p = base_params(cfg);
    let mode = ProtocolMode { samples: trace_times(cfg)?, ..cfg.mode() };
    let res = run_protocol(&p, &mode)?;
    let mut cols: Vec<String> = ["t_us", "fidelity", "beta_abs"].map(String::from).to_vec();
    cols.extend(photon_columns(p.n_blocks()));
    let mut table = Table::new(cols);
    for pt in &res.trace {
        let mut row = vec![pt.t, pt.fidelity, pt.beta_abs];
        row.extend(&pt.mean_photon);
        table.push(row);
    }
    Ok(table)
}

/// One protocol run in both preparation modes at the configured D.
pub fn cmd_full_run(cfg: &RunConfig) -> Result<Table> {
    let p = base_params(cfg);
    let start = Instant::now();
    let mode = ProtocolMode { step_fidelities: true, ..cfg.mode() };
    let (blue, red) = both_modes(&p, &mode)?;
    if let Some(f) = blue.step_fidelities {
        info!("step fidelities {:.6} {:.6} {:.6}", f[0], f[1], f[2]);
    }
    info!("t4 = {:.6} us, beta = {:.6}{:+.6}i", blue.plan.t4[0], blue.beta_target.re, blue.beta_target.im);
    let d = p.block(1).reduced_detuning();
    Ok(sweep_table(p.n_blocks(), &[record_from(d, &blue, Some(&red), wall_ms(cfg, start))]))
}

/// Lossless cavity–ensemble swap of |0⟩|β⟩ sampled over `[0, π/(2 g_b)]`.
/// Both modes use `n_b` levels.
pub fn cmd_state_transfer(cfg: &RunConfig) -> Result<Table> {
    let mut p = cfg.params.clone();
    p.n_c = p.n_b;
    let t_end = PI / (2.0 * p.block(1).g_b);
    let m = cfg.trace_points;
    let beta = C64::new(p.target_beta, 0.0);
    let mut table = Table::new(["t_us", "fidelity", "fidelity_conjugate", "photons_cavity", "photons_nve"]);
    for i in 0..m {
        let t = t_end * i as f64 / (m - 1) as f64;
        let s = state_transfer(&p, beta, Some(t))?;
        table.push(vec![s.t, s.fidelity, s.fidelity_conjugate, s.photons_cavity, s.photons_nve]);
    }
    Ok(table)
}

/// Equal-coupling spin micro-models against the bosonic collective mode.
/// The single-spin coupling is g_b/√N so the collective coupling is g_b.
pub fn cmd_bosonization(cfg: &RunConfig, jobs: usize) -> Result<Table> {
    let g_b = cfg.params.block(1).g_b;
    let sizes: Vec<f64> = cfg.n_spins.iter().map(|&n| n as f64).collect();
    let rows = par_map(jobs, &sizes, |nf| {
        let n = nf as usize;
        let m = EnsembleMicroModel::equal(n, g_b / nf.sqrt());
        let bright = bright_state_coupling(&m)?;
        let coll = collective_mode_check(&m, cfg.n_max.min(n.saturating_sub(1)))?;
        Ok(coll
            .rows
            .iter()
            .map(|&(k, elem, boson, dev)| {
                let closed = 1.0 - (1.0 - k as f64 / nf).sqrt();
                vec![nf, k as f64, elem, boson, dev, closed, to_mhz(bright.bright_coupling), to_mhz(bright.expected)]
            })
            .collect::<Vec<_>>())
    })?;
    let mut table = Table::new([
        "n_spins",
        "n",
        "element",
        "bosonic",
        "deviation",
        "deviation_closed_form",
        "bright_coupling_mhz",
        "bright_expected_mhz",
    ]);
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    Ok(table)
}
