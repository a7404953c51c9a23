//! Explicit embedded Runge–Kutta integration of complex vector ODEs.

use super::dop853;
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Dormand–Prince 8(5,3), 12 stages.
    Dop853,
    /// Dormand–Prince 5(4), 7 stages with first-same-as-last.
    Dp5,
}

impl Method {
    pub fn order(self) -> u32 {
        match self {
            Method::Dop853 => 8,
            Method::Dp5 => 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    /// Take exactly this step with no error control.
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { method: Method::Dop853, rtol: 1e-8, atol: 1e-10, h_max: f64::INFINITY, h_init: None, fixed_step: None, max_steps: 5_000_000 }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    pub nfev: usize,
    /// Last accepted (or proposed) step, reusable as the next initial step.
    pub last_h: f64,
}

impl IntegrationStats {
    pub fn merge(&mut self, other: &Self) {
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.nfev += other.nfev;
        self.last_h = other.last_h;
    }
}

struct Tableau {
    c: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Weights of the embedded error estimate over stages plus the final evaluation.
    e5: Vec<f64>,
    e3: Option<Vec<f64>>,
}

impl Tableau {
    fn stages(&self) -> usize {
        self.b.len()
    }

    fn dop853() -> Self {
        Self {
            c: dop853::C.to_vec(),
            a: dop853::A.iter().map(|r| r.to_vec()).collect(),
            b: dop853::B.to_vec(),
            e5: dop853::E5.to_vec(),
            e3: Some(dop853::E3.to_vec()),
        }
    }

    fn dp5() -> Self {
        Self {
            c: vec![0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0],
            a: vec![
                vec![],
                vec![0.2],
                vec![3.0 / 40.0, 9.0 / 40.0],
                vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
                vec![19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
                vec![9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
            ],
            b: vec![35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
            e5: vec![-71.0 / 57600.0, 0.0, 71.0 / 16695.0, -71.0 / 1920.0, 17253.0 / 339200.0, -22.0 / 525.0, 1.0 / 40.0],
            e3: None,
        }
    }
}

/// Element count above which vector kernels split across the thread pool.
pub(crate) const PAR_MIN: usize = 1 << 16;
const CHUNK: usize = 4096;

fn norm(v: &[C64]) -> f64 {
    let sq = |c: &[C64]| c.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if v.len() >= PAR_MIN {
        v.par_chunks(CHUNK).map(sq).sum::<f64>().sqrt()
    } else {
        sq(v).sqrt()
    }
}

/// `out = y + h Σ_j w_j k_j`, skipping zero weights, in one pass per chunk.
fn combine(out: &mut [C64], y: &[C64], h: f64, w: &[f64], k: &[Vec<C64>]) {
    let terms: Vec<(f64, &[C64])> = w.iter().zip(k).filter(|(wj, _)| **wj != 0.0).map(|(wj, kj)| (h * wj, kj.as_slice())).collect();
    let body = |(c, (o, yc)): (usize, (&mut [C64], &[C64]))| {
        o.copy_from_slice(yc);
        let off = c * CHUNK;
        for (s, kj) in &terms {
            o.iter_mut().zip(&kj[off..off + yc.len()]).for_each(|(oi, x)| *oi += x * s);
        }
    };
    if out.len() >= PAR_MIN {
        out.par_chunks_mut(CHUNK).zip(y.par_chunks(CHUNK)).enumerate().for_each(body);
    } else {
        out.chunks_mut(CHUNK).zip(y.chunks(CHUNK)).enumerate().for_each(body);
    }
}

/// `‖Σ_j w_j k_j‖`, with the final stage slot taken from `last`.
fn weighted_norm(w: &[f64], k: &[Vec<C64>], last: &[C64]) -> f64 {
    let n = k.len();
    let terms: Vec<(f64, &[C64])> = w
        .iter()
        .enumerate()
        .filter(|(_, wj)| **wj != 0.0)
        .map(|(j, wj)| (*wj, if j < n { k[j].as_slice() } else { last }))
        .collect();
    let chunk_sq = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(last.len());
        let mut buf = vec![C64::new(0.0, 0.0); hi - lo];
        for (wj, src) in &terms {
            buf.iter_mut().zip(&src[lo..hi]).for_each(|(o, x)| *o += x * wj);
        }
        buf.iter().map(|z| z.norm_sqr()).sum::<f64>()
    };
    let chunks = last.len().div_ceil(CHUNK);
    let total: f64 = if last.len() >= PAR_MIN { (0..chunks).into_par_iter().map(chunk_sq).sum() } else { (0..chunks).map(chunk_sq).sum() };
    total.sqrt()
}

/// Adaptive (or fixed-step) integration of `y` from `t0` to `t1` in place.
pub fn integrate<S: OdeSystem + ?Sized>(sys: &mut S, cfg: &IntegratorConfig, t0: f64, t1: f64, y: &mut [C64]) -> Result<IntegrationStats> {
    let dim = sys.dim();
    assert_eq!(y.len(), dim, "state length does not match the system");
    let mut stats = IntegrationStats::default();
    if t1 <= t0 {
        return Ok(stats);
    }
    let tab = match cfg.method {
        Method::Dop853 => Tableau::dop853(),
        Method::Dp5 => Tableau::dp5(),
    };
    let s = tab.stages();
    let mut k: Vec<Vec<C64>> = (0..s).map(|_| vec![C64::new(0.0, 0.0); dim]).collect();
    let mut ytmp = vec![C64::new(0.0, 0.0); dim];
    let mut fnew = vec![C64::new(0.0, 0.0); dim];

    sys.rhs(t0, y, &mut k[0]);
    stats.nfev += 1;

    let step = |sys: &mut S, k: &mut Vec<Vec<C64>>, ytmp: &mut Vec<C64>, y: &[C64], t: f64, h: f64, stats: &mut IntegrationStats| {
        for i in 1..s {
            combine(ytmp, y, h, &tab.a[i][..i], &k[..i]);
            let (_, rest) = k.split_at_mut(i);
            sys.rhs(t + tab.c[i] * h, ytmp, &mut rest[0]);
            stats.nfev += 1;
        }
        combine(ytmp, y, h, &tab.b, k);
    };

    if let Some(hf) = cfg.fixed_step {
        let n = ((t1 - t0) / hf).round().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        for m in 0..n {
            let t = t0 + m as f64 * h;
            step(sys, &mut k, &mut ytmp, y, t, h, &mut stats);
            y.copy_from_slice(&ytmp);
            stats.steps += 1;
            if m + 1 < n {
                sys.rhs(t + h, y, &mut k[0]);
                stats.nfev += 1;
            }
        }
        stats.last_h = h;
        return Ok(stats);
    }

    let span = t1 - t0;
    let mut h = match cfg.h_init {
        Some(h) if h > 0.0 => h,
        _ => initial_step(sys, cfg, t0, y, &k[0], &mut ytmp, &mut fnew, &mut stats),
    };
    h = h.min(cfg.h_max).min(span);
    let exponent = -1.0 / cfg.method.order() as f64;
    let mut t = t0;
    let mut proposed = h;
    while t < t1 {
        if stats.steps + stats.rejected >= cfg.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        let remaining = t1 - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h <= 1e-15 * t.abs().max(span) {
            return Err(Error::StepUnderflow { t, h });
        }
        step(sys, &mut k, &mut ytmp, y, t, h, &mut stats);
        let t_new = if last { t1 } else { t + h };
        sys.rhs(t_new, &ytmp, &mut fnew);
        stats.nfev += 1;

        let sc = cfg.atol + cfg.rtol * norm(y).max(norm(&ytmp));
        let err5 = weighted_norm(&tab.e5, &k, &fnew) / sc;
        let err = match &tab.e3 {
            Some(e3) => {
                let err3 = weighted_norm(e3, &k, &fnew) / sc;
                let denom = (err5 * err5 + 0.01 * err3 * err3).sqrt();
                if denom > 0.0 {
                    h * err5 * err5 / denom
                } else {
                    0.0
                }
            }
            None => h * err5,
        };
        if err <= 1.0 {
            t = t_new;
            y.copy_from_slice(&ytmp);
            std::mem::swap(&mut k[0], &mut fnew);
            stats.steps += 1;
            let factor = if err == 0.0 { 10.0 } else { (0.9 * err.powf(exponent)).clamp(0.2, 10.0) };
            proposed = (h * factor).min(cfg.h_max);
            if !last {
                h = proposed;
            }
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(exponent)).clamp(0.2, 1.0);
        }
    }
    stats.last_h = proposed;
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn initial_step<S: OdeSystem + ?Sized>(
    sys: &mut S,
    cfg: &IntegratorConfig,
    t0: f64,
    y: &[C64],
    f0: &[C64],
    ytmp: &mut [C64],
    f1: &mut [C64],
    stats: &mut IntegrationStats,
) -> f64 {
    let sc = cfg.atol + cfg.rtol * norm(y);
    let d0 = norm(y) / sc;
    let d1 = norm(f0) / sc;
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    ytmp.iter_mut().zip(y.iter().zip(f0)).for_each(|(o, (a, b))| *o = a + b * h0);
    sys.rhs(t0 + h0, ytmp, f1);
    stats.nfev += 1;
    let d2 = f1.iter().zip(f0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / sc / h0;
    let order = cfg.method.order() as f64;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / (order + 1.0)) };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `y' = iωy`
    struct Rotor(f64);

    impl OdeSystem for Rotor {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(0.0, self.0) * y[0];
        }
    }

    /// `y' = cos(t) y`, exact `y = exp(sin t)`.
    struct Forced;

    impl OdeSystem for Forced {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = y[0] * t.cos();
        }
    }

    #[test]
    fn adaptive_methods_hit_tolerance() {
        for method in [Method::Dop853, Method::Dp5] {
            let cfg = IntegratorConfig::default().with_method(method).with_tolerances(1e-10, 1e-12);
            let mut y = vec![C64::new(1.0, 0.0)];
            let st = integrate(&mut Rotor(3.0), &cfg, 0.0, 5.0, &mut y).unwrap();
            let exact = C64::from_polar(1.0, 15.0);
            assert!((y[0] - exact).norm() < 1e-8, "{method:?}: {}", (y[0] - exact).norm());
            assert!(st.steps > 0);
            let mut y = vec![C64::new(1.0, 0.0)];
            integrate(&mut Forced, &cfg, 0.0, 4.0, &mut y).unwrap();
            assert!((y[0].re - 4f64.sin().exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn fixed_step_convergence_order() {
        for (method, min_order) in [(Method::Dop853, 7.0), (Method::Dp5, 4.5)] {
            let err = |h: f64| {
                let cfg = IntegratorConfig { method, fixed_step: Some(h), ..Default::default() };
                let mut y = vec![C64::new(1.0, 0.0)];
                integrate(&mut Forced, &cfg, 0.0, 2.0, &mut y).unwrap();
                (y[0].re - 2f64.sin().exp()).abs()
            };
            let (e1, e2) = (err(0.2), err(0.1));
            let p = (e1 / e2).log2();
            assert!(p >= min_order, "{method:?} order {p}");
        }
    }

    #[test]
    fn respects_step_ceiling() {
        let cfg = IntegratorConfig { h_max: 0.01, ..Default::default() };
        let mut y = vec![C64::new(1.0, 0.0)];
        let st = integrate(&mut Rotor(0.0), &cfg, 0.0, 1.0, &mut y).unwrap();
        assert!(st.steps >= 100);
    }
}
