use crate::dynamics::{IntegratorConfig, Method};
use crate::error::{Error, Result};
use crate::model::{mhz, rate_from_lifetime, BlockParams, SystemParams};
use crate::protocol::{Engine, ProtocolMode};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Every recognised key with its default. Frequencies are ν = ω/2π in MHz,
/// lifetimes in μs (`inf` switches a channel off).
pub const KEYS: &[(&str, &str)] = &[
    ("n_blocks", "3"),
    ("g_a", "50"),
    ("g_r", "5"),
    ("g", "5"),
    ("g_b", "4"),
    ("omega_eg", "50"),
    ("omega", "100"),
    ("phi", "-pi/2"),
    ("delta_a_over_g", "7.2"),
    ("delta_a", "auto"),
    ("D", "9"),
    ("d_mode", "track"),
    ("kappa_lifetime_us", "1"),
    ("kappa_prime_lifetime_us", "1000"),
    ("gamma_lifetime_us", "25"),
    ("gamma_phi_lifetime_us", "15"),
    ("gamma_a_lifetime_us", "25"),
    ("gamma_phi_a_lifetime_us", "15"),
    ("idle_decoherence", "false"),
    ("n_c", "3"),
    ("n_b", "12"),
    ("target_beta", "1.2"),
    ("engine", "factorized"),
    ("step", "1"),
    ("sweep_min", "auto"),
    ("sweep_max", "auto"),
    ("sweep_points", "auto"),
    ("skip_infeasible", "false"),
    ("trace_points", "201"),
    ("trace_span", "1.3"),
    ("n_spins", "4,6,8"),
    ("n_max", "2"),
    ("method", "dop853"),
    ("rtol", "1e-8"),
    ("atol", "1e-10"),
    ("deterministic", "false"),
    ("seed", "0"),
];

/// Parsed `key = value` text with `#` comments.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{}`", n + 1, raw.trim())))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// One `--set key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineChoice {
    Factorized,
    Brute,
    Effective,
    Lossless,
}

impl EngineChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "factorized" => Ok(Self::Factorized),
            "brute" => Ok(Self::Brute),
            "effective" => Ok(Self::Effective),
            "lossless" => Ok(Self::Lossless),
            _ => Err(Error::Config(format!("unknown engine `{s}` (factorized|brute|effective|lossless)"))),
        }
    }

    pub fn mode(self, integrator: IntegratorConfig) -> ProtocolMode {
        let (engine, lossy) = match self {
            Self::Factorized => (Engine::Factorized, true),
            Self::Brute => (Engine::Brute, true),
            Self::Effective => (Engine::Effective, false),
            Self::Lossless => (Engine::Factorized, false),
        };
        ProtocolMode { engine, lossy, integrator, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n).map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64).collect()
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub values: BTreeMap<String, String>,
    pub params: SystemParams,
    pub engine: EngineChoice,
    pub integrator: IntegratorConfig,
    /// δ_a follows δ_b when sweeping D.
    pub track_delta_a: bool,
    pub step: usize,
    sweep_min: Option<f64>,
    sweep_max: Option<f64>,
    sweep_points: Option<usize>,
    pub skip_infeasible: bool,
    pub trace_points: usize,
    pub trace_span: f64,
    pub n_spins: Vec<usize>,
    pub n_max: usize,
    pub deterministic: bool,
    pub seed: u64,
}

fn num(values: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = &values[key];
    let parsed = match v.as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        "pi/2" => Ok(PI / 2.0),
        "-pi/2" => Ok(-PI / 2.0),
        "pi" => Ok(PI),
        _ => v.parse::<f64>(),
    };
    match parsed {
        Ok(x) if !x.is_nan() => Ok(x),
        _ => Err(Error::Config(format!("`{key}` expects a number, got `{v}`"))),
    }
}

fn int(values: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    values[key].parse().map_err(|_| Error::Config(format!("`{key}` expects a non-negative integer, got `{}`", values[key])))
}

fn flag(values: &BTreeMap<String, String>, key: &str) -> Result<bool> {
    match values[key].as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        v => Err(Error::Config(format!("`{key}` expects true/false, got `{v}`"))),
    }
}

fn opt<T>(values: &BTreeMap<String, String>, key: &str, f: impl Fn(&BTreeMap<String, String>, &str) -> Result<T>) -> Result<Option<T>> {
    if values[key] == "auto" {
        Ok(None)
    } else {
        f(values, key).map(Some)
    }
}

fn lifetime(values: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let tau = num(values, key)?;
    if !(tau > 0.0) {
        return Err(Error::Config(format!("`{key}` must be a positive lifetime, got {tau}")));
    }
    Ok(rate_from_lifetime(tau))
}

impl RunConfig {
    /// Defaults, then the file contents, then overrides.
    pub fn resolve(file: &BTreeMap<String, String>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in file.iter().chain(overrides.iter().map(|(k, v)| (k, v))) {
            if !values.contains_key(k) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
            values.insert(k.clone(), v.clone());
        }
        let g = mhz(num(&values, "g")?);
        let g_b = mhz(num(&values, "g_b")?);
        let d = num(&values, "D")?;
        let delta_b = d * g_b;
        let delta_a = match opt(&values, "delta_a", num)? {
            Some(nu) => mhz(nu),
            None => num(&values, "delta_a_over_g")? * g,
        };
        let block = BlockParams {
            g_r: mhz(num(&values, "g_r")?),
            g,
            g_b,
            omega_eg: mhz(num(&values, "omega_eg")?),
            omega: mhz(num(&values, "omega")?),
            phi: num(&values, "phi")?,
            delta_a,
            delta_b,
            kappa: lifetime(&values, "kappa_lifetime_us")?,
            kappa_prime: lifetime(&values, "kappa_prime_lifetime_us")?,
            gamma: lifetime(&values, "gamma_lifetime_us")?,
            gamma_phi: lifetime(&values, "gamma_phi_lifetime_us")?,
        };
        let mut params = SystemParams::uniform(int(&values, "n_blocks")?, block);
        params.g_a = mhz(num(&values, "g_a")?);
        params.gamma_a = lifetime(&values, "gamma_a_lifetime_us")?;
        params.gamma_phi_a = lifetime(&values, "gamma_phi_a_lifetime_us")?;
        params.idle_decoherence = flag(&values, "idle_decoherence")?;
        params.n_c = int(&values, "n_c")?;
        params.n_b = int(&values, "n_b")?;
        params.target_beta = num(&values, "target_beta")?;
        params.validate().map_err(|e| Error::Config(e.to_string()))?;

        let method = match values["method"].as_str() {
            "dop853" => Method::Dop853,
            "dp5" => Method::Dp5,
            m => return Err(Error::Config(format!("unknown method `{m}` (dop853|dp5)"))),
        };
        let integrator = IntegratorConfig::default().with_method(method).with_tolerances(num(&values, "rtol")?, num(&values, "atol")?);
        let track_delta_a = match values["d_mode"].as_str() {
            "track" => true,
            "fixed" => false,
            m => return Err(Error::Config(format!("unknown d_mode `{m}` (track|fixed)"))),
        };
        let n_spins = values["n_spins"]
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad n_spins entry `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            params,
            engine: EngineChoice::parse(&values["engine"])?,
            integrator,
            track_delta_a,
            step: int(&values, "step")?,
            sweep_min: opt(&values, "sweep_min", num)?,
            sweep_max: opt(&values, "sweep_max", num)?,
            sweep_points: opt(&values, "sweep_points", int)?,
            skip_infeasible: flag(&values, "skip_infeasible")?,
            trace_points: int(&values, "trace_points")?,
            trace_span: num(&values, "trace_span")?,
            n_spins,
            n_max: int(&values, "n_max")?,
            deterministic: flag(&values, "deterministic")?,
            seed: values["seed"].parse().map_err(|_| Error::Config("`seed` expects an integer".into()))?,
            values,
        };
        if !(1..=3).contains(&cfg.step) {
            return Err(Error::Config(format!("`step` must be 1, 2 or 3, got {}", cfg.step)));
        }
        if cfg.trace_points < 2 || !(cfg.trace_span > 0.0) {
            return Err(Error::Config("time trace needs trace_points >= 2 and trace_span > 0".into()));
        }
        Ok(cfg)
    }

    pub fn from_text(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        Self::resolve(&parse_config_text(text)?, overrides)
    }

    pub fn default_config() -> Self {
        Self::resolve(&BTreeMap::new(), &[]).expect("defaults are valid")
    }

    /// Sweep range with per-command defaults for unset bounds.
    pub fn sweep(&self, default: SweepSpec) -> Result<SweepSpec> {
        let s = SweepSpec {
            min: self.sweep_min.unwrap_or(default.min),
            max: self.sweep_max.unwrap_or(default.max),
            points: self.sweep_points.unwrap_or(default.points),
        };
        if !(s.min < s.max) || s.points < 2 {
            return Err(Error::Config(format!("sweep needs min < max and points >= 2, got {}..{} x {}", s.min, s.max, s.points)));
        }
        Ok(s)
    }

    pub fn mode(&self) -> ProtocolMode {
        self.engine.mode(self.integrator.clone())
    }

    /// Resolved configuration, one `# key = value` line each, in key-table order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(s, "# {k} = {}", self.values[*k]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_model_defaults() {
        let c = RunConfig::default_config();
        assert_eq!(c.params, SystemParams::default());
        assert_eq!(c.engine, EngineChoice::Factorized);
    }

    #[test]
    fn file_and_overrides() {
        let text = "# comment\n g_b = 4.5 # trailing\nkappa_lifetime_us = inf\n\nD=10\n";
        let c = RunConfig::from_text(text, &[("g_b".into(), "3".into())]).unwrap();
        assert!((c.params.block(1).g_b - mhz(3.0)).abs() < 1e-12);
        assert_eq!(c.params.block(2).kappa, 0.0);
        assert!((c.params.block(3).delta_b - 10.0 * mhz(3.0)).abs() < 1e-12);
        assert!(c.echo().contains("# D = 10\n"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::from_text("bogus = 1", &[]), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("g_b", &[]), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("g_b = fast", &[]), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("engine = gpu", &[]), Err(Error::Config(_))));
        let c = RunConfig::from_text("sweep_min = 5\nsweep_max = 4", &[]).unwrap();
        assert!(c.sweep(SweepSpec { min: 0.0, max: 1.0, points: 3 }).is_err());
        assert_eq!(Error::Config(String::new()).exit_code(), 2);
    }

    #[test]
    fn sweep_grid() {
        let s = SweepSpec { min: 5.0, max: 50.0, points: 19 };
        let v = s.values();
        assert_eq!(v.len(), 19);
        assert!((v[1] - 7.5).abs() < 1e-12 && v[18] == 50.0);
    }
}
