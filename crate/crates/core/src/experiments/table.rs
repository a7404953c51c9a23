use crate::error::{Error, Result};
use std::io::Write;

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed,
/// `nan` for missing values.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let s = format!("{:.*}", (11 - exp).max(0) as usize, x);
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A header plus numeric rows, written as CSV under a `#` comment block.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write<W: Write>(&self, mut out: W, comments: &str) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        out.write_all(comments.as_bytes()).map_err(io)?;
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&x| fmt_sig(x))).map_err(csv_err)?;
        }
        w.flush().map_err(io)
    }

    pub fn to_csv_string(&self, comments: &str) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, comments).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Photon-number column names for `n` cavities.
pub fn photon_columns(n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("mean_photon_c{j}")).collect()
}

/// Columns shared by the step-fidelity, D-sweep and full-run outputs.
pub fn sweep_columns(n_blocks: usize) -> Vec<String> {
    let mut c: Vec<String> = ["sweep_value", "fidelity", "fidelity_ideal_steps", "beta_abs"].map(String::from).to_vec();
    c.extend(photon_columns(n_blocks));
    c.extend(["t4_us", "wall_ms"].map(String::from));
    c
}

/// One row of the sweep outputs. Unmeasured quantities are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub sweep_value: f64,
    pub fidelity: f64,
    pub fidelity_ideal_steps: f64,
    pub beta_abs: f64,
    pub mean_photon: Vec<f64>,
    pub t4_us: f64,
    pub wall_ms: f64,
}

impl SweepRecord {
    pub fn empty(sweep_value: f64, n_blocks: usize) -> Self {
        Self {
            sweep_value,
            fidelity: f64::NAN,
            fidelity_ideal_steps: f64::NAN,
            beta_abs: f64::NAN,
            mean_photon: vec![f64::NAN; n_blocks],
            t4_us: f64::NAN,
            wall_ms: f64::NAN,
        }
    }

    pub fn row(&self) -> Vec<f64> {
        let mut r = vec![self.sweep_value, self.fidelity, self.fidelity_ideal_steps, self.beta_abs];
        r.extend(&self.mean_photon);
        r.extend([self.t4_us, self.wall_ms]);
        r
    }
}

pub fn sweep_table(n_blocks: usize, records: &[SweepRecord]) -> Table {
    let mut t = Table::new(sweep_columns(n_blocks));
    for r in records {
        t.push(r.row());
    }
    t
}
