use serde::Deserialize;
use std::path::Path;

use super::{A0_GHZ, B1_GHZ};
use crate::error::{Error, Result};

/// Annealing schedules `A(s)`, `B(s)` over `s = t/t_f in [0, 1]`, in GHz.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// `A(s) = a0 (1 - s)`, `B(s) = b1 s`.
    Linear { a0: f64, b1: f64 },
    /// Piecewise-linear interpolation of tabulated values; `s` strictly
    /// increasing from 0 to 1.
    Table { s: Vec<f64>, a: Vec<f64>, b: Vec<f64> },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Linear { a0: A0_GHZ, b1: B1_GHZ }
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    s: f64,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
}

impl Schedule {
    pub fn table(s: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if s.len() < 2 || s.len() != a.len() || s.len() != b.len() {
            return Err(Error::validation("schedule table needs at least two rows of s, A, B"));
        }
        if s[0] != 0.0 || s[s.len() - 1] != 1.0 {
            return Err(Error::validation("schedule table must span s = 0 to s = 1"));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("schedule s column must be strictly increasing"));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::validation("schedule values must be finite"));
        }
        let sched = Schedule::Table { s, a, b };
        sched.check_endpoints()?;
        Ok(sched)
    }

    /// CSV with header `s,A,B`.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let (mut s, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: Row = row?;
            s.push(row.s);
            a.push(row.a);
            b.push(row.b);
        }
        Schedule::table(s, a, b)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::validation(format!("cannot open schedule {}: {e}", path.display())))?;
        Schedule::from_csv_reader(file)
    }

    pub(crate) fn check_endpoints(&self) -> Result<()> {
        let (a0, b0) = self.eval(0.0);
        let (a1, b1) = self.eval(1.0);
        let scale = a0.abs().max(b1.abs()).max(1.0);
        if a1.abs() > 1e-12 * scale || b0.abs() > 1e-12 * scale {
            return Err(Error::validation(format!(
                "schedules must satisfy A(t_f) = B(0) = 0, got A(t_f) = {a1}, B(0) = {b0}"
            )));
        }
        if !(a0 > 0.0 && b1 > 0.0) {
            return Err(Error::validation(format!(
                "schedules must satisfy A(0), B(t_f) > 0, got A(0) = {a0}, B(t_f) = {b1}"
            )));
        }
        Ok(())
    }

    fn segment(s: &[f64], x: f64) -> usize {
        let k = s.partition_point(|&v| v <= x);
        k.clamp(1, s.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        match self {
            Schedule::Linear { a0, b1 } => (a0 * (1.0 - x), b1 * x),
            Schedule::Table { s, a, b } => {
                let k = Self::segment(s, x);
                let w = (x - s[k]) / (s[k + 1] - s[k]);
                (a[k] + w * (a[k + 1] - a[k]), b[k] + w * (b[k + 1] - b[k]))
            }
        }
    }

    /// `(dA/ds, dB/ds)`; at a knot, the slope of the segment to the right
    /// (to the left at `s = 1`).
    pub fn deriv(&self, x: f64) -> (f64, f64) {
        match self {
            Schedule::Linear { a0, b1 } => (-a0, *b1),
            Schedule::Table { s, a, b } => {
                let k = Self::segment(s, x);
                let ds = s[k + 1] - s[k];
                ((a[k + 1] - a[k]) / ds, (b[k + 1] - b[k]) / ds)
            }
        }
    }

    /// Interior points where the derivative jumps; integration steps never
    /// straddle them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Schedule::Linear { .. } => Vec::new(),
            Schedule::Table { s, .. } => s[1..s.len() - 1].to_vec(),
        }
    }
}
