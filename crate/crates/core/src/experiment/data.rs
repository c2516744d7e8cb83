use std::collections::HashMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::fit::Simulator;
use crate::error::{Error, Result};

/// Final-state statistics at one `(J, t_f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPoint {
    pub j: f64,
    pub t_f_us: f64,
    /// Occupations of the computational basis states.
    pub f: Vec<f64>,
    pub counts: Option<Vec<u64>>,
}

impl ExperimentPoint {
    pub fn from_distribution(j: f64, t_f_us: f64, f: Vec<f64>) -> Result<Self> {
        if f.iter().any(|p| !(p.is_finite() && *p >= -1e-12)) {
            return Err(Error::validation("occupations must be non-negative"));
        }
        let total: f64 = f.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::validation(format!("occupations sum to {total}, not 1")));
        }
        Ok(ExperimentPoint { j, t_f_us, f, counts: None })
    }

    pub fn from_counts(j: f64, t_f_us: f64, counts: Vec<u64>) -> Result<Self> {
        let shots: u64 = counts.iter().sum();
        if shots == 0 {
            return Err(Error::validation(format!("no counts recorded at J = {j}, t_f = {t_f_us} us")));
        }
        let f = counts.iter().map(|&c| c as f64 / shots as f64).collect();
        Ok(ExperimentPoint { j, t_f_us, f, counts: Some(counts) })
    }

    pub fn shots(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().sum())
    }
}

/// Spin configuration of basis state `k`, qubit 0 first, `0` for up.
pub fn state_label(k: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if (k >> (n_qubits - 1 - q)) & 1 == 0 { '0' } else { '1' }).collect()
}

pub fn parse_state_label(label: &str, n_qubits: usize) -> Result<usize> {
    let label = label.trim();
    if label.len() != n_qubits || !label.chars().all(|c| c == '0' || c == '1') {
        return Err(Error::validation(format!("state label {label:?} is not a {n_qubits}-character string of 0/1")));
    }
    Ok(label.chars().fold(0, |k, c| 2 * k + usize::from(c == '1')))
}

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    #[serde(rename = "J")]
    j: f64,
    t_f_us: f64,
    state_label: String,
    count: u64,
}

/// Long-format counts with columns `J,t_f_us,state_label,count`. Rows are
/// grouped by `(J, t_f_us)` in order of first appearance; missing states
/// count zero and repeated rows add up.
pub fn read_counts_csv<R: Read>(reader: R, n_qubits: usize) -> Result<Vec<ExperimentPoint>> {
    let d = 1usize << n_qubits;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut order: Vec<(f64, f64)> = Vec::new();
    let mut groups: HashMap<(u64, u64), Vec<u64>> = HashMap::new();
    for row in rdr.deserialize() {
        let row: CountRow = row?;
        if !(row.j.is_finite() && row.t_f_us > 0.0 && row.t_f_us.is_finite()) {
            return Err(Error::validation(format!("invalid condition J = {}, t_f = {}", row.j, row.t_f_us)));
        }
        let k = parse_state_label(&row.state_label, n_qubits)?;
        let key = (row.j.to_bits(), row.t_f_us.to_bits());
        let counts = groups.entry(key).or_insert_with(|| {
            order.push((row.j, row.t_f_us));
            vec![0; d]
        });
        counts[k] += row.count;
    }
    if order.is_empty() {
        return Err(Error::validation("counts file holds no data rows"));
    }
    order
        .into_iter()
        .map(|(j, t)| ExperimentPoint::from_counts(j, t, groups.remove(&(j.to_bits(), t.to_bits())).unwrap()))
        .collect()
}

/// Writes the points that carry counts in the format [`read_counts_csv`]
/// reads.
pub fn write_counts_csv<W: Write>(writer: W, points: &[ExperimentPoint], n_qubits: usize) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for p in points {
        let counts = p.counts.as_ref().ok_or_else(|| Error::validation("point has no counts to write"))?;
        for (k, &count) in counts.iter().enumerate() {
            wtr.serialize(CountRow { j: p.j, t_f_us: p.t_f_us, state_label: state_label(k, n_qubits), count })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Multinomial sample of `shots` outcomes, drawn as a chain of conditional
/// binomials.
pub fn sample_counts<R: Rng + ?Sized>(rng: &mut R, f: &[f64], shots: u64) -> Result<Vec<u64>> {
    let mut left = shots;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(f.len());
    for (k, &p) in f.iter().enumerate() {
        let p = p.max(0.0);
        let n = if k + 1 == f.len() || left == 0 {
            left
        } else {
            let ratio = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, ratio).map_err(|e| Error::validation(e.to_string()))?.sample(rng)
        };
        out.push(n);
        left -= n;
        mass -= p;
    }
    Ok(out)
}

/// Simulated occupations at each `(J, t_f)` for coupling `kappa`, sampled
/// with `shots` outcomes when given and exact otherwise.
pub fn synthetic_points<R: Rng + ?Sized>(
    sim: &Simulator,
    conditions: &[(f64, f64)],
    kappa: f64,
    shots: Option<u64>,
    rng: &mut R,
) -> Result<Vec<ExperimentPoint>> {
    let occupations = sim.occupations_many(conditions, kappa)?;
    conditions
        .iter()
        .zip(occupations)
        .map(|(&(j, t), f)| match shots {
            Some(n) => ExperimentPoint::from_counts(j, t, sample_counts(rng, &f, n)?),
            None => {
                let total: f64 = f.iter().sum();
                ExperimentPoint::from_distribution(j, t, f.iter().map(|p| p.max(0.0) / total).collect())
            }
        })
        .collect()
}
