use serde::Serialize;

use crate::linalg::log_sum_exp;
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub v: f64,
    pub prob: f64,
}

/// Discrete distribution of an observable: a list of point masses sorted by
/// value. Reverse pseudo-distributions use the same type with
/// `normalized == false`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableDistribution {
    atoms: Vec<Atom>,
    normalized: bool,
}

impl ObservableDistribution {
    /// Sorts the raw `(v, weight)` pairs and merges values within
    /// `v_merge` of the first value of their cluster. A merged atom sits at
    /// the weight-averaged position.
    pub fn from_raw(raw: impl IntoIterator<Item = (f64, f64)>, normalized: bool) -> Self {
        let tol = tolerance::get().v_merge;
        let mut raw: Vec<(f64, f64)> = raw.into_iter().collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
        let mut start = f64::NAN;
        let mut moment = 0.0;
        let mut count = 0usize;
        let mut sum_v = 0.0;
        for (v, p) in raw {
            match atoms.last_mut() {
                Some(last) if (v - start).abs() <= tol => {
                    last.prob += p;
                    moment += p * v;
                    sum_v += v;
                    count += 1;
                    last.v = if last.prob > 0.0 { moment / last.prob } else { sum_v / count as f64 };
                }
                _ => {
                    start = v;
                    moment = p * v;
                    sum_v = v;
                    count = 1;
                    atoms.push(Atom { v, prob: p });
                }
            }
        }
        ObservableDistribution { atoms, normalized }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.v).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.v * a.v).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean() / self.total_mass();
        self.second_moment() / self.total_mass() - m * m
    }

    /// `ln sum p e^{lambda v}`; `-inf` for an empty or zero-mass distribution.
    pub fn log_mgf(&self, lambda: f64) -> f64 {
        log_sum_exp(
            self.atoms
                .iter()
                .filter(|a| a.prob > 0.0)
                .map(|a| a.prob.ln() + lambda * a.v),
        )
    }

    /// `sum p e^{lambda v}`. Overflow returns `+inf` and logs a warning.
    pub fn mgf(&self, lambda: f64) -> f64 {
        let l = self.log_mgf(lambda);
        if l > f64::MAX.ln() {
            log::warn!("moment generating function overflows at lambda = {lambda} (log value {l:.6e})");
            return f64::INFINITY;
        }
        l.exp()
    }

    /// Same atoms with weights multiplied by `e^{lambda v}`.
    pub fn tilted(&self, lambda: f64) -> Self {
        ObservableDistribution {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { v: a.v, prob: a.prob * (lambda * a.v).exp() })
                .collect(),
            normalized: false,
        }
    }

    /// Distribution of `-v`.
    pub fn reflected(&self) -> Self {
        ObservableDistribution {
            atoms: self.atoms.iter().rev().map(|a| Atom { v: -a.v, prob: a.prob }).collect(),
            normalized: self.normalized,
        }
    }
}

/// Largest weight difference between two atom lists, matching positions
/// within `v_merge`. An atom without a partner counts with its full weight.
pub fn atomwise_residual(a: &ObservableDistribution, b: &ObservableDistribution) -> f64 {
    let tol = tolerance::get().v_merge;
    let (xs, ys) = (a.atoms(), b.atoms());
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < xs.len() || j < ys.len() {
        match (xs.get(i), ys.get(j)) {
            (Some(x), Some(y)) if (x.v - y.v).abs() <= tol => {
                worst = worst.max((x.prob - y.prob).abs());
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.v < y.v => {
                worst = worst.max(x.prob.abs());
                i += 1;
            }
            (Some(_), Some(y)) => {
                worst = worst.max(y.prob.abs());
                j += 1;
            }
            (Some(x), None) => {
                worst = worst.max(x.prob.abs());
                i += 1;
            }
            (None, Some(y)) => {
                worst = worst.max(y.prob.abs());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    worst
}
