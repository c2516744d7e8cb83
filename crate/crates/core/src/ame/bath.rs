use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Ohmic rate `gamma(omega) = kappa omega e^{-|omega|/omega_c} / (1 - e^{-beta omega})`,
/// identical and uncorrelated for every qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunction {
    pub kappa: f64,
    pub beta: f64,
    pub omega_c: f64,
}

impl RateFunction {
    pub fn new(kappa: f64, beta: f64, omega_c: f64) -> Self {
        RateFunction { kappa, beta, omega_c }
    }

    /// Infinite for every `omega` at `beta = 0` unless `kappa = 0`.
    pub fn gamma(&self, omega: f64) -> f64 {
        if self.kappa == 0.0 {
            return 0.0;
        }
        self.kappa * unit_rate(omega, self.beta, self.omega_c)
    }

    /// `gamma(omega) - gamma(-omega) = kappa omega e^{-|omega|/omega_c}`,
    /// independent of `beta`; at `beta = 0` this is the limit `beta -> 0+`.
    pub fn asymmetry(&self, omega: f64) -> f64 {
        self.kappa * omega * (-omega.abs() / self.omega_c).exp()
    }

    /// `gamma(omega) / gamma(-omega)`.
    pub fn kms_ratio(&self, omega: f64) -> f64 {
        self.gamma(omega) / self.gamma(-omega)
    }
}

fn unit_rate(omega: f64, beta: f64, omega_c: f64) -> f64 {
    if beta == 0.0 {
        return f64::INFINITY;
    }
    if omega == 0.0 {
        return 1.0 / beta;
    }
    omega * (-omega.abs() / omega_c).exp() / -(-beta * omega).exp_m1()
}

/// Principal value `S(omega) = P int dw/(2 pi) gamma(w) / (omega - w)` for
/// unit `kappa`, by subtracting the singularity and integrating the smooth
/// remainder with double-exponential quadrature on pieces split at the
/// kink `w = 0` and at `omega`.
pub fn principal_value(omega: f64, beta: f64, omega_c: f64, rel_tol: f64) -> Result<f64> {
    let g0 = unit_rate(omega, beta, omega_c);
    let half_width = 60.0 * omega_c + 2.0 * omega.abs() + 60.0 / beta;
    let mut cuts = vec![-half_width, half_width, 0.0, omega];
    for k in [1.0, 4.0, 16.0] {
        cuts.push(k * omega_c);
        cuts.push(-k * omega_c);
        cuts.push(omega + k * omega_c);
        cuts.push(omega - k * omega_c);
    }
    cuts.retain(|x| x.abs() <= half_width);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let scale = g0.abs().max(1.0 / beta).max(omega_c);
    let target = 1e-3 * rel_tol * scale / cuts.len() as f64;
    let f = |w: f64| (unit_rate(w, beta, omega_c) - g0) / (omega - w);
    let mut total = 0.0;
    let mut err = 0.0;
    for pair in cuts.windows(2) {
        let out = quadrature::integrate(f, pair[0], pair[1], target);
        total += out.integral;
        err += out.error_estimate;
    }
    total += g0 * ((half_width + omega) / (half_width - omega)).ln();
    let value = total / (2.0 * PI);
    let achieved = err / (2.0 * PI);
    if achieved > rel_tol * value.abs().max(1e-3 * scale) {
        return Err(Error::numerical(format!(
            "principal value at omega = {omega} reached error {achieved:.3e}, target relative {rel_tol:.1e}"
        )));
    }
    Ok(value)
}

/// `S(omega)/kappa` tabulated on a uniform grid and interpolated with
/// four-point Lagrange stencils. Frequencies outside the grid, and
/// non-zero frequencies within two grid spacings of the kink at 0, are
/// evaluated directly.
#[derive(Debug)]
pub struct LambShiftTable {
    beta: f64,
    omega_c: f64,
    rel_tol: f64,
    half_width: f64,
    spacing: f64,
    values: Vec<f64>,
}

const GRID_SPACING: f64 = 0.1;

impl LambShiftTable {
    pub fn build(beta: f64, omega_c: f64, half_width: f64, rel_tol: f64) -> Result<Self> {
        let n = (half_width / GRID_SPACING).ceil() as usize;
        let half_width = n as f64 * GRID_SPACING;
        let values = (0..=2 * n)
            .map(|k| principal_value(-half_width + k as f64 * GRID_SPACING, beta, omega_c, rel_tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(LambShiftTable { beta, omega_c, rel_tol, half_width, spacing: GRID_SPACING, values })
    }

    /// Tables are shared per `(beta, omega_c)` and grown on demand.
    pub fn shared(beta: f64, omega_c: f64, half_width: f64, rel_tol: f64) -> Result<Arc<Self>> {
        type Key = (u64, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<LambShiftTable>>>> = OnceLock::new();
        let key = (beta.to_bits(), omega_c.to_bits(), rel_tol.to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = guard.get(&key) {
            if t.half_width >= half_width {
                return Ok(t.clone());
            }
        }
        let table = Arc::new(LambShiftTable::build(beta, omega_c, half_width, rel_tol)?);
        guard.insert(key, table.clone());
        Ok(table)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `S(omega)` for unit `kappa`.
    pub fn unit_value(&self, omega: f64) -> Result<f64> {
        let x = (omega + self.half_width) / self.spacing;
        let near_kink = omega != 0.0 && omega.abs() < 2.0 * self.spacing;
        if near_kink || omega.abs() > self.half_width {
            return principal_value(omega, self.beta, self.omega_c, self.rel_tol);
        }
        let k = x.round();
        if (x - k).abs() < 1e-12 {
            return Ok(self.values[k as usize]);
        }
        let last = self.values.len() - 1;
        let start = (x.floor() as usize).saturating_sub(1).min(last - 3);
        let mut acc = 0.0;
        for i in start..start + 4 {
            let mut w = 1.0;
            for j in start..start + 4 {
                if j != i {
                    w *= (x - j as f64) / (i as f64 - j as f64);
                }
            }
            acc += w * self.values[i];
        }
        Ok(acc)
    }
}
