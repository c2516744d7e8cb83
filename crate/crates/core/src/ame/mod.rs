//! Adiabatic Markovian master equation for a transverse-field Ising
//! annealer weakly coupled to independent Ohmic baths, one per qubit,
//! through `sigma^z`.
//!
//! Conventions: energies and rates are angular frequencies in rad/ns and
//! quoted as GHz, `hbar = 1`; anneal times are in microseconds. Qubit 0 is
//! the leftmost tensor factor and basis state 0 is spin up (`sigma^z = +1`).
//! Internally everything is integrated in the dimensionless time
//! `s = t / t_f`.

mod bath;
mod frame;
mod lindblad;
mod magnus;
mod moments;
mod propagate;
mod schedule;


use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c, Hermitian};

pub use bath::{LambShiftTable, RateFunction};
pub use lindblad::{lamb_shift_at, lindblad_ops_at, non_unitality_witness, LindbladOp, LindbladSet};
pub use propagate::{
    induced_channel_statistics, propagate, propagate_map, InducedStatistics, PropagateOptions, Propagator, StepStats, TracePoint,
};
pub use schedule::Schedule;

/// Default transverse-field scale `A(0)`.
pub const A0_GHZ: f64 = 33.7;
/// Default Ising scale `B(t_f)`.
pub const B1_GHZ: f64 = 33.6;
/// Default bath cutoff.
pub const OMEGA_C_GHZ: f64 = 8.0 * std::f64::consts::PI;

/// `H_S(t) = -A(t) sum_i sigma^x_i + B(t) H_Ising` with
/// `H_Ising = -sum_i h_i sigma^z_i - sum_{i<j} J_ij sigma^z_i sigma^z_j`,
/// plus the bath parameters.
#[derive(Debug, Clone)]
pub struct AnnealSpec {
    n_qubits: usize,
    h: Vec<f64>,
    couplings: Vec<(usize, usize, f64)>,
    schedule: Schedule,
    t_f_us: f64,
    beta: f64,
    kappa: f64,
    omega_c: f64,
    lamb_shift: bool,
    x_sum: DMatrix<f64>,
    ising_diag: Vec<f64>,
}

/// Largest register the dense superoperator integrator accepts.
pub const MAX_QUBITS: usize = 6;

impl AnnealSpec {
    pub fn new(
        n_qubits: usize,
        h: Vec<f64>,
        couplings: Vec<(usize, usize, f64)>,
        schedule: Schedule,
        t_f_us: f64,
        beta: f64,
        kappa: f64,
        omega_c: f64,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::validation(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}")));
        }
        if h.len() != n_qubits {
            return Err(Error::validation(format!("expected {n_qubits} local fields, got {}", h.len())));
        }
        for &(i, j, v) in &couplings {
            if i >= n_qubits || j >= n_qubits || i == j {
                return Err(Error::validation(format!("invalid coupling ({i}, {j})")));
            }
            if !v.is_finite() {
                return Err(Error::validation(format!("coupling ({i}, {j}) is not finite")));
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("local fields must be finite"));
        }
        if !(t_f_us > 0.0 && t_f_us.is_finite()) {
            return Err(Error::validation(format!("t_f must be positive, got {t_f_us}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::validation(format!("beta must be non-negative, got {beta}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::validation(format!("kappa must be non-negative, got {kappa}")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::validation(format!("omega_c must be positive, got {omega_c}")));
        }
        schedule.check_endpoints()?;

        let d = 1usize << n_qubits;
        let mut x_sum = DMatrix::zeros(d, d);
        for q in 0..n_qubits {
            let bit = 1usize << (n_qubits - 1 - q);
            for k in 0..d {
                x_sum[(k ^ bit, k)] += 1.0;
            }
        }
        let ising_diag = (0..d)
            .map(|k| {
                let z = |q: usize| if (k >> (n_qubits - 1 - q)) & 1 == 0 { 1.0 } else { -1.0 };
                let field: f64 = h.iter().enumerate().map(|(q, hq)| hq * z(q)).sum();
                let coupling: f64 = couplings.iter().map(|&(i, j, v)| v * z(i) * z(j)).sum();
                -field - coupling
            })
            .collect();

        Ok(AnnealSpec {
            n_qubits,
            h,
            couplings,
            schedule,
            t_f_us,
            beta,
            kappa,
            omega_c,
            lamb_shift: true,
            x_sum,
            ising_diag,
        })
    }

    /// Two qubits with equal fields `h` and coupling `J`, linear schedules
    /// and the default energy scales and cutoff.
    pub fn two_qubit(h: f64, j: f64, t_f_us: f64, beta: f64, kappa: f64) -> Result<Self> {
        AnnealSpec::new(2, vec![h, h], vec![(0, 1, j)], Schedule::default(), t_f_us, beta, kappa, OMEGA_C_GHZ)
    }

    pub fn with_lamb_shift(mut self, on: bool) -> Self {
        self.lamb_shift = on;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::validation(format!("kappa must be non-negative, got {kappa}")));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::validation(format!("beta must be non-negative, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_t_f(mut self, t_f_us: f64) -> Result<Self> {
        if !(t_f_us > 0.0 && t_f_us.is_finite()) {
            return Err(Error::validation(format!("t_f must be positive, got {t_f_us}")));
        }
        self.t_f_us = t_f_us;
        Ok(self)
    }

    /// Sets every coupling `J_ij` to `j`.
    pub fn with_coupling_strength(self, j: f64) -> Result<Self> {
        let couplings = self.couplings.iter().map(|&(a, b, _)| (a, b, j)).collect();
        Ok(AnnealSpec::new(self.n_qubits, self.h, couplings, self.schedule, self.t_f_us, self.beta, self.kappa, self.omega_c)?
            .with_lamb_shift(self.lamb_shift))
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Result<Self> {
        schedule.check_endpoints()?;
        self.schedule = schedule;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn fields(&self) -> &[f64] {
        &self.h
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn t_f_us(&self) -> f64 {
        self.t_f_us
    }

    /// `t_f` in ns, the factor converting rates in rad/ns into rates per
    /// unit of `s`.
    pub fn t_f_ns(&self) -> f64 {
        1000.0 * self.t_f_us
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn lamb_shift(&self) -> bool {
        self.lamb_shift
    }

    pub fn rates(&self) -> RateFunction {
        RateFunction::new(self.kappa, self.beta, self.omega_c)
    }

    /// Diagonal of `H_Ising` in the computational basis.
    pub fn ising_energies(&self) -> &[f64] {
        &self.ising_diag
    }

    /// `H_S(s)` as a real symmetric matrix.
    pub(crate) fn h_real(&self, s: f64) -> DMatrix<f64> {
        let (a, b) = self.schedule.eval(s);
        let mut h = &self.x_sum * (-a);
        for (k, e) in self.ising_diag.iter().enumerate() {
            h[(k, k)] += b * e;
        }
        h
    }

    /// `dH_S/ds`.
    pub(crate) fn dh_real(&self, s: f64) -> DMatrix<f64> {
        let (da, db) = self.schedule.deriv(s);
        let mut h = &self.x_sum * (-da);
        for (k, e) in self.ising_diag.iter().enumerate() {
            h[(k, k)] += db * e;
        }
        h
    }

    /// `sigma^z_q` diagonal.
    pub(crate) fn z_diag(&self, q: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| if (k >> (self.n_qubits - 1 - q)) & 1 == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    pub(crate) fn s_of(&self, t_us: f64) -> Result<f64> {
        if !(0.0..=self.t_f_us).contains(&t_us) {
            return Err(Error::validation(format!("t = {t_us} us is outside [0, {}]", self.t_f_us)));
        }
        Ok(t_us / self.t_f_us)
    }

    /// Upper bound on `|E_a(s) - E_b(s)|` over the anneal, `2 ||H(s)||`
    /// bounded by `A n + B max|H_Ising|`, which is piecewise linear in `s`
    /// and so peaks at a schedule knot.
    pub(crate) fn bohr_bound(&self) -> f64 {
        let ising_span = self.ising_diag.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let mut knots = self.schedule.breakpoints();
        knots.extend([0.0, 1.0]);
        knots
            .into_iter()
            .map(|s| {
                let (a, b) = self.schedule.eval(s);
                2.0 * (a.abs() * self.n_qubits as f64 + b.abs() * ising_span)
            })
            .fold(0.0, f64::max)
    }
}

pub fn hamiltonian_at(spec: &AnnealSpec, t_us: f64) -> Result<Hermitian> {
    let s = spec.s_of(t_us)?;
    Ok(Hermitian::from_part(&spec.h_real(s).map(|x| c(x, 0.0))))
}

/// JSON form of [`AnnealSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealSpecFile {
    pub n_qubits: usize,
    pub h: Vec<f64>,
    #[serde(rename = "J", default)]
    pub couplings: Vec<(usize, usize, f64)>,
    pub t_f_us: f64,
    #[serde(rename = "beta_per_GHz")]
    pub beta_per_ghz: f64,
    pub kappa: f64,
    #[serde(default = "default_omega_c")]
    pub omega_c: f64,
    #[serde(default)]
    pub schedule: ScheduleSource,
    #[serde(default = "default_true")]
    pub lamb_shift: bool,
}

fn default_omega_c() -> f64 {
    OMEGA_C_GHZ
}

fn default_true() -> bool {
    true
}

/// `"linear"` or `{"file": "schedule.csv"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSource {
    Named(String),
    File { file: String },
}

impl Default for ScheduleSource {
    fn default() -> Self {
        ScheduleSource::Named("linear".into())
    }
}

impl AnnealSpecFile {
    /// Relative schedule paths are resolved against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<AnnealSpec> {
        let schedule = match &self.schedule {
            ScheduleSource::Named(name) if name == "linear" => Schedule::default(),
            ScheduleSource::Named(name) => {
                return Err(Error::validation(format!("unknown schedule {name:?}")));
            }
            ScheduleSource::File { file } => {
                let path = match base {
                    Some(b) if Path::new(file).is_relative() => b.join(file),
                    _ => Path::new(file).to_path_buf(),
                };
                Schedule::from_csv_path(&path)?
            }
        };
        Ok(AnnealSpec::new(
            self.n_qubits,
            self.h.clone(),
            self.couplings.clone(),
            schedule,
            self.t_f_us,
            self.beta_per_ghz,
            self.kappa,
            self.omega_c,
        )?
        .with_lamb_shift(self.lamb_shift))
    }
}
