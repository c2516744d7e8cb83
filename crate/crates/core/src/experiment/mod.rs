//! The two-qubit annealing experiment.
//!
//! The annealer starts in the Gibbs state of `H(0)` and only the final
//! computational-basis outcome is recorded, so the observable is the mean
//! `<v> = beta (<epsilon(t_f)> - <epsilon(0)> - Delta F)` with the initial
//! energy taken from the Gibbs state. This module evaluates `<v>` for
//! simulated and measured occupations, checks the master-equation solution
//! against the exact identities it must satisfy, and fits the bath coupling
//! `kappa` to data.

mod data;
mod fit;

#[cfg(test)]
mod tests;

use crate::ame::{hamiltonian_at, induced_channel_statistics, AnnealSpec, InducedStatistics, PropagateOptions};
use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::fluctuation::ProtocolSpec;
use crate::linalg::{
    boltzmann_weights, free_energy, gibbs_state, hermitian_part, log_partition_function, trace_product,
    von_neumann_entropy, DensityMatrix, Hermitian, Operator,
};
use crate::measurements::projective_from_hamiltonian;

pub use data::{
    parse_state_label, read_counts_csv, sample_counts, state_label, synthetic_points, write_counts_csv, ExperimentPoint,
};
pub use fit::{fit_kappa, FitOptions, FitResult, Simulator};

/// `1 / (2.3 GHz)`, the inverse temperature of a 17 mK bath.
pub const DEVICE_BETA: f64 = 1.0 / 2.3;
/// Bath coupling extracted from the measured curves.
pub const DEVICE_KAPPA: f64 = 2.34e-3;
/// Local field of both qubits.
pub const DEVICE_FIELD: f64 = 1.0 / 3.0;

/// The two-qubit anneal of the experiment at coupling `j`, anneal time
/// `t_f_us` and bath coupling `kappa`.
pub fn device_anneal(j: f64, t_f_us: f64, kappa: f64) -> Result<AnnealSpec> {
    AnnealSpec::two_qubit(DEVICE_FIELD, j, t_f_us, DEVICE_BETA, kappa)
}

/// Endpoint data that `<v>` needs besides the final occupations.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEndpoints {
    pub beta: f64,
    /// `<epsilon(0)>` in the Gibbs state of `H(0)`.
    pub initial_mean_energy: f64,
    pub delta_f: f64,
    /// Energies of the final measurement outcomes.
    pub final_energies: Vec<f64>,
}

impl ThermalEndpoints {
    /// Final outcomes are the eigenstates of `h1` in ascending energy.
    pub fn from_hamiltonians(h0: &Hermitian, h1: &Hermitian, beta: f64) -> Result<Self> {
        let g0 = gibbs_state(h0, beta)?;
        Ok(ThermalEndpoints {
            beta,
            initial_mean_energy: g0.expectation(h0.as_op()).re,
            delta_f: free_energy(h1, beta)? - free_energy(h0, beta)?,
            final_energies: h1.eig().values().to_vec(),
        })
    }

    /// Final outcomes are the computational basis states, in which `H(t_f)`
    /// is diagonal.
    pub fn for_anneal(spec: &AnnealSpec) -> Result<Self> {
        let h0 = hamiltonian_at(spec, 0.0)?;
        let h1 = hamiltonian_at(spec, spec.t_f_us())?;
        let mut ep = Self::from_hamiltonians(&h0, &h1, spec.beta())?;
        ep.final_energies = (0..spec.dim()).map(|k| h1.as_op()[(k, k)].re).collect();
        Ok(ep)
    }

    /// `beta (sum_k epsilon_k f_k - <epsilon(0)> - Delta F)`.
    pub fn mean_v(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.final_energies.len() {
            return Err(Error::DimensionMismatch { expected: self.final_energies.len(), found: f.len() });
        }
        let e1: f64 = self.final_energies.iter().zip(f).map(|(e, p)| e * p).sum();
        Ok(self.beta * (e1 - self.initial_mean_energy - self.delta_f))
    }
}

/// One simulated anneal started in the Gibbs state of `H(0)`.
#[derive(Debug, Clone)]
pub struct AnnealRun {
    pub endpoints: ThermalEndpoints,
    /// `E(rho_G(0))` in the computational basis.
    pub rho_final: Operator,
    /// `E(1)`.
    pub identity_image: Operator,
    /// Occupations of the computational basis states at `t_f`.
    pub f: Vec<f64>,
    pub statistics: InducedStatistics,
    beta: f64,
    h0: Hermitian,
    h1: Hermitian,
}

pub fn simulate(spec: &AnnealSpec, options: &PropagateOptions) -> Result<AnnealRun> {
    let statistics = induced_channel_statistics(spec, options)?;
    let h0 = hamiltonian_at(spec, 0.0)?;
    let h1 = hamiltonian_at(spec, spec.t_f_us())?;
    let g0 = gibbs_state(&h0, spec.beta())?;
    let prop = &statistics.propagator;
    let rho_final = hermitian_part(&prop.apply(g0.as_op())?);
    let identity_image = prop.apply(&Operator::identity(spec.dim(), spec.dim()))?;
    let f = (0..spec.dim()).map(|k| rho_final[(k, k)].re).collect();
    Ok(AnnealRun {
        endpoints: ThermalEndpoints::for_anneal(spec)?,
        rho_final,
        identity_image,
        f,
        statistics,
        beta: spec.beta(),
        h0,
        h1,
    })
}

/// Both sides of `<e^{-beta(Delta E - Delta F)}> = Tr[E*(rho_G(t_f))]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QjeCheck {
    /// Average over the transition statistics.
    pub lhs: f64,
    /// `Tr[rho_G(t_f) E(1)]`.
    pub rhs: f64,
    pub residual: f64,
}

/// `beta(<Delta E> - Delta F)` against
/// `S(rho(t_f) || rho_G(t_f)) + S(rho(t_f)) - S(rho_G(0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstMomentCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl AnnealRun {
    pub fn mean_v(&self) -> f64 {
        self.endpoints.mean_v(&self.f).expect("occupations match the register")
    }

    pub fn qje(&self) -> Result<QjeCheck> {
        let st = &self.statistics;
        let d = st.p.len();
        let mut lhs = 0.0;
        for a in 0..d {
            for b in 0..d {
                let w = (-self.beta * (st.final_energies[b] - st.initial_energies[a] - st.delta_f)).exp();
                lhs += st.p[a] * st.transitions.get(b, a) * w;
            }
        }
        let g1 = gibbs_state(&self.h1, self.beta)?;
        let rhs = trace_product(g1.as_op(), &self.identity_image).re;
        Ok(QjeCheck { lhs, rhs, residual: (lhs - rhs).abs() })
    }

    pub fn first_moment(&self) -> Result<FirstMomentCheck> {
        let lhs = self.mean_v();
        let rho = DensityMatrix::with_tolerance(self.rho_final.clone(), 1e-6, 1e-7)?;
        let s_rho = von_neumann_entropy(&rho);
        // ln rho_G(t_f) = -beta H(t_f) - ln Z, taken on the spectrum of H so
        // that Boltzmann factors below machine precision keep a finite log.
        let log_z1 = log_partition_function(&self.h1, self.beta);
        let log_g1 = self.h1.eig().map(|e| -self.beta * e - log_z1);
        let relative = -trace_product(rho.as_op(), &log_g1).re - s_rho;
        let s0 = von_neumann_entropy(&gibbs_state(&self.h0, self.beta)?);
        let rhs = relative + s_rho - s0;
        Ok(FirstMomentCheck { lhs, rhs, residual: (lhs - rhs).abs() })
    }
}

/// Simulates `spec` and compares the two evaluations of the efficacy.
pub fn qje_experiment_check(spec: &AnnealSpec, options: &PropagateOptions) -> Result<QjeCheck> {
    simulate(spec, options)?.qje()
}

pub fn first_moment_check(spec: &AnnealSpec, options: &PropagateOptions) -> Result<FirstMomentCheck> {
    simulate(spec, options)?.first_moment()
}

/// Closed-system protocol: Gibbs state of `h0`, energy measurements of `h0`
/// and `h1`, reference distribution the Gibbs weights of `h1`. With the
/// `LogPQ` observable, `v = beta (epsilon_beta - epsilon_alpha - Delta F)`.
pub fn closed_system_scenario(h0: &Hermitian, h1: &Hermitian, channel: Channel, beta: f64) -> Result<ProtocolSpec> {
    let rho = gibbs_state(h0, beta)?;
    let q_dist = boltzmann_weights(h1.eig().values(), beta);
    ProtocolSpec::new(rho, projective_from_hamiltonian(h0), channel, projective_from_hamiltonian(h1), q_dist)
}
