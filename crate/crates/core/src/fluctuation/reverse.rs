use nalgebra::DMatrix;
use serde::Serialize;

use super::{forward_statistics, pair_atoms, atomwise_residual, ObservableDistribution, ProtocolSpec, VChoice};
use crate::channels::LinearMap;
use crate::error::{Error, Result};
use crate::measurements::{build_reverse_measurements, measure_prepare, ReverseMeasurements, ReverseUnitaries};
use crate::tolerance;

/// Outcome statistics of the executed reverse protocol: prepare `rho~`,
/// measure `Q~`, apply the dual channel, measure `P~`.
#[derive(Debug, Clone)]
pub struct ReverseRun {
    pub measurements: ReverseMeasurements,
    /// Probabilities of the outcomes of `Q~` on `rho~`.
    pub q_tilde_probs: Vec<f64>,
    /// `p~_{alpha|beta}`, rows indexed by `alpha`, columns by `beta`.
    pub transitions: DMatrix<f64>,
}

pub fn execute_reverse(spec: &ProtocolSpec, unitaries: &ReverseUnitaries) -> Result<ReverseRun> {
    let rm = build_reverse_measurements(spec.p(), spec.q(), spec.q_dist(), spec.rho(), None, unitaries)?;
    let ens = measure_prepare(&rm.q_tilde, &rm.rho_tilde)?;
    let dual = spec.channel().dual();
    let mut transitions = DMatrix::zeros(spec.p().len(), spec.q().len());
    for beta in ens.support() {
        let evolved = dual.apply(ens.state(beta).unwrap())?;
        for (alpha, p) in rm.p_tilde.probabilities_of(&evolved)?.into_iter().enumerate() {
            transitions[(alpha, beta)] = p;
        }
    }
    Ok(ReverseRun {
        q_tilde_probs: ens.probs().to_vec(),
        measurements: rm,
        transitions,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrooksReport {
    /// Largest atomwise `|P_E(v) e^{-v} - P~_{E*}(-v)|`.
    pub max_residual: f64,
    pub unitality_defect: f64,
    /// `P_E(v) e^{-v}`.
    pub forward_tilted: ObservableDistribution,
    /// `P~_{E*}(-v)`, the executed reverse distribution reflected.
    pub reverse_reflected: ObservableDistribution,
}

/// Compares the forward distribution of `ln(p_alpha/q_beta)` with the
/// distribution of `ln(q_beta/p_alpha)` produced by running the reverse
/// protocol. Requires a unital channel and a microreversible pair.
pub fn crooks_check(spec: &ProtocolSpec, unitaries: &ReverseUnitaries) -> Result<CrooksReport> {
    let defect = spec.channel().unitality_defect();
    if defect > tolerance::get().tp {
        return Err(Error::validation(format!(
            "the reverse protocol needs a unital channel; ||E(1) - 1|| = {defect:.3e}"
        )));
    }
    let stats = forward_statistics(spec)?;
    let pairs = pair_atoms(spec, &stats, VChoice::LogPQ)?;
    let forward_tilted =
        ObservableDistribution::from_raw(pairs.iter().map(|a| (a.v, a.joint * (-a.v).exp())), false);

    let run = execute_reverse(spec, unitaries)?;
    let floor = tolerance::get().p_floor;
    let p = stats.ensemble.probs();
    let q = spec.q_dist();
    let mut raw = Vec::new();
    for beta in 0..spec.q().len() {
        let qb = run.q_tilde_probs[beta];
        if qb <= floor {
            continue;
        }
        for alpha in 0..spec.p().len() {
            let cond = run.transitions[(alpha, beta)];
            if cond <= floor {
                continue;
            }
            raw.push(((q[beta] / p[alpha]).ln(), qb * cond));
        }
    }
    let reverse_reflected = ObservableDistribution::from_raw(raw, true).reflected();
    Ok(CrooksReport {
        max_residual: atomwise_residual(&forward_tilted, &reverse_reflected),
        unitality_defect: defect,
        forward_tilted,
        reverse_reflected,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BistochasticityReport {
    /// `sum_alpha p_{beta|alpha}` per outcome of `Q`.
    pub row_sums: Vec<f64>,
    pub max_row_defect: f64,
    pub rows_sum_to_one: bool,
    pub unitality_defect: f64,
    pub unital: bool,
    /// Largest `|p_{beta|alpha} - p~_{alpha|beta}|` with the reverse
    /// transitions taken from the executed reverse protocol.
    pub reverse_transition_residual: f64,
}

pub fn bistochasticity_check(spec: &ProtocolSpec, unitaries: &ReverseUnitaries) -> Result<BistochasticityReport> {
    let tol = tolerance::get();
    let stats = forward_statistics(spec)?;
    let row_sums = stats.transitions.row_sums();
    let max_row_defect = row_sums.iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    let unitality_defect = spec.channel().unitality_defect();
    let run = execute_reverse(spec, unitaries)?;
    let mut worst: f64 = 0.0;
    for alpha in 0..spec.p().len() {
        for beta in 0..spec.q().len() {
            let diff = stats.transitions.get(beta, alpha) - run.transitions[(alpha, beta)];
            worst = worst.max(diff.abs());
        }
    }
    Ok(BistochasticityReport {
        rows_sum_to_one: max_row_defect <= tol.tp,
        max_row_defect,
        row_sums,
        unital: unitality_defect <= tol.tp,
        unitality_defect,
        reverse_transition_residual: worst,
    })
}
