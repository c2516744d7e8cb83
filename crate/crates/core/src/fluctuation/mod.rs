//! Statistics of measure-evolve-measure protocols.
//!
//! A protocol measures `rho` with `P`, sends each post-measurement state
//! through a channel and measures the result with `Q`. Pairs of outcomes
//! `(alpha, beta)` carry an observable `V`, and the module computes its
//! distribution, the reverse pseudo-distribution built from the dual map,
//! the efficacy `gamma`, generating functions and entropy identities.

mod distribution;
mod identities;
mod reverse;

pub use distribution::{atomwise_residual, Atom, ObservableDistribution};
pub use identities::{
    gamma_bound, generalized_entropy_identity, mgf_projective_closed_form, projective_entropy_identity,
    second_law_check, GammaBound, GeneralizedDecomposition, HeatTerm, ProjectiveDecomposition, SecondLaw,
    TwoPrimeBound,
};
pub use reverse::{
    bistochasticity_check, crooks_check, execute_reverse, BistochasticityReport, CrooksReport, ReverseRun,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channels::{Channel, LinearMap};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{identity, max_abs, trace_product, DensityMatrix, Operator};
use crate::measurements::{measure_prepare, Measurement, PreparedEnsemble};
use crate::tolerance;

/// The data `(rho, P, E, Q, q)` of a protocol.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    rho: DensityMatrix,
    p: Measurement,
    channel: Channel,
    q: Measurement,
    q_dist: Vec<f64>,
}

impl ProtocolSpec {
    /// `q_dist` must be a probability vector over the outcomes of `q`. Zero
    /// entries are accepted here and rejected later only where an
    /// observable needs their logarithm.
    pub fn new(rho: DensityMatrix, p: Measurement, channel: Channel, q: Measurement, q_dist: Vec<f64>) -> Result<Self> {
        let d = rho.dim();
        check_dim(d, p.dim())?;
        check_dim(d, channel.dim())?;
        check_dim(d, q.dim())?;
        if q_dist.len() != q.len() {
            return Err(Error::validation(format!(
                "reference distribution has {} entries, Q has {} outcomes",
                q_dist.len(),
                q.len()
            )));
        }
        if let Some((k, x)) = q_dist.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::validation(format!("reference probability q[{k}] = {x} is not a probability")));
        }
        let sum: f64 = q_dist.iter().sum();
        if (sum - 1.0).abs() > tolerance::get().trace {
            return Err(Error::validation(format!("reference probabilities sum to {sum}")));
        }
        Ok(ProtocolSpec { rho, p, channel, q, q_dist })
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn p(&self) -> &Measurement {
        &self.p
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn q(&self) -> &Measurement {
        &self.q
    }

    pub fn q_dist(&self) -> &[f64] {
        &self.q_dist
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// Same protocol with another channel.
    pub fn with_channel(&self, channel: Channel) -> Result<Self> {
        ProtocolSpec::new(self.rho.clone(), self.p.clone(), channel, self.q.clone(), self.q_dist.clone())
    }

    /// `rho_q = sum_beta q_beta Q_beta^dagger Q_beta`.
    pub fn rho_q(&self) -> Operator {
        let d = self.dim();
        self.q
            .effects()
            .iter()
            .zip(&self.q_dist)
            .fold(Operator::zeros(d, d), |acc, (e, &w)| acc + e.scale(w))
    }
}

/// `p_{beta|alpha}`, rows indexed by `beta` and columns by `alpha`. Columns
/// of outcomes of `P` that cannot occur are zero and flagged unsupported.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
    supported: Vec<bool>,
}

impl TransitionMatrix {
    pub(crate) fn from_parts(entries: DMatrix<f64>, supported: Vec<bool>) -> Self {
        TransitionMatrix { entries, supported }
    }

    pub fn get(&self, beta: usize, alpha: usize) -> f64 {
        self.entries[(beta, alpha)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_supported(&self, alpha: usize) -> bool {
        self.supported[alpha]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// Largest `|sum_beta p_{beta|alpha} - 1|` over supported columns.
    pub fn stochasticity_residual(&self) -> f64 {
        self.column_sums()
            .iter()
            .zip(&self.supported)
            .filter(|(_, &s)| s)
            .fold(0.0, |m, (c, _)| m.max((c - 1.0).abs()))
    }
}

/// Which observable is attached to an outcome pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VChoice {
    /// `ln(p_alpha / q_beta)`.
    LogPQ,
    /// `ln(p_{beta|alpha} / q_beta)`.
    LogCondQ,
    /// `ln(p_{beta|alpha} / f_beta)`.
    LogCondF,
}

#[derive(Debug, Clone)]
pub struct ForwardStatistics {
    pub ensemble: PreparedEnsemble,
    pub transitions: TransitionMatrix,
    /// `f_beta = sum_alpha p_alpha p_{beta|alpha}`.
    pub marginal: Vec<f64>,
}

impl ForwardStatistics {
    /// `p_{(alpha,beta)} = p_alpha p_{beta|alpha}`.
    pub fn joint(&self, alpha: usize, beta: usize) -> f64 {
        self.ensemble.probs()[alpha] * self.transitions.get(beta, alpha)
    }
}

pub fn forward_statistics(spec: &ProtocolSpec) -> Result<ForwardStatistics> {
    let ensemble = measure_prepare(&spec.p, &spec.rho)?;
    let effects = spec.q.effects();
    let (nq, np) = (spec.q.len(), spec.p.len());
    let mut entries = DMatrix::zeros(nq, np);
    let mut supported = vec![false; np];
    for alpha in ensemble.support() {
        supported[alpha] = true;
        let evolved = spec.channel.apply(ensemble.state(alpha).unwrap())?;
        for (beta, e) in effects.iter().enumerate() {
            entries[(beta, alpha)] = trace_product(e, &evolved).re.max(0.0);
        }
    }
    let marginal = (0..nq)
        .map(|beta| (0..np).map(|alpha| ensemble.probs()[alpha] * entries[(beta, alpha)]).sum())
        .collect();
    Ok(ForwardStatistics {
        ensemble,
        transitions: TransitionMatrix { entries, supported },
        marginal,
    })
}

/// `f_beta = Tr[Q_beta^dagger Q_beta E(rho_p)]` straight from the mixture of
/// post-measurement states.
pub fn marginal_closed_form(spec: &ProtocolSpec) -> Result<Vec<f64>> {
    let ens = measure_prepare(&spec.p, &spec.rho)?;
    let evolved = spec.channel.apply(&ens.mixture())?;
    spec.q.probabilities_of(&evolved)
}

/// An outcome pair on the support of the forward process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAtom {
    pub alpha: usize,
    pub beta: usize,
    pub v: f64,
    /// `p_{(alpha,beta)}`.
    pub joint: f64,
}

fn log_ref(q: &[f64], beta: usize, alpha: usize) -> Result<f64> {
    if q[beta] > 0.0 {
        Ok(q[beta].ln())
    } else {
        Err(Error::domain(format!(
            "outcome pair ({alpha}, {beta}) occurs but reference probability q[{beta}] is zero"
        )))
    }
}

/// Supported pairs and their observable values. A pair is supported when
/// `p_alpha` and `p_{beta|alpha}` exceed `p_floor`.
pub fn pair_atoms(spec: &ProtocolSpec, stats: &ForwardStatistics, choice: VChoice) -> Result<Vec<PairAtom>> {
    let floor = tolerance::get().p_floor;
    let probs = stats.ensemble.probs();
    let mut out = Vec::new();
    for alpha in stats.ensemble.support() {
        for beta in 0..spec.q.len() {
            let cond = stats.transitions.get(beta, alpha);
            if cond <= floor {
                continue;
            }
            let v = match choice {
                VChoice::LogPQ => probs[alpha].ln() - log_ref(&spec.q_dist, beta, alpha)?,
                VChoice::LogCondQ => cond.ln() - log_ref(&spec.q_dist, beta, alpha)?,
                VChoice::LogCondF => cond.ln() - stats.marginal[beta].ln(),
            };
            out.push(PairAtom { alpha, beta, v, joint: probs[alpha] * cond });
        }
    }
    Ok(out)
}

/// Distribution of `V` under the forward protocol.
pub fn forward_pdf(spec: &ProtocolSpec, choice: VChoice) -> Result<ObservableDistribution> {
    let stats = forward_statistics(spec)?;
    let pairs = pair_atoms(spec, &stats, choice)?;
    Ok(ObservableDistribution::from_raw(pairs.iter().map(|a| (a.v, a.joint)), true))
}

/// Reverse pseudo-distribution `F_{E*}`: atoms at `-V`.
///
/// For `LogPQ` the weight of a pair is `q_beta Tr[rho_alpha E*(Q_beta^dagger
/// Q_beta)]`, evaluated with the dual map. `LogCondQ` and `LogCondF` use
/// `p_alpha q_beta` and `p_alpha f_beta`.
pub fn reverse_quantity(spec: &ProtocolSpec, choice: VChoice) -> Result<ObservableDistribution> {
    let stats = forward_statistics(spec)?;
    let pairs = pair_atoms(spec, &stats, choice)?;
    let probs = stats.ensemble.probs();
    let dual = spec.channel.dual();
    let pulled_back: Vec<Operator> = match choice {
        VChoice::LogPQ => spec
            .q
            .effects()
            .iter()
            .map(|e| dual.apply(e))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let raw = pairs.iter().map(|a| {
        let w = match choice {
            VChoice::LogPQ => {
                let rho_a = stats.ensemble.state(a.alpha).unwrap();
                spec.q_dist[a.beta] * trace_product(rho_a, &pulled_back[a.beta]).re
            }
            VChoice::LogCondQ => probs[a.alpha] * spec.q_dist[a.beta],
            VChoice::LogCondF => probs[a.alpha] * stats.marginal[a.beta],
        };
        (-a.v, w)
    });
    Ok(ObservableDistribution::from_raw(raw.collect::<Vec<_>>(), false))
}

/// The two evaluations of the efficacy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Efficacy {
    /// `sum_{alpha,beta} q_beta Tr[rho_alpha E*(Q_beta^dagger Q_beta)]`.
    pub double_sum: f64,
    /// `Tr[E*(rho_q)]`, present when the post-measurement states of `P`
    /// sum to the identity for this `rho`.
    pub closed_form: Option<f64>,
}

impl Efficacy {
    pub fn value(&self) -> f64 {
        self.double_sum
    }

    /// Disagreement of the two routes, zero when only one applies.
    pub fn residual(&self) -> f64 {
        self.closed_form.map_or(0.0, |c| (c - self.double_sum).abs())
    }
}

pub fn efficacy(spec: &ProtocolSpec) -> Result<Efficacy> {
    let ens = measure_prepare(&spec.p, &spec.rho)?;
    let dual = spec.channel.dual();
    let d = spec.dim();
    let mut double_sum = 0.0;
    let pulled: Vec<Operator> = spec
        .q
        .effects()
        .iter()
        .map(|e| dual.apply(e))
        .collect::<Result<_>>()?;
    for alpha in ens.support() {
        let rho_a = ens.state(alpha).unwrap();
        for (beta, pb) in pulled.iter().enumerate() {
            double_sum += spec.q_dist[beta] * trace_product(rho_a, pb).re;
        }
    }
    let closed_form = if max_abs(&(ens.state_sum() - identity(d))) <= tolerance::get().meas {
        Some(crate::linalg::trace(&dual.apply(&spec.rho_q())?).re)
    } else {
        None
    };
    Ok(Efficacy { double_sum, closed_form })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JarzynskiReport {
    /// `<e^{-v}>` from the forward distribution.
    pub lhs: f64,
    /// `gamma` for `LogPQ`, one otherwise.
    pub rhs: f64,
    pub residual: f64,
}

pub fn jarzynski_check(spec: &ProtocolSpec, choice: VChoice) -> Result<JarzynskiReport> {
    let lhs = forward_pdf(spec, choice)?.mgf(-1.0);
    let rhs = match choice {
        VChoice::LogPQ => efficacy(spec)?.value(),
        VChoice::LogCondQ | VChoice::LogCondF => 1.0,
    };
    Ok(JarzynskiReport { lhs, rhs, residual: (lhs - rhs).abs() })
}

#[cfg(test)]
mod tests;
