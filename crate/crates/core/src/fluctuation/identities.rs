use serde::Serialize;

use super::{efficacy, forward_pdf, forward_statistics, ProtocolSpec, VChoice};
use crate::channels::{Channel, LinearMap};
use crate::error::{Error, Result};
use crate::linalg::{
    gibbs_state, identity, kl_divergence, max_abs, operator_norm, psd_power, relative_entropy, shannon_entropy,
    trace, trace_log, trace_norm, trace_product, von_neumann_entropy, DensityMatrix, Hermitian, Operator,
};
use crate::measurements::measure_prepare;
use crate::tolerance;

/// `Tr[rho_q^{-lambda} E(rho_p^{lambda+1})]`, the generating function of
/// `ln(p_alpha/q_beta)` for rank-one projective measurements diagonalizing
/// `rho_p` and `rho_q`.
pub fn mgf_projective_closed_form(rho_p: &Operator, rho_q: &Operator, ch: &Channel, lambda: f64) -> Result<f64> {
    let left = psd_power(rho_q, -lambda)?;
    let right = ch.apply(&psd_power(rho_p, lambda + 1.0)?)?;
    Ok(trace_product(&left, &right).re)
}

/// `<v> = H(f||q) + H(f) - H(p)` for `V = ln(p_alpha/q_beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralizedDecomposition {
    pub mean_v: f64,
    pub kl_fq: f64,
    pub h_f: f64,
    pub h_p: f64,
    /// `NaN` when a term is infinite.
    pub residual: f64,
    pub skipped: bool,
}

/// `<v>` for `ln(p_alpha/q_beta)`, `+inf` when an outcome occurs whose
/// reference probability vanishes.
fn mean_v_or_infinity(spec: &ProtocolSpec) -> Result<f64> {
    match forward_pdf(spec, VChoice::LogPQ) {
        Ok(pdf) => Ok(pdf.mean()),
        Err(Error::Domain(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub fn generalized_entropy_identity(spec: &ProtocolSpec) -> Result<GeneralizedDecomposition> {
    let stats = forward_statistics(spec)?;
    let mean_v = mean_v_or_infinity(spec)?;
    let kl_fq = kl_divergence(&stats.marginal, spec.q_dist());
    let h_f = shannon_entropy(&stats.marginal);
    let h_p = shannon_entropy(stats.ensemble.probs());
    let skipped = !kl_fq.is_finite() || !mean_v.is_finite();
    let residual = if skipped { f64::NAN } else { (mean_v - (kl_fq + h_f - h_p)).abs() };
    Ok(GeneralizedDecomposition { mean_v, kl_fq, h_f, h_p, residual, skipped })
}

/// `(2') <= ||E(rho_p) - rho_q||_1 |ln min_beta q_beta|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPrimeBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// The trace term for a thermal reference state `rho_q = e^{-beta H_f}/Z`,
/// where it becomes `-beta Q` with `Q` the heat released when `E(rho_p)`
/// relaxes to `rho_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatTerm {
    /// `Q = Tr[H_f rho_q] - Tr[H_f E(rho_p)]`.
    pub heat: f64,
    pub minus_beta_heat: f64,
    /// `|(2') + beta Q|`.
    pub residual: f64,
    /// Max-abs distance between `rho_q` and the Gibbs state of `H_f`.
    pub gibbs_residual: f64,
}

/// Both triangle decompositions of `<v>` for rank-one projective
/// measurements:
/// `(1) + (2) = S(E(rho_p)) - S(rho_p) + S(E(rho_p)||rho_q)` and
/// `(3) + (2') = S(rho_q) - S(rho_p) + Tr[(rho_q - E(rho_p)) ln rho_q]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectiveDecomposition {
    pub mean_v: f64,
    pub entropy_change: f64,
    pub distance: f64,
    pub residual_a: f64,
    pub virtual_entropy_change: f64,
    pub trace_term: f64,
    pub residual_b: f64,
    pub bound: TwoPrimeBound,
    pub heat: Option<HeatTerm>,
    /// Set when a relative entropy or logarithm is infinite; residuals are
    /// then `NaN`.
    pub skipped: bool,
}

pub fn projective_entropy_identity(
    spec: &ProtocolSpec,
    thermal: Option<(f64, &Hermitian)>,
) -> Result<ProjectiveDecomposition> {
    let tol = tolerance::get();
    if !spec.p().is_rank_one_projective(tol.meas) || !spec.q().is_rank_one_projective(tol.meas) {
        return Err(Error::validation("projective decomposition needs rank-one projective P and Q"));
    }
    let mean_v = mean_v_or_infinity(spec)?;
    let rho_p = DensityMatrix::new(measure_prepare(spec.p(), spec.rho())?.mixture())?;
    let rho_q = DensityMatrix::new(spec.rho_q())?;
    let evolved = DensityMatrix::new(spec.channel().apply(&rho_p)?)?;
    let s_p = von_neumann_entropy(&rho_p);
    let s_e = von_neumann_entropy(&evolved);
    let s_q = von_neumann_entropy(&rho_q);

    let entropy_change = s_e - s_p;
    let distance = relative_entropy(&evolved, &rho_q);
    let virtual_entropy_change = s_q - s_p;
    let trace_term = trace_log(&rho_q, &rho_q) - trace_log(&evolved, &rho_q);
    let skipped = !distance.is_finite() || !trace_term.is_finite() || !mean_v.is_finite();
    let (residual_a, residual_b) = if skipped {
        (f64::NAN, f64::NAN)
    } else {
        (
            (mean_v - entropy_change - distance).abs(),
            (mean_v - virtual_entropy_change - trace_term).abs(),
        )
    };

    let min_q = spec.q_dist().iter().copied().fold(f64::INFINITY, f64::min);
    let rhs = trace_norm(&(evolved.as_op() - rho_q.as_op())) * min_q.ln().abs();
    let bound = TwoPrimeBound { lhs: trace_term, rhs, holds: trace_term <= rhs + 1e-12 };

    let heat = match thermal {
        Some((beta, h_f)) => {
            let heat = trace_product(h_f, &rho_q).re - trace_product(h_f, &evolved).re;
            let gibbs = gibbs_state(h_f, beta)?;
            Some(HeatTerm {
                heat,
                minus_beta_heat: -beta * heat,
                residual: (trace_term + beta * heat).abs(),
                gibbs_residual: max_abs(&(gibbs.as_op() - rho_q.as_op())),
            })
        }
        None => None,
    };

    Ok(ProjectiveDecomposition {
        mean_v,
        entropy_change,
        distance,
        residual_a,
        virtual_entropy_change,
        trace_term,
        residual_b,
        bound,
        heat,
        skipped,
    })
}

/// `<v> >= -ln gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondLaw {
    pub mean_v: f64,
    pub minus_ln_gamma: f64,
    /// `<v> + ln gamma`, non-negative up to rounding.
    pub margin: f64,
}

pub fn second_law_check(spec: &ProtocolSpec) -> Result<SecondLaw> {
    let mean_v = forward_pdf(spec, VChoice::LogPQ)?.mean();
    let minus_ln_gamma = -efficacy(spec)?.value().ln();
    Ok(SecondLaw { mean_v, minus_ln_gamma, margin: mean_v - minus_ln_gamma })
}

/// `0 <= gamma <= d min{||rho_q||, ||E(1/d)||} <= d` in operator norm, with
/// `gamma = Tr[rho_q E(1)]`. Requires `Tr[rho_q] = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBound {
    pub gamma: f64,
    pub rho_q_norm: f64,
    pub evolved_mixed_norm: f64,
    pub bound: f64,
    pub dim: usize,
    pub holds: bool,
}

pub fn gamma_bound(spec: &ProtocolSpec) -> Result<GammaBound> {
    let d = spec.dim();
    let rho_q = spec.rho_q();
    let tr = trace(&rho_q).re;
    if (tr - 1.0).abs() > tolerance::get().meas {
        return Err(Error::validation(format!(
            "the bound needs a normalized virtual final state, Tr[rho_q] = {tr}"
        )));
    }
    let image = spec.channel().apply(&identity(d))?;
    let gamma = trace(&(&rho_q * &image)).re;
    let rho_q_norm = operator_norm(&rho_q);
    let evolved_mixed_norm = operator_norm(&image) / d as f64;
    let bound = d as f64 * rho_q_norm.min(evolved_mixed_norm);
    let slack = 1e-12 * d as f64;
    Ok(GammaBound {
        gamma,
        rho_q_norm,
        evolved_mixed_norm,
        bound,
        dim: d,
        holds: gamma >= -slack && gamma <= bound + slack && bound <= d as f64 + slack,
    })
}
