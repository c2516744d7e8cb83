//! Protocols with an intermediate measurement and outcome-dependent control.
//!
//! The state prepared by `P` evolves under a channel, is measured with
//! `Q = {Q_j}`, and the recorded label `k` selects a CP map `E_k` and a final
//! projective measurement `{Q_{beta|k}}`. Without measurement error the
//! recorded label is the outcome, `k = j`. With a classical error model the
//! label is `k` with probability `c_{k|j}`, so the branch map is
//! `E_k(X) = sum_j c_{k|j} E_k(Q_j E(X) Q_j^dagger)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::channels::{Channel, CpMap, LinearMap};
use crate::error::{check_dim, Error, Result};
use crate::fluctuation::ObservableDistribution;
use crate::linalg::{identity, max_abs, psd_power, trace, trace_product, DensityMatrix, Operator};
use crate::measurements::{measure_prepare, Measurement};
use crate::tolerance;

/// Column-stochastic confusion matrix `c_{k|j}`: rows are recorded labels,
/// columns are true outcomes of the intermediate measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    confusion: DMatrix<f64>,
}

impl ErrorModel {
    pub fn new(confusion: DMatrix<f64>) -> Result<Self> {
        let tol = tolerance::get().trace;
        if confusion.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::validation("confusion matrix entries must be non-negative"));
        }
        for (j, col) in confusion.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::validation(format!("confusion column {j} sums to {s}")));
            }
        }
        Ok(ErrorModel { confusion })
    }

    /// No errors: `c_{k|j} = delta_{kj}`.
    pub fn exact(n: usize) -> Self {
        ErrorModel { confusion: DMatrix::identity(n, n) }
    }

    /// Binary-symmetric-style error: each outcome is kept with probability
    /// `1 - eps` and replaced by a uniformly chosen other label otherwise.
    pub fn symmetric(n: usize, eps: f64) -> Result<Self> {
        let off = if n > 1 { eps / (n - 1) as f64 } else { 0.0 };
        Self::new(DMatrix::from_fn(n, n, |k, j| if k == j { 1.0 - eps } else { off }))
    }

    pub fn confusion(&self) -> &DMatrix<f64> {
        &self.confusion
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.confusion[(k, j)]
    }

    pub fn labels(&self) -> usize {
        self.confusion.nrows()
    }

    pub fn outcomes(&self) -> usize {
        self.confusion.ncols()
    }

    /// `p_k = sum_j c_{k|j} p_j`.
    pub fn marginal(&self, p_true: &[f64]) -> Vec<f64> {
        (0..self.labels())
            .map(|k| (0..self.outcomes()).map(|j| self.get(k, j) * p_true[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FeedbackProtocolSpec {
    rho: DensityMatrix,
    p: Measurement,
    pre_channel: Channel,
    mid: Measurement,
    branch_maps: Vec<CpMap>,
    finals: Vec<Measurement>,
    q_cond: Vec<Vec<f64>>,
    errors: ErrorModel,
}

impl FeedbackProtocolSpec {
    /// `branch_maps`, `finals` and `q_cond` are indexed by the recorded
    /// label. Without an error model there is one label per outcome of
    /// `mid`. The branch maps may be trace decreasing individually, but the
    /// whole instrument `sum_k E_k` must be trace preserving.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho: DensityMatrix,
        p: Measurement,
        pre_channel: Channel,
        mid: Measurement,
        branch_maps: Vec<CpMap>,
        finals: Vec<Measurement>,
        q_cond: Vec<Vec<f64>>,
        errors: Option<ErrorModel>,
    ) -> Result<Self> {
        let d = rho.dim();
        check_dim(d, p.dim())?;
        check_dim(d, pre_channel.dim())?;
        check_dim(d, mid.dim())?;
        let errors = errors.unwrap_or_else(|| ErrorModel::exact(mid.len()));
        check_dim(mid.len(), errors.outcomes())?;
        let labels = errors.labels();
        if branch_maps.len() != labels || finals.len() != labels || q_cond.len() != labels {
            return Err(Error::validation(format!(
                "{labels} feedback labels but {} branch maps, {} final measurements, {} distributions",
                branch_maps.len(),
                finals.len(),
                q_cond.len()
            )));
        }
        let tol = tolerance::get();
        for k in 0..labels {
            check_dim(d, branch_maps[k].dim())?;
            check_dim(d, finals[k].dim())?;
            if q_cond[k].len() != finals[k].len() {
                return Err(Error::validation(format!(
                    "branch {k}: {} probabilities for {} outcomes",
                    q_cond[k].len(),
                    finals[k].len()
                )));
            }
            if q_cond[k].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::validation(format!("branch {k}: reference probabilities must be non-negative")));
            }
            let s: f64 = q_cond[k].iter().sum();
            if (s - 1.0).abs() > tol.trace {
                return Err(Error::validation(format!("branch {k}: reference probabilities sum to {s}")));
            }
        }
        let spec = FeedbackProtocolSpec { rho, p, pre_channel, mid, branch_maps, finals, q_cond, errors };
        let total = spec
            .branch_channels()
            .iter()
            .fold(Operator::zeros(d, d), |acc, m| acc + crate::channels::kraus_completeness(m.kraus()));
        let r = max_abs(&(total - identity(d)));
        if r > tol.tp {
            return Err(Error::validation(format!(
                "feedback instrument is not trace preserving: |sum_k E_k*(1) - 1| = {r:.3e}"
            )));
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn labels(&self) -> usize {
        self.errors.labels()
    }

    pub fn error_model(&self) -> &ErrorModel {
        &self.errors
    }

    /// `E_k(Q_j E(.) Q_j^dagger)` without the confusion weight.
    pub fn path_map(&self, k: usize, j: usize) -> CpMap {
        let mut kraus = Vec::new();
        let qj = self.mid.op(j);
        for b in self.branch_maps[k].kraus() {
            for a in self.pre_channel.kraus() {
                kraus.push(b * qj * a);
            }
        }
        CpMap::from_kraus(kraus, true).expect("products of valid Kraus operators")
    }

    /// The CP map `E_k` attached to each recorded label.
    pub fn branch_channels(&self) -> Vec<CpMap> {
        (0..self.labels())
            .map(|k| {
                let mut kraus = Vec::new();
                for j in 0..self.mid.len() {
                    let c = self.errors.get(k, j);
                    if c > 0.0 {
                        kraus.extend(self.path_map(k, j).kraus().iter().map(|a| a.scale(c.sqrt())));
                    }
                }
                if kraus.is_empty() {
                    kraus.push(Operator::zeros(self.dim(), self.dim()));
                }
                CpMap::from_kraus(kraus, true).expect("valid Kraus operators")
            })
            .collect()
    }

    /// `rho_{q|k} = sum_beta q_{beta|k} Q_{beta|k}^dagger Q_{beta|k}`.
    pub fn rho_q(&self, k: usize) -> Operator {
        let d = self.dim();
        self.finals[k]
            .effects()
            .iter()
            .zip(&self.q_cond[k])
            .fold(Operator::zeros(d, d), |acc, (e, &w)| acc + e.scale(w))
    }

    /// `rho_p = sum_alpha p_alpha rho_alpha`.
    pub fn rho_p(&self) -> Result<Operator> {
        Ok(measure_prepare(&self.p, &self.rho)?.mixture())
    }

    /// Probabilities of the true intermediate outcomes.
    pub fn mid_probabilities(&self) -> Result<Vec<f64>> {
        let evolved = self.pre_channel.apply(&self.rho_p()?)?;
        self.mid.probabilities_of(&evolved)
    }
}

/// One supported `(alpha, k, beta)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackAtom {
    pub alpha: usize,
    pub label: usize,
    pub beta: usize,
    /// `ln(p_alpha / q_{beta|k})`.
    pub v: f64,
    pub joint: f64,
    /// `q_{beta|k} Tr[rho_alpha E_k*(Q_{beta|k}^dagger Q_{beta|k})]`.
    pub reverse_weight: f64,
}

fn log_q(spec: &FeedbackProtocolSpec, k: usize, beta: usize, alpha: usize) -> Result<f64> {
    let q = spec.q_cond[k][beta];
    if q > 0.0 {
        Ok(q.ln())
    } else {
        Err(Error::domain(format!(
            "outcome ({alpha}, {k}, {beta}) occurs but q[{beta}|{k}] is zero"
        )))
    }
}

pub fn feedback_atoms(spec: &FeedbackProtocolSpec) -> Result<Vec<FeedbackAtom>> {
    let floor = tolerance::get().p_floor;
    let ens = measure_prepare(&spec.p, &spec.rho)?;
    let branches = spec.branch_channels();
    let mut out = Vec::new();
    for (k, map) in branches.iter().enumerate() {
        let effects = spec.finals[k].effects();
        let pulled: Vec<Operator> = effects.iter().map(|e| map.apply_dual(e)).collect::<Result<_>>()?;
        for alpha in ens.support() {
            let rho_a = ens.state(alpha).unwrap();
            let evolved = map.apply(rho_a)?;
            for (beta, e) in effects.iter().enumerate() {
                let cond = trace_product(e, &evolved).re.max(0.0);
                if cond <= floor {
                    continue;
                }
                let p_a = ens.probs()[alpha];
                out.push(FeedbackAtom {
                    alpha,
                    label: k,
                    beta,
                    v: p_a.ln() - log_q(spec, k, beta, alpha)?,
                    joint: p_a * cond,
                    reverse_weight: spec.q_cond[k][beta] * trace_product(rho_a, &pulled[beta]).re,
                });
            }
        }
    }
    Ok(out)
}

/// Distribution of `ln(p_alpha / q_{beta|k})` over `(alpha, k, beta)`.
pub fn feedback_forward_pdf(spec: &FeedbackProtocolSpec) -> Result<ObservableDistribution> {
    let atoms = feedback_atoms(spec)?;
    Ok(ObservableDistribution::from_raw(atoms.iter().map(|a| (a.v, a.joint)), true))
}

/// Pseudo-distribution built from the dual branch maps, atoms at `-V`.
pub fn feedback_reverse_quantity(spec: &FeedbackProtocolSpec) -> Result<ObservableDistribution> {
    let atoms = feedback_atoms(spec)?;
    Ok(ObservableDistribution::from_raw(atoms.iter().map(|a| (-a.v, a.reverse_weight)), false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackEfficacy {
    /// `sum_k Tr[E_k*(rho_{q|k})]`.
    pub dual_form: f64,
    /// `sum_k Tr[rho_{q|k} E_k(1)]`.
    pub identity_form: f64,
}

pub fn feedback_efficacy(spec: &FeedbackProtocolSpec) -> Result<FeedbackEfficacy> {
    let d = spec.dim();
    let mut dual_form = 0.0;
    let mut identity_form = 0.0;
    for (k, map) in spec.branch_channels().iter().enumerate() {
        let rq = spec.rho_q(k);
        dual_form += trace(&map.apply_dual(&rq)?).re;
        identity_form += trace_product(&rq, &map.apply(&identity(d))?).re;
    }
    Ok(FeedbackEfficacy { dual_form, identity_form })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackMgf {
    /// `chi_E(lambda - 1)` summed over forward atoms.
    pub atom_sum: f64,
    /// `sum_k Tr[rho_{q|k}^{1-lambda} E_k(rho_p^lambda)]`.
    pub trace_form: f64,
    /// `chi~_{E*}(-lambda)` summed over reverse atoms.
    pub reverse_sum: f64,
}

impl FeedbackMgf {
    /// Largest pairwise relative disagreement.
    pub fn relative_residual(&self) -> f64 {
        let xs = [self.atom_sum, self.trace_form, self.reverse_sum];
        let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                worst = worst.max((xs[i] - xs[j]).abs());
            }
        }
        worst / scale
    }
}

pub fn feedback_mgf_identity(spec: &FeedbackProtocolSpec, lambda: f64) -> Result<FeedbackMgf> {
    let atom_sum = feedback_forward_pdf(spec)?.mgf(lambda - 1.0);
    let reverse_sum = feedback_reverse_quantity(spec)?.mgf(-lambda);
    let rp = psd_power(&spec.rho_p()?, lambda)?;
    let mut trace_form = 0.0;
    for (k, map) in spec.branch_channels().iter().enumerate() {
        let rq = psd_power(&spec.rho_q(k), 1.0 - lambda)?;
        trace_form += trace_product(&rq, &map.apply(&rp)?).re;
    }
    Ok(FeedbackMgf { atom_sum, trace_form, reverse_sum })
}

#[derive(Debug, Clone)]
pub struct MutualInformationReport {
    /// Distribution of `ln(p_alpha/q_{beta|k}) + ln(c_{k|j}/p_k)`.
    pub pdf: ObservableDistribution,
    /// `<e^{-v}>`.
    pub integral: f64,
    /// `Tr[(sum_alpha rho_alpha) E^(rho_hat)]` with
    /// `E^(X) = E*(sum_j Q_j^dagger X Q_j)`: the same sum extended to
    /// outcome-label pairs that never occur. It equals `integral` when every
    /// `c_{k|j}` is positive.
    pub formal_integral: f64,
    /// Mean of `ln(c_{k|j}/p_k)`, the classical mutual information between
    /// the outcome and the recorded label.
    pub mutual_information: f64,
    /// `sum_{k,beta} p_k q_{beta|k} E_k*(Q_{beta|k})`, when it is a density
    /// matrix.
    pub rho_hat: Option<DensityMatrix>,
}

pub fn mutual_info_observable_pdf(spec: &FeedbackProtocolSpec) -> Result<MutualInformationReport> {
    let floor = tolerance::get().p_floor;
    let ens = measure_prepare(&spec.p, &spec.rho)?;
    let p_true = spec.mid_probabilities()?;
    let p_label = spec.errors.marginal(&p_true);
    let mut raw = Vec::new();
    let mut mi = 0.0;
    for k in 0..spec.labels() {
        let effects = spec.finals[k].effects();
        for j in 0..spec.mid.len() {
            let c = spec.errors.get(k, j);
            if c <= 0.0 {
                continue;
            }
            if p_label[k] <= 0.0 {
                return Err(Error::domain(format!("label {k} is reachable but has zero marginal probability")));
            }
            let info = (c / p_label[k]).ln();
            let path = spec.path_map(k, j);
            for alpha in ens.support() {
                let evolved = path.apply(ens.state(alpha).unwrap())?;
                for (beta, e) in effects.iter().enumerate() {
                    let cond = trace_product(e, &evolved).re.max(0.0);
                    if cond <= floor {
                        continue;
                    }
                    let p_a = ens.probs()[alpha];
                    let joint = p_a * c * cond;
                    let v = p_a.ln() - log_q(spec, k, beta, alpha)? + info;
                    raw.push((v, joint));
                    mi += joint * info;
                }
            }
        }
    }
    let pdf = ObservableDistribution::from_raw(raw, true);
    let d = spec.dim();
    let mut hat = Operator::zeros(d, d);
    for (k, b) in spec.branch_maps.iter().enumerate() {
        hat += b.apply_dual(&spec.rho_q(k))?.scale(p_label[k]);
    }
    let mut folded = Operator::zeros(d, d);
    for q in spec.mid.ops() {
        folded += q.adjoint() * &hat * q;
    }
    let pulled = spec.pre_channel.dual().apply(&folded)?;
    let formal_integral = trace_product(&ens.state_sum(), &pulled).re;
    Ok(MutualInformationReport {
        integral: pdf.mgf(-1.0),
        formal_integral,
        pdf,
        mutual_information: mi,
        rho_hat: DensityMatrix::new(hat).ok(),
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fluctuation::{atomwise_residual, efficacy, forward_pdf, ProtocolSpec, VChoice};
    use crate::linalg::{boltzmann_weights, eig_hermitian, gibbs_state, Hermitian};
    use crate::measurements::projective_from_hamiltonian;
    use crate::random::{
        haar_unitary, random_channel, random_density, random_hermitian, random_probabilities, random_projective,
    };

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn unitary_map(u: &Operator) -> CpMap {
        CpMap::from_kraus(vec![u.clone()], false).unwrap()
    }

    /// Unitary evolution `U`, projective mid-measurement, unitary feedback
    /// `U_k` and thermal references for random final Hamiltonians.
    struct UnitaryFeedback {
        spec: FeedbackProtocolSpec,
        mid: Measurement,
        feedback: Vec<Operator>,
        rho_q: Vec<Operator>,
    }

    fn unitary_feedback(r: &mut ChaCha8Rng, d: usize, errors: Option<ErrorModel>) -> UnitaryFeedback {
        let beta = 0.9;
        let hi = random_hermitian(r, d);
        let u = haar_unitary(r, d);
        let mid = random_projective(r, d);
        let labels = errors.as_ref().map_or(d, |e| e.labels());
        let feedback: Vec<Operator> = (0..labels).map(|_| haar_unitary(r, d)).collect();
        let hfs: Vec<Hermitian> = (0..labels).map(|_| random_hermitian(r, d)).collect();
        let finals: Vec<Measurement> = hfs.iter().map(projective_from_hamiltonian).collect();
        let q_cond: Vec<Vec<f64>> = hfs
            .iter()
            .map(|h| boltzmann_weights(eig_hermitian(h).values(), beta))
            .collect();
        let rho_q = hfs.iter().map(|h| gibbs_state(h, beta).unwrap().into_inner()).collect();
        let spec = FeedbackProtocolSpec::new(
            gibbs_state(&hi, beta).unwrap(),
            projective_from_hamiltonian(&hi),
            Channel::unitary(u).unwrap(),
            mid.clone(),
            feedback.iter().map(unitary_map).collect(),
            finals,
            q_cond,
            errors,
        )
        .unwrap();
        UnitaryFeedback { spec, mid, feedback, rho_q }
    }

    #[test]
    fn trivial_feedback_reduces_to_plain_protocol() {
        let mut r = rng(1);
        let d = 3;
        let rho = random_density(&mut r, d);
        let p = random_projective(&mut r, d);
        let ch = random_channel(&mut r, d, 2);
        let q = random_projective(&mut r, d);
        let q_dist = random_probabilities(&mut r, d);
        let plain = ProtocolSpec::new(rho.clone(), p.clone(), ch.clone(), q.clone(), q_dist.clone()).unwrap();
        let fb = FeedbackProtocolSpec::new(
            rho,
            p,
            ch,
            Measurement::new(vec![identity(d)], None).unwrap(),
            vec![CpMap::from_kraus(vec![identity(d)], false).unwrap()],
            vec![q],
            vec![q_dist],
            None,
        )
        .unwrap();
        let a = feedback_forward_pdf(&fb).unwrap();
        let b = forward_pdf(&plain, VChoice::LogPQ).unwrap();
        assert!(atomwise_residual(&a, &b) < 1e-12);
        assert!((a.mean() - b.mean()).abs() < 1e-12);
        let g = feedback_efficacy(&fb).unwrap();
        assert!((g.dual_form - efficacy(&plain).unwrap().value()).abs() < 1e-12);
    }

    #[test]
    fn identity_branches_have_unit_efficacy() {
        let mut r = rng(2);
        let d = 2;
        let q = random_projective(&mut r, d);
        let q_dist = random_probabilities(&mut r, d);
        let fb = FeedbackProtocolSpec::new(
            random_density(&mut r, d),
            random_projective(&mut r, d),
            Channel::identity(d),
            random_projective(&mut r, d),
            vec![CpMap::from_kraus(vec![identity(d)], false).unwrap(); 2],
            vec![q.clone(), q],
            vec![q_dist.clone(), q_dist],
            None,
        )
        .unwrap();
        let g = feedback_efficacy(&fb).unwrap();
        assert!((g.dual_form - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_free_unitary_feedback_matches_closed_form() {
        let mut r = rng(3);
        for d in 2..=4 {
            let t = unitary_feedback(&mut r, d, None);
            let mut expected = 0.0;
            for j in 0..d {
                let qj = t.mid.op(j);
                let uj = &t.feedback[j];
                expected += trace(&(qj * uj.adjoint() * &t.rho_q[j] * uj * qj)).re;
            }
            let g = feedback_efficacy(&t.spec).unwrap();
            assert!((g.dual_form - expected).abs() < 1e-10);
            assert!((g.identity_form - expected).abs() < 1e-10);
            let lhs = feedback_forward_pdf(&t.spec).unwrap().mgf(-1.0);
            assert!((lhs - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn classical_error_feedback_matches_closed_form() {
        let mut r = rng(4);
        let d = 3;
        let errs = ErrorModel::symmetric(d, 0.15).unwrap();
        let t = unitary_feedback(&mut r, d, Some(errs.clone()));
        let mut expected = 0.0;
        for j in 0..d {
            for k in 0..d {
                let qj = t.mid.op(j);
                let uk = &t.feedback[k];
                expected += errs.get(k, j) * trace(&(qj * uk.adjoint() * &t.rho_q[k] * uk * qj)).re;
            }
        }
        let g = feedback_efficacy(&t.spec).unwrap();
        assert!((g.dual_form - expected).abs() < 1e-10);
        assert!((feedback_forward_pdf(&t.spec).unwrap().mgf(-1.0) - expected).abs() < 1e-10);
    }

    #[test]
    fn atom_weights_match_triple_sum_oracle() {
        let mut r = rng(5);
        let d = 2;
        let rho = random_density(&mut r, d);
        let p = random_projective(&mut r, d);
        let pre = random_channel(&mut r, d, 2);
        let mid = random_projective(&mut r, d);
        let branches: Vec<CpMap> = (0..2).map(|_| unitary_map(&haar_unitary(&mut r, d))).collect();
        let finals: Vec<Measurement> = (0..2).map(|_| random_projective(&mut r, d)).collect();
        let q_cond: Vec<Vec<f64>> = (0..2).map(|_| random_probabilities(&mut r, d)).collect();
        let fb = FeedbackProtocolSpec::new(
            rho.clone(),
            p.clone(),
            pre.clone(),
            mid.clone(),
            branches.clone(),
            finals.clone(),
            q_cond.clone(),
            None,
        )
        .unwrap();
        let mut raw = Vec::new();
        for alpha in 0..d {
            let pa = trace(&(p.op(alpha) * rho.as_op())).re;
            let pal = p.op(alpha);
            for j in 0..2 {
                let mut x = Operator::zeros(d, d);
                for a in pre.kraus() {
                    x += a * pal * a.adjoint();
                }
                let x = mid.op(j) * x * mid.op(j);
                let u = &branches[j].kraus()[0];
                let y = u * x * u.adjoint();
                for beta in 0..d {
                    let w = trace(&(finals[j].op(beta) * &y)).re * pa;
                    raw.push(((pa / q_cond[j][beta]).ln(), w));
                }
            }
        }
        let oracle = ObservableDistribution::from_raw(raw, true);
        let pdf = feedback_forward_pdf(&fb).unwrap();
        assert!(atomwise_residual(&pdf, &oracle) < 1e-12);
        assert!((pdf.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tilted_forward_equals_reverse_pseudo_distribution() {
        let mut r = rng(6);
        for _ in 0..10 {
            let d = r.random_range(2..=3);
            let pre = random_channel(&mut r, d, 2);
            let mid = random_projective(&mut r, d);
            let branches: Vec<CpMap> = (0..d).map(|_| random_channel(&mut r, d, 2).as_cp_map()).collect();
            let fb = FeedbackProtocolSpec::new(
                random_density(&mut r, d),
                random_projective(&mut r, d),
                pre,
                mid,
                branches,
                (0..d).map(|_| random_projective(&mut r, d)).collect(),
                (0..d).map(|_| random_probabilities(&mut r, d)).collect(),
                None,
            )
            .unwrap();
            let fwd = feedback_forward_pdf(&fb).unwrap().tilted(-1.0);
            let rev = feedback_reverse_quantity(&fb).unwrap().reflected();
            assert!(atomwise_residual(&fwd, &rev) < 1e-12);
            for &l in &[0.0, 1.0, 0.6, -0.8, 1.7] {
                let m = feedback_mgf_identity(&fb, l).unwrap();
                assert!(m.relative_residual() < 1e-9, "{m:?}");
            }
            let m = feedback_mgf_identity(&fb, 1.0).unwrap();
            assert!((m.trace_form - 1.0).abs() < 1e-10);
            let g = feedback_efficacy(&fb).unwrap();
            let m0 = feedback_mgf_identity(&fb, 0.0).unwrap();
            assert!((m0.trace_form - g.dual_form).abs() < 1e-10);
        }
    }

    #[test]
    fn incomplete_instrument_rejected() {
        let d = 2;
        let half = CpMap::from_kraus(vec![identity(d).scale(0.5)], true).unwrap();
        let err = FeedbackProtocolSpec::new(
            DensityMatrix::maximally_mixed(d),
            Measurement::computational(d),
            Channel::identity(d),
            Measurement::computational(d),
            vec![half.clone(), half],
            vec![Measurement::computational(d); 2],
            vec![vec![0.5, 0.5]; 2],
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("not trace preserving"));
    }

    #[test]
    fn mutual_information_observable_integrates_to_one() {
        let mut r = rng(7);
        let exact = unitary_feedback(&mut r, 2, None);
        let rep = mutual_info_observable_pdf(&exact.spec).unwrap();
        // pairs (j, k != j) never occur, so only the formal sum reaches one
        let pj = exact.spec.mid_probabilities().unwrap();
        let mut expected = 0.0;
        for j in 0..2 {
            let uj = &exact.feedback[j];
            expected += pj[j] * trace(&(&exact.rho_q[j] * uj * exact.mid.op(j) * uj.adjoint())).re;
        }
        assert!((rep.integral - expected).abs() < 1e-10);
        assert!((rep.formal_integral - 1.0).abs() < 1e-10);
        assert!(rep.rho_hat.is_some());
        // without errors the information term is -ln p_j
        let h: f64 = pj.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
        assert!((rep.mutual_information - h).abs() < 1e-10);

        let noisy = unitary_feedback(&mut r, 2, Some(ErrorModel::symmetric(2, 0.1).unwrap()));
        let rep = mutual_info_observable_pdf(&noisy.spec).unwrap();
        assert!((rep.integral - 1.0).abs() < 1e-10);
        assert!((rep.formal_integral - 1.0).abs() < 1e-10);
        assert!(rep.mutual_information >= -1e-12);

        for d in 2..=4 {
            let cols: Vec<f64> = (0..d).flat_map(|_| random_probabilities(&mut r, d)).collect();
            let errs = ErrorModel::new(DMatrix::from_column_slice(d, d, &cols)).unwrap();
            let t = unitary_feedback(&mut r, d, Some(errs));
            let rep = mutual_info_observable_pdf(&t.spec).unwrap();
            assert!((rep.integral - 1.0).abs() < 1e-10);
            let tr = trace(rep.rho_hat.as_ref().unwrap()).re;
            assert!((tr - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn confusion_matrix_validation() {
        assert!(ErrorModel::new(DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.8])).is_err());
        assert!(ErrorModel::new(DMatrix::from_row_slice(2, 2, &[1.1, 0.0, -0.1, 1.0])).is_err());
        let e = ErrorModel::symmetric(3, 0.3).unwrap();
        let m = e.marginal(&[0.2, 0.3, 0.5]);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
