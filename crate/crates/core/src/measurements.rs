//! Generalized measurements, prepared ensembles and reverse-process
//! measurement construction.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    identity, inv_sqrt_psd, max_abs, sqrt_psd, trace, trace_product, DensityMatrix, Hermitian, Operator, C64,
};
use crate::tolerance;
use crate::linalg::pauli::{sigma_minus, sigma_plus, sigma_x, sigma_y};

/// Generalized measurement `{M_k}` with `sum_k M_k^dagger M_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    dim: usize,
    ops: Vec<Operator>,
    labels: Vec<String>,
}

impl Measurement {
    /// Validates completeness against the global `tol_meas`. Missing labels
    /// default to the outcome index.
    pub fn new(ops: Vec<Operator>, labels: Option<Vec<String>>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::validation("measurement has no operators"))?;
        let dim = first.nrows();
        for (i, m) in ops.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::validation(format!(
                    "measurement operator {i} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let labels = match labels {
            Some(l) if l.len() != ops.len() => {
                return Err(Error::validation(format!(
                    "{} labels for {} measurement operators",
                    l.len(),
                    ops.len()
                )))
            }
            Some(l) => l,
            None => (0..ops.len()).map(|k| k.to_string()).collect(),
        };
        let m = Measurement { dim, ops, labels };
        let r = m.completeness_residual();
        if r > tolerance::get().meas {
            return Err(Error::validation(format!(
                "measurement is not complete: |sum M^dagger M - 1| = {r:.3e}"
            )));
        }
        Ok(m)
    }

    /// Rank-one projective measurement onto the columns of `basis`, which
    /// must be unitary.
    pub fn projective_from_basis(basis: &Operator) -> Result<Self> {
        let ops = (0..basis.ncols())
            .map(|k| {
                let v = basis.column(k);
                &v * v.adjoint()
            })
            .collect();
        Self::new(ops, None)
    }

    /// Computational-basis projective measurement.
    pub fn computational(d: usize) -> Self {
        Self::projective_from_basis(&identity(d)).expect("identity basis is complete")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn op(&self, k: usize) -> &Operator {
        &self.ops[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// POVM elements `M_k^dagger M_k`.
    pub fn effects(&self) -> Vec<Operator> {
        self.ops.iter().map(|m| m.adjoint() * m).collect()
    }

    pub fn completeness_residual(&self) -> f64 {
        let sum = self
            .ops
            .iter()
            .fold(Operator::zeros(self.dim, self.dim), |acc, m| acc + m.adjoint() * m);
        max_abs(&(sum - identity(self.dim)))
    }

    /// Born-rule probabilities `Tr[M_k^dagger M_k X]` for any operator `X`
    /// (real parts; `X` is usually a state).
    pub fn probabilities_of(&self, x: &Operator) -> Result<Vec<f64>> {
        check_dim(self.dim, x.nrows())?;
        Ok(self
            .ops
            .iter()
            .map(|m| trace_product(&(m.adjoint() * m), x).re)
            .collect())
    }

    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.probabilities_of(rho)
    }

    /// True if every operator is a rank-one orthogonal projector.
    pub fn is_rank_one_projective(&self, tol: f64) -> bool {
        self.ops.iter().all(|m| {
            max_abs(&(m * m - m)) <= tol
                && max_abs(&(m.adjoint() - m)) <= tol
                && (trace(m).re - 1.0).abs() <= tol
        })
    }
}

/// Eigenprojectors of `h` as a projective measurement, in ascending order
/// of energy. Degenerate blocks are split along the eigensolver's basis.
pub fn projective_from_hamiltonian(h: &Hermitian) -> Measurement {
    let spec = h.eig();
    Measurement::projective_from_basis(spec.vectors()).expect("eigenvectors are orthonormal")
}

/// Outcome probabilities and post-measurement states of a measurement.
#[derive(Debug, Clone)]
pub struct PreparedEnsemble {
    probs: Vec<f64>,
    states: Vec<Option<DensityMatrix>>,
}

impl PreparedEnsemble {
    /// Probability of every outcome, including impossible ones.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Post-measurement state, `None` when the outcome probability is at or
    /// below `p_floor`.
    pub fn state(&self, k: usize) -> Option<&DensityMatrix> {
        self.states[k].as_ref()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices of outcomes with probability above `p_floor`.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.states[k].is_some())
    }

    /// `sum_k rho_k` over the support, unweighted.
    pub fn state_sum(&self) -> Operator {
        let d = self.states.iter().flatten().next().map_or(0, |s| s.dim());
        self.support().fold(Operator::zeros(d, d), |acc, k| acc + self.states[k].as_ref().unwrap().as_op())
    }

    /// `sum_k p_k rho_k`.
    pub fn mixture(&self) -> Operator {
        let d = self
            .states
            .iter()
            .flatten()
            .next()
            .map_or(0, |s| s.dim());
        self.support().fold(Operator::zeros(d, d), |acc, k| {
            acc + self.states[k].as_ref().unwrap().as_op().scale(self.probs[k])
        })
    }
}

/// Measure `rho`: `p_k = Tr[M_k^dagger M_k rho]`, `rho_k = M_k rho M_k^dagger / p_k`.
pub fn measure_prepare(m: &Measurement, rho: &DensityMatrix) -> Result<PreparedEnsemble> {
    check_dim(m.dim, rho.dim())?;
    let floor = tolerance::get().p_floor;
    let mut probs = Vec::with_capacity(m.len());
    let mut states = Vec::with_capacity(m.len());
    for op in m.ops() {
        let post = op * rho.as_op() * op.adjoint();
        let p = trace(&post).re.max(0.0);
        probs.push(p);
        states.push(if p > floor {
            Some(DensityMatrix::trusted(post.unscale(p)))
        } else {
            None
        });
    }
    Ok(PreparedEnsemble { probs, states })
}

/// Outcome of [`check_microreversible`].
#[derive(Debug, Clone)]
pub struct MicroreversibilityReport {
    pub dim: usize,
    pub p_count: usize,
    pub q_count: usize,
    /// Largest max-abs residual of `sum_k rho_k - 1` over the test states.
    pub ensemble_residual: f64,
    /// Index of the test state with the largest residual.
    pub worst_test_state: usize,
    /// `Tr[Q_k^dagger Q_k] - 1` per outcome of `Q`.
    pub q_trace_residuals: Vec<f64>,
    pub passed: bool,
}

/// Full-rank test states whose span is the whole operator space: the
/// states `|i><i|`, `(|i>+|j>)(<i|+<j|)/2` and `(|i>+i|j>)(<i|-i<j|)/2`,
/// each mixed half-and-half with the maximally mixed state.
pub fn spanning_test_states(d: usize) -> Vec<DensityMatrix> {
    let mixed = identity(d).unscale(d as f64);
    let mut pure: Vec<Vec<C64>> = Vec::new();
    for i in 0..d {
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[i] = C64::new(1.0, 0.0);
        pure.push(v);
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            let mut v = vec![C64::new(0.0, 0.0); d];
            v[i] = C64::new(h, 0.0);
            v[j] = C64::new(h, 0.0);
            pure.push(v.clone());
            v[j] = C64::new(0.0, h);
            pure.push(v);
        }
    }
    pure.into_iter()
        .map(|v| {
            let op = crate::linalg::outer(&v).scale(0.5) + mixed.scale(0.5);
            DensityMatrix::trusted(op)
        })
        .collect()
}

/// Checks the microreversibility conditions on a pair of measurements: the
/// post-measurement states of `p` sum to the identity for every input, each
/// `Tr[Q_k^dagger Q_k]` equals one, and both have exactly `d` outcomes.
pub fn check_microreversible(p: &Measurement, q: &Measurement) -> Result<MicroreversibilityReport> {
    check_dim(p.dim, q.dim)?;
    let d = p.dim;
    let tol = tolerance::get().meas;
    let mut worst = 0.0;
    let mut worst_idx = 0;
    for (idx, rho) in spanning_test_states(d).iter().enumerate() {
        let ens = measure_prepare(p, rho)?;
        let sum = ens
            .support()
            .fold(Operator::zeros(d, d), |acc, k| acc + ens.state(k).unwrap().as_op());
        let r = max_abs(&(sum - identity(d)));
        if r > worst {
            worst = r;
            worst_idx = idx;
        }
    }
    let q_trace_residuals: Vec<f64> = q
        .effects()
        .iter()
        .map(|e| trace(e).re - 1.0)
        .collect();
    let passed = worst <= tol
        && q_trace_residuals.iter().all(|r| r.abs() <= tol)
        && p.len() == d
        && q.len() == d;
    Ok(MicroreversibilityReport {
        dim: d,
        p_count: p.len(),
        q_count: q.len(),
        ensemble_residual: worst,
        worst_test_state: worst_idx,
        q_trace_residuals,
        passed,
    })
}

/// Reverse-process measurements of a microreversible pair.
#[derive(Debug, Clone)]
pub struct ReverseMeasurements {
    /// `P~_k = U_k sqrt(rho) P_k^dagger / sqrt(p_k)`.
    pub p_tilde: Measurement,
    /// `Q~_k = sqrt(q_k) Q_k^dagger U~_k rho~^{-1/2}`.
    pub q_tilde: Measurement,
    /// The virtual final state the reverse process starts from.
    pub rho_tilde: DensityMatrix,
}

/// Optional unitary freedoms of the reverse construction; identity when
/// absent.
#[derive(Debug, Clone, Default)]
pub struct ReverseUnitaries {
    pub for_p: Option<Vec<Operator>>,
    pub for_q: Option<Vec<Operator>>,
}

/// The virtual final state consistent with `q` and the unitaries:
/// `sum_k q_k U~_k^dagger Q_k Q_k^dagger U~_k`.
pub fn consistent_rho_tilde(q_meas: &Measurement, q: &[f64], unitaries: Option<&[Operator]>) -> Result<DensityMatrix> {
    let d = q_meas.dim();
    let mut acc = Operator::zeros(d, d);
    for (k, op) in q_meas.ops().iter().enumerate() {
        let qq = op * op.adjoint();
        let term = match unitaries {
            Some(us) => us[k].adjoint() * qq * &us[k],
            None => qq,
        };
        acc += term.scale(q[k]);
    }
    DensityMatrix::new(acc)
}

/// Builds `P~` and `Q~` for a microreversible pair.
///
/// `rho` is the state measured by `p` in the forward process and must be
/// full rank. When `rho_tilde` is `None` the virtual final state is taken
/// from [`consistent_rho_tilde`]; a supplied `rho_tilde` must make `Q~`
/// complete. Every `p_k` must exceed `p_floor`.
pub fn build_reverse_measurements(
    p: &Measurement,
    q: &Measurement,
    q_dist: &[f64],
    rho: &DensityMatrix,
    rho_tilde: Option<&DensityMatrix>,
    unitaries: &ReverseUnitaries,
) -> Result<ReverseMeasurements> {
    let d = p.dim();
    check_dim(d, q.dim())?;
    check_dim(d, rho.dim())?;
    if q_dist.len() != q.len() {
        return Err(Error::validation(format!(
            "{} probabilities for {} outcomes",
            q_dist.len(),
            q.len()
        )));
    }
    if let Some(us) = &unitaries.for_p {
        check_dim(p.len(), us.len())?;
    }
    if let Some(us) = &unitaries.for_q {
        check_dim(q.len(), us.len())?;
    }
    let report = check_microreversible(p, q)?;
    if !report.passed {
        return Err(Error::validation(format!(
            "measurements are not microreversible (ensemble residual {:.3e})",
            report.ensemble_residual
        )));
    }

    let rho_tilde = match rho_tilde {
        Some(r) => r.clone(),
        None => consistent_rho_tilde(q, q_dist, unitaries.for_q.as_deref())?,
    };
    let inv_sqrt_rt = inv_sqrt_psd(&rho_tilde)
        .map_err(|_| Error::domain("virtual final state is not full rank"))?;
    let mut q_ops = Vec::with_capacity(q.len());
    for (k, op) in q.ops().iter().enumerate() {
        let mut m = op.adjoint();
        if let Some(us) = &unitaries.for_q {
            m *= &us[k];
        }
        q_ops.push((m * &inv_sqrt_rt).scale(q_dist[k].sqrt()));
    }

    let sqrt_rho = sqrt_psd(rho)?;
    if inv_sqrt_psd(rho).is_err() {
        return Err(Error::domain("measured state is not full rank"));
    }
    let probs = p.probabilities(rho)?;
    let floor = tolerance::get().p_floor;
    let mut p_ops = Vec::with_capacity(p.len());
    for (k, op) in p.ops().iter().enumerate() {
        if probs[k] <= floor {
            return Err(Error::domain(format!("outcome {k} of P has zero probability")));
        }
        let mut m = &sqrt_rho * op.adjoint();
        if let Some(us) = &unitaries.for_p {
            m = &us[k] * m;
        }
        p_ops.push(m.unscale(probs[k].sqrt()));
    }

    Ok(ReverseMeasurements {
        p_tilde: Measurement::new(p_ops, Some(p.labels().to_vec()))?,
        q_tilde: Measurement::new(q_ops, Some(q.labels().to_vec()))?,
        rho_tilde,
    })
}

/// Non-projective microreversible qubit pair: `P = {sigma+, sigma-}` and
/// `Q = {sigma_x, sigma_y} / sqrt(2)`.
pub fn qubit_ladder_pair() -> (Measurement, Measurement) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let p = Measurement::new(vec![sigma_plus(), sigma_minus()], None).expect("complete");
    let q = Measurement::new(vec![sigma_x().scale(h), sigma_y().scale(h)], None).expect("complete");
    (p, q)
}
