//! Completely positive maps in Kraus form and their duals.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{identity, max_abs, unvec, vec_op, Operator, C64};
use crate::tolerance;

/// Anything that acts linearly on operators and has an adjoint under the
/// Hilbert-Schmidt inner product.
pub trait LinearMap {
    fn dim(&self) -> usize;

    fn apply(&self, x: &Operator) -> Result<Operator>;

    /// The adjoint map: `Tr[A apply(B)] = Tr[B apply_dual(A)]`.
    fn apply_dual(&self, x: &Operator) -> Result<Operator>;
}

fn check_kraus(kraus: &[Operator]) -> Result<usize> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::validation("Kraus list is empty"))?;
    let d = first.nrows();
    for (i, k) in kraus.iter().enumerate() {
        if k.nrows() != d || k.ncols() != d {
            return Err(Error::validation(format!(
                "Kraus operator {i} is {}x{}, expected {d}x{d}",
                k.nrows(),
                k.ncols()
            )));
        }
        if !crate::linalg::all_finite(k) {
            return Err(Error::validation(format!("Kraus operator {i} has non-finite entries")));
        }
    }
    Ok(d)
}

/// `sum_i A_i^dagger A_i`.
pub fn kraus_completeness(kraus: &[Operator]) -> Operator {
    let d = kraus.first().map_or(0, |k| k.ncols());
    kraus
        .iter()
        .fold(Operator::zeros(d, d), |acc, k| acc + k.adjoint() * k)
}

fn apply_kraus(kraus: &[Operator], x: &Operator) -> Operator {
    let d = x.nrows();
    kraus
        .iter()
        .fold(Operator::zeros(d, d), |acc, k| acc + k * x * k.adjoint())
}

fn apply_kraus_dual(kraus: &[Operator], x: &Operator) -> Operator {
    let d = x.nrows();
    kraus
        .iter()
        .fold(Operator::zeros(d, d), |acc, k| acc + k.adjoint() * x * k)
}

/// Completely positive map given by Kraus operators, not necessarily trace
/// preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct CpMap {
    dim: usize,
    kraus: Vec<Operator>,
}

impl CpMap {
    /// Builds a CP map. Unless `allow_trace_decreasing` is set the Kraus set
    /// must satisfy the completeness relation within `tol_tp`.
    pub fn from_kraus(kraus: Vec<Operator>, allow_trace_decreasing: bool) -> Result<Self> {
        let dim = check_kraus(&kraus)?;
        if !allow_trace_decreasing {
            tp_residual_check(&kraus, tolerance::get().tp)?;
        }
        Ok(CpMap { dim, kraus })
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    /// Max-abs entry of `sum A^dagger A - 1`.
    pub fn trace_preservation_residual(&self) -> f64 {
        max_abs(&(kraus_completeness(&self.kraus) - identity(self.dim)))
    }

    /// `self` after `first`.
    pub fn after(&self, first: &CpMap) -> Result<CpMap> {
        check_dim(self.dim, first.dim)?;
        Ok(CpMap {
            dim: self.dim,
            kraus: compose_kraus(&self.kraus, &first.kraus),
        })
    }

    /// Sum of several CP maps with equal dimension.
    pub fn sum(maps: &[CpMap]) -> Result<CpMap> {
        let first = maps
            .first()
            .ok_or_else(|| Error::validation("empty sum of CP maps"))?;
        let mut kraus = Vec::new();
        for m in maps {
            check_dim(first.dim, m.dim)?;
            kraus.extend(m.kraus.iter().cloned());
        }
        Ok(CpMap { dim: first.dim, kraus })
    }

    /// Promote to a channel if the Kraus set is complete.
    pub fn into_channel(self) -> Result<Channel> {
        Channel::new(self.kraus)
    }
}

impl LinearMap for CpMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(apply_kraus(&self.kraus, x))
    }

    fn apply_dual(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(apply_kraus_dual(&self.kraus, x))
    }
}

fn compose_kraus(second: &[Operator], first: &[Operator]) -> Vec<Operator> {
    let mut out = Vec::with_capacity(second.len() * first.len());
    for b in second {
        for a in first {
            out.push(b * a);
        }
    }
    out
}

fn tp_residual_check(kraus: &[Operator], tol: f64) -> Result<()> {
    let d = kraus[0].nrows();
    let r = max_abs(&(kraus_completeness(kraus) - identity(d)));
    if r > tol {
        return Err(Error::validation(format!(
            "Kraus operators are not trace preserving: |sum A^dagger A - 1| = {r:.3e}"
        )));
    }
    Ok(())
}

/// A completely positive trace-preserving map `E(X) = sum_i A_i X A_i^dagger`.
///
/// Kraus sets are not canonicalized; two channels are equal when they act
/// identically (see [`Channel::superoperator`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    dim: usize,
    kraus: Vec<Operator>,
}

impl Channel {
    /// Validates dimensions and completeness against the global `tol_tp`.
    pub fn new(kraus: Vec<Operator>) -> Result<Self> {
        Self::with_tolerance(kraus, tolerance::get().tp)
    }

    pub fn with_tolerance(kraus: Vec<Operator>, tol_tp: f64) -> Result<Self> {
        let dim = check_kraus(&kraus)?;
        tp_residual_check(&kraus, tol_tp)?;
        Ok(Channel { dim, kraus })
    }

    pub fn identity(d: usize) -> Self {
        Channel {
            dim: d,
            kraus: vec![identity(d)],
        }
    }

    /// `X -> U X U^dagger`; `u` must be unitary.
    pub fn unitary(u: Operator) -> Result<Self> {
        Self::new(vec![u])
    }

    /// Convex mixture `sum_j w_j U_j X U_j^dagger`.
    pub fn mixture_of_unitaries(weights: &[f64], unitaries: &[Operator]) -> Result<Self> {
        if weights.len() != unitaries.len() {
            return Err(Error::validation("weights and unitaries differ in length"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::validation("mixture weights must be non-negative"));
        }
        let kraus = weights
            .iter()
            .zip(unitaries)
            .map(|(&w, u)| u.scale(w.sqrt()))
            .collect();
        Self::new(kraus)
    }

    /// Channel from a column-stacking superoperator matrix via its Choi
    /// matrix. Choi eigenvalues below `tol_cp` in magnitude are dropped;
    /// more negative ones are rejected as non-CP.
    pub fn from_superoperator(s: &SuperOperator, tol_cp: f64, tol_tp: f64) -> Result<Self> {
        let d = s.dim;
        let choi = s.choi();
        let spec = crate::linalg::Hermitian::from_part(&choi).eig();
        let mut kraus = Vec::new();
        for (k, &lam) in spec.values().iter().enumerate() {
            if lam < -tol_cp {
                return Err(Error::validation(format!(
                    "map is not completely positive (Choi eigenvalue {lam:.3e})"
                )));
            }
            if lam <= tol_cp {
                continue;
            }
            let v = spec.vector(k);
            // choi = sum_ij |i><j| (x) E(|i><j|) with the input index outer
            let a = Operator::from_fn(d, d, |r, col| v[col * d + r] * lam.sqrt());
            kraus.push(a);
        }
        Self::with_tolerance(kraus, tol_tp)
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    pub fn dual(&self) -> DualMap {
        DualMap {
            dim: self.dim,
            kraus: self.kraus.iter().map(|k| k.adjoint()).collect(),
        }
    }

    /// `self` after `first`: Kraus set `{B_j A_i}`.
    pub fn compose(&self, first: &Channel) -> Result<Channel> {
        check_dim(self.dim, first.dim)?;
        Ok(Channel {
            dim: self.dim,
            kraus: compose_kraus(&self.kraus, &first.kraus),
        })
    }

    /// `E(1)`.
    pub fn image_of_identity(&self) -> Operator {
        apply_kraus(&self.kraus, &identity(self.dim))
    }

    /// `|E(1) - 1|_inf`.
    pub fn unitality_defect(&self) -> f64 {
        crate::linalg::operator_norm(&(self.image_of_identity() - identity(self.dim)))
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.unitality_defect() <= tol
    }

    pub fn as_cp_map(&self) -> CpMap {
        CpMap {
            dim: self.dim,
            kraus: self.kraus.clone(),
        }
    }

    pub fn superoperator(&self) -> SuperOperator {
        SuperOperator::from_kraus(&self.kraus)
    }
}

impl LinearMap for Channel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(apply_kraus(&self.kraus, x))
    }

    fn apply_dual(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(apply_kraus_dual(&self.kraus, x))
    }
}

/// Dual of a channel, Kraus operators `{A_i^dagger}`. Completely positive
/// and unital; trace preserving only when the original channel is unital.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMap {
    dim: usize,
    kraus: Vec<Operator>,
}

impl DualMap {
    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    /// Dual of the dual, as a CP map.
    pub fn dual(&self) -> CpMap {
        CpMap {
            dim: self.dim,
            kraus: self.kraus.iter().map(|k| k.adjoint()).collect(),
        }
    }
}

impl LinearMap for DualMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(apply_kraus(&self.kraus, x))
    }

    fn apply_dual(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(apply_kraus_dual(&self.kraus, x))
    }
}

/// Linear map on operators as a `d^2 x d^2` matrix acting on column-stacked
/// operators, `vec(A X B) = (B^T (x) A) vec(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl SuperOperator {
    pub fn new(dim: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::validation(format!(
                "superoperator for dimension {dim} must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(SuperOperator { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        SuperOperator {
            dim,
            matrix: DMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn from_kraus(kraus: &[Operator]) -> Self {
        let d = kraus.first().map_or(0, |k| k.nrows());
        let matrix = kraus
            .iter()
            .fold(DMatrix::zeros(d * d, d * d), |acc, k| acc + k.conjugate().kronecker(k));
        SuperOperator { dim: d, matrix }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Choi matrix `sum_ij |i><j| (x) E(|i><j|)`.
    pub fn choi(&self) -> Operator {
        let d = self.dim;
        let mut choi = Operator::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                // E(|i><j|) is column (i + d j) of the matrix
                let col = self.matrix.column(i + d * j);
                for r in 0..d {
                    for s in 0..d {
                        choi[(i * d + r, j * d + s)] = col[r + d * s];
                    }
                }
            }
        }
        choi
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &SuperOperator) -> Result<SuperOperator> {
        check_dim(self.dim, first.dim)?;
        Ok(SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * &first.matrix,
        })
    }
}

impl LinearMap for SuperOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(unvec(&(&self.matrix * vec_op(x)), self.dim))
    }

    fn apply_dual(&self, x: &Operator) -> Result<Operator> {
        check_dim(self.dim, x.nrows())?;
        Ok(unvec(&(self.matrix.adjoint() * vec_op(x)), self.dim))
    }
}
