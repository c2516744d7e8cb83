use std::ops::Deref;

use crate::error::{Error, Result};
use crate::tolerance;

use super::{eig_hermitian, hermitian_part, hermiticity_residual, is_square, trace, Operator, Spectrum, C64};

/// A Hermitian operator, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(Operator);

impl Hermitian {
    /// Accepts `op` if `op - op^dagger` is within the global Hermiticity
    /// tolerance (scaled by the largest entry for large-norm operators). The
    /// stored matrix is the exact Hermitian part.
    pub fn new(op: Operator) -> Result<Self> {
        if !is_square(&op) {
            return Err(Error::validation(format!(
                "operator is {}x{}, not square",
                op.nrows(),
                op.ncols()
            )));
        }
        if !super::all_finite(&op) {
            return Err(Error::validation("operator has non-finite entries"));
        }
        let scale = super::max_abs(&op).max(1.0);
        let r = hermiticity_residual(&op);
        if r > tolerance::get().herm * scale {
            return Err(Error::validation(format!("operator is not Hermitian (residual {r:.3e})")));
        }
        Ok(Hermitian(hermitian_part(&op)))
    }

    /// Hermitian part of `op`, no validation.
    pub fn from_part(op: &Operator) -> Self {
        Hermitian(hermitian_part(op))
    }

    pub fn as_op(&self) -> &Operator {
        &self.0
    }

    pub fn into_inner(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eig(&self) -> Spectrum {
        eig_hermitian(self)
    }
}

impl Deref for Hermitian {
    type Target = Operator;

    fn deref(&self) -> &Operator {
        &self.0
    }
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Validates against the global tolerances.
    pub fn new(op: Operator) -> Result<Self> {
        let tol = tolerance::get();
        Self::with_tolerance(op, tol.trace, tol.psd)
    }

    /// Validates with explicit trace and positivity tolerances. Used for
    /// states produced by the master-equation integrator, whose trace is
    /// only conserved to the integrator tolerance.
    pub fn with_tolerance(op: Operator, tol_trace: f64, tol_psd: f64) -> Result<Self> {
        let h = Hermitian::new(op)?;
        let tr = trace(&h).re;
        if (tr - 1.0).abs() > tol_trace {
            return Err(Error::validation(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = h.eig().values().first().copied().unwrap_or(0.0);
        if min < -tol_psd {
            return Err(Error::validation(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(DensityMatrix(h.into_inner()))
    }

    /// Hermitian part of `op` rescaled to unit trace; still rejects states
    /// with eigenvalues below `-tol_psd`.
    pub fn normalized(op: &Operator, tol_psd: f64) -> Result<Self> {
        let h = hermitian_part(op);
        let tr = trace(&h).re;
        if !(tr > 0.0) {
            return Err(Error::domain(format!("cannot normalize operator with trace {tr}")));
        }
        Self::with_tolerance(h.unscale(tr), f64::INFINITY, tol_psd)
    }

    /// Wraps an operator known to be a state; debug builds still check it.
    pub(crate) fn trusted(op: Operator) -> Self {
        debug_assert!(hermiticity_residual(&op) < 1e-8);
        DensityMatrix(hermitian_part(&op))
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::validation("zero state vector"));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(DensityMatrix(super::outer(&v)))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(super::identity(d).unscale(d as f64))
    }

    /// Diagonal state in the computational basis.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(super::diag_real(p))
    }

    /// Computational basis state `|k><k|`.
    pub fn basis(d: usize, k: usize) -> Self {
        DensityMatrix(super::basis_projector(d, k))
    }

    pub fn as_op(&self) -> &Operator {
        &self.0
    }

    pub fn into_inner(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eig(&self) -> Spectrum {
        super::spectrum::eig_operator(&self.0)
    }

    /// Eigenvalues clamped to `[0, 1]`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.eig().values().iter().map(|&x| x.clamp(0.0, 1.0)).collect()
    }

    pub fn purity(&self) -> f64 {
        super::trace_product(&self.0, &self.0).re
    }

    /// `Tr[rho A]`.
    pub fn expectation(&self, a: &Operator) -> C64 {
        super::trace_product(&self.0, a)
    }
}

impl Deref for DensityMatrix {
    type Target = Operator;

    fn deref(&self) -> &Operator {
        &self.0
    }
}

impl From<DensityMatrix> for Operator {
    fn from(r: DensityMatrix) -> Operator {
        r.0
    }
}
