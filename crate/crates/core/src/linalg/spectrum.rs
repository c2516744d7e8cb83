use std::ops::Range;

use nalgebra::{DVector, SymmetricEigen};

use super::{hermitian_part, Hermitian, Operator, C64};

/// Eigendecomposition `H = V diag(values) V^dagger` with ascending
/// eigenvalues and orthonormal eigenvector columns.
///
/// Inside a degenerate block the eigenvectors are an arbitrary orthonormal
/// basis; nothing downstream relies on a particular choice.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Operator,
}

impl Spectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvectors as columns, in the order of [`values`](Self::values).
    pub fn vectors(&self) -> &Operator {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    /// `|v_k><v_k|`.
    pub fn projector(&self, k: usize) -> Operator {
        let v = self.vectors.column(k);
        &v * v.adjoint()
    }

    pub fn reconstruct(&self) -> Operator {
        self.map(|x| x)
    }

    /// `V f(diag) V^dagger` for a real function.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Operator {
        self.map_complex(|x| C64::new(f(x), 0.0))
    }

    pub fn map_complex(&self, f: impl Fn(f64) -> C64) -> Operator {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let fk = f(self.values[k]);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Index ranges of eigenvalue clusters; consecutive eigenvalues closer
    /// than `tol` belong to the same cluster.
    pub fn clusters(&self, tol: f64) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.dim() {
            if k == self.dim() || self.values[k] - self.values[k - 1] > tol {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Projector onto the span of eigenvectors `range`.
    pub fn cluster_projector(&self, range: Range<usize>) -> Operator {
        let v = self.vectors.columns(range.start, range.len());
        &v * v.adjoint()
    }

    /// Max-abs reconstruction residual against `h`.
    pub fn reconstruction_error(&self, h: &Operator) -> f64 {
        super::max_abs(&(self.reconstruct() - h))
    }

    /// Max-abs deviation of `V^dagger V` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        super::max_abs(&(g - super::identity(self.dim())))
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn eig_hermitian(h: &Hermitian) -> Spectrum {
    eig_operator(h.as_op())
}

/// Eigendecomposition of the Hermitian part of `op`, no validation.
pub(crate) fn eig_operator(op: &Operator) -> Spectrum {
    let n = op.nrows();
    if n == 0 {
        return Spectrum {
            values: Vec::new(),
            vectors: Operator::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitian_part(op));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Operator::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Spectrum { values, vectors }
}
