//! Dense complex linear algebra on small Hilbert spaces.

mod functions;
pub mod pauli;
mod spectrum;
mod states;

pub use functions::*;
pub use spectrum::{eig_hermitian, Spectrum};
pub use states::{DensityMatrix, Hermitian};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

/// Dense square complex matrix. States, Hamiltonians, Kraus operators and
/// measurement operators are all carried as `Operator`.
pub type Operator = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> Operator {
    Operator::identity(d, d)
}

pub fn zeros(d: usize) -> Operator {
    Operator::zeros(d, d)
}

pub fn dagger(a: &Operator) -> Operator {
    a.adjoint()
}

pub fn trace(a: &Operator) -> C64 {
    a.diagonal().iter().sum()
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &Operator, b: &Operator) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
    a * b + b * a
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// Largest absolute entry.
pub fn max_abs(a: &Operator) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Max-abs entry of `A - A^dagger`.
pub fn hermiticity_residual(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            r = r.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    r
}

/// `(A + A^dagger) / 2`.
pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()).scale(0.5)
}

pub fn is_square(a: &Operator) -> bool {
    a.nrows() == a.ncols()
}

pub fn all_finite(a: &Operator) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Diagonal operator from real entries.
pub fn diag_real(v: &[f64]) -> Operator {
    let n = v.len();
    let mut m = zeros(n);
    for (i, &x) in v.iter().enumerate() {
        m[(i, i)] = c(x, 0.0);
    }
    m
}

/// `|psi><psi|` for a (not necessarily normalized) column vector.
pub fn outer(psi: &[C64]) -> Operator {
    let n = psi.len();
    Operator::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

/// Rank-one projector on the computational basis state `k`.
pub fn basis_projector(d: usize, k: usize) -> Operator {
    let mut m = zeros(d);
    m[(k, k)] = ONE;
    m
}

/// Column-stacking vectorization.
pub fn vec_op(a: &Operator) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &nalgebra::DVector<C64>, d: usize) -> Operator {
    Operator::from_column_slice(d, d, v.as_slice())
}

#[cfg(test)]
mod tests;
