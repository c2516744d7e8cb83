//! Single-qubit Pauli operators and multi-qubit embeddings.
//!
//! Qubit 0 is the most significant tensor factor, so basis state index
//! `b_0 b_1 ... b_{n-1}` in binary has qubit 0 in the leading bit. Basis
//! state 0 of each qubit is the `+1` eigenstate of `sigma_z` (spin up).

use super::{c, identity, kron, Operator, ONE, ZERO};

pub fn sigma_x() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
}

pub fn sigma_z() -> Operator {
    Operator::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `|0><1|`, raising in the convention where 0 is spin up.
pub fn sigma_plus() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

/// `|1><0|`.
pub fn sigma_minus() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO])
}

/// Embed a single-qubit operator acting on `site` into `n` qubits.
pub fn embed(op: &Operator, site: usize, n: usize) -> Operator {
    assert!(site < n, "site {site} out of range for {n} qubits");
    let mut out = identity(1);
    for k in 0..n {
        out = if k == site {
            kron(&out, op)
        } else {
            kron(&out, &identity(2))
        };
    }
    out
}

/// `sigma_a^site sigma_b^other` on `n` qubits.
pub fn embed_pair(a: &Operator, i: usize, b: &Operator, j: usize, n: usize) -> Operator {
    embed(a, i, n) * embed(b, j, n)
}
