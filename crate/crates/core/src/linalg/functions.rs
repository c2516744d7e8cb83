//! Norms, spectral matrix functions, entropies and thermal states.

use crate::error::{Error, Result};
use crate::tolerance;

use super::spectrum::eig_operator;
use super::{DensityMatrix, Hermitian, Operator, Spectrum, C64};

pub fn singular_values(a: &Operator) -> Vec<f64> {
    a.clone().singular_values().iter().copied().collect()
}

/// `Tr|A|`, the sum of singular values.
pub fn trace_norm(a: &Operator) -> f64 {
    singular_values(a).iter().sum()
}

/// Largest singular value.
pub fn operator_norm(a: &Operator) -> f64 {
    singular_values(a).iter().fold(0.0, |m, &s| m.max(s))
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn unitary_evolution(h: &Hermitian, t: f64) -> Operator {
    h.eig().map_complex(|e| C64::from_polar(1.0, -e * t))
}

/// `exp(s H)` for Hermitian `H` and real `s`.
pub fn exp_hermitian(h: &Hermitian, s: f64) -> Operator {
    let spec = h.eig();
    let shift = spec
        .values()
        .iter()
        .map(|&e| s * e)
        .fold(f64::NEG_INFINITY, f64::max);
    // exp(s e) = exp(shift) exp(s e - shift) keeps intermediates bounded
    spec.map(|e| (s * e - shift).exp()).scale(shift.exp())
}

/// Power of a positive semidefinite operator taken on its support.
///
/// Eigenvalues at or below `tol_psd` count as zero. `0^p` is zero for
/// `p > 0` and one for `p == 0`; a negative power of a singular operator is
/// a domain error.
pub fn psd_power(a: &Operator, p: f64) -> Result<Operator> {
    let spec = eig_operator(a);
    psd_power_spectrum(&spec, p)
}

pub(crate) fn psd_power_spectrum(spec: &Spectrum, p: f64) -> Result<Operator> {
    let tol = tolerance::get().psd;
    if let Some(&min) = spec.values().first() {
        if min < -tol {
            return Err(Error::domain(format!(
                "power of an operator with negative eigenvalue {min:.3e}"
            )));
        }
        if p < 0.0 && min <= tol {
            return Err(Error::domain(format!(
                "negative power {p} of a singular operator (smallest eigenvalue {min:.3e})"
            )));
        }
    }
    Ok(spec.map(|x| {
        if x <= tol {
            if p == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            x.powf(p)
        }
    }))
}

pub fn sqrt_psd(a: &Operator) -> Result<Operator> {
    psd_power(a, 0.5)
}

/// `A^{-1/2}`; fails on rank-deficient input.
pub fn inv_sqrt_psd(a: &Operator) -> Result<Operator> {
    psd_power(a, -0.5)
}

/// `Tr[A ln S]` for positive semidefinite `S`.
///
/// Weight of `A` on the kernel of `S` makes the value infinite: `-inf` for
/// positive weight, `+inf` for negative weight. Weights below `tol_psd` are
/// ignored.
pub fn trace_log(a: &Operator, s: &Operator) -> f64 {
    let tol = tolerance::get().psd;
    let spec = eig_operator(s);
    let mut acc = 0.0;
    let mut inf = 0.0;
    for (k, &sk) in spec.values().iter().enumerate() {
        let v = spec.vectors().column(k);
        let w = (v.adjoint() * a * v)[(0, 0)].re;
        if sk > tol {
            acc += w * sk.ln();
        } else if w.abs() > tol {
            inf += -w.signum();
        }
    }
    if inf > 0.0 {
        f64::INFINITY
    } else if inf < 0.0 {
        f64::NEG_INFINITY
    } else {
        acc
    }
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// `-sum f ln q`; `+inf` when `f > 0` where `q = 0`.
pub fn cross_entropy(f: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&fi, &qi) in f.iter().zip(q) {
        if fi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        acc -= fi * qi.ln();
    }
    acc
}

/// Classical relative entropy `sum p ln(p/q)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    cross_entropy(p, q) - shannon_entropy(p)
}

/// `-Tr[rho ln rho]` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.probabilities())
}

/// `S(rho || sigma) = Tr[rho ln rho] - Tr[rho ln sigma]`, or `+inf` when the
/// support of `rho` is not contained in the support of `sigma`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let cross = trace_log(rho, sigma);
    if cross == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    -cross - von_neumann_entropy(rho)
}

/// `ln Z` computed with a log-sum-exp shift.
pub fn log_partition_function(h: &Hermitian, beta: f64) -> f64 {
    log_sum_exp(h.eig().values().iter().map(|&e| -beta * e))
}

/// `Z = sum_i exp(-beta e_i)`.
pub fn partition_function(h: &Hermitian, beta: f64) -> f64 {
    log_partition_function(h, beta).exp()
}

/// `exp(-beta H) / Z`.
pub fn gibbs_state(h: &Hermitian, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("inverse temperature must be finite and >= 0, got {beta}")));
    }
    let spec = h.eig();
    let weights = boltzmann_weights(spec.values(), beta);
    let mut rho = Operator::zeros(spec.dim(), spec.dim());
    for (k, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            rho += spec.projector(k).scale(*w);
        }
    }
    Ok(DensityMatrix::trusted(rho))
}

/// Normalized Boltzmann weights of the given energies.
pub fn boltzmann_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let lz = log_sum_exp(energies.iter().map(|&e| -beta * e));
    energies.iter().map(|&e| (-beta * e - lz).exp()).collect()
}

/// `F = -ln(Z) / beta`.
pub fn free_energy(h: &Hermitian, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("free energy needs beta > 0, got {beta}")));
    }
    Ok(-log_partition_function(h, beta) / beta)
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}
