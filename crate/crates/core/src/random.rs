//! Random states, unitaries and channels for testing and self-checks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channels::Channel;
use crate::linalg::{DensityMatrix, Hermitian, Operator, C64};
use crate::measurements::Measurement;

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Operator {
    Operator::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phases of
/// `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Operator {
    haar_isometry(rng, d, d)
}

/// `rows x cols` isometry (`V^dagger V = 1`) from the Haar measure.
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Operator {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rng, rows, cols);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols {
        let z = r[(k, k)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..rows {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Full-rank random state `G G^dagger / Tr[G G^dagger]`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    let g = ginibre(rng, d, d);
    let w = &g * g.adjoint();
    let tr = crate::linalg::trace(&w).re;
    DensityMatrix::new(w.unscale(tr)).expect("Wishart matrix is a state")
}

pub fn random_pure_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    let g = ginibre(rng, d, 1);
    let n = g.norm();
    g.iter().map(|z| z / n).collect()
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Hermitian {
    let g = ginibre(rng, d, d);
    Hermitian::from_part(&(&g + g.adjoint()))
}

/// Uniform point on the probability simplex with `n` strictly positive
/// entries.
pub fn random_probabilities<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-12)
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Channel with `k` Kraus operators obtained from a Haar isometry into the
/// system plus a `k`-dimensional environment, environment traced out.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Channel {
    let v = haar_isometry(rng, d * k, d);
    let kraus = (0..k).map(|i| v.rows(i * d, d).into_owned()).collect();
    Channel::new(kraus).expect("isometry blocks are complete")
}

/// Unital channel: random convex mixture of `n` Haar unitaries.
pub fn random_unital_channel<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Channel {
    let weights = random_probabilities(rng, n);
    let us: Vec<Operator> = (0..n).map(|_| haar_unitary(rng, d)).collect();
    Channel::mixture_of_unitaries(&weights, &us).expect("mixture of unitaries is a channel")
}

/// Generalized measurement with `n` outcomes from the blocks of a Haar
/// isometry.
pub fn random_measurement<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Measurement {
    let v = haar_isometry(rng, d * n, d);
    let ops = (0..n).map(|i| v.rows(i * d, d).into_owned()).collect();
    Measurement::new(ops, None).expect("isometry blocks are complete")
}

/// Rank-one projective measurement in a Haar-random basis.
pub fn random_projective<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Measurement {
    Measurement::projective_from_basis(&haar_unitary(rng, d)).expect("unitary columns are a basis")
}
