use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::pauli::{embed, sigma_x, sigma_z};
use super::*;
use crate::random::{random_density, random_hermitian};

/// Coefficients of det(x I - A) by Faddeev-LeVerrier, highest degree first.
fn char_poly(a: &Operator) -> Vec<C64> {
    let n = a.nrows();
    let mut coeffs = vec![ONE];
    let mut m = zeros(n);
    for k in 1..=n {
        m = a * &m + identity(n) * coeffs[k - 1];
        let ck = -trace(&(a * &m)) / (k as f64);
        coeffs.push(ck);
    }
    coeffs
}

/// All roots by Durand-Kerner iteration.
fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    let eval = |z: C64| coeffs.iter().fold(ZERO, |acc, &c| acc * z + c);
    let mut roots: Vec<C64> = (0..n).map(|k| C64::new(0.4, 0.9).powu(k as u32 + 1) * 3.0).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let mut denom = ONE;
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
        let change = roots.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if change < 1e-15 {
            break;
        }
    }
    roots
}

fn ising_two_qubit(h: f64, j: f64) -> Operator {
    let z0 = embed(&sigma_z(), 0, 2);
    let z1 = embed(&sigma_z(), 1, 2);
    -(&z0 + &z1).scale(h) - (&z0 * &z1).scale(j)
}

fn annealer(a: f64, b: f64) -> Operator {
    let x = embed(&sigma_x(), 0, 2) + embed(&sigma_x(), 1, 2);
    -x.scale(a) + ising_two_qubit(1.0 / 3.0, 0.5).scale(b)
}

#[test]
fn pauli_z_spectrum() {
    let s = Hermitian::new(sigma_z()).unwrap().eig();
    assert_eq!(s.values(), &[-1.0, 1.0]);
}

#[test]
fn zero_operator_spectrum() {
    let s = Hermitian::new(zeros(4)).unwrap().eig();
    assert!(s.values().iter().all(|&x| x == 0.0));
}

/// Elementary symmetric polynomials e_1..e_n of `xs`.
fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for &x in xs {
        let mut next = e.clone();
        next.push(0.0);
        for k in 1..next.len() {
            next[k] += e[k - 1] * x;
        }
        e = next;
    }
    e
}

#[test]
fn spectrum_matches_characteristic_polynomial() {
    for op in [ising_two_qubit(1.0 / 3.0, 0.5), annealer(12.0, 7.5), annealer(1.0, 30.0)] {
        let coeffs = char_poly(&op);
        let spec = Hermitian::new(op.clone()).unwrap().eig();
        // Vieta: coefficient k of det(xI - A) is (-1)^k e_k(eigenvalues)
        let e = elementary_symmetric(spec.values());
        for k in 1..coeffs.len() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let scale = 1.0 + coeffs[k].norm();
            assert!((coeffs[k].re - sign * e[k]).abs() < 1e-11 * scale, "coefficient {k}");
            assert!(coeffs[k].im.abs() < 1e-11 * scale);
        }
        // simple roots found independently agree with the eigenvalues
        let roots = poly_roots(&coeffs);
        for r in roots {
            let nearest = spec.values().iter().map(|v| (v - r.re).abs()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-7 * (1.0 + r.norm()));
        }
        assert!(spec.reconstruction_error(&op) < 1e-10 * 40.0);
        assert!(spec.orthonormality_error() < 1e-12);
    }
    // the diagonal Ising case is known in closed form
    let spec = Hermitian::new(ising_two_qubit(1.0 / 3.0, 0.5)).unwrap().eig();
    let expected = [-7.0 / 6.0, 1.0 / 6.0, 0.5, 0.5];
    for (a, b) in spec.values().iter().zip(expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn non_hermitian_input_is_rejected() {
    let mut op = sigma_z();
    op[(0, 1)] = c(0.1, 0.0);
    assert!(matches!(Hermitian::new(op), Err(crate::Error::Validation(_))));
}

#[test]
fn gibbs_infinite_temperature_is_maximally_mixed() {
    let h = Hermitian::new(annealer(3.0, 1.0)).unwrap();
    let rho = gibbs_state(&h, 0.0).unwrap();
    assert!(max_abs(&(rho.as_op() - identity(4).unscale(4.0))) < 1e-15);
}

#[test]
fn gibbs_zero_temperature_is_ground_projector() {
    let h = Hermitian::new(annealer(3.0, 1.0)).unwrap();
    let rho = gibbs_state(&h, 1e4).unwrap();
    let ground = h.eig().projector(0);
    assert!(max_abs(&(rho.as_op() - ground)) < 1e-12);
}

#[test]
fn initial_transverse_field_gibbs_state_is_almost_pure() {
    let h = Hermitian::new(annealer(33.7, 0.0)).unwrap();
    let rho = gibbs_state(&h, 1.0 / 2.3).unwrap();
    assert!(rho.purity() > 0.99);
}

#[test]
fn gibbs_rejects_negative_beta() {
    let h = Hermitian::new(sigma_z()).unwrap();
    assert!(gibbs_state(&h, -1.0).is_err());
    assert!(gibbs_state(&h, f64::NAN).is_err());
}

#[test]
fn partition_function_cases() {
    let zero = Hermitian::new(zeros(4)).unwrap();
    assert!((partition_function(&zero, 3.7) - 4.0).abs() < 1e-14);
    let h = Hermitian::new(ising_two_qubit(1.0 / 3.0, 0.5)).unwrap();
    assert!((partition_function(&h, 0.0) - 4.0).abs() < 1e-14);
    // explicit four-term sum over the diagonal energies
    let beta = 1.3;
    let z: f64 = [-7.0 / 6.0, 0.5, 0.5, 1.0 / 6.0].iter().map(|e: &f64| (-beta * e).exp()).sum();
    assert!((partition_function(&h, beta) - z).abs() < 1e-13 * z);
}

#[test]
fn free_energy_cases() {
    let zero = Hermitian::new(zeros(4)).unwrap();
    assert!((free_energy(&zero, 2.0).unwrap() + 4f64.ln() / 2.0).abs() < 1e-15);
    assert!(matches!(free_energy(&zero, 0.0), Err(crate::Error::Domain(_))));
    let h = Hermitian::new(annealer(3.0, 1.0)).unwrap();
    let ground = h.eig().values()[0];
    let f = free_energy(&h, 1e3).unwrap();
    assert!(((f - ground) / ground).abs() < 1e-6);
}

#[test]
fn free_energy_difference_of_annealer_endpoints() {
    // high-precision oracle: direct summation of exp(-beta e) in the
    // closed-form endpoint spectra, with compensated summation in ln Z
    let beta = 1.0 / 2.3;
    let a0 = 33.7;
    let bf = 33.6;
    let initial = [-2.0 * a0, 0.0, 0.0, 2.0 * a0];
    let fin = [-7.0 / 6.0 * bf, 1.0 / 6.0 * bf, 0.5 * bf, 0.5 * bf];
    let lnz = |es: &[f64]| {
        let m = es.iter().map(|e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
        m + es.iter().map(|e| (-beta * e - m).exp()).sum::<f64>().ln()
    };
    let expected = -(lnz(&fin) - lnz(&initial)) / beta;
    let h0 = Hermitian::new(annealer(a0, 0.0)).unwrap();
    let hf = Hermitian::new(annealer(0.0, bf)).unwrap();
    let df = free_energy(&hf, beta).unwrap() - free_energy(&h0, beta).unwrap();
    assert!((df - expected).abs() < 1e-11 * expected.abs());
}

#[test]
fn entropy_cases() {
    let pure = DensityMatrix::basis(3, 1);
    assert_eq!(von_neumann_entropy(&pure), 0.0);
    let mixed = DensityMatrix::maximally_mixed(4);
    assert!((von_neumann_entropy(&mixed) - 4f64.ln()).abs() < 1e-14);
    let r = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
    let expected = -0.7 * 0.7f64.ln() - 0.3 * 0.3f64.ln();
    assert!((von_neumann_entropy(&r) - expected).abs() < 1e-15);
}

#[test]
fn relative_entropy_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rho = random_density(&mut rng, 3);
    assert!(relative_entropy(&rho, &rho).abs() < 1e-12);
    let pure = DensityMatrix::basis(4, 2);
    let mixed = DensityMatrix::maximally_mixed(4);
    assert!((relative_entropy(&pure, &mixed) - 4f64.ln()).abs() < 1e-14);
    // commuting pair reduces to the classical divergence of the diagonals
    let p = [0.5, 0.2, 0.3];
    let q = [0.1, 0.6, 0.3];
    let kl: f64 = p.iter().zip(&q).map(|(a, b): (&f64, &f64)| a * (a / b).ln()).sum();
    let rp = DensityMatrix::diagonal(&p).unwrap();
    let rq = DensityMatrix::diagonal(&q).unwrap();
    assert!((relative_entropy(&rp, &rq) - kl).abs() < 1e-14);
    // support violation is a sentinel, not an error
    assert_eq!(relative_entropy(&mixed, &pure), f64::INFINITY);
}

#[test]
fn norm_cases() {
    let id = identity(4);
    assert!((trace_norm(&id) - 4.0).abs() < 1e-14);
    assert!((operator_norm(&id) - 1.0).abs() < 1e-14);
    let p = basis_projector(3, 1);
    assert!((trace_norm(&p) - 1.0).abs() < 1e-14);
    assert!((operator_norm(&p) - 1.0).abs() < 1e-14);
}

#[test]
fn norms_match_gram_matrix_oracle() {
    // singular values are square roots of the eigenvalues of A^dagger A,
    // obtained here from the characteristic polynomial
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = crate::random::ginibre(&mut rng, 3, 3);
    let gram = a.adjoint() * &a;
    let sv: Vec<f64> = poly_roots(&char_poly(&gram)).iter().map(|z| z.re.max(0.0).sqrt()).collect();
    let sum: f64 = sv.iter().sum();
    let max = sv.iter().copied().fold(0.0, f64::max);
    assert!((trace_norm(&a) - sum).abs() < 1e-10);
    assert!((operator_norm(&a) - max).abs() < 1e-10);
}

#[test]
fn psd_power_domain() {
    let r = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
    assert!(psd_power(&r, -0.5).is_err());
    let p0 = psd_power(&r, 0.0).unwrap();
    assert!(max_abs(&(p0 - identity(2))) < 1e-15);
    let p2 = psd_power(&r, 2.0).unwrap();
    assert!(max_abs(&(p2 - r.as_op())) < 1e-15);
}

#[test]
fn unitary_evolution_of_pauli_x() {
    let h = Hermitian::new(sigma_x()).unwrap();
    let u = unitary_evolution(&h, std::f64::consts::FRAC_PI_2);
    // exp(-i pi/2 X) = -i X
    assert!(max_abs(&(u - sigma_x() * c(0.0, -1.0))) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eig_reconstruction(seed in any::<u64>(), d in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, d);
        let s = h.eig();
        prop_assert!(s.reconstruction_error(&h) <= 1e-10 * (d as f64).max(4.0));
        prop_assert!(s.orthonormality_error() <= 1e-12);
        prop_assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gibbs_commutes_with_hamiltonian(seed in any::<u64>(), d in 1usize..=8, beta in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, d);
        let rho = gibbs_state(&h, beta).unwrap();
        prop_assert!(operator_norm(&commutator(&rho, &h)) <= 1e-10);
        prop_assert!((trace(&rho).re - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn klein_inequality(seed in any::<u64>(), d in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, d);
        let sigma = random_density(&mut rng, d);
        prop_assert!(relative_entropy(&rho, &sigma) >= -1e-12);
    }

    #[test]
    fn norm_ordering_and_submultiplicativity(seed in any::<u64>(), d in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = crate::random::ginibre(&mut rng, d, d);
        let b = crate::random::ginibre(&mut rng, d, d);
        let ab = &a * &b;
        prop_assert!(trace_norm(&a) + 1e-12 >= operator_norm(&a));
        prop_assert!(operator_norm(&ab) <= operator_norm(&a) * operator_norm(&b) * (1.0 + 1e-12));
        prop_assert!(trace_norm(&ab) <= trace_norm(&a) * trace_norm(&b) * (1.0 + 1e-12));
    }
}
