use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{
    boltzmann_weights, diag_real, dagger, eig_hermitian, gibbs_state, kl_divergence,
    log_partition_function, relative_entropy, trace, DensityMatrix, Hermitian, Operator, C64,
};
use crate::measurements::{projective_from_hamiltonian, qubit_ladder_pair, Measurement, ReverseUnitaries};
use crate::random::{
    haar_unitary, random_channel, random_density, random_hermitian, random_measurement, random_probabilities,
    random_projective, random_unital_channel,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Constant channel onto basis state `k`: Kraus operators `|k><i|`.
fn reset_channel(d: usize, k: usize) -> Channel {
    let kraus = (0..d)
        .map(|i| {
            let mut a = Operator::zeros(d, d);
            a[(k, i)] = C64::new(1.0, 0.0);
            a
        })
        .collect();
    Channel::new(kraus).unwrap()
}

fn random_protocol(r: &mut ChaCha8Rng, d: usize, unital: bool, generalized_q: bool) -> ProtocolSpec {
    let channel = if unital {
        let n = r.random_range(2..=4);
        random_unital_channel(r, d, n)
    } else {
        let k = r.random_range(1..=3);
        random_channel(r, d, k)
    };
    let q = if generalized_q {
        let n = r.random_range(2..=4);
        random_measurement(r, d, n)
    } else {
        random_projective(r, d)
    };
    let q_dist = random_probabilities(r, q.len());
    ProtocolSpec::new(random_density(r, d), random_projective(r, d), channel, q, q_dist).unwrap()
}

struct Thermal {
    spec: ProtocolSpec,
    beta: f64,
    hi: Hermitian,
    hf: Hermitian,
    u: Operator,
}

fn thermal_quench(r: &mut ChaCha8Rng, d: usize, beta: f64) -> Thermal {
    let hi = random_hermitian(r, d);
    let hf = random_hermitian(r, d);
    let u = haar_unitary(r, d);
    let q_dist = boltzmann_weights(eig_hermitian(&hf).values(), beta);
    let spec = ProtocolSpec::new(
        gibbs_state(&hi, beta).unwrap(),
        projective_from_hamiltonian(&hi),
        Channel::unitary(u.clone()).unwrap(),
        projective_from_hamiltonian(&hf),
        q_dist,
    )
    .unwrap();
    Thermal { spec, beta, hi, hf, u }
}

/// `E(X)_{ij} = sum_{kl} U_{ik} X_{kl} conj(U_{jl})`, entry by entry.
fn conjugate_entrywise(u: &Operator, x: &Operator) -> Operator {
    let d = u.nrows();
    Operator::from_fn(d, d, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..d {
            for l in 0..d {
                acc += u[(i, k)] * x[(k, l)] * u[(j, l)].conj();
            }
        }
        acc
    })
}

#[test]
fn identity_channel_same_basis_is_diagonal() {
    let mut r = rng(1);
    let p = random_projective(&mut r, 3);
    let spec = ProtocolSpec::new(random_density(&mut r, 3), p.clone(), Channel::identity(3), p, random_probabilities(&mut r, 3))
        .unwrap();
    let stats = forward_statistics(&spec).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let expected = if a == b { 1.0 } else { 0.0 };
            assert!((stats.transitions.get(b, a) - expected).abs() < 1e-12);
        }
    }
    assert!(stats.transitions.stochasticity_residual() < 1e-12);
}

#[test]
fn marginal_matches_entrywise_oracle_for_two_qubit_quench() {
    let mut r = rng(2);
    let t = thermal_quench(&mut r, 4, 0.8);
    let stats = forward_statistics(&t.spec).unwrap();
    let rho_p = gibbs_state(&t.hi, t.beta).unwrap();
    let evolved = conjugate_entrywise(&t.u, &rho_p);
    let spec_f = eig_hermitian(&t.hf);
    for beta in 0..4 {
        let v = spec_f.vector(beta);
        let f = (v.adjoint() * &evolved * &v)[(0, 0)].re;
        assert!((stats.marginal[beta] - f).abs() < 1e-12);
    }
    let closed = marginal_closed_form(&t.spec).unwrap();
    for (a, b) in stats.marginal.iter().zip(&closed) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn adiabatic_mapping_gives_diagonal_transitions_and_relative_entropy() {
    let mut r = rng(3);
    let d = 3;
    let u = haar_unitary(&mut r, d);
    let p_dist = random_probabilities(&mut r, d);
    let q_dist = random_probabilities(&mut r, d);
    let spec = ProtocolSpec::new(
        DensityMatrix::diagonal(&p_dist).unwrap(),
        Measurement::computational(d),
        Channel::unitary(u.clone()).unwrap(),
        Measurement::projective_from_basis(&u).unwrap(),
        q_dist.clone(),
    )
    .unwrap();
    let stats = forward_statistics(&spec).unwrap();
    for a in 0..d {
        assert!((stats.marginal[a] - p_dist[a]).abs() < 1e-12);
        assert!((stats.transitions.get(a, a) - 1.0).abs() < 1e-12);
    }
    let dec = projective_entropy_identity(&spec, None).unwrap();
    assert!((dec.mean_v - kl_divergence(&p_dist, &q_dist)).abs() < 1e-10);
    assert!((dec.distance - kl_divergence(&p_dist, &q_dist)).abs() < 1e-10);
}

#[test]
fn equal_distributions_and_identity_give_single_atom_at_zero() {
    let mut r = rng(4);
    let p = random_probabilities(&mut r, 3);
    let spec = ProtocolSpec::new(
        DensityMatrix::diagonal(&p).unwrap(),
        Measurement::computational(3),
        Channel::identity(3),
        Measurement::computational(3),
        p,
    )
    .unwrap();
    let pdf = forward_pdf(&spec, VChoice::LogPQ).unwrap();
    assert_eq!(pdf.len(), 1);
    assert!(pdf.atoms()[0].v.abs() < 1e-12);
    assert!((pdf.atoms()[0].prob - 1.0).abs() < 1e-12);
}

#[test]
fn closed_thermal_protocol_has_work_atoms() {
    let mut r = rng(5);
    let t = thermal_quench(&mut r, 4, 0.7);
    let ei = eig_hermitian(&t.hi);
    let ef = eig_hermitian(&t.hf);
    let df = -(log_partition_function(&t.hf, t.beta) - log_partition_function(&t.hi, t.beta)) / t.beta;
    let pi = boltzmann_weights(ei.values(), t.beta);
    let mut raw = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            let amp = (ef.vector(b).adjoint() * &t.u * ei.vector(a))[(0, 0)];
            let w = t.beta * (ef.values()[b] - ei.values()[a] - df);
            raw.push((w, pi[a] * amp.norm_sqr()));
        }
    }
    let oracle = ObservableDistribution::from_raw(raw, true);
    let pdf = forward_pdf(&t.spec, VChoice::LogPQ).unwrap();
    assert!(atomwise_residual(&pdf, &oracle) < 1e-12);
    assert!((pdf.total_mass() - 1.0).abs() < 1e-10);
    let j = jarzynski_check(&t.spec, VChoice::LogPQ).unwrap();
    assert!((j.lhs - 1.0).abs() < 1e-10);
    assert!(second_law_check(&t.spec).unwrap().margin >= -1e-12);
}

#[test]
fn exp_minus_v_matches_double_sum_oracle() {
    let mut r = rng(6);
    for _ in 0..20 {
        let spec = random_protocol(&mut r, 3, false, true);
        let ens = crate::measurements::measure_prepare(spec.p(), spec.rho()).unwrap();
        let mut oracle = 0.0;
        for a in ens.support() {
            let rho_a = ens.state(a).unwrap();
            for (b, qop) in spec.q().ops().iter().enumerate() {
                let mut cond = 0.0;
                for k in spec.channel().kraus() {
                    cond += trace(&(qop * k * rho_a.as_op() * k.adjoint() * qop.adjoint())).re;
                }
                oracle += ens.probs()[a] * cond * spec.q_dist()[b] / ens.probs()[a];
            }
        }
        let lhs = forward_pdf(&spec, VChoice::LogPQ).unwrap().mgf(-1.0);
        assert!((lhs - oracle).abs() < 1e-10, "{lhs} vs {oracle}");
        let g = efficacy(&spec).unwrap();
        assert!((g.double_sum - oracle).abs() < 1e-10);
        assert!(g.residual() < 1e-10);
    }
}

#[test]
fn unital_microreversible_reverse_mass_is_one() {
    let mut r = rng(7);
    let (p, q) = qubit_ladder_pair();
    let spec = ProtocolSpec::new(
        random_density(&mut r, 2),
        p,
        random_unital_channel(&mut r, 2, 3),
        q,
        random_probabilities(&mut r, 2),
    )
    .unwrap();
    let rev = reverse_quantity(&spec, VChoice::LogPQ).unwrap();
    assert!((rev.total_mass() - 1.0).abs() < 1e-10);
    assert!((efficacy(&spec).unwrap().value() - 1.0).abs() < 1e-10);
}

#[test]
fn reset_channel_efficacy() {
    let mut r = rng(8);
    for d in 2..=4 {
        let q_dist = random_probabilities(&mut r, d);
        let spec = ProtocolSpec::new(
            random_density(&mut r, d),
            random_projective(&mut r, d),
            reset_channel(d, 1),
            Measurement::computational(d),
            q_dist.clone(),
        )
        .unwrap();
        let rev = reverse_quantity(&spec, VChoice::LogPQ).unwrap();
        let expected = d as f64 * q_dist[1];
        assert!((rev.total_mass() - expected).abs() < 1e-12);
        let g = efficacy(&spec).unwrap();
        assert!((g.double_sum - expected).abs() < 1e-12);
        assert!((g.closed_form.unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn reset_channel_saturates_gamma_bound() {
    let d = 3;
    let mut q_dist = vec![0.0; d];
    q_dist[1] = 1.0;
    let spec = ProtocolSpec::new(
        DensityMatrix::maximally_mixed(d),
        Measurement::computational(d),
        reset_channel(d, 1),
        Measurement::computational(d),
        q_dist,
    )
    .unwrap();
    let g = gamma_bound(&spec).unwrap();
    assert!((g.gamma - d as f64).abs() < 1e-12);
    assert!((g.bound - d as f64).abs() < 1e-12);
    assert!(g.holds);
    assert!((efficacy(&spec).unwrap().double_sum - d as f64).abs() < 1e-12);
}

#[test]
fn zero_reference_probability_on_support_is_a_domain_error() {
    let spec = ProtocolSpec::new(
        DensityMatrix::maximally_mixed(2),
        Measurement::computational(2),
        Channel::identity(2),
        Measurement::computational(2),
        vec![1.0, 0.0],
    )
    .unwrap();
    let err = forward_pdf(&spec, VChoice::LogPQ).unwrap_err();
    assert!(matches!(err, crate::Error::Domain(_)));
    assert!(err.to_string().contains("q[1]"));
}

#[test]
fn invalid_reference_distribution_rejected() {
    let make = |q: Vec<f64>| {
        ProtocolSpec::new(
            DensityMatrix::maximally_mixed(2),
            Measurement::computational(2),
            Channel::identity(2),
            Measurement::computational(2),
            q,
        )
    };
    assert!(make(vec![0.5, 0.6]).is_err());
    assert!(make(vec![1.5, -0.5]).is_err());
    assert!(make(vec![1.0]).is_err());
}

#[test]
fn reverse_atoms_match_tilted_forward_for_any_channel() {
    let mut r = rng(9);
    for i in 0..30 {
        let d = 2 + i % 3;
        let spec = random_protocol(&mut r, d, i % 2 == 0, i % 3 == 0);
        let fwd = forward_pdf(&spec, VChoice::LogPQ).unwrap().tilted(-1.0);
        let rev = reverse_quantity(&spec, VChoice::LogPQ).unwrap().reflected();
        assert!(atomwise_residual(&fwd, &rev) < 1e-12);
    }
}

#[test]
fn mgf_symmetry_and_closed_form() {
    let mut r = rng(10);
    for i in 0..10 {
        let spec = random_protocol(&mut r, 2 + i % 3, false, false);
        let fwd = forward_pdf(&spec, VChoice::LogPQ).unwrap();
        let rev = reverse_quantity(&spec, VChoice::LogPQ).unwrap();
        let rho_p = crate::measurements::measure_prepare(spec.p(), spec.rho()).unwrap().mixture();
        let rho_q = spec.rho_q();
        for &l in &[-2.0, -0.5, 0.37, 0.7, 1.3] {
            let a = fwd.mgf(l - 1.0);
            let b = rev.mgf(-l);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300), "{a} vs {b}");
            let c = mgf_projective_closed_form(&rho_p, &rho_q, spec.channel(), l).unwrap();
            let m = fwd.mgf(l);
            assert!((c - m).abs() <= 1e-10 * m.max(1.0), "{c} vs {m}");
        }
        assert!((fwd.mgf(0.0) - 1.0).abs() < 1e-10);
        let g = efficacy(&spec).unwrap().value();
        assert!((fwd.mgf(-1.0) - g).abs() < 1e-10);
        let c = mgf_projective_closed_form(&rho_p, &rho_q, spec.channel(), -1.0).unwrap();
        assert!((c - g).abs() < 1e-10);
        assert!((mgf_projective_closed_form(&rho_p, &rho_q, spec.channel(), 0.0).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn closed_form_mgf_rejects_singular_reference() {
    let rho_q = diag_real(&[1.0, 0.0]);
    let rho_p = diag_real(&[0.5, 0.5]);
    let err = mgf_projective_closed_form(&rho_p, &rho_q, &Channel::identity(2), 0.5).unwrap_err();
    assert!(matches!(err, crate::Error::Domain(_)));
}

#[test]
fn unitary_channel_mean_is_relative_entropy() {
    let mut r = rng(11);
    let u = haar_unitary(&mut r, 3);
    let spec = ProtocolSpec::new(
        random_density(&mut r, 3),
        random_projective(&mut r, 3),
        Channel::unitary(u).unwrap(),
        random_projective(&mut r, 3),
        random_probabilities(&mut r, 3),
    )
    .unwrap();
    let dec = projective_entropy_identity(&spec, None).unwrap();
    assert!(dec.entropy_change.abs() < 1e-10);
    assert!((dec.mean_v - dec.distance).abs() < 1e-9);
}

#[test]
fn entropy_identities_for_random_non_unital_protocols() {
    let mut r = rng(12);
    for i in 0..20 {
        let spec = random_protocol(&mut r, 2 + i % 3, false, false);
        let dec = projective_entropy_identity(&spec, None).unwrap();
        assert!(!dec.skipped);
        assert!(dec.residual_a < 1e-9, "{}", dec.residual_a);
        assert!(dec.residual_b < 1e-9, "{}", dec.residual_b);
        assert!(dec.bound.holds);
        let g = generalized_entropy_identity(&spec).unwrap();
        assert!(g.residual < 1e-9);
    }
    for _ in 0..10 {
        let spec = random_protocol(&mut r, 3, false, true);
        let g = generalized_entropy_identity(&spec).unwrap();
        assert!(g.residual < 1e-9);
    }
}

#[test]
fn heat_term_for_thermal_reference() {
    let mut r = rng(13);
    let t = thermal_quench(&mut r, 4, 1.3);
    let spec = t.spec.with_channel(random_channel(&mut r, 4, 2)).unwrap();
    let dec = projective_entropy_identity(&spec, Some((t.beta, &t.hf))).unwrap();
    let heat = dec.heat.unwrap();
    assert!(heat.gibbs_residual < 1e-12);
    assert!(heat.residual < 1e-9);
    assert!(dec.residual_b < 1e-9);
}

#[test]
fn projective_identity_refuses_generalized_measurements() {
    let mut r = rng(14);
    let spec = random_protocol(&mut r, 2, false, true);
    assert!(projective_entropy_identity(&spec, None).is_err());
}

#[test]
fn crooks_for_thermal_closed_system() {
    let mut r = rng(15);
    let t = thermal_quench(&mut r, 4, 0.9);
    let rep = crooks_check(&t.spec, &ReverseUnitaries::default()).unwrap();
    assert!(rep.max_residual < 1e-12, "{}", rep.max_residual);
}

#[test]
fn crooks_for_mixtures_of_unitaries() {
    let mut r = rng(16);
    for d in 2..=4 {
        let spec = random_protocol(&mut r, d, true, false);
        let rep = crooks_check(&spec, &ReverseUnitaries::default()).unwrap();
        assert!(rep.max_residual < 1e-10);
        assert!((rep.reverse_reflected.total_mass() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn crooks_for_ladder_pair_with_random_reverse_unitaries() {
    let mut r = rng(17);
    let (p, q) = qubit_ladder_pair();
    for trial in 0..5 {
        let spec = ProtocolSpec::new(
            random_density(&mut r, 2),
            p.clone(),
            Channel::unitary(haar_unitary(&mut r, 2)).unwrap(),
            q.clone(),
            random_probabilities(&mut r, 2),
        )
        .unwrap();
        let unitaries = if trial == 0 {
            ReverseUnitaries::default()
        } else {
            ReverseUnitaries {
                for_p: Some((0..2).map(|_| haar_unitary(&mut r, 2)).collect()),
                for_q: Some((0..2).map(|_| haar_unitary(&mut r, 2)).collect()),
            }
        };
        let rep = crooks_check(&spec, &unitaries).unwrap();
        assert!(rep.max_residual < 1e-10, "{}", rep.max_residual);
    }
}

#[test]
fn crooks_refuses_non_unital_channel() {
    let mut r = rng(18);
    let spec = random_protocol(&mut r, 2, false, false);
    let spec = spec.with_channel(reset_channel(2, 1)).unwrap();
    let err = crooks_check(&spec, &ReverseUnitaries::default()).unwrap_err();
    assert!(err.to_string().contains("||E(1) - 1||"));
}

#[test]
fn bistochasticity_follows_unitality() {
    let mut r = rng(19);
    let p = random_projective(&mut r, 3);
    let spec = ProtocolSpec::new(
        random_density(&mut r, 3),
        p.clone(),
        Channel::identity(3),
        p,
        random_probabilities(&mut r, 3),
    )
    .unwrap();
    let stats = forward_statistics(&spec).unwrap();
    let id = nalgebra::DMatrix::<f64>::identity(3, 3);
    assert!((stats.transitions.entries() - id).abs().max() < 1e-12);
    let rep = bistochasticity_check(&spec, &ReverseUnitaries::default()).unwrap();
    assert!(rep.unital && rep.rows_sum_to_one);

    let unital = random_protocol(&mut r, 3, true, false);
    let rep = bistochasticity_check(&unital, &ReverseUnitaries::default()).unwrap();
    assert!(rep.unital && rep.rows_sum_to_one);
    assert!(rep.reverse_transition_residual < 1e-10);

    let lossy = unital.with_channel(random_channel(&mut r, 3, 2)).unwrap();
    let rep = bistochasticity_check(&lossy, &ReverseUnitaries::default()).unwrap();
    assert!(!rep.unital && !rep.rows_sum_to_one);
    assert!(rep.reverse_transition_residual < 1e-10);
}

#[test]
fn gamma_bound_with_mixed_reference_is_one() {
    let mut r = rng(20);
    let d = 3;
    let spec = ProtocolSpec::new(
        random_density(&mut r, d),
        random_projective(&mut r, d),
        random_channel(&mut r, d, 2),
        random_projective(&mut r, d),
        vec![1.0 / 3.0; 3],
    )
    .unwrap();
    let g = gamma_bound(&spec).unwrap();
    assert!((g.bound.min(1.0) - g.bound).abs() < 1e-12);
    assert!((g.rho_q_norm * 3.0 - 1.0).abs() < 1e-12);
    assert!(g.holds);
}

#[test]
fn log_cond_choices_integrate_to_one() {
    let mut r = rng(21);
    for i in 0..20 {
        let spec = random_protocol(&mut r, 2 + i % 3, i % 2 == 0, i % 4 == 1);
        for choice in [VChoice::LogCondQ, VChoice::LogCondF] {
            let j = jarzynski_check(&spec, choice).unwrap();
            assert!(j.residual < 1e-10);
            let rev = reverse_quantity(&spec, choice).unwrap();
            let fwd = forward_pdf(&spec, choice).unwrap().tilted(-1.0);
            assert!(atomwise_residual(&fwd, &rev.reflected()) < 1e-12);
        }
    }
}

#[test]
fn degenerate_basis_choice_does_not_change_scalars() {
    let mut r = rng(22);
    let h = Hermitian::new(diag_real(&[0.0, 1.0, 1.0, 2.5])).unwrap();
    let beta = 0.6;
    let rho = gibbs_state(&h, beta).unwrap();
    let q_dist = boltzmann_weights(&[-1.0, 0.3, 0.3, 0.9], beta);
    let channel = random_channel(&mut r, 4, 2);
    let scalars = |basis_i: &Operator, basis_f: &Operator| {
        let spec = ProtocolSpec::new(
            rho.clone(),
            Measurement::projective_from_basis(basis_i).unwrap(),
            channel.clone(),
            Measurement::projective_from_basis(basis_f).unwrap(),
            q_dist.clone(),
        )
        .unwrap();
        let pdf = forward_pdf(&spec, VChoice::LogPQ).unwrap();
        (efficacy(&spec).unwrap().value(), pdf.mean(), pdf.mgf(0.45))
    };
    let base = scalars(&Operator::identity(4, 4), &Operator::identity(4, 4));
    for _ in 0..5 {
        let mut rot = Operator::identity(4, 4);
        let u = haar_unitary(&mut r, 2);
        rot.view_mut((1, 1), (2, 2)).copy_from(&u);
        let other = scalars(&rot, &dagger(&rot));
        assert!((base.0 - other.0).abs() < 1e-9);
        assert!((base.1 - other.1).abs() < 1e-9);
        assert!((base.2 - other.2).abs() < 1e-9);
    }
}

#[test]
fn support_violation_propagates_infinity() {
    let d = 2;
    let spec = ProtocolSpec::new(
        DensityMatrix::maximally_mixed(d),
        Measurement::computational(d),
        Channel::identity(d),
        Measurement::computational(d),
        vec![1.0, 0.0],
    )
    .unwrap();
    let dec = projective_entropy_identity(&spec, None).unwrap();
    assert!(dec.skipped);
    assert_eq!(dec.mean_v, f64::INFINITY);
    assert_eq!(dec.distance, f64::INFINITY);
    let rho_q = DensityMatrix::new(spec.rho_q()).unwrap();
    assert_eq!(relative_entropy(&DensityMatrix::maximally_mixed(2), &rho_q), f64::INFINITY);
    let g = generalized_entropy_identity(&spec).unwrap();
    assert!(g.skipped && g.residual.is_nan());
    assert_eq!(g.kl_fq, f64::INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_pdf_is_normalized(seed in any::<u64>(), d in 2usize..5, unital in any::<bool>(), gen in any::<bool>()) {
        let mut r = rng(seed);
        let spec = random_protocol(&mut r, d, unital, gen);
        let pdf = forward_pdf(&spec, VChoice::LogPQ).unwrap();
        prop_assert!((pdf.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!(pdf.len() <= spec.p().len() * spec.q().len());
    }

    #[test]
    fn second_law_margin_is_nonnegative(seed in any::<u64>(), d in 2usize..5, gen in any::<bool>()) {
        let mut r = rng(seed);
        let spec = random_protocol(&mut r, d, false, gen);
        prop_assert!(second_law_check(&spec).unwrap().margin >= -1e-9);
        match gamma_bound(&spec) {
            Ok(g) => prop_assert!(g.holds),
            Err(_) => prop_assert!(gen),
        }
    }

    #[test]
    fn mean_is_derivative_of_mgf(seed in any::<u64>(), d in 2usize..4) {
        let mut r = rng(seed);
        let spec = random_protocol(&mut r, d, false, false);
        let pdf = forward_pdf(&spec, VChoice::LogPQ).unwrap();
        let h = 1e-5;
        let fd = (pdf.mgf(h) - pdf.mgf(-h)) / (2.0 * h);
        prop_assert!((fd - pdf.mean()).abs() < 1e-6);
    }
}
