use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fluctuation::{forward_pdf, VChoice};
use crate::linalg::pauli::{sigma_x, sigma_z};
use crate::linalg::{c, relative_entropy};
use crate::random::random_hermitian;

const BETA: f64 = 1.0 / 2.3;

fn herm(op: Operator) -> Hermitian {
    Hermitian::new(op).unwrap()
}

#[test]
fn mean_v_at_thermal_end_state_is_entropy_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [2, 3, 4] {
        let h0 = random_hermitian(&mut rng, d);
        let h1 = random_hermitian(&mut rng, d);
        let beta = 0.7;
        let ep = ThermalEndpoints::from_hamiltonians(&h0, &h1, beta).unwrap();
        let f = boltzmann_weights(h1.eig().values(), beta);
        let want = von_neumann_entropy(&gibbs_state(&h1, beta).unwrap())
            - von_neumann_entropy(&gibbs_state(&h0, beta).unwrap());
        assert!((ep.mean_v(&f).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn mean_v_vanishes_without_change() {
    let h = herm(sigma_x() * c(1.3, 0.0) + sigma_z() * c(0.4, 0.0));
    let ep = ThermalEndpoints::from_hamiltonians(&h, &h, BETA).unwrap();
    let f = boltzmann_weights(h.eig().values(), BETA);
    assert!(ep.mean_v(&f).unwrap().abs() < 1e-14);
    assert!(matches!(ep.mean_v(&[1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn anneal_endpoints_use_computational_order() {
    let spec = AnnealSpec::two_qubit(1.0 / 3.0, 0.5, 5.0, BETA, 0.0).unwrap();
    let ep = ThermalEndpoints::for_anneal(&spec).unwrap();
    let b = crate::ame::B1_GHZ;
    let want = [-7.0 / 6.0 * b, 0.5 * b, 0.5 * b, (2.0 / 3.0 - 0.5) * b];
    for (e, w) in ep.final_energies.iter().zip(want) {
        assert!((e - w).abs() < 1e-12);
    }
    // -A(0)(X1 + X2) has levels -2A, 0, 0, 2A.
    let a = crate::ame::A0_GHZ;
    let z0 = 2.0 + 2.0 * (2.0 * BETA * a).cosh();
    let want0 = (-2.0 * a * (2.0 * BETA * a).exp() + 2.0 * a * (-2.0 * BETA * a).exp()) / z0;
    assert!((ep.initial_mean_energy - want0).abs() < 1e-10);
}

proptest! {
    #[test]
    fn mean_v_is_affine_in_occupations(
        a in prop::collection::vec(0.01f64..1.0, 4),
        b in prop::collection::vec(0.01f64..1.0, 4),
        lambda in 0.0f64..1.0,
    ) {
        let spec = AnnealSpec::two_qubit(1.0 / 3.0, 0.5, 5.0, BETA, 0.0).unwrap();
        let ep = ThermalEndpoints::for_anneal(&spec).unwrap();
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (fa, fb) = (norm(&a), norm(&b));
        let mix: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let lhs = ep.mean_v(&mix).unwrap();
        let rhs = lambda * ep.mean_v(&fa).unwrap() + (1.0 - lambda) * ep.mean_v(&fb).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }
}

#[test]
fn closed_system_without_change_gives_zero_work() {
    let h = herm(sigma_z() * c(0.8, 0.0));
    let spec = closed_system_scenario(&h, &h, Channel::identity(2), BETA).unwrap();
    let pdf = forward_pdf(&spec, VChoice::LogPQ).unwrap();
    assert!((pdf.mgf(-1.0) - 1.0).abs() < 1e-14);
    assert!(pdf.mean().abs() < 1e-14);
}

#[test]
fn sudden_qubit_quench_matches_two_level_sums() {
    let (a, b, beta) = (1.1, 0.6, 0.9);
    let h0 = herm(sigma_x() * c(-a, 0.0));
    let h1 = herm(sigma_z() * c(-b, 0.0));
    let spec = closed_system_scenario(&h0, &h1, Channel::identity(2), beta).unwrap();
    let pdf = forward_pdf(&spec, VChoice::LogPQ).unwrap();
    // Levels -a, a and -b, b; every overlap squared is 1/2.
    let (z0, z1) = (2.0 * (beta * a).cosh(), 2.0 * (beta * b).cosh());
    let df = -(z1 / z0).ln() / beta;
    let mut mean = 0.0;
    let mut jarzynski = 0.0;
    for ea in [-a, a] {
        for eb in [-b, b] {
            let w = (-beta * ea).exp() / z0 * 0.5;
            let v = beta * (eb - ea - df);
            mean += w * v;
            jarzynski += w * (-v).exp();
        }
    }
    assert!((jarzynski - 1.0).abs() < 1e-12);
    assert!((pdf.mgf(-1.0) - 1.0).abs() < 1e-12);
    assert!((pdf.mean() - mean).abs() < 1e-12);
    // <v> = S(E(rho_G(0)) || rho_G(t_f)) for unitary evolution.
    let rho0 = gibbs_state(&h0, beta).unwrap();
    let rho1 = gibbs_state(&h1, beta).unwrap();
    assert!((relative_entropy(&rho0, &rho1) - mean).abs() < 1e-12);
}

#[test]
fn closed_anneal_has_unit_efficacy() {
    let spec = AnnealSpec::two_qubit(1.0 / 3.0, 0.5, 0.2, BETA, 0.0).unwrap();
    let run = simulate(&spec, &PropagateOptions::default()).unwrap();
    let q = run.qje().unwrap();
    assert!((q.lhs - 1.0).abs() < 1e-7 && (q.rhs - 1.0).abs() < 1e-7, "{q:?}");
    let m = run.first_moment().unwrap();
    assert!(m.residual < 1e-9, "{m:?}");
}

#[test]
fn device_anneal_passes_both_checks() {
    let spec = AnnealSpec::two_qubit(1.0 / 3.0, 0.5, 5.0, BETA, 2.34e-3).unwrap();
    let run = simulate(&spec, &PropagateOptions::default()).unwrap();
    let q = run.qje().unwrap();
    assert!(q.residual <= 1e-6, "{q:?}");
    // Relaxation to the ground state maps 1 close to d |g><g|.
    assert!(q.rhs > 1.5 && q.rhs <= 4.0 + 1e-9, "{q:?}");
    let m = run.first_moment().unwrap();
    assert!(m.residual <= 1e-6, "{m:?}");
    assert!(run.mean_v() > 0.0);
    let total: f64 = run.f.iter().sum();
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn zero_coupling_keeps_antiparallel_states_symmetric() {
    let spec = AnnealSpec::two_qubit(1.0 / 3.0, 0.0, 1.0, BETA, 2.34e-3).unwrap();
    let run = simulate(&spec, &PropagateOptions::default()).unwrap();
    assert!((run.f[1] - run.f[2]).abs() < 1e-8, "{:?}", run.f);
}

#[test]
fn state_labels_roundtrip() {
    assert_eq!(state_label(1, 2), "01");
    assert_eq!(state_label(2, 2), "10");
    for k in 0..8 {
        assert_eq!(parse_state_label(&state_label(k, 3), 3).unwrap(), k);
    }
    assert!(parse_state_label("012", 3).is_err());
    assert!(parse_state_label("01", 3).is_err());
}

#[test]
fn counts_csv_roundtrip_and_grouping() {
    let text = "J,t_f_us,state_label,count\n0.5,5,00,90\n0.5,5,11,10\n0.25,5,01,3\n0.25,5,00,7\n0.5,5,00,0\n";
    let points = read_counts_csv(text.as_bytes(), 2).unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0].counts.as_deref(), Some(&[90, 0, 0, 10][..]));
    assert_eq!(points[1].f, vec![0.7, 0.3, 0.0, 0.0]);
    let mut buf = Vec::new();
    write_counts_csv(&mut buf, &points, 2).unwrap();
    let back = read_counts_csv(buf.as_slice(), 2).unwrap();
    assert_eq!(back, points);
    assert!(read_counts_csv("J,t_f_us,state_label,count\n".as_bytes(), 2).is_err());
    assert!(read_counts_csv("J,t_f_us,state_label,count\n0.5,5,00,0\n".as_bytes(), 2).is_err());
    assert!(read_counts_csv("J,t_f_us,state_label,count\n0.5,5,2,1\n".as_bytes(), 2).is_err());
}

#[test]
fn multinomial_sampling() {
    let f = [0.5, 0.3, 0.15, 0.05];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let counts = sample_counts(&mut rng, &f, 1_000_000).unwrap();
    assert_eq!(counts.iter().sum::<u64>(), 1_000_000);
    for (n, p) in counts.iter().zip(f) {
        let sd = (1e6 * p * (1.0 - p)).sqrt();
        assert!((*n as f64 - 1e6 * p).abs() < 5.0 * sd);
    }
    let again = sample_counts(&mut ChaCha8Rng::seed_from_u64(11), &f, 1_000_000).unwrap();
    assert_eq!(counts, again);
    assert_eq!(sample_counts(&mut rng, &[0.0, 1.0], 17).unwrap(), vec![0, 17]);
}

fn short_simulator() -> Simulator {
    let template = AnnealSpec::two_qubit(1.0 / 3.0, 0.5, 0.2, BETA, 0.0).unwrap();
    Simulator::new(template, PropagateOptions::default(), 1).unwrap()
}

fn quick_fit() -> FitOptions {
    FitOptions { points_per_decade: 3, ln_tol: 1e-2, max_iterations: 100 }
}

#[test]
fn simulator_caches_runs() {
    let sim = short_simulator();
    let a = sim.mean_v(0.1, 0.2, 1e-3).unwrap();
    let b = sim.mean_v(0.1, 0.2, 1e-3).unwrap();
    assert_eq!(a, b);
    assert_eq!(sim.evaluations(), 1);
}

#[test]
fn noiseless_fit_recovers_coupling() {
    let sim = short_simulator();
    let conditions = [(0.1, 0.2), (0.2, 0.2)];
    let kappa_star = 1.3e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data = synthetic_points(&sim, &conditions, kappa_star, None, &mut rng).unwrap();
    let fit = fit_kappa(&data, &sim, (3e-4, 3e-3), &quick_fit()).unwrap();
    assert!(fit.converged && !fit.boundary && !fit.under_determined);
    assert!((fit.kappa_hat / kappa_star - 1.0).abs() < 2e-2, "{fit:?}");
    assert!(fit.msd_curve.iter().all(|&(_, m)| m >= fit.msd_hat));
    assert!(fit.msd_curve.windows(2).all(|w| w[0].0 < w[1].0));
}

#[test]
fn fit_flags_boundary_and_single_condition() {
    let sim = short_simulator();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data = synthetic_points(&sim, &[(0.1, 0.2)], 3e-3, None, &mut rng).unwrap();
    let fit = fit_kappa(&data, &sim, (3e-4, 1e-3), &quick_fit()).unwrap();
    assert!(fit.boundary, "{fit:?}");
    assert!(fit.under_determined);
    assert!((fit.kappa_hat - 1e-3).abs() < 1e-3 * 2e-2);
}

#[test]
fn fit_rejects_bad_input() {
    let sim = short_simulator();
    assert!(fit_kappa(&[], &sim, (1e-3, 1e-2), &FitOptions::default()).is_err());
    let p = ExperimentPoint::from_distribution(0.5, 0.2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(fit_kappa(std::slice::from_ref(&p), &sim, (1e-2, 1e-3), &FitOptions::default()).is_err());
    assert!(fit_kappa(std::slice::from_ref(&p), &sim, (0.0, 1e-3), &FitOptions::default()).is_err());
    let wrong = ExperimentPoint::from_distribution(0.5, 0.2, vec![1.0, 0.0]).unwrap();
    assert!(fit_kappa(&[wrong], &sim, (1e-3, 1e-2), &FitOptions::default()).is_err());
}

#[test]
fn noisy_fit_is_seeded() {
    let sim = short_simulator();
    let conditions = [(0.1, 0.2), (0.2, 0.2)];
    let a = synthetic_points(&sim, &conditions, 1e-3, Some(1000), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = synthetic_points(&sim, &conditions, 1e-3, Some(1000), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|p| p.shots() == Some(1000)));
}
