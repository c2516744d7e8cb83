//! One step of the master equation in the adiabatic frame.
//!
//! In the frame of tracked instantaneous eigenvectors `W(s)` the state
//! obeys `d rho/ds = -[K, rho] - i T [E, rho] + T D(rho)` with `K = W^T W'`
//! real antisymmetric. Over a step the dynamical phases are removed
//! exactly; the remaining generator is integrated with a Magnus expansion
//! whose oscillatory integrals are evaluated in closed form, so the step
//! size is set by how fast `H(s)` changes rather than by `T |E|`.

use nalgebra::DMatrix;
use std::sync::OnceLock;

use super::frame::{align, coupling, eigen_sorted, Eigen};
use super::lindblad::{frame_dissipator, z_in_basis, Bath};
use super::moments::{moment_table, triangle_kernel, TriangleKernel, NMAX};
use super::AnnealSpec;
use crate::error::Result;
use crate::linalg::{c, C64};

/// Interior Gauss-Legendre nodes at `x = -R, 0, R` on `[-1, 1]`.
const R: f64 = 0.774_596_669_241_483_4;
/// Highest `x` degree kept in `K e^{i chi}`.
const PDEG: usize = NMAX - 3;
/// Highest degree kept in the second-order term.
const QDEG: usize = 12;
/// Steps whose residual phase polynomial exceeds this are refused.
pub(crate) const CHIRP_LIMIT: f64 = 0.5;

pub(crate) struct Context<'a> {
    pub spec: &'a AnnealSpec,
    pub bath: Bath,
    /// `t_f` in ns.
    pub big_t: f64,
    pub deg_tol: f64,
}

struct Node {
    eig: Eigen,
    k: DMatrix<f64>,
    slopes: Vec<f64>,
    diss: DMatrix<C64>,
}

pub(crate) struct Step {
    pub phi: DMatrix<C64>,
    /// Basis at the last node, the reference for the next step.
    pub last_basis: DMatrix<f64>,
    /// Sum of the residual phase coefficients, at most [`CHIRP_LIMIT`].
    pub chirp: f64,
}

pub(crate) enum Outcome {
    Done(Step),
    /// Phases vary too nonlinearly over the step.
    Chirp(f64),
}

impl<'a> Context<'a> {
    fn node(&self, s: f64, reference: &DMatrix<f64>) -> Result<Node> {
        let eig = align(reference, eigen_sorted(&self.spec.h_real(s)), self.deg_tol);
        let (k, slopes) = coupling(&eig, &self.spec.dh_real(s), self.deg_tol);
        let z = z_in_basis(self.spec, &eig.vectors);
        let diss = frame_dissipator(&eig.energies, &z, &self.bath)? * c(self.big_t, 0.0);
        Ok(Node { eig, k, slopes, diss })
    }

    pub fn step(&self, s0: f64, h: f64, reference: &DMatrix<f64>) -> Result<Outcome> {
        let half = 0.5 * h;
        let mid = s0 + half;
        let n_minus = self.node(mid - R * half, reference)?;
        let n_zero = self.node(mid, &n_minus.eig.vectors)?;
        let n_plus = self.node(mid + R * half, &n_zero.eig.vectors)?;
        let nodes = [&n_minus, &n_zero, &n_plus];
        let d = n_zero.eig.energies.len();

        // Phase polynomials theta_a(x) = T (h/2) int_0^x E_a.
        let energy_coef: Vec<[f64; 6]> = (0..d)
            .map(|a| {
                let values: Vec<f64> = nodes.iter().map(|n| n.eig.energies[a]).collect();
                let slopes: Vec<f64> = nodes.iter().map(|n| half * n.slopes[a]).collect();
                hermite_quintic(&values, &slopes)
            })
            .collect();
        let scale = self.big_t * half;
        let phase_poly: Vec<[f64; 7]> = energy_coef
            .iter()
            .map(|e| {
                let mut p = [0.0; 7];
                for k in 0..6 {
                    p[k + 1] = scale * e[k] / (k + 1) as f64;
                }
                p
            })
            .collect();

        let k0 = &n_zero.k;
        let k1 = (&n_plus.k - &n_minus.k) / (2.0 * R);
        let k2 = (&n_plus.k + &n_minus.k - &n_zero.k * 2.0) / (2.0 * R * R);

        let theta = DMatrix::from_fn(d, d, |a, b| phase_poly[a][1] - phase_poly[b][1]);
        let mut chirp_bound: f64 = 0.0;
        let mut active = vec![false; d * d];
        for a in 0..d {
            for b in 0..d {
                if a != b && (k0[(a, b)] != 0.0 || k1[(a, b)] != 0.0 || k2[(a, b)] != 0.0) {
                    active[a + b * d] = true;
                    let chi: f64 = (2..7).map(|k| (phase_poly[a][k] - phase_poly[b][k]).abs()).sum();
                    chirp_bound = chirp_bound.max(chi);
                }
            }
        }
        if chirp_bound > CHIRP_LIMIT {
            return Ok(Outcome::Chirp(chirp_bound));
        }

        // P_ab(x) = K_ab(x) e^{i chi_ab(x)} as a polynomial in x.
        let mut p_poly: Vec<Vec<C64>> = vec![Vec::new(); d * d];
        for a in 0..d {
            for b in 0..d {
                if !active[a + b * d] {
                    continue;
                }
                let chi: Vec<f64> = (0..7).map(|k| if k < 2 { 0.0 } else { phase_poly[a][k] - phase_poly[b][k] }).collect();
                let e = exp_i_poly(&chi, PDEG);
                let kq = [k0[(a, b)], k1[(a, b)], k2[(a, b)]];
                let mut p = vec![C64::new(0.0, 0.0); PDEG + 1];
                for (i, ei) in e.iter().enumerate() {
                    for (j, kj) in kq.iter().enumerate() {
                        if i + j <= PDEG {
                            p[i + j] += ei * *kj;
                        }
                    }
                }
                p_poly[a + b * d] = p;
            }
        }

        let thetas: Vec<f64> = (0..d * d).map(|i| theta[(i % d, i / d)]).collect();
        let moms = moment_table(&thetas, NMAX);

        // Kint_k = int tau^k K(tau) dtau in the phase-free frame.
        let mut kint: Vec<DMatrix<C64>> = (0..4).map(|_| DMatrix::zeros(d, d)).collect();
        for a in 0..d {
            for b in 0..d {
                let idx = a + b * d;
                if !active[idx] {
                    continue;
                }
                let p = &p_poly[idx];
                let m = &moms[idx];
                for (k, out) in kint.iter_mut().enumerate() {
                    let sum: C64 = p.iter().enumerate().map(|(n, pn)| pn * m[n + k]).sum();
                    out[(a, b)] = sum * half.powi(k as i32 + 1);
                }
            }
        }

        // Q = (1/2) int int_{tau1 > tau2} [K(tau1), K(tau2)].
        let zero = C64::new(0.0, 0.0);
        let truncated: Vec<&[C64]> =
            p_poly.iter().map(|p| if p.is_empty() { &p[..] } else { &p[..=effective_degree(p).min(QDEG)] }).collect();
        let kernels: Vec<Option<TriangleKernel>> = (0..d * d)
            .map(|idx| active[idx].then(|| triangle_kernel(truncated[idx], thetas[idx])))
            .collect();
        // int x^j e^{i theta x} against the truncated polynomials.
        let plain: Vec<C64> = (0..d * d)
            .map(|idx| truncated[idx].iter().zip(&moms[idx]).map(|(p, m)| p * m).sum())
            .collect();
        let mut q = DMatrix::<C64>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut acc = zero;
                for cc in 0..d {
                    let (ac, cb) = (a + cc * d, cc + b * d);
                    let Some(kern) = kernels[cb].as_ref().filter(|_| active[ac]) else {
                        continue;
                    };
                    let big = if kern.sum_angle { &moms[a + b * d] } else { &moms[ac] };
                    let mut nested = zero;
                    for (j, pj) in truncated[ac].iter().enumerate() {
                        let inner: C64 = kern.g.iter().zip(&big[j..]).map(|(g, m)| g * m).sum();
                        nested += pj * inner;
                    }
                    acc += (nested - plain[ac] * kern.e) * 2.0 - plain[ac] * plain[cb];
                }
                q[(a, b)] = acc * (0.5 * half * half);
            }
        }

        // Dissipator, quadratic in tau.
        let tau = R * half;
        let s0m = n_zero.diss.clone();
        let s1m = (&n_plus.diss - &n_minus.diss) / c(2.0 * tau, 0.0);
        let s2m = (&n_plus.diss + &n_minus.diss - &n_zero.diss * c(2.0, 0.0)) / c(2.0 * tau * tau, 0.0);
        let a_k: Vec<DMatrix<C64>> = kint.iter().map(|k| -ad(k)).collect();

        let h3 = h * h * h / 12.0;
        let mut omega = &s0m * c(h, 0.0) + &s2m * c(h3, 0.0) + commutator(&s1m, &s0m) * c(h3, 0.0) + &a_k[0];
        omega -= commutator(&s0m, &a_k[1]);
        omega += commutator(&s1m, &(&a_k[0] * c(half * half, 0.0) - &a_k[2])) * c(0.5, 0.0);
        omega -= commutator(&s2m, &a_k[3]) * c(1.0 / 3.0, 0.0);
        omega += ad(&q);
        let y = omega.exp();

        let end_phase = |a: usize, x: f64| -> f64 {
            phase_poly[a].iter().rev().fold(0.0, |acc, p| acc * x + p)
        };
        let phi = DMatrix::from_fn(d * d, d * d, |row, col| {
            let (ra, rb) = (row % d, row / d);
            let (ca, cb) = (col % d, col / d);
            let out = -(end_phase(ra, 1.0) - end_phase(rb, 1.0));
            let inn = end_phase(ca, -1.0) - end_phase(cb, -1.0);
            y[(row, col)] * C64::from_polar(1.0, out + inn)
        });
        Ok(Outcome::Done(Step { phi, last_basis: n_plus.eig.vectors, chirp: chirp_bound }))
    }
}

/// `ad(X) = I (x) X - X^T (x) I`, the column-stacking form of `[X, .]`.
pub(crate) fn ad(x: &DMatrix<C64>) -> DMatrix<C64> {
    let d = x.nrows();
    let mut out = DMatrix::zeros(d * d, d * d);
    for col in 0..d {
        for r in 0..d {
            for r2 in 0..d {
                out[(r + col * d, r2 + col * d)] += x[(r, r2)];
                out[(col + r * d, col + r2 * d)] -= x[(r2, r)];
            }
        }
    }
    out
}

fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

/// Last index whose coefficient is not negligible against the largest one.
fn effective_degree(p: &[C64]) -> usize {
    let max = p.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    p.iter().rposition(|v| v.norm() > 1e-14 * max).unwrap_or(0)
}

/// Taylor coefficients of `e^{i chi(x)}` up to `x^deg`, for a real
/// polynomial `chi` without constant term.
fn exp_i_poly(chi: &[f64], deg: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); deg + 1];
    out[0] = C64::new(1.0, 0.0);
    let mut term = out.clone();
    let bound: f64 = chi.iter().map(|v| v.abs()).sum();
    if bound == 0.0 {
        return out;
    }
    let mut size = 1.0;
    for n in 1.. {
        let mut next = vec![C64::new(0.0, 0.0); deg + 1];
        for (i, t) in term.iter().enumerate() {
            if *t == C64::new(0.0, 0.0) {
                continue;
            }
            for (j, cj) in chi.iter().enumerate() {
                if *cj != 0.0 && i + j <= deg {
                    next[i + j] += t * C64::new(0.0, *cj / n as f64);
                }
            }
        }
        term = next;
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
        size *= bound / n as f64;
        if size < 1e-18 {
            break;
        }
    }
    out
}

/// Coefficients `c_0..c_5` of the quintic through values and first
/// derivatives at `x = -R, 0, R`.
fn hermite_quintic(values: &[f64], slopes: &[f64]) -> [f64; 6] {
    static INVERSE: OnceLock<DMatrix<f64>> = OnceLock::new();
    let inv = INVERSE.get_or_init(|| {
        let xs = [-R, 0.0, R];
        let mut m = DMatrix::zeros(6, 6);
        for (i, &x) in xs.iter().enumerate() {
            for k in 0..6 {
                m[(2 * i, k)] = x.powi(k as i32);
                if k > 0 {
                    m[(2 * i + 1, k)] = k as f64 * x.powi(k as i32 - 1);
                }
            }
        }
        m.try_inverse().expect("Hermite system is regular")
    });
    let rhs = DMatrix::from_fn(6, 1, |r, _| if r % 2 == 0 { values[r / 2] } else { slopes[r / 2] });
    let coef = inv * rhs;
    std::array::from_fn(|k| coef[(k, 0)])
}
