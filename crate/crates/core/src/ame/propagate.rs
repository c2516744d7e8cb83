use log::debug;
use nalgebra::DMatrix;

use super::frame::{align, eigen_sorted};
use super::lindblad::Bath;
use super::magnus::{Context, Outcome, Step, CHIRP_LIMIT};
use super::AnnealSpec;
use crate::error::{Error, Result};
use crate::fluctuation::TransitionMatrix;
use crate::linalg::{c, free_energy, Hermitian, Operator, C64};
use crate::tolerance;

/// Integrator settings; `s = t / t_f` is the integration variable.
#[derive(Debug, Clone)]
pub struct PropagateOptions {
    /// Accepted local error per step, as the largest entry of the
    /// difference between one step and two half steps.
    pub tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Keep the populations of the propagated operator after every step.
    pub record: bool,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions { tol: tolerance::get().ode, h_init: 1e-3, h_max: 0.05, h_min: 1e-13, max_steps: 1_000_000, record: false }
    }
}

impl PropagateOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub chirp_rejected: usize,
    pub smallest_step: f64,
}

/// Diagonal of the propagated operator in the instantaneous eigenbasis.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub t_us: f64,
    pub populations: Vec<f64>,
    pub trace_residual: f64,
}

/// The evolution map from `t = 0` to `t_f` for one spec, stored as a
/// superoperator between the eigenbases of `H(0)` and `H(t_f)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    frame: DMatrix<C64>,
    w0: DMatrix<f64>,
    w1: DMatrix<f64>,
    initial_energies: Vec<f64>,
    final_energies: Vec<f64>,
    final_order: Vec<usize>,
    stats: StepStats,
    trajectory: Vec<TracePoint>,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evolves an operator given in the computational basis at `t = 0`.
    pub fn apply(&self, x0: &Operator) -> Result<Operator> {
        let d = self.dim;
        if x0.nrows() != d || x0.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x0.nrows() });
        }
        let w0 = self.w0.map(|v| c(v, 0.0));
        let w1 = self.w1.map(|v| c(v, 0.0));
        let x = w0.transpose() * x0 * &w0;
        let v = &self.frame * DMatrix::from_column_slice(d * d, 1, x.as_slice());
        let y = DMatrix::from_column_slice(d, d, v.as_slice());
        Ok(&w1 * y * w1.transpose())
    }

    /// `p_{beta|alpha}` between eigenstates of `H(0)` and of `H(t_f)`, both
    /// in ascending energy. Inside degenerate levels the eigenvectors are
    /// the ones continuously connected to the interior of the anneal.
    pub fn transition_matrix(&self) -> TransitionMatrix {
        let d = self.dim;
        let entries = DMatrix::from_fn(d, d, |beta, alpha| {
            let (b, a) = (self.final_order[beta], alpha);
            self.frame[(b + b * d, a + a * d)].re
        });
        TransitionMatrix::from_parts(entries, vec![true; d])
    }

    pub fn initial_energies(&self) -> &[f64] {
        &self.initial_energies
    }

    /// Final energies in the order of the rows of
    /// [`transition_matrix`](Self::transition_matrix).
    pub fn final_energies(&self) -> &[f64] {
        &self.final_energies
    }

    /// Eigenvectors of `H(0)` as columns, in the order of
    /// [`initial_energies`](Self::initial_energies).
    pub fn initial_basis(&self) -> &DMatrix<f64> {
        &self.w0
    }

    /// Eigenvectors of `H(t_f)` as columns, in the order of
    /// [`final_energies`](Self::final_energies).
    pub fn final_basis(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |r, col| self.w1[(r, self.final_order[col])])
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn trajectory(&self) -> &[TracePoint] {
        &self.trajectory
    }
}

/// Offset from `s = 0` that picks the eigenvectors connected to the anneal
/// inside degenerate levels of `H(0)`.
const LIMIT_OFFSET: f64 = 1e-4;
const DEG_TOL: f64 = 1e-9;
const CHIRP_TARGET: f64 = 0.8 * CHIRP_LIMIT;

/// Half steps of an accepted full step cannot exceed the phase limit.
fn expect_done(outcome: Outcome) -> Result<Step> {
    match outcome {
        Outcome::Done(step) => Ok(step),
        Outcome::Chirp(c) => Err(Error::numerical(format!("half step refused with residual phase {c}"))),
    }
}

/// Integrates the master equation over the whole anneal. When
/// `options.record` is set, populations of `x0` are stored along the way.
pub fn propagate_map(spec: &AnnealSpec, x0: Option<&Operator>, options: &PropagateOptions) -> Result<Propagator> {
    let d = spec.dim();
    let ctx = Context { spec, bath: Bath::for_spec(spec, true)?, big_t: spec.t_f_ns(), deg_tol: DEG_TOL };
    let near = eigen_sorted(&spec.h_real(LIMIT_OFFSET));
    let start = align(&near.vectors, eigen_sorted(&spec.h_real(0.0)), DEG_TOL * 1e3);
    let w0 = start.vectors.clone();

    let mut reference = w0.clone();
    let mut total = DMatrix::<C64>::identity(d * d, d * d);
    let mut stats = StepStats { smallest_step: f64::INFINITY, ..Default::default() };
    let mut trajectory = Vec::new();
    let x0_frame = x0.map(|x| {
        let w = w0.map(|v| c(v, 0.0));
        let y = w.transpose() * x * &w;
        DMatrix::from_column_slice(d * d, 1, y.as_slice())
    });
    let trace0 = x0.map(|x| x.trace()).unwrap_or_default();
    let record = |s: f64, total: &DMatrix<C64>, out: &mut Vec<TracePoint>| {
        if let (true, Some(v0)) = (options.record, &x0_frame) {
            let v = total * v0;
            let populations: Vec<f64> = (0..d).map(|a| v[(a + a * d, 0)].re).collect();
            let tr: C64 = (0..d).map(|a| v[(a + a * d, 0)]).sum();
            out.push(TracePoint { t_us: s * spec.t_f_us(), populations, trace_residual: (tr - trace0).norm() });
        }
    };
    record(0.0, &total, &mut trajectory);

    let mut breaks = spec.schedule().breakpoints();
    breaks.push(1.0);
    let mut s = 0.0;
    let mut h = options.h_init.min(options.h_max);
    for &stop in &breaks {
        while s < stop {
            if stats.accepted + stats.rejected >= options.max_steps {
                return Err(Error::numerical(format!(
                    "step budget of {} exhausted at t = {} us",
                    options.max_steps,
                    s * spec.t_f_us()
                )));
            }
            if h < options.h_min {
                return Err(Error::numerical(format!(
                    "step size underflow ({h:.3e}) at t = {} us",
                    s * spec.t_f_us()
                )));
            }
            let last = stop - s <= h * (1.0 + 1e-9);
            let h_try = if last { stop - s } else { h };
            let full = match ctx.step(s, h_try, &reference)? {
                Outcome::Done(f) => f,
                Outcome::Chirp(c) => {
                    stats.chirp_rejected += 1;
                    h = h_try * (CHIRP_TARGET / c).sqrt();
                    continue;
                }
            };
            let first = expect_done(ctx.step(s, 0.5 * h_try, &reference)?)?;
            let second = expect_done(ctx.step(s + 0.5 * h_try, 0.5 * h_try, &first.last_basis)?)?;
            let fine = &second.phi * &first.phi;
            let err = (&full.phi - &fine).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let mut factor = if err == 0.0 { 3.0 } else { (0.9 * (options.tol / err).powf(1.0 / 3.0)).clamp(0.2, 3.0) };
            // The residual phase grows like h^2.
            factor = factor.min((CHIRP_TARGET / full.chirp.max(1e-300)).sqrt());
            if err <= options.tol {
                total = fine * total;
                reference = second.last_basis;
                s = if last { stop } else { s + h_try };
                stats.accepted += 1;
                stats.smallest_step = stats.smallest_step.min(h_try);
                record(s, &total, &mut trajectory);
                if !last || factor < 1.0 {
                    h = (h_try * factor).min(options.h_max);
                }
            } else {
                stats.rejected += 1;
                h = h_try * factor.min(0.9);
            }
        }
    }
    debug!(
        "anneal propagated: {} steps accepted, {} rejected, {} refused on phase curvature",
        stats.accepted, stats.rejected, stats.chirp_rejected
    );

    let end = align(&reference, eigen_sorted(&spec.h_real(1.0)), DEG_TOL * 1e3);
    let mut final_order: Vec<usize> = (0..d).collect();
    final_order.sort_by(|&i, &j| end.energies[i].partial_cmp(&end.energies[j]).unwrap().then(i.cmp(&j)));
    let final_energies = final_order.iter().map(|&k| end.energies[k]).collect();
    Ok(Propagator {
        dim: d,
        frame: total,
        w0,
        w1: end.vectors,
        initial_energies: start.energies,
        final_energies,
        final_order,
        stats,
        trajectory,
    })
}

/// `X(t_f)` for an operator `X(0)` in the computational basis. Density
/// matrices and the identity are both valid inputs; the latter gives the
/// image of the identity under the anneal.
pub fn propagate(spec: &AnnealSpec, x0: &Operator, options: &PropagateOptions) -> Result<Operator> {
    propagate_map(spec, None, options)?.apply(x0)
}

/// Final-measurement statistics of the anneal started in the Gibbs state
/// of `H(0)`.
#[derive(Debug, Clone)]
pub struct InducedStatistics {
    pub initial_energies: Vec<f64>,
    pub final_energies: Vec<f64>,
    pub transitions: TransitionMatrix,
    /// Gibbs weights of the initial levels.
    pub p: Vec<f64>,
    /// Gibbs weights of the final levels.
    pub q: Vec<f64>,
    /// Final level occupations.
    pub f: Vec<f64>,
    pub delta_f: f64,
    pub propagator: Propagator,
}

pub fn induced_channel_statistics(spec: &AnnealSpec, options: &PropagateOptions) -> Result<InducedStatistics> {
    let prop = propagate_map(spec, None, options)?;
    let transitions = prop.transition_matrix();
    let beta = spec.beta();
    let weights = |e: &[f64]| {
        let m = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = e.iter().map(|x| (-beta * (x - m)).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect::<Vec<_>>()
    };
    let p = weights(prop.initial_energies());
    let q = weights(prop.final_energies());
    let d = spec.dim();
    let f = (0..d).map(|b| (0..d).map(|a| transitions.get(b, a) * p[a]).sum()).collect();
    let h0 = Hermitian::from_part(&spec.h_real(0.0).map(|v| c(v, 0.0)));
    let h1 = Hermitian::from_part(&spec.h_real(1.0).map(|v| c(v, 0.0)));
    let delta_f = free_energy(&h1, beta)? - free_energy(&h0, beta)?;
    Ok(InducedStatistics {
        initial_energies: prop.initial_energies().to_vec(),
        final_energies: prop.final_energies().to_vec(),
        transitions,
        p,
        q,
        f,
        delta_f,
        propagator: prop,
    })
}
