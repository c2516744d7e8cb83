use std::collections::HashMap;
use std::sync::Mutex;

use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;

use super::data::ExperimentPoint;
use super::{simulate, ThermalEndpoints};
use crate::ame::{AnnealSpec, PropagateOptions};
use crate::error::{Error, Result};

type Key = (u64, u64, u64);

/// Runs anneals for a fixed template at varying `(J, t_f, kappa)` and
/// remembers the final occupations, so fits and sweeps that revisit a
/// parameter set do not integrate it again.
pub struct Simulator {
    template: AnnealSpec,
    options: PropagateOptions,
    pool: rayon::ThreadPool,
    cache: Mutex<HashMap<Key, Vec<f64>>>,
}

impl Simulator {
    /// `threads = 0` uses one thread per logical core.
    pub fn new(template: AnnealSpec, options: PropagateOptions, threads: usize) -> Result<Self> {
        if template.couplings().is_empty() {
            return Err(Error::validation("the template needs at least one coupling to vary J"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::validation(format!("cannot start worker threads: {e}")))?;
        Ok(Simulator { template, options, pool, cache: Mutex::new(HashMap::new()) })
    }

    pub fn template(&self) -> &AnnealSpec {
        &self.template
    }

    pub fn options(&self) -> &PropagateOptions {
        &self.options
    }

    pub fn spec(&self, j: f64, t_f_us: f64, kappa: f64) -> Result<AnnealSpec> {
        self.template.clone().with_coupling_strength(j)?.with_t_f(t_f_us)?.with_kappa(kappa)
    }

    /// Number of distinct anneals integrated so far.
    pub fn evaluations(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Computational-basis occupations at `t_f`.
    pub fn occupations(&self, j: f64, t_f_us: f64, kappa: f64) -> Result<Vec<f64>> {
        let key = (j.to_bits(), t_f_us.to_bits(), kappa.to_bits());
        if let Some(f) = self.cache.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let run = simulate(&self.spec(j, t_f_us, kappa)?, &self.options)?;
        debug!("J = {j}, t_f = {t_f_us} us, kappa = {kappa:e}: <v> = {:e}", run.mean_v());
        self.cache.lock().unwrap().insert(key, run.f.clone());
        Ok(run.f)
    }

    pub fn occupations_many(&self, conditions: &[(f64, f64)], kappa: f64) -> Result<Vec<Vec<f64>>> {
        self.pool.install(|| conditions.par_iter().map(|&(j, t)| self.occupations(j, t, kappa)).collect())
    }

    pub fn endpoints(&self, j: f64, t_f_us: f64) -> Result<ThermalEndpoints> {
        ThermalEndpoints::for_anneal(&self.spec(j, t_f_us, 0.0)?)
    }

    pub fn mean_v(&self, j: f64, t_f_us: f64, kappa: f64) -> Result<f64> {
        self.endpoints(j, t_f_us)?.mean_v(&self.occupations(j, t_f_us, kappa)?)
    }

    /// `<v>` at every condition for one `kappa`.
    pub fn mean_v_many(&self, conditions: &[(f64, f64)], kappa: f64) -> Result<Vec<f64>> {
        let occupations = self.occupations_many(conditions, kappa)?;
        conditions.iter().zip(occupations).map(|(&(j, t), f)| self.endpoints(j, t)?.mean_v(&f)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    /// Log-uniform pre-scan density.
    pub points_per_decade: usize,
    /// Golden-section stops when the bracket in `ln kappa` is this narrow.
    pub ln_tol: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { points_per_decade: 11, ln_tol: 1e-4, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub kappa_hat: f64,
    pub msd_hat: f64,
    /// Every evaluated `(kappa, MSD)`, sorted by `kappa`.
    pub msd_curve: Vec<(f64, f64)>,
    /// The minimum sits at an end of the search range.
    pub boundary: bool,
    /// Fewer than two distinct conditions constrain the single parameter.
    pub under_determined: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes `MSD(kappa) = (1/n) sum_i (<v>_data,i - <v>(kappa)_i)^2` over
/// `kappa in [lo, hi]`: log-uniform pre-scan, then golden-section search
/// in `ln kappa` around the best grid point.
pub fn fit_kappa(points: &[ExperimentPoint], sim: &Simulator, range: (f64, f64), opts: &FitOptions) -> Result<FitResult> {
    let (lo, hi) = range;
    if points.is_empty() {
        return Err(Error::validation("fit needs at least one data point"));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::validation(format!("invalid kappa search range [{lo}, {hi}]")));
    }
    if opts.points_per_decade < 2 {
        return Err(Error::validation("pre-scan needs at least two points per decade"));
    }
    let dim = sim.template().dim();
    let mut conditions = Vec::with_capacity(points.len());
    let mut measured = Vec::with_capacity(points.len());
    for p in points {
        if p.f.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: p.f.len() });
        }
        conditions.push((p.j, p.t_f_us));
        measured.push(sim.endpoints(p.j, p.t_f_us)?.mean_v(&p.f)?);
    }
    let mut distinct = conditions.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let under_determined = distinct.len() < 2;

    let mut curve: Vec<(f64, f64)> = Vec::new();
    let mut msd = |kappa: f64| -> Result<f64> {
        let v = sim.mean_v_many(&conditions, kappa)?;
        let m = v.iter().zip(&measured).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / v.len() as f64;
        curve.push((kappa, m));
        Ok(m)
    };

    let (a, b) = (lo.ln(), hi.ln());
    let decades = (hi / lo).log10();
    let intervals = ((decades * (opts.points_per_decade - 1) as f64).ceil() as usize).max(1);
    let grid: Vec<f64> = (0..=intervals).map(|i| a + (b - a) * i as f64 / intervals as f64).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        values.push(msd(x.exp())?);
    }
    let best = (0..grid.len()).min_by(|&i, &k| values[i].partial_cmp(&values[k]).unwrap()).unwrap();
    let mut left = grid[best.saturating_sub(1)];
    let mut right = grid[(best + 1).min(grid.len() - 1)];

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = right - ratio * (right - left);
    let mut x2 = left + ratio * (right - left);
    let mut f1 = msd(x1.exp())?;
    let mut f2 = msd(x2.exp())?;
    let mut iterations = 0;
    while right - left > opts.ln_tol && iterations < opts.max_iterations {
        iterations += 1;
        if f1 <= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - ratio * (right - left);
            f1 = msd(x1.exp())?;
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + ratio * (right - left);
            f2 = msd(x2.exp())?;
        }
    }
    let converged = right - left <= opts.ln_tol;

    curve.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    curve.dedup_by(|p, q| p.0 == q.0);
    let (kappa_hat, msd_hat) = curve.iter().copied().min_by(|p, q| p.1.partial_cmp(&q.1).unwrap()).unwrap();
    let edge = opts.ln_tol.max(1e-12);
    let boundary = (kappa_hat.ln() - a).abs() <= edge || (b - kappa_hat.ln()).abs() <= edge;
    info!("kappa fit: {kappa_hat:e} (MSD {msd_hat:e}) after {} evaluations", curve.len());
    Ok(FitResult { kappa_hat, msd_hat, msd_curve: curve, boundary, under_determined, converged, iterations })
}
