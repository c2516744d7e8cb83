use nalgebra::DMatrix;
use std::sync::Arc;

use super::bath::{LambShiftTable, RateFunction};
use super::frame::{eigen_sorted, Eigen};
use super::AnnealSpec;
use crate::error::Result;
use crate::linalg::{c, Hermitian, Operator, C64};
use crate::tolerance;

/// Pairs `(a, b)` sharing one binned Bohr frequency `omega = E_b - E_a`.
#[derive(Debug, Clone)]
pub(crate) struct Bin {
    pub omega: f64,
    pub pairs: Vec<(usize, usize)>,
}

/// Groups all `d^2` ordered pairs by Bohr frequency; neighbours closer than
/// `omega_bin` are chained into one bin whose frequency is their mean.
pub(crate) fn bohr_bins(energies: &[f64], omega_bin: f64) -> Vec<Bin> {
    let d = energies.len();
    let mut all: Vec<(f64, usize, usize)> =
        (0..d).flat_map(|a| (0..d).map(move |b| (energies[b] - energies[a], a, b))).collect();
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut bins: Vec<Bin> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (w, a, b) in all {
        if w - last > omega_bin || bins.is_empty() {
            if let Some(bin) = bins.last_mut() {
                bin.omega = sum / bin.pairs.len() as f64;
            }
            bins.push(Bin { omega: w, pairs: Vec::new() });
            sum = 0.0;
        }
        let bin = bins.last_mut().unwrap();
        bin.pairs.push((a, b));
        sum += w;
        last = w;
    }
    if let Some(bin) = bins.last_mut() {
        bin.omega = sum / bin.pairs.len() as f64;
    }
    bins
}

/// Rates and Lamb-shift values the generator needs.
#[derive(Debug, Clone)]
pub(crate) struct Bath {
    pub rates: RateFunction,
    pub lamb: Option<Arc<LambShiftTable>>,
    pub omega_bin: f64,
}

impl Bath {
    pub fn for_spec(spec: &AnnealSpec, with_lamb: bool) -> Result<Self> {
        let tol = tolerance::get();
        let lamb = if with_lamb && spec.lamb_shift() && spec.kappa() > 0.0 {
            let width = spec.bohr_bound() + 1.0;
            Some(LambShiftTable::shared(spec.beta(), spec.omega_c(), width, tol.pv)?)
        } else {
            None
        };
        Ok(Bath { rates: spec.rates(), lamb, omega_bin: tol.omega_bin })
    }

    fn lamb_value(&self, omega: f64) -> Result<f64> {
        match &self.lamb {
            Some(t) => Ok(self.rates.kappa * t.unit_value(omega)?),
            None => Ok(0.0),
        }
    }
}

/// `sigma^z_q` in the basis given by the columns of `w`.
pub(crate) fn z_in_basis(spec: &AnnealSpec, w: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    (0..spec.n_qubits())
        .map(|q| {
            let z = spec.z_diag(q);
            let mut zw = w.clone();
            for (r, zr) in z.iter().enumerate() {
                zw.row_mut(r).scale_mut(*zr);
            }
            w.transpose() * zw
        })
        .collect()
}

/// Dissipator plus Lamb-shift commutator as a column-stacking
/// superoperator in the eigenbasis, `D(rho) = -i[H_LS, rho] +
/// sum gamma(omega) (L rho L^dagger - {L^dagger L, rho}/2)`.
pub(crate) fn frame_dissipator(energies: &[f64], z: &[DMatrix<f64>], bath: &Bath) -> Result<DMatrix<C64>> {
    let d = energies.len();
    let mut jump = DMatrix::<f64>::zeros(d * d, d * d);
    let mut decay = DMatrix::<f64>::zeros(d, d);
    let mut lamb = DMatrix::<f64>::zeros(d, d);
    if bath.rates.kappa == 0.0 {
        return Ok(DMatrix::zeros(d * d, d * d));
    }
    for bin in bohr_bins(energies, bath.omega_bin) {
        let g = bath.rates.gamma(bin.omega);
        let s = bath.lamb_value(bin.omega)?;
        for zq in z {
            let entries: Vec<(usize, usize, f64)> =
                bin.pairs.iter().map(|&(a, b)| (a, b, zq[(a, b)])).filter(|e| e.2 != 0.0).collect();
            for &(a, b, lab) in &entries {
                for &(cc, dd, lcd) in &entries {
                    jump[(a + cc * d, b + dd * d)] += g * lab * lcd;
                }
            }
            // L^dagger L = sum over pairs sharing the row index a.
            for &(a, b, lab) in &entries {
                for &(a2, b2, lab2) in &entries {
                    if a == a2 {
                        decay[(b, b2)] += g * lab * lab2;
                        lamb[(b, b2)] += s * lab * lab2;
                    }
                }
            }
        }
    }
    let mut out = jump.map(|x| c(x, 0.0));
    for col in 0..d {
        for r in 0..d {
            for r2 in 0..d {
                // (I (x) M) acts on the row index, (M^T (x) I) on the column.
                let left = C64::new(-0.5 * decay[(r, r2)], -lamb[(r, r2)]);
                out[(r + col * d, r2 + col * d)] += left;
                let right = C64::new(-0.5 * decay[(r2, r)], lamb[(r2, r)]);
                out[(col + r * d, col + r2 * d)] += right;
            }
        }
    }
    Ok(out)
}

/// One jump operator `L_{omega,q}`.
#[derive(Debug, Clone)]
pub struct LindbladOp {
    pub omega: f64,
    pub qubit: usize,
    pub rate: f64,
    pub op: Operator,
}

/// Jump operators at one instant, in the computational basis.
#[derive(Debug, Clone)]
pub struct LindbladSet {
    pub energies: Vec<f64>,
    pub ops: Vec<LindbladOp>,
}

impl LindbladSet {
    /// `sum_omega L_{omega,q}`, which equals `sigma^z_q`.
    pub fn reconstruct(&self, qubit: usize) -> Operator {
        let d = self.energies.len();
        self.ops.iter().filter(|l| l.qubit == qubit).fold(Operator::zeros(d, d), |acc, l| acc + &l.op)
    }
}

fn to_complex(m: &DMatrix<f64>) -> Operator {
    m.map(|x| c(x, 0.0))
}

fn lab(w: &DMatrix<f64>, m: &DMatrix<f64>) -> Operator {
    to_complex(&(w * m * w.transpose()))
}

fn frame_ops(spec: &AnnealSpec, eig: &Eigen, omega_bin: f64) -> Vec<(f64, usize, DMatrix<f64>)> {
    let d = spec.dim();
    let z = z_in_basis(spec, &eig.vectors);
    let mut out = Vec::new();
    for bin in bohr_bins(&eig.energies, omega_bin) {
        for (q, zq) in z.iter().enumerate() {
            let mut l = DMatrix::zeros(d, d);
            for &(a, b) in &bin.pairs {
                l[(a, b)] = zq[(a, b)];
            }
            if l.iter().any(|x| *x != 0.0) {
                out.push((bin.omega, q, l));
            }
        }
    }
    out
}

pub fn lindblad_ops_at(spec: &AnnealSpec, t_us: f64) -> Result<LindbladSet> {
    let s = spec.s_of(t_us)?;
    let eig = eigen_sorted(&spec.h_real(s));
    let rates = spec.rates();
    let ops = frame_ops(spec, &eig, tolerance::get().omega_bin)
        .into_iter()
        .map(|(omega, qubit, l)| LindbladOp { omega, qubit, rate: rates.gamma(omega), op: lab(&eig.vectors, &l) })
        .collect();
    Ok(LindbladSet { energies: eig.energies, ops })
}

/// `H_LS = sum S(omega) L^dagger L`.
pub fn lamb_shift_at(spec: &AnnealSpec, t_us: f64) -> Result<Hermitian> {
    let s = spec.s_of(t_us)?;
    let d = spec.dim();
    let bath = Bath::for_spec(spec, true)?;
    let eig = eigen_sorted(&spec.h_real(s));
    let mut h = DMatrix::zeros(d, d);
    for (omega, _, l) in frame_ops(spec, &eig, bath.omega_bin) {
        h += (l.transpose() * &l) * bath.lamb_value(omega)?;
    }
    Ok(Hermitian::from_part(&lab(&eig.vectors, &h)))
}

/// The generator applied to the identity,
/// `sum gamma(omega) [L_omega, L_omega^dagger]`. Pairs `omega, -omega`
/// combine into `(gamma(omega) - gamma(-omega)) [L_omega, L_omega^dagger]`,
/// which is what is evaluated, so the result is finite also at `beta = 0`.
pub fn non_unitality_witness(spec: &AnnealSpec, t_us: f64) -> Result<Operator> {
    let s = spec.s_of(t_us)?;
    let d = spec.dim();
    let rates = spec.rates();
    let eig = eigen_sorted(&spec.h_real(s));
    let mut w = DMatrix::zeros(d, d);
    for (omega, _, l) in frame_ops(spec, &eig, tolerance::get().omega_bin) {
        if omega > 0.0 {
            let comm = &l * l.transpose() - l.transpose() * &l;
            w += comm * rates.asymmetry(omega);
        }
    }
    Ok(lab(&eig.vectors, &w))
}
