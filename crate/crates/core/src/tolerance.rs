//! Process-wide numerical tolerances.
//!
//! Defaults are tuned for double precision on Hilbert spaces of dimension up
//! to about 64. They can be replaced globally with [`set`]; every check in
//! the crate reads the current values through [`get`].

use std::sync::RwLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Hermiticity residual, max-abs entry of `A - A^dagger`.
    pub herm: f64,
    /// Deviation of a density matrix trace from one.
    pub trace: f64,
    /// Smallest eigenvalue accepted as non-negative is `-psd`.
    pub psd: f64,
    /// Eigendecomposition reconstruction error.
    pub eig: f64,
    /// Completeness residual of Kraus sets.
    pub tp: f64,
    /// Completeness residual of measurement operator sets.
    pub meas: f64,
    /// Probability below which an outcome is treated as impossible.
    pub p_floor: f64,
    /// Observable values closer than this are merged into one atom.
    pub v_merge: f64,
    /// Bohr frequencies closer than this (GHz) share a jump operator.
    pub omega_bin: f64,
    /// Default local error target of the master-equation integrator.
    pub ode: f64,
    /// Relative target of the principal-value quadrature.
    pub pv: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        herm: 1e-10,
        trace: 1e-10,
        psd: 1e-9,
        eig: 1e-10,
        tp: 1e-8,
        meas: 1e-8,
        p_floor: 1e-14,
        v_merge: 1e-9,
        omega_bin: 1e-8,
        ode: 1e-8,
        pv: 1e-6,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

static GLOBAL: RwLock<Tolerances> = RwLock::new(Tolerances::DEFAULT);

/// Current global tolerances.
pub fn get() -> Tolerances {
    *GLOBAL.read().unwrap_or_else(|e| e.into_inner())
}

/// Replace the global tolerances.
pub fn set(tol: Tolerances) {
    *GLOBAL.write().unwrap_or_else(|e| e.into_inner()) = tol;
}

/// Restore the defaults.
pub fn reset() {
    set(Tolerances::DEFAULT);
}
