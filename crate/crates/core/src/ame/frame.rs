//! Instantaneous eigenbases that vary continuously along the anneal.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues and orthonormal eigenvectors (columns) of a real symmetric
/// matrix; the order is whatever the producer says it is.
#[derive(Debug, Clone)]
pub(crate) struct Eigen {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Ascending order.
pub(crate) fn eigen_sorted(h: &DMatrix<f64>) -> Eigen {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), h.nrows(), |r, col| eig.eigenvectors[(r, order[col])]);
    Eigen { energies, vectors }
}

/// Reorders and rotates `new` to follow `reference`: columns are matched
/// by largest overlap, bases of (near-)degenerate clusters are rotated onto
/// the reference by an orthogonal Procrustes fit, and signs are fixed so
/// every overlap is positive.
pub(crate) fn align(reference: &DMatrix<f64>, new: Eigen, deg_tol: f64) -> Eigen {
    let d = reference.ncols();
    let overlap = reference.transpose() * &new.vectors;
    let mut pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(i, j), &(k, l)| overlap[(k, l)].abs().partial_cmp(&overlap[(i, j)].abs()).unwrap());
    let mut slot_of_new = vec![usize::MAX; d];
    let mut taken = vec![false; d];
    for (i, j) in pairs {
        if !taken[i] && slot_of_new[j] == usize::MAX {
            taken[i] = true;
            slot_of_new[j] = i;
        }
    }
    let mut energies = vec![0.0; d];
    let mut vectors = DMatrix::zeros(d, d);
    for j in 0..d {
        let i = slot_of_new[j];
        energies[i] = new.energies[j];
        vectors.set_column(i, &new.vectors.column(j));
    }

    let mut by_energy: Vec<usize> = (0..d).collect();
    by_energy.sort_by(|&i, &j| energies[i].partial_cmp(&energies[j]).unwrap());
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && energies[by_energy[end]] - energies[by_energy[end - 1]] <= deg_tol {
            end += 1;
        }
        if end - start > 1 {
            let idx = &by_energy[start..end];
            let v = DMatrix::from_fn(d, idx.len(), |r, c| vectors[(r, idx[c])]);
            let p = DMatrix::from_fn(d, idx.len(), |r, c| reference[(r, idx[c])]);
            let svd = (v.transpose() * &p).svd(true, true);
            let rot = svd.u.unwrap() * svd.v_t.unwrap();
            let rotated = v * rot;
            for (c, &i) in idx.iter().enumerate() {
                vectors.set_column(i, &rotated.column(c));
            }
        }
        start = end;
    }

    for i in 0..d {
        if reference.column(i).dot(&vectors.column(i)) < 0.0 {
            vectors.column_mut(i).neg_mut();
        }
    }
    Eigen { energies, vectors }
}

/// Non-adiabatic coupling `K_ab = <a|d_s b> = <a|H'|b> / (E_b - E_a)` in
/// the parallel-transport gauge (`K_aa = 0`), together with the
/// Hellmann-Feynman slopes `dE_a/ds = <a|H'|a>`. Couplings inside a
/// degenerate cluster are set to zero.
pub(crate) fn coupling(eig: &Eigen, dh: &DMatrix<f64>, deg_tol: f64) -> (DMatrix<f64>, Vec<f64>) {
    let d = eig.energies.len();
    let m = eig.vectors.transpose() * dh * &eig.vectors;
    let slopes = (0..d).map(|a| m[(a, a)]).collect();
    let k = DMatrix::from_fn(d, d, |a, b| {
        let gap = eig.energies[b] - eig.energies[a];
        if a == b || gap.abs() <= deg_tol {
            0.0
        } else {
            m[(a, b)] / gap
        }
    });
    (k, slopes)
}
