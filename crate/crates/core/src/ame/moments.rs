//! Polynomial moments of `e^{i theta x}` on `[-1, 1]`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::linalg::C64;

/// Highest moment order [`moments`] supports.
pub(crate) const NMAX: usize = 48;
/// Below this `|theta|`, moments come from a fixed Gauss-Legendre rule;
/// above it, from the upward recurrence, which is stable for `n < |theta|`.
const QUAD_LIMIT: f64 = 60.0;
const QUAD_POINTS: usize = 128;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(QUAD_POINTS).unwrap()).as_node_weight_pairs().to_vec()
    })
}

/// `m_n(theta) = int_{-1}^{1} x^n e^{i theta x} dx` for `n = 0..=nmax`.
pub(crate) fn moments(theta: f64, nmax: usize) -> Vec<C64> {
    assert!(nmax <= NMAX);
    let mut out = vec![C64::new(0.0, 0.0); nmax + 1];
    if theta.abs() <= QUAD_LIMIT {
        for &(x, w) in rule() {
            let mut term = C64::from_polar(w, theta * x);
            for m in out.iter_mut() {
                *m += term;
                term *= x;
            }
        }
        return out;
    }
    let i_theta = C64::new(0.0, theta);
    let ep = C64::from_polar(1.0, theta);
    let em = ep.conj();
    out[0] = C64::new(2.0 * theta.sin() / theta, 0.0);
    for n in 1..=nmax {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        out[n] = (ep - em * sign) / i_theta - out[n - 1] * (n as f64) / i_theta;
    }
    out
}

/// Moments for a whole set of angles, indexed `[angle][n]`.
pub(crate) fn moment_table(thetas: &[f64], nmax: usize) -> Vec<Vec<C64>> {
    thetas.iter().map(|&t| moments(t, nmax)).collect()
}

#[cfg(test)]
/// `t_{jk}(theta1, theta2) = int_{-1}^{1} x^j e^{i theta1 x}
/// int_{-1}^{x} y^k e^{i theta2 y} dy dx`.
///
/// `m1` and `m12` hold the moments at `theta1` and `theta1 + theta2`; both
/// must reach order `j + k + 20`.
pub(crate) fn triangle(j: usize, k: usize, theta2: f64, m1: &[C64], m12: &[C64]) -> C64 {
    if theta2.abs() >= 1.0 {
        // Antiderivative e^{i theta2 y} pi_k(y) of y^k e^{i theta2 y}.
        let i_t = C64::new(0.0, theta2);
        let mut coef = Vec::with_capacity(k + 1);
        let mut falling = 1.0;
        let mut pow = i_t;
        for m in 0..=k {
            if m > 0 {
                falling *= (k + 1 - m) as f64;
                pow *= i_t;
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            coef.push(sign * falling / pow);
        }
        let mut upper = C64::new(0.0, 0.0);
        let mut pi_at_minus_one = C64::new(0.0, 0.0);
        for (m, cm) in coef.iter().enumerate() {
            upper += cm * m12[j + k - m];
            let p = k - m;
            pi_at_minus_one += cm * if p % 2 == 0 { 1.0 } else { -1.0 };
        }
        upper - C64::from_polar(1.0, -theta2) * pi_at_minus_one * m1[j]
    } else {
        let i_t = C64::new(0.0, theta2);
        let mut acc = C64::new(0.0, 0.0);
        let mut factor = C64::new(1.0, 0.0);
        for n in 0..20 {
            if n > 0 {
                factor *= i_t / n as f64;
            }
            let p = k + n + 1;
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            acc += factor / p as f64 * (m1[j + p] - m1[j] * sign);
        }
        acc
    }
}

/// `sum_k p_k t_{jk}(theta1, theta2)` for every `j` has the form
/// `sum_n g_n M_{j+n} - e m_j(theta1)`, with `M` the moments at
/// `theta1 + theta2` when `sum_angle` is set and at `theta1` otherwise.
pub(crate) struct TriangleKernel {
    pub g: Vec<C64>,
    pub e: C64,
    pub sum_angle: bool,
}

/// Kernel for the polynomial `p(y) = sum_k p_k y^k`; closed form for
/// `|theta2| >= 1`, Taylor series in `theta2` below.
pub(crate) fn triangle_kernel(p: &[C64], theta2: f64) -> TriangleKernel {
    let zero = C64::new(0.0, 0.0);
    let i_t = C64::new(0.0, theta2);
    if theta2.abs() >= 1.0 {
        let mut g = vec![zero; p.len()];
        let mut pi_at_minus_one = zero;
        for (k, pk) in p.iter().enumerate() {
            if *pk == zero {
                continue;
            }
            let mut falling = 1.0;
            let mut pow = i_t;
            for m in 0..=k {
                if m > 0 {
                    falling *= (k + 1 - m) as f64;
                    pow *= i_t;
                }
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let cm = pk * (sign * falling) / pow;
                g[k - m] += cm;
                pi_at_minus_one += cm * if (k - m) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        TriangleKernel { g, e: C64::from_polar(1.0, -theta2) * pi_at_minus_one, sum_angle: true }
    } else {
        let mut g = vec![zero; p.len() + 20];
        let mut e = zero;
        for (k, pk) in p.iter().enumerate() {
            if *pk == zero {
                continue;
            }
            let mut factor = C64::new(1.0, 0.0);
            for n in 0..20 {
                if n > 0 {
                    factor *= i_t / n as f64;
                }
                let q = k + n + 1;
                let term = pk * factor / q as f64;
                g[q] += term;
                e += term * if q % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        TriangleKernel { g, e, sum_angle: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoint(n: usize, theta: f64, steps: usize) -> C64 {
        let h = 2.0 / steps as f64;
        (0..steps)
            .map(|i| {
                let x = -1.0 + (i as f64 + 0.5) * h;
                C64::from_polar(x.powi(n as i32) * h, theta * x)
            })
            .sum()
    }

    // Midpoint error is even in the cell size, so one Richardson step
    // removes the leading term.
    fn brute_moment(n: usize, theta: f64) -> C64 {
        let coarse = midpoint(n, theta, 200_000);
        let fine = midpoint(n, theta, 400_000);
        (fine * 4.0 - coarse) / 3.0
    }

    #[test]
    fn moments_match_midpoint_sums() {
        for &theta in &[0.0, 0.3, 7.0, 59.0, 61.0, -150.0, 1234.5] {
            let m = moments(theta, NMAX);
            for &n in &[0usize, 1, 2, 5, 17, 40] {
                let want = brute_moment(n, theta);
                assert!((m[n] - want).norm() < 1e-8, "theta {theta} n {n}: {} vs {}", m[n], want);
            }
        }
    }

    #[test]
    fn quadrature_and_recurrence_agree_at_switch() {
        let a = moments(QUAD_LIMIT, NMAX);
        let b = moments(QUAD_LIMIT * (1.0 + 1e-12), NMAX);
        for n in 0..=40 {
            assert!((a[n] - b[n]).norm() < 1e-11, "n {n}");
        }
    }

    fn brute_triangle(j: usize, k: usize, t1: f64, t2: f64) -> C64 {
        let steps = 20000;
        let h = 2.0 / steps as f64;
        let mut inner = C64::new(0.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        let f = |y: f64| C64::from_polar(y.powi(k as i32), t2 * y);
        for i in 0..steps {
            let x0 = -1.0 + i as f64 * h;
            let xm = x0 + 0.5 * h;
            // Simpson on the half cell keeps the inner integral accurate at xm.
            let half = (f(x0) + f(x0 + 0.25 * h) * 4.0 + f(xm)) * (h / 12.0);
            let at_mid = inner + half;
            acc += C64::from_polar(xm.powi(j as i32), t1 * xm) * at_mid * h;
            inner += (f(x0) + f(xm) * 4.0 + f(x0 + h)) * (h / 6.0);
        }
        acc
    }

    #[test]
    fn kernel_matches_direct_sums() {
        let p: Vec<C64> = (0..9).map(|k| C64::new(1.0 / (k + 1) as f64, 0.3 * k as f64 - 1.0)).collect();
        for &(t1, t2) in &[(0.5, 0.2), (-4.0, -0.7), (3.0, 2.5), (100.0, -70.0)] {
            let m1 = moments(t1, NMAX);
            let m12 = moments(t1 + t2, NMAX);
            let kern = triangle_kernel(&p, t2);
            let big = if kern.sum_angle { &m12 } else { &m1 };
            for j in 0..=9 {
                let direct: C64 = p.iter().enumerate().map(|(k, pk)| pk * triangle(j, k, t2, &m1, &m12)).sum();
                let via: C64 = kern.g.iter().enumerate().map(|(n, g)| g * big[j + n]).sum::<C64>() - kern.e * m1[j];
                assert!((direct - via).norm() < 1e-12 * (1.0 + direct.norm()), "({t1}, {t2}) j {j}");
            }
        }
    }

    #[test]
    fn triangle_matches_nested_quadrature() {
        for &(t1, t2) in &[(0.0, 0.0), (2.0, 0.5), (-3.0, 0.99), (1.0, 1.01), (0.4, -8.0), (-20.0, 30.0)] {
            let m1 = moments(t1, NMAX);
            let m12 = moments(t1 + t2, NMAX);
            for j in 0..=5 {
                for k in 0..=5 {
                    let got = triangle(j, k, t2, &m1, &m12);
                    let want = brute_triangle(j, k, t1, t2);
                    assert!((got - want).norm() < 1e-5, "({t1}, {t2}) j {j} k {k}: {got} vs {want}");
                }
            }
        }
    }
}
