//! Shared test oracles, independent of the library's linear-algebra path.
// each test binary compiles this module separately and uses a subset
#![allow(dead_code)]

use rand::Rng;
use rankspec_core::Mat;

/// Singular values by one-sided Jacobi (Hestenes) column orthogonalization.
/// Slow and simple; exists to cross-check the production SVD route.
pub fn jacobi_singular_values(m: &Mat) -> Vec<f64> {
    // orient so columns <= rows; singular values are transpose-invariant
    let a = if m.cols() > m.rows() {
        m.transpose()
    } else {
        m.clone()
    };
    let (n_rows, n_cols) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n_cols)
        .map(|j| (0..n_rows).map(|i| a.get(i, j)).collect())
        .collect();

    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    let tol = 1e-14;
    for _sweep in 0..60 {
        let mut worst: f64 = 0.0;
        for p in 0..n_cols {
            for q in p + 1..n_cols {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let normalized = gamma.abs() / (alpha * beta).sqrt();
                worst = worst.max(normalized);
                if normalized < tol {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for i in 0..n_rows {
                    let vp = cp[i];
                    let vq = cq[i];
                    cp[i] = c * vp - s * vq;
                    cq[i] = s * vp + c * vq;
                }
            }
        }
        if worst < tol {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Count of oracle singular values at or above `eta`.
pub fn oracle_thresholded_rank(m: &Mat, eta: f64) -> usize {
    jacobi_singular_values(m)
        .iter()
        .filter(|&&s| s >= eta)
        .count()
}

/// Machine-tolerance rank from the oracle singular values.
pub fn oracle_exact_rank(m: &Mat) -> usize {
    let sv = jacobi_singular_values(m);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cutoff = f64::EPSILON * m.rows().max(m.cols()) as f64 * sigma_max;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Nonnegative matrix of exact rank `r`: product of entrywise-positive
/// `t x r` and `r x f` factors.
pub fn random_nonneg_rank<R: Rng>(rng: &mut R, t: usize, f: usize, r: usize) -> Mat {
    assert!(r >= 1 && r <= t.min(f));
    let u: Vec<f64> = (0..t * r).map(|_| rng.gen_range(0.01..1.0)).collect();
    let v: Vec<f64> = (0..r * f).map(|_| rng.gen_range(0.01..1.0)).collect();
    Mat::from_fn(t, f, |i, j| {
        (0..r).map(|k| u[i * r + k] * v[k * f + j]).sum()
    })
}

/// Random orthogonal matrix from the QR factorization of a random matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let raw = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let qr = raw.qr();
    Mat::from_fn(n, n, |i, j| qr.q()[(i, j)])
}
