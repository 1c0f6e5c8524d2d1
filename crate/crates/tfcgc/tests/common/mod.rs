//! Shared by the integration suites: a reference implementation of the
//! frequency-domain conditional gain that goes through explicit matrix
//! inversions (pivoted Gaussian elimination, scalar loops) instead of the
//! library's factor-embedding route, plus small model builders.

#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

type CMat = Vec<Vec<Complex64>>;

fn czeros(n: usize) -> CMat {
    vec![vec![Complex64::new(0.0, 0.0); n]; n]
}

fn ceye(n: usize) -> CMat {
    let mut m = czeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn cmul(a: &CMat, b: &CMat) -> CMat {
    let n = a.len();
    let mut out = czeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, bk) in b.iter().enumerate() {
                acc += a[i][k] * bk[j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Inverse by Gaussian elimination with partial pivoting on an augmented
/// system. Panics on a numerically singular pivot; the reference route is
/// only meant for well-conditioned test models.
pub fn cinv(m: &CMat) -> CMat {
    let n = m.len();
    let mut a = m.clone();
    let mut inv = ceye(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].norm().partial_cmp(&a[r2][col].norm()).unwrap())
            .unwrap();
        assert!(a[pivot][col].norm() > 1e-14, "singular reference matrix");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let diag = a[col][col];
        for j in 0..n {
            a[col][j] /= diag;
            inv[col][j] /= diag;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            for j in 0..n {
                let del_a = factor * a[col][j];
                let del_i = factor * inv[col][j];
                a[row][j] -= del_a;
                inv[row][j] -= del_i;
            }
        }
    }
    inv
}

/// Unit lower-triangular L and diagonal d with sigma = L diag(d) L^T,
/// then L^{-1} by forward substitution.
fn whiten(sigma: &Array2<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = sigma.nrows();
    let mut l = vec![vec![0.0; n]; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        l[i][i] = 1.0;
        for j in 0..i {
            let mut v = sigma[(i, j)];
            for s in 0..j {
                v -= l[i][s] * l[j][s] * d[s];
            }
            l[i][j] = v / d[j];
        }
        let mut v = sigma[(i, i)];
        for s in 0..i {
            v -= l[i][s] * l[i][s] * d[s];
        }
        assert!(v > 0.0, "reference covariance not positive definite");
        d[i] = v;
    }
    let mut w = vec![vec![0.0; n]; n];
    for col in 0..n {
        w[col][col] = 1.0;
        for row in col + 1..n {
            let mut v = 0.0;
            for s in col..row {
                v -= l[row][s] * w[s][col];
            }
            w[row][col] = v;
        }
    }
    (w, d)
}

/// I - sum_l A_l z^l at z = exp(-i 2 pi f / fs), left-multiplied by the
/// real whitening matrix.
fn whitened_coeff_matrix(lags: &[Array2<f64>], w: &[Vec<f64>], fs: f64, freq: f64) -> CMat {
    let n = lags[0].nrows();
    let mut bare = czeros(n);
    for (i, row) in bare.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    for (l, m) in lags.iter().enumerate() {
        let z = Complex64::from_polar(1.0, -2.0 * PI * freq * (l + 1) as f64 / fs);
        for i in 0..n {
            for j in 0..n {
                bare[i][j] -= z * m[(i, j)];
            }
        }
    }
    let mut out = czeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, bk) in bare.iter().enumerate() {
                acc += Complex64::new(w[i][k], 0.0) * bk[j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Conditional gain at one frequency through the explicit route: whiten
/// both models, invert the trivariate coefficient matrix, invert the
/// bivariate one, embed that inverse with the passive middle row, invert
/// the embedding, and read the target row of the composition. Roles are
/// (target, source, cond) in the trivariate model and (target, cond) in
/// the bivariate one.
pub fn classical_conditional_gc(
    tri_lags: &[Array2<f64>],
    tri_sigma: &Array2<f64>,
    biv_lags: &[Array2<f64>],
    biv_sigma: &Array2<f64>,
    fs: f64,
    freq: f64,
) -> f64 {
    let (w3, d3) = whiten(tri_sigma);
    let (w2, _) = whiten(biv_sigma);
    let b3 = whitened_coeff_matrix(tri_lags, &w3, fs, freq);
    let b2 = whitened_coeff_matrix(biv_lags, &w2, fs, freq);

    let h3 = cinv(&b3);
    let g2 = cinv(&b2);
    let mut gemb = ceye(3);
    gemb[0][0] = g2[0][0];
    gemb[0][2] = g2[0][1];
    gemb[2][0] = g2[1][0];
    gemb[2][2] = g2[1][1];
    let q = cmul(&cinv(&gemb), &h3);

    let num: f64 = (0..3).map(|j| q[0][j].norm_sqr() * d3[j]).sum();
    let den = q[0][0].norm_sqr() * d3[0];
    (num / den).ln()
}

/// A mildly coupled stable three-channel second-order model with
/// correlated innovations, roles already (target, source, cond).
pub fn reference_system() -> (Vec<Array2<f64>>, Array2<f64>) {
    let a1 = ndarray::arr2(&[
        [0.40, 0.15, 0.00],
        [0.30, 0.35, 0.10],
        [0.05, 0.20, 0.45],
    ]);
    let a2 = ndarray::arr2(&[
        [-0.20, 0.05, 0.02],
        [0.00, -0.25, 0.08],
        [0.03, 0.00, -0.30],
    ]);
    let sigma = ndarray::arr2(&[
        [1.00, 0.20, 0.10],
        [0.20, 0.80, 0.15],
        [0.10, 0.15, 0.90],
    ]);
    (vec![a1, a2], sigma)
}

/// The (target, cond) model implied by deleting the source: keep rows and
/// columns {0, 2} of each lag matrix and of the covariance.
pub fn drop_source(tri_lags: &[Array2<f64>], tri_sigma: &Array2<f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
    let pick = [0usize, 2];
    let lags = tri_lags
        .iter()
        .map(|m| {
            let mut sub = Array2::zeros((2, 2));
            for (ri, &r) in pick.iter().enumerate() {
                for (ci, &c) in pick.iter().enumerate() {
                    sub[(ri, ci)] = m[(r, c)];
                }
            }
            sub
        })
        .collect();
    let mut sig = Array2::zeros((2, 2));
    for (ri, &r) in pick.iter().enumerate() {
        for (ci, &c) in pick.iter().enumerate() {
            sig[(ri, ci)] = tri_sigma[(r, c)];
        }
    }
    (lags, sig)
}
