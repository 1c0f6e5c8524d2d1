//! Spectral conditional causality from fitted time-varying models.
//!
//! The trivariate and bivariate fits are diagonalized so their innovations
//! decorrelate, turned into frequency-domain transfer matrices, and combined
//! into the ratio of total to intrinsic power of the target channel. Role
//! order is fixed throughout: trivariate rows are (target, source,
//! conditioning), bivariate rows are (target, conditioning).

use crate::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

pub const DEFAULT_SMOOTHING: f64 = 0.05;
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;
/// Rounding slack below zero tolerated before a cell is clamped.
pub const CLAMP_FLOOR: f64 = -1e-9;

/// Exponentially smoothed product track shared by every covariance entry.
/// Products from multiple trials are averaged pointwise first; the track is
/// seeded with the mean product over the leading window.
pub fn covariance_track(u1: &[&[f64]], u2: &[&[f64]], rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidRate { rate: rho });
    }
    if u1.len() != u2.len() || u1.is_empty() {
        return Err(Error::Shape(format!(
            "covariance inputs hold {} and {} trials",
            u1.len(),
            u2.len()
        )));
    }
    let n = u1[0].len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    for (a, b) in u1.iter().zip(u2) {
        if a.len() != n || b.len() != n {
            return Err(Error::Shape("residual series differ in length".into()));
        }
    }
    let scale = 1.0 / u1.len() as f64;
    let prod: Vec<f64> = (0..n)
        .map(|t| u1.iter().zip(u2).map(|(a, b)| a[t] * b[t]).sum::<f64>() * scale)
        .collect();

    let warm = n.min(50);
    let init = prod[..warm].iter().sum::<f64>() / warm as f64;
    let mut track = Vec::with_capacity(n);
    let mut s = init;
    for &p in &prod {
        track.push(s);
        s = (1.0 - rho) * s + rho * p;
    }
    Ok(track)
}

/// Symmetric residual covariance per time index from per-equation,
/// per-trial residual series (residuals[eq][trial][i]).
pub fn residual_covariance(residuals: &[&[Vec<f64>]], rho: f64) -> Result<Vec<Array2<f64>>> {
    let k = residuals.len();
    if k == 0 {
        return Err(Error::Shape("no residual series given".into()));
    }
    let n = residuals[0].first().map_or(0, |r| r.len());
    let mut tracks = vec![vec![Vec::new(); k]; k];
    for a in 0..k {
        for b in a..k {
            let ua: Vec<&[f64]> = residuals[a].iter().map(|r| r.as_slice()).collect();
            let ub: Vec<&[f64]> = residuals[b].iter().map(|r| r.as_slice()).collect();
            let tr = covariance_track(&ua, &ub, rho)?;
            tracks[a][b] = tr;
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut m = Array2::zeros((k, k));
        for a in 0..k {
            for b in a..k {
                m[(a, b)] = tracks[a][b][i];
                m[(b, a)] = tracks[a][b][i];
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// A fitted time-varying model over the analysis grid: coeffs[i][l-1] is
/// the k x k lag-l coefficient matrix at grid index i (row = equation,
/// column = lagged channel), sigma[i] the residual covariance there.
#[derive(Debug, Clone)]
pub struct TvarModel {
    pub fs: f64,
    pub coeffs: Vec<Vec<Array2<f64>>>,
    pub sigma: Vec<Array2<f64>>,
}

/// Model after the decorrelating transform: lag matrices premultiplied by
/// the unit lower-triangular map that diagonalizes the noise, plus the
/// resulting innovation variances.
#[derive(Debug, Clone)]
pub struct NormalizedModel {
    pub fs: f64,
    pub lag_mats: Vec<Vec<Array2<f64>>>,
    pub noise: Vec<Vec<f64>>,
}

impl NormalizedModel {
    pub fn n_times(&self) -> usize {
        self.lag_mats.len()
    }

    pub fn n_channels(&self) -> usize {
        self.noise.first().map_or(0, |d| d.len())
    }
}

/// Unit lower-triangular Q with Q sigma Q^T diagonal, by successive
/// elimination. Exact zeros in sigma survive into Q.
fn decorrelator(sigma: &Array2<f64>, time: usize) -> Result<(Array2<f64>, Vec<f64>)> {
    let k = sigma.nrows();
    let mut l = Array2::eye(k);
    let mut d = vec![0.0; k];
    for j in 0..k {
        let mut dj = sigma[(j, j)];
        for s in 0..j {
            dj -= l[(j, s)] * l[(j, s)] * d[s];
        }
        if !(dj > 0.0) {
            return Err(Error::SingularVariance { time });
        }
        d[j] = dj;
        for i in j + 1..k {
            let mut v = sigma[(i, j)];
            for s in 0..j {
                v -= l[(i, s)] * l[(j, s)] * d[s];
            }
            l[(i, j)] = v / dj;
        }
    }
    // invert the unit lower-triangular factor by forward substitution
    let mut q = Array2::eye(k);
    for col in 0..k {
        for i in col + 1..k {
            let mut v = 0.0;
            for s in col..i {
                v -= l[(i, s)] * q[(s, col)];
            }
            q[(i, col)] = v;
        }
    }
    Ok((q, d))
}

/// Apply the decorrelating transform to every grid point. The lag-0 matrix
/// becomes Q itself, lag l >= 1 becomes -Q C_l.
pub fn normalize(model: &TvarModel) -> Result<NormalizedModel> {
    let n = model.sigma.len();
    if model.coeffs.len() != n || n == 0 {
        return Err(Error::Shape(format!(
            "{} coefficient sets vs {} covariance sets",
            model.coeffs.len(),
            n
        )));
    }
    let k = model.sigma[0].nrows();
    let mut lag_mats = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for i in 0..n {
        if model.sigma[i].dim() != (k, k) {
            return Err(Error::Shape("covariance matrix is not square".into()));
        }
        let (q, d) = decorrelator(&model.sigma[i], i)?;
        let mut mats = Vec::with_capacity(model.coeffs[i].len() + 1);
        mats.push(q.clone());
        for c in &model.coeffs[i] {
            if c.dim() != (k, k) {
                return Err(Error::Shape("lag matrix is not square".into()));
            }
            mats.push(q.dot(&c.mapv(|v| -v)));
        }
        lag_mats.push(mats);
        noise.push(d);
    }
    Ok(NormalizedModel { fs: model.fs, lag_mats, noise })
}

/// Frequency response of the lag operator at grid index i:
/// B(f) = sum_l D_l exp(-i 2 pi f l / fs).
pub fn spectral_matrix(norm: &NormalizedModel, i: usize, freq: f64) -> Array2<Complex64> {
    let mats = &norm.lag_mats[i];
    let k = mats[0].nrows();
    let mut b = Array2::<Complex64>::zeros((k, k));
    for (l, m) in mats.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -2.0 * PI * freq * l as f64 / norm.fs);
        for r in 0..k {
            for c in 0..k {
                b[(r, c)] += phase * m[(r, c)];
            }
        }
    }
    b
}

fn frob(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// 2x2 inverse through the adjugate; exact zeros stay exact.
#[cfg(test)]
pub(crate) fn inv2(m: &Array2<Complex64>) -> (Array2<Complex64>, f64) {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let mut inv = Array2::zeros((2, 2));
    inv[(0, 0)] = m[(1, 1)] / det;
    inv[(0, 1)] = -m[(0, 1)] / det;
    inv[(1, 0)] = -m[(1, 0)] / det;
    inv[(1, 1)] = m[(0, 0)] / det;
    let cond = frob(m) * frob(&inv);
    (inv, cond)
}

/// 3x3 inverse through cofactors; exact zeros stay exact.
pub(crate) fn inv3(m: &Array2<Complex64>) -> (Array2<Complex64>, f64) {
    let c = |r: usize, s: usize| m[(r, s)];
    let cof = |r1: usize, c1: usize, r2: usize, c2: usize| c(r1, c1) * c(r2, c2) - c(r1, c2) * c(r2, c1);
    let det = c(0, 0) * cof(1, 1, 2, 2) - c(0, 1) * cof(1, 0, 2, 2) + c(0, 2) * cof(1, 0, 2, 1);
    let mut inv = Array2::zeros((3, 3));
    inv[(0, 0)] = cof(1, 1, 2, 2) / det;
    inv[(0, 1)] = -cof(0, 1, 2, 2) / det;
    inv[(0, 2)] = cof(0, 1, 1, 2) / det;
    inv[(1, 0)] = -cof(1, 0, 2, 2) / det;
    inv[(1, 1)] = cof(0, 0, 2, 2) / det;
    inv[(1, 2)] = -cof(0, 0, 1, 2) / det;
    inv[(2, 0)] = cof(1, 0, 2, 1) / det;
    inv[(2, 1)] = -cof(0, 0, 2, 1) / det;
    inv[(2, 2)] = cof(0, 0, 1, 1) / det;
    let cond = frob(m) * frob(&inv);
    (inv, cond)
}

/// Lift a 2x2 matrix over (target, conditioning) into the 3x3 role space,
/// identity on the source coordinate.
fn embed(b2: &Array2<Complex64>) -> Array2<Complex64> {
    let mut e = Array2::zeros((3, 3));
    e[(0, 0)] = b2[(0, 0)];
    e[(0, 2)] = b2[(0, 1)];
    e[(2, 0)] = b2[(1, 0)];
    e[(2, 2)] = b2[(1, 1)];
    e[(1, 1)] = Complex64::new(1.0, 0.0);
    e
}

/// Analysis grid: absolute sample times and the frequency axis.
#[derive(Debug, Clone)]
pub struct TimeFreqGrid {
    pub times: Vec<usize>,
    pub freqs: Vec<f64>,
    pub fs: f64,
}

impl TimeFreqGrid {
    /// times t0..=n, frequencies uniform on [0, fs/2] inclusive.
    pub fn new(t_start: usize, n_samples: usize, fs: f64, freq_points: usize) -> Result<Self> {
        if freq_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 frequency points, got {freq_points}"
            )));
        }
        if t_start > n_samples {
            return Err(Error::InsufficientData { needed: t_start, got: n_samples });
        }
        let times = (t_start..=n_samples).collect();
        let freqs = (0..freq_points)
            .map(|q| fs / 2.0 * q as f64 / (freq_points - 1) as f64)
            .collect();
        Ok(TimeFreqGrid { times, freqs, fs })
    }
}

/// A causality map over the grid. Cells where the trivariate spectral
/// factor was too ill-conditioned to invert are flagged and carry zero.
#[derive(Debug, Clone)]
pub struct TfcgcMap {
    pub grid: TimeFreqGrid,
    pub gc: Array2<f64>,
    pub flagged: Array2<bool>,
    /// Most negative raw value seen before clamping, for diagnostics.
    pub min_preclamp: f64,
}

impl TfcgcMap {
    pub fn n_flagged(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

/// Conditional causality map from the normalized trivariate and bivariate
/// models. Per cell the trivariate transfer K = B3^{-1} is mapped into the
/// bivariate innovation space by R = embed(B2) K (the inverse of the
/// embedded bivariate transfer is the embedded factor itself), and the
/// value is ln(total / intrinsic) power of the target row.
pub fn tfcgc_map(
    tri: &NormalizedModel,
    biv: &NormalizedModel,
    grid: TimeFreqGrid,
    cond_cap: f64,
) -> Result<TfcgcMap> {
    let n_t = grid.times.len();
    let n_f = grid.freqs.len();
    if tri.n_times() != n_t || biv.n_times() != n_t {
        return Err(Error::Shape(format!(
            "grid holds {n_t} times but models hold {} and {}",
            tri.n_times(),
            biv.n_times()
        )));
    }
    if tri.n_channels() != 3 || biv.n_channels() != 2 {
        return Err(Error::Shape(format!(
            "role spaces must be 3 and 2 channels, got {} and {}",
            tri.n_channels(),
            biv.n_channels()
        )));
    }
    if (tri.fs - biv.fs).abs() > 0.0 || (tri.fs - grid.fs).abs() > 0.0 {
        return Err(Error::InvalidConfig("sampling rates disagree across models".into()));
    }

    struct Row {
        gc: Vec<f64>,
        flagged: Vec<bool>,
        min_raw: f64,
        bad: Option<(usize, f64)>,
    }
    let rows: Vec<Row> = (0..n_t)
        .into_par_iter()
        .map(|i| {
            let noise = &tri.noise[i];
            let mut row = Row {
                gc: vec![0.0; n_f],
                flagged: vec![false; n_f],
                min_raw: f64::INFINITY,
                bad: None,
            };
            for (fi, &f) in grid.freqs.iter().enumerate() {
                let b3 = spectral_matrix(tri, i, f);
                let (k_mat, cond) = inv3(&b3);
                if !cond.is_finite() || cond > cond_cap {
                    row.flagged[fi] = true;
                    continue;
                }
                let b2 = spectral_matrix(biv, i, f);
                let lift = embed(&b2);
                let r = lift.dot(&k_mat);
                let den = r[(0, 0)].norm_sqr() * noise[0];
                let num = den
                    + r[(0, 1)].norm_sqr() * noise[1]
                    + r[(0, 2)].norm_sqr() * noise[2];
                if !(den > 0.0) || !num.is_finite() {
                    row.bad = Some((grid.times[i], f));
                    break;
                }
                let raw = (num / den).ln();
                row.min_raw = row.min_raw.min(raw);
                if raw < CLAMP_FLOOR {
                    row.bad = Some((grid.times[i], f));
                    break;
                }
                row.gc[fi] = raw.max(0.0);
            }
            row
        })
        .collect();

    let mut gc = Array2::zeros((n_t, n_f));
    let mut flagged = Array2::from_elem((n_t, n_f), false);
    let mut min_preclamp = f64::INFINITY;
    for (i, row) in rows.into_iter().enumerate() {
        if let Some((time, freq)) = row.bad {
            return Err(Error::InvalidSpectrum { time, freq });
        }
        min_preclamp = min_preclamp.min(row.min_raw);
        for fi in 0..n_f {
            gc[(i, fi)] = row.gc[fi];
            flagged[(i, fi)] = row.flagged[fi];
        }
    }
    Ok(TfcgcMap { grid, gc, flagged, min_preclamp })
}

/// Permutation threshold: the k-th smallest surrogate maximum with
/// k = ceil((1 - alpha)(n + 1)). Requires n >= 1/alpha - 1.
pub fn permutation_threshold(maxima: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = maxima.len();
    let k = ((1.0 - alpha) * (n as f64 + 1.0)).ceil() as usize;
    if k > n || n == 0 {
        return Err(Error::InvalidPermutationCount { n_perm: n, alpha });
    }
    let mut sorted = maxima.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted[k - 1])
}

/// Keep only values strictly above the threshold; flagged cells never pass.
pub fn significance_mask(map: &TfcgcMap, threshold: f64) -> Array2<bool> {
    let mut mask = Array2::from_elem(map.gc.dim(), false);
    for ((idx, &v), &fl) in map.gc.indexed_iter().zip(map.flagged.iter()) {
        mask[idx] = v > threshold && !fl;
    }
    mask
}

/// Net causal flow per node from a matrix of pairwise interaction gains
/// (gains[(i, j)] is i driving j): outflow minus inflow, accumulated
/// antisymmetrically so the total balances.
pub fn net_causal_flow(gains: &Array2<f64>) -> Result<Vec<f64>> {
    let n = gains.nrows();
    if gains.ncols() != n {
        return Err(Error::Shape(format!("gain matrix is {:?}, expected square", gains.dim())));
    }
    let mut flow = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = gains[(i, j)] - gains[(j, i)];
            flow[i] += d;
            flow[j] -= d;
        }
    }
    Ok(flow)
}
