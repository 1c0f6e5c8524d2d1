//! Forward term selection on the augmented regression problem.
//!
//! Candidates are scored by a regularized error-reduction ratio against the
//! running Gram-Schmidt orthogonalization; the adjustable prediction-error
//! penalty decides when to stop. The derivative-modulated blocks steer the
//! search only: the augmented system is the raw system reweighted by
//! overlapping windows, and under that metric lagged regressors correlate
//! with noise inside each window, so final parameters always come from the
//! plain rows. Without modulated blocks the triangular back-substitution
//! already is that answer.

use crate::basis::BasisDictionary;
use crate::tvarx::{ModelSpec, TermLabel, TrialSet, UlsProblem};
use crate::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, Axis, ShapeBuilder, Zip};

pub const DEFAULT_RIDGE_SCALE: f64 = 1e-2;
pub const DEFAULT_PENALTY_ORDER: f64 = 3.0;
/// Safety cap only. The stop rules are expected to fire first; a rule
/// whose condition a signal can never meet runs to this cap or to
/// candidate exhaustion, whichever is lower.
pub const DEFAULT_MAX_TERMS: usize = 512;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_RLS_INIT: f64 = 1e3;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-2;
pub const DEFAULT_SCORE_FLOOR: f64 = 5e-3;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized error-reduction ratio of one candidate column against the
/// output: <x,c>^2 / (<x,x> (<c,c> + mu)).
pub fn regularized_err_ratio(x: &[f64], col: &[f64], mu: f64) -> Result<f64> {
    if x.len() != col.len() {
        return Err(Error::Shape(format!("length mismatch {} vs {}", x.len(), col.len())));
    }
    let xx = dot(x, x);
    if xx == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let xc = dot(x, col);
    let cc = dot(col, col);
    Ok(xc * xc / (xx * (cc + mu)))
}

/// Adjustable prediction-error score for a g-term model on n_rows samples:
/// (1 - g v / n)^{-2} * rss / n.
pub fn apress(residual_ss: f64, n_terms: usize, penalty_order: f64, n_rows: usize) -> Result<f64> {
    let gv = n_terms as f64 * penalty_order;
    let n = n_rows as f64;
    if gv >= n {
        return Err(Error::PenaltyOverflow { gv, n: n_rows });
    }
    let p = 1.0 / (1.0 - gv / n).powi(2);
    Ok(p * residual_ss / n)
}

/// When the forward search ends, besides the term cap and candidate
/// exhaustion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// First local minimum of the prediction-error score.
    PenaltyMinimum,
    /// Residual energy falls to `tol` times the output energy. On signals
    /// whose noise share exceeds tol this never triggers and the search
    /// runs to the term cap.
    ResidualFraction { tol: f64 },
    /// Best remaining selection score falls below `floor`.
    ScoreFloor { floor: f64 },
}

/// Knobs for the forward selection loop.
#[derive(Debug, Clone)]
pub struct SelectionConfig {
    /// Ridge term added to candidate energies in the selection score.
    pub mu: f64,
    /// Penalty order v in the stopping score.
    pub penalty_order: f64,
    /// Hard cap on selected terms.
    pub max_terms: usize,
    /// Candidates whose orthogonalized norm falls below
    /// rank_tol x original norm are dropped as degenerate.
    pub rank_tol: f64,
    pub stop: StopRule,
}

impl SelectionConfig {
    /// Defaults for a problem: mu is the ridge scale times the mean squared
    /// column norm (zero when `regularized` is off), penalty-minimum stop.
    pub fn for_problem(problem: &UlsProblem, regularized: bool) -> Self {
        let mu = if regularized { DEFAULT_RIDGE_SCALE * problem.mean_sq_col_norm() } else { 0.0 };
        SelectionConfig {
            mu,
            penalty_order: DEFAULT_PENALTY_ORDER,
            max_terms: DEFAULT_MAX_TERMS,
            rank_tol: DEFAULT_RANK_TOL,
            stop: StopRule::PenaltyMinimum,
        }
    }
}

/// Result of forward selection: chosen columns, their orthogonalized
/// versions, the projection record R (unit upper triangular), auxiliary
/// coefficients U, solved parameters, and the score traces. `params` is
/// the plain-row least-squares answer for the chosen columns; R and U
/// describe the augmented-space search and satisfy R pi = U only for
/// pi = [`solve_params`].
#[derive(Debug, Clone)]
pub struct SelectedModel {
    pub indices: Vec<usize>,
    pub labels: Vec<TermLabel>,
    pub ortho: Array2<f64>,
    pub r_upper: Array2<f64>,
    pub u: Vec<f64>,
    pub params: Vec<f64>,
    pub rerr_trace: Vec<f64>,
    pub apress_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub n_rows: usize,
}

impl SelectedModel {
    pub fn n_terms(&self) -> usize {
        self.indices.len()
    }
}

/// Greedy forward regression: terms are added by maximal error-reduction
/// ratio until the configured stop rule fires. Under the penalty-minimum
/// rule the model is truncated at the prediction-error score minimum.
pub fn forward_select(
    problem: &UlsProblem,
    x: &[f64],
    cfg: &SelectionConfig,
) -> Result<SelectedModel> {
    let rows = problem.n_rows();
    let cols = problem.phi.ncols();
    if x.len() != rows {
        return Err(Error::Shape(format!("output length {} != row count {rows}", x.len())));
    }
    if !(cfg.mu >= 0.0) {
        return Err(Error::InvalidConfig(format!("mu must be >= 0, got {}", cfg.mu)));
    }
    let xx = dot(x, x);
    if xx == 0.0 {
        return Err(Error::UndefinedRatio);
    }

    // the stopping penalty counts raw equations: modulated rows rehash the
    // same samples and must not loosen it
    let penalty_rows = problem.n_raw_rows;
    let mut work = problem.phi.clone();
    let mut orig_norm2 = Array1::zeros(cols);
    let mut cur_norm2 = Array1::zeros(cols);
    let mut cur_xdot = Array1::zeros(cols);
    // status: 0 = active, 1 = taken, 2 = degenerate
    let mut status = vec![0u8; cols];
    for (q, col) in work.axis_iter(Axis(1)).enumerate() {
        let c = col.to_slice().expect("f-order column");
        let n2 = dot(c, c);
        orig_norm2[q] = n2;
        cur_norm2[q] = n2;
        cur_xdot[q] = dot(x, c);
        if n2 <= 0.0 {
            status[q] = 2;
        }
    }

    let max_terms = cfg.max_terms.min(cols);
    let mut ortho_cols: Vec<Vec<f64>> = Vec::new();
    let mut indices = Vec::new();
    let mut u = Vec::new();
    let mut rerr_trace = Vec::new();
    let mut residual_trace = vec![xx];
    let mut apress_trace = vec![apress(xx, 0, cfg.penalty_order, penalty_rows)?];
    // coef[s][q]: projection of column q onto the step-s orthogonal basis
    let mut coef: Vec<Vec<f64>> = Vec::new();
    let mut keep = 0usize;

    while indices.len() < max_terms {
        let mut best: Option<(f64, usize)> = None;
        for q in 0..cols {
            if status[q] != 0 {
                continue;
            }
            if cur_norm2[q] <= cfg.rank_tol * cfg.rank_tol * orig_norm2[q] {
                status[q] = 2;
                continue;
            }
            let score = cur_xdot[q] * cur_xdot[q] / (xx * (cur_norm2[q] + cfg.mu));
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, q));
            }
        }
        let Some((best_score, pick)) = best else {
            if indices.is_empty() {
                return Err(Error::EmptyModel);
            }
            break;
        };
        if let StopRule::ScoreFloor { floor } = cfg.stop {
            if best_score < floor {
                if indices.is_empty() {
                    return Err(Error::EmptyModel);
                }
                break;
            }
        }

        let h: Vec<f64> = work.column(pick).to_vec();
        let hh = dot(&h, &h);
        let xh = dot(x, &h);
        status[pick] = 1;
        indices.push(pick);
        u.push(xh / hh);
        rerr_trace.push(xh * xh / (xx * (hh + cfg.mu)));

        let rss = (residual_trace.last().unwrap() - xh * xh / hh).max(0.0);
        residual_trace.push(rss);
        let g = indices.len();
        // the penalty trace runs while it is defined; only the
        // penalty-minimum rule acts on it
        match apress(rss, g, cfg.penalty_order, penalty_rows) {
            Ok(s) => apress_trace.push(s),
            Err(_) if cfg.stop == StopRule::PenaltyMinimum => {
                // penalty undefined this deep; keep the best prefix so far
                ortho_cols.push(h);
                coef.push(vec![0.0; cols]);
                keep = g - 1;
                break;
            }
            Err(_) => {}
        }

        // project the remaining candidates off the new direction
        let mut coef_row = Array1::zeros(cols);
        let h_view = ArrayView1::from(&h);
        Zip::from(work.axis_iter_mut(Axis(1)))
            .and(&mut coef_row)
            .and(&mut cur_norm2)
            .and(&mut cur_xdot)
            .and(ArrayView1::from(&status[..]))
            .par_for_each(|mut col, c_out, n2, xd, st| {
                if *st != 0 {
                    return;
                }
                let cs = col.as_slice_mut().expect("f-order column");
                let hs = h_view.to_slice().expect("owned contiguous");
                let c = dot(cs, hs) / hh;
                for (w, &hv) in cs.iter_mut().zip(hs) {
                    *w -= c * hv;
                }
                *c_out = c;
                *n2 = (*n2 - c * c * hh).max(0.0);
                *xd -= c * xh;
            });
        coef.push(coef_row.to_vec());
        ortho_cols.push(h);

        keep = g;
        match cfg.stop {
            StopRule::PenaltyMinimum => {
                if apress_trace[g] > apress_trace[g - 1] {
                    keep = g - 1;
                    break;
                }
            }
            StopRule::ResidualFraction { tol } => {
                if rss <= tol * xx {
                    break;
                }
            }
            StopRule::ScoreFloor { .. } => {}
        }
    }

    indices.truncate(keep);
    u.truncate(keep);
    ortho_cols.truncate(keep);
    rerr_trace.truncate(keep);

    let eta = indices.len();
    let mut ortho = Array2::zeros((rows, eta).f());
    for (k, col) in ortho_cols.iter().enumerate() {
        ortho.column_mut(k).assign(&ArrayView1::from(&col[..]));
    }
    let mut r_upper = Array2::eye(eta);
    for kk in 0..eta {
        for s in 0..kk {
            r_upper[(s, kk)] = coef[s][indices[kk]];
        }
    }
    let labels = indices.iter().map(|&q| problem.labels[q]).collect();

    let mut model = SelectedModel {
        indices,
        labels,
        ortho,
        r_upper,
        u,
        params: Vec::new(),
        rerr_trace,
        apress_trace,
        residual_trace,
        n_rows: rows,
    };
    model.params = if rows > problem.n_raw_rows {
        raw_least_squares(problem, x, &model.indices)?
    } else {
        solve_params(&model)?
    };
    Ok(model)
}

/// Least squares over the raw rows only, restricted to the selected
/// columns. Modulated blocks are linear images of the raw ones, so the
/// selected set stays full rank here whenever it was full rank above.
fn raw_least_squares(problem: &UlsProblem, x: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    let eta = indices.len();
    let slices: Vec<&[f64]> = indices
        .iter()
        .map(|&q| problem.phi.column(q).to_slice().expect("f-order column"))
        .collect();
    let raw_dot = |a: &[f64], b: &[f64]| -> f64 {
        problem
            .blocks
            .iter()
            .map(|blk| dot(&a[blk.raw.clone()], &b[blk.raw.clone()]))
            .sum()
    };
    let mut aug = vec![vec![0.0f64; eta + 1]; eta];
    for a in 0..eta {
        for b in a..eta {
            let v = raw_dot(slices[a], slices[b]);
            aug[a][b] = v;
            aug[b][a] = v;
        }
        aug[a][eta] = raw_dot(slices[a], x);
    }
    let scale = (0..eta).map(|a| aug[a][a]).fold(0.0f64, f64::max);
    for c in 0..eta {
        let piv = (c..eta)
            .max_by(|&i, &j| aug[i][c].abs().total_cmp(&aug[j][c].abs()))
            .ok_or(Error::RankDeficient)?;
        if !(aug[piv][c].abs() > 1e-14 * scale) {
            return Err(Error::RankDeficient);
        }
        aug.swap(c, piv);
        for r in c + 1..eta {
            let f = aug[r][c] / aug[c][c];
            if f == 0.0 {
                continue;
            }
            for cc in c..=eta {
                aug[r][cc] -= f * aug[c][cc];
            }
        }
    }
    let mut params = vec![0.0; eta];
    for c in (0..eta).rev() {
        let mut acc = aug[c][eta];
        for cc in c + 1..eta {
            acc -= aug[c][cc] * params[cc];
        }
        params[c] = acc / aug[c][c];
    }
    Ok(params)
}

/// Back-substitute the unit upper-triangular record R Pi = U for the
/// parameters of the selected (unorthogonalized) columns, in the metric
/// the selection ran under. Coincides with `params` exactly when the
/// problem has no modulated rows.
pub fn solve_params(model: &SelectedModel) -> Result<Vec<f64>> {
    let eta = model.u.len();
    if model.r_upper.dim() != (eta, eta) {
        return Err(Error::Shape(format!(
            "projection record is {:?}, expected ({eta}, {eta})",
            model.r_upper.dim()
        )));
    }
    let mut params = model.u.clone();
    for i in (0..eta).rev() {
        let mut acc = params[i];
        for j in i + 1..eta {
            acc -= model.r_upper[(i, j)] * params[j];
        }
        params[i] = acc;
    }
    Ok(params)
}

/// Time courses of every (source, lag) coefficient of one fitted equation,
/// over t = 1..=N. Unselected pairs stay identically zero.
#[derive(Debug, Clone)]
pub struct CoefficientTrajectories {
    pub spec: ModelSpec,
    pub n_samples: usize,
    trajs: Vec<Vec<Vec<f64>>>,
}

impl CoefficientTrajectories {
    pub fn zeros(spec: ModelSpec, n_samples: usize) -> Self {
        let trajs = spec
            .lags
            .iter()
            .map(|&l| vec![vec![0.0; n_samples]; l])
            .collect();
        CoefficientTrajectories { spec, n_samples, trajs }
    }

    /// Trajectory of the coefficient on source position `source_pos`, lag
    /// `lag` (1-based); index t-1 holds the value at sample t.
    pub fn get(&self, source_pos: usize, lag: usize) -> &[f64] {
        &self.trajs[source_pos][lag - 1]
    }

    fn get_mut(&mut self, source_pos: usize, lag: usize) -> &mut [f64] {
        &mut self.trajs[source_pos][lag - 1]
    }

    /// One-step predictions for t = t_start..=N of one trial.
    pub fn predictions(&self, data: &TrialSet, trial: usize) -> Vec<f64> {
        let n = self.n_samples;
        let t_start = self.spec.max_lag() + 1;
        let mut out = vec![0.0; n - t_start + 1];
        for (pos, &ch) in self.spec.sources.iter().enumerate() {
            let sig = data.signal(trial, ch);
            for lag in 1..=self.spec.lags[pos] {
                let traj = self.get(pos, lag);
                for (i, t) in (t_start..=n).enumerate() {
                    out[i] += traj[t - 1] * sig[t - lag - 1];
                }
            }
        }
        out
    }

    /// Prediction residuals x(t) - x_hat(t) for t = t_start..=N.
    pub fn residuals(&self, data: &TrialSet, trial: usize) -> Vec<f64> {
        let t_start = self.spec.max_lag() + 1;
        let sig = data.signal(trial, self.spec.output);
        let mut res = self.predictions(data, trial);
        for (i, t) in (t_start..=self.n_samples).enumerate() {
            res[i] = sig[t - 1] - res[i];
        }
        res
    }
}

/// Expand selected parameters back into coefficient trajectories:
/// c_{source,lag}(t) = sum over that pair's selected atoms of pi * atom(t).
pub fn recover_coefficients(
    model: &SelectedModel,
    dict: &BasisDictionary,
    spec: &ModelSpec,
    n_samples: usize,
) -> CoefficientTrajectories {
    let mut out = CoefficientTrajectories::zeros(spec.clone(), n_samples);
    if model.n_terms() == 0 {
        return out;
    }
    let table = dict.tabulate(n_samples);
    for (label, &pi) in model.labels.iter().zip(&model.params) {
        let traj = out.get_mut(label.source_pos, label.lag);
        let atom_vals = table.row(label.atom);
        for (t, v) in traj.iter_mut().enumerate() {
            *v += pi * atom_vals[t];
        }
    }
    out
}

/// Recursive least squares with exponential forgetting, the conventional
/// adaptive baseline. Trajectories are averaged across trials.
pub fn rls_fit(
    data: &TrialSet,
    spec: &ModelSpec,
    forgetting: f64,
    init_scale: f64,
) -> Result<CoefficientTrajectories> {
    if !(forgetting > 0.0 && forgetting < 1.0) {
        return Err(Error::InvalidRate { rate: forgetting });
    }
    if !(init_scale > 0.0) {
        return Err(Error::InvalidConfig(format!("init scale must be positive, got {init_scale}")));
    }
    for &ch in &spec.sources {
        if ch >= data.n_channels() {
            return Err(Error::InvalidConfig(format!("channel index {ch} out of range")));
        }
    }
    let n = data.n_samples();
    let max_lag = spec.max_lag();
    if max_lag >= n {
        return Err(Error::InsufficientData { needed: max_lag + 1, got: n });
    }
    let t_start = max_lag + 1;
    let dim: usize = spec.lags.iter().sum();

    let mut out = CoefficientTrajectories::zeros(spec.clone(), n);
    let scale = 1.0 / data.n_trials() as f64;
    let mut phi = vec![0.0; dim];
    for trial in 0..data.n_trials() {
        let mut w = vec![0.0; dim];
        let mut p = Array2::<f64>::eye(dim) * init_scale;
        let y = data.signal(trial, spec.output);
        for t in t_start..=n {
            let mut k = 0;
            for (pos, &ch) in spec.sources.iter().enumerate() {
                let sig = data.signal(trial, ch);
                for lag in 1..=spec.lags[pos] {
                    phi[k] = sig[t - lag - 1];
                    k += 1;
                }
            }
            let pphi: Vec<f64> = (0..dim)
                .map(|i| (0..dim).map(|j| p[(i, j)] * phi[j]).sum())
                .collect();
            let denom = forgetting + dot(&phi, &pphi);
            let err = y[t - 1] - dot(&phi, &w);
            for i in 0..dim {
                w[i] += pphi[i] / denom * err;
            }
            for i in 0..dim {
                for j in 0..dim {
                    p[(i, j)] = (p[(i, j)] - pphi[i] * pphi[j] / denom) / forgetting;
                }
            }
            let mut k = 0;
            for pos in 0..spec.sources.len() {
                for lag in 1..=spec.lags[pos] {
                    out.get_mut(pos, lag)[t - 1] += scale * w[k];
                    k += 1;
                }
            }
        }
    }
    Ok(out)
}
