//! Time-varying ARX regressor construction: expand lagged channels against
//! the atom dictionary, then augment the least-squares problem with
//! derivative-modulated row blocks.
//!
//! The candidate matrix depends only on the source channels, so one
//! augmented problem serves every equation over the same sources; each
//! output channel contributes its own stacked right-hand side.

use crate::basis::{BasisDictionary, TestFunctionBank};
use crate::{Error, Result};
use ndarray::{Array2, ArrayView2, ShapeBuilder};

/// Multi-trial, multi-channel record with a common sampling rate.
/// Every trial is a (channels x samples) block of finite values.
#[derive(Debug, Clone)]
pub struct TrialSet {
    channel_names: Vec<String>,
    fs: f64,
    trials: Vec<Array2<f64>>,
}

impl TrialSet {
    pub fn new(channel_names: Vec<String>, fs: f64, trials: Vec<Array2<f64>>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::InsufficientTrials { needed: 1, got: 0 });
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidConfig(format!("sampling rate must be positive, got {fs}")));
        }
        let dim = trials[0].dim();
        if dim.0 != channel_names.len() {
            return Err(Error::Shape(format!(
                "{} channel names but trials carry {} channels",
                channel_names.len(),
                dim.0
            )));
        }
        if dim.1 == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        for (i, tr) in trials.iter().enumerate() {
            if tr.dim() != dim {
                return Err(Error::Shape(format!(
                    "trial {i} has shape {:?}, expected {:?}",
                    tr.dim(),
                    dim
                )));
            }
            if tr.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("trial {i} contains non-finite samples")));
            }
        }
        Ok(TrialSet { channel_names, fs, trials })
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn n_samples(&self) -> usize {
        self.trials[0].dim().1
    }

    pub fn trial(&self, i: usize) -> ArrayView2<'_, f64> {
        self.trials[i].view()
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    /// Signal of `channel` in trial `trial` as a contiguous slice.
    pub fn signal(&self, trial: usize, channel: usize) -> &[f64] {
        self.trials[trial]
            .row(channel)
            .to_slice()
            .expect("trial rows are contiguous")
    }

    /// Copy with `channel` taken from trial `perm[m]` in trial m. Used by
    /// the surrogate permutation test.
    pub fn with_permuted_channel(&self, channel: usize, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_trials() {
            return Err(Error::Shape(format!(
                "permutation length {} != trial count {}",
                perm.len(),
                self.n_trials()
            )));
        }
        let mut trials = self.trials.clone();
        for (m, &src) in perm.iter().enumerate() {
            let donor = self.trials[src].row(channel).to_owned();
            trials[m].row_mut(channel).assign(&donor);
        }
        Ok(TrialSet { channel_names: self.channel_names.clone(), fs: self.fs, trials })
    }
}

/// One equation of a (time-varying) vector AR model: which channel is
/// predicted, from which source channels, with how many lags each.
/// The output channel must appear among the sources.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub output: usize,
    pub sources: Vec<usize>,
    pub lags: Vec<usize>,
}

impl ModelSpec {
    pub fn new(output: usize, sources: Vec<usize>, lags: Vec<usize>) -> Result<Self> {
        if sources.len() != lags.len() {
            return Err(Error::Shape(format!(
                "{} sources but {} lag bounds",
                sources.len(),
                lags.len()
            )));
        }
        if !sources.contains(&output) {
            return Err(Error::InvalidConfig(format!(
                "output channel {output} missing from regressor sources"
            )));
        }
        if lags.iter().any(|&l| l == 0) {
            return Err(Error::InvalidConfig("every source needs at least one lag".into()));
        }
        Ok(ModelSpec { output, sources, lags })
    }

    pub fn max_lag(&self) -> usize {
        *self.lags.iter().max().expect("validated non-empty")
    }

    fn validate_against(&self, data: &TrialSet) -> Result<()> {
        for &ch in self.sources.iter().chain(std::iter::once(&self.output)) {
            if ch >= data.n_channels() {
                return Err(Error::InvalidConfig(format!(
                    "channel index {ch} out of range ({} channels)",
                    data.n_channels()
                )));
            }
        }
        Ok(())
    }
}

/// Identity of one candidate column: source position within the spec,
/// 1-based lag, dictionary atom index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermLabel {
    pub source_pos: usize,
    pub lag: usize,
    pub atom: usize,
}

/// Raw (unmodulated) candidate matrix: one column per (source, lag, atom),
/// rows are effective samples t_start..=N stacked trial by trial.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub labels: Vec<TermLabel>,
    pub phi: Array2<f64>,
    pub t_start: usize,
    pub n_eff: usize,
    pub n_trials: usize,
    pub n_samples: usize,
    pub spec: ModelSpec,
}

/// Expand every (source, lag, atom) combination into candidate columns.
/// Column order is source-major, then lag, then atom.
pub fn expand_regressors(
    data: &TrialSet,
    spec: &ModelSpec,
    dict: &BasisDictionary,
) -> Result<CandidateSet> {
    spec.validate_against(data)?;
    let n = data.n_samples();
    let max_lag = spec.max_lag();
    if max_lag >= n {
        return Err(Error::InsufficientData { needed: max_lag + 1, got: n });
    }
    let n_eff = n - max_lag;
    let t_start = max_lag + 1;
    let m = dict.len();
    let n_cols = spec.lags.iter().sum::<usize>() * m;
    let table = dict.tabulate(n);

    let mut phi = Array2::zeros((data.n_trials() * n_eff, n_cols).f());
    let mut labels = Vec::with_capacity(n_cols);
    let mut col = 0usize;
    for (source_pos, (&ch, &lag_bound)) in spec.sources.iter().zip(&spec.lags).enumerate() {
        for lag in 1..=lag_bound {
            for atom in 0..m {
                labels.push(TermLabel { source_pos, lag, atom });
                let atom_row = table.row(atom);
                let atom_vals = atom_row.to_slice().expect("table rows are contiguous");
                let mut column = phi.column_mut(col);
                let out = column.as_slice_mut().expect("f-order columns are contiguous");
                for trial in 0..data.n_trials() {
                    let sig = data.signal(trial, ch);
                    let dst = &mut out[trial * n_eff..(trial + 1) * n_eff];
                    let gains = &atom_vals[t_start - 1..n];
                    let lagged = &sig[t_start - 1 - lag..n - lag];
                    for ((d, &g), &s) in dst.iter_mut().zip(gains).zip(lagged) {
                        *d = g * s;
                    }
                }
                col += 1;
            }
        }
    }
    Ok(CandidateSet {
        labels,
        phi,
        t_start,
        n_eff,
        n_trials: data.n_trials(),
        n_samples: n,
        spec: spec.clone(),
    })
}

/// Row layout of one trial inside the augmented problem.
#[derive(Debug, Clone)]
pub struct TrialRows {
    pub raw: std::ops::Range<usize>,
    pub modulated: Vec<std::ops::Range<usize>>,
}

/// Augmented least-squares problem: per trial, the raw block followed by
/// one modulated block per derivative order. Output vectors are stacked
/// separately with [`UlsProblem::stack_output`] so several equations can
/// share the matrix.
#[derive(Debug, Clone)]
pub struct UlsProblem {
    pub labels: Vec<TermLabel>,
    pub phi: Array2<f64>,
    pub blocks: Vec<TrialRows>,
    pub n_raw_rows: usize,
    pub t_start: usize,
    pub n_eff: usize,
    pub n_samples: usize,
    pub spec: ModelSpec,
    bank: TestFunctionBank,
}

fn convolve_into(src: &[f64], weights: &[f64], dst: &mut [f64]) {
    let n0 = weights.len();
    for (p, out) in dst.iter_mut().enumerate() {
        let win = &src[p..p + n0];
        let mut acc = 0.0;
        for (a, b) in win.iter().zip(weights) {
            acc += a * b;
        }
        *out = acc;
    }
}

/// Stack raw and derivative-modulated row blocks for every candidate
/// column. An empty bank yields the plain least-squares problem.
pub fn modulate(cands: CandidateSet, bank: &TestFunctionBank) -> Result<UlsProblem> {
    let d = bank.deriv_order;
    let n0 = bank.support_len;
    let n_eff = cands.n_eff;
    if d > 0 && n_eff <= n0 {
        return Err(Error::InsufficientData { needed: n0 + cands.t_start, got: cands.n_samples });
    }
    let mod_len = if d > 0 { n_eff - n0 } else { 0 };
    let rows_per_trial = n_eff + d * mod_len;
    let total_rows = cands.n_trials * rows_per_trial;
    let n_cols = cands.labels.len();

    let mut blocks = Vec::with_capacity(cands.n_trials);
    for trial in 0..cands.n_trials {
        let base = trial * rows_per_trial;
        let raw = base..base + n_eff;
        let modulated = (0..d)
            .map(|v| {
                let s = base + n_eff + v * mod_len;
                s..s + mod_len
            })
            .collect();
        blocks.push(TrialRows { raw, modulated });
    }

    let mut phi = Array2::zeros((total_rows, n_cols).f());
    for col in 0..n_cols {
        let src_col = cands.phi.column(col);
        let src = src_col.as_slice().expect("f-order columns are contiguous");
        let mut dst_col = phi.column_mut(col);
        let dst = dst_col.as_slice_mut().expect("f-order columns are contiguous");
        for (trial, block) in blocks.iter().enumerate() {
            let raw_src = &src[trial * n_eff..(trial + 1) * n_eff];
            dst[block.raw.clone()].copy_from_slice(raw_src);
            for (v, range) in block.modulated.iter().enumerate() {
                convolve_into(raw_src, bank.derivative(v + 1), &mut dst[range.clone()]);
            }
        }
    }

    Ok(UlsProblem {
        labels: cands.labels,
        phi,
        blocks,
        n_raw_rows: cands.n_trials * n_eff,
        t_start: cands.t_start,
        n_eff,
        n_samples: cands.n_samples,
        spec: cands.spec,
        bank: bank.clone(),
    })
}

impl UlsProblem {
    pub fn n_rows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_trials(&self) -> usize {
        self.blocks.len()
    }

    /// Stack the output channel to match the matrix row layout.
    pub fn stack_output(&self, data: &TrialSet, channel: usize) -> Result<Vec<f64>> {
        if channel >= data.n_channels() {
            return Err(Error::InvalidConfig(format!("channel index {channel} out of range")));
        }
        if data.n_trials() != self.blocks.len() || data.n_samples() != self.n_samples {
            return Err(Error::Shape("output data does not match the problem layout".into()));
        }
        let mut x = vec![0.0; self.n_rows()];
        for (trial, block) in self.blocks.iter().enumerate() {
            let sig = data.signal(trial, channel);
            let raw = &sig[self.t_start - 1..self.n_samples];
            x[block.raw.clone()].copy_from_slice(raw);
            for (v, range) in block.modulated.iter().enumerate() {
                // raw block sits strictly before its modulated blocks
                let (head, tail) = x.split_at_mut(range.start);
                convolve_into(
                    &head[block.raw.clone()],
                    self.bank.derivative(v + 1),
                    &mut tail[..range.len()],
                );
            }
        }
        Ok(x)
    }

    /// Mean squared column norm, the scale behind the default ridge
    /// penalty.
    pub fn mean_sq_col_norm(&self) -> f64 {
        let n_cols = self.phi.ncols();
        if n_cols == 0 {
            return 0.0;
        }
        let total: f64 = self
            .phi
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum();
        total / n_cols as f64
    }
}
