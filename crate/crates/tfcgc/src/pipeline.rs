//! End-to-end estimation: trial set in, conditional causality maps out.
//!
//! Equations are fitted once per channel set in canonical channel order and
//! shared across every direction built from them; only the map assembly
//! cares about roles. Significance comes from across-trial permutation of
//! the source channel, which leaves the bivariate comparison fits intact.

use crate::basis::{build_dictionary, build_test_bank, TestFunctionBank};
use crate::cgc::{
    self, significance_mask, NormalizedModel, TfcgcMap, TimeFreqGrid, TvarModel,
};
use crate::seeding::{derive_rng, Domain};
use crate::selection::{
    forward_select, recover_coefficients, rls_fit, CoefficientTrajectories, SelectionConfig,
    StopRule, DEFAULT_MAX_TERMS, DEFAULT_PENALTY_ORDER, DEFAULT_RANK_TOL, DEFAULT_RESIDUAL_TOL,
    DEFAULT_RIDGE_SCALE, DEFAULT_RLS_INIT, DEFAULT_SCORE_FLOOR,
};
use crate::tvarx::{expand_regressors, modulate, ModelSpec, TrialSet};
use crate::{Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// Significance defaults for a standalone analysis.
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_PERMUTATIONS: usize = 999;
/// Cheaper defaults used by the benchmark runs.
pub const BENCH_ALPHA: f64 = 0.05;
pub const BENCH_PERMUTATIONS: usize = 19;

pub const DEFAULT_FORGETTING: f64 = 0.94;

/// Which estimator produces the coefficient trajectories. The forward
/// variants differ in score regularization, row augmentation, and stop
/// rule; the first two keep their textbook stops and inherit the
/// textbook failure modes (ols overfits signals whose noise share
/// exceeds the residual tolerance, rols sheds weak genuine terms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    /// Recursive least squares with exponential forgetting.
    Rls { forgetting: f64 },
    /// Forward regression on raw rows, unregularized scores, stopping at
    /// a fixed residual fraction of the output energy.
    Ols,
    /// Forward regression on raw rows, ridge-regularized scores, stopping
    /// when the best remaining score falls below a fixed floor.
    Rols,
    /// Forward regression on raw plus smoothness-probing rows with
    /// ridge-regularized scores, stopped at the prediction-error penalty
    /// minimum.
    Urols,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rls" => Ok(EstimatorKind::Rls { forgetting: DEFAULT_FORGETTING }),
            "ols" => Ok(EstimatorKind::Ols),
            "rols" => Ok(EstimatorKind::Rols),
            "urols" => Ok(EstimatorKind::Urols),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Rls { .. } => "rls",
            EstimatorKind::Ols => "ols",
            EstimatorKind::Rols => "rols",
            EstimatorKind::Urols => "urols",
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Spline orders mixed into the dictionary.
    pub orders: Vec<usize>,
    /// Dyadic dilation level of the dictionary.
    pub scale: u32,
    /// Autoregressive order applied to every channel.
    pub lag_order: usize,
    /// Number of smoothness-probing derivatives (0 disables augmentation).
    pub deriv_order: usize,
    /// Sample count of each probing function.
    pub support_len: usize,
    /// Ridge term; None derives it from the mean squared column norm.
    pub mu: Option<f64>,
    pub penalty_order: f64,
    pub max_terms: usize,
    pub rank_tol: f64,
    /// Innovation covariance smoothing rate.
    pub rho: f64,
    pub freq_points: usize,
    /// Spectral cells beyond this condition estimate are flagged.
    pub cond_cap: f64,
    pub estimator: EstimatorKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            orders: vec![3, 4, 5, 6],
            scale: 4,
            lag_order: 2,
            deriv_order: 2,
            support_len: 20,
            mu: None,
            penalty_order: DEFAULT_PENALTY_ORDER,
            max_terms: DEFAULT_MAX_TERMS,
            rank_tol: DEFAULT_RANK_TOL,
            rho: cgc::DEFAULT_SMOOTHING,
            freq_points: 101,
            cond_cap: cgc::DEFAULT_CONDITION_CAP,
            estimator: EstimatorKind::Urols,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lag_order == 0 {
            return Err(Error::InvalidConfig("lag order must be at least 1".into()));
        }
        if self.freq_points < 2 {
            return Err(Error::InvalidConfig("need at least 2 frequency points".into()));
        }
        if !(self.penalty_order > 0.0) {
            return Err(Error::InvalidConfig("penalty order must be positive".into()));
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0) {
                return Err(Error::InvalidConfig(format!("mu must be >= 0, got {mu}")));
            }
        }
        Ok(())
    }
}

/// One causal direction: source driving target given the conditioning
/// channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Direction {
    pub source: String,
    pub target: String,
    pub cond: String,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    /// Syntax: `SOURCE->TARGET|COND`.
    fn from_str(s: &str) -> Result<Self> {
        let (source, rest) = s
            .split_once("->")
            .ok_or_else(|| Error::InvalidConfig(format!("direction '{s}' lacks '->'")))?;
        let (target, cond) = rest
            .split_once('|')
            .ok_or_else(|| Error::InvalidConfig(format!("direction '{s}' lacks '|'")))?;
        let trim = |v: &str| v.trim().to_string();
        let d = Direction { source: trim(source), target: trim(target), cond: trim(cond) };
        if d.source.is_empty() || d.target.is_empty() || d.cond.is_empty() {
            return Err(Error::InvalidConfig(format!("direction '{s}' names an empty channel")));
        }
        Ok(d)
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}|{}", self.source, self.target, self.cond)
    }
}

/// Channel lookup tolerating case differences when unambiguous.
pub fn resolve_channel(data: &TrialSet, name: &str) -> Result<usize> {
    if let Ok(i) = data.channel_index(name) {
        return Ok(i);
    }
    let lower = name.to_ascii_lowercase();
    let hits: Vec<usize> = data
        .channel_names()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.to_ascii_lowercase() == lower)
        .map(|(i, _)| i)
        .collect();
    match hits.as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::UnknownChannel(name.to_string())),
    }
}

/// All six ordered directions of a three-channel record.
pub fn all_directions(data: &TrialSet) -> Result<Vec<Direction>> {
    let names = data.channel_names();
    if names.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "direction enumeration needs exactly 3 channels, got {}",
            names.len()
        )));
    }
    let mut out = Vec::with_capacity(6);
    for s in 0..3 {
        for t in 0..3 {
            if s == t {
                continue;
            }
            let c = 3 - s - t;
            out.push(Direction {
                source: names[s].clone(),
                target: names[t].clone(),
                cond: names[c].clone(),
            });
        }
    }
    Ok(out)
}

/// One fitted equation: coefficient trajectories plus per-trial residuals
/// over t = max_lag+1 ..= N.
#[derive(Debug, Clone)]
pub struct EqFit {
    pub trajectories: CoefficientTrajectories,
    pub residuals: Vec<Vec<f64>>,
    /// Terms kept by selection; zero for the recursive baseline.
    pub n_terms: usize,
}

/// Equations of every channel in a set, fitted jointly over that set's
/// regressors. Channels are kept sorted so fits are role-independent.
#[derive(Debug, Clone)]
pub struct ChannelFits {
    pub channels: Vec<usize>,
    pub fits: Vec<EqFit>,
}

impl ChannelFits {
    pub fn fit_for(&self, channel: usize) -> Result<&EqFit> {
        self.channels
            .iter()
            .position(|&c| c == channel)
            .map(|i| &self.fits[i])
            .ok_or_else(|| Error::InvalidConfig(format!("channel {channel} not in this fit set")))
    }

    /// Coefficient of `source` at `lag` in the equation for `eq_channel`,
    /// sample t.
    fn coeff(&self, eq_channel: usize, source: usize, lag: usize, t: usize) -> Result<f64> {
        let fit = self.fit_for(eq_channel)?;
        let pos = fit
            .trajectories
            .spec
            .sources
            .iter()
            .position(|&c| c == source)
            .ok_or_else(|| Error::InvalidConfig(format!("channel {source} not a regressor")))?;
        Ok(fit.trajectories.get(pos, lag)[t - 1])
    }
}

/// Fit one equation per channel of `channels`, all sharing the same
/// regressor expansion.
pub fn fit_channels(data: &TrialSet, channels: &[usize], cfg: &PipelineConfig) -> Result<ChannelFits> {
    cfg.validate()?;
    let mut sorted = channels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != channels.len() {
        return Err(Error::InvalidConfig("channel set contains duplicates".into()));
    }
    let lags = vec![cfg.lag_order; sorted.len()];

    let mut fits = Vec::with_capacity(sorted.len());
    match cfg.estimator {
        EstimatorKind::Rls { forgetting } => {
            for &ch in &sorted {
                let spec = ModelSpec::new(ch, sorted.clone(), lags.clone())?;
                let trajectories = rls_fit(data, &spec, forgetting, DEFAULT_RLS_INIT)?;
                let residuals =
                    (0..data.n_trials()).map(|tr| trajectories.residuals(data, tr)).collect();
                fits.push(EqFit { trajectories, residuals, n_terms: 0 });
            }
        }
        EstimatorKind::Ols | EstimatorKind::Rols | EstimatorKind::Urols => {
            let dict = build_dictionary(&cfg.orders, cfg.scale)?;
            let bank = if cfg.estimator == EstimatorKind::Urols {
                build_test_bank(cfg.deriv_order, cfg.support_len)?
            } else {
                TestFunctionBank::empty()
            };
            let spec0 = ModelSpec::new(sorted[0], sorted.clone(), lags.clone())?;
            let cands = expand_regressors(data, &spec0, &dict)?;
            let problem = modulate(cands, &bank)?;
            let mu = match cfg.estimator {
                EstimatorKind::Ols => 0.0,
                _ => cfg.mu.unwrap_or(DEFAULT_RIDGE_SCALE * problem.mean_sq_col_norm()),
            };
            let stop = match cfg.estimator {
                EstimatorKind::Ols => StopRule::ResidualFraction { tol: DEFAULT_RESIDUAL_TOL },
                EstimatorKind::Rols => StopRule::ScoreFloor { floor: DEFAULT_SCORE_FLOOR },
                _ => StopRule::PenaltyMinimum,
            };
            let sel = SelectionConfig {
                mu,
                penalty_order: cfg.penalty_order,
                max_terms: cfg.max_terms,
                rank_tol: cfg.rank_tol,
                stop,
            };
            for &ch in &sorted {
                let x = problem.stack_output(data, ch)?;
                let model = forward_select(&problem, &x, &sel)?;
                let spec = ModelSpec::new(ch, sorted.clone(), lags.clone())?;
                let trajectories =
                    recover_coefficients(&model, &dict, &spec, data.n_samples());
                let residuals =
                    (0..data.n_trials()).map(|tr| trajectories.residuals(data, tr)).collect();
                fits.push(EqFit { trajectories, residuals, n_terms: model.n_terms() });
            }
        }
    }
    Ok(ChannelFits { channels: sorted, fits })
}

fn assemble_model(
    fits: &ChannelFits,
    roles: &[usize],
    grid: &TimeFreqGrid,
    lag_order: usize,
    rho: f64,
    fs: f64,
) -> Result<NormalizedModel> {
    let k = roles.len();
    let mut coeffs = Vec::with_capacity(grid.times.len());
    for &t in &grid.times {
        let mut mats = Vec::with_capacity(lag_order);
        for lag in 1..=lag_order {
            let mut m = Array2::zeros((k, k));
            for r in 0..k {
                for c in 0..k {
                    m[(r, c)] = fits.coeff(roles[r], roles[c], lag, t)?;
                }
            }
            mats.push(m);
        }
        coeffs.push(mats);
    }
    let residual_sets: Vec<&[Vec<f64>]> = roles
        .iter()
        .map(|&ch| fits.fit_for(ch).map(|f| f.residuals.as_slice()))
        .collect::<Result<_>>()?;
    let sigma = cgc::residual_covariance(&residual_sets, rho)?;
    cgc::normalize(&TvarModel { fs, coeffs, sigma })
}

/// Map one direction from fitted equation sets. `tri` must cover all three
/// role channels, `biv` the (target, conditioning) pair.
pub fn direction_map(
    data: &TrialSet,
    tri: &ChannelFits,
    biv: &ChannelFits,
    roles: (usize, usize, usize),
    cfg: &PipelineConfig,
) -> Result<TfcgcMap> {
    let (target, source, cond) = roles;
    let t_start = cfg.lag_order + 1;
    let grid = TimeFreqGrid::new(t_start, data.n_samples(), data.fs(), cfg.freq_points)?;
    let tri_norm = assemble_model(tri, &[target, source, cond], &grid, cfg.lag_order, cfg.rho, data.fs())?;
    let biv_norm = assemble_model(biv, &[target, cond], &grid, cfg.lag_order, cfg.rho, data.fs())?;
    cgc::tfcgc_map(&tri_norm, &biv_norm, grid, cfg.cond_cap)
}

/// Across-trial permutation test settings.
#[derive(Debug, Clone)]
pub struct SignificanceConfig {
    pub alpha: f64,
    pub n_perm: usize,
    pub seed: u64,
}

impl SignificanceConfig {
    pub fn validate(&self, n_trials: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if (self.n_perm as f64) < 1.0 / self.alpha - 1.0 {
            return Err(Error::InvalidPermutationCount { n_perm: self.n_perm, alpha: self.alpha });
        }
        if n_trials < 2 {
            return Err(Error::InsufficientTrials { needed: 2, got: n_trials });
        }
        Ok(())
    }
}

/// A direction's map with optional permutation significance.
#[derive(Debug, Clone)]
pub struct DirectionAnalysis {
    pub direction: Direction,
    pub map: TfcgcMap,
    pub threshold: Option<f64>,
    pub significant: Option<Array2<bool>>,
}

fn unflagged_max(map: &TfcgcMap) -> f64 {
    map.gc
        .iter()
        .zip(map.flagged.iter())
        .filter(|(_, &fl)| !fl)
        .map(|(&v, _)| v)
        .fold(0.0, f64::max)
}

/// Analyze a batch of directions over one record, sharing fits wherever
/// the channel sets coincide. With a significance config, each source
/// channel's trials are permuted `n_perm` times and every direction is
/// thresholded by the upper order statistic of its surrogate map maxima.
pub fn analyze_directions(
    data: &TrialSet,
    dirs: &[Direction],
    cfg: &PipelineConfig,
    sig: Option<&SignificanceConfig>,
) -> Result<Vec<DirectionAnalysis>> {
    cfg.validate()?;
    if let Some(s) = sig {
        s.validate(data.n_trials())?;
    }
    let mut roles = Vec::with_capacity(dirs.len());
    for d in dirs {
        let t = resolve_channel(data, &d.target)?;
        let s = resolve_channel(data, &d.source)?;
        let c = resolve_channel(data, &d.cond)?;
        if t == s || s == c || t == c {
            return Err(Error::InvalidConfig(format!("direction '{d}' repeats a channel")));
        }
        roles.push((t, s, c));
    }

    let mut tri_fits: BTreeMap<Vec<usize>, ChannelFits> = BTreeMap::new();
    let mut biv_fits: BTreeMap<Vec<usize>, ChannelFits> = BTreeMap::new();
    for &(t, s, c) in &roles {
        let mut tri_key = vec![t, s, c];
        tri_key.sort_unstable();
        if !tri_fits.contains_key(&tri_key) {
            tri_fits.insert(tri_key.clone(), fit_channels(data, &tri_key, cfg)?);
        }
        let mut biv_key = vec![t, c];
        biv_key.sort_unstable();
        if !biv_fits.contains_key(&biv_key) {
            biv_fits.insert(biv_key.clone(), fit_channels(data, &biv_key, cfg)?);
        }
    }

    let mut maps = Vec::with_capacity(dirs.len());
    for (d, &(t, s, c)) in dirs.iter().zip(&roles) {
        let mut tri_key = vec![t, s, c];
        tri_key.sort_unstable();
        let mut biv_key = vec![t, c];
        biv_key.sort_unstable();
        let map = direction_map(data, &tri_fits[&tri_key], &biv_fits[&biv_key], (t, s, c), cfg)?;
        let _ = d;
        maps.push(map);
    }

    let mut thresholds: Vec<Option<f64>> = vec![None; dirs.len()];
    if let Some(s) = sig {
        // group directions by (permuted source, fitted triple); each group
        // shares its surrogate refits
        let mut groups: BTreeMap<(usize, Vec<usize>), Vec<usize>> = BTreeMap::new();
        for (i, &(t, src, c)) in roles.iter().enumerate() {
            let mut key = vec![t, src, c];
            key.sort_unstable();
            groups.entry((src, key)).or_default().push(i);
        }
        let mut maxima: Vec<Vec<f64>> = vec![Vec::with_capacity(s.n_perm); dirs.len()];
        for ((src, tri_key), members) in &groups {
            for p in 0..s.n_perm {
                let mut rng =
                    derive_rng(s.seed, Domain::Surrogate, (*src as u64) * s.n_perm as u64 + p as u64);
                let mut perm: Vec<usize> = (0..data.n_trials()).collect();
                perm.shuffle(&mut rng);
                let sdata = data.with_permuted_channel(*src, &perm)?;
                let stri = fit_channels(&sdata, tri_key, cfg)?;
                for &mi in members {
                    let (t, _, c) = roles[mi];
                    let mut biv_key = vec![t, c];
                    biv_key.sort_unstable();
                    let smap =
                        direction_map(data, &stri, &biv_fits[&biv_key], roles[mi], cfg)?;
                    maxima[mi].push(unflagged_max(&smap));
                }
            }
        }
        for (i, m) in maxima.iter().enumerate() {
            thresholds[i] = Some(cgc::permutation_threshold(m, s.alpha)?);
        }
    }

    Ok(dirs
        .iter()
        .zip(maps)
        .zip(thresholds)
        .map(|((d, map), threshold)| {
            let significant = threshold.map(|thr| significance_mask(&map, thr));
            DirectionAnalysis { direction: d.clone(), map, threshold, significant }
        })
        .collect())
}
