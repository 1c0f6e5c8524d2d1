//! Benchmark scenario generators, their exact reference maps, and scoring.
//!
//! Both scenarios are three-channel second-order autoregressions with
//! time-varying lag-one couplings. The reference map for a direction is
//! computed through the production spectral path from the true lag
//! matrices, with the bivariate comparison model formed by deleting the
//! source channel's terms while keeping everything else.

use crate::cgc::{self, TfcgcMap, TimeFreqGrid, TvarModel};
use crate::seeding::{derive_rng, Domain};
use crate::tvarx::TrialSet;
use crate::{Error, Result};
use ndarray::Array2;
use rand_distr::{Distribution, Normal};

/// Built-in benchmark scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One long trial: two oscillators drive the first channel, one with a
    /// sinusoidally gated gain, the other with a triangular burst peaking
    /// mid-record. Third channel noise is ten times quieter.
    Sim1,
    /// Trial ensemble: a chain x -> y -> z whose first link is active in
    /// the first half of the record and second link in the second half.
    Sim2,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sim1" => Ok(Scenario::Sim1),
            "sim2" => Ok(Scenario::Sim2),
            other => Err(Error::InvalidConfig(format!("unknown scenario '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::Sim1 => "sim1",
            Scenario::Sim2 => "sim2",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n_samples: usize,
    pub n_trials: usize,
    pub fs: f64,
    /// Replaces every equation's innovation variance when set.
    pub noise_var: Option<f64>,
    /// Multiplies the time-varying couplings.
    pub coupling_scale: f64,
    /// Presamples discarded before recording, couplings frozen at their
    /// first-sample value.
    pub burn_in: usize,
}

impl ScenarioConfig {
    pub fn sim1() -> Self {
        ScenarioConfig {
            scenario: Scenario::Sim1,
            n_samples: 2000,
            n_trials: 1,
            fs: 200.0,
            noise_var: None,
            coupling_scale: 1.0,
            burn_in: 200,
        }
    }

    pub fn sim2() -> Self {
        ScenarioConfig {
            scenario: Scenario::Sim2,
            n_samples: 1000,
            n_trials: 20,
            fs: 200.0,
            noise_var: None,
            coupling_scale: 1.0,
            burn_in: 200,
        }
    }

    pub fn new(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Sim1 => Self::sim1(),
            Scenario::Sim2 => Self::sim2(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples < 4 {
            return Err(Error::InsufficientData { needed: 4, got: self.n_samples });
        }
        if self.n_trials == 0 {
            return Err(Error::InsufficientTrials { needed: 1, got: 0 });
        }
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return Err(Error::InvalidConfig(format!("sampling rate {} Hz", self.fs)));
        }
        if !self.coupling_scale.is_finite() {
            return Err(Error::InvalidConfig("coupling scale must be finite".into()));
        }
        if let Some(v) = self.noise_var {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("noise variance {v}")));
            }
        }
        Ok(())
    }
}

/// The generating model: true lag matrices per sample and the diagonal
/// innovation variances.
#[derive(Debug, Clone)]
pub struct TrueSystem {
    pub fs: f64,
    pub n_samples: usize,
    pub channel_names: Vec<String>,
    /// coeffs[t-1][l-1] is the 3x3 lag-l matrix at sample t.
    pub coeffs: Vec<Vec<Array2<f64>>>,
    pub noise_var: Vec<f64>,
}

impl TrueSystem {
    pub fn max_lag(&self) -> usize {
        self.coeffs.first().map_or(0, |m| m.len())
    }
}

pub fn true_system(cfg: &ScenarioConfig) -> Result<TrueSystem> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let (own1, own2, base_var): ([f64; 3], [f64; 3], [f64; 3]) = match cfg.scenario {
        Scenario::Sim1 => ([0.59, 1.58, 0.60], [-0.2, -0.96, -0.91], [0.01, 0.01, 0.001]),
        Scenario::Sim2 => ([0.53; 3], [0.53; 3].map(|_| -0.8), [0.01; 3]),
    };
    let noise_var = match cfg.noise_var {
        Some(v) => vec![v; 3],
        None => base_var.to_vec(),
    };

    let mut coeffs = Vec::with_capacity(n);
    for t in 1..=n {
        let mut m1 = Array2::zeros((3, 3));
        let mut m2 = Array2::zeros((3, 3));
        for c in 0..3 {
            m1[(c, c)] = own1[c];
            m2[(c, c)] = own2[c];
        }
        match cfg.scenario {
            Scenario::Sim1 => {
                let sec = t as f64 / cfg.fs;
                // gain gated by a 2 s sinusoid, and a triangular burst
                // peaking at mid-record
                let half = n as f64 / 2.0;
                let gate = 0.25 * (1.0 + (std::f64::consts::PI * sec * 2.0 / 2.0).sin());
                let burst = (1.0 - (t as f64 - half).abs() / half).max(0.0);
                m1[(0, 1)] = cfg.coupling_scale * gate;
                m1[(0, 2)] = cfg.coupling_scale * burst;
            }
            Scenario::Sim2 => {
                let first_half = t <= n / 2;
                m1[(1, 0)] = if first_half { 0.5 * cfg.coupling_scale } else { 0.0 };
                m1[(2, 1)] = if first_half { 0.0 } else { 0.5 * cfg.coupling_scale };
            }
        }
        coeffs.push(vec![m1, m2]);
    }
    Ok(TrueSystem {
        fs: cfg.fs,
        n_samples: n,
        channel_names: vec!["x".into(), "y".into(), "z".into()],
        coeffs,
        noise_var,
    })
}

/// Draw trials from the scenario. Each trial consumes its own derived
/// random stream, so the set is reproducible and order-independent.
pub fn simulate(cfg: &ScenarioConfig, master_seed: u64) -> Result<(TrialSet, TrueSystem)> {
    let sys = true_system(cfg)?;
    let p = sys.max_lag();
    let dists: Vec<Normal<f64>> = sys
        .noise_var
        .iter()
        .map(|&v| Normal::new(0.0, v.sqrt()).map_err(|e| Error::InvalidConfig(e.to_string())))
        .collect::<Result<_>>()?;

    let mut trials = Vec::with_capacity(cfg.n_trials);
    for trial in 0..cfg.n_trials {
        let mut rng = derive_rng(master_seed, Domain::SimTrial, trial as u64);
        let total = cfg.burn_in + cfg.n_samples;
        let mut hist = vec![[0.0f64; 3]; total + p];
        for step in 0..total {
            // burn-in steps reuse the first-sample coupling values
            let t = step.saturating_sub(cfg.burn_in);
            let mats = &sys.coeffs[t.min(sys.n_samples - 1)];
            let idx = step + p;
            for ch in 0..3 {
                let mut v = dists[ch].sample(&mut rng);
                for (l, m) in mats.iter().enumerate() {
                    for src in 0..3 {
                        v += m[(ch, src)] * hist[idx - l - 1][src];
                    }
                }
                hist[idx][ch] = v;
            }
        }
        let mut arr = Array2::zeros((3, cfg.n_samples));
        for t in 0..cfg.n_samples {
            for ch in 0..3 {
                arr[(ch, t)] = hist[cfg.burn_in + p + t][ch];
            }
        }
        trials.push(arr);
    }
    let data = TrialSet::new(sys.channel_names.clone(), cfg.fs, trials)?;
    Ok((data, sys))
}

/// Exact conditional causality map of the generating model for one
/// direction, through the production spectral path. The bivariate side is
/// the true model with the source channel's terms deleted.
pub fn theoretical_tfcgc(
    sys: &TrueSystem,
    target: usize,
    source: usize,
    cond: usize,
    grid: &TimeFreqGrid,
    cond_cap: f64,
) -> Result<TfcgcMap> {
    let roles = [target, source, cond];
    if target >= 3 || source >= 3 || cond >= 3 || target == source || source == cond || target == cond
    {
        return Err(Error::InvalidConfig(format!(
            "roles must be three distinct channels, got {roles:?}"
        )));
    }
    let pair = [target, cond];
    let mut tri_coeffs = Vec::with_capacity(grid.times.len());
    let mut biv_coeffs = Vec::with_capacity(grid.times.len());
    for &t in &grid.times {
        if t < 1 || t > sys.n_samples {
            return Err(Error::Shape(format!("grid time {t} outside the record")));
        }
        let mats = &sys.coeffs[t - 1];
        let tri: Vec<Array2<f64>> = mats
            .iter()
            .map(|m| Array2::from_shape_fn((3, 3), |(r, c)| m[(roles[r], roles[c])]))
            .collect();
        let biv: Vec<Array2<f64>> = mats
            .iter()
            .map(|m| Array2::from_shape_fn((2, 2), |(r, c)| m[(pair[r], pair[c])]))
            .collect();
        tri_coeffs.push(tri);
        biv_coeffs.push(biv);
    }
    let tri_sigma = Array2::from_diag(&ndarray::Array1::from_iter(
        roles.iter().map(|&r| sys.noise_var[r]),
    ));
    let biv_sigma = Array2::from_diag(&ndarray::Array1::from_iter(
        pair.iter().map(|&r| sys.noise_var[r]),
    ));
    let n_t = grid.times.len();
    let tri = cgc::normalize(&TvarModel {
        fs: sys.fs,
        coeffs: tri_coeffs,
        sigma: vec![tri_sigma; n_t],
    })?;
    let biv = cgc::normalize(&TvarModel {
        fs: sys.fs,
        coeffs: biv_coeffs,
        sigma: vec![biv_sigma; n_t],
    })?;
    cgc::tfcgc_map(&tri, &biv, grid.clone(), cond_cap)
}

/// Map agreement scores. Cells flagged in either map are excluded.
#[derive(Debug, Clone, Copy)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    pub psnr: f64,
    pub max_ref: f64,
    pub n_scored: usize,
}

/// Compare an estimated map against the reference. An optional
/// significance mask zeroes non-significant estimate cells first.
pub fn score(
    estimate: &TfcgcMap,
    mask: Option<&Array2<bool>>,
    oracle: &TfcgcMap,
) -> Result<MetricsReport> {
    if estimate.gc.dim() != oracle.gc.dim() {
        return Err(Error::Shape(format!(
            "map shapes differ: {:?} vs {:?}",
            estimate.gc.dim(),
            oracle.gc.dim()
        )));
    }
    if estimate.grid.times != oracle.grid.times || estimate.grid.freqs != oracle.grid.freqs {
        return Err(Error::Shape("maps cover different grids".into()));
    }
    if let Some(m) = mask {
        if m.dim() != estimate.gc.dim() {
            return Err(Error::Shape("mask shape differs from the map".into()));
        }
    }
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut max_ref = 0.0f64;
    let mut n = 0usize;
    for (idx, &o) in oracle.gc.indexed_iter() {
        if estimate.flagged[idx] || oracle.flagged[idx] {
            continue;
        }
        let mut e = estimate.gc[idx];
        if let Some(m) = mask {
            if !m[idx] {
                e = 0.0;
            }
        }
        let d = e - o;
        abs_sum += d.abs();
        sq_sum += d * d;
        max_ref = max_ref.max(o.abs());
        n += 1;
    }
    if n == 0 {
        return Err(Error::Shape("every cell is flagged; nothing to score".into()));
    }
    let mae = abs_sum / n as f64;
    let rmse = (sq_sum / n as f64).sqrt();
    let psnr = if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (max_ref / rmse).log10()
    };
    Ok(MetricsReport { mae, rmse, psnr, max_ref, n_scored: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgc::DEFAULT_CONDITION_CAP;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn trials_are_reproducible_and_seed_sensitive() {
        let cfg = ScenarioConfig { n_samples: 300, n_trials: 2, ..ScenarioConfig::sim2() };
        let (a, _) = simulate(&cfg, 42).unwrap();
        let (b, _) = simulate(&cfg, 42).unwrap();
        let (c, _) = simulate(&cfg, 43).unwrap();
        for tr in 0..2 {
            assert_eq!(a.trial(tr), b.trial(tr));
            assert_ne!(a.trial(tr), c.trial(tr));
        }
        assert_ne!(a.trial(0), a.trial(1));
    }

    #[test]
    fn trial_streams_do_not_depend_on_trial_count() {
        let small = ScenarioConfig { n_samples: 200, n_trials: 1, ..ScenarioConfig::sim2() };
        let large = ScenarioConfig { n_samples: 200, n_trials: 3, ..ScenarioConfig::sim2() };
        let (a, _) = simulate(&small, 7).unwrap();
        let (b, _) = simulate(&large, 7).unwrap();
        assert_eq!(a.trial(0), b.trial(0));
    }

    #[test]
    fn zero_noise_gives_a_silent_system() {
        let cfg = ScenarioConfig {
            n_samples: 100,
            noise_var: Some(0.0),
            ..ScenarioConfig::sim1()
        };
        let (data, _) = simulate(&cfg, 1).unwrap();
        for ch in 0..3 {
            assert!(data.signal(0, ch).iter().all(|&v| v == 0.0));
        }
    }

    fn band_power(sig: &[f64], fs: f64, f: f64) -> f64 {
        let n = sig.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in sig.iter().enumerate() {
            let ph = 2.0 * PI * f * t as f64 / fs;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        (re * re + im * im) / n
    }

    #[test]
    fn oscillator_channel_peaks_near_twenty_hz() {
        let (data, _) = simulate(&ScenarioConfig::sim1(), 3).unwrap();
        let y = data.signal(0, 1);
        let mut best = (0.0, 0.0);
        let mut f = 10.0;
        while f <= 30.0 {
            let p = band_power(y, 200.0, f);
            if p > best.1 {
                best = (f, p);
            }
            f += 0.1;
        }
        assert!((19.0..=22.0).contains(&best.0), "peak at {} Hz", best.0);
    }

    #[test]
    fn chain_tail_is_uncoupled_from_the_head_early_on() {
        let (data, _) = simulate(&ScenarioConfig::sim2(), 11).unwrap();
        let half = 500;
        let mut acc = 0.0;
        for tr in 0..data.n_trials() {
            let x = &data.signal(tr, 0)[..half];
            let z = &data.signal(tr, 2)[..half];
            let (mut sxz, mut sxx, mut szz) = (0.0, 0.0, 0.0);
            for (a, b) in x.iter().zip(z) {
                sxz += a * b;
                sxx += a * a;
                szz += b * b;
            }
            acc += sxz / (sxx.sqrt() * szz.sqrt());
        }
        let mean_corr = acc / data.n_trials() as f64;
        assert!(mean_corr.abs() < 0.05, "mean correlation {mean_corr}");
    }

    #[test]
    fn chain_reference_map_is_on_only_while_the_link_is_active() {
        let sys = true_system(&ScenarioConfig::sim2()).unwrap();
        let grid = TimeFreqGrid::new(3, 1000, 200.0, 51).unwrap();
        // x drives y in the first half only
        let map = theoretical_tfcgc(&sys, 1, 0, 2, &grid, DEFAULT_CONDITION_CAP).unwrap();
        assert_eq!(map.n_flagged(), 0);
        let n_t = map.grid.times.len();
        let mut first_peak = 0.0f64;
        for (i, &t) in map.grid.times.iter().enumerate() {
            for fi in 0..map.grid.freqs.len() {
                let v = map.gc[(i, fi)];
                if t <= 500 {
                    first_peak = first_peak.max(v);
                } else {
                    assert!(v <= 1e-12, "t {t} carries {v}");
                }
            }
            if i + 1 == n_t {
                break;
            }
        }
        assert!(first_peak > 1.0 && first_peak < 3.0, "peak {first_peak}");
        // the peak sits at the oscillators' resonance
        let mid_row = map.grid.times.iter().position(|&t| t == 250).unwrap();
        let best_f = (0..map.grid.freqs.len())
            .max_by(|&a, &b| map.gc[(mid_row, a)].total_cmp(&map.gc[(mid_row, b)]))
            .map(|fi| map.grid.freqs[fi])
            .unwrap();
        assert!((30.0..=50.0).contains(&best_f), "peak at {best_f} Hz");
    }

    #[test]
    fn reverse_direction_reference_is_exactly_zero() {
        let sys = true_system(&ScenarioConfig::sim2()).unwrap();
        let grid = TimeFreqGrid::new(3, 1000, 200.0, 21).unwrap();
        // y never feeds back into x
        let map = theoretical_tfcgc(&sys, 0, 1, 2, &grid, DEFAULT_CONDITION_CAP).unwrap();
        for &v in map.gc.iter() {
            assert_eq!(v, 0.0);
        }
        // indirect route x -> z is blocked by conditioning on y; tiny
        // rounding residue is tolerable, structure is not
        let map = theoretical_tfcgc(&sys, 2, 0, 1, &grid, DEFAULT_CONDITION_CAP).unwrap();
        for &v in map.gc.iter() {
            assert!(v < 1e-12, "leaked {v}");
        }
    }

    #[test]
    fn burst_reference_map_peaks_mid_record() {
        let sys = true_system(&ScenarioConfig::sim1()).unwrap();
        let grid = TimeFreqGrid::new(3, 2000, 200.0, 101).unwrap();
        // z drives x through the triangular burst
        let map = theoretical_tfcgc(&sys, 0, 2, 1, &grid, DEFAULT_CONDITION_CAP).unwrap();
        let row_at = |t: usize| map.grid.times.iter().position(|&x| x == t).unwrap();
        let row_mid = row_at(1000);
        let row_edge = row_at(60);
        let peak_mid: f64 = (0..101).map(|fi| map.gc[(row_mid, fi)]).fold(0.0, f64::max);
        let peak_edge: f64 = (0..101).map(|fi| map.gc[(row_edge, fi)]).fold(0.0, f64::max);
        assert!(peak_mid > 10.0 * peak_edge, "mid {peak_mid} vs edge {peak_edge}");
        // z resonates just under the Nyquist midpoint
        let best_f = (0..101)
            .max_by(|&a, &b| map.gc[(row_mid, a)].total_cmp(&map.gc[(row_mid, b)]))
            .map(|fi| map.grid.freqs[fi])
            .unwrap();
        assert!((35.0..=45.0).contains(&best_f), "peak at {best_f} Hz");
    }

    #[test]
    fn scoring_edge_cases() {
        let sys = true_system(&ScenarioConfig::sim2()).unwrap();
        let grid = TimeFreqGrid::new(3, 200, 200.0, 11).unwrap();
        let map = theoretical_tfcgc(&sys, 1, 0, 2, &grid, DEFAULT_CONDITION_CAP).unwrap();
        let perfect = score(&map, None, &map).unwrap();
        assert_eq!(perfect.mae, 0.0);
        assert_eq!(perfect.rmse, 0.0);
        assert!(perfect.psnr.is_infinite() && perfect.psnr > 0.0);

        // all-suppressing mask scores the zero map
        let mask = Array2::from_elem(map.gc.dim(), false);
        let zeroed = score(&map, Some(&mask), &map).unwrap();
        assert!(zeroed.mae <= zeroed.rmse + 1e-15);
        assert!(zeroed.rmse > 0.0);
        assert!(zeroed.psnr.is_finite());

        // a zero reference with a nonzero estimate drives the ratio to
        // negative infinity
        let zero_oracle = TfcgcMap {
            grid: map.grid.clone(),
            gc: Array2::zeros(map.gc.dim()),
            flagged: Array2::from_elem(map.gc.dim(), false),
            min_preclamp: 0.0,
        };
        let r = score(&map, None, &zero_oracle).unwrap();
        assert!(r.psnr.is_infinite() && r.psnr < 0.0);
    }

    #[test]
    fn flagged_cells_never_enter_the_score() {
        let sys = true_system(&ScenarioConfig::sim2()).unwrap();
        let grid = TimeFreqGrid::new(3, 100, 200.0, 5).unwrap();
        let map = theoretical_tfcgc(&sys, 1, 0, 2, &grid, DEFAULT_CONDITION_CAP).unwrap();
        let mut wrecked = map.clone();
        let full = score(&map, None, &map).unwrap();
        wrecked.gc[(0, 0)] = 1e9;
        wrecked.flagged[(0, 0)] = true;
        let r = score(&wrecked, None, &map).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.n_scored, full.n_scored - 1);
    }

    #[test]
    fn default_noise_floors_match_the_scenarios() {
        let s1 = true_system(&ScenarioConfig::sim1()).unwrap();
        assert_eq!(s1.noise_var, vec![0.01, 0.01, 0.001]);
        let s2 = true_system(&ScenarioConfig::sim2()).unwrap();
        assert_eq!(s2.noise_var, vec![0.01; 3]);
        let swept = true_system(&ScenarioConfig {
            noise_var: Some(0.1),
            ..ScenarioConfig::sim2()
        })
        .unwrap();
        assert_eq!(swept.noise_var, vec![0.1; 3]);
    }

    #[test]
    fn gate_profile_oscillates_and_burst_is_triangular() {
        let sys = true_system(&ScenarioConfig::sim1()).unwrap();
        let gate: Vec<f64> = sys.coeffs.iter().map(|m| m[0][(0, 1)]).collect();
        let burst: Vec<f64> = sys.coeffs.iter().map(|m| m[0][(0, 2)]).collect();
        // 2 s period at 200 Hz: 400 samples
        assert_abs_diff_eq!(gate[0], gate[400], epsilon = 1e-12);
        let lo = gate.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = gate.iter().cloned().fold(0.0f64, f64::max);
        assert!(lo >= 0.0 && lo < 0.01, "gate floor {lo}");
        assert!(hi > 0.49 && hi <= 0.5, "gate ceiling {hi}");
        assert_abs_diff_eq!(burst[999], 1.0, epsilon = 1e-9);
        assert!(burst[0] < 0.0015 && burst[1999] < 0.0015);
        // linear rise: equal increments
        let d1 = burst[500] - burst[499];
        let d2 = burst[100] - burst[99];
        assert_abs_diff_eq!(d1, d2, epsilon = 1e-12);
    }
}
