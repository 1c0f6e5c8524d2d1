//! Command-line front end: simulate benchmark records, map conditional
//! causality, score estimators against the exact references, and summarize
//! pairwise maps into net flows.
//!
//! Exit codes: 0 success, 1 usage, 2 numeric breakdown, 3 I/O.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tfcgc::cgc::{net_causal_flow, DEFAULT_CONDITION_CAP, DEFAULT_SMOOTHING};
use tfcgc::csvio;
use tfcgc::pipeline::{
    all_directions, analyze_directions, resolve_channel, Direction, EstimatorKind,
    PipelineConfig, SignificanceConfig, BENCH_ALPHA, BENCH_PERMUTATIONS, DEFAULT_ALPHA,
    DEFAULT_FORGETTING, DEFAULT_PERMUTATIONS,
};
use tfcgc::simkit::{self, score, theoretical_tfcgc, Scenario, ScenarioConfig};
use tfcgc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tfcgc",
    version,
    about = "Time-frequency conditional causality toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw trials from a built-in benchmark scenario
    Simulate(SimulateArgs),
    /// Map one causal direction from a trial CSV
    Cgc(CgcArgs),
    /// Run estimators over a scenario and score them against the truth
    Bench(BenchArgs),
    /// Summarize pairwise maps into per-node net causal flow
    Flow(FlowArgs),
}

/// Settings file support: `--config` supplies `key=value` defaults that
/// explicit flags override; `--echo-config` writes the effective settings.
#[derive(Args)]
struct ConfigIo {
    /// key=value settings file read before flag defaults apply
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// write the effective settings of this run
    #[arg(long, value_name = "FILE")]
    echo_config: Option<PathBuf>,
}

struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    fn load(cfg: &ConfigIo) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = &cfg.config {
            for (k, v) in csvio::read_kv(path)? {
                map.insert(k, v);
            }
        }
        Ok(Settings { map })
    }

    /// Flag wins; otherwise the settings file; otherwise the default.
    fn take<T: FromStr + Clone>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            self.map.remove(key);
            return Ok(v);
        }
        match self.map.remove(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|_| Error::InvalidConfig(format!("config key '{key}': bad value '{raw}'"))),
            None => Ok(default),
        }
    }

    fn take_opt<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if let Some(v) = flag {
            self.map.remove(key);
            return Ok(Some(v));
        }
        match self.map.remove(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("config key '{key}': bad value '{raw}'"))),
            None => Ok(None),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown config key '{key}'")));
        }
        Ok(())
    }
}

fn echo(path: Option<&PathBuf>, pairs: &[(String, String)]) -> Result<()> {
    if let Some(p) = path {
        csvio::write_kv(p, pairs)?;
    }
    Ok(())
}

fn kv(key: &str, val: impl ToString) -> (String, String) {
    (key.to_string(), val.to_string())
}

#[derive(Args)]
struct SimulateArgs {
    /// sim1 or sim2
    #[arg(long)]
    scenario: Option<String>,
    /// trial CSV destination
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// also dump the generating lag matrices
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    fs: Option<f64>,
    /// replace every equation's innovation variance
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    coupling_scale: Option<f64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[command(flatten)]
    cfg_io: ConfigIo,
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let mut s = Settings::load(&a.cfg_io)?;
    let scenario: Scenario = s
        .take("scenario", a.scenario, "sim1".to_string())?
        .parse()?;
    let base = ScenarioConfig::new(scenario);
    let cfg = ScenarioConfig {
        scenario,
        n_samples: s.take("samples", a.samples, base.n_samples)?,
        n_trials: s.take("trials", a.trials, base.n_trials)?,
        fs: s.take("fs", a.fs, base.fs)?,
        noise_var: s.take_opt("noise_var", a.noise_var)?,
        coupling_scale: s.take("coupling_scale", a.coupling_scale, 1.0)?,
        burn_in: s.take("burn_in", a.burn_in, base.burn_in)?,
    };
    let seed = s.take("seed", a.seed, 0)?;
    s.finish()?;

    let (data, sys) = simkit::simulate(&cfg, seed)?;
    csvio::write_trials(&a.out, &data)?;
    if let Some(truth) = &a.truth {
        csvio::write_truth(truth, &sys)?;
    }

    let mut pairs = vec![
        kv("scenario", scenario),
        kv("samples", cfg.n_samples),
        kv("trials", cfg.n_trials),
        kv("fs", cfg.fs),
        kv("coupling_scale", cfg.coupling_scale),
        kv("burn_in", cfg.burn_in),
        kv("seed", seed),
    ];
    if let Some(v) = cfg.noise_var {
        pairs.push(kv("noise_var", v));
    }
    echo(a.cfg_io.echo_config.as_ref(), &pairs)?;
    println!(
        "wrote {} trials x {} samples x {} channels to {}",
        data.n_trials(),
        data.n_samples(),
        data.n_channels(),
        a.out.display()
    );
    Ok(())
}

/// Estimation knobs shared by `cgc` and `bench`.
#[derive(Args)]
struct EstimationArgs {
    /// rls, ols, rols, or urols
    #[arg(long)]
    estimator: Option<String>,
    /// comma-separated spline orders of the dictionary
    #[arg(long)]
    orders: Option<String>,
    /// dyadic dilation level
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    lag_order: Option<usize>,
    /// smoothness-probing derivative count (0 disables)
    #[arg(long)]
    deriv_order: Option<usize>,
    /// probing-function sample count
    #[arg(long)]
    support_len: Option<usize>,
    /// ridge term (defaults to a fraction of the mean squared column norm)
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    penalty_order: Option<f64>,
    #[arg(long)]
    max_terms: Option<usize>,
    /// covariance smoothing rate
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    freq_points: Option<usize>,
    #[arg(long)]
    cond_cap: Option<f64>,
    /// forgetting factor of the recursive baseline
    #[arg(long)]
    forgetting: Option<f64>,
    /// worker threads (defaults to the machine's core count)
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_orders(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad spline order '{p}'")))
        })
        .collect()
}

struct ResolvedEstimation {
    cfg: PipelineConfig,
    threads: Option<usize>,
    forgetting: f64,
}

impl EstimationArgs {
    fn resolve(
        &self,
        s: &mut Settings,
        default_estimator: &str,
        default_forgetting: f64,
    ) -> Result<ResolvedEstimation> {
        let d = PipelineConfig::default();
        let forgetting = s.take("forgetting", self.forgetting, default_forgetting)?;
        let mut estimator: EstimatorKind = s
            .take("estimator", self.estimator.clone(), default_estimator.to_string())?
            .parse()?;
        if let EstimatorKind::Rls { .. } = estimator {
            estimator = EstimatorKind::Rls { forgetting };
        }
        let orders = match s.take_opt("orders", self.orders.clone())? {
            Some(raw) => parse_orders(&raw)?,
            None => d.orders.clone(),
        };
        let cfg = PipelineConfig {
            orders,
            scale: s.take("scale", self.scale, d.scale)?,
            lag_order: s.take("lag_order", self.lag_order, d.lag_order)?,
            deriv_order: s.take("deriv_order", self.deriv_order, d.deriv_order)?,
            support_len: s.take("support_len", self.support_len, d.support_len)?,
            mu: s.take_opt("mu", self.mu)?,
            penalty_order: s.take("penalty_order", self.penalty_order, d.penalty_order)?,
            max_terms: s.take("max_terms", self.max_terms, d.max_terms)?,
            rank_tol: d.rank_tol,
            rho: s.take("rho", self.rho, DEFAULT_SMOOTHING)?,
            freq_points: s.take("freq_points", self.freq_points, d.freq_points)?,
            cond_cap: s.take("cond_cap", self.cond_cap, DEFAULT_CONDITION_CAP)?,
            estimator,
        };
        let threads = s.take_opt("threads", self.threads)?;
        Ok(ResolvedEstimation { cfg, threads, forgetting })
    }

    fn echo_pairs(r: &ResolvedEstimation) -> Vec<(String, String)> {
        let orders: Vec<String> = r.cfg.orders.iter().map(|o| o.to_string()).collect();
        let mut pairs = vec![
            kv("estimator", r.cfg.estimator),
            kv("orders", orders.join(",")),
            kv("scale", r.cfg.scale),
            kv("lag_order", r.cfg.lag_order),
            kv("deriv_order", r.cfg.deriv_order),
            kv("support_len", r.cfg.support_len),
            kv("penalty_order", r.cfg.penalty_order),
            kv("max_terms", r.cfg.max_terms),
            kv("rho", r.cfg.rho),
            kv("freq_points", r.cfg.freq_points),
            kv("cond_cap", r.cfg.cond_cap),
            kv("forgetting", r.forgetting),
        ];
        if let Some(mu) = r.cfg.mu {
            pairs.push(kv("mu", mu));
        }
        pairs
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidConfig("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[derive(Args)]
struct CgcArgs {
    /// trial CSV produced by `simulate` (or matching its layout)
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// direction as SOURCE->TARGET|COND, e.g. "y->x|z"
    #[arg(long)]
    direction: Option<String>,
    /// map CSV destination
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// sampling rate of the input record
    #[arg(long)]
    fs: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n_perm: Option<usize>,
    /// skip the permutation test (required for single-trial records)
    #[arg(long)]
    no_significance: bool,
    #[command(flatten)]
    est: EstimationArgs,
    #[command(flatten)]
    cfg_io: ConfigIo,
}

fn run_cgc(a: CgcArgs) -> Result<()> {
    let mut s = Settings::load(&a.cfg_io)?;
    let fs = s.take("fs", a.fs, 200.0)?;
    let seed = s.take("seed", a.seed, 0)?;
    let alpha = s.take("alpha", a.alpha, DEFAULT_ALPHA)?;
    let n_perm = s.take("n_perm", a.n_perm, DEFAULT_PERMUTATIONS)?;
    let no_significance = s.take("no_significance", a.no_significance.then_some(true), false)?;
    let direction = s
        .take_opt("direction", a.direction)?
        .ok_or_else(|| Error::InvalidConfig("a direction is required (--direction or config key)".into()))?;
    let r = a.est.resolve(&mut s, "urols", DEFAULT_FORGETTING)?;
    s.finish()?;
    init_threads(r.threads)?;

    let data = csvio::read_trials(&a.input, fs)?;
    let dir: Direction = direction.parse()?;
    let sig = if no_significance {
        None
    } else {
        Some(SignificanceConfig { alpha, n_perm, seed })
    };
    let analyses = analyze_directions(&data, &[dir.clone()], &r.cfg, sig.as_ref())?;
    let analysis = &analyses[0];
    csvio::write_map(&a.out, &analysis.map, analysis.significant.as_ref())?;

    let mut pairs = vec![
        kv("direction", &dir),
        kv("fs", fs),
        kv("seed", seed),
        kv("no_significance", no_significance),
    ];
    if !no_significance {
        pairs.push(kv("alpha", alpha));
        pairs.push(kv("n_perm", n_perm));
    }
    pairs.extend(EstimationArgs::echo_pairs(&r));
    echo(a.cfg_io.echo_config.as_ref(), &pairs)?;

    match analysis.threshold {
        Some(thr) => println!(
            "{dir}: wrote {} with threshold {thr:.6e} ({} significant cells, {} flagged)",
            a.out.display(),
            analysis
                .significant
                .as_ref()
                .map_or(0, |m| m.iter().filter(|&&b| b).count()),
            analysis.map.n_flagged()
        ),
        None => println!(
            "{dir}: wrote {} ({} flagged cells)",
            a.out.display(),
            analysis.map.n_flagged()
        ),
    }
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    /// sim1 or sim2
    #[arg(long)]
    scenario: Option<String>,
    /// directory for metrics.csv and the per-estimator map files
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// comma-separated estimators, or "all"
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    coupling_scale: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n_perm: Option<usize>,
    #[command(flatten)]
    est: EstimationArgs,
    #[command(flatten)]
    cfg_io: ConfigIo,
}

fn parse_estimators(raw: &str) -> Result<Vec<String>> {
    if raw.trim() == "all" {
        return Ok(vec!["rls".into(), "ols".into(), "rols".into(), "urols".into()]);
    }
    Ok(raw.split(',').map(|p| p.trim().to_string()).collect())
}

fn map_file(dir: &Path, d: &Direction) -> PathBuf {
    dir.join(format!("{}_to_{}.csv", d.source, d.target))
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let mut s = Settings::load(&a.cfg_io)?;
    let scenario: Scenario = s
        .take("scenario", a.scenario, "sim2".to_string())?
        .parse()?;
    let base = ScenarioConfig::new(scenario);
    let scen_cfg = ScenarioConfig {
        scenario,
        n_samples: s.take("samples", a.samples, base.n_samples)?,
        n_trials: s.take("trials", a.trials, base.n_trials)?,
        fs: s.take::<f64>("fs", None, base.fs)?,
        noise_var: s.take_opt("noise_var", a.noise_var)?,
        coupling_scale: s.take("coupling_scale", a.coupling_scale, 1.0)?,
        burn_in: base.burn_in,
    };
    let seed = s.take("seed", a.seed, 0)?;
    let alpha = s.take("alpha", a.alpha, BENCH_ALPHA)?;
    let n_perm = s.take("n_perm", a.n_perm, BENCH_PERMUTATIONS)?;
    let estimators = parse_estimators(&s.take("estimators", a.estimators.clone(), "all".to_string())?)?;
    // the conventional forgetting for the trial-ensemble scenario is 0.90
    let default_forgetting = match scenario {
        Scenario::Sim1 => DEFAULT_FORGETTING,
        Scenario::Sim2 => 0.90,
    };
    let r = a.est.resolve(&mut s, "urols", default_forgetting)?;
    s.finish()?;
    init_threads(r.threads)?;

    std::fs::create_dir_all(&a.out_dir)?;
    let (data, sys) = simkit::simulate(&scen_cfg, seed)?;
    let dirs = all_directions(&data)?;
    // only these carry true causality; the single-trial scenario is scored
    // on them alone
    let nonzero: Vec<Direction> = match scenario {
        Scenario::Sim1 => vec!["y->x|z".parse().unwrap(), "z->x|y".parse().unwrap()],
        Scenario::Sim2 => vec!["x->y|z".parse().unwrap(), "y->z|x".parse().unwrap()],
    };

    // exact reference maps, written once
    let truth_dir = a.out_dir.join("truth");
    std::fs::create_dir_all(&truth_dir)?;
    let mut oracles = Vec::with_capacity(dirs.len());
    {
        let grid = tfcgc::cgc::TimeFreqGrid::new(
            r.cfg.lag_order + 1,
            data.n_samples(),
            data.fs(),
            r.cfg.freq_points,
        )?;
        for d in &dirs {
            let t = resolve_channel(&data, &d.target)?;
            let src = resolve_channel(&data, &d.source)?;
            let c = resolve_channel(&data, &d.cond)?;
            let oracle = theoretical_tfcgc(&sys, t, src, c, &grid, r.cfg.cond_cap)?;
            csvio::write_map(&map_file(&truth_dir, d), &oracle, None)?;
            oracles.push(oracle);
        }
    }

    let with_significance = scenario == Scenario::Sim2 && data.n_trials() >= 2;
    let mut rows = Vec::new();
    println!("{:<8} {:<10} {:>12} {:>12} {:>10}", "est", "direction", "mae", "rmse", "psnr");
    for name in &estimators {
        let mut cfg = r.cfg.clone();
        cfg.estimator = name.parse()?;
        if let EstimatorKind::Rls { .. } = cfg.estimator {
            cfg.estimator = EstimatorKind::Rls { forgetting: r.forgetting };
        }
        let sig = with_significance.then(|| SignificanceConfig { alpha, n_perm, seed });
        let analyses = analyze_directions(&data, &dirs, &cfg, sig.as_ref())?;

        let est_dir = a.out_dir.join(name);
        std::fs::create_dir_all(&est_dir)?;
        for (i, analysis) in analyses.iter().enumerate() {
            csvio::write_map(
                &map_file(&est_dir, &analysis.direction),
                &analysis.map,
                analysis.significant.as_ref(),
            )?;
            let scored = match scenario {
                Scenario::Sim1 => nonzero.contains(&analysis.direction),
                Scenario::Sim2 => true,
            };
            if !scored {
                continue;
            }
            let report = score(&analysis.map, analysis.significant.as_ref(), &oracles[i])?;
            println!(
                "{:<8} {:<10} {:>12.4e} {:>12.4e} {:>10.2}",
                name, analysis.direction, report.mae, report.rmse, report.psnr
            );
            rows.push(csvio::MetricsRow {
                scenario: scenario.to_string(),
                direction: analysis.direction.to_string(),
                estimator: name.clone(),
                mae: report.mae,
                rmse: report.rmse,
                psnr: report.psnr,
            });
        }
    }
    csvio::write_metrics(&a.out_dir.join("metrics.csv"), &rows)?;

    let mut pairs = vec![
        kv("scenario", scenario),
        kv("samples", scen_cfg.n_samples),
        kv("trials", scen_cfg.n_trials),
        kv("fs", scen_cfg.fs),
        kv("coupling_scale", scen_cfg.coupling_scale),
        kv("seed", seed),
        kv("alpha", alpha),
        kv("n_perm", n_perm),
        kv("estimators", estimators.join(",")),
    ];
    if let Some(v) = scen_cfg.noise_var {
        pairs.push(kv("noise_var", v));
    }
    pairs.extend(EstimationArgs::echo_pairs(&r));
    echo(a.cfg_io.echo_config.as_ref(), &pairs)?;
    println!("metrics written to {}", a.out_dir.join("metrics.csv").display());
    Ok(())
}

#[derive(Args)]
struct FlowArgs {
    /// directory holding <src>_to_<dst>.csv for every ordered pair
    #[arg(long, value_name = "DIR")]
    maps_dir: PathBuf,
    /// comma-separated node names
    #[arg(long)]
    nodes: String,
    /// per-node flow CSV destination
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// integration window and band edges (defaults: everything)
    #[arg(long)]
    t_min: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    f_min: Option<f64>,
    #[arg(long)]
    f_max: Option<f64>,
}

fn run_flow(a: FlowArgs) -> Result<()> {
    let nodes: Vec<String> = a.nodes.split(',').map(|n| n.trim().to_string()).collect();
    if nodes.len() < 2 || nodes.iter().any(|n| n.is_empty()) {
        return Err(Error::InvalidConfig(format!("need at least two node names, got '{}'", a.nodes)));
    }
    let n = nodes.len();

    let mut missing = Vec::new();
    let mut gains = ndarray::Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let path = a.maps_dir.join(format!("{}_to_{}.csv", nodes[i], nodes[j]));
            if !path.exists() {
                missing.push(path.display().to_string());
                continue;
            }
            let table = csvio::read_map(&path)?;
            let mut sum = 0.0;
            let mut count = 0usize;
            for (ti, &t) in table.times.iter().enumerate() {
                if a.t_min.is_some_and(|lo| t < lo) || a.t_max.is_some_and(|hi| t > hi) {
                    continue;
                }
                for (fi, &f) in table.freqs.iter().enumerate() {
                    if a.f_min.is_some_and(|lo| f < lo) || a.f_max.is_some_and(|hi| f > hi) {
                        continue;
                    }
                    if table.flagged[(ti, fi)] {
                        continue;
                    }
                    sum += table.gc[(ti, fi)];
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::InvalidConfig(format!(
                    "window selects no cells of {}",
                    path.display()
                )));
            }
            gains[(i, j)] = sum / count as f64;
        }
    }
    if !missing.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "missing map files: {}",
            missing.join(", ")
        )));
    }

    let flow = net_causal_flow(&gains)?;
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&a.out)?);
        writeln!(w, "node,flow")?;
        for (name, f) in nodes.iter().zip(&flow) {
            writeln!(w, "{name},{f:.16e}")?;
        }
        w.flush()?;
    }

    println!("mean interaction gains (row drives column):");
    print!("{:>8}", "");
    for name in &nodes {
        print!("{name:>12}");
    }
    println!();
    for (i, name) in nodes.iter().enumerate() {
        print!("{name:>8}");
        for j in 0..n {
            print!("{:>12.4e}", gains[(i, j)]);
        }
        println!();
    }
    println!("net flow per node:");
    for (name, f) in nodes.iter().zip(&flow) {
        println!("  {name:>6}  {f:>12.4e}");
    }
    println!("balance: {:.3e}", flow.iter().sum::<f64>());
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Simulate(a) => run_simulate(a),
        Cmd::Cgc(a) => run_cgc(a),
        Cmd::Bench(a) => run_bench(a),
        Cmd::Flow(a) => run_flow(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
