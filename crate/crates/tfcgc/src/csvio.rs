//! CSV formats used by the command-line tools.
//!
//! Trial sets: `trial,t,<ch>,...` with 0-based trials and 1-based samples.
//! Maps: `t,f,gc,significant,flagged`; a map written without a threshold
//! marks every unflagged cell significant. Metrics: one row per scored
//! direction. Truth tables: long-format lag-matrix entries. Floats are
//! written with 17 significant digits, so reads reproduce the bits.

use crate::cgc::TfcgcMap;
use crate::simkit::TrueSystem;
use crate::tvarx::TrialSet;
use crate::{Error, Result};
use ndarray::Array2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

fn parse_f64(field: &str, line_no: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line_no}: bad number '{field}'")))
}

fn parse_usize(field: &str, line_no: usize) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("line {line_no}: bad index '{field}'")))
}

fn parse_flag(field: &str, line_no: usize) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse(format!("line {line_no}: bad flag '{other}'"))),
    }
}

pub fn write_trials(path: &Path, data: &TrialSet) -> Result<()> {
    for name in data.channel_names() {
        if name.contains([',', '\n', '\r']) {
            return Err(Error::InvalidConfig(format!(
                "channel name '{name}' cannot appear in a CSV header"
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "trial,t")?;
    for name in data.channel_names() {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for tr in 0..data.n_trials() {
        for t in 1..=data.n_samples() {
            write!(w, "{tr},{t}")?;
            for ch in 0..data.n_channels() {
                write!(w, ",{}", fmt_f64(data.signal(tr, ch)[t - 1]))?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials(path: &Path, fs: f64) -> Result<TrialSet> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty trial file".into()))??;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 3 || cols[0] != "trial" || cols[1] != "t" {
        return Err(Error::Parse(format!("unexpected trial header '{header}'")));
    }
    let names: Vec<String> = cols[2..].iter().map(|s| s.to_string()).collect();
    let k = names.len();

    // rows[trial][t-1][ch]
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != k + 2 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected {} fields, got {}",
                k + 2,
                fields.len()
            )));
        }
        let trial = parse_usize(fields[0], line_no)?;
        let t = parse_usize(fields[1], line_no)?;
        if trial >= rows.len() {
            if trial != rows.len() {
                return Err(Error::Parse(format!("line {line_no}: trial {trial} out of order")));
            }
            rows.push(Vec::new());
        }
        if t != rows[trial].len() + 1 {
            return Err(Error::Parse(format!("line {line_no}: sample {t} out of order")));
        }
        let mut vals = Vec::with_capacity(k);
        for f in &fields[2..] {
            vals.push(parse_f64(f, line_no)?);
        }
        rows[trial].push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Parse("trial file holds no samples".into()));
    }
    let n = rows[0].len();
    let mut trials = Vec::with_capacity(rows.len());
    for (tr, samples) in rows.iter().enumerate() {
        if samples.len() != n {
            return Err(Error::Parse(format!(
                "trial {tr} holds {} samples, expected {n}",
                samples.len()
            )));
        }
        let mut arr = Array2::zeros((k, n));
        for (t, vals) in samples.iter().enumerate() {
            for ch in 0..k {
                arr[(ch, t)] = vals[ch];
            }
        }
        trials.push(arr);
    }
    TrialSet::new(names, fs, trials)
}

pub fn write_map(path: &Path, map: &TfcgcMap, mask: Option<&Array2<bool>>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,f,gc,significant,flagged")?;
    for (i, &t) in map.grid.times.iter().enumerate() {
        for (fi, &f) in map.grid.freqs.iter().enumerate() {
            let flagged = map.flagged[(i, fi)];
            let significant = match mask {
                Some(m) => m[(i, fi)],
                None => !flagged,
            };
            writeln!(
                w,
                "{t},{},{},{},{}",
                fmt_f64(f),
                fmt_f64(map.gc[(i, fi)]),
                significant as u8,
                flagged as u8
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A map read back from disk; carries no sampling-rate information.
#[derive(Debug, Clone)]
pub struct MapTable {
    pub times: Vec<usize>,
    pub freqs: Vec<f64>,
    pub gc: Array2<f64>,
    pub significant: Array2<bool>,
    pub flagged: Array2<bool>,
}

pub fn read_map(path: &Path) -> Result<MapTable> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty map file".into()))??;
    if header.trim_end() != "t,f,gc,significant,flagged" {
        return Err(Error::Parse(format!("unexpected map header '{header}'")));
    }
    let mut cells: Vec<(usize, f64, f64, bool, bool)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("line {line_no}: expected 5 fields")));
        }
        cells.push((
            parse_usize(fields[0], line_no)?,
            parse_f64(fields[1], line_no)?,
            parse_f64(fields[2], line_no)?,
            parse_flag(fields[3], line_no)?,
            parse_flag(fields[4], line_no)?,
        ));
    }
    let mut times: Vec<usize> = cells.iter().map(|c| c.0).collect();
    times.sort_unstable();
    times.dedup();
    let mut freqs: Vec<f64> = cells.iter().map(|c| c.1).collect();
    freqs.sort_by(|a, b| a.total_cmp(b));
    freqs.dedup();
    if times.is_empty() || freqs.is_empty() || cells.len() != times.len() * freqs.len() {
        return Err(Error::Parse(format!(
            "map is not a full grid: {} cells for {} times x {} frequencies",
            cells.len(),
            times.len(),
            freqs.len()
        )));
    }
    let mut gc = Array2::zeros((times.len(), freqs.len()));
    let mut significant = Array2::from_elem(gc.dim(), false);
    let mut flagged = Array2::from_elem(gc.dim(), false);
    let mut seen = Array2::from_elem(gc.dim(), false);
    for (t, f, v, s, fl) in cells {
        let i = times.binary_search(&t).expect("time from this set");
        let fi = freqs
            .binary_search_by(|x| x.total_cmp(&f))
            .map_err(|_| Error::Parse("frequency drifted during sort".into()))?;
        if seen[(i, fi)] {
            return Err(Error::Parse(format!("duplicate cell t={t}, f={f}")));
        }
        seen[(i, fi)] = true;
        gc[(i, fi)] = v;
        significant[(i, fi)] = s;
        flagged[(i, fi)] = fl;
    }
    Ok(MapTable { times, freqs, gc, significant, flagged })
}

#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub scenario: String,
    pub direction: String,
    pub estimator: String,
    pub mae: f64,
    pub rmse: f64,
    pub psnr: f64,
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "scenario,direction,estimator,mae,rmse,psnr")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.scenario,
            r.direction,
            r.estimator,
            fmt_f64(r.mae),
            fmt_f64(r.rmse),
            fmt_f64(r.psnr)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format dump of the generating model's lag-matrix entries.
pub fn write_truth(path: &Path, sys: &TrueSystem) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "equation,source,lag,t,value")?;
    let names = &sys.channel_names;
    for (ti, mats) in sys.coeffs.iter().enumerate() {
        for (li, m) in mats.iter().enumerate() {
            for r in 0..names.len() {
                for c in 0..names.len() {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        names[r],
                        names[c],
                        li + 1,
                        ti + 1,
                        fmt_f64(m[(r, c)])
                    )?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `key=value` settings file; blank lines and `#` comments are skipped.
pub fn read_kv(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn write_kv(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in pairs {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}
