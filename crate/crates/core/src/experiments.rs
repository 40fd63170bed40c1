//! Batch harnesses: phase-transition sweeps over `(n, p)` and the `p = 0`
//! defection-time experiment.
//!
//! Every run gets its own seed from [`derive_seed`], so records depend only on
//! the master seed and the cell indices, never on scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_until_absorbed, InitConfig, Outcome, Strategy, StrategyKind};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const DEFAULT_REPS: usize = 100;
pub const DEFAULT_MAX_STEPS: u64 = 43_000_000;
pub const DEFAULT_BAND_CONSTANT: f64 = 3.0;
pub const CSV_HEADER: [&str; 8] = ["strategy", "n", "p", "rep", "seed", "steps", "outcome", "coop_fraction"];

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `h = splitmix64(master)`, then `h = splitmix64(h ^ x)` for `x` in
/// `(n_index, p_index, rep)`.
pub fn derive_seed(master_seed: u64, n_index: usize, p_index: usize, rep: usize) -> u64 {
    [n_index, p_index, rep].into_iter().fold(splitmix64(master_seed), |h, x| splitmix64(h ^ x as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub strategy: StrategyKind,
    pub n_list: Vec<usize>,
    pub p_list: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub init: InitConfig,
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.p_list.is_empty() {
            return Err(Error::invalid("n_list and p_list must be non-empty"));
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n < 3) {
            return Err(Error::invalid(format!("cycle length must be at least 3, got {n}")));
        }
        if let Some(p) = self.p_list.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("p must lie in [0, 1], got {p}")));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub strategy: StrategyKind,
    pub n: usize,
    pub p: f64,
    pub rep: usize,
    pub seed: u64,
    pub steps: u64,
    pub outcome: Outcome,
    pub coop_fraction: f64,
}

/// One record per `(n, p, rep)`, ordered by `n` index, then `p` index, then rep.
/// Runs in the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.n_list.len() * config.p_list.len() * config.reps);
    for (ni, &n) in config.n_list.iter().enumerate() {
        for (pi, &p) in config.p_list.iter().enumerate() {
            for rep in 0..config.reps {
                cells.push((n, p, rep, derive_seed(config.master_seed, ni, pi, rep)));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(n, p, rep, seed)| {
            let strategy = Strategy::new(config.strategy, p)?;
            let r = run_until_absorbed(n, &config.init, &strategy, seed, config.max_steps)?;
            Ok(SweepRecord {
                strategy: config.strategy,
                n,
                p,
                rep,
                seed,
                steps: r.steps_taken,
                outcome: r.outcome,
                coop_fraction: r.cooperator_fraction,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub strategy: StrategyKind,
    pub n: usize,
    pub p: f64,
    pub reps: usize,
    pub median_steps: f64,
    pub capped_fraction: f64,
    pub all_plus_fraction: f64,
    pub mean_coop_fraction: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Aggregates grouped by `(strategy, n, p)` and sorted by that key.
pub fn phase_summary(records: &[SweepRecord]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(&str, usize, u64), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        // Non-negative floats order like their bit patterns.
        groups.entry((r.strategy.as_str(), r.n, r.p.to_bits())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            let mut steps: Vec<f64> = g.iter().map(|r| r.steps as f64).collect();
            CellSummary {
                strategy: g[0].strategy,
                n: g[0].n,
                p: g[0].p,
                reps: g.len(),
                median_steps: median(&mut steps),
                capped_fraction: g.iter().filter(|r| r.outcome == Outcome::Capped).count() as f64 / k,
                all_plus_fraction: g.iter().filter(|r| r.outcome == Outcome::AllPlus).count() as f64 / k,
                mean_coop_fraction: g.iter().map(|r| r.coop_fraction).sum::<f64>() / k,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectTimeStats {
    pub n: usize,
    pub reps: usize,
    pub mean_t: f64,
    /// `n(n-1)/2`.
    pub expected_t: f64,
    /// `sqrt((n-1)(1-2/n) n^2 / 4)`, the exact standard deviation of the sum of
    /// `n-1` geometric waiting times with success probability `2/n`.
    pub analytic_sd: f64,
    /// `c n^{3/2} ln n`.
    pub deviation_band: f64,
    pub band_constant: f64,
    /// Runs with `|T - expected_t| > 4 analytic_sd`.
    pub outside_four_sd: usize,
    /// Runs with `|T - expected_t| > deviation_band`.
    pub outside_band: usize,
    /// Runs that hit the step cap before absorbing.
    pub capped: usize,
}

/// Step cap for [`defect_time_experiment`]: 50 times the mean, hundreds of
/// standard deviations out.
pub fn defect_time_cap(n: usize) -> u64 {
    25 * (n as u64) * (n as u64 - 1)
}

/// Time for a single defector to take over the cycle at `p = 0`.
pub fn defect_time_experiment(n: usize, reps: usize, master_seed: u64, band_constant: f64) -> Result<(DefectTimeStats, Vec<SweepRecord>)> {
    let config = defect_time_config(n, reps, master_seed);
    let records = run_sweep(&config)?;
    let nf = n as f64;
    let expected_t = nf * (nf - 1.0) / 2.0;
    let analytic_sd = ((nf - 1.0) * (1.0 - 2.0 / nf) * nf * nf / 4.0).sqrt();
    let deviation_band = band_constant * nf.powf(1.5) * nf.ln();
    let dev = |r: &SweepRecord| (r.steps as f64 - expected_t).abs();
    let stats = DefectTimeStats {
        n,
        reps,
        mean_t: records.iter().map(|r| r.steps as f64).sum::<f64>() / reps as f64,
        expected_t,
        analytic_sd,
        deviation_band,
        band_constant,
        outside_four_sd: records.iter().filter(|r| dev(r) > 4.0 * analytic_sd).count(),
        outside_band: records.iter().filter(|r| dev(r) > deviation_band).count(),
        capped: records.iter().filter(|r| r.outcome == Outcome::Capped).count(),
    };
    Ok((stats, records))
}

pub fn defect_time_config(n: usize, reps: usize, master_seed: u64) -> SweepConfig {
    SweepConfig {
        strategy: StrategyKind::Rp,
        n_list: vec![n],
        p_list: vec![0.0],
        reps,
        max_steps: defect_time_cap(n.max(2)),
        master_seed,
        init: InitConfig::SingleDefector(0),
    }
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        wr.write_record([
            r.strategy.as_str().to_string(),
            r.n.to_string(),
            format!("{:.6}", r.p),
            r.rep.to_string(),
            r.seed.to_string(),
            r.steps.to_string(),
            r.outcome.as_str().to_string(),
            r.coop_fraction.to_string(),
        ])?;
    }
    wr.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn emit_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    rd.records()
        .map(|row| {
            let row = row?;
            let field = |i: usize| row.get(i).ok_or_else(|| Error::Parse(format!("missing column {}", CSV_HEADER[i])));
            let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|e| Error::Parse(format!("{}: {e}", CSV_HEADER[i]))) };
            let int = |i: usize| -> Result<u64> { field(i)?.parse().map_err(|e| Error::Parse(format!("{}: {e}", CSV_HEADER[i]))) };
            Ok(SweepRecord {
                strategy: field(0)?.parse()?,
                n: int(1)? as usize,
                p: num(2)?,
                rep: int(3)? as usize,
                seed: int(4)?,
                steps: int(5)?,
                outcome: field(6)?.parse()?,
                coop_fraction: num(7)?,
            })
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Two-panel line chart: median steps against `p` on a log scale, and mean
/// cooperator fraction against `p` with the reference line `y = p`. One series
/// per `(strategy, n)`.
pub fn render_svg(summary: &[CellSummary]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 50.0;
    let mut series: BTreeMap<(&str, usize), Vec<&CellSummary>> = BTreeMap::new();
    for c in summary {
        series.entry((c.strategy.as_str(), c.n)).or_default().push(c);
    }

    let log_steps = |c: &CellSummary| c.median_steps.max(1.0).log10();
    let (lo, hi) = summary.iter().map(log_steps).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.floor(), hi.ceil().max(lo.floor() + 1.0)) } else { (0.0, 1.0) };

    let x = |p: f64, panel: f64| panel * W + PAD + p * (W - 2.0 * PAD);
    let y = |frac: f64| H - PAD - frac * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{H}" font-family="sans-serif" font-size="11">"#, 2.0 * W);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (panel, title) in [(0.0, "median steps (log10)"), (1.0, "mean cooperator fraction")] {
        let (x0, x1) = (x(0.0, panel), x(1.0, panel));
        let _ = writeln!(s, r#"<path d="M{x0},{} V{} H{x1}" stroke="black" fill="none"/>"#, PAD, H - PAD);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#, (x0 + x1) / 2.0, PAD - 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">p</text>"#, (x0 + x1) / 2.0, H - 15.0);
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#, x(t, panel), H - PAD + 15.0);
        }
    }
    for k in 0..=(hi - lo) as usize {
        let v = lo + k as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{v}</text>"#, PAD - 5.0, y((v - lo) / (hi - lo)) + 4.0);
    }
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#, W + PAD - 5.0, y(t) + 4.0);
    }
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
        x(0.0, 1.0),
        y(0.0),
        x(1.0, 1.0),
        y(1.0)
    );
    let _ = writeln!(s, r##"<text x="{}" y="{}" fill="#888">y = p</text>"##, x(1.0, 1.0) - 30.0, y(1.0) + 15.0);

    for (i, ((kind, n), cells)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path = |pts: Vec<(f64, f64)>| {
            pts.iter()
                .enumerate()
                .map(|(j, (a, b))| format!("{}{a:.2},{b:.2}", if j == 0 { "M" } else { "L" }))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let steps = path(cells.iter().map(|c| (x(c.p, 0.0), y((log_steps(c) - lo) / (hi - lo)))).collect());
        let frac = path(cells.iter().map(|c| (x(c.p, 1.0), y(c.mean_coop_fraction))).collect());
        let _ = writeln!(s, r#"<path d="{steps}" stroke="{color}" fill="none"/>"#);
        let _ = writeln!(s, r#"<path d="{frac}" stroke="{color}" fill="none"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{kind} n={n}</text>"#, PAD + 10.0, PAD + 14.0 * (i as f64 + 1.0));
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg(summary: &[CellSummary], path: &Path) -> Result<()> {
    write_atomic(path, render_svg(summary).as_bytes())
}
