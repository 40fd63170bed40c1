//! Mean-field system for the slow (small `p`) regime.
//!
//! `P_l(tau)` bounds the probability that a plus-run of length `l` starts at a
//! fixed vertex whose left neighbour defects, at rescaled time `tau = t / n`.
//! The hierarchy is
//!
//! ```text
//! dP_0/dtau = -(1 + 5p - 2p^2) P_0 + P_1 + 1
//! dP_1/dtau = -2 P_1 + 2 P_2 + 2p(1-p) P_0
//! dP_l/dtau = -2 P_l + 2 P_{l+1} + 2p(1-p) P_{l-1} P_0 + p^2 sum_{k=0}^{l-2} P_k P_{l-2-k}    (l >= 2)
//! ```
//!
//! truncated at order `L` with `P_{L+1} = 0` and integrated from the all-minus
//! state `P = (1, 0, 0, ...)` with classical fixed-step RK4.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_ORDER: usize = 64;
/// Check level for `sum_{l>=3} P_l`, as a multiple of `p^2`.
pub const TAIL_CHECK_FACTOR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFieldState {
    pub p: f64,
    pub tau: f64,
    /// `P_0 ..= P_L`.
    pub probs: Vec<f64>,
}

impl MeanFieldState {
    pub fn initial(p: f64, order: usize) -> Self {
        let mut probs = vec![0.0; order + 1];
        probs[0] = 1.0;
        MeanFieldState { p, tau: 0.0, probs }
    }

    pub fn order(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `sum_{l >= 3} P_l`.
    pub fn tail_sum(&self) -> f64 {
        self.probs.iter().skip(3).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeConfig {
    pub dt: f64,
    /// Truncation order `L`.
    pub order: usize,
    /// Record a sample every this many steps (the final state is always kept).
    pub sample_every: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig { dt: DEFAULT_DT, order: DEFAULT_ORDER, sample_every: 100 }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::invalid(format!("dt must lie in (0, 0.01], got {}", self.dt)));
        }
        if self.order < 2 {
            return Err(Error::invalid(format!("truncation order must be at least 2, got {}", self.order)));
        }
        if self.sample_every == 0 {
            return Err(Error::invalid("sample_every must be positive"));
        }
        Ok(())
    }
}

/// Writes `dP/dtau` at `probs` into `out` (same length).
pub fn rhs(p: f64, probs: &[f64], out: &mut [f64]) {
    let last = probs.len() - 1;
    let at = |l: usize| if l <= last { probs[l] } else { 0.0 };
    let split = 2.0 * p * (1.0 - p);
    let p0 = probs[0];
    out[0] = -(1.0 + 5.0 * p - 2.0 * p * p) * p0 + at(1) + 1.0;
    if last >= 1 {
        out[1] = -2.0 * at(1) + 2.0 * at(2) + split * p0;
    }
    for l in 2..=last {
        let conv: f64 = (0..=l - 2).map(|k| probs[k] * probs[l - 2 - k]).sum();
        out[l] = -2.0 * probs[l] + 2.0 * at(l + 1) + split * probs[l - 1] * p0 + p * p * conv;
    }
}

/// Integrates to `tau_end`; the step is shrunk slightly if needed so the last
/// step lands exactly on `tau_end`. Samples every `sample_every` steps,
/// including `tau = 0` and the endpoint.
pub fn integrate(p: f64, tau_end: f64, config: &OdeConfig) -> Result<Vec<MeanFieldState>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    if !(tau_end >= 0.0 && tau_end.is_finite()) {
        return Err(Error::invalid(format!("tau_end must be finite and non-negative, got {tau_end}")));
    }
    config.validate()?;

    let mut state = MeanFieldState::initial(p, config.order);
    let mut out = vec![state.clone()];
    let steps = (tau_end / config.dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(out);
    }
    let h = tau_end / steps as f64;

    let m = config.order + 1;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for step in 1..=steps {
        let y = &mut state.probs;
        rhs(p, y, &mut k1);
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(p, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(p, &tmp, &mut k3);
        for i in 0..m {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(p, &tmp, &mut k4);
        for i in 0..m {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        state.tau = step as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { tau: state.tau });
        }
        if step % config.sample_every == 0 || step == steps {
            out.push(state.clone());
        }
    }
    Ok(out)
}

/// The sample closest to `tau`.
pub fn sample_at(trajectory: &[MeanFieldState], tau: f64) -> Option<&MeanFieldState> {
    trajectory.iter().min_by(|a, b| (a.tau - tau).abs().total_cmp(&(b.tau - tau).abs()))
}

/// `(e^{-tau}, tau e^{-tau}, tau^2 e^{-tau})`, all zero at `tau = inf`.
fn decay(tau: f64, rate: f64) -> (f64, f64, f64) {
    if tau.is_infinite() {
        return (0.0, 0.0, 0.0);
    }
    let e = (-rate * tau).exp();
    (e, tau * e, tau * tau * e)
}

/// Second-order perturbative solution for `(P_0, P_1, P_2)`; `tau` may be
/// `f64::INFINITY`.
pub fn closed_form_p012(p: f64, tau: f64) -> (f64, f64, f64) {
    let (e1, te1, _) = decay(tau, 1.0);
    let (e2, te2, t2e2) = decay(tau, 2.0);
    let p2 = p * p;
    let p0 = 1.0 + (-4.0 + 3.0 * e1 + e2) * p + (37.0 / 2.0 + 5.0 * te2 - 9.0 * te1 + 2.0 * t2e2 - 31.0 * e1 + 25.0 / 2.0 * e2) * p2;
    let p1 = (1.0 - e2) * p + (-7.0 / 2.0 + 6.0 * e1 - 5.0 / 2.0 * e2 - te2 - 2.0 * t2e2) * p2;
    let pp2 = (3.0 / 2.0 - 3.0 / 2.0 * e2 - 2.0 * te2) * p2;
    (p0, p1, pp2)
}

/// Second-order perturbative solution for `y = sum_l P_l`.
pub fn closed_form_y(p: f64, tau: f64) -> f64 {
    let (e1, te1, _) = decay(tau, 1.0);
    let (e2, te2, _) = decay(tau, 2.0);
    1.0 - 3.0 * (1.0 - e1) * p + (2.0 * te2 + 17.0 / 2.0 * e2 - 9.0 * te1 - 25.0 * e1 + 33.0 / 2.0) * p * p
}

/// Coefficients `[c2, c1, c0]` of the monic characteristic cubic
/// `lambda^3 + c2 lambda^2 + c1 lambda + c0` of the linearised system.
pub fn characteristic_cubic(p: f64) -> [f64; 3] {
    let (p2, p3, p4) = (p * p, p * p * p, p * p * p * p);
    [5.0 + 5.0 * p - 2.0 * p2, 8.0 + 14.0 * p - 2.0 * p2, 4.0 + 12.0 * p - 20.0 * p2 + 28.0 * p3 - 8.0 * p4]
}

/// Series approximations `(lambda_1, lambda_2, lambda_3)`.
pub fn eigen_series(p: f64) -> [f64; 3] {
    let s = p.sqrt();
    let p32 = p * s;
    [
        -1.0 - 3.0 * p + 14.0 * p * p,
        -2.0 - 2.0 * s - p + 11.0 / 4.0 * p32 - 6.0 * p * p,
        -2.0 + 2.0 * s - p - 11.0 / 4.0 * p32 - 6.0 * p * p,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenReport {
    pub p: f64,
    /// Roots matched to the series order `(lambda_1, lambda_2, lambda_3)`.
    pub numeric: [f64; 3],
    pub series: [f64; 3],
    pub deviation: [f64; 3],
    pub max_deviation: f64,
    pub real_distinct_negative: bool,
}

/// Real roots of a monic cubic by the trigonometric method, each polished by
/// bisection on a bracket around it. Errors when a root pair is complex.
fn cubic_real_roots(c: [f64; 3], p: f64) -> Result<[f64; 3]> {
    let [a, b, d] = c;
    let f = |x: f64| ((x + a) * x + b) * x + d;
    // Depressed cubic t^3 + q1 t + q0 with x = t - a/3.
    let q1 = b - a * a / 3.0;
    let q0 = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
    let disc = -(4.0 * q1 * q1 * q1 + 27.0 * q0 * q0);
    if disc <= 0.0 || q1 >= 0.0 {
        return Err(Error::ComplexRoots { p });
    }
    let m = 2.0 * (-q1 / 3.0).sqrt();
    let arg = (3.0 * q0 / (q1 * m)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let mut roots = [0.0; 3];
    for (k, r) in roots.iter_mut().enumerate() {
        *r = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - a / 3.0;
    }
    roots.sort_by(|x, y| y.total_cmp(x));
    // Bisection polish inside brackets that cannot overlap neighbouring roots.
    let gap = (roots[0] - roots[1]).min(roots[1] - roots[2]);
    let half = (0.25 * gap).min(1e-3);
    for r in roots.iter_mut() {
        let (mut lo, mut hi) = (*r - half, *r + half);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.signum() == fhi.signum() {
            continue;
        }
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        *r = 0.5 * (lo + hi);
    }
    Ok(roots)
}

pub fn eigen_check(p: f64) -> Result<EigenReport> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    let roots = cubic_real_roots(characteristic_cubic(p), p)?;
    // Descending order is (lambda_1, lambda_3, lambda_2) for small p.
    let numeric = [roots[0], roots[2], roots[1]];
    let series = eigen_series(p);
    let deviation = [0, 1, 2].map(|i| (numeric[i] - series[i]).abs());
    let max_deviation = deviation.iter().copied().fold(0.0, f64::max);
    let real_distinct_negative = roots[0] < 0.0 && roots[0] > roots[1] && roots[1] > roots[2];
    Ok(EigenReport { p, numeric, series, deviation, max_deviation, real_distinct_negative })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailFit {
    /// Smallest `gamma` with `P_l <= gamma / (1 + p^3)^l` for every sample and `l >= 3`.
    pub gamma: f64,
    /// `exp` of the least-squares slope of `ln P_l` against `l >= 3` at the final sample.
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub fit: TailFit,
    pub max_tail_sum: f64,
    pub threshold: f64,
    pub tail_below_threshold: bool,
    /// `ratio < 1 / (1 + p^3)`: decay at least as fast as the geometric bound.
    pub decays_geometrically: bool,
}

pub fn tail_check(trajectory: &[MeanFieldState], p: f64) -> TailReport {
    let base = 1.0 + p * p * p;
    let mut gamma: f64 = 0.0;
    let mut max_tail_sum: f64 = 0.0;
    for s in trajectory {
        max_tail_sum = max_tail_sum.max(s.tail_sum());
        for (l, &v) in s.probs.iter().enumerate().skip(3) {
            gamma = gamma.max(v * base.powi(l as i32));
        }
    }

    let pts: Vec<(f64, f64)> = trajectory
        .last()
        .map(|s| {
            s.probs
                .iter()
                .enumerate()
                .skip(3)
                .filter(|(_, &v)| v > f64::MIN_POSITIVE)
                .map(|(l, &v)| (l as f64, v.ln()))
                .collect()
        })
        .unwrap_or_default();
    let ratio = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|q| q.0).sum::<f64>() / k;
        let my = pts.iter().map(|q| q.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum();
        (sxy / sxx).exp()
    } else {
        0.0
    };

    let threshold = TAIL_CHECK_FACTOR * p * p;
    TailReport {
        fit: TailFit { gamma, ratio },
        max_tail_sum,
        threshold,
        tail_below_threshold: max_tail_sum < threshold,
        decays_geometrically: ratio * base < 1.0,
    }
}

/// `T n gamma (1 + p^3)^{-n/4}`: the bound on seeing a plus-run of length
/// `n/4` within `T` steps. Evaluated in log space.
pub fn long_run_time_bound(p: f64, n: f64, t: f64, gamma: f64) -> f64 {
    (t.ln() + n.ln() + gamma.ln() - 0.25 * n * (p * p * p).ln_1p()).exp()
}

/// Writes `tau,P_0,...,P_K,sum_tail` rows; `K` is capped at the truncation order.
pub fn write_trajectory_csv<W: Write>(trajectory: &[MeanFieldState], k: usize, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let k = trajectory.first().map_or(k, |s| k.min(s.order()));
    let mut header = vec!["tau".to_string()];
    header.extend((0..=k).map(|l| format!("P_{l}")));
    header.push("sum_tail".into());
    wr.write_record(&header)?;
    for s in trajectory {
        let mut row = vec![s.tau.to_string()];
        row.extend(s.probs[..=k].iter().map(|v| v.to_string()));
        row.push(s.tail_sum().to_string());
        wr.write_record(&row)?;
    }
    wr.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn emit_trajectory_csv(trajectory: &[MeanFieldState], k: usize, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectory_csv(trajectory, k, &mut buf)?;
    write_atomic(path, &buf)
}
