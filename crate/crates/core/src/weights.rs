//! Potential-function weights certifying fast convergence to cooperation.
//!
//! A configuration's potential is `W(S) = sum_l w_l * r_l`, where `r_l` counts
//! the minus-runs of length `l`. If the weights satisfy four families of
//! linear inequalities (singleton, internal, all-minus and merge), every step
//! contracts the expected potential by `(1 - omega / n)`.
//!
//! The weights are built constructively: the internal inequality is solved
//! with equality to get the recurrence `w_hat`, and once `g(l) = w_hat(l) / l`
//! turns upward at `l0` the table continues linearly with slope
//! `alpha = w_hat(l0) / l0`. [`check_constraints`] then evaluates every
//! inequality numerically, and [`exact_one_step_drift`] is an independent
//! brute-force oracle over all edges and outcomes of a concrete state.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{edge_transition, extract_runs, Action, Strategy, StrategyKind};
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Slack allowed on every inequality margin.
pub const MARGIN_TOL: f64 = 1e-9;
pub const DEFAULT_OMEGA: f64 = 1e-4;
pub const DEFAULT_L0_CAP: usize = 200;

/// `w_hat_0 ..= w_hat_{l_max}` with `w_hat_0 = 0`, `w_hat_1 = 1`,
/// `w_hat_2 = 1 - omega / 2`.
///
/// RP continues with
/// `w_hat_{l+1} = -p(2-p) S_{l-2} - p(1-p) w_hat_{l-1} - (l(p^2-2p) - (p^2-2p+2) + omega) w_hat_l / 2`
/// and SRP with
/// `w_hat_{l+1} = -p S_{l-2} - (p - pl - 2 + omega) w_hat_l / 2`,
/// where `S_k = w_hat_0 + ... + w_hat_k`.
pub fn w_hat_recurrence(strategy: &Strategy, omega: f64, l_max: usize) -> Vec<f64> {
    let p = strategy.effective_p();
    let mut w = vec![0.0, 1.0, 1.0 - 0.5 * omega];
    w.truncate(l_max + 1);
    let mut prefix = 0.0; // sum of w[0..=l-2]
    for l in 2..l_max {
        prefix += w[l - 2];
        let lf = l as f64;
        let next = match strategy.family() {
            StrategyKind::Srp => -p * prefix - 0.5 * (p - p * lf - 2.0 + omega) * w[l],
            _ => {
                let q = p * p - 2.0 * p;
                -p * (2.0 - p) * prefix - p * (1.0 - p) * w[l - 1] - 0.5 * (lf * q - (q + 2.0) + omega) * w[l]
            }
        };
        w.push(next);
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L0 {
    pub l0: usize,
    pub alpha: f64,
}

/// First `l` at which `g(l) = w_hat(l) / l` increases, computed with
/// `omega = 0`. A zero difference counts as still decreasing. Returns `None`
/// if no turn happens up to `l_cap` or a weight stops being positive first.
pub fn find_l0(strategy: &Strategy, l_cap: usize) -> Option<L0> {
    first_turn(&w_hat_recurrence(strategy, 0.0, l_cap + 1), l_cap)
}

fn first_turn(w: &[f64], l_cap: usize) -> Option<L0> {
    for l in 1..=l_cap {
        if w[l] <= 0.0 || w[l + 1] <= 0.0 {
            return None;
        }
        let h = w[l + 1] / (l + 1) as f64 - w[l] / l as f64;
        if h > 0.0 {
            return Some(L0 { l0: l, alpha: w[l] / l as f64 });
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    /// `h(l) = g(l+1) - g(l)`, the change in `w_hat(l) / l`.
    H,
    /// `f(l) = w_hat(l+1) - w_hat(l)`.
    F,
}

impl Series {
    pub fn as_str(self) -> &'static str {
        match self {
            Series::H => "h",
            Series::F => "f",
        }
    }

    /// Evaluates the series at `ell` (with `omega = 0`).
    pub fn eval(self, kind: StrategyKind, p: f64, ell: usize) -> f64 {
        let s = Strategy { kind, p };
        let w = w_hat_recurrence(&s, 0.0, ell + 1);
        match self {
            Series::H => w[ell + 1] / (ell + 1) as f64 - w[ell] / ell as f64,
            Series::F => w[ell + 1] - w[ell],
        }
    }

    /// Rounds a root to three decimals in the direction that keeps the sign
    /// statement valid: `h(l) <= 0` holds on `[0, bound]` with the bound
    /// rounded down, `f(l) >= 0` on `[bound, 1]` with the bound rounded up.
    pub fn three_decimal_bound(self, root: f64) -> f64 {
        let scaled = root * 1000.0;
        // Snap values within float noise of a grid point before rounding.
        let snapped = if (scaled - scaled.round()).abs() < 1e-9 { scaled.round() } else { scaled };
        match self {
            Series::H => snapped.floor() / 1000.0,
            Series::F => snapped.ceil() / 1000.0,
        }
    }
}

impl std::str::FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Series::H),
            "f" => Ok(Series::F),
            other => Err(Error::invalid(format!("unknown series `{other}` (expected h or f)"))),
        }
    }
}

/// Root in (0, 1) of `series(ell; p)` found by bisection on `p`, bracketing
/// the first strict sign change on a grid of 1000 interior points.
pub fn threshold_bisect(kind: StrategyKind, series: Series, ell: usize, tol: f64) -> Result<f64> {
    if ell == 0 && series == Series::H {
        return Err(Error::invalid("h is defined for ell >= 1"));
    }
    if tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let eval = |p: f64| series.eval(kind, p, ell);
    const GRID: usize = 1000;
    let no_root = || Error::NoRoot { series: series.as_str(), ell };

    let mut prev: Option<(f64, f64)> = None;
    for k in 1..GRID {
        let p = k as f64 / GRID as f64;
        let v = eval(p);
        if v.abs() < 1e-14 {
            // Identically zero, or touching zero on a grid point.
            continue;
        }
        if let Some((p0, v0)) = prev {
            if v0.signum() != v.signum() {
                let (mut lo, mut hi, mut vlo) = (p0, p, v0);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    let vm = eval(mid);
                    if vm.signum() == vlo.signum() {
                        lo = mid;
                        vlo = vm;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
        }
        prev = Some((p, v));
    }
    Err(no_root())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub ell: usize,
    pub root: Option<f64>,
    /// Directed three-decimal rounding of `root`, see [`Series::three_decimal_bound`].
    pub bound: Option<f64>,
}

pub fn threshold_table(kind: StrategyKind, series: Series, ells: impl IntoIterator<Item = usize>, tol: f64) -> Vec<ThresholdRow> {
    ells.into_iter()
        .map(|ell| {
            let root = threshold_bisect(kind, series, ell, tol).ok();
            ThresholdRow { ell, root, bound: root.map(|r| series.three_decimal_bound(r)) }
        })
        .collect()
}

/// Piecewise weight table: `w(l) = w_hat(l)` up to `l0`, `alpha * l` beyond.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightTable {
    pub strategy: Strategy,
    pub omega: f64,
    pub n: usize,
    pub w_hat: Vec<f64>,
    pub l0: usize,
    pub alpha: f64,
}

impl WeightTable {
    pub fn w(&self, ell: usize) -> f64 {
        if ell <= self.l0 {
            self.w_hat[ell]
        } else {
            self.alpha * ell as f64
        }
    }

    pub fn delta(&self) -> f64 {
        self.omega / self.n as f64
    }

    /// `w(0) ..= w(n)`.
    pub fn weights(&self) -> Vec<f64> {
        (0..=self.n).map(|l| self.w(l)).collect()
    }

    /// Writes `ell,w_hat,w,margin` rows for `ell = 1..=n`; `margin` is the
    /// slack of the inequality governing a run of that length (singleton,
    /// internal, or all-minus at `ell = n`), and `w_hat` is empty past `l0`.
    pub fn write_csv<W: Write>(&self, report: &ConstraintReport, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["ell", "w_hat", "w", "margin"])?;
        for ell in 1..=self.n {
            let w_hat = if ell <= self.l0 { self.w_hat[ell].to_string() } else { String::new() };
            let margin = match ell {
                1 => report.singleton_margin,
                l if l == self.n => report.nrun_margin,
                l => report.internal_margins[l - 2],
            };
            wr.write_record([ell.to_string(), w_hat, self.w(ell).to_string(), (margin + 0.0).to_string()])?;
        }
        wr.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn emit_csv(&self, report: &ConstraintReport, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(report, &mut buf)?;
        write_atomic(path, &buf)
    }
}

/// Locates the turn of `w_hat(l) / l` on the `omega`-weighted recurrence, so
/// `l0` can sit one below [`find_l0`] when `p` is within about `omega` above
/// a root of `h(l0)`. With the unweighted turn the internal inequality at
/// `l = l0` fails in those windows.
pub fn build_weights(strategy: &Strategy, omega: f64, n: usize) -> Result<WeightTable> {
    if n < 3 {
        return Err(Error::invalid(format!("n must be at least 3, got {n}")));
    }
    if omega.is_nan() || omega < 0.0 {
        return Err(Error::invalid(format!("omega must be non-negative, got {omega}")));
    }
    let mut w_hat = w_hat_recurrence(strategy, omega, DEFAULT_L0_CAP + 1);
    let L0 { l0, alpha } = first_turn(&w_hat, DEFAULT_L0_CAP)
        .ok_or(Error::InfeasibleParameter { kind: strategy.kind, p: strategy.p })?;
    w_hat.truncate(l0.max(2) + 1);
    Ok(WeightTable { strategy: *strategy, omega, n, w_hat, l0, alpha })
}

/// Slack of each inequality; non-negative (up to [`MARGIN_TOL`]) means satisfied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub singleton_margin: f64,
    /// Margins for `l = 2 ..= n-1`, index `l - 2`.
    pub internal_margins: Vec<f64>,
    pub nrun_margin: f64,
    /// Worst `w(l1) + w(l2) - w(l1 + l2)` over `l1 + l2 <= n`.
    pub merge_margin: f64,
    pub merge_worst: (usize, usize),
    pub singleton_ok: bool,
    pub internal_ok: bool,
    pub nrun_ok: bool,
    pub merge_ok: bool,
    pub feasible: bool,
}

impl ConstraintReport {
    pub fn worst_internal(&self) -> Option<(usize, f64)> {
        self.internal_margins
            .iter()
            .enumerate()
            .map(|(i, &m)| (i + 2, m))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub fn check_constraints(table: &WeightTable) -> ConstraintReport {
    let n = table.n;
    let p = table.strategy.effective_p();
    let omega = table.omega;
    let w = table.weights();

    let singleton_margin = (2.0 - omega) * w[1] - 2.0 * w[2];

    let mut internal_margins = Vec::with_capacity(n.saturating_sub(2));
    let mut prefix = 0.0; // sum of w[0..=l-2]
    for l in 2..n {
        prefix += w[l - 2];
        let lf = l as f64;
        let lhs = match table.strategy.family() {
            // Internal edge becomes ++ w.p. p (split) and stays -- otherwise.
            StrategyKind::Srp => 2.0 * w[l + 1] + 2.0 * p * prefix + (1.0 - p) * (lf - 1.0) * w[l] - (lf + 1.0 - omega) * w[l],
            _ => {
                let q = p * p - 2.0 * p;
                2.0 * w[l + 1] + 2.0 * p * (2.0 - p) * prefix + 2.0 * p * (1.0 - p) * w[l - 1] + (lf * q - (q + 2.0) + omega) * w[l]
            }
        };
        internal_margins.push(-lhs);
    }

    let delta = table.delta();
    let nrun_lhs = match table.strategy.family() {
        StrategyKind::Srp => p * w[n - 2] - p * w[n] + delta * w[n],
        _ => p * p * w[n - 2] + 2.0 * p * (1.0 - p) * w[n - 1] + (p * p - 2.0 * p + delta) * w[n],
    };
    let nrun_margin = -nrun_lhs;

    let mut merge_margin = f64::INFINITY;
    let mut merge_worst = (0, 0);
    for l1 in 1..n {
        for l2 in l1..=(n - l1) {
            let m = w[l1] + w[l2] - w[l1 + l2];
            if m < merge_margin {
                merge_margin = m;
                merge_worst = (l1, l2);
            }
        }
    }

    let singleton_ok = singleton_margin >= -MARGIN_TOL;
    let internal_ok = internal_margins.iter().all(|&m| m >= -MARGIN_TOL);
    let nrun_ok = nrun_margin >= -MARGIN_TOL;
    let merge_ok = merge_margin >= -MARGIN_TOL;
    ConstraintReport {
        singleton_margin,
        internal_margins,
        nrun_margin,
        merge_margin,
        merge_worst,
        singleton_ok,
        internal_ok,
        nrun_ok,
        merge_ok,
        feasible: singleton_ok && internal_ok && nrun_ok && merge_ok,
    }
}

/// `W(S)`: the weighted count of minus-runs; the all-minus cycle counts as a
/// single run of length `n`.
pub fn potential(states: &[Action], table: &WeightTable) -> f64 {
    extract_runs(states).minus_runs.iter().map(|r| table.w(r.len)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftReport {
    pub state_potential: f64,
    pub expected_next: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Exact `E[W(S_1) | S_0 = states]` by enumerating every edge and every
/// outcome of the strategy's transition, scoring each successor with its true
/// run structure. `O(n^2)`.
pub fn exact_one_step_drift(states: &[Action], table: &WeightTable) -> DriftReport {
    let n = states.len();
    let state_potential = potential(states, table);
    let bound = (1.0 - table.omega / n as f64) * state_potential;
    if state_potential == 0.0 {
        return DriftReport { state_potential, expected_next: 0.0, bound, satisfied: true };
    }
    let strategy = &table.strategy;
    let p = strategy.effective_p();
    // (u1, u2, probability) draws that realise each branch; `u < p` cooperates.
    let (yes, no) = (0.0, 1.0 - f64::EPSILON);
    let branches: Vec<(f64, f64, f64)> = match strategy.kind {
        StrategyKind::Rp => vec![
            (yes, yes, p * p),
            (yes, no, p * (1.0 - p)),
            (no, yes, (1.0 - p) * p),
            (no, no, (1.0 - p) * (1.0 - p)),
        ],
        StrategyKind::Srp => vec![(yes, 0.0, p), (no, 0.0, 1.0 - p)],
        StrategyKind::Pavlov => vec![(yes, yes, 1.0)],
    };

    let mut scratch = states.to_vec();
    let mut expected = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (states[i], states[j]);
        let mutual_defection = a.is_defect() && b.is_defect();
        let outcomes: &[(f64, f64, f64)] = if mutual_defection { &branches } else { &[(0.0, 0.0, 1.0)] };
        for &(u1, u2, prob) in outcomes {
            if prob == 0.0 {
                continue;
            }
            let (na, nb) = edge_transition(a, b, strategy, u1, u2);
            scratch[i] = na;
            scratch[j] = nb;
            expected += prob * potential(&scratch, table);
        }
        scratch[i] = a;
        scratch[j] = b;
    }
    let expected_next = expected / n as f64;
    DriftReport { state_potential, expected_next, bound, satisfied: expected_next <= bound + MARGIN_TOL }
}

/// Smallest `p` (to within `tol`) at which a weight table exists and passes
/// [`check_constraints`], by a 0.001-step scan followed by bisection inside the
/// first feasible bracket.
pub fn p0_search(kind: StrategyKind, omega: f64, n: usize, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let feasible = |p: f64| {
        Strategy::new(kind, p)
            .and_then(|s| build_weights(&s, omega, n))
            .map(|t| check_constraints(&t).feasible)
            .unwrap_or(false)
    };
    const STEPS: usize = 1000;
    let first = (0..=STEPS)
        .map(|k| k as f64 / STEPS as f64)
        .find(|&p| feasible(p))
        .ok_or(Error::NoFeasibleP { kind, omega, n })?;
    if first == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (first - 1.0 / STEPS as f64, first);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Action::{Cooperate as P, Defect as M};

    fn rp(p: f64) -> Strategy {
        Strategy::rp(p).unwrap()
    }

    // Hand-expanded closed forms of the first few differences.
    fn f_poly(ell: usize, p: f64) -> f64 {
        match ell {
            0 => 1.0,
            1 => 0.0,
            2 => 0.5 * p * p,
            3 => -p + p * p + p.powi(3) - 0.5 * p.powi(4),
            4 => -2.0 * p - 1.5 * p * p + 5.5 * p.powi(3) + 1.25 * p.powi(4) + 0.75 * p.powi(6) - 3.0 * p.powi(5),
            _ => unreachable!(),
        }
    }

    fn h_poly(ell: usize, p: f64) -> f64 {
        match ell {
            1 => -0.5,
            2 => -1.0 / 6.0 + p * p / 6.0,
            3 => -1.0 / 12.0 - 0.25 * p + 5.0 / 24.0 * p * p + 0.25 * p.powi(3) - 0.125 * p.powi(4),
            4 => {
                -1.0 / 20.0 - 7.0 / 20.0 * p - 3.0 / 8.0 * p * p + 21.0 / 20.0 * p.powi(3) + 11.0 / 40.0 * p.powi(4)
                    - 0.6 * p.powi(5)
                    + 0.15 * p.powi(6)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn recurrence_seeds() {
        for p in [0.0, 0.3, 0.9, 1.0] {
            let w = w_hat_recurrence(&rp(p), 0.0, 2);
            assert_eq!(w, vec![0.0, 1.0, 1.0]);
        }
        let w = w_hat_recurrence(&rp(0.5), 0.2, 5);
        assert_eq!(w.len(), 6);
        assert!((w[2] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn recurrence_hand_values() {
        let w = w_hat_recurrence(&rp(0.9), 0.0, 3);
        assert!((w[3] - 1.405).abs() < 1e-12);
        let w = w_hat_recurrence(&rp(1.0), 0.0, 4);
        assert_eq!(w[2], 1.0);
        assert!((w[3] - 1.5).abs() < 1e-12);
        assert!((w[4] - 2.0).abs() < 1e-12);
        // At p = 0 nothing ever splits: the recurrence is flat.
        assert!(w_hat_recurrence(&rp(0.0), 0.0, 30)[1..].iter().all(|&x| x == 1.0));
    }

    #[test]
    fn differences_match_expanded_polynomials() {
        let mut seed = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..20 {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            let p = (seed >> 11) as f64 / (1u64 << 53) as f64;
            for ell in 0..=4 {
                let got = Series::F.eval(StrategyKind::Rp, p, ell);
                assert!((got - f_poly(ell, p)).abs() < 1e-12, "f({ell}) at p={p}");
            }
            for ell in 1..=4 {
                let got = Series::H.eval(StrategyKind::Rp, p, ell);
                assert!((got - h_poly(ell, p)).abs() < 1e-12, "h({ell}) at p={p}");
            }
        }
    }

    #[test]
    fn pavlov_uses_rp_equations_at_one() {
        let a = w_hat_recurrence(&Strategy::pavlov(), 1e-3, 12);
        let b = w_hat_recurrence(&rp(1.0), 1e-3, 12);
        let c = w_hat_recurrence(&Strategy::srp(1.0).unwrap(), 1e-3, 12);
        assert_eq!(a, b);
        for (x, y) in b.iter().zip(&c) {
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn find_l0_examples() {
        assert_eq!(find_l0(&rp(0.870), 200).map(|r| r.l0), Some(8));
        assert_eq!(find_l0(&rp(1.0), 200).map(|r| r.l0), Some(4));
        assert_eq!(find_l0(&rp(0.5), 100), None);
        assert_eq!(find_l0(&rp(0.0), 200), None);
        let r = find_l0(&rp(1.0), 200).unwrap();
        assert!((r.alpha - 0.5).abs() < 1e-12, "w_hat(4) = 2 at p = 1");
    }

    #[test]
    fn threshold_examples() {
        let h4 = threshold_bisect(StrategyKind::Rp, Series::H, 4, 1e-4).unwrap();
        assert!((h4 - 0.897).abs() < 5e-4, "{h4}");
        let h7 = threshold_bisect(StrategyKind::Rp, Series::H, 7, 1e-4).unwrap();
        assert!((h7 - 0.870).abs() < 5e-4, "{h7}");
        let f4 = threshold_bisect(StrategyKind::Rp, Series::F, 4, 1e-4).unwrap();
        assert!((f4 - 0.805).abs() < 5e-4, "{f4}");
        for (s, ell) in [(Series::H, 1), (Series::H, 2), (Series::H, 3), (Series::F, 0), (Series::F, 1), (Series::F, 2)] {
            assert!(matches!(threshold_bisect(StrategyKind::Rp, s, ell, 1e-6), Err(Error::NoRoot { .. })), "{s:?}({ell})");
        }
    }

    #[test]
    fn directed_rounding() {
        assert_eq!(Series::H.three_decimal_bound(0.86974), 0.869);
        assert_eq!(Series::F.three_decimal_bound(0.86410), 0.865);
        assert_eq!(Series::H.three_decimal_bound(0.870_000_000_000_1), 0.870);
        assert_eq!(Series::F.three_decimal_bound(0.699_999_999_999_9), 0.7);
    }

    #[test]
    fn build_weights_examples() {
        let t = build_weights(&rp(0.9), 0.0, 50).unwrap();
        assert!(t.l0 <= 8);
        assert_eq!(t.w(1), 1.0);
        let w = t.weights();
        for l in 1..50 {
            assert!(w[l + 1] + 1e-12 >= w[l], "non-decreasing at {l}");
            assert!(w[l + 1] / (l + 1) as f64 <= w[l] / l as f64 + 1e-12, "w/l non-increasing at {l}");
            assert!(t.alpha * l as f64 <= w[l] + 1e-12 && w[l] <= l as f64 + 1e-12);
        }
        assert!(t.alpha <= 1.0);
        assert!(matches!(build_weights(&rp(0.5), 0.0, 50), Err(Error::InfeasibleParameter { .. })));
    }

    #[test]
    fn constraint_examples() {
        let t = build_weights(&rp(0.9), 1e-3, 50).unwrap();
        let r = check_constraints(&t);
        assert!(r.feasible, "{r:?}");
        // Linear weights at the top reduce the all-minus slack to
        // alpha * (n (2p - p^2 - delta) - p^2 (n - 2) - 2p(1-p)(n - 1)).
        let (p, n, d) = (0.9, 50.0, 1e-3 / 50.0);
        let expected = t.alpha * (n * (2.0 * p - p * p - d) - p * p * (n - 2.0) - 2.0 * p * (1.0 - p) * (n - 1.0));
        assert!((r.nrun_margin - expected).abs() < 1e-9, "{} vs {expected}", r.nrun_margin);

        assert!(r.singleton_margin.abs() < 1e-12, "w_2 solves the singleton inequality with equality");
        assert!(r.internal_margins.iter().take(t.l0 - 2).all(|m| m.abs() < 1e-12));
        // Forcing w_2 above its recurrence value breaks the singleton inequality.
        let mut bumped = t.clone();
        bumped.w_hat[2] += 0.01;
        assert!(!check_constraints(&bumped).singleton_ok);
        // A large contraction rate leaves g decreasing for good.
        assert!(matches!(build_weights(&rp(0.9), 1.9, 50), Err(Error::InfeasibleParameter { .. })));
    }

    #[test]
    fn drift_examples() {
        let t = build_weights(&rp(0.9), 0.01, 5).unwrap();
        let d = exact_one_step_drift(&[P; 5], &t);
        assert_eq!((d.state_potential, d.expected_next), (0.0, 0.0));
        assert!(d.satisfied);

        let d = exact_one_step_drift(&[P, P, M, P, P], &t);
        assert_eq!(d.state_potential, 1.0);
        assert!((d.expected_next - 0.998).abs() < 1e-12);
        assert!((d.bound - 0.998).abs() < 1e-12);
        assert!(d.satisfied);

        let t = build_weights(&rp(0.9), 1e-4, 10).unwrap();
        let s = [M, M, M, P, M, M, P, P, P, P];
        let d = exact_one_step_drift(&s, &t);
        assert!(d.satisfied, "{d:?}");
        assert!(d.expected_next < d.state_potential);
    }

    #[test]
    fn potential_bounds() {
        let t = build_weights(&rp(0.95), 1e-4, 12).unwrap();
        assert_eq!(potential(&[M; 12], &t), t.w(12));
        assert!(potential(&[M; 12], &t) <= 12.0);
        let alt: Vec<_> = (0..12).map(|i| if i % 2 == 0 { M } else { P }).collect();
        assert!((potential(&alt, &t) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn csv_export_has_one_row_per_length() {
        let t = build_weights(&rp(0.95), 1e-4, 12).unwrap();
        let r = check_constraints(&t);
        let mut buf = Vec::new();
        t.write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "ell,w_hat,w,margin");
        assert_eq!(lines.len(), 13);
        assert!(lines[1].starts_with("1,1,1,"));
    }
}
