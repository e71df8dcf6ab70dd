//! Parameter scans for the excluded (resonant) set.
//!
//! A cell of the `eps` grid is flagged when the iteration started at its
//! midpoint fails one of the small-divisor conditions at some step
//! `m <= m_cap`; flagged cells are excluded whole. Beyond the step where the
//! run stops, the final eigenvalues are reused.
//!
//! The real-shift set
//! `R(d) = {phi in (0, d) : |<k, w> - phi| < (gamma/2)|k|^{-tau_m} e^{-nu_m |k|}}`
//! is measured exactly as a union of intervals and compared with the shape
//! `d exp(-a1 / d^{a2})`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DivisorKind, Error, Result};
use crate::kam::diophantine::{check_differences, check_eigenvalues, ModeTable};
use crate::kam::pipeline::{engine_for, SolveOptions};
use crate::kam::Schedule;
use crate::system::SystemSpec;
use crate::torus::{DivisorCheck, Frequency, Offender};

/// One grid point of a generic scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub eps: f64,
    pub flagged: bool,
    pub worst: Option<Offender>,
}

/// Flags grid points where `|i<k, w> - phi(eps)|` falls below the step-`m`
/// threshold for some `0 < |k| <= k_trunc`.
pub fn resonant_set_scan<F>(freq: &Frequency, phi: F, sched: &Schedule, m: usize, k_trunc: u32, grid: &[f64]) -> Vec<ScanPoint>
where
    F: Fn(f64) -> Complex64,
{
    let table = ModeTable::new(freq, k_trunc);
    grid.iter()
        .map(|&eps| {
            // check_eigenvalues with eps = 1 tests i<k,w> - phi
            let c = check_eigenvalues(&table, sched, m, 1.0, &[phi(eps)]);
            ScanPoint { eps, flagged: !c.passed, worst: c.worst }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Left end of the scanned interval; `0` scans `(0, eps1)`.
    #[serde(default)]
    pub eps_lo: f64,
    pub cells: usize,
    /// Largest step index whose conditions are checked.
    pub m_cap: usize,
    pub x_init: Vec<f64>,
}

/// One row of the per-cell table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Step of the failing (or tightest) condition.
    pub m: usize,
    /// Mode of the failing (or tightest) condition, `;`-separated.
    pub worst_k: String,
    pub lhs: f64,
    pub rhs: f64,
    pub flagged: bool,
    /// Measure excluded by this cell.
    pub excluded: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DivisorKind>,
    /// Non-resonant failure of the run, if any; such cells are excluded too.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceScan {
    pub eps1: f64,
    pub cells: Vec<CellRecord>,
    pub flagged: usize,
    pub failed: usize,
    pub excluded_measure: f64,
    /// Excluded measure over the scanned length.
    pub excluded_fraction: f64,
    /// `mu*` of the base frame at the first cell.
    pub mu_star: f64,
}

fn join_k(k: &[i32]) -> String {
    k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

struct Tightest {
    m: usize,
    kind: DivisorKind,
    off: Option<Offender>,
    ratio: f64,
}

impl Tightest {
    fn absorb(&mut self, m: usize, kind: DivisorKind, c: &DivisorCheck) {
        if let Some(w) = &c.worst {
            let r = w.ratio();
            if r < self.ratio {
                *self = Tightest { m, kind, off: Some(w.clone()), ratio: r };
            }
        }
    }
}

fn scan_cell(spec: &SystemSpec, opts: &SolveOptions, scan: &ScanOptions, lo: f64, hi: f64) -> (CellRecord, f64) {
    let mid = 0.5 * (lo + hi);
    let mut rec = CellRecord { eps_lo: lo, eps_hi: hi, m: 0, worst_k: String::new(), lhs: f64::NAN, rhs: f64::NAN, flagged: false, excluded: 0.0, kind: None, failure: None };
    let (frame, mut engine) = match engine_for(spec, mid, &scan.x_init, opts) {
        Ok((_, _, frame, _, engine)) => (frame, engine),
        Err(e) => {
            rec.failure = Some(e.to_string());
            rec.excluded = hi - lo;
            return (rec, f64::NAN);
        }
    };
    let mu_star = frame.mu_star;
    let mut tight = Tightest { m: 0, kind: DivisorKind::Eigenvalue, off: None, ratio: f64::INFINITY };
    match engine.run() {
        Ok(()) => {}
        Err(Error::Resonant { m, kind, k, i: _, j: _, lhs, rhs }) => {
            rec.m = m;
            rec.worst_k = join_k(&k);
            rec.lhs = lhs;
            rec.rhs = rhs;
            rec.flagged = true;
            rec.kind = Some(kind);
            rec.excluded = hi - lo;
            return (rec, mu_star);
        }
        Err(Error::MaxIterations { .. }) => {}
        Err(e) => rec.failure = Some(e.to_string()),
    }
    for s in engine.steps() {
        tight.absorb(s.m, DivisorKind::Eigenvalue, &s.eigen_check);
        tight.absorb(s.m, DivisorKind::Difference, &s.difference_check);
    }
    let st = engine.state();
    let sched = &engine.config().schedule;
    let table = engine.mode_table();
    let lambdas = &st.frame.lambdas;
    for m in st.m..=scan.m_cap.max(st.m) {
        let ce = check_eigenvalues(table, sched, m, st.eps, lambdas);
        let cd = check_differences(table, sched, m, st.eps, lambdas);
        tight.absorb(m, DivisorKind::Eigenvalue, &ce);
        tight.absorb(m, DivisorKind::Difference, &cd);
        if !ce.passed || !cd.passed {
            break;
        }
    }
    if let Some(off) = &tight.off {
        rec.m = tight.m;
        rec.worst_k = join_k(&off.k);
        rec.lhs = off.lhs;
        rec.rhs = off.rhs;
        rec.kind = Some(tight.kind);
        rec.flagged = tight.ratio < 1.0;
    }
    if rec.flagged || rec.failure.is_some() {
        rec.excluded = hi - lo;
    }
    (rec, mu_star)
}

/// Runs the iteration at every cell midpoint of a uniform grid on
/// `(eps_lo, eps1)`.
pub fn excluded_parameters(spec: &SystemSpec, eps1: f64, opts: &SolveOptions, scan: &ScanOptions) -> Result<ResonanceScan> {
    let lo = scan.eps_lo;
    if !(lo >= 0.0 && eps1 > lo) {
        return Err(Error::InvalidInput(format!("need 0 <= eps_lo < eps1, got {lo} and {eps1}")));
    }
    let mut o = opts.clone();
    o.engine.ledger = false;
    o.engine.conjugacy_samples = 0;
    o.engine.keep_snapshots = false;
    let h = (eps1 - lo) / scan.cells.max(1) as f64;
    let edge = |c: usize| if c == scan.cells { eps1 } else { lo + c as f64 * h };
    let out: Vec<(CellRecord, f64)> = (0..scan.cells).into_par_iter().map(|c| scan_cell(spec, &o, scan, edge(c), edge(c + 1))).collect();
    let mu_star = out.iter().map(|(_, m)| *m).find(|m| m.is_finite()).unwrap_or(f64::NAN);
    let cells: Vec<CellRecord> = out.into_iter().map(|(c, _)| c).collect();
    let excluded_measure: f64 = cells.iter().map(|c| c.excluded).fold(0.0, |a, b| a + b);
    Ok(ResonanceScan {
        eps1,
        flagged: cells.iter().filter(|c| c.flagged).count(),
        failed: cells.iter().filter(|c| c.failure.is_some()).count(),
        excluded_fraction: excluded_measure / (eps1 - lo),
        excluded_measure,
        mu_star,
        cells,
    })
}

/// Lebesgue measure of the real-shift resonant set in `(0, delta)`, over
/// `0 < |k| <= k_trunc` and `m <= m_cap`.
pub fn real_shift_measure(freq: &Frequency, sched: &Schedule, delta: f64, k_trunc: u32, m_cap: usize) -> f64 {
    let table = ModeTable::new(freq, k_trunc);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (&w, &n) in table.dots.iter().zip(&table.orders) {
        let width = (0..=m_cap).map(|m| sched.threshold(m, n)).fold(0.0, f64::max);
        let (lo, hi) = ((w - width).max(0.0), (w + width).min(delta));
        if hi > lo {
            intervals.push((lo, hi));
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        cur = match cur {
            Some((a, b)) if lo <= b => Some((a, b.max(hi))),
            Some((a, b)) => {
                total += b - a;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}

/// Largest `a1` with `measure <= a3 delta exp(-a1 / delta^{a2})`;
/// infinite when the measure is zero.
pub fn largest_a1(measure: f64, delta: f64, a2: f64, a3: f64) -> f64 {
    if measure <= 0.0 {
        return f64::INFINITY;
    }
    delta.powf(a2) * (a3 * delta / measure).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureFit {
    pub eps1: f64,
    /// `mu* eps1`.
    pub delta: f64,
    pub a2: f64,
    pub a3: f64,
    pub real_shift_measure: f64,
    pub scan_measure: f64,
    /// Largest `a1` for the real-shift set (`a3 = 1`).
    pub a1_real_shift: f64,
    /// Largest `a1` for the scanned excluded set.
    pub a1_scan: f64,
    /// `a3 delta exp(-a1 / delta^{a2})` for the configured `a1`.
    pub a1: f64,
    pub bound_value: f64,
    pub majorized: bool,
}

pub fn measure_fit(scan: &ResonanceScan, freq: &Frequency, sched: &Schedule, m_cap: usize, a1: f64, a2: f64, a3: f64) -> MeasureFit {
    let delta = scan.mu_star * scan.eps1;
    let real = real_shift_measure(freq, sched, delta, sched.k_trunc, m_cap);
    let bound_value = a3 * delta * (-a1 / delta.powf(a2)).exp();
    MeasureFit {
        a1,
        bound_value,
        majorized: scan.excluded_measure <= bound_value,
        eps1: scan.eps1,
        delta,
        a2,
        a3,
        real_shift_measure: real,
        scan_measure: scan.excluded_measure,
        a1_real_shift: largest_a1(real, delta, a2, 1.0),
        a1_scan: largest_a1(scan.excluded_measure, delta, a2, a3),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationVerdict {
    pub holds: bool,
    /// Smallest `|x(e') - x(e'')| / (c |e' - e''|)` over pairs.
    pub worst_ratio: f64,
    pub worst_pair: Option<(f64, f64)>,
}

fn separation<F>(curve: &[(f64, Complex64)], value: F, slope: f64) -> SeparationVerdict
where
    F: Fn(f64, Complex64) -> Complex64,
{
    let mut worst = f64::INFINITY;
    let mut pair = None;
    for (a, &(e1, l1)) in curve.iter().enumerate() {
        for &(e2, l2) in &curve[a + 1..] {
            let gap = (e1 - e2).abs();
            if gap == 0.0 {
                continue;
            }
            let ratio = (value(e1, l1) - value(e2, l2)).norm() / (slope * gap);
            if ratio < worst {
                worst = ratio;
                pair = Some((e1, e2));
            }
        }
    }
    SeparationVerdict { holds: worst >= 1.0, worst_ratio: worst, worst_pair: pair }
}

/// `|e' l(e') - e'' l(e'')| >= (mu/2) |e' - e''|` for all sampled pairs.
pub fn lipschitz_separation_check(curve: &[(f64, Complex64)], mu: f64) -> Result<SeparationVerdict> {
    if curve.len() < 3 {
        return Err(Error::InvalidInput(format!("separation check needs at least 3 samples, got {}", curve.len())));
    }
    Ok(separation(curve, |e, l| l * e, 0.5 * mu))
}

/// `|e'^{a0} l(e') - e''^{a0} l(e'')| >= eps1^{a0} |e' - e''|` on the samples
/// inside `(eps1^{delta1}, eps1)`.
pub fn lipschitz_separation_check_scaled(curve: &[(f64, Complex64)], a0: f64, eps1: f64, delta1: f64) -> Result<SeparationVerdict> {
    let window: Vec<(f64, Complex64)> = curve.iter().cloned().filter(|(e, _)| *e > eps1.powf(delta1) && *e < eps1).collect();
    if window.len() < 3 {
        return Err(Error::InvalidInput(format!("separation check needs at least 3 samples in the window, got {}", window.len())));
    }
    Ok(separation(&window, |e, l| l * e.powf(a0), eps1.powf(a0)))
}
