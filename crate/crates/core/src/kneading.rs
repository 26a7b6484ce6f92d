//! Milnor-Thurston kneading sequences, lap numbers and monotonicity scans.
//!
//! Symbols follow the convention for maps that decrease then increase: for
//! additive families `i_k = sign(f^k(x0) - x0)`. Multiplicative families have a
//! maximum at `x0`, so their symbols are mirrored, `i_k = sign(x0 - f^k(x0))`,
//! which makes the kneading sequence decrease with the parameter.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::family::FamilySpec;
use crate::orbit::RealFamily;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KneadingSequence {
    pub symbols: Vec<i8>,
    pub terminated: bool,
}

impl KneadingSequence {
    /// Comma-separated symbols, e.g. `-1,+1,0`.
    pub fn to_symbol_string(&self) -> String {
        self.symbols
            .iter()
            .map(|s| match s {
                1 => "+1",
                -1 => "-1",
                _ => "0",
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Direction in which kneading sequences move as the parameter increases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

pub fn direction(spec: &FamilySpec) -> Direction {
    if spec.is_multiplicative() {
        Direction::Decreasing
    } else {
        Direction::Increasing
    }
}

fn mirror(spec: &FamilySpec) -> f64 {
    if spec.is_multiplicative() {
        -1.0
    } else {
        1.0
    }
}

/// Invariant interval carrying the dynamics, and whether the hull of the first two
/// critical values was invariant (otherwise the escape box is used).
pub fn dynamical_interval(spec: &FamilySpec, c: f64) -> Result<(f64, f64, bool)> {
    let fam = RealFamily::new(spec)?;
    let c1 = fam.step(c, fam.x0);
    let c2 = fam.step(c, c1);
    let (lo, hi) = (c1.min(c2), c1.max(c2));
    let tol = 1e-12 * (hi - lo).max(1.0);
    let mut imgs = vec![fam.step(c, lo), fam.step(c, hi)];
    if fam.x0 > lo && fam.x0 < hi {
        imgs.push(fam.step(c, fam.x0));
    }
    let inside = imgs.iter().all(|&y| y.is_finite() && y >= lo - tol && y <= hi + tol);
    if inside && hi > lo {
        Ok((lo, hi, true))
    } else {
        let b = spec.escape_bound(c);
        Ok((-b, b, false))
    }
}

fn interval_length(spec: &FamilySpec, c: f64) -> Result<f64> {
    let (lo, hi, _) = dynamical_interval(spec, c)?;
    Ok((hi - lo).max(1.0))
}

/// Kneading sequence of length at most `n`.
pub fn kneading(spec: &FamilySpec, c: f64, n: usize) -> Result<KneadingSequence> {
    let fam = RealFamily::new(spec)?;
    let zero_tol = 1e-11 * interval_length(spec, c)?;
    let bound = spec.escape_bound(c);
    let m = mirror(spec);
    let mut x = fam.x0;
    let mut symbols = Vec::with_capacity(n);
    for k in 1..=n {
        x = fam.step(c, x);
        if !x.is_finite() || x.abs() > bound {
            return Err(Error::Escape { k, modulus: x.abs() });
        }
        let s = x - fam.x0;
        if s.abs() < zero_tol {
            symbols.push(0);
            return Ok(KneadingSequence { symbols, terminated: true });
        }
        symbols.push(if m * s > 0.0 { 1 } else { -1 });
    }
    Ok(KneadingSequence { symbols, terminated: false })
}

/// Signed-lexicographic order on kneading sequences.
pub fn compare(k1: &KneadingSequence, k2: &KneadingSequence) -> Result<Ordering> {
    if k1.symbols.is_empty() || k2.symbols.is_empty() {
        return Err(Error::Degenerate("empty kneading sequence".into()));
    }
    let (mut p1, mut p2) = (1i32, 1i32);
    for (&a, &b) in k1.symbols.iter().zip(&k2.symbols) {
        p1 *= a as i32;
        p2 *= b as i32;
        if a != b {
            return Ok(p1.cmp(&p2));
        }
    }
    let (n1, n2) = (k1.symbols.len(), k2.symbols.len());
    if n1 == n2 {
        return Ok(Ordering::Equal);
    }
    let shorter_terminated = if n1 < n2 { k1.terminated } else { k2.terminated };
    if shorter_terminated {
        Err(Error::Incomparable)
    } else {
        Ok(Ordering::Equal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LapTable {
    /// `laps[n-1] = Lambda_n`.
    pub laps: Vec<u64>,
    pub entropy_estimate: f64,
    pub fit_error: f64,
}

impl LapTable {
    pub fn is_submultiplicative(&self) -> bool {
        let n = self.laps.len();
        (1..=n).all(|a| {
            (1..=n - a).all(|b| {
                (self.laps[a + b - 1] as u128) <= (self.laps[a - 1] as u128) * (self.laps[b - 1] as u128)
            })
        })
    }
}

/// Least-squares slope of `log Lambda_n` against `n` over the last half of the table.
pub fn entropy_fit(laps: &[u64]) -> (f64, f64) {
    let n = laps.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let start = n / 2;
    let pts: Vec<(f64, f64)> =
        (start..n).map(|i| ((i + 1) as f64, (laps[i] as f64).ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    (slope.max(0.0), rms)
}

/// Root of a monotone function on `[u, v]` with `f(u) <= y <= f(v)` or reversed.
pub(crate) fn monotone_solve(f: &dyn Fn(f64) -> f64, mut u: f64, mut v: f64, y: f64) -> f64 {
    let up = f(v) >= f(u);
    loop {
        let m = 0.5 * (u + v);
        if m <= u.min(v) || m >= u.max(v) {
            return m;
        }
        let fm = f(m);
        if (fm < y) == up {
            u = m;
        } else {
            v = m;
        }
    }
}

/// Counts distinct points of `I` reaching a turning point in fewer than `n` steps, by
/// breadth-first preimage search on monotone branches.
pub(crate) fn count_turning_preimages(
    f: &(dyn Fn(f64) -> f64 + Sync),
    turning: &[f64],
    lo: f64,
    hi: f64,
    n_max: usize,
    exec: Exec,
) -> Vec<u64> {
    let tol = 1e-13 * (hi - lo).max(1.0);
    let mut cuts: Vec<f64> = turning.iter().copied().filter(|&t| t > lo && t < hi).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut ends = vec![lo];
    ends.extend(&cuts);
    ends.push(hi);
    let branches: Vec<(f64, f64, f64, f64)> =
        ends.windows(2).map(|w| (w[0], w[1], f(w[0]), f(w[1]))).collect();

    let mut seen: Vec<f64> = Vec::new();
    let mut frontier: Vec<f64> =
        turning.iter().copied().filter(|&t| t >= lo - tol && t <= hi + tol).collect();
    frontier.sort_by(|a, b| a.partial_cmp(b).unwrap());
    frontier.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let mut laps = Vec::with_capacity(n_max);
    for level in 0..n_max {
        // merge frontier into seen
        let mut fresh = Vec::with_capacity(frontier.len());
        for x in frontier.drain(..) {
            let pos = seen.partition_point(|&s| s < x - tol);
            if pos < seen.len() && (seen[pos] - x).abs() <= tol {
                continue;
            }
            fresh.push(x);
        }
        seen.extend(&fresh);
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        laps.push(1 + seen.len() as u64);
        if level + 1 == n_max {
            break;
        }
        let pre: Vec<Vec<f64>> = exec.map(&fresh, |&y| {
            let mut xs = Vec::new();
            for &(u, v, fu, fv) in &branches {
                let (mn, mx) = (fu.min(fv), fu.max(fv));
                if y < mn - tol || y > mx + tol {
                    continue;
                }
                let x = if (y - fu).abs() <= tol {
                    u
                } else if (y - fv).abs() <= tol {
                    v
                } else {
                    monotone_solve(f, u, v, y)
                };
                xs.push(x);
            }
            xs
        });
        frontier = pre.into_iter().flatten().collect();
        frontier.sort_by(|a, b| a.partial_cmp(b).unwrap());
        frontier.dedup_by(|a, b| (*a - *b).abs() <= tol);
    }
    laps
}

pub fn lap_numbers(spec: &FamilySpec, c: f64, n_max: usize) -> Result<LapTable> {
    lap_numbers_with(spec, c, n_max, Exec::default())
}

pub fn lap_numbers_with(spec: &FamilySpec, c: f64, n_max: usize, exec: Exec) -> Result<LapTable> {
    if n_max == 0 || n_max > 24 {
        return Err(Error::Degenerate(format!("n_max = {n_max} outside 1..=24")));
    }
    let fam = RealFamily::new(spec)?;
    // escape of the critical orbit is reported, as for kneading
    kneading(spec, c, n_max)?;
    let (lo, hi, _) = dynamical_interval(spec, c)?;
    let f = |x: f64| fam.step(c, x);
    let laps = count_turning_preimages(&f, &[fam.x0], lo, hi, n_max, exec);
    let (entropy_estimate, fit_error) = entropy_fit(&laps);
    Ok(LapTable { laps, entropy_estimate, fit_error })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub c: f64,
    pub c_next: f64,
}

/// One row of a parameter scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub c: f64,
    pub kneading: Option<KneadingSequence>,
    pub lambda_n: Option<u64>,
    pub entropy: Option<f64>,
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Violations of kneading monotonicity between consecutive grid parameters.
pub fn monotonicity_scan(spec: &FamilySpec, lo: f64, hi: f64, grid_points: usize, n: usize) -> Result<Vec<Violation>> {
    monotonicity_scan_with(spec, lo, hi, grid_points, n, Exec::default())
}

pub fn monotonicity_scan_with(
    spec: &FamilySpec,
    lo: f64,
    hi: f64,
    grid_points: usize,
    n: usize,
    exec: Exec,
) -> Result<Vec<Violation>> {
    RealFamily::new(spec)?;
    if !(hi > lo) {
        return Err(Error::Degenerate("empty parameter range".into()));
    }
    let cs = grid(lo, hi, grid_points);
    let ks = exec.map(&cs, |&c| kneading(spec, c, n).ok());
    Ok(violations(spec, &cs, &ks))
}

fn violations(spec: &FamilySpec, cs: &[f64], ks: &[Option<KneadingSequence>]) -> Vec<Violation> {
    let bad = match direction(spec) {
        Direction::Increasing => Ordering::Less,
        Direction::Decreasing => Ordering::Greater,
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, &KneadingSequence)> = None;
    for (c, k) in cs.iter().zip(ks) {
        if let Some(k) = k {
            if let Some((pc, pk)) = prev {
                if matches!(compare(k, pk), Ok(o) if o == bad) {
                    out.push(Violation { c: pc, c_next: *c });
                }
            }
            prev = Some((*c, k));
        }
    }
    out
}

/// Scan rows with kneading prefix, lap number at depth `lap_depth` and entropy estimate.
pub fn scan_table(
    spec: &FamilySpec,
    lo: f64,
    hi: f64,
    grid_points: usize,
    n: usize,
    lap_depth: usize,
    exec: Exec,
) -> Result<(Vec<ScanRow>, Vec<Violation>)> {
    RealFamily::new(spec)?;
    let cs = grid(lo, hi, grid_points);
    let rows = exec.map(&cs, |&c| {
        let kneading = kneading(spec, c, n).ok();
        let laps = lap_numbers_with(spec, c, lap_depth, Exec::Sequential).ok();
        ScanRow {
            c,
            kneading,
            lambda_n: laps.as_ref().and_then(|t| t.laps.last().copied()),
            entropy: laps.map(|t| t.entropy_estimate),
        }
    });
    let ks: Vec<Option<KneadingSequence>> = rows.iter().map(|r| r.kneading.clone()).collect();
    let v = violations(spec, &cs, &ks);
    Ok((rows, v))
}
