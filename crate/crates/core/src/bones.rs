//! Curves `f^q_{a,b}(a) = a` ("bones") in the real cubic family
//! `f_{a,b}(x) = x^3 - 3a^2 x + b`, with the orientation field in critical-value
//! coordinates, crossings with the relation `f^i(a) = -a`, and lap entropy along
//! the curve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::family::{cubic_chart_inverse, FamilySpec};
use crate::kneading::{count_turning_preimages, entropy_fit};
use crate::orbit::{critical_orbit, OrbitOptions};
use crate::transfer::certify_orbit;
use crate::{poly, re};

pub const CURVE_TOL: f64 = 1e-8;
pub const RANK_TOL: f64 = 1e-10;

fn f(a: f64, b: f64, x: f64) -> f64 {
    x * x * x - 3.0 * a * a * x + b
}

fn df(a: f64, x: f64) -> f64 {
    3.0 * (x * x - a * a)
}

/// `x_n = f^n(s a)` with `(dx_n/da, dx_n/db)`, for the starting sign `s = +-1`.
fn orbit_grad(s: f64, n: usize, a: f64, b: f64) -> (f64, f64, f64) {
    let (mut x, mut xa, mut xb) = (s * a, s, 0.0);
    for _ in 0..n {
        let d = df(a, x);
        let (nxa, nxb) = (d * xa - 6.0 * a * x, d * xb + 1.0);
        x = f(a, b, x);
        xa = nxa;
        xb = nxb;
    }
    (x, xa, xb)
}

/// `R(a, b) = f^q(a) - a` and its gradient in `(a, b)`.
pub fn bone_residual(q: usize, a: f64, b: f64) -> (f64, [f64; 2]) {
    let (x, xa, xb) = orbit_grad(1.0, q, a, b);
    (x - a, [xa - 1.0, xb])
}

/// Gradient in `(a, b)` pulled back to critical-value coordinates `(w1, w2) = (f(a), f(-a))`.
fn to_w(a: f64, g: [f64; 2]) -> [f64; 2] {
    let k = 1.0 / (12.0 * a * a);
    [-k * g[0] + 0.5 * g[1], k * g[0] + 0.5 * g[1]]
}

/// A tangent vector in `(w1, w2)` pushed forward to `(a, b)`.
fn w_to_ab(a: f64, e: [f64; 2]) -> [f64; 2] {
    let k = 1.0 / (12.0 * a * a);
    [k * (e[1] - e[0]), 0.5 * (e[0] + e[1])]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

/// Orientation data at a curve point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tangent {
    /// `V = grad_w R / DG^{q-1}(w1)`.
    pub v: [f64; 2],
    /// Unit `E_w` with `det[V, E_w] > 0`, in `(w1, w2)`.
    pub e_w: [f64; 2],
    /// `E_w` pushed forward to `(a, b)` and normalized.
    pub e_ab: [f64; 2],
    pub grad_norm: f64,
}

pub fn tangent_orientation(q: usize, a: f64, b: f64) -> Result<Tangent> {
    if a == 0.0 {
        return Err(Error::DegenerateChart("a = 0".into()));
    }
    let (_, g) = bone_residual(q, a, b);
    // DG^{q-1}(w1) = prod_{k=1}^{q-1} f'(f^k(a))
    let mut chain = 1.0;
    let mut x = f(a, b, a);
    for _ in 1..q {
        chain *= df(a, x);
        x = f(a, b, x);
    }
    orient(a, to_w(a, g), chain)
}

fn orient(a: f64, gw: [f64; 2], chain: f64) -> Result<Tangent> {
    let grad_norm = norm(gw);
    if !(grad_norm >= RANK_TOL) {
        return Err(Error::RankDeficient(grad_norm));
    }
    // a vanishing chain only rescales V; its direction is that of the gradient
    let v = if chain != 0.0 { [gw[0] / chain, gw[1] / chain] } else { gw };
    let s = norm(v);
    let e_w = [-v[1] / s, v[0] / s];
    let e = w_to_ab(a, e_w);
    let n = norm(e);
    Ok(Tangent { v, e_w, e_ab: [e[0] / n, e[1] / n], grad_norm })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    /// `f^i(a) = -a`: both critical points in one cycle.
    Crossing { i: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    /// Index of the curve point preceding the event.
    pub index: usize,
    pub kind: EventKind,
    /// Refined location on the curve.
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Steps,
    Bounds,
    ChartBoundary,
    Closed,
    StepFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoneCurve {
    pub q: usize,
    pub points: Vec<(f64, f64)>,
    pub tangents: Vec<Tangent>,
    pub events: Vec<Event>,
    /// Lap entropy per point (filled by [`entropy_along`]).
    pub lap_entropy: Vec<Option<f64>>,
    pub stop: Vec<StopReason>,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub step: f64,
    pub n_steps: usize,
    /// `[a_lo, a_hi, b_lo, b_hi]`.
    pub bounds: Option<[f64; 4]>,
    pub both_directions: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { step: 0.01, n_steps: 2000, bounds: None, both_directions: false }
    }
}

fn curve_tol(b: f64) -> f64 {
    CURVE_TOL * (1.0 + b.abs())
}

/// Newton projection onto `R = 0` along the gradient.
fn project(q: usize, mut p: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..50 {
        let (r, g) = bone_residual(q, p[0], p[1]);
        let gg = dot(g, g);
        if !(gg > 0.0) || !r.is_finite() {
            return None;
        }
        let d = [r * g[0] / gg, r * g[1] / gg];
        p = [p[0] - d[0], p[1] - d[1]];
        if norm(d) <= 1e-15 * (1.0 + norm(p)) {
            break;
        }
    }
    let (r, _) = bone_residual(q, p[0], p[1]);
    (r.abs() <= curve_tol(p[1])).then_some(p)
}

fn unit_tangent(q: usize, p: [f64; 2]) -> [f64; 2] {
    let (_, g) = bone_residual(q, p[0], p[1]);
    let n = norm(g);
    [-g[1] / n, g[0] / n]
}

/// Pseudo-arclength corrector: `R(p) = 0`, `t . (p - p0) = h`.
fn correct(q: usize, p0: [f64; 2], t: [f64; 2], h: f64) -> Option<[f64; 2]> {
    let mut p = [p0[0] + h * t[0], p0[1] + h * t[1]];
    for it in 0..12 {
        let (r, g) = bone_residual(q, p[0], p[1]);
        let s = dot(t, [p[0] - p0[0], p[1] - p0[1]]) - h;
        let det = g[0] * t[1] - g[1] * t[0];
        if !(det.abs() > 0.0) || !r.is_finite() {
            return None;
        }
        let da = (r * t[1] - g[1] * s) / det;
        let db = (g[0] * s - r * t[0]) / det;
        p = [p[0] - da, p[1] - db];
        if norm([da, db]) <= 1e-14 * (1.0 + norm(p)) {
            let (r, _) = bone_residual(q, p[0], p[1]);
            return (r.abs() <= curve_tol(p[1]) && it < 11).then_some(p);
        }
    }
    None
}

fn in_bounds(p: [f64; 2], bounds: Option<[f64; 4]>) -> bool {
    bounds.map_or(true, |bx| p[0] >= bx[0] && p[0] <= bx[1] && p[1] >= bx[2] && p[1] <= bx[3])
}

fn march(q: usize, start: [f64; 2], dir: f64, opts: &TraceOptions) -> (Vec<[f64; 2]>, StopReason) {
    let mut pts = vec![start];
    let mut t = unit_tangent(q, start);
    t = [dir * t[0], dir * t[1]];
    let mut h = opts.step;
    let h_min = opts.step / 1024.0;
    while pts.len() <= opts.n_steps {
        let p0 = *pts.last().unwrap();
        match correct(q, p0, t, h) {
            Some(p) => {
                let mut tn = unit_tangent(q, p);
                if dot(tn, t) < 0.0 {
                    tn = [-tn[0], -tn[1]];
                }
                if dot(tn, t) < 0.9 {
                    // turning too sharply for this step
                    h *= 0.5;
                    if h < h_min {
                        return (pts, StopReason::StepFailure);
                    }
                    continue;
                }
                if p[0] <= 1e-3 {
                    return (pts, StopReason::ChartBoundary);
                }
                if !in_bounds(p, opts.bounds) {
                    return (pts, StopReason::Bounds);
                }
                pts.push(p);
                t = tn;
                if pts.len() > 10 && norm([p[0] - start[0], p[1] - start[1]]) < 0.5 * opts.step {
                    return (pts, StopReason::Closed);
                }
                h = (h * 1.5).min(opts.step);
            }
            None => {
                h *= 0.5;
                if h < h_min {
                    return (pts, StopReason::StepFailure);
                }
            }
        }
    }
    (pts, StopReason::Steps)
}

/// Trace the component of `f^q_{a,b}(a) = a` through `seed`.
pub fn trace_bone(q: usize, seed: (f64, f64), opts: TraceOptions) -> Result<BoneCurve> {
    let start = project(q, [seed.0, seed.1]).ok_or(Error::SeedNotOnCurve { a: seed.0, b: seed.1 })?;
    if norm([start[0] - seed.0, start[1] - seed.1]) > 0.1 || start[0] <= 0.0 {
        return Err(Error::SeedNotOnCurve { a: seed.0, b: seed.1 });
    }
    let (fwd, stop_f) = march(q, start, 1.0, &opts);
    let (mut pts, stop) = if opts.both_directions && stop_f != StopReason::Closed {
        let (bwd, stop_b) = march(q, start, -1.0, &opts);
        let mut all: Vec<[f64; 2]> = bwd.into_iter().rev().collect();
        all.extend(fwd.into_iter().skip(1));
        (all, vec![stop_b, stop_f])
    } else {
        (fwd, vec![stop_f])
    };
    if pts.len() < 2 {
        return Err(Error::StepFailure { a: start[0], b: start[1] });
    }
    pts.dedup();
    let tangents = pts.iter().map(|p| tangent_orientation(q, p[0], p[1])).collect::<Result<Vec<_>>>()?;
    let n = pts.len();
    let mut curve = BoneCurve {
        q,
        points: pts.iter().map(|p| (p[0], p[1])).collect(),
        tangents,
        events: Vec::new(),
        lap_entropy: vec![None; n],
        stop,
    };
    curve.events = detect_crossings(&curve);
    Ok(curve)
}

/// `s_i(a, b) = f^i(a) + a`.
fn crossing_fn(i: usize, p: [f64; 2]) -> f64 {
    orbit_grad(1.0, i, p[0], p[1]).0 + p[0]
}

/// Sign changes of `f^i(a) + a`, `1 <= i < q`, refined by bisection along the curve.
pub fn detect_crossings(curve: &BoneCurve) -> Vec<Event> {
    let q = curve.q;
    let mut events = Vec::new();
    for i in 1..q {
        for k in 0..curve.points.len().saturating_sub(1) {
            let p0 = [curve.points[k].0, curve.points[k].1];
            let p1 = [curve.points[k + 1].0, curve.points[k + 1].1];
            let (s0, s1) = (crossing_fn(i, p0), crossing_fn(i, p1));
            if s0 == 0.0 || s0.signum() == s1.signum() {
                continue;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut best = p0;
            let at = |t: f64| {
                let p = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
                project(q, p).unwrap_or(p)
            };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let pm = at(mid);
                best = pm;
                let sm = crossing_fn(i, pm);
                if sm == 0.0 || hi - lo < 1e-15 {
                    break;
                }
                if sm.signum() == s0.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            events.push(Event { index: k, kind: EventKind::Crossing { i }, a: best[0], b: best[1] });
        }
    }
    events.sort_by_key(|e| e.index);
    events
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub event: Event,
    /// `grad_E (f^i(a) + a) / prod_{k=1}^{i-1} f'(f^k(a))`, `E` oriented by the relation of `-a`.
    pub value: f64,
    /// The same with `E` reversed.
    pub reversed: f64,
    /// `Q` of the two-relation map at the crossing, when its orbit is detected.
    pub q_cert: Option<f64>,
}

/// Directional transversality of the second relation at a crossing.
///
/// At a crossing `f^i(a) = -a` the curve is, to first order, the locus of the relation
/// `R(w) = f^{q-i}(-a) - a` of the critical point `-a`, whose critical value `f(-a)` is
/// listed first; `E` is the unit tangent with `det[V, E] > 0` for
/// `V = grad R / prod_{k=1}^{q-i-1} f'(f^k(-a))`.
pub fn directional_transversality(curve: &BoneCurve, event: &Event) -> Result<CrossingReport> {
    let EventKind::Crossing { i } = event.kind;
    let q = curve.q;
    let (a, b) = (event.a, event.b);
    // coordinates (w_{-a}, w_a) = (w2, w1)
    let swap = |g: [f64; 2]| [g[1], g[0]];
    let (_, ra, rb) = orbit_grad(-1.0, q - i, a, b);
    let gr = swap(to_w(a, [ra - 1.0, rb]));
    let mut chain_r = 1.0;
    let mut x = f(a, b, -a);
    for _ in 1..q - i {
        chain_r *= df(a, x);
        x = f(a, b, x);
    }
    let v = [gr[0] / chain_r, gr[1] / chain_r];
    let nv = norm(v);
    if !(nv >= RANK_TOL) {
        return Err(Error::RankDeficient(nv));
    }
    let e = [-v[1] / nv, v[0] / nv];
    let (_, sa, sb) = orbit_grad(1.0, i, a, b);
    let gs = swap(to_w(a, [sa + 1.0, sb]));
    let mut chain_s = 1.0;
    let mut x = f(a, b, a);
    for _ in 1..i {
        chain_s *= df(a, x);
        x = f(a, b, x);
    }
    let value = dot(gs, e) / chain_s;
    let (w1, w2) = cubic_chart_inverse(a, b);
    let q_cert = critical_orbit(&FamilySpec::Cubic, &[re(w1), re(w2)], OrbitOptions::default())
        .ok()
        .and_then(|o| certify_orbit(&FamilySpec::Cubic, &o, false).ok())
        .map(|c| c.q.re);
    Ok(CrossingReport { event: *event, value, reversed: -value, q_cert })
}

/// Orientation continuity of `E_w`: consecutive tangents with negative inner product,
/// not counting the step across a crossing (where `f'(-a)` vanishes in `V`).
pub fn orientation_flips(curve: &BoneCurve) -> Vec<usize> {
    let crossing_steps: Vec<usize> = curve.events.iter().map(|e| e.index).collect();
    (0..curve.tangents.len().saturating_sub(1))
        .filter(|k| !crossing_steps.contains(k))
        .filter(|&k| dot(curve.tangents[k].e_w, curve.tangents[k + 1].e_w) <= 0.0)
        .collect()
}

/// Orbit order of `a, f(a), ..., f^{q-1}(a)` changes between consecutive points.
pub fn ordering_changes(curve: &BoneCurve) -> Vec<usize> {
    let order = |&(a, b): &(f64, f64)| {
        let mut xs: Vec<(f64, usize)> = Vec::with_capacity(curve.q);
        let mut x = a;
        for k in 0..curve.q {
            xs.push((x, k));
            x = f(a, b, x);
        }
        xs.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap_or(std::cmp::Ordering::Equal));
        xs.into_iter().map(|p| p.1).collect::<Vec<_>>()
    };
    let orders: Vec<Vec<usize>> = curve.points.iter().map(order).collect();
    (0..orders.len().saturating_sub(1)).filter(|&k| orders[k] != orders[k + 1]).collect()
}

/// Smallest and largest real fixed points of `f_{a,b}`.
pub fn fixed_point_interval(a: f64, b: f64) -> Option<(f64, f64)> {
    let r = poly::roots(&[re(b), re(-3.0 * a * a - 1.0), re(0.0), re(1.0)]).ok()?;
    let real: Vec<f64> = r.iter().filter(|z| z.im.abs() <= 1e-9 * (1.0 + z.re.abs())).map(|z| z.re).collect();
    let lo = real.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = real.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo < hi).then_some((lo, hi))
}

/// Lap-number entropy of `f_{a,b}` on its fixed-point interval, from preimages of both
/// critical points. `Err(Escape)` when a critical value leaves the interval.
pub fn bimodal_entropy(a: f64, b: f64, n: usize, exec: Exec) -> Result<f64> {
    let (lo, hi) = fixed_point_interval(a, b).ok_or(Error::Escape { k: 0, modulus: f64::NAN })?;
    let slack = 1e-12 * (hi - lo);
    for (k, c) in [(1, f(a, b, a)), (1, f(a, b, -a))] {
        if c < lo - slack || c > hi + slack {
            return Err(Error::Escape { k, modulus: c.abs() });
        }
    }
    let map = move |x: f64| f(a, b, x);
    let laps = count_turning_preimages(&map, &[-a, a], lo, hi, n, exec);
    Ok(entropy_fit(&laps).0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentMonotonicity {
    /// Curve point range `[start, end]`.
    pub start: usize,
    pub end: usize,
    pub non_decreasing: bool,
    pub non_increasing: bool,
    /// Points whose entropy could not be computed (escaping critical orbit).
    pub escaped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub segments: Vec<SegmentMonotonicity>,
    /// Each segment monotone within the tolerance.
    pub monotone: bool,
    /// Segments adjacent to a crossing have opposite directions.
    pub opposite_at_crossings: bool,
}

pub const ENTROPY_TOL: f64 = 0.02;

/// Fill `lap_entropy` and report monotonicity on the pieces between crossings.
pub fn entropy_along(curve: &mut BoneCurve, n: usize, exec: Exec) -> EntropyReport {
    let pts = curve.points.clone();
    curve.lap_entropy = exec.map(&pts, |&(a, b)| bimodal_entropy(a, b, n, Exec::Sequential).ok());
    let mut cuts: Vec<usize> = curve.events.iter().map(|e| e.index + 1).collect();
    cuts.dedup();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(pts.len());
    let segments: Vec<SegmentMonotonicity> = bounds
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let vals: Vec<f64> = curve.lap_entropy[w[0]..w[1]].iter().flatten().copied().collect();
            let (mut rise, mut drop) = (0.0f64, 0.0f64);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &vals {
                drop = drop.max(hi - v);
                rise = rise.max(v - lo);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            SegmentMonotonicity {
                start: w[0],
                end: w[1] - 1,
                non_decreasing: drop <= ENTROPY_TOL,
                non_increasing: rise <= ENTROPY_TOL,
                escaped: (w[1] - w[0]) - vals.len(),
            }
        })
        .collect();
    let monotone = segments.iter().all(|s| s.non_decreasing || s.non_increasing);
    let opposite_at_crossings = segments.windows(2).all(|p| {
        (p[0].non_decreasing && p[1].non_increasing) || (p[0].non_increasing && p[1].non_decreasing)
    });
    EntropyReport { segments, monotone, opposite_at_crossings }
}

/// Points of `R = 0` in a box found from sign changes of `R` along `b` on a grid,
/// excluding parameters where `a` has a smaller period.
pub fn find_seeds(q: usize, bx: [f64; 4], grid: usize, exec: Exec) -> Vec<(f64, f64)> {
    let rows = exec.map_range(grid + 1, |ia| {
        let a = bx[0] + (bx[1] - bx[0]) * ia as f64 / grid as f64;
        let mut out = Vec::new();
        if a <= 0.0 {
            return out;
        }
        let bs: Vec<f64> = (0..=grid).map(|ib| bx[2] + (bx[3] - bx[2]) * ib as f64 / grid as f64).collect();
        for w in bs.windows(2) {
            let (r0, r1) = (bone_residual(q, a, w[0]).0, bone_residual(q, a, w[1]).0);
            if r0.is_finite() && r1.is_finite() && r0.signum() != r1.signum() {
                if let Some(p) = project(q, [a, 0.5 * (w[0] + w[1])]) {
                    if minimal_period(q, p[0], p[1]) == q {
                        out.push((p[0], p[1]));
                    }
                }
            }
        }
        out
    });
    rows.into_iter().flatten().collect()
}

fn minimal_period(q: usize, a: f64, b: f64) -> usize {
    let mut x = a;
    for k in 1..q {
        x = f(a, b, x);
        if (x - a).abs() <= 1e-7 * (1.0 + a.abs()) {
            return k;
        }
    }
    q
}

/// Trace every component of `R = 0` met by the seeds in `bx`.
pub fn trace_components(q: usize, bx: [f64; 4], grid: usize, opts: TraceOptions, exec: Exec) -> Vec<BoneCurve> {
    let mut seeds = find_seeds(q, bx, grid, exec);
    let opts = TraceOptions { bounds: Some(bx), both_directions: true, ..opts };
    let mut curves: Vec<BoneCurve> = Vec::new();
    while let Some(s) = seeds.pop() {
        let Ok(c) = trace_bone(q, s, opts) else { continue };
        let near = |p: &(f64, f64)| {
            c.points.iter().any(|r| (r.0 - p.0).hypot(r.1 - p.1) <= 2.0 * opts.step)
        };
        seeds.retain(|p| !near(p));
        curves.push(c);
    }
    curves.sort_by(|x, y| x.points[0].partial_cmp(&y.points[0]).unwrap_or(std::cmp::Ordering::Equal));
    curves
}
