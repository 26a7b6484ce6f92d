//! Holomorphic motions of `g(P)`, their lifts, and the angle geometry used for
//! high-order critical points.
//!
//! Motions are sampled on rays `lambda = r e^{i t}`. Lifts are computed by
//! continuation in `lambda` along each ray: all iterates `h^(k)` are marched
//! together, and the Newton solve for `h^(k+1)` at a substep is seeded with its
//! value at the previous substep.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::family::Deformation;
use crate::linalg::CMat;
use crate::orbit::MarkedOrbit;
use crate::transfer::assemble_a;
use crate::{re, Scalar};

const MAX_HALVINGS: usize = 8;
const NEWTON_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    /// The angle at `z` between the rays to `0` and to `1`.
    pub angle: f64,
    pub in_dtheta: bool,
    pub in_sector: bool,
}

/// Angle `0z1` and membership of `z` in `D_theta` and `S_theta`.
pub fn geometry(z: Scalar, theta: f64) -> Result<Geometry> {
    if z == re(0.0) || z == re(1.0) {
        return Err(Error::DegeneratePoint(format!("{z}")));
    }
    let angle = vertex_angle(z, re(0.0), re(1.0));
    Ok(Geometry { angle, in_dtheta: angle > PI - theta, in_sector: z.arg().abs() < theta })
}

/// Angle at `o` formed by the rays `oa` and `ob`, in `[0, pi]`.
pub fn vertex_angle(o: Scalar, a: Scalar, b: Scalar) -> f64 {
    ((b - o) / (a - o)).arg().abs()
}

/// Sample grid in the `lambda` disk: rays at `angles`, radii `radius * s / n_radii`, `s = 1..=n_radii`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub radius: f64,
    pub angles: Vec<f64>,
    pub n_radii: usize,
}

impl Grid {
    pub fn disk(radius: f64, n_rays: usize, n_radii: usize) -> Self {
        Grid { radius, angles: (0..n_rays).map(|r| 2.0 * PI * r as f64 / n_rays as f64).collect(), n_radii }
    }

    /// A single ray along the positive reals.
    pub fn real_ray(radius: f64, n_radii: usize) -> Self {
        Grid { radius, angles: vec![0.0], n_radii }
    }

    pub fn radii(&self) -> Vec<f64> {
        (1..=self.n_radii).map(|s| self.radius * s as f64 / self.n_radii as f64).collect()
    }

    pub fn lambda(&self, ray: usize, s: usize) -> Scalar {
        Scalar::from_polar(self.radius * (s + 1) as f64 / self.n_radii as f64, self.angles[ray])
    }

    fn scaled(&self, f: f64) -> Self {
        Grid { radius: self.radius * f, ..self.clone() }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::disk(0.2, 16, 12)
    }
}

/// A holomorphic motion of a finite set, sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Motion {
    pub base: Vec<Scalar>,
    pub grid: Grid,
    /// `samples[ray][s][x] = h_lambda(x)`.
    pub samples: Vec<Vec<Vec<Scalar>>>,
    /// `d h_lambda(x) / d lambda` at `lambda = 0`.
    pub jet1: Vec<Scalar>,
    /// Velocity of an affine motion `x + lambda v(x)`, which is then evaluated exactly.
    pub velocity: Option<Vec<Scalar>>,
}

impl Motion {
    /// Value at `lambda = t e^{i angle(ray)}`, exact for affine motions and linearly
    /// interpolated between samples otherwise.
    fn along_ray(&self, ray: usize, t: f64) -> Vec<Scalar> {
        if let Some(v) = &self.velocity {
            let lam = Scalar::from_polar(t, self.grid.angles[ray]);
            return self.base.iter().zip(v).map(|(x, v)| x + lam * v).collect();
        }
        let step = self.grid.radius / self.grid.n_radii as f64;
        let u = (t / step).clamp(0.0, self.grid.n_radii as f64);
        let s = (u.floor() as usize).min(self.grid.n_radii - 1);
        let frac = u - s as f64;
        let lo = if s == 0 { &self.base } else { &self.samples[ray][s - 1] };
        let hi = &self.samples[ray][s];
        lo.iter().zip(hi).map(|(a, b)| a + (b - a) * frac).collect()
    }

    /// Sup-norm and deviation from the base set over all samples.
    pub fn norms(&self) -> (f64, f64) {
        let mut m: f64 = self.base.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let mut d: f64 = 0.0;
        for ray in &self.samples {
            for row in ray {
                for (h, x) in row.iter().zip(&self.base) {
                    m = m.max(h.norm());
                    d = d.max((h - x).norm());
                }
            }
        }
        (m, d)
    }

    /// Rows `(ray, radius, point_label, re, im)` of the sampled motion.
    pub fn csv_rows(&self) -> Vec<(usize, f64, usize, f64, f64)> {
        let radii = self.grid.radii();
        let mut out = Vec::new();
        for (r, ray) in self.samples.iter().enumerate() {
            for (s, row) in ray.iter().enumerate() {
                for (x, h) in row.iter().enumerate() {
                    out.push((r, radii[s], x, h.re, h.im));
                }
            }
        }
        out
    }
}

/// The affine motion `h_lambda(x) = x + lambda v(x)` sampled on `grid`.
pub fn make_motion(base: &[Scalar], velocity: &[Scalar], grid: Grid) -> Result<Motion> {
    if base.len() != velocity.len() {
        return Err(Error::InvalidSpec("base set and velocity differ in length".into()));
    }
    for x in 0..base.len() {
        for y in x + 1..base.len() {
            let dv = velocity[x] - velocity[y];
            if dv == re(0.0) {
                continue;
            }
            let lambda = -(base[x] - base[y]) / dv;
            if lambda.norm() < grid.radius {
                return Err(Error::InjectivityViolation { x, y, lambda: format!("{lambda}") });
            }
        }
    }
    let samples = (0..grid.angles.len())
        .map(|r| {
            (0..grid.n_radii)
                .map(|s| {
                    let lam = grid.lambda(r, s);
                    base.iter().zip(velocity).map(|(x, v)| x + lam * v).collect()
                })
                .collect()
        })
        .collect();
    Ok(Motion { base: base.to_vec(), grid, samples, jet1: velocity.to_vec(), velocity: Some(velocity.to_vec()) })
}

#[derive(Debug, Clone, Copy)]
enum Row {
    Marked(usize),
    /// Solve `G_w(y) = h(target)`.
    Solve(usize),
}

/// How each element of `g(P)` is lifted, and where the critical values sit.
#[derive(Debug, Clone)]
struct LiftPlan {
    rows: Vec<Row>,
    /// Index in `g(P)` of `c_{1,k}`.
    w_index: Vec<usize>,
    spacing: f64,
}

impl LiftPlan {
    fn new(orbit: &MarkedOrbit) -> Result<Self> {
        let n = orbit.gp.len();
        let missing = |i: usize, j: usize| Error::InvalidSpec(format!("label ({i},{j}) missing from g(P)"));
        let mut rows = Vec::with_capacity(n);
        for x in 0..n {
            if let Some(j) = orbit.marked_at(x) {
                rows.push(Row::Marked(j));
            } else {
                let (i, j) = orbit.label_of(x).ok_or_else(|| missing(0, x))?;
                rows.push(Row::Solve(orbit.index_of(i + 1, j).ok_or_else(|| missing(i + 1, j))?));
            }
        }
        let w_index =
            (0..orbit.nu()).map(|k| orbit.index_of(1, k).ok_or_else(|| missing(1, k))).collect::<Result<_>>()?;
        let mut spacing = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                spacing = spacing.min((orbit.gp[a] - orbit.gp[b]).norm());
            }
        }
        if !spacing.is_finite() {
            spacing = orbit.gp.iter().map(|x| x.norm()).fold(1.0, f64::max);
        }
        Ok(LiftPlan { rows, w_index, spacing })
    }

    /// One lift: `G_{w}(hat h(x)) = h(g(x))`, `hat h(c_{0,j}) = p_j(w)`, Newton from `seed`.
    fn lift<D: Deformation + ?Sized>(
        &self,
        def: &D,
        h: &[Scalar],
        seed: &[Scalar],
    ) -> std::result::Result<Vec<Scalar>, String> {
        let w: Vec<Scalar> = self.w_index.iter().map(|&i| h[i]).collect();
        let marked = def.marked_points(&w);
        let mut out = Vec::with_capacity(self.rows.len());
        for (x, row) in self.rows.iter().enumerate() {
            out.push(match *row {
                Row::Marked(j) => marked[j],
                Row::Solve(t) => newton(def, &w, h[t], seed[x])?,
            });
        }
        Ok(out)
    }
}

fn newton<D: Deformation + ?Sized>(
    def: &D,
    w: &[Scalar],
    target: Scalar,
    y0: Scalar,
) -> std::result::Result<Scalar, String> {
    let mut y = y0;
    for _ in 0..NEWTON_ITERS {
        let f = def.eval(w, y).map_err(|e| e.to_string())? - target;
        let d = def.deriv_z(w, y).map_err(|e| e.to_string())?;
        if d.norm() == 0.0 || !d.norm().is_finite() {
            return Err(format!("vanishing derivative at {y}"));
        }
        let step = f / d;
        y -= step;
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err("Newton iterate not finite".into());
        }
        if step.norm() <= 4.0 * f64::EPSILON * y.norm().max(1.0) {
            return Ok(y);
        }
    }
    Err(format!("Newton did not converge from {y0}"))
}

/// Reason and iterate at which a lift could not be continued.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakdown {
    pub k: usize,
    pub reason: String,
}

/// `levels[k][s][x] = h^(k)` at the `s`-th sample of one ray.
struct RayTower {
    levels: Vec<Vec<Vec<Scalar>>>,
    breakdown: Option<Breakdown>,
}

fn march_ray<D: Deformation + ?Sized>(
    def: &D,
    plan: &LiftPlan,
    seed: &Motion,
    ray: usize,
    substeps: usize,
    k_max: usize,
) -> RayTower {
    let base = &seed.base;
    let radii = seed.grid.radii();
    let h0 = seed.grid.radius / (seed.grid.n_radii * substeps.max(1)) as f64;
    let mut height = k_max;
    let mut tower: Vec<Vec<Scalar>> = vec![base.clone(); k_max + 1];
    let mut levels: Vec<Vec<Vec<Scalar>>> = vec![Vec::with_capacity(radii.len()); k_max + 1];
    let mut breakdown: Option<Breakdown> = None;
    let mut t = 0.0;
    let mut dt = h0;
    let mut halvings = 0;
    for &target in &radii {
        while t < target * (1.0 - 1e-14) {
            let step = dt.min(target - t);
            let next_t = if target - t <= dt { target } else { t + step };
            let mut next = Vec::with_capacity(height + 1);
            next.push(seed.along_ray(ray, next_t));
            let mut fail: Option<(usize, String)> = None;
            for k in 1..=height {
                match plan.lift(def, &next[k - 1], &tower[k]) {
                    Ok(v) => {
                        let jump = v.iter().zip(&tower[k]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                        if jump >= 0.5 * plan.spacing {
                            fail = Some((k, format!("step jump {jump:.3e} exceeds half the spacing of g(P)")));
                            break;
                        }
                        next.push(v);
                    }
                    Err(reason) => {
                        fail = Some((k, reason));
                        break;
                    }
                }
            }
            match fail {
                Some((k, reason)) => {
                    if halvings < MAX_HALVINGS {
                        halvings += 1;
                        dt *= 0.5;
                        continue;
                    }
                    // the tower above k - 1 cannot be continued past this lambda
                    if breakdown.as_ref().map_or(true, |b| k < b.k) {
                        breakdown = Some(Breakdown { k, reason });
                    }
                    height = k - 1;
                    levels.truncate(height + 1);
                    tower.truncate(height + 1);
                    halvings = 0;
                    dt = h0;
                }
                None => {
                    t = next_t;
                    tower = next;
                    if halvings > 0 {
                        halvings -= 1;
                        dt *= 2.0;
                    }
                }
            }
        }
        for (k, lv) in levels.iter_mut().enumerate() {
            lv.push(tower[k].clone());
        }
    }
    RayTower { levels, breakdown }
}

/// All iterates `h^(0..=height)` of a lifting sequence over one grid.
#[derive(Debug, Clone)]
pub struct Tower {
    pub base: Vec<Scalar>,
    pub grid: Grid,
    /// `motions[k]`, `k = 0..=height`.
    pub motions: Vec<Motion>,
    pub breakdown: Option<Breakdown>,
}

/// Lift `seed` repeatedly, `k_max` times or until a branch is lost.
pub fn lift_tower<D: Deformation + ?Sized>(
    def: &D,
    orbit: &MarkedOrbit,
    seed: &Motion,
    k_max: usize,
    substeps: usize,
    exec: Exec,
) -> Result<Tower> {
    let plan = LiftPlan::new(orbit)?;
    if seed.base.len() != orbit.gp.len() {
        return Err(Error::InvalidSpec("motion is not over g(P)".into()));
    }
    let rays = exec.map_range(seed.grid.angles.len(), |r| march_ray(def, &plan, seed, r, substeps, k_max));
    let height = rays.iter().map(|r| r.levels.len() - 1).min().unwrap_or(k_max);
    let breakdown = rays.iter().filter_map(|r| r.breakdown.clone()).min_by_key(|b| b.k);
    let a = assemble_a(orbit)?.entries;
    let mut jet = seed.jet1.clone();
    let mut motions = Vec::with_capacity(height + 1);
    for k in 0..=height {
        let samples = rays.iter().map(|r| r.levels[k].clone()).collect();
        motions.push(Motion {
            base: seed.base.clone(),
            grid: seed.grid.clone(),
            samples,
            jet1: jet.clone(),
            velocity: if k == 0 { seed.velocity.clone() } else { None },
        });
        jet = apply(&a, &jet);
    }
    Ok(Tower { base: seed.base.clone(), grid: seed.grid.clone(), motions, breakdown })
}

fn apply(a: &CMat, v: &[Scalar]) -> Vec<Scalar> {
    (0..a.nrows()).map(|r| (0..a.ncols()).map(|c| a[(r, c)] * v[c]).sum()).collect()
}

/// One lift of `motion`; on branch loss the radius is halved, up to 8 times, for affine motions.
pub fn lift_motion<D: Deformation + ?Sized>(
    def: &D,
    orbit: &MarkedOrbit,
    motion: &Motion,
    steps_per_ray: usize,
) -> Result<Motion> {
    let mut current = motion.clone();
    for attempt in 0..=MAX_HALVINGS {
        let tower = lift_tower(def, orbit, &current, 1, steps_per_ray, Exec::default())?;
        match tower.breakdown {
            None => return Ok(tower.motions[1].clone()),
            Some(b) => {
                let Some(v) = &current.velocity else {
                    return Err(Error::BranchLoss { k: b.k, reason: b.reason });
                };
                if attempt == MAX_HALVINGS {
                    return Err(Error::BranchLoss { k: b.k, reason: b.reason });
                }
                current = make_motion(&current.base, v, current.grid.scaled(0.5))?;
            }
        }
    }
    unreachable!()
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftDiagnostics {
    pub radius: f64,
    /// `M_k = max |h^(k)_lambda(x)|` over the samples.
    pub sup_norms: Vec<f64>,
    /// `d_k = max |h^(k)_lambda(x) - x|`.
    pub deviations: Vec<f64>,
    /// `d_{k+1} / d_k`.
    pub ratios: Vec<Option<f64>>,
    /// Geometric rate fitted to the `d_k` above `1e-10 d_0`.
    pub rate: Option<f64>,
    pub bounded: bool,
    pub breakdown: Option<Breakdown>,
}

/// Slack allowed in the boundedness test `M_k <= M_0 + slack`.
pub const BOUND_SLACK: f64 = 0.5;

pub fn diagnostics(tower: &Tower) -> LiftDiagnostics {
    let (sup_norms, deviations): (Vec<f64>, Vec<f64>) = tower.motions.iter().map(|m| m.norms()).unzip();
    let ratios = deviations.windows(2).map(|w| if w[0] > 0.0 { Some(w[1] / w[0]) } else { None }).collect();
    let m0 = sup_norms[0];
    let bounded = sup_norms.iter().all(|&m| m <= m0 + BOUND_SLACK);
    LiftDiagnostics {
        radius: tower.grid.radius,
        rate: fit_rate(&deviations),
        sup_norms,
        deviations,
        ratios,
        bounded,
        breakdown: tower.breakdown.clone(),
    }
}

fn fit_rate(d: &[f64]) -> Option<f64> {
    let d0 = *d.first()?;
    let pts: Vec<(f64, f64)> = d
        .iter()
        .enumerate()
        .skip(1)
        .take_while(|(_, &x)| x > 1e-10 * d0)
        .map(|(k, &x)| (k as f64, x.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}

/// Iterate lifts of `seed` up to `k_max` times (at most 200) and summarize.
///
/// A branch loss after at least one successful lift is reported in `breakdown`;
/// failure of the very first lift is an error.
pub fn iterate_lifts<D: Deformation + ?Sized>(
    def: &D,
    orbit: &MarkedOrbit,
    seed: &Motion,
    k_max: usize,
) -> Result<LiftDiagnostics> {
    iterate_lifts_with(def, orbit, seed, k_max, Exec::default())
}

pub fn iterate_lifts_with<D: Deformation + ?Sized>(
    def: &D,
    orbit: &MarkedOrbit,
    seed: &Motion,
    k_max: usize,
    exec: Exec,
) -> Result<LiftDiagnostics> {
    if k_max > 200 {
        return Err(Error::InvalidSpec("k_max must be at most 200".into()));
    }
    let tower = lift_tower(def, orbit, seed, k_max, 4, exec)?;
    if tower.motions.len() == 1 && k_max > 0 {
        let b = tower.breakdown.clone().unwrap_or(Breakdown { k: 1, reason: "lift failed".into() });
        return Err(Error::BranchLoss { k: b.k, reason: b.reason });
    }
    Ok(diagnostics(&tower))
}

/// `sum_{n=0}^{q-1} 1 / Dg^n(c_1)` for the critical point `j`; for a one-parameter additive
/// family with a periodic critical point this equals `Q`.
pub fn critical_value_sum(orbit: &MarkedOrbit, j: usize) -> Scalar {
    let mut chain = re(1.0);
    let mut sum = re(0.0);
    for n in 0..orbit.q(j) {
        sum += chain.inv();
        chain *= orbit.deriv[j][n + 1];
    }
    sum
}

/// `Phi(Z)` and its finite-difference derivative at `Z`.
#[derive(Debug, Clone)]
pub struct PhiResult {
    pub value: Vec<Scalar>,
    pub derivative: CMat,
}

pub fn phi_and_derivative<D: Deformation + ?Sized>(def: &D, orbit: &MarkedOrbit, z: &[Scalar]) -> Result<PhiResult> {
    let plan = LiftPlan::new(orbit)?;
    let phi = |zz: &[Scalar]| -> Result<Vec<Scalar>> {
        plan.lift(def, zz, &orbit.gp).map_err(|reason| Error::BranchLoss { k: 1, reason })
    };
    let value = phi(z)?;
    let n = z.len();
    let h = 1e-6;
    let mut derivative = CMat::zeros(n, n);
    for c in 0..n {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[c] += re(h);
        zm[c] -= re(h);
        let (fp, fm) = (phi(&zp)?, phi(&zm)?);
        for r in 0..n {
            derivative[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(PhiResult { value, derivative })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorReport {
    pub theta: f64,
    /// Per base point: every sample stays in `S_{4 theta / ell}` (or its negative).
    pub a1_ok: Vec<bool>,
    /// Per ordered pair `(a, b)` with `|a| > |b| > 0`, `ab > 0`: ratios stay in `D_theta`.
    pub a2_ok: Vec<((usize, usize), bool)>,
    /// Largest deviation angle: `|arg(+-h(a))|` over (A1) and `pi - angle 0z1` over (A2).
    pub worst_angle: f64,
}

impl SectorReport {
    pub fn regular(&self) -> bool {
        self.a1_ok.iter().all(|&b| b) && self.a2_ok.iter().all(|(_, b)| *b)
    }
}

/// Check the sector conditions (A1) and (A2) on every sample of a motion of a real set.
pub fn theta_regularity(motion: &Motion, ell: f64, theta: f64) -> Result<SectorReport> {
    if motion.base.iter().any(|x| x.im != 0.0) {
        return Err(Error::DegeneratePoint("base set must be real".into()));
    }
    let base: Vec<f64> = motion.base.iter().map(|x| x.re).collect();
    let sector = 4.0 * theta / ell;
    let mut worst: f64 = 0.0;
    let mut a1_ok = vec![true; base.len()];
    let pairs: Vec<(usize, usize)> = (0..base.len())
        .flat_map(|a| (0..base.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| base[a].abs() > base[b].abs() && base[b] != 0.0 && base[a] * base[b] > 0.0)
        .collect();
    let mut a2_ok = vec![true; pairs.len()];
    for row in motion.samples.iter().flatten() {
        for (x, &a) in base.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let dev = (row[x] * a.signum()).arg().abs();
            worst = worst.max(dev);
            if !(dev < sector) {
                a1_ok[x] = false;
            }
        }
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let z = row[b] / row[a];
            let g = geometry(z, theta)?;
            worst = worst.max(PI - g.angle);
            if !g.in_dtheta {
                a2_ok[p] = false;
            }
        }
    }
    Ok(SectorReport { theta, a1_ok, a2_ok: pairs.into_iter().zip(a2_ok).collect(), worst_angle: worst })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderInvariance {
    /// Least-squares slope of `log |hat h - h|` against `log |lambda|`.
    pub slope: f64,
    /// `|A v - v| / |v|`.
    pub eigen_residual: f64,
    pub is_unit_eigenvector: bool,
}

/// Lift `x + lambda v(x)` once at each `lambda` and measure the order of `hat h - h`.
///
/// Vectors that are not eigenvectors for the eigenvalue 1 are still processed;
/// the flag in the result records the precondition.
pub fn order_invariance_check<D: Deformation + ?Sized>(
    def: &D,
    orbit: &MarkedOrbit,
    v: &[Scalar],
    lambdas: &[Scalar],
) -> Result<OrderInvariance> {
    let vnorm = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if vnorm == 0.0 {
        return Err(Error::Degenerate("zero velocity".into()));
    }
    if lambdas.len() < 2 {
        return Err(Error::Degenerate("need at least two lambda values".into()));
    }
    let a = assemble_a(orbit)?.entries;
    let av = apply(&a, v);
    let eigen_residual = av.iter().zip(v).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / vnorm;
    let plan = LiftPlan::new(orbit)?;
    let mut pts = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let grid = Grid { radius: lam.norm(), angles: vec![lam.arg()], n_radii: 1 };
        let motion = make_motion(&orbit.gp, v, grid)?;
        let ray = march_ray(def, &plan, &motion, 0, 32, 1);
        if let Some(b) = ray.breakdown {
            return Err(Error::BranchLoss { k: b.k, reason: b.reason });
        }
        let h = motion.along_ray(0, lam.norm());
        let lifted = &ray.levels[1][0];
        let diff = lifted.iter().zip(&h).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if diff == 0.0 {
            return Err(Error::Degenerate("lift coincides with the motion".into()));
        }
        pts.push((lam.norm().ln(), diff.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(OrderInvariance { slope: sxy / sxx, eigen_residual, is_unit_eigenvector: eigen_residual <= 1e-8 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchwarzReport {
    pub theta: f64,
    pub samples: usize,
    /// Samples with `z^t` outside `D_theta`.
    pub violations: usize,
    /// Samples with `angle 01z < delta theta` and the refined bound `angle 01z^t < eps theta` checked.
    pub refined_checked: usize,
    pub refined_violations: usize,
}

/// Sample `z` in `D_theta` (log-polar in `0.01 < |z| < 100`) and `t` in `(0, 1)` and count
/// `z^t` leaving `D_theta`.
pub fn schwarz_sampling(theta: f64, n_samples: usize, seed: u64) -> Result<SchwarzReport> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::InvalidSpec(format!("theta = {theta} outside (0, pi)")));
    }
    let (eps, delta) = (0.5, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arg_max = PI - 1e-6;
    let mut report = SchwarzReport { theta, samples: 0, violations: 0, refined_checked: 0, refined_violations: 0 };
    while report.samples < n_samples {
        let r = rng.gen_range(0.01f64.ln()..100f64.ln()).exp();
        let z = Scalar::from_polar(r, rng.gen_range(-arg_max..arg_max));
        if z == re(1.0) || vertex_angle(z, re(0.0), re(1.0)) <= PI - theta {
            continue;
        }
        let t: f64 = rng.gen_range(0.0..1.0);
        if t == 0.0 {
            continue;
        }
        report.samples += 1;
        let zt = z.powf(t);
        if zt != re(1.0) && vertex_angle(zt, re(0.0), re(1.0)) <= PI - theta - 1e-12 {
            report.violations += 1;
        }
        if theta <= PI / 2.0 && vertex_angle(re(1.0), re(0.0), z) < delta * theta {
            report.refined_checked += 1;
            if vertex_angle(re(1.0), re(0.0), zt) >= eps * theta {
                report.refined_violations += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilySpec;
    use crate::orbit::{critical_orbit, OrbitOptions};

    const QUAD: FamilySpec = FamilySpec::MonicAdditive { d: 2 };

    fn basilica() -> MarkedOrbit {
        critical_orbit(&QUAD, &[re(-1.0)], OrbitOptions::default()).unwrap()
    }

    fn velocity(o: &MarkedOrbit, f: impl Fn(f64) -> f64) -> Vec<Scalar> {
        o.gp.iter().map(|x| re(f(x.re))).collect()
    }

    #[test]
    fn geometry_examples() {
        let g = geometry(re(0.5), 0.1).unwrap();
        assert!((g.angle - PI).abs() < 1e-15 && g.in_dtheta);
        let g = geometry(re(2.0), 3.0).unwrap();
        assert_eq!(g.angle, 0.0);
        assert!(!g.in_dtheta);
        let g = geometry(Scalar::i(), 3.0 * PI / 4.0 + 1e-9).unwrap();
        assert!((g.angle - PI / 4.0).abs() < 1e-15 && g.in_dtheta);
        assert!(!geometry(Scalar::i(), 3.0 * PI / 4.0 - 1e-9).unwrap().in_dtheta);
        assert!(matches!(geometry(re(1.0), 1.0), Err(Error::DegeneratePoint(_))));
    }

    #[test]
    fn motions() {
        let o = basilica();
        let zero = make_motion(&o.gp, &[re(0.0), re(0.0)], Grid::default()).unwrap();
        assert!(zero.samples.iter().flatten().all(|row| row == &o.gp));
        let v = velocity(&o, |x| if x < -0.5 { 1.0 } else { 0.0 });
        assert!(make_motion(&o.gp, &v, Grid::disk(0.3, 16, 12)).is_ok());
        let err = make_motion(&o.gp, &velocity(&o, |x| if x < -0.5 { 10.0 } else { 0.0 }), Grid::default());
        assert!(matches!(err, Err(Error::InjectivityViolation { .. })));
    }

    #[test]
    fn basilica_lift_closed_form() {
        let o = basilica();
        let v = velocity(&o, |x| if x < -0.5 { 1.0 } else { 0.0 });
        let m = make_motion(&o.gp, &v, Grid::disk(0.3, 16, 12)).unwrap();
        let lifted = lift_motion(&QUAD, &o, &m, 4).unwrap();
        let x = o.gp.iter().position(|z| z.re < -0.5).unwrap();
        for r in 0..16 {
            for s in 0..12 {
                let lam = m.grid.lambda(r, s);
                let want = -(re(1.0) - lam).sqrt();
                assert!((lifted.samples[r][s][x] - want).norm() < 1e-12);
                assert_eq!(lifted.samples[r][s][1 - x], re(0.0));
            }
        }
        assert!((lifted.jet1[x] - re(0.5)).norm() < 1e-15);
    }

    #[test]
    fn constant_seed_is_fixed() {
        let o = basilica();
        let m = make_motion(&o.gp, &[re(0.0), re(0.0)], Grid::disk(0.2, 4, 3)).unwrap();
        let d = iterate_lifts(&QUAD, &o, &m, 10).unwrap();
        assert!(d.deviations.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn basilica_rate() {
        let o = basilica();
        let v = velocity(&o, |x| if x < -0.5 { 1.0 } else { 0.0 });
        let m = make_motion(&o.gp, &v, Grid::default()).unwrap();
        let d = iterate_lifts(&QUAD, &o, &m, 40).unwrap();
        assert!(d.bounded && d.breakdown.is_none());
        assert!((d.rate.unwrap() - 0.5).abs() < 0.1, "{:?}", d.rate);
    }

    #[test]
    fn phi_derivative_is_transfer_operator() {
        let o = basilica();
        let p = phi_and_derivative(&QUAD, &o, &o.gp).unwrap();
        assert!(p.value.iter().zip(&o.gp).all(|(a, b)| (a - b).norm() < 1e-14));
        let a = assemble_a(&o).unwrap().entries;
        assert!(crate::linalg::max_abs(&(p.derivative - a)) < 1e-5);
    }

    #[test]
    fn positive_motion_is_regular() {
        let base = vec![re(0.25), re(0.5), re(1.0)];
        let m = make_motion(&base, &[re(0.0); 3], Grid::disk(0.1, 4, 2)).unwrap();
        for theta in [0.01, 0.5, 3.0] {
            let r = theta_regularity(&m, 2.0, theta).unwrap();
            assert!(r.regular());
            assert!(r.worst_angle.abs() < 1e-15);
        }
        let pushed = make_motion(&base, &[re(0.0), re(0.0), Scalar::i() * 2.0], Grid::disk(0.1, 4, 2)).unwrap();
        let r = theta_regularity(&pushed, 8.0, 0.1).unwrap();
        assert!(!r.a1_ok[2] && r.a1_ok[0]);
    }

    #[test]
    fn schwarz_small_run() {
        let r = schwarz_sampling(PI / 4.0, 2000, 0).unwrap();
        assert_eq!(r.samples, 2000);
        assert_eq!(r.violations, 0);
        let z = re(0.5).powf(0.5);
        assert!(geometry(z, 0.1).unwrap().in_dtheta);
    }

    #[test]
    fn order_invariance_negative_control() {
        let o = basilica();
        let a = assemble_a(&o).unwrap().entries;
        let v: Vec<Scalar> = crate::linalg::eigenvector(&a, re(0.5)).iter().copied().collect();
        let lams: Vec<Scalar> = [1e-2, 5e-3, 2e-3, 1e-3].iter().map(|&x| re(x)).collect();
        let r = order_invariance_check(&QUAD, &o, &v, &lams).unwrap();
        assert!(!r.is_unit_eigenvector);
        assert!((r.slope - 1.0).abs() < 0.05, "{r:?}");
        assert!(matches!(order_invariance_check(&QUAD, &o, &[re(0.0); 2], &lams), Err(Error::Degenerate(_))));
    }
}
