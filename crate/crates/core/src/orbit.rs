//! Critical orbits, critical relations and superstable parameters.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::family::{Deformation, FamilySpec};
use crate::{re, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelationKind {
    /// `g^q(c_{0,j}) = c_{0,mu}`, 0-based `mu`.
    PeriodicToCritical { q: usize, mu: usize },
    /// `g^q(c_{0,j}) = g^l(c_{0,j})` with `1 <= l < q`.
    Preperiodic { l: usize, q: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CriticalRelation {
    pub j: usize,
    #[serde(flatten)]
    pub kind: RelationKind,
}

impl CriticalRelation {
    pub fn q(&self) -> usize {
        match self.kind {
            RelationKind::PeriodicToCritical { q, .. } | RelationKind::Preperiodic { q, .. } => q,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, RelationKind::PeriodicToCritical { .. })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    pub max_iter: usize,
    /// Relative closure tolerance (times the orbit scale).
    pub orbit_tol: f64,
    pub deriv_floor: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions { max_iter: 64, orbit_tol: 1e-10, deriv_floor: 1e-9 }
    }
}

/// Finite forward-invariant set of a critically finite map with labels `c_{i,j}`.
#[derive(Debug, Clone, Serialize)]
pub struct MarkedOrbit {
    /// Critical values `c_1` (deformation coordinates).
    pub w: Vec<Scalar>,
    /// `points[j][i] = c_{i,j}` for `0 <= i <= q_j`.
    pub points: Vec<Vec<Scalar>>,
    /// `deriv[j][i] = Dg(c_{i,j})`.
    pub deriv: Vec<Vec<Scalar>>,
    /// `param_deriv[j][i][k] = L_k(c_{i,j})`.
    pub param_deriv: Vec<Vec<Vec<Scalar>>>,
    /// Marked points `p_j(w)` and their Jacobian `p_{j,k}`.
    pub marked: Vec<Scalar>,
    pub marked_jacobian: Vec<Vec<Scalar>>,
    /// One relation per critical point, in critical order.
    pub relations: Vec<CriticalRelation>,
    /// Deduplicated `g(P)`.
    pub gp: Vec<Scalar>,
    /// `label_index[j][i]`: element of `gp` carrying label `(i, j)`, if any.
    pub label_index: Vec<Vec<Option<usize>>>,
    pub scale: f64,
    pub tol: f64,
}

impl MarkedOrbit {
    pub fn nu(&self) -> usize {
        self.points.len()
    }

    pub fn q(&self, j: usize) -> usize {
        self.relations[j].q()
    }

    /// Resolve label `(i, j)` with `i = q_j` to the label it closes onto.
    pub fn resolve(&self, i: usize, j: usize) -> (usize, usize) {
        let rel = self.relations[j];
        if i == rel.q() {
            match rel.kind {
                RelationKind::PeriodicToCritical { mu, .. } => (0, mu),
                RelationKind::Preperiodic { l, .. } => (l, j),
            }
        } else {
            (i, j)
        }
    }

    /// Index in `gp` of label `(i, j)` after resolution.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = self.resolve(i, j);
        self.label_index[j][i]
    }

    /// `P_0` membership of a `gp` element: the critical index it coincides with.
    pub fn marked_at(&self, x: usize) -> Option<usize> {
        (0..self.nu()).find(|&j| self.label_index[j][0] == Some(x))
    }

    /// A label `(i, j)` with `1 <= i < q_j` realizing a non-marked `gp` element.
    pub fn label_of(&self, x: usize) -> Option<(usize, usize)> {
        for j in 0..self.nu() {
            for i in 1..self.q(j) {
                if self.label_index[j][i] == Some(x) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// `Dg^n(c_{m,j}) = prod_{i=m}^{m+n-1} Dg(c_{i,j})`.
    pub fn deriv_chain(&self, j: usize, m: usize, n: usize) -> Scalar {
        (m..m + n).map(|i| self.deriv[j][i]).product()
    }

    /// Preperiodic multipliers `Dg^{q-l}(c_{l,j})` with their exponents.
    pub fn multipliers(&self) -> Vec<(usize, Scalar, usize)> {
        self.relations
            .iter()
            .filter_map(|r| match r.kind {
                RelationKind::Preperiodic { l, q } => Some((r.j, self.deriv_chain(r.j, l, q - l), q - l)),
                _ => None,
            })
            .collect()
    }

    /// Critical indices whose preperiodic cycle is within 1e-6 of parabolic.
    pub fn near_parabolic(&self) -> Vec<usize> {
        self.multipliers()
            .into_iter()
            .filter(|(_, m, _)| (m - re(1.0)).norm() < 1e-6)
            .map(|(j, _, _)| j)
            .collect()
    }
}

/// Orbit of every critical point until it closes, with derivatives and `g(P)`.
pub fn critical_orbit<D: Deformation + ?Sized>(
    def: &D,
    w: &[Scalar],
    opts: OrbitOptions,
) -> Result<MarkedOrbit> {
    let nu = def.dim();
    let marked = def.marked_points(w);
    let marked_jacobian = def.marked_jacobian(w);
    let wscale = w.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let mut points = Vec::with_capacity(nu);
    let mut relations = Vec::with_capacity(nu);
    let mut scale: f64 = marked.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let mut tol_max: f64 = 0.0;
    for j in 0..nu {
        let mut pts = vec![marked[j]];
        // sensitivity of c_{i,j} to the parameters, for the rounding-aware tolerance
        let mut sens = vec![re(0.0); nu];
        let mut closed = None;
        for i in 1..=opts.max_iter {
            let x = pts[i - 1];
            let y = def.eval(w, x)?;
            let dz = def.deriv_z(w, x)?;
            for (k, s) in sens.iter_mut().enumerate() {
                *s = dz * *s + def.deriv_w(w, x, k)?;
            }
            if !(y.norm().is_finite()) || y.norm() > 1e12 * scale {
                break;
            }
            pts.push(y);
            scale = scale.max(y.norm());
            let sn = sens.iter().map(|s| s.norm()).fold(0.0, f64::max);
            // rounding term capped: past that level the orbit is not tracked meaningfully
            let tol = opts.orbit_tol * scale + (16.0 * f64::EPSILON * sn * wscale).min(1e-7 * scale);
            let mut hits = Vec::new();
            for (m, p) in marked.iter().enumerate() {
                if (y - p).norm() < tol {
                    hits.push(RelationKind::PeriodicToCritical { q: i, mu: m });
                }
            }
            for l in 1..i {
                if (y - pts[l]).norm() < tol {
                    hits.push(RelationKind::Preperiodic { l, q: i });
                }
            }
            if hits.len() > 1 {
                return Err(Error::AmbiguousRelation { i, j });
            }
            if let Some(kind) = hits.pop() {
                tol_max = tol_max.max(tol);
                closed = Some(kind);
                break;
            }
        }
        let kind = closed.ok_or(Error::NotFinite { j, max_iter: opts.max_iter })?;
        points.push(pts);
        relations.push(CriticalRelation { j, kind });
    }

    let mut deriv = Vec::with_capacity(nu);
    let mut param_deriv = Vec::with_capacity(nu);
    for (j, pts) in points.iter().enumerate() {
        let mut dj = Vec::with_capacity(pts.len());
        let mut lj = Vec::with_capacity(pts.len());
        for (i, &x) in pts.iter().enumerate() {
            let d = def.deriv_z(w, x)?;
            if i >= 1 && i < pts.len() - 1 && d.norm() < opts.deriv_floor {
                return Err(Error::DegenerateDerivative { i, j, modulus: d.norm() });
            }
            dj.push(d);
            lj.push((0..nu).map(|k| def.deriv_w(w, x, k)).collect::<Result<Vec<_>>>()?);
        }
        deriv.push(dj);
        param_deriv.push(lj);
    }

    let dedup = 10.0 * opts.orbit_tol * scale + 10.0 * tol_max;
    let mut gp: Vec<Scalar> = Vec::new();
    let mut label_index: Vec<Vec<Option<usize>>> =
        points.iter().map(|p| vec![None; p.len()]).collect();
    let insert = |gp: &mut Vec<Scalar>, x: Scalar| -> usize {
        match gp.iter().position(|y| (y - x).norm() < dedup) {
            Some(k) => k,
            None => {
                gp.push(x);
                gp.len() - 1
            }
        }
    };
    for j in 0..nu {
        let q = relations[j].q();
        for i in 1..q {
            label_index[j][i] = Some(insert(&mut gp, points[j][i]));
        }
        if let RelationKind::PeriodicToCritical { mu, .. } = relations[j].kind {
            let k = insert(&mut gp, marked[mu]);
            label_index[mu][0] = Some(k);
        }
    }
    // marked points that coincide with an already listed element
    for j in 0..nu {
        if label_index[j][0].is_none() {
            label_index[j][0] = gp.iter().position(|y| (y - marked[j]).norm() < dedup);
        }
    }
    for j in 0..nu {
        let q = relations[j].q();
        label_index[j][q] = match relations[j].kind {
            RelationKind::PeriodicToCritical { mu, .. } => label_index[mu][0],
            RelationKind::Preperiodic { l, .. } => label_index[j][l],
        };
    }

    Ok(MarkedOrbit {
        w: w.to_vec(),
        points,
        deriv,
        param_deriv,
        marked,
        marked_jacobian,
        relations,
        gp,
        label_index,
        scale,
        tol: opts.orbit_tol * scale,
    })
}

/// Relations of a computed orbit, re-derived from its points and sorted periodic-first.
pub fn detect_relations(orbit: &MarkedOrbit, orbit_tol: f64) -> Result<Vec<CriticalRelation>> {
    let mut out = Vec::with_capacity(orbit.nu());
    for (j, pts) in orbit.points.iter().enumerate() {
        let i = pts.len() - 1;
        let y = pts[i];
        let tol = (orbit_tol * orbit.scale).max(orbit.tol_for(j));
        let mut hits = Vec::new();
        for (m, p) in orbit.marked.iter().enumerate() {
            if (y - p).norm() < tol {
                hits.push(RelationKind::PeriodicToCritical { q: i, mu: m });
            }
        }
        for l in 1..i {
            if (y - pts[l]).norm() < tol {
                hits.push(RelationKind::Preperiodic { l, q: i });
            }
        }
        match hits.len() {
            0 => return Err(Error::NotFinite { j, max_iter: i }),
            1 => out.push(CriticalRelation { j, kind: hits[0] }),
            _ => return Err(Error::AmbiguousRelation { i, j }),
        }
    }
    out.sort_by_key(|r| (!r.is_periodic(), r.j));
    Ok(out)
}

impl MarkedOrbit {
    fn tol_for(&self, j: usize) -> f64 {
        // closure distance actually realized, with headroom
        let q = self.relations[j].q();
        let (i, jj) = self.resolve(q, j);
        let target = self.points[jj][i];
        let target = if i == 0 { self.marked[jj] } else { target };
        2.0 * (self.points[j][q] - target).norm()
    }
}

/// Real one-parameter family data needed by the superstable solver and kneading.
pub(crate) struct RealFamily<'a> {
    pub spec: &'a FamilySpec,
    pub x0: f64,
}

impl<'a> RealFamily<'a> {
    pub fn new(spec: &'a FamilySpec) -> Result<Self> {
        if spec.nu() != 1 {
            return Err(Error::Unsupported("one-parameter unimodal family required".into()));
        }
        Ok(RealFamily { spec, x0: spec.turning_point()? })
    }

    pub fn step(&self, c: f64, x: f64) -> f64 {
        Deformation::eval(self.spec, &[re(c)], re(x)).map(|v| v.re).unwrap_or(f64::NAN)
    }

    /// `F(c) = f_c^q(x0) - x0` and `dF/dc` by forward accumulation.
    pub fn residual(&self, c: f64, q: usize) -> (f64, f64) {
        let w = [re(c)];
        let mut x = re(self.x0);
        let mut s = re(0.0);
        for _ in 0..q {
            let dz = Deformation::deriv_z(self.spec, &w, x).unwrap_or(re(f64::NAN));
            let dw = Deformation::deriv_w(self.spec, &w, x, 0).unwrap_or(re(f64::NAN));
            x = Deformation::eval(self.spec, &w, x).unwrap_or(re(f64::NAN));
            s = dz * s + dw;
        }
        (x.re - self.x0, s.re)
    }

    /// Smallest `k <= q` with `|f^k(x0) - x0|` within the rounding-aware tolerance.
    pub fn minimal_period(&self, c: f64, q: usize) -> usize {
        for k in 1..=q {
            let (f, df) = self.residual(c, k);
            let tol = 1e-10 * c.abs().max(1.0) + 64.0 * f64::EPSILON * df.abs() * c.abs().max(1.0);
            if f.abs() < tol {
                return k;
            }
        }
        q + 1
    }
}

/// A superstable parameter found by the solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Superstable {
    pub q: usize,
    pub c: f64,
    pub residual: f64,
    pub relation: RelationKind,
}

/// Superstable parameter of period `q` inside a sign-change bracket.
pub fn solve_superstable(spec: &FamilySpec, q: usize, lo: f64, hi: f64) -> Result<Superstable> {
    let fam = RealFamily::new(spec)?;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (fa, _) = fam.residual(a, q);
    let (fb, _) = fam.residual(b, q);
    let c = if fa == 0.0 {
        a
    } else if fb == 0.0 {
        b
    } else {
        if !(fa.signum() * fb.signum() < 0.0) {
            return Err(Error::NoSignChange { lo, hi });
        }
        let sa = fa.signum();
        let mut x = 0.5 * (a + b);
        for _ in 0..400 {
            let (f, df) = fam.residual(x, q);
            if f == 0.0 {
                break;
            }
            if f.signum() == sa {
                a = x;
            } else {
                b = x;
            }
            let newton = x - f / df;
            let next = if newton > a && newton < b && df.is_finite() { newton } else { 0.5 * (a + b) };
            let conv = (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300);
            x = next;
            if conv || b - a <= 2.0 * f64::EPSILON * x.abs().max(1e-300) {
                break;
            }
        }
        x
    };
    let period = fam.minimal_period(c, q);
    if period < q {
        return Err(Error::LowerPeriodCollision { c, period, q });
    }
    if period > q {
        return Err(Error::NoSolution(format!("bracket [{lo}, {hi}] holds no period-{q} root")));
    }
    let (f, _) = fam.residual(c, q);
    Ok(Superstable {
        q,
        c,
        residual: f.abs(),
        relation: RelationKind::PeriodicToCritical { q, mu: 0 },
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Enumeration {
    pub params: Vec<Superstable>,
    pub warnings: Vec<String>,
}

/// All sign-change-isolated superstable parameters of minimal period `<= q_max` in `[lo, hi]`.
pub fn enumerate_superstable(spec: &FamilySpec, lo: f64, hi: f64, q_max: usize) -> Result<Enumeration> {
    enumerate_superstable_with(spec, lo, hi, q_max, Exec::default())
}

pub fn enumerate_superstable_with(
    spec: &FamilySpec,
    lo: f64,
    hi: f64,
    q_max: usize,
    exec: Exec,
) -> Result<Enumeration> {
    let fam = RealFamily::new(spec)?;
    let mut out = Enumeration::default();
    if !(hi > lo) || q_max == 0 {
        return Ok(out);
    }
    for q in 1..=q_max.min(16) {
        let cells = 64usize << q.min(10);
        let h = (hi - lo) / cells as f64;
        let found: Vec<Vec<(f64, f64)>> = exec.map_range(cells, |k| {
            let a = lo + h * k as f64;
            let b = if k + 1 == cells { hi } else { lo + h * (k + 1) as f64 };
            let mut brackets = Vec::new();
            refine(&fam, q, a, fam.residual(a, q), b, fam.residual(b, q), 0, &mut brackets);
            brackets
        });
        let brackets: Vec<(f64, f64)> = found.into_iter().flatten().collect();
        let solved = exec.map(&brackets, |&(a, b)| solve_superstable(spec, q, a, b));
        let mut roots: Vec<Superstable> = Vec::new();
        for (r, (a, b)) in solved.into_iter().zip(&brackets) {
            match r {
                Ok(s) => {
                    if !roots.iter().any(|t| (t.c - s.c).abs() <= 1e-12 * s.c.abs().max(1.0)) {
                        roots.push(s);
                    }
                }
                Err(Error::LowerPeriodCollision { .. }) => {}
                Err(e) => out.warnings.push(format!("q={q} bracket [{a}, {b}]: {e}")),
            }
        }
        out.params.extend(roots);
    }
    out.params.sort_by(|x, y| x.c.partial_cmp(&y.c).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Recursive cell subdivision: a cell is kept as a bracket on a sign change and split
/// while it could hide a pair of roots (derivative sign change or a Newton step from an
/// endpoint landing inside).
#[allow(clippy::too_many_arguments)]
fn refine(
    fam: &RealFamily,
    q: usize,
    a: f64,
    (fa, da): (f64, f64),
    b: f64,
    (fb, db): (f64, f64),
    depth: usize,
    out: &mut Vec<(f64, f64)>,
) {
    if !(fa.is_finite() && fb.is_finite()) {
        return;
    }
    if fa == 0.0 {
        out.push((a, a));
        return;
    }
    let h = b - a;
    let splittable = depth < 48 && h > 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    if fa.signum() != fb.signum() && fb != 0.0 {
        // an odd number of roots; split further only if the derivative turns inside
        if da.signum() == db.signum() || !splittable {
            out.push((a, b));
            return;
        }
    }
    let suspicious = da.signum() != db.signum() || fa.abs() < da.abs() * h || fb.abs() < db.abs() * h;
    if suspicious && splittable {
        let m = 0.5 * (a + b);
        let fm = fam.residual(m, q);
        refine(fam, q, a, (fa, da), m, fm, depth + 1, out);
        refine(fam, q, m, fm, b, (fb, db), depth + 1, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: FamilySpec = FamilySpec::MonicAdditive { d: 2 };

    fn orbit_at(c: f64) -> MarkedOrbit {
        critical_orbit(&QUAD, &[re(c)], OrbitOptions::default()).unwrap()
    }

    #[test]
    fn basilica_orbit() {
        let o = orbit_at(-1.0);
        assert_eq!(o.gp, vec![re(-1.0), re(0.0)]);
        assert_eq!(o.deriv[0][1], re(-2.0));
        assert_eq!(o.relations[0].kind, RelationKind::PeriodicToCritical { q: 2, mu: 0 });
    }

    #[test]
    fn chebyshev_orbit() {
        let o = orbit_at(-2.0);
        assert_eq!(o.relations[0].kind, RelationKind::Preperiodic { l: 2, q: 3 });
        assert_eq!(&o.deriv[0][1..3], &[re(-4.0), re(4.0)]);
        assert_eq!(o.gp, vec![re(-2.0), re(2.0)]);
        assert_eq!(o.index_of(3, 0), Some(1));
    }

    #[test]
    fn fixed_critical_point() {
        let o = orbit_at(0.0);
        assert_eq!(o.relations[0].kind, RelationKind::PeriodicToCritical { q: 1, mu: 0 });
        assert_eq!(o.gp, vec![re(0.0)]);
        assert_eq!(detect_relations(&o, 1e-10).unwrap(), o.relations);
    }

    #[test]
    fn non_finite_orbit() {
        assert!(matches!(
            critical_orbit(&QUAD, &[re(-1.9)], OrbitOptions::default()),
            Err(Error::NotFinite { .. })
        ));
    }

    #[test]
    fn cubic_relations() {
        // f(a) = a and f(-a) = 1 = f(1) at (a, b) = (1/2, 3/4)
        let spec = FamilySpec::Cubic;
        let w = spec.to_critical_values(&[re(0.5), re(0.75)]);
        let o = critical_orbit(&spec, &w, OrbitOptions::default()).unwrap();
        assert_eq!(o.relations[0].kind, RelationKind::PeriodicToCritical { q: 1, mu: 0 });
        assert_eq!(o.relations[1].kind, RelationKind::Preperiodic { l: 1, q: 2 });
        // both critical points in one 2-cycle at (1/sqrt 2, 0)
        let w = spec.to_critical_values(&[re(0.5f64.sqrt()), re(0.0)]);
        let o = critical_orbit(&spec, &w, OrbitOptions::default()).unwrap();
        assert_eq!(o.relations[0].kind, RelationKind::PeriodicToCritical { q: 1, mu: 1 });
        assert_eq!(o.relations[1].kind, RelationKind::PeriodicToCritical { q: 1, mu: 0 });
    }

    #[test]
    fn solver_examples() {
        let s = solve_superstable(&QUAD, 2, -1.5, -0.5).unwrap();
        assert!((s.c + 1.0).abs() < 1e-12);
        let s = solve_superstable(&QUAD, 3, -1.8, -1.7).unwrap();
        assert!((s.c + 1.754877666246693).abs() < 1e-10);
        let s = solve_superstable(&QUAD, 1, -0.5, 0.5).unwrap();
        assert_eq!(s.c, 0.0);
        assert!(matches!(solve_superstable(&QUAD, 2, -0.5, -0.4), Err(Error::NoSignChange { .. })));
        // period-4 bracket around the period-2 root
        assert!(matches!(
            solve_superstable(&QUAD, 4, -1.05, -0.95),
            Err(Error::LowerPeriodCollision { period: 2, .. })
        ));
    }

    #[test]
    fn enumeration_small() {
        let e = enumerate_superstable(&QUAD, -2.0, 0.25, 4).unwrap();
        let got: Vec<(usize, f64)> = e.params.iter().map(|s| (s.q, s.c)).collect();
        assert_eq!(got.len(), 5, "{got:?}");
        for (q, c) in [(1, 0.0), (2, -1.0), (3, -1.75488), (4, -1.9408), (4, -1.3107)] {
            assert!(got.iter().any(|&(qq, cc)| qq == q && (cc - c).abs() < 1e-4), "{q} {c}");
        }
        let one = enumerate_superstable(&QUAD, -2.0, 0.25, 1).unwrap();
        assert_eq!(one.params.len(), 1);
        assert!(enumerate_superstable(&QUAD, 0.0, 0.0, 4).unwrap().params.is_empty());
    }
}
