//! The transfer operator `A`, the labeled operator `A_J`, the matrix `D(rho)`
//! and transversality certificates.

use std::f64::consts::PI;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::family::{Deformation, FamilySpec};
use crate::linalg::{det, det_i_minus, CMat};
use crate::orbit::{critical_orbit, MarkedOrbit, OrbitOptions, RelationKind};
use crate::poly;
use crate::{re, Scalar};

pub const CERT_TOL: f64 = 1e-8;
pub const ID_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixIndex {
    /// Rows indexed by the elements of `g(P)`.
    SetIndexed(Vec<Scalar>),
    /// Rows indexed by labels `(i, j)` of `J` (0-based `j`).
    LabelIndexed(Vec<(usize, usize)>),
}

#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub entries: CMat,
    pub index: MatrixIndex,
    /// Parameter (critical values) the matrix was assembled at.
    pub w: Vec<Scalar>,
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn rows(&self) -> Vec<Vec<Scalar>> {
        (0..self.dim()).map(|r| self.entries.row(r).iter().copied().collect()).collect()
    }
}

fn check_deriv(d: Scalar, i: usize, j: usize) -> Result<Scalar> {
    if d.norm() == 0.0 || !d.norm().is_finite() {
        return Err(Error::DivideByZero(format!("Dg(c_{{{i},{j}}}) = {d}")));
    }
    Ok(d)
}

/// Transfer operator on velocities over `g(P)`.
pub fn assemble_a(orbit: &MarkedOrbit) -> Result<TransferMatrix> {
    let n = orbit.gp.len();
    let nu = orbit.nu();
    let col = |i: usize, j: usize| -> Result<usize> {
        orbit
            .index_of(i, j)
            .ok_or_else(|| Error::InvalidSpec(format!("label ({i},{j}) missing from g(P)")))
    };
    let mut m = CMat::zeros(n, n);
    for x in 0..n {
        if let Some(j) = orbit.marked_at(x) {
            for k in 0..nu {
                m[(x, col(1, k)?)] += orbit.marked_jacobian[j][k];
            }
            continue;
        }
        let (i, j) = orbit
            .label_of(x)
            .ok_or_else(|| Error::InvalidSpec(format!("element {x} of g(P) has no label")))?;
        let d = check_deriv(orbit.deriv[j][i], i, j)?;
        m[(x, col(i + 1, j)?)] += re(1.0) / d;
        for k in 0..nu {
            m[(x, col(1, k)?)] -= orbit.param_deriv[j][i][k] / d;
        }
    }
    Ok(TransferMatrix { entries: m, index: MatrixIndex::SetIndexed(orbit.gp.clone()), w: orbit.w.clone() })
}

/// The label set `J`: `(i, j)` with `0 <= i < q_j`, where `(0, j)` belongs only
/// when `j = mu(j')` for a periodic relation.
pub fn label_set(orbit: &MarkedOrbit) -> Vec<(usize, usize)> {
    let targets: Vec<usize> = orbit
        .relations
        .iter()
        .filter_map(|r| match r.kind {
            RelationKind::PeriodicToCritical { mu, .. } => Some(mu),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for j in 0..orbit.nu() {
        for i in 0..orbit.q(j) {
            if i > 0 || targets.contains(&j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Transfer operator on labeled coordinates `v_{i,j}`, `(i, j)` in `J`.
pub fn assemble_aj(orbit: &MarkedOrbit) -> Result<TransferMatrix> {
    let labels = label_set(orbit);
    let n = labels.len();
    let nu = orbit.nu();
    let col = |i: usize, j: usize| -> Result<usize> {
        let (i, j) = orbit.resolve(i, j);
        labels
            .iter()
            .position(|&l| l == (i, j))
            .ok_or_else(|| Error::InvalidSpec(format!("label ({i},{j}) not in J")))
    };
    let mut m = CMat::zeros(n, n);
    for (r, &(i, j)) in labels.iter().enumerate() {
        if i == 0 {
            for k in 0..nu {
                m[(r, col(1, k)?)] += orbit.marked_jacobian[j][k];
            }
            continue;
        }
        let d = check_deriv(orbit.deriv[j][i], i, j)?;
        m[(r, col(i + 1, j)?)] += re(1.0) / d;
        for k in 0..nu {
            m[(r, col(1, k)?)] -= orbit.param_deriv[j][i][k] / d;
        }
    }
    Ok(TransferMatrix { entries: m, index: MatrixIndex::LabelIndexed(labels), w: orbit.w.clone() })
}

/// `A_J` rewritten in the `g(P)` indexing, when labels and points are in bijection.
pub fn identify_labels(orbit: &MarkedOrbit, aj: &TransferMatrix) -> Option<CMat> {
    let MatrixIndex::LabelIndexed(labels) = &aj.index else { return None };
    let n = orbit.gp.len();
    if labels.len() != n {
        return None;
    }
    let perm: Vec<usize> = labels.iter().map(|&(i, j)| orbit.label_index[j][i]).collect::<Option<_>>()?;
    let mut seen = vec![false; n];
    for &p in &perm {
        if std::mem::replace(&mut seen[p], true) {
            return None;
        }
    }
    let mut out = CMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(perm[r], perm[c])] = aj.entries[(r, c)];
        }
    }
    Some(out)
}

/// `L^m_{j,k}(rho)`.
fn script_l(orbit: &MarkedOrbit, j: usize, k: usize, m: usize, rho: Scalar) -> Scalar {
    let mut sum = re(0.0);
    let mut rho_n = re(1.0);
    let mut chain = re(1.0);
    for n in 1..=m {
        rho_n *= rho;
        chain *= orbit.deriv[j][n];
        sum += rho_n * orbit.param_deriv[j][n][k] / chain;
    }
    sum
}

/// The `nu x nu` matrix `D(rho)`.
pub fn assemble_d(orbit: &MarkedOrbit, rho: Scalar) -> CMat {
    let nu = orbit.nu();
    CMat::from_fn(nu, nu, |j, k| {
        let q = orbit.q(j);
        let delta = if j == k { re(1.0) } else { re(0.0) };
        let base = delta + script_l(orbit, j, k, q - 1, rho);
        match orbit.relations[j].kind {
            RelationKind::PeriodicToCritical { mu, .. } => {
                base - rho.powu(q as u32) * orbit.marked_jacobian[mu][k] / orbit.deriv_chain(j, 1, q - 1)
            }
            RelationKind::Preperiodic { l, .. } => {
                base - rho.powu((q - l) as u32) / orbit.deriv_chain(j, l, q - l)
                    * (script_l(orbit, j, k, l - 1, rho) + delta)
            }
        }
    })
}

/// Coefficients of `det(I - rho M)`.
pub fn det_poly(m: &TransferMatrix) -> Result<Vec<Scalar>> {
    poly::det_poly(&m.entries)
}

pub fn spectrum(m: &TransferMatrix) -> Result<Vec<Scalar>> {
    poly::spectrum(&m.entries)
}

/// Degree bound of `det D(rho)` as a polynomial.
fn det_d_degree(orbit: &MarkedOrbit) -> usize {
    (0..orbit.nu()).map(|j| orbit.q(j)).sum()
}

/// Coefficients of `det D(rho)`, by interpolation on the unit circle.
pub fn det_d_poly(orbit: &MarkedOrbit) -> Vec<Scalar> {
    let n = det_d_degree(orbit) + 1;
    let samples: Vec<Scalar> =
        (0..n).map(|m| det(&assemble_d(orbit, Scalar::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)))).collect();
    let mut coeffs: Vec<Scalar> = (0..n)
        .map(|k| {
            samples
                .iter()
                .enumerate()
                .map(|(m, s)| s * Scalar::from_polar(1.0, -2.0 * PI * (m * k) as f64 / n as f64))
                .sum::<Scalar>()
                / re(n as f64)
        })
        .collect();
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() <= 1e-12 * scale) {
        coeffs.pop();
    }
    coeffs
}

/// `Dg^{q_j - l_j}(c_{l_j, j}) = rho^{q_j - l_j}` for each preperiodic relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExceptionalConstraint {
    pub j: usize,
    #[serde(serialize_with = "compact")]
    pub multiplier: Scalar,
    pub exponent: usize,
}

impl ExceptionalConstraint {
    /// All `rho` satisfying the constraint.
    pub fn rhos(&self) -> Vec<Scalar> {
        let e = self.exponent as f64;
        let r = self.multiplier.norm().powf(1.0 / e);
        let t = self.multiplier.arg();
        (0..self.exponent).map(|k| Scalar::from_polar(r, (t + 2.0 * PI * k as f64) / e)).collect()
    }
}

pub fn exceptional_values(orbit: &MarkedOrbit) -> Vec<ExceptionalConstraint> {
    orbit
        .multipliers()
        .into_iter()
        .map(|(j, multiplier, exponent)| ExceptionalConstraint { j, multiplier, exponent })
        .collect()
}

pub fn is_exceptional(constraints: &[ExceptionalConstraint], rho: Scalar, tol: f64) -> bool {
    constraints
        .iter()
        .any(|c| (rho.powu(c.exponent as u32) - c.multiplier).norm() <= tol * c.multiplier.norm().max(1.0))
}

/// `R(w)` for the relations of `orbit`, evaluated at a (possibly perturbed) `w`.
fn relation_map<D: Deformation + ?Sized>(def: &D, orbit: &MarkedOrbit, w: &[Scalar]) -> Result<Vec<Scalar>> {
    let marked = def.marked_points(w);
    let iterate = |x0: Scalar, n: usize| -> Result<Scalar> {
        let mut x = x0;
        for _ in 0..n {
            x = def.eval(w, x)?;
        }
        Ok(x)
    };
    orbit
        .relations
        .iter()
        .map(|r| {
            let j = r.j;
            match r.kind {
                RelationKind::PeriodicToCritical { q, mu } => Ok(iterate(w[j], q - 1)? - marked[mu]),
                RelationKind::Preperiodic { l, q } => Ok(iterate(w[j], q - 1)? - iterate(w[j], l - 1)?),
            }
        })
        .collect()
}

/// `DR(c_1)`: complex-step where valid, central differences otherwise.
pub fn jacobian_r<D: Deformation + ?Sized>(def: &D, orbit: &MarkedOrbit) -> Result<CMat> {
    let nu = orbit.nu();
    let w = &orbit.w;
    let real = w.iter().all(|x| x.im == 0.0);
    let mut jac = CMat::zeros(nu, nu);
    if def.holomorphic_in_w() && real {
        let h = 1e-20;
        for k in 0..nu {
            let mut wp = w.clone();
            wp[k] += Scalar::new(0.0, h);
            let r = relation_map(def, orbit, &wp)?;
            for j in 0..nu {
                jac[(j, k)] = re(r[j].im / h);
            }
        }
    } else {
        let scale = w.iter().map(|x| x.norm()).fold(1.0, f64::max);
        let h = 1e-6 * scale;
        for k in 0..nu {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += re(h);
            wm[k] -= re(h);
            let rp = relation_map(def, orbit, &wp)?;
            let rm = relation_map(def, orbit, &wm)?;
            for j in 0..nu {
                jac[(j, k)] = (rp[j] - rm[j]) / (2.0 * h);
            }
        }
    }
    Ok(jac)
}

/// Complex values with zero imaginary part are written as plain numbers.
fn compact<S: Serializer>(z: &Scalar, s: S) -> std::result::Result<S::Ok, S::Error> {
    if z.im == 0.0 {
        s.serialize_f64(z.re)
    } else {
        [z.re, z.im].serialize(s)
    }
}

fn pairs<S: Serializer>(zs: &[Scalar], s: S) -> std::result::Result<S::Ok, S::Error> {
    zs.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct Checks {
    /// `|det DR - prod Dg^{q_j-1} det D(1)| / (1 + |det DR|)`.
    pub drho_identity: f64,
    /// Largest distance between non-exceptional roots of `det(I - rho A)` and of `det D(rho)`.
    pub prop43_rootsets: f64,
    /// Coefficientwise distance to `sum rho^i / Dg^i(c_1)` (single-critical additive periodic case).
    pub closed_form_detpoly: Option<f64>,
    /// `1` in the spectrum of `A` exactly when `DR` is degenerate.
    pub unit_eigenvalue_iff_degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransversalityCertificate {
    #[serde(serialize_with = "pairs")]
    pub w: Vec<Scalar>,
    pub relations: Vec<crate::orbit::CriticalRelation>,
    #[serde(rename = "det_DR", serialize_with = "compact")]
    pub det_dr: Scalar,
    #[serde(serialize_with = "compact")]
    pub derivative_product: Scalar,
    #[serde(rename = "Q", serialize_with = "compact")]
    pub q: Scalar,
    #[serde(rename = "det_D1", serialize_with = "compact")]
    pub det_d1: Scalar,
    pub spectral_radius: f64,
    #[serde(serialize_with = "pairs")]
    pub eigenvalues: Vec<Scalar>,
    pub exceptional_rhos: Vec<ExceptionalConstraint>,
    pub positive: bool,
    pub checks: Checks,
    pub warnings: Vec<String>,
}

impl TransversalityCertificate {
    /// All identity residuals below `ID_TOL` and the spectral/determinant equivalence consistent.
    pub fn identities_hold(&self) -> bool {
        self.checks.drho_identity <= ID_TOL
            && self.checks.closed_form_detpoly.map_or(true, |r| r <= 1e-10)
            && self.checks.unit_eigenvalue_iff_degenerate
    }
}

fn closed_form_residual(orbit: &MarkedOrbit, dp: &[Scalar]) -> Option<f64> {
    let RelationKind::PeriodicToCritical { q, .. } = orbit.relations[0].kind else { return None };
    let want: Vec<Scalar> = (0..q).map(|i| re(1.0) / orbit.deriv_chain(0, 1, i)).collect();
    let n = want.len().max(dp.len());
    Some(
        (0..n)
            .map(|i| (want.get(i).copied().unwrap_or(re(0.0)) - dp.get(i).copied().unwrap_or(re(0.0))).norm())
            .fold(0.0, f64::max),
    )
}

fn root_set_distance(a: &[Scalar], b: &[Scalar], skip: impl Fn(Scalar) -> bool) -> f64 {
    let mut worst: f64 = 0.0;
    for (xs, ys) in [(a, b), (b, a)] {
        for &x in xs {
            if skip(x) || x.norm() > 1e6 {
                continue;
            }
            let d = ys.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(d / x.norm().max(1.0));
        }
    }
    worst
}

/// Residual of the equivalence between zeros of `det(I - rho A)` and of `det D(rho)`.
pub fn prop43_residual(orbit: &MarkedOrbit, a: &TransferMatrix) -> Result<f64> {
    let exc = exceptional_values(orbit);
    let ra = poly::roots(&det_poly(a)?)?;
    let rd = poly::roots(&det_d_poly(orbit))?;
    Ok(root_set_distance(&ra, &rd, |r| is_exceptional(&exc, r, 1e-6)))
}

/// Certificate for the critically finite map at `w`, using a precomputed orbit.
pub fn certify_orbit<D: Deformation + ?Sized>(
    def: &D,
    orbit: &MarkedOrbit,
    additive: bool,
) -> Result<TransversalityCertificate> {
    let a = assemble_a(orbit)?;
    let dp = det_poly(&a)?;
    let eigenvalues = spectrum(&a)?;
    let spectral_radius = poly::spectral_radius(&eigenvalues);
    let jac = jacobian_r(def, orbit)?;
    let det_dr = det(&jac);
    let derivative_product: Scalar = (0..orbit.nu()).map(|j| orbit.deriv_chain(j, 1, orbit.q(j) - 1)).product();
    let det_d1 = det(&assemble_d(orbit, re(1.0)));
    let q = det_dr / derivative_product;
    let drho_identity = (det_dr - derivative_product * det_d1).norm() / (1.0 + det_dr.norm());
    let closed_form_detpoly = if additive && orbit.nu() == 1 { closed_form_residual(orbit, &dp) } else { None };
    let prop43_rootsets = prop43_residual(orbit, &a)?;
    let has_unit = eigenvalues.iter().any(|z| (z - re(1.0)).norm() < 1e-6);
    let degenerate = q.norm() < CERT_TOL;
    let real = orbit.w.iter().all(|x| x.im == 0.0) && orbit.points.iter().flatten().all(|x| x.im.abs() <= 1e-12);
    let positive = real && q.re > CERT_TOL && q.im.abs() < CERT_TOL;
    let warnings = orbit
        .near_parabolic()
        .into_iter()
        .map(|j| format!("near parabolic: preperiodic cycle of critical point {j} has multiplier within 1e-6 of 1"))
        .collect();
    Ok(TransversalityCertificate {
        w: orbit.w.clone(),
        relations: orbit.relations.clone(),
        det_dr,
        derivative_product,
        q,
        det_d1,
        spectral_radius,
        eigenvalues,
        exceptional_rhos: exceptional_values(orbit),
        positive,
        checks: Checks {
            drho_identity,
            prop43_rootsets,
            closed_form_detpoly,
            unit_eigenvalue_iff_degenerate: has_unit == degenerate,
        },
        warnings,
    })
}

/// Certify the critically finite parameter `w` (critical values) of `spec`.
pub fn certify(spec: &FamilySpec, w: &[Scalar]) -> Result<TransversalityCertificate> {
    spec.validate()?;
    if w.len() != spec.nu() {
        return Err(Error::InvalidSpec(format!("expected {} parameters, got {}", spec.nu(), w.len())));
    }
    let orbit = critical_orbit(spec, w, OrbitOptions::default())?;
    certify_orbit(spec, &orbit, spec.is_additive())
}

/// Certify many real one-parameter values; output order matches input order.
pub fn certify_batch(spec: &FamilySpec, params: &[f64], exec: Exec) -> Vec<Result<TransversalityCertificate>> {
    exec.map(params, |&c| certify(spec, &[re(c)]))
}

/// Reparametrizations `nu` of the quadratic family, with `nu(v_1) = c_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "nu", rename_all = "snake_case")]
pub enum Reparam {
    /// `nu(v) = v`, so `v_1 = c_1`.
    Identity,
    /// `nu(v) = v + c_1 - v_1`.
    Shift { v1: f64 },
    /// `nu(v) = c_1 + (v - v_1)^2`, with `nu'(v_1) = 0`.
    QuadraticCritical { v1: f64 },
}

/// `G_v(z) = (nu(v)/v) z^2 + v`.
#[derive(Debug, Clone, Copy)]
pub struct Reparametrized {
    pub c1: f64,
    pub kind: Reparam,
}

impl Reparametrized {
    pub fn v1(&self) -> f64 {
        match self.kind {
            Reparam::Identity => self.c1,
            Reparam::Shift { v1 } | Reparam::QuadraticCritical { v1 } => v1,
        }
    }

    fn nu(&self, v: Scalar) -> Scalar {
        match self.kind {
            Reparam::Identity => v,
            Reparam::Shift { v1 } => v + (self.c1 - v1),
            Reparam::QuadraticCritical { v1 } => re(self.c1) + (v - v1) * (v - v1),
        }
    }

    fn dnu(&self, v: Scalar) -> Scalar {
        match self.kind {
            Reparam::Identity | Reparam::Shift { .. } => re(1.0),
            Reparam::QuadraticCritical { v1 } => (v - v1) * 2.0,
        }
    }
}

impl Deformation for Reparametrized {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, w: &[Scalar], z: Scalar) -> Result<Scalar> {
        let v = w[0];
        Ok(self.nu(v) / v * z * z + v)
    }

    fn deriv_z(&self, w: &[Scalar], z: Scalar) -> Result<Scalar> {
        let v = w[0];
        Ok(self.nu(v) / v * z * 2.0)
    }

    fn deriv_w(&self, w: &[Scalar], z: Scalar, _k: usize) -> Result<Scalar> {
        let v = w[0];
        Ok((self.dnu(v) / v - self.nu(v) / (v * v)) * z * z + 1.0)
    }

    fn marked_points(&self, _w: &[Scalar]) -> Vec<Scalar> {
        vec![re(0.0)]
    }

    fn marked_jacobian(&self, _w: &[Scalar]) -> Vec<Vec<Scalar>> {
        vec![vec![re(0.0)]]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReparamReport {
    pub kind: Reparam,
    pub c1: f64,
    pub v1: f64,
    /// Largest relative defect of the determinant identity over the sample `rho`.
    pub residual: f64,
    /// `det D_nu(1)`.
    #[serde(serialize_with = "compact")]
    pub det_d1: Scalar,
}

/// `(1 - rho (1 - v_1 nu'(v_1) / (2 c_1))) / (1 - rho/2)`.
fn reparam_prefactor(r: &Reparametrized, rho: Scalar) -> Scalar {
    let v1 = r.v1();
    let s = re(1.0) - re(v1) * r.dnu(re(v1)) / (2.0 * r.c1);
    (re(1.0) - rho * s) / (re(1.0) - rho / 2.0)
}

/// Compare `det(I - rho A_nu)` with the prefactor times `det(I - rho A)` at 20 sample `rho`.
pub fn reparametrize_check(c1: f64, kind: Reparam) -> Result<ReparamReport> {
    let r = Reparametrized { c1, kind };
    let v1 = r.v1();
    if v1 == 0.0 || c1 == 0.0 {
        return Err(Error::DegenerateChart("v_1 = 0 or c_1 = 0".into()));
    }
    let quad = FamilySpec::MonicAdditive { d: 2 };
    let base = critical_orbit(&quad, &[re(c1)], OrbitOptions::default())?;
    let orbit = critical_orbit(&r, &[re(v1)], OrbitOptions::default())?;
    let a = assemble_a(&base)?.entries;
    let a_nu = assemble_a(&orbit)?.entries;
    let mut residual: f64 = 0.0;
    for m in 0..20 {
        let rho = if m == 0 { re(0.0) } else { Scalar::from_polar(0.3 + 0.06 * m as f64, 0.7 + 2.0 * PI * m as f64 / 19.0) };
        let lhs = det_i_minus(&a_nu, rho);
        let rhs = reparam_prefactor(&r, rho) * det_i_minus(&a, rho);
        residual = residual.max((lhs - rhs).norm() / (1.0 + rhs.norm()));
    }
    Ok(ReparamReport { kind, c1, v1, residual, det_d1: det(&assemble_d(&orbit, re(1.0))) })
}
