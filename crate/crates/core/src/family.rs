//! Concrete families `G_w(z)`, their derivatives and marked points.
//!
//! Two evaluation paths exist. The inherent methods on [`FamilySpec`] take
//! *family parameters* (`c` or `a` for one-parameter kinds, `(a, b)` for the
//! cubic) and enforce the real/sector domains. The [`Deformation`] impl takes
//! critical-value coordinates and continues each branch analytically off the
//! real line (by the sign of the real part), which is what complex-step
//! differentiation and lift continuation need.

use std::f64::consts::{E, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::{re, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    Sin,
    #[serde(rename = "quad4x1mx")]
    Quad4x1mx,
    FlatUnimodal { ell: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    MonicAdditive { d: u32 },
    PowerAdditive { ell_minus: f64, ell_plus: f64 },
    FlatAdditive { ell: f64, b: f64 },
    Multiplicative { base: Base },
    Cubic,
}

/// Separation data for class-F membership.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub diam_u: f64,
    pub radius_r: f64,
    pub robust: bool,
    /// Conditions (a)-(d): bounded domains, bounded range, unbranched covering, nested balls.
    pub class_f_conditions: [bool; 4],
    pub beta: Option<f64>,
    pub x0: Option<f64>,
}

/// The `(a, b)` chart of the cubic family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicChart {
    pub a: f64,
    pub b: f64,
    /// True when the raw cube root was negative, i.e. `w1` is the value at `-a`.
    pub swapped: bool,
}

/// Local holomorphic deformation `w -> G_w` in critical-value coordinates.
pub trait Deformation: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, w: &[Scalar], z: Scalar) -> Result<Scalar>;
    fn deriv_z(&self, w: &[Scalar], z: Scalar) -> Result<Scalar>;
    /// `L_k(z) = dG_w(z)/dw_k`.
    fn deriv_w(&self, w: &[Scalar], z: Scalar, k: usize) -> Result<Scalar>;
    /// Marked points `p_j(w)`.
    fn marked_points(&self, w: &[Scalar]) -> Vec<Scalar>;
    /// `p_{j,k} = dp_j/dw_k`.
    fn marked_jacobian(&self, w: &[Scalar]) -> Vec<Vec<Scalar>>;
    /// Whether complex-step differentiation in `w` is valid.
    fn holomorphic_in_w(&self) -> bool {
        true
    }
}

impl FamilySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FamilySpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        match *self {
            FamilySpec::MonicAdditive { d } if d < 2 => bad("d must be at least 2"),
            FamilySpec::PowerAdditive { ell_minus, ell_plus }
                if !(ell_minus >= 1.0 && ell_plus >= 1.0) =>
            {
                bad("exponents must be at least 1")
            }
            FamilySpec::FlatAdditive { ell, b } if !(ell >= 1.0 && b > 0.0) => {
                bad("flat family needs ell >= 1 and b > 0")
            }
            FamilySpec::Multiplicative { base: Base::FlatUnimodal { ell } } if !(ell >= 1.0) => {
                bad("flat unimodal base needs ell >= 1")
            }
            _ => Ok(()),
        }
    }

    /// Number of free parameters.
    pub fn nu(&self) -> usize {
        match self {
            FamilySpec::Cubic => 2,
            _ => 1,
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(
            self,
            FamilySpec::MonicAdditive { .. }
                | FamilySpec::PowerAdditive { .. }
                | FamilySpec::FlatAdditive { .. }
        )
    }

    pub fn is_multiplicative(&self) -> bool {
        matches!(self, FamilySpec::Multiplicative { .. })
    }

    /// Turning point of a unimodal kind.
    pub fn turning_point(&self) -> Result<f64> {
        match self {
            FamilySpec::Cubic => Err(Error::Unsupported("cubic family is bimodal".into())),
            FamilySpec::Multiplicative { base } => Ok(base.critical_point()),
            _ => Ok(0.0),
        }
    }

    /// Critical points of the map at family parameters `params`.
    pub fn critical_points(&self, params: &[Scalar]) -> Vec<Scalar> {
        match self {
            FamilySpec::Cubic => vec![params[0], -params[0]],
            FamilySpec::Multiplicative { base } => vec![re(base.critical_point())],
            _ => vec![re(0.0)],
        }
    }

    fn check_params(&self, params: &[Scalar]) -> Result<()> {
        if params.len() != self.nu() {
            return Err(Error::InvalidSpec(format!(
                "expected {} parameters, got {}",
                self.nu(),
                params.len()
            )));
        }
        Ok(())
    }

    /// `G(z)` at family parameters, with strict domains.
    pub fn eval(&self, params: &[Scalar], z: Scalar) -> Result<Scalar> {
        self.check_params(params)?;
        self.check_domain(z)?;
        match self {
            FamilySpec::Cubic => Ok(cubic(params[0], params[1], z)),
            FamilySpec::Multiplicative { base } => Ok(params[0] * base.f(z)),
            _ => Ok(self.additive_base(z) + params[0]),
        }
    }

    pub fn deriv_z(&self, params: &[Scalar], z: Scalar) -> Result<Scalar> {
        self.check_params(params)?;
        self.check_domain(z)?;
        match self {
            FamilySpec::Cubic => Ok(cubic_dz(params[0], z)),
            FamilySpec::Multiplicative { base } => Ok(params[0] * base.df(z)),
            _ => self.additive_base_dz(z),
        }
    }

    /// `dG/dw_k` (0-based `k`) at family parameters; the cubic goes through the chart.
    pub fn deriv_w(&self, params: &[Scalar], z: Scalar, k: usize) -> Result<Scalar> {
        self.check_params(params)?;
        self.check_domain(z)?;
        if k >= self.nu() {
            return Err(Error::InvalidSpec(format!("coordinate index {k} out of range")));
        }
        match self {
            FamilySpec::Cubic => Ok(cubic_dw(params[0], z, k)),
            FamilySpec::Multiplicative { base } => Ok(base.f(z)),
            _ => Ok(re(1.0)),
        }
    }

    fn check_domain(&self, z: Scalar) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(domain(z, "not finite"));
        }
        if z.im == 0.0 {
            return Ok(());
        }
        match *self {
            FamilySpec::PowerAdditive { ell_minus, ell_plus } => {
                if even_integer_power(ell_minus, ell_plus) {
                    Ok(())
                } else {
                    Err(Error::NonReal { z: format!("{z}") })
                }
            }
            FamilySpec::FlatAdditive { ell, .. } => {
                let u = if z.re >= 0.0 { z } else { -z };
                if u.arg().abs() < FRAC_PI_2 / ell {
                    Ok(())
                } else {
                    Err(domain(z, "outside the sector domain"))
                }
            }
            FamilySpec::Multiplicative { base: Base::FlatUnimodal { .. } } => {
                Err(domain(z, "flat unimodal base is real only"))
            }
            _ => Ok(()),
        }
    }

    /// `g(z) - c` for additive kinds (analytic continuation by the sign of `Re z`).
    fn additive_base(&self, z: Scalar) -> Scalar {
        match *self {
            FamilySpec::MonicAdditive { d } => z.powu(d),
            FamilySpec::PowerAdditive { ell_minus, ell_plus } => {
                if z.re >= 0.0 {
                    pow_real(z, ell_plus)
                } else {
                    pow_real(-z, ell_minus)
                }
            }
            FamilySpec::FlatAdditive { ell, b } => {
                let u = if z.re >= 0.0 { z } else { -z };
                b * flat_exp(u, ell)
            }
            _ => unreachable!("not additive"),
        }
    }

    fn additive_base_dz(&self, z: Scalar) -> Result<Scalar> {
        match *self {
            FamilySpec::MonicAdditive { d } => Ok(z.powu(d - 1) * d as f64),
            FamilySpec::PowerAdditive { ell_minus, ell_plus } => {
                if z == re(0.0) {
                    return if ell_minus > 1.0 && ell_plus > 1.0 {
                        Ok(re(0.0))
                    } else {
                        Err(domain(z, "one-sided derivative at 0 for exponent 1"))
                    };
                }
                if z.re >= 0.0 {
                    Ok(pow_real(z, ell_plus - 1.0) * ell_plus)
                } else {
                    Ok(-pow_real(-z, ell_minus - 1.0) * ell_minus)
                }
            }
            FamilySpec::FlatAdditive { ell, b } => {
                let (u, s) = if z.re >= 0.0 { (z, 1.0) } else { (-z, -1.0) };
                Ok(b * s * flat_exp_du(u, ell))
            }
            _ => unreachable!("not additive"),
        }
    }

    /// Family parameters to critical-value coordinates.
    pub fn to_critical_values(&self, params: &[Scalar]) -> Vec<Scalar> {
        match self {
            FamilySpec::Cubic => {
                let (a, b) = (params[0], params[1]);
                let a3 = a * a * a;
                vec![-a3 * 2.0 + b, a3 * 2.0 + b]
            }
            _ => params.to_vec(),
        }
    }

    /// Critical-value coordinates to family parameters (signed `a` for the cubic).
    pub fn from_critical_values(&self, w: &[Scalar]) -> Vec<Scalar> {
        match self {
            FamilySpec::Cubic => {
                let (a, b) = chart_complex(w[0], w[1]);
                vec![a, b]
            }
            _ => w.to_vec(),
        }
    }

    /// Escape radius for orbits at real parameter `c`.
    pub fn escape_bound(&self, c: f64) -> f64 {
        10.0 * c.abs().max(1.0)
    }
}

fn even_integer_power(lm: f64, lp: f64) -> bool {
    lm == lp && lp.fract() == 0.0 && (lp as i64) % 2 == 0
}

/// Principal `z^p`, exact on the positive real axis.
fn pow_real(z: Scalar, p: f64) -> Scalar {
    if z.im == 0.0 && z.re >= 0.0 {
        return re(z.re.powf(p));
    }
    if p.fract() == 0.0 && p.abs() < 64.0 {
        return z.powi(p as i32);
    }
    let (r, t) = z.to_polar();
    Scalar::from_polar(r.powf(p), t * p)
}

/// `exp(-u^{-ell})` for `Re u >= 0`, with value 0 at `u = 0`.
fn flat_exp(u: Scalar, ell: f64) -> Scalar {
    if u == re(0.0) {
        return re(0.0);
    }
    let e = -pow_real(u, -ell);
    if e.re < -745.0 {
        return re(0.0);
    }
    e.exp()
}

/// `d/du exp(-u^{-ell}) = ell u^{-ell-1} exp(-u^{-ell})`.
fn flat_exp_du(u: Scalar, ell: f64) -> Scalar {
    if u == re(0.0) {
        return re(0.0);
    }
    let e = -pow_real(u, -ell);
    if e.re < -700.0 {
        return re(0.0);
    }
    e.exp() * pow_real(u, -ell - 1.0) * ell
}

impl Base {
    /// Marked maximum `c` with `f(c) = 1`.
    pub fn critical_point(&self) -> f64 {
        match self {
            Base::Sin => FRAC_PI_2,
            Base::Quad4x1mx | Base::FlatUnimodal { .. } => 0.5,
        }
    }

    pub fn f(&self, z: Scalar) -> Scalar {
        match *self {
            Base::Sin => z.sin(),
            Base::Quad4x1mx => z * (re(1.0) - z) * 4.0,
            Base::FlatUnimodal { ell } => {
                // exp(2^l)(exp(-2^l) - exp(-|u|^{-l})) = 1 - exp(2^l - |u|^{-l})
                let u = z - 0.5;
                if u == re(0.0) {
                    return re(1.0);
                }
                let u = if u.re >= 0.0 { u } else { -u };
                re(1.0) - (re(2f64.powf(ell)) - pow_real(u, -ell)).exp()
            }
        }
    }

    pub fn df(&self, z: Scalar) -> Scalar {
        match *self {
            Base::Sin => z.cos(),
            Base::Quad4x1mx => re(4.0) - z * 8.0,
            Base::FlatUnimodal { ell } => {
                let u = z - 0.5;
                if u == re(0.0) {
                    return re(0.0);
                }
                let (u, s) = if u.re >= 0.0 { (u, 1.0) } else { (-u, -1.0) };
                let e = re(2f64.powf(ell)) - pow_real(u, -ell);
                if e.re < -700.0 {
                    return re(0.0);
                }
                -e.exp() * pow_real(u, -ell - 1.0) * (ell * s)
            }
        }
    }
}

fn cubic(a: Scalar, b: Scalar, z: Scalar) -> Scalar {
    z * z * z - a * a * z * 3.0 + b
}

fn cubic_dz(a: Scalar, z: Scalar) -> Scalar {
    (z * z - a * a) * 3.0
}

/// `dG/dw_k` for the cubic: `L_1 = 1/2 + z/(2a)`, `L_2 = 1/2 - z/(2a)`.
fn cubic_dw(a: Scalar, z: Scalar, k: usize) -> Scalar {
    let t = z / (a * 2.0);
    if k == 0 {
        t + 0.5
    } else {
        -t + 0.5
    }
}

/// Signed cube root, continuous across the real axis on both half-lines.
fn cbrt_c(x: Scalar) -> Scalar {
    if x.im == 0.0 {
        return re(x.re.cbrt());
    }
    if x.re >= 0.0 {
        x.cbrt()
    } else {
        -(-x).cbrt()
    }
}

fn chart_complex(w1: Scalar, w2: Scalar) -> (Scalar, Scalar) {
    let b = (w1 + w2) * 0.5;
    let a = cbrt_c((w2 - w1) * 0.25);
    (a, b)
}

/// Cubic chart `(w1, w2) -> (a, b)` with `w1 = f(a) = -2a^3 + b`, `w2 = f(-a)`.
pub fn cubic_chart(w1: f64, w2: f64) -> Result<CubicChart> {
    if w1 == w2 {
        return Err(Error::DegenerateChart("equal critical values".into()));
    }
    let a = ((w2 - w1) / 4.0).cbrt();
    Ok(CubicChart { a: a.abs(), b: (w1 + w2) / 2.0, swapped: a < 0.0 })
}

/// Inverse chart `(a, b) -> (w1, w2)`.
pub fn cubic_chart_inverse(a: f64, b: f64) -> (f64, f64) {
    (-2.0 * a * a * a + b, 2.0 * a * a * a + b)
}

/// Unique `beta` in `(0, ell^{1/ell})` with `2 beta e^{1/beta^ell} = b`.
pub fn flat_beta(ell: f64, b: f64) -> Result<f64> {
    let boundary = 2.0 * (E * ell).powf(1.0 / ell);
    if !(b > boundary * (1.0 + 1e-12)) {
        return Err(Error::NoSolution(format!(
            "b = {b} does not exceed 2(e ell)^(1/ell) = {boundary}"
        )));
    }
    // log form is decreasing on the branch and avoids overflow near 0
    let phi = |x: f64| 2f64.ln() + x.ln() + x.powf(-ell) - b.ln();
    let mut hi = ell.powf(1.0 / ell);
    let mut lo = 0.5 * hi;
    while phi(lo) <= 0.0 {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok(beta)
}

/// `beta` including the degenerate boundary `b = 2(e ell)^{1/ell}`, where it equals `ell^{1/ell}`.
pub fn flat_chebyshev_beta(ell: f64, b: f64) -> Result<f64> {
    let boundary = 2.0 * (E * ell).powf(1.0 / ell);
    if (b - boundary).abs() <= 1e-12 * boundary {
        return Ok(ell.powf(1.0 / ell));
    }
    flat_beta(ell, b)
}

/// Class-F separation data for flat and monic additive families.
pub fn check_separation(spec: &FamilySpec) -> Result<SeparationReport> {
    match *spec {
        FamilySpec::FlatAdditive { ell, b } => {
            let beta = flat_beta(ell, b)?;
            let f = |x: f64| b * (-x.powf(-ell)).exp() - beta;
            let mut delta = 0.5 * beta;
            let mut found = None;
            for _ in 0..80 {
                let x0 = beta + delta;
                let x1 = f(x0);
                if x1 - beta > 2.0 * delta {
                    found = Some((x0, x1));
                    break;
                }
                delta *= 0.5;
            }
            let (x0, x1) = found.ok_or_else(|| {
                Error::NoSolution("no x0 with x1 - beta > 2(x0 - beta)".into())
            })?;
            let radius_r = x1 + beta;
            let diam_u = 2.0 * x0;
            let conds = [x0 > 0.0, radius_r.is_finite() && radius_r < b, x0 > 0.0, diam_u < radius_r];
            Ok(SeparationReport {
                diam_u,
                radius_r,
                robust: conds.iter().all(|&c| c),
                class_f_conditions: conds,
                beta: Some(beta),
                x0: Some(x0),
            })
        }
        FamilySpec::MonicAdditive { d } => {
            // U = B(0, r) covers V = B(0, r^d) with r^{d-1} = 2^d > 2
            let r = 2.0 * 2f64.powf(1.0 / (d as f64 - 1.0));
            let radius_r = r.powi(d as i32);
            let diam_u = 2.0 * r;
            let conds = [true, true, true, diam_u < radius_r];
            Ok(SeparationReport {
                diam_u,
                radius_r,
                robust: conds.iter().all(|&c| c),
                class_f_conditions: conds,
                beta: None,
                x0: None,
            })
        }
        _ => Err(Error::Unsupported("separation is defined for flat and monic families".into())),
    }
}

impl Deformation for FamilySpec {
    fn dim(&self) -> usize {
        self.nu()
    }

    fn eval(&self, w: &[Scalar], z: Scalar) -> Result<Scalar> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(domain(z, "not finite"));
        }
        Ok(match self {
            FamilySpec::Cubic => {
                let (a, b) = chart_complex(w[0], w[1]);
                cubic(a, b, z)
            }
            FamilySpec::Multiplicative { base } => w[0] * base.f(z),
            _ => self.additive_base(z) + w[0],
        })
    }

    fn deriv_z(&self, w: &[Scalar], z: Scalar) -> Result<Scalar> {
        match self {
            FamilySpec::Cubic => Ok(cubic_dz(chart_complex(w[0], w[1]).0, z)),
            FamilySpec::Multiplicative { base } => Ok(w[0] * base.df(z)),
            _ => self.additive_base_dz(z),
        }
    }

    fn deriv_w(&self, w: &[Scalar], z: Scalar, k: usize) -> Result<Scalar> {
        Ok(match self {
            FamilySpec::Cubic => cubic_dw(chart_complex(w[0], w[1]).0, z, k),
            FamilySpec::Multiplicative { base } => base.f(z),
            _ => re(1.0),
        })
    }

    fn marked_points(&self, w: &[Scalar]) -> Vec<Scalar> {
        match self {
            FamilySpec::Cubic => {
                let a = chart_complex(w[0], w[1]).0;
                vec![a, -a]
            }
            FamilySpec::Multiplicative { base } => vec![re(base.critical_point())],
            _ => vec![re(0.0)],
        }
    }

    fn marked_jacobian(&self, w: &[Scalar]) -> Vec<Vec<Scalar>> {
        match self {
            FamilySpec::Cubic => {
                let a = chart_complex(w[0], w[1]).0;
                let g = re(1.0) / (a * a * 12.0);
                vec![vec![-g, g], vec![g, -g]]
            }
            _ => vec![vec![re(0.0)]],
        }
    }

    fn holomorphic_in_w(&self) -> bool {
        !matches!(self, FamilySpec::Cubic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Vec<Scalar> {
        vec![re(x)]
    }

    #[test]
    fn evaluation_examples() {
        let q = FamilySpec::MonicAdditive { d: 2 };
        assert_eq!(q.eval(&c(-1.0), re(0.0)).unwrap(), re(-1.0));
        let cub = FamilySpec::Cubic;
        assert_eq!(cub.eval(&[re(1.0), re(0.0)], re(1.0)).unwrap(), re(-2.0));
        let flat = FamilySpec::FlatAdditive { ell: 1.0, b: 6.0 };
        let v = flat.eval(&c(0.0), re(1.0)).unwrap();
        assert!((v.re - 6.0 * (-1f64).exp()).abs() < 1e-15);
        assert!((v.re - 2.207276647028654).abs() < 1e-12);
    }

    #[test]
    fn derivative_examples() {
        let q = FamilySpec::MonicAdditive { d: 2 };
        assert_eq!(q.deriv_z(&c(-1.0), re(-1.0)).unwrap(), re(-2.0));
        let s = FamilySpec::Multiplicative { base: Base::Sin };
        assert_eq!(s.deriv_z(&c(2.0), re(0.0)).unwrap(), re(2.0));
        assert!((s.deriv_w(&c(2.0), re(FRAC_PI_2), 0).unwrap() - re(1.0)).norm() < 1e-15);
        let p = FamilySpec::PowerAdditive { ell_minus: 8.0, ell_plus: 8.0 };
        assert!((p.deriv_z(&c(0.0), re(-0.5)).unwrap() - re(-0.0625)).norm() < 1e-15);
        assert_eq!(p.deriv_z(&c(0.0), re(0.0)).unwrap(), re(0.0));
    }

    #[test]
    fn critical_points_per_kind() {
        let s = FamilySpec::Multiplicative { base: Base::Sin };
        assert_eq!(s.critical_points(&c(2.5)), vec![re(FRAC_PI_2)]);
        let cub = FamilySpec::Cubic;
        assert_eq!(cub.critical_points(&[re(0.8), re(0.1)]), vec![re(0.8), re(-0.8)]);
        for base in [Base::Sin, Base::Quad4x1mx, Base::FlatUnimodal { ell: 2.0 }] {
            assert!((base.f(re(base.critical_point())) - re(1.0)).norm() < 1e-15);
            assert!(base.df(re(base.critical_point())).norm() < 1e-15);
        }
    }

    #[test]
    fn domains_are_enforced() {
        let p = FamilySpec::PowerAdditive { ell_minus: 2.5, ell_plus: 3.0 };
        assert!(matches!(p.eval(&c(0.0), Scalar::new(0.1, 0.1)), Err(Error::NonReal { .. })));
        let even = FamilySpec::PowerAdditive { ell_minus: 8.0, ell_plus: 8.0 };
        assert!(even.eval(&c(0.0), Scalar::new(0.1, 0.1)).is_ok());
        let flat = FamilySpec::FlatAdditive { ell: 2.0, b: 6.0 };
        assert!(flat.eval(&c(0.0), Scalar::new(1.0, 0.5)).is_ok());
        assert!(matches!(flat.eval(&c(0.0), Scalar::new(1.0, 1.5)), Err(Error::Domain { .. })));
        let one = FamilySpec::PowerAdditive { ell_minus: 1.0, ell_plus: 2.0 };
        assert!(one.deriv_z(&c(0.0), re(0.0)).is_err());
    }

    #[test]
    fn chart_examples() {
        assert_eq!(cubic_chart_inverse(1.0, 0.0), (-2.0, 2.0));
        assert_eq!(cubic_chart_inverse(0.5, 1.0), (0.75, 1.25));
        let ch = cubic_chart(-2.0, 2.0).unwrap();
        assert_eq!((ch.a, ch.b, ch.swapped), (1.0, 0.0, false));
        let sw = cubic_chart(2.0, -2.0).unwrap();
        assert_eq!((sw.a, sw.b, sw.swapped), (1.0, 0.0, true));
        assert!(matches!(cubic_chart(1.0, 1.0), Err(Error::DegenerateChart(_))));
    }

    #[test]
    fn cubic_dw_matches_chart_finite_difference() {
        let spec = FamilySpec::Cubic;
        let (w1, w2) = cubic_chart_inverse(1.0, 0.0);
        let h = 1e-6;
        for k in 0..2 {
            let mut wp = [w1, w2];
            let mut wm = [w1, w2];
            wp[k] += h;
            wm[k] -= h;
            let eval_at = |w: [f64; 2]| {
                let ch = cubic_chart(w[0], w[1]).unwrap();
                let x: f64 = 0.3;
                x * x * x - 3.0 * ch.a * ch.a * x + ch.b
            };
            let fd = (eval_at(wp) - eval_at(wm)) / (2.0 * h);
            let exact = spec.deriv_w(&[re(1.0), re(0.0)], re(0.3), k).unwrap();
            assert!((exact.re - fd).abs() < 1e-8, "k={k}: {} vs {fd}", exact.re);
        }
        // at z = 0 both partials equal db/dw_k = 1/2
        let s: Scalar = (0..2)
            .map(|k| spec.deriv_w(&[re(1.0), re(0.0)], re(0.0), k).unwrap())
            .sum();
        assert!((s - re(1.0)).norm() < 1e-15);
    }

    #[test]
    fn flat_beta_examples() {
        assert!(matches!(flat_beta(1.0, 2.0 * E), Err(Error::NoSolution(_))));
        let beta = flat_beta(1.0, 6.0).unwrap();
        assert!((2.0 * beta * (1.0 / beta).exp() - 6.0).abs() < 1e-12 * 6.0);
        assert!((beta - 0.661).abs() < 1e-3);
        let b2 = 2.0 * (2.0 * E).sqrt() + 0.1;
        let beta2 = flat_beta(2.0, b2).unwrap();
        assert!(beta2 < 2f64.sqrt() && beta2 > 1.0);
        assert!((2.0 * beta2 * (1.0 / (beta2 * beta2)).exp() - b2).abs() < 1e-12 * b2);
        assert_eq!(flat_chebyshev_beta(1.0, 2.0 * E).unwrap(), 1.0);
    }

    #[test]
    fn separation_examples() {
        let r = check_separation(&FamilySpec::FlatAdditive { ell: 1.0, b: 6.0 }).unwrap();
        assert!(r.robust && r.diam_u < r.radius_r);
        assert!(r.class_f_conditions.iter().all(|&x| x));
        assert!(matches!(
            check_separation(&FamilySpec::FlatAdditive { ell: 1.0, b: 2.0 * E }),
            Err(Error::NoSolution(_))
        ));
        assert!(check_separation(&FamilySpec::MonicAdditive { d: 2 }).unwrap().robust);
        assert!(check_separation(&FamilySpec::Cubic).is_err());
    }

    #[test]
    fn json_round_trip_and_rejection() {
        for text in [
            r#"{"family":"monic_additive","d":2}"#,
            r#"{"family":"power_additive","ell_minus":8.0,"ell_plus":8.0}"#,
            r#"{"family":"flat_additive","ell":1.0,"b":6.0}"#,
            r#"{"family":"multiplicative","base":"sin"}"#,
            r#"{"family":"multiplicative","base":"quad4x1mx"}"#,
            r#"{"family":"multiplicative","base":{"flat_unimodal":{"ell":2.0}}}"#,
            r#"{"family":"cubic"}"#,
        ] {
            let spec = FamilySpec::from_json(text).unwrap();
            let back = serde_json::to_string(&spec).unwrap();
            assert_eq!(FamilySpec::from_json(&back).unwrap(), spec);
        }
        assert!(FamilySpec::from_json(r#"{"family":"monic_additive","d":2,"x":1}"#).is_err());
        assert!(FamilySpec::from_json(r#"{"family":"monic_additive","d":1}"#).is_err());
        assert!(FamilySpec::from_json(r#"{"family":"flat_additive","ell":1.0,"b":-1.0}"#).is_err());
    }
}
