//! Characteristic polynomials (Faddeev-LeVerrier) and polynomial roots (Aberth-Ehrlich).
//!
//! Coefficient vectors are stored in ascending order: `c[k]` multiplies `x^k`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::{re, Scalar};

const MAX_SWEEPS: usize = 500;
const ROOT_TOL: f64 = 1e-12;

/// Coefficients of `det(I - rho M)` in `rho`, constant term 1, trailing zeros trimmed.
pub fn det_poly(m: &CMat) -> Result<Vec<Scalar>> {
    let n = m.nrows();
    // char poly x^n + c1 x^{n-1} + ... + cn; det(I - rho M) = 1 + c1 rho + ... + cn rho^n
    let mut coeffs = vec![re(1.0)];
    let mut mk = CMat::zeros(n, n);
    let id = CMat::identity(n, n);
    for k in 1..=n {
        mk = m * &mk + &id * coeffs[k - 1];
        let amk = m * &mk;
        let c = -amk.trace() / re(k as f64);
        coeffs.push(c);
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(scale <= 1e100) {
        return Err(Error::Overflow(scale));
    }
    trim(&mut coeffs, 1e-13 * scale.max(1.0));
    Ok(coeffs)
}

fn trim(coeffs: &mut Vec<Scalar>, tol: f64) {
    while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() <= tol) {
        coeffs.pop();
    }
}

pub fn eval(coeffs: &[Scalar], x: Scalar) -> Scalar {
    coeffs.iter().rev().fold(re(0.0), |acc, &c| acc * x + c)
}

/// Value and derivative by Horner.
fn eval_d(coeffs: &[Scalar], x: Scalar) -> (Scalar, Scalar, f64) {
    let mut p = re(0.0);
    let mut dp = re(0.0);
    let mut bound = 0.0;
    let ax = x.norm();
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
        bound = bound * ax + c.norm();
    }
    (p, dp, bound)
}

/// Newton ratio `p/p'` at `z`, evaluated through the reversed polynomial when `|z| > 1`,
/// together with a flag telling whether `|p(z)|` is at rounding level.
fn newton_ratio(coeffs: &[Scalar], rev: &[Scalar], z: Scalar) -> (Scalar, bool) {
    let n = (coeffs.len() - 1) as f64;
    let eps = f64::EPSILON * 4.0 * (n + 1.0);
    if z.norm() <= 1.0 {
        let (p, dp, bound) = eval_d(coeffs, z);
        (p / dp, p.norm() <= eps * bound)
    } else {
        let y = re(1.0) / z;
        let (q, dq, bound) = eval_d(rev, y);
        // p(z) = z^n q(1/z), p'(z) = z^{n-1}(n q(y) - y q'(y))
        (z * q / (q * n - y * dq), q.norm() <= eps * bound)
    }
}

/// All roots of the polynomial with ascending coefficients (leading coefficient nonzero).
pub fn roots(coeffs: &[Scalar]) -> Result<Vec<Scalar>> {
    let mut c = coeffs.to_vec();
    trim(&mut c, 0.0);
    let mut zeros = 0;
    while c.len() > 1 && c[0] == re(0.0) {
        c.remove(0);
        zeros += 1;
    }
    let n = c.len() - 1;
    let mut out = vec![re(0.0); zeros];
    if n == 0 {
        return Ok(out);
    }
    let scale = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    for x in c.iter_mut() {
        *x /= scale;
    }
    if n == 1 {
        out.push(-c[0] / c[1]);
        return Ok(out);
    }
    let rev: Vec<Scalar> = c.iter().rev().copied().collect();
    let mut z = initial_guesses(&c);
    let mut done = vec![false; n];
    for _sweep in 0..MAX_SWEEPS {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (ratio, small) = newton_ratio(&c, &rev, z[i]);
            if small || !ratio.norm().is_finite() {
                done[i] = small;
                if !small {
                    return Err(Error::NonConvergence("non-finite Newton ratio".into()));
                }
                continue;
            }
            let s: Scalar = (0..n).filter(|&j| j != i).map(|j| re(1.0) / (z[i] - z[j])).sum();
            let w = ratio / (re(1.0) - ratio * s);
            z[i] -= w;
            if w.norm() <= ROOT_TOL * z[i].norm().max(1e-300) {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            out.extend(z);
            return Ok(out);
        }
    }
    Err(Error::NonConvergence(format!("Aberth iteration after {MAX_SWEEPS} sweeps")))
}

/// Starting points on circles given by the Newton polygon of `|c_k|`.
fn initial_guesses(c: &[Scalar]) -> Vec<Scalar> {
    let n = c.len() - 1;
    let pts: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, x)| x.norm() > 0.0)
        .map(|(k, x)| (k, x.norm().ln()))
        .collect();
    // upper convex hull
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 as f64 - a.0 as f64) * (p.1 - a.1) - (b.1 - a.1) * (p.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut z = Vec::with_capacity(n);
    for win in hull.windows(2) {
        let (i, li) = win[0];
        let (j, lj) = win[1];
        let m = j - i;
        let r = ((li - lj) / m as f64).exp();
        for k in 0..m {
            let t = 2.0 * PI * (k as f64) / (m as f64) + 2.0 * PI * (i as f64) / (n as f64) + 0.4;
            z.push(Scalar::from_polar(r, t));
        }
    }
    z
}

/// Eigenvalues of `m`: reciprocals of the roots of `det(I - rho M)` plus zeros.
pub fn spectrum(m: &CMat) -> Result<Vec<Scalar>> {
    let n = m.nrows();
    let p = det_poly(m)?;
    let deg = p.len() - 1;
    let mut eig: Vec<Scalar> = roots(&p)?.into_iter().map(|r| re(1.0) / r).collect();
    eig.extend(std::iter::repeat(re(0.0)).take(n - deg));
    eig.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(eig)
}

pub fn spectral_radius(eig: &[Scalar]) -> f64 {
    eig.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
