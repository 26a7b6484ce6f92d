//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::{re, Scalar};

pub type CMat = DMatrix<Scalar>;
pub type CVec = DVector<Scalar>;

pub fn det(m: &CMat) -> Scalar {
    if m.nrows() == 0 {
        return re(1.0);
    }
    m.clone().lu().determinant()
}

/// `det(I - rho M)`.
pub fn det_i_minus(m: &CMat, rho: Scalar) -> Scalar {
    let n = m.nrows();
    det(&(CMat::identity(n, n) - m * rho))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Approximate eigenvector for an eigenvalue `mu` by inverse iteration.
pub fn eigenvector(m: &CMat, mu: Scalar) -> CVec {
    let n = m.nrows();
    let shift = mu + Scalar::new(1e-10, 1e-10) * (1.0 + mu.norm());
    let lu = (m - CMat::identity(n, n) * shift).lu();
    let mut x = CVec::from_fn(n, |i, _| re(1.0 + 0.1 * i as f64));
    for _ in 0..8 {
        match lu.solve(&x) {
            Some(y) => {
                let norm = y.norm();
                if !(norm.is_finite() && norm > 0.0) {
                    break;
                }
                x = y / re(norm);
            }
            None => break,
        }
    }
    // fix the phase so the largest entry is real positive
    let (imax, _) = x
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = x[imax] / re(x[imax].norm());
    x / phase
}
