//! Small dense `r × r` complex matrix helpers on row-major slices.
//!
//! Fields store one matrix per grid point, so these work directly on
//! borrowed slices and avoid allocation in the hot loops. Anything that needs
//! a factorization goes through nalgebra.

use nalgebra::DMatrix;

use crate::geometry::C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(r: usize) -> Vec<C64> {
    let mut m = vec![ZERO; r * r];
    for a in 0..r {
        m[a * r + a] = ONE;
    }
    m
}

/// `out = a · b`
pub fn mul_into(a: &[C64], b: &[C64], out: &mut [C64], r: usize) {
    for i in 0..r {
        for j in 0..r {
            let mut s = ZERO;
            for k in 0..r {
                s += a[i * r + k] * b[k * r + j];
            }
            out[i * r + j] = s;
        }
    }
}

pub fn mul(a: &[C64], b: &[C64], r: usize) -> Vec<C64> {
    let mut out = vec![ZERO; r * r];
    mul_into(a, b, &mut out, r);
    out
}

/// `out += c · (a · b)`
pub fn mul_acc(a: &[C64], b: &[C64], c: C64, out: &mut [C64], r: usize) {
    for i in 0..r {
        for j in 0..r {
            let mut s = ZERO;
            for k in 0..r {
                s += a[i * r + k] * b[k * r + j];
            }
            out[i * r + j] += c * s;
        }
    }
}

/// `out += c · [a, b]`
pub fn commutator_acc(a: &[C64], b: &[C64], c: C64, out: &mut [C64], r: usize) {
    for i in 0..r {
        for j in 0..r {
            let mut s = ZERO;
            for k in 0..r {
                s += a[i * r + k] * b[k * r + j] - b[i * r + k] * a[k * r + j];
            }
            out[i * r + j] += c * s;
        }
    }
}

pub fn dagger(a: &[C64], r: usize) -> Vec<C64> {
    let mut out = vec![ZERO; r * r];
    for i in 0..r {
        for j in 0..r {
            out[j * r + i] = a[i * r + j].conj();
        }
    }
    out
}

pub fn trace(a: &[C64], r: usize) -> C64 {
    (0..r).map(|i| a[i * r + i]).sum()
}

pub fn frobenius(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_dmatrix(a: &[C64], r: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(r, r, a)
}

pub fn from_dmatrix(m: &DMatrix<C64>) -> Vec<C64> {
    let r = m.nrows();
    let mut out = vec![ZERO; r * r];
    for i in 0..r {
        for j in 0..r {
            out[i * r + j] = m[(i, j)];
        }
    }
    out
}

pub fn inverse(a: &[C64], r: usize) -> Option<Vec<C64>> {
    match r {
        1 => {
            if a[0] == ZERO {
                None
            } else {
                Some(vec![ONE / a[0]])
            }
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            if det == ZERO {
                None
            } else {
                Some(vec![a[3] / det, -a[1] / det, -a[2] / det, a[0] / det])
            }
        }
        _ => to_dmatrix(a, r).try_inverse().map(|m| from_dmatrix(&m)),
    }
}

/// Eigen-decomposition of a hermitian matrix: ascending eigenvalues and the
/// unitary whose columns are the eigenvectors.
pub fn hermitian_eigen(a: &[C64], r: usize) -> (Vec<f64>, DMatrix<C64>) {
    jacobi_eigen(&to_dmatrix(a, r))
}

/// Cyclic Jacobi for a hermitian matrix. Unlike the QR-based solver it keeps
/// eigenvectors accurate when an off-diagonal entry is tiny compared with the
/// spectral gap, which is the usual state of a nearly converged metric.
pub fn jacobi_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let k = m.nrows();
    let mut a = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v = DMatrix::<C64>::identity(k, k);
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let b = a[(p, q)].norm();
                if b <= f64::EPSILON * 1e-3 * (a[(p, p)].re.abs() + a[(q, q)].re.abs()) || b == 0.0 {
                    continue;
                }
                rotated = true;
                let u = a[(p, q)] / b;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * b);
                let t = if tau == 0.0 { 1.0 } else { tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A ← A J, V ← V J
                for mat in [&mut a, &mut v] {
                    for i in 0..k {
                        let (xp, xq) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = xp * c - xq * u.conj() * s;
                        mat[(i, q)] = xp * u * s + xq * c;
                    }
                }
                // A ← J† A
                for j in 0..k {
                    let (xp, xq) = (a[(p, j)], a[(q, j)]);
                    a[(p, j)] = xp * c - xq * u * s;
                    a[(q, j)] = xp * u.conj() * s + xq * c;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let vals = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vecs = DMatrix::zeros(k, k);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &v.column(i));
    }
    (vals, vecs)
}

/// `f(a)` for hermitian `a`, applying `f` to the spectrum.
pub fn hermitian_function(a: &[C64], r: usize, f: impl Fn(f64) -> f64) -> Vec<C64> {
    if r == 1 {
        return vec![C64::new(f(a[0].re), 0.0)];
    }
    let (vals, u) = hermitian_eigen(a, r);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        r,
        vals.iter().map(|&v| C64::new(f(v), 0.0)),
    ));
    from_dmatrix(&(&u * d * u.adjoint()))
}

/// Lower-triangular Cholesky factor `L` with `a = L L†`.
pub fn cholesky(a: &[C64], r: usize) -> Option<Vec<C64>> {
    if r == 1 {
        return if a[0].re > 0.0 {
            Some(vec![C64::new(a[0].re.sqrt(), 0.0)])
        } else {
            None
        };
    }
    to_dmatrix(a, r).cholesky().map(|c| from_dmatrix(&c.l()))
}

/// Dense solve of a small hermitian generalized eigenproblem `A v = μ B v`
/// with `B` positive definite. Returns ascending eigenvalues and
/// `B`-orthonormal eigenvectors as columns.
pub fn generalized_hermitian_eigen(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<(Vec<f64>, DMatrix<C64>)> {
    let chol = b.clone().cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let c = &linv * a * linv.adjoint();
    let (vals, vecs) = jacobi_eigen(&c);
    Some((vals, linv.adjoint() * vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inverse_matches_identity() {
        let a = vec![c(2.0, 0.0), c(0.5, 1.0), c(-0.3, 0.2), c(1.0, 0.0), c(0.0, 1.0), c(0.4, 0.0), c(1.0, 1.0), c(0.0, 0.0), c(3.0, 0.0)];
        let inv = inverse(&a, 3).unwrap();
        let p = mul(&a, &inv, 3);
        let id = identity(3);
        assert!(p.iter().zip(&id).all(|(x, y)| (x - y).norm() < 1e-13));
    }

    #[test]
    fn hermitian_function_exp_log_round_trip() {
        let h = vec![c(2.0, 0.0), c(0.3, -0.4), c(0.3, 0.4), c(1.5, 0.0)];
        let lg = hermitian_function(&h, 2, f64::ln);
        let back = hermitian_function(&lg, 2, f64::exp);
        assert!(h.iter().zip(&back).all(|(x, y)| (x - y).norm() < 1e-13));
    }

    #[test]
    fn inverse_accurate_with_tiny_off_diagonal() {
        let h = vec![c(0.9675164670895576, 0.0), c(7.294648743868832e-9, -1.7159592425212073e-9), c(7.294648743868832e-9, 1.7159592425212073e-9), c(1.0335741395783757, 0.0)];
        let inv = hermitian_function(&h, 2, |v| 1.0 / v);
        let p = mul(&h, &inv, 2);
        let id = identity(2);
        assert!(p.iter().zip(&id).all(|(x, y)| (x - y).norm() < 1e-15), "{p:?}");
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = vec![c(2.0, 0.0), c(0.5, 1.0), c(-0.3, 0.2), c(0.5, -1.0), c(1.0, 0.0), c(0.4, 0.1), c(-0.3, -0.2), c(0.4, -0.1), c(3.0, 0.0)];
        let (vals, u) = hermitian_eigen(&a, 3);
        let m = to_dmatrix(&a, 3);
        let d = u.adjoint() * &m * &u;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { C64::new(vals[i], 0.0) } else { ZERO };
                assert!((d[(i, j)] - want).norm() < 1e-14);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cholesky_reconstructs() {
        let h = vec![c(2.0, 0.0), c(0.3, -0.4), c(0.3, 0.4), c(1.5, 0.0)];
        let l = cholesky(&h, 2).unwrap();
        let back = mul(&l, &dagger(&l, 2), 2);
        assert!(h.iter().zip(&back).all(|(x, y)| (x - y).norm() < 1e-14));
    }
}
