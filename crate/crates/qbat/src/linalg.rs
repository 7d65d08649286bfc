//! Dense complex linear algebra used throughout the crate: Hermitian
//! eigendecomposition, QR factorization, and a few small helpers.
//!
//! Everything here is deterministic scalar code: identical inputs give
//! bit-identical outputs regardless of thread count or platform features.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Absolute tolerance for treating a matrix as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |a[i][j] - conj(a[j][i])| = {deviation:e}")]
    NonHermitian { deviation: f64 },
    #[error("Jacobi eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix is empty")]
    Empty,
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, C64::new(1.0, 0.0)))
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.t().to_owned();
    out.mapv_inplace(|z| z.conj());
    out
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().iter().sum()
}

/// Largest deviation from Hermiticity, max |a[i][j] - conj(a[j][i])|.
pub fn hermiticity_deviation(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order together with the unitary whose
/// columns are the matching eigenvectors, so `m = V diag(w) V^dag`. Ties are
/// left in the order the solver produced them (stable sort on the value).
///
/// Rejects inputs whose Hermiticity deviation exceeds [`HERMITICITY_TOL`].
pub fn eig_hermitian(m: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>), LinalgError> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(LinalgError::Empty);
    }
    let dev = hermiticity_deviation(m);
    if dev > HERMITICITY_TOL {
        return Err(LinalgError::NonHermitian { deviation: dev });
    }
    let n = rows;

    // Work on the exactly-Hermitian average so roundoff in the input cannot
    // leak into complex eigenvalues.
    let mut a = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        a[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    let mut v = identity(n);
    if n == 1 {
        return Ok((vec![a[(0, 0)].re], v));
    }

    let scale = a.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(f64::MIN_POSITIVE);
    let stop = scale * 1e-15;

    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= stop {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= stop * 1e-2 {
                    continue;
                }
                let phase = apq / mag; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_pq = s * phase; // goes in J[p][q]

                // A <- J^dag A J with J[p][p]=c, J[p][q]=s*e^{i phi},
                // J[q][p]=-s*e^{-i phi}, J[q][q]=c.
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = c * akp - s_pq.conj() * akq;
                    let new_kq = s_pq * akp + c * akq;
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp.conj();
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq.conj();
                }
                let new_pp = c * c * app + s * s * aqq - 2.0 * c * s * mag;
                let new_qq = s * s * app + c * c * aqq + 2.0 * c * s * mag;
                a[(p, p)] = C64::new(new_pp, 0.0);
                a[(q, q)] = C64::new(new_qq, 0.0);
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s_pq.conj() * vkq;
                    v[(k, q)] = s_pq * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // The sweep budget may run out with the off-diagonal already at the
        // target, so re-check before giving up.
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off > stop {
            return Err(LinalgError::NoConvergence(MAX_JACOBI_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Array2::<C64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    Ok((eigenvalues, vectors))
}

/// QR factorization by Householder reflections, `a = Q R` with Q unitary and
/// R upper triangular.
pub fn qr(a: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>), LinalgError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(LinalgError::Empty);
    }
    let n = rows;
    let mut r = a.clone();
    let mut q = identity(n);
    for k in 0..n {
        let mut norm_x = 0.0f64;
        for i in k..n {
            norm_x += r[(i, k)].norm_sqr();
        }
        let norm_x = norm_x.sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let sign = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -sign * norm_x;
        // v = x - alpha e1
        let mut v = vec![C64::new(0.0, 0.0); n - k];
        for i in k..n {
            v[i - k] = r[(i, k)];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 <= f64::MIN_POSITIVE {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // R <- (I - beta v v^dag) R on the trailing block
        for j in k..n {
            let mut dot = C64::new(0.0, 0.0);
            for i in k..n {
                dot += v[i - k].conj() * r[(i, j)];
            }
            let f = beta * dot;
            for i in k..n {
                r[(i, j)] -= f * v[i - k];
            }
        }
        // Q <- Q (I - beta v v^dag)
        for i in 0..n {
            let mut dot = C64::new(0.0, 0.0);
            for j in k..n {
                dot += q[(i, j)] * v[j - k];
            }
            let f = beta * dot;
            for j in k..n {
                q[(i, j)] -= f * v[j - k].conj();
            }
        }
    }
    for i in 1..n {
        for j in 0..i {
            r[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, r))
}

/// Whether `a + shift*I` admits a Cholesky factorization, i.e. whether the
/// smallest eigenvalue of `a` is no less than `-shift` up to roundoff.
/// Only the lower triangle of `a` is read.
pub fn is_psd_within(a: &Array2<C64>, shift: f64) -> bool {
    let n = a.nrows();
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = a[(j, j)].re + shift;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if d < 0.0 {
            return false;
        }
        let ljj = d.sqrt();
        l[j * n + j] = C64::new(ljj, 0.0);
        if ljj == 0.0 {
            // Zero pivot: remaining column entries must also vanish for PSD.
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                if s.norm() > 1e-12 {
                    return false;
                }
                l[i * n + j] = C64::new(0.0, 0.0);
            }
            continue;
        }
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    true
}

/// max |(U^dag U - I)[i][j]|, the unitarity defect.
pub fn unitarity_deviation(u: &Array2<C64>) -> f64 {
    let n = u.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut dot = C64::new(0.0, 0.0);
            for k in 0..n {
                dot += u[(k, i)].conj() * u[(k, j)];
            }
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((dot - target).norm());
        }
    }
    dev
}
