//! Thin wrappers around faer's dense symmetric eigensolver.
//!
//! Everything spectral in this crate reduces to symmetric-definite pencils
//! (A, B) with B ≻ 0: either B is the quadrature mass (physical spectrum) or
//! the Hardy form itself (coercivity-normalized spectrum). We reduce with
//! B^{-1/2} built from B's own eigendecomposition; at n ≤ 4096 the extra
//! dense solve is cheap and avoids triangular bookkeeping.

use crate::error::{Error, Result};
use faer::{Mat, Side};

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending,
/// eigenvectors orthonormal in the columns of `vectors`.
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub fn sym_eigen(a: &Mat<f64>) -> Result<SymEig> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numerical(format!("symmetric eigensolve failed: {e:?}")))?;
    let n = a.nrows();
    let s = evd.S();
    let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
    Ok(SymEig {
        values,
        vectors: evd.U().to_owned(),
    })
}

impl SymEig {
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.vectors.nrows())
            .map(|i| self.vectors[(i, j)])
            .collect()
    }

    /// f(A) = U f(Λ) Uᵀ for a scalar function of the eigenvalues.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> Mat<f64> {
        let n = self.values.len();
        let mut scaled = Mat::zeros(n, n);
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] = self.vectors[(i, j)] * fj;
            }
        }
        &scaled * self.vectors.transpose()
    }
}

/// A^{1/2} with negative eigenvalues clamped to zero (A expected PSD up to
/// discretization noise).
pub fn psd_sqrt(eig: &SymEig) -> Mat<f64> {
    eig.apply_function(|l| if l > 0.0 { l.sqrt() } else { 0.0 })
}

/// Pseudo-inverse square root: eigenvalues below `cut` are treated as kernel.
pub fn psd_inv_sqrt(eig: &SymEig, cut: f64) -> Mat<f64> {
    eig.apply_function(|l| if l > cut { 1.0 / l.sqrt() } else { 0.0 })
}

/// Generalized symmetric-definite eigenproblem A x = λ B x with B ≻ 0.
/// Returns eigenvalues ascending and eigenvectors as columns, normalized so
/// that xᵀ B x = I. Both matrices are first equilibrated by diag(B)^{-1/2};
/// the gauge weights of the sector forms span many orders of magnitude and
/// the reduction is only stable after that rescaling.
pub fn pencil_eigen(a: &Mat<f64>, b: &Mat<f64>) -> Result<SymEig> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| b[(i, i)]).collect();
    if d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::numerical(
            "pencil mass matrix has nonpositive diagonal",
        ));
    }
    let s: Vec<f64> = d.iter().map(|&v| 1.0 / v.sqrt()).collect();
    let be = Mat::from_fn(n, n, |i, j| b[(i, j)] * s[i] * s[j]);
    let ae = Mat::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let eb = sym_eigen(&be)?;
    let floor = eb.values[n - 1].abs() * 1e-14;
    if eb.values[0] <= floor {
        return Err(Error::numerical(format!(
            "pencil mass matrix is not positive definite (equilibrated min eigenvalue {:.3e})",
            eb.values[0]
        )));
    }
    let w = eb.apply_function(|l| 1.0 / l.sqrt());
    let sm = &(&w * &ae) * &w;
    let es = sym_eigen(&sm)?;
    let mut vectors = &w * &es.vectors;
    for j in 0..n {
        for i in 0..n {
            vectors[(i, j)] *= s[i];
        }
    }
    Ok(SymEig {
        values: es.values,
        vectors,
    })
}

/// Pencil with diagonal positive mass: A x = λ diag(d) x.
pub fn diag_pencil_eigen(a: &Mat<f64>, d: &[f64]) -> Result<SymEig> {
    let n = a.nrows();
    if d.iter().any(|&v| v <= 0.0) {
        return Err(Error::numerical("diagonal mass must be positive"));
    }
    let dis: Vec<f64> = d.iter().map(|&v| 1.0 / v.sqrt()).collect();
    let s = Mat::from_fn(n, n, |i, j| a[(i, j)] * dis[i] * dis[j]);
    let es = sym_eigen(&s)?;
    let mut vectors = es.vectors;
    for j in 0..n {
        for i in 0..n {
            vectors[(i, j)] *= dis[i];
        }
    }
    Ok(SymEig {
        values: es.values,
        vectors,
    })
}

/// Symmetrize the diagonal similarity D^{-1/2} A D^{-1/2}.
pub fn diag_symmetrized(a: &Mat<f64>, d: &[f64]) -> Mat<f64> {
    let n = a.nrows();
    let dis: Vec<f64> = d.iter().map(|&v| 1.0 / v.sqrt()).collect();
    Mat::from_fn(n, n, |i, j| a[(i, j)] * dis[i] * dis[j])
}

pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    assert_eq!(n, x.len());
    let mut y = vec![0.0; m];
    for j in 0..n {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for i in 0..m {
            y[i] += col[i] * xj;
        }
    }
    y
}

pub fn matvec_t(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    assert_eq!(m, x.len());
    let mut y = vec![0.0; n];
    for j in 0..n {
        let col = a.col(j);
        let mut s = 0.0;
        for i in 0..m {
            s += col[i] * x[i];
        }
        y[j] = s;
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_asymmetry(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut scale = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i..n {
            scale = scale.max(a[(i, j)].abs());
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        asym / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> Mat<f64> {
        Mat::from_fn(n, n, |i, j| {
            1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { 2.0 } else { 0.0 }
        })
    }

    #[test]
    fn eigen_reconstructs() {
        let n = 40;
        let a = test_matrix(n);
        let e = sym_eigen(&a).unwrap();
        let back = e.apply_function(|l| l);
        for i in 0..n {
            for j in 0..n {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-10);
            }
        }
        assert!(e.values.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn pencil_recovers_simple_problem() {
        // A = diag(1, 4, 9), B = diag(1, 2, 3) -> eigenvalues 1, 2, 3
        let a = Mat::from_fn(3, 3, |i, j| if i == j { ((i + 1) * (i + 1)) as f64 } else { 0.0 });
        let b = Mat::from_fn(3, 3, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let e = pencil_eigen(&a, &b).unwrap();
        for (k, want) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((e.values[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_agrees_with_faer_mul() {
        let a = test_matrix(17);
        let x: Vec<f64> = (0..17).map(|i| (i as f64).sin()).collect();
        let y = matvec(&a, &x);
        let xm = Mat::from_fn(17, 1, |i, _| x[i]);
        let ym = &a * &xm;
        for i in 0..17 {
            assert!((y[i] - ym[(i, 0)]).abs() < 1e-12);
        }
    }
}
