//! Dense helpers on complex matrices, routed through the real embedding
//! [[X, -Y], [Y, X]] so the well-tested real eigen/SVD paths do the work.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Real 2n x 2n embedding of a complex n x n matrix. Eigen/singular values of
/// the embedding are those of the original, each doubled.
fn embed(m: &CMat) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::<f64>::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.iter().all(|z| z.norm_sqr() == 0.0) {
        return 0.0;
    }
    embed(m).singular_values().max()
}

/// Eigenvalues of a Hermitian matrix, ascending. The input is symmetrized
/// first; callers are expected to have checked the Hermiticity defect.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = hermitize(m);
    let emb = embed(&h);
    let sym = (&emb + emb.transpose()) * 0.5;
    let mut eigs: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // embedding doubles every eigenvalue; keep one copy of each pair
    eigs.into_iter().step_by(2).collect()
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Relative deviation of m from its own adjoint, measured spectrally.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let scale = spectral_norm(m);
    if scale == 0.0 {
        return 0.0;
    }
    spectral_norm(&(m - m.adjoint())) / scale
}
