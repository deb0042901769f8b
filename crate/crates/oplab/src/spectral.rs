//! Positivity verification, inversion, and the triangular factorization of
//! the inverse with its grid-nesting test.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{
    make_grid, op_norm, project_operator, weighted_adjoint, weighted_similarity, DiscreteOperator,
    Grid,
};
use crate::linalg;
use crate::matfun::{CMat, MatrixFunction};
use crate::operators::{build_s, StructuredOperator, Variant};

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Hermiticity precondition for eigenvalue computations.
pub const HERMITICITY_PRECONDITION: f64 = 1e-8;
/// Smallest |eigenvalue| accepted before inversion.
pub const MIN_EIG_THRESHOLD: f64 = 1e-10;
/// Tolerance on || mult_part - I || for the factorization hypothesis
/// phi(0) = 0.
pub const PHI0_TOL: f64 = 1e-12;

/// Lower-triangular factor E = I + causal part with E* E = S^{-1} in the
/// weighted sense.
#[derive(Debug, Clone)]
pub struct TriangularFactor {
    pub grid: Grid,
    pub block: usize,
    /// Block lower-triangular matrix with diagonal blocks I + O(h).
    pub e_matrix: CMat,
    /// max_i || E_ii - I ||.
    pub diag_defect: f64,
    /// || E* E - S^{-1} || / || S^{-1} || in the weighted operator norm.
    pub reconstruction_residual: f64,
}

impl TriangularFactor {
    /// Extracted kernel sample E(x_i, x_j) = E_ij / w_j for i > j. The
    /// diagonal sample (i == j) is reported as (E_ii - I) / w_i but carries
    /// the O(h) diagonal ambiguity of triangular Nystrom factors and is
    /// excluded from nesting comparisons.
    pub fn kernel_sample(&self, i: usize, j: usize) -> CMat {
        let m = self.block;
        let w = self.grid.weight(j);
        let blk = self.e_matrix.view((i * m, j * m), (m, m));
        if i == j {
            (blk - CMat::identity(m, m)) / real(w)
        } else {
            CMat::from(blk) / real(w)
        }
    }
}

/// Positivity of the radius family S_r, plus optional shifted-family results.
#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub r_values: Vec<f64>,
    pub min_eigs: Vec<f64>,
    /// Whether I - phi(0) phi(0)^H is strictly positive (the hypothesis of
    /// the family-positivity statement).
    pub contraction_holds: bool,
    pub contraction_min_eig: f64,
    pub epsilon_results: Option<Vec<(f64, f64)>>,
}

impl PositivityReport {
    pub fn all_positive(&self) -> bool {
        !self.min_eigs.is_empty() && self.min_eigs.iter().all(|&e| e > 0.0)
    }
}

/// Relative Hermiticity defect of the weighted similarity of S.
pub fn hermiticity_defect(s: &StructuredOperator) -> f64 {
    linalg::hermiticity_defect(&weighted_similarity(&s.base))
}

fn eigenvalues_checked(op: &DiscreteOperator) -> Result<Vec<f64>> {
    let h = weighted_similarity(op);
    let defect = linalg::hermiticity_defect(&h);
    if defect > HERMITICITY_PRECONDITION {
        return Err(Error::Precondition(format!(
            "operator is not Hermitian in the weighted product (defect {defect:.3e})"
        )));
    }
    Ok(linalg::hermitian_eigenvalues(&h))
}

/// Smallest eigenvalue of the weighted Hermitian similarity of S.
pub fn min_eigenvalue(s: &StructuredOperator) -> Result<f64> {
    min_eigenvalue_op(&s.base)
}

pub fn min_eigenvalue_op(op: &DiscreteOperator) -> Result<f64> {
    let eigs = eigenvalues_checked(op)?;
    Ok(eigs[0])
}

/// All eigenvalues of the weighted Hermitian similarity, ascending.
pub fn operator_eigenvalues(op: &DiscreteOperator) -> Result<Vec<f64>> {
    eigenvalues_checked(op)
}

/// Smallest eigenvalue of I - phi(0) phi(0)^H.
pub fn contraction_min_eig(fun: &MatrixFunction) -> f64 {
    let phi0 = fun.phi0();
    let m2 = fun.m2();
    let mat = CMat::identity(m2, m2) - phi0 * phi0.adjoint();
    let eigs = linalg::hermitian_eigenvalues(&mat);
    eigs[0]
}

/// Minimum eigenvalues of the operators on [0, r] for a node-aligned ladder
/// of radii. The full operator is built once and projected; kernel nesting
/// makes the projection exact. Skipped (empty ladder) when the contraction
/// hypothesis fails.
pub fn positivity_family(
    fun: &MatrixFunction,
    l: f64,
    num_radii: usize,
    n_base: usize,
) -> Result<PositivityReport> {
    if num_radii == 0 {
        return Err(Error::InvalidSpec("need at least one radius".into()));
    }
    let contraction_min = contraction_min_eig(fun);
    if contraction_min <= 0.0 {
        return Ok(PositivityReport {
            r_values: Vec::new(),
            min_eigs: Vec::new(),
            contraction_holds: false,
            contraction_min_eig: contraction_min,
            epsilon_results: None,
        });
    }

    let grid = make_grid(l, n_base)?;
    let full = build_s(fun, &grid, Variant::SelfAdjoint)?;
    let mut r_values = Vec::with_capacity(num_radii);
    let mut min_eigs = Vec::with_capacity(num_radii);
    for k in 1..=num_radii {
        let idx_exact = k as f64 * n_base as f64 / num_radii as f64;
        let idx = (idx_exact.round() as usize).clamp(2, n_base);
        let projected = project_operator(&full, idx)?;
        r_values.push(grid.node(idx));
        min_eigs.push(min_eigenvalue(&projected)?);
    }
    Ok(PositivityReport {
        r_values,
        min_eigs,
        contraction_holds: true,
        contraction_min_eig: contraction_min,
        epsilon_results: None,
    })
}

/// Minimum eigenvalues of the shifted family S - (1 - eps) I for the skew
/// variant. The shift identity makes this a single eigensolve.
pub fn epsilon_family_check(
    fun: &MatrixFunction,
    grid: &Grid,
    epsilons: &[f64],
) -> Result<Vec<(f64, f64)>> {
    for &eps in epsilons {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidSpec(format!("epsilon {eps} outside (0, 1]")));
        }
    }
    let s = build_s(fun, grid, Variant::Skew)?;
    let base = min_eigenvalue(&s)?;
    Ok(epsilons.iter().map(|&eps| (eps, base - (1.0 - eps))).collect())
}

/// Matrix inverse of S with the inversion residual || S S^{-1} - I ||.
pub fn invert(s: &StructuredOperator) -> Result<(DiscreteOperator, f64)> {
    let eigs = eigenvalues_checked(&s.base)?;
    let min_abs = eigs.iter().fold(f64::INFINITY, |acc, &e| acc.min(e.abs()));
    if min_abs < MIN_EIG_THRESHOLD {
        return Err(Error::Singular { min_eig: min_abs, threshold: MIN_EIG_THRESHOLD });
    }
    let inv = s
        .base
        .matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular { min_eig: min_abs, threshold: MIN_EIG_THRESHOLD })?;
    let dim = s.base.dim();
    let residual_mat = &s.base.matrix * &inv - CMat::identity(dim, dim);
    let residual = op_norm(&DiscreteOperator {
        grid: s.base.grid.clone(),
        block: s.base.block,
        matrix: residual_mat,
    });
    let op = DiscreteOperator { grid: s.base.grid.clone(), block: s.base.block, matrix: inv };
    Ok((op, residual))
}

/// Reversed-order Cholesky: lower-triangular factor of g = e^H e, computed
/// from the bottom-right corner upward. The standard top-left Cholesky would
/// produce an upper factor instead.
pub fn reversed_cholesky(g: &CMat) -> Result<CMat> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::ShapeMismatch("reversed Cholesky needs a square matrix".into()));
    }
    let mut e = CMat::zeros(n, n);
    for i in (0..n).rev() {
        let mut v = g[(i, i)].re;
        for k in (i + 1)..n {
            v -= e[(k, i)].norm_sqr();
        }
        if !(v > 0.0) {
            return Err(Error::NotPositive(format!(
                "pivot {v:.3e} at index {i} during reversed Cholesky"
            )));
        }
        let d = v.sqrt();
        e[(i, i)] = real(d);
        for j in 0..i {
            let mut acc = g[(i, j)];
            for k in (i + 1)..n {
                acc -= e[(k, i)].conj() * e[(k, j)];
            }
            e[(i, j)] = acc / d;
        }
    }
    Ok(e)
}

/// Triangular factorization of the inverse: with H the weighted Hermitian
/// similarity of S, factor H^{-1} = Etilde^H Etilde (Etilde lower) and map
/// back by E = W^{-1/2} Etilde W^{1/2}, so that E* E = S^{-1} holds for the
/// weighted adjoint E* = W^{-1} E^H W.
///
/// Requires the hypothesis phi(0) = 0, checked through the multiplication
/// part being exactly the identity.
pub fn factorize_inverse(s: &StructuredOperator) -> Result<TriangularFactor> {
    let m2 = s.base.block;
    let eye = CMat::identity(m2, m2);
    if (&s.mult_part - &eye).norm() > PHI0_TOL {
        return Err(Error::Precondition(
            "factorization requires phi(0) = 0 (multiplication part must be the identity)".into(),
        ));
    }

    let h = linalg::hermitize(&weighted_similarity(&s.base));
    let eigs = linalg::hermitian_eigenvalues(&h);
    let min_abs = eigs.iter().fold(f64::INFINITY, |acc, &e| acc.min(e.abs()));
    if min_abs < MIN_EIG_THRESHOLD {
        return Err(Error::Singular { min_eig: min_abs, threshold: MIN_EIG_THRESHOLD });
    }
    let g = h
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular { min_eig: min_abs, threshold: MIN_EIG_THRESHOLD })?;
    let g = linalg::hermitize(&g);
    let e_tilde = reversed_cholesky(&g)?;

    // E = W^{-1/2} Etilde W^{1/2}
    let dim = s.base.dim();
    let mut e_matrix = e_tilde;
    for j in 0..dim {
        for i in 0..dim {
            let scale = (s.base.flat_weight(j) / s.base.flat_weight(i)).sqrt();
            e_matrix[(i, j)] *= scale;
        }
    }

    let np = s.base.grid.npoints();
    let mut diag_defect: f64 = 0.0;
    for i in 0..np {
        let blk = e_matrix.view((i * m2, i * m2), (m2, m2));
        diag_defect = diag_defect.max((blk - &eye).norm());
    }

    let e_op = DiscreteOperator { grid: s.base.grid.clone(), block: m2, matrix: e_matrix };
    let (inv, _) = invert(s)?;
    let e_star = weighted_adjoint(&e_op);
    let recon = &e_star.matrix * &e_op.matrix - &inv.matrix;
    let reconstruction_residual = op_norm(&DiscreteOperator {
        grid: s.base.grid.clone(),
        block: m2,
        matrix: recon,
    }) / op_norm(&inv);

    Ok(TriangularFactor {
        grid: s.base.grid.clone(),
        block: m2,
        e_matrix: e_op.matrix,
        diag_defect,
        reconstruction_residual,
    })
}

/// Largest deviation between factor kernel samples computed on [0, l] and on
/// [0, l_hat] with the same spacing h, over the shared strictly-lower pairs.
/// The diagonal is excluded.
pub fn nesting_defect(fun: &MatrixFunction, l: f64, l_hat: f64, h: f64) -> Result<f64> {
    if !(l_hat < l) || !(l_hat > 0.0) {
        return Err(Error::InvalidSpec("need 0 < l_hat < l".into()));
    }
    if l > fun.l() * (1.0 + 1e-12) {
        return Err(Error::InvalidSpec("function is not defined on all of [0, l]".into()));
    }
    let n = l / h;
    let n_hat = l_hat / h;
    if (n - n.round()).abs() > 1e-9 || (n_hat - n_hat.round()).abs() > 1e-9 {
        return Err(Error::InvalidSpec("l and l_hat must be multiples of h".into()));
    }
    let n = n.round() as usize;
    let n_hat = n_hat.round() as usize;

    // the same function restricted to the shorter interval
    let factor_on = |length: f64, panels: usize| -> Result<TriangularFactor> {
        let grid = make_grid(length, panels)?;
        let s = build_s(fun, &grid, Variant::SelfAdjoint)?;
        factorize_inverse(&s)
    };
    let big = factor_on(l, n)?;
    let small = factor_on(l_hat, n_hat)?;

    let mut defect: f64 = 0.0;
    for i in 0..=n_hat {
        for j in 0..i {
            let d = (big.kernel_sample(i, j) - small.kernel_sample(i, j)).norm();
            defect = defect.max(d);
        }
    }
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::{builtin_families, make_family, Family, MatrixFunctionSpec};

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, real(v))
    }

    fn scalar_family(family: Family, coeffs: Vec<f64>) -> MatrixFunction {
        make_family(
            &MatrixFunctionSpec::new(family, 1, 1)
                .with_coefficients(coeffs.into_iter().map(scalar).collect()),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn hermiticity_and_min_eig_zero_family() {
        let f = scalar_family(Family::Zero, vec![]);
        let g = make_grid(1.0, 16).unwrap();
        let s = build_s(&f, &g, Variant::SelfAdjoint).unwrap();
        assert_eq!(hermiticity_defect(&s), 0.0);
        assert!((min_eigenvalue(&s).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn hermiticity_defect_small_for_families() {
        let g = make_grid(1.0, 24).unwrap();
        for (name, f) in builtin_families(1.0) {
            for variant in [Variant::SelfAdjoint, Variant::Skew] {
                let s = build_s(&f, &g, variant).unwrap();
                let d = hermiticity_defect(&s);
                assert!(d <= 1e-12, "{name}: defect {d:.3e}");
            }
        }
    }

    #[test]
    fn skew_linear_is_at_least_identity() {
        let f = scalar_family(Family::Linear, vec![1.0]);
        let g = make_grid(1.0, 64).unwrap();
        let s = build_s(&f, &g, Variant::Skew).unwrap();
        let e = min_eigenvalue(&s).unwrap();
        assert!(e >= 1.0 - 1e-8, "min eig {e}");
    }

    #[test]
    fn selfadjoint_linear_min_eig_matches_sturm_liouville_oracle() {
        // eigenfunctions of the min(x, t) kernel solve -u'' = u / mu with
        // u(0) = 0, u'(1) = 0, so mu_k = ((k - 1/2) pi)^{-2}
        let f = scalar_family(Family::Linear, vec![1.0]);
        let g = make_grid(1.0, 128).unwrap();
        let s = build_s(&f, &g, Variant::SelfAdjoint).unwrap();
        let expected = 1.0 - 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let got = min_eigenvalue(&s).unwrap();
        assert!((got - expected).abs() <= 5e-3, "got {got}, expected {expected}");
    }

    #[test]
    fn positivity_family_ladder() {
        let f = scalar_family(Family::Zero, vec![]);
        let rep = positivity_family(&f, 1.0, 4, 32).unwrap();
        assert!(rep.contraction_holds);
        assert!(rep.min_eigs.iter().all(|&e| (e - 1.0).abs() < 1e-12));

        let f = scalar_family(Family::Polynomial, vec![0.4, 1.0]);
        let rep = positivity_family(&f, 1.0, 8, 64).unwrap();
        assert!(rep.contraction_holds);
        assert!((rep.contraction_min_eig - 0.84).abs() < 1e-12);
        assert!(rep.all_positive(), "min eigs {:?}", rep.min_eigs);

        let f = scalar_family(Family::Constant, vec![1.2]);
        let rep = positivity_family(&f, 1.0, 4, 16).unwrap();
        assert!(!rep.contraction_holds);
        assert!(rep.min_eigs.is_empty());
    }

    #[test]
    fn projected_min_eig_matches_direct_build() {
        let f = scalar_family(Family::Polynomial, vec![0.4, 1.0]);
        let g = make_grid(1.0, 32).unwrap();
        let full = build_s(&f, &g, Variant::SelfAdjoint).unwrap();
        let projected = project_operator(&full, 16).unwrap();
        let direct = build_s(&f, &make_grid(0.5, 16).unwrap(), Variant::SelfAdjoint).unwrap();
        // kernel nesting is exact, so the matrices agree to the bit
        assert_eq!(projected.base.matrix, direct.base.matrix);
        let a = min_eigenvalue(&projected).unwrap();
        let b = min_eigenvalue(&direct).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn epsilon_family_examples() {
        let zero = scalar_family(Family::Zero, vec![]);
        let g = make_grid(1.0, 16).unwrap();
        let res = epsilon_family_check(&zero, &g, &[0.25]).unwrap();
        assert!((res[0].1 - 0.25).abs() < 1e-12);

        let lin = scalar_family(Family::Linear, vec![1.0]);
        let g = make_grid(1.0, 64).unwrap();
        let res = epsilon_family_check(&lin, &g, &[0.5, 1.0]).unwrap();
        assert!(res[0].1 >= 0.5 - 1e-8);
        // eps = 1 is the unshifted operator
        let s = build_s(&lin, &g, Variant::Skew).unwrap();
        assert!((res[1].1 - min_eigenvalue(&s).unwrap()).abs() < 1e-14);

        assert!(epsilon_family_check(&lin, &g, &[0.0]).is_err());
        assert!(epsilon_family_check(&lin, &g, &[1.2]).is_err());
    }

    #[test]
    fn shift_identity_matches_direct_eigensolve() {
        let f = scalar_family(Family::Linear, vec![1.0]);
        let g = make_grid(1.0, 32).unwrap();
        let s = build_s(&f, &g, Variant::Skew).unwrap();
        let eps = 0.3;
        let shifted = epsilon_family_check(&f, &g, &[eps]).unwrap()[0].1;
        let dim = s.base.dim();
        let direct_mat = &s.base.matrix - CMat::identity(dim, dim) * real(1.0 - eps);
        let direct = min_eigenvalue_op(&DiscreteOperator {
            grid: g.clone(),
            block: 1,
            matrix: direct_mat,
        })
        .unwrap();
        assert!((shifted - direct).abs() <= 1e-10, "shift {shifted} vs direct {direct}");
    }

    #[test]
    fn invert_examples() {
        let g = make_grid(1.0, 16).unwrap();
        let zero = scalar_family(Family::Zero, vec![]);
        let s = build_s(&zero, &g, Variant::SelfAdjoint).unwrap();
        let (inv, res) = invert(&s).unwrap();
        assert!((inv.matrix.clone() - CMat::identity(17, 17)).norm() < 1e-13);
        assert!(res <= 1e-12);

        let c = scalar_family(Family::Constant, vec![0.4]);
        let s = build_s(&c, &g, Variant::SelfAdjoint).unwrap();
        let (inv, _) = invert(&s).unwrap();
        assert!((inv.matrix.clone() - CMat::identity(17, 17) / real(0.84)).norm() < 1e-12);

        let lin = scalar_family(Family::Linear, vec![1.0]);
        let s = build_s(&lin, &g, Variant::Skew).unwrap();
        let (inv, _) = invert(&s).unwrap();
        let eigs = operator_eigenvalues(&inv).unwrap();
        assert!(eigs.iter().all(|&e| e > 0.0 && e <= 1.0 + 1e-10), "{eigs:?}");
    }

    #[test]
    fn reversed_cholesky_reconstructs() {
        // random Hermitian positive definite via B^H B + I
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        let b = CMat::from_fn(6, 6, |_, _| Complex64::new(unit(), unit()));
        let g = b.adjoint() * &b + CMat::identity(6, 6);
        let e = reversed_cholesky(&g).unwrap();
        assert!((e.adjoint() * &e - &g).norm() <= 1e-12 * g.norm());
        // lower triangular with positive diagonal
        for i in 0..6 {
            assert!(e[(i, i)].re > 0.0);
            for j in (i + 1)..6 {
                assert_eq!(e[(i, j)], real(0.0));
            }
        }
        // agrees with the flip of the standard Cholesky
        let n = 6;
        let flip = |m: &CMat| CMat::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)]);
        let lower = nalgebra::Cholesky::new(flip(&g)).unwrap().l();
        let alt = flip(&lower.adjoint().into());
        assert!((&alt - &e).norm() <= 1e-11 * e.norm());

        let not_pd = CMat::identity(3, 3) * real(-1.0);
        assert!(matches!(reversed_cholesky(&not_pd), Err(Error::NotPositive(_))));
    }

    #[test]
    fn factorize_zero_family_is_identity() {
        let g = make_grid(1.0, 16).unwrap();
        let zero = scalar_family(Family::Zero, vec![]);
        let s = build_s(&zero, &g, Variant::SelfAdjoint).unwrap();
        let fac = factorize_inverse(&s).unwrap();
        assert!((fac.e_matrix.clone() - CMat::identity(17, 17)).norm() < 1e-13);
        assert!(fac.diag_defect < 1e-13);
        for i in 0..17 {
            for j in 0..i {
                assert!(fac.kernel_sample(i, j).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn factorize_linear_family() {
        let g = make_grid(1.0, 64).unwrap();
        let lin = scalar_family(Family::Linear, vec![1.0]);
        let s = build_s(&lin, &g, Variant::SelfAdjoint).unwrap();
        let fac = factorize_inverse(&s).unwrap();
        assert!(fac.reconstruction_residual <= 1e-10, "residual {:.3e}", fac.reconstruction_residual);
        assert!(fac.diag_defect <= 2.0 * g.h, "diag defect {:.3e}", fac.diag_defect);
        // deterministic rerun is bit-identical
        let again = factorize_inverse(&s).unwrap();
        assert_eq!(fac.e_matrix, again.e_matrix);
    }

    #[test]
    fn factorize_rejects_nonvanishing_phi0() {
        let g = make_grid(1.0, 8).unwrap();
        let c = scalar_family(Family::Constant, vec![0.4]);
        let s = build_s(&c, &g, Variant::SelfAdjoint).unwrap();
        assert!(matches!(factorize_inverse(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn nesting_defect_examples() {
        let zero = scalar_family(Family::Zero, vec![]);
        assert!(nesting_defect(&zero, 1.0, 0.5, 1.0 / 16.0).unwrap() < 1e-12);

        let lin = scalar_family(Family::Linear, vec![1.0]);
        let h = 1.0 / 32.0;
        let d = nesting_defect(&lin, 1.0, 0.5, h).unwrap();
        assert!(d > 0.0 && d <= 4.0 * h, "defect {d:.3e} at h {h:.3e}");
        let d2 = nesting_defect(&lin, 1.0, 0.5, h / 2.0).unwrap();
        assert!(d2 < d, "defect did not shrink: {d:.3e} -> {d2:.3e}");
        assert!(nesting_defect(&lin, 0.5, 1.0, h).is_err());
        assert!(nesting_defect(&lin, 1.0, 0.37, h).is_err());
    }
}
