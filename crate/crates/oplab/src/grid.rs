//! Grid sampling model of L^2 on [0, l]: uniform nodes, trapezoid weights,
//! weighted adjoints and norms, and projection onto subintervals.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matfun::CMat;
use crate::operators::StructuredOperator;

/// Uniform partition of [0, l] into `n` panels with trapezoid weights.
#[derive(Debug, Clone)]
pub struct Grid {
    pub l: f64,
    pub n: usize,
    pub h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.l == other.l
    }
}

pub fn make_grid(l: f64, n: usize) -> Result<Grid> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidSpec(format!("grid length must be positive, got {l}")));
    }
    if n < 2 {
        return Err(Error::InvalidSpec(format!("grid needs at least 2 panels, got {n}")));
    }
    let h = l / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let mut weights = vec![h; n + 1];
    weights[0] = 0.5 * h;
    weights[n] = 0.5 * h;
    Ok(Grid { l, n, h, nodes, weights })
}

impl Grid {
    pub fn npoints(&self) -> usize {
        self.n + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Subgrid over [0, x_r] sharing the node set (and the exact same h).
    pub fn prefix(&self, r_index: usize) -> Result<Grid> {
        if r_index == 0 || r_index > self.n {
            return Err(Error::InvalidSpec(format!(
                "prefix index {r_index} out of range 1..={}",
                self.n
            )));
        }
        let nodes: Vec<f64> = self.nodes[..=r_index].to_vec();
        let mut weights = vec![self.h; r_index + 1];
        weights[0] = 0.5 * self.h;
        weights[r_index] = 0.5 * self.h;
        Ok(Grid { l: self.nodes[r_index], n: r_index, h: self.h, nodes, weights })
    }
}

/// A block matrix acting on grid samples of C^block valued functions.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub block: usize,
    pub matrix: CMat,
}

impl DiscreteOperator {
    pub fn new(grid: Grid, block: usize, matrix: CMat) -> Result<Self> {
        let dim = grid.npoints() * block;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch(format!(
                "operator matrix is {}x{}, grid expects {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DiscreteOperator { grid, block, matrix })
    }

    pub fn identity(grid: Grid, block: usize) -> Self {
        let dim = grid.npoints() * block;
        DiscreteOperator { grid, block, matrix: CMat::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.grid.npoints() * self.block
    }

    /// Trapezoid weight attached to flat row/column index.
    pub fn flat_weight(&self, flat: usize) -> f64 {
        self.grid.weight(flat / self.block)
    }

    pub fn apply(&self, f: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * f
    }

    pub fn compose(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        self.check_compatible(other)?;
        DiscreteOperator::new(self.grid.clone(), self.block, &self.matrix * &other.matrix)
    }

    pub fn check_compatible(&self, other: &DiscreteOperator) -> Result<()> {
        if self.grid != other.grid || self.block != other.block {
            return Err(Error::ShapeMismatch(
                "operators live on different grids or block sizes".into(),
            ));
        }
        Ok(())
    }
}

/// Adjoint with respect to the weighted inner product sum_i w_i g(x_i)^H f(x_i).
pub fn weighted_adjoint(op: &DiscreteOperator) -> DiscreteOperator {
    let dim = op.dim();
    let mut out = CMat::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            let scale = op.flat_weight(j) / op.flat_weight(i);
            out[(i, j)] = op.matrix[(j, i)].conj() * scale;
        }
    }
    DiscreteOperator { grid: op.grid.clone(), block: op.block, matrix: out }
}

/// Weighted inner product of two sample vectors.
pub fn weighted_inner(
    grid: &Grid,
    block: usize,
    f: &DVector<Complex64>,
    g: &DVector<Complex64>,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.npoints() {
        let w = grid.weight(i);
        for b in 0..block {
            let idx = i * block + b;
            acc += g[idx].conj() * f[idx] * w;
        }
    }
    acc
}

/// Similarity W^{1/2} M W^{-1/2}; Hermitian exactly when M is weighted
/// self-adjoint, and with the same spectrum as M.
pub fn weighted_similarity(op: &DiscreteOperator) -> CMat {
    let dim = op.dim();
    let mut out = op.matrix.clone();
    for j in 0..dim {
        for i in 0..dim {
            let scale = (op.flat_weight(i) / op.flat_weight(j)).sqrt();
            out[(i, j)] *= scale;
        }
    }
    out
}

/// Discrete L^2 operator norm: spectral norm of W^{1/2} M W^{-1/2}.
pub fn op_norm(op: &DiscreteOperator) -> f64 {
    linalg::spectral_norm(&weighted_similarity(op))
}

/// Frobenius norm of the raw matrix. Diagnostic only; not the operator norm.
pub fn frobenius_norm(op: &DiscreteOperator) -> f64 {
    op.matrix.norm()
}

/// Restriction of a structured operator to the subgrid [0, x_r]: the nested
/// kernel samples are reused bit for bit and the matrix is reassembled with
/// the subgrid's own trapezoid weights. Discrete model of P_r S P_r^*.
pub fn project_operator(op: &StructuredOperator, r_index: usize) -> Result<StructuredOperator> {
    if r_index == 0 || r_index > op.base.grid.n {
        return Err(Error::InvalidSpec(format!(
            "projection index {r_index} out of range 1..={}",
            op.base.grid.n
        )));
    }
    let sub = op.base.grid.prefix(r_index)?;
    let np = r_index + 1;
    let mut samples = Vec::with_capacity(np * np);
    for i in 0..np {
        for j in 0..np {
            samples.push(op.kernel_sample(i, j).clone());
        }
    }
    StructuredOperator::assemble(sub, op.mult_part.clone(), samples, op.variant)
}
