//! Composite quadrature for matrix-valued integrands: trapezoid sums under
//! midpoint refinement with a Simpson/Richardson convergence check.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matfun::CMat;

const BASE_PANELS: usize = 8;
const MAX_LEVELS: usize = 16;

/// Integral over [a, b] of a matrix-valued function, refined until the
/// Simpson extrapolants of consecutive levels agree to `tol` relative.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64, rows: usize, cols: usize) -> Result<CMat>
where
    F: Fn(f64) -> CMat,
{
    if !(b - a).is_finite() {
        return Err(Error::InvalidSpec(format!("bad integration bounds [{a}, {b}]")));
    }
    if b <= a {
        return Ok(CMat::zeros(rows, cols));
    }

    // level-0 trapezoid sum on BASE_PANELS panels
    let mut panels = BASE_PANELS;
    let mut h = (b - a) / panels as f64;
    let mut trap = {
        let mut acc = (f(a) + f(b)) * Complex64::new(0.5, 0.0);
        for k in 1..panels {
            acc += f(a + k as f64 * h);
        }
        acc * Complex64::new(h, 0.0)
    };

    let mut prev_simpson: Option<CMat> = None;
    for _ in 0..MAX_LEVELS {
        // refine: add midpoints
        let mut mids = CMat::zeros(rows, cols);
        for k in 0..panels {
            mids += f(a + (k as f64 + 0.5) * h);
        }
        let finer = &trap * Complex64::new(0.5, 0.0) + mids * Complex64::new(0.5 * h, 0.0);
        let simpson =
            (&finer * Complex64::new(4.0 / 3.0, 0.0)) - (&trap * Complex64::new(1.0 / 3.0, 0.0));

        if let Some(prev) = prev_simpson {
            let err = (&simpson - &prev).norm();
            if err <= tol * (1.0 + simpson.norm()) {
                return Ok(simpson);
            }
        }
        prev_simpson = Some(simpson);
        trap = finer;
        panels *= 2;
        h *= 0.5;
    }

    let achieved = prev_simpson
        .map(|p| (&trap * Complex64::new(4.0 / 3.0, 0.0) - p * Complex64::new(1.0 / 3.0, 0.0)).norm())
        .unwrap_or(f64::INFINITY);
    Err(Error::Accuracy { requested: tol, achieved })
}
