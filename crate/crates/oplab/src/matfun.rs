//! Matrix function families: evaluators for an m2 x m1 matrix function on
//! [0, l] together with its first derivative.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Family tag for [`MatrixFunctionSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Zero,
    Constant,
    Linear,
    Trig,
    Polynomial,
    FourierRandom,
    /// Horizontal stack of sub-functions sharing the same row count.
    Columns,
}

/// Parameters selecting one concrete matrix function.
///
/// `coefficients` shapes must all be m2 x m1. The optional `offset` is a
/// constant m2 x m1 matrix added to the base family; it is how the
/// phi(0) != 0 branches of the kernel are exercised.
#[derive(Debug, Clone)]
pub struct MatrixFunctionSpec {
    pub family: Family,
    pub m1: usize,
    pub m2: usize,
    pub coefficients: Vec<CMat>,
    pub omega: Option<f64>,
    pub num_terms: Option<usize>,
    pub decay: Option<f64>,
    pub seed: Option<u64>,
    pub offset: Option<CMat>,
    pub columns: Vec<MatrixFunctionSpec>,
}

impl MatrixFunctionSpec {
    pub fn new(family: Family, m1: usize, m2: usize) -> Self {
        MatrixFunctionSpec {
            family,
            m1,
            m2,
            coefficients: Vec::new(),
            omega: None,
            num_terms: None,
            decay: None,
            seed: None,
            offset: None,
            columns: Vec::new(),
        }
    }

    pub fn with_coefficients(mut self, coefficients: Vec<CMat>) -> Self {
        self.coefficients = coefficients;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_offset(mut self, offset: CMat) -> Self {
        self.offset = Some(offset);
        self
    }

    pub fn with_fourier(mut self, num_terms: usize, decay: f64, seed: u64) -> Self {
        self.num_terms = Some(num_terms);
        self.decay = Some(decay);
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone)]
enum Body {
    Zero,
    Constant(CMat),
    Linear(CMat),
    Trig { amp: CMat, omega: f64 },
    /// Coefficients c_0..c_k of sum c_j x^j.
    Polynomial(Vec<CMat>),
    /// Terms (mu_k, B_k) of sum B_k sin(mu_k x).
    Fourier(Vec<(f64, CMat)>),
    Columns(Vec<MatrixFunction>),
}

/// A matrix function on [0, l] with an analytic first derivative.
///
/// Evaluators are pure and immutable; concurrent reads are fine.
#[derive(Debug, Clone)]
pub struct MatrixFunction {
    spec: MatrixFunctionSpec,
    l: f64,
    body: Body,
    offset: CMat,
    phi0: CMat,
}

fn czero(m2: usize, m1: usize) -> CMat {
    CMat::zeros(m2, m1)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Uniform f64 in [0, 1) from the top 53 bits of a u64 draw.
fn unit_f64(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn check_shape(spec: &MatrixFunctionSpec, mat: &CMat, what: &str) -> Result<()> {
    if mat.nrows() != spec.m2 || mat.ncols() != spec.m1 {
        return Err(Error::InvalidSpec(format!(
            "{what} must be {}x{}, got {}x{}",
            spec.m2,
            spec.m1,
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

/// Builds the evaluator pair (phi, phi') for a family spec on [0, l].
pub fn make_family(spec: &MatrixFunctionSpec, l: f64) -> Result<MatrixFunction> {
    if spec.m1 == 0 || spec.m2 == 0 {
        return Err(Error::InvalidSpec("dimensions m1, m2 must be positive".into()));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidSpec(format!("interval length l must be positive, got {l}")));
    }
    for c in &spec.coefficients {
        check_shape(spec, c, "coefficient")?;
    }
    if let Some(off) = &spec.offset {
        check_shape(spec, off, "offset")?;
    }

    let body = match spec.family {
        Family::Zero => Body::Zero,
        Family::Constant => {
            let c = spec
                .coefficients
                .first()
                .ok_or_else(|| Error::InvalidSpec("constant family needs one coefficient".into()))?;
            Body::Constant(c.clone())
        }
        Family::Linear => {
            let c = spec
                .coefficients
                .first()
                .ok_or_else(|| Error::InvalidSpec("linear family needs one coefficient".into()))?;
            Body::Linear(c.clone())
        }
        Family::Trig => {
            let amp = spec
                .coefficients
                .first()
                .ok_or_else(|| Error::InvalidSpec("trig family needs one coefficient".into()))?;
            let omega = spec
                .omega
                .ok_or_else(|| Error::InvalidSpec("trig family needs omega".into()))?;
            if !omega.is_finite() {
                return Err(Error::InvalidSpec("omega must be finite".into()));
            }
            Body::Trig { amp: amp.clone(), omega }
        }
        Family::Polynomial => {
            if spec.coefficients.is_empty() {
                return Err(Error::InvalidSpec("polynomial family needs coefficients".into()));
            }
            Body::Polynomial(spec.coefficients.clone())
        }
        Family::FourierRandom => {
            let k_max = spec
                .num_terms
                .ok_or_else(|| Error::InvalidSpec("fourier_random needs num_terms".into()))?;
            let decay = spec
                .decay
                .ok_or_else(|| Error::InvalidSpec("fourier_random needs decay".into()))?;
            let seed = spec
                .seed
                .ok_or_else(|| Error::InvalidSpec("fourier_random needs seed".into()))?;
            if k_max == 0 {
                return Err(Error::InvalidSpec("num_terms must be positive".into()));
            }
            if !(decay > 0.0) {
                return Err(Error::InvalidSpec("decay must be > 0".into()));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut terms = Vec::with_capacity(k_max);
            for k in 1..=k_max {
                // entries uniform in the closed unit disc
                let a_k = CMat::from_fn(spec.m2, spec.m1, |_, _| {
                    let r = unit_f64(&mut rng).sqrt();
                    let theta = 2.0 * std::f64::consts::PI * unit_f64(&mut rng);
                    Complex64::from_polar(r, theta)
                });
                let scale = 1.0 / (k as f64).powf(decay);
                let mu = k as f64 * std::f64::consts::PI / l;
                terms.push((mu, a_k * real(scale)));
            }
            Body::Fourier(terms)
        }
        Family::Columns => {
            if spec.columns.is_empty() {
                return Err(Error::InvalidSpec("columns family needs sub-specs".into()));
            }
            let mut children = Vec::with_capacity(spec.columns.len());
            let mut m1_total = 0;
            for sub in &spec.columns {
                if sub.m2 != spec.m2 {
                    return Err(Error::InvalidSpec(
                        "columns sub-functions must share m2 with the parent".into(),
                    ));
                }
                let child = make_family(sub, l)?;
                m1_total += sub.m1;
                children.push(child);
            }
            if m1_total != spec.m1 {
                return Err(Error::InvalidSpec(format!(
                    "columns sub-functions have total m1 = {m1_total}, parent claims {}",
                    spec.m1
                )));
            }
            Body::Columns(children)
        }
    };

    let offset = spec.offset.clone().unwrap_or_else(|| czero(spec.m2, spec.m1));
    let mut fun = MatrixFunction {
        spec: spec.clone(),
        l,
        body,
        offset,
        phi0: czero(spec.m2, spec.m1),
    };
    fun.phi0 = fun.base_value(0.0) + &fun.offset;
    Ok(fun)
}

impl MatrixFunction {
    pub fn m1(&self) -> usize {
        self.spec.m1
    }

    pub fn m2(&self) -> usize {
        self.spec.m2
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn spec(&self) -> &MatrixFunctionSpec {
        &self.spec
    }

    /// Value of phi at 0, cached at construction.
    pub fn phi0(&self) -> &CMat {
        &self.phi0
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let slack = 1e-9 * self.l.max(1.0);
        if !x.is_finite() || x < -slack || x > self.l + slack {
            return Err(Error::Domain { x, l: self.l });
        }
        Ok(())
    }

    fn base_value(&self, x: f64) -> CMat {
        match &self.body {
            Body::Zero => czero(self.spec.m2, self.spec.m1),
            Body::Constant(c) => c.clone(),
            Body::Linear(c) => c * real(x),
            Body::Trig { amp, omega } => amp * real((omega * x).sin()),
            Body::Polynomial(coeffs) => {
                // Horner in x
                let mut acc = czero(self.spec.m2, self.spec.m1);
                for c in coeffs.iter().rev() {
                    acc = acc * real(x) + c;
                }
                acc
            }
            Body::Fourier(terms) => {
                let mut acc = czero(self.spec.m2, self.spec.m1);
                for (mu, b) in terms {
                    acc += b * real((mu * x).sin());
                }
                acc
            }
            Body::Columns(children) => {
                let mut acc = czero(self.spec.m2, self.spec.m1);
                let mut col = 0;
                for child in children {
                    let v = child.base_value(x) + &child.offset;
                    acc.view_mut((0, col), (self.spec.m2, child.spec.m1)).copy_from(&v);
                    col += child.spec.m1;
                }
                acc
            }
        }
    }

    fn base_deriv(&self, x: f64) -> CMat {
        match &self.body {
            Body::Zero | Body::Constant(_) => czero(self.spec.m2, self.spec.m1),
            Body::Linear(c) => c.clone(),
            Body::Trig { amp, omega } => amp * real(omega * (omega * x).cos()),
            Body::Polynomial(coeffs) => {
                let mut acc = czero(self.spec.m2, self.spec.m1);
                for (j, c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * real(x) + c * real(j as f64);
                }
                acc
            }
            Body::Fourier(terms) => {
                let mut acc = czero(self.spec.m2, self.spec.m1);
                for (mu, b) in terms {
                    acc += b * real(mu * (mu * x).cos());
                }
                acc
            }
            Body::Columns(children) => {
                let mut acc = czero(self.spec.m2, self.spec.m1);
                let mut col = 0;
                for child in children {
                    let v = child.base_deriv(x);
                    acc.view_mut((0, col), (self.spec.m2, child.spec.m1)).copy_from(&v);
                    col += child.spec.m1;
                }
                acc
            }
        }
    }

    /// phi(x), domain-checked.
    pub fn eval(&self, x: f64) -> Result<CMat> {
        self.check_domain(x)?;
        Ok(self.base_value(x) + &self.offset)
    }

    /// phi'(x), domain-checked.
    pub fn eval_deriv(&self, x: f64) -> Result<CMat> {
        self.check_domain(x)?;
        Ok(self.base_deriv(x))
    }

    /// Exact value of the integral over [0, m] of phi'(x - z) phi'(t - z)^H dz.
    ///
    /// This is the continuous part of the structured kernel; every family has
    /// a closed form (the constant offset never enters the derivative).
    pub fn deriv_autocorr(&self, x: f64, t: f64, m: f64) -> CMat {
        let m2 = self.spec.m2;
        if m <= 0.0 {
            return czero(m2, m2);
        }
        match &self.body {
            Body::Zero | Body::Constant(_) => czero(m2, m2),
            Body::Linear(c) => (c * c.adjoint()) * real(m),
            Body::Trig { amp, omega } => {
                let cc = amp * amp.adjoint();
                cc * real(omega * omega * cos_product_integral(x, t, *omega, *omega, m))
            }
            Body::Polynomial(coeffs) => poly_autocorr(coeffs, x, t, m, m2),
            Body::Fourier(terms) => {
                let mut acc = czero(m2, m2);
                for (mu_a, b_a) in terms {
                    for (mu_b, b_b) in terms {
                        let w = mu_a * mu_b * cos_product_integral(x, t, *mu_a, *mu_b, m);
                        acc += (b_a * b_b.adjoint()) * real(w);
                    }
                }
                acc
            }
            Body::Columns(children) => {
                // phi' phi'^H splits into a sum over column blocks
                let mut acc = czero(m2, m2);
                for child in children {
                    acc += child.deriv_autocorr(x, t, m);
                }
                acc
            }
        }
    }
}

/// Integral over [0, m] of cos(a (x - z)) cos(b (t - z)) dz, in closed form.
fn cos_product_integral(x: f64, t: f64, a: f64, b: f64, m: f64) -> f64 {
    0.5 * (phase_integral(a * x - b * t, a - b, m) + phase_integral(a * x + b * t, a + b, m))
}

/// Integral over [0, m] of cos(c - g z) dz.
fn phase_integral(c: f64, g: f64, m: f64) -> f64 {
    if g == 0.0 {
        m * c.cos()
    } else {
        (c.sin() - (c - g * m).sin()) / g
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Closed-form autocorrelation for the polynomial family: expand both
/// derivative factors as polynomials in the integration variable, convolve,
/// and integrate monomials.
fn poly_autocorr(coeffs: &[CMat], x: f64, t: f64, m: f64, m2: usize) -> CMat {
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return czero(m2, m2);
    }
    // derivative coefficients: D_a = (a+1) c_{a+1}, a = 0..deg-1
    let d: Vec<CMat> = (0..deg).map(|a| &coeffs[a + 1] * real((a + 1) as f64)).collect();

    // P_r(x) with phi'(x - z) = sum_r P_r z^r
    let expand = |point: f64| -> Vec<CMat> {
        let mut out = vec![czero(m2, coeffs[0].ncols()); deg];
        for (r, slot) in out.iter_mut().enumerate() {
            for (a, da) in d.iter().enumerate().skip(r) {
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                *slot += da * real(sign * binom(a, r) * point.powi((a - r) as i32));
            }
        }
        out
    };

    let p = expand(x);
    let q = expand(t);
    let mut acc = czero(m2, m2);
    for (r, pr) in p.iter().enumerate() {
        for (s, qs) in q.iter().enumerate() {
            let w = m.powi((r + s + 1) as i32) / (r + s + 1) as f64;
            acc += (pr * qs.adjoint()) * real(w);
        }
    }
    acc
}

/// The six canonical scalar test functions, one per family, on [0, l].
pub fn builtin_families(l: f64) -> Vec<(&'static str, MatrixFunction)> {
    let scalar = |v: f64| CMat::from_element(1, 1, real(v));
    let specs: Vec<(&'static str, MatrixFunctionSpec)> = vec![
        ("zero", MatrixFunctionSpec::new(Family::Zero, 1, 1)),
        (
            "constant",
            MatrixFunctionSpec::new(Family::Constant, 1, 1).with_coefficients(vec![scalar(0.4)]),
        ),
        (
            "linear",
            MatrixFunctionSpec::new(Family::Linear, 1, 1).with_coefficients(vec![scalar(1.0)]),
        ),
        (
            "trig",
            MatrixFunctionSpec::new(Family::Trig, 1, 1)
                .with_coefficients(vec![scalar(0.3)])
                .with_omega(2.0),
        ),
        (
            "polynomial",
            MatrixFunctionSpec::new(Family::Polynomial, 1, 1)
                .with_coefficients(vec![scalar(0.4), scalar(1.0)]),
        ),
        (
            "fourier_random",
            MatrixFunctionSpec::new(Family::FourierRandom, 1, 1).with_fourier(4, 2.0, 3),
        ),
    ];
    specs
        .into_iter()
        .map(|(name, spec)| (name, make_family(&spec, l).expect("builtin specs are valid")))
        .collect()
}
