//! JSON run configuration: function spec, grid ladder, tolerances, output.
//! Unknown keys are rejected so committed configs stay in sync with the tool.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matfun::{CMat, Family, MatrixFunctionSpec};
use crate::operators::Variant;

/// A complex entry: either a plain real number or an [re, im] pair.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(untagged)]
pub enum CxEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl CxEntry {
    fn to_complex(self) -> Complex64 {
        match self {
            CxEntry::Real(re) => Complex64::new(re, 0.0),
            CxEntry::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

pub type MatrixJson = Vec<Vec<CxEntry>>;

fn matrix_from_json(rows: &MatrixJson, what: &str) -> Result<CMat> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Config(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what}: ragged or empty matrix rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j].to_complex()))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    pub family: String,
    pub m1: usize,
    pub m2: usize,
    #[serde(default)]
    pub coefficients: Vec<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<FunctionConfig>,
}

impl FunctionConfig {
    pub fn to_spec(&self) -> Result<MatrixFunctionSpec> {
        let family = match self.family.as_str() {
            "zero" => Family::Zero,
            "constant" => Family::Constant,
            "linear" => Family::Linear,
            "trig" => Family::Trig,
            "polynomial" => Family::Polynomial,
            "fourier_random" => Family::FourierRandom,
            "columns" => Family::Columns,
            other => return Err(Error::Config(format!("unknown family '{other}'"))),
        };
        let mut spec = MatrixFunctionSpec::new(family, self.m1, self.m2);
        spec.coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, m)| matrix_from_json(m, &format!("coefficients[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        spec.omega = self.omega;
        spec.num_terms = self.num_terms;
        spec.decay = self.decay;
        spec.seed = self.seed;
        spec.offset = self.offset.as_ref().map(|m| matrix_from_json(m, "offset")).transpose()?;
        spec.columns =
            self.columns.iter().map(|c| c.to_spec()).collect::<Result<Vec<_>>>()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantConfig {
    SelfAdjoint,
    Skew,
}

impl VariantConfig {
    pub fn to_variant(self) -> Variant {
        match self {
            VariantConfig::SelfAdjoint => Variant::SelfAdjoint,
            VariantConfig::Skew => Variant::Skew,
        }
    }
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig::SelfAdjoint
    }
}

/// Default tolerances, overridable per run. These are the single source of
/// the thresholds the verification commands apply.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Convergence order below which a residual ladder fails.
    pub order_threshold: f64,
    /// Residual treated as exact cancellation (passes without an order).
    pub exact_residual: f64,
    /// Relative Hermiticity defect bound.
    pub hermiticity: f64,
    /// Slack under 1.0 allowed for the skew minimum eigenvalue.
    pub positivity_slack: f64,
    /// Relative bound for || E* E - S^{-1} ||.
    pub factor_reconstruction: f64,
    /// Bound on || S S^{-1} - I ||.
    pub invert_residual: f64,
    /// Relative deviation bound for the reconstruction crosscheck.
    pub crosscheck_bound: f64,
    /// Accepted range for the nesting-defect ratio under h-halving.
    pub nesting_ratio_lo: f64,
    pub nesting_ratio_hi: f64,
    /// Bound on the residual-equivalence defect between identity forms.
    pub equivalence_defect: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            order_threshold: 1.5,
            exact_residual: 1e-11,
            hermiticity: 1e-12,
            positivity_slack: 1e-8,
            factor_reconstruction: 1e-9,
            invert_residual: 1e-10,
            crosscheck_bound: 0.05,
            nesting_ratio_lo: 1.5,
            nesting_ratio_hi: 3.0,
            equivalence_defect: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
    pub format: OutputFormat,
}

fn default_n_list() -> Vec<usize> {
    vec![32, 64, 128]
}

fn default_radii() -> usize {
    8
}

fn default_epsilons() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub function: FunctionConfig,
    pub l: f64,
    #[serde(default)]
    pub variant: VariantConfig,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_radii")]
    pub radii_count: usize,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_hat: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) {
            return Err(Error::Config(format!("l must be positive, got {}", self.l)));
        }
        if self.function.m1 == 0 || self.function.m2 == 0 {
            return Err(Error::Config("m1 and m2 must be positive".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must not be empty".into()));
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::Config("every N must be at least 2".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_list must be strictly increasing".into()));
        }
        if let Some(l_hat) = self.l_hat {
            if !(l_hat > 0.0 && l_hat < self.l) {
                return Err(Error::Config(format!("l_hat must be in (0, l), got {l_hat}")));
            }
        }
        Ok(())
    }

    pub fn last_n(&self) -> usize {
        *self.n_list.last().expect("validated non-empty")
    }
}
