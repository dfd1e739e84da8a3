//! Shared data model: the linear inverse problem `y = Aβ + ε`, the Gaussian
//! prior on `β`, and the variance hyperparameters.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor, RANK_RTOL};

/// Design matrix `A` (n×t) and measurement weight `W` (n×n).
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    a: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl Design {
    /// `w = None` means the identity weight.
    pub fn new(a: DMatrix<f64>, w: Option<DMatrix<f64>>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() == 0 {
            return Err(Error::dim("A", "at least 1×1", format!("{}×{}", n, a.ncols())));
        }
        let w = w.unwrap_or_else(|| DMatrix::identity(n, n));
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::dim("W", format!("{n}×{n}"), format!("{}×{}", w.nrows(), w.ncols())));
        }
        Ok(Self { a, w })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn t(&self) -> usize {
        self.a.ncols()
    }

    pub fn with_observations(self, y: DVector<f64>) -> Result<InverseProblem> {
        if y.len() != self.n() {
            return Err(Error::dim("y", self.n(), y.len()));
        }
        Ok(InverseProblem { design: self, y })
    }
}

/// A measured instance of the linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseProblem {
    design: Design,
    y: DVector<f64>,
}

impl InverseProblem {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, w: Option<DMatrix<f64>>) -> Result<Self> {
        Design::new(a, w)?.with_observations(y)
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.design.a
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.design.w
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn t(&self) -> usize {
        self.design.t()
    }

    /// Same design, different measurements.
    pub fn with_y(&self, y: DVector<f64>) -> Result<Self> {
        self.design.clone().with_observations(y)
    }
}

/// Prior moments `E(β) = μ`, `D(β) = W_β⁻¹ σ_β²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorModel {
    mu: DVector<f64>,
    w_beta: DMatrix<f64>,
    sigma_beta2: Option<f64>,
    mu_assumed_zero: bool,
}

impl PriorModel {
    pub fn new(mu: DVector<f64>, w_beta: Option<DMatrix<f64>>, sigma_beta2: Option<f64>) -> Result<Self> {
        let t = mu.len();
        if t == 0 {
            return Err(Error::dim("mu", "length ≥ 1", 0));
        }
        let w_beta = w_beta.unwrap_or_else(|| DMatrix::identity(t, t));
        if w_beta.nrows() != t || w_beta.ncols() != t {
            return Err(Error::dim(
                "W_beta",
                format!("{t}×{t}"),
                format!("{}×{}", w_beta.nrows(), w_beta.ncols()),
            ));
        }
        if let Some(s) = sigma_beta2 {
            if !(s > 0.0) {
                return Err(Error::Domain(format!("sigma_beta2 must be positive, got {s}")));
            }
        }
        Ok(Self {
            mu,
            w_beta,
            sigma_beta2,
            mu_assumed_zero: false,
        })
    }

    /// Zero prior mean, flagged as an assumption rather than knowledge.
    pub fn zero_mean(w_beta: DMatrix<f64>, sigma_beta2: Option<f64>) -> Result<Self> {
        let t = w_beta.nrows();
        let mut p = Self::new(DVector::zeros(t), Some(w_beta), sigma_beta2)?;
        p.mu_assumed_zero = true;
        Ok(p)
    }

    /// `μ = 0`, `W_β = I`.
    pub fn standard(t: usize) -> Self {
        Self::zero_mean(DMatrix::identity(t, t), None).expect("identity prior is valid")
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn w_beta(&self) -> &DMatrix<f64> {
        &self.w_beta
    }

    pub fn sigma_beta2(&self) -> Option<f64> {
        self.sigma_beta2
    }

    pub fn mu_assumed_zero(&self) -> bool {
        self.mu_assumed_zero
    }

    pub fn t(&self) -> usize {
        self.mu.len()
    }

    /// Replaces the prior mean by the zero vector and flags it.
    pub fn with_zero_mu(&self) -> Self {
        Self {
            mu: DVector::zeros(self.t()),
            mu_assumed_zero: true,
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: DVector<f64>) -> Result<Self> {
        if mu.len() != self.t() {
            return Err(Error::dim("mu", self.t(), mu.len()));
        }
        Ok(Self {
            mu,
            mu_assumed_zero: false,
            ..self.clone()
        })
    }

    pub fn with_sigma_beta2(&self, sigma_beta2: Option<f64>) -> Result<Self> {
        Self::new(self.mu.clone(), Some(self.w_beta.clone()), sigma_beta2).map(|mut p| {
            p.mu_assumed_zero = self.mu_assumed_zero;
            p
        })
    }

    pub fn with_w_beta(&self, w_beta: DMatrix<f64>) -> Result<Self> {
        Self::new(self.mu.clone(), Some(w_beta), self.sigma_beta2).map(|mut p| {
            p.mu_assumed_zero = self.mu_assumed_zero;
            p
        })
    }
}

/// Measurement variance `σ²` and relative weight `κ = σ²/σ_β²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyperparameters {
    pub sigma2: f64,
    pub kappa: f64,
}

impl Hyperparameters {
    pub fn new(sigma2: f64, kappa: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self { sigma2, kappa })
    }

    pub fn from_variances(sigma2: f64, sigma_beta2: f64) -> Result<Self> {
        if !(sigma_beta2 > 0.0) {
            return Err(Error::Domain(format!("sigma_beta2 must be positive, got {sigma_beta2}")));
        }
        Self::new(sigma2, sigma2 / sigma_beta2)
    }

    pub fn sigma_beta2(&self) -> f64 {
        self.sigma2 / self.kappa
    }
}

/// True parameters and the noise-free measurements they generate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    beta_bar: DVector<f64>,
    y_bar: DVector<f64>,
}

impl GroundTruth {
    pub fn new(design: &Design, beta_bar: DVector<f64>) -> Result<Self> {
        if beta_bar.len() != design.t() {
            return Err(Error::dim("beta_bar", design.t(), beta_bar.len()));
        }
        let y_bar = design.a() * &beta_bar;
        Ok(Self { beta_bar, y_bar })
    }

    pub fn beta_bar(&self) -> &DVector<f64> {
        &self.beta_bar
    }

    pub fn y_bar(&self) -> &DVector<f64> {
        &self.y_bar
    }

    /// The noise realization `y − ȳ` contained in a measurement vector.
    pub fn epsilon(&self, y: &DVector<f64>) -> DVector<f64> {
        y - &self.y_bar
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Conditions that do not fail validation but restrict which estimators apply.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks every invariant of the problem/prior pair. Shape mismatches are
/// errors; everything else is reported.
pub fn validate_problem(problem: &InverseProblem, prior: &PriorModel) -> Result<ValidationReport> {
    let (n, t) = (problem.n(), problem.t());
    if prior.t() != t {
        return Err(Error::dim("mu", t, prior.t()));
    }
    if prior.w_beta().nrows() != t || prior.w_beta().ncols() != t {
        return Err(Error::dim(
            "W_beta",
            format!("{t}×{t}"),
            format!("{}×{}", prior.w_beta().nrows(), prior.w_beta().ncols()),
        ));
    }

    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        })
    };

    push("n_ge_t", n >= t, format!("n = {n}, t = {t}"));

    let finite = problem.a().iter().all(|v| v.is_finite())
        && problem.y().iter().all(|v| v.is_finite())
        && prior.mu().iter().all(|v| v.is_finite());
    push("finite_entries", finite, "A, y and mu".to_string());

    for (label, m) in [("W", problem.w()), ("W_beta", prior.w_beta())] {
        let defect = linalg::symmetry_defect(m);
        push(
            &format!("{label}_symmetric"),
            defect <= linalg::SYMMETRY_RTOL,
            format!("relative asymmetry {defect:e}"),
        );
        let pd = SpdFactor::new(m, "matrix").is_ok();
        push(
            &format!("{label}_positive_definite"),
            pd,
            if pd { "cholesky succeeded" } else { "cholesky failed" }.to_string(),
        );
    }

    match prior.sigma_beta2() {
        Some(s) => push("sigma_beta2_positive", s > 0.0, format!("sigma_beta2 = {s}")),
        None => push("sigma_beta2_positive", true, "absent".to_string()),
    }

    let mut warnings = Vec::new();
    if n >= t && finite {
        let cond = condition_estimate(problem);
        if cond.rank_deficient {
            warnings.push(format!(
                "A is numerically rank deficient (condition {:e}); only regularized estimators apply",
                cond.value
            ));
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        passed,
        checks,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    /// Largest over smallest singular value of `A`.
    pub value: f64,
    pub rank_deficient: bool,
}

/// 2-norm condition number of `A`, flagging numerical rank deficiency.
pub fn condition_estimate(problem: &InverseProblem) -> Condition {
    matrix_condition(problem.a())
}

pub fn matrix_condition(a: &DMatrix<f64>) -> Condition {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    Condition {
        value: max / min,
        rank_deficient: min < RANK_RTOL * max,
    }
}
