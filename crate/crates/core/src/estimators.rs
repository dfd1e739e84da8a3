//! Point estimators of `β`: weighted least squares, Tikhonov-regularized,
//! and the Gaussian posterior mean with general or zero prior mean, plus the
//! log-densities they derive from.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::marginal;
use crate::model::{matrix_condition, Hyperparameters, InverseProblem, PriorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ls,
    Regularized,
    Bayes,
    BayesZeroMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub beta_hat: DVector<f64>,
    pub method: Method,
    /// `None` for least squares and for the regularized solution.
    pub sigma2: Option<f64>,
    pub kappa: Option<f64>,
}

/// Wire form `{method, beta_hat, sigma2, kappa}`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRecord {
    pub method: Method,
    pub beta_hat: Vec<f64>,
    pub sigma2: Option<f64>,
    pub kappa: Option<f64>,
}

impl Estimate {
    pub fn record(&self) -> EstimateRecord {
        EstimateRecord {
            method: self.method,
            beta_hat: self.beta_hat.iter().copied().collect(),
            sigma2: self.sigma2,
            kappa: self.kappa,
        }
    }

    pub fn hyper(&self) -> Option<Hyperparameters> {
        match (self.sigma2, self.kappa) {
            (Some(s), Some(k)) => Hyperparameters::new(s, k).ok(),
            _ => None,
        }
    }
}

/// `AᵀWA` and `AᵀWy`.
pub(crate) fn normal_equations(problem: &InverseProblem) -> (DMatrix<f64>, DVector<f64>) {
    let wa = problem.w() * problem.a();
    let mut n = problem.a().transpose() * &wa;
    crate::linalg::symmetrize(&mut n);
    let rhs = wa.transpose() * problem.y();
    (n, rhs)
}

fn check_prior_shape(problem: &InverseProblem, w_beta: &DMatrix<f64>) -> Result<()> {
    let t = problem.t();
    if w_beta.nrows() != t || w_beta.ncols() != t {
        return Err(Error::dim(
            "W_beta",
            format!("{t}×{t}"),
            format!("{}×{}", w_beta.nrows(), w_beta.ncols()),
        ));
    }
    Ok(())
}

fn check_variances(sigma2: f64, sigma_beta2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(sigma_beta2 > 0.0 && sigma_beta2.is_finite()) {
        return Err(Error::Domain(format!("sigma_beta2 must be positive, got {sigma_beta2}")));
    }
    Ok(())
}

/// Weighted least squares `(AᵀWA)⁻¹AᵀWy`. Numerically rank-deficient `A`
/// is a hard error here.
pub fn ls_estimate(problem: &InverseProblem) -> Result<Estimate> {
    let cond = matrix_condition(problem.a());
    if cond.rank_deficient {
        return Err(Error::Singular { condition: cond.value });
    }
    let (n, rhs) = normal_equations(problem);
    let f = SpdFactor::new(&n, "AᵀWA").map_err(|_| Error::Singular { condition: cond.value })?;
    Ok(Estimate {
        beta_hat: f.solve(&rhs),
        method: Method::Ls,
        sigma2: None,
        kappa: None,
    })
}

/// Solves `(AᵀWA + κW_β) β = AᵀWy`.
pub fn regularized_estimate(problem: &InverseProblem, w_beta: &DMatrix<f64>, kappa: f64) -> Result<Estimate> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be non-negative, got {kappa}")));
    }
    check_prior_shape(problem, w_beta)?;
    let (n, rhs) = normal_equations(problem);
    let m = n + w_beta * kappa;
    let f = SpdFactor::new(&m, "AᵀWA + κW_β").map_err(|_| Error::Singular {
        condition: matrix_condition(&m).value,
    })?;
    Ok(Estimate {
        beta_hat: f.solve(&rhs),
        method: Method::Regularized,
        sigma2: None,
        kappa: Some(kappa),
    })
}

/// Posterior mean (and mode) of `β` under the Gaussian model.
pub fn bayes_estimate(problem: &InverseProblem, prior: &PriorModel, sigma2: f64, sigma_beta2: f64) -> Result<Estimate> {
    check_variances(sigma2, sigma_beta2)?;
    check_prior_shape(problem, prior.w_beta())?;
    if prior.t() != problem.t() {
        return Err(Error::dim("mu", problem.t(), prior.t()));
    }
    // σ²-scaled form: (AᵀWA + κW_β) β = AᵀWy + κW_β μ, κ = σ²/σ_β²
    let kappa = sigma2 / sigma_beta2;
    let (n, aty) = normal_equations(problem);
    let m = n + prior.w_beta() * kappa;
    let rhs = aty + prior.w_beta() * prior.mu() * kappa;
    let f = SpdFactor::new(&m, "posterior precision")?;
    let zero_mean = prior.mu().iter().all(|&m| m == 0.0);
    Ok(Estimate {
        beta_hat: f.solve(&rhs),
        method: if zero_mean { Method::BayesZeroMean } else { Method::Bayes },
        sigma2: Some(sigma2),
        kappa: Some(kappa),
    })
}

/// `log f_y(y|β,σ²) + log π_β(β|σ_β²)`, normalizing constants included.
pub fn log_joint_density(
    problem: &InverseProblem,
    prior: &PriorModel,
    beta: &DVector<f64>,
    sigma2: f64,
    sigma_beta2: f64,
) -> Result<f64> {
    check_variances(sigma2, sigma_beta2)?;
    if beta.len() != problem.t() {
        return Err(Error::dim("beta", problem.t(), beta.len()));
    }
    if prior.t() != problem.t() {
        return Err(Error::dim("mu", problem.t(), prior.t()));
    }
    let w = SpdFactor::new(problem.w(), "W")?;
    let wb = SpdFactor::new(prior.w_beta(), "W_beta")?;
    let (n, t) = (problem.n() as f64, problem.t() as f64);

    let r = problem.y() - problem.a() * beta;
    let d = beta - prior.mu();
    let data = 0.5 * w.logdet() - 0.5 * n * (2.0 * PI * sigma2).ln() - r.dot(&(problem.w() * &r)) / (2.0 * sigma2);
    let pri = 0.5 * wb.logdet()
        - 0.5 * t * (2.0 * PI * sigma_beta2).ln()
        - d.dot(&(prior.w_beta() * &d)) / (2.0 * sigma_beta2);
    Ok(data + pri)
}

/// Log posterior density of `β`: joint minus marginal.
pub fn log_posterior_density(
    problem: &InverseProblem,
    prior: &PriorModel,
    beta: &DVector<f64>,
    sigma2: f64,
    sigma_beta2: f64,
) -> Result<f64> {
    let joint = log_joint_density(problem, prior, beta, sigma2, sigma_beta2)?;
    let marg = marginal::log_marginal_density(problem, prior, sigma2, sigma_beta2)?;
    Ok(joint - marg)
}
