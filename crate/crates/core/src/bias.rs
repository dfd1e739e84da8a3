//! Bias of the ABIC variance estimates when the prior mean is forced to zero.
//!
//! At a fixed `κ`, the zero-mean estimate `σ̂²_s = yᵀE_py⁻¹y/n` with
//! `y = ȳ + ε`, `ε ~ N(0, W⁻¹σ²)` has expectation
//!
//! ```text
//! E(σ̂²_s) = ȳᵀE_py⁻¹ȳ/n + tr(E_py⁻¹W⁻¹)·σ²/n
//! ```
//!
//! The Monte Carlo studies here check that formula, check that the
//! estimate with the correct prior is unbiased when the data follow the
//! model, and measure how `κ̂` and `σ̂_β²` move when `μ` is replaced by zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::marginal::{Marginal, MarginalLikelihood, Objective, SolvePath};
use crate::model::{Design, GroundTruth, PriorModel};
use crate::sampling::{replicate_rng, GaussianSampler, GENERATOR};
use crate::selection::{select_with, BoundaryFlag, Case, SearchOptions, SelectionResult};

pub const DEFAULT_SIGMA2_REPLICATES: usize = 20_000;
pub const DEFAULT_KAPPA_REPLICATES: usize = 500;
pub const MIN_REPLICATES: usize = 100;
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuMode {
    /// The estimator uses the prior mean as supplied.
    #[serde(rename = "true")]
    TrueMu,
    /// The estimator replaces the prior mean by zero.
    #[serde(rename = "zero")]
    ZeroMu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub replicates: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl StudyOptions {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            execution: Execution::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Domain(format!(
                "at least {MIN_REPLICATES} replicates are required, got {}",
                self.replicates
            )));
        }
        Ok(())
    }
}

/// Signal and noise parts of the zero-mean expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationTerms {
    /// `ȳᵀE_py⁻¹ȳ/n`
    pub signal: f64,
    /// `tr(E_py⁻¹W⁻¹)σ²/n`
    pub noise: f64,
}

impl ExpectationTerms {
    pub fn total(&self) -> f64 {
        self.signal + self.noise
    }
}

pub fn expected_sigma2_terms(
    design: &Design,
    w_beta: &nalgebra::DMatrix<f64>,
    truth: &GroundTruth,
    sigma2: f64,
    kappa: f64,
) -> Result<ExpectationTerms> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    if truth.y_bar().len() != design.n() {
        return Err(Error::dim("y_bar", design.n(), truth.y_bar().len()));
    }
    let m = Marginal::new(design, w_beta, SolvePath::Auto)?;
    let op = m.at(kappa)?;
    let n = design.n() as f64;
    Ok(ExpectationTerms {
        signal: op.quad(truth.y_bar()) / n,
        noise: op.trace_e_inv_w_inv() * sigma2 / n,
    })
}

/// Expected value of the zero-mean variance estimate at fixed `κ`.
pub fn expected_sigma2_mu_zero(
    design: &Design,
    w_beta: &nalgebra::DMatrix<f64>,
    truth: &GroundTruth,
    sigma2: f64,
    kappa: f64,
) -> Result<f64> {
    expected_sigma2_terms(design, w_beta, truth, sigma2, kappa).map(|t| t.total())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub mu_mode: MuMode,
    pub analytic_expectation: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    /// `(mc_mean − analytic_expectation) / mc_std_error`
    pub z_score: f64,
    pub replicates: usize,
    pub seed: u64,
    pub kappa_used: f64,
    pub true_sigma2: f64,
    pub generator: &'static str,
    pub data_model: &'static str,
}

/// Mean and standard error, summed in index order.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let sd = (ss / (n - 1.0)).sqrt();
    (mean, sd / n.sqrt())
}

/// Monte Carlo distribution of the `σ²` estimate at a fixed `κ`.
///
/// * `TrueMu`: each replicate draws `β ~ N(μ, W_β⁻¹σ²/κ)` and
///   `ε ~ N(0, W⁻¹σ²)`, then estimates with the same `μ`. The data follow
///   the model, so the expectation is `σ²`.
/// * `ZeroMu`: each replicate draws `ε` around the fixed truth `ȳ` and
///   estimates with `μ = 0`. The expectation is [`expected_sigma2_mu_zero`].
pub fn mc_sigma2_study(
    design: &Design,
    truth: &GroundTruth,
    prior: &PriorModel,
    sigma2: f64,
    kappa: f64,
    mu_mode: MuMode,
    opts: &StudyOptions,
) -> Result<BiasReport> {
    opts.check()?;
    if prior.t() != design.t() {
        return Err(Error::dim("mu", design.t(), prior.t()));
    }
    let marginal = Marginal::new(design, prior.w_beta(), SolvePath::Auto)?;
    let op = marginal.at(kappa)?;
    let noise = GaussianSampler::new(design.w(), sigma2, "W")?;
    let n = design.n() as f64;

    let (analytic, data_model, values) = match mu_mode {
        MuMode::TrueMu => {
            let beta_draw = GaussianSampler::new(prior.w_beta(), sigma2 / kappa, "W_beta")?;
            let a = design.a();
            let values = opts.execution.map_range(opts.replicates, |r| {
                let mut rng = replicate_rng(opts.seed, r as u64);
                let eps = noise.sample(&mut rng);
                let dbeta = beta_draw.sample(&mut rng);
                // y − Aμ = A(β − μ) + ε
                let resid = a * dbeta + eps;
                op.quad(&resid) / n
            });
            (sigma2, "beta ~ N(mu, W_beta^-1 sigma2/kappa), y = A beta + eps", values)
        }
        MuMode::ZeroMu => {
            let y_bar = truth.y_bar();
            let values = opts.execution.map_range(opts.replicates, |r| {
                let mut rng = replicate_rng(opts.seed, r as u64);
                let y = y_bar + noise.sample(&mut rng);
                op.quad(&y) / n
            });
            let analytic = expected_sigma2_mu_zero(design, prior.w_beta(), truth, sigma2, kappa)?;
            (analytic, "y = y_bar + eps, estimator uses mu = 0", values)
        }
    };

    let (mc_mean, mc_std_error) = mean_and_std_error(&values);
    Ok(BiasReport {
        mu_mode,
        analytic_expectation: analytic,
        mc_mean,
        mc_std_error,
        z_score: (mc_mean - analytic) / mc_std_error,
        replicates: opts.replicates,
        seed: opts.seed,
        kappa_used: kappa,
        true_sigma2: sigma2,
        generator: GENERATOR,
        data_model,
    })
}

/// Linear-interpolation quantiles (type 7) of already sorted data.
pub fn quantiles(sorted: &[f64], levels: &[f64]) -> Vec<f64> {
    if sorted.is_empty() {
        return vec![f64::NAN; levels.len()];
    }
    let last = (sorted.len() - 1) as f64;
    levels
        .iter()
        .map(|&p| {
            let h = p * last;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileSummary {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileSummary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.collect();
        v.sort_by(f64::total_cmp);
        Self {
            levels: QUANTILE_LEVELS.to_vec(),
            values: quantiles(&v, &QUANTILE_LEVELS),
        }
    }

    pub fn median(&self) -> f64 {
        self.values[2]
    }
}

/// One replicate's selection outcome under one `μ` mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub sigma2_hat: f64,
    pub kappa_hat: f64,
    pub sigma_beta2_hat: f64,
    pub boundary_flag: BoundaryFlag,
}

impl From<&SelectionResult> for ReplicateOutcome {
    fn from(r: &SelectionResult) -> Self {
        Self {
            sigma2_hat: r.sigma2(),
            kappa_hat: r.kappa_hat,
            sigma_beta2_hat: r.sigma_beta2_hat,
            boundary_flag: r.boundary_flag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mu_mode: MuMode,
    pub kappa_hat: QuantileSummary,
    pub sigma2_hat: QuantileSummary,
    pub sigma_beta2_hat: QuantileSummary,
    pub boundary_fraction: f64,
    pub failures: usize,
}

impl ModeSummary {
    fn of(mu_mode: MuMode, outcomes: &[Option<ReplicateOutcome>]) -> Self {
        let ok: Vec<&ReplicateOutcome> = outcomes.iter().flatten().collect();
        let edge = ok.iter().filter(|o| o.boundary_flag != BoundaryFlag::Interior).count();
        Self {
            mu_mode,
            kappa_hat: QuantileSummary::of(ok.iter().map(|o| o.kappa_hat)),
            sigma2_hat: QuantileSummary::of(ok.iter().map(|o| o.sigma2_hat)),
            sigma_beta2_hat: QuantileSummary::of(ok.iter().map(|o| o.sigma_beta2_hat)),
            boundary_fraction: if ok.is_empty() { f64::NAN } else { edge as f64 / ok.len() as f64 },
            failures: outcomes.len() - ok.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaStudy {
    pub case: Case,
    pub replicates: usize,
    pub seed: u64,
    pub true_sigma2: f64,
    pub generator: &'static str,
    pub true_mu: ModeSummary,
    pub zero_mu: ModeSummary,
    /// `median κ̂(μ=0) − median κ̂(μ true)`.
    pub median_kappa_difference: f64,
    /// Fraction of replicates where both runs succeeded and `κ̂(μ=0) < κ̂(μ true)`.
    pub fraction_zero_mu_smaller: f64,
    #[serde(skip)]
    pub raw_true_mu: Vec<Option<ReplicateOutcome>>,
    #[serde(skip)]
    pub raw_zero_mu: Vec<Option<ReplicateOutcome>>,
}

/// Paired selection runs: every replicate draws `y = ȳ + ε` once and runs
/// the selection with `μ = β̄` and with `μ = 0` on the same data.
pub fn mc_kappa_study(
    design: &Design,
    truth: &GroundTruth,
    prior: &PriorModel,
    sigma2: f64,
    case: Case,
    search: &SearchOptions,
    opts: &StudyOptions,
) -> Result<KappaStudy> {
    opts.check()?;
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let true_prior = prior.with_mu(truth.beta_bar().clone())?;
    let zero_prior = prior.with_zero_mu();
    let noise = GaussianSampler::new(design.w(), sigma2, "W")?;
    let objective = match case {
        Case::Case1 => Objective::Case1,
        Case::Case2 => Objective::Case2 { sigma2 },
    };
    let inner = search.sequential();

    let pairs = opts.execution.map_range(opts.replicates, |r| {
        let mut rng = replicate_rng(opts.seed, r as u64);
        let y = truth.y_bar() + noise.sample(&mut rng);
        let run = |p: &PriorModel| -> Option<ReplicateOutcome> {
            let problem = design.clone().with_observations(y.clone()).ok()?;
            let lik = MarginalLikelihood::new(&problem, p, search.path).ok()?;
            select_with(&lik, objective, &inner).ok().map(|s| ReplicateOutcome::from(&s))
        };
        (run(&true_prior), run(&zero_prior))
    });
    let (raw_true_mu, raw_zero_mu): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();

    let true_mu = ModeSummary::of(MuMode::TrueMu, &raw_true_mu);
    let zero_mu = ModeSummary::of(MuMode::ZeroMu, &raw_zero_mu);
    let both: Vec<(f64, f64)> = raw_true_mu
        .iter()
        .zip(&raw_zero_mu)
        .filter_map(|(a, b)| Some((a.as_ref()?.kappa_hat, b.as_ref()?.kappa_hat)))
        .collect();
    let smaller = both.iter().filter(|(t, z)| z < t).count();

    Ok(KappaStudy {
        case,
        replicates: opts.replicates,
        seed: opts.seed,
        true_sigma2: sigma2,
        generator: GENERATOR,
        median_kappa_difference: zero_mu.kappa_hat.median() - true_mu.kappa_hat.median(),
        fraction_zero_mu_smaller: if both.is_empty() { f64::NAN } else { smaller as f64 / both.len() as f64 },
        true_mu,
        zero_mu,
        raw_true_mu,
        raw_zero_mu,
    })
}
