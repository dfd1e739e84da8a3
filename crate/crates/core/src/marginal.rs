//! Marginal distribution of the measurements and the ABIC objectives.
//!
//! Integrating `β` out of the joint Gaussian density leaves
//! `y ~ N(Aμ, Σ_py)` with `Σ_py = W⁻¹σ² + A W_β⁻¹ Aᵀ σ_β²`. Writing
//! `κ = σ²/σ_β²` gives `Σ_py = σ² E_py` with `E_py = W⁻¹ + A W_β⁻¹ Aᵀ / κ`,
//! and every objective below is a combination of two terms evaluated at a
//! residual `r = y − Aμ`:
//!
//! * the quadratic form `rᵀ E_py⁻¹ r` (non-decreasing in `κ`), and
//! * the log-determinant `ln det E_py` (non-increasing in `κ`).
//!
//! Two evaluation paths are provided. The direct path factors the n×n
//! matrix `E_py`, whose condition number grows like `1/κ`; it is kept as a
//! cross-check. The reduced path, used by default, only factors t×t
//! matrices: the quadratic
//! form is the minimum of `(r − Ab)ᵀW(r − Ab) + κ bᵀW_β b` over `b`, which
//! equals the Woodbury expansion `rᵀ(W − WA(AᵀWA + κW_β)⁻¹AᵀW)r` without its
//! cancellation, and the log-determinant comes from the determinant lemma
//! `ln det E_py = −ln det W + ln det(W_β + AᵀWA/κ) − ln det W_β`.
//!
//! Objectives omit the additive constant `n ln 2π`;
//! [`log_marginal_density`] restores it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor};
use crate::model::{Design, InverseProblem, PriorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolvePath {
    /// Currently always the reduced path.
    #[default]
    Auto,
    /// n×n factorization of `E_py`.
    Direct,
    /// t×t Woodbury / determinant-lemma path.
    Reduced,
}

impl SolvePath {
    fn resolve(self) -> SolvePath {
        match self {
            SolvePath::Auto => SolvePath::Reduced,
            p => p,
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(())
}

fn check_prior(design: &Design, w_beta: &DMatrix<f64>) -> Result<()> {
    let t = design.t();
    if w_beta.nrows() != t || w_beta.ncols() != t {
        return Err(Error::dim(
            "W_beta",
            format!("{t}×{t}"),
            format!("{}×{}", w_beta.nrows(), w_beta.ncols()),
        ));
    }
    Ok(())
}

/// `y − Aμ`.
pub fn prior_residual(problem: &InverseProblem, prior: &PriorModel) -> Result<DVector<f64>> {
    if prior.t() != problem.t() {
        return Err(Error::dim("mu", problem.t(), prior.t()));
    }
    Ok(problem.y() - problem.a() * prior.mu())
}

/// `W⁻¹σ² + A W_β⁻¹ Aᵀ σ_β²`. `σ_β² = 0` is accepted and yields `W⁻¹σ²`.
pub fn build_sigma_py(design: &Design, w_beta: &DMatrix<f64>, sigma2: f64, sigma_beta2: f64) -> Result<DMatrix<f64>> {
    check_sigma2(sigma2)?;
    if !(sigma_beta2 >= 0.0) || !sigma_beta2.is_finite() {
        return Err(Error::Domain(format!("sigma_beta2 must be non-negative, got {sigma_beta2}")));
    }
    check_prior(design, w_beta)?;
    let w_inv = SpdFactor::new(design.w(), "W")?.inverse();
    let wb_inv = SpdFactor::new(w_beta, "W_beta")?.inverse();
    let mut s = w_inv * sigma2 + design.a() * wb_inv * design.a().transpose() * sigma_beta2;
    linalg::symmetrize(&mut s);
    Ok(s)
}

/// `E_py` at one `κ`, with its factorization.
#[derive(Debug, Clone)]
pub struct MarginalOperators {
    kappa: f64,
    e_py: DMatrix<f64>,
    factor: SpdFactor,
    w_inv: DMatrix<f64>,
}

impl MarginalOperators {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn e_py(&self) -> &DMatrix<f64> {
        &self.e_py
    }

    /// `Σ_py = σ² E_py`, valid when `σ_β² = σ²/κ`.
    pub fn sigma_py(&self, sigma2: f64) -> DMatrix<f64> {
        &self.e_py * sigma2
    }

    pub fn logdet_e_py(&self) -> f64 {
        self.factor.logdet()
    }

    /// `rᵀ E_py⁻¹ r`.
    pub fn quad(&self, r: &DVector<f64>) -> f64 {
        self.factor.inv_quad(r)
    }

    pub fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(r)
    }

    /// `tr(E_py⁻¹ W⁻¹)`.
    pub fn trace_e_inv_w_inv(&self) -> f64 {
        self.factor.solve_mat(&self.w_inv).trace()
    }
}

/// Builds `E_py = W⁻¹ + A W_β⁻¹ Aᵀ/κ` densely.
pub fn build_e_py(design: &Design, w_beta: &DMatrix<f64>, kappa: f64) -> Result<MarginalOperators> {
    check_kappa(kappa)?;
    check_prior(design, w_beta)?;
    let w_inv = SpdFactor::new(design.w(), "W")?.inverse();
    let wb_inv = SpdFactor::new(w_beta, "W_beta")?.inverse();
    let mut e_py = &w_inv + design.a() * wb_inv * design.a().transpose() / kappa;
    linalg::symmetrize(&mut e_py);
    let factor = SpdFactor::new(&e_py, "E_py")?;
    Ok(MarginalOperators {
        kappa,
        e_py,
        factor,
        w_inv,
    })
}

/// `ln det E_py` through t×t determinants only.
pub fn logdet_e_py_lemma(design: &Design, w_beta: &DMatrix<f64>, kappa: f64) -> Result<f64> {
    let m = Marginal::new(design, w_beta, SolvePath::Reduced)?;
    Ok(m.at(kappa)?.logdet_e_py())
}

/// Precomputed pieces shared by evaluations at different `κ` for a fixed
/// design and prior weight.
#[derive(Debug, Clone)]
pub struct Marginal {
    design: Design,
    w_beta: DMatrix<f64>,
    path: SolvePath,
    w_logdet: f64,
    w_beta_logdet: f64,
    /// `AᵀWA`.
    normal: DMatrix<f64>,
    /// `WA`, used to form `AᵀWr`.
    wa: DMatrix<f64>,
    /// Direct path only: `W⁻¹` and `A W_β⁻¹ Aᵀ`.
    w_inv: Option<DMatrix<f64>>,
    a_wb_inv_at: Option<DMatrix<f64>>,
}

impl Marginal {
    pub fn new(design: &Design, w_beta: &DMatrix<f64>, path: SolvePath) -> Result<Self> {
        check_prior(design, w_beta)?;
        let wf = SpdFactor::new(design.w(), "W")?;
        let wbf = SpdFactor::new(w_beta, "W_beta")?;
        let path = path.resolve();
        let wa = design.w() * design.a();
        let mut normal = design.a().transpose() * &wa;
        linalg::symmetrize(&mut normal);
        let (w_inv, a_wb_inv_at) = if path == SolvePath::Direct {
            let mut k = design.a() * wbf.inverse() * design.a().transpose();
            linalg::symmetrize(&mut k);
            (Some(wf.inverse()), Some(k))
        } else {
            (None, None)
        };
        Ok(Self {
            design: design.clone(),
            w_beta: w_beta.clone(),
            path,
            w_logdet: wf.logdet(),
            w_beta_logdet: wbf.logdet(),
            normal,
            wa,
            w_inv,
            a_wb_inv_at,
        })
    }

    /// The resolved path, never `Auto`.
    pub fn path(&self) -> SolvePath {
        self.path
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    /// Factorizes the operator at `κ`.
    pub fn at(&self, kappa: f64) -> Result<KappaOperator<'_>> {
        check_kappa(kappa)?;
        let inner = match self.path {
            SolvePath::Direct => {
                let w_inv = self.w_inv.as_ref().expect("direct path");
                let mut e = w_inv + self.a_wb_inv_at.as_ref().expect("direct path") / kappa;
                linalg::symmetrize(&mut e);
                Inner::Direct(SpdFactor::new(&e, "E_py")?)
            }
            _ => {
                let mut m = &self.normal + &self.w_beta * kappa;
                linalg::symmetrize(&mut m);
                Inner::Reduced(SpdFactor::new(&m, "AᵀWA + κW_β")?)
            }
        };
        Ok(KappaOperator {
            owner: self,
            kappa,
            inner,
        })
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Direct(SpdFactor),
    /// Factor of `AᵀWA + κW_β`.
    Reduced(SpdFactor),
}

/// `E_py` factorized at a fixed `κ`; cheap to apply to many residuals.
#[derive(Debug, Clone)]
pub struct KappaOperator<'a> {
    owner: &'a Marginal,
    kappa: f64,
    inner: Inner,
}

impl KappaOperator<'_> {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn logdet_e_py(&self) -> f64 {
        match &self.inner {
            Inner::Direct(f) => f.logdet(),
            Inner::Reduced(f) => {
                // det(W_β + N/κ) = det(N + κW_β) / κᵗ
                -self.owner.w_logdet + f.logdet_scaled(self.kappa) - self.owner.w_beta_logdet
            }
        }
    }

    /// `rᵀ E_py⁻¹ r`.
    pub fn quad(&self, r: &DVector<f64>) -> f64 {
        match &self.inner {
            Inner::Direct(f) => f.inv_quad(r),
            Inner::Reduced(f) => {
                let b = f.solve(&(self.owner.wa.transpose() * r));
                let e = r - self.owner.design.a() * &b;
                let fit = e.dot(&(self.owner.design.w() * &e));
                let pen = self.kappa * b.dot(&(&self.owner.w_beta * &b));
                fit + pen
            }
        }
    }

    /// `tr(E_py⁻¹ W⁻¹)`.
    pub fn trace_e_inv_w_inv(&self) -> f64 {
        match &self.inner {
            Inner::Direct(f) => f.solve_mat(self.owner.w_inv.as_ref().expect("direct path")).trace(),
            Inner::Reduced(f) => self.owner.n() as f64 - f.solve_mat(&self.owner.normal).trace(),
        }
    }

    pub fn split_terms(&self, r: &DVector<f64>) -> Terms {
        Terms {
            quad_term: self.quad(r),
            logdet_term: self.logdet_e_py(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub quad_term: f64,
    pub logdet_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    Case1,
    Case1ZeroMean,
    Case2,
    Case2ZeroMean,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case1ZeroMean => "case1_zero_mean",
            CaseTag::Case2 => "case2",
            CaseTag::Case2ZeroMean => "case2_zero_mean",
        }
    }
}

/// Which objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Both variances unknown; `σ²` concentrated out.
    Case1,
    /// `σ²` known.
    Case2 { sigma2: f64 },
}

impl Objective {
    pub fn tag(self, zero_mean: bool) -> CaseTag {
        match (self, zero_mean) {
            (Objective::Case1, false) => CaseTag::Case1,
            (Objective::Case1, true) => CaseTag::Case1ZeroMean,
            (Objective::Case2 { .. }, false) => CaseTag::Case2,
            (Objective::Case2 { .. }, true) => CaseTag::Case2ZeroMean,
        }
    }

    pub fn assemble(self, n: usize, kappa: f64, terms: Terms, zero_mean: bool) -> Result<ObjectiveValue> {
        let total = match self {
            Objective::Case1 => {
                if !(terms.quad_term > 0.0) {
                    return Err(Error::Degenerate(
                        "quadratic form of y − Aμ is zero; the Case-1 objective is unbounded".to_string(),
                    ));
                }
                n as f64 * terms.quad_term.ln() + terms.logdet_term
            }
            Objective::Case2 { sigma2 } => terms.quad_term / sigma2 + terms.logdet_term,
        };
        Ok(ObjectiveValue {
            total,
            quad_term: terms.quad_term,
            logdet_term: terms.logdet_term,
            kappa,
            case_tag: self.tag(zero_mean),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub total: f64,
    pub quad_term: f64,
    pub logdet_term: f64,
    pub kappa: f64,
    pub case_tag: CaseTag,
}

/// The marginal likelihood of one measured problem under one prior.
#[derive(Debug, Clone)]
pub struct MarginalLikelihood {
    marginal: Marginal,
    residual: DVector<f64>,
    zero_mean: bool,
}

impl MarginalLikelihood {
    pub fn new(problem: &InverseProblem, prior: &PriorModel, path: SolvePath) -> Result<Self> {
        let residual = prior_residual(problem, prior)?;
        let marginal = Marginal::new(problem.design(), prior.w_beta(), path)?;
        Ok(Self {
            marginal,
            residual,
            zero_mean: prior.mu_assumed_zero() || prior.mu().iter().all(|&m| m == 0.0),
        })
    }

    pub fn n(&self) -> usize {
        self.marginal.n()
    }

    pub fn path(&self) -> SolvePath {
        self.marginal.path()
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    pub fn zero_mean(&self) -> bool {
        self.zero_mean
    }

    pub fn split_terms(&self, kappa: f64) -> Result<Terms> {
        Ok(self.marginal.at(kappa)?.split_terms(&self.residual))
    }

    pub fn objective(&self, objective: Objective, kappa: f64) -> Result<ObjectiveValue> {
        if let Objective::Case2 { sigma2 } = objective {
            check_sigma2(sigma2)?;
        }
        let terms = self.split_terms(kappa)?;
        objective.assemble(self.n(), kappa, terms, self.zero_mean)
    }

    /// `n ln σ² + ln det E_py + rᵀE_py⁻¹r/σ²`.
    pub fn neg_log_lik_kappa(&self, sigma2: f64, kappa: f64) -> Result<f64> {
        check_sigma2(sigma2)?;
        let t = self.split_terms(kappa)?;
        Ok(self.n() as f64 * sigma2.ln() + t.logdet_term + t.quad_term / sigma2)
    }

    /// `rᵀE_py⁻¹r / n`.
    pub fn sigma2_hat(&self, kappa: f64) -> Result<f64> {
        Ok(self.split_terms(kappa)?.quad_term / self.n() as f64)
    }
}

/// `ln det Σ_py + rᵀΣ_py⁻¹r`, from the n×n covariance itself.
pub fn neg_log_lik_variances(problem: &InverseProblem, prior: &PriorModel, sigma2: f64, sigma_beta2: f64) -> Result<f64> {
    if !(sigma_beta2 > 0.0) {
        return Err(Error::Domain(format!("sigma_beta2 must be positive, got {sigma_beta2}")));
    }
    let r = prior_residual(problem, prior)?;
    let s = build_sigma_py(problem.design(), prior.w_beta(), sigma2, sigma_beta2)?;
    let f = SpdFactor::new(&s, "Sigma_py")?;
    Ok(f.logdet() + f.inv_quad(&r))
}

/// `log m(y | σ², σ_β²)` including the `−(n/2) ln 2π` constant.
pub fn log_marginal_density(problem: &InverseProblem, prior: &PriorModel, sigma2: f64, sigma_beta2: f64) -> Result<f64> {
    let l = neg_log_lik_variances(problem, prior, sigma2, sigma_beta2)?;
    Ok(-0.5 * problem.n() as f64 * (2.0 * PI).ln() - 0.5 * l)
}

pub fn neg_log_lik_kappa(problem: &InverseProblem, prior: &PriorModel, sigma2: f64, kappa: f64) -> Result<f64> {
    MarginalLikelihood::new(problem, prior, SolvePath::Auto)?.neg_log_lik_kappa(sigma2, kappa)
}

/// Measurement variance estimate at fixed `κ`; with `μ = 0` this is the
/// zero-mean variant `yᵀE_py⁻¹y/n`.
pub fn sigma2_hat(problem: &InverseProblem, prior: &PriorModel, kappa: f64) -> Result<f64> {
    MarginalLikelihood::new(problem, prior, SolvePath::Auto)?.sigma2_hat(kappa)
}

pub fn split_terms(problem: &InverseProblem, prior: &PriorModel, kappa: f64) -> Result<(f64, f64)> {
    let t = MarginalLikelihood::new(problem, prior, SolvePath::Auto)?.split_terms(kappa)?;
    Ok((t.quad_term, t.logdet_term))
}

/// `n ln(rᵀE_py⁻¹r) + ln det E_py`.
pub fn abic_case1(problem: &InverseProblem, prior: &PriorModel, kappa: f64) -> Result<ObjectiveValue> {
    MarginalLikelihood::new(problem, prior, SolvePath::Auto)?.objective(Objective::Case1, kappa)
}

/// `rᵀE_py⁻¹r/σ² + ln det E_py`.
pub fn abic_case2(problem: &InverseProblem, prior: &PriorModel, sigma2: f64, kappa: f64) -> Result<ObjectiveValue> {
    MarginalLikelihood::new(problem, prior, SolvePath::Auto)?.objective(Objective::Case2 { sigma2 }, kappa)
}

/// Evaluates `objective` on `points` log-spaced values of `κ` spanning
/// `10^lo ..= 10^hi`.
pub fn sweep(
    likelihood: &MarginalLikelihood,
    objective: Objective,
    log10_bracket: (f64, f64),
    points: usize,
) -> Result<Vec<ObjectiveValue>> {
    log10_grid(log10_bracket, points)?
        .into_iter()
        .map(|x| likelihood.objective(objective, 10f64.powf(x)))
        .collect()
}

/// `points` equally spaced values over `[lo, hi]`, endpoints included.
pub fn log10_grid((lo, hi): (f64, f64), points: usize) -> Result<Vec<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    if points < 2 {
        return Err(Error::Domain(format!("grid needs at least 2 points, got {points}")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i == points - 1 { hi } else { lo + step * i as f64 })
        .collect())
}
