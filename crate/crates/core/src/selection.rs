//! Selection of `κ` by minimizing the Case-1 or Case-2 objective.
//!
//! The search is a uniform grid in `log₁₀ κ` followed by golden-section
//! refinement between the neighbours of the grid minimum. A grid minimum on
//! either edge is reported as such and not refined.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::marginal::{log10_grid, MarginalLikelihood, Objective, ObjectiveValue, SolvePath};
use crate::model::{InverseProblem, PriorModel};

pub const GRID_POINTS: usize = 97;
pub const DEFAULT_LOG10_BRACKET: (f64, f64) = (-12.0, 12.0);
pub const DEFAULT_REL_TOL: f64 = 1e-6;
const MAX_REFINE_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryFlag {
    Interior,
    LowerEdge,
    UpperEdge,
}

impl BoundaryFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryFlag::Interior => "Interior",
            BoundaryFlag::LowerEdge => "LowerEdge",
            BoundaryFlag::UpperEdge => "UpperEdge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub log10_bracket: (f64, f64),
    pub rel_tol: f64,
    pub grid_points: usize,
    pub path: SolvePath,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            log10_bracket: DEFAULT_LOG10_BRACKET,
            rel_tol: DEFAULT_REL_TOL,
            grid_points: GRID_POINTS,
            path: SolvePath::Auto,
            execution: Execution::default(),
        }
    }
}

impl SearchOptions {
    /// Grid evaluated on the calling thread; used inside replicate loops.
    pub fn sequential(mut self) -> Self {
        self.execution = Execution::Sequential;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub kappa_hat: f64,
    pub objective: f64,
    pub value: T,
    pub boundary: BoundaryFlag,
    /// Every successful evaluation, sorted by `κ`.
    pub trace: Vec<(f64, T)>,
}

/// Minimizes `f(κ)` over `10^lo ..= 10^hi`. Evaluations returning an error or
/// a non-finite score count as failures; more than half the grid failing is
/// an error.
pub fn minimize_by<T, F, S>(f: F, score: S, opts: &SearchOptions) -> Result<Minimum<T>>
where
    T: Clone + Send,
    F: Fn(f64) -> Result<T> + Sync + Send,
    S: Fn(&T) -> f64,
{
    if !(opts.rel_tol > 0.0) {
        return Err(Error::Domain(format!("rel_tol must be positive, got {}", opts.rel_tol)));
    }
    let grid = log10_grid(opts.log10_bracket, opts.grid_points)?;
    let evaluated: Vec<Option<T>> = opts.execution.map_slice(&grid, |&x| f(10f64.powf(x)).ok());

    let scores: Vec<f64> = evaluated
        .iter()
        .map(|v| v.as_ref().map(&score).filter(|s| s.is_finite()).unwrap_or(f64::NAN))
        .collect();
    let failed = scores.iter().filter(|s| !s.is_finite()).count();
    if 2 * failed > grid.len() {
        return Err(Error::Evaluation(format!(
            "objective non-finite at {failed} of {} grid points",
            grid.len()
        )));
    }

    // first strict minimum: ties go to the smaller κ
    let mut best = usize::MAX;
    for (i, s) in scores.iter().enumerate() {
        if s.is_finite() && (best == usize::MAX || *s < scores[best]) {
            best = i;
        }
    }

    let mut trace: Vec<(f64, T, f64)> = grid
        .iter()
        .zip(evaluated)
        .zip(&scores)
        .filter_map(|((&x, v), &s)| v.filter(|_| s.is_finite()).map(|v| (x, v, s)))
        .collect();

    let boundary = if best == 0 {
        BoundaryFlag::LowerEdge
    } else if best == grid.len() - 1 {
        BoundaryFlag::UpperEdge
    } else {
        BoundaryFlag::Interior
    };

    if boundary == BoundaryFlag::Interior {
        let eval = |x: f64| -> (f64, Option<T>) {
            match f(10f64.powf(x)) {
                Ok(v) => {
                    let s = score(&v);
                    if s.is_finite() {
                        (s, Some(v))
                    } else {
                        (f64::INFINITY, None)
                    }
                }
                Err(_) => (f64::INFINITY, None),
            }
        };
        let mut record = |x: f64, r: (f64, Option<T>)| -> f64 {
            if let Some(v) = r.1 {
                trace.push((x, v, r.0));
            }
            r.0
        };
        let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = record(c, eval(c));
        let mut fd = record(d, eval(d));
        let mut iters = 0;
        while (b - a) * LN_10 > opts.rel_tol && iters < MAX_REFINE_ITERS {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = record(c, eval(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = record(d, eval(d));
            }
            iters += 1;
        }
    }

    trace.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut best_i = 0;
    for (i, p) in trace.iter().enumerate() {
        if p.2 < trace[best_i].2 {
            best_i = i;
        }
    }
    let (x, value, objective) = trace[best_i].clone();
    Ok(Minimum {
        kappa_hat: 10f64.powf(x),
        objective,
        value,
        boundary,
        trace: trace.into_iter().map(|(x, v, _)| (10f64.powf(x), v)).collect(),
    })
}

pub type ScalarTrace = Vec<(f64, f64)>;

/// Plain scalar form: returns `(κ̂, boundary flag, trace of (κ, f(κ)))`.
pub fn minimize_scalar<F>(
    objective: F,
    log10_bracket: (f64, f64),
    rel_tol: f64,
) -> Result<(f64, BoundaryFlag, ScalarTrace)>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let opts = SearchOptions {
        log10_bracket,
        rel_tol,
        ..SearchOptions::default()
    };
    let m = minimize_by(|k| Ok(objective(k)), |v: &f64| *v, &opts)?;
    Ok((m.kappa_hat, m.boundary, m.trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "1")]
    Case1,
    #[serde(rename = "2")]
    Case2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub case: Case,
    pub kappa_hat: f64,
    /// Estimated measurement variance (Case 1 only).
    pub sigma2_hat: Option<f64>,
    /// The supplied measurement variance (Case 2 only).
    pub sigma2_given: Option<f64>,
    pub sigma_beta2_hat: f64,
    pub objective_at_min: f64,
    pub boundary_flag: BoundaryFlag,
    pub mu_assumed_zero: bool,
    pub solve_path: SolvePath,
    pub trace: Vec<ObjectiveValue>,
}

impl SelectionResult {
    /// The measurement variance the result was computed with.
    pub fn sigma2(&self) -> f64 {
        self.sigma2_hat.or(self.sigma2_given).expect("one of the two is always set")
    }
}

pub fn select_with(likelihood: &MarginalLikelihood, objective: Objective, opts: &SearchOptions) -> Result<SelectionResult> {
    let min = minimize_by(|k| likelihood.objective(objective, k), |v| v.total, opts)?;
    let n = likelihood.n() as f64;
    let (case, sigma2_hat, sigma2_given, sigma2) = match objective {
        Objective::Case1 => {
            let s = min.value.quad_term / n;
            (Case::Case1, Some(s), None, s)
        }
        Objective::Case2 { sigma2 } => (Case::Case2, None, Some(sigma2), sigma2),
    };
    Ok(SelectionResult {
        case,
        kappa_hat: min.kappa_hat,
        sigma2_hat,
        sigma2_given,
        sigma_beta2_hat: sigma2 / min.kappa_hat,
        objective_at_min: min.objective,
        boundary_flag: min.boundary,
        mu_assumed_zero: likelihood.zero_mean(),
        solve_path: likelihood.path(),
        trace: min.trace.into_iter().map(|(_, v)| v).collect(),
    })
}

/// Both variances unknown.
pub fn select_case1(problem: &InverseProblem, prior: &PriorModel, opts: &SearchOptions) -> Result<SelectionResult> {
    let lik = MarginalLikelihood::new(problem, prior, opts.path)?;
    select_with(&lik, Objective::Case1, opts)
}

/// Measurement variance known.
pub fn select_case2(
    problem: &InverseProblem,
    prior: &PriorModel,
    sigma2: f64,
    opts: &SearchOptions,
) -> Result<SelectionResult> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let lik = MarginalLikelihood::new(problem, prior, opts.path)?;
    select_with(&lik, Objective::Case2 { sigma2 }, opts)
}
