//! JSON problem files, truth sidecars and CSV traces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bias::ReplicateOutcome;
use crate::error::{Error, Result};
use crate::marginal::ObjectiveValue;
use crate::model::{InverseProblem, PriorModel};
use crate::problems::GeneratorSpec;

/// On-disk problem layout. Matrices are row-major arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(rename = "W_beta", default, skip_serializing_if = "Option::is_none")]
    pub w_beta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_beta2: Option<f64>,
}

/// A problem file turned into model objects.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: InverseProblem,
    pub prior: PriorModel,
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub exact_solution: Vec<f64>,
    pub generator_spec: GeneratorSpec,
}

pub fn matrix_from_rows(rows: &[Vec<f64>], field: &'static str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::dim(field, "non-empty matrix", format!("{r}×{c}")));
    }
    if let Some(bad) = rows.iter().find(|row| row.len() != c) {
        return Err(Error::dim(field, format!("rows of length {c}"), format!("a row of length {}", bad.len())));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|row| row.iter().copied().collect()).collect()
}

impl ProblemFile {
    pub fn from_model(problem: &InverseProblem, prior: Option<&PriorModel>, sigma2: Option<f64>) -> Self {
        let identity = |m: &DMatrix<f64>| *m == DMatrix::identity(m.nrows(), m.ncols());
        let w = (!identity(problem.w())).then(|| matrix_to_rows(problem.w()));
        let (w_beta, mu, sigma_beta2) = match prior {
            Some(p) => (
                (!identity(p.w_beta())).then(|| matrix_to_rows(p.w_beta())),
                (!p.mu_assumed_zero()).then(|| p.mu().iter().copied().collect()),
                p.sigma_beta2(),
            ),
            None => (None, None, None),
        };
        Self {
            a: matrix_to_rows(problem.a()),
            y: problem.y().iter().copied().collect(),
            w,
            w_beta,
            mu,
            sigma2,
            sigma_beta2,
        }
    }

    pub fn into_model(self) -> Result<LoadedProblem> {
        let a = matrix_from_rows(&self.a, "A")?;
        let w = self.w.as_deref().map(|w| matrix_from_rows(w, "W")).transpose()?;
        let problem = InverseProblem::new(a, DVector::from_vec(self.y), w)?;
        let w_beta = self.w_beta.as_deref().map(|w| matrix_from_rows(w, "W_beta")).transpose()?;
        let t = problem.t();
        let prior = match self.mu {
            Some(mu) => {
                if mu.len() != t {
                    return Err(Error::dim("mu", t, mu.len()));
                }
                PriorModel::new(DVector::from_vec(mu), w_beta, self.sigma_beta2)?
            }
            None => PriorModel::zero_mean(w_beta.unwrap_or_else(|| DMatrix::identity(t, t)), self.sigma_beta2)?,
        };
        if let Some(s) = self.sigma2 {
            if !(s > 0.0) {
                return Err(Error::Domain(format!("sigma2 must be positive, got {s}")));
            }
        }
        Ok(LoadedProblem {
            problem,
            prior,
            sigma2: self.sigma2,
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: "<memory>".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn read_problem(path: &Path) -> Result<LoadedProblem> {
    read_json::<ProblemFile>(path)?.into_model()
}

pub const SWEEP_HEADER: &str = "kappa,quad_term,logdet_term,objective,case";
pub const REPLICATES_HEADER: &str = "replicate,sigma2_hat,kappa_hat,sigma_beta2_hat,boundary_flag";

fn num(x: f64) -> String {
    // 17 significant digits
    format!("{x:.16e}")
}

pub fn sweep_csv(rows: &[ObjectiveValue]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(r.kappa),
            num(r.quad_term),
            num(r.logdet_term),
            num(r.total),
            r.case_tag.as_str()
        );
    }
    out
}

/// Failed replicates appear with empty fields and `failed` as the flag.
pub fn replicates_csv(rows: &[Option<ReplicateOutcome>]) -> String {
    let mut out = String::from(REPLICATES_HEADER);
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = match r {
            Some(r) => writeln!(
                out,
                "{i},{},{},{},{}",
                num(r.sigma2_hat),
                num(r.kappa_hat),
                num(r.sigma_beta2_hat),
                r.boundary_flag.as_str()
            ),
            None => writeln!(out, "{i},,,,failed"),
        };
    }
    out
}
