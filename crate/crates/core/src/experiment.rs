//! Config-driven runs that tie generation, estimation, selection and the
//! bias studies into reproducible report files.
//!
//! A run is a pure function of its [`ExperimentConfig`]: the config written
//! to `config.json` reproduces `result.json` byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bias::{
    mc_kappa_study, mc_sigma2_study, MuMode, StudyOptions, DEFAULT_KAPPA_REPLICATES, DEFAULT_SIGMA2_REPLICATES,
    MIN_REPLICATES,
};
use crate::error::{Error, Result};
use crate::estimators::{bayes_estimate, ls_estimate, regularized_estimate, EstimateRecord};
use crate::io::{self, ProblemFile, TruthFile};
use crate::marginal::{sweep, MarginalLikelihood, Objective, ObjectiveValue};
use crate::model::{condition_estimate, validate_problem, Condition, GroundTruth, InverseProblem, PriorModel, ValidationReport};
use crate::problems::{generate, synthesize_observations, GeneratorSpec};
use crate::selection::{select_case1, select_with, Case, SearchOptions, GRID_POINTS};

pub const VERSION: &str = concat!("abic ", env!("CARGO_PKG_VERSION"));

/// Noise variance used to synthesize data when none is given.
pub const DEFAULT_SIGMA2: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Generate,
    Solve,
    SelectKappa,
    BiasStudy,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Source {
    /// A problem file, optionally with a truth sidecar.
    File { problem: String, truth: Option<String> },
    /// Generated problem; observations are synthesized from `seed`.
    Generator { spec: GeneratorSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Sigma2,
    Kappa,
}

/// Fully resolved run description.
///
/// `sigma2` is the noise variance for generated data and the known variance
/// for Case 2; for file sources `None` falls back to the file's value.
/// `mu_mode = None` keeps the prior mean as supplied by the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub source: Source,
    pub case: Case,
    pub mu_mode: Option<MuMode>,
    pub sigma2: Option<f64>,
    pub kappa: Option<f64>,
    pub search: SearchOptions,
    pub study: Study,
    pub replicates: usize,
    pub seed: u64,
    pub sweep_points: usize,
    pub raw: bool,
}

impl ExperimentConfig {
    /// Defaults for everything but the command and the input.
    pub fn new(command: Command, source: Source) -> Self {
        let generated = matches!(source, Source::Generator { .. });
        Self {
            command,
            source,
            case: Case::Case1,
            mu_mode: generated.then_some(MuMode::ZeroMu),
            sigma2: generated.then_some(DEFAULT_SIGMA2),
            kappa: None,
            search: SearchOptions::default(),
            study: Study::Sigma2,
            replicates: DEFAULT_SIGMA2_REPLICATES,
            seed: 0,
            sweep_points: GRID_POINTS,
            raw: false,
        }
    }

    pub fn default_replicates(study: Study) -> usize {
        match study {
            Study::Sigma2 => DEFAULT_SIGMA2_REPLICATES,
            Study::Kappa => DEFAULT_KAPPA_REPLICATES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (lo, hi) = self.search.log10_bracket;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("bracket must satisfy lo < hi, got ({lo}, {hi})"));
        }
        if !(self.search.rel_tol > 0.0) {
            return bad(format!("rel_tol must be positive, got {}", self.search.rel_tol));
        }
        if self.search.grid_points < 3 {
            return bad(format!("grid_points must be at least 3, got {}", self.search.grid_points));
        }
        if self.sweep_points < 2 {
            return bad(format!("sweep_points must be at least 2, got {}", self.sweep_points));
        }
        if let Some(s) = self.sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sigma2 must be positive, got {s}"));
            }
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k.is_finite()) {
                return bad(format!("kappa must be positive, got {k}"));
            }
        }
        match (&self.source, self.command) {
            (Source::File { .. }, Command::Generate) => return bad("generate needs a generator spec".into()),
            (Source::Generator { spec }, _) => spec.validate().map_err(|e| Error::Config(e.to_string()))?,
            _ => {}
        }
        if self.command == Command::BiasStudy {
            if self.replicates < MIN_REPLICATES {
                return bad(format!("at least {MIN_REPLICATES} replicates are required, got {}", self.replicates));
            }
            if self.raw && self.study == Study::Sigma2 {
                return bad("raw replicate output is only available for the kappa study".into());
            }
        }
        Ok(())
    }
}

/// Problem, prior and (if known) truth after applying the config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: InverseProblem,
    pub prior: PriorModel,
    pub sigma2: Option<f64>,
    pub truth: Option<GroundTruth>,
    pub generator_spec: Option<GeneratorSpec>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let (problem, prior, sigma2, truth, generator_spec) = match &config.source {
        Source::Generator { spec } => {
            let g = generate(spec)?;
            let sigma2 = config.sigma2.unwrap_or(DEFAULT_SIGMA2);
            let (y, truth) = synthesize_observations(&g.design, &g.exact_solution, sigma2, config.seed)?;
            let prior = PriorModel::new(g.exact_solution.clone(), None, None)?;
            let problem = g.design.with_observations(y)?;
            (problem, prior, Some(sigma2), Some(truth), Some(g.spec))
        }
        Source::File { problem, truth } => {
            let loaded = io::read_problem(Path::new(problem))?;
            let (truth, spec) = match truth {
                Some(path) => {
                    let tf: TruthFile = io::read_json(Path::new(path))?;
                    let gt = GroundTruth::new(loaded.problem.design(), DVector::from_vec(tf.exact_solution))?;
                    (Some(gt), Some(tf.generator_spec))
                }
                None => (None, None),
            };
            (loaded.problem, loaded.prior, config.sigma2.or(loaded.sigma2), truth, spec)
        }
    };
    let prior = match (config.mu_mode, &config.source) {
        (Some(MuMode::ZeroMu), _) => prior.with_zero_mu(),
        (Some(MuMode::TrueMu), Source::Generator { .. }) => prior,
        (Some(MuMode::TrueMu), Source::File { .. }) => match (&truth, prior.mu_assumed_zero()) {
            (Some(t), true) => prior.with_mu(t.beta_bar().clone())?,
            (None, true) => {
                return Err(Error::Config(
                    "mu mode `true` needs `mu` in the problem file or a truth sidecar".into(),
                ))
            }
            _ => prior,
        },
        (None, _) => prior,
    };
    Ok(Prepared {
        problem,
        prior,
        sigma2,
        truth,
        generator_spec,
    })
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    config: &'a ExperimentConfig,
    mu_assumed_zero: bool,
    result: T,
}

#[derive(Debug, Serialize)]
pub struct GenerateResult {
    pub problem_file: &'static str,
    pub truth_file: &'static str,
    pub n: usize,
    pub t: usize,
    pub sigma2: f64,
    pub condition: Condition,
    pub validation: ValidationReport,
}

#[derive(Debug, Serialize)]
pub struct SolveResult {
    pub kappa: f64,
    /// `config`, `variances` (σ²/σ_β²) or `case1_selection`.
    pub kappa_source: &'static str,
    pub sigma2: f64,
    pub sigma_beta2: f64,
    pub ls: Option<EstimateRecord>,
    pub ls_error: Option<String>,
    pub regularized: EstimateRecord,
    pub bayes: EstimateRecord,
    pub validation: ValidationReport,
}

#[derive(Debug, Serialize)]
pub struct SweepResult {
    pub case: Case,
    pub log10_bracket: (f64, f64),
    pub points: usize,
    pub values: Vec<ObjectiveValue>,
}

/// Everything a run produces, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
}

impl Outputs {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

fn objective_for(case: Case, sigma2: Option<f64>) -> Result<Objective> {
    match case {
        Case::Case1 => Ok(Objective::Case1),
        Case::Case2 => sigma2
            .map(|sigma2| Objective::Case2 { sigma2 })
            .ok_or_else(|| Error::Config("case 2 needs a known sigma2".into())),
    }
}

fn envelope<T: Serialize>(config: &ExperimentConfig, mu_assumed_zero: bool, result: T) -> Result<String> {
    io::to_json_string(&Envelope {
        version: VERSION,
        config,
        mu_assumed_zero,
        result,
    })
}

/// Runs the pipeline in memory.
pub fn execute(config: &ExperimentConfig) -> Result<Outputs> {
    config.validate()?;
    let p = prepare(config)?;
    let zero = p.prior.mu_assumed_zero();
    let mut files = vec![("config.json".to_string(), io::to_json_string(config)?)];

    match config.command {
        Command::Generate => {
            let truth = p.truth.as_ref().expect("generated problems carry their truth");
            let spec = p.generator_spec.expect("generated problems carry their spec");
            let problem_file = ProblemFile::from_model(&p.problem, Some(&p.prior), p.sigma2);
            let truth_file = TruthFile {
                exact_solution: truth.beta_bar().iter().copied().collect(),
                generator_spec: spec,
            };
            let result = GenerateResult {
                problem_file: "problem.json",
                truth_file: "truth.json",
                n: p.problem.n(),
                t: p.problem.t(),
                sigma2: p.sigma2.unwrap_or(DEFAULT_SIGMA2),
                condition: condition_estimate(&p.problem),
                validation: validate_problem(&p.problem, &p.prior)?,
            };
            files.push(("problem.json".into(), io::to_json_string(&problem_file)?));
            files.push(("truth.json".into(), io::to_json_string(&truth_file)?));
            files.push(("result.json".into(), envelope(config, zero, result)?));
        }
        Command::Solve => {
            let validation = validate_problem(&p.problem, &p.prior)?;
            let (kappa, kappa_source) = match (config.kappa, p.sigma2, p.prior.sigma_beta2()) {
                (Some(k), _, _) => (k, "config"),
                (None, Some(s), Some(sb)) => (s / sb, "variances"),
                (None, _, _) => (select_case1(&p.problem, &p.prior, &config.search)?.kappa_hat, "case1_selection"),
            };
            let sigma2 = match p.sigma2 {
                Some(s) => s,
                None => MarginalLikelihood::new(&p.problem, &p.prior, config.search.path)?.sigma2_hat(kappa)?,
            };
            let sigma_beta2 = sigma2 / kappa;
            let (ls, ls_error) = match ls_estimate(&p.problem) {
                Ok(e) => (Some(e.record()), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let result = SolveResult {
                kappa,
                kappa_source,
                sigma2,
                sigma_beta2,
                ls,
                ls_error,
                regularized: regularized_estimate(&p.problem, p.prior.w_beta(), kappa)?.record(),
                bayes: bayes_estimate(&p.problem, &p.prior, sigma2, sigma_beta2)?.record(),
                validation,
            };
            files.push(("result.json".into(), envelope(config, zero, result)?));
        }
        Command::SelectKappa => {
            let objective = objective_for(config.case, p.sigma2)?;
            let lik = MarginalLikelihood::new(&p.problem, &p.prior, config.search.path)?;
            let result = select_with(&lik, objective, &config.search)?;
            files.push(("sweep.csv".into(), io::sweep_csv(&result.trace)));
            files.push(("result.json".into(), envelope(config, zero, &result)?));
        }
        Command::Sweep => {
            let objective = objective_for(config.case, p.sigma2)?;
            let lik = MarginalLikelihood::new(&p.problem, &p.prior, config.search.path)?;
            let values = sweep(&lik, objective, config.search.log10_bracket, config.sweep_points)?;
            files.push(("sweep.csv".into(), io::sweep_csv(&values)));
            let result = SweepResult {
                case: config.case,
                log10_bracket: config.search.log10_bracket,
                points: config.sweep_points,
                values,
            };
            files.push(("result.json".into(), envelope(config, zero, result)?));
        }
        Command::BiasStudy => {
            let truth = p
                .truth
                .as_ref()
                .ok_or_else(|| Error::Config("bias studies need a generator spec or a truth sidecar".into()))?;
            let sigma2 = p
                .sigma2
                .ok_or_else(|| Error::Config("bias studies need the true sigma2".into()))?;
            let opts = StudyOptions::new(config.replicates, config.seed);
            match config.study {
                Study::Sigma2 => {
                    let mode = config
                        .mu_mode
                        .unwrap_or(if zero { MuMode::ZeroMu } else { MuMode::TrueMu });
                    let kappa = match config.kappa {
                        Some(k) => k,
                        None => select_case1(&p.problem, &p.prior.with_zero_mu(), &config.search)?.kappa_hat,
                    };
                    let report = mc_sigma2_study(
                        p.problem.design(),
                        truth,
                        &p.prior,
                        sigma2,
                        kappa,
                        mode,
                        &opts,
                    )?;
                    files.push(("result.json".into(), envelope(config, mode == MuMode::ZeroMu, report)?));
                }
                Study::Kappa => {
                    let study = mc_kappa_study(
                        p.problem.design(),
                        truth,
                        &p.prior,
                        sigma2,
                        config.case,
                        &config.search,
                        &opts,
                    )?;
                    if config.raw {
                        files.push(("replicates_true_mu.csv".into(), io::replicates_csv(&study.raw_true_mu)));
                        files.push(("replicates_zero_mu.csv".into(), io::replicates_csv(&study.raw_zero_mu)));
                    }
                    // both modes are run; the flag reflects the zero-mean arm
                    files.push(("result.json".into(), envelope(config, true, &study)?));
                }
            }
        }
    }
    Ok(Outputs { files })
}

/// Runs the pipeline and writes its files into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let outputs = execute(config)?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::with_capacity(outputs.files.len());
    for (name, contents) in &outputs.files {
        let path = out_dir.join(name);
        io::write_text(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub version: &'static str,
    pub code: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl ErrorReport {
    pub fn of(e: &Error) -> Self {
        Self {
            version: VERSION,
            code: e.code(),
            exit_code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phillips(command: Command) -> ExperimentConfig {
        ExperimentConfig::new(
            command,
            Source::Generator {
                spec: GeneratorSpec::phillips(16),
            },
        )
    }

    #[test]
    fn defaults_are_resolved() {
        let c = phillips(Command::SelectKappa);
        assert_eq!(c.mu_mode, Some(MuMode::ZeroMu));
        assert_eq!(c.sigma2, Some(DEFAULT_SIGMA2));
        assert_eq!(c.search.grid_points, GRID_POINTS);
        let json = io::to_json_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let mut v = serde_json::to_value(phillips(Command::Sweep)).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let mut c = phillips(Command::SelectKappa);
        c.search.log10_bracket = (2.0, 1.0);
        assert!(matches!(execute(&c), Err(Error::Config(_))));

        let mut c = phillips(Command::BiasStudy);
        c.replicates = 10;
        assert_eq!(execute(&c).unwrap_err().exit_code(), 2);

        let c = ExperimentConfig::new(
            Command::Generate,
            Source::File {
                problem: "p.json".into(),
                truth: None,
            },
        );
        assert!(matches!(execute(&c), Err(Error::Config(_))));
    }

    #[test]
    fn missing_problem_file_is_io_error() {
        let c = ExperimentConfig::new(
            Command::SelectKappa,
            Source::File {
                problem: "/nonexistent/problem.json".into(),
                truth: None,
            },
        );
        assert_eq!(execute(&c).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn selection_outputs() {
        let out = execute(&phillips(Command::SelectKappa)).unwrap();
        assert!(out.get("config.json").is_some());
        assert!(out.get("sweep.csv").unwrap().starts_with(io::SWEEP_HEADER));
        let v: serde_json::Value = serde_json::from_str(out.get("result.json").unwrap()).unwrap();
        assert_eq!(v["version"], VERSION);
        assert_eq!(v["mu_assumed_zero"], true);
        assert_eq!(v["result"]["case"], "1");
        assert!(v["result"]["kappa_hat"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn case2_uses_generator_sigma2() {
        let mut c = phillips(Command::Sweep);
        c.case = Case::Case2;
        c.sweep_points = 5;
        let out = execute(&c).unwrap();
        assert_eq!(out.get("sweep.csv").unwrap().lines().count(), 6);
    }

    #[test]
    fn solve_reports_all_estimators() {
        let mut c = phillips(Command::Solve);
        c.kappa = Some(1e-3);
        let out = execute(&c).unwrap();
        let v: serde_json::Value = serde_json::from_str(out.get("result.json").unwrap()).unwrap();
        assert_eq!(v["result"]["kappa_source"], "config");
        assert_eq!(v["result"]["regularized"]["beta_hat"].as_array().unwrap().len(), 16);
        // with μ = 0 the two coincide up to roundoff
        let r = v["result"]["regularized"]["beta_hat"].as_array().unwrap();
        let b = v["result"]["bayes"]["beta_hat"].as_array().unwrap();
        for (x, y) in r.iter().zip(b) {
            assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-8);
        }
    }
}
