use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use abic::bias::MuMode;
use abic::error::Error;
use abic::experiment::{run_experiment, Command, ErrorReport, ExperimentConfig, Source, Study};
use abic::io;
use abic::marginal::SolvePath;
use abic::problems::GeneratorSpec;
use abic::selection::Case;

/// Marginal-likelihood selection of regularization parameters.
#[derive(Parser, Debug)]
#[command(name = "abic", version)]
struct Cli {
    /// Re-run a previously written config.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "abic-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a test problem and synthetic observations.
    Generate(RunArgs),
    /// Least-squares, regularized and Bayesian point estimates.
    Solve(RunArgs),
    /// Select κ by minimizing the marginal-likelihood objective.
    SelectKappa(RunArgs),
    /// Monte Carlo study of σ̂² (or of κ̂ with --study kappa).
    BiasStudy(RunArgs),
    /// Evaluate the objective on a log-spaced κ grid.
    Sweep(RunArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Phillips,
    Spectrum,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CaseArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MuArg {
    True,
    Zero,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum StudyArg {
    Sigma2,
    Kappa,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PathArg {
    Auto,
    Direct,
    Reduced,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Problem JSON file.
    #[arg(long, conflicts_with = "kind")]
    problem: Option<PathBuf>,
    /// Truth sidecar for a problem file.
    #[arg(long, requires = "problem")]
    truth: Option<PathBuf>,

    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Number of parameters (spectrum only).
    #[arg(long)]
    t: Option<usize>,
    /// Decades of singular-value decay (spectrum only).
    #[arg(long, default_value_t = 6.0)]
    decay: f64,

    #[arg(long = "case", value_enum, default_value = "1")]
    case: CaseArg,
    #[arg(long = "mu-mode", value_enum)]
    mu_mode: Option<MuArg>,
    /// Noise variance (generated data) or known variance (case 2).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Fixed κ for solve and the σ² study.
    #[arg(long)]
    kappa: Option<f64>,
    /// Search bracket in log10 κ.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    bracket: Option<Vec<f64>>,
    #[arg(long = "rel-tol")]
    rel_tol: Option<f64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    #[arg(long = "solve-path", value_enum)]
    solve_path: Option<PathArg>,

    #[arg(long, value_enum, default_value = "sigma2")]
    study: StudyArg,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sweep resolution.
    #[arg(long)]
    points: Option<usize>,
    /// Write per-replicate CSV (kappa study).
    #[arg(long)]
    raw: bool,
}

fn build_config(command: Command, a: RunArgs) -> Result<ExperimentConfig, Error> {
    let source = match (a.problem, a.kind) {
        (Some(p), _) => Source::File {
            problem: p.display().to_string(),
            truth: a.truth.map(|t| t.display().to_string()),
        },
        (None, Some(Kind::Phillips)) => Source::Generator {
            spec: GeneratorSpec::phillips(a.n),
        },
        (None, Some(Kind::Spectrum)) => Source::Generator {
            spec: GeneratorSpec::spectrum(a.n, a.t.unwrap_or(8.min(a.n)), a.decay, a.seed),
        },
        (None, None) => return Err(Error::Config("either --problem or --kind is required".into())),
    };
    let mut c = ExperimentConfig::new(command, source);
    c.case = match a.case {
        CaseArg::One => Case::Case1,
        CaseArg::Two => Case::Case2,
    };
    if let Some(m) = a.mu_mode {
        c.mu_mode = Some(match m {
            MuArg::True => MuMode::TrueMu,
            MuArg::Zero => MuMode::ZeroMu,
        });
    }
    if a.sigma2.is_some() {
        c.sigma2 = a.sigma2;
    }
    c.kappa = a.kappa;
    if let Some(b) = a.bracket {
        c.search.log10_bracket = (b[0], b[1]);
    }
    if let Some(r) = a.rel_tol {
        c.search.rel_tol = r;
    }
    if let Some(g) = a.grid_points {
        c.search.grid_points = g;
    }
    if let Some(p) = a.solve_path {
        c.search.path = match p {
            PathArg::Auto => SolvePath::Auto,
            PathArg::Direct => SolvePath::Direct,
            PathArg::Reduced => SolvePath::Reduced,
        };
    }
    c.study = match a.study {
        StudyArg::Sigma2 => Study::Sigma2,
        StudyArg::Kappa => Study::Kappa,
    };
    c.replicates = a.replicates.unwrap_or(ExperimentConfig::default_replicates(c.study));
    c.seed = a.seed;
    if let Some(p) = a.points {
        c.sweep_points = p;
    }
    c.raw = a.raw;
    Ok(c)
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = match (cli.config, cli.command) {
        (Some(path), None) => io::read_json::<ExperimentConfig>(&path)?,
        (Some(_), Some(_)) => return Err(Error::Config("--config cannot be combined with a subcommand".into())),
        (None, Some(cmd)) => match cmd {
            Cmd::Generate(a) => build_config(Command::Generate, a)?,
            Cmd::Solve(a) => build_config(Command::Solve, a)?,
            Cmd::SelectKappa(a) => build_config(Command::SelectKappa, a)?,
            Cmd::BiasStudy(a) => build_config(Command::BiasStudy, a)?,
            Cmd::Sweep(a) => build_config(Command::Sweep, a)?,
        },
        (None, None) => return Err(Error::Config("a subcommand or --config is required".into())),
    };
    for path in run_experiment(&config, &cli.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report_error(e: &Error, out: &Path) {
    let report = ErrorReport::of(e);
    let json = io::to_json_string(&report).unwrap_or_else(|_| format!("{{\"code\": \"{}\"}}\n", report.code));
    eprint!("{json}");
    if std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::write(out.join("error.json"), &json);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e, &out);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
