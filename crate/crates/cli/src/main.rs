use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use chartchirp::pipeline::{default_output_dir, REPORT_FILE};
use chartchirp::{repro, run_pipeline, Error, RunConfig, Stage, StageRange};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "chartchirp", version, about = "Chart-and-chirp VCO linearization and FMCW radar simulation")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Output directory. Defaults to `output_dir` from the config, or `out`
    /// next to the config file.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Seed for random draws, replacing the one in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log progress to stderr; repeat for more detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure the tuning curve with the frequency counter.
    Chart,
    /// Fit the backward model to the chart.
    Learn,
    /// Solve the QDAC code program for each chirp.
    Predistort,
    /// Synthesize tuning voltage and instantaneous frequency.
    Synth,
    /// Simulate the radar IF for each scenario.
    Simulate,
    /// Compute IF spectra, SNDR and spurs.
    Analyze,
    /// Run the pipeline from the start.
    Run {
        /// Stop after this stage.
        #[arg(long)]
        stage: Option<Stage>,
        /// Run the built-in reproduction suite instead of a config.
        #[arg(long)]
        check: bool,
    },
    /// Check a config and list every violated rule.
    Validate,
}

/// An error paired with the exit status it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn validation(err: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_VALIDATION, err: err.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::InvalidConfig(_)) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        Self { code, err }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let Some(path) = cli.config.as_deref() else {
        return Err(Failure::validation(anyhow::anyhow!("--config is required for this command")));
    };
    let mut cfg = RunConfig::load(path).with_context(|| format!("reading config {}", path.display())).map_err(Failure::validation)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| default_output_dir(cfg))
}

fn validate(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let violations = cfg.validate();
    if violations.is_empty() {
        println!("{}: ok", cli.config.as_deref().unwrap_or(Path::new("")).display());
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::validation(anyhow::anyhow!("{} violation(s)", violations.len())))
}

fn run_stages(cli: &Cli, stages: StageRange) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let out = output_dir(cli, &cfg);
    let outcome = run_pipeline(&cfg, &out, stages).map_err(anyhow::Error::from)?;
    println!("stages: {}", outcome.manifest.stages.join(", "));
    println!("wrote {} files to {}", outcome.manifest.files.len(), out.display());
    for c in &outcome.report.chirps {
        if let Some(rms) = c.rms_fm_error_hz {
            println!("chirp {}: rms FM error {:.2} kHz", c.name, rms / 1e3);
        }
    }
    for s in &outcome.report.scenarios {
        if let Some(sndr) = s.sndr_db {
            println!("scenario {}: SNDR {:.1} dB", s.name, sndr);
        }
    }
    log::info!("report at {}", out.join(REPORT_FILE).display());
    Ok(())
}

fn check() -> Result<(), Failure> {
    let results = repro::run_all();
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed} of {} criteria passed", results.len());
    if passed == results.len() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_CHECK, err: anyhow::anyhow!("{} criteria failed", results.len() - passed) })
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate => validate(cli),
        Command::Run { check: true, stage } => {
            if stage.is_some() || cli.config.is_some() {
                return Err(Failure::validation(anyhow::anyhow!("--check takes no --config or --stage")));
            }
            check()
        }
        Command::Run { stage, .. } => run_stages(cli, stage.map_or(StageRange::all(), StageRange::through)),
        Command::Chart => run_stages(cli, StageRange::only(Stage::Chart)),
        Command::Learn => run_stages(cli, StageRange::only(Stage::Learn)),
        Command::Predistort => run_stages(cli, StageRange::only(Stage::Predistort)),
        Command::Synth => run_stages(cli, StageRange::only(Stage::Synth)),
        Command::Simulate => run_stages(cli, StageRange::only(Stage::Simulate)),
        Command::Analyze => run_stages(cli, StageRange::only(Stage::Analyze)),
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn stage_flag_parses_names() {
        let cli = Cli::try_parse_from(["chartchirp", "run", "--stage", "learn", "--config", "x.toml"]).unwrap();
        match cli.command {
            Command::Run { stage, check } => {
                assert_eq!(stage, Some(Stage::Learn));
                assert!(!check);
            }
            other => panic!("parsed {other:?}"),
        }
        assert!(Cli::try_parse_from(["chartchirp", "run", "--stage", "bogus"]).is_err());
    }

    #[test]
    fn runtime_errors_map_to_exit_two() {
        let f: Failure = anyhow::Error::from(Error::CodeSaturation { step: 0, code: 40_000, code_min: -32768, code_max: 32767 }).into();
        assert_eq!(f.code, EXIT_RUNTIME);
        let f: Failure = anyhow::Error::from(Error::InvalidConfig(vec!["x".into()])).into();
        assert_eq!(f.code, EXIT_VALIDATION);
    }
}
