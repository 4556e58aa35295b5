use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mission_eval::config::read_generator;
use mission_eval::conformance;
use mission_eval::corpus::{read_text, Corpus};
use mission_eval::hs::{serve, HsSpec, ReferenceHs};
use mission_eval::pipeline::{self, EvalOptions, DEFAULT_SEED};
use mission_eval::profile::ConstraintProfile;
use mission_eval::schema::{schema_document, validate_metadata};
use mission_eval::scores::parse_modes;
use mission_eval::session::DEFAULT_WINDOW;
use mission_eval_core::classify::MissionSet;
use mission_eval_core::model::ModeSet;
use mission_eval_core::synth::GeneratorConfig;
use mission_eval_core::template::FusionConfig;

/// Mission-based test and evaluation of holistic biometric matchers.
#[derive(Parser)]
#[command(name = "mission-eval", version)]
struct Cli {
    /// Corpus directory.
    #[arg(long, global = true, default_value = "corpus")]
    corpus: PathBuf,
    /// Seed for every random choice; defaults to the seed the corpus was
    /// generated with, or 42.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Selection {
    /// Missions to evaluate: comma list or `all`.
    #[arg(long, default_value = "all", value_parser = missions)]
    missions: MissionSet,
}

#[derive(Args)]
struct Matcher {
    /// `builtin` or `exec:<command>`; `unix:<path>` connects to a socket.
    #[arg(long, default_value = "builtin")]
    hs: HsSpec,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a raw event corpus.
    Generate {
        /// Generator configuration document; defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Segment recordings, attach metadata and split subjects.
    Curate,
    /// Build the gallery and the per-mission probe sig-sets.
    Partition {
        #[command(flatten)]
        selection: Selection,
    },
    /// Run a matcher over the partitioned corpus and write the report.
    Evaluate {
        #[command(flatten)]
        matcher: Matcher,
        #[command(flatten)]
        selection: Selection,
        /// Matching modes: comma list of face, body, gait, fusion, or `all`.
        #[arg(long, default_value = "all", value_parser = modes)]
        modes: ModeSet,
        /// Constraint profile document.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Entries in flight while streaming media.
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Re-render the report bundle from persisted scores.
    Report {
        #[command(flatten)]
        selection: Selection,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Print the metadata schema, or validate documents against it.
    Schema {
        /// Metadata documents to validate.
        #[arg(long, num_args = 1..)]
        validate: Vec<PathBuf>,
    },
    /// Run the matcher conformance suite.
    ProtocolCheck {
        #[command(flatten)]
        matcher: Matcher,
    },
    /// Serve the reference matcher over stdio, or over a socket.
    Serve {
        #[arg(long)]
        socket: Option<PathBuf>,
    },
}

fn missions(s: &str) -> Result<MissionSet, String> {
    pipeline::parse_missions(s)
        .filter(|m| !m.is_empty())
        .ok_or_else(|| format!("unknown mission list {s:?}"))
}

fn modes(s: &str) -> Result<ModeSet, String> {
    parse_modes(s)
        .filter(|m| !m.is_empty())
        .ok_or_else(|| format!("unknown mode list {s:?}"))
}

fn generator_config(path: Option<&Path>, seed: Option<u64>) -> Result<GeneratorConfig> {
    let mut cfg = match path {
        Some(p) => read_generator(&read_text(p)?).map_err(|e| anyhow!("{}: {e}", p.display()))?,
        None => GeneratorConfig { seed: DEFAULT_SEED, ..Default::default() },
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn profile(path: Option<&Path>) -> Result<ConstraintProfile> {
    match path {
        Some(p) => ConstraintProfile::from_xml(&read_text(p)?).map_err(|e| anyhow!("{}: {e}", p.display())),
        None => Ok(ConstraintProfile::default()),
    }
}

fn serve_socket(path: &Path) -> Result<()> {
    #[cfg(unix)]
    {
        let listener = std::os::unix::net::UnixListener::bind(path)
            .with_context(|| format!("binding {}", path.display()))?;
        // One session per connection, one connection per run.
        let (stream, _) = listener.accept()?;
        let mut reader = stream.try_clone()?;
        let mut writer = stream;
        let result = serve(&mut ReferenceHs::default(), &mut reader, &mut writer);
        let _ = std::fs::remove_file(path);
        Ok(result?)
    }
    #[cfg(not(unix))]
    {
        let _ = path;
        bail!("socket transport needs a unix platform")
    }
}

fn run(cli: Cli) -> Result<()> {
    let corpus = Corpus::new(&cli.corpus);
    match cli.command {
        Command::Generate { config } => pipeline::generate(&corpus, &generator_config(config.as_deref(), cli.seed)?),
        Command::Curate => pipeline::curate(&corpus, cli.seed),
        Command::Partition { selection } => pipeline::partition_stage(&corpus, cli.seed, selection.missions),
        Command::Evaluate { matcher, selection, modes, profile: path, out, window } => {
            let opts = EvalOptions {
                hs: matcher.hs,
                missions: selection.missions,
                modes,
                profile: profile(path.as_deref())?,
                window: window.max(1),
                fusion: FusionConfig::default(),
                seed: cli.seed.or_else(|| pipeline::corpus_seed(&corpus).ok()).unwrap_or(DEFAULT_SEED),
            };
            pipeline::evaluate(&corpus, &out, &opts)
        }
        Command::Report { selection, out } => pipeline::report_stage(&corpus, &out, selection.missions),
        Command::Schema { validate } => {
            if validate.is_empty() {
                io::stdout().write_all(schema_document().as_bytes())?;
                return Ok(());
            }
            let mut bad = 0;
            for p in &validate {
                let report = validate_metadata(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?;
                if report.is_valid() {
                    println!("valid   {}", p.display());
                } else {
                    bad += 1;
                    println!("INVALID {}: {report}", p.display());
                }
            }
            if bad > 0 {
                bail!("[schema] {bad} of {} documents invalid", validate.len());
            }
            Ok(())
        }
        Command::ProtocolCheck { matcher } => {
            let open = || matcher.hs.open(FusionConfig::default());
            let checks = conformance::run(&open, FusionConfig::default())?;
            for c in &checks {
                println!("{}", c.line());
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            if failed > 0 {
                bail!("[protocol-check] {failed} of {} checks failed", checks.len());
            }
            Ok(())
        }
        Command::Serve { socket } => match socket {
            Some(p) => serve_socket(&p),
            None => {
                let mut hs = ReferenceHs::default();
                Ok(serve(&mut hs, &mut io::stdin().lock(), &mut io::stdout().lock())?)
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MISSION_EVAL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
