use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tidewatch::config::RunConfig;
use tidewatch::pipeline::{self, Stage};
use tidewatch::synthkit;

#[derive(Parser)]
#[command(name = "tidewatch", version, about = "Red-tide impact assessment from geo-annotated tweets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set question_weight=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = one per core). Results do not depend on this.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Restrict to these levels (region/total, county, city, zcta).
    #[arg(long, value_delimiter = ',')]
    level: Vec<String>,
    /// Restrict to these frequencies (weekly, 3day, daily).
    #[arg(long, value_delimiter = ',')]
    freq: Vec<String>,
    /// Restrict to these match filters (explicit, all).
    #[arg(long = "match", value_delimiter = ',')]
    matches: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate every input.
    Ingest(RunArgs),
    /// Remove political tweets, resolve locations, apply the study window.
    Clean(RunArgs),
    /// Score admitted tweets.
    Sentiment(RunArgs),
    /// Build unit-by-time-bucket panels.
    Aggregate(RunArgs),
    /// Correlation grid and heatmap.
    Correlate(RunArgs),
    /// Distance-decay regression, bin contrasts and retweet fractions.
    Distance(RunArgs),
    /// Concern categories and top polarized terms.
    Topics(RunArgs),
    /// Every stage.
    Report(RunArgs),
    /// Generate a synthetic corpus with planted parameters.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    let cwd = Path::new(".");
    for kv in &args.set {
        cfg.set_override(kv, cwd).map_err(|e| e.to_string())?;
    }
    for (key, values) in [("levels", &args.level), ("freqs", &args.freq), ("matches", &args.matches)] {
        if !values.is_empty() {
            cfg.set(key, &values.join(","), cwd).map_err(|e| e.to_string())?;
        }
    }
    Ok(cfg)
}

/// Prints written paths; a closed stdout is not an error.
fn list_paths<'a>(dir: &Path, names: impl IntoIterator<Item = &'a str>) {
    let mut stdout = std::io::stdout().lock();
    for name in names {
        if writeln!(stdout, "{}", dir.join(name).display()).is_err() {
            return;
        }
    }
}

fn run_stage(stage: Stage, args: &RunArgs) -> ExitCode {
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if args.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match pipeline::run(stage, &cfg, &args.out) {
        Ok(m) => {
            let names = m.outputs.keys().map(String::as_str).chain(["manifest.json"]);
            list_paths(&args.out, names);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(a) => run_stage(Stage::Ingest, a),
        Command::Clean(a) => run_stage(Stage::Clean, a),
        Command::Sentiment(a) => run_stage(Stage::Sentiment, a),
        Command::Aggregate(a) => run_stage(Stage::Aggregate, a),
        Command::Correlate(a) => run_stage(Stage::Correlate, a),
        Command::Distance(a) => run_stage(Stage::Distance, a),
        Command::Topics(a) => run_stage(Stage::Topics, a),
        Command::Report(a) => run_stage(Stage::Report, a),
        Command::Synth { spec, out } => {
            let spec = match spec {
                Some(p) => synthkit::read_spec(p),
                None => Ok(synthkit::SynthSpec::default()),
            };
            let result = spec.and_then(|s| synthkit::generate(&s)).and_then(|o| synthkit::write_output(&o, out));
            match result {
                Ok(()) => {
                    list_paths(out, synthkit::FILES);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(match e {
                        synthkit::SynthError::Io { .. } => 1,
                        synthkit::SynthError::Spec(_) | synthkit::SynthError::Json(_) => 1,
                        _ => 2,
                    })
                }
            }
        }
    }
}
