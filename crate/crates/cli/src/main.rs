//! `typevec`: train typing models, embed mentions as type vectors, and evaluate,
//! reduce or edit those vectors.

mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use typevec::ErrorClass;

#[derive(Parser)]
#[command(name = "typevec", version, about = "Entity representations as vectors of type probabilities")]
struct Cli {
    /// Directory that relative input paths are resolved against.
    #[arg(long, global = true, env = "TYPEVEC_DATA_DIR")]
    data_dir: Option<PathBuf>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a typing model and write a checkpoint.
    Train(commands::TrainArgs),
    /// Embed mentions in context as type vectors.
    Embed(commands::EmbedArgs),
    /// Evaluate coreference arc prediction by thresholded cosine.
    EvalCap(commands::EvalCapArgs),
    /// Evaluate entity disambiguation by cosine ranking.
    EvalNed(commands::EvalNedArgs),
    /// Learn a sparse type mask and prune the type set.
    Reduce(commands::ReduceArgs),
    /// Apply debugging rules to a vector file.
    ApplyRules(commands::ApplyRulesArgs),
    /// Summarize a checkpoint, optionally with a learned mask.
    Inspect(commands::InspectArgs),
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    /// Wraps a library error, prefixing `context`.
    pub fn wrap(context: impl std::fmt::Display) -> impl FnOnce(typevec::Error) -> Self {
        move |e| {
            let code = match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            };
            Self {
                code,
                message: format!("{context}: {e}"),
            }
        }
    }
}

impl From<typevec::Error> for CliError {
    fn from(e: typevec::Error) -> Self {
        Self::wrap("error")(e)
    }
}

/// Resolves input paths against the data directory.
pub struct Paths {
    data_dir: Option<PathBuf>,
}

impl Paths {
    pub fn input(&self, path: &Path) -> PathBuf {
        match &self.data_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    // Library progress is printed by the commands themselves; the log carries
    // the resolved config and warnings.
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "warn"
    } else {
        "warn,typevec::report=info"
    }))
    .format_timestamp(None)
    .init();

    let paths = Paths {
        data_dir: cli.data_dir,
    };
    let result = match cli.command {
        Command::Train(args) => commands::train(args, &paths),
        Command::Embed(args) => commands::embed(args, &paths),
        Command::EvalCap(args) => commands::eval_cap(args, &paths),
        Command::EvalNed(args) => commands::eval_ned(args, &paths),
        Command::Reduce(args) => commands::reduce(args, &paths),
        Command::ApplyRules(args) => commands::apply_rules(args, &paths),
        Command::Inspect(args) => commands::inspect(args, &paths),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("typevec: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
