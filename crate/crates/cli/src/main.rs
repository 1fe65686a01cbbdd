//! `growthmech`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage or numerical error, 2 verification failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches};
use growthmech_core::GrowthError;

mod commands;
mod config;

use commands::{Command, Registry};
use config::COMMON;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error("{0}")]
    Io(String),
}

fn cli(registry: &Registry) -> clap::Command {
    let mut app = clap::Command::new("growthmech")
        .about("Residual stress, stress-free growth and metric evolution for bulk growth")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for c in registry.iter() {
        let mut sub = clap::Command::new(c.name())
            .about(c.about())
            .arg(Arg::new("config").long("config").value_name("FILE").help("key = value settings file"));
        for k in c.keys().iter().chain(COMMON) {
            let help = match k.default {
                Some(d) if !d.is_empty() => format!("{} [default: {d}]", k.help),
                _ => k.help.to_string(),
            };
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .num_args(k.arity)
                    .allow_hyphen_values(true)
                    .action(ArgAction::Set)
                    .help(help),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

fn flags(m: &ArgMatches, command: &dyn Command) -> BTreeMap<String, String> {
    command
        .keys()
        .iter()
        .chain(COMMON)
        .filter_map(|k| {
            m.get_many::<String>(k.name).map(|v| (k.name.to_string(), v.cloned().collect::<Vec<_>>().join(" ")))
        })
        .collect()
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GROWTHMECH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("GROWTHMECH_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

fn run(registry: &Registry, m: &ArgMatches) -> Result<bool, CliError> {
    configure_threads()?;
    let (name, sub) = m.subcommand().expect("a subcommand is required");
    let command = registry.get(name).expect("clap only accepts registered subcommands");
    let mut keys = command.keys();
    keys.extend_from_slice(COMMON);
    let file = sub.get_one::<String>("config").map(PathBuf::from);
    let settings = config::Settings::resolve(&keys, file.as_deref(), flags(sub, command))?;
    let outcome = command.run(&settings)?;

    let dir = Path::new(settings.str("out"));
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (file, contents) in &outcome.files {
        let path = dir.join(file);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote: {}", path.display());
    }
    for (k, v) in &outcome.summary {
        println!("{k}: {v}");
    }
    println!("verification: {}", if outcome.passed { "passed" } else { "FAILED" });
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let registry = Registry::builtin();
    let matches = match cli(&registry).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&registry, &matches) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
