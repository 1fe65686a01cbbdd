//! Subcommands, registered by name and dispatched at runtime.

use growthmech_core::output::Table;

use crate::config::{Key, Settings};
use crate::CliError;

mod elastic;
mod geometry;
mod kinetics;
mod radial;
mod surface;

/// What a run produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// `key: value` lines for stdout.
    pub summary: Vec<(String, String)>,
    /// (file name, contents) written under the output directory.
    pub files: Vec<(String, String)>,
    /// False when a verification failed.
    pub passed: bool,
}

impl Outcome {
    pub fn new(passed: bool) -> Self {
        Self { passed, ..Self::default() }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

pub trait Command: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn keys(&self) -> Vec<Key>;
    fn run(&self, settings: &Settings) -> Result<Outcome, CliError>;
}

#[derive(Default)]
pub struct Registry {
    commands: Vec<Box<dyn Command>>,
}

impl Registry {
    pub fn register(&mut self, c: Box<dyn Command>) {
        self.commands.retain(|old| old.name() != c.name());
        self.commands.push(c);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Command> {
        self.commands.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Command> {
        self.commands.iter().map(|c| c.as_ref())
    }

    pub fn builtin() -> Self {
        let mut r = Self::default();
        r.register(Box::new(geometry::Curvature));
        for problem in ["annulus-iso", "annulus-aniso", "sphere"] {
            r.register(Box::new(radial::RadialBvp::new(problem)));
        }
        r.register(Box::new(geometry::StressFree2d));
        r.register(Box::new(geometry::StressFree3d));
        r.register(Box::new(surface::Embed));
        r.register(Box::new(kinetics::Evolve));
        r.register(Box::new(elastic::Linearized));
        r.register(Box::new(elastic::DecomposeCheck));
        r
    }
}

/// Puts the command name and every setting at the top of a table's header so
/// the file alone is enough to repeat the run.
pub fn stamp(mut table: Table, command: &str, settings: &Settings) -> String {
    let mut meta = vec![("command".to_string(), command.to_string())];
    meta.extend(settings.iter().filter(|(k, _)| k.as_str() != "out").map(|(k, v)| (k.clone(), v.clone())));
    meta.append(&mut table.meta);
    table.meta = meta;
    table.to_csv()
}

pub fn header_lines(command: &str, settings: &Settings) -> Vec<String> {
    std::iter::once(format!("command: {command}"))
        .chain(settings.iter().filter(|(k, _)| k.as_str() != "out").map(|(k, v)| format!("{k}: {v}")))
        .collect()
}

pub fn sci(v: f64) -> String {
    format!("{v:.6e}")
}
