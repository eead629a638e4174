mod args;
mod commands;
mod config;
mod output;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use args::{Cli, Command, GlobalArgs};
use output::Ctx;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] tempora::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Write(#[from] std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(_) => "runtime",
            CliError::Io { .. } | CliError::Write(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn one_line(msg: &str) -> String {
    msg.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("; ")
}

fn fail(kind: &str, msg: &str, code: u8) -> ExitCode {
    eprintln!("error[{kind}]: {}", one_line(msg));
    ExitCode::from(code)
}

struct Resolver<'a> {
    matches: &'a ArgMatches,
    file: Map<String, Value>,
    used: BTreeSet<String>,
}

impl Resolver<'_> {
    /// Applies the config file to the global flags and the subcommand's own
    /// flags, then builds the context echoed into artifacts.
    fn resolve<T: Serialize + DeserializeOwned>(
        &mut self,
        global: &GlobalArgs,
        name: &'static str,
        args: &T,
    ) -> Result<(GlobalArgs, T, Ctx), CliError> {
        let mut root = Cli::command();
        root.build();
        let sub_cmd = root.find_subcommand(name).expect("known subcommand");
        let sub_matches = self
            .matches
            .subcommand_matches(name)
            .expect("parsed subcommand");
        let mut merged_global =
            config::overlay(global, sub_cmd, sub_matches, &self.file, &mut self.used)?;
        merged_global.config = global.config.clone();
        merged_global.verbose = global.verbose;
        let merged = config::overlay(args, sub_cmd, sub_matches, &self.file, &mut self.used)?;
        config::reject_unused(&self.file, &self.used)?;

        let mut echo = serde_json::to_value(&merged_global).expect("globals serialize");
        if let (Some(map), Value::Object(own)) = (
            echo.as_object_mut(),
            serde_json::to_value(&merged).expect("arguments serialize"),
        ) {
            map.extend(own);
        }
        let ctx = Ctx {
            command: name,
            config: echo,
            deterministic: merged_global.deterministic_headers,
            seed: merged_global.seed,
        };
        Ok((merged_global, merged, ctx))
    }
}

fn configure_threads(global: &GlobalArgs) -> Result<(), CliError> {
    if let Some(jobs) = global.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    Ok(())
}

macro_rules! dispatch {
    ($resolver:expr, $global:expr, $args:expr, $name:expr, $run:path) => {{
        let (g, a, ctx) = $resolver.resolve($global, $name, $args)?;
        configure_threads(&g)?;
        $run(&ctx, &a)
    }};
}

fn run(cli: Cli, matches: &ArgMatches) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(path) => config::load(path)?,
        None => Map::new(),
    };
    let mut r = Resolver {
        matches,
        file,
        used: BTreeSet::new(),
    };
    let g = &cli.global;
    let name = cli.command.name();
    match &cli.command {
        Command::Stats(a) => dispatch!(r, g, a, name, commands::stats),
        Command::Centrality(a) => dispatch!(r, g, a, name, commands::centrality),
        Command::Paths(a) => dispatch!(r, g, a, name, commands::paths),
        Command::Debruijn(a) => dispatch!(r, g, a, name, commands::debruijn),
        Command::OrderSelect(a) => dispatch!(r, g, a, name, commands::order_select),
        Command::Train(a) => dispatch!(r, g, a, name, commands::train),
        Command::Evaluate(a) => dispatch!(r, g, a, name, commands::evaluate),
        Command::Benchmark(a) => dispatch!(r, g, a, name, commands::benchmark),
        Command::ApproxBetweenness(a) => dispatch!(r, g, a, name, commands::approx_betweenness),
        Command::ExportEmbeddings(a) => dispatch!(r, g, a, name, commands::export),
        Command::Synth(a) => dispatch!(r, g, a, name, commands::synth),
    }
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            _ => {
                let rendered = e.render().to_string();
                let first = rendered.lines().next().unwrap_or("invalid arguments");
                return fail("usage", first.trim_start_matches("error: "), 2);
            }
        },
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => return fail("usage", &e.to_string(), 2),
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), e.exit_code()),
    }
}
