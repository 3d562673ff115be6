mod cli;
mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use cli::Cli;
use commands::Failure;
use manifest::Manifest;

const DEFAULT_MANIFEST: &str = "lmcurate.manifest.json";

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(messages)) => {
            eprintln!("{}", json!({ "error": { "kind": "config", "messages": messages } }));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("{}", json!({ "error": { "kind": "runtime", "message": message } }));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = config::load(cli.config.as_deref()).map_err(Failure::Config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Some(m) = &cli.manifest {
        cfg.paths.manifest = Some(m.clone());
    }
    cli.command.apply(&mut cfg);

    let errors = cfg.validate(&cli.command.needs(&cfg));
    if !errors.is_empty() {
        return Err(Failure::Config(errors));
    }
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }

    let outcome = commands::execute(&cli.command, &cfg)?;
    let path = cfg.paths.manifest.clone().unwrap_or_else(|| match outcome.outputs.first() {
        Some(out) => {
            let mut name = OsString::from(out.as_os_str());
            name.push(".manifest.json");
            PathBuf::from(name)
        }
        None => PathBuf::from(DEFAULT_MANIFEST),
    });
    Manifest::new(cli.command.name(), &cfg, &outcome.inputs, &outcome.outputs)
        .and_then(|m| m.write(&path))
        .map_err(|e| Failure::Runtime(format!("manifest {}: {e}", path.display())))
}
