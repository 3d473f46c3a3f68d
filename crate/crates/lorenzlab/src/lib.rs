//! Command-line front end and file formats for `lorenzlab-core`.
//!
//! [`run`] is the whole program; the binary only forwards `std::env::args`.

pub mod checks;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod parallel;

use std::ffi::OsString;
use std::path::Path;

use clap::{CommandFactory, FromArgMatches};

pub use error::{CliError, CliResult};

use cli::{Cli, Command};
use config::{take_config_flag, ConfigFile};

fn settings(cmd: clap::Command) -> clap::Command {
    cmd.args_override_self(true).allow_negative_numbers(true).mut_subcommands(settings)
}

/// Splices config-file flags in front of the first flag of `args` (after the subcommand path).
fn expand_config(mut args: Vec<String>) -> CliResult<Vec<String>> {
    let Some(path) = take_config_flag(&mut args)? else {
        return Ok(args);
    };
    let extra = ConfigFile::load(Path::new(&path))?.to_args();
    let at = args.iter().skip(1).position(|a| a.starts_with('-')).map_or(args.len(), |i| i + 1);
    args.splice(at..at, extra);
    Ok(args)
}

fn parse(argv: Vec<String>) -> Result<Cli, clap::Error> {
    let m = settings(Cli::command()).try_get_matches_from(argv)?;
    Cli::from_arg_matches(&m)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Lambda(a) => commands::lambda_cmd(a),
        Command::Threshold(a) => commands::threshold_cmd(a),
        Command::Poisson(a) => commands::poisson_cmd(a),
        Command::VerifyLyapunov(a) => commands::verify_cmd(a),
        Command::Excursions(a) => commands::excursions_cmd(a),
        Command::Check(a) => commands::check_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
    }
}

/// Runs one invocation; `argv[0]` is the program name.
///
/// Exit codes: 0 success, 1 numerical or IO failure, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = match argv.into_iter().map(|a| a.into().into_string()).collect() {
        Ok(a) => a,
        Err(bad) => {
            eprintln!("error: argument is not valid UTF-8: {bad:?}");
            return 2;
        }
    };
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match parse(args) {
        Ok(c) => c,
        Err(e) => {
            // help and version land here too, with exit code 0
            let _ = e.print();
            if e.use_stderr() && !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn repeated_flags_keep_the_last() {
        let cli = parse(s(&["lorenzlab", "lambda", "--alpha-hat", "3", "--alpha-hat", "5"])).unwrap();
        match cli.command {
            Command::Lambda(a) => assert_eq!(a.model.alpha, Some(5.0)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn config_flags_go_before_user_flags() {
        let dir = std::env::temp_dir().join(format!("lorenzlab-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.cfg");
        std::fs::write(&p, "alpha_hat = 3\nreplicas = 2\n").unwrap();
        let args = expand_config(s(&["lorenzlab", "check", "exp-growth", "--config", p.to_str().unwrap(), "--k", "2"])).unwrap();
        assert_eq!(&args[..5], &s(&["lorenzlab", "check", "exp-growth", "--alpha-hat", "3"])[..]);
        assert_eq!(args.last().unwrap(), "2");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(["lorenzlab", "frobnicate"]), 2);
        assert_eq!(run(["lorenzlab", "lambda", "--method", "nope"]), 2);
    }
}
