//! `conecover`: command-line frontend to the cover-walk library.
//!
//! Exit codes: 0 on success, 1 on domain errors (the report carries the
//! module error in its `error` field), 2 on usage errors.

mod args;
mod commands;
mod input;
mod report;
mod sweep;

use std::io::Write as _;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use report::{render, Meta};

fn usage_error(msg: String) -> ! {
    Cli::command().error(ErrorKind::ArgumentConflict, msg).exit()
}

/// Sizes the global worker pool from `CONECOVER_THREADS`.
fn configure_threads() {
    let Ok(raw) = std::env::var("CONECOVER_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            // fails only if the pool was already built, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => usage_error(format!("CONECOVER_THREADS must be a positive integer, got '{raw}'")),
    }
}

fn check_usage(cmd: &Command) {
    match cmd {
        Command::Sweep(a) => {
            if a.common.generator.is_none() {
                usage_error("sweep needs --generator; grid keys are generator parameters".into());
            }
            if a.grid.len() > 2 {
                usage_error(format!("--grid accepts at most two axes, got {}", a.grid.len()));
            }
            if a.grid.len() == 2 && a.grid[0].key == a.grid[1].key {
                usage_error(format!("--grid names {} twice", a.grid[0].key));
            }
        }
        Command::Rwdcre(a) => {
            if let Some(g) = a.common.generator.as_deref().filter(|&g| g != "rwdcre") {
                usage_error(format!("rwdcre needs --generator rwdcre, got --generator {g}"));
            }
        }
        _ => {}
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let cmd = &cli.command;
    check_usage(cmd);

    let common = cmd.common();
    let tolerances = match cmd {
        Command::Validate(_) => commands::validate_tolerances(),
        Command::Classify(a) => commands::classify_tolerances(a),
        Command::Growth(a) => commands::growth_tolerances(a),
        Command::Simulate(a) => commands::simulate_tolerances(a),
        Command::Couple(a) => commands::couple_tolerances(a),
        Command::Analyze(a) => commands::analyze_tolerances(a),
        Command::Rwdcre(a) => commands::rwdcre_tolerances(a),
        Command::Sweep(a) => sweep::tolerances(a),
    };

    let (spec, result) = if let Command::Sweep(a) = cmd {
        let name = a.common.generator.as_deref().unwrap_or_default();
        let info = input::generator_info(&input::generator_spec(name, &a.common.params));
        (Some(info), sweep::sweep(a))
    } else {
        let (spec, loaded) = input::load(common);
        let result = loaded.and_then(|l| match cmd {
            Command::Validate(_) => Ok(commands::validate(&l)),
            Command::Classify(a) => commands::classify(&l, a),
            Command::Growth(a) => commands::growth(&l, a),
            Command::Simulate(a) => commands::simulate(&l, a),
            Command::Couple(a) => commands::couple(&l, a),
            Command::Analyze(a) => commands::analyze_cmd(&l, a),
            Command::Rwdcre(a) => commands::rwdcre(&l, a),
            Command::Sweep(_) => unreachable!(),
        });
        (spec, result)
    };

    let meta = Meta {
        command: cmd.name(),
        spec,
        seed: common.seed,
        tolerances,
    };
    let out = render(&meta, &result, cmd.format());
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
        return ExitCode::from(1);
    }
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(1)
        }
    }
}
