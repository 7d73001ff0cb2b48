use std::fs;
use std::io::{self, IsTerminal};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smsguard::{parse_scenario, repl, World};
use smsguard_core::Msisdn;

#[derive(Parser)]
#[command(
    name = "smsguard",
    version,
    about = "Simulate remote control of a phone over SMS"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and print its transcript.
    Run {
        scenario: PathBuf,
        /// Load and save `<msisdn>.device` files here.
        #[arg(long)]
        state_dir: Option<PathBuf>,
        /// Overrides any `seed` line in the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the transcript to this file.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Interactive console acting as the given phone number.
    Repl {
        #[arg(long)]
        attach: Msisdn,
        /// Scenario to set up the world before the prompt.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        state_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &PathBuf) -> Result<smsguard::Scenario, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(2)
    })?;
    parse_scenario(&text).map_err(|e| {
        eprintln!("{}:{}: {}", path.display(), e.line, e.message);
        ExitCode::from(2)
    })
}

fn run(
    scenario: PathBuf,
    state_dir: Option<PathBuf>,
    seed: Option<u64>,
    transcript: Option<PathBuf>,
) -> Result<(), ExitCode> {
    let parsed = load(&scenario)?;
    let report = World::new(seed, state_dir).run(&parsed);
    for line in &report.transcript {
        println!("{line}");
    }
    if let Some(path) = transcript {
        let mut text = report.transcript.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| {
            eprintln!("{}: {e}", path.display());
            ExitCode::from(1)
        })?;
    }
    for failure in &report.failures {
        eprintln!("{}: {failure}", scenario.display());
    }
    if report.passed() {
        Ok(())
    } else {
        Err(ExitCode::from(1))
    }
}

fn console(
    attach: Msisdn,
    scenario: Option<PathBuf>,
    state_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<(), ExitCode> {
    let mut world = World::new(seed, state_dir);
    if let Some(path) = &scenario {
        let report = world.run(&load(path)?);
        for line in &report.transcript {
            println!("{line}");
        }
        for failure in &report.failures {
            eprintln!("{}: {failure}", path.display());
        }
    }
    if world.id(attach.as_str()).is_none() {
        if let Err(e) = world.register_handset(attach.as_str(), attach.clone()) {
            eprintln!("{e}");
            return Err(ExitCode::from(1));
        }
    }
    let stdin = io::stdin();
    let prompt = stdin.is_terminal();
    let mut out = io::stdout();
    if let Err(e) = repl::run(&mut world, &attach, stdin.lock(), &mut out, prompt) {
        eprintln!("{e}");
        return Err(ExitCode::from(1));
    }
    world.save_state().map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Cmd::Run {
            scenario,
            state_dir,
            seed,
            transcript,
        } => run(scenario, state_dir, seed, transcript),
        Cmd::Repl {
            attach,
            scenario,
            state_dir,
            seed,
        } => console(attach, scenario, state_dir, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
