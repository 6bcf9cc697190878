mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use config::RunConfig;

/// Approximate-group laboratory: certificates, structure chains,
/// nilprogressions and growth gaps, reported as JSON.
///
/// Exit status: 0 verified, 1 error, 2 hypothesis not met, 3 verification failure.
#[derive(Parser, Debug)]
#[command(name = "approxgroup", version)]
struct Cli {
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Group, e.g. ut_mod:3:5, ut_int:3, abelian:0,7, free:2, a JSON object, or @file.
    #[arg(long, global = true)]
    group: Option<String>,
    /// Set, e.g. ball:gens=xy:r=2, interval:10, subgroup:gens=z, a JSON object, or @file.
    #[arg(long, global = true)]
    set: Option<String>,
    /// Largest number of elements any enumeration may materialize.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Default)]
struct FitArgs {
    /// Quotient family for infinite groups: identity, mod:LO:HI, a JSON object, or @file.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    rank_cap: Option<usize>,
    #[arg(long)]
    exp_cap: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// |A|, |A²|, |A³| and an approximate-group certificate.
    Doubling,
    /// Certificate that A² is covered by K translates of A.
    Certify,
    /// Dimension chain of A.
    Decompose,
    /// Nilpotent structure of A, through a finite quotient for infinite groups.
    Structure(FitArgs),
    /// Coset nilprogression fitted to A.
    Progression(FitArgs),
    /// Structure of A when ⟨A⟩ has exponent at most r.
    Torsion {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        family: Option<String>,
    },
    /// Ball sizes and the one-scale gap test at radius n.
    Growth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Also write n, |S^n|, threshold rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Build the structure certificate when the gap is detected.
        #[arg(long)]
        certify: bool,
        #[arg(long)]
        family: Option<String>,
    },
    /// Re-check a saved report.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

fn text(s: Option<String>) -> Option<Value> {
    s.map(Value::String)
}

fn flags(cli: Cli) -> RunConfig {
    let mut cfg = RunConfig {
        group: text(cli.group),
        set: text(cli.set),
        cap: cli.cap,
        out: cli.out,
        verbose: (cli.verbose > 0).then_some(cli.verbose),
        ..Default::default()
    };
    let fit = |cfg: &mut RunConfig, f: FitArgs| {
        cfg.family = text(f.family);
        cfg.rank_cap = f.rank_cap;
        cfg.exp_cap = f.exp_cap;
    };
    let name = match cli.command {
        None => None,
        Some(Command::Doubling) => Some("doubling"),
        Some(Command::Certify) => Some("certify"),
        Some(Command::Decompose) => Some("decompose"),
        Some(Command::Structure(f)) => {
            fit(&mut cfg, f);
            Some("structure")
        }
        Some(Command::Progression(f)) => {
            fit(&mut cfg, f);
            Some("progression")
        }
        Some(Command::Torsion { r, family }) => {
            cfg.r = Some(r);
            cfg.family = text(family);
            Some("torsion")
        }
        Some(Command::Growth { n, c, alpha, csv, certify, family }) => {
            cfg.n = Some(n);
            cfg.c = c;
            cfg.alpha = alpha;
            cfg.csv = csv;
            cfg.certify = certify.then_some(true);
            cfg.family = text(family);
            Some("growth")
        }
        Some(Command::Verify { report }) => {
            cfg.report = Some(report);
            Some("verify")
        }
    };
    cfg.command = name.map(String::from);
    cfg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = cli.config.clone();
    let from_flags = flags(cli);
    let cfg = match file {
        Some(path) => match RunConfig::load(&path) {
            Ok(base) => base.overlay(from_flags),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => from_flags,
    };
    let outcome = run::run(&cfg);
    let body = serde_json::to_string_pretty(&outcome.report).expect("report serializes") + "\n";
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &body) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{body}"),
    }
    if let Some(m) = outcome.report.get("message").and_then(Value::as_str) {
        eprintln!("{}: {m}", outcome.report["status"].as_str().unwrap_or("error"));
    }
    ExitCode::from(outcome.exit as u8)
}
