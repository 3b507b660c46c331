use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use techgrowth::longrun::{format_set, predict_regime, solve_support_system};
use techgrowth::report::{render_text, run, CheckStatus, RunOptions, RunReport, StructureSummary};
use techgrowth::scenario::{builtin_scenarios, load_scenario, scenario_files, write_scenario};
use techgrowth::structure::classify;
use techgrowth::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "techgrowth",
    version,
    about = "Spillover-driven R&D growth scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the spillover structure and predict the growth regime.
    Classify {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Simulate a scenario and write trajectory, report and chart files.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Share threshold for leader sets.
        #[arg(long, default_value_t = 0.6)]
        theta: f64,
    },
    /// Solve the long-run balanced-growth system on every candidate support.
    Longrun {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the built-in reference scenarios.
    PaperFigs {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every scenario file in a directory in parallel.
    Sweep {
        dir: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn cmd_classify(file: &Path, json: bool) -> Result<(), Error> {
    let s = load_scenario(file)?;
    let report = classify(&s.matrix);
    let prediction = predict_regime(&report, &s.matrix, &s.params);
    if json {
        let doc = serde_json::json!({
            "scenario": s.name,
            "structure": StructureSummary::from(&report),
            "prediction": prediction,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("serializable")
        );
        return Ok(());
    }
    println!("scenario: {}", s.name);
    let classes: Vec<String> = report.classes.iter().map(ToString::to_string).collect();
    println!("classes: {}", classes.join(", "));
    let cores: Vec<String> = report.cores.iter().map(|c| format_set(c)).collect();
    println!(
        "cores: {}",
        if cores.is_empty() {
            "none".to_string()
        } else {
            cores.join(" ")
        }
    );
    println!("irreducible: {}", report.irreducible);
    println!(
        "eventually nonnegative: {}{}",
        report.eventually_nonnegative.flag,
        report
            .eventually_nonnegative
            .witness
            .map_or(String::new(), |k| format!(" (k = {k})"))
    );
    println!("dominant eigenvalue: {}", report.dominant_eigenvalue);
    println!("regime: {} ({})", prediction.regime, prediction.reason);
    Ok(())
}

fn cmd_longrun(file: &Path, json: bool) -> Result<(), Error> {
    let s = load_scenario(file)?;
    let sol = solve_support_system(&s.matrix, &s.params)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&sol).expect("serializable")
        );
        return Ok(());
    }
    println!("scenario: {}", s.name);
    if sol.solutions.is_empty() {
        println!("no balanced-growth solution");
    }
    for c in &sol.solutions {
        println!("support {}: g = {}", format_set(&c.support), c.growth_rate);
        println!("  shares: {:?}", c.shares_inf);
        println!("  residual: {:e}", c.residual);
    }
    if sol.solutions.len() > 1 {
        println!("several candidates: the realized one depends on initial conditions");
    }
    Ok(())
}

fn cmd_simulate(
    file: &Path,
    horizon: Option<f64>,
    step: Option<f64>,
    out: &Path,
    theta: f64,
) -> Result<(), Error> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Parameter {
            name: "theta",
            value: theta,
            expected: "a value in (0, 1)",
        });
    }
    let s = load_scenario(file)?;
    let options = RunOptions {
        horizon,
        step,
        theta,
        ..RunOptions::default()
    };
    let report = run(&s, out, &options)?;
    print!("{}", render_text(&report));
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn summary_line(report: &RunReport) -> String {
    let check = match report.cross_check.status {
        CheckStatus::Pass => "pass",
        CheckStatus::Fail => "FAIL",
        CheckStatus::NotApplicable => "n/a",
    };
    format!(
        "{:<24} {:<12} survivors {:<12} g_YL {:<12.6} transitions {:<3} cross-check {}",
        report.scenario,
        report.prediction.regime.to_string(),
        format_set(&report.realized.support),
        report.realized.terminal_growth,
        report.transitions.len(),
        check
    )
}

fn cmd_paper_figs(out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    for s in builtin_scenarios() {
        write_scenario(&s, out.join(format!("{}.scenario.json", s.name)))?;
        let report = run(&s, out, &RunOptions::default())?;
        println!("{}", summary_line(&report));
    }
    Ok(())
}

fn cmd_sweep(dir: &Path, out: &Path, jobs: Option<usize>) -> Result<(), Error> {
    let files = scenario_files(dir)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            b = b.num_threads(j);
        }
        b.build().expect("thread pool")
    };
    let mut results: Vec<(String, Result<RunReport, Error>)> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let key = f.display().to_string();
                let res = load_scenario(f).and_then(|s| run(&s, out, &RunOptions::default()));
                (key, res)
            })
            .collect()
    });
    results.sort_by(|a, b| {
        let name = |r: &(String, Result<RunReport, Error>)| match &r.1 {
            Ok(rep) => rep.scenario.clone(),
            Err(_) => r.0.clone(),
        };
        name(a).cmp(&name(b))
    });
    let mut first_error = None;
    for (file, res) in results {
        match res {
            Ok(report) => println!("{}", summary_line(&report)),
            Err(e) => {
                eprintln!("{file}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Classify { file, json } => cmd_classify(file, *json),
        Command::Simulate {
            file,
            horizon,
            step,
            out,
            theta,
        } => cmd_simulate(file, *horizon, *step, out, *theta),
        Command::Longrun { file, json } => cmd_longrun(file, *json),
        Command::PaperFigs { out } => cmd_paper_figs(out),
        Command::Sweep { dir, out, jobs } => cmd_sweep(dir, out, *jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
