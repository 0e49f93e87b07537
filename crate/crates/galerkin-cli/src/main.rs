//! Command line driver: solve trajectories, run hypothesis checks, run
//! level studies, and print exponent reports.
//!
//! Exit codes: 0 on success, 1 when a check or audit fails (or a solve
//! breaks down), 2 for usage, schema, or value errors.

use clap::{Parser, Subcommand};
use galerkin::config::{config_digest, parse_config, ParsedRun, RunManifest};
use galerkin::convlab::{cauchy_study, hirano_diagnostic, study_csv, weak_limit_check};
use galerkin::report::{format_float, to_json_string, trajectory_csv};
use galerkin::solver::solve_trajectory;
use galerkin::verify::exponents::{exponent_report, parse_rational};
use galerkin::verify::{
    audit_trajectory, certify_g, check_coercivity, check_growth, check_monotone, CheckReport,
};
use galerkin::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "galerkin",
    version,
    about = "Spectral Galerkin solver and verification toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and audit it; writes trajectory.csv,
    /// audit.json and manifest.json into the output directory.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Truncation level (modes per direction).
        #[arg(long)]
        level: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the hypothesis checkers on the configured operator family.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 4)]
        level: usize,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve across a level ladder and report Cauchy/limit diagnostics as CSV.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated strictly increasing levels, e.g. 2,4,8.
        #[arg(long)]
        levels: String,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the embedding-exponent report for dimension d and exponent p.
    Exponents {
        d: u32,
        /// Rational like 11/5, or a decimal.
        p: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Step { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load(config: &Path) -> Result<ParsedRun, Error> {
    let parsed = parse_config(config)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed)
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(Error::from),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn summarize(reports: &[CheckReport]) -> bool {
    let mut all = true;
    for r in reports {
        println!(
            "{}: {} (worst margin {}, {} samples)",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            format_float(r.worst_margin),
            r.samples
        );
        all &= r.passed;
    }
    all
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Solve { config, level, out } => {
            let parsed = load(&config)?;
            std::fs::create_dir_all(&out)?;

            let t0 = Instant::now();
            let traj = solve_trajectory(&parsed.problem, level)?;
            let solve_ms = t0.elapsed().as_secs_f64() * 1e3;
            let space = parsed.problem.space.build(level)?;

            let t0 = Instant::now();
            let reports = audit_trajectory(
                &space,
                &traj,
                &parsed.problem.family,
                &parsed.problem.rhs,
                Some(&parsed.problem.initial),
                &parsed.checks,
            )?;
            let audit_ms = t0.elapsed().as_secs_f64() * 1e3;

            std::fs::write(out.join("trajectory.csv"), trajectory_csv(&traj))?;
            std::fs::write(out.join("audit.json"), to_json_string(&reports)?)?;
            let mut manifest = RunManifest::new(config_digest(&parsed.raw), parsed.checks.seed);
            manifest.artifacts = vec!["trajectory.csv".to_string(), "audit.json".to_string()];
            manifest.timings_ms.insert("solve".to_string(), solve_ms);
            manifest.timings_ms.insert("audit".to_string(), audit_ms);
            std::fs::write(out.join("manifest.json"), to_json_string(&manifest)?)?;

            let ok = summarize(&reports);
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::Check {
            config,
            seed,
            level,
            out,
        } => {
            let parsed = load(&config)?;
            let mut settings = parsed.checks.clone();
            if let Some(seed) = seed {
                settings.seed = seed;
            }
            let space = parsed.problem.space.build(level)?;
            let family = &parsed.problem.family;

            let mut reports = Vec::new();
            reports.push(check_coercivity(family, &space, &settings)?);
            reports.push(check_growth(family, &space, &settings)?);
            reports.push(check_monotone(
                &space,
                family.p(),
                family.delta(),
                &settings,
            )?);
            for part in family.parts() {
                if let galerkin::operators::OperatorPart::LowerOrder(spec) = part {
                    reports.extend(certify_g(
                        spec,
                        family.p_exact(),
                        space.dim() as u32,
                        &settings,
                    ));
                }
            }

            write_or_print(out.as_deref(), &to_json_string(&reports)?)?;
            let ok = reports.iter().all(|r| r.passed);
            if out.is_some() {
                summarize(&reports);
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::Converge {
            config,
            levels,
            out,
        } => {
            let parsed = load(&config)?;
            let levels = parse_levels(&levels)?;
            let study = cauchy_study(&parsed.problem, &levels)?;
            let hirano = hirano_diagnostic(&study, &parsed.problem.family)?;
            let ref_space = study.reference_space();
            let nfields = 2.min(ref_space.basis_len());
            let test_fields: Vec<_> = (0..nfields)
                .map(|k| ref_space.basis_field(k))
                .collect::<Result<_, _>>()?;
            let weak = weak_limit_check(&study, &parsed.problem.family, &test_fields)?;
            write_or_print(out.as_deref(), &study_csv(&study, &hirano, &weak))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Exponents { d, p } => {
            let p = parse_rational(&p)?;
            let report = exponent_report(d, &p)?;
            print!("{}", to_json_string(&report.to_json())?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_levels(text: &str) -> Result<Vec<usize>, Error> {
    let levels: Vec<usize> = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Value(format!("invalid level '{part}'")))
        })
        .collect::<Result<_, _>>()?;
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Value("levels must be strictly increasing".into()));
    }
    Ok(levels)
}
