use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cacm_core::baselines::SchemeId;
use cacm_core::bound::{rate_upper_bound, BoundInputs};
use cacm_core::caching::CachingDistribution;
use cacm_core::harness::{self, emit, example1, verify, RunContext, Scenario};

#[derive(Parser)]
#[command(name = "cacm", version, about = "Cache-aided coded multicast for correlated content")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Placement {
    /// Optimized caching distribution.
    Optimized,
    /// Uniform caching distribution.
    Uniform,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario sweep and write record.json, results.csv and plot files.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output.directory` or `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Keep per-realization outcomes in the record.
        #[arg(long)]
        traces: bool,
    },
    /// Check decoding, oracles and bound dominance on a scenario's realizations.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the rate upper bound at each cache size of a scenario.
    Bound {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "optimized")]
        placement: Placement,
        /// `CA_RAP_CM` or `RAP_CM`.
        #[arg(long, default_value = "CA_RAP_CM")]
        scheme: SchemeId,
    },
    /// Reproduce the four-file worked example.
    Example1 {
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn load(path: &Path, seed: Option<u64>) -> cacm_core::Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.sampling.seed = seed;
    }
    Ok(s)
}

fn execute(cli: Cli) -> cacm_core::Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            traces,
        } => {
            let mut s = load(&scenario, seed)?;
            s.output.traces |= traces;
            let dir = out
                .or_else(|| s.output.directory.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let record = harness::run(&s)?;
            let files = emit(&record, &dir)?;
            println!("scheme\tM\tmean_rate\tstderr\tbound");
            for p in &record.points {
                let bound = p.bound.map(|b| format!("{b:.4}")).unwrap_or_else(|| "-".into());
                println!("{}\t{}\t{:.4}\t{:.4}\t{bound}", p.scheme, p.cache_size, p.mean_rate, p.stderr);
            }
            let failures: usize = record.points.iter().map(|p| p.decode_failures).sum();
            if failures > 0 {
                eprintln!("{failures} realizations failed to decode");
            }
            eprintln!(
                "wrote {} in {:.1}s",
                files.record.parent().unwrap_or(&dir).display(),
                record.runtime.elapsed_seconds
            );
            Ok(failures == 0)
        }
        Command::Verify { scenario, seed } => {
            let report = verify(&load(&scenario, seed)?)?;
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                match &c.detail {
                    Some(d) => println!("{status} {} ({} instances): {d}", c.name, c.instances),
                    None => println!("{status} {} ({} instances)", c.name, c.instances),
                }
            }
            Ok(report.passed())
        }
        Command::Bound {
            scenario,
            placement,
            scheme,
        } => {
            let s = load(&scenario, None)?;
            let ctx = RunContext::new(&s)?;
            println!("M\tdelta\tbound\tpsi\tdelta_r\tm_bar");
            for &m in &s.sweep.cache_sizes {
                let plan = ctx.plan_scheme(scheme, m)?;
                let problem = ctx.bound_problem(m, plan.delta, plan.model.config().matrix.clone());
                let p = match placement {
                    Placement::Optimized => plan.distribution.p,
                    Placement::Uniform => CachingDistribution::uniform(s.library.files, m).p,
                };
                let r = rate_upper_bound(&BoundInputs { problem, p })?;
                println!(
                    "{m}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                    plan.delta, r.bound, r.psi, r.delta_r, r.m_bar
                );
            }
            Ok(true)
        }
        Command::Example1 { json } => {
            let r = example1()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            } else {
                println!("{}", r.trace.trim_end());
                println!("correlation-aware rate: {}", r.rate);
                println!("reference rate: {}", r.reference_rate);
                println!("decoded: {}", r.decoded);
            }
            Ok(r.decoded)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
