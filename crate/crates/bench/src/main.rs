use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contention::allocation::{Range, Scenario1Params, Scenario2Params};
use contention::calibration::{calibrate_rule, DEFAULT_RULE_SAMPLES, DEFAULT_RULE_SEED};
use contention_bench::files::{self, parse_methods};
use contention_bench::{
    figure_points, format_summary, generate, read_timings, run, to_csv, BenchError,
    GenerateRequest, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "contention-bench",
    version,
    about = "Compare allocation methods under resource contention"
)]
struct Cli {
    /// Master seed for generation, sampling and integration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative tolerance of order-probability integration.
    #[arg(long, global = true, default_value_t = 1e-4)]
    tolerance: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Scenario1,
    Scenario2,
}

#[derive(Subcommand)]
enum Command {
    /// Write a file of seeded random instances.
    Generate(GenerateArgs),
    /// Run methods on a scenario file and record costs and regrets.
    Run(RunArgs),
    /// Fit a conditioning rule and write it as text.
    Calibrate(CalibrateArgs),
    /// Summarize a results file.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Robot types (scenario1).
    #[arg(long)]
    types: Option<usize>,
    /// Building locations (scenario1).
    #[arg(long)]
    locations: Option<usize>,
    /// Controlled robots and packages (scenario2).
    #[arg(long)]
    robots: Option<usize>,
    /// Uncontrolled robots per location (scenario2).
    #[arg(long)]
    uncontrolled: Option<usize>,
    /// Travel or arrival time mean range, as LO:HI.
    #[arg(long)]
    mean: Option<String>,
    /// Travel or arrival time standard deviation range, as LO:HI.
    #[arg(long)]
    sd: Option<String>,
    /// Deadline range, as LO:HI.
    #[arg(long)]
    deadline: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated method tags: D, M(k), A(phi), AEst.
    #[arg(long, default_value = "D,M(10),A(1)")]
    methods: String,
    #[arg(long, default_value_t = 100_000)]
    ground_truth_samples: u64,
    #[arg(long, short)]
    out: PathBuf,
    /// Per-method wall times as CSV.
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Per-method regret summary as CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = DEFAULT_RULE_SAMPLES)]
    samples: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    /// Wall times written by `run`, needed for the figure data.
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Regret versus wall time per method as CSV.
    #[arg(long)]
    figure: Option<PathBuf>,
    /// Per-method regret summary as CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<Range, BenchError> {
    let bad = || BenchError::Usage(format!("range {s:?} must look like LO:HI"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok(Range::new(lo, hi))
}

fn generate_request(args: &GenerateArgs) -> Result<GenerateRequest, BenchError> {
    let opt_range = |s: &Option<String>| s.as_deref().map(parse_range).transpose();
    let (mean, sd, deadline) = (
        opt_range(&args.mean)?,
        opt_range(&args.sd)?,
        opt_range(&args.deadline)?,
    );
    let misplaced =
        |flag: &str, kind: &str| BenchError::Usage(format!("--{flag} does not apply to {kind}"));
    Ok(match args.kind {
        Kind::Scenario1 => {
            if args.robots.is_some() {
                return Err(misplaced("robots", "scenario1"));
            }
            if args.uncontrolled.is_some() {
                return Err(misplaced("uncontrolled", "scenario1"));
            }
            let mut p = Scenario1Params::default();
            p.types = args.types.unwrap_or(p.types);
            p.locations = args.locations.unwrap_or(p.locations);
            p.travel_mean = mean.unwrap_or(p.travel_mean);
            p.travel_sd = sd.unwrap_or(p.travel_sd);
            p.deadline = deadline.unwrap_or(p.deadline);
            GenerateRequest::Scenario1(p)
        }
        Kind::Scenario2 => {
            if args.types.is_some() {
                return Err(misplaced("types", "scenario2"));
            }
            if args.locations.is_some() {
                return Err(misplaced("locations", "scenario2"));
            }
            let mut p = Scenario2Params::default();
            p.robots = args.robots.unwrap_or(p.robots);
            p.uncontrolled = args.uncontrolled.unwrap_or(p.uncontrolled);
            p.arrival_mean = mean.unwrap_or(p.arrival_mean);
            p.arrival_sd = sd.unwrap_or(p.arrival_sd);
            p.deadline = deadline.unwrap_or(p.deadline);
            GenerateRequest::Scenario2(p)
        }
    })
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(BenchError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| BenchError::Compute(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(args) => {
            let request = generate_request(&args)?;
            let file = generate(&request, args.instances, cli.seed.unwrap_or(0))?;
            files::write_file(&args.out, files::to_json(&file)?.as_bytes())?;
            eprintln!(
                "wrote {} {} instances to {}",
                file.body.len(),
                file.body.kind(),
                args.out.display()
            );
        }
        Command::Run(args) => {
            let methods = parse_methods(&args.methods)?;
            let bytes = files::read_file(&args.scenario)?;
            let cfg = RunConfig::new(methods, args.ground_truth_samples, cli.seed.unwrap_or(0))
                .with_tolerance(cli.tolerance);
            let output = run(&bytes, &cfg)?;
            files::write_file(&args.out, files::to_json(&output.results)?.as_bytes())?;
            if let Some(path) = &args.timings {
                files::write_file(path, &to_csv(&output.timings)?)?;
            }
            if let Some(path) = &args.summary {
                files::write_file(path, &to_csv(&output.results.summary)?)?;
            }
            print!("{}", format_summary(&output.results));
        }
        Command::Calibrate(args) => {
            let report = calibrate_rule(args.samples, cli.seed.unwrap_or(DEFAULT_RULE_SEED))
                .map_err(|e| BenchError::Usage(e.to_string()))?;
            files::write_file(&args.out, report.rule.to_text().as_bytes())?;
            println!(
                "held-out optimal rate {:.4}, mean KL {:.3e}, RMS KL {:.3e} ({} training samples skipped)",
                report.heldout.optimal_rate, report.heldout.mean_kl, report.heldout.rms_kl, report.skipped_training
            );
        }
        Command::Report(args) => {
            let results = files::parse_results(&files::read_file(&args.results)?)?;
            print!("{}", format_summary(&results));
            if let Some(path) = &args.summary {
                files::write_file(path, &to_csv(&results.summary)?)?;
            }
            if let Some(path) = &args.figure {
                let timings = match &args.timings {
                    Some(t) => read_timings(&files::read_file(t)?)?,
                    None => return Err(BenchError::Usage("--figure needs --timings".into())),
                };
                files::write_file(path, &to_csv(&figure_points(&results.summary, &timings))?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on its own usage errors.
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
