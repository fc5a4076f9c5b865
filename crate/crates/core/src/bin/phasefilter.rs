//! Command-line front end: `simulate` writes the trace family, `budget`
//! writes the degradation ledger.
//!
//! Exit codes: 0 success, 1 validation or model error, 2 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phasefilter::scenario::{
    export_budget, export_traces, load_config, run_budget, run_scenario, GridSpec, OutputFormat,
    ScenarioConfig,
};
use phasefilter::Error;

#[derive(Parser)]
#[command(
    name = "phasefilter",
    version,
    about = "Squeezing-enhanced laser phase-noise loop simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the eight-trace family and write it to --out.
    Simulate(CommonArgs),
    /// Write the degradation budget report to --out.
    Budget(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file; the reference setup is used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Trace file format.
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Frequency grid override, FMIN:FMAX:N in Hz.
    #[arg(long, value_name = "FMIN:FMAX:N")]
    grid: Option<String>,
    /// Reserved; every computation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn scenario(args: &CommonArgs) -> Result<ScenarioConfig, Error> {
    let config = match &args.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::paper_default(),
    };
    match &args.grid {
        Some(g) => config.with_grid(GridSpec::parse(g)?),
        None => Ok(config),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn simulate(args: &CommonArgs) -> Result<(), Error> {
    let config = scenario(args)?;
    print!("{}", config.echo_text());
    let out = run_scenario(&config)?;
    ensure_dir(&args.out)?;
    let traces_path = args.out.join(format!("traces.{}", args.format.extension()));
    export_traces(&out.traces, &traces_path, args.format)?;
    let summary_path = args.out.join("summary.json");
    let summary = serde_json::to_string_pretty(&out.summary)? + "\n";
    std::fs::write(&summary_path, &summary).map_err(|source| Error::Io {
        path: summary_path.clone(),
        source,
    })?;
    for f in &out.summary.non_suppressing_frequencies_hz {
        eprintln!("warning: loop does not suppress at {f} Hz (|1 - sqrt(t)G| <= 1)");
    }
    let s = &out.summary;
    println!("shot noise: {:.2} dB/Hz", s.shot_noise_rin_db);
    println!(
        "residual amplitude floor: {:+.2} dB re shot noise",
        s.residual_amplitude_gap_db
    );
    println!(
        "trace (c) below (b), {}-{} Hz: mean {:.2} dB (min {:.2}, max {:.2})",
        s.enhancement_band_hz.0,
        s.enhancement_band_hz.1,
        s.trace_c_enhancement_band_db.mean,
        s.trace_c_enhancement_band_db.min,
        s.trace_c_enhancement_band_db.max
    );
    println!("wrote {}", traces_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn budget(args: &CommonArgs) -> Result<(), Error> {
    let config = scenario(args)?;
    print!("{}", config.echo_text());
    let report = run_budget(&config)?;
    ensure_dir(&args.out)?;
    let path = args.out.join("budget.json");
    export_budget(&report, &path)?;
    let [s1, s2, s3] = report.ledger.stages;
    println!("ledger stages: {s1:.2} dB -> {s2:.2} dB -> {s3:.2} dB");
    for d in &report.discrepancies {
        println!(
            "discrepancy: {} stated {} computed {:.4} ({})",
            d.quantity, d.stated, d.computed, d.note
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Budget(args) => budget(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
