//! `pairsim`: run presets and configurations, query the analytic oracles,
//! decode rate files and run the invariant suite.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirac_pairs::observables::DecodeOptions;
use dirac_pairs::oracle::{
    bound_state_levels, klein_rate, response_time, tabulate_transmission, write_transmission_csv,
};
use dirac_pairs::runner::{
    decode_csv, parse_config, preset, preset_names, run, validate, ManifestExtras, RunConfig, ValidateOptions,
};
use dirac_pairs::{Error, C2};

/// Environment variable overriding the worker count of every run.
const WORKERS_ENV: &str = "PAIRSIM_WORKERS";

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "pairsim", version, about = "Vacuum pair creation in 1D supercritical fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML configuration file or a named preset.
    Run(RunArgs),
    /// Evaluate analytic results (energies in units of c^2).
    Analytic(AnalyticArgs),
    /// Decode the temporal information in a rate CSV.
    Decode(DecodeArgs),
    /// Run the invariant suite.
    Validate(ValidateArgs),
    /// List the built-in presets.
    Presets(PresetArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a configuration file, or a preset name.
    target: String,
    /// Output directory; defaults to the config's `output` or `out/<name>`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(short, long)]
    workers: Option<usize>,
    /// Allow paper-scale presets.
    #[arg(long)]
    extended: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    /// Closed-form and transfer-matrix transmission table (CSV).
    Transmission,
    /// Bound levels of a control well of depth `--v2`.
    Bound,
    /// Static pair-creation rate from the transmission integral.
    Rate,
    /// Response time `d E / (c^2 p)` at `--energy`.
    Response,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(value_enum)]
    quantity: Quantity,
    #[arg(long, default_value_t = 2.5)]
    v1: f64,
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    v2: f64,
    /// Separation in a.u.
    #[arg(long, default_value_t = 0.2)]
    d: f64,
    #[arg(long, default_value_t = 1.25)]
    energy: f64,
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Args)]
struct DecodeArgs {
    csv: PathBuf,
    /// Configuration whose field replaces the one echoed in the CSV header.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Largest lag searched for the response time.
    #[arg(long, default_value_t = DecodeOptions::default().max_lag)]
    max_lag: f64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Skip the short full-basis run.
    #[arg(long)]
    quick: bool,
    /// Reverse the time step to confirm the suite catches it.
    #[arg(long, hide = true)]
    reverse_time: bool,
}

#[derive(Args)]
struct PresetArgs {
    /// List names with descriptions.
    #[arg(long)]
    list: bool,
    /// Print the configurations of one preset.
    #[arg(long)]
    show: Option<String>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invariant(_) => EXIT_INVARIANT,
        Error::UnknownPreset(_) => EXIT_USAGE,
        _ => EXIT_VALIDATION,
    }
}

fn workers_override(flag: Option<usize>) -> Result<Option<usize>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| format!("{WORKERS_ENV} must be a positive integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn default_dir(name: Option<&str>) -> PathBuf {
    Path::new("out").join(name.unwrap_or("run"))
}

fn cmd_run(args: RunArgs) -> Result<(), (u8, String)> {
    let workers = workers_override(args.workers).map_err(|e| (EXIT_USAGE, e))?;
    let path = Path::new(&args.target);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", path.display())))?;
        let mut config: RunConfig = parse_config(&text).map_err(|e| (exit_code(&e), format!("{}: {e}", path.display())))?;
        if workers.is_some() {
            config.workers = workers;
        }
        let dir = args
            .out
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| default_dir(config.name.as_deref()));
        run(&config, &dir, &ManifestExtras::default()).map_err(|e| (exit_code(&e), e.to_string()))?;
        println!("{}", dir.display());
        return Ok(());
    }
    let mut p = preset(&args.target).map_err(|e| (exit_code(&e), format!("{e} (neither a file nor a preset)")))?;
    if p.extended && !args.extended {
        return Err((
            EXIT_USAGE,
            format!("preset `{}` is paper scale and takes hours; pass --extended to run it", p.name),
        ));
    }
    for r in &mut p.runs {
        if workers.is_some() {
            r.config.workers = workers;
        }
    }
    let dir = args.out.unwrap_or_else(|| default_dir(Some(&p.name)));
    for r in &p.runs {
        eprintln!("{}: {}", p.name, r.label);
    }
    p.run(&dir).map_err(|e| (exit_code(&e), e.to_string()))?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_analytic(a: AnalyticArgs) -> Result<(), Error> {
    let (v1, v2) = (a.v1 * C2, a.v2 * C2);
    let mut out = std::io::stdout().lock();
    let written = match a.quantity {
        Quantity::Transmission => {
            let rows = tabulate_transmission(v1, v2, a.d, a.samples)?;
            write_transmission_csv(&mut out, &rows)
        }
        Quantity::Bound => {
            let set = bound_state_levels(v2.abs(), a.d)?;
            writeln!(out, "E/c^2").and_then(|_| set.levels.iter().try_for_each(|e| writeln!(out, "{:.12}", e / C2)))
        }
        Quantity::Rate => writeln!(out, "{:.10e}", klein_rate(v1, v2, a.d)?),
        Quantity::Response => writeln!(out, "{:.10e}", response_time(a.d, a.energy * C2)?),
    };
    match written {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_decode(a: DecodeArgs) -> Result<(), (u8, String)> {
    let text = fs::read_to_string(&a.csv).map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", a.csv.display())))?;
    let field = match &a.config {
        Some(p) => {
            let t = fs::read_to_string(p).map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", p.display())))?;
            Some(parse_config(&t).map_err(|e| (exit_code(&e), e.to_string()))?.field)
        }
        None => None,
    };
    let options = DecodeOptions {
        max_lag: a.max_lag,
        ..Default::default()
    };
    let report = decode_csv(&text, field.as_ref(), &options).map_err(|e| (exit_code(&e), e.to_string()))?;
    println!("{}", report.to_json());
    if report.decoded() {
        Ok(())
    } else {
        Err((EXIT_VALIDATION, "series could not be fully decoded".into()))
    }
}

fn cmd_validate(a: ValidateArgs) -> Result<(), (u8, String)> {
    let options = ValidateOptions {
        time_sign: if a.reverse_time { -1.0 } else { 1.0 },
        quick: a.quick,
    };
    let report = validate(&options).map_err(|e| (exit_code(&e), e.to_string()))?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err((EXIT_VALIDATION, format!("{} check(s) failed", report.failures().len())))
    }
}

fn cmd_presets(a: PresetArgs) -> Result<(), (u8, String)> {
    if let Some(name) = a.show {
        let p = preset(&name).map_err(|e| (exit_code(&e), e.to_string()))?;
        for r in &p.runs {
            println!("# {}\n{}", r.label, r.config.to_toml());
        }
        return Ok(());
    }
    let _ = a.list;
    for name in preset_names() {
        let p = preset(&name).expect("listed preset exists");
        let tag = if p.extended { " [extended]" } else { "" };
        println!("{name:<8} {} run(s){tag}  {}", p.runs.len(), p.description);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Analytic(a) => cmd_analytic(a).map_err(|e| (exit_code(&e), e.to_string())),
        Command::Decode(a) => cmd_decode(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Presets(a) => cmd_presets(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
