//! bellrand: derive binary series from time-tagged two-station detection
//! data, score their randomness, and post-process with a Toeplitz extractor.
//!
//! Pipeline: `simulate` (or external data) -> `derive` -> `analyze` ->
//! `extract` / `report`. Exit code 2 signals that at least one series hit a
//! hard per-series error while the rest of the run completed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bellrand_core::battery::BatteryConfig;
use bellrand_core::bits::Bits;
use bellrand_core::event::{parse_timetag, write_timetag, TimetagFormat};
use bellrand_core::report::{
    aggregate, analyze_series, emit_figures, AnalyzeOptions, SeriesReport,
};
use bellrand_core::series::{
    derive_all, BitSeries, DelaySpec, DeriveParams, Provenance, SeriesKind, ThresholdSpectrum,
    TimeDiffSeries,
};
use bellrand_core::synth::{simulate_run, SynthConfig};
use bellrand_core::toeplitz::extract_series_with;

#[derive(Parser)]
#[command(name = "bellrand", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Bell-experiment run as a timetag file.
    Simulate(SimulateArgs),
    /// Derive the CO/SO/AL x OUT/TD series set from a timetag file.
    Derive(DeriveArgs),
    /// Score series files: test battery plus scalar and nonlinear metrics.
    Analyze(AnalyzeArgs),
    /// Toeplitz-extract a packed-bit series file.
    Extract(ExtractArgs),
    /// Aggregate analysis reports into a summary table and figure data.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Csv,
    Binary,
}

#[derive(Args)]
struct SimulateArgs {
    /// Two-photon fringe visibility V; the nominal S is 2*sqrt(2)*V.
    #[arg(long, default_value_t = 0.98)]
    visibility: f64,
    /// Entangled-pair rate per second.
    #[arg(long, default_value_t = 130_000.0)]
    pair_rate: f64,
    /// Background singles per second per station.
    #[arg(long, default_value_t = 500.0)]
    singles_rate: f64,
    /// Detector efficiencies as A0,A1,B0,B1.
    #[arg(long, default_value = "0.19,0.19,0.19,0.19", value_parser = parse_efficiency)]
    efficiency: Efficiency,
    /// Gaussian timing jitter sigma in picoseconds.
    #[arg(long, default_value_t = 700.0)]
    jitter_ps: f64,
    #[arg(long, default_value_t = 10.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FileFormat::Binary)]
    format: FileFormat,
}

#[derive(Clone)]
struct Efficiency([f64; 4]);

fn parse_efficiency(s: &str) -> Result<Efficiency, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected four comma-separated efficiencies A0,A1,B0,B1".into());
    }
    let mut out = [0.0; 4];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.trim().parse().map_err(|e| format!("bad efficiency {p:?}: {e}"))?;
    }
    Ok(Efficiency(out))
}

#[derive(Args)]
struct DeriveArgs {
    /// Input timetag file (CSV or binary).
    #[arg(long = "in")]
    input: PathBuf,
    /// Full coincidence window width in nanoseconds.
    #[arg(long, default_value_t = 10.0)]
    window_ns: f64,
    /// Fixed A->B delay in picoseconds.
    #[arg(long, conflicts_with = "scan_delay", allow_hyphen_values = true)]
    delay_ps: Option<i64>,
    /// Delay scan as lo:hi:step, picoseconds.
    #[arg(long, value_parser = parse_scan, allow_hyphen_values = true)]
    scan_delay: Option<Scan>,
    /// Threshold grid size (quantiles) for TD binarization.
    #[arg(long, default_value_t = 199)]
    grid: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy)]
struct Scan {
    lo: i64,
    hi: i64,
    step: u64,
}

fn parse_scan(s: &str) -> Result<Scan, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected lo:hi:step".into());
    }
    Ok(Scan {
        lo: parts[0].parse().map_err(|e| format!("bad lo: {e}"))?,
        hi: parts[1].parse().map_err(|e| format!("bad hi: {e}"))?,
        step: parts[2].parse().map_err(|e| format!("bad step: {e}"))?,
    })
}

#[derive(Args)]
struct AnalyzeArgs {
    /// A series .bits file or a directory of them (as written by derive).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output JSON report (array of per-series reports).
    #[arg(long)]
    out: PathBuf,
    /// Test battery to run; only "nist" is defined.
    #[arg(long, default_value = "nist")]
    tests: String,
    /// Metric set: "all" or a comma list of kc,hmin,hurst (the scalar
    /// metrics and battery always run; the list is validated for typos).
    #[arg(long, default_value = "all")]
    metrics: String,
    /// Run the Takens reconstruction on TD series (costly).
    #[arg(long)]
    nonlinear: bool,
    /// Max embedding dimension for the FNN sweep.
    #[arg(long, default_value_t = 12)]
    dmax: usize,
    /// Reconstruction delay: "auto" or a sample count.
    #[arg(long, default_value = "auto")]
    tau: String,
    /// Battery rejection level.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Bypass battery input-size gates (oracle testing only).
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ExtractArgs {
    /// Output rows of the Toeplitz matrix (block output length).
    #[arg(short, long, default_value_t = 16_384)]
    m: usize,
    /// Matrix columns (seed length).
    #[arg(short, long, default_value_t = 16_384)]
    n: usize,
    /// Input packed-bit series file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Build one matrix from the first n+m-1 bits and reuse it for every
    /// block instead of rebuilding per block.
    #[arg(long)]
    freeze_matrix: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON file, or a directory scanned for *.json reports.
    #[arg(long)]
    aggregate: PathBuf,
    /// Where to write the summary table CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Directory for figure data (scatter CSV).
    #[arg(long)]
    figures: Option<PathBuf>,
}

/// JSON sidecar written next to each derived .bits file.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    provenance: Provenance,
    length: usize,
    /// Nominal or measured S of the source run, if known.
    chsh_s: Option<f64>,
    /// Pre-binarization time differences of TD series, for nonlinear analysis.
    diffs: Option<Vec<u64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Derive(args) => derive(args),
        Command::Analyze(args) => analyze(args),
        Command::Extract(args) => extract(args),
        Command::Report(args) => report(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let config = SynthConfig {
        visibility: args.visibility,
        pair_rate: args.pair_rate,
        background_singles_rate: args.singles_rate,
        efficiency: args.efficiency.0,
        jitter_sigma_ps: args.jitter_ps,
        duration_s: args.duration_s,
        rng_seed: args.seed,
        label: format!("synthetic seed {}", args.seed),
    };
    let stream = simulate_run(&config)?;
    let format = match args.format {
        FileFormat::Csv => TimetagFormat::Csv,
        FileFormat::Binary => TimetagFormat::Binary,
    };
    fs::write(&args.out, write_timetag(&stream, format))
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "simulated {} events over {} s (nominal S = {:.4}) -> {}",
        stream.len(),
        config.duration_s,
        stream.meta.nominal_s_chsh,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn series_file_name(p: &Provenance) -> String {
    let class = format!("{:?}", p.class).to_lowercase();
    let kind = format!("{:?}", p.kind).to_lowercase();
    let station = format!("{:?}", p.station).to_lowercase();
    format!("{class}_{kind}_{station}")
}

fn derive(args: DeriveArgs) -> Result<ExitCode> {
    let data = fs::read(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let stream = parse_timetag(&data)?;
    let delay = match (args.delay_ps, args.scan_delay) {
        (Some(d), _) => DelaySpec::Fixed(d),
        (None, Some(s)) => DelaySpec::Scan {
            lo: s.lo,
            hi: s.hi,
            step: s.step,
        },
        (None, None) => DelaySpec::Fixed(0),
    };
    let params = DeriveParams {
        window_ps: (args.window_ns * 1000.0).round() as u64,
        delay,
        grid_quantiles: args.grid,
    };
    let out = derive_all(&stream, &params)?;
    fs::create_dir_all(&args.out_dir)?;
    eprintln!(
        "delay {} ps, {} coincidences",
        out.delay.delay_ps,
        out.coincidences.len()
    );

    let mut had_error = false;
    for entry in &out.entries {
        let name = series_file_name(&Provenance {
            class: entry.class,
            kind: entry.kind,
            station: entry.station,
            threshold_ps: None,
            extracted: false,
        });
        match &entry.result {
            Err(e) => {
                eprintln!("  {name}: skipped ({e})");
                had_error = true;
            }
            Ok(series) => {
                let base = args.out_dir.join(&name);
                fs::write(base.with_extension("bits"), series.bits.to_file_bytes())?;
                let sidecar = Sidecar {
                    provenance: series.provenance.clone(),
                    length: series.bits.len(),
                    chsh_s: Some(stream.meta.nominal_s_chsh),
                    diffs: entry.td.as_ref().map(|td| td.diffs.clone()),
                };
                fs::write(
                    base.with_extension("json"),
                    serde_json::to_vec_pretty(&sidecar)?,
                )?;
                if let Some(spectrum) = &entry.spectrum {
                    fs::write(base.with_extension("spectrum.csv"), spectrum_csv(spectrum))?;
                }
                eprintln!("  {name}: {} bits", series.bits.len());
            }
        }
    }
    Ok(if had_error {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn spectrum_csv(s: &ThresholdSpectrum) -> String {
    let mut csv = String::from("threshold_ps,kc,h_min\n");
    for p in &s.grid {
        csv.push_str(&format!("{},{:.6},{:.6}\n", p.threshold_ps, p.kc, p.h_min));
    }
    csv
}

fn analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    if args.tests != "nist" {
        bail!("unknown test battery {:?}", args.tests);
    }
    for token in args.metrics.split(',') {
        if !["all", "kc", "hmin", "hurst"].contains(&token.trim()) {
            bail!("unknown metric {token:?}");
        }
    }
    let mut files: Vec<PathBuf> = Vec::new();
    if args.input.is_dir() {
        for entry in fs::read_dir(&args.input)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "bits") {
                files.push(path);
            }
        }
        files.sort();
    } else {
        files.push(args.input.clone());
    }
    if files.is_empty() {
        bail!("no .bits files under {}", args.input.display());
    }

    let mut reports: Vec<SeriesReport> = Vec::new();
    let mut had_error = false;
    for path in &files {
        match analyze_one(path, &args) {
            Ok(report) => reports.push(report),
            Err(e) => {
                eprintln!("{}: {e:#}", path.display());
                had_error = true;
            }
        }
    }
    fs::write(&args.out, serde_json::to_vec_pretty(&reports)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("analyzed {} series -> {}", reports.len(), args.out.display());
    Ok(if had_error {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn default_provenance() -> Provenance {
    Provenance {
        class: bellrand_core::series::SeriesClass::Al,
        kind: SeriesKind::Out,
        station: bellrand_core::series::SeriesStation::A,
        threshold_ps: None,
        extracted: false,
    }
}

fn analyze_one(path: &Path, args: &AnalyzeArgs) -> Result<SeriesReport> {
    let bits = Bits::from_file_bytes(&fs::read(path)?)?;
    let sidecar: Option<Sidecar> = fs::read(path.with_extension("json"))
        .ok()
        .and_then(|data| serde_json::from_slice(&data).ok());
    let (provenance, chsh_s, diffs) = match sidecar {
        Some(s) => (s.provenance, s.chsh_s, s.diffs),
        // bare .bits file: treat as an unclassified OUT-style series
        None => (default_provenance(), None, None),
    };
    let td = diffs.map(|diffs| TimeDiffSeries {
        diffs,
        class: provenance.class,
        station: provenance.station,
    });
    let series = BitSeries { bits, provenance };
    let options = AnalyzeOptions {
        battery: BatteryConfig {
            alpha: args.alpha,
            force: args.force,
            ..BatteryConfig::default()
        },
        nonlinear: args.nonlinear,
        nonlinear_dmax: args.dmax,
        nonlinear_tau: match args.tau.as_str() {
            "auto" => None,
            t => Some(t.parse().context("--tau must be \"auto\" or a sample count")?),
        },
        chsh_s,
        ..Default::default()
    };
    Ok(analyze_series(&series, td.as_ref(), &options)?)
}

fn extract(args: ExtractArgs) -> Result<ExitCode> {
    let bits = Bits::from_file_bytes(&fs::read(&args.input)?)?;
    let sidecar: Option<Sidecar> = fs::read(args.input.with_extension("json"))
        .ok()
        .and_then(|data| serde_json::from_slice(&data).ok());
    let provenance = sidecar.map(|s| s.provenance).unwrap_or_else(default_provenance);
    let raw = BitSeries { bits, provenance };
    let out = extract_series_with(&raw, args.m, args.n, args.freeze_matrix)?;
    fs::write(&args.out, out.bits.to_file_bytes())?;
    let sidecar = Sidecar {
        provenance: out.provenance.clone(),
        length: out.bits.len(),
        chsh_s: None,
        diffs: None,
    };
    fs::write(
        args.out.with_extension("json"),
        serde_json::to_vec_pretty(&sidecar)?,
    )?;
    eprintln!(
        "extracted {} -> {} bits ({} blocks of m={})",
        raw.bits.len(),
        out.bits.len(),
        out.bits.len() / args.m,
        args.m
    );
    Ok(ExitCode::SUCCESS)
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let mut reports: Vec<SeriesReport> = Vec::new();
    let mut load = |path: &Path| -> Result<()> {
        let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let mut batch: Vec<SeriesReport> = serde_json::from_slice(&data)
            .with_context(|| format!("parsing {}", path.display()))?;
        reports.append(&mut batch);
        Ok(())
    };
    if args.aggregate.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&args.aggregate)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for p in &paths {
            load(p)?;
        }
    } else {
        load(&args.aggregate)?;
    }
    if reports.is_empty() {
        bail!("no reports found under {}", args.aggregate.display());
    }
    let table = aggregate(&reports)?;
    let csv = table.to_csv();
    match &args.table {
        Some(path) => {
            fs::write(path, &csv)?;
            eprintln!("table -> {}", path.display());
        }
        None => print!("{csv}"),
    }
    if let Some(dir) = &args.figures {
        fs::create_dir_all(dir)?;
        let figures = emit_figures(&reports, &[]);
        fs::write(dir.join("scatter.csv"), figures.scatter)?;
        eprintln!("figures -> {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}
