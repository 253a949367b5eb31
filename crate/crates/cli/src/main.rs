//! Command-line front end: ingest a daily series, isolate periodic
//! components, estimate confidence bands with VBPBB and the GSBB baseline,
//! and emit reports, band tables, and static SVG plots.

use vbpbb_cli::{manifest, svg};

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vbpbb::analysis::{
    component_set, compare_pipelines, gsbb_pipeline, vbpbb_pipeline_with, AnalysisReport,
    CombineMode as LibCombineMode, ComponentSpec, GsbbOutcome,
};
use vbpbb::series::{
    parse_csv_series, synth_series, to_rate, NoiseKind, PopulationTable, SynthComponent,
    SynthSpec, TimeSeries,
};
use vbpbb::spectral::{peak_candidates, periodogram, EdgePolicy, PeakCandidate};

use manifest::RunManifest;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "vbpbb",
    version,
    about = "Confidence bands for periodic means via bandpass-filtered block bootstrap"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a daily CSV series: filter components, bootstrap bands,
    /// write report, band tables, and plots.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic periodic series with known per-phase truth.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Vbpbb,
    Gsbb,
    Both,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Vbpbb => "vbpbb",
            Method::Gsbb => "gsbb",
            Method::Both => "both",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EdgePolicyArg {
    Renormalize,
    Strict,
}

impl From<EdgePolicyArg> for EdgePolicy {
    fn from(value: EdgePolicyArg) -> Self {
        match value {
            EdgePolicyArg::Renormalize => EdgePolicy::Renormalize,
            EdgePolicyArg::Strict => EdgePolicy::Strict,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CombineModeArg {
    ReplicateSum,
    SummedSeries,
}

impl From<CombineModeArg> for LibCombineMode {
    fn from(value: CombineModeArg) -> Self {
        match value {
            CombineModeArg::ReplicateSum => LibCombineMode::ReplicateSum,
            CombineModeArg::SummedSeries => LibCombineMode::SummedSeries,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    input: PathBuf,

    /// Name of the date column.
    #[arg(long, default_value = "date")]
    date_col: String,

    /// Name of the value column.
    #[arg(long, default_value = "value")]
    value_col: String,

    /// Date format of the input (strftime pattern).
    #[arg(long, default_value = "%Y-%m-%d")]
    date_format: String,

    /// Population for rate conversion: a single count or a path to a
    /// `year,population` CSV. Omit to analyze values as-is.
    #[arg(long)]
    population: Option<String>,

    /// Fundamental period in days.
    #[arg(long, default_value_t = 365, value_parser = clap::value_parser!(u64).range(2..))]
    base_period: u64,

    /// Number of harmonics to analyze (h = 1..=harmonics).
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    harmonics: u64,

    #[arg(long, value_enum, default_value_t = Method::Both)]
    method: Method,

    /// Bootstrap replicate count B.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    replicates: u64,

    /// GSBB block length; defaults to each component's period.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    block_length: Option<u64>,

    /// Master seed. Omitted: one is drawn, printed, and recorded.
    #[arg(long)]
    seed: Option<u64>,

    /// Pin the filter window to m=731 at every scale instead of 2*base+1.
    #[arg(long)]
    paper_exact: bool,

    /// How windows that run past the series ends are treated.
    #[arg(long, value_enum, default_value_t = EdgePolicyArg::Renormalize)]
    edge_policy: EdgePolicyArg,

    /// How the significant components are combined into one band.
    #[arg(long, value_enum, default_value_t = CombineModeArg::ReplicateSum)]
    combine_mode: CombineModeArg,

    /// Worker threads (0 = library default). Must not change numeric output.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Output directory.
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Components as comma-separated period:amplitude:phase triples,
    /// e.g. `365:1:0,122:0.5:1`.
    #[arg(long, value_parser = parse_synth_components)]
    spec: SynthComponents,

    /// Series length in days.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    n: u64,

    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,

    /// AR(1) coefficient in (-1, 1); omit for white noise.
    #[arg(long)]
    noise_ar1: Option<f64>,

    /// Master seed. Omitted: one is drawn, printed, and recorded.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

#[derive(Clone)]
struct SynthComponents(Vec<SynthComponent>);

fn parse_synth_components(raw: &str) -> Result<SynthComponents, String> {
    let mut components = Vec::new();
    for triple in raw.split(',') {
        let fields: Vec<&str> = triple.split(':').collect();
        if fields.len() != 3 {
            return Err(format!(
                "component {triple:?} must be period:amplitude:phase"
            ));
        }
        let parse = |name: &str, text: &str| -> Result<f64, String> {
            text.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad {name} in {triple:?}: {e}"))
        };
        let period = parse("period", fields[0])?;
        if period < 2.0 {
            return Err(format!("period must be >= 2 days, got {period}"));
        }
        components.push(SynthComponent {
            period,
            amplitude: parse("amplitude", fields[1])?,
            phase: parse("phase", fields[2])?,
        });
    }
    if components.is_empty() {
        return Err("at least one component is required".into());
    }
    Ok(SynthComponents(components))
}

fn main() {
    // Die quietly on closed pipes (e.g. `vbpbb analyze ... | head`) instead
    // of panicking on the first blocked print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Synth(args) => run_synth(args),
    };
    if let Err(error) = outcome {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

/// Per-period GSBB result for `--method gsbb` runs.
#[derive(Serialize)]
struct GsbbEntry {
    label: String,
    period: usize,
    block_length: usize,
    #[serde(flatten)]
    outcome: GsbbOutcome,
}

#[derive(Serialize)]
struct InputSummary {
    path: String,
    sha256: String,
    n: usize,
    missing_values: usize,
    start_date: String,
    end_date: String,
    rate_converted: bool,
}

#[derive(Serialize)]
struct ReportDocument {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    method: &'static str,
    master_seed: u64,
    base_period: usize,
    harmonics: usize,
    replicates: usize,
    paper_exact: bool,
    edge_policy: &'static str,
    combine_mode: &'static str,
    input: InputSummary,
    periodogram_peaks: Vec<PeakCandidate>,
    analysis: Option<AnalysisReport>,
    gsbb: Option<Vec<GsbbEntry>>,
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let seed = args.seed.unwrap_or_else(|| {
        let drawn: u64 = rand::random();
        println!("seed: {drawn} (drawn; pass --seed {drawn} to reproduce)");
        drawn
    });

    let input_text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut digests = BTreeMap::new();
    digests.insert(
        args.input.display().to_string(),
        manifest::sha256_hex(input_text.as_bytes()),
    );

    let counts = parse_csv_series(
        &input_text,
        &args.date_col,
        &args.value_col,
        &args.date_format,
    )?;

    let (series, rate_converted) = match &args.population {
        None => (
            counts.with_unit(vbpbb::series::ValueUnit::Dimensionless),
            false,
        ),
        Some(spec) => {
            let table = if let Ok(count) = spec.parse::<u64>() {
                PopulationTable::scalar(count)?
            } else {
                let text = fs::read_to_string(spec)
                    .with_context(|| format!("reading population table {spec}"))?;
                digests.insert(spec.clone(), manifest::sha256_hex(text.as_bytes()));
                PopulationTable::from_csv(&text)?
            };
            (to_rate(&counts, &table)?, true)
        }
    };
    println!(
        "input: n={} missing={} [{} .. {}]",
        series.len(),
        series.missing_count(),
        series.start_date(),
        series.end_date()
    );

    let base_period = args.base_period as usize;
    let window = if args.paper_exact {
        731
    } else {
        2 * base_period + 1
    };
    let specs = component_set(
        base_period,
        args.harmonics as usize,
        window,
        args.edge_policy.into(),
    )?;
    let replicates = args.replicates as usize;
    let block_length = args.block_length.map(|b| b as usize);

    let run = || -> Result<(Option<AnalysisReport>, Option<Vec<GsbbEntry>>)> {
        match args.method {
            Method::Vbpbb => Ok((
                Some(vbpbb_pipeline_with(
                    &series,
                    &specs,
                    replicates,
                    seed,
                    args.combine_mode.into(),
                )?),
                None,
            )),
            Method::Both => Ok((
                Some(compare_pipelines(
                    &series,
                    &specs,
                    replicates,
                    seed,
                    block_length,
                    args.combine_mode.into(),
                )?),
                None,
            )),
            Method::Gsbb => {
                let entries = specs
                    .iter()
                    .enumerate()
                    .map(|(c, spec)| {
                        let b = block_length.unwrap_or(spec.period);
                        let outcome = gsbb_pipeline(
                            &series,
                            spec.period,
                            b,
                            replicates,
                            vbpbb::analysis::baseline_seed(seed, c as u64),
                        )?;
                        Ok(GsbbEntry {
                            label: spec.label.clone(),
                            period: spec.period,
                            block_length: b,
                            outcome,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((None, Some(entries)))
            }
        }
    };
    let (analysis, gsbb_entries) = if args.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .context("building thread pool")?;
        pool.install(run)?
    } else {
        run()?
    };

    let pg = periodogram(&series)?;
    let peaks = peak_candidates(&pg, 10, 1.0 / (2.0 * base_period as f64));

    let document = ReportDocument {
        tool: "vbpbb",
        version: TOOL_VERSION,
        command: "analyze",
        method: args.method.name(),
        master_seed: seed,
        base_period,
        harmonics: args.harmonics as usize,
        replicates,
        paper_exact: args.paper_exact,
        edge_policy: match args.edge_policy {
            EdgePolicyArg::Renormalize => "renormalize",
            EdgePolicyArg::Strict => "strict",
        },
        combine_mode: match args.combine_mode {
            CombineModeArg::ReplicateSum => "replicate-sum",
            CombineModeArg::SummedSeries => "summed-series",
        },
        input: InputSummary {
            path: args.input.display().to_string(),
            sha256: digests[&args.input.display().to_string()].clone(),
            n: series.len(),
            missing_values: series.missing_count(),
            start_date: series.start_date().to_string(),
            end_date: series.end_date().to_string(),
            rate_converted,
        },
        periodogram_peaks: peaks,
        analysis,
        gsbb: gsbb_entries,
    };

    write_analyze_outputs(&args, &document, &series, &pg, &specs, seed, &digests)?;
    print_summary(&document);
    Ok(())
}

fn write_analyze_outputs(
    args: &AnalyzeArgs,
    document: &ReportDocument,
    series: &TimeSeries,
    pg: &vbpbb::spectral::Periodogram,
    specs: &[ComponentSpec],
    seed: u64,
    digests: &BTreeMap<String, String>,
) -> Result<()> {
    let out = &args.output;
    fs::create_dir_all(out.join("bands"))?;
    fs::create_dir_all(out.join("plots"))?;
    fs::create_dir_all(out.join("components"))?;

    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(document)?,
    )?;
    fs::write(out.join("periodogram.csv"), pg.to_csv())?;
    fs::write(
        out.join("plots").join("series.svg"),
        svg::render_series_svg("input series", series),
    )?;

    if let Some(analysis) = &document.analysis {
        fs::write(out.join("bands.csv"), analysis.bands_csv())?;
        for component in &analysis.components {
            let label = &component.spec.label;
            fs::write(
                out.join("bands").join(format!("vbpbb_{label}.csv")),
                component.band.to_csv(),
            )?;
            let plot = if let Some(baseline) = &component.baseline {
                fs::write(
                    out.join("bands").join(format!("gsbb_{label}.csv")),
                    baseline.band.to_csv(),
                )?;
                svg::render_band_svg(
                    label,
                    &[
                        (&baseline.band, &svg::GSBB_STYLE),
                        (&component.band, &svg::VBPBB_STYLE),
                    ],
                )
            } else {
                svg::render_band_svg(label, &[(&component.band, &svg::VBPBB_STYLE)])
            };
            fs::write(out.join("plots").join(format!("{label}.svg")), plot)?;
        }
        if let Some(combined) = &analysis.combined {
            fs::write(out.join("bands").join("vbpbb_combined.csv"), combined.to_csv())?;
            fs::write(
                out.join("plots").join("combined.svg"),
                svg::render_band_svg("combined significant components", &[(
                    combined,
                    &svg::VBPBB_STYLE,
                )]),
            )?;
        }
    }
    if let Some(entries) = &document.gsbb {
        let mut flat = String::from(
            "method,component,period,phase,date_of_first_occurrence,point,lower,upper\n",
        );
        for entry in entries {
            let band = &entry.outcome.band;
            for phase in 0..band.period {
                flat.push_str(&format!(
                    "gsbb,{},{},{},{},{},{},{}\n",
                    entry.label,
                    band.period,
                    phase,
                    band.date_of_phase(phase),
                    band.point[phase],
                    band.lower[phase],
                    band.upper[phase]
                ));
            }
            fs::write(
                out.join("bands").join(format!("gsbb_{}.csv", entry.label)),
                band.to_csv(),
            )?;
            fs::write(
                out.join("plots").join(format!("{}.svg", entry.label)),
                svg::render_band_svg(&entry.label, &[(band, &svg::GSBB_STYLE)]),
            )?;
        }
        fs::write(out.join("bands.csv"), flat)?;
    }

    // Filtered-component exports (complex baseband + reconstruction).
    if document.analysis.is_some() {
        for spec in specs {
            let filtered = vbpbb::spectral::kzft_apply(series, &spec.filter)?;
            fs::write(
                out.join("components").join(format!("{}_filter.csv", spec.label)),
                filtered.to_csv(),
            )?;
        }
    }

    let mut parameters = BTreeMap::new();
    let mut param = |key: &str, value: serde_json::Value| {
        parameters.insert(key.to_string(), value);
    };
    param("input", args.input.display().to_string().into());
    param("date_col", args.date_col.clone().into());
    param("value_col", args.value_col.clone().into());
    param("date_format", args.date_format.clone().into());
    param(
        "population",
        args.population.clone().map(Into::into).unwrap_or(serde_json::Value::Null),
    );
    param("base_period", args.base_period.into());
    param("harmonics", args.harmonics.into());
    param("method", document.method.into());
    param("replicates", args.replicates.into());
    param(
        "block_length",
        args.block_length.map(Into::into).unwrap_or(serde_json::Value::Null),
    );
    param("paper_exact", args.paper_exact.into());
    param("edge_policy", document.edge_policy.into());
    param("combine_mode", document.combine_mode.into());
    param("output", args.output.display().to_string().into());
    RunManifest::new("analyze", seed, parameters, digests.clone())
        .write(&out.join("manifest.json"))?;
    Ok(())
}

fn print_summary(document: &ReportDocument) {
    if let Some(analysis) = &document.analysis {
        for component in &analysis.components {
            let ratio = component
                .baseline
                .as_ref()
                .map(|b| match b.width_ratio {
                    Some(r) => format!(" width-ratio(gsbb/vbpbb)={r:.3}"),
                    None => " width-ratio(gsbb/vbpbb)=inf".to_string(),
                })
                .unwrap_or_default();
            println!(
                "{}: {} r2={:.4}{}",
                component.spec.label,
                if component.significance.significant {
                    "significant"
                } else {
                    "not significant"
                },
                component.r_squared,
                ratio
            );
        }
        if let Some(aggregate) = analysis.aggregate_r_squared {
            println!("aggregate r2 over significant set: {aggregate:.4}");
        }
    }
    if let Some(entries) = &document.gsbb {
        for entry in entries {
            println!(
                "{} (gsbb): {}",
                entry.label,
                if entry.outcome.significance.significant {
                    "significant"
                } else {
                    "not significant"
                }
            );
        }
    }
}

#[derive(Serialize)]
struct TruthDocument<'a> {
    master_seed: u64,
    n: usize,
    noise_sd: f64,
    noise_kind: NoiseKind,
    components: &'a [vbpbb::series::ComponentTruth],
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let seed = args.seed.unwrap_or_else(|| {
        let drawn: u64 = rand::random();
        println!("seed: {drawn} (drawn; pass --seed {drawn} to reproduce)");
        drawn
    });
    let noise_kind = match args.noise_ar1 {
        Some(coefficient) => NoiseKind::Ar1 { coefficient },
        None => NoiseKind::White,
    };
    let spec = SynthSpec {
        n: args.n as usize,
        components: args.spec.0.clone(),
        noise_sd: args.noise_sd,
        noise_kind,
    };
    let generated = synth_series(&spec, seed)?;

    fs::create_dir_all(&args.output)?;
    let series_csv = generated.series.to_canonical_csv();
    fs::write(args.output.join("series.csv"), &series_csv)?;
    fs::write(
        args.output.join("truth.json"),
        serde_json::to_string_pretty(&TruthDocument {
            master_seed: seed,
            n: spec.n,
            noise_sd: spec.noise_sd,
            noise_kind,
            components: &generated.truth,
        })?,
    )?;

    let mut parameters = BTreeMap::new();
    parameters.insert(
        "spec".to_string(),
        serde_json::Value::String(
            args.spec
                .0
                .iter()
                .map(|c| format!("{}:{}:{}", c.period, c.amplitude, c.phase))
                .collect::<Vec<_>>()
                .join(","),
        ),
    );
    parameters.insert("n".to_string(), args.n.into());
    parameters.insert("noise_sd".to_string(), args.noise_sd.into());
    parameters.insert(
        "noise_ar1".to_string(),
        args.noise_ar1.map(Into::into).unwrap_or(serde_json::Value::Null),
    );
    parameters.insert(
        "output".to_string(),
        args.output.display().to_string().into(),
    );
    let mut digests = BTreeMap::new();
    digests.insert(
        args.output.join("series.csv").display().to_string(),
        manifest::sha256_hex(series_csv.as_bytes()),
    );
    RunManifest::new("synth", seed, parameters, digests)
        .write(&args.output.join("manifest.json"))?;
    println!(
        "wrote {} (n={})",
        args.output.join("series.csv").display(),
        spec.n
    );
    Ok(())
}
