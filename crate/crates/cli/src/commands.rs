use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Subcommand, ValueEnum};
use cityscale_core::geo::{write_assignment_csv, write_layer_geojson};
use cityscale_core::home::write_homes_csv;
use cityscale_core::scaling::{fit_binned, write_binned_csv, write_residuals_csv};
use cityscale_core::synthetic::{city_layer, country_layer, GroundTruth, OriginMode};
use cityscale_core::{
    assign_events, compute_attractiveness, correlate_residuals, fit_power_law, generate_events,
    generate_table, infer_homes, load_layer, log_bin, parse_events, residuals, window_exponents,
    write_events_csv, AttractivenessTable, CountryCode, DatasetTag, EventRecord, HomeTable,
    InputFormat, RegionLayer, ResidualScore, SyntheticSpec, WindowContext,
};
use serde::Serialize;

use crate::config::{EventSource, PipelineConfig};
use crate::error::{ErrorKind, StageContext, StageError, StageResult};
use crate::pipeline::{run_pipeline, CountryLookup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => InputFormat::Csv,
            FormatArg::Jsonl => InputFormat::Jsonl,
        }
    }
}

#[derive(Args, Debug)]
pub struct EventsArg {
    /// Event file (canonical CSV or JSONL)
    pub events: PathBuf,
    /// Input format; guessed from the extension when omitted
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Args, Debug)]
pub struct HomeArgs {
    /// Country layer GeoJSON; region ids must be ISO alpha-2 codes
    #[arg(long)]
    pub countries: PathBuf,
    /// Fewest resolvable events a user needs for an assigned home
    #[arg(long, default_value_t = 1)]
    pub min_events: u64,
}

#[derive(Args, Debug)]
pub struct OutputArg {
    /// Output file; stdout when omitted
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse raw events into the canonical CSV
    Ingest {
        #[command(flatten)]
        input: EventsArg,
        #[command(flatten)]
        out: OutputArg,
        /// Write the ingest report JSON here instead of stderr
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Infer each user's home country
    InferHome {
        #[command(flatten)]
        input: EventsArg,
        #[command(flatten)]
        home: HomeArgs,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Assign events to the regions of a layer
    Assign {
        #[command(flatten)]
        input: EventsArg,
        /// Region layer GeoJSON
        #[arg(long)]
        layer: PathBuf,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Foreign-visitor attractiveness table for one layer
    Attractiveness {
        #[command(flatten)]
        input: EventsArg,
        #[command(flatten)]
        home: HomeArgs,
        #[arg(long)]
        layer: PathBuf,
        #[arg(long, default_value = "ES")]
        target: CountryCode,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Fit the power law to an attractiveness table
    Fit {
        table: PathBuf,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Log-binned trend of an attractiveness table
    Bin {
        table: PathBuf,
        #[arg(long, default_value_t = 5)]
        bins: usize,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Residuals of an attractiveness table against its fit
    Residuals {
        table: PathBuf,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Exponents over moving three-month windows
    Temporal {
        #[command(flatten)]
        input: EventsArg,
        #[command(flatten)]
        home: HomeArgs,
        #[arg(long)]
        layer: PathBuf,
        #[arg(long, default_value = "ES")]
        target: CountryCode,
        /// Also write the JSON summary here
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Pearson correlation of two residual files, matched by region id
    Correlate {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Generate a synthetic world with known scaling
    Synth(SynthArgs),
    /// Run every stage from the config file
    Pipeline,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub regions: usize,
    #[arg(long, default_value_t = 2e4)]
    pub p_min: f64,
    #[arg(long, default_value_t = 5e6)]
    pub p_max: f64,
    #[arg(long, default_value_t = 1.5)]
    pub b: f64,
    /// Per-region log10 noise
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Twelve comma-separated monthly exponents, January first
    #[arg(long, value_delimiter = ',')]
    pub seasonal_b: Option<Vec<f64>>,
    /// Foreign-visitor events inside cities over the year
    #[arg(long, default_value_t = 10_000)]
    pub events: u64,
    #[arg(long, default_value_t = 0.0)]
    pub resident_share: f64,
    /// Visitors' origin is declared on every event instead of inferred
    #[arg(long)]
    pub declared_origin: bool,
    /// Datasets to emit; all share the same city counts
    #[arg(long, value_delimiter = ',', default_value = "photo")]
    pub datasets: Vec<DatasetTag>,
    #[arg(long, default_value_t = 2012)]
    pub year: i32,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Globals<'a> {
    pub config: Option<&'a Path>,
    pub strict: bool,
    pub seed: Option<u64>,
}

fn open(path: &Path) -> StageResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| StageError::input("open", anyhow!("{}: {e}", path.display())))
}

fn emit(out: &OutputArg, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> StageResult<()> {
    let result = match &out.output {
        Some(p) => File::create(p)
            .map_err(anyhow::Error::from)
            .and_then(|file| {
                let mut w = BufWriter::new(file);
                f(&mut w)?;
                w.flush()?;
                Ok(())
            }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    };
    result.stage(ErrorKind::Output, "write")
}

fn json_to(w: &mut dyn Write, value: &impl Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load_events(arg: &EventsArg, strict: bool) -> StageResult<Vec<EventRecord>> {
    let format = arg.format.map(InputFormat::from).unwrap_or_else(|| guess_format(&arg.events));
    let (events, report) = parse_events(open(&arg.events)?, format, strict)
        .map_err(|e| StageError::input("ingest", anyhow!("{}: {e}", arg.events.display())))?;
    if report.rejected > 0 {
        eprintln!("skipped {} malformed rows of {}", report.rejected, report.total());
    }
    Ok(events)
}

fn guess_format(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "ndjson") => InputFormat::Jsonl,
        _ => InputFormat::Csv,
    }
}

fn load_region_layer(path: &Path, stage: &str) -> StageResult<RegionLayer> {
    load_layer(open(path)?).map_err(|e| StageError::input(stage, anyhow!("{}: {e}", path.display())))
}

fn homes(events: &[EventRecord], args: &HomeArgs) -> StageResult<HomeTable> {
    let countries = CountryLookup::new(load_region_layer(&args.countries, "load-countries")?)
        .stage(ErrorKind::Input, "load-countries")?;
    Ok(infer_homes(events, |lat, lon| countries.country_of(lat, lon), args.min_events))
}

fn read_table(path: &Path) -> StageResult<AttractivenessTable> {
    AttractivenessTable::read_csv(open(path)?)
        .map_err(|e| StageError::input("read-table", anyhow!("{}: {e}", path.display())))
}

fn read_residuals(path: &Path) -> StageResult<Vec<ResidualScore>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut scores = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let bad = |m: &str| StageError::input("read-residuals", anyhow!("{} row {}: {m}", path.display(), i + 1));
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        let res = rec
            .get(1)
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad("bad res"))?;
        scores.push(ResidualScore { region_id: rec.get(0).unwrap_or_default().to_owned(), res });
    }
    Ok(scores)
}

#[derive(Serialize)]
struct CorrelationOut {
    #[serde(serialize_with = "cityscale_core::format::ser_sig")]
    r: f64,
    n: usize,
    only_in_a: usize,
    only_in_b: usize,
}

pub fn run(command: Command, globals: Globals<'_>) -> StageResult<()> {
    match command {
        Command::Ingest { input, out, report } => {
            let format = input.format.map(InputFormat::from).unwrap_or_else(|| guess_format(&input.events));
            let (events, rep) = parse_events(open(&input.events)?, format, globals.strict)
                .map_err(|e| StageError::input("ingest", anyhow!("{}: {e}", input.events.display())))?;
            emit(&out, |w| Ok(write_events_csv(&events, w)?))?;
            let text = serde_json::to_string_pretty(&rep).stage(ErrorKind::Output, "report")?;
            match report {
                Some(p) => std::fs::write(p, text + "\n").stage(ErrorKind::Output, "report")?,
                None => eprintln!("{text}"),
            }
        }
        Command::InferHome { input, home, out } => {
            let events = load_events(&input, globals.strict)?;
            let table = homes(&events, &home)?;
            emit(&out, |w| Ok(write_homes_csv(&table, w)?))?;
        }
        Command::Assign { input, layer, out } => {
            let events = load_events(&input, globals.strict)?;
            let layer = load_region_layer(&layer, "load-layer")?;
            let assignment = assign_events(&events, &layer);
            if assignment.overlaps > 0 {
                eprintln!("{} events fell in overlapping regions; first region kept", assignment.overlaps);
            }
            emit(&out, |w| Ok(write_assignment_csv(&assignment, &layer, w)?))?;
        }
        Command::Attractiveness { input, home, layer, target, out } => {
            let events = load_events(&input, globals.strict)?;
            let layer = load_region_layer(&layer, "load-layer")?;
            let origins = homes(&events, &home)?.event_origins(&events);
            let table = compute_attractiveness(&events, &assign_events(&events, &layer), &origins, target, &layer)
                .stage(ErrorKind::Analysis, "attractiveness")?;
            emit(&out, |w| Ok(table.write_csv(w)?))?;
        }
        Command::Fit { table, out } => {
            let table = read_table(&table)?;
            let fit = fit_power_law(&table).stage(ErrorKind::Analysis, "fit")?;
            emit(&out, |w| json_to(w, &fit))?;
        }
        Command::Bin { table, bins, out } => {
            let table = read_table(&table)?;
            let trend = log_bin(&table, bins).stage(ErrorKind::Analysis, "bin")?;
            if let Ok(fit) = fit_binned(&trend) {
                eprintln!("binned fit: b = {}, r2 = {}", fit.b, fit.r2);
            }
            emit(&out, |w| Ok(write_binned_csv(&trend, w)?))?;
        }
        Command::Residuals { table, out } => {
            let table = read_table(&table)?;
            let fit = fit_power_law(&table).stage(ErrorKind::Analysis, "fit")?;
            let res = residuals(&table, &fit);
            emit(&out, |w| Ok(write_residuals_csv(&res, w)?))?;
        }
        Command::Temporal { input, home, layer, target, json, out } => {
            let events = load_events(&input, globals.strict)?;
            let layer = load_region_layer(&layer, "load-layer")?;
            let origins = homes(&events, &home)?.event_origins(&events);
            let assignment = assign_events(&events, &layer);
            let windows = window_exponents(WindowContext {
                events: &events,
                assignment: &assignment,
                origins: &origins,
                layer: &layer,
                target,
            });
            emit(&out, |w| Ok(windows.write_csv(w)?))?;
            if let Some(p) = json {
                let text = serde_json::to_string_pretty(&windows).stage(ErrorKind::Output, "temporal")?;
                std::fs::write(p, text + "\n").stage(ErrorKind::Output, "temporal")?;
            }
        }
        Command::Correlate { a, b, out } => {
            let c = correlate_residuals(&read_residuals(&a)?, &read_residuals(&b)?)
                .stage(ErrorKind::Analysis, "correlate")?;
            emit(&out, |w| {
                json_to(w, &CorrelationOut { r: c.r, n: c.n, only_in_a: c.only_in_a, only_in_b: c.only_in_b })
            })?;
        }
        Command::Synth(args) => synth(args, globals)?,
        Command::Pipeline => {
            let path = globals
                .config
                .ok_or_else(|| StageError::input("config", anyhow!("pipeline needs --config PATH")))?;
            let config = PipelineConfig::load(path).stage(ErrorKind::Input, "config")?;
            let summary = run_pipeline(&config, globals.strict)?;
            for f in &summary.fits {
                println!("{}\t{}\tb={}\tr2={}\tn={}", f.dataset, f.layer, f.b, f.r2, f.n);
            }
            println!("wrote {} files to {}", summary.outputs, config.output_dir.display());
        }
    }
    Ok(())
}

fn synth_spec(args: &SynthArgs, globals: Globals<'_>) -> StageResult<SyntheticSpec> {
    let mut spec = match globals.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| StageError::input("config", anyhow!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).stage(ErrorKind::Input, "config")?
        }
        None => {
            let mut spec = SyntheticSpec::new(args.regions, args.p_min, args.p_max, args.b, 0);
            spec.noise_sigma = args.sigma;
            spec.seasonal_b = args.seasonal_b.clone();
            spec.events_per_unit = args.events;
            spec.resident_share = args.resident_share;
            if args.declared_origin {
                spec.origin_mode = OriginMode::Declared;
            }
            spec
        }
    };
    if let Some(seed) = globals.seed {
        spec.seed = seed;
    }
    spec.validate().stage(ErrorKind::Input, "synth")?;
    Ok(spec)
}

/// Writes a synthetic world and a pipeline config that analyses it:
/// `table.csv`, `events_<dataset>.csv`, `countries.geojson`,
/// `cities.geojson`, `truth.json` and `pipeline.json`.
fn synth(args: SynthArgs, globals: Globals<'_>) -> StageResult<()> {
    let spec = synth_spec(&args, globals)?;
    let dir = &args.output_dir;
    std::fs::create_dir_all(dir).stage(ErrorKind::Output, "synth")?;
    let write = |name: &str, f: &mut dyn FnMut(&mut Vec<u8>) -> anyhow::Result<()>| -> StageResult<()> {
        let mut buf = Vec::new();
        f(&mut buf).stage(ErrorKind::Output, "synth")?;
        std::fs::write(dir.join(name), buf).stage(ErrorKind::Output, "synth")
    };

    let generated = generate_table(&spec).stage(ErrorKind::Input, "synth")?;
    let cities = city_layer(&generated.table).stage(ErrorKind::Input, "synth")?;
    let countries = country_layer();
    let mut datasets = args.datasets.clone();
    datasets.sort();
    datasets.dedup();

    let mut truth_events = None;
    for tag in &datasets {
        let ds_spec = SyntheticSpec { dataset_tag: Some(*tag), ..spec.clone() };
        let out = generate_events(&ds_spec, &cities, args.year).stage(ErrorKind::Analysis, "synth")?;
        write(&format!("events_{tag}.csv"), &mut |b| Ok(write_events_csv(&out.events, b)?))?;
        truth_events.get_or_insert(out.truth);
    }
    write("table.csv", &mut |b| Ok(generated.table.write_csv(b)?))?;
    write("countries.geojson", &mut |b| Ok(write_layer_geojson(&countries, b)?))?;
    write("cities.geojson", &mut |b| Ok(write_layer_geojson(&cities, b)?))?;
    let truth = GroundTruth {
        spec: &spec,
        target_country: cityscale_core::synthetic::TARGET_COUNTRY,
        table_regions: &generated.regions,
        events: truth_events.as_ref(),
    };
    write("truth.json", &mut |b| {
        serde_json::to_writer_pretty(&mut *b, &truth)?;
        b.push(b'\n');
        Ok(())
    })?;
    let config = PipelineConfig {
        event_sources: datasets
            .iter()
            .map(|tag| EventSource {
                path: format!("events_{tag}.csv").into(),
                format: InputFormat::Csv,
                dataset_tag: *tag,
            })
            .collect(),
        country_layer_path: "countries.geojson".into(),
        city_layer_paths: vec!["cities.geojson".into()],
        target_country: cityscale_core::synthetic::TARGET_COUNTRY,
        min_events: 1,
        bins: 5,
        output_dir: "results".into(),
    };
    write("pipeline.json", &mut |b| {
        serde_json::to_writer_pretty(&mut *b, &config)?;
        b.push(b'\n');
        Ok(())
    })?;
    Ok(())
}
