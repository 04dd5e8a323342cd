//! End-to-end run: ingest, home inference, per-layer scaling analysis,
//! seasonal windows and cross-dataset residual correlations.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! manifest.json
//! correlations.csv
//! <dataset>/ingest.json
//! <dataset>/homes.csv
//! <dataset>/<layer>/attractiveness.csv
//! <dataset>/<layer>/fit.json
//! <dataset>/<layer>/binned.csv
//! <dataset>/<layer>/residuals.csv
//! <dataset>/<layer>/scatter.csv
//! <dataset>/<layer>/temporal.csv
//! <dataset>/<layer>/temporal.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use chrono::{SecondsFormat, Utc};
use cityscale_core::format::fmt_sig;
use cityscale_core::home::write_homes_csv;
use cityscale_core::scaling::{fit_binned, write_binned_csv, write_residuals_csv, CorrelationMatrix};
use cityscale_core::{
    assign_events, compute_attractiveness, correlate_residuals, fit_power_law, infer_homes,
    load_layer, log_bin, parse_events, residuals, window_exponents, AttractivenessTable,
    BinnedTrend, CountryCode, DatasetTag, EventRecord, IngestReport, RegionLayer, ResidualScore,
    ScalingFit, WindowContext, WindowedExponents,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{ErrorKind, StageContext, StageError, StageResult};

pub const MANIFEST: &str = "manifest.json";
pub const CORRELATIONS: &str = "correlations.csv";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output files collected in a sibling staging directory and moved into
/// place only once every stage has succeeded. Dropping an uncommitted
/// staging area deletes it.
pub struct Staging {
    dir: PathBuf,
    files: BTreeMap<PathBuf, String>,
    committed: bool,
}

impl Staging {
    pub fn create(output_dir: &Path) -> StageResult<Staging> {
        let name = output_dir
            .file_name()
            .ok_or_else(|| StageError::input("config", anyhow!("output_dir has no final component")))?;
        let parent = output_dir.parent().unwrap_or(Path::new("."));
        let parent = if parent.as_os_str().is_empty() { Path::new(".") } else { parent };
        fs::create_dir_all(parent).stage(ErrorKind::Output, "staging")?;
        let dir = parent.join(format!(".{}.staging-{}", name.to_string_lossy(), std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).stage(ErrorKind::Output, "staging")?;
        }
        fs::create_dir_all(&dir).stage(ErrorKind::Output, "staging")?;
        Ok(Staging { dir, files: BTreeMap::new(), committed: false })
    }

    pub fn put(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) -> StageResult<()> {
        let rel = rel.into();
        let path = self.dir.join(&rel);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p).stage(ErrorKind::Output, "write")?;
        }
        fs::write(&path, &bytes)
            .map_err(|e| StageError::output("write", anyhow!("{}: {e}", rel.display())))?;
        self.files.insert(rel, sha256_hex(&bytes));
        Ok(())
    }

    /// Write through a closure producing the file contents.
    pub fn put_with<E: Into<anyhow::Error>>(
        &mut self,
        rel: impl Into<PathBuf>,
        f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
    ) -> StageResult<()> {
        let mut buf = Vec::new();
        f(&mut buf).stage(ErrorKind::Output, "serialize")?;
        self.put(rel, buf)
    }

    pub fn put_json<T: Serialize>(&mut self, rel: impl Into<PathBuf>, value: &T) -> StageResult<()> {
        self.put_with(rel, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok::<_, serde_json::Error>(())
        })
    }

    /// Relative path and sha256 of every staged file.
    pub fn digests(&self) -> &BTreeMap<PathBuf, String> {
        &self.files
    }

    pub fn commit(mut self, output_dir: &Path) -> StageResult<()> {
        for rel in self.files.keys() {
            let dest = output_dir.join(rel);
            if let Some(p) = dest.parent() {
                fs::create_dir_all(p).stage(ErrorKind::Output, "commit")?;
            }
            fs::rename(self.dir.join(rel), &dest).stage(ErrorKind::Output, "commit")?;
        }
        self.committed = true;
        fs::remove_dir_all(&self.dir).stage(ErrorKind::Output, "commit")?;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Country layer whose region ids are ISO codes, with a point lookup.
pub struct CountryLookup {
    pub layer: RegionLayer,
    codes: Vec<CountryCode>,
}

impl CountryLookup {
    pub fn new(layer: RegionLayer) -> anyhow::Result<Self> {
        let codes = layer
            .regions
            .iter()
            .map(|r| {
                r.id.parse()
                    .map_err(|_| anyhow!("country region id {:?} is not an ISO alpha-2 code", r.id))
            })
            .collect::<anyhow::Result<_>>()?;
        Ok(CountryLookup { layer, codes })
    }

    pub fn country_of(&self, lat: f64, lon: f64) -> Option<CountryCode> {
        self.layer.locate(lat, lon).0.map(|i| self.codes[i])
    }
}

/// Directory-safe version of a layer label.
pub fn dir_name(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() { "layer".into() } else { s }
}

#[derive(Serialize)]
struct FitRecord<'a> {
    dataset: &'a str,
    layer: &'a str,
    #[serde(flatten)]
    fit: &'a ScalingFit,
    total_events: u64,
    regions: usize,
    excluded_regions: &'a [String],
    binned: Option<&'a ScalingFit>,
}

#[derive(Serialize)]
struct TemporalRecord<'a> {
    dataset: &'a str,
    layer: &'a str,
    #[serde(flatten)]
    windows: &'a WindowedExponents,
}

/// Scatter plot data: every fitted region, then every bin, with the
/// fitted line evaluated at each abscissa.
pub fn write_scatter_csv<W: Write>(
    table: &AttractivenessTable,
    fit: &ScalingFit,
    trend: &BinnedTrend,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "id", "log10_p", "log10_A", "fit_log10_A"])?;
    for r in table.positive_rows() {
        let lp = r.population.log10();
        w.write_record([
            "region",
            &r.region_id,
            &fmt_sig(lp),
            &fmt_sig(r.share.log10()),
            &fmt_sig(fit.predict_log10(r.population)),
        ])?;
    }
    for (i, b) in trend.bins.iter().enumerate() {
        w.write_record([
            "bin",
            &format!("bin{}", i + 1),
            &fmt_sig(b.p_center.log10()),
            &fmt_sig(b.mean_a.log10()),
            &fmt_sig(fit.predict_log10(b.p_center)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub dataset: String,
    pub layer: String,
    pub b: f64,
    pub r2: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub fits: Vec<FitSummary>,
    pub outputs: usize,
}

struct Dataset {
    tag: DatasetTag,
    events: Vec<EventRecord>,
    report: IngestReport,
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    started_at: String,
    finished_at: String,
    config: &'a PipelineConfig,
    inputs: Vec<InputDigest>,
    outputs: BTreeMap<String, String>,
}

fn read_inputs(config: &PipelineConfig) -> StageResult<BTreeMap<PathBuf, Vec<u8>>> {
    let unique: BTreeSet<&Path> = config.inputs().into_iter().collect();
    for p in &unique {
        if !p.is_file() {
            return Err(StageError::input("inputs", anyhow!("missing input file {}", p.display())));
        }
    }
    unique
        .into_iter()
        .map(|p| {
            fs::read(p)
                .map(|b| (p.to_path_buf(), b))
                .map_err(|e| StageError::input("inputs", anyhow!("{}: {e}", p.display())))
        })
        .collect()
}

/// Run every stage. Nothing is written under `output_dir` unless all
/// stages succeed.
pub fn run_pipeline(config: &PipelineConfig, strict: bool) -> StageResult<RunSummary> {
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    let inputs = read_inputs(config)?;

    let countries = load_layer(inputs[&config.country_layer_path].as_slice())
        .map_err(|e| StageError::input("load-countries", anyhow!("{}: {e}", config.country_layer_path.display())))
        .and_then(|l| CountryLookup::new(l).stage(ErrorKind::Input, "load-countries"))?;
    let mut layers = Vec::new();
    let mut seen = BTreeSet::new();
    for path in &config.city_layer_paths {
        let layer = load_layer(inputs[path].as_slice())
            .map_err(|e| StageError::input("load-layers", anyhow!("{}: {e}", path.display())))?;
        let dir = dir_name(&layer.label);
        if !seen.insert(dir.clone()) {
            return Err(StageError::input("load-layers", anyhow!("duplicate layer label {:?}", layer.label)));
        }
        layers.push((dir, layer));
    }

    let mut datasets: BTreeMap<DatasetTag, Dataset> = BTreeMap::new();
    for source in &config.event_sources {
        let (events, report) = parse_events(inputs[&source.path].as_slice(), source.format, strict)
            .map_err(|e| StageError::input("ingest", anyhow!("{}: {e}", source.path.display())))?;
        let d = datasets.entry(source.dataset_tag).or_insert_with(|| Dataset {
            tag: source.dataset_tag,
            events: Vec::new(),
            report: IngestReport::default(),
        });
        d.events.extend(events);
        d.report.accepted += report.accepted;
        d.report.rejected += report.rejected;
        for (k, v) in report.rejection_reasons {
            *d.report.rejection_reasons.entry(k).or_default() += v;
        }
    }

    let mut staging = Staging::create(&config.output_dir)?;
    let mut summary = RunSummary::default();
    // residual lists per (layer, dataset) for the correlation matrix
    let mut res_by_layer: BTreeMap<usize, BTreeMap<DatasetTag, Vec<ResidualScore>>> = BTreeMap::new();

    for d in datasets.values() {
        let tag = d.tag.as_str();
        let base = PathBuf::from(tag);
        staging.put_json(base.join("ingest.json"), &d.report)?;

        let homes = infer_homes(&d.events, |lat, lon| countries.country_of(lat, lon), config.min_events);
        staging.put_with(base.join("homes.csv"), |buf| write_homes_csv(&homes, buf))?;
        let origins = homes.event_origins(&d.events);

        for (li, (dir, layer)) in layers.iter().enumerate() {
            let stage = |s: &str| format!("{s} {tag}/{}", layer.label);
            let out = base.join(dir);
            let assignment = assign_events(&d.events, layer);
            let mut table = compute_attractiveness(&d.events, &assignment, &origins, config.target_country, layer)
                .stage(ErrorKind::Analysis, &stage("attractiveness"))?;
            table.dataset = tag.to_owned();
            staging.put_with(out.join("attractiveness.csv"), |buf| table.write_csv(buf))?;

            let fit = fit_power_law(&table).stage(ErrorKind::Analysis, &stage("fit"))?;
            let trend = log_bin(&table, config.bins).stage(ErrorKind::Analysis, &stage("bin"))?;
            let binned = fit_binned(&trend).ok();
            staging.put_json(
                out.join("fit.json"),
                &FitRecord {
                    dataset: tag,
                    layer: &layer.label,
                    fit: &fit,
                    total_events: table.total_events,
                    regions: table.rows.len(),
                    excluded_regions: &table.excluded_regions,
                    binned: binned.as_ref(),
                },
            )?;
            staging.put_with(out.join("binned.csv"), |buf| write_binned_csv(&trend, buf))?;

            let res = residuals(&table, &fit);
            staging.put_with(out.join("residuals.csv"), |buf| write_residuals_csv(&res, buf))?;
            staging.put_with(out.join("scatter.csv"), |buf| write_scatter_csv(&table, &fit, &trend, buf))?;

            let windows = window_exponents(WindowContext {
                events: &d.events,
                assignment: &assignment,
                origins: &origins,
                layer,
                target: config.target_country,
            });
            staging.put_with(out.join("temporal.csv"), |buf| windows.write_csv(buf))?;
            staging.put_json(
                out.join("temporal.json"),
                &TemporalRecord { dataset: tag, layer: &layer.label, windows: &windows },
            )?;

            res_by_layer.entry(li).or_default().insert(d.tag, res);
            summary.fits.push(FitSummary {
                dataset: tag.to_owned(),
                layer: layer.label.clone(),
                b: fit.b,
                r2: fit.r2,
                n: fit.n,
            });
        }
    }

    let tags: Vec<DatasetTag> = datasets.keys().copied().collect();
    let mut matrix = CorrelationMatrix::default();
    let mut pairs = Vec::new();
    for (i, a) in tags.iter().enumerate() {
        for b in &tags[i + 1..] {
            pairs.push((*a, *b));
            matrix.pairs.push(format!("{a}/{b}"));
        }
    }
    for (li, (_, layer)) in layers.iter().enumerate() {
        let res = &res_by_layer[&li];
        let cells = pairs
            .iter()
            .map(|(a, b)| correlate_residuals(&res[a], &res[b]).ok().map(|c| c.r))
            .collect();
        matrix.rows.push((layer.label.clone(), cells));
    }
    staging.put_with(CORRELATIONS, |buf| matrix.write_csv(buf))?;

    let manifest = Manifest {
        tool: "cityscale",
        version: env!("CARGO_PKG_VERSION"),
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        config,
        inputs: inputs
            .iter()
            .map(|(p, b)| InputDigest { path: p.display().to_string(), bytes: b.len(), sha256: sha256_hex(b) })
            .collect(),
        outputs: staging
            .digests()
            .iter()
            .map(|(p, d)| (p.display().to_string(), d.clone()))
            .collect(),
    };
    staging.put_json(MANIFEST, &manifest)?;
    summary.outputs = staging.digests().len();
    staging.commit(&config.output_dir)?;
    Ok(summary)
}
