//! City attractiveness tables and the power-law scaling analysis built on
//! them: log-log OLS fit, log-binned trend, residual scores and residual
//! correlations across datasets.

mod bins;
mod fit;
mod residuals;

use std::io::{Read, Write};

use crate::event::{CountryCode, EventRecord};
use crate::format::fmt_sig;
use crate::geo::{Assignment, RegionLayer};
use crate::home::Residence;

pub use bins::{fit_binned, log_bin, write_binned_csv, Bin, BinnedTrend, DEFAULT_BINS};
pub use fit::{fit_power_law, ols, LinearFit, ScalingFit};
pub use residuals::{
    correlate_residuals, pearson, residuals, write_residuals_csv, CorrelationMatrix,
    ResidualCorrelation, ResidualScore,
};

#[derive(Debug, thiserror::Error)]
pub enum ScalingError {
    #[error("no foreign-visitor events fall in any populated region")]
    EmptyTable,
    #[error("need at least 3 rows with positive attractiveness, have {0}")]
    InsufficientData(usize),
    #[error("all populations are identical; slope is undefined")]
    DegenerateAbscissa,
    #[error("bin count must be at least 1")]
    InvalidBinCount,
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: zero variance or fewer than 2 values")]
    UndefinedCorrelation,
    #[error("residual lists share only {0} region(s); need at least 2")]
    SmallIntersection(usize),
    #[error("table row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractivenessRow {
    pub region_id: String,
    /// Persons, at least 1.
    pub population: f64,
    /// Unnormalized activity: the foreign-visitor event count for observed
    /// data.
    pub raw: f64,
    /// Share of `raw` over all rows.
    pub share: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttractivenessTable {
    pub dataset: String,
    pub layer: String,
    pub rows: Vec<AttractivenessRow>,
    pub total_events: u64,
    /// Regions left out for lack of a population figure.
    pub excluded_regions: Vec<String>,
}

impl AttractivenessTable {
    /// Build a table from `(region_id, population, raw)` triples,
    /// normalizing `raw` into shares.
    pub fn from_raw(
        dataset: impl Into<String>,
        layer: impl Into<String>,
        rows: impl IntoIterator<Item = (String, f64, f64)>,
    ) -> Result<Self, ScalingError> {
        let rows: Vec<(String, f64, f64)> = rows.into_iter().collect();
        let total: f64 = rows.iter().map(|r| r.2).sum();
        if total <= 0.0 {
            return Err(ScalingError::EmptyTable);
        }
        Ok(AttractivenessTable {
            dataset: dataset.into(),
            layer: layer.into(),
            rows: rows
                .into_iter()
                .map(|(region_id, population, raw)| AttractivenessRow {
                    region_id,
                    population,
                    raw,
                    share: raw / total,
                })
                .collect(),
            total_events: 0,
            excluded_regions: Vec::new(),
        })
    }

    /// Rows with positive share, the ones a log-log fit can use.
    pub fn positive_rows(&self) -> impl Iterator<Item = &AttractivenessRow> {
        self.rows.iter().filter(|r| r.share > 0.0)
    }

    /// Same table with every share multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        for r in &mut t.rows {
            r.share *= factor;
        }
        t
    }

    /// CSV `region_id,population,raw,attractiveness`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ScalingError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["region_id", "population", "raw", "attractiveness"])?;
        for r in &self.rows {
            w.write_record([
                r.region_id.clone(),
                fmt_sig(r.population),
                fmt_sig(r.raw),
                fmt_sig(r.share),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the layout written by [`write_csv`](Self::write_csv). Shares
    /// are taken as written.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, ScalingError> {
        let mut reader = csv::Reader::from_reader(source);
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let num = |idx: usize, name: &str| -> Result<f64, ScalingError> {
                rec.get(idx)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ScalingError::BadRow { row, message: format!("bad {name}") })
            };
            let population = num(1, "population")?;
            if population < 1.0 {
                return Err(ScalingError::BadRow { row, message: "population below 1".into() });
            }
            let share = num(3, "attractiveness")?;
            if share < 0.0 {
                return Err(ScalingError::BadRow { row, message: "negative attractiveness".into() });
            }
            rows.push(AttractivenessRow {
                region_id: rec.get(0).unwrap_or_default().to_owned(),
                population,
                raw: num(2, "raw")?,
                share,
            });
        }
        Ok(AttractivenessTable { rows, ..Default::default() })
    }
}

/// Attractiveness of every populated region: its share of the events made
/// by foreign visitors, i.e. events whose origin is a known country other
/// than `target`.
///
/// `origins` gives the resolved origin of each event, aligned with `events`.
pub fn compute_attractiveness(
    events: &[EventRecord],
    assignment: &Assignment,
    origins: &[Residence],
    target: CountryCode,
    layer: &RegionLayer,
) -> Result<AttractivenessTable, ScalingError> {
    compute_attractiveness_where(events, assignment, origins, target, layer, |_| true)
}

/// As [`compute_attractiveness`], counting only events whose index passes
/// `keep`.
pub fn compute_attractiveness_where<F>(
    events: &[EventRecord],
    assignment: &Assignment,
    origins: &[Residence],
    target: CountryCode,
    layer: &RegionLayer,
    keep: F,
) -> Result<AttractivenessTable, ScalingError>
where
    F: Fn(usize) -> bool,
{
    assert_eq!(events.len(), assignment.region_of.len(), "assignment not aligned with events");
    assert_eq!(events.len(), origins.len(), "origins not aligned with events");

    let mut counts = vec![0u64; layer.regions.len()];
    for (i, (region, origin)) in assignment.region_of.iter().zip(origins).enumerate() {
        let foreign = matches!(origin, Residence::Country(c) if *c != target);
        if let (true, Some(idx)) = (foreign, region) {
            if keep(i) {
                counts[*idx] += 1;
            }
        }
    }

    let mut rows = Vec::new();
    let mut excluded_regions = Vec::new();
    let mut total = 0u64;
    for (region, &count) in layer.regions.iter().zip(&counts) {
        match region.population {
            Some(p) => {
                total += count;
                rows.push((region.id.clone(), p as f64, count));
            }
            None => excluded_regions.push(region.id.clone()),
        }
    }
    if total == 0 {
        return Err(ScalingError::EmptyTable);
    }
    let dataset = events.first().map(|e| e.dataset_tag.to_string()).unwrap_or_default();
    Ok(AttractivenessTable {
        dataset,
        layer: layer.label.clone(),
        rows: rows
            .into_iter()
            .map(|(region_id, population, count)| AttractivenessRow {
                region_id,
                population,
                raw: count as f64,
                share: count as f64 / total as f64,
            })
            .collect(),
        total_events: total,
        excluded_regions,
    })
}
