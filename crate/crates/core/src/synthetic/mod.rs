//! Synthetic cities and event streams with a known scaling exponent.
//!
//! Everything is a deterministic function of [`SyntheticSpec::seed`]: each
//! region draws from its own substream of a [`CounterRng`], so generation
//! can run per region in parallel without changing the output.

mod rng;

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use rng::CounterRng;

use crate::event::{CountryCode, DatasetTag, EventRecord};
use crate::geo::{Region, RegionLayer};
use crate::scaling::AttractivenessTable;

/// Country every synthetic city lies in.
pub const TARGET_COUNTRY: CountryCode = match CountryCode::from_bytes(*b"ES") {
    Some(c) => c,
    None => unreachable!(),
};

/// Home countries of synthetic foreign visitors and their rectangles
/// `(lat0, lon0, lat1, lon1)`.
const FOREIGN: [([u8; 2], [f64; 4]); 6] = [
    (*b"DE", [48.0, 7.5, 54.0, 14.0]),
    (*b"FR", [43.5, 0.0, 47.0, 6.0]),
    (*b"GB", [50.0, -5.0, 58.0, 1.0]),
    (*b"IT", [38.0, 9.0, 45.0, 18.0]),
    (*b"NL", [51.0, 3.5, 53.5, 7.0]),
    (*b"US", [30.0, -120.0, 45.0, -75.0]),
];
const TARGET_RECT: [f64; 4] = [35.5, -9.5, 43.0, 4.0];

const CITY_ORIGIN: (f64, f64) = (36.5, -7.5);
const CITY_SIDE: f64 = 0.1;
const CITY_PITCH: f64 = 0.25;
const CITY_COLUMNS: usize = 16;

// Substream indices below a region's stream.
const STREAM_REGION: u64 = 0;
const STREAM_RESIDENTS: u64 = 100;
const STREAM_TIES: u64 = 101;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// How foreign visitors reveal their origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OriginMode {
    /// Visitors also post from home, so home inference recovers the origin.
    #[default]
    Inferred,
    /// Every event carries the origin country, as card transactions do.
    Declared,
}

fn default_events() -> u64 {
    10_000
}
fn default_visits() -> u64 {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_regions: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub b_true: f64,
    /// Standard deviation of the per-region log10 noise.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Per-month exponents, January first. Overrides `b_true` for events.
    #[serde(default)]
    pub seasonal_b: Option<Vec<f64>>,
    /// Foreign-visitor events emitted inside cities per unit of total
    /// attractiveness share, i.e. the annual foreign event total.
    #[serde(default = "default_events")]
    pub events_per_unit: u64,
    /// Fraction of in-city events made by residents of the target country.
    #[serde(default)]
    pub resident_share: f64,
    #[serde(default)]
    pub origin_mode: OriginMode,
    /// Maximum in-city events per synthetic user.
    #[serde(default = "default_visits")]
    pub visits_per_user: u64,
    #[serde(default)]
    pub dataset_tag: Option<DatasetTag>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_regions: usize, p_min: f64, p_max: f64, b_true: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_regions,
            p_min,
            p_max,
            b_true,
            noise_sigma: 0.0,
            seasonal_b: None,
            events_per_unit: default_events(),
            resident_share: 0.0,
            origin_mode: OriginMode::default(),
            visits_per_user: default_visits(),
            dataset_tag: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::InvalidSpec(m.into()));
        if self.n_regions < 3 {
            return fail("n_regions must be at least 3");
        }
        if !(self.p_min >= 1.0 && self.p_min < self.p_max && self.p_max.is_finite()) {
            return fail("need 1 <= p_min < p_max");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail("noise_sigma must be finite and non-negative");
        }
        if !self.b_true.is_finite() {
            return fail("b_true must be finite");
        }
        if let Some(s) = &self.seasonal_b {
            if s.len() != 12 || s.iter().any(|b| !b.is_finite()) {
                return fail("seasonal_b needs 12 finite exponents");
            }
        }
        if !(0.0..1.0).contains(&self.resident_share) {
            return fail("resident_share must be in [0, 1)");
        }
        if self.visits_per_user == 0 {
            return fail("visits_per_user must be positive");
        }
        Ok(())
    }

    fn month_exponent(&self, month0: usize) -> f64 {
        self.seasonal_b.as_ref().map_or(self.b_true, |s| s[month0])
    }

    fn tag(&self) -> DatasetTag {
        self.dataset_tag.unwrap_or(DatasetTag::Photo)
    }
}

pub fn region_id(i: usize) -> String {
    format!("S{i:03}")
}

/// Population and log10 noise of region `i`: the first three draws of its
/// substream (one uniform, then one Box-Muller pair).
fn region_draws(spec: &SyntheticSpec, i: usize) -> (u64, f64) {
    let mut rng = CounterRng::new(spec.seed).substream(i as u64).substream(STREAM_REGION);
    let (lo, hi) = (spec.p_min.log10(), spec.p_max.log10());
    let population = 10f64.powf(lo + rng.next_f64() * (hi - lo)).round().max(1.0) as u64;
    let noise = spec.noise_sigma * rng.normal();
    (population, noise)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionTruth {
    pub region_id: String,
    pub population: u64,
    pub log10_noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTable {
    pub table: AttractivenessTable,
    pub regions: Vec<RegionTruth>,
}

/// Attractiveness `p^b * 10^noise` for log-uniform populations, normalized
/// to shares.
pub fn generate_table(spec: &SyntheticSpec) -> Result<SyntheticTable, SynthError> {
    spec.validate()?;
    let regions: Vec<RegionTruth> = (0..spec.n_regions)
        .into_par_iter()
        .map(|i| {
            let (population, log10_noise) = region_draws(spec, i);
            RegionTruth { region_id: region_id(i), population, log10_noise }
        })
        .collect();
    let table = AttractivenessTable::from_raw(
        spec.tag().to_string(),
        "synthetic",
        regions.iter().map(|r| {
            let p = r.population as f64;
            (r.region_id.clone(), p, p.powf(spec.b_true) * 10f64.powf(r.log10_noise))
        }),
    )
    .expect("positive attractiveness");
    Ok(SyntheticTable { table, regions })
}

/// Most cities the grid fits inside the target country.
pub const MAX_CITIES: usize = 26 * CITY_COLUMNS;

/// Square city regions on a grid inside the target country, one per table
/// row, carrying the row populations.
pub fn city_layer(table: &AttractivenessTable) -> Result<RegionLayer, SynthError> {
    if table.rows.len() > MAX_CITIES {
        return Err(SynthError::InvalidSpec(format!("at most {MAX_CITIES} cities fit the grid")));
    }
    let regions = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let (r, c) = (i / CITY_COLUMNS, i % CITY_COLUMNS);
            let lat0 = CITY_ORIGIN.0 + r as f64 * CITY_PITCH;
            let lon0 = CITY_ORIGIN.1 + c as f64 * CITY_PITCH;
            Region::rectangle(
                row.region_id.clone(),
                "synthetic",
                Some(row.population.round().max(1.0) as u64),
                (lat0, lon0),
                (lat0 + CITY_SIDE, lon0 + CITY_SIDE),
            )
        })
        .collect();
    RegionLayer::new("synthetic", regions)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))
}

/// Rectangular countries: the target country containing the city grid and
/// the foreign visitors' home countries.
pub fn country_layer() -> RegionLayer {
    let rect = |code: &[u8; 2], r: [f64; 4]| {
        let code = std::str::from_utf8(code).unwrap();
        Region::rectangle(code, "country", None, (r[0], r[1]), (r[2], r[3]))
    };
    let mut regions = vec![rect(b"ES", TARGET_RECT)];
    regions.extend(FOREIGN.iter().map(|(code, r)| rect(code, *r)));
    RegionLayer::new("country", regions).expect("distinct country codes")
}

/// Split `total` into integer parts proportional to `weights`, rounding by
/// largest remainder (ties to the lower index). Parts sum to `total` exactly.
pub fn largest_remainder(total: u64, weights: &[f64]) -> Vec<u64> {
    largest_remainder_from(total, weights, 0)
}

/// As [`largest_remainder`], with remainder ties going to the first index
/// at or after `start`, cyclically.
pub fn largest_remainder_from(total: u64, weights: &[f64], start: usize) -> Vec<u64> {
    let n = weights.len();
    let sum: f64 = weights.iter().sum();
    if n == 0 || sum <= 0.0 {
        return vec![0; n];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut parts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = parts.iter().sum();
    let rank = |i: usize| (i + n - start % n) % n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(rank(a).cmp(&rank(b)))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        parts[i] += 1;
    }
    parts
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionEventTruth {
    pub region_id: String,
    pub population: u64,
    pub log10_noise: f64,
    /// Expected foreign events per month before rounding.
    pub expected_monthly: Vec<f64>,
    /// Emitted foreign events per month.
    pub monthly: Vec<u64>,
    pub resident_events: u64,
}

impl RegionEventTruth {
    pub fn expected_annual(&self) -> f64 {
        self.expected_monthly.iter().sum()
    }

    pub fn annual(&self) -> u64 {
        self.monthly.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventTruth {
    pub year: i32,
    pub monthly_b: Vec<f64>,
    pub regions: Vec<RegionEventTruth>,
    pub foreign_city_events: u64,
    pub resident_events: u64,
    pub home_events: u64,
    pub foreign_users: u64,
    pub resident_users: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticEvents {
    pub events: Vec<EventRecord>,
    pub truth: EventTruth,
}

/// Ground truth written next to generated data.
#[derive(Clone, Debug, Serialize)]
pub struct GroundTruth<'a> {
    pub spec: &'a SyntheticSpec,
    pub target_country: CountryCode,
    pub table_regions: &'a [RegionTruth],
    pub events: Option<&'a EventTruth>,
}

/// Foreign-visitor events inside each city with monthly counts proportional
/// to `p^b_month * 10^noise`, plus resident events and, when origins are
/// inferred, each visitor's home-country events.
///
/// Regions must be disjoint axis-aligned-bbox cities; events are placed
/// uniformly in the interior of each region's bounding box, so regions are
/// expected to be rectangles such as those from [`city_layer`].
pub fn generate_events(
    spec: &SyntheticSpec,
    layer: &RegionLayer,
    year: i32,
) -> Result<SyntheticEvents, SynthError> {
    spec.validate()?;
    if layer.regions.iter().any(|r| r.population.is_none()) {
        return Err(SynthError::InvalidSpec("every region needs a population".into()));
    }
    let n = layer.regions.len();
    let monthly_b: Vec<f64> = (0..12).map(|m| spec.month_exponent(m)).collect();
    let noise: Vec<f64> = (0..n).map(|i| region_draws(spec, i).1).collect();

    // Expected foreign events: each month carries an equal slice of the
    // annual total, split across regions by that month's weights.
    let month_totals = largest_remainder(spec.events_per_unit, &[1.0; 12]);
    let mut expected = vec![vec![0.0; 12]; n];
    for m in 0..12 {
        let weights: Vec<f64> = layer
            .regions
            .iter()
            .zip(&noise)
            .map(|(r, e)| (r.population.unwrap() as f64).powf(monthly_b[m]) * 10f64.powf(*e))
            .collect();
        let sum: f64 = weights.iter().sum();
        for (r, w) in weights.iter().enumerate() {
            expected[r][m] = month_totals[m] as f64 * w / sum;
        }
    }
    let annual_expected: Vec<f64> = expected.iter().map(|e| e.iter().sum()).collect();
    let annual = largest_remainder(spec.events_per_unit, &annual_expected);
    // Months often tie exactly (a constant exponent gives every month the
    // same quota), so each region starts its tie order at its own month.
    let root = CounterRng::new(spec.seed);
    let monthly: Vec<Vec<u64>> = annual
        .iter()
        .zip(&expected)
        .enumerate()
        .map(|(r, (&total, e))| {
            let start = root.substream(r as u64).substream(STREAM_TIES).below(12) as usize;
            largest_remainder_from(total, e, start)
        })
        .collect();

    let residents_total = (spec.events_per_unit as f64 * spec.resident_share
        / (1.0 - spec.resident_share))
        .round() as u64;
    let populations: Vec<f64> = layer.regions.iter().map(|r| r.population.unwrap() as f64).collect();
    let residents = largest_remainder(residents_total, &populations);

    let countries = country_layer();
    let per_region: Vec<(Vec<EventRecord>, u64, u64, u64)> = (0..n)
        .into_par_iter()
        .map(|r| {
            let region_rng = root.substream(r as u64);
            emit_region(spec, year, r, &layer.regions[r], &monthly[r], residents[r], &region_rng, &countries)
        })
        .collect();

    let mut events = Vec::new();
    let (mut home_events, mut foreign_users, mut resident_users) = (0, 0, 0);
    for (evs, homes, fu, ru) in per_region {
        events.extend(evs);
        home_events += homes;
        foreign_users += fu;
        resident_users += ru;
    }
    let regions = layer
        .regions
        .iter()
        .enumerate()
        .map(|(r, region)| RegionEventTruth {
            region_id: region.id.clone(),
            population: region.population.unwrap(),
            log10_noise: noise[r],
            expected_monthly: expected[r].clone(),
            monthly: monthly[r].clone(),
            resident_events: residents[r],
        })
        .collect();
    Ok(SyntheticEvents {
        events,
        truth: EventTruth {
            year,
            monthly_b,
            regions,
            foreign_city_events: spec.events_per_unit,
            resident_events: residents_total,
            home_events,
            foreign_users,
            resident_users,
        },
    })
}

fn random_point(rng: &mut CounterRng, region: &Region) -> (f64, f64) {
    // Stay off the edges: [1%, 99%] of each side.
    let (min, max) = (region.bbox.min, region.bbox.max);
    let u = 0.01 + 0.98 * rng.next_f64();
    let v = 0.01 + 0.98 * rng.next_f64();
    (min.lat + u * (max.lat - min.lat), min.lon + v * (max.lon - min.lon))
}

fn random_time(rng: &mut CounterRng, year: i32, month: u32) -> DateTime<Utc> {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    let days = (next - first).num_days() as u64;
    let day = first + chrono::Days::new(rng.below(days));
    let secs = rng.below(86_400) as u32;
    day.and_hms_opt(secs / 3600, secs / 60 % 60, secs % 60)
        .expect("valid time")
        .and_utc()
}

#[allow(clippy::too_many_arguments)]
fn emit_region(
    spec: &SyntheticSpec,
    year: i32,
    r: usize,
    region: &Region,
    monthly: &[u64],
    residents: u64,
    region_rng: &CounterRng,
    countries: &RegionLayer,
) -> (Vec<EventRecord>, u64, u64, u64) {
    let tag = spec.tag();
    let declared = spec.origin_mode == OriginMode::Declared;
    let mut events = Vec::new();
    let (mut home_events, mut foreign_users) = (0, 0);

    for (m, &count) in monthly.iter().enumerate() {
        let month = m as u32 + 1;
        let mut rng = region_rng.substream(1 + m as u64);
        let mut remaining = count;
        let mut k = 0;
        while remaining > 0 {
            let visits = remaining.min(spec.visits_per_user);
            remaining -= visits;
            let user = format!("v{r:03}-{month:02}-{k:05}");
            k += 1;
            foreign_users += 1;
            let (code, _) = FOREIGN[rng.below(FOREIGN.len() as u64) as usize];
            let home = CountryCode::from_bytes(code).expect("valid code");
            for _ in 0..visits {
                let (lat, lon) = random_point(&mut rng, region);
                events.push(EventRecord {
                    user_id: user.clone(),
                    timestamp: random_time(&mut rng, year, month),
                    lat,
                    lon,
                    origin_country: declared.then_some(home),
                    dataset_tag: tag,
                });
            }
            if !declared {
                let home_region = &countries.regions[countries.position(home.as_str()).unwrap()];
                for _ in 0..=visits {
                    let (lat, lon) = random_point(&mut rng, home_region);
                    let when = 1 + rng.below(12) as u32;
                    events.push(EventRecord {
                        user_id: user.clone(),
                        timestamp: random_time(&mut rng, year, when),
                        lat,
                        lon,
                        origin_country: None,
                        dataset_tag: tag,
                    });
                    home_events += 1;
                }
            }
        }
    }

    let mut rng = region_rng.substream(STREAM_RESIDENTS);
    let mut remaining = residents;
    let mut resident_users = 0;
    while remaining > 0 {
        let visits = remaining.min(spec.visits_per_user);
        remaining -= visits;
        let user = format!("r{r:03}-{resident_users:05}");
        resident_users += 1;
        for _ in 0..visits {
            let (lat, lon) = random_point(&mut rng, region);
            let month = 1 + rng.below(12) as u32;
            events.push(EventRecord {
                user_id: user.clone(),
                timestamp: random_time(&mut rng, year, month),
                lat,
                lon,
                origin_country: declared.then_some(TARGET_COUNTRY),
                dataset_tag: tag,
            });
        }
    }
    (events, home_events, foreign_users, resident_users)
}
