//! Unified geotagged event schema and ingestion from CSV / JSON Lines.
//!
//! Every dataset style (photos, tweets, card transactions) is mapped onto a
//! single [`EventRecord`]. Ingestion is a streaming transform: rows are read
//! one at a time, validated, and either yielded or tallied in an
//! [`IngestReport`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

/// Canonical CSV header.
pub const CSV_HEADER: [&str; 6] = [
    "user_id",
    "timestamp",
    "lat",
    "lon",
    "origin_country",
    "dataset_tag",
];

#[derive(Debug, thiserror::Error)]
pub enum EventError {
    #[error("unknown input format {0:?} (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error("unknown dataset tag {0:?}")]
    UnknownTag(String),
    #[error("invalid country code {0:?}")]
    InvalidCountry(String),
    #[error("missing required column {0:?} in CSV header")]
    MissingColumn(&'static str),
    #[error("row {row}: {reason}")]
    Malformed { row: usize, reason: RejectReason },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// ISO-3166-1 alpha-2 code: exactly two uppercase ASCII letters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub const fn from_bytes(bytes: [u8; 2]) -> Option<Self> {
        if bytes[0].is_ascii_uppercase() && bytes[1].is_ascii_uppercase() {
            Some(CountryCode(bytes))
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &str {
        // Both bytes are ASCII uppercase by construction.
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl FromStr for CountryCode {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.as_bytes() {
            &[a, b] => Self::from_bytes([a, b]).ok_or_else(|| EventError::InvalidCountry(s.into())),
            _ => Err(EventError::InvalidCountry(s.into())),
        }
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which kind of activity an event records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetTag {
    Photo,
    Tweet,
    Transaction,
}

impl DatasetTag {
    pub const ALL: [DatasetTag; 3] = [DatasetTag::Photo, DatasetTag::Tweet, DatasetTag::Transaction];

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetTag::Photo => "photo",
            DatasetTag::Tweet => "tweet",
            DatasetTag::Transaction => "transaction",
        }
    }
}

impl FromStr for DatasetTag {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "photo" => Ok(DatasetTag::Photo),
            "tweet" => Ok(DatasetTag::Tweet),
            "transaction" => Ok(DatasetTag::Transaction),
            other => Err(EventError::UnknownTag(other.into())),
        }
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One geotagged activity instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    /// Declared origin, e.g. the issuing country of a bank card.
    pub origin_country: Option<CountryCode>,
    pub dataset_tag: DatasetTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    FieldCount,
    InvalidJson,
    MissingField(&'static str),
    EmptyUserId,
    InvalidTimestamp,
    InvalidLat,
    InvalidLon,
    LatOutOfRange,
    LonOutOfRange,
    InvalidOriginCountry,
    InvalidDatasetTag,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::FieldCount => f.write_str("wrong field count"),
            RejectReason::InvalidJson => f.write_str("invalid json"),
            RejectReason::MissingField(name) => write!(f, "missing {name}"),
            RejectReason::EmptyUserId => f.write_str("empty user_id"),
            RejectReason::InvalidTimestamp => f.write_str("invalid timestamp"),
            RejectReason::InvalidLat => f.write_str("invalid lat"),
            RejectReason::InvalidLon => f.write_str("invalid lon"),
            RejectReason::LatOutOfRange => f.write_str("lat out of range"),
            RejectReason::LonOutOfRange => f.write_str("lon out of range"),
            RejectReason::InvalidOriginCountry => f.write_str("invalid origin_country"),
            RejectReason::InvalidDatasetTag => f.write_str("invalid dataset_tag"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_reasons: BTreeMap<String, usize>,
}

impl IngestReport {
    fn reject(&mut self, reason: RejectReason) {
        self.rejected += 1;
        *self.rejection_reasons.entry(reason.to_string()).or_default() += 1;
    }

    pub fn total(&self) -> usize {
        self.accepted + self.rejected
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl FromStr for InputFormat {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" => Ok(InputFormat::Jsonl),
            other => Err(EventError::UnknownFormat(other.into())),
        }
    }
}

/// Parse an ISO-8601 UTC timestamp with a mandatory `Z` suffix.
///
/// Second precision is canonical. Fractional seconds are truncated and
/// minute-precision stamps (`2011-03-04T10:15Z`) are accepted as `:00`.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let body = s.strip_suffix('Z')?;
    let naive = NaiveDateTime::parse_from_str(body, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(body, "%Y-%m-%dT%H:%M"))
        .ok()?;
    let naive = naive.with_nanosecond(0)?;
    Some(naive.and_utc())
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Raw string fields of one row before validation.
struct RawRow<'a> {
    user_id: Option<&'a str>,
    timestamp: Option<&'a str>,
    lat: Option<&'a str>,
    lon: Option<&'a str>,
    origin_country: Option<&'a str>,
    dataset_tag: Option<&'a str>,
}

fn validate(raw: RawRow<'_>) -> Result<EventRecord, RejectReason> {
    let user_id = raw.user_id.ok_or(RejectReason::MissingField("user_id"))?;
    if user_id.is_empty() {
        return Err(RejectReason::EmptyUserId);
    }
    let timestamp = raw
        .timestamp
        .ok_or(RejectReason::MissingField("timestamp"))
        .and_then(|t| parse_timestamp(t).ok_or(RejectReason::InvalidTimestamp))?;
    let lat = parse_coord(raw.lat, "lat", RejectReason::InvalidLat)?;
    let lon = parse_coord(raw.lon, "lon", RejectReason::InvalidLon)?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(RejectReason::LatOutOfRange);
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(RejectReason::LonOutOfRange);
    }
    let origin_country = match raw.origin_country {
        None | Some("") => None,
        Some(code) => Some(code.parse().map_err(|_| RejectReason::InvalidOriginCountry)?),
    };
    let dataset_tag = raw
        .dataset_tag
        .ok_or(RejectReason::MissingField("dataset_tag"))?
        .parse()
        .map_err(|_| RejectReason::InvalidDatasetTag)?;
    Ok(EventRecord {
        user_id: user_id.to_owned(),
        timestamp,
        lat,
        lon,
        origin_country,
        dataset_tag,
    })
}

fn parse_coord(
    field: Option<&str>,
    name: &'static str,
    invalid: RejectReason,
) -> Result<f64, RejectReason> {
    let v: f64 = field
        .ok_or(RejectReason::MissingField(name))?
        .trim()
        .parse()
        .map_err(|_| invalid)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid)
    }
}

/// Parse events from a CSV or JSONL stream.
///
/// In strict mode the first malformed row aborts with its 1-based data row
/// number. Otherwise malformed rows are skipped and counted. Output order
/// follows input order.
pub fn parse_events<R: Read>(
    source: R,
    format: InputFormat,
    strict: bool,
) -> Result<(Vec<EventRecord>, IngestReport), EventError> {
    let mut events = Vec::new();
    let mut report = IngestReport::default();
    let mut sink = |row: usize, outcome: Result<EventRecord, RejectReason>| match outcome {
        Ok(ev) => {
            report.accepted += 1;
            events.push(ev);
            Ok(())
        }
        Err(reason) if strict => Err(EventError::Malformed { row, reason }),
        Err(reason) => {
            report.reject(reason);
            Ok(())
        }
    };
    match format {
        InputFormat::Csv => read_csv(source, &mut sink)?,
        InputFormat::Jsonl => read_jsonl(source, &mut sink)?,
    }
    Ok((events, report))
}

type Sink<'s> = dyn FnMut(usize, Result<EventRecord, RejectReason>) -> Result<(), EventError> + 's;

fn read_csv<R: Read>(source: R, sink: &mut Sink<'_>) -> Result<(), EventError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &'static str| col(name).ok_or(EventError::MissingColumn(name));
    let (user, ts, lat, lon, tag) = (
        required("user_id")?,
        required("timestamp")?,
        required("lat")?,
        required("lon")?,
        required("dataset_tag")?,
    );
    let origin = col("origin_country");
    let width = headers.len();

    let mut record = csv::StringRecord::new();
    let mut row = 0;
    while reader.read_record(&mut record)? {
        row += 1;
        let outcome = if record.len() != width {
            Err(RejectReason::FieldCount)
        } else {
            validate(RawRow {
                user_id: record.get(user),
                timestamp: record.get(ts),
                lat: record.get(lat),
                lon: record.get(lon),
                origin_country: origin.and_then(|i| record.get(i)),
                dataset_tag: record.get(tag),
            })
        };
        sink(row, outcome)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct JsonRow {
    user_id: Option<String>,
    timestamp: Option<String>,
    lat: Option<JsonNumber>,
    lon: Option<JsonNumber>,
    origin_country: Option<String>,
    dataset_tag: Option<String>,
}

/// Coordinates may arrive as JSON numbers or numeric strings.
#[derive(Deserialize)]
#[serde(untagged)]
enum JsonNumber {
    Num(f64),
    Str(String),
}

impl JsonNumber {
    fn text(&self) -> String {
        match self {
            JsonNumber::Num(v) => v.to_string(),
            JsonNumber::Str(s) => s.clone(),
        }
    }
}

fn read_jsonl<R: Read>(source: R, sink: &mut Sink<'_>) -> Result<(), EventError> {
    let mut row = 0;
    for line in BufReader::new(source).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let outcome = match serde_json::from_str::<JsonRow>(&line) {
            Err(_) => Err(RejectReason::InvalidJson),
            Ok(obj) => {
                let lat = obj.lat.as_ref().map(JsonNumber::text);
                let lon = obj.lon.as_ref().map(JsonNumber::text);
                validate(RawRow {
                    user_id: obj.user_id.as_deref(),
                    timestamp: obj.timestamp.as_deref(),
                    lat: lat.as_deref(),
                    lon: lon.as_deref(),
                    origin_country: obj.origin_country.as_deref(),
                    dataset_tag: obj.dataset_tag.as_deref(),
                })
            }
        };
        sink(row, outcome)?;
    }
    Ok(())
}

/// Write records in the canonical CSV layout.
///
/// Coordinates use the shortest representation that round-trips exactly.
pub fn write_events_csv<W: Write>(events: &[EventRecord], out: W) -> Result<(), EventError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for ev in events {
        writer.write_record([
            ev.user_id.as_str(),
            &format_timestamp(&ev.timestamp),
            &ev.lat.to_string(),
            &ev.lon.to_string(),
            ev.origin_country.as_ref().map_or("", CountryCode::as_str),
            ev.dataset_tag.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
