//! Home-country inference from a user's event footprint.
//!
//! A user's home is the country with the most events; ties go to the country
//! with the longest first-to-last timespan, then to the lexicographically
//! smallest country code.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::Serialize;

use crate::event::{CountryCode, EventRecord};

/// Spelling of an undetermined home in outputs.
pub const UNDETERMINED: &str = "UNDETERMINED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Residence {
    Country(CountryCode),
    Undetermined,
}

impl Residence {
    pub fn country(&self) -> Option<CountryCode> {
        match self {
            Residence::Country(c) => Some(*c),
            Residence::Undetermined => None,
        }
    }
}

impl fmt::Display for Residence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Residence::Country(c) => f.write_str(c.as_str()),
            Residence::Undetermined => f.write_str(UNDETERMINED),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountryEntry {
    pub event_count: u64,
    pub first_ts: DateTime<Utc>,
    pub last_ts: DateTime<Utc>,
}

impl CountryEntry {
    fn single(ts: DateTime<Utc>) -> Self {
        CountryEntry { event_count: 1, first_ts: ts, last_ts: ts }
    }

    fn merge(&mut self, other: &CountryEntry) {
        self.event_count += other.event_count;
        self.first_ts = self.first_ts.min(other.first_ts);
        self.last_ts = self.last_ts.max(other.last_ts);
    }

    pub fn timespan_seconds(&self) -> i64 {
        (self.last_ts - self.first_ts).num_seconds()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserCountryStats {
    pub user_id: String,
    pub countries: BTreeMap<CountryCode, CountryEntry>,
}

impl UserCountryStats {
    pub fn total_events(&self) -> u64 {
        self.countries.values().map(|e| e.event_count).sum()
    }

    fn merge(&mut self, other: &UserCountryStats) {
        for (code, entry) in &other.countries {
            self.countries
                .entry(*code)
                .and_modify(|e| e.merge(entry))
                .or_insert(*entry);
        }
    }
}

/// Per-user country statistics plus the number of events that fell in no
/// country.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FootprintStats {
    pub users: BTreeMap<String, UserCountryStats>,
    pub unresolved_events: u64,
}

impl FootprintStats {
    fn add(mut self, ev: &EventRecord, country: Option<CountryCode>) -> Self {
        match country {
            None => self.unresolved_events += 1,
            Some(code) => {
                let user = self.users.entry(ev.user_id.clone()).or_insert_with(|| UserCountryStats {
                    user_id: ev.user_id.clone(),
                    countries: BTreeMap::new(),
                });
                user.countries
                    .entry(code)
                    .and_modify(|e| e.merge(&CountryEntry::single(ev.timestamp)))
                    .or_insert_with(|| CountryEntry::single(ev.timestamp));
            }
        }
        self
    }

    /// Associative, commutative merge of two shards.
    pub fn merge(mut self, other: FootprintStats) -> Self {
        self.unresolved_events += other.unresolved_events;
        for (user, stats) in other.users {
            match self.users.get_mut(&user) {
                Some(existing) => existing.merge(&stats),
                None => {
                    self.users.insert(user, stats);
                }
            }
        }
        self
    }
}

/// Tally events per user and country. `country_of` maps `(lat, lon)` to the
/// country containing it, if any.
pub fn accumulate_stats<F>(events: &[EventRecord], country_of: F) -> FootprintStats
where
    F: Fn(f64, f64) -> Option<CountryCode> + Sync,
{
    events
        .par_iter()
        .fold(FootprintStats::default, |acc, ev| {
            let country = country_of(ev.lat, ev.lon);
            acc.add(ev, country)
        })
        .reduce(FootprintStats::default, FootprintStats::merge)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub event_count: u64,
    pub timespan_seconds: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomeAssignment {
    pub user_id: String,
    pub country: Residence,
    /// For an assigned home, the chosen country's entry; otherwise the
    /// user's total resolvable events and a zero timespan.
    pub evidence: Evidence,
}

pub fn infer_home(stats: &UserCountryStats, min_events: u64) -> HomeAssignment {
    let total = stats.total_events();
    let undetermined = HomeAssignment {
        user_id: stats.user_id.clone(),
        country: Residence::Undetermined,
        evidence: Evidence { event_count: total, timespan_seconds: 0 },
    };
    if total == 0 || total < min_events.max(1) {
        return undetermined;
    }
    // Iteration is in ascending code order, so on a full tie the first
    // (smallest) code must win: only replace on a strictly better key.
    let mut best: Option<(&CountryCode, &CountryEntry)> = None;
    for (code, entry) in &stats.countries {
        let better = match best {
            None => true,
            Some((_, b)) => {
                (entry.event_count, entry.timespan_seconds())
                    > (b.event_count, b.timespan_seconds())
            }
        };
        if better {
            best = Some((code, entry));
        }
    }
    match best {
        Some((code, entry)) => HomeAssignment {
            user_id: stats.user_id.clone(),
            country: Residence::Country(*code),
            evidence: Evidence {
                event_count: entry.event_count,
                timespan_seconds: entry.timespan_seconds(),
            },
        },
        None => undetermined,
    }
}

/// A declared origin (e.g. a card's issuing country) overrides inference.
pub fn resolve_origin(owner: &HomeAssignment, declared: Option<CountryCode>) -> Residence {
    match declared {
        Some(code) => Residence::Country(code),
        None => owner.country,
    }
}

/// Home assignments for every distinct user in an event set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HomeTable {
    /// Sorted by user id.
    pub assignments: Vec<HomeAssignment>,
    pub unresolved_events: u64,
}

impl HomeTable {
    pub fn assigned(&self) -> usize {
        self.assignments
            .iter()
            .filter(|a| a.country != Residence::Undetermined)
            .count()
    }

    pub fn undetermined(&self) -> usize {
        self.assignments.len() - self.assigned()
    }

    pub fn lookup(&self) -> HashMap<&str, &HomeAssignment> {
        self.assignments.iter().map(|a| (a.user_id.as_str(), a)).collect()
    }

    /// Origin of each event: declared country if present, else its owner's home.
    pub fn event_origins(&self, events: &[EventRecord]) -> Vec<Residence> {
        let lookup = self.lookup();
        events
            .iter()
            .map(|ev| match lookup.get(ev.user_id.as_str()) {
                Some(owner) => resolve_origin(owner, ev.origin_country),
                None => ev.origin_country.map_or(Residence::Undetermined, Residence::Country),
            })
            .collect()
    }
}

/// Accumulate and infer in one pass. Users whose events all fall outside
/// every country are reported as undetermined.
pub fn infer_homes<F>(events: &[EventRecord], country_of: F, min_events: u64) -> HomeTable
where
    F: Fn(f64, f64) -> Option<CountryCode> + Sync,
{
    let stats = accumulate_stats(events, country_of);
    let mut users: BTreeMap<&str, Option<&UserCountryStats>> =
        events.iter().map(|ev| (ev.user_id.as_str(), None)).collect();
    for (user, s) in &stats.users {
        users.insert(user.as_str(), Some(s));
    }
    let assignments = users
        .into_iter()
        .map(|(user, s)| match s {
            Some(s) => infer_home(s, min_events),
            None => infer_home(
                &UserCountryStats { user_id: user.to_owned(), countries: BTreeMap::new() },
                min_events,
            ),
        })
        .collect();
    HomeTable { assignments, unresolved_events: stats.unresolved_events }
}

/// CSV `user_id,country,event_count,timespan_seconds`.
pub fn write_homes_csv<W: Write>(table: &HomeTable, out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["user_id", "country", "event_count", "timespan_seconds"])?;
    for a in &table.assignments {
        writer.write_record([
            a.user_id.clone(),
            a.country.to_string(),
            a.evidence.event_count.to_string(),
            a.evidence.timespan_seconds.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
