//! Fixtures shared by the benchmarks.

use cityscale_core::synthetic::{city_layer, country_layer, generate_events, SyntheticEvents};
use cityscale_core::{generate_table, AttractivenessTable, RegionLayer, SyntheticSpec};

pub struct World {
    pub countries: RegionLayer,
    pub cities: RegionLayer,
    pub generated: SyntheticEvents,
}

/// Synthetic world with `regions` cities and about `events` foreign in-city
/// events, plus home events and residents.
pub fn world(regions: usize, events: u64) -> World {
    let mut spec = SyntheticSpec::new(regions, 2e4, 5e6, 1.5, 7);
    spec.noise_sigma = 0.1;
    spec.events_per_unit = events;
    spec.resident_share = 0.3;
    let table = generate_table(&spec).expect("valid spec");
    let cities = city_layer(&table.table).expect("city layer");
    let generated = generate_events(&spec, &cities, 2012).expect("events");
    World { countries: country_layer(), cities, generated }
}

/// Noisy attractiveness table with `regions` rows.
pub fn table(regions: usize) -> AttractivenessTable {
    let mut spec = SyntheticSpec::new(regions, 1e3, 1e7, 1.5, 11);
    spec.noise_sigma = 0.2;
    generate_table(&spec).expect("valid spec").table
}
