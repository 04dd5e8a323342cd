//! Foreign-visitor attractiveness of cities and its scaling with population.
//!
//! Events are attributed to users' home countries, located in city regions,
//! aggregated into per-city shares of foreign activity and fitted against
//! population with a log-log power law.

pub mod event;
pub mod format;
pub mod geo;
pub mod home;
pub mod scaling;
pub mod special;
pub mod synthetic;
pub mod temporal;

pub use event::{
    parse_events, write_events_csv, CountryCode, DatasetTag, EventError, EventRecord, InputFormat,
    IngestReport,
};
pub use geo::{
    assign_events, load_layer, point_in_region, Assignment, GeoError, Region, RegionLayer,
};
pub use home::{infer_home, infer_homes, HomeAssignment, HomeTable, Residence};
pub use scaling::{
    compute_attractiveness, correlate_residuals, fit_power_law, log_bin, pearson, residuals,
    AttractivenessTable, BinnedTrend, ResidualScore, ScalingError, ScalingFit,
};
pub use synthetic::{generate_events, generate_table, SynthError, SyntheticSpec};
pub use temporal::{window_exponents, WindowContext, WindowedExponents};
