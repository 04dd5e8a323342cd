//! Seasonal tracking of the scaling exponent over moving three-month
//! windows, one window centered on each calendar month.

use std::io::Write;

use chrono::Datelike;
use rayon::prelude::*;
use serde::Serialize;

use crate::event::{CountryCode, EventRecord};
use crate::format::{fmt_sig, ser_sig_opt};
use crate::geo::{Assignment, RegionLayer};
use crate::home::Residence;
use crate::scaling::{compute_attractiveness_where, fit_power_law, ScalingFit};

/// Everything a window fit needs besides the month filter.
#[derive(Clone, Copy)]
pub struct WindowContext<'a> {
    pub events: &'a [EventRecord],
    pub assignment: &'a Assignment,
    /// Resolved origin per event.
    pub origins: &'a [Residence],
    pub layer: &'a RegionLayer,
    pub target: CountryCode,
}

/// Calendar months (1-12) in the window centered on `center`, wrapping
/// around the year boundary.
pub fn window_months(center: u32) -> [u32; 3] {
    assert!((1..=12).contains(&center), "month out of range: {center}");
    let prev = if center == 1 { 12 } else { center - 1 };
    let next = if center == 12 { 1 } else { center + 1 };
    [prev, center, next]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WindowOutcome {
    Fitted { fit: ScalingFit },
    Insufficient { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Window {
    pub center_month: u32,
    pub months: [u32; 3],
    #[serde(flatten)]
    pub outcome: WindowOutcome,
    /// Exponent divided by the mean exponent over fitted windows.
    #[serde(serialize_with = "ser_sig_opt")]
    pub normalized: Option<f64>,
}

impl Window {
    pub fn fit(&self) -> Option<&ScalingFit> {
        match &self.outcome {
            WindowOutcome::Fitted { fit } => Some(fit),
            WindowOutcome::Insufficient { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowedExponents {
    /// Exactly 12 windows, centers January through December.
    pub windows: Vec<Window>,
    #[serde(serialize_with = "ser_sig_opt")]
    pub mean_b: Option<f64>,
    pub insufficient: usize,
}

impl WindowedExponents {
    /// Center month of the window with the smallest normalized exponent.
    pub fn minimum_center(&self) -> Option<u32> {
        self.windows
            .iter()
            .filter_map(|w| w.normalized.map(|v| (w.center_month, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(m, _)| m)
    }

    /// CSV `center_month,b,b_normalized,n,r2,p_value`; insufficient windows
    /// leave the numeric fields empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["center_month", "b", "b_normalized", "n", "r2", "p_value"])?;
        for win in &self.windows {
            let month = win.center_month.to_string();
            match win.fit() {
                Some(fit) => w.write_record([
                    month,
                    fmt_sig(fit.b),
                    win.normalized.map(fmt_sig).unwrap_or_default(),
                    fit.n.to_string(),
                    fmt_sig(fit.r2),
                    fmt_sig(fit.p_value),
                ])?,
                None => w.write_record([month.as_str(), "", "", "", "", ""])?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Fit the scaling law separately in each of the 12 three-month windows.
///
/// Windows whose attractiveness table cannot be fitted (no foreign events,
/// fewer than 3 regions with positive attractiveness) are marked
/// insufficient and left out of the normalization mean.
pub fn window_exponents(ctx: WindowContext<'_>) -> WindowedExponents {
    let months: Vec<u32> = ctx.events.iter().map(|e| e.timestamp.month()).collect();
    let outcomes: Vec<WindowOutcome> = (1..=12u32)
        .into_par_iter()
        .map(|center| {
            let members = window_months(center);
            compute_attractiveness_where(
                ctx.events,
                ctx.assignment,
                ctx.origins,
                ctx.target,
                ctx.layer,
                |i| members.contains(&months[i]),
            )
            .and_then(|t| fit_power_law(&t))
            .map_or_else(
                |e| WindowOutcome::Insufficient { reason: e.to_string() },
                |fit| WindowOutcome::Fitted { fit },
            )
        })
        .collect();

    let fitted: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| match o {
            WindowOutcome::Fitted { fit } => Some(fit.b),
            WindowOutcome::Insufficient { .. } => None,
        })
        .collect();
    let mean_b = (!fitted.is_empty()).then(|| fitted.iter().sum::<f64>() / fitted.len() as f64);
    let insufficient = 12 - fitted.len();
    let windows = outcomes
        .into_iter()
        .zip(1..=12u32)
        .map(|(outcome, center)| {
            let normalized = match (&outcome, mean_b) {
                (WindowOutcome::Fitted { fit }, Some(mean)) => Some(fit.b / mean),
                _ => None,
            };
            Window { center_month: center, months: window_months(center), outcome, normalized }
        })
        .collect();
    WindowedExponents { windows, mean_b, insufficient }
}
