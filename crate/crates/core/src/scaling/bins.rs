use std::io::Write;

use super::{fit::ols, AttractivenessTable, ScalingError, ScalingFit};
use crate::format::fmt_sig;

pub const DEFAULT_BINS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct Bin {
    /// Population range covered by the bin.
    pub p_lo: f64,
    pub p_hi: f64,
    /// Geometric mean of member populations.
    pub p_center: f64,
    /// Arithmetic mean of member attractiveness.
    pub mean_a: f64,
    pub member_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedTrend {
    /// Non-empty bins in increasing population order.
    pub bins: Vec<Bin>,
    pub k: usize,
    pub excluded_zero_a: usize,
}

/// Average attractiveness over `k` population ranges equally spaced in
/// log10(p) between the smallest and largest population.
///
/// Only rows with positive attractiveness are binned, the same rows a
/// power-law fit uses. The top bin includes its right edge.
pub fn log_bin(table: &AttractivenessTable, k: usize) -> Result<BinnedTrend, ScalingError> {
    if k < 1 {
        return Err(ScalingError::InvalidBinCount);
    }
    let rows: Vec<(f64, f64)> = table
        .positive_rows()
        .map(|r| (r.population.log10(), r.share))
        .collect();
    if rows.is_empty() {
        return Err(ScalingError::InsufficientData(0));
    }
    let lo = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / k as f64;

    // (sum log10 p, sum A, count) per bin
    let mut acc = vec![(0.0, 0.0, 0usize); k];
    for &(x, a) in &rows {
        let idx = if width > 0.0 {
            (((x - lo) / width).floor() as usize).min(k - 1)
        } else {
            0
        };
        acc[idx].0 += x;
        acc[idx].1 += a;
        acc[idx].2 += 1;
    }
    let bins = acc
        .into_iter()
        .enumerate()
        .filter(|(_, (_, _, count))| *count > 0)
        .map(|(i, (sum_x, sum_a, count))| Bin {
            p_lo: 10f64.powf(lo + width * i as f64),
            p_hi: 10f64.powf(if i + 1 == k { hi } else { lo + width * (i + 1) as f64 }),
            p_center: 10f64.powf(sum_x / count as f64),
            mean_a: sum_a / count as f64,
            member_count: count,
        })
        .collect();
    Ok(BinnedTrend {
        bins,
        k,
        excluded_zero_a: table.rows.len() - rows.len(),
    })
}

/// Unweighted log-log fit through the bin points.
pub fn fit_binned(trend: &BinnedTrend) -> Result<ScalingFit, ScalingError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = trend
        .bins
        .iter()
        .map(|b| (b.p_center.log10(), b.mean_a.log10()))
        .unzip();
    ols(&xs, &ys).map(|fit| ScalingFit::from_linear(fit, 0))
}

/// CSV `p_center,mean_A,member_count`.
pub fn write_binned_csv<W: Write>(trend: &BinnedTrend, out: W) -> Result<(), ScalingError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p_center", "mean_A", "member_count"])?;
    for b in &trend.bins {
        w.write_record([fmt_sig(b.p_center), fmt_sig(b.mean_a), b.member_count.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
