use std::collections::HashMap;
use std::io::Write;

use super::{AttractivenessTable, ScalingError, ScalingFit};
use crate::format::fmt_sig;

/// Scale-free attractiveness: log10 deviation from the fitted trend.
/// Positive means the region over-performs cities of its size.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualScore {
    pub region_id: String,
    pub res: f64,
}

/// Residuals of every fitted row, most over-performing first.
pub fn residuals(table: &AttractivenessTable, fit: &ScalingFit) -> Vec<ResidualScore> {
    let mut scores: Vec<ResidualScore> = table
        .positive_rows()
        .map(|r| ResidualScore {
            region_id: r.region_id.clone(),
            res: r.share.log10() - fit.b * r.population.log10() - fit.log_a,
        })
        .collect();
    scores.sort_by(|a, b| b.res.total_cmp(&a.res).then_with(|| a.region_id.cmp(&b.region_id)));
    scores
}

/// CSV `region_id,res`, in the given (descending) order.
pub fn write_residuals_csv<W: Write>(scores: &[ResidualScore], out: W) -> Result<(), ScalingError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region_id", "res"])?;
    for s in scores {
        w.write_record([s.region_id.clone(), fmt_sig(s.res)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, ScalingError> {
    if xs.len() != ys.len() {
        return Err(ScalingError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(ScalingError::UndefinedCorrelation);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ScalingError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualCorrelation {
    pub r: f64,
    /// Regions present in both lists.
    pub n: usize,
    pub only_in_a: usize,
    pub only_in_b: usize,
}

/// Pearson correlation of two residual lists aligned by region id.
pub fn correlate_residuals(
    a: &[ResidualScore],
    b: &[ResidualScore],
) -> Result<ResidualCorrelation, ScalingError> {
    let by_id: HashMap<&str, f64> = b.iter().map(|s| (s.region_id.as_str(), s.res)).collect();
    let mut pairs: Vec<(&str, f64, f64)> = a
        .iter()
        .filter_map(|s| by_id.get(s.region_id.as_str()).map(|&rb| (s.region_id.as_str(), s.res, rb)))
        .collect();
    // Order the sums by region id so the result does not depend on list order.
    pairs.sort_by(|x, y| x.0.cmp(y.0));
    let n = pairs.len();
    if n < 2 {
        return Err(ScalingError::SmallIntersection(n));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().map(|p| (p.1, p.2)).unzip();
    Ok(ResidualCorrelation {
        r: pearson(&xs, &ys)?,
        n,
        only_in_a: a.len() - n,
        only_in_b: b.len() - n,
    })
}

/// Residual correlations laid out with one row per layer and one column per
/// dataset pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrelationMatrix {
    /// Column labels such as `photo/tweet`.
    pub pairs: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl CorrelationMatrix {
    /// Empty cells mark pairs that could not be correlated.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ScalingError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["layer".to_string()];
        header.extend(self.pairs.iter().cloned());
        w.write_record(&header)?;
        for (layer, cells) in &self.rows {
            let mut rec = vec![layer.clone()];
            rec.extend(cells.iter().map(|c| c.map(fmt_sig).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
