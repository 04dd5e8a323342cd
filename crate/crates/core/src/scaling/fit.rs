use serde::Serialize;

use super::{AttractivenessTable, ScalingError};
use crate::format::ser_sig;
use crate::special::student_t_two_sided;

/// Ordinary least squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
    pub stderr_slope: f64,
    /// Two-sided p-value of the slope t-statistic, `n - 2` dof.
    pub p_value: f64,
    pub n: usize,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LinearFit, ScalingError> {
    if xs.len() != ys.len() {
        return Err(ScalingError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(ScalingError::InsufficientData(n));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(ScalingError::DegenerateAbscissa);
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let dof = nf - 2.0;
    let stderr_slope = (ss_res / dof / sxx).sqrt();
    let p_value = if stderr_slope > 0.0 {
        student_t_two_sided(slope / stderr_slope, dof)
    } else if slope != 0.0 {
        0.0
    } else {
        // Flat line fitted exactly: no evidence of any slope.
        1.0
    };
    Ok(LinearFit { intercept, slope, r2, stderr_slope, p_value, n })
}

/// Power law `A = a * p^b` fitted as a line in log10-log10 space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    /// log10 of the prefactor `a`.
    #[serde(serialize_with = "ser_sig")]
    pub log_a: f64,
    /// Scaling exponent.
    #[serde(serialize_with = "ser_sig")]
    pub b: f64,
    #[serde(serialize_with = "ser_sig")]
    pub r2: f64,
    #[serde(serialize_with = "ser_sig")]
    pub p_value: f64,
    #[serde(serialize_with = "ser_sig")]
    pub stderr_b: f64,
    pub n: usize,
    /// Rows dropped because their attractiveness was zero.
    #[serde(rename = "excluded_zero_A")]
    pub excluded_zero_a: usize,
}

impl ScalingFit {
    pub fn from_linear(fit: LinearFit, excluded_zero_a: usize) -> Self {
        ScalingFit {
            log_a: fit.intercept,
            b: fit.slope,
            r2: fit.r2,
            p_value: fit.p_value,
            stderr_b: fit.stderr_slope,
            n: fit.n,
            excluded_zero_a,
        }
    }

    /// Fitted log10 attractiveness at population `p`.
    pub fn predict_log10(&self, p: f64) -> f64 {
        self.log_a + self.b * p.log10()
    }

    /// Predicted attractiveness ratio between two cities whose populations
    /// differ by `factor`.
    pub fn ratio_for_population_factor(&self, factor: f64) -> f64 {
        factor.powf(self.b)
    }
}

/// Fit `log10(A) = log_a + b * log10(p)` over rows with `A > 0`.
pub fn fit_power_law(table: &AttractivenessTable) -> Result<ScalingFit, ScalingError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = table
        .positive_rows()
        .map(|r| (r.population.log10(), r.share.log10()))
        .unzip();
    let excluded = table.rows.len() - xs.len();
    ols(&xs, &ys).map(|fit| ScalingFit::from_linear(fit, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(points: &[(f64, f64)]) -> AttractivenessTable {
        AttractivenessTable::from_raw(
            "t",
            "L",
            points.iter().enumerate().map(|(i, &(p, a))| (format!("r{i}"), p, a)),
        )
        .unwrap()
    }

    #[test]
    fn noise_free_exponent() {
        let t = table(&[(1e4, 1e6), (1e5, 1e6 * 10f64.powf(1.5)), (1e6, 1e9)]);
        let fit = fit_power_law(&t).unwrap();
        assert!((fit.b - 1.5).abs() < 1e-12, "b = {}", fit.b);
        assert_eq!(fit.r2, 1.0);
        assert_eq!(fit.n, 3);
        assert_eq!(fit.p_value, 0.0);
    }

    #[test]
    fn zero_rows_are_excluded_and_counted() {
        let t = table(&[(10.0, 1.0), (100.0, 0.0), (1000.0, 3.0), (1e4, 7.0)]);
        let fit = fit_power_law(&t).unwrap();
        assert_eq!((fit.n, fit.excluded_zero_a), (3, 1));
    }

    #[test]
    fn error_cases() {
        let t = table(&[(10.0, 1.0), (100.0, 2.0)]);
        assert!(matches!(fit_power_law(&t), Err(ScalingError::InsufficientData(2))));
        let t = table(&[(10.0, 1.0), (10.0, 2.0), (10.0, 5.0)]);
        assert!(matches!(fit_power_law(&t), Err(ScalingError::DegenerateAbscissa)));
    }

    #[test]
    fn textbook_regression_statistics() {
        // x = 1..5, y = 2, 4, 5, 4, 5: slope 0.6, intercept 2.2,
        // SSres = 2.4, SStot = 6, so R^2 = 0.6, se = sqrt(0.8 / 10).
        let fit = ols(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 5.0, 4.0, 5.0]).unwrap();
        assert!((fit.slope - 0.6).abs() < 1e-14);
        assert!((fit.intercept - 2.2).abs() < 1e-14);
        assert!((fit.r2 - 0.6).abs() < 1e-14);
        let se = (0.08f64).sqrt();
        assert!((fit.stderr_slope - se).abs() < 1e-14);
        // t = 0.6 / se = 2.1213..., dof 3. Reference from an independent
        // t-distribution implementation (statrs).
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let reference = 2.0 * StudentsT::new(0.0, 1.0, 3.0).unwrap().cdf(-0.6 / se);
        assert!((fit.p_value - reference).abs() < 1e-12);
    }

    #[test]
    fn tripled_population_ratio() {
        let fit = ScalingFit {
            log_a: -7.0,
            b: 1.5,
            r2: 1.0,
            p_value: 0.0,
            stderr_b: 0.0,
            n: 3,
            excluded_zero_a: 0,
        };
        let ratio = fit.ratio_for_population_factor(3.0);
        assert!((ratio - 5.196_152_422_706_632).abs() < 1e-9);
        assert!((ratio - 5.0).abs() / 5.0 < 0.05);
    }

    proptest! {
        #[test]
        fn normalization_only_moves_the_intercept(
            pts in proptest::collection::vec((1.0f64..7.0, -3.0f64..3.0), 4..30),
            factor in 0.01f64..100.0,
        ) {
            let t = table(&pts.iter().map(|&(lp, e)| (10f64.powf(lp), 10f64.powf(1.4 * lp + e))).collect::<Vec<_>>());
            prop_assume!(pts.iter().any(|p| (p.0 - pts[0].0).abs() > 1e-3));
            let base = fit_power_law(&t).unwrap();
            let moved = fit_power_law(&t.scaled(factor)).unwrap();
            prop_assert!((moved.log_a - base.log_a - factor.log10()).abs() < 1e-9);
            prop_assert!((moved.b - base.b).abs() < 1e-9);
            prop_assert!((moved.r2 - base.r2).abs() < 1e-9);
            prop_assert!((moved.stderr_b - base.stderr_b).abs() < 1e-9);
            prop_assert!((moved.p_value - base.p_value).abs() < 1e-9);
        }

        #[test]
        fn statistics_stay_in_range(
            pts in proptest::collection::vec((0.0f64..8.0, -6.0f64..0.0), 3..40),
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-6));
            let fit = ols(&xs, &ys).unwrap();
            prop_assert!((0.0..=1.0).contains(&fit.r2));
            prop_assert!((0.0..=1.0).contains(&fit.p_value));
            prop_assert!(fit.stderr_slope >= 0.0);
        }
    }
}
