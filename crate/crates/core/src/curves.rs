//! Load curve data model: validation, smoothing, normalisation and slicing
//! of a day into equal periods.

use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, HOURS};

/// Calendar class of a day. Saturday and Sunday are weekend days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub fn of(date: NaiveDate) -> Self {
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayType::Weekend,
            _ => DayType::Weekday,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

/// One household-day of hourly energy readings (kWh).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoadCurve {
    pub household_id: String,
    pub date: NaiveDate,
    pub day_type: DayType,
    values: [f64; HOURS],
}

impl LoadCurve {
    pub fn values(&self) -> &[f64; HOURS] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Same identity, new readings. The readings are re-validated.
    pub fn with_values(&self, values: &[f64]) -> Result<LoadCurve> {
        validate_curve(values, self.household_id.clone(), self.date)
    }
}

/// A curve scaled to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCurve(Vec<f64>);

impl NormalizedCurve {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for NormalizedCurve {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Contiguous block of `24 / n_p` hours. `period` is zero based.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSlice {
    pub period: usize,
    pub values: Vec<f64>,
}

impl AsRef<[f64]> for PeriodSlice {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

fn check_readings(raw: &[f64]) -> Result<()> {
    if raw.len() != HOURS {
        return Err(Error::WrongLength {
            expected: HOURS,
            actual: raw.len(),
        });
    }
    for (hour, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { hour });
        }
        if value < 0.0 {
            return Err(Error::NegativeValue { hour, value });
        }
    }
    if raw.iter().all(|&v| v == 0.0) {
        return Err(Error::AllZero);
    }
    Ok(())
}

/// Builds a [`LoadCurve`], rejecting anything that is not 24 finite,
/// non-negative readings with a positive total. The day type follows the
/// date.
pub fn validate_curve(
    raw: &[f64],
    household_id: impl Into<String>,
    date: NaiveDate,
) -> Result<LoadCurve> {
    check_readings(raw)?;
    let mut values = [0.0; HOURS];
    values.copy_from_slice(raw);
    Ok(LoadCurve {
        household_id: household_id.into(),
        date,
        day_type: DayType::of(date),
        values,
    })
}

/// Maps the user-facing smoothing level in `[0, 1]` to the roughness
/// penalty weight. 0 interpolates, 1 is the straight-line limit.
pub fn smoothing_to_lambda(smoothing: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&smoothing) || smoothing.is_nan() {
        return Err(Error::InvalidSmoothing(smoothing));
    }
    Ok(if smoothing == 1.0 {
        f64::INFINITY
    } else {
        smoothing / (1.0 - smoothing)
    })
}

/// Natural cubic smoothing spline through unit-spaced knots, evaluated at
/// the knots.
///
/// Minimises `sum (y_i - f(i))^2 + lambda * integral f''(t)^2 dt` with the
/// Reinsch formulation: `(R + lambda Q'Q) gamma = Q'y`, `f = y - lambda Q gamma`.
/// An infinite `lambda` returns the least-squares line.
pub fn fit_smoothing_spline(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    if lambda == 0.0 || n < 3 {
        return y.to_vec();
    }
    if lambda.is_infinite() {
        return least_squares_line(y);
    }
    let m = n - 2;
    // Q is n x (n-2) with columns (1, -2, 1) for unit spacing.
    let mut q = DMatrix::<f64>::zeros(n, m);
    let mut r = DMatrix::<f64>::zeros(m, m);
    for c in 0..m {
        q[(c, c)] = 1.0;
        q[(c + 1, c)] = -2.0;
        q[(c + 2, c)] = 1.0;
        r[(c, c)] = 2.0 / 3.0;
        if c + 1 < m {
            r[(c, c + 1)] = 1.0 / 6.0;
            r[(c + 1, c)] = 1.0 / 6.0;
        }
    }
    let y_vec = DVector::from_column_slice(y);
    let system = &r + q.transpose() * &q * lambda;
    let rhs = q.transpose() * &y_vec;
    let gamma = system
        .cholesky()
        .expect("R + lambda Q'Q is symmetric positive definite")
        .solve(&rhs);
    let fitted = y_vec - q * gamma * lambda;
    fitted.iter().copied().collect()
}

fn least_squares_line(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mean_t = (n - 1.0) / 2.0;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dt = i as f64 - mean_t;
        sty += dt * (v - mean_y);
        stt += dt * dt;
    }
    let slope = sty / stt;
    (0..y.len())
        .map(|i| mean_y + slope * (i as f64 - mean_t))
        .collect()
}

/// Smooths a curve with a cubic smoothing spline. Negative fitted values
/// are clamped to zero; `smoothing = 0` returns the curve unchanged.
pub fn smooth_spline(curve: &LoadCurve, smoothing: f64) -> Result<LoadCurve> {
    let lambda = smoothing_to_lambda(smoothing)?;
    if lambda == 0.0 {
        return Ok(curve.clone());
    }
    let fitted: Vec<f64> = fit_smoothing_spline(curve.values(), lambda)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    curve.with_values(&fitted)
}

/// Scales any non-negative slice to unit sum.
pub fn normalize_slice(values: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZero);
    }
    Ok(values.iter().map(|v| v / total).collect())
}

pub fn normalize(curve: &LoadCurve) -> Result<NormalizedCurve> {
    normalize_slice(curve.values()).map(NormalizedCurve)
}

/// Periods per day accepted by [`split_periods`].
pub fn check_periods(n_p: usize) -> Result<usize> {
    if n_p == 0 || HOURS % n_p != 0 {
        return Err(Error::NotADivisor { n_p });
    }
    Ok(HOURS / n_p)
}

/// Cuts a day into `n_p` equal contiguous blocks, in order.
pub fn split_periods(values: &[f64], n_p: usize) -> Result<Vec<PeriodSlice>> {
    let width = check_periods(n_p)?;
    if values.len() != HOURS {
        return Err(Error::WrongLength {
            expected: HOURS,
            actual: values.len(),
        });
    }
    Ok(values
        .chunks(width)
        .enumerate()
        .map(|(period, chunk)| PeriodSlice {
            period,
            values: chunk.to_vec(),
        })
        .collect())
}
