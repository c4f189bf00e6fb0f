//! Market-diversification analytics: the direction indicator `D`, its
//! cumulative sum `E` and the capped-weight diversity measure, plus report
//! assembly.

mod report;

pub use report::{
    assemble_report, read_series_csv, write_atomic, write_ledger_csv, write_series_csv, ModeSummary, ReportError,
    ReportFiles, ReportInput, RunSummary, SeriesTable,
};

use thiserror::Error;

use crate::marketdata::MarketPath;
use crate::num::{lit, to_f64, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("begin-of-day weight {index} = {value} is not strictly positive")]
    ZeroWeight { index: usize, value: f64 },
    #[error("begin and end weight vectors differ in length ({begin} vs {end})")]
    Length { begin: usize, end: usize },
    #[error("cap must be positive, got {0}")]
    Cap(f64),
}

/// `D = Σ_j -log μ̲_j (μ̄_j - μ̲_j)`.
pub fn direction_indicator<T: Scalar>(mu_begin: &[T], mu_end: &[T]) -> Result<T, DiagnosticsError> {
    if mu_begin.len() != mu_end.len() {
        return Err(DiagnosticsError::Length { begin: mu_begin.len(), end: mu_end.len() });
    }
    if let Some(i) = mu_begin.iter().position(|&v| !(v > T::zero())) {
        return Err(DiagnosticsError::ZeroWeight { index: i, value: to_f64(mu_begin[i]) });
    }
    Ok(mu_begin.iter().zip(mu_end).map(|(&b, &e)| -b.ln() * (e - b)).sum())
}

/// `E(l) = Σ_{k<=l} D(k)`.
pub fn cumulative_e<T: Scalar>(d: &[T]) -> Vec<T> {
    let mut acc = T::zero();
    d.iter()
        .map(|&v| {
            acc = acc + v;
            acc
        })
        .collect()
}

/// `Σ_i min(x_i, cap)`.
pub fn diversity_capped<T: Scalar>(x: &[T], cap: T) -> Result<T, DiagnosticsError> {
    if !(cap > T::zero()) {
        return Err(DiagnosticsError::Cap(to_f64(cap)));
    }
    Ok(x.iter().map(|&v| v.min(cap)).sum())
}

/// `D(t_l)` for every day over that day's members.
pub fn direction_series<T: Scalar>(path: &MarketPath<T>) -> Result<Vec<T>, DiagnosticsError> {
    (0..path.n_days())
        .map(|l| {
            let members = path.members(l);
            let b = path.begin_weights(l);
            let e = path.end_of_day(l).1;
            let pick = |w: &[T]| members.iter().map(|&i| w[i]).collect::<Vec<_>>();
            direction_indicator(&pick(b.as_slice()), &pick(e.as_slice()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSeries<T> {
    pub d_indicator: Vec<T>,
    pub e_cumulative: Vec<T>,
    /// Capped diversity of the end-of-day weights.
    pub diversity_capped: Vec<T>,
    pub cap: T,
    /// Days whose member set differs from the previous day; `D` there is
    /// computed over the surviving members.
    pub flagged_days: Vec<usize>,
}

impl<T: Scalar> DiagnosticsSeries<T> {
    /// `cap` defaults to `1/d`.
    pub fn compute(path: &MarketPath<T>, cap: Option<T>) -> Result<Self, DiagnosticsError> {
        let cap = cap.unwrap_or_else(|| lit(1.0 / path.n_assets() as f64));
        let d_indicator = direction_series(path)?;
        let diversity = (0..path.n_days())
            .map(|l| diversity_capped(path.end_of_day(l).1.as_slice(), cap))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            e_cumulative: cumulative_e(&d_indicator),
            d_indicator,
            diversity_capped: diversity,
            cap,
            flagged_days: (0..path.n_days()).filter(|&l| path.membership_changed(l)).collect(),
        })
    }
}
