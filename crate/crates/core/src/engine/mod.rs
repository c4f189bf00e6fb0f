//! `Γ` by two routes, additive and multiplicative strategies, and the daily
//! backtest loop with self-financing conversion.
//!
//! Generators only ever see the member assets of a day: weights and per-asset
//! `λ` components are restricted to members before evaluation and results are
//! scattered back with zeros for non-members.

mod arbitrage;
mod backtest;
mod gamma;
mod normalize;
mod strategy;

pub use arbitrage::{arbitrage_check, max_drawdown, ArbitrageVerdict};
pub use backtest::{run_backtest, BacktestFailure, BacktestOutput, LedgerDay, StrategyLedger};
pub use gamma::{gamma_closed, gamma_defect, GammaPath, GammaRoute};
pub use normalize::{normalize, normalize_at_start, NormMode, NormalizedGen};
pub use strategy::{multiplicative_exponent, self_financing_convert, theta_additive, theta_multiplicative};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genfun::{DomainError, Generator, LambdaArity};
use crate::lambda::LambdaPath;
use crate::marketdata::MarketPath;
use crate::num::Scalar;

/// Floor for `G^(c)` in the multiplicative exponent.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("day {day}: {source}")]
    Domain {
        day: usize,
        #[source]
        source: DomainError,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("initial generator value {value} is negative; normalization needs G(Λ(0), μ(0)) >= 0")]
    NegativeInitialValue { value: f64 },
    #[error("day {day}: G^(c) = {value:e} fell below the positivity floor {floor:e}; increase c")]
    Positivity { day: usize, value: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Additive,
    Multiplicative,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Additive => "additive",
            Mode::Multiplicative => "multiplicative",
        }
    }
}

/// Restricts a `λ` row to the members of a day according to the generator's
/// arity. Scalar rows are broadcast to per-asset generators; a vector row
/// cannot feed a scalar generator.
pub fn restrict_lambda<T: Scalar>(
    arity: LambdaArity,
    row: &[T],
    members: &[usize],
    n_assets: usize,
) -> Result<Vec<T>, EngineError> {
    match arity {
        LambdaArity::Ignored => Ok(row.to_vec()),
        LambdaArity::Scalar if row.len() == 1 => Ok(row.to_vec()),
        LambdaArity::Scalar => Err(EngineError::Config(format!(
            "generator takes a scalar lambda but the lambda path has {} components",
            row.len()
        ))),
        LambdaArity::PerAsset if row.len() == 1 => Ok(vec![row[0]; members.len()]),
        LambdaArity::PerAsset if row.len() == n_assets => Ok(members.iter().map(|&i| row[i]).collect()),
        LambdaArity::PerAsset => Err(EngineError::Config(format!(
            "per-asset generator needs a lambda path with 1 or {n_assets} components, got {}",
            row.len()
        ))),
    }
}

pub(crate) fn gather<T: Copy>(v: &[T], members: &[usize]) -> Vec<T> {
    members.iter().map(|&i| v[i]).collect()
}

pub(crate) fn scatter<T: Scalar>(v: &[T], members: &[usize], n_assets: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n_assets];
    for (&i, &x) in members.iter().zip(v) {
        out[i] = x;
    }
    out
}

/// Everything a generator needs for one day, restricted to the members.
#[derive(Debug, Clone)]
pub(crate) struct DayInputs<T> {
    pub members: Vec<usize>,
    /// Full-width begin and end weights.
    pub begin_full: Vec<T>,
    pub end_full: Vec<T>,
    pub begin: Vec<T>,
    pub end: Vec<T>,
    pub lambda: Vec<T>,
    pub lambda_prev: Vec<T>,
}

pub(crate) fn check_grid<T: Scalar>(path: &MarketPath<T>, lam: &LambdaPath<T>) -> Result<(), EngineError> {
    if lam.n_days() != path.n_days() {
        return Err(EngineError::Config(format!(
            "lambda path has {} days, market path has {}",
            lam.n_days(),
            path.n_days()
        )));
    }
    Ok(())
}

pub(crate) fn day_inputs<T: Scalar, G: Generator<T> + ?Sized>(
    g: &G,
    path: &MarketPath<T>,
    lam: &LambdaPath<T>,
    l: usize,
) -> Result<DayInputs<T>, EngineError> {
    let members = path.members(l);
    let d = path.n_assets();
    let begin_full = path.begin_weights(l).into_inner();
    let end_full = path.end_of_day(l).1.into_inner();
    let lambda = restrict_lambda(g.lambda_arity(), lam.at(l), &members, d)?;
    let lambda_prev = restrict_lambda(g.lambda_arity(), lam.at(l.saturating_sub(1)), &members, d)?;
    Ok(DayInputs {
        begin: gather(&begin_full, &members),
        end: gather(&end_full, &members),
        members,
        begin_full,
        end_full,
        lambda,
        lambda_prev,
    })
}

pub(crate) fn at_day(day: usize) -> impl Fn(DomainError) -> EngineError {
    move |source| EngineError::Domain { day, source }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_restriction_rules() {
        let members = [0, 2];
        assert_eq!(restrict_lambda(LambdaArity::Scalar, &[2.0], &members, 3).unwrap(), vec![2.0]);
        assert!(restrict_lambda(LambdaArity::Scalar, &[1.0, 2.0, 3.0], &members, 3).is_err());
        assert_eq!(restrict_lambda(LambdaArity::PerAsset, &[2.0], &members, 3).unwrap(), vec![2.0, 2.0]);
        assert_eq!(restrict_lambda(LambdaArity::PerAsset, &[1.0, 2.0, 3.0], &members, 3).unwrap(), vec![1.0, 3.0]);
        assert!(restrict_lambda(LambdaArity::PerAsset, &[1.0, 2.0], &members, 3).is_err());
        assert_eq!(restrict_lambda(LambdaArity::Ignored, &[1.0, 2.0], &members, 3).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn scatter_gather_round_trip() {
        let v = [0.1, 0.0, 0.9];
        let g = gather(&v, &[0, 2]);
        assert_eq!(g, vec![0.1, 0.9]);
        assert_eq!(scatter(&g, &[0, 2], 3), v.to_vec());
    }
}
