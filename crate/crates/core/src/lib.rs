//! Functionally generated trading strategies driven by an extra
//! finite-variation process `Λ`.
//!
//! The crate covers the whole daily pipeline: market paths ([`marketdata`],
//! [`simulate`]), generating functions ([`genfun`]), the `Λ` process
//! ([`lambda`]), the backtest engine with both `Γ` routes ([`engine`]) and the
//! diversification diagnostics with report output ([`diagnostics`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod engine;
pub mod genfun;
pub mod lambda;
pub mod marketdata;
pub mod num;
pub mod simulate;

pub use num::Scalar;

pub type MarketPathF64 = marketdata::MarketPath<f64>;
pub type MarketPathF32 = marketdata::MarketPath<f32>;
pub type WeightsF64 = marketdata::WeightVector<f64>;
pub type LambdaPathF64 = lambda::LambdaPath<f64>;
pub type GammaPathF64 = engine::GammaPath<f64>;
pub type LedgerF64 = engine::StrategyLedger<f64>;
pub type CatalogF64 = genfun::Catalog<f64>;
