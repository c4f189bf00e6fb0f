//! The finite-variation process `Λ` on the trading grid and the realized
//! quadratic-variation estimator some of its variants are built from.
//!
//! Grid values are the process: `Λ(t_l)` is used both for the begin-of-day
//! strategy and for the end-of-day generator value of day `l`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{MarketPath, WeightVector};
use crate::num::{lit, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LambdaError {
    #[error("invalid lambda configuration: {0}")]
    Config(String),
    #[error("begin/end weight series differ: {begin} begin vs {end} end entries")]
    LengthMismatch { begin: usize, end: usize },
    #[error("day {day}: begin and end weights have different widths")]
    WidthMismatch { day: usize },
    #[error("lambda kind {kind} claims {claim} but day {day} violates it")]
    Monotonicity { kind: &'static str, claim: &'static str, day: usize },
}

fn one() -> f64 {
    1.0
}
fn default_rate() -> f64 {
    1e-4
}
fn default_qv_scale() -> f64 {
    100.0
}
fn default_window() -> usize {
    250
}

/// Constructor descriptor, also the `lambda = { kind = ... }` config schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaKind {
    /// `Λ ≡ value`.
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `Λ(t_l) = exp(rate · l)`.
    ExpDeterministic {
        #[serde(default = "default_rate")]
        rate: f64,
    },
    /// `Λ(t_l) = exp(scale · Σ_j QV_j(t_l))`.
    ExpQv {
        #[serde(default = "default_qv_scale")]
        scale: f64,
    },
    /// `Λ(t_l) = scale · Σ_j QV_j(t_l)`.
    QvLinear { scale: f64 },
    /// Per-asset flat average of the last `window` begin-of-day weights,
    /// padded with the day-0 weights.
    MovingAverage {
        #[serde(default = "default_window")]
        window: usize,
    },
    /// `ξ_hi ∧ (ξ_lo ∨ Λ')` applied componentwise to an inner kind.
    Clip { xi_lo: f64, xi_hi: f64, inner: Box<LambdaKind> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Constant,
    NonDecreasing,
    NonIncreasing,
}

impl LambdaKind {
    pub fn label(&self) -> &'static str {
        match self {
            LambdaKind::Constant { .. } => "constant",
            LambdaKind::ExpDeterministic { .. } => "exp_deterministic",
            LambdaKind::ExpQv { .. } => "exp_qv",
            LambdaKind::QvLinear { .. } => "qv_linear",
            LambdaKind::MovingAverage { .. } => "moving_average",
            LambdaKind::Clip { .. } => "clip",
        }
    }

    fn sign_monotonicity(s: f64) -> Monotonicity {
        if s > 0.0 {
            Monotonicity::NonDecreasing
        } else if s < 0.0 {
            Monotonicity::NonIncreasing
        } else {
            Monotonicity::Constant
        }
    }

    /// Monotonicity this kind guarantees on every sample path, if any.
    pub fn declared_monotonicity(&self) -> Option<Monotonicity> {
        match self {
            LambdaKind::Constant { .. } => Some(Monotonicity::Constant),
            LambdaKind::ExpDeterministic { rate } => Some(Self::sign_monotonicity(*rate)),
            LambdaKind::ExpQv { scale } | LambdaKind::QvLinear { scale } => Some(Self::sign_monotonicity(*scale)),
            LambdaKind::MovingAverage { .. } => None,
            // clipping is monotone, so it preserves the inner claim
            LambdaKind::Clip { inner, .. } => inner.declared_monotonicity(),
        }
    }

    pub fn validate(&self) -> Result<(), LambdaError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(LambdaError::Config(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            LambdaKind::Constant { value } => finite("value", *value),
            LambdaKind::ExpDeterministic { rate } => finite("rate", *rate),
            LambdaKind::ExpQv { scale } | LambdaKind::QvLinear { scale } => finite("scale", *scale),
            LambdaKind::MovingAverage { window } => {
                if *window >= 1 {
                    Ok(())
                } else {
                    Err(LambdaError::Config("moving-average window must be at least 1 day".into()))
                }
            }
            LambdaKind::Clip { xi_lo, xi_hi, inner } => {
                if !(*xi_lo > 0.0 && xi_lo < xi_hi && xi_hi.is_finite()) {
                    return Err(LambdaError::Config(format!("clip needs 0 < xi_lo < xi_hi, got {xi_lo}, {xi_hi}")));
                }
                inner.validate()
            }
        }
    }
}

/// `Λ` on the grid: `n_days × dim` values.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPath<T> {
    values: Vec<T>,
    dim: usize,
    kind: LambdaKind,
    fv_bound: Option<T>,
}

impl<T: Scalar> LambdaPath<T> {
    /// Wraps explicit values (row per day) under a descriptive kind.
    pub fn from_rows(rows: Vec<Vec<T>>, kind: LambdaKind) -> Result<Self, LambdaError> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(LambdaError::Config("lambda rows must be non-empty and equally wide".into()));
        }
        Ok(Self { values: rows.into_iter().flatten().collect(), dim, kind, fv_bound: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_days(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn at(&self, l: usize) -> &[T] {
        &self.values[l * self.dim..(l + 1) * self.dim]
    }

    pub fn kind(&self) -> &LambdaKind {
        &self.kind
    }

    /// Declared total-variation bound, where the kind gives one in closed form.
    pub fn fv_bound(&self) -> Option<T> {
        self.fv_bound
    }

    /// Realized total variation `Σ_l |Λ(t_l) - Λ(t_{l-1})|` per component.
    pub fn total_variation(&self) -> Vec<T> {
        let mut tv = vec![T::zero(); self.dim];
        for l in 1..self.n_days() {
            for (acc, (&a, &b)) in tv.iter_mut().zip(self.at(l).iter().zip(self.at(l - 1))) {
                *acc = *acc + (a - b).abs();
            }
        }
        tv
    }

    pub fn is_monotone(&self, claim: Monotonicity) -> Result<(), usize> {
        for l in 1..self.n_days() {
            for (&a, &b) in self.at(l).iter().zip(self.at(l - 1)) {
                let ok = match claim {
                    Monotonicity::Constant => a == b,
                    Monotonicity::NonDecreasing => a >= b,
                    Monotonicity::NonIncreasing => a <= b,
                };
                if !ok {
                    return Err(l);
                }
            }
        }
        Ok(())
    }
}

/// Cumulative realized quadratic variation per asset, `n_days × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QvPath<T> {
    values: Vec<T>,
    d: usize,
}

impl<T: Scalar> QvPath<T> {
    pub fn at(&self, l: usize) -> &[T] {
        &self.values[l * self.d..(l + 1) * self.d]
    }

    pub fn n_days(&self) -> usize {
        self.values.len().checked_div(self.d).unwrap_or(0)
    }

    /// `Σ_i QV_i(t_l)`.
    pub fn total(&self, l: usize) -> T {
        self.at(l).iter().copied().sum()
    }
}

/// `QV_i(t_l) = Σ_{k<=l} (μ_i(t̄_k) - μ_i(t̲_k))²`.
pub fn realized_qv<T: Scalar>(begin: &[WeightVector<T>], end: &[WeightVector<T>]) -> Result<QvPath<T>, LambdaError> {
    if begin.len() != end.len() {
        return Err(LambdaError::LengthMismatch { begin: begin.len(), end: end.len() });
    }
    let d = begin.first().map_or(0, WeightVector::len);
    let mut values = Vec::with_capacity(begin.len() * d);
    let mut acc = vec![T::zero(); d];
    for (k, (b, e)) in begin.iter().zip(end).enumerate() {
        if b.len() != d || e.len() != d {
            return Err(LambdaError::WidthMismatch { day: k });
        }
        for (i, a) in acc.iter_mut().enumerate() {
            let dm = e[i] - b[i];
            *a = *a + dm * dm;
        }
        values.extend_from_slice(&acc);
    }
    Ok(QvPath { values, d })
}

/// Realized QV of a market path's intraday weight moves.
pub fn market_qv<T: Scalar>(path: &MarketPath<T>) -> QvPath<T> {
    let begin: Vec<_> = (0..path.n_days()).map(|l| path.begin_weights(l)).collect();
    let end: Vec<_> = (0..path.n_days()).map(|l| path.end_of_day(l).1).collect();
    realized_qv(&begin, &end).expect("aligned by construction")
}

fn build_values<T: Scalar>(kind: &LambdaKind, path: &MarketPath<T>) -> (Vec<Vec<T>>, Option<T>) {
    let n = path.n_days();
    match kind {
        LambdaKind::Constant { value } => (vec![vec![lit(*value)]; n], Some(T::zero())),
        LambdaKind::ExpDeterministic { rate } => {
            let rows = (0..n).map(|l| vec![(lit::<T>(*rate) * lit(l as f64)).exp()]).collect();
            let last = (lit::<T>(*rate) * lit(n.saturating_sub(1) as f64)).exp();
            (rows, Some((last - T::one()).abs()))
        }
        LambdaKind::ExpQv { scale } => {
            let qv = market_qv(path);
            ((0..n).map(|l| vec![(lit::<T>(*scale) * qv.total(l)).exp()]).collect(), None)
        }
        LambdaKind::QvLinear { scale } => {
            let qv = market_qv(path);
            ((0..n).map(|l| vec![lit::<T>(*scale) * qv.total(l)]).collect(), None)
        }
        LambdaKind::MovingAverage { window } => {
            let weights: Vec<WeightVector<T>> = (0..n).map(|l| path.begin_weights(l)).collect();
            let delta: T = lit(*window as f64);
            let rows = (0..n)
                .map(|l| {
                    let mut sum = vec![T::zero(); path.n_assets()];
                    for k in (l as i64 - *window as i64 + 1)..=(l as i64) {
                        let w = &weights[k.max(0) as usize];
                        for (s, &v) in sum.iter_mut().zip(w.as_slice()) {
                            *s = *s + v;
                        }
                    }
                    sum.into_iter().map(|s| s / delta).collect()
                })
                .collect();
            (rows, None)
        }
        LambdaKind::Clip { xi_lo, xi_hi, inner } => {
            let (rows, _) = build_values(inner, path);
            let (lo, hi) = (lit::<T>(*xi_lo), lit::<T>(*xi_hi));
            let rows = rows.into_iter().map(|r| r.into_iter().map(|v| hi.min(lo.max(v))).collect()).collect();
            (rows, None)
        }
    }
}

/// Builds `Λ` of the requested kind on the grid of `path`.
pub fn build_lambda<T: Scalar>(kind: &LambdaKind, path: &MarketPath<T>) -> Result<LambdaPath<T>, LambdaError> {
    kind.validate()?;
    let (rows, fv_bound) = build_values(kind, path);
    let mut lam = LambdaPath::from_rows(rows, kind.clone())?;
    lam.fv_bound = fv_bound;
    if let Some(claim) = kind.declared_monotonicity() {
        lam.is_monotone(claim).map_err(|day| LambdaError::Monotonicity {
            kind: kind.label(),
            claim: match claim {
                Monotonicity::Constant => "constant",
                Monotonicity::NonDecreasing => "non-decreasing",
                Monotonicity::NonIncreasing => "non-increasing",
            },
            day,
        })?;
    }
    Ok(lam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wv(v: &[f64]) -> WeightVector<f64> {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn moving_path() -> MarketPath<f64> {
        let mv = vec![vec![3.0, 1.0], vec![3.0, 1.0], vec![3.3, 0.9], vec![3.0, 1.2], vec![2.7, 1.2]];
        let tr = vec![vec![1.0, 1.0], vec![1.1, 0.9], vec![10.0 / 11.0, 4.0 / 3.0], vec![0.9, 1.0], vec![1.0, 1.0]];
        MarketPath::synthetic(mv, tr).unwrap()
    }

    #[test]
    fn qv_examples() {
        let b = [wv(&[0.6, 0.4])];
        let e = [wv(&[0.5, 0.5])];
        let qv = realized_qv(&b, &e).unwrap();
        assert!((qv.at(0)[0] - 0.01).abs() < 1e-16 && (qv.at(0)[1] - 0.01).abs() < 1e-16);
        let b2 = [wv(&[0.6, 0.4]), wv(&[0.6, 0.4])];
        let e2 = [wv(&[0.5, 0.5]), wv(&[0.5, 0.5])];
        let qv = realized_qv(&b2, &e2).unwrap();
        assert!((qv.at(1)[0] - 0.02).abs() < 1e-16);
        let flat = [wv(&[0.3, 0.7]), wv(&[0.3, 0.7])];
        let qv = realized_qv(&flat, &flat).unwrap();
        assert_eq!(qv.total(1), 0.0);
        assert!(matches!(realized_qv(&b2, &e), Err(LambdaError::LengthMismatch { .. })));
    }

    #[test]
    fn market_qv_starts_at_zero() {
        let qv = market_qv(&moving_path());
        assert_eq!(qv.total(0), 0.0);
        for l in 1..5 {
            assert!(qv.total(l) >= qv.total(l - 1));
        }
    }

    #[test]
    fn constant_kind() {
        let lam = build_lambda(&LambdaKind::Constant { value: 1.0 }, &moving_path()).unwrap();
        assert_eq!(lam.dim(), 1);
        assert!((0..5).all(|l| lam.at(l) == [1.0]));
    }

    #[test]
    fn exp_deterministic_decreasing() {
        let lam = build_lambda(&LambdaKind::ExpDeterministic { rate: -1e-4 }, &moving_path()).unwrap();
        for l in 0..5 {
            assert_eq!(lam.at(l)[0], (-1e-4 * l as f64).exp());
        }
        for l in 1..5 {
            assert!(lam.at(l)[0] < lam.at(l - 1)[0]);
        }
        let tv = lam.total_variation()[0];
        assert!((tv - lam.fv_bound().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn moving_average_of_constant_weights() {
        let mv = vec![vec![3.0, 1.0]; 6];
        let tr = vec![vec![1.0, 1.0]; 6];
        let path = MarketPath::<f64>::synthetic(mv, tr).unwrap();
        let lam = build_lambda(&LambdaKind::MovingAverage { window: 4 }, &path).unwrap();
        assert_eq!(lam.dim(), 2);
        for l in 0..6 {
            assert!((lam.at(l)[0] - 0.75).abs() < 1e-15 && (lam.at(l)[1] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn moving_average_window_and_padding() {
        let path = moving_path();
        let lam = build_lambda(&LambdaKind::MovingAverage { window: 2 }, &path).unwrap();
        let w = |l: usize| path.begin_weights(l)[0];
        assert!((lam.at(0)[0] - w(0)).abs() < 1e-15);
        assert!((lam.at(3)[0] - 0.5 * (w(2) + w(3))).abs() < 1e-15);
    }

    #[test]
    fn exp_qv_sign_follows_scale() {
        let path = moving_path();
        let up = build_lambda(&LambdaKind::ExpQv { scale: 100.0 }, &path).unwrap();
        let down = build_lambda(&LambdaKind::ExpQv { scale: -100.0 }, &path).unwrap();
        assert_eq!(up.at(0), [1.0]);
        assert!(up.is_monotone(Monotonicity::NonDecreasing).is_ok());
        assert!(down.is_monotone(Monotonicity::NonIncreasing).is_ok());
        assert!(up.at(4)[0] > 1.0 && down.at(4)[0] < 1.0);
    }

    #[test]
    fn clip_bounds_output() {
        let kind = LambdaKind::Clip {
            xi_lo: 0.9,
            xi_hi: 1.0 + 2e-4,
            inner: Box::new(LambdaKind::ExpDeterministic { rate: 1e-4 }),
        };
        let lam = build_lambda(&kind, &moving_path()).unwrap();
        assert!((0..5).all(|l| lam.at(l)[0] >= 0.9 && lam.at(l)[0] <= 1.0 + 2e-4));
        assert_eq!(lam.at(4)[0], 1.0 + 2e-4);
    }

    #[test]
    fn invalid_params_rejected() {
        let path = moving_path();
        assert!(build_lambda(&LambdaKind::MovingAverage { window: 0 }, &path).is_err());
        let bad_clip = LambdaKind::Clip { xi_lo: 2.0, xi_hi: 1.0, inner: Box::new(LambdaKind::Constant { value: 1.0 }) };
        assert!(build_lambda(&bad_clip, &path).is_err());
        assert!(build_lambda(&LambdaKind::ExpDeterministic { rate: f64::NAN }, &path).is_err());
    }

    #[test]
    fn config_schema_parses() {
        let k: LambdaKind = serde_json::from_str(r#"{"kind":"exp_deterministic"}"#).unwrap();
        assert_eq!(k, LambdaKind::ExpDeterministic { rate: 1e-4 });
        let k: LambdaKind =
            serde_json::from_str(r#"{"kind":"clip","xi_lo":0.5,"xi_hi":2,"inner":{"kind":"exp_qv","scale":-100}}"#)
                .unwrap();
        assert_eq!(k.declared_monotonicity(), Some(Monotonicity::NonIncreasing));
        assert!(serde_json::from_str::<LambdaKind>(r#"{"kind":"constant","rate":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn qv_permutation_equivariant(
            rows in proptest::collection::vec(proptest::collection::vec(0.05f64..1.0, 4), 2..8),
            shift in 0usize..4,
        ) {
            let norm = |r: &Vec<f64>| { let s: f64 = r.iter().sum(); r.iter().map(|v| v / s).collect::<Vec<_>>() };
            let begin: Vec<_> = rows.iter().map(|r| WeightVector::new(norm(r)).unwrap()).collect();
            let end: Vec<_> = rows.iter().rev().map(|r| WeightVector::new(norm(r)).unwrap()).collect();
            let rot = |w: &WeightVector<f64>| {
                let mut v = w.as_slice().to_vec();
                v.rotate_left(shift);
                WeightVector::new(v).unwrap()
            };
            let qv = realized_qv(&begin, &end).unwrap();
            let qv_rot = realized_qv(
                &begin.iter().map(rot).collect::<Vec<_>>(),
                &end.iter().map(rot).collect::<Vec<_>>(),
            ).unwrap();
            for l in 0..rows.len() {
                let mut a = qv.at(l).to_vec();
                a.rotate_left(shift);
                prop_assert_eq!(a, qv_rot.at(l).to_vec());
                if l > 0 {
                    for i in 0..4 {
                        prop_assert!(qv.at(l)[i] >= qv.at(l - 1)[i]);
                    }
                }
            }
        }
    }
}
