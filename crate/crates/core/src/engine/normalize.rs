use crate::genfun::{Domain, DomainError, GammaStep, Generator, LambdaArity, LyapunovHint};
use crate::lambda::LambdaPath;
use crate::marketdata::MarketPath;
use crate::num::{to_f64, Scalar};

use super::{check_grid, day_inputs, EngineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// `𝒢 = G / G(Λ(0), μ(0))`.
    Divide,
    /// `𝒢 = G + 1`, used when the initial value is exactly zero.
    ShiftPlusOne,
}

/// A generator rescaled to initial value 1, optionally shifted to
/// `G^(c) = (𝒢 + c) / (1 + c)`.
#[derive(Debug, Clone)]
pub struct NormalizedGen<T, G> {
    base: G,
    g0: T,
    mode: NormMode,
    c_shift: T,
    name: String,
}

/// Normalizes `g` at `(λ0, μ0)`; `μ0` holds the member weights only.
pub fn normalize<T: Scalar, G: Generator<T>>(g: G, lambda0: &[T], mu0: &[T]) -> Result<NormalizedGen<T, G>, EngineError> {
    let g0 = g.value(lambda0, mu0).map_err(|source| EngineError::Domain { day: 0, source })?;
    if g0 < T::zero() {
        return Err(EngineError::NegativeInitialValue { value: to_f64(g0) });
    }
    let mode = if g0 > T::zero() { NormMode::Divide } else { NormMode::ShiftPlusOne };
    let name = g.name().to_string();
    Ok(NormalizedGen { base: g, g0, mode, c_shift: T::zero(), name })
}

/// Normalizes `g` at the first day of `path`, restricting `λ` and the
/// weights to that day's members.
pub fn normalize_at_start<T: Scalar, G: Generator<T>>(
    g: G,
    path: &MarketPath<T>,
    lam: &LambdaPath<T>,
) -> Result<NormalizedGen<T, G>, EngineError> {
    check_grid(path, lam)?;
    let day = day_inputs(&g, path, lam, 0)?;
    normalize(g, &day.lambda, &day.begin)
}

impl<T: Scalar, G: Generator<T>> NormalizedGen<T, G> {
    pub fn base(&self) -> &G {
        &self.base
    }

    pub fn g0(&self) -> T {
        self.g0
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }

    pub fn c_shift(&self) -> T {
        self.c_shift
    }

    /// Same normalization with shift `c >= 0`.
    pub fn with_shift(&self, c: T) -> Result<Self, EngineError>
    where
        G: Clone,
    {
        if !(c >= T::zero() && c.is_finite()) {
            return Err(EngineError::Config(format!("c must be finite and >= 0, got {c}")));
        }
        Ok(Self { c_shift: c, ..self.clone() })
    }

    fn denom(&self) -> T {
        match self.mode {
            NormMode::Divide => self.g0,
            NormMode::ShiftPlusOne => T::one(),
        }
    }

    fn offset(&self) -> T {
        match self.mode {
            NormMode::Divide => T::zero(),
            NormMode::ShiftPlusOne => T::one(),
        }
    }

    /// `𝒢(λ, x)` without the `c` shift.
    pub fn normalized_value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        Ok((self.base.value(lambda, x)? + self.offset()) / self.denom())
    }

    /// Applies the `c` shift to a normalized value.
    pub fn shift(&self, normalized: T) -> T {
        (normalized + self.c_shift) / (T::one() + self.c_shift)
    }

    fn scale(&self) -> T {
        self.denom() * (T::one() + self.c_shift)
    }
}

impl<T: Scalar, G: Generator<T>> Generator<T> for NormalizedGen<T, G> {
    fn name(&self) -> &str {
        &self.name
    }
    fn lambda_arity(&self) -> LambdaArity {
        self.base.lambda_arity()
    }
    fn domain(&self) -> Domain {
        self.base.domain()
    }
    fn lyapunov_hint(&self) -> LyapunovHint {
        self.base.lyapunov_hint()
    }
    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        Ok(self.shift(self.normalized_value(lambda, x)?))
    }
    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError> {
        let s = self.scale();
        Ok(self.base.gradient(lambda, x)?.into_iter().map(|v| v / s).collect())
    }
    fn evaluate(&self, lambda: &[T], x: &[T]) -> Result<(T, Vec<T>), DomainError> {
        let (g, dg) = self.base.evaluate(lambda, x)?;
        let s = self.scale();
        Ok((self.shift((g + self.offset()) / self.denom()), dg.into_iter().map(|v| v / s).collect()))
    }
    fn gamma_increment(&self, step: &GammaStep<'_, T>) -> Option<Result<T, DomainError>> {
        let s = self.scale();
        self.base.gamma_increment(step).map(|r| r.map(|v| v / s))
    }
    fn has_closed_form(&self) -> bool {
        self.base.has_closed_form()
    }
    fn omits_local_time(&self) -> bool {
        self.base.omits_local_time()
    }
}
