//! Portfolio-generating functions `G(λ, x)` and their gradient maps `DG`.
//!
//! Every generator is evaluated on the weights of the *member* assets only;
//! the engine restricts and scatters vectors around each call. `λ` has
//! length 1 for scalar generators and the member count for per-asset ones.

mod catalog;
mod conditions;
mod rank;

pub use catalog::{
    entropy, entropy_gamma_increment, power_diversity, power_diversity_gamma_increment, power_diversity_value,
    quadratic, quadratic_gamma_increment, ranked_hybrid, ranked_hybrid_gamma_increment, Catalog,
};
pub use conditions::{
    spot_check_conditions, ConcavityVerdict, ConcavityWitness, ConditionReport, LipschitzVerdict, SpotCheckConfig,
};
pub use rank::{rank_weights, RankedWeights};

use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("weight {index} = {value} is not strictly positive (open simplex required)")]
    BoundaryWeight { index: usize, value: f64 },
    #[error("lambda = {value} violates the generator domain: {reason}")]
    Lambda { value: f64, reason: &'static str },
    #[error("lambda has {found} components, generator expects {expected}")]
    LambdaLength { expected: usize, found: usize },
    #[error("blended weight {index} = {value} is not strictly positive")]
    NonPositiveBlend { index: usize, value: f64 },
    #[error("rank bounds need 1 <= d1 < d2 <= d, got d1 = {d1}, d2 = {d2}, d = {d}")]
    RankBounds { d1: usize, d2: usize, d: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite result in {0}")]
    NonFinite(&'static str),
}

/// How a generator consumes the `λ` process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaArity {
    /// One component.
    Scalar,
    /// One component per member asset; scalar paths are broadcast.
    PerAsset,
    /// `λ` is not read; any length accepted.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaConstraint {
    Any,
    Positive,
}

/// Domain metadata attached to a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    pub open_simplex: bool,
    pub lambda: LambdaConstraint,
    /// The generator claims `G(λ, ·)` is concave for fixed `λ`.
    pub concave_in_x: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovHint {
    Always,
    IfLambdaNonIncreasing,
    NeverInGeneral,
}

/// One trading day as seen by a closed-form `Γ` increment: `λ` before and
/// after the overnight update, and the intraday weight move of the members.
#[derive(Debug, Clone, Copy)]
pub struct GammaStep<'a, T> {
    pub lambda_prev: &'a [T],
    pub lambda: &'a [T],
    pub mu_begin: &'a [T],
    pub mu_end: &'a [T],
}

/// A portfolio-generating function with a measurable gradient map.
pub trait Generator<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn lambda_arity(&self) -> LambdaArity;

    fn domain(&self) -> Domain;

    fn lyapunov_hint(&self) -> LyapunovHint;

    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError>;

    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError>;

    fn evaluate(&self, lambda: &[T], x: &[T]) -> Result<(T, Vec<T>), DomainError> {
        Ok((self.value(lambda, x)?, self.gradient(lambda, x)?))
    }

    /// Discretized closed-form `Γ` increment for one day, if the generator
    /// has one.
    fn gamma_increment(&self, _step: &GammaStep<'_, T>) -> Option<Result<T, DomainError>> {
        None
    }

    /// True when [`Generator::gamma_increment`] returns `Some`.
    fn has_closed_form(&self) -> bool {
        false
    }

    /// Ranked generators drop the local-time terms of the ranked dynamics.
    fn omits_local_time(&self) -> bool {
        false
    }
}

impl<T: Scalar, G: Generator<T> + ?Sized> Generator<T> for &G {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn lambda_arity(&self) -> LambdaArity {
        (**self).lambda_arity()
    }
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn lyapunov_hint(&self) -> LyapunovHint {
        (**self).lyapunov_hint()
    }
    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        (**self).value(lambda, x)
    }
    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError> {
        (**self).gradient(lambda, x)
    }
    fn evaluate(&self, lambda: &[T], x: &[T]) -> Result<(T, Vec<T>), DomainError> {
        (**self).evaluate(lambda, x)
    }
    fn gamma_increment(&self, step: &GammaStep<'_, T>) -> Option<Result<T, DomainError>> {
        (**self).gamma_increment(step)
    }
    fn has_closed_form(&self) -> bool {
        (**self).has_closed_form()
    }
    fn omits_local_time(&self) -> bool {
        (**self).omits_local_time()
    }
}

impl<T: Scalar, G: Generator<T> + ?Sized> Generator<T> for Box<G> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn lambda_arity(&self) -> LambdaArity {
        (**self).lambda_arity()
    }
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn lyapunov_hint(&self) -> LyapunovHint {
        (**self).lyapunov_hint()
    }
    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        (**self).value(lambda, x)
    }
    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError> {
        (**self).gradient(lambda, x)
    }
    fn evaluate(&self, lambda: &[T], x: &[T]) -> Result<(T, Vec<T>), DomainError> {
        (**self).evaluate(lambda, x)
    }
    fn gamma_increment(&self, step: &GammaStep<'_, T>) -> Option<Result<T, DomainError>> {
        (**self).gamma_increment(step)
    }
    fn has_closed_form(&self) -> bool {
        (**self).has_closed_form()
    }
    fn omits_local_time(&self) -> bool {
        (**self).omits_local_time()
    }
}

/// `-G`. Its `Γ` is the negation of the base `Γ`.
#[derive(Debug, Clone)]
pub struct Negated<G> {
    base: G,
    name: String,
}

impl<G> Negated<G> {
    pub fn new<T: Scalar>(base: G) -> Self
    where
        G: Generator<T>,
    {
        let name = format!("neg_{}", base.name());
        Self { base, name }
    }
}

impl<T: Scalar, G: Generator<T>> Generator<T> for Negated<G> {
    fn name(&self) -> &str {
        &self.name
    }
    fn lambda_arity(&self) -> LambdaArity {
        self.base.lambda_arity()
    }
    fn domain(&self) -> Domain {
        Domain { concave_in_x: false, ..self.base.domain() }
    }
    fn lyapunov_hint(&self) -> LyapunovHint {
        LyapunovHint::NeverInGeneral
    }
    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        self.base.value(lambda, x).map(|v| -v)
    }
    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError> {
        Ok(self.base.gradient(lambda, x)?.into_iter().map(|v| -v).collect())
    }
    fn gamma_increment(&self, step: &GammaStep<'_, T>) -> Option<Result<T, DomainError>> {
        self.base.gamma_increment(step).map(|r| r.map(|v| -v))
    }
    fn has_closed_form(&self) -> bool {
        self.base.has_closed_form()
    }
    fn omits_local_time(&self) -> bool {
        self.base.omits_local_time()
    }
}

/// Mutation wrapper: flips the sign of `DG` while keeping `G`. Used to check
/// that the verification suite catches a wrong gradient.
#[derive(Debug, Clone)]
pub struct FlippedGradient<G>(pub G);

impl<T: Scalar, G: Generator<T>> Generator<T> for FlippedGradient<G> {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn lambda_arity(&self) -> LambdaArity {
        self.0.lambda_arity()
    }
    fn domain(&self) -> Domain {
        self.0.domain()
    }
    fn lyapunov_hint(&self) -> LyapunovHint {
        self.0.lyapunov_hint()
    }
    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        self.0.value(lambda, x)
    }
    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError> {
        Ok(self.0.gradient(lambda, x)?.into_iter().map(|v| -v).collect())
    }
}

type ValueFn<T> = dyn Fn(&[T], &[T]) -> T + Send + Sync;
type GradientFn<T> = dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync;

/// Generator assembled from closures, for test functions outside the catalog.
pub struct FnGenerator<T> {
    name: String,
    arity: LambdaArity,
    domain: Domain,
    value: Box<ValueFn<T>>,
    gradient: Box<GradientFn<T>>,
}

impl<T: Scalar> FnGenerator<T> {
    pub fn new(
        name: impl Into<String>,
        arity: LambdaArity,
        domain: Domain,
        value: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), arity, domain, value: Box::new(value), gradient: Box::new(gradient) }
    }

    /// `x ↦ Σ x_i²`, convex; a known concavity violator.
    pub fn sum_of_squares() -> Self {
        Self::new(
            "sum_of_squares",
            LambdaArity::Ignored,
            Domain { open_simplex: false, lambda: LambdaConstraint::Any, concave_in_x: false },
            |_, x| x.iter().map(|&v| v * v).sum(),
            |_, x| x.iter().map(|&v| v + v).collect(),
        )
    }
}

impl<T: Scalar> Generator<T> for FnGenerator<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn lambda_arity(&self) -> LambdaArity {
        self.arity
    }
    fn domain(&self) -> Domain {
        self.domain
    }
    fn lyapunov_hint(&self) -> LyapunovHint {
        LyapunovHint::NeverInGeneral
    }
    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        let v = (self.value)(lambda, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError::NonFinite("closure generator value"))
        }
    }
    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError> {
        Ok((self.gradient)(lambda, x))
    }
}
