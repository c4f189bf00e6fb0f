//! The compiled-in generator catalog.

use crate::num::{lit, Scalar};

use super::rank::rank_weights;
use super::{DomainError, Domain, GammaStep, Generator, LambdaArity, LambdaConstraint, LyapunovHint};

fn require_interior<T: Scalar>(x: &[T]) -> Result<(), DomainError> {
    match x.iter().position(|&v| !(v > T::zero())) {
        Some(i) => Err(DomainError::BoundaryWeight { index: i, value: crate::num::to_f64(x[i]) }),
        None => Ok(()),
    }
}

fn scalar_lambda<T: Scalar>(lambda: &[T]) -> Result<T, DomainError> {
    match lambda {
        [v] => Ok(*v),
        _ => Err(DomainError::LambdaLength { expected: 1, found: lambda.len() }),
    }
}

fn finite<T: Scalar>(v: T, what: &'static str) -> Result<T, DomainError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::NonFinite(what))
    }
}

/// Generalized entropy `G(λ, x) = λ Σ x_i log(1/x_i)` with
/// `D_iG = -λ (1 + log x_i)`.
pub fn entropy<T: Scalar>(lambda: T, x: &[T]) -> Result<(T, Vec<T>), DomainError> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(DomainError::Lambda { value: crate::num::to_f64(lambda), reason: "entropy needs lambda > 0" });
    }
    require_interior(x)?;
    let g = -lambda * x.iter().map(|&v| v * v.ln()).sum::<T>();
    let dg = x.iter().map(|&v| -lambda * (T::one() + v.ln())).collect();
    Ok((g, dg))
}

/// One-day `Γ` increment of the entropy generator:
/// `Σ μ log μ · ΔΛ + ½ Λ Σ (Δμ)² / μ`, left-point integrands.
pub fn entropy_gamma_increment<T: Scalar>(lambda_prev: T, lambda: T, mu_begin: &[T], mu_end: &[T]) -> T {
    let half: T = lit(0.5);
    let drift: T = mu_begin.iter().map(|&m| m * m.ln()).sum::<T>() * (lambda - lambda_prev);
    let qv: T = mu_begin
        .iter()
        .zip(mu_end)
        .map(|(&a, &b)| {
            let dm = b - a;
            dm * dm / a
        })
        .sum();
    drift + half * lambda * qv
}

fn check_power_params<T: Scalar>(lambda: &[T], x: &[T], alpha: T, p: T) -> Result<(), DomainError> {
    if lambda.len() != x.len() {
        return Err(DomainError::LambdaLength { expected: x.len(), found: lambda.len() });
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(DomainError::Parameter(format!("alpha = {alpha} outside [0, 1]")));
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(DomainError::Parameter(format!("p = {p} outside (0, 1)")));
    }
    Ok(())
}

fn blends<T: Scalar>(lambda: &[T], x: &[T], alpha: T) -> Vec<T> {
    x.iter().zip(lambda).map(|(&xi, &li)| alpha * xi + (T::one() - alpha) * li).collect()
}

/// `G(λ, x) = (Σ (αx_i + (1-α)λ_i)^p)^{1/p}`; zero blends allowed.
pub fn power_diversity_value<T: Scalar>(lambda: &[T], x: &[T], alpha: T, p: T) -> Result<T, DomainError> {
    check_power_params(lambda, x, alpha, p)?;
    let b = blends(lambda, x, alpha);
    if let Some(i) = b.iter().position(|&v| v < T::zero() || !v.is_finite()) {
        return Err(DomainError::NonPositiveBlend { index: i, value: crate::num::to_f64(b[i]) });
    }
    finite(b.iter().map(|&v| v.powf(p)).sum::<T>().powf(p.recip()), "power_diversity")
}

/// Power-diversity value and gradient
/// `D_iG = α G^{1-p} (αx_i + (1-α)λ_i)^{p-1}`; needs positive blends.
pub fn power_diversity<T: Scalar>(lambda: &[T], x: &[T], alpha: T, p: T) -> Result<(T, Vec<T>), DomainError> {
    check_power_params(lambda, x, alpha, p)?;
    let b = blends(lambda, x, alpha);
    if let Some(i) = b.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(DomainError::NonPositiveBlend { index: i, value: crate::num::to_f64(b[i]) });
    }
    let g = finite(b.iter().map(|&v| v.powf(p)).sum::<T>().powf(p.recip()), "power_diversity")?;
    let scale = alpha * g.powf(T::one() - p);
    let dg = b.iter().map(|&v| scale * v.powf(p - T::one())).collect();
    Ok((g, dg))
}

/// One-day closed-form `Γ` increment of the power-diversity generator.
///
/// The `dΛ` term is evaluated at `(Λ_prev, μ̲)`, the quadratic-variation
/// terms at `(Λ, μ̲)` with cross-variations as products of intraday moves.
pub fn power_diversity_gamma_increment<T: Scalar>(
    step: &GammaStep<'_, T>,
    alpha: T,
    p: T,
) -> Result<T, DomainError> {
    let one = T::one();
    let half: T = lit(0.5);

    // -(1-α) Σ (G/b_i)^{1-p} dΛ_i at the pre-update λ
    let (g_prev, _) = power_diversity(step.lambda_prev, step.mu_begin, alpha, p)?;
    let b_prev = blends(step.lambda_prev, step.mu_begin, alpha);
    let drift: T = b_prev
        .iter()
        .zip(step.lambda.iter().zip(step.lambda_prev))
        .map(|(&b, (&l, &lp))| (g_prev / b).powf(one - p) * (l - lp))
        .sum();

    let (g, _) = power_diversity(step.lambda, step.mu_begin, alpha, p)?;
    let b = blends(step.lambda, step.mu_begin, alpha);
    let s: T = b.iter().map(|&v| v.powf(p)).sum();
    let gp = g.powf(one - p);
    let coef = alpha * alpha * (one - p) * half;
    let dmu: Vec<T> = step.mu_end.iter().zip(step.mu_begin).map(|(&e, &s)| e - s).collect();
    // Σ_ij (b_i b_j)^{p-1} Δμ_i Δμ_j = (Σ_i b_i^{p-1} Δμ_i)²
    let lin: T = b.iter().zip(&dmu).map(|(&bi, &d)| bi.powf(p - one) * d).sum();
    let cross = gp / s * lin * lin;
    let diag: T = b.iter().zip(&dmu).map(|(&bi, &d)| gp * bi.powf(p - lit(2.0)) * d * d).sum();
    finite(-(one - alpha) * drift - coef * cross + coef * diag, "power_diversity gamma")
}

/// Concave quadratic `G(λ, x) = λ - Σ x_i²`, `D_iG = -2x_i`.
pub fn quadratic<T: Scalar>(lambda: T, x: &[T]) -> (T, Vec<T>) {
    let g = lambda - x.iter().map(|&v| v * v).sum::<T>();
    let dg = x.iter().map(|&v| -(v + v)).collect();
    (g, dg)
}

/// `-ΔΛ + Σ (Δμ_i)²`.
pub fn quadratic_gamma_increment<T: Scalar>(lambda_prev: T, lambda: T, mu_begin: &[T], mu_end: &[T]) -> T {
    let qv: T = mu_begin
        .iter()
        .zip(mu_end)
        .map(|(&a, &b)| (b - a) * (b - a))
        .sum();
    qv - (lambda - lambda_prev)
}

fn clip<T: Scalar>(raw: T, lo: T, hi: T) -> T {
    hi.min(lo.max(raw))
}

fn check_ranked<T: Scalar>(d: usize, d1: usize, d2: usize, xi_lo: T, xi_hi: T) -> Result<(), DomainError> {
    if !(1 <= d1 && d1 < d2 && d2 <= d) {
        return Err(DomainError::RankBounds { d1, d2, d });
    }
    if !(xi_lo > T::zero() && xi_lo < xi_hi) {
        return Err(DomainError::Parameter(format!("need 0 < xi_lo < xi_hi, got {xi_lo}, {xi_hi}")));
    }
    Ok(())
}

/// Ranked entropy/quadratic hybrid
/// `G = -λ Σ_{l<=d1} x_(l) log x_(l) + 1 - Σ_{d1<l<=d2} x_(l)²`
/// with `λ = ξ̄ ∧ (ξ̲ ∨ λ')`. The rank-space gradient is mapped back to assets
/// by averaging over tied ranks.
pub fn ranked_hybrid<T: Scalar>(
    lambda_raw: T,
    x: &[T],
    d1: usize,
    d2: usize,
    xi_lo: T,
    xi_hi: T,
) -> Result<(T, Vec<T>), DomainError> {
    check_ranked(x.len(), d1, d2, xi_lo, xi_hi)?;
    require_interior(x)?;
    let lambda = clip(lambda_raw, xi_lo, xi_hi);
    let ranked = rank_weights(x);

    let mut g = T::one();
    let mut rank_grad = vec![T::zero(); x.len()];
    for (l, &v) in ranked.sorted.iter().enumerate() {
        if l < d1 {
            g = g - lambda * v * v.ln();
            rank_grad[l] = -lambda * v.ln() - lambda;
        } else if l < d2 {
            g = g - v * v;
            rank_grad[l] = -(v + v);
        }
    }

    let mut dg = vec![T::zero(); x.len()];
    for group in ranked.tie_groups() {
        let n: T = lit(group.len() as f64);
        let avg = group.clone().map(|l| rank_grad[l]).sum::<T>() / n;
        for l in group {
            dg[ranked.order[l]] = avg;
        }
    }
    Ok((g, dg))
}

/// One-day closed-form `Γ` increment of the ranked hybrid with the
/// local-time terms omitted: `½ Σ_top λ (Δμ)²/μ + Σ_mid (Δμ)² + Σ_top μ log μ Δλ`,
/// ranks taken at the begin of the day and `λ` already clipped.
pub fn ranked_hybrid_gamma_increment<T: Scalar>(
    step: &GammaStep<'_, T>,
    d1: usize,
    d2: usize,
    xi_lo: T,
    xi_hi: T,
) -> Result<T, DomainError> {
    let x = step.mu_begin;
    check_ranked(x.len(), d1, d2, xi_lo, xi_hi)?;
    require_interior(x)?;
    let lambda = clip(scalar_lambda(step.lambda)?, xi_lo, xi_hi);
    let lambda_prev = clip(scalar_lambda(step.lambda_prev)?, xi_lo, xi_hi);
    let ranked = rank_weights(x);
    let half: T = lit(0.5);

    let mut coef = vec![T::zero(); x.len()];
    let mut drift = T::zero();
    for (l, &v) in ranked.sorted.iter().enumerate() {
        if l < d1 {
            coef[l] = half * lambda / v;
            drift = drift + v * v.ln();
        } else if l < d2 {
            coef[l] = T::one();
        }
    }
    let mut total = drift * (lambda - lambda_prev);
    for group in ranked.tie_groups() {
        let n: T = lit(group.len() as f64);
        let avg = group.clone().map(|l| coef[l]).sum::<T>() / n;
        for l in group {
            let i = ranked.order[l];
            let dm = step.mu_end[i] - x[i];
            total = total + avg * dm * dm;
        }
    }
    finite(total, "ranked_hybrid gamma")
}

/// Catalog entries addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Catalog<T> {
    Entropy,
    PowerDiversity { alpha: T, p: T },
    Quadratic,
    RankedHybrid { d1: usize, d2: usize, xi_lo: T, xi_hi: T },
    /// `G ≡ 1` with `DG ≡ 1`: the market portfolio.
    Market,
}

impl<T: Scalar> Catalog<T> {
    pub const NAMES: [&'static str; 5] = ["entropy", "power_diversity", "quadratic", "ranked_hybrid", "market"];
}

impl<T: Scalar> Generator<T> for Catalog<T> {
    fn name(&self) -> &str {
        match self {
            Catalog::Entropy => "entropy",
            Catalog::PowerDiversity { .. } => "power_diversity",
            Catalog::Quadratic => "quadratic",
            Catalog::RankedHybrid { .. } => "ranked_hybrid",
            Catalog::Market => "market",
        }
    }

    fn lambda_arity(&self) -> LambdaArity {
        match self {
            Catalog::PowerDiversity { .. } => LambdaArity::PerAsset,
            Catalog::Market => LambdaArity::Ignored,
            _ => LambdaArity::Scalar,
        }
    }

    fn domain(&self) -> Domain {
        match self {
            Catalog::Entropy => Domain { open_simplex: true, lambda: LambdaConstraint::Positive, concave_in_x: true },
            Catalog::PowerDiversity { .. } => {
                Domain { open_simplex: true, lambda: LambdaConstraint::Positive, concave_in_x: true }
            }
            Catalog::Quadratic => Domain { open_simplex: false, lambda: LambdaConstraint::Any, concave_in_x: true },
            Catalog::RankedHybrid { .. } => {
                Domain { open_simplex: true, lambda: LambdaConstraint::Any, concave_in_x: false }
            }
            Catalog::Market => Domain { open_simplex: false, lambda: LambdaConstraint::Any, concave_in_x: true },
        }
    }

    fn lyapunov_hint(&self) -> LyapunovHint {
        match self {
            Catalog::Entropy => LyapunovHint::IfLambdaNonIncreasing,
            Catalog::Market => LyapunovHint::Always,
            _ => LyapunovHint::NeverInGeneral,
        }
    }

    fn value(&self, lambda: &[T], x: &[T]) -> Result<T, DomainError> {
        match self {
            Catalog::PowerDiversity { alpha, p } => power_diversity_value(lambda, x, *alpha, *p),
            Catalog::Quadratic => Ok(quadratic(scalar_lambda(lambda)?, x).0),
            Catalog::Market => Ok(T::one()),
            _ => self.evaluate(lambda, x).map(|(g, _)| g),
        }
    }

    fn gradient(&self, lambda: &[T], x: &[T]) -> Result<Vec<T>, DomainError> {
        match self {
            Catalog::Market => Ok(vec![T::one(); x.len()]),
            _ => self.evaluate(lambda, x).map(|(_, dg)| dg),
        }
    }

    fn evaluate(&self, lambda: &[T], x: &[T]) -> Result<(T, Vec<T>), DomainError> {
        match self {
            Catalog::Entropy => entropy(scalar_lambda(lambda)?, x),
            Catalog::PowerDiversity { alpha, p } => power_diversity(lambda, x, *alpha, *p),
            Catalog::Quadratic => Ok(quadratic(scalar_lambda(lambda)?, x)),
            Catalog::RankedHybrid { d1, d2, xi_lo, xi_hi } => {
                ranked_hybrid(scalar_lambda(lambda)?, x, *d1, *d2, *xi_lo, *xi_hi)
            }
            Catalog::Market => Ok((T::one(), vec![T::one(); x.len()])),
        }
    }

    fn gamma_increment(&self, step: &GammaStep<'_, T>) -> Option<Result<T, DomainError>> {
        let scalars = || Ok::<_, DomainError>((scalar_lambda(step.lambda_prev)?, scalar_lambda(step.lambda)?));
        Some(match self {
            Catalog::Entropy => scalars().and_then(|(lp, l)| {
                require_interior(step.mu_begin)?;
                finite(entropy_gamma_increment(lp, l, step.mu_begin, step.mu_end), "entropy gamma")
            }),
            Catalog::PowerDiversity { alpha, p } => power_diversity_gamma_increment(step, *alpha, *p),
            Catalog::Quadratic => {
                scalars().map(|(lp, l)| quadratic_gamma_increment(lp, l, step.mu_begin, step.mu_end))
            }
            Catalog::RankedHybrid { d1, d2, xi_lo, xi_hi } => {
                ranked_hybrid_gamma_increment(step, *d1, *d2, *xi_lo, *xi_hi)
            }
            Catalog::Market => Ok(T::zero()),
        })
    }

    fn has_closed_form(&self) -> bool {
        true
    }

    fn omits_local_time(&self) -> bool {
        matches!(self, Catalog::RankedHybrid { .. })
    }
}
