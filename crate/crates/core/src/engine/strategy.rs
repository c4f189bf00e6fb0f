use crate::genfun::Generator;
use crate::num::{lit, to_f64, Scalar};

use super::{at_day, gather, restrict_lambda, scatter, EngineError, POSITIVITY_FLOOR};

fn members_of(membership: &[bool]) -> Vec<usize> {
    membership.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}

/// `θ_i = DG_i(Λ(t_l), μ̲_l)` for members, 0 otherwise. `lambda_row` is the
/// full `Λ(t_l)` row; `mu_begin` is full width.
pub fn theta_additive<T: Scalar, G: Generator<T> + ?Sized>(
    g: &G,
    l: usize,
    lambda_row: &[T],
    mu_begin: &[T],
    membership: &[bool],
) -> Result<Vec<T>, EngineError> {
    let members = members_of(membership);
    let lambda = restrict_lambda(g.lambda_arity(), lambda_row, &members, mu_begin.len())?;
    let dg = g.gradient(&lambda, &gather(mu_begin, &members)).map_err(at_day(l))?;
    Ok(scatter(&dg, &members, mu_begin.len()))
}

/// `Σ_{k<l} ΔΓ(t_k) / G^(c)(Λ(t_k), μ̲_k)` for `l = gamma.len()`.
///
/// `gamma` holds `Γ` of the shifted generator and `g_begin` the shifted
/// begin-of-day values, both for days `0..l`.
pub fn multiplicative_exponent<T: Scalar>(gamma: &[T], g_begin: &[T]) -> Result<T, EngineError> {
    let floor: T = lit(POSITIVITY_FLOOR);
    let mut prev = T::zero();
    let mut sum = T::zero();
    for (k, (&gk, &den)) in gamma.iter().zip(g_begin).enumerate() {
        if !(den >= floor) {
            return Err(EngineError::Positivity { day: k, value: to_f64(den), floor: POSITIVITY_FLOOR });
        }
        sum = sum + (gk - prev) / den;
        prev = gk;
    }
    Ok(sum)
}

/// `θ̃_i = DG^(c)_i(Λ(t_l), μ̲_l) · exp(exponent)`, `g` already shifted.
pub fn theta_multiplicative<T: Scalar, G: Generator<T> + ?Sized>(
    g: &G,
    l: usize,
    lambda_row: &[T],
    mu_begin: &[T],
    membership: &[bool],
    exponent: T,
) -> Result<Vec<T>, EngineError> {
    let factor = exponent.exp();
    Ok(theta_additive(g, l, lambda_row, mu_begin, membership)?.into_iter().map(|v| v * factor).collect())
}

/// `C = Σ θ_j μ̲_j - v` over members and `φ_i = θ_i - C` for members,
/// `φ_i = 0` otherwise.
pub fn self_financing_convert<T: Scalar>(theta: &[T], mu_begin: &[T], membership: &[bool], v_begin: T) -> (Vec<T>, T) {
    let held: T = theta
        .iter()
        .zip(mu_begin)
        .zip(membership)
        .filter(|(_, &m)| m)
        .map(|((&t, &w), _)| t * w)
        .sum();
    let c = held - v_begin;
    let phi = theta.iter().zip(membership).map(|(&t, &m)| if m { t - c } else { T::zero() }).collect();
    (phi, c)
}
