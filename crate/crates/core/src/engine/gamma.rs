use crate::genfun::{GammaStep, Generator};
use crate::lambda::LambdaPath;
use crate::marketdata::MarketPath;
use crate::num::Scalar;

use super::{at_day, check_grid, day_inputs, EngineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaRoute {
    Defect,
    ClosedForm,
}

/// `Γ(t_l)` on the trading grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPath<T> {
    pub values: Vec<T>,
    pub route: GammaRoute,
}

impl<T: Scalar> GammaPath<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn terminal(&self) -> Option<T> {
        self.values.last().copied()
    }

    /// `Γ(t_l) - Γ(t_{l-1})` with `Γ(t_{-1}) = 0`.
    pub fn increments(&self) -> Vec<T> {
        let mut prev = T::zero();
        self.values
            .iter()
            .map(|&v| {
                let dv = v - prev;
                prev = v;
                dv
            })
            .collect()
    }
}

/// `Γ(t_l) = G(Λ(0), μ̲_0) - G(Λ(t_l), μ̄_l) + Σ_{k<=l} Σ_i DG_i(Λ(t_k), μ̲_k)(μ̄_{k,i} - μ̲_{k,i})`.
pub fn gamma_defect<T: Scalar, G: Generator<T> + ?Sized>(
    g: &G,
    path: &MarketPath<T>,
    lam: &LambdaPath<T>,
) -> Result<GammaPath<T>, EngineError> {
    check_grid(path, lam)?;
    let mut values = Vec::with_capacity(path.n_days());
    let mut start = T::zero();
    let mut integral = T::zero();
    for l in 0..path.n_days() {
        let day = day_inputs(g, path, lam, l)?;
        let (g_begin, dg) = g.evaluate(&day.lambda, &day.begin).map_err(at_day(l))?;
        if l == 0 {
            start = g_begin;
        }
        let g_end = g.value(&day.lambda, &day.end).map_err(at_day(l))?;
        integral = integral + dg.iter().zip(day.end.iter().zip(&day.begin)).map(|(&t, (&e, &b))| t * (e - b)).sum::<T>();
        values.push(start - g_end + integral);
    }
    Ok(GammaPath { values, route: GammaRoute::Defect })
}

/// Cumulative sum of the generator's closed-form daily `Γ` increments.
pub fn gamma_closed<T: Scalar, G: Generator<T> + ?Sized>(
    g: &G,
    path: &MarketPath<T>,
    lam: &LambdaPath<T>,
) -> Result<GammaPath<T>, EngineError> {
    check_grid(path, lam)?;
    let mut values = Vec::with_capacity(path.n_days());
    let mut acc = T::zero();
    for l in 0..path.n_days() {
        let day = day_inputs(g, path, lam, l)?;
        let step =
            GammaStep { lambda_prev: &day.lambda_prev, lambda: &day.lambda, mu_begin: &day.begin, mu_end: &day.end };
        let inc = g
            .gamma_increment(&step)
            .ok_or_else(|| EngineError::Config(format!("generator {} has no closed-form gamma", g.name())))?
            .map_err(at_day(l))?;
        acc = acc + inc;
        values.push(acc);
    }
    Ok(GammaPath { values, route: GammaRoute::ClosedForm })
}
