use crate::genfun::{GammaStep, Generator};
use crate::lambda::LambdaPath;
use crate::marketdata::MarketPath;
use crate::num::{dot, lit, to_f64, Scalar};

use super::gamma::{GammaPath, GammaRoute};
use super::normalize::NormalizedGen;
use super::strategy::self_financing_convert;
use super::{at_day, check_grid, day_inputs, scatter, EngineError, Mode, POSITIVITY_FLOOR};

/// One rebalancing day.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerDay<T> {
    pub theta: Vec<T>,
    pub phi: Vec<T>,
    pub defect_c: T,
    pub v_begin: T,
    /// `Σ φ_j μ̄_j`.
    pub v_end: T,
    /// `v_begin + Σ θ_j (μ̄_j - μ̲_j)`.
    pub v_end_incremental: T,
    /// `Σ φ_j μ̲_j - v_begin`.
    pub self_financing_residual: T,
    /// Normalized `𝒢(Λ(t_l), μ̄_l)`, without the `c` shift.
    pub g_end: T,
    /// `G^(c)(Λ(t_l), μ̲_l)`.
    pub g_shifted_begin: T,
    /// `Γ` of `𝒢` by the defect route.
    pub gamma_defect: T,
    /// `Γ` of `𝒢` by the closed-form route, when the generator has one.
    pub gamma_closed: Option<T>,
    /// Overnight wealth factor `Σ(t̄_{l-1}) / Σ(t̲_l)`; 1 on day 0.
    pub carry: T,
    pub membership_changed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyLedger<T> {
    pub mode: Mode,
    pub c_shift: T,
    pub days: Vec<LedgerDay<T>>,
}

impl<T: Scalar> StrategyLedger<T> {
    fn max_abs(&self, f: impl Fn(&LedgerDay<T>) -> Option<T>) -> T {
        self.days.iter().filter_map(f).map(|v| v.abs()).fold(T::zero(), T::max)
    }

    /// `max_l |Σ φ μ̲ - v_begin|`.
    pub fn max_self_financing_residual(&self) -> T {
        self.max_abs(|d| Some(d.self_financing_residual))
    }

    /// `max_l |Σ φ μ̄ - (v_begin + Σ θ Δμ)|`.
    pub fn max_incremental_gap(&self) -> T {
        self.max_abs(|d| Some(d.v_end - d.v_end_incremental))
    }

    /// `max_l |V(t̄_l) - 𝒢(Λ(t_l), μ̄_l) - Γ(t_l)|` over days without a
    /// membership change. Meaningful in additive mode.
    pub fn max_ledger_identity_residual(&self) -> T {
        self.max_abs(|d| (!d.membership_changed).then(|| d.v_end - d.g_end - d.gamma_defect))
    }

    pub fn flagged_days(&self) -> Vec<usize> {
        self.days.iter().enumerate().filter_map(|(l, d)| d.membership_changed.then_some(l)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutput<T> {
    pub ledger: StrategyLedger<T>,
    /// End-of-day wealth `V(t̄_l)`.
    pub wealth: Vec<T>,
    pub gamma_defect: GammaPath<T>,
    pub gamma_closed: Option<GammaPath<T>>,
}

/// A failed run with the ledger up to the failing day.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestFailure<T> {
    pub error: EngineError,
    pub partial: StrategyLedger<T>,
}

impl<T: Scalar> std::fmt::Display for BacktestFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (ledger holds {} completed days)", self.error, self.partial.days.len())
    }
}

impl<T: Scalar> std::error::Error for BacktestFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs the daily loop: overnight carry, strategy at the begin-of-day
/// weights, self-financing conversion, end-of-day wealth.
///
/// `g` must be normalized; its own `c` shift is ignored in favour of `c`,
/// which only affects multiplicative mode.
pub fn run_backtest<T: Scalar, G: Generator<T> + Clone>(
    path: &MarketPath<T>,
    g: &NormalizedGen<T, G>,
    lam: &LambdaPath<T>,
    mode: Mode,
    c: T,
) -> Result<BacktestOutput<T>, Box<BacktestFailure<T>>> {
    let fail = |error: EngineError, days: Vec<LedgerDay<T>>| {
        Box::new(BacktestFailure { error, partial: StrategyLedger { mode, c_shift: c, days } })
    };
    let plain = g.with_shift(T::zero()).map_err(|e| fail(e, vec![]))?;
    if !(c >= T::zero() && c.is_finite()) {
        return Err(fail(EngineError::Config(format!("c must be finite and >= 0, got {c}")), vec![]));
    }
    check_grid(path, lam).map_err(|e| fail(e, vec![]))?;

    let n = path.n_days();
    let d = path.n_assets();
    let one = T::one();
    let floor: T = lit(POSITIVITY_FLOOR);
    let has_closed = plain.has_closed_form();

    let mut days: Vec<LedgerDay<T>> = Vec::with_capacity(n);
    let mut g_start = T::zero();
    let mut integral = T::zero();
    let mut closed = T::zero();
    let mut gamma_prev = T::zero();
    let mut exponent = T::zero();

    for l in 0..n {
        let (v_begin, carry) = match days.last() {
            None => (one, one),
            Some(prev) => {
                let carry = path.total_end(l - 1) / path.total_begin(l);
                (prev.v_end * carry, carry)
            }
        };
        let step_result = (|| -> Result<LedgerDay<T>, EngineError> {
            let day = day_inputs(&plain, path, lam, l)?;
            let (g_begin, dg) = plain.evaluate(&day.lambda, &day.begin).map_err(at_day(l))?;
            if l == 0 {
                g_start = g_begin;
            }
            let g_end = plain.value(&day.lambda, &day.end).map_err(at_day(l))?;
            let d_integral: T =
                dg.iter().zip(day.end.iter().zip(&day.begin)).map(|(&t, (&e, &b))| t * (e - b)).sum();
            let gamma_defect = g_start - g_end + (integral + d_integral);
            let gamma_closed = if has_closed {
                let step = GammaStep {
                    lambda_prev: &day.lambda_prev,
                    lambda: &day.lambda,
                    mu_begin: &day.begin,
                    mu_end: &day.end,
                };
                let inc = plain.gamma_increment(&step).expect("closed form present").map_err(at_day(l))?;
                Some(closed + inc)
            } else {
                None
            };

            let g_shifted_begin = (g_begin + c) / (one + c);
            let theta_members: Vec<T> = match mode {
                Mode::Additive => dg,
                Mode::Multiplicative => {
                    if !(g_shifted_begin >= floor) {
                        return Err(EngineError::Positivity {
                            day: l,
                            value: to_f64(g_shifted_begin),
                            floor: POSITIVITY_FLOOR,
                        });
                    }
                    let factor = exponent.exp() / (one + c);
                    dg.into_iter().map(|v| v * factor).collect()
                }
            };
            let theta = scatter(&theta_members, &day.members, d);
            let membership = path.membership(l);
            let (phi, defect_c) = self_financing_convert(&theta, &day.begin_full, membership, v_begin);
            let held = dot(&phi, &day.begin_full);
            let v_end = dot(&phi, &day.end_full);
            let moved: T = theta_members.iter().zip(day.end.iter().zip(&day.begin)).map(|(&t, (&e, &b))| t * (e - b)).sum();

            integral = integral + d_integral;
            if let Some(gc) = gamma_closed {
                closed = gc;
            }
            if mode == Mode::Multiplicative {
                // ΔΓ^(c) / G^(c) = ΔΓ / (𝒢 + c)
                exponent = exponent + (gamma_defect - gamma_prev) / (g_begin + c);
            }
            gamma_prev = gamma_defect;

            Ok(LedgerDay {
                theta,
                phi,
                defect_c,
                v_begin,
                v_end,
                v_end_incremental: v_begin + moved,
                self_financing_residual: held - v_begin,
                g_end,
                g_shifted_begin,
                gamma_defect,
                gamma_closed,
                carry,
                membership_changed: path.membership_changed(l),
            })
        })();
        match step_result {
            Ok(day) => days.push(day),
            Err(e) => return Err(fail(e, days)),
        }
    }

    let wealth = days.iter().map(|d| d.v_end).collect();
    let gamma_defect = GammaPath { values: days.iter().map(|d| d.gamma_defect).collect(), route: GammaRoute::Defect };
    let gamma_closed = has_closed.then(|| GammaPath {
        values: days.iter().map(|d| d.gamma_closed.expect("closed form present")).collect(),
        route: GammaRoute::ClosedForm,
    });
    Ok(BacktestOutput { ledger: StrategyLedger { mode, c_shift: c, days }, wealth, gamma_defect, gamma_closed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::normalize::normalize;
    use crate::genfun::Catalog;
    use crate::lambda::{build_lambda, LambdaKind};

    fn two_day_path() -> MarketPath<f64> {
        let mv = vec![vec![0.6, 0.4], vec![0.6, 0.4], vec![0.5, 0.5]];
        let tr = vec![vec![1.0, 1.0], vec![0.5 / 0.6, 0.5 / 0.4], vec![1.1, 0.9]];
        MarketPath::synthetic(mv, tr).unwrap()
    }

    fn setup(g: Catalog<f64>, path: &MarketPath<f64>, kind: LambdaKind) -> (NormalizedGen<f64, Catalog<f64>>, LambdaPath<f64>) {
        let lam = build_lambda(&kind, path).unwrap();
        let mu0: Vec<f64> = path.begin_weights(0).into_inner();
        let n = normalize(g, lam.at(0), &mu0).unwrap();
        (n, lam)
    }

    #[test]
    fn constant_market_keeps_unit_wealth() {
        let path = MarketPath::synthetic(vec![vec![3.0, 1.0, 2.0]; 8], vec![vec![1.0; 3]; 8]).unwrap();
        let (g, lam) = setup(Catalog::Entropy, &path, LambdaKind::Constant { value: 1.0 });
        for mode in [Mode::Additive, Mode::Multiplicative] {
            let out = run_backtest(&path, &g, &lam, mode, 0.0).unwrap();
            assert!(out.wealth.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn additive_entropy_ledger_identity() {
        let path = two_day_path();
        let (g, lam) = setup(Catalog::Entropy, &path, LambdaKind::Constant { value: 1.0 });
        let out = run_backtest(&path, &g, &lam, Mode::Additive, 0.0).unwrap();
        assert!(out.ledger.max_ledger_identity_residual() < 1e-14);
        assert!(out.ledger.max_self_financing_residual() < 1e-15);
        assert!(out.ledger.max_incremental_gap() < 1e-15);
    }

    #[test]
    fn day_zero_constant_matches_additive_generation() {
        let path = two_day_path();
        let (g, lam) = setup(Catalog::Entropy, &path, LambdaKind::Constant { value: 1.0 });
        let out = run_backtest(&path, &g, &lam, Mode::Additive, 0.0).unwrap();
        let day0 = &out.ledger.days[0];
        let mu = path.begin_weights(0);
        let dg = g.gradient(&[1.0], mu.as_slice()).unwrap();
        let q = 1.0 - dg.iter().zip(mu.as_slice()).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..2 {
            assert!((day0.phi[i] - (dg[i] + q)).abs() < 1e-15);
        }
    }

    #[test]
    fn multiplicative_entropy_replays_discrete_update() {
        let path = two_day_path();
        let (g, lam) = setup(Catalog::Entropy, &path, LambdaKind::Constant { value: 1.0 });
        let out = run_backtest(&path, &g, &lam, Mode::Multiplicative, 0.0).unwrap();
        let h = |x: &[f64]| -x.iter().map(|v| v * v.ln()).sum::<f64>();
        let g0 = h(path.begin_weights(0).as_slice());
        let mut v = 1.0;
        let mut expo = 0.0f64;
        let mut gamma_prev = 0.0;
        for l in 0..3 {
            let b = path.begin_weights(l).into_inner();
            let e = path.end_of_day(l).1.into_inner();
            let dind: f64 = b.iter().zip(&e).map(|(x, y)| -x.ln() * (y - x)).sum();
            v += expo.exp() * 1.0 / g0 * dind;
            assert!((out.wealth[l] - v).abs() < 1e-14, "day {l}");
            let gamma = out.ledger.days[l].gamma_defect * g0;
            expo += (gamma - gamma_prev) / h(&b);
            gamma_prev = gamma;
        }
    }

    #[test]
    fn positivity_floor_reports_partial_ledger() {
        let path = two_day_path();
        let (g, lam) = setup(
            Catalog::Quadratic,
            &path,
            LambdaKind::ExpDeterministic { rate: -3.0 },
        );
        let err = run_backtest(&path, &g, &lam, Mode::Multiplicative, 0.0).unwrap_err();
        assert!(matches!(err.error, EngineError::Positivity { .. }));
        assert!(err.to_string().contains("increase c"));
        assert!(!err.partial.days.is_empty());
        assert!(run_backtest(&path, &g, &lam, Mode::Multiplicative, 10.0).is_ok());
    }

    #[test]
    fn lambda_grid_mismatch() {
        let path = two_day_path();
        let (g, _) = setup(Catalog::Entropy, &path, LambdaKind::Constant { value: 1.0 });
        let short = LambdaPath::from_rows(vec![vec![1.0]], LambdaKind::Constant { value: 1.0 }).unwrap();
        let err = run_backtest(&path, &g, &short, Mode::Additive, 0.0).unwrap_err();
        assert!(matches!(err.error, EngineError::Config(_)));
    }
}
