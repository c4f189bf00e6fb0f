//! Synthetic market paths: correlated lognormal daily moves of market
//! values, with dividends entering only through the total-return factors.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{cumulative_e, direction_series};
use crate::marketdata::{asset_ids, weekday_dates, MarketError, MarketPath};
use crate::num::Scalar;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("correlation matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("{kind:?} scenario: realized trend had the wrong sign in all {attempts} attempts")]
    RetriesExhausted { kind: ScenarioKind, attempts: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Simulator parameters. Per-asset vectors of length 1 are broadcast to `d`;
/// empty vectors select the defaults (drift 0, vol 0.01, no dividends,
/// `init_mv_i = 1000 / (i + 1)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub d: usize,
    pub n_days: usize,
    #[serde(default)]
    pub seed: u64,
    /// Daily log-drift per asset.
    #[serde(default)]
    pub drift: Vec<f64>,
    /// Daily log-volatility per asset.
    #[serde(default)]
    pub vol: Vec<f64>,
    /// Row-major `d × d` correlation; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub div_yield: Vec<f64>,
    #[serde(default)]
    pub init_mv: Vec<f64>,
}

impl SimConfig {
    pub const DEFAULT_VOL: f64 = 0.01;

    /// `d` assets over `n_days` days with every per-asset field defaulted.
    pub fn new(d: usize, n_days: usize, seed: u64) -> Self {
        Self { d, n_days, seed, drift: vec![], vol: vec![], corr: None, div_yield: vec![], init_mv: vec![] }
    }

    pub fn with_vol(mut self, vol: f64) -> Self {
        self.vol = vec![vol];
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn per_asset(&self, name: &str, v: &[f64], default: impl Fn(usize) -> f64) -> Result<Vec<f64>, SimError> {
        match v.len() {
            0 => Ok((0..self.d).map(default).collect()),
            1 => Ok(vec![v[0]; self.d]),
            n if n == self.d => Ok(v.to_vec()),
            n => Err(SimError::Config(format!("{name} has {n} entries, expected 1 or d = {}", self.d))),
        }
    }

    fn resolve(&self) -> Result<Resolved, SimError> {
        if self.d < 2 {
            return Err(SimError::Config(format!("d must be at least 2, got {}", self.d)));
        }
        if self.n_days == 0 {
            return Err(SimError::Config("n_days must be positive".into()));
        }
        let drift = self.per_asset("drift", &self.drift, |_| 0.0)?;
        let vol = self.per_asset("vol", &self.vol, |_| Self::DEFAULT_VOL)?;
        let div = self.per_asset("div_yield", &self.div_yield, |_| 0.0)?;
        let init = self.per_asset("init_mv", &self.init_mv, |i| 1000.0 / (i as f64 + 1.0))?;
        if drift.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Config("drift must be finite".into()));
        }
        if vol.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SimError::Config("vol must be finite and >= 0".into()));
        }
        if div.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SimError::Config("div_yield must be finite and >= 0".into()));
        }
        if init.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::Config("init_mv must be finite and > 0".into()));
        }
        let factor = match &self.corr {
            None => None,
            Some(c) => Some(correlation_factor(c, self.d)?),
        };
        Ok(Resolved { drift, vol, div, init, factor })
    }
}

struct Resolved {
    drift: Vec<f64>,
    vol: Vec<f64>,
    div: Vec<f64>,
    init: Vec<f64>,
    factor: Option<DMatrix<f64>>,
}

/// `L` with `L Lᵀ = corr`, from the symmetric eigendecomposition.
fn correlation_factor(corr: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>, SimError> {
    if corr.len() != d || corr.iter().any(|r| r.len() != d) {
        return Err(SimError::Config(format!("corr must be {d} x {d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| corr[i][j]);
    for i in 0..d {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(SimError::Config(format!("corr[{i}][{i}] = {} is not 1", m[(i, i)])));
        }
        for j in 0..i {
            if !m[(i, j)].is_finite() || (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(SimError::Config(format!("corr is not symmetric at ({i}, {j})")));
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(SimError::NotPsd { min_eigenvalue: min });
    }
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

/// Drift adjustment applied each day from the begin-of-day weights.
type Tilt<'a> = &'a dyn Fn(&[f64], &mut [f64]);

fn run(cfg: &SimConfig, r: &Resolved, tilt: Option<Tilt<'_>>) -> Result<MarketPath<f64>, SimError> {
    let (d, n) = (cfg.d, cfg.n_days);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mv = Vec::with_capacity(n);
    let mut tr = Vec::with_capacity(n);
    let mut current = r.init.clone();
    let mut z = vec![0.0; d];
    let mut drift = vec![0.0; d];
    for l in 0..n {
        mv.push(current.clone());
        if l == 0 {
            // no price history before the first day
            tr.push(vec![1.0; d]);
            continue;
        }
        drift.copy_from_slice(&r.drift);
        if let Some(tilt) = tilt {
            tilt(&current, &mut drift);
        }
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let eps: Vec<f64> = match &r.factor {
            None => z.clone(),
            Some(f) => (0..d).map(|i| (0..d).map(|j| f[(i, j)] * z[j]).sum()).collect(),
        };
        let growth: Vec<f64> = (0..d).map(|i| (drift[i] + r.vol[i] * eps[i]).exp()).collect();
        tr.push(growth.iter().zip(&r.div).map(|(g, q)| g * (1.0 + q)).collect());
        // tomorrow's begin values carry today's ex-dividend close
        for (c, g) in current.iter_mut().zip(&growth) {
            *c *= g;
        }
        if current.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::Config(format!("market values left (0, inf) on day {l}; reduce drift or vol")));
        }
    }
    Ok(MarketPath::new(weekday_dates(n), asset_ids(d), mv, tr, vec![vec![true; d]; n])?)
}

/// Simulates a full-membership market path; a pure function of `cfg`.
pub fn simulate_market<T: Scalar>(cfg: &SimConfig) -> Result<MarketPath<T>, SimError> {
    let r = cfg.resolve()?;
    Ok(run(cfg, &r, None)?.cast())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOptions {
    /// Strength `κ` of the size tilt: asset `i` gets extra daily drift
    /// `∓κ (log μ_i − mean_j log μ_j)`.
    pub tilt: f64,
    /// Number of seeds tried (`seed, seed + 1, ...`) before giving up.
    pub max_attempts: usize,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self { tilt: 5e-4, max_attempts: 16 }
    }
}

/// A path whose cumulative direction indicator `E` ends with the sign
/// requested by `kind`: large caps are dragged down for increasing
/// diversification and pushed up for decreasing. `Flat` adds no tilt and
/// has no sign requirement.
pub fn diversification_scenario<T: Scalar>(kind: ScenarioKind, cfg: &SimConfig) -> Result<MarketPath<T>, SimError> {
    diversification_scenario_with(kind, cfg, &ScenarioOptions::default())
}

pub fn diversification_scenario_with<T: Scalar>(
    kind: ScenarioKind,
    cfg: &SimConfig,
    opts: &ScenarioOptions,
) -> Result<MarketPath<T>, SimError> {
    if !(opts.tilt.is_finite() && opts.tilt >= 0.0) || opts.max_attempts == 0 {
        return Err(SimError::Config("scenario tilt must be >= 0 and max_attempts >= 1".into()));
    }
    let r = cfg.resolve()?;
    let sign = match kind {
        ScenarioKind::Increasing => -1.0,
        ScenarioKind::Decreasing => 1.0,
        ScenarioKind::Flat => 0.0,
    };
    let kappa = sign * opts.tilt;
    let tilt = move |mv: &[f64], drift: &mut [f64]| {
        let logs: Vec<f64> = mv.iter().map(|v| v.ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        for (dr, lg) in drift.iter_mut().zip(&logs) {
            *dr += kappa * (lg - mean);
        }
    };
    for attempt in 0..opts.max_attempts {
        let c = cfg.clone().with_seed(cfg.seed.wrapping_add(attempt as u64));
        let path = run(&c, &r, (kind != ScenarioKind::Flat).then_some(&tilt as Tilt<'_>))?;
        let terminal = cumulative_e(&direction_series(&path).expect("simulated weights are interior"))
            .last()
            .copied()
            .unwrap_or(0.0);
        let ok = match kind {
            ScenarioKind::Increasing => terminal > 0.0,
            ScenarioKind::Decreasing => terminal < 0.0,
            ScenarioKind::Flat => true,
        };
        if ok {
            return Ok(path.cast());
        }
    }
    Err(SimError::RetriesExhausted { kind, attempts: opts.max_attempts })
}
