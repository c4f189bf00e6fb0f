//! Monte-Carlo falsification checks of the regularity conditions: a
//! `λ`-Lipschitz estimate and midpoint concavity in `x`. A pass is evidence,
//! never proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::num::{lit, to_f64, Scalar};

use super::{Generator, LambdaArity};

#[derive(Debug, Clone)]
pub struct SpotCheckConfig {
    /// Simplex dimension of the sampled weights.
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    /// Slack allowed in the midpoint-concavity inequality.
    pub tolerance: f64,
    /// Box `λ` components are drawn from.
    pub lambda_range: (f64, f64),
    /// Local/global Lipschitz ratio above which the estimate is flagged.
    pub blowup_factor: f64,
}

impl Default for SpotCheckConfig {
    fn default() -> Self {
        Self { dim: 5, samples: 10_000, seed: 0, tolerance: 1e-10, lambda_range: (0.5, 2.0), blowup_factor: 100.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzVerdict {
    pub passed: bool,
    /// Largest difference quotient over well-separated `λ` pairs.
    pub estimate: f64,
    /// Largest difference quotient over pairs `1e-6` apart.
    pub local_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityWitness {
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub midpoint_value: f64,
    pub chord_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityVerdict {
    pub passed: bool,
    pub violations: usize,
    /// Largest `chord - midpoint` seen; positive means a violation.
    pub worst_gap: f64,
    /// Up to the first 16 violating triples.
    pub witnesses: Vec<ConcavityWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub generator: String,
    pub samples: usize,
    /// Samples skipped because the generator rejected the point.
    pub skipped: usize,
    pub claims_concave: bool,
    pub local_time_omitted: bool,
    pub lipschitz: LipschitzVerdict,
    pub concavity: ConcavityVerdict,
}

fn sample_simplex(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        let x: Vec<f64> = e.iter().map(|v| v / s).collect();
        if x.iter().all(|&v| v > 0.0) {
            return x;
        }
    }
}

fn sample_lambda(rng: &mut ChaCha8Rng, len: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn cast<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| lit(x)).collect()
}

/// Runs both spot checks on `g` with `cfg.samples` random draws.
pub fn spot_check_conditions<T: Scalar, G: Generator<T> + ?Sized>(g: &G, cfg: &SpotCheckConfig) -> ConditionReport {
    assert!(cfg.samples >= 2, "spot checks need at least two samples");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lambda_len = match g.lambda_arity() {
        LambdaArity::PerAsset => cfg.dim,
        LambdaArity::Scalar | LambdaArity::Ignored => 1,
    };
    let eval = |lambda: &[f64], x: &[f64]| g.value(&cast::<T>(lambda), &cast::<T>(x)).ok().map(to_f64);

    let mut skipped = 0;
    let mut estimate: f64 = 0.0;
    let mut local_estimate: f64 = 0.0;
    let mut finite = true;
    let mut violations = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut witnesses = Vec::new();

    for _ in 0..cfg.samples {
        let x = sample_simplex(&mut rng, cfg.dim);
        let y = sample_simplex(&mut rng, cfg.dim);
        let l1 = sample_lambda(&mut rng, lambda_len, cfg.lambda_range);
        let l2 = sample_lambda(&mut rng, lambda_len, cfg.lambda_range);
        let dir: Vec<f64> = sample_lambda(&mut rng, lambda_len, (-1.0, 1.0));
        let dir_norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let h = 1e-6;
        let l_near: Vec<f64> = l1.iter().zip(&dir).map(|(a, u)| a + h * u / dir_norm).collect();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();

        let (Some(g1), Some(g2), Some(gn), Some(gy), Some(gm)) =
            (eval(&l1, &x), eval(&l2, &x), eval(&l_near, &x), eval(&l1, &y), eval(&l1, &mid))
        else {
            skipped += 1;
            continue;
        };

        let dist = l1.iter().zip(&l2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist > 0.0 {
            let q = (g1 - g2).abs() / dist;
            finite &= q.is_finite();
            estimate = estimate.max(q);
        }
        let near_dist = l1.iter().zip(&l_near).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if near_dist > 0.0 {
            let q = (g1 - gn).abs() / near_dist;
            finite &= q.is_finite();
            local_estimate = local_estimate.max(q);
        }

        let chord = 0.5 * (g1 + gy);
        let gap = chord - gm;
        worst_gap = worst_gap.max(gap);
        if gap > cfg.tolerance {
            violations += 1;
            if witnesses.len() < 16 {
                witnesses.push(ConcavityWitness {
                    lambda: l1.clone(),
                    x: x.clone(),
                    y: y.clone(),
                    midpoint_value: gm,
                    chord_value: chord,
                });
            }
        }
    }

    let evaluated = cfg.samples - skipped;
    let lipschitz_ok =
        evaluated > 0 && finite && local_estimate <= cfg.blowup_factor * estimate.max(1.0) + cfg.tolerance;
    ConditionReport {
        generator: g.name().to_string(),
        samples: cfg.samples,
        skipped,
        claims_concave: g.domain().concave_in_x,
        local_time_omitted: g.omits_local_time(),
        lipschitz: LipschitzVerdict { passed: lipschitz_ok, estimate, local_estimate },
        concavity: ConcavityVerdict { passed: evaluated > 0 && violations == 0, violations, worst_gap, witnesses },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::{Catalog, FnGenerator, Negated};

    #[test]
    fn entropy_is_concave_on_samples() {
        let cfg = SpotCheckConfig { samples: 10_000, seed: 7, ..Default::default() };
        let report = spot_check_conditions(&Catalog::<f64>::Entropy, &cfg);
        assert!(report.concavity.passed, "{:?}", report.concavity.witnesses.first());
        assert!(report.lipschitz.passed);
        // |∂G/∂λ| = H(x) <= log d
        assert!(report.lipschitz.estimate <= (cfg.dim as f64).ln() + 1e-9);
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn quadratic_and_its_negation() {
        let cfg = SpotCheckConfig { samples: 2_000, seed: 3, ..Default::default() };
        assert!(spot_check_conditions(&Catalog::<f64>::Quadratic, &cfg).concavity.passed);
        let neg = Negated::new(Catalog::<f64>::Quadratic);
        let report = spot_check_conditions(&neg, &cfg);
        assert!(!report.concavity.passed);
        let w = &report.concavity.witnesses[0];
        assert!(w.chord_value > w.midpoint_value);
    }

    #[test]
    fn convex_function_yields_witness() {
        let cfg = SpotCheckConfig { samples: 500, seed: 11, ..Default::default() };
        let report = spot_check_conditions(&FnGenerator::<f64>::sum_of_squares(), &cfg);
        assert!(!report.concavity.passed);
        assert!(report.concavity.violations > 0);
        assert!(!report.concavity.witnesses.is_empty());
    }

    #[test]
    fn ranked_report_flags_local_time() {
        let cfg = SpotCheckConfig { samples: 200, seed: 1, ..Default::default() };
        let g = Catalog::RankedHybrid { d1: 2, d2: 4, xi_lo: 0.5, xi_hi: 1.5 };
        let report = spot_check_conditions(&g, &cfg);
        assert!(report.local_time_omitted);
        assert!(!report.claims_concave);
        assert!(report.lipschitz.passed);
    }
}
