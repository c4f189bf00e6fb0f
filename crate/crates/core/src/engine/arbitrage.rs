use serde::Serialize;

use crate::num::{to_f64, Scalar};

use super::Mode;

/// Single-path threshold scan; says nothing about the law of `Γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageVerdict {
    pub mode: Mode,
    pub threshold: f64,
    /// First day with `Γ > threshold`.
    pub t_star: Option<usize>,
}

/// Additive mode crosses at `Γ > 1`, multiplicative at `Γ > 1 + ε`.
pub fn arbitrage_check<T: Scalar>(gamma: &[T], mode: Mode, epsilon: f64) -> ArbitrageVerdict {
    let threshold = match mode {
        Mode::Additive => 1.0,
        Mode::Multiplicative => 1.0 + epsilon.max(0.0),
    };
    let t_star = gamma.iter().position(|&g| to_f64(g) > threshold);
    ArbitrageVerdict { mode, threshold, t_star }
}

/// Largest peak-to-trough loss `(peak - v) / peak` of a positive series;
/// drawdowns from a non-positive peak are measured in absolute terms.
pub fn max_drawdown<T: Scalar>(wealth: &[T]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in wealth {
        let v = to_f64(v);
        peak = peak.max(v);
        let dd = if peak > 0.0 { (peak - v) / peak } else { peak - v };
        worst = worst.max(dd);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_crossing_on_zero_gamma() {
        assert_eq!(arbitrage_check(&[0.0; 50], Mode::Additive, 0.0).t_star, None);
    }

    #[test]
    fn linear_gamma_crossings() {
        let gamma: Vec<f64> = (0..=100).map(|l| 1.5 * l as f64 / 100.0).collect();
        let add = arbitrage_check(&gamma, Mode::Additive, 0.0);
        let expected = gamma.iter().position(|&g| g > 1.0).unwrap();
        assert_eq!(add.t_star, Some(expected));
        assert_eq!(expected, 67);
        let mul = arbitrage_check(&gamma, Mode::Multiplicative, 0.2);
        assert!(mul.t_star.unwrap() >= add.t_star.unwrap());
        assert_eq!(mul.threshold, 1.2);
    }

    #[test]
    fn drawdown() {
        assert!((max_drawdown(&[1.0, 1.2, 0.9, 1.3, 1.0]) - 0.25).abs() < 1e-15);
        assert_eq!(max_drawdown(&[1.0, 1.1, 1.2]), 0.0);
        assert_eq!(max_drawdown::<f64>(&[]), 0.0);
    }
}
