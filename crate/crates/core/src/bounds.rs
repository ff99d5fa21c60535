//! Closed-form quantities of Test-and-Match+: the switching threshold, the
//! Mimic ratio lower bound, and the smoothness bound.

use crate::scalar::Scalar;

/// Switching threshold `tau = (2 n_hat / n) * (1 - beta) / (1 + beta)`.
pub fn threshold<T: Scalar>(n_hat: usize, n: usize, beta: T) -> T {
    let ratio = T::of_usize(n_hat) / T::of_usize(n);
    T::two() * ratio * (T::one() - beta) / (T::one() + beta)
}

/// Lower bound on the competitive ratio of Mimic run on the whole input:
/// `(n_hat - n/2 * l1) / (n_hat + n/2 * l1)`, with `l1` the distributional
/// distance `L1(p, q)`.
///
/// Returns 1 when both numerator and denominator vanish.
pub fn mimic_ratio_lower_bound<T: Scalar>(n_hat: usize, n: usize, l1: T) -> T {
    let n_hat = T::of_usize(n_hat);
    let lost = T::of_usize(n) * T::half() * l1;
    let den = n_hat + lost;
    if den == T::zero() {
        return T::one();
    }
    (n_hat - lost) / den
}

/// Smoothness guarantee `1 - 2 l1 / (2 alpha + l1)`.
pub fn smoothness_bound<T: Scalar>(alpha: T, l1: T) -> T {
    T::one() - T::two() * l1 / (T::two() * alpha + l1)
}

/// Largest admissible estimation accuracy, `alpha (1 - beta) / (1 + beta)`.
pub fn max_epsilon<T: Scalar>(alpha: T, beta: T) -> T {
    alpha * (T::one() - beta) / (T::one() + beta)
}

/// Default estimation accuracy: `min(0.05, alpha (1 - beta) / (1 + beta))`.
pub fn default_epsilon<T: Scalar>(alpha: T, beta: T) -> T {
    T::of_f64(0.05).min(max_epsilon(alpha, beta))
}

/// Result of evaluating the Mimic ratio bound over a grid of `(n_hat / n, l1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdGridReport<T> {
    pub points: usize,
    /// Interior points (`l1 < tau`) where the bound fell below `beta`.
    pub below_beta: usize,
    /// Largest `|bound - beta|` at `l1 = tau`.
    pub endpoint_deviation: T,
}

/// Evaluates `mimic_ratio_lower_bound` for `n_hat = 1..=n` and
/// `l1 = j tau / steps`, `j = 0..=steps`.
pub fn threshold_grid<T: Scalar>(n: usize, steps: usize, beta: T) -> ThresholdGridReport<T> {
    let mut report = ThresholdGridReport {
        points: 0,
        below_beta: 0,
        endpoint_deviation: T::zero(),
    };
    for n_hat in 1..=n {
        let tau = threshold(n_hat, n, beta);
        for j in 0..=steps {
            let l1 = if j == steps {
                tau
            } else {
                tau * T::of_usize(j) / T::of_usize(steps)
            };
            let r = mimic_ratio_lower_bound(n_hat, n, l1);
            report.points += 1;
            if j == steps {
                report.endpoint_deviation = report.endpoint_deviation.max((r - beta).abs());
            } else if r < beta {
                report.below_beta += 1;
            }
        }
    }
    report
}
