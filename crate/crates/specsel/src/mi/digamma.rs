//! Digamma function for the nearest-neighbor entropy terms.

use super::MiError;

/// ψ(v) for v > 0, accurate to better than 1e-10.
///
/// Upward recurrence ψ(v+1) = ψ(v) + 1/v lifts the argument above 10, where
/// the asymptotic series through the x^-12 term is already at machine noise.
pub fn digamma(v: f64) -> Result<f64, MiError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(MiError::Domain(format!("digamma requires v > 0, got {v}")));
    }
    let mut x = v;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    Ok(acc + x.ln() - 0.5 / x - series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    /// Slow series oracle: psi(x) = -gamma + sum_k (1/(k+1) - 1/(k+x)),
    /// truncated at K terms with the analytic tail (x-1)/(K + x/2).
    fn series_oracle(x: f64) -> f64 {
        let k_max = 10_000_000u64;
        let mut sum = 0.0;
        let mut comp = 0.0; // Kahan compensation
        for k in (0..k_max).rev() {
            let term = 1.0 / (k as f64 + 1.0) - 1.0 / (k as f64 + x);
            let t = sum + (term + comp);
            comp = (term + comp) - (t - sum);
            sum = t;
        }
        -EULER_GAMMA + sum + (x - 1.0) / (k_max as f64 + x / 2.0)
    }

    #[test]
    fn recurrence_identity() {
        for v in [0.5, 1.0, 3.7] {
            let lhs = digamma(v + 1.0).unwrap() - digamma(v).unwrap();
            assert_abs_diff_eq!(lhs, 1.0 / v, epsilon = 1e-12);
        }
    }

    #[test]
    fn known_values() {
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, epsilon = 1e-10);
        assert_abs_diff_eq!(digamma(2.0).unwrap(), 1.0 - EULER_GAMMA, epsilon = 1e-10);
        // psi(0.5) = -gamma - 2 ln 2
        assert_abs_diff_eq!(
            digamma(0.5).unwrap(),
            -EULER_GAMMA - 2.0 * std::f64::consts::LN_2,
            epsilon = 1e-10
        );
    }

    #[test]
    fn matches_series_oracle() {
        for x in [0.25, 0.5, 1.0, 2.0, 3.7, 6.0, 17.5] {
            let oracle = series_oracle(x);
            assert_abs_diff_eq!(digamma(x).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(digamma(f64::NAN).is_err());
    }
}
