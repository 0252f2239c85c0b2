//! Small numeric helpers shared across modules.

/// log(Σ exp(x_i)) computed against the running maximum so overflow cannot
/// occur. -inf entries contribute zero mass; an empty or all -inf input
/// yields -inf.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// ln(y!) via the log-gamma function.
pub fn ln_factorial(y: u64) -> f64 {
    statrs::function::gamma::ln_gamma(y as f64 + 1.0)
}

/// SplitMix64 step, used to derive independent seeds for restarts,
/// replicates, and per-size streams from one user seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Render a float with 17 significant digits, enough to round-trip f64
/// exactly through text.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Median of a slice (average of the middle pair for even lengths).
/// NaNs are not expected and will poison the result.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in median input"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_sum_exp_matches_naive_on_small_inputs() {
        let xs = [-1.0, 0.5, 2.0, -3.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(&xs), naive, max_relative = 1e-14);
    }

    #[test]
    fn log_sum_exp_ignores_neg_infinity() {
        let xs = [f64::NEG_INFINITY, 0.0];
        assert_relative_eq!(log_sum_exp(&xs), 0.0, epsilon = 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        let xs = [1000.0, 1000.0];
        assert_relative_eq!(log_sum_exp(&xs), 1000.0 + 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn ln_factorial_small_values_exact() {
        assert_relative_eq!(ln_factorial(0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_factorial(1), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_factorial(5), 120.0f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(ln_factorial(20), (1..=20).map(|k| (k as f64).ln()).sum::<f64>(), max_relative = 1e-13);
    }

    #[test]
    fn derive_seed_differs_by_stream() {
        let s0 = derive_seed(42, 0);
        let s1 = derive_seed(42, 1);
        assert_ne!(s0, s1);
        assert_eq!(s0, derive_seed(42, 0));
    }

    #[test]
    fn fmt_f64_round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, -2.5e-17, 1e300] {
            let parsed: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(parsed.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
