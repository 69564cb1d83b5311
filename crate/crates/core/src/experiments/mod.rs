//! The convergence and denoising studies, their configuration, and output
//! writers shared by the CLI.

pub mod circulant;
pub mod config;
pub mod denoise;
pub mod output;
pub mod temperature;
pub mod timevarying;

pub use config::{ExperimentConfig, ExperimentKind};

/// Sum with Kahan compensation, so means do not depend on trial order
/// beyond rounding of the compensated sum.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in it {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn kahan_mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    kahan_sum(v.iter().copied()) / v.len() as f64
}

/// −20 log10(‖est − truth‖ / ‖truth‖).
pub fn snr_db(est: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = est
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    -20.0 * (num / den).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut v = vec![1e16];
        v.extend(std::iter::repeat_n(1.0, 1000));
        assert_eq!(kahan_sum(v.iter().copied()), 1e16 + 1000.0);
    }

    #[test]
    fn snr_of_ten_percent_error() {
        assert!((snr_db(&[1.1, 0.0], &[1.0, 0.0]) - 20.0).abs() < 1e-12);
    }
}
