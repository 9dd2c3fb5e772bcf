//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use flexgrid_sim::spectrum::SlotMask;

/// Lowest start of `need` consecutive free slots, by scanning every start.
pub fn brute_first_fit(free: &SlotMask, need: usize) -> Option<usize> {
    (0..free.len()).find(|&s| s + need <= free.len() && (s..s + need).all(|i| free.get(i)))
}

/// Sample mean and unbiased sample variance.
pub fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Kolmogorov-Smirnov distance between the sample and Uniform[lo, hi].
pub fn ks_uniform(xs: &[f64], lo: f64, hi: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// Erlang B from the truncated Poisson form `(a^c / c!) / sum_k a^k / k!`,
/// evaluated in log space. Independent of the recursion in the library.
pub fn erlang_b_truncated_poisson(servers: usize, load: f64) -> f64 {
    let log_terms: Vec<f64> =
        (0..=servers).map(|k| k as f64 * load.ln() - (1..=k).map(|j| (j as f64).ln()).sum::<f64>()).collect();
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
    (log_terms[servers] - max).exp() / denom
}
