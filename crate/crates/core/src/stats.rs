//! Small statistics toolkit: normal law, Kolmogorov-Smirnov distance, batch means.

use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};


/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and `N(mean, sd^2)`.
/// Sorts `samples` in place.
pub fn ks_distance_normal(samples: &mut [f64], mean: f64, sd: f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf((x - mean) / sd);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Mean and variance-of-the-mean from `floor(sqrt(N))` batches of the `N` block values.
///
/// The blocks are contiguous equal-length segments of one trajectory; the
/// remainder that does not fill a whole batch joins the last batch.
/// Returns `(mean, var_of_mean)`; with fewer than two batches the variance is infinite.
pub fn batch_means(blocks: &[f64]) -> (f64, f64) {
    let n = blocks.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = blocks.iter().sum::<f64>() / n as f64;
    let nb = (n as f64).sqrt().floor() as usize;
    if nb < 2 {
        return (mean, f64::INFINITY);
    }
    let size = n / nb;
    let means: Vec<(f64, f64)> = (0..nb)
        .map(|b| {
            let lo = b * size;
            let hi = if b + 1 == nb { n } else { lo + size };
            let s = &blocks[lo..hi];
            (s.iter().sum::<f64>() / s.len() as f64, s.len() as f64)
        })
        .collect();
    // weighted by batch length so the unequal last batch is handled consistently
    let var_batch = means.iter().map(|(m, w)| w * (m - mean) * (m - mean)).sum::<f64>() / (nb - 1) as f64;
    (mean, var_batch / n as f64)
}

/// Combines independent replica estimates `(mean_i, var_i)` with equal weights.
pub fn combine_replicas(parts: &[(f64, f64)]) -> (f64, f64) {
    let r = parts.len() as f64;
    let mean = parts.iter().map(|p| p.0).sum::<f64>() / r;
    let var = parts.iter().map(|p| p.1).sum::<f64>() / (r * r);
    (mean, var)
}

/// Sample mean and unbiased variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var)
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
