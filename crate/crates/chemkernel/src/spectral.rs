//! Periodogram band energy of a uniformly sampled series.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided periodogram of the mean-removed series: `(frequency, power)`
/// pairs for bins `1..=n/2`. Power is scaled so the bins sum to the
/// series variance.
pub fn periodogram(series: &[f64], dt: f64) -> Vec<(f64, f64)> {
    let n = series.len();
    if n < 2 {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (n as f64 * n as f64);
    (1..=n / 2)
        .map(|k| {
            let mirrored = k != n - k;
            let p = buf[k].norm_sqr() * scale * if mirrored { 2.0 } else { 1.0 };
            (k as f64 / (n as f64 * dt), p)
        })
        .collect()
}

/// Total power strictly above `f_min` Hz.
pub fn high_band_energy(series: &[f64], dt: f64, f_min: f64) -> f64 {
    periodogram(series, dt).into_iter().filter(|(f, _)| *f > f_min).map(|(_, p)| p).sum()
}
