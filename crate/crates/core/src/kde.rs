//! Gaussian kernel density estimate, used to compare observed and simulated
//! samples.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Silverman's rule: `0.9 · min(sd, IQR/1.34) · n^{-1/5}`.
pub fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = crate::stats::quantile_sorted(&sorted, 0.75) - crate::stats::quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        // Constant sample: any positive width keeps the estimate finite.
        1e-3 * (1.0 + mean.abs())
    }
}

/// Density of `sample` evaluated on `grid`.
pub fn gaussian_kde(sample: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::TooShort { need: 1, got: 0 });
    }
    let h = silverman_bandwidth(sample);
    let norm = 1.0 / (sample.len() as f64 * h * (2.0 * PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            sample
                .iter()
                .map(|&x| {
                    let z = (g - x) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// 512-point grid over the pooled range of the samples, padded by 10% on
/// each side.
pub fn pooled_grid(samples: &[&[f64]], points: usize) -> Vec<f64> {
    let (lo, hi) = samples
        .iter()
        .flat_map(|s| s.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let pad = 0.1 * (hi - lo).max(1e-12);
    crate::deconv::linspace(lo - pad, hi + pad, points)
}

pub const KDE_POINTS: usize = 512;

/// Mean squared difference between the two KDEs on the pooled grid.
pub fn kde_discrepancy(a: &[f64], b: &[f64]) -> Result<f64> {
    let grid = pooled_grid(&[a, b], KDE_POINTS);
    let fa = gaussian_kde(a, &grid)?;
    let fb = gaussian_kde(b, &grid)?;
    crate::deconv::mse(&fa, &fb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_to_one() {
        let sample = [-1.0, 0.0, 0.2, 0.4, 2.0];
        let grid = crate::deconv::linspace(-10.0, 10.0, 4001);
        let f = gaussian_kde(&sample, &grid).unwrap();
        let mass = crate::simulate::trapezoid(&grid, &f);
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identical_samples_have_zero_discrepancy() {
        let a = [0.1, 0.5, -0.3, 0.9];
        assert_eq!(kde_discrepancy(&a, &a).unwrap(), 0.0);
        assert!(kde_discrepancy(&a, &[3.0, 3.5, 4.0]).unwrap() > 0.0);
    }

    #[test]
    fn grid_padding() {
        let g = pooled_grid(&[&[0.0, 1.0], &[2.0]], 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] + 0.2).abs() < 1e-12);
        assert!((g[4] - 2.2).abs() < 1e-12);
    }
}
