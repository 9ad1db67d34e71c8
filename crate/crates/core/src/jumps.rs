//! Jump / no-jump classification of observation intervals.
//!
//! Each increment is compared against two candidate laws: the diffusion-only
//! law `μ̂Δ + σ̂√Δ ζ` (density `f0`) and the same plus one jump drawn from
//! `p̂` (density `f1`). Increments inside the central interval `[x1, x2]`
//! where `f0` dominates are no-jump; everything outside is a jump.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::deconv::{fourier_tabulated, linspace, symmetric_midpoints, DensityEstimate};
use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::spectral::SpectralEstimate;

const MIN_SPECTRUM_NODES: usize = 2000;
const MAX_SPECTRUM_NODES: usize = 200_000;

/// `f0` and `f1` tabulated on a grid, with the spectral representation of
/// `f1` kept for off-grid evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensities {
    pub x: Vec<f64>,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    freqs: Vec<f64>,
    spectrum: Vec<Complex64>,
    step: f64,
}

impl MixtureDensities {
    pub fn f0_at(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        (-0.5 * z * z).exp() / (self.sd * (2.0 * PI).sqrt())
    }

    pub fn f1_at(&self, x: f64) -> f64 {
        let s: f64 = self
            .freqs
            .iter()
            .zip(&self.spectrum)
            .map(|(&u, &g)| (Complex64::from_polar(1.0, -u * x) * g).re)
            .sum();
        s * self.step / (2.0 * PI)
    }

    fn gap_at(&self, x: f64) -> f64 {
        self.f0_at(x) - self.f1_at(x)
    }
}

/// Builds `f0` exactly and `f1 = 𝓕⁻¹[exp(iμ̂Δu − σ̂²Δu²/2)·𝓕[p̂]]` by
/// midpoint quadrature. `p̂` is rescaled to unit mass first.
pub fn build_mixture(est: &SpectralEstimate, p_hat: &DensityEstimate, x: &[f64]) -> Result<MixtureDensities> {
    let delta = est.delta;
    let sd = est.sigma() * delta.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("sigma_hat = 0; no-jump law is a point mass".into()));
    }
    if x.len() < 3 || x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("mixture grid must have >= 3 increasing points"));
    }
    let mean = est.mu_hat * delta;
    let mass = p_hat.mass();
    if !(mass > 0.0) {
        return Err(Error::Degenerate(format!("jump density has mass {mass}")));
    }
    if (mass - 1.0).abs() > 0.05 {
        log::warn!("jump density integrates to {mass:.4}; rescaling to unit mass");
    }

    // Gaussian factor below e^{-40} beyond ±t_max.
    let t_max = (80.0f64).sqrt() / sd;
    let x_span = x[x.len() - 1] - x[0];
    let p_span = p_hat.x[p_hat.x.len() - 1] - p_hat.x[0];
    let support = x_span + p_span + 20.0 * sd + mean.abs() + x[0].abs().max(x[x.len() - 1].abs());
    let wanted = (2.0 * t_max * support / PI).ceil() as usize;
    let nodes = wanted.clamp(MIN_SPECTRUM_NODES, MAX_SPECTRUM_NODES);
    let freqs: Vec<f64> = symmetric_midpoints(nodes).into_iter().map(|v| v * t_max).collect();
    let step = 2.0 * t_max / nodes as f64;
    let spectrum: Vec<Complex64> = freqs
        .iter()
        .map(|&u| {
            Complex64::from_polar((-0.5 * sd * sd * u * u).exp(), mean * u)
                * fourier_tabulated(&p_hat.x, &p_hat.p_hat, u)
                / mass
        })
        .collect();

    let mut mix = MixtureDensities {
        x: x.to_vec(),
        f0: Vec::new(),
        f1: Vec::new(),
        mean,
        sd,
        freqs,
        spectrum,
        step,
    };
    mix.f0 = x.iter().map(|&v| mix.f0_at(v)).collect();
    mix.f1 = x.iter().map(|&v| mix.f1_at(v)).collect();
    Ok(mix)
}

/// Central no-jump interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub x1: f64,
    pub x2: f64,
    /// Further sign changes of `f0 − f1` on the grid that were ignored.
    pub extra_crossings: Vec<f64>,
}

fn bisect(mix: &MixtureDensities, mut inside: f64, mut outside: f64) -> f64 {
    // gap(inside) > 0 >= gap(outside)
    while (outside - inside).abs() > 1e-7 {
        let mid = 0.5 * (inside + outside);
        if mix.gap_at(mid) > 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Nearest crossings of `f0 − f1` on either side of the `f0` mode.
pub fn find_thresholds(mix: &MixtureDensities) -> Result<Thresholds> {
    let mode = mix.mean;
    // Relative slack absorbs quadrature error when f1 coincides with f0.
    if mix.gap_at(mode) <= 1e-9 * mix.f0_at(mode) {
        return Err(Error::NoDominanceRegion);
    }
    let gaps: Vec<f64> = mix.x.iter().zip(mix.f0.iter().zip(&mix.f1)).map(|(_, (a, b))| a - b).collect();
    let split = mix.x.partition_point(|&v| v < mode);

    // Walk outwards from the mode.
    let mut below: Vec<(f64, f64)> = vec![(mode, mix.gap_at(mode))];
    below.extend((0..split).rev().map(|i| (mix.x[i], gaps[i])));
    let mut above: Vec<(f64, f64)> = vec![(mode, mix.gap_at(mode))];
    above.extend((split..mix.x.len()).map(|i| (mix.x[i], gaps[i])));

    let crossings = |path: &[(f64, f64)]| -> Vec<(f64, f64)> {
        path.windows(2)
            .filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0))
            .map(|w| (w[0].0, w[1].0))
            .collect()
    };
    let low = crossings(&below);
    let high = crossings(&above);
    let (&(in1, out1), &(in2, out2)) = match (low.first(), high.first()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::NoDominanceRegion),
    };
    let extra: Vec<f64> = low[1..]
        .iter()
        .chain(&high[1..])
        .map(|&(a, b)| 0.5 * (a + b))
        .collect();
    if !extra.is_empty() {
        log::warn!("f0 - f1 changes sign {} more time(s) away from the centre: {extra:?}", extra.len());
    }
    Ok(Thresholds {
        x1: bisect(mix, in1, out1),
        x2: bisect(mix, in2, out2),
        extra_crossings: extra,
    })
}

/// Jump set `𝒦` (0-based positions) and its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpClassification {
    pub x1: f64,
    pub x2: f64,
    pub jump_set: Vec<usize>,
    pub complement: Vec<usize>,
}

impl JumpClassification {
    pub fn len(&self) -> usize {
        self.jump_set.len() + self.complement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indicators(&self) -> Vec<bool> {
        let mut out = vec![false; self.len()];
        for &k in &self.jump_set {
            out[k] = true;
        }
        out
    }

    pub fn from_indicators(x1: f64, x2: f64, indicators: &[bool]) -> Self {
        let (jumps, rest): (Vec<usize>, Vec<usize>) = (0..indicators.len()).partition(|&k| indicators[k]);
        JumpClassification {
            x1,
            x2,
            jump_set: jumps,
            complement: rest,
        }
    }

    pub fn jump_fraction(&self) -> f64 {
        self.jump_set.len() as f64 / self.len().max(1) as f64
    }
}

/// `J_k = 0` iff `D_k ∈ [x1, x2]`.
pub fn classify(returns: &ReturnSeries, x1: f64, x2: f64) -> Result<JumpClassification> {
    if !(x1 < x2) {
        return Err(Error::invalid(format!("thresholds must satisfy x1 < x2, got ({x1}, {x2})")));
    }
    let flags: Vec<bool> = returns.returns().iter().map(|&d| d < x1 || d > x2).collect();
    Ok(JumpClassification::from_indicators(x1, x2, &flags))
}

/// `(precision, recall)` of predicted jump flags against the truth.
pub fn precision_recall(predicted: &[bool], truth: &[bool]) -> (f64, f64) {
    let tp = predicted.iter().zip(truth).filter(|(&p, &t)| p && t).count() as f64;
    let pp = predicted.iter().filter(|&&p| p).count() as f64;
    let ap = truth.iter().filter(|&&t| t).count() as f64;
    let precision = if pp > 0.0 { tp / pp } else { 0.0 };
    let recall = if ap > 0.0 { tp / ap } else { 0.0 };
    (precision, recall)
}

/// Grid covering the observed increments with half a range of padding.
pub fn default_mixture_grid(returns: &ReturnSeries, points: usize) -> Vec<f64> {
    let (lo, hi) = returns
        .returns()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let pad = 0.5 * (hi - lo).max(1e-6);
    linspace(lo - pad, hi + pad, points)
}

/// Everything the classification step produces.
#[derive(Debug, Clone)]
pub struct ClassifierFit {
    pub mixture: MixtureDensities,
    pub thresholds: Thresholds,
    pub classification: JumpClassification,
}

pub fn fit_classifier(returns: &ReturnSeries, est: &SpectralEstimate, p_hat: &DensityEstimate, grid_points: usize) -> Result<ClassifierFit> {
    let grid = default_mixture_grid(returns, grid_points);
    let mixture = build_mixture(est, p_hat, &grid)?;
    let thresholds = find_thresholds(&mixture)?;
    let classification = classify(returns, thresholds.x1, thresholds.x2)?;
    Ok(ClassifierFit {
        mixture,
        thresholds,
        classification,
    })
}
