//! Exact simulation of grid increments of an exponential-Lévy model with a
//! compound-Poisson jump part.
//!
//! Seed contract: every draw comes from a `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)` and switched to stream `stream` via
//! [`ChaCha8Rng::set_stream`]. Single-path functions use stream 0; Monte-Carlo
//! replicate `r` uses stream `r`, so results do not depend on how replicates
//! are scheduled across threads.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;

/// Drift, volatility and jump intensity per unit time, plus the grid step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub delta: f64,
}

impl LevyParams {
    pub fn new(mu: f64, sigma: f64, lambda: f64, delta: f64) -> Result<Self> {
        let p = LevyParams {
            mu,
            sigma,
            lambda,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu must be finite"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("delta must be > 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Density tabulated on an increasing grid, with its CDF precomputed for
/// inverse-transform sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedLaw {
    x: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedLaw {
    /// Strict constructor: density must be non-negative and integrate to one
    /// (trapezoid) within 1e-3.
    pub fn new(x: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        check_grid(&x, &density)?;
        if density.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid("tabulated density must be finite and >= 0"));
        }
        let mass = trapezoid(&x, &density);
        if (mass - 1.0).abs() > 1e-3 {
            return Err(Error::invalid(format!(
                "tabulated density integrates to {mass:.6}, expected 1"
            )));
        }
        Ok(Self::normalized(x, density, mass))
    }

    /// Lenient constructor for estimated densities: negative values are
    /// clipped to zero and the result renormalized.
    pub fn from_estimate(x: Vec<f64>, density: &[f64]) -> Result<Self> {
        check_grid(&x, density)?;
        let negatives = density.iter().filter(|&&p| p < 0.0).count();
        if negatives > 0 {
            log::warn!("clipping {negatives} negative density value(s) to zero before sampling");
        }
        let clipped: Vec<f64> = density
            .iter()
            .map(|&p| if p.is_finite() { p.max(0.0) } else { 0.0 })
            .collect();
        let mass = trapezoid(&x, &clipped);
        if !(mass > 0.0) {
            return Err(Error::invalid("tabulated density has no positive mass"));
        }
        Ok(Self::normalized(x, clipped, mass))
    }

    fn normalized(x: Vec<f64>, density: Vec<f64>, mass: f64) -> Self {
        let density: Vec<f64> = density.into_iter().map(|p| p / mass).collect();
        let mut cdf = Vec::with_capacity(x.len());
        cdf.push(0.0);
        for i in 1..x.len() {
            let step = 0.5 * (density[i] + density[i - 1]) * (x[i] - x[i - 1]);
            cdf.push(cdf[i - 1] + step);
        }
        let total = *cdf.last().unwrap();
        for c in &mut cdf {
            *c /= total;
        }
        TabulatedLaw { x, density, cdf }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Inverse CDF, linear between grid nodes.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let hi = self.cdf.partition_point(|&c| c < q).clamp(1, self.x.len() - 1);
        let lo = hi - 1;
        let span = self.cdf[hi] - self.cdf[lo];
        if span <= 0.0 {
            return self.x[lo];
        }
        let t = (q - self.cdf[lo]) / span;
        self.x[lo] + t * (self.x[hi] - self.x[lo])
    }

    /// Fourier transform `∫ e^{iux} p(x) dx` by the trapezoid rule.
    pub fn fourier(&self, u: f64) -> num_complex::Complex64 {
        crate::deconv::fourier_tabulated(&self.x, &self.density, u)
    }
}

fn check_grid(x: &[f64], density: &[f64]) -> Result<()> {
    if x.len() < 2 || x.len() != density.len() {
        return Err(Error::invalid("tabulated law needs >= 2 matched grid points"));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("tabulated grid must be strictly increasing"));
    }
    Ok(())
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (yw[0] + yw[1]) * (xw[1] - xw[0]))
        .sum()
}

/// Law of an individual jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    Normal { mean: f64, sd: f64 },
    /// Kou law: positive with probability `p`, exponential rates `eta_up`,
    /// `eta_down` on each side.
    DoubleExponential { p: f64, eta_up: f64, eta_down: f64 },
    Cauchy { location: f64, scale: f64 },
    Tabulated(TabulatedLaw),
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpLaw::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd > 0.0) {
                    return Err(Error::invalid("normal jump law needs sd > 0"));
                }
            }
            JumpLaw::DoubleExponential { p, eta_up, eta_down } => {
                if !(0.0..=1.0).contains(&p) || !(eta_up > 0.0) || !(eta_down > 0.0) {
                    return Err(Error::invalid(
                        "double-exponential law needs p in [0,1] and positive rates",
                    ));
                }
            }
            JumpLaw::Cauchy { location, scale } => {
                if !location.is_finite() || !(scale > 0.0) {
                    return Err(Error::invalid("cauchy jump law needs scale > 0"));
                }
            }
            JumpLaw::Tabulated(_) => {}
        }
        Ok(())
    }

    /// `E[e^{iuξ}]`.
    pub fn characteristic(&self, u: f64) -> num_complex::Complex64 {
        use num_complex::Complex64 as C;
        match self {
            JumpLaw::Normal { mean, sd } => C::from_polar((-0.5 * sd * sd * u * u).exp(), mean * u),
            JumpLaw::DoubleExponential { p, eta_up, eta_down } => {
                C::new(p * eta_up, 0.0) / C::new(*eta_up, -u)
                    + C::new((1.0 - p) * eta_down, 0.0) / C::new(*eta_down, u)
            }
            JumpLaw::Cauchy { location, scale } => C::from_polar((-scale * u.abs()).exp(), location * u),
            JumpLaw::Tabulated(t) => t.fourier(u),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            JumpLaw::DoubleExponential { p, eta_up, eta_down } => {
                let side: f64 = rng.random();
                let e: f64 = -(1.0 - rng.random::<f64>()).ln();
                if side < *p {
                    e / eta_up
                } else {
                    -e / eta_down
                }
            }
            JumpLaw::Cauchy { location, scale } => {
                let v: f64 = rng.random();
                location + scale * (std::f64::consts::PI * (v - 0.5)).tan()
            }
            JumpLaw::Tabulated(t) => t.quantile(rng.random()),
        }
    }
}

impl FromStr for JumpLaw {
    type Err = Error;

    /// Parses `normal:mean,sd`, `kou:p,eta_up,eta_down` or
    /// `cauchy:location,scale`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("jump law `{s}` should look like normal:0,1")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("jump law `{s}`: {e}")))?;
        let law = match (kind.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("normal", &[mean, sd]) => JumpLaw::Normal { mean, sd },
            ("kou" | "double-exponential", &[p, eta_up, eta_down]) => {
                JumpLaw::DoubleExponential { p, eta_up, eta_down }
            }
            ("cauchy", &[location, scale]) => JumpLaw::Cauchy { location, scale },
            _ => return Err(Error::invalid(format!("unknown jump law `{s}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Generator for stream `stream` of `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw from `law`.
pub fn sample_jump<R: Rng + ?Sized>(law: &JumpLaw, rng: &mut R) -> f64 {
    law.draw(rng)
}

/// One increment `μΔ + σ√Δ Z + Σ_{i≤P} ξ_i` together with its jump count.
pub fn draw_increment<R: Rng + ?Sized>(params: &LevyParams, law: &JumpLaw, poisson: Option<&Poisson<f64>>, rng: &mut R) -> (f64, u32) {
    let z: f64 = StandardNormal.sample(rng);
    let mut d = params.mu * params.delta + params.sigma * params.delta.sqrt() * z;
    let count = match poisson {
        Some(p) => p.sample(rng) as u32,
        None => 0,
    };
    for _ in 0..count {
        d += law.draw(rng);
    }
    (d, count)
}

pub(crate) fn poisson_for(params: &LevyParams) -> Result<Option<Poisson<f64>>> {
    let rate = params.lambda * params.delta;
    if rate > 0.0 {
        Poisson::new(rate)
            .map(Some)
            .map_err(|e| Error::invalid(format!("poisson rate {rate}: {e}")))
    } else {
        Ok(None)
    }
}

/// Increments plus the number of jumps that fell in each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub series: ReturnSeries,
    pub jump_counts: Vec<u32>,
}

impl SimulatedPath {
    pub fn jump_indicators(&self) -> Vec<bool> {
        self.jump_counts.iter().map(|&c| c > 0).collect()
    }
}

/// Like [`simulate_increments`] but also reports per-interval jump counts.
pub fn simulate_labeled_with(params: &LevyParams, law: &JumpLaw, n: usize, rng: &mut impl Rng) -> Result<SimulatedPath> {
    params.validate()?;
    law.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let poisson = poisson_for(params)?;
    let mut returns = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        let (d, c) = draw_increment(params, law, poisson.as_ref(), rng);
        returns.push(d);
        counts.push(c);
    }
    Ok(SimulatedPath {
        series: ReturnSeries::new(params.delta, returns)?,
        jump_counts: counts,
    })
}

pub fn simulate_labeled(params: &LevyParams, law: &JumpLaw, n: usize, seed: u64) -> Result<SimulatedPath> {
    simulate_labeled_with(params, law, n, &mut replica_rng(seed, 0))
}

pub fn simulate_increments(params: &LevyParams, law: &JumpLaw, n: usize, seed: u64) -> Result<ReturnSeries> {
    simulate_labeled(params, law, n, seed).map(|p| p.series)
}

/// Replicate `stream` of the simulation; see the module seed contract.
pub fn simulate_replicate(params: &LevyParams, law: &JumpLaw, n: usize, seed: u64, stream: u64) -> Result<ReturnSeries> {
    simulate_labeled_with(params, law, n, &mut replica_rng(seed, stream)).map(|p| p.series)
}

/// Brownian motion with drift, i.e. the `λ = 0` case.
pub fn simulate_brownian_baseline(mu: f64, sigma: f64, delta: f64, n: usize, seed: u64) -> Result<ReturnSeries> {
    let params = LevyParams::new(mu, sigma, 0.0, delta)?;
    simulate_increments(&params, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn degenerate_process_is_zero() {
        let p = LevyParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let r = simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, 5, 7).unwrap();
        assert_eq!(r.returns(), &[0.0; 5]);
    }

    #[test]
    fn pure_drift() {
        let p = LevyParams::new(2.0, 0.0, 0.0, 0.5).unwrap();
        let r = simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, 3, 7).unwrap();
        assert_eq!(r.returns(), &[1.0, 1.0, 1.0]);
        let r = simulate_brownian_baseline(2.0, 0.0, 0.5, 3, 1).unwrap();
        assert_eq!(r.returns(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LevyParams::new(0.0, -1.0, 0.0, 1.0).is_err());
        assert!(LevyParams::new(0.0, 1.0, -1.0, 1.0).is_err());
        assert!(LevyParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        let p = LevyParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 0.0 }, 3, 1).is_err());
        assert!(simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, 0, 1).is_err());
    }

    #[test]
    fn merton_moments() {
        let p = LevyParams::new(0.0, 1.0, 10.0, 0.1).unwrap();
        let n = 100_000;
        let r = simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, n, 11).unwrap();
        let (m, v) = mean_var(r.returns());
        // Var(D) = Δ(σ² + λE[ξ²]) = 1.1; fourth moment of D needed for the
        // variance standard error: E[D^4] = 3Δ²(σ²+λ)² + λΔ·E[ξ^4] for a
        // centered Gaussian-jump increment, E[ξ^4] = 3.
        let var = 1.1;
        let m4 = 3.0 * var * var + 10.0 * 0.1 * 3.0;
        let se_mean = (var / n as f64).sqrt();
        let se_var = ((m4 - var * var) / n as f64).sqrt();
        assert!(m.abs() < 3.0 * se_mean, "mean {m}");
        assert!((v - var).abs() < 3.0 * se_var, "var {v}");
    }

    #[test]
    fn brownian_variance_and_determinism() {
        let n = 100_000;
        let a = simulate_brownian_baseline(0.0, 1.0, 1.0, n, 3).unwrap();
        let b = simulate_brownian_baseline(0.0, 1.0, 1.0, n, 3).unwrap();
        assert_eq!(a, b);
        let (_, v) = mean_var(a.returns());
        assert!((v - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn lag_one_autocorrelation_small() {
        let p = LevyParams::new(0.0, 1.0, 10.0, 0.1).unwrap();
        let n = 100_000;
        let r = simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, n, 5).unwrap();
        let x = r.returns();
        let (m, v) = mean_var(x);
        let c: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n as f64 - 1.0);
        assert!((c / v).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn labels_match_counts() {
        let p = LevyParams::new(0.0, 0.0, 0.2, 1.0).unwrap();
        let path = simulate_labeled(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, 2000, 9).unwrap();
        for (d, &c) in path.series.returns().iter().zip(&path.jump_counts) {
            if c == 0 {
                assert_eq!(*d, 0.0);
            }
        }
        let freq = path.jump_indicators().iter().filter(|&&j| j).count() as f64 / 2000.0;
        assert!((freq - (1.0 - (-0.2f64).exp())).abs() < 0.03);
    }

    #[test]
    fn tabulated_uniform() {
        let x: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let law = JumpLaw::Tabulated(TabulatedLaw::new(x, vec![1.0; 101]).unwrap());
        let mut rng = replica_rng(1, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_jump(&law, &mut rng)).collect();
        assert!(draws.iter().all(|&d| (0.0..=1.0).contains(&d)));
        let (m, v) = mean_var(&draws);
        assert!((m - 0.5).abs() < 3.0 * (v / 1e5).sqrt());
    }

    #[test]
    fn tabulated_validation_and_clipping() {
        let x = vec![0.0, 1.0, 2.0];
        assert!(TabulatedLaw::new(x.clone(), vec![1.0, 1.0, 1.0]).is_err());
        assert!(TabulatedLaw::new(x.clone(), vec![-0.1, 1.0, 0.1]).is_err());
        let t = TabulatedLaw::from_estimate(x, &[-0.1, 1.0, 0.1]).unwrap();
        assert_eq!(t.density()[0], 0.0);
        assert!((trapezoid(t.x(), t.density()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cauchy_median() {
        let law = JumpLaw::Cauchy { location: 0.0, scale: 1.0 };
        let mut rng = replica_rng(2, 0);
        let mut d: Vec<f64> = (0..100_000).map(|_| sample_jump(&law, &mut rng)).collect();
        d.sort_by(f64::total_cmp);
        let med = 0.5 * (d[49_999] + d[50_000]);
        assert!(med.abs() < 0.02, "median {med}");
    }

    #[test]
    fn normal_draws_pass_ks() {
        let law = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
        let mut rng = replica_rng(4, 0);
        let d: Vec<f64> = (0..100_000).map(|_| sample_jump(&law, &mut rng)).collect();
        let res = crate::stats::ks_test(&d, crate::stats::standard_normal_cdf).unwrap();
        assert!(res.p_value > 0.01, "p = {}", res.p_value);
    }

    #[test]
    fn kou_mean() {
        let law = JumpLaw::DoubleExponential { p: 0.3, eta_up: 2.0, eta_down: 4.0 };
        let mut rng = replica_rng(5, 0);
        let d: Vec<f64> = (0..100_000).map(|_| sample_jump(&law, &mut rng)).collect();
        let (m, v) = mean_var(&d);
        let expect = 0.3 / 2.0 - 0.7 / 4.0;
        assert!((m - expect).abs() < 3.0 * (v / 1e5).sqrt());
        let phi = law.characteristic(0.7);
        let emp: num_complex::Complex64 = d
            .iter()
            .map(|x| num_complex::Complex64::from_polar(1.0, 0.7 * x))
            .sum::<num_complex::Complex64>()
            / 1e5;
        assert!((phi - emp).norm() < 0.01);
    }

    #[test]
    fn parse_laws() {
        assert_eq!(
            "normal:0,1".parse::<JumpLaw>().unwrap(),
            JumpLaw::Normal { mean: 0.0, sd: 1.0 }
        );
        assert!(matches!("kou:0.5,1,2".parse::<JumpLaw>().unwrap(), JumpLaw::DoubleExponential { .. }));
        assert!("cauchy:0".parse::<JumpLaw>().is_err());
        assert!("gamma:1,2".parse::<JumpLaw>().is_err());
    }

    #[test]
    fn streams_are_independent_of_order() {
        let p = LevyParams::new(0.0, 1.0, 10.0, 0.1).unwrap();
        let law = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
        let a = simulate_replicate(&p, &law, 50, 1, 3).unwrap();
        let _ = simulate_replicate(&p, &law, 50, 1, 2).unwrap();
        let b = simulate_replicate(&p, &law, 50, 1, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_replicate(&p, &law, 50, 1, 4).unwrap());
    }
}
