//! Two-part price model: a Gaussian random walk on no-jump intervals plus,
//! on the jump intervals of the attention series, an extra increment `η`
//! with its own jump-diffusion law.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deconv::{estimate_density, DensityEstimate};
use crate::ecf::EmpiricalExponent;
use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::simulate::{draw_increment, poisson_for, replica_rng, JumpLaw, LevyParams, TabulatedLaw};
use crate::spectral::{estimate, SpectralConfig, SpectralEstimate};
use crate::stats::{median, raw_moment, sample_sd, quantile_sorted, wilcoxon_ranksum};

const SMALL_JUMP_SAMPLE: usize = 100;

/// Gaussian MLE of the no-jump part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousFit {
    pub mu_tilde: f64,
    pub sigma_tilde: f64,
    pub n: usize,
}

/// `μ̃ = mean/Δ`, `σ̃² = (1/m) Σ (D − mean)² / Δ`.
pub fn fit_continuous(returns: &[f64], delta: f64) -> Result<ContinuousFit> {
    if returns.len() < 2 {
        return Err(Error::TooFewObservations(format!(
            "{} no-jump increments, need at least 2",
            returns.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let m = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / m;
    let var = returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    Ok(ContinuousFit {
        mu_tilde: mean / delta,
        sigma_tilde: (var / delta).sqrt(),
        n: returns.len(),
    })
}

/// Spectral fit and deconvolved density of the jump-interval increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPartFit {
    pub estimate: SpectralEstimate,
    pub density: DensityEstimate,
    pub n: usize,
}

impl JumpPartFit {
    /// Law of `η`, or `None` for its jump sizes when `λ°` clamps to zero.
    fn sampler(&self) -> Result<(LevyParams, Option<JumpLaw>)> {
        let e = &self.estimate;
        let params = LevyParams {
            mu: e.mu_hat,
            sigma: e.sigma(),
            lambda: e.lambda(),
            delta: e.delta,
        };
        let law = if params.lambda > 0.0 {
            Some(JumpLaw::Tabulated(TabulatedLaw::from_estimate(
                self.density.x.clone(),
                &self.density.p_hat,
            )?))
        } else {
            None
        };
        Ok((params, law))
    }
}

pub fn fit_jump_part(subset: &ReturnSeries, cfg: &SpectralConfig, t_n: f64, nodes: usize, x: &[f64]) -> Result<JumpPartFit> {
    if subset.is_empty() {
        return Err(Error::TooFewObservations("jump set is empty".into()));
    }
    if subset.len() < SMALL_JUMP_SAMPLE {
        log::warn!(
            "only {} jump-interval increments; the ECF is unstable below {SMALL_JUMP_SAMPLE}",
            subset.len()
        );
    }
    let phi = EmpiricalExponent::new(subset);
    let est = estimate(&phi, cfg)?;
    let density = estimate_density(&phi, &est, t_n, nodes, x)?;
    Ok(JumpPartFit {
        estimate: est,
        density,
        n: subset.len(),
    })
}

/// Both parts together with the split of the data they were fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceModelFit {
    pub delta: f64,
    pub continuous: ContinuousFit,
    pub jump_part: Option<JumpPartFit>,
    /// 0-based positions of the jump intervals.
    pub jump_set: Vec<usize>,
    pub len: usize,
    pub continuous_sample: Vec<f64>,
    pub jump_sample: Vec<f64>,
}

impl PriceModelFit {
    pub fn pattern(&self) -> Vec<bool> {
        let mut out = vec![false; self.len];
        for &k in &self.jump_set {
            out[k] = true;
        }
        out
    }
}

/// Splits `price` by `is_jump` and fits both parts.
pub fn fit_price_model(
    price: &ReturnSeries,
    is_jump: &[bool],
    cfg: &SpectralConfig,
    t_n: f64,
    nodes: usize,
    x: &[f64],
) -> Result<PriceModelFit> {
    if is_jump.len() != price.len() {
        return Err(Error::GridMismatch(format!(
            "{} jump indicators for {} price returns",
            is_jump.len(),
            price.len()
        )));
    }
    let (jumps, rest): (Vec<usize>, Vec<usize>) = (0..price.len()).partition(|&k| is_jump[k]);
    let cont = price.select(&rest)?;
    let jmp = price.select(&jumps)?;
    let continuous = fit_continuous(cont.returns(), price.delta())?;
    let jump_part = if jmp.is_empty() {
        log::warn!("no jump intervals; fitting the continuous part only");
        None
    } else {
        Some(fit_jump_part(&jmp, cfg, t_n, nodes, x)?)
    };
    Ok(PriceModelFit {
        delta: price.delta(),
        continuous,
        jump_part,
        jump_set: jumps,
        len: price.len(),
        continuous_sample: cont.returns().to_vec(),
        jump_sample: jmp.returns().to_vec(),
    })
}

fn draw_gaussian<R: Rng + ?Sized>(fit: &ContinuousFit, delta: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    fit.mu_tilde * delta + fit.sigma_tilde * delta.sqrt() * z
}

struct EtaSampler {
    params: LevyParams,
    law: JumpLaw,
    poisson: Option<rand_distr::Poisson<f64>>,
}

impl EtaSampler {
    fn new(part: &JumpPartFit) -> Result<Self> {
        let (params, law) = part.sampler()?;
        let poisson = if law.is_some() { poisson_for(&params)? } else { None };
        Ok(EtaSampler {
            params,
            // Never drawn from when `poisson` is `None`.
            law: law.unwrap_or(JumpLaw::Normal { mean: 0.0, sd: 1.0 }),
            poisson,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        draw_increment(&self.params, &self.law, self.poisson.as_ref(), rng).0
    }
}

/// `D_k = μ̃Δ + σ̃√Δ Z_k + η_k 𝕀{k ∈ 𝒦}`.
pub fn simulate_price(fit: &PriceModelFit, pattern: &[bool], seed: u64) -> Result<ReturnSeries> {
    simulate_price_stream(fit, pattern, seed, 0)
}

pub fn simulate_price_stream(fit: &PriceModelFit, pattern: &[bool], seed: u64, stream: u64) -> Result<ReturnSeries> {
    let eta = match (&fit.jump_part, pattern.iter().any(|&j| j)) {
        (Some(part), true) => Some(EtaSampler::new(part)?),
        (None, true) => return Err(Error::invalid("jump pattern given but the fit has no jump part")),
        _ => None,
    };
    let mut rng = replica_rng(seed, stream);
    let out = pattern
        .iter()
        .map(|&j| {
            let base = draw_gaussian(&fit.continuous, fit.delta, &mut rng);
            match (&eta, j) {
                (Some(e), true) => base + e.draw(&mut rng),
                _ => base,
            }
        })
        .collect();
    ReturnSeries::new(fit.delta, out)
}

/// Summary statistics reported in the confidence-interval tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    FirstMoment,
    SecondMoment,
    ThirdMoment,
    Sd,
    Median,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::FirstMoment,
        Statistic::SecondMoment,
        Statistic::ThirdMoment,
        Statistic::Sd,
        Statistic::Median,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::FirstMoment => "m1",
            Statistic::SecondMoment => "m2",
            Statistic::ThirdMoment => "m3",
            Statistic::Sd => "sd",
            Statistic::Median => "median",
        }
    }

    pub fn compute(&self, sample: &[f64]) -> f64 {
        match self {
            Statistic::FirstMoment => raw_moment(sample, 1),
            Statistic::SecondMoment => raw_moment(sample, 2),
            Statistic::ThirdMoment => raw_moment(sample, 3),
            Statistic::Sd => sample_sd(sample),
            Statistic::Median => median(sample),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRow {
    pub table: String,
    pub statistic: Statistic,
    pub lower: f64,
    pub point: f64,
    pub upper: f64,
}

/// Monte-Carlo percentile intervals: `samples` are draws from the fitted
/// model, `real` provides the point value.
pub fn moment_ci_table(table: &str, real: &[f64], samples: &[Vec<f64>], level: f64) -> Result<Vec<CiRow>> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least 2 simulated samples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must be in (0, 1), got {level}")));
    }
    let tail = 0.5 * (1.0 - level);
    Ok(Statistic::ALL
        .iter()
        .map(|&stat| {
            let mut values: Vec<f64> = samples.iter().map(|s| stat.compute(s)).collect();
            values.sort_by(f64::total_cmp);
            CiRow {
                table: table.to_string(),
                statistic: stat,
                lower: quantile_sorted(&values, tail),
                point: stat.compute(real),
                upper: quantile_sorted(&values, 1.0 - tail),
            }
        })
        .collect())
}

/// `replicates` i.i.d. samples of size `m` from the continuous part.
pub fn sample_continuous(fit: &PriceModelFit, replicates: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            (0..m).map(|_| draw_gaussian(&fit.continuous, fit.delta, &mut rng)).collect()
        })
        .collect()
}

/// `replicates` i.i.d. samples of size `m` of `η`.
pub fn sample_jump_part(part: &JumpPartFit, replicates: usize, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let eta = EtaSampler::new(part)?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            (0..m).map(|_| eta.draw(&mut rng)).collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub replicates: usize,
    pub sample_size: usize,
    pub level: f64,
    /// Mean rank-sum p-value of real vs simulated continuous parts.
    pub wilcoxon_continuous_mean_p: f64,
    pub wilcoxon_jump_mean_p: Option<f64>,
    pub rows: Vec<CiRow>,
}

fn mean_wilcoxon_p(real: &[f64], samples: &[Vec<f64>]) -> Result<f64> {
    let ps = samples
        .iter()
        .map(|s| wilcoxon_ranksum(real, s).map(|t| t.p_value))
        .collect::<Result<Vec<_>>>()?;
    Ok(ps.iter().sum::<f64>() / ps.len() as f64)
}

/// Interval tables for both parts plus the rank-sum comparison. Streams
/// `0..replicates` of `seed` feed the continuous part and the same streams
/// of `seed + 1` the jump part.
pub fn price_report(fit: &PriceModelFit, replicates: usize, sample_size: usize, level: f64, seed: u64) -> Result<PriceReport> {
    if sample_size == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let cont = sample_continuous(fit, replicates, sample_size, seed);
    let mut rows = moment_ci_table("continuous", &fit.continuous_sample, &cont, level)?;
    let wilcoxon_continuous_mean_p = mean_wilcoxon_p(&fit.continuous_sample, &cont)?;
    let wilcoxon_jump_mean_p = match &fit.jump_part {
        Some(part) => {
            let jumps = sample_jump_part(part, replicates, sample_size, seed.wrapping_add(1))?;
            rows.extend(moment_ci_table("jump", &fit.jump_sample, &jumps, level)?);
            Some(mean_wilcoxon_p(&fit.jump_sample, &jumps)?)
        }
        None => None,
    };
    Ok(PriceReport {
        replicates,
        sample_size,
        level,
        wilcoxon_continuous_mean_p,
        wilcoxon_jump_mean_p,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deconv::linspace;
    use crate::simulate::{simulate_increments, simulate_labeled};

    #[test]
    fn constant_sample() {
        let f = fit_continuous(&[0.1, 0.1, 0.1], 1.0).unwrap();
        assert!((f.mu_tilde - 0.1).abs() < 1e-15);
        assert!(f.sigma_tilde < 1e-12);
        assert!(matches!(fit_continuous(&[0.1], 1.0), Err(Error::TooFewObservations(_))));
    }

    #[test]
    fn gaussian_mle_within_three_se() {
        let delta = 0.5;
        let p = LevyParams::new(2.0, 3.0, 0.0, delta).unwrap();
        let law = JumpLaw::Normal { mean: 0.0, sd: 1.0 };
        let s = simulate_increments(&p, &law, 100_000, 5).unwrap();
        let f = fit_continuous(s.returns(), delta).unwrap();
        let n = 1e5f64;
        // se of mean/Δ is σ/√(nΔ); se of σ̂ is about σ/√(2n).
        assert!((f.mu_tilde - 2.0).abs() < 3.0 * 3.0 / (n * delta).sqrt());
        assert!((f.sigma_tilde - 3.0).abs() < 3.0 * 3.0 / (2.0 * n).sqrt());
    }

    fn toy_fit(sigma_tilde: f64) -> PriceModelFit {
        let p = LevyParams::new(0.0, 0.1, 0.2, 1.0).unwrap();
        let law = JumpLaw::Normal { mean: 0.0, sd: 0.8 };
        let path = simulate_labeled(&p, &law, 3000, 3).unwrap();
        let flags = path.jump_indicators();
        let cfg = SpectralConfig::new(2.0, 2.0, 0.3).unwrap();
        let mut fit = fit_price_model(&path.series, &flags, &cfg, 2.0, 400, &linspace(-4.0, 4.0, 401)).unwrap();
        fit.continuous.sigma_tilde = sigma_tilde;
        fit
    }

    #[test]
    fn split_is_exact() {
        let fit = toy_fit(0.1);
        let m = fit.continuous_sample.len() + fit.jump_sample.len();
        assert_eq!(m, fit.len);
        assert_eq!(fit.jump_set.len(), fit.jump_sample.len());
        assert_eq!(fit.continuous.n, fit.continuous_sample.len());
    }

    #[test]
    fn empty_jump_set_is_gaussian() {
        let fit = toy_fit(0.1);
        let pattern = vec![false; 500];
        let a = simulate_price(&fit, &pattern, 9).unwrap();
        let mut rng = replica_rng(9, 0);
        for &d in a.returns() {
            assert_eq!(d, draw_gaussian(&fit.continuous, 1.0, &mut rng));
        }
        assert!(matches!(
            fit_jump_part(&ReturnSeries::new(1.0, vec![]).unwrap(), &SpectralConfig::new(6.0, 6.0, 0.5).unwrap(), 6.0, 10, &[0.0, 1.0]),
            Err(Error::TooFewObservations(_))
        ));
    }

    #[test]
    fn pure_eta_draws_and_determinism() {
        let mut fit = toy_fit(0.0);
        fit.continuous.mu_tilde = 0.0;
        let pattern = vec![true; 200];
        let a = simulate_price(&fit, &pattern, 4).unwrap();
        let b = simulate_price(&fit, &pattern, 4).unwrap();
        assert_eq!(a, b);
        let eta = EtaSampler::new(fit.jump_part.as_ref().unwrap()).unwrap();
        let mut rng = replica_rng(4, 0);
        for &d in a.returns() {
            let _z: f64 = rng.sample(StandardNormal);
            assert_eq!(d, eta.draw(&mut rng));
        }
    }

    #[test]
    fn degenerate_intervals_collapse() {
        let real = vec![0.3; 50];
        let samples = vec![vec![0.3; 50]; 25];
        for row in moment_ci_table("t", &real, &samples, 0.99).unwrap() {
            assert_eq!(row.lower, row.point);
            assert_eq!(row.upper, row.point);
        }
        assert!(moment_ci_table("t", &real, &samples[..1], 0.99).is_err());
    }

    #[test]
    fn interval_coverage() {
        // Truth N(μΔ, σ²Δ); each outer replicate draws a "real" sample,
        // fits it and builds the intervals from 25 simulated samples.
        let (mu, sigma, delta) = (0.002, 0.037, 1.0);
        let truth = ContinuousFit {
            mu_tilde: mu,
            sigma_tilde: sigma,
            n: 0,
        };
        let population = [
            (Statistic::FirstMoment, mu),
            (Statistic::SecondMoment, mu * mu + sigma * sigma),
            (Statistic::ThirdMoment, mu.powi(3) + 3.0 * mu * sigma * sigma),
            (Statistic::Sd, sigma),
            (Statistic::Median, mu),
        ];
        let outer = 50;
        let mut covers_sample = [0usize; 5];
        let mut covers_population = [0usize; 5];
        for rep in 0..outer {
            let mut rng = replica_rng(1000, rep);
            let real: Vec<f64> = (0..1000).map(|_| draw_gaussian(&truth, delta, &mut rng)).collect();
            let fit = PriceModelFit {
                delta,
                continuous: fit_continuous(&real, delta).unwrap(),
                jump_part: None,
                jump_set: vec![],
                len: real.len(),
                continuous_sample: real.clone(),
                jump_sample: vec![],
            };
            let rows = price_report(&fit, 25, 1000, 0.99, 77 + rep).unwrap().rows;
            for (i, (stat, value)) in population.iter().enumerate() {
                let row = rows.iter().find(|r| r.statistic == *stat).unwrap();
                covers_sample[i] += usize::from(row.lower <= row.point && row.point <= row.upper);
                covers_population[i] += usize::from(row.lower <= *value && *value <= row.upper);
            }
        }
        for i in 0..5 {
            let stat = population[i].0;
            assert!(covers_sample[i] * 10 >= 9 * outer as usize, "{stat:?}: {}/{outer}", covers_sample[i]);
            // Expected population coverage of the 25-sample percentile
            // interval is about 0.92; 0.8 is three binomial sd below it.
            assert!(covers_population[i] * 10 >= 8 * outer as usize, "{stat:?}: {}/{outer}", covers_population[i]);
        }
    }
}
