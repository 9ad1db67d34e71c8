//! Data-driven choice of the spectral cutoffs.
//!
//! Every candidate `(U_n, V_n, ε)` is fitted, the fitted model is simulated
//! `R` times, and the candidate is scored by the mean squared distance
//! between the kernel density of the data and that of each simulated
//! sample. All candidates share the same random streams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deconv::{estimate_density, linspace, DEFAULT_DENSITY_NODES};
use crate::ecf::EmpiricalExponent;
use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::kde::kde_discrepancy;
use crate::simulate::{replica_rng, simulate_labeled_with, JumpLaw, LevyParams, TabulatedLaw};
use crate::spectral::{estimate, SpectralConfig, DEFAULT_NODES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub u_n: f64,
    pub v_n: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    pub replicates: usize,
    /// Size of each simulated sample; the data length when `None`.
    pub sample_size: Option<usize>,
    pub nodes: usize,
    pub density_nodes: usize,
    pub density_points: usize,
    /// Inversion cutoff; `U_n` of the candidate when `None`.
    pub t_n: Option<f64>,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            replicates: 25,
            sample_size: None,
            nodes: DEFAULT_NODES,
            density_nodes: DEFAULT_DENSITY_NODES,
            density_points: 1000,
            t_n: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: Candidate,
    /// `None` when the candidate could not be fitted.
    pub score: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: SpectralConfig,
    pub best_score: f64,
    pub scores: Vec<CandidateScore>,
}

/// Fitted jump-diffusion for one candidate.
pub fn fitted_model(returns: &ReturnSeries, cfg: &SpectralConfig, t_n: f64, density_nodes: usize, density_points: usize) -> Result<(LevyParams, Option<JumpLaw>)> {
    let phi = EmpiricalExponent::new(returns);
    let est = estimate(&phi, cfg)?;
    let params = LevyParams::new(est.mu_hat, est.sigma(), est.lambda(), returns.delta())?;
    if params.lambda == 0.0 {
        return Ok((params, None));
    }
    let (lo, hi) = returns
        .returns()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let pad = 0.25 * (hi - lo).max(1e-6);
    let x = linspace(lo - pad, hi + pad, density_points);
    let density = estimate_density(&phi, &est, t_n, density_nodes, &x)?;
    let law = TabulatedLaw::from_estimate(density.x, &density.p_hat)?;
    Ok((params, Some(JumpLaw::Tabulated(law))))
}

fn score(returns: &ReturnSeries, c: &Candidate, tc: &TuneConfig) -> Result<f64> {
    let cfg = SpectralConfig::new(c.u_n, c.v_n, c.eps)?.with_nodes(tc.nodes);
    let (params, law) = fitted_model(returns, &cfg, tc.t_n.unwrap_or(c.u_n), tc.density_nodes, tc.density_points)?;
    let law = law.unwrap_or(JumpLaw::Normal { mean: 0.0, sd: 1.0 });
    let m = tc.sample_size.unwrap_or(returns.len());
    let mut total = 0.0;
    for r in 0..tc.replicates as u64 {
        let sim = simulate_labeled_with(&params, &law, m, &mut replica_rng(tc.seed, r))?;
        total += kde_discrepancy(returns.returns(), sim.series.returns())?;
    }
    Ok(total / tc.replicates as f64)
}

/// Scores every candidate and returns the minimizer. Ties go to the
/// earliest candidate.
pub fn select_cutoffs(returns: &ReturnSeries, candidates: &[Candidate], tc: &TuneConfig) -> Result<TuneResult> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate grid is empty"));
    }
    if tc.replicates == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let scores: Vec<CandidateScore> = candidates
        .par_iter()
        .map(|c| match score(returns, c, tc) {
            Ok(s) => CandidateScore {
                candidate: *c,
                score: Some(s),
                status: "ok".into(),
            },
            Err(e) => CandidateScore {
                candidate: *c,
                score: None,
                status: e.to_string(),
            },
        })
        .collect();
    let best = scores
        .iter()
        .filter_map(|s| s.score.map(|v| (s.candidate, v)))
        .fold(None::<(Candidate, f64)>, |acc, (c, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((c, v)),
        });
    let (c, best_score) = best.ok_or(Error::NoUsableCandidate(candidates.len()))?;
    Ok(TuneResult {
        best: SpectralConfig::new(c.u_n, c.v_n, c.eps)?.with_nodes(tc.nodes),
        best_score,
        scores,
    })
}

/// Parses `a:b:step` (inclusive), a comma list, or a single number.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::invalid(format!("bad number `{s}` in `{spec}`: {e}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(Error::invalid(format!("range `{spec}` needs a <= b and step > 0")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + step * i as f64).collect())
        }
        [single] => single.split(',').map(num).collect(),
        _ => Err(Error::invalid(format!("range `{spec}` must be a:b:step or a list"))),
    }
}

/// Cartesian product, `u` outermost.
pub fn candidate_grid(u: &[f64], v: &[f64], eps: &[f64]) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(u.len() * v.len() * eps.len());
    for &u_n in u {
        for &v_n in v {
            for &e in eps {
                out.push(Candidate { u_n, v_n, eps: e });
            }
        }
    }
    out
}
