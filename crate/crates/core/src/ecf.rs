//! Empirical characteristic function and the characteristic exponent
//! `φ_Δ(u) = Δ⁻¹ log E[e^{iuD}]`.
//!
//! The imaginary part of the log-ECF is the continuously unwrapped phase,
//! anchored at `θ(0) = 0`. Phase continuity between two evaluated frequencies
//! `a < b` is certified when `max(|ecf(a)|, |ecf(b)|) > L·(b − a)`, where
//! `L = n⁻¹ Σ|D_k|` bounds the derivative of the ECF; otherwise the interval
//! is bisected. A point is usable when its modulus clears the floor and the
//! phase path from the origin to it is certified.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::simulate::{JumpLaw, LevyParams};

/// Source of characteristic-exponent values, either estimated from data or
/// known in closed form.
pub trait CharacteristicExponent: Sync {
    fn delta(&self) -> f64;

    /// `φ_Δ(u)` at every requested frequency, in request order.
    fn exponent(&self, u: &[f64]) -> Result<Vec<Complex64>>;
}

/// `n⁻¹ Σ_k e^{iuD_k}` at every `u`.
pub fn ecf(returns: &ReturnSeries, u: &[f64]) -> Vec<Complex64> {
    u.iter().map(|&v| ecf_at(returns.returns(), v)).collect()
}

fn ecf_at(data: &[f64], u: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let (mut re, mut im) = (0.0, 0.0);
    for &d in data {
        let (s, c) = (u * d).sin_cos();
        re += c;
        im += s;
    }
    let n = data.len() as f64;
    Complex64::new(re / n, im / n)
}

/// Default modulus floor `1/√n`.
pub fn default_floor(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// Log-ECF values on a sorted frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcfGrid {
    pub u: Vec<f64>,
    pub phi_hat: Vec<Complex64>,
    /// `|ecf(u)|` before taking logarithms.
    pub modulus: Vec<f64>,
    pub usable: Vec<bool>,
    pub n: usize,
    pub delta: f64,
    pub floor: f64,
}

impl EcfGrid {
    pub fn first_unusable(&self) -> Option<usize> {
        self.usable.iter().position(|&ok| !ok)
    }

    pub fn require_usable(&self) -> Result<()> {
        match self.first_unusable() {
            None => Ok(()),
            Some(i) => Err(Error::ModulusBelowFloor {
                u: self.u[i],
                modulus: self.modulus[i],
                floor: self.floor,
            }),
        }
    }
}

/// [`log_ecf_with_floor`] with the default floor.
pub fn log_ecf(returns: &ReturnSeries, u: &[f64]) -> Result<EcfGrid> {
    log_ecf_with_floor(returns, u, default_floor(returns.len()))
}

/// `φ̂_Δ(u) = Δ⁻¹(log|ecf(u)| + iθ(u))` on a strictly increasing grid.
pub fn log_ecf_with_floor(returns: &ReturnSeries, u: &[f64], floor: f64) -> Result<EcfGrid> {
    if returns.is_empty() {
        return Err(Error::TooShort { need: 1, got: 0 });
    }
    if u.windows(2).any(|w| !(w[1] > w[0])) || u.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("frequency grid must be finite and strictly increasing"));
    }
    let data = returns.returns();
    let lip = data.iter().map(|d| d.abs()).sum::<f64>() / data.len() as f64;
    let split = u.partition_point(|&v| v < 0.0);

    let mut points = vec![PhasePoint::default(); u.len()];
    // Positive side walks up from the origin, negative side walks down.
    let pos = unwrap_from_origin(data, lip, floor, u[split..].iter().copied());
    points[split..].copy_from_slice(&pos);
    let neg = unwrap_from_origin(data, lip, floor, u[..split].iter().rev().copied());
    for (slot, p) in points[..split].iter_mut().rev().zip(neg) {
        *slot = p;
    }

    let delta = returns.delta();
    let mut phi_hat = Vec::with_capacity(u.len());
    let mut modulus = Vec::with_capacity(u.len());
    let mut usable = Vec::with_capacity(u.len());
    for p in &points {
        let m = p.z.norm();
        phi_hat.push(Complex64::new(m.ln(), p.theta) / delta);
        modulus.push(m);
        usable.push(p.certified && m >= floor);
    }
    Ok(EcfGrid {
        u: u.to_vec(),
        phi_hat,
        modulus,
        usable,
        n: data.len(),
        delta,
        floor,
    })
}

#[derive(Debug, Clone, Copy)]
struct PhasePoint {
    z: Complex64,
    theta: f64,
    certified: bool,
}

impl Default for PhasePoint {
    fn default() -> Self {
        PhasePoint {
            z: Complex64::new(1.0, 0.0),
            theta: 0.0,
            certified: true,
        }
    }
}

struct Walker<'a> {
    data: &'a [f64],
    lip: f64,
    floor: f64,
    theta: f64,
    certified: bool,
}

impl Walker<'_> {
    fn advance(&mut self, a: f64, za: Complex64, b: f64, zb: Complex64) {
        let reach = self.lip * (b - a).abs();
        let anchor = za.norm().max(zb.norm());
        if !self.certified || anchor > reach || reach == 0.0 {
            self.theta += (zb * za.conj()).arg();
            return;
        }
        // Below half the floor the phase is noise; stop refining.
        if anchor < 0.5 * self.floor || (b - a).abs() < 1e-12 {
            self.certified = false;
            self.theta += (zb * za.conj()).arg();
            return;
        }
        let m = 0.5 * (a + b);
        let zm = ecf_at(self.data, m);
        self.advance(a, za, m, zm);
        self.advance(m, zm, b, zb);
    }
}

fn unwrap_from_origin(data: &[f64], lip: f64, floor: f64, targets: impl Iterator<Item = f64>) -> Vec<PhasePoint> {
    let mut w = Walker {
        data,
        lip,
        floor,
        theta: 0.0,
        certified: true,
    };
    let mut prev_u = 0.0;
    let mut prev_z = Complex64::new(1.0, 0.0);
    let mut out = Vec::new();
    for t in targets {
        let z = ecf_at(data, t);
        w.advance(prev_u, prev_z, t, z);
        out.push(PhasePoint {
            z,
            theta: w.theta,
            certified: w.certified,
        });
        prev_u = t;
        prev_z = z;
    }
    out
}

/// Characteristic exponent estimated from a return sample.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalExponent<'a> {
    returns: &'a ReturnSeries,
    floor: f64,
}

impl<'a> EmpiricalExponent<'a> {
    pub fn new(returns: &'a ReturnSeries) -> Self {
        EmpiricalExponent {
            returns,
            floor: default_floor(returns.len()),
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn returns(&self) -> &ReturnSeries {
        self.returns
    }
}

impl CharacteristicExponent for EmpiricalExponent<'_> {
    fn delta(&self) -> f64 {
        self.returns.delta()
    }

    /// Evaluated on `|u|`; negative frequencies use Hermitian symmetry so
    /// `φ̂(−u) = conj φ̂(u)` holds exactly.
    fn exponent(&self, u: &[f64]) -> Result<Vec<Complex64>> {
        let mut grid: Vec<f64> = u.iter().map(|v| v.abs()).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let eval = log_ecf_with_floor(self.returns, &grid, self.floor)?;
        eval.require_usable()?;
        Ok(u
            .iter()
            .map(|&v| {
                let i = grid.partition_point(|&g| g < v.abs());
                if v < 0.0 {
                    eval.phi_hat[i].conj()
                } else {
                    eval.phi_hat[i]
                }
            })
            .collect())
    }
}

/// Exact exponent `iμu − σ²u²/2 − λ + λ𝓕[p](u)` of a parametric model.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyExponent {
    pub params: LevyParams,
    pub law: JumpLaw,
}

impl LevyExponent {
    pub fn new(params: LevyParams, law: JumpLaw) -> Self {
        LevyExponent { params, law }
    }

    pub fn at(&self, u: f64) -> Complex64 {
        let LevyParams { mu, sigma, lambda, .. } = self.params;
        Complex64::new(-0.5 * sigma * sigma * u * u - lambda, mu * u) + lambda * self.law.characteristic(u)
    }

    /// Large-frequency approximation `iμu − σ²u²/2 − λ`.
    pub fn asymptote(&self, u: f64) -> Complex64 {
        let LevyParams { mu, sigma, lambda, .. } = self.params;
        Complex64::new(-0.5 * sigma * sigma * u * u - lambda, mu * u)
    }
}

impl CharacteristicExponent for LevyExponent {
    fn delta(&self) -> f64 {
        self.params.delta
    }

    fn exponent(&self, u: &[f64]) -> Result<Vec<Complex64>> {
        Ok(u.iter().map(|&v| self.at(v)).collect())
    }
}
