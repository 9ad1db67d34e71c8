//! Weighted least-squares estimation of `(σ², λ, μ)` from the characteristic
//! exponent.
//!
//! For large `u`, `Re φ_Δ(u) ≈ −σ²u²/2 − λ` and `Im φ_Δ(u) ≈ μu`. Both fits
//! are discretized on `N` equal subintervals of `[ε, 1]`, rescaled to
//! `[εU_n, U_n]` for the real part and `[εV_n, V_n]` for the imaginary part,
//! and solved in closed form from the weighted power sums `Λ_d`, `Ψ_d` and `Υ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ecf::CharacteristicExponent;
use crate::error::{Error, Result};

/// Weight function on `[ε, 1]`; zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Weight {
    /// `w(x) = 1` on `[ε, 1]`.
    #[default]
    Indicator,
    /// `w(x) = c` on `[ε, 1]`.
    Constant(f64),
    /// `w(x) = x^p` on `[ε, 1]`.
    Power(f64),
}

impl Weight {
    pub fn eval(&self, x: f64, eps: f64) -> f64 {
        if !(eps..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            Weight::Indicator => 1.0,
            Weight::Constant(c) => c,
            Weight::Power(p) => x.powf(p),
        }
    }
}

/// Where inside each quadrature interval the node sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum NodeRule {
    #[default]
    Midpoint,
    Left,
    Right,
    /// Relative position in `[0, 1]` within the interval.
    Fraction(f64),
}

impl NodeRule {
    fn fraction(&self) -> f64 {
        match *self {
            NodeRule::Midpoint => 0.5,
            NodeRule::Left => 0.0,
            NodeRule::Right => 1.0,
            NodeRule::Fraction(f) => f,
        }
    }
}

pub const DEFAULT_NODES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub u_n: f64,
    pub v_n: f64,
    pub eps: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub weight: Weight,
    #[serde(default)]
    pub node_rule: NodeRule,
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

impl SpectralConfig {
    /// Indicator weight, midpoint nodes, [`DEFAULT_NODES`] intervals.
    pub fn new(u_n: f64, v_n: f64, eps: f64) -> Result<Self> {
        let cfg = SpectralConfig {
            u_n,
            v_n,
            eps,
            nodes: DEFAULT_NODES,
            weight: Weight::Indicator,
            node_rule: NodeRule::Midpoint,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_node_rule(mut self, rule: NodeRule) -> Self {
        self.node_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if !(self.u_n > 0.0) || !(self.v_n > 0.0) || !self.u_n.is_finite() || !self.v_n.is_finite() {
            return Err(Error::invalid("cutoffs U_n and V_n must be positive"));
        }
        if self.nodes < 2 {
            return Err(Error::invalid("need at least 2 quadrature intervals"));
        }
        let f = self.node_rule.fraction();
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::invalid("node fraction must lie in [0,1]"));
        }
        match self.weight {
            Weight::Constant(c) if !(c > 0.0) => {
                return Err(Error::invalid("constant weight must be positive"))
            }
            Weight::Power(p) if !p.is_finite() => return Err(Error::invalid("weight power must be finite")),
            _ => {}
        }
        Ok(())
    }

    /// Nodes `ũ_j ∈ I_j` on `[ε, 1]`.
    pub fn node_points(&self) -> Vec<f64> {
        let h = (1.0 - self.eps) / self.nodes as f64;
        let f = self.node_rule.fraction();
        (0..self.nodes).map(|j| self.eps + h * (j as f64 + f)).collect()
    }

    pub fn node_weights(&self) -> Vec<f64> {
        self.node_points().iter().map(|&x| self.weight.eval(x, self.eps)).collect()
    }
}

/// Weighted sums feeding the closed-form estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSums {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub psi0: f64,
    pub psi1: f64,
    pub upsilon: f64,
}

impl QuadSums {
    /// `Λ₂Λ₀ − Λ₁²`.
    pub fn determinant(&self) -> f64 {
        self.lambda2 * self.lambda0 - self.lambda1 * self.lambda1
    }
}

/// Values of `Re φ̂` at `ũ_j U_n` and `Im φ̂` at `ũ_j V_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
}

impl RegressionData {
    pub fn collect(phi: &dyn CharacteristicExponent, cfg: &SpectralConfig) -> Result<Self> {
        cfg.validate()?;
        let nodes = cfg.node_points();
        let weights = cfg.node_weights();
        let mut freqs: Vec<f64> = nodes.iter().map(|x| x * cfg.u_n).collect();
        freqs.extend(nodes.iter().map(|x| x * cfg.v_n));
        let values = phi.exponent(&freqs)?;
        let (re, im) = values.split_at(nodes.len());
        Ok(RegressionData {
            real: re.iter().map(|z| z.re).collect(),
            imag: im.iter().map(|z| z.im).collect(),
            nodes,
            weights,
        })
    }

    pub fn sums(&self, cfg: &SpectralConfig) -> QuadSums {
        let mut s = QuadSums {
            lambda0: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            psi0: 0.0,
            psi1: 0.0,
            upsilon: 0.0,
        };
        for j in 0..self.nodes.len() {
            let (x, w) = (self.nodes[j], self.weights[j]);
            let x2 = x * x;
            s.lambda0 += w;
            s.lambda1 += w * x2;
            s.lambda2 += w * x2 * x2;
            let uu = x * cfg.u_n;
            s.psi0 += w * self.real[j];
            s.psi1 += w * self.real[j] * uu * uu;
            s.upsilon += w * self.imag[j] * x * cfg.v_n;
        }
        s
    }
}

pub fn quad_sums(phi: &dyn CharacteristicExponent, cfg: &SpectralConfig) -> Result<QuadSums> {
    Ok(RegressionData::collect(phi, cfg)?.sums(cfg))
}

/// Closed-form minimizer of the real-part objective.
pub fn estimate_sigma_lambda(sums: &QuadSums, u_n: f64) -> Result<(f64, f64)> {
    let det = sums.determinant();
    if !(det > 1e-14 * sums.lambda2 * sums.lambda0) {
        return Err(Error::Degenerate(format!("Λ₂Λ₀ − Λ₁² = {det:e}")));
    }
    let u2 = u_n * u_n;
    let sigma2 = 2.0 * (sums.psi0 * sums.lambda1 * u2 - sums.psi1 * sums.lambda0) / (det * u2 * u2);
    let lambda = (sums.psi1 * sums.lambda1 - sums.psi0 * sums.lambda2 * u2) / (det * u2);
    Ok((sigma2, lambda))
}

/// Closed-form slope of the imaginary-part fit, `Υ / (Λ₁ V_n²)`.
pub fn estimate_mu(sums: &QuadSums, v_n: f64) -> Result<f64> {
    if !(sums.lambda1 > 0.0) {
        return Err(Error::Degenerate("Λ₁ = 0".into()));
    }
    Ok(sums.upsilon / (sums.lambda1 * v_n * v_n))
}

/// Solves the same weighted problems through a QR factorization of the
/// weighted design matrix, independently of the power-sum closed forms.
pub fn least_squares_route(data: &RegressionData, cfg: &SpectralConfig) -> Result<(f64, f64, f64)> {
    let m = data.nodes.len();
    let mut design = DMatrix::<f64>::zeros(m, 2);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut design_mu = DMatrix::<f64>::zeros(m, 1);
    let mut rhs_mu = DVector::<f64>::zeros(m);
    for j in 0..m {
        let sw = data.weights[j].sqrt();
        let uu = data.nodes[j] * cfg.u_n;
        // Re φ̂ = −(σ²)·u²/2 − λ
        design[(j, 0)] = -sw * 0.5 * uu * uu;
        design[(j, 1)] = -sw;
        rhs[j] = sw * data.real[j];
        design_mu[(j, 0)] = sw * data.nodes[j] * cfg.v_n;
        rhs_mu[j] = sw * data.imag[j];
    }
    let solve = |a: DMatrix<f64>, b: DVector<f64>| -> Result<DVector<f64>> {
        let qr = a.qr();
        let r = qr.r();
        let qtb = qr.q().transpose() * b;
        r.solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::Degenerate("rank-deficient design".into()))
    };
    let sl = solve(design, rhs)?;
    let mu = solve(design_mu, rhs_mu)?;
    Ok((sl[0], sl[1], mu[0]))
}

/// Fitted parameters with the sums they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Raw closed-form value; may be negative on noisy data.
    pub sigma2_hat: f64,
    /// Raw closed-form value; may be negative on noisy data.
    pub lambda_hat: f64,
    pub mu_hat: f64,
    pub delta: f64,
    pub config: SpectralConfig,
    pub diagnostics: QuadSums,
}

impl SpectralEstimate {
    /// `σ̂²` clamped at zero for downstream use.
    pub fn sigma2(&self) -> f64 {
        if self.sigma2_hat < 0.0 {
            log::warn!("sigma2_hat = {} < 0, clamping to 0", self.sigma2_hat);
        }
        self.sigma2_hat.max(0.0)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2().sqrt()
    }

    /// `λ̂` clamped at zero for downstream use.
    pub fn lambda(&self) -> f64 {
        if self.lambda_hat < 0.0 {
            log::warn!("lambda_hat = {} < 0, clamping to 0", self.lambda_hat);
        }
        self.lambda_hat.max(0.0)
    }

    pub fn from_values(sigma2_hat: f64, lambda_hat: f64, mu_hat: f64, delta: f64, config: SpectralConfig) -> Self {
        SpectralEstimate {
            sigma2_hat,
            lambda_hat,
            mu_hat,
            delta,
            config,
            diagnostics: QuadSums {
                lambda0: f64::NAN,
                lambda1: f64::NAN,
                lambda2: f64::NAN,
                psi0: f64::NAN,
                psi1: f64::NAN,
                upsilon: f64::NAN,
            },
        }
    }
}

/// Runs the complete fit.
pub fn estimate(phi: &dyn CharacteristicExponent, cfg: &SpectralConfig) -> Result<SpectralEstimate> {
    let data = RegressionData::collect(phi, cfg)?;
    let sums = data.sums(cfg);
    let (sigma2_hat, lambda_hat) = estimate_sigma_lambda(&sums, cfg.u_n)?;
    let mu_hat = estimate_mu(&sums, cfg.v_n)?;
    #[cfg(debug_assertions)]
    if let Ok((s, l, m)) = least_squares_route(&data, cfg) {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * (1.0 + a.abs().max(b.abs()));
        debug_assert!(
            close(s, sigma2_hat) && close(l, lambda_hat) && close(m, mu_hat),
            "closed form ({sigma2_hat}, {lambda_hat}, {mu_hat}) disagrees with QR ({s}, {l}, {m})"
        );
    }
    Ok(SpectralEstimate {
        sigma2_hat,
        lambda_hat,
        mu_hat,
        delta: phi.delta(),
        config: *cfg,
        diagnostics: sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecf::EmpiricalExponent;
    use crate::ingest::ReturnSeries;
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// Exponent with `Re = −σ²u²/2 − λ`, `Im = μu`.
    struct Linear {
        sigma2: f64,
        lambda: f64,
        mu: f64,
    }

    impl CharacteristicExponent for Linear {
        fn delta(&self) -> f64 {
            1.0
        }
        fn exponent(&self, u: &[f64]) -> Result<Vec<Complex64>> {
            Ok(u
                .iter()
                .map(|&v| Complex64::new(-0.5 * self.sigma2 * v * v - self.lambda, self.mu * v))
                .collect())
        }
    }

    #[test]
    fn lambda0_counts_nodes() {
        let cfg = SpectralConfig::new(6.0, 6.0, 0.5).unwrap().with_nodes(37);
        let s = quad_sums(&Linear { sigma2: 1.0, lambda: 1.0, mu: 0.0 }, &cfg).unwrap();
        assert_eq!(s.lambda0, 37.0);
    }

    #[test]
    fn single_node_powers() {
        // One interval [0.5, 1] with midpoint 0.75; validate() needs N >= 2, so
        // feed the regression data directly.
        let cfg = SpectralConfig::new(1.0, 1.0, 0.5).unwrap();
        let data = RegressionData {
            nodes: vec![0.75],
            weights: vec![1.0],
            real: vec![0.0],
            imag: vec![0.0],
        };
        let s = data.sums(&cfg);
        assert_eq!(s.lambda1, 0.5625);
        assert!((s.lambda2 - 0.31640625).abs() < 1e-15);
    }

    #[test]
    fn pure_drift_sample_recovers_mu_exactly() {
        let r = ReturnSeries::new(1.0, vec![2.0; 25]).unwrap();
        let cfg = SpectralConfig::new(3.0, 4.0, 0.5).unwrap();
        let phi = EmpiricalExponent::new(&r);
        let s = quad_sums(&phi, &cfg).unwrap();
        assert!(s.psi0.abs() < 1e-12 && s.psi1.abs() < 1e-12);
        let expect_ups = 2.0 * 16.0 * s.lambda1;
        assert!((s.upsilon - expect_ups).abs() < 1e-9 * expect_ups);
        let mu = estimate_mu(&s, cfg.v_n).unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_recovery() {
        let cfg = SpectralConfig::new(6.0, 6.0, 0.5).unwrap();
        let est = estimate(&Linear { sigma2: 1.0, lambda: 10.0, mu: 0.0 }, &cfg).unwrap();
        assert!((est.sigma2_hat - 1.0).abs() < 1e-10);
        assert!((est.lambda_hat - 10.0).abs() < 1e-10);
        assert!(est.mu_hat.abs() < 1e-12);
    }

    #[test]
    fn zero_response() {
        let cfg = SpectralConfig::new(6.0, 6.0, 0.5).unwrap();
        let est = estimate(&Linear { sigma2: 0.0, lambda: 0.0, mu: 0.0 }, &cfg).unwrap();
        assert_eq!((est.sigma2_hat, est.lambda_hat, est.mu_hat), (0.0, 0.0, 0.0));
    }

    #[test]
    fn degenerate_sums() {
        let s = QuadSums {
            lambda0: 1.0,
            lambda1: 0.5,
            lambda2: 0.25,
            psi0: 1.0,
            psi1: 1.0,
            upsilon: 1.0,
        };
        assert!(matches!(estimate_sigma_lambda(&s, 1.0), Err(Error::Degenerate(_))));
        let s = QuadSums { lambda1: 0.0, ..s };
        assert!(estimate_mu(&s, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SpectralConfig::new(6.0, 6.0, 0.0).is_err());
        assert!(SpectralConfig::new(6.0, 6.0, 1.0).is_err());
        assert!(SpectralConfig::new(-1.0, 6.0, 0.5).is_err());
        assert!(SpectralConfig::new(6.0, 6.0, 0.5).unwrap().with_nodes(1).validate().is_err());
        let points = SpectralConfig::new(1.0, 1.0, 0.5).unwrap().with_nodes(2).node_points();
        assert_eq!(points, vec![0.625, 0.875]);
    }

    #[test]
    fn clamped_accessors() {
        let cfg = SpectralConfig::new(6.0, 6.0, 0.5).unwrap();
        let e = SpectralEstimate::from_values(-0.1, -2.0, 0.3, 0.1, cfg);
        assert_eq!(e.sigma2(), 0.0);
        assert_eq!(e.lambda(), 0.0);
        assert_eq!(e.lambda_hat, -2.0);
    }

    proptest! {
        #[test]
        fn weight_scale_invariance(c in 0.01f64..100.0, p in -2.0f64..3.0, seed in 0u64..1000) {
            let r = crate::simulate::simulate_increments(
                &crate::simulate::LevyParams::new(0.1, 1.0, 5.0, 0.1).unwrap(),
                &crate::simulate::JumpLaw::Normal { mean: 0.0, sd: 1.0 },
                400,
                seed,
            ).unwrap();
            let phi = EmpiricalExponent::new(&r).with_floor(0.0);
            let base = SpectralConfig::new(4.0, 4.0, 0.5).unwrap().with_weight(Weight::Power(p));
            let a = estimate(&phi, &base).unwrap();
            let data = RegressionData::collect(&phi, &base).unwrap();
            let scaled = RegressionData { weights: data.weights.iter().map(|w| w * c).collect(), ..data };
            let s = scaled.sums(&base);
            let (s2, l) = estimate_sigma_lambda(&s, base.u_n).unwrap();
            let m = estimate_mu(&s, base.v_n).unwrap();
            let rel = |x: f64, y: f64| (x - y).abs() / (1.0 + x.abs());
            prop_assert!(rel(a.sigma2_hat, s2) < 1e-10);
            prop_assert!(rel(a.lambda_hat, l) < 1e-10);
            prop_assert!(rel(a.mu_hat, m) < 1e-10);
        }
    }
}
