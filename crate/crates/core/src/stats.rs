//! Correlation coefficients and goodness-of-fit / independence tests.
//!
//! All p-values are large-sample approximations.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
    /// Sample size(s) entering the test.
    pub n: Vec<usize>,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, method: &str, n: Vec<usize>) -> Self {
        TestResult {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            method: method.to_string(),
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub coefficient: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: Correlation,
    pub kendall: Correlation,
    pub spearman: Correlation,
    pub n: usize,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

fn two_sided_normal(z: f64) -> f64 {
    2.0 * std_normal().sf(z.abs())
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * dist.sf(t.abs())
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

/// Average (mid) ranks, 1-based.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::GridMismatch(format!("{} vs {} observations", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::TooShort { need: 3, got: x.len() });
    }
    Ok(())
}

fn pearson_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance; correlation undefined".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// t-statistic p-value with `n − 2` degrees of freedom.
fn correlation_t_pvalue(r: f64, n: usize) -> f64 {
    let df = n as f64 - 2.0;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    two_sided_t(r * (df / (1.0 - r * r)).sqrt(), df)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y)?;
    let r = pearson_coefficient(x, y)?;
    Ok(Correlation {
        coefficient: r,
        p_value: correlation_t_pvalue(r, x.len()),
    })
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y)?;
    let r = pearson_coefficient(&ranks(x), &ranks(y))?;
    Ok(Correlation {
        coefficient: r,
        p_value: correlation_t_pvalue(r, x.len()),
    })
}

/// Sum over tie groups of `f(t)` for an ascending sample.
fn tie_sum(sorted: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        total += f((j - i) as f64);
        i = j;
    }
    total
}

fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall τ-b with tie correction, `O(n log n)`.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::GridMismatch(format!("{} vs {} observations", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort { need: 2, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let pairs = |t: f64| t * (t - 1.0) / 2.0;
    let x_ties = tie_sum(&xs, pairs);
    let mut joint_ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[j] == xs[i] && ys[j] == ys[i] {
            j += 1;
        }
        joint_ties += pairs((j - i) as f64);
        i = j;
    }
    let swaps = merge_count(&mut ys, &mut Vec::with_capacity(n)) as f64;
    let y_ties = tie_sum(&ys, pairs);

    let n0 = pairs(n as f64);
    let s = n0 - x_ties - y_ties + joint_ties - 2.0 * swaps;
    let denom = ((n0 - x_ties) * (n0 - y_ties)).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate("all values tied; Kendall tau undefined".into()));
    }
    let tau = (s / denom).clamp(-1.0, 1.0);

    let nf = n as f64;
    let xs_sorted = xs;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = tie_sum(&xs_sorted, |t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = tie_sum(&ys, |t| t * (t - 1.0) * (2.0 * t + 5.0));
    let t1 = tie_sum(&xs_sorted, |t| t * (t - 1.0));
    let u1 = tie_sum(&ys, |t| t * (t - 1.0));
    let t2 = tie_sum(&xs_sorted, |t| t * (t - 1.0) * (t - 2.0));
    let u2 = tie_sum(&ys, |t| t * (t - 1.0) * (t - 2.0));
    let var = (v0 - vt - vu) / 18.0
        + t1 * u1 / (2.0 * nf * (nf - 1.0))
        + if n > 2 { t2 * u2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0)) } else { 0.0 };
    let p_value = if var > 0.0 { two_sided_normal(s / var.sqrt()) } else { 1.0 };
    Ok(Correlation {
        coefficient: tau,
        p_value,
    })
}

pub fn correlations(x: &[f64], y: &[f64]) -> Result<Correlations> {
    Ok(Correlations {
        pearson: pearson(x, y)?,
        kendall: kendall_tau(x, y)?,
        spearman: spearman(x, y)?,
        n: x.len(),
    })
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (-m * m * pi2 / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if sample.is_empty() {
        return Err(Error::TooShort { need: 1, got: 0 });
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    });
    let sqn = n.sqrt();
    let p = kolmogorov_sf((sqn + 0.12 + 0.11 / sqn) * d);
    Ok(TestResult::new(d, p, "one-sample Kolmogorov-Smirnov", vec![s.len()]))
}

/// Mann–Whitney U (Wilcoxon rank-sum) with tie-corrected normal
/// approximation and continuity correction; `statistic` is `U` of `a`.
pub fn wilcoxon_ranksum(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooShort { need: 1, got: 0 });
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let r1: f64 = r[..a.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let total = n1 + n2;
    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let ties = tie_sum(&sorted, |t| t * t * t - t);
    let var = n1 * n2 / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)).max(1.0));
    let p = if var > 0.0 {
        let z = ((u1 - n1 * n2 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        two_sided_normal(z)
    } else {
        1.0
    };
    Ok(TestResult::new(u1, p, "Wilcoxon rank-sum (Mann-Whitney U)", vec![a.len(), b.len()]))
}

/// Pearson chi-squared on the `bins × bins` contingency table of
/// `(D_k, D_{k+lag})` with marginal-quantile bin edges.
pub fn chi2_independence(returns: &[f64], lag: usize, bins: usize) -> Result<TestResult> {
    if lag == 0 {
        return Err(Error::invalid("lag must be positive"));
    }
    if bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    if returns.len() <= lag {
        return Err(Error::TooShort {
            need: lag + 1,
            got: returns.len(),
        });
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..bins)
        .map(|j| quantile_sorted(&sorted, j as f64 / bins as f64))
        .collect();
    let bin = |v: f64| edges.partition_point(|&e| e < v);

    let mut table = vec![vec![0.0f64; bins]; bins];
    for k in 0..returns.len() - lag {
        table[bin(returns[k])][bin(returns[k + lag])] += 1.0;
    }
    let total: f64 = table.iter().flatten().sum();
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..bins).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let live_rows = rows.iter().filter(|&&r| r > 0.0).count();
    let live_cols = cols.iter().filter(|&&c| c > 0.0).count();
    if live_rows < 2 || live_cols < 2 {
        return Err(Error::Degenerate("contingency table has a single occupied row or column".into()));
    }
    let mut stat = 0.0;
    let mut sparse = 0usize;
    for i in 0..bins {
        for j in 0..bins {
            if rows[i] == 0.0 || cols[j] == 0.0 {
                continue;
            }
            let expected = rows[i] * cols[j] / total;
            if expected < 5.0 {
                sparse += 1;
            }
            stat += (table[i][j] - expected).powi(2) / expected;
        }
    }
    if sparse > 0 {
        log::warn!("chi-squared test: {sparse} cell(s) with expected count below 5");
    }
    let df = ((live_rows - 1) * (live_cols - 1)) as f64;
    let p = ChiSquared::new(df).expect("positive df").sf(stat);
    Ok(TestResult::new(stat, p, "chi-squared serial independence", vec![total as usize]))
}

/// Raw moment `n⁻¹ Σ x^k`.
pub fn raw_moment(sample: &[f64], k: i32) -> f64 {
    sample.iter().map(|x| x.powi(k)).sum::<f64>() / sample.len() as f64
}

/// Standard deviation with the `n − 1` denominator.
pub fn sample_sd(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = sample.iter().sum::<f64>() / n;
    (sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Parametric reference law fitted by maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum Baseline {
    Normal { mean: f64, sd: f64 },
    Cauchy { location: f64, scale: f64 },
}

impl Baseline {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Baseline::Normal { mean, sd } => standard_normal_cdf((x - mean) / sd),
            Baseline::Cauchy { location, scale } => 0.5 + ((x - location) / scale).atan() / std::f64::consts::PI,
        }
    }
}

/// Normal MLE: sample mean and the `1/n` standard deviation.
pub fn normal_mle(sample: &[f64]) -> Result<Baseline> {
    if sample.len() < 2 {
        return Err(Error::TooShort { need: 2, got: sample.len() });
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("constant sample".into()));
    }
    Ok(Baseline::Normal { mean, sd })
}

/// Cauchy MLE by the reweighting fixed point
/// `w_i = 1/(s² + (x_i − m)²)`, `m = Σw x / Σw`, `s² = n / (2 Σw)`,
/// started from the median and half the interquartile range.
pub fn cauchy_mle(sample: &[f64]) -> Result<Baseline> {
    if sample.len() < 3 {
        return Err(Error::TooShort { need: 3, got: sample.len() });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut m = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut s2 = (0.5 * iqr).powi(2);
    if !(s2 > 0.0) {
        return Err(Error::Degenerate("interquartile range is zero".into()));
    }
    let n = sample.len() as f64;
    for _ in 0..10_000 {
        let (mut sw, mut swx) = (0.0, 0.0);
        for &x in sample {
            let w = 1.0 / (s2 + (x - m).powi(2));
            sw += w;
            swx += w * x;
        }
        let m_new = swx / sw;
        let s2_new = n / (2.0 * sw);
        let done = (m_new - m).abs() <= 1e-12 * (1.0 + m.abs()) && (s2_new - s2).abs() <= 1e-12 * s2;
        m = m_new;
        s2 = s2_new;
        if done {
            break;
        }
    }
    Ok(Baseline::Cauchy {
        location: m,
        scale: s2.sqrt(),
    })
}

/// Baseline fit plus its KS test against the same sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub fit: Baseline,
    pub ks: TestResult,
}

pub fn baseline_fits(sample: &[f64]) -> Result<Vec<BaselineFit>> {
    [normal_mle(sample)?, cauchy_mle(sample)?]
        .into_iter()
        .map(|fit| {
            Ok(BaselineFit {
                ks: ks_test(sample, |x| fit.cdf(x))?,
                fit,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::replica_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn brute_kendall(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in i + 1..n {
                let sign = |p: f64, q: f64| if p == q { 0.0 } else { (p - q).signum() };
                let (a, b) = (sign(x[i], x[j]), sign(y[i], y[j]));
                if a == 0.0 && b == 0.0 {
                    continue;
                } else if a == 0.0 {
                    tx += 1.0;
                } else if b == 0.0 {
                    ty += 1.0;
                } else if a * b > 0.0 {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
        (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
    }

    #[test]
    fn perfect_concordance_and_discordance() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let c = correlations(&x, &x).unwrap();
        assert!((c.pearson.coefficient - 1.0).abs() < 1e-15);
        assert_eq!(c.kendall.coefficient, 1.0);
        assert!((c.spearman.coefficient - 1.0).abs() < 1e-15);

        let c = correlations(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((c.pearson.coefficient + 1.0).abs() < 1e-15);
        assert_eq!(c.kendall.coefficient, -1.0);
        assert!((c.spearman.coefficient + 1.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_hand_example() {
        let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert!((t.coefficient - 0.6).abs() < 1e-15);
    }

    #[test]
    fn correlation_errors() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn average_ranks() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn ks_quantile_sample_fits() {
        let n = 200;
        let u: Vec<f64> = (1..=n).map(|i| i as f64 / (n as f64 + 1.0)).collect();
        let r = ks_test(&u, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.statistic < 0.01);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn ks_zero_sample() {
        let r = ks_test(&vec![0.0; 1000], standard_normal_cdf).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-12);
        assert!(r.p_value < 1e-100);
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // Known quantiles of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
        assert!((kolmogorov_sf(0.8276) - 0.5).abs() < 1e-3);
        // The two series branches agree where they meet.
        let a = kolmogorov_sf(1.18 - 1e-9);
        let b = kolmogorov_sf(1.18);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn wilcoxon_edges() {
        let a: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let r = wilcoxon_ranksum(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        let b: Vec<f64> = (101..=150).map(|i| i as f64).collect();
        let r = wilcoxon_ranksum(&a, &b).unwrap();
        assert!(r.p_value < 1e-10);
        assert_eq!(r.statistic, 0.0);
        assert!(wilcoxon_ranksum(&[], &b).is_err());
    }

    #[test]
    fn chi2_detects_dependence() {
        // Slowly varying signal: D_{k+1} ≈ D_k.
        let x: Vec<f64> = (0..1000).map(|k| (0.01 * k as f64).sin()).collect();
        let r = chi2_independence(&x, 1, 4).unwrap();
        assert!(r.p_value < 1e-10);

        let mut rng = replica_rng(8, 0);
        let mut ar = vec![0.0f64; 1000];
        for k in 1..1000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            ar[k] = 0.5 * ar[k - 1] + z;
        }
        assert!(chi2_independence(&ar, 1, 4).unwrap().p_value < 0.01);
    }

    #[test]
    fn chi2_errors() {
        assert!(chi2_independence(&[1.0, 2.0], 2, 4).is_err());
        assert!(chi2_independence(&[1.0, 2.0, 3.0], 1, 1).is_err());
        assert!(chi2_independence(&[1.0; 20], 1, 4).is_err());
    }

    #[test]
    fn moments() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(raw_moment(&x, 1), 2.0);
        assert!((raw_moment(&x, 2) - 14.0 / 3.0).abs() < 1e-15);
        assert_eq!(sample_sd(&x), 1.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    proptest! {
        #[test]
        fn kendall_matches_brute_force(
            pairs in prop::collection::vec((0i32..8, 0i32..8), 3..50),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            match kendall_tau(&x, &y) {
                Ok(t) => prop_assert!((t.coefficient - brute_kendall(&x, &y)).abs() < 1e-12),
                Err(_) => prop_assert!(brute_kendall(&x, &y).is_nan()),
            }
        }

        #[test]
        fn spearman_is_pearson_on_ranks(seed in 0u64..10_000, n in 3usize..60) {
            let mut rng = replica_rng(seed, 0);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|v| v * v + rng.random::<f64>()).collect();
            let s = spearman(&x, &y).unwrap().coefficient;
            let p = pearson(&ranks(&x), &ranks(&y)).unwrap().coefficient;
            prop_assert!((s - p).abs() < 1e-15);
        }

        #[test]
        fn ks_invariant_under_monotone_maps(seed in 0u64..10_000) {
            let mut rng = replica_rng(seed, 1);
            let x: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
            let a = ks_test(&x, standard_normal_cdf).unwrap();
            let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let b = ks_test(&y, |v: f64| standard_normal_cdf(v.ln())).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
        }

        #[test]
        fn p_values_in_unit_interval(xs in prop::collection::vec(-5.0f64..5.0, 4..80)) {
            let half = xs.len() / 2;
            let w = wilcoxon_ranksum(&xs[..half], &xs[half..]).unwrap();
            prop_assert!((0.0..=1.0).contains(&w.p_value));
            let swapped = wilcoxon_ranksum(&xs[half..], &xs[..half]).unwrap();
            prop_assert!((w.p_value - swapped.p_value).abs() < 1e-12);
            let k = ks_test(&xs, standard_normal_cdf).unwrap();
            prop_assert!((0.0..=1.0).contains(&k.p_value));
        }
    }

    #[test]
    fn cauchy_fixed_point() {
        let mut rng = replica_rng(11, 0);
        let sample: Vec<f64> = (0..20_000)
            .map(|_| 1.5 + 0.5 * (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan())
            .collect();
        match cauchy_mle(&sample).unwrap() {
            Baseline::Cauchy { location, scale } => {
                assert!((location - 1.5).abs() < 0.03, "{location}");
                assert!((scale - 0.5).abs() < 0.03, "{scale}");
            }
            _ => unreachable!(),
        }
        let fits = baseline_fits(&sample).unwrap();
        assert!(fits[0].ks.p_value < 1e-6);
        assert!(fits[1].ks.p_value > 0.01);
    }

    #[test]
    fn normal_mle_values() {
        assert_eq!(
            normal_mle(&[1.0, 3.0]).unwrap(),
            Baseline::Normal { mean: 2.0, sd: 1.0 }
        );
        assert!(normal_mle(&[1.0, 1.0]).is_err());
    }
}
