//! End-to-end orchestration: configuration, the staged run that writes the
//! output bundle, and the canned replication studies.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deconv::{estimate_density, linspace, mse, DensityEstimate, DEFAULT_DENSITY_NODES};
use crate::ecf::{log_ecf_with_floor, default_floor, EmpiricalExponent};
use crate::error::{Error, Result};
use crate::ingest::{align, load_csv, log_returns, ReturnSeries};
use crate::io;
use crate::jumps::{build_mixture, classify, default_mixture_grid, find_thresholds, JumpClassification};
use crate::kde::{gaussian_kde, pooled_grid, KDE_POINTS};
use crate::pricefit::{fit_price_model, price_report, PriceModelFit, PriceReport};
use crate::simulate::{replica_rng, simulate_labeled_with, simulate_replicate, JumpLaw, LevyParams};
use crate::spectral::{estimate, SpectralConfig, SpectralEstimate};
use crate::stats::{baseline_fits, chi2_independence, correlations, BaselineFit, Correlations, TestResult};
use crate::tune::fitted_model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `date,value` level series; log-returns are taken here.
    #[default]
    Levels,
    /// Files in the `index,date,return` layout.
    Returns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub attention: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<PathBuf>,
    #[serde(default)]
    pub format: DataFormat,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_value_column")]
    pub attention_column: String,
    #[serde(default = "default_value_column")]
    pub price_column: String,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_date_column() -> String {
    "date".into()
}

fn default_value_column() -> String {
    "value".into()
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub points: usize,
    pub nodes: usize,
}

impl Default for DensityGrid {
    fn default() -> Self {
        DensityGrid {
            xmin: -1.0,
            xmax: 1.0,
            points: 1000,
            nodes: DEFAULT_DENSITY_NODES,
        }
    }
}

impl DensityGrid {
    pub fn x(&self) -> Vec<f64> {
        linspace(self.xmin, self.xmax, self.points)
    }

    fn validate(&self) -> Result<()> {
        if !(self.xmin < self.xmax) || self.points < 2 || self.nodes < 2 {
            return Err(Error::Config("density grid needs xmin < xmax, points >= 2, nodes >= 2".into()));
        }
        Ok(())
    }
}

/// Cutoffs plus inversion settings for one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub cutoffs: SpectralConfig,
    /// Inversion cutoff; `U_n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_n: Option<f64>,
    #[serde(default)]
    pub density: DensityGrid,
}

impl FitConfig {
    pub fn new(u_n: f64, v_n: f64, eps: f64) -> Self {
        FitConfig {
            cutoffs: SpectralConfig::new(u_n, v_n, eps).expect("valid default cutoffs"),
            t_n: None,
            density: DensityGrid::default(),
        }
    }

    pub fn t_n(&self) -> f64 {
        self.t_n.unwrap_or(self.cutoffs.u_n)
    }
}

fn default_attention_fit() -> FitConfig {
    FitConfig::new(17.0, 15.0, 0.1)
}

fn default_price_fit() -> FitConfig {
    FitConfig::new(15.0, 23.0, 0.6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    /// Overrides for the computed crossings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x2: Option<f64>,
    pub grid_points: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            x1: None,
            x2: None,
            grid_points: 2001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub replicates: usize,
    pub sample_size: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            replicates: 25,
            sample_size: 1000,
            level: 0.99,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub chi2_lag: usize,
    pub chi2_bins: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { chi2_lag: 1, chi2_bins: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    #[serde(default = "default_attention_fit")]
    pub attention: FitConfig,
    #[serde(default = "default_price_fit")]
    pub price: FitConfig,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths are taken from its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.data.attention);
        if let Some(p) = cfg.data.price.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |e: Error| Error::Config(e.to_string());
        self.attention.cutoffs.validate().map_err(usage)?;
        self.price.cutoffs.validate().map_err(usage)?;
        self.attention.density.validate()?;
        self.price.density.validate()?;
        if !(self.data.delta > 0.0) {
            return Err(Error::Config("data.delta must be positive".into()));
        }
        if self.monte_carlo.replicates < 2 || self.monte_carlo.sample_size == 0 {
            return Err(Error::Config("monte_carlo needs replicates >= 2 and sample_size >= 1".into()));
        }
        if !(self.monte_carlo.level > 0.0 && self.monte_carlo.level < 1.0) {
            return Err(Error::Config("monte_carlo.level must lie in (0, 1)".into()));
        }
        if let (Some(a), Some(b)) = (self.thresholds.x1, self.thresholds.x2) {
            if !(a < b) {
                return Err(Error::Config("thresholds.x1 must be below thresholds.x2".into()));
            }
        }
        for t in [self.attention.t_n, self.price.t_n].into_iter().flatten() {
            if !(t > 0.0) {
                return Err(Error::Config("t_n must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Attention (and optionally price) returns on a common date grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub attention: ReturnSeries,
    pub price: Option<ReturnSeries>,
}

pub fn load_inputs(data: &DataConfig) -> Result<Inputs> {
    match data.format {
        DataFormat::Levels => {
            let a = load_csv(&data.attention, &data.date_column, &data.attention_column)?;
            match &data.price {
                None => Ok(Inputs {
                    attention: log_returns(&a, data.delta)?,
                    price: None,
                }),
                Some(p) => {
                    let p = load_csv(p, &data.date_column, &data.price_column)?;
                    let pair = align(&a, &p, data.delta)?;
                    Ok(Inputs {
                        attention: pair.attention,
                        price: Some(pair.price),
                    })
                }
            }
        }
        DataFormat::Returns => {
            let a = io::read_returns(&data.attention, data.delta)?;
            let p = data.price.as_ref().map(|p| io::read_returns(p, data.delta)).transpose()?;
            if let Some(p) = &p {
                check_same_grid(&a, p)?;
            }
            Ok(Inputs { attention: a, price: p })
        }
    }
}

/// Both series must cover the same intervals.
pub fn check_same_grid(a: &ReturnSeries, b: &ReturnSeries) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} returns", a.len(), b.len())));
    }
    if let (Some(da), Some(db)) = (a.dates(), b.dates()) {
        if let Some(k) = (0..da.len()).find(|&k| da[k] != db[k]) {
            return Err(Error::GridMismatch(format!(
                "dates differ at row {}: {} vs {}",
                k + 1,
                da[k],
                db[k]
            )));
        }
    }
    Ok(())
}

/// `estimate.json` body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    #[serde(flatten)]
    pub estimate: SpectralEstimate,
    pub n: usize,
}

/// Fit of one series: Algorithm-1 estimate and deconvolved density.
pub fn fit_series(returns: &ReturnSeries, fit: &FitConfig) -> Result<(SpectralEstimate, DensityEstimate)> {
    let phi = EmpiricalExponent::new(returns);
    let est = estimate(&phi, &fit.cutoffs)?;
    let density = estimate_density(&phi, &est, fit.t_n(), fit.density.nodes, &fit.density.x())?;
    Ok((est, density))
}

/// Correlations of attention returns against price returns and their
/// absolute values on one subset of intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBlock {
    pub subset: String,
    pub target: String,
    pub correlations: Correlations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub correlations: Vec<CorrelationBlock>,
    pub attention_baselines: Vec<BaselineFit>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub price_baselines: Vec<BaselineFit>,
    pub attention_independence: TestResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub price_independence: Option<TestResult>,
    /// Rank-sum test of the data against one sample of the fitted model.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attention_model_wilcoxon: Option<TestResult>,
}

fn correlation_blocks(attention: &[f64], price: &[f64], flags: Option<&[bool]>) -> Vec<CorrelationBlock> {
    let mut subsets: Vec<(&str, Vec<usize>)> = vec![("all", (0..attention.len()).collect())];
    if let Some(f) = flags {
        subsets.push(("jump", (0..f.len()).filter(|&k| f[k]).collect()));
        subsets.push(("no_jump", (0..f.len()).filter(|&k| !f[k]).collect()));
    }
    let mut out = Vec::new();
    for (name, idx) in subsets {
        let a: Vec<f64> = idx.iter().map(|&k| attention[k]).collect();
        let p: Vec<f64> = idx.iter().map(|&k| price[k]).collect();
        let abs: Vec<f64> = p.iter().map(|v| v.abs()).collect();
        for (target, y) in [("price_returns", &p), ("abs_price_returns", &abs)] {
            match correlations(&a, y) {
                Ok(c) => out.push(CorrelationBlock {
                    subset: name.into(),
                    target: target.into(),
                    correlations: c,
                }),
                Err(e) => log::warn!("correlations on subset `{name}` vs {target} skipped: {e}"),
            }
        }
    }
    out
}

/// Correlation blocks, parametric baselines and serial-independence tests.
pub fn diagnose(attention: &ReturnSeries, price: Option<&ReturnSeries>, flags: Option<&[bool]>, cfg: &DiagnosticsConfig) -> Result<Diagnostics> {
    if let Some(p) = price {
        check_same_grid(attention, p)?;
    }
    if let Some(f) = flags {
        if f.len() != attention.len() {
            return Err(Error::GridMismatch(format!("{} jump flags for {} returns", f.len(), attention.len())));
        }
    }
    Ok(Diagnostics {
        correlations: price
            .map(|p| correlation_blocks(attention.returns(), p.returns(), flags))
            .unwrap_or_default(),
        attention_baselines: baseline_fits(attention.returns())?,
        price_baselines: price.map(|p| baseline_fits(p.returns())).transpose()?.unwrap_or_default(),
        attention_independence: chi2_independence(attention.returns(), cfg.chi2_lag, cfg.chi2_bins)?,
        price_independence: price
            .map(|p| chi2_independence(p.returns(), cfg.chi2_lag, cfg.chi2_bins))
            .transpose()?,
        attention_model_wilcoxon: None,
    })
}

/// Rows of `tables.csv`.
pub fn write_tables(path: &Path, report: &PriceReport) -> Result<()> {
    io::write_table(
        path,
        &["table", "statistic", "lower", "point", "upper"],
        report.rows.iter().map(|r| {
            vec![
                r.table.clone(),
                r.statistic.name().to_string(),
                r.lower.to_string(),
                r.point.to_string(),
                r.upper.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub complete: bool,
    pub stages: Vec<StageRecord>,
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub estimate: SpectralEstimate,
    pub classification: JumpClassification,
    pub price_fit: Option<PriceModelFit>,
}

struct Recorder {
    dir: PathBuf,
    stages: Vec<StageRecord>,
}

impl Recorder {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn ok(&mut self, name: &str, outputs: &[&str]) {
        self.stages.push(StageRecord {
            name: name.into(),
            status: StageStatus::Ok,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            error: None,
        });
    }

    fn skipped(&mut self, name: &str) {
        self.stages.push(StageRecord {
            name: name.into(),
            status: StageStatus::Skipped,
            outputs: vec![],
            error: None,
        });
    }

    fn write_manifest(&self, complete: bool) -> Result<Manifest> {
        let m = Manifest {
            complete,
            stages: self.stages.clone(),
        };
        io::write_json(self.path("manifest.json"), &m)?;
        Ok(m)
    }

    /// Records the failure, writes the partial manifest and wraps the error.
    fn fail(&mut self, stage: &'static str, e: Error) -> Error {
        self.stages.push(StageRecord {
            name: stage.into(),
            status: StageStatus::Failed,
            outputs: vec![],
            error: Some(e.to_string()),
        });
        if let Err(m) = self.write_manifest(false) {
            log::error!("could not write manifest: {m}");
        }
        Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}

fn ecf_grid_upper(cfg: &SpectralConfig) -> f64 {
    1.5 * cfg.u_n.max(cfg.v_n)
}

fn write_ecf_figures(rec: &Recorder, returns: &ReturnSeries, est: &SpectralEstimate) -> Result<()> {
    let u = linspace(0.0, ecf_grid_upper(&est.config), 301);
    let grid = log_ecf_with_floor(returns, &u, default_floor(returns.len()))?;
    io::write_ecf(rec.path("ecf.csv"), &grid)?;
    let (s2, l, m) = (est.sigma2_hat, est.lambda_hat, est.mu_hat);
    io::write_table(
        rec.path("ecf_fit.csv"),
        &["u", "re_hat", "re_fit", "im_hat", "im_fit"],
        (0..u.len()).map(|i| {
            let v = u[i];
            vec![
                v.to_string(),
                grid.phi_hat[i].re.to_string(),
                (-0.5 * s2 * v * v - l).to_string(),
                grid.phi_hat[i].im.to_string(),
                (m * v).to_string(),
            ]
        }),
    )
}

/// Kernel densities of the data and of one sample from the fitted model.
fn write_overlay(rec: &Recorder, returns: &ReturnSeries, fit: &FitConfig, seed: u64) -> Result<()> {
    let (params, law) = fitted_model(returns, &fit.cutoffs, fit.t_n(), fit.density.nodes, fit.density.points)?;
    let law = law.unwrap_or(JumpLaw::Normal { mean: 0.0, sd: 1.0 });
    let sim = simulate_labeled_with(&params, &law, returns.len(), &mut replica_rng(seed, 0))?;
    let grid = pooled_grid(&[returns.returns(), sim.series.returns()], KDE_POINTS);
    let a = gaussian_kde(returns.returns(), &grid)?;
    let b = gaussian_kde(sim.series.returns(), &grid)?;
    io::write_table(
        rec.path("density_overlay.csv"),
        &["x", "data_kde", "model_kde"],
        (0..grid.len()).map(|i| vec![grid[i].to_string(), a[i].to_string(), b[i].to_string()]),
    )
}

fn model_wilcoxon(returns: &ReturnSeries, fit: &FitConfig, seed: u64) -> Result<TestResult> {
    let (params, law) = fitted_model(returns, &fit.cutoffs, fit.t_n(), fit.density.nodes, fit.density.points)?;
    let law = law.unwrap_or(JumpLaw::Normal { mean: 0.0, sd: 1.0 });
    let sim = simulate_labeled_with(&params, &law, returns.len(), &mut replica_rng(seed, 0))?;
    crate::stats::wilcoxon_ranksum(returns.returns(), sim.series.returns())
}

/// Runs every stage and writes the bundle into `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Bundle> {
    cfg.validate()?;
    log::info!("resolved config:\n{}", cfg.to_toml()?);
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut rec = Recorder { dir, stages: vec![] };
    fs::write(rec.path("config.toml"), cfg.to_toml()?).map_err(|e| Error::io(rec.path("config.toml"), e))?;

    let inputs = load_inputs(&cfg.data).map_err(|e| rec.fail("ingest", e))?;
    let attention = &inputs.attention;
    io::write_returns(rec.path("attention_returns.csv"), attention).map_err(|e| rec.fail("ingest", e))?;
    let mut outs = vec!["attention_returns.csv"];
    if let Some(p) = &inputs.price {
        io::write_returns(rec.path("price_returns.csv"), p).map_err(|e| rec.fail("ingest", e))?;
        outs.push("price_returns.csv");
    }
    rec.ok("ingest", &outs);

    let phi = EmpiricalExponent::new(attention);
    let est = estimate(&phi, &cfg.attention.cutoffs).map_err(|e| rec.fail("estimate", e))?;
    let record = EstimateRecord {
        estimate: est,
        n: attention.len(),
    };
    io::write_json(rec.path("estimate.json"), &record).map_err(|e| rec.fail("estimate", e))?;
    write_ecf_figures(&rec, attention, &est).map_err(|e| rec.fail("estimate", e))?;
    rec.ok("estimate", &["estimate.json", "ecf.csv", "ecf_fit.csv"]);

    let density = estimate_density(&phi, &est, cfg.attention.t_n(), cfg.attention.density.nodes, &cfg.attention.density.x())
        .map_err(|e| rec.fail("deconvolve", e))?;
    io::write_density(rec.path("density.csv"), &density).map_err(|e| rec.fail("deconvolve", e))?;
    write_overlay(&rec, attention, &cfg.attention, cfg.monte_carlo.seed.wrapping_add(2))
        .map_err(|e| rec.fail("deconvolve", e))?;
    rec.ok("deconvolve", &["density.csv", "density_overlay.csv"]);

    let classification = (|| {
        let mix = build_mixture(&est, &density, &default_mixture_grid(attention, cfg.thresholds.grid_points))?;
        io::write_mixture(rec.path("mixture.csv"), &mix)?;
        let (x1, x2) = match (cfg.thresholds.x1, cfg.thresholds.x2) {
            (Some(a), Some(b)) => (a, b),
            (a, b) => {
                let t = find_thresholds(&mix)?;
                (a.unwrap_or(t.x1), b.unwrap_or(t.x2))
            }
        };
        let c = classify(attention, x1, x2)?;
        io::write_jumps(rec.path("jumps.csv"), attention, &c)?;
        Ok(c)
    })()
    .map_err(|e| rec.fail("classify", e))?;
    log::info!(
        "thresholds ({}, {}); {} of {} intervals classified as jumps",
        classification.x1,
        classification.x2,
        classification.jump_set.len(),
        classification.len()
    );
    rec.ok("classify", &["mixture.csv", "jumps.csv"]);

    let price_fit = match &inputs.price {
        None => {
            for s in ["fit-price", "price-report", "diagnose"] {
                rec.skipped(s);
            }
            None
        }
        Some(price) => {
            let flags = classification.indicators();
            let fit = fit_price_model(
                price,
                &flags,
                &cfg.price.cutoffs,
                cfg.price.t_n(),
                cfg.price.density.nodes,
                &cfg.price.density.x(),
            )
            .map_err(|e| rec.fail("fit-price", e))?;
            io::write_json(rec.path("pricefit.json"), &fit).map_err(|e| rec.fail("fit-price", e))?;
            rec.ok("fit-price", &["pricefit.json"]);

            let mc = &cfg.monte_carlo;
            let report = price_report(&fit, mc.replicates, mc.sample_size, mc.level, mc.seed)
                .map_err(|e| rec.fail("price-report", e))?;
            write_tables(&rec.path("tables.csv"), &report).map_err(|e| rec.fail("price-report", e))?;
            io::write_json(rec.path("price_report.json"), &report).map_err(|e| rec.fail("price-report", e))?;
            rec.ok("price-report", &["tables.csv", "price_report.json"]);

            let mut diag = diagnose(attention, Some(price), Some(&flags), &cfg.diagnostics)
                .map_err(|e| rec.fail("diagnose", e))?;
            diag.attention_model_wilcoxon = Some(
                model_wilcoxon(attention, &cfg.attention, mc.seed.wrapping_add(3)).map_err(|e| rec.fail("diagnose", e))?,
            );
            io::write_json(rec.path("diagnostics.json"), &diag).map_err(|e| rec.fail("diagnose", e))?;
            rec.ok("diagnose", &["diagnostics.json"]);
            Some(fit)
        }
    };

    let manifest = rec.write_manifest(true)?;
    Ok(Bundle {
        dir: rec.dir,
        manifest,
        estimate: est,
        classification,
        price_fit,
    })
}

// ---------------------------------------------------------------------------
// Replication studies

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    MertonSim,
    AttentionFit,
    BitcoinFit,
}

impl std::str::FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merton-sim" => Ok(Study::MertonSim),
            "attention-fit" => Ok(Study::AttentionFit),
            "bitcoin-fit" => Ok(Study::BitcoinFit),
            other => Err(Error::invalid(format!(
                "unknown study `{other}`; expected merton-sim, attention-fit or bitcoin-fit"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Check {
            name: name.into(),
            status: CheckStatus::Skipped,
            detail: why.into(),
        }
    }
}

/// Settings of the simulated jump-diffusion study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MertonStudy {
    pub params: LevyParams,
    pub jump_sd: f64,
    pub cutoffs: SpectralConfig,
    pub t_n: f64,
    pub density: DensityGrid,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Bounds on `|median − truth|` at the largest size.
    pub tolerance: [f64; 3],
}

impl Default for MertonStudy {
    fn default() -> Self {
        MertonStudy {
            params: LevyParams {
                mu: 0.0,
                sigma: 1.0,
                lambda: 10.0,
                delta: 0.1,
            },
            jump_sd: 1.0,
            cutoffs: SpectralConfig::new(6.0, 6.0, 0.5).expect("valid"),
            t_n: 6.0,
            density: DensityGrid {
                xmin: -5.0,
                xmax: 5.0,
                points: 1000,
                nodes: DEFAULT_DENSITY_NODES,
            },
            sizes: vec![1000, 5000, 10_000],
            replicates: 25,
            seed: 2024,
            tolerance: [0.1, 1.0, 0.1],
        }
    }
}

/// One replicate of the simulated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MertonRun {
    pub n: usize,
    pub replicate: usize,
    pub sigma2_hat: f64,
    pub lambda_hat: f64,
    pub mu_hat: f64,
    pub density_mse: f64,
    pub status: String,
}

/// Medians over the successful replicates at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MertonSummary {
    pub n: usize,
    pub ok: usize,
    pub median_sigma2: f64,
    pub median_lambda: f64,
    pub median_mu: f64,
    /// Median absolute errors of `(σ̂², λ̂, μ̂)`.
    pub median_abs_error: [f64; 3],
    pub median_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: Study,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub merton_summary: Vec<MertonSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub merton_runs: Vec<MertonRun>,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

fn normal_pdf(x: f64, sd: f64) -> f64 {
    (-0.5 * (x / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

fn merton_run(s: &MertonStudy, n: usize, r: usize, truth: &[f64]) -> MertonRun {
    let law = JumpLaw::Normal { mean: 0.0, sd: s.jump_sd };
    let go = || -> Result<(SpectralEstimate, f64)> {
        let data = simulate_replicate(&s.params, &law, n, s.seed, r as u64)?;
        let phi = EmpiricalExponent::new(&data);
        let est = estimate(&phi, &s.cutoffs)?;
        let p = estimate_density(&phi, &est, s.t_n, s.density.nodes, &s.density.x())?;
        Ok((est, mse(&p.p_hat, truth)?))
    };
    match go() {
        Ok((e, m)) => MertonRun {
            n,
            replicate: r,
            sigma2_hat: e.sigma2_hat,
            lambda_hat: e.lambda_hat,
            mu_hat: e.mu_hat,
            density_mse: m,
            status: "ok".into(),
        },
        Err(e) => MertonRun {
            n,
            replicate: r,
            sigma2_hat: f64::NAN,
            lambda_hat: f64::NAN,
            mu_hat: f64::NAN,
            density_mse: f64::NAN,
            status: e.to_string(),
        },
    }
}

fn median_of(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    crate::stats::quantile_sorted(&v, 0.5)
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Simulate, estimate and invert for every `(n, replicate)` pair.
pub fn merton_study(s: &MertonStudy) -> Result<StudyReport> {
    if s.replicates == 0 || s.sizes.is_empty() {
        return Err(Error::invalid("merton study needs replicates >= 1 and at least one size"));
    }
    let truth: Vec<f64> = s.density.x().iter().map(|&x| normal_pdf(x, s.jump_sd)).collect();
    let jobs: Vec<(usize, usize)> = s
        .sizes
        .iter()
        .flat_map(|&n| (0..s.replicates).map(move |r| (n, r)))
        .collect();
    let runs: Vec<MertonRun> = jobs.par_iter().map(|&(n, r)| merton_run(s, n, r, &truth)).collect();

    let true_vals = [s.params.sigma * s.params.sigma, s.params.lambda, s.params.mu];
    let summary: Vec<MertonSummary> = s
        .sizes
        .iter()
        .map(|&n| {
            let ok: Vec<&MertonRun> = runs.iter().filter(|r| r.n == n && r.status == "ok").collect();
            let col = |f: &dyn Fn(&MertonRun) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
            MertonSummary {
                n,
                ok: ok.len(),
                median_sigma2: median_of(col(&|r| r.sigma2_hat)),
                median_lambda: median_of(col(&|r| r.lambda_hat)),
                median_mu: median_of(col(&|r| r.mu_hat)),
                median_abs_error: [
                    median_of(col(&|r| (r.sigma2_hat - true_vals[0]).abs())),
                    median_of(col(&|r| (r.lambda_hat - true_vals[1]).abs())),
                    median_of(col(&|r| (r.mu_hat - true_vals[2]).abs())),
                ],
                median_mse: median_of(col(&|r| r.density_mse)),
            }
        })
        .collect();

    let mut checks = Vec::new();
    let failed = runs.iter().filter(|r| r.status != "ok").count();
    checks.push(Check::new(
        "all replicates fitted",
        failed == 0,
        format!("{failed} of {} runs failed", runs.len()),
    ));
    let last = summary.last().expect("non-empty sizes");
    let meds = [last.median_sigma2, last.median_lambda, last.median_mu];
    let names = ["sigma2", "lambda", "mu"];
    for i in 0..3 {
        let err = (meds[i] - true_vals[i]).abs();
        checks.push(Check::new(
            &format!("median {} at n={}", names[i], last.n),
            err < s.tolerance[i],
            format!("median {} vs truth {}, |error| {:.4} < {}", meds[i], true_vals[i], err, s.tolerance[i]),
        ));
    }
    if s.replicates < 2 || s.sizes.len() < 2 {
        checks.push(Check::skipped("median absolute errors non-increasing in n", "single replicate or size"));
        checks.push(Check::skipped("median density MSE non-increasing in n", "single replicate or size"));
    } else {
        for (i, name) in names.iter().enumerate() {
            let v: Vec<f64> = summary.iter().map(|m| m.median_abs_error[i]).collect();
            checks.push(Check::new(
                &format!("median |error| of {name} non-increasing in n"),
                non_increasing(&v),
                format!("{v:?}"),
            ));
        }
        let v: Vec<f64> = summary.iter().map(|m| m.median_mse).collect();
        checks.push(Check::new("median density MSE non-increasing in n", non_increasing(&v), format!("{v:?}")));
    }
    Ok(StudyReport {
        study: Study::MertonSim,
        checks,
        merton_summary: summary,
        merton_runs: runs,
    })
}

/// Inputs for the real-data studies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealDataInputs {
    pub attention: Option<PathBuf>,
    pub price: Option<PathBuf>,
    pub date_column: Option<String>,
    pub attention_column: Option<String>,
    pub price_column: Option<String>,
    pub format: DataFormat,
}

fn relative_check(name: &str, value: f64, target: f64, rel: f64) -> Check {
    let ok = (value - target).abs() <= rel * target.abs();
    Check::new(name, ok, format!("{value} vs {target} (±{:.0}%)", rel * 100.0))
}

fn absolute_check(name: &str, value: f64, target: f64, tol: f64) -> Check {
    Check::new(name, (value - target).abs() <= tol, format!("{value} vs {target} (±{tol})"))
}

fn real_data_config(study: Study, inputs: &RealDataInputs, output_dir: PathBuf) -> Result<PipelineConfig> {
    let attention = inputs
        .attention
        .clone()
        .ok_or_else(|| Error::invalid(format!("{study:?} needs the attention series (--attention)")))?;
    let price = match study {
        Study::BitcoinFit => Some(
            inputs
                .price
                .clone()
                .ok_or_else(|| Error::invalid("bitcoin-fit needs the price series (--price)"))?,
        ),
        _ => inputs.price.clone(),
    };
    Ok(PipelineConfig {
        data: DataConfig {
            attention,
            price,
            format: inputs.format,
            date_column: inputs.date_column.clone().unwrap_or_else(default_date_column),
            attention_column: inputs.attention_column.clone().unwrap_or_else(default_value_column),
            price_column: inputs.price_column.clone().unwrap_or_else(default_value_column),
            delta: 1.0,
        },
        attention: default_attention_fit(),
        price: default_price_fit(),
        thresholds: ThresholdConfig::default(),
        monte_carlo: MonteCarloConfig::default(),
        diagnostics: DiagnosticsConfig::default(),
        output_dir,
    })
}

/// Fits the real series with the reference cutoffs and checks the estimates
/// against reference values.
pub fn real_data_study(study: Study, inputs: &RealDataInputs, output_dir: PathBuf) -> Result<StudyReport> {
    let cfg = real_data_config(study, inputs, output_dir)?;
    let bundle = run_pipeline(&cfg)?;
    let e = &bundle.estimate;
    let c = &bundle.classification;
    let mut checks = vec![
        relative_check("attention sigma_hat", e.sigma(), 0.099, 0.2),
        relative_check("attention lambda_hat", e.lambda_hat, 0.201, 0.2),
        relative_check("attention mu_hat", e.mu_hat, -0.022, 0.2),
        absolute_check("threshold x1", c.x1, -0.2175, 0.03),
        absolute_check("threshold x2", c.x2, 0.1715, 0.03),
        relative_check("jump count", c.jump_set.len() as f64, 337.0, 0.2),
    ];
    if study == Study::BitcoinFit {
        let fit = bundle.price_fit.as_ref().ok_or_else(|| Error::invalid("price fit missing"))?;
        checks.push(relative_check("continuous mu_tilde", fit.continuous.mu_tilde, 0.002, 0.2));
        checks.push(relative_check("continuous sigma_tilde", fit.continuous.sigma_tilde, 0.037, 0.2));
        match &fit.jump_part {
            Some(j) => {
                checks.push(relative_check("jump-part mu", j.estimate.mu_hat, 0.0071, 0.2));
                checks.push(relative_check("jump-part sigma", j.estimate.sigma(), 0.0576, 0.2));
                checks.push(relative_check("jump-part lambda", j.estimate.lambda_hat, 0.01362, 0.2));
            }
            None => checks.push(Check::new("jump-part fit", false, "no jump intervals".into())),
        }
    }
    Ok(StudyReport {
        study,
        checks,
        merton_summary: vec![],
        merton_runs: vec![],
    })
}

/// Writes `report.json` and, for the simulation study, the per-run table.
pub fn write_study(dir: &Path, report: &StudyReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_json(dir.join("report.json"), report)?;
    if !report.merton_runs.is_empty() {
        io::write_table(
            dir.join("merton_estimates.csv"),
            &["n", "replicate", "sigma2_hat", "lambda_hat", "mu_hat", "density_mse", "status"],
            report.merton_runs.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    r.replicate.to_string(),
                    r.sigma2_hat.to_string(),
                    r.lambda_hat.to_string(),
                    r.mu_hat.to_string(),
                    r.density_mse.to_string(),
                    r.status.clone(),
                ]
            }),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_labeled;

    fn write_levels(path: &Path, returns: &[f64]) {
        let start = chrono::NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
        let mut level = 100.0f64;
        let mut text = String::from("date,value\n");
        text.push_str(&format!("{},{}\n", start, level));
        for (k, r) in returns.iter().enumerate() {
            level *= r.exp();
            text.push_str(&format!("{},{}\n", start + chrono::Days::new(k as u64 + 1), level));
        }
        fs::write(path, text).unwrap();
    }

    fn attention_like(n: usize, seed: u64) -> Vec<f64> {
        let p = LevyParams::new(0.0, 0.1, 0.2, 1.0).unwrap();
        simulate_labeled(&p, &JumpLaw::Normal { mean: 0.0, sd: 0.8 }, n, seed)
            .unwrap()
            .series
            .returns()
            .to_vec()
    }

    fn config(dir: &Path, price: bool) -> PipelineConfig {
        write_levels(&dir.join("a.csv"), &attention_like(1500, 1));
        let mut text = String::from("output_dir = \"out\"\n\n[data]\nattention = \"a.csv\"\n");
        if price {
            let p = LevyParams::new(0.002, 0.037, 0.0, 1.0).unwrap();
            let base = crate::simulate::simulate_increments(&p, &JumpLaw::Normal { mean: 0.0, sd: 1.0 }, 1500, 2).unwrap();
            let a = attention_like(1500, 1);
            // Price jumps on the attention jump intervals.
            let mix: Vec<f64> = base
                .returns()
                .iter()
                .zip(&a)
                .map(|(b, a)| if a.abs() > 0.3 { b + 0.1 * a } else { *b })
                .collect();
            write_levels(&dir.join("p.csv"), &mix);
            text.push_str("price = \"p.csv\"\n");
        }
        text.push_str(
            "\n[attention]\ncutoffs = { u_n = 15.0, v_n = 15.0, eps = 0.3 }\n\
             density = { xmin = -4.0, xmax = 4.0, points = 401, nodes = 600 }\n\
             \n[price]\ncutoffs = { u_n = 10.0, v_n = 10.0, eps = 0.3 }\n\
             density = { xmin = -1.0, xmax = 1.0, points = 201, nodes = 400 }\n\
             \n[monte_carlo]\nreplicates = 5\nsample_size = 200\nseed = 3\n",
        );
        fs::write(dir.join("cfg.toml"), text).unwrap();
        PipelineConfig::load(dir.join("cfg.toml")).unwrap()
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = PipelineConfig::from_toml_str("[data]\nattention = \"a\"\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert_eq!(e.category(), crate::error::ErrorCategory::Usage);
        let e = PipelineConfig::from_toml_str("typo = 3\n[data]\nattention = \"a\"\n").unwrap_err();
        assert!(e.to_string().contains("typo"));
        let ok = PipelineConfig::from_toml_str("[data]\nattention = \"a\"\n").unwrap();
        assert_eq!(ok.attention.cutoffs.u_n, 17.0);
        assert_eq!(PipelineConfig::from_toml_str(&ok.to_toml().unwrap()).unwrap(), ok);
    }

    #[test]
    fn attention_only_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), false);
        let b = run_pipeline(&cfg).unwrap();
        let status: Vec<_> = b.manifest.stages.iter().map(|s| (s.name.as_str(), s.status.clone())).collect();
        assert_eq!(status[3], ("classify", StageStatus::Ok));
        assert_eq!(status[4].1, StageStatus::Skipped);
        assert!(b.manifest.complete);
        for f in ["estimate.json", "density.csv", "jumps.csv", "mixture.csv", "ecf.csv", "manifest.json"] {
            assert!(cfg.output_dir.join(f).exists(), "{f}");
        }
        assert!(!cfg.output_dir.join("pricefit.json").exists());
        let frac = b.classification.jump_fraction();
        assert!((0.1..=0.3).contains(&frac), "{frac}");
    }

    #[test]
    fn full_bundle_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), true);
        run_pipeline(&cfg).unwrap();
        let first = cfg.output_dir.clone();
        cfg.output_dir = dir.path().join("again");
        run_pipeline(&cfg).unwrap();
        for f in [
            "estimate.json",
            "density.csv",
            "jumps.csv",
            "pricefit.json",
            "diagnostics.json",
            "tables.csv",
            "density_overlay.csv",
            "manifest.json",
        ] {
            let a = fs::read(first.join(f)).unwrap();
            let b = fs::read(cfg.output_dir.join(f)).unwrap();
            assert!(a == b, "{f} differs");
        }
        // The resolved config re-runs to the same outputs.
        let mut again = PipelineConfig::load(first.join("config.toml")).unwrap();
        again.output_dir = dir.path().join("third");
        run_pipeline(&again).unwrap();
        assert_eq!(fs::read(first.join("jumps.csv")).unwrap(), fs::read(again.output_dir.join("jumps.csv")).unwrap());
    }

    #[test]
    fn failing_stage_is_named_and_manifest_kept() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), false);
        cfg.attention.cutoffs.u_n = 500.0;
        let e = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(&e, Error::Stage { stage: "estimate", .. }), "{e}");
        let m: Manifest = io::read_json(cfg.output_dir.join("manifest.json")).unwrap();
        assert!(!m.complete);
        assert_eq!(m.stages.last().unwrap().status, StageStatus::Failed);
        assert!(cfg.output_dir.join("attention_returns.csv").exists());
    }

    #[test]
    fn single_replicate_skips_convergence() {
        let s = MertonStudy {
            sizes: vec![2000],
            replicates: 1,
            density: DensityGrid {
                points: 101,
                nodes: 400,
                ..MertonStudy::default().density
            },
            ..MertonStudy::default()
        };
        let r = merton_study(&s).unwrap();
        assert!(r.checks.iter().any(|c| c.status == CheckStatus::Skipped));
        assert_eq!(r.merton_runs.len(), 1);
    }

    #[test]
    fn real_data_study_needs_data() {
        let dir = tempfile::tempdir().unwrap();
        let e = real_data_study(Study::AttentionFit, &RealDataInputs::default(), dir.path().into()).unwrap_err();
        assert!(e.to_string().contains("attention"));
        assert_eq!(e.category(), crate::error::ErrorCategory::Usage);
    }
}
