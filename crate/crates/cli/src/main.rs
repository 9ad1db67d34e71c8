#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jumpfit::deconv::{linspace, DEFAULT_DENSITY_NODES};
use jumpfit::ecf::default_floor;
use jumpfit::io;
use jumpfit::jumps::default_mixture_grid;
use jumpfit::pipeline::{
    self, check_same_grid, diagnose, merton_study, real_data_study, write_study, write_tables, DataConfig, DataFormat,
    DiagnosticsConfig, EstimateRecord, MertonStudy, PipelineConfig, RealDataInputs, Study,
};
use jumpfit::pricefit::{fit_price_model, price_report, PriceModelFit};
use jumpfit::simulate::simulate_labeled;
use jumpfit::spectral::{estimate, SpectralConfig};
use jumpfit::tune::{candidate_grid, parse_range, select_cutoffs, TuneConfig};
use jumpfit::{
    build_mixture, classify, estimate_density, find_thresholds, log_ecf, EmpiricalExponent, Error, ErrorCategory,
    JumpLaw, LevyParams, Result,
};

#[derive(Parser, Debug)]
#[command(name = "jumpfit", version, about = "Jump-diffusion estimation from low-frequency returns")]
struct Cli {
    /// More log output (repeatable); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate increments of a compound-Poisson jump-diffusion.
    Simulate(SimulateArgs),
    /// Tabulate the normalized log-ECF of a return series.
    Ecf(EcfArgs),
    /// Estimate (sigma^2, lambda, mu) by spectral least squares.
    Estimate(EstimateArgs),
    /// Score a grid of cutoffs by simulated density discrepancy.
    Tune(TuneArgs),
    /// Recover the jump-size density by Fourier inversion.
    Deconvolve(DeconvolveArgs),
    /// Flag each interval as jump / no-jump.
    Classify(ClassifyArgs),
    /// Fit the two-part price model on a jump split.
    FitPrice(FitPriceArgs),
    /// Monte-Carlo interval tables for a fitted price model.
    PriceReport(PriceReportArgs),
    /// Correlations and test statistics for attention and price returns.
    Diagnose(DiagnoseArgs),
    /// Run every stage from a config file.
    Pipeline(PipelineArgs),
    /// Run a canned study and print a pass/fail table.
    Replicate(ReplicateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// normal:mean,sd | kou:p,eta_up,eta_down | cauchy:location,scale
    #[arg(long, default_value = "normal:0,1", allow_hyphen_values = true)]
    law: JumpLaw,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the true per-interval jump counts.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EcfArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long)]
    umax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Modulus floor; 1/sqrt(n) by default.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CutoffArgs {
    #[arg(long)]
    un: f64,
    #[arg(long)]
    vn: f64,
    #[arg(long)]
    eps: f64,
    /// Quadrature intervals on [eps, 1].
    #[arg(long, default_value_t = jumpfit::spectral::DEFAULT_NODES)]
    nodes: usize,
}

impl CutoffArgs {
    fn config(&self) -> Result<SpectralConfig> {
        Ok(SpectralConfig::new(self.un, self.vn, self.eps)?.with_nodes(self.nodes))
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[command(flatten)]
    cutoffs: CutoffArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// a:b:step, a comma list or a single value.
    #[arg(long)]
    un_grid: String,
    #[arg(long)]
    vn_grid: String,
    #[arg(long)]
    eps_grid: String,
    #[arg(long, default_value_t = 25)]
    replicates: usize,
    /// Simulated sample size; the data length by default.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Inversion cutoff; each candidate's U_n by default.
    #[arg(long)]
    tn: Option<f64>,
    #[arg(long, default_value_t = jumpfit::spectral::DEFAULT_NODES)]
    nodes: usize,
    #[arg(long, default_value_t = DEFAULT_DENSITY_NODES)]
    density_nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    xmin: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    xmax: f64,
    #[arg(long, default_value_t = 1000)]
    points: usize,
    /// Fourier nodes on [-T_n, T_n].
    #[arg(long, default_value_t = DEFAULT_DENSITY_NODES)]
    nodes: usize,
}

impl GridArgs {
    fn x(&self) -> Result<Vec<f64>> {
        if !(self.xmin < self.xmax) || self.points < 2 {
            return Err(Error::InvalidParameter("need xmin < xmax and at least 2 points".into()));
        }
        Ok(linspace(self.xmin, self.xmax, self.points))
    }
}

#[derive(Args, Debug)]
struct DeconvolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// Inversion cutoff; U_n of the estimate by default.
    #[arg(long)]
    tn: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    density: PathBuf,
    /// Grid points for the mixture densities.
    #[arg(long, default_value_t = 2001)]
    grid_points: usize,
    /// Override the lower threshold.
    #[arg(long, allow_hyphen_values = true)]
    x1: Option<f64>,
    /// Override the upper threshold.
    #[arg(long, allow_hyphen_values = true)]
    x2: Option<f64>,
    #[arg(long)]
    emit_densities: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitPriceArgs {
    #[arg(long)]
    price_returns: PathBuf,
    #[arg(long)]
    jumps: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long)]
    un: f64,
    #[arg(long)]
    vn: f64,
    #[arg(long)]
    eps: f64,
    /// Quadrature intervals on [eps, 1] for the jump-part fit.
    #[arg(long, default_value_t = jumpfit::spectral::DEFAULT_NODES)]
    spectral_nodes: usize,
    /// Inversion cutoff; U_n by default.
    #[arg(long)]
    tn: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PriceReportArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, default_value_t = 25)]
    replicates: usize,
    #[arg(long, default_value_t = 1000)]
    sample_size: usize,
    #[arg(long, default_value_t = 0.99)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    attention: PathBuf,
    #[arg(long)]
    price: Option<PathBuf>,
    /// `levels` (date,value) or `returns` (index,date,return).
    #[arg(long, default_value = "levels", value_parser = parse_format)]
    format: DataFormat,
    #[arg(long, default_value = "date")]
    date_column: String,
    #[arg(long, default_value = "value")]
    value_column: String,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Jump flags for per-subset correlation blocks.
    #[arg(long)]
    jumps: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    lag: usize,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `monte_carlo.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `data.attention`.
    #[arg(long)]
    attention: Option<PathBuf>,
    /// Overrides `data.price`.
    #[arg(long)]
    price: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    /// merton-sim | attention-fit | bitcoin-fit
    study: Study,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    attention: Option<PathBuf>,
    #[arg(long)]
    price: Option<PathBuf>,
    #[arg(long, default_value = "levels", value_parser = parse_format)]
    format: DataFormat,
    #[arg(long)]
    date_column: Option<String>,
    #[arg(long)]
    value_column: Option<String>,
    #[arg(long, default_value = "replicate-out")]
    out: PathBuf,
}

fn parse_format(s: &str) -> std::result::Result<DataFormat, String> {
    match s {
        "levels" => Ok(DataFormat::Levels),
        "returns" => Ok(DataFormat::Returns),
        other => Err(format!("unknown format `{other}`; expected levels or returns")),
    }
}

fn read_estimate(path: &Path) -> Result<EstimateRecord> {
    io::read_json(path)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let params = LevyParams::new(a.mu, a.sigma, a.lambda, a.delta)?;
    let path = simulate_labeled(&params, &a.law, a.n, a.seed)?;
    io::write_returns(&a.out, &path.series)?;
    if let Some(l) = &a.labels {
        io::write_table(
            l,
            &["index", "jump_count"],
            path.jump_counts
                .iter()
                .enumerate()
                .map(|(k, c)| vec![(k + 1).to_string(), c.to_string()]),
        )?;
    }
    log::info!("wrote {} increments to {}", a.n, a.out.display());
    Ok(())
}

fn cmd_ecf(a: EcfArgs) -> Result<()> {
    let r = io::read_returns(&a.input, a.delta)?;
    if !(a.umax > 0.0) || a.points < 2 {
        return Err(Error::InvalidParameter("need umax > 0 and at least 2 points".into()));
    }
    let u = linspace(0.0, a.umax, a.points);
    let grid = match a.floor {
        Some(f) => jumpfit::ecf::log_ecf_with_floor(&r, &u, f)?,
        None => log_ecf(&r, &u)?,
    };
    if let Some(i) = grid.first_unusable() {
        log::warn!(
            "log-ECF unusable from u = {} (floor {:.3e}, default {:.3e})",
            grid.u[i],
            grid.floor,
            default_floor(r.len())
        );
    }
    io::write_ecf(&a.out, &grid)
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let r = io::read_returns(&a.input, a.delta)?;
    let cfg = a.cutoffs.config()?;
    let est = estimate(&EmpiricalExponent::new(&r), &cfg)?;
    log::info!(
        "sigma2_hat = {}, lambda_hat = {}, mu_hat = {}",
        est.sigma2_hat,
        est.lambda_hat,
        est.mu_hat
    );
    io::write_json(&a.out, &EstimateRecord { estimate: est, n: r.len() })
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let r = io::read_returns(&a.input, a.delta)?;
    let cands = candidate_grid(&parse_range(&a.un_grid)?, &parse_range(&a.vn_grid)?, &parse_range(&a.eps_grid)?);
    let tc = TuneConfig {
        replicates: a.replicates,
        sample_size: a.sample_size,
        nodes: a.nodes,
        density_nodes: a.density_nodes,
        t_n: a.tn,
        seed: a.seed,
        ..TuneConfig::default()
    };
    log::info!("scoring {} candidates with {:?}", cands.len(), tc);
    let res = select_cutoffs(&r, &cands, &tc)?;
    io::write_table(
        &a.out,
        &["u_n", "v_n", "eps", "score", "status"],
        res.scores.iter().map(|s| {
            vec![
                s.candidate.u_n.to_string(),
                s.candidate.v_n.to_string(),
                s.candidate.eps.to_string(),
                s.score.map(|v| v.to_string()).unwrap_or_default(),
                s.status.clone(),
            ]
        }),
    )?;
    print!("{}", io::to_json_string(&res.best)?);
    Ok(())
}

fn cmd_deconvolve(a: DeconvolveArgs) -> Result<()> {
    let rec = read_estimate(&a.estimate)?;
    let r = io::read_returns(&a.input, rec.estimate.delta)?;
    let t_n = a.tn.unwrap_or(rec.estimate.config.u_n);
    let d = estimate_density(&EmpiricalExponent::new(&r), &rec.estimate, t_n, a.grid.nodes, &a.grid.x()?)?;
    log::info!("p_hat mass {:.4}, imaginary residue {:.2e}", d.mass(), d.imag_residue);
    io::write_density(&a.out, &d)
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let rec = read_estimate(&a.estimate)?;
    let r = io::read_returns(&a.input, rec.estimate.delta)?;
    let density = io::read_density(&a.density)?;
    let mix = build_mixture(&rec.estimate, &density, &default_mixture_grid(&r, a.grid_points))?;
    if let Some(p) = &a.emit_densities {
        io::write_mixture(p, &mix)?;
    }
    let (x1, x2) = match (a.x1, a.x2) {
        (Some(x1), Some(x2)) => (x1, x2),
        (x1, x2) => {
            let t = find_thresholds(&mix)?;
            (x1.unwrap_or(t.x1), x2.unwrap_or(t.x2))
        }
    };
    let c = classify(&r, x1, x2)?;
    log::info!("thresholds ({x1}, {x2}); {} of {} intervals are jumps", c.jump_set.len(), c.len());
    io::write_jumps(&a.out, &r, &c)
}

fn cmd_fit_price(a: FitPriceArgs) -> Result<()> {
    let price = io::read_returns(&a.price_returns, a.delta)?;
    let (flags, dates) = io::read_jumps(&a.jumps)?;
    if let (Some(jd), Some(pd)) = (dates.as_deref(), price.dates()) {
        if jd != pd {
            return Err(Error::GridMismatch("jump file and price returns cover different dates".into()));
        }
    }
    let cfg = SpectralConfig::new(a.un, a.vn, a.eps)?.with_nodes(a.spectral_nodes);
    let fit = fit_price_model(&price, &flags, &cfg, a.tn.unwrap_or(cfg.u_n), a.grid.nodes, &a.grid.x()?)?;
    log::info!(
        "continuous part mu_tilde = {}, sigma_tilde = {} on {} intervals; jump part on {}",
        fit.continuous.mu_tilde,
        fit.continuous.sigma_tilde,
        fit.continuous.n,
        fit.jump_set.len()
    );
    io::write_json(&a.out, &fit)
}

fn cmd_price_report(a: PriceReportArgs) -> Result<()> {
    let fit: PriceModelFit = io::read_json(&a.fit)?;
    let report = price_report(&fit, a.replicates, a.sample_size, a.level, a.seed)?;
    log::info!(
        "mean Wilcoxon p (continuous part) {:.4}",
        report.wilcoxon_continuous_mean_p
    );
    write_tables(&a.out, &report)
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<()> {
    let data = DataConfig {
        attention: a.attention,
        price: a.price,
        format: a.format,
        date_column: a.date_column,
        attention_column: a.value_column.clone(),
        price_column: a.value_column,
        delta: a.delta,
    };
    let inputs = pipeline::load_inputs(&data)?;
    let flags = match &a.jumps {
        Some(p) => {
            let (f, _) = io::read_jumps(p)?;
            Some(f)
        }
        None => None,
    };
    if let Some(p) = &inputs.price {
        check_same_grid(&inputs.attention, p)?;
    }
    let d = diagnose(
        &inputs.attention,
        inputs.price.as_ref(),
        flags.as_deref(),
        &DiagnosticsConfig {
            chi2_lag: a.lag,
            chi2_bins: a.bins,
        },
    )?;
    io::write_json(&a.out, &d)
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    if let Some(s) = a.seed {
        cfg.monte_carlo.seed = s;
    }
    if let Some(p) = a.attention {
        cfg.data.attention = p;
    }
    if let Some(p) = a.price {
        cfg.data.price = Some(p);
    }
    let b = pipeline::run_pipeline(&cfg)?;
    log::info!("bundle written to {}", b.dir.display());
    Ok(())
}

fn cmd_replicate(a: ReplicateArgs) -> Result<()> {
    let report = match a.study {
        Study::MertonSim => {
            let mut s = MertonStudy::default();
            if let Some(r) = a.replicates {
                s.replicates = r;
            }
            if let Some(n) = a.sizes {
                s.sizes = n;
            }
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            merton_study(&s)?
        }
        study => {
            let inputs = RealDataInputs {
                attention: a.attention,
                price: a.price,
                date_column: a.date_column,
                attention_column: a.value_column.clone(),
                price_column: a.value_column,
                format: a.format,
            };
            real_data_study(study, &inputs, a.out.join("bundle"))?
        }
    };
    write_study(&a.out, &report)?;
    for c in &report.checks {
        let tag = match c.status {
            pipeline::CheckStatus::Pass => "PASS",
            pipeline::CheckStatus::Fail => "FAIL",
            pipeline::CheckStatus::Skipped => "SKIP",
        };
        println!("{tag}  {}  ({})", c.name, c.detail);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ecf(a) => cmd_ecf(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Deconvolve(a) => cmd_deconvolve(a),
        Command::Classify(a) => cmd_classify(a),
        Command::FitPrice(a) => cmd_fit_price(a),
        Command::PriceReport(a) => cmd_price_report(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Replicate(a) => cmd_replicate(a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Usage => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet {
        "error"
    } else {
        match cli.verbose {
            0 => "info",
            1 => "debug",
            _ => "trace",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
