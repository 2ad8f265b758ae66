//! `randx`: ATE estimation for randomized trials with random covariates.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or numeric error. Errors are
//! emitted to stderr as a JSON object `{"error":{"category","message"}}`;
//! reports go to stdout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use randx_cli::io::{self, ColumnSpec, LoadError, Loaded, LoadedData};
use randx_cli::report::{NswDemoReport, OracleReport, Provenance, Report};
use randx_core::{
    ate_diff_means, ate_diff_means_regression_se, ate_ipw_regression, ate_known_mean,
    ate_post_stratified, ate_regression, ate_regression_interacted, ate_stratified_naive,
    ate_weighted_contrast, paired_bootstrap_ci, r2_sweep, run_monte_carlo, var_diff,
    var_regression, variance_comparison, variance_gap, AteEstimate, ContrastNormalization,
    Dgp, LinearDgp, Method, NoiseSpec, PopulationParams, PropensitySpec, SimulationConfig,
    OFFSET_BENCHMARK_NOISE_SD,
};

#[derive(Parser)]
#[command(
    name = "randx",
    version,
    about = "Average-treatment-effect estimation from randomized-trial data, \
             with regression-based variance reduction, theoretical variance \
             oracles, bootstrap intervals, and a Monte Carlo harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the ATE from a CSV file
    Fit(FitArgs),
    /// Paired-bootstrap percentile interval for an estimator
    Bootstrap(BootstrapArgs),
    /// Closed-form variance quantities for a known population
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Seeded Monte Carlo evaluation of the estimators
    Simulate(SimulateArgs),
    /// Noise sweep: mean R² against the SE ratio, as tidy CSV
    Sweep(SweepArgs),
    /// Run both estimators on the bundled NSW-layout demo dataset
    NswDemo(NswDemoArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct DataArgs {
    /// CSV input file (UTF-8, header row)
    #[arg(long)]
    csv: PathBuf,
    /// Response column name
    #[arg(long)]
    response: String,
    /// Treatment-flag column name (values 0/1)
    #[arg(long)]
    treatment: String,
    /// Comma-separated covariate column names
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    covariates: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FitMethod {
    /// Difference in arm means, classical SE
    Diff,
    /// Pooled-centering regression estimator
    Reg,
    /// Fully interacted single regression
    Interacted,
    /// Regression estimator with a known covariate mean
    KnownMean,
    /// Regression on inverse-probability-weighted responses
    Ipw,
    /// Grand treated mean minus grand control mean over strata
    Stratified,
    /// Stratum-share-weighted difference in means
    PostStratified,
    /// Inverse-probability-weighted contrast of arm averages
    Weighted,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    method: FitMethod,
    /// Stratum column (stratified / post-stratified only)
    #[arg(long)]
    stratum: Option<String>,
    /// Per-unit propensity column (ipw / weighted)
    #[arg(long)]
    propensity: Option<String>,
    /// Constant assignment probability (ipw / weighted)
    #[arg(long)]
    pi: Option<f64>,
    /// Known population covariate means, comma-separated (known-mean)
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    mu: Vec<f64>,
    /// Hájek (sum-of-weights) normalization for the weighted contrast
    #[arg(long)]
    hajek: bool,
    /// Use the regression-based rewrite of the diff-in-means SE
    #[arg(long)]
    regression_se: bool,
    /// Confidence level for the Wald interval
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Estimator to bootstrap
    #[arg(long, value_enum)]
    method: BootstrapMethod,
    /// Number of bootstrap replicates (≥ 100)
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// RNG seed; generated (and reported) when absent
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum BootstrapMethod {
    Diff,
    Reg,
    Interacted,
}

#[derive(Args)]
struct ParamsArgs {
    /// JSON file holding the full population-parameter object
    #[arg(long)]
    params: Option<PathBuf>,
    /// Scalar shortcut: treated slope (p = 1)
    #[arg(long)]
    beta_t: Option<f64>,
    /// Scalar shortcut: control slope (p = 1)
    #[arg(long)]
    beta_c: Option<f64>,
    /// Scalar shortcut: treated error variance
    #[arg(long, default_value_t = 1.0)]
    sigma2_t: f64,
    /// Scalar shortcut: control error variance
    #[arg(long, default_value_t = 1.0)]
    sigma2_c: f64,
    /// Scalar shortcut: treated nonlinearity variance
    #[arg(long, default_value_t = 0.0)]
    varf_t: f64,
    /// Scalar shortcut: control nonlinearity variance
    #[arg(long, default_value_t = 0.0)]
    varf_c: f64,
    /// Scalar shortcut: covariate variance
    #[arg(long, default_value_t = 1.0)]
    sigma_x: f64,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_c: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Variance of the difference-in-means estimator
    VarDiff(ParamsArgs),
    /// Variance of the regression estimator (O(N⁻²) term omitted)
    VarReg(ParamsArgs),
    /// var_diff − var_regression (≥ 0)
    Gap(ParamsArgs),
    /// The R² level (p+2)/(n+1) where conditional and marginal variance
    /// estimates of an arm mean coincide
    R2Threshold {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        /// Optional: total sum of squares, to evaluate the comparison
        #[arg(long, requires = "sse")]
        sst: Option<f64>,
        /// Optional: residual sum of squares, to evaluate the comparison
        #[arg(long, requires = "sst")]
        sse: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DgpChoice {
    /// Treated 2x₁+3x₂+z vs control x₁+x₂+z, lognormal/gamma covariates
    LognormalGamma,
    /// Calibrated equal-slope arms with a constant treatment offset
    Offset,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorChoice {
    Diff,
    Reg,
    Interacted,
    KnownMean,
}

impl EstimatorChoice {
    fn method(self) -> Method {
        match self {
            EstimatorChoice::Diff => Method::DiffMeans,
            EstimatorChoice::Reg => Method::Regression,
            EstimatorChoice::Interacted => Method::RegressionInteracted,
            EstimatorChoice::KnownMean => Method::KnownMean,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Shorthand for --dgp lognormal-gamma
    #[arg(long)]
    paper: bool,
    #[arg(long, value_enum, default_value = "lognormal-gamma")]
    dgp: DgpChoice,
    /// Full simulation configuration as JSON (overrides the DGP flags)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// RNG seed; generated (and reported) when absent
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 250)]
    nt: usize,
    #[arg(long, default_value_t = 250)]
    nc: usize,
    /// Noise standard deviation
    #[arg(long, conflicts_with = "noise_var")]
    noise_sd: Option<f64>,
    /// Noise variance (alternative convention)
    #[arg(long)]
    noise_var: Option<f64>,
    /// Gamma shape for the lognormal-gamma generator
    #[arg(long, default_value_t = 3.0)]
    gamma_shape: f64,
    /// Gamma rate for the lognormal-gamma generator
    #[arg(long, conflicts_with = "gamma_scale", default_value_t = 4.0)]
    gamma_rate: f64,
    /// Gamma scale (alternative convention; rate = 1/scale)
    #[arg(long)]
    gamma_scale: Option<f64>,
    /// Estimators to evaluate, comma-separated
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["diff", "reg"])]
    estimators: Vec<EstimatorChoice>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    paper: bool,
    #[arg(long, value_enum, default_value = "lognormal-gamma")]
    dgp: DgpChoice,
    /// Noise standard deviations to sweep, comma-separated
    #[arg(long, value_delimiter = ',', conflicts_with = "variance_grid")]
    noise_grid: Option<Vec<f64>>,
    /// Noise variances to sweep (alternative convention)
    #[arg(long, value_delimiter = ',')]
    variance_grid: Option<Vec<f64>>,
    /// Replications per grid cell
    #[arg(long, default_value_t = 400)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 250)]
    nt: usize,
    #[arg(long, default_value_t = 250)]
    nc: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct NswDemoArgs {
    /// NSW-layout file to analyze instead of the bundled dataset
    #[arg(long)]
    path: Option<PathBuf>,
    /// Fetch the dataset from $RANDX_NSW_URL (opt-in network access)
    #[arg(long, conflicts_with = "path")]
    fetch: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// A run failure carrying its exit code and machine-readable category.
struct Failure {
    exit: u8,
    category: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            exit: 1,
            category: "usage",
            message: message.into(),
        }
    }

    fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "category": self.category, "message": self.message }
        })
        .to_string()
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure {
            exit: 2,
            category: "data",
            message: e.to_string(),
        }
    }
}

impl From<randx_core::Error> for Failure {
    fn from(e: randx_core::Error) -> Self {
        Failure {
            exit: 2,
            category: "numeric",
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(output) => {
            println!("{output}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.exit)
        }
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Bootstrap(args) => cmd_bootstrap(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::NswDemo(args) => cmd_nsw_demo(args),
    }
}

fn load_for_fit(args: &FitArgs) -> Result<Loaded, Failure> {
    let stratified = matches!(
        args.method,
        FitMethod::Stratified | FitMethod::PostStratified
    );
    if stratified && args.stratum.is_none() {
        return Err(Failure::usage(
            "--method stratified/post-stratified requires --stratum",
        ));
    }
    if !stratified && args.stratum.is_some() {
        return Err(Failure::usage(format!(
            "--stratum is only meaningful with stratified methods, not --method {}",
            method_name(args.method)
        )));
    }
    if stratified && !args.data.covariates.is_empty() {
        return Err(Failure::usage(
            "stratified methods take --stratum, not --covariates",
        ));
    }
    let spec = ColumnSpec {
        response: args.data.response.clone(),
        treatment: args.data.treatment.clone(),
        covariates: args.data.covariates.clone(),
        stratum: args.stratum.clone(),
        propensity: args.propensity.clone(),
    };
    Ok(io::load_csv(&args.data.csv, &spec)?)
}

fn method_name(m: FitMethod) -> &'static str {
    match m {
        FitMethod::Diff => "diff",
        FitMethod::Reg => "reg",
        FitMethod::Interacted => "interacted",
        FitMethod::KnownMean => "known-mean",
        FitMethod::Ipw => "ipw",
        FitMethod::Stratified => "stratified",
        FitMethod::PostStratified => "post-stratified",
        FitMethod::Weighted => "weighted",
    }
}

fn propensity_spec(args: &FitArgs, loaded: &Loaded) -> Result<PropensitySpec, Failure> {
    match (args.pi, &loaded.propensity) {
        (Some(_), Some(_)) => Err(Failure::usage(
            "give either --pi or --propensity, not both",
        )),
        (Some(pi), None) => Ok(PropensitySpec::Constant(pi)),
        (None, Some(pis)) => Ok(PropensitySpec::PerUnit(pis.clone())),
        (None, None) => Err(Failure::usage(format!(
            "--method {} needs --pi or --propensity",
            method_name(args.method)
        ))),
    }
}

fn cmd_fit(args: FitArgs) -> Result<String, Failure> {
    let loaded = load_for_fit(&args)?;

    let estimate: AteEstimate = match (&loaded.data, args.method) {
        (LoadedData::Stratified(sd), FitMethod::Stratified) => ate_stratified_naive(sd)?,
        (LoadedData::Stratified(sd), FitMethod::PostStratified) => ate_post_stratified(sd)?,
        (LoadedData::Stratified(_), _) => unreachable!("guarded in load_for_fit"),
        (LoadedData::Plain(d), method) => match method {
            FitMethod::Diff => {
                if args.regression_se {
                    ate_diff_means_regression_se(d)?
                } else {
                    ate_diff_means(d)?
                }
            }
            FitMethod::Reg => ate_regression(d)?,
            FitMethod::Interacted => ate_regression_interacted(d)?,
            FitMethod::KnownMean => {
                if args.mu.len() != d.p() {
                    return Err(Failure::usage(format!(
                        "--mu needs {} comma-separated values (one per covariate), got {}",
                        d.p(),
                        args.mu.len()
                    )));
                }
                ate_known_mean(d, &DVector::from_vec(args.mu.clone()))?
            }
            FitMethod::Ipw => {
                let ps = propensity_spec(&args, &loaded)?;
                ate_ipw_regression(d, &ps)?
            }
            FitMethod::Weighted => {
                let ps = propensity_spec(&args, &loaded)?;
                let norm = if args.hajek {
                    ContrastNormalization::Hajek
                } else {
                    ContrastNormalization::ArmCount
                };
                ate_weighted_contrast(d, &ps, norm)?
            }
            FitMethod::Stratified | FitMethod::PostStratified => {
                unreachable!("guarded in load_for_fit")
            }
        },
    };

    let report = Report::from_estimate(
        &estimate,
        args.level,
        Provenance::new(loaded.digest.clone(), None),
    )?;
    Ok(render(&report.to_json(), &report.to_csv(), args.format))
}

fn cmd_bootstrap(args: BootstrapArgs) -> Result<String, Failure> {
    let spec = ColumnSpec {
        response: args.data.response.clone(),
        treatment: args.data.treatment.clone(),
        covariates: args.data.covariates.clone(),
        stratum: None,
        propensity: None,
    };
    let loaded = io::load_csv(&args.data.csv, &spec)?;
    let d = loaded
        .dataset()
        .expect("plain dataset: no stratum column requested");
    let method = match args.method {
        BootstrapMethod::Diff => Method::DiffMeans,
        BootstrapMethod::Reg => Method::Regression,
        BootstrapMethod::Interacted => Method::RegressionInteracted,
    };
    let seed = args.seed.unwrap_or_else(rand::random);
    let ci = paired_bootstrap_ci(d, method, args.replicates, args.level, seed)?;

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("bootstrap_replicates".into(), ci.replicates as f64);
    let report = Report {
        schema: randx_cli::report::SCHEMA_VERSION,
        method: method.as_str().to_string(),
        point: ci.point,
        se: None,
        ci_low: Some(ci.low),
        ci_high: Some(ci.high),
        level: args.level,
        n_t: d.n_treated(),
        n_c: d.n_control(),
        r_squared_combined: None,
        diagnostics,
        warnings: vec!["interval is a paired-bootstrap percentile interval".into()],
        provenance: Provenance::new(loaded.digest.clone(), Some(seed)),
    };
    Ok(render(&report.to_json(), &report.to_csv(), args.format))
}

fn scalar_params(args: &ParamsArgs) -> Result<PopulationParams, Failure> {
    if let Some(path) = &args.params {
        if args.beta_t.is_some() || args.beta_c.is_some() {
            return Err(Failure::usage(
                "--params conflicts with the scalar shortcut flags",
            ));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            exit: 2,
            category: "data",
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        return serde_json::from_str(&text).map_err(|e| Failure {
            exit: 2,
            category: "data",
            message: format!("invalid parameter file {}: {e}", path.display()),
        });
    }
    match (args.beta_t, args.beta_c, args.n_t, args.n_c) {
        (Some(bt), Some(bc), Some(n_t), Some(n_c)) => {
            let mut p = PopulationParams::scalar(
                bt,
                bc,
                args.sigma2_t,
                args.sigma2_c,
                args.sigma_x,
                n_t,
                n_c,
            );
            p.varf_t = args.varf_t;
            p.varf_c = args.varf_c;
            Ok(p)
        }
        _ => Err(Failure::usage(
            "give --params FILE, or all of --beta-t --beta-c --n-t --n-c",
        )),
    }
}

fn cmd_oracle(cmd: OracleCommand) -> Result<String, Failure> {
    let report = match &cmd {
        OracleCommand::VarDiff(args) => {
            let params = scalar_params(args)?;
            OracleReport::new("var_diff", var_diff(&params)?)
        }
        OracleCommand::VarReg(args) => {
            let params = scalar_params(args)?;
            OracleReport::new("var_regression", var_regression(&params)?)
        }
        OracleCommand::Gap(args) => {
            let params = scalar_params(args)?;
            let mut r = OracleReport::new("variance_gap", variance_gap(&params)?);
            r.details.insert("var_diff".into(), var_diff(&params)?);
            r.details
                .insert("var_regression".into(), var_regression(&params)?);
            r
        }
        OracleCommand::R2Threshold { n, p, sst, sse, .. } => {
            let mut r = OracleReport::new("r2_threshold", randx_core::r2_threshold(*n, *p)?);
            if let (Some(sst), Some(sse)) = (sst, sse) {
                let cmp = variance_comparison(*n, *p, *sst, *sse)?;
                r.details.insert("conditional".into(), cmp.conditional);
                r.details.insert("marginal".into(), cmp.marginal);
                r.details.insert("r_squared".into(), cmp.r_squared);
                r.details.insert(
                    "conditional_smaller".into(),
                    f64::from(cmp.conditional_smaller),
                );
            }
            r
        }
    };
    let format = match &cmd {
        OracleCommand::VarDiff(a) | OracleCommand::VarReg(a) | OracleCommand::Gap(a) => a.format,
        OracleCommand::R2Threshold { format, .. } => *format,
    };
    Ok(render(&report.to_json(), &report.to_csv(), format))
}

fn simulation_config(args: &SimulateArgs) -> Result<SimulationConfig, Failure> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            exit: 2,
            category: "data",
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let mut cfg: SimulationConfig = serde_json::from_str(&text).map_err(|e| Failure {
            exit: 2,
            category: "data",
            message: format!("invalid simulation config {}: {e}", path.display()),
        })?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        return Ok(cfg);
    }

    let dgp_choice = if args.paper {
        DgpChoice::LognormalGamma
    } else {
        args.dgp
    };
    let gamma_rate = match args.gamma_scale {
        Some(scale) => 1.0 / scale,
        None => args.gamma_rate,
    };
    let (dgp, default_sd) = match dgp_choice {
        DgpChoice::LognormalGamma => (
            Dgp::LognormalGamma {
                gamma_shape: args.gamma_shape,
                gamma_rate,
            },
            3.0,
        ),
        DgpChoice::Offset => (
            Dgp::LinearCustom(LinearDgp::offset_benchmark()),
            OFFSET_BENCHMARK_NOISE_SD,
        ),
    };
    let noise = match (args.noise_sd, args.noise_var) {
        (Some(sd), None) => NoiseSpec::Sd(sd),
        (None, Some(var)) => NoiseSpec::Variance(var),
        (None, None) => NoiseSpec::Sd(default_sd),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    Ok(SimulationConfig {
        n_t: args.nt,
        n_c: args.nc,
        noise,
        replications: args.reps,
        seed: args.seed.unwrap_or_else(rand::random),
        dgp,
        estimators: args.estimators.iter().map(|e| e.method()).collect(),
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<String, Failure> {
    let cfg = simulation_config(&args)?;
    let report = run_monte_carlo(&cfg)?;
    match args.format {
        Format::Json => Ok(serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Csv => {
            let mut out = String::from(
                "estimator,mean_point,sd_point,mean_se,mc_se_of_mean_se,coverage,\
                 mean_r_squared,replications,seed,true_ate\n",
            );
            for (method, s) in &report.estimators {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    method,
                    s.mean_point,
                    s.sd_point,
                    s.mean_se,
                    s.mc_se_of_mean_se,
                    s.coverage,
                    report.mean_r_squared,
                    report.replications,
                    report.seed,
                    report.true_ate
                ));
            }
            Ok(out.trim_end().to_string())
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<String, Failure> {
    let dgp_choice = if args.paper {
        DgpChoice::LognormalGamma
    } else {
        args.dgp
    };
    let dgp = match dgp_choice {
        DgpChoice::LognormalGamma => Dgp::lognormal_gamma(),
        DgpChoice::Offset => Dgp::LinearCustom(LinearDgp::offset_benchmark()),
    };
    // default grid spans combined R² from roughly 0.9 down to 0.05
    let (grid, noise): (Vec<f64>, NoiseSpec) = match (&args.noise_grid, &args.variance_grid) {
        (Some(g), None) => (g.clone(), NoiseSpec::Sd(1.0)),
        (None, Some(g)) => (g.clone(), NoiseSpec::Variance(1.0)),
        (None, None) => (
            vec![1.3, 1.75, 2.45, 3.5, 5.0, 7.1, 10.0, 19.0],
            NoiseSpec::Sd(1.0),
        ),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let cfg = SimulationConfig {
        n_t: args.nt,
        n_c: args.nc,
        noise,
        replications: args.reps,
        seed: args.seed.unwrap_or_else(rand::random),
        dgp,
        estimators: vec![Method::DiffMeans, Method::Regression],
    };
    let rows = r2_sweep(&cfg, &grid)?;
    match args.format {
        Format::Json => Ok(serde_json::to_string_pretty(&rows).expect("rows serialize")),
        Format::Csv => {
            let mut out = String::from("noise,mean_r2,se_ratio\n");
            for row in rows {
                out.push_str(&format!(
                    "{},{},{}\n",
                    row.noise, row.mean_r_squared, row.se_ratio
                ));
            }
            Ok(out.trim_end().to_string())
        }
    }
}

fn cmd_nsw_demo(args: NswDemoArgs) -> Result<String, Failure> {
    let (dataset, digest) = match (&args.path, args.fetch) {
        (Some(path), false) => io::load_nsw(Path::new(path))?,
        (None, true) => {
            let url = std::env::var("RANDX_NSW_URL").map_err(|_| {
                Failure::usage(
                    "--fetch needs the RANDX_NSW_URL environment variable; \
                     offline use: omit --fetch (bundled data) or give --path FILE",
                )
            })?;
            io::fetch_nsw(&url)?
        }
        (None, false) => io::load_nsw_embedded()?,
        (Some(_), true) => unreachable!("clap conflicts_with"),
    };

    let diff = ate_diff_means(&dataset)?;
    let reg = ate_regression(&dataset)?;
    let se_gain_percent = 100.0 * (1.0 - reg.se.unwrap_or(f64::NAN) / diff.se.unwrap_or(f64::NAN));
    let combined_r_squared = reg
        .diagnostics
        .get("combined_r_squared")
        .copied()
        .unwrap_or(f64::NAN);

    let provenance = Provenance::new(digest, None);
    let report = NswDemoReport {
        schema: randx_cli::report::SCHEMA_VERSION,
        diff_means: Report::from_estimate(&diff, args.level, provenance.clone())?,
        regression: Report::from_estimate(&reg, args.level, provenance)?,
        se_gain_percent,
        combined_r_squared,
    };
    Ok(render(&report.to_json(), &report.to_csv(), args.format))
}

fn render(json: &str, csv: &str, format: Format) -> String {
    match format {
        Format::Json => json.to_string(),
        Format::Csv => csv.trim_end().to_string(),
    }
}
