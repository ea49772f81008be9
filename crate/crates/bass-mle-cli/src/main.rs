//! `bass-mle`: simulate Bass adoption paths, fit the model by maximum
//! likelihood, run the Monte Carlo rate experiment, and check the
//! proof-inequality diagnostics.
//!
//! Exit codes are a stable contract: 0 success, 1 assertion/inequality
//! failure, 2 validation failure, 3 insufficient data.

mod formats;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use bass_mle::{
    fisher_sandwich, fit_mle, fit_mle_natural, hellinger_gap, run_diagnostics, run_mse_experiment,
    simulate, verify_theorem_bound, ConstantPolicy, DiagnosticsConfig, Direction,
    Error as BassError, ExperimentConfig, FitOptions, FitResult, MarketParams, ObservedPath,
    PriceResponse, PricingPolicy, SchedulePolicy, SimConfig, StateFeedbackPolicy, StopRule,
    TheoremConstants, TransformedParams,
};
use formats::{
    experiment_report_json, mse_report_to_csv, path_from_csv, path_from_json, path_to_csv,
    path_to_json, price_path_from_csv, ParamsSpec, PolicySpec, RunConfigFile, XSpec,
};

#[derive(Parser)]
#[command(
    name = "bass-mle",
    version,
    about = "Markovian Bass model: simulation, MLE and rate experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an adoption path and write it to a path file
    Simulate(SimulateArgs),
    /// Fit the model to a path file by maximum likelihood
    Fit(FitArgs),
    /// Run the Monte Carlo MSE experiment described by a config file
    Experiment(ExperimentArgs),
    /// Check the Fisher/Hellinger inequalities and the theorem bound
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum XKind {
    /// x(r) = constant (see --x-value)
    Const,
    /// x(r) = exp(-r)
    Exp,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitParam {
    Transformed,
    Natural,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Fisher,
    Hellinger,
    Bound,
    All,
}

#[derive(Parser)]
struct SimulateArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "alpha-p")]
    alpha_p: Option<f64>,
    #[arg(long = "beta-p")]
    beta_p: Option<f64>,
    #[arg(long)]
    m: u64,
    /// Observe on [0, horizon] (exclusive with --target-n)
    #[arg(long)]
    horizon: Option<f64>,
    /// Stop at exactly this many adoptions (exclusive with --horizon)
    #[arg(long = "target-n")]
    target_n: Option<u64>,
    /// Post-n-th observation window for --target-n
    #[arg(long, default_value_t = 0.0)]
    tail: f64,
    /// Constant posted price (exclusive with --price-file)
    #[arg(long)]
    price: Option<f64>,
    /// Price schedule CSV with a start,end,price header
    #[arg(long = "price-file")]
    price_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = XKind::Const)]
    x: XKind,
    /// Constant for --x const
    #[arg(long = "x-value", default_value_t = 1.0)]
    x_value: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FileFormat::Json)]
    format: FileFormat,
    /// Also print the transformed parameters (requires alpha > beta)
    #[arg(long)]
    transformed: bool,
}

#[derive(Parser)]
struct FitArgs {
    /// Path file written by `simulate` (JSON or CSV, sniffed)
    #[arg(long)]
    path: PathBuf,
    #[arg(long, value_enum, default_value_t = XKind::Const)]
    x: XKind,
    #[arg(long = "x-value", default_value_t = 1.0)]
    x_value: f64,
    /// Write the fit report here instead of standard output
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FitParam::Transformed)]
    parametrization: FitParam,
}

#[derive(Parser)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Parser)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    check: CheckKind,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "alpha-p")]
    alpha_p: Option<f64>,
    #[arg(long = "beta-p")]
    beta_p: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    m: u64,
    /// Single count for the Fisher sandwich (default grid otherwise)
    #[arg(long)]
    n: Option<u64>,
    /// Single perturbation for the Hellinger check (default grid otherwise)
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "delta-bar-1", default_value_t = 1.0)]
    delta_bar_1: f64,
    #[arg(long = "delta-bar-2", default_value_t = 1.0)]
    delta_bar_2: f64,
    /// Experiment config for the bound check (small built-in default otherwise)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 20260810)]
    seed: u64,
    /// Replications for the built-in bound-check experiment
    #[arg(long, default_value_t = 100)]
    replications: u32,
}

/// Command failure with the exit code it maps to.
enum Failure {
    Validation(String),
    Inequality(String),
    Insufficient(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Inequality(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Insufficient(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Inequality(m) | Failure::Insufficient(m) => m,
        }
    }
}

impl From<BassError> for Failure {
    fn from(e: BassError) -> Self {
        match e {
            BassError::InsufficientData { .. } | BassError::NoAdoptions => {
                Failure::Insufficient(e.to_string())
            }
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fit(args) => run_fit(args),
        Command::Experiment(args) => run_experiment(args),
        Command::Verify(args) => run_verify(args),
    };
    if let Err(failure) = result {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.code());
    }
}

/// Cap experiment parallelism with BASS_MLE_THREADS when set.
fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match std::env::var("BASS_MLE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(n) if n >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

fn resolve_params(
    alpha: Option<f64>,
    beta: Option<f64>,
    alpha_p: Option<f64>,
    beta_p: Option<f64>,
    m: u64,
) -> Result<MarketParams, Failure> {
    match (alpha, beta, alpha_p, beta_p) {
        (Some(a), Some(b), None, None) => Ok(MarketParams::new(a, b, m)?),
        (None, None, Some(ap), Some(bp)) => Ok(TransformedParams::new(ap, bp)?.to_market(m)?),
        _ => Err(validation(
            "supply exactly one parameter pair: --alpha/--beta or --alpha-p/--beta-p",
        )),
    }
}

fn resolve_x(kind: XKind, value: f64) -> Result<PriceResponse, Failure> {
    match kind {
        XKind::Const => {
            if !(value.is_finite() && value > 0.0) {
                return Err(validation(format!(
                    "--x-value must be finite and > 0, got {value}"
                )));
            }
            Ok(PriceResponse::Constant(value))
        }
        XKind::Exp => Ok(PriceResponse::Exponential),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| validation(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| validation(format!("cannot write {}: {e}", path.display())))
}

fn load_path_file(path: &Path) -> Result<ObservedPath, Failure> {
    let text = read_file(path)?;
    let parsed = if text.trim_start().starts_with('{') {
        path_from_json(&text)
    } else {
        path_from_csv(&text)
    };
    parsed.map_err(validation)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let params = resolve_params(args.alpha, args.beta, args.alpha_p, args.beta_p, args.m)?;
    if args.transformed {
        let tp = params.to_transformed()?;
        println!("alpha_p={} beta_p={}", tp.alpha_p(), tp.beta_p());
    }
    let x = resolve_x(args.x, args.x_value)?;
    let stop = match (args.horizon, args.target_n) {
        (Some(t), None) => StopRule::Horizon(t),
        (None, Some(n)) => StopRule::TargetAdoptions { n, tail: args.tail },
        _ => {
            return Err(validation(
                "supply exactly one stop rule: --horizon or --target-n",
            ))
        }
    };
    let policy: Box<dyn PricingPolicy> = match (&args.price, &args.price_file) {
        (Some(price), None) => Box::new(ConstantPolicy { price: *price }),
        (None, Some(file)) => {
            let schedule = price_path_from_csv(&read_file(file)?).map_err(validation)?;
            Box::new(SchedulePolicy::new(schedule)?)
        }
        _ => {
            return Err(validation(
                "supply exactly one price source: --price or --price-file",
            ))
        }
    };

    let path = simulate(&SimConfig {
        params,
        x,
        policy: policy.as_ref(),
        stop,
        seed: args.seed,
    })?;

    let text = match args.format {
        FileFormat::Json => path_to_json(&path),
        FileFormat::Csv => path_to_csv(&path),
    };
    write_file(&args.out, &text)?;
    println!(
        "n={} final_time={} seed={}",
        path.adoptions(),
        path.horizon(),
        args.seed
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn fit_to_json(fit: &FitResult) -> serde_json::Value {
    let (label, se_keys) = match fit.parametrization {
        bass_mle::Parametrization::Transformed => {
            ("transformed", ("std_err_alpha_p", "std_err_beta_p"))
        }
        bass_mle::Parametrization::Natural => ("natural", ("std_err_alpha", "std_err_beta")),
    };
    let mut obj = serde_json::json!({
        "parametrization": label,
        "alpha_p_hat": fit.tp_hat.as_ref().map(|tp| tp.alpha_p()),
        "beta_p_hat": fit.tp_hat.as_ref().map(|tp| tp.beta_p()),
        "alpha_hat": fit.natural_hat.alpha(),
        "beta_hat": fit.natural_hat.beta(),
        "loglik": fit.loglik,
        "converged": fit.converged,
        "boundary": fit.boundary,
        "iterations": fit.iterations,
    });
    obj[se_keys.0] = serde_json::json!(fit.std_errors[0]);
    obj[se_keys.1] = serde_json::json!(fit.std_errors[1]);
    obj
}

fn run_fit(args: FitArgs) -> Result<(), Failure> {
    let path = load_path_file(&args.path)?;
    let x = resolve_x(args.x, args.x_value)?;
    let opts = FitOptions::default();
    let report = match args.parametrization {
        FitParam::Transformed => fit_to_json(&fit_mle(&path, &x, &opts)?),
        FitParam::Natural => fit_to_json(&fit_mle_natural(&path, &x, &opts)?),
        FitParam::Both => serde_json::json!({
            "transformed": fit_to_json(&fit_mle(&path, &x, &opts)?),
            "natural": fit_to_json(&fit_mle_natural(&path, &x, &opts)?),
        }),
    };
    let mut text = serde_json::to_string_pretty(&report).expect("fit report serializes");
    text.push('\n');
    match &args.report {
        Some(file) => write_file(file, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

fn config_params(spec: &ParamsSpec) -> Result<MarketParams, Failure> {
    match spec {
        ParamsSpec::Natural(p) => Ok(MarketParams::new(p.alpha, p.beta, p.m)?),
        ParamsSpec::Transformed(p) => {
            Ok(TransformedParams::new(p.alpha_p, p.beta_p)?.to_market(p.m)?)
        }
    }
}

fn config_x(spec: &XSpec) -> Result<PriceResponse, Failure> {
    match spec.kind.as_str() {
        "const" => {
            let value = spec.value.unwrap_or(1.0);
            if !(value.is_finite() && value > 0.0) {
                return Err(validation(format!(
                    "x value must be finite and > 0, got {value}"
                )));
            }
            Ok(PriceResponse::Constant(value))
        }
        "exp" => Ok(PriceResponse::Exponential),
        other => Err(validation(format!(
            "unknown x kind '{other}' (expected 'const' or 'exp')"
        ))),
    }
}

fn config_policy(spec: &PolicySpec) -> Result<Arc<dyn PricingPolicy + Send + Sync>, Failure> {
    match spec.kind.as_str() {
        "constant" => {
            let price = spec
                .price
                .ok_or_else(|| validation("policy kind 'constant' needs a 'price'"))?;
            Ok(Arc::new(ConstantPolicy { price }))
        }
        "feedback" => {
            let base = spec
                .base
                .ok_or_else(|| validation("policy kind 'feedback' needs a 'base'"))?;
            let per_adoption = spec
                .per_adoption
                .ok_or_else(|| validation("policy kind 'feedback' needs 'per_adoption'"))?;
            Ok(Arc::new(StateFeedbackPolicy { base, per_adoption }))
        }
        "schedule" => {
            let segments = spec
                .segments
                .as_ref()
                .ok_or_else(|| validation("policy kind 'schedule' needs 'segments'"))?;
            let path = bass_mle::PricePath::new(
                segments
                    .iter()
                    .map(|s| bass_mle::PriceSegment {
                        start: s.start,
                        end: s.end,
                        price: s.price,
                    })
                    .collect(),
            )?;
            Ok(Arc::new(SchedulePolicy::new(path)?))
        }
        other => Err(validation(format!(
            "unknown policy kind '{other}' (expected 'constant', 'feedback' or 'schedule')"
        ))),
    }
}

fn experiment_config(file: &RunConfigFile) -> Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig {
        params: config_params(&file.params)?,
        x: config_x(&file.x)?,
        policy: config_policy(&file.policy)?,
        n_grid: file.n_grid.clone(),
        replications: file.replications,
        master_seed: file.master_seed,
        tail: file.tail,
        fit: FitOptions::default(),
    })
}

fn run_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let text = read_file(&args.config)?;
    let file: RunConfigFile =
        serde_json::from_str(&text).map_err(|e| validation(format!("invalid config: {e}")))?;
    let config = experiment_config(&file)?;
    config.validate()?;

    let report = with_thread_cap(|| run_mse_experiment(&config))?;
    let tp0 = config.params.to_transformed()?;
    let constants = TheoremConstants::new(&tp0, file.delta_bar_1, file.delta_bar_2)?;
    let bound = verify_theorem_bound(&report, &constants);

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| validation(format!("cannot create {}: {e}", args.out_dir.display())))?;
    write_file(
        &args.out_dir.join("report.csv"),
        &mse_report_to_csv(&report),
    )?;
    write_file(
        &args.out_dir.join("report.json"),
        &experiment_report_json(&file, &report, &bound),
    )?;

    println!(
        "slope={:.6} ci=[{:.6},{:.6}]",
        report.slope.slope, report.slope.ci_lower, report.slope.ci_upper
    );
    println!(
        "bound_check={} alpha_theta={:.6} empirical_constant={:.6} delta_bar_needed={:.3}",
        if bound.all_pass { "PASS" } else { "FAIL" },
        constants.alpha_theta,
        bound.empirical_constant,
        bound.delta_bar_needed
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn verify_params(args: &VerifyArgs) -> Result<TransformedParams, Failure> {
    match (args.alpha, args.beta, args.alpha_p, args.beta_p) {
        (None, None, None, None) => Ok(TransformedParams::new(0.2, 0.5).expect("reference")),
        (Some(a), Some(b), None, None) => Ok(MarketParams::new(a, b, args.m)?.to_transformed()?),
        (None, None, ap, bp) => Ok(TransformedParams::new(
            ap.unwrap_or(0.2),
            bp.unwrap_or(0.5),
        )?),
        _ => Err(validation(
            "supply --alpha/--beta, --alpha-p/--beta-p, or neither (reference defaults)",
        )),
    }
}

fn check_fisher(args: &VerifyArgs, tp0: &TransformedParams) -> Result<bool, Failure> {
    let grid: Vec<u64> = match args.n {
        Some(n) => vec![n],
        None => vec![1, 10, 100, 1000],
    };
    let mut all = true;
    for n in grid {
        let n = n.min(args.m);
        let s = fisher_sandwich(n, args.m, tp0.beta_p())?;
        println!(
            "fisher n={n} m={} lower={:.6} exact={:.6} upper={:.6} holds={}",
            args.m,
            s.lower,
            s.exact,
            s.upper,
            s.holds()
        );
        all &= s.holds();
    }
    Ok(all)
}

fn check_hellinger(args: &VerifyArgs, tp0: &TransformedParams) -> Result<bool, Failure> {
    let states: Vec<u64> = [0u64, 1, 5, 25, 100, 500]
        .into_iter()
        .filter(|&j| j < args.m)
        .collect();
    let mut all = true;
    match args.delta {
        Some(delta) => {
            for (dir, label, bar, comp) in [
                (
                    Direction::AlphaP,
                    "alpha_p",
                    args.delta_bar_1,
                    tp0.alpha_p(),
                ),
                (Direction::BetaP, "beta_p", args.delta_bar_2, tp0.beta_p()),
            ] {
                if delta > bar * comp {
                    return Err(validation(format!(
                        "--delta {delta} outside the proof range [0, {}] for direction {label}",
                        bar * comp
                    )));
                }
                for &j in &states {
                    let g = hellinger_gap(
                        j,
                        args.m,
                        tp0,
                        delta,
                        dir,
                        bar,
                        1.0,
                        &PriceResponse::unit(),
                    )?;
                    println!(
                        "hellinger dir={label} j={j} delta={delta} H2={:.6e} bound={:.6e} affinity={:.6} holds={}",
                        g.hellinger_sq,
                        g.kl_bound,
                        g.affinity,
                        g.holds()
                    );
                    all &= g.holds();
                }
            }
        }
        None => {
            let cfg = DiagnosticsConfig {
                states,
                delta_bar: (args.delta_bar_1, args.delta_bar_2),
                ..DiagnosticsConfig::default()
            };
            let report = run_diagnostics(tp0, args.m, &PriceResponse::unit(), &cfg)?;
            for row in &report.hellinger {
                println!(
                    "hellinger dir={} j={} delta={:.6} H2={:.6e} bound={:.6e} affinity={:.6} holds={}",
                    row.direction,
                    row.state,
                    row.delta,
                    row.hellinger_sq,
                    row.kl_bound,
                    row.affinity,
                    row.holds
                );
                all &= row.holds;
            }
        }
    }
    Ok(all)
}

fn check_bound(args: &VerifyArgs, tp0: &TransformedParams) -> Result<bool, Failure> {
    let (config, delta_bars) = match &args.config {
        Some(path) => {
            let file: RunConfigFile = serde_json::from_str(&read_file(path)?)
                .map_err(|e| validation(format!("invalid config: {e}")))?;
            (
                experiment_config(&file)?,
                (file.delta_bar_1, file.delta_bar_2),
            )
        }
        None => (
            ExperimentConfig {
                params: tp0.to_market(args.m)?,
                x: PriceResponse::unit(),
                policy: Arc::new(ConstantPolicy { price: 1.0 }),
                n_grid: vec![25, 50, 100, 200]
                    .into_iter()
                    .filter(|&n| n <= args.m)
                    .collect(),
                replications: args.replications,
                master_seed: args.seed,
                tail: 0.0,
                fit: FitOptions::default(),
            },
            (args.delta_bar_1, args.delta_bar_2),
        ),
    };
    config.validate()?;
    let report = with_thread_cap(|| run_mse_experiment(&config))?;
    let constants =
        TheoremConstants::new(&config.params.to_transformed()?, delta_bars.0, delta_bars.1)?;
    let bound = verify_theorem_bound(&report, &constants);
    for row in &bound.rows {
        println!(
            "bound n={} mse_total={:.6e} alpha_theta/(n+1)={:.6e} pass={}",
            row.n, row.mse_total, row.bound, row.pass
        );
    }
    println!(
        "bound_check={} alpha_theta={:.6} empirical_constant={:.6} delta_bar_needed={:.3}",
        if bound.all_pass { "PASS" } else { "FAIL" },
        constants.alpha_theta,
        bound.empirical_constant,
        bound.delta_bar_needed
    );
    Ok(bound.all_pass)
}

fn run_verify(args: VerifyArgs) -> Result<(), Failure> {
    let tp0 = verify_params(&args)?;
    let mut all = true;
    match args.check {
        CheckKind::Fisher => all &= check_fisher(&args, &tp0)?,
        CheckKind::Hellinger => all &= check_hellinger(&args, &tp0)?,
        CheckKind::Bound => all &= check_bound(&args, &tp0)?,
        CheckKind::All => {
            all &= check_fisher(&args, &tp0)?;
            all &= check_hellinger(&args, &tp0)?;
            all &= check_bound(&args, &tp0)?;
        }
    }
    if all {
        println!("verify: all checks hold");
        Ok(())
    } else {
        Err(Failure::Inequality(
            "at least one checked inequality failed (violating rows printed above)".into(),
        ))
    }
}
