//! `singtime` -- single entry point wiring configs to the library modules,
//! with byte-stable outputs for regression testing.
//!
//! Exit codes: 0 = run completed and all hard invariants held (a simulated
//! blow-up is a result, not an error); 2 = configuration/usage error;
//! 3 = invariant violation.

use clap::{Args, Parser, Subcommand};
use singtime::criticality::{
    self, excess, format_rational, nse_table, parse_rational, serrin_delta, NonlinearityTerm,
    SerrinRegime, Setting, SplitMode,
};
use singtime::experiments::{
    self, derive_seed, estimates_from_trajectories, tail_exponent_check, LifetimeEstimate,
    Trajectory,
};
use singtime::fractal::{self, dimension_fit, hausdorff_premeasure, FractalSet};
use singtime::noise;
use singtime::spde::{self, Outcome, SimConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
enum CliError {
    /// exit 2
    Config(String),
    /// exit 3
    Invariant(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violation: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

impl From<criticality::CriticalityError> for CliError {
    // parameter inequalities are user-input problems, not internal
    // invariant breaks, so they map to exit 2
    fn from(e: criticality::CriticalityError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<fractal::FractalError> for CliError {
    fn from(e: fractal::FractalError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<noise::NoiseError> for CliError {
    fn from(e: noise::NoiseError) -> Self {
        match e {
            noise::NoiseError::DivergenceViolation { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<spde::SpdeError> for CliError {
    fn from(e: spde::SpdeError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<experiments::ExperimentsError> for CliError {
    fn from(e: experiments::ExperimentsError) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "singtime", version, about = "Singular-time laboratory for stochastic Navier-Stokes equations")]
struct Cli {
    /// Worker pool size; only `lifetime`/`singular` fan out.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Master seed; all randomness flows from it. Sub-seeds are derived by a
    /// documented counter scheme (SplitMix64 over the realization index).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (falls back to $SINGTIME_OUT, then ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the human-readable summary on stdout.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact excess/regime report for a criticality setting.
    Criticality(CriticalityArgs),
    /// Serrin singular-time dimension bound delta0.
    Serrin(SerrinArgs),
    /// The two NSE dimension-bound table rows, exact in rationals.
    NseTable(NseTableArgs),
    /// Box-counting dimension fit of a point-set file.
    Dimension(DimensionArgs),
    /// Hausdorff pre-measure of a point-set file at one scale.
    Premeasure(PremeasureArgs),
    /// One SPDE trajectory with energy ledger (blow-up is a result).
    Simulate(SimulateArgs),
    /// Monte Carlo lifetime-tail estimation over an ensemble.
    Lifetime(LifetimeArgs),
    /// Proxy singular-time extraction over an ensemble.
    Singular(SingularArgs),
    /// One-sided tail-exponent comparison against p*Exc.
    TailCheck(TailCheckArgs),
    /// Construct and validate a noise family.
    ValidateNoise(ValidateNoiseArgs),
}

#[derive(Args)]
struct SettingFlags {
    /// Integrability exponent p (rational, e.g. 4 or 7/2).
    #[arg(long, default_value = "4")]
    p: String,
    /// Weight exponent alpha.
    #[arg(long, default_value = "0")]
    alpha: String,
    /// Time-integrability ell of the energy space.
    #[arg(long, default_value = "2")]
    ell: String,
    /// Nonlinearity term "rho,beta" (repeatable).
    #[arg(long = "term", required = true)]
    terms: Vec<String>,
    /// Excess split mode.
    #[arg(long, default_value = "coupled")]
    split: String,
}

impl SettingFlags {
    fn build(&self) -> Result<Setting, CliError> {
        let p = parse_rational(&self.p)?;
        let alpha = parse_rational(&self.alpha)?;
        let ell = parse_rational(&self.ell)?;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let (rho, beta) = t
                    .split_once(',')
                    .ok_or_else(|| CliError::Config(format!("--term wants rho,beta, got {t}")))?;
                Ok(NonlinearityTerm::new(parse_rational(rho.trim())?, parse_rational(beta.trim())?)?)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let split = match self.split.as_str() {
            "coupled" => SplitMode::Coupled,
            "additive" => SplitMode::Additive,
            other => return Err(CliError::Config(format!("unknown split mode: {other}"))),
        };
        Ok(Setting::new(p, alpha, terms, ell, split)?)
    }

    fn render(&self) -> String {
        format!(
            "p = {}\nalpha = {}\nell = {}\nterms = {}\nsplit = {}\n",
            self.p,
            self.alpha,
            self.ell,
            self.terms.join("; "),
            self.split
        )
    }
}

#[derive(Args)]
struct CriticalityArgs {
    #[command(flatten)]
    setting: SettingFlags,
}

#[derive(Args)]
struct SerrinArgs {
    #[arg(long, default_value = "4")]
    p0: String,
    #[arg(long, default_value = "4")]
    q0: String,
    #[arg(long, default_value = "0")]
    gamma0: String,
}

#[derive(Args)]
struct NseTableArgs {
    #[arg(long, default_value = "4")]
    p0: String,
    #[arg(long, default_value = "4")]
    q0: String,
}

#[derive(Args)]
struct DimensionArgs {
    /// Point-set file: one point or "lo hi" interval per line.
    file: PathBuf,
    /// Scale scheme: "dyadic" (eta = 2^-k) or "dyadic-thirds" (eta = 3^-k/2).
    #[arg(long, default_value = "dyadic-thirds")]
    scheme: String,
    /// Number of scales k = 1..levels.
    #[arg(long, default_value_t = 12)]
    levels: u32,
}

#[derive(Args)]
struct PremeasureArgs {
    file: PathBuf,
    /// Dimension parameter s in [0, 1].
    #[arg(long)]
    s: f64,
    /// Maximal cover diameter eta.
    #[arg(long)]
    eta: f64,
}

#[derive(Args)]
struct ConfigFlags {
    /// Solver config file (flat key = value); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set dt=1e-3 (repeatable; flags win over
    /// file keys, and later overrides win over earlier ones).
    #[arg(long = "set")]
    sets: Vec<String>,
}

impl ConfigFlags {
    fn build(&self, seed: Option<u64>) -> Result<SimConfig, CliError> {
        let mut text = match &self.config {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set wants key=value, got {s}")))?;
            text.push_str(&format!("\n{} = {}", k.trim(), v.trim()));
        }
        if let Some(seed) = seed {
            text.push_str(&format!("\nseed = {seed}"));
        }
        Ok(SimConfig::parse(&text)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigFlags,
    /// Also write a binary state snapshot of the final state.
    #[arg(long, default_value_t = false)]
    snapshot: bool,
}

#[derive(Args)]
struct LifetimeArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[arg(long, default_value_t = 8)]
    ensemble: usize,
    /// Norm threshold k (repeatable).
    #[arg(long = "threshold", required = true)]
    thresholds: Vec<f64>,
    /// Comma-separated horizons T for the ecdf.
    #[arg(long)]
    horizons: String,
    /// Fit window "lo,hi" (default: lowest decade of observed lifetimes).
    #[arg(long)]
    window: Option<String>,
    /// Envelope constant C0 (enables the theoretical overlay).
    #[arg(long)]
    c0: Option<f64>,
    /// Envelope exponent p*Exc.
    #[arg(long, default_value_t = 1.0)]
    p_exc: f64,
    /// Envelope level N.
    #[arg(long, default_value_t = 1.0)]
    n_level: f64,
    /// Envelope power p.
    #[arg(long, default_value_t = 4.0)]
    p_env: f64,
}

#[derive(Args)]
struct SingularArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[arg(long, default_value_t = 8)]
    ensemble: usize,
    /// Exceedance fraction level in (0, 1) (repeatable).
    #[arg(long = "epsilon", required = true)]
    epsilons: Vec<f64>,
    /// Norm threshold K.
    #[arg(long = "threshold-k")]
    threshold_k: f64,
    /// Comma-separated box-counting scales (default: dyadic from the window).
    #[arg(long)]
    scales: Option<String>,
}

#[derive(Args)]
struct TailCheckArgs {
    /// Lifetime samples file: one tau per line, "inf" for survivors.
    file: PathBuf,
    #[command(flatten)]
    setting: SettingFlags,
    /// Comma-separated horizons T for the ecdf.
    #[arg(long)]
    horizons: String,
    /// Fit window "lo,hi".
    #[arg(long)]
    window: Option<String>,
    /// Threshold the samples were collected at (for the report header).
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
}

#[derive(Args)]
struct ValidateNoiseArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    k_max: i64,
    #[arg(long, default_value = "0.6666666666666666")]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Attach Lie gradients mu = grad sigma.
    #[arg(long, default_value_t = false)]
    lie: bool,
    /// Validation grid resolution (power of two).
    #[arg(long, default_value_t = 32)]
    grid: usize,
}

/// Common context resolved from the global flags.
struct Ctx {
    out: PathBuf,
    quiet: bool,
    jobs: usize,
    seed: Option<u64>,
}

impl Ctx {
    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn write(&self, name: &str, content: &str) -> CliResult {
        std::fs::create_dir_all(&self.out)?;
        std::fs::write(self.out.join(name), content)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("SINGTIME_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx { out, quiet: cli.quiet, jobs: cli.jobs.max(1), seed: cli.seed };
    let result = match &cli.command {
        Command::Criticality(a) => cmd_criticality(&ctx, a),
        Command::Serrin(a) => cmd_serrin(&ctx, a),
        Command::NseTable(a) => cmd_nse_table(&ctx, a),
        Command::Dimension(a) => cmd_dimension(&ctx, a),
        Command::Premeasure(a) => cmd_premeasure(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Lifetime(a) => cmd_lifetime(&ctx, a),
        Command::Singular(a) => cmd_singular(&ctx, a),
        Command::TailCheck(a) => cmd_tail_check(&ctx, a),
        Command::ValidateNoise(a) => cmd_validate_noise(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("singtime: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Invariant(_) => ExitCode::from(3),
            }
        }
    }
}

fn cmd_criticality(ctx: &Ctx, args: &CriticalityArgs) -> CliResult {
    let setting = args.setting.build()?;
    let report = excess(&setting)?;
    let mut text = String::from("# criticality report\n# resolved setting:\n");
    for line in args.setting.render().lines() {
        text.push_str(&format!("#   {line}\n"));
    }
    for (i, exc) in report.exc_terms.iter().enumerate() {
        text.push_str(&format!("exc[{i}] = {}\n", format_rational(exc)));
    }
    text.push_str(&format!("Exc = {}\n", format_rational(&report.exc)));
    text.push_str(&format!("dimension_bound = {}\n", format_rational(&report.dimension_bound)));
    text.push_str(&format!("regime = {}\n", report.regime));
    ctx.write("criticality.txt", &text)?;
    ctx.say(text.trim_end());
    Ok(())
}

fn cmd_serrin(ctx: &Ctx, args: &SerrinArgs) -> CliResult {
    let p0 = parse_rational(&args.p0)?;
    let q0 = parse_rational(&args.q0)?;
    let gamma0 = parse_rational(&args.gamma0)?;
    let (delta0, regime) = serrin_delta(&p0, &q0, &gamma0)?;
    let regime_str = match regime {
        SerrinRegime::Supercritical => "supercritical (partial regularity)",
        SerrinRegime::GlobalRegularity => "Serrin global-regularity regime",
    };
    let text = format!(
        "# serrin report\n# p0 = {}, q0 = {}, gamma0 = {}\ndelta0 = {}\nregime = {}\n",
        args.p0,
        args.q0,
        args.gamma0,
        format_rational(&delta0),
        regime_str
    );
    ctx.write("serrin.txt", &text)?;
    ctx.say(text.trim_end());
    Ok(())
}

fn cmd_nse_table(ctx: &Ctx, args: &NseTableArgs) -> CliResult {
    let p0 = parse_rational(&args.p0)?;
    let q0 = parse_rational(&args.q0)?;
    let rows = nse_table(&p0, &q0)?;
    let mut text = String::from("energy_space | ell | spatial_regularity | Exc | dimension_bound\n");
    for r in &rows {
        text.push_str(&format!(
            "{} | {} | {} | {} | {}\n",
            r.energy_space,
            format_rational(&r.ell),
            format_rational(&r.spatial_regularity),
            format_rational(&r.exc),
            format_rational(&r.dimension_bound)
        ));
    }
    ctx.write("nse_table.txt", &text)?;
    ctx.say(text.trim_end());
    Ok(())
}

fn scales_for(scheme: &str, levels: u32) -> Result<Vec<f64>, CliError> {
    match scheme {
        "dyadic" => Ok((1..=levels).map(|k| 0.5f64.powi(k as i32)).collect()),
        "dyadic-thirds" => Ok((1..=levels).map(|k| 3f64.powi(-(k as i32)) / 2.0).collect()),
        other => Err(CliError::Config(format!("unknown scheme: {other}"))),
    }
}

fn cmd_dimension(ctx: &Ctx, args: &DimensionArgs) -> CliResult {
    let set = FractalSet::parse(&std::fs::read_to_string(&args.file)?)?;
    let scales = scales_for(&args.scheme, args.levels)?;
    let fit = dimension_fit(&set, &scales)?;
    let mut text = format!(
        "# dimension report for {}\n# scheme = {}, levels = {}\n",
        args.file.display(),
        args.scheme,
        args.levels
    );
    text.push_str("eta,count\n");
    for (eta, logc) in fit.scales.iter().zip(&fit.log_counts) {
        text.push_str(&format!("{},{}\n", eta, logc.exp().round() as u64));
    }
    text.push_str(&format!(
        "dimension = {}\nslope = {}\nr_squared = {}\n",
        fit.dimension, fit.slope, fit.r_squared
    ));
    ctx.write("dimension.txt", &text)?;
    ctx.say(&format!("dimension = {} (r^2 = {})", fit.dimension, fit.r_squared));
    Ok(())
}

fn cmd_premeasure(ctx: &Ctx, args: &PremeasureArgs) -> CliResult {
    let set = FractalSet::parse(&std::fs::read_to_string(&args.file)?)?;
    let est = hausdorff_premeasure(&set, args.s, args.eta)?;
    let mut text = format!(
        "# hausdorff pre-measure for {}\ns = {}\neta = {}\nvalue = {}\n# cover ({} pieces):\n",
        args.file.display(),
        est.s,
        est.eta,
        est.value,
        est.cover.len()
    );
    for (lo, hi) in &est.cover {
        text.push_str(&format!("{lo} {hi}\n"));
    }
    ctx.write("premeasure.txt", &text)?;
    ctx.say(&format!("premeasure(s = {}, eta = {}) = {}", est.s, est.eta, est.value));
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> CliResult {
    let config = args.config.build(ctx.seed)?;
    let resolved = config.render();
    let result = spde::simulate(config)?;
    let mut csv = String::new();
    for line in resolved.lines() {
        csv.push_str(&format!("# {line}\n"));
    }
    csv.push_str(&result.ledger.to_csv());
    ctx.write("ledger.csv", &csv)?;
    if args.snapshot {
        std::fs::create_dir_all(&ctx.out)?;
        spde::write_snapshot(&ctx.out.join("final_state.bin"), &result.state)?;
    }
    if result.max_divergence_residual >= 1e-10 {
        return Err(CliError::Invariant(format!(
            "divergence residual {} exceeded 1e-10",
            result.max_divergence_residual
        )));
    }
    let last = result.ledger.rows.last().expect("ledger has rows");
    match &result.outcome {
        Outcome::Completed => ctx.say(&format!(
            "completed: t = {}, E = {}, residual = {}, max_div = {:.3e}",
            last.t, last.e, last.residual, result.max_divergence_residual
        )),
        Outcome::BlowUp { t, step, reason } => ctx.say(&format!(
            "blow-up recorded at t = {t} (step {step}): {reason}"
        )),
    }
    Ok(())
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad {what}: {t}"))))
        .collect()
}

fn parse_window(text: &Option<String>) -> Result<Option<(f64, f64)>, CliError> {
    match text {
        None => Ok(None),
        Some(t) => {
            let v = parse_f64_list(t, "window")?;
            if v.len() != 2 || v[0] >= v[1] {
                return Err(CliError::Config(format!("window wants lo,hi with lo < hi: {t}")));
            }
            Ok(Some((v[0], v[1])))
        }
    }
}

/// Runs the ensemble on the worker pool; trajectories are merged by
/// realization index, so the result is independent of scheduling.
fn run_ensemble(base: &SimConfig, ensemble: usize, jobs: usize) -> Result<Vec<Trajectory>, CliError> {
    if ensemble < 2 {
        return Err(CliError::Config(format!("ensemble must be >= 2, got {ensemble}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    use rayon::prelude::*;
    let results: Vec<Result<Trajectory, spde::SpdeError>> = pool.install(|| {
        (0..ensemble)
            .into_par_iter()
            .map(|i| {
                let mut cfg = base.clone();
                cfg.seed = derive_seed(base.seed, i as u64);
                spde::simulate(cfg).map(|r| Trajectory::from_result(&r))
            })
            .collect()
    });
    results.into_iter().collect::<Result<Vec<_>, _>>().map_err(CliError::from)
}

fn estimate_csv(est: &LifetimeEstimate, resolved: &str) -> String {
    let mut csv = String::new();
    for line in resolved.lines() {
        csv.push_str(&format!("# {line}\n"));
    }
    csv.push_str(&format!(
        "# threshold_k = {}, norm = {}, fit_window = [{}, {}]\n",
        est.threshold_k, est.norm_label, est.fit_window.0, est.fit_window.1
    ));
    match est.fitted_exponent {
        Some(e) => csv.push_str(&format!("# fitted_exponent = {e}\n")),
        None => csv.push_str("# fitted_exponent = none\n"),
    }
    if let Some(ci) = est.ci_half_width {
        csv.push_str(&format!("# ci_half_width = {ci}\n"));
    }
    csv.push_str("T,ecdf,envelope\n");
    for (i, &(t, f)) in est.ecdf.iter().enumerate() {
        let env = est.envelope.get(i).map(|&(_, v)| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{t},{f},{env}\n"));
    }
    csv.push_str("tau_samples\n");
    for s in &est.samples {
        csv.push_str(&format!("{s}\n"));
    }
    csv
}

fn cmd_lifetime(ctx: &Ctx, args: &LifetimeArgs) -> CliResult {
    let config = args.config.build(ctx.seed)?;
    let horizons = parse_f64_list(&args.horizons, "horizon")?;
    let window = parse_window(&args.window)?;
    let envelope = args.c0.map(|c0| experiments::EnvelopeSpec {
        c0,
        p_exc: args.p_exc,
        n_level: args.n_level,
        p: args.p_env,
    });
    let trajectories = run_ensemble(&config, args.ensemble, ctx.jobs)?;
    let estimates = estimates_from_trajectories(
        &trajectories,
        &config,
        &args.thresholds,
        &horizons,
        window,
        envelope.as_ref(),
    )?;
    let resolved = config.render();
    for est in &estimates {
        let name = format!("lifetime_k{}.csv", est.threshold_k);
        ctx.write(&name, &estimate_csv(est, &resolved))?;
        let fitted = est
            .fitted_exponent
            .map(|e| e.to_string())
            .unwrap_or_else(|| "none".to_string());
        ctx.say(&format!(
            "threshold {}: {} survivors of {}, fitted exponent {}",
            est.threshold_k,
            est.samples.iter().filter(|t| t.is_infinite()).count(),
            est.samples.len(),
            fitted
        ));
    }
    Ok(())
}

fn cmd_singular(ctx: &Ctx, args: &SingularArgs) -> CliResult {
    let config = args.config.build(ctx.seed)?;
    let trajectories = run_ensemble(&config, args.ensemble, ctx.jobs)?;
    let scales = match &args.scales {
        Some(t) => parse_f64_list(t, "scale")?,
        None => {
            let span = config.t_end;
            (2..8).map(|k| span * 0.5f64.powi(k)).collect()
        }
    };
    let resolved = config.render();
    for &eps in &args.epsilons {
        let report =
            experiments::singular_proxy(&trajectories, args.threshold_k, eps, &scales, None)?;
        let mut text = String::new();
        text.push_str(&format!("# {}\n", report.proxy_note));
        for line in resolved.lines() {
            text.push_str(&format!("# {line}\n"));
        }
        text.push_str(&format!(
            "# epsilon = {}, threshold_K = {}\n",
            report.epsilon, report.threshold_k
        ));
        match &report.dimension {
            Some(fit) => text.push_str(&format!(
                "# dimension = {} (r^2 = {})\n",
                fit.dimension, fit.r_squared
            )),
            None => text.push_str("# dimension = none (empty flagged set)\n"),
        }
        text.push_str(&report.flagged.render());
        let name = format!("singular_eps{eps}.txt");
        ctx.write(&name, &text)?;
        let dim = report
            .dimension
            .map(|f| f.dimension.to_string())
            .unwrap_or_else(|| "none".to_string());
        ctx.say(&format!(
            "epsilon {}: {} flagged components, dimension {}",
            eps,
            report.flagged.intervals().len(),
            dim
        ));
    }
    Ok(())
}

fn cmd_tail_check(ctx: &Ctx, args: &TailCheckArgs) -> CliResult {
    let setting = args.setting.build()?;
    let text = std::fs::read_to_string(&args.file)?;
    let samples: Vec<f64> = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| match l {
            "inf" | "INF" | "Infinity" => Ok(f64::INFINITY),
            _ => l.parse::<f64>().map_err(|_| CliError::Config(format!("bad tau sample: {l}"))),
        })
        .collect::<Result<_, _>>()?;
    let horizons = parse_f64_list(&args.horizons, "horizon")?;
    let window = parse_window(&args.window)?;
    let est = experiments::tail_estimate(
        samples,
        args.threshold,
        "file".to_string(),
        &horizons,
        window,
        None,
    )?;
    let check = tail_exponent_check(&est, &setting)?;
    let fitted = check.fitted.map(|f| f.to_string()).unwrap_or_else(|| "none".to_string());
    let verdict = if check.pass { "PASS" } else { "FAIL" };
    let text = format!(
        "# tail-exponent check\n# resolved setting:\n{}fitted = {}\ntarget = {}\nci_half_width = {}\nresult = {}\nnote = {}\n",
        args.setting
            .render()
            .lines()
            .map(|l| format!("#   {l}\n"))
            .collect::<String>(),
        fitted,
        check.target,
        check.ci_half_width,
        verdict,
        check.note
    );
    ctx.write("tail_check.txt", &text)?;
    ctx.say(&format!(
        "{verdict}: fitted {fitted} vs target {} (CI {})",
        check.target, check.ci_half_width
    ));
    Ok(())
}

fn cmd_validate_noise(ctx: &Ctx, args: &ValidateNoiseArgs) -> CliResult {
    let seed = ctx.seed.unwrap_or(0);
    let mut field = noise::build_kraichnan(args.d, args.k_max, args.gamma, args.amplitude, seed)?;
    if args.lie {
        field = noise::build_lie(&field)?;
    }
    let report = noise::validate(&field, args.grid)?;
    let field_json = serde_json::to_string_pretty(&field).expect("noise field serializes");
    let report_json = serde_json::to_string_pretty(&report).expect("noise report serializes");
    ctx.write("noise_field.json", &field_json)?;
    ctx.write("noise_report.json", &report_json)?;
    if !report.within_bound {
        return Err(CliError::Invariant(format!(
            "Holder estimate exceeds the certified bound: {} + {} > {}",
            report.sup_l2_sq.sqrt(),
            report.holder_quotient,
            report.m_bound
        )));
    }
    ctx.say(&format!(
        "{}: {} modes, divergence residual {:.3e}, Holder estimate within bound",
        field.label,
        field.modes.len(),
        report.divergence_residual
    ));
    Ok(())
}
