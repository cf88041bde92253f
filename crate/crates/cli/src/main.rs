//! `l1tik`: batch front end for solves, rate studies and analyses.
//!
//! Every command reads one TOML config (`--config`) and writes CSV files
//! into `--out`. Exit codes: 0 success, 1 I/O failure, 2 invalid config,
//! 3 solver non-convergence, 4 discrepancy principle failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use l1tik::csv::{
    fmt_f64, median_plot_csv, plot_csv, records_csv, summary_csv, table, two_columns,
};
use l1tik::operators::{assemble, conditioning_scan, weak_star_diagnostic, Probe};
use l1tik::parameter_choice::log_grid;
use l1tik::presets::{preset, PRESET_NAMES};
use l1tik::rates::{
    fit_loglog_slope, generate_noisy_data, run_rate_study, RateStudyConfig, RecordStatus,
};
use l1tik::solver::{discrepancy, optimality_certificate, solve_tikhonov};
use l1tik::source_conditions::{
    beta_from_mu, canonical_sources, gamma_from_sources, phi_eval, property1_witness_bidiagonal,
    vsc_check, GammaMode, SmoothnessProfile, MAX_SIGNED_SUP_N,
};
use l1tik::{Error, TikhonovProblem, TruncatedSequence};

use config::{
    echo, parse, ConditioningConfig, GammaConfig, PhiConfig, ProbeConfig, SolveConfig, VscConfig,
    WeakStarConfig, WitnessConfig,
};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
    NotConverged(String),
    Sdp(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Sdp(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
            CliError::Sdp(m) => write!(f, "discrepancy principle failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } | Error::PowerIterationStalled { .. } => {
                CliError::NotConverged(e.to_string())
            }
            Error::DiscrepancyUnreachable { .. } => CliError::Sdp(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "l1tik",
    version,
    about = "l1-penalized Tikhonov regularization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for independent records.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    echo_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the Tikhonov functional for one alpha.
    Solve(Common),
    /// Run a convergence-rate study.
    Rates {
        #[command(flatten)]
        common: Common,
        /// Bundled study instead of --config.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
    },
    /// Diagnostics of source conditions and operators.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Tabulate the index function phi on a log grid.
    Phi(Common),
    /// Build and certify a dual witness for the bidiagonal operator.
    Witness(Common),
    /// Smallest singular value against the truncation level.
    Conditioning(Common),
    /// Pair a probe with unit vectors e_k.
    Weakstar(Common),
    /// Sample the variational inequality.
    Vsc(Common),
    /// Source-element constants gamma_n.
    Gamma(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("l1tik: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(c) => cmd_solve(&c),
        Command::Rates { common, preset } => cmd_rates(&common, preset.as_deref()),
        Command::Analyze { what } => match what {
            Analysis::Phi(c) => analyze_phi(&c),
            Analysis::Witness(c) => analyze_witness(&c),
            Analysis::Conditioning(c) => analyze_conditioning(&c),
            Analysis::Weakstar(c) => analyze_weakstar(&c),
            Analysis::Vsc(c) => analyze_vsc(&c),
            Analysis::Gamma(c) => analyze_gamma(&c),
        },
    }
}

fn read_config<T: serde::de::DeserializeOwned>(c: &Common) -> Result<T, CliError> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// Prints the config when `--echo-config` is set; returns whether it did.
fn echoed<T: serde::Serialize>(c: &Common, config: &T) -> Result<bool, CliError> {
    if c.echo_config {
        print!("{}", echo(config)?);
    }
    Ok(c.echo_config)
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn indexed(values: &[f64]) -> Vec<Vec<String>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), fmt_f64(*v)])
        .collect()
}

fn cmd_solve(c: &Common) -> Result<(), CliError> {
    let mut cfg: SolveConfig = read_config(c)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if echoed(c, &cfg)? {
        return Ok(());
    }
    cfg.operator.kind.validate(cfg.n)?;
    let op = assemble(&cfg.operator, cfg.n, cfg.image_norm())?;
    let data = match (&cfg.data, &cfg.model) {
        (Some(values), None) => {
            if cfg.delta.is_some() {
                return Err(CliError::Validation(
                    "`delta` needs `model`, not inline `data`".into(),
                ));
            }
            if values.len() != cfg.n {
                return Err(CliError::Validation(format!(
                    "`data` has {} entries, expected n = {}",
                    values.len(),
                    cfg.n
                )));
            }
            TruncatedSequence::new(values.clone())?
        }
        (None, Some(model)) => {
            model.validate()?;
            let y = op.apply(&model.materialize(cfg.n)?)?;
            match cfg.delta {
                Some(delta) => generate_noisy_data(&y, delta, op.image_norm(), cfg.seed)?,
                None => y,
            }
        }
        _ => {
            return Err(CliError::Validation(
                "exactly one of `data` and `model` must be given".into(),
            ))
        }
    };
    let problem = TikhonovProblem::elastic(&op, &data, cfg.p, cfg.alpha, cfg.elastic_eta)?;
    let (x, diag) = solve_tikhonov(&problem, &cfg.solver.options())?;
    let cert = optimality_certificate(&problem, &x, l1tik::parameter_choice::TOL_CERT)?;
    let d = discrepancy(&problem, &x)?;
    write(
        &c.out,
        "solution.csv",
        &table(&["k", "x"], indexed(x.as_slice())),
    )?;
    write(
        &c.out,
        "diagnostics.csv",
        &table(
            &[
                "alpha",
                "iterations",
                "objective",
                "residual",
                "discrepancy",
                "converged",
                "certificate_violation",
                "certified",
            ],
            [vec![
                fmt_f64(cfg.alpha),
                diag.iterations.to_string(),
                fmt_f64(diag.objective),
                fmt_f64(diag.residual),
                fmt_f64(d),
                diag.converged.to_string(),
                fmt_f64(cert.max_violation),
                cert.passed.to_string(),
            ]],
        ),
    )?;
    println!(
        "objective {} after {} iterations, discrepancy {}",
        fmt_f64(diag.objective),
        diag.iterations,
        fmt_f64(d)
    );
    if !diag.converged {
        return Err(CliError::NotConverged(format!(
            "residual {} after {} iterations",
            fmt_f64(diag.residual),
            diag.iterations
        )));
    }
    Ok(())
}

fn cmd_rates(c: &Common, preset_name: Option<&str>) -> Result<(), CliError> {
    let mut cfg: RateStudyConfig = match preset_name {
        Some(name) => preset(name).ok_or_else(|| {
            CliError::Validation(format!(
                "unknown preset `{name}` (known: {})",
                PRESET_NAMES.join(", ")
            ))
        })?,
        None => read_config(c)?,
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if echoed(c, &cfg)? {
        return Ok(());
    }
    if c.jobs < 1 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let study = run_rate_study(&cfg, c.jobs)?;
    write(&c.out, "records.csv", &records_csv(&study.records))?;
    write(&c.out, "summary.csv", &summary_csv(&study))?;
    write(&c.out, "plot.csv", &plot_csv(&study))?;
    write(&c.out, "plot_median.csv", &median_plot_csv(&study))?;
    print!("{}", summary_csv(&study));
    if !study.truncation_ok() {
        println!(
            "note: truncation tail {} exceeds 0.01 * min delta = {}",
            fmt_f64(study.truncation_tail),
            fmt_f64(study.truncation_limit)
        );
    }
    if !study.valid {
        let unreachable = study
            .records
            .iter()
            .any(|r| r.status == RecordStatus::DiscrepancyUnreachable);
        let msg = format!(
            "{} of {} records failed",
            study.n_failed,
            study.records.len()
        );
        return Err(if unreachable {
            CliError::Sdp(msg)
        } else {
            CliError::NotConverged(msg)
        });
    }
    Ok(())
}

fn analyze_phi(c: &Common) -> Result<(), CliError> {
    let cfg: PhiConfig = read_config(c)?;
    if echoed(c, &cfg)? {
        return Ok(());
    }
    let g = &cfg.grid;
    if !(g.lo > 0.0 && g.lo < g.hi) || g.points < 2 {
        return Err(CliError::Validation(
            "grid needs 0 < lo < hi and points >= 2".into(),
        ));
    }
    let profile = SmoothnessProfile::from_model(&cfg.model, &cfg.gamma, cfg.n_max)?;
    let ts = log_grid(g.lo, g.hi, g.points);
    let values = ts
        .iter()
        .map(|&t| phi_eval(&profile, t))
        .collect::<Result<Vec<_>, _>>()?;
    let curve: Vec<(f64, f64)> = ts.iter().zip(&values).map(|(t, v)| (*t, v.value)).collect();
    write(&c.out, "phi.csv", &two_columns(["t", "phi"], &curve))?;
    let argmins = ts
        .iter()
        .zip(&values)
        .map(|(t, v)| vec![fmt_f64(*t), v.argmin_n.to_string()]);
    write(
        &c.out,
        "phi_argmin.csv",
        &table(&["t", "argmin_n"], argmins),
    )?;
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .zip(&values)
        .filter(|(t, v)| **t < 1.0 && v.value > 0.0)
        .map(|(t, v)| (*t, v.value))
        .collect();
    let fit = fit_loglog_slope(&pairs)?;
    println!("loglog_slope,{}", fmt_f64(fit.slope));
    Ok(())
}

fn analyze_witness(c: &Common) -> Result<(), CliError> {
    let cfg: WitnessConfig = read_config(c)?;
    if echoed(c, &cfg)? {
        return Ok(());
    }
    let w = property1_witness_bidiagonal(&cfg.xi, cfg.mu, cfg.tail, cfg.n)?;
    let op = assemble(
        &l1tik::OperatorKind::BidiagonalSum.into(),
        cfg.n,
        l1tik::NormKind::L1,
    )?;
    let adj = op.apply_adjoint(&w.eta)?;
    let rows = w
        .eta
        .as_slice()
        .iter()
        .zip(adj.as_slice())
        .enumerate()
        .map(|(i, (e, a))| vec![(i + 1).to_string(), fmt_f64(*e), fmt_f64(*a)]);
    write(
        &c.out,
        "witness.csv",
        &table(&["k", "eta", "adjoint_eta"], rows),
    )?;
    let cert = w.certify(&op)?;
    let summary = table(
        &[
            "head_exact",
            "tail_bounded",
            "norm_bounded",
            "head_error",
            "tail_max",
            "eta_sup",
            "gamma_bound",
        ],
        [vec![
            cert.head_exact.to_string(),
            cert.tail_bounded.to_string(),
            cert.norm_bounded.to_string(),
            fmt_f64(cert.head_error),
            fmt_f64(cert.tail_max),
            fmt_f64(cert.eta_sup),
            fmt_f64(w.gamma_bound),
        ]],
    );
    write(&c.out, "certificate.csv", &summary)?;
    print!("{summary}");
    Ok(())
}

fn analyze_conditioning(c: &Common) -> Result<(), CliError> {
    let cfg: ConditioningConfig = read_config(c)?;
    if echoed(c, &cfg)? {
        return Ok(());
    }
    for &n in &cfg.n_grid {
        cfg.operator.kind.validate(n)?;
    }
    let report = conditioning_scan(&cfg.operator, &cfg.n_grid)?;
    let rows = report
        .n_values
        .iter()
        .zip(&report.sigma_min)
        .map(|(n, s)| vec![n.to_string(), fmt_f64(*s), fmt_f64(1.0 / s)]);
    write(
        &c.out,
        "conditioning.csv",
        &table(&["n", "sigma_min", "inv_sigma_min"], rows),
    )?;
    let verdict = match report.verdict {
        l1tik::operators::ConditioningVerdict::Degenerating => "degenerating",
        l1tik::operators::ConditioningVerdict::Stable => "stable",
    };
    println!(
        "verdict,{verdict}\ngrowth_exponent,{}",
        report.growth_exponent.map(fmt_f64).unwrap_or_default()
    );
    Ok(())
}

fn analyze_weakstar(c: &Common) -> Result<(), CliError> {
    let cfg: WeakStarConfig = read_config(c)?;
    if echoed(c, &cfg)? {
        return Ok(());
    }
    let probe = match &cfg.probe {
        ProbeConfig::ConstantOne => Probe::ConstantOne,
        ProbeConfig::Explicit { values } => {
            Probe::Explicit(TruncatedSequence::new(values.clone())?)
        }
    };
    let pairings = weak_star_diagnostic(&cfg.operator, cfg.count, &probe)?;
    write(
        &c.out,
        "weakstar.csv",
        &table(&["k", "pairing"], indexed(&pairings)),
    )?;
    Ok(())
}

fn analyze_vsc(c: &Common) -> Result<(), CliError> {
    let mut cfg: VscConfig = read_config(c)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if echoed(c, &cfg)? {
        return Ok(());
    }
    cfg.operator.kind.validate(cfg.n)?;
    cfg.model.validate()?;
    let op = assemble(
        &cfg.operator,
        cfg.n,
        cfg.image_norm.unwrap_or(l1tik::NormKind::L2),
    )?;
    let truth = cfg.model.materialize(cfg.n)?;
    let profile = SmoothnessProfile::from_sequence(&truth, &cfg.gamma, cfg.n)?;
    let beta = beta_from_mu(cfg.mu)?;
    let report = vsc_check(&op, &truth, &profile, beta, cfg.samples, cfg.seed)?;
    let summary = table(
        &["beta", "samples", "violations", "worst_margin"],
        [vec![
            fmt_f64(beta),
            report.samples.to_string(),
            report.violations.to_string(),
            fmt_f64(report.worst_margin),
        ]],
    );
    write(&c.out, "vsc.csv", &summary)?;
    print!("{summary}");
    Ok(())
}

fn analyze_gamma(c: &Common) -> Result<(), CliError> {
    let cfg: GammaConfig = read_config(c)?;
    if echoed(c, &cfg)? {
        return Ok(());
    }
    cfg.operator.kind.validate(cfg.n)?;
    let op = assemble(&cfg.operator, cfg.n, l1tik::NormKind::L2)?;
    let sources = canonical_sources(&op, cfg.n_max.min(cfg.n))?;
    let mut rows = Vec::new();
    for m in 1..=sources.len() {
        let sum = gamma_from_sources(&sources, m, GammaMode::Sum, cfg.dual_norm)?;
        let signed = if m <= MAX_SIGNED_SUP_N {
            fmt_f64(gamma_from_sources(
                &sources,
                m,
                GammaMode::SignedSup,
                cfg.dual_norm,
            )?)
        } else {
            String::new()
        };
        rows.push(vec![m.to_string(), fmt_f64(sum), signed]);
    }
    write(
        &c.out,
        "gamma.csv",
        &table(&["n", "gamma_sum", "gamma_signed_sup"], rows),
    )?;
    Ok(())
}
