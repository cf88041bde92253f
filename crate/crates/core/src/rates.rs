//! Convergence-rate studies: exact-level noise synthesis, δ-sweeps under a
//! parameter rule, and log-log slope fits against the predicted φ.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operators::{assemble, OperatorSpec, OperatorTruncation};
use crate::parameter_choice::{
    alpha_a_priori, alpha_sdp, APrioriRule, IndexFunction, SdpFlag, SdpRule, TOL_CERT,
};
use crate::sequences::{norm, NormKind, SequenceModel, TruncatedSequence};
use crate::solver::{
    discrepancy, optimality_certificate, solve_tikhonov, SolveOptions, TikhonovProblem,
};
use crate::source_conditions::{phi_eval, GammaRule, SmoothnessProfile};

/// Share of failed records above which a study is marked invalid.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
/// Required ratio `tail_sum(N)/min δ` under [`TruncationPolicy::Enforce`].
pub const TRUNCATION_RATIO: f64 = 0.01;

/// `y + δ·e/‖e‖` with `e` standard normal from a ChaCha8 stream seeded by
/// `seed`, so that `‖y^δ − y‖ = δ` in `image_norm` up to rounding.
pub fn generate_noisy_data(
    y: &TruncatedSequence,
    delta: f64,
    image_norm: NormKind,
    seed: u64,
) -> Result<TruncatedSequence> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid(
            "delta",
            format!("must be finite and > 0, got {delta}"),
        ));
    }
    let mut seed = seed;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e: Vec<f64> = (0..y.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let size = norm(&e, image_norm);
        if size > 0.0 {
            let scale = delta / size;
            return TruncatedSequence::new(
                y.as_slice()
                    .iter()
                    .zip(&e)
                    .map(|(v, ei)| v + scale * ei)
                    .collect(),
            );
        }
        seed = seed.wrapping_add(1);
    }
}

/// Seed of record `(delta_index, rep)` derived from the study's master seed.
pub fn record_seed(master: u64, delta_index: usize, rep: usize) -> u64 {
    let mut z = master
        ^ (delta_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (rep as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Closed-form or profile-based index function for the a priori rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiSpec {
    Linear {
        slope: f64,
    },
    Power {
        scale: f64,
        exponent: f64,
    },
    /// φ of the truncated `x†` with the given γ_n.
    Profile {
        gamma: GammaRule,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ParameterRule {
    Sdp(SdpRule),
    APriori { phi: PhiSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationPolicy {
    /// Reject the study when `tail_sum(N) > 0.01·min δ`.
    #[default]
    Enforce,
    /// Run anyway and report the ratio.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    SolveOptions::default().tol
}
fn default_max_iter() -> usize {
    SolveOptions::default().max_iter
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl SolverSettings {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            lipschitz: None,
        }
    }
}

fn default_p() -> f64 {
    2.0
}
fn default_reps() -> usize {
    5
}

/// Default δ grid `10^(−1), 10^(−1.5), …, 10^(−4)`.
pub fn default_deltas() -> Vec<f64> {
    (2..=8).map(|i| 10f64.powf(-(i as f64) / 2.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudyConfig {
    pub operator: OperatorSpec,
    pub n: usize,
    /// ℓ¹ for `p = 1`, ℓ² otherwise, when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_norm: Option<NormKind>,
    pub model: SequenceModel,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub elastic_eta: f64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    pub rule: ParameterRule,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    /// γ_n used for the predicted exponent of `φ` on the δ grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<GammaRule>,
}

impl RateStudyConfig {
    pub fn image_norm(&self) -> NormKind {
        self.image_norm.unwrap_or(if self.p == 1.0 {
            NormKind::L1
        } else {
            NormKind::L2
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.operator.kind.validate(self.n)?;
        self.model.validate()?;
        if self.deltas.is_empty() {
            return Err(invalid("deltas", "delta grid is empty"));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(invalid("deltas", "all deltas must be finite and > 0"));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("deltas", "delta grid must be strictly decreasing"));
        }
        if self.repetitions < 1 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        if let ParameterRule::Sdp(rule) = &self.rule {
            rule.validate()?;
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter < 1 {
            return Err(invalid("solver", "tol must be > 0 and max_iter >= 1"));
        }
        Ok(())
    }
}

/// How a record ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    /// SDP returned `α₁` without a left bracket; excluded from the fit.
    LeftBracketMissing,
    NotConverged,
    DiscrepancyUnreachable,
}

impl RecordStatus {
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            RecordStatus::NotConverged | RecordStatus::DiscrepancyUnreachable
        )
    }

    /// Value of the `sdp_flag` column.
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordStatus::Ok => "none",
            RecordStatus::LeftBracketMissing => SdpFlag::LeftBracketMissing.as_str(),
            RecordStatus::NotConverged => "not-converged",
            RecordStatus::DiscrepancyUnreachable => "discrepancy-unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRecord {
    pub delta_index: usize,
    pub delta: f64,
    pub rep: usize,
    pub seed: u64,
    /// NaN when no `α` was selected.
    pub alpha: f64,
    pub discrepancy: f64,
    pub error_l1: f64,
    pub converged: bool,
    pub certified: bool,
    pub status: RecordStatus,
}

impl RateRecord {
    pub fn usable(&self) -> bool {
        self.status == RecordStatus::Ok && self.error_l1 > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub records: Vec<RateRecord>,
    pub fit: Option<SlopeFit>,
    pub predicted_exponent: Option<f64>,
    pub n_failed: usize,
    pub n_flagged: usize,
    /// At most [`MAX_FAILURE_FRACTION`] of the records failed and a slope
    /// could be fitted.
    pub valid: bool,
    pub truncation_tail: f64,
    pub truncation_limit: f64,
    /// `(δ, median error)` over usable records, in grid order.
    pub medians: Vec<(f64, f64)>,
    /// Grid steps where the median error grows as δ shrinks.
    pub median_increases: usize,
}

impl RateStudy {
    pub fn truncation_ok(&self) -> bool {
        self.truncation_tail <= self.truncation_limit
    }

    pub fn all_certified(&self) -> bool {
        self.records
            .iter()
            .filter(|r| !r.status.is_failure())
            .all(|r| r.certified)
    }
}

/// Runs every `(δ, rep)` record on a pool of `jobs` workers. Records are
/// independent and returned in grid order, so output does not depend on
/// `jobs`.
pub fn run_rate_study(config: &RateStudyConfig, jobs: usize) -> Result<RateStudy> {
    config.validate()?;
    let n = config.n;
    let truncation_tail = config.model.tail_sum(n)?;
    let delta_min = *config.deltas.last().expect("validated nonempty");
    let truncation_limit = TRUNCATION_RATIO * delta_min;
    if config.truncation == TruncationPolicy::Enforce && truncation_tail > truncation_limit {
        return Err(Error::TruncationTooCoarse {
            tail: truncation_tail,
            limit: truncation_limit,
        });
    }

    let op = assemble(&config.operator, n, config.image_norm())?;
    let truth = config.model.materialize(n)?;
    let y = op.apply(&truth)?;
    // probe the problem once so invalid (p, operator) pairs fail before the sweep
    TikhonovProblem::elastic(&op, &y, config.p, 1.0, config.elastic_eta)?;
    let a_priori = match &config.rule {
        ParameterRule::APriori { phi } => {
            Some(APrioriRule::new(config.p, index_function(phi, &truth)?)?)
        }
        ParameterRule::Sdp(_) => None,
    };

    let tasks: Vec<(usize, usize)> = (0..config.deltas.len())
        .flat_map(|i| (0..config.repetitions).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid("jobs", e.to_string()))?;
    let records: Vec<RateRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, rep)| run_record(config, &op, &truth, &y, a_priori.as_ref(), i, rep))
            .collect::<Result<_>>()
    })?;

    let n_failed = records.iter().filter(|r| r.status.is_failure()).count();
    let n_flagged = records
        .iter()
        .filter(|r| r.status == RecordStatus::LeftBracketMissing)
        .count();
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.usable())
        .map(|r| (r.delta, r.error_l1))
        .collect();
    let fit = fit_loglog_slope(&pairs).ok();
    let predicted_exponent = match &config.prediction {
        Some(gamma) => {
            let profile = SmoothnessProfile::from_model(&config.model, gamma, n)?;
            Some(predicted_exponent(&profile, &config.deltas)?)
        }
        None => None,
    };
    let medians = median_errors(&records, &config.deltas);
    let median_increases = medians.windows(2).filter(|w| w[1].1 > w[0].1).count();
    let valid = fit.is_some() && (n_failed as f64) <= MAX_FAILURE_FRACTION * records.len() as f64;
    Ok(RateStudy {
        records,
        fit,
        predicted_exponent,
        n_failed,
        n_flagged,
        valid,
        truncation_tail,
        truncation_limit,
        medians,
        median_increases,
    })
}

fn index_function(phi: &PhiSpec, truth: &TruncatedSequence) -> Result<IndexFunction> {
    Ok(match phi {
        PhiSpec::Linear { slope } => IndexFunction::Linear { slope: *slope },
        PhiSpec::Power { scale, exponent } => IndexFunction::Power {
            scale: *scale,
            exponent: *exponent,
        },
        PhiSpec::Profile { gamma } => {
            IndexFunction::Profile(SmoothnessProfile::from_sequence(truth, gamma, truth.len())?)
        }
    })
}

fn run_record(
    config: &RateStudyConfig,
    op: &OperatorTruncation,
    truth: &TruncatedSequence,
    y: &TruncatedSequence,
    a_priori: Option<&APrioriRule>,
    delta_index: usize,
    rep: usize,
) -> Result<RateRecord> {
    let delta = config.deltas[delta_index];
    let seed = record_seed(config.seed, delta_index, rep);
    let ydelta = generate_noisy_data(y, delta, op.image_norm(), seed)?;
    let opts = config.solver.options();
    let mut record = RateRecord {
        delta_index,
        delta,
        rep,
        seed,
        alpha: f64::NAN,
        discrepancy: f64::NAN,
        error_l1: f64::NAN,
        converged: false,
        certified: false,
        status: RecordStatus::Ok,
    };
    let error_of = |x: &TruncatedSequence| -> f64 {
        x.as_slice()
            .iter()
            .zip(truth.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum()
    };
    match (&config.rule, a_priori) {
        (ParameterRule::Sdp(rule), _) => {
            let problem = TikhonovProblem::elastic(op, &ydelta, config.p, 1.0, config.elastic_eta)?;
            match alpha_sdp(rule, &problem, delta, &opts) {
                Ok(out) => {
                    record.alpha = out.alpha;
                    record.discrepancy = out.discrepancy;
                    record.error_l1 = error_of(&out.x);
                    record.converged = true;
                    record.certified = out.all_certified;
                    if out.flag == SdpFlag::LeftBracketMissing {
                        record.status = RecordStatus::LeftBracketMissing;
                    }
                }
                Err(Error::NotConverged { alpha, .. }) => {
                    record.alpha = alpha;
                    record.status = RecordStatus::NotConverged;
                }
                Err(Error::DiscrepancyUnreachable { last, .. }) => {
                    record.discrepancy = last;
                    record.converged = true;
                    record.status = RecordStatus::DiscrepancyUnreachable;
                }
                Err(e) => return Err(e),
            }
        }
        (ParameterRule::APriori { .. }, Some(rule)) => {
            let alpha = alpha_a_priori(rule, delta)?;
            let problem =
                TikhonovProblem::elastic(op, &ydelta, config.p, alpha, config.elastic_eta)?;
            let (x, diag) = solve_tikhonov(&problem, &opts)?;
            record.alpha = alpha;
            record.discrepancy = discrepancy(&problem, &x)?;
            record.error_l1 = error_of(&x);
            record.converged = diag.converged;
            record.certified = optimality_certificate(&problem, &x, TOL_CERT)?.passed;
            if !diag.converged {
                record.status = RecordStatus::NotConverged;
            }
        }
        (ParameterRule::APriori { .. }, None) => {
            unreachable!("a priori rule built before the sweep")
        }
    }
    Ok(record)
}

fn median_errors(records: &[RateRecord], deltas: &[f64]) -> Vec<(f64, f64)> {
    deltas
        .iter()
        .enumerate()
        .filter_map(|(i, &delta)| {
            let mut errs: Vec<f64> = records
                .iter()
                .filter(|r| r.delta_index == i && r.usable())
                .map(|r| r.error_l1)
                .collect();
            if errs.is_empty() {
                return None;
            }
            errs.sort_by(f64::total_cmp);
            let m = errs.len();
            let median = if m % 2 == 1 {
                errs[m / 2]
            } else {
                0.5 * (errs[m / 2 - 1] + errs[m / 2])
            };
            Some((delta, median))
        })
        .collect()
}

/// Ordinary least squares of `log error` on `log δ`. The standard error is
/// `sqrt(SSR/(m−2)/Sxx)`.
pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: pairs.len(),
        });
    }
    if let Some(bad) = pairs
        .iter()
        .find(|(d, e)| !(*d > 0.0 && *e > 0.0) || !d.is_finite() || !e.is_finite())
    {
        return Err(invalid(
            "pairs",
            format!("entries must be finite and > 0, got {bad:?}"),
        ));
    }
    let m = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("pairs", "all deltas coincide"));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        stderr: (ssr / (m - 2.0) / sxx).sqrt(),
        points: pairs.len(),
    })
}

/// Numerical Hölder exponent of `φ` near 0: the log-log slope of
/// `phi_eval` over a decreasing grid in `(0, 1)` of at least 4 points.
pub fn predicted_exponent(profile: &SmoothnessProfile, t_grid: &[f64]) -> Result<f64> {
    if t_grid.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: t_grid.len(),
        });
    }
    if t_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) || t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(
            "t_grid",
            "must be strictly decreasing inside (0, 1)",
        ));
    }
    let pairs: Vec<(f64, f64)> = t_grid
        .iter()
        .map(|&t| {
            let v = phi_eval(profile, t)?.value;
            if v <= 0.0 {
                return Err(invalid(
                    "profile",
                    format!("phi({t}) = 0 (degenerate profile)"),
                ));
            }
            Ok((t, v))
        })
        .collect::<Result<_>>()?;
    Ok(fit_loglog_slope(&pairs)?.slope)
}
