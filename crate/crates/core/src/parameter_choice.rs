//! Regularization parameter rules: the a priori choice `α = δ^p/φ(δ)` and
//! the sequential discrepancy principle on the geometric grid
//! `α_j = q^j α₀`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sequences::{norm, NormKind, TruncatedSequence};
use crate::solver::{
    discrepancy, optimality_certificate, solve_tikhonov_from, SolveOptions, TikhonovProblem,
};
use crate::source_conditions::{phi_eval, SmoothnessProfile};

/// Tolerance for the per-solve subgradient certificate.
pub const TOL_CERT: f64 = 1e-7;

/// A concave index function `φ` with `φ(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexFunction {
    /// `φ(t) = slope·t`.
    Linear { slope: f64 },
    /// `φ(t) = scale·t^exponent`, `0 < exponent ≤ 1`.
    Power { scale: f64, exponent: f64 },
    /// `φ` from a tabulated smoothness profile.
    Profile(SmoothnessProfile),
}

impl IndexFunction {
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        Ok(match self {
            IndexFunction::Linear { slope } => slope * t,
            IndexFunction::Power { scale, exponent } => scale * t.powf(*exponent),
            IndexFunction::Profile(p) => phi_eval(p, t)?.value,
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            IndexFunction::Linear { slope } if !(*slope > 0.0) || !slope.is_finite() => {
                return Err(invalid(
                    "phi.slope",
                    format!("must be finite and > 0, got {slope}"),
                ))
            }
            IndexFunction::Power { scale, exponent } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(invalid(
                        "phi.scale",
                        format!("must be finite and > 0, got {scale}"),
                    ));
                }
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(invalid(
                        "phi.exponent",
                        format!("must lie in (0, 1], got {exponent}"),
                    ));
                }
            }
            _ => {}
        }
        if self.eval(0.0)? != 0.0 {
            return Err(invalid("phi", "phi(0) must be 0"));
        }
        let grid = log_grid(1e-8, 1.0, 64);
        let values: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect::<Result<_>>()?;
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("phi", "not strictly increasing on the sample grid"));
        }
        for w in grid.windows(2) {
            let mid = self.eval(0.5 * (w[0] + w[1]))?;
            let chord = 0.5 * (self.eval(w[0])? + self.eval(w[1])?);
            if mid < chord * (1.0 - 1e-12) {
                return Err(invalid("phi", "fails the midpoint concavity test"));
            }
        }
        Ok(())
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive, increasing.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// `α(δ) = δ^p/φ(δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct APrioriRule {
    p: f64,
    phi: IndexFunction,
}

impl APrioriRule {
    /// Checks `p ≥ 1` and that `φ` vanishes at 0, increases strictly and is
    /// midpoint-concave on a sample grid over `[1e−8, 1]`.
    pub fn new(p: f64, phi: IndexFunction) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(invalid("p", format!("must be >= 1, got {p}")));
        }
        phi.validate()?;
        Ok(Self { p, phi })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn phi(&self) -> &IndexFunction {
        &self.phi
    }
}

pub fn alpha_a_priori(rule: &APrioriRule, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid(
            "delta",
            format!("must be finite and > 0, got {delta}"),
        ));
    }
    let phi = rule.phi.eval(delta)?;
    if phi <= 0.0 {
        return Err(invalid(
            "phi",
            format!("phi(delta) = {phi} at delta = {delta}"),
        ));
    }
    Ok(delta.powf(rule.p) / phi)
}

/// Parameters of the sequential discrepancy principle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdpRule {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Start of the grid; [`default_alpha0`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
}

fn default_tau() -> f64 {
    1.5
}
fn default_q() -> f64 {
    0.5
}
fn default_j_max() -> usize {
    60
}

impl Default for SdpRule {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            q: default_q(),
            alpha0: None,
            j_max: default_j_max(),
        }
    }
}

impl SdpRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return Err(invalid(
                "sdp.tau",
                format!("must be finite and > 1, got {}", self.tau),
            ));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(invalid(
                "sdp.q",
                format!("must lie in (0, 1), got {}", self.q),
            ));
        }
        if let Some(a) = self.alpha0 {
            if !(a > 0.0) || !a.is_finite() {
                return Err(invalid(
                    "sdp.alpha0",
                    format!("must be finite and > 0, got {a}"),
                ));
            }
        }
        if self.j_max < 1 {
            return Err(invalid("sdp.j_max", "must be at least 1"));
        }
        Ok(())
    }

    /// `α_j = q^j α₀`.
    pub fn alpha_j(&self, alpha0: f64, j: usize) -> f64 {
        alpha0 * self.q.powi(j as i32)
    }
}

/// A grid start at which the minimizer is `x = 0`, doubled for margin.
///
/// For `p ≥ 2` the zero vector is optimal once the ℓ¹ weight reaches
/// `‖y‖^{p−2}‖Aᵀy‖_∞`. For the identity with `p = 1` it is optimal for
/// `α > 1`; the start 2.5 keeps every grid point `2.5·qʲ` away from `α = 1`
/// for `q = 1/2`.
pub fn default_alpha0(problem: &TikhonovProblem<'_>) -> f64 {
    if problem.p() == 1.0 {
        return 2.5;
    }
    let y = problem.data();
    let aty = problem
        .op()
        .apply_adjoint(y)
        .map(|v| v.norm(NormKind::Sup))
        .unwrap_or(0.0);
    let mut bound = aty * norm(y.as_slice(), NormKind::L2).powf(problem.p() - 2.0);
    if problem.elastic_eta() > 0.0 {
        bound /= problem.elastic_eta();
    }
    if bound > 0.0 && bound.is_finite() {
        2.0 * bound
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpFlag {
    None,
    /// Already `d₀ ≤ τδ` at the grid start; `α₁` returned without a
    /// left bracket.
    LeftBracketMissing,
}

impl SdpFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SdpFlag::None => "none",
            SdpFlag::LeftBracketMissing => "left-bracket-missing",
        }
    }
}

/// One grid point visited by the rule (`j = 0` is `α₀`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpStep {
    pub j: usize,
    pub alpha: f64,
    pub discrepancy: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpOutcome {
    pub alpha: f64,
    pub j: usize,
    pub x: TruncatedSequence,
    pub discrepancy: f64,
    pub flag: SdpFlag,
    pub trace: Vec<SdpStep>,
    /// Every solve along the trace passed the subgradient check at [`TOL_CERT`].
    pub all_certified: bool,
}

/// Walks `α_j = q^j α₀`, `j = 1, 2, …`, warm-starting each solve from the
/// previous minimizer, and returns the first `α_j` with `d_j ≤ τδ`.
///
/// The `α` stored in `problem` is ignored. Any solve that fails to converge
/// aborts the walk with [`Error::NotConverged`].
pub fn alpha_sdp(
    rule: &SdpRule,
    problem: &TikhonovProblem<'_>,
    delta: f64,
    opts: &SolveOptions,
) -> Result<SdpOutcome> {
    rule.validate()?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid(
            "delta",
            format!("must be finite and > 0, got {delta}"),
        ));
    }
    let alpha0 = rule.alpha0.unwrap_or_else(|| default_alpha0(problem));
    let target = rule.tau * delta;
    let mut trace = Vec::new();
    let mut all_certified = true;

    let mut solve =
        |j: usize, start: Option<&TruncatedSequence>| -> Result<(TruncatedSequence, f64)> {
            let alpha = rule.alpha_j(alpha0, j);
            let pb = problem.with_alpha(alpha)?;
            let (x, diag) = solve_tikhonov_from(&pb, opts, start)?;
            if !diag.converged {
                return Err(Error::NotConverged {
                    alpha,
                    iterations: diag.iterations,
                    residual: diag.residual,
                });
            }
            let d = discrepancy(&pb, &x)?;
            let certified = optimality_certificate(&pb, &x, TOL_CERT)?.passed;
            all_certified &= certified;
            trace.push(SdpStep {
                j,
                alpha,
                discrepancy: d,
                certified,
            });
            Ok((x, d))
        };

    let (mut x, d0) = solve(0, None)?;
    let mut last = d0;
    for j in 1..=rule.j_max {
        let (xj, dj) = solve(j, Some(&x))?;
        x = xj;
        last = dj;
        if dj <= target {
            let flag = if j == 1 && d0 <= target {
                SdpFlag::LeftBracketMissing
            } else {
                SdpFlag::None
            };
            return Ok(SdpOutcome {
                alpha: rule.alpha_j(alpha0, j),
                j,
                x,
                discrepancy: dj,
                flag,
                trace,
                all_certified,
            });
        }
    }
    Err(Error::DiscrepancyUnreachable {
        j_max: rule.j_max,
        target,
        last,
    })
}
