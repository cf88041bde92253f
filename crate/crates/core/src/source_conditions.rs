//! Smoothness machinery: γ_n sequences, the index function
//! `φ(t) = 2 inf_n (Σ_{k>n}|x†_k| + γ_n t)`, dual witnesses for the
//! bidiagonal operator and sampling checks of the variational inequalities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::operators::{OperatorKind, OperatorTruncation};
use crate::sequences::{norm, NormKind, SequenceModel, TruncatedSequence};

/// Largest `n` for exhaustive enumeration in [`GammaMode::SignedSup`].
pub const MAX_SIGNED_SUP_N: usize = 12;
/// Tolerance for certifying item (a) of a witness.
pub const HEAD_EXACT_TOL: f64 = 1e-14;

/// Rule for the nondecreasing sequence `γ_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum GammaRule {
    /// `γ_n = scale·n`.
    Linear { scale: f64 },
    /// `γ_n = value` for all `n`.
    Constant { value: f64 },
    /// Explicit `γ_1, γ_2, …`.
    Table { values: Vec<f64> },
}

impl GammaRule {
    fn gamma(&self, n: usize) -> Option<f64> {
        match self {
            GammaRule::Linear { scale } => Some(scale * n as f64),
            GammaRule::Constant { value } => Some(*value),
            GammaRule::Table { values } => values.get(n - 1).copied(),
        }
    }
}

/// Tabulated tail sums and γ_n on `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessProfile {
    /// `tails[n] = Σ_{k>n} |x†_k|`.
    tails: Vec<f64>,
    /// `gammas[n-1] = γ_n`.
    gammas: Vec<f64>,
}

impl SmoothnessProfile {
    /// Validates and wraps tables; `tails` has length `n_max + 1`, `gammas`
    /// length `n_max`.
    pub fn new(tails: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || tails.len() != gammas.len() + 1 {
            return Err(invalid(
                "profile",
                format!(
                    "need n_max >= 1 with {} tails for {} gammas",
                    gammas.len() + 1,
                    gammas.len()
                ),
            ));
        }
        if tails.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(invalid("profile.tail", "tail sums must be finite and >= 0"));
        }
        if tails.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("profile.tail", "tail sums must be nonincreasing"));
        }
        if gammas.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(invalid("profile.gamma", "gamma_n must be finite and > 0"));
        }
        if gammas.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("profile.gamma", "gamma_n must be nondecreasing"));
        }
        Ok(Self { tails, gammas })
    }

    /// Profile of an analytic model. Tails are filled backwards from the
    /// analytic `tail(n_max)` so the table is exactly nonincreasing.
    pub fn from_model(model: &SequenceModel, gamma: &GammaRule, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(invalid("n_max", "must be at least 1"));
        }
        let mut tails = vec![0.0; n_max + 1];
        tails[n_max] = model.tail_sum(n_max)?;
        for n in (0..n_max).rev() {
            tails[n] = tails[n + 1] + model.coordinate(n + 1).abs();
        }
        Self::new(tails, gamma_table(gamma, n_max)?)
    }

    /// Profile of a finite vector: the tail beyond its length is zero.
    pub fn from_sequence(x: &TruncatedSequence, gamma: &GammaRule, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(invalid("n_max", "must be at least 1"));
        }
        let mut tails = vec![0.0; n_max + 1];
        for n in (0..n_max).rev() {
            tails[n] = tails[n + 1] + x.get(n + 1).unwrap_or(0.0).abs();
        }
        let beyond: f64 = x.as_slice().iter().skip(n_max).map(|v| v.abs()).sum();
        tails.iter_mut().for_each(|t| *t += beyond);
        Self::new(tails, gamma_table(gamma, n_max)?)
    }

    pub fn n_max(&self) -> usize {
        self.gammas.len()
    }

    pub fn tail(&self, n: usize) -> f64 {
        self.tails[n.min(self.n_max())]
    }

    /// `γ_n` for `1 ≤ n ≤ n_max`.
    pub fn gamma(&self, n: usize) -> f64 {
        self.gammas[n - 1]
    }
}

fn gamma_table(rule: &GammaRule, n_max: usize) -> Result<Vec<f64>> {
    (1..=n_max)
        .map(|n| {
            rule.gamma(n)
                .ok_or_else(|| invalid("gamma", format!("table does not cover n_max = {n_max}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub value: f64,
    /// Minimizing `n`; the smallest one on ties.
    pub argmin_n: usize,
}

/// `φ(t) = 2·min_{1≤n≤n_max} (tail(n) + γ_n t)`.
pub fn phi_eval(profile: &SmoothnessProfile, t: f64) -> Result<PhiValue> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    let (mut best, mut argmin_n) = (f64::INFINITY, 1);
    for n in 1..=profile.n_max() {
        let v = profile.tail(n) + profile.gamma(n) * t;
        if v < best {
            best = v;
            argmin_n = n;
        }
    }
    Ok(PhiValue {
        value: 2.0 * best,
        argmin_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    /// `γ_n = Σ_{k≤n} ‖f^(k)‖`.
    Sum,
    /// `γ_n = max_{a ∈ {−1,0,1}^n} ‖Σ a_k f^(k)‖`.
    SignedSup,
}

/// γ_n from source elements `f^(k)` with `A*f^(k) = e^(k)`.
pub fn gamma_from_sources(
    sources: &[TruncatedSequence],
    n: usize,
    mode: GammaMode,
    dual_norm: NormKind,
) -> Result<f64> {
    if n < 1 || n > sources.len() {
        return Err(invalid(
            "n",
            format!("need 1 <= n <= {} sources, got {n}", sources.len()),
        ));
    }
    let dim = sources[0].len();
    for s in &sources[..n] {
        check_dim(dim, s.len())?;
    }
    match mode {
        GammaMode::Sum => Ok(sources[..n].iter().map(|f| f.norm(dual_norm)).sum()),
        GammaMode::SignedSup => {
            if n > MAX_SIGNED_SUP_N {
                return Err(invalid(
                    "n",
                    format!("signed-sup enumeration limited to n <= {MAX_SIGNED_SUP_N}, got {n}"),
                ));
            }
            let mut best = 0.0_f64;
            let mut combo = vec![0.0; dim];
            for code in 0..3usize.pow(n as u32) {
                combo.iter_mut().for_each(|c| *c = 0.0);
                let mut rem = code;
                for f in &sources[..n] {
                    let a = (rem % 3) as f64 - 1.0;
                    rem /= 3;
                    if a != 0.0 {
                        combo
                            .iter_mut()
                            .zip(f.as_slice())
                            .for_each(|(c, v)| *c += a * v);
                    }
                }
                best = best.max(norm(&combo, dual_norm));
            }
            Ok(best)
        }
    }
}

/// Explicit source elements `f^(1..=n)` solving `A*f^(k) = e^(k)`.
///
/// Identity and embeddings: `e^(k)`. Diagonal: `e^(k)/σ_k`. Bidiagonal sum:
/// the alternating witness `(0,…,0, 1, −1, 1, …)` starting at `k`.
pub fn canonical_sources(op: &OperatorTruncation, n: usize) -> Result<Vec<TruncatedSequence>> {
    let dim = op.n();
    if n < 1 || n > dim {
        return Err(invalid("n", format!("need 1 <= n <= {dim}, got {n}")));
    }
    (1..=n)
        .map(|k| {
            let mut f = vec![0.0; dim];
            match &op.spec().kind {
                OperatorKind::Identity | OperatorKind::Embedding { .. } => f[k - 1] = 1.0,
                OperatorKind::Diagonal { .. } => f[k - 1] = 1.0 / op.entry(k, k),
                OperatorKind::BidiagonalSum => {
                    for (i, v) in f.iter_mut().enumerate().skip(k - 1) {
                        *v = if (i + 1 - k) % 2 == 0 { 1.0 } else { -1.0 };
                    }
                }
                OperatorKind::FirstRowSummation => {
                    return Err(Error::Unsupported(
                        "no explicit source elements for the first-row summation operator".into(),
                    ))
                }
            }
            TruncatedSequence::new(f)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    /// `η_{n+i} = (−1)^i η_n`; the adjoint tail vanishes.
    Alternating,
    /// Smallest-magnitude value in the band `(−1)^i η_n ± iμ`; reaches zero.
    Decaying,
}

/// Dual element `η` for the bidiagonal operator with
/// `P_n A*η = ξ`, `|[A*η]_k| ≤ μ` for `k > n` and `‖η‖_∞ ≤ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Property1Witness {
    pub eta: TruncatedSequence,
    pub n: usize,
    pub mu: f64,
    pub xi: Vec<f64>,
    pub gamma_bound: f64,
}

/// Outcome of checking a witness against the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessCertificate {
    /// `max_{k≤n} |[A*η]_k − ξ_k|`.
    pub head_error: f64,
    /// `max_{n<k≤N} |[A*η]_k|`.
    pub tail_max: f64,
    pub eta_sup: f64,
    pub head_exact: bool,
    pub tail_bounded: bool,
    pub norm_bounded: bool,
}

impl WitnessCertificate {
    pub fn all_hold(&self) -> bool {
        self.head_exact && self.tail_bounded && self.norm_bounded
    }
}

/// Builds the witness for head pattern `ξ` by the recursion
/// `η_1 = ξ_1`, `η_k = ξ_k − η_{k−1}`, followed by the chosen tail.
pub fn property1_witness_bidiagonal(
    xi_head: &[f64],
    mu: f64,
    tail_mode: TailMode,
    truncation: usize,
) -> Result<Property1Witness> {
    let n = xi_head.len();
    if n < 1 {
        return Err(invalid("xi", "head must have at least one entry"));
    }
    if let Some(v) = xi_head.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(invalid(
            "xi",
            format!("entries must lie in [-1, 1], got {v}"),
        ));
    }
    if !(0.0..1.0).contains(&mu) {
        return Err(invalid("mu", format!("must lie in [0, 1), got {mu}")));
    }
    if tail_mode == TailMode::Decaying && mu == 0.0 {
        return Err(invalid("mu", "decaying tail needs mu > 0"));
    }
    if truncation < n {
        return Err(invalid(
            "truncation",
            format!("must be >= n = {n}, got {truncation}"),
        ));
    }
    let mut eta = vec![0.0; truncation];
    eta[0] = xi_head[0];
    for k in 1..n {
        eta[k] = xi_head[k] - eta[k - 1];
    }
    let last = eta[n - 1];
    let magnitude = last.abs();
    for i in 1..=truncation - n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        eta[n - 1 + i] = match tail_mode {
            TailMode::Alternating => sign * last,
            TailMode::Decaying => {
                let shrunk = magnitude - i as f64 * mu;
                if shrunk > 0.0 {
                    sign * last.signum() * shrunk
                } else {
                    0.0
                }
            }
        };
    }
    Ok(Property1Witness {
        eta: TruncatedSequence::new(eta)?,
        n,
        mu,
        xi: xi_head.to_vec(),
        gamma_bound: n as f64,
    })
}

impl Property1Witness {
    /// Verifies items (a)–(c) by applying the adjoint of `op`.
    pub fn certify(&self, op: &OperatorTruncation) -> Result<WitnessCertificate> {
        let ast = op.apply_adjoint(&self.eta)?;
        let ast = ast.as_slice();
        let head_error = ast[..self.n]
            .iter()
            .zip(&self.xi)
            .map(|(a, x)| (a - x).abs())
            .fold(0.0, f64::max);
        let tail_max = ast[self.n..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        let eta_sup = self.eta.norm(NormKind::Sup);
        Ok(WitnessCertificate {
            head_error,
            tail_max,
            eta_sup,
            head_exact: head_error <= HEAD_EXACT_TOL,
            tail_bounded: tail_max <= self.mu + HEAD_EXACT_TOL,
            norm_bounded: eta_sup <= self.gamma_bound,
        })
    }
}

/// `β = (1 − μ)/(1 + μ)` for `μ ∈ [0, 1)`.
pub fn beta_from_mu(mu: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&mu) {
        return Err(invalid("mu", format!("must lie in [0, 1), got {mu}")));
    }
    Ok((1.0 - mu) / (1.0 + mu))
}

/// Sample families drawn by [`vsc_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    SmallPerturbation,
    LargePerturbation,
    Sparse,
    DenseGaussian,
    HeadPerturbation,
    AlternatingPerturbation,
    Rescaled,
}

const SAMPLE_KINDS: [SampleKind; 7] = [
    SampleKind::SmallPerturbation,
    SampleKind::LargePerturbation,
    SampleKind::Sparse,
    SampleKind::DenseGaussian,
    SampleKind::HeadPerturbation,
    SampleKind::AlternatingPerturbation,
    SampleKind::Rescaled,
];

#[derive(Debug, Clone, PartialEq)]
pub struct VscReport {
    pub samples: usize,
    pub violations: usize,
    /// Smallest `rhs − lhs` observed (negative means violated).
    pub worst_margin: f64,
    pub worst_kind: SampleKind,
}

/// Samples `x` and checks
/// `β‖x − x†‖₁ ≤ ‖x‖₁ − ‖x†‖₁ + φ(‖Ax − Ax†‖)` with the operator's image
/// norm. A sample counts as a violation when the margin is below
/// `−1e−12·(1 + ‖x‖₁ + ‖x†‖₁)`.
pub fn vsc_check(
    op: &OperatorTruncation,
    x_true: &TruncatedSequence,
    profile: &SmoothnessProfile,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<VscReport> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    let n = op.n();
    check_dim(n, x_true.len())?;
    let truth = x_true.as_slice();
    let truth_l1 = norm(truth, NormKind::L1);
    let mut ax_true = vec![0.0; n];
    op.apply_into(truth, &mut ax_true);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut report = VscReport {
        samples,
        violations: 0,
        worst_margin: f64::INFINITY,
        worst_kind: SampleKind::SmallPerturbation,
    };
    for i in 0..samples {
        let kind = SAMPLE_KINDS[i % SAMPLE_KINDS.len()];
        draw_sample(kind, truth, &mut rng, &mut x);
        op.apply_into(&x, &mut ax);
        ax.iter_mut().zip(&ax_true).for_each(|(a, b)| *a -= b);
        let misfit = norm(&ax, op.image_norm());
        let x_l1 = norm(&x, NormKind::L1);
        let dist: f64 = x.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum();
        let lhs = beta * dist;
        let rhs = x_l1 - truth_l1 + phi_eval(profile, misfit)?.value;
        let margin = rhs - lhs;
        if margin < -1e-12 * (1.0 + x_l1 + truth_l1) {
            report.violations += 1;
        }
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_kind = kind;
        }
    }
    Ok(report)
}

fn draw_sample(kind: SampleKind, truth: &[f64], rng: &mut ChaCha8Rng, x: &mut [f64]) {
    let n = truth.len();
    match kind {
        SampleKind::SmallPerturbation | SampleKind::LargePerturbation => {
            let exponent = if kind == SampleKind::SmallPerturbation {
                -8.0 + 8.0 * rng.random::<f64>()
            } else {
                2.0 * rng.random::<f64>()
            };
            let scale = 10f64.powf(exponent);
            for (xi, ti) in x.iter_mut().zip(truth) {
                *xi = ti + scale * gaussian(rng);
            }
        }
        SampleKind::Sparse => {
            x.iter_mut().for_each(|v| *v = 0.0);
            let scale = 10f64.powf(-3.0 + 4.0 * rng.random::<f64>());
            let count = rng.random_range(1..=5.min(n));
            for _ in 0..count {
                let k = rng.random_range(0..n);
                x[k] = scale * gaussian(rng);
            }
        }
        SampleKind::DenseGaussian => {
            for xi in x.iter_mut() {
                *xi = gaussian(rng);
            }
        }
        SampleKind::HeadPerturbation => {
            let m = rng.random_range(1..=n);
            let scale = 10f64.powf(-6.0 + 6.0 * rng.random::<f64>());
            x.copy_from_slice(truth);
            for xi in x.iter_mut().take(m) {
                *xi += scale * gaussian(rng);
            }
        }
        SampleKind::AlternatingPerturbation => {
            // near-null direction of the bidiagonal operator on a window
            let a = rng.random_range(0..n);
            let b = rng.random_range(a..n);
            let scale = 10f64.powf(-4.0 + 4.0 * rng.random::<f64>())
                * if rng.random::<bool>() { 1.0 } else { -1.0 };
            x.copy_from_slice(truth);
            for (j, xi) in x.iter_mut().enumerate().take(b + 1).skip(a) {
                *xi += if (j - a) % 2 == 0 { scale } else { -scale };
            }
        }
        SampleKind::Rescaled => {
            let c = -1.0 + 4.0 * rng.random::<f64>();
            for (xi, ti) in x.iter_mut().zip(truth) {
                *xi = c * ti;
            }
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstLemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Both sides of
/// `‖x − x†‖₁ ≤ ‖x‖₁ − ‖x†‖₁ + 2(Σ_{k>n}|x†_k| + Σ_{k≤n}|x_k − x†_k|)`
/// at truncation. `holds` allows `1e−12·max(1, ‖x‖₁ + ‖x†‖₁)` of rounding.
pub fn firstlemma_check(
    x: &TruncatedSequence,
    x_true: &TruncatedSequence,
    n: usize,
) -> Result<FirstLemmaCheck> {
    check_dim(x.len(), x_true.len())?;
    if n < 1 || n > x.len() {
        return Err(invalid("n", format!("need 1 <= n <= {}, got {n}", x.len())));
    }
    let (xs, ts) = (x.as_slice(), x_true.as_slice());
    let lhs: f64 = xs.iter().zip(ts).map(|(a, b)| (a - b).abs()).sum();
    let x_l1 = norm(xs, NormKind::L1);
    let t_l1 = norm(ts, NormKind::L1);
    let tail: f64 = ts[n..].iter().map(|v| v.abs()).sum();
    let head: f64 = xs[..n]
        .iter()
        .zip(&ts[..n])
        .map(|(a, b)| (a - b).abs())
        .sum();
    let rhs = x_l1 - t_l1 + 2.0 * (tail + head);
    Ok(FirstLemmaCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (x_l1 + t_l1).max(1.0),
    })
}
