//! The example operator family as square truncations `A_N`.
//!
//! Coordinates beyond `N` are dropped on both the domain and the image side.
//! Every operator in the family is sparse, so truncations are stored in
//! compressed-row form; [`OperatorTruncation::dense`] gives the full matrix
//! for singular value computations.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::sequences::{norm, NormKind, TruncatedSequence};

const POWER_ITERATION_SEED: u64 = 42;
const POWER_ITERATION_MAX: usize = 10_000;
/// Largest truncation handled by the dense SVD in [`conditioning_scan`].
pub const MAX_DENSE_SVD: usize = 2000;

/// Rule producing the diagonal entries `σ_k` of a diagonal operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SingularValueRule {
    /// `σ_k = scale·k^(−exponent)`.
    Power { scale: f64, exponent: f64 },
    /// Explicit `σ_1, σ_2, …`; must cover the truncation level.
    Explicit { values: Vec<f64> },
}

impl SingularValueRule {
    pub fn sigma(&self, k: usize) -> Option<f64> {
        match self {
            SingularValueRule::Power { scale, exponent } => {
                Some(scale * (k as f64).powf(-exponent))
            }
            SingularValueRule::Explicit { values } => values.get(k - 1).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorKind {
    Identity,
    /// Embedding of ℓ¹ into ℓ^q; the matrix is the identity.
    Embedding {
        q: f64,
    },
    /// `[Ax]_k = x_k + x_{k+1}`.
    BidiagonalSum,
    /// `[Ax]_1 = Σ_l x_l`, `[Ax]_k = x_k` for `k ≥ 2`.
    FirstRowSummation,
    Diagonal {
        sigma: SingularValueRule,
    },
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Identity => "identity",
            OperatorKind::Embedding { .. } => "embedding",
            OperatorKind::BidiagonalSum => "bidiagonal-sum",
            OperatorKind::FirstRowSummation => "first-row-summation",
            OperatorKind::Diagonal { .. } => "diagonal",
        }
    }

    /// Checks parameters; `n` is needed for explicit diagonal rules.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            OperatorKind::Embedding { q } => {
                if !(*q >= 1.0) || !q.is_finite() {
                    return Err(invalid(
                        "operator.q",
                        format!("embedding needs 1 <= q < inf, got {q}"),
                    ));
                }
            }
            OperatorKind::Diagonal { sigma } => {
                if let SingularValueRule::Power { scale, exponent } = sigma {
                    if !(*scale > 0.0) || !scale.is_finite() || !exponent.is_finite() {
                        return Err(invalid(
                            "operator.sigma",
                            format!("power rule needs scale > 0 and finite exponent, got ({scale}, {exponent})"),
                        ));
                    }
                }
                for k in 1..=n {
                    match sigma.sigma(k) {
                        Some(s) if s > 0.0 && s.is_finite() => {}
                        Some(s) => {
                            return Err(invalid(
                                "operator.sigma",
                                format!("sigma_{k} = {s} is not > 0"),
                            ))
                        }
                        None => {
                            return Err(invalid(
                                "operator.sigma",
                                format!("explicit values do not cover truncation level {n}"),
                            ))
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A named operator from the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub kind: OperatorKind,
    #[serde(default)]
    pub label: String,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind) -> Self {
        let label = kind.name().to_string();
        Self { kind, label }
    }
}

impl From<OperatorKind> for OperatorSpec {
    fn from(kind: OperatorKind) -> Self {
        Self::new(kind)
    }
}

/// Square truncation `A_N` together with the norm used on the image space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTruncation {
    spec: OperatorSpec,
    n: usize,
    image_norm: NormKind,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

/// Builds the truncation `A_N`.
pub fn assemble(spec: &OperatorSpec, n: usize, image_norm: NormKind) -> Result<OperatorTruncation> {
    if n < 1 {
        return Err(invalid("operator.n", "truncation level must be at least 1"));
    }
    spec.kind.validate(n)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    match &spec.kind {
        OperatorKind::Identity | OperatorKind::Embedding { .. } => {
            for (k, row) in rows.iter_mut().enumerate() {
                row.push((k, 1.0));
            }
        }
        OperatorKind::BidiagonalSum => {
            for (k, row) in rows.iter_mut().enumerate() {
                row.push((k, 1.0));
                if k + 1 < n {
                    row.push((k + 1, 1.0));
                }
            }
        }
        OperatorKind::FirstRowSummation => {
            rows[0] = (0..n).map(|l| (l, 1.0)).collect();
            for (k, row) in rows.iter_mut().enumerate().skip(1) {
                row.push((k, 1.0));
            }
        }
        OperatorKind::Diagonal { sigma } => {
            for (k, row) in rows.iter_mut().enumerate() {
                row.push((k, sigma.sigma(k + 1).expect("validated")));
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (c, v) in row {
            col_idx.push(c);
            vals.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(OperatorTruncation {
        spec: spec.clone(),
        n,
        image_norm,
        row_ptr,
        col_idx,
        vals,
    })
}

impl OperatorTruncation {
    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn image_norm(&self) -> NormKind {
        self.image_norm
    }

    /// Same matrix, different image norm.
    pub fn with_image_norm(&self, image_norm: NormKind) -> Self {
        Self {
            image_norm,
            ..self.clone()
        }
    }

    /// Entry `(i, j)`, 1-based.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let r = i - 1;
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&p| self.col_idx[p] == j - 1)
            .map_or(0.0, |p| self.vals[p])
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[p])] = self.vals[p];
            }
        }
        m
    }

    /// `out = A x` on raw slices; lengths are the caller's responsibility.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(|p| self.vals[p] * x[self.col_idx[p]])
                .sum();
        }
    }

    /// `out = Aᵀ y` on raw slices.
    pub(crate) fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[p]] += self.vals[p] * yr;
            }
        }
    }

    pub fn apply(&self, x: &TruncatedSequence) -> Result<TruncatedSequence> {
        check_dim(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_into(x.as_slice(), &mut out);
        Ok(TruncatedSequence::from_vec_unchecked(out))
    }

    pub fn apply_adjoint(&self, y: &TruncatedSequence) -> Result<TruncatedSequence> {
        check_dim(self.n, y.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_adjoint_into(y.as_slice(), &mut out);
        Ok(TruncatedSequence::from_vec_unchecked(out))
    }

    /// Column `k` (1-based), i.e. `A e^(k)`.
    pub fn column(&self, k: usize) -> Result<TruncatedSequence> {
        self.apply(&TruncatedSequence::unit(k, self.n)?)
    }

    /// `‖A‖` as an operator ℓ¹ → ℓ¹ (max column sum).
    pub fn norm_l1(&self) -> f64 {
        let mut cols = vec![0.0; self.n];
        for (p, &c) in self.col_idx.iter().enumerate() {
            cols[c] += self.vals[p].abs();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// `‖A‖` as an operator ℓ^∞ → ℓ^∞ (max row sum).
    pub fn norm_sup(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                self.vals[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum()
            })
            .fold(0.0, f64::max)
    }

    /// Smallest singular value by dense SVD.
    pub fn sigma_min(&self) -> Result<f64> {
        if self.n > MAX_DENSE_SVD {
            return Err(invalid(
                "operator.n",
                format!("dense SVD limited to N <= {MAX_DENSE_SVD}, got {}", self.n),
            ));
        }
        Ok(self
            .dense()
            .singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min))
    }
}

/// Largest singular value via power iteration on `AᵀA`.
///
/// Stops once the relative change of the estimate drops below `tol` and
/// returns the estimate inflated by `1 + tol`. The start vector is drawn
/// from a fixed seed.
pub fn operator_norm_estimate(op: &OperatorTruncation, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    let n = op.n();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v, NormKind::L2);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0_f64;
    for _ in 0..POWER_ITERATION_MAX {
        op.apply_into(&v, &mut av);
        op.apply_adjoint_into(&av, &mut w);
        // ‖AᵀAv‖ for unit v converges to σ_max² from below
        let wn = norm(&w, NormKind::L2);
        if wn == 0.0 {
            return Err(Error::Unsupported(
                "operator annihilates the power-iteration vector".into(),
            ));
        }
        let next = wn.sqrt();
        let settled = (next - estimate).abs() <= tol * next;
        estimate = next;
        if settled {
            return Ok(estimate * (1.0 + tol));
        }
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / wn);
    }
    Err(Error::PowerIterationStalled {
        iterations: POWER_ITERATION_MAX,
    })
}

/// Verdict of a conditioning scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditioningVerdict {
    Degenerating,
    Stable,
}

/// `σ_min(A_N)` over a grid of truncation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningReport {
    pub n_values: Vec<usize>,
    pub sigma_min: Vec<f64>,
    /// Least-squares slope of `log(1/σ_min)` against `log N`; `None` for a
    /// single-point grid.
    pub growth_exponent: Option<f64>,
    pub verdict: ConditioningVerdict,
}

/// Scans `σ_min(A_N)` across `n_grid`. The verdict is `Degenerating` when
/// `σ_min` shrinks by a factor of at least ten from the first to the last
/// grid point.
pub fn conditioning_scan(spec: &OperatorSpec, n_grid: &[usize]) -> Result<ConditioningReport> {
    if n_grid.is_empty() {
        return Err(invalid("n_grid", "must not be empty"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid", "must be strictly increasing"));
    }
    let sigma_min = n_grid
        .iter()
        .map(|&n| assemble(spec, n, NormKind::L2)?.sigma_min())
        .collect::<Result<Vec<_>>>()?;
    let growth_exponent = (n_grid.len() >= 2).then(|| {
        let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = sigma_min.iter().map(|s| (1.0 / s).ln()).collect();
        ols_slope(&xs, &ys)
    });
    let first = sigma_min[0];
    let last = *sigma_min.last().unwrap();
    let verdict = if first >= 10.0 * last {
        ConditioningVerdict::Degenerating
    } else {
        ConditioningVerdict::Stable
    };
    Ok(ConditioningReport {
        n_values: n_grid.to_vec(),
        sigma_min,
        growth_exponent,
        verdict,
    })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Probe sequence paired against the columns `A e^(k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Explicit(TruncatedSequence),
    /// `ξ ≡ 1`, bounded but not in `c₀`.
    ConstantOne,
}

/// Pairings `⟨ξ, A e^(k)⟩` for `k = 1..=count`.
///
/// Decay towards zero for every `c₀` probe is the finite analogue of
/// `A e^(k) ⇀ 0`; a bounded probe with non-decaying pairings exposes the
/// failure of weak convergence.
pub fn weak_star_diagnostic(spec: &OperatorSpec, count: usize, probe: &Probe) -> Result<Vec<f64>> {
    if count < 1 {
        return Err(invalid("count", "must be at least 1"));
    }
    let (n, xi) = match probe {
        Probe::Explicit(xi) => {
            if xi.len() < count {
                return Err(Error::DimensionMismatch {
                    expected: count,
                    got: xi.len(),
                });
            }
            (xi.len(), xi.as_slice().to_vec())
        }
        Probe::ConstantOne => (count, vec![1.0; count]),
    };
    let op = assemble(spec, n, NormKind::L2)?;
    let mut pairings = Vec::with_capacity(count);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..count {
        e[k] = 1.0;
        op.apply_into(&e, &mut col);
        e[k] = 0.0;
        pairings.push(xi.iter().zip(&col).map(|(a, b)| a * b).sum());
    }
    Ok(pairings)
}
