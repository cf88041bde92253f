//! Minimization of the ℓ¹-Tikhonov functional
//!
//! ```text
//! (1/p)‖Ax − y^δ‖^p + α‖x‖₁                      (elastic_eta = 0)
//! (1/p)‖Ax − y^δ‖^p + α(½‖x‖₂² + η‖x‖₁)          (elastic_eta = η > 0)
//! ```
//!
//! For `p ≥ 2` with the ℓ² image norm the misfit is smooth and the functional
//! is minimized by accelerated proximal gradient with backtracking and
//! function-value restart. For `p = 1` only the identity operator with ℓ¹
//! image norm is supported, where the minimizer is known in closed form.

use crate::error::{check_dim, invalid, Error, Result};
use crate::operators::{operator_norm_estimate, OperatorKind, OperatorTruncation};
use crate::sequences::{norm, shrink, NormKind, TruncatedSequence};

/// Iterations between objective checkpoints in [`SolveDiagnostics`].
const CHECKPOINT_EVERY: usize = 100;
const MAX_GRID_POINTS: usize = 401;
const MAX_ORACLE_DIM: usize = 3;

/// One instance of the Tikhonov functional.
#[derive(Debug, Clone, Copy)]
pub struct TikhonovProblem<'a> {
    op: &'a OperatorTruncation,
    data: &'a TruncatedSequence,
    p: f64,
    alpha: f64,
    elastic_eta: f64,
}

impl<'a> TikhonovProblem<'a> {
    pub fn new(
        op: &'a OperatorTruncation,
        data: &'a TruncatedSequence,
        p: f64,
        alpha: f64,
    ) -> Result<Self> {
        Self::elastic(op, data, p, alpha, 0.0)
    }

    pub fn elastic(
        op: &'a OperatorTruncation,
        data: &'a TruncatedSequence,
        p: f64,
        alpha: f64,
        elastic_eta: f64,
    ) -> Result<Self> {
        check_dim(op.n(), data.len())?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid(
                "alpha",
                format!("must be finite and > 0, got {alpha}"),
            ));
        }
        if !(elastic_eta >= 0.0) || !elastic_eta.is_finite() {
            return Err(invalid(
                "elastic_eta",
                format!("must be finite and >= 0, got {elastic_eta}"),
            ));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(invalid("p", format!("must be >= 1, got {p}")));
        }
        if p == 1.0 {
            if op.spec().kind != OperatorKind::Identity || op.image_norm() != NormKind::L1 {
                return Err(invalid(
                    "p",
                    "p = 1 is only available for the identity operator with l1 image norm",
                ));
            }
            if elastic_eta != 0.0 {
                return Err(invalid(
                    "elastic_eta",
                    "the p = 1 closed form has no elastic-net variant",
                ));
            }
        } else if p < 2.0 {
            return Err(Error::Unsupported(format!(
                "misfit exponent p = {p} in (1, 2): gradient is not Lipschitz at zero residual"
            )));
        }
        Ok(Self {
            op,
            data,
            p,
            alpha,
            elastic_eta,
        })
    }

    /// Same operator, data and exponent with a different `α`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::elastic(self.op, self.data, self.p, alpha, self.elastic_eta)
    }

    pub fn op(&self) -> &'a OperatorTruncation {
        self.op
    }

    pub fn data(&self) -> &'a TruncatedSequence {
        self.data
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn elastic_eta(&self) -> f64 {
        self.elastic_eta
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    /// Weight of `‖x‖₁` in the penalty.
    fn l1_weight(&self) -> f64 {
        if self.elastic_eta == 0.0 {
            self.alpha
        } else {
            self.alpha * self.elastic_eta
        }
    }

    /// Weight `c` of the `(c/2)‖x‖₂²` term in the penalty.
    fn l2_weight(&self) -> f64 {
        if self.elastic_eta == 0.0 {
            0.0
        } else {
            self.alpha
        }
    }

    fn penalty(&self, x: &[f64]) -> f64 {
        let l2 = self.l2_weight();
        let mut value = self.l1_weight() * norm(x, NormKind::L1);
        if l2 > 0.0 {
            value += 0.5 * l2 * x.iter().map(|v| v * v).sum::<f64>();
        }
        value
    }

    fn prox(&self, v: f64, step: f64) -> f64 {
        shrink(v, step * self.l1_weight()) / (1.0 + step * self.l2_weight())
    }

    fn residual_into(&self, x: &[f64], r: &mut [f64]) {
        self.op.apply_into(x, r);
        r.iter_mut()
            .zip(self.data.as_slice())
            .for_each(|(ri, yi)| *ri -= yi);
    }

    fn misfit_from_residual(&self, r: &[f64]) -> f64 {
        norm(r, self.op.image_norm()).powf(self.p) / self.p
    }

    /// Misfit value and its gradient `‖r‖^(p−2)·Aᵀr` (ℓ² image norm only).
    fn misfit_grad(&self, x: &[f64], r: &mut [f64], g: &mut [f64]) -> f64 {
        self.residual_into(x, r);
        let nr = norm(r, NormKind::L2);
        self.op.apply_adjoint_into(r, g);
        if self.p != 2.0 {
            let scale = if nr == 0.0 {
                0.0
            } else {
                nr.powf(self.p - 2.0)
            };
            g.iter_mut().for_each(|gi| *gi *= scale);
        }
        nr.powf(self.p) / self.p
    }
}

/// Tikhonov functional value at `x` using the problem's image norm.
pub fn objective_value(problem: &TikhonovProblem<'_>, x: &TruncatedSequence) -> Result<f64> {
    check_dim(problem.n(), x.len())?;
    let mut r = vec![0.0; problem.n()];
    problem.residual_into(x.as_slice(), &mut r);
    Ok(problem.misfit_from_residual(&r) + problem.penalty(x.as_slice()))
}

/// `‖Ax − y^δ‖` in the problem's image norm.
pub fn discrepancy(problem: &TikhonovProblem<'_>, x: &TruncatedSequence) -> Result<f64> {
    check_dim(problem.n(), x.len())?;
    let mut r = vec![0.0; problem.n()];
    problem.residual_into(x.as_slice(), &mut r);
    Ok(norm(&r, problem.op.image_norm()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Bound on the proximal fixed-point residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Known upper estimate of `‖A‖₂`; estimated by power iteration if `None`.
    pub lipschitz: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            lipschitz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub objective: f64,
    /// `‖x − prox_{s·penalty}(x − s∇misfit(x))‖₂` at the returned point.
    pub residual: f64,
    pub converged: bool,
    /// Final step size `s`.
    pub step: f64,
    /// Objective at accepted iterates, every 100 iterations plus the last.
    pub checkpoints: Vec<f64>,
}

/// Spectral norm bound used to seed the step size.
pub fn lipschitz_bound(op: &OperatorTruncation) -> f64 {
    operator_norm_estimate(op, 1e-6).unwrap_or_else(|_| (op.norm_l1() * op.norm_sup()).sqrt())
}

/// Minimizes the functional from `x = 0`.
pub fn solve_tikhonov(
    problem: &TikhonovProblem<'_>,
    opts: &SolveOptions,
) -> Result<(TruncatedSequence, SolveDiagnostics)> {
    solve_tikhonov_from(problem, opts, None)
}

/// Minimizes the functional starting from `start` (warm start).
///
/// Non-convergence within `max_iter` is not an error: the best iterate is
/// returned with `converged = false`.
pub fn solve_tikhonov_from(
    problem: &TikhonovProblem<'_>,
    opts: &SolveOptions,
    start: Option<&TruncatedSequence>,
) -> Result<(TruncatedSequence, SolveDiagnostics)> {
    if !(opts.tol > 0.0) {
        return Err(invalid(
            "solver.tol",
            format!("must be > 0, got {}", opts.tol),
        ));
    }
    if opts.max_iter < 1 {
        return Err(invalid("solver.max_iter", "must be at least 1"));
    }
    if problem.p == 1.0 {
        let x = solve_identity_p1(problem.data, problem.alpha)?;
        let objective = objective_value(problem, &x)?;
        return Ok((
            x,
            SolveDiagnostics {
                iterations: 0,
                objective,
                residual: 0.0,
                converged: true,
                step: 0.0,
                checkpoints: vec![objective],
            },
        ));
    }
    if problem.op.image_norm() != NormKind::L2 {
        return Err(Error::Unsupported(format!(
            "iterative solver needs the l2 image norm, got {:?}",
            problem.op.image_norm()
        )));
    }
    let n = problem.n();
    let mut x = match start {
        Some(s) => {
            check_dim(n, s.len())?;
            s.as_slice().to_vec()
        }
        None => vec![0.0; n],
    };

    let lip = opts
        .lipschitz
        .unwrap_or_else(|| lipschitz_bound(problem.op));
    let mut step = if problem.p == 2.0 {
        1.0 / (lip * lip)
    } else {
        let ny = norm(problem.data.as_slice(), NormKind::L2).max(1.0);
        1.0 / ((problem.p - 1.0) * ny.powf(problem.p - 2.0) * lip * lip)
    };

    let mut r = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut y = x.clone();
    let mut x_prev = x.clone();

    let mut fx = problem.misfit_grad(&x, &mut r, &mut g) + problem.penalty(&x);
    let mut residual = fixed_point_residual(problem, &x, &g, step);
    let mut checkpoints = vec![fx];
    let mut t = 1.0_f64;
    let mut iterations = 0;
    let mut converged = residual <= opts.tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let f_y = problem.misfit_grad(&y, &mut r, &mut g);
        // backtracking on the sufficient-decrease condition of the smooth part
        let mut f_z;
        loop {
            for i in 0..n {
                z[i] = problem.prox(y[i] - step * g[i], step);
            }
            problem.residual_into(&z, &mut r);
            f_z = problem.misfit_from_residual(&r);
            let (mut lin, mut quad) = (0.0, 0.0);
            for i in 0..n {
                let d = z[i] - y[i];
                lin += g[i] * d;
                quad += d * d;
            }
            if f_z <= f_y + lin + quad / (2.0 * step) + 1e-13 * (1.0 + f_y.abs()) {
                break;
            }
            step *= 0.5;
        }
        let f_total = f_z + problem.penalty(&z);
        if f_total > fx {
            if t > 1.0 {
                // momentum overshoot: restart from the current iterate
                y.copy_from_slice(&x);
                t = 1.0;
                continue;
            }
            if f_total > fx + 1e-15 * (1.0 + fx.abs()) {
                step *= 0.5;
                continue;
            }
        }
        x_prev.copy_from_slice(&x);
        x.copy_from_slice(&z);
        fx = f_total.min(fx);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        t = t_next;

        problem.misfit_grad(&x, &mut r, &mut g);
        residual = fixed_point_residual(problem, &x, &g, step);
        converged = residual <= opts.tol;
        if iterations % CHECKPOINT_EVERY == 0 {
            checkpoints.push(fx);
        }
    }
    let x = TruncatedSequence::new(x)?;
    let objective = objective_value(problem, &x)?;
    if checkpoints.last() != Some(&objective) {
        checkpoints.push(objective);
    }
    Ok((
        x,
        SolveDiagnostics {
            iterations,
            objective,
            residual,
            converged,
            step,
            checkpoints,
        },
    ))
}

fn fixed_point_residual(problem: &TikhonovProblem<'_>, x: &[f64], grad: &[f64], step: f64) -> f64 {
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            let d = xi - problem.prox(xi - step * gi, step);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Componentwise minimizer of `Σ|x_k − y_k| + α|x_k|` (identity, `p = 1`).
///
/// Returns `y` for `α < 1` and `0` for `α > 1`; at `α = 1` every point of
/// the segment between `0` and `y` minimizes, so the value is rejected.
pub fn solve_identity_p1(y: &TruncatedSequence, alpha: f64) -> Result<TruncatedSequence> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(
            "alpha",
            format!("must be finite and > 0, got {alpha}"),
        ));
    }
    if alpha == 1.0 {
        return Err(invalid(
            "alpha",
            "alpha = 1 has no unique minimizer for p = 1",
        ));
    }
    if alpha < 1.0 {
        Ok(y.clone())
    } else {
        TruncatedSequence::zeros(y.len())
    }
}

/// Subgradient optimality check at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Largest violation of the coordinatewise optimality conditions.
    pub max_violation: f64,
    pub passed: bool,
}

/// Checks `0 ∈ ∇misfit(x) + ∂penalty(x)` coordinatewise: where `x_k = 0`,
/// `|g_k| ≤ w₁ + tol`; elsewhere `|g_k + w₂x_k + w₁ sign(x_k)| ≤ tol`, with
/// `w₁` the ℓ¹ weight and `w₂` the ℓ² weight of the penalty.
pub fn optimality_certificate(
    problem: &TikhonovProblem<'_>,
    x: &TruncatedSequence,
    tol_cert: f64,
) -> Result<Certificate> {
    check_dim(problem.n(), x.len())?;
    if problem.p == 1.0 {
        return Ok(identity_p1_certificate(problem, x, tol_cert));
    }
    if problem.p < 2.0 || problem.op.image_norm() != NormKind::L2 {
        return Err(Error::Unsupported(
            "subgradient certificate needs p >= 2 and the l2 image norm".into(),
        ));
    }
    let n = problem.n();
    let (mut r, mut g) = (vec![0.0; n], vec![0.0; n]);
    problem.misfit_grad(x.as_slice(), &mut r, &mut g);
    let (w1, w2) = (problem.l1_weight(), problem.l2_weight());
    let max_violation = x
        .as_slice()
        .iter()
        .zip(&g)
        .map(|(&xk, &gk)| {
            if xk == 0.0 {
                (gk.abs() - w1).max(0.0)
            } else {
                (gk + w2 * xk + w1 * xk.signum()).abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(Certificate {
        max_violation,
        passed: max_violation <= tol_cert,
    })
}

/// Distance of 0 from `∂|x_k − y_k| + α∂|x_k|`, both sides as intervals.
fn identity_p1_certificate(
    problem: &TikhonovProblem<'_>,
    x: &TruncatedSequence,
    tol_cert: f64,
) -> Certificate {
    let interval = |v: f64, w: f64| {
        if v == 0.0 {
            (-w, w)
        } else {
            (w * v.signum(), w * v.signum())
        }
    };
    let max_violation = x
        .as_slice()
        .iter()
        .zip(problem.data.as_slice())
        .map(|(&xk, &yk)| {
            let (l1, u1) = interval(xk - yk, 1.0);
            let (l2, u2) = interval(xk, problem.alpha);
            (l1 + l2).max(-(u1 + u2)).max(0.0)
        })
        .fold(0.0, f64::max);
    Certificate {
        max_violation,
        passed: max_violation <= tol_cert,
    }
}

/// Exhaustive grid search over `[−w, w]^N` (`N ≤ 3`) followed by cyclic
/// coordinate descent with exact scalar minimization.
///
/// Grid ties are broken by smallest ℓ¹ norm, then lexicographically. The
/// descent phase runs sweeps until no coordinate moves by more than
/// `1e−15·(1 + ‖x‖_∞)`.
pub fn brute_force_oracle(
    problem: &TikhonovProblem<'_>,
    grid_half_width: f64,
    grid_points: usize,
) -> Result<TruncatedSequence> {
    let n = problem.n();
    if n > MAX_ORACLE_DIM {
        return Err(invalid(
            "n",
            format!("oracle limited to N <= {MAX_ORACLE_DIM}, got {n}"),
        ));
    }
    if !(1..=MAX_GRID_POINTS).contains(&grid_points) {
        return Err(invalid(
            "grid_points",
            format!("must lie in 1..={MAX_GRID_POINTS}, got {grid_points}"),
        ));
    }
    if !(grid_half_width > 0.0) || !grid_half_width.is_finite() {
        return Err(invalid(
            "grid_half_width",
            format!("must be > 0, got {grid_half_width}"),
        ));
    }
    if problem.p < 2.0 || problem.op.image_norm() != NormKind::L2 {
        return Err(Error::Unsupported(
            "oracle needs p >= 2 and the l2 image norm".into(),
        ));
    }
    let axis: Vec<f64> = if grid_points == 1 {
        vec![0.0]
    } else {
        (0..grid_points)
            .map(|i| -grid_half_width + 2.0 * grid_half_width * i as f64 / (grid_points - 1) as f64)
            .collect()
    };

    let total = grid_points.pow(n as u32);
    let mut point = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for idx in 0..total {
        let mut rem = idx;
        // most significant coordinate first, so idx order is lexicographic
        for k in (0..n).rev() {
            point[k] = axis[rem % grid_points];
            rem /= grid_points;
        }
        problem.residual_into(&point, &mut r);
        let value = problem.misfit_from_residual(&r) + problem.penalty(&point);
        let l1 = norm(&point, NormKind::L1);
        let better = match &best {
            None => true,
            Some((bv, bl1, _)) => value < *bv || (value == *bv && l1 < *bl1),
        };
        if better {
            best = Some((value, l1, point.clone()));
        }
    }
    let mut x = best.expect("grid is nonempty").2;

    let columns: Vec<Vec<f64>> = (1..=n)
        .map(|k| problem.op.column(k).map(TruncatedSequence::into_vec))
        .collect::<Result<_>>()?;
    for _ in 0..1_000_000 {
        let mut moved = 0.0_f64;
        for k in 0..n {
            let old = x[k];
            let new = scalar_minimizer(problem, &x, k, &columns[k]);
            x[k] = new;
            moved = moved.max((new - old).abs());
        }
        let scale = 1.0 + norm(&x, NormKind::Sup);
        if moved <= 1e-15 * scale {
            break;
        }
    }
    TruncatedSequence::new(x)
}

/// Exact minimizer of the functional along coordinate `k`.
fn scalar_minimizer(problem: &TikhonovProblem<'_>, x: &[f64], k: usize, col: &[f64]) -> f64 {
    let (w1, w2) = (problem.l1_weight(), problem.l2_weight());
    let mut partial = x.to_vec();
    partial[k] = 0.0;
    // residual without coordinate k
    let mut r0 = vec![0.0; x.len()];
    problem.residual_into(&partial, &mut r0);
    let cc: f64 = col.iter().map(|c| c * c).sum();
    if problem.p == 2.0 {
        let rho: f64 = -col.iter().zip(&r0).map(|(c, r)| c * r).sum::<f64>();
        return shrink(rho, w1) / (cc + w2);
    }
    // derivative of the smooth part along the coordinate; nondecreasing in t
    let p = problem.p;
    let smooth_slope = |t: f64| -> f64 {
        let mut nr2 = 0.0;
        let mut inner = 0.0;
        for (c, r) in col.iter().zip(&r0) {
            let ri = r + t * c;
            nr2 += ri * ri;
            inner += c * ri;
        }
        let nr = nr2.sqrt();
        let scale = if nr == 0.0 { 0.0 } else { nr.powf(p - 2.0) };
        scale * inner + w2 * t
    };
    let d0 = smooth_slope(0.0);
    if d0.abs() <= w1 {
        return 0.0;
    }
    let (dir, offset) = if d0 < -w1 { (1.0, w1) } else { (-1.0, -w1) };
    let mut lo = 0.0_f64;
    let mut hi = dir;
    while (smooth_slope(hi) + offset) * dir < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (smooth_slope(mid) + offset) * dir < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
