//! Acceptance run: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the console; the process exits
//! nonzero when any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use l1tik::csv::{median_plot_csv, plot_csv, records_csv, summary_csv};
use l1tik::operators::{assemble, conditioning_scan, OperatorKind, SingularValueRule};
use l1tik::parameter_choice::{log_grid, TOL_CERT};
use l1tik::presets::{preset, PRESET_NAMES};
use l1tik::rates::{generate_noisy_data, run_rate_study, RateStudy, RecordStatus};
use l1tik::sequences::{NormKind, SequenceModel, TruncatedSequence};
use l1tik::solver::{
    brute_force_oracle, discrepancy, optimality_certificate, solve_tikhonov, SolveOptions,
    TikhonovProblem,
};
use l1tik::source_conditions::{
    beta_from_mu, canonical_sources, firstlemma_check, gamma_from_sources, phi_eval,
    property1_witness_bidiagonal, vsc_check, GammaMode, GammaRule, SmoothnessProfile, TailMode,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn small_operator(rng: &mut ChaCha8Rng, n: usize) -> OperatorKind {
    match rng.random_range(0..5) {
        0 => OperatorKind::Identity,
        1 => OperatorKind::Embedding { q: 2.0 },
        2 => OperatorKind::BidiagonalSum,
        3 => OperatorKind::FirstRowSummation,
        _ => OperatorKind::Diagonal {
            sigma: SingularValueRule::Explicit {
                values: (0..n).map(|_| 10f64.powf(-rng.random::<f64>())).collect(),
            },
        },
    }
}

/// Criteria 1 and the first half of 2: FISTA against the exhaustive oracle.
fn oracle_equivalence() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let (mut worst, mut worst_cert) = (0.0_f64, 0.0_f64);
    let mut all_certified = true;
    let start = Instant::now();
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let kind = small_operator(&mut rng, n);
        let op = assemble(&kind.into(), n, NormKind::L2).unwrap();
        let y = TruncatedSequence::new((0..n).map(|_| gauss(&mut rng)).collect()).unwrap();
        let alpha = 10f64.powf(-3.0 * rng.random::<f64>());
        let pb = TikhonovProblem::new(&op, &y, 2.0, alpha).unwrap();
        let (x, diag) = solve_tikhonov(&pb, &SolveOptions::default()).unwrap();
        // the minimizer satisfies α‖x‖₁ ≤ ½‖y‖², so the grid box contains it
        let half_width = 0.5 * y.norm(NormKind::L2).powi(2) / alpha + 1e-12;
        let points = [401, 201, 41][n - 1];
        let oracle = brute_force_oracle(&pb, half_width, points).unwrap();
        let diff = x
            .as_slice()
            .iter()
            .zip(oracle.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
        let cert = optimality_certificate(&pb, &x, TOL_CERT).unwrap();
        all_certified &= cert.passed && diag.converged;
        worst_cert = worst_cert.max(cert.max_violation);
    }
    let elapsed = start.elapsed();
    (
        outcome(
            worst <= 1e-5 && elapsed <= Duration::from_secs(60),
            format!("max |fista - oracle|_inf = {worst:.3e} (tol 1e-5) over 200 problems in {elapsed:.2?} (limit 60s)"),
        ),
        outcome(
            all_certified,
            format!("oracle problems: worst subgradient violation {worst_cert:.3e} (tol {TOL_CERT:e})"),
        ),
    )
}

fn study(name: &str, jobs: usize) -> (RateStudy, Duration) {
    let start = Instant::now();
    let s = run_rate_study(&preset(name).unwrap(), jobs).unwrap();
    (s, start.elapsed())
}

fn rendered(s: &RateStudy) -> String {
    [
        records_csv(&s.records),
        summary_csv(s),
        plot_csv(s),
        median_plot_csv(s),
    ]
    .concat()
}

fn bracketing(s: &RateStudy) -> Outcome {
    let cfg = preset("bracketing-bidiagonal-sdp").unwrap();
    let rule = match cfg.rule {
        l1tik::rates::ParameterRule::Sdp(r) => r,
        _ => unreachable!(),
    };
    let op = assemble(&cfg.operator, cfg.n, cfg.image_norm()).unwrap();
    let y = op.apply(&cfg.model.materialize(cfg.n).unwrap()).unwrap();
    let (mut checked, mut ok, mut flagged, mut failed) = (0, 0, 0, 0);
    for r in &s.records {
        match r.status {
            RecordStatus::LeftBracketMissing => flagged += 1,
            RecordStatus::Ok => {
                checked += 1;
                let yd = generate_noisy_data(&y, r.delta, op.image_norm(), r.seed).unwrap();
                let d_at = |alpha: f64| {
                    let pb = TikhonovProblem::new(&op, &yd, cfg.p, alpha).unwrap();
                    let (x, diag) = solve_tikhonov(&pb, &SolveOptions::default()).unwrap();
                    assert!(diag.converged);
                    discrepancy(&pb, &x).unwrap()
                };
                let target = rule.tau * r.delta;
                if d_at(r.alpha) <= target && target < d_at(r.alpha / rule.q) {
                    ok += 1;
                }
            }
            _ => failed += 1,
        }
    }
    outcome(
        checked > 0 && ok == checked,
        format!("{ok}/{checked} non-flagged runs bracket tau*delta on independent re-solves ({flagged} flagged, {failed} failed)"),
    )
}

fn slope_of(s: &RateStudy) -> (f64, f64) {
    s.fit
        .map(|f| (f.slope, f.stderr))
        .unwrap_or((f64::NAN, f64::NAN))
}

fn witness_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7007);
    let mus = [0.0, 0.1, 0.5, 0.9];
    let (mut pass, mut head, mut tail_excess) = (0, 0.0_f64, f64::NEG_INFINITY);
    for i in 0..1000 {
        let n = rng.random_range(1..=30);
        let mu = mus[i % 4];
        let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let tail = if mu > 0.0 && rng.random::<bool>() {
            TailMode::Decaying
        } else {
            TailMode::Alternating
        };
        let big_n = n + rng.random_range(0..=60);
        let w = property1_witness_bidiagonal(&xi, mu, tail, big_n).unwrap();
        let op = assemble(&OperatorKind::BidiagonalSum.into(), big_n, NormKind::L1).unwrap();
        let c = w.certify(&op).unwrap();
        head = head.max(c.head_error);
        tail_excess = tail_excess.max(c.tail_max - mu);
        if c.head_error <= 1e-14 && c.tail_max <= mu + 1e-14 && c.eta_sup <= n as f64 {
            pass += 1;
        }
    }
    outcome(
        pass == 1000,
        format!("{pass}/1000 witnesses; max head error {head:.1e} (tol 1e-14), max tail - mu {tail_excess:.1e}"),
    )
}

fn inequality_suites() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8008);
    let mut lemma_fail = 0;
    for _ in 0..100_000 {
        let n = rng.random_range(1..=40);
        let draw = |rng: &mut ChaCha8Rng| -> TruncatedSequence {
            let density = rng.random::<f64>();
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            TruncatedSequence::new(
                (0..n)
                    .map(|_| {
                        if rng.random::<f64>() < density {
                            scale * gauss(rng)
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
            .unwrap()
        };
        let x = draw(&mut rng);
        let t = draw(&mut rng);
        let m = rng.random_range(1..=n);
        if !firstlemma_check(&x, &t, m).unwrap().holds {
            lemma_fail += 1;
        }
    }

    let n = 50;
    let op = assemble(&OperatorKind::BidiagonalSum.into(), n, NormKind::L1).unwrap();
    let beta = beta_from_mu(0.5).unwrap();
    let mut vsc_fail = 0;
    let mut worst = f64::INFINITY;
    let truths = [
        SequenceModel::PowerDecay {
            exponent: 2.0,
            scale: 1.0,
        },
        SequenceModel::Sparse {
            support: vec![2, 9, 10, 33],
            values: vec![1.0, -2.0, 0.5, 0.25],
        },
    ];
    for (i, model) in truths.iter().enumerate() {
        let truth = model.materialize(n).unwrap();
        let profile =
            SmoothnessProfile::from_sequence(&truth, &GammaRule::Linear { scale: 1.0 }, n).unwrap();
        let r = vsc_check(&op, &truth, &profile, beta, 10_000, 90 + i as u64).unwrap();
        vsc_fail += r.violations;
        worst = worst.min(r.worst_margin);
    }
    let elapsed = start.elapsed();
    outcome(
        lemma_fail == 0 && vsc_fail == 0 && elapsed <= Duration::from_secs(120),
        format!(
            "base inequality: {lemma_fail} failures in 1e5 triples; VSC beta=1/3: {vsc_fail} violations in 2x1e4 samples (min margin {worst:.3e}); {elapsed:.2?}"
        ),
    )
}

fn index_function_properties() -> Outcome {
    let grid = log_grid(1e-8, 1.0, 200);
    let mut notes = Vec::new();
    let mut pass = true;
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        let gamma = cfg.prediction.clone().unwrap();
        let profile = SmoothnessProfile::from_model(&cfg.model, &gamma, cfg.n).unwrap();
        let phi = |t: f64| phi_eval(&profile, t).unwrap().value;
        let values: Vec<f64> = grid.iter().map(|&t| phi(t)).collect();
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let concave = grid.windows(2).all(|w| {
            let mid = phi(0.5 * (w[0] + w[1]));
            mid >= 0.5 * (phi(w[0]) + phi(w[1])) * (1.0 - 1e-13)
        });
        let mut bound_ok = true;
        if let SequenceModel::Sparse { support, .. } = &cfg.model {
            let n0 = *support.iter().max().unwrap();
            let g = profile.gamma(n0);
            bound_ok = grid.iter().all(|&t| phi(t) <= 2.0 * g * t * (1.0 + 1e-14));
        }
        pass &= increasing && concave && bound_ok;
        notes.push(format!(
            "{name}: inc={increasing} concave={concave} sparse-bound={bound_ok}"
        ));
    }
    outcome(pass, notes.join("; "))
}

fn gamma_comparisons() -> Outcome {
    let emb = assemble(&OperatorKind::Embedding { q: 2.0 }.into(), 4, NormKind::L2).unwrap();
    let f = canonical_sources(&emb, 4).unwrap();
    let sum4 = gamma_from_sources(&f, 4, GammaMode::Sum, NormKind::L2).unwrap();
    let sup4 = gamma_from_sources(&f, 4, GammaMode::SignedSup, NormKind::L2).unwrap();
    let kinds = [
        OperatorKind::Identity,
        OperatorKind::Embedding { q: 2.0 },
        OperatorKind::BidiagonalSum,
        OperatorKind::Diagonal {
            sigma: SingularValueRule::Power {
                scale: 1.0,
                exponent: 1.5,
            },
        },
    ];
    let mut configs = 0;
    let mut ordered = true;
    for kind in kinds {
        for dim in [4, 8] {
            let op = assemble(&kind.clone().into(), dim, NormKind::L2).unwrap();
            let f = canonical_sources(&op, dim.min(8)).unwrap();
            for dual in [NormKind::L1, NormKind::L2, NormKind::Sup] {
                for m in 1..=f.len() {
                    let s = gamma_from_sources(&f, m, GammaMode::Sum, dual).unwrap();
                    let g = gamma_from_sources(&f, m, GammaMode::SignedSup, dual).unwrap();
                    ordered &= g <= s * (1.0 + 1e-15);
                    configs += 1;
                }
            }
        }
    }
    outcome(
        sum4 == 4.0 && sup4 == 2.0 && ordered,
        format!("embedding q=2: sum gamma_4 = {sum4}, signed-sup gamma_4 = {sup4}; signed-sup <= sum on {configs} configurations: {ordered}"),
    )
}

fn conditioning() -> Outcome {
    let bidiag = conditioning_scan(&OperatorKind::BidiagonalSum.into(), &[10, 100, 1000]).unwrap();
    let ratio = bidiag.sigma_min[0] / bidiag.sigma_min[2];
    let ident = conditioning_scan(&OperatorKind::Identity.into(), &[10, 100, 1000]).unwrap();
    let ident_ok = ident.sigma_min.iter().all(|s| (s - 1.0).abs() < 1e-12);
    outcome(
        ratio >= 5.0 && ident_ok,
        format!(
            "bidiagonal 1/sigma_min ratio N=10->1000: {ratio:.1} (need >= 5), growth exponent {:.3}; identity sigma_min == 1: {ident_ok}",
            bidiag.growth_exponent.unwrap()
        ),
    )
}

fn main() {
    let total = Instant::now();
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();

    let (c1, c2_oracle) = oracle_equivalence();
    lines.push((1, "oracle equivalence", c1));

    let mut studies = Vec::new();
    for name in PRESET_NAMES {
        let (s, t) = study(name, 1);
        studies.push((name, s, t));
    }
    let get = |name: &str| studies.iter().find(|s| s.0 == name).unwrap();

    let uncertified: Vec<&str> = studies
        .iter()
        .filter(|(_, s, _)| !s.all_certified())
        .map(|(n, _, _)| *n)
        .collect();
    lines.push((
        2,
        "optimality certificates",
        outcome(
            c2_oracle.pass && uncertified.is_empty(),
            format!(
                "{}; rate studies uncertified: {:?}",
                c2_oracle.detail, uncertified
            ),
        ),
    ));

    lines.push((
        3,
        "SDP bracketing",
        bracketing(&get("bracketing-bidiagonal-sdp").1),
    ));

    let (_, s4, t4) = get("identity-p1-sdp");
    let (m4, e4) = slope_of(s4);
    lines.push((
        4,
        "well-posed linear rate",
        outcome(
            (0.9..=1.1).contains(&m4) && e4 <= 0.05,
            format!("slope {m4:.4} (need [0.9, 1.1]), stderr {e4:.2e} (need <= 0.05), {t4:.2?}"),
        ),
    ));

    let (_, s5, t5) = get("sparse-bidiagonal-sdp");
    let (m5, e5) = slope_of(s5);
    lines.push((
        5,
        "sparse-solution linear rate",
        outcome(
            (0.85..=1.15).contains(&m5) && *t5 <= Duration::from_secs(300),
            format!(
                "slope {m5:.4} +- {e5:.3} (need [0.85, 1.15]), failed {}, {t5:.2?} (limit 5 min)",
                s5.n_failed
            ),
        ),
    ));

    let (_, s6, t6) = get("power2-bidiagonal-sdp");
    let (m6, e6) = slope_of(s6);
    let p6 = s6.predicted_exponent.unwrap_or(f64::NAN);
    lines.push((
        6,
        "Hoelder rate for power decay",
        outcome(
            m6 >= 0.35 && (p6 - 0.5).abs() <= 0.05 && m6 >= p6 - 0.15 && *t6 <= Duration::from_secs(600),
            format!(
                "slope {m6:.4} +- {e6:.3} (need >= 0.35 and >= predicted - 0.15), predicted {p6:.4} (need 0.5 +- 0.05), median increases {}, {t6:.2?} (limit 10 min)",
                s6.median_increases
            ),
        ),
    ));

    lines.push((7, "Property 1 witness suite", witness_suite()));
    lines.push((8, "inequality suites", inequality_suites()));
    lines.push((9, "index-function properties", index_function_properties()));
    lines.push((10, "gamma_n comparisons", gamma_comparisons()));
    lines.push((11, "conditioning proxy", conditioning()));

    let mut mismatched = Vec::new();
    for (name, first, _) in &studies {
        let (again, _) = study(name, 2);
        if rendered(first) != rendered(&again) {
            mismatched.push(*name);
        }
    }
    lines.push((
        12,
        "determinism",
        outcome(
            mismatched.is_empty(),
            format!(
                "{} presets rerun with 2 workers, byte-identical CSVs; mismatches: {:?}",
                PRESET_NAMES.len(),
                mismatched
            ),
        ),
    ));

    let mut failed = 0;
    for (i, title, o) in &lines {
        println!(
            "[{}] criterion {i:>2} {title}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.2?}",
        lines.len() - failed,
        lines.len(),
        total.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
