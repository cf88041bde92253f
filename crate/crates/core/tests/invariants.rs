use nalgebra::{DMatrix, DVector};

use l1tik::operators::{assemble, OperatorKind, SingularValueRule};
use l1tik::presets::{preset, PRESET_NAMES};
use l1tik::rates::run_rate_study;
use l1tik::sequences::{NormKind, SequenceModel, TruncatedSequence};
use l1tik::solver::{
    objective_value, optimality_certificate, solve_tikhonov, SolveOptions, TikhonovProblem,
};
use l1tik::source_conditions::{property1_witness_bidiagonal, TailMode};

fn all_kinds() -> Vec<OperatorKind> {
    vec![
        OperatorKind::Identity,
        OperatorKind::Embedding { q: 2.0 },
        OperatorKind::BidiagonalSum,
        OperatorKind::FirstRowSummation,
        OperatorKind::Diagonal {
            sigma: SingularValueRule::Power {
                scale: 1.0,
                exponent: 2.0,
            },
        },
    ]
}

#[test]
fn materialized_head_plus_tail_is_total() {
    let models = [
        SequenceModel::PowerDecay {
            exponent: 2.0,
            scale: 1.0,
        },
        SequenceModel::PowerDecay {
            exponent: 1.3,
            scale: 0.5,
        },
        SequenceModel::ExponentialDecay {
            rate: 0.1,
            scale: 3.0,
        },
        SequenceModel::Sparse {
            support: vec![1, 40, 700],
            values: vec![1.0, -2.0, 0.5],
        },
    ];
    for model in models {
        let total = model.tail_sum(0).unwrap();
        let mut prev = total;
        for n in [1, 2, 10, 100, 1000] {
            let head = model.materialize(n).unwrap().norm(NormKind::L1);
            let tail = model.tail_sum(n).unwrap();
            assert!((head + tail - total).abs() <= 1e-10, "{model:?} n={n}");
            assert!(tail <= prev);
            prev = tail;
        }
    }
}

#[test]
fn all_truncations_are_injective() {
    for kind in all_kinds() {
        for n in [1, 5, 50, 300] {
            let op = assemble(&kind.clone().into(), n, NormKind::L2).unwrap();
            assert!(op.sigma_min().unwrap() > 0.0, "{kind:?} n={n}");
        }
    }
}

#[test]
fn solution_beats_zero_and_least_squares() {
    for kind in all_kinds() {
        let n = 25;
        let op = assemble(&kind.clone().into(), n, NormKind::L2).unwrap();
        let y = TruncatedSequence::new((0..n).map(|k| ((k * 13 % 9) as f64 - 4.0) / 3.0).collect())
            .unwrap();
        let a = op.dense();
        let ls = a
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(y.as_slice()))
            .expect("square truncations are invertible");
        let ls = TruncatedSequence::new(ls.as_slice().to_vec()).unwrap();
        for alpha in [1e-3, 1e-1, 1.0] {
            let pb = TikhonovProblem::new(&op, &y, 2.0, alpha).unwrap();
            let (x, _) = solve_tikhonov(&pb, &SolveOptions::default()).unwrap();
            let f = objective_value(&pb, &x).unwrap();
            let zero = TruncatedSequence::zeros(n).unwrap();
            assert!(f <= objective_value(&pb, &zero).unwrap());
            assert!(
                f <= objective_value(&pb, &ls).unwrap() + 1e-12,
                "{kind:?} alpha={alpha}"
            );
        }
    }
}

#[test]
fn support_shrinks_as_alpha_grows() {
    for kind in [
        OperatorKind::Identity,
        OperatorKind::Diagonal {
            sigma: SingularValueRule::Power {
                scale: 1.0,
                exponent: 1.0,
            },
        },
    ] {
        let n = 30;
        let op = assemble(&kind.clone().into(), n, NormKind::L2).unwrap();
        let y = TruncatedSequence::new(
            (0..n)
                .map(|k| (0.7 * k as f64).sin() * (1.0 + k as f64 / 10.0))
                .collect(),
        )
        .unwrap();
        let aty = op.apply_adjoint(&y).unwrap().norm(NormKind::Sup);
        let mut last = usize::MAX;
        for i in 0..=40 {
            let alpha = aty * 10f64.powf(-4.0 + 4.0 * i as f64 / 40.0);
            let pb = TikhonovProblem::new(&op, &y, 2.0, alpha).unwrap();
            let (x, _) = solve_tikhonov(&pb, &SolveOptions::default()).unwrap();
            let support = x.support_size();
            assert!(
                support <= last,
                "{kind:?}: support grew to {support} at alpha {alpha}"
            );
            last = support;
        }
        assert_eq!(last, 0);
    }
}

#[test]
fn bidiagonal_support_can_grow_with_alpha() {
    // coupled columns: the lasso path may add a coordinate while α increases
    let n = 30;
    let op = assemble(&OperatorKind::BidiagonalSum.into(), n, NormKind::L2).unwrap();
    let y = TruncatedSequence::new(
        (0..n)
            .map(|k| (0.7 * k as f64).sin() * (1.0 + k as f64 / 10.0))
            .collect(),
    )
    .unwrap();
    let aty = op.apply_adjoint(&y).unwrap().norm(NormKind::Sup);
    let opts = SolveOptions {
        tol: 1e-13,
        ..SolveOptions::default()
    };
    let solve = |i: i32| {
        let alpha = aty * 10f64.powf(-4.0 + 4.0 * i as f64 / 40.0);
        let pb = TikhonovProblem::new(&op, &y, 2.0, alpha).unwrap();
        let (x, diag) = solve_tikhonov(&pb, &opts).unwrap();
        assert!(diag.converged);
        assert!(optimality_certificate(&pb, &x, 1e-9).unwrap().passed);
        let smallest = x
            .as_slice()
            .iter()
            .filter(|v| **v != 0.0)
            .fold(f64::INFINITY, |m, v| m.min(v.abs()));
        (x.support_size(), smallest)
    };
    let (lower, _) = solve(7);
    let (higher, smallest) = solve(8);
    assert_eq!((lower, higher), (28, 29));
    assert!(
        smallest > 1e-3,
        "entries are not rounding noise: {smallest}"
    );
}

#[test]
fn witness_head_magnitudes_bounded_by_index() {
    let xi: Vec<f64> = (0..30)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let w = property1_witness_bidiagonal(&xi, 0.0, TailMode::Alternating, 30).unwrap();
    for (k, v) in w.eta.as_slice().iter().enumerate() {
        assert!(v.abs() <= (k + 1) as f64);
    }
    // the extreme alternating pattern attains the bound
    assert_eq!(w.eta.get(30).unwrap().abs(), 30.0);
}

#[test]
fn bidiagonal_back_substitution_for_second_unit_vector() {
    let n = 12;
    let op = assemble(&OperatorKind::BidiagonalSum.into(), n, NormKind::L2).unwrap();
    let a: DMatrix<f64> = op.dense();
    let e2 = DVector::from_fn(n, |i, _| if i == 1 { 1.0 } else { 0.0 });
    let x = a.lu().solve(&e2).unwrap();
    let mut want = vec![0.0; n];
    want[0] = -1.0;
    want[1] = 1.0;
    assert_eq!(x.as_slice(), &want[..]);
}

#[test]
fn preset_studies_meet_rate_invariants() {
    for name in PRESET_NAMES {
        let study = run_rate_study(&preset(name).unwrap(), 1).unwrap();
        let steps = study.medians.len().saturating_sub(1).max(1);
        assert!(
            study.median_increases as f64 <= (0.05 * steps as f64).max(0.0),
            "{name}: {} median increases",
            study.median_increases
        );
        let fit = study.fit.unwrap();
        if let Some(pred) = study.predicted_exponent {
            assert!(
                fit.slope >= pred - 0.15,
                "{name}: slope {} predicted {pred}",
                fit.slope
            );
        }
        assert!(study.valid && study.all_certified());
    }
}
