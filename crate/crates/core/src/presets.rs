//! Bundled rate studies, one per reproduced rate regime.

use crate::operators::OperatorKind;
use crate::parameter_choice::SdpRule;
use crate::rates::{
    default_deltas, ParameterRule, RateStudyConfig, SolverSettings, TruncationPolicy,
};
use crate::sequences::SequenceModel;
use crate::source_conditions::GammaRule;

pub const PRESET_NAMES: [&str; 4] = [
    "identity-p1-sdp",
    "sparse-bidiagonal-sdp",
    "power2-bidiagonal-sdp",
    "bracketing-bidiagonal-sdp",
];

const MASTER_SEED: u64 = 20_240_611;

fn sparse_five() -> SequenceModel {
    SequenceModel::Sparse {
        support: vec![5, 20, 21, 60, 150],
        values: vec![1.0, -0.7, 0.5, 1.3, -0.9],
    }
}

fn base(operator: OperatorKind, n: usize, model: SequenceModel, p: f64) -> RateStudyConfig {
    RateStudyConfig {
        operator: operator.into(),
        n,
        image_norm: None,
        model,
        p,
        elastic_eta: 0.0,
        deltas: default_deltas(),
        repetitions: 5,
        seed: MASTER_SEED,
        rule: ParameterRule::Sdp(SdpRule::default()),
        solver: SolverSettings::default(),
        truncation: TruncationPolicy::Enforce,
        prediction: Some(GammaRule::Linear { scale: 1.0 }),
    }
}

/// Config of a bundled study, `None` for unknown names.
pub fn preset(name: &str) -> Option<RateStudyConfig> {
    Some(match name {
        // identity with p = 1 and l1 noise: closed-form minimizers
        "identity-p1-sdp" => {
            let mut cfg = base(OperatorKind::Identity, 200, sparse_five(), 1.0);
            cfg.prediction = Some(GammaRule::Constant { value: 1.0 });
            cfg
        }
        "sparse-bidiagonal-sdp" => base(OperatorKind::BidiagonalSum, 400, sparse_five(), 2.0),
        "power2-bidiagonal-sdp" => {
            let mut cfg = base(
                OperatorKind::BidiagonalSum,
                1000,
                SequenceModel::PowerDecay {
                    exponent: 2.0,
                    scale: 1.0,
                },
                2.0,
            );
            // tail(1000) ≈ 1e-3 exceeds 0.01·min δ; reported, not enforced
            cfg.truncation = TruncationPolicy::Report;
            cfg
        }
        "bracketing-bidiagonal-sdp" => {
            let mut cfg = base(OperatorKind::BidiagonalSum, 200, sparse_five(), 2.0);
            cfg.deltas = (2..=6).map(|i| 10f64.powf(-(i as f64) / 2.0)).collect();
            cfg
        }
        _ => return None,
    })
}
