//! Deterministic CSV rendering. Floats carry 17 significant digits so that
//! every value round-trips exactly.

use crate::rates::{RateRecord, RateStudy};

/// `{:.16e}` formatting, `NaN` for missing values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Header row plus one line per row, `\n`-terminated.
pub fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Two numeric columns.
pub fn two_columns(header: [&str; 2], rows: &[(f64, f64)]) -> String {
    table(
        &header,
        rows.iter().map(|&(a, b)| vec![fmt_f64(a), fmt_f64(b)]),
    )
}

pub fn records_csv(records: &[RateRecord]) -> String {
    table(
        &[
            "delta",
            "rep",
            "seed",
            "alpha",
            "discrepancy",
            "error_l1",
            "converged",
            "sdp_flag",
            "certified",
        ],
        records.iter().map(|r| {
            vec![
                fmt_f64(r.delta),
                r.rep.to_string(),
                r.seed.to_string(),
                fmt_f64(r.alpha),
                fmt_f64(r.discrepancy),
                fmt_f64(r.error_l1),
                r.converged.to_string(),
                r.status.as_str().to_string(),
                r.certified.to_string(),
            ]
        }),
    )
}

pub fn summary_csv(study: &RateStudy) -> String {
    table(
        &[
            "slope",
            "stderr",
            "predicted_exponent",
            "n_failed",
            "n_flagged",
            "n_records",
            "valid",
            "truncation_tail",
            "truncation_limit",
            "median_increases",
        ],
        [vec![
            fmt_opt(study.fit.map(|f| f.slope)),
            fmt_opt(study.fit.map(|f| f.stderr)),
            fmt_opt(study.predicted_exponent),
            study.n_failed.to_string(),
            study.n_flagged.to_string(),
            study.records.len().to_string(),
            study.valid.to_string(),
            fmt_f64(study.truncation_tail),
            fmt_f64(study.truncation_limit),
            study.median_increases.to_string(),
        ]],
    )
}

/// `(log10 δ, log10 error)` for every record used in the fit.
pub fn plot_csv(study: &RateStudy) -> String {
    let rows: Vec<(f64, f64)> = study
        .records
        .iter()
        .filter(|r| r.usable())
        .map(|r| (r.delta.log10(), r.error_l1.log10()))
        .collect();
    two_columns(["log10_delta", "log10_error_l1"], &rows)
}

/// `(log10 δ, log10 median error)` per grid point.
pub fn median_plot_csv(study: &RateStudy) -> String {
    let rows: Vec<(f64, f64)> = study
        .medians
        .iter()
        .map(|&(d, e)| (d.log10(), e.log10()))
        .collect();
    two_columns(["log10_delta", "log10_median_error_l1"], &rows)
}
