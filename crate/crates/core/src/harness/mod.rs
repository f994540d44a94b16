//! Experiment orchestration and CSV persistence.
//!
//! [`evaluate`] runs an experiment in memory; [`run_experiment`] also writes
//! its CSV files under `cfg.output`. Both are deterministic given the config.

mod audits;
mod config;
mod demos;
mod fit;
mod rates;

use std::fs;
use std::path::{Path, PathBuf};

pub use audits::{
    crosscheck, decomposition_audit, lemma_audit, CrossRow, DecompositionRow, LemmaRow,
};
pub use config::{
    ExperimentConfig, ExperimentKind, LabelTask, NoiseKind, RadialKernel, ScheduleSource,
    SettingKind,
};
pub use demos::{pca_demo, structured_demo, PcaRow, StructuredOutcome, StructuredRow};
pub use fit::{fit_rate, fit_rate_log};
pub use rates::{rate_study, saturation, RateReport, SaturationRow};

use crate::error::Result;

/// Largest primal/dual discrepancy accepted by the crosscheck.
pub const CROSSCHECK_TOLERANCE: f64 = 1e-8;
/// Accepted gap between training reconstruction error and trailing eigenvalue sum.
pub const PCA_IDENTITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Rates {
        reports: Vec<RateReport>,
        saturation: Vec<SaturationRow>,
    },
    Decomposition(Vec<DecompositionRow>),
    Lemmas(Vec<LemmaRow>),
    Structured(StructuredOutcome),
    Pca(Vec<PcaRow>),
    Crosscheck(Vec<CrossRow>),
}

impl Outcome {
    /// One `(name, pass)` pair per headline check.
    pub fn checks(&self) -> Vec<(String, bool)> {
        match self {
            Outcome::Rates {
                reports,
                saturation,
            } => {
                let mut out: Vec<(String, bool)> = reports
                    .iter()
                    .map(|r| (r.experiment.clone(), r.pass))
                    .collect();
                if !saturation.is_empty() {
                    out.push(("saturation".into(), saturation.iter().all(|s| s.pass)));
                }
                out
            }
            Outcome::Decomposition(rows) => vec![
                (
                    "decomposition-bound".into(),
                    rows.iter().all(|r| r.bound_holds),
                ),
                (
                    "finite-drift-zero".into(),
                    rows.iter().filter(|r| r.finite).all(|r| r.t3 == 0.0),
                ),
            ],
            Outcome::Lemmas(rows) => vec![("lemma-audit".into(), rows.iter().all(|r| r.holds))],
            Outcome::Structured(s) => vec![
                ("fisher-consistency".into(), s.fisher_mismatches == 0),
                ("median-gap-monotone".into(), s.monotone_pass),
            ],
            Outcome::Pca(rows) => vec![
                (
                    "reconstruction-identity".into(),
                    rows.iter().all(|r| {
                        (r.recon_error_x - r.trailing_sum_x).abs() <= PCA_IDENTITY_TOLERANCE
                            && (r.recon_error_y - r.trailing_sum_y).abs() <= PCA_IDENTITY_TOLERANCE
                    }),
                ),
                {
                    let full: Vec<&PcaRow> = rows
                        .iter()
                        .filter(|r| r.trailing_sum_x == 0.0 && r.trailing_sum_y == 0.0)
                        .collect();
                    (
                        "full-rank-bitwise".into(),
                        !full.is_empty() && full.iter().all(|r| r.matches_plain_bitwise),
                    )
                },
                ("head-to-head".into(), rows.iter().all(|r| r.bound_holds)),
            ],
            Outcome::Crosscheck(rows) => {
                vec![(
                    "dual-vs-spectral".into(),
                    rows.iter()
                        .all(|r| r.max_discrepancy <= CROSSCHECK_TOLERANCE),
                )]
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.1)
    }
}

/// Validates `cfg` and runs it without touching the file system.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        ExperimentKind::RateExpectation | ExperimentKind::RateHighprob => {
            let reports = cfg
                .r_values()
                .into_iter()
                .map(|r| rate_study(cfg, r))
                .collect::<Result<Vec<_>>>()?;
            let sat = if reports.len() > 1 {
                saturation(&reports, cfg.saturation_tolerance)
            } else {
                Vec::new()
            };
            Outcome::Rates {
                reports,
                saturation: sat,
            }
        }
        ExperimentKind::Decomposition => Outcome::Decomposition(decomposition_audit(cfg)?),
        ExperimentKind::LemmaAudit => Outcome::Lemmas(lemma_audit(cfg)?),
        ExperimentKind::StructuredDemo => Outcome::Structured(structured_demo(cfg)?),
        ExperimentKind::PcaDemo => Outcome::Pca(pca_demo(cfg)?),
        ExperimentKind::DualVsSpectral => Outcome::Crosscheck(crosscheck(cfg)?),
    })
}

/// Runs `cfg` and writes its CSV files; returns the outcome and the paths written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Outcome, Vec<PathBuf>)> {
    let outcome = evaluate(cfg)?;
    let files = write_outputs(cfg, &outcome)?;
    Ok((outcome, files))
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

const SUMMARY_HEADER: [&str; 5] = [
    "experiment",
    "target_exponent",
    "fitted_slope",
    "slope_stderr",
    "pass",
];

pub fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>> {
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir)?;
    let mut files = vec![];
    let check_rows = |checks: Vec<(String, bool)>| -> Vec<Vec<String>> {
        checks
            .into_iter()
            .map(|(n, p)| {
                vec![
                    n,
                    String::new(),
                    String::new(),
                    String::new(),
                    p.to_string(),
                ]
            })
            .collect()
    };
    match outcome {
        Outcome::Rates {
            reports,
            saturation,
        } => {
            let mut rows = Vec::new();
            for rep in reports {
                for (h, errs) in rep.errors.iter().enumerate() {
                    for (i, e) in errs.iter().enumerate() {
                        rows.push(vec![
                            rep.experiment.clone(),
                            rep.alpha.to_string(),
                            rep.r.to_string(),
                            rep.s.to_string(),
                            rep.exponents.0.to_string(),
                            rep.exponents.1.to_string(),
                            rep.horizons[h].to_string(),
                            i.to_string(),
                            f(*e),
                        ]);
                    }
                }
            }
            files.push(write_csv(
                dir,
                "rates.csv",
                &[
                    "experiment",
                    "alpha",
                    "r",
                    "s",
                    "theta1",
                    "theta2",
                    "T",
                    "replicate",
                    "error",
                ],
                rows,
            )?);
            let mut summary: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        r.experiment.clone(),
                        r.target_exponent.to_string(),
                        r.fitted_slope.to_string(),
                        r.slope_stderr.to_string(),
                        r.pass.to_string(),
                    ]
                })
                .collect();
            if !saturation.is_empty() {
                files.push(write_csv(
                    dir,
                    "saturation.csv",
                    &["r_a", "r_b", "slope_a", "slope_b", "difference", "pass"],
                    saturation
                        .iter()
                        .map(|s| {
                            vec![
                                s.r_a.to_string(),
                                s.r_b.to_string(),
                                s.slope_a.to_string(),
                                s.slope_b.to_string(),
                                (s.slope_a - s.slope_b).abs().to_string(),
                                s.pass.to_string(),
                            ]
                        })
                        .collect(),
                )?);
                summary.extend(check_rows(vec![(
                    "saturation".into(),
                    saturation.iter().all(|s| s.pass),
                )]));
            }
            files.push(write_csv(dir, "summary.csv", &SUMMARY_HEADER, summary)?);
        }
        Outcome::Decomposition(rows) => {
            files.push(write_csv(
                dir,
                "decomposition.csv",
                &[
                    "T",
                    "alpha",
                    "T1",
                    "T2",
                    "T3",
                    "T4",
                    "mc_error",
                    "mc_stderr",
                    "bound_holds",
                ],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.horizon.to_string(),
                            r.alpha.to_string(),
                            f(r.t1),
                            f(r.t2),
                            f(r.t3),
                            f(r.t4),
                            f(r.mc_error),
                            f(r.mc_stderr),
                            r.bound_holds.to_string(),
                        ]
                    })
                    .collect(),
            )?);
            files.push(write_csv(
                dir,
                "decomposition_configs.csv",
                &["config", "setting", "d", "T", "alpha", "M"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.config.to_string(),
                            if r.finite { "finite" } else { "online" }.to_string(),
                            r.d.to_string(),
                            r.horizon.to_string(),
                            r.alpha.to_string(),
                            f(r.m),
                        ]
                    })
                    .collect(),
            )?);
        }
        Outcome::Lemmas(rows) => {
            files.push(write_csv(
                dir,
                "lemmas.csv",
                &["bound_id", "trial", "lhs", "rhs", "holds"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.bound_id.to_string(),
                            r.trial.to_string(),
                            f(r.lhs),
                            f(r.rhs),
                            r.holds.to_string(),
                        ]
                    })
                    .collect(),
            )?);
        }
        Outcome::Structured(s) => {
            files.push(write_csv(
                dir,
                "structured.csv",
                &[
                    "task",
                    "T",
                    "seed",
                    "struct_gap",
                    "struct_gap_stderr",
                    "surrogate_rmse",
                    "ratio",
                ],
                s.rows
                    .iter()
                    .map(|r| {
                        vec![
                            s.task.clone(),
                            r.horizon.to_string(),
                            r.seed.to_string(),
                            f(r.struct_gap),
                            f(r.struct_gap_stderr),
                            f(r.surrogate_rmse),
                            f(r.ratio),
                        ]
                    })
                    .collect(),
            )?);
            files.push(write_csv(
                dir,
                "structured_medians.csv",
                &["task", "T", "median_struct_gap", "median_surrogate_rmse"],
                s.medians
                    .iter()
                    .map(|(t, g, r)| vec![s.task.clone(), t.to_string(), f(*g), f(*r)])
                    .collect(),
            )?);
            files.push(write_csv(
                dir,
                "structured_summary.csv",
                &[
                    "task",
                    "fisher_draws",
                    "fisher_mismatches",
                    "comparison_constant",
                    "monotone_pass",
                ],
                vec![vec![
                    s.task.clone(),
                    s.fisher_draws.to_string(),
                    s.fisher_mismatches.to_string(),
                    f(s.comparison_constant),
                    s.monotone_pass.to_string(),
                ]],
            )?);
        }
        Outcome::Pca(rows) => {
            files.push(write_csv(
                dir,
                "pca.csv",
                &[
                    "d_x",
                    "d_y",
                    "recon_error_x",
                    "trailing_sum_x",
                    "recon_error_y",
                    "trailing_sum_y",
                    "mse_pca",
                    "mse_plain",
                    "mse_stderr",
                    "matches_plain_bitwise",
                    "bound_holds",
                ],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.d_x.to_string(),
                            r.d_y.to_string(),
                            f(r.recon_error_x),
                            f(r.trailing_sum_x),
                            f(r.recon_error_y),
                            f(r.trailing_sum_y),
                            f(r.mse_pca),
                            f(r.mse_plain),
                            f(r.mse_stderr),
                            r.matches_plain_bitwise.to_string(),
                            r.bound_holds.to_string(),
                        ]
                    })
                    .collect(),
            )?);
        }
        Outcome::Crosscheck(rows) => {
            files.push(write_csv(
                dir,
                "crosscheck.csv",
                &["stream", "d", "length", "max_discrepancy"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.stream.to_string(),
                            r.d.to_string(),
                            r.length.to_string(),
                            f(r.max_discrepancy),
                        ]
                    })
                    .collect(),
            )?);
        }
    }
    if !matches!(outcome, Outcome::Rates { .. }) {
        files.push(write_csv(
            dir,
            "summary.csv",
            &SUMMARY_HEADER,
            check_rows(outcome.checks()),
        )?);
    }
    Ok(files)
}
