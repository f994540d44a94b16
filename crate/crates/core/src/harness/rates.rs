//! Expectation and high-probability rate studies.

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, SettingKind};
use super::fit::fit_rate_log;
use crate::error::Result;
use crate::rng::{seed_split, StreamRole};
use crate::schedule::{theorem_rate, Setting};
use crate::spectral::{exact_error, quantile, run_trajectory, SpectralEstimator};

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub experiment: String,
    pub alpha: f64,
    pub r: f64,
    pub s: f64,
    /// `(theta1, theta2)` online, `(theta3, theta4)` finite.
    pub exponents: (f64, f64),
    pub target_exponent: f64,
    pub log_power: i32,
    pub horizons: Vec<usize>,
    /// `errors[h][i]`: final error of replicate `i` at horizon `h`.
    pub errors: Vec<Vec<f64>>,
    /// Per-horizon mean (expectation) or quantile (high probability).
    pub statistic: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Pairwise comparison of fitted slopes across source exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationRow {
    pub r_a: f64,
    pub r_b: f64,
    pub slope_a: f64,
    pub slope_b: f64,
    pub pass: bool,
}

pub fn rate_study(cfg: &ExperimentConfig, r: f64) -> Result<RateReport> {
    let world = cfg.world(r)?;
    let horizons = cfg.horizons();
    let reps = cfg.replicates();
    let alpha = cfg.target.alpha();
    let regime = cfg.experiment.regime();
    let t_max = *horizons.last().expect("validated");

    let errors: Vec<Vec<f64>> = match cfg.setting {
        SettingKind::Online => {
            // One trajectory per replicate, observed at every horizon.
            let sched = cfg.schedule_for(r, t_max)?;
            let per_rep: Vec<Vec<f64>> = (0..reps as u64)
                .into_par_iter()
                .map(|i| {
                    let mut inputs = seed_split(cfg.seed, i, StreamRole::Input);
                    let mut noise = seed_split(cfg.seed, i, StreamRole::Noise);
                    let mut out = Vec::with_capacity(horizons.len());
                    let mut next = 0;
                    run_trajectory(
                        &world,
                        &sched,
                        t_max,
                        &mut inputs,
                        &mut noise,
                        |t, e: &SpectralEstimator| {
                            if next < horizons.len() && t == horizons[next] {
                                out.push(exact_error(&world, e, alpha));
                                next += 1;
                            }
                        },
                    )?;
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            (0..horizons.len())
                .map(|h| per_rep.iter().map(|v| v[h]).collect())
                .collect()
        }
        SettingKind::Finite => {
            // Each horizon is its own completed run; stream index h * R + i.
            let jobs: Vec<(usize, usize)> = (0..horizons.len())
                .flat_map(|h| (0..reps).map(move |i| (h, i)))
                .collect();
            let flat: Vec<f64> = jobs
                .par_iter()
                .map(|&(h, i)| {
                    let t = horizons[h];
                    let sched = cfg.schedule_for(r, t)?;
                    let idx = (h * reps + i) as u64;
                    let mut inputs = seed_split(cfg.seed, idx, StreamRole::Input);
                    let mut noise = seed_split(cfg.seed, idx, StreamRole::Noise);
                    let e = run_trajectory(&world, &sched, t, &mut inputs, &mut noise, |_, _| {})?;
                    Ok(exact_error(&world, &e, alpha))
                })
                .collect::<Result<_>>()?;
            flat.chunks(reps).map(|c| c.to_vec()).collect()
        }
    };

    let statistic: Vec<f64> = errors
        .iter()
        .map(|errs| match cfg.experiment {
            ExperimentKind::RateHighprob => quantile(errs, cfg.quantile),
            _ => errs.iter().sum::<f64>() / errs.len() as f64,
        })
        .collect();
    let setting = match cfg.setting {
        SettingKind::Online => Setting::Online,
        SettingKind::Finite => Setting::Finite { horizon: t_max },
    };
    let rate = theorem_rate(r, cfg.s, cfg.target, setting, regime);
    let (fitted_slope, slope_stderr) = fit_rate_log(&horizons, &statistic, rate.log_power)?;
    let tolerance = cfg.tolerance();
    let exponents = cfg.schedule_for(r, t_max)?.exponents();
    let experiment = if cfg.r_sweep.is_empty() {
        cfg.experiment.as_str().to_string()
    } else {
        format!("{}[r={r}]", cfg.experiment.as_str())
    };
    Ok(RateReport {
        experiment,
        alpha: alpha.value(),
        r,
        s: cfg.s,
        exponents,
        target_exponent: rate.exponent,
        log_power: rate.log_power,
        horizons,
        errors,
        statistic,
        fitted_slope,
        slope_stderr,
        tolerance,
        pass: (fitted_slope - rate.exponent).abs() <= tolerance,
    })
}

pub fn saturation(reports: &[RateReport], tolerance: f64) -> Vec<SaturationRow> {
    let mut rows = Vec::new();
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            rows.push(SaturationRow {
                r_a: a.r,
                r_b: b.r,
                slope_a: a.fitted_slope,
                slope_b: b.fitted_slope,
                pass: (a.fitted_slope - b.fitted_slope).abs() <= tolerance,
            });
        }
    }
    rows
}
