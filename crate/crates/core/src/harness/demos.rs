//! Structured-prediction and PCA demonstrations.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::dual::{mean_stderr, run, DualEstimator, DualExpansion};
use crate::error::Result;
use crate::kernel::OutputVec;
use crate::pca::{pca_sgd_run, PcaCodec, SmoothOperatorTask};
use crate::rng::{seed_split, StreamRole};
use crate::spectral::quantile;
use crate::structured::{decode, surrogate_risk_gap, ToyModel};

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredRow {
    pub horizon: usize,
    pub seed: usize,
    pub struct_gap: f64,
    pub struct_gap_stderr: f64,
    pub surrogate_rmse: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredOutcome {
    pub task: String,
    pub fisher_draws: usize,
    pub fisher_mismatches: usize,
    pub rows: Vec<StructuredRow>,
    /// `(T, median struct_gap, median surrogate_rmse)`.
    pub medians: Vec<(usize, f64, f64)>,
    /// Smallest `C` with `struct_gap <= C surrogate_rmse` on every row.
    pub comparison_constant: f64,
    pub monotone_pass: bool,
}

pub fn structured_demo(cfg: &ExperimentConfig) -> Result<StructuredOutcome> {
    let task = cfg.structured_task()?;
    let task_name = format!("{:?}", cfg.label_task).to_lowercase();
    let mut world_rng = seed_split(cfg.seed, 0, StreamRole::World);
    let model = ToyModel::new(task, cfg.toy_inputs, &mut world_rng)?;
    let truth = model.conditional_mean();
    let sampler = model.sampler();

    let mut probe = seed_split(cfg.seed, 0, StreamRole::Probe);
    let mut mismatches = 0;
    for _ in 0..cfg.fisher_draws {
        let x = crate::dual::InputSampler::sample(&sampler, &mut probe);
        if decode(model.task(), &truth.predict(&x)?)? != model.bayes_label(&x) {
            mismatches += 1;
        }
    }

    let horizons = cfg.horizons();
    let t_max = *horizons.last().expect("validated");
    let sched = cfg.schedule_for(cfg.r, t_max)?;
    let per_seed: Vec<Vec<StructuredRow>> = (0..cfg.replicates())
        .into_par_iter()
        .map(|rep| {
            let mut inputs = seed_split(cfg.seed, rep as u64, StreamRole::Input);
            let mut labels = seed_split(cfg.seed, rep as u64, StreamRole::Label);
            let stream = model.stream(t_max, &mut inputs, &mut labels);
            let mut est =
                DualEstimator::new(model.input_kernel().clone(), model.task().output_dim());
            let mut rows = Vec::with_capacity(horizons.len());
            let mut next = 0;
            for (t, (x, y)) in stream.iter().enumerate() {
                let (eta, lam) = sched.step_params(t + 1)?;
                est.sgd_step(x, y, eta, lam)?;
                if t + 1 == horizons[next] {
                    // Same evaluation inputs at every horizon.
                    let mut eval = seed_split(cfg.seed, rep as u64, StreamRole::Probe);
                    let g = surrogate_risk_gap(
                        model.task(),
                        &est,
                        &truth,
                        &sampler,
                        &mut eval,
                        cfg.eval_draws,
                    )?;
                    rows.push(StructuredRow {
                        horizon: t + 1,
                        seed: rep,
                        struct_gap: g.struct_gap,
                        struct_gap_stderr: g.struct_gap_stderr,
                        surrogate_rmse: g.surrogate_rmse,
                        ratio: g.ratio,
                    });
                    next += 1;
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let medians: Vec<(usize, f64, f64)> = horizons
        .iter()
        .enumerate()
        .map(|(h, &t)| {
            let gaps: Vec<f64> = per_seed.iter().map(|rows| rows[h].struct_gap).collect();
            let rmses: Vec<f64> = per_seed.iter().map(|rows| rows[h].surrogate_rmse).collect();
            (t, quantile(&gaps, 0.5), quantile(&rmses, 0.5))
        })
        .collect();
    let rows: Vec<StructuredRow> = per_seed.into_iter().flatten().collect();
    let comparison_constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let median_at = |t: usize| {
        medians
            .iter()
            .find(|m| m.0 == t)
            .map(|m| m.1)
            .expect("validated")
    };
    let monotone_pass = cfg
        .monotone_horizons
        .windows(2)
        .all(|w| median_at(w[1]) <= (1.0 + cfg.monotone_slack) * median_at(w[0]));
    Ok(StructuredOutcome {
        task: task_name,
        fisher_draws: cfg.fisher_draws,
        fisher_mismatches: mismatches,
        rows,
        medians,
        comparison_constant,
        monotone_pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaRow {
    pub d_x: usize,
    pub d_y: usize,
    /// Mean squared training reconstruction error of the input codec.
    pub recon_error_x: f64,
    pub trailing_sum_x: f64,
    pub recon_error_y: f64,
    pub trailing_sum_y: f64,
    pub mse_pca: f64,
    pub mse_plain: f64,
    /// Standard error of the paired per-input difference.
    pub mse_stderr: f64,
    /// Coefficients, anchors and test predictions equal plain SGD bit for bit.
    pub matches_plain_bitwise: bool,
    pub bound_holds: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Reduced-rank and full-rank PCA pipelines against plain dual SGD on the
/// smooth-operator task.
pub fn pca_demo(cfg: &ExperimentConfig) -> Result<Vec<PcaRow>> {
    let task = SmoothOperatorTask::new(cfg.grid)?;
    let n_train = cfg.horizons()[0];
    let mut inputs = seed_split(cfg.seed, 0, StreamRole::Input);
    let mut noise = seed_split(cfg.seed, 0, StreamRole::Noise);
    let train = task.sample(n_train, cfg.pca_noise, &mut inputs, &mut noise);
    let mut test_inputs = seed_split(cfg.seed, 1, StreamRole::Input);
    let test: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_test)
        .map(|_| {
            let x = task.sample_input(&mut test_inputs);
            let y = task.apply(&x);
            (x, y)
        })
        .collect();
    let kernel = cfg.radial_kernel()?;
    let sched = cfg.schedule_for(cfg.r, n_train)?;

    let raw: Vec<(Vec<f64>, OutputVec)> = train
        .iter()
        .map(|(x, y)| Ok((x.clone(), OutputVec::new(y.clone())?)))
        .collect::<Result<_>>()?;
    let plain = run(kernel.clone(), cfg.grid, raw, &sched)?;
    let plain_pred: Vec<Vec<f64>> = test
        .iter()
        .map(|(x, _)| Ok(plain.predict(x)?.into_inner()))
        .collect::<Result<_>>()?;
    let plain_err: Vec<f64> = plain_pred
        .iter()
        .zip(&test)
        .map(|(p, (_, y))| sq_dist(p, y))
        .collect();
    let mse_plain = plain_err.iter().sum::<f64>() / plain_err.len() as f64;

    let mut rows = Vec::new();
    let mut ranks = vec![(cfg.rank_x, cfg.rank_y)];
    if (cfg.rank_x, cfg.rank_y) != (cfg.grid, cfg.grid) {
        ranks.push((cfg.grid, cfg.grid));
    }
    for (d_x, d_y) in ranks {
        let model = pca_sgd_run(&train, d_x, d_y, kernel.clone(), &sched)?;
        let recon_error_x = mean_recon(&model.codec_x, train.iter().map(|p| &p.0))?;
        let recon_error_y = mean_recon(&model.codec_y, train.iter().map(|p| &p.1))?;
        let pred: Vec<Vec<f64>> = test
            .iter()
            .map(|(x, _)| model.predict(x))
            .collect::<Result<_>>()?;
        let errs: Vec<f64> = pred
            .iter()
            .zip(&test)
            .map(|(p, (_, y))| sq_dist(p, y))
            .collect();
        let diffs: Vec<f64> = errs.iter().zip(&plain_err).map(|(a, b)| a - b).collect();
        let mse_pca = errs.iter().sum::<f64>() / errs.len() as f64;
        let (_, mse_stderr) = mean_stderr(&diffs);
        let bound = mse_plain
            + model.codec_x.trailing_sum()
            + model.codec_y.trailing_sum()
            + 3.0 * mse_stderr;
        let matches_plain_bitwise = same_bits(&model.estimator, &plain)
            && pred
                .iter()
                .zip(&plain_pred)
                .all(|(a, b)| bits(a) == bits(b));
        rows.push(PcaRow {
            d_x,
            d_y,
            recon_error_x,
            trailing_sum_x: model.codec_x.trailing_sum(),
            recon_error_y,
            trailing_sum_y: model.codec_y.trailing_sum(),
            mse_pca,
            mse_plain,
            mse_stderr,
            matches_plain_bitwise,
            bound_holds: mse_pca <= bound,
        });
    }
    Ok(rows)
}

/// Mean squared distance between each vector and its codec projection.
fn mean_recon<'a>(
    codec: &PcaCodec,
    vs: impl ExactSizeIterator<Item = &'a Vec<f64>>,
) -> Result<f64> {
    let n = vs.len() as f64;
    let mut total = 0.0;
    for v in vs {
        total += sq_dist(v, &codec.project(v)?);
    }
    Ok(total / n)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn same_bits(a: &DualEstimator, b: &DualEstimator) -> bool {
    a.len() == b.len()
        && a.scale().to_bits() == b.scale().to_bits()
        && a.anchors()
            .iter()
            .zip(b.anchors())
            .all(|(x, y)| bits(x) == bits(y))
        && a.coefficients()
            .iter()
            .zip(b.coefficients().iter())
            .all(|(x, y)| bits(x.as_slice()) == bits(y.as_slice()))
}
