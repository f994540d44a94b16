//! Randomized checks: error decomposition, lemma bounds, primal/dual agreement.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::dual::{mean_stderr, DualEstimator, DualExpansion};
use crate::error::Result;
use crate::kernel::OutputVec;
use crate::rng::{seed_split, StreamRole};
use crate::schedule::{Alpha, FiniteHorizonSchedule, OnlineSchedule, Schedule};
use crate::spectral::{
    decomposition_terms, exact_error, lemma_oracle, BoundId, LemmaParams, SpectralEstimator,
    SpectralWorld, WorldConfig, XiLaw,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub config: usize,
    pub finite: bool,
    pub d: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    /// Largest replicate-mean `exact_error(1/2)` over `H_1 .. H_T`.
    pub m: f64,
    pub mc_error: f64,
    pub mc_stderr: f64,
    pub bound_holds: bool,
}

impl DecompositionRow {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t4
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub bound_id: BoundId,
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossRow {
    pub stream: usize,
    pub d: usize,
    pub length: usize,
    pub max_discrepancy: f64,
}

/// Smallest integer `t0 >= min` with `(t0 + 1)^theta1 >= eta_bar (kappa^2 + lambda_bar)`.
fn step_bound_t0(theta1: f64, eta_bar: f64, lambda_bar: f64, kappa_sq: f64, min: f64) -> f64 {
    let need = (eta_bar * (kappa_sq + lambda_bar)).powf(1.0 / theta1) - 1.0;
    let mut t0 = need.max(min).ceil().max(0.0);
    while (t0 + 1.0).powf(theta1) < eta_bar * (kappa_sq + lambda_bar) {
        t0 += 1.0;
    }
    t0
}

fn random_online(
    rng: &mut ChaCha8Rng,
    kappa_sq: f64,
    theta_sum_one: bool,
    min_t0: f64,
) -> Schedule {
    let theta1 = rng.gen_range(0.05..0.95);
    let theta2 = if theta_sum_one {
        1.0 - theta1
    } else {
        rng.gen_range(0.05..0.95)
    };
    let lambda_bar = rng.gen_range(0.01..2.0);
    // Caps eta_bar (kappa^2 + lambda_bar) so the step-bound t0 stays below ~500.
    let reach = rng.gen_range(0.1..500f64.powf(theta1).min(4.0));
    let eta_bar = reach / (kappa_sq + lambda_bar);
    let t0 =
        step_bound_t0(theta1, eta_bar, lambda_bar, kappa_sq, min_t0) + rng.gen_range(0..4) as f64;
    Schedule::Online(
        OnlineSchedule::new(theta1, theta2, eta_bar, lambda_bar, t0).expect("valid ranges"),
    )
}

fn random_finite(rng: &mut ChaCha8Rng, kappa_sq: f64, horizon: usize) -> Schedule {
    let theta3 = rng.gen_range(0.05..0.95);
    let theta4 = rng.gen_range(0.05..1.5);
    let lambda1 = rng.gen_range(0.01..1.0);
    let eta1 = rng.gen_range(0.05..1.0) / (kappa_sq + lambda1);
    Schedule::Finite(
        FiniteHorizonSchedule::new(theta3, theta4, eta1, lambda1, horizon).expect("valid ranges"),
    )
}

fn random_world(
    rng: &mut ChaCha8Rng,
    max_d: usize,
    d_y: usize,
    sigma: f64,
    seed: u64,
) -> Result<SpectralWorld> {
    SpectralWorld::new(&WorldConfig {
        d: rng.gen_range(1..=max_d),
        d_y,
        s: rng.gen_range(0.3..=1.0),
        r: rng.gen_range(0.25..1.5),
        sigma,
        xi_law: XiLaw::Rademacher,
        noise: crate::spectral::NoiseMode::Gaussian,
        kappa_sq: 1.0,
        u1: rng.gen_range(0.1..1.0),
        seed,
    })
}

/// Random worlds and valid schedules; the replicate-mean final error is
/// compared against the four decomposition terms.
pub fn decomposition_audit(cfg: &ExperimentConfig) -> Result<Vec<DecompositionRow>> {
    let reps = cfg.replicates();
    (0..cfg.trials())
        .map(|c| {
            let mut rng = seed_split(cfg.seed, c as u64, StreamRole::Config);
            let d_y = rng.gen_range(1..=4);
            let sigma = rng.gen_range(0.1..1.0);
            let world = random_world(&mut rng, 50, d_y, sigma, cfg.seed.wrapping_add(c as u64))?;
            let horizon = rng.gen_range(10..=500);
            let finite = rng.gen_bool(0.5);
            let sched = if finite {
                random_finite(&mut rng, 1.0, horizon)
            } else {
                {
                    let sum_one = rng.gen_bool(0.5);
                    random_online(&mut rng, 1.0, sum_one, 0.0)
                }
            };
            let alpha = if rng.gen_bool(0.5) {
                Alpha::Half
            } else {
                Alpha::Zero
            };

            let runs: Vec<(Vec<f64>, f64)> = (0..reps as u64)
                .into_par_iter()
                .map(|i| {
                    let idx = (c as u64) * reps as u64 + i;
                    let mut inputs = seed_split(cfg.seed, idx, StreamRole::Input);
                    let mut noise = seed_split(cfg.seed, idx, StreamRole::Noise);
                    let mut pred = Vec::with_capacity(horizon);
                    let mut e = SpectralEstimator::new(&world);
                    let mut phi = vec![0.0; world.d()];
                    let mut y = vec![0.0; world.d_y()];
                    for t in 1..=horizon {
                        pred.push(exact_error(&world, &e, Alpha::Half));
                        let (eta, lam) = sched.step_params(t)?;
                        world.sample_into(&mut inputs, &mut noise, &mut phi, &mut y);
                        e.spectral_step(&phi, &y, eta, lam);
                    }
                    Ok((pred, exact_error(&world, &e, alpha)))
                })
                .collect::<Result<_>>()?;
            let m = (0..horizon)
                .map(|t| runs.iter().map(|r| r.0[t]).sum::<f64>() / reps as f64)
                .fold(0.0, f64::max);
            let finals: Vec<f64> = runs.iter().map(|r| r.1).collect();
            let (mc_error, mc_stderr) = mean_stderr(&finals);
            let terms = decomposition_terms(&world, &sched, horizon, alpha, m)?;
            Ok(DecompositionRow {
                config: c,
                finite,
                d: world.d(),
                horizon,
                alpha: alpha.value(),
                t1: terms.t1,
                t2: terms.t2,
                t3: terms.t3,
                t4: terms.t4,
                m,
                mc_error,
                mc_stderr,
                bound_holds: mc_error <= terms.total() + 3.0 * mc_stderr,
            })
        })
        .collect()
}

/// One row per `(bound, trial)` on random worlds and valid schedules.
pub fn lemma_audit(cfg: &ExperimentConfig) -> Result<Vec<LemmaRow>> {
    let per_trial: Vec<Vec<LemmaRow>> = (0..cfg.trials())
        .into_par_iter()
        .map(|trial| {
            let mut rng = seed_split(cfg.seed, trial as u64, StreamRole::Config);
            let world = random_world(&mut rng, 50, 1, 0.0, cfg.seed.wrapping_add(trial as u64))?;
            let k2 = world.kappa_sq();
            let mut rows = Vec::with_capacity(BoundId::ALL.len());
            for id in BoundId::ALL {
                let (sched, p) = lemma_case(&mut rng, id, k2);
                let out = lemma_oracle(&world, &sched, id, p)?;
                rows.push(LemmaRow {
                    bound_id: id,
                    trial,
                    lhs: out.lhs,
                    rhs: out.rhs,
                    holds: out.holds,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

fn lemma_case(rng: &mut ChaCha8Rng, id: BoundId, k2: f64) -> (Schedule, LemmaParams) {
    let beta = rng.gen_range(0.0..3.0);
    match id {
        BoundId::L1_1 | BoundId::L1_2 | BoundId::L1_3 | BoundId::L2_1 | BoundId::L2_2 => {
            let (sched, max_m) = if rng.gen_bool(0.7) {
                (
                    {
                        let sum_one = rng.gen_bool(0.5);
                        random_online(rng, k2, sum_one, 0.0)
                    },
                    2000,
                )
            } else {
                let h = rng.gen_range(2..=2000);
                (random_finite(rng, k2, h), h)
            };
            let m = rng.gen_range(1..=max_m);
            let l = rng.gen_range(1..=m);
            (
                sched,
                LemmaParams {
                    l,
                    m,
                    beta,
                    theta: 0.0,
                    v: 0.0,
                },
            )
        }
        BoundId::L2_3 | BoundId::L2_4 => {
            if rng.gen_bool(0.7) {
                let sched = {
                    let sum_one = rng.gen_bool(0.5);
                    random_online(rng, k2, sum_one, 0.0)
                };
                let t0 = sched.unified().t0 as usize;
                let m = t0 + rng.gen_range(1..=2000);
                (
                    sched,
                    LemmaParams {
                        l: 1,
                        m,
                        beta,
                        theta: 0.0,
                        v: 0.0,
                    },
                )
            } else {
                let h = rng.gen_range(2..=2000);
                (
                    random_finite(rng, k2, h),
                    LemmaParams {
                        l: 1,
                        m: h,
                        beta,
                        theta: 0.0,
                        v: 0.0,
                    },
                )
            }
        }
        BoundId::PA3 => {
            let sched = random_online(rng, k2, true, 1.0);
            let q = sched.unified();
            let theta = rng.gen_range(0.0..(1.0 + q.eta_bar * q.lambda_bar).min(2.0));
            let v = match rng.gen_range(0..3) {
                0 => rng.gen_range(0.05..0.95),
                1 => 1.0,
                _ => rng.gen_range(1.05..3.0),
            };
            let m = q.t0 as usize + rng.gen_range(1..=2000);
            (
                sched,
                LemmaParams {
                    l: 1,
                    m,
                    beta,
                    theta,
                    v,
                },
            )
        }
        BoundId::P512 => {
            let h = rng.gen_range(2..=2000);
            let v = match rng.gen_range(0..4) {
                0 => 0.0,
                1 => rng.gen_range(0.05..0.95),
                2 => 1.0,
                _ => rng.gen_range(1.05..3.0),
            };
            (
                random_finite(rng, k2, h),
                LemmaParams {
                    l: 1,
                    m: h,
                    beta,
                    theta: 0.0,
                    v,
                },
            )
        }
    }
}

/// Dual SGD with the world's explicit kernel against the spectral iterate on
/// the same stream. The discrepancy is the largest absolute difference over
/// prediction coordinates (training inputs plus fresh queries) and over the
/// entries of the recovered operator matrix.
pub fn crosscheck(cfg: &ExperimentConfig) -> Result<Vec<CrossRow>> {
    (0..cfg.trials())
        .into_par_iter()
        .map(|i| {
            let mut rng = seed_split(cfg.seed, i as u64, StreamRole::Config);
            let d_y = rng.gen_range(1..=4);
            let sigma = rng.gen_range(0.0..1.0);
            let world = random_world(&mut rng, 20, d_y, sigma, cfg.seed.wrapping_add(i as u64))?;
            let length = rng.gen_range(1..=cfg.max_length);
            let sched = if length >= 2 && rng.gen_bool(0.5) {
                random_finite(&mut rng, 1.0, length)
            } else {
                {
                    let sum_one = rng.gen_bool(0.5);
                    random_online(&mut rng, 1.0, sum_one, 0.0)
                }
            };
            let mut inputs = seed_split(cfg.seed, i as u64, StreamRole::Input);
            let mut noise = seed_split(cfg.seed, i as u64, StreamRole::Noise);
            let mut spec = SpectralEstimator::new(&world);
            let mut dual = DualEstimator::new(world.explicit_kernel(), d_y);
            let mut seen = Vec::with_capacity(length);
            for t in 1..=length {
                let (eta, lam) = sched.step_params(t)?;
                let (phi, y) = world.sample(&mut inputs, &mut noise);
                let x = world.xi_from_phi(&phi);
                dual.sgd_step(&x, &OutputVec::new(y.clone())?, eta, lam)?;
                spec.spectral_step(&phi, &y, eta, lam);
                seen.push((x, phi));
            }
            let mut probe = seed_split(cfg.seed, i as u64, StreamRole::Probe);
            for _ in 0..5 {
                let (phi, _) = world.sample(&mut probe, &mut noise);
                seen.push((world.xi_from_phi(&phi), phi));
            }
            let mut worst: f64 = 0.0;
            for (x, phi) in &seen {
                let a = dual.predict(x)?;
                let b = spec.predict(phi);
                for (u, v) in a.as_slice().iter().zip(&b) {
                    worst = worst.max((u - v).abs());
                }
            }
            let h = world.dual_to_primal(&dual)?;
            for (u, v) in h.iter().zip(spec.h().iter()) {
                worst = worst.max((u - v).abs());
            }
            Ok(CrossRow {
                stream: i,
                d: world.d(),
                length,
                max_discrepancy: worst,
            })
        })
        .collect()
}
