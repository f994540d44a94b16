//! Diagonal ground-truth universe.
//!
//! Coordinates are taken in the eigenbasis of the input covariance `C`, so
//! `C = diag(u)`, `phi(x)_k = sqrt(u_k) xi_k` and the target is the
//! `d_Y x d` matrix `H_dag = S_dag diag(u)^r`. Every error functional and
//! every operator product below is then an explicit finite sum.

mod lemmas;

pub use lemmas::{lemma_oracle, BoundId, LemmaOutcome, LemmaParams};

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{DualEstimator, DualExpansion, GroundTruthDual};
use crate::error::{check_dim, Error, Result};
use crate::kernel::{OutputVec, ScalarKernel};
use crate::rng::{seed_split, StreamRole};
use crate::schedule::{Alpha, Schedule};

/// Fourth-moment constant for the error decomposition.
///
/// With independent, centered, unit-variance coordinates,
/// `E<phi, f>^4 = sum a_k^4 (E xi^4 - 3) + 3 (sum a_k^2)^2`, so the sharp
/// constant is `max(E xi^4, 3)`. For Rademacher coordinates that is 3.
pub const RADEMACHER_MOMENT_CONSTANT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiLaw {
    Rademacher,
    /// Unbounded inputs: breaks the almost-sure kernel bound.
    Gaussian,
}

impl XiLaw {
    pub fn fourth_moment(self) -> f64 {
        match self {
            XiLaw::Rademacher => 1.0,
            XiLaw::Gaussian => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    /// `eps ~ N(0, sigma^2 / d_Y I)`.
    Gaussian,
    /// Each coordinate of the Gaussian noise truncated to `clip` standard
    /// deviations, which bounds `|y|`.
    Bounded { clip: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub d: usize,
    pub d_y: usize,
    pub s: f64,
    pub r: f64,
    pub sigma: f64,
    pub xi_law: XiLaw,
    pub noise: NoiseMode,
    pub kappa_sq: f64,
    pub u1: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            d: 200,
            d_y: 4,
            s: 1.0,
            r: 0.5,
            sigma: 1.0,
            xi_law: XiLaw::Rademacher,
            noise: NoiseMode::Gaussian,
            kappa_sq: 1.0,
            u1: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralWorld {
    u: Vec<f64>,
    sqrt_u: Vec<f64>,
    s: f64,
    r: f64,
    sdag: DMatrix<f64>,
    hdag: DMatrix<f64>,
    sigma: f64,
    xi_law: XiLaw,
    noise: NoiseMode,
    kappa_sq: f64,
}

impl SpectralWorld {
    /// Eigenvalues `u1 k^(-1/s)`, rescaled so that their sum is at most
    /// `kappa^2`, and a Gaussian source `S_dag` with entries of variance
    /// `1 / (d d_Y)`.
    pub fn new(cfg: &WorldConfig) -> Result<Self> {
        if cfg.d == 0 || cfg.d_y == 0 {
            return Err(Error::Domain("world dimensions must be positive".into()));
        }
        if !(cfg.u1 > 0.0) {
            return Err(Error::Domain(format!(
                "u1 must be positive, got {}",
                cfg.u1
            )));
        }
        let mut u: Vec<f64> = (1..=cfg.d)
            .map(|k| cfg.u1 * (k as f64).powf(-1.0 / cfg.s))
            .collect();
        let total: f64 = u.iter().sum();
        if total > cfg.kappa_sq {
            let f = cfg.kappa_sq / total;
            u.iter_mut().for_each(|v| *v *= f);
        }
        let mut rng = seed_split(cfg.seed, 0, StreamRole::World);
        let scale = 1.0 / ((cfg.d * cfg.d_y) as f64).sqrt();
        let sdag = DMatrix::from_fn(cfg.d_y, cfg.d, |_, _| {
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        Self::from_parts(
            u,
            sdag,
            cfg.r,
            cfg.s,
            cfg.sigma,
            cfg.xi_law,
            cfg.noise,
            cfg.kappa_sq,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        u: Vec<f64>,
        sdag: DMatrix<f64>,
        r: f64,
        s: f64,
        sigma: f64,
        xi_law: XiLaw,
        noise: NoiseMode,
        kappa_sq: f64,
    ) -> Result<Self> {
        if u.is_empty() || u.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(
                "eigenvalues must be positive and finite".into(),
            ));
        }
        if u.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Domain("eigenvalues must be non-increasing".into()));
        }
        let total: f64 = u.iter().sum();
        if total > kappa_sq * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "eigenvalue sum {total} exceeds kappa^2 = {kappa_sq}"
            )));
        }
        if !(r > 0.0) || !(s > 0.0 && s <= 1.0) || !(sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "need r > 0, s in (0, 1], sigma >= 0; got {r}, {s}, {sigma}"
            )));
        }
        if let NoiseMode::Bounded { clip } = noise {
            if !(clip > 0.0) {
                return Err(Error::Domain(format!(
                    "noise clip must be positive, got {clip}"
                )));
            }
        }
        check_dim(u.len(), sdag.ncols())?;
        if sdag.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("source coefficients must be finite".into()));
        }
        let mut hdag = sdag.clone();
        for (k, uk) in u.iter().enumerate() {
            let f = uk.powf(r);
            hdag.column_mut(k).iter_mut().for_each(|v| *v *= f);
        }
        let sqrt_u = u.iter().map(|v| v.sqrt()).collect();
        Ok(SpectralWorld {
            u,
            sqrt_u,
            s,
            r,
            sdag,
            hdag,
            sigma,
            xi_law,
            noise,
            kappa_sq,
        })
    }

    pub fn d(&self) -> usize {
        self.u.len()
    }
    pub fn d_y(&self) -> usize {
        self.hdag.nrows()
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn xi_law(&self) -> XiLaw {
        self.xi_law
    }
    pub fn noise(&self) -> NoiseMode {
        self.noise
    }
    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }
    pub fn sdag(&self) -> &DMatrix<f64> {
        &self.sdag
    }
    pub fn hdag(&self) -> &DMatrix<f64> {
        &self.hdag
    }

    /// `max(E xi^4, 3)`.
    pub fn moment_constant(&self) -> f64 {
        self.xi_law.fourth_moment().max(RADEMACHER_MOMENT_CONSTANT)
    }

    /// `E |eps|^2`.
    pub fn noise_variance(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        match self.noise {
            NoiseMode::Gaussian => s2,
            NoiseMode::Bounded { clip } => s2 * truncated_normal_variance(clip),
        }
    }

    /// Almost-sure bound on `|y|`; infinite when inputs or noise are unbounded.
    pub fn m_rho(&self) -> f64 {
        let signal = match self.xi_law {
            XiLaw::Rademacher => (0..self.d())
                .map(|k| self.sqrt_u[k] * self.hdag.column(k).norm())
                .sum(),
            XiLaw::Gaussian => f64::INFINITY,
        };
        let noise = match self.noise {
            NoiseMode::Gaussian if self.sigma > 0.0 => f64::INFINITY,
            NoiseMode::Gaussian => 0.0,
            NoiseMode::Bounded { clip } => self.sigma * clip,
        };
        signal + noise
    }

    /// Draws `phi(x)` into `phi` using `inputs`, and `y` into `y` using `noise`.
    pub fn sample_into(
        &self,
        inputs: &mut dyn RngCore,
        noise: &mut dyn RngCore,
        phi: &mut [f64],
        y: &mut [f64],
    ) {
        let d = self.d();
        match self.xi_law {
            XiLaw::Rademacher => {
                let mut k = 0;
                while k < d {
                    let bits = inputs.next_u64();
                    for b in 0..64.min(d - k) {
                        let sign = if (bits >> b) & 1 == 1 { 1.0 } else { -1.0 };
                        phi[k + b] = sign * self.sqrt_u[k + b];
                    }
                    k += 64;
                }
            }
            XiLaw::Gaussian => {
                for (p, s) in phi.iter_mut().zip(&self.sqrt_u) {
                    *p = s * inputs.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let d_y = self.d_y();
        let h = self.hdag.as_slice();
        y.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..d {
            let p = phi[k];
            for j in 0..d_y {
                y[j] += h[k * d_y + j] * p;
            }
        }
        let noise_scale = self.sigma / (d_y as f64).sqrt();
        if noise_scale > 0.0 {
            for v in y.iter_mut() {
                let z = match self.noise {
                    NoiseMode::Gaussian => noise.sample::<f64, _>(StandardNormal),
                    NoiseMode::Bounded { clip } => loop {
                        let z: f64 = noise.sample(StandardNormal);
                        if z.abs() <= clip {
                            break z;
                        }
                    },
                };
                *v += noise_scale * z;
            }
        }
    }

    /// One draw `(phi(x), y)`.
    pub fn sample(
        &self,
        inputs: &mut dyn RngCore,
        noise: &mut dyn RngCore,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut phi = vec![0.0; self.d()];
        let mut y = vec![0.0; self.d_y()];
        self.sample_into(inputs, noise, &mut phi, &mut y);
        (phi, y)
    }

    /// Explicit-feature kernel `k(x, x') = sum_k u_k x_k x'_k` on the cube;
    /// with sign inputs `xi` its feature map is exactly `phi(x)`.
    pub fn explicit_kernel(&self) -> ScalarKernel {
        ScalarKernel::explicit_feature(self.u.clone()).expect("eigenvalues are positive")
    }

    /// `phi(x)` as a kernel input: the raw coordinates `xi`.
    pub fn xi_from_phi(&self, phi: &[f64]) -> Vec<f64> {
        phi.iter().zip(&self.sqrt_u).map(|(p, s)| p / s).collect()
    }

    /// `h_dag` as a dual expansion over the unit vectors `e_k`:
    /// `k(e_k, x) = u_k x_k`, so the coefficient is `H_dag[:, k] / sqrt(u_k)`.
    pub fn ground_truth_dual(&self) -> GroundTruthDual {
        let d = self.d();
        let anchors = (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                e
            })
            .collect();
        let coeffs = (0..d)
            .map(|k| {
                let c: Vec<f64> = self
                    .hdag
                    .column(k)
                    .iter()
                    .map(|v| v / self.sqrt_u[k])
                    .collect();
                OutputVec::new(c).expect("finite")
            })
            .collect();
        GroundTruthDual::new(self.explicit_kernel(), self.d_y(), anchors, coeffs)
            .expect("consistent by construction")
    }

    /// Matrix of a dual estimator over this world's explicit kernel:
    /// `H[:, k] = sum_i a_i sqrt(u_k) x_ik`.
    pub fn dual_to_primal(&self, e: &DualEstimator) -> Result<DMatrix<f64>> {
        if e.kernel() != &self.explicit_kernel() {
            return Err(Error::Domain(
                "estimator kernel is not this world's explicit kernel".into(),
            ));
        }
        let mut h = DMatrix::zeros(self.d_y(), self.d());
        for (x, a) in e.anchors().iter().zip(e.coefficients()) {
            for k in 0..self.d() {
                let f = self.sqrt_u[k] * x[k];
                for j in 0..self.d_y() {
                    h[(j, k)] += a.as_slice()[j] * f;
                }
            }
        }
        Ok(h)
    }
}

/// Variance of a standard normal truncated to `[-c, c]`.
pub fn truncated_normal_variance(c: f64) -> f64 {
    let pdf = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = statrs::function::erf::erf(c / std::f64::consts::SQRT_2);
    1.0 - 2.0 * c * pdf / mass
}

/// Iterate `H_t` in eigencoordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimator {
    h: DMatrix<f64>,
    step: usize,
}

impl SpectralEstimator {
    /// `H_1 = 0`.
    pub fn new(world: &SpectralWorld) -> Self {
        SpectralEstimator {
            h: DMatrix::zeros(world.d_y(), world.d()),
            step: 1,
        }
    }

    pub fn from_matrix(h: DMatrix<f64>) -> Self {
        SpectralEstimator { h, step: 1 }
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `H phi`.
    pub fn predict(&self, phi: &[f64]) -> Vec<f64> {
        let d_y = self.h.nrows();
        let h = self.h.as_slice();
        let mut out = vec![0.0; d_y];
        for (k, p) in phi.iter().enumerate() {
            for j in 0..d_y {
                out[j] += h[k * d_y + j] * p;
            }
        }
        out
    }

    /// `H <- (1 - eta lambda) H - eta (H phi - y) phi^T`.
    pub fn spectral_step(&mut self, phi: &[f64], y: &[f64], eta: f64, lambda: f64) {
        let d_y = self.h.nrows();
        let mut resid = self.predict(phi);
        for (r, v) in resid.iter_mut().zip(y) {
            *r -= v;
        }
        let shrink = 1.0 - eta * lambda;
        let h = self.h.as_mut_slice();
        for (k, p) in phi.iter().enumerate() {
            let g = eta * p;
            for (hv, r) in h[k * d_y..(k + 1) * d_y].iter_mut().zip(&resid) {
                *hv = shrink * *hv - g * r;
            }
        }
        self.step += 1;
    }
}

/// Consuming form of [`SpectralEstimator::spectral_step`].
pub fn spectral_step(
    mut e: SpectralEstimator,
    phi: &[f64],
    y: &[f64],
    eta: f64,
    lambda: f64,
) -> SpectralEstimator {
    e.spectral_step(phi, y, eta, lambda);
    e
}

/// `|(H - H_dag) C^alpha|^2_HS`.
pub fn exact_error(world: &SpectralWorld, e: &SpectralEstimator, alpha: Alpha) -> f64 {
    exact_error_matrix(world, &e.h, alpha)
}

pub fn exact_error_matrix(world: &SpectralWorld, h: &DMatrix<f64>, alpha: Alpha) -> f64 {
    let d_y = world.d_y();
    let hs = h.as_slice();
    let ts = world.hdag.as_slice();
    let mut total = 0.0;
    for (k, uk) in world.u.iter().enumerate() {
        let mut col = 0.0;
        for j in 0..d_y {
            let diff = hs[k * d_y + j] - ts[k * d_y + j];
            col += diff * diff;
        }
        total += match alpha {
            Alpha::Zero => col,
            Alpha::Half => uk * col,
        };
    }
    total
}

/// `H_lambda = H_dag C (C + lambda)^-1`.
pub fn regularization_path(world: &SpectralWorld, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "regularization parameter must be positive, got {lambda}"
        )));
    }
    let mut h = world.hdag.clone();
    for (k, uk) in world.u.iter().enumerate() {
        let f = uk / (uk + lambda);
        h.column_mut(k).iter_mut().for_each(|v| *v *= f);
    }
    Ok(h)
}

/// `E |y - H phi(x)|^2 + lambda |H|^2_HS`.
pub fn regularized_objective(world: &SpectralWorld, h: &DMatrix<f64>, lambda: f64) -> f64 {
    exact_error_matrix(world, h, Alpha::Half) + world.noise_variance() + lambda * h.norm_squared()
}

/// The four terms bounding `E |(H_{T+1} - H_dag) C^alpha|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionTerms {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl DecompositionTerms {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t4
    }
}

/// Evaluates the decomposition exactly in eigencoordinates.
///
/// Writing `g_k(lambda) = u_k / (u_k + lambda)` and
/// `P_k(t) = prod_{j=t}^{T} (1 - eta_j (u_k + lambda_j))`:
///
/// * `T1 = 2 sum_k u_k^{2a} (1 - g_k(lambda_T))^2 |H_dag[:, k]|^2`
/// * `T2 = 6 sum_k u_k^{2a} g_k(lambda_0)^2 |H_dag[:, k]|^2 P_k(1)^2`
/// * `T3 = 6 sum_k u_k^{2a} |H_dag[:, k]|^2 (sum_t (g_k(lambda_{t-1}) - g_k(lambda_t)) P_k(t))^2`
/// * `T4 = 6 sqrt(c) (sqrt(c) M + sigma^2) sum_t eta_t^2 sum_k u_k^{1+2a} P_k(t+1)^2`
///
/// `lambda_0` is [`Schedule::lambda0`]; `T = 0` gives the empty products.
pub fn decomposition_terms(
    world: &SpectralWorld,
    sched: &Schedule,
    horizon: usize,
    alpha: Alpha,
    m: f64,
) -> Result<DecompositionTerms> {
    if let Some(h) = sched.horizon() {
        if horizon > h {
            return Err(Error::Range(format!(
                "T = {horizon} exceeds the schedule horizon {h}"
            )));
        }
    }
    let a2 = 2.0 * alpha.value();
    let lambda0 = sched.lambda0();
    let params: Vec<(f64, f64)> = (1..=horizon)
        .map(|t| sched.step_params(t))
        .collect::<Result<_>>()?;
    let lambda_t = params.last().map_or(lambda0, |p| p.1);
    let c = world.moment_constant();
    let sigma2 = world.noise_variance();
    // `1 - g(lambda)` computed as `1 / (u / lambda + 1)` so that an infinite
    // lambda_0 gives H_{lambda_0} = 0 without NaN.
    let g = |u: f64, lambda: f64| 1.0 - 1.0 / (u / lambda + 1.0);

    let mut t1 = 0.0;
    let mut t2 = 0.0;
    let mut t3 = 0.0;
    let mut trace = vec![0.0; horizon + 1];
    for (k, &u) in world.u.iter().enumerate() {
        let w = u.powf(a2);
        let hk = world.hdag.column(k).norm_squared();
        let one_minus = 1.0 / (u / lambda_t + 1.0);
        t1 += w * one_minus * one_minus * hk;

        let mut prod = 1.0;
        let mut drift = 0.0;
        let u_pow = u.powf(1.0 + a2);
        for t in (1..=horizon).rev() {
            // prod = P_k(t + 1) here.
            trace[t] += u_pow * prod * prod;
            let (eta, lam) = params[t - 1];
            prod *= 1.0 - eta * (u + lam);
            let lam_prev = if t == 1 { lambda0 } else { params[t - 2].1 };
            drift += (g(u, lam_prev) - g(u, lam)) * prod;
        }
        let g0 = g(u, lambda0);
        t2 += w * g0 * g0 * hk * prod * prod;
        t3 += w * hk * drift * drift;
    }
    let mut t4 = 0.0;
    for t in 1..=horizon {
        let eta = params[t - 1].0;
        t4 += eta * eta * trace[t];
    }
    t4 *= 6.0 * c.sqrt() * (c.sqrt() * m + sigma2);
    Ok(DecompositionTerms {
        t1: 2.0 * t1,
        t2: 6.0 * t2,
        t3: 6.0 * t3,
        t4,
    })
}

/// Runs `steps` SGD steps, calling `observe(t, H_{t+1})` after each.
pub fn run_trajectory<F>(
    world: &SpectralWorld,
    sched: &Schedule,
    steps: usize,
    inputs: &mut dyn RngCore,
    noise: &mut dyn RngCore,
    mut observe: F,
) -> Result<SpectralEstimator>
where
    F: FnMut(usize, &SpectralEstimator),
{
    let mut e = SpectralEstimator::new(world);
    let mut phi = vec![0.0; world.d()];
    let mut y = vec![0.0; world.d_y()];
    for t in 1..=steps {
        let (eta, lambda) = sched.step_params(t)?;
        world.sample_into(inputs, noise, &mut phi, &mut y);
        e.spectral_step(&phi, &y, eta, lambda);
        observe(t, &e);
    }
    Ok(e)
}

/// Final errors of `replicates` independent trajectories of length `horizon`.
/// Replicate `i` uses streams `(seed, i, Input)` and `(seed, i, Noise)`.
pub fn replicate_errors(
    world: &SpectralWorld,
    sched: &Schedule,
    horizon: usize,
    alpha: Alpha,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut inputs = seed_split(seed, i, StreamRole::Input);
            let mut noise = seed_split(seed, i, StreamRole::Noise);
            let e = run_trajectory(world, sched, horizon, &mut inputs, &mut noise, |_, _| {})?;
            Ok(exact_error(world, &e, alpha))
        })
        .collect()
}

/// Empirical `q`-quantile of the error at step `T + 1` over `R` replicates.
pub fn replicate_quantile(
    world: &SpectralWorld,
    sched: &Schedule,
    horizon: usize,
    alpha: Alpha,
    replicates: usize,
    q: f64,
    seed: u64,
) -> Result<f64> {
    if replicates < 20 {
        return Err(Error::Range(format!(
            "need at least 20 replicates, got {replicates}"
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Range(format!(
            "quantile level must be in (0, 1), got {q}"
        )));
    }
    let errs = replicate_errors(world, sched, horizon, alpha, replicates, seed)?;
    Ok(quantile(&errs, q))
}

/// Linear-interpolation quantile of the sorted sample (position `q (n - 1)`).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{FiniteHorizonSchedule, OnlineSchedule};

    fn one_dim(u: f64, h: f64) -> SpectralWorld {
        // H_dag = S_dag u^r with r = 1, so pick S_dag = h / u.
        let sdag = DMatrix::from_element(1, 1, h / u);
        SpectralWorld::from_parts(
            vec![u],
            sdag,
            1.0,
            1.0,
            0.0,
            XiLaw::Rademacher,
            NoiseMode::Gaussian,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn rademacher_features_take_two_values() {
        let w = one_dim(0.25, 0.0);
        let mut a = seed_split(1, 0, StreamRole::Input);
        let mut b = seed_split(1, 0, StreamRole::Noise);
        for _ in 0..50 {
            let (phi, y) = w.sample(&mut a, &mut b);
            assert!(phi[0] == 0.5 || phi[0] == -0.5, "phi = {}", phi[0]);
            assert_eq!(y[0], 0.0);
        }
    }

    #[test]
    fn exact_error_one_dim() {
        let w = one_dim(0.25, 0.0);
        let e = SpectralEstimator::from_matrix(DMatrix::from_element(1, 1, 1.0));
        assert_eq!(exact_error(&w, &e, Alpha::Half), 0.25);
        assert_eq!(exact_error(&w, &e, Alpha::Zero), 1.0);
    }

    #[test]
    fn exact_error_vanishes_at_target() {
        let w = SpectralWorld::new(&WorldConfig {
            d: 20,
            ..Default::default()
        })
        .unwrap();
        let e = SpectralEstimator::from_matrix(w.hdag().clone());
        assert_eq!(exact_error(&w, &e, Alpha::Zero), 0.0);
    }

    #[test]
    fn regularization_path_one_dim() {
        let w = one_dim(0.5, 1.0);
        let h = regularization_path(&w, 0.5).unwrap();
        assert!((h[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(regularization_path(&w, 0.0).is_err());
    }

    #[test]
    fn first_step_is_outer_product() {
        let w = SpectralWorld::new(&WorldConfig {
            d: 5,
            d_y: 2,
            ..Default::default()
        })
        .unwrap();
        let mut e = SpectralEstimator::new(&w);
        let phi = [0.3, -0.2, 0.1, 0.05, -0.01];
        let y = [1.0, -2.0];
        e.spectral_step(&phi, &y, 0.5, 0.0);
        for (k, p) in phi.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                assert!((e.h()[(j, k)] - 0.5 * yj * p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_features_only_shrink() {
        let mut e = SpectralEstimator::from_matrix(DMatrix::from_element(2, 3, 2.0));
        e.spectral_step(&[0.0; 3], &[1.0, 1.0], 0.5, 0.4);
        assert!(e.h().iter().all(|v| (*v - 1.6).abs() < 1e-15), "{}", e.h());
    }

    #[test]
    fn t1_one_dim() {
        let w = one_dim(0.5, 1.0);
        // lambda = 2 * 4^-1 = 0.5.
        let f = Schedule::Finite(FiniteHorizonSchedule::new(0.5, 1.0, 0.25, 2.0, 4).unwrap());
        let terms = decomposition_terms(&w, &f, 4, Alpha::Zero, 0.0).unwrap();
        assert!((terms.t1 - 0.5).abs() < 1e-15, "{terms:?}");
        assert_eq!(terms.t3, 0.0);
    }

    #[test]
    fn t2_at_zero_horizon_is_initial_error() {
        let w = SpectralWorld::new(&WorldConfig {
            d: 10,
            ..Default::default()
        })
        .unwrap();
        let s = Schedule::Online(OnlineSchedule::new(0.5, 0.5, 1.0, 1.0, 4.0).unwrap());
        let terms = decomposition_terms(&w, &s, 0, Alpha::Half, 1.0).unwrap();
        let h0 = regularization_path(&w, s.lambda0()).unwrap();
        let direct: f64 = (0..w.d())
            .map(|k| w.u()[k] * h0.column(k).norm_squared())
            .sum();
        assert!(
            (terms.t2 - 6.0 * direct).abs() < 1e-12 * direct,
            "{} vs {}",
            terms.t2,
            6.0 * direct
        );
        assert_eq!(terms.t4, 0.0);
    }

    #[test]
    fn quantile_median() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[4.0, 1.0, 2.0, 3.0], 0.5), 2.5);
    }

    #[test]
    fn truncated_variance_limits() {
        assert!((truncated_normal_variance(40.0) - 1.0).abs() < 1e-12);
        let v = truncated_normal_variance(1.0);
        assert!((v - 0.290_3).abs() < 1e-3, "{v}");
    }
}
