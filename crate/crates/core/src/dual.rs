//! Kernel-dual regularized SGD.
//!
//! The iterate is `h_t = sum_i a_i k(x_i, .)` with `a_i` in the output space.
//! Each step shrinks every old coefficient by `1 - eta_t lambda_t` and appends
//! `-eta_t (h_t(x_t) - y_t)`. The shrink is kept in one running scale: a
//! coefficient is stored divided by the scale at insertion time, so the live
//! value is `scale * stored`.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{OutputVec, ScalarKernel};
use crate::schedule::Schedule;

/// Below this the lazy scale is folded into the stored coefficients.
pub const SCALE_FLOOR: f64 = 1e-150;

/// A finite kernel expansion `sum_i c_i k(z_i, .)`.
pub trait DualExpansion {
    fn kernel(&self) -> &ScalarKernel;
    fn output_dim(&self) -> usize;
    fn len(&self) -> usize;
    fn anchor(&self, i: usize) -> &[f64];
    /// Live coefficient of anchor `i`.
    fn coeff(&self, i: usize) -> OutputVec;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn predict(&self, x: &[f64]) -> Result<OutputVec> {
        self.kernel().check_input(x)?;
        if !self.is_empty() {
            check_dim(self.anchor(0).len(), x.len())?;
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> OutputVec {
        let mut out = OutputVec::zeros(self.output_dim());
        for i in 0..self.len() {
            let k = self.kernel().eval_unchecked(self.anchor(i), x);
            out.axpy(k, &self.coeff(i));
        }
        out
    }

    /// `|h|^2` in the RKHS.
    fn rkhs_norm_sq(&self) -> f64 {
        let n = self.len();
        let coeffs: Vec<OutputVec> = (0..n).map(|i| self.coeff(i)).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += self.kernel().eval_unchecked(self.anchor(i), self.anchor(j))
                    * coeffs[i].dot(&coeffs[j]);
            }
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct DualEstimator {
    kernel: ScalarKernel,
    d_y: usize,
    anchors: Vec<Vec<f64>>,
    stored: Vec<OutputVec>,
    scale: f64,
    step: usize,
}

impl DualEstimator {
    /// The zero function `h_1`.
    pub fn new(kernel: ScalarKernel, d_y: usize) -> Self {
        DualEstimator {
            kernel,
            d_y,
            anchors: Vec::new(),
            stored: Vec::new(),
            scale: 1.0,
            step: 1,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    /// Live coefficients `a_i`.
    pub fn coefficients(&self) -> Vec<OutputVec> {
        self.stored.iter().map(|b| b.scaled(self.scale)).collect()
    }

    /// One regularized SGD step on `(x_t, y_t)`.
    pub fn sgd_step(&mut self, x: &[f64], y: &OutputVec, eta: f64, lambda: f64) -> Result<()> {
        self.kernel.check_input(x)?;
        check_dim(self.d_y, y.dim())?;
        if let Some(a) = self.anchors.first() {
            check_dim(a.len(), x.len())?;
        }
        let shrink = 1.0 - eta * lambda;
        if !(shrink > 0.0) || !eta.is_finite() || !lambda.is_finite() {
            return Err(Error::Schedule(format!(
                "1 - eta*lambda must be positive, got eta={eta}, lambda={lambda}"
            )));
        }
        let residual = self.predict_unchecked(x).sub(y);
        self.scale *= shrink;
        if self.scale < SCALE_FLOOR {
            for b in &mut self.stored {
                *b = b.scaled(self.scale);
            }
            self.scale = 1.0;
        }
        self.anchors.push(x.to_vec());
        self.stored.push(residual.scaled(-eta / self.scale));
        self.step += 1;
        Ok(())
    }
}

impl DualExpansion for DualEstimator {
    fn kernel(&self) -> &ScalarKernel {
        &self.kernel
    }
    fn output_dim(&self) -> usize {
        self.d_y
    }
    fn len(&self) -> usize {
        self.anchors.len()
    }
    fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i]
    }
    fn coeff(&self, i: usize) -> OutputVec {
        self.stored[i].scaled(self.scale)
    }

    // Same arithmetic as the provided method, `k * (b * scale)` per
    // coordinate, without materializing the live coefficients.
    fn predict_unchecked(&self, x: &[f64]) -> OutputVec {
        let mut out = vec![0.0; self.d_y];
        for (a, b) in self.anchors.iter().zip(&self.stored) {
            let k = self.kernel.eval_unchecked(a, x);
            for (o, v) in out.iter_mut().zip(b.as_slice()) {
                *o += k * (v * self.scale);
            }
        }
        OutputVec::from_raw(out)
    }
}

/// Consuming form of [`DualEstimator::sgd_step`].
pub fn sgd_step(
    mut e: DualEstimator,
    x: &[f64],
    y: &OutputVec,
    eta: f64,
    lambda: f64,
) -> Result<DualEstimator> {
    e.sgd_step(x, y, eta, lambda)?;
    Ok(e)
}

/// Folds SGD over a stream. A finite-horizon schedule needs exactly `T` samples.
pub fn run<X, I>(
    kernel: ScalarKernel,
    d_y: usize,
    stream: I,
    sched: &Schedule,
) -> Result<DualEstimator>
where
    X: AsRef<[f64]>,
    I: IntoIterator<Item = (X, OutputVec)>,
{
    let mut e = DualEstimator::new(kernel, d_y);
    for (x, y) in stream {
        let (eta, lambda) = sched.step_params(e.step())?;
        e.sgd_step(x.as_ref(), &y, eta, lambda)?;
    }
    if let Some(t) = sched.horizon() {
        if e.step() - 1 != t {
            return Err(Error::Range(format!(
                "finite-horizon schedule needs {t} samples, stream had {}",
                e.step() - 1
            )));
        }
    }
    Ok(e)
}

/// Fixed target `h_dag = sum_j b_j k(x_j, .)` for kernel-mode experiments.
#[derive(Debug, Clone)]
pub struct GroundTruthDual {
    kernel: ScalarKernel,
    d_y: usize,
    anchors: Vec<Vec<f64>>,
    coeffs: Vec<OutputVec>,
}

impl GroundTruthDual {
    pub fn new(
        kernel: ScalarKernel,
        d_y: usize,
        anchors: Vec<Vec<f64>>,
        coeffs: Vec<OutputVec>,
    ) -> Result<Self> {
        check_dim(anchors.len(), coeffs.len())?;
        for (a, c) in anchors.iter().zip(&coeffs) {
            kernel.check_input(a)?;
            check_dim(anchors[0].len(), a.len())?;
            check_dim(d_y, c.dim())?;
        }
        Ok(GroundTruthDual {
            kernel,
            d_y,
            anchors,
            coeffs,
        })
    }

    /// The zero function.
    pub fn zero(kernel: ScalarKernel, d_y: usize) -> Self {
        GroundTruthDual {
            kernel,
            d_y,
            anchors: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    /// Snapshot of an estimator as a fixed expansion.
    pub fn from_expansion<E: DualExpansion>(e: &E) -> Self {
        GroundTruthDual {
            kernel: e.kernel().clone(),
            d_y: e.output_dim(),
            anchors: (0..e.len()).map(|i| e.anchor(i).to_vec()).collect(),
            coeffs: (0..e.len()).map(|i| e.coeff(i)).collect(),
        }
    }
}

impl DualExpansion for GroundTruthDual {
    fn kernel(&self) -> &ScalarKernel {
        &self.kernel
    }
    fn output_dim(&self) -> usize {
        self.d_y
    }
    fn len(&self) -> usize {
        self.anchors.len()
    }
    fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i]
    }
    fn coeff(&self, i: usize) -> OutputVec {
        self.coeffs[i].clone()
    }
}

/// `|h_a - h_b|^2` in the RKHS.
///
/// Anchors are merged by exact bit pattern and visited in a canonical order,
/// so equal expansions give exactly 0 and swapping the arguments gives the
/// same bits.
pub fn rkhs_distance_sq<A: DualExpansion, B: DualExpansion>(a: &A, b: &B) -> Result<f64> {
    if a.kernel() != b.kernel() {
        return Err(Error::Domain(
            "rkhs distance between expansions with different kernels".into(),
        ));
    }
    check_dim(a.output_dim(), b.output_dim())?;
    let d_y = a.output_dim();
    let mut merged: BTreeMap<Vec<u64>, (Vec<f64>, OutputVec, OutputVec)> = BTreeMap::new();
    let mut add = |x: &[f64], c: OutputVec, first: bool| {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let entry = merged
            .entry(key)
            .or_insert_with(|| (x.to_vec(), OutputVec::zeros(d_y), OutputVec::zeros(d_y)));
        if first {
            entry.1.axpy(1.0, &c);
        } else {
            entry.2.axpy(1.0, &c);
        }
    };
    for i in 0..a.len() {
        add(a.anchor(i), a.coeff(i), true);
    }
    for i in 0..b.len() {
        add(b.anchor(i), b.coeff(i), false);
    }
    let terms: Vec<(Vec<f64>, OutputVec)> = merged
        .into_values()
        .map(|(x, p, n)| (x, p.sub(&n)))
        .collect();
    let k = a.kernel();
    let mut total = 0.0;
    for (xi, ci) in &terms {
        for (xj, cj) in &terms {
            total += k.eval_unchecked(xi, xj) * ci.dot(cj);
        }
    }
    Ok(total)
}

/// Draws inputs for Monte Carlo evaluation.
pub trait InputSampler: Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Uniform on `[-1, 1]^dim`.
#[derive(Debug, Clone, Copy)]
pub struct CubeSampler {
    pub dim: usize,
}

impl InputSampler for CubeSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
    }
}

/// Independent random signs.
#[derive(Debug, Clone, Copy)]
pub struct RademacherSampler {
    pub dim: usize,
}

impl InputSampler for RademacherSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }
}

/// Isotropic normal with standard deviation `std`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSampler {
    pub dim: usize,
    pub std: f64,
}

impl InputSampler for GaussianSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim)
            .map(|_| self.std * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of `E |h_a(x) - h_b(x)|^2` over `n` fresh inputs.
pub fn mc_prediction_excess<A: DualExpansion, B: DualExpansion>(
    a: &A,
    b: &B,
    sampler: &dyn InputSampler,
    rng: &mut dyn RngCore,
    n: usize,
) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Range(format!("need at least 2 draws, got {n}")));
    }
    check_dim(a.output_dim(), b.output_dim())?;
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sampler.sample(rng);
        a.kernel().check_input(&x)?;
        vals.push(a.predict_unchecked(&x).dist_sq(&b.predict_unchecked(&x)));
    }
    Ok(mean_stderr(&vals))
}
