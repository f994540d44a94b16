//! Empirical PCA encoder-decoder and PCA-wrapped dual SGD.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::dual::{run, DualEstimator, DualExpansion};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernel::{dot, OutputVec, ScalarKernel};
use crate::linalg::sorted_eigen;
use crate::schedule::Schedule;

/// Top-`d` eigenpairs of the uncentered second moment `(1/T) sum x x^T`.
///
/// At full rank (`d` equal to the ambient dimension) the retained subspace is
/// the whole space and the codec uses the canonical basis, so encoding and
/// decoding are exact copies.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaCodec {
    basis: Vec<Vec<f64>>,
    spectrum: Vec<f64>,
    rank: usize,
    identity: bool,
}

pub fn fit_pca<X: AsRef<[f64]>>(samples: &[X], d: usize) -> Result<PcaCodec> {
    if samples.is_empty() {
        return Err(Error::Range("PCA needs at least one sample".into()));
    }
    let n = samples[0].as_ref().len();
    if d == 0 || d > n.min(samples.len()) {
        return Err(Error::Range(format!(
            "rank {d} not in 1..={} ({} samples, ambient dimension {n})",
            n.min(samples.len()),
            samples.len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for x in samples {
        let x = x.as_ref();
        check_dim(n, x.len())?;
        check_finite(x, "PCA sample")?;
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] += x[i] * x[j];
            }
        }
    }
    let inv = 1.0 / samples.len() as f64;
    for i in 0..n {
        for j in 0..=i {
            let v = m[(i, j)] * inv;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let (vals, vecs) = sorted_eigen(m);
    let spectrum: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let identity = d == n;
    let basis = if identity {
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect()
    } else {
        (0..d)
            .map(|c| vecs.column(c).iter().copied().collect())
            .collect()
    };
    Ok(PcaCodec {
        basis,
        spectrum,
        rank: d,
        identity,
    })
}

impl PcaCodec {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ambient_dim(&self) -> usize {
        self.spectrum.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Retained eigenvalues, non-increasing.
    pub fn eigvals(&self) -> &[f64] {
        &self.spectrum[..self.rank]
    }

    /// All eigenvalues of the second moment, non-increasing.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `sum_{i > d} eigval_i`, the mean squared training reconstruction error.
    pub fn trailing_sum(&self) -> f64 {
        // Adding 0.0 maps the empty sum (-0.0) to +0.0.
        self.spectrum[self.rank..].iter().sum::<f64>() + 0.0
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim(), x.len())?;
        if self.identity {
            return Ok(x.to_vec());
        }
        Ok(self.basis.iter().map(|b| dot(b, x)).collect())
    }

    pub fn decode(&self, code: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.rank, code.len())?;
        if self.identity {
            return Ok(code.to_vec());
        }
        let mut out = vec![0.0; self.ambient_dim()];
        for (b, c) in self.basis.iter().zip(code) {
            for (o, v) in out.iter_mut().zip(b) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Orthogonal projection onto the retained subspace.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }
}

/// Dual SGD on PCA-encoded pairs; predictions are `decode_Y(f(encode_X(x)))`.
#[derive(Debug, Clone)]
pub struct PcaSgdModel {
    pub codec_x: PcaCodec,
    pub codec_y: PcaCodec,
    pub estimator: DualEstimator,
}

impl PcaSgdModel {
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let code = self.codec_x.encode(x)?;
        let out = self.estimator.predict(&code)?;
        self.codec_y.decode(out.as_slice())
    }
}

/// Two passes: fit both codecs on the whole training set, then stream SGD
/// over the encoded pairs.
pub fn pca_sgd_run(
    train: &[(Vec<f64>, Vec<f64>)],
    d_x: usize,
    d_y: usize,
    kernel: ScalarKernel,
    sched: &Schedule,
) -> Result<PcaSgdModel> {
    let xs: Vec<&[f64]> = train.iter().map(|(x, _)| x.as_slice()).collect();
    let ys: Vec<&[f64]> = train.iter().map(|(_, y)| y.as_slice()).collect();
    let codec_x = fit_pca(&xs, d_x)?;
    let codec_y = fit_pca(&ys, d_y)?;
    let encoded: Vec<(Vec<f64>, OutputVec)> = train
        .iter()
        .map(|(x, y)| Ok((codec_x.encode(x)?, OutputVec::new(codec_y.encode(y)?)?)))
        .collect::<Result<_>>()?;
    let estimator = run(kernel, d_y, encoded, sched)?;
    Ok(PcaSgdModel {
        codec_x,
        codec_y,
        estimator,
    })
}

/// Smooth nonlinear operator on functions sampled at `grid` points.
///
/// Inputs are `x = sum_j sqrt(v_j) a_j psi_j` with the orthonormal cosine
/// basis `psi_j`, `a_j ~ N(0, 1)` and variances `v_j = 2^{-j}`; the output
/// is `y = G sin(x)` with a symmetric row-stochastic Gaussian smoother `G`,
/// so the operator is 1-Lipschitz in the Euclidean norm.
#[derive(Debug, Clone)]
pub struct SmoothOperatorTask {
    grid: usize,
    basis: Vec<Vec<f64>>,
    variances: Vec<f64>,
    smoother: DMatrix<f64>,
}

impl SmoothOperatorTask {
    pub fn new(grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::Domain("grid needs at least two points".into()));
        }
        let n = grid as f64;
        let basis = (0..grid)
            .map(|j| {
                let norm = if j == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
                (0..grid)
                    .map(|i| norm * (std::f64::consts::PI * j as f64 * (i as f64 + 0.5) / n).cos())
                    .collect()
            })
            .collect();
        let variances = (0..grid).map(|j| 0.5f64.powi(j as i32)).collect();
        let width = 0.1;
        let raw = DMatrix::from_fn(grid, grid, |i, j| {
            let d = (i as f64 - j as f64) / n;
            (-0.5 * d * d / (width * width)).exp()
        });
        // Sinkhorn-style symmetric scaling to a doubly stochastic matrix.
        let mut scale = vec![1.0; grid];
        for _ in 0..500 {
            for i in 0..grid {
                let s: f64 = (0..grid).map(|j| raw[(i, j)] * scale[j]).sum();
                scale[i] = (scale[i] / s).sqrt();
            }
        }
        let smoother = DMatrix::from_fn(grid, grid, |i, j| scale[i] * raw[(i, j)] * scale[j]);
        Ok(SmoothOperatorTask {
            grid,
            basis,
            variances,
            smoother,
        })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn sample_input(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut x = vec![0.0; self.grid];
        for (b, v) in self.basis.iter().zip(&self.variances) {
            let a: f64 = rng.sample(StandardNormal);
            let c = v.sqrt() * a;
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += c * bi;
            }
        }
        x
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        (0..self.grid)
            .map(|i| (0..self.grid).map(|j| self.smoother[(i, j)] * s[j]).sum())
            .collect()
    }

    /// `n` pairs `(x, G sin(x) + eps)` with `eps ~ N(0, noise^2 I)`.
    pub fn sample(
        &self,
        n: usize,
        noise: f64,
        inputs: &mut dyn RngCore,
        eps: &mut dyn RngCore,
    ) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..n)
            .map(|_| {
                let x = self.sample_input(inputs);
                let mut y = self.apply(&x);
                for v in y.iter_mut() {
                    *v += noise * eps.sample::<f64, _>(StandardNormal);
                }
                (x, y)
            })
            .collect()
    }
}
