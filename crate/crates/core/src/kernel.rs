//! Output vectors, scalar kernels and Gram matrices.
//!
//! Inputs are plain `&[f64]` slices. The output space is truncated to a
//! finite dimension `d_Y`.

use nalgebra::DMatrix;

use crate::error::{check_dim, check_finite, Error, Result};

/// Element of the truncated output space.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputVec(Vec<f64>);

impl OutputVec {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords, "output vector")?;
        Ok(OutputVec(coords))
    }

    /// Skips the finiteness check; for internal arithmetic results.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        OutputVec(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        OutputVec(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &OutputVec) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &OutputVec) {
        debug_assert_eq!(self.dim(), x.dim());
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> OutputVec {
        OutputVec(self.0.iter().map(|v| a * v).collect())
    }

    pub fn sub(&self, other: &OutputVec) -> OutputVec {
        OutputVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn dist_sq(&self, other: &OutputVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `exp(-alpha * |x - x'|^2)` on R^d.
    Gaussian { alpha: f64 },
    /// `(c^2 + |x - x'|^2)^(-beta)` on R^d.
    InverseMultiquadric { c: f64, beta: f64 },
    /// `sum_k w_k x_k x'_k` on the cube [-1, 1]^d, i.e. phi(x)_k = sqrt(w_k) x_k.
    ExplicitFeature { weights: Vec<f64> },
}

/// Scalar kernel together with its uniform bound `kappa_sq = sup_x k(x, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarKernel {
    kind: KernelKind,
    kappa_sq: f64,
}

/// Explicit coordinates of `phi(x)` for explicit-feature kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec(pub Vec<f64>);

impl FeatureVec {
    pub fn dot(&self, other: &FeatureVec) -> f64 {
        dot(&self.0, &other.0)
    }
}

impl ScalarKernel {
    pub fn gaussian(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!(
                "gaussian bandwidth must be positive, got {alpha}"
            )));
        }
        Ok(ScalarKernel {
            kind: KernelKind::Gaussian { alpha },
            kappa_sq: 1.0,
        })
    }

    pub fn inverse_multiquadric(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0 && beta > 0.0 && c.is_finite() && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "inverse multiquadric needs c > 0 and beta > 0, got c={c}, beta={beta}"
            )));
        }
        Ok(ScalarKernel {
            kind: KernelKind::InverseMultiquadric { c, beta },
            kappa_sq: c.powf(-2.0 * beta),
        })
    }

    pub fn explicit_feature(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Domain(
                "explicit-feature weights must be finite and non-negative".into(),
            ));
        }
        let kappa_sq = weights.iter().sum();
        Ok(ScalarKernel {
            kind: KernelKind::ExplicitFeature { weights },
            kappa_sq,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    /// Input dimension if the kernel fixes one.
    pub fn input_dim(&self) -> Option<usize> {
        match &self.kind {
            KernelKind::ExplicitFeature { weights } => Some(weights.len()),
            _ => None,
        }
    }

    /// Checks that `x` lies in the kernel's input domain.
    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        check_finite(x, "kernel input")?;
        if let KernelKind::ExplicitFeature { weights } = &self.kind {
            check_dim(weights.len(), x.len())?;
            if let Some(i) = x.iter().position(|v| v.abs() > 1.0) {
                return Err(Error::Domain(format!(
                    "explicit-feature input outside [-1, 1] at index {i}"
                )));
            }
        }
        Ok(())
    }

    /// Kernel value without domain checks. Inputs must already be validated
    /// and share a dimension.
    pub fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::Gaussian { alpha } => (-alpha * sq_dist(x, x2)).exp(),
            KernelKind::InverseMultiquadric { c, beta } => (c * c + sq_dist(x, x2)).powf(-beta),
            KernelKind::ExplicitFeature { weights } => weights
                .iter()
                .zip(x)
                .zip(x2)
                .map(|((w, a), b)| w * a * b)
                .sum(),
        }
    }

    /// `phi(x)` in explicit coordinates; `None` for kernels without a finite feature map.
    pub fn feature(&self, x: &[f64]) -> Result<Option<FeatureVec>> {
        self.check_input(x)?;
        Ok(match &self.kind {
            KernelKind::ExplicitFeature { weights } => Some(FeatureVec(
                weights.iter().zip(x).map(|(w, v)| w.sqrt() * v).collect(),
            )),
            _ => None,
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn kernel_eval(k: &ScalarKernel, x: &[f64], x2: &[f64]) -> Result<f64> {
    k.check_input(x)?;
    k.check_input(x2)?;
    check_dim(x.len(), x2.len())?;
    Ok(k.eval_unchecked(x, x2))
}

pub fn gram_matrix<X: AsRef<[f64]>>(k: &ScalarKernel, xs: &[X]) -> Result<DMatrix<f64>> {
    if xs.is_empty() {
        return Err(Error::Domain("gram matrix of an empty input set".into()));
    }
    let dim = xs[0].as_ref().len();
    for x in xs {
        k.check_input(x.as_ref())?;
        check_dim(dim, x.as_ref().len())?;
    }
    let n = xs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k.eval_unchecked(xs[i].as_ref(), xs[j].as_ref());
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}
