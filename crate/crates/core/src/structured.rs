//! Surrogate structured prediction over a finite label set.
//!
//! Labels are embedded through an output kernel, the embedded outputs are
//! regressed with the dual SGD estimator, and predictions are decoded back
//! to the nearest label embedding.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dual::{mean_stderr, DualExpansion, GroundTruthDual, InputSampler};
use crate::error::{check_dim, Error, Result};
use crate::kernel::{OutputVec, ScalarKernel};
use crate::linalg::sorted_eigen;

/// Eigenvalues of the label Gram matrix below this are dropped.
pub const EMBED_CLIP: f64 = 1e-12;

/// Kernels on label sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKernel {
    /// Normalized Kendall tau between rank vectors:
    /// `sum_{i<j} sign(a_i - a_j) sign(b_i - b_j) / (n choose 2)`.
    Kendall,
    /// Fraction of matching positions, `1 - hamming(a, b) / n`.
    Matching,
}

impl LabelKernel {
    pub fn eval(self, a: &[i64], b: &[i64]) -> f64 {
        let n = a.len();
        match self {
            LabelKernel::Kendall => {
                let mut total = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        total += sign(a[i] - a[j]) * sign(b[i] - b[j]);
                    }
                }
                total / (n * (n - 1) / 2) as f64
            }
            LabelKernel::Matching => {
                a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n as f64
            }
        }
    }
}

fn sign(x: i64) -> f64 {
    x.signum() as f64
}

#[derive(Debug, Clone)]
pub struct StructuredTask {
    labels: Vec<Vec<i64>>,
    gram: DMatrix<f64>,
    embedding: Vec<OutputVec>,
}

impl StructuredTask {
    pub fn new(labels: Vec<Vec<i64>>, kernel: LabelKernel) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Domain("label set is empty".into()));
        }
        let len = labels[0].len();
        let min_len = if kernel == LabelKernel::Kendall { 2 } else { 1 };
        if len < min_len {
            return Err(Error::Domain(format!(
                "labels need at least {min_len} positions"
            )));
        }
        for l in &labels {
            check_dim(len, l.len())?;
        }
        let n = labels.len();
        let gram = DMatrix::from_fn(n, n, |i, j| kernel.eval(&labels[i], &labels[j]));
        Self::from_gram(labels, gram)
    }

    /// Task with an explicit label Gram matrix.
    pub fn from_gram(labels: Vec<Vec<i64>>, gram: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Domain("label set is empty".into()));
        }
        if gram.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: gram.nrows(),
            });
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "label Gram matrix has non-finite entries".into(),
            ));
        }
        for i in 0..n {
            for j in 0..i {
                if gram[(i, j)] != gram[(j, i)] {
                    return Err(Error::Domain(format!(
                        "label Gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let (vals, vecs) = sorted_eigen(gram.clone());
        let trace = gram.trace();
        if let Some(min) = vals.last() {
            if *min < -1e-8 * trace.abs() {
                return Err(Error::Domain(format!(
                    "label Gram matrix is not PSD (eigenvalue {min})"
                )));
            }
        }
        let rank = vals.iter().take_while(|v| **v >= EMBED_CLIP).count();
        if rank == 0 {
            return Err(Error::Domain("label Gram matrix is zero".into()));
        }
        let embedding = (0..n)
            .map(|j| {
                OutputVec::from_raw((0..rank).map(|c| vecs[(j, c)] * vals[c].sqrt()).collect())
            })
            .collect();
        Ok(StructuredTask {
            labels,
            gram,
            embedding,
        })
    }

    /// All permutations of `0..items` in lexicographic order, Kendall kernel.
    pub fn label_ranking(items: usize) -> Result<Self> {
        let mut perms = Vec::new();
        let mut cur: Vec<i64> = (0..items as i64).collect();
        loop {
            perms.push(cur.clone());
            if !next_permutation(&mut cur) {
                break;
            }
        }
        Self::new(perms, LabelKernel::Kendall)
    }

    /// All sequences of `len` symbols over `0..alphabet`, matching kernel.
    pub fn tagging(len: usize, alphabet: usize) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::Domain("empty alphabet".into()));
        }
        let total = alphabet
            .checked_pow(len as u32)
            .ok_or_else(|| Error::Domain("too many labels".into()))?;
        let labels = (0..total)
            .map(|mut code| {
                let mut seq = vec![0; len];
                for pos in (0..len).rev() {
                    seq[pos] = (code % alphabet) as i64;
                    code /= alphabet;
                }
                seq
            })
            .collect();
        Self::new(labels, LabelKernel::Matching)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Vec<i64>] {
        &self.labels
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Embedding dimension `d_Y`, the numerical rank of the Gram matrix.
    pub fn output_dim(&self) -> usize {
        self.embedding[0].dim()
    }

    pub fn embedding(&self, j: usize) -> &OutputVec {
        &self.embedding[j]
    }

    /// `D(z_i, z_j) = k(z_i, z_i) + k(z_j, z_j) - 2 k(z_i, z_j)`.
    pub fn loss(&self, i: usize, j: usize) -> f64 {
        self.gram[(i, i)] + self.gram[(j, j)] - 2.0 * self.gram[(i, j)]
    }
}

fn next_permutation(v: &mut [i64]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Index of the label embedding nearest to `v`; lowest index on ties.
pub fn decode(task: &StructuredTask, v: &OutputVec) -> Result<usize> {
    if task.is_empty() {
        return Err(Error::Domain("label set is empty".into()));
    }
    check_dim(task.output_dim(), v.dim())?;
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, e) in task.embedding.iter().enumerate() {
        let d = v.dist_sq(e);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    Ok(best)
}

/// Monte Carlo comparison of a learned surrogate against the conditional
/// mean embedding `h_dag`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// Excess structured risk of `D(h_hat)` over `D(h_dag)`.
    pub struct_gap: f64,
    pub struct_gap_stderr: f64,
    /// `sqrt(E |h_hat(x) - h_dag(x)|^2)`.
    pub surrogate_rmse: f64,
    /// `struct_gap / surrogate_rmse`, 0 when both vanish.
    pub ratio: f64,
}

/// Estimates the excess structured risk of decoding `est` and the surrogate
/// root-mean-square error, both relative to `truth`.
///
/// When `truth` is the conditional mean embedding, the expected loss of label
/// `z` at `x` is `|phi(z) - h_dag(x)|^2` up to a term independent of `z`, so
/// the per-input gap is the difference of those squared distances.
pub fn surrogate_risk_gap<E: DualExpansion>(
    task: &StructuredTask,
    est: &E,
    truth: &GroundTruthDual,
    sampler: &dyn InputSampler,
    rng: &mut dyn RngCore,
    n: usize,
) -> Result<GapReport> {
    if n < 100 {
        return Err(Error::Range(format!("need at least 100 draws, got {n}")));
    }
    check_dim(task.output_dim(), est.output_dim())?;
    check_dim(task.output_dim(), truth.output_dim())?;
    let mut gaps = Vec::with_capacity(n);
    let mut sq = 0.0;
    for _ in 0..n {
        let x = sampler.sample(rng);
        let h = est.predict(&x)?;
        let t = truth.predict(&x)?;
        let zh = decode(task, &h)?;
        let zt = decode(task, &t)?;
        gaps.push(task.embedding(zh).dist_sq(&t) - task.embedding(zt).dist_sq(&t));
        sq += h.dist_sq(&t);
    }
    let (struct_gap, struct_gap_stderr) = mean_stderr(&gaps);
    let surrogate_rmse = (sq / n as f64).sqrt();
    let ratio = if surrogate_rmse > 0.0 {
        struct_gap / surrogate_rmse
    } else {
        0.0
    };
    Ok(GapReport {
        struct_gap,
        struct_gap_stderr,
        surrogate_rmse,
        ratio,
    })
}

/// Inputs `(1, xi_1, .., xi_m)` with `xi` uniform on `[-1, 1]^m`.
#[derive(Debug, Clone, Copy)]
pub struct ToySampler {
    pub m: usize,
}

impl InputSampler for ToySampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.m + 1);
        x.push(1.0);
        x.extend((0..self.m).map(|_| rng.gen_range(-1.0..=1.0)));
        x
    }
}

/// Synthetic task with `p(z | x) = p0(z) + sum_i c_iz xi_i`.
///
/// The coefficients satisfy `sum_z c_iz = 0` and `sum_i |c_iz| <= 0.9 p0(z)`,
/// so every conditional is a distribution with `p(z | x) >= 0.1 p0(z)`. The
/// conditional mean embedding is linear in `(1, xi)` and lies exactly in the
/// span of the explicit-feature input kernel with equal weights `1 / (m + 1)`.
#[derive(Debug, Clone)]
pub struct ToyModel {
    task: StructuredTask,
    m: usize,
    p0: Vec<f64>,
    coef: Vec<Vec<f64>>,
    kernel: ScalarKernel,
}

impl ToyModel {
    pub fn new(task: StructuredTask, m: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain(
                "toy model needs at least one input coordinate".into(),
            ));
        }
        let nz = task.len();
        let raw: Vec<f64> = (0..nz).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = raw.iter().sum();
        let p0: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut coef: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let g: Vec<f64> = (0..nz).map(|_| rng.sample(StandardNormal)).collect();
                let mean = g.iter().sum::<f64>() / nz as f64;
                g.iter().map(|v| v - mean).collect()
            })
            .collect();
        let mut scale = f64::INFINITY;
        for z in 0..nz {
            let l1: f64 = coef.iter().map(|row| row[z].abs()).sum();
            if l1 > 0.0 {
                scale = scale.min(0.9 * p0[z] / l1);
            }
        }
        if scale.is_finite() {
            coef.iter_mut()
                .for_each(|row| row.iter_mut().for_each(|v| *v *= scale));
        }
        let kernel = ScalarKernel::explicit_feature(vec![1.0 / (m + 1) as f64; m + 1])?;
        Ok(ToyModel {
            task,
            m,
            p0,
            coef,
            kernel,
        })
    }

    pub fn task(&self) -> &StructuredTask {
        &self.task
    }

    pub fn input_kernel(&self) -> &ScalarKernel {
        &self.kernel
    }

    pub fn sampler(&self) -> ToySampler {
        ToySampler { m: self.m }
    }

    /// `p(. | x)` for an input `(1, xi)`.
    pub fn conditional(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.p0.clone();
        for (i, row) in self.coef.iter().enumerate() {
            for (pz, c) in p.iter_mut().zip(row) {
                *pz += c * x[i + 1];
            }
        }
        p
    }

    pub fn sample_label(&self, x: &[f64], rng: &mut dyn RngCore) -> usize {
        let p = self.conditional(x);
        WeightedIndex::new(&p)
            .expect("conditional is a distribution")
            .sample(rng)
    }

    /// `h_dag(x) = sum_z p(z | x) phi(z)` over anchors `e_0 .. e_m`:
    /// `k(e_i, x) = w x_i`, so anchor `i` carries `sum_z p_i(z) phi(z) / w`.
    pub fn conditional_mean(&self) -> GroundTruthDual {
        let w = 1.0 / (self.m + 1) as f64;
        let d_y = self.task.output_dim();
        let rows = std::iter::once(&self.p0).chain(self.coef.iter());
        let mut anchors = Vec::with_capacity(self.m + 1);
        let mut coeffs = Vec::with_capacity(self.m + 1);
        for (i, row) in rows.enumerate() {
            let mut e = vec![0.0; self.m + 1];
            e[i] = 1.0;
            anchors.push(e);
            let mut c = OutputVec::zeros(d_y);
            for (z, pz) in row.iter().enumerate() {
                c.axpy(pz / w, self.task.embedding(z));
            }
            coeffs.push(c);
        }
        GroundTruthDual::new(self.kernel.clone(), d_y, anchors, coeffs)
            .expect("consistent by construction")
    }

    /// `argmin_z sum_z' p(z' | x) D(z, z')`, lowest index on ties.
    pub fn bayes_label(&self, x: &[f64]) -> usize {
        let p = self.conditional(x);
        let mut best = 0;
        let mut best_risk = f64::INFINITY;
        for z in 0..self.task.len() {
            let risk: f64 = p
                .iter()
                .enumerate()
                .map(|(z2, pz)| pz * self.task.loss(z, z2))
                .sum();
            if risk < best_risk {
                best = z;
                best_risk = risk;
            }
        }
        best
    }

    /// `n` training pairs `(x, phi(z))` with `z ~ p(. | x)`.
    pub fn stream(
        &self,
        n: usize,
        inputs: &mut dyn RngCore,
        labels: &mut dyn RngCore,
    ) -> Vec<(Vec<f64>, OutputVec)> {
        let sampler = self.sampler();
        (0..n)
            .map(|_| {
                let x = sampler.sample(inputs);
                let z = self.sample_label(&x, labels);
                (x, self.task.embedding(z).clone())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seed_split, StreamRole};

    #[test]
    fn ranking_has_six_labels_and_rank_three() {
        let t = StructuredTask::label_ranking(3).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.labels()[0], vec![0, 1, 2]);
        assert_eq!(t.labels()[5], vec![2, 1, 0]);
        assert_eq!(t.output_dim(), 3);
    }

    #[test]
    fn tagging_enumerates_binary_words() {
        let t = StructuredTask::tagging(3, 2).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.labels()[6], vec![1, 1, 0]);
        assert_eq!(t.output_dim(), 4);
    }

    #[test]
    fn embedding_reproduces_gram() {
        let t = StructuredTask::label_ranking(3).unwrap();
        for i in 0..t.len() {
            for j in 0..t.len() {
                let g = t.embedding(i).dot(t.embedding(j));
                assert!((g - t.gram()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_exact_embedding() {
        let t = StructuredTask::tagging(3, 2).unwrap();
        assert_eq!(decode(&t, &t.embedding(3).clone()).unwrap(), 3);
    }

    #[test]
    fn decode_tie_takes_lowest_index() {
        let labels = vec![vec![0], vec![1]];
        let t = StructuredTask::from_gram(labels, DMatrix::identity(2, 2)).unwrap();
        let mid = t.embedding(0).scaled(0.5);
        let mut mid = mid;
        mid.axpy(0.5, t.embedding(1));
        let d0 = mid.dist_sq(t.embedding(0));
        let d1 = mid.dist_sq(t.embedding(1));
        assert_eq!(d0, d1);
        assert_eq!(decode(&t, &mid).unwrap(), 0);
    }

    #[test]
    fn empty_label_set_is_domain_error() {
        assert!(matches!(
            StructuredTask::new(vec![], LabelKernel::Matching),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn non_psd_gram_is_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(StructuredTask::from_gram(vec![vec![0], vec![1]], g).is_err());
    }

    #[test]
    fn loss_is_zero_on_diagonal() {
        let t = StructuredTask::label_ranking(3).unwrap();
        for i in 0..t.len() {
            assert!(t.loss(i, i).abs() < 1e-15);
            for j in 0..t.len() {
                assert!(t.loss(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn toy_conditionals_are_distributions() {
        let t = StructuredTask::label_ranking(3).unwrap();
        let mut rng = seed_split(3, 0, StreamRole::World);
        let model = ToyModel::new(t, 3, &mut rng).unwrap();
        let mut inputs = seed_split(3, 0, StreamRole::Input);
        for _ in 0..200 {
            let x = model.sampler().sample(&mut inputs);
            let p = model.conditional(&x);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn surrogate_gap_of_truth_is_zero() {
        let t = StructuredTask::tagging(3, 2).unwrap();
        let mut rng = seed_split(5, 0, StreamRole::World);
        let model = ToyModel::new(t, 3, &mut rng).unwrap();
        let h = model.conditional_mean();
        let mut probe = seed_split(5, 0, StreamRole::Probe);
        let rep =
            surrogate_risk_gap(model.task(), &h, &h, &model.sampler(), &mut probe, 100).unwrap();
        assert_eq!(rep.struct_gap, 0.0);
        assert_eq!(rep.surrogate_rmse, 0.0);
        assert!(
            surrogate_risk_gap(model.task(), &h, &h, &model.sampler(), &mut probe, 99).is_err()
        );
    }
}
