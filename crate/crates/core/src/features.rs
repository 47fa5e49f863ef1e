//! Feature post-processing: Karhunen-Loeve reduction fitted on training data
//! and a pooled-covariance linear discriminant classifier.
//!
//! The KL eigendecomposition runs on the n x n Gram matrix whenever there are
//! fewer samples than feature dimensions, which is always the case for the
//! 4000-component descriptors. Eigenvector signs are fixed (largest-magnitude
//! entry positive) so fitted transforms are deterministic.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, RealField, SymmetricEigen};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues below `largest * RANK_CUTOFF` are treated as numerical rank
/// deficiency and dropped. Relative, so fits are invariant under a common
/// rescaling of the data.
const RANK_CUTOFF: f64 = 1e-10;

/// Ridge weight for the pooled covariance: `S + 1e-6 * (tr S / k) * I`.
const LDA_SHRINKAGE: f64 = 1e-6;

/// Fitted Karhunen-Loeve transform: training mean, orthonormal basis in
/// descending eigenvalue order, and the matching eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct KlTransform<T> {
    pub mean: Vec<T>,
    pub basis: Vec<Vec<T>>,
    pub eigenvalues: Vec<T>,
    pub total_variance: T,
}

impl<T: Real> KlTransform<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.basis.len()
    }

    /// Projects `x` onto the leading `k` components: `y_i = basis_i . (x - mean)`.
    pub fn project(&self, x: &[T], k: usize) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if k == 0 || k > self.n_components() {
            return Err(Error::InvalidParameter(format!(
                "requested {k} components, {} available",
                self.n_components()
            )));
        }
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(&v, &m)| v - m).collect();
        Ok(self.basis[..k]
            .iter()
            .map(|b| dot(b, &centered))
            .collect())
    }

    /// Inverse map from component space back to feature space.
    pub fn reconstruct(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() > self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                got: y.len(),
            });
        }
        let mut x = self.mean.clone();
        for (w, b) in y.iter().zip(&self.basis) {
            for (xi, &bi) in x.iter_mut().zip(b) {
                *xi += *w * bi;
            }
        }
        Ok(x)
    }
}

/// Fits the KL transform on training rows (one sample per row).
pub fn kl_fit<T, R>(rows: &[R]) -> Result<KlTransform<T>>
where
    T: Real + RealField,
    R: AsRef<[T]>,
{
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "KL fit needs at least 2 samples, got {n}"
        )));
    }
    let d = rows[0].as_ref().len();
    if d == 0 || rows.iter().any(|r| r.as_ref().len() != d) {
        return Err(Error::InsufficientData(
            "KL fit needs nonempty rows of equal length".into(),
        ));
    }

    let mut mean = vec![T::zero(); d];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row.as_ref()) {
            *m += v;
        }
    }
    let inv_n = T::one() / T::from_f64_lossy(n as f64);
    for m in &mut mean {
        *m *= inv_n;
    }

    let centered = DMatrix::from_fn(n, d, |r, c| rows[r].as_ref()[c] - mean[c]);
    let denom = T::from_f64_lossy((n - 1) as f64);
    let max_components = (n - 1).min(d);

    let mut vals = Vec::new();
    let mut vecs = Vec::new();
    let total: T;
    if n < d {
        // Gram trick: eigenvectors v of (B B^T)/(n-1) map to basis B^T v.
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let order = descending_order(&eig.eigenvalues);
        for &idx in order.iter().take(max_components) {
            let lambda = eig.eigenvalues[idx];
            if !keep_eigenvalue(lambda, eig.eigenvalues[order[0]]) {
                break;
            }
            let v = eig.eigenvectors.column(idx);
            let mut u = vec![T::zero(); d];
            for r in 0..n {
                let w = v[r];
                for c in 0..d {
                    u[c] += w * centered[(r, c)];
                }
            }
            let norm = Float::sqrt(dot(&u, &u));
            if norm <= T::zero() {
                break;
            }
            for x in &mut u {
                *x /= norm;
            }
            vals.push(lambda);
            vecs.push(u);
        }
        total = eig
            .eigenvalues
            .iter()
            .map(|&l| Float::max(l, T::zero()))
            .sum();
    } else {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        let order = descending_order(&eig.eigenvalues);
        for &idx in order.iter().take(max_components) {
            let lambda = eig.eigenvalues[idx];
            if !keep_eigenvalue(lambda, eig.eigenvalues[order[0]]) {
                break;
            }
            vals.push(lambda);
            vecs.push(eig.eigenvectors.column(idx).iter().copied().collect());
        }
        total = eig
            .eigenvalues
            .iter()
            .map(|&l| Float::max(l, T::zero()))
            .sum();
    }
    Ok(finish_fit(mean, vals, vecs, total))
}

fn keep_eigenvalue<T: Real>(lambda: T, largest: T) -> bool {
    lambda > T::zero() && lambda > largest * T::from_f64_lossy(RANK_CUTOFF)
}

fn descending_order<T: Real + RealField>(vals: &DVector<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).expect("finite eigenvalues"));
    order
}

fn finish_fit<T: Real>(
    mean: Vec<T>,
    eigenvalues: Vec<T>,
    mut basis: Vec<Vec<T>>,
    total_variance: T,
) -> KlTransform<T> {
    // Deterministic orientation: largest-magnitude entry positive.
    for b in &mut basis {
        let mut best = 0;
        for (i, &v) in b.iter().enumerate() {
            if Float::abs(v) > Float::abs(b[best]) {
                best = i;
            }
        }
        if b[best] < T::zero() {
            for v in b.iter_mut() {
                *v = -*v;
            }
        }
    }
    KlTransform {
        mean,
        basis,
        eigenvalues,
        total_variance,
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Smallest component count explaining at least `variance_fraction` of the
/// training variance, capped at `cap`.
pub fn choose_components<T: Real>(
    kl: &KlTransform<T>,
    variance_fraction: f64,
    cap: usize,
) -> Result<usize> {
    if kl.n_components() == 0 {
        return Err(Error::InsufficientData(
            "training data has no variance".into(),
        ));
    }
    let target = kl.total_variance * T::from_f64_lossy(variance_fraction);
    let mut cum = T::zero();
    let mut k = kl.n_components();
    for (i, &lambda) in kl.eigenvalues.iter().enumerate() {
        cum += lambda;
        if cum >= target {
            k = i + 1;
            break;
        }
    }
    Ok(k.min(cap.max(1)).min(kl.n_components()).max(1))
}

/// Pooled-covariance linear discriminant model.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel<T> {
    /// Distinct class labels in ascending order.
    pub labels: Vec<usize>,
    pub means: Vec<Vec<T>>,
    pub priors: Vec<T>,
    /// Lower-triangular Cholesky factor of the regularized pooled covariance,
    /// row-major k x k.
    pub cov_factor: Vec<T>,
    /// Precomputed `S^-1 mu_c`.
    pub weights: Vec<Vec<T>>,
    /// `-mu_c . S^-1 mu_c / 2 + ln prior_c`.
    pub bias: Vec<T>,
    pub dim: usize,
}

impl<T: Real> LdaModel<T> {
    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    /// Linear discriminant score per class, in label order.
    pub fn decision_scores(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| dot(w, x) + b)
            .collect())
    }
}

/// Fits the discriminant on projected training rows and integer labels.
pub fn lda_fit<T, R>(rows: &[R], labels: &[usize]) -> Result<LdaModel<T>>
where
    T: Real + RealField,
    R: AsRef<[T]>,
{
    let n = rows.len();
    if n != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::InsufficientData("no training samples".into()));
    }
    let k = rows[0].as_ref().len();
    if k == 0 || rows.iter().any(|r| r.as_ref().len() != k) {
        return Err(Error::InsufficientData(
            "LDA needs nonempty rows of equal length".into(),
        ));
    }

    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "LDA needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    let class_index = |label: usize| classes.binary_search(&label).expect("label present");

    let mut counts = vec![0usize; classes.len()];
    for &y in labels {
        counts[class_index(y)] += 1;
    }
    if let Some(c) = counts.iter().position(|&c| c < 2) {
        return Err(Error::InsufficientData(format!(
            "class {} has only {} sample(s); every class needs at least 2",
            classes[c], counts[c]
        )));
    }

    let mut means = vec![vec![T::zero(); k]; classes.len()];
    for (row, &y) in rows.iter().zip(labels) {
        let c = class_index(y);
        for (m, &v) in means[c].iter_mut().zip(row.as_ref()) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        let inv = T::one() / T::from_f64_lossy(c as f64);
        for v in m.iter_mut() {
            *v *= inv;
        }
    }

    // Pooled within-class covariance via the class-centered data matrix.
    let centered = DMatrix::from_fn(n, k, |r, c| {
        rows[r].as_ref()[c] - means[class_index(labels[r])][c]
    });
    let denom = T::from_f64_lossy((n - classes.len()) as f64);
    let mut cov = centered.transpose() * &centered / denom;

    let trace: T = (0..k).map(|i| cov[(i, i)]).sum();
    let ridge = T::from_f64_lossy(LDA_SHRINKAGE) * trace / T::from_f64_lossy(k as f64);
    for i in 0..k {
        cov[(i, i)] += ridge;
    }

    let chol = Cholesky::new(cov).ok_or_else(|| {
        Error::NotPositiveDefinite(
            "pooled covariance is singular even after regularization".into(),
        )
    })?;

    let n_t = T::from_f64_lossy(n as f64);
    let priors: Vec<T> = counts
        .iter()
        .map(|&c| T::from_f64_lossy(c as f64) / n_t)
        .collect();

    let mut weights = Vec::with_capacity(classes.len());
    let mut bias = Vec::with_capacity(classes.len());
    for (mu, &prior) in means.iter().zip(&priors) {
        let w_vec = chol.solve(&DVector::from_fn(k, |i, _| mu[i]));
        let w: Vec<T> = w_vec.iter().copied().collect();
        let b = -dot(mu, &w) / T::from_f64_lossy(2.0) + Float::ln(prior);
        weights.push(w);
        bias.push(b);
    }

    let l = chol.l();
    let mut cov_factor = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            cov_factor[i * k + j] = l[(i, j)];
        }
    }

    Ok(LdaModel {
        labels: classes,
        means,
        priors,
        cov_factor,
        weights,
        bias,
        dim: k,
    })
}

/// Class label with the highest discriminant score; ties break toward the
/// lowest class label.
pub fn lda_predict<T: Real>(model: &LdaModel<T>, x: &[T]) -> Result<usize> {
    let scores = model.decision_scores(x)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(model.labels[best])
}

/// Serialized pipeline model: KL transform, LDA model, class names and the
/// configuration that produced the features. Stored as JSON with `f64`
/// values regardless of the in-memory scalar type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub pipeline: PipelineConfig,
    pub class_names: Vec<String>,
    pub components: usize,
    pub kl_mean: Vec<f64>,
    pub kl_basis: Vec<Vec<f64>>,
    pub kl_eigenvalues: Vec<f64>,
    pub kl_total_variance: f64,
    pub lda_labels: Vec<usize>,
    pub lda_means: Vec<Vec<f64>>,
    pub lda_priors: Vec<f64>,
    pub lda_cov_factor: Vec<f64>,
    pub lda_weights: Vec<Vec<f64>>,
    pub lda_bias: Vec<f64>,
    pub lda_dim: usize,
}

pub const MODEL_VERSION: u32 = 1;

impl TrainedModel {
    pub fn new<T: Real>(
        pipeline: PipelineConfig,
        class_names: Vec<String>,
        kl: &KlTransform<T>,
        components: usize,
        lda: &LdaModel<T>,
    ) -> Self {
        TrainedModel {
            version: MODEL_VERSION,
            pipeline,
            class_names,
            components,
            kl_mean: to_f64_vec(&kl.mean),
            kl_basis: kl.basis.iter().map(|b| to_f64_vec(b)).collect(),
            kl_eigenvalues: to_f64_vec(&kl.eigenvalues),
            kl_total_variance: kl.total_variance.to_f64_lossy(),
            lda_labels: lda.labels.clone(),
            lda_means: lda.means.iter().map(|m| to_f64_vec(m)).collect(),
            lda_priors: to_f64_vec(&lda.priors),
            lda_cov_factor: to_f64_vec(&lda.cov_factor),
            lda_weights: lda.weights.iter().map(|w| to_f64_vec(w)).collect(),
            lda_bias: to_f64_vec(&lda.bias),
            lda_dim: lda.dim,
        }
    }

    pub fn kl_transform<T: Real>(&self) -> KlTransform<T> {
        KlTransform {
            mean: from_f64_vec(&self.kl_mean),
            basis: self.kl_basis.iter().map(|b| from_f64_vec(b)).collect(),
            eigenvalues: from_f64_vec(&self.kl_eigenvalues),
            total_variance: T::from_f64_lossy(self.kl_total_variance),
        }
    }

    pub fn lda_model<T: Real>(&self) -> LdaModel<T> {
        LdaModel {
            labels: self.lda_labels.clone(),
            means: self.lda_means.iter().map(|m| from_f64_vec(m)).collect(),
            priors: from_f64_vec(&self.lda_priors),
            cov_factor: from_f64_vec(&self.lda_cov_factor),
            weights: self.lda_weights.iter().map(|w| from_f64_vec(w)).collect(),
            bias: from_f64_vec(&self.lda_bias),
            dim: self.lda_dim,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: TrainedModel =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        if model.version != MODEL_VERSION {
            return Err(Error::parse(
                path,
                format!(
                    "unsupported model version {} (expected {MODEL_VERSION})",
                    model.version
                ),
            ));
        }
        Ok(model)
    }
}

fn to_f64_vec<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

fn from_f64_vec<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from_f64_lossy(x)).collect()
}
