//! Minimal dense linear algebra: vectors, sample matrices, covariance,
//! symmetric eigendecomposition, PCA, and cosine similarity.
//!
//! The math is generic over the scalar type `F: Float`; the rest of the
//! toolkit uses the `f64` aliases [`Vector`] and [`SampleMatrix`]. All
//! reductions accumulate left to right so results are deterministic for a
//! fixed input.

use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("vector must be nonempty with finite entries")]
    InvalidVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operation undefined for a zero vector")]
    ZeroVector,
    #[error("degenerate input: no variance left after centering")]
    DegenerateInput,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
}

/// Dense vector of activations. Entries are finite and the length is
/// positive, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorOf<F: Float>(Vec<F>);

impl<F: Float> VectorOf<F> {
    pub fn new(values: Vec<F>) -> Result<Self, LinalgError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::InvalidVector);
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<F> {
        self.0
    }

    pub fn norm(&self) -> F {
        dot_unchecked(&self.0, &self.0).sqrt()
    }

    pub fn scaled(&self, factor: F) -> Self {
        Self(self.0.iter().map(|&v| v * factor).collect())
    }
}

impl<F: Float> std::ops::Index<usize> for VectorOf<F> {
    type Output = F;
    fn index(&self, i: usize) -> &F {
        &self.0[i]
    }
}

/// The activation scalar used throughout the pipeline.
pub type Vector = VectorOf<f64>;
pub type SampleMatrix = SampleMatrixOf<f64>;

/// Row-major collection of equal-length vectors (one sample per row).
#[derive(Debug, Clone)]
pub struct SampleMatrixOf<F: Float> {
    rows: Vec<VectorOf<F>>,
    dim: usize,
}

impl<F: Float> SampleMatrixOf<F> {
    pub fn new(rows: Vec<VectorOf<F>>) -> Result<Self, LinalgError> {
        let first = rows.first().ok_or(LinalgError::TooFewRows { needed: 1, got: 0 })?;
        let dim = first.len();
        for row in &rows {
            if row.len() != dim {
                return Err(LinalgError::DimensionMismatch { left: dim, right: row.len() });
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn from_raw(rows: Vec<Vec<F>>) -> Result<Self, LinalgError> {
        Self::new(rows.into_iter().map(VectorOf::new).collect::<Result<_, _>>()?)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[VectorOf<F>] {
        &self.rows
    }

    /// Column means, accumulated row by row.
    pub fn mean(&self) -> Vec<F> {
        let n = F::from(self.rows.len()).expect("row count fits in scalar");
        let mut mean = vec![F::zero(); self.dim];
        for row in &self.rows {
            for (m, &v) in mean.iter_mut().zip(row.as_slice()) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m / n;
        }
        mean
    }

    /// Sample covariance (divisor `n - 1`), optionally mean-centered. With
    /// `center = false` this is the second-moment matrix about the origin.
    #[allow(clippy::needless_range_loop)]
    pub fn covariance(&self, center: bool) -> Result<Vec<Vec<F>>, LinalgError> {
        if self.rows.len() < 2 {
            return Err(LinalgError::TooFewRows { needed: 2, got: self.rows.len() });
        }
        let d = self.dim;
        let denom = F::from(self.rows.len() - 1).expect("row count fits in scalar");
        let mean = if center { self.mean() } else { vec![F::zero(); d] };
        let mut cov = vec![vec![F::zero(); d]; d];
        for row in &self.rows {
            let centered: Vec<F> =
                row.as_slice().iter().zip(&mean).map(|(&v, &m)| v - m).collect();
            for i in 0..d {
                for j in i..d {
                    cov[i][j] = cov[i][j] + centered[i] * centered[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                cov[i][j] = cov[i][j] / denom;
                cov[j][i] = cov[i][j];
            }
        }
        Ok(cov)
    }
}

fn dot_unchecked<F: Float>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

/// Sum of elementwise products, accumulated left to right.
pub fn dot<F: Float>(a: &VectorOf<F>, b: &VectorOf<F>) -> Result<F, LinalgError> {
    if a.len() != b.len() {
        return Err(LinalgError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    Ok(dot_unchecked(a.as_slice(), b.as_slice()))
}

/// Cosine similarity `a.b / (|a||b|)`.
pub fn cosine<F: Float>(a: &VectorOf<F>, b: &VectorOf<F>) -> Result<F, LinalgError> {
    if a.len() != b.len() {
        return Err(LinalgError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == F::zero() || nb == F::zero() {
        return Err(LinalgError::ZeroVector);
    }
    Ok(dot_unchecked(a.as_slice(), b.as_slice()) / (na * nb))
}

/// Leading principal component with its eigenvalue and the covariance trace.
#[derive(Debug, Clone)]
pub struct PcaLeading<F: Float> {
    /// Unit-norm leading eigenvector of the (optionally centered) covariance.
    pub direction: VectorOf<F>,
    pub eigenvalue: F,
    /// Trace of the covariance, i.e. total variance across all components.
    pub total_variance: F,
}

impl<F: Float> PcaLeading<F> {
    pub fn explained_share(&self) -> F {
        if self.total_variance > F::zero() {
            self.eigenvalue / self.total_variance
        } else {
            F::zero()
        }
    }
}

/// Unit-norm leading eigenvector of the sample covariance.
///
/// The eigenvector sign is whatever the solver produces, but it is
/// deterministic for a fixed input; callers that need an oriented direction
/// fix the sign themselves.
pub fn principal_component<F: Float>(
    samples: &SampleMatrixOf<F>,
    center: bool,
) -> Result<VectorOf<F>, LinalgError> {
    Ok(pca_leading(samples, center)?.direction)
}

/// As [`principal_component`], also reporting the leading eigenvalue and the
/// total variance (for explained-variance shares).
pub fn pca_leading<F: Float>(
    samples: &SampleMatrixOf<F>,
    center: bool,
) -> Result<PcaLeading<F>, LinalgError> {
    let cov = samples.covariance(center)?;
    let d = samples.dim();
    let mut trace = F::zero();
    for (i, row) in cov.iter().enumerate() {
        trace = trace + row[i];
    }
    // Degenerate: all rows identical after centering. The trace of a PSD
    // matrix is zero only in that case, up to roundoff from the mean
    // subtraction, hence the scale-relative floor.
    let scale = samples
        .rows()
        .iter()
        .flat_map(|r| r.as_slice().iter())
        .fold(F::zero(), |acc, &v| acc.max(v.abs()));
    let floor = scale * scale * F::from(1e-24).expect("const fits") * F::from(d).expect("dim fits");
    if trace <= floor {
        return Err(LinalgError::DegenerateInput);
    }

    let (eigenvalues, eigenvectors) = jacobi_eigh(&cov);
    let mut lead = 0;
    for (i, &ev) in eigenvalues.iter().enumerate() {
        if ev > eigenvalues[lead] {
            lead = i;
        }
    }
    let mut direction: Vec<F> = eigenvectors.iter().map(|row| row[lead]).collect();
    let norm = dot_unchecked(&direction, &direction).sqrt();
    for v in &mut direction {
        *v = *v / norm;
    }
    Ok(PcaLeading {
        direction: VectorOf::new(direction)?,
        eigenvalue: eigenvalues[lead],
        total_variance: trace,
    })
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-12 * |trace|` (cap 100 sweeps). Returns `(eigenvalues, V)` with
/// eigenvector `i` in column `i` of `V`.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigh<F: Float>(matrix: &[Vec<F>]) -> (Vec<F>, Vec<Vec<F>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<F>> = matrix.to_vec();
    let mut v = vec![vec![F::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = F::one();
    }
    if n == 1 {
        return (vec![a[0][0]], v);
    }

    let mut trace = F::zero();
    for (i, row) in a.iter().enumerate() {
        trace = trace + row[i];
    }
    let tol = F::from(1e-12).expect("const fits") * trace.abs().max(F::min_positive_value());
    let half = F::from(0.5).expect("const fits");

    for _sweep in 0..100 {
        let mut off = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + a[i][j] * a[i][j];
            }
        }
        let off = (off + off).sqrt();
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == F::zero() {
                    continue;
                }
                // Rotation angle zeroing a[p][q].
                let theta = half * F::atan2(a[p][q] + a[p][q], a[p][p] - a[q][q]);
                let c = theta.cos();
                let s = theta.sin();
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp + s * akq;
                    a[k][q] = c * akq - s * akp;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk + s * aqk;
                    a[q][k] = c * aqk - s * apk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp + s * vkq;
                    row[q] = c * vkq - s * vkp;
                }
            }
        }
    }

    let eigenvalues: Vec<F> = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}


/// Brute-force oracles used by tests in this crate and by the acceptance
/// suite. Kept separate from the implementation path they check: covariance
/// is re-accumulated naively and the leading eigenvector comes from a long
/// power iteration, not from the Jacobi solver.
pub mod test_oracle {
    use super::*;

    /// Leading eigenvector of the (optionally centered) covariance via power
    /// iteration with a deterministic start.
    pub fn leading_eigenvector_power(
        samples: &SampleMatrixOf<f64>,
        center: bool,
    ) -> VectorOf<f64> {
        let d = samples.dim();
        let n = samples.row_count();
        let mut mean = vec![0.0f64; d];
        if center {
            for row in samples.rows() {
                for (m, &v) in mean.iter_mut().zip(row.as_slice()) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= n as f64;
            }
        }
        let mut cov = vec![vec![0.0f64; d]; d];
        for row in samples.rows() {
            let c: Vec<f64> = row.as_slice().iter().zip(&mean).map(|(v, m)| v - m).collect();
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += c[i] * c[j];
                }
            }
        }
        for row in &mut cov {
            for v in row.iter_mut() {
                *v /= (n - 1) as f64;
            }
        }

        let mut u = vec![1.0f64; d];
        let mut rng = crate::rng::SplitMix64::new(0xfeed);
        for v in &mut u {
            *v += 0.01 * rng.next_gaussian();
        }
        normalize(&mut u);
        let mut prev = u.clone();
        for iter in 0..500_000usize {
            let mut next = vec![0.0f64; d];
            for i in 0..d {
                for j in 0..d {
                    next[i] += cov[i][j] * u[j];
                }
            }
            normalize(&mut next);
            let align: f64 = next.iter().zip(&prev).map(|(a, b)| a * b).sum::<f64>().abs();
            prev = u;
            u = next;
            if iter > 10 && (1.0 - align) < 1e-16 {
                break;
            }
        }
        VectorOf::new(u).expect("power iteration output is finite")
    }

    fn normalize(u: &mut [f64]) {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            u.iter_mut().for_each(|v| *v /= norm);
        }
    }
}
