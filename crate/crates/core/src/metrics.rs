//! Embedding-space metrics: cosine nearest-reference distance, reference
//! centroid similarity, Gaussian summaries and the Fréchet distance between
//! them.
//!
//! Vectors are `f64` slices. Cosine quantities accumulate dot products
//! left to right with plain `+=` so results are reproducible bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emb_store::EmbeddingMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("input vector has zero norm")]
    ZeroNormInput,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("reference set is empty")]
    EmptyReferenceSet,
    #[error("no vectors to evaluate")]
    EmptyInput,
    #[error("{ids} clip ids for {rows} vectors")]
    IdCountMismatch { ids: usize, rows: usize },
    #[error("covariance needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("reference centroid has zero norm")]
    ZeroNormCentroid,
    #[error("covariance is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("covariance is not positive semidefinite (min eigenvalue {min:e}, max {max:e})")]
    NotPositiveSemidefinite { min: f64, max: f64 },
    #[error("matrix square root failed: {0}")]
    SqrtmFailure(String),
    #[error("Fréchet distance {0:e} is negative beyond rounding tolerance")]
    NegativeDistance(f64),
}

type Result<T> = std::result::Result<T, MetricError>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Squared Euclidean norm; errors on zero or non-finite.
fn checked_sq_norm(a: &[f64]) -> Result<f64> {
    let n = dot(a, a);
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(MetricError::ZeroNormInput)
    }
}

fn same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch { left: a.len(), right: b.len() })
    }
}

/// Cosine distance from a dot product and both squared norms. Taking one
/// square root of the product makes identical vectors give exactly 0.
#[inline]
fn distance_from_parts(ab: f64, sq_a: f64, sq_b: f64) -> f64 {
    (1.0 - ab / (sq_a * sq_b).sqrt()).clamp(0.0, 2.0)
}

/// `1 - a·b / (‖a‖‖b‖)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    same_dim(a, b)?;
    let (na, nb) = (checked_sq_norm(a)?, checked_sq_norm(b)?);
    Ok(distance_from_parts(dot(a, b), na, nb))
}

/// Reference vectors with their squared norms computed once.
#[derive(Debug, Clone)]
pub struct ReferenceSet<'a> {
    rows: &'a [Vec<f64>],
    sq_norms: Vec<f64>,
}

impl<'a> ReferenceSet<'a> {
    pub fn new(rows: &'a [Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(MetricError::EmptyReferenceSet)?;
        let sq_norms = rows
            .iter()
            .map(|r| {
                same_dim(first, r)?;
                checked_sq_norm(r)
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows, sq_norms })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cosine distance from `g` to its nearest reference.
    pub fn min_distance(&self, g: &[f64]) -> Result<f64> {
        same_dim(g, &self.rows[0])?;
        let ng = checked_sq_norm(g)?;
        let mut best = f64::INFINITY;
        for (r, &nr) in self.rows.iter().zip(&self.sq_norms) {
            best = best.min(distance_from_parts(dot(g, r), ng, nr));
        }
        Ok(best)
    }
}

/// Cosine distance from `g` to the closest row of `refs`.
pub fn min_distance(g: &[f64], refs: &[Vec<f64>]) -> Result<f64> {
    ReferenceSet::new(refs)?.min_distance(g)
}

/// Median with the even-count rule: mean of the two central order statistics.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipDistance {
    pub clip_id: String,
    pub d_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinDistanceResult {
    pub per_clip: Vec<ClipDistance>,
    pub median: f64,
}

pub fn min_distance_condition(gens: &[Vec<f64>], refs: &[Vec<f64>], ids: &[String]) -> Result<MinDistanceResult> {
    if gens.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if ids.len() != gens.len() {
        return Err(MetricError::IdCountMismatch { ids: ids.len(), rows: gens.len() });
    }
    let set = ReferenceSet::new(refs)?;
    let per_clip = gens
        .iter()
        .zip(ids)
        .map(|(g, id)| Ok(ClipDistance { clip_id: id.clone(), d_min: set.min_distance(g)? }))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = per_clip.iter().map(|c| c.d_min).collect();
    let median = median(&values).expect("non-empty");
    Ok(MinDistanceResult { per_clip, median })
}

/// Arithmetic mean of the rows.
pub fn centroid(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or(MetricError::EmptyReferenceSet)?;
    let mut acc = vec![0.0; first.len()];
    for r in rows {
        same_dim(first, r)?;
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Mean cosine similarity of the generated vectors to the reference centroid.
pub fn centroid_similarity(gens: &[Vec<f64>], refs: &[Vec<f64>]) -> Result<f64> {
    if gens.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let c = centroid(refs)?;
    let nc = dot(&c, &c);
    if nc.is_nan() || nc <= 0.0 {
        return Err(MetricError::ZeroNormCentroid);
    }
    let mut sum = 0.0;
    for g in gens {
        same_dim(g, &c)?;
        sum += 1.0 - distance_from_parts(dot(g, &c), checked_sq_norm(g)?, nc);
    }
    Ok(sum / gens.len() as f64)
}

/// Change in mean centroid similarity of a styled population over the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaStat {
    pub styled_mean_sim: f64,
    pub baseline_mean_sim: f64,
    pub delta: f64,
}

pub fn delta(styled_sim: f64, baseline_sim: f64) -> DeltaStat {
    debug_assert!((-1.0..=1.0).contains(&styled_sim) && (-1.0..=1.0).contains(&baseline_sim));
    DeltaStat { styled_mean_sim: styled_sim, baseline_mean_sim: baseline_sim, delta: styled_sim - baseline_sim }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovDivisor {
    /// Unbiased sample covariance, divisor `n - 1`.
    #[default]
    #[serde(rename = "n-1")]
    Unbiased,
    /// Maximum-likelihood covariance, divisor `n`.
    #[serde(rename = "n")]
    Population,
}

impl std::str::FromStr for CovDivisor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "n-1" => Ok(Self::Unbiased),
            "n" => Ok(Self::Population),
            other => Err(format!("unknown covariance divisor {other:?}, expected n-1 or n")),
        }
    }
}

impl std::fmt::Display for CovDivisor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Unbiased => "n-1",
            Self::Population => "n",
        })
    }
}

/// Mean and covariance of a population of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    n: usize,
}

impl GaussianSummary {
    /// Validates a caller-supplied summary: square, symmetric within `1e-8`
    /// relative, and positive semidefinite up to `-1e-6 · λ_max`.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(MetricError::InsufficientSamples(n));
        }
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(MetricError::DimensionMismatch { left: mu.len(), right: sigma.nrows() });
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > 1e-8 * scale {
            return Err(MetricError::NotSymmetric(asym));
        }
        let sym = (&sigma + sigma.transpose()) * 0.5;
        let eig = sym
            .clone()
            .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| MetricError::SqrtmFailure("eigendecomposition did not converge".into()))?;
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if min < -1e-6 * max.abs().max(f64::MIN_POSITIVE) {
            return Err(MetricError::NotPositiveSemidefinite { min, max });
        }
        Ok(Self { mu, sigma: sym, n })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Column mean and covariance of `rows`; the covariance is symmetrized as
/// `(S + Sᵀ) / 2`.
pub fn estimate_gaussian(rows: &[Vec<f64>], divisor: CovDivisor) -> Result<GaussianSummary> {
    let n = rows.len();
    if n < 2 {
        return Err(MetricError::InsufficientSamples(n));
    }
    let d = rows[0].len();
    let mut mu = DVector::zeros(d);
    for r in rows {
        if r.len() != d {
            return Err(MetricError::DimensionMismatch { left: d, right: r.len() });
        }
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    mu /= n as f64;
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mu[j]);
    let denom = match divisor {
        CovDivisor::Unbiased => (n - 1) as f64,
        CovDivisor::Population => n as f64,
    };
    let s = centered.tr_mul(&centered) / denom;
    let sigma = (&s + s.transpose()) * 0.5;
    Ok(GaussianSummary { mu, sigma, n })
}

pub fn estimate_gaussian_matrix(matrix: &EmbeddingMatrix, divisor: CovDivisor) -> Result<GaussianSummary> {
    estimate_gaussian(&matrix.rows_f64(), divisor)
}

const EIGEN_MAX_ITER: usize = 100_000;

/// `Tr((A B)^{1/2})` for symmetric PSD `A`, `B`, computed as the sum of
/// square roots of the eigenvalues of `A^{1/2} B A^{1/2}`.
///
/// If `A` cannot be decomposed or has an eigenvalue below `-1e-6·tr(A)/D`,
/// `1e-10·tr(A)/D` is added to its diagonal and the computation retried
/// once.
pub fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let d = a.nrows();
    let mean_eig = a.trace() / d.max(1) as f64;
    match trace_sqrt_attempt(a, b, mean_eig) {
        Ok(v) => Ok(v),
        Err(first) => {
            let jittered = a + DMatrix::identity(d, d) * (1e-10 * mean_eig);
            trace_sqrt_attempt(&jittered, b, mean_eig)
                .map_err(|second| MetricError::SqrtmFailure(format!("{first}; after jitter: {second}")))
        }
    }
}

fn trace_sqrt_attempt(a: &DMatrix<f64>, b: &DMatrix<f64>, mean_eig: f64) -> std::result::Result<f64, String> {
    let eig = a
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or("eigendecomposition of the first covariance did not converge")?;
    let min = eig.eigenvalues.min();
    if min < -1e-6 * mean_eig.abs() {
        return Err(format!("first covariance has eigenvalue {min:e}"));
    }
    let roots = floor_roots(&eig.eigenvalues);
    let sqrt_a = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    let m = &sqrt_a * b * &sqrt_a;
    let m = (&m + m.transpose()) * 0.5;
    let inner = m
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or("eigendecomposition of the product did not converge")?;
    Ok(floor_roots(&inner.eigenvalues).sum())
}

/// Square roots of eigenvalues, treating anything within the rounding
/// floor `D·ε·λmax` of zero as zero. Without this, the square root turns
/// ~1e-16 noise in the null space into ~1e-8 contributions.
fn floor_roots(eigenvalues: &DVector<f64>) -> DVector<f64> {
    let floor = eigenvalues.len() as f64 * f64::EPSILON * eigenvalues.amax();
    eigenvalues.map(|l| if l > floor { l.sqrt() } else { 0.0 })
}

/// `‖μp − μq‖² + Tr(Σp + Σq − 2(ΣpΣq)^{1/2})`.
///
/// Small negative results from rounding, down to `-1e-6 · max(1, Tr Σp + Tr Σq)`,
/// are clamped to zero.
pub fn frechet_distance(p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(MetricError::DimensionMismatch { left: p.dim(), right: q.dim() });
    }
    let mean_term = (&p.mu - &q.mu).norm_squared();
    let trace = p.sigma.trace() + q.sigma.trace();
    let cross = trace_sqrt_product(&p.sigma, &q.sigma)?;
    let d = mean_term + trace - 2.0 * cross;
    if d >= 0.0 {
        Ok(d)
    } else if d >= -1e-6 * trace.max(1.0) {
        Ok(0.0)
    } else {
        Err(MetricError::NegativeDistance(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn g1(mu: f64, var: f64) -> GaussianSummary {
        GaussianSummary::new(DVector::from_element(1, mu), DMatrix::from_element(1, 1, var), 10).unwrap()
    }

    #[test]
    fn cosine_distance_examples() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[3.0, 0.0], &[-2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(MetricError::ZeroNormInput));
        assert!(matches!(cosine_distance(&[1.0], &[1.0, 0.0]), Err(MetricError::DimensionMismatch { .. })));
    }

    #[test]
    fn min_distance_examples() {
        assert_eq!(min_distance(&[1.0, 0.0], &[vec![1.0, 0.0]]).unwrap(), 0.0);
        assert_eq!(min_distance(&[1.0, 0.0], &[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(), 1.0);
        let d = min_distance(&[1.0, 1.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(d, 1.0 - 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.29289, epsilon = 1e-5);
        assert_eq!(min_distance(&[1.0], &[]), Err(MetricError::EmptyReferenceSet));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[0.1, 0.3, 0.2]), Some(0.2));
        assert_eq!(median(&[0.1, 0.2, 0.3, 0.4]), Some(0.25));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn min_distance_condition_with_self_references() {
        let refs: Vec<Vec<f64>> = (0..15).map(|i| vec![1.0, i as f64, (i * i) as f64]).collect();
        let gens = refs[..10].to_vec();
        let ids: Vec<String> = (0..10).map(|i| format!("g{i}")).collect();
        let r = min_distance_condition(&gens, &refs, &ids).unwrap();
        assert_eq!(r.median, 0.0);
        assert_eq!(r.per_clip.len(), 10);
        assert_eq!(r.per_clip[3].clip_id, "g3");
        assert!(matches!(min_distance_condition(&gens, &refs, &ids[..9]), Err(MetricError::IdCountMismatch { .. })));
        assert_eq!(min_distance_condition(&[], &refs, &[]), Err(MetricError::EmptyInput));
    }

    #[test]
    fn gaussian_estimates() {
        let s = estimate_gaussian(&[vec![0.0, 0.0], vec![2.0, 0.0]], CovDivisor::Unbiased).unwrap();
        assert_eq!(s.mu().as_slice(), &[1.0, 0.0]);
        assert_eq!(s.sigma().as_slice(), &[2.0, 0.0, 0.0, 0.0]);

        let s = estimate_gaussian(&[vec![0.0, 0.0], vec![2.0, 0.0]], CovDivisor::Population).unwrap();
        assert_eq!(s.sigma()[(0, 0)], 1.0);

        let v = vec![0.5, -1.0, 3.0];
        let s = estimate_gaussian(&vec![v.clone(); 6], CovDivisor::Unbiased).unwrap();
        assert_eq!(s.mu().as_slice(), v.as_slice());
        assert!(s.sigma().iter().all(|&x| x == 0.0));

        assert_eq!(estimate_gaussian(&[vec![1.0]], CovDivisor::Unbiased), Err(MetricError::InsufficientSamples(1)));
    }

    #[test]
    fn summary_validation() {
        let mu = DVector::zeros(2);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(GaussianSummary::new(mu.clone(), asym, 5), Err(MetricError::NotSymmetric(_))));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            GaussianSummary::new(mu.clone(), indefinite, 5),
            Err(MetricError::NotPositiveSemidefinite { .. })
        ));
        assert!(matches!(
            GaussianSummary::new(mu, DMatrix::identity(2, 2), 1),
            Err(MetricError::InsufficientSamples(1))
        ));
    }

    #[test]
    fn frechet_closed_forms() {
        assert_eq!(frechet_distance(&g1(0.0, 1.0), &g1(0.0, 1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(frechet_distance(&g1(0.0, 1.0), &g1(1.0, 1.0)).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(frechet_distance(&g1(0.0, 1.0), &g1(0.0, 4.0)).unwrap(), 1.0, epsilon = 1e-12);
        let two = GaussianSummary::new(DVector::zeros(2), DMatrix::identity(2, 2), 3).unwrap();
        assert!(matches!(frechet_distance(&g1(0.0, 1.0), &two), Err(MetricError::DimensionMismatch { .. })));
    }

    #[test]
    fn frechet_handles_rank_deficient_covariances() {
        // 3 samples in 6 dimensions: both covariances have rank ≤ 2.
        let p: Vec<Vec<f64>> = (0..3).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 5) as f64).collect()).collect();
        let q: Vec<Vec<f64>> = (0..3).map(|i| (0..6).map(|j| ((i * 2 + j) % 4) as f64 + 0.5).collect()).collect();
        let sp = estimate_gaussian(&p, CovDivisor::Unbiased).unwrap();
        let sq = estimate_gaussian(&q, CovDivisor::Unbiased).unwrap();
        let d = frechet_distance(&sp, &sq).unwrap();
        assert!(d > 0.0);
        assert!(frechet_distance(&sp, &sp).unwrap() < 1e-9);
        assert_abs_diff_eq!(d, frechet_distance(&sq, &sp).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn zero_covariances() {
        let z = GaussianSummary::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::zeros(2, 2), 4).unwrap();
        let w = GaussianSummary::new(DVector::from_vec(vec![1.0, 0.0]), DMatrix::zeros(2, 2), 4).unwrap();
        assert_eq!(frechet_distance(&z, &w).unwrap(), 4.0);
    }

    #[test]
    fn centroid_similarity_examples() {
        let refs = vec![vec![2.0, 0.0], vec![4.0, 0.0]];
        assert_abs_diff_eq!(centroid_similarity(&[vec![1.0, 0.0]], &refs).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(centroid_similarity(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![1.0, 0.0]]).unwrap(), 0.5);
        assert_eq!(centroid_similarity(&[vec![0.0, 3.0], vec![0.0, -1.0]], &refs).unwrap(), 0.0);
        assert_eq!(
            centroid_similarity(&[vec![1.0, 0.0]], &[vec![1.0, 0.0], vec![-1.0, 0.0]]),
            Err(MetricError::ZeroNormCentroid)
        );
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(0.9, 0.9).delta, 0.0);
        assert_abs_diff_eq!(delta(0.85, 0.70).delta, 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(delta(0.60, 0.75).delta, -0.15, epsilon = 1e-12);
    }

    fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_distance_properties(a in vector(5), b in vector(5), s in 0.01f64..100.0, t in 0.01f64..100.0) {
            let d = cosine_distance(&a, &b).unwrap();
            prop_assert!((0.0..=2.0).contains(&d));
            prop_assert_eq!(d, cosine_distance(&b, &a).unwrap());
            let scaled_a: Vec<f64> = a.iter().map(|x| x * s).collect();
            let scaled_b: Vec<f64> = b.iter().map(|x| x * t).collect();
            prop_assert!((cosine_distance(&scaled_a, &scaled_b).unwrap() - d).abs() < 1e-12);
        }

        #[test]
        fn adding_a_reference_never_increases_min_distance(
            g in vector(4),
            refs in proptest::collection::vec(vector(4), 1..8),
            extra in vector(4),
        ) {
            let before = min_distance(&g, &refs).unwrap();
            let mut grown = refs.clone();
            grown.push(extra);
            prop_assert!(min_distance(&g, &grown).unwrap() <= before);
        }

        #[test]
        fn delta_is_antisymmetric(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            prop_assert_eq!(delta(a, b).delta, -delta(b, a).delta);
        }

        #[test]
        fn estimated_covariance_is_symmetric(rows in proptest::collection::vec(vector(4), 2..20)) {
            let s = estimate_gaussian(&rows, CovDivisor::Unbiased).unwrap();
            prop_assert_eq!(s.sigma().clone(), s.sigma().transpose());
            let min = s.sigma().clone().symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-9 * s.sigma().amax().max(1.0));
        }
    }
}
