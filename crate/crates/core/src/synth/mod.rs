//! Seeded synthetic embedding populations with known Gaussian parameters,
//! closed-form and brute-force oracles, and scenario fixtures for the
//! evaluation protocol.

mod oracle;
mod rng;
mod scenario;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emb_store::{EmbError, EmbeddingMatrix};

pub use oracle::brute_force_dmin;
pub use rng::GaussianStream;
pub use scenario::{write_fixture, Geometry, Scenario, ScenarioSpec, SpaceSpec};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("oracle input has a zero-norm vector")]
    ZeroNorm,
    #[error("oracle reference set is empty")]
    EmptyReferenceSet,
    #[error("i/o failure at {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Embedding(#[from] EmbError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// `scale · I`
    Isotropic(f64),
    /// Full symmetric positive-definite matrix, row-major rows.
    Full(Vec<Vec<f64>>),
}

/// A Gaussian population to sample: `n` draws of dimension `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub dim: usize,
    pub n: usize,
    pub mu: Vec<f64>,
    pub covariance: Covariance,
    pub rng_seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl PopulationSpec {
    pub fn isotropic(dim: usize, n: usize, mu: Vec<f64>, scale: f64, rng_seed: u64) -> Self {
        Self { dim, n, mu, covariance: Covariance::Isotropic(scale), rng_seed, stream: 0 }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.dim == 0 || self.n == 0 {
            return Err(SynthError::InvalidSpec(format!("shape {}x{} must be positive", self.n, self.dim)));
        }
        if self.mu.len() != self.dim {
            return Err(SynthError::InvalidSpec(format!("mu has {} entries, dim is {}", self.mu.len(), self.dim)));
        }
        if self.mu.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::InvalidSpec("mu has non-finite entries".into()));
        }
        match &self.covariance {
            Covariance::Isotropic(s) if !(s.is_finite() && *s >= 0.0) => {
                Err(SynthError::InvalidSpec(format!("isotropic scale {s} must be finite and non-negative")))
            }
            Covariance::Full(rows) if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) => {
                Err(SynthError::InvalidSpec(format!("covariance must be {0}x{0}", self.dim)))
            }
            _ => Ok(()),
        }
    }

    fn covariance_matrix(&self) -> DMatrix<f64> {
        match &self.covariance {
            Covariance::Isotropic(s) => DMatrix::identity(self.dim, self.dim) * *s,
            Covariance::Full(rows) => DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j]),
        }
    }
}

/// Draws `n` rows from the population's Gaussian. Isotropic draws are
/// `mu + sqrt(scale)·z`; full draws are `mu + L·z` with `L` the Cholesky
/// factor. Rows are rounded to f32.
pub fn sample_population(spec: &PopulationSpec) -> Result<EmbeddingMatrix, SynthError> {
    sample_population_tagged(spec, "synthetic")
}

pub fn sample_population_tagged(spec: &PopulationSpec, space_tag: &str) -> Result<EmbeddingMatrix, SynthError> {
    let rows = sample_rows(spec)?;
    EmbeddingMatrix::from_rows_f64(space_tag, &rows).map_err(|e| SynthError::InvalidSpec(format!("sampled rows: {e}")))
}

/// Same draws as [`sample_population`], kept in f64.
pub fn sample_rows(spec: &PopulationSpec) -> Result<Vec<Vec<f64>>, SynthError> {
    spec.validate()?;
    let mut stream = GaussianStream::new(spec.rng_seed, spec.stream);
    match &spec.covariance {
        Covariance::Isotropic(scale) => {
            let sd = scale.sqrt();
            Ok((0..spec.n).map(|_| spec.mu.iter().map(|m| m + sd * stream.next_normal()).collect()).collect())
        }
        Covariance::Full(_) => {
            let chol = Cholesky::new(spec.covariance_matrix())
                .ok_or_else(|| SynthError::InvalidSpec("covariance is not positive definite".into()))?;
            let l = chol.l();
            let mu = DVector::from_column_slice(&spec.mu);
            Ok((0..spec.n)
                .map(|_| {
                    let z = DVector::from_vec(stream.normals(spec.dim));
                    (&mu + &l * z).iter().copied().collect()
                })
                .collect())
        }
    }
}

/// Exact Fréchet distance between the two specified Gaussians.
///
/// Isotropic pairs use `‖Δμ‖² + D(s_p + s_q − 2√(s_p s_q))`. Otherwise the
/// cross term is the sum of square roots of the (real, non-negative)
/// eigenvalues of the unsymmetrized product `Σp Σq`, obtained from a Schur
/// decomposition.
pub fn analytic_fad(p: &PopulationSpec, q: &PopulationSpec) -> Result<f64, SynthError> {
    p.validate()?;
    q.validate()?;
    if p.dim != q.dim {
        return Err(SynthError::DimensionMismatch { left: p.dim, right: q.dim });
    }
    let mean_term: f64 = p.mu.iter().zip(&q.mu).map(|(a, b)| (a - b) * (a - b)).sum();
    if let (Covariance::Isotropic(sp), Covariance::Isotropic(sq)) = (&p.covariance, &q.covariance) {
        return Ok(mean_term + p.dim as f64 * (sp + sq - 2.0 * (sp * sq).sqrt()));
    }
    let (a, b) = (p.covariance_matrix(), q.covariance_matrix());
    let cross: f64 = (&a * &b).complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).sum();
    Ok(mean_term + a.trace() + b.trace() - 2.0 * cross)
}
