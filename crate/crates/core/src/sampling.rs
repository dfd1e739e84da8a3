//! Seeded Gaussian draws.
//!
//! Replicate `r` of a study seeded with `s` draws from `ChaCha20Rng` seeded
//! by `seed_from_u64(s)` on stream `r`. Streams are independent keystreams,
//! so replicates can be generated in any order or in parallel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::SpdFactor;

/// Recorded in study metadata.
pub const GENERATOR: &str = "ChaCha20Rng::seed_from_u64(seed), stream = replicate index; rand_distr::StandardNormal";

pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws from `N(0, P⁻¹ v)` for an SPD precision-like weight `P` and scale `v`.
///
/// With `P = LLᵀ`, `x = √v · L⁻ᵀ z` has covariance `v (LLᵀ)⁻¹`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: SpdFactor,
    scale: f64,
    identity: bool,
}

impl GaussianSampler {
    pub fn new(weight: &DMatrix<f64>, variance: f64, what: &'static str) -> Result<Self> {
        let identity = *weight == DMatrix::identity(weight.nrows(), weight.ncols());
        Ok(Self {
            factor: SpdFactor::new(weight, what)?,
            scale: variance.sqrt(),
            identity,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = standard_normals(rng, self.dim());
        let x = if self.identity {
            z
        } else {
            self.factor.solve_upper_transpose(&z)
        };
        x * self.scale
    }
}
