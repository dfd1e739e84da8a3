//! Dense symmetric positive-definite helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check, scaled by the largest absolute entry.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Smallest-to-largest singular value ratio below which a matrix is treated
/// as numerically rank deficient.
pub const RANK_RTOL: f64 = 1e3 * f64::EPSILON;

/// Cholesky factor of an SPD matrix together with its log-determinant.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>, what: &'static str) -> Result<Self> {
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite(what))?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !logdet.is_finite() {
            return Err(Error::NotPositiveDefinite(what));
        }
        Ok(Self { chol, logdet })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `ln det(M / c)`, summed per pivot so that no `k ln c` term has to
    /// cancel against the determinant.
    pub fn logdet_scaled(&self, c: f64) -> f64 {
        self.chol.l_dirty().diagonal().iter().map(|d| (d * d / c).ln()).sum()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `xᵀ M⁻¹ x`, computed as `‖L⁻¹x‖²` so the result is never negative.
    pub fn inv_quad(&self, x: &DVector<f64>) -> f64 {
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(x)
            .expect("cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    /// Solves `Lᵀ x = z`. For standard-normal `z` the result has covariance `M⁻¹`.
    pub fn solve_upper_transpose(&self, z: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .tr_solve_lower_triangular(z)
            .expect("cholesky factor has a positive diagonal")
    }
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    symmetry_defect(m) <= SYMMETRY_RTOL
}

/// `max |mᵢⱼ − mⱼᵢ| / max |mᵢⱼ|`; zero for an all-zero matrix.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Forces exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Relative difference `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
