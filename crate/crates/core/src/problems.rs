//! Reproducible ill-posed test problems and synthetic observations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Design, GroundTruth};
use crate::sampling::{replicate_rng, standard_normal_matrix, standard_normals, GaussianSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Phillips,
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    /// Ignored for Phillips, where `t = n`.
    pub t: usize,
    /// Spectrum only: singular values run from 1 down to `10^-decay`.
    pub decay: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn phillips(n: usize) -> Self {
        Self {
            kind: GeneratorKind::Phillips,
            n,
            t: n,
            decay: 0.0,
            seed: 0,
        }
    }

    pub fn spectrum(n: usize, t: usize, decay: f64, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Spectrum,
            n,
            t,
            decay,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GeneratorKind::Phillips => {
                if self.n < 8 || !self.n.is_multiple_of(4) {
                    return Err(Error::Domain(format!(
                        "phillips needs n ≥ 8 and divisible by 4, got {}",
                        self.n
                    )));
                }
            }
            GeneratorKind::Spectrum => {
                if self.t < 2 || self.n < self.t {
                    return Err(Error::Domain(format!(
                        "spectrum needs n ≥ t ≥ 2, got n = {}, t = {}",
                        self.n, self.t
                    )));
                }
                if !(self.decay >= 0.0) || !self.decay.is_finite() {
                    return Err(Error::Domain(format!("decay must be ≥ 0, got {}", self.decay)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub design: Design,
    pub exact_solution: DVector<f64>,
    pub spec: GeneratorSpec,
}

fn phillips_kernel(x: f64) -> f64 {
    if x.abs() < 3.0 {
        1.0 + (PI * x / 3.0).cos()
    } else {
        0.0
    }
}

/// Midpoint-rule discretization on `[−6, 6]` of the convolution kernel
/// `θ(s − u)`, `θ(x) = 1 + cos(πx/3)` on `|x| < 3`.
pub fn phillips_problem(n: usize) -> Result<Generated> {
    let spec = GeneratorSpec::phillips(n);
    spec.validate()?;
    let h = 12.0 / n as f64;
    let mid: Vec<f64> = (0..n).map(|i| -6.0 + (i as f64 + 0.5) * h).collect();
    let a = DMatrix::from_fn(n, n, |i, j| phillips_kernel(mid[i] - mid[j]) * h);
    let exact_solution = DVector::from_iterator(n, mid.iter().map(|&u| phillips_kernel(u)));
    Ok(Generated {
        design: Design::new(a, None)?,
        exact_solution,
        spec,
    })
}

/// `A = U diag(σ) Vᵀ` with seeded orthonormal factors and
/// `σᵢ = 10^(−decay·(i−1)/(t−1))`.
pub fn spectrum_problem(n: usize, t: usize, decay: f64, seed: u64) -> Result<Generated> {
    let spec = GeneratorSpec::spectrum(n, t, decay, seed);
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let u = standard_normal_matrix(&mut rng, n, t).qr().q();
    let v = standard_normal_matrix(&mut rng, t, t).qr().q();
    let sv = DVector::from_iterator(t, (0..t).map(|i| 10f64.powf(-decay * i as f64 / (t - 1) as f64)));
    let a = &u * DMatrix::from_diagonal(&sv) * v.transpose();

    // smooth cubic on [−1, 1], unit norm
    let c = standard_normals(&mut rng, 4);
    let mut x = DVector::from_iterator(
        t,
        (0..t).map(|j| {
            let s = -1.0 + 2.0 * j as f64 / (t - 1) as f64;
            c[0] + c[1] * s + c[2] * s * s + c[3] * s * s * s
        }),
    );
    let norm = x.norm();
    if norm > 0.0 {
        x /= norm;
    }
    Ok(Generated {
        design: Design::new(a, None)?,
        exact_solution: x,
        spec,
    })
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    match spec.kind {
        GeneratorKind::Phillips => phillips_problem(spec.n),
        GeneratorKind::Spectrum => spectrum_problem(spec.n, spec.t, spec.decay, spec.seed),
    }
}

/// `y = A·β̄ + ε`, `ε ~ N(0, W⁻¹σ²)` drawn from stream 0 of `seed`.
pub fn synthesize_observations(
    design: &Design,
    exact_solution: &DVector<f64>,
    sigma2: f64,
    seed: u64,
) -> Result<(DVector<f64>, GroundTruth)> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!("sigma2 must be ≥ 0, got {sigma2}")));
    }
    let truth = GroundTruth::new(design, exact_solution.clone())?;
    if sigma2 == 0.0 {
        return Ok((truth.y_bar().clone(), truth));
    }
    let noise = GaussianSampler::new(design.w(), sigma2, "W")?;
    let y = truth.y_bar() + noise.sample(&mut replicate_rng(seed, 0));
    Ok((y, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phillips_shape_and_symmetry() {
        let g = phillips_problem(32).unwrap();
        let a = g.design.a();
        assert_eq!(a.shape(), (32, 32));
        assert!((a - a.transpose()).amax() < 1e-14);
        assert!(g.exact_solution.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn phillips_solution_support() {
        let g = phillips_problem(16).unwrap();
        let h = 12.0 / 16.0;
        for (i, &v) in g.exact_solution.iter().enumerate() {
            let u: f64 = -6.0 + (i as f64 + 0.5) * h;
            if u.abs() >= 3.0 {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn phillips_rejects_bad_sizes() {
        assert!(phillips_problem(4).is_err());
        assert!(phillips_problem(30).is_err());
        assert!(phillips_problem(8).is_ok());
    }

    #[test]
    fn spectrum_rejects_bad_specs() {
        assert!(spectrum_problem(3, 4, 1.0, 0).is_err());
        assert!(spectrum_problem(4, 1, 1.0, 0).is_err());
        assert!(spectrum_problem(4, 2, -1.0, 0).is_err());
    }

    #[test]
    fn spectrum_is_seeded() {
        let a = spectrum_problem(10, 4, 3.0, 9).unwrap();
        let b = spectrum_problem(10, 4, 3.0, 9).unwrap();
        let c = spectrum_problem(10, 4, 3.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.design, c.design);
        assert!((a.exact_solution.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noiseless_synthesis() {
        let g = phillips_problem(8).unwrap();
        let (y, truth) = synthesize_observations(&g.design, &g.exact_solution, 0.0, 5).unwrap();
        assert_eq!(&y, truth.y_bar());
        assert_eq!(truth.y_bar(), &(g.design.a() * &g.exact_solution));
    }

    #[test]
    fn synthesis_is_seeded() {
        let g = phillips_problem(8).unwrap();
        let (a, _) = synthesize_observations(&g.design, &g.exact_solution, 0.1, 5).unwrap();
        let (b, _) = synthesize_observations(&g.design, &g.exact_solution, 0.1, 5).unwrap();
        let (c, _) = synthesize_observations(&g.design, &g.exact_solution, 0.1, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
