//! Independent reference computations for the integration tests.
//!
//! Nothing here calls into the crate's linear algebra: densities use LU
//! inverses and eigenvalue log-determinants, integrals use adaptive Simpson.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use abic::{InverseProblem, PriorModel};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub a: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub w_beta: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub beta: DVector<f64>,
    pub y: DVector<f64>,
    pub sigma2: f64,
    pub sigma_beta2: f64,
}

impl Fixture {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn t(&self) -> usize {
        self.a.ncols()
    }

    pub fn kappa(&self) -> f64 {
        self.sigma2 / self.sigma_beta2
    }

    pub fn problem(&self) -> InverseProblem {
        InverseProblem::new(self.a.clone(), self.y.clone(), Some(self.w.clone())).unwrap()
    }

    pub fn prior(&self) -> PriorModel {
        PriorModel::new(self.mu.clone(), Some(self.w_beta.clone()), Some(self.sigma_beta2)).unwrap()
    }

    pub fn residual(&self) -> DVector<f64> {
        &self.y - &self.a * &self.mu
    }
}

pub fn normals(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_iterator(r, c, (0..r * c).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Orthonormal columns by modified Gram-Schmidt.
pub fn orthonormal(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..m.ncols() {
        for k in 0..j {
            let p = m.column(j).dot(&m.column(k));
            let ck = m.column(k).clone_owned();
            m.column_mut(j).axpy(-p, &ck, 1.0);
        }
        let nrm = m.column(j).norm();
        m.column_mut(j).scale_mut(1.0 / nrm);
    }
    m
}

/// SPD matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = orthonormal(normal_matrix(rng, k, k));
    let d = DVector::from_iterator(k, (0..k).map(|_| rng.random_range(lo..hi)));
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random problem with `A` of condition number `10^log10_cond`, drawn from
/// the model: `β ~ prior`, `y = Aβ + ε`.
pub fn random_fixture(seed: u64, n: usize, t: usize, log10_cond: f64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = orthonormal(normal_matrix(&mut rng, n, t));
    let v = orthonormal(normal_matrix(&mut rng, t, t));
    let s = DVector::from_iterator(
        t,
        (0..t).map(|i| {
            let f = if t == 1 { 0.0 } else { i as f64 / (t - 1) as f64 };
            10f64.powf(-log10_cond * f)
        }),
    );
    let scale = rng.random_range(0.5..3.0);
    let a = &u * DMatrix::from_diagonal(&s) * v.transpose() * scale;
    let w = random_spd(&mut rng, n, 0.5, 2.0);
    let w_beta = random_spd(&mut rng, t, 0.5, 2.0);
    let sigma2 = rng.random_range(0.1..1.0);
    let sigma_beta2 = rng.random_range(0.2..5.0);
    let mu = normals(&mut rng, t);
    let beta = &mu + cov_sqrt(&w_beta, sigma_beta2) * normals(&mut rng, t);
    let eps = cov_sqrt(&w, sigma2) * normals(&mut rng, n);
    let y = &a * &beta + eps;
    Fixture {
        a,
        w,
        w_beta,
        mu,
        beta,
        y,
        sigma2,
        sigma_beta2,
    }
}

/// Mixed-size fixtures, `n ≤ 40`, `t ≤ 8`, condition up to `10^max_log10_cond`.
pub fn fixture_suite(count: usize, base_seed: u64, max_log10_cond: f64) -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    (0..count)
        .map(|i| {
            let t = rng.random_range(1..=8);
            let n = rng.random_range(t.max(2)..=40);
            let c = rng.random_range(0.0..=max_log10_cond);
            random_fixture(base_seed.wrapping_mul(1000).wrapping_add(i as u64), n, t, c)
        })
        .collect()
}

/// Symmetric square root of `(P⁻¹)·v` via the eigen-decomposition of `P`.
pub fn cov_sqrt(p: &DMatrix<f64>, v: f64) -> DMatrix<f64> {
    let e = p.clone().symmetric_eigen();
    let d = e.eigenvalues.map(|l| (v / l).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

pub fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().lu().try_inverse().expect("invertible")
}

/// `ln det` of a symmetric PD matrix from its eigenvalues.
pub fn logdet_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().map(|l| l.ln()).sum()
}

/// `log N(x; mean, cov)`.
pub fn gauss_logpdf_cov(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = x - mean;
    let k = x.len() as f64;
    -0.5 * k * (2.0 * PI).ln() - 0.5 * logdet_eig(cov) - 0.5 * d.dot(&(inverse(cov) * &d))
}

/// `log N(x; mean, P⁻¹ v)` given the weight matrix `P`.
pub fn gauss_logpdf_weight(x: &DVector<f64>, mean: &DVector<f64>, p: &DMatrix<f64>, v: f64) -> f64 {
    let d = x - mean;
    let k = x.len() as f64;
    -0.5 * k * (2.0 * PI * v).ln() + 0.5 * logdet_eig(p) - d.dot(&(p * &d)) / (2.0 * v)
}

/// Dense `E_py = W⁻¹ + A W_β⁻¹ Aᵀ / κ`.
pub fn e_py(f: &Fixture, kappa: f64) -> DMatrix<f64> {
    inverse(&f.w) + &f.a * inverse(&f.w_beta) * f.a.transpose() / kappa
}

/// `(quad, logdet)` of `E_py` from LU and eigenvalues.
pub fn terms(f: &Fixture, r: &DVector<f64>, kappa: f64) -> (f64, f64) {
    let e = e_py(f, kappa);
    (r.dot(&(inverse(&e) * r)), logdet_eig(&e))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn rel_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

/// Max entry difference over the largest entry.
pub fn rel_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(f64::MIN_POSITIVE)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `eps`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    // split first so that narrow peaks are not missed by the coarse estimate
    const PIECES: usize = 16;
    let h = (b - a) / PIECES as f64;
    (0..PIECES)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, eps / PIECES as f64, 40)
        })
        .sum()
}

/// `log ∫ f_y(y|β) π(β) dβ` for `t ∈ {1, 2}` by (nested) adaptive Simpson
/// over a box of ±12 posterior standard deviations.
pub fn log_marginal_by_quadrature(f: &Fixture) -> f64 {
    let t = f.t();
    assert!(t == 1 || t == 2);
    let post_prec = f.a.transpose() * &f.w * &f.a / f.sigma2 + &f.w_beta / f.sigma_beta2;
    let post_cov = inverse(&post_prec);
    let center = &post_cov * (f.a.transpose() * &f.w * &f.y / f.sigma2 + &f.w_beta * &f.mu / f.sigma_beta2);
    let (n, tf) = (f.n() as f64, t as f64);
    let norm = -0.5 * n * (2.0 * PI * f.sigma2).ln() + 0.5 * logdet_eig(&f.w) - 0.5 * tf * (2.0 * PI * f.sigma_beta2).ln()
        + 0.5 * logdet_eig(&f.w_beta);
    let log_joint = |b: &DVector<f64>| {
        let r = &f.y - &f.a * b;
        let d = b - &f.mu;
        norm - r.dot(&(&f.w * &r)) / (2.0 * f.sigma2) - d.dot(&(&f.w_beta * &d)) / (2.0 * f.sigma_beta2)
    };
    let shift = log_joint(&center);
    let half = |i: usize| 12.0 * post_cov[(i, i)].sqrt();
    let integral = if t == 1 {
        adaptive_simpson(
            |x| (log_joint(&DVector::from_element(1, x)) - shift).exp(),
            center[0] - half(0),
            center[0] + half(0),
            1e-12 * half(0),
        )
    } else {
        let inner = |x0: f64| {
            adaptive_simpson(
                |x1| (log_joint(&DVector::from_vec(vec![x0, x1])) - shift).exp(),
                center[1] - half(1),
                center[1] + half(1),
                1e-11 * half(1),
            )
        };
        adaptive_simpson(inner, center[0] - half(0), center[0] + half(0), 1e-10 * half(0) * half(1))
    };
    integral.ln() + shift
}
