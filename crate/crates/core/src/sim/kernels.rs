//! Per-step linear maps and exact Gaussian increments of the additive
//! convolutions.
//!
//! Over one step the additive noise contributes `∫₀^{dt} K(s) dW(s)` with a
//! deterministic kernel `K`. Writing `dW = Σ_j ξ_j φ_j ds + (remainder)` in the
//! orthonormal shifted Legendre basis `φ_j` of `[0, dt]`, the integral is
//! `Σ_j c_j ξ_j` plus a Gaussian residual independent of the `ξ_j` whose
//! covariance `∫ R R* ds` uses `R = K − Σ_j c_j φ_j`. Both pieces are exact in
//! law; only the `ξ_j` are shared between coupled systems.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;

use super::rng::{StepNoise, LEGENDRE_TERMS};
use crate::error::{invalid, Error, Result};
use crate::modes::{first_order_factor, second_order_propagator, FrictionMatrix, Mat2c};
use crate::quadrature::{adaptive_simpson, gauss_legendre_nodes};

/// Exact per-step covariance of one additive mode of the second-order system
/// and a symmetric square-root factor.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCovariance {
    /// In the ordering `(u₁, u₂, v₁, v₂)`.
    pub cov: Matrix4<f64>,
    /// `factor · factorᵀ = cov`.
    pub factor: Matrix4<f64>,
}

/// `C(dt) = ∫₀^{dt} E(s) N E(s)ᵀ ds` with `N = (λ/μ)² diag(0, 0, 1, 1)`.
pub fn step_covariance(mu: f64, eps: f64, alpha: f64, lambda: f64, dt: f64) -> Result<StepCovariance> {
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("λ must be finite and nonnegative, got {lambda}")));
    }
    second_order_propagator(mu, eps, alpha, 0.0)?;
    if lambda == 0.0 {
        return Ok(StepCovariance {
            cov: Matrix4::zeros(),
            factor: Matrix4::zeros(),
        });
    }
    let n = (lambda / mu).powi(2);
    let integrand = |s: f64| -> [f64; 16] {
        let e = second_order_propagator(mu, eps, alpha, s)
            .expect("parameters validated above")
            .matrix4();
        let cols = e.fixed_columns::<2>(2);
        let m = cols * cols.transpose() * n;
        std::array::from_fn(|i| m[(i / 4, i % 4)])
    };
    let v = adaptive_simpson(integrand, 0.0, dt, 1e-12, 40)?;
    let mut cov = Matrix4::from_fn(|i, j| v[4 * i + j]);
    cov = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let mut d = Matrix4::zeros();
    for i in 0..4 {
        let l = eig.eigenvalues[i];
        if l < -1e-12 * scale {
            return Err(Error::RefinementRequired(format!(
                "step covariance has eigenvalue {l:.3e} (scale {scale:.3e})"
            )));
        }
        d[(i, i)] = l.max(0.0).sqrt();
    }
    Ok(StepCovariance {
        cov,
        factor: eig.eigenvectors * d,
    })
}

/// Orthonormal shifted Legendre polynomials on `[0, dt]`.
fn legendre_at(s: f64, dt: f64) -> [f64; LEGENDRE_TERMS] {
    let x = 2.0 * s / dt - 1.0;
    let p = [1.0, x, 0.5 * (3.0 * x * x - 1.0), 0.5 * (5.0 * x * x * x - 3.0 * x)];
    std::array::from_fn(|j| p[j] * ((2 * j + 1) as f64 / dt).sqrt())
}

fn quad_nodes(rate: f64, dt: f64) -> Vec<(f64, f64)> {
    let panels = ((rate * dt) / 0.25).ceil().max(1.0) as usize;
    gauss_legendre_nodes(0.0, dt, panels)
}

/// One mode of the second-order stepper.
#[derive(Debug, Clone)]
pub struct SecondOrderModeKernel {
    pub prop: Mat2c,
    /// `E(dt)(0, 1/μ)`: response to a velocity impulse.
    pub push: [Complex64; 2],
    /// `c_j = ∫ K φ_j`.
    pub legendre: [[Complex64; 2]; LEGENDRE_TERMS],
    /// Lower-triangular root of the residual covariance.
    pub resid: [[Complex64; 2]; 2],
}

impl SecondOrderModeKernel {
    pub fn new(mu: f64, eps: f64, alpha: f64, lambda: f64, dt: f64) -> Result<Self> {
        let p = second_order_propagator(mu, eps, alpha, dt)?;
        let prop = *p.complex();
        let push = [prop.0[0][1] / mu, prop.0[1][1] / mu];
        let zero = Complex64::new(0.0, 0.0);
        if lambda == 0.0 {
            return Ok(Self {
                prop,
                push,
                legendre: [[zero; 2]; LEGENDRE_TERMS],
                resid: [[zero; 2]; 2],
            });
        }
        let rates = crate::modes::characteristic_rates(mu, eps, alpha)?;
        let nodes = quad_nodes(rates.fast.norm().max(rates.slow.norm()), dt);
        let kernel: Vec<[Complex64; 2]> = nodes
            .iter()
            .map(|(s, _)| {
                let e = second_order_propagator(mu, eps, alpha, dt - s).map(|m| *m.complex())?;
                Ok([e.0[0][1] * (lambda / mu), e.0[1][1] * (lambda / mu)])
            })
            .collect::<Result<_>>()?;
        let mut legendre = [[zero; 2]; LEGENDRE_TERMS];
        for ((s, w), k) in nodes.iter().zip(&kernel) {
            let phi = legendre_at(*s, dt);
            for (c, ph) in legendre.iter_mut().zip(phi) {
                c[0] += k[0] * (w * ph);
                c[1] += k[1] * (w * ph);
            }
        }
        let (mut g11, mut g22, mut g21) = (0.0, 0.0, zero);
        for ((s, w), k) in nodes.iter().zip(&kernel) {
            let phi = legendre_at(*s, dt);
            let mut r = *k;
            for (c, ph) in legendre.iter().zip(phi) {
                r[0] -= c[0] * ph;
                r[1] -= c[1] * ph;
            }
            g11 += w * r[0].norm_sqr();
            g22 += w * r[1].norm_sqr();
            g21 += r[1] * r[0].conj() * *w;
        }
        let l11 = g11.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { g21 / l11 } else { zero };
        let l22 = (g22 - l21.norm_sqr()).max(0.0).sqrt();
        Ok(Self {
            prop,
            push,
            legendre,
            resid: [[Complex64::new(l11, 0.0), zero], [l21, Complex64::new(l22, 0.0)]],
        })
    }

    /// Additive-noise increment of mode `k`.
    pub fn noise(&self, noise: &StepNoise, k: usize) -> [Complex64; 2] {
        let mut x = [Complex64::new(0.0, 0.0); 2];
        for (c, xi) in self.legendre.iter().zip(noise.xi(k)) {
            x[0] += c[0] * xi;
            x[1] += c[1] * xi;
        }
        let z = noise.second_residual(k);
        x[0] += self.resid[0][0] * z[0];
        x[1] += self.resid[1][0] * z[0] + self.resid[1][1] * z[1];
        x
    }

    /// Real 4×4 covariance of [`SecondOrderModeKernel::noise`].
    pub fn sampled_covariance(&self) -> Matrix4<f64> {
        let mut h = [[Complex64::new(0.0, 0.0); 2]; 2];
        for c in &self.legendre {
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += c[i] * c[j].conj();
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    h[i][j] += self.resid[i][l] * self.resid[j][l].conj();
                }
            }
        }
        hermitian_to_real(&h)
    }
}

/// Real covariance of the circular complex vector with `E[X X*] = 2H`.
fn hermitian_to_real(h: &[[Complex64; 2]; 2]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let z = h[i][j];
            m[(2 * i, 2 * j)] = z.re;
            m[(2 * i + 1, 2 * j + 1)] = z.re;
            m[(2 * i, 2 * j + 1)] = -z.im;
            m[(2 * i + 1, 2 * j)] = z.im;
        }
    }
    m
}

/// One mode of the first-order stepper.
#[derive(Debug, Clone)]
pub struct FirstOrderModeKernel {
    /// `e^{−α dt J_ε^{-1}}`.
    pub factor: Complex64,
    /// `e^{−α dt J_ε^{-1}} J_ε^{-1}`.
    pub push: Complex64,
    pub legendre: [Complex64; LEGENDRE_TERMS],
    pub resid: f64,
}

impl FirstOrderModeKernel {
    pub fn new(eps: f64, alpha: f64, lambda: f64, dt: f64) -> Result<Self> {
        let jinv = FrictionMatrix::new(eps)?.inverse_complex();
        let factor = first_order_factor(eps, alpha, dt);
        let push = factor * jinv;
        let zero = Complex64::new(0.0, 0.0);
        if lambda == 0.0 {
            return Ok(Self {
                factor,
                push,
                legendre: [zero; LEGENDRE_TERMS],
                resid: 0.0,
            });
        }
        let nodes = quad_nodes(alpha * jinv.norm(), dt);
        let kernel: Vec<Complex64> = nodes
            .iter()
            .map(|(s, _)| first_order_factor(eps, alpha, dt - s) * jinv * lambda)
            .collect();
        let mut legendre = [zero; LEGENDRE_TERMS];
        for ((s, w), k) in nodes.iter().zip(&kernel) {
            for (c, ph) in legendre.iter_mut().zip(legendre_at(*s, dt)) {
                *c += k * (w * ph);
            }
        }
        let mut g = 0.0;
        for ((s, w), k) in nodes.iter().zip(&kernel) {
            let mut r = *k;
            for (c, ph) in legendre.iter().zip(legendre_at(*s, dt)) {
                r -= c * ph;
            }
            g += w * r.norm_sqr();
        }
        Ok(Self {
            factor,
            push,
            legendre,
            resid: g.max(0.0).sqrt(),
        })
    }

    pub fn noise(&self, noise: &StepNoise, k: usize) -> Complex64 {
        let mut x = Complex64::new(0.0, 0.0);
        for (c, xi) in self.legendre.iter().zip(noise.xi(k)) {
            x += c * xi;
        }
        x + noise.first_residual(k) * self.resid
    }

    /// `E|X|²/2`, the variance of each real coordinate of the increment.
    pub fn component_variance(&self) -> f64 {
        self.legendre.iter().map(|c| c.norm_sqr()).sum::<f64>() + self.resid * self.resid
    }
}
