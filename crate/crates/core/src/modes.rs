//! Exact per-mode propagators.
//!
//! Every operator in the model acts on a spatial mode `k` as a combination of
//! the identity and the rotation `J_0`. Identifying `R² ≅ C` through
//! `(a, b) ↦ a + ib`, the rotation `J_0 = [[0, 1], [-1, 0]]` becomes
//! multiplication by `-i` and the friction matrix `J_ε = J_0 + εI` becomes the
//! scalar `ε - i`. A mode of the second-order system
//!
//! ```text
//! μ u'' + J_ε u' + α u = 0
//! ```
//!
//! is then a scalar complex ODE with characteristic equation
//! `μ s² + (ε - i) s + α = 0`, and its propagator is a 2×2 complex matrix
//! acting on `(u, v)`.

use std::ops::Mul;

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::quadrature::simpson_weights;
use crate::spectral::{EigenSequence, PhasePoint, SpectralField};

/// Discriminant modulus below which the closed form is abandoned for the
/// Taylor evaluation of the real generator.
pub const CONFLUENT_THRESHOLD: f64 = 1e-8;

/// `J_ε = [[ε, 1], [-1, ε]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionMatrix {
    eps: f64,
}

impl FrictionMatrix {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(invalid(format!("friction must be nonnegative, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.eps, 1.0], [-1.0, self.eps]]
    }

    pub fn det(&self) -> f64 {
        1.0 + self.eps * self.eps
    }

    /// `J_ε^{-1} = (1/(1+ε²)) [[ε, -1], [1, ε]]`.
    pub fn inverse(&self) -> [[f64; 2]; 2] {
        let d = self.det();
        [[self.eps / d, -1.0 / d], [1.0 / d, self.eps / d]]
    }

    /// `J_ε` as the complex scalar `ε - i`.
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.eps, -1.0)
    }

    pub fn inverse_complex(&self) -> Complex64 {
        self.as_complex().inv()
    }

    /// Operator norm of `J_ε^{-1} - J_0^{-1}`, equal to `ε/√(1+ε²)`.
    pub fn inverse_gap(&self) -> f64 {
        (self.inverse_complex() - Complex64::new(0.0, 1.0)).norm()
    }
}

/// Real 2×2 matrix of multiplication by `z`.
pub fn complex_to_real2(z: Complex64) -> [[f64; 2]; 2] {
    [[z.re, -z.im], [z.im, z.re]]
}

/// `e^{t J_ε^{-1}} = e^{εt/(1+ε²)} R(t/(1+ε²))` with `R` the rotation by the
/// given angle.
pub fn exp_j_scaled(eps: f64, t: f64) -> [[f64; 2]; 2] {
    let d = 1.0 + eps * eps;
    let growth = (eps * t / d).exp();
    let (s, c) = (t / d).sin_cos();
    [[growth * c, -growth * s], [growth * s, growth * c]]
}

/// Complex 2×2 matrix acting on a mode state `(u, v) ∈ C²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2c(pub [[Complex64; 2]; 2]);

impl Mat2c {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2c([[one, zero], [zero, one]])
    }

    pub fn apply(&self, w: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [m[0][0] * w[0] + m[0][1] * w[1], m[1][0] * w[0] + m[1][1] * w[1]]
    }

    /// Real 4×4 form in the ordering `(u₁, u₂, v₁, v₂)`.
    pub fn to_real4(&self) -> Matrix4<f64> {
        let mut out = Matrix4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let b = complex_to_real2(self.0[i][j]);
                for r in 0..2 {
                    for c in 0..2 {
                        out[(2 * i + r, 2 * j + c)] = b[r][c];
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`Mat2c::to_real4`]; reads the first column of each block.
    pub fn from_real4(m: &Matrix4<f64>) -> Self {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                *z = Complex64::new(m[(2 * i, 2 * j)], m[(2 * i + 1, 2 * j)]);
            }
        }
        Mat2c(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

impl Mul for Mat2c {
    type Output = Mat2c;
    fn mul(self, rhs: Mat2c) -> Mat2c {
        let a = &self.0;
        let b = &rhs.0;
        Mat2c(std::array::from_fn(|i| {
            std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j])
        }))
    }
}

/// Roots of `μ s² + (ε - i) s + α = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRates {
    /// Root that stays bounded as `μ → 0` (tends to `-α/(ε - i)`).
    pub slow: Complex64,
    /// Root of size `~1/μ` (tends to `-(ε - i)/μ`).
    pub fast: Complex64,
    pub discriminant: Complex64,
}

pub fn characteristic_rates(mu: f64, eps: f64, alpha: f64) -> Result<ModeRates> {
    check_mode_params(mu, eps, alpha)?;
    let c = Complex64::new(eps, -1.0);
    let disc = c * c - 4.0 * mu * alpha;
    let mut sq = disc.sqrt();
    // pick the branch that avoids cancellation in -(c + sq)/2
    if (c.conj() * sq).re < 0.0 {
        sq = -sq;
    }
    let q = -(c + sq) * 0.5;
    Ok(ModeRates {
        slow: alpha / q,
        fast: q / mu,
        discriminant: disc,
    })
}

fn check_mode_params(mu: f64, eps: f64, alpha: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(invalid(format!("mass must be positive, got {mu}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("eigenvalue must be positive, got {alpha}")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(invalid(format!("friction must be nonnegative, got {eps}")));
    }
    Ok(())
}

/// `S_μ^ε(t)` restricted to one spatial mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePropagator {
    pub mu: f64,
    pub eps: f64,
    pub alpha: f64,
    pub t: f64,
    matrix: Mat2c,
}

impl ModePropagator {
    pub fn complex(&self) -> &Mat2c {
        &self.matrix
    }

    pub fn matrix4(&self) -> Matrix4<f64> {
        self.matrix.to_real4()
    }

    pub fn apply_complex(&self, u: Complex64, v: Complex64) -> (Complex64, Complex64) {
        let [a, b] = self.matrix.apply([u, v]);
        (a, b)
    }

    pub fn apply(&self, u: [f64; 2], v: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let (a, b) = self.apply_complex(Complex64::new(u[0], u[1]), Complex64::new(v[0], v[1]));
        ([a.re, a.im], [b.re, b.im])
    }
}

/// Real 4×4 generator `[[0, I], [-(α/μ) I, -J_ε/μ]]` in `(u₁, u₂, v₁, v₂)`.
pub fn generator4(mu: f64, eps: f64, alpha: f64) -> Matrix4<f64> {
    let j = FrictionMatrix { eps }.matrix();
    let mut g = Matrix4::zeros();
    g[(0, 2)] = 1.0;
    g[(1, 3)] = 1.0;
    g[(2, 0)] = -alpha / mu;
    g[(3, 1)] = -alpha / mu;
    for r in 0..2 {
        for c in 0..2 {
            g[(2 + r, 2 + c)] = -j[r][c] / mu;
        }
    }
    g
}

/// Exact `e^{t A_μ^ε}` on one mode.
pub fn second_order_propagator(mu: f64, eps: f64, alpha: f64, t: f64) -> Result<ModePropagator> {
    let rates = characteristic_rates(mu, eps, alpha)?;
    if !t.is_finite() {
        return Err(invalid(format!("time must be finite, got {t}")));
    }
    if rates.discriminant.norm() < CONFLUENT_THRESHOLD {
        return second_order_propagator_taylor(mu, eps, alpha, t);
    }
    let matrix = closed_form(&rates, mu, alpha, t);
    Ok(ModePropagator {
        mu,
        eps,
        alpha,
        t,
        matrix,
    })
}

fn closed_form(rates: &ModeRates, mu: f64, alpha: f64, t: f64) -> Mat2c {
    let (s1, s2) = (rates.slow, rates.fast);
    let e1 = (s1 * t).exp();
    let e2 = (s2 * t).exp();
    let d = s1 - s2;
    let e12 = (e1 - e2) / d;
    Mat2c([
        [(s1 * e2 - s2 * e1) / d, e12],
        [-(alpha / mu) * e12, (s1 * e1 - s2 * e2) / d],
    ])
}

/// Same propagator via scaling-and-squaring Taylor evaluation of the real
/// 4×4 generator. Used when the characteristic roots (nearly) coincide and as
/// an independent cross-check of the closed form.
pub fn second_order_propagator_taylor(mu: f64, eps: f64, alpha: f64, t: f64) -> Result<ModePropagator> {
    check_mode_params(mu, eps, alpha)?;
    let g = generator4(mu, eps, alpha) * t;
    let e = expm_taylor(&g);
    Ok(ModePropagator {
        mu,
        eps,
        alpha,
        t,
        matrix: Mat2c::from_real4(&e),
    })
}

fn expm_taylor(g: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = g.abs().column_sum().max();
    let mut squarings = 0u32;
    if norm > 0.25 {
        squarings = (norm / 0.25).log2().ceil() as u32;
    }
    let a = g / 2f64.powi(squarings as i32);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..=30 {
        term = term * a / k as f64;
        sum += term;
        if term.abs().max() < 1e-18 * sum.abs().max() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Scalar factor of `T_ε(t)` on a mode with eigenvalue `α`:
/// `e^{-α t J_ε^{-1}}` as the complex number `exp(-α t / (ε - i))`.
pub fn first_order_factor(eps: f64, alpha: f64, t: f64) -> Complex64 {
    (-(alpha * t) / Complex64::new(eps, -1.0)).exp()
}

fn check_field(n: usize, eig: &EigenSequence) -> Result<()> {
    if n > eig.len() {
        return Err(invalid(format!(
            "field has {n} modes but only {} eigenvalues are known",
            eig.len()
        )));
    }
    Ok(())
}

/// `S_μ^ε(t) z`, mode by mode. Negative `t` is allowed.
pub fn apply_s_mu_eps(mu: f64, eps: f64, t: f64, z: &PhasePoint, eig: &EigenSequence) -> Result<PhasePoint> {
    check_field(z.n(), eig)?;
    let mut out = z.clone();
    for (k, alpha) in eig.values().iter().take(z.n()).enumerate() {
        let p = second_order_propagator(mu, eps, *alpha, t)?;
        let (u, v) = p.apply(z.u.coeffs()[k], z.v.coeffs()[k]);
        out.u.coeffs_mut()[k] = u;
        out.v.coeffs_mut()[k] = v;
    }
    Ok(out)
}

/// `T_ε(t) u`: each mode multiplied by `e^{-α̂_k t J_ε^{-1}}`.
pub fn apply_t_eps(eps: f64, t: f64, u: &SpectralField, eig: &EigenSequence) -> Result<SpectralField> {
    FrictionMatrix::new(eps)?;
    check_field(u.n(), eig)?;
    let vals: Vec<Complex64> = u
        .to_complex()
        .iter()
        .zip(eig.values())
        .map(|(c, a)| first_order_factor(eps, *a, t) * c)
        .collect();
    Ok(SpectralField::from_complex(&vals))
}

/// `T_0(t) u`, the isometric group of the frictionless first-order system.
pub fn apply_t0(t: f64, u: &SpectralField, eig: &EigenSequence) -> Result<SpectralField> {
    apply_t_eps(0.0, t, u, eig)
}

/// A field sampled at `t_i = i·dt`, `i = 0..samples.len()`.
#[derive(Debug, Clone)]
pub struct FieldPath {
    pub dt: f64,
    pub samples: Vec<SpectralField>,
}

impl FieldPath {
    pub fn new(dt: f64, samples: Vec<SpectralField>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("sample spacing must be positive, got {dt}")));
        }
        let n = samples.first().map(SpectralField::n).unwrap_or(0);
        if samples.iter().any(|s| s.n() != n) {
            return Err(invalid("path samples have inconsistent truncation"));
        }
        Ok(Self { dt, samples })
    }

    /// Samples of `f(t_i)` for `i = 0..=steps`.
    pub fn from_fn(dt: f64, steps: usize, f: impl Fn(f64) -> SpectralField) -> Result<Self> {
        Self::new(dt, (0..=steps).map(|i| f(i as f64 * dt)).collect())
    }

    fn intervals_to(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let n = r.round();
        if (r - n).abs() > 1e-9 * r.max(1.0) || n < 0.0 {
            return Err(invalid(format!("t = {t} is not on the sample grid (dt = {})", self.dt)));
        }
        let n = n as usize;
        if n + 1 > self.samples.len() {
            return Err(invalid(format!("path covers {} samples, t needs {}", self.samples.len(), n + 1)));
        }
        if n < 2 {
            return Err(Error::RefinementRequired(format!("[0, {t}] needs at least two sample intervals")));
        }
        Ok(n)
    }
}

/// Quadrature value and its Richardson half-step estimate (when the interval
/// count is a multiple of four).
#[derive(Debug, Clone)]
pub struct DuhamelEstimate {
    pub value: SpectralField,
    pub error_estimate: Option<f64>,
}

fn duhamel<F>(psi: &FieldPath, t: f64, eig: &EigenSequence, kernel: F) -> Result<DuhamelEstimate>
where
    F: Fn(usize, f64) -> Result<Complex64>,
{
    let n = psi.intervals_to(t)?;
    let modes = psi.samples[0].n();
    check_field(modes, eig)?;
    let integrate = |stride: usize| -> Result<Vec<Complex64>> {
        let m = n / stride;
        let w = simpson_weights(m, psi.dt * stride as f64)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); modes];
        for (j, wj) in w.iter().enumerate() {
            let i = j * stride;
            let lag = t - i as f64 * psi.dt;
            let vals = psi.samples[i].to_complex();
            for (k, a) in acc.iter_mut().enumerate() {
                *a += kernel(k, lag)? * vals[k] * *wj;
            }
        }
        Ok(acc)
    };
    let fine = integrate(1)?;
    let error_estimate = if n % 4 == 0 {
        let coarse = integrate(2)?;
        let d: f64 = fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm_sqr()).sum();
        Some(d.sqrt() / 15.0)
    } else {
        None
    };
    Ok(DuhamelEstimate {
        value: SpectralField::from_complex(&fine),
        error_estimate,
    })
}

/// `(1/μ) ∫₀ᵗ Π₁ S_μ^ε(t-s)(0, ψ(s)) ds` by composite Simpson.
///
/// The kernel oscillates on the scale `μ`, so samples must satisfy `dt ≤ μ/10`.
pub fn duhamel_first_component(
    mu: f64,
    eps: f64,
    psi: &FieldPath,
    t: f64,
    eig: &EigenSequence,
) -> Result<DuhamelEstimate> {
    if psi.dt > mu / 10.0 {
        return Err(Error::RefinementRequired(format!(
            "sample spacing {} exceeds μ/10 = {}",
            psi.dt,
            mu / 10.0
        )));
    }
    let rates: Vec<ModeRates> = eig
        .values()
        .iter()
        .map(|a| characteristic_rates(mu, eps, *a))
        .collect::<Result<_>>()?;
    duhamel(psi, t, eig, |k, lag| {
        let alpha = eig.values()[k];
        let m = if rates[k].discriminant.norm() < CONFLUENT_THRESHOLD {
            *second_order_propagator_taylor(mu, eps, alpha, lag)?.complex()
        } else {
            closed_form(&rates[k], mu, alpha, lag)
        };
        Ok(m.0[0][1] / mu)
    })
}

/// `∫₀ᵗ T_ε(t-s) J_ε^{-1} ψ(s) ds` by composite Simpson.
pub fn duhamel_first_order(eps: f64, psi: &FieldPath, t: f64, eig: &EigenSequence) -> Result<DuhamelEstimate> {
    let jinv = FrictionMatrix::new(eps)?.inverse_complex();
    duhamel(psi, t, eig, |k, lag| Ok(first_order_factor(eps, eig.values()[k], lag) * jinv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dirichlet_eigens, weighted_phase_norm};
    use std::f64::consts::PI;

    fn mat_close(a: [[f64; 2]; 2], b: [[f64; 2]; 2], tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).abs() <= tol))
    }

    /// Generic 4-dim RK4 oracle for the linear mode system.
    fn rk4(g: &Matrix4<f64>, x0: [f64; 4], t: f64, dt: f64) -> [f64; 4] {
        let steps = (t / dt).round() as usize;
        let h = t / steps as f64;
        let mut x = nalgebra::Vector4::from(x0);
        for _ in 0..steps {
            let k1 = g * x;
            let k2 = g * (x + k1 * (h / 2.0));
            let k3 = g * (x + k2 * (h / 2.0));
            let k4 = g * (x + k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        [x[0], x[1], x[2], x[3]]
    }

    #[test]
    fn friction_matrix_identities() {
        let j = FrictionMatrix::new(0.3).unwrap();
        let m = j.matrix();
        let inv = j.inverse();
        for i in 0..2 {
            for k in 0..2 {
                let p: f64 = (0..2).map(|l| m[i][l] * inv[l][k]).sum();
                assert!((p - if i == k { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        assert!((j.det() - 1.09).abs() < 1e-15);
        let j0 = FrictionMatrix::new(0.0).unwrap().matrix();
        assert_eq!(j0[0][1], -j0[1][0]);
        assert_eq!(complex_to_real2(j.as_complex()), m);
        assert!(FrictionMatrix::new(-0.1).is_err());
    }

    #[test]
    fn exp_j_scaled_examples() {
        assert!(mat_close(exp_j_scaled(0.0, PI / 2.0), [[0.0, -1.0], [1.0, 0.0]], 1e-15));
        for eps in [0.0, 0.5, 3.0] {
            assert!(mat_close(exp_j_scaled(eps, 0.0), [[1.0, 0.0], [0.0, 1.0]], 0.0));
        }
        let m = exp_j_scaled(1.0, 1.0);
        let frob = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        assert!((frob - 0.5f64.exp() * 2f64.sqrt()).abs() < 1e-14);
        assert!((frob - 2.3316).abs() < 1e-4);
        // inverse pair
        for (eps, t) in [(0.2, 3.0), (2.0, -1.5)] {
            let a = exp_j_scaled(eps, t);
            let b = exp_j_scaled(eps, -t);
            let p: [[f64; 2]; 2] =
                std::array::from_fn(|i| std::array::from_fn(|k| (0..2).map(|l| a[i][l] * b[l][k]).sum()));
            assert!(mat_close(p, [[1.0, 0.0], [0.0, 1.0]], 1e-14));
        }
    }

    #[test]
    fn exp_j_scaled_matches_taylor_series() {
        // Σ (t J_ε^{-1})^k / k! summed directly
        for (eps, t) in [(0.0, PI / 2.0), (0.7, 1.3), (2.0, -0.8)] {
            let jinv = FrictionMatrix::new(eps).unwrap().inverse();
            let mut term = [[1.0, 0.0], [0.0, 1.0]];
            let mut sum = term;
            for k in 1..60 {
                let next: [[f64; 2]; 2] = std::array::from_fn(|i| {
                    std::array::from_fn(|j| (0..2).map(|l| term[i][l] * jinv[l][j] * t).sum::<f64>() / k as f64)
                });
                term = next;
                for i in 0..2 {
                    for j in 0..2 {
                        sum[i][j] += term[i][j];
                    }
                }
            }
            assert!(mat_close(exp_j_scaled(eps, t), sum, 1e-14));
        }
    }

    #[test]
    fn rates_solve_the_characteristic_equation() {
        for (mu, eps, alpha) in [(1.0, 0.0, 1.0), (1e-4, 0.5, 1024.0), (0.1, 2.0, 3.0), (5.0, 0.01, 0.2)] {
            let r = characteristic_rates(mu, eps, alpha).unwrap();
            let c = Complex64::new(eps, -1.0);
            for s in [r.slow, r.fast] {
                let res = mu * s * s + c * s + alpha;
                assert!(res.norm() <= 1e-12 * (alpha + (c * s).norm()), "{res}");
            }
        }
        // μ=1, ε=0, α=1: s = i(1 ± √5)/2
        let r = characteristic_rates(1.0, 0.0, 1.0).unwrap();
        let g1 = (1.0 + 5f64.sqrt()) / 2.0;
        let g2 = (1.0 - 5f64.sqrt()) / 2.0;
        let mut ims = [r.slow.im, r.fast.im];
        ims.sort_by(f64::total_cmp);
        assert!(r.slow.re.abs() < 1e-15 && r.fast.re.abs() < 1e-15);
        assert!((ims[0] - g2).abs() < 1e-14 && (ims[1] - g1).abs() < 1e-14);
    }

    #[test]
    fn propagator_identity_and_group_law() {
        for (mu, eps, alpha) in [(1.0, 0.0, 1.0), (0.01, 0.5, 25.0), (0.1, 1.0, 4.0), (2.0, 0.1, 0.3)] {
            let id = second_order_propagator(mu, eps, alpha, 0.0).unwrap();
            assert!(id.complex().max_abs_diff(&Mat2c::identity()) < 1e-15);
            let a = second_order_propagator(mu, eps, alpha, 0.3).unwrap();
            let b = second_order_propagator(mu, eps, alpha, 0.7).unwrap();
            let ab = second_order_propagator(mu, eps, alpha, 1.0).unwrap();
            let prod = *a.complex() * *b.complex();
            assert!(prod.max_abs_diff(ab.complex()) <= 1e-10 * ab.complex().max_abs().max(1.0));
            let back = second_order_propagator(mu, eps, alpha, -0.3).unwrap();
            let id2 = *a.complex() * *back.complex();
            assert!(id2.max_abs_diff(&Mat2c::identity()) < 1e-10);
        }
    }

    #[test]
    fn propagator_matches_rk4_oracle() {
        let (mu, eps, alpha) = (0.1, 0.5, 4.0);
        let g = generator4(mu, eps, alpha);
        let p = second_order_propagator(mu, eps, alpha, 1.0).unwrap().matrix4();
        for x0 in [[1.0, 0.0, 0.0, 0.0], [0.0, 0.3, -1.0, 0.5]] {
            let oracle = rk4(&g, x0, 1.0, 1e-5);
            let got = p * nalgebra::Vector4::from(x0);
            let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..4 {
                assert!((got[i] - oracle[i]).abs() <= 1e-9 * scale, "{i}: {} vs {}", got[i], oracle[i]);
            }
        }
    }

    #[test]
    fn complex_and_real_paths_agree() {
        for (mu, eps, alpha, t) in [(0.1, 0.5, 4.0, 1.0), (1.0, 0.0, 1.0, 2.5), (0.05, 1.0, 9.0, 0.4), (0.5, 0.2, 2.0, -0.7)] {
            let a = second_order_propagator(mu, eps, alpha, t).unwrap().matrix4();
            let b = second_order_propagator_taylor(mu, eps, alpha, t).unwrap().matrix4();
            let diff = (a - b).abs().max();
            assert!(diff <= 1e-12 * a.abs().max().max(1.0), "diff {diff}");
        }
    }

    #[test]
    fn real_form_of_complex_matrix_is_consistent() {
        let p = second_order_propagator(0.2, 0.3, 2.0, 0.9).unwrap();
        let x = [0.4, -1.1];
        let y = [0.7, 0.2];
        let (u, v) = p.apply(x, y);
        let r = p.matrix4() * nalgebra::Vector4::new(x[0], x[1], y[0], y[1]);
        assert!((r[0] - u[0]).abs() < 1e-15 && (r[1] - u[1]).abs() < 1e-15);
        assert!((r[2] - v[0]).abs() < 1e-15 && (r[3] - v[1]).abs() < 1e-15);
        assert_eq!(Mat2c::from_real4(&p.matrix4()), *p.complex());
    }

    #[test]
    fn propagator_rejects_bad_parameters() {
        assert!(second_order_propagator(0.0, 0.1, 1.0, 1.0).is_err());
        assert!(second_order_propagator(1.0, 0.1, 0.0, 1.0).is_err());
        assert!(second_order_propagator(1.0, -0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn conservation_without_friction() {
        let eig = dirichlet_eigens(PI, 6).unwrap();
        let u = SpectralField::from_coeffs((0..6).map(|k| [1.0 / (k + 1) as f64, 0.3]).collect()).unwrap();
        let v = SpectralField::from_coeffs((0..6).map(|k| [-0.2, k as f64]).collect()).unwrap();
        let z = PhasePoint::new(u, v).unwrap();
        for mu in [1.0, 0.1, 0.01] {
            let n0 = weighted_phase_norm(&z, mu, &eig).unwrap();
            for t in [0.1, 1.0, 7.3] {
                let zt = apply_s_mu_eps(mu, 0.0, t, &z, &eig).unwrap();
                assert!((weighted_phase_norm(&zt, mu, &eig).unwrap() - n0).abs() < 1e-10 * n0);
            }
        }
        let same = apply_s_mu_eps(0.3, 0.4, 0.0, &z, &eig).unwrap();
        assert_eq!(same, z);
    }

    #[test]
    fn semigroup_property_on_fields() {
        let eig = dirichlet_eigens(PI, 5).unwrap();
        let u = SpectralField::from_coeffs(vec![[0.3, -0.1], [1.0, 0.5], [0.0, 0.2], [-0.7, 0.1], [0.05, 0.05]]).unwrap();
        let z = PhasePoint::new(u.clone(), u.scaled(-0.5)).unwrap();
        let a = apply_s_mu_eps(0.2, 0.3, 0.3, &apply_s_mu_eps(0.2, 0.3, 0.7, &z, &eig).unwrap(), &eig).unwrap();
        let b = apply_s_mu_eps(0.2, 0.3, 1.0, &z, &eig).unwrap();
        let d = a.sub(&b).unwrap();
        let scale = weighted_phase_norm(&z, 1.0, &eig).unwrap();
        assert!(d.u.coeffs().iter().chain(d.v.coeffs()).flatten().all(|x| x.abs() <= 1e-10 * scale));
    }

    #[test]
    fn t_eps_examples() {
        let eig = EigenSequence::explicit(vec![1.0]).unwrap();
        let u = SpectralField::single_mode(1, 1, [0.6, 0.8]).unwrap();
        assert_eq!(apply_t_eps(1.0, 0.0, &u, &eig).unwrap(), u);
        let out = apply_t_eps(1.0, 1.0, &u, &eig).unwrap();
        let amp = (out.coeffs()[0][0].powi(2) + out.coeffs()[0][1].powi(2)).sqrt();
        assert!((amp - (-0.5f64).exp()).abs() < 1e-15);
        // same as multiplying by exp_j_scaled(ε, -α t)
        let m = exp_j_scaled(1.0, -1.0);
        let c = u.coeffs()[0];
        let expect = [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]];
        assert!((out.coeffs()[0][0] - expect[0]).abs() < 1e-15);
        assert!((out.coeffs()[0][1] - expect[1]).abs() < 1e-15);
        assert!(apply_t_eps(-1.0, 1.0, &u, &eig).is_err());
    }

    #[test]
    fn t0_is_norm_preserving() {
        let eig = dirichlet_eigens(PI, 8).unwrap();
        let u = SpectralField::from_coeffs((0..8).map(|k| [(k as f64).sin(), (k as f64).cos()]).collect()).unwrap();
        for theta in [-1.0, 0.0, 1.0] {
            let n0 = crate::spectral::sobolev_norm(&u, theta.into(), &eig).unwrap();
            let n1 = crate::spectral::sobolev_norm(&apply_t0(10.0, &u, &eig).unwrap(), theta.into(), &eig).unwrap();
            assert!((n1 - n0).abs() <= 1e-13 * n0);
        }
    }

    #[test]
    fn duhamel_zero_and_grid_checks() {
        let eig = EigenSequence::explicit(vec![1.0, 4.0]).unwrap();
        let path = FieldPath::from_fn(0.001, 1000, |_| SpectralField::zeros(2)).unwrap();
        let r = duhamel_first_component(0.1, 0.5, &path, 1.0, &eig).unwrap();
        assert_eq!(r.value, SpectralField::zeros(2));
        let coarse = FieldPath::from_fn(0.05, 20, |_| SpectralField::zeros(2)).unwrap();
        assert!(matches!(
            duhamel_first_component(0.1, 0.5, &coarse, 1.0, &eig),
            Err(Error::RefinementRequired(_))
        ));
        assert!(duhamel_first_component(0.1, 0.5, &path, 1.0005, &eig).is_err());
        assert!(duhamel_first_component(0.1, 0.5, &path, 2.0, &eig).is_err());
    }

    #[test]
    fn duhamel_constant_forcing_matches_closed_form() {
        // μ u'' + J_ε u' + α u = ψ with u(0)=u'(0)=0 and constant ψ has the
        // variation-of-constants solution
        //   u(t) = ψ/α + c₁ e^{s₁ t} + c₂ e^{s₂ t},  c₁ + c₂ = -ψ/α,  s₁c₁ + s₂c₂ = 0.
        let (mu, eps, alpha) = (0.1, 0.5, 4.0);
        let psi = Complex64::new(0.7, -0.3);
        let r = characteristic_rates(mu, eps, alpha).unwrap();
        let t = 1.0;
        let c1 = -psi / alpha * r.fast / (r.fast - r.slow);
        let c2 = -psi / alpha - c1;
        let exact = psi / alpha + c1 * (r.slow * t).exp() + c2 * (r.fast * t).exp();

        let eig = EigenSequence::explicit(vec![alpha]).unwrap();
        let field = SpectralField::single_mode(1, 1, [psi.re, psi.im]).unwrap();
        let steps = 8000;
        let path = FieldPath::from_fn(t / steps as f64, steps, |_| field.clone()).unwrap();
        let got = duhamel_first_component(mu, eps, &path, t, &eig).unwrap();
        let g = got.value.coeffs()[0];
        assert!((Complex64::new(g[0], g[1]) - exact).norm() < 1e-8, "{g:?} vs {exact}");
        assert!(got.error_estimate.unwrap() < 1e-8);

        // first-order analogue: ∫₀ᵗ e^{-α(t-s)/c} c⁻¹ ψ ds = (ψ/α)(1 - e^{-αt/c})
        let c = Complex64::new(eps, -1.0);
        let exact1 = psi / alpha * (1.0 - (-(alpha * t) / c).exp());
        let got1 = duhamel_first_order(eps, &path, t, &eig).unwrap().value.coeffs()[0];
        assert!((Complex64::new(got1[0], got1[1]) - exact1).norm() < 1e-10);
    }

    #[test]
    fn duhamel_mu_version_approaches_first_order_version() {
        let eig = EigenSequence::explicit(vec![1.0, 4.0]).unwrap();
        let psi = |s: f64| SpectralField::from_coeffs(vec![[s.cos(), 0.5], [0.2, (2.0 * s).sin()]]).unwrap();
        let t = 1.0;
        let mut gaps = Vec::new();
        for mu in [0.1, 0.01, 0.001] {
            let steps = (40.0 / mu) as usize;
            let path = FieldPath::from_fn(t / steps as f64, steps, psi).unwrap();
            let a = duhamel_first_component(mu, 0.5, &path, t, &eig).unwrap().value;
            let b = duhamel_first_order(0.5, &path, t, &eig).unwrap().value;
            let d = a.sub(&b).unwrap();
            gaps.push(d.coeffs().iter().flatten().map(|x| x * x).sum::<f64>().sqrt());
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
        assert!(gaps[2] < 0.02 * gaps[0].max(1e-3) || gaps[2] < 1e-3, "{gaps:?}");
    }
}
