//! Defect functionals for the energy identities and semigroup bounds.
//!
//! Each checker returns a signed defect (or a measured value next to its
//! bound) instead of a verdict, so tolerances are chosen by the caller.
//! Everything is evaluated one spatial mode at a time: on a mode with
//! eigenvalue `α`, `|x|_{H^θ} = α^{θ/2}|x|`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::modes::{
    apply_s_mu_eps, apply_t0, characteristic_rates, first_order_factor, second_order_propagator, FrictionMatrix,
};
use crate::quadrature::{adaptive_simpson, simpson_with_estimate};
use crate::spectral::{sobolev_norm, weighted_phase_norm, EigenSequence, PhasePoint, SobolevIndex, SpectralField};

/// Richardson estimate above which an identity check refuses to answer.
pub const QUADRATURE_GUARD: f64 = 1e-6;

/// Position and velocity of a single spatial mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeState {
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl ModeState {
    pub fn new(u: [f64; 2], v: [f64; 2]) -> Self {
        Self { u, v }
    }

    fn complex(&self) -> [Complex64; 2] {
        [Complex64::new(self.u[0], self.u[1]), Complex64::new(self.v[0], self.v[1])]
    }
}

/// A measured quantity next to the bound it must respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub measured_sup: f64,
    pub bound: f64,
    /// Relative change of the sup when the time grid is halved.
    pub refinement_change: f64,
}

fn mode_state(mu: f64, eps: f64, alpha: f64, z0: [Complex64; 2], t: f64) -> Result<[Complex64; 2]> {
    Ok(second_order_propagator(mu, eps, alpha, t)?.complex().apply(z0))
}

/// Interval count (multiple of 4) keeping `h·max|s|` at or below 0.01.
pub fn auto_quad_steps(mu: f64, eps: f64, alpha: f64, t: f64) -> Result<usize> {
    let r = characteristic_rates(mu, eps, alpha)?;
    let smax = r.slow.norm().max(r.fast.norm());
    let n = (t.abs() * smax / 0.01).ceil() as usize;
    Ok(n.max(64).div_ceil(4) * 4)
}

fn check_identity_args(t: f64, quad_steps: usize) -> Result<usize> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("identity checks need t >= 0, got {t}")));
    }
    if quad_steps < 4 {
        return Err(invalid(format!("need at least 4 quadrature intervals, got {quad_steps}")));
    }
    Ok(quad_steps.div_ceil(4) * 4)
}

fn integral_of<F>(mu: f64, eps: f64, alpha: f64, z0: [Complex64; 2], t: f64, n: usize, f: F) -> Result<f64>
where
    F: Fn([Complex64; 2]) -> f64,
{
    if t == 0.0 {
        return Ok(0.0);
    }
    let h = t / n as f64;
    let samples: Vec<f64> = (0..=n)
        .map(|i| mode_state(mu, eps, alpha, z0, i as f64 * h).map(&f))
        .collect::<Result<_>>()?;
    let (value, est) = simpson_with_estimate(&samples, h)?;
    if est > QUADRATURE_GUARD {
        return Err(Error::RefinementRequired(format!(
            "energy integral Richardson estimate {est:.3e} with {n} intervals"
        )));
    }
    Ok(value)
}

/// First energy identity on one mode (divided through by `α^θ`):
///
/// `[μ|v(t)|²/α + |u(t)|² + (2ε/α)∫₀ᵗ|v|²] − [μ|y|²/α + |x|²]`.
pub fn energy_identity_defect(
    mu: f64,
    eps: f64,
    alpha: f64,
    z0: ModeState,
    t: f64,
    quad_steps: usize,
) -> Result<f64> {
    let n = check_identity_args(t, quad_steps)?;
    let w0 = z0.complex();
    let [u, v] = mode_state(mu, eps, alpha, w0, t)?;
    let integral = if eps > 0.0 {
        integral_of(mu, eps, alpha, w0, t, n, |w| w[1].norm_sqr())?
    } else {
        0.0
    };
    let lhs = mu * v.norm_sqr() / alpha + u.norm_sqr() + 2.0 * eps / alpha * integral;
    let rhs = mu * w0[1].norm_sqr() / alpha + w0[0].norm_sqr();
    Ok(lhs - rhs)
}

/// Second energy identity on one mode:
///
/// `[μ|u(t)|² + |μv(t) + J_ε u(t)|²/α + 2ε∫₀ᵗ|u|²] − [μ|x|² + |μy + J_ε x|²/α]`.
pub fn energy_identity2_defect(
    mu: f64,
    eps: f64,
    alpha: f64,
    z0: ModeState,
    t: f64,
    quad_steps: usize,
) -> Result<f64> {
    let n = check_identity_args(t, quad_steps)?;
    let c = Complex64::new(eps, -1.0);
    let w0 = z0.complex();
    let [u, v] = mode_state(mu, eps, alpha, w0, t)?;
    let integral = if eps > 0.0 {
        integral_of(mu, eps, alpha, w0, t, n, |w| w[0].norm_sqr())?
    } else {
        0.0
    };
    let lhs = mu * u.norm_sqr() + (mu * v + c * u).norm_sqr() / alpha + 2.0 * eps * integral;
    let rhs = mu * w0[0].norm_sqr() + (mu * w0[1] + c * w0[0]).norm_sqr() / alpha;
    Ok(lhs - rhs)
}

/// `|Π₁S_μ^ε(t)(0,y)|_{H^θ} − 2^γ μ^{(1+γ)/2}|y|_{H^{θ+γ−1}}` on one mode;
/// nonpositive whenever the envelope holds.
pub fn damped_component_defect(
    mu: f64,
    eps: f64,
    theta: f64,
    gamma: f64,
    alpha: f64,
    y: [f64; 2],
    t: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("γ must lie in [0, 1], got {gamma}")));
    }
    let y = Complex64::new(y[0], y[1]);
    let [u, _] = mode_state(mu, eps, alpha, [Complex64::new(0.0, 0.0), y], t)?;
    let lhs = alpha.powf(theta / 2.0) * u.norm();
    let bound = 2f64.powf(gamma) * mu.powf((1.0 + gamma) / 2.0) * alpha.powf((theta + gamma - 1.0) / 2.0) * y.norm();
    Ok(lhs - bound)
}

/// Uniform grid size for sup-over-time checks on `[0, span]`: 2048 points per
/// unit time and at least 20 per `μ`.
pub fn default_sup_grid(span: f64, mu: f64) -> usize {
    let per_time = (2048.0 * span).ceil();
    let per_mu = (20.0 * span / mu).ceil();
    per_time.max(per_mu).max(16.0) as usize
}

fn grid_sup<F>(t0: f64, t1: f64, intervals: usize, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if intervals == 0 {
        return Err(invalid("time grid needs at least one interval"));
    }
    // fine grid has 2·intervals; coarse sup reads the even nodes
    let n = 2 * intervals;
    let h = (t1 - t0) / n as f64;
    let mut fine = 0.0f64;
    let mut coarse = 0.0f64;
    for i in 0..=n {
        let v = f(t0 + i as f64 * h)?;
        fine = fine.max(v);
        if i % 2 == 0 {
            coarse = coarse.max(v);
        }
    }
    let change = if fine > 0.0 { (fine - coarse) / fine } else { 0.0 };
    Ok((fine, change))
}

fn check_gap_args(eps: f64, t_final: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(invalid(format!("the μ→0 comparison needs ε > 0, got {eps}")));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(invalid(format!("final time must be positive, got {t_final}")));
    }
    Ok(())
}

/// `sup_{t ≤ T} |Π₁S_μ^ε(t)(x,0) − T_ε(t)x|` on a mode, against the Grönwall
/// bound `(μ/ε) α |x| e^{αT}`.
pub fn semigroup_gap_mu(mu: f64, eps: f64, alpha: f64, x: [f64; 2], t_final: f64, grid: usize) -> Result<GapReport> {
    check_gap_args(eps, t_final)?;
    let x = Complex64::new(x[0], x[1]);
    let zero = Complex64::new(0.0, 0.0);
    let (measured_sup, refinement_change) = grid_sup(0.0, t_final, grid, |t| {
        let [u, _] = mode_state(mu, eps, alpha, [x, zero], t)?;
        Ok((u - first_order_factor(eps, alpha, t) * x).norm())
    })?;
    Ok(GapReport {
        measured_sup,
        bound: mu / eps * alpha * x.norm() * (alpha * t_final).exp(),
        refinement_change,
    })
}

/// `sup_{t0 ≤ t ≤ T} |(1/μ)Π₁S_μ^ε(t)(0,y) − T_ε(t)J_ε^{-1}y|` on a mode,
/// against `(e^{−εt0/μ} + μα/ε)|y|e^{αT}`.
pub fn semigroup_gap_mu_velocity(
    mu: f64,
    eps: f64,
    alpha: f64,
    y: [f64; 2],
    t0: f64,
    t_final: f64,
    grid: usize,
) -> Result<GapReport> {
    check_gap_args(eps, t_final)?;
    if !(t0 > 0.0 && t0 < t_final) {
        return Err(invalid(format!("need 0 < t0 < T, got t0={t0}, T={t_final}")));
    }
    let y = Complex64::new(y[0], y[1]);
    let zero = Complex64::new(0.0, 0.0);
    let jinv = FrictionMatrix::new(eps)?.inverse_complex();
    let (measured_sup, refinement_change) = grid_sup(t0, t_final, grid, |t| {
        let [u, _] = mode_state(mu, eps, alpha, [zero, y], t)?;
        Ok((u / mu - first_order_factor(eps, alpha, t) * jinv * y).norm())
    })?;
    Ok(GapReport {
        measured_sup,
        bound: ((-eps * t0 / mu).exp() + mu * alpha / eps) * y.norm() * (alpha * t_final).exp(),
        refinement_change,
    })
}

/// A measured distance and the bound it must respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub measured: f64,
    pub bound: f64,
}

/// `|S_μ^ε(t)z − S_μ^0(t)z|_{𝓗(μ)}` against `(εt/μ)|z|_{𝓗(μ)}`.
pub fn semigroup_gap_eps(mu: f64, eps: f64, z: &PhasePoint, t: f64, eig: &EigenSequence) -> Result<BoundCheck> {
    FrictionMatrix::new(eps)?;
    let a = apply_s_mu_eps(mu, eps, t, z, eig)?;
    let b = apply_s_mu_eps(mu, 0.0, t, z, eig)?;
    let measured = weighted_phase_norm(&a.sub(&b)?, mu, eig)?;
    let bound = eps * t.abs() / mu * weighted_phase_norm(z, mu, eig)?;
    Ok(BoundCheck { measured, bound })
}

/// Truncated singular integrals driving the noise-regularity estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedIntegral {
    /// `∫₀^T s^{−δ}|Π₁S_μ^ε(s)Q_μ e_k|² ds`.
    pub integral_value: f64,
    /// `λ_k²/α_k^{1−δ}`, the scale both integrals are compared against.
    pub reference: f64,
    /// `∫₀^T s^{−δ}|T_ε(s)Q_ε e_k|² ds`, in closed form up to quadrature.
    pub first_order_value: f64,
    /// `T^{1−δ}λ_k²/(1−δ)`.
    pub flat_bound: f64,
}

/// Evaluate both weighted integrals for mode `k` (1-based) on `(0, T]`.
///
/// The substitution `s = τ^{1/(1−δ)}` turns `s^{−δ} ds` into
/// `dτ/(1−δ)`, which removes the endpoint singularity.
pub fn weighted_integral_bound(
    mu: f64,
    eps: f64,
    delta: f64,
    k: usize,
    t_upper: f64,
    eig: &EigenSequence,
    lambda_k: f64,
) -> Result<WeightedIntegral> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ must lie in (0, 1), got {delta}")));
    }
    if k == 0 || k > eig.len() {
        return Err(invalid(format!("mode {k} outside 1..={}", eig.len())));
    }
    if !(t_upper > 0.0) || !(lambda_k >= 0.0) {
        return Err(invalid("need T > 0 and λ ≥ 0"));
    }
    let alpha = eig.values()[k - 1];
    let reference = lambda_k * lambda_k / alpha.powf(1.0 - delta);
    let flat_bound = t_upper.powf(1.0 - delta) * lambda_k * lambda_k / (1.0 - delta);
    if lambda_k == 0.0 {
        return Ok(WeightedIntegral {
            integral_value: 0.0,
            reference,
            first_order_value: 0.0,
            flat_bound,
        });
    }
    let rates = characteristic_rates(mu, eps, alpha)?;
    let q = 1.0 / (1.0 - delta);
    let y = Complex64::new(lambda_k / mu, 0.0);
    let jinv = FrictionMatrix::new(eps)?.inverse_complex();
    let tau_max = t_upper.powf(1.0 - delta);
    // split so each panel holds only a few oscillations of the fast rate
    let osc = (rates.fast.norm() * t_upper).ceil().max(1.0) as usize;
    let panels = osc.min(4096);
    let mut acc = [0.0f64; 2];
    for p in 0..panels {
        let a = tau_max * (p as f64 / panels as f64);
        let b = tau_max * ((p + 1) as f64 / panels as f64);
        let part = adaptive_simpson(
            |tau| {
                let s = tau.powf(q);
                let u = second_order_propagator(mu, eps, alpha, s)
                    .map(|m| m.complex().0[0][1] * y)
                    .unwrap_or(Complex64::new(f64::NAN, 0.0));
                let w = first_order_factor(eps, alpha, s) * jinv * lambda_k;
                [q * u.norm_sqr(), q * w.norm_sqr()]
            },
            a,
            b,
            1e-10,
            40,
        )?;
        acc[0] += part[0];
        acc[1] += part[1];
    }
    if !acc[0].is_finite() {
        return Err(Error::RefinementRequired("weighted integral produced a non-finite value".into()));
    }
    Ok(WeightedIntegral {
        integral_value: acc[0],
        reference,
        first_order_value: acc[1],
        flat_bound,
    })
}

/// `|T_0(t)u|_{H^θ} − |u|_{H^θ}`.
pub fn t0_isometry_defect(u: &SpectralField, theta: SobolevIndex, t: f64, eig: &EigenSequence) -> Result<f64> {
    let before = sobolev_norm(u, theta, eig)?;
    let after = sobolev_norm(&apply_t0(t, u, eig)?, theta, eig)?;
    Ok(after - before)
}

/// Outcome of one family of checks in [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub checked: usize,
    /// Largest defect found (positive means the contract is violated by that much).
    pub max_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, checked: usize, max_defect: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            checked,
            max_defect,
            tolerance,
            passed: max_defect <= tolerance,
        }
    }
}

/// Parameter grid for [`run_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteGrid {
    pub mu: Vec<f64>,
    pub eps: Vec<f64>,
    pub alpha: Vec<f64>,
    pub t: Vec<f64>,
}

impl Default for SuiteGrid {
    fn default() -> Self {
        Self {
            mu: vec![1.0, 0.1, 0.01],
            eps: vec![0.0, 0.1, 1.0],
            alpha: vec![1.0, 4.0, 25.0],
            t: vec![0.0, 0.1, 1.0, 5.0],
        }
    }
}

fn fixed_states() -> [ModeState; 3] {
    [
        ModeState::new([1.0, 0.0], [0.0, 1.0]),
        ModeState::new([0.3, -0.8], [0.5, 0.2]),
        ModeState::new([0.0, 0.0], [-0.6, 0.9]),
    ]
}

/// Run every deterministic identity and bound over the grid.
pub fn run_suite(grid: &SuiteGrid) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let states = fixed_states();

    let (mut e1, mut e2, mut n_e) = (0.0f64, 0.0f64, 0usize);
    let (mut l32, mut n_l32) = (f64::NEG_INFINITY, 0usize);
    for &mu in &grid.mu {
        for &eps in &grid.eps {
            for &alpha in &grid.alpha {
                for &t in &grid.t {
                    let steps = auto_quad_steps(mu, eps, alpha, t)?;
                    for z in &states {
                        e1 = e1.max(energy_identity_defect(mu, eps, alpha, *z, t, steps)?.abs());
                        e2 = e2.max(energy_identity2_defect(mu, eps, alpha, *z, t, steps)?.abs());
                        n_e += 1;
                    }
                    for gamma in [0.0, 0.5, 1.0] {
                        for theta in [-1.0, 0.0] {
                            let d = damped_component_defect(mu, eps, theta, gamma, alpha, states[1].v, t)?;
                            l32 = l32.max(d);
                            n_l32 += 1;
                        }
                    }
                }
            }
        }
    }
    out.push(CheckOutcome::new("energy identity 1", n_e, e1, 1e-8));
    out.push(CheckOutcome::new("energy identity 2", n_e, e2, 1e-8));
    out.push(CheckOutcome::new("damped component envelope", n_l32, l32, 1e-10));

    // T_0 isometry and T_ε decay on a fixed 16-mode field
    let eig = crate::spectral::dirichlet_eigens(std::f64::consts::PI, 16)?;
    let u = SpectralField::from_coeffs(
        (0..16)
            .map(|k| {
                let k = k as f64;
                [(1.3 * k + 0.2).sin() / (1.0 + k), (0.7 * k).cos() / (1.0 + k)]
            })
            .collect(),
    )?;
    let mut iso = 0.0f64;
    let mut n_iso = 0;
    for &t in &grid.t {
        for theta in [-1.0, 0.0, 1.0] {
            let n = sobolev_norm(&u, SobolevIndex(theta), &eig)?;
            iso = iso.max(t0_isometry_defect(&u, SobolevIndex(theta), t, &eig)?.abs() / n);
            n_iso += 1;
        }
    }
    out.push(CheckOutcome::new("T_0 isometry (relative)", n_iso, iso, 1e-12));

    let mut decay = f64::NEG_INFINITY;
    let mut n_decay = 0;
    let norm_u = sobolev_norm(&u, SobolevIndex(0.0), &eig)?;
    for &eps in grid.eps.iter().filter(|e| **e > 0.0) {
        for &t in &grid.t {
            let ut = crate::modes::apply_t_eps(eps, t, &u, &eig)?;
            let bound = (-eps * eig.first() * t / (1.0 + eps * eps)).exp() * norm_u;
            decay = decay.max(sobolev_norm(&ut, SobolevIndex(0.0), &eig)? - bound);
            n_decay += 1;
        }
    }
    if n_decay > 0 {
        out.push(CheckOutcome::new("T_eps decay", n_decay, decay, 1e-12));
    }

    // μ→0 gaps (position and velocity) against their Grönwall envelopes
    let mut gap = f64::NEG_INFINITY;
    let mut n_gap = 0;
    for &eps in grid.eps.iter().filter(|e| **e > 0.0) {
        for &mu in &grid.mu {
            for &alpha in grid.alpha.iter().take(2) {
                let g = semigroup_gap_mu(mu, eps, alpha, [1.0, 0.0], 1.0, default_sup_grid(1.0, mu))?;
                gap = gap.max(g.measured_sup - g.bound);
                let g = semigroup_gap_mu_velocity(mu, eps, alpha, [0.0, 1.0], 0.1, 1.0, default_sup_grid(0.9, mu))?;
                gap = gap.max(g.measured_sup - g.bound);
                n_gap += 2;
            }
        }
    }
    if n_gap > 0 {
        out.push(CheckOutcome::new("small-mass semigroup gap", n_gap, gap, 0.0));
    }

    // ε→0 gap of the second-order group (only meaningful for μ ≤ 1)
    let z = PhasePoint::new(u.clone(), u.scaled(0.5))?;
    let mut eg = f64::NEG_INFINITY;
    let mut n_eg = 0;
    for &mu in grid.mu.iter().filter(|m| **m <= 1.0) {
        for &eps in &grid.eps {
            for &t in &grid.t {
                let c = semigroup_gap_eps(mu, eps, &z, t, &eig)?;
                eg = eg.max(c.measured - c.bound * (1.0 + 1e-10));
                n_eg += 1;
            }
        }
    }
    out.push(CheckOutcome::new("friction gap envelope", n_eg, eg, 0.0));

    let mut fr = f64::NEG_INFINITY;
    for &eps in &grid.eps {
        let j = FrictionMatrix::new(eps)?;
        fr = fr.max(j.inverse_gap() - eps / (1.0 + eps * eps).sqrt() - 1e-15);
    }
    out.push(CheckOutcome::new("J_eps inverse convergence", grid.eps.len(), fr, 0.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dirichlet_eigens;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn energy_identities_examples() {
        let z = ModeState::new([1.0, 0.0], [0.0, 1.0]);
        let d = energy_identity_defect(1.0, 0.5, 4.0, z, 2.0, 4096).unwrap();
        assert!(d.abs() < 1e-8, "{d}");
        let z0 = ModeState::new([0.0; 2], [0.0; 2]);
        assert_eq!(energy_identity_defect(0.3, 0.2, 2.0, z0, 1.0, 64).unwrap(), 0.0);
        assert_eq!(energy_identity2_defect(0.3, 0.2, 2.0, z0, 1.0, 64).unwrap(), 0.0);
        for (mu, alpha, t) in [(1.0, 1.0, 3.0), (0.01, 25.0, 5.0), (0.1, 4.0, 0.7)] {
            assert!(energy_identity_defect(mu, 0.0, alpha, z, t, 8).unwrap().abs() < 1e-10);
            assert!(energy_identity2_defect(mu, 0.0, alpha, z, t, 8).unwrap().abs() < 1e-10);
        }
        let z = ModeState::new([0.37, -1.2], [0.81, 0.44]);
        let steps = auto_quad_steps(0.1, 1.0, 1.0, 1.0).unwrap();
        assert!(energy_identity2_defect(0.1, 1.0, 1.0, z, 1.0, steps).unwrap().abs() < 1e-8);
    }

    #[test]
    fn coarse_quadrature_is_refused() {
        let z = ModeState::new([1.0, 0.0], [0.0, 1.0]);
        assert!(matches!(
            energy_identity_defect(0.01, 1.0, 25.0, z, 5.0, 8),
            Err(Error::RefinementRequired(_))
        ));
    }

    #[test]
    fn damped_component_examples() {
        assert_eq!(damped_component_defect(0.1, 0.5, 0.0, 1.0, 1.0, [0.0, 0.0], 1.0).unwrap(), 0.0);
        let d = damped_component_defect(0.01, 0.5, 0.0, 1.0, 1.0, [1.0, 0.0], 0.3).unwrap();
        assert!(d <= 0.0);
        for i in 0..=500 {
            let t = 5.0 * i as f64 / 500.0;
            assert!(damped_component_defect(0.01, 0.5, 0.0, 1.0, 1.0, [1.0, 0.0], t).unwrap() <= 0.0);
        }
        assert!(damped_component_defect(0.1, 0.5, 0.0, 1.5, 1.0, [1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn small_mass_gap_examples() {
        let g = semigroup_gap_mu(0.3, 0.5, 1.0, [0.0, 0.0], 1.0, 100).unwrap();
        assert_eq!((g.measured_sup, g.bound), (0.0, 0.0));
        let g = semigroup_gap_mu(1e-3, 0.5, 1.0, [1.0, 0.0], 1.0, default_sup_grid(1.0, 1e-3)).unwrap();
        assert!((g.bound - 2e-3 * 1f64.exp()).abs() < 1e-15);
        assert!(g.measured_sup <= g.bound, "{g:?}");
        let mut last = f64::INFINITY;
        for mu in [0.1, 0.01, 0.001] {
            let g = semigroup_gap_mu(mu, 0.5, 1.0, [1.0, 0.0], 1.0, default_sup_grid(1.0, mu)).unwrap();
            assert!(g.measured_sup < last);
            last = g.measured_sup;
        }
        assert!(semigroup_gap_mu(0.1, 0.0, 1.0, [1.0, 0.0], 1.0, 10).is_err());
    }

    #[test]
    fn small_mass_velocity_gap_examples() {
        let g = semigroup_gap_mu_velocity(0.1, 1.0, 1.0, [0.0, 0.0], 0.1, 1.0, 100).unwrap();
        assert_eq!((g.measured_sup, g.bound), (0.0, 0.0));
        let g = semigroup_gap_mu_velocity(1e-4, 1.0, 1.0, [1.0, 0.0], 0.1, 1.0, default_sup_grid(0.9, 1e-4)).unwrap();
        assert!((g.bound - 1e-4 * 1f64.exp()).abs() < 1e-12);
        assert!(g.measured_sup <= g.bound, "{g:?}");
        let a = semigroup_gap_mu_velocity(1e-2, 1.0, 1.0, [1.0, 0.0], 0.1, 1.0, 2000).unwrap();
        let b = semigroup_gap_mu_velocity(1e-3, 1.0, 1.0, [1.0, 0.0], 0.1, 1.0, 20000).unwrap();
        assert!(b.measured_sup < a.measured_sup);
        assert!(semigroup_gap_mu_velocity(0.1, 1.0, 1.0, [1.0, 0.0], 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn friction_gap_examples() {
        let eig = dirichlet_eigens(PI, 16).unwrap();
        let u = SpectralField::from_coeffs((0..16).map(|k| [(k as f64).sin(), 0.5]).collect()).unwrap();
        let z = PhasePoint::new(u.clone(), u.scaled(-2.0)).unwrap();
        let c = semigroup_gap_eps(0.5, 0.0, &z, 1.0, &eig).unwrap();
        assert_eq!(c.measured, 0.0);
        let c = semigroup_gap_eps(0.5, 0.3, &z, 0.0, &eig).unwrap();
        assert_eq!(c.measured, 0.0);
        let c = semigroup_gap_eps(0.5, 0.01, &z, 1.0, &eig).unwrap();
        assert!((c.bound - 0.02 * weighted_phase_norm(&z, 0.5, &eig).unwrap()).abs() < 1e-14);
        assert!(c.measured <= c.bound);
    }

    #[test]
    fn weighted_integral_examples() {
        let eig = dirichlet_eigens(PI, 4).unwrap();
        let w = weighted_integral_bound(0.1, 0.5, 0.3, 2, 1.0, &eig, 0.0).unwrap();
        assert_eq!(w.integral_value, 0.0);
        assert_eq!(w.first_order_value, 0.0);
        assert!(weighted_integral_bound(0.1, 0.5, 1.0, 2, 1.0, &eig, 1.0).is_err());
        assert!(weighted_integral_bound(0.1, 0.5, 0.0, 2, 1.0, &eig, 1.0).is_err());

        // first-order integrand in closed form: λ²/(1+ε²) s^{-δ} e^{-2εαs/(1+ε²)}
        let (eps, delta, t, lam): (f64, f64, f64, f64) = (0.5, 0.3, 1.0, 0.8);
        let alpha = eig.values()[1];
        let rate = 2.0 * eps * alpha / (1.0 + eps * eps);
        let oracle: f64 = {
            // substitute s = τ^{1/(1-δ)} and sum with a fine midpoint rule
            let n = 200_000;
            let q = 1.0 / (1.0 - delta);
            let h = t.powf(1.0 - delta) / n as f64;
            (0..n)
                .map(|i| {
                    let tau = (i as f64 + 0.5) * h;
                    q * (-rate * tau.powf(q)).exp()
                })
                .sum::<f64>()
                * h
                * lam
                * lam
                / (1.0 + eps * eps)
        };
        let w = weighted_integral_bound(0.1, eps, delta, 2, t, &eig, lam).unwrap();
        assert!((w.first_order_value - oracle).abs() < 1e-8 * oracle);
        assert!(w.first_order_value <= w.flat_bound);

        let mut ratios = Vec::new();
        for mu in [1.0, 0.1, 0.01] {
            let w = weighted_integral_bound(mu, 0.5, 0.3, 1, 5.0, &eig, 1.0).unwrap();
            ratios.push(w.integral_value / w.reference);
        }
        // the μ-uniform constant from the proof: 4/(1-δ) + 1/(2ε)
        let c = 4.0 / 0.7 + 1.0;
        assert!(ratios.iter().all(|r| *r <= c), "{ratios:?}");
    }

    #[test]
    fn isometry_examples() {
        let eig = dirichlet_eigens(PI, 8).unwrap();
        assert_eq!(t0_isometry_defect(&SpectralField::zeros(8), SobolevIndex(0.0), 3.0, &eig).unwrap(), 0.0);
    }

    #[test]
    fn default_suite_passes() {
        let out = run_suite(&SuiteGrid::default()).unwrap();
        for o in &out {
            assert!(o.passed, "{o:?}");
        }
        assert!(out.len() >= 8);
    }

    fn unit_field(n: usize) -> impl Strategy<Value = SpectralField> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
            .prop_map(|v| SpectralField::from_coeffs(v.into_iter().map(|(a, b)| [a, b]).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn isometry_on_random_fields(u in unit_field(12), t in 0.0f64..20.0, theta in -1.0f64..1.0) {
            let eig = dirichlet_eigens(PI, 12).unwrap();
            let n = sobolev_norm(&u, SobolevIndex(theta), &eig).unwrap();
            let d = t0_isometry_defect(&u, SobolevIndex(theta), t, &eig).unwrap();
            prop_assert!(d.abs() <= 1e-12 * n.max(1e-300));
        }

        #[test]
        fn envelope_on_random_inputs(
            mu in 1e-3f64..1.0, eps in 0.0f64..2.0, alpha in 0.5f64..50.0,
            gamma in 0.0f64..=1.0, theta in -1.0f64..1.0, t in 0.0f64..5.0,
            y in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let d = damped_component_defect(mu, eps, theta, gamma, alpha, [y.0, y.1], t).unwrap();
            let scale = 2f64.powf(gamma) * mu.powf((1.0 + gamma) / 2.0)
                * alpha.powf((theta + gamma - 1.0) / 2.0) * (y.0.hypot(y.1));
            prop_assert!(d <= 1e-10 * scale.max(1e-300) + 1e-15);
        }

        #[test]
        fn friction_gap_below_envelope(u in unit_field(6), v in unit_field(6), mu in 0.05f64..1.0,
                                      eps in 0.0f64..0.5, t in 0.0f64..2.0) {
            let eig = dirichlet_eigens(PI, 6).unwrap();
            let z = PhasePoint::new(u, v).unwrap();
            let c = semigroup_gap_eps(mu, eps, &z, t, &eig).unwrap();
            prop_assert!(c.measured <= c.bound * (1.0 + 1e-10) + 1e-14);
        }
    }
}
