//! Exponential-Euler steppers for the second- and first-order systems.
//!
//! Second order (`z = (u, v)`, one complex pair per mode):
//!
//! ```text
//! z_{n+1} = E(dt) z_n + E(dt)(0, (B(u_n) dt + ΔN_n)/μ) + X_n
//! ```
//!
//! First order:
//!
//! ```text
//! u_{n+1} = e^{−α dt J_ε^{-1}} [u_n + J_ε^{-1}(B(u_n) dt + ΔN_n)] + x_n
//! ```
//!
//! With additive noise `ΔN = 0` and `X_n`, `x_n` are the exact stochastic
//! convolutions over the step; with multiplicative noise `ΔN_n = P_n G(u_n) ΔW_n`
//! is evaluated at the left endpoint (Itô) and `X = x = 0`.

use num_complex::Complex64;

use super::kernels::{FirstOrderModeKernel, SecondOrderModeKernel};
use super::rng::{NoiseLayout, PathNoise, PathSeed, StepNoise, LEGENDRE_TERMS};
use super::spec::{InitialState, Model, SimGrid};
use crate::error::{invalid, Error, Result};
use crate::spectral::{PhasePoint, SpectralField};

/// Phase-space norm above which a run is declared unstable.
pub const BLOWUP_NORM: f64 = 1e8;

/// Common interface of the two steppers.
pub trait Stepper {
    fn layout(&self) -> NoiseLayout;
    fn advance(&mut self, noise: &StepNoise) -> Result<()>;
    fn step_index(&self) -> usize;
    /// Position coefficients as complex numbers.
    fn position(&self) -> &[Complex64];
}

struct Workspace {
    real: Vec<[f64; 2]>,
    weights: Vec<[f64; 2]>,
    drift: Vec<[f64; 2]>,
    kick: Vec<[f64; 2]>,
    grid_a: Vec<[f64; 2]>,
    grid_b: Vec<[f64; 2]>,
}

impl Workspace {
    fn new(model: &Model) -> Self {
        let n = model.n_modes();
        let m = model.transform().map_or(n, |t| t.grid_size());
        Self {
            real: vec![[0.0; 2]; n],
            weights: vec![[0.0; 2]; n],
            drift: vec![[0.0; 2]; n],
            kick: vec![[0.0; 2]; n],
            grid_a: vec![[0.0; 2]; m],
            grid_b: vec![[0.0; 2]; m],
        }
    }

    /// Fill `kick` with `B(u, t) dt + ΔN` for the current position.
    fn impulses(&mut self, model: &Model, u: &[Complex64], t: f64, dt: f64, noise: &StepNoise) {
        for (r, z) in self.real.iter_mut().zip(u) {
            *r = [z.re, z.im];
        }
        let has_drift = !model.drift.is_zero();
        if has_drift {
            model.drift_into(&self.real, t, &mut self.grid_a, &mut self.drift);
        }
        let multiplicative = !model.diffusion.is_additive();
        if multiplicative {
            let sdt = dt.sqrt();
            for (k, (w, lam)) in self.weights.iter_mut().zip(model.noise.lambda()).enumerate() {
                let dw = noise.unit_increment(k) * (sdt * lam);
                *w = [dw.re, dw.im];
            }
            model.diffuse_into(&self.real, &self.weights, &mut self.grid_a, &mut self.grid_b, &mut self.kick);
        } else {
            self.kick.iter_mut().for_each(|c| *c = [0.0; 2]);
        }
        if has_drift {
            for (k, d) in self.kick.iter_mut().zip(&self.drift) {
                k[0] += d[0] * dt;
                k[1] += d[1] * dt;
            }
        }
    }
}

fn check_sizes(model: &Model, grid: &SimGrid, n_init: usize) -> Result<()> {
    let n = model.n_modes();
    if grid.n_modes != n || n_init != n {
        return Err(invalid(format!(
            "mode counts disagree: model {n}, grid {}, initial data {n_init}",
            grid.n_modes
        )));
    }
    Ok(())
}

fn to_complex(f: &SpectralField) -> Vec<Complex64> {
    f.to_complex()
}

fn instability(step: usize, time: f64, detail: impl Into<String>) -> Error {
    Error::Instability {
        step,
        time,
        detail: detail.into(),
    }
}

/// Stepper for `μ u'' + J_ε u' = Δu + B(u) + G(u) Q ẇ`.
pub struct SecondOrderStepper<'a> {
    model: &'a Model,
    mu: f64,
    dt: f64,
    kernels: Vec<SecondOrderModeKernel>,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    step: usize,
    work: Workspace,
}

impl<'a> SecondOrderStepper<'a> {
    pub fn new(mu: f64, eps: f64, model: &'a Model, init: &InitialState, grid: &SimGrid) -> Result<Self> {
        check_sizes(model, grid, init.u0.n())?;
        if init.v0.n() != init.u0.n() {
            return Err(invalid("initial position and velocity truncations differ"));
        }
        grid.check_second_order(mu)?;
        if !(eps >= 0.0) {
            return Err(invalid(format!("friction must be nonnegative, got {eps}")));
        }
        if model.diffusion.is_additive() && !model.noise.is_zero() {
            let f = model.noise.flags();
            if eps > 0.0 && f.h5_delta.is_none() {
                return Err(Error::Precondition("additive noise with friction needs Σλ²/α^{1−δ} < ∞".into()));
            }
            if eps == 0.0 && !f.h6_trace_class {
                return Err(Error::Precondition("additive noise without friction needs trace-class Q".into()));
            }
        }
        let lam_for_kernel = |l: f64| if model.diffusion.is_additive() { l } else { 0.0 };
        let kernels = model
            .eig
            .values()
            .iter()
            .zip(model.noise.lambda())
            .map(|(a, l)| SecondOrderModeKernel::new(mu, eps, *a, lam_for_kernel(*l), grid.dt))
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            mu,
            dt: grid.dt,
            kernels,
            u: to_complex(&init.u0),
            v: to_complex(&init.v0),
            step: 0,
            work: Workspace::new(model),
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn velocity(&self) -> &[Complex64] {
        &self.v
    }

    pub fn state(&self) -> PhasePoint {
        PhasePoint {
            u: SpectralField::from_complex(&self.u),
            v: SpectralField::from_complex(&self.v),
        }
    }
}

impl Stepper for SecondOrderStepper<'_> {
    fn layout(&self) -> NoiseLayout {
        if self.model.diffusion.is_additive() {
            NoiseLayout {
                legendre: LEGENDRE_TERMS,
                second_residual: true,
                first_residual: false,
            }
        } else {
            NoiseLayout::increments_only()
        }
    }

    fn advance(&mut self, noise: &StepNoise) -> Result<()> {
        let t = self.step as f64 * self.dt;
        self.work.impulses(self.model, &self.u, t, self.dt, noise);
        let additive = self.model.diffusion.is_additive();
        let mut norm_sq = 0.0;
        for (k, ker) in self.kernels.iter().enumerate() {
            let kick = Complex64::new(self.work.kick[k][0], self.work.kick[k][1]);
            let [mut u, mut v] = ker.prop.apply([self.u[k], self.v[k]]);
            u += ker.push[0] * kick;
            v += ker.push[1] * kick;
            if additive {
                let x = ker.noise(noise, k);
                u += x[0];
                v += x[1];
            }
            self.u[k] = u;
            self.v[k] = v;
            norm_sq += u.norm_sqr() + v.norm_sqr() / self.model.eig.values()[k];
        }
        self.step += 1;
        if !norm_sq.is_finite() || norm_sq > BLOWUP_NORM * BLOWUP_NORM {
            return Err(instability(
                self.step,
                self.step as f64 * self.dt,
                format!("phase norm {:.3e}", norm_sq.sqrt()),
            ));
        }
        Ok(())
    }

    fn step_index(&self) -> usize {
        self.step
    }

    fn position(&self) -> &[Complex64] {
        &self.u
    }
}

/// Stepper for `J_ε u' = Δu + B(u) + G(u) Q ẇ`.
pub struct FirstOrderStepper<'a> {
    model: &'a Model,
    dt: f64,
    kernels: Vec<FirstOrderModeKernel>,
    u: Vec<Complex64>,
    step: usize,
    work: Workspace,
}

impl<'a> FirstOrderStepper<'a> {
    pub fn new(eps: f64, model: &'a Model, u0: &SpectralField, grid: &SimGrid) -> Result<Self> {
        check_sizes(model, grid, u0.n())?;
        if !(eps >= 0.0) {
            return Err(invalid(format!("friction must be nonnegative, got {eps}")));
        }
        let f = model.noise.flags();
        if eps == 0.0 && !f.h6_trace_class {
            return Err(Error::Precondition(
                "the frictionless first-order system needs trace-class noise".into(),
            ));
        }
        if eps > 0.0 && model.diffusion.is_additive() && f.h5_delta.is_none() {
            return Err(Error::Precondition("additive noise with friction needs Σλ²/α^{1−δ} < ∞".into()));
        }
        let additive = model.diffusion.is_additive();
        let kernels = model
            .eig
            .values()
            .iter()
            .zip(model.noise.lambda())
            .map(|(a, l)| FirstOrderModeKernel::new(eps, *a, if additive { *l } else { 0.0 }, grid.dt))
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            dt: grid.dt,
            kernels,
            u: to_complex(u0),
            step: 0,
            work: Workspace::new(model),
        })
    }

    pub fn state(&self) -> SpectralField {
        SpectralField::from_complex(&self.u)
    }
}

impl Stepper for FirstOrderStepper<'_> {
    fn layout(&self) -> NoiseLayout {
        if self.model.diffusion.is_additive() {
            NoiseLayout {
                legendre: LEGENDRE_TERMS,
                second_residual: false,
                first_residual: true,
            }
        } else {
            NoiseLayout::increments_only()
        }
    }

    fn advance(&mut self, noise: &StepNoise) -> Result<()> {
        let t = self.step as f64 * self.dt;
        self.work.impulses(self.model, &self.u, t, self.dt, noise);
        let additive = self.model.diffusion.is_additive();
        let mut norm_sq = 0.0;
        for (k, ker) in self.kernels.iter().enumerate() {
            let kick = Complex64::new(self.work.kick[k][0], self.work.kick[k][1]);
            let mut u = ker.factor * self.u[k] + ker.push * kick;
            if additive {
                u += ker.noise(noise, k);
            }
            self.u[k] = u;
            norm_sq += u.norm_sqr();
        }
        self.step += 1;
        if !norm_sq.is_finite() || norm_sq > BLOWUP_NORM * BLOWUP_NORM {
            return Err(instability(
                self.step,
                self.step as f64 * self.dt,
                format!("field norm {:.3e}", norm_sq.sqrt()),
            ));
        }
        Ok(())
    }

    fn step_index(&self) -> usize {
        self.step
    }

    fn position(&self) -> &[Complex64] {
        &self.u
    }
}

/// Drive `stepper` over the grid, calling `visit` at every grid time
/// (including `t = 0`).
pub fn run_path<S, F>(stepper: &mut S, seed: PathSeed, grid: &SimGrid, visit: F) -> Result<()>
where
    S: Stepper,
    F: FnMut(usize, &S),
{
    run_path_aggregated(stepper, seed, grid, 1, visit)
}

/// [`run_path`] on a grid `aggregate` times coarser than the one the seed's
/// increments are drawn on: every coarse increment is the exact sum of
/// `aggregate` fine ones. Only defined for increment-only noise layouts.
pub fn run_path_aggregated<S, F>(
    stepper: &mut S,
    seed: PathSeed,
    grid: &SimGrid,
    aggregate: usize,
    mut visit: F,
) -> Result<()>
where
    S: Stepper,
    F: FnMut(usize, &S),
{
    let layout = stepper.layout();
    let n = grid.n_modes;
    let mut gen = PathNoise::new(seed, n, layout, aggregate)?;
    let mut noise = StepNoise::new(n, layout);
    visit(0, stepper);
    for i in 1..=grid.steps {
        gen.fill(&mut noise);
        stepper.advance(&noise)?;
        visit(i, stepper);
    }
    Ok(())
}

/// States of the second-order system at every grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

/// States of a first-order system at every grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
}

pub fn simulate_second_order(
    mu: f64,
    eps: f64,
    model: &Model,
    init: &InitialState,
    grid: &SimGrid,
    seed: PathSeed,
) -> Result<SecondOrderTrajectory> {
    let mut st = SecondOrderStepper::new(mu, eps, model, init, grid)?;
    let mut times = Vec::with_capacity(grid.steps + 1);
    let mut states = Vec::with_capacity(grid.steps + 1);
    run_path(&mut st, seed, grid, |i, s| {
        times.push(grid.time(i));
        states.push(s.state());
    })?;
    Ok(SecondOrderTrajectory { times, states })
}

pub fn simulate_first_order(
    eps: f64,
    model: &Model,
    u0: &SpectralField,
    grid: &SimGrid,
    seed: PathSeed,
) -> Result<FirstOrderTrajectory> {
    let mut st = FirstOrderStepper::new(eps, model, u0, grid)?;
    let mut times = Vec::with_capacity(grid.steps + 1);
    let mut states = Vec::with_capacity(grid.steps + 1);
    run_path(&mut st, seed, grid, |i, s| {
        times.push(grid.time(i));
        states.push(s.state());
    })?;
    Ok(FirstOrderTrajectory { times, states })
}

/// Grid sup of a distance together with the sup over even-indexed times only
/// (the same quantity on a grid of twice the step).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSup {
    pub value: f64,
    pub even_value: f64,
}

impl GridSup {
    fn new() -> Self {
        Self {
            value: 0.0,
            even_value: 0.0,
        }
    }

    fn push(&mut self, i: usize, d: f64) {
        self.value = self.value.max(d);
        if i % 2 == 0 {
            self.even_value = self.even_value.max(d);
        }
    }

    fn pow(self, p: f64) -> Self {
        Self {
            value: self.value.powf(p),
            even_value: self.even_value.powf(p),
        }
    }
}

fn h_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Position path of the first-order system at every grid time.
pub(crate) fn first_order_positions(
    eps: f64,
    model: &Model,
    u0: &SpectralField,
    grid: &SimGrid,
    seed: PathSeed,
) -> Result<Vec<Vec<Complex64>>> {
    let mut st = FirstOrderStepper::new(eps, model, u0, grid)?;
    let mut out = Vec::with_capacity(grid.steps + 1);
    run_path(&mut st, seed, grid, |_, s| out.push(s.position().to_vec()))?;
    Ok(out)
}

/// `sup_t |u_μ^ε(t) − ref(t)|_H^p` for a precomputed reference position path.
pub(crate) fn second_order_sup_against(
    mu: f64,
    eps: f64,
    model: &Model,
    init: &InitialState,
    grid: &SimGrid,
    seed: PathSeed,
    reference: &[Vec<Complex64>],
) -> Result<GridSup> {
    let mut st = SecondOrderStepper::new(mu, eps, model, init, grid)?;
    let mut sup = GridSup::new();
    run_path(&mut st, seed, grid, |i, s| sup.push(i, h_dist(s.position(), &reference[i])))?;
    Ok(sup.pow(grid.p))
}

/// `sup_t |u_ε(t) − ref(t)|_H^p` for the first-order system.
pub(crate) fn first_order_sup_against(
    eps: f64,
    model: &Model,
    u0: &SpectralField,
    grid: &SimGrid,
    seed: PathSeed,
    reference: &[Vec<Complex64>],
) -> Result<GridSup> {
    let mut st = FirstOrderStepper::new(eps, model, u0, grid)?;
    let mut sup = GridSup::new();
    run_path(&mut st, seed, grid, |i, s| sup.push(i, h_dist(s.position(), &reference[i])))?;
    Ok(sup.pow(grid.p))
}

/// Full phase path `(u, v)` of the second-order system.
pub(crate) fn second_order_phases(
    mu: f64,
    eps: f64,
    model: &Model,
    init: &InitialState,
    grid: &SimGrid,
    seed: PathSeed,
) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>> {
    let mut st = SecondOrderStepper::new(mu, eps, model, init, grid)?;
    let mut out = Vec::with_capacity(grid.steps + 1);
    run_path(&mut st, seed, grid, |_, s| out.push((s.position().to_vec(), s.velocity().to_vec())))?;
    Ok(out)
}

/// `sup_t |z_μ^ε(t) − ref(t)|_{𝓗(μ)}^p` against a second-order reference.
pub(crate) fn second_order_weighted_sup_against(
    mu: f64,
    eps: f64,
    model: &Model,
    init: &InitialState,
    grid: &SimGrid,
    seed: PathSeed,
    reference: &[(Vec<Complex64>, Vec<Complex64>)],
) -> Result<GridSup> {
    let mut st = SecondOrderStepper::new(mu, eps, model, init, grid)?;
    let alphas = model.eig.values();
    let mut sup = GridSup::new();
    run_path(&mut st, seed, grid, |i, s| {
        let (ru, rv) = &reference[i];
        let mut acc = 0.0;
        for k in 0..ru.len() {
            acc += (s.position()[k] - ru[k]).norm_sqr() + mu * (s.velocity()[k] - rv[k]).norm_sqr() / alphas[k];
        }
        sup.push(i, acc.sqrt());
    })?;
    Ok(sup.pow(grid.p))
}

/// `sup_t |u_μ^ε(t) − u_ε(t)|_H^p` with both systems driven by the same
/// Brownian path and `u_ε(0) = Π₁z₀`.
pub fn coupled_sup_error(
    mu: f64,
    eps: f64,
    model: &Model,
    init: &InitialState,
    grid: &SimGrid,
    seed: PathSeed,
) -> Result<f64> {
    Ok(coupled_sup_error_detailed(mu, eps, model, init, grid, seed)?.value)
}

/// [`coupled_sup_error`] together with the even-time sup.
pub fn coupled_sup_error_detailed(
    mu: f64,
    eps: f64,
    model: &Model,
    init: &InitialState,
    grid: &SimGrid,
    seed: PathSeed,
) -> Result<GridSup> {
    grid.check_second_order(mu)?;
    let reference = first_order_positions(eps, model, &init.u0, grid, seed)?;
    second_order_sup_against(mu, eps, model, init, grid, seed, &reference)
}

/// Write `t,mode,u1,u2,v1,v2` rows (modes 1-based).
pub fn write_second_order_csv<W: std::io::Write>(out: &mut W, traj: &SecondOrderTrajectory) -> std::io::Result<()> {
    writeln!(out, "t,mode,u1,u2,v1,v2")?;
    for (t, z) in traj.times.iter().zip(&traj.states) {
        for (k, (u, v)) in z.u.coeffs().iter().zip(z.v.coeffs()).enumerate() {
            writeln!(out, "{t},{},{},{},{},{}", k + 1, u[0], u[1], v[0], v[1])?;
        }
    }
    Ok(())
}

/// Same schema as the second-order dump with empty velocity columns.
pub fn write_first_order_csv<W: std::io::Write>(out: &mut W, traj: &FirstOrderTrajectory) -> std::io::Result<()> {
    writeln!(out, "t,mode,u1,u2,v1,v2")?;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        for (k, c) in u.coeffs().iter().enumerate() {
            writeln!(out, "{t},{},{},{},,", k + 1, c[0], c[1])?;
        }
    }
    Ok(())
}
