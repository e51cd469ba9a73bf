//! Coefficients, noise covariance, and time grid of a simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{EigenSequence, EigenSource, SineTransform, SpectralField};

/// How the covariance weights were specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    Explicit,
    /// `λ_k = k^{-r}`.
    Power { r: f64 },
}

/// Which regularity hypotheses the covariance satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassFlags {
    /// Some `δ ∈ (0,1)` with `Σ λ_k²/α_k^{1−δ} < ∞`.
    pub h5_delta: Option<f64>,
    /// `Σ λ_k² < ∞`.
    pub h6_trace_class: bool,
    /// `sup λ_k < ∞`.
    pub h7_bounded: bool,
}

/// Diagonal covariance `Q e_k = λ_k e_k`, the same weight on both planar
/// components of a spatial mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    lambda: Vec<f64>,
    law: NoiseLaw,
    flags: ClassFlags,
}

impl NoiseSpec {
    /// A finite list; every summability condition holds trivially.
    pub fn explicit(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(invalid("noise weights must be finite and nonnegative"));
        }
        Ok(Self {
            lambda,
            law: NoiseLaw::Explicit,
            flags: ClassFlags {
                h5_delta: Some(0.5),
                h6_trace_class: true,
                h7_bounded: true,
            },
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::explicit(vec![0.0; n]).expect("zeros are valid weights")
    }

    /// `λ_k = k^{-r}` on `n` modes. Flags describe the infinite sequence, using
    /// the eigenvalue growth `α_k ~ k^q` of `eig` (q = 0 when unknown).
    pub fn power(r: f64, n: usize, eig: &EigenSequence) -> Result<Self> {
        if !r.is_finite() {
            return Err(invalid(format!("power-law exponent must be finite, got {r}")));
        }
        let lambda = (1..=n).map(|k| (k as f64).powf(-r)).collect();
        let q = eig.growth_exponent().unwrap_or(0.0);
        // Σ k^{-2r-q(1-δ)} < ∞  ⇔  δ < (2r + q - 1)/q
        let h5_delta = if q > 0.0 {
            let dmax = (2.0 * r + q - 1.0) / q;
            (dmax > 0.0).then(|| (dmax / 2.0).min(0.5))
        } else {
            (2.0 * r > 1.0).then_some(0.5)
        };
        Ok(Self {
            lambda,
            law: NoiseLaw::Power { r },
            flags: ClassFlags {
                h5_delta,
                h6_trace_class: 2.0 * r > 1.0,
                h7_bounded: r >= 0.0,
            },
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn law(&self) -> NoiseLaw {
        self.law
    }

    pub fn flags(&self) -> ClassFlags {
        self.flags
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.lambda.iter().all(|l| *l == 0.0)
    }

    /// `Σ_{k≤n} λ_k²` over the truncation.
    pub fn trace_sq(&self) -> f64 {
        self.lambda.iter().map(|l| l * l).sum()
    }
}

/// Piecewise-linear function through sorted nodes, extended linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(invalid("a table needs at least two (x, y) nodes of equal count"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(invalid("table nodes must be finite with strictly increasing x"));
        }
        Ok(Self { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|v| *v <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn max_slope(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.ys.iter().fold(0.0f64, |m, y| m.max(y.abs()))
    }
}

/// Pointwise drift `b: R² → R²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    /// `b(u) = a·u`.
    Linear { a: f64 },
    /// `b(u) = a·(sin u₁, sin u₂)`.
    Sine { a: f64 },
    /// The same table applied to each component.
    Table { table: PiecewiseLinear },
}

/// Nemytskii drift `B(u, t)(ξ) = f(t)·b(u(ξ))` with an optional time factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub time_factor: Option<PiecewiseLinear>,
}

impl DriftSpec {
    pub fn zero() -> Self {
        Self::autonomous(DriftKind::Zero)
    }

    pub fn sine(a: f64) -> Self {
        Self::autonomous(DriftKind::Sine { a })
    }

    pub fn linear(a: f64) -> Self {
        Self::autonomous(DriftKind::Linear { a })
    }

    pub fn autonomous(kind: DriftKind) -> Self {
        Self { kind, time_factor: None }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            DriftKind::Zero => true,
            DriftKind::Linear { a } | DriftKind::Sine { a } => *a == 0.0,
            DriftKind::Table { table } => table.sup_abs() == 0.0 && table.max_slope() == 0.0,
        }
    }

    /// Whether evaluation needs physical-space collocation.
    pub fn needs_collocation(&self) -> bool {
        matches!(self.kind, DriftKind::Sine { .. } | DriftKind::Table { .. }) && !self.is_zero()
    }

    /// Declared Lipschitz constant `κ_B` in `H` (sup over the time factor).
    pub fn lipschitz(&self) -> f64 {
        let base = match &self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Linear { a } | DriftKind::Sine { a } => a.abs(),
            DriftKind::Table { table } => table.max_slope(),
        };
        base * self.time_factor.as_ref().map_or(1.0, |f| f.sup_abs())
    }

    pub fn time_scale(&self, t: f64) -> f64 {
        self.time_factor.as_ref().map_or(1.0, |f| f.eval(t))
    }

    pub(crate) fn pointwise(&self, x: f64) -> f64 {
        match &self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Linear { a } => a * x,
            DriftKind::Sine { a } => a * x.sin(),
            DriftKind::Table { table } => table.eval(x),
        }
    }
}

/// Diffusion coefficient of the noise term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionSpec {
    /// `G = I` (additive noise).
    AdditiveIdentity,
    /// `[G(u)z](ξ) = diag(1 + a sin u₁(ξ), 1 + a sin u₂(ξ)) z(ξ)`.
    DiagonalNemytskii { a: f64 },
}

impl DiffusionSpec {
    pub fn is_additive(&self) -> bool {
        matches!(self, DiffusionSpec::AdditiveIdentity)
    }

    /// `κ_G` in `|G(x)z − G(y)z|_H ≤ κ_G |x − y|_H |z|_∞`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            DiffusionSpec::AdditiveIdentity => 0.0,
            DiffusionSpec::DiagonalNemytskii { a } => a.abs(),
        }
    }

    pub(crate) fn pointwise(&self, x: f64) -> f64 {
        match self {
            DiffusionSpec::AdditiveIdentity => 1.0,
            DiffusionSpec::DiagonalNemytskii { a } => 1.0 + a * x.sin(),
        }
    }
}

/// Uniform time grid plus truncation sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub t_final: f64,
    pub dt: f64,
    pub steps: usize,
    pub n_modes: usize,
    pub collocation_size: usize,
    pub p: f64,
}

impl SimGrid {
    /// `T/dt` must be an integer (to 1e-9 relative); `dt` is then reset to
    /// `T/steps` exactly.
    pub fn new(t_final: f64, dt: f64, n_modes: usize, collocation_size: usize, p: f64) -> Result<Self> {
        if !(t_final > 0.0) || !(dt > 0.0) || !t_final.is_finite() {
            return Err(invalid(format!("need T > 0 and dt > 0 (T={t_final}, dt={dt})")));
        }
        let r = t_final / dt;
        let steps = r.round();
        if steps < 1.0 || (r - steps).abs() > 1e-9 * r {
            return Err(invalid(format!("T = {t_final} is not a whole number of steps of {dt}")));
        }
        if n_modes == 0 {
            return Err(invalid("need at least one mode"));
        }
        if collocation_size < n_modes {
            return Err(invalid(format!(
                "collocation size {collocation_size} below mode count {n_modes}"
            )));
        }
        if !(p >= 1.0) {
            return Err(invalid(format!("moment order must be at least 1, got {p}")));
        }
        let steps = steps as usize;
        Ok(Self {
            t_final,
            dt: t_final / steps as f64,
            steps,
            n_modes,
            collocation_size,
            p,
        })
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t_final
        } else {
            i as f64 * self.dt
        }
    }

    /// Second-order runs must resolve the `μ` time scale.
    pub fn check_second_order(&self, mu: f64) -> Result<()> {
        if self.dt > mu / 10.0 * (1.0 + 1e-12) {
            return Err(invalid(format!("dt = {} exceeds μ/10 = {}", self.dt, mu / 10.0)));
        }
        Ok(())
    }
}

/// Everything about the equation except `μ`, `ε` and the initial data.
#[derive(Debug, Clone)]
pub struct Model {
    pub eig: EigenSequence,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub noise: NoiseSpec,
    transform: Option<SineTransform>,
}

impl Model {
    /// `collocation_size` is only used on the interval geometry.
    pub fn new(
        eig: EigenSequence,
        drift: DriftSpec,
        diffusion: DiffusionSpec,
        noise: NoiseSpec,
        collocation_size: usize,
    ) -> Result<Self> {
        let n = eig.len();
        if noise.len() != n {
            return Err(invalid(format!("{} noise weights for {n} modes", noise.len())));
        }
        let transform = match eig.source() {
            EigenSource::DirichletInterval { length } => Some(SineTransform::new(n, collocation_size, length)?),
            _ => None,
        };
        let needs = drift.needs_collocation() || !diffusion.is_additive();
        if needs && transform.is_none() {
            return Err(Error::Precondition(
                "Nemytskii coefficients need the interval geometry (d = 1 collocation)".into(),
            ));
        }
        if !diffusion.is_additive() && !noise.flags().h7_bounded {
            return Err(Error::Precondition("multiplicative noise needs bounded weights".into()));
        }
        Ok(Self {
            eig,
            drift,
            diffusion,
            noise,
            transform,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.eig.len()
    }

    pub fn transform(&self) -> Option<&SineTransform> {
        self.transform.as_ref()
    }

    /// Galerkin drift `P_n B(u, t)` written into `out`, with `scratch` holding
    /// collocation values.
    pub(crate) fn drift_into(&self, u: &[[f64; 2]], t: f64, scratch: &mut [[f64; 2]], out: &mut [[f64; 2]]) {
        let scale = self.drift.time_scale(t);
        match &self.drift.kind {
            DriftKind::Zero => out.iter_mut().for_each(|c| *c = [0.0; 2]),
            DriftKind::Linear { a } => {
                for (o, c) in out.iter_mut().zip(u) {
                    *o = [scale * a * c[0], scale * a * c[1]];
                }
            }
            _ => {
                let tr = self.transform.as_ref().expect("checked in Model::new");
                tr.synthesize_into(u, scratch);
                for v in scratch.iter_mut() {
                    *v = [scale * self.drift.pointwise(v[0]), scale * self.drift.pointwise(v[1])];
                }
                tr.analyze_into(scratch, out);
            }
        }
    }

    /// Galerkin image `P_n G(u)(Σ_k w_k ê_k)` for spectral weights `w`.
    pub(crate) fn diffuse_into(
        &self,
        u: &[[f64; 2]],
        w: &[[f64; 2]],
        scratch_u: &mut [[f64; 2]],
        scratch_w: &mut [[f64; 2]],
        out: &mut [[f64; 2]],
    ) {
        match self.diffusion {
            DiffusionSpec::AdditiveIdentity => out.copy_from_slice(w),
            DiffusionSpec::DiagonalNemytskii { .. } => {
                let tr = self.transform.as_ref().expect("checked in Model::new");
                tr.synthesize_into(u, scratch_u);
                tr.synthesize_into(w, scratch_w);
                for (z, x) in scratch_w.iter_mut().zip(scratch_u.iter()) {
                    z[0] *= self.diffusion.pointwise(x[0]);
                    z[1] *= self.diffusion.pointwise(x[1]);
                }
                tr.analyze_into(scratch_w, out);
            }
        }
    }

    /// Largest sampled `|P_n B(x) − P_n B(y)|_H / |x − y|_H` over random pairs.
    pub fn sampled_drift_lipschitz(&self, pairs: usize, seed: u64) -> f64 {
        let n = self.n_modes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.transform.as_ref().map_or(n, |t| t.grid_size());
        let mut scratch = vec![[0.0; 2]; m];
        let (mut bx, mut by) = (vec![[0.0; 2]; n], vec![[0.0; 2]; n]);
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let x = random_coeffs(&mut rng, n);
            let y = random_coeffs(&mut rng, n);
            self.drift_into(&x, 0.0, &mut scratch, &mut bx);
            self.drift_into(&y, 0.0, &mut scratch, &mut by);
            let num = dist(&bx, &by);
            let den = dist(&x, &y);
            if den > 0.0 {
                worst = worst.max(num / den);
            }
        }
        worst
    }

    /// Largest sampled `|G(x)z − G(y)z|_H / (|x − y|_H |z|_∞)` with `|z|_∞` the
    /// collocation maximum. `None` without a collocation grid.
    pub fn sampled_diffusion_lipschitz(&self, pairs: usize, seed: u64) -> Option<f64> {
        let tr = self.transform.as_ref()?;
        let n = self.n_modes();
        let m = tr.grid_size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s1, mut s2) = (vec![[0.0; 2]; m], vec![[0.0; 2]; m]);
        let (mut gx, mut gy) = (vec![[0.0; 2]; n], vec![[0.0; 2]; n]);
        let mut zval = vec![[0.0; 2]; m];
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let x = random_coeffs(&mut rng, n);
            let y = random_coeffs(&mut rng, n);
            let z = random_coeffs(&mut rng, n);
            self.diffuse_into(&x, &z, &mut s1, &mut s2, &mut gx);
            self.diffuse_into(&y, &z, &mut s1, &mut s2, &mut gy);
            tr.synthesize_into(&z, &mut zval);
            let zinf = zval.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            let den = dist(&x, &y) * zinf;
            if den > 0.0 {
                worst = worst.max(dist(&gx, &gy) / den);
            }
        }
        Some(worst)
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    let scale = rng.random_range(0.01..10.0);
    (0..n)
        .map(|_| [scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0)])
        .collect()
}

fn dist(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Initial data `(u₀, v₀)`; the first-order systems start from `u₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub u0: SpectralField,
    pub v0: SpectralField,
}

impl InitialState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u0: SpectralField::zeros(n),
            v0: SpectralField::zeros(n),
        }
    }

    /// `(u₀, 0)`.
    pub fn at_rest(u0: SpectralField) -> Self {
        let n = u0.n();
        Self {
            u0,
            v0: SpectralField::zeros(n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dirichlet_eigens;
    use std::f64::consts::PI;

    #[test]
    fn power_law_flags() {
        let eig = dirichlet_eigens(PI, 32).unwrap();
        let n = NoiseSpec::power(1.0, 32, &eig).unwrap();
        let f = n.flags();
        assert!(f.h6_trace_class && f.h7_bounded);
        assert!(f.h5_delta.is_some());
        // white noise on the interval: H5 holds for δ < 1/2, H6 fails
        let w = NoiseSpec::power(0.0, 32, &eig).unwrap();
        assert!(!w.flags().h6_trace_class);
        let d = w.flags().h5_delta.unwrap();
        assert!(d > 0.0 && d < 0.5);
        let rough = NoiseSpec::power(-1.0, 8, &eig).unwrap();
        assert!(!rough.flags().h7_bounded);
        assert!((n.lambda()[3] - 0.25).abs() < 1e-15);
        assert!(NoiseSpec::explicit(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn table_interpolates_and_extends() {
        let t = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(2.0), 1.5);
        assert_eq!(t.eval(-1.0), -2.0);
        assert_eq!(t.eval(5.0), 0.0);
        assert_eq!(t.max_slope(), 2.0);
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn grid_validation() {
        let g = SimGrid::new(1.0, 1e-3, 8, 16, 2.0).unwrap();
        assert_eq!(g.steps, 1000);
        assert_eq!(g.time(g.steps), 1.0);
        assert!(SimGrid::new(1.0, 0.3, 8, 16, 2.0).is_err());
        assert!(SimGrid::new(1.0, 0.1, 8, 4, 2.0).is_err());
        assert!(SimGrid::new(1.0, 0.1, 8, 8, 0.5).is_err());
        assert!(g.check_second_order(0.01).is_ok());
        assert!(g.check_second_order(0.005).is_err());
    }

    #[test]
    fn multiplicative_needs_interval_geometry() {
        let eig = EigenSequence::explicit(vec![1.0, 2.0]).unwrap();
        let r = Model::new(
            eig.clone(),
            DriftSpec::zero(),
            DiffusionSpec::DiagonalNemytskii { a: 0.5 },
            NoiseSpec::zero(2),
            4,
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
        assert!(Model::new(eig, DriftSpec::linear(1.0), DiffusionSpec::AdditiveIdentity, NoiseSpec::zero(2), 4).is_ok());
    }

    #[test]
    fn declared_lipschitz_constants_hold() {
        let eig = dirichlet_eigens(PI, 16).unwrap();
        for drift in [DriftSpec::sine(1.0), DriftSpec::linear(-0.7), DriftSpec::sine(2.5)] {
            let m = Model::new(eig.clone(), drift.clone(), DiffusionSpec::AdditiveIdentity, NoiseSpec::zero(16), 32)
                .unwrap();
            let s = m.sampled_drift_lipschitz(10_000, 1);
            assert!(s <= drift.lipschitz() * (1.0 + 1e-12), "{s} vs {}", drift.lipschitz());
        }
        let table = PiecewiseLinear::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        let drift = DriftSpec::autonomous(DriftKind::Table { table });
        let m = Model::new(eig.clone(), drift.clone(), DiffusionSpec::AdditiveIdentity, NoiseSpec::zero(16), 32).unwrap();
        assert!(m.sampled_drift_lipschitz(10_000, 2) <= drift.lipschitz() * (1.0 + 1e-12));

        let diff = DiffusionSpec::DiagonalNemytskii { a: 0.5 };
        let m = Model::new(eig, DriftSpec::zero(), diff, NoiseSpec::zero(16), 32).unwrap();
        let s = m.sampled_diffusion_lipschitz(10_000, 3).unwrap();
        assert!(s <= diff.lipschitz() * (1.0 + 1e-12), "{s}");
    }
}
