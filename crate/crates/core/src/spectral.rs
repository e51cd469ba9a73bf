//! Spectral basis for planar fields `u: D -> R^2` with Dirichlet boundary
//! conditions.
//!
//! A field is stored as one `R^2` coefficient per spatial mode `k`: the pair
//! `(<u, e_{2k-1}>, <u, e_{2k}>)` where `e_{2k-1} = (ê_k, 0)` and
//! `e_{2k} = (0, ê_k)`. Both members of the pair share the eigenvalue `α̂_k`.
//! All dynamics in this crate are diagonal in this basis, so the geometry only
//! enters through the eigenvalue sequence; the interval `(0, L)` is the one
//! concrete geometry with a physical-space (collocation) representation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Where an [`EigenSequence`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EigenSource {
    /// `α̂_k = (kπ/L)²`, the Dirichlet Laplacian on `(0, L)`.
    DirichletInterval { length: f64 },
    ExplicitList,
    /// `α̂_k = c·k^q`.
    PowerLaw { c: f64, q: f64 },
}

/// Positive nondecreasing eigenvalues `α̂_1 ≤ α̂_2 ≤ …` of `-Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSequence {
    values: Vec<f64>,
    source: EigenSource,
}

impl EigenSequence {
    pub fn dirichlet(length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid(format!("interval length must be positive, got {length}")));
        }
        if n == 0 {
            return Err(invalid("mode count must be at least 1"));
        }
        let values = (1..=n)
            .map(|k| {
                let w = k as f64 * PI / length;
                w * w
            })
            .collect();
        Ok(Self {
            values,
            source: EigenSource::DirichletInterval { length },
        })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("eigenvalue list is empty"));
        }
        if values.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(invalid("eigenvalues must be positive and finite"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("eigenvalues must be nondecreasing"));
        }
        Ok(Self {
            values,
            source: EigenSource::ExplicitList,
        })
    }

    pub fn power_law(c: f64, q: f64, n: usize) -> Result<Self> {
        if !(c > 0.0) || !(q >= 0.0) || !c.is_finite() || !q.is_finite() {
            return Err(invalid(format!("power law needs c > 0, q >= 0 (got c={c}, q={q})")));
        }
        if n == 0 {
            return Err(invalid("mode count must be at least 1"));
        }
        let values = (1..=n).map(|k| c * (k as f64).powf(q)).collect();
        Ok(Self {
            values,
            source: EigenSource::PowerLaw { c, q },
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source(&self) -> EigenSource {
        self.source
    }

    /// Smallest eigenvalue `α̂_1`.
    pub fn first(&self) -> f64 {
        self.values[0]
    }

    /// Growth exponent `q` with `α̂_k ~ k^q`, when the source fixes one.
    pub fn growth_exponent(&self) -> Option<f64> {
        match self.source {
            EigenSource::DirichletInterval { .. } => Some(2.0),
            EigenSource::PowerLaw { q, .. } => Some(q),
            EigenSource::ExplicitList => None,
        }
    }

    /// Copy truncated to the first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(invalid(format!("cannot truncate {} eigenvalues to {n}", self.len())));
        }
        Ok(Self {
            values: self.values[..n].to_vec(),
            source: self.source,
        })
    }
}

/// `(kπ/L)²` for `k = 1..=n`.
pub fn dirichlet_eigens(length: f64, n: usize) -> Result<EigenSequence> {
    EigenSequence::dirichlet(length, n)
}

/// Exponent of the Sobolev scale `H^θ`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SobolevIndex(pub f64);

impl From<f64> for SobolevIndex {
    fn from(theta: f64) -> Self {
        SobolevIndex(theta)
    }
}

/// Truncated coefficient vector of a planar field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<[f64; 2]>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![[0.0; 2]; n],
        }
    }

    pub fn from_coeffs(coeffs: Vec<[f64; 2]>) -> Result<Self> {
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("field coefficients must be finite"));
        }
        Ok(Self { coeffs })
    }

    /// Field with a single nonzero coefficient `c` in mode `k` (1-based).
    pub fn single_mode(n: usize, k: usize, c: [f64; 2]) -> Result<Self> {
        if k == 0 || k > n {
            return Err(invalid(format!("mode {k} outside 1..={n}")));
        }
        let mut f = Self::zeros(n);
        f.coeffs[k - 1] = c;
        Self::from_coeffs(f.coeffs)
    }

    pub(crate) fn from_complex(values: &[Complex64]) -> Self {
        Self {
            coeffs: values.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    /// Modes as complex numbers `c_k = c_{k,1} + i c_{k,2}`.
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect()
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[[f64; 2]] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().flatten().all(|c| c.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| [s * c[0], s * c[1]]).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n() != other.n() {
            return Err(invalid(format!(
                "truncation mismatch: {} vs {} modes",
                self.n(),
                other.n()
            )));
        }
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| [f(a[0], b[0]), f(a[1], b[1])])
                .collect(),
        })
    }
}

/// State `(u, v)` of the second-order system in `H^θ × H^{θ-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub u: SpectralField,
    pub v: SpectralField,
}

impl PhasePoint {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<Self> {
        if u.n() != v.n() {
            return Err(invalid(format!(
                "position has {} modes, velocity {}",
                u.n(),
                v.n()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            u: SpectralField::zeros(n),
            v: SpectralField::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.u.n()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::new(self.u.sub(&other.u)?, self.v.sub(&other.v)?)
    }
}

fn check_len(n: usize, eig: &EigenSequence) -> Result<()> {
    if n > eig.len() {
        return Err(invalid(format!(
            "field has {n} modes but only {} eigenvalues are known",
            eig.len()
        )));
    }
    Ok(())
}

/// Squared `H^θ` norm.
pub(crate) fn sobolev_norm_sq(field: &SpectralField, theta: f64, eig: &EigenSequence) -> f64 {
    field
        .coeffs
        .iter()
        .zip(eig.values())
        .map(|(c, a)| a.powf(theta) * (c[0] * c[0] + c[1] * c[1]))
        .sum()
}

/// `|u|_{H^θ} = (Σ_k α̂_k^θ |c_k|²)^{1/2}`.
pub fn sobolev_norm(field: &SpectralField, theta: SobolevIndex, eig: &EigenSequence) -> Result<f64> {
    check_len(field.n(), eig)?;
    Ok(sobolev_norm_sq(field, theta.0, eig).sqrt())
}

/// Norm of `(u, v)` in `H^θ × H^{θ-1}`.
pub fn phase_norm(z: &PhasePoint, theta: SobolevIndex, eig: &EigenSequence) -> Result<f64> {
    check_len(z.n(), eig)?;
    if z.u.n() != z.v.n() {
        return Err(invalid("inconsistent phase-point truncation"));
    }
    Ok((sobolev_norm_sq(&z.u, theta.0, eig) + sobolev_norm_sq(&z.v, theta.0 - 1.0, eig)).sqrt())
}

/// Mass-weighted norm `(|u|²_H + μ|v|²_{H^{-1}})^{1/2}`.
///
/// The undamped group `S_μ^0(t)` is an isometry for this norm and every
/// `S_μ^ε(t)` is a contraction.
pub fn weighted_phase_norm(z: &PhasePoint, mu: f64, eig: &EigenSequence) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(invalid(format!("mass must be positive, got {mu}")));
    }
    check_len(z.n(), eig)?;
    if z.u.n() != z.v.n() {
        return Err(invalid("inconsistent phase-point truncation"));
    }
    Ok((sobolev_norm_sq(&z.u, 0.0, eig) + mu * sobolev_norm_sq(&z.v, -1.0, eig)).sqrt())
}

/// Zero every mode above `m`.
pub fn project(field: &SpectralField, m: usize) -> Result<SpectralField> {
    if m > field.n() {
        return Err(invalid(format!("projection level {m} exceeds truncation {}", field.n())));
    }
    let mut out = field.clone();
    for c in &mut out.coeffs[m..] {
        *c = [0.0, 0.0];
    }
    Ok(out)
}

/// Discrete sine transform pair between `n_modes` coefficients and values on
/// the interior collocation points `ξ_j = jL/(N+1)`, `j = 1..=N`.
///
/// Stored as a dense `N × n_modes` matrix; `n_modes ≤ N` makes `analyze` an
/// exact left inverse of `synthesize`.
#[derive(Debug, Clone)]
pub struct SineTransform {
    n_modes: usize,
    grid_size: usize,
    length: f64,
    // row-major: basis[j * n_modes + k] = ê_{k+1}(ξ_{j+1})
    basis: Vec<f64>,
}

impl SineTransform {
    pub fn new(n_modes: usize, grid_size: usize, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(invalid(format!("interval length must be positive, got {length}")));
        }
        if n_modes == 0 {
            return Err(invalid("transform needs at least one mode"));
        }
        if grid_size < n_modes {
            return Err(invalid(format!(
                "collocation grid of {grid_size} points cannot resolve {n_modes} modes"
            )));
        }
        let norm = (2.0 / length).sqrt();
        let np1 = (grid_size + 1) as f64;
        let mut basis = Vec::with_capacity(grid_size * n_modes);
        for j in 1..=grid_size {
            for k in 1..=n_modes {
                basis.push(norm * (PI * (k * j) as f64 / np1).sin());
            }
        }
        Ok(Self {
            n_modes,
            grid_size,
            length,
            basis,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn grid_points(&self) -> Vec<f64> {
        let h = self.length / (self.grid_size + 1) as f64;
        (1..=self.grid_size).map(|j| j as f64 * h).collect()
    }

    /// Quadrature weight of each collocation point (`L/(N+1)`).
    pub fn weight(&self) -> f64 {
        self.length / (self.grid_size + 1) as f64
    }

    /// Point values `Σ_k c_k ê_k(ξ_j)`.
    pub fn synthesize(&self, field: &SpectralField) -> Result<Vec<[f64; 2]>> {
        if field.n() != self.n_modes {
            return Err(invalid(format!(
                "transform built for {} modes, field has {}",
                self.n_modes,
                field.n()
            )));
        }
        let mut out = vec![[0.0; 2]; self.grid_size];
        self.synthesize_into(field.coeffs(), &mut out);
        Ok(out)
    }

    pub(crate) fn synthesize_into(&self, coeffs: &[[f64; 2]], out: &mut [[f64; 2]]) {
        for (row, o) in self.basis.chunks_exact(self.n_modes).zip(out.iter_mut()) {
            let mut acc = [0.0; 2];
            for (b, c) in row.iter().zip(coeffs) {
                acc[0] += b * c[0];
                acc[1] += b * c[1];
            }
            *o = acc;
        }
    }

    /// Coefficients of the Galerkin projection of the point values.
    pub fn analyze(&self, values: &[[f64; 2]]) -> Result<SpectralField> {
        if values.len() != self.grid_size {
            return Err(invalid(format!(
                "expected {} point values, got {}",
                self.grid_size,
                values.len()
            )));
        }
        let mut coeffs = vec![[0.0; 2]; self.n_modes];
        self.analyze_into(values, &mut coeffs);
        SpectralField::from_coeffs(coeffs)
    }

    pub(crate) fn analyze_into(&self, values: &[[f64; 2]], out: &mut [[f64; 2]]) {
        for c in out.iter_mut() {
            *c = [0.0; 2];
        }
        for (row, v) in self.basis.chunks_exact(self.n_modes).zip(values) {
            for (b, c) in row.iter().zip(out.iter_mut()) {
                c[0] += b * v[0];
                c[1] += b * v[1];
            }
        }
        let w = self.weight();
        for c in out.iter_mut() {
            c[0] *= w;
            c[1] *= w;
        }
    }
}

/// Evaluate `field` on `grid_size` interior points of `(0, L)`.
pub fn synthesize(field: &SpectralField, grid_size: usize, length: f64) -> Result<Vec<[f64; 2]>> {
    SineTransform::new(field.n(), grid_size, length)?.synthesize(field)
}

/// Recover `n_modes` coefficients from interior point values on `(0, L)`.
pub fn analyze(values: &[[f64; 2]], n_modes: usize, length: f64) -> Result<SpectralField> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no point values".into()));
    }
    SineTransform::new(n_modes, values.len(), length)?.analyze(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn dirichlet_eigenvalues() {
        let e = dirichlet_eigens(PI, 3).unwrap();
        for (a, b) in e.values().iter().zip([1.0, 4.0, 9.0]) {
            assert!(close(*a, b, 1e-14));
        }
        assert!(close(dirichlet_eigens(PI, 1).unwrap().values()[0], 1.0, 1e-14));
        assert!(close(dirichlet_eigens(2.0 * PI, 1).unwrap().values()[0], 0.25, 1e-14));
        assert!(dirichlet_eigens(0.0, 3).is_err());
        assert!(dirichlet_eigens(-1.0, 3).is_err());
        assert!(dirichlet_eigens(1.0, 0).is_err());
    }

    #[test]
    fn explicit_eigenvalues_must_be_sorted_and_positive() {
        assert!(EigenSequence::explicit(vec![1.0, 2.0, 2.0]).is_ok());
        assert!(EigenSequence::explicit(vec![2.0, 1.0]).is_err());
        assert!(EigenSequence::explicit(vec![0.0, 1.0]).is_err());
        assert!(EigenSequence::explicit(vec![]).is_err());
    }

    #[test]
    fn sobolev_norm_examples() {
        let eig = EigenSequence::explicit(vec![1.0, 4.0]).unwrap();
        let f = SpectralField::single_mode(1, 1, [1.0, 0.0]).unwrap();
        for theta in [-2.0, 0.0, 0.7, 3.0] {
            assert!(close(sobolev_norm(&f, SobolevIndex(theta), &eig).unwrap(), 1.0, 1e-15));
        }
        let g = SpectralField::single_mode(2, 2, [3.0, 4.0]).unwrap();
        assert!(close(sobolev_norm(&g, SobolevIndex(1.0), &eig).unwrap(), 10.0, 1e-15));
        let z = SpectralField::zeros(2);
        assert_eq!(sobolev_norm(&z, SobolevIndex(1.0), &eig).unwrap(), 0.0);

        let long = SpectralField::zeros(3);
        assert!(sobolev_norm(&long, SobolevIndex(0.0), &eig).is_err());
    }

    #[test]
    fn phase_norm_examples() {
        let eig = EigenSequence::explicit(vec![4.0]).unwrap();
        let x = SpectralField::single_mode(1, 1, [1.0, 0.0]).unwrap();
        let zero = SpectralField::zeros(1);
        let z = PhasePoint::new(x.clone(), zero.clone()).unwrap();
        assert_eq!(
            phase_norm(&z, SobolevIndex(0.5), &eig).unwrap(),
            sobolev_norm(&x, SobolevIndex(0.5), &eig).unwrap()
        );
        let z = PhasePoint::new(zero.clone(), x.clone()).unwrap();
        assert!(close(
            phase_norm(&z, SobolevIndex(0.5), &eig).unwrap(),
            sobolev_norm(&x, SobolevIndex(-0.5), &eig).unwrap(),
            1e-15
        ));
        let z = PhasePoint::new(x.clone(), x).unwrap();
        assert!(close(phase_norm(&z, SobolevIndex(0.0), &eig).unwrap(), (1.25f64).sqrt(), 1e-15));
        assert!(PhasePoint::new(SpectralField::zeros(1), SpectralField::zeros(2)).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        let eig = EigenSequence::explicit(vec![1.0]).unwrap();
        let x = SpectralField::single_mode(1, 1, [0.6, 0.8]).unwrap();
        let zero = SpectralField::zeros(1);
        let z = PhasePoint::new(x.clone(), zero.clone()).unwrap();
        for mu in [0.01, 1.0, 50.0] {
            assert!(close(weighted_phase_norm(&z, mu, &eig).unwrap(), 1.0, 1e-15));
        }
        let v = SpectralField::single_mode(1, 1, [1.0, 0.0]).unwrap();
        let z = PhasePoint::new(zero.clone(), v).unwrap();
        assert!(close(weighted_phase_norm(&z, 4.0, &eig).unwrap(), 2.0, 1e-15));
        assert_eq!(weighted_phase_norm(&PhasePoint::zeros(1), 1.0, &eig).unwrap(), 0.0);
        assert!(weighted_phase_norm(&z, 0.0, &eig).is_err());
        assert!(weighted_phase_norm(&z, -1.0, &eig).is_err());
    }

    #[test]
    fn projection_edges() {
        let f = SpectralField::from_coeffs(vec![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(project(&f, 3).unwrap(), f);
        assert_eq!(project(&f, 0).unwrap(), SpectralField::zeros(3));
        let p2 = project(&f, 2).unwrap();
        assert_eq!(project(&p2, 2).unwrap(), p2);
        assert_eq!(p2.coeffs()[2], [0.0, 0.0]);
        assert!(project(&f, 4).is_err());
    }

    #[test]
    fn synthesize_first_mode_at_midpoint() {
        let f = SpectralField::single_mode(1, 1, [1.0, 0.0]).unwrap();
        // grid of 3 interior points on (0, π): π/4, π/2, 3π/4
        let vals = synthesize(&f, 3, PI).unwrap();
        let expect = (2.0 / PI).sqrt();
        assert!(close(vals[1][0], expect, 1e-15));
        assert_eq!(vals[1][1], 0.0);
        let zero = synthesize(&SpectralField::zeros(4), 9, 2.0).unwrap();
        assert!(zero.iter().flatten().all(|v| *v == 0.0));
        assert!(synthesize(&SpectralField::zeros(4), 3, 1.0).is_err());
    }

    fn field_strategy(n: usize) -> impl Strategy<Value = SpectralField> {
        prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), n)
            .prop_map(|v| SpectralField::from_coeffs(v.into_iter().map(|(a, b)| [a, b]).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn transform_round_trip(f in field_strategy(12), extra in 0usize..20, len in 0.5f64..10.0) {
            let grid = 12 + extra;
            let t = SineTransform::new(12, grid, len).unwrap();
            let back = t.analyze(&t.synthesize(&f).unwrap()).unwrap();
            let scale = f.coeffs().iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
            for (a, b) in back.coeffs().iter().flatten().zip(f.coeffs().iter().flatten()) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn norm_monotone_in_theta(f in field_strategy(8), t1 in -2.0f64..2.0, dt in 0.0f64..2.0) {
            let eig = dirichlet_eigens(PI, 8).unwrap();
            let lo = sobolev_norm(&f, SobolevIndex(t1), &eig).unwrap();
            let hi = sobolev_norm(&f, SobolevIndex(t1 + dt), &eig).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-14));
        }

        #[test]
        fn interpolation_inequality(f in field_strategy(8), theta in -1.5f64..1.5, gamma in 0.0f64..=1.0) {
            let eig = dirichlet_eigens(PI, 8).unwrap();
            let lhs = sobolev_norm(&f, SobolevIndex(theta), &eig).unwrap();
            let a = sobolev_norm(&f, SobolevIndex(theta + gamma - 1.0), &eig).unwrap();
            let b = sobolev_norm(&f, SobolevIndex(theta + gamma), &eig).unwrap();
            prop_assert!(lhs <= a.powf(gamma) * b.powf(1.0 - gamma) * (1.0 + 1e-12));
        }

        #[test]
        fn projection_contracts(f in field_strategy(8), m in 0usize..=8, theta in -2.0f64..2.0) {
            let eig = dirichlet_eigens(2.0, 8).unwrap();
            let p = project(&f, m).unwrap();
            prop_assert!(sobolev_norm(&p, SobolevIndex(theta), &eig).unwrap()
                <= sobolev_norm(&f, SobolevIndex(theta), &eig).unwrap());
        }
    }
}
