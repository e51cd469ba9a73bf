//! Counter-keyed Gaussian streams.
//!
//! Every real Brownian coordinate `β_k^{(r)}` of every path has its own
//! ChaCha8 stream, keyed by `(master_seed, path_id)` and selected by
//! `16·mode + component`. Outputs therefore depend only on those
//! coordinates, never on the order in which paths or modes are evaluated.
//!
//! Within a step of length `dt` the increment of `β` on `[t_n, t_n + dt]` is
//! represented by its coefficients `ξ_j = ∫ φ_j dβ` against the orthonormal
//! shifted Legendre polynomials `φ_j`; `ξ_0 √dt` is the ordinary increment.
//! Components `1..=8` carry `ξ_0..ξ_3` of both real coordinates, `9..=12`
//! and `13..=14` feed the residual parts of the second- and first-order
//! convolutions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Legendre coefficients of the intra-step Brownian path shared between
/// coupled systems.
pub const LEGENDRE_TERMS: usize = 4;

const STREAMS_PER_MODE: u64 = 16;
const SECOND_RESIDUAL: u64 = 9;
const FIRST_RESIDUAL: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master_seed: u64,
    pub path_id: u64,
}

impl PathSeed {
    pub fn new(master_seed: u64, path_id: u64) -> Self {
        Self { master_seed, path_id }
    }

    fn stream(&self, mode: usize, component: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.path_id.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(mode as u64 * STREAMS_PER_MODE + component);
        rng
    }
}

/// `N(0, dt)` increments of the real coordinate `component ∈ {1, 2}` of the
/// Brownian motion driving `mode` (1-based).
pub fn brownian_increments(seed: PathSeed, mode: usize, component: u8, steps: usize, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    if mode == 0 || !(1..=2).contains(&component) {
        return Err(invalid(format!("bad stream (mode {mode}, component {component})")));
    }
    let mut rng = seed.stream(mode, component as u64);
    let s = dt.sqrt();
    Ok((0..steps).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Which parts of the per-step noise a stepper consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseLayout {
    /// Number of Legendre coefficients (1 means plain increments).
    pub legendre: usize,
    pub second_residual: bool,
    pub first_residual: bool,
}

impl NoiseLayout {
    pub fn increments_only() -> Self {
        Self {
            legendre: 1,
            second_residual: false,
            first_residual: false,
        }
    }
}

/// Noise of one time step for all modes. Complex entries pack the two real
/// coordinates as `β^{(1)} + iβ^{(2)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise {
    n_modes: usize,
    legendre: usize,
    xi: Vec<Complex64>,
    r2: Vec<[Complex64; 2]>,
    r1: Vec<Complex64>,
}

impl StepNoise {
    pub fn new(n_modes: usize, layout: NoiseLayout) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            n_modes,
            legendre: layout.legendre,
            xi: vec![zero; n_modes * layout.legendre],
            r2: vec![[zero; 2]; if layout.second_residual { n_modes } else { 0 }],
            r1: vec![zero; if layout.first_residual { n_modes } else { 0 }],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Legendre coefficients `ξ_0..` of mode `k` (0-based).
    pub fn xi(&self, k: usize) -> &[Complex64] {
        &self.xi[k * self.legendre..(k + 1) * self.legendre]
    }

    /// `ξ_0 = ΔW_k/√dt` of mode `k`.
    pub fn unit_increment(&self, k: usize) -> Complex64 {
        self.xi[k * self.legendre]
    }

    pub fn second_residual(&self, k: usize) -> [Complex64; 2] {
        self.r2[k]
    }

    pub fn first_residual(&self, k: usize) -> Complex64 {
        self.r1[k]
    }
}

/// Sequential generator of [`StepNoise`] for one path.
#[derive(Debug, Clone)]
pub struct PathNoise {
    layout: NoiseLayout,
    n_modes: usize,
    aggregate: usize,
    xi: Vec<[ChaCha8Rng; 2]>,
    r2: Vec<[ChaCha8Rng; 4]>,
    r1: Vec<[ChaCha8Rng; 2]>,
}

impl PathNoise {
    /// `aggregate > 1` produces coarse increments that are exact sums of
    /// `aggregate` consecutive fine ones (same seed, increments only).
    pub fn new(seed: PathSeed, n_modes: usize, layout: NoiseLayout, aggregate: usize) -> Result<Self> {
        if layout.legendre == 0 || layout.legendre > LEGENDRE_TERMS {
            return Err(invalid(format!("Legendre terms must be in 1..={LEGENDRE_TERMS}")));
        }
        if aggregate == 0 || (aggregate > 1 && layout != NoiseLayout::increments_only()) {
            return Err(invalid("aggregation is only defined for plain increments"));
        }
        let mut xi = Vec::new();
        for k in 1..=n_modes {
            for j in 0..layout.legendre as u64 {
                xi.push([seed.stream(k, 2 * j + 1), seed.stream(k, 2 * j + 2)]);
            }
        }
        let r2 = if layout.second_residual {
            (1..=n_modes)
                .map(|k| std::array::from_fn(|i| seed.stream(k, SECOND_RESIDUAL + i as u64)))
                .collect()
        } else {
            Vec::new()
        };
        let r1 = if layout.first_residual {
            (1..=n_modes)
                .map(|k| std::array::from_fn(|i| seed.stream(k, FIRST_RESIDUAL + i as u64)))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            layout,
            n_modes,
            aggregate,
            xi,
            r2,
            r1,
        })
    }

    pub fn layout(&self) -> NoiseLayout {
        self.layout
    }

    pub fn fill(&mut self, out: &mut StepNoise) {
        debug_assert_eq!(out.n_modes, self.n_modes);
        debug_assert_eq!(out.legendre, self.layout.legendre);
        let norm = 1.0 / (self.aggregate as f64).sqrt();
        for (slot, rngs) in out.xi.iter_mut().zip(self.xi.iter_mut()) {
            let mut acc = Complex64::new(0.0, 0.0);
            for _ in 0..self.aggregate {
                acc += Complex64::new(normal(&mut rngs[0]), normal(&mut rngs[1]));
            }
            *slot = acc * norm;
        }
        for (slot, rngs) in out.r2.iter_mut().zip(self.r2.iter_mut()) {
            let [a, b, c, d] = rngs;
            *slot = [
                Complex64::new(normal(a), normal(b)),
                Complex64::new(normal(c), normal(d)),
            ];
        }
        for (slot, rngs) in out.r1.iter_mut().zip(self.r1.iter_mut()) {
            *slot = Complex64::new(normal(&mut rngs[0]), normal(&mut rngs[1]));
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}
