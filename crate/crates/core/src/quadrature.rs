//! Small quadrature toolkit: composite Simpson on uniform samples, adaptive
//! Simpson for vector-valued integrands, and composite Gauss–Legendre.

use std::ops::{Add, Mul};

use crate::error::{invalid, Error, Result};

/// Composite Simpson weights for `intervals` uniform intervals of width `h`.
///
/// An odd interval count closes with a Simpson 3/8 panel.
pub fn simpson_weights(intervals: usize, h: f64) -> Result<Vec<f64>> {
    if intervals < 2 {
        return Err(invalid(format!("Simpson needs at least 2 intervals, got {intervals}")));
    }
    let mut w = vec![0.0; intervals + 1];
    let (even_part, tail) = if intervals % 2 == 0 {
        (intervals, 0)
    } else {
        (intervals - 3, 3)
    };
    for i in (0..even_part).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if tail == 3 {
        let s = even_part;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    Ok(w)
}

/// Simpson integral of uniformly spaced samples.
pub fn simpson<T>(samples: &[T], h: f64) -> Result<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    if samples.len() < 3 {
        return Err(invalid("Simpson needs at least 3 samples"));
    }
    let w = simpson_weights(samples.len() - 1, h)?;
    let mut acc = samples[0] * w[0];
    for (s, wi) in samples.iter().zip(&w).skip(1) {
        acc = acc + *s * *wi;
    }
    Ok(acc)
}

/// Simpson value together with the Richardson estimate `|I_h - I_{2h}| / 15`.
///
/// Needs an even number of intervals divisible by four so both levels are
/// pure Simpson.
pub fn simpson_with_estimate(samples: &[f64], h: f64) -> Result<(f64, f64)> {
    let intervals = samples.len().saturating_sub(1);
    if intervals < 4 || intervals % 4 != 0 {
        return Err(invalid(format!(
            "Richardson-checked Simpson needs a multiple of 4 intervals, got {intervals}"
        )));
    }
    let fine = simpson(samples, h)?;
    let coarse_samples: Vec<f64> = samples.iter().step_by(2).copied().collect();
    let coarse = simpson(&coarse_samples, 2.0 * h)?;
    Ok((fine, (fine - coarse).abs() / 15.0))
}

/// Adaptive Simpson for an `N`-vector integrand; stops when each panel's
/// Richardson estimate is below `rel_tol` times the running magnitude.
pub fn adaptive_simpson<const N: usize, F>(f: F, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> Result<[f64; N]>
where
    F: Fn(f64) -> [f64; N],
{
    if !(b > a) {
        if a == b {
            return Ok([0.0; N]);
        }
        return Err(invalid(format!("bad interval [{a}, {b}]")));
    }
    // seed the magnitude scale with a coarse pass
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = panel(a, b, &fa, &fm, &fb);
    let scale = {
        let mut s = norm(&whole);
        for k in 1..16 {
            let x = a + (b - a) * k as f64 / 16.0;
            s = s.max(norm(&f(x)) * (b - a));
        }
        s.max(f64::MIN_POSITIVE)
    };
    let mut ok = true;
    let out = recurse(&f, a, b, fa, fm, fb, whole, rel_tol * scale, max_depth, &mut ok);
    if !ok {
        return Err(Error::RefinementRequired(format!(
            "adaptive Simpson hit depth {max_depth} on [{a}, {b}]"
        )));
    }
    Ok(out)
}

fn norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn panel<const N: usize>(a: f64, b: f64, fa: &[f64; N], fm: &[f64; N], fb: &[f64; N]) -> [f64; N] {
    let h = (b - a) / 6.0;
    std::array::from_fn(|i| h * (fa[i] + 4.0 * fm[i] + fb[i]))
}

#[allow(clippy::too_many_arguments)]
fn recurse<const N: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    fa: [f64; N],
    fm: [f64; N],
    fb: [f64; N],
    whole: [f64; N],
    abs_tol: f64,
    depth: u32,
    ok: &mut bool,
) -> [f64; N]
where
    F: Fn(f64) -> [f64; N],
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = panel(a, m, &fa, &flm, &fm);
    let right = panel(m, b, &fm, &frm, &fb);
    let mut err = 0.0f64;
    for i in 0..N {
        err = err.max((left[i] + right[i] - whole[i]).abs());
    }
    if err <= 15.0 * abs_tol {
        return std::array::from_fn(|i| left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0);
    }
    if depth == 0 {
        *ok = false;
        return std::array::from_fn(|i| left[i] + right[i]);
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * abs_tol, depth - 1, ok);
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * abs_tol, depth - 1, ok);
    std::array::from_fn(|i| l[i] + r[i])
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Nodes and weights of `panels`-fold composite 8-point Gauss–Legendre on `[a, b]`.
pub fn gauss_legendre_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(8 * panels);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}
