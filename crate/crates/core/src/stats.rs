//! Monte-Carlo summaries and goodness-of-fit helpers.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};

/// Sample mean with its standard error `sd/√n` (zero for a single sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> Result<MeanSe> {
    if xs.is_empty() {
        return Err(invalid("no samples"));
    }
    let n = xs.len();
    if xs.iter().all(|x| *x == xs[0]) {
        return Ok(MeanSe { mean: xs[0], se: 0.0, n });
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        (sample_variance_about(xs, mean) / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(MeanSe { mean, se, n })
}

fn sample_variance_about(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Unbiased sample variance; needs at least two samples.
pub fn sample_variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(invalid("sample variance needs at least two samples"));
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(sample_variance_about(xs, mean))
}

/// Sample covariance of paired samples and the standard error of that
/// estimate (from the spread of the centred products).
pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("covariance needs two equally long series of length ≥ 2"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let m = mean_se(&prods)?;
    Ok((m.mean * n / (n - 1.0), m.se))
}

/// One-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of `xs` against `N(mean, sd²)`, asymptotic p-value with the
/// Stephens small-sample correction.
pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(invalid("no samples"));
    }
    let law = Normal::new(mean, sd).map_err(|e| invalid(format!("bad normal law: {e}")))?;
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = law.cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    #[test]
    fn mean_and_error() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]).unwrap().se, 0.0);
        assert!(sample_variance(&[1.0]).is_err());
        assert_eq!(sample_variance(&[1.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn kolmogorov_tail_known_values() {
        // tabulated critical values of the limiting distribution
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_tail(1.9495) - 0.001).abs() < 1e-4);
    }

    #[test]
    fn ks_accepts_normal_and_rejects_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..5000).map(|_| 2.0 + 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        assert!(ks_normal(&xs, 2.0, 3.0).unwrap().p_value > 1e-3);
        let u = Uniform::new(-1.7, 1.7).unwrap();
        let ys: Vec<f64> = (0..5000).map(|_| u.sample(&mut rng)).collect();
        assert!(ks_normal(&ys, 0.0, 1.0).unwrap().p_value < 1e-6);
    }

    #[test]
    fn covariance_of_correlated_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..20_000 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            xs.push(a);
            ys.push(0.6 * a + 0.8 * b);
        }
        let (c, se) = sample_covariance(&xs, &ys).unwrap();
        assert!((c - 0.6).abs() < 4.0 * se, "{c} ± {se}");
    }

    use rand::Rng;
}
