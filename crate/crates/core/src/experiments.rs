//! Monte-Carlo sweeps over `μ` and `ε`, the oscillating-integral
//! counterexample, and log–log rate fits.
//!
//! Every path `m = 1..=M` is driven by `PathSeed { master_seed, path_id: m }`
//! for every parameter value, so rows of a table share their random numbers.
//! Paths run in parallel; per-path results are collected in path order and
//! reduced sequentially, so tables do not depend on the thread schedule.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::sim::rng::{brownian_increments, PathSeed};
use crate::sim::spec::{InitialState, Model, SimGrid};
use crate::sim::stepper::{
    first_order_positions, first_order_sup_against, second_order_phases, second_order_sup_against,
    second_order_weighted_sup_against, GridSup,
};
use crate::stats::mean_se;

/// Relative change of a grid sup, between the run grid and the grid of twice
/// the step, above which the sup is considered under-resolved.
pub const GRID_SUP_TOLERANCE: f64 = 0.05;

/// Everything a sweep needs besides the swept parameter and `M`.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub model: Model,
    pub init: InitialState,
    pub grid: SimGrid,
    pub master_seed: u64,
}

/// One Monte-Carlo cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Paths that completed.
    pub paths: usize,
    pub p: f64,
    /// Paths lost to numerical blow-up.
    pub failed_paths: usize,
    /// Same estimate with the sup taken over every other grid time.
    pub coarse_estimate: f64,
}

impl SweepRow {
    /// One-sided 95% lower confidence bound `estimate − 1.96·stderr`.
    pub fn lower_bound(&self) -> f64 {
        self.estimate - 1.96 * self.stderr
    }

    pub fn flagged(&self) -> bool {
        self.failed_paths > 0
    }

    /// `|est − est_{2dt}| / est`, zero when both vanish.
    pub fn grid_sup_change(&self) -> f64 {
        let d = (self.estimate - self.coarse_estimate).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.estimate.abs()
        }
    }
}

/// Rows sorted by parameter, largest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "param,estimate,stderr,paths,p";

impl SweepTable {
    /// `# master_seed=…` followed by `param,estimate,stderr,paths,p` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# master_seed={}", self.master_seed)?;
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.param, r.estimate, r.stderr, r.paths, r.p)?;
        }
        Ok(())
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.estimate).collect()
    }

    /// Every estimate is at most its predecessor plus twice their combined
    /// standard error.
    pub fn monotone_within(&self, k_se: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let slack = k_se * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].estimate <= w[0].estimate + slack
        })
    }

    /// Rows whose parameter is strictly positive, as needed for a log–log fit.
    pub fn positive_params(&self) -> SweepTable {
        SweepTable {
            master_seed: self.master_seed,
            rows: self.rows.iter().filter(|r| r.param > 0.0).cloned().collect(),
        }
    }
}

fn check_paths(m: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("need at least one path"));
    }
    Ok(())
}

fn check_params(xs: &[f64], name: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid(format!("empty {name} list")));
    }
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid(format!("{name} values must be finite and nonnegative")));
    }
    Ok(())
}

/// Per-path, per-parameter results; instabilities are kept, anything else
/// aborts the sweep.
type PathCells = Vec<Result<GridSup>>;

fn run_cells<F>(cfg: &SweepConfig, m: usize, n_params: usize, per_path: F) -> Result<Vec<PathCells>>
where
    F: Fn(PathSeed) -> Result<PathCells> + Sync,
{
    let results: Vec<Result<PathCells>> = (1..=m as u64)
        .into_par_iter()
        .map(|id| {
            let seed = PathSeed::new(cfg.master_seed, id);
            match per_path(seed) {
                Err(e @ Error::Instability { .. }) => Ok((0..n_params).map(|_| Err(e.clone())).collect()),
                other => other,
            }
        })
        .collect();
    let mut out = Vec::with_capacity(m);
    for r in results {
        let cells = r?;
        for c in &cells {
            if let Err(e) = c {
                if !matches!(e, Error::Instability { .. }) {
                    return Err(e.clone());
                }
            }
        }
        out.push(cells);
    }
    Ok(out)
}

fn tabulate(cfg: &SweepConfig, params: &[f64], cells: &[PathCells]) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(params.len());
    for (j, param) in params.iter().enumerate() {
        let ok: Vec<GridSup> = cells.iter().filter_map(|c| c[j].as_ref().ok().copied()).collect();
        let failed_paths = cells.len() - ok.len();
        let (estimate, stderr, coarse_estimate) = if ok.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let fine = mean_se(&ok.iter().map(|g| g.value).collect::<Vec<_>>())?;
            let coarse = mean_se(&ok.iter().map(|g| g.even_value).collect::<Vec<_>>())?;
            (fine.mean, fine.se, coarse.mean)
        };
        rows.push(SweepRow {
            param: *param,
            estimate,
            stderr,
            paths: ok.len(),
            p: cfg.grid.p,
            failed_paths,
            coarse_estimate,
        });
    }
    rows.sort_by(|a, b| b.param.total_cmp(&a.param));
    Ok(SweepTable {
        master_seed: cfg.master_seed,
        rows,
    })
}

fn sweep_mu(eps: f64, mus: &[f64], cfg: &SweepConfig, m: usize) -> Result<SweepTable> {
    check_params(mus, "μ")?;
    check_paths(m)?;
    for mu in mus {
        if *mu <= 0.0 {
            return Err(invalid("μ values must be positive"));
        }
        cfg.grid.check_second_order(*mu)?;
    }
    let cells = run_cells(cfg, m, mus.len(), |seed| {
        let reference = first_order_positions(eps, &cfg.model, &cfg.init.u0, &cfg.grid, seed)?;
        Ok(mus
            .iter()
            .map(|mu| second_order_sup_against(*mu, eps, &cfg.model, &cfg.init, &cfg.grid, seed, &reference))
            .collect())
    })?;
    tabulate(cfg, mus, &cells)
}

/// `E sup_t |u_μ^ε(t) − u_ε(t)|_H^p` for each `μ`, with `u_ε(0) = Π₁z₀`.
pub fn mu_sweep(eps: f64, mus: &[f64], cfg: &SweepConfig, m: usize) -> Result<SweepTable> {
    if !(eps > 0.0) {
        return Err(invalid(format!("the μ-sweep needs ε > 0, got {eps}")));
    }
    sweep_mu(eps, mus, cfg, m)
}

/// The same quantity with `ε = 0` in both systems, where no limit holds.
/// Read the rows through [`SweepRow::lower_bound`].
pub fn failure_floor(mus: &[f64], cfg: &SweepConfig, m: usize) -> Result<SweepTable> {
    sweep_mu(0.0, mus, cfg, m)
}

/// `E sup_t |u_ε(t) − u(t)|_H^p` against the frictionless first-order system.
pub fn eps_sweep_first_order(epss: &[f64], cfg: &SweepConfig, m: usize) -> Result<SweepTable> {
    check_params(epss, "ε")?;
    check_paths(m)?;
    let cells = run_cells(cfg, m, epss.len(), |seed| {
        let reference = first_order_positions(0.0, &cfg.model, &cfg.init.u0, &cfg.grid, seed)?;
        Ok(epss
            .iter()
            .map(|eps| first_order_sup_against(*eps, &cfg.model, &cfg.init.u0, &cfg.grid, seed, &reference))
            .collect())
    })?;
    tabulate(cfg, epss, &cells)
}

/// `E sup_t |z_μ^ε(t) − z_μ^0(t)|_{𝓗(μ)}^p` at fixed `μ`.
pub fn eps_sweep_second_order(mu: f64, epss: &[f64], cfg: &SweepConfig, m: usize) -> Result<SweepTable> {
    check_params(epss, "ε")?;
    check_paths(m)?;
    cfg.grid.check_second_order(mu)?;
    let cells = run_cells(cfg, m, epss.len(), |seed| {
        let reference: Vec<(Vec<Complex64>, Vec<Complex64>)> =
            second_order_phases(mu, 0.0, &cfg.model, &cfg.init, &cfg.grid, seed)?;
        Ok(epss
            .iter()
            .map(|eps| {
                second_order_weighted_sup_against(mu, *eps, &cfg.model, &cfg.init, &cfg.grid, seed, &reference)
            })
            .collect())
    })?;
    tabulate(cfg, epss, &cells)
}

/// Sample variance of `∫₀ᵗ sin(s/μ) dB(s)` next to its exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleResult {
    pub mu: f64,
    pub t: f64,
    pub empirical_var: f64,
    /// Standard error of `empirical_var`.
    pub stderr: f64,
    /// `t/2 − (μ/4) sin(2t/μ)`.
    pub closed_form: f64,
    pub paths: usize,
}

impl CounterexampleResult {
    pub fn z_score(&self) -> f64 {
        (self.empirical_var - self.closed_form) / self.stderr
    }
}

/// Itô sums `Σ sin(s_i/μ) ΔB_i` on `steps` left endpoints over `M` paths, path
/// `m` using the first scalar Brownian motion of `PathSeed(master_seed, m)`.
pub fn counterexample_variance(mu: f64, t: f64, steps: usize, m: usize, master_seed: u64) -> Result<CounterexampleResult> {
    if !(mu > 0.0) || !(t > 0.0) || steps == 0 {
        return Err(invalid("need μ > 0, t > 0 and at least one step"));
    }
    if m < 2 {
        return Err(invalid("a sample variance needs at least two paths"));
    }
    let dt = t / steps as f64;
    if dt > mu / 20.0 {
        return Err(Error::Precondition(format!(
            "step {dt} does not resolve sin(s/μ) (need dt ≤ μ/20 = {})",
            mu / 20.0
        )));
    }
    let weights: Vec<f64> = (0..steps).map(|i| (i as f64 * dt / mu).sin()).collect();
    let samples = (1..=m as u64)
        .into_par_iter()
        .map(|id| {
            let db = brownian_increments(PathSeed::new(master_seed, id), 1, 1, steps, dt)?;
            Ok(weights.iter().zip(&db).map(|(w, d)| w * d).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = samples.iter().sum::<f64>() / m as f64;
    let scale = m as f64 / (m as f64 - 1.0);
    let sq: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2) * scale).collect();
    let v = mean_se(&sq)?;
    Ok(CounterexampleResult {
        mu,
        t,
        empirical_var: v.mean,
        stderr: v.se,
        closed_form: t / 2.0 - mu / 4.0 * (2.0 * t / mu).sin(),
        paths: m,
    })
}

/// Least-squares line through `(log param, log estimate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn rate_fit(table: &SweepTable) -> Result<RateFit> {
    if table.rows.len() < 3 {
        return Err(Error::UndefinedFit(format!("{} rows, need at least 3", table.rows.len())));
    }
    if table.rows.iter().any(|r| !(r.estimate > 0.0) || !(r.param > 0.0)) {
        return Err(Error::UndefinedFit("log–log fit needs positive parameters and estimates".into()));
    }
    let xs: Vec<f64> = table.rows.iter().map(|r| r.param.ln()).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.estimate.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::UndefinedFit("all parameters are equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
