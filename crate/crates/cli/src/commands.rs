//! One function per subcommand. Each validates, computes, writes its files
//! and reports whether its pass criterion held.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use skm_core::experiments::{
    counterexample_variance, eps_sweep_first_order, eps_sweep_second_order, failure_floor, mu_sweep, rate_fit,
    CounterexampleResult, RateFit, SweepTable, GRID_SUP_TOLERANCE,
};
use skm_core::invariants::{run_suite, CheckOutcome, SuiteGrid};
use skm_core::sim::{
    simulate_first_order, simulate_second_order, write_first_order_csv, write_second_order_csv, PathSeed,
};

use crate::config::{ConfigError, Format, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    master_seed: u64,
    passed: bool,
    config: &'a RunConfig,
    results: T,
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let dir = &cfg.output.directory;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { cfg, files: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.directory.join(name)
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }

    fn csv<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        if self.cfg.wants(Format::Csv) {
            self.write(name, body)?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, command: &str, passed: bool, results: T) -> Result<()> {
        if !self.cfg.wants(Format::Json) {
            return Ok(());
        }
        let summary = Summary {
            schema_version: SCHEMA_VERSION,
            command,
            master_seed: self.cfg.simulation.master_seed,
            passed,
            config: self.cfg,
            results,
        };
        let text = serde_json::to_string_pretty(&summary)?;
        self.write(name, |w| writeln!(w, "{text}"))
    }

    fn finish(self, passed: bool) -> Outcome {
        Outcome {
            passed,
            files: self.files,
        }
    }
}

fn print_table(label: &str, table: &SweepTable) {
    println!("{label}");
    for r in &table.rows {
        let flag = if r.flagged() {
            format!("  ({} paths unstable)", r.failed_paths)
        } else {
            String::new()
        };
        println!("  {:<10} {:.6e} ± {:.2e}{flag}", r.param, r.estimate, r.stderr);
    }
}

fn sweep_ok(table: &SweepTable) -> bool {
    table.monotone_within(2.0)
        && table.rows.iter().all(|r| !r.flagged() && r.grid_sup_change() < GRID_SUP_TOLERANCE)
}

fn write_sweep_csv(w: &mut Writer, name: &str, table: &SweepTable) -> Result<()> {
    w.csv(name, |out| table.write_csv(out))
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let outcomes = run_suite(&SuiteGrid::default())?;
    let passed = outcomes.iter().all(|o| o.passed);
    for o in &outcomes {
        let tag = if o.passed { "ok  " } else { "FAIL" };
        println!("{tag} {:<30} {:>6} checks, max defect {:+.3e} (tol {:.0e})", o.name, o.checked, o.max_defect, o.tolerance);
    }
    let mut w = Writer::new(cfg)?;
    w.csv("verify.csv", |out| {
        writeln!(out, "check,checked,max_defect,tolerance,passed")?;
        for o in &outcomes {
            writeln!(out, "{},{},{},{},{}", o.name, o.checked, o.max_defect, o.tolerance, o.passed)?;
        }
        Ok(())
    })?;
    w.json::<&[CheckOutcome]>("verify.json", "verify", passed, &outcomes)?;
    Ok(w.finish(passed))
}

#[derive(Serialize)]
struct SweepReport<'a> {
    table: &'a SweepTable,
    fit: Option<RateFit>,
    monotone_within_2se: bool,
}

fn report(table: &SweepTable) -> SweepReport<'_> {
    SweepReport {
        table,
        fit: rate_fit(&table.positive_params()).ok(),
        monotone_within_2se: table.monotone_within(2.0),
    }
}

pub fn skm(cfg: &RunConfig) -> Result<Outcome> {
    let eps = cfg.epss()[0];
    if eps <= 0.0 {
        return Err(ConfigError(format!("the skm sweep needs physics.eps > 0 (first value is {eps})")).into());
    }
    let sc = cfg.sweep_config()?;
    let table = mu_sweep(eps, &cfg.mus(), &sc, cfg.simulation.paths)?;
    print_table(&format!("E sup|u_μ − u_ε|^p at ε = {eps}"), &table);
    let passed = sweep_ok(&table);
    let mut w = Writer::new(cfg)?;
    write_sweep_csv(&mut w, "skm.csv", &table)?;
    w.json("skm.json", "skm", passed, report(&table))?;
    Ok(w.finish(passed))
}

#[derive(Serialize)]
struct FrictionReport<'a> {
    first_order: SweepReport<'a>,
    second_order: SweepReport<'a>,
    second_order_mu: f64,
}

pub fn friction(cfg: &RunConfig) -> Result<Outcome> {
    let sc = cfg.sweep_config()?;
    let epss = cfg.epss();
    let mu = cfg.mus()[0];
    let first = eps_sweep_first_order(&epss, &sc, cfg.simulation.paths)?;
    let second = eps_sweep_second_order(mu, &epss, &sc, cfg.simulation.paths)?;
    print_table("E sup|u_ε − u|^p (first order)", &first);
    print_table(&format!("E sup|z_μ^ε − z_μ^0|^p at μ = {mu}"), &second);
    let passed = sweep_ok(&first) && sweep_ok(&second);
    let mut w = Writer::new(cfg)?;
    write_sweep_csv(&mut w, "friction_first_order.csv", &first)?;
    write_sweep_csv(&mut w, "friction_second_order.csv", &second)?;
    w.json(
        "friction.json",
        "friction",
        passed,
        FrictionReport {
            first_order: report(&first),
            second_order: report(&second),
            second_order_mu: mu,
        },
    )?;
    Ok(w.finish(passed))
}

#[derive(Serialize)]
struct CounterexampleReport<'a> {
    variance: &'a [CounterexampleResult],
    failure_floor: &'a SweepTable,
    lower_bounds: Vec<f64>,
}

pub fn counterexample(cfg: &RunConfig) -> Result<Outcome> {
    let s = &cfg.simulation;
    let grid = cfg.grid()?;
    let mut variance = Vec::new();
    for mu in cfg.mus() {
        let r = counterexample_variance(mu, s.t_final, grid.steps, s.paths, s.master_seed)?;
        println!(
            "Var ∫ sin(s/μ) dB at μ = {mu}: {:.6} ± {:.2e}, exact {:.6}",
            r.empirical_var, r.stderr, r.closed_form
        );
        variance.push(r);
    }
    let mut sc = cfg.sweep_config()?;
    sc.grid = grid;
    let floor = failure_floor(&cfg.mus(), &sc, s.paths)?;
    print_table("E sup|u_μ − u|^p without friction", &floor);
    let lower_bounds: Vec<f64> = floor.rows.iter().map(|r| r.lower_bound()).collect();
    let passed = variance.iter().all(|r| r.z_score().abs() <= 3.0) && lower_bounds.iter().all(|l| *l > 0.0);
    let mut w = Writer::new(cfg)?;
    w.csv("counterexample.csv", |out| {
        writeln!(out, "# master_seed={}", s.master_seed)?;
        writeln!(out, "mu,t,empirical_var,stderr,closed_form,paths")?;
        for r in &variance {
            writeln!(out, "{},{},{},{},{},{}", r.mu, r.t, r.empirical_var, r.stderr, r.closed_form, r.paths)?;
        }
        Ok(())
    })?;
    write_sweep_csv(&mut w, "failure_floor.csv", &floor)?;
    w.json(
        "counterexample.json",
        "counterexample",
        passed,
        CounterexampleReport {
            variance: &variance,
            failure_floor: &floor,
            lower_bounds,
        },
    )?;
    Ok(w.finish(passed))
}

#[derive(Serialize)]
struct SimulateReport {
    mu: f64,
    eps: f64,
    path_id: u64,
    steps: usize,
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let init = cfg.initial_state()?;
    let (mu, eps) = (cfg.mus()[0], cfg.epss()[0]);
    let seed = PathSeed::new(cfg.simulation.master_seed, 1);
    let second = simulate_second_order(mu, eps, &model, &init, &grid, seed)?;
    let first = simulate_first_order(eps, &model, &init.u0, &grid, seed)?;
    println!("simulated {} steps at μ = {mu}, ε = {eps}", grid.steps);
    let mut w = Writer::new(cfg)?;
    let header = |out: &mut BufWriter<File>| writeln!(out, "# master_seed={}", cfg.simulation.master_seed);
    w.csv("trajectory_second_order.csv", |out| {
        header(out)?;
        write_second_order_csv(out, &second)
    })?;
    w.csv("trajectory_first_order.csv", |out| {
        header(out)?;
        write_first_order_csv(out, &first)
    })?;
    w.json(
        "simulate.json",
        "simulate",
        true,
        SimulateReport {
            mu,
            eps,
            path_id: 1,
            steps: grid.steps,
        },
    )?;
    Ok(w.finish(true))
}

pub fn describe_files(files: &[PathBuf]) -> String {
    files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}
