//! Grid-refinement studies: halve `h` and `dt` together and fit observed orders.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::coupling_discrepancy;

use super::config::ScenarioConfig;
use super::init::director_profile;
use super::scenario::{RunOptions, run_scenario};

/// Seeds of the director fields the coupling discrepancy is maximised over.
pub const COUPLING_SEEDS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementLevel {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub final_drift: f64,
    pub residual_integral: f64,
    /// `int D dt` over the run.
    pub dissipated: f64,
    pub coupling_discrepancy: f64,
    pub monotonicity_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementTable {
    pub levels: Vec<RefinementLevel>,
    pub drift_order: f64,
    pub residual_order: f64,
    pub coupling_order: f64,
}

impl RefinementTable {
    pub const CSV_HEADER: &'static str = "nx,ny,h,dt,steps,final_drift,residual_integral,coupling_discrepancy";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for l in &self.levels {
            writeln!(
                s,
                "{},{},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                l.nx, l.ny, l.h, l.dt, l.steps, l.final_drift, l.residual_integral, l.coupling_discrepancy
            )
            .unwrap();
        }
        writeln!(
            s,
            "# order,,,,,{:.6},{:.6},{:.6}",
            self.drift_order, self.residual_order, self.coupling_order
        )
        .unwrap();
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn observed_order(h: &[f64], e: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn level_config(base: &ScenarioConfig, k: usize) -> ScenarioConfig {
    let f = 1usize << k;
    let mut cfg = base.clone();
    cfg.grid.nx = base.grid.nx * f;
    cfg.grid.ny = base.grid.ny * f;
    cfg.time.dt = Some(base.dt() / f as f64);
    cfg.time.output_every = usize::MAX;
    cfg
}

fn run_level(cfg: &ScenarioConfig) -> Result<RefinementLevel> {
    let grid = cfg.grid()?;
    let opts = RunOptions { out_dir: None, snapshots: false, analysis: false };
    let summary = run_scenario(cfg, &opts)?;
    let mut coupling: f64 = 0.0;
    for seed in 0..COUPLING_SEEDS {
        let d = director_profile(&grid, cfg.scenario.seed.wrapping_add(seed), cfg.scenario.perturbation_amplitude);
        coupling = coupling.max(coupling_discrepancy(&grid, &d));
    }
    Ok(RefinementLevel {
        nx: grid.nx(),
        ny: grid.ny(),
        h: grid.hx().max(grid.hy()),
        dt: cfg.dt(),
        steps: summary.steps,
        final_drift: summary.final_drift,
        residual_integral: summary.residual_integral,
        dissipated: summary.dissipated,
        coupling_discrepancy: coupling,
        monotonicity_violations: summary.monotonicity_violations,
    })
}

/// Runs `levels` successively refined copies of `base` in parallel.
pub fn refinement_study(base: &ScenarioConfig, levels: usize) -> Result<RefinementTable> {
    if levels < 3 {
        return Err(Error::TooFewLevels(levels));
    }
    base.validate()?;
    let configs: Vec<ScenarioConfig> = (0..levels).map(|k| level_config(base, k)).collect();
    let results: Vec<Result<RefinementLevel>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_level(c))).collect();
        handles.into_iter().map(|h| h.join().expect("refinement level panicked")).collect()
    });
    let levels = results.into_iter().collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let col = |f: fn(&RefinementLevel) -> f64| observed_order(&h, &levels.iter().map(f).collect::<Vec<_>>());
    Ok(RefinementTable {
        drift_order: col(|l| l.final_drift),
        residual_order: col(|l| l.residual_integral),
        coupling_order: col(|l| l.coupling_discrepancy),
        levels,
    })
}
