use serde::{Deserialize, Serialize};

use crate::diagnostics::{EnergyReport, energy as energy_report};
use crate::director::{ConstraintPolicy, director_step, max_gradient_norm, nlevp_residual, renormalize};
use crate::error::{Error, Result};
use crate::flow::PhysicalParams;
use crate::mesh::{BoundaryCondition, DirectorField, FaceField, Grid, State};
use crate::operators::{AdvectionScheme, gradient_density};
use crate::solver::Scheme;

/// Unit vectors used when `mean(d) = 0` leaves the minimiser undetermined.
pub fn sphere_samples(m: usize, count: usize) -> Vec<Vec<f64>> {
    match m {
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

/// `|u| + min_{|p| = 1} |d - p|` in the discrete L2 norms.
pub fn distance_to_equilibria(grid: &Grid, state: &State) -> f64 {
    velocity_norm(grid, &state.u) + director_distance(grid, &state.d, 64)
}

pub fn velocity_norm(grid: &Grid, u: &FaceField) -> f64 {
    (u.interior_dot(u) * grid.cell_area()).sqrt()
}

/// `min_p |d - p|` using `|d - p|^2 = |d|^2 - 2 <mean d, p> area + area`.
pub fn director_distance(grid: &Grid, d: &DirectorField, samples: usize) -> f64 {
    let area = grid.area();
    let norm_sq = d.interior_dot(d) * grid.cell_area();
    let mean = d.mean_vector();
    let mnorm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    let best = if mnorm > 1e-14 {
        mnorm
    } else {
        sphere_samples(d.ncomp(), samples)
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    (norm_sq - 2.0 * best * area + area).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyOptions {
    pub max_iter: usize,
    pub dt_max: f64,
    pub dt_grow: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { max_iter: 20_000, dt_max: 0.5, dt_grow: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyResult {
    pub d: DirectorField,
    pub iterations: usize,
    pub residual: f64,
    pub max_gradient: f64,
    pub rejected: usize,
    /// One entry per accepted step.
    pub history: Vec<SteadySample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadySample {
    /// Accumulated pseudo-time.
    pub t: f64,
    pub dt: f64,
    pub report: EnergyReport,
}

/// Harmonic-map heat flow with `u = 0`, renormalised each step, with a step
/// size that grows while the Dirichlet energy decreases and halves when it
/// does not. Stops at `nlevp_residual <= tol`.
pub fn steady_director_flow(
    grid: &Grid,
    d0: &DirectorField,
    params: &PhysicalParams,
    tol: f64,
    opts: &SteadyOptions,
) -> Result<SteadyResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    let mut d = d0.clone();
    renormalize(&mut d)?;
    d.fill_ghosts(BoundaryCondition::Neumann);
    let scheme = Scheme { advection: AdvectionScheme::Off, elastic_coupling: false, ..Scheme::default() };
    let policy = ConstraintPolicy::renormalize();
    let energy = |d: &DirectorField| gradient_density(grid, d).interior().iter().sum::<f64>();
    let mut state = State::new(grid, FaceField::zeros(grid), d, 0.0)?;
    let mut e = energy(&state.d);
    let mut residual = nlevp_residual(grid, &state.d);
    let mut dt = 0.25 * grid.h_min().powi(2) / params.gamma;
    let (mut iterations, mut rejected) = (0, 0);
    let mut history = Vec::new();
    while residual > tol {
        if iterations >= opts.max_iter {
            return Err(Error::SteadyNotReached { iterations, residual });
        }
        iterations += 1;
        let (next, _) = director_step(grid, &state, params, dt, &scheme, &policy)?;
        let en = energy(&next.d);
        if en <= e * (1.0 + 4.0 * f64::EPSILON) {
            state = next;
            history.push(SteadySample { t: state.t, dt, report: energy_report(grid, &state, params) });
            e = en;
            residual = nlevp_residual(grid, &state.d);
            dt = (dt * opts.dt_grow).min(opts.dt_max);
        } else {
            rejected += 1;
            dt *= 0.5;
            if dt < 1e-12 {
                return Err(Error::SteadyNotReached { iterations, residual });
            }
        }
    }
    let max_gradient = max_gradient_norm(grid, &state.d);
    Ok(SteadyResult { d: state.d, iterations, residual, max_gradient, rejected, history })
}
