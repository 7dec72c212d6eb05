//! Energy, dissipation and the discrete energy-identity residual.
//!
//! With general coefficients the Ljapunov pair is
//! `E = |u|^2/2 + lambda |grad d|^2/2` and
//! `D = nu |grad u|^2 + lambda gamma |lap d + |grad d|^2 d|^2`,
//! which reduces to the textbook form for unit coefficients.

use std::io::Write;

use serde::Serialize;

use crate::director::{constraint_drift, harmonic_residual_field};
use crate::error::{Error, Result};
use crate::flow::PhysicalParams;
use crate::mesh::{FaceField, Grid, ScalarField, State};
use crate::operators::gradient_density;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e_kin: f64,
    pub e_pot: f64,
    pub e_total: f64,
    pub dissipation: f64,
    pub drift: f64,
}

/// `|grad u|^2` integrated over the faces' dual cells. Differences to the
/// antireflected ghosts across a wall carry half weight, which makes this
/// exactly `-<u, lap u>` for the no-slip face Laplacian.
pub fn velocity_gradient_sq(grid: &Grid, u: &FaceField) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ax, ay) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut sum = 0.0;
    // x-velocity: normal differences include the zero wall faces
    for j in 0..ny {
        for i in 0..nx {
            sum += (u.x(i + 1, j) - u.x(i, j)).powi(2) * ax;
        }
        for i in 1..nx {
            if j + 1 < ny {
                sum += (u.x(i, j + 1) - u.x(i, j)).powi(2) * ay;
            }
            if j == 0 || j + 1 == ny {
                sum += 2.0 * u.x(i, j).powi(2) * ay;
            }
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            if i + 1 < nx {
                sum += (u.y(i + 1, j) - u.y(i, j)).powi(2) * ax;
            }
            if i == 0 || i + 1 == nx {
                sum += 2.0 * u.y(i, j).powi(2) * ax;
            }
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            sum += (u.y(i, j + 1) - u.y(i, j)).powi(2) * ay;
        }
    }
    sum * grid.cell_area()
}

pub fn energy(grid: &Grid, state: &State, params: &PhysicalParams) -> EnergyReport {
    let area = grid.cell_area();
    let e_kin = 0.5 * state.u.interior_dot(&state.u) * area;
    let g: ScalarField = gradient_density(grid, &state.d);
    let e_pot = 0.5 * params.lambda * g.interior().iter().sum::<f64>() * area;
    let h = harmonic_residual_field(grid, &state.d);
    let dissipation =
        params.nu * velocity_gradient_sq(grid, &state.u) + params.lambda * params.gamma * h.interior_dot(&h) * area;
    EnergyReport { t: state.t, e_kin, e_pot, e_total: e_kin + e_pot, dissipation, drift: constraint_drift(&state.d) }
}

/// `r_n = (E_{n+1} - E_n)/dt + (D_n + D_{n+1})/2` for one step.
pub fn step_residual(prev: &EnergyReport, next: &EnergyReport, dt: f64) -> f64 {
    (next.e_total - prev.e_total) / dt + 0.5 * (prev.dissipation + next.dissipation)
}

/// `|r_n|` along a constant-step trajectory.
pub fn energy_identity_residual(traj: &[EnergyReport], dt: f64) -> Result<Vec<f64>> {
    if traj.len() < 2 {
        return Err(Error::TrajectoryTooShort(traj.len()));
    }
    Ok(traj.windows(2).map(|w| step_residual(&w[0], &w[1], dt).abs()).collect())
}

pub const CSV_HEADER: &str = "t,e_kin,e_pot,e_total,dissipation,residual,drift";

/// Streams diagnostics rows with 17 significant digits.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn row(&mut self, e: &EnergyReport, residual: f64) -> Result<()> {
        writeln!(
            self.out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.t, e.e_kin, e.e_pot, e.e_total, e.dissipation, residual, e.drift
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
