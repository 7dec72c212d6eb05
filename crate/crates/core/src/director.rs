//! Director step (transported harmonic-map heat flow) and the unit-sphere
//! constraint diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{PhysicalParams, check_dt};
use crate::mesh::{BoundaryCondition, CellField, DirectorField, Grid, ScalarField, State};
use crate::operators::{advect_cells_into, cell_laplacian_into, gradient_density_into, max_face_gradient};
use crate::solver::{CgReport, Scheme, conjugate_gradient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Free,
    Renormalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintPolicy {
    pub mode: ConstraintMode,
    #[serde(default = "default_budget")]
    pub drift_budget: f64,
}

fn default_budget() -> f64 {
    1e-3
}

impl Default for ConstraintPolicy {
    fn default() -> Self {
        Self { mode: ConstraintMode::Free, drift_budget: default_budget() }
    }
}

impl ConstraintPolicy {
    pub fn renormalize() -> Self {
        Self { mode: ConstraintMode::Renormalize, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.drift_budget.is_finite() && self.drift_budget > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("drift_budget {} must be positive and finite", self.drift_budget)))
        }
    }
}

/// Right-hand side `dt (gamma lap d + gamma |grad d|^2 d - (u.grad) d)` of
/// the increment equation.
fn director_increment_rhs(grid: &Grid, state: &State, params: &PhysicalParams, dt: f64, scheme: &Scheme) -> CellField {
    let d = &state.d;
    let mut rhs = CellField::zeros(grid, d.ncomp());
    cell_laplacian_into(grid, d, &mut rhs);
    if scheme.harmonic_term {
        let mut g = ScalarField::zeros(grid, 1);
        gradient_density_into(grid, d, &mut g);
        for c in 0..d.ncomp() {
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    let k = rhs.raw_index(c, i as isize, j as isize);
                    rhs.raw_mut()[k] += g.get(0, i, j) * d.get(c, i, j);
                }
            }
        }
    }
    rhs.scale(params.gamma);
    let mut adv = CellField::zeros(grid, d.ncomp());
    advect_cells_into(grid, &state.u, d, scheme.advection, &mut adv);
    rhs.axpy(-1.0, &adv);
    rhs.scale(dt);
    rhs
}

/// One director step; solved in increment form
/// `(I - dt gamma lap_N) delta = rhs`, all components in one CG system so
/// the update is exactly equivariant under rotations of the target space.
pub fn director_step(
    grid: &Grid,
    state: &State,
    params: &PhysicalParams,
    dt: f64,
    scheme: &Scheme,
    policy: &ConstraintPolicy,
) -> Result<(State, CgReport)> {
    check_dt(dt)?;
    params.validate()?;
    let opts = scheme.cg_options(grid.n_cells())?;
    let rhs = director_increment_rhs(grid, state, params, dt, scheme);
    let mut delta = CellField::zeros(grid, state.d.ncomp());
    let c = dt * params.gamma;
    let report = conjugate_gradient(
        |x: &mut CellField, out: &mut CellField| {
            x.fill_ghosts(BoundaryCondition::Neumann);
            cell_laplacian_into(grid, x, out);
            out.scale(-c);
            out.axpy(1.0, x);
        },
        &rhs,
        &mut delta,
        opts,
        "director helmholtz cg",
    )?;
    let mut d = state.d.clone();
    d.axpy(1.0, &delta);
    if policy.mode == ConstraintMode::Renormalize {
        renormalize(&mut d)?;
    }
    d.fill_ghosts(BoundaryCondition::Neumann);
    Ok((State { u: state.u.clone(), pi: state.pi.clone(), d, t: state.t + dt }, report))
}

/// Pointwise projection onto the sphere; fails below `|d| = 0.5`.
pub fn renormalize(d: &mut DirectorField) -> Result<()> {
    let m = d.ncomp();
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            let n = (0..m).map(|c| d.get(c, i, j).powi(2)).sum::<f64>().sqrt();
            if !(n >= 0.5) {
                return Err(Error::DirectorDegenerated { min_norm: n, i, j });
            }
            for c in 0..m {
                d.set(c, i, j, d.get(c, i, j) / n);
            }
        }
    }
    Ok(())
}

/// `max | |d|^2 - 1 |` over cells.
pub fn constraint_drift(d: &DirectorField) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            let sq: f64 = (0..d.ncomp()).map(|c| d.get(c, i, j).powi(2)).sum();
            worst = worst.max((sq - 1.0).abs());
        }
    }
    worst
}

/// `lap d + |grad d|^2 d` on the interior (Neumann ghosts required).
pub fn harmonic_residual_field(grid: &Grid, d: &DirectorField) -> CellField {
    let mut r = CellField::zeros(grid, d.ncomp());
    cell_laplacian_into(grid, d, &mut r);
    let mut g = ScalarField::zeros(grid, 1);
    gradient_density_into(grid, d, &mut g);
    for c in 0..d.ncomp() {
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let v = r.get(c, i, j) + g.get(0, i, j) * d.get(c, i, j);
                r.set(c, i, j, v);
            }
        }
    }
    r
}

/// Max-norm of the harmonic-map residual plus the constraint drift.
pub fn nlevp_residual(grid: &Grid, d: &DirectorField) -> f64 {
    harmonic_residual_field(grid, d).max_abs() + constraint_drift(d)
}

pub fn max_gradient_norm(grid: &Grid, d: &DirectorField) -> f64 {
    max_face_gradient(grid, d)
}
