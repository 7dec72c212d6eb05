//! Momentum step: implicit viscosity, explicit advection and elastic
//! forcing, then a pressure projection onto discretely solenoidal fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryCondition, FaceField, Grid, ScalarField, State, VectorFaceField};
use crate::operators::{self, advect_faces_into, face_laplacian_into};
use crate::poisson::{PoissonSolveReport, PoissonSolver};
use crate::solver::{CgOptions, CgReport, PoissonMethod, Scheme, conjugate_gradient};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub nu: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { nu: 1.0, lambda: 1.0, gamma: 1.0 }
    }
}

impl PhysicalParams {
    pub fn new(nu: f64, lambda: f64, gamma: f64) -> Result<Self> {
        let p = Self { nu, lambda, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be positive and finite")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt >= 1e-12 {
        Ok(())
    } else {
        Err(Error::InvalidTimeStep { dt })
    }
}

/// `v - grad(phi)` with `L phi = div v`, mean-zero `phi`.
pub fn helmholtz_project(grid: &Grid, v: &VectorFaceField, tol: f64) -> Result<(VectorFaceField, ScalarField, PoissonSolveReport)> {
    let mut poisson = PoissonSolver::new(grid, PoissonMethod::Spectral);
    project_with(grid, v, tol, &mut poisson, CgOptions::new(1e-10, 10 * grid.n_cells())?)
}

pub fn project_with(
    grid: &Grid,
    v: &VectorFaceField,
    tol: f64,
    poisson: &mut PoissonSolver,
    opts: CgOptions,
) -> Result<(VectorFaceField, ScalarField, PoissonSolveReport)> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    let div = operators::divergence(grid, v);
    let mut phi = ScalarField::zeros(grid, 1);
    let mut report = poisson.solve(grid, &div, &mut phi, tol, opts)?;
    let mut u = v.clone();
    u.axpy(-1.0, &operators::gradient(grid, &phi));
    u.fill_ghosts(BoundaryCondition::NoSlip);
    // what callers care about is the divergence actually left behind
    report.residual = operators::divergence(grid, &u).max_abs();
    if report.residual > tol {
        return Err(Error::ProjectionFailed { iterations: report.iterations, residual: report.residual, tolerance: tol });
    }
    Ok((u, phi, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumReport {
    pub viscous: CgReport,
    pub projection: PoissonSolveReport,
    /// `max|u| dt / h` of the incoming velocity.
    pub cfl: f64,
}

impl MomentumReport {
    pub fn cfl_warning(&self) -> bool {
        self.cfl > 1.0
    }
}

/// Explicit part of the momentum update, `dt (nu lap u - (u.grad)u - lambda div sigma(d))`.
fn momentum_increment_rhs(grid: &Grid, state: &State, params: &PhysicalParams, dt: f64, scheme: &Scheme) -> FaceField {
    let mut rhs = FaceField::zeros(grid);
    face_laplacian_into(grid, &state.u, &mut rhs);
    rhs.scale(params.nu);
    let mut adv = FaceField::zeros(grid);
    advect_faces_into(grid, &state.u, scheme.advection, &mut adv);
    rhs.axpy(-1.0, &adv);
    if scheme.elastic_coupling {
        rhs.axpy(-params.lambda, &operators::elastic_stress_div(grid, &state.d));
    }
    rhs.scale(dt);
    rhs
}

/// One momentum step using the director carried by `state`.
///
/// Solved in increment form, `(I - dt nu lap) delta = rhs`, so the CG
/// tolerance is relative to the size of the update rather than of `u`.
pub fn momentum_step(
    grid: &Grid,
    state: &State,
    params: &PhysicalParams,
    dt: f64,
    tol: f64,
    scheme: &Scheme,
    poisson: &mut PoissonSolver,
) -> Result<(State, MomentumReport)> {
    check_dt(dt)?;
    params.validate()?;
    let opts = scheme.cg_options(grid.n_cells())?;
    let cfl = state.u.max_abs() * dt / grid.h_min();
    let rhs = momentum_increment_rhs(grid, state, params, dt, scheme);
    let mut delta = FaceField::zeros(grid);
    let c = dt * params.nu;
    let viscous = conjugate_gradient(
        |x: &mut FaceField, out: &mut FaceField| {
            x.fill_ghosts(BoundaryCondition::NoSlip);
            face_laplacian_into(grid, x, out);
            out.scale(-c);
            out.axpy(1.0, x);
            zero_walls(grid, out);
        },
        &rhs,
        &mut delta,
        opts,
        "viscous helmholtz cg",
    )?;
    let mut ustar = state.u.clone();
    ustar.axpy(1.0, &delta);
    ustar.fill_ghosts(BoundaryCondition::NoSlip);
    let (u, phi, projection) = project_with(grid, &ustar, tol, poisson, opts)?;
    let mut pi = phi;
    pi.scale(1.0 / dt);
    let next = State { u, pi, d: state.d.clone(), t: state.t + dt };
    Ok((next, MomentumReport { viscous, projection, cfl }))
}

fn zero_walls(grid: &Grid, f: &mut FaceField) {
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        f.set_x(0, j, 0.0);
        f.set_x(nx, j, 0.0);
    }
    for i in 0..nx {
        f.set_y(i, 0, 0.0);
        f.set_y(i, ny, 0.0);
    }
}

/// Discrete curl of a node streamfunction; `psi` lists the interior nodes
/// `(i, j)`, `1 <= i < nx`, `1 <= j < ny`, row-major. Boundary nodes are 0,
/// so the result has zero normal wall flux and zero divergence.
pub fn curl_of_streamfunction(grid: &Grid, psi: &[f64]) -> FaceField {
    let (nx, ny) = (grid.nx(), grid.ny());
    assert_eq!(psi.len(), (nx - 1) * (ny - 1));
    let node = |i: usize, j: usize| -> f64 {
        if i == 0 || j == 0 || i == nx || j == ny { 0.0 } else { psi[(j - 1) * (nx - 1) + i - 1] }
    };
    let mut u = FaceField::zeros(grid);
    for j in 0..ny {
        for i in 0..=nx {
            u.set_x(i, j, (node(i, j + 1) - node(i, j)) / grid.hy());
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            u.set_y(i, j, -(node(i + 1, j) - node(i, j)) / grid.hx());
        }
    }
    u.fill_ghosts(BoundaryCondition::NoSlip);
    u
}
