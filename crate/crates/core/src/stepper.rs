//! The coupled time step: director first, then momentum driven by the new
//! director.

use crate::director::{ConstraintPolicy, director_step};
use crate::error::Result;
use crate::flow::{MomentumReport, PhysicalParams, momentum_step};
use crate::mesh::{Grid, State};
use crate::poisson::PoissonSolver;
use crate::solver::{CgReport, Scheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub director: CgReport,
    pub momentum: MomentumReport,
}

/// Owns everything that can be reused between steps on one grid.
#[derive(Debug)]
pub struct Stepper {
    grid: Grid,
    params: PhysicalParams,
    scheme: Scheme,
    policy: ConstraintPolicy,
    /// Max-norm bound on the divergence left by the projection.
    tol: f64,
    poisson: PoissonSolver,
}

impl Stepper {
    pub fn new(grid: &Grid, params: PhysicalParams, scheme: Scheme, policy: ConstraintPolicy, tol: f64) -> Result<Self> {
        params.validate()?;
        policy.validate()?;
        if !(tol.is_finite() && tol > 0.0) {
            return Err(crate::Error::InvalidTolerance(tol));
        }
        Ok(Self { grid: *grid, params, scheme, policy, tol, poisson: PoissonSolver::new(grid, scheme.poisson) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn policy(&self) -> &ConstraintPolicy {
        &self.policy
    }

    pub fn step(&mut self, state: &State, dt: f64) -> Result<(State, StepReport)> {
        let (mut mid, director) = director_step(&self.grid, state, &self.params, dt, &self.scheme, &self.policy)?;
        mid.t = state.t;
        let (next, momentum) = self.momentum(&mid, dt)?;
        Ok((next, StepReport { director, momentum }))
    }

    pub fn director(&self, state: &State, dt: f64) -> Result<(State, CgReport)> {
        director_step(&self.grid, state, &self.params, dt, &self.scheme, &self.policy)
    }

    pub fn momentum(&mut self, state: &State, dt: f64) -> Result<(State, MomentumReport)> {
        momentum_step(&self.grid, state, &self.params, dt, self.tol, &self.scheme, &mut self.poisson)
    }
}
