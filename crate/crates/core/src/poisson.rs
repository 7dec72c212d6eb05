//! Cell-centred Neumann Poisson problem `L phi = f`, where `L` is the
//! five-point Laplacian with mirrored ghosts (equivalently `div . grad`).
//!
//! Two routes: a direct cosine-transform solve, and matrix-free CG. They
//! solve the same discrete system and serve as oracles for each other.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::Result;
use crate::mesh::{BoundaryCondition, Grid, ScalarField};
use crate::operators::cell_laplacian_into;
use crate::solver::{CgOptions, PoissonMethod, conjugate_gradient};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSolveReport {
    pub iterations: usize,
    /// Max-norm of `L phi - (f - mean f)`.
    pub residual: f64,
    pub tolerance: f64,
}

pub struct NeumannPoisson {
    nx: usize,
    ny: usize,
    dct_x: Arc<dyn TransformType2And3<f64>>,
    dct_y: Arc<dyn TransformType2And3<f64>>,
    /// Eigenvalues of `L` in the DCT-II basis, zero mode set to 0.
    eig: Vec<f64>,
    work: Vec<f64>,
    column: Vec<f64>,
}

impl std::fmt::Debug for NeumannPoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannPoisson").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

impl NeumannPoisson {
    pub fn new(grid: &Grid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut planner = DctPlanner::new();
        let dct_x = planner.plan_dct2(nx);
        let dct_y = planner.plan_dct2(ny);
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut eig = vec![0.0; nx * ny];
        for l in 0..ny {
            let sy = (std::f64::consts::PI * l as f64 / (2.0 * ny as f64)).sin();
            for k in 0..nx {
                let sx = (std::f64::consts::PI * k as f64 / (2.0 * nx as f64)).sin();
                eig[l * nx + k] = -4.0 * sx * sx / (hx * hx) - 4.0 * sy * sy / (hy * hy);
            }
        }
        eig[0] = 0.0;
        Self { nx, ny, dct_x, dct_y, eig, work: vec![0.0; nx * ny], column: vec![0.0; ny] }
    }

    /// Mean-zero solution of `L phi = f - mean(f)`, written into the interior
    /// of `phi` with Neumann ghosts filled.
    pub fn solve(&mut self, f: &ScalarField, phi: &mut ScalarField) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                self.work[j * nx + i] = f.get(0, i, j);
            }
        }
        self.transform(true);
        let scale = 4.0 / (nx * ny) as f64;
        for (w, &e) in self.work.iter_mut().zip(&self.eig) {
            *w = if e == 0.0 { 0.0 } else { *w * scale / e };
        }
        self.transform(false);
        for j in 0..ny {
            for i in 0..nx {
                phi.set(0, i, j, self.work[j * nx + i]);
            }
        }
        let mean = phi.mean(0);
        phi.map_inplace(|v| v - mean);
        phi.fill_ghosts(BoundaryCondition::Neumann);
    }

    fn transform(&mut self, forward: bool) {
        let (nx, ny) = (self.nx, self.ny);
        for row in self.work.chunks_exact_mut(nx) {
            if forward {
                self.dct_x.process_dct2(row);
            } else {
                self.dct_x.process_dct3(row);
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                self.column[j] = self.work[j * nx + i];
            }
            if forward {
                self.dct_y.process_dct2(&mut self.column);
            } else {
                self.dct_y.process_dct3(&mut self.column);
            }
            for j in 0..ny {
                self.work[j * nx + i] = self.column[j];
            }
        }
    }
}

/// Solve by CG on `-L` (positive semidefinite, kernel = constants). The
/// relative tolerance is tightened so the max-norm residual meets `tol`.
pub fn solve_neumann_cg(
    grid: &Grid,
    f: &ScalarField,
    phi: &mut ScalarField,
    tol: f64,
    opts: CgOptions,
) -> Result<usize> {
    let mean = f.mean(0);
    let mut b = f.clone();
    b.map_inplace(|v| mean - v);
    let bnorm = b.interior_dot(&b).sqrt();
    let rel = if bnorm > 0.0 { opts.rel_tol.min(tol / bnorm).max(1e-15) } else { opts.rel_tol };
    let opts = CgOptions { rel_tol: rel, ..opts };
    phi.raw_mut().fill(0.0);
    let rep = conjugate_gradient(
        |x: &mut ScalarField, out: &mut ScalarField| {
            x.fill_ghosts(BoundaryCondition::Neumann);
            cell_laplacian_into(grid, x, out);
            out.scale(-1.0);
        },
        &b,
        phi,
        opts,
        "neumann poisson cg",
    )?;
    let m = phi.mean(0);
    phi.map_inplace(|v| v - m);
    phi.fill_ghosts(BoundaryCondition::Neumann);
    Ok(rep.iterations)
}

/// Max-norm of `L phi - (f - mean f)`; `phi` needs Neumann ghosts.
pub fn poisson_residual(grid: &Grid, f: &ScalarField, phi: &ScalarField) -> f64 {
    let mut lap = ScalarField::zeros(grid, 1);
    cell_laplacian_into(grid, phi, &mut lap);
    let mean = f.mean(0);
    let mut worst: f64 = 0.0;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            worst = worst.max((lap.get(0, i, j) - (f.get(0, i, j) - mean)).abs());
        }
    }
    worst
}

/// Reusable Poisson solver for one grid.
#[derive(Debug)]
pub struct PoissonSolver {
    method: PoissonMethod,
    spectral: Option<NeumannPoisson>,
}

impl PoissonSolver {
    pub fn new(grid: &Grid, method: PoissonMethod) -> Self {
        let spectral = match method {
            PoissonMethod::Spectral => Some(NeumannPoisson::new(grid)),
            PoissonMethod::ConjugateGradient => None,
        };
        Self { method, spectral }
    }

    pub fn method(&self) -> PoissonMethod {
        self.method
    }

    pub fn solve(
        &mut self,
        grid: &Grid,
        f: &ScalarField,
        phi: &mut ScalarField,
        tol: f64,
        opts: CgOptions,
    ) -> Result<PoissonSolveReport> {
        let iterations = match &mut self.spectral {
            Some(s) => {
                s.solve(f, phi);
                1
            }
            None => solve_neumann_cg(grid, f, phi, tol, opts)?,
        };
        let residual = poisson_residual(grid, f, phi);
        Ok(PoissonSolveReport { iterations, residual, tolerance: tol })
    }
}
