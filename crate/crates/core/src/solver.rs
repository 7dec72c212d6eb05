//! Matrix-free conjugate gradients and the numerical scheme options shared
//! by the flow and director steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{CellField, FaceField};
use crate::operators::AdvectionScheme;

/// Minimal vector-space interface for Krylov iterations. Inner products run
/// over unknowns only (interior cells, interior faces), never ghosts.
pub trait KrylovVector: Clone {
    fn dot(&self, other: &Self) -> f64;
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
    fn set_zero(&mut self);
}

impl KrylovVector for CellField {
    fn dot(&self, other: &Self) -> f64 {
        self.interior_dot(other)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        CellField::axpy(self, a, x)
    }
    fn scale(&mut self, a: f64) {
        CellField::scale(self, a)
    }
    fn set_zero(&mut self) {
        self.raw_mut().fill(0.0)
    }
}

impl KrylovVector for FaceField {
    fn dot(&self, other: &Self) -> f64 {
        self.interior_dot(other)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        FaceField::axpy(self, a, x)
    }
    fn scale(&mut self, a: f64) {
        FaceField::scale(self, a)
    }
    fn set_zero(&mut self) {
        self.raw_x_mut().fill(0.0);
        self.raw_y_mut().fill(0.0);
    }
}

impl KrylovVector for Vec<f64> {
    fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.iter_mut().zip(x).for_each(|(s, v)| *s += a * v);
    }
    fn scale(&mut self, a: f64) {
        self.iter_mut().for_each(|s| *s *= a);
    }
    fn set_zero(&mut self) {
        self.fill(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop once `|r| <= rel_tol * |b|`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl CgOptions {
    pub fn new(rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(rel_tol.is_finite() && rel_tol > 0.0) {
            return Err(Error::InvalidTolerance(rel_tol));
        }
        Ok(Self { rel_tol, max_iter })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final residual relative to `|b|`.
    pub relative_residual: f64,
}

/// Unpreconditioned CG for a symmetric positive (semi-)definite operator.
///
/// `apply(x, out)` writes `A x` into `out`; it may refresh ghost values of
/// `x` in place before reading them. `x` holds the initial guess on entry.
pub fn conjugate_gradient<V: KrylovVector>(
    mut apply: impl FnMut(&mut V, &mut V),
    b: &V,
    x: &mut V,
    opts: CgOptions,
    solver: &'static str,
) -> Result<CgReport> {
    let bnorm = b.dot(b).sqrt();
    if bnorm == 0.0 {
        x.set_zero();
        return Ok(CgReport { iterations: 0, relative_residual: 0.0 });
    }
    let target = opts.rel_tol * bnorm;
    let mut ap = b.clone();
    apply(x, &mut ap);
    let mut r = b.clone();
    r.axpy(-1.0, &ap);
    let mut rr = r.dot(&r);
    let mut p = r.clone();
    let mut it = 0;
    while rr.sqrt() > target {
        if it >= opts.max_iter {
            return Err(Error::SolverNotConverged { solver, iterations: it, residual: rr.sqrt() / bnorm });
        }
        apply(&mut p, &mut ap);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            // Breakdown: the remaining residual lies in the null space.
            break;
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = r.dot(&r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.scale(beta);
        p.axpy(1.0, &r);
        it += 1;
    }
    if rr.sqrt() > target {
        return Err(Error::SolverNotConverged { solver, iterations: it, residual: rr.sqrt() / bnorm });
    }
    Ok(CgReport { iterations: it, relative_residual: rr.sqrt() / bnorm })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonMethod {
    /// Direct solve by cosine transform (the grid Laplacian is diagonal in
    /// the DCT-II basis).
    #[default]
    Spectral,
    ConjugateGradient,
}

/// Discretisation switches. The defaults are the full model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scheme {
    pub advection: AdvectionScheme,
    /// Elastic force in the momentum equation.
    pub elastic_coupling: bool,
    /// The `|grad d|^2 d` term of the director equation.
    pub harmonic_term: bool,
    pub poisson: PoissonMethod,
    /// Relative tolerance of the implicit Helmholtz solves.
    pub cg_tol: f64,
    /// Iteration cap per solve; 0 means `10 * nx * ny`.
    pub max_iter: usize,
}

impl Default for Scheme {
    fn default() -> Self {
        Self {
            advection: AdvectionScheme::Upwind,
            elastic_coupling: true,
            harmonic_term: true,
            poisson: PoissonMethod::Spectral,
            cg_tol: 1e-10,
            max_iter: 0,
        }
    }
}

impl Scheme {
    pub fn heat_flow() -> Self {
        Self { advection: AdvectionScheme::Off, elastic_coupling: false, harmonic_term: false, ..Self::default() }
    }

    pub(crate) fn cg_options(&self, n_unknowns: usize) -> Result<CgOptions> {
        let cap = if self.max_iter == 0 { 10 * n_unknowns.max(1) } else { self.max_iter };
        CgOptions::new(self.cg_tol, cap)
    }
}
