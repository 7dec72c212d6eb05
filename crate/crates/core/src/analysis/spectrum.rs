//! The linearisation at an equilibrium, `diag(Stokes, Neumann Laplacian)`,
//! and its low end of the spectrum.
//!
//! Vectors are flat lists of unknowns: interior faces for the Stokes block
//! (the operator acts on the discretely solenoidal subspace), interior cells
//! of all `m` components for the director block, their concatenation for
//! the full operator. All cells and faces carry the same quadrature weight,
//! so the plain dot product is the grid inner product up to a constant.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{PhysicalParams, curl_of_streamfunction};
use crate::mesh::{BoundaryCondition, CellField, FaceField, Grid, GridSpec, ScalarField};
use crate::operators::{cell_laplacian, divergence, face_laplacian, gradient};
use crate::poisson::NeumannPoisson;
use crate::solver::{CgOptions, conjugate_gradient};

/// Largest matrix dimension assembled densely.
pub const DENSE_BUDGET: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Stokes,
    NeumannLaplacian,
    FullDiag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// Dense when within budget, otherwise inverse iteration.
    #[default]
    Auto,
    Dense,
    InverseIteration,
}

pub struct LinearOperator {
    grid: Grid,
    params: PhysicalParams,
    block: Block,
    poisson: RefCell<NeumannPoisson>,
}

impl std::fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearOperator").field("block", &self.block).field("dim", &self.dim()).finish()
    }
}

pub fn assemble_linearization(grid: &Grid, params: &PhysicalParams, block: Block) -> Result<LinearOperator> {
    params.validate()?;
    Ok(LinearOperator { grid: *grid, params: *params, block, poisson: RefCell::new(NeumannPoisson::new(grid)) })
}

impl LinearOperator {
    pub fn block(&self) -> Block {
        self.block
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stokes_dim(&self) -> usize {
        (self.grid.nx() - 1) * (self.grid.ny() - 1)
    }

    pub fn neumann_dim(&self) -> usize {
        self.grid.m() * self.grid.n_cells()
    }

    fn n_faces(&self) -> usize {
        let (a, b) = self.grid.n_interior_faces();
        a + b
    }

    /// Dimension of the operator's domain.
    pub fn dim(&self) -> usize {
        match self.block {
            Block::Stokes => self.stokes_dim(),
            Block::NeumannLaplacian => self.neumann_dim(),
            Block::FullDiag => self.stokes_dim() + self.neumann_dim(),
        }
    }

    /// Length of the flat vectors `apply` acts on.
    pub fn vector_len(&self) -> usize {
        match self.block {
            Block::Stokes => self.n_faces(),
            Block::NeumannLaplacian => self.neumann_dim(),
            Block::FullDiag => self.n_faces() + self.neumann_dim(),
        }
    }

    fn project_faces(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut u = FaceField::from_interior(g.nx(), g.ny(), x).expect("face vector length");
        u.fill_ghosts(BoundaryCondition::NoSlip);
        let div = divergence(g, &u);
        let mut phi = ScalarField::zeros(g, 1);
        self.poisson.borrow_mut().solve(&div, &mut phi);
        u.axpy(-1.0, &gradient(g, &phi));
        u.interior()
    }

    fn apply_stokes(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut u = FaceField::from_interior(g.nx(), g.ny(), x).expect("face vector length");
        u.fill_ghosts(BoundaryCondition::NoSlip);
        let mut lap = face_laplacian(g, &u);
        lap.scale(-self.params.nu);
        self.project_faces(&lap.interior())
    }

    fn apply_neumann(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut d = CellField::from_interior(g.nx(), g.ny(), g.m(), x).expect("cell vector length");
        d.fill_ghosts(BoundaryCondition::Neumann);
        let mut lap = cell_laplacian(g, &d);
        lap.scale(-self.params.gamma);
        lap.interior()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.vector_len(), "vector length does not match the operator");
        match self.block {
            Block::Stokes => self.apply_stokes(x),
            Block::NeumannLaplacian => self.apply_neumann(x),
            Block::FullDiag => {
                let nf = self.n_faces();
                let mut out = self.apply_stokes(&x[..nf]);
                out.extend(self.apply_neumann(&x[nf..]));
                out
            }
        }
    }

    /// Orthogonal projection onto the domain (identity on director parts).
    pub fn restrict(&self, x: &mut [f64]) {
        match self.block {
            Block::NeumannLaplacian => {}
            Block::Stokes => {
                let p = self.project_faces(x);
                x.copy_from_slice(&p);
            }
            Block::FullDiag => {
                let nf = self.n_faces();
                let p = self.project_faces(&x[..nf]);
                x[..nf].copy_from_slice(&p);
            }
        }
    }

    pub fn random_vector(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.vector_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        self.restrict(&mut x);
        x
    }

    fn dense_neumann(&self) -> Result<DMatrix<f64>> {
        let n = self.neumann_dim();
        if n > DENSE_BUDGET {
            return Err(Error::DenseTooLarge { dim: n, budget: DENSE_BUDGET });
        }
        let mut a = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply_neumann(&e);
            e[j] = 0.0;
            a.set_column(j, &DVector::from_vec(col));
        }
        Ok(symmetrize(a))
    }

    /// Stokes block in the streamfunction basis `C`: the generalised problem
    /// `C^T A C y = mu C^T C y`, reduced with the Cholesky factor of the Gram
    /// matrix. Both sides are exact on the solenoidal subspace.
    fn dense_stokes(&self) -> Result<DMatrix<f64>> {
        let n = self.stokes_dim();
        if n > DENSE_BUDGET {
            return Err(Error::DenseTooLarge { dim: n, budget: DENSE_BUDGET });
        }
        let g = &self.grid;
        let nf = self.n_faces();
        let mut c = DMatrix::zeros(nf, n);
        let mut ac = DMatrix::zeros(nf, n);
        let mut psi = vec![0.0; n];
        for j in 0..n {
            psi[j] = 1.0;
            let u = curl_of_streamfunction(g, &psi);
            psi[j] = 0.0;
            let mut lap = face_laplacian(g, &u);
            lap.scale(-self.params.nu);
            c.set_column(j, &DVector::from_vec(u.interior()));
            ac.set_column(j, &DVector::from_vec(lap.interior()));
        }
        let k = symmetrize(c.transpose() * ac);
        let gram = symmetrize(c.transpose() * &c);
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidSpectrumRequest("streamfunction Gram matrix not positive definite".into()))?;
        let l = chol.l();
        let lk = l.solve_lower_triangular(&k).expect("triangular solve");
        let m = l.solve_lower_triangular(&lk.transpose()).expect("triangular solve");
        Ok(symmetrize(m))
    }

    /// All eigenvalues, ascending, from dense assembly.
    pub fn dense_eigenvalues(&self) -> Result<Vec<f64>> {
        let mut ev = match self.block {
            Block::Stokes => eigenvalues(self.dense_stokes()?),
            Block::NeumannLaplacian => eigenvalues(self.dense_neumann()?),
            Block::FullDiag => {
                let mut a = eigenvalues(self.dense_stokes()?);
                a.extend(eigenvalues(self.dense_neumann()?));
                a
            }
        };
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    fn fits_dense(&self) -> bool {
        let (s, n) = (self.stokes_dim() <= DENSE_BUDGET, self.neumann_dim() <= DENSE_BUDGET);
        match self.block {
            Block::Stokes => s,
            Block::NeumannLaplacian => n,
            Block::FullDiag => s && n,
        }
    }
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}

fn eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    a.symmetric_eigenvalues().iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub block: Block,
    pub method: SpectrumMethod,
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub gap: f64,
    pub kernel_tol: f64,
    pub residual_tol: f64,
    /// Largest relative eigen-residual (0 for dense solves).
    pub max_residual: f64,
}

/// Smallest `k` eigenvalues of `op`.
pub fn spectrum(op: &LinearOperator, k: usize, tol: f64, method: SpectrumMethod) -> Result<SpectralReport> {
    let m = op.grid.m();
    if op.block != Block::Stokes && k < m + 2 {
        return Err(Error::InvalidSpectrumRequest(format!("k = {k} must be at least m + 2 = {}", m + 2)));
    }
    if k == 0 || k > op.dim() {
        return Err(Error::InvalidSpectrumRequest(format!("k = {k} outside 1..={}", op.dim())));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    let resolved = match method {
        SpectrumMethod::Auto if op.fits_dense() => SpectrumMethod::Dense,
        SpectrumMethod::Auto => SpectrumMethod::InverseIteration,
        other => other,
    };
    let (all_max, values, max_residual) = match resolved {
        SpectrumMethod::Dense => {
            let ev = op.dense_eigenvalues()?;
            let top = ev.last().copied().unwrap_or(0.0);
            (top, ev[..k].to_vec(), 0.0)
        }
        _ => {
            let (ev, res) = subspace_inverse_iteration(op, k, tol)?;
            (ev.last().copied().unwrap_or(0.0), ev, res)
        }
    };
    let kernel_tol = 1e-8 * all_max.abs();
    let kernel_dim = values.iter().filter(|v| v.abs() <= kernel_tol).count();
    let gap = values
        .iter()
        .copied()
        .find(|v| *v > kernel_tol)
        .ok_or_else(|| Error::InvalidSpectrumRequest(format!("all {k} computed eigenvalues lie in the kernel")))?;
    Ok(SpectralReport {
        block: op.block,
        method: resolved,
        eigenvalues: values,
        kernel_dim,
        gap,
        kernel_tol,
        residual_tol: tol,
        max_residual,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormalize(vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let c = dot(&vs[i], &vs[j]);
                let (head, tail) = vs.split_at_mut(i);
                tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = dot(&vs[i], &vs[i]).sqrt();
        vs[i].iter_mut().for_each(|a| *a /= n);
    }
}

/// Block inverse iteration with a unit shift and Rayleigh-Ritz extraction.
/// Inner solves are CG on the shifted operator, kept inside the domain.
fn subspace_inverse_iteration(op: &LinearOperator, k: usize, tol: f64) -> Result<(Vec<f64>, f64)> {
    let shift = 1.0;
    let p = (k + 4).min(op.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| op.random_vector(&mut rng)).collect();
    orthonormalize(&mut x);
    let cg = CgOptions::new(1e-12, 10 * op.vector_len())?;
    let mut worst = f64::INFINITY;
    for _outer in 0..500 {
        let mut y = Vec::with_capacity(p);
        for b in &x {
            let mut sol = vec![0.0; b.len()];
            conjugate_gradient(
                |v: &mut Vec<f64>, out: &mut Vec<f64>| {
                    let a = op.apply(v);
                    for ((o, a), v) in out.iter_mut().zip(a).zip(v.iter()) {
                        *o = a + shift * v;
                    }
                },
                b,
                &mut sol,
                cg,
                "shifted inverse iteration cg",
            )?;
            op.restrict(&mut sol);
            y.push(sol);
        }
        orthonormalize(&mut y);
        let ay: Vec<Vec<f64>> = y.iter().map(|v| op.apply(v)).collect();
        let h = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i])));
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let combine = |src: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; src[0].len()];
            for (r, v) in src.iter().enumerate() {
                let c = eig.eigenvectors[(r, col)];
                out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
            }
            out
        };
        x = order.iter().map(|&c| combine(&y, c)).collect();
        let ax: Vec<Vec<f64>> = order.iter().map(|&c| combine(&ay, c)).collect();
        worst = 0.0;
        for i in 0..k {
            let r: f64 = ax[i].iter().zip(&x[i]).map(|(a, v)| (a - theta[i] * v).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(r / theta[i].abs().max(1.0));
        }
        if worst <= tol {
            return Ok((theta[..k].to_vec(), worst));
        }
    }
    Err(Error::EigenNotConverged { index: k - 1, residual: worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesOracle {
    pub coarse: f64,
    pub fine: f64,
    /// Second-order Richardson extrapolation `(4 fine - coarse) / 3`.
    pub extrapolated: f64,
}

/// Smallest Stokes eigenvalue from dense solves on 16x16 and 32x32 grids.
/// Memoised per process: it depends only on the box and the viscosity.
pub fn stokes_oracle(lx: f64, ly: f64, params: &PhysicalParams) -> Result<StokesOracle> {
    static CACHE: OnceLock<Mutex<HashMap<[u64; 3], StokesOracle>>> = OnceLock::new();
    let key = [lx.to_bits(), ly.to_bits(), params.nu.to_bits()];
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(*hit);
    }
    let lowest = |n: usize| -> Result<f64> {
        let g = Grid::new(GridSpec::new(n, n, lx, ly, 2))?;
        let op = assemble_linearization(&g, params, Block::Stokes)?;
        Ok(op.dense_eigenvalues()?[0])
    };
    let coarse = lowest(16)?;
    let fine = lowest(32)?;
    let oracle = StokesOracle { coarse, fine, extrapolated: (4.0 * fine - coarse) / 3.0 };
    cache.lock().unwrap().insert(key, oracle);
    Ok(oracle)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn op(n: usize, m: usize, block: Block) -> LinearOperator {
        let g = Grid::new(GridSpec::unit_square(n, m)).unwrap();
        assemble_linearization(&g, &PhysicalParams::default(), block).unwrap()
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let o = op(8, 2, Block::FullDiag);
        let mut x = vec![0.0; o.vector_len()];
        let nf = o.n_faces();
        x[nf..].iter_mut().for_each(|v| *v = 0.7);
        assert!(o.apply(&x).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cosine_mode_eigenvalue() {
        let n = 32;
        let o = op(n, 2, Block::NeumannLaplacian);
        let g = *o.grid();
        let d = CellField::from_fn(&g, 2, |x, _, v| v[0] = (PI * x).cos());
        let x = d.interior();
        let ax = o.apply(&x);
        let lam = PI * PI;
        let err = ax.iter().zip(&x).map(|(a, v)| (a - lam * v).abs()).fold(0.0, f64::max);
        assert!(err < 0.01 * lam, "{err}");
    }

    #[test]
    fn operators_are_symmetric_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for block in [Block::Stokes, Block::NeumannLaplacian, Block::FullDiag] {
            let o = op(8, 3, block);
            for _ in 0..100 {
                let x = o.random_vector(&mut rng);
                let y = o.random_vector(&mut rng);
                let (ax, ay) = (o.apply(&x), o.apply(&y));
                let (a, b) = (dot(&ax, &y), dot(&x, &ay));
                assert!((a - b).abs() <= 1e-11 * a.abs().max(b.abs()), "{block:?}: {a} {b}");
            }
            let x = o.random_vector(&mut rng);
            let y = o.random_vector(&mut rng);
            let (al, be) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let comb: Vec<f64> = x.iter().zip(&y).map(|(a, b)| al * a + be * b).collect();
            let lhs = o.apply(&comb);
            let (ax, ay) = (o.apply(&x), o.apply(&y));
            for i in 0..lhs.len() {
                assert!((lhs[i] - al * ax[i] - be * ay[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn neumann_kernel_and_gap_small_grids() {
        for n in [8, 16] {
            let o = op(n, 2, Block::NeumannLaplacian);
            let r = spectrum(&o, 6, 1e-9, SpectrumMethod::Dense).unwrap();
            assert_eq!(r.kernel_dim, 2);
            let exact = 4.0 * (n as f64).powi(2) * (PI / (2.0 * n as f64)).sin().powi(2);
            assert!((r.gap - exact).abs() < 1e-9 * exact);
        }
    }

    #[test]
    fn inverse_iteration_matches_dense() {
        for block in [Block::NeumannLaplacian, Block::Stokes, Block::FullDiag] {
            let o = op(10, 2, block);
            let dense = spectrum(&o, 6, 1e-9, SpectrumMethod::Dense).unwrap();
            let it = spectrum(&o, 6, 1e-9, SpectrumMethod::InverseIteration).unwrap();
            assert_eq!(dense.kernel_dim, it.kernel_dim);
            for (a, b) in dense.eigenvalues.iter().zip(&it.eigenvalues) {
                assert!((a - b).abs() < 1e-7 * a.abs().max(1.0), "{block:?} {a} {b}");
            }
        }
    }

    #[test]
    fn stokes_block_is_positive_and_full_kernel_is_m() {
        let o = op(12, 3, Block::Stokes);
        let r = spectrum(&o, 5, 1e-9, SpectrumMethod::Dense).unwrap();
        assert_eq!(r.kernel_dim, 0);
        assert!(r.eigenvalues.iter().all(|v| *v > 0.0));
        let o = op(12, 3, Block::FullDiag);
        let r = spectrum(&o, 6, 1e-9, SpectrumMethod::Dense).unwrap();
        assert_eq!(r.kernel_dim, 3);
    }

    #[test]
    fn bad_requests() {
        let o = op(8, 2, Block::NeumannLaplacian);
        assert!(matches!(spectrum(&o, 3, 1e-9, SpectrumMethod::Dense), Err(Error::InvalidSpectrumRequest(_))));
        let big = op(64, 2, Block::NeumannLaplacian);
        assert!(matches!(big.dense_eigenvalues(), Err(Error::DenseTooLarge { .. })));
    }
}
