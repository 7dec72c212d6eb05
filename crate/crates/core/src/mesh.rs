//! Rectangular MAC-staggered mesh and the fields that live on it.
//!
//! Cells are indexed by `(i, j)` with `i < nx`, `j < ny`; the cell centre is
//! at `((i + 1/2) hx, (j + 1/2) hy)`. The x-velocity lives on vertical faces
//! `(i, j)` with `i <= nx` at `(i hx, (j + 1/2) hy)`, the y-velocity on
//! horizontal faces `(i, j)` with `j <= ny`. Faces with `i = 0, nx` (resp.
//! `j = 0, ny`) are walls where the normal velocity is pinned to zero.
//!
//! Every field carries a ghost ring of width one. Ghost values are a pure
//! function of the interior and the boundary condition, so filling them is
//! idempotent.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub m: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, m: usize) -> Self {
        Self { nx, ny, lx, ly, m }
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize, m: usize) -> Self {
        Self::new(n, n, 1.0, 1.0, m)
    }
}

/// Validated discrete domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    hx: f64,
    hy: f64,
}

/// Builds the grid, rejecting degenerate specs.
pub fn make_grid(spec: GridSpec) -> Result<Grid> {
    Grid::new(spec)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        if spec.nx < 4 || spec.ny < 4 {
            return Err(Error::GridTooCoarse {
                nx: spec.nx,
                ny: spec.ny,
            });
        }
        if !(spec.lx > 0.0 && spec.ly > 0.0 && spec.lx.is_finite() && spec.ly.is_finite()) {
            return Err(Error::NonPositiveLength {
                lx: spec.lx,
                ly: spec.ly,
            });
        }
        if spec.m != 2 && spec.m != 3 {
            return Err(Error::UnsupportedDirectorDimension(spec.m));
        }
        let hx = spec.lx / spec.nx as f64;
        let hy = spec.ly / spec.ny as f64;
        let ratio = hx / hy;
        if !(0.125..=8.0).contains(&ratio) {
            return Err(Error::Anisotropy { ratio });
        }
        Ok(Self { spec, hx, hy })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn nx(&self) -> usize {
        self.spec.nx
    }
    pub fn ny(&self) -> usize {
        self.spec.ny
    }
    pub fn m(&self) -> usize {
        self.spec.m
    }
    pub fn lx(&self) -> f64 {
        self.spec.lx
    }
    pub fn ly(&self) -> f64 {
        self.spec.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn h_min(&self) -> f64 {
        self.hx.min(self.hy)
    }
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }
    pub fn area(&self) -> f64 {
        self.spec.lx * self.spec.ly
    }
    pub fn n_cells(&self) -> usize {
        self.spec.nx * self.spec.ny
    }

    /// Number of interior (non-wall) x-faces and y-faces.
    pub fn n_interior_faces(&self) -> (usize, usize) {
        let (nx, ny) = (self.nx(), self.ny());
        ((nx - 1) * ny, nx * (ny - 1))
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx() && j < self.ny());
        j * self.nx() + i
    }

    #[inline]
    pub fn cell_coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx(), k / self.nx())
    }

    /// Flat index of x-face `(i, j)`, `i <= nx`, `j < ny`.
    #[inline]
    pub fn ux_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx() && j < self.ny());
        j * (self.nx() + 1) + i
    }

    #[inline]
    pub fn ux_coords(&self, k: usize) -> (usize, usize) {
        (k % (self.nx() + 1), k / (self.nx() + 1))
    }

    /// Flat index of y-face `(i, j)`, `i < nx`, `j <= ny`.
    #[inline]
    pub fn uy_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx() && j <= self.ny());
        j * self.nx() + i
    }

    #[inline]
    pub fn uy_coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx(), k / self.nx())
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn ux_position(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn uy_position(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, j as f64 * self.hy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Zero velocity on the wall: ghost = -mirror for tangential samples,
    /// wall faces set to 0.
    NoSlip,
    /// Zero normal derivative: ghost = mirror.
    Neumann,
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_slip" => Ok(Self::NoSlip),
            "neumann" => Ok(Self::Neumann),
            other => Err(Error::UnknownBoundaryCondition(other.to_string())),
        }
    }
}

impl BoundaryCondition {
    fn ghost_sign(self) -> f64 {
        match self {
            Self::NoSlip => -1.0,
            Self::Neumann => 1.0,
        }
    }
}

/// Cell-centred field with `ncomp` components and a ghost ring.
///
/// Storage is component-major; within a component rows of length `nx + 2`
/// run from `j = -1` to `j = ny`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    nx: usize,
    ny: usize,
    ncomp: usize,
    data: Vec<f64>,
}

/// Single-component cell field (pressure, potentials, divergences).
pub type ScalarField = CellField;
/// `m`-component cell field holding the director.
pub type DirectorField = CellField;

impl CellField {
    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self::zeros_sized(grid.nx(), grid.ny(), ncomp)
    }

    pub(crate) fn zeros_sized(nx: usize, ny: usize, ncomp: usize) -> Self {
        Self {
            nx,
            ny,
            ncomp,
            data: vec![0.0; ncomp * (nx + 2) * (ny + 2)],
        }
    }

    /// Samples `f(x, y, out)` at every cell centre; ghosts are left at zero.
    pub fn from_fn(grid: &Grid, ncomp: usize, mut f: impl FnMut(f64, f64, &mut [f64])) -> Self {
        let mut field = Self::zeros(grid, ncomp);
        let mut buf = vec![0.0; ncomp];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.cell_center(i, j);
                buf.iter_mut().for_each(|v| *v = 0.0);
                f(x, y, &mut buf);
                for (c, v) in buf.iter().enumerate() {
                    field.set(c, i, j, *v);
                }
            }
        }
        field
    }

    /// Every cell (interior and ghost) set to the same vector.
    pub fn constant(grid: &Grid, value: &[f64]) -> Self {
        let mut field = Self::zeros(grid, value.len());
        let plane = field.plane();
        for (c, v) in value.iter().enumerate() {
            field.data[c * plane..(c + 1) * plane].fill(*v);
        }
        field
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    #[inline]
    pub(crate) fn stride(&self) -> usize {
        self.nx + 2
    }

    #[inline]
    pub(crate) fn plane(&self) -> usize {
        (self.nx + 2) * (self.ny + 2)
    }

    /// Raw storage index; `i` and `j` may be -1 or `nx`/`ny` (ghosts).
    #[inline]
    pub fn raw_index(&self, c: usize, i: isize, j: isize) -> usize {
        debug_assert!(i >= -1 && i <= self.nx as isize && j >= -1 && j <= self.ny as isize);
        c * self.plane() + (j + 1) as usize * self.stride() + (i + 1) as usize
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.raw_index(c, i as isize, j as isize)]
    }

    #[inline]
    pub fn get_ghost(&self, c: usize, i: isize, j: isize) -> f64 {
        self.data[self.raw_index(c, i, j)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        let k = self.raw_index(c, i as isize, j as isize);
        self.data[k] = v;
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.ncomp == other.ncomp
    }

    pub fn matches_grid(&self, grid: &Grid) -> bool {
        self.nx == grid.nx() && self.ny == grid.ny()
    }

    /// Vector at cell `(i, j)`.
    pub fn vector(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.ncomp).map(|c| self.get(c, i, j)).collect()
    }

    /// Interior values, component-major, rows of length `nx`.
    pub fn interior(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ncomp * self.nx * self.ny);
        for c in 0..self.ncomp {
            for j in 0..self.ny {
                let start = self.raw_index(c, 0, j as isize);
                out.extend_from_slice(&self.data[start..start + self.nx]);
            }
        }
        out
    }

    /// Inverse of [`CellField::interior`]; ghosts are left at zero.
    pub fn from_interior(nx: usize, ny: usize, ncomp: usize, values: &[f64]) -> Result<Self> {
        if values.len() != nx * ny * ncomp {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {ncomp} x {nx} x {ny} cells",
                values.len()
            )));
        }
        let mut field = Self::zeros_sized(nx, ny, ncomp);
        for c in 0..ncomp {
            for j in 0..ny {
                let start = field.raw_index(c, 0, j as isize);
                let src = (c * ny + j) * nx;
                field.data[start..start + nx].copy_from_slice(&values[src..src + nx]);
            }
        }
        Ok(field)
    }

    pub fn fill_ghosts(&mut self, bc: BoundaryCondition) {
        let s = bc.ghost_sign();
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        for c in 0..self.ncomp {
            for j in 0..ny {
                let left = self.data[self.raw_index(c, 0, j)];
                let right = self.data[self.raw_index(c, nx - 1, j)];
                let kl = self.raw_index(c, -1, j);
                let kr = self.raw_index(c, nx, j);
                self.data[kl] = s * left;
                self.data[kr] = s * right;
            }
            // Rows include the ghost columns, so corners get the doubly
            // reflected value.
            for i in -1..=nx {
                let bottom = self.data[self.raw_index(c, i, 0)];
                let top = self.data[self.raw_index(c, i, ny - 1)];
                let kb = self.raw_index(c, i, -1);
                let kt = self.raw_index(c, i, ny);
                self.data[kb] = s * bottom;
                self.data[kt] = s * top;
            }
        }
    }

    /// Copy with ghosts filled.
    pub fn with_ghosts(&self, bc: BoundaryCondition) -> Self {
        let mut f = self.clone();
        f.fill_ghosts(bc);
        f
    }

    /// Cell-area-weighted mean of component `c`.
    pub fn mean(&self, c: usize) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.ny {
            let start = self.raw_index(c, 0, j as isize);
            sum += self.data[start..start + self.nx].iter().sum::<f64>();
        }
        sum / (self.nx * self.ny) as f64
    }

    pub fn mean_vector(&self) -> Vec<f64> {
        (0..self.ncomp).map(|c| self.mean(c)).collect()
    }

    /// Max-norm over interior cells and all components.
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for c in 0..self.ncomp {
            for j in 0..self.ny {
                let start = self.raw_index(c, 0, j as isize);
                for v in &self.data[start..start + self.nx] {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }

    /// Euclidean dot product over interior cells and components (no area).
    pub fn interior_dot(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        let mut sum = 0.0;
        for c in 0..self.ncomp {
            for j in 0..self.ny {
                let start = self.raw_index(c, 0, j as isize);
                let a = &self.data[start..start + self.nx];
                let b = &other.data[start..start + self.nx];
                sum += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        sum
    }

    /// Grid inner product: interior dot times the cell area.
    pub fn inner(&self, other: &Self, grid: &Grid) -> f64 {
        self.interior_dot(other) * grid.cell_area()
    }

    /// Applies `f` to every storage slot (ghosts included).
    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }

    /// `self += a * other` over all storage.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }
}

/// Face-staggered velocity with ghost rows/columns for the tangential
/// components.
///
/// `ux` has shape `(nx + 1) x (ny + 2)` covering `i in 0..=nx`,
/// `j in -1..=ny`; `uy` has shape `(nx + 2) x (ny + 1)` covering
/// `i in -1..=nx`, `j in 0..=ny`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    nx: usize,
    ny: usize,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

pub type VectorFaceField = FaceField;

impl FaceField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::zeros_sized(grid.nx(), grid.ny())
    }

    pub(crate) fn zeros_sized(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            ux: vec![0.0; (nx + 1) * (ny + 2)],
            uy: vec![0.0; (nx + 2) * (ny + 1)],
        }
    }

    /// Samples `(fx, fy)` at face positions, including wall faces. Ghosts
    /// are left at zero; callers fill them.
    pub fn from_fns(grid: &Grid, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let mut u = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..=grid.nx() {
                let (x, y) = grid.ux_position(i, j);
                u.set_x(i, j, fx(x, y));
            }
        }
        for j in 0..=grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.uy_position(i, j);
                u.set_y(i, j, fy(x, y));
            }
        }
        u
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub(crate) fn sx(&self) -> usize {
        self.nx + 1
    }
    #[inline]
    pub(crate) fn sy(&self) -> usize {
        self.nx + 2
    }

    /// Raw index into the x-face array; `j` may be -1 or `ny`.
    #[inline]
    pub fn ix(&self, i: usize, j: isize) -> usize {
        debug_assert!(i <= self.nx && j >= -1 && j <= self.ny as isize);
        (j + 1) as usize * self.sx() + i
    }

    /// Raw index into the y-face array; `i` may be -1 or `nx`.
    #[inline]
    pub fn iy(&self, i: isize, j: usize) -> usize {
        debug_assert!(i >= -1 && i <= self.nx as isize && j <= self.ny);
        j * self.sy() + (i + 1) as usize
    }

    #[inline]
    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.ux[self.ix(i, j as isize)]
    }
    #[inline]
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.uy[self.iy(i as isize, j)]
    }
    #[inline]
    pub fn x_ghost(&self, i: usize, j: isize) -> f64 {
        self.ux[self.ix(i, j)]
    }
    #[inline]
    pub fn y_ghost(&self, i: isize, j: usize) -> f64 {
        self.uy[self.iy(i, j)]
    }
    #[inline]
    pub fn set_x(&mut self, i: usize, j: usize, v: f64) {
        let k = self.ix(i, j as isize);
        self.ux[k] = v;
    }
    #[inline]
    pub fn set_y(&mut self, i: usize, j: usize, v: f64) {
        let k = self.iy(i as isize, j);
        self.uy[k] = v;
    }

    pub fn raw_x(&self) -> &[f64] {
        &self.ux
    }
    pub fn raw_y(&self) -> &[f64] {
        &self.uy
    }
    pub fn raw_x_mut(&mut self) -> &mut [f64] {
        &mut self.ux
    }
    pub fn raw_xy_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.ux, &mut self.uy)
    }
    pub fn raw_y_mut(&mut self) -> &mut [f64] {
        &mut self.uy
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub fn matches_grid(&self, grid: &Grid) -> bool {
        self.nx == grid.nx() && self.ny == grid.ny()
    }

    /// Fills ghosts and pins wall-normal faces to zero.
    ///
    /// `NoSlip` antireflects tangential samples through the wall value 0;
    /// `Neumann` mirrors them (free slip). Wall-normal faces are zero for
    /// either choice since the walls are impermeable.
    pub fn fill_ghosts(&mut self, bc: BoundaryCondition) {
        let s = bc.ghost_sign();
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            let k0 = self.ix(0, j as isize);
            let k1 = self.ix(nx, j as isize);
            self.ux[k0] = 0.0;
            self.ux[k1] = 0.0;
        }
        for i in 0..=nx {
            let b = self.ux[self.ix(i, 0)];
            let t = self.ux[self.ix(i, ny as isize - 1)];
            let kb = self.ix(i, -1);
            let kt = self.ix(i, ny as isize);
            self.ux[kb] = s * b;
            self.ux[kt] = s * t;
        }
        for i in 0..nx {
            let k0 = self.iy(i as isize, 0);
            let k1 = self.iy(i as isize, ny);
            self.uy[k0] = 0.0;
            self.uy[k1] = 0.0;
        }
        for j in 0..=ny {
            let l = self.uy[self.iy(0, j)];
            let r = self.uy[self.iy(nx as isize - 1, j)];
            let kl = self.iy(-1, j);
            let kr = self.iy(nx as isize, j);
            self.uy[kl] = s * l;
            self.uy[kr] = s * r;
        }
    }

    pub fn with_ghosts(&self, bc: BoundaryCondition) -> Self {
        let mut u = self.clone();
        u.fill_ghosts(bc);
        u
    }

    /// Interior (non-wall) x-faces then interior y-faces, row-major.
    pub fn interior(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Vec::with_capacity((nx - 1) * ny + nx * (ny - 1));
        for j in 0..ny {
            for i in 1..nx {
                out.push(self.x(i, j));
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                out.push(self.y(i, j));
            }
        }
        out
    }

    /// Inverse of [`FaceField::interior`]; walls and ghosts are zero.
    pub fn from_interior(nx: usize, ny: usize, values: &[f64]) -> Result<Self> {
        let n = (nx - 1) * ny + nx * (ny - 1);
        if values.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {n} interior faces",
                values.len()
            )));
        }
        let mut u = Self::zeros_sized(nx, ny);
        let mut it = values.iter();
        for j in 0..ny {
            for i in 1..nx {
                u.set_x(i, j, *it.next().unwrap());
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                u.set_y(i, j, *it.next().unwrap());
            }
        }
        Ok(u)
    }

    /// Euclidean dot over interior faces (walls excluded, no area weight).
    pub fn interior_dot(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        let (nx, ny) = (self.nx, self.ny);
        let mut sum = 0.0;
        for j in 0..ny {
            let k = self.ix(1, j as isize);
            sum += self.ux[k..k + nx - 1]
                .iter()
                .zip(&other.ux[k..k + nx - 1])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        for j in 1..ny {
            let k = self.iy(0, j);
            sum += self.uy[k..k + nx]
                .iter()
                .zip(&other.uy[k..k + nx])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        sum
    }

    /// Face inner product with weight `hx hy` per face.
    pub fn inner(&self, other: &Self, grid: &Grid) -> f64 {
        self.interior_dot(other) * grid.cell_area()
    }

    /// Discrete L2 norm (face quadrature).
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        self.inner(self, grid).sqrt()
    }

    /// Max-norm over all faces including walls (ghosts excluded).
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.ny {
            for i in 0..=self.nx {
                m = m.max(self.x(i, j).abs());
            }
        }
        for j in 0..=self.ny {
            for i in 0..self.nx {
                m = m.max(self.y(i, j).abs());
            }
        }
        m
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.ux.iter_mut().zip(&other.ux) {
            *x += a * y;
        }
        for (x, y) in self.uy.iter_mut().zip(&other.uy) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.ux.iter_mut().for_each(|v| *v *= a);
        self.uy.iter_mut().for_each(|v| *v *= a);
    }
}

/// Full simulation state `(u, pi, d)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: FaceField,
    pub pi: ScalarField,
    pub d: DirectorField,
    pub t: f64,
}

impl State {
    /// Fluid at rest with a uniform director.
    pub fn equilibrium(grid: &Grid, director: &[f64]) -> Self {
        Self {
            u: FaceField::zeros(grid),
            pi: CellField::zeros(grid, 1),
            d: CellField::constant(grid, director),
            t: 0.0,
        }
    }

    pub fn new(grid: &Grid, mut u: FaceField, mut d: DirectorField, t: f64) -> Result<Self> {
        if !u.matches_grid(grid) || !d.matches_grid(grid) || d.ncomp() != grid.m() {
            return Err(Error::ShapeMismatch("state fields do not match the grid".into()));
        }
        u.fill_ghosts(BoundaryCondition::NoSlip);
        d.fill_ghosts(BoundaryCondition::Neumann);
        Ok(Self {
            u,
            pi: CellField::zeros(grid, 1),
            d,
            t,
        })
    }

    /// Bitwise equality of all interior data and the time stamp.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.t.to_bits() == other.t.to_bits()
            && bits(self.u.raw_x()) == bits(other.u.raw_x())
            && bits(self.u.raw_y()) == bits(other.u.raw_y())
            && bits(&self.pi.interior()) == bits(&other.pi.interior())
            && bits(&self.d.interior()) == bits(&other.d.interior())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> Grid {
        Grid::new(GridSpec::new(nx, ny, 1.0, 1.0, 2)).unwrap()
    }

    #[test]
    fn spacing_from_spec() {
        let g = grid(4, 4);
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.hy(), 0.25);
        let g = Grid::new(GridSpec::new(64, 32, 2.0, 1.0, 3)).unwrap();
        assert_eq!(g.hx(), 0.03125);
        assert_eq!(g.hy(), 0.03125);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            Grid::new(GridSpec::new(3, 8, 1.0, 1.0, 2)),
            Err(Error::GridTooCoarse { nx: 3, ny: 8 })
        ));
        let msg = Grid::new(GridSpec::new(3, 8, 1.0, 1.0, 2)).unwrap_err().to_string();
        assert!(msg.contains("grid too coarse"));
        assert!(matches!(
            Grid::new(GridSpec::new(8, 8, 0.0, 1.0, 2)),
            Err(Error::NonPositiveLength { .. })
        ));
        assert!(matches!(
            Grid::new(GridSpec::new(8, 8, 1.0, -1.0, 2)),
            Err(Error::NonPositiveLength { .. })
        ));
        assert!(matches!(
            Grid::new(GridSpec::new(8, 8, 1.0, 1.0, 4)),
            Err(Error::UnsupportedDirectorDimension(4))
        ));
        assert!(matches!(
            Grid::new(GridSpec::new(8, 8, 10.0, 1.0, 2)),
            Err(Error::Anisotropy { .. })
        ));
    }

    #[test]
    fn index_maps_are_bijections() {
        for nx in 4..=16 {
            for ny in 4..=16 {
                let g = grid(nx, ny);
                let mut seen = vec![false; g.n_cells()];
                for j in 0..ny {
                    for i in 0..nx {
                        let k = g.cell_index(i, j);
                        assert!(!seen[k]);
                        seen[k] = true;
                        assert_eq!(g.cell_coords(k), (i, j));
                    }
                }
                assert!(seen.iter().all(|s| *s));
                for j in 0..ny {
                    for i in 0..=nx {
                        assert_eq!(g.ux_coords(g.ux_index(i, j)), (i, j));
                    }
                }
                for j in 0..=ny {
                    for i in 0..nx {
                        assert_eq!(g.uy_coords(g.uy_index(i, j)), (i, j));
                    }
                }
                assert_eq!(g.ux_index(nx, ny - 1) + 1, (nx + 1) * ny);
                assert_eq!(g.uy_index(nx - 1, ny) + 1, nx * (ny + 1));
            }
        }
    }

    #[test]
    fn unknown_bc_tag() {
        assert_eq!("neumann".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Neumann);
        assert_eq!("no_slip".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::NoSlip);
        assert!(matches!(
            "periodic".parse::<BoundaryCondition>(),
            Err(Error::UnknownBoundaryCondition(_))
        ));
    }

    #[test]
    fn constant_director_ghosts_match() {
        let g = grid(6, 5);
        let mut d = CellField::from_fn(&g, 2, |_, _, v| {
            v[0] = 0.6;
            v[1] = 0.8;
        });
        d.fill_ghosts(BoundaryCondition::Neumann);
        for i in -1..=6 {
            for j in -1..=5 {
                assert_eq!(d.get_ghost(0, i, j), 0.6);
                assert_eq!(d.get_ghost(1, i, j), 0.8);
            }
        }
    }

    #[test]
    fn zero_velocity_ghosts_zero() {
        let g = grid(5, 7);
        let mut u = FaceField::zeros(&g);
        u.fill_ghosts(BoundaryCondition::NoSlip);
        assert!(u.raw_x().iter().chain(u.raw_y()).all(|v| *v == 0.0));
    }

    #[test]
    fn neumann_difference_vanishes_exactly() {
        let g = grid(7, 9);
        let mut d = CellField::from_fn(&g, 2, |x, y, v| {
            v[0] = (3.0 * x).sin() + y * y;
            v[1] = (x * y).exp();
        });
        d.fill_ghosts(BoundaryCondition::Neumann);
        for c in 0..2 {
            for j in 0..9 {
                assert_eq!(d.get_ghost(c, -1, j) - d.get(c, 0, j as usize), 0.0);
                assert_eq!(d.get_ghost(c, 7, j) - d.get(c, 6, j as usize), 0.0);
            }
            for i in 0..7 {
                assert_eq!(d.get_ghost(c, i, -1) - d.get(c, i as usize, 0), 0.0);
                assert_eq!(d.get_ghost(c, i, 9) - d.get(c, i as usize, 8), 0.0);
            }
        }
    }

    #[test]
    fn no_slip_ghosts_antireflect() {
        let g = grid(6, 6);
        let mut u = FaceField::from_fns(&g, |x, y| 1.0 + x + y, |x, y| 2.0 - x * y);
        u.fill_ghosts(BoundaryCondition::NoSlip);
        for j in 0..6 {
            assert_eq!(u.x(0, j), 0.0);
            assert_eq!(u.x(6, j), 0.0);
        }
        for i in 0..=6 {
            assert_eq!(u.x_ghost(i, -1), -u.x(i, 0));
            assert_eq!(u.x_ghost(i, 6), -u.x(i, 5));
        }
        for j in 0..=6 {
            assert_eq!(u.y_ghost(-1, j), -u.y(0, j));
            assert_eq!(u.y_ghost(6, j), -u.y(5, j));
        }
    }

    #[test]
    fn interior_round_trips() {
        let g = grid(5, 4);
        let d = CellField::from_fn(&g, 3, |x, y, v| {
            v[0] = x;
            v[1] = y;
            v[2] = x * y;
        });
        let back = CellField::from_interior(5, 4, 3, &d.interior()).unwrap();
        assert_eq!(back.interior(), d.interior());
        let u = FaceField::from_fns(&g, |x, y| x + 2.0 * y, |x, y| x * y).with_ghosts(BoundaryCondition::NoSlip);
        let back = FaceField::from_interior(5, 4, &u.interior()).unwrap().with_ghosts(BoundaryCondition::NoSlip);
        assert_eq!(back, u);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fill_ghosts_is_idempotent(
                nx in 4usize..10, ny in 4usize..10,
                seed in proptest::collection::vec(-1.0f64..1.0, 600),
                neumann in any::<bool>(),
            ) {
                let g = grid(nx, ny);
                let bc = if neumann { BoundaryCondition::Neumann } else { BoundaryCondition::NoSlip };
                let mut it = seed.iter().cycle();
                let mut d = CellField::from_fn(&g, 2, |_, _, v| { v[0] = *it.next().unwrap(); v[1] = *it.next().unwrap(); });
                d.fill_ghosts(bc);
                let once = d.clone();
                d.fill_ghosts(bc);
                prop_assert_eq!(&once, &d);

                let mut it = seed.iter().cycle();
                let mut u = FaceField::from_fns(&g, |_, _| 0.0, |_, _| 0.0);
                let (ux, uy) = u.raw_xy_mut();
                for v in ux.iter_mut().chain(uy.iter_mut()) { *v = *it.next().unwrap(); }
                u.fill_ghosts(bc);
                let once = u.clone();
                u.fill_ghosts(bc);
                prop_assert_eq!(once, u);
            }
        }
    }
}
