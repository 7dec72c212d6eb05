//! Discrete differential operators on the MAC grid.
//!
//! All stencils read ghost values, so inputs must have their ghosts filled
//! with the boundary condition appropriate for the field (Neumann for
//! director-like cell fields, no-slip for velocities). Outputs are written
//! on the interior only; their ghosts are zero until the caller fills them.

use serde::{Deserialize, Serialize};

use crate::mesh::{BoundaryCondition, CellField, FaceField, Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    Centered,
    /// Advection switched off (linear Stokes / pure heat-flow experiments).
    Off,
}

#[inline]
fn upwind(vel: f64, back: f64, centre: f64, fwd: f64, h: f64) -> f64 {
    if vel > 0.0 {
        vel * (centre - back) / h
    } else if vel < 0.0 {
        vel * (fwd - centre) / h
    } else {
        0.0
    }
}

#[inline]
fn transport(scheme: AdvectionScheme, vel: f64, back: f64, centre: f64, fwd: f64, h: f64) -> f64 {
    match scheme {
        AdvectionScheme::Upwind => upwind(vel, back, centre, fwd, h),
        AdvectionScheme::Centered => vel * (fwd - back) / (2.0 * h),
        AdvectionScheme::Off => 0.0,
    }
}

/// Face-difference divergence at cell centres.
pub fn divergence(grid: &Grid, u: &FaceField) -> ScalarField {
    let mut out = CellField::zeros(grid, 1);
    divergence_into(grid, u, &mut out);
    out
}

pub(crate) fn divergence_into(grid: &Grid, u: &FaceField, out: &mut ScalarField) {
    let (hx, hy) = (grid.hx(), grid.hy());
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let d = (u.x(i + 1, j) - u.x(i, j)) / hx + (u.y(i, j + 1) - u.y(i, j)) / hy;
            out.set(0, i, j, d);
        }
    }
}

/// Cell-to-face gradient on interior faces; wall faces are zero, so this is
/// the exact negative adjoint of [`divergence`] on fields with zero normal
/// wall velocity. Ghosts are filled with the no-slip rule.
pub fn gradient(grid: &Grid, p: &ScalarField) -> FaceField {
    let mut g = FaceField::zeros(grid);
    gradient_into(grid, p, &mut g);
    g
}

pub(crate) fn gradient_into(grid: &Grid, p: &ScalarField, g: &mut FaceField) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    for j in 0..ny {
        g.set_x(0, j, 0.0);
        g.set_x(nx, j, 0.0);
        for i in 1..nx {
            g.set_x(i, j, (p.get(0, i, j) - p.get(0, i - 1, j)) / hx);
        }
    }
    for i in 0..nx {
        g.set_y(i, 0, 0.0);
        g.set_y(i, ny, 0.0);
    }
    for j in 1..ny {
        for i in 0..nx {
            g.set_y(i, j, (p.get(0, i, j) - p.get(0, i, j - 1)) / hy);
        }
    }
    g.fill_ghosts(BoundaryCondition::NoSlip);
}

/// Five-point Laplacian of every component of a cell field.
///
/// With Neumann ghosts this is the Neumann Laplacian; with no-slip ghosts
/// it is the Dirichlet one.
pub fn cell_laplacian(grid: &Grid, f: &CellField) -> CellField {
    let mut out = CellField::zeros(grid, f.ncomp());
    cell_laplacian_into(grid, f, &mut out);
    out
}

pub(crate) fn cell_laplacian_into(grid: &Grid, f: &CellField, out: &mut CellField) {
    let (ax, ay) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let s = f.stride();
    let src = f.raw();
    for c in 0..f.ncomp() {
        for j in 0..grid.ny() {
            let row = f.raw_index(c, 0, j as isize);
            let dst = &mut out.raw_mut()[row..row + grid.nx()];
            for (i, o) in dst.iter_mut().enumerate() {
                let k = row + i;
                let v = src[k];
                *o = (src[k + 1] - 2.0 * v + src[k - 1]) * ax + (src[k + s] - 2.0 * v + src[k - s]) * ay;
            }
        }
    }
}

/// Five-point Laplacian of each velocity component on interior faces.
/// Wall-face outputs are zero.
pub fn face_laplacian(grid: &Grid, u: &FaceField) -> FaceField {
    let mut out = FaceField::zeros(grid);
    face_laplacian_into(grid, u, &mut out);
    out
}

pub(crate) fn face_laplacian_into(grid: &Grid, u: &FaceField, out: &mut FaceField) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ax, ay) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let sx = u.sx();
    let src = u.raw_x();
    for j in 0..ny {
        let row = u.ix(0, j as isize);
        let dst = out.raw_x_mut();
        dst[row] = 0.0;
        dst[row + nx] = 0.0;
        for k in row + 1..row + nx {
            let v = src[k];
            dst[k] = (src[k + 1] - 2.0 * v + src[k - 1]) * ax + (src[k + sx] - 2.0 * v + src[k - sx]) * ay;
        }
    }
    let sy = u.sy();
    let src = u.raw_y();
    for i in 0..nx {
        let dst = out.raw_y_mut();
        dst[u.iy(i as isize, 0)] = 0.0;
        dst[u.iy(i as isize, ny)] = 0.0;
    }
    for j in 1..ny {
        let row = u.iy(0, j);
        let dst = out.raw_y_mut();
        for k in row..row + nx {
            let v = src[k];
            dst[k] = (src[k + 1] - 2.0 * v + src[k - 1]) * ax + (src[k + sy] - 2.0 * v + src[k - sy]) * ay;
        }
    }
}

/// Discrete `|grad d|^2` at cells: the mean of the squared one-sided
/// differences on the two faces of each direction.
///
/// Summed with the cell area this equals the face-quadrature Dirichlet
/// energy, and `d . lap(d) = lap(|d|^2)/2 - density` holds exactly for the
/// five-point Laplacian.
pub fn gradient_density(grid: &Grid, d: &CellField) -> ScalarField {
    let mut out = CellField::zeros(grid, 1);
    gradient_density_into(grid, d, &mut out);
    out
}

pub(crate) fn gradient_density_into(grid: &Grid, d: &CellField, out: &mut ScalarField) {
    let (ax, ay) = (0.5 / (grid.hx() * grid.hx()), 0.5 / (grid.hy() * grid.hy()));
    let s = d.stride();
    let src = d.raw();
    for j in 0..grid.ny() {
        let orow = out.raw_index(0, 0, j as isize);
        for i in 0..grid.nx() {
            let mut acc = 0.0;
            for c in 0..d.ncomp() {
                let k = d.raw_index(c, i as isize, j as isize);
                let v = src[k];
                let (e, w, n, so) = (src[k + 1] - v, v - src[k - 1], src[k + s] - v, v - src[k - s]);
                acc += (e * e + w * w) * ax + (n * n + so * so) * ay;
            }
            out.raw_mut()[orow + i] = acc;
        }
    }
}

/// Largest face-difference gradient `|d_a - d_b| / h` over interior faces.
pub fn max_face_gradient(grid: &Grid, d: &CellField) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut best: f64 = 0.0;
    let diff = |a: (usize, usize), b: (usize, usize), h: f64| -> f64 {
        (0..d.ncomp())
            .map(|c| {
                let t = d.get(c, a.0, a.1) - d.get(c, b.0, b.1);
                t * t
            })
            .sum::<f64>()
            .sqrt()
            / h
    };
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                best = best.max(diff((i + 1, j), (i, j), grid.hx()));
            }
            if j + 1 < ny {
                best = best.max(diff((i, j + 1), (i, j), grid.hy()));
            }
        }
    }
    best
}

/// `(u . grad) f` at cell centres, with `u` averaged from faces to centres.
pub fn advect_cells(grid: &Grid, u: &FaceField, f: &CellField, scheme: AdvectionScheme) -> CellField {
    let mut out = CellField::zeros(grid, f.ncomp());
    advect_cells_into(grid, u, f, scheme, &mut out);
    out
}

pub(crate) fn advect_cells_into(grid: &Grid, u: &FaceField, f: &CellField, scheme: AdvectionScheme, out: &mut CellField) {
    let (hx, hy) = (grid.hx(), grid.hy());
    let s = f.stride();
    let src = f.raw();
    if scheme == AdvectionScheme::Off {
        out.raw_mut().fill(0.0);
        return;
    }
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let a = 0.5 * (u.x(i, j) + u.x(i + 1, j));
            let b = 0.5 * (u.y(i, j) + u.y(i, j + 1));
            for c in 0..f.ncomp() {
                let k = f.raw_index(c, i as isize, j as isize);
                let v = transport(scheme, a, src[k - 1], src[k], src[k + 1], hx)
                    + transport(scheme, b, src[k - s], src[k], src[k + s], hy);
                out.raw_mut()[k] = v;
            }
        }
    }
}

/// `(u . grad) u` on interior faces, cross components averaged from the
/// four surrounding faces of the other orientation.
pub fn advect_faces(grid: &Grid, u: &FaceField, scheme: AdvectionScheme) -> FaceField {
    let mut out = FaceField::zeros(grid);
    advect_faces_into(grid, u, scheme, &mut out);
    out
}

pub(crate) fn advect_faces_into(grid: &Grid, u: &FaceField, scheme: AdvectionScheme, out: &mut FaceField) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    out.raw_x_mut().fill(0.0);
    out.raw_y_mut().fill(0.0);
    if scheme == AdvectionScheme::Off {
        return;
    }
    for j in 0..ny {
        for i in 1..nx {
            let a = u.x(i, j);
            let b = 0.25 * (u.y(i - 1, j) + u.y(i, j) + u.y(i - 1, j + 1) + u.y(i, j + 1));
            let jj = j as isize;
            let v = transport(scheme, a, u.x(i - 1, j), a, u.x(i + 1, j), hx)
                + transport(scheme, b, u.x_ghost(i, jj - 1), a, u.x_ghost(i, jj + 1), hy);
            out.set_x(i, j, v);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let a = 0.25 * (u.x(i, j - 1) + u.x(i + 1, j - 1) + u.x(i, j) + u.x(i + 1, j));
            let b = u.y(i, j);
            let ii = i as isize;
            let v = transport(scheme, a, u.y_ghost(ii - 1, j), b, u.y_ghost(ii + 1, j), hx)
                + transport(scheme, b, u.y(i, j - 1), b, u.y(i, j + 1), hy);
            out.set_y(i, j, v);
        }
    }
}

/// The quasilinear coupling `[B(d) h]_i = d_i d_l lap h_l + d_k d_l d_k d_i h_l`
/// (sum over `k`, `l`), evaluated at cells with centred differences and
/// averaged to interior faces. Both `d` and `h` need Neumann ghosts,
/// corners included.
pub fn coupling_b(grid: &Grid, d: &CellField, h: &CellField) -> FaceField {
    assert_eq!(d.ncomp(), h.ncomp(), "director and test field differ in components");
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let s = d.stride();
    let (dsrc, hsrc) = (d.raw(), h.raw());
    let mut bx = CellField::zeros(grid, 1);
    let mut by = CellField::zeros(grid, 1);
    for j in 0..ny {
        for i in 0..nx {
            let (mut sx, mut sy) = (0.0, 0.0);
            for l in 0..d.ncomp() {
                let k = d.raw_index(l, i as isize, j as isize);
                let dx = (dsrc[k + 1] - dsrc[k - 1]) / (2.0 * hx);
                let dy = (dsrc[k + s] - dsrc[k - s]) / (2.0 * hy);
                let hxx = (hsrc[k + 1] - 2.0 * hsrc[k] + hsrc[k - 1]) / (hx * hx);
                let hyy = (hsrc[k + s] - 2.0 * hsrc[k] + hsrc[k - s]) / (hy * hy);
                let hxy = (hsrc[k + s + 1] - hsrc[k + s - 1] - hsrc[k - s + 1] + hsrc[k - s - 1]) / (4.0 * hx * hy);
                let lap = hxx + hyy;
                sx += dx * lap + dx * hxx + dy * hxy;
                sy += dy * lap + dx * hxy + dy * hyy;
            }
            bx.set(0, i, j, sx);
            by.set(0, i, j, sy);
        }
    }
    let mut out = FaceField::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            out.set_x(i, j, 0.5 * (bx.get(0, i - 1, j) + bx.get(0, i, j)));
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            out.set_y(i, j, 0.5 * (by.get(0, i, j - 1) + by.get(0, i, j)));
        }
    }
    out
}

/// Ericksen stress `sigma_ij = sum_l d_i d_l d_j d_l` at cells.
#[derive(Debug, Clone)]
pub struct StressTensorField {
    pub xx: ScalarField,
    pub xy: ScalarField,
    pub yy: ScalarField,
}

impl StressTensorField {
    pub fn at(&self, i: usize, j: usize) -> [[f64; 2]; 2] {
        let xy = self.xy.get(0, i, j);
        [[self.xx.get(0, i, j), xy], [xy, self.yy.get(0, i, j)]]
    }
}

/// Stress tensor from centred cell differences. Ghosts follow the parity of
/// each entry under wall reflection: diagonal entries are even, the
/// off-diagonal entry is odd.
pub fn stress_tensor(grid: &Grid, d: &CellField) -> StressTensorField {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut xx = CellField::zeros(grid, 1);
    let mut xy = CellField::zeros(grid, 1);
    let mut yy = CellField::zeros(grid, 1);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let (ii, jj) = (i as isize, j as isize);
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for l in 0..d.ncomp() {
                let gx = (d.get_ghost(l, ii + 1, jj) - d.get_ghost(l, ii - 1, jj)) / (2.0 * hx);
                let gy = (d.get_ghost(l, ii, jj + 1) - d.get_ghost(l, ii, jj - 1)) / (2.0 * hy);
                a += gx * gx;
                b += gx * gy;
                c += gy * gy;
            }
            xx.set(0, i, j, a);
            xy.set(0, i, j, b);
            yy.set(0, i, j, c);
        }
    }
    xx.fill_ghosts(BoundaryCondition::Neumann);
    yy.fill_ghosts(BoundaryCondition::Neumann);
    xy.fill_ghosts(BoundaryCondition::NoSlip);
    StressTensorField { xx, xy, yy }
}

/// Row-wise divergence of the stress tensor on interior faces, i.e.
/// `div([grad d]^T grad d)` without the minus sign of the momentum balance.
pub fn elastic_stress_div(grid: &Grid, d: &CellField) -> FaceField {
    let sigma = stress_tensor(grid, d);
    stress_divergence(grid, &sigma)
}

/// L2 distance between `B(d) d` and `div sigma(d)` on faces at least two
/// cells from every wall, where both routes are second-order consistent.
pub fn coupling_discrepancy(grid: &Grid, d: &CellField) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let b = coupling_b(grid, d, d);
    let s = elastic_stress_div(grid, d);
    let mut sum = 0.0;
    for j in 2..ny.saturating_sub(2) {
        for i in 3..nx.saturating_sub(2) {
            sum += (b.x(i, j) - s.x(i, j)).powi(2);
        }
    }
    for j in 3..ny.saturating_sub(2) {
        for i in 2..nx.saturating_sub(2) {
            sum += (b.y(i, j) - s.y(i, j)).powi(2);
        }
    }
    (sum * grid.cell_area()).sqrt()
}

pub fn stress_divergence(grid: &Grid, sigma: &StressTensorField) -> FaceField {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let StressTensorField { xx, xy, yy } = sigma;
    let mut out = FaceField::zeros(grid);
    for j in 0..ny {
        let jj = j as isize;
        for i in 1..nx {
            let ii = i as isize;
            let up = 0.5 * (xy.get_ghost(0, ii - 1, jj + 1) + xy.get_ghost(0, ii, jj + 1));
            let down = 0.5 * (xy.get_ghost(0, ii - 1, jj - 1) + xy.get_ghost(0, ii, jj - 1));
            let v = (xx.get(0, i, j) - xx.get(0, i - 1, j)) / hx + (up - down) / (2.0 * hy);
            out.set_x(i, j, v);
        }
    }
    for j in 1..ny {
        let jj = j as isize;
        for i in 0..nx {
            let ii = i as isize;
            let right = 0.5 * (xy.get_ghost(0, ii + 1, jj - 1) + xy.get_ghost(0, ii + 1, jj));
            let left = 0.5 * (xy.get_ghost(0, ii - 1, jj - 1) + xy.get_ghost(0, ii - 1, jj));
            let v = (yy.get(0, i, j) - yy.get(0, i, j - 1)) / hy + (right - left) / (2.0 * hx);
            out.set_y(i, j, v);
        }
    }
    out
}
