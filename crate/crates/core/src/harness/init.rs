//! Seeded low-mode initial data, compatible with the boundary conditions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::director::renormalize;
use crate::flow::curl_of_streamfunction;
use crate::mesh::{BoundaryCondition, DirectorField, FaceField, Grid};

/// Cosine modes `(k, l)` with `1 <= k + l <= 2`.
const MODES: [(u32, u32); 5] = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Coefficients for each transverse component; the `(1, 0)` coefficient of
/// the first transverse component is at least 1/2 so the slowest decaying
/// mode is always present, and the absolute sum per component is at most 1.
pub fn director_coefficients(m: usize, seed: u64) -> Vec<[f64; 5]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..m)
        .map(|c| {
            let mut a = [0.0f64; 5];
            for v in a.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let lead = if c == 1 { 0.5 + 0.25 * rng.random::<f64>() } else { 0.0 };
            let rest: f64 = a[1..].iter().map(|v| v.abs()).sum();
            let budget = 1.0 - lead - if c == 1 { 0.0 } else { a[0].abs() };
            let s = if rest > 0.0 { budget / rest } else { 0.0 };
            a[1..].iter_mut().for_each(|v| *v *= s);
            if c == 1 {
                a[0] = lead;
            }
            a
        })
        .collect()
}

/// `normalize(e1 + amplitude * sum_modes a cos(k pi x/lx) cos(l pi y/ly) e_c)`.
pub fn director_profile(grid: &Grid, seed: u64, amplitude: f64) -> DirectorField {
    let m = grid.m();
    let coef = director_coefficients(m, seed);
    let (lx, ly) = (grid.lx(), grid.ly());
    let mut d = DirectorField::from_fn(grid, m, |x, y, v| {
        v.fill(0.0);
        v[0] = 1.0;
        for (c, a) in coef.iter().enumerate() {
            v[c + 1] = amplitude
                * MODES
                    .iter()
                    .zip(a)
                    .map(|(&(k, l), a)| a * (k as f64 * PI * x / lx).cos() * (l as f64 * PI * y / ly).cos())
                    .sum::<f64>();
        }
    });
    renormalize(&mut d).expect("perturbation keeps |d| >= 1");
    d.fill_ghosts(BoundaryCondition::Neumann);
    d
}

/// Discrete curl of `psi = sin^2(pi x/lx) sin^2(pi y/ly) (1 + b1 cos(pi x/lx) + b2 cos(pi y/ly))`,
/// scaled to the requested max-norm. Exactly solenoidal with zero wall flux.
pub fn velocity_profile(grid: &Grid, seed: u64, amplitude: f64) -> FaceField {
    if amplitude == 0.0 {
        return FaceField::zeros(grid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (b1, b2): (f64, f64) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let (nx, ny) = (grid.nx(), grid.ny());
    let (lx, ly) = (grid.lx(), grid.ly());
    let mut psi = Vec::with_capacity((nx - 1) * (ny - 1));
    for j in 1..ny {
        for i in 1..nx {
            let (x, y) = (i as f64 * grid.hx(), j as f64 * grid.hy());
            let (sx, sy) = ((PI * x / lx).sin(), (PI * y / ly).sin());
            psi.push(sx * sx * sy * sy * (1.0 + b1 * (PI * x / lx).cos() + b2 * (PI * y / ly).cos()));
        }
    }
    let mut u = curl_of_streamfunction(grid, &psi);
    let max = u.max_abs();
    u.scale(amplitude / max);
    u.fill_ghosts(BoundaryCondition::NoSlip);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::director::constraint_drift;
    use crate::mesh::GridSpec;
    use crate::operators::divergence;

    #[test]
    fn coefficients_respect_bounds() {
        for seed in 0..50 {
            for m in [2, 3] {
                let c = director_coefficients(m, seed);
                assert_eq!(c.len(), m - 1);
                assert!(c[0][0] >= 0.5);
                for a in &c {
                    assert!(a.iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn profiles_are_unit_and_solenoidal() {
        let g = Grid::new(GridSpec::new(16, 12, 1.0, 0.75, 3)).unwrap();
        let d = director_profile(&g, 3, 0.3);
        assert!(constraint_drift(&d) < 1e-14);
        assert_eq!(director_profile(&g, 3, 0.3), d);
        let u = velocity_profile(&g, 3, 0.1);
        assert!((u.max_abs() - 0.1).abs() < 1e-15);
        assert!(divergence(&g, &u).max_abs() < 1e-13);
        assert_eq!(velocity_profile(&g, 3, 0.0).max_abs(), 0.0);
        let flat = director_profile(&g, 3, 0.0);
        assert_eq!(flat.vector(2, 2), vec![1.0, 0.0, 0.0]);
    }
}
