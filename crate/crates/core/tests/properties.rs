//! Invariants of the discretisation as property tests.

use proptest::prelude::*;

use nematic::analysis::distance_to_equilibria;
use nematic::director::{ConstraintPolicy, constraint_drift, director_step};
use nematic::flow::{PhysicalParams, helmholtz_project, momentum_step};
use nematic::harness::checkpoint::{decode, encode};
use nematic::harness::{ScenarioConfig, ScenarioKind};
use nematic::mesh::{BoundaryCondition, CellField, FaceField, Grid, GridSpec, State};
use nematic::operators::{AdvectionScheme, coupling_b, divergence, elastic_stress_div, gradient, stress_tensor};
use nematic::poisson::PoissonSolver;
use nematic::solver::{PoissonMethod, Scheme};

fn grid(nx: usize, ny: usize, m: usize) -> Grid {
    Grid::new(GridSpec::new(nx, ny, 1.0, 0.9, m)).unwrap()
}

fn faces(g: &Grid, vals: &[f64]) -> FaceField {
    let (a, b) = g.n_interior_faces();
    let v: Vec<f64> = vals.iter().cycle().take(a + b).copied().collect();
    let mut u = FaceField::from_interior(g.nx(), g.ny(), &v).unwrap();
    u.fill_ghosts(BoundaryCondition::NoSlip);
    u
}

fn cells(g: &Grid, m: usize, vals: &[f64]) -> CellField {
    let v: Vec<f64> = vals.iter().cycle().take(m * g.n_cells()).copied().collect();
    let mut d = CellField::from_interior(g.nx(), g.ny(), m, &v).unwrap();
    d.fill_ghosts(BoundaryCondition::Neumann);
    d
}

/// Smooth field near a unit constant, so the director stays well away from 0.
fn smooth_director(g: &Grid, m: usize, a: &[f64]) -> CellField {
    let mut d = CellField::from_fn(g, m, |x, y, v| {
        let px = std::f64::consts::PI * x / g.lx();
        let py = std::f64::consts::PI * y / g.ly();
        v[0] = 1.0;
        v[1] = a[0] * px.cos() + a[1] * (px.cos() * py.cos());
        if m == 3 {
            v[2] = a[2] * py.cos();
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    });
    d.fill_ghosts(BoundaryCondition::Neumann);
    d
}

fn orthogonal(m: usize, a: f64, b: f64) -> Vec<Vec<f64>> {
    if m == 2 {
        return vec![vec![a.cos(), -a.sin()], vec![a.sin(), a.cos()]];
    }
    let rz = [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
    let rx = [[1.0, 0.0, 0.0], [0.0, b.cos(), -b.sin()], [0.0, b.sin(), b.cos()]];
    (0..3).map(|r| (0..3).map(|c| (0..3).map(|k| rz[r][k] * rx[k][c]).sum()).collect()).collect()
}

fn rotate(g: &Grid, d: &CellField, q: &[Vec<f64>]) -> CellField {
    let m = d.ncomp();
    let mut out = d.clone();
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let v = d.vector(i, j);
            for r in 0..m {
                out.set(r, i, j, (0..m).map(|k| q[r][k] * v[k]).sum());
            }
        }
    }
    out.fill_ghosts(BoundaryCondition::Neumann);
    out
}

fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn summation_by_parts(nx in 4usize..14, ny in 4usize..14, uv in vals(97), pv in vals(53)) {
        let g = grid(nx, ny, 2);
        let u = faces(&g, &uv);
        let p = cells(&g, 1, &pv);
        let lhs = divergence(&g, &u).inner(&p, &g);
        let rhs = -u.inner(&gradient(&g, &p), &g);
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn projection_is_solenoidal_and_idempotent(nx in 4usize..20, ny in 4usize..20, uv in vals(71)) {
        let g = grid(nx, ny, 2);
        let v = faces(&g, &uv);
        let (u, _, _) = helmholtz_project(&g, &v, 1e-10).unwrap();
        prop_assert!(divergence(&g, &u).max_abs() <= 1e-10);
        let (w, _, _) = helmholtz_project(&g, &u, 1e-10).unwrap();
        let mut diff = w.clone();
        diff.axpy(-1.0, &u);
        prop_assert!(diff.max_abs() <= 1e-11 * u.max_abs().max(1.0));
        // orthogonal projection: |P v| <= |v|
        prop_assert!(u.inner(&u, &g) <= v.inner(&v, &g) * (1.0 + 1e-12));
    }

    #[test]
    fn stress_is_symmetric_psd(nx in 4usize..12, ny in 4usize..12, m in 2usize..4, dv in vals(131)) {
        let g = grid(nx, ny, m);
        let d = cells(&g, m, &dv);
        let s = stress_tensor(&g, &d);
        for j in 0..ny {
            for i in 0..nx {
                let t = s.at(i, j);
                prop_assert_eq!(t[0][1], t[1][0]);
                prop_assert!(t[0][0] >= 0.0 && t[1][1] >= 0.0);
                let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
                prop_assert!(det >= -1e-12 * (t[0][0] * t[1][1]).max(1e-300));
            }
        }
    }

    #[test]
    fn coupling_is_linear(nx in 4usize..12, m in 2usize..4, a in -2.0f64..2.0, b in -2.0f64..2.0,
                          dv in vals(61), h1 in vals(67), h2 in vals(59)) {
        let g = grid(nx, nx, m);
        let d = cells(&g, m, &dv);
        let (x, y) = (cells(&g, m, &h1), cells(&g, m, &h2));
        let mut comb = x.clone();
        comb.scale(a);
        comb.axpy(b, &y);
        comb.fill_ghosts(BoundaryCondition::Neumann);
        let lhs = coupling_b(&g, &d, &comb);
        let mut rhs = coupling_b(&g, &d, &x);
        rhs.scale(a);
        rhs.axpy(b, &coupling_b(&g, &d, &y));
        let mut diff = lhs.clone();
        diff.axpy(-1.0, &rhs);
        prop_assert!(diff.max_abs() <= 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn stress_is_rotation_invariant(nx in 4usize..12, m in 2usize..4, a in 0.0f64..6.3, b in 0.0f64..6.3, dv in vals(83)) {
        let g = grid(nx, nx + 1, m);
        let d = cells(&g, m, &dv);
        let qd = rotate(&g, &d, &orthogonal(m, a, b));
        let base = elastic_stress_div(&g, &d);
        let mut diff = elastic_stress_div(&g, &qd);
        diff.axpy(-1.0, &base);
        prop_assert!(diff.max_abs() <= 1e-12 * base.max_abs().max(1.0) * 10.0);
    }

    #[test]
    fn constant_director_is_a_fixed_point(nx in 4usize..12, m in 2usize..4, dt in 1e-6f64..10.0, a in 0.0f64..6.3) {
        let g = grid(nx, nx, m);
        let mut p = vec![0.0; m];
        p[0] = a.cos();
        p[1] = a.sin();
        let s = State::equilibrium(&g, &p);
        for policy in [ConstraintPolicy::default(), ConstraintPolicy::renormalize()] {
            let (next, _) = director_step(&g, &s, &PhysicalParams::default(), dt, &Scheme::default(), &policy).unwrap();
            let err = next.d.interior().iter().zip(s.d.interior()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 4.0 * f64::EPSILON, "moved by {err:e}");
        }
    }

    #[test]
    fn renormalize_mode_has_no_drift(nx in 4usize..16, m in 2usize..4, a in proptest::array::uniform3(-0.4f64..0.4), dt in 1e-5f64..1e-2) {
        let g = grid(nx, nx, m);
        let d = smooth_director(&g, m, &a);
        let s = State::new(&g, FaceField::zeros(&g), d, 0.0).unwrap();
        let (next, _) = director_step(&g, &s, &PhysicalParams::default(), dt, &Scheme::default(), &ConstraintPolicy::renormalize()).unwrap();
        prop_assert!(constraint_drift(&next.d) <= 1e-14);
    }

    #[test]
    fn viscous_step_never_gains_kinetic_energy(nx in 4usize..16, uv in vals(89), dt in 1e-4f64..100.0) {
        let g = grid(nx, nx, 2);
        let (u0, _, _) = helmholtz_project(&g, &faces(&g, &uv), 1e-10).unwrap();
        let mut s = State::equilibrium(&g, &[1.0, 0.0]);
        s.u = u0;
        let scheme = Scheme { advection: AdvectionScheme::Off, ..Scheme::default() };
        let mut poisson = PoissonSolver::new(&g, PoissonMethod::Spectral);
        let (next, _) = momentum_step(&g, &s, &PhysicalParams::default(), dt, 1e-10, &scheme, &mut poisson).unwrap();
        prop_assert!(next.u.inner(&next.u, &g) <= s.u.inner(&s.u, &g) * (1.0 + 1e-12));
        prop_assert!(divergence(&g, &next.u).max_abs() <= 1e-10);
        prop_assert!(next.pi.mean(0).abs() <= 1e-12);
    }

    #[test]
    fn checkpoint_round_trip(nx in 4usize..12, ny in 4usize..12, m in 2usize..4,
                             uv in vals(41), dv in vals(37), pv in vals(13), t in 0.0f64..100.0) {
        let g = grid(nx, ny, m);
        let mut s = State::new(&g, faces(&g, &uv), cells(&g, m, &dv), t).unwrap();
        s.pi = cells(&g, 1, &pv);
        let back = decode(&encode(&s), &g).unwrap();
        prop_assert!(back.bitwise_eq(&s));
    }

    #[test]
    fn distance_is_rotation_invariant(nx in 4usize..12, m in 2usize..4, a in 0.0f64..6.3, b in 0.0f64..6.3,
                                      c in proptest::array::uniform3(-0.4f64..0.4)) {
        let g = grid(nx, nx, m);
        let d = smooth_director(&g, m, &c);
        let qd = rotate(&g, &d, &orthogonal(m, a, b));
        let s1 = State::new(&g, FaceField::zeros(&g), d, 0.0).unwrap();
        let s2 = State::new(&g, FaceField::zeros(&g), qd, 0.0).unwrap();
        let (x, y) = (distance_to_equilibria(&g, &s1), distance_to_equilibria(&g, &s2));
        prop_assert!((x - y).abs() <= 1e-12);
    }

    #[test]
    fn config_hash_tracks_semantics(seed in 0u64..1000, other in 0u64..1000, amp in 0.0f64..0.5) {
        let text = format!(
            "[grid]\nnx = 16\nny = 16\nlx = 1.0\nly = 1.0\nm = 2\n[time]\nt_end = 1.0\n[scenario]\nkind = \"director_relaxation\"\nseed = {seed}\nperturbation_amplitude = {amp:?}\n"
        );
        let a = ScenarioConfig::from_toml_str(&text).unwrap();
        // reformatted, reordered and commented: same meaning, same hash
        let shuffled = format!(
            "# comment\n[scenario]\nperturbation_amplitude = {amp:?}\nseed   = {seed}\nkind = \"director_relaxation\"\n\n[time]\nt_end = 1.0\n[grid]\nm = 2\nly = 1.0\nlx = 1.0\nny = 16\nnx = 16\n"
        );
        let b = ScenarioConfig::from_toml_str(&shuffled).unwrap();
        prop_assert_eq!(a.content_hash(), b.content_hash());
        // spelling out a default does not change the meaning either
        let explicit = ScenarioConfig::from_toml_str(&text.replace("[time]\n", "[time]\noutput_every = 1\n")).unwrap();
        prop_assert_eq!(a.content_hash(), explicit.content_hash());
        let mut c = a.clone();
        c.scenario.seed = other;
        prop_assert_eq!(a.content_hash() == c.content_hash(), seed == other);
        let mut k = a.clone();
        k.scenario.kind = ScenarioKind::CoupledDecay;
        prop_assert_ne!(a.content_hash(), k.content_hash());
    }
}
