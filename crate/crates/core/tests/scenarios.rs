use std::path::Path;

use nematic::analysis::{Block, assemble_linearization, fit_decay_rate};
use nematic::director::ConstraintPolicy;
use nematic::error::Error;
use nematic::flow::PhysicalParams;
use nematic::harness::checkpoint::{checkpoint_read, checkpoint_write};
use nematic::harness::init::velocity_profile;
use nematic::harness::{RunOptions, ScenarioConfig, ScenarioKind, VerdictStatus, run_scenario, run_scenario_full};
use nematic::mesh::{CellField, Grid, GridSpec, State};
use nematic::operators::AdvectionScheme;
use nematic::solver::Scheme;
use nematic::stepper::Stepper;

fn config(kind: &str, n: usize, extra: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(&format!(
        "[grid]\nnx = {n}\nny = {n}\nlx = 1.0\nly = 1.0\nm = 2\n[time]\nt_end = 0.05\n[scenario]\nkind = \"{kind}\"\n{extra}"
    ))
    .unwrap()
}

#[test]
fn zero_amplitude_is_trivial() {
    let cfg = config("perturbed_equilibrium", 12, "perturbation_amplitude = 0.0\n");
    let out = run_scenario_full(&cfg, &RunOptions::in_memory()).unwrap();
    assert_eq!(out.summary.steps, 0);
    assert_eq!(out.summary.final_energy, 0.0);
    assert!(out.summary.all_passed(), "{:?}", out.summary.failures());
    assert!(out.summary.verdicts.values().all(|v| v.status != VerdictStatus::Skip));
}

#[test]
fn outputs_and_summary_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("perturbed_equilibrium", 12, "perturbation_amplitude = 0.05\nvelocity_amplitude = 0.05\n");
    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), snapshots: true, analysis: false };
    let summary = run_scenario(&cfg, &opts).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(nematic::diagnostics::CSV_HEADER));
    assert_eq!(lines.count(), summary.steps + 1);
    let jsonl = std::fs::read_to_string(dir.path().join("summary.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
    assert_eq!(last["record"], "summary");
    assert_eq!(last["config_hash"], cfg.content_hash());
    for v in last["verdicts"].as_object().unwrap().values() {
        assert!(v["measured"].is_number() && v["threshold"].is_number());
    }
    let snaps = std::fs::read_dir(dir.path().join("snapshots")).unwrap().count();
    assert_eq!(snaps, summary.steps + 1);
    let grid = cfg.grid().unwrap();
    let last_snap = dir.path().join("snapshots").join(format!("step_{:08}.elcp", summary.steps));
    assert_eq!(checkpoint_read(&last_snap, &grid).unwrap().t, summary.t_final);
}

#[test]
fn failing_step_reports_index_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(GridSpec::unit_square(8, 2)).unwrap();
    // a director with a hole at one cell degenerates under renormalisation
    let d = CellField::from_fn(&grid, 2, |x, y, v| {
        let near = (x - 0.5).abs() < 0.1 && (y - 0.5).abs() < 0.1;
        v[0] = if near { 0.1 } else { 1.0 };
    });
    let state = State::new(&grid, nematic::mesh::FaceField::zeros(&grid), d, 0.0).unwrap();
    let cp = dir.path().join("start.elcp");
    checkpoint_write(&state, &cp).unwrap();
    let mut cfg = config(
        "custom_checkpoint",
        8,
        &format!("checkpoint = \"{}\"\n[policy]\nmode = \"renormalize\"\n", cp.display()),
    );
    cfg.scenario.kind = ScenarioKind::CustomCheckpoint;
    let out = dir.path().join("out");
    match run_scenario(&cfg, &RunOptions::to_dir(&out)) {
        Err(Error::StepFailed { step, checkpoint: Some(path), .. }) => {
            assert_eq!(step, 0);
            assert!(path.exists());
            assert!(checkpoint_read(&path, &grid).unwrap().bitwise_eq(&state));
        }
        other => panic!("expected a step failure, got {other:?}"),
    }
}

#[test]
fn custom_checkpoint_resumes_where_it_left_off() {
    let cfg = ScenarioConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/custom_checkpoint.toml")).unwrap();
    let grid = cfg.grid().unwrap();
    let start = checkpoint_read(cfg.scenario.checkpoint.as_ref().unwrap(), &grid).unwrap();
    let mut short = cfg.clone();
    short.time.t_end = start.t + 10.0 * cfg.dt();
    let out = run_scenario_full(&short, &RunOptions::in_memory()).unwrap();
    assert_eq!(out.summary.steps, 10);
    assert!((out.final_state.t - short.time.t_end).abs() < 1e-12);
}

/// Kinetic energy of a pure Stokes decay follows the smallest Stokes
/// eigenvalue of the same grid.
#[test]
fn stokes_decay_matches_dense_eigenvalue() {
    let grid = Grid::new(GridSpec::unit_square(16, 2)).unwrap();
    let params = PhysicalParams::default();
    let op = assemble_linearization(&grid, &params, Block::Stokes).unwrap();
    let lambda1 = op.dense_eigenvalues().unwrap()[0];
    let scheme = Scheme { advection: AdvectionScheme::Off, elastic_coupling: false, ..Scheme::default() };
    let mut stepper = Stepper::new(&grid, params, scheme, ConstraintPolicy::default(), 1e-12).unwrap();
    let mut s = State::equilibrium(&grid, &[1.0, 0.0]);
    s.u = velocity_profile(&grid, 11, 1.0);
    let dt = 1e-4;
    let (mut t, mut e) = (Vec::new(), Vec::new());
    for _ in 0..4000 {
        s = stepper.step(&s, dt).unwrap().0;
        t.push(s.t);
        e.push(0.5 * s.u.inner(&s.u, &grid));
    }
    let fit = fit_decay_rate(&t, &e, (0.2, 0.4)).unwrap();
    // backward Euler decays as ln(1 + 2 lambda dt)/dt for the energy
    let predicted = (1.0 + dt * lambda1).ln() * 2.0 / dt;
    assert!((fit.rate - predicted).abs() < 1e-3 * predicted, "{} vs {}", fit.rate, predicted);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = "[grid]\nnx = 8\nny = 8\nlx = 1.0\nly = 1.0\nm = 2\n[time]\nt_end = 1.0\n[scenario]\nkind = \"coupled_decay\"\n";
    assert!(ScenarioConfig::from_toml_str(base).is_ok());
    assert!(ScenarioConfig::from_toml_str(&base.replace("t_end", "tend")).is_err());
    assert!(ScenarioConfig::from_toml_str(&base.replace("t_end = 1.0", "t_end = 1.0\ndt = 2.0")).is_err());
    assert!(ScenarioConfig::from_toml_str(&base.replace("t_end = 1.0", "t_end = 1.0\noutput_every = 0")).is_err());
    assert!(ScenarioConfig::from_toml_str(&base.replace("m = 2", "m = 4")).is_err());
    assert!(ScenarioConfig::from_toml_str(&format!("{base}[scheme]\nadvection = \"upwnd\"\n")).is_err());
}
