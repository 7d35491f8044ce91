use std::fs;

use thinfilm::mesh::{generate_rect_mesh_with, Diagonal};
use thinfilm::scenarios::config::ScenarioConfig;
use thinfilm::scenarios::initial::InitialCondition;
use thinfilm::scenarios::runners::film_model;
use thinfilm::scenarios::{run_meshdemo, run_tw, Scenario, Simulation};
use thinfilm::solver::TimeStepperConfig;

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "# coarse run\nscenario = tw3\nh = 0.125\nkappa = 0.4\nmonitor = arclength\n").unwrap();
    let mut cfg = ScenarioConfig::load(&path, None).unwrap();
    assert_eq!(cfg.scenario, Scenario::Tw3);
    assert_eq!(cfg.h, 0.125);
    assert_eq!(cfg.gamma, 0.001);
    cfg.set("T", "5").unwrap();
    assert_eq!(cfg.t_end, 5.0);
    assert!(cfg.set("nonsense", "1").is_err());
    assert!(ScenarioConfig::parse("h = 0.1", None).is_err());
    assert!(ScenarioConfig::parse("scenario = tw1\nkappa = 1.5", None).is_err());
    assert!(ScenarioConfig::load(&dir.path().join("absent.cfg"), Some(Scenario::Tw1)).is_err());
}

#[test]
fn identical_runs_write_identical_csv() {
    let run = |dir: &std::path::Path| {
        let mut cfg = ScenarioConfig::defaults(Scenario::Tw1);
        cfg.h = 0.125;
        cfg.t_end = 3.0;
        cfg.snapshot_every = 0;
        cfg.out_dir = Some(dir.to_path_buf());
        run_tw(&cfg).unwrap();
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());
    for name in ["tw1_history.csv", "tw1_profile.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert!(x == y, "{name} differs between runs");
    }
}

/// The finger data are even about x = 7.5; mirroring a mesh with SW–NE
/// diagonals gives the SE–NW mesh, so the two fixed-mesh runs must be mirror
/// images of each other.
#[test]
fn finger_run_is_mirror_symmetric() {
    let mut cfg = ScenarioConfig::defaults(Scenario::Finger);
    cfg.moving = false;
    let (nx, nz) = (30, 60);
    let ic = InitialCondition::new(&cfg);
    let run = |diag| {
        let mesh = generate_rect_mesh_with(nx, nz, cfg.bounds, cfg.dirichlet_sides(), diag).unwrap();
        let mut sim =
            Simulation::new(mesh, film_model(&cfg).unwrap(), &|p| ic.eval(p), TimeStepperConfig::with_dt(cfg.dt), None)
                .unwrap();
        sim.run_until(10.0, |_, _| Ok(())).unwrap();
        sim
    };
    let a = run(Diagonal::SwNe);
    let b = run(Diagonal::SeNw);
    let mut worst: f64 = 0.0;
    for j in 0..=nz {
        for i in 0..=nx {
            let ua = a.state.u[a.mesh.node_index(i, j)];
            let ub = b.state.u[b.mesh.node_index(nx - i, j)];
            worst = worst.max((ua - ub).abs());
        }
    }
    assert!(worst <= 1e-6, "mirror mismatch {worst:e}");
    // and the perturbation has not been smoothed away
    let col = |i: usize| (0..=nz).map(|j| a.state.u[a.mesh.node_index(i, j)]).sum::<f64>();
    assert!((col(0) - col(nx / 2)).abs() > 1e-3);
}

#[test]
fn meshdemo_writes_density_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::defaults(Scenario::Meshdemo);
    cfg.h = 0.05;
    cfg.out_dir = Some(dir.path().to_path_buf());
    let run = run_meshdemo(&cfg).unwrap();
    assert!(run.converged);
    let (header, rows) = thinfilm::io::read_csv(&dir.path().join("meshdemo_k0.50.csv")).unwrap();
    assert_eq!(header, ["index", "ratio", "axis"]);
    assert_eq!(rows.len(), run.x_ratios.ratios().count() + run.z_ratios.ratios().count());
    assert!(rows.iter().any(|r| r[2] == "x") && rows.iter().any(|r| r[2] == "z"));
    assert!(dir.path().join("meshdemo_k0.50.vtk").exists());
}
