//! Invariants checked against independent dense oracles and randomized inputs.

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use thinfilm::fem::{
    assemble_convection, assemble_mass, assemble_stiffness, assemble_weighted_stiffness, integral, lumped_mass_in,
    FieldState, PhysicsModel, Polynomial,
};
use thinfilm::krylov::{gmres, GmresConfig, Identity};
use thinfilm::mesh::{generate_rect_mesh, BoundaryTag, Frame, Point, Rect, SideSet, TriMesh};
use thinfilm::moving_mesh::{
    interpolate_field, redistribute_boundary, smooth_monitor, solve_harmonic_map, MonitorSmoother, SmoothingParams,
};
use thinfilm::scenarios::{simulation_for, Scenario, ScenarioConfig, Simulation};
use thinfilm::solver::{build_jacobian, imex_residual, TimeStepperConfig};
use thinfilm::Error;

/// Five-point Gauss–Legendre rule on [0, 1].
const GL: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_095),
    (0.230_765_344_947_158, 0.239_314_335_249_683),
    (0.5, 0.284_444_444_444_444),
    (0.769_234_655_052_842, 0.239_314_335_249_683),
    (0.953_089_922_969_332, 0.118_463_442_528_095),
];

/// `∫_T f` through the collapsed-square map; exact well beyond degree 4.
fn quad(v: [Point; 3], f: impl Fn(Point) -> f64) -> f64 {
    let jac = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs();
    let mut s = 0.0;
    for &(a, wa) in &GL {
        for &(b, wb) in &GL {
            let (l1, l2) = (a, b * (1.0 - a));
            let p = [
                v[0][0] + l1 * (v[1][0] - v[0][0]) + l2 * (v[2][0] - v[0][0]),
                v[0][1] + l1 * (v[1][1] - v[0][1]) + l2 * (v[2][1] - v[0][1]),
            ];
            s += wa * wb * (1.0 - a) * jac * f(p);
        }
    }
    s
}

/// Linear basis on one triangle from the inverse Vandermonde matrix:
/// `φ_k(x, z) = c[k][0] + c[k][1] x + c[k][2] z`.
fn basis(v: [Point; 3]) -> [[f64; 3]; 3] {
    let vm = Matrix3::new(1.0, v[0][0], v[0][1], 1.0, v[1][0], v[1][1], 1.0, v[2][0], v[2][1]);
    let inv = vm.try_inverse().expect("degenerate triangle");
    let mut c = [[0.0; 3]; 3];
    for k in 0..3 {
        let col: Vector3<f64> = inv.column(k).into();
        c[k] = [col[0], col[1], col[2]];
    }
    c
}

struct Dense {
    n: usize,
    a: Vec<Vec<f64>>,
}

impl Dense {
    fn new(n: usize) -> Self {
        Dense { n, a: vec![vec![0.0; n]; n] }
    }
}

fn dense_oracle(mesh: &TriMesh, entry: impl Fn([Point; 3], &[[f64; 3]; 3], usize, usize, &[usize; 3]) -> f64) -> Dense {
    let mut d = Dense::new(mesh.num_nodes());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = mesh.vertices(t, Frame::Physical);
        let c = basis(v);
        for i in 0..3 {
            for j in 0..3 {
                d.a[tri[i]][tri[j]] += entry(v, &c, i, j, tri);
            }
        }
    }
    d
}

fn max_diff(d: &Dense, s: &thinfilm::sparse::SparseOperator) -> f64 {
    let sd = s.to_dense();
    let mut m: f64 = 0.0;
    for i in 0..d.n {
        for j in 0..d.n {
            m = m.max((d.a[i][j] - sd[i][j]).abs());
        }
    }
    m
}

const SKEW: Rect = Rect {
    x0: -0.5,
    x1: 1.0,
    z0: 0.0,
    z1: 2.0,
};

/// Small rectangle mesh with interior nodes jittered by up to 0.3 h.
fn jittered(nx: usize, nz: usize, bounds: Rect, jitter: &[(f64, f64)]) -> TriMesh {
    let mut m = generate_rect_mesh(nx, nz, bounds, SideSet::NONE).unwrap();
    let (hx, hz) = (bounds.width() / nx as f64, bounds.height() / nz as f64);
    let mut k = 0;
    let pos: Vec<Point> = m
        .physical()
        .iter()
        .zip(m.tags())
        .map(|(p, tag)| {
            if *tag != BoundaryTag::Interior {
                return *p;
            }
            let (a, b) = jitter[k % jitter.len()];
            k += 1;
            [p[0] + 0.3 * hx * a, p[1] + 0.3 * hz * b]
        })
        .collect();
    m.set_physical(pos).unwrap();
    m
}

fn jitter_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4)
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3)
}

fn grad(c: &[f64; 3]) -> [f64; 2] {
    [c[1], c[2]]
}

fn eval(c: &[f64; 3], p: Point) -> f64 {
    c[0] + c[1] * p[0] + c[2] * p[1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_and_stiffness_match_dense_oracle((nx, nz) in dims(), jit in jitter_strategy()) {
        let mesh = jittered(nx, nz, SKEW, &jit);
        let mass = dense_oracle(&mesh, |v, c, i, j, _| quad(v, |p| eval(&c[i], p) * eval(&c[j], p)));
        prop_assert!(max_diff(&mass, &assemble_mass(&mesh).unwrap()) < 1e-10);
        let stiff = dense_oracle(&mesh, |v, c, i, j, _| {
            let (a, b) = (grad(&c[i]), grad(&c[j]));
            quad(v, |_| a[0] * b[0] + a[1] * b[1])
        });
        prop_assert!(max_diff(&stiff, &assemble_stiffness(&mesh).unwrap()) < 1e-10);
        let lumped = lumped_mass_in(&mesh, Frame::Physical).unwrap();
        for i in 0..mesh.num_nodes() {
            let row: f64 = mass.a[i].iter().sum();
            prop_assert!((row - lumped[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_stiffness_matches_dense_oracle(
        (nx, nz) in dims(),
        jit in jitter_strategy(),
        u in prop::collection::vec(-1.0..1.0f64, 16),
    ) {
        // quadratic mobility of a linear field: the edge-midpoint rule is exact
        let mesh = jittered(nx, nz, SKEW, &jit);
        let u = &u[..mesh.num_nodes()];
        let k = |s: f64| 1.0 + 0.5 * s + s * s;
        let oracle = dense_oracle(&mesh, |v, c, i, j, tri| {
            let (a, b) = (grad(&c[i]), grad(&c[j]));
            quad(v, |p| {
                let uh: f64 = (0..3).map(|m| u[tri[m]] * eval(&c[m], p)).sum();
                k(uh) * (a[0] * b[0] + a[1] * b[1])
            })
        });
        prop_assert!(max_diff(&oracle, &assemble_weighted_stiffness(&mesh, u, k).unwrap()) < 1e-10);
    }

    #[test]
    fn convection_matches_dense_oracle(
        (nx, nz) in dims(),
        jit in jitter_strategy(),
        u in prop::collection::vec(0.0..1.0f64, 16),
        s in -1.0..1.0f64,
    ) {
        let mesh = jittered(nx, nz, SKEW, &jit);
        let u = &u[..mesh.num_nodes()];
        let model = PhysicsModel::new(Polynomial::new(vec![0.1, -0.3, 2.0]), Polynomial::constant(1.0), 0.0, 1e-3, s).unwrap();
        let got = assemble_convection(&mesh, u, &model).unwrap();
        let mut want = vec![0.0; mesh.num_nodes()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let v = mesh.vertices(t, Frame::Physical);
            let c = basis(v);
            for i in 0..3 {
                want[tri[i]] += quad(v, |p| {
                    let uh: f64 = (0..3).map(|m| u[tri[m]] * eval(&c[m], p)).sum();
                    (0.1 - 0.3 * uh + 2.0 * uh * uh - s * uh) * c[i][2]
                });
            }
        }
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn smoother_keeps_range_and_mean(
        nx in 2usize..14,
        nz in 2usize..14,
        logs in prop::collection::vec(-3.0..5.0f64, 225),
        sx in 0.5..4.0f64,
        sz in 0.5..4.0f64,
    ) {
        let mesh = generate_rect_mesh(nx, nz, Rect::new(0.0, 2.0, -1.0, 3.0), SideSet::BOTTOM_TOP).unwrap();
        let m: Vec<f64> = logs[..mesh.num_nodes()].iter().map(|l| l.exp()).collect();
        let params = SmoothingParams::new(sx, sz).unwrap();
        let smoother = MonitorSmoother::new(&mesh, params).unwrap();
        let out = smoother.smooth(&m);
        let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10));
        let mean = |v: &[f64]| v.iter().zip(smoother.weights()).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((mean(&out) - mean(&m)).abs() <= 1e-8 * mean(&m).abs(),
            "mean {} -> {}", mean(&m), mean(&out));
    }

    #[test]
    fn harmonic_map_ignores_monitor_scale(
        logs in prop::collection::vec(-2.0..2.0f64, 169),
        c in prop::sample::select(vec![1e-3, 0.37, 2.0, 85.0, 1e4]),
    ) {
        let mesh = generate_rect_mesh(12, 12, Rect::new(0.0, 1.0, 0.0, 4.0), SideSet::NONE).unwrap();
        let m: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let m = smooth_monitor(&mesh, &m, &SmoothingParams::default()).unwrap();
        let scaled: Vec<f64> = m.iter().map(|v| c * v).collect();
        let a = solve_harmonic_map(&mesh, &m, &redistribute_boundary(&mesh, &m).unwrap()).unwrap();
        let b = solve_harmonic_map(&mesh, &scaled, &redistribute_boundary(&mesh, &scaled).unwrap()).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields(
        jit in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64),
        coef in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
    ) {
        let old = generate_rect_mesh(8, 8, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let new = jittered(8, 8, Rect::new(0.0, 1.0, 0.0, 1.0), &jit);
        let f = |p: Point| coef.0 + coef.1 * p[0] + coef.2 * p[1];
        let vals: Vec<f64> = old.physical().iter().map(|p| f(*p)).collect();
        let out = interpolate_field(&old, &vals, new.physical());
        for (p, v) in new.physical().iter().zip(&out) {
            prop_assert!((f(*p) - v).abs() < 1e-12);
        }
    }
}

fn film(beta: f64, gamma: f64) -> PhysicsModel {
    PhysicsModel::new(Polynomial::square_minus_cube(), Polynomial::cubic(), beta, gamma, 0.1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn neumann_steps_conserve_mass(
        amp in prop::collection::vec(-0.2..0.2f64, 3),
        beta in prop::sample::select(vec![0.0, 0.5]),
        dt in prop::sample::select(vec![1e-3, 1e-2]),
    ) {
        let mesh = generate_rect_mesh(8, 10, Rect::new(0.0, 1.0, 0.0, 1.25), SideSet::NONE).unwrap();
        let u0 = move |p: Point| {
            0.5 + amp[0] * (3.0 * p[0]).cos() + amp[1] * (5.0 * p[1]).sin() + amp[2] * (p[0] * p[1] * 7.0).cos()
        };
        let mut sim = Simulation::new(mesh, film(beta, 1e-3), &u0, TimeStepperConfig::with_dt(dt), None).unwrap();
        let mut before = integral(&sim.mesh, &sim.state.u);
        for _ in 0..3 {
            sim.advance().unwrap();
            let after = integral(&sim.mesh, &sim.state.u);
            prop_assert!((after - before).abs() <= 1e-9 * before.abs(), "{before} -> {after}");
            before = after;
        }
    }
}

#[test]
fn block_preconditioner_cuts_krylov_iterations_on_case_one() {
    let cfg = ScenarioConfig::defaults(Scenario::Tw1);
    let sim = simulation_for(&cfg).unwrap();
    let stepper = TimeStepperConfig::with_dt(cfg.dt);
    let sys = build_jacobian(&sim.mesh, &sim.model, &sim.state, &stepper).unwrap();
    let (f0, f1) = imex_residual(&sim.mesh, &sim.model, &sim.state, &sim.state, &stepper).unwrap();
    let b: Vec<f64> = f0.iter().chain(&f1).map(|v| -v).collect();
    let cfg_k = GmresConfig {
        max_iter: 3000,
        ..Default::default()
    };
    let pre = sys.preconditioner(stepper.inner_solver).unwrap();
    let mut x = vec![0.0; b.len()];
    let with = gmres(&sys, &pre, &b, &mut x, &cfg_k).unwrap().iterations;
    let mut x = vec![0.0; b.len()];
    let without = match gmres(&sys, &Identity, &b, &mut x, &cfg_k) {
        Ok(o) => o.iterations,
        Err(Error::KrylovNonConvergence { iterations, .. }) => iterations,
        Err(e) => panic!("{e}"),
    };
    eprintln!("GMRES iterations: preconditioned {with}, plain {without}");
    assert!(with < without);
}

#[test]
fn moved_meshes_stay_positive_under_random_fields() {
    use thinfilm::moving_mesh::{mesh_move_cycle, MonitorKind, MonitorSpec, MovingMeshParams};
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(16));
    runner
        .run(&(prop::collection::vec(-1.0..1.0f64, 4), 0.1..0.9f64), |(c, kappa)| {
            let mut mesh = generate_rect_mesh(10, 10, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
            let u: Vec<f64> = mesh
                .physical()
                .iter()
                .map(|p| (8.0 * (p[0] - 0.5 + 0.2 * c[0])).tanh() * (8.0 * (p[1] - 0.5 + 0.2 * c[1])).tanh() + c[2] * p[0] * p[1] + c[3])
                .collect();
            let n = u.len();
            let mut state = FieldState::new(u, vec![0.0; n], 0.0).unwrap();
            let spec = MonitorSpec::new(MonitorKind::Curvature, kappa).unwrap();
            mesh_move_cycle(&mut mesh, &mut state, &spec, &SmoothingParams::default(), &MovingMeshParams::default()).unwrap();
            prop_assert!(mesh.min_area(Frame::Physical) > 0.0);
            prop_assert!((mesh.total_area(Frame::Physical) - 1.0).abs() < 1e-12);
            Ok(())
        })
        .unwrap();
}

proptest! {
    #[test]
    fn finalized_operator_ignores_triplet_order(
        entries in prop::collection::vec((0usize..6, 0usize..6, -1.0e3..1.0e3f64), 1..80),
        seed in any::<u64>(),
    ) {
        use thinfilm::sparse::TripletBuilder;
        let build = |order: &[(usize, usize, f64)]| {
            let mut b = TripletBuilder::new(6);
            for &(r, c, v) in order {
                b.add(r, c, v);
            }
            b.finalize(false)
        };
        let mut shuffled = entries.clone();
        // Fisher–Yates driven by a tiny LCG so the permutation is reproducible
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let (a, b) = (build(&entries), build(&shuffled));
        let bits = |m: &thinfilm::sparse::SparseOperator| {
            m.to_dense().concat().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(bits(&a), bits(&b));
    }
}
