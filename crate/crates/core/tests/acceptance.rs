//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Tolerances are pinned below; oracles are written out here,
//! independently of the library's own closed forms.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rml_core::closed_forms::{hyperbolic_oracle_distance, HalfPlaneMetric, SpdAffineMetric};
use rml_core::geo::*;
use rml_core::graph::build_knn_graph;
use rml_core::harness::io::metric_to_toml;
use rml_core::harness::*;
use rml_core::learn::{fit, FitConfig, Loss, Objective};
use rml_core::manifold::{IdentityMetric, MetricField};
use rml_core::metrics::{ConstantMetric, DensityMetric, KernelMetric, MetricSpec, Parametrized};
use rml_core::objectives::*;
use rml_core::Result;

// criterion 1
const EXP_REL_TOL: f64 = 1e-5;
const EXP_ORDER_RATIO: f64 = 8.0;
// criterion 2
const DIST_REL_TOL: f64 = 1e-3;
// criterion 3
const ODE_TRANSPORT_TOL: f64 = 1e-4;
const LADDER_MIN_ORDER: f64 = 1.0;
const FANNING_TOL: f64 = 1e-3;
/// Below this the ladder error is shooting round-off (tol 1e-10, amplified
/// by 1/rung length); an observed order is undefined there.
const LADDER_NOISE_FLOOR: f64 = 1e-6;
// criterion 4
const SPEED_DRIFT_TOL: f64 = 1e-5;
const HAMILTONIAN_DRIFT_TOL: f64 = 1e-6;
const TRANSPORT_NORM_DRIFT_TOL: f64 = 1e-3;
// criterion 5
const ROUNDTRIP_REL_TOL: f64 = 1e-4;
const LENGTH_ENERGY_EQ_TOL: f64 = 1e-4;
// criterion 6
const SOLVER_PAIRWISE_TOL: f64 = 0.02;
const SOLVER_ORACLE_TOL: f64 = 0.01;
/// Grid-Dijkstra oracle for (−1, 1) → (1, 1), frozen from the first run.
const HYPERBOLIC_ORACLE_FROZEN: f64 = 1.7627478658;
// criterion 7
const RECOVERY_TOL: f64 = 1e-3;
const LSQ_ORACLE_TOL: f64 = 1e-4;
// criterion 8
const SPIRAL_GRAPH_MIN_ACC: f64 = 0.95;
const SPIRAL_EUCLID_MAX_ACC: f64 = 0.85;
const SPIRAL_BANDWIDTH: f64 = 0.3;
const SPIRAL_FLOOR: f64 = 1e-2;
const SPIRAL_GRAPH_K: usize = 10;
const VARIANT_ANGLE: f64 = PI / 4.0;
const VARIANT_Y_SCALE: f64 = 0.2;
// criterion 9
const TRIPLET_MAX_ITER: usize = 2000;
// criterion 10
const KS_N: usize = 10_000;
/// Asymptotic 5% critical value of the one-sample KS statistic times √n.
const KS_CRITICAL: f64 = 1.358;

type Outcome = Result<(bool, String)>;
type TestField = (&'static str, Box<dyn MetricField>, DVector<f64>, DVector<f64>);
type Criterion = (&'static str, fn() -> Outcome);

fn v(c: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(c)
}

// ---- independent SPD closed forms -------------------------------------

fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// `Σ^{½} exp(t Σ^{-½} V Σ^{-½}) Σ^{½}`
fn oracle_exp(sigma: &DMatrix<f64>, vm: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let s = sym_fn(sigma, f64::sqrt);
    let si = sym_fn(sigma, |l| 1.0 / l.sqrt());
    &s * sym_fn(&(&si * vm * &si * t), f64::exp) * &s
}

/// `E W Eᵀ` with `E = Σ^{½} exp(½ Σ^{-½} V Σ^{-½}) Σ^{-½}`
fn oracle_transport(sigma: &DMatrix<f64>, vm: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sym_fn(sigma, f64::sqrt);
    let si = sym_fn(sigma, |l| 1.0 / l.sqrt());
    let e = &s * sym_fn(&(&si * vm * &si * 0.5), f64::exp) * &si;
    &e * w * e.transpose()
}

fn rotation(a: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

/// `g = (1 + x²)²` on the line: volume density `1 + x²`.
struct QuarticLine;

impl MetricField for QuarticLine {
    fn dim(&self) -> usize {
        1
    }
    fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, (1.0 + x[0] * x[0]).powi(2)))
    }
}

fn density_field() -> DensityMetric {
    let anchors = vec![v(&[0.0, 0.0]), v(&[1.0, 0.3]), v(&[-0.5, 0.8]), v(&[0.4, -0.7]), v(&[-0.9, -0.4])];
    DensityMetric::new(anchors, 1.0, 0.1).unwrap()
}

fn kernel_field() -> KernelMetric {
    let centers = vec![v(&[0.0, 0.0]), v(&[1.0, 1.0])];
    let locals = vec![
        rml_core::manifold::SpdMatrix::from_diagonal(&[3.0, 1.0]).unwrap(),
        rml_core::manifold::SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0])).unwrap(),
    ];
    KernelMetric::new(centers, locals, 0.8, 0.2).unwrap()
}

/// Test fields with a base point and a velocity inside the normal
/// neighborhood.
fn test_fields() -> Vec<TestField> {
    let spd = SpdAffineMetric::new(2).unwrap();
    let c = spd.chart();
    let sigma = DMatrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 0.8]);
    let vm = DMatrix::from_row_slice(2, 2, &[0.4, -0.2, -0.2, -0.3]);
    let (x, xv) = (c.vectorize(&sigma), c.vectorize(&vm));
    vec![
        ("spd", Box::new(spd), x, xv),
        ("half-plane", Box::new(HalfPlaneMetric), v(&[0.0, 1.0]), v(&[0.8, 0.3])),
        ("density", Box::new(density_field()), v(&[0.1, 0.1]), v(&[0.4, 0.2])),
        ("kernel", Box::new(kernel_field()), v(&[0.2, 0.1]), v(&[0.5, 0.4])),
        ("constant", Box::new(ConstantMetric::direct(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap()), v(&[0.3, -0.2]), v(&[1.0, 0.7])),
    ]
}

// ---- criteria ---------------------------------------------------------

fn c1_spd_exp() -> Outcome {
    let spd = SpdAffineMetric::new(2)?;
    let c = spd.chart();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = SolverConfig::default().with_steps(200);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let sigma = random_spd(&mut rng, 2);
        let mut vm = random_sym(&mut rng, 2);
        vm /= vm.norm().max(1.0);
        let exact = oracle_exp(&sigma, &vm, 1.0);
        let got = c.devectorize(&exp_point(&spd, &c.vectorize(&sigma), &c.vectorize(&vm), &cfg)?);
        worst = worst.max((got - &exact).norm() / exact.norm());
    }
    // order: unit-norm velocity, 20 → 40 steps (above the round-off floor)
    let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]);
    let vm = DMatrix::from_row_slice(2, 2, &[0.6, -0.4, -0.4, -0.5]);
    let vm = &vm / vm.norm();
    let exact = oracle_exp(&sigma, &vm, 1.0);
    let err = |steps| -> Result<f64> {
        let e = exp_point(&spd, &c.vectorize(&sigma), &c.vectorize(&vm), &SolverConfig::default().with_steps(steps))?;
        Ok((c.devectorize(&e) - &exact).norm() / exact.norm())
    };
    let (e20, e40) = (err(20)?, err(40)?);
    let ratio = e20 / e40;
    Ok((
        worst < EXP_REL_TOL && ratio >= EXP_ORDER_RATIO,
        format!("max rel err {worst:.2e} (< {EXP_REL_TOL:e}); step-halving ratio {ratio:.1} (≥ {EXP_ORDER_RATIO})"),
    ))
}

fn c2_spd_distance() -> Outcome {
    let spd = SpdAffineMetric::new(2)?;
    let c = spd.chart();
    let cfg = SolverConfig::default();
    let id = c.vectorize(&DMatrix::identity(2, 2));
    let sigmas = [0.25, 0.5, 1.5, 4.0];
    let mut worst: f64 = 0.0;
    for (i, &s1) in sigmas.iter().enumerate() {
        for &s2 in &sigmas[i..] {
            let r = rotation(0.3 + s1 * s2);
            let m = &r * DMatrix::from_diagonal(&v(&[s1, s2])) * r.transpose();
            let exact = (s1.ln().powi(2) + s2.ln().powi(2)).sqrt();
            let d = riemannian_distance(&spd, &id, &c.vectorize(&m), DistanceMethod::Shooting, &cfg)?;
            worst = worst.max((d - exact).abs() / exact);
        }
    }
    Ok((worst < DIST_REL_TOL, format!("max rel err {worst:.2e} over σ ∈ {{1/4, 1/2, 3/2, 4}}² (< {DIST_REL_TOL:e})")))
}

fn c3_spd_transport() -> Outcome {
    let spd = SpdAffineMetric::new(2)?;
    let c = spd.chart();
    let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]);
    let vm = DMatrix::from_row_slice(2, 2, &[0.6, -0.4, -0.4, -0.5]);
    let vm = &vm / vm.norm();
    let wm = DMatrix::from_row_slice(2, 2, &[0.2, 0.5, 0.5, 0.1]);
    let exact = oracle_transport(&sigma, &vm, &wm);
    let cfg = SolverConfig::default();
    let (x, xv, xw) = (c.vectorize(&sigma), c.vectorize(&vm), c.vectorize(&wm));
    let curve = exp_map(&spd, &x, &xv, &cfg)?;
    let ode = (c.devectorize(&parallel_transport_ode(&spd, &curve, &xw)?) - &exact).norm();
    let rungs = [8, 16, 32];
    let mut schild = Vec::new();
    let mut pole = Vec::new();
    for &r in &rungs {
        schild.push((c.devectorize(&schild_ladder(&spd, &curve, &xw, r, &cfg)?) - &exact).norm());
        pole.push((c.devectorize(&pole_ladder(&spd, &curve, &xw, r, &cfg)?) - &exact).norm());
    }
    // observed order from the two finest levels, unless the scheme sits at
    // the round-off floor throughout (pole ladder is exact on symmetric spaces)
    let order = |e: &[f64]| (e[1] / e[2]).log2();
    let converges = |e: &[f64]| {
        e.iter().all(|&x| x < LADDER_NOISE_FLOOR) || (order(e) >= LADDER_MIN_ORDER && e.windows(2).all(|w| w[1] < w[0]))
    };
    let (os, op) = (order(&schild), order(&pole));
    let fmt = |e: &[f64]| e.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>().join("/");
    let (schild_s, pole_s) = (fmt(&schild), fmt(&pole));
    let fan = (c.devectorize(&fanning_scheme(&spd, &x, &xv, &xw, 100, &cfg)?) - &exact).norm();
    // pole ladder on a non-symmetric field, against ODE transport
    let dens = density_field();
    let (dx, dv, dw) = (v(&[0.1, 0.1]), v(&[0.4, 0.2]), v(&[-0.2, 0.3]));
    let dcurve = exp_map(&dens, &dx, &dv, &cfg)?;
    let dref = parallel_transport_ode(&dens, &dcurve, &dw)?;
    let mut dpole = Vec::new();
    for &r in &[2, 4, 8] {
        dpole.push((pole_ladder(&dens, &dcurve, &dw, r, &cfg)? - &dref).norm());
    }
    let od = order(&dpole);
    let ok = ode < ODE_TRANSPORT_TOL && converges(&schild) && converges(&pole) && converges(&dpole) && fan < FANNING_TOL;
    Ok((
        ok,
        format!(
            "ode err {ode:.1e}; schild errs {schild_s} order {os:.4}; pole errs {pole_s} order {op:.2} (floor {LADDER_NOISE_FLOOR:e}); density-field pole errs {} order {od:.2}; fanning(100) err {fan:.1e}",
            fmt(&dpole)
        ),
    ))
}

fn c4_conservation() -> Outcome {
    let rk4 = SolverConfig::default();
    let leap = SolverConfig::default().with_integrator(Integrator::HamiltonianLeapfrog);
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, field, x, xv) in test_fields().into_iter().take(3) {
        let drift = |e: &[f64]| e.iter().map(|h| (h - e[0]).abs() / e[0]).fold(0.0, f64::max);
        let path = exp_map(&*field, &x, &xv, &rk4)?;
        let speed: Vec<f64> = energy_profile(&*field, &path)?.iter().map(|e| (2.0 * e).sqrt()).collect();
        let ds = drift(&speed);
        let lp = exp_map(&*field, &x, &xv, &leap)?;
        let dh = drift(&energy_profile(&*field, &lp)?);
        // transport a second vector along the RK4 geodesic
        let w = DVector::from_fn(x.len(), |i, _| if i % 2 == 0 { 0.3 } else { -0.2 });
        let wt = parallel_transport_ode(&*field, &path, &w)?;
        let n0 = rml_core::linalg::quad(&rml_core::manifold::metric(&*field, &x)?, &w, &w).sqrt();
        let n1 = rml_core::linalg::quad(&rml_core::manifold::metric(&*field, path.end())?, &wt, &wt).sqrt();
        let dt = (n1 - n0).abs() / n0;
        ok &= ds < SPEED_DRIFT_TOL && dh < HAMILTONIAN_DRIFT_TOL && dt < TRANSPORT_NORM_DRIFT_TOL;
        lines.push(format!("{name}: speed {ds:.1e} H {dh:.1e} |w|_g {dt:.1e}"));
    }
    Ok((ok, lines.join("; ")))
}

fn c5_roundtrip_and_length() -> Outcome {
    let cfg = SolverConfig::default();
    let mut ok = true;
    let mut worst_rt: f64 = 0.0;
    let mut worst_eq: f64 = 0.0;
    for (_, field, x, xv) in test_fields() {
        let y = exp_point(&*field, &x, &xv, &cfg)?;
        let back = log_map_shooting(&*field, &x, &y, &cfg)?;
        worst_rt = worst_rt.max((&back - &xv).norm() / xv.norm());
        let y2 = exp_point(&*field, &x, &back, &cfg)?;
        worst_rt = worst_rt.max((&y2 - &y).norm() / (&y - &x).norm());
        let path = exp_map(&*field, &x, &xv, &cfg)?;
        let (l, e) = (path_length(&*field, &path)?, path_energy(&*field, &path)?);
        worst_eq = worst_eq.max((e.sqrt() - l).abs() / l);
    }
    ok &= worst_rt < ROUNDTRIP_REL_TOL && worst_eq < LENGTH_ENERGY_EQ_TOL;
    // 100 random smooth curves across three fields
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fields = test_fields();
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for i in 0..100 {
        let (_, field, x, _) = &fields[i % 3];
        let d = x.len();
        let amp = 0.2;
        let coef: Vec<(f64, f64, f64)> = (0..d).map(|_| (rng.random_range(-amp..amp), rng.random_range(-amp..amp), rng.random_range(1.0..3.0))).collect();
        let n = 65;
        let times: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let points = times
            .iter()
            .map(|&t| DVector::from_fn(d, |j, _| x[j] + coef[j].0 * t + coef[j].1 * (coef[j].2 * PI * t).sin()))
            .collect();
        let velocities = times
            .iter()
            .map(|&t| DVector::from_fn(d, |j, _| coef[j].0 + coef[j].1 * coef[j].2 * PI * (coef[j].2 * PI * t).cos()))
            .collect();
        let path = GeodesicPath::new(times, points, velocities)?;
        let (l, e) = (path_length(&**field, &path)?, path_energy(&**field, &path)?);
        if l > e.sqrt() * (1.0 + 1e-14) {
            violations += 1;
        }
        min_gap = min_gap.min(e.sqrt() - l);
    }
    ok &= violations == 0;
    Ok((
        ok,
        format!(
            "exp/log roundtrip max rel {worst_rt:.1e}; geodesic |√E − L|/L max {worst_eq:.1e}; L ≤ √E violations {violations}/100 (min gap {min_gap:.1e})"
        ),
    ))
}

fn c6_hyperbolic() -> Outcome {
    let (a, b) = (v(&[-1.0, 1.0]), v(&[1.0, 1.0]));
    let cfg = SolverConfig::default();
    let oracle = hyperbolic_oracle_distance(&a, &b)?;
    let frozen_ok = (oracle - HYPERBOLIC_ORACLE_FROZEN).abs() < 1e-9;
    let mut ds = Vec::new();
    for m in [DistanceMethod::Shooting, DistanceMethod::Bvp, DistanceMethod::curve()] {
        ds.push(riemannian_distance(&HalfPlaneMetric, &a, &b, m, &SolverConfig { bvp_nodes: 64, ..cfg.clone() })?);
    }
    let mut pair: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            pair = pair.max((ds[i] - ds[j]).abs() / ds[j]);
        }
    }
    let orc = ds.iter().map(|d| (d - oracle).abs() / oracle).fold(0.0, f64::max);
    Ok((
        frozen_ok && pair < SOLVER_PAIRWISE_TOL && orc < SOLVER_ORACLE_TOL,
        format!(
            "shooting {:.6} bvp {:.6} curve {:.6}; oracle {oracle:.10} (frozen match {frozen_ok}); pairwise {pair:.1e}; vs oracle {orc:.1e}",
            ds[0], ds[1], ds[2]
        ),
    ))
}

fn c7_mahalanobis() -> Outcome {
    let g_star = DMatrix::from_diagonal(&v(&[4.0, 1.0]));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut obs = Vec::new();
    for _ in 0..200 {
        let x = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let d = &x - &y;
        let d2 = d.dot(&(&g_star * &d)) * (1.0 + 1e-5 * rng.random_range(-1.0..1.0f64));
        obs.push(DistanceObservation { x, y, distance: d2.sqrt(), weight: 1.0 });
    }
    // normal equations in (G11, G12, G22) for Σ (d² − ΔᵀGΔ)²
    let mut ata = DMatrix::<f64>::zeros(3, 3);
    let mut atb = DVector::<f64>::zeros(3);
    for o in &obs {
        let d = &o.x - &o.y;
        let row = v(&[d[0] * d[0], 2.0 * d[0] * d[1], d[1] * d[1]]);
        ata += &row * row.transpose();
        atb += &row * (o.distance * o.distance);
    }
    let sol = ata.lu().solve(&atb).expect("well-posed normal equations");
    let g_lsq = DMatrix::from_row_slice(2, 2, &[sol[0], sol[1], sol[1], sol[2]]);
    let obj = Objective::new(Loss::DistanceRegression { observations: DistanceObservations::new(obs)?, squared: true });
    let fam = ConstantMetric::direct(DMatrix::identity(2, 2))?;
    let cfg = FitConfig { line_search: true, ..FitConfig::default() };
    let rep = fit(&fam, &obj, &cfg)?;
    let g = fam.unpack(&fam.project(&rep.params, cfg.spd_floor))?;
    let e_star = (g.matrix() - &g_star).norm();
    let e_lsq = (g.matrix() - &g_lsq).norm();
    Ok((
        e_star < RECOVERY_TOL && e_lsq < LSQ_ORACLE_TOL,
        format!("‖Ĝ−G*‖ {e_star:.1e} (< {RECOVERY_TOL:e}); ‖Ĝ−G_lsq‖ {e_lsq:.1e} (< {LSQ_ORACLE_TOL:e}); {:?} after {} iterations", rep.termination, rep.iterations()),
    ))
}

fn triplet_fit() -> Result<(LabeledDataset, TripletSet, ConstantMetric, usize, usize)> {
    let data = gen_aniso_grid(&AnisoGridParams::default())?;
    let ts = TripletSet::nearest_from_labels(&data.points, &data.labels)?;
    let obj = Objective::new(Loss::Triplet { triplets: ts.clone(), margin: 1.0 });
    let fam = ConstantMetric::identity(2);
    let rep = fit(&fam, &obj, &FitConfig { max_iter: TRIPLET_MAX_ITER, ..FitConfig::default() })?;
    let g = fam.unpack(&rep.params)?;
    let viol = triplet_violations(&g, &ts, 1.0, &DistanceBackend::Auto, &SolverConfig::default())?;
    Ok((data, ts, g, viol, rep.iterations()))
}

fn c8_nearest_neighbor() -> Outcome {
    let cfg = SolverConfig::default();
    let (grid, _, g, _, _) = triplet_fit()?;
    let fitted = loo_accuracy(&g, &grid, 1, &DistanceBackend::Auto, &cfg)?.accuracy;
    let ident = loo_accuracy(&IdentityMetric::new(2), &grid, 1, &DistanceBackend::Auto, &cfg)?.accuracy;

    let spiral = gen_spiral(&SpiralParams { seed: 0, ..SpiralParams::default() })?;
    let density = DensityMetric::new(spiral.points.clone(), SPIRAL_BANDWIDTH, SPIRAL_FLOOR)?;
    let graph_acc = loo_accuracy(&density, &spiral, 1, &DistanceBackend::graph(SPIRAL_GRAPH_K), &cfg)?.accuracy;
    let a = DMatrix::from_diagonal(&v(&[1.0, VARIANT_Y_SCALE])) * rotation(VARIANT_ANGLE);
    let variant = spiral.transformed(&a)?;
    let euclid_var = loo_accuracy(&IdentityMetric::new(2), &variant, 1, &DistanceBackend::Auto, &cfg)?.accuracy;
    let euclid_orig = loo_accuracy(&IdentityMetric::new(2), &spiral, 1, &DistanceBackend::Auto, &cfg)?.accuracy;
    let ok = fitted > ident && fitted == 1.0 && graph_acc >= SPIRAL_GRAPH_MIN_ACC && euclid_var <= SPIRAL_EUCLID_MAX_ACC;
    Ok((
        ok,
        format!(
            "grid 1-NN LOO: fitted {fitted:.3} vs identity {ident:.3}; spiral: density-graph {graph_acc:.3} (≥ {SPIRAL_GRAPH_MIN_ACC}), euclidean on variant {euclid_var:.3} (≤ {SPIRAL_EUCLID_MAX_ACC}), euclidean on original {euclid_orig:.3}"
        ),
    ))
}

fn c9_triplet() -> Outcome {
    let (_, ts, g, viol, iters) = triplet_fit()?;
    Ok((viol == 0 && iters <= TRIPLET_MAX_ITER, format!("{viol} violations of {} triplets after {iters} iterations; G diag ({:.3}, {:.2e})", ts.len(), g.matrix()[(0, 0)], g.matrix()[(1, 1)])))
}

fn c10_volume() -> Outcome {
    let bbox = BoundingBox::new(v(&[0.0]), v(&[1.0]))?;
    let a = sample_by_volume(&QuarticLine, &bbox, KS_N, 10)?;
    let b = sample_by_volume(&QuarticLine, &bbox, KS_N, 10)?;
    let identical = a.iter().zip(&b).all(|(p, q)| p[0].to_bits() == q[0].to_bits());
    let mut xs: Vec<f64> = a.iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    let cdf = |x: f64| (x + x * x * x / 3.0) / (4.0 / 3.0);
    let n = xs.len() as f64;
    let stat = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (cdf(x) - i as f64 / n).max((i + 1) as f64 / n - cdf(x)))
        .fold(0.0, f64::max);
    let crit = KS_CRITICAL / n.sqrt();
    Ok((stat < crit && identical, format!("KS D = {stat:.4} vs critical {crit:.4} (n = {KS_N}); seeded rerun bit-identical: {identical}")))
}

fn c11_graph_axioms() -> Outcome {
    let density = density_field();
    let fields: Vec<Option<&dyn MetricField>> = vec![None, Some(&density), Some(&HalfPlaneMetric)];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut graphs, mut triples, mut failures) = (0usize, 0usize, 0usize);
    for n in 2..=50 {
        for &k in &[1, 3, 7] {
            if k >= n {
                continue;
            }
            for field in &fields {
                let pts: Vec<DVector<f64>> = (0..n).map(|_| v(&[rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0)])).collect();
                let g = build_knn_graph(&pts, k, *field)?;
                let d: Vec<Vec<f64>> = (0..n)
                    .map(|i| Ok(g.distances_from(i)?.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect()))
                    .collect::<Result<_>>()?;
                let comp = g.components();
                for i in 0..n {
                    for j in 0..n {
                        let zero_ok = if i == j { d[i][j] == 0.0 } else { comp[i] != comp[j] || d[i][j] > 0.0 || pts[i] == pts[j] };
                        if d[i][j] != d[j][i] || !zero_ok {
                            failures += 1;
                        }
                        for l in 0..n {
                            triples += 1;
                            if d[i][l] > d[i][j] + d[j][l] {
                                failures += 1;
                            }
                        }
                    }
                }
                graphs += 1;
            }
        }
    }
    Ok((failures == 0, format!("{graphs} graphs (2–50 nodes), {triples} ordered triples, {failures} axiom failures")))
}

fn run_cli(args: &[&str], out: &Path) -> std::io::Result<std::process::Output> {
    Command::new(env!("CARGO_BIN_EXE_rml")).args(args).env("RML_OUT", out).output()
}

fn collect(dir: &Path, base: &Path, out: &mut Vec<(String, Vec<u8>)>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect(&p, base, out)?;
        } else {
            out.push((p.strip_prefix(base).unwrap().display().to_string(), std::fs::read(&p)?));
        }
    }
    Ok(())
}

fn cli_session(root: &Path) -> std::result::Result<(), String> {
    let hp = root.join("hp.toml");
    std::fs::write(&hp, metric_to_toml(&MetricSpec::HalfPlane).unwrap()).map_err(|e| e.to_string())?;
    let hp = hp.to_str().unwrap().to_string();
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();
    let run_cfg = root.join("run.toml");
    let mut rc = RunConfig { task: Task::Dist, metric: Some(MetricSpec::HalfPlane), ..Default::default() };
    rc.query.x = vec![-1.0, 1.0];
    rc.query.y = vec![1.0, 1.0];
    std::fs::write(&run_cfg, rc.to_toml().unwrap()).map_err(|e| e.to_string())?;
    let grid = p("gen_grid/dataset.csv");
    let steps: Vec<(Vec<String>, &str)> = vec![
        (vec!["gen".into(), "spiral".into(), "--seed".into(), "3".into()], "gen_spiral"),
        (vec!["gen".into(), "aniso-grid".into(), "--n".into(), "6".into()], "gen_grid"),
        (vec!["gen".into(), "trajectories".into(), "--metric".into(), hp.clone(), "--n".into(), "2".into(), "--samples-per".into(), "4".into(), "--seed".into(), "4".into()], "gen_traj"),
        (vec!["fit".into(), "--input".into(), grid.clone(), "--objective".into(), "triplet".into(), "--max-iter".into(), "100".into()], "fit"),
        (vec!["eval".into(), "--input".into(), grid.clone(), "--metric".into(), p("fit/metric.toml")], "eval"),
        (vec!["dist".into(), "--metric".into(), hp.clone(), "--x".into(), "-1,1".into(), "--y".into(), "1,1".into(), "--method".into(), "bvp".into()], "dist"),
        (vec!["geodesic".into(), "--metric".into(), hp.clone(), "--x".into(), "0,1".into(), "--v".into(), "1,0.5".into()], "geodesic"),
        (vec!["transport".into(), "--metric".into(), hp.clone(), "--x".into(), "0,1".into(), "--v".into(), "1,0.5".into(), "--w".into(), "0,1".into(), "--method".into(), "schild".into(), "--rungs".into(), "8".into()], "transport"),
        (vec!["sample".into(), "--metric".into(), hp.clone(), "--lower".into(), "-1,0.5".into(), "--upper".into(), "1,2".into(), "--n".into(), "300".into(), "--seed".into(), "2".into()], "sample"),
        (vec!["export-plot".into(), "--input".into(), p("fit/fit_report.json")], "plot_loss"),
        (vec!["export-plot".into(), "--metric".into(), hp.clone(), "--x".into(), "-1,1".into(), "--y".into(), "1,1".into()], "plot_geodesic"),
        (vec!["run".into(), "--config".into(), run_cfg.to_str().unwrap().into()], "run"),
    ];
    for (args, sub) in steps {
        let out_dir = root.join(sub);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = run_cli(&refs, &out_dir).map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("`rml {}` failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)));
        }
    }
    Ok(())
}

fn c12_cli_determinism() -> Outcome {
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    for root in [a.path(), b.path()] {
        if let Err(e) = cli_session(root) {
            return Ok((false, e));
        }
    }
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    collect(a.path(), a.path(), &mut fa)?;
    collect(b.path(), b.path(), &mut fb)?;
    let names: Vec<&String> = fa.iter().map(|(n, _)| n).collect();
    let differing: Vec<&String> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
    let ok = fa.len() == fb.len() && differing.is_empty() && fa.len() >= 14;
    Ok((ok, format!("{} output files from 12 invocations, {} differ {:?}", names.len(), differing.len(), differing)))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 SPD exponential oracle", c1_spd_exp),
        ("2 SPD distance oracle", c2_spd_distance),
        ("3 SPD transport oracle", c3_spd_transport),
        ("4 conservation suite", c4_conservation),
        ("5 exp/log roundtrip, length vs energy", c5_roundtrip_and_length),
        ("6 hyperbolic cross-check", c6_hyperbolic),
        ("7 Mahalanobis recovery", c7_mahalanobis),
        ("8 anisotropic grid and spiral 1-NN", c8_nearest_neighbor),
        ("9 triplet training", c9_triplet),
        ("10 volume sampling", c10_volume),
        ("11 graph metric axioms", c11_graph_axioms),
        ("12 CLI determinism", c12_cli_determinism),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!("[{}] criterion {name}: {detail} ({:.1}s)", if ok { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 12 passed in {:.1}s", 12 - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
