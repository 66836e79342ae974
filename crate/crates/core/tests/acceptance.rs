//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p cmc-core --test acceptance -- --nocapture` to see the lines.

use std::sync::Mutex;
use std::time::Instant;

use cmc_core::cmc::EntireSolve;
use cmc_core::geometry::{
    degeneracy_threshold, flow_form_algebra, flow_jets, fundamental_forms, normal_flow, GeometryError, Jet,
};
use cmc_core::verify::{
    asymptotic_data, comparison_check, convergence_study, distance_bound_check, random_probes, Asymptotics,
    ExactSolution,
};
use cmc_core::*;
use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const MATCH_TOL: f64 = 5e-3;
const LINE_TOL: f64 = 1e-4;
const ORDER_MIN: f64 = 1.9;
const COMPARISON_TOL: f64 = 1e-3;
const TIGHTNESS: f64 = 0.9;
const ALGEBRA_TOL: f64 = 1e-12;
const FLOW_POSITION_TOL: f64 = 1e-8;
const DET_TOL: f64 = 1e-1;
const ASYMPTOTIC_TOL: f64 = 0.05;

/// Every converged solve of the suite, for the barrier-sandwich criterion.
static SOLVED: Mutex<Vec<(SupportFunction, SpacelikeGraph)>> = Mutex::new(Vec::new());

fn keep(sf: &SupportFunction, g: &SpacelikeGraph) {
    SOLVED.lock().unwrap().push((sf.clone(), g.clone()));
}

fn entire(sf: &SupportFunction, h: f64, r: f64, spacing: f64) -> EntireSolve {
    let grid = GridDomain::new(sf.dim(), r, spacing).unwrap();
    let s = solve_entire(sf, h, &grid, &SolverOptions::default())
        .unwrap_or_else(|e| panic!("H = {h}, R = {r}, h = {spacing}: {e}"));
    keep(sf, &s.graph);
    s
}

fn max_error(g: &SpacelikeGraph, exact: impl Fn(&[f64]) -> f64) -> f64 {
    (0..g.grid().node_count()).map(|k| (g.values()[k] - exact(&g.grid().coords(k))).abs()).fold(0.0, f64::max)
}

fn hyperboloid(rho: f64) -> impl Fn(&[f64]) -> f64 {
    move |x| (rho * rho + x.iter().map(|c| c * c).sum::<f64>()).sqrt()
}

fn trough(rho: f64) -> impl Fn(&[f64]) -> f64 {
    move |x| (rho * rho + x[0] * x[0]).sqrt()
}

fn cone(n: usize) -> SupportFunction {
    SupportFunction::cone(MinkVector::origin(n), 64).unwrap()
}

fn wedge() -> SupportFunction {
    SupportFunction::wedge(vec![1.0, 0.0], (0.0, 0.0)).unwrap()
}

type Criterion = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, o: &Outcome, secs: f64) {
    println!("{} [{id:2}] {name}: {} [{secs:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn hyperboloid_reproduction() -> Outcome {
    let start = Instant::now();
    let s = entire(&cone(2), 1.0, 2.0, 0.05);
    let secs = start.elapsed().as_secs_f64();
    let err = max_error(&s.graph, hyperboloid(1.0));
    Outcome {
        pass: err <= MATCH_TOL && secs <= 60.0,
        detail: format!("max error {err:.3e} (≤ {MATCH_TOL:e}), {secs:.1} s (≤ 60 s)"),
    }
}

fn trough_reproduction() -> Outcome {
    let s = entire(&wedge(), 0.5, 2.0, 0.05);
    let err = max_error(&s.graph, trough(1.0));
    let line = entire(&cone(1), 1.0, 2.0, 0.01);
    let err1 = max_error(&line.graph, hyperboloid(1.0));
    Outcome {
        pass: err <= MATCH_TOL && err1 <= LINE_TOL,
        detail: format!("trough max error {err:.3e} (≤ {MATCH_TOL:e}); n = 1 max error {err1:.3e} (≤ {LINE_TOL:e})"),
    }
}

fn convergence_order() -> Outcome {
    let sf = cone(2);
    let exact = ExactSolution::Hyperboloid { radius: 1.0 };
    let r = convergence_study(exact, &sf, 1.0, 2.0, &[0.2, 0.1, 0.05], &SolverOptions::default()).unwrap();
    let errors: Vec<String> = r.rows.iter().map(|row| format!("{:.3e}", row.max_error)).collect();
    Outcome {
        pass: r.order >= ORDER_MIN,
        detail: format!("errors [{}], order {:.3} (≥ {ORDER_MIN})", errors.join(", "), r.order),
    }
}

fn foliation_order() -> Outcome {
    let sf = cone(2);
    let window = GridDomain::new(2, 2.0, 0.05).unwrap();
    let f = foliate(&sf, &[0.25, 0.5, 1.0], &window, &SolverOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for leaf in f.leaves() {
        keep(&sf, &leaf.graph);
        worst = worst.max(max_error(&leaf.graph, hyperboloid(1.0 / leaf.h)));
    }
    let strict = f
        .leaves()
        .windows(2)
        .all(|pair| pair[0].graph.values().iter().zip(pair[1].graph.values()).all(|(above, below)| above > below));
    let probe = MinkVector::new(vec![0.0, 0.0], 3.0).unwrap();
    let bracket = f.bracket(&probe);
    Outcome {
        pass: worst <= MATCH_TOL && strict && bracket == Some((0.25, 0.5)),
        detail: format!(
            "max leaf error {worst:.3e}, strictly ordered at every node: {strict}, (0,0;3) bracket {bracket:?}"
        ),
    }
}

/// A random domain and a nested one: the second shifts every support value down
/// by a random amount, which raises its horizon.
fn nested_pair(seed: u64) -> (SupportFunction, SupportFunction, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(4..=7);
    let samples: Vec<(Vec<f64>, f64)> = (0..count)
        .map(|k| {
            let a = std::f64::consts::TAU * (k as f64 + rng.gen_range(0.1..0.9)) / count as f64;
            (vec![a.cos(), a.sin()], rng.gen_range(-0.3..0.3))
        })
        .collect();
    let inner: Vec<(Vec<f64>, f64)> = samples.iter().map(|(d, v)| (d.clone(), v - rng.gen_range(0.0..0.3))).collect();
    let h2 = rng.gen_range(0.4..1.0);
    let h1 = h2 * rng.gen_range(1.0..1.5);
    (make_support_function(2, samples).unwrap(), make_support_function(2, inner).unwrap(), h1, h2)
}

fn comparison_sweep() -> Outcome {
    let results: Vec<(bool, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let (d1, d2, h1, h2) = nested_pair(seed);
            let g1 = entire(&d1, h1, 2.0, 0.1).graph;
            let g2 = entire(&d2, h2, 2.0, 0.1).graph;
            let r = comparison_check(&g1, &d1, &g2, &d2, COMPARISON_TOL).unwrap();
            (r.pass(), r.min_gap)
        })
        .collect();
    let passed = results.iter().filter(|r| r.0).count();
    let min_gap = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Outcome {
        pass: passed == 20,
        detail: format!("{passed}/20 pairs PASS at tol {COMPARISON_TOL:e}, smallest gap {min_gap:.3e}"),
    }
}

fn distance_bound() -> Outcome {
    let surfaces: Vec<(SupportFunction, SpacelikeGraph)> = SOLVED.lock().unwrap().clone();
    let mut all = true;
    let mut tight: f64 = 0.0;
    for (i, (sf, g)) in surfaces.iter().enumerate() {
        let domain = RegularDomainModel::new(sf.clone());
        let probes = random_probes(g, &domain, 100, i as u64).unwrap();
        let results = distance_bound_check(g, &domain, &probes).unwrap();
        all &= results.len() == 100 && results.iter().all(|r| r.pass());
        if matches!(sf.preset(), Preset::Cone { .. }) {
            tight = tight.max(results.iter().map(|r| r.distance * g.h_target()).fold(0.0, f64::max));
        }
    }
    Outcome {
        pass: all && tight >= TIGHTNESS,
        detail: format!(
            "{} surfaces x 100 probes, all d < 1/H: {all}; best d·H on the cone {tight:.4} (≥ {TIGHTNESS})",
            surfaces.len()
        ),
    }
}

fn flow_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        // det-1 SPD: rotation of diag(λ, 1/λ)
        let lambda = (rng.gen_range(-3.0..3.0f64)).exp();
        let a = rng.gen_range(0.0..std::f64::consts::PI);
        let q = Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos());
        let b = q * Matrix2::new(lambda, 0.0, 0.0, 1.0 / lambda) * q.transpose();
        let (_, trace) = flow_form_algebra(&b, 1.0).unwrap();
        worst = worst.max((trace - 1.0).abs());
    }
    // exact jets of the unit hyperboloid, flowed by t = 1
    let grid = GridDomain::new(2, 2.0, 0.1).unwrap();
    let jets: Vec<(usize, Jet)> = grid
        .interior_indices()
        .into_iter()
        .map(|k| {
            let x = grid.coords(k);
            let u = hyperboloid(1.0)(&x);
            let gradient = Vector2::new(x[0] / u, x[1] / u);
            let hessian = (Matrix2::identity() - gradient * gradient.transpose()) / u;
            (k, Jet { value: u, gradient, hessian })
        })
        .collect();
    let flowed = flow_jets(&grid, &jets, 1.0, degeneracy_threshold(grid.spacing())).unwrap();
    let position = flowed
        .nodes()
        .iter()
        .zip(flowed.points())
        .map(|(&k, p)| {
            let x = grid.coords(k);
            let u = hyperboloid(1.0)(&x);
            let target = [2.0 * x[0], 2.0 * x[1], 2.0 * u];
            (0..3).map(|c| (p[c] - target[c]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Outcome {
        pass: worst <= ALGEBRA_TOL && position <= FLOW_POSITION_TOL,
        detail: format!("max |tr((1+B)⁻¹B) − 1| {worst:.2e} (≤ {ALGEBRA_TOL:e}); max position error {position:.2e} (≤ {FLOW_POSITION_TOL:e})"),
    }
}

fn round_trip_flow() -> Outcome {
    let s = entire(&cone(2), 0.5, 2.0, 0.05);
    let flowed = normal_flow(&s.graph, -1.0).unwrap();
    let algebraic = flowed.shape_operators().iter().map(|b| (b.determinant() - 1.0).abs()).fold(0.0, f64::max);
    let regraphed = flowed.regraph(1.0).unwrap();
    let det = fundamental_forms(&regraphed).unwrap().gauss_curvature().max_abs_deviation(1.0);
    let t = entire(&wedge(), 0.5, 2.0, 0.05);
    let degenerate = matches!(normal_flow(&t.graph, -1.0), Err(GeometryError::FlowDegenerate { .. }));
    Outcome {
        pass: algebraic <= DET_TOL && det <= DET_TOL && degenerate,
        detail: format!(
            "max |det B_t − 1| {algebraic:.2e} (flowed forms), {det:.2e} (re-graphed on [−{r}, {r}]², ≤ {DET_TOL}); trough FlowDegenerate: {degenerate}",
            r = regraphed.grid().half_width()
        ),
    }
}

fn asymptotics() -> Outcome {
    let grid = GridDomain::new(2, 8.0, 0.2).unwrap();
    let radii = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 7.9];
    let angles = (0..16).map(|k| std::f64::consts::TAU * k as f64 / 16.0);
    let directions: Vec<Vec<f64>> = angles.map(|a| vec![a.cos(), a.sin()]).collect();

    let mut classified = true;
    let mut worst: f64 = 0.0;
    let mut check = |sf: &SupportFunction, g: &SpacelikeGraph| {
        for e in asymptotic_data(g, sf, &directions, &radii).unwrap() {
            let expect_limit = e.support_value.is_some();
            classified &= matches!(e.behaviour, Asymptotics::Limit(_)) == expect_limit;
            if let Some(err) = e.limit_error() {
                worst = worst.max(err);
            }
        }
    };
    // closed forms, then solved surfaces on the same window
    let c = cone(2);
    let w = wedge();
    check(&c, &SpacelikeGraph::sampled(grid.clone(), 1.0, hyperboloid(1.0)).unwrap());
    check(&w, &SpacelikeGraph::sampled(grid.clone(), 0.5, trough(1.0)).unwrap());
    check(&c, &entire(&c, 1.0, 8.0, 0.2).graph);
    check(&w, &entire(&w, 0.5, 8.0, 0.2).graph);

    let sf =
        make_support_function(2, vec![(vec![1.0, 0.0], 0.3), (vec![0.0, 1.0], -0.2), (vec![-1.0, -1.0], 0.1)]).unwrap();
    let cut = null_cut(&sf);
    let exact_cut = cut.iter().zip(sf.samples()).all(|(c, s)| c.value == -s.value && c.direction == s.direction);
    Outcome {
        pass: classified && worst <= ASYMPTOTIC_TOL && exact_cut,
        detail: format!("classification exact: {classified}; max |f0 − φ| {worst:.3e} at R = 8 (≤ {ASYMPTOTIC_TOL}); null_cut = −φ: {exact_cut}"),
    }
}

fn barrier_sandwich() -> Outcome {
    let solved = SOLVED.lock().unwrap();
    let mut violations = 0;
    let mut nodes = 0;
    for (sf, g) in solved.iter() {
        let domain = RegularDomainModel::new(sf.clone());
        for k in 0..g.grid().node_count() {
            let x = g.grid().coords(k);
            let u = g.values()[k];
            let lower = domain.horizon_height(&x);
            let upper = domain.level_set_height(1.0 / g.h_target(), &x).unwrap();
            let tol = cmc::SANDWICH_TOLERANCE * (1.0 + u.abs());
            nodes += 1;
            if u < lower - tol || u > upper + tol {
                violations += 1;
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{} solves, {nodes} nodes, {violations} violations", solved.len()),
    }
}

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        (1, "hyperboloid reproduction", hyperboloid_reproduction),
        (2, "trough reproduction", trough_reproduction),
        (3, "convergence order", convergence_order),
        (5, "foliation order", foliation_order),
        (6, "comparison sweep", comparison_sweep),
        (7, "distance bound", distance_bound),
        (8, "CMC-1/2 flow identity", flow_identity),
        (9, "round-trip flow", round_trip_flow),
        (10, "asymptotics", asymptotics),
        // last: covers every solve above
        (4, "barrier sandwich", barrier_sandwich),
    ];
    // ACCEPTANCE_ONLY=6,10 runs a subset (criterion 4 then checks only their solves)
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|id| id.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|ids| !ids.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        report(id, name, &o, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
