//! Subcommand dispatch.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cmc_core::cmc::{EntireSolve, IterationRecord};
use cmc_core::geometry::{fundamental_forms, gauss_map, normal_flow, GeometryError};
use cmc_core::verify::{
    asymptotic_data, comparison_check, convergence_study, distance_bound_check, random_probes, Asymptotics, VerifyError,
};
use cmc_core::{
    foliate, mean_curvature_graph, solve_entire, DomainError, MinkVector, RegularDomainModel, SolveError,
    SpacelikeGraph, SupportFunction,
};
use thiserror::Error;

use crate::config::{ConfigError, JobConfig, Overrides};
use crate::export::{coordinate_header, fmt_f64, graph_obj, obj_string, surface_table, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Past horizon v₀ on the window.
    Horizon,
    /// Cosmological time of the probes and the level set T = 1/H.
    Ctime,
    /// Entire CMC-H graph on the window.
    Solve,
    /// One leaf per entry of H_list, with nesting gaps and probe brackets.
    Foliate,
    /// Curvatures and Gauss map of the solved graph.
    Geometry,
    /// Normal flow σ + tν of the solved graph.
    Flow,
    /// Comparison, distance-bound and asymptotics checks.
    Verify,
    /// r − u(rθ) along directions, against φ(θ).
    Asymptotics,
    /// Max-norm error against a closed-form oracle over several spacings.
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Horizon => "horizon",
            Command::Ctime => "ctime",
            Command::Solve => "solve",
            Command::Foliate => "foliate",
            Command::Geometry => "geometry",
            Command::Flow => "flow",
            Command::Verify => "verify",
            Command::Asymptotics => "asymptotics",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Solve(SolveError),
    #[error("{0}")]
    Geometry(GeometryError),
    #[error("{0}")]
    Verify(VerifyError),
    #[error("{0}")]
    Domain(DomainError),
    /// Some verification reported FAIL; the report was still written.
    #[error("verification failed:\n{0}")]
    Failed(String),
}

fn is_divergence(e: &SolveError) -> bool {
    matches!(e, SolveError::NewtonDiverged { .. } | SolveError::NoStabilization { .. })
}

impl RunError {
    /// 2 for configuration errors, 3 for non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solve(e)
            | RunError::Geometry(GeometryError::Solve(e))
            | RunError::Verify(VerifyError::Solve(e))
                if is_divergence(e) =>
            {
                3
            }
            _ => 1,
        }
    }
}

impl From<SolveError> for RunError {
    fn from(e: SolveError) -> Self {
        RunError::Solve(e)
    }
}

impl From<GeometryError> for RunError {
    fn from(e: GeometryError) -> Self {
        RunError::Geometry(e)
    }
}

impl From<VerifyError> for RunError {
    fn from(e: VerifyError) -> Self {
        RunError::Verify(e)
    }
}

impl From<DomainError> for RunError {
    fn from(e: DomainError) -> Self {
        RunError::Domain(e)
    }
}

/// Output directory with serialized writes.
struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<(), RunError> {
        self.text(name, &t.to_csv())
    }

    fn surface(&mut self, stem: &str, g: &SpacelikeGraph) -> Result<(), RunError> {
        self.table(&format!("{stem}.csv"), &surface_table(g))?;
        if let Some(obj) = graph_obj(g) {
            self.text(&format!("{stem}.obj"), &obj)?;
        }
        Ok(())
    }
}

/// Result of a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Lines printed to standard output; the last one is the summary.
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Reads `config_path`, applies `overrides` and executes `command`.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> Result<Report, RunError> {
    let text =
        fs::read_to_string(config_path).map_err(|source| RunError::Io { path: config_path.to_path_buf(), source })?;
    let cfg = JobConfig::load(&text, overrides)?;
    run_config(command, &cfg)
}

pub fn run_config(command: Command, cfg: &JobConfig) -> Result<Report, RunError> {
    let sf = cfg.support_function()?;
    let mut out = Output::create(&cfg.output.dir)?;
    let lines = match command {
        Command::Horizon => horizon(cfg, &sf, &mut out)?,
        Command::Ctime => ctime(cfg, &sf, &mut out)?,
        Command::Solve => solve(cfg, &sf, &mut out)?,
        Command::Foliate => foliation(cfg, &sf, &mut out)?,
        Command::Geometry => geometry(cfg, &sf, &mut out)?,
        Command::Flow => flow(cfg, &sf, &mut out)?,
        Command::Verify => verify(cfg, &sf, &mut out)?,
        Command::Asymptotics => asymptotics(cfg, &sf, &mut out)?,
        Command::Convergence => convergence(cfg, &sf, &mut out)?,
    };
    Ok(Report { lines, files: out.written })
}

fn entire(cfg: &JobConfig, sf: &SupportFunction, h: f64) -> Result<EntireSolve, RunError> {
    Ok(solve_entire(sf, h, &cfg.window_grid()?, &cfg.solver_options()?)?)
}

fn solve_log(s: &EntireSolve) -> String {
    let mut log = String::new();
    writeln!(log, "boundary data {:?}, stop {:?}", s.boundary, s.stop).expect("string write");
    for (k, b) in s.boxes.iter().enumerate() {
        writeln!(
            log,
            "box {} half_width={} nodes={} newton={} change={:e}",
            k + 1,
            b.half_width,
            b.nodes_per_axis,
            b.newton_iterations,
            b.window_change
        )
        .expect("string write");
    }
    for r in &s.log {
        writeln!(log, "{}", r as &IterationRecord).expect("string write");
    }
    log
}

fn horizon(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let grid = cfg.window_grid()?;
    let domain = RegularDomainModel::new(sf.clone());
    let g = SpacelikeGraph::sampled(grid, 0.0, |x| domain.horizon_height(x))?;
    let mut t = Table::new(coordinate_header(g.dim()).into_iter().chain(["v0".to_string()]));
    t.rows = surface_table(&g).rows;
    out.table("horizon.csv", &t)?;
    if let Some(obj) = graph_obj(&g) {
        out.text("horizon.obj", &obj)?;
    }
    let max = g.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![format!("horizon: {} nodes, max v0 {:.6}", g.values().len(), max)])
}

fn ctime(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let domain = RegularDomainModel::new(sf.clone());
    let n = cfg.dimension;
    let mut lines = Vec::new();
    if !cfg.probes.is_empty() {
        let mut t = Table::new(coordinate_header(n).into_iter().chain(["t".to_string(), "T".to_string()]));
        for (i, p) in cfg.probes.iter().enumerate() {
            let q = MinkVector::from_components(p).expect("validated probe");
            let time = domain.cosmological_time(&q).map_err(|e| match e {
                DomainError::NotInDomain(_) => {
                    RunError::Config(ConfigError::Invalid { field: format!("probes[{i}]"), message: e.to_string() })
                }
                other => RunError::Domain(other),
            })?;
            let mut row = p.clone();
            row.push(time);
            t.push_numbers(row);
            lines.push(format!("T{:?} = {}", p, fmt_f64(time)));
        }
        out.table("ctime.csv", &t)?;
    }
    if let Some(h) = cfg.solver.curvature {
        let a = 1.0 / h;
        let grid = cfg.window_grid()?;
        let mut t = Table::new(coordinate_header(n).into_iter().chain(["v0".to_string(), "v_a".to_string()]));
        for k in 0..grid.node_count() {
            let x = grid.coords(k);
            let mut row = x.clone();
            row.push(domain.horizon_height(&x));
            row.push(domain.level_set_height(a, &x)?);
            t.push_numbers(row);
        }
        out.table("level.csv", &t)?;
        lines.push(format!("level set T = {a}: {} nodes", grid.node_count()));
    }
    if lines.is_empty() {
        return Err(
            ConfigError::Invalid { field: "probes".into(), message: "ctime needs probes or solver.H".into() }.into()
        );
    }
    lines.push(format!("ctime: {} probes", cfg.probes.len()));
    Ok(lines)
}

fn solve(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let h = cfg.curvature("solve")?;
    let s = entire(cfg, sf, h)?;
    out.surface("surface", &s.graph)?;
    out.text("solve.log", &solve_log(&s))?;
    Ok(vec![format!(
        "solve: H = {h}, {} nodes, {} boxes ({:?}), residual {:.3e}, slope margin {:.3e}",
        s.graph.values().len(),
        s.boxes.len(),
        s.stop,
        s.graph.residual_norm(),
        s.graph.slope_margin()
    )])
}

fn foliation(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let list = cfg.curvature_list("foliate")?;
    let f = foliate(sf, &list, &cfg.window_grid()?, &cfg.solver_options()?)?;
    let n = cfg.dimension;
    let mut t = Table::new(["H".to_string()].into_iter().chain(coordinate_header(n)).chain(["u".to_string()]));
    for leaf in f.leaves() {
        for (k, &u) in leaf.graph.values().iter().enumerate() {
            let mut row = vec![leaf.h];
            row.extend(leaf.graph.grid().coords(k));
            row.push(u);
            t.push_numbers(row);
        }
    }
    out.table("foliation.csv", &t)?;
    let mut lines: Vec<String> = f
        .leaves()
        .windows(2)
        .zip(f.gaps())
        .map(|(pair, gap)| format!("gap H = {} / H = {}: {}", pair[0].h, pair[1].h, fmt_f64(*gap)))
        .collect();
    for p in &cfg.probes {
        let q = MinkVector::from_components(p).expect("validated probe");
        match f.bracket(&q) {
            Some((a, b)) => lines.push(format!("probe {p:?}: between H = {a} and H = {b}")),
            None => lines.push(format!("probe {p:?}: outside the family")),
        }
    }
    lines.push(format!("foliate: {} leaves, strictly ordered: {}", f.leaves().len(), f.strictly_ordered()));
    Ok(lines)
}

fn geometry(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let h = cfg.curvature("geometry")?;
    let g = entire(cfg, sf, h)?.graph;
    let n = g.dim();
    let normals = gauss_map(&g)?;
    let mut header = coordinate_header(n);
    header.push("u".into());
    header.push("H_num".into());
    if n == 2 {
        header.push("K_num".into());
    }
    header.extend((1..=n).map(|i| format!("nu_x{i}")));
    header.push("nu_t".into());
    let mut t = Table::new(header);
    let summary = if n == 2 {
        let geo = fundamental_forms(&g)?;
        for ((k, d), (_, nu)) in geo.nodes().iter().zip(geo.data()).zip(&normals) {
            let mut row = g.grid().coords(*k);
            row.extend([g.values()[*k], d.mean, d.gauss]);
            row.extend(nu.spatial());
            row.push(nu.time());
            t.push_numbers(row);
        }
        format!(
            "geometry: max |H_num - H| {:.3e}, K_num in [{:.6}, {:.6}]",
            geo.mean_curvature().max_abs_deviation(h),
            geo.data().iter().map(|d| d.gauss).fold(f64::INFINITY, f64::min),
            geo.data().iter().map(|d| d.gauss).fold(f64::NEG_INFINITY, f64::max)
        )
    } else {
        let mean = mean_curvature_graph(&g)?;
        for ((k, hk), (_, nu)) in mean.iter().zip(&normals) {
            let mut row = g.grid().coords(k);
            row.extend([g.values()[k], hk]);
            row.extend(nu.spatial());
            row.push(nu.time());
            t.push_numbers(row);
        }
        format!("geometry: max |H_num - H| {:.3e}", mean.max_abs_deviation(h))
    };
    out.table("geometry.csv", &t)?;
    Ok(vec![summary])
}

fn flow(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let h = cfg.curvature("flow")?;
    let g = entire(cfg, sf, h)?.graph;
    let time = cfg.flow.t;
    let f = normal_flow(&g, time)?;
    let mut t = Table::new(["x1", "x2", "X1", "X2", "X_t", "det_B", "tr_B"]);
    for ((k, p), b) in f.nodes().iter().zip(f.points()).zip(f.shape_operators()) {
        let x = g.grid().coords(*k);
        t.push_numbers([x[0], x[1], p[0], p[1], p[2], b.determinant(), b.trace()]);
    }
    out.table("flow.csv", &t)?;
    out.text("flow.obj", &obj_string(f.points(), &f.triangles()))?;
    let mut lines = Vec::new();
    if cfg.flow.regraph {
        let rg = f.regraph(h / (1.0 + time * h).abs().max(f64::MIN_POSITIVE))?;
        out.surface("flow_surface", &rg)?;
        lines.push(format!("regraphed on [-{0}, {0}]^2", rg.grid().half_width()));
    }
    let dets = f.shape_operators().iter().map(|b| b.determinant());
    let (lo, hi) = dets.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d), b.max(d)));
    lines.push(format!("flow: t = {time}, {} nodes, det B_t in [{lo:.6}, {hi:.6}]", f.nodes().len()));
    Ok(lines)
}

fn leaves(cfg: &JobConfig, sf: &SupportFunction) -> Result<Vec<SpacelikeGraph>, RunError> {
    match &cfg.solver.curvatures {
        Some(list) => {
            let f = foliate(sf, list, &cfg.window_grid()?, &cfg.solver_options()?)?;
            Ok(f.leaves().iter().map(|l| l.graph.clone()).collect())
        }
        None => Ok(vec![entire(cfg, sf, cfg.curvature("verify")?)?.graph]),
    }
}

fn support_directions(cfg: &JobConfig, sf: &SupportFunction) -> Result<Vec<Vec<f64>>, RunError> {
    Ok(cfg.asymptotic_directions()?.unwrap_or_else(|| sf.samples().iter().map(|s| s.direction.clone()).collect()))
}

/// Default bound on |f₀ − φ| for a leaf of curvature `h` on a window of
/// half-width `r`: the f₀ + c/r fit leaves an error of about ½(1/(hR))³ on the
/// hyperboloid, floored at 0.05.
fn asymptotic_tolerance(cfg: &JobConfig, h: f64, r: f64) -> f64 {
    cfg.asymptotics.tolerance.unwrap_or_else(|| (0.5 / (h * r).powi(3)).max(0.05))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn verify(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let graphs = leaves(cfg, sf)?;
    let opts = cfg.solver_options()?;
    let domain = RegularDomainModel::new(sf.clone());
    let mut t = Table::new(["check", "H", "value", "bound", "verdict"]);
    let mut lines = Vec::new();
    let mut all = true;
    let mut record = |t: &mut Table, check: &str, h: f64, value: f64, bound: f64, pass: bool| {
        t.push(vec![check.into(), fmt_f64(h), fmt_f64(value), fmt_f64(bound), verdict(pass).into()]);
        all &= pass;
    };

    let tol = 10.0 * opts.stabilization_tol;
    for pair in graphs.windows(2) {
        // leaves come in increasing H: the later one lies below
        let r = comparison_check(&pair[1], sf, &pair[0], sf, tol)?;
        record(&mut t, "comparison", pair[1].h_target(), r.min_gap, -tol, r.pass());
        lines.push(format!("{r} (H {} vs {})", pair[1].h_target(), pair[0].h_target()));
    }

    for (i, g) in graphs.iter().enumerate() {
        let probes = random_probes(g, &domain, cfg.verify.probe_count, cfg.verify.seed.wrapping_add(i as u64))?;
        let results = distance_bound_check(g, &domain, &probes)?;
        let worst = results.iter().map(|r| r.distance).fold(0.0, f64::max);
        let bound = 1.0 / g.h_target();
        let pass = results.iter().all(|r| r.pass());
        record(&mut t, "distance_bound", g.h_target(), worst, bound, pass);
        lines.push(format!(
            "{} distance-bound: H = {}, {} probes, max d = {:.6} < 1/H = {:.6}",
            verdict(pass),
            g.h_target(),
            results.len(),
            worst,
            bound
        ));
    }

    let directions = support_directions(cfg, sf)?;
    let radii = cfg.asymptotic_radii()?;
    let r = cfg.solver.window;
    for g in &graphs {
        let h = g.h_target();
        if h * r < 1.0 {
            // r − u(rθ) is still in its transient: no classification is possible
            t.push(vec!["asymptotics".into(), fmt_f64(h), String::new(), String::new(), "SKIP".into()]);
            lines.push(format!("SKIP asymptotics: H = {h}, window R = {r} is inside the curvature radius 1/H"));
            continue;
        }
        let atol = asymptotic_tolerance(cfg, h, r);
        let est = asymptotic_data(g, sf, &directions, &radii)?;
        let worst = est.iter().filter_map(|e| e.limit_error()).fold(0.0, f64::max);
        let diverging =
            est.iter().filter(|e| e.support_value.is_some() && e.behaviour == Asymptotics::Diverging).count();
        let pass = worst <= atol && diverging == 0;
        record(&mut t, "asymptotics", h, worst, atol, pass);
        lines.push(format!(
            "{} asymptotics: H = {h}, {} directions, max |f0 - phi| = {:.3e} (tol {atol:.3e}, C = R * error = {:.3e}), {diverging} support directions diverging",
            verdict(pass),
            est.len(),
            worst,
            r * worst
        ));
    }
    out.table("verify.csv", &t)?;
    if !all {
        return Err(RunError::Failed(lines.join("\n")));
    }
    lines.push(format!("verify: all checks PASS on {} surfaces", graphs.len()));
    Ok(lines)
}

fn asymptotics(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let h = cfg.curvature("asymptotics")?;
    let g = entire(cfg, sf, h)?.graph;
    let directions = support_directions(cfg, sf)?;
    let est = asymptotic_data(&g, sf, &directions, &cfg.asymptotic_radii()?)?;
    let n = cfg.dimension;
    let header: Vec<String> = (1..=n)
        .map(|i| format!("theta{i}"))
        .chain(["class", "f0", "phi", "error", "monotone"].map(String::from))
        .collect();
    let mut t = Table::new(header);
    let blank = String::new;
    for e in &est {
        let mut row: Vec<String> = e.direction.iter().copied().map(fmt_f64).collect();
        match e.behaviour {
            Asymptotics::Limit(f0) => row.extend(["limit".into(), fmt_f64(f0)]),
            Asymptotics::Diverging => row.extend(["diverging".into(), blank()]),
        }
        row.push(e.support_value.map_or_else(blank, fmt_f64));
        row.push(e.limit_error().map_or_else(blank, fmt_f64));
        row.push(e.monotone.to_string());
        t.push(row);
    }
    out.table("asymptotics.csv", &t)?;
    let limits = est.iter().filter(|e| matches!(e.behaviour, Asymptotics::Limit(_))).count();
    let worst = est.iter().filter_map(|e| e.limit_error()).fold(0.0, f64::max);
    Ok(vec![format!(
        "asymptotics: {} directions, {limits} bounded, {} diverging, max |f0 - phi| = {worst:.3e}",
        est.len(),
        est.len() - limits
    )])
}

fn convergence(cfg: &JobConfig, sf: &SupportFunction, out: &mut Output) -> Result<Vec<String>, RunError> {
    let h = cfg.curvature("convergence")?;
    let exact = cfg.exact_solution(h);
    let report = convergence_study(exact, sf, h, cfg.solver.window, &cfg.convergence.spacings, &cfg.solver_options()?)?;
    let mut t = Table::new(["h", "nodes_per_axis", "max_error"]);
    let mut lines = Vec::new();
    for r in &report.rows {
        t.push(vec![fmt_f64(r.spacing), r.nodes_per_axis.to_string(), fmt_f64(r.max_error)]);
        lines.push(format!("h = {}: max error {:.3e}", r.spacing, r.max_error));
    }
    out.table("convergence.csv", &t)?;
    lines.push(format!("convergence: {:?}, order {:.3}", cfg.convergence.exact, report.order));
    Ok(lines)
}
