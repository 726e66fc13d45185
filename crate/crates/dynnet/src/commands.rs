//! The subcommands as library functions. Each returns a serialisable report
//! and, when the config names an output directory, writes its files there.
//! Replicas and sweep cells run on the rayon pool; results are collected in
//! index order so every byte of output is a function of the config.

use std::path::Path;

use dynnet_core::analytic::{
    assortativity_threshold, degree_mean_var, edge_degree_theory, DegreeLaw, EdgeDegreeTheory, StationaryEdgeLaw,
};
use dynnet_core::bjr::{operator_norm, solve_rho, FixedPointSolution, Kernel, TypeGrid};
use dynnet_core::critical::{r_and_verdict, CriticalReport, Verdict};
use dynnet_core::sim::{self, RunOutcome};
use dynnet_core::{ModelParams, RngStream, SocialIndexDistribution, Version};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SweepSpec};
use crate::error::Failure;
use crate::io::{write_json, write_snapshot, SnapshotMeta, SCHEMA};
use crate::stats::{graph_stats, pool, Estimate, GraphStats, PooledStats};

/// Runs `replicas` independent survivals-conditioned simulations; replica
/// `r` uses stream `base.replica(r)`.
pub fn run_replicas(
    params: &ModelParams,
    dist: &SocialIndexDistribution,
    cfg: &ExperimentConfig,
    base: RngStream,
) -> Result<Vec<RunOutcome>, Failure> {
    let out: Result<Vec<_>, _> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| sim::run(params, dist, cfg.stop.into(), base.replica(r), cfg.run_options()))
        .collect();
    Ok(out?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub replica: u64,
    pub stream: u64,
    pub discards: u32,
    pub events: u64,
    pub clock: f64,
    pub stats: GraphStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub schema: u32,
    pub command: String,
    pub config: ExperimentConfig,
    /// `2 alpha E[S] / (lambda + beta + mu)`, when defined.
    pub mean_degree_theory: Option<f64>,
    pub replicas: Vec<ReplicaSummary>,
    pub pooled: PooledStats,
}

fn summarise(cfg: &ExperimentConfig, runs: &[RunOutcome], base: RngStream) -> (Vec<ReplicaSummary>, PooledStats) {
    let lambda = cfg.params().lambda;
    let stats: Vec<GraphStats> = runs.par_iter().map(|o| graph_stats(&o.snapshot, lambda)).collect();
    let ages: Vec<f64> = runs.iter().flat_map(|o| o.snapshot.nodes.iter().map(|n| n.age)).collect();
    let pooled = pool(&stats, &ages, lambda);
    let replicas = runs
        .iter()
        .zip(stats)
        .enumerate()
        .map(|(r, (o, stats))| ReplicaSummary {
            replica: r as u64,
            stream: base.replica(r as u64).stream,
            discards: o.discards,
            events: o.events,
            clock: o.snapshot.time,
            stats,
        })
        .collect();
    (replicas, pooled)
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulateReport, Failure> {
    let params = cfg.params();
    let base = cfg.base_stream();
    let runs = run_replicas(&params, cfg.dist(), cfg, base)?;
    if let Some(dir) = &cfg.out {
        for (r, o) in runs.iter().enumerate() {
            let meta = SnapshotMeta {
                schema: SCHEMA,
                model: cfg.model.clone(),
                seed: cfg.seed,
                stream: base.replica(r as u64).stream,
                discards: o.discards,
                clock: o.snapshot.time,
                events: o.events,
                nodes: o.snapshot.node_count(),
                edge_copies: o.snapshot.edge_copies(),
            };
            write_snapshot(dir, &format!("replica_{r:03}"), &o.snapshot, &meta)?;
        }
    }
    let (replicas, pooled) = summarise(cfg, &runs, base);
    let mean_degree_theory = DegreeLaw::new(params, cfg.dist().clone()).ok().map(|l| l.mean());
    let report = SimulateReport {
        schema: SCHEMA,
        command: "simulate".into(),
        config: cfg.clone(),
        mean_degree_theory,
        replicas,
        pooled,
    };
    if let Some(dir) = &cfg.out {
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

/// Analytic quantities of one version. A quantity the law cannot support
/// (an infinite moment) is `None` with the reason in `refused`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySection {
    pub mean_degree: Option<f64>,
    pub degree_variance: Option<f64>,
    pub edge: Option<EdgeDegreeTheory>,
    pub pmf: Vec<f64>,
    pub pmf_mass: f64,
    pub refused: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub schema: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub moments: [Option<f64>; 3],
    /// `E[S^2] / E[S]^2`
    pub moment_ratio: Option<f64>,
    /// The U-version correlation is positive iff `moment_ratio` is below this.
    pub assortativity_threshold: f64,
    #[serde(rename = "U")]
    pub u: TheorySection,
    #[serde(rename = "P")]
    pub p: TheorySection,
}

fn theory_section(params: ModelParams, dist: &SocialIndexDistribution, kmax: Option<u64>) -> TheorySection {
    let mut refused = Vec::new();
    let mut note = |e: &dyn std::fmt::Display| refused.push(e.to_string());
    let law = DegreeLaw::new(params, dist.clone());
    let mean_degree = law.as_ref().map(|l| l.mean()).map_err(|e| note(e)).ok();
    let degree_variance = degree_mean_var(&params, dist).map(|v| v.1).map_err(|e| note(&e)).ok();
    let edge = edge_degree_theory(&params, dist).map_err(|e| note(&e)).ok();
    let mut pmf = Vec::new();
    if let Ok(l) = &law {
        let k = match kmax {
            Some(k) => Ok(k),
            None => l.suggested_kmax(),
        };
        match k.and_then(|k| l.pmf_table(k)) {
            Ok(t) => pmf = t,
            Err(e) => note(&e),
        }
    }
    let pmf_mass = pmf.iter().sum();
    TheorySection { mean_degree, degree_variance, edge, pmf, pmf_mass, refused }
}

pub fn theory(cfg: &ExperimentConfig) -> Result<TheoryReport, Failure> {
    let params = cfg.params();
    params.validate().map_err(|e| Failure::InvalidConfig(e.to_string()))?;
    let dist = cfg.dist();
    let moments = [1, 2, 3].map(|k| dist.moment(k).finite());
    let moment_ratio = match moments {
        [Some(m1), Some(m2), _] => Some(m2 / (m1 * m1)),
        _ => None,
    };
    let report = TheoryReport {
        schema: SCHEMA,
        command: "theory".into(),
        config: cfg.clone(),
        moments,
        moment_ratio,
        assortativity_threshold: assortativity_threshold(&params)?,
        u: theory_section(params.with_version(Version::U), dist, cfg.kmax),
        p: theory_section(params.with_version(Version::P), dist, cfg.kmax),
    };
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("theory.json"), &report)?;
        write_pmf_csv(&dir.join("pmf.csv"), &report)?;
        write_age_density_csv(&dir.join("edge_age_density.csv"), params, dist)?;
    }
    Ok(report)
}

fn write_pmf_csv(path: &Path, report: &TheoryReport) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "pmf_U", "pmf_P"])?;
    let len = report.u.pmf.len().max(report.p.pmf.len());
    let cell = |t: &[f64], k: usize| t.get(k).map(|v| v.to_string()).unwrap_or_default();
    for k in 0..len {
        w.write_record([k.to_string(), cell(&report.u.pmf, k), cell(&report.p.pmf, k)])?;
    }
    w.flush()?;
    Ok(())
}

/// The stationary age density of an edge end on `[0, 10 / lambda]`.
fn write_age_density_csv(path: &Path, params: ModelParams, dist: &SocialIndexDistribution) -> Result<(), Failure> {
    let law = StationaryEdgeLaw::new(params, dist.clone())?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["age", "density"])?;
    let top = 10.0 / params.lambda;
    for i in 0..=400 {
        let a = top * i as f64 / 400.0;
        w.write_record([a.to_string(), law.age_density(a).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn grid_for(cfg: &ExperimentConfig, kernel: &Kernel, points_factor: usize) -> Result<TypeGrid, Failure> {
    Ok(TypeGrid::new(kernel.lambda, &kernel.dist, cfg.grid.panels, cfg.grid.points * points_factor)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub schema: u32,
    pub command: String,
    pub rho_kappa: f64,
    pub norm_estimate: f64,
    /// `[ages, indices]`
    pub grid_sizes: [usize; 2],
    pub residual: f64,
    pub iterations: usize,
}

fn rho_parts(
    cfg: &ExperimentConfig,
    params: &ModelParams,
) -> Result<(Kernel, TypeGrid, FixedPointSolution, f64), Failure> {
    let kernel = Kernel::model(params, cfg.dist())?;
    let grid = grid_for(cfg, &kernel, 1)?;
    let sol = solve_rho(&kernel, &grid, cfg.iteration())?;
    let norm = operator_norm(&kernel, &grid, cfg.iteration())?.norm;
    Ok((kernel, grid, sol, norm))
}

pub fn rho(cfg: &ExperimentConfig, f_csv: Option<&Path>) -> Result<RhoReport, Failure> {
    let (_, grid, sol, norm) = rho_parts(cfg, &cfg.params())?;
    if let Some(path) = f_csv {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["age", "social_index", "weight", "f"])?;
        let r = grid.indices.len();
        for (i, a) in grid.ages.iter().enumerate() {
            for (k, s) in grid.indices.iter().enumerate() {
                w.write_record([
                    a.to_string(),
                    s.to_string(),
                    grid.weight(i, k).to_string(),
                    sol.f[i * r + k].to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    let report = RhoReport {
        schema: SCHEMA,
        command: "rho".into(),
        rho_kappa: sol.rho_kappa,
        norm_estimate: norm,
        grid_sizes: [grid.ages.len(), grid.indices.len()],
        residual: sol.residual,
        iterations: sol.iterations,
    };
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("rho.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub schema: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub critical: CriticalReport,
    pub rho_kappa: f64,
    pub norm_estimate: f64,
    /// Largest-component fraction over the replicas, when simulation is on.
    pub measured_fraction: Option<Estimate>,
}

fn measured_fraction(cfg: &ExperimentConfig, params: &ModelParams, base: RngStream) -> Result<Estimate, Failure> {
    let runs = run_replicas(params, cfg.dist(), cfg, base)?;
    let fracs: Vec<f64> =
        runs.par_iter().map(|o| dynnet_core::graphstats::largest_component(&o.snapshot).fraction).collect();
    Ok(Estimate::from_values(&fracs))
}

pub fn phase(cfg: &ExperimentConfig) -> Result<PhaseReport, Failure> {
    let params = cfg.params();
    let critical = r_and_verdict(&params, cfg.dist(), cfg.margin)?;
    let (_, _, sol, norm) = rho_parts(cfg, &params)?;
    let measured_fraction = if cfg.simulate { Some(measured_fraction(cfg, &params, cfg.base_stream())?) } else { None };
    let report = PhaseReport {
        schema: SCHEMA,
        command: "phase".into(),
        config: cfg.clone(),
        critical,
        rho_kappa: sol.rho_kappa,
        norm_estimate: norm,
        measured_fraction,
    };
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("phase.json"), &report)?;
    }
    Ok(report)
}

pub fn verdict_label(v: &Verdict) -> &'static str {
    match v {
        Verdict::Giant => "giant",
        Verdict::NoGiant => "no_giant",
        Verdict::NearCritical { .. } => "near_critical",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub param: String,
    pub value: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub verdict: String,
    pub rho_kappa: f64,
    pub measured_fraction: Option<f64>,
}

fn require_sweep(cfg: &ExperimentConfig) -> Result<SweepSpec, Failure> {
    cfg.sweep.ok_or_else(|| Failure::InvalidConfig("this command needs a sweep (param:from:to:steps)".into()))
}

/// `phase --sweep`: one row per sweep value.
pub fn phase_sweep(cfg: &ExperimentConfig) -> Result<Vec<PhaseRow>, Failure> {
    let spec = require_sweep(cfg)?;
    let values = spec.values();
    let rows: Result<Vec<PhaseRow>, Failure> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let params = spec.param.apply(cfg.params(), v);
            let c = r_and_verdict(&params, cfg.dist(), cfg.margin)?;
            let (_, _, sol, _) = rho_parts(cfg, &params)?;
            let measured = if cfg.simulate {
                Some(measured_fraction(cfg, &params, cfg.base_stream().child(i as u64))?.mean)
            } else {
                None
            };
            Ok(PhaseRow {
                param: spec.param.name().into(),
                value: v,
                r: c.r,
                verdict: verdict_label(&c.verdict).into(),
                rho_kappa: sol.rho_kappa,
                measured_fraction: measured,
            })
        })
        .collect();
    let rows = rows?;
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        write_rows(csv::Writer::from_path(dir.join("phase_sweep.csv"))?, &rows)?;
    }
    Ok(rows)
}

pub fn write_rows<W: std::io::Write, T: Serialize>(mut w: csv::Writer<W>, rows: &[T]) -> Result<(), Failure> {
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub replicas: usize,
    pub mean_degree: f64,
    pub mean_degree_theory: Option<f64>,
    pub r_mean: f64,
    pub r_stderr: f64,
    pub correlation_theory: Option<f64>,
    pub largest_fraction: f64,
    pub largest_fraction_stderr: f64,
    pub rho_kappa: Option<f64>,
    #[serde(rename = "R")]
    pub r_ratio: Option<f64>,
}

/// Simulation sweep: every cell runs `replicas` snapshots (cell `i` draws
/// from `base.child(i)`), writes its pooled stats to `cells/cell_<i>.json`,
/// and the rows are merged in cell order.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, Failure> {
    let spec = require_sweep(cfg)?;
    let values = spec.values();
    let cells: Result<Vec<(SweepRow, PooledStats)>, Failure> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let params = spec.param.apply(cfg.params(), v);
            params
                .validate_dynamics()
                .map_err(|e| Failure::InvalidConfig(format!("{}={v}: {e}", spec.param.name())))?;
            let base = cfg.base_stream().child(i as u64);
            let runs = run_replicas(&params, cfg.dist(), cfg, base)?;
            let (_, pooled) = summarise(cfg, &runs, base);
            let theory_ok = params.validate().is_ok();
            let row = SweepRow {
                param: spec.param.name().into(),
                value: v,
                replicas: pooled.replicas,
                mean_degree: pooled.mean_degree,
                mean_degree_theory: DegreeLaw::new(params, cfg.dist().clone()).ok().map(|l| l.mean()),
                r_mean: pooled.assortativity.mean,
                r_stderr: pooled.assortativity.stderr,
                correlation_theory: edge_degree_theory(&params, cfg.dist()).ok().map(|e| e.correlation),
                largest_fraction: pooled.largest_fraction.mean,
                largest_fraction_stderr: pooled.largest_fraction.stderr,
                rho_kappa: if theory_ok { rho_parts(cfg, &params).ok().map(|p| p.2.rho_kappa) } else { None },
                r_ratio: r_and_verdict(&params, cfg.dist(), cfg.margin).ok().map(|c| c.r),
            };
            Ok((row, pooled))
        })
        .collect();
    let cells = cells?;
    if let Some(dir) = &cfg.out {
        let cell_dir = dir.join("cells");
        std::fs::create_dir_all(&cell_dir)?;
        for (i, (_, pooled)) in cells.iter().enumerate() {
            write_json(&cell_dir.join(format!("cell_{i:03}.json")), pooled)?;
        }
        let rows: Vec<&SweepRow> = cells.iter().map(|c| &c.0).collect();
        write_rows(csv::Writer::from_path(dir.join("sweep.csv"))?, &rows)?;
    }
    Ok(cells.into_iter().map(|c| c.0).collect())
}

/// A theory value next to its Monte Carlo estimate.
/// `z = (estimate - theory) / sqrt(stderr^2 + theory_tolerance^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub quantity: String,
    pub theory: f64,
    pub theory_tolerance: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub z: f64,
}

impl CompareRow {
    fn new(quantity: &str, theory: f64, theory_tolerance: f64, est: Estimate) -> Self {
        let z = (est.mean - theory) / (est.stderr * est.stderr + theory_tolerance * theory_tolerance).sqrt();
        CompareRow { quantity: quantity.into(), theory, theory_tolerance, estimate: est.mean, stderr: est.stderr, z }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub rows: Vec<CompareRow>,
}

/// Closed forms are trusted to this relative accuracy.
const CLOSED_FORM_TOL: f64 = 1e-12;

pub fn compare(cfg: &ExperimentConfig) -> Result<CompareReport, Failure> {
    if cfg.replicas < 2 {
        return Err(Failure::InvalidConfig("compare needs at least 2 replicas for a standard error".into()));
    }
    let params = cfg.params();
    params.validate().map_err(|e| Failure::InvalidConfig(e.to_string()))?;
    let dist = cfg.dist();
    let base = cfg.base_stream();
    let runs = run_replicas(&params, dist, cfg, base)?;
    let (replicas, pooled) = summarise(cfg, &runs, base);
    let variances: Vec<f64> = runs
        .iter()
        .map(|o| {
            let n = o.snapshot.nodes.len() as f64;
            let m = o.snapshot.mean_degree();
            o.snapshot.nodes.iter().map(|x| (x.degree as f64 - m).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    let mut rows = Vec::new();
    let (mean, var) = degree_mean_var(&params, dist)?;
    rows.push(CompareRow::new("mean_degree", mean, CLOSED_FORM_TOL * mean, pooled.mean_degree_estimate));
    rows.push(CompareRow::new("degree_variance", var, CLOSED_FORM_TOL * var, Estimate::from_values(&variances)));
    if let Ok(e) = edge_degree_theory(&params, dist) {
        let rs: Vec<f64> = replicas.iter().filter_map(|r| r.stats.assortativity.r()).collect();
        rows.push(CompareRow::new(
            "degree_correlation",
            e.correlation,
            CLOSED_FORM_TOL * e.correlation.abs(),
            Estimate::from_values(&rs),
        ));
    }
    // grid error of rho_kappa: difference to the grid with twice the points
    let kernel = Kernel::model(&params, dist)?;
    let coarse = solve_rho(&kernel, &grid_for(cfg, &kernel, 1)?, cfg.iteration())?.rho_kappa;
    let fine = solve_rho(&kernel, &grid_for(cfg, &kernel, 2)?, cfg.iteration())?.rho_kappa;
    rows.push(CompareRow::new(
        "largest_fraction",
        fine,
        (fine - coarse).abs().max(cfg.tolerance),
        pooled.largest_fraction,
    ));
    let report = CompareReport { schema: SCHEMA, command: "compare".into(), config: cfg.clone(), rows };
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("compare.json"), &report)?;
    }
    Ok(report)
}
