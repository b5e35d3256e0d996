//! Offline (training) and online (evaluation) phases, error norms and MORscores.

mod report;
mod score;

pub use report::{svg_chart, write_report, write_solution, Series};
pub use score::{error_norm, morscore, param_norm, relative_error, time_norm, NormOrder, EPS_MACH};

use crate::config::GlobalConfig;
use crate::error::{Error, Result};
use crate::gasmodel::{DiscreteModel, Discretization, Params};
use crate::gramians::{anchors, theta_grid, BankStats, Scaling, TrainingSetup, TrajectoryBank};
use crate::reductors::{reduce, Method, ProjectorSeries};
use crate::rom::{project, simulate_rom};
use crate::steady::{prepare, Prepared, SteadyOptions, SteadySolver};
use crate::store::{save_rom, GramianCache, RomFile, RomHeader};
use crate::timestep::{solve, Scenario, Solver, StepOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

/// Steady-state options derived from the global configuration.
pub fn steady_options(cfg: &GlobalConfig) -> SteadyOptions {
    SteadyOptions { tol: cfg.steady_tol, max_corrections: cfg.steady_corrections, ..SteadyOptions::with_step(cfg.dt) }
}

/// Training setup derived from the global configuration and a training scenario.
pub fn training_setup(cfg: &GlobalConfig, horizon: f64, solver: Solver) -> TrainingSetup {
    TrainingSetup { horizon, h: cfg.dt, shape: cfg.shape, scaling: Scaling::Relative(cfg.scale), solver, seed: cfg.seed }
}

/// Outcome of training one reductor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OfflineEntry {
    pub method: String,
    pub path: Option<PathBuf>,
    pub seconds: f64,
    pub rank_p: usize,
    pub rank_q: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OfflineReport {
    pub entries: Vec<OfflineEntry>,
    pub stats: BankStats,
    pub anchor_seconds: f64,
}

impl OfflineReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.error.is_none())
    }
}

/// Offline phase: steady anchors on the training grid, shared trajectory bank, one
/// `.rom` file per method in `out_dir`.
#[allow(clippy::too_many_arguments)]
pub fn run_offline(
    model: &DiscreteModel<f64>,
    training: &Scenario<f64>,
    solver: Solver,
    methods: &[Method],
    cfg: &GlobalConfig,
    out_dir: &Path,
    cache: Option<GramianCache>,
) -> Result<(OfflineReport, TrajectoryBank<f64>)> {
    if let Some(m) = methods.iter().find(|m| m.dual && model.disc != Discretization::Endpoint) {
        return Err(Error::Unsupported(format!("{m} requires the ode_end model, got {}", model.disc)));
    }
    let model = model.with_compressor_targets(&training.cp)?;
    let scn = training.fit(model.ns, model.nd)?;
    let (sbar, dbar) = scn.initial();
    let thetas: Vec<Params<f64>> = theta_grid(cfg.t0_range, cfg.rs_range);
    let start = Instant::now();
    let anc = anchors(&model, &sbar, &dbar, &thetas, &steady_options(cfg))?;
    let anchor_seconds = start.elapsed().as_secs_f64();
    let center = anc.last().expect("nonempty grid");
    let (pbar, qbar) = center.xbar.as_slice().split_at(model.np);
    let (pbar, qbar) = (pbar.to_vec(), qbar.to_vec());
    let mut bank = TrajectoryBank::new(anc, training_setup(cfg, scn.th, solver))?;
    if let Some(c) = cache {
        bank = bank.with_disk_cache(c);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::new();
    for &m in methods {
        let t = Instant::now();
        let res = reduce(m, &bank, cfg.order_max);
        let seconds = t.elapsed().as_secs_f64();
        let entry = match res {
            Ok(series) => {
                let path = out_dir.join(format!("{}.rom", m.id()));
                let header = RomHeader {
                    method: m.id(),
                    model_hash: model.hash.clone(),
                    model: model.disc.id().to_string(),
                    solver: solver.id().to_string(),
                    thetas: thetas.iter().map(|p| (p.t0, p.rs)).collect(),
                    galerkin: series.galerkin,
                    np: model.np,
                    nq: model.nq,
                    rank_p: series.rank_p(),
                    rank_q: series.rank_q(),
                    pbar: pbar.clone(),
                    qbar: qbar.clone(),
                    offline_seconds: seconds,
                };
                let (rp, rq) = (series.rank_p(), series.rank_q());
                save_rom(&path, &RomFile { header, series })?;
                log::info!("{m}: ranks ({rp}, {rq}) in {seconds:.2} s");
                OfflineEntry { method: m.id(), path: Some(path), seconds, rank_p: rp, rank_q: rq, error: None }
            }
            Err(e) => {
                log::warn!("{m}: {e}");
                OfflineEntry { method: m.id(), path: None, seconds, rank_p: 0, rank_q: 0, error: Some(e.to_string()) }
            }
        };
        entries.push(entry);
    }
    let stats = bank.stats();
    Ok((OfflineReport { entries, stats, anchor_seconds }, bank))
}

/// One point of an error curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub order: usize,
    pub np: usize,
    pub nq: usize,
    /// Relative (2,2) error.
    pub l2l2: f64,
    pub l1l1: f64,
    pub linf: f64,
    pub unstable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub curve: Vec<CurvePoint>,
    pub morscore: f64,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

/// Resolved configuration of an online run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model_hash: String,
    pub model: String,
    pub solver: String,
    pub dt: f64,
    pub horizon: f64,
    pub order_max: usize,
    pub seed: u64,
    pub test_thetas: Vec<(f64, f64)>,
    pub fom_solves: usize,
    pub fom_seconds: f64,
    /// Maximal per-step relative output error of the identity projection.
    pub exactness: Option<f64>,
    pub eps_mach: f64,
    pub config: GlobalConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<MethodResult>,
    pub meta: ReportMeta,
}

impl BenchReport {
    pub fn score(&self, method: &str) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.morscore)
    }
}

#[derive(Clone, Debug)]
pub struct OnlineOptions {
    pub order_max: usize,
    pub samples: usize,
    pub seed: u64,
    /// Adds the identity-projection row (first sample only).
    pub exactness_check: bool,
}

impl OnlineOptions {
    pub fn from_config(cfg: &GlobalConfig) -> Self {
        OnlineOptions { order_max: cfg.order_max, samples: cfg.test_samples, seed: cfg.seed, exactness_check: false }
    }
}

/// Uniform random parameter samples from the configured box.
pub fn sample_thetas(cfg: &GlobalConfig, n: usize, seed: u64) -> Vec<Params<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Params {
            t0: rng.random_range(cfg.t0_range.0..=cfg.t0_range.1),
            rs: rng.random_range(cfg.rs_range.0..=cfg.rs_range.1),
        })
        .collect()
}

/// Perturbs the demands of every breakpoint by d̄·scale·U(−1, 1).
pub fn random_load_profile(base: &Scenario<f64>, scale: f64, seed: u64) -> Scenario<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = base.clone();
    let d0 = base.uq[0].clone();
    for row in s.uq.iter_mut() {
        for (v, d) in row.iter_mut().zip(&d0) {
            *v = d * (1.0 + scale * rng.random_range(-1.0..=1.0));
        }
    }
    s
}

/// Per-θ full-order references.
pub struct Reference {
    pub prepared: Vec<Prepared<f64>>,
    pub y: Vec<DMatrix<f64>>,
    pub scenario: Scenario<f64>,
    pub solves: usize,
    pub seconds: f64,
}

/// Full-order simulation at every test sample.
pub fn reference(
    model: &DiscreteModel<f64>,
    test: &Scenario<f64>,
    solver: Solver,
    thetas: &[Params<f64>],
    cfg: &GlobalConfig,
) -> Result<Reference> {
    let model = model.with_compressor_targets(&test.cp)?;
    let scn = test.fit(model.ns, model.nd)?;
    let (sbar, dbar) = scn.initial();
    let ss = SteadySolver::new(&model)?;
    let opts = StepOptions::new(cfg.dt, scn.th);
    let solves = AtomicUsize::new(0);
    let start = Instant::now();
    let runs: Vec<Result<(Prepared<f64>, DMatrix<f64>)>> = thetas
        .par_iter()
        .map(|th| {
            let p = prepare(
                &model,
                &ss,
                &sbar,
                &dbar,
                th,
                model.config.compressibility,
                model.config.critical,
                &steady_options(cfg),
            )?;
            let sys = p.model.bind(p.gas, p.steady.state())?;
            let sol = solve(&sys, &scn, solver, &opts)?;
            solves.fetch_add(1, Ordering::Relaxed);
            Ok((p, sol.y))
        })
        .collect();
    let mut prepared = Vec::new();
    let mut y = Vec::new();
    for r in runs {
        let (p, yy) = r?;
        prepared.push(p);
        y.push(yy);
    }
    Ok(Reference { prepared, y, scenario: scn, solves: solves.into_inner(), seconds: start.elapsed().as_secs_f64() })
}

/// Joint order n split as n_p = ⌈n/2⌉, n_q = ⌊n/2⌋, clamped to the series ranks.
pub fn split_order(n: usize, rank_p: usize, rank_q: usize) -> (usize, usize) {
    (n.div_ceil(2).min(rank_p), (n / 2).min(rank_q))
}

/// Relative errors of one ROM order over all samples; `None` if any sample failed.
fn rom_errors(
    series: &ProjectorSeries<f64>,
    np: usize,
    nq: usize,
    r: &Reference,
    solver: Solver,
    opts: &StepOptions,
) -> Option<[f64; 3]> {
    let mut yt = Vec::with_capacity(r.prepared.len());
    for p in &r.prepared {
        let rom = project(&p.model, series, np, nq).ok()?;
        match simulate_rom(&rom, p, &r.scenario, solver, opts) {
            Ok(s) => yt.push(s.y),
            Err(e) => {
                log::debug!("{} at ({np}, {nq}): {e}", series.method);
                return None;
            }
        }
    }
    let f = |k, l| relative_error(&r.y, &yt, opts.h, k, l).ok();
    Some([
        f(NormOrder::Two, NormOrder::Two)?,
        f(NormOrder::One, NormOrder::One)?,
        f(NormOrder::Inf, NormOrder::Inf)?,
    ])
}

/// Largest per-step relative output deviation of the identity-projected model.
pub fn exactness(r: &Reference, solver: Solver, dt: f64) -> Result<f64> {
    let p = &r.prepared[0];
    let id = ProjectorSeries::identity(p.model.np, p.model.nq);
    let rom = project(&p.model, &id, p.model.np, p.model.nq)?;
    let sol = simulate_rom(&rom, p, &r.scenario, solver, &StepOptions::new(dt, r.scenario.th))?;
    let y = &r.y[0];
    Ok((0..y.ncols())
        .map(|k| (sol.y.column(k) - y.column(k)).norm() / y.column(k).norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max))
}

/// Online phase: full-order references once per test sample, then every method at
/// every order 1..=order_max.
pub fn run_online(
    model: &DiscreteModel<f64>,
    test: &Scenario<f64>,
    solver: Solver,
    roms: &[RomFile<f64>],
    cfg: &GlobalConfig,
    opts: &OnlineOptions,
) -> Result<BenchReport> {
    for r in roms {
        if r.header.model_hash != model.hash {
            return Err(Error::Provenance(format!(
                "{}: trained on model {} but evaluating {}",
                r.header.method, r.header.model_hash, model.hash
            )));
        }
        if r.header.solver != solver.id() {
            return Err(Error::Provenance(format!(
                "{}: trained with solver {} but evaluating {}",
                r.header.method,
                r.header.solver,
                solver.id()
            )));
        }
    }
    if opts.order_max == 0 {
        return Err(Error::Invalid("order_max must be positive".into()));
    }
    let thetas = sample_thetas(cfg, opts.samples, opts.seed);
    let r = reference(model, test, solver, &thetas, cfg)?;
    let step = StepOptions::new(cfg.dt, r.scenario.th);
    let exact = if opts.exactness_check { Some(exactness(&r, solver, cfg.dt)?) } else { None };

    // unique (method, np, nq) jobs; saturated orders reuse the same ROM
    let mut jobs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, rf) in roms.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        for n in 1..=opts.order_max {
            let (np, nq) = split_order(n, rf.series.rank_p(), rf.series.rank_q());
            if seen.insert((np, nq)) {
                jobs.push((i, np, nq));
            }
        }
    }
    let results: Vec<(Option<[f64; 3]>, f64)> = jobs
        .par_iter()
        .map(|&(i, np, nq)| {
            let t = Instant::now();
            let e = rom_errors(&roms[i].series, np, nq, &r, solver, &step);
            (e, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut table: BTreeMap<(usize, usize, usize), Option<[f64; 3]>> = BTreeMap::new();
    let mut online = vec![0.0; roms.len()];
    for (&(i, np, nq), (e, secs)) in jobs.iter().zip(results) {
        table.insert((i, np, nq), e);
        online[i] += secs;
    }
    let mut methods = Vec::new();
    for (i, rf) in roms.iter().enumerate() {
        let curve: Vec<CurvePoint> = (1..=opts.order_max)
            .map(|n| {
                let (np, nq) = split_order(n, rf.series.rank_p(), rf.series.rank_q());
                match table[&(i, np, nq)] {
                    Some([a, b, c]) => CurvePoint { order: n, np, nq, l2l2: a, l1l1: b, linf: c, unstable: false },
                    None => CurvePoint { order: n, np, nq, l2l2: 1.0, l1l1: 1.0, linf: 1.0, unstable: true },
                }
            })
            .collect();
        let errs: Vec<f64> = curve.iter().map(|c| c.l2l2).collect();
        methods.push(MethodResult {
            method: rf.header.method.clone(),
            morscore: morscore(&errs, EPS_MACH)?,
            curve,
            offline_seconds: rf.header.offline_seconds,
            online_seconds: online[i],
        });
    }
    Ok(BenchReport {
        methods,
        meta: ReportMeta {
            model_hash: model.hash.clone(),
            model: model.disc.id().to_string(),
            solver: solver.id().to_string(),
            dt: cfg.dt,
            horizon: r.scenario.th,
            order_max: opts.order_max,
            seed: opts.seed,
            test_thetas: thetas.iter().map(|p| (p.t0, p.rs)).collect(),
            fom_solves: r.solves,
            fom_seconds: r.seconds,
            exactness: exact,
            eps_mach: EPS_MACH,
            config: cfg.clone(),
        },
    })
}

/// Reads and parses a `.net` file.
pub fn load_network(path: &Path) -> Result<crate::netgraph::Network> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    crate::netgraph::parse_net(&text)
}

/// Assembles the model of a network with the CFL-derived nominal length of `cfg`.
pub fn model_for(
    net: &crate::netgraph::Network,
    disc: Discretization,
    cfg: &GlobalConfig,
) -> Result<(DiscreteModel<f64>, crate::netgraph::RefinementResult)> {
    let dx = crate::netgraph::nominal_length(cfg.dt, cfg.v_max, cfg.eps)?;
    crate::gasmodel::build_model(net, dx, disc, &cfg.model)
}
