use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gasmor::bench::{self, OnlineOptions};
use gasmor::config::GlobalConfig;
use gasmor::gasmodel::Discretization;
use gasmor::reductors::Method;
use gasmor::steady::{prepare, SteadySolver};
use gasmor::store::{load_rom, GramianCache};
use gasmor::timestep::{solve, Scenario, Solver, StepOptions};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "gasmor", version, about = "Gas network simulation and model order reduction")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Discretization: ode_end or ode_mid.
    #[arg(long, default_value = "ode_end")]
    model: String,
    /// Time stepper: imex1, imex2 or rk4 (defaults to the configured one).
    #[arg(long)]
    solver: Option<String>,
    /// Time step in seconds (overrides the configuration).
    #[arg(long)]
    dt: Option<f64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Global configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train reductors on a training scenario and write .rom files.
    Offline {
        network: PathBuf,
        training: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Comma separated reductor ids, `all` (13 methods) or `all_l` (dual variants).
        #[arg(long, default_value = "all")]
        methods: String,
        #[arg(long)]
        order_max: Option<usize>,
        #[arg(long, default_value = "roms")]
        out: PathBuf,
    },
    /// Evaluate .rom files on a test scenario and write a report directory.
    Online {
        network: PathBuf,
        test: PathBuf,
        roms: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        order_max: Option<usize>,
        /// Number of random parameter samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Also check the identity projection.
        #[arg(long)]
        exactness: bool,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Simulate the full-order model on a scenario.
    Simulate {
        network: PathBuf,
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "sim")]
        out: PathBuf,
    },
}

struct Resolved {
    cfg: GlobalConfig,
    disc: Discretization,
    solver: Solver,
}

fn resolve(c: &Common) -> Result<Resolved> {
    let mut cfg = match &c.config {
        Some(p) => GlobalConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => GlobalConfig::default(),
    };
    if let Some(dt) = c.dt {
        if !(dt > 0.0) {
            bail!("--dt must be positive");
        }
        cfg.dt = dt;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(s) = &c.solver {
        cfg.solver = s.clone();
    }
    let solver = Solver::with_params(&cfg.solver, cfg.gamma, cfg.lambda)?;
    let disc: Discretization = c.model.parse()?;
    if let Some(w) = c.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global().ok();
    }
    Ok(Resolved { cfg, disc, solver })
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok {
            "all" => out.extend(Method::all()),
            "all_l" => out.extend(Method::all_dual()),
            t => out.push(t.parse()?),
        }
    }
    if out.is_empty() {
        bail!("no reductors selected");
    }
    Ok(out)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn offline(network: &Path, training: &Path, common: &Common, methods: &str, order_max: Option<usize>, out: &Path) -> Result<bool> {
    let mut r = resolve(common)?;
    if let Some(n) = order_max {
        r.cfg.order_max = n;
    }
    let methods = parse_methods(methods)?;
    let net = bench::load_network(network)?;
    let (model, _) = bench::model_for(&net, r.disc, &r.cfg)?;
    let scn = Scenario::load(training)?;
    let cache = r.cfg.cache_dir.as_ref().map(GramianCache::new).transpose()?;
    let (rep, _) = bench::run_offline(&model, &scn, r.solver, &methods, &r.cfg, out, cache)?;
    println!("{:<12} {:>10} {:>8} {:>8}  status", "method", "seconds", "rank_p", "rank_q");
    for e in &rep.entries {
        let status = e.error.as_deref().unwrap_or("ok");
        println!("{:<12} {:>10.3} {:>8} {:>8}  {status}", e.method, e.seconds, e.rank_p, e.rank_q);
    }
    println!(
        "trajectories: {} input, {} state, {} dual; {} solves; Gramian cache hits: {}",
        rep.stats.input_runs, rep.stats.state_runs, rep.stats.dual_runs, rep.stats.solves, rep.stats.cache_hits
    );
    log::info!("Gramian cache hits: {}", rep.stats.cache_hits);
    write_json(
        &out.join("manifest.json"),
        &serde_json::json!({
            "command": "offline",
            "network": network,
            "training": training,
            "model": r.disc.id(),
            "solver": r.solver,
            "states": model.n_state(),
            "model_hash": model.hash,
            "config": r.cfg,
            "report": rep,
        }),
    )?;
    Ok(rep.all_ok())
}

#[allow(clippy::too_many_arguments)]
fn online(
    network: &Path,
    test: &Path,
    roms: &[PathBuf],
    common: &Common,
    order_max: Option<usize>,
    samples: Option<usize>,
    exactness: bool,
    out: &Path,
) -> Result<bool> {
    let mut r = resolve(common)?;
    if let Some(n) = order_max {
        r.cfg.order_max = n;
    }
    if let Some(s) = samples {
        r.cfg.test_samples = s;
    }
    if roms.is_empty() {
        bail!("no .rom files given");
    }
    let net = bench::load_network(network)?;
    let (model, _) = bench::model_for(&net, r.disc, &r.cfg)?;
    let scn = Scenario::load(test)?;
    let files = roms
        .iter()
        .map(|p| load_rom::<f64>(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let opts = OnlineOptions { exactness_check: exactness, ..OnlineOptions::from_config(&r.cfg) };
    let report = bench::run_online(&model, &scn, r.solver, &files, &r.cfg, &opts)?;
    bench::write_report(&report, out)?;
    println!("{:<12} {:>9} {:>12}", "method", "MORscore", "min error");
    for m in &report.methods {
        let min = m.curve.iter().map(|c| c.l2l2).fold(f64::INFINITY, f64::min);
        println!("{:<12} {:>9.4} {:>12.3e}", m.method, m.morscore, min);
    }
    if let Some(e) = report.meta.exactness {
        println!("identity projection: max relative output deviation {e:.3e}");
    }
    println!("report written to {}", out.display());
    Ok(true)
}

fn simulate(network: &Path, scenario: &Path, common: &Common, out: &Path) -> Result<bool> {
    let r = resolve(common)?;
    let net = bench::load_network(network)?;
    let (model, _) = bench::model_for(&net, r.disc, &r.cfg)?;
    let scn = Scenario::load(scenario)?;
    let model = model.with_compressor_targets(&scn.cp)?;
    let scn = scn.fit(model.ns, model.nd)?;
    let (sbar, dbar) = scn.initial();
    let ss = SteadySolver::new(&model)?;
    let p = prepare(
        &model,
        &ss,
        &sbar,
        &dbar,
        &scn.params(),
        model.config.compressibility,
        model.config.critical,
        &bench::steady_options(&r.cfg),
    )?;
    let sys = p.model.bind(p.gas, p.steady.state())?;
    let sol = solve(&sys, &scn, r.solver, &StepOptions::new(r.cfg.dt, scn.th))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let labels: Vec<String> = (0..model.ns)
        .map(|i| format!("s_q{i}"))
        .chain((0..model.nd).map(|i| format!("d_p{i}")))
        .collect();
    bench::write_solution(&sol.t, &sol.y, &labels, &out.join("outputs.csv"), Some(&out.join("outputs.svg")))?;
    let ut: Vec<f64> = scn.ut.clone();
    let bnd: Vec<String> = (0..model.ns)
        .map(|i| format!("s_p{i}"))
        .chain((0..model.nd).map(|i| format!("d_q{i}")))
        .collect();
    let bvals = gasmor::nalgebra::DMatrix::from_fn(model.n_ports(), ut.len(), |i, k| {
        if i < model.ns {
            scn.up[k][i]
        } else {
            scn.uq[k][i - model.ns]
        }
    });
    bench::write_solution(&ut, &bvals, &bnd, &out.join("boundary.csv"), Some(&out.join("boundary.svg")))?;
    write_json(
        &out.join("manifest.json"),
        &serde_json::json!({
            "command": "simulate",
            "network": network,
            "scenario": scenario,
            "model": r.disc.id(),
            "solver": r.solver,
            "states": model.n_state(),
            "model_hash": model.hash,
            "steady_residual": p.steady.residual,
            "rows": sol.t.len(),
            "runtime_s": sol.runtime,
            "config": r.cfg,
        }),
    )?;
    println!("{} states, {} output rows in {:.2} s -> {}", model.n_state(), sol.t.len(), sol.runtime, out.display());
    Ok(true)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Offline { network, training, common, methods, order_max, out } => {
            offline(network, training, common, methods, *order_max, out)
        }
        Cmd::Online { network, test, roms, common, order_max, samples, exactness, out } => {
            online(network, test, roms, common, *order_max, *samples, *exactness, out)
        }
        Cmd::Simulate { network, scenario, common, out } => simulate(network, scenario, common, out),
    };
    match res {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("error: some artifacts were not written");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
