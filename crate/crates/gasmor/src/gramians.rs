//! Structured empirical Gramians from perturbation trajectories around steady states,
//! summed over parameter samples.
//!
//! Three kinds of runs are used: input runs (one boundary port perturbed, states
//! recorded), state runs (one initial state component perturbed, outputs recorded) and
//! dual runs (one dual input perturbed, E·z recorded). Each kind is simulated once per
//! parameter sample and shared by every Gramian that needs it.

use crate::config::InputShape;
use crate::error::{Error, Result};
use crate::gasmodel::{DiscreteModel, GasState, Params};
use crate::scalar::Scalar;
use crate::store::{digest, GramianCache};
use crate::steady::{prepare, SteadyOptions, SteadySolver};
use crate::timestep::{solve, Dynamics, Solver, StepOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GramianKind {
    WR,
    WO,
    WX,
    WZ,
}

/// Per-variable Gramian blocks.
#[derive(Clone, Debug)]
pub struct GramianPair<T: Scalar> {
    pub wp: DMatrix<T>,
    pub wq: DMatrix<T>,
    pub kind: GramianKind,
    pub dual_based: bool,
}

impl<T: Scalar> GramianPair<T> {
    pub fn block(&self, pressure: bool) -> &DMatrix<T> {
        if pressure {
            &self.wp
        } else {
            &self.wq
        }
    }
}

/// Perturbation magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scaling {
    /// Fraction of the steady boundary values (per port) and of the mean steady state
    /// magnitude (per variable block). Dual inputs use unit magnitude.
    Relative(f64),
    /// The same magnitude for every perturbation.
    Absolute(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetup {
    /// seconds
    pub horizon: f64,
    /// seconds
    pub h: f64,
    pub shape: InputShape,
    pub scaling: Scaling,
    pub solver: Solver,
    /// Seed for random-binary inputs.
    pub seed: u64,
}

impl TrainingSetup {
    pub fn new(h: f64, solver: Solver) -> Self {
        TrainingSetup {
            horizon: 3600.0,
            h,
            shape: InputShape::Step,
            scaling: Scaling::Relative(0.01),
            solver,
            seed: 7,
        }
    }
}

/// Sparse training grid: the four corners and the center of the parameter box.
pub fn theta_grid<T: Scalar>(t0: (f64, f64), rs: (f64, f64)) -> Vec<Params<T>> {
    let mid = |r: (f64, f64)| 0.5 * (r.0 + r.1);
    [(t0.0, rs.0), (t0.1, rs.0), (t0.0, rs.1), (t0.1, rs.1), (mid(t0), mid(rs))]
        .into_iter()
        .map(|(a, b)| Params { t0: T::lit(a), rs: T::lit(b) })
        .collect()
}

/// A model linearization point for one parameter sample.
#[derive(Clone, Debug)]
pub struct Anchor<T: Scalar> {
    pub params: Params<T>,
    pub model: DiscreteModel<T>,
    pub gas: GasState<T>,
    pub xbar: DVector<T>,
    pub ubar: Vec<T>,
}

impl<T: Scalar> Anchor<T> {
    pub fn ybar(&self) -> Vec<T> {
        let mut y = vec![T::zero(); self.model.n_ports()];
        self.model.output(self.xbar.as_slice(), &mut y);
        y
    }
}

/// Prepares steady-state anchors for every parameter sample.
pub fn anchors<T: Scalar>(
    model: &DiscreteModel<T>,
    sbar: &[T],
    dbar: &[T],
    thetas: &[Params<T>],
    steady_opts: &SteadyOptions,
) -> Result<Vec<Anchor<T>>> {
    let solver = SteadySolver::new(model)?;
    thetas
        .iter()
        .map(|th| {
            let p = prepare(
                model,
                &solver,
                sbar,
                dbar,
                th,
                model.config.compressibility,
                model.config.critical,
                steady_opts,
            )?;
            Ok(Anchor {
                params: *th,
                xbar: p.steady.state(),
                ubar: p.steady.input(),
                model: p.model,
                gas: p.gas,
            })
        })
        .collect()
}

/// Centered trajectories of one parameter sample.
struct ThetaRuns<T: Scalar> {
    /// Input runs: centered states, N × K (left-rectangle columns only).
    x: Vec<DMatrix<T>>,
}

struct ThetaOutputs<T: Scalar> {
    /// Per output m: K × N matrix, entry (t, j) = output m at time t under state
    /// perturbation j.
    y: Vec<DMatrix<T>>,
}

/// Simulates and caches training trajectories; counts solves and reuse.
pub struct TrajectoryBank<T: Scalar> {
    pub anchors: Vec<Anchor<T>>,
    pub setup: TrainingSetup,
    input_runs: OnceLock<Vec<ThetaRuns<T>>>,
    state_runs: OnceLock<Vec<ThetaOutputs<T>>>,
    dual_runs: OnceLock<Vec<ThetaRuns<T>>>,
    gramians: Mutex<Vec<(GramianKind, bool, GramianPair<T>)>>,
    disk: Option<GramianCache>,
    solves: AtomicUsize,
    hits: AtomicUsize,
}

/// Counters of a [`TrajectoryBank`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BankStats {
    pub input_runs: usize,
    pub state_runs: usize,
    pub dual_runs: usize,
    pub solves: usize,
    pub cache_hits: usize,
}

impl<T: Scalar> TrajectoryBank<T> {
    pub fn new(anchors: Vec<Anchor<T>>, setup: TrainingSetup) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::Invalid("at least one parameter sample is required".into()));
        }
        if !(setup.horizon > 0.0 && setup.h > 0.0 && setup.horizon >= setup.h) {
            return Err(Error::Invalid("training horizon and step must be positive".into()));
        }
        Ok(TrajectoryBank {
            anchors,
            setup,
            input_runs: OnceLock::new(),
            state_runs: OnceLock::new(),
            dual_runs: OnceLock::new(),
            gramians: Mutex::new(Vec::new()),
            disk: None,
            solves: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        })
    }

    /// Also looks Gramians up in (and writes them to) an on-disk cache.
    pub fn with_disk_cache(mut self, cache: GramianCache) -> Self {
        self.disk = Some(cache);
        self
    }

    /// Training provenance: model, setup and parameter samples.
    pub fn cache_key(&self) -> String {
        let thetas: Vec<(f64, f64)> =
            self.anchors.iter().map(|a| (a.params.t0.to_f64_lossy(), a.params.rs.to_f64_lossy())).collect();
        let setup = serde_json::to_string(&self.setup).unwrap_or_default();
        let ubar: Vec<f64> = self.anchors[0].ubar.iter().map(|v| v.to_f64_lossy()).collect();
        digest(&format!("{}|{setup}|{thetas:?}|{ubar:?}|{}", self.model().hash, std::any::type_name::<T>()))
    }

    fn model(&self) -> &DiscreteModel<T> {
        &self.anchors[0].model
    }

    pub fn n_ports(&self) -> usize {
        self.model().n_ports()
    }

    pub fn stats(&self) -> BankStats {
        let m = self.n_ports();
        let n = self.model().n_state();
        let k = self.anchors.len();
        BankStats {
            input_runs: if self.input_runs.get().is_some() { m * k } else { 0 },
            state_runs: if self.state_runs.get().is_some() { n * k } else { 0 },
            dual_runs: if self.dual_runs.get().is_some() { m * k } else { 0 },
            solves: self.solves.load(Ordering::Relaxed),
            cache_hits: self.hits.load(Ordering::Relaxed),
        }
    }

    /// Left-rectangle sample count.
    fn k_steps(&self) -> usize {
        StepOptions::new(self.setup.h, self.setup.horizon).n_points() - 1
    }

    fn input_scales(&self, a: &Anchor<T>) -> Vec<T> {
        match self.setup.scaling {
            Scaling::Absolute(c) => vec![T::lit(c); a.ubar.len()],
            Scaling::Relative(c) => {
                let ns = a.model.ns;
                let mean = |v: &[T]| {
                    if v.is_empty() {
                        T::zero()
                    } else {
                        v.iter().fold(T::zero(), |s, x| s + x.abs()) / T::lit(v.len() as f64)
                    }
                };
                let (ms, md) = (mean(&a.ubar[..ns]), mean(&a.ubar[ns..]));
                a.ubar
                    .iter()
                    .enumerate()
                    .map(|(i, u)| {
                        let fallback = if i < ns { ms } else { md };
                        let base = if *u != T::zero() { u.abs() } else if fallback > T::zero() { fallback } else { T::one() };
                        T::lit(c) * base
                    })
                    .collect()
            }
        }
    }

    fn state_scales(&self, a: &Anchor<T>) -> (T, T) {
        match self.setup.scaling {
            Scaling::Absolute(c) => (T::lit(c), T::lit(c)),
            Scaling::Relative(c) => {
                let np = a.model.np;
                let mean = |v: &[T]| {
                    let m = v.iter().fold(T::zero(), |s, x| s + x.abs()) / T::lit(v.len().max(1) as f64);
                    if m > T::zero() {
                        m
                    } else {
                        T::one()
                    }
                };
                let x = a.xbar.as_slice();
                (T::lit(c) * mean(&x[..np]), T::lit(c) * mean(&x[np..]))
            }
        }
    }

    /// Waveform factor of the training input at step index k.
    fn waveform(&self, m: usize, k: usize) -> T {
        let h = self.setup.h;
        match self.setup.shape {
            InputShape::Step => T::one(),
            InputShape::Impulse => {
                if k == 0 {
                    T::lit(1.0 / h)
                } else {
                    T::zero()
                }
            }
            InputShape::Binary => {
                // sign changes every 10 steps, one seeded sequence per port
                let mut rng = ChaCha8Rng::seed_from_u64(self.setup.seed.wrapping_add(m as u64));
                let mut s = 1.0;
                for _ in 0..=(k / 10) {
                    s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                T::lit(s)
            }
            InputShape::Gauss => {
                let t = k as f64 * h;
                let c = 0.1 * self.setup.horizon;
                let w = 0.05 * self.setup.horizon;
                T::lit((-((t - c) / w).powi(2)).exp())
            }
        }
    }

    fn run_opts(&self, states: bool) -> StepOptions {
        let o = StepOptions::new(self.setup.h, self.setup.horizon);
        if states {
            o.with_states()
        } else {
            o
        }
    }

    fn input_runs(&self) -> Result<&Vec<ThetaRuns<T>>> {
        if let Some(r) = self.input_runs.get() {
            return Ok(r);
        }
        let m = self.n_ports();
        let jobs: Vec<(usize, usize)> = (0..self.anchors.len()).flat_map(|k| (0..m).map(move |i| (k, i))).collect();
        let kk = self.k_steps();
        let h = self.setup.h;
        let results: Vec<Result<DMatrix<T>>> = jobs
            .par_iter()
            .map(|&(k, i)| {
                let a = &self.anchors[k];
                let scale = self.input_scales(a)[i];
                let sys = a.model.bind(a.gas, a.xbar.clone())?;
                let ubar = a.ubar.clone();
                let u = move |t: T, out: &mut [T]| {
                    out.copy_from_slice(&ubar);
                    let step = (t.to_f64_lossy() / h + 1e-9).floor() as usize;
                    out[i] += scale * self.waveform(i, step);
                };
                let sol = solve(&sys, &u, self.setup.solver, &self.run_opts(true))?;
                self.solves.fetch_add(1, Ordering::Relaxed);
                let xs = sol.x.expect("states captured");
                let mut c = xs.columns(0, kk).into_owned();
                for mut col in c.column_iter_mut() {
                    col -= &a.xbar;
                }
                Ok(c)
            })
            .collect();
        let mut out: Vec<ThetaRuns<T>> = (0..self.anchors.len()).map(|_| ThetaRuns { x: Vec::new() }).collect();
        for ((k, _), r) in jobs.into_iter().zip(results) {
            out[k].x.push(r?);
        }
        let _ = self.input_runs.set(out);
        Ok(self.input_runs.get().unwrap())
    }

    fn state_runs(&self) -> Result<&Vec<ThetaOutputs<T>>> {
        if let Some(r) = self.state_runs.get() {
            return Ok(r);
        }
        let n = self.model().n_state();
        let m = self.n_ports();
        let kk = self.k_steps();
        let mut out = Vec::with_capacity(self.anchors.len());
        for a in &self.anchors {
            let (cp, cq) = self.state_scales(a);
            let ybar = a.ybar();
            let cols: Vec<Result<DMatrix<T>>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut x0 = a.xbar.clone();
                    x0[j] += if j < a.model.np { cp } else { cq };
                    let sys = a.model.bind(a.gas, x0)?;
                    let u = crate::timestep::ConstantInput(a.ubar.clone());
                    let sol = solve(&sys, &u, self.setup.solver, &self.run_opts(false))?;
                    self.solves.fetch_add(1, Ordering::Relaxed);
                    let mut y = sol.y.columns(0, kk).into_owned();
                    for mut col in y.column_iter_mut() {
                        for (v, b) in col.iter_mut().zip(&ybar) {
                            *v -= *b;
                        }
                    }
                    Ok(y)
                })
                .collect();
            let mut ys: Vec<DMatrix<T>> = (0..m).map(|_| DMatrix::zeros(kk, n)).collect();
            for (j, c) in cols.into_iter().enumerate() {
                let c = c?;
                for (mi, ym) in ys.iter_mut().enumerate() {
                    for t in 0..kk {
                        ym[(t, j)] = c[(mi, t)];
                    }
                }
            }
            out.push(ThetaOutputs { y: ys });
        }
        let _ = self.state_runs.set(out);
        Ok(self.state_runs.get().unwrap())
    }

    fn dual_runs(&self) -> Result<&Vec<ThetaRuns<T>>> {
        if let Some(r) = self.dual_runs.get() {
            return Ok(r);
        }
        let m = self.n_ports();
        let kk = self.k_steps();
        let h = self.setup.h;
        let duals: Vec<DiscreteModel<T>> = self
            .anchors
            .iter()
            .map(|a| a.model.dual_model(a.xbar.as_slice(), &a.ubar, &a.gas))
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> = (0..self.anchors.len()).flat_map(|k| (0..m).map(move |i| (k, i))).collect();
        let results: Vec<Result<DMatrix<T>>> = jobs
            .par_iter()
            .map(|&(k, i)| {
                let a = &self.anchors[k];
                let scale = match self.setup.scaling {
                    Scaling::Absolute(c) => T::lit(c),
                    Scaling::Relative(_) => T::one(),
                };
                let dual = &duals[k];
                let sys = dual.bind(a.gas, DVector::zeros(dual.n_state()))?;
                let u = move |t: T, out: &mut [T]| {
                    out.iter_mut().for_each(|v| *v = T::zero());
                    let step = (t.to_f64_lossy() / h + 1e-9).floor() as usize;
                    out[i] = scale * self.waveform(i, step);
                };
                let sol = solve(&sys, &u, self.setup.solver, &self.run_opts(true))?;
                self.solves.fetch_add(1, Ordering::Relaxed);
                let zs = sol.x.expect("states captured");
                let mut w = DMatrix::zeros(dual.n_state(), kk);
                let mut buf = vec![T::zero(); dual.n_state()];
                for t in 0..kk {
                    sys.mass(zs.column(t).as_slice(), &mut buf);
                    w.column_mut(t).copy_from_slice(&buf);
                }
                Ok(w)
            })
            .collect();
        let mut out: Vec<ThetaRuns<T>> = (0..self.anchors.len()).map(|_| ThetaRuns { x: Vec::new() }).collect();
        for ((k, _), r) in jobs.into_iter().zip(results) {
            out[k].x.push(r?);
        }
        let _ = self.dual_runs.set(out);
        Ok(self.dual_runs.get().unwrap())
    }

    /// Centered input-run state snapshots (N × K per run), for data-driven reductors.
    pub fn snapshots(&self) -> Result<Vec<&DMatrix<T>>> {
        Ok(self.input_runs()?.iter().flat_map(|r| r.x.iter()).collect())
    }

    /// Gramian of the given kind, computed once and then served from the cache.
    pub fn gramian(&self, kind: GramianKind, dual: bool) -> Result<GramianPair<T>> {
        if dual && kind == GramianKind::WR {
            return self.gramian(kind, false);
        }
        {
            let cache = self.gramians.lock().unwrap();
            if let Some((_, _, g)) = cache.iter().find(|(k, d, _)| *k == kind && *d == dual) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(g.clone());
            }
        }
        if let Some(g) = self.disk.as_ref().and_then(|d| d.load::<T>(&self.cache_key(), kind, dual)) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            log::info!("Gramian cache hit: {kind:?} dual={dual}");
            self.gramians.lock().unwrap().push((kind, dual, g.clone()));
            return Ok(g);
        }
        let g = match (kind, dual) {
            (GramianKind::WR, _) => self.build_wr()?,
            (GramianKind::WO, false) => self.build_wo()?,
            (GramianKind::WO, true) => self.build_wo_dual()?,
            (GramianKind::WX, false) => self.build_cross(false, false)?,
            (GramianKind::WX, true) => self.build_cross(true, false)?,
            (GramianKind::WZ, false) => self.build_cross(false, true)?,
            (GramianKind::WZ, true) => self.build_cross(true, true)?,
        };
        if let Some(d) = &self.disk {
            d.store(&self.cache_key(), &g)?;
        }
        self.gramians.lock().unwrap().push((kind, dual, g.clone()));
        Ok(g)
    }

    fn split(&self) -> (usize, usize) {
        (self.model().np, self.model().nq)
    }

    fn weight(&self) -> T {
        T::lit(self.setup.h)
    }

    fn build_wr(&self) -> Result<GramianPair<T>> {
        let (np, nq) = self.split();
        let runs = self.input_runs()?;
        let mut wp = DMatrix::zeros(np, np);
        let mut wq = DMatrix::zeros(nq, nq);
        for r in runs {
            for x in &r.x {
                let xp = x.rows(0, np);
                let xq = x.rows(np, nq);
                wp.gemm(self.weight(), &xp, &xp.transpose(), T::one());
                wq.gemm(self.weight(), &xq, &xq.transpose(), T::one());
            }
        }
        Ok(GramianPair { wp, wq, kind: GramianKind::WR, dual_based: false })
    }

    fn build_wo(&self) -> Result<GramianPair<T>> {
        let (np, nq) = self.split();
        let runs = self.state_runs()?;
        let mut wp = DMatrix::zeros(np, np);
        let mut wq = DMatrix::zeros(nq, nq);
        for r in runs {
            for y in &r.y {
                let yp = y.columns(0, np);
                let yq = y.columns(np, nq);
                wp.gemm(self.weight(), &yp.transpose(), &yp, T::one());
                wq.gemm(self.weight(), &yq.transpose(), &yq, T::one());
            }
        }
        Ok(GramianPair { wp, wq, kind: GramianKind::WO, dual_based: false })
    }

    fn build_wo_dual(&self) -> Result<GramianPair<T>> {
        let (np, nq) = self.split();
        let runs = self.dual_runs()?;
        let mut wp = DMatrix::zeros(np, np);
        let mut wq = DMatrix::zeros(nq, nq);
        for r in runs {
            for w in &r.x {
                let a = w.rows(0, np);
                let b = w.rows(np, nq);
                wp.gemm(self.weight(), &a, &a.transpose(), T::one());
                wq.gemm(self.weight(), &b, &b.transpose(), T::one());
            }
        }
        Ok(GramianPair { wp, wq, kind: GramianKind::WO, dual_based: true })
    }

    /// Cross Gramian (WX) or its non-symmetric variant (WZ), from primal state runs
    /// or from dual runs.
    fn build_cross(&self, dual: bool, nonsym: bool) -> Result<GramianPair<T>> {
        let (np, nq) = self.split();
        let n = np + nq;
        let xr = self.input_runs()?;
        let kind = if nonsym { GramianKind::WZ } else { GramianKind::WX };
        let mut w = DMatrix::zeros(n, n);
        let m = self.n_ports();
        for (k, r) in xr.iter().enumerate() {
            // ys[mi]: K × N observability data for output mi
            let ys: Vec<DMatrix<T>> = if dual {
                self.dual_runs()?[k].x.iter().map(|z| z.transpose()).collect()
            } else {
                self.state_runs()?[k].y.clone()
            };
            if nonsym {
                let mut xs = DMatrix::zeros(n, r.x[0].ncols());
                for x in &r.x {
                    xs += x;
                }
                let mut ysum = DMatrix::zeros(ys[0].nrows(), n);
                for y in &ys {
                    ysum += y;
                }
                w.gemm(self.weight(), &xs, &ysum, T::one());
            } else {
                for mi in 0..m {
                    w.gemm(self.weight(), &r.x[mi], &ys[mi], T::one());
                }
            }
        }
        Ok(GramianPair {
            wp: w.view((0, 0), (np, np)).into_owned(),
            wq: w.view((np, np), (nq, nq)).into_owned(),
            kind,
            dual_based: dual,
        })
    }
}

/// Reachability Gramian of the anchored trajectories.
pub fn empirical_wr<T: Scalar>(bank: &TrajectoryBank<T>) -> Result<GramianPair<T>> {
    bank.gramian(GramianKind::WR, false)
}

pub fn empirical_wo<T: Scalar>(bank: &TrajectoryBank<T>, dual: bool) -> Result<GramianPair<T>> {
    bank.gramian(GramianKind::WO, dual)
}

pub fn empirical_wx<T: Scalar>(bank: &TrajectoryBank<T>, dual: bool) -> Result<GramianPair<T>> {
    bank.gramian(GramianKind::WX, dual)
}

pub fn empirical_wz<T: Scalar>(bank: &TrajectoryBank<T>, dual: bool) -> Result<GramianPair<T>> {
    bank.gramian(GramianKind::WZ, dual)
}
