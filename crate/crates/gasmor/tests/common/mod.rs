#![allow(dead_code)]

use gasmor::gasmodel::{build_model, Discretization, DiscreteModel, ModelConfig, Nonlinearity, Params};
use gasmor::gramians::{Anchor, Scaling, TrainingSetup};
use gasmor::netgraph::parse_net;
use gasmor::steady::{prepare, Prepared, SteadyOptions, SteadySolver};
use gasmor::timestep::Solver;
use gasmor::config::InputShape;
use nalgebra::{DMatrix, DVector};
use std::path::PathBuf;

pub fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(repo(rel)).unwrap()
}

pub fn theta() -> Params<f64> {
    Params { t0: 283.15, rs: 530.0 }
}

/// Single 10 km pipe with 1 km segments: N_p = N_q = 10.
pub fn short_pipe(disc: Discretization) -> DiscreteModel<f64> {
    let net = parse_net("pipe,s,d,10000,0.25,0,1e-5\n").unwrap();
    build_model(&net, 1000.0, disc, &ModelConfig::default()).unwrap().0
}

pub fn prepared(model: &DiscreteModel<f64>, s: f64, d: f64) -> Prepared<f64> {
    let ss = SteadySolver::new(model).unwrap();
    let cfg = model.config;
    prepare(model, &ss, &[s], &[d], &theta(), cfg.compressibility, cfg.critical, &SteadyOptions::with_step(10.0)).unwrap()
}

/// Linearization of the short pipe at its steady state, as a zero-anchored system.
pub fn linear_pipe_anchor() -> Anchor<f64> {
    let m = short_pipe(Discretization::Endpoint);
    let p = prepared(&m, 60.0, 15.0);
    let st = &p.steady;
    let lin = p.model.linearize(&st.pbar, &st.qbar, &st.sbar, &p.gas).unwrap();
    let n = lin.n_state();
    let ports = lin.n_ports();
    Anchor { params: theta(), model: lin, gas: p.gas, xbar: DVector::zeros(n), ubar: vec![0.0; ports] }
}

pub fn impulse_setup(h: f64, horizon: f64) -> TrainingSetup {
    TrainingSetup {
        horizon,
        h,
        shape: InputShape::Impulse,
        scaling: Scaling::Absolute(1.0),
        solver: Solver::Imex1 { gamma: 1.0 },
        seed: 1,
    }
}

/// Dense (E, A, B, C) of a linear model, with f_q = dq ∘ q folded into A.
pub fn dense_lti(m: &DiscreteModel<f64>, gas: &gasmor::gasmodel::GasState<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let e = m.mass_matrix(gas).to_dense();
    let mut a = m.a_matrix().to_dense();
    if let Nonlinearity::Linear { dq } = &m.nonlin {
        for (k, v) in dq.iter().enumerate() {
            a[(m.np + k, m.np + k)] += *v;
        }
    } else {
        panic!("linear model expected");
    }
    (e, a, m.b_matrix().to_dense(), m.c_matrix().to_dense())
}

/// Solves L X + X R + Q = 0 by Kronecker vectorization.
pub fn sylvester(l: &DMatrix<f64>, r: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let m = r.nrows();
    let il = DMatrix::<f64>::identity(m, m).kronecker(l);
    let ri = r.transpose().kronecker(&DMatrix::<f64>::identity(n, n));
    let k = il + ri;
    let rhs = DVector::from_column_slice((-q).as_slice());
    let x = k.lu().solve(&rhs).expect("nonsingular Sylvester operator");
    DMatrix::from_column_slice(n, m, x.as_slice())
}

pub fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn block(w: &DMatrix<f64>, off: usize, n: usize) -> DMatrix<f64> {
    w.view((off, off), (n, n)).into_owned()
}

/// Dense E ẋ = A x + B u + F, y = C x.
pub struct Lti {
    pub e: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DVector<f64>,
    pub c: DMatrix<f64>,
    pub x0: DVector<f64>,
}

impl Lti {
    /// Scalar ẋ = a x, x(0) = x0, y = x.
    pub fn scalar(a: f64, x0: f64) -> Self {
        Lti {
            e: DMatrix::identity(1, 1),
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::zeros(1, 1),
            f: DVector::zeros(1),
            c: DMatrix::identity(1, 1),
            x0: DVector::from_element(1, x0),
        }
    }
}

impl gasmor::timestep::Dynamics<f64> for Lti {
    fn n_state(&self) -> usize {
        self.a.nrows()
    }
    fn n_input(&self) -> usize {
        self.b.ncols()
    }
    fn n_output(&self) -> usize {
        self.c.nrows()
    }
    fn linear(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.a * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }
    fn forcing(&self, _x: &[f64], u: &[f64], out: &mut [f64]) -> gasmor::Result<()> {
        let y = &self.b * DVector::from_column_slice(u) + &self.f;
        out.copy_from_slice(y.as_slice());
        Ok(())
    }
    fn mass(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.e * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }
    fn factor(&self, c: f64) -> gasmor::Result<gasmor::linalg::LinearSolver<f64>> {
        gasmor::linalg::LinearSolver::dense(&(&self.e - &self.a * c))
    }
    fn output(&self, x: &[f64], y: &mut [f64]) {
        let v = &self.c * DVector::from_column_slice(x);
        y.copy_from_slice(v.as_slice());
    }
    fn initial_state(&self) -> DVector<f64> {
        self.x0.clone()
    }
}

/// Error at t = 1 of ẋ = −x, x(0) = 1, for step h.
pub fn scalar_error(solver: Solver, h: f64) -> f64 {
    use gasmor::timestep::{solve, ConstantInput, StepOptions};
    let sys = Lti::scalar(-1.0, 1.0);
    let sol = solve(&sys, &ConstantInput(vec![0.0]), solver, &StepOptions::new(h, 1.0)).unwrap();
    (sol.y[(0, sol.y.ncols() - 1)] - (-1.0f64).exp()).abs()
}

/// Error ratio e(h)/e(h/2) at h = 0.1.
pub fn order_ratio(solver: Solver) -> f64 {
    scalar_error(solver, 0.1) / scalar_error(solver, 0.05)
}

/// Short-pipe trajectory bank over the five-point parameter grid (60 bar, 15 kg/s).
pub fn pipe_bank(disc: Discretization) -> gasmor::gramians::TrajectoryBank<f64> {
    use gasmor::gramians::{anchors, theta_grid, TrajectoryBank};
    let m = short_pipe(disc);
    let thetas = theta_grid((273.15, 293.15), (500.0, 560.0));
    let a = anchors(&m, &[60.0], &[15.0], &thetas, &SteadyOptions::with_step(10.0)).unwrap();
    // the explicit friction term of this narrow pipe relaxes at about 0.3/s
    let mut setup = TrainingSetup::new(2.0, Solver::Imex1 { gamma: 1.0 });
    setup.horizon = 300.0;
    TrajectoryBank::new(a, setup).unwrap()
}

/// Short-pipe scenario: 60 bar / 15 kg/s, demand step to 17 kg/s at 60 s.
pub fn pipe_scenario(th: f64) -> gasmor::timestep::Scenario<f64> {
    gasmor::timestep::Scenario {
        t0: 283.15,
        rs: 530.0,
        th,
        ut: vec![0.0, 60.0],
        up: vec![vec![60.0], vec![60.0]],
        uq: vec![vec![15.0], vec![17.0]],
        cp: vec![],
        vs: vec![],
    }
}

/// Index of the unit vector a column is aligned with.
pub fn axis(col: nalgebra::DVectorView<f64>) -> usize {
    col.iamax()
}

/// Diagonal surrogate ẋ = −a x + b u, y = c x with three independent channels.
pub struct Surrogate {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub c: [f64; 3],
}

impl Surrogate {
    pub fn wr(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |i, j| if i == j { self.b[i].powi(2) / (2.0 * self.a[i]) } else { 0.0 })
    }
    pub fn wo(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |i, j| if i == j { self.c[i].powi(2) / (2.0 * self.a[i]) } else { 0.0 })
    }
    pub fn c(&self) -> gasmor::linalg::Csr<f64> {
        gasmor::linalg::Csr::from_diagonal(&self.c)
    }
    /// Output energy of channel k under an impulse, by quadrature of (c b e^{−a t})².
    pub fn channel_energy(&self, k: usize) -> f64 {
        let dt = 1e-4;
        let (a, g) = (self.a[k], self.b[k] * self.c[k]);
        (0..200_000).map(|i| (g * (-a * (i as f64 + 0.5) * dt).exp()).powi(2) * dt).sum()
    }
}

pub fn brute_force_ranking(score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut best = (f64::NEG_INFINITY, vec![]);
    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        // lexicographic weighting of the cumulative captured score
        let v: f64 = perm.iter().enumerate().map(|(pos, &k)| score(k) * 1e3f64.powi(2 - pos as i32)).sum();
        if v > best.0 {
            best = (v, perm.to_vec());
        }
    }
    best.1
}

