//! Fixed-step integrators (imex1, imex2, rk4) for E ẋ = A x + B u + F + f(x, u).

mod scenario;

pub use scenario::Scenario;

use crate::error::{Error, Result};
use crate::linalg::LinearSolver;
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

/// A time-invariant system in the lumped form E ẋ = A x + B u + F + f(x, u), y = C x.
pub trait Dynamics<T: Scalar>: Sync {
    fn n_state(&self) -> usize;
    fn n_input(&self) -> usize;
    fn n_output(&self) -> usize;
    /// out = A x
    fn linear(&self, x: &[T], out: &mut [T]);
    /// out = B u + F + f(x, u)
    fn forcing(&self, x: &[T], u: &[T], out: &mut [T]) -> Result<()>;
    /// out = E x
    fn mass(&self, x: &[T], out: &mut [T]);
    /// Factorization of E − c A.
    fn factor(&self, c: T) -> Result<LinearSolver<T>>;
    fn output(&self, x: &[T], y: &mut [T]);
    fn initial_state(&self) -> DVector<T>;
}

/// Time-dependent boundary input u(t).
pub trait InputSignal<T: Scalar>: Sync {
    fn eval(&self, t: T, out: &mut [T]);
}

impl<T: Scalar, F: Fn(T, &mut [T]) + Sync> InputSignal<T> for F {
    fn eval(&self, t: T, out: &mut [T]) {
        self(t, out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Solver {
    Imex1 { gamma: f64 },
    Imex2 { gamma: f64, lambda: f64 },
    Rk4,
}

impl Solver {
    pub fn id(&self) -> &'static str {
        match self {
            Solver::Imex1 { .. } => "imex1",
            Solver::Imex2 { .. } => "imex2",
            Solver::Rk4 => "rk4",
        }
    }

    /// Solver with the given id and relaxation parameters.
    pub fn with_params(id: &str, gamma: f64, lambda: f64) -> Result<Self> {
        match id.trim() {
            "imex1" => Ok(Solver::Imex1 { gamma }),
            "imex2" => Ok(Solver::Imex2 { gamma, lambda }),
            "rk4" => Ok(Solver::Rk4),
            _ => Err(Error::Invalid(format!("unknown solver `{id}` (expected imex1, imex2 or rk4)"))),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Solver::with_params(s, 1.0, 0.5)
    }
}

/// Integration grid and capture options.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub h: f64,
    pub horizon: f64,
    /// Keep the state trajectory in the solution.
    pub capture_states: bool,
    /// Refactor the iteration matrix every step (same result, used to check the cache).
    pub refactor_each_step: bool,
}

impl StepOptions {
    pub fn new(h: f64, horizon: f64) -> Self {
        StepOptions { h, horizon, capture_states: false, refactor_each_step: false }
    }

    pub fn with_states(mut self) -> Self {
        self.capture_states = true;
        self
    }

    /// Number of grid points ⌊tH/h⌋ + 1.
    pub fn n_points(&self) -> usize {
        (self.horizon / self.h + 1e-9).floor() as usize + 1
    }
}

/// Sampled trajectory: outputs (and optionally states) at every grid point.
#[derive(Clone, Debug)]
pub struct Solution<T: Scalar> {
    pub t: Vec<T>,
    /// Outputs, one column per time point (ordering s_q then d_p).
    pub y: DMatrix<T>,
    /// States, one column per time point, when captured.
    pub x: Option<DMatrix<T>>,
    /// Wall-clock seconds.
    pub runtime: f64,
}

struct Recorder<T: Scalar> {
    y: DMatrix<T>,
    x: Option<DMatrix<T>>,
    ybuf: Vec<T>,
}

impl<T: Scalar> Recorder<T> {
    fn new<D: Dynamics<T> + ?Sized>(sys: &D, npts: usize, states: bool) -> Self {
        Recorder {
            y: DMatrix::zeros(sys.n_output(), npts),
            x: states.then(|| DMatrix::zeros(sys.n_state(), npts)),
            ybuf: vec![T::zero(); sys.n_output()],
        }
    }

    fn record<D: Dynamics<T> + ?Sized>(&mut self, sys: &D, k: usize, x: &[T]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite_val()) {
            return Err(Error::BlowUp { step: k });
        }
        sys.output(x, &mut self.ybuf);
        self.y.column_mut(k).copy_from_slice(&self.ybuf);
        if let Some(xs) = self.x.as_mut() {
            xs.column_mut(k).copy_from_slice(x);
        }
        Ok(())
    }
}

/// Integrates `sys` from its initial state under input `u`.
pub fn solve<T: Scalar, D: Dynamics<T> + ?Sized, U: InputSignal<T> + ?Sized>(
    sys: &D,
    u: &U,
    solver: Solver,
    opts: &StepOptions,
) -> Result<Solution<T>> {
    let start = Instant::now();
    let npts = opts.n_points();
    let h = T::lit(opts.h);
    let n = sys.n_state();
    let mut rec = Recorder::new(sys, npts, opts.capture_states);
    let mut x = sys.initial_state();
    if x.len() != n {
        return Err(Error::Dimension(format!("initial state {} vs {}", x.len(), n)));
    }
    rec.record(sys, 0, x.as_slice())?;
    let mut uk = vec![T::zero(); sys.n_input()];
    let mut uk1 = vec![T::zero(); sys.n_input()];
    let mut r1 = vec![T::zero(); n];
    let mut r2 = vec![T::zero(); n];
    let time = |k: usize| T::lit(k as f64 * opts.h);
    match solver {
        Solver::Imex1 { gamma } => {
            let c = T::lit(gamma) * h;
            let mut lu = sys.factor(c)?;
            for k in 0..npts - 1 {
                if opts.refactor_each_step && k > 0 {
                    lu = sys.factor(c)?;
                }
                u.eval(time(k), &mut uk);
                sys.linear(x.as_slice(), &mut r1);
                sys.forcing(x.as_slice(), &uk, &mut r2).map_err(|e| blowup(e, k + 1))?;
                for i in 0..n {
                    r1[i] = h * (r1[i] + r2[i]);
                }
                lu.solve_in_place(&mut r1);
                for i in 0..n {
                    x[i] += r1[i];
                }
                rec.record(sys, k + 1, x.as_slice())?;
            }
        }
        Solver::Imex2 { gamma, lambda } => {
            let g = T::lit(gamma);
            let lam = T::lit(lambda);
            let lu = sys.factor(h * g * lam)?;
            let emass = sys.factor(T::zero())?;
            let mut z1 = vec![T::zero(); n];
            let mut z2 = vec![T::zero(); n];
            let mut ex = vec![T::zero(); n];
            let mut az1 = vec![T::zero(); n];
            let mut acc = vec![T::zero(); n];
            let two = T::lit(2.0);
            for k in 0..npts - 1 {
                u.eval(time(k), &mut uk);
                u.eval(time(k + 1), &mut uk1);
                sys.mass(x.as_slice(), &mut ex);
                z1.copy_from_slice(&ex);
                lu.solve_in_place(&mut z1);
                sys.forcing(x.as_slice(), &uk, &mut r1).map_err(|e| blowup(e, k + 1))?;
                sys.linear(&z1, &mut az1);
                for i in 0..n {
                    z2[i] = ex[i] + h * r1[i] + h * g * (T::one() - two * lam) * az1[i];
                }
                lu.solve_in_place(&mut z2);
                sys.forcing(&z1, &uk1, &mut r2).map_err(|e| blowup(e, k + 1))?;
                for i in 0..n {
                    acc[i] = r1[i] + g * az1[i] + r2[i];
                }
                sys.linear(&z2, &mut az1);
                for i in 0..n {
                    acc[i] = h / two * (acc[i] + g * az1[i]);
                }
                emass.solve_in_place(&mut acc);
                for i in 0..n {
                    x[i] += acc[i];
                }
                rec.record(sys, k + 1, x.as_slice())?;
            }
        }
        Solver::Rk4 => {
            let emass = sys.factor(T::zero())?;
            let mut ks: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); n]);
            let mut xs = vec![T::zero(); n];
            let mut umid = vec![T::zero(); sys.n_input()];
            let half = T::lit(0.5);
            let rhs = |x: &[T], u: &[T], out: &mut [T], tmp: &mut [T], k: usize| -> Result<()> {
                sys.linear(x, out);
                sys.forcing(x, u, tmp).map_err(|e| blowup(e, k))?;
                for i in 0..out.len() {
                    out[i] += tmp[i];
                }
                emass.solve_in_place(out);
                Ok(())
            };
            for k in 0..npts - 1 {
                u.eval(time(k), &mut uk);
                u.eval(time(k) + half * h, &mut umid);
                u.eval(time(k + 1), &mut uk1);
                let [k1, k2, k3, k4] = &mut ks;
                rhs(x.as_slice(), &uk, k1, &mut r1, k + 1)?;
                for i in 0..n {
                    xs[i] = x[i] + half * h * k1[i];
                }
                rhs(&xs, &umid, k2, &mut r1, k + 1)?;
                for i in 0..n {
                    xs[i] = x[i] + half * h * k2[i];
                }
                rhs(&xs, &umid, k3, &mut r1, k + 1)?;
                for i in 0..n {
                    xs[i] = x[i] + h * k3[i];
                }
                rhs(&xs, &uk1, k4, &mut r1, k + 1)?;
                let sixth = h / T::lit(6.0);
                for i in 0..n {
                    x[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
                }
                rec.record(sys, k + 1, x.as_slice())?;
            }
        }
    }
    Ok(Solution {
        t: (0..npts).map(time).collect(),
        y: rec.y,
        x: rec.x,
        runtime: start.elapsed().as_secs_f64(),
    })
}

/// Nonpositive pressures during stepping mean the trajectory has left the physical
/// region; report them as blow-up at the step.
fn blowup(e: Error, step: usize) -> Error {
    match e {
        Error::NonPositivePressure { .. } => Error::BlowUp { step },
        other => other,
    }
}

/// Constant input signal.
pub struct ConstantInput<T: Scalar>(pub Vec<T>);

impl<T: Scalar> InputSignal<T> for ConstantInput<T> {
    fn eval(&self, _t: T, out: &mut [T]) {
        out.copy_from_slice(&self.0);
    }
}
