//! Steady states for constant boundary values: least-norm flux, least-squares
//! pressure with fixed-point corrections, and imex1 marching as a fallback.

use crate::error::{Error, Result};
use crate::gasmodel::{gas_state, CompressibilityVariant, CriticalPoint, DiscreteModel, GasState, Params};
use crate::scalar::Scalar;
use crate::timestep::Dynamics;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    /// Tolerance on the scaled residual (and on ‖Δx‖/h while marching).
    pub tol: f64,
    pub max_corrections: usize,
    /// Step of the marching fallback, seconds.
    pub march_h: f64,
    pub max_march_steps: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions { tol: 1e-9, max_corrections: 10, march_h: 60.0, max_march_steps: 1440 }
    }
}

impl SteadyOptions {
    /// Marching budget of 24 h at step `h`.
    pub fn with_step(h: f64) -> Self {
        SteadyOptions { march_h: h, max_march_steps: (86400.0 / h).ceil() as usize, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState<T: Scalar> {
    /// Pressures (bar) at non-supply nodes.
    pub pbar: Vec<T>,
    /// Edge fluxes (kg/s).
    pub qbar: Vec<T>,
    pub sbar: Vec<T>,
    pub dbar: Vec<T>,
    /// Scaled residual at the returned point.
    pub residual: T,
    /// Fixed-point corrections performed.
    pub iterations: usize,
    /// Scaled residual after each correction.
    pub history: Vec<T>,
    /// Marching steps taken (0 if not needed).
    pub march_steps: usize,
}

impl<T: Scalar> SteadyState<T> {
    pub fn state(&self) -> DVector<T> {
        DVector::from_iterator(self.pbar.len() + self.qbar.len(), self.pbar.iter().chain(&self.qbar).copied())
    }

    pub fn input(&self) -> Vec<T> {
        self.sbar.iter().chain(&self.dbar).copied().collect()
    }

    pub fn output(&self, model: &DiscreteModel<T>) -> Vec<T> {
        let mut y = vec![T::zero(); model.n_ports()];
        model.output(self.state().as_slice(), &mut y);
        y
    }
}

/// Scaled residual max(‖rp‖∞ / (1e−5·max(1, ‖d‖∞, ‖q‖∞)), ‖rq‖∞ / (1e5·max(1, ‖s‖∞, ‖p‖∞))).
pub fn scaled_residual<T: Scalar>(
    model: &DiscreteModel<T>,
    p: &[T],
    q: &[T],
    s: &[T],
    d: &[T],
    gas: &GasState<T>,
) -> Result<T> {
    let (rp, rq) = model.eval_rhs(p, q, s, d, gas)?;
    let inf = |v: &[T]| v.iter().fold(T::one(), |m, x| m.max(x.abs()));
    let ep = rp.amax() / (T::lit(1e-5) * inf(d).max(inf(q)));
    let eq = rq.amax() / (T::lit(1e5) * inf(s).max(inf(p)));
    Ok(ep.max(eq))
}

/// Factorizations reused across boundary values and parameters (A_pq and A_qp do not
/// depend on θ).
pub struct SteadySolver<T: Scalar> {
    /// QR of A_pqᵀ for the least-norm flux.
    qr_flux: (DMatrix<T>, DMatrix<T>),
    /// QR of A_qp for the least-squares pressure.
    qr_press: (DMatrix<T>, DMatrix<T>),
}

fn thin_qr<T: Scalar>(m: DMatrix<T>, what: &str) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let qr = m.qr();
    let (q, r) = (qr.q(), qr.r());
    let scale = r.amax();
    let n = r.nrows().min(r.ncols());
    if r.ncols() > r.nrows() || (0..n).any(|i| r[(i, i)].abs() <= T::lit(1e-12) * scale) {
        return Err(Error::Singular(format!("{what} is rank deficient")));
    }
    Ok((q, r))
}

impl<T: Scalar> SteadySolver<T> {
    pub fn new(model: &DiscreteModel<T>) -> Result<Self> {
        Ok(SteadySolver {
            qr_flux: thin_qr(model.apq.transpose().to_dense(), "A_pqᵀ")?,
            qr_press: thin_qr(model.aqp.to_dense(), "A_qp")?,
        })
    }

    /// Least-norm q with A_pq q = rhs.
    fn flux(&self, rhs: &DVector<T>) -> DVector<T> {
        let (q, r) = &self.qr_flux;
        let y = r.tr_solve_upper_triangular(rhs).expect("checked nonsingular");
        q * y
    }

    /// Least-squares p with A_qp p ≈ rhs.
    fn pressure(&self, rhs: &DVector<T>) -> DVector<T> {
        let (q, r) = &self.qr_press;
        r.solve_upper_triangular(&q.tr_mul(rhs)).expect("checked nonsingular")
    }

    pub fn solve(
        &self,
        model: &DiscreteModel<T>,
        sbar: &[T],
        dbar: &[T],
        gas: &GasState<T>,
        opts: &SteadyOptions,
    ) -> Result<SteadyState<T>> {
        model.check_ready()?;
        if sbar.len() != model.ns || dbar.len() != model.nd {
            return Err(Error::Dimension(format!(
                "boundary values ({}, {}) for ({}, {}) ports",
                sbar.len(),
                dbar.len(),
                model.ns,
                model.nd
            )));
        }
        let tol = T::lit(opts.tol);
        // Step 1a: A_pq q̄ = −B_pd d̄
        let mut rhs = DVector::zeros(model.np);
        model.bpd.mul_vec(dbar, rhs.as_mut_slice());
        let qbar = self.flux(&(-rhs));
        // Step 1b: A_qp p̂ = −(B_qs s̄ + F_c)
        let mut base = model.fc.clone();
        model.bqs.mul_vec_add(T::one(), sbar, base.as_mut_slice());
        let mut p = self.pressure(&(-&base));
        let mut fq = vec![T::zero(); model.nq];
        let mut history = Vec::new();
        let mut residual = scaled_residual(model, p.as_slice(), qbar.as_slice(), sbar, dbar, gas)
            .unwrap_or_else(|_| T::lit(f64::INFINITY));
        // Step 2: A_qp p̄ = −(B_qs s̄ + F_c + f_q(p̂, q̄, s̄))
        let mut iterations = 0;
        while residual > tol && iterations < opts.max_corrections {
            model.f_q(p.as_slice(), qbar.as_slice(), sbar, gas, &mut fq)?;
            let rhs = -(&base + DVector::from_column_slice(&fq));
            p = self.pressure(&rhs);
            iterations += 1;
            residual = scaled_residual(model, p.as_slice(), qbar.as_slice(), sbar, dbar, gas)?;
            history.push(residual);
        }
        let mut st = SteadyState {
            pbar: p.as_slice().to_vec(),
            qbar: qbar.as_slice().to_vec(),
            sbar: sbar.to_vec(),
            dbar: dbar.to_vec(),
            residual,
            iterations,
            history,
            march_steps: 0,
        };
        if residual > tol {
            march(model, &mut st, gas, opts)?;
        }
        if let Some(i) = st.pbar.iter().position(|v| !(*v > T::zero())) {
            return Err(Error::NonPositivePressure { index: i, value: st.pbar[i].to_f64_lossy() });
        }
        Ok(st)
    }
}

/// imex1 marching with frozen boundary values until ‖Δx‖∞/h ≤ tol.
fn march<T: Scalar>(model: &DiscreteModel<T>, st: &mut SteadyState<T>, gas: &GasState<T>, opts: &SteadyOptions) -> Result<()> {
    let sys = model.bind(*gas, st.state())?;
    let n = sys.n_state();
    let h = T::lit(opts.march_h);
    let lu = sys.factor(h)?;
    let u = st.input();
    let mut x = st.state();
    let (mut r1, mut r2) = (vec![T::zero(); n], vec![T::zero(); n]);
    let tol = T::lit(opts.tol);
    for k in 0..opts.max_march_steps {
        sys.linear(x.as_slice(), &mut r1);
        sys.forcing(x.as_slice(), &u, &mut r2)?;
        for i in 0..n {
            r1[i] = h * (r1[i] + r2[i]);
        }
        lu.solve_in_place(&mut r1);
        let mut step = T::zero();
        for i in 0..n {
            x[i] += r1[i];
            step = step.max(r1[i].abs());
        }
        if !step.is_finite_val() {
            return Err(Error::BlowUp { step: k + 1 });
        }
        st.march_steps = k + 1;
        if step / h <= tol {
            break;
        }
    }
    st.pbar = x.as_slice()[..model.np].to_vec();
    st.qbar = x.as_slice()[model.np..].to_vec();
    st.residual = scaled_residual(model, &st.pbar, &st.qbar, &st.sbar, &st.dbar, gas)?;
    let step_ok = st.march_steps < opts.max_march_steps;
    if !step_ok && st.residual > tol {
        return Err(Error::SteadyNotConverged { residual: st.residual.to_f64_lossy() });
    }
    Ok(())
}

/// A model prepared for simulation at one parameter sample: friction refreshed for
/// Reynolds-dependent variants, gas constants from the steady state, steady state.
#[derive(Clone, Debug)]
pub struct Prepared<T: Scalar> {
    pub model: DiscreteModel<T>,
    pub gas: GasState<T>,
    pub steady: SteadyState<T>,
}

/// Steady state with the z0 bootstrap: one solve with z = 1, gas constants from its
/// mean pressure, then a second solve.
#[allow(clippy::too_many_arguments)]
pub fn prepare<T: Scalar>(
    model: &DiscreteModel<T>,
    solver: &SteadySolver<T>,
    sbar: &[T],
    dbar: &[T],
    params: &Params<T>,
    variant: CompressibilityVariant,
    crit: CriticalPoint,
    opts: &SteadyOptions,
) -> Result<Prepared<T>> {
    let mut model = model.clone();
    let ideal = GasState::ideal(params);
    let first = solver.solve(&model, sbar, dbar, &ideal, opts)?;
    model.refresh_friction(&first.qbar)?;
    let gas = gas_state(&first.pbar, params, variant, crit)?;
    let steady = solver.solve(&model, sbar, dbar, &gas, opts)?;
    Ok(Prepared { model, gas, steady })
}
