//! Reduced models: structured Petrov-Galerkin projection around a steady state.

use crate::error::{Error, Result};
use crate::gasmodel::{DiscreteModel, GasState};
use crate::linalg::{Csr, LinearSolver};
use crate::reductors::ProjectorSeries;
use crate::scalar::Scalar;
use crate::steady::Prepared;
use crate::timestep::{solve, Dynamics, InputSignal, Solution, Solver, StepOptions};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

/// Reduced operators of order (n_p, n_q) and the bases that produced them.
#[derive(Clone, Debug)]
pub struct ReducedModel<T: Scalar> {
    pub order: (usize, usize),
    /// Vpᵀ E_p⁰ Up; scaled by d0(θ) unless `ep_fixed`.
    pub ep0: DMatrix<T>,
    pub ep_fixed: bool,
    pub eq: DMatrix<T>,
    pub apq: DMatrix<T>,
    pub aqp: DMatrix<T>,
    pub bpd: DMatrix<T>,
    pub bqs: DMatrix<T>,
    pub csq: DMatrix<T>,
    pub cdp: DMatrix<T>,
    pub fc: DVector<T>,
    pub up: DMatrix<T>,
    pub uq: DMatrix<T>,
    pub vp: DMatrix<T>,
    pub vq: DMatrix<T>,
    /// Hash of the full model the bases were projected from.
    pub model_hash: String,
    pub method: String,
}

fn congruence<T: Scalar>(v: &DMatrix<T>, a: &Csr<T>, u: &DMatrix<T>) -> DMatrix<T> {
    v.transpose() * a.mul_dense(u)
}

fn left<T: Scalar>(v: &DMatrix<T>, b: &Csr<T>) -> DMatrix<T> {
    b.tr_mul_dense_left(v)
}

/// Projects `model` with the leading `n_p` pressure and `n_q` flux columns of `series`.
pub fn project<T: Scalar>(
    model: &DiscreteModel<T>,
    series: &ProjectorSeries<T>,
    n_p: usize,
    n_q: usize,
) -> Result<ReducedModel<T>> {
    if n_p > series.rank_p() || n_q > series.rank_q() {
        return Err(Error::Invalid(format!(
            "order ({n_p}, {n_q}) exceeds series rank ({}, {})",
            series.rank_p(),
            series.rank_q()
        )));
    }
    if series.up.nrows() != model.np || series.uq.nrows() != model.nq {
        return Err(Error::Dimension(format!(
            "bases of size ({}, {}) for a model with ({}, {}) states",
            series.up.nrows(),
            series.uq.nrows(),
            model.np,
            model.nq
        )));
    }
    let up = series.up.columns(0, n_p).into_owned();
    let vp = series.vp.columns(0, n_p).into_owned();
    let uq = series.uq.columns(0, n_q).into_owned();
    let vq = series.vq.columns(0, n_q).into_owned();
    Ok(ReducedModel {
        order: (n_p, n_q),
        ep0: congruence(&vp, &model.ep0, &up),
        ep_fixed: model.ep_fixed,
        eq: congruence(&vq, &model.eq, &uq),
        apq: congruence(&vp, &model.apq, &uq),
        aqp: congruence(&vq, &model.aqp, &up),
        bpd: left(&vp, &model.bpd),
        bqs: left(&vq, &model.bqs),
        csq: model.csq.mul_dense(&uq),
        cdp: model.cdp.mul_dense(&up),
        fc: vq.tr_mul(&model.fc),
        up,
        uq,
        vp,
        vq,
        model_hash: model.hash.clone(),
        method: series.method.clone(),
    })
}

impl<T: Scalar> ReducedModel<T> {
    pub fn n_state(&self) -> usize {
        self.order.0 + self.order.1
    }

    /// Ẽ_p at a gas state.
    pub fn ep(&self, gas: &GasState<T>) -> DMatrix<T> {
        if self.ep_fixed {
            self.ep0.clone()
        } else {
            &self.ep0 * gas.d0
        }
    }

    /// Anchors the reduced model at a prepared full model (steady state, gas state,
    /// nonlinearity at the test parameters).
    pub fn bind<'a>(&'a self, fom: &'a Prepared<T>) -> Result<RomInstance<'a, T>> {
        if fom.model.hash != self.model_hash {
            return Err(Error::Provenance(format!(
                "reduced model built from {} but anchored at {}",
                self.model_hash, fom.model.hash
            )));
        }
        let m = &fom.model;
        let st = &fom.steady;
        let mut t = vec![T::zero(); m.np];
        m.apq.mul_vec(&st.qbar, &mut t);
        let ax_p = self.vp.tr_mul(&DVector::from_vec(t));
        let mut t = vec![T::zero(); m.nq];
        m.aqp.mul_vec(&st.pbar, &mut t);
        let ax_q = self.vq.tr_mul(&DVector::from_vec(t));
        Ok(RomInstance {
            rom: self,
            model: m,
            gas: fom.gas,
            ep: self.ep(&fom.gas),
            pbar: DVector::from_column_slice(&st.pbar),
            qbar: DVector::from_column_slice(&st.qbar),
            ybar: st.output(m),
            ax_p,
            ax_q,
        })
    }
}

/// A reduced model bound to an anchor. The state is the reduced deviation from the
/// steady state and starts at zero.
pub struct RomInstance<'a, T: Scalar> {
    pub rom: &'a ReducedModel<T>,
    model: &'a DiscreteModel<T>,
    gas: GasState<T>,
    ep: DMatrix<T>,
    pbar: DVector<T>,
    qbar: DVector<T>,
    ybar: Vec<T>,
    /// Vpᵀ A_pq q̄ and Vqᵀ A_qp p̄.
    ax_p: DVector<T>,
    ax_q: DVector<T>,
}

impl<T: Scalar> Dynamics<T> for RomInstance<'_, T> {
    fn n_state(&self) -> usize {
        self.rom.n_state()
    }

    fn n_input(&self) -> usize {
        self.model.n_ports()
    }

    fn n_output(&self) -> usize {
        self.model.n_ports()
    }

    fn linear(&self, x: &[T], out: &mut [T]) {
        let (np, nq) = self.rom.order;
        let (xp, xq) = x.split_at(np);
        let (op, oq) = out.split_at_mut(np);
        gemv(&self.rom.apq, xq, op);
        gemv(&self.rom.aqp, xp, oq);
        debug_assert_eq!(oq.len(), nq);
    }

    fn forcing(&self, x: &[T], u: &[T], out: &mut [T]) -> Result<()> {
        let r = self.rom;
        let (np, _) = r.order;
        let m = self.model;
        let (xp, xq) = x.split_at(np);
        let (s, d) = u.split_at(m.ns);
        let (op, oq) = out.split_at_mut(np);
        gemv(&r.bpd, d, op);
        for (o, a) in op.iter_mut().zip(self.ax_p.iter()) {
            *o += *a;
        }
        // f̃_q = Vqᵀ f_q(p̄ + Up p̃, q̄ + Uq q̃, s)
        let p = &self.pbar + &r.up * DVector::from_column_slice(xp);
        let q = &self.qbar + &r.uq * DVector::from_column_slice(xq);
        let mut f = vec![T::zero(); m.nq];
        m.f_q(p.as_slice(), q.as_slice(), s, &self.gas, &mut f)?;
        let fr = r.vq.tr_mul(&DVector::from_vec(f));
        gemv(&r.bqs, s, oq);
        for i in 0..oq.len() {
            oq[i] += self.ax_q[i] + r.fc[i] + fr[i];
        }
        Ok(())
    }

    fn mass(&self, x: &[T], out: &mut [T]) {
        let (np, _) = self.rom.order;
        let (xp, xq) = x.split_at(np);
        let (op, oq) = out.split_at_mut(np);
        gemv(&self.ep, xp, op);
        gemv(&self.rom.eq, xq, oq);
    }

    fn factor(&self, c: T) -> Result<LinearSolver<T>> {
        let (np, nq) = self.rom.order;
        let n = np + nq;
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (np, np)).copy_from(&self.ep);
        m.view_mut((np, np), (nq, nq)).copy_from(&self.rom.eq);
        m.view_mut((0, np), (np, nq)).copy_from(&(&self.rom.apq * -c));
        m.view_mut((np, 0), (nq, np)).copy_from(&(&self.rom.aqp * -c));
        LinearSolver::dense(&m)
    }

    fn output(&self, x: &[T], y: &mut [T]) {
        let (np, _) = self.rom.order;
        let (xp, xq) = x.split_at(np);
        let ns = self.model.ns;
        let (ys, yd) = y.split_at_mut(ns);
        gemv(&self.rom.csq, xq, ys);
        gemv(&self.rom.cdp, xp, yd);
        for (v, b) in y.iter_mut().zip(&self.ybar) {
            *v += *b;
        }
    }

    fn initial_state(&self) -> DVector<T> {
        DVector::zeros(self.rom.n_state())
    }
}

fn gemv<T: Scalar>(a: &DMatrix<T>, x: &[T], out: &mut [T]) {
    for o in out.iter_mut() {
        *o = T::zero();
    }
    for (j, xj) in x.iter().enumerate() {
        if *xj == T::zero() {
            continue;
        }
        for (o, aij) in out.iter_mut().zip(a.column(j).iter()) {
            *o += *aij * *xj;
        }
    }
}

/// Simulates a reduced model anchored at `fom` under input `u`. A zero-order model
/// returns the steady output at every grid point.
pub fn simulate_rom<T: Scalar, U: InputSignal<T> + ?Sized>(
    rom: &ReducedModel<T>,
    fom: &Prepared<T>,
    u: &U,
    solver: Solver,
    opts: &StepOptions,
) -> Result<Solution<T>> {
    let sys = rom.bind(fom)?;
    if rom.n_state() == 0 {
        let start = Instant::now();
        let npts = opts.n_points();
        let ybar = fom.steady.output(&fom.model);
        let y = DMatrix::from_fn(ybar.len(), npts, |i, _| ybar[i]);
        return Ok(Solution {
            t: (0..npts).map(|k| T::lit(k as f64 * opts.h)).collect(),
            y,
            x: opts.capture_states.then(|| DMatrix::zeros(0, npts)),
            runtime: start.elapsed().as_secs_f64(),
        });
    }
    solve(&sys, u, solver, opts)
}
