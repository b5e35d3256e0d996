//! Assembly and evaluation of the semi-discrete input-output gas network model.
//!
//! States are node pressures `p` in bar (supply nodes excluded) and edge mass fluxes
//! `q` in kg/s. Inputs are supply pressures `s_p` (bar) and demand fluxes `d_q`
//! (kg/s); outputs are supply fluxes `s_q` and demand pressures `d_p`.
//!
//! Continuity rows are divided by 1e5 and momentum rows are in pascal, so the linear
//! part factors as `A = J·Q` with skew `J` and `Q = diag(1e5 I, 1e−5 I)`:
//!
//! ```text
//! E_p ṗ = 1e−5 A_0 q − 1e−5 B_d d_q
//! E_q q̇ = −1e5 A_0ᵀ p − 1e5 B_sᵀ s_p + F_c + f_q(p, q, s_p)
//! ```

use super::physics::{friction_factor, CompressibilityVariant, CriticalPoint, FrictionVariant, GRAVITY};
use crate::error::{Error, Result};
use crate::linalg::{Csr, LinearSolver};
use crate::netgraph::{incidence, EdgeKind, RefinementResult, TopologyMatrices};
use crate::scalar::Scalar;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

pub(crate) const P_SCALE: f64 = 1e5;

/// Physical parameters θ = (T0, RS).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    /// K
    pub t0: T,
    /// J/(kg·K)
    pub rs: T,
}

impl<T: Scalar> Params<T> {
    pub fn new(t0: T, rs: T) -> Result<Self> {
        if !(t0 > T::zero() && rs > T::zero()) {
            return Err(Error::Invalid(format!("parameters must be positive (T0={t0}, RS={rs})")));
        }
        Ok(Params { t0, rs })
    }
}

/// Gas constants derived from a steady state: z0, d0 = 1/(T0·RS·z0), p0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasState<T> {
    pub z0: T,
    pub d0: T,
    /// Pa
    pub p0: T,
}

impl<T: Scalar> GasState<T> {
    pub fn new(params: &Params<T>, z0: T, p0: T) -> Self {
        GasState { z0, d0: T::one() / (params.t0 * params.rs * z0), p0 }
    }

    /// Ideal-gas state (z0 = 1).
    pub fn ideal(params: &Params<T>) -> Self {
        Self::new(params, T::one(), T::zero())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Discretization {
    #[serde(rename = "ode_mid")]
    Midpoint,
    #[serde(rename = "ode_end")]
    Endpoint,
}

impl Discretization {
    pub fn id(self) -> &'static str {
        match self {
            Discretization::Midpoint => "ode_mid",
            Discretization::Endpoint => "ode_end",
        }
    }
}

impl fmt::Display for Discretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Discretization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ode_mid" => Ok(Discretization::Midpoint),
            "ode_end" => Ok(Discretization::Endpoint),
            _ => Err(Error::Invalid(format!("unknown model `{s}` (expected ode_mid or ode_end)"))),
        }
    }
}

/// Model-level configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub friction: FrictionVariant,
    pub compressibility: CompressibilityVariant,
    /// dynamic viscosity, Pa·s
    pub viscosity: f64,
    pub critical: CriticalPoint,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            friction: FrictionVariant::Schifrinson,
            compressibility: CompressibilityVariant::Aga88,
            viscosity: 1e-5,
            critical: CriticalPoint::default(),
        }
    }
}

/// Coefficients of the gravity and friction term of the momentum rows.
#[derive(Clone, Debug)]
pub struct GasTerms<T: Scalar> {
    /// Pressure reconstruction p* = recon_p·p + recon_s·s_p (bar), one row per edge.
    pub recon_p: Csr<T>,
    pub recon_s: Csr<T>,
    /// D_g: g·Δh per edge.
    pub dg: Vec<T>,
    /// D_f: friction_scale·λ/(2 d S) per edge.
    pub df: Vec<T>,
    /// E_q diagonal (L/S).
    pub eq: Vec<T>,
}

/// Nonlinear momentum term `f_q`.
#[derive(Clone, Debug)]
pub enum Nonlinearity<T: Scalar> {
    /// Gravity plus quadratic friction.
    Gas(GasTerms<T>),
    /// Linear damping `f_q = dq ∘ q` (linearized and dual models).
    Linear { dq: Vec<T> },
}

/// Geometry needed to refresh Reynolds-dependent friction factors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeGeometry {
    pub kind: Vec<EdgeKind>,
    pub diameter: Vec<f64>,
    pub area: Vec<f64>,
    pub length: Vec<f64>,
    pub roughness: Vec<f64>,
    pub friction_scale: Vec<f64>,
    pub incline: Vec<f64>,
}

impl serde::Serialize for EdgeKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for EdgeKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        EdgeKind::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad edge kind {s}")))
    }
}

/// A compressor edge: flux row `edge`, discharge pressure row `discharge`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompressorInfo {
    pub edge: usize,
    pub discharge: usize,
    /// Row of the suction node in `p` (None if the suction node is a supply).
    pub suction: Option<usize>,
    /// Supply index of the suction node, if it is a supply.
    pub suction_supply: Option<usize>,
}

/// Semi-discrete model E ẋ = A x + B u + F_c + f(x, u), y = C x.
#[derive(Clone, Debug)]
pub struct DiscreteModel<T: Scalar> {
    pub disc: Discretization,
    pub np: usize,
    pub nq: usize,
    pub ns: usize,
    pub nd: usize,
    /// E_p = d0 · ep0 (or ep0 itself when `ep_fixed`).
    pub ep0: Csr<T>,
    pub ep_fixed: bool,
    pub eq: Csr<T>,
    pub apq: Csr<T>,
    pub aqp: Csr<T>,
    pub bpd: Csr<T>,
    pub bqs: Csr<T>,
    pub csq: Csr<T>,
    pub cdp: Csr<T>,
    pub fc: DVector<T>,
    pub nonlin: Nonlinearity<T>,
    pub compressors: Vec<CompressorInfo>,
    /// Whether a discharge target was injected, per compressor.
    pub compressor_set: Vec<bool>,
    pub geometry: EdgeGeometry,
    pub config: ModelConfig,
    /// Model provenance hash (network, discretization, variants, refinement).
    pub hash: String,
    /// "fom", "linearized" or "dual".
    pub kind: &'static str,
}

/// Assembles the model for a refined network.
pub fn assemble<T: Scalar>(
    topo: &TopologyMatrices<T>,
    refinement: &RefinementResult,
    disc: Discretization,
    config: &ModelConfig,
) -> Result<DiscreteModel<T>> {
    let net = &refinement.refined;
    let nq = net.edges.len();
    let ns = net.supply.len();
    let nd = net.demand.len();
    let np = net.nodes.len() - ns;
    let lit = T::lit;
    let area: Vec<f64> = net.edges.iter().map(|e| e.area()).collect();
    let length: Vec<f64> = net.edges.iter().map(|e| e.length).collect();
    let sl: Vec<T> = (0..nq).map(|k| lit(area[k] * length[k])).collect();
    let eqd: Vec<T> = (0..nq).map(|k| lit(length[k] / area[k])).collect();
    let ep0 = match disc {
        Discretization::Endpoint => {
            let m = topo.a0r.matmul(&Csr::from_diagonal(&sl)).matmul(&topo.a0r.transpose());
            if let Some(r) = (0..np).find(|&r| m.get(r, r) <= T::zero()) {
                let node = &net.nodes[topo.a0_rows[r]];
                return Err(Error::Topology(format!(
                    "endpoint discretization needs an edge entering node `{node}`"
                )));
            }
            m
        }
        Discretization::Midpoint => {
            let a = topo.a0.abs();
            a.matmul(&Csr::from_diagonal(&sl)).matmul(&a.transpose()).scale(lit(0.25))
        }
    };
    let eq = Csr::from_diagonal(&eqd);
    let apq = topo.a0.scale(lit(1.0 / P_SCALE));
    let mut aqp = topo.a0.transpose().scale(lit(-P_SCALE));
    let bpd = topo.bd0.scale(lit(-1.0 / P_SCALE));
    let mut bqs = topo.bs.transpose().scale(lit(-P_SCALE));
    let csq = topo.bs.scale(-T::one());
    let cdp = topo.bd0.transpose();

    let mut compressors = Vec::new();
    for (k, e) in net.edges.iter().enumerate() {
        if e.kind != EdgeKind::Compressor {
            continue;
        }
        let discharge = topo.node_to_row[e.to].ok_or_else(|| {
            Error::Topology(format!("compressor discharge node `{}` is a supply", net.nodes[e.to]))
        })?;
        let suction = topo.node_to_row[e.from];
        let suction_supply = net.supply.iter().position(|&s| s == e.from);
        compressors.push(CompressorInfo { edge: k, discharge, suction, suction_supply });
    }
    // compressor rows keep only the discharge coupling (pressure control at the outlet)
    if !compressors.is_empty() {
        let drop_p: Vec<(usize, usize)> = compressors.iter().filter_map(|c| c.suction.map(|s| (c.edge, s))).collect();
        let drop_s: Vec<(usize, usize)> =
            compressors.iter().filter_map(|c| c.suction_supply.map(|s| (c.edge, s))).collect();
        let trip: Vec<_> = aqp.triplets().into_iter().filter(|(i, j, _)| !drop_p.contains(&(*i, *j))).collect();
        aqp = Csr::from_triplets(nq, np, &trip);
        let trip: Vec<_> = bqs.triplets().into_iter().filter(|(i, j, _)| !drop_s.contains(&(*i, *j))).collect();
        bqs = Csr::from_triplets(nq, ns, &trip);
    }

    let (recon_p, recon_s) = match disc {
        Discretization::Endpoint => (topo.a0r.transpose(), Csr::zeros(nq, ns)),
        Discretization::Midpoint => {
            (topo.a0.abs().transpose().scale(lit(0.5)), topo.bs.abs().transpose().scale(lit(0.5)))
        }
    };
    let geometry = EdgeGeometry {
        kind: net.edges.iter().map(|e| e.kind).collect(),
        diameter: net.edges.iter().map(|e| e.diameter).collect(),
        area: area.clone(),
        length,
        roughness: net.edges.iter().map(|e| e.roughness).collect(),
        friction_scale: refinement.friction_scale.clone(),
        incline: net.edges.iter().map(|e| e.incline).collect(),
    };
    let dg: Vec<T> = (0..nq)
        .map(|k| if geometry.kind[k] == EdgeKind::Pipe { lit(GRAVITY * geometry.incline[k]) } else { T::zero() })
        .collect();
    let df = friction_coefficients(&geometry, config, None)?;
    let mut hasher = Sha256::new();
    hasher.update(net.canonical().as_bytes());
    hasher.update(format!("{:?}|{}|{:e}|{:?}", refinement.friction_scale, disc.id(), refinement.dx, config).as_bytes());
    let hash = hex(&hasher.finalize());
    let ncomp = compressors.len();
    Ok(DiscreteModel {
        disc,
        np,
        nq,
        ns,
        nd,
        ep0,
        ep_fixed: false,
        eq,
        apq,
        aqp,
        bpd,
        bqs,
        csq,
        cdp,
        fc: DVector::zeros(nq),
        nonlin: Nonlinearity::Gas(GasTerms { recon_p, recon_s, dg, df, eq: eqd }),
        compressors,
        compressor_set: vec![false; ncomp],
        geometry,
        config: *config,
        hash,
        kind: "fom",
    })
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// D_f per edge: friction_scale·λ/(2 d S); Reynolds numbers from `qbar` when given.
fn friction_coefficients<T: Scalar>(g: &EdgeGeometry, cfg: &ModelConfig, qbar: Option<&[f64]>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(g.kind.len());
    for k in 0..g.kind.len() {
        if g.kind[k] != EdgeKind::Pipe || g.friction_scale[k] == 0.0 {
            out.push(T::zero());
            continue;
        }
        let re = match qbar {
            Some(q) if q[k] != 0.0 => q[k].abs() * g.diameter[k] / (g.area[k] * cfg.viscosity),
            _ => 1e6,
        };
        let lambda = friction_factor(cfg.friction, g.diameter[k], g.roughness[k], re)?;
        out.push(T::lit(g.friction_scale[k] * lambda / (2.0 * g.diameter[k] * g.area[k])));
    }
    Ok(out)
}

/// Assembles directly from a parsed network: refine with `dx`, incidence, assemble.
pub fn build_model<T: Scalar>(
    net: &crate::netgraph::Network,
    dx: f64,
    disc: Discretization,
    config: &ModelConfig,
) -> Result<(DiscreteModel<T>, RefinementResult)> {
    let refinement = crate::netgraph::refine(net, dx);
    let topo = incidence::<T>(&refinement.refined);
    let model = assemble(&topo, &refinement, disc, config)?;
    Ok((model, refinement))
}

impl<T: Scalar> DiscreteModel<T> {
    pub fn n_state(&self) -> usize {
        self.np + self.nq
    }

    pub fn n_ports(&self) -> usize {
        self.ns + self.nd
    }

    /// E_p for a gas state.
    pub fn ep(&self, gas: &GasState<T>) -> Csr<T> {
        if self.ep_fixed {
            self.ep0.clone()
        } else {
            self.ep0.scale(gas.d0)
        }
    }

    /// Full mass matrix diag(E_p, E_q).
    pub fn mass_matrix(&self, gas: &GasState<T>) -> Csr<T> {
        let ep = self.ep(gas);
        Csr::block(&[vec![Some(&ep), None], vec![None, Some(&self.eq)]], &[self.np, self.nq], &[self.np, self.nq])
    }

    /// Full linear operator [[0, A_pq], [A_qp, 0]].
    pub fn a_matrix(&self) -> Csr<T> {
        Csr::block(
            &[vec![None, Some(&self.apq)], vec![Some(&self.aqp), None]],
            &[self.np, self.nq],
            &[self.np, self.nq],
        )
    }

    /// Full input operator [[0, B_pd], [B_qs, 0]] acting on u = (s_p, d_q).
    pub fn b_matrix(&self) -> Csr<T> {
        Csr::block(
            &[vec![None, Some(&self.bpd)], vec![Some(&self.bqs), None]],
            &[self.np, self.nq],
            &[self.ns, self.nd],
        )
    }

    /// Full output operator [[0, C_sq], [C_dp, 0]] producing y = (s_q, d_p).
    pub fn c_matrix(&self) -> Csr<T> {
        Csr::block(
            &[vec![None, Some(&self.csq)], vec![Some(&self.cdp), None]],
            &[self.ns, self.nd],
            &[self.np, self.nq],
        )
    }

    /// Sets the discharge target of a compressor identified by its flux row.
    pub fn compressor_inject(&mut self, edge: usize, p_target: T) -> Result<()> {
        let idx = self
            .compressors
            .iter()
            .position(|c| c.edge == edge)
            .ok_or_else(|| Error::Invalid(format!("edge {edge} is not a compressor")))?;
        if !(p_target > T::zero()) {
            return Err(Error::Invalid(format!("compressor target must be positive, got {p_target}")));
        }
        self.fc[edge] = p_target;
        self.compressor_set[idx] = true;
        Ok(())
    }

    /// Copy with all compressor discharge targets set (bar, compressor order).
    pub fn with_compressor_targets(&self, cp_bar: &[T]) -> Result<Self> {
        if cp_bar.len() != self.compressors.len() {
            return Err(Error::MissingKey(format!(
                "cp: {} compressor target(s) required, {} given",
                self.compressors.len(),
                cp_bar.len()
            )));
        }
        let mut m = self.clone();
        for (c, &p) in self.compressors.iter().zip(cp_bar) {
            m.compressor_inject(c.edge, p * T::lit(P_SCALE))?;
        }
        Ok(m)
    }

    pub fn check_ready(&self) -> Result<()> {
        if let Some(i) = self.compressor_set.iter().position(|s| !s) {
            return Err(Error::MissingKey(format!("discharge pressure for compressor {i}")));
        }
        Ok(())
    }

    /// Recomputes Reynolds-dependent friction coefficients from a steady flux.
    pub fn refresh_friction(&mut self, qbar: &[T]) -> Result<()> {
        if !self.config.friction.uses_reynolds() {
            return Ok(());
        }
        let q: Vec<f64> = qbar.iter().map(|v| v.to_f64_lossy()).collect();
        let df = friction_coefficients(&self.geometry, &self.config, Some(&q))?;
        if let Nonlinearity::Gas(g) = &mut self.nonlin {
            g.df = df;
        }
        Ok(())
    }

    /// Disables friction (used by analytic checks).
    pub fn without_friction(&self) -> Self {
        let mut m = self.clone();
        if let Nonlinearity::Gas(g) = &mut m.nonlin {
            g.df.iter_mut().for_each(|v| *v = T::zero());
        }
        m
    }

    /// Reconstructed edge pressures p* (bar).
    pub fn reconstruct(&self, p: &[T], s: &[T]) -> Vec<T> {
        match &self.nonlin {
            Nonlinearity::Gas(g) => {
                let mut ps = vec![T::zero(); self.nq];
                g.recon_p.mul_vec(p, &mut ps);
                g.recon_s.mul_vec_add(T::one(), s, &mut ps);
                ps
            }
            Nonlinearity::Linear { .. } => vec![T::zero(); self.nq],
        }
    }

    /// Evaluates f_q(p, q, s_p) into `out` (length N_q).
    pub fn f_q(&self, p: &[T], q: &[T], s: &[T], gas: &GasState<T>, out: &mut [T]) -> Result<()> {
        match &self.nonlin {
            Nonlinearity::Linear { dq } => {
                for k in 0..self.nq {
                    out[k] = dq[k] * q[k];
                }
                Ok(())
            }
            Nonlinearity::Gas(g) => {
                let sc = T::lit(P_SCALE);
                g.recon_p.mul_vec(p, out);
                g.recon_s.mul_vec_add(T::one(), s, out);
                for k in 0..self.nq {
                    let ps = out[k];
                    let (dg, df) = (g.dg[k], g.df[k]);
                    if dg == T::zero() && df == T::zero() {
                        out[k] = T::zero();
                        continue;
                    }
                    if !(ps > T::zero()) {
                        return Err(Error::NonPositivePressure { index: k, value: ps.to_f64_lossy() });
                    }
                    let rho = gas.d0 * ps;
                    out[k] = -(sc * dg * rho + g.eq[k] * df * q[k].abs() * q[k] / (sc * rho));
                }
                Ok(())
            }
        }
    }

    /// Jacobian of f_q: (∂f/∂p sparse, ∂f/∂s sparse, ∂f/∂q diagonal).
    pub fn jacobian(&self, p: &[T], q: &[T], s: &[T], gas: &GasState<T>) -> Result<(Csr<T>, Csr<T>, Vec<T>)> {
        match &self.nonlin {
            Nonlinearity::Linear { dq } => Ok((Csr::zeros(self.nq, self.np), Csr::zeros(self.nq, self.ns), dq.clone())),
            Nonlinearity::Gas(g) => {
                let sc = T::lit(P_SCALE);
                let ps = self.reconstruct(p, s);
                let mut dps = vec![T::zero(); self.nq];
                let mut dqv = vec![T::zero(); self.nq];
                for k in 0..self.nq {
                    if g.dg[k] == T::zero() && g.df[k] == T::zero() {
                        continue;
                    }
                    if !(ps[k] > T::zero()) {
                        return Err(Error::NonPositivePressure { index: k, value: ps[k].to_f64_lossy() });
                    }
                    let rho = gas.d0 * ps[k];
                    let fr = g.eq[k] * g.df[k] / (sc * gas.d0);
                    dps[k] = -(sc * g.dg[k] * gas.d0) + fr * q[k].abs() * q[k] / (ps[k] * ps[k]);
                    dqv[k] = -T::lit(2.0) * g.eq[k] * g.df[k] * q[k].abs() / (sc * rho);
                }
                let d = Csr::from_diagonal(&dps);
                Ok((d.matmul(&g.recon_p), d.matmul(&g.recon_s), dqv))
            }
        }
    }

    /// rp = A_pq q + B_pd d_q and rq = A_qp p + B_qs s_p + F_c + f_q.
    #[allow(clippy::too_many_arguments)]
    pub fn eval_rhs(
        &self,
        p: &[T],
        q: &[T],
        s: &[T],
        d: &[T],
        gas: &GasState<T>,
    ) -> Result<(DVector<T>, DVector<T>)> {
        let mut rp = DVector::zeros(self.np);
        self.apq.mul_vec(q, rp.as_mut_slice());
        self.bpd.mul_vec_add(T::one(), d, rp.as_mut_slice());
        let mut rq = DVector::zeros(self.nq);
        self.f_q(p, q, s, gas, rq.as_mut_slice())?;
        self.aqp.mul_vec_add(T::one(), p, rq.as_mut_slice());
        self.bqs.mul_vec_add(T::one(), s, rq.as_mut_slice());
        rq += &self.fc;
        Ok((rp, rq))
    }

    /// Outputs y = (C_sq q, C_dp p).
    pub fn output(&self, x: &[T], y: &mut [T]) {
        let (p, q) = x.split_at(self.np);
        let (ys, yd) = y.split_at_mut(self.ns);
        self.csq.mul_vec(q, ys);
        self.cdp.mul_vec(p, yd);
    }

    /// Binds the model to a gas state and initial state for time stepping.
    pub fn bind(&self, gas: GasState<T>, x0: DVector<T>) -> Result<FomInstance<'_, T>> {
        self.check_ready()?;
        if x0.len() != self.n_state() {
            return Err(Error::Dimension(format!("initial state {} vs {}", x0.len(), self.n_state())));
        }
        let ep = self.ep(&gas);
        Ok(FomInstance { model: self, gas, ep, x0 })
    }

    /// Linearization at (p̄, q̄, s̄): A_qp ← A_qp + ∂f/∂p, B_qs ← B_qs + ∂f/∂s, f_q ← (∂f/∂q) q,
    /// F_c ← 0, with E_p frozen at the given gas state.
    pub fn linearize(&self, p: &[T], q: &[T], s: &[T], gas: &GasState<T>) -> Result<Self> {
        let (dfdp, dfds, dfdq) = self.jacobian(p, q, s, gas)?;
        let mut m = self.clone();
        m.aqp = self.aqp.lin_comb(T::one(), &dfdp, T::one());
        m.bqs = self.bqs.lin_comb(T::one(), &dfds, T::one());
        m.nonlin = Nonlinearity::Linear { dq: dfdq };
        m.fc = DVector::zeros(self.nq);
        m.ep0 = self.ep(gas);
        m.ep_fixed = true;
        m.compressor_set.iter_mut().for_each(|s| *s = true);
        m.kind = "linearized";
        Ok(m)
    }
}

/// A model bound to a gas state and initial condition, ready for time stepping.
pub struct FomInstance<'a, T: Scalar> {
    pub model: &'a DiscreteModel<T>,
    pub gas: GasState<T>,
    pub ep: Csr<T>,
    pub x0: DVector<T>,
}

impl<T: Scalar> crate::timestep::Dynamics<T> for FomInstance<'_, T> {
    fn n_state(&self) -> usize {
        self.model.n_state()
    }

    fn n_input(&self) -> usize {
        self.model.n_ports()
    }

    fn n_output(&self) -> usize {
        self.model.n_ports()
    }

    fn linear(&self, x: &[T], out: &mut [T]) {
        let m = self.model;
        let (p, q) = x.split_at(m.np);
        let (op, oq) = out.split_at_mut(m.np);
        m.apq.mul_vec(q, op);
        m.aqp.mul_vec(p, oq);
    }

    fn forcing(&self, x: &[T], u: &[T], out: &mut [T]) -> Result<()> {
        let m = self.model;
        let (p, q) = x.split_at(m.np);
        let (s, d) = u.split_at(m.ns);
        let (op, oq) = out.split_at_mut(m.np);
        m.bpd.mul_vec(d, op);
        m.f_q(p, q, s, &self.gas, oq)?;
        m.bqs.mul_vec_add(T::one(), s, oq);
        for (o, f) in oq.iter_mut().zip(m.fc.iter()) {
            *o += *f;
        }
        Ok(())
    }

    fn mass(&self, x: &[T], out: &mut [T]) {
        let m = self.model;
        let (p, q) = x.split_at(m.np);
        let (op, oq) = out.split_at_mut(m.np);
        self.ep.mul_vec(p, op);
        m.eq.mul_vec(q, oq);
    }

    fn factor(&self, c: T) -> Result<LinearSolver<T>> {
        let m = self.model;
        let e = m.mass_matrix(&self.gas);
        let mat = if c == T::zero() { e } else { e.lin_comb(T::one(), &m.a_matrix(), -c) };
        LinearSolver::sparse(&mat)
    }

    fn output(&self, x: &[T], y: &mut [T]) {
        self.model.output(x, y);
    }

    fn initial_state(&self) -> DVector<T> {
        self.x0.clone()
    }
}
