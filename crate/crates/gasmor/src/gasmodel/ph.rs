//! Port-Hamiltonian form E ẋ = (J − R(x))Q x + (G − P) u of the endpoint model and
//! its dual system.

use super::model::{DiscreteModel, Discretization, GasState, Nonlinearity, P_SCALE};
use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::scalar::Scalar;
use nalgebra::DVector;

/// Structure matrices of the endpoint model. `R(x)` is state dependent and
/// evaluated by [`DiscreteModel::dissipation`].
#[derive(Clone, Debug)]
pub struct PortHamiltonianParts<T: Scalar> {
    pub e: Csr<T>,
    pub j: Csr<T>,
    /// Diagonal of Q.
    pub q: Vec<T>,
    pub g: Csr<T>,
    pub p: Csr<T>,
}

impl<T: Scalar> DiscreteModel<T> {
    fn require_endpoint(&self, what: &str) -> Result<()> {
        if self.disc != Discretization::Endpoint {
            return Err(Error::Unsupported(format!("{what} requires the ode_end discretization")));
        }
        Ok(())
    }

    /// Flux-block rows of (J Q x + (G − P) u) with the full incidence coupling, i.e.
    /// ignoring the compressor row surgery.
    fn ph_linear_q(&self, p: &[T], s: &[T]) -> Vec<T> {
        let Nonlinearity::Gas(_) = &self.nonlin else { unreachable!() };
        let sc = T::lit(P_SCALE);
        let mut out = vec![T::zero(); self.nq];
        self.aqp.mul_vec(p, &mut out);
        self.bqs.mul_vec_add(T::one(), s, &mut out);
        for c in &self.compressors {
            if let Some(i) = c.suction {
                out[c.edge] += sc * p[i];
            }
            if let Some(i) = c.suction_supply {
                out[c.edge] += sc * s[i];
            }
        }
        out
    }

    /// −1e5 B_sᵀ including the rows removed for compressors with a supply suction.
    fn supply_coupling(&self) -> Csr<T> {
        let sc = T::lit(P_SCALE);
        let mut trip = self.bqs.triplets();
        for c in &self.compressors {
            if let Some(i) = c.suction_supply {
                trip.push((c.edge, i, sc));
            }
        }
        Csr::from_triplets(self.nq, self.ns, &trip)
    }

    /// Structure matrices E, J, Q, G, P.
    pub fn ph_parts(&self, gas: &GasState<T>) -> Result<PortHamiltonianParts<T>> {
        self.require_endpoint("ph_parts")?;
        if !matches!(self.nonlin, Nonlinearity::Gas(_)) {
            return Err(Error::Unsupported("ph_parts of a linearized model".into()));
        }
        let (np, nq, ns, nd) = (self.np, self.nq, self.ns, self.nd);
        let sc = T::lit(P_SCALE);
        // A_0 from the (unscaled) continuity block
        let a0 = self.apq.scale(sc);
        let neg_a0t = a0.transpose().scale(-T::one());
        let j = Csr::block(&[vec![None, Some(&a0)], vec![Some(&neg_a0t), None]], &[np, nq], &[np, nq]);
        let mut q = vec![sc; np];
        q.extend(std::iter::repeat_n(T::one() / sc, nq));
        // G carries the supply coupling −1e5 B_sᵀ, P the demand coupling 1e−5 B_d
        let gq = self.supply_coupling();
        let g = Csr::block(&[vec![None, None], vec![Some(&gq), None]], &[np, nq], &[ns, nd]);
        let pd = self.bpd.scale(-T::one());
        let p = Csr::block(&[vec![None, Some(&pd)], vec![None, None]], &[np, nq], &[ns, nd]);
        Ok(PortHamiltonianParts { e: self.mass_matrix(gas), j, q, g, p })
    }

    /// Flux-block diagonal of R(x): friction and compressor drive divided by the flux.
    /// Gravity is returned separately by [`DiscreteModel::gravity_load`].
    pub fn dissipation(&self, x: &[T], u: &[T], gas: &GasState<T>) -> Result<Vec<T>> {
        let Nonlinearity::Gas(g) = &self.nonlin else {
            return Err(Error::Unsupported("dissipation of a linearized model".into()));
        };
        let sc = T::lit(P_SCALE);
        let (p, q) = x.split_at(self.np);
        let s = &u[..self.ns];
        let ps = self.reconstruct(p, s);
        let mut r = vec![T::zero(); self.nq];
        for k in 0..self.nq {
            if g.df[k] == T::zero() {
                continue;
            }
            if !(ps[k] > T::zero()) {
                return Err(Error::NonPositivePressure { index: k, value: ps[k].to_f64_lossy() });
            }
            r[k] = sc * g.eq[k] * g.df[k] * q[k].abs() / (sc * gas.d0 * ps[k]);
        }
        for c in &self.compressors {
            let pin = match (c.suction, c.suction_supply) {
                (Some(i), _) => p[i],
                (None, Some(i)) => s[i],
                _ => continue,
            };
            if q[c.edge] != T::zero() {
                r[c.edge] = sc * (sc * pin - self.fc[c.edge]) / q[c.edge];
            }
        }
        Ok(r)
    }

    /// Gravity term −1e5·D_g·d0·p* of the momentum rows.
    pub fn gravity_load(&self, x: &[T], u: &[T], gas: &GasState<T>) -> Vec<T> {
        let Nonlinearity::Gas(g) = &self.nonlin else { return vec![T::zero(); self.nq] };
        let ps = self.reconstruct(&x[..self.np], &u[..self.ns]);
        (0..self.nq).map(|k| -(T::lit(P_SCALE) * g.dg[k] * gas.d0 * ps[k])).collect()
    }

    /// Dual system E ż = Aᵀ z + Cᵀ v, w = Bᵀ z of the linear model A = (J − R̄)Q.
    ///
    /// For a gas model, R̄ is the secant dissipation at the anchor (x̄, ū), chosen so the
    /// frozen linear model has x̄ as its equilibrium. Linear models are transposed as-is,
    /// so the dual of a dual is the original.
    pub fn dual_model(&self, xbar: &[T], ubar: &[T], gas: &GasState<T>) -> Result<Self> {
        self.require_endpoint("dual_model")?;
        let (apq, aqp, bqs, dq) = match &self.nonlin {
            Nonlinearity::Linear { dq } => (self.apq.clone(), self.aqp.clone(), self.bqs.clone(), dq.clone()),
            Nonlinearity::Gas(_) => {
                if xbar.len() != self.n_state() || ubar.len() != self.n_ports() {
                    return Err(Error::Dimension("dual_model anchor".into()));
                }
                let (p, q) = xbar.split_at(self.np);
                let s = &ubar[..self.ns];
                let (_, rq) = self.eval_rhs(p, q, s, &ubar[self.ns..], gas)?;
                let lin = self.ph_linear_q(p, s);
                let dq: Vec<T> = (0..self.nq)
                    .map(|k| if q[k] == T::zero() { T::zero() } else { (rq[k] - lin[k]) / q[k] })
                    .collect();
                let sc = T::lit(P_SCALE);
                let aqp_full = self.apq.scale(sc).transpose().scale(-sc);
                (self.apq.clone(), aqp_full, self.supply_coupling(), dq)
            }
        };
        let mut d = self.clone();
        d.apq = aqp.transpose();
        d.aqp = apq.transpose();
        d.bpd = self.cdp.transpose();
        d.bqs = self.csq.transpose();
        d.csq = bqs.transpose();
        d.cdp = self.bpd.transpose();
        d.nonlin = Nonlinearity::Linear { dq };
        d.fc = DVector::zeros(self.nq);
        d.ep0 = self.ep(gas);
        d.ep_fixed = true;
        d.compressor_set.iter_mut().for_each(|s| *s = true);
        d.kind = if self.kind == "dual" { "linearized" } else { "dual" };
        Ok(d)
    }
}
