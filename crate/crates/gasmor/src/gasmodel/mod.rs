//! Semi-discrete gas network model: physics registries, assembly, port-Hamiltonian
//! accessors and the dual system.

mod model;
mod ph;
pub mod physics;

pub use model::{
    assemble, build_model, CompressorInfo, Discretization, DiscreteModel, EdgeGeometry, FomInstance, GasState,
    GasTerms, ModelConfig, Nonlinearity, Params,
};
pub use ph::PortHamiltonianParts;
pub use physics::{
    compressibility, compressibility_with, friction_factor, CompressibilityVariant, CriticalPoint, FrictionVariant,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gas constants from a steady pressure vector `pbar` (bar): p0 is its mean.
pub fn gas_state<T: Scalar>(
    pbar: &[T],
    params: &Params<T>,
    variant: CompressibilityVariant,
    crit: CriticalPoint,
) -> Result<GasState<T>> {
    if pbar.is_empty() {
        return Err(Error::Invalid("empty pressure vector".into()));
    }
    if let Some(i) = pbar.iter().position(|p| !(*p > T::zero())) {
        return Err(Error::NonPositivePressure { index: i, value: pbar[i].to_f64_lossy() });
    }
    let mean = pbar.iter().fold(T::zero(), |a, b| a + *b) / T::lit(pbar.len() as f64);
    let p0 = mean * T::lit(model::P_SCALE);
    let z0 = compressibility_with(variant, p0.to_f64_lossy(), params.t0.to_f64_lossy(), crit)?;
    Ok(GasState::new(params, T::lit(z0), p0))
}
