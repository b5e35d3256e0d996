use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Machine precision used by MORscores (16 digits).
pub const EPS_MACH: f64 = 1e-16;

/// Norm order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormOrder {
    /// Terminal value (time only).
    Zero,
    One,
    Two,
    Inf,
}

impl NormOrder {
    pub fn label(self) -> &'static str {
        match self {
            NormOrder::Zero => "0",
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Inf => "inf",
        }
    }
}

/// Time norm of one output trajectory (ports × time), weighted by `dt`.
///
/// Two: sqrt(Σ_t dt ‖e_t‖²); One: Σ_t dt ‖e_t‖₁; Inf: max_t ‖e_t‖∞; Zero: ‖e_T‖₂ at the
/// final time.
pub fn time_norm(e: &DMatrix<f64>, dt: f64, l: NormOrder) -> f64 {
    match l {
        NormOrder::Two => (dt * e.norm_squared()).sqrt(),
        NormOrder::One => dt * e.iter().map(|v| v.abs()).sum::<f64>(),
        NormOrder::Inf => e.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormOrder::Zero => {
            if e.ncols() == 0 {
                0.0
            } else {
                e.column(e.ncols() - 1).norm()
            }
        }
    }
}

/// Combines per-parameter values with a parameter-space norm.
pub fn param_norm(v: &[f64], k: NormOrder) -> Result<f64> {
    Ok(match k {
        NormOrder::One => v.iter().sum(),
        NormOrder::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormOrder::Inf => v.iter().fold(0.0, |m, x| m.max(*x)),
        NormOrder::Zero => return Err(Error::Invalid("parameter norm order must be 1, 2 or inf".into())),
    })
}

/// Parametric (k ⊗ l) norm of the output error Y − Ỹ over parameter samples.
pub fn error_norm(y: &[DMatrix<f64>], yt: &[DMatrix<f64>], dt: f64, k: NormOrder, l: NormOrder) -> Result<f64> {
    if y.len() != yt.len() || y.iter().zip(yt).any(|(a, b)| a.shape() != b.shape()) {
        return Err(Error::Dimension("output tensors differ in shape".into()));
    }
    let per: Vec<f64> = y.iter().zip(yt).map(|(a, b)| time_norm(&(a - b), dt, l)).collect();
    param_norm(&per, k)
}

/// Error norm divided by the same norm of Y.
pub fn relative_error(y: &[DMatrix<f64>], yt: &[DMatrix<f64>], dt: f64, k: NormOrder, l: NormOrder) -> Result<f64> {
    let e = error_norm(y, yt, dt, k, l)?;
    let zero: Vec<DMatrix<f64>> = y.iter().map(|a| DMatrix::zeros(a.nrows(), a.ncols())).collect();
    let r = error_norm(y, &zero, dt, k, l)?;
    Ok(if r > 0.0 { e / r } else { e })
}

/// MORscore of a relative error curve over orders 1..n_max: errors are clamped to
/// [eps_mach, 1] (non-finite values count as 1), mapped to log(ε)/log(eps_mach) and
/// summed as a staircase.
pub fn morscore(errors: &[f64], eps_mach: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Invalid("empty error curve".into()));
    }
    if !(eps_mach > 0.0 && eps_mach < 1.0) {
        return Err(Error::Invalid(format!("eps_mach = {eps_mach}")));
    }
    let le = eps_mach.ln();
    let sum: f64 = errors
        .iter()
        .map(|&e| {
            let c = if e.is_finite() { e.clamp(eps_mach, 1.0) } else { 1.0 };
            (c.ln() / le).abs()
        })
        .sum();
    Ok(sum / errors.len() as f64)
}
