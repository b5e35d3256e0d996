//! Friction factor and compressibility factor registries.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrictionVariant {
    Hofer,
    Nikuradse,
    Altshul,
    Schifrinson,
    Pmt1025,
    Igt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressibilityVariant {
    Ideal,
    Dvgw2000,
    Aga88,
    Papay,
}

impl FrictionVariant {
    pub const ALL: [FrictionVariant; 6] = [
        FrictionVariant::Hofer,
        FrictionVariant::Nikuradse,
        FrictionVariant::Altshul,
        FrictionVariant::Schifrinson,
        FrictionVariant::Pmt1025,
        FrictionVariant::Igt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrictionVariant::Hofer => "hofer",
            FrictionVariant::Nikuradse => "nikuradse",
            FrictionVariant::Altshul => "altshul",
            FrictionVariant::Schifrinson => "schifrinson",
            FrictionVariant::Pmt1025 => "pmt1025",
            FrictionVariant::Igt => "igt",
        }
    }

    /// Whether the formula depends on the Reynolds number.
    pub fn uses_reynolds(self) -> bool {
        !matches!(self, FrictionVariant::Nikuradse | FrictionVariant::Schifrinson)
    }
}

impl CompressibilityVariant {
    pub fn name(self) -> &'static str {
        match self {
            CompressibilityVariant::Ideal => "ideal",
            CompressibilityVariant::Dvgw2000 => "dvgw2000",
            CompressibilityVariant::Aga88 => "aga88",
            CompressibilityVariant::Papay => "papay",
        }
    }
}

impl fmt::Display for FrictionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for CompressibilityVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrictionVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FrictionVariant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Invalid(format!("unknown friction variant `{s}`")))
    }
}

impl FromStr for CompressibilityVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" => Ok(CompressibilityVariant::Ideal),
            "dvgw2000" => Ok(CompressibilityVariant::Dvgw2000),
            "aga88" => Ok(CompressibilityVariant::Aga88),
            "papay" => Ok(CompressibilityVariant::Papay),
            _ => Err(Error::Invalid(format!("unknown compressibility variant `{s}`"))),
        }
    }
}

/// Darcy-Weisbach friction factor λ(d, k, Re).
pub fn friction_factor(variant: FrictionVariant, d: f64, k: f64, re: f64) -> Result<f64> {
    if !(d > 0.0 && k >= 0.0 && re > 0.0) {
        return Err(Error::Invalid(format!("friction_factor(d={d}, k={k}, Re={re})")));
    }
    let r = k / d;
    let lambda = match variant {
        FrictionVariant::Nikuradse => (2.0 * (d / k).log10() + 1.138).powi(-2),
        FrictionVariant::Schifrinson => 0.11 * r.powf(0.25),
        FrictionVariant::Altshul => 0.11 * (r + 68.0 / re).powf(0.25),
        FrictionVariant::Hofer => {
            let inner = (4.518 / re) * (re / 7.0).log10() + k / (3.71 * d);
            (-2.0 * inner.log10()).powi(-2)
        }
        FrictionVariant::Pmt1025 => 0.067 * (158.0 / re + 2.0 * r).powf(0.2),
        FrictionVariant::Igt => 0.188 * re.powf(-0.2),
    };
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::DegenerateFriction { variant: variant.name().into(), d, k, re });
    }
    Ok(lambda)
}

/// Pseudo-critical constants used by the reduced-state formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Pa
    pub pc: f64,
    /// K
    pub tc: f64,
}

impl Default for CriticalPoint {
    fn default() -> Self {
        CriticalPoint { pc: 46.4e5, tc: 192.0 }
    }
}

/// Compressibility factor z(p, T) with default pseudo-critical constants.
pub fn compressibility(variant: CompressibilityVariant, p: f64, t: f64) -> Result<f64> {
    compressibility_with(variant, p, t, CriticalPoint::default())
}

pub fn compressibility_with(variant: CompressibilityVariant, p: f64, t: f64, crit: CriticalPoint) -> Result<f64> {
    if !(p >= 0.0 && t > 0.0) {
        return Err(Error::Invalid(format!("compressibility(p={p}, T={t})")));
    }
    let pr = p / crit.pc;
    let tr = t / crit.tc;
    let z = match variant {
        CompressibilityVariant::Ideal => 1.0,
        // simplified DVGW G 2000 relation, p in bar
        CompressibilityVariant::Dvgw2000 => 1.0 - (p / 1e5) / 450.0,
        CompressibilityVariant::Aga88 => 1.0 + 0.257 * pr - 0.533 * pr / tr,
        CompressibilityVariant::Papay => {
            1.0 - 3.52 * pr * (-2.26 * tr).exp() + 0.274 * pr * pr * (-1.878 * tr).exp()
        }
    };
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Compressibility { z, p, t });
    }
    Ok(z)
}
