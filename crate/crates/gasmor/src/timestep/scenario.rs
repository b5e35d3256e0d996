use super::InputSignal;
use crate::config::{parse_list, parse_scalar, Ini};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::path::Path;

/// Boundary scenario: parameters, horizon and piecewise-constant inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T: Scalar> {
    pub t0: T,
    pub rs: T,
    /// Horizon, seconds.
    pub th: T,
    /// Ascending breakpoints starting at 0.
    pub ut: Vec<T>,
    /// Supply pressures (bar), one row per breakpoint.
    pub up: Vec<Vec<T>>,
    /// Demand fluxes (kg/s), one row per breakpoint.
    pub uq: Vec<Vec<T>>,
    /// Compressor discharge pressures (bar).
    pub cp: Vec<T>,
    /// Valve settings (1 = open).
    pub vs: Vec<T>,
}

fn rows<T: Scalar>(key: &str, value: &str) -> Result<Vec<Vec<T>>> {
    value
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|r| Ok(parse_list(key, r)?.into_iter().map(T::lit).collect()))
        .collect()
}

fn fit_rows<T: Scalar>(key: &str, raw: &[Vec<T>], nbreak: usize, n: usize) -> Result<Vec<Vec<T>>> {
    if raw.len() == nbreak && raw.iter().all(|r| r.len() == n) {
        return Ok(raw.to_vec());
    }
    if raw.len() == 1 {
        let r = &raw[0];
        if r.len() == n {
            return Ok(vec![r.clone(); nbreak]);
        }
        if n > 0 && r.len() == n * nbreak {
            return Ok(r.chunks(n).map(|c| c.to_vec()).collect());
        }
    }
    if n == 0 && raw.iter().all(|r| r.is_empty()) {
        return Ok(vec![Vec::new(); nbreak]);
    }
    Err(Error::Dimension(format!(
        "{key}: expected {nbreak} row(s) of {n} value(s), got {} row(s) of lengths {:?}",
        raw.len(),
        raw.iter().map(|r| r.len()).collect::<Vec<_>>()
    )))
}

impl<T: Scalar> Scenario<T> {
    /// Parses a scenario `.ini`. Rows of `up`/`uq` are separated by `;`, or given as
    /// one flat list; [`Scenario::fit`] resolves the layout once port counts are known.
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::parse(text)?;
        let get = |k: &str| ini.require("", k);
        let t0 = parse_scalar("T0", get("T0")?)?;
        let rs = parse_scalar("RS", get("RS")?)?;
        let th = parse_scalar("tH", get("tH")?)?;
        let ut = parse_list("ut", get("ut")?)?;
        let up = rows::<T>("up", get("up")?)?;
        let uq = rows::<T>("uq", get("uq")?)?;
        let cp = ini.get("", "cp").map(|v| parse_list("cp", v)).transpose()?.unwrap_or_default();
        let vs = ini.get("", "vs").map(|v| parse_list("vs", v)).transpose()?.unwrap_or_default();
        if !(t0 > 0.0 && rs > 0.0 && th > 0.0) {
            return Err(Error::Invalid("T0, RS and tH must be positive".into()));
        }
        if ut.first() != Some(&0.0) || ut.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("ut must start at 0 and be strictly ascending".into()));
        }
        if vs.iter().any(|&v| v == 0.0) {
            return Err(Error::Unsupported("closed valves".into()));
        }
        Ok(Scenario {
            t0: T::lit(t0),
            rs: T::lit(rs),
            th: T::lit(th),
            ut: ut.into_iter().map(T::lit).collect(),
            up,
            uq,
            cp: cp.into_iter().map(T::lit).collect(),
            vs: vs.into_iter().map(T::lit).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Resolves input rows to `ns` supplies and `nd` demands per breakpoint.
    pub fn fit(&self, ns: usize, nd: usize) -> Result<Self> {
        let nb = self.ut.len();
        Ok(Scenario {
            up: fit_rows("up", &self.up, nb, ns)?,
            uq: fit_rows("uq", &self.uq, nb, nd)?,
            ..self.clone()
        })
    }

    /// Constant scenario with one breakpoint.
    pub fn constant(t0: T, rs: T, th: T, sp: Vec<T>, dq: Vec<T>, cp: Vec<T>) -> Self {
        Scenario { t0, rs, th, ut: vec![T::zero()], up: vec![sp], uq: vec![dq], cp, vs: Vec::new() }
    }

    fn index_at(&self, t: T) -> usize {
        self.ut.iter().rposition(|&b| b <= t).unwrap_or(0)
    }

    /// Inputs in force at time t: the row of the latest breakpoint ≤ t.
    pub fn input_at(&self, t: T) -> Result<(Vec<T>, Vec<T>)> {
        if !(t >= T::zero() && t <= self.th) {
            return Err(Error::Invalid(format!("t = {t} outside [0, {}]", self.th)));
        }
        let i = self.index_at(t);
        Ok((self.up[i].clone(), self.uq[i].clone()))
    }

    /// Initial boundary values (first row).
    pub fn initial(&self) -> (Vec<T>, Vec<T>) {
        (self.up[0].clone(), self.uq[0].clone())
    }

    pub fn params(&self) -> crate::gasmodel::Params<T> {
        crate::gasmodel::Params { t0: self.t0, rs: self.rs }
    }
}

impl<T: Scalar> InputSignal<T> for Scenario<T> {
    fn eval(&self, t: T, out: &mut [T]) {
        let i = self.index_at(t);
        let ns = self.up[i].len();
        out[..ns].copy_from_slice(&self.up[i]);
        out[ns..].copy_from_slice(&self.uq[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "T0 = 283.15\nRS = 530\ntH = 7200\nut = 0 3600\nup = 84 ; 85\nuq = 46.3 46.3\n";

    #[test]
    fn left_breakpoint_rule() {
        let s = Scenario::<f64>::parse(TEXT).unwrap().fit(1, 1).unwrap();
        assert_eq!(s.input_at(1800.0).unwrap().0, vec![84.0]);
        assert_eq!(s.input_at(3600.0).unwrap().0, vec![85.0]);
        assert!(s.input_at(-1.0).is_err());
        assert_eq!(s.uq, vec![vec![46.3], vec![46.3]]);
    }

    #[test]
    fn broadcast_and_missing_key() {
        let s = Scenario::<f64>::parse("T0=280\nRS=500\ntH=10\nut=0 5\nup=80\nuq=1 2\n").unwrap();
        let f = s.fit(1, 2).unwrap();
        assert_eq!(f.up, vec![vec![80.0], vec![80.0]]);
        assert_eq!(f.uq, vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
        let err = Scenario::<f64>::parse("T0=280\nRS=500\nut=0\nup=80\nuq=1\n").unwrap_err();
        assert!(matches!(err, Error::MissingKey(k) if k == "tH"));
        assert!(s.fit(2, 2).is_err());
    }
}
