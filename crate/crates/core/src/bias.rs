//! Step distributions over the `2d` signed unit directions and the analytic
//! quantities attached to them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticePoint, MAX_DIM};
use crate::trace::TraceGraph;

const SUM_TOL: f64 = 1e-12;

/// A probability vector over `±e_j`, stored in canonical direction order.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasDistribution {
    dim: usize,
    weights: [f64; 2 * MAX_DIM],
}

/// Parses `"2/5"`, `"0.4"` or `"1"` into a float.
pub fn parse_weight(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::InvalidDistribution(format!("cannot parse weight {s:?}"));
    let v = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            num / den
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

impl BiasDistribution {
    /// `weights` in canonical order `p(+e_1), p(-e_1), p(+e_2), ...`.
    pub fn new(dim: usize, weights: &[f64]) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if weights.len() != 2 * dim {
            return Err(Error::InvalidDistribution(format!(
                "expected {} weights, got {}",
                2 * dim,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("weight {w} is not a probability")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}, not 1")));
        }
        let mut w = [0.0; 2 * MAX_DIM];
        w[..2 * dim].copy_from_slice(weights);
        Ok(BiasDistribution { dim, weights: w })
    }

    /// Weights given as rational or decimal strings.
    pub fn from_strs<S: AsRef<str>>(dim: usize, weights: &[S]) -> Result<Self> {
        let w = weights.iter().map(|s| parse_weight(s.as_ref())).collect::<Result<Vec<_>>>()?;
        Self::new(dim, &w)
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::new(dim, &vec![1.0 / (2 * dim) as f64; 2 * dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn weight(&self, e: Direction) -> f64 {
        self.weights[e.index()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights[..2 * self.dim]
    }

    /// Whether every direction has positive weight.
    pub fn all_positive(&self) -> bool {
        self.weights().iter().all(|&w| w > 0.0)
    }

    pub fn drift(&self) -> DriftVector {
        DriftVector(
            (0..self.dim)
                .map(|j| self.weight(Direction::positive(j)) - self.weight(Direction::negative(j)))
                .collect(),
        )
    }

    pub fn log_odds(&self) -> Result<LogOddsDirection> {
        if let Some(e) = Direction::all(self.dim).find(|&e| self.weight(e) <= 0.0) {
            return Err(Error::ZeroWeight { direction: e.to_string() });
        }
        let raw: Vec<f64> = (0..self.dim)
            .map(|j| (self.weight(Direction::positive(j)) / self.weight(Direction::negative(j))).ln())
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit = if norm > 0.0 {
            UnitDirection::Defined(raw.iter().map(|v| v / norm).collect())
        } else {
            UnitDirection::Undefined
        };
        Ok(LogOddsDirection { raw, unit, log_beta: norm })
    }

    pub fn conductance_params(&self) -> Result<ConductanceParams> {
        let lo = self.log_odds()?;
        Ok(ConductanceParams {
            log_c: (0..self.dim).map(|j| self.weight(Direction::negative(j)).ln()).collect(),
            log_odds: lo,
        })
    }

    /// Normalised weights of the directions set in `mask`, zero elsewhere.
    #[inline]
    pub fn kernel_from_mask(&self, mask: u16) -> [f64; 2 * MAX_DIM] {
        let mut out = [0.0; 2 * MAX_DIM];
        let mut total = 0.0;
        for k in 0..2 * self.dim {
            if mask & (1 << k) != 0 {
                out[k] = self.weights[k];
                total += self.weights[k];
            }
        }
        if total > 0.0 {
            for v in out.iter_mut() {
                *v /= total;
            }
        }
        out
    }

    /// `p(e) / Σ p(e')` over the edges at `x` present in `g`, one entry per
    /// present edge in canonical order.
    pub fn restricted_kernel(&self, g: &TraceGraph, x: &LatticePoint) -> Result<Vec<(Direction, f64)>> {
        let mask = g.mask(x).ok_or(Error::VertexAbsent(*x))?;
        let k = self.kernel_from_mask(mask);
        let present: Vec<(Direction, f64)> = Direction::all(self.dim)
            .filter(|d| mask & d.bit() != 0)
            .map(|d| (d, k[d.index()]))
            .collect();
        if present.iter().map(|(_, p)| p).sum::<f64>() <= 0.0 {
            return Err(Error::IsolatedVertex(*x));
        }
        Ok(present)
    }
}

impl fmt::Display for BiasDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, e) in Direction::all(self.dim).enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}: {}", self.weight(e))?;
        }
        write!(f, "]")
    }
}

/// `δ_j = p(e_j) − p(−e_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftVector(pub Vec<f64>);

impl DriftVector {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        dot(&self.0, v)
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// Unit log-odds direction; absent when the log-odds vector vanishes.
#[derive(Clone, Debug, PartialEq)]
pub enum UnitDirection {
    Defined(Vec<f64>),
    Undefined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogOddsDirection {
    /// `ℓ̂_j = log(p(e_j) / p(−e_j))`.
    pub raw: Vec<f64>,
    pub unit: UnitDirection,
    /// `‖ℓ̂‖ = log β`.
    pub log_beta: f64,
}

impl LogOddsDirection {
    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    pub fn unit(&self) -> Option<&[f64]> {
        match &self.unit {
            UnitDirection::Defined(u) => Some(u),
            UnitDirection::Undefined => None,
        }
    }

    pub fn require_unit(&self) -> Result<&[f64]> {
        self.unit()
            .ok_or_else(|| Error::Domain("log-odds direction is undefined (zero log-odds vector)".into()))
    }
}

/// Edge conductances `c(x,y) = ∏ c_j^{|y_j − x_j|} · β^{(x∨y)·ℓ}`, kept in log space.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductanceParams {
    /// `log c_j = log p(−e_j)`.
    pub log_c: Vec<f64>,
    pub log_odds: LogOddsDirection,
}

impl ConductanceParams {
    pub fn c(&self) -> Vec<f64> {
        self.log_c.iter().map(|v| v.exp()).collect()
    }

    pub fn beta(&self) -> f64 {
        self.log_odds.beta()
    }

    pub fn log_conductance(&self, x: &LatticePoint, y: &LatticePoint) -> Result<f64> {
        let e = x.direction_to(y).ok_or(Error::NotAdjacent(*x, *y))?;
        Ok(self.log_conductance_step(x, e))
    }

    pub fn conductance(&self, x: &LatticePoint, y: &LatticePoint) -> Result<f64> {
        self.log_conductance(x, y).map(f64::exp)
    }

    /// Log-conductance of the edge from `x` towards `e`.
    #[inline]
    pub fn log_conductance_step(&self, x: &LatticePoint, e: Direction) -> f64 {
        // (x ∨ (x+e))·ℓ̂ is x·ℓ̂ plus ℓ̂_j for a positive step only.
        let mut v = self.log_c[e.axis()] + x.dot(&self.log_odds.raw);
        if e.is_positive() {
            v += self.log_odds.raw[e.axis()];
        }
        v
    }

    /// `c(x,x+e) / Σ c(x,x+e')` over the edges at `x` present in `g`.
    pub fn conductance_kernel(&self, g: &TraceGraph, x: &LatticePoint) -> Result<Vec<(Direction, f64)>> {
        let mask = g.mask(x).ok_or(Error::VertexAbsent(*x))?;
        if mask == 0 {
            return Err(Error::IsolatedVertex(*x));
        }
        let dim = self.log_c.len();
        let logs: Vec<(Direction, f64)> = Direction::all(dim)
            .filter(|d| mask & d.bit() != 0)
            .map(|d| (d, self.log_conductance_step(x, d)))
            .collect();
        let m = logs.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|(_, v)| (v - m).exp()).sum();
        Ok(logs.into_iter().map(|(d, v)| (d, (v - m).exp() / total)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransienceVerdict {
    Transient,
    Recurrent,
    Undefined,
}

impl fmt::Display for TransienceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransienceVerdict::Transient => "transient",
            TransienceVerdict::Recurrent => "recurrent",
            TransienceVerdict::Undefined => "undefined",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition1Report {
    pub part_a: bool,
    pub part_b: bool,
    pub part_c: bool,
    /// `δ^{(0)}·ℓ^{(i)}`, when `ℓ^{(i)}` is defined.
    pub drift_dot_ell: Option<f64>,
    pub verdict: TransienceVerdict,
    pub diagnostics: Vec<String>,
}

impl Condition1Report {
    pub fn holds(&self) -> bool {
        self.part_a && self.part_b && self.part_c
    }
}

/// Evaluates the three parts of the standing condition for the pair
/// `(p0, pi)` and the resulting transience verdict for the walk driven by `pi`.
pub fn check_condition1(p0: &BiasDistribution, pi: &BiasDistribution) -> Condition1Report {
    let mut diagnostics = Vec::new();
    let d0 = p0.drift();
    let part_a = p0.dim() == pi.dim() && d0.components().iter().all(|&v| v >= 0.0) && d0.components()[0] > 0.0;
    if p0.dim() != pi.dim() {
        diagnostics.push(format!("dimension mismatch: {} vs {}", p0.dim(), pi.dim()));
    } else if !part_a {
        diagnostics.push(format!("(a) fails: base drift {:?} must be >= 0 with first component > 0", d0.0));
    }
    let part_b = p0.all_positive() && pi.all_positive();
    if !part_b {
        diagnostics.push("(b) fails: some step weight is zero".into());
    }
    let drift_dot_ell = if p0.dim() == pi.dim() {
        pi.log_odds().ok().and_then(|lo| lo.unit().map(|u| d0.dot(u)))
    } else {
        None
    };
    let part_c = matches!(drift_dot_ell, Some(v) if v > 0.0);
    match drift_dot_ell {
        None if pi.all_positive() => diagnostics.push("(c) fails: log-odds direction undefined (beta = 1)".into()),
        None => diagnostics.push("(c) fails: log-odds direction undefined".into()),
        Some(v) if v <= 0.0 => diagnostics.push(format!("(c) fails: base drift . ell = {v}")),
        _ => {}
    }
    let verdict = match (part_a && part_b, drift_dot_ell) {
        (true, Some(v)) if v > 0.0 => TransienceVerdict::Transient,
        (true, Some(_)) => TransienceVerdict::Recurrent,
        _ => TransienceVerdict::Undefined,
    };
    Condition1Report {
        part_a,
        part_b,
        part_c,
        drift_dot_ell,
        verdict,
        diagnostics,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::WalkPath;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn rational_weights() {
        let p = BiasDistribution::from_strs(2, &["2/5", "1/5", "1/5", "1/5"]).unwrap();
        assert_eq!(p.weight(Direction::positive(0)), 0.4);
        let d = p.drift();
        assert!(close(d.0[0], 0.2) && d.0[1] == 0.0);
        assert!(parse_weight("1/0").is_err());
        assert!(parse_weight("x").is_err());
    }

    #[test]
    fn validation() {
        assert!(BiasDistribution::new(2, &[0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(BiasDistribution::new(2, &[0.5, 0.5, -0.1, 0.1]).is_err());
        assert!(BiasDistribution::new(2, &[0.5, 0.5]).is_err());
        assert!(matches!(BiasDistribution::new(1, &[0.5, 0.5]), Err(Error::Dimension(1))));
        let p = BiasDistribution::new(2, &[0.5, 0.0, 0.25, 0.25]).unwrap();
        assert!(!p.all_positive());
        assert!(matches!(p.log_odds(), Err(Error::ZeroWeight { .. })));
    }

    #[test]
    fn example23_quantities() {
        let p = BiasDistribution::from_strs(2, &["15/25", "5/25", "1/25", "4/25"]).unwrap();
        let d = p.drift();
        assert!(close(d.0[0], 10.0 / 25.0) && close(d.0[1], -3.0 / 25.0));
        let lo = p.log_odds().unwrap();
        assert!(close(lo.raw[0], 3f64.ln()) && close(lo.raw[1], -(4f64.ln())));
    }

    #[test]
    fn symmetric_has_undefined_direction() {
        let p = BiasDistribution::uniform(3).unwrap();
        assert!(p.drift().is_zero());
        let lo = p.log_odds().unwrap();
        assert_eq!(lo.unit, UnitDirection::Undefined);
        assert_eq!(lo.beta(), 1.0);
    }

    #[test]
    fn conductance_at_origin() {
        let p = BiasDistribution::new(2, &[0.4, 0.1, 0.3, 0.2]).unwrap();
        let cp = p.conductance_params().unwrap();
        let o = LatticePoint::origin(2);
        let lo = &cp.log_odds;
        let u = lo.unit().unwrap();
        for j in 0..2 {
            let y = o.step(Direction::positive(j));
            let want = p.weight(Direction::negative(j)) * lo.beta().powf(u[j]);
            assert!(close(cp.conductance(&o, &y).unwrap(), want));
        }
        let far = LatticePoint::new(&[2, 2]).unwrap();
        assert!(matches!(cp.conductance(&o, &far), Err(Error::NotAdjacent(..))));
    }

    #[test]
    fn kernels_on_straight_path() {
        let p = BiasDistribution::new(2, &[0.4, 0.1, 0.3, 0.2]).unwrap();
        let path = WalkPath::from_moves(2, &[Direction::positive(0); 3]);
        let g = TraceGraph::from_path(&path).unwrap();
        let x = LatticePoint::new(&[1, 0]).unwrap();
        let k = p.restricted_kernel(&g, &x).unwrap();
        assert_eq!(k.len(), 2);
        assert!(close(k[0].1, 0.8) && close(k[1].1, 0.2));
        let kc = p.conductance_params().unwrap().conductance_kernel(&g, &x).unwrap();
        assert!(close(kc[0].1, 0.8) && close(kc[1].1, 0.2));
        let end = LatticePoint::new(&[3, 0]).unwrap();
        let k = p.restricted_kernel(&g, &end).unwrap();
        assert_eq!(k, vec![(Direction::negative(0), 1.0)]);
    }

    #[test]
    fn condition1_cases() {
        let p0 = BiasDistribution::from_strs(2, &["9/20", "1/20", "9/20", "1/20"]).unwrap();
        let first = BiasDistribution::from_strs(2, &["15/25", "5/25", "1/25", "4/25"]).unwrap();
        let r = check_condition1(&p0, &first);
        assert!(r.part_a && r.part_b && !r.part_c);
        assert_eq!(r.verdict, TransienceVerdict::Recurrent);
        assert!(first.drift().dot(p0.drift().components()) > 0.0);

        let sym = BiasDistribution::uniform(2).unwrap();
        let r = check_condition1(&p0, &sym);
        assert_eq!(r.verdict, TransienceVerdict::Undefined);
        assert!(!r.diagnostics.is_empty());

        let r = check_condition1(&p0, &p0);
        assert_eq!(r.verdict, TransienceVerdict::Transient);
    }
}
