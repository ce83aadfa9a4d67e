//! The moment function `φ`, its positive root, the ballisticity phase, and
//! the trap-drift, rate-function, backtracking and simplicity quantities.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bias::{check_condition1, dot, BiasDistribution, Condition1Report};
use crate::error::{Error, Result};
use crate::lattice::Direction;

/// Default bisection tolerance for [`solve_root`].
pub const ROOT_TOL: f64 = 1e-12;
/// Default relative width of the critical band in [`classify`].
pub const CRITICAL_TOL: f64 = 1e-9;

const ROOT_MAX_ITER: usize = 400;
const NEWTON_MAX_ITER: usize = 200;
const NEWTON_GRAD_TOL: f64 = 1e-10;

/// `φ(t) = Σ_e p0(e) exp(−t e·ℓ)`.
///
/// Summed as `1 + (φ − 1)` so that `φ(0) = 1` exactly despite rounding in the weights.
pub fn phi(p0: &BiasDistribution, ell: &[f64], t: f64) -> f64 {
    1.0 + phi_minus_one(p0, ell, t)
}

/// `φ(t) − 1`, accurate near `t = 0`.
pub fn phi_minus_one(p0: &BiasDistribution, ell: &[f64], t: f64) -> f64 {
    Direction::all(p0.dim()).map(|e| p0.weight(e) * (-t * e.dot(ell)).exp_m1()).sum()
}

/// The unique `t > 0` with `φ(t) = 1`, by bracket doubling from 1 and bisection.
pub fn solve_root(p0: &BiasDistribution, ell: &[f64], tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let drift = p0.drift().dot(ell);
    if !(drift > 0.0) {
        return Err(Error::NoPositiveRoot { drift });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    while phi_minus_one(p0, ell, hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations > 60 {
            return Err(Error::NonConvergence {
                what: "root bracketing",
                iterations,
            });
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi_minus_one(p0, ell, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
        if iterations > ROOT_MAX_ITER {
            return Err(Error::NonConvergence {
                what: "root bisection",
                iterations,
            });
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form root for the canonical family (weight `γ` on the first `k` axes).
pub fn example13_root(d: usize, k0: usize, ki: usize, gamma0: f64, gammai: f64) -> Result<f64> {
    if k0 < 1 || ki < 1 || k0 > d || ki > d {
        return Err(Error::Domain(format!("k0 = {k0}, ki = {ki} must lie in 1..={d}")));
    }
    if !(gamma0 > 1.0 && gammai > 1.0) {
        return Err(Error::Domain(format!("gamma0 = {gamma0}, gammai = {gammai} must exceed 1")));
    }
    let kmin = k0.min(ki) as f64;
    let ki = ki as f64;
    Ok(ki.sqrt() * (kmin * (gamma0 - 1.0) / ki).ln_1p())
}

/// `δ̂ = Σ_e p0(e) exp(−t e·ℓ) e`.
pub fn trap_drift(p0: &BiasDistribution, ell: &[f64], t: f64) -> Vec<f64> {
    let mut out = vec![0.0; p0.dim()];
    for e in Direction::all(p0.dim()) {
        out[e.axis()] += e.sign() as f64 * p0.weight(e) * (-t * e.dot(ell)).exp();
    }
    out
}

/// Whether `target` lies in the interior of the convex hull of the steps
/// carrying positive weight.
pub fn in_step_hull(p0: &BiasDistribution, target: &[f64]) -> bool {
    if target.len() != p0.dim() || target.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mut two_sided = false;
    for (j, &y) in target.iter().enumerate() {
        let plus = p0.weight(Direction::positive(j)) > 0.0;
        let minus = p0.weight(Direction::negative(j)) > 0.0;
        match (plus, minus) {
            (true, true) => two_sided = true,
            (true, false) if y > 0.0 => {}
            (false, true) if y < 0.0 => {}
            _ => return false,
        }
    }
    two_sided && target.iter().map(|y| y.abs()).sum::<f64>() < 1.0
}

struct Tilt {
    log_m: f64,
    mean: Vec<f64>,
    second: Vec<f64>,
}

fn tilt(p0: &BiasDistribution, x: &[f64]) -> Tilt {
    let dim = p0.dim();
    let logs: Vec<(Direction, f64)> = Direction::all(dim)
        .filter(|&e| p0.weight(e) > 0.0)
        .map(|e| (e, p0.weight(e).ln() + e.dot(x)))
        .collect();
    let m = logs.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|(_, v)| (v - m).exp()).sum();
    let mut mean = vec![0.0; dim];
    let mut second = vec![0.0; dim];
    for (e, v) in &logs {
        let q = (v - m).exp() / total;
        mean[e.axis()] += e.sign() as f64 * q;
        second[e.axis()] += q;
    }
    Tilt {
        log_m: m + total.ln(),
        mean,
        second,
    }
}

/// Legendre transform `Λ(y) = sup_x (x·y − log E[exp(x·X_1)])` by damped Newton ascent.
pub fn rate_function(p0: &BiasDistribution, target: &[f64]) -> Result<f64> {
    Ok(rate_function_argmax(p0, target)?.0)
}

/// `Λ(y)` together with the maximiser.
pub fn rate_function_argmax(p0: &BiasDistribution, target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if !in_step_hull(p0, target) {
        return Err(Error::TargetOutsideHull);
    }
    let dim = p0.dim();
    let mut x = vec![0.0; dim];
    for _ in 0..NEWTON_MAX_ITER {
        let tl = tilt(p0, &x);
        let g: Vec<f64> = target.iter().zip(&tl.mean).map(|(y, m)| y - m).collect();
        if dot(&g, &g).sqrt() <= NEWTON_GRAD_TOL {
            return Ok((dot(&x, target) - tl.log_m, x));
        }
        // Covariance is diag(second) − mean meanᵀ; invert by Sherman–Morrison.
        let dinv_g: Vec<f64> = g.iter().zip(&tl.second).map(|(a, s)| a / s).collect();
        let dinv_m: Vec<f64> = tl.mean.iter().zip(&tl.second).map(|(a, s)| a / s).collect();
        let denom = 1.0 - dot(&tl.mean, &dinv_m);
        let coef = dot(&tl.mean, &dinv_g) / denom;
        let step: Vec<f64> = dinv_g.iter().zip(&dinv_m).map(|(a, b)| a + coef * b).collect();
        let slope = dot(&g, &step);
        let f0 = dot(&x, target) - tl.log_m;
        let gnorm = dot(&g, &g);
        let mut tau = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + tau * b).collect();
            let tt = tilt(p0, &trial);
            // Near the optimum the Armijo gain drops below rounding in the
            // objective; a smaller gradient is then the usable signal.
            let gt: f64 = target.iter().zip(&tt.mean).map(|(y, m)| (y - m) * (y - m)).sum();
            if dot(&trial, target) - tt.log_m >= f0 + 1e-4 * tau * slope || gt < gnorm || tau < 1e-12 {
                x = trial;
                break;
            }
            tau *= 0.5;
        }
    }
    Err(Error::NonConvergence {
        what: "rate function maximisation",
        iterations: NEWTON_MAX_ITER,
    })
}

/// `e^{−t h}`, an upper bound on the probability that the base walk ever
/// backtracks `h` units against `ℓ`.
pub fn backtrack_bound(p0: &BiasDistribution, ell: &[f64], h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("depth {h} must be >= 0")));
    }
    let t = solve_root(p0, ell, ROOT_TOL)?;
    Ok((-t * h).exp())
}

/// `(c(0,e_1)/c(0,e)) · min{1, (β^{c δ0·ℓ} − 1) β^c}` for the walk driven by `pi`.
pub fn simplicity_summand(pi: &BiasDistribution, p0: &BiasDistribution, e: Direction, c: f64) -> Result<f64> {
    if e == Direction::positive(0) {
        return Err(Error::Domain("direction must differ from +e1".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c = {c} must be positive")));
    }
    if e.axis() >= pi.dim() || pi.dim() != p0.dim() {
        return Err(Error::Dimension(pi.dim()));
    }
    let cp = pi.conductance_params()?;
    let ell = cp.log_odds.require_unit()?;
    let o = crate::lattice::LatticePoint::origin(pi.dim());
    let ratio = (cp.log_conductance_step(&o, Direction::positive(0)) - cp.log_conductance_step(&o, e)).exp();
    let log_beta = cp.log_odds.log_beta;
    let a = c * p0.drift().dot(ell) * log_beta;
    let factor = a.exp_m1() * (c * log_beta).exp();
    Ok(ratio * factor.min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesHint {
    /// Tail terms shrink geometrically over the supplied prefix.
    LikelySummable,
    /// Tail terms do not shrink.
    LikelyDivergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub c: f64,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Largest ratio of consecutive terms over the second half of the prefix.
    pub tail_ratio: Option<f64>,
    pub hint: SeriesHint,
}

impl SeriesReport {
    pub fn sum(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Partial sums of [`simplicity_summand`] over the first `n_terms` entries of `pseq`,
/// with a ratio-test heuristic on the tail.
pub fn simplicity_series(pseq: &[BiasDistribution], p0: &BiasDistribution, e: Direction, c: f64, n_terms: usize) -> Result<SeriesReport> {
    if pseq.len() < n_terms {
        return Err(Error::Domain(format!("sequence has {} entries, {n_terms} requested", pseq.len())));
    }
    let terms = pseq[..n_terms]
        .iter()
        .map(|pi| simplicity_summand(pi, p0, e, c))
        .collect::<Result<Vec<_>>>()?;
    let partial_sums = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let (tail_ratio, hint) = ratio_hint(&terms);
    Ok(SeriesReport {
        c,
        terms,
        partial_sums,
        tail_ratio,
        hint,
    })
}

fn ratio_hint(terms: &[f64]) -> (Option<f64>, SeriesHint) {
    if terms.len() < 4 {
        return (None, SeriesHint::Inconclusive);
    }
    let tail = &terms[terms.len() / 2..];
    if tail.iter().all(|&t| t == 0.0) {
        return (Some(0.0), SeriesHint::LikelySummable);
    }
    if tail.iter().any(|&t| t <= 0.0) {
        return (None, SeriesHint::Inconclusive);
    }
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hint = if max <= 0.95 {
        SeriesHint::LikelySummable
    } else if min >= 1.0 - 1e-9 {
        SeriesHint::LikelyDivergent
    } else {
        SeriesHint::Inconclusive
    };
    (Some(max), hint)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Ballistic,
    SubBallistic,
    Critical,
    Undefined,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Ballistic => "ballistic",
            Phase::SubBallistic => "sub-ballistic",
            Phase::Critical => "critical",
            Phase::Undefined => "undefined",
        })
    }
}

/// Everything the phase criterion says about one `(p0, pi)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub dim: usize,
    pub drift0: Vec<f64>,
    pub drift: Vec<f64>,
    pub log_odds: Option<Vec<f64>>,
    pub ell: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub t: Option<f64>,
    pub alpha: Option<f64>,
    pub phase: Phase,
    pub critical_tol: f64,
    pub condition1: Condition1Report,
    pub trap_drift: Option<Vec<f64>>,
    /// `−t ℓ·δ̂`.
    pub lambda_value: Option<f64>,
    /// `Λ(δ̂)` by numerical maximisation.
    pub lambda_numeric: Option<f64>,
}

impl PhaseReport {
    /// Flat `key=value` pairs; vectors are joined with `;`.
    pub fn to_records(&self) -> Vec<(String, String)> {
        fn vec(v: &[f64]) -> String {
            v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
        }
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_else(|| "NA".into())
        }
        fn optv(v: &Option<Vec<f64>>) -> String {
            v.as_deref().map(vec).unwrap_or_else(|| "NA".into())
        }
        let c = &self.condition1;
        vec![
            ("dim".into(), self.dim.to_string()),
            ("drift0".into(), vec(&self.drift0)),
            ("drift".into(), vec(&self.drift)),
            ("log_odds".into(), optv(&self.log_odds)),
            ("ell".into(), optv(&self.ell)),
            ("beta".into(), opt(self.beta)),
            ("t".into(), opt(self.t)),
            ("alpha".into(), opt(self.alpha)),
            ("phase".into(), self.phase.to_string()),
            ("critical_tol".into(), format!("{}", self.critical_tol)),
            ("cond1_a".into(), c.part_a.to_string()),
            ("cond1_b".into(), c.part_b.to_string()),
            ("cond1_c".into(), c.part_c.to_string()),
            ("transience".into(), c.verdict.to_string()),
            ("trap_drift".into(), optv(&self.trap_drift)),
            ("lambda".into(), opt(self.lambda_value)),
            ("lambda_numeric".into(), opt(self.lambda_numeric)),
            ("diagnostics".into(), c.diagnostics.join(" | ")),
        ]
    }
}

impl fmt::Display for PhaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_records() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Phase of the walk driven by `pi` on the trace of the `p0` walk.
/// `tol` is the relative half-width of the critical band around `β = α`.
pub fn classify(p0: &BiasDistribution, pi: &BiasDistribution, tol: f64) -> Result<PhaseReport> {
    if p0.dim() != pi.dim() {
        return Err(Error::Dimension(pi.dim()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be >= 0")));
    }
    let condition1 = check_condition1(p0, pi);
    let lo = pi.log_odds().ok();
    let mut report = PhaseReport {
        dim: p0.dim(),
        drift0: p0.drift().0,
        drift: pi.drift().0,
        log_odds: lo.as_ref().map(|l| l.raw.clone()),
        ell: lo.as_ref().and_then(|l| l.unit().map(<[f64]>::to_vec)),
        beta: lo.as_ref().map(|l| l.beta()),
        t: None,
        alpha: None,
        phase: Phase::Undefined,
        critical_tol: tol,
        condition1,
        trap_drift: None,
        lambda_value: None,
        lambda_numeric: None,
    };
    if !report.condition1.holds() {
        return Ok(report);
    }
    let ell = report.ell.clone().expect("condition (c) implies a direction");
    let beta = report.beta.expect("log-odds defined");
    let t = solve_root(p0, &ell, ROOT_TOL)?;
    let alpha = t.exp();
    let hat = trap_drift(p0, &ell, t);
    report.phase = if (beta - alpha).abs() <= tol * alpha {
        Phase::Critical
    } else if beta < alpha {
        Phase::Ballistic
    } else {
        Phase::SubBallistic
    };
    report.lambda_value = Some(-t * dot(&ell, &hat));
    report.lambda_numeric = rate_function(p0, &hat).ok();
    report.t = Some(t);
    report.alpha = Some(alpha);
    report.trap_drift = Some(hat);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::*;

    const E1: [f64; 2] = [1.0, 0.0];

    #[test]
    fn phi_basics() {
        let p0 = figure2_base();
        assert_eq!(phi(&p0, &E1, 0.0), 1.0);
        let t: f64 = 0.7;
        let want = 0.4 * (-t).exp() + 0.2 * t.exp() + 0.4;
        assert!((phi(&p0, &E1, t) - want).abs() < 1e-15);
    }

    #[test]
    fn figure2_root_is_log2() {
        let t = solve_root(&figure2_base(), &E1, ROOT_TOL).unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-11);
        let b = backtrack_bound(&figure2_base(), &E1, 5.0).unwrap();
        assert!((b - 0.03125).abs() < 1e-12);
        assert_eq!(backtrack_bound(&figure2_base(), &E1, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn no_root_without_drift() {
        let p0 = figure2_base();
        assert!(matches!(solve_root(&p0, &[0.0, 1.0], ROOT_TOL), Err(Error::NoPositiveRoot { .. })));
        assert!(matches!(solve_root(&p0, &[-1.0, 0.0], ROOT_TOL), Err(Error::NoPositiveRoot { .. })));
    }

    #[test]
    fn closed_form_root() {
        assert!((example13_root(2, 1, 1, 2.0, 3.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        // k_i = k_0 gives log β_0.
        let t = example13_root(3, 2, 2, 1.5, 2.0).unwrap();
        assert!((t - 2f64.sqrt() * 1.5f64.ln()).abs() < 1e-14);
        assert!(example13_root(2, 0, 1, 2.0, 2.0).is_err());
        assert!(example13_root(2, 1, 1, 1.0, 2.0).is_err());
        assert!(example13_root(2, 1, 1, 1.0 + 1e-12, 2.0).unwrap() < 1e-11);
    }

    #[test]
    fn trap_drift_figure2() {
        let p0 = figure2_base();
        let hat = trap_drift(&p0, &E1, 2f64.ln());
        // Independent summation over the four steps.
        let want = 0.4 * 0.5 - 0.2 * 2.0;
        assert!((hat[0] - want).abs() < 1e-15);
        assert!(hat[1].abs() < 1e-15);
        assert_eq!(trap_drift(&p0, &E1, 0.0), p0.drift().0);
    }

    #[test]
    fn rate_function_values() {
        let p0 = figure2_base();
        assert!(rate_function(&p0, &p0.drift().0).unwrap().abs() < 1e-14);
        let t = 2f64.ln();
        let hat = trap_drift(&p0, &E1, t);
        let (lam, x) = rate_function_argmax(&p0, &hat).unwrap();
        assert!((lam - (-t * hat[0])).abs() < 1e-10);
        assert!((x[0] + t).abs() < 1e-8 && x[1].abs() < 1e-8);
        assert!(matches!(rate_function(&p0, &[0.7, 0.4]), Err(Error::TargetOutsideHull)));
    }

    #[test]
    fn hull_membership() {
        let p = BiasDistribution::new(2, &[0.5, 0.0, 0.25, 0.25]).unwrap();
        assert!(in_step_hull(&p, &[0.2, 0.1]));
        assert!(!in_step_hull(&p, &[-0.2, 0.1]));
        assert!(!in_step_hull(&p, &[0.0, 0.1]));
        let q = BiasDistribution::new(2, &[0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!(!in_step_hull(&q, &[0.3, 0.3]));
    }

    #[test]
    fn figure2_phases() {
        let p0 = figure2_base();
        let r = classify(&p0, &figure2_child(1.5).unwrap(), CRITICAL_TOL).unwrap();
        assert_eq!(r.phase, Phase::Ballistic);
        let r = classify(&p0, &figure2_child(2.4).unwrap(), CRITICAL_TOL).unwrap();
        assert_eq!(r.phase, Phase::SubBallistic);
        let r = classify(&p0, &figure2_child(2.0).unwrap(), CRITICAL_TOL).unwrap();
        assert_eq!(r.phase, Phase::Critical);
        let r = classify(&p0, &figure2_child(1.0).unwrap(), CRITICAL_TOL).unwrap();
        assert_eq!(r.phase, Phase::Undefined);
        assert!(r.to_string().contains("phase=undefined"));
    }

    #[test]
    fn summand_examples() {
        let p0 = half_e1_base();
        let e2 = Direction::positive(1);
        let eps: f64 = 0.01;
        let c = 1.0;
        let b = (1.0 + 4.0 * eps) / (1.0 - 4.0 * eps);
        let want = 4.0 * (0.25 + eps) * (b.powf(c / 2.0) - 1.0) * b.powf(c);
        let got = simplicity_summand(&vanishing_bias(eps).unwrap(), &p0, e2, c).unwrap();
        assert!((got - want).abs() < 1e-14);
        let tiny = 1e-6;
        let got = simplicity_summand(&vanishing_bias(tiny).unwrap(), &p0, e2, 2.0).unwrap();
        assert!((got / (4.0 * 2.0 * tiny) - 1.0).abs() < 1e-4);
        for eps in [0.5, 0.1, 0.01] {
            let s = simplicity_summand(&trap_drift_bias(eps).unwrap(), &p0, e2, 1.0).unwrap();
            assert!(s <= eps / (2.0 * (1.0 - eps)) + 1e-15);
        }
        assert!(simplicity_summand(&vanishing_bias(eps).unwrap(), &p0, Direction::positive(0), 1.0).is_err());
    }

    #[test]
    fn series_hints() {
        let p0 = half_e1_base();
        let e2 = Direction::positive(1);
        let constant = vec![vanishing_bias(0.1).unwrap(); 12];
        let r = simplicity_series(&constant, &p0, e2, 1.0, 12).unwrap();
        assert_eq!(r.hint, SeriesHint::LikelyDivergent);
        let r = simplicity_series(&vanishing_bias_sequence(30), &p0, e2, 1.0, 30).unwrap();
        assert_eq!(r.hint, SeriesHint::LikelySummable);
        let r = simplicity_series(&constant, &p0, e2, 1.0, 0).unwrap();
        assert_eq!(r.sum(), 0.0);
    }
}
