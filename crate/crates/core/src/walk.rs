//! Walk simulation on the full lattice and on traces, and the demand-driven
//! nested simulator.
//!
//! Level 0 walks on Z^d. Level `i ≥ 1` walks on the trace of level `i − 1`,
//! and may only read the neighbourhood of a vertex `x` once the parent has
//! certified a regeneration level above `x·e_1`. When a child needs more,
//! the parent (and recursively its ancestors) is advanced until its settled
//! level moves past the child's position.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bias::BiasDistribution;
use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticePoint, MAX_DIM};
use crate::phase::{solve_root, ROOT_TOL};
use crate::regeneration::{Certification, OnlineRegenerations, RegenerationRecord};
use crate::rng::{stream, walk_stream, StreamRng, PURPOSE_CHECK};
use crate::stats::{chi_square, wilson, z_for};
use crate::trace::{TraceGraph, WalkPath};

/// Something a walk can move on: reports the incident-edge mask of a vertex.
pub trait Environment {
    fn dim(&self) -> usize;
    fn mask_at(&self, x: &LatticePoint) -> Result<u16>;
}

/// The whole lattice Z^d.
#[derive(Clone, Copy, Debug)]
pub struct FullLattice(pub usize);

impl Environment for FullLattice {
    fn dim(&self) -> usize {
        self.0
    }

    fn mask_at(&self, _x: &LatticePoint) -> Result<u16> {
        Ok(((1u32 << (2 * self.0)) - 1) as u16)
    }
}

impl Environment for TraceGraph {
    fn dim(&self) -> usize {
        TraceGraph::dim(self)
    }

    fn mask_at(&self, x: &LatticePoint) -> Result<u16> {
        let mask = self.mask(x).ok_or(Error::VertexAbsent(*x))?;
        if !self.is_settled(x) {
            return Err(Error::UnsettledNeighborhood {
                point: *x,
                settled_level: self.settled_level(),
            });
        }
        Ok(mask)
    }
}

/// Samples a direction among those in `mask` with probability proportional
/// to `p`, using the single uniform `u ∈ [0, 1)`.
#[inline]
pub fn sample_direction(p: &BiasDistribution, mask: u16, u: f64) -> Option<Direction> {
    let w = p.weights();
    let mut total = 0.0;
    for (k, &wk) in w.iter().enumerate() {
        if mask & (1 << k) != 0 {
            total += wk;
        }
    }
    if total <= 0.0 {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (k, &wk) in w.iter().enumerate() {
        if mask & (1 << k) != 0 && wk > 0.0 {
            acc += wk;
            last = Some(Direction::from_index(k));
            if target < acc {
                return last;
            }
        }
    }
    last
}

/// One step of the `p`-walk from `x`. Consumes exactly one uniform draw.
pub fn step<E: Environment, R: Rng>(p: &BiasDistribution, env: &E, x: &LatticePoint, rng: &mut R) -> Result<LatticePoint> {
    let mask = env.mask_at(x)?;
    let u: f64 = rng.random();
    sample_direction(p, mask, u).map(|d| x.step(d)).ok_or(Error::IsolatedVertex(*x))
}

/// Cumulative weights for fast sampling on the full lattice.
struct FullSampler {
    cum: [f64; 2 * MAX_DIM],
    n: usize,
}

impl FullSampler {
    fn new(p: &BiasDistribution) -> Self {
        let mut cum = [0.0; 2 * MAX_DIM];
        let mut acc = 0.0;
        for (k, w) in p.weights().iter().enumerate() {
            acc += w;
            cum[k] = acc;
        }
        FullSampler { cum, n: p.weights().len() }
    }

    #[inline]
    fn sample(&self, u: f64) -> Direction {
        let target = u * self.cum[self.n - 1];
        let k = self.cum[..self.n].iter().position(|&c| target < c).unwrap_or(self.n - 1);
        Direction::from_index(k)
    }
}

/// An `n_steps`-step `p0`-walk on Z^d from the origin.
pub fn simulate_level0<R: Rng>(p0: &BiasDistribution, n_steps: usize, rng: &mut R) -> WalkPath {
    let sampler = FullSampler::new(p0);
    let mut path = WalkPath::new(p0.dim(), 0, 0);
    for _ in 0..n_steps {
        path.push(sampler.sample(rng.random()));
    }
    path
}

/// An `n_steps`-step `p`-walk on a settled graph from the origin.
pub fn simulate_on<E: Environment, R: Rng>(p: &BiasDistribution, env: &E, n_steps: usize, rng: &mut R) -> Result<WalkPath> {
    let mut path = WalkPath::new(p.dim(), 0, 0);
    let mut x = LatticePoint::origin(p.dim());
    for _ in 0..n_steps {
        let y = step(p, env, &x, rng)?;
        path.push(x.direction_to(&y).expect("unit step"));
        x = y;
    }
    Ok(path)
}

#[derive(Clone, Debug, Serialize)]
pub struct VelocityEstimate {
    pub velocity: Vec<f64>,
    pub speed: f64,
    /// Angle to the reference direction, in degrees.
    pub angle_deg: Option<f64>,
    pub from: usize,
    pub to: usize,
}

/// `(X_n − X_m)/(n − m)` with `m = ⌊burn_in · n⌋`.
pub fn velocity_estimate(path: &WalkPath, burn_in: f64, reference: Option<&[f64]>) -> Result<VelocityEstimate> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(Error::Domain(format!("burn-in fraction {burn_in} outside [0, 1)")));
    }
    let n = path.len();
    let m = (burn_in * n as f64).floor() as usize;
    if n == 0 || m >= n {
        return Err(Error::PathTooShort { len: n });
    }
    let mut disp = vec![0i64; path.dim()];
    for &d in &path.moves()[m..] {
        disp[d.axis()] += d.sign();
    }
    let velocity: Vec<f64> = disp.iter().map(|&v| v as f64 / (n - m) as f64).collect();
    let speed = velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
    let angle_deg = reference.and_then(|r| {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if speed == 0.0 || rn == 0.0 {
            return None;
        }
        let cos = crate::bias::dot(&velocity, r) / (speed * rn);
        Some(cos.clamp(-1.0, 1.0).acos().to_degrees())
    });
    Ok(VelocityEstimate {
        velocity,
        speed,
        angle_deg,
        from: m,
        to: n,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BacktrackCensus {
    pub replicas: u64,
    pub horizon: usize,
    pub t: f64,
    /// Entry `h` is for depth `h = 0..=max_h`.
    pub counts: Vec<u64>,
    pub estimates: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub bounds: Vec<f64>,
    /// Upper bound on the probability mass missed by stopping at the horizon;
    /// add it to `ci_high` for an upper bound on the untruncated tail.
    pub tail_adjustment: Vec<f64>,
    pub confidence: f64,
}

impl BacktrackCensus {
    /// Depths where the estimate exceeds the bound by more than the interval slack.
    /// Stopping at the horizon only lowers the estimate, so the tail
    /// adjustment does not enter.
    pub fn violations(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&h| self.ci_low[h] > self.bounds[h]).collect()
    }
}

/// Empirical tail of `−min_n X_n·ℓ` for the base walk, over `replicas`
/// independent walks of `horizon` steps, with Wilson intervals at `confidence`.
pub fn backtrack_census(
    p0: &BiasDistribution,
    ell: &[f64],
    replicas: u64,
    horizon: usize,
    max_h: usize,
    seed: u64,
    confidence: f64,
) -> Result<BacktrackCensus> {
    let t = solve_root(p0, ell, ROOT_TOL)?;
    let sampler = FullSampler::new(p0);
    let dirs: Vec<f64> = Direction::all(p0.dim()).map(|e| e.dot(ell)).collect();
    let per_replica: Vec<(f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, PURPOSE_CHECK, r, 0);
            let mut s = 0.0f64;
            let mut min = 0.0f64;
            for _ in 0..horizon {
                s += dirs[sampler.sample(rng.random()).index()];
                min = min.min(s);
            }
            (-min, s)
        })
        .collect();
    let z = z_for(confidence);
    let mut census = BacktrackCensus {
        replicas,
        horizon,
        t,
        counts: Vec::new(),
        estimates: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        bounds: Vec::new(),
        tail_adjustment: Vec::new(),
        confidence,
    };
    for h in 0..=max_h {
        let hf = h as f64;
        let k = per_replica.iter().filter(|(depth, _)| *depth >= hf - 1e-9).count() as u64;
        // A replica short of depth h at the horizon needs a further drop of
        // at least end + h, which has probability at most exp(-t (end + h)).
        let adj: f64 = per_replica
            .iter()
            .filter(|(depth, _)| *depth < hf - 1e-9)
            .map(|(_, end)| (-t * (end + hf).max(0.0)).exp())
            .sum::<f64>()
            / replicas.max(1) as f64;
        let (lo, hi) = wilson(k, replicas, z);
        census.counts.push(k);
        census.estimates.push(k as f64 / replicas.max(1) as f64);
        census.ci_low.push(lo);
        census.ci_high.push(hi);
        census.bounds.push((-t * hf).exp());
        census.tail_adjustment.push(adj);
    }
    Ok(census)
}

/// How the nested simulator treats a child that reaches unsettled structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NestedMode {
    /// Extend ancestors on demand.
    Lazy,
    /// Run each level to completion first; a child stops at its parent's frontier.
    FixedHorizon,
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub biases: Vec<BiasDistribution>,
    /// Step budget per level. The deepest level runs its budget in full; the
    /// others are caps on demand-driven extension.
    pub budgets: Vec<u64>,
    pub h_la: f64,
    pub eps_trunc: f64,
    /// Bound on the summed certification error of a run.
    pub eps_total: f64,
    pub seed: u64,
    pub replica: u64,
    pub mode: NestedMode,
    pub audit_kernel: bool,
}

impl SimulationConfig {
    /// Default lookahead `40 / t0`, truncation tolerance `1e-12`, total `1e-6`.
    pub fn new(biases: Vec<BiasDistribution>, budgets: Vec<u64>, seed: u64) -> Result<Self> {
        let p0 = biases.first().ok_or_else(|| Error::Config("empty bias sequence".into()))?;
        let t0 = base_root(p0)?;
        Ok(SimulationConfig {
            biases,
            budgets,
            h_la: 40.0 / t0,
            eps_trunc: 1e-12,
            eps_total: 1e-6,
            seed,
            replica: 0,
            mode: NestedMode::Lazy,
            audit_kernel: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.biases[0].dim()
    }

    /// Checks shapes and `exp(−t0·h_la) ≤ ε_trunc`; returns `t0`.
    pub fn validate(&self) -> Result<f64> {
        if self.biases.is_empty() {
            return Err(Error::Config("empty bias sequence".into()));
        }
        if self.biases.len() != self.budgets.len() {
            return Err(Error::Config(format!(
                "{} biases but {} budgets",
                self.biases.len(),
                self.budgets.len()
            )));
        }
        if self.biases.len() > 256 {
            return Err(Error::Config("at most 256 levels".into()));
        }
        let dim = self.dim();
        if let Some(p) = self.biases.iter().find(|p| p.dim() != dim) {
            return Err(Error::Config(format!("dimension mismatch: {} vs {dim}", p.dim())));
        }
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 1.0) {
            return Err(Error::Config(format!("eps_trunc = {} outside (0, 1)", self.eps_trunc)));
        }
        if !(self.h_la > 0.0 && self.h_la.is_finite()) {
            return Err(Error::Config(format!("h_la = {} must be positive", self.h_la)));
        }
        let t0 = base_root(&self.biases[0])?;
        let per_event = (-t0 * self.h_la).exp();
        if per_event > self.eps_trunc {
            return Err(Error::Config(format!(
                "lookahead {} gives per-event error {per_event:e} > eps_trunc {:e}",
                self.h_la, self.eps_trunc
            )));
        }
        Ok(t0)
    }
}

/// Root of `φ` for the base walk in direction `e_1`.
pub fn base_root(p0: &BiasDistribution) -> Result<f64> {
    let mut e1 = vec![0.0; p0.dim()];
    e1[0] = 1.0;
    solve_root(p0, &e1, ROOT_TOL).map_err(|e| match e {
        Error::NoPositiveRoot { drift } => Error::Config(format!("base walk needs positive drift along e1 (got {drift})")),
        other => other,
    })
}

/// Step counts per local edge configuration, for goodness-of-fit auditing.
#[derive(Clone, Debug, Default)]
pub struct KernelAudit {
    counts: HashMap<u16, Vec<u64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelAuditRow {
    pub mask: u16,
    pub visits: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub flagged: bool,
}

impl KernelAudit {
    #[inline]
    pub fn record(&mut self, mask: u16, dir: Direction, dim: usize) {
        self.counts.entry(mask).or_insert_with(|| vec![0; 2 * dim])[dir.index()] += 1;
    }

    /// Chi-square test at every configuration with at least `min_visits` visits.
    pub fn report(&self, p: &BiasDistribution, min_visits: u64, threshold: f64) -> Vec<KernelAuditRow> {
        let mut rows: Vec<KernelAuditRow> = self
            .counts
            .iter()
            .filter_map(|(&mask, obs)| {
                let visits: u64 = obs.iter().sum();
                if visits < min_visits {
                    return None;
                }
                let k = p.kernel_from_mask(mask);
                let (statistic, p_value) = chi_square(obs, &k[..obs.len()]);
                Some(KernelAuditRow {
                    mask,
                    visits,
                    statistic,
                    p_value,
                    flagged: p_value < threshold,
                })
            })
            .collect();
        rows.sort_by_key(|r| r.mask);
        rows
    }
}

struct Level {
    p: BiasDistribution,
    path: WalkPath,
    graph: TraceGraph,
    pos: LatticePoint,
    budget: u64,
    rng: StreamRng,
    tracker: OnlineRegenerations,
    certified: Vec<Certification>,
    audit: Option<KernelAudit>,
    stopped_at_frontier: bool,
}

/// Output of one nested simulation.
#[derive(Clone, Debug)]
pub struct LevelRun {
    pub path: WalkPath,
    pub graph: TraceGraph,
    /// Online-certified regenerations in direction `e_1`.
    pub regenerations: RegenerationRecord,
    pub stopped_at_frontier: bool,
    pub kernel_audit: Option<KernelAudit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertificationEvent {
    pub level: usize,
    pub at_step: u64,
    pub settled_level: i64,
}

#[derive(Clone, Debug)]
pub struct NestedRun {
    pub levels: Vec<LevelRun>,
    pub t0: f64,
    pub h_la: f64,
    pub per_event_bound: f64,
    pub certifications: Vec<CertificationEvent>,
    pub total_error_budget: f64,
    pub eps_total: f64,
    /// Reads of unsettled parent structure; always zero in an accepted run.
    pub unsettled_consultations: u64,
    pub exhausted: Option<(usize, u64)>,
}

impl NestedRun {
    /// `Err(BudgetExhausted)` if a level ran out of budget mid-extension.
    pub fn check_complete(&self) -> Result<()> {
        match self.exhausted {
            Some((level, steps)) => Err(Error::BudgetExhausted { level, steps }),
            None => Ok(()),
        }
    }

    /// Whether every child trace is a subgraph of its parent's trace.
    pub fn nesting_holds(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].graph.is_subgraph_of(&w[0].graph))
    }

    pub fn deepest(&self) -> &LevelRun {
        self.levels.last().expect("at least one level")
    }
}

/// The nested simulator state.
pub struct NestedSim {
    levels: Vec<Level>,
    mode: NestedMode,
    t0: f64,
    h_la: f64,
    per_event_bound: f64,
    eps_total: f64,
    events: Vec<CertificationEvent>,
    unsettled_consultations: u64,
}

impl NestedSim {
    pub fn new(cfg: &SimulationConfig) -> Result<Self> {
        let t0 = cfg.validate()?;
        let dim = cfg.dim();
        let levels = cfg
            .biases
            .iter()
            .zip(&cfg.budgets)
            .enumerate()
            .map(|(i, (p, &budget))| Level {
                p: p.clone(),
                path: WalkPath::new(dim, cfg.seed, i),
                graph: TraceGraph::new(dim),
                pos: LatticePoint::origin(dim),
                budget,
                rng: walk_stream(cfg.seed, cfg.replica, i),
                tracker: OnlineRegenerations::new(cfg.h_la),
                certified: Vec::new(),
                audit: (cfg.audit_kernel && i > 0).then(KernelAudit::default),
                stopped_at_frontier: false,
            })
            .collect();
        Ok(NestedSim {
            levels,
            mode: cfg.mode,
            t0,
            h_la: cfg.h_la,
            per_event_bound: (-t0 * cfg.h_la).exp(),
            eps_total: cfg.eps_total,
            events: Vec::new(),
            unsettled_consultations: 0,
        })
    }

    /// Runs to completion and returns the per-level results.
    pub fn run(mut self) -> Result<NestedRun> {
        let exhausted = match self.mode {
            NestedMode::Lazy => self.run_lazy()?,
            NestedMode::FixedHorizon => {
                self.run_fixed()?;
                None
            }
        };
        Ok(self.finish(exhausted))
    }

    fn run_lazy(&mut self) -> Result<Option<(usize, u64)>> {
        let top = self.levels.len() - 1;
        while (self.levels[top].path.len() as u64) < self.levels[top].budget {
            match self.step_level(top, true) {
                Ok(()) => {}
                Err(Error::BudgetExhausted { level, steps }) => return Ok(Some((level, steps))),
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }

    fn run_fixed(&mut self) -> Result<()> {
        for k in 0..self.levels.len() {
            while (self.levels[k].path.len() as u64) < self.levels[k].budget {
                match self.step_level(k, false) {
                    Ok(()) => {}
                    Err(Error::UnsettledNeighborhood { .. }) => {
                        self.levels[k].stopped_at_frontier = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(())
    }

    /// Advances level `k` until its settled level exceeds `level`.
    fn settle_beyond(&mut self, k: usize, level: i64) -> Result<()> {
        while level as f64 >= self.levels[k].graph.settled_level() {
            if self.levels[k].path.len() as u64 >= self.levels[k].budget {
                return Err(Error::BudgetExhausted {
                    level: k,
                    steps: self.levels[k].path.len() as u64,
                });
            }
            self.step_level(k, true)?;
        }
        Ok(())
    }

    fn step_level(&mut self, k: usize, extend: bool) -> Result<()> {
        let x = self.levels[k].pos;
        let mask = if k == 0 {
            FullLattice(x.dim()).mask_at(&x)?
        } else {
            if extend {
                self.settle_beyond(k - 1, x.level())?;
            }
            let parent = &self.levels[k - 1].graph;
            if !parent.is_settled(&x) {
                return Err(Error::UnsettledNeighborhood {
                    point: x,
                    settled_level: parent.settled_level(),
                });
            }
            match parent.mask_at(&x) {
                Ok(m) => m,
                Err(e @ Error::UnsettledNeighborhood { .. }) => {
                    self.unsettled_consultations += 1;
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
        };
        let lvl = &mut self.levels[k];
        let u: f64 = lvl.rng.random();
        let dir = sample_direction(&lvl.p, mask, u).ok_or(Error::IsolatedVertex(x))?;
        if let Some(a) = lvl.audit.as_mut() {
            a.record(mask, dir, x.dim());
        }
        let y = x.step(dir);
        lvl.path.push(dir);
        lvl.graph.push_step(dir);
        lvl.pos = y;
        let time = lvl.path.len() as u64;
        let before = lvl.certified.len();
        if let Some(newest) = lvl.tracker.observe(time, y.level(), &mut lvl.certified) {
            lvl.graph.certify_settled(newest as f64);
            for c in &lvl.certified[before..] {
                self.events.push(CertificationEvent {
                    level: k,
                    at_step: time,
                    settled_level: c.level,
                });
            }
        }
        Ok(())
    }

    fn finish(self, exhausted: Option<(usize, u64)>) -> NestedRun {
        let per_event_bound = self.per_event_bound;
        let h_la = self.h_la;
        let levels = self
            .levels
            .into_iter()
            .map(|l| {
                let mut e1 = vec![0.0; l.path.dim()];
                e1[0] = 1.0;
                LevelRun {
                    regenerations: RegenerationRecord {
                        direction: e1,
                        times: l.certified.iter().map(|c| c.time as usize).collect(),
                        levels: l.certified.iter().map(|c| c.level as f64).collect(),
                        unresolved: Vec::new(),
                        h_la,
                        per_event_bound,
                    },
                    path: l.path,
                    graph: l.graph,
                    stopped_at_frontier: l.stopped_at_frontier,
                    kernel_audit: l.audit,
                }
            })
            .collect();
        let total = self.events.len() as f64 * per_event_bound;
        NestedRun {
            levels,
            t0: self.t0,
            h_la,
            per_event_bound,
            total_error_budget: total,
            eps_total: self.eps_total,
            certifications: self.events,
            unsettled_consultations: self.unsettled_consultations,
            exhausted,
        }
    }
}

/// Builds and runs a nested simulation.
pub fn nested_simulate(cfg: &SimulationConfig) -> Result<NestedRun> {
    NestedSim::new(cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{figure2_base, figure2_child};
    use crate::rng::walk_stream;

    #[test]
    fn degree_one_vertex_is_forced() {
        let p = figure2_base();
        let path = WalkPath::from_moves(2, &[Direction::positive(1)]);
        let mut g = TraceGraph::from_path(&path).unwrap();
        g.certify_settled(f64::INFINITY);
        let mut rng = walk_stream(1, 0, 0);
        for _ in 0..20 {
            let y = step(&p, &g, &LatticePoint::origin(2), &mut rng).unwrap();
            assert_eq!(y.coords(), &[0, 1]);
        }
    }

    #[test]
    fn unsettled_and_absent_vertices_are_refused() {
        let p = figure2_base();
        let g = TraceGraph::from_path(&WalkPath::from_moves(2, &[Direction::positive(0)])).unwrap();
        let mut rng = walk_stream(1, 0, 0);
        let o = LatticePoint::origin(2);
        assert!(matches!(step(&p, &g, &o, &mut rng), Err(Error::UnsettledNeighborhood { .. })));
        let far = LatticePoint::new(&[9, 9]).unwrap();
        assert!(matches!(step(&p, &g, &far, &mut rng), Err(Error::VertexAbsent(_))));
    }

    #[test]
    fn sampling_boundaries() {
        let p = BiasDistribution::new(2, &[0.5, 0.0, 0.25, 0.25]).unwrap();
        assert_eq!(sample_direction(&p, 0b1111, 0.0), Some(Direction::positive(0)));
        assert_eq!(sample_direction(&p, 0b1111, 0.999_999_9), Some(Direction::negative(1)));
        assert_eq!(sample_direction(&p, 0b0010, 0.3), None);
        assert_eq!(sample_direction(&p, 0b0011, 0.99), Some(Direction::positive(0)));
    }

    #[test]
    fn straight_velocity_and_short_paths() {
        let path = WalkPath::from_moves(2, &[Direction::positive(0); 50]);
        let v = velocity_estimate(&path, 0.2, Some(&[1.0, 0.0])).unwrap();
        assert_eq!(v.velocity, vec![1.0, 0.0]);
        assert_eq!(v.angle_deg, Some(0.0));
        let empty = WalkPath::new(2, 0, 0);
        assert!(matches!(velocity_estimate(&empty, 0.2, None), Err(Error::PathTooShort { .. })));
    }

    #[test]
    fn zero_child_budget() {
        let cfg = SimulationConfig::new(vec![figure2_base(), figure2_child(1.5).unwrap()], vec![1000, 0], 3).unwrap();
        let run = nested_simulate(&cfg).unwrap();
        assert_eq!(run.levels[1].path.len(), 0);
        assert_eq!(run.levels[0].path.len(), 0);
        assert!(run.check_complete().is_ok());
    }

    #[test]
    fn small_nested_run_is_nested_and_deterministic() {
        let mut cfg = SimulationConfig::new(
            vec![figure2_base(), figure2_child(1.5).unwrap(), figure2_child(1.2).unwrap()],
            vec![200_000, 100_000, 20_000],
            11,
        )
        .unwrap();
        cfg.audit_kernel = true;
        let a = nested_simulate(&cfg).unwrap();
        a.check_complete().unwrap();
        assert!(a.nesting_holds());
        assert_eq!(a.unsettled_consultations, 0);
        assert_eq!(a.levels[2].path.len(), 20_000);
        let b = nested_simulate(&cfg).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert_eq!(x.path, y.path);
        }
        assert!(a.total_error_budget <= cfg.eps_total);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = SimulationConfig::new(vec![figure2_base(), figure2_child(1.5).unwrap()], vec![100, 10_000], 5).unwrap();
        let run = nested_simulate(&cfg).unwrap();
        assert!(matches!(run.check_complete(), Err(Error::BudgetExhausted { level: 0, .. })));
    }

    #[test]
    fn lookahead_must_meet_tolerance() {
        let mut cfg = SimulationConfig::new(vec![figure2_base()], vec![10], 1).unwrap();
        cfg.h_la = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
