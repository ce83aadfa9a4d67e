//! Regeneration times, uber-regeneration levels, cut points and trap events.
//!
//! A candidate is a time at which the projection `X·ℓ` reaches a new strict
//! maximum (time 0 included). It is certified as a regeneration when the
//! observed path never again goes strictly below its level and reaches at
//! least `h_la` beyond it. Candidates that are never undercut but whose
//! window is incomplete are reported as unresolved and excluded from all
//! statistics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticePoint};
use crate::trace::{TraceGraph, WalkPath};

/// Guard used when flooring non-lattice projections.
pub const FLOOR_GUARD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegenerationRecord {
    pub direction: Vec<f64>,
    pub times: Vec<usize>,
    pub levels: Vec<f64>,
    /// Candidates with an incomplete lookahead window.
    pub unresolved: Vec<usize>,
    pub h_la: f64,
    /// Error bound attached to each certification; zero when certified against
    /// the full observed future.
    pub per_event_bound: f64,
}

impl RegenerationRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Differences of consecutive regeneration levels.
    pub fn level_gaps(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Block `j` (1-based) spans `[times[j-1], times[j]]`.
    pub fn block_count(&self) -> usize {
        self.times.len().saturating_sub(1)
    }
}

/// The signed axis `±e_j` equal to `ell`, if any.
pub fn axis_direction(ell: &[f64]) -> Option<Direction> {
    let nonzero: Vec<usize> = (0..ell.len()).filter(|&j| ell[j] != 0.0).collect();
    match nonzero.as_slice() {
        [j] if ell[*j] == 1.0 => Some(Direction::positive(*j)),
        [j] if ell[*j] == -1.0 => Some(Direction::negative(*j)),
        _ => None,
    }
}

/// `X_n · ℓ` computed from integer coordinates, so equal points give equal values.
pub fn projections(path: &WalkPath, ell: &[f64]) -> Vec<f64> {
    match axis_direction(ell) {
        Some(e) => path.axis_projection(e).into_iter().map(|v| v as f64).collect(),
        None => path.points().map(|x| x.dot(ell)).collect(),
    }
}

/// All regenerations of `path` in direction `ell` certified against the
/// observed future.
pub fn regenerations(path: &WalkPath, ell: &[f64], h_la: f64) -> RegenerationRecord {
    let proj = projections(path, ell);
    let n = proj.len();
    let mut suffix_min = vec![0.0; n];
    let mut m = f64::INFINITY;
    for k in (0..n).rev() {
        m = m.min(proj[k]);
        suffix_min[k] = m;
    }
    let global_max = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rec = RegenerationRecord {
        direction: ell.to_vec(),
        times: Vec::new(),
        levels: Vec::new(),
        unresolved: Vec::new(),
        h_la,
        per_event_bound: 0.0,
    };
    let mut running_max = f64::NEG_INFINITY;
    for k in 0..n {
        if proj[k] > running_max {
            running_max = proj[k];
            if suffix_min[k] >= proj[k] {
                if global_max >= proj[k] + h_la {
                    rec.times.push(k);
                    rec.levels.push(proj[k]);
                } else {
                    rec.unresolved.push(k);
                }
            }
        }
    }
    rec
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Certification {
    pub time: u64,
    pub level: i64,
}

/// Online regeneration tracker in direction `e_1`: candidates are kept in a
/// queue of strictly increasing levels, dropped when undercut and certified
/// once the walk reaches `level + h_la` without undercutting them.
#[derive(Clone, Debug)]
pub struct OnlineRegenerations {
    h_la: f64,
    max_level: i64,
    candidates: VecDeque<Certification>,
}

impl OnlineRegenerations {
    /// Starts a tracker with the origin (time 0, level 0) as first candidate.
    pub fn new(h_la: f64) -> Self {
        OnlineRegenerations {
            h_la,
            max_level: 0,
            candidates: VecDeque::from([Certification { time: 0, level: 0 }]),
        }
    }

    /// Feeds the level after step `time`; returns the newest level certified
    /// by this step, if any. Certified events are appended to `out`.
    #[inline]
    pub fn observe(&mut self, time: u64, level: i64, out: &mut Vec<Certification>) -> Option<i64> {
        if level > self.max_level {
            self.max_level = level;
            self.candidates.push_back(Certification { time, level });
        } else {
            while matches!(self.candidates.back(), Some(c) if c.level > level) {
                self.candidates.pop_back();
            }
        }
        let mut newest = None;
        while let Some(c) = self.candidates.front() {
            if (self.max_level as f64) < c.level as f64 + self.h_la {
                break;
            }
            newest = Some(c.level);
            out.push(*c);
            self.candidates.pop_front();
        }
        newest
    }

    pub fn pending(&self) -> usize {
        self.candidates.len()
    }
}

/// Levels `> 0` that are regeneration levels of every record, in increasing
/// order, with the point of the last walk at its regeneration time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UberLevels {
    pub levels: Vec<i64>,
    pub points: Vec<LatticePoint>,
}

impl UberLevels {
    pub fn gaps(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| (w[1] - w[0]) as f64).collect()
    }
}

/// Common regeneration levels of a stack of walks `0..=i`.
pub fn uber_levels(records: &[RegenerationRecord], paths: &[WalkPath]) -> Result<UberLevels> {
    if records.is_empty() || records.len() != paths.len() {
        return Err(Error::Domain(format!("{} records for {} paths", records.len(), paths.len())));
    }
    let dim = paths[0].dim();
    let e1 = Direction::positive(0);
    if records.iter().any(|r| axis_direction(&r.direction) != Some(e1)) {
        return Err(Error::Domain("uber-regeneration levels need records in direction e1".into()));
    }
    let mut common: Vec<i64> = records[0].levels.iter().filter(|&&l| l > 0.0).map(|&l| l as i64).collect();
    for r in &records[1..] {
        let set: HashSet<i64> = r.levels.iter().map(|&l| l as i64).collect();
        common.retain(|l| set.contains(l));
    }
    let last = records.last().expect("non-empty");
    let time_of: BTreeMap<i64, usize> = last.levels.iter().zip(&last.times).map(|(&l, &t)| (l as i64, t)).collect();
    let mut wanted: Vec<usize> = common.iter().map(|l| time_of[l]).collect();
    wanted.sort_unstable();
    let mut points = Vec::with_capacity(wanted.len());
    let mut next = 0;
    for (k, x) in paths.last().expect("non-empty").points().enumerate() {
        if next == wanted.len() {
            break;
        }
        if k == wanted[next] {
            points.push(x);
            next += 1;
        }
    }
    debug_assert!(points.iter().all(|p| p.dim() == dim));
    Ok(UberLevels { levels: common, points })
}

/// Indices `n'` at which the sets of points visited up to `n'` and after `n'`
/// are disjoint. The last index always qualifies.
pub fn cut_points(path: &WalkPath) -> Vec<usize> {
    let mut g = TraceGraph::new(path.dim());
    g.reserve(path.len() / 2);
    let mut ids = Vec::with_capacity(path.len() + 1);
    ids.push(0usize);
    for &m in path.moves() {
        g.push_step(m);
        ids.push(g.vertex_id(&g.tip()).expect("tip is a vertex"));
    }
    let mut last = vec![0usize; g.vertex_count()];
    for (k, &id) in ids.iter().enumerate() {
        last[id] = k;
    }
    let mut reach = 0usize;
    let mut out = Vec::new();
    for (k, &id) in ids.iter().enumerate() {
        reach = reach.max(last[id]);
        if reach <= k {
            out.push(k);
        }
    }
    out
}

/// Trap outcome for one regeneration block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockTrap {
    /// 1-based block index.
    pub block: usize,
    pub start: usize,
    pub end: usize,
    /// Cut-point pair `(m, n)` realising the trap.
    pub witness: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrapCensus {
    pub h: i64,
    pub blocks: Vec<BlockTrap>,
}

impl TrapCensus {
    pub fn count(&self) -> usize {
        self.blocks.iter().filter(|b| b.witness.is_some()).count()
    }

    /// Count over blocks `1..=last`.
    pub fn count_through(&self, last: usize) -> usize {
        self.blocks.iter().filter(|b| b.block <= last && b.witness.is_some()).count()
    }
}

#[derive(Clone, Copy, Debug)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Trap heights realisable in block `[start, end]`: for every cut point `n`
/// the earlier cut points `m` in the block with `⌊(X_m − X_n)·ℓ⌋ = h`.
fn block_witness(proj: &[f64], cuts: &[usize], exact: bool, h: i64) -> Option<(usize, usize)> {
    if exact {
        let mut seen: BTreeMap<i64, usize> = BTreeMap::new();
        for &n in cuts {
            let v = proj[n] as i64;
            seen.entry(v).or_insert(n);
            if let Some(&m) = seen.get(&(v + h)) {
                return Some((m, n));
            }
        }
    } else {
        let mut seen: BTreeMap<Key, usize> = BTreeMap::new();
        for &n in cuts {
            seen.entry(Key(proj[n])).or_insert(n);
            let lo = proj[n] + h as f64 - FLOOR_GUARD;
            let hi = proj[n] + (h + 1) as f64 - FLOOR_GUARD;
            if let Some((_, &m)) = seen.range(Key(lo)..Key(hi)).next() {
                return Some((m, n));
            }
        }
    }
    None
}

/// `⌊v⌋` with the guard applied for non-lattice projections.
pub fn trap_floor(v: f64, exact: bool) -> i64 {
    if exact {
        v.floor() as i64
    } else {
        (v + FLOOR_GUARD).floor() as i64
    }
}

/// For each block of `record`, whether two cut points `m ≤ n` inside it have
/// `⌊(X_m − X_n)·ℓ⌋ = h`.
pub fn trap_events(path: &WalkPath, record: &RegenerationRecord, ell: &[f64], h: i64) -> Result<TrapCensus> {
    Ok(trap_events_multi(path, record, ell, &[h])?.remove(0))
}

/// [`trap_events`] for several heights sharing one cut-point pass.
pub fn trap_events_multi(path: &WalkPath, record: &RegenerationRecord, ell: &[f64], hs: &[i64]) -> Result<Vec<TrapCensus>> {
    if let Some(h) = hs.iter().find(|&&h| h < 1) {
        return Err(Error::Domain(format!("trap height {h} must be >= 1")));
    }
    let proj = projections(path, ell);
    let exact = axis_direction(ell).is_some();
    let cuts = cut_points(path);
    let mut out: Vec<TrapCensus> = hs
        .iter()
        .map(|&h| TrapCensus {
            h,
            blocks: Vec::with_capacity(record.block_count()),
        })
        .collect();
    let mut lo = 0;
    for (j, w) in record.times.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        while lo < cuts.len() && cuts[lo] < start {
            lo += 1;
        }
        let mut hi = lo;
        while hi < cuts.len() && cuts[hi] <= end {
            hi += 1;
        }
        let block_cuts = &cuts[lo..hi];
        for census in out.iter_mut() {
            census.blocks.push(BlockTrap {
                block: j + 1,
                start,
                end,
                witness: block_witness(&proj, block_cuts, exact, census.h),
            });
        }
    }
    Ok(out)
}

/// `h_{n,ε} = (1 − ε) log n / t`, rounded up to an integer of at least 1.
pub fn trap_height(n: usize, epsilon: f64, t: f64) -> i64 {
    let raw = (1.0 - epsilon) * (n as f64).ln() / t;
    (raw.ceil() as i64).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrapScaling {
    pub n: usize,
    pub epsilon: f64,
    pub h: i64,
    pub threshold: f64,
    pub counts: Vec<usize>,
    pub fraction_exceeding: f64,
}

/// `N_{n,ε}` per replica over blocks `1..n−1`, and the fraction of replicas with
/// `N_{n,ε} ≥ n^{ε/2}`. Each replica needs at least `n` certified regenerations.
pub fn trap_scaling(ensemble: &[(WalkPath, RegenerationRecord)], ell: &[f64], n: usize, epsilon: f64, t: f64) -> Result<TrapScaling> {
    if !(epsilon > 0.0 && epsilon < 1.0) || n < 2 || !(t > 0.0) {
        return Err(Error::Domain(format!(
            "need n >= 2, epsilon in (0,1), t > 0; got {n}, {epsilon}, {t}"
        )));
    }
    let h = trap_height(n, epsilon, t);
    let mut counts = Vec::with_capacity(ensemble.len());
    for (path, rec) in ensemble {
        if rec.len() < n {
            return Err(Error::InsufficientBlocks { have: rec.len(), need: n });
        }
        let census = trap_events(path, rec, ell, h)?;
        counts.push(census.count_through(n - 1));
    }
    let threshold = (n as f64).powf(epsilon / 2.0);
    let hits = counts.iter().filter(|&&c| c as f64 >= threshold).count();
    Ok(TrapScaling {
        n,
        epsilon,
        h,
        threshold,
        fraction_exceeding: hits as f64 / counts.len().max(1) as f64,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const E1: [f64; 2] = [1.0, 0.0];

    fn path(pts: &[[i64; 2]]) -> WalkPath {
        let pts: Vec<LatticePoint> = pts.iter().map(|c| LatticePoint::new(c).unwrap()).collect();
        WalkPath::from_points(&pts).unwrap()
    }

    #[test]
    fn monotone_path_regenerates_everywhere() {
        let p = WalkPath::from_moves(2, &[Direction::positive(0); 10]);
        let rec = regenerations(&p, &E1, 0.0);
        assert_eq!(rec.times, (0..=10).collect::<Vec<_>>());
        let rec = regenerations(&p, &E1, 3.0);
        assert_eq!(rec.times, (0..=7).collect::<Vec<_>>());
        assert_eq!(rec.unresolved, vec![8, 9, 10]);
        assert_eq!(cut_points(&p), (0..=10).collect::<Vec<_>>());
        let census = trap_events(&p, &rec, &E1, 1).unwrap();
        assert_eq!(census.count(), 0);
    }

    #[test]
    fn single_backtrack() {
        // 0, e1, 0, e1, 2e1, 3e1: time 1 is undercut; the level-1 candidate is
        // time 1 only, so the next regeneration is the first visit to 2e1.
        let p = path(&[[0, 0], [1, 0], [0, 0], [1, 0], [2, 0], [3, 0]]);
        let rec = regenerations(&p, &E1, 1.0);
        assert_eq!(rec.times, vec![0, 4]);
        assert_eq!(rec.unresolved, vec![5]);
    }

    #[test]
    fn cut_point_hand_case() {
        let p = path(&[[0, 0], [1, 0], [1, 1], [1, 0], [2, 0]]);
        assert_eq!(cut_points(&p), vec![0, 3, 4]);
    }

    #[test]
    fn online_tracker_matches_offline() {
        let p = path(&[[0, 0], [1, 0], [0, 0], [1, 0], [2, 0], [3, 0], [4, 0], [3, 0], [4, 0], [5, 0]]);
        let mut tr = OnlineRegenerations::new(2.0);
        let mut out = Vec::new();
        for (k, x) in p.points().enumerate().skip(1) {
            tr.observe(k as u64, x.level(), &mut out);
        }
        let rec = regenerations(&p, &E1, 2.0);
        let online: Vec<usize> = out.iter().map(|c| c.time as usize).collect();
        assert_eq!(online, rec.times);
    }

    #[test]
    fn trap_depth_floor() {
        // Along the diagonal each step projects to ±1/√2. The self-avoiding
        // path drops two steps from (2,1) to (2,-1), a projected depth of √2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ell = [s, s];
        let p = path(&[[0, 0], [1, 0], [1, 1], [2, 1], [2, 0], [2, -1], [3, -1], [4, -1], [4, 0], [5, 0]]);
        assert_eq!(cut_points(&p), (0..=p.len()).collect::<Vec<_>>());
        let rec = RegenerationRecord {
            direction: ell.to_vec(),
            times: vec![0, p.len()],
            levels: vec![0.0, 5.0 * s],
            unresolved: vec![],
            h_la: 0.0,
            per_event_bound: 0.0,
        };
        let c1 = trap_events(&p, &rec, &ell, 1).unwrap();
        assert_eq!(c1.count(), 1);
        let (m, n) = c1.blocks[0].witness.unwrap();
        let proj = projections(&p, &ell);
        assert_eq!(trap_floor(proj[m] - proj[n], false), 1);
        assert_eq!(trap_events(&p, &rec, &ell, 2).unwrap().count(), 0);
    }

    #[test]
    fn trap_height_rounding() {
        assert_eq!(trap_height(100, 0.5, 2f64.ln()), 4);
        assert_eq!(trap_height(100, 0.999_999, 2f64.ln()), 1);
    }
}
