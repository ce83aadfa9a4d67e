//! Sparse subgraphs of Z^d generated by walk paths.
//!
//! A [`TraceGraph`] stores each visited vertex once, in insertion order, with
//! a bitmask of its incident edges (bit `k` set means the edge towards
//! direction `k` is present). Vertices are located through an open-addressing
//! table of vertex ids keyed by a mix of the packed coordinates, kept at load
//! factor at most 0.7.
//!
//! The settled level records how much of the graph is final: every vertex
//! with first coordinate strictly below it has its complete, final
//! neighbourhood.

use std::collections::VecDeque;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticePoint, MAX_DIM};

const EMPTY: u32 = u32::MAX;
const MAX_LOAD_NUM: usize = 7;
const MAX_LOAD_DEN: usize = 10;

const DUMP_MAGIC: &[u8; 4] = b"TWTG";
const DUMP_VERSION: u32 = 1;

/// An ordered nearest-neighbour path started at the origin, stored as moves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkPath {
    dim: usize,
    moves: Vec<Direction>,
    end: LatticePoint,
    /// Identifier of the RNG stream that generated the path.
    pub seed: u64,
    /// Index `i` of the walk in the nested sequence.
    pub generation: usize,
}

impl WalkPath {
    pub fn new(dim: usize, seed: u64, generation: usize) -> Self {
        WalkPath {
            dim,
            moves: Vec::new(),
            end: LatticePoint::origin(dim),
            seed,
            generation,
        }
    }

    /// Builds a path from its visited points; `points[0]` must be the origin.
    pub fn from_points(points: &[LatticePoint]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Domain("a path has at least one point".into()))?;
        let dim = first.dim();
        if *first != LatticePoint::origin(dim) {
            return Err(Error::Domain(format!("path starts at {first}, not the origin")));
        }
        let mut path = WalkPath::new(dim, 0, 0);
        for (index, pair) in points.windows(2).enumerate() {
            let dir = pair[0].direction_to(&pair[1]).ok_or(Error::NonAdjacentStep { index })?;
            path.push(dir);
        }
        Ok(path)
    }

    /// Builds a path from a move list.
    pub fn from_moves(dim: usize, moves: &[Direction]) -> Self {
        let mut path = WalkPath::new(dim, 0, 0);
        for &m in moves {
            path.push(m);
        }
        path
    }

    #[inline]
    pub fn push(&mut self, dir: Direction) {
        debug_assert!(dir.axis() < self.dim);
        self.end = self.end.step(dir);
        self.moves.push(dir);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps `n`; the path visits `n + 1` points.
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn moves(&self) -> &[Direction] {
        &self.moves
    }

    pub fn endpoint(&self) -> LatticePoint {
        self.end
    }

    /// `X_0, X_1, ..., X_n`.
    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        let origin = LatticePoint::origin(self.dim);
        std::iter::once(origin).chain(self.moves.iter().scan(origin, |x, &m| {
            *x = x.step(m);
            Some(*x)
        }))
    }

    /// `X_n`, computed by replaying the first `n` moves.
    pub fn point_at(&self, n: usize) -> LatticePoint {
        self.moves[..n].iter().fold(LatticePoint::origin(self.dim), |x, &m| x.step(m))
    }

    /// `X_n · v` for every `n`.
    pub fn projections(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.moves.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &m in &self.moves {
            acc += m.dot(v);
            out.push(acc);
        }
        out
    }

    /// `X_n · e_1` for every `n`, in exact integer arithmetic.
    pub fn levels(&self) -> Vec<i64> {
        self.axis_projection(Direction::positive(0))
    }

    /// `X_n · e` for a signed unit direction `e`.
    pub fn axis_projection(&self, e: Direction) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.moves.len() + 1);
        let mut acc = 0i64;
        out.push(acc);
        for &m in &self.moves {
            if m.axis() == e.axis() {
                acc += m.sign() * e.sign();
            }
            out.push(acc);
        }
        out
    }

    /// The first `n` steps as a new path.
    pub fn prefix(&self, n: usize) -> WalkPath {
        let mut p = WalkPath::from_moves(self.dim, &self.moves[..n.min(self.moves.len())]);
        p.seed = self.seed;
        p.generation = self.generation;
        p
    }
}

/// The trace of one or more path segments, with a settled frontier.
#[derive(Clone, Debug)]
pub struct TraceGraph {
    dim: usize,
    coords: Vec<i64>,
    masks: Vec<u16>,
    slots: Vec<u32>,
    edge_count: usize,
    settled_level: f64,
    tip: LatticePoint,
}

#[inline]
fn mix(coords: &[i64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &c in coords {
        h ^= c as u64;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 29)
}

impl TraceGraph {
    /// The graph containing only the origin.
    pub fn new(dim: usize) -> Self {
        assert!((2..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        let mut g = TraceGraph {
            dim,
            coords: Vec::new(),
            masks: Vec::new(),
            slots: vec![EMPTY; 16],
            edge_count: 0,
            settled_level: f64::NEG_INFINITY,
            tip: LatticePoint::origin(dim),
        };
        g.insert_vertex(&LatticePoint::origin(dim));
        g
    }

    pub fn from_path(path: &WalkPath) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&path.dim()) {
            return Err(Error::Dimension(path.dim()));
        }
        let mut g = TraceGraph::new(path.dim());
        g.reserve(path.len() / 2);
        for &m in path.moves() {
            g.push_step(m);
        }
        debug_assert!(g.is_connected());
        Ok(g)
    }

    /// Appends a segment of points; `segment[0]` must be the current tip.
    pub fn extend(&mut self, segment: &[LatticePoint]) -> Result<()> {
        let Some(first) = segment.first() else {
            return Ok(());
        };
        if *first != self.tip {
            return Err(Error::DiscontinuousExtension {
                expected: self.tip,
                found: *first,
            });
        }
        // Validate before mutating so a bad segment leaves the graph untouched.
        let dirs = segment
            .windows(2)
            .enumerate()
            .map(|(index, w)| w[0].direction_to(&w[1]).ok_or(Error::NonAdjacentStep { index }))
            .collect::<Result<Vec<_>>>()?;
        for d in dirs {
            self.push_step(d);
        }
        Ok(())
    }

    /// Appends a path's moves, which continue from the current tip.
    pub fn extend_moves(&mut self, moves: &[Direction]) {
        for &m in moves {
            self.push_step(m);
        }
    }

    /// Records one step of the generating walk from the current tip.
    #[inline]
    pub fn push_step(&mut self, dir: Direction) {
        let from = self.tip;
        let to = from.step(dir);
        let a = self.insert_vertex(&from);
        let b = self.insert_vertex(&to);
        if self.masks[a] & dir.bit() == 0 {
            self.masks[a] |= dir.bit();
            self.masks[b] |= dir.opposite().bit();
            self.edge_count += 1;
        }
        self.tip = to;
    }

    /// Last point of the generating path.
    pub fn tip(&self) -> LatticePoint {
        self.tip
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.masks.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn settled_level(&self) -> f64 {
        self.settled_level
    }

    /// Raises the settled level; lower values are ignored.
    pub fn certify_settled(&mut self, level: f64) {
        if level > self.settled_level {
            self.settled_level = level;
        }
    }

    /// Whether the neighbourhood of `x` is final.
    #[inline]
    pub fn is_settled(&self, x: &LatticePoint) -> bool {
        (x.level() as f64) < self.settled_level
    }

    /// Insertion-order id of `x`.
    #[inline]
    pub fn vertex_id(&self, x: &LatticePoint) -> Option<usize> {
        let cap = self.slots.len();
        let mut slot = (mix(x.coords()) as usize) & (cap - 1);
        loop {
            let id = self.slots[slot];
            if id == EMPTY {
                return None;
            }
            let id = id as usize;
            if self.vertex_coords(id) == x.coords() {
                return Some(id);
            }
            slot = (slot + 1) & (cap - 1);
        }
    }

    pub fn contains_vertex(&self, x: &LatticePoint) -> bool {
        self.vertex_id(x).is_some()
    }

    pub fn contains_edge(&self, x: &LatticePoint, y: &LatticePoint) -> bool {
        match (x.direction_to(y), self.mask(x)) {
            (Some(d), Some(m)) => m & d.bit() != 0,
            _ => false,
        }
    }

    /// Incident-edge bitmask of `x`, if present.
    #[inline]
    pub fn mask(&self, x: &LatticePoint) -> Option<u16> {
        self.vertex_id(x).map(|id| self.masks[id])
    }

    pub fn degree(&self, x: &LatticePoint) -> Result<usize> {
        self.mask(x).map(|m| m.count_ones() as usize).ok_or(Error::VertexAbsent(*x))
    }

    /// Neighbours joined to `x` by present edges, in canonical direction order.
    pub fn neighbors(&self, x: &LatticePoint) -> Result<Vec<LatticePoint>> {
        let mask = self.mask(x).ok_or(Error::VertexAbsent(*x))?;
        Ok(Direction::all(self.dim)
            .filter(|d| mask & d.bit() != 0)
            .map(|d| x.step(d))
            .collect())
    }

    pub fn vertex(&self, id: usize) -> LatticePoint {
        LatticePoint::new(self.vertex_coords(id)).expect("stored dimension is valid")
    }

    pub fn vertex_mask(&self, id: usize) -> u16 {
        self.masks[id]
    }

    /// Vertices in insertion order.
    pub fn vertices(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.vertex_count()).map(|id| self.vertex(id))
    }

    /// Each undirected edge once, as `(lower endpoint, axis)`.
    pub fn edges(&self) -> impl Iterator<Item = (LatticePoint, usize)> + '_ {
        (0..self.vertex_count()).flat_map(move |id| {
            let mask = self.masks[id];
            (0..self.dim)
                .filter(move |&j| mask & Direction::positive(j).bit() != 0)
                .map(move |j| (self.vertex(id), j))
        })
    }

    /// Exact inclusion of vertex and edge sets.
    pub fn is_subgraph_of(&self, other: &TraceGraph) -> bool {
        self.dim == other.dim
            && (0..self.vertex_count()).all(|id| {
                let x = self.vertex(id);
                match other.mask(&x) {
                    Some(m) => self.masks[id] & !m == 0,
                    None => false,
                }
            })
    }

    /// Same vertex and edge sets (insertion order ignored).
    pub fn same_structure(&self, other: &TraceGraph) -> bool {
        self.vertex_count() == other.vertex_count() && self.edge_count == other.edge_count && self.is_subgraph_of(other)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(id) = queue.pop_front() {
            let x = self.vertex(id);
            let mask = self.masks[id];
            for d in Direction::all(self.dim).filter(|d| mask & d.bit() != 0) {
                let Some(nb) = self.vertex_id(&x.step(d)) else {
                    return false;
                };
                if !seen[nb] {
                    seen[nb] = true;
                    count += 1;
                    queue.push_back(nb);
                }
            }
        }
        count == n
    }

    pub fn reserve(&mut self, additional: usize) {
        let need = self.vertex_count() + additional;
        if need * MAX_LOAD_DEN > self.slots.len() * MAX_LOAD_NUM {
            let mut cap = self.slots.len();
            while need * MAX_LOAD_DEN > cap * MAX_LOAD_NUM {
                cap *= 2;
            }
            self.rehash(cap);
        }
        self.coords.reserve(additional * self.dim);
        self.masks.reserve(additional);
    }

    fn vertex_coords(&self, id: usize) -> &[i64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    fn insert_vertex(&mut self, x: &LatticePoint) -> usize {
        debug_assert_eq!(x.dim(), self.dim);
        let cap = self.slots.len();
        let mut slot = (mix(x.coords()) as usize) & (cap - 1);
        loop {
            let id = self.slots[slot];
            if id == EMPTY {
                break;
            }
            if self.vertex_coords(id as usize) == x.coords() {
                return id as usize;
            }
            slot = (slot + 1) & (cap - 1);
        }
        let id = self.masks.len();
        assert!(id < EMPTY as usize, "vertex table overflow");
        self.coords.extend_from_slice(x.coords());
        self.masks.push(0);
        self.slots[slot] = id as u32;
        if (id + 1) * MAX_LOAD_DEN > cap * MAX_LOAD_NUM {
            self.rehash(cap * 2);
        }
        id
    }

    fn rehash(&mut self, cap: usize) {
        let mut slots = vec![EMPTY; cap];
        for id in 0..self.masks.len() {
            let mut slot = (mix(self.vertex_coords(id)) as usize) & (cap - 1);
            while slots[slot] != EMPTY {
                slot = (slot + 1) & (cap - 1);
            }
            slots[slot] = id as u32;
        }
        self.slots = slots;
    }

    /// Writes the versioned little-endian dump described in the README.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&self.settled_level.to_le_bytes())?;
        for c in self.tip.coords() {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&(self.vertex_count() as u64).to_le_bytes())?;
        w.write_all(&(self.edge_count as u64).to_le_bytes())?;
        for c in &self.coords {
            w.write_all(&c.to_le_bytes())?;
        }
        for id in 0..self.vertex_count() {
            for j in 0..self.dim {
                if self.masks[id] & Direction::positive(j).bit() != 0 {
                    w.write_all(&(id as u64).to_le_bytes())?;
                    w.write_all(&[j as u8])?;
                }
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        let _reserved = read_u32(&mut r)?;
        let settled = f64::from_le_bytes(read_array(&mut r)?);
        let mut tip = [0i64; MAX_DIM];
        for c in tip.iter_mut().take(dim) {
            *c = read_i64(&mut r)?;
        }
        let nv = read_u64(&mut r)? as usize;
        let ne = read_u64(&mut r)? as usize;
        if nv == 0 {
            return Err(Error::Format("empty vertex set".into()));
        }
        let mut g = TraceGraph {
            dim,
            coords: Vec::with_capacity(nv * dim),
            masks: Vec::with_capacity(nv),
            slots: vec![EMPTY; 16],
            edge_count: 0,
            settled_level: settled,
            tip: LatticePoint::new(&tip[..dim])?,
        };
        g.reserve(nv);
        let mut buf = vec![0i64; dim];
        for _ in 0..nv {
            for c in buf.iter_mut() {
                *c = read_i64(&mut r)?;
            }
            let x = LatticePoint::new(&buf)?;
            if g.insert_vertex(&x) != g.vertex_count() - 1 {
                return Err(Error::Format(format!("duplicate vertex {x}")));
            }
        }
        if g.vertex(0) != LatticePoint::origin(dim) {
            return Err(Error::Format("first vertex must be the origin".into()));
        }
        for _ in 0..ne {
            let id = read_u64(&mut r)? as usize;
            let [axis] = read_array::<_, 1>(&mut r)?;
            let axis = axis as usize;
            if id >= nv || axis >= dim {
                return Err(Error::Format(format!("edge ({id}, {axis}) out of range")));
            }
            let d = Direction::positive(axis);
            let x = g.vertex(id);
            let nb = g
                .vertex_id(&x.step(d))
                .ok_or_else(|| Error::Format(format!("edge from {x} to a missing vertex")))?;
            if g.masks[id] & d.bit() != 0 {
                return Err(Error::Format(format!("duplicate edge at {x}")));
            }
            g.masks[id] |= d.bit();
            g.masks[nb] |= d.opposite().bit();
            g.edge_count += 1;
        }
        if g.tip_vertex_missing() {
            return Err(Error::Format("tip is not a vertex".into()));
        }
        Ok(g)
    }

    fn tip_vertex_missing(&self) -> bool {
        !self.contains_vertex(&self.tip)
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64> {
    Ok(i64::from_le_bytes(read_array(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> LatticePoint {
        LatticePoint::new(c).unwrap()
    }

    #[test]
    fn straight_path() {
        let path = WalkPath::from_points(&[p(&[0, 0]), p(&[1, 0]), p(&[2, 0])]).unwrap();
        let g = TraceGraph::from_path(&path).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(&p(&[2, 0])).unwrap(), vec![p(&[1, 0])]);
        assert_eq!(g.neighbors(&p(&[1, 0])).unwrap(), vec![p(&[2, 0]), p(&[0, 0])]);
        assert_eq!(g.settled_level(), f64::NEG_INFINITY);
    }

    #[test]
    fn repeated_edge_is_deduplicated() {
        let path = WalkPath::from_points(&[p(&[0, 0]), p(&[1, 0]), p(&[0, 0]), p(&[0, 1])]).unwrap();
        let g = TraceGraph::from_path(&path).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn orthogonal_crossing_has_four_neighbours() {
        // (1,0) is crossed horizontally, then vertically.
        let pts = [p(&[0, 0]), p(&[1, 0]), p(&[2, 0]), p(&[2, 1]), p(&[1, 1]), p(&[1, 0]), p(&[1, -1])];
        let path = WalkPath::from_points(&pts).unwrap();
        let g = TraceGraph::from_path(&path).unwrap();
        let nb = g.neighbors(&p(&[1, 0])).unwrap();
        assert_eq!(nb, vec![p(&[2, 0]), p(&[0, 0]), p(&[1, 1]), p(&[1, -1])]);
        assert_eq!(g.degree(&p(&[2, 1])).unwrap(), 2);
        assert_eq!(g.degree(&p(&[1, -1])).unwrap(), 1);
    }

    #[test]
    fn malformed_inputs() {
        let err = WalkPath::from_points(&[p(&[0, 0]), p(&[1, 1])]).unwrap_err();
        assert!(matches!(err, Error::NonAdjacentStep { index: 0 }));
        let mut g = TraceGraph::new(2);
        let err = g.extend(&[p(&[1, 0]), p(&[2, 0])]).unwrap_err();
        assert!(matches!(err, Error::DiscontinuousExtension { .. }));
        assert!(matches!(g.neighbors(&p(&[5, 5])), Err(Error::VertexAbsent(_))));
    }

    #[test]
    fn extend_empty_is_identity_and_settlement_is_monotone() {
        let mut g = TraceGraph::new(2);
        g.extend(&[]).unwrap();
        assert_eq!(g.vertex_count(), 1);
        g.certify_settled(f64::NEG_INFINITY);
        assert_eq!(g.settled_level(), f64::NEG_INFINITY);
        g.certify_settled(5.0);
        g.certify_settled(3.0);
        assert_eq!(g.settled_level(), 5.0);
        assert!(g.is_settled(&p(&[4, 9])));
        assert!(!g.is_settled(&p(&[5, 0])));
    }

    #[test]
    fn table_growth_keeps_every_vertex() {
        let mut g = TraceGraph::new(3);
        let mut x = LatticePoint::origin(3);
        let mut seen = vec![x];
        for k in 0..5000 {
            let d = Direction::from_index((k * 7 + k / 3) % 6);
            g.push_step(d);
            x = x.step(d);
            seen.push(x);
        }
        assert!(g.slots.len() * MAX_LOAD_NUM >= g.vertex_count() * MAX_LOAD_DEN);
        for v in &seen {
            assert!(g.contains_vertex(v), "{v} lost");
        }
        assert!(g.is_connected());
    }

    #[test]
    fn dump_and_load_preserve_structure() {
        let pts = [p(&[0, 0]), p(&[1, 0]), p(&[1, 1]), p(&[0, 1]), p(&[0, 0]), p(&[-1, 0])];
        let mut g = TraceGraph::from_path(&WalkPath::from_points(&pts).unwrap()).unwrap();
        g.certify_settled(-0.5);
        let mut buf = Vec::new();
        g.dump(&mut buf).unwrap();
        let h = TraceGraph::load(buf.as_slice()).unwrap();
        assert!(g.same_structure(&h));
        assert_eq!(h.settled_level(), -0.5);
        assert_eq!(h.tip(), p(&[-1, 0]));
        buf[0] = b'X';
        assert!(matches!(TraceGraph::load(buf.as_slice()), Err(Error::Format(_))));
    }
}
