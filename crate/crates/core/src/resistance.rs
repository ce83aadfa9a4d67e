//! Exact electrical-network computations on finite graphs.
//!
//! Conductances are injected in log space and divided by the largest one
//! before assembly; resistances returned in physical units undo that scale.
//! Dirichlet problems are solved by Gaussian elimination in minimum-degree
//! order up to [`DIRECT_LIMIT`] unknowns, and by Jacobi-preconditioned
//! conjugate gradients above it. Elimination keeps each vertex's conductance
//! to the boundary apart from its edges and rebuilds every pivot as a sum of
//! nonnegative conductances, so conductances spanning many decades cost no
//! accuracy to cancellation.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::Read;

use rand::Rng;

use crate::bias::ConductanceParams;
use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticePoint};
use crate::trace::TraceGraph;

/// Largest system solved by direct elimination.
pub const DIRECT_LIMIT: usize = 10_000;
const CG_TOL: f64 = 1e-12;

/// A finite connected network with positive edge conductances.
#[derive(Clone, Debug)]
pub struct FiniteNetwork {
    points: Vec<Option<LatticePoint>>,
    index: HashMap<LatticePoint, usize>,
    adj: Vec<Vec<(usize, f64)>>,
    /// Natural log of the factor removed from every conductance.
    log_scale: f64,
}

impl FiniteNetwork {
    /// Abstract network on `n` vertices from `(a, b, conductance)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let logs: Vec<(usize, usize, f64)> = edges
            .iter()
            .map(|&(a, b, c)| {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Domain(format!("conductance {c} must be positive")));
                }
                if a >= n || b >= n || a == b {
                    return Err(Error::Domain(format!("bad edge ({a}, {b})")));
                }
                Ok((a, b, c.ln()))
            })
            .collect::<Result<_>>()?;
        Ok(Self::assemble(vec![None; n], &logs))
    }

    /// The trace `g` with conductances from `params`.
    pub fn from_trace(g: &TraceGraph, params: &ConductanceParams) -> Self {
        Self::from_trace_filtered(g, params, |_| true)
    }

    /// The subgraph of `g` induced by the vertices accepted by `keep`.
    pub fn from_trace_filtered<F: Fn(&LatticePoint) -> bool>(g: &TraceGraph, params: &ConductanceParams, keep: F) -> Self {
        let mut ids = vec![usize::MAX; g.vertex_count()];
        let mut points = Vec::new();
        for id in 0..g.vertex_count() {
            let x = g.vertex(id);
            if keep(&x) {
                ids[id] = points.len();
                points.push(Some(x));
            }
        }
        let mut logs = Vec::new();
        for id in 0..g.vertex_count() {
            if ids[id] == usize::MAX {
                continue;
            }
            let x = g.vertex(id);
            let mask = g.vertex_mask(id);
            for j in 0..g.dim() {
                let e = Direction::positive(j);
                if mask & e.bit() == 0 {
                    continue;
                }
                let y = x.step(e);
                let nb = g.vertex_id(&y).expect("edge endpoints are vertices");
                if ids[nb] != usize::MAX {
                    logs.push((ids[id], ids[nb], params.log_conductance_step(&x, e)));
                }
            }
        }
        Self::assemble(points, &logs)
    }

    /// Reads a trace dump and attaches conductances from `params`.
    pub fn load<R: Read>(r: R, params: &ConductanceParams) -> Result<Self> {
        let g = TraceGraph::load(r)?;
        if g.dim() != params.log_c.len() {
            return Err(Error::Dimension(g.dim()));
        }
        Ok(Self::from_trace(&g, params))
    }

    fn assemble(points: Vec<Option<LatticePoint>>, logs: &[(usize, usize, f64)]) -> Self {
        let n = points.len();
        let log_scale = logs.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
        let log_scale = if log_scale.is_finite() { log_scale } else { 0.0 };
        let mut adj = vec![Vec::new(); n];
        for &(a, b, lc) in logs {
            let c = (lc - log_scale).exp();
            adj[a].push((b, c));
            adj[b].push((a, c));
        }
        let index = points.iter().enumerate().filter_map(|(i, p)| p.map(|p| (p, i))).collect();
        FiniteNetwork {
            points,
            index,
            adj,
            log_scale,
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn id(&self, x: &LatticePoint) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn point(&self, id: usize) -> Option<LatticePoint> {
        self.points[id]
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Neighbours of `v` with rescaled conductances.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    /// Physical conductance of edge `(a, b)`, if present.
    pub fn conductance(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a].iter().find(|(y, _)| *y == b).map(|(_, c)| c * self.log_scale.exp())
    }

    /// Physical `c(v) = Σ_y c(v, y)`.
    pub fn total_conductance(&self, v: usize) -> f64 {
        self.scaled_total(v) * self.log_scale.exp()
    }

    fn scaled_total(&self, v: usize) -> f64 {
        self.adj[v].iter().map(|(_, c)| c).sum()
    }

    /// A copy with edge `(a, b)` deleted.
    pub fn without_edge(&self, a: usize, b: usize) -> Self {
        let mut out = self.clone();
        out.adj[a].retain(|(y, _)| *y != b);
        out.adj[b].retain(|(y, _)| *y != a);
        out
    }

    /// A copy with the conductance of `(a, b)` multiplied by `factor`.
    pub fn with_scaled_edge(&self, a: usize, b: usize, factor: f64) -> Self {
        let mut out = self.clone();
        for (u, v) in [(a, b), (b, a)] {
            for e in out.adj[u].iter_mut() {
                if e.0 == v {
                    e.1 *= factor;
                }
            }
        }
        out
    }

    /// Harmonic extension of `values` (on the boundary vertices) to every
    /// vertex connected to the boundary. Vertices in boundary-free components
    /// are returned as NaN.
    pub fn harmonic(&self, boundary: &[(usize, f64)]) -> Result<Vec<f64>> {
        self.solve_dirichlet(boundary, None)
    }

    /// Potential with the given boundary values and an optional current
    /// injected at a free vertex.
    fn solve_dirichlet(&self, boundary: &[(usize, f64)], source: Option<(usize, f64)>) -> Result<Vec<f64>> {
        let n = self.len();
        let mut fixed = vec![None; n];
        for &(v, val) in boundary {
            if v >= n {
                return Err(Error::Domain(format!("vertex {v} out of range")));
            }
            fixed[v] = Some(val);
        }
        // Unknowns: free vertices reachable from the boundary.
        let mut reach = vec![false; n];
        let mut queue: VecDeque<usize> = boundary.iter().map(|b| b.0).collect();
        for &(v, _) in boundary {
            reach[v] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &(y, _) in &self.adj[v] {
                if !reach[y] {
                    reach[y] = true;
                    if fixed[y].is_none() {
                        queue.push_back(y);
                    }
                }
            }
        }
        let unknowns: Vec<usize> = (0..n).filter(|&v| reach[v] && fixed[v].is_none()).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &v) in unknowns.iter().enumerate() {
            local[v] = k;
        }
        let m = unknowns.len();
        let mut sys = Grounded {
            nbrs: vec![Vec::new(); m],
            ground: vec![0.0; m],
            rhs: vec![0.0; m],
        };
        for (k, &v) in unknowns.iter().enumerate() {
            for &(y, c) in &self.adj[v] {
                match fixed[y] {
                    Some(val) => {
                        sys.ground[k] += c;
                        sys.rhs[k] += c * val;
                    }
                    None => sys.nbrs[k].push((local[y], c)),
                }
            }
        }
        if let Some((v, i)) = source {
            if local[v] != usize::MAX {
                sys.rhs[local[v]] += i;
            }
        }
        let sol = if m <= DIRECT_LIMIT { solve_direct(sys)? } else { solve_cg(&sys)? };
        let mut out = vec![f64::NAN; n];
        for (v, f) in fixed.iter().enumerate() {
            if let Some(val) = f {
                out[v] = *val;
            }
        }
        for (k, &v) in unknowns.iter().enumerate() {
            out[v] = sol[k];
        }
        Ok(out)
    }

    /// `R(a, B)` in rescaled units.
    fn scaled_resistance(&self, a: usize, b_set: &[usize]) -> Result<f64> {
        if b_set.is_empty() || b_set.contains(&a) {
            return Err(Error::Domain("need a non-empty boundary not containing the source".into()));
        }
        if a >= self.len() {
            return Err(Error::Domain(format!("vertex {a} out of range")));
        }
        // Unit current in at `a`, grounded on `B`: the potential at `a` is R.
        // Every term of the M-matrix solve is nonnegative, so nothing cancels.
        let boundary: Vec<(usize, f64)> = b_set.iter().map(|&b| (b, 0.0)).collect();
        let u = self.solve_dirichlet(&boundary, Some((a, 1.0)))?;
        let r = u[a];
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(r)
    }

    /// Natural log of the effective resistance between `a` and the set `b_set`.
    pub fn log_effective_resistance(&self, a: usize, b_set: &[usize]) -> Result<f64> {
        Ok(self.scaled_resistance(a, b_set)?.ln() - self.log_scale)
    }

    /// Effective resistance between `a` and the set `b_set`.
    pub fn effective_resistance(&self, a: usize, b_set: &[usize]) -> Result<f64> {
        self.log_effective_resistance(a, b_set).map(f64::exp)
    }

    /// Probability that the network walk from `start` hits `target` before
    /// any vertex of `avoid`.
    pub fn hit_before(&self, start: usize, target: usize, avoid: &[usize]) -> Result<f64> {
        if start == target || avoid.contains(&start) {
            return Err(Error::Domain("start must differ from target and avoided vertices".into()));
        }
        let mut boundary = vec![(target, 1.0)];
        boundary.extend(avoid.iter().map(|&v| (v, 0.0)));
        let u = self.harmonic(&boundary)?;
        let p = u[start];
        if p.is_nan() {
            return Err(Error::SingularSystem);
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Probability that the walk from `x` reaches `b_set` before returning to `x`.
    pub fn escape_probability(&self, x: usize, b_set: &[usize]) -> Result<f64> {
        Ok(1.0 / (self.scaled_total(x) * self.scaled_resistance(x, b_set)?))
    }

    /// Brackets the never-return probability of the infinite network from `x`,
    /// given a boundary `far` that separates `x` from infinity and an upper
    /// bound `tail_resistance` (physical units) on the resistance from `far`
    /// to infinity.
    pub fn never_return_probability(&self, x: usize, far: &[usize], tail_resistance: f64) -> Result<NeverReturn> {
        if !(tail_resistance >= 0.0) {
            return Err(Error::Domain(format!("tail resistance {tail_resistance} must be >= 0")));
        }
        let r_lower = self.scaled_resistance(x, far)?;
        let r_upper = r_lower + tail_resistance * self.log_scale.exp();
        let cx = self.scaled_total(x);
        Ok(NeverReturn {
            lower: 1.0 / (cx * r_upper),
            upper: 1.0 / (cx * r_lower),
        })
    }

    /// One step of the network walk from `v` using the uniform `u`.
    #[inline]
    pub fn step_with(&self, v: usize, u: f64) -> usize {
        let total = self.scaled_total(v);
        let target = u * total;
        let mut acc = 0.0;
        for &(y, c) in &self.adj[v] {
            acc += c;
            if target < acc {
                return y;
            }
        }
        self.adj[v].last().expect("vertex has an edge").0
    }

    /// Monte Carlo counterpart of [`hit_before`](Self::hit_before).
    pub fn simulate_hit<R: Rng>(&self, start: usize, target: usize, avoid: &[usize], rng: &mut R) -> bool {
        let mut v = start;
        loop {
            v = self.step_with(v, rng.random());
            if v == target {
                return true;
            }
            if avoid.contains(&v) {
                return false;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeverReturn {
    pub lower: f64,
    pub upper: f64,
}

impl NeverReturn {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// Resistance of the ray `{x + k e_1 : k ≥ 0}` in the conductances of `params`.
pub fn ray_resistance(params: &ConductanceParams, x: &LatticePoint) -> Result<f64> {
    let l1 = params.log_odds.raw[0];
    if !(l1 > 0.0) {
        return Err(Error::Domain("conductances do not grow along e1".into()));
    }
    // Edge (x + k e1, x + (k+1) e1) has log-conductance log c_1 + x·ℓ̂ + (k+1) ℓ̂_1.
    let first = params.log_conductance_step(x, Direction::positive(0));
    Ok((-first).exp() / (1.0 - (-l1).exp()))
}

/// Dirichlet Laplacian: free-vertex edges, conductance to the boundary and
/// injected current per unknown.
struct Grounded {
    nbrs: Vec<Vec<(usize, f64)>>,
    ground: Vec<f64>,
    rhs: Vec<f64>,
}

fn solve_direct(mut sys: Grounded) -> Result<Vec<f64>> {
    let m = sys.nbrs.len();
    let mut queue: BTreeSet<(usize, usize)> = (0..m).map(|v| (sys.nbrs[v].len(), v)).collect();
    // (vertex, pivot, edges at elimination, current at elimination)
    let mut eliminated: Vec<(usize, f64, Vec<(usize, f64)>, f64)> = Vec::with_capacity(m);
    while let Some((_, k)) = queue.pop_first() {
        let nb = std::mem::take(&mut sys.nbrs[k]);
        let d = sys.ground[k] + nb.iter().map(|e| e.1).sum::<f64>();
        if !(d > 0.0) {
            return Err(Error::SingularSystem);
        }
        let (gk, bk) = (sys.ground[k], sys.rhs[k]);
        for &(i, cik) in &nb {
            queue.remove(&(sys.nbrs[i].len(), i));
            sys.nbrs[i].retain(|e| e.0 != k);
            sys.ground[i] += cik * gk / d;
            sys.rhs[i] += cik * bk / d;
        }
        for (a, &(i, cik)) in nb.iter().enumerate() {
            for &(j, cjk) in &nb[a + 1..] {
                let c = cik * cjk / d;
                add_edge(&mut sys.nbrs[i], j, c);
                add_edge(&mut sys.nbrs[j], i, c);
            }
        }
        for &(i, _) in &nb {
            queue.insert((sys.nbrs[i].len(), i));
        }
        eliminated.push((k, d, nb, bk));
    }
    let mut x = vec![0.0; m];
    for (k, d, nb, bk) in eliminated.iter().rev() {
        x[*k] = (bk + nb.iter().map(|&(j, c)| c * x[j]).sum::<f64>()) / d;
    }
    Ok(x)
}

fn add_edge(list: &mut Vec<(usize, f64)>, j: usize, c: f64) {
    match list.iter_mut().find(|e| e.0 == j) {
        Some(e) => e.1 += c,
        None => list.push((j, c)),
    }
}

fn solve_cg(sys: &Grounded) -> Result<Vec<f64>> {
    let m = sys.nbrs.len();
    let rhs = &sys.rhs;
    let diag: Vec<f64> = (0..m)
        .map(|k| sys.ground[k] + sys.nbrs[k].iter().map(|e| e.1).sum::<f64>())
        .collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        for k in 0..m {
            out[k] = diag[k] * x[k] - sys.nbrs[k].iter().map(|&(j, c)| c * x[j]).sum::<f64>();
        }
    };
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; m];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; m];
    let max_iter = 20 * m + 100;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::SingularSystem);
        }
        let alpha = rz / pap;
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= CG_TOL * bnorm {
            return Ok(x);
        }
        for k in 0..m {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NonConvergence {
        what: "conjugate gradients",
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{figure2_base, figure2_child};
    use crate::trace::WalkPath;

    #[test]
    fn series_and_parallel() {
        let net = FiniteNetwork::from_edges(3, &[(0, 1, 1.0 / 2.0), (1, 2, 1.0 / 3.0)]).unwrap();
        assert!((net.effective_resistance(0, &[2]).unwrap() - 5.0).abs() < 1e-12);
        let sq = FiniteNetwork::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        assert!((sq.effective_resistance(0, &[2]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hitting_basics() {
        let path = FiniteNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!((path.hit_before(1, 2, &[0]).unwrap() - 0.5).abs() < 1e-12);
        let leaf = FiniteNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!((leaf.hit_before(0, 1, &[2]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_is_singular() {
        let net = FiniteNetwork::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(net.effective_resistance(0, &[3]), Err(Error::SingularSystem)));
        assert!(matches!(net.hit_before(0, 3, &[2]), Err(Error::SingularSystem)));
    }

    #[test]
    fn direct_and_iterative_agree() {
        let p0 = figure2_base();
        let mut rng = crate::rng::walk_stream(9, 0, 0);
        let path = crate::walk::simulate_level0(&p0, 3000, &mut rng);
        let g = TraceGraph::from_path(&path).unwrap();
        let params = figure2_child(1.5).unwrap().conductance_params().unwrap();
        let net = FiniteNetwork::from_trace(&g, &params);
        let far = net.id(&path.endpoint()).unwrap();
        let rhs_rows: Vec<(usize, f64)> = vec![(0, 1.0), (far, 0.0)];
        let u = net.harmonic(&rhs_rows).unwrap();
        // Rebuild the same system and solve it iteratively.
        let n = net.len();
        let unknowns: Vec<usize> = (0..n).filter(|&v| v != 0 && v != far).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &v) in unknowns.iter().enumerate() {
            local[v] = k;
        }
        let m = unknowns.len();
        let mut sys = Grounded {
            nbrs: vec![Vec::new(); m],
            ground: vec![0.0; m],
            rhs: vec![0.0; m],
        };
        for (k, &v) in unknowns.iter().enumerate() {
            for &(y, c) in net.neighbors(v) {
                if y == 0 || y == far {
                    sys.ground[k] += c;
                    sys.rhs[k] += if y == 0 { c } else { 0.0 };
                } else {
                    sys.nbrs[k].push((local[y], c));
                }
            }
        }
        let x = solve_cg(&sys).unwrap();
        for (k, &v) in unknowns.iter().enumerate() {
            assert!((x[k] - u[v]).abs() < 1e-8, "vertex {v}: {} vs {}", x[k], u[v]);
        }
    }

    #[test]
    fn straight_ray_bracket() {
        let params = figure2_child(3.0).unwrap().conductance_params().unwrap();
        let radius = 30;
        let path = WalkPath::from_moves(2, &vec![Direction::positive(0); radius]);
        let g = TraceGraph::from_path(&path).unwrap();
        let net = FiniteNetwork::from_trace(&g, &params);
        let x = LatticePoint::new(&[5, 0]).unwrap();
        let xi = net.id(&x).unwrap();
        let far = net.id(&path.endpoint()).unwrap();
        let tail = ray_resistance(&params, &path.endpoint()).unwrap();
        let br = net.never_return_probability(xi, &[far], tail).unwrap();
        // Birth-death chain: escape to +∞ is 1/(c(x) R(x,∞)); the left part is a dead end.
        let r_inf = ray_resistance(&params, &x).unwrap();
        let cx = net.total_conductance(xi);
        let exact = 1.0 / (cx * r_inf);
        assert!(br.lower <= exact * (1.0 + 1e-12) && exact <= br.upper * (1.0 + 1e-12));
        assert!(br.width() < 1e-9);
    }
}
