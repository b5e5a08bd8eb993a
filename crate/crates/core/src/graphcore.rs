//! Finite regular graph cores, non-backtracking growth, co-growth and simple
//! random walk return probabilities.

use std::collections::VecDeque;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schreier::{folner_candidates, FolnerStrategy, SchreierGraph, SubgroupKind};

/// A finite connected multigraph in which every vertex has the same degree.
/// Directed edge `2i` runs along undirected edge `i`, and `2i + 1` against it.
#[derive(Clone, Debug)]
pub struct FiniteGraphCore {
    pub id: String,
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    degree: usize,
    out: Vec<Vec<usize>>,
}

impl FiniteGraphCore {
    pub fn new(id: &str, vertices: usize, edges: Vec<(usize, usize)>) -> Result<FiniteGraphCore> {
        if vertices == 0 || edges.iter().any(|&(u, v)| u >= vertices || v >= vertices) {
            return Err(Error::Domain(format!("{id}: edge endpoint out of range")));
        }
        let mut out = vec![Vec::new(); vertices];
        for (i, &(u, v)) in edges.iter().enumerate() {
            out[u].push(2 * i);
            out[v].push(2 * i + 1);
        }
        let degree = out[0].len();
        if let Some(v) = out.iter().position(|o| o.len() != degree) {
            return Err(Error::Domain(format!("{id}: vertex {v} has degree {} but vertex 0 has {degree}", out[v].len())));
        }
        let core = FiniteGraphCore { id: id.to_string(), vertices, edges, degree, out };
        if !core.is_connected() {
            return Err(Error::Domain(format!("{id}: graph is disconnected")));
        }
        if core.betti() < 1 {
            return Err(Error::Domain(format!("{id}: graph is a tree")));
        }
        Ok(core)
    }

    /// Parses `u v` or `u,v` lines; `#` starts a comment and a non-numeric
    /// first line is taken as a header.
    pub fn parse_edge_list(id: &str, text: &str) -> Result<FiniteGraphCore> {
        let mut edges = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            let parsed: std::result::Result<Vec<usize>, _> = fields.iter().take(2).map(|f| f.parse::<usize>()).collect();
            match parsed {
                Ok(p) if p.len() == 2 => edges.push((p[0], p[1])),
                _ if edges.is_empty() && n == 0 => continue,
                _ => return Err(Error::Parse(format!("{id}: line {}: expected two vertex ids", n + 1))),
            }
        }
        let vertices = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        FiniteGraphCore::new(id, vertices, edges)
    }

    pub fn bouquet(k: usize) -> FiniteGraphCore {
        FiniteGraphCore::new(&format!("bouquet{k}"), 1, vec![(0, 0); k]).unwrap()
    }

    pub fn theta() -> FiniteGraphCore {
        FiniteGraphCore::new("theta", 2, vec![(0, 1); 3]).unwrap()
    }

    pub fn barbell() -> FiniteGraphCore {
        FiniteGraphCore::new("barbell", 2, vec![(0, 0), (0, 1), (1, 1)]).unwrap()
    }

    pub fn cycle(m: usize) -> FiniteGraphCore {
        FiniteGraphCore::new(&format!("cycle{m}"), m, (0..m).map(|i| (i, (i + 1) % m)).collect()).unwrap()
    }

    /// Configuration-model multigraph, resampled until connected.
    pub fn random_regular(vertices: usize, degree: usize, seed: u64) -> Result<FiniteGraphCore> {
        if (vertices * degree) % 2 != 0 || degree < 2 {
            return Err(Error::Domain("random regular graph needs an even number of stubs and degree >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stubs: Vec<usize> = (0..vertices).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
        for _ in 0..1000 {
            stubs.shuffle(&mut rng);
            let edges: Vec<(usize, usize)> = stubs.chunks(2).map(|p| (p[0], p[1])).collect();
            if let Ok(core) = FiniteGraphCore::new(&format!("random{degree}reg{vertices}s{seed}"), vertices, edges) {
                return Ok(core);
            }
        }
        Err(Error::Construction("no connected configuration found".into()))
    }

    /// The cores shipped with the library.
    pub fn shipped() -> Vec<FiniteGraphCore> {
        vec![
            FiniteGraphCore::bouquet(2),
            FiniteGraphCore::theta(),
            FiniteGraphCore::barbell(),
            FiniteGraphCore::cycle(5),
            FiniteGraphCore::random_regular(8, 3, 7).unwrap(),
        ]
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn betti(&self) -> usize {
        (self.edges.len() + 1).saturating_sub(self.vertices)
    }

    pub fn directed_edges(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn tail(&self, e: usize) -> usize {
        let (u, v) = self.edges[e / 2];
        if e % 2 == 0 {
            u
        } else {
            v
        }
    }

    pub fn head(&self, e: usize) -> usize {
        self.tail(e ^ 1)
    }

    /// Directed edges leaving `v`.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    /// Non-backtracking continuations of directed edge `e`.
    pub fn successors(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[self.head(e)].iter().copied().filter(move |&f| f != e ^ 1)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertices];
        seen[0] = true;
        let mut q = VecDeque::from([0]);
        while let Some(v) = q.pop_front() {
            for &e in &self.out[v] {
                let u = self.head(e);
                if !seen[u] {
                    seen[u] = true;
                    q.push_back(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// One application of the non-backtracking operator `B`, where
    /// `(Bx)_e` sums `x_f` over continuations `f` of `e`.
    pub fn nb_apply<T: Copy + Default + std::ops::AddAssign>(&self, x: &[T]) -> Vec<T> {
        (0..self.directed_edges())
            .map(|e| {
                let mut s = T::default();
                for f in self.successors(e) {
                    s += x[f];
                }
                s
            })
            .collect()
    }

    /// `counts[n]` is the number of non-backtracking paths with `n` edges, `n >= 1`.
    pub fn nb_path_counts(&self, max_n: usize) -> Vec<u128> {
        let mut out = vec![1u128; 1];
        let mut x = vec![1u128; self.directed_edges()];
        for n in 1..=max_n {
            if n > 1 {
                x = self.nb_apply(&x);
            }
            out.push(x.iter().sum());
        }
        out
    }

    /// Growth slope `log count(n) - log count(n-1)`.
    pub fn empirical_slope(&self, n: usize) -> f64 {
        let c = self.nb_path_counts(n);
        (c[n] as f64).ln() - (c[n - 1] as f64).ln()
    }

    /// `closed[n] = tr(B^n)`: cyclically non-backtracking closed paths of length `n`.
    pub fn nb_closed_counts(&self, max_n: usize) -> Vec<u128> {
        let m = self.directed_edges();
        let mut out = vec![0u128; max_n + 1];
        for e in 0..m {
            let mut x = vec![0u128; m];
            x[e] = 1;
            for item in out.iter_mut().skip(1) {
                x = self.nb_apply(&x);
                *item += x[e];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

/// Spectral radius of the non-backtracking operator by power iteration on
/// `I + B` from the all-ones vector, stopped when the Collatz–Wielandt
/// bracket is narrower than `tol`.
pub fn hashimoto_radius(core: &FiniteGraphCore, tol: f64) -> Result<SpectralEstimate> {
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let m = core.directed_edges();
    let mut x = vec![1.0f64; m];
    for it in 1..=1_000_000 {
        let bx = core.nb_apply(&x);
        let y: Vec<f64> = bx.iter().zip(&x).map(|(b, a)| a + b).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (a, b) in y.iter().zip(&x) {
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
        if hi - lo < tol {
            return Ok(SpectralEstimate { value: (lo + hi) / 2.0 - 1.0, tolerance: (hi - lo) / 2.0, iterations: it });
        }
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / norm).collect();
    }
    Err(Error::Construction(format!("{}: power iteration did not converge", core.id)))
}

/// Co-growth formula for the spectral radius of a `d`-regular graph whose
/// fundamental group has critical exponent `omega`.
pub fn grigorchuk_radius(omega: f64, d: usize) -> f64 {
    let d = d as f64;
    let q = (d - 1.0).sqrt();
    let e = omega.exp();
    if e >= q {
        q / d * (q / e + e / q)
    } else {
        2.0 * q / d
    }
}

/// A nearest-neighbour walk with integer multiplicities summing to `degree` at
/// each state. Missing mass is absorbed.
#[derive(Clone, Debug)]
pub struct WalkChain {
    rows: Vec<Vec<(usize, u32)>>,
    degree: u32,
    base: usize,
    dist: Vec<usize>,
}

impl WalkChain {
    pub fn new(rows: Vec<Vec<(usize, u32)>>, degree: u32, base: usize) -> WalkChain {
        let mut dist = vec![usize::MAX; rows.len()];
        dist[base] = 0;
        let mut q = VecDeque::from([base]);
        while let Some(v) = q.pop_front() {
            for &(u, _) in &rows[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    q.push_back(u);
                }
            }
        }
        WalkChain { rows, degree, base, dist }
    }

    pub fn from_core(core: &FiniteGraphCore) -> WalkChain {
        let rows = (0..core.vertices).map(|v| core.out_edges(v).iter().map(|&e| (core.head(e), 1)).collect()).collect();
        WalkChain::new(rows, core.degree() as u32, 0)
    }

    /// The walk on a Schreier graph, growing it far enough that no return
    /// within `max_steps` can leave the explored part.
    pub fn from_schreier(graph: &mut SchreierGraph, max_steps: usize) -> Result<WalkChain> {
        if matches!(graph.spec().kind, SubgroupKind::Trivial) {
            return Ok(WalkChain::regular_tree(graph.degree(), max_steps));
        }
        graph.extend_to(max_steps / 2 + 1);
        if graph.truncated {
            return Err(Error::Budget("Schreier graph too large for the requested horizon".into()));
        }
        let rows = (0..graph.len())
            .map(|v| {
                crate::words::Letter::all(graph.spec().rank).filter_map(|x| graph.neighbor(v, x)).map(|u| (u, 1)).collect()
            })
            .collect();
        Ok(WalkChain::new(rows, graph.degree() as u32, 0))
    }

    /// Distance-from-root chain of the `d`-regular tree.
    pub fn regular_tree(d: usize, max_steps: usize) -> WalkChain {
        let n = max_steps / 2 + 2;
        let d = d as u32;
        let rows = (0..n)
            .map(|k| {
                if k == 0 {
                    vec![(1, d)]
                } else if k + 1 < n {
                    vec![(k - 1, 1), (k + 1, d - 1)]
                } else {
                    vec![(k - 1, 1)]
                }
            })
            .collect();
        WalkChain::new(rows, d, 0)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn active(&self, t: usize, horizon: usize) -> usize {
        t.min(horizon.saturating_sub(t))
    }

    /// Exact counts of weighted closed walks at the base for `t <= max_steps`.
    pub fn closed_walks_exact(&self, max_steps: usize) -> Vec<BigUint> {
        self.closed_walks_exact_horizon(max_steps, max_steps).0
    }

    /// Return probabilities `p_t(base, base)` as natural logarithms,
    /// exact through step 256 and floating beyond.
    pub fn log_return_probabilities(&self, max_steps: usize) -> Vec<f64> {
        let exact_steps = max_steps.min(256);
        let log_d = f64::from(self.degree).ln();
        let exact = self.closed_walks_exact_horizon(exact_steps, max_steps);
        let mut out: Vec<f64> = exact.0.iter().enumerate().map(|(t, w)| big_ln(w) - t as f64 * log_d).collect();
        if max_steps <= exact_steps {
            return out;
        }
        let mut scale = exact.1.iter().map(big_ln).fold(f64::NEG_INFINITY, f64::max);
        let mut x: Vec<f64> = exact.1.iter().map(|w| (big_ln(w) - scale).exp()).collect();
        for t in exact_steps + 1..=max_steps {
            let reach = self.active(t, max_steps);
            let mut y = vec![0.0f64; self.len()];
            for v in 0..self.len() {
                if self.dist[v] > reach + 1 || x[v] == 0.0 {
                    continue;
                }
                for &(u, m) in &self.rows[v] {
                    if self.dist[u] <= reach {
                        y[u] += x[v] * f64::from(m);
                    }
                }
            }
            let norm = y.iter().cloned().fold(0.0, f64::max);
            if norm == 0.0 {
                out.push(f64::NEG_INFINITY);
                x = y;
                continue;
            }
            scale += norm.ln();
            x = y.into_iter().map(|v| v / norm).map(|v| if v < FLUSH { 0.0 } else { v }).collect();
            out.push(x[self.base].ln() + scale - t as f64 * log_d);
        }
        out
    }

    fn closed_walks_exact_horizon(&self, steps: usize, horizon: usize) -> (Vec<BigUint>, Vec<BigUint>) {
        let mut x = vec![BigUint::zero(); self.len()];
        x[self.base] = BigUint::from(1u32);
        let mut out = vec![BigUint::from(1u32)];
        for t in 1..=steps {
            let reach = self.active(t, horizon);
            let mut y = vec![BigUint::zero(); self.len()];
            for v in 0..self.len() {
                if self.dist[v] > reach + 1 || x[v].is_zero() {
                    continue;
                }
                for &(u, m) in &self.rows[v] {
                    if self.dist[u] <= reach {
                        y[u] += &x[v] * m;
                    }
                }
            }
            x = y;
            out.push(x[self.base].clone());
        }
        (out, x)
    }
}

/// Entries below this are dropped: subnormal products round up.
const FLUSH: f64 = 1e-290;

fn big_ln(w: &BigUint) -> f64 {
    if w.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = w.bits();
    if bits < 1000 {
        return w.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (w >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Running maximum of `p_{2n}^{1/2n}` over even steps up to `max_steps`.
pub fn srw_estimates(chain: &WalkChain, max_steps: usize) -> Vec<f64> {
    let logs = chain.log_return_probabilities(max_steps);
    let mut best = 0.0f64;
    let mut out = Vec::new();
    for t in (2..=max_steps).step_by(2) {
        best = best.max((logs[t] / t as f64).exp());
        out.push(best);
    }
    out
}

/// Certified lower bound on the spectral radius of the simple random walk.
pub fn srw_radius(chain: &WalkChain, max_steps: usize) -> Result<SpectralEstimate> {
    if max_steps < 2 || max_steps % 2 != 0 {
        return Err(Error::Domain("max_steps must be even and positive".into()));
    }
    let est = srw_estimates(chain, max_steps);
    let value = *est.last().unwrap();
    let half = est[(est.len() / 2).saturating_sub(1)];
    Ok(SpectralEstimate { value, tolerance: (value - half).max(f64::EPSILON), iterations: max_steps })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmenabilityVerdict {
    ConsistentAmenable,
    ConsistentNonAmenable,
    Inconsistent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmenabilityReport {
    /// Best isoperimetric ratio found; `None` when no admissible set exists.
    pub folner_best: Option<f64>,
    pub folner_size: usize,
    pub srw: SpectralEstimate,
    /// Exact value when known.
    pub r_exact: Option<f64>,
    pub verdict: AmenabilityVerdict,
}

const SMALL_RATIO: f64 = 0.05;
const NEAR_ONE: f64 = 0.95;

fn verdict(folner_best: Option<f64>, r: f64) -> AmenabilityVerdict {
    let small = folner_best.map_or(false, |x| x <= SMALL_RATIO);
    match (small, r >= NEAR_ONE) {
        (true, true) => AmenabilityVerdict::ConsistentAmenable,
        (false, false) => AmenabilityVerdict::ConsistentNonAmenable,
        _ => AmenabilityVerdict::Inconsistent,
    }
}

/// Fölner candidates and the random-walk bound on a Schreier graph.
pub fn amenability_report(graph: &mut SchreierGraph, max_steps: usize) -> Result<AmenabilityReport> {
    let chain = WalkChain::from_schreier(graph, max_steps)?;
    let srw = srw_radius(&chain, max_steps)?;
    let mut best: Option<(f64, usize)> = None;
    let finite = graph.is_complete();
    let half = graph.len() / 2;
    for strategy in [FolnerStrategy::Balls, FolnerStrategy::Intervals] {
        for c in folner_candidates(graph, strategy) {
            if finite && c.size as usize > half {
                continue;
            }
            if best.map_or(true, |(r, _)| c.ratio < r) {
                best = Some((c.ratio, c.size as usize));
            }
        }
    }
    let r_exact = finite.then_some(1.0);
    Ok(AmenabilityReport {
        folner_best: best.map(|b| b.0),
        folner_size: best.map_or(0, |b| b.1),
        srw,
        r_exact,
        verdict: verdict(best.map(|b| b.0), r_exact.unwrap_or(srw.value)),
    })
}

/// Exact Cheeger ratio of a small core over sets with at most half the vertices.
pub fn core_cheeger(core: &FiniteGraphCore) -> Option<f64> {
    let n = core.vertices;
    if n > 20 {
        return None;
    }
    let mut best: Option<f64> = None;
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if 2 * size > n {
            continue;
        }
        let inside = |v: usize| mask >> v & 1 == 1;
        let boundary = core.edges.iter().filter(|&&(u, v)| inside(u) != inside(v)).count();
        let r = boundary as f64 / (core.degree() as f64 * size as f64);
        best = Some(best.map_or(r, |b: f64| b.min(r)));
    }
    best
}

pub fn core_amenability(core: &FiniteGraphCore, max_steps: usize) -> Result<AmenabilityReport> {
    let chain = WalkChain::from_core(core);
    let srw = srw_radius(&chain, max_steps)?;
    let folner_best = core_cheeger(core);
    Ok(AmenabilityReport {
        folner_best,
        folner_size: 0,
        srw,
        r_exact: Some(1.0),
        verdict: verdict(Some(0.0), 1.0),
    })
}

/// The JSON record for one core.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoreReport {
    pub core_id: String,
    pub d: usize,
    pub betti: usize,
    pub omega: f64,
    pub r_formula: f64,
    pub r_mc: f64,
    pub folner_best: Option<f64>,
}

pub fn core_report(core: &FiniteGraphCore, tol: f64, max_steps: usize) -> Result<CoreReport> {
    let h = hashimoto_radius(core, tol)?;
    let omega = h.value.ln();
    let amen = core_amenability(core, max_steps)?;
    Ok(CoreReport {
        core_id: core.id.clone(),
        d: core.degree(),
        betti: core.betti(),
        omega,
        r_formula: if core.degree() >= 3 { grigorchuk_radius(omega, core.degree()) } else { 1.0 },
        r_mc: amen.srw.value,
        folner_best: amen.folner_best,
    })
}

/// Distinct non-backtracking paths with `n` edges by depth-first search.
pub fn nb_paths_dfs(core: &FiniteGraphCore, n: usize) -> u128 {
    fn go(core: &FiniteGraphCore, e: usize, left: usize) -> u128 {
        if left == 0 {
            return 1;
        }
        core.successors(e).map(|f| go(core, f, left - 1)).sum()
    }
    if n == 0 {
        return core.vertices as u128;
    }
    (0..core.directed_edges()).map(|e| go(core, e, n - 1)).sum()
}

/// Closed cyclically non-backtracking paths of length `n` by depth-first search.
pub fn nb_closed_dfs(core: &FiniteGraphCore, n: usize) -> u128 {
    fn go(core: &FiniteGraphCore, start: usize, e: usize, left: usize) -> u128 {
        if left == 0 {
            return u128::from(core.successors(e).any(|f| f == start));
        }
        core.successors(e).map(|f| go(core, start, f, left - 1)).sum()
    }
    (0..core.directed_edges()).map(|e| go(core, e, e, n - 1)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schreier::SubgroupSpec;

    #[test]
    fn shipped_cores_are_valid() {
        for c in FiniteGraphCore::shipped() {
            assert!(c.betti() >= 1, "{}", c.id);
        }
        let r = FiniteGraphCore::random_regular(8, 3, 7).unwrap();
        assert_eq!(r.vertices, 8);
        assert_eq!(r.degree(), 3);
    }

    #[test]
    fn invalid_cores() {
        assert!(FiniteGraphCore::new("path", 2, vec![(0, 1)]).is_err());
        assert!(FiniteGraphCore::new("split", 2, vec![(0, 0), (1, 1)]).is_err());
        assert!(FiniteGraphCore::new("irregular", 2, vec![(0, 0), (0, 1)]).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let c = FiniteGraphCore::parse_edge_list("t", "src,dst\n0,1\n0,1 # middle\n0 1\n").unwrap();
        assert_eq!(c.degree(), 3);
        assert!(FiniteGraphCore::parse_edge_list("t", "0,1\nx,y\n").is_err());
    }

    #[test]
    fn hashimoto_examples() {
        for k in 1..=4 {
            let h = hashimoto_radius(&FiniteGraphCore::bouquet(k), 1e-10).unwrap();
            assert!((h.value - (2 * k - 1) as f64).abs() < 1e-9);
        }
        let h = hashimoto_radius(&FiniteGraphCore::theta(), 1e-10).unwrap();
        assert!((h.value - 2.0).abs() < 1e-9);
        let h = hashimoto_radius(&FiniteGraphCore::cycle(6), 1e-10).unwrap();
        assert!((h.value - 1.0).abs() < 1e-9);
        assert!(hashimoto_radius(&FiniteGraphCore::theta(), 0.0).is_err());
    }

    #[test]
    fn barbell_matches_closed_path_growth() {
        let core = FiniteGraphCore::barbell();
        let h = hashimoto_radius(&core, 1e-10).unwrap();
        let closed = nb_closed_dfs(&core, 20) as f64;
        assert!((closed.powf(1.0 / 20.0) - h.value).abs() < 0.1);
        assert_eq!(nb_closed_dfs(&core, 12), core.nb_closed_counts(12)[12]);
    }

    #[test]
    fn transfer_recursion_matches_dfs() {
        for core in FiniteGraphCore::shipped().into_iter().filter(|c| c.directed_edges() <= 12) {
            let counts = core.nb_path_counts(14);
            for n in 1..=14 {
                assert_eq!(counts[n], nb_paths_dfs(&core, n), "{} n={n}", core.id);
            }
        }
    }

    #[test]
    fn regular_cores_count_exactly() {
        for core in FiniteGraphCore::shipped() {
            let counts = core.nb_path_counts(20);
            let q = (core.degree() - 1) as u128;
            for n in 1..=20 {
                assert_eq!(counts[n], core.directed_edges() as u128 * q.pow(n as u32 - 1));
            }
        }
    }

    #[test]
    fn hashimoto_matches_empirical_slope() {
        for core in FiniteGraphCore::shipped() {
            let h = hashimoto_radius(&core, 1e-10).unwrap();
            assert!((h.value.ln() - core.empirical_slope(20)).abs() <= 0.05, "{}", core.id);
        }
    }

    #[test]
    fn grigorchuk_examples() {
        for d in 3..10 {
            assert!((grigorchuk_radius(((d - 1) as f64).ln(), d) - 1.0).abs() < 1e-12);
            let q = ((d - 1) as f64).sqrt();
            assert!((grigorchuk_radius(q.ln(), d) - 2.0 * q / d as f64).abs() < 1e-12);
            assert!((grigorchuk_radius(0.0, d) - 2.0 * q / d as f64).abs() < 1e-12);
        }
        assert!((grigorchuk_radius(2f64.ln(), 4) - 0.875).abs() < 1e-12);
    }

    #[test]
    fn grigorchuk_continuous_at_boundary() {
        for d in 3..12 {
            let q = ((d - 1) as f64).sqrt();
            let left = grigorchuk_radius(q.ln() - 1e-9, d);
            let right = grigorchuk_radius(q.ln() + 1e-9, d);
            assert!((left - right).abs() < 1e-8);
            // right limit: (q/d)(q/q + q/q) = 2q/d, the left constant
            let exact = q / d as f64 * (q / q + q / q);
            assert!((exact - 2.0 * q / d as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_and_float_walks_agree() {
        let chain = WalkChain::regular_tree(4, 40);
        let exact = chain.closed_walks_exact(40);
        assert_eq!(exact[2], BigUint::from(4u32));
        assert_eq!(exact[4], BigUint::from(4u32 * 4 + 4 * 3));
        let logs = chain.log_return_probabilities(40);
        for t in (0..=40).step_by(2) {
            let p = exact[t].to_f64().unwrap() / 4f64.powi(t as i32);
            assert!((logs[t].exp() - p).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn tree_walk_converges_to_kesten() {
        let chain = WalkChain::regular_tree(4, 4096);
        let est = srw_estimates(&chain, 4096);
        assert!(est.windows(2).all(|w| w[0] <= w[1]));
        let target = 3f64.sqrt() / 2.0;
        let last = *est.last().unwrap();
        assert!(last < target && target - last < 0.02);
    }

    #[test]
    fn long_tree_walk_stays_below_kesten() {
        let est = srw_radius(&WalkChain::regular_tree(4, 1 << 14), 1 << 14).unwrap();
        let target = 3f64.sqrt() / 2.0;
        assert!(est.value <= target && target - est.value < 0.02, "{}", est.value);
    }

    #[test]
    fn finite_graph_walk_tends_to_one() {
        let est = srw_radius(&WalkChain::from_core(&FiniteGraphCore::theta()), 512).unwrap();
        assert!(est.value > 0.98 && est.value <= 1.0 + 1e-12, "{}", est.value);
    }

    #[test]
    fn schreier_walk_matches_direct_line_walk() {
        let mut g = SchreierGraph::build(&SubgroupSpec::kernel_z(&[1, 0]).unwrap(), 0);
        let chain = WalkChain::from_schreier(&mut g, 64).unwrap();
        let exact = chain.closed_walks_exact(64);
        // lazy walk on Z: 2 loop half-edges, 2 line half-edges
        let mut p = vec![BigUint::zero(); 129];
        p[64] = BigUint::from(1u32);
        for t in 1..=64 {
            let mut q = vec![BigUint::zero(); 129];
            for i in 1..128 {
                q[i] = &p[i] * 2u32 + &p[i - 1] + &p[i + 1];
            }
            p = q;
            assert_eq!(p[64], exact[t]);
        }
    }

    #[test]
    fn amenability_examples() {
        let mut line = SchreierGraph::build(&SubgroupSpec::kernel_z(&[1, 0]).unwrap(), 40);
        let rep = amenability_report(&mut line, 1024).unwrap();
        assert!(rep.folner_best.unwrap() < 0.02);
        assert_eq!(rep.verdict, AmenabilityVerdict::ConsistentAmenable);

        let mut tree = SchreierGraph::build(&SubgroupSpec::trivial(2), 6);
        let rep = amenability_report(&mut tree, 1024).unwrap();
        assert!(rep.folner_best.unwrap() >= 0.5);
        assert!((rep.srw.value - 0.866).abs() < 0.05);
        assert_eq!(rep.verdict, AmenabilityVerdict::ConsistentNonAmenable);

        let rep = core_amenability(&FiniteGraphCore::theta(), 64).unwrap();
        assert_eq!(rep.r_exact, Some(1.0));
        assert!((rep.folner_best.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn core_report_for_theta() {
        let r = core_report(&FiniteGraphCore::theta(), 1e-12, 64).unwrap();
        assert!((r.omega - 2f64.ln()).abs() < 1e-9);
        assert!((r.r_formula - 1.0).abs() < 1e-9);
        assert_eq!(r.betti, 2);
    }
}
