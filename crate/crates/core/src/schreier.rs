//! Schreier coset graphs of subgroups of the free group, grown lazily from the
//! trivial coset.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::words::{Letter, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubgroupKind {
    /// Kernel of `F_k -> Z^r`; `weights[g]` is the image of generator `g`.
    Kernel { weights: Vec<Vec<i64>> },
    /// Kernel of `F_k -> Z/m`.
    KernelCyclic { modulus: u64, weights: Vec<i64> },
    /// Subgroup generated by finitely many words.
    Generated { generators: Vec<Word> },
    /// The trivial subgroup; the Schreier graph is the Cayley tree.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupSpec {
    pub rank: usize,
    #[serde(flatten)]
    pub kind: SubgroupKind,
}

impl SubgroupSpec {
    /// Kernel of the homomorphism to `Z` with one weight per generator.
    pub fn kernel_z(weights: &[i64]) -> Result<SubgroupSpec> {
        SubgroupSpec::new(weights.len(), SubgroupKind::Kernel { weights: weights.iter().map(|&w| vec![w]).collect() })
    }

    /// Kernel of the abelianization map; the commutator subgroup.
    pub fn commutator(rank: usize) -> Result<SubgroupSpec> {
        let weights = (0..rank).map(|g| (0..rank).map(|j| i64::from(g == j)).collect()).collect();
        SubgroupSpec::new(rank, SubgroupKind::Kernel { weights })
    }

    pub fn kernel_cyclic(modulus: u64, weights: &[i64]) -> Result<SubgroupSpec> {
        SubgroupSpec::new(weights.len(), SubgroupKind::KernelCyclic { modulus, weights: weights.to_vec() })
    }

    pub fn generated(rank: usize, generators: Vec<Word>) -> Result<SubgroupSpec> {
        SubgroupSpec::new(rank, SubgroupKind::Generated { generators })
    }

    pub fn trivial(rank: usize) -> SubgroupSpec {
        SubgroupSpec { rank, kind: SubgroupKind::Trivial }
    }

    pub fn new(rank: usize, kind: SubgroupKind) -> Result<SubgroupSpec> {
        if rank == 0 {
            return Err(Error::Domain("rank must be positive".into()));
        }
        match &kind {
            SubgroupKind::Kernel { weights } => {
                let dim = weights.first().map_or(0, Vec::len);
                if weights.len() != rank || dim == 0 || weights.iter().any(|w| w.len() != dim) {
                    return Err(Error::Domain("kernel weights need one vector of common dimension per generator".into()));
                }
                if weights.iter().flatten().all(|&w| w == 0) {
                    return Err(Error::Domain("kernel weights are all zero".into()));
                }
            }
            SubgroupKind::KernelCyclic { modulus, weights } => {
                if weights.len() != rank || *modulus < 2 {
                    return Err(Error::Domain("cyclic kernel needs modulus >= 2 and one weight per generator".into()));
                }
                if weights.iter().all(|&w| w.rem_euclid(*modulus as i64) == 0) {
                    return Err(Error::Domain("kernel weights are all zero".into()));
                }
            }
            SubgroupKind::Generated { generators } => {
                if generators.is_empty() || generators.iter().all(Word::is_empty) {
                    return Err(Error::Domain("generator list is empty".into()));
                }
                if generators.iter().any(|g| g.min_rank() > rank) {
                    return Err(Error::Domain("generator uses a letter beyond the rank".into()));
                }
            }
            SubgroupKind::Trivial => {}
        }
        Ok(SubgroupSpec { rank, kind })
    }

    pub fn is_normal(&self) -> bool {
        !matches!(self.kind, SubgroupKind::Generated { .. })
    }

    /// Whether `w` lies in the subgroup.
    pub fn contains(&self, w: &Word) -> bool {
        let cosets = Cosets::new(self);
        let mut key = cosets.base();
        for &x in w.letters() {
            key = cosets.step(&key, x);
        }
        key == cosets.base()
    }
}

/// Canonical coset representative.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CosetKey {
    Lattice(Vec<i64>),
    Residue(u64),
    /// A vertex of the folded core graph plus the reduced tail hanging off it.
    Folded(usize, Word),
    Element(Word),
}

/// Stallings folding of the bouquet of generator loops.
#[derive(Clone, Debug)]
struct Folded {
    edges: Vec<Vec<Option<usize>>>,
}

impl Folded {
    fn new(rank: usize, generators: &[Word]) -> Folded {
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        let add = |adj: &mut Vec<Vec<(usize, usize)>>, u: usize, x: usize, v: usize| {
            adj[u].push((x, v));
            adj[v].push((x ^ 1, u));
        };
        for g in generators.iter().filter(|g| !g.is_empty()) {
            let mut u = 0;
            for (i, x) in g.letters().iter().enumerate() {
                let v = if i + 1 == g.len() {
                    0
                } else {
                    adj.push(Vec::new());
                    adj.len() - 1
                };
                add(&mut adj, u, x.code(), v);
                u = v;
            }
        }
        let mut parent: Vec<usize> = (0..adj.len()).collect();
        fn find(p: &mut [usize], mut v: usize) -> usize {
            while p[v] != v {
                p[v] = p[p[v]];
                v = p[v];
            }
            v
        }
        loop {
            let mut merged = false;
            for u in 0..adj.len() {
                if find(&mut parent, u) != u {
                    continue;
                }
                let mut seen: HashMap<usize, usize> = HashMap::new();
                let edges = std::mem::take(&mut adj[u]);
                let mut kept = Vec::new();
                for (x, v) in edges {
                    let v = find(&mut parent, v);
                    match seen.get(&x) {
                        Some(&w) if w == v => {}
                        Some(&w) => {
                            let (keep, gone) = if w < v { (w, v) } else { (v, w) };
                            parent[gone] = keep;
                            let moved = std::mem::take(&mut adj[gone]);
                            adj[keep].extend(moved);
                            merged = true;
                        }
                        None => {
                            seen.insert(x, v);
                            kept.push((x, v));
                        }
                    }
                }
                let r = find(&mut parent, u);
                adj[r].extend(kept);
            }
            if !merged {
                break;
            }
        }
        let roots: Vec<usize> = (0..adj.len()).filter(|&v| find(&mut parent, v) == v).collect();
        let index: HashMap<usize, usize> = roots.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let mut edges = vec![vec![None; 2 * rank]; roots.len()];
        for &r in &roots {
            for &(x, v) in &adj[r] {
                let v = find(&mut parent, v);
                edges[index[&r]][x] = Some(index[&v]);
            }
        }
        Folded { edges }
    }
}

/// Coset arithmetic for one subgroup.
#[derive(Clone, Debug)]
pub struct Cosets {
    spec: SubgroupSpec,
    folded: Option<Folded>,
}

impl Cosets {
    pub fn new(spec: &SubgroupSpec) -> Cosets {
        let folded = match &spec.kind {
            SubgroupKind::Generated { generators } => Some(Folded::new(spec.rank, generators)),
            _ => None,
        };
        Cosets { spec: spec.clone(), folded }
    }

    pub fn base(&self) -> CosetKey {
        match &self.spec.kind {
            SubgroupKind::Kernel { weights } => CosetKey::Lattice(vec![0; weights[0].len()]),
            SubgroupKind::KernelCyclic { .. } => CosetKey::Residue(0),
            SubgroupKind::Generated { .. } => CosetKey::Folded(0, Word::identity()),
            SubgroupKind::Trivial => CosetKey::Element(Word::identity()),
        }
    }

    /// The coset `H g x` from the coset `H g`.
    pub fn step(&self, key: &CosetKey, x: Letter) -> CosetKey {
        let sign = if x.is_positive() { 1 } else { -1 };
        match (&self.spec.kind, key) {
            (SubgroupKind::Kernel { weights }, CosetKey::Lattice(v)) => {
                CosetKey::Lattice(v.iter().zip(&weights[x.generator()]).map(|(a, w)| a + sign * w).collect())
            }
            (SubgroupKind::KernelCyclic { modulus, weights }, CosetKey::Residue(r)) => {
                let m = *modulus as i64;
                CosetKey::Residue((*r as i64 + sign * weights[x.generator()]).rem_euclid(m) as u64)
            }
            (SubgroupKind::Generated { .. }, CosetKey::Folded(u, tail)) => {
                if tail.is_empty() {
                    match self.folded.as_ref().unwrap().edges[*u][x.code()] {
                        Some(v) => CosetKey::Folded(v, Word::identity()),
                        None => CosetKey::Folded(*u, Word::letter(x)),
                    }
                } else {
                    let mut t = tail.clone();
                    t.push(x);
                    CosetKey::Folded(*u, t)
                }
            }
            (SubgroupKind::Trivial, CosetKey::Element(w)) => {
                let mut w = w.clone();
                w.push(x);
                CosetKey::Element(w)
            }
            _ => unreachable!("coset key does not match subgroup kind"),
        }
    }
}

pub const DEFAULT_COSET_BUDGET: usize = 4_000_000;

/// Lazily grown Schreier graph. Vertices are numbered in BFS discovery order.
#[derive(Clone, Debug)]
pub struct SchreierGraph {
    cosets: Cosets,
    keys: Vec<CosetKey>,
    index: HashMap<CosetKey, usize>,
    nbr: Vec<Vec<Option<usize>>>,
    dist: Vec<usize>,
    radius: usize,
    budget: usize,
    pub truncated: bool,
}

impl SchreierGraph {
    pub fn build(spec: &SubgroupSpec, radius: usize) -> SchreierGraph {
        SchreierGraph::with_budget(spec, radius, DEFAULT_COSET_BUDGET)
    }

    pub fn with_budget(spec: &SubgroupSpec, radius: usize, budget: usize) -> SchreierGraph {
        let cosets = Cosets::new(spec);
        let base = cosets.base();
        let mut g = SchreierGraph {
            keys: vec![base.clone()],
            index: HashMap::from([(base, 0)]),
            nbr: vec![vec![None; 2 * spec.rank]],
            dist: vec![0],
            radius: 0,
            budget,
            truncated: false,
            cosets,
        };
        g.extend_to(radius);
        g
    }

    pub fn spec(&self) -> &SubgroupSpec {
        &self.cosets.spec
    }

    pub fn degree(&self) -> usize {
        2 * self.cosets.spec.rank
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Every coset within this distance of the base has been discovered.
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dist(&self, v: usize) -> usize {
        self.dist[v]
    }

    pub fn key(&self, v: usize) -> &CosetKey {
        &self.keys[v]
    }

    pub fn vertex_of(&self, key: &CosetKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Neighbour across the half-edge labelled `x`, if expanded.
    pub fn neighbor(&self, v: usize, x: Letter) -> Option<usize> {
        self.nbr[v][x.code()]
    }

    pub fn is_expanded(&self, v: usize) -> bool {
        self.nbr[v].iter().all(Option::is_some)
    }

    /// True when the quotient is finite and completely explored.
    pub fn is_complete(&self) -> bool {
        !self.truncated && (0..self.len()).all(|v| self.is_expanded(v))
    }

    fn expand(&mut self, v: usize) {
        if self.is_expanded(v) {
            return;
        }
        for x in Letter::all(self.cosets.spec.rank) {
            if self.nbr[v][x.code()].is_some() {
                continue;
            }
            let key = self.cosets.step(&self.keys[v], x);
            let u = match self.index.get(&key) {
                Some(&u) => u,
                None => {
                    if self.keys.len() >= self.budget {
                        self.truncated = true;
                        return;
                    }
                    let u = self.keys.len();
                    self.keys.push(key.clone());
                    self.index.insert(key, u);
                    self.nbr.push(vec![None; 2 * self.cosets.spec.rank]);
                    self.dist.push(self.dist[v] + 1);
                    u
                }
            };
            self.nbr[v][x.code()] = Some(u);
            self.nbr[u][x.inverse().code()] = Some(v);
        }
    }

    /// Grows the graph until every coset within `radius` is present.
    pub fn extend_to(&mut self, radius: usize) {
        while self.radius < radius && !self.truncated {
            let layer: Vec<usize> = (0..self.len()).filter(|&v| self.dist[v] == self.radius).collect();
            if layer.is_empty() {
                self.radius = radius;
                return;
            }
            for v in layer {
                self.expand(v);
                if self.truncated {
                    return;
                }
            }
            self.radius += 1;
        }
    }

    /// Follows `x` from `v`, growing the graph when needed.
    pub fn step(&mut self, v: usize, x: Letter) -> Result<usize> {
        while self.nbr[v][x.code()].is_none() {
            if self.truncated {
                return Err(Error::Budget("coset budget exhausted".into()));
            }
            let r = self.radius + 1;
            self.extend_to(r);
        }
        Ok(self.nbr[v][x.code()].unwrap())
    }

    /// BFS distances from `root` over the expanded part.
    pub fn distances_from(&self, root: usize) -> Vec<Option<usize>> {
        let mut d = vec![None; self.len()];
        d[root] = Some(0);
        let mut q = VecDeque::from([root]);
        while let Some(v) = q.pop_front() {
            for u in self.nbr[v].iter().flatten() {
                if d[*u].is_none() {
                    d[*u] = Some(d[v].unwrap() + 1);
                    q.push_back(*u);
                }
            }
        }
        d
    }

    /// Edge list `src,dst,generator,sign`, one row per positive half-edge.
    pub fn edge_csv(&self) -> String {
        let mut out = String::from("src,dst,generator,sign\n");
        for v in 0..self.len() {
            for x in Letter::all(self.cosets.spec.rank).filter(|x| x.is_positive()) {
                if let Some(u) = self.nbr[v][x.code()] {
                    let _ = writeln!(out, "{v},{u},{},1", x.generator());
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RayProjection {
    pub vertex_path: Vec<usize>,
    pub distance_profile: Vec<usize>,
}

/// Reads a letter stream from the base coset.
pub fn project_ray<I: IntoIterator<Item = Letter>>(stream: I, graph: &mut SchreierGraph) -> Result<RayProjection> {
    let mut v = 0;
    let mut vertex_path = vec![0];
    let mut distance_profile = vec![0];
    for x in stream {
        v = graph.step(v, x)?;
        vertex_path.push(v);
        distance_profile.push(graph.dist(v));
    }
    Ok(RayProjection { vertex_path, distance_profile })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum RayClass {
    /// Distances exceed the bound at every index from `index` on.
    Escape { index: usize },
    /// Indices at which the profile is at most the bound.
    Recurrent { returns: Vec<usize> },
}

pub fn classify_ray(profile: &[usize], window: usize, bound: usize) -> Result<RayClass> {
    if profile.len() <= window {
        return Err(Error::Horizon(format!("profile of length {} with window {window}", profile.len())));
    }
    let index = profile.iter().rposition(|&d| d <= bound).map_or(0, |j| j + 1);
    if profile.len() - index >= window && index < profile.len() {
        Ok(RayClass::Escape { index })
    } else {
        Ok(RayClass::Recurrent { returns: (0..profile.len()).filter(|&i| profile[i] <= bound).collect() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FolnerStrategy {
    Balls,
    Intervals,
    Greedy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FolnerCandidate {
    pub vertices: Vec<usize>,
    pub boundary: u64,
    pub size: u64,
    pub ratio: f64,
}

impl FolnerCandidate {
    fn new(graph: &SchreierGraph, vertices: Vec<usize>) -> FolnerCandidate {
        let set: HashSet<usize> = vertices.iter().copied().collect();
        let boundary = boundary_count(graph, &set);
        let size = vertices.len() as u64;
        FolnerCandidate { vertices, boundary, size, ratio: boundary as f64 / (graph.degree() as f64 * size as f64) }
    }
}

/// Half-edges leaving `set`. Every member must be expanded.
pub fn boundary_count(graph: &SchreierGraph, set: &HashSet<usize>) -> u64 {
    set.iter().map(|&v| graph.nbr[v].iter().filter(|u| !set.contains(&u.expect("unexpanded vertex in set"))).count() as u64).sum()
}

pub fn folner_candidates(graph: &SchreierGraph, strategy: FolnerStrategy) -> Vec<FolnerCandidate> {
    let expanded: Vec<usize> = (0..graph.len()).filter(|&v| graph.is_expanded(v)).collect();
    match strategy {
        FolnerStrategy::Balls => {
            let max_r = (0..graph.len()).filter(|&v| !graph.is_expanded(v)).map(|v| graph.dist(v)).min().unwrap_or(usize::MAX);
            let max_r = max_r.min(graph.dist.iter().copied().max().unwrap_or(0) + 1);
            (0..max_r)
                .map(|r| FolnerCandidate::new(graph, (0..graph.len()).filter(|&v| graph.dist(v) <= r).collect()))
                .take_while(|c| !c.vertices.is_empty())
                .collect()
        }
        FolnerStrategy::Intervals => {
            let a = Letter::new(0, true);
            let mut out = Vec::new();
            let mut path = vec![0];
            let mut seen = HashSet::from([0]);
            loop {
                let last = *path.last().unwrap();
                if !graph.is_expanded(last) {
                    break;
                }
                out.push(FolnerCandidate::new(graph, path.clone()));
                let next = graph.neighbor(last, a).unwrap();
                if !seen.insert(next) || !graph.is_expanded(next) {
                    break;
                }
                path.push(next);
            }
            out
        }
        FolnerStrategy::Greedy => {
            let expanded_set: HashSet<usize> = expanded.iter().copied().collect();
            let mut set: HashSet<usize> = HashSet::from([0]);
            let mut order = vec![0];
            let mut boundary = boundary_count(graph, &set) as i64;
            let mut out = vec![FolnerCandidate::new(graph, order.clone())];
            loop {
                let mut best: Option<(i64, usize)> = None;
                let mut frontier: Vec<usize> = set.iter().flat_map(|&v| graph.nbr[v].iter().flatten().copied()).filter(|u| !set.contains(u) && expanded_set.contains(u)).collect();
                frontier.sort_unstable();
                frontier.dedup();
                for u in frontier {
                    let inside = graph.nbr[u].iter().filter(|w| set.contains(&w.unwrap())).count() as i64;
                    let loops = graph.nbr[u].iter().filter(|w| w.unwrap() == u).count() as i64;
                    let delta = graph.degree() as i64 - loops - 2 * inside;
                    if best.map_or(true, |(d, _)| delta < d) {
                        best = Some((delta, u));
                    }
                }
                let Some((delta, u)) = best else { break };
                set.insert(u);
                order.push(u);
                boundary += delta;
                let size = order.len() as u64;
                out.push(FolnerCandidate {
                    vertices: order.clone(),
                    boundary: boundary as u64,
                    size,
                    ratio: boundary as f64 / (graph.degree() as f64 * size as f64),
                });
            }
            out
        }
    }
}
