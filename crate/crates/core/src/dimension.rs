//! Visual metric, cylinders and shadows, the mass distribution on a
//! quasi-radial tree and the lower-bound certificate it yields, and
//! box-counting on cylinder covers.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::arcs::ls_slope;
use crate::error::{Error, Result};
use crate::qrtree::{log_sum_exp, separation_threshold, separation_violation, QRTree, Schedule};
use crate::words::{lcp, Word};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualParams {
    pub epsilon: f64,
}

impl Default for VisualParams {
    fn default() -> VisualParams {
        VisualParams { epsilon: 1.0 }
    }
}

impl VisualParams {
    pub fn new(epsilon: f64) -> Result<VisualParams> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(VisualParams { epsilon })
    }
}

/// `e^{-eps L}` with `L` the common prefix of two boundary points given by
/// prefixes that must diverge before either ends.
pub fn visual_distance(xi: &Word, eta: &Word, params: &VisualParams) -> Result<f64> {
    let l = lcp(xi, eta);
    if l == xi.len() || l == eta.len() {
        return Err(Error::Horizon("insufficient resolution: prefixes do not diverge".into()));
    }
    Ok((-params.epsilon * l as f64).exp())
}

/// Boundary rays extending `word`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cylinder {
    pub word: Word,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Disjoint,
    /// The first contains the second.
    Contains,
    Within,
    Equal,
}

impl Cylinder {
    pub fn new(word: Word) -> Cylinder {
        Cylinder { word }
    }

    /// The shadow of a node at radius `r`: the cylinder `floor(r)` letters up.
    pub fn shadow(v: &Word, r: f64) -> Cylinder {
        let cut = (r.max(0.0).floor() as usize).min(v.len());
        Cylinder { word: v.prefix(v.len() - cut) }
    }

    pub fn diameter(&self, params: &VisualParams) -> f64 {
        (-params.epsilon * self.word.len() as f64).exp()
    }

    pub fn contains(&self, xi: &Word) -> bool {
        self.word.is_prefix_of(xi)
    }

    pub fn relation(&self, other: &Cylinder) -> Relation {
        match (self.word.is_prefix_of(&other.word), other.word.is_prefix_of(&self.word)) {
            (true, true) => Relation::Equal,
            (true, false) => Relation::Contains,
            (false, true) => Relation::Within,
            (false, false) => Relation::Disjoint,
        }
    }
}

/// Masses stored as logarithms, indexed like the tree nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MassDistribution {
    pub s: f64,
    pub epsilon: f64,
    pub log_mass: Vec<f64>,
}

impl MassDistribution {
    pub fn mass(&self, node: usize) -> f64 {
        self.log_mass[node].exp()
    }
}

/// `nu(v) = nu(parent) e^{-s eps d(v)} / sum_{siblings w} e^{-s eps d(w)}`.
pub fn mass_distribution(tree: &QRTree, s: f64, params: &VisualParams) -> MassDistribution {
    let se = s * params.epsilon;
    let mut log_mass = vec![0.0; tree.len()];
    for l in 1..=tree.depth() {
        for (p, a, b) in tree.sibling_groups(l) {
            let terms: Vec<f64> = tree.nodes[a..b].iter().map(|n| -se * n.dist as f64).collect();
            let z = log_sum_exp(&terms);
            for (i, t) in (a..b).zip(&terms) {
                log_mass[i] = log_mass[p] + t - z;
            }
        }
    }
    MassDistribution { s, epsilon: params.epsilon, log_mass }
}

/// Total mass at each level; every entry is 1 when mass is conserved.
pub fn level_masses(tree: &QRTree, nu: &MassDistribution) -> Vec<f64> {
    (0..=tree.depth()).map(|l| (tree.levels[l].0..tree.levels[l].1).map(|i| nu.mass(i)).sum()).collect()
}

/// Children mass sums against parent masses; largest relative defect.
pub fn flow_defect(tree: &QRTree, nu: &MassDistribution) -> f64 {
    let mut worst: f64 = 0.0;
    for l in 1..=tree.depth() {
        for (p, a, b) in tree.sibling_groups(l) {
            let sum: f64 = (a..b).map(|i| nu.mass(i)).sum();
            worst = worst.max((sum / nu.mass(p) - 1.0).abs());
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxCount {
    /// `(log(1/r), log N(r))`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    /// Slope per letter, `slope * eps`.
    pub raw_slope: f64,
    pub residual: f64,
}

/// Least-squares slope of `log N(r)` against `log(1/r)` for the cover of
/// `boundary` by cylinders of length `j`, `j` in `grid`.
pub fn box_counting(boundary: &[Word], grid: &[usize], params: &VisualParams) -> Result<BoxCount> {
    let radii: Vec<(f64, usize)> = grid.iter().map(|&j| (params.epsilon * j as f64, j)).collect();
    box_counting_at(boundary, &radii, params.epsilon)
}

/// Box counting with explicit `(log(1/r), prefix length)` pairs.
pub fn box_counting_at(boundary: &[Word], radii: &[(f64, usize)], per_letter: f64) -> Result<BoxCount> {
    if radii.len() < 3 {
        return Err(Error::Domain("box counting needs at least three radii".into()));
    }
    let mut points = Vec::with_capacity(radii.len());
    for &(x, j) in radii {
        let n = boundary.iter().filter(|w| w.len() >= j).map(|w| &w.letters()[..j]).collect::<HashSet<_>>().len();
        if n == 0 {
            return Err(Error::Horizon(format!("no boundary word reaches length {j}")));
        }
        points.push((x, (n as f64).ln()));
    }
    let slope = ls_slope(&points);
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let residual = (points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(BoxCount { points, slope, raw_slope: slope * per_letter, residual })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimensionCertificate {
    pub s: f64,
    pub epsilon: f64,
    pub valid: bool,
    /// `max_v nu(v) - e^{-s eps d(v)}`.
    pub max_violation: f64,
    pub worst_node: usize,
    pub depth: usize,
    pub nodes: usize,
    pub slope: f64,
    pub raw_slope: f64,
    pub residual: f64,
    /// Running `log prod_{n<=m} (sum_A e^{-s eps |a|})^{K_n} e^{-s eps B_n}`.
    pub product_ledger: Vec<f64>,
}

/// Scans every node for `nu(v) <= e^{-s eps d(v)}` and box-counts the
/// deepest level.
pub fn certify_lower_bound(tree: &QRTree, s: f64, params: &VisualParams, schedule: Option<&Schedule>) -> Result<DimensionCertificate> {
    let nu = mass_distribution(tree, s, params);
    let se = s * params.epsilon;
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_node = 0;
    let mut valid = true;
    for (i, n) in tree.nodes.iter().enumerate() {
        let bound = -se * n.dist as f64;
        let v = nu.log_mass[i].exp() - bound.exp();
        if v > max_violation {
            max_violation = v;
            worst_node = i;
        }
        if nu.log_mass[i] > bound + 1e-9 {
            valid = false;
        }
    }
    valid &= max_violation <= 0.0;
    let depth = tree.depth();
    let leaves: Vec<Word> = tree.level(depth).iter().map(|n| n.word.clone()).collect();
    let max_j = leaves.iter().map(Word::len).min().unwrap_or(0);
    let (slope, raw_slope, residual) = if max_j >= 3 {
        let grid: Vec<usize> = (1..=max_j).collect();
        let b = box_counting(&leaves, &grid, params)?;
        (b.slope, b.raw_slope, b.residual)
    } else {
        (0.0, 0.0, 0.0)
    };
    let mut product_ledger = Vec::new();
    if let Some(sch) = schedule {
        let mut acc = 0.0;
        for st in &sch.stages {
            acc += st.k as f64 * st.family.log_partition(se) - se * st.bridge.len() as f64;
            product_ledger.push(acc);
        }
    }
    Ok(DimensionCertificate { s, epsilon: params.epsilon, valid, max_violation, worst_node, depth, nodes: tree.len(), slope, raw_slope, residual, product_ledger })
}

/// Deepest level whose cumulative node count stays within `budget`.
pub fn deepest_level_within(tree: &QRTree, budget: usize) -> usize {
    (0..=tree.depth()).take_while(|&l| tree.levels[l].1 <= budget).last().unwrap_or(0)
}

/// Pairs of nodes whose shadows at radius `r` violate "nested exactly for
/// ancestor and descendant, disjoint otherwise".
pub fn laminarity_violations(tree: &QRTree, r: f64) -> Vec<(usize, usize)> {
    let shadows: Vec<Cylinder> = tree.nodes.iter().map(|n| Cylinder::shadow(&n.word, r)).collect();
    let mut by_word: HashMap<&Word, Vec<usize>> = HashMap::new();
    for (i, c) in shadows.iter().enumerate() {
        by_word.entry(&c.word).or_default().push(i);
    }
    let mut out = Vec::new();
    for v in 0..tree.len() {
        let mut ancestors = HashSet::new();
        let mut p = tree.nodes[v].parent;
        while let Some(a) = p {
            ancestors.insert(a);
            if shadows[a].relation(&shadows[v]) == Relation::Disjoint {
                out.push((a, v));
            }
            p = tree.nodes[a].parent;
        }
        let w = &shadows[v].word;
        for l in 0..=w.len() {
            if let Some(nodes) = by_word.get(&w.prefix(l)) {
                for &u in nodes {
                    if u != v && !ancestors.contains(&u) && !(l == w.len() && is_ancestor(tree, v, u)) {
                        out.push((u, v));
                    }
                }
            }
        }
    }
    out
}

fn is_ancestor(tree: &QRTree, a: usize, v: usize) -> bool {
    let mut p = tree.nodes[v].parent;
    while let Some(x) = p {
        if x == a {
            return true;
        }
        p = tree.nodes[x].parent;
    }
    false
}

/// Sibling groups containing two children within `2 Delta_n + 2 R`.
pub fn sibling_violations(tree: &QRTree, schedule: &Schedule) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for l in 1..=tree.depth() {
        for (_, a, b) in tree.sibling_groups(l) {
            let stage = &schedule.stages[tree.nodes[a].stage - 1];
            let words: Vec<Word> = tree.nodes[a..b].iter().map(|n| n.word.clone()).collect();
            if let Some((i, j)) = separation_violation(&words, separation_threshold(stage.delta, schedule.tau)) {
                out.push((a + i, a + j));
            }
        }
    }
    out
}

/// Triples of boundary points breaking the ultrametric inequality.
pub fn ultrametric_violations(points: &[Word], params: &VisualParams) -> Result<usize> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = visual_distance(&points[i], &points[j], params)?;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut bad = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k && d[i * n + k] > d[i * n + j].max(d[j * n + k]) {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}
