//! Floyd metric on Cayley balls of free groups and boundary experiments.
//!
//! Floyd lengths are kept as sorted exponent lists so the identities below
//! can be decided without rounding.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dimension::{box_counting_at, BoxCount};
use crate::error::{Error, Result};
use crate::qrtree::QRTree;
use crate::words::{lcp, Letter, Word};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloydParams {
    pub lambda: f64,
    pub basepoint: Word,
    pub rank: usize,
}

impl FloydParams {
    pub fn new(lambda: f64, basepoint: Word, rank: usize) -> Result<FloydParams> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain(format!("lambda must lie in (0,1), got {lambda}")));
        }
        if rank < basepoint.min_rank() {
            return Err(Error::Domain(format!("basepoint {basepoint} needs rank {}", basepoint.min_rank())));
        }
        Ok(FloydParams { lambda, basepoint, rank })
    }

    /// `-log lambda`, the matching visual parameter.
    pub fn epsilon(&self) -> f64 {
        -self.lambda.ln()
    }

    pub fn with_basepoint(&self, o: Word) -> FloydParams {
        FloydParams { basepoint: o, ..self.clone() }
    }
}

/// A Floyd length `sum_e lambda^{n_e}` stored as its sorted exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloydLength {
    pub exponents: Vec<u32>,
}

impl FloydLength {
    pub fn from_exponents(mut exponents: Vec<u32>) -> FloydLength {
        exponents.sort_unstable();
        FloydLength { exponents }
    }

    pub fn value(&self, lambda: f64) -> f64 {
        self.exponents.iter().rev().map(|&n| lambda.powi(n as i32)).sum()
    }

    /// Termwise `other_i <= self_i + shift` after sorting.
    pub fn dominated_by_shift(&self, other: &FloydLength, shift: u32) -> bool {
        self.exponents.len() == other.exponents.len() && self.exponents.iter().zip(&other.exponents).all(|(a, b)| *b <= a + shift)
    }

    /// Multiset inclusion.
    pub fn is_subset_of(&self, other: &FloydLength) -> bool {
        let mut j = 0;
        for &a in &self.exponents {
            while j < other.exponents.len() && other.exponents[j] < a {
                j += 1;
            }
            if j == other.exponents.len() || other.exponents[j] != a {
                return false;
            }
            j += 1;
        }
        true
    }
}

fn edge_exponent(o: &Word, x: &Word, y: &Word) -> u32 {
    o.dist(x).min(o.dist(y)) as u32
}

/// Exponents of the edges of a vertex path.
pub fn path_length(path: &[Word], o: &Word) -> Result<FloydLength> {
    let mut e = Vec::with_capacity(path.len().saturating_sub(1));
    for p in path.windows(2) {
        if p[0].dist(&p[1]) != 1 {
            return Err(Error::Domain(format!("{} and {} are not adjacent", p[0], p[1])));
        }
        e.push(edge_exponent(o, &p[0], &p[1]));
    }
    Ok(FloydLength::from_exponents(e))
}

/// `sum lambda^{d(o,e)}` over the edges of a vertex path.
pub fn floyd_length(path: &[Word], params: &FloydParams) -> Result<f64> {
    Ok(path_length(path, &params.basepoint)?.value(params.lambda))
}

/// Vertices of the geodesic from `x` to `y`.
pub fn geodesic(x: &Word, y: &Word) -> Vec<Word> {
    let c = lcp(x, y);
    let mut out: Vec<Word> = (c..=x.len()).rev().map(|i| x.prefix(i)).collect();
    out.extend((c + 1..=y.len()).map(|i| y.prefix(i)));
    out
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Radius-`R` ball around the basepoint with edge weights `lambda^{d(o,e)}`.
#[derive(Clone, Debug)]
pub struct WeightedBall {
    pub params: FloydParams,
    pub radius: usize,
    pub vertices: Vec<Word>,
    pub depth: Vec<u32>,
    index: HashMap<Word, usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FloydDistance {
    pub value: f64,
    pub truncation_bound: f64,
    pub length: FloydLength,
    pub path: Vec<Word>,
    pub certified: bool,
}

impl WeightedBall {
    pub fn build(params: &FloydParams, radius: usize) -> WeightedBall {
        let o = &params.basepoint;
        let mut vertices = vec![o.clone()];
        let mut depth = vec![0u32];
        let mut frontier = vec![Word::identity()];
        for d in 1..=radius {
            let mut next = Vec::new();
            for w in &frontier {
                for x in Letter::all(params.rank) {
                    if w.last() == Some(x.inverse()) {
                        continue;
                    }
                    let mut c = w.clone();
                    c.push(x);
                    vertices.push(o.mul(&c));
                    depth.push(d as u32);
                    next.push(c);
                }
            }
            frontier = next;
        }
        let index = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        WeightedBall { params: params.clone(), radius, vertices, depth, index }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: &Word) -> bool {
        self.index.contains_key(v)
    }

    /// `2 lambda^R / (1 - lambda)`.
    pub fn truncation_bound(&self) -> f64 {
        2.0 * self.params.lambda.powi(self.radius as i32) / (1.0 - self.params.lambda)
    }

    /// Shortest weighted path from `x` to `y` through the ball.
    pub fn distance(&self, x: &Word, y: &Word) -> Result<FloydDistance> {
        let (&s, &t) = match (self.index.get(x), self.index.get(y)) {
            (Some(s), Some(t)) => (s, t),
            _ => return Err(Error::Horizon(format!("{x} or {y} lies outside the radius-{} ball", self.radius))),
        };
        let lambda = self.params.lambda;
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut prev = vec![usize::MAX; self.len()];
        let mut heap = BinaryHeap::from([Entry(0.0, s)]);
        dist[s] = 0.0;
        while let Some(Entry(d, u)) = heap.pop() {
            if u == t {
                break;
            }
            if d > dist[u] {
                continue;
            }
            for x in Letter::all(self.params.rank) {
                let mut w = self.vertices[u].clone();
                w.push(x);
                if let Some(&v) = self.index.get(&w) {
                    let nd = d + lambda.powi(self.depth[u].min(self.depth[v]) as i32);
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                        heap.push(Entry(nd, v));
                    }
                }
            }
        }
        let mut path = vec![self.vertices[t].clone()];
        let mut c = t;
        while c != s {
            c = prev[c];
            path.push(self.vertices[c].clone());
        }
        path.reverse();
        let length = path_length(&path, &self.params.basepoint)?;
        let half = self.radius as f64 / 2.0;
        let certified = self.depth[s] as f64 <= half && self.depth[t] as f64 <= half;
        Ok(FloydDistance { value: length.value(lambda), truncation_bound: self.truncation_bound(), length, path, certified })
    }
}

/// Builds the radius-`R` ball and searches it.
pub fn floyd_distance(x: &Word, y: &Word, params: &FloydParams, radius: usize) -> Result<FloydDistance> {
    WeightedBall::build(params, radius).distance(x, y)
}

/// Floyd distance between two boundary points given by diverging prefixes,
/// basepoint the identity. The tails are geodesic rays, so
/// `value + truncation_bound` is the exact distance.
pub fn boundary_distance(xi: &Word, eta: &Word, lambda: f64) -> Result<FloydDistance> {
    let c = lcp(xi, eta);
    if c == xi.len() || c == eta.len() {
        return Err(Error::Horizon("insufficient resolution: prefixes do not diverge".into()));
    }
    let path = geodesic(xi, eta);
    let length = path_length(&path, &Word::identity())?;
    let tail = (lambda.powi(xi.len() as i32) + lambda.powi(eta.len() as i32)) / (1.0 - lambda);
    Ok(FloydDistance { value: length.value(lambda), truncation_bound: tail, length, path, certified: true })
}

pub fn random_word<R: Rng>(rank: usize, n: usize, rng: &mut R) -> Word {
    let mut w = Word::identity();
    while w.len() < n {
        let x = Letter::from_code(rng.gen_range(0..2 * rank));
        if w.last() != Some(x.inverse()) {
            w.push(x);
        }
    }
    w
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub trials: usize,
    pub failures: usize,
    /// Trials decided by termwise exponent comparison alone.
    pub exact: usize,
    pub worst: f64,
}

/// `rho^o(x,y) = rho^{go}(gx,gy)` on random triples with `|x|,|y| <= R/2`.
pub fn check_equivariance<R: Rng>(lambda: f64, rank: usize, radius: usize, trials: usize, rng: &mut R) -> Result<IdentityReport> {
    let half = radius / 2;
    let mut failures = 0;
    for _ in 0..trials {
        let o = random_word(rank, rng.gen_range(0..=3), rng);
        let x = o.mul(&random_word(rank, rng.gen_range(0..=half), rng));
        let y = o.mul(&random_word(rank, rng.gen_range(0..=half), rng));
        let g = random_word(rank, rng.gen_range(0..=6), rng);
        let p = FloydParams::new(lambda, o.clone(), rank)?;
        let a = floyd_distance(&x, &y, &p, radius)?;
        let b = floyd_distance(&g.mul(&x), &g.mul(&y), &p.with_basepoint(g.mul(&o)), radius)?;
        if a.length != b.length || a.value != b.value {
            failures += 1;
        }
    }
    Ok(IdentityReport { trials, failures, exact: trials, worst: 0.0 })
}

/// `lambda^{d(o,o')} <= rho^o(x,y) / rho^{o'}(x,y) <= lambda^{-d(o,o')}`.
pub fn check_basepoint_bound<R: Rng>(lambda: f64, rank: usize, radius: usize, trials: usize, rng: &mut R) -> Result<IdentityReport> {
    let half = radius / 2;
    let (mut failures, mut exact, mut worst) = (0, 0, 0.0f64);
    for _ in 0..trials {
        let o = random_word(rank, rng.gen_range(0..=2), rng);
        let o2 = o.mul(&random_word(rank, rng.gen_range(0..=2), rng));
        let x = o.mul(&random_word(rank, rng.gen_range(1..=half), rng));
        let y = o.mul(&random_word(rank, rng.gen_range(1..=half), rng));
        if x == y {
            continue;
        }
        let d = o.dist(&o2) as u32;
        let p = FloydParams::new(lambda, o.clone(), rank)?;
        let a = floyd_distance(&x, &y, &p, radius)?;
        let b = floyd_distance(&x, &y, &p.with_basepoint(o2), radius + 2 * d as usize)?;
        let termwise = a.length.dominated_by_shift(&b.length, d) && b.length.dominated_by_shift(&a.length, d);
        let ratio = a.value / b.value;
        let lo = lambda.powi(d as i32);
        worst = worst.max((ratio.ln().abs() - (d as f64) * -lambda.ln()).max(0.0));
        if termwise {
            exact += 1;
        } else if ratio < lo || ratio > 1.0 / lo {
            failures += 1;
        }
    }
    Ok(IdentityReport { trials, failures, exact, worst })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairRow {
    pub pair_id: usize,
    pub floyd_dist: f64,
    pub visual_dist: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub lambda: f64,
    pub rows: Vec<PairRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `[(1-lambda)/(1+lambda), (1+lambda)/(1-lambda)]`.
    pub bracket: (f64, f64),
    pub within: usize,
}

impl RatioReport {
    pub fn passed(&self) -> bool {
        self.within == self.rows.len()
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("pair_id,floyd_dist,visual_dist,ratio\n");
        for r in &self.rows {
            s += &format!("{},{},{},{}\n", r.pair_id, r.floyd_dist, r.visual_dist, r.ratio);
        }
        s
    }
}

/// Floyd distance against `e^{-eps L}`, `eps = -log lambda`, on random
/// boundary pairs resolved to `resolution` letters.
pub fn floyd_visual_ratio<R: Rng>(lambda: f64, rank: usize, pairs: usize, resolution: usize, rng: &mut R) -> Result<RatioReport> {
    let bracket = ((1.0 - lambda) / (1.0 + lambda), (1.0 + lambda) / (1.0 - lambda));
    let mut rows = Vec::with_capacity(pairs);
    while rows.len() < pairs {
        let xi = random_word(rank, resolution, rng);
        let eta = random_word(rank, resolution, rng);
        let l = lcp(&xi, &eta);
        if l + 1 >= resolution {
            continue;
        }
        let f = boundary_distance(&xi, &eta, lambda)?;
        let floyd_dist = f.value + f.truncation_bound;
        let visual_dist = lambda.powi(l as i32);
        rows.push(PairRow { pair_id: rows.len(), floyd_dist, visual_dist, ratio: floyd_dist / visual_dist });
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let within = rows.iter().filter(|r| r.ratio >= bracket.0 && r.ratio <= bracket.1).count();
    Ok(RatioReport { lambda, rows, min_ratio, max_ratio, bracket, within })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VisibilityRow {
    pub kappa: f64,
    pub phi: Option<usize>,
    pub bound: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VisibilityProfile {
    pub c: f64,
    pub lambda: f64,
    pub rows: Vec<VisibilityRow>,
    pub monotone: bool,
    /// Largest `|gamma|` seen, the measured length threshold.
    pub max_length: usize,
    pub bound_ok: bool,
}

/// A path along `geodesic(x, y)` with a backtracking spike of length
/// `floor(2(c-1))` every four steps.
fn quasi_geodesic<R: Rng>(x: &Word, y: &Word, c: f64, rank: usize, rng: &mut R) -> Vec<Word> {
    let g = geodesic(x, y);
    let spike = (2.0 * (c - 1.0)).floor().max(0.0) as usize;
    if spike == 0 {
        return g;
    }
    let mut out = Vec::new();
    for (i, v) in g.iter().enumerate() {
        out.push(v.clone());
        if i % 4 == 2 {
            let mut t = v.clone();
            let mut up = Vec::new();
            while up.len() < spike {
                let z = Letter::from_code(rng.gen_range(0..2 * rank));
                let mut n = t.clone();
                n.push(z);
                if n.len() > t.len() {
                    t = n;
                    up.push(t.clone());
                }
            }
            out.extend(up.iter().cloned());
            out.extend(up.iter().rev().skip(1).cloned());
            out.push(v.clone());
        }
    }
    out
}

/// `phi(kappa)`: the largest `d(e, gamma)` over sampled c-quasi-geodesics of
/// Floyd length at least `kappa`, basepoint the identity.
pub fn visibility_profile<R: Rng>(c: f64, kappa_grid: &[f64], sample_size: usize, lambda: f64, rank: usize, max_len: usize, rng: &mut R) -> Result<VisibilityProfile> {
    let o = Word::identity();
    let mut samples = Vec::with_capacity(sample_size);
    let mut max_length = 0;
    for _ in 0..sample_size {
        let x = random_word(rank, rng.gen_range(1..=max_len), rng);
        let y = random_word(rank, rng.gen_range(1..=max_len), rng);
        let path = quasi_geodesic(&x, &y, c, rank, rng);
        let len = path_length(&path, &o)?.value(lambda);
        let d = path.iter().map(Word::len).min().unwrap_or(0);
        max_length = max_length.max(path.len() - 1);
        samples.push((len, d));
    }
    let rows: Vec<VisibilityRow> = kappa_grid
        .iter()
        .map(|&kappa| {
            let hit: Vec<usize> = samples.iter().filter(|s| s.0 >= kappa).map(|s| s.1).collect();
            VisibilityRow { kappa, phi: hit.iter().copied().max(), bound: (kappa * (1.0 - lambda) / 2.0).ln() / lambda.ln(), samples: hit.len() }
        })
        .collect();
    let mut sorted: Vec<&VisibilityRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
    let monotone = sorted.windows(2).all(|w| w[1].phi.unwrap_or(0) <= w[0].phi.unwrap_or(usize::MAX));
    let bound_ok = c > 1.0 || rows.iter().all(|r| r.phi.map_or(true, |p| p as f64 <= r.bound + 1e-9));
    Ok(VisibilityProfile { c, lambda, rows, monotone, max_length, bound_ok })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShadowBallReport {
    pub r: f64,
    /// Largest `rho(xi, eta) / r` over sampled `eta` in the shadow.
    pub c1_empirical: f64,
    /// Smallest `rho(xi, eta) / r` over sampled `eta` outside the shadow.
    pub c2_empirical: f64,
    pub c1_exact: f64,
    pub c2_exact: f64,
    pub inside: usize,
    pub outside: usize,
    pub inclusions_ok: bool,
    /// Floyd diameter of the shadow over its visual diameter.
    pub diameter_ratio: f64,
    pub within_claimed: bool,
    pub kappa: f64,
}

/// Shadow of `v` (the cylinder at `v`) against Floyd balls about `xi`.
pub fn shadow_ball_compare<R: Rng>(v: &Word, xi: &Word, lambda: f64, rank: usize, samples: usize, rng: &mut R) -> Result<ShadowBallReport> {
    if !v.is_prefix_of(xi) || xi.len() <= v.len() + 1 {
        return Err(Error::Domain(format!("{v} must be a proper prefix of {xi}")));
    }
    let n = v.len();
    let r = lambda.powi(n as i32);
    let (mut c1, mut c2, mut inside, mut outside) = (0.0f64, f64::INFINITY, 0, 0);
    for i in 0..samples {
        let split = if i % 2 == 0 { rng.gen_range(n..xi.len()) } else if n == 0 { continue } else { rng.gen_range(0..n) };
        let mut eta = xi.prefix(split);
        let bad = xi.letters()[split];
        while eta.len() < xi.len() {
            let z = Letter::from_code(rng.gen_range(0..2 * rank));
            if (eta.len() > split || z != bad) && eta.last() != Some(z.inverse()) {
                eta.push(z);
            }
        }
        let f = boundary_distance(xi, &eta, lambda)?;
        let ratio = (f.value + f.truncation_bound) / r;
        if v.is_prefix_of(&eta) {
            inside += 1;
            c1 = c1.max(ratio);
        } else {
            outside += 1;
            c2 = c2.min(ratio);
        }
    }
    let c1_exact = 2.0 / (1.0 - lambda);
    let c2_exact = 2.0 / (lambda * (1.0 - lambda));
    let inclusions_ok = c1 <= c1_exact * (1.0 + 1e-12) && (outside == 0 || c2 >= c2_exact * (1.0 - 1e-12));
    let kappa = kappa_at(xi, n, lambda);
    Ok(ShadowBallReport { r, c1_empirical: c1, c2_empirical: c2, c1_exact, c2_exact, inside, outside, inclusions_ok, diameter_ratio: c1_exact, within_claimed: c1_exact <= (1.0 + lambda) / (1.0 - lambda), kappa })
}

/// `rho^v(1, xi)` for `v` the length-`n` prefix of the ray `xi`.
pub fn kappa_at(xi: &Word, n: usize, lambda: f64) -> f64 {
    let v = xi.prefix(n);
    let path: Vec<Word> = (0..=xi.len()).map(|i| xi.prefix(i)).collect();
    let head = path_length(&path, &v).map(|l| l.value(lambda)).unwrap_or(0.0);
    head + lambda.powi((xi.len() - n) as i32) / (1.0 - lambda)
}

/// Smallest `rho^{v}(1, xi)` over the given prefix lengths of a ray.
pub fn kappa_audit(xi: &Word, positions: &[usize], lambda: f64) -> f64 {
    positions.iter().filter(|&&p| p < xi.len()).map(|&p| kappa_at(xi, p, lambda)).fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FloydDimensionReport {
    pub lambda: f64,
    pub omega: f64,
    pub target: f64,
    pub boxes: BoxCount,
}

impl FloydDimensionReport {
    pub fn error(&self) -> f64 {
        (self.boxes.slope - self.target).abs()
    }
}

/// Box counting of the deepest level under Floyd radii
/// `r_m = 2 lambda^m / (1 - lambda)`, against `omega / (-log lambda)`.
pub fn floyd_dimension_experiment(tree: &QRTree, lambda: f64, omega: f64) -> Result<FloydDimensionReport> {
    let leaves: Vec<Word> = tree.level(tree.depth()).iter().map(|n| n.word.clone()).collect();
    let m = leaves.iter().map(Word::len).min().unwrap_or(0);
    let eps = -lambda.ln();
    let radii: Vec<(f64, usize)> = (1..=m).map(|j| (j as f64 * eps - (2.0 / (1.0 - lambda)).ln(), j)).collect();
    let boxes = box_counting_at(&leaves, &radii, eps)?;
    Ok(FloydDimensionReport { lambda, omega, target: omega / eps, boxes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    fn p(lambda: f64) -> FloydParams {
        FloydParams::new(lambda, Word::identity(), 2).unwrap()
    }

    #[test]
    fn lengths() {
        let path = [w(""), w("a"), w("ab"), w("abA")];
        assert_eq!(floyd_length(&path, &p(0.5)).unwrap(), 1.75);
        assert_eq!(floyd_length(&[w("abab"), w("ababa")], &p(0.5)).unwrap(), 0.0625);
        assert!(floyd_length(&[w("a"), w("b")], &p(0.5)).is_err());
        assert!(FloydParams::new(1.0, Word::identity(), 2).is_err());
        let ray: Vec<Word> = (0..=60).map(|i| w("ab").pow(30).prefix(i)).collect();
        assert!((floyd_length(&ray, &p(0.5)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ball_distances_match_geodesics() {
        let ball = WeightedBall::build(&p(0.5), 6);
        assert_eq!(ball.len(), 1 + 4 + 12 + 36 + 108 + 324 + 972);
        let d = ball.distance(&w(""), &w("abA")).unwrap();
        assert_eq!(d.value, 1.75);
        assert!(d.certified);
        let d = ball.distance(&w("abab"), &w("aBB")).unwrap();
        assert_eq!(d.path, geodesic(&w("abab"), &w("aBB")));
        assert!(!d.certified);
        assert_eq!(ball.truncation_bound(), 2.0 * 0.5f64.powi(6) / 0.5);
        assert!(ball.distance(&w("aaaaaaa"), &w("")).is_err());
    }

    #[test]
    fn triangle_inequality_in_ball() {
        let ball = WeightedBall::build(&FloydParams::new(0.6, w("ab"), 2).unwrap(), 5);
        let pts: Vec<Word> = ball.vertices.iter().step_by(37).cloned().collect();
        for x in &pts {
            for y in &pts {
                for z in &pts {
                    let xz = ball.distance(x, z).unwrap().length;
                    let mut both = ball.distance(x, y).unwrap().length.exponents;
                    both.extend(ball.distance(y, z).unwrap().length.exponents);
                    assert!(xz.is_subset_of(&FloydLength::from_exponents(both)));
                }
            }
        }
    }

    #[test]
    fn equivariance_and_basepoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = check_equivariance(0.5, 2, 6, 60, &mut rng).unwrap();
        assert_eq!(e.failures, 0);
        let b = check_basepoint_bound(1f64 / std::f64::consts::E, 2, 6, 60, &mut rng).unwrap();
        assert_eq!(b.failures, 0);
    }

    #[test]
    fn boundary_ratio_is_two_over_one_minus_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for lambda in [0.5, 1f64 / std::f64::consts::E] {
            let r = floyd_visual_ratio(lambda, 2, 200, 40, &mut rng).unwrap();
            let want = 2.0 / (1.0 - lambda);
            assert!((r.min_ratio - want).abs() < 1e-9 && (r.max_ratio - want).abs() < 1e-9);
            assert!(r.max_ratio > r.bracket.1);
            assert!(r.csv().starts_with("pair_id,floyd_dist,visual_dist,ratio\n"));
        }
    }

    #[test]
    fn visibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = [0.01, 0.05, 0.1, 0.5, 1.0, 1.5];
        for c in [1.0, 2.0] {
            let v = visibility_profile(c, &grid, 400, 0.5, 2, 12, &mut rng).unwrap();
            assert!(v.monotone);
            assert!(v.bound_ok);
        }
        let through = [w("Ab"), w("A"), w(""), w("a"), w("ab")];
        assert_eq!(through.iter().map(Word::len).min(), Some(0));
    }

    #[test]
    fn shadows() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xi = random_word(2, 40, &mut rng);
        for lambda in [0.5, 0.3] {
            let s = shadow_ball_compare(&xi.prefix(8), &xi, lambda, 2, 400, &mut rng).unwrap();
            assert!(s.inclusions_ok && s.inside > 0 && s.outside > 0);
            assert!((s.c1_empirical - s.c1_exact).abs() < 1e-9);
            assert!(!s.within_claimed);
            assert!(s.kappa >= 1.0 / (1.0 - lambda));
        }
        let s = shadow_ball_compare(&Word::identity(), &xi, 0.5, 2, 100, &mut rng).unwrap();
        assert_eq!(s.outside, 0);
        assert!(kappa_audit(&xi, &[0, 5, 10, 20], 0.5) >= 2.0);
    }

    #[test]
    fn floyd_dimension() {
        let t = QRTree::cayley_ball(2, 8);
        let mut slopes = Vec::new();
        for lambda in [1.0 / std::f64::consts::E, (-2f64).exp(), 0.5] {
            let r = floyd_dimension_experiment(&t, lambda, 3f64.ln()).unwrap();
            assert!(r.error() < 1e-9, "{lambda} {}", r.boxes.slope);
            slopes.push(r.boxes.slope * -lambda.ln());
        }
        assert!(slopes.iter().all(|s| (s - 3f64.ln()).abs() < 1e-9));
        let line = QRTree::star(&[w("a").pow(8)]);
        assert_eq!(floyd_dimension_experiment(&line, 0.5, 0.0).unwrap().boxes.slope, 0.0);
    }
}
