//! Arcs between immersed loops in finite cores, and the double-coset map
//! `g -> H f1 g f2 K` in the free group.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphcore::{hashimoto_radius, FiniteGraphCore};
use crate::myrberg::{separator_triple, SeparatorTriple};
use crate::words::{concat, projection_diameter, SphereIter, Word};

/// A closed non-backtracking cycle of directed edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImmersedLoop {
    pub edges: Vec<usize>,
}

impl ImmersedLoop {
    pub fn new(core: &FiniteGraphCore, edges: Vec<usize>) -> Result<ImmersedLoop> {
        if edges.is_empty() {
            return Err(Error::Domain("empty loop".into()));
        }
        let n = edges.len();
        for i in 0..n {
            let (e, f) = (edges[i], edges[(i + 1) % n]);
            if e >= core.directed_edges() {
                return Err(Error::Domain(format!("edge {e} out of range")));
            }
            if core.head(e) != core.tail(f) {
                return Err(Error::Domain(format!("edges {e} and {f} are not consecutive")));
            }
            if f == e ^ 1 {
                return Err(Error::Domain(format!("loop backtracks at {e}")));
            }
        }
        Ok(ImmersedLoop { edges })
    }

    pub fn reversed(&self) -> ImmersedLoop {
        ImmersedLoop { edges: self.edges.iter().rev().map(|e| e ^ 1).collect() }
    }

    pub fn vertices(&self, core: &FiniteGraphCore) -> HashSet<usize> {
        self.edges.iter().map(|&e| core.tail(e)).collect()
    }

    /// Undirected edge indices used by the loop.
    pub fn edge_set(&self) -> HashSet<usize> {
        self.edges.iter().map(|e| e / 2).collect()
    }
}

struct Admissible {
    first: Vec<bool>,
    last: Vec<bool>,
}

fn admissible(core: &FiniteGraphCore, gamma: &ImmersedLoop) -> Admissible {
    let verts = gamma.vertices(core);
    let used = gamma.edge_set();
    let m = core.directed_edges();
    Admissible {
        first: (0..m).map(|e| !used.contains(&(e / 2)) && verts.contains(&core.tail(e))).collect(),
        last: (0..m).map(|e| !used.contains(&(e / 2)) && verts.contains(&core.head(e))).collect(),
    }
}

/// `counts[l]` for `l <= max_len`: arcs of exactly `l` edges, by transfer matrix.
pub fn arc_counts(core: &FiniteGraphCore, gamma: &ImmersedLoop, max_len: usize) -> Vec<u128> {
    let adm = admissible(core, gamma);
    let mut x: Vec<u128> = adm.last.iter().map(|&b| b as u128).collect();
    let mut out = vec![0u128];
    for l in 1..=max_len {
        if l > 1 {
            x = core.nb_apply(&x);
        }
        out.push((0..x.len()).filter(|&e| adm.first[e]).map(|e| x[e]).sum());
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcFamily {
    pub source: ImmersedLoop,
    pub target: ImmersedLoop,
    pub t: usize,
    pub delta: usize,
    pub arcs: Vec<Vec<usize>>,
    /// Exact count over the window, independent of truncation.
    pub count: u128,
    pub truncated: bool,
}

/// Arcs from `gamma` to itself with length in `[t - delta, t + delta]`,
/// listed until `budget` arcs have been produced.
pub fn enumerate_arcs(core: &FiniteGraphCore, gamma: &ImmersedLoop, t: usize, delta: usize, budget: usize) -> Result<ArcFamily> {
    if t <= delta {
        return Err(Error::Domain(format!("need t > Delta, got t={t}, Delta={delta}")));
    }
    let adm = admissible(core, gamma);
    let counts = arc_counts(core, gamma, t + delta);
    let count = counts[t - delta..].iter().sum();
    let mut arcs = Vec::new();
    let mut truncated = false;
    let mut path = Vec::with_capacity(t + delta);
    fn dfs(core: &FiniteGraphCore, adm: &Admissible, lo: usize, hi: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, budget: usize, truncated: &mut bool) {
        if *truncated {
            return;
        }
        let e = *path.last().unwrap();
        if path.len() >= lo && adm.last[e] {
            if out.len() == budget {
                *truncated = true;
                return;
            }
            out.push(path.clone());
        }
        if path.len() == hi {
            return;
        }
        for f in core.successors(e).collect::<Vec<_>>() {
            path.push(f);
            dfs(core, adm, lo, hi, path, out, budget, truncated);
            path.pop();
        }
    }
    for e in (0..core.directed_edges()).filter(|&e| adm.first[e]) {
        path.push(e);
        dfs(core, &adm, t - delta, t + delta, &mut path, &mut arcs, budget, &mut truncated);
        path.pop();
    }
    Ok(ArcFamily { source: gamma.clone(), target: gamma.clone(), t, delta, arcs, count, truncated })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcRow {
    pub t: usize,
    pub count: u128,
    /// `count * e^{-omega t}`.
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcGrowthReport {
    pub core_id: String,
    pub omega: f64,
    pub epsilon: f64,
    pub delta: usize,
    pub rows: Vec<ArcRow>,
    pub slope: f64,
    pub verdict: ArcVerdict,
}

impl ArcGrowthReport {
    pub fn bracket(&self, from: usize) -> (f64, f64) {
        self.rows.iter().filter(|r| r.t >= from).fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.rate), hi.max(r.rate)))
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("t,count,rate\n");
        for r in &self.rows {
            s += &format!("{},{},{}\n", r.t, r.count, r.rate);
        }
        s
    }
}

/// Window counts for `t <= t_max`, their log-slope over the upper half of
/// the range, and a verdict against `omega - epsilon`. Counts above `budget`
/// make the verdict inconclusive.
pub fn arc_growth_check(core: &FiniteGraphCore, gamma: &ImmersedLoop, t_max: usize, delta: usize, epsilon: f64, budget: u128) -> Result<ArcGrowthReport> {
    if t_max < 8 {
        return Err(Error::Domain("t_max must be at least 8".into()));
    }
    let omega = hashimoto_radius(core, 1e-12)?.value.ln();
    let counts = arc_counts(core, gamma, t_max + delta);
    let mut rows = Vec::new();
    let mut truncated = false;
    for t in delta + 1..=t_max {
        let count: u128 = counts[t - delta..=t + delta].iter().sum();
        truncated |= count > budget;
        rows.push(ArcRow { t, count, rate: count as f64 * (-omega * t as f64).exp() });
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.t >= t_max / 2 && r.count > 0).map(|r| (r.t as f64, (r.count as f64).ln())).collect();
    let slope = ls_slope(&pts);
    let verdict = if truncated {
        ArcVerdict::Inconclusive
    } else if slope >= omega - epsilon {
        ArcVerdict::Pass
    } else {
        ArcVerdict::Fail
    };
    Ok(ArcGrowthReport { core_id: core.id.clone(), omega, epsilon, delta, rows, slope, verdict })
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Separators `(f1, f2)` such that `a f1 g f2 b` has every junction
/// cancellation at most `tau`.
pub fn extend_with_separators(g: &Word, a: &Word, b: &Word, f: &SeparatorTriple) -> Result<(Word, Word)> {
    let o = Word::identity();
    let ok = |i: usize, x: &Word, y: &Word| {
        let ax = f.axis(i);
        projection_diameter(&ax, (&o, x)) <= f.tau && projection_diameter(&ax, (&o, y)) <= f.tau
    };
    let i1 = (0..3).find(|&i| ok(i, &a.inverse(), g)).ok_or_else(|| Error::Construction(format!("no left separator for {g}")))?;
    let i2 = (0..3).find(|&i| ok(i, &g.inverse(), b)).ok_or_else(|| Error::Construction(format!("no right separator for {g}")))?;
    let (f1, f2) = (f.elements[i1].clone(), f.elements[i2].clone());
    let c = concat(&[a, &f1, g, &f2, b]);
    if c.max() > f.tau {
        return Err(Error::Construction(format!("junction cancellation {} exceeds tau {} for {g}", c.max(), f.tau)));
    }
    Ok((f1, f2))
}

/// Least `(length, lex)` representative of `<h> w <k>`.
pub fn canonical_double_coset(h: &Word, w: &Word, k: &Word) -> Word {
    let range = (w.len() + h.len() + k.len()) as i64;
    let mut best = w.clone();
    for i in -range..=range {
        let left = h.pow(i).mul(w);
        for j in -range..=range {
            let x = left.mul(&k.pow(j));
            if x < best {
                best = x;
            }
        }
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoubleCosetReport {
    pub h: Word,
    pub k: Word,
    pub n: usize,
    pub delta: usize,
    pub separators: SeparatorTriple,
    pub annulus_size: usize,
    pub distinct: usize,
    /// `histogram[s]` double cosets have exactly `s` preimages.
    pub histogram: BTreeMap<usize, usize>,
    pub max_fiber: usize,
    pub n_bound: usize,
    pub m_bound: usize,
    /// Largest `| d(Ho, f1 g f2 K o) - d(o, g o) |`.
    pub delta0: usize,
    pub truncated: bool,
    pub passed: bool,
}

/// Pushes the annulus `A(n, Delta)` through `g -> H f1 g f2 K` and audits
/// the fibres against `M = 9 N^2`.
pub fn double_coset_audit(h: &Word, k: &Word, n: usize, delta: usize, budget: usize) -> Result<DoubleCosetReport> {
    if h.is_empty() || k.is_empty() {
        return Err(Error::Domain("H and K must be infinite cyclic".into()));
    }
    let rank = h.min_rank().max(k.min_rank()).max(2);
    let base = separator_triple(rank, 1, &[h.clone(), k.clone()])?;
    let f = base.with_min_length(2 * base.tau + 3);
    let mut images: BTreeMap<Word, usize> = BTreeMap::new();
    let mut annulus_size = 0;
    let mut delta0 = 0;
    let mut truncated = false;
    'outer: for len in n.saturating_sub(delta).max(1)..=n + delta {
        for g in SphereIter::new(rank, len) {
            if annulus_size == budget {
                truncated = true;
                break 'outer;
            }
            annulus_size += 1;
            let (f1, f2) = extend_with_separators(&g, h, k, &f)?;
            let c = canonical_double_coset(h, &f1.mul(&g).mul(&f2), k);
            delta0 = delta0.max(c.len().abs_diff(g.len()));
            *images.entry(c).or_default() += 1;
        }
    }
    let mut histogram = BTreeMap::new();
    for &s in images.values() {
        *histogram.entry(s).or_default() += 1;
    }
    let max_fiber = images.values().copied().max().unwrap_or(0);
    let n_bound = [h, k].iter().map(|u| (-(2 * f.tau as i64)..=2 * f.tau as i64).filter(|&i| u.pow(i).len() <= 2 * f.tau).count()).max().unwrap();
    let m_bound = 9 * n_bound * n_bound;
    let distinct = images.len();
    let passed = max_fiber <= m_bound && distinct * m_bound >= annulus_size;
    Ok(DoubleCosetReport {
        h: h.clone(),
        k: k.clone(),
        n,
        delta,
        separators: f,
        annulus_size,
        distinct,
        histogram,
        max_fiber,
        n_bound,
        m_bound,
        delta0,
        truncated,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{shortlex, Letter};

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    fn brute_arcs(core: &FiniteGraphCore, gamma: &ImmersedLoop, l: usize) -> u128 {
        let verts = gamma.vertices(core);
        let used = gamma.edge_set();
        let m = core.directed_edges();
        let mut count = 0;
        let mut idx = vec![0usize; l];
        loop {
            let ok = (0..l).all(|i| i == 0 || core.tail(idx[i]) == core.head(idx[i - 1]) && idx[i] != idx[i - 1] ^ 1)
                && !used.contains(&(idx[0] / 2))
                && !used.contains(&(idx[l - 1] / 2))
                && verts.contains(&core.tail(idx[0]))
                && verts.contains(&core.head(idx[l - 1]));
            count += ok as u128;
            let mut i = l;
            loop {
                if i == 0 {
                    return count;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < m {
                    break;
                }
                idx[i] = 0;
            }
        }
    }

    fn theta_loop() -> (FiniteGraphCore, ImmersedLoop) {
        let c = FiniteGraphCore::theta();
        let g = ImmersedLoop::new(&c, vec![0, 3]).unwrap();
        (c, g)
    }

    fn barbell_loop() -> (FiniteGraphCore, ImmersedLoop) {
        let c = FiniteGraphCore::barbell();
        let g = ImmersedLoop::new(&c, vec![0]).unwrap();
        (c, g)
    }

    #[test]
    fn loop_validation() {
        let c = FiniteGraphCore::theta();
        assert!(ImmersedLoop::new(&c, vec![0, 1]).is_err());
        assert!(ImmersedLoop::new(&c, vec![0, 0]).is_err());
        assert!(ImmersedLoop::new(&c, vec![]).is_err());
        let b = FiniteGraphCore::bouquet(2);
        assert!(ImmersedLoop::new(&b, vec![0]).is_ok());
    }

    #[test]
    fn bouquet_single_letter() {
        let c = FiniteGraphCore::bouquet(2);
        let g = ImmersedLoop::new(&c, vec![0]).unwrap();
        let fam = enumerate_arcs(&c, &g, 1, 0, 100).unwrap();
        assert_eq!(fam.count, 2);
        assert_eq!(fam.arcs, vec![vec![2], vec![3]]);
    }

    #[test]
    fn theta_small() {
        let (c, g) = theta_loop();
        for t in 1..=4 {
            let fam = enumerate_arcs(&c, &g, t, 0, 1000).unwrap();
            assert_eq!(fam.count, brute_arcs(&c, &g, t));
            assert_eq!(fam.arcs.len() as u128, fam.count);
            for a in &fam.arcs {
                assert_eq!(a.len(), t);
                assert_eq!(a[0] / 2, 2);
                assert_eq!(a[t - 1] / 2, 2);
            }
        }
        assert!(enumerate_arcs(&c, &g, 2, 2, 10).is_err());
    }

    #[test]
    fn transfer_matches_brute_force() {
        let cores = [theta_loop(), barbell_loop()];
        for (c, g) in &cores {
            let counts = arc_counts(c, g, 7);
            for l in 1..=7 {
                assert_eq!(counts[l], brute_arcs(c, g, l), "{} length {l}", c.id);
            }
        }
    }

    #[test]
    fn dfs_matches_transfer_to_fourteen() {
        let cores = [theta_loop(), barbell_loop()];
        for (c, g) in &cores {
            let counts = arc_counts(c, g, 14);
            for t in 1..=14 {
                let fam = enumerate_arcs(c, g, t, 0, usize::MAX).unwrap();
                assert_eq!(fam.arcs.len() as u128, counts[t]);
            }
        }
    }

    #[test]
    fn reversal_symmetry() {
        let cores = [theta_loop(), barbell_loop(), {
            let c = FiniteGraphCore::bouquet(2);
            let g = ImmersedLoop::new(&c, vec![0]).unwrap();
            (c, g)
        }];
        for (c, g) in &cores {
            for t in 1..=14 {
                let fam = enumerate_arcs(c, g, t, 0, usize::MAX).unwrap();
                let set: HashSet<Vec<usize>> = fam.arcs.iter().cloned().collect();
                let mut palindromes = 0;
                for a in &fam.arcs {
                    let r: Vec<usize> = a.iter().rev().map(|e| e ^ 1).collect();
                    assert!(set.contains(&r));
                    palindromes += (&r == a) as usize;
                }
                if palindromes == 0 {
                    assert_eq!(fam.count % 2, 0);
                }
                assert_eq!(arc_counts(c, &g.reversed(), t)[t], fam.count);
            }
        }
    }

    #[test]
    fn growth_on_shipped_cores() {
        let b = FiniteGraphCore::bouquet(2);
        let cases = [(b.clone(), ImmersedLoop::new(&b, vec![0]).unwrap()), theta_loop(), barbell_loop()];
        for (c, g) in &cases {
            let rep = arc_growth_check(c, g, 18, 0, 0.1, u128::MAX).unwrap();
            assert_eq!(rep.verdict, ArcVerdict::Pass, "{} slope {}", c.id, rep.slope);
        }
        let (c, g) = barbell_loop();
        let rep = arc_growth_check(&c, &g, 18, 1, 0.1, u128::MAX).unwrap();
        let (lo, hi) = rep.bracket(8);
        assert!(lo > 0.0 && hi / lo <= 20.0);
    }

    #[test]
    fn cycle_and_budget() {
        let c = FiniteGraphCore::cycle(5);
        let g = ImmersedLoop::new(&c, vec![0, 2, 4, 6, 8]).unwrap();
        let rep = arc_growth_check(&c, &g, 12, 0, 0.1, u128::MAX).unwrap();
        assert!(rep.rows.iter().all(|r| r.count == 0));
        assert_eq!(rep.slope, 0.0);
        let (c, g) = theta_loop();
        let rep = arc_growth_check(&c, &g, 12, 0, 0.1, 10).unwrap();
        assert_eq!(rep.verdict, ArcVerdict::Inconclusive);
        let fam = enumerate_arcs(&c, &g, 12, 0, 10).unwrap();
        assert!(fam.truncated && fam.arcs.len() == 10);
    }

    #[test]
    fn separators_exhaustive() {
        let f = separator_triple(2, 3, &[]).unwrap();
        let short: Vec<Word> = shortlex(2, 1).take_while(|x| x.len() <= 2).collect();
        for g in shortlex(2, 1).take_while(|x| x.len() <= 6) {
            for a in &short {
                for b in &short {
                    let (f1, f2) = extend_with_separators(&g, a, b, &f).unwrap();
                    let c = concat(&[a, &f1, &g, &f2, b]);
                    assert!(c.max() <= f.tau);
                }
            }
        }
    }

    #[test]
    fn separators_generic_choice() {
        let f = separator_triple(2, 3, &[]).unwrap();
        let g = w("b").pow(5);
        let (f1, f2) = extend_with_separators(&g, &w("ab"), &w("ab"), &f).unwrap();
        assert!(concat(&[&w("ab"), &f1, &g, &f2, &w("ab")]).total() <= 4 * f.tau);
        let first = extend_with_separators(&w("b"), &w("b"), &w("b"), &f).unwrap();
        assert_eq!(first, extend_with_separators(&w("b"), &w("b"), &w("b"), &f).unwrap());
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(canonical_double_coset(&w("a"), &w("aabAbb"), &w("b")), w("bA"));
        assert_eq!(canonical_double_coset(&w("a"), &w("aaabbb"), &w("b")), Word::identity());
        let h = w("a");
        let k = w("b");
        for g in shortlex(2, 0).take_while(|x| x.len() <= 4) {
            let c = canonical_double_coset(&h, &g, &k);
            for (i, j) in [(-2, 1), (3, -1), (1, 2)] {
                let other = h.pow(i).mul(&g).mul(&k.pow(j));
                assert_eq!(canonical_double_coset(&h, &other, &k), c);
            }
        }
    }

    #[test]
    fn audit_small_and_deterministic() {
        let a = Word::letter(Letter::new(0, true));
        let b = Word::letter(Letter::new(1, true));
        let r1 = double_coset_audit(&a, &b, 1, 0, usize::MAX).unwrap();
        assert_eq!(r1.annulus_size, 4);
        assert!(r1.passed);
        let r4 = double_coset_audit(&a, &b, 4, 0, usize::MAX).unwrap();
        let again = double_coset_audit(&a, &b, 4, 0, usize::MAX).unwrap();
        assert_eq!(r4.histogram, again.histogram);
        assert!(r4.passed && r4.distinct * r4.m_bound >= 108);
    }

    #[test]
    fn audit_exhaustive() {
        for (h, k) in [("a", "b"), ("a", "a"), ("ab", "b")] {
            for n in 1..=6 {
                let r = double_coset_audit(&w(h), &w(k), n, 0, usize::MAX).unwrap();
                assert!(r.max_fiber <= r.m_bound, "{h} {k} {n}");
                assert!(r.passed);
            }
        }
    }
}
