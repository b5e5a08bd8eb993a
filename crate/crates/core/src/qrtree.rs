//! Quasi-radial trees: schedules of annular families, repetitions and
//! bridges, the trees they generate, and the escaping variant whose rays
//! leave every compact part of a Schreier quotient.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schreier::{classify_ray, project_ray, RayClass, SchreierGraph, SubgroupSpec};
use crate::words::{concat, lcp, Letter, SphereIter, Word};

/// Separation radius attached to a straightness parameter.
pub fn separation_radius(tau: usize) -> f64 {
    3.0 * tau as f64 + 0.5
}

/// Integer form of `2 Delta + 2 R`: distances must exceed this.
pub fn separation_threshold(delta: usize, tau: usize) -> usize {
    2 * delta + 6 * tau + 1
}

/// Index pairs `(i, j)`, `i < j`, of words at distance at most `sep`, found
/// through shared prefixes. Returns the first offending pair in order of `j`.
pub fn separation_violation(words: &[Word], sep: usize) -> Option<(usize, usize)> {
    let mut seen: HashMap<&[Letter], (usize, usize)> = HashMap::new();
    let min_len = words.iter().map(Word::len).min().unwrap_or(0);
    for (j, w) in words.iter().enumerate() {
        let lo = (2 * min_len).saturating_sub(sep).div_ceil(2);
        for l in (lo..=w.len()).rev() {
            if let Some(&(i, ulen)) = seen.get(&w.letters()[..l]) {
                if ulen + w.len() <= sep + 2 * l {
                    return Some((i, j));
                }
            }
        }
        for l in lo..=w.len() {
            let e = seen.entry(&w.letters()[..l]).or_insert((j, w.len()));
            if w.len() < e.1 {
                *e = (j, w.len());
            }
        }
    }
    None
}

/// Greedy maximal subset, in input order, with pairwise distance `> sep`.
pub fn select_separated(a: &[Word], sep: usize) -> Vec<Word> {
    if sep == 0 {
        return a.to_vec();
    }
    let min_len = a.iter().map(Word::len).min().unwrap_or(0);
    let lo = (2 * min_len).saturating_sub(sep).div_ceil(2);
    let mut seen: HashMap<Vec<Letter>, usize> = HashMap::new();
    let mut out = Vec::new();
    'next: for w in a {
        for l in lo..=w.len() {
            if let Some(&ulen) = seen.get(&w.letters()[..l]) {
                if ulen + w.len() <= sep + 2 * l {
                    continue 'next;
                }
            }
        }
        for l in lo..=w.len() {
            let e = seen.entry(w.letters()[..l].to_vec()).or_insert(w.len());
            *e = (*e).min(w.len());
        }
        out.push(w.clone());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StraightnessReport {
    pub ok: bool,
    /// Largest junction cancellation and where it occurs.
    pub worst: usize,
    pub offender: Option<(Word, Word)>,
}

/// Exact local straightness: `(a^-1 . a')_o <= tau` for all `a, a'` in `A`
/// (when `repeated`), and the bridge junctions `(b_prev^-1 . a)_o`,
/// `(a^-1 . b_next)_o` at most `tau`.
pub fn check_straightness(a: &[Word], b_prev: Option<&Word>, b_next: Option<&Word>, tau: usize, repeated: bool) -> StraightnessReport {
    let mut worst = 0;
    let mut offender = None;
    let mut note = |g: usize, x: &Word, y: &Word| {
        if g > worst || offender.is_none() && g > tau {
            worst = g;
            offender = Some((x.clone(), y.clone()));
        }
    };
    if repeated && !a.is_empty() {
        let mut sorted: Vec<&Word> = a.iter().collect();
        sorted.sort_by(|x, y| x.letters().cmp(y.letters()));
        for x in a {
            let inv = x.inverse();
            let pos = sorted.partition_point(|y| y.letters() < inv.letters());
            for k in [pos.wrapping_sub(1), pos] {
                if let Some(y) = sorted.get(k) {
                    note(lcp(&inv, y), x, y);
                }
            }
        }
    }
    for x in a {
        if let Some(b) = b_prev {
            note(lcp(&b.inverse(), x), b, x);
        }
        if let Some(b) = b_next {
            note(lcp(&x.inverse(), b), x, b);
        }
    }
    if worst <= tau {
        offender = None;
    }
    StraightnessReport { ok: worst <= tau, worst, offender }
}

/// Letters allowed at the two ends of family words next to the given bridges.
fn end_letters(rank: usize, b_prev: Option<&Word>, b_next: Option<&Word>) -> (Vec<Letter>, Vec<Letter>) {
    let pos: Vec<Letter> = Letter::all(rank).filter(|x| x.is_positive()).collect();
    let first = pos.iter().copied().filter(|&x| b_prev.and_then(Word::last).map_or(true, |l| x != l.inverse())).collect();
    let last = pos.iter().copied().filter(|&y| b_next.and_then(Word::first).map_or(true, |f| y.inverse() != f)).collect();
    (first, last)
}

/// Reduced words of the given length with constrained end letters.
fn ends_count(rank: usize, n: usize, first: &[Letter], last: &[Letter]) -> u128 {
    if n == 0 {
        return 0;
    }
    let d = 2 * rank;
    let mut v = vec![0u128; d];
    for x in first {
        v[x.code()] = 1;
    }
    for _ in 1..n {
        let mut next = vec![0u128; d];
        for c in 0..d {
            for p in 0..d {
                if p != c ^ 1 {
                    next[c] += v[p];
                }
            }
        }
        v = next;
    }
    last.iter().map(|y| v[y.code()]).sum()
}

/// Uniform sampler of closed reduced paths at one Schreier vertex.
#[derive(Clone, Debug)]
pub struct ArcSampler {
    pub vertex: usize,
    pub length: usize,
    /// Word prepended to every sampled arc.
    pub prefix: Word,
    local: Vec<usize>,
    local_index: HashMap<usize, usize>,
    nbr: Vec<Vec<Option<usize>>>,
    first_ok: Vec<bool>,
    /// `ways[r][state]`, state `= local * d + last letter code`.
    ways: Vec<Vec<u128>>,
    count: u128,
}

impl ArcSampler {
    /// Closed reduced paths of `length` at `vertex`, first letter outside
    /// `forbid_first` and last letter outside `forbid_last`.
    pub fn new(graph: &mut SchreierGraph, vertex: usize, length: usize, forbid_first: &[Letter], forbid_last: &[Letter], prefix: Word) -> Result<ArcSampler> {
        let rank = graph.spec().rank;
        let d = 2 * rank;
        let reach = length / 2;
        let mut local = vec![vertex];
        let mut local_index = HashMap::from([(vertex, 0usize)]);
        let mut depth = vec![0usize];
        let mut i = 0;
        while i < local.len() {
            let v = local[i];
            if depth[i] < reach {
                for x in Letter::all(rank) {
                    let u = graph.step(v, x)?;
                    if let std::collections::hash_map::Entry::Vacant(e) = local_index.entry(u) {
                        e.insert(local.len());
                        local.push(u);
                        depth.push(depth[i] + 1);
                    }
                }
            }
            i += 1;
        }
        let nbr: Vec<Vec<Option<usize>>> =
            local.iter().map(|&v| Letter::all(rank).map(|x| graph.neighbor(v, x).and_then(|u| local_index.get(&u).copied())).collect()).collect();
        let n = local.len();
        let mut ways = vec![vec![0u128; n * d]];
        for c in 0..d {
            if !forbid_last.contains(&Letter::from_code(c)) {
                ways[0][c] = 1;
            }
        }
        for r in 1..length {
            let prev = &ways[r - 1];
            let mut cur = vec![0u128; n * d];
            for v in 0..n {
                for p in 0..d {
                    let mut s = 0u128;
                    for x in 0..d {
                        if x == p ^ 1 {
                            continue;
                        }
                        if let Some(u) = nbr[v][x] {
                            s += prev[u * d + x];
                        }
                    }
                    cur[v * d + p] = s;
                }
            }
            ways.push(cur);
        }
        let first_ok: Vec<bool> = (0..d).map(|c| !forbid_first.contains(&Letter::from_code(c))).collect();
        let count = if length == 0 {
            0
        } else {
            (0..d).filter(|&x| first_ok[x]).filter_map(|x| nbr[0][x].map(|u| ways[length - 1][u * d + x])).sum()
        };
        Ok(ArcSampler { vertex, length, prefix, local, local_index, nbr, first_ok, ways, count })
    }

    pub fn count(&self) -> u128 {
        self.count
    }

    pub fn piece_len(&self) -> usize {
        self.prefix.len() + self.length
    }

    /// The arc part of a uniformly random piece.
    pub fn sample_arc<R: Rng>(&self, rng: &mut R) -> Word {
        let d = self.nbr[0].len();
        let mut v = 0usize;
        let mut prev: Option<usize> = None;
        let mut letters = Vec::with_capacity(self.length);
        for step in 0..self.length {
            let r = self.length - 1 - step;
            let options: Vec<(usize, usize, u128)> = (0..d)
                .filter(|&x| prev.map_or(self.first_ok[x], |p| x != p ^ 1))
                .filter_map(|x| self.nbr[v][x].map(|u| (x, u, self.ways[r][u * d + x])))
                .filter(|o| o.2 > 0)
                .collect();
            let total: u128 = options.iter().map(|o| o.2).sum();
            let mut pick = rng.gen_range(0..total);
            for (x, u, wgt) in options {
                if pick < wgt {
                    letters.push(Letter::from_code(x));
                    v = u;
                    prev = Some(x);
                    break;
                }
                pick -= wgt;
            }
        }
        debug_assert_eq!(self.local[v], self.vertex);
        Word::from_reduced(letters)
    }

    pub fn local_size(&self) -> usize {
        self.local_index.len()
    }
}

/// The selected set `A_n` of one stage.
#[derive(Clone, Debug)]
pub enum AnnularFamily {
    Explicit(Vec<Word>),
    /// All reduced words with length in `lengths` and the given end letters.
    Ends { rank: usize, lengths: (usize, usize), first: Vec<Letter>, last: Vec<Letter> },
    Arcs(Box<ArcSampler>),
}

impl AnnularFamily {
    pub fn size(&self) -> u128 {
        match self {
            AnnularFamily::Explicit(v) => v.len() as u128,
            AnnularFamily::Ends { rank, lengths, first, last } => (lengths.0..=lengths.1).map(|n| ends_count(*rank, n, first, last)).sum(),
            AnnularFamily::Arcs(s) => s.count(),
        }
    }

    /// `(length, count)` pairs.
    pub fn length_counts(&self) -> Vec<(usize, u128)> {
        match self {
            AnnularFamily::Explicit(v) => {
                let mut m: std::collections::BTreeMap<usize, u128> = Default::default();
                for w in v {
                    *m.entry(w.len()).or_default() += 1;
                }
                m.into_iter().collect()
            }
            AnnularFamily::Ends { rank, lengths, first, last } => (lengths.0..=lengths.1).map(|n| (n, ends_count(*rank, n, first, last))).collect(),
            AnnularFamily::Arcs(s) => vec![(s.piece_len(), s.count())],
        }
    }

    /// `log sum_a e^{-s |a|}`.
    pub fn log_partition(&self, s: f64) -> f64 {
        let terms: Vec<f64> = self.length_counts().into_iter().filter(|c| c.1 > 0).map(|(l, c)| (c as f64).ln() - s * l as f64).collect();
        log_sum_exp(&terms)
    }

    /// Members in deterministic order. Sampled families have no listing.
    pub fn members(&self) -> Result<Vec<Word>> {
        match self {
            AnnularFamily::Explicit(v) => Ok(v.clone()),
            AnnularFamily::Ends { rank, lengths, first, last } => Ok((lengths.0..=lengths.1)
                .flat_map(|n| SphereIter::new(*rank, n))
                .filter(|w| first.contains(&w.first().unwrap()) && last.contains(&w.last().unwrap()))
                .collect()),
            AnnularFamily::Arcs(_) => Err(Error::Budget("arc families are sampled, not listed".into())),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Word {
        match self {
            AnnularFamily::Explicit(v) => v[rng.gen_range(0..v.len())].clone(),
            AnnularFamily::Ends { rank, first, last, .. } => {
                let counts = self.length_counts();
                let total: u128 = counts.iter().map(|c| c.1).sum();
                let mut pick = rng.gen_range(0..total);
                let mut n = counts[0].0;
                for (len, c) in counts {
                    if pick < c {
                        n = len;
                        break;
                    }
                    pick -= c;
                }
                loop {
                    let mut letters = vec![first[rng.gen_range(0..first.len())]];
                    while letters.len() < n {
                        let p = *letters.last().unwrap();
                        let x = Letter::from_code(rng.gen_range(0..2 * rank - 1));
                        letters.push(if x.code() >= p.inverse().code() { Letter::from_code(x.code() + 1) } else { x });
                    }
                    if last.contains(letters.last().unwrap()) {
                        return Word::from_reduced(letters);
                    }
                }
            }
            AnnularFamily::Arcs(s) => s.prefix.mul(&s.sample_arc(rng)),
        }
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Witnessed inequalities for the repetition count of one stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageWitness {
    /// `B_n / (K_n L_n)` and its bound `1/n`.
    pub bridge_ratio: f64,
    pub bridge_bound: f64,
    /// `L_{n+1} + Delta_{n+1}` against `(1/n) sum_{m<=n} (K_m (L_m + Delta_m) + B_m)`.
    pub cumulative: Option<(f64, f64)>,
    /// `K_n log sum_A e^{-omega |a|} - omega B_n`, positive when the stage supports rate `omega`.
    pub lower_margin: f64,
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub l: usize,
    pub delta: usize,
    pub family: AnnularFamily,
    pub k: usize,
    pub bridge: Word,
    pub omega: f64,
    pub witness: StageWitness,
}

impl Stage {
    /// Root in `s` of `(sum_A e^{-s|a|})^K e^{-s B} = 1`.
    pub fn root(&self) -> f64 {
        let f = |s: f64| self.k as f64 * self.family.log_partition(s) - s * self.bridge.len() as f64;
        bisect_decreasing(f, 0.0, 64.0)
    }
}

fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    if f(lo) <= 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Escaping data: the stage loops sit at Schreier vertices `v_n` at
/// distance `w_hat[n]` from the base coset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub spec: SubgroupSpec,
    pub h: Word,
    pub wrap: usize,
    pub conjugators: Vec<Word>,
    pub vertices: Vec<usize>,
    pub w_hat: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub rank: usize,
    pub stages: Vec<Stage>,
    pub tau: usize,
    pub r: f64,
    pub escape: Option<EscapeRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageSummary {
    pub l: usize,
    pub delta: usize,
    pub size: String,
    pub k: usize,
    pub bridge: Word,
    pub omega: f64,
    pub root: f64,
    pub witness: StageWitness,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub rank: usize,
    pub tau: usize,
    pub r: f64,
    pub stages: Vec<StageSummary>,
    pub escape: Option<EscapeRecord>,
}

impl Schedule {
    pub fn summary(&self) -> ScheduleSummary {
        ScheduleSummary {
            rank: self.rank,
            tau: self.tau,
            r: self.r,
            stages: self
                .stages
                .iter()
                .map(|s| StageSummary {
                    l: s.l,
                    delta: s.delta,
                    size: s.family.size().to_string(),
                    k: s.k,
                    bridge: s.bridge.clone(),
                    omega: s.omega,
                    root: s.root(),
                    witness: s.witness.clone(),
                })
                .collect(),
            escape: self.escape.clone(),
        }
    }

    /// Stage roots and their range.
    pub fn growth_bracket(&self) -> (f64, f64) {
        self.stages.iter().map(Stage::root).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    /// Builds a schedule from explicit stages, checking separation and straightness.
    pub fn from_families(rank: usize, tau: usize, stages: Vec<(Vec<Word>, usize, usize, Word)>) -> Result<Schedule> {
        let mut out = Vec::new();
        for (n, (family, delta, k, bridge)) in stages.iter().enumerate() {
            if family.is_empty() || *k == 0 {
                return Err(Error::Construction(format!("stage {}: empty family or zero repetitions", n + 1)));
            }
            if let Some((i, j)) = separation_violation(family, separation_threshold(*delta, tau)) {
                return Err(Error::Construction(format!("stage {}: {} and {} are too close", n + 1, family[i], family[j])));
            }
            let b_prev = if n == 0 { None } else { Some(&stages[n - 1].3) };
            let rep = check_straightness(family, b_prev.filter(|b| !b.is_empty()), Some(bridge).filter(|b| !b.is_empty()), tau, *k >= 2);
            if !rep.ok {
                return Err(Error::Construction(format!("stage {}: straightness fails at {:?}", n + 1, rep.offender)));
            }
            let l = family.iter().map(Word::len).max().unwrap() - delta;
            let fam = AnnularFamily::Explicit(family.clone());
            let omega = (fam.size() as f64).ln() / l as f64;
            out.push(Stage {
                l,
                delta: *delta,
                k: *k,
                bridge: bridge.clone(),
                omega,
                witness: StageWitness { bridge_ratio: 0.0, bridge_bound: 1.0 / (n + 1) as f64, cumulative: None, lower_margin: 0.0 },
                family: fam,
            });
        }
        Ok(Schedule { rank, stages: out, tau, r: separation_radius(tau), escape: None })
    }
}

const MAX_REPETITIONS: usize = 100_000;

/// Smallest `K` meeting the bridge ratio, the cumulative condition and the
/// rate condition at `omega`.
fn choose_k(n: usize, l: usize, delta: usize, b: usize, next: Option<usize>, prefix_sum: f64, log_z: f64, omega: f64) -> Result<(usize, StageWitness)> {
    let margin = log_z;
    if margin < 0.0 || margin == 0.0 && b > 0 {
        return Err(Error::Construction(format!("stage {n}: family too small for rate {omega}")));
    }
    for k in 1..=MAX_REPETITIONS {
        let ratio = b as f64 / (k * l) as f64;
        let sum = prefix_sum + (k * (l + delta) + b) as f64;
        let cumulative = next.map(|nx| (nx as f64, sum / n as f64));
        let lower = k as f64 * margin - omega * b as f64;
        let rate_ok = if b == 0 { lower >= 0.0 } else { lower > 0.0 };
        if ratio <= 1.0 / n as f64 && cumulative.map_or(true, |(a, c)| a <= c) && rate_ok {
            return Ok((k, StageWitness { bridge_ratio: ratio, bridge_bound: 1.0 / n as f64, cumulative, lower_margin: lower }));
        }
    }
    Err(Error::Construction(format!("stage {n}: no repetition count up to {MAX_REPETITIONS}")))
}

/// A schedule whose stage `n` family is the separated annulus `A(L_n, Delta)`
/// with end letters compatible with the neighbouring bridges.
pub fn make_schedule(rank: usize, l_sequence: &[usize], delta: usize, bridges: &mut dyn Iterator<Item = Word>, omega_targets: &[f64], tau: usize, budget: usize) -> Result<Schedule> {
    if l_sequence.is_empty() || l_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("L sequence must be nonempty and strictly increasing".into()));
    }
    if omega_targets.len() < l_sequence.len() {
        return Err(Error::Domain("one target rate per stage is required".into()));
    }
    if l_sequence[0] <= delta {
        return Err(Error::Domain("L_1 must exceed Delta".into()));
    }
    let bridges: Vec<Word> = bridges.take(l_sequence.len()).collect();
    if bridges.len() < l_sequence.len() {
        return Err(Error::Domain("bridge source ended early".into()));
    }
    let sep = separation_threshold(delta, tau);
    let mut stages = Vec::new();
    let mut prefix_sum = 0.0;
    for (i, &l) in l_sequence.iter().enumerate() {
        let n = i + 1;
        let b_prev = if i == 0 { None } else { Some(&bridges[i - 1]) };
        let (first, last) = end_letters(rank, b_prev, Some(&bridges[i]));
        let family = if sep < 2 && delta == 0 {
            AnnularFamily::Ends { rank, lengths: (l, l), first, last }
        } else {
            let ends = AnnularFamily::Ends { rank, lengths: (l - delta, l + delta), first, last };
            if ends.size() > budget as u128 {
                return Err(Error::Budget(format!("stage {n}: annulus of {} words exceeds budget {budget}", ends.size())));
            }
            AnnularFamily::Explicit(select_separated(&ends.members()?, sep))
        };
        let omega = omega_targets[i];
        let size = family.size();
        if (size as f64).ln() < l as f64 * omega {
            return Err(Error::Construction(format!("stage {n}: |A| = {size} < e^(L omega) with L = {l}, omega = {omega}")));
        }
        let log_z = family.log_partition(omega);
        let next = l_sequence.get(i + 1).map(|nl| nl + delta);
        let (k, witness) = choose_k(n, l, delta, bridges[i].len(), next, prefix_sum, log_z, omega)?;
        prefix_sum += (k * (l + delta) + bridges[i].len()) as f64;
        stages.push(Stage { l, delta, family, k, bridge: bridges[i].clone(), omega, witness });
    }
    Ok(Schedule { rank, stages, tau, r: separation_radius(tau), escape: None })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Node {
    pub word: Word,
    pub level: usize,
    pub parent: Option<usize>,
    pub stage: usize,
    /// The family element (with bridge when the stage ends) added at this node.
    pub piece: Word,
    pub dist: usize,
    pub tree_dist: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QRTree {
    pub nodes: Vec<Node>,
    /// `levels[l]` is the index range of nodes at level `l`.
    pub levels: Vec<(usize, usize)>,
    pub tau: usize,
    pub truncated: bool,
}

/// Level slots `(stage, repetition)` of a schedule.
fn slots(schedule: &Schedule) -> Vec<(usize, usize)> {
    schedule.stages.iter().enumerate().flat_map(|(n, s)| (1..=s.k).map(move |j| (n, j))).collect()
}

impl QRTree {
    fn root() -> QRTree {
        QRTree {
            nodes: vec![Node { word: Word::identity(), level: 0, parent: None, stage: 0, piece: Word::identity(), dist: 0, tree_dist: 0 }],
            levels: vec![(0, 1)],
            tau: 0,
            truncated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &[Node] {
        let (a, b) = self.levels[l];
        &self.nodes[a..b]
    }

    /// Contiguous runs of siblings at a level: `(parent, start, end)`.
    pub fn sibling_groups(&self, l: usize) -> Vec<(usize, usize, usize)> {
        let (a, b) = self.levels[l];
        let mut out: Vec<(usize, usize, usize)> = Vec::new();
        for i in a..b {
            let p = self.nodes[i].parent.unwrap();
            match out.last_mut() {
                Some(g) if g.0 == p => g.2 = i + 1,
                _ => out.push((p, i, i + 1)),
            }
        }
        out
    }

    fn push_level(&mut self, children: Vec<Node>) -> Result<()> {
        let start = self.nodes.len();
        self.nodes.extend(children);
        self.levels.push((start, self.nodes.len()));
        Ok(())
    }

    /// The star of `words` around the identity.
    pub fn star(words: &[Word]) -> QRTree {
        let mut t = QRTree::root();
        let children = words.iter().map(|w| Node { word: w.clone(), level: 1, parent: Some(0), stage: 1, piece: w.clone(), dist: w.len(), tree_dist: w.len() }).collect();
        t.push_level(children).unwrap();
        t
    }

    /// All reduced words of length at most `depth`, each a child of its prefix.
    pub fn cayley_ball(rank: usize, depth: usize) -> QRTree {
        let mut t = QRTree::root();
        for l in 1..=depth {
            let (a, b) = t.levels[l - 1];
            let mut children = Vec::new();
            for p in a..b {
                let w = t.nodes[p].word.clone();
                for x in Letter::all(rank) {
                    if w.last() == Some(x.inverse()) {
                        continue;
                    }
                    let mut c = w.clone();
                    c.push(x);
                    children.push(Node { word: c, level: l, parent: Some(p), stage: l, piece: Word::letter(x), dist: l, tree_dist: l });
                }
            }
            t.push_level(children).unwrap();
        }
        t
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("node_id,parent_id,stage,word,dist_root\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let p = n.parent.map_or(String::new(), |p| p.to_string());
            s += &format!("{i},{p},{},{},{}\n", n.stage, n.word, n.dist);
        }
        s
    }
}

fn child(tree: &QRTree, parent: usize, level: usize, stage: usize, a: &Word, bridge: Option<&Word>, tau: usize) -> Result<Node> {
    let p = &tree.nodes[parent];
    let piece = match bridge {
        Some(b) => a.mul(b),
        None => a.clone(),
    };
    let mut parts = vec![&p.word, a];
    if let Some(b) = bridge {
        parts.push(b);
    }
    let c = concat(&parts);
    if c.max() > tau {
        return Err(Error::Construction(format!("junction cancellation {} exceeds tau {tau} below node {}", c.max(), p.word)));
    }
    let tree_dist = p.tree_dist + a.len() + bridge.map_or(0, Word::len);
    Ok(Node { dist: c.word.len(), word: c.word, level, parent: Some(parent), stage, piece, tree_dist })
}

/// All admissible prefixes, level by level, while whole levels fit in
/// `node_budget` and `depth_budget`.
pub fn build_tree(schedule: &Schedule, depth_budget: usize, node_budget: usize) -> Result<QRTree> {
    let mut tree = QRTree::root();
    tree.tau = schedule.tau;
    let mut seen: HashSet<Word> = HashSet::from([Word::identity()]);
    let slots = slots(schedule);
    let mut members: Vec<Option<Vec<Word>>> = vec![None; schedule.stages.len()];
    for (level, &(n, j)) in slots.iter().enumerate().map(|(i, s)| (i + 1, s)) {
        if level > depth_budget {
            break;
        }
        let stage = &schedule.stages[n];
        let (a, b) = tree.levels[level - 1];
        let width = (b - a) as u128 * stage.family.size();
        if tree.nodes.len() as u128 + width > node_budget as u128 {
            tree.truncated = true;
            break;
        }
        if members[n].is_none() {
            members[n] = Some(stage.family.members()?);
        }
        let fam = members[n].as_ref().unwrap();
        let bridge = (j == stage.k && !stage.bridge.is_empty()).then_some(&stage.bridge);
        let mut children = Vec::with_capacity(width as usize);
        for p in a..b {
            for x in fam {
                let c = child(&tree, p, level, n + 1, x, bridge, schedule.tau)?;
                if !seen.insert(c.word.clone()) {
                    return Err(Error::Construction(format!("two nodes carry the word {}", c.word)));
                }
                children.push(c);
            }
        }
        tree.push_level(children)?;
    }
    if tree.depth() < depth_budget.min(slots.len()) {
        tree.truncated = true;
    }
    Ok(tree)
}

/// A tree whose nodes each receive `fanout` sampled children (distinct
/// samples only). Used where families are too large to list.
pub fn build_sampled_tree(schedule: &Schedule, depth: usize, fanout: usize, seed: u64) -> Result<QRTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree = QRTree::root();
    tree.tau = schedule.tau;
    let mut seen: HashSet<Word> = HashSet::from([Word::identity()]);
    for (level, &(n, j)) in slots(schedule).iter().enumerate().map(|(i, s)| (i + 1, s)).take(depth) {
        let stage = &schedule.stages[n];
        let bridge = (j == stage.k && !stage.bridge.is_empty()).then_some(&stage.bridge);
        let (a, b) = tree.levels[level - 1];
        let mut children = Vec::new();
        for p in a..b {
            let mut local = HashSet::new();
            for _ in 0..fanout * 4 {
                if local.len() == fanout {
                    break;
                }
                let x = stage.family.sample(&mut rng);
                if local.insert(x.clone()) {
                    let c = child(&tree, p, level, n + 1, &x, bridge, schedule.tau)?;
                    if !seen.insert(c.word.clone()) {
                        return Err(Error::Construction(format!("two nodes carry the word {}", c.word)));
                    }
                    children.push(c);
                }
            }
        }
        tree.push_level(children)?;
    }
    Ok(tree)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Root of `Z_l(s) = Z_{l-1}(s)` for each level `l >= 1`.
    pub level_roots: Vec<f64>,
    pub bracket: (f64, f64),
    /// `(s, stage, holds)` for the stagewise rate inequality.
    pub lower_checks: Vec<(f64, usize, bool)>,
}

fn log_level_sum(tree: &QRTree, l: usize, s: f64) -> f64 {
    let terms: Vec<f64> = tree.level(l).iter().map(|n| -s * n.dist as f64).collect();
    log_sum_exp(&terms)
}

/// Level-to-level critical exponents of the truncated Poincaré series and,
/// with a schedule, the stagewise inequality at each `s` of the grid below
/// the smallest target rate.
pub fn growth_rate(tree: &QRTree, schedule: Option<&Schedule>, s_grid: &[f64]) -> Result<GrowthReport> {
    if tree.depth() < 1 {
        return Err(Error::Horizon("growth rate needs at least one completed level".into()));
    }
    let level_roots: Vec<f64> = (1..=tree.depth()).map(|l| bisect_decreasing(|s| log_level_sum(tree, l, s) - log_level_sum(tree, l - 1, s), 0.0, 64.0)).collect();
    let bracket = level_roots.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let mut lower_checks = Vec::new();
    if let Some(sch) = schedule {
        let min_omega = sch.stages.iter().map(|s| s.omega).fold(f64::INFINITY, f64::min);
        for &s in s_grid.iter().filter(|&&s| s < min_omega) {
            for (n, st) in sch.stages.iter().enumerate() {
                let holds = st.k as f64 * st.family.log_partition(s) > s * st.bridge.len() as f64;
                lower_checks.push((s, n + 1, holds));
            }
        }
    }
    Ok(GrowthReport { level_roots, bracket, lower_checks })
}

/// A sampled family ray with the letter positions where each stage and
/// bridge starts in the reduced word.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyRay {
    pub word: Word,
    pub pieces: Vec<Word>,
    pub stage_starts: Vec<usize>,
    pub bridge_starts: Vec<usize>,
    pub max_cancellation: usize,
}

/// Samples the first `stages` stages of a family ray.
pub fn sample_ray<R: Rng>(schedule: &Schedule, stages: usize, rng: &mut R) -> Result<FamilyRay> {
    if stages > schedule.stages.len() {
        return Err(Error::Horizon(format!("schedule has {} stages", schedule.stages.len())));
    }
    let mut word = Word::identity();
    let mut pieces = Vec::new();
    let mut stage_starts = Vec::new();
    let mut bridge_starts = Vec::new();
    let mut max_cancellation = 0;
    let mut append = |word: &mut Word, p: &Word| -> usize {
        let c = word.cancellation(p);
        max_cancellation = max_cancellation.max(c);
        let at = word.len() - c;
        *word = word.mul(p);
        at
    };
    for st in &schedule.stages[..stages] {
        for j in 0..st.k {
            let a = st.family.sample(rng);
            let at = append(&mut word, &a);
            if j == 0 {
                stage_starts.push(at);
            }
            pieces.push(a);
        }
        bridge_starts.push(append(&mut word, &st.bridge));
        pieces.push(st.bridge.clone());
    }
    Ok(FamilyRay { word, pieces, stage_starts, bridge_starts, max_cancellation })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeParams {
    pub l0: usize,
    pub l_step: usize,
    pub wrap: usize,
    /// Target rate below the critical exponent of the ambient tree.
    pub omega_gap: f64,
}

impl Default for EscapeParams {
    fn default() -> EscapeParams {
        EscapeParams { l0: 40, l_step: 2, wrap: 1, omega_gap: 0.14 }
    }
}

/// Shortest reduced path from `from` to a vertex at base distance at least
/// `target`, avoiding `bad_first` as first letter and `bad_last` as last letter.
fn outward_path(graph: &mut SchreierGraph, from: usize, target: usize, bad_first: Letter, bad_last: Letter) -> Result<(Word, usize)> {
    let rank = graph.spec().rank;
    if target <= graph.dist(from) {
        return Err(Error::Domain("target distance already reached".into()));
    }
    let reach = target - graph.dist(from);
    graph.extend_to(target + 1);
    let mut frontier: Vec<(usize, Vec<Letter>)> = vec![(from, vec![])];
    for _ in 0..4 * reach + 8 {
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        for (v, path) in &frontier {
            for x in Letter::all(rank) {
                if path.is_empty() && x == bad_first || path.last() == Some(&x.inverse()) {
                    continue;
                }
                let u = graph.step(*v, x)?;
                if graph.dist(u) < graph.dist(*v) || !seen.insert((u, x)) {
                    continue;
                }
                let mut p = path.clone();
                p.push(x);
                if graph.dist(u) >= target && x != bad_last {
                    return Ok((Word::from_reduced(p), u));
                }
                next.push((u, p));
            }
        }
        frontier = next;
    }
    Err(Error::Construction(format!("no outward path of the required shape from vertex {from}")))
}

/// Stages whose families are closed arcs at Schreier vertices `v_n` escaping
/// to infinity, each piece `h^wrap x` with `x` a closed arc at `v_n` whose
/// end letters avoid the loop of `h`.
pub fn escaping_schedule(spec: &SubgroupSpec, h: &Word, count: usize) -> Result<Schedule> {
    escaping_schedule_with(spec, h, count, &EscapeParams::default())
}

pub fn escaping_schedule_with(spec: &SubgroupSpec, h: &Word, count: usize, params: &EscapeParams) -> Result<Schedule> {
    if !spec.is_normal() {
        return Err(Error::Domain("escaping schedules need a normal subgroup".into()));
    }
    if h.is_empty() || !h.is_cyclically_reduced() || !spec.contains(h) {
        return Err(Error::Domain(format!("{h} must be a cyclically reduced nontrivial element of the subgroup")));
    }
    if count == 0 || params.wrap == 0 {
        return Err(Error::Domain("count and wrap must be positive".into()));
    }
    let rank = spec.rank;
    let ls: Vec<usize> = (0..count).map(|i| params.l0 + params.l_step * i).collect();
    let mut w_hat = vec![0usize];
    for i in 1..count {
        w_hat.push(w_hat[i - 1] + ls[i]);
    }
    let mut graph = SchreierGraph::build(spec, w_hat[count - 1] + ls[count - 1]);
    if graph.is_complete() {
        return Err(Error::Domain("subgroup has finite index".into()));
    }
    let first = h.first().unwrap();
    let last = h.last().unwrap();
    let forbid = [first, last.inverse()];
    let forbid_end = [last, first.inverse()];
    let hw = h.pow(params.wrap as i64);
    let omega = ((2 * rank - 1) as f64).ln() - params.omega_gap;
    let mut vertices = vec![0usize];
    let mut conjugators = vec![Word::identity()];
    let mut paths = Vec::new();
    for i in 1..count {
        let (u, v) = outward_path(&mut graph, vertices[i - 1], w_hat[i], last.inverse(), first.inverse())?;
        conjugators.push(conjugators[i - 1].mul(&u));
        vertices.push(v);
        paths.push(u);
    }
    let mut stages = Vec::new();
    let mut prefix_sum = 0.0;
    for i in 0..count {
        let sampler = ArcSampler::new(&mut graph, vertices[i], ls[i], &forbid, &forbid_end, hw.clone())?;
        let family = AnnularFamily::Arcs(Box::new(sampler));
        let bridge = match paths.get(i) {
            Some(u) => hw.mul(u),
            None => hw.clone(),
        };
        let log_z = family.log_partition(omega);
        let next = ls.get(i + 1).copied();
        let (k, witness) = choose_k(i + 1, ls[i], 0, bridge.len(), next, prefix_sum, log_z, omega)?;
        prefix_sum += (k * ls[i] + bridge.len()) as f64;
        stages.push(Stage { l: ls[i], delta: 0, family, k, bridge, omega, witness });
    }
    let escape = EscapeRecord { spec: spec.clone(), h: h.clone(), wrap: params.wrap, conjugators, vertices, w_hat };
    Ok(Schedule { rank, stages, tau: 0, r: separation_radius(0), escape: Some(escape) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeCheck {
    pub stage: usize,
    /// `W_n - L_n - Delta_n`.
    pub bound: i64,
    pub stage_start: usize,
    pub index: usize,
    pub ok: bool,
}

/// Projects a family ray to the quotient and checks, for every stage, that
/// the ray stays farther than `W_n - L_n - Delta_n` from the base coset from
/// the start of stage `n` on.
pub fn escape_certificates(schedule: &Schedule, ray: &FamilyRay, graph: &mut SchreierGraph) -> Result<Vec<EscapeCheck>> {
    let esc = schedule.escape.as_ref().ok_or_else(|| Error::Domain("schedule has no escape record".into()))?;
    let proj = project_ray(ray.word.letters().iter().copied(), graph)?;
    let profile = &proj.distance_profile;
    let mut out = Vec::new();
    for (n, &start) in ray.stage_starts.iter().enumerate() {
        let st = &schedule.stages[n];
        let bound = esc.w_hat[n] as i64 - st.l as i64 - st.delta as i64;
        let (index, ok) = if bound < 0 {
            (0, true)
        } else {
            match classify_ray(profile, 1, bound as usize)? {
                RayClass::Escape { index } => (index, index <= start),
                RayClass::Recurrent { returns } => (returns.last().map_or(0, |r| r + 1), false),
            }
        };
        out.push(EscapeCheck { stage: n + 1, bound, stage_start: start, index, ok });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::myrberg::LoxodromicStream;
    use crate::words::{gromov_product, sphere_size};

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    fn max_independent(words: &[Word], sep: usize) -> usize {
        let n = words.len();
        let mut best = 0;
        fn rec(i: usize, chosen: &mut Vec<usize>, words: &[Word], sep: usize, best: &mut usize) {
            if i == words.len() {
                *best = (*best).max(chosen.len());
                return;
            }
            if chosen.len() + (words.len() - i) <= *best {
                return;
            }
            if chosen.iter().all(|&j| words[j].dist(&words[i]) > sep) {
                chosen.push(i);
                rec(i + 1, chosen, words, sep, best);
                chosen.pop();
            }
            rec(i + 1, chosen, words, sep, best);
        }
        rec(0, &mut Vec::with_capacity(n), words, sep, &mut best);
        best
    }

    #[test]
    fn separated_sphere_three() {
        let sphere: Vec<Word> = SphereIter::new(2, 3).collect();
        let sel = select_separated(&sphere, 2);
        for i in 0..sel.len() {
            for j in i + 1..sel.len() {
                assert!(sel[i].dist(&sel[j]) > 2);
                assert!(lcp(&sel[i], &sel[j]) < 2);
            }
        }
        assert!(sel.len() as u128 * crate::words::ball_size(2, 2) >= 36);
        assert_eq!(sel.len(), max_independent(&sphere, 2));
        assert_eq!(select_separated(&sphere, 0), sphere);
        assert_eq!(select_separated(&[w("ab")], 5), vec![w("ab")]);
    }

    #[test]
    fn separated_mixed_lengths() {
        let words: Vec<Word> = (2..=4).flat_map(|n| SphereIter::new(2, n)).collect();
        for sep in 1..=5 {
            let sel = select_separated(&words, sep);
            assert!(separation_violation(&sel, sep).is_none());
            for x in &words {
                assert!(sel.contains(x) || sel.iter().any(|y| y.dist(x) <= sep));
            }
            let brute = (0..words.len()).flat_map(|j| (0..j).map(move |i| (i, j))).find(|&(i, j)| words[i].dist(&words[j]) <= sep);
            assert_eq!(separation_violation(&words, sep).map(|p| p.1), brute.map(|p| p.1));
        }
    }

    #[test]
    fn straightness_examples() {
        let rep = check_straightness(&[w("ab"), w("aB")], None, None, 1, true);
        assert!(rep.ok);
        let rep = check_straightness(&[w("ab"), w("BA")], None, None, 1, true);
        assert!(!rep.ok);
        assert_eq!(rep.worst, 2);
        assert!(rep.offender.is_some());
        let rep = check_straightness(&[w("ab")], Some(&w("bA")), None, 0, false);
        assert!(!rep.ok);
    }

    #[test]
    fn straightness_matches_pairwise_scan() {
        let sphere: Vec<Word> = SphereIter::new(2, 4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let a: Vec<Word> = (0..12).map(|_| sphere[rng.gen_range(0..sphere.len())].clone()).collect();
            for tau in 0..3 {
                let brute = a.iter().flat_map(|x| a.iter().map(move |y| gromov_product(&x.inverse(), y))).max().unwrap();
                let rep = check_straightness(&a, None, None, tau, true);
                assert_eq!(rep.worst, brute);
                assert_eq!(rep.ok, brute <= tau);
            }
        }
    }

    #[test]
    fn ends_counts_match_enumeration() {
        let first = vec![Letter::new(0, true), Letter::new(1, true)];
        let last = vec![Letter::new(1, true)];
        for n in 1..=7 {
            let fam = AnnularFamily::Ends { rank: 2, lengths: (n, n), first: first.clone(), last: last.clone() };
            assert_eq!(fam.members().unwrap().len() as u128, fam.size());
        }
        let all = Letter::all(2).collect::<Vec<_>>();
        assert_eq!(ends_count(2, 6, &all, &all), sphere_size(2, 6));
    }

    #[test]
    fn schedule_witnesses() {
        let ls: Vec<usize> = (1..=3).map(|n| 4 * n).collect();
        let bridges: Vec<Word> = (1..=3).map(|n| w("b").pow((n * n) as i64)).collect();
        let targets = vec![0.2; 3];
        let s = make_schedule(2, &ls, 1, &mut bridges.into_iter(), &targets, 0, 1 << 22).unwrap();
        let mut sum = 0.0;
        for (i, st) in s.stages.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!(st.witness.bridge_ratio <= 1.0 / n);
            sum += (st.k * (st.l + st.delta) + st.bridge.len()) as f64;
            if let Some(nl) = ls.get(i + 1) {
                assert!((nl + 1) as f64 <= sum / n);
            }
            assert!(st.witness.lower_margin > 0.0);
            if st.k > 1 {
                let v = st.family.members().unwrap();
                assert!(check_straightness(&v, None, None, 0, true).ok);
            }
        }
    }

    #[test]
    fn schedule_bridge_free_and_rejections() {
        let s = make_schedule(2, &[4, 5, 6], 0, &mut std::iter::repeat(Word::identity()), &[0.5; 3], 0, 1 << 20).unwrap();
        assert!(s.stages[1..].iter().all(|st| st.k == 1));
        assert!(make_schedule(2, &[4, 4, 4], 0, &mut std::iter::repeat(Word::identity()), &[0.5; 3], 0, 1 << 20).is_err());
        assert!(make_schedule(2, &[4, 5], 0, &mut std::iter::repeat(Word::identity()), &[1.5; 2], 0, 1 << 20).is_err());
    }

    #[test]
    fn star_tree() {
        let sphere: Vec<Word> = SphereIter::new(2, 3).collect();
        let sep = select_separated(&sphere, 2);
        let s = Schedule::from_families(2, 0, vec![(sep.clone(), 0, 1, Word::identity())]).unwrap();
        let t = build_tree(&s, 10, 1000).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.level(1).len(), sep.len());
        assert!(t.level(1).iter().all(|n| n.dist == 3 && n.tree_dist == 3));
        let g = growth_rate(&t, None, &[]).unwrap();
        assert!((g.bracket.0 - (sep.len() as f64).ln() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_stage_ledger() {
        let pos = vec![Letter::new(0, true), Letter::new(1, true)];
        let ends = AnnularFamily::Ends { rank: 2, lengths: (5, 5), first: pos.clone(), last: pos };
        let fam = select_separated(&ends.members().unwrap(), separation_threshold(0, 1));
        assert!(fam.len() >= 2);
        let bridge = w("aBab");
        let s = Schedule::from_families(2, 1, vec![(fam.clone(), 0, 1, bridge), (fam, 0, 1, Word::identity())]).unwrap();
        let t = build_tree(&s, 10, 100_000).unwrap();
        assert_eq!(t.depth(), 2);
        for n in &t.nodes[1..] {
            let junctions = 2 * n.level;
            assert!(n.tree_dist - n.dist <= 2 * s.tau * junctions);
            assert!(n.dist as f64 >= (1.0 - 2.0 * s.tau as f64 / 5.0) * n.tree_dist as f64);
        }
    }

    #[test]
    fn node_count_is_product() {
        let ls = [5, 6];
        let s = make_schedule(2, &ls, 0, &mut LoxodromicStream::new(2), &[0.5, 0.5], 0, 1 << 20).unwrap();
        let t = build_tree(&s, 2, 1 << 22).unwrap();
        let a1 = s.stages[0].family.size();
        let expected = if s.stages[0].k >= 2 { a1 * a1 } else { a1 * s.stages[1].family.size() };
        assert_eq!(t.level(2).len() as u128, expected);
    }

    #[test]
    fn cayley_growth() {
        let t = QRTree::cayley_ball(2, 8);
        let g = growth_rate(&t, None, &[]).unwrap();
        let l3 = 3f64.ln();
        assert!(g.bracket.0 <= l3 + 1e-9 && l3 - 1e-9 <= g.bracket.1);
        assert_eq!(t.level(8).len() as u128, sphere_size(2, 8));
    }

    #[test]
    fn escaping_line() {
        let spec = SubgroupSpec::kernel_z(&[1, 0]).unwrap();
        let params = EscapeParams { l0: 12, l_step: 2, wrap: 1, omega_gap: 0.4 };
        let s = escaping_schedule_with(&spec, &w("b"), 3, &params).unwrap();
        let esc = s.escape.as_ref().unwrap();
        assert_eq!(esc.conjugators[1], w("a").pow(14));
        assert_eq!(esc.w_hat, vec![0, 14, 30]);
        let mut graph = SchreierGraph::build(&spec, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let ray = sample_ray(&s, 3, &mut rng).unwrap();
            assert_eq!(ray.max_cancellation, 0);
            let checks = escape_certificates(&s, &ray, &mut graph).unwrap();
            assert!(checks.iter().all(|c| c.ok), "{checks:?}");
        }
        let (lo, _) = s.growth_bracket();
        assert!(lo >= 3f64.ln() - 0.4);
        assert!(escaping_schedule(&SubgroupSpec::kernel_cyclic(3, &[1, 0]).unwrap(), &w("b"), 2).is_err());
        assert!(escaping_schedule(&spec, &w("a"), 2).is_err());
    }

    #[test]
    fn arc_sampler_counts_match_brute_force() {
        let spec = SubgroupSpec::kernel_z(&[1, 0]).unwrap();
        let mut graph = SchreierGraph::build(&spec, 8);
        let v = graph.vertex_of(&crate::schreier::CosetKey::Lattice(vec![2])).unwrap();
        let b = Letter::new(1, true);
        let s = ArcSampler::new(&mut graph, v, 6, &[b, b.inverse()], &[b, b.inverse()], Word::identity()).unwrap();
        let brute = SphereIter::new(2, 6)
            .filter(|x| {
                let f = x.first().unwrap();
                let l = x.last().unwrap();
                f.generator() == 0 && l.generator() == 0 && x.letters().iter().map(|y| if y.generator() == 0 { if y.is_positive() { 1 } else { -1 } } else { 0 }).sum::<i32>() == 0
            })
            .count();
        assert_eq!(s.count(), brute as u128);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = s.sample_arc(&mut rng);
            assert_eq!(x.len(), 6);
            assert!(spec.contains(&x));
        }
    }
}
