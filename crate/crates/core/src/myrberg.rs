//! Myrberg rays: loxodromic enumeration as bridges, separator triples and
//! finite-horizon fellow-travelling certificates.

use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::error::{Error, Result};
use crate::qrtree::{build_tree, separation_radius, AnnularFamily, QRTree, Schedule, Stage, StageWitness};
use crate::words::{annulus, axis_of, concat, independent, projection_diameter, shortlex, SphereIter, Word};

/// All nontrivial reduced words in length-lexicographic order. Every element
/// and each of its powers occurs exactly once.
#[derive(Clone, Debug)]
pub struct LoxodromicStream {
    rank: usize,
    len: usize,
    sphere: SphereIter,
}

impl LoxodromicStream {
    pub fn new(rank: usize) -> LoxodromicStream {
        LoxodromicStream { rank, len: 1, sphere: SphereIter::new(rank, 1) }
    }
}

impl Iterator for LoxodromicStream {
    type Item = Word;
    fn next(&mut self) -> Option<Word> {
        loop {
            if let Some(w) = self.sphere.next() {
                return Some(w);
            }
            self.len += 1;
            self.sphere = SphereIter::new(self.rank, self.len);
        }
    }
}

/// Three pairwise independent loxodromics with a common projection bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatorTriple {
    pub elements: [Word; 3],
    pub cores: [Word; 3],
    /// Largest projection of one axis onto another.
    pub tau: usize,
}

impl SeparatorTriple {
    pub fn axis(&self, i: usize) -> crate::words::Axis {
        axis_of(&self.elements[i]).expect("separators are nontrivial")
    }

    /// Raises each element to the least power of length at least `min_length`.
    pub fn with_min_length(&self, min_length: usize) -> SeparatorTriple {
        let elements = self.cores.clone().map(|c| {
            let p = min_length.div_ceil(c.len()).max(1);
            c.pow(p as i64)
        });
        SeparatorTriple { elements, cores: self.cores.clone(), tau: self.tau }
    }
}

fn is_proper_power(w: &Word) -> bool {
    let n = w.len();
    (1..n).filter(|p| n % p == 0).any(|p| (0..n).all(|i| w.letters()[i] == w.letters()[i % p]))
}

/// Common prefix of two periodic rays, capped where equality would be forever.
fn ray_overlap(p: &Word, q: &Word) -> usize {
    let cap = p.len() + q.len();
    (0..cap).take_while(|&i| p.letters()[i % p.len()] == q.letters()[i % q.len()]).count()
}

/// Signed position of the projection of the periodic ray `p` onto the axis
/// with core `d` through the identity.
fn ray_position(p: &Word, d: &Word) -> i64 {
    let fwd = ray_overlap(p, d);
    if fwd > 0 {
        fwd as i64
    } else {
        -(ray_overlap(p, &d.inverse()) as i64)
    }
}

/// Largest projection diameter of one axis onto the other.
fn pair_tau(c: &Word, d: &Word) -> usize {
    let onto = |c: &Word, d: &Word| ray_position(c, d).abs_diff(ray_position(&c.inverse(), d)) as usize;
    onto(c, d).max(onto(d, c))
}

/// Projection bound for axes through the identity with cyclically reduced cores.
pub fn pairwise_tau(cores: &[Word]) -> usize {
    let mut tau = 0;
    for i in 0..cores.len() {
        for j in i + 1..cores.len() {
            tau = tau.max(pair_tau(&cores[i], &cores[j]));
        }
    }
    tau
}

/// Deterministic separator triple of rank `k` whose elements have length at
/// least `min_length`, independent of every element of `avoid`. The returned
/// `tau` also bounds projections between separator axes and axes of `avoid`
/// through the identity.
pub fn separator_triple(rank: usize, min_length: usize, avoid: &[Word]) -> Result<SeparatorTriple> {
    if rank < 2 {
        return Err(Error::Domain("separator triples need rank >= 2".into()));
    }
    let mut classes: Vec<Word> = Vec::new();
    for c in shortlex(rank, 1).take_while(|w| w.len() <= 4) {
        if !c.is_cyclically_reduced() || is_proper_power(&c) {
            continue;
        }
        if avoid.iter().any(|a| !a.is_empty() && !independent(a, &c).unwrap()) {
            continue;
        }
        if classes.iter().all(|d| independent(d, &c).unwrap()) {
            classes.push(c);
        }
    }
    let avoid_cores: Vec<Word> = avoid.iter().filter(|a| !a.is_empty()).map(|a| axis_of(a).unwrap().core).collect();
    let tau_of = |cores: &[Word; 3]| {
        let against = cores.iter().flat_map(|c| avoid_cores.iter().map(move |d| pair_tau(c, d))).max().unwrap_or(0);
        pairwise_tau(cores).max(against)
    };
    let mut best: Option<(usize, usize, [usize; 3])> = None;
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            for k in j + 1..classes.len() {
                let cores = [classes[i].clone(), classes[j].clone(), classes[k].clone()];
                let key = (tau_of(&cores), cores.iter().map(Word::len).sum::<usize>(), [i, j, k]);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
    }
    let (tau, _, [i, j, k]) = best.ok_or_else(|| Error::Construction("no independent triple among short words".into()))?;
    let cores = [classes[i].clone(), classes[j].clone(), classes[k].clone()];
    Ok(SeparatorTriple { elements: cores.clone(), cores, tau }.with_min_length(min_length))
}

/// A subset `A` of `a_tilde` and the index of a separator whose axis sees
/// `[o, a o]` for `a` in `A` and `[o, b o]` in projections at most `tau`.
/// Among separators meeting `3|A| >= |a_tilde|`, the one seeing `b` least
/// is returned.
pub fn choose_subfamily(a_tilde: &[Word], b: &Word, f: &SeparatorTriple) -> Result<(Vec<Word>, usize)> {
    let o = Word::identity();
    let mut options = Vec::new();
    for i in 0..3 {
        let ax = f.axis(i);
        let pb = projection_diameter(&ax, (&o, b));
        if pb > f.tau {
            continue;
        }
        let keep: Vec<Word> = a_tilde.iter().filter(|a| projection_diameter(&ax, (&o, a)) <= f.tau).cloned().collect();
        options.push((3 * keep.len() >= a_tilde.len(), pb, keep, i));
    }
    let best = options
        .into_iter()
        .min_by(|x, y| y.0.cmp(&x.0).then(if x.0 { x.1.cmp(&y.1) } else { y.2.len().cmp(&x.2.len()) }).then(x.3.cmp(&y.3)))
        .ok_or_else(|| Error::Construction(format!("no separator admits the bridge {b}")))?;
    if !best.0 {
        return Err(Error::Construction(format!("subfamily of size {} from {}", best.2.len(), a_tilde.len())));
    }
    Ok((best.2, best.3))
}

/// One stage `a f b h` with `a` ranging over `family`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MyrbergStage {
    pub l: usize,
    pub delta: usize,
    pub family: Vec<Word>,
    pub f: Word,
    pub b: Word,
    pub h: Word,
    pub omega: f64,
}

impl MyrbergStage {
    pub fn block(&self, a: &Word) -> Word {
        concat(&[a, &self.f, &self.b, &self.h]).word
    }

    pub fn tail_len(&self) -> usize {
        self.f.len() + self.b.len() + self.h.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MyrbergSchedule {
    pub rank: usize,
    pub separators: SeparatorTriple,
    pub tau: usize,
    pub stages: Vec<MyrbergStage>,
}

/// Stages with `K_n = 1` and `Delta = 1`: `A_n` is cut from the separated
/// annulus by the separators `h_{n-1}` and `f_n`, and `b_n` is the `n`-th
/// stream element.
pub fn myrberg_schedule(rank: usize, l_sequence: &[usize], stream: &mut dyn Iterator<Item = Word>, f: &SeparatorTriple, budget: usize) -> Result<MyrbergSchedule> {
    let delta = 1;
    if l_sequence.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("L sequence must be nondecreasing".into()));
    }
    if l_sequence.iter().any(|&l| l < (10 * f.tau).max(delta + 1)) {
        return Err(Error::Domain(format!("every L must be at least 10 tau = {}", 10 * f.tau)));
    }
    let sep = crate::qrtree::separation_threshold(delta, f.tau);
    let mut cache: std::collections::HashMap<usize, Vec<Word>> = Default::default();
    let mut stages: Vec<MyrbergStage> = Vec::new();
    let mut prev_sum = 0usize;
    for (i, &l) in l_sequence.iter().enumerate() {
        if i > 0 && (l + delta) * i > prev_sum {
            return Err(Error::Construction(format!("stage {}: L + Delta exceeds the running average of block lengths", i + 1)));
        }
        let b = stream.next().ok_or_else(|| Error::Domain("stream ended".into()))?;
        if !cache.contains_key(&l) {
            let ann = annulus(rank, l, delta, budget)?;
            if ann.truncated {
                return Err(Error::Budget(format!("annulus at L = {l} exceeds budget {budget}")));
            }
            cache.insert(l, crate::qrtree::select_separated(&ann.elements, sep));
        }
        let mut family = cache[&l].clone();
        if let Some(prev) = stages.last_mut() {
            let (kept, j) = choose_subfamily(&family, &prev.b.inverse(), f)?;
            prev.h = f.elements[j].clone();
            family = kept;
        }
        let inv: Vec<Word> = family.iter().map(Word::inverse).collect();
        let (kept, j) = choose_subfamily(&inv, &b, f)?;
        family = kept.iter().map(Word::inverse).collect();
        family.sort();
        stages.push(MyrbergStage { l, delta, family, f: f.elements[j].clone(), b, h: Word::identity(), omega: 0.0 });
        prev_sum += l + delta + stages.last().unwrap().f.len() + stages.last().unwrap().b.len();
    }
    if let Some(last) = stages.last_mut() {
        let j = (0..3).find(|&j| projection_diameter(&f.axis(j), (&Word::identity(), &last.b.inverse())) <= f.tau).unwrap_or(0);
        last.h = f.elements[j].clone();
    }
    for st in &mut stages {
        st.omega = (st.family.len() as f64).ln() / (st.l + st.delta + st.tail_len()) as f64;
        for a in &st.family {
            let c = concat(&[a, &st.f, &st.b, &st.h]);
            if c.max() > f.tau {
                return Err(Error::Construction(format!("block {a} {} {} {} cancels {}", st.f, st.b, st.h, c.max())));
            }
        }
    }
    Ok(MyrbergSchedule { rank, separators: f.clone(), tau: f.tau, stages })
}

impl MyrbergSchedule {
    /// The same stages as a quasi-radial schedule whose family elements are
    /// whole blocks `a f b h`.
    pub fn to_schedule(&self) -> Schedule {
        let stages = self
            .stages
            .iter()
            .enumerate()
            .map(|(n, st)| Stage {
                l: st.l + st.tail_len(),
                delta: st.delta,
                family: AnnularFamily::Explicit(st.family.iter().map(|a| st.block(a)).collect()),
                k: 1,
                bridge: Word::identity(),
                omega: st.omega,
                witness: StageWitness { bridge_ratio: 0.0, bridge_bound: 1.0 / (n + 1) as f64, cumulative: None, lower_margin: 0.0 },
            })
            .collect();
        Schedule { rank: self.rank, stages, tau: self.tau, r: separation_radius(self.tau), escape: None }
    }
}

/// Tree of the words `W_m = (a_1 f_1 b_1 h_1) ... (a_m f_m b_m h_m)`.
pub fn build_myrberg_tree(schedule: &MyrbergSchedule, depth_budget: usize, node_budget: usize) -> Result<QRTree> {
    build_tree(&schedule.to_schedule(), depth_budget, node_budget)
}

/// A sampled ray through the first `stages` blocks, with the position of
/// each `b_n` in the reduced word.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MyrbergRay {
    pub word: Word,
    pub b_positions: Vec<usize>,
}

pub fn sample_myrberg_ray<R: Rng>(schedule: &MyrbergSchedule, stages: usize, rng: &mut R) -> Result<MyrbergRay> {
    if stages > schedule.stages.len() {
        return Err(Error::Horizon(format!("schedule has {} stages", schedule.stages.len())));
    }
    let mut word = Word::identity();
    let mut b_positions = Vec::with_capacity(stages);
    for st in &schedule.stages[..stages] {
        let a = &st.family[rng.gen_range(0..st.family.len())];
        for (k, piece) in [a, &st.f, &st.b, &st.h].into_iter().enumerate() {
            let c = word.cancellation(piece);
            if k == 2 {
                b_positions.push(word.len() - c);
            }
            word = word.mul(piece);
        }
    }
    Ok(MyrbergRay { word, b_positions })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub b: Word,
    pub index: usize,
    pub witness_position: usize,
    pub diameter: usize,
    pub required: i64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MyrbergCertificate {
    pub horizon: usize,
    pub radius: usize,
    pub witnesses: Vec<Witness>,
    pub passed: bool,
}

/// Longest stretch from ray position `j` that reads the bi-infinite word of
/// `core` (either orientation, any phase). Returns the run length.
fn run_at(ray: &Word, j: usize, core: &Word) -> usize {
    let letters = ray.letters();
    let mut best = 0;
    for dir in [core.clone(), core.inverse()] {
        for phase in 0..dir.len() {
            let run = letters[j..].iter().enumerate().take_while(|(t, x)| **x == dir.letters()[(phase + t) % dir.len()]).count();
            best = best.max(run);
        }
    }
    best
}

/// For each `b_i`, the best translate of its axis along the ray. With
/// `positions`, only translates starting within `radius` of the recorded
/// stage position are considered.
pub fn myrberg_certificate(ray: &Word, stream: &[Word], radius: usize, positions: Option<&[usize]>) -> Result<MyrbergCertificate> {
    let n = ray.len();
    if let Some(p) = positions {
        if p.len() < stream.len() {
            return Err(Error::Horizon(format!("{} stage positions for {} stream elements", p.len(), stream.len())));
        }
        if let Some(i) = (0..stream.len()).find(|&i| p[i] + stream[i].len() > n) {
            return Err(Error::Horizon(format!("ray of length {n} ends before element {i}")));
        }
    } else if stream.iter().any(|b| b.len() > n) {
        return Err(Error::Horizon(format!("ray of length {n} shorter than a stream element")));
    }
    let mut witnesses = Vec::with_capacity(stream.len());
    for (i, b) in stream.iter().enumerate() {
        let core = axis_of(b)?.core;
        let starts: Vec<usize> = match positions {
            Some(p) => (p[i].saturating_sub(radius)..=(p[i] + radius).min(n)).collect(),
            None => (0..=n).collect(),
        };
        let mut best = (0usize, starts[0]);
        for j in starts {
            let run = if j < n { run_at(ray, j, &core) } else { 0 };
            let hi = (j + run + radius).min(n);
            let lo = j.saturating_sub(radius);
            if hi - lo > best.0 {
                best = (hi - lo, j);
            }
        }
        let required = b.len() as i64 - 2 * radius as i64;
        witnesses.push(Witness {
            b: b.clone(),
            index: i + 1,
            witness_position: best.1,
            diameter: best.0,
            required,
            passed: best.0 as i64 >= required,
        });
    }
    let passed = witnesses.iter().all(|w| w.passed);
    Ok(MyrbergCertificate { horizon: stream.len(), radius, witnesses, passed })
}

/// Distance of a ray vertex set from the translate `g Ax(b)`, exact in the tree.
pub fn translate_intersection(ray: &Word, g: &Word, b: &Word, radius: usize) -> Option<(usize, usize)> {
    let ax = axis_of(&g.mul(b).mul(&g.inverse())).ok()?;
    let close: Vec<usize> = (0..=ray.len()).filter(|&i| ax.distance_to(&ray.prefix(i)) <= radius).collect();
    Some((*close.first()?, *close.last()?))
}
