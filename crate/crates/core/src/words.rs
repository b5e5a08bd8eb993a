//! Free group words, the word metric on the Cayley tree, axes and annular sets.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A generator or its inverse.
///
/// Encoded as `2 * generator + (sign == -1)`, so the derived order is
/// `a < A < b < B < ...`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub fn new(generator: usize, positive: bool) -> Letter {
        assert!(generator < 26, "at most 26 generators");
        Letter((generator as u8) << 1 | u8::from(!positive))
    }

    pub fn from_code(code: usize) -> Letter {
        Letter(code as u8)
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    pub fn generator(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }

    pub fn from_char(c: char) -> Option<Letter> {
        if c.is_ascii_lowercase() {
            Some(Letter::new((c as u8 - b'a') as usize, true))
        } else if c.is_ascii_uppercase() {
            Some(Letter::new((c as u8 - b'A') as usize, false))
        } else {
            None
        }
    }

    pub fn to_char(self) -> char {
        let base = if self.is_positive() { b'a' } else { b'A' };
        (base + self.generator() as u8) as char
    }

    /// All `2k` letters of rank `k` in enumeration order.
    pub fn all(rank: usize) -> impl Iterator<Item = Letter> {
        (0..2 * rank).map(Letter::from_code)
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A freely reduced word. Doubles as a group element and a vertex of the
/// Cayley tree; `len()` is the distance from the identity.
///
/// Ordering is length-lexicographic.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word {
    letters: Vec<Letter>,
}

/// Free reduction of an arbitrary letter sequence.
pub fn reduce<I: IntoIterator<Item = Letter>>(letters: I) -> Word {
    let mut out: Vec<Letter> = Vec::new();
    for x in letters {
        if out.last() == Some(&x.inverse()) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    Word { letters: out }
}

impl Word {
    pub fn identity() -> Word {
        Word::default()
    }

    pub fn letter(x: Letter) -> Word {
        Word { letters: vec![x] }
    }

    /// Parses `aBba`-style strings and reduces them.
    pub fn parse(s: &str) -> Result<Word> {
        let s = s.trim();
        if s == "e" || s == "1" || s.is_empty() {
            return Ok(Word::identity());
        }
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            letters.push(Letter::from_char(c).ok_or_else(|| Error::Parse(format!("bad letter {c:?} in word {s:?}")))?);
        }
        Ok(reduce(letters))
    }

    /// Wraps letters already known to be reduced.
    pub fn from_reduced(letters: Vec<Letter>) -> Word {
        debug_assert!(letters.windows(2).all(|p| p[0] != p[1].inverse()));
        Word { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    /// Largest generator index used, plus one.
    pub fn min_rank(&self) -> usize {
        self.letters.iter().map(|x| x.generator() + 1).max().unwrap_or(0)
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|x| x.inverse()).collect() }
    }

    pub fn mul(&self, other: &Word) -> Word {
        let c = lcp(&self.inverse(), other);
        let mut letters = Vec::with_capacity(self.len() + other.len() - 2 * c);
        letters.extend_from_slice(&self.letters[..self.len() - c]);
        letters.extend_from_slice(&other.letters[c..]);
        Word { letters }
    }

    /// Number of letters cancelled on each side when forming `self * other`.
    pub fn cancellation(&self, other: &Word) -> usize {
        lcp(&self.inverse(), other)
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..n.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word { letters: self.letters[..n.min(self.len())].to_vec() }
    }

    pub fn suffix_from(&self, n: usize) -> Word {
        Word { letters: self.letters[n.min(self.len())..].to_vec() }
    }

    pub fn push(&mut self, x: Letter) {
        if self.letters.last() == Some(&x.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(x);
        }
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.first(), self.last()) {
            (Some(f), Some(l)) => self.len() == 1 || f != l.inverse(),
            _ => true,
        }
    }

    /// Distance in the Cayley tree.
    pub fn dist(&self, other: &Word) -> usize {
        let c = lcp(self, other);
        self.len() + other.len() - 2 * c
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.letters.starts_with(&self.letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for x in &self.letters {
            write!(f, "{}", x.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Word) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Word) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::str::FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Word> {
        Word::parse(s)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Word, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Longest common prefix of two words.
pub fn lcp(u: &Word, v: &Word) -> usize {
    u.letters.iter().zip(&v.letters).take_while(|(x, y)| x == y).count()
}

/// Gromov product at the identity. In the tree this is the common prefix length.
pub fn gromov_product(u: &Word, v: &Word) -> usize {
    lcp(u, v)
}

/// Common prefix of a word with the periodic infinite word `p p p ...`.
pub fn lcp_periodic(u: &Word, p: &Word) -> usize {
    if p.is_empty() {
        return 0;
    }
    u.letters.iter().enumerate().take_while(|(i, x)| **x == p.letters[i % p.len()]).count()
}

/// Axis data `w = conjugator * core * conjugator^-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub conjugator: Word,
    pub core: Word,
}

pub fn axis_of(w: &Word) -> Result<Axis> {
    if w.is_empty() {
        return Err(Error::Domain("identity has no axis".into()));
    }
    let l = w.letters();
    let mut i = 0;
    while l[i] == l[l.len() - 1 - i].inverse() {
        i += 1;
    }
    Ok(Axis {
        conjugator: Word::from_reduced(l[..i].to_vec()),
        core: Word::from_reduced(l[i..l.len() - i].to_vec()),
    })
}

impl Axis {
    /// Signed position of the projection of `v` onto the axis line, in the
    /// frame where the line passes through the conjugator.
    pub fn position(&self, v: &Word) -> i64 {
        let local = self.conjugator.inverse().mul(v);
        let fwd = lcp_periodic(&local, &self.core);
        if fwd > 0 {
            return fwd as i64;
        }
        -(lcp_periodic(&local, &self.core.inverse()) as i64)
    }

    /// Distance from vertex `v` to the axis line.
    pub fn distance_to(&self, v: &Word) -> usize {
        let local = self.conjugator.inverse().mul(v);
        let fwd = lcp_periodic(&local, &self.core);
        let bwd = lcp_periodic(&local, &self.core.inverse());
        local.len() - fwd.max(bwd)
    }

    /// The axis vertex at signed position `t`.
    pub fn point(&self, t: i64) -> Word {
        let (dir, n) = if t >= 0 { (self.core.clone(), t as usize) } else { (self.core.inverse(), (-t) as usize) };
        let letters = (0..n).map(|i| dir.letters[i % dir.len()]).collect();
        self.conjugator.mul(&Word::from_reduced(letters))
    }
}

/// Diameter of the nearest-point projection of the geodesic `[x, y]` onto the axis.
pub fn projection_diameter(axis: &Axis, segment: (&Word, &Word)) -> usize {
    (axis.position(segment.0) - axis.position(segment.1)).unsigned_abs() as usize
}

fn rotation_of(u: &Word, v: &Word) -> bool {
    if u.len() != v.len() {
        return false;
    }
    let n = u.len();
    (0..n).any(|r| (0..n).all(|i| u.letters[(i + r) % n] == v.letters[i]))
}

/// Independence of two loxodromic elements up to conjugacy: no rotation of a
/// power of one core equals a power of the other core or of its inverse.
pub fn independent(w1: &Word, w2: &Word) -> Result<bool> {
    let c1 = axis_of(w1)?.core;
    let c2 = axis_of(w2)?.core;
    let cap = 2 * c1.len().max(c2.len());
    let c2i = c2.inverse();
    for p in 1..=cap {
        for q in 1..=cap {
            if c1.len() * p != c2.len() * q {
                continue;
            }
            let u = c1.pow(p as i64);
            if rotation_of(&u, &c2.pow(q as i64)) || rotation_of(&u, &c2i.pow(q as i64)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Number of reduced words of length `n` in rank `k`.
pub fn sphere_size(rank: usize, n: usize) -> u128 {
    if n == 0 {
        1
    } else {
        2 * rank as u128 * (2 * rank as u128 - 1).pow(n as u32 - 1)
    }
}

pub fn ball_size(rank: usize, n: usize) -> u128 {
    (0..=n).map(|i| sphere_size(rank, i)).sum()
}

/// Lexicographic enumeration of all reduced words of a fixed length.
#[derive(Clone, Debug)]
pub struct SphereIter {
    rank: usize,
    current: Vec<usize>,
    done: bool,
}

impl SphereIter {
    pub fn new(rank: usize, n: usize) -> SphereIter {
        let mut current = Vec::with_capacity(n);
        for _ in 0..n {
            let next = (0..2 * rank).find(|&c| current.last().map_or(true, |&p: &usize| c != p ^ 1)).unwrap();
            current.push(next);
        }
        SphereIter { rank, current, done: rank == 0 && n > 0 }
    }

    fn advance(&mut self) -> bool {
        let d = 2 * self.rank;
        let mut i = self.current.len();
        while i > 0 {
            i -= 1;
            let prev = if i == 0 { None } else { Some(self.current[i - 1]) };
            let mut c = self.current[i] + 1;
            while c < d && prev == Some(c ^ 1) {
                c += 1;
            }
            if c < d {
                self.current[i] = c;
                for j in i + 1..self.current.len() {
                    let p = self.current[j - 1];
                    self.current[j] = if p ^ 1 == 0 { 1 } else { 0 };
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for SphereIter {
    type Item = Word;
    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        let w = Word::from_reduced(self.current.iter().map(|&c| Letter::from_code(c)).collect());
        if !self.advance() {
            self.done = true;
        }
        Some(w)
    }
}

/// Reduced words of rank `k` in length-lexicographic order, starting at length `from`.
pub fn shortlex(rank: usize, from: usize) -> impl Iterator<Item = Word> {
    (from..).flat_map(move |n| SphereIter::new(rank, n))
}

/// A product of pieces with the cancellation at each junction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concat {
    pub word: Word,
    /// `cancellations[i]` letters cancel on each side when piece `i + 1` is appended.
    pub cancellations: Vec<usize>,
}

impl Concat {
    pub fn total(&self) -> usize {
        self.cancellations.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.cancellations.iter().copied().max().unwrap_or(0)
    }
}

pub fn concat(pieces: &[&Word]) -> Concat {
    let mut word = Word::identity();
    let mut cancellations = Vec::with_capacity(pieces.len().saturating_sub(1));
    for (i, p) in pieces.iter().enumerate() {
        if i > 0 {
            cancellations.push(word.cancellation(p));
        }
        word = word.mul(p);
    }
    Concat { word, cancellations }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnularSet {
    pub l: usize,
    pub delta: usize,
    pub elements: Vec<Word>,
    pub truncated: bool,
}

/// Reduced words with length in `[L - Delta, L + Delta]`, at most `budget` of them.
pub fn annulus(rank: usize, l: usize, delta: usize, budget: usize) -> Result<AnnularSet> {
    if l == 0 || delta >= l {
        return Err(Error::Domain(format!("annulus needs L >= 1 and 0 <= Delta < L, got L={l}, Delta={delta}")));
    }
    let mut elements = Vec::new();
    let mut truncated = false;
    'outer: for n in l - delta..=l + delta {
        for w in SphereIter::new(rank, n) {
            if elements.len() == budget {
                truncated = true;
                break 'outer;
            }
            elements.push(w);
        }
    }
    Ok(AnnularSet { l, delta, elements, truncated })
}

/// Reduced words of length `n` whose first letter is `first`, in lexicographic order.
pub fn words_starting_with(rank: usize, n: usize, first: Letter) -> impl Iterator<Item = Word> {
    SphereIter::new(rank, n).filter(move |w| w.first() == Some(first))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    fn naive_reduce(mut v: Vec<Letter>) -> Vec<Letter> {
        loop {
            let pos = v.windows(2).position(|p| p[0] == p[1].inverse());
            match pos {
                Some(i) => {
                    v.drain(i..i + 2);
                }
                None => return v,
            }
        }
    }

    fn letters(rank: usize, max: usize) -> impl Strategy<Value = Vec<Letter>> {
        prop::collection::vec((0..2 * rank).prop_map(Letter::from_code), 0..max)
    }

    fn word(rank: usize, max: usize) -> impl Strategy<Value = Word> {
        letters(rank, max).prop_map(reduce)
    }

    fn all_words(rank: usize, max: usize) -> Vec<Word> {
        (0..=max).flat_map(|n| SphereIter::new(rank, n)).collect()
    }

    #[test]
    fn reduce_examples() {
        assert!(w("aA").is_empty());
        assert_eq!(w("abBa"), w("aa"));
        assert_eq!(w("aa").to_string(), "aa");
    }

    #[test]
    fn gromov_examples() {
        assert_eq!(gromov_product(&w("ab"), &w("ac")), 1);
        let u = w("abAB");
        assert_eq!(gromov_product(&u, &u), 4);
    }

    #[test]
    fn gromov_exhaustive_rank_two() {
        let all = all_words(2, 4);
        for u in &all {
            for v in &all {
                let metric = (u.len() + v.len() - u.inverse().mul(v).len()) / 2;
                assert_eq!(gromov_product(u, v), metric);
            }
        }
    }

    #[test]
    fn axis_examples() {
        let a = axis_of(&w("ab")).unwrap();
        assert!(a.conjugator.is_empty());
        assert_eq!(a.core, w("ab"));
        let a = axis_of(&w("abA")).unwrap();
        assert_eq!(a.conjugator, w("a"));
        assert_eq!(a.core, w("b"));
        assert!(axis_of(&Word::identity()).is_err());
    }

    #[test]
    fn axis_reconstruction_up_to_length_eight() {
        for v in all_words(2, 8).into_iter().skip(1) {
            let ax = axis_of(&v).unwrap();
            assert!(ax.core.is_cyclically_reduced());
            assert_eq!(ax.conjugator.mul(&ax.core).mul(&ax.conjugator.inverse()), v);
        }
    }

    #[test]
    fn independence_examples() {
        assert!(!independent(&w("ab"), &w("ab")).unwrap());
        assert!(independent(&w("a"), &w("b")).unwrap());
        assert!(!independent(&w("ab"), &w("ababab")).unwrap());
        assert!(!independent(&w("ab"), &w("BA")).unwrap());
        assert!(!independent(&w("ab"), &w("ba")).unwrap());
        assert!(independent(&w("ab"), &w("aB")).unwrap());
    }

    #[test]
    fn projection_examples() {
        let ax = axis_of(&w("a")).unwrap();
        assert_eq!(projection_diameter(&ax, (&w("b"), &w("bb"))), 0);
        assert_eq!(projection_diameter(&ax, (&Word::identity(), &w("aaa"))), 3);
    }

    fn geodesic(x: &Word, y: &Word) -> Vec<Word> {
        let c = lcp(x, y);
        let mut out: Vec<Word> = (c..=x.len()).rev().map(|i| x.prefix(i)).collect();
        out.extend((c + 1..=y.len()).map(|i| y.prefix(i)));
        out
    }

    fn brute_projection(ax: &Axis, x: &Word, y: &Word) -> usize {
        let span = (x.len() + y.len() + ax.conjugator.len() + 2 * ax.core.len()) as i64 * 2;
        let line: Vec<(i64, Word)> = (-span..=span).map(|t| (t, ax.point(t))).collect();
        let proj: Vec<i64> = geodesic(x, y)
            .iter()
            .map(|v| line.iter().min_by_key(|(_, p)| p.dist(v)).unwrap().0)
            .collect();
        (proj.iter().max().unwrap() - proj.iter().min().unwrap()) as usize
    }

    #[test]
    fn annulus_examples() {
        assert_eq!(annulus(2, 3, 0, usize::MAX).unwrap().elements.len(), 36);
        let one: Vec<String> = annulus(2, 1, 0, usize::MAX).unwrap().elements.iter().map(|w| w.to_string()).collect();
        assert_eq!(one, ["a", "A", "b", "B"]);
        assert!(annulus(2, 2, 2, 10).is_err());
        let t = annulus(2, 4, 0, 10).unwrap();
        assert!(t.truncated);
        assert_eq!(t.elements.len(), 10);
    }

    fn dfs_words(rank: usize, n: usize, prefix: &mut Vec<Letter>, out: &mut Vec<Word>) {
        if prefix.len() == n {
            out.push(Word::from_reduced(prefix.clone()));
            return;
        }
        for x in Letter::all(rank) {
            if prefix.last() != Some(&x.inverse()) {
                prefix.push(x);
                dfs_words(rank, n, prefix, out);
                prefix.pop();
            }
        }
    }

    #[test]
    fn annulus_matches_dfs_rank_three() {
        let a = annulus(3, 4, 1, usize::MAX).unwrap();
        let mut dfs = Vec::new();
        for n in 3..=5 {
            dfs_words(3, n, &mut Vec::new(), &mut dfs);
        }
        assert_eq!(a.elements, dfs);
        let expected: u128 = (3..=5).map(|n| sphere_size(3, n)).sum();
        assert_eq!(a.elements.len() as u128, expected);
    }

    #[test]
    fn sphere_iter_is_sorted() {
        let v: Vec<Word> = SphereIter::new(2, 5).collect();
        assert_eq!(v.len() as u128, sphere_size(2, 5));
        assert!(v.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(SphereIter::new(2, 0).count(), 1);
    }

    #[test]
    fn words_starting_with_counts() {
        let a = Letter::new(0, true);
        assert_eq!(words_starting_with(2, 4, a).count(), 27);
        assert!(words_starting_with(2, 4, a).all(|w| w.first() == Some(a) && w.len() == 4));
        assert_eq!(words_starting_with(2, 1, a).count(), 1);
    }

    proptest! {
        #[test]
        fn reduce_matches_naive(v in letters(3, 200)) {
            prop_assert_eq!(reduce(v.clone()).letters().to_vec(), naive_reduce(v));
        }

        #[test]
        fn gromov_formula(u in word(2, 12), v in word(2, 12)) {
            prop_assert_eq!(2 * gromov_product(&u, &v), u.len() + v.len() - u.inverse().mul(&v).len());
        }

        #[test]
        fn triangle_inequality(u in word(2, 10), v in word(2, 10), x in word(2, 10)) {
            prop_assert!(u.dist(&x) <= u.dist(&v) + v.dist(&x));
            prop_assert_eq!(u.dist(&v), u.inverse().mul(&v).len());
        }

        #[test]
        fn axis_is_invariant(v in word(2, 10)) {
            prop_assume!(!v.is_empty());
            let ax = axis_of(&v).unwrap();
            for t in -6i64..=6 {
                let p = ax.point(t);
                prop_assert_eq!(ax.distance_to(&p), 0);
                let moved = v.mul(&p);
                prop_assert_eq!(ax.distance_to(&moved), 0);
                prop_assert_eq!(ax.position(&moved), t + ax.core.len() as i64);
            }
        }

        #[test]
        fn projection_matches_brute_force(c in word(2, 3), core in word(2, 3), x in word(2, 6), y in word(2, 6)) {
            prop_assume!(!core.is_empty() && core.is_cyclically_reduced());
            let v = c.mul(&core).mul(&c.inverse());
            let ax = axis_of(&v).unwrap();
            prop_assert_eq!(projection_diameter(&ax, (&x, &y)), brute_projection(&ax, &x, &y));
        }

        #[test]
        fn concat_ledger_accounts_for_length(u in word(2, 8), v in word(2, 8), x in word(2, 8)) {
            let c = concat(&[&u, &v, &x]);
            prop_assert_eq!(c.word.clone(), u.mul(&v).mul(&x));
            prop_assert_eq!(c.word.len() + 2 * c.total(), u.len() + v.len() + x.len());
        }

        #[test]
        fn multiplication_is_associative(u in word(2, 8), v in word(2, 8), x in word(2, 8)) {
            prop_assert_eq!(u.mul(&v).mul(&x), u.mul(&v.mul(&x)));
            prop_assert!(u.mul(&u.inverse()).is_empty());
        }
    }
}
