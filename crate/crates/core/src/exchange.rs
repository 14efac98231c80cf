//! Finitely supported permutations, Cesàro means over finite symmetric
//! groups, and the factorization conditions for symmetric states.
//!
//! The limit over increasing finite index sets is never taken. Means are
//! computed exactly at each finite `I` and clustering is reported as a
//! sequence over growing prefixes of `I`, together with the counting bound
//! `2‖A‖‖B‖ · |{g : g(I_A) ∩ I_B ≠ ∅}| / |P_I|`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Error, Result};
use crate::Index;

/// Largest index set that may be enumerated (10! ≈ 3.6M elements).
pub const MAX_ENUM: usize = 10;

const CHUNK: usize = 720;

/// Bijection of the index set that moves only finitely many points.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Permutation {
    // only non-fixed points
    moved: BTreeMap<Index, Index>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.moved.is_empty() {
            return write!(f, "id");
        }
        write!(f, "{{")?;
        for (i, (a, b)) in self.moved.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}→{b}")?;
        }
        write!(f, "}}")
    }
}

impl Permutation {
    pub fn identity() -> Self {
        Self::default()
    }

    /// From explicit `(from, to)` pairs; must be a bijection of the `from` set.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Index, Index)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (a, b) in pairs {
            if map.insert(a, b).is_some() {
                return reject(format!("index {a} mapped twice"));
            }
        }
        let dom: BTreeSet<Index> = map.keys().copied().collect();
        let img: BTreeSet<Index> = map.values().copied().collect();
        if img.len() != map.len() || dom != img {
            return reject("mapping is not a bijection of its support");
        }
        map.retain(|a, b| a != b);
        Ok(Permutation { moved: map })
    }

    /// `domain[i] ↦ images[i]`.
    pub fn from_images(domain: &[Index], images: &[Index]) -> Result<Self> {
        if domain.len() != images.len() {
            return reject("domain and image lists differ in length");
        }
        Self::from_pairs(domain.iter().copied().zip(images.iter().copied()))
    }

    pub fn transposition(a: Index, b: Index) -> Self {
        let mut moved = BTreeMap::new();
        if a != b {
            moved.insert(a, b);
            moved.insert(b, a);
        }
        Permutation { moved }
    }

    /// Cycle `c[0] → c[1] → … → c[0]`.
    pub fn cycle(c: &[Index]) -> Result<Self> {
        let n = c.len();
        Self::from_pairs((0..n).map(|i| (c[i], c[(i + 1) % n])))
    }

    pub fn apply(&self, i: Index) -> Index {
        self.moved.get(&i).copied().unwrap_or(i)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let pts: BTreeSet<Index> = self.moved.keys().chain(other.moved.keys()).copied().collect();
        let moved = pts
            .into_iter()
            .map(|i| (i, self.apply(other.apply(i))))
            .filter(|(a, b)| a != b)
            .collect();
        Permutation { moved }
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            moved: self.moved.iter().map(|(&a, &b)| (b, a)).collect(),
        }
    }

    pub fn support(&self) -> BTreeSet<Index> {
        self.moved.keys().copied().collect()
    }

    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }

    pub fn supported_in(&self, set: &BTreeSet<Index>) -> bool {
        self.moved.keys().all(|k| set.contains(k))
    }

    pub fn image_set(&self, set: &BTreeSet<Index>) -> BTreeSet<Index> {
        set.iter().map(|&i| self.apply(i)).collect()
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

fn sorted_domain(set: &[Index]) -> Result<Vec<Index>> {
    let mut d = set.to_vec();
    d.sort_unstable();
    d.dedup();
    if d.len() != set.len() {
        return reject("index set contains duplicates");
    }
    if d.len() > MAX_ENUM {
        return Err(Error::ResourceLimit(format!(
            "|I| = {} exceeds the enumeration limit {MAX_ENUM}",
            d.len()
        )));
    }
    Ok(d)
}

/// In-place lexicographic successor; false when already the last arrangement.
fn next_arrangement(v: &mut [Index]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Image tuple of rank `rank` in lexicographic order (factorial number system).
fn unrank(domain: &[Index], mut rank: usize) -> Vec<Index> {
    let mut pool = domain.to_vec();
    let mut out = Vec::with_capacity(pool.len());
    for k in (0..domain.len()).rev() {
        let f = factorial(k);
        out.push(pool.remove(rank / f));
        rank %= f;
    }
    out
}

/// Lexicographic stream of all permutations of a finite index set.
pub struct PermIter {
    domain: Vec<Index>,
    images: Vec<Index>,
    remaining: usize,
}

impl Iterator for PermIter {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        if self.remaining == 0 {
            return None;
        }
        let p = Permutation::from_images(&self.domain, &self.images).expect("arrangement");
        self.remaining -= 1;
        if self.remaining > 0 {
            next_arrangement(&mut self.images);
        }
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for PermIter {}

/// Every permutation of `set` once, ordered lexicographically by image tuple
/// over the sorted domain.
pub fn enumerate_perms(set: &[Index]) -> Result<PermIter> {
    let domain = sorted_domain(set)?;
    Ok(PermIter {
        images: domain.clone(),
        remaining: factorial(domain.len()),
        domain,
    })
}

fn perms_from_rank(domain: &[Index], start: usize, count: usize) -> PermIter {
    PermIter {
        domain: domain.to_vec(),
        images: unrank(domain, start),
        remaining: count,
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Arithmetic mean of `f` over all of `P_I`.
///
/// The permutation stream is cut into fixed-size chunks by rank; chunks may
/// run on different workers but partial sums are reduced in rank order, so
/// the result does not depend on scheduling. Sums are compensated.
pub fn cesaro_mean<F>(f: F, set: &[Index]) -> Result<Complex64>
where
    F: Fn(&Permutation) -> Result<Complex64> + Sync,
{
    let domain = sorted_domain(set)?;
    let total = factorial(domain.len());
    let chunks = total.div_ceil(CHUNK);
    let partials: Vec<Result<[Compensated; 2]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let count = CHUNK.min(total - start);
            let mut s = [Compensated::default(); 2];
            for g in perms_from_rank(&domain, start, count) {
                let z = f(&g)?;
                s[0].add(z.re);
                s[1].add(z.im);
            }
            Ok(s)
        })
        .collect();
    let mut sum = [Compensated::default(); 2];
    for p in partials {
        let p = p?;
        for k in 0..2 {
            sum[k].add(p[k].sum);
            sum[k].add(p[k].comp);
        }
    }
    Ok(Complex64::new(sum[0].value(), sum[1].value()) / total as f64)
}

/// Fraction of `g ∈ P_I` with `g(T) ∩ S = ∅` for fixed `|S| = s`, `|T| = t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DisjointFraction {
    pub value: Ratio<u64>,
    /// false when `s + t > |I|`, where no disjoint placement exists.
    pub feasible: bool,
}

impl DisjointFraction {
    pub fn as_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }
}

/// `(n-s)!/(n-s-t)! · (n-t)! / n!`: injections of `T` into `I \ S`, times
/// arbitrary placement of the rest, over `|P_I|`.
pub fn disjoint_fraction(n: usize, s: usize, t: usize) -> Result<DisjointFraction> {
    if n > 20 {
        return Err(Error::ResourceLimit(format!("|I| = {n} overflows exact counting")));
    }
    if s + t > n {
        return Ok(DisjointFraction {
            value: Ratio::from_integer(0),
            feasible: false,
        });
    }
    let falling = |from: usize, k: usize| -> u64 { (0..k).map(|i| (from - i) as u64).product() };
    // (n-s)_t / (n)_t, where (x)_k is the falling factorial
    let num = falling(n - s, t);
    let den = falling(n, t);
    Ok(DisjointFraction {
        value: Ratio::new(num, den),
        feasible: true,
    })
}

/// One row of a clustering table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CesaroReport {
    pub n: usize,
    pub mean: Complex64,
    pub target: Complex64,
    pub gap: f64,
    pub bound: f64,
}

impl CesaroReport {
    pub fn new(n: usize, mean: Complex64, target: Complex64, bound: f64) -> Self {
        CesaroReport {
            n,
            mean,
            target,
            gap: (mean - target).norm(),
            bound: bound.max(0.0),
        }
    }
}

pub const CESARO_CSV_HEADER: &str = "n,mean_re,mean_im,target_re,target_im,gap,bound";

/// CSV table with the fixed header above.
pub fn cesaro_csv(rows: &[CesaroReport]) -> String {
    let mut out = String::from(CESARO_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.n, r.mean.re, r.mean.im, r.target.re, r.target.im, r.gap, r.bound
        ));
    }
    out
}

/// Multiplication, relabeling and supports for elements localized on sites.
pub trait LocalAlgebra: Sync {
    type Elem: Clone + Send + Sync;

    fn product(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn relabel(&self, g: &Permutation, a: &Self::Elem) -> Self::Elem;
    fn support(&self, a: &Self::Elem) -> BTreeSet<Index>;
}

/// Normalized functional on a [`LocalAlgebra`].
pub trait StateFunctional: Sync {
    type Algebra: LocalAlgebra;

    fn algebra(&self) -> &Self::Algebra;
    fn eval(&self, x: &<Self::Algebra as LocalAlgebra>::Elem) -> Result<Complex64>;
    /// Norm used in the clustering bound.
    fn norm(&self, x: &<Self::Algebra as LocalAlgebra>::Elem) -> Result<f64>;
}

/// Element together with a declared support containing its true support.
#[derive(Clone, Debug)]
pub struct Localized<E> {
    pub elem: E,
    pub support: BTreeSet<Index>,
}

impl<E> Localized<E> {
    pub fn new(elem: E, support: impl IntoIterator<Item = Index>) -> Self {
        Localized {
            elem,
            support: support.into_iter().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    /// `φ(A₁A₂) = φ(A₁)φ(A₂)` for disjoint supports.
    ProductState,
    /// `φ(A₁A₂A₃) = φ(A₁A₃)φ(A₂)` when `A₂` is supported off `A₁, A₃`.
    BlockSingleton,
    /// `M{φ(α_g(A)B)} = φ(A)φ(B)`.
    WeakClustering,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConditionReport {
    Pointwise { lhs: Complex64, rhs: Complex64, gap: f64 },
    Clustering(Vec<CesaroReport>),
}

impl ConditionReport {
    /// Largest gap over all rows.
    pub fn max_gap(&self) -> f64 {
        match self {
            ConditionReport::Pointwise { gap, .. } => *gap,
            ConditionReport::Clustering(rows) => rows.iter().map(|r| r.gap).fold(0.0, f64::max),
        }
    }
}

/// Evaluate one factorization condition for `phi` on `tuple`.
///
/// Product state takes `[A₁, A₂]`, block singleton `[A₁, A₂, A₃]`, weak
/// clustering `[A, B]`. For weak clustering the report has one row per prefix
/// of the sorted `index_set` that contains both supports and has at least
/// `|I_A| + |I_B|` elements.
pub fn check_condition<S: StateFunctional>(
    phi: &S,
    kind: ConditionKind,
    tuple: &[Localized<<S::Algebra as LocalAlgebra>::Elem>],
    index_set: &[Index],
) -> Result<ConditionReport> {
    let alg = phi.algebra();
    let universe: BTreeSet<Index> = index_set.iter().copied().collect();
    for (k, loc) in tuple.iter().enumerate() {
        let actual = alg.support(&loc.elem);
        if !actual.is_subset(&loc.support) {
            return reject(format!("element {k} has support outside its declared support"));
        }
        if !loc.support.is_subset(&universe) {
            return reject(format!("element {k} is supported outside the index set"));
        }
    }
    let arity = match kind {
        ConditionKind::ProductState | ConditionKind::WeakClustering => 2,
        ConditionKind::BlockSingleton => 3,
    };
    if tuple.len() != arity {
        return reject(format!("{kind:?} needs {arity} elements, got {}", tuple.len()));
    }
    match kind {
        ConditionKind::ProductState => {
            let (a1, a2) = (&tuple[0], &tuple[1]);
            if !a1.support.is_disjoint(&a2.support) {
                return reject("product-state condition needs I₁ ∩ I₂ = ∅");
            }
            let lhs = phi.eval(&alg.product(&a1.elem, &a2.elem)?)?;
            let rhs = phi.eval(&a1.elem)? * phi.eval(&a2.elem)?;
            Ok(ConditionReport::Pointwise { lhs, rhs, gap: (lhs - rhs).norm() })
        }
        ConditionKind::BlockSingleton => {
            let (a1, a2, a3) = (&tuple[0], &tuple[1], &tuple[2]);
            let outer: BTreeSet<Index> = a1.support.union(&a3.support).copied().collect();
            if !outer.is_disjoint(&a2.support) {
                return reject("block-singleton condition needs (I₁ ∪ I₃) ∩ I₂ = ∅");
            }
            let lhs = phi.eval(&alg.product(&alg.product(&a1.elem, &a2.elem)?, &a3.elem)?)?;
            let rhs = phi.eval(&alg.product(&a1.elem, &a3.elem)?)? * phi.eval(&a2.elem)?;
            Ok(ConditionReport::Pointwise { lhs, rhs, gap: (lhs - rhs).norm() })
        }
        ConditionKind::WeakClustering => {
            let (a, b) = (&tuple[0], &tuple[1]);
            weak_clustering(phi, a, b, index_set).map(ConditionReport::Clustering)
        }
    }
}

fn weak_clustering<S: StateFunctional>(
    phi: &S,
    a: &Localized<<S::Algebra as LocalAlgebra>::Elem>,
    b: &Localized<<S::Algebra as LocalAlgebra>::Elem>,
    index_set: &[Index],
) -> Result<Vec<CesaroReport>> {
    let alg = phi.algebra();
    let mut sorted = index_set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let (t, s) = (a.support.len(), b.support.len());
    let needed: BTreeSet<Index> = a.support.union(&b.support).copied().collect();
    let cover = needed
        .iter()
        .map(|i| sorted.iter().position(|x| x == i).expect("checked subset") + 1)
        .max()
        .unwrap_or(0);
    let start = cover.max(s + t).max(1);
    if sorted.len() > MAX_ENUM {
        return Err(Error::ResourceLimit(format!(
            "|I| = {} exceeds the enumeration limit {MAX_ENUM}",
            sorted.len()
        )));
    }
    let target = phi.eval(&a.elem)? * phi.eval(&b.elem)?;
    let norm_ab = phi.norm(&a.elem)? * phi.norm(&b.elem)?;
    let mut rows = Vec::new();
    for n in start..=sorted.len() {
        let prefix = &sorted[..n];
        let mean = cesaro_mean(
            |g| {
                let moved = alg.relabel(g, &a.elem);
                phi.eval(&alg.product(&moved, &b.elem)?)
            },
            prefix,
        )?;
        let frac = disjoint_fraction(n, s, t)?;
        let bound = 2.0 * norm_ab * (1.0 - frac.as_f64());
        rows.push(CesaroReport::new(n, mean, target, bound));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzz::Fuzz;

    fn range(n: Index) -> Vec<Index> {
        (1..=n).collect()
    }

    #[test]
    fn enumerate_small_sets() {
        let one: Vec<_> = enumerate_perms(&[1]).unwrap().collect();
        assert_eq!(one, vec![Permutation::identity()]);
        assert_eq!(enumerate_perms(&[1, 2]).unwrap().count(), 2);
    }

    #[test]
    fn enumerate_five_distinct() {
        let all: Vec<_> = enumerate_perms(&range(5)).unwrap().collect();
        assert_eq!(all.len(), 120);
        let set: BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), 120);
        // first is identity, last is the reversal
        assert!(all[0].is_identity());
        assert_eq!(all[119].apply(1), 5);
        assert_eq!(all[119].apply(5), 1);
    }

    #[test]
    fn enumeration_is_lexicographic_and_unrank_agrees() {
        let d = range(4);
        let imgs: Vec<Vec<Index>> = enumerate_perms(&d)
            .unwrap()
            .map(|g| d.iter().map(|&i| g.apply(i)).collect())
            .collect();
        let mut sorted = imgs.clone();
        sorted.sort();
        assert_eq!(imgs, sorted);
        for (r, im) in imgs.iter().enumerate() {
            assert_eq!(&unrank(&d, r), im);
        }
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(enumerate_perms(&range(11)), Err(Error::ResourceLimit(_))));
        assert!(matches!(enumerate_perms(&[1, 1]), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn permutation_algebra() {
        let g = Permutation::cycle(&[1, 2, 3]).unwrap();
        let h = Permutation::transposition(1, 2);
        let gh = g.compose(&h);
        for i in 1..=3 {
            assert_eq!(gh.apply(i), g.apply(h.apply(i)));
        }
        assert!(g.compose(&g.inverse()).is_identity());
        assert!(Permutation::from_pairs([(1, 2), (2, 2)]).is_err());
    }

    #[test]
    fn cesaro_constant() {
        let c = Complex64::new(0.3, -2.0);
        let m = cesaro_mean(|_| Ok(c), &range(4)).unwrap();
        assert!((m - c).norm() < 1e-15);
    }

    #[test]
    fn cesaro_fixed_point_indicator() {
        for n in 1..=7 {
            let m = cesaro_mean(
                |g| Ok(Complex64::new(if g.apply(1) == 1 { 1.0 } else { 0.0 }, 0.0)),
                &range(n),
            )
            .unwrap();
            assert!((m.re - 1.0 / n as f64).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn cesaro_spans_multiple_chunks() {
        // 7! = 5040 spans several chunks of 720.
        let m = cesaro_mean(|g| Ok(Complex64::new(g.apply(3) as f64, 0.0)), &range(7)).unwrap();
        assert!((m.re - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cesaro_order_invariant() {
        let mut fz = Fuzz::new(11);
        let d = range(6);
        let weights: Vec<Complex64> = fz.cvec(6);
        let f = |g: &Permutation| -> Complex64 {
            d.iter().map(|&i| weights[(g.apply(i) - 1) as usize] * (i as f64)).sum()
        };
        let m = cesaro_mean(|g| Ok(f(g)), &d).unwrap();
        let mut all: Vec<Permutation> = enumerate_perms(&d).unwrap().collect();
        for i in (1..all.len()).rev() {
            all.swap(i, fz.below(i + 1));
        }
        let shuffled: Complex64 = all.iter().map(f).sum::<Complex64>() / all.len() as f64;
        assert!((m - shuffled).norm() < 1e-12);
    }

    fn brute_disjoint(n: usize, s: usize, t: usize) -> Ratio<u64> {
        // S = {1..s}, T = {s+1..s+t}
        let sset: BTreeSet<Index> = (1..=s as Index).collect();
        let tset: BTreeSet<Index> = (s as Index + 1..=(s + t) as Index).collect();
        let mut hits = 0u64;
        let mut total = 0u64;
        for g in enumerate_perms(&range(n as Index)).unwrap() {
            total += 1;
            if g.image_set(&tset).is_disjoint(&sset) {
                hits += 1;
            }
        }
        Ratio::new(hits, total)
    }

    #[test]
    fn disjoint_fraction_examples() {
        assert_eq!(disjoint_fraction(5, 0, 3).unwrap().value, Ratio::from_integer(1));
        assert_eq!(disjoint_fraction(4, 1, 1).unwrap().value, Ratio::new(3, 4));
        assert_eq!(brute_disjoint(4, 1, 1), Ratio::new(3, 4));
        let f = disjoint_fraction(3, 2, 2).unwrap();
        assert!(!f.feasible);
        assert_eq!(f.value, Ratio::from_integer(0));
    }

    #[test]
    fn disjoint_fraction_matches_brute_force() {
        for n in 1..=7 {
            for s in 0..=n {
                for t in 0..=(n - s) {
                    assert_eq!(
                        disjoint_fraction(n, s, t).unwrap().value,
                        brute_disjoint(n, s, t),
                        "n={n} s={s} t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn disjoint_fraction_monotone_in_n() {
        for (s, t) in [(1, 1), (2, 1), (2, 2), (1, 3)] {
            let vals: Vec<f64> = (4..=9).map(|n| disjoint_fraction(n, s, t).unwrap().as_f64()).collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
        }
    }

    #[test]
    fn csv_header_is_fixed() {
        let csv = cesaro_csv(&[]);
        assert_eq!(csv, "n,mean_re,mean_im,target_re,target_im,gap,bound\n");
    }
}
