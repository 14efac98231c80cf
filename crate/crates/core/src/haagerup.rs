//! Reduced words in free groups and the Haagerup states `φ_λ(w) = e^{-λ|w|}`.
//!
//! `λ = +∞` is the canonical trace: 1 on the empty word, 0 elsewhere.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Result};
use crate::exchange::{
    cesaro_mean, disjoint_fraction, CesaroReport, LocalAlgebra, Permutation, StateFunctional,
};
use crate::numkernel::{hermitian_min_eig, CMat};
use crate::Index;

/// Reduced word `g_{i₁}^{k₁} ⋯ g_{i_n}^{k_n}`: adjacent generators differ,
/// exponents are nonzero. The empty word is the group unit.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct FreeWord {
    syllables: Vec<(Index, i64)>,
}

impl fmt::Debug for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syllables.is_empty() {
            return write!(f, "e");
        }
        for (i, (g, k)) in self.syllables.iter().enumerate() {
            if i > 0 {
                write!(f, "·")?;
            }
            if *k == 1 {
                write!(f, "g{g}")?;
            } else {
                write!(f, "g{g}^{k}")?;
            }
        }
        Ok(())
    }
}

impl FreeWord {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn generator(i: Index) -> Self {
        FreeWord { syllables: vec![(i, 1)] }
    }

    pub fn power(i: Index, k: i64) -> Self {
        reduce_word(&[(i, k)])
    }

    /// Reduce an arbitrary syllable sequence.
    pub fn from_raw(raw: &[(Index, i64)]) -> Self {
        reduce_word(raw)
    }

    pub fn syllables(&self) -> &[(Index, i64)] {
        &self.syllables
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn len(&self) -> u64 {
        word_length(self)
    }

    pub fn inverse(&self) -> FreeWord {
        FreeWord {
            syllables: self.syllables.iter().rev().map(|&(g, k)| (g, -k)).collect(),
        }
    }

    /// Reduced product.
    pub fn mul(&self, other: &FreeWord) -> FreeWord {
        let mut out = self.syllables.clone();
        for &(g, k) in &other.syllables {
            push_syllable(&mut out, g, k);
        }
        FreeWord { syllables: out }
    }

    pub fn generators(&self) -> BTreeSet<Index> {
        self.syllables.iter().map(|&(g, _)| g).collect()
    }
}

// Stack-based free reduction: merging into the top can only cancel it,
// which exposes the previous syllable for the next merge.
fn push_syllable(stack: &mut Vec<(Index, i64)>, g: Index, k: i64) {
    if k == 0 {
        return;
    }
    match stack.last_mut() {
        Some((top, e)) if *top == g => {
            *e += k;
            if *e == 0 {
                stack.pop();
            }
        }
        _ => stack.push((g, k)),
    }
}

/// Merge equal adjacent generators and drop zero exponents, to a fixed point.
pub fn reduce_word(raw: &[(Index, i64)]) -> FreeWord {
    let mut stack = Vec::with_capacity(raw.len());
    for &(g, k) in raw {
        push_syllable(&mut stack, g, k);
    }
    FreeWord { syllables: stack }
}

/// `|k₁| + ⋯ + |k_n|`.
pub fn word_length(w: &FreeWord) -> u64 {
    w.syllables.iter().map(|&(_, k)| k.unsigned_abs()).sum()
}

/// Relabel generators `i ↦ g(i)`.
pub fn group_permute(g: &Permutation, w: &FreeWord) -> FreeWord {
    FreeWord {
        syllables: w.syllables.iter().map(|&(i, k)| (g.apply(i), k)).collect(),
    }
}

/// `φ_λ`; `lambda = f64::INFINITY` is the trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaagerupState {
    lambda: f64,
}

impl HaagerupState {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_nan() || lambda <= 0.0 {
            return reject(format!("lambda must be positive, got {lambda}"));
        }
        Ok(HaagerupState { lambda })
    }

    pub fn tracial() -> Self {
        HaagerupState { lambda: f64::INFINITY }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_tracial(&self) -> bool {
        self.lambda.is_infinite()
    }

    pub fn eval(&self, w: &FreeWord) -> f64 {
        haagerup_eval(self, w)
    }
}

pub fn haagerup_eval(st: &HaagerupState, w: &FreeWord) -> f64 {
    let len = word_length(w);
    if len == 0 {
        1.0
    } else if st.is_tracial() {
        0.0
    } else {
        (-st.lambda * len as f64).exp()
    }
}

/// Free group on integer-indexed generators, as a [`LocalAlgebra`] of words.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeGroup;

impl LocalAlgebra for FreeGroup {
    type Elem = FreeWord;

    fn product(&self, a: &FreeWord, b: &FreeWord) -> Result<FreeWord> {
        Ok(a.mul(b))
    }

    fn relabel(&self, g: &Permutation, a: &FreeWord) -> FreeWord {
        group_permute(g, a)
    }

    fn support(&self, a: &FreeWord) -> BTreeSet<Index> {
        a.generators()
    }
}

impl StateFunctional for HaagerupState {
    type Algebra = FreeGroup;

    fn algebra(&self) -> &FreeGroup {
        &FreeGroup
    }

    fn eval(&self, x: &FreeWord) -> Result<Complex64> {
        Ok(Complex64::new(haagerup_eval(self, x), 0.0))
    }

    /// Group elements are unitaries.
    fn norm(&self, _x: &FreeWord) -> Result<f64> {
        Ok(1.0)
    }
}

/// Mean of `φ(v · g(w))` over `P_{1..n}` against `φ(v)φ(w)`.
pub fn cesaro_cluster(st: &HaagerupState, v: &FreeWord, w: &FreeWord, n: usize) -> Result<CesaroReport> {
    let set: Vec<Index> = (1..=n as Index).collect();
    let all: BTreeSet<Index> = set.iter().copied().collect();
    if !v.generators().is_subset(&all) || !w.generators().is_subset(&all) {
        return reject(format!("generators of v and w must lie in 1..={n}"));
    }
    let mean = cesaro_mean(
        |g| Ok(Complex64::new(haagerup_eval(st, &v.mul(&group_permute(g, w))), 0.0)),
        &set,
    )?;
    let target = Complex64::new(haagerup_eval(st, v) * haagerup_eval(st, w), 0.0);
    let s = v.generators().len();
    let t = w.generators().len();
    let frac = disjoint_fraction(n, s, t)?;
    Ok(CesaroReport::new(n, mean, target, 2.0 * (1.0 - frac.as_f64())))
}

/// Kernel `K[v][w] = φ(v⁻¹w)` on a finite word set.
pub fn gram_kernel(st: &HaagerupState, words: &[FreeWord]) -> CMat {
    CMat::from_fn(words.len(), words.len(), |i, j| {
        Complex64::new(haagerup_eval(st, &words[i].inverse().mul(&words[j])), 0.0)
    })
}

/// Smallest eigenvalue of [`gram_kernel`]; nonnegative iff the sample is
/// consistent with positivity of `φ`.
pub fn gram_psd_check(st: &HaagerupState, words: &[FreeWord]) -> Result<f64> {
    if words.is_empty() || words.len() > 200 {
        return reject("word set must have between 1 and 200 elements");
    }
    hermitian_min_eig(&gram_kernel(st, words), 1e-12)
}

/// All reduced words of length `≤ radius` over generators `1..=generators`,
/// ordered by length then lexicographically.
pub fn word_ball(generators: usize, radius: u64) -> Vec<FreeWord> {
    let mut layers: Vec<Vec<FreeWord>> = vec![vec![FreeWord::empty()]];
    for _ in 0..radius {
        let prev = layers.last().expect("nonempty");
        let mut next = BTreeSet::new();
        for w in prev {
            for g in 1..=generators as Index {
                for s in [1, -1] {
                    let x = w.mul(&FreeWord::power(g, s));
                    if word_length(&x) == word_length(w) + 1 {
                        next.insert(x);
                    }
                }
            }
        }
        layers.push(next.into_iter().collect());
    }
    layers.concat()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Rewrites one equal-generator pair at a time, leftmost first, and drops
    // zero exponents. Independent of the stack reduction.
    fn naive_reduce(raw: &[(Index, i64)]) -> Vec<(Index, i64)> {
        let mut w: Vec<(Index, i64)> = raw.to_vec();
        loop {
            if let Some(p) = w.iter().position(|&(_, k)| k == 0) {
                w.remove(p);
                continue;
            }
            if let Some(p) = (0..w.len().saturating_sub(1)).find(|&i| w[i].0 == w[i + 1].0) {
                w[p].1 += w[p + 1].1;
                w.remove(p + 1);
                continue;
            }
            return w;
        }
    }

    #[test]
    fn reduction_examples() {
        assert!(reduce_word(&[(1, 1), (1, -1)]).is_empty());
        assert_eq!(reduce_word(&[(1, 2), (1, 3)]).syllables(), &[(1, 5)]);
        let raw = [(1, 1), (2, 1), (2, -1), (1, 1)];
        assert_eq!(reduce_word(&raw).syllables(), &[(1, 2)]);
        assert_eq!(naive_reduce(&raw), vec![(1, 2)]);
    }

    #[test]
    fn length_examples() {
        assert_eq!(word_length(&FreeWord::empty()), 0);
        assert_eq!(word_length(&FreeWord::generator(1)), 1);
        assert_eq!(word_length(&reduce_word(&[(1, 2), (2, -3)])), 5);
    }

    #[test]
    fn eval_examples() {
        for l in [0.1, 1.0, 7.0, f64::INFINITY] {
            let st = HaagerupState::new(l).unwrap();
            assert_eq!(haagerup_eval(&st, &FreeWord::empty()), 1.0);
        }
        let st = HaagerupState::new(1.0).unwrap();
        let w = reduce_word(&[(1, 1), (2, 1), (1, -1)]);
        assert_eq!(haagerup_eval(&st, &w), (-3.0f64).exp());
        assert!((haagerup_eval(&st, &w) - 0.049_787_068_367_863_94).abs() < 1e-15);
        assert_eq!(haagerup_eval(&HaagerupState::tracial(), &FreeWord::generator(5)), 0.0);
        assert!(HaagerupState::new(0.0).is_err());
        assert!(HaagerupState::new(-1.0).is_err());
    }

    #[test]
    fn permute_examples() {
        let w = reduce_word(&[(1, 1), (2, 1)]);
        assert_eq!(group_permute(&Permutation::identity(), &w), w);
        assert_eq!(
            group_permute(&Permutation::transposition(1, 2), &w),
            reduce_word(&[(2, 1), (1, 1)])
        );
    }

    #[test]
    fn cluster_trivial_v() {
        let st = HaagerupState::new(0.7).unwrap();
        let w = reduce_word(&[(2, 2), (3, -1)]);
        for n in 3..=6 {
            let r = cesaro_cluster(&st, &FreeWord::empty(), &w, n).unwrap();
            // every summand is φ(w); only the summation rounds
            let phi = haagerup_eval(&st, &w);
            assert!((r.mean.re - phi).abs() <= 4.0 * f64::EPSILON * phi);
            assert_eq!(r.mean.im, 0.0);
        }
    }

    #[test]
    fn cluster_closed_form() {
        for lambda in [0.3, 1.0, 2.5] {
            let st = HaagerupState::new(lambda).unwrap();
            let v = FreeWord::generator(1);
            let w = FreeWord::power(2, -1);
            let e2 = (-2.0 * lambda).exp();
            for n in 2..=7 {
                let r = cesaro_cluster(&st, &v, &w, n).unwrap();
                let nf = n as f64;
                assert!((r.mean.re - (1.0 + (nf - 1.0) * e2) / nf).abs() < 1e-12);
                assert!((r.gap - (1.0 - e2) / nf).abs() < 1e-12);
                assert!(r.gap <= r.bound);
            }
        }
    }

    #[test]
    fn cluster_rejects_out_of_range() {
        let st = HaagerupState::new(1.0).unwrap();
        assert!(cesaro_cluster(&st, &FreeWord::generator(9), &FreeWord::generator(1), 3).is_err());
    }

    #[test]
    fn gram_examples() {
        let st = HaagerupState::new(1.0).unwrap();
        assert_eq!(gram_psd_check(&st, &[FreeWord::empty()]).unwrap(), 1.0);
        let m = gram_psd_check(&st, &[FreeWord::empty(), FreeWord::generator(1)]).unwrap();
        assert!((m - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(gram_psd_check(&st, &[]).is_err());
    }

    #[test]
    fn word_ball_counts() {
        // reduced words of length L over r generators: 2r(2r-1)^{L-1}
        assert_eq!(word_ball(3, 0).len(), 1);
        assert_eq!(word_ball(3, 1).len(), 1 + 6);
        assert_eq!(word_ball(3, 2).len(), 1 + 6 + 30);
        assert_eq!(word_ball(2, 3).len(), 1 + 4 + 12 + 36);
    }

    mod props {
        use super::*;
        use crate::exchange::enumerate_perms;
        use proptest::prelude::*;

        fn raw_word() -> impl Strategy<Value = Vec<(Index, i64)>> {
            prop::collection::vec((1i64..4, -3i64..4), 0..10)
        }

        proptest! {
            #[test]
            fn reduce_matches_naive_rewriter(raw in raw_word()) {
                prop_assert_eq!(reduce_word(&raw).syllables().to_vec(), naive_reduce(&raw));
            }

            #[test]
            fn reduce_is_idempotent_and_reduced(raw in raw_word()) {
                let w = reduce_word(&raw);
                prop_assert_eq!(reduce_word(w.syllables()), w.clone());
                prop_assert!(w.syllables().iter().all(|&(_, k)| k != 0));
                prop_assert!(w.syllables().windows(2).all(|p| p[0].0 != p[1].0));
            }

            #[test]
            fn symmetric_under_relabeling(raw in raw_word(), rank in 0usize..24, lambda in 0.05f64..5.0) {
                let st = HaagerupState::new(lambda).unwrap();
                let w = reduce_word(&raw);
                let g = enumerate_perms(&[1, 2, 3, 4]).unwrap().nth(rank).unwrap();
                let gw = group_permute(&g, &w);
                prop_assert_eq!(word_length(&gw), word_length(&w));
                prop_assert_eq!(haagerup_eval(&st, &gw), haagerup_eval(&st, &w));
            }

            #[test]
            fn multiplicative_without_cancellation(a in raw_word(), b in raw_word(), lambda in 0.05f64..5.0) {
                let st = HaagerupState::new(lambda).unwrap();
                let (v, w) = (reduce_word(&a), reduce_word(&b));
                let vw = v.mul(&w);
                if word_length(&vw) == word_length(&v) + word_length(&w) {
                    let lhs = haagerup_eval(&st, &vw);
                    let rhs = haagerup_eval(&st, &v) * haagerup_eval(&st, &w);
                    // exp of a rounded product: relative error ≈ λ|vw|·ε
                    let rel = 4.0 * f64::EPSILON * (1.0 + lambda * word_length(&vw) as f64);
                    prop_assert!((lhs - rhs).abs() <= rel * lhs);
                }
            }

            #[test]
            fn product_state_on_disjoint_supports(a in prop::collection::vec((1i64..3, -3i64..4), 0..6),
                                                   b in prop::collection::vec((3i64..6, -3i64..4), 0..6),
                                                   lambda in 0.05f64..5.0) {
                let st = HaagerupState::new(lambda).unwrap();
                let (v, w) = (reduce_word(&a), reduce_word(&b));
                let vw = v.mul(&w);
                prop_assert_eq!(word_length(&vw), word_length(&v) + word_length(&w));
                let lhs = haagerup_eval(&st, &vw);
                let rhs = haagerup_eval(&st, &v) * haagerup_eval(&st, &w);
                let rel = 4.0 * f64::EPSILON * (1.0 + lambda * word_length(&vw) as f64);
                prop_assert!((lhs - rhs).abs() <= rel * lhs);
            }

            #[test]
            fn block_singleton_fails(lambda in 0.01f64..20.0, i in 1i64..5, j in 5i64..9) {
                let st = HaagerupState::new(lambda).unwrap();
                let gi = FreeWord::generator(i);
                let gj = FreeWord::generator(j);
                let lhs = haagerup_eval(&st, &gi.mul(&gj).mul(&gi.inverse()));
                let rhs = haagerup_eval(&st, &gj) * haagerup_eval(&st, &gi.mul(&gi.inverse()));
                prop_assert_eq!(lhs, (-3.0 * lambda).exp());
                prop_assert_eq!(rhs, (-lambda).exp());
                prop_assert!(lhs != rhs);
            }
        }
    }

    #[test]
    fn tracial_limit_monotone() {
        let w = reduce_word(&[(1, 1), (3, -2)]);
        let vals: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&l| haagerup_eval(&HaagerupState::new(l).unwrap(), &w))
            .collect();
        assert!(vals.windows(2).all(|p| p[1] < p[0]));
        assert_eq!(haagerup_eval(&HaagerupState::tracial(), &w), 0.0);
    }

    #[test]
    fn positivity_on_ball() {
        let ball = word_ball(3, 2);
        for l in [0.5, 1.0, 2.0] {
            let st = HaagerupState::new(l).unwrap();
            assert!(gram_psd_check(&st, &ball).unwrap() >= -1e-10);
        }
        assert!(gram_psd_check(&HaagerupState::tracial(), &ball).unwrap() >= -1e-10);
    }
}
