//! Truncated q-deformed Fock space over `ℂ^d`.
//!
//! Vectors are written in monomial coordinates `e_{i₁} ⊗ ⋯ ⊗ e_{i_n}`,
//! `n ≤ N`, which are not orthogonal for `q ≠ 0`. The q-inner product lives in
//! an explicit Gram matrix; creators and annihilators act on monomials with
//! coefficients that are polynomials in `q`. Creators drop images of degree
//! `N + 1`, so relations are only exact on the sub-block of degree `≤ N − 1`.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Result};
use crate::exchange::Permutation;
use crate::numkernel::{hermitian_min_eig, CMat, ONE, ZERO};

/// Largest tensor degree for which permutation sums are enumerated.
pub const MAX_DEGREE: usize = 8;

/// Number of pairs `a < b` with `p(a) > p(b)`.
pub fn inversions(p: &Permutation) -> usize {
    let sup = p.support();
    let (Some(&lo), Some(&hi)) = (sup.first(), sup.last()) else {
        return 0;
    };
    let mut count = 0;
    for a in lo..=hi {
        for b in a + 1..=hi {
            if p.apply(a) > p.apply(b) {
                count += 1;
            }
        }
    }
    count
}

/// `⟨e_u, e_v⟩_q = δ_{n,m} Σ_{π ∈ P_n} q^{i(π)} Π_k δ(u_k, v_{π(k)})`.
///
/// Only permutations with a nonzero product are visited: positions are
/// assigned left to right and inversions are counted incrementally.
pub fn q_inner(u: &[usize], v: &[usize], q: f64) -> Complex64 {
    if u.len() != v.len() {
        return ZERO;
    }
    fn walk(u: &[usize], v: &[usize], used: &mut Vec<bool>, assigned: &mut Vec<usize>, inv: i32, q: f64) -> f64 {
        let k = assigned.len();
        if k == u.len() {
            return q.powi(inv);
        }
        let mut s = 0.0;
        for j in 0..v.len() {
            if used[j] || v[j] != u[k] {
                continue;
            }
            let extra = assigned.iter().filter(|&&a| a > j).count() as i32;
            used[j] = true;
            assigned.push(j);
            s += walk(u, v, used, assigned, inv + extra, q);
            assigned.pop();
            used[j] = false;
        }
        s
    }
    let mut used = vec![false; v.len()];
    let mut assigned = Vec::with_capacity(u.len());
    Complex64::new(walk(u, v, &mut used, &mut assigned, 0, q), 0.0)
}

/// All tuples over `1..=d` of length `≤ N`, ordered by degree then lexicographically.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    d: usize,
    max_degree: usize,
    vectors: Vec<Vec<usize>>,
    position: HashMap<Vec<usize>, usize>,
    // offsets[n] = index of the first degree-n monomial
    offsets: Vec<usize>,
}

impl MonomialBasis {
    pub fn new(d: usize, max_degree: usize) -> Result<Self> {
        if d == 0 {
            return reject("need at least one mode");
        }
        if max_degree > MAX_DEGREE {
            return reject(format!("degree {max_degree} exceeds {MAX_DEGREE}"));
        }
        let size: usize = (0..=max_degree).map(|n| d.pow(n as u32)).sum();
        if size > 20_000 {
            return reject(format!("basis of size {size} is too large for dense matrices"));
        }
        let mut vectors = vec![Vec::new()];
        let mut offsets = vec![0];
        let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 1..=max_degree {
            offsets.push(vectors.len());
            let next: Vec<Vec<usize>> = layer
                .iter()
                .flat_map(|t| {
                    (1..=d).map(move |i| {
                        let mut x = t.clone();
                        x.push(i);
                        x
                    })
                })
                .collect();
            vectors.extend(next.iter().cloned());
            layer = next;
        }
        offsets.push(vectors.len());
        let position = vectors.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Ok(MonomialBasis {
            d,
            max_degree,
            vectors,
            position,
            offsets,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<usize>] {
        &self.vectors
    }

    pub fn index_of(&self, t: &[usize]) -> Option<usize> {
        self.position.get(t).copied()
    }

    /// Index range of the degree-`n` block.
    pub fn degree_range(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }

    /// Indices of all monomials with degree `≤ n`.
    pub fn up_to_degree(&self, n: usize) -> Vec<usize> {
        (0..self.offsets[n.min(self.max_degree) + 1]).collect()
    }
}

/// Truncated `Γ_q(ℂ^d)` with its Gram metric.
#[derive(Clone, Debug)]
pub struct QSpace {
    basis: MonomialBasis,
    q: f64,
    gram: CMat,
}

impl QSpace {
    pub fn new(d: usize, max_degree: usize, q: f64) -> Result<Self> {
        if !(q > -1.0 && q < 1.0) {
            return reject("q must lie in (-1,1)");
        }
        let basis = MonomialBasis::new(d, max_degree)?;
        let mut g = CMat::zeros(basis.len(), basis.len());
        for n in 0..=max_degree {
            let r = basis.degree_range(n);
            for a in r.clone() {
                for b in r.clone() {
                    g[(a, b)] = q_inner(&basis.vectors[a], &basis.vectors[b], q);
                }
            }
        }
        Ok(QSpace { basis, q, gram: g })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Full block-diagonal Gram matrix.
    pub fn metric(&self) -> &CMat {
        &self.gram
    }

    /// Gram block of degree `n`.
    pub fn gram(&self, n: usize) -> Result<CMat> {
        if n > self.basis.max_degree {
            return reject(format!("degree {n} beyond truncation {}", self.basis.max_degree));
        }
        let r: Vec<usize> = self.basis.degree_range(n).collect();
        Ok(self.gram.submatrix(&r, &r))
    }

    /// `⟨x, y⟩_q` for coordinate vectors.
    pub fn inner(&self, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
        let gy = self.gram.matvec(y)?;
        // G is real symmetric here, so Σ x_u conj(y_v) G[u][v] = Σ x_u conj((G y)_u)
        Ok(x.iter().zip(&gy).map(|(a, b)| a * b.conj()).sum())
    }

    /// Coordinate vector of the vacuum.
    pub fn vacuum(&self) -> Vec<Complex64> {
        let mut v = vec![ZERO; self.dim()];
        v[0] = ONE;
        v
    }

    /// Creator, annihilator and field operator for `f ∈ ℂ^d`.
    pub fn ladder_ops(&self, f: &[Complex64]) -> Result<Ladder> {
        let d = self.basis.d;
        if f.len() != d {
            return reject(format!("f must have {d} components"));
        }
        let n = self.dim();
        let mut cre = CMat::zeros(n, n);
        let mut ann = CMat::zeros(n, n);
        for (col, t) in self.basis.vectors.iter().enumerate() {
            if t.len() < self.basis.max_degree {
                for i in 1..=d {
                    let mut x = Vec::with_capacity(t.len() + 1);
                    x.push(i);
                    x.extend_from_slice(t);
                    let row = self.basis.position[&x];
                    cre[(row, col)] += f[i - 1];
                }
            }
            for k in 0..t.len() {
                // q^{k} ⟨e_{t_k}, f⟩ with 0-based k
                let coeff = f[t[k] - 1].conj() * self.q.powi(k as i32);
                let mut x = t.clone();
                x.remove(k);
                let row = self.basis.position[&x];
                ann[(row, col)] += coeff;
            }
        }
        let field = &cre + &ann;
        Ok(Ladder {
            creator: cre,
            annihilator: ann,
            field,
        })
    }

    /// `s_q(e_i)` for `i = 1..=d`.
    pub fn fields(&self) -> Vec<CMat> {
        (0..self.basis.d)
            .map(|i| {
                let mut e = vec![ZERO; self.basis.d];
                e[i] = ONE;
                self.ladder_ops(&e).expect("unit vector").field
            })
            .collect()
    }

    /// `⟨(M₁M₂⋯M_k) Ω, Ω⟩_q`.
    pub fn vacuum_moment(&self, word: &[&CMat]) -> Result<Complex64> {
        let mut v = self.vacuum();
        for m in word.iter().rev() {
            if m.rows() != self.dim() || m.cols() != self.dim() {
                return reject("operator does not act on this space");
            }
            v = m.matvec(&v)?;
        }
        self.inner(&v, &self.vacuum())
    }

    /// Frobenius norm of `a(f)a†(g) − q a†(g)a(f) − ⟨g,f⟩1` on input degrees `≤ N−1`.
    pub fn commutation_residual(&self, f: &[Complex64], g: &[Complex64]) -> Result<f64> {
        let lf = self.ladder_ops(f)?;
        let lg = self.ladder_ops(g)?;
        let gf: Complex64 = g.iter().zip(f).map(|(a, b)| a * b.conj()).sum();
        let lhs = &(&lf.annihilator * &lg.creator) - &(&lg.creator * &lf.annihilator).scale_real(self.q);
        let res = &lhs - &CMat::identity(self.dim()).scale(gf);
        let rows: Vec<usize> = (0..self.dim()).collect();
        let cols = self.basis.up_to_degree(self.basis.max_degree.saturating_sub(1));
        Ok(res.submatrix(&rows, &cols).frob_norm())
    }

    /// Frobenius norm of `⟨a†(f)u, v⟩_q − ⟨u, a(f)v⟩_q` over monomials of degree `≤ N−1`.
    pub fn adjointness_residual(&self, f: &[Complex64]) -> Result<f64> {
        let l = self.ladder_ops(f)?;
        // ⟨C e_u, e_v⟩ = (Cᵀ G)[u][v],  ⟨e_u, A e_v⟩ = (G conj(A))[u][v]
        let lhs = &l.creator.transpose() * &self.gram;
        let conj_a = l.annihilator.adjoint().transpose();
        let rhs = &self.gram * &conj_a;
        let idx = self.basis.up_to_degree(self.basis.max_degree.saturating_sub(1));
        Ok((&lhs - &rhs).submatrix(&idx, &idx).frob_norm())
    }

    /// Smallest Gram eigenvalue per degree.
    pub fn gram_min_eigs(&self) -> Result<Vec<f64>> {
        (0..=self.basis.max_degree)
            .map(|n| hermitian_min_eig(&self.gram(n)?, 1e-10))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Ladder {
    pub creator: CMat,
    pub annihilator: CMat,
    pub field: CMat,
}

/// Report row for one value of `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfockReport {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub q: f64,
    pub gram_min_eig: Vec<f64>,
    pub commutation_residual: f64,
    pub adjointness_residual: f64,
}
