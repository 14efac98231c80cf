//! Canonical forms in the algebraic free product of a matrix algebra.
//!
//! Fix a basis of `M_k(ℂ)` whose first element is the unit. An element of
//! the free product over an index set is then a finite linear combination of
//! words `(site₁, label₁)(site₂, label₂)…` with adjacent sites distinct.
//! Labels are 1-based positions in the basis; label 1 is the unit.
//!
//! In non-unital mode every label is allowed and the unit letter at site `j`
//! is a genuine generator. In unital mode all unit copies are identified with
//! the scalar part, so letters carry labels `≥ 2` and products that produce a
//! unit component contract the word, possibly cascading into further merges.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Error, Result};
use crate::exchange::{LocalAlgebra, Permutation, StateFunctional};
use crate::fuzz::Fuzz;
use crate::numkernel::{inner, vec_norm, CMat, ONE, ZERO};
use crate::Index;

/// Coefficients with modulus at or below this are dropped.
pub const PRUNE: f64 = 1e-14;

const UNIT_LABEL: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    NonUnital,
    Unital,
}

/// The algebra `M_k(ℂ)` with a fixed basis, unit first.
#[derive(Clone, Debug)]
pub struct SiteAlgebra {
    dim: usize,
    basis: Vec<CMat>,
    // coordinates of a matrix: coord_map · vec(A)
    coord_map: CMat,
    // structure[a][b] = nonzero (c, coeff) with b_a b_b = Σ coeff b_c; 0-based
    structure: Vec<Vec<Vec<(usize, Complex64)>>>,
    // adjoint_table[a] = nonzero (c, coeff) with b_a† = Σ coeff b_c
    adjoint_table: Vec<Vec<(usize, Complex64)>>,
}

fn sparse(coords: &[Complex64]) -> Vec<(usize, Complex64)> {
    coords
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > PRUNE)
        .map(|(i, &z)| (i, z))
        .collect()
}

impl SiteAlgebra {
    /// Validates that `basis` has `k²` linearly independent `k×k` matrices
    /// with the identity first.
    pub fn new(basis: Vec<CMat>) -> Result<Self> {
        let k = basis.first().map_or(0, CMat::rows);
        if k == 0 {
            return reject("empty basis");
        }
        if basis.len() != k * k {
            return reject(format!("M_{k} needs {} basis elements, got {}", k * k, basis.len()));
        }
        if basis.iter().any(|b| b.rows() != k || b.cols() != k) {
            return reject("basis elements must all be k×k");
        }
        if basis[0].max_abs_diff(&CMat::identity(k)) > 1e-12 {
            return reject("first basis element must be the unit");
        }
        let n = k * k;
        // columns are vectorized basis elements
        let bmat = CMat::from_fn(n, n, |r, c| basis[c].as_slice()[r]);
        if bmat.rank(1e-10) != n {
            return reject("basis is not linearly independent");
        }
        let coord_map = bmat.solve(&CMat::identity(n))?;
        let mut alg = SiteAlgebra {
            dim: k,
            basis,
            coord_map,
            structure: Vec::new(),
            adjoint_table: Vec::new(),
        };
        let structure: Vec<Vec<Vec<(usize, Complex64)>>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| sparse(&alg.coords_unchecked(&(&alg.basis[a] * &alg.basis[b]))))
                    .collect()
            })
            .collect();
        let adjoint_table = (0..n)
            .map(|a| sparse(&alg.coords_unchecked(&alg.basis[a].adjoint())))
            .collect();
        alg.structure = structure;
        alg.adjoint_table = adjoint_table;
        for a in 0..n {
            for b in 0..n {
                let prod = &alg.basis[a] * &alg.basis[b];
                let rebuilt = alg.combine(&alg.structure[a][b]);
                if prod.max_abs_diff(&rebuilt) > 1e-12 {
                    return Err(Error::Consistency(format!(
                        "structure tensor fails on basis pair ({}, {})",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        Ok(alg)
    }

    /// `M₂` with basis `(1, σx, σy, σz)`.
    pub fn pauli() -> Self {
        let z = ZERO;
        let o = ONE;
        let i = crate::numkernel::I;
        let sx = CMat::from_rows(&[vec![z, o], vec![o, z]]).unwrap();
        let sy = CMat::from_rows(&[vec![z, -i], vec![i, z]]).unwrap();
        let sz = CMat::from_rows(&[vec![o, z], vec![z, -o]]).unwrap();
        Self::new(vec![CMat::identity(2), sx, sy, sz]).expect("Pauli basis")
    }

    /// `M_k` with basis `1` followed by the matrix units `ε_{ij}`,
    /// `(i, j) ≠ (0, 0)`, row-major.
    pub fn matrix_units(k: usize) -> Result<Self> {
        if k == 0 {
            return reject("k must be positive");
        }
        let mut basis = vec![CMat::identity(k)];
        for i in 0..k {
            for j in 0..k {
                if (i, j) != (0, 0) {
                    basis.push(CMat::unit(k, i, j));
                }
            }
        }
        Self::new(basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    /// Basis element with 1-based `label`.
    pub fn basis_element(&self, label: usize) -> &CMat {
        &self.basis[label - 1]
    }

    fn coords_unchecked(&self, a: &CMat) -> Vec<Complex64> {
        self.coord_map.matvec(a.as_slice()).expect("k²-vector")
    }

    /// Coordinates of `a` in the basis (0-based positions).
    pub fn coords(&self, a: &CMat) -> Result<Vec<Complex64>> {
        if a.rows() != self.dim || a.cols() != self.dim {
            return reject(format!(
                "expected a {k}x{k} matrix, got {}x{}",
                a.rows(),
                a.cols(),
                k = self.dim
            ));
        }
        Ok(self.coords_unchecked(a))
    }

    fn combine(&self, terms: &[(usize, Complex64)]) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(c, z) in terms {
            m.axpy(z, &self.basis[c]);
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub site: Index,
    pub label: usize,
}

impl Letter {
    pub fn new(site: Index, label: usize) -> Self {
        Letter { site, label }
    }
}

/// Word of basis letters with adjacent sites distinct.
pub type BasisWord = Vec<Letter>;

/// Element of the free product in canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalElement {
    mode: Mode,
    scalar: Complex64,
    terms: BTreeMap<BasisWord, Complex64>,
}

impl CanonicalElement {
    pub fn zero(mode: Mode) -> Self {
        CanonicalElement {
            mode,
            scalar: ZERO,
            terms: BTreeMap::new(),
        }
    }

    /// `c · 1` in unital mode.
    pub fn scalar(c: Complex64) -> Self {
        let mut e = Self::zero(Mode::Unital);
        e.scalar = c;
        e.prune();
        e
    }

    /// Single word with coefficient, validated.
    pub fn word(mode: Mode, letters: &[Letter], coeff: Complex64) -> Result<Self> {
        check_word(mode, letters)?;
        let mut e = Self::zero(mode);
        if letters.is_empty() {
            if mode == Mode::NonUnital {
                return reject("the empty word is not an element of the non-unital product");
            }
            e.scalar = coeff;
        } else {
            e.terms.insert(letters.to_vec(), coeff);
        }
        e.prune();
        Ok(e)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn scalar_part(&self) -> Complex64 {
        self.scalar
    }

    pub fn terms(&self) -> &BTreeMap<BasisWord, Complex64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.scalar == ZERO && self.terms.is_empty()
    }

    /// Sites appearing in any word.
    pub fn support(&self) -> BTreeSet<Index> {
        self.terms.keys().flatten().map(|l| l.site).collect()
    }

    pub fn max_word_len(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    fn prune(&mut self) {
        if self.scalar.norm() <= PRUNE {
            self.scalar = ZERO;
        }
        self.terms.retain(|_, z| z.norm() > PRUNE);
    }

    fn same_mode(&self, other: &Self) -> Result<()> {
        if self.mode != other.mode {
            return reject("elements belong to different free products (unital vs non-unital)");
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_mode(other)?;
        let mut out = self.clone();
        out.scalar += other.scalar;
        for (w, &z) in &other.terms {
            *out.terms.entry(w.clone()).or_insert(ZERO) += z;
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let mut out = CanonicalElement {
            mode: self.mode,
            scalar: self.scalar * z,
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c * z)).collect(),
        };
        out.prune();
        out
    }

    /// Same words, coefficients within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match self.sub(other) {
            Ok(d) => d.scalar.norm() <= tol && d.terms.values().all(|z| z.norm() <= tol),
            Err(_) => false,
        }
    }

    /// Largest coefficient modulus, scalar included.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|z| z.norm()).fold(self.scalar.norm(), f64::max)
    }
}

fn check_word(mode: Mode, letters: &[Letter]) -> Result<()> {
    for l in letters {
        if l.label == 0 {
            return reject("labels are 1-based");
        }
        if mode == Mode::Unital && l.label == UNIT_LABEL {
            return reject("unital words cannot contain the unit letter");
        }
    }
    if letters.windows(2).any(|w| w[0].site == w[1].site) {
        return reject("adjacent letters must sit at distinct sites");
    }
    Ok(())
}

#[derive(Default)]
struct Accum {
    scalar: Complex64,
    terms: BTreeMap<BasisWord, Complex64>,
}

impl Accum {
    fn push(&mut self, word: BasisWord, z: Complex64) {
        if word.is_empty() {
            self.scalar += z;
        } else {
            *self.terms.entry(word).or_insert(ZERO) += z;
        }
    }

    fn finish(self, mode: Mode) -> CanonicalElement {
        let mut e = CanonicalElement {
            mode,
            scalar: self.scalar,
            terms: self.terms,
        };
        e.prune();
        e
    }
}

/// Free product of copies of one [`SiteAlgebra`].
#[derive(Clone, Debug)]
pub struct FreeProduct {
    alg: SiteAlgebra,
}

impl FreeProduct {
    pub fn new(alg: SiteAlgebra) -> Self {
        FreeProduct { alg }
    }

    pub fn algebra(&self) -> &SiteAlgebra {
        &self.alg
    }

    /// Checks labels against the basis size and word shape.
    pub fn validate(&self, x: &CanonicalElement) -> Result<()> {
        if x.mode == Mode::NonUnital && x.scalar != ZERO {
            return reject("non-unital elements have no scalar part");
        }
        for w in x.terms.keys() {
            if w.is_empty() {
                return reject("empty word stored as a term");
            }
            check_word(x.mode, w)?;
            if w.iter().any(|l| l.label > self.alg.basis_len()) {
                return reject("label exceeds basis size");
            }
        }
        Ok(())
    }

    /// Canonical embedding of `a ∈ M_k` at `site`.
    pub fn embed_letter(&self, site: Index, a: &CMat, mode: Mode) -> Result<CanonicalElement> {
        let coords = self.alg.coords(a)?;
        let mut acc = Accum::default();
        for (c, z) in coords.into_iter().enumerate() {
            let label = c + 1;
            if mode == Mode::Unital && label == UNIT_LABEL {
                acc.scalar += z;
            } else {
                acc.push(vec![Letter::new(site, label)], z);
            }
        }
        Ok(acc.finish(mode))
    }

    /// Embedding of the basis element with `label` at `site`.
    pub fn embed_basis(&self, site: Index, label: usize, mode: Mode) -> Result<CanonicalElement> {
        if label == 0 || label > self.alg.basis_len() {
            return reject(format!("label {label} out of range"));
        }
        if mode == Mode::Unital && label == UNIT_LABEL {
            return Ok(CanonicalElement::scalar(ONE));
        }
        CanonicalElement::word(mode, &[Letter::new(site, label)], ONE)
    }

    pub fn mul(&self, x: &CanonicalElement, y: &CanonicalElement) -> Result<CanonicalElement> {
        x.same_mode(y)?;
        let mode = x.mode;
        let mut acc = Accum::default();
        if mode == Mode::Unital {
            acc.scalar += x.scalar * y.scalar;
            if x.scalar != ZERO {
                for (w, &z) in &y.terms {
                    acc.push(w.clone(), x.scalar * z);
                }
            }
            if y.scalar != ZERO {
                for (w, &z) in &x.terms {
                    acc.push(w.clone(), z * y.scalar);
                }
            }
        }
        for (v, &cv) in &x.terms {
            for (w, &cw) in &y.terms {
                self.mul_words(mode, v, w, cv * cw, &mut acc);
            }
        }
        Ok(acc.finish(mode))
    }

    fn mul_words(&self, mode: Mode, left: &[Letter], right: &[Letter], z: Complex64, acc: &mut Accum) {
        let (Some(last), Some(first)) = (left.last(), right.first()) else {
            acc.push([left, right].concat(), z);
            return;
        };
        if last.site != first.site {
            acc.push([left, right].concat(), z);
            return;
        }
        let head = &left[..left.len() - 1];
        let tail = &right[1..];
        for &(c, t) in &self.alg.structure[last.label - 1][first.label - 1] {
            let label = c + 1;
            if mode == Mode::Unital && label == UNIT_LABEL {
                // contraction may expose a new equal-site junction
                self.mul_words(mode, head, tail, z * t, acc);
            } else {
                let mut w = Vec::with_capacity(left.len() + right.len() - 1);
                w.extend_from_slice(head);
                w.push(Letter::new(last.site, label));
                w.extend_from_slice(tail);
                acc.push(w, z * t);
            }
        }
    }

    /// Reverse each word and take letterwise adjoints, conjugating coefficients.
    pub fn adjoint(&self, x: &CanonicalElement) -> CanonicalElement {
        let mode = x.mode;
        let mut out = match mode {
            Mode::Unital => CanonicalElement::scalar(x.scalar.conj()),
            Mode::NonUnital => CanonicalElement::zero(mode),
        };
        for (w, &z) in &x.terms {
            let mut term: Option<CanonicalElement> = None;
            for l in w.iter().rev() {
                let mut acc = Accum::default();
                for &(c, t) in &self.alg.adjoint_table[l.label - 1] {
                    if mode == Mode::Unital && c + 1 == UNIT_LABEL {
                        acc.scalar += t;
                    } else {
                        acc.push(vec![Letter::new(l.site, c + 1)], t);
                    }
                }
                let letter = acc.finish(mode);
                term = Some(match term {
                    None => letter,
                    Some(t) => self.mul(&t, &letter).expect("same mode"),
                });
            }
            let term = term.expect("nonempty word").scale(z.conj());
            out = out.add(&term).expect("same mode");
        }
        out
    }

    /// Relabel every site through `g`.
    pub fn permute(&self, g: &Permutation, x: &CanonicalElement) -> CanonicalElement {
        CanonicalElement {
            mode: x.mode,
            scalar: x.scalar,
            terms: x
                .terms
                .iter()
                .map(|(w, &z)| {
                    let w = w.iter().map(|l| Letter::new(g.apply(l.site), l.label)).collect();
                    (w, z)
                })
                .collect(),
        }
    }

    /// Quotient from the non-unital to the unital free product: each letter
    /// splits as `α·1 + (a − α·1)`, unit factors drop out and the resulting
    /// equal-site junctions are merged again.
    pub fn quotient(&self, x: &CanonicalElement) -> Result<CanonicalElement> {
        if x.mode != Mode::NonUnital {
            return reject("quotient expects a non-unital element");
        }
        let mut acc = Accum::default();
        for (w, &z) in &x.terms {
            let e = self.reduce_raw(Mode::Unital, w, z, &mut |_| 0)?;
            acc.scalar += e.scalar;
            for (v, c) in e.terms {
                acc.push(v, c);
            }
        }
        Ok(acc.finish(Mode::Unital))
    }

    /// Canonical form of `coeff · raw` where `raw` is any sequence of basis
    /// letters (equal adjacent sites and, in unital mode, unit letters are
    /// allowed). `pick(k)` chooses which of the `k` currently available
    /// rewrites to apply next; any strategy yields the same result.
    pub fn reduce_raw(
        &self,
        mode: Mode,
        raw: &[Letter],
        coeff: Complex64,
        pick: &mut dyn FnMut(usize) -> usize,
    ) -> Result<CanonicalElement> {
        if raw.iter().any(|l| l.label == 0 || l.label > self.alg.basis_len()) {
            return reject("label out of range");
        }
        if mode == Mode::NonUnital && raw.is_empty() {
            return reject("the empty word is not an element of the non-unital product");
        }
        enum Move {
            DropUnit(usize),
            Merge(usize),
        }
        let mut acc = Accum::default();
        let mut work: Vec<(Vec<Letter>, Complex64)> = vec![(raw.to_vec(), coeff)];
        while let Some((w, z)) = work.pop() {
            let mut moves = Vec::new();
            for (i, l) in w.iter().enumerate() {
                if mode == Mode::Unital && l.label == UNIT_LABEL {
                    moves.push(Move::DropUnit(i));
                }
                if i + 1 < w.len() && w[i + 1].site == l.site {
                    moves.push(Move::Merge(i));
                }
            }
            if moves.is_empty() {
                acc.push(w, z);
                continue;
            }
            let choice = pick(moves.len()).min(moves.len() - 1);
            match moves[choice] {
                Move::DropUnit(i) => {
                    let mut v = w.clone();
                    v.remove(i);
                    work.push((v, z));
                }
                Move::Merge(i) => {
                    let (a, b) = (w[i], w[i + 1]);
                    for &(c, t) in &self.alg.structure[a.label - 1][b.label - 1] {
                        let mut v = Vec::with_capacity(w.len() - 1);
                        v.extend_from_slice(&w[..i]);
                        v.push(Letter::new(a.site, c + 1));
                        v.extend_from_slice(&w[i + 2..]);
                        work.push((v, z * t));
                    }
                }
            }
        }
        Ok(acc.finish(mode))
    }

    /// `⟨π(x)Ω, Ω⟩`.
    pub fn eval(&self, x: &CanonicalElement, rep: &ProcessRep) -> Result<Complex64> {
        rep.check_compatible(self)?;
        let omega = &rep.cyclic;
        let mut total = x.scalar * inner(omega, omega);
        for (w, &z) in &x.terms {
            let v = rep.apply_word(w, omega)?;
            total += z * inner(&v, omega);
        }
        Ok(total)
    }

    /// Random element for fuzzing.
    pub fn random_element(&self, fz: &mut Fuzz, shape: &ElementShape) -> CanonicalElement {
        let mode = shape.mode;
        let min_label = if mode == Mode::Unital { 2 } else { 1 };
        let nl = self.alg.basis_len();
        let mut acc = Accum::default();
        let coeff = |fz: &mut Fuzz| {
            if shape.gaussian_integers {
                let r = fz.below(7) as f64 - 3.0;
                let i = fz.below(7) as f64 - 3.0;
                Complex64::new(r, i)
            } else {
                fz.complex()
            }
        };
        if mode == Mode::Unital && fz.coin() {
            acc.scalar = coeff(fz);
        }
        let nterms = 1 + fz.below(shape.max_terms.max(1));
        for _ in 0..nterms {
            let len = 1 + fz.below(shape.max_len.max(1));
            let mut w: Vec<Letter> = Vec::with_capacity(len);
            while w.len() < len {
                let site = shape.sites[fz.below(shape.sites.len())];
                if w.last().is_some_and(|l| l.site == site) {
                    if shape.sites.len() == 1 {
                        break;
                    }
                    continue;
                }
                let label = min_label + fz.below(nl + 1 - min_label);
                w.push(Letter::new(site, label));
            }
            acc.push(w, coeff(fz));
        }
        acc.finish(mode)
    }
}

/// Parameters for [`FreeProduct::random_element`].
#[derive(Clone, Debug)]
pub struct ElementShape {
    pub mode: Mode,
    pub sites: Vec<Index>,
    pub max_len: usize,
    pub max_terms: usize,
    /// Draw coefficients from `{-3..3} + i{-3..3}` so products stay exact.
    pub gaussian_integers: bool,
}

impl LocalAlgebra for FreeProduct {
    type Elem = CanonicalElement;

    fn product(&self, a: &CanonicalElement, b: &CanonicalElement) -> Result<CanonicalElement> {
        self.mul(a, b)
    }

    fn relabel(&self, g: &Permutation, a: &CanonicalElement) -> CanonicalElement {
        self.permute(g, a)
    }

    fn support(&self, a: &CanonicalElement) -> BTreeSet<Index> {
        a.support()
    }
}

/// Concrete stochastic process: unital *-representations of `M_k` per site
/// on one Hilbert space, plus a unit vector.
#[derive(Clone, Debug)]
pub struct ProcessRep {
    space_dim: usize,
    k: usize,
    // site → images of the basis, 0-based label order
    site_maps: BTreeMap<Index, Vec<CMat>>,
    cyclic: Vec<Complex64>,
}

impl ProcessRep {
    /// Build from a map `(site, A) ↦ ι_site(A)` evaluated on the basis;
    /// checks unitality, multiplicativity and adjoints on basis pairs.
    pub fn from_homomorphisms(
        alg: &SiteAlgebra,
        sites: &[Index],
        cyclic: Vec<Complex64>,
        mut iota: impl FnMut(Index, &CMat) -> CMat,
    ) -> Result<Self> {
        let space_dim = cyclic.len();
        if (vec_norm(&cyclic) - 1.0).abs() > 1e-10 {
            return reject("cyclic vector must have unit norm");
        }
        let mut site_maps = BTreeMap::new();
        for &s in sites {
            let imgs: Vec<CMat> = alg.basis.iter().map(|b| iota(s, b)).collect();
            for m in &imgs {
                if m.rows() != space_dim || m.cols() != space_dim {
                    return reject(format!("site {s}: image has wrong shape"));
                }
            }
            if imgs[0].max_abs_diff(&CMat::identity(space_dim)) > 1e-10 {
                return reject(format!("site {s}: map is not unital"));
            }
            let n = alg.basis_len();
            for a in 0..n {
                let adj = combine_images(&imgs, &alg.adjoint_table[a], space_dim);
                if imgs[a].adjoint().max_abs_diff(&adj) > 1e-10 {
                    return reject(format!("site {s}: map does not preserve adjoints"));
                }
                for b in 0..n {
                    let lhs = &imgs[a] * &imgs[b];
                    let rhs = combine_images(&imgs, &alg.structure[a][b], space_dim);
                    if lhs.max_abs_diff(&rhs) > 1e-10 {
                        return reject(format!("site {s}: map is not multiplicative"));
                    }
                }
            }
            site_maps.insert(s, imgs);
        }
        Ok(ProcessRep {
            space_dim,
            k: alg.dim,
            site_maps,
            cyclic,
        })
    }

    /// `ι_j(A) = V_j (A ⊗ 1_m) V_j†` with given unitaries `V_j`.
    pub fn amplified(
        alg: &SiteAlgebra,
        sites: &[Index],
        multiplicity: usize,
        unitaries: &[CMat],
        cyclic: Vec<Complex64>,
    ) -> Result<Self> {
        if unitaries.len() != sites.len() {
            return reject("one unitary per site");
        }
        let pos: BTreeMap<Index, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let id = CMat::identity(multiplicity);
        Self::from_homomorphisms(alg, sites, cyclic, |s, a| {
            let v = &unitaries[pos[&s]];
            &(v * &a.kron(&id)) * &v.adjoint()
        })
    }

    /// Random amplified representation for fuzzing.
    pub fn random(alg: &SiteAlgebra, sites: &[Index], multiplicity: usize, fz: &mut Fuzz) -> Result<Self> {
        let d = alg.dim * multiplicity;
        let us: Vec<CMat> = sites.iter().map(|_| fz.unitary(d)).collect();
        let omega = fz.unit_vector(d);
        Self::amplified(alg, sites, multiplicity, &us, omega)
    }

    /// `H = (ℂ^k)^{⊗n}` with site `sites[i]` acting on factor `i`, and
    /// `Ω = ψ₁ ⊗ ⋯ ⊗ ψ_n`. With all `ψ_i` equal the process is exchangeable.
    pub fn tensor_product(alg: &SiteAlgebra, sites: &[Index], factors: &[Vec<Complex64>]) -> Result<Self> {
        let k = alg.dim;
        if factors.len() != sites.len() || factors.iter().any(|f| f.len() != k) {
            return reject("one k-dimensional factor vector per site");
        }
        let n = sites.len();
        let mut omega = vec![ONE];
        for f in factors {
            let nf = vec_norm(f);
            omega = omega
                .iter()
                .flat_map(|&a| f.iter().map(move |&b| a * b / nf))
                .collect();
        }
        let pos: BTreeMap<Index, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Self::from_homomorphisms(alg, sites, omega, |s, a| {
            let i = pos[&s];
            let left = CMat::identity(k.pow(i as u32));
            let right = CMat::identity(k.pow((n - i - 1) as u32));
            left.kron(a).kron(&right)
        })
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn cyclic(&self) -> &[Complex64] {
        &self.cyclic
    }

    pub fn sites(&self) -> impl Iterator<Item = Index> + '_ {
        self.site_maps.keys().copied()
    }

    fn check_compatible(&self, fp: &FreeProduct) -> Result<()> {
        if fp.alg.dim != self.k {
            return reject("representation was built for a different site algebra");
        }
        Ok(())
    }

    fn letter_image(&self, l: &Letter) -> Result<&CMat> {
        let imgs = self
            .site_maps
            .get(&l.site)
            .ok_or_else(|| Error::RejectedInput(format!("no site map for site {}", l.site)))?;
        imgs.get(l.label - 1)
            .ok_or_else(|| Error::RejectedInput(format!("label {} out of range", l.label)))
    }

    /// `π(word) v`, letters applied right to left.
    pub fn apply_word(&self, w: &[Letter], v: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = v.to_vec();
        for l in w.iter().rev() {
            out = self.letter_image(l)?.matvec(&out)?;
        }
        Ok(out)
    }

    /// Full operator `π(x)`.
    pub fn image(&self, x: &CanonicalElement) -> Result<CMat> {
        let mut m = CMat::identity(self.space_dim).scale(x.scalar);
        for (w, &z) in &x.terms {
            let mut p = CMat::identity(self.space_dim);
            for l in w {
                p = &p * self.letter_image(l)?;
            }
            m.axpy(z, &p);
        }
        Ok(m)
    }
}

fn combine_images(imgs: &[CMat], terms: &[(usize, Complex64)], dim: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for &(c, z) in terms {
        m.axpy(z, &imgs[c]);
    }
    m
}

/// Vector state `x ↦ ⟨π(x)Ω, Ω⟩` of a concrete process.
pub struct VectorState<'a> {
    pub fp: &'a FreeProduct,
    pub rep: &'a ProcessRep,
}

impl StateFunctional for VectorState<'_> {
    type Algebra = FreeProduct;

    fn algebra(&self) -> &FreeProduct {
        self.fp
    }

    fn eval(&self, x: &CanonicalElement) -> Result<Complex64> {
        self.fp.eval(x, self.rep)
    }

    fn norm(&self, x: &CanonicalElement) -> Result<f64> {
        Ok(self.rep.image(x)?.operator_norm())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    word: Vec<(Index, usize)>,
    coeff: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct ElementJson {
    mode: Mode,
    scalar: [f64; 2],
    terms: Vec<TermJson>,
}

impl Serialize for CanonicalElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementJson {
            mode: self.mode,
            scalar: [self.scalar.re, self.scalar.im],
            terms: self
                .terms
                .iter()
                .map(|(w, z)| TermJson {
                    word: w.iter().map(|l| (l.site, l.label)).collect(),
                    coeff: [z.re, z.im],
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CanonicalElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = ElementJson::deserialize(d)?;
        let scalar = Complex64::new(j.scalar[0], j.scalar[1]);
        if j.mode == Mode::NonUnital && scalar != ZERO {
            return Err(D::Error::custom("non-unital elements have no scalar part"));
        }
        let mut terms = BTreeMap::new();
        for t in j.terms {
            let w: Vec<Letter> = t.word.iter().map(|&(s, l)| Letter::new(s, l)).collect();
            if w.is_empty() {
                return Err(D::Error::custom("terms must have nonempty words"));
            }
            check_word(j.mode, &w).map_err(D::Error::custom)?;
            if terms.insert(w, Complex64::new(t.coeff[0], t.coeff[1])).is_some() {
                return Err(D::Error::custom("duplicate word"));
            }
        }
        Ok(CanonicalElement {
            mode: j.mode,
            scalar,
            terms,
        })
    }
}

/// Outcome of [`fuzz_properties`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub cases: usize,
    pub associativity_failures: usize,
    pub adjoint_failures: usize,
    pub equivariance_failures: usize,
    pub quotient_max_gap: f64,
    pub eval_max_gap: f64,
}

impl FuzzSummary {
    pub fn passed(&self, tol: f64) -> bool {
        self.associativity_failures == 0
            && self.adjoint_failures == 0
            && self.equivariance_failures == 0
            && self.quotient_max_gap <= tol
            && self.eval_max_gap <= tol
    }
}

/// Random checks over the Pauli free product on `sites`:
/// associativity and the adjoint antihomomorphism (exact, in both modes),
/// `ρ(xy) = ρ(x)ρ(y)`, `ρ∘β_g = γ_g∘ρ` (exact) and `π(xy) = π(x)π(y)` under
/// five random representations.
///
/// Case `i` draws from stream `i` of `seed`, so any subrange reproduces.
pub fn fuzz_properties(sites: &[Index], cases: usize, seed: u64) -> Result<FuzzSummary> {
    if sites.is_empty() {
        return reject("need at least one site");
    }
    let fp = FreeProduct::new(SiteAlgebra::pauli());
    let mut rfz = Fuzz::stream(seed, u64::MAX);
    let reps: Vec<ProcessRep> = (0..5)
        .map(|i| ProcessRep::random(fp.algebra(), sites, 1 + i % 2, &mut rfz))
        .collect::<Result<_>>()?;
    let perms: Vec<Permutation> = crate::exchange::enumerate_perms(sites)?.collect();
    let mut s = FuzzSummary {
        cases,
        ..Default::default()
    };
    for case in 0..cases {
        let mut fz = Fuzz::stream(seed, case as u64);
        for mode in [Mode::NonUnital, Mode::Unital] {
            let shape = ElementShape {
                mode,
                sites: sites.to_vec(),
                max_len: 3,
                max_terms: 3,
                gaussian_integers: true,
            };
            let x = fp.random_element(&mut fz, &shape);
            let y = fp.random_element(&mut fz, &shape);
            let z = fp.random_element(&mut fz, &shape);
            let xy = fp.mul(&x, &y)?;
            if fp.mul(&xy, &z)? != fp.mul(&x, &fp.mul(&y, &z)?)? {
                s.associativity_failures += 1;
            }
            if fp.adjoint(&xy) != fp.mul(&fp.adjoint(&y), &fp.adjoint(&x))? {
                s.adjoint_failures += 1;
            }
            if mode == Mode::Unital {
                continue;
            }
            let g = &perms[fz.below(perms.len())];
            if fp.quotient(&fp.permute(g, &x))? != fp.permute(g, &fp.quotient(&x)?) {
                s.equivariance_failures += 1;
            }
            let split = fp.mul(&fp.quotient(&x)?, &fp.quotient(&y)?)?;
            s.quotient_max_gap = s.quotient_max_gap.max(fp.quotient(&xy)?.sub(&split)?.max_coeff());
            let rep = &reps[case % reps.len()];
            let lhs = rep.image(&xy)?;
            let rhs = &rep.image(&x)? * &rep.image(&y)?;
            s.eval_max_gap = s.eval_max_gap.max(lhs.max_abs_diff(&rhs));
            let direct = fp.eval(&xy, rep)?;
            let via = inner(&rhs.matvec(rep.cyclic())?, rep.cyclic());
            s.eval_max_gap = s.eval_max_gap.max((direct - via).norm());
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli() -> FreeProduct {
        FreeProduct::new(SiteAlgebra::pauli())
    }

    #[test]
    fn site_algebra_validation() {
        assert!(SiteAlgebra::new(vec![CMat::identity(2)]).is_err());
        let mut b = SiteAlgebra::pauli().basis.clone();
        b[3] = b[1].clone();
        assert!(SiteAlgebra::new(b).is_err());
        let mu = SiteAlgebra::matrix_units(3).unwrap();
        assert_eq!(mu.basis_len(), 9);
    }

    #[test]
    fn embed_unit_is_scalar_one() {
        let fp = pauli();
        for site in [1, 2, 7] {
            let e = fp.embed_letter(site, &CMat::identity(2), Mode::Unital).unwrap();
            assert_eq!(e, CanonicalElement::scalar(ONE));
        }
    }

    #[test]
    fn embed_basis_letter() {
        let fp = pauli();
        let w2 = fp.algebra().basis_element(2).clone();
        let e = fp.embed_letter(1, &w2, Mode::Unital).unwrap();
        assert_eq!(e, CanonicalElement::word(Mode::Unital, &[Letter::new(1, 2)], ONE).unwrap());
    }

    #[test]
    fn embed_mixed_letter() {
        let fp = pauli();
        let alg = fp.algebra();
        let a = &CMat::identity(2).scale_real(2.0) + &alg.basis_element(4).scale_real(5.0);
        let e = fp.embed_letter(3, &a, Mode::Unital).unwrap();
        assert_eq!(e.scalar_part(), c(2.0, 0.0));
        assert_eq!(e.terms().len(), 1);
        assert_eq!(e.terms()[&vec![Letter::new(3, 4)]], c(5.0, 0.0));
    }

    #[test]
    fn embed_dimension_mismatch() {
        let fp = pauli();
        assert!(fp.embed_letter(1, &CMat::identity(3), Mode::Unital).is_err());
    }

    #[test]
    fn disjoint_concatenation() {
        let fp = pauli();
        let mut fz = Fuzz::new(5);
        let (a, b) = (fz.cmat(2, 2), fz.cmat(2, 2));
        let x = fp.embed_letter(1, &a, Mode::NonUnital).unwrap();
        let y = fp.embed_letter(2, &b, Mode::NonUnital).unwrap();
        let p = fp.mul(&x, &y).unwrap();
        let ca = fp.algebra().coords(&a).unwrap();
        let cb = fp.algebra().coords(&b).unwrap();
        assert_eq!(p.terms().len(), 16);
        for i in 0..4 {
            for j in 0..4 {
                let w = vec![Letter::new(1, i + 1), Letter::new(2, j + 1)];
                assert!((p.terms()[&w] - ca[i] * cb[j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn same_site_non_unital_merge() {
        let fp = pauli();
        let mut fz = Fuzz::new(6);
        let (a, b) = (fz.cmat(2, 2), fz.cmat(2, 2));
        let x = fp.embed_letter(1, &a, Mode::NonUnital).unwrap();
        let y = fp.embed_letter(1, &b, Mode::NonUnital).unwrap();
        let expect = fp.embed_letter(1, &(&a * &b), Mode::NonUnital).unwrap();
        assert!(fp.mul(&x, &y).unwrap().approx_eq(&expect, 1e-14));
    }

    #[test]
    fn sigma_x_squares_to_one() {
        let fp = pauli();
        let sx = fp.embed_basis(1, 2, Mode::Unital).unwrap();
        assert_eq!(fp.mul(&sx, &sx).unwrap(), CanonicalElement::scalar(ONE));
        // non-unital keeps the unit letter at the site
        let sxn = fp.embed_basis(1, 2, Mode::NonUnital).unwrap();
        let p = fp.mul(&sxn, &sxn).unwrap();
        assert_eq!(p, CanonicalElement::word(Mode::NonUnital, &[Letter::new(1, 1)], ONE).unwrap());
    }

    #[test]
    fn contraction_cascades() {
        // σx₁ σz₂ · σz₂ σx₁ = 1
        let fp = pauli();
        let x = CanonicalElement::word(Mode::Unital, &[Letter::new(1, 2), Letter::new(2, 4)], ONE).unwrap();
        let y = CanonicalElement::word(Mode::Unital, &[Letter::new(2, 4), Letter::new(1, 2)], ONE).unwrap();
        assert_eq!(fp.mul(&x, &y).unwrap(), CanonicalElement::scalar(ONE));
    }

    #[test]
    fn mode_mismatch_rejected() {
        let fp = pauli();
        let x = fp.embed_basis(1, 2, Mode::Unital).unwrap();
        let y = fp.embed_basis(1, 2, Mode::NonUnital).unwrap();
        assert!(matches!(fp.mul(&x, &y), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn adjoint_examples() {
        let fp = pauli();
        assert_eq!(fp.adjoint(&CanonicalElement::zero(Mode::Unital)), CanonicalElement::zero(Mode::Unital));
        let sx = fp.embed_basis(4, 2, Mode::Unital).unwrap();
        assert_eq!(fp.adjoint(&sx), sx);

        // matrix-unit basis: (ε₀₁ at 1)(ε₁₀ at 2) ↦ conj · (ε₀₁ at 2)(ε₁₀ at 1)
        let mu = FreeProduct::new(SiteAlgebra::matrix_units(2).unwrap());
        let z = c(0.5, -1.5);
        // labels: 1 = I, 2 = ε01, 3 = ε10, 4 = ε11
        let x = CanonicalElement::word(Mode::NonUnital, &[Letter::new(1, 2), Letter::new(2, 3)], z).unwrap();
        let ax = mu.adjoint(&x);
        let expect = CanonicalElement::word(Mode::NonUnital, &[Letter::new(2, 2), Letter::new(1, 3)], z.conj()).unwrap();
        assert_eq!(ax, expect);
        // and under a representation, π(x*) = π(x)†
        let mut fz = Fuzz::new(9);
        let rep = ProcessRep::random(mu.algebra(), &[1, 2], 2, &mut fz).unwrap();
        let lhs = rep.image(&ax).unwrap();
        let rhs = rep.image(&x).unwrap().adjoint();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn permute_examples() {
        let fp = pauli();
        let x = CanonicalElement::word(Mode::Unital, &[Letter::new(1, 2), Letter::new(2, 3)], ONE).unwrap();
        assert_eq!(fp.permute(&Permutation::identity(), &x), x);
        let y = fp.permute(&Permutation::transposition(1, 2), &x);
        let expect = CanonicalElement::word(Mode::Unital, &[Letter::new(2, 2), Letter::new(1, 3)], ONE).unwrap();
        assert_eq!(y, expect);
    }

    #[test]
    fn quotient_single_letters() {
        let fp = pauli();
        let unit = fp.embed_letter(1, &CMat::identity(2).scale_real(3.0), Mode::NonUnital).unwrap();
        assert_eq!(fp.quotient(&unit).unwrap(), CanonicalElement::scalar(c(3.0, 0.0)));

        let mut fz = Fuzz::new(2);
        let a = fz.cmat(2, 2);
        let alpha = fp.algebra().coords(&a).unwrap()[0];
        let x = fp.embed_letter(1, &a, Mode::NonUnital).unwrap();
        let rho = fp.quotient(&x).unwrap();
        let w = &a - &CMat::identity(2).scale(alpha);
        let expect = CanonicalElement::scalar(alpha)
            .add(&fp.embed_letter(1, &w, Mode::Unital).unwrap())
            .unwrap();
        assert!(rho.approx_eq(&expect, 1e-14));
        assert!(fp.quotient(&expect).is_err());
    }

    #[test]
    fn quotient_degree_two_expansion() {
        // a₁a₂·1 + a₂(A₁−a₁) + a₁(A₂−a₂) + (A₁−a₁)⊗(A₂−a₂)
        let fp = pauli();
        let mut fz = Fuzz::new(4);
        let (a1, a2) = (fz.cmat(2, 2), fz.cmat(2, 2));
        let s1 = fp.algebra().coords(&a1).unwrap()[0];
        let s2 = fp.algebra().coords(&a2).unwrap()[0];
        let w1 = &a1 - &CMat::identity(2).scale(s1);
        let w2 = &a2 - &CMat::identity(2).scale(s2);
        let x = fp
            .mul(
                &fp.embed_letter(1, &a1, Mode::NonUnital).unwrap(),
                &fp.embed_letter(2, &a2, Mode::NonUnital).unwrap(),
            )
            .unwrap();
        let rho = fp.quotient(&x).unwrap();

        let cw1 = fp.algebra().coords(&w1).unwrap();
        let cw2 = fp.algebra().coords(&w2).unwrap();
        let mut expect = BTreeMap::new();
        for i in 1..4 {
            expect.insert(vec![Letter::new(1, i + 1)], s2 * cw1[i]);
            expect.insert(vec![Letter::new(2, i + 1)], s1 * cw2[i]);
            for j in 1..4 {
                expect.insert(vec![Letter::new(1, i + 1), Letter::new(2, j + 1)], cw1[i] * cw2[j]);
            }
        }
        assert!((rho.scalar_part() - s1 * s2).norm() < 1e-14);
        assert_eq!(rho.terms().len(), expect.len());
        for (w, z) in expect {
            assert!((rho.terms()[&w] - z).norm() < 1e-14, "{w:?}");
        }
    }

    #[test]
    fn eval_examples() {
        let fp = pauli();
        let mut fz = Fuzz::new(3);
        let rep = ProcessRep::random(fp.algebra(), &[1, 2], 2, &mut fz).unwrap();
        let z = c(0.25, -4.0);
        assert!((fp.eval(&CanonicalElement::scalar(z), &rep).unwrap() - z).norm() < 1e-14);

        let mu = FreeProduct::new(SiteAlgebra::matrix_units(2).unwrap());
        let e1 = vec![ONE, ZERO];
        let rep = ProcessRep::from_homomorphisms(mu.algebra(), &[1, 2, 3], e1, |_, a| a.clone()).unwrap();
        let eps11 = CMat::unit(2, 0, 0);
        for site in 1..=3 {
            let x = mu.embed_letter(site, &eps11, Mode::Unital).unwrap();
            assert!((mu.eval(&x, &rep).unwrap() - ONE).norm() < 1e-14);
        }
        let missing = mu.embed_letter(9, &eps11, Mode::Unital).unwrap();
        assert!(mu.eval(&missing, &rep).is_err());
    }

    #[test]
    fn rep_validation() {
        let alg = SiteAlgebra::pauli();
        // transpose is an anti-homomorphism
        let r = ProcessRep::from_homomorphisms(&alg, &[1], vec![ONE, ZERO], |_, a| a.transpose());
        assert!(r.is_err());
        let r = ProcessRep::from_homomorphisms(&alg, &[1], vec![ONE, ONE], |_, a| a.clone());
        assert!(r.is_err());
    }

    #[test]
    fn reduce_raw_agrees_with_products() {
        let fp = pauli();
        let mut fz = Fuzz::new(12);
        for mode in [Mode::Unital, Mode::NonUnital] {
            for _ in 0..50 {
                let len = 1 + fz.below(6);
                let raw: Vec<Letter> = (0..len)
                    .map(|_| Letter::new(1 + fz.below(2) as Index, 1 + fz.below(4)))
                    .collect();
                let mut prod: Option<CanonicalElement> = None;
                for l in &raw {
                    let e = fp.embed_basis(l.site, l.label, mode).unwrap();
                    prod = Some(match prod {
                        None => e,
                        Some(p) => fp.mul(&p, &e).unwrap(),
                    });
                }
                let prod = prod.unwrap();
                let left = fp.reduce_raw(mode, &raw, ONE, &mut |_| 0).unwrap();
                let mut seed = fz.below(1000);
                let mut rnd = |k: usize| {
                    seed = seed * 31 + 7;
                    seed % k
                };
                let random = fp.reduce_raw(mode, &raw, ONE, &mut rnd).unwrap();
                assert_eq!(left, prod);
                assert_eq!(random, prod);
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let fp = pauli();
        let mut fz = Fuzz::new(77);
        for mode in [Mode::Unital, Mode::NonUnital] {
            let shape = ElementShape {
                mode,
                sites: vec![-3, 1, 2, 40],
                max_len: 4,
                max_terms: 6,
                gaussian_integers: false,
            };
            let x = fp.random_element(&mut fz, &shape);
            let s = serde_json::to_string(&x).unwrap();
            let y: CanonicalElement = serde_json::from_str(&s).unwrap();
            assert_eq!(x, y);
            assert_eq!(serde_json::to_string(&y).unwrap(), s);
        }
    }

    #[test]
    fn json_schema() {
        let x = CanonicalElement::word(Mode::Unital, &[Letter::new(1, 2), Letter::new(2, 3)], c(1.0, -0.5))
            .unwrap()
            .add(&CanonicalElement::scalar(c(2.0, 0.0)))
            .unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(
            s,
            r#"{"mode":"unital","scalar":[2.0,0.0],"terms":[{"word":[[1,2],[2,3]],"coeff":[1.0,-0.5]}]}"#
        );
        let bad = r#"{"mode":"unital","scalar":[0.0,0.0],"terms":[{"word":[[1,2],[1,3]],"coeff":[1.0,0.0]}]}"#;
        assert!(serde_json::from_str::<CanonicalElement>(bad).is_err());
        let bad = r#"{"mode":"unital","scalar":[0.0,0.0],"terms":[{"word":[[1,1]],"coeff":[1.0,0.0]}]}"#;
        assert!(serde_json::from_str::<CanonicalElement>(bad).is_err());
    }
}
