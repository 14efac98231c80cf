//! Boolean Fock space `ℂ ⊕ ℂ^d` with basis `(e_#, e_1, …, e_d)`.
//!
//! `b_j = |e_#⟩⟨e_j|`, `b_j† = |e_j⟩⟨e_#|` and `r_j = b_j + b_j†`. Every
//! operator here has integer entries, so the matrix-unit identities are
//! checked for exact equality.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Error, Result};
use crate::exchange::Permutation;
use crate::fuzz::Fuzz;
use crate::numkernel::{hermitian_min_eig, inner, vec_norm, CMat, ONE, ZERO};
use crate::Index;

/// Index of `e_#`.
pub const VACUUM: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BooleanSpace {
    d: usize,
}

impl BooleanSpace {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return reject("Boolean space needs at least one site");
        }
        Ok(BooleanSpace { d })
    }

    pub fn sites(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.d + 1
    }

    pub fn basis_vector(&self, i: usize) -> Vec<Complex64> {
        let mut v = vec![ZERO; self.dim()];
        v[i] = ONE;
        v
    }
}

#[derive(Clone, Debug)]
pub struct BooleanOps {
    space: BooleanSpace,
    b: Vec<CMat>,
    bdag: Vec<CMat>,
    r: Vec<CMat>,
}

pub fn boolean_ops(space: &BooleanSpace) -> BooleanOps {
    let n = space.dim();
    let b: Vec<CMat> = (1..=space.d).map(|j| CMat::unit(n, VACUUM, j)).collect();
    let bdag: Vec<CMat> = b.iter().map(CMat::adjoint).collect();
    let r = b.iter().zip(&bdag).map(|(x, y)| x + y).collect();
    BooleanOps {
        space: *space,
        b,
        bdag,
        r,
    }
}

impl BooleanOps {
    pub fn space(&self) -> &BooleanSpace {
        &self.space
    }

    /// `b_j`, 1-based.
    pub fn b(&self, j: usize) -> &CMat {
        &self.b[j - 1]
    }

    pub fn bdag(&self, j: usize) -> &CMat {
        &self.bdag[j - 1]
    }

    pub fn r(&self, j: usize) -> &CMat {
        &self.r[j - 1]
    }

    fn d(&self) -> usize {
        self.space.d
    }

    /// `max |b_i b_j† − δ_ij ε_##|`.
    pub fn vacuum_projection_residual(&self) -> f64 {
        let p = CMat::unit(self.space.dim(), VACUUM, VACUUM);
        let mut worst: f64 = 0.0;
        for i in 1..=self.d() {
            for j in 1..=self.d() {
                let prod = self.b(i) * self.bdag(j);
                let target = if i == j { p.clone() } else { CMat::zeros(p.rows(), p.cols()) };
                worst = worst.max(prod.max_abs_diff(&target));
            }
        }
        worst
    }

    /// `max |r_i r_j − δ_ij ε_## − ε_ij|` and
    /// `max |r_i² − r_i² r_j² − ε_ii + δ_ij ε_ij|`.
    pub fn r_residuals(&self) -> (f64, f64) {
        let n = self.space.dim();
        let (mut prod, mut sq) = (0.0f64, 0.0f64);
        for i in 1..=self.d() {
            let ri2 = self.r(i) * self.r(i);
            for j in 1..=self.d() {
                let mut target = CMat::unit(n, i, j);
                if i == j {
                    target = &target + &CMat::unit(n, VACUUM, VACUUM);
                }
                prod = prod.max((self.r(i) * self.r(j)).max_abs_diff(&target));
                let rj2 = self.r(j) * self.r(j);
                let lhs = &ri2 - &(&ri2 * &rj2);
                let mut rhs = CMat::unit(n, i, i);
                if i == j {
                    rhs = &rhs - &CMat::unit(n, i, j);
                }
                sq = sq.max(lhs.max_abs_diff(&rhs));
            }
        }
        (prod, sq)
    }
}

/// Matrix units `ε_xy` over `{#, 1..d}` (index 0 is `#`), built only from
/// products of ladder operators: `ε_#j = b_j`, `ε_j# = b_j†`,
/// `ε_## = b_1 b_1†`, `ε_ij = b_i† b_j`.
pub fn matrix_units(ops: &BooleanOps) -> BTreeMap<(usize, usize), CMat> {
    let d = ops.d();
    let mut out = BTreeMap::new();
    out.insert((VACUUM, VACUUM), ops.b(1) * ops.bdag(1));
    for j in 1..=d {
        out.insert((VACUUM, j), ops.b(j).clone());
        out.insert((j, VACUUM), ops.bdag(j).clone());
        for i in 1..=d {
            out.insert((i, j), ops.bdag(i) * ops.b(j));
        }
    }
    out
}

/// `max |ε_xy − elementary(x, y)|` over the built units.
pub fn matrix_unit_residual(ops: &BooleanOps) -> f64 {
    let n = ops.space.dim();
    matrix_units(ops)
        .iter()
        .map(|(&(x, y), m)| m.max_abs_diff(&CMat::unit(n, x, y)))
        .fold(0.0, f64::max)
}

fn span_rank_of(mats: &[CMat]) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let len = mats[0].rows() * mats[0].cols();
    CMat::from_fn(mats.len(), len, |r, c| mats[r].as_slice()[c]).rank(1e-10)
}

/// Rank of the trace-pairing Gram matrix `tr(ε_u† ε_v)` of the matrix units.
pub fn unit_gram_rank(ops: &BooleanOps) -> usize {
    let units: Vec<CMat> = matrix_units(ops).into_values().collect();
    let g = CMat::from_fn(units.len(), units.len(), |r, c| {
        (&units[r].adjoint() * &units[c]).trace()
    });
    g.rank(1e-10)
}

/// Dimension of the span of `1` and all products of at most two ladder operators.
pub fn ladder_span_rank(ops: &BooleanOps) -> usize {
    let mut letters = Vec::new();
    for j in 1..=ops.d() {
        letters.push(ops.b(j).clone());
        letters.push(ops.bdag(j).clone());
    }
    let mut all = vec![CMat::identity(ops.space.dim())];
    all.extend(letters.iter().cloned());
    for x in &letters {
        for y in &letters {
            all.push(x * y);
        }
    }
    span_rank_of(&all)
}

/// Unitary relabeling `e_i ↦ e_{g(i)}` that fixes `e_#`.
pub fn site_permutation(space: &BooleanSpace, g: &Permutation) -> Result<CMat> {
    let d = space.d as Index;
    if g.support().iter().any(|&i| i < 1 || i > d) {
        return reject(format!("permutation must be supported in 1..={d}"));
    }
    let n = space.dim();
    let mut u = CMat::zeros(n, n);
    u[(VACUUM, VACUUM)] = ONE;
    for i in 1..=space.d {
        u[(g.apply(i as Index) as usize, i)] = ONE;
    }
    Ok(u)
}

/// `γ ω_#(X) + (1−γ)(1/d) Σ_i ⟨X e_i, e_i⟩`; the second term is the
/// normalized site-sector trace standing in for `ω_∞`.
pub fn invariant_family_eval(d: usize, gamma: f64, obs: &CMat) -> Result<Complex64> {
    if d == 0 {
        return reject("Boolean space needs at least one site");
    }
    if !(0.0..=1.0).contains(&gamma) {
        return reject("gamma must lie in [0,1]");
    }
    if obs.rows() != d + 1 || obs.cols() != d + 1 {
        return reject(format!("observable must be {0}×{0}", d + 1));
    }
    let site: Complex64 = (1..=d).map(|i| obs[(i, i)]).sum::<Complex64>() / d as f64;
    Ok(obs[(VACUUM, VACUUM)] * gamma + site * (1.0 - gamma))
}

/// Dimension of the commutant of the site permutation group in `M_{d+1}`.
///
/// Invariant states are the trace-one positive elements of this commutant;
/// at finite `d` it contains the cross terms between `e_#` and the uniform
/// site vector.
pub fn invariant_commutant_dim(space: &BooleanSpace) -> Result<usize> {
    let n = space.dim();
    let id = CMat::identity(n);
    let gens: Vec<CMat> = (1..space.d)
        .map(|i| site_permutation(space, &Permutation::transposition(i as Index, i as Index + 1)))
        .collect::<Result<_>>()?;
    if gens.is_empty() {
        return Ok(n * n);
    }
    let block = n * n;
    let mut m = CMat::zeros(gens.len() * block, block);
    for (k, p) in gens.iter().enumerate() {
        // row-major vec: vec(X P) − vec(P X) = (I ⊗ Pᵀ − P ⊗ I) vec X
        let eq = &id.kron(&p.transpose()) - &p.kron(&id);
        for r in 0..block {
            for c in 0..block {
                m[(k * block + r, c)] = eq[(r, c)];
            }
        }
    }
    Ok(m.null_space(1e-10).cols())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstructionCase {
    pub overlap_sq: f64,
    pub ratio: f64,
    pub gap: f64,
}

/// For `A = |e_#⟩⟨ξ|` and `F_φ(A) = ω_#(A) P_# + φ(P⊥ A P⊥) P⊥`, returns
/// `ω_ξ(F_φ(A)) / ω_ξ(A)` next to `|⟨e_#, ξ⟩|²`.
///
/// `site_density` is a `d×d` density matrix representing `φ` on the site block.
pub fn ce_obstruction(d: usize, xi: &[Complex64], site_density: &CMat) -> Result<ObstructionCase> {
    let space = BooleanSpace::new(d)?;
    let n = space.dim();
    if xi.len() != n {
        return reject(format!("xi must have length {n}"));
    }
    if (vec_norm(xi) - 1.0).abs() > 1e-12 {
        return reject("xi must be a unit vector");
    }
    if site_density.rows() != d || site_density.cols() != d {
        return reject(format!("site state must be {d}×{d}"));
    }
    if !site_density.is_hermitian(1e-12)
        || (site_density.trace() - ONE).norm() > 1e-12
        || hermitian_min_eig(site_density, 1e-12)? < -1e-12
    {
        return reject("site state must be a density matrix");
    }
    let overlap_sq = xi[VACUUM].norm_sqr();
    if overlap_sq <= 1e-15 || overlap_sq >= 1.0 - 1e-15 {
        return reject("overlap with the vacuum must lie strictly between 0 and 1");
    }
    let e = space.basis_vector(VACUUM);
    let a = CMat::from_fn(n, n, |r, c| e[r] * xi[c].conj());
    let sites: Vec<usize> = (1..n).collect();
    let phi = (site_density * &a.submatrix(&sites, &sites)).trace();
    let mut f = CMat::unit(n, VACUUM, VACUUM).scale(a[(VACUUM, VACUUM)]);
    for i in 1..n {
        f[(i, i)] = phi;
    }
    let omega = |x: &CMat| -> Result<Complex64> { Ok(inner(&x.matvec(xi)?, xi)) };
    let denom = omega(&a)?;
    if denom.norm() <= 1e-300 {
        return Err(Error::Consistency("ω_ξ(A) vanishes".into()));
    }
    let q = omega(&f)? / denom;
    let gap = (q - Complex64::new(overlap_sq, 0.0)).norm();
    if gap > 1e-12 {
        return Err(Error::Consistency(format!("obstruction ratio deviates by {gap:e}")));
    }
    Ok(ObstructionCase {
        overlap_sq,
        ratio: q.re,
        gap,
    })
}

/// Unit vector in `ℂ^{d+1}` with `|⟨e_#, ξ⟩|²` uniform in `(lo, hi)`.
pub fn sample_xi(fz: &mut Fuzz, d: usize, lo: f64, hi: f64) -> Vec<Complex64> {
    let o = fz.uniform(lo, hi);
    let phase = Complex64::from_polar(1.0, fz.uniform(0.0, std::f64::consts::TAU));
    let rest = fz.unit_vector(d);
    let mut xi = Vec::with_capacity(d + 1);
    xi.push(phase * o.sqrt());
    xi.extend(rest.into_iter().map(|z| z * (1.0 - o).sqrt()));
    xi
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationResiduals {
    pub vacuum_projection: f64,
    pub matrix_units: f64,
    pub r_products: f64,
    pub r_squares: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BooleanReport {
    pub d: usize,
    pub relation_residuals: RelationResiduals,
    pub span_rank: usize,
    pub obstruction_cases: Vec<ObstructionCase>,
}

pub fn relation_residuals(ops: &BooleanOps) -> RelationResiduals {
    let (r_products, r_squares) = ops.r_residuals();
    RelationResiduals {
        vacuum_projection: ops.vacuum_projection_residual(),
        matrix_units: matrix_unit_residual(ops),
        r_products,
        r_squares,
    }
}
