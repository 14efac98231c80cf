//! CAR algebra on `n` modes inside `M_{2^n}` via Jordan–Wigner.
//!
//! `a_j = Z^{⊗(j−1)} ⊗ σ⁻ ⊗ 1^{⊗(n−j)}` with `σ⁻ = [[0,1],[0,0]]` and
//! `Z = diag(1,−1)`, so basis vector 0 is the Fock vacuum and `Z^{⊗n}`
//! implements the parity automorphism.
//!
//! Only finite-`n` statements are checked here: products of a single even
//! state are symmetric, the permutation average is a conditional expectation
//! onto the fixed-point algebra and preserves symmetric states. The converse
//! directions need infinitely many modes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Error, Result};
use crate::exchange::{enumerate_perms, Permutation};
use crate::numkernel::{hermitian_min_eig, CMat, ONE, ZERO};
use crate::Index;

pub const MAX_MODES: usize = 8;
/// Largest `n` for averages over all of `P_n`.
pub const MAX_AVERAGE_MODES: usize = 6;

fn lowering() -> CMat {
    CMat::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap()
}

fn pauli_z() -> CMat {
    CMat::diag_real(&[1.0, -1.0])
}

/// Annihilators, parity unitary and Fock vacuum for `n` modes.
#[derive(Clone, Debug)]
pub struct CarSystem {
    n: usize,
    a: Vec<CMat>,
    adag: Vec<CMat>,
    parity: CMat,
    vacuum: Vec<Complex64>,
}

/// Jordan–Wigner annihilators for `1 ≤ n ≤ 8` modes.
pub fn jw_generators(n: usize) -> Result<CarSystem> {
    if n == 0 || n > MAX_MODES {
        return Err(Error::ResourceLimit(format!("modes must be in 1..={MAX_MODES}, got {n}")));
    }
    let z = pauli_z();
    let id = CMat::identity(2);
    let sm = lowering();
    let a: Vec<CMat> = (0..n)
        .map(|j| {
            let mut m = CMat::identity(1);
            for k in 0..n {
                let f = match k.cmp(&j) {
                    std::cmp::Ordering::Less => &z,
                    std::cmp::Ordering::Equal => &sm,
                    std::cmp::Ordering::Greater => &id,
                };
                m = m.kron(f);
            }
            m
        })
        .collect();
    let adag = a.iter().map(CMat::adjoint).collect();
    let mut parity = CMat::identity(1);
    for _ in 0..n {
        parity = parity.kron(&z);
    }
    let mut sys = CarSystem {
        n,
        a,
        adag,
        parity,
        vacuum: Vec::new(),
    };
    sys.vacuum = sys.joint_kernel_vector(&(0..n).collect::<Vec<_>>())?;
    Ok(sys)
}

impl CarSystem {
    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `a_j`, 1-based.
    pub fn a(&self, j: usize) -> &CMat {
        &self.a[j - 1]
    }

    /// `a_j†`, 1-based.
    pub fn adag(&self, j: usize) -> &CMat {
        &self.adag[j - 1]
    }

    pub fn parity_unitary(&self) -> &CMat {
        &self.parity
    }

    /// Unit vector spanning the common kernel of the listed annihilators
    /// (0-based); errors unless that kernel is one-dimensional.
    fn joint_kernel_vector(&self, modes: &[usize]) -> Result<Vec<Complex64>> {
        let d = self.dim();
        let mut stacked = CMat::zeros(modes.len() * d, d);
        for (b, &j) in modes.iter().enumerate() {
            for r in 0..d {
                for c in 0..d {
                    stacked[(b * d + r, c)] = self.a[j][(r, c)];
                }
            }
        }
        let ns = stacked.null_space(1e-10);
        if ns.cols() != 1 {
            return Err(Error::Consistency(format!(
                "intertwiner solution space has dimension {}, expected 1",
                ns.cols()
            )));
        }
        Ok(ns.col(0))
    }

    /// `∏ a^{♯}` for a word of `(mode, dagger)` pairs, left to right.
    pub fn monomial(&self, word: &[(usize, bool)]) -> Result<CMat> {
        let mut m = CMat::identity(self.dim());
        for &(j, dag) in word {
            if j == 0 || j > self.n {
                return reject(format!("mode {j} out of range"));
            }
            m = &m * if dag { &self.adag[j - 1] } else { &self.a[j - 1] };
        }
        Ok(m)
    }

    /// `I^{⊗(j−1)} ⊗ A ⊗ I^{⊗(n−j)}` for a 2×2 `A`.
    pub fn local_operator(&self, j: usize, a: &CMat) -> Result<CMat> {
        if j == 0 || j > self.n || a.rows() != 2 || a.cols() != 2 {
            return reject("local operator needs 1 ≤ j ≤ n and a 2×2 matrix");
        }
        let left = CMat::identity(1 << (j - 1));
        let right = CMat::identity(1 << (self.n - j));
        Ok(left.kron(a).kron(&right))
    }

    /// Largest deviation from `{a_j†, a_k} = δ_jk`, `{a_j, a_k} = {a_j†, a_k†} = 0`.
    pub fn car_residual(&self) -> f64 {
        let id = CMat::identity(self.dim());
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                let mut ac = CMat::anticommutator(&self.adag[j], &self.a[k]);
                if j == k {
                    ac = &ac - &id;
                }
                worst = worst
                    .max(ac.max_abs())
                    .max(CMat::anticommutator(&self.a[j], &self.a[k]).max_abs())
                    .max(CMat::anticommutator(&self.adag[j], &self.adag[k]).max_abs());
            }
        }
        worst
    }

    /// Largest deviation from `Θ a_j Θ† = −a_j`, `Θ² = 1`, `Θ†Θ = 1`.
    pub fn parity_residual(&self) -> f64 {
        let id = CMat::identity(self.dim());
        let th = &self.parity;
        let mut worst = (th * th).max_abs_diff(&id).max((&th.adjoint() * th).max_abs_diff(&id));
        for a in &self.a {
            let conj = &(th * a) * &th.adjoint();
            worst = worst.max((&conj + a).max_abs());
            // applying the automorphism twice returns a_j
            let twice = &(th * &conj) * &th.adjoint();
            worst = worst.max(twice.max_abs_diff(a));
        }
        worst
    }

    fn check_perm(&self, g: &Permutation) -> Result<()> {
        if g.support().iter().any(|&i| i < 1 || i > self.n as Index) {
            return reject(format!("permutation must be supported in 1..={}", self.n));
        }
        Ok(())
    }

    /// Unitary `U` with `U a_j U† = a_{g(j)}`, unique up to phase.
    ///
    /// Solves the intertwiner equations `U a_j = a_{g(j)} U`,
    /// `U a_j† = a_{g(j)}† U` through the cyclic vacuum: `U` must send the
    /// joint kernel of the `a_j` onto the joint kernel of the `a_{g(j)}`, and
    /// is then fixed on every `a_{j₁}† ⋯ a_{j_k}† Ω`.
    pub fn permutation_unitary(&self, g: &Permutation) -> Result<CMat> {
        self.check_perm(g)?;
        let target: Vec<usize> = (1..=self.n).map(|j| g.apply(j as Index) as usize - 1).collect();
        let omega_t = self.joint_kernel_vector(&target)?;
        let d = self.dim();
        let mut u = CMat::zeros(d, d);
        for mask in 0..d {
            let mut x = self.vacuum.clone();
            let mut y = omega_t.clone();
            // a†_{j₁} ⋯ a†_{j_k} Ω with j₁ < ⋯ < j_k: apply the largest first
            for j in (0..self.n).rev() {
                if mask & (1 << j) != 0 {
                    x = self.adag[j].matvec(&x)?;
                    y = self.adag[target[j]].matvec(&y)?;
                }
            }
            for r in 0..d {
                if y[r] == ZERO {
                    continue;
                }
                for c in 0..d {
                    u[(r, c)] += y[r] * x[c].conj();
                }
            }
        }
        let ud = u.adjoint();
        let mut worst = (&ud * &u).max_abs_diff(&CMat::identity(d));
        for j in 0..self.n {
            let moved = &(&u * &self.a[j]) * &ud;
            worst = worst.max(moved.max_abs_diff(&self.a[target[j]]));
        }
        if worst > 1e-10 {
            return Err(Error::Consistency(format!(
                "intertwiner residual {worst:e} exceeds 1e-10"
            )));
        }
        Ok(u)
    }

    fn all_unitaries(&self) -> Result<Vec<CMat>> {
        if self.n > MAX_AVERAGE_MODES {
            return Err(Error::ResourceLimit(format!(
                "averaging over P_{} exceeds the limit n ≤ {MAX_AVERAGE_MODES}",
                self.n
            )));
        }
        let dom: Vec<Index> = (1..=self.n as Index).collect();
        enumerate_perms(&dom)?.map(|g| self.permutation_unitary(&g)).collect()
    }

    /// `E(X) = (1/n!) Σ_g U_g X U_g†`, the conditional expectation onto the
    /// fixed-point algebra of the permutation action.
    pub fn fixed_point_expectation(&self, x: &CMat) -> Result<CMat> {
        if x.rows() != self.dim() || x.cols() != self.dim() {
            return reject("operator does not act on this system");
        }
        let us = self.all_unitaries()?;
        let mut acc = CMat::zeros(self.dim(), self.dim());
        for u in &us {
            acc.axpy(ONE, &(&(u * x) * &u.adjoint()));
        }
        Ok(acc.scale_real(1.0 / us.len() as f64))
    }
}

/// One-site density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteState {
    rho: CMat,
}

fn check_density(rho: &CMat, what: &str) -> Result<()> {
    if !rho.is_hermitian(1e-12) {
        return reject(format!("{what} must be Hermitian"));
    }
    if (rho.trace() - ONE).norm() > 1e-12 {
        return reject(format!("{what} must have unit trace"));
    }
    if hermitian_min_eig(rho, 1e-12)? < -1e-12 {
        return reject(format!("{what} must be positive semidefinite"));
    }
    Ok(())
}

impl SiteState {
    pub fn new(rho: CMat) -> Result<Self> {
        if rho.rows() != 2 || rho.cols() != 2 {
            return reject("site state must be 2×2");
        }
        check_density(&rho, "site state")?;
        Ok(SiteState { rho })
    }

    /// `diag(p, 1 − p)` plus real off-diagonal `c`.
    pub fn with_coherence(p: f64, c: f64) -> Result<Self> {
        Self::new(CMat::from_real_rows(&[&[p, c], &[c, 1.0 - p]])?)
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    /// Commutes with `Z = diag(1, −1)`.
    pub fn is_even(&self, tol: f64) -> bool {
        CMat::commutator(&self.rho, &pauli_z()).max_abs() <= tol
    }

    pub fn expect(&self, a: &CMat) -> Complex64 {
        (&self.rho * a).trace()
    }
}

/// State on `M_{2^n}` given by a density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CarState {
    density: CMat,
}

impl CarState {
    pub fn new(density: CMat) -> Result<Self> {
        if !density.is_square() || !density.rows().is_power_of_two() {
            return reject("density must be 2^n × 2^n");
        }
        check_density(&density, "density")?;
        Ok(CarState { density })
    }

    pub fn density(&self) -> &CMat {
        &self.density
    }

    /// `tr(ρ X)`.
    pub fn expect(&self, x: &CMat) -> Complex64 {
        (&self.density * x).trace()
    }
}

/// `ρ^{⊗n}`.
pub fn product_state(site: &SiteState, n: usize) -> CarState {
    let mut d = CMat::identity(1);
    for _ in 0..n {
        d = d.kron(&site.rho);
    }
    CarState { density: d }
}

/// Convex combination `Σ w_k ρ_k^{⊗n}`.
pub fn mixture_state(weights: &[f64], sites: &[SiteState], n: usize) -> Result<CarState> {
    if weights.len() != sites.len() || weights.is_empty() {
        return reject("one weight per site state");
    }
    if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return reject("weights must be a probability vector");
    }
    let dim = 1 << n;
    let mut d = CMat::zeros(dim, dim);
    for (w, s) in weights.iter().zip(sites) {
        d.axpy(Complex64::new(*w, 0.0), product_state(s, n).density());
    }
    Ok(CarState { density: d })
}

/// `ρ ↦ U_g† ρ U_g`, so that `tr(ρ' X) = tr(ρ α_g(X))`.
pub fn state_permute(st: &CarState, sys: &CarSystem, g: &Permutation) -> Result<CarState> {
    if st.density.rows() != sys.dim() {
        return reject("state and system sizes differ");
    }
    let u = sys.permutation_unitary(g)?;
    Ok(CarState {
        density: &(&u.adjoint() * &st.density) * &u,
    })
}

/// Average of [`state_permute`] over all of `P_n`.
pub fn symmetrize(st: &CarState, sys: &CarSystem) -> Result<CarState> {
    if st.density.rows() != sys.dim() {
        return reject("state and system sizes differ");
    }
    let us = sys.all_unitaries()?;
    let mut acc = CMat::zeros(sys.dim(), sys.dim());
    for u in &us {
        acc.axpy(ONE, &(&(&u.adjoint() * &st.density) * u));
    }
    Ok(CarState {
        density: acc.scale_real(1.0 / us.len() as f64),
    })
}

/// All two-letter monomials `a^{♯}_i a^{♯}_j`, `i ≠ j`.
pub fn pair_monomials(n: usize) -> Vec<Vec<(usize, bool)>> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            for di in [false, true] {
                for dj in [false, true] {
                    out.push(vec![(i, di), (j, dj)]);
                }
            }
        }
    }
    out
}

/// `max |φ(α_g(m)) − φ(m)|` over transpositions `g` and pair monomials `m`,
/// with `α_g` applied by relabeling modes in the monomial.
pub fn transposition_scan(st: &CarState, sys: &CarSystem) -> Result<f64> {
    let n = sys.modes();
    let mut worst: f64 = 0.0;
    for m in pair_monomials(n) {
        let base = st.expect(&sys.monomial(&m)?);
        for i in 1..=n {
            for j in i + 1..=n {
                let g = Permutation::transposition(i as Index, j as Index);
                let moved: Vec<(usize, bool)> =
                    m.iter().map(|&(k, d)| (g.apply(k as Index) as usize, d)).collect();
                worst = worst.max((st.expect(&sys.monomial(&moved)?) - base).norm());
            }
        }
    }
    Ok(worst)
}

/// `max |φ(ι₁(A)ι₂(B)) − Σ_k w_k ψ_k(A)ψ_k(B)|` over `A, B` in the 2×2 matrix units.
pub fn mixture_factorization_gap(weights: &[f64], sites: &[SiteState], n: usize) -> Result<f64> {
    if n < 2 {
        return reject("need at least two modes");
    }
    let sys = jw_generators(n)?;
    let st = mixture_state(weights, sites, n)?;
    let units: Vec<CMat> = (0..4).map(|k| CMat::unit(2, k / 2, k % 2)).collect();
    let mut worst: f64 = 0.0;
    for a in &units {
        for b in &units {
            let lhs = st.expect(&(&sys.local_operator(1, a)? * &sys.local_operator(2, b)?));
            let rhs: Complex64 = weights
                .iter()
                .zip(sites)
                .map(|(w, s)| s.expect(a) * s.expect(b) * *w)
                .sum();
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvennessTest {
    pub label: String,
    pub even: bool,
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarReport {
    pub n: usize,
    pub car_residual: f64,
    pub parity_residual: f64,
    pub evenness_tests: Vec<EvennessTest>,
    pub definetti_mixture_gap: f64,
}
