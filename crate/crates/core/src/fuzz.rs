//! Seeded random inputs for fuzz suites.
//!
//! Streams are derived from a single seed with ChaCha's stream selector, so
//! case `k` of a suite draws the same values whether the suite runs serially
//! or sharded across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numkernel::{vec_norm, CMat};

pub struct Fuzz {
    rng: ChaCha8Rng,
}

impl Fuzz {
    pub fn new(seed: u64) -> Self {
        Fuzz {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` under the same seed.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Fuzz { rng }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.gen()
    }

    /// Entries with real and imaginary parts uniform in [-1, 1).
    pub fn complex(&mut self) -> Complex64 {
        Complex64::new(self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0))
    }

    pub fn cvec(&mut self, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| self.complex()).collect()
    }

    pub fn unit_vector(&mut self, n: usize) -> Vec<Complex64> {
        loop {
            let v = self.cvec(n);
            let nv = vec_norm(&v);
            if nv > 1e-3 {
                return v.into_iter().map(|z| z / nv).collect();
            }
        }
    }

    pub fn cmat(&mut self, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| self.complex())
    }

    pub fn hermitian(&mut self, n: usize) -> CMat {
        let a = self.cmat(n, n);
        (&a + &a.adjoint()).scale_real(0.5)
    }

    /// Unitary from Gram–Schmidt on random columns.
    pub fn unitary(&mut self, n: usize) -> CMat {
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        while cols.len() < n {
            let mut v = self.cvec(n);
            for _ in 0..2 {
                for u in &cols {
                    let p: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (x, y) in v.iter_mut().zip(u) {
                        *x -= p * y;
                    }
                }
            }
            let nv = vec_norm(&v);
            if nv > 1e-3 {
                cols.push(v.into_iter().map(|z| z / nv).collect());
            }
        }
        CMat::from_fn(n, n, |r, c| cols[c][r])
    }

    /// Density matrix `B B† / tr(B B†)`.
    pub fn density(&mut self, n: usize) -> CMat {
        let b = self.cmat(n, n);
        let p = &b * &b.adjoint();
        let t = p.trace().re;
        p.scale_real(1.0 / t)
    }
}
