//! Pentadiagonal matrices and their LU factorization without pivoting.
//!
//! Every system assembled by the solver is similar (by a positive diagonal
//! scaling) to a symmetric positive definite matrix, so all leading minors
//! are positive and Doolittle elimination needs no row exchanges.

use crate::error::{Error, Result};

/// Band of width two on each side of the diagonal. Row `i` stores
/// `[a(i,i-2), a(i,i-1), a(i,i), a(i,i+1), a(i,i+2)]`; entries outside the
/// matrix are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Pentadiagonal {
    rows: Vec<[f64; 5]>,
}

impl Pentadiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            rows: vec![[0.0; 5]; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for r in &mut m.rows {
            r[2] = 1.0;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let off = j as isize - i as isize + 2;
        if (0..5).contains(&off) {
            self.rows[i][off as usize]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let off = j as isize - i as isize + 2;
        assert!((0..5).contains(&off), "({i}, {j}) outside the band");
        self.rows[i][off as usize] = v;
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64; 5] {
        &mut self.rows[i]
    }

    /// `alpha * self + beta * I`.
    pub fn scale_shift(&self, alpha: f64, beta: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            for v in r.iter_mut() {
                *v *= alpha;
            }
            r[2] += beta;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.rows.len();
        for i in 0..n {
            let mut s = 0.0;
            for (k, &a) in self.rows[i].iter().enumerate() {
                let j = i as isize + k as isize - 2;
                if j >= 0 && (j as usize) < n {
                    s += a * x[j as usize];
                }
            }
            y[i] = s;
        }
    }

    pub fn factor(&self) -> Result<BandedLu> {
        let n = self.rows.len();
        let mut lu = self.rows.clone();
        for k in 0..n {
            let pivot = lu[k][2];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularPivot { row: k });
            }
            for i in (k + 1)..(k + 3).min(n) {
                // a(i,k) sits at offset k - i + 2
                let off_ik = k + 2 - i;
                let l = lu[i][off_ik] / pivot;
                lu[i][off_ik] = l;
                for j in (k + 1)..(k + 3).min(n) {
                    let off_ij = j + 2 - i;
                    let off_kj = j + 2 - k;
                    lu[i][off_ij] -= l * lu[k][off_kj];
                }
            }
        }
        Ok(BandedLu { lu })
    }
}

/// Packed LU factors of a [`Pentadiagonal`] matrix: unit lower part in
/// offsets 0..2, upper part (with diagonal) in offsets 2..5.
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: Vec<[f64; 5]>,
}

impl BandedLu {
    pub fn len(&self) -> usize {
        self.lu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lu.is_empty()
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.lu.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 0..n {
            let r = &self.lu[i];
            let mut s = rhs[i];
            if i >= 1 {
                s -= r[1] * rhs[i - 1];
            }
            if i >= 2 {
                s -= r[0] * rhs[i - 2];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let r = &self.lu[i];
            let mut s = rhs[i];
            if i + 1 < n {
                s -= r[3] * rhs[i + 1];
            }
            if i + 2 < n {
                s -= r[4] * rhs[i + 2];
            }
            rhs[i] = s / r[2];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dominant(n: usize, seed: u64) -> Pentadiagonal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Pentadiagonal::zeros(n);
        for i in 0..n {
            let row = m.row_mut(i);
            for (k, v) in row.iter_mut().enumerate() {
                if k != 2 {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            row[2] = 5.0 + rng.gen_range(0.0..1.0);
        }
        m
    }

    #[test]
    fn solve_inverts_multiplication() {
        for &n in &[1usize, 2, 3, 5, 17, 200] {
            let m = random_dominant(n, n as u64);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut b = vec![0.0; n];
            m.mul_vec(&x, &mut b);
            let lu = m.factor().unwrap();
            lu.solve(&mut b);
            for (xi, bi) in x.iter().zip(&b) {
                assert!((xi - bi).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = Pentadiagonal::zeros(4);
        assert_eq!(m.factor().unwrap_err(), Error::SingularPivot { row: 0 });
    }
}
