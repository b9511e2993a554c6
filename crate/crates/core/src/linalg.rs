//! Banded symmetric positive definite storage and Cholesky factorization.
//!
//! The structured meshes number nodes lexicographically, so every stiffness
//! matrix assembled on them is banded with half-bandwidth `O(n)`. A banded
//! Cholesky factor is exact, pivot-free (hence bit-reproducible) and cheap at
//! the sizes used here.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("entry ({row}, {col}) lies outside the band of half-width {bandwidth}")]
    OutsideBand {
        row: usize,
        col: usize,
        bandwidth: usize,
    },
    #[error("vector length {got} does not match system size {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Lower triangle of a symmetric band matrix; row `i` holds columns
/// `i - bw ..= i`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bw = bandwidth.min(n.saturating_sub(1));
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)`; only the lower triangle is stored so the
    /// caller adds each symmetric pair once, on either side.
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<(), LinalgError> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            return Err(LinalgError::OutsideBand {
                row: i,
                col: j,
                bandwidth: self.bw,
            });
        }
        let k = self.idx(i, j);
        self.data[k] += v;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = lo + self.bw - i;
            let mut s = 0.0;
            for (j, a) in (lo..i).zip(&row[off..self.bw]) {
                s += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += s + row[self.bw] * x[i];
        }
        y
    }

    pub fn cholesky(&self) -> Result<BandCholesky, LinalgError> {
        BandCholesky::factor(self)
    }
}

/// `A = L Lᵀ` with `L` stored in the same band layout.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn factor(a: &BandMatrix) -> Result<Self, LinalgError> {
        let mut l = a.clone();
        let (n, bw) = (l.n, l.bw);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = l.data[l.idx(j, j)];
            for k in lo..j {
                let v = l.data[l.idx(j, k)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            let jj = l.idx(j, j);
            l.data[jj] = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let lo_i = i.saturating_sub(bw).max(lo);
                let mut s = l.data[l.idx(i, j)];
                for k in lo_i..j {
                    s -= l.data[l.idx(i, k)] * l.data[l.idx(j, k)];
                }
                let ij = l.idx(i, j);
                l.data[ij] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn size(&self) -> usize {
        self.l.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let (n, bw) = (self.l.n, self.l.bw);
        if b.len() != n {
            return Err(LinalgError::SizeMismatch {
                expected: n,
                got: b.len(),
            });
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.l.data[self.l.idx(i, k)] * b[k];
            }
            b[i] = s / self.l.data[self.l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = b[i];
            for k in i + 1..hi {
                s -= self.l.data[self.l.idx(k, i)] * b[k];
            }
            b[i] = s / self.l.data[self.l.idx(i, i)];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
