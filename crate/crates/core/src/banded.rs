//! Symmetric band matrices and their Cholesky factors.
//!
//! Storage keeps the lower band row by row: entry `(i, i - d)` for
//! `d = 0..=bandwidth` lives at `i * (bandwidth + 1) + d`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn from_diagonal(diag: &[f64], bandwidth: usize) -> Self {
        let mut m = Self::zeros(diag.len(), bandwidth);
        for (i, &d) in diag.iter().enumerate() {
            m.add(i, i, d);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        (d <= self.bandwidth).then(|| hi * (self.bandwidth + 1) + d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `value` to the symmetric pair `(i, j)`/`(j, i)`.
    ///
    /// Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).expect("entry outside the stored band");
        self.data[s] += value;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let w = self.bandwidth + 1;
        for yi in y.iter_mut() {
            *yi = 0.0;
        }
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for d in 1..w.min(i + 1) {
                let a = row[d];
                if a != 0.0 {
                    y[i] += a * x[i - d];
                    y[i - d] += a * x[i];
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// Quadratic form `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `alpha * self + beta * other`; the result carries the larger band.
    pub fn combine(&self, alpha: f64, other: &SymBanded, beta: f64) -> SymBanded {
        assert_eq!(self.n, other.n);
        let bw = self.bandwidth.max(other.bandwidth);
        let mut out = SymBanded::zeros(self.n, bw);
        for m in [(self, alpha), (other, beta)] {
            let (src, scale) = m;
            if scale == 0.0 {
                continue;
            }
            for i in 0..self.n {
                for d in 0..=src.bandwidth.min(i) {
                    let v = src.data[i * (src.bandwidth + 1) + d];
                    if v != 0.0 {
                        out.data[i * (bw + 1) + d] += scale * v;
                    }
                }
            }
        }
        out
    }

    /// Adds `scale * diag` to the main diagonal.
    pub fn add_diagonal(&mut self, diag: &[f64], scale: f64) {
        assert_eq!(diag.len(), self.n);
        for (i, d) in diag.iter().enumerate() {
            self.data[i * (self.bandwidth + 1)] += scale * d;
        }
    }

    /// Largest absolute entry; used as a scale for relative comparisons.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }
}

/// Lower-triangular band factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SymBanded) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth;
        let w = bw + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            let jmin = i.saturating_sub(bw);
            for j in jmin..=i {
                // l(i, j) lives at i*w + (i-j)
                let mut s = l[i * w + (i - j)];
                let kmin = jmin.max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i * w] = libm::sqrt(s);
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(Self {
            n,
            bandwidth: bw,
            data: l,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let w = self.bandwidth + 1;
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(self.bandwidth)..i {
                s -= self.data[i * w + (i - k)] * b[k];
            }
            b[i] = s / self.data[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in (i + 1)..self.n.min(i + w) {
                s -= self.data[k * w + (k - i)] * b[k];
            }
            b[i] = s / self.data[i * w];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
