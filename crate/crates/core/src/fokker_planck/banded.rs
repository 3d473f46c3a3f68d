//! LU factorisation of square banded matrices without pivoting.
//!
//! Safe for the M-matrices produced by the upwind discretisation, whose pivots
//! stay positive. Storage is row-major, `2 * bw + 1` slots per row, slot
//! `bw + (col - row)` holding entry `(row, col)`.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.bw >= r && c <= r + self.bw, "({r}, {c}) outside band");
        r * (2 * self.bw + 1) + self.bw + c - r
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.bw < r || c > r + self.bw {
            return 0.0;
        }
        self.data[self.slot(r, c)]
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] = v;
    }

    /// In-place Doolittle factorisation; fails on a pivot below `tiny` times the largest diagonal entry.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        let scale = (0..n).map(|k| self.data[k * w + bw].abs()).fold(0.0, f64::max);
        let tiny = 1e-14 * scale;
        for p in 0..n {
            let pivot = self.data[p * w + bw];
            if !(pivot.abs() > tiny) {
                return Err(Error::Singular(p));
            }
            let last = (p + bw).min(n - 1);
            let row_p = p * w + bw + 1;
            let len = last - p;
            for r in p + 1..=last {
                let lr = r * w + bw + p - r;
                let l = self.data[lr] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[lr] = l;
                let start = lr + 1;
                // columns p+1..=last of row r
                let (head, tail) = self.data.split_at_mut(start);
                let src = &head[row_p..row_p + len];
                for (d, s) in tail[..len].iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Ok(BandLu { m: self })
    }

    /// Dense matrix-vector product.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        (0..n)
            .map(|r| {
                let lo = r.saturating_sub(bw);
                let hi = (r + bw).min(n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }
}

/// Packed `L U` factors; `L` has a unit diagonal.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.m.n, self.m.bw);
        let w = 2 * bw + 1;
        let a = &self.m.data;
        let mut x = b.to_vec();
        for p in 0..n {
            let xp = x[p];
            if xp == 0.0 {
                continue;
            }
            for r in p + 1..=(p + bw).min(n - 1) {
                x[r] -= a[r * w + bw + p - r] * xp;
            }
        }
        for p in (0..n).rev() {
            let hi = (p + bw).min(n - 1);
            let row = &a[p * w + bw + 1..p * w + bw + 1 + (hi - p)];
            let s: f64 = row.iter().zip(&x[p + 1..=hi]).map(|(u, v)| u * v).sum();
            x[p] = (x[p] - s) / a[p * w + bw];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.m.n, self.m.bw);
        let w = 2 * bw + 1;
        let a = &self.m.data;
        let mut x = b.to_vec();
        // U^T y = b
        for p in 0..n {
            x[p] /= a[p * w + bw];
            let xp = x[p];
            if xp == 0.0 {
                continue;
            }
            let hi = (p + bw).min(n - 1);
            let row = &a[p * w + bw + 1..p * w + bw + 1 + (hi - p)];
            for (v, u) in x[p + 1..=hi].iter_mut().zip(row) {
                *v -= u * xp;
            }
        }
        // L^T x = y
        for p in (0..n).rev() {
            let hi = (p + bw).min(n - 1);
            let mut s = 0.0;
            for r in p + 1..=hi {
                s += a[r * w + bw + p - r] * x[r];
            }
            x[p] -= s;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseStream;

    fn random_dd(n: usize, bw: usize, seed: u64) -> BandMatrix {
        let mut s = NoiseStream::new(seed, 0);
        let mut m = BandMatrix::zeros(n, bw);
        for r in 0..n {
            let mut off = 0.0;
            for c in r.saturating_sub(bw)..=(r + bw).min(n - 1) {
                if c != r && s.uniform() < 0.6 {
                    let v = -s.uniform();
                    m.set(r, c, v);
                    off += v.abs();
                }
            }
            m.set(r, r, off + 0.1 + s.uniform());
        }
        m
    }

    #[test]
    fn solves_and_transposed_solves() {
        let (n, bw) = (60, 7);
        let m = random_dd(n, bw, 4);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.mul(&x);
        // transpose product
        let mut bt = vec![0.0; n];
        for r in 0..n {
            for c in r.saturating_sub(bw)..=(r + bw).min(n - 1) {
                bt[c] += m.get(r, c) * x[r];
            }
        }
        let lu = m.clone().factor().unwrap();
        let y = lu.solve(&b);
        let yt = lu.solve_transpose(&bt);
        for i in 0..n {
            assert!((y[i] - x[i]).abs() < 1e-12);
            assert!((yt[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut m = BandMatrix::zeros(3, 1);
        m.set(0, 0, 1.0);
        m.set(2, 2, 1.0);
        assert!(matches!(m.factor(), Err(Error::Singular(1))));
    }
}
