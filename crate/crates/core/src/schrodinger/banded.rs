use crate::{Error, Result, C64};

/// Square band matrix with equal lower and upper half-bandwidth, factored in
/// place by Doolittle elimination without pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    size: usize,
    half: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(size: usize, half: usize) -> Self {
        Self { size, half, data: vec![C64::from(0.0); size * (2 * half + 1)] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.half >= i && j <= i + self.half);
        i * (2 * self.half + 1) + j + self.half - i
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[self.at(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        (0..self.size)
            .map(|i| {
                let lo = i.saturating_sub(self.half);
                let hi = (i + self.half).min(self.size - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// `LU` factorisation; fails on a vanishing pivot.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, b) = (self.size, self.half);
        let w = 2 * b + 1;
        for k in 0..n {
            let pivot = self.get(k, k);
            if pivot.norm() < 1e-300 {
                return Err(Error::LinearSolve(format!("zero pivot at row {k}")));
            }
            let inv = pivot.inv();
            let end = (k + b).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            // Row k, columns k+1..=end.
            let urow = &head[k * w + b + 1..k * w + b + 1 + (end - k)];
            for i in k + 1..=end {
                // Position of (i, k) inside `tail`.
                let at = (i - k - 1) * w + b + k - i;
                let l = tail[at] * inv;
                tail[at] = l;
                if l == C64::from(0.0) {
                    continue;
                }
                let row = &mut tail[at + 1..at + 1 + (end - k)];
                for (r, u) in row.iter_mut().zip(urow) {
                    *r -= l * u;
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn solve(&self, rhs: &mut [C64]) {
        let (n, b) = (self.m.size, self.m.half);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = rhs[i];
            for j in lo..i {
                s -= self.m.get(i, j) * rhs[j];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut s = rhs[i];
            for j in i + 1..=hi {
                s -= self.m.get(i, j) * rhs[j];
            }
            rhs[i] = s / self.m.get(i, i);
        }
    }
}
