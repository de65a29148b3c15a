//! Weighted norms and a banded Cholesky solver.

use crate::{Error, Result};

/// Weighted inner product `Σ wᵢ xᵢ yᵢ`.
pub fn wdot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum()
}

/// Weighted Euclidean norm.
pub fn wnorm(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(w, a)| w * a * a).sum::<f64>().sqrt()
}

/// Weighted Euclidean distance.
pub fn wdist(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter()
        .zip(x)
        .zip(y)
        .map(|((w, a), b)| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Weighted `L^r` norm `(Σ wᵢ |xᵢ|^r)^{1/r}`; `r = ∞` gives the max over
/// positively weighted entries.
pub fn wlr_norm(w: &[f64], x: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return w
            .iter()
            .zip(x)
            .filter(|(w, _)| **w > 0.0)
            .map(|(_, a)| a.abs())
            .fold(0.0, f64::max);
    }
    w.iter()
        .zip(x)
        .map(|(w, a)| w * a.abs().powf(r))
        .sum::<f64>()
        .powf(1.0 / r)
}

/// Cholesky factor of a symmetric positive definite band matrix.
///
/// Row `i` stores the entries `L[i][j]` for `j ∈ [i − bw, i]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factor the matrix whose lower band entries are produced by `entry(i, j)`
    /// for `i − bw ≤ j ≤ i`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let bw = bw.min(n.saturating_sub(1));
        let stride = bw + 1;
        let mut l = vec![0.0; n * stride];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = entry(i, j);
                let kl = lo.max(j.saturating_sub(bw));
                for k in kl..j {
                    sum -= l[i * stride + k + bw - i] * l[j * stride + k + bw - j];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Singular(format!(
                            "matrix is not positive definite at pivot {i}"
                        )));
                    }
                    l[i * stride + bw] = sum.sqrt();
                } else {
                    l[i * stride + j + bw - i] = sum / l[j * stride + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    /// Factor a dense row-major symmetric matrix, detecting its bandwidth.
    pub fn from_dense(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: a.len() });
        }
        let bw = bandwidth(a, n);
        Self::factor(n, bw, |i, j| a[i * n + j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Overwrite `b` with the solution of `L Lᵀ x = b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, stride) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * stride + k + bw - i] * b[k];
            }
            b[i] = s / self.l[i * stride + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= self.l[k * stride + i + bw - k] * b[k];
            }
            b[i] = s / self.l[i * stride + bw];
        }
    }
}

/// Largest `|i − j|` over the nonzero entries of a dense row-major matrix.
pub fn bandwidth(a: &[f64], n: usize) -> usize {
    let mut bw = 0;
    for i in 0..n {
        for j in 0..n {
            if a[i * n + j] != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}
