//! Banded symmetric matrices: LU solves with partial pivoting and inertia
//! counts from an unpivoted LDLᵀ factorization.
//!
//! Box Hamiltonians in lexicographic site order have half-bandwidth
//! `L^(d-1)`, so both factorizations cost `O(n b²)` instead of `O(n³)`.

use nalgebra::DMatrix;

/// Symmetric matrix stored by its upper band: `upper[i][k] = A[i][i + k]`.
#[derive(Clone, Debug)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    upper: Vec<Vec<f64>>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            upper: vec![vec![0.0; bw + 1]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw {
            0.0
        } else {
            self.upper[i][j - i]
        }
    }

    /// Sets `A[i][j] = A[j][i] = v`; panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j - i <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.upper[i][j - i] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            for j in lo..=hi {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
    }

    /// Numbers of eigenvalues `(< shift, == shift, > shift)` by Sylvester's
    /// law of inertia applied to `LDLᵀ = A - shift·I`. Exactly zero pivots
    /// are perturbed to a tiny value of the matrix scale and counted as zero.
    pub fn inertia(&self, shift: f64) -> (usize, usize, usize) {
        let n = self.n;
        let b = self.bw;
        let scale = (0..n)
            .map(|i| (0..=b).map(|k| self.upper[i][k].abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(1.0);
        let tiny = f64::EPSILON * scale * 1e-3;
        // lower[i][k] = L[i][i - b + k] for k < b
        let mut lower = vec![vec![0.0; b]; n];
        let mut diag = vec![0.0; n];
        let (mut neg, mut zero) = (0usize, 0usize);
        for j in 0..n {
            let lo = j.saturating_sub(b);
            let mut dj = self.get(j, j) - shift;
            for k in lo..j {
                let l = lower[j][k + b - j];
                dj -= l * l * diag[k];
            }
            if dj == 0.0 {
                zero += 1;
                dj = tiny;
            } else if dj < 0.0 {
                neg += 1;
            }
            diag[j] = dj;
            let hi = (j + b).min(n - 1);
            for i in (j + 1)..=hi {
                let mut v = self.get(i, j);
                let klo = i.saturating_sub(b);
                for k in klo..j {
                    v -= lower[i][k + b - i] * lower[j][k + b - j] * diag[k];
                }
                lower[i][j + b - i] = v / dj;
            }
        }
        (neg, zero, n - neg - zero)
    }

    /// Eigenvalue count in the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let pad = |x: f64| 4.0 * f64::EPSILON * x.abs().max(1.0);
        let below_hi = self.inertia(hi + pad(hi)).0;
        let below_lo = self.inertia(lo - pad(lo)).0;
        below_hi.saturating_sub(below_lo)
    }

    pub fn lu(&self, shift: f64) -> Option<BandLu> {
        BandLu::factor(self, shift)
    }
}

/// LU factorization with partial pivoting of a banded matrix `A - shift·I`.
/// Row `i` of the working array holds columns `i - b ..= i + 2b`.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    bw: usize,
    rows: Vec<Vec<f64>>,
    mult: Vec<Vec<f64>>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(bw: usize) -> usize {
        3 * bw + 1
    }

    fn at(&self, i: usize, c: usize) -> f64 {
        let off = c + self.bw - i;
        self.rows[i][off]
    }

    fn factor(a: &BandedSym, shift: f64) -> Option<BandLu> {
        let n = a.n;
        let b = a.bw;
        let w = Self::width(b);
        let mut rows = vec![vec![0.0; w]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            let lo = i.saturating_sub(b);
            let hi = (i + b).min(n - 1);
            for c in lo..=hi {
                let mut v = a.get(i, c);
                if c == i {
                    v -= shift;
                }
                row[c + b - i] = v;
            }
        }
        let mut mult = vec![vec![0.0; b]; n];
        let mut piv = vec![0usize; n];
        for j in 0..n {
            let last = (j + b).min(n - 1);
            // pivot search in column j, rows j..=last
            let mut p = j;
            let mut best = rows[j][b].abs();
            for r in (j + 1)..=last {
                let v = rows[r][j + b - r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[j] = p;
            if best == 0.0 {
                return None;
            }
            if p != j {
                // swap rows j and p over columns j ..= j + 2b, re-indexing by absolute column
                let cmax = (j + 2 * b).min(n - 1);
                for c in j..=cmax {
                    let oj = c + b - j;
                    let vj = rows[j][oj];
                    let vp = if c + b >= p && c + b - p < w { rows[p][c + b - p] } else { 0.0 };
                    rows[j][oj] = vp;
                    if c + b >= p && c + b - p < w {
                        rows[p][c + b - p] = vj;
                    } else {
                        debug_assert!(vj == 0.0);
                    }
                }
            }
            let pivot = rows[j][b];
            let cmax = (j + 2 * b).min(n - 1);
            for r in (j + 1)..=last {
                let l = rows[r][j + b - r] / pivot;
                mult[j][r - j - 1] = l;
                rows[r][j + b - r] = 0.0;
                if l != 0.0 {
                    for c in (j + 1)..=cmax {
                        let u = rows[j][c + b - j];
                        if u != 0.0 {
                            rows[r][c + b - r] -= l * u;
                        }
                    }
                }
            }
        }
        Some(BandLu {
            n,
            bw: b,
            rows,
            mult,
            piv,
        })
    }

    /// Solves `(A - shift·I) x = rhs` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        let b = self.bw;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != 0.0 {
                let last = (j + b).min(n - 1);
                for r in (j + 1)..=last {
                    x[r] -= self.mult[j][r - j - 1] * xj;
                }
            }
        }
        for i in (0..n).rev() {
            let cmax = (i + 2 * b).min(n - 1);
            let mut acc = x[i];
            for c in (i + 1)..=cmax {
                acc -= self.at(i, c) * x[c];
            }
            x[i] = acc / self.at(i, i);
        }
    }
}
