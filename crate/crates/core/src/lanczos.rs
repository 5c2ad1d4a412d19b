//! Shift-invert Lanczos for all eigenpairs of a banded symmetric matrix in a
//! closed energy window.
//!
//! The window count comes from inertia; Lanczos runs on `(A - σ)^{-1}` with
//! `σ` at the window midpoint and full reorthogonalization, restarting in the
//! orthogonal complement of already locked vectors so that degenerate
//! eigenvalues are recovered. A final Rayleigh–Ritz step on the locked basis
//! polishes residuals.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::BandedSym;
use crate::error::{Error, Result};

pub struct WindowEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

pub fn window_eigenpairs(a: &BandedSym, lo: f64, hi: f64, tol: f64) -> Result<WindowEigen> {
    let n = a.n();
    let target = a.count_in(lo, hi);
    if target == 0 {
        return Ok(WindowEigen {
            values: vec![],
            vectors: DMatrix::zeros(n, 0),
            residuals: vec![],
        });
    }
    let half = 0.5 * (hi - lo);
    let mut sigma = 0.5 * (lo + hi);
    // nudge the shift off an eigenvalue
    let mut lu = None;
    for k in 0..8 {
        if let Some(f) = a.lu(sigma) {
            lu = Some(f);
            break;
        }
        sigma += (half.max(1e-8)) * 1e-3 * (k + 1) as f64;
    }
    let lu = lu.ok_or(Error::NonConvergence { residual: f64::INFINITY })?;
    let inside = |e: f64| e >= lo - 1e-12 * lo.abs().max(1.0) && e <= hi + 1e-12 * hi.abs().max(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut worst = f64::INFINITY;
    let mut rounds = 0;
    while locked.len() < target && rounds < 4 * target + 8 {
        rounds += 1;
        let max_steps = (n - locked.len()).max(1);
        let mut steps = (2 * (target - locked.len()) + 20).min(max_steps);
        let mut found = Vec::new();
        loop {
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
            let mut alpha = Vec::with_capacity(steps);
            let mut beta: Vec<f64> = Vec::with_capacity(steps);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            orthogonalize(&mut v, &locked);
            if normalize(&mut v) == 0.0 {
                break;
            }
            for _ in 0..steps {
                let mut w = v.clone();
                lu.solve(&mut w);
                let al = dot(&w, &v);
                alpha.push(al);
                basis.push(v.clone());
                orthogonalize(&mut w, &locked);
                orthogonalize(&mut w, &basis);
                let b = normalize(&mut w);
                if b <= 1e-14 * al.abs().max(1.0) {
                    break;
                }
                beta.push(b);
                v = w;
            }
            let m = alpha.len();
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j || j + 1 == i {
                    beta[i.min(j)]
                } else {
                    0.0
                }
            });
            let eig = t.symmetric_eigen();
            found.clear();
            worst = 0.0f64;
            for (k, &theta) in eig.eigenvalues.iter().enumerate() {
                if theta == 0.0 {
                    continue;
                }
                let e = sigma + 1.0 / theta;
                if !inside(e) {
                    continue;
                }
                let mut y = vec![0.0; n];
                for (i, q) in basis.iter().enumerate() {
                    let c = eig.eigenvectors[(i, k)];
                    y.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
                }
                normalize(&mut y);
                let mut hy = vec![0.0; n];
                a.matvec(&y, &mut hy);
                let res = hy.iter().zip(&y).map(|(h, x)| (h - e * x).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(res);
                found.push((e, y, res));
            }
            let converged = found.iter().all(|f| f.2 <= tol);
            if (converged && !found.is_empty()) || steps >= max_steps || m < steps {
                break;
            }
            steps = (steps * 2).min(max_steps);
        }
        if found.is_empty() {
            break;
        }
        for (_, y, res) in found {
            if res <= tol.max(1e-8) {
                let mut y = y;
                orthogonalize(&mut y, &locked);
                if normalize(&mut y) > 0.5 {
                    locked.push(y);
                }
            }
        }
    }
    if locked.len() != target {
        return Err(Error::NonConvergence { residual: worst });
    }
    // Rayleigh–Ritz on the locked subspace
    let m = locked.len();
    let q = DMatrix::from_fn(n, m, |i, j| locked[j][i]);
    let mut hq = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut out = vec![0.0; n];
        a.matvec(&locked[j], &mut out);
        hq.set_column(j, &DVector::from_vec(out));
    }
    let small = q.transpose() * &hq;
    let small = (&small + small.transpose()) * 0.5;
    let eig = small.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let rot = &q * &eig.eigenvectors;
    let mut values = Vec::with_capacity(m);
    let mut vectors = DMatrix::zeros(n, m);
    let mut residuals = Vec::with_capacity(m);
    for (dst, &k) in order.iter().enumerate() {
        let e = eig.eigenvalues[k];
        let col = rot.column(k).into_owned();
        let mut hy = vec![0.0; n];
        a.matvec(col.as_slice(), &mut hy);
        let res = hy.iter().zip(col.iter()).map(|(h, x)| (h - e * x).powi(2)).sum::<f64>().sqrt();
        values.push(e);
        vectors.set_column(dst, &col);
        residuals.push(res);
    }
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::NonConvergence { residual: worst });
    }
    Ok(WindowEigen {
        values,
        vectors,
        residuals,
    })
}

/// Distance from `e` to the spectrum by shift-invert power iteration.
pub fn distance_to_spectrum(a: &BandedSym, e: f64) -> f64 {
    let Some(lu) = a.lu(e) else { return 0.0 };
    let n = a.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0xd157);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut est = 0.0;
    for _ in 0..200 {
        let mut w = v.clone();
        lu.solve(&mut w);
        let nrm = normalize(&mut w);
        let prev = est;
        est = nrm;
        v = w;
        if (est - prev).abs() <= 1e-13 * est {
            break;
        }
    }
    // refine with the Rayleigh quotient of the converged vector
    let mut hv = vec![0.0; n];
    a.matvec(&v, &mut hv);
    let rq = dot(&hv, &v);
    (rq - e).abs().min(1.0 / est)
}
