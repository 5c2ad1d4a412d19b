//! Independent reference computations shared by the integration tests and
//! the acceptance target. Nothing here calls the crate's solvers.
#![allow(dead_code)]

use msa_lab::disorder::{potential, Configuration, DisorderModel};
use msa_lab::geometry::{Cube, LatticePoint};
use nalgebra::DMatrix;

/// `-Δ + V` with Dirichlet boundary, sites enumerated lexicographically.
pub fn hamiltonian(model: &DisorderModel, config: &Configuration, cube: &Cube) -> DMatrix<f64> {
    let sites = lex_sites(cube);
    let n = sites.len();
    let d = cube.dim();
    let mut h = DMatrix::zeros(n, n);
    for (i, s) in sites.iter().enumerate() {
        h[(i, i)] = 2.0 * d as f64 + potential(model, config, s);
        for (j, t) in sites.iter().enumerate() {
            let diff: i64 = s.coords().iter().zip(t.coords()).map(|(a, b)| (a - b).abs()).sum();
            if diff == 1 {
                h[(i, j)] = -1.0;
            }
        }
    }
    h
}

/// Lexicographic enumeration by brute force over the bounding box.
pub fn lex_sites(cube: &Cube) -> Vec<LatticePoint> {
    let h = cube.half_width() as i64;
    let c = cube.center().coords().to_vec();
    let mut out = vec![vec![]];
    for &ci in &c {
        let mut next = Vec::new();
        for p in &out {
            for x in (ci - h)..=(ci + h) {
                let mut q: Vec<i64> = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        out = next;
    }
    out.into_iter().map(|p| LatticePoint::new(&p)).collect()
}

pub fn sup_distance(a: &LatticePoint, b: &LatticePoint) -> u64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).unsigned_abs()).max().unwrap_or(0)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs())).unwrap();
        m.swap_rows(col, p);
        inv.swap_rows(col, p);
        let piv = m[(col, col)];
        for k in 0..n {
            m[(col, k)] /= piv;
            inv[(col, k)] /= piv;
        }
        for r in 0..n {
            if r != col {
                let f = m[(r, col)];
                if f != 0.0 {
                    for k in 0..n {
                        m[(r, k)] -= f * m[(col, k)];
                        inv[(r, k)] -= f * inv[(col, k)];
                    }
                }
            }
        }
    }
    inv
}

/// Cyclic Jacobi eigen-decomposition; eigenvalues ascending, vectors in columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

/// Largest singular value from the Jacobi eigenvalues of `BᵀB`.
pub fn spectral_norm(b: &DMatrix<f64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let g = b.transpose() * b;
    let (vals, _) = jacobi_eigen(&g);
    vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// First index of the largest absolute entry.
pub fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    best
}
