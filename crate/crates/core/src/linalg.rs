//! Small dense linear algebra over either scalar mode.

use crate::scalar::Scalar;

/// Row-major dense matrix.
pub type Matrix<S> = Vec<Vec<S>>;

fn pivot_row<S: Scalar>(m: &Matrix<S>, col: usize, from: usize) -> Option<usize> {
    if S::EXACT {
        (from..m.len()).find(|&r| !m[r][col].is_zero())
    } else {
        let mut best = None;
        let mut best_abs = 0.0;
        for (r, row) in m.iter().enumerate().skip(from) {
            let a = row[col].to_f64().abs();
            if a > best_abs {
                best_abs = a;
                best = Some(r);
            }
        }
        best
    }
}

/// Determinant by Gaussian elimination.
pub fn det<S: Scalar>(m: &Matrix<S>) -> S {
    let n = m.len();
    let mut a = m.clone();
    let mut acc = S::one();
    for c in 0..n {
        let Some(p) = pivot_row(&a, c, c) else {
            return S::zero();
        };
        if a[p][c].is_zero() {
            return S::zero();
        }
        if p != c {
            a.swap(p, c);
            acc = -acc;
        }
        let piv = a[c][c].clone();
        acc = acc * piv.clone();
        for r in c + 1..n {
            if a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].clone() / piv.clone();
            for k in c..n {
                let t = a[c][k].clone() * f.clone();
                a[r][k] = a[r][k].clone() - t;
            }
        }
    }
    acc
}

/// Reduced row echelon form; returns the pivot columns.
///
/// In double mode entries below `tolerance * scale` are treated as zero.
pub fn rref<S: Scalar>(a: &mut Matrix<S>, scale: f64) -> Vec<usize> {
    let rows = a.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = a[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r >= rows {
            break;
        }
        let Some(p) = pivot_row(a, c, r) else {
            continue;
        };
        if a[p][c].is_negligible(scale) {
            continue;
        }
        a.swap(p, r);
        let piv = a[r][c].clone();
        for k in 0..cols {
            a[r][k] = a[r][k].clone() / piv.clone();
        }
        for i in 0..rows {
            if i == r || a[i][c].is_zero() {
                continue;
            }
            let f = a[i][c].clone();
            for k in 0..cols {
                let t = a[r][k].clone() * f.clone();
                a[i][k] = a[i][k].clone() - t;
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn max_abs<S: Scalar>(m: &Matrix<S>) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .map(|v| v.to_f64().abs())
        .fold(0.0, f64::max)
}

/// Rank of a matrix.
pub fn rank<S: Scalar>(m: &Matrix<S>) -> usize {
    let scale = max_abs(m);
    let mut a = m.clone();
    rref(&mut a, scale).len()
}

/// Basis of the null space `{x : m x = 0}` with `cols` unknowns.
pub fn null_space<S: Scalar>(m: &Matrix<S>, cols: usize) -> Vec<Vec<S>> {
    if m.is_empty() {
        return (0..cols)
            .map(|i| (0..cols).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
    }
    let scale = max_abs(m);
    let mut a = m.clone();
    let pivots = rref(&mut a, scale);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![S::zero(); cols];
            v[f] = S::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][f].clone();
            }
            v
        })
        .collect()
}

/// Solves `m x = b` for square invertible `m`.
pub fn solve<S: Scalar>(m: &Matrix<S>, b: &[S]) -> Option<Vec<S>> {
    let n = m.len();
    let mut aug: Matrix<S> = m
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let scale = max_abs(m);
    let pivots = rref(&mut aug, scale);
    if pivots.len() < n || pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n].clone()).collect())
}

/// Inverse of a square matrix.
pub fn inverse<S: Scalar>(m: &Matrix<S>) -> Option<Matrix<S>> {
    let n = m.len();
    let mut aug: Matrix<S> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { S::one() } else { S::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug, max_abs(m));
    if pivots.len() < n || pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn mat_vec<S: Scalar>(m: &Matrix<S>, v: &[S]) -> Vec<S> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
        })
        .collect()
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_f64(a: &[f64]) -> f64 {
    dot_f64(a, a).sqrt()
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &Matrix<f64>) -> f64 {
    m.iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Orthonormal basis of the span of `vectors` by modified Gram-Schmidt.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let scale = vectors.iter().map(|v| norm_f64(v)).fold(0.0, f64::max);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = dot_f64(&w, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= c * ei;
                }
            }
        }
        let n = norm_f64(&w);
        if n > 1e-12 * scale.max(1.0) {
            out.push(w.iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Upper-triangular `R` with `a = Rᵀ R` for symmetric positive definite `a`.
pub fn cholesky_upper(a: &Matrix<f64>) -> Option<Matrix<f64>> {
    let n = a.len();
    let mut r = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut s = a[j][j];
        for k in 0..j {
            s -= r[k][j] * r[k][j];
        }
        if s <= 0.0 || !s.is_finite() {
            return None;
        }
        r[j][j] = s.sqrt();
        for i in j + 1..n {
            let mut t = a[j][i];
            for k in 0..j {
                t -= r[k][j] * r[k][i];
            }
            r[j][i] = t / r[j][j];
        }
    }
    Some(r)
}
