//! Small dense helpers. Matrices are row-major `&[f64]` slices.

use alloc::vec;
use alloc::vec::Vec;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// In-place Cholesky of an `n × n` symmetric matrix. The lower factor is left
/// in the lower triangle. Returns the smallest pivot seen (before the square
/// root) and whether the factorization completed.
pub fn cholesky(a: &mut [f64], n: usize) -> (f64, bool) {
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d < min_pivot {
            min_pivot = d;
        }
        if !(d > 0.0) {
            return (d, false);
        }
        let ljj = libm::sqrt(d);
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    (min_pivot, true)
}

/// Inverse of a symmetric positive definite matrix from its Cholesky factor.
pub fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for c in 0..n {
        col.iter_mut().for_each(|x| *x = 0.0);
        col[c] = 1.0;
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[i * n + k] * col[k];
            }
            col[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * col[k];
            }
            col[i] = s / l[i * n + i];
        }
        for i in 0..n {
            inv[i * n + c] = col[i];
        }
    }
    inv
}

/// Modified Gram–Schmidt on a list of vectors. Fails when a vector's residual
/// norm drops below `tol`.
pub fn gram_schmidt(vectors: &[Vec<f64>], tol: f64) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for q in &out {
            let c = dot(&w, q);
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        let nrm = norm2(&w);
        if !(nrm > tol) {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        out.push(w);
    }
    Some(out)
}

/// Largest-magnitude eigenvalue of a symmetric operator by power iteration.
pub fn power_iteration<F>(n: usize, mut apply: F, max_iter: usize, tol: f64) -> f64
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        apply(&v, &mut w);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if !(nw > 0.0) || !nw.is_finite() {
            return if nw.is_finite() { 0.0 } else { f64::NAN };
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / nw;
        }
        let done = libm::fabs(next - lambda) <= tol * libm::fabs(next);
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cholesky_inverse_roundtrip() {
        let a = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let mut l = a.clone();
        let (_, ok) = cholesky(&mut l, 3);
        assert!(ok);
        let inv = cholesky_inverse(&l, 3);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_schmidt_rejects_dependent() {
        let v = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(gram_schmidt(&v, 1e-12).is_none());
    }

    #[test]
    fn power_iteration_diagonal() {
        let d = [1.0, 5.0, 2.0];
        let l = power_iteration(3, |x, y| {
            for i in 0..3 {
                y[i] = d[i] * x[i];
            }
        }, 500, 1e-12);
        assert!((l - 5.0).abs() < 1e-8);
    }
}
