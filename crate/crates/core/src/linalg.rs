//! Dense complex LU factorization with partial pivoting.

use crate::scalar::{cone, Cx, Real};

/// In-place LU factors of a square row-major matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<Cx<T>>,
    perm: Vec<usize>,
}

/// Returned when a pivot vanishes (relative to the matrix scale).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

impl<T: Real> Lu<T> {
    /// Factorizes the `n × n` row-major matrix `a`.
    pub fn factor(mut a: Vec<Cx<T>>, n: usize) -> Result<Self, Singular> {
        assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
        let scale = a.iter().fold(T::zero(), |m, z| m.max(z.norm()));
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].norm_sqr();
            for r in (k + 1)..n {
                let v = a[r * n + k].norm_sqr();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best.sqrt() > tiny) {
                return Err(Singular);
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let inv = cone::<T>() / a[k * n + k];
            let (top, bottom) = a.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n + k + 1..k * n + n];
            for row in bottom.chunks_exact_mut(n) {
                let f = row[k] * inv;
                row[k] = f;
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                for (x, y) in row[k + 1..].iter_mut().zip(pivot_row) {
                    *x -= f * *y;
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Cx<T>]) -> Vec<Cx<T>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<Cx<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut s = x[i];
            for (l, xj) in row.iter().zip(&x[..i]) {
                s -= *l * *xj;
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut s = x[i];
            for (u, xj) in row[i + 1..].iter().zip(&x[i + 1..]) {
                s -= *u * *xj;
            }
            x[i] = s / row[i];
        }
        x
    }
}
