//! Dense row-major linear algebra for the tiny systems that show up here
//! (normal equations with at most a handful of parameters, the 4×4 level
//! generator).

use crate::scalar::Scalar;

/// Solves `a · x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is `n×n` row-major. Returns `None` when a pivot falls below
/// `rel_tol · max|a|`.
pub fn solve<T: Scalar>(a: &[T], b: &[T], n: usize, rel_tol: T) -> Option<Vec<T>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val <= rel_tol * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[col * n + k];
                m[r * n + k] = m[r * n + k] - f * v;
            }
            x[r] = x[r] - f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for k in (r + 1)..n {
            s = s - m[r * n + k] * x[k];
        }
        x[r] = s / m[r * n + r];
    }
    Some(x)
}

/// Inverse of an `n×n` matrix, column by column.
pub fn invert<T: Scalar>(a: &[T], n: usize, rel_tol: T) -> Option<Vec<T>> {
    let mut inv = vec![T::zero(); n * n];
    let mut e = vec![T::zero(); n];
    for c in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[c] = T::one();
        let col = solve(a, &e, n, rel_tol)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3)
            .map(|r| (0..3).map(|c| a[r * 3 + c] * x_true[c]).sum())
            .collect();
        let x = solve(&a, &b, 3, 1e-14).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn needs_pivoting() {
        let a = [0.0, 1.0, 1.0, 0.0];
        let x = solve(&a, &[3.0, 4.0], 2, 1e-14).unwrap();
        assert_eq!(x, vec![4.0, 3.0]);
    }

    #[test]
    fn singular_is_none() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(solve(&a, &[1.0, 1.0], 2, 1e-12).is_none());
        assert!(solve(&[0.0; 4], &[1.0, 1.0], 2, 1e-12).is_none());
    }

    #[test]
    fn inverse_round_trip() {
        let a: [f64; 4] = [4.0, 1.0, 1.0, 3.0];
        let inv = invert(&a, 2, 1e-14).unwrap();
        let prod = [
            a[0] * inv[0] + a[1] * inv[2],
            a[0] * inv[1] + a[1] * inv[3],
            a[2] * inv[0] + a[3] * inv[2],
            a[2] * inv[1] + a[3] * inv[3],
        ];
        for (p, e) in prod.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((p - e).abs() < 1e-15);
        }
    }
}
