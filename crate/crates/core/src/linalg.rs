//! Small dense linear solves used by exact evaluation oracles and Newton steps.

use crate::scalar::Scalar;

/// Solves `A X = B` in place by Gaussian elimination with partial pivoting.
///
/// `a` is `n x n` row-major, `b` is `n x m` row-major. On success `b` holds X.
/// Returns `None` when a pivot falls below `1e-300` (numerically singular).
pub fn solve_in_place<F: Scalar>(a: &mut [F], n: usize, b: &mut [F], m: usize) -> Option<()> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * m);
    let tiny = F::min_positive_value().max(F::lit(1e-300));
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if !(best > tiny) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            for k in 0..m {
                b.swap(col * m + k, pivot * m + k);
            }
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == F::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= factor * v;
            }
            for k in 0..m {
                let v = b[col * m + k];
                b[row * m + k] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let diag = a[col * n + col];
        for k in 0..m {
            let mut acc = b[col * m + k];
            for j in col + 1..n {
                acc -= a[col * n + j] * b[j * m + k];
            }
            b[col * m + k] = acc / diag;
        }
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // [[2,1],[1,3]] x = [3,5] -> x = [0.8, 1.4]
        let mut a = vec![2.0_f64, 1.0, 1.0, 3.0];
        let mut b = vec![3.0, 5.0];
        solve_in_place(&mut a, 2, &mut b, 1).unwrap();
        assert!((b[0] - 0.8).abs() < 1e-14 && (b[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn needs_pivoting() {
        let mut a = vec![0.0_f64, 1.0, 1.0, 0.0];
        let mut b = vec![2.0, 7.0, 1.0, 3.0];
        solve_in_place(&mut a, 2, &mut b, 2).unwrap();
        assert_eq!(b, vec![1.0, 3.0, 2.0, 7.0]);
    }

    #[test]
    fn singular_is_reported() {
        let mut a = vec![1.0_f64, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_in_place(&mut a, 2, &mut b, 1).is_none());
    }
}
