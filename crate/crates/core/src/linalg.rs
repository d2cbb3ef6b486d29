//! Dense exact linear algebra over a [`Scalar`] field.

use crate::scalar::Scalar;

/// Solve `A x = b` for several right-hand sides at once by Gauss-Jordan
/// elimination. Pivots are chosen as the first nonzero entry in row order, so
/// results are deterministic. Free variables are set to zero. Entry `k` of
/// the result is `None` when the k-th system is inconsistent.
pub fn solve_multi<C: Scalar>(a: &[Vec<C>], rhs: &[Vec<C>]) -> Vec<Option<Vec<C>>> {
    let rows = a.len();
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let nrhs = rhs.len();
    // augmented rows: [A | b_1 … b_k]
    let mut m: Vec<Vec<C>> = (0..rows)
        .map(|r| {
            let mut row = a[r].clone();
            row.extend(rhs.iter().map(|b| b[r].clone()));
            row
        })
        .collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].inv().expect("pivot is nonzero");
        for x in m[r].iter_mut().skip(c) {
            if !x.is_zero() {
                *x = x.mul_ref(&inv);
            }
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row).skip(c) {
                if !y.is_zero() {
                    *x = x.sub_ref(&f.mul_ref(y));
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (0..nrhs)
        .map(|k| {
            let col = cols + k;
            if m[r..].iter().any(|row| !row[col].is_zero()) {
                return None;
            }
            let mut x = vec![C::zero(); cols];
            for (i, &c) in pivots.iter().enumerate() {
                x[c] = m[i][col].clone();
            }
            Some(x)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn solves_and_detects_inconsistency() {
        let a = vec![vec![q(1), q(1)], vec![q(1), q(-1)], vec![q(2), q(0)]];
        let b1 = vec![q(3), q(1), q(4)];
        let b2 = vec![q(3), q(1), q(5)];
        let sols = solve_multi(&a, &[b1, b2]);
        assert_eq!(sols[0], Some(vec![q(2), q(1)]));
        assert!(sols[1].is_none());
    }

    #[test]
    fn underdetermined_sets_free_variables_to_zero() {
        let a = vec![vec![q(1), q(2), q(3)]];
        let sols = solve_multi(&a, &[vec![q(6)]]);
        assert_eq!(sols[0], Some(vec![q(6), q(0), q(0)]));
    }
}
