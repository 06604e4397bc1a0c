//! Exact linear algebra over ℚ: reduced row echelon form, kernels, solves.

use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::rational::Q;

pub type Matrix = Vec<Vec<Q>>;

/// Reduces `m` in place to reduced row echelon form; returns the pivot columns.
pub fn rref(m: &mut Matrix) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Q::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..cols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &Matrix) -> usize {
    rref(&mut m.clone()).len()
}

/// A basis of `{v : m v = 0}`, one vector per free column.
pub fn kernel(m: &Matrix, cols: usize) -> Vec<Vec<Q>> {
    let mut a = m.clone();
    let pivots = rref(&mut a);
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = alloc::vec![Q::zero(); cols];
        v[free] = Q::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Solves `a x = b` column by column for square nonsingular `a`.
/// Returns `None` when `a` is singular.
pub fn solve(a: &Matrix, b: &Matrix) -> Option<Matrix> {
    let n = a.len();
    let k = b.first().map_or(0, |r| r.len());
    let mut aug: Matrix = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb.iter()).cloned().collect())
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots.iter().any(|&p| p >= n) {
        return None;
    }
    Some(aug.into_iter().map(|row| row[n..n + k].to_vec()).collect())
}

pub fn mat_vec(m: &Matrix, v: &[Q]) -> Vec<Q> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(Q::zero(), |acc, (a, b)| acc + a * b))
        .collect()
}

/// Whether `v` lies in the span of `basis`.
pub fn in_span(basis: &[Vec<Q>], v: &[Q]) -> bool {
    let mut with: Matrix = basis.to_vec();
    let r0 = rank(&with);
    with.push(v.to_vec());
    rank(&with) == r0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn kernel_of_rank_one() {
        let m = alloc::vec![alloc::vec![qi(1), qi(-1)], alloc::vec![qi(-2), qi(2)]];
        let k = kernel(&m, 2);
        assert_eq!(k, alloc::vec![alloc::vec![qi(1), qi(1)]]);
    }

    #[test]
    fn solve_two_by_two() {
        let a = alloc::vec![alloc::vec![qi(2), qi(1)], alloc::vec![qi(1), qi(3)]];
        let b = alloc::vec![alloc::vec![qi(1)], alloc::vec![qi(0)]];
        let x = solve(&a, &b).unwrap();
        assert_eq!(x, alloc::vec![alloc::vec![q(3, 5)], alloc::vec![q(-1, 5)]]);
        let singular = alloc::vec![alloc::vec![qi(1), qi(2)], alloc::vec![qi(2), qi(4)]];
        assert!(solve(&singular, &b).is_none());
    }

    #[test]
    fn span_membership() {
        let basis = alloc::vec![alloc::vec![qi(1), qi(0), qi(1)], alloc::vec![qi(0), qi(1), qi(1)]];
        assert!(in_span(&basis, &[qi(2), qi(3), qi(5)]));
        assert!(!in_span(&basis, &[qi(1), qi(1), qi(1)]));
    }
}
