//! Exact linear algebra: sparse fraction-free rank over the integers and
//! small dense rational helpers for polyhedral computations.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::Q;

/// Sparse integer row: strictly increasing column indices, nonzero entries.
pub type IntRow = Vec<(usize, BigInt)>;

fn content_normalize(row: &mut IntRow) {
    let mut g = BigInt::zero();
    for (_, x) in row.iter() {
        g = g.gcd(x);
        if g.is_one() {
            break;
        }
    }
    if g.is_zero() {
        return;
    }
    if row[0].1.is_negative() {
        g = -g;
    }
    if !g.is_one() {
        for (_, x) in row.iter_mut() {
            *x /= &g;
        }
    }
}

/// Clears denominators of a rational sparse row.
pub fn integer_row(row: &[(usize, Q)]) -> IntRow {
    let mut l = BigInt::one();
    for (_, x) in row {
        l = l.lcm(x.denom());
    }
    let mut out: IntRow = row
        .iter()
        .filter(|(_, x)| !x.is_zero())
        .map(|(c, x)| (*c, x.numer() * (&l / x.denom())))
        .collect();
    out.sort_by_key(|(c, _)| *c);
    out
}

/// `a * r - b * p` on sparse rows.
fn combine(a: &BigInt, r: &IntRow, b: &BigInt, p: &IntRow) -> IntRow {
    let mut out = Vec::with_capacity(r.len() + p.len());
    let (mut i, mut j) = (0, 0);
    while i < r.len() || j < p.len() {
        let take_r = j >= p.len() || (i < r.len() && r[i].0 < p[j].0);
        let take_p = i >= r.len() || (j < p.len() && p[j].0 < r[i].0);
        if take_r {
            out.push((r[i].0, a * &r[i].1));
            i += 1;
        } else if take_p {
            out.push((p[j].0, -(b * &p[j].1)));
            j += 1;
        } else {
            let v = a * &r[i].1 - b * &p[j].1;
            if !v.is_zero() {
                out.push((r[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Row echelon form built incrementally; pivots keyed by leading column.
#[derive(Default)]
pub struct Echelon {
    pivots: BTreeMap<usize, IntRow>,
}

impl Echelon {
    pub fn new() -> Self {
        Echelon::default()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Inserts a row; returns true when it was independent of the previous ones.
    pub fn insert(&mut self, mut row: IntRow) -> bool {
        row.retain(|(_, x)| !x.is_zero());
        loop {
            let Some(&(lead, _)) = row.first() else {
                return false;
            };
            match self.pivots.get(&lead) {
                None => {
                    content_normalize(&mut row);
                    self.pivots.insert(lead, row);
                    return true;
                }
                Some(p) => {
                    let pl = &p[0].1;
                    let rl = &row[0].1;
                    let g = pl.gcd(rl);
                    let a = pl / &g;
                    let b = rl / &g;
                    row = combine(&a, &row, &b, p);
                    if row.iter().any(|(_, x)| x.bits() > 192) {
                        content_normalize(&mut row);
                    }
                }
            }
        }
    }
}

/// Integer basis of `{x : Σ x_i c_i = 0}` for sparse columns `c_i` with
/// row indices below `nrows`. Vectors are indexed by column.
pub fn sparse_kernel(columns: &[Vec<(usize, Q)>], nrows: usize) -> Vec<IntRow> {
    let mut e = Echelon::new();
    for (i, c) in columns.iter().enumerate() {
        let mut scale = BigInt::one();
        for (_, x) in c {
            scale = scale.lcm(x.denom());
        }
        let mut row = integer_row(c);
        row.push((nrows + i, scale));
        e.insert(row);
    }
    e.pivots
        .range(nrows..)
        .map(|(_, r)| r.iter().map(|(c, x)| (c - nrows, x.clone())).collect())
        .collect()
}

/// Exact rank of a sparse rational matrix given by rows.
pub fn sparse_rank(rows: &[Vec<(usize, Q)>]) -> usize {
    let mut e = Echelon::new();
    for r in rows {
        e.insert(integer_row(r));
    }
    e.rank()
}

/// Transposes a sparse matrix given by columns into rows.
pub fn columns_to_rows(columns: &[Vec<(usize, Q)>], nrows: usize) -> Vec<Vec<(usize, Q)>> {
    let mut rows: Vec<Vec<(usize, Q)>> = vec![Vec::new(); nrows];
    for (c, col) in columns.iter().enumerate() {
        for (r, x) in col {
            rows[*r].push((c, x.clone()));
        }
    }
    rows
}

/// Rank of a dense rational matrix.
pub fn rank_dense(m: &[Vec<Q>]) -> usize {
    let rows: Vec<Vec<(usize, Q)>> = m
        .iter()
        .map(|r| r.iter().cloned().enumerate().filter(|(_, x)| !x.is_zero()).collect())
        .collect();
    sparse_rank(&rows)
}

/// Reduced row echelon form of a dense rational matrix; returns pivot columns.
pub fn rref(m: &mut [Vec<Q>]) -> Vec<usize> {
    let nrows = m.len();
    let ncols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Q::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..nrows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for k in 0..ncols {
                    let sub = &f * &m[r][k];
                    m[i][k] -= sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Solves `A x = b` (A given by rows); `None` if inconsistent. Free variables are set to zero.
pub fn solve(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let ncols = a.first().map_or(0, Vec::len);
    let mut aug: Vec<Vec<Q>> = a
        .iter()
        .zip(b)
        .map(|(row, x)| {
            let mut r = row.clone();
            r.push(x.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.contains(&ncols) {
        return None;
    }
    let mut x = vec![Q::zero(); ncols];
    for (r, c) in pivots.iter().enumerate() {
        x[*c] = aug[r][ncols].clone();
    }
    Some(x)
}

/// Inverse of a square rational matrix.
pub fn inverse(a: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = a.len();
    let mut aug: Vec<Vec<Q>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Basis of the right null space `{x : A x = 0}`.
pub fn nullspace(a: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let mut m: Vec<Vec<Q>> = a.to_vec();
    let pivots = rref(&mut m);
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut x = vec![Q::zero(); ncols];
        x[free] = Q::one();
        for (r, c) in pivots.iter().enumerate() {
            x[*c] = -m[r][free].clone();
        }
        out.push(x);
    }
    out
}

/// Determinant of a small integer matrix by Bareiss elimination.
pub fn det_i64(m: &[Vec<i64>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|x| BigInt::from(*x)).collect()).collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, q_frac};

    #[test]
    fn sparse_rank_small() {
        let rows = vec![
            vec![(0, q(1)), (1, q(2))],
            vec![(0, q(2)), (1, q(4))],
            vec![(1, q_frac(1, 3)), (2, q(5))],
        ];
        assert_eq!(sparse_rank(&rows), 2);
        assert_eq!(sparse_rank(&[]), 0);
    }

    #[test]
    fn sparse_kernel_small() {
        let cols = vec![vec![(0, q(1)), (1, q(2))], vec![(0, q_frac(1, 2)), (1, q(1))], vec![(2, q(3))]];
        let k = sparse_kernel(&cols, 3);
        assert_eq!(k.len(), 1);
        let v = &k[0];
        assert_eq!((v[0].0, v[1].0), (0, 1));
        assert!((&v[0].1 * BigInt::from(2) + &v[1].1).is_zero());
        assert!(!v[0].1.is_zero());
    }

    #[test]
    fn dense_helpers() {
        let a = vec![vec![q(2), q(1)], vec![q(1), q(1)]];
        let inv = inverse(&a).unwrap();
        assert_eq!(inv, vec![vec![q(1), q(-1)], vec![q(-1), q(2)]]);
        assert_eq!(solve(&a, &[q(3), q(2)]).unwrap(), vec![q(1), q(1)]);
        let singular = vec![vec![q(1), q(2)], vec![q(2), q(4)]];
        assert!(inverse(&singular).is_none());
        assert_eq!(nullspace(&singular, 2), vec![vec![q(-2), q(1)]]);
        assert_eq!(det_i64(&[vec![1, 0], vec![1, 2]]), BigInt::from(2));
        assert_eq!(det_i64(&[vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1]]), BigInt::from(-1));
    }
}
