//! Exact linear algebra over the rationals for the desk-scale homology and
//! chain-map computations, plus small integer matrices.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Dense integer matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        IntMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..self.cols).all(|j| self[(i, j)] == i64::from(i == j)))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// self * other (checked dimensions).
    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matrix product");
        let mut out = IntMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn to_rational_rows(&self) -> Vec<Vec<BigRational>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| BigRational::from_integer(BigInt::from(self[(i, j)]))).collect())
            .collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)]).collect()).collect()
    }
}

impl std::ops::Index<(usize, usize)> for IntMat {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Reduced row echelon form in place; returns the pivot column indices.
pub fn rref(m: &mut Vec<Vec<BigRational>>) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r >= rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].clone();
        for v in m[r].iter_mut() {
            *v = &*v / &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let factor = m[i][c].clone();
                for j in 0..cols {
                    let sub = &factor * &m[r][j];
                    m[i][j] = &m[i][j] - &sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

pub fn rank_int(m: &IntMat) -> usize {
    rank(&m.to_rational_rows())
}

/// Basis of the null space of the linear map with matrix `m` (rows are output
/// coordinates, columns input coordinates).
pub fn kernel_basis(m: &IntMat) -> Vec<Vec<BigRational>> {
    let cols = m.cols;
    let mut rr = m.to_rational_rows();
    let pivots = rref(&mut rr);
    let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::one();
        for (row_idx, &pc) in pivots.iter().enumerate() {
            v[pc] = -rr[row_idx][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Basis of the column space, as column vectors.
pub fn image_basis(m: &IntMat) -> Vec<Vec<BigRational>> {
    let mut rr = m.to_rational_rows();
    let pivots = {
        // rref of the transpose finds independent columns directly; simpler:
        // run rref on a copy and keep the pivot columns of the original.
        let mut copy = rr.clone();
        rref(&mut copy)
    };
    let _ = &mut rr;
    pivots
        .iter()
        .map(|&c| (0..m.rows).map(|r| BigRational::from_integer(BigInt::from(m[(r, c)]))).collect())
        .collect()
}

/// Span membership: is v in the row span of `basis`?
pub fn in_span(basis: &[Vec<BigRational>], v: &[BigRational]) -> bool {
    if basis.is_empty() {
        return v.iter().all(|x| x.is_zero());
    }
    let mut m: Vec<Vec<BigRational>> = basis.to_vec();
    let r0 = rref(&mut m).len();
    let mut with: Vec<Vec<BigRational>> = basis.to_vec();
    with.push(v.to_vec());
    let r1 = rref(&mut with).len();
    r0 == r1
}

/// span(a) == span(b) as subspaces of the common ambient space.
pub fn same_span(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> bool {
    a.iter().all(|v| in_span(b, v)) && b.iter().all(|v| in_span(a, v))
}

/// span(inner) is a subspace of span(outer).
pub fn subspace_of(inner: &[Vec<BigRational>], outer: &[Vec<BigRational>]) -> bool {
    inner.iter().all(|v| in_span(outer, v))
}

/// Dimension of span(a) + span(b).
pub fn sum_dim(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> usize {
    let mut all: Vec<Vec<BigRational>> = a.to_vec();
    all.extend(b.iter().cloned());
    rank(&all)
}

/// Checks span(a) ⊕ span(b) == span(c): the sum is direct and equals c.
pub fn is_direct_sum(a: &[Vec<BigRational>], b: &[Vec<BigRational>], c: &[Vec<BigRational>]) -> bool {
    let da = rank(a);
    let db = rank(b);
    let mut all: Vec<Vec<BigRational>> = a.to_vec();
    all.extend(b.iter().cloned());
    let dsum = rank(&all);
    dsum == da + db && same_span(&all, c)
}

pub fn int_vec_to_rational(v: &[i64]) -> Vec<BigRational> {
    v.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    #[test]
    fn kernel_of_simple_map() {
        // map (x,y,z) -> (x+y+z): kernel is 2-dimensional
        let m = IntMat::from_rows(vec![vec![1, 1, 1]]);
        let k = kernel_basis(&m);
        assert_eq!(k.len(), 2);
        for v in &k {
            let s = &v[0] + &v[1] + &v[2];
            assert!(s.is_zero());
        }
    }

    #[test]
    fn rank_and_image() {
        let m = IntMat::from_rows(vec![vec![1, 2, 3], vec![2, 4, 6], vec![0, 1, 1]]);
        assert_eq!(rank_int(&m), 2);
        let img = image_basis(&m);
        assert_eq!(img.len(), 2);
    }

    #[test]
    fn direct_sum_check() {
        let a = vec![vec![q(1), q(0), q(0)]];
        let b = vec![vec![q(0), q(1), q(1)]];
        let c = vec![vec![q(1), q(0), q(0)], vec![q(1), q(1), q(1)]];
        assert!(is_direct_sum(&a, &b, &c));
        let overlapping = vec![vec![q(1), q(0), q(0)]];
        assert!(!is_direct_sum(&a, &overlapping, &c));
    }

    #[test]
    fn matrix_product_and_identity() {
        let a = IntMat::from_rows(vec![vec![1, 0], vec![-1, 1]]);
        let b = IntMat::from_rows(vec![vec![1, 0], vec![1, 1]]);
        assert!(a.mul(&b).is_identity());
    }
}
