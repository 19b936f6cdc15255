//! Dense matrices over exact rationals or polynomials.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::poly::Poly;
use super::rat::{common_denominator, format_rat, Rat};
use super::ExactError;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix<T> {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }
}

impl<T: fmt::Display> fmt::Display for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.data[r * self.cols + c].to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Row-scales to integers (rank, nullspace and determinant up to the
/// returned scale factor are preserved).
fn to_integer_rows(m: &Matrix<Rat>) -> (Vec<Vec<BigInt>>, BigInt) {
    let mut scale = BigInt::one();
    let rows = (0..m.rows)
        .map(|r| {
            let den = common_denominator(m.row(r));
            scale *= &den;
            m.row(r).iter().map(|x| (x * Rat::from_integer(den.clone())).to_integer()).collect()
        })
        .collect();
    (rows, scale)
}

/// Fraction-free (Bareiss) forward elimination in place. Returns the pivot
/// columns and the parity of row swaps.
fn bareiss(a: &mut [Vec<BigInt>], cols: usize) -> (Vec<usize>, bool) {
    let rows = a.len();
    let mut prev = BigInt::one();
    let mut pivots = Vec::new();
    let mut odd = false;
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        if p != r {
            a.swap(p, r);
            odd = !odd;
        }
        let (top, rest) = a.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in rest.iter_mut() {
            for j in c + 1..cols {
                let v = &pivot_row[c] * &row[j] - &row[c] * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    (pivots, odd)
}

pub fn rank(m: &Matrix<Rat>) -> usize {
    let (mut a, _) = to_integer_rows(m);
    bareiss(&mut a, m.cols).0.len()
}

/// Exact rank and a nullspace basis (one vector per free column, with a 1
/// in that column and 0 in the other free columns).
pub fn rank_nullspace(m: &Matrix<Rat>) -> (usize, Vec<Vec<Rat>>) {
    let (mut a, _) = to_integer_rows(m);
    let (pivots, _) = bareiss(&mut a, m.cols);
    let rank = pivots.len();
    let free: Vec<usize> = (0..m.cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut x = vec![Rat::zero(); m.cols];
        x[f] = Rat::one();
        for i in (0..rank).rev() {
            let p = pivots[i];
            let mut s = Rat::zero();
            for j in p + 1..m.cols {
                if !x[j].is_zero() && !a[i][j].is_zero() {
                    s += Rat::from_integer(a[i][j].clone()) * &x[j];
                }
            }
            x[p] = -s / Rat::from_integer(a[i][p].clone());
        }
        basis.push(x);
    }
    (rank, basis)
}

/// Reduced row echelon form over the rationals, with pivot columns.
/// The nonzero rows form the canonical basis of the row space.
pub fn rref(m: &Matrix<Rat>) -> (Matrix<Rat>, Vec<usize>) {
    let mut a: Vec<Vec<Rat>> = (0..m.rows).map(|r| m.row(r).to_vec()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..m.cols {
        if r == m.rows {
            break;
        }
        let Some(p) = (r..m.rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(p, r);
        let inv = Rat::one() / &a[r][c];
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (Matrix::from_rows(a), pivots)
}

/// Anything with an exact determinant.
pub trait Determinant: Clone {
    fn det(m: &Matrix<Self>) -> Self;
}

impl Determinant for Rat {
    /// Bareiss elimination on the integer-scaled matrix.
    fn det(m: &Matrix<Rat>) -> Rat {
        assert_eq!(m.rows, m.cols, "determinant of a non-square matrix");
        if m.rows == 0 {
            return Rat::one();
        }
        let (mut a, scale) = to_integer_rows(m);
        let (pivots, odd) = bareiss(&mut a, m.cols);
        if pivots.len() < m.rows {
            return Rat::zero();
        }
        let d = Rat::new(a[m.rows - 1][m.cols - 1].clone(), scale);
        if odd {
            -d
        } else {
            d
        }
    }
}

impl Determinant for Poly {
    /// Laplace expansion along the first row.
    fn det(m: &Matrix<Poly>) -> Poly {
        assert_eq!(m.rows, m.cols, "determinant of a non-square matrix");
        fn rec(m: &Matrix<Poly>, rows: &[usize], cols: &[usize]) -> Poly {
            match rows.len() {
                0 => Poly::one(),
                1 => m.get(rows[0], cols[0]).clone(),
                _ => {
                    let mut acc = Poly::zero();
                    for (k, &c) in cols.iter().enumerate() {
                        let entry = m.get(rows[0], c);
                        if entry.is_zero() {
                            continue;
                        }
                        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                        let t = entry * &rec(m, &rows[1..], &rest);
                        if k % 2 == 0 {
                            acc += &t;
                        } else {
                            acc -= &t;
                        }
                    }
                    acc
                }
            }
        }
        let rows: Vec<usize> = (0..m.rows).collect();
        rec(m, &rows, &rows)
    }
}

/// All `t`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(t);
    fn rec(start: usize, n: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < t - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, t, cur, out);
            cur.pop();
        }
    }
    rec(0, n, t, &mut cur, &mut out);
    out
}

/// All `t`×`t` minors, ordered lexicographically by (row set, column set).
pub fn minors<T: Determinant>(m: &Matrix<T>, t: usize) -> Result<Vec<T>, ExactError> {
    if t == 0 || t > m.rows.min(m.cols) {
        return Err(ExactError::MinorSize { t, rows: m.rows, cols: m.cols });
    }
    let row_sets = combinations(m.rows, t);
    let col_sets = combinations(m.cols, t);
    let mut out = Vec::with_capacity(row_sets.len() * col_sets.len());
    for rs in &row_sets {
        for cs in &col_sets {
            out.push(T::det(&m.submatrix(rs, cs)));
        }
    }
    Ok(out)
}

pub fn format_rat_matrix(m: &Matrix<Rat>) -> String {
    let mut s = String::new();
    for r in 0..m.rows {
        let row: Vec<String> = m.row(r).iter().map(format_rat).collect();
        s.push_str(&format!("[{}]\n", row.join(", ")));
    }
    s
}

/// Whether every entry is zero.
pub fn is_zero_matrix(m: &Matrix<Rat>) -> bool {
    m.data.iter().all(|x| x.is_zero())
}

/// Largest absolute entry, used for degeneracy checks.
pub fn max_abs(m: &Matrix<Rat>) -> Rat {
    m.data.iter().map(|x| x.abs()).max().unwrap_or_else(Rat::zero)
}
