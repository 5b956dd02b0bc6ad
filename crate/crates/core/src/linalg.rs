//! Dense matrices over the rationals: products, row reduction, solving, kernels.
//!
//! Row reduction uses a fixed column order and sets free variables to zero, so
//! every solve is reproducible.

use crate::rational::{one, zero, Q};
use num_traits::{One, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Q>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| crate::rational::fmt_q(self.get(r, c))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Mat {
        Mat::from_rows(rows.iter().map(|r| r.iter().map(|&x| crate::rational::q(x)).collect()).collect())
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &Q {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Q) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut Q {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Q] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..self.cols).all(|c| if r == c { self.get(r, c).is_one() } else { self.get(r, c).is_zero() }))
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn scale(&self, s: &Q) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, &Q)> {
        let c = self.cols;
        self.data.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(move |(i, x)| (i / c, i % c, x))
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Mat {
        let mut m = Mat::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(i, j, self.get(r, c).clone());
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let mut acc = zero();
                for c in 0..self.cols {
                    let a = self.get(r, c);
                    if !a.is_zero() && !v[c].is_zero() {
                        acc += a * &v[c];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn column(&self, c: usize) -> Vec<Q> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn rank(&self) -> usize {
        Rref::new(self).rank()
    }

    /// Inverse by row reduction; `None` when singular.
    pub fn inverse(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Mat::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, n + r, one());
        }
        let red = Rref::new(&aug);
        if red.pivots.len() < n || red.pivots[n - 1] >= n {
            return None;
        }
        let mut inv = Mat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                inv.set(r, c, red.m.get(r, n + c).clone());
            }
        }
        Some(inv)
    }

    /// Basis of the right kernel, one vector per free column.
    pub fn kernel(&self) -> Vec<Vec<Q>> {
        let red = Rref::new(self);
        let free: Vec<usize> = (0..self.cols).filter(|c| !red.pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![zero(); self.cols];
                v[f] = one();
                for (i, &p) in red.pivots.iter().enumerate() {
                    v[p] = -red.m.get(i, f).clone();
                }
                v
            })
            .collect()
    }
}

impl<'a> Mul<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn mul(self, o: &'a Mat) -> Mat {
        assert_eq!(self.cols, o.rows, "dimension mismatch in product");
        let mut m = Mat::zeros(self.rows, o.cols);
        for r in 0..self.rows {
            for s in 0..self.cols {
                let a = self.get(r, s);
                if a.is_zero() {
                    continue;
                }
                for c in 0..o.cols {
                    let b = o.get(s, c);
                    if !b.is_zero() {
                        *m.get_mut(r, c) += a * b;
                    }
                }
            }
        }
        m
    }
}

impl<'a> Add<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn add(self, o: &'a Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn sub(self, o: &'a Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Neg for &'a Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| -a).collect() }
    }
}

/// Reduced row echelon form together with its pivot columns.
pub struct Rref {
    pub m: Mat,
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn new(a: &Mat) -> Rref {
        let mut m = a.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else { continue };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = one() / m.get(r, c).clone();
            for j in c..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r || m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c).clone();
                for j in c..m.cols {
                    let pv = m.get(r, j);
                    if !pv.is_zero() {
                        let v = m.get(i, j) - &f * pv;
                        m.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        Rref { m, pivots }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// A row combination `y` with `y A = 0` and `y b != 0`, proving `A x = b` has no solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstruction {
    pub combination: Vec<Q>,
    pub value: Q,
}

/// Solves `A x = b`. Free variables are zero; pivots follow the column order.
pub fn solve(a: &Mat, b: &[Q]) -> Result<Vec<Q>, Obstruction> {
    assert_eq!(a.rows, b.len());
    let n = a.cols;
    let mut aug = Mat::zeros(a.rows, n + 1);
    for r in 0..a.rows {
        for c in 0..n {
            aug.set(r, c, a.get(r, c).clone());
        }
        aug.set(r, n, b[r].clone());
    }
    let red = Rref::new(&aug);
    if red.pivots.last() == Some(&n) {
        return Err(obstruction(a, b));
    }
    let mut x = vec![zero(); n];
    for (i, &p) in red.pivots.iter().enumerate() {
        x[p] = red.m.get(i, n).clone();
    }
    Ok(x)
}

fn obstruction(a: &Mat, b: &[Q]) -> Obstruction {
    // reduce [A | b | I]; the inconsistent row's identity part is the certificate
    let (m, n) = (a.rows, a.cols);
    let mut aug = Mat::zeros(m, n + 1 + m);
    for r in 0..m {
        for c in 0..n {
            aug.set(r, c, a.get(r, c).clone());
        }
        aug.set(r, n, b[r].clone());
        aug.set(r, n + 1 + r, one());
    }
    let red = Rref::new(&aug);
    let i = red.pivots.iter().position(|&p| p == n).expect("system is inconsistent");
    let combination: Vec<Q> = (0..m).map(|r| red.m.get(i, n + 1 + r).clone()).collect();
    let value = combination.iter().zip(b).fold(zero(), |acc, (y, bi)| acc + y * bi);
    Obstruction { combination, value }
}

/// A factorization reused for many right-hand sides with the same matrix.
pub struct Factored {
    cols: usize,
    pivots: Vec<usize>,
    // E with E A = rref(A)
    e: Mat,
    rank: usize,
}

impl Factored {
    pub fn new(a: &Mat) -> Factored {
        let (m, n) = (a.rows, a.cols);
        let mut aug = Mat::zeros(m, n + m);
        for r in 0..m {
            for c in 0..n {
                aug.set(r, c, a.get(r, c).clone());
            }
            aug.set(r, n + r, one());
        }
        let red = Rref::new(&aug);
        let pivots: Vec<usize> = red.pivots.iter().copied().filter(|&p| p < n).collect();
        let rank = pivots.len();
        let mut e = Mat::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                e.set(r, c, red.m.get(r, n + c).clone());
            }
        }
        Factored { cols: n, pivots, e, rank }
    }

    /// Returns `None` when the right-hand side is inconsistent.
    pub fn solve(&self, b: &[Q]) -> Option<Vec<Q>> {
        let eb = self.e.mul_vec(b);
        if eb[self.rank..].iter().any(|x| !x.is_zero()) {
            return None;
        }
        let mut x = vec![zero(); self.cols];
        for (i, &p) in self.pivots.iter().enumerate() {
            x[p] = eb[i].clone();
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qf};

    #[test]
    fn solve_and_certificate() {
        let a = Mat::from_i64(&[&[1, 2], &[2, 4]]);
        let x = solve(&a, &[q(3), q(6)]).unwrap();
        assert_eq!(x, vec![q(3), q(0)]);
        let err = solve(&a, &[q(3), q(5)]).unwrap_err();
        let ya: Vec<Q> = (0..2).map(|c| &err.combination[0] * a.get(0, c) + &err.combination[1] * a.get(1, c)).collect();
        assert!(ya.iter().all(|v| v.is_zero()));
        assert!(!err.value.is_zero());
    }

    #[test]
    fn inverse_and_kernel() {
        let a = Mat::from_i64(&[&[2, 1], &[1, 1]]);
        let inv = a.inverse().unwrap();
        assert!((&a * &inv).is_identity());
        let s = Mat::from_i64(&[&[1, 1, 0], &[0, 0, 1]]);
        let k = s.kernel();
        assert_eq!(k.len(), 1);
        assert_eq!(s.mul_vec(&k[0]), vec![q(0), q(0)]);
        assert!(Mat::from_i64(&[&[1, 1], &[1, 1]]).inverse().is_none());
        let f = Factored::new(&a);
        assert_eq!(f.solve(&[q(1), q(0)]).unwrap(), vec![q(1), q(-1)]);
        assert_eq!(Mat::from_i64(&[&[3]]).inverse().unwrap().get(0, 0), &qf(1, 3));
    }
}
