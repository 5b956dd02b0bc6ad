//! Matrices of polynomial forms acting on graded modules, with Koszul signs.
//!
//! Entry (r, c) of a matrix with row degrees `rd` and column degrees `cd` stands for
//! ω ⊗ E_{rc} with E_{rc} of degree rd[r] − cd[c]. Products pick up
//! (−1)^{|E_{rs}|·|η|} when ω ⊗ E_{rs} passes the form η of the right factor.

use crate::forms::PolyForm;
use crate::linalg::Mat;
use crate::rational::{one, Q};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FormMatrix {
    pub k: usize,
    pub rowdeg: Vec<i64>,
    pub coldeg: Vec<i64>,
    entries: Vec<PolyForm>,
}

impl FormMatrix {
    pub fn zero(k: usize, rowdeg: &[i64], coldeg: &[i64]) -> FormMatrix {
        FormMatrix {
            k,
            rowdeg: rowdeg.to_vec(),
            coldeg: coldeg.to_vec(),
            entries: vec![PolyForm::zero(k); rowdeg.len() * coldeg.len()],
        }
    }

    pub fn from_const(k: usize, m: &Mat, rowdeg: &[i64], coldeg: &[i64]) -> FormMatrix {
        assert_eq!((m.rows, m.cols), (rowdeg.len(), coldeg.len()));
        let mut f = FormMatrix::zero(k, rowdeg, coldeg);
        for (r, c, v) in m.nonzeros() {
            f.entries[r * coldeg.len() + c] = PolyForm::constant(k, v.clone());
        }
        f
    }

    pub fn identity(k: usize, deg: &[i64]) -> FormMatrix {
        FormMatrix::from_const(k, &Mat::identity(deg.len()), deg, deg)
    }

    pub fn rows(&self) -> usize {
        self.rowdeg.len()
    }

    pub fn cols(&self) -> usize {
        self.coldeg.len()
    }

    pub fn get(&self, r: usize, c: usize) -> &PolyForm {
        &self.entries[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, f: PolyForm) {
        assert_eq!(f.k, self.k);
        let n = self.cols();
        self.entries[r * n + c] = f;
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut PolyForm {
        let n = self.cols();
        &mut self.entries[r * n + c]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn nonzero_entries(&self) -> impl Iterator<Item = (usize, usize, &PolyForm)> {
        let n = self.cols();
        self.entries.iter().enumerate().filter(|(_, e)| !e.is_zero()).map(move |(i, e)| (i / n, i % n, e))
    }

    fn map(&self, f: impl Fn(&PolyForm) -> PolyForm, k: usize) -> FormMatrix {
        FormMatrix { k, rowdeg: self.rowdeg.clone(), coldeg: self.coldeg.clone(), entries: self.entries.iter().map(f).collect() }
    }

    pub fn add(&self, o: &FormMatrix) -> FormMatrix {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn add_assign(&mut self, o: &FormMatrix) {
        assert_eq!((self.k, &self.rowdeg, &self.coldeg), (o.k, &o.rowdeg, &o.coldeg), "shape mismatch");
        for (a, b) in self.entries.iter_mut().zip(&o.entries) {
            if !b.is_zero() {
                a.add_assign(b);
            }
        }
    }

    pub fn add_scaled(&mut self, o: &FormMatrix, s: &Q) {
        assert_eq!((self.k, &self.rowdeg, &self.coldeg), (o.k, &o.rowdeg, &o.coldeg), "shape mismatch");
        for (a, b) in self.entries.iter_mut().zip(&o.entries) {
            if !b.is_zero() {
                a.add_scaled(b, s);
            }
        }
    }

    pub fn sub(&self, o: &FormMatrix) -> FormMatrix {
        let mut r = self.clone();
        r.add_scaled(o, &-one());
        r
    }

    pub fn scale(&self, s: &Q) -> FormMatrix {
        self.map(|e| e.scale(s), self.k)
    }

    /// Koszul product.
    pub fn mul(&self, o: &FormMatrix) -> FormMatrix {
        assert_eq!(self.k, o.k, "chart mismatch");
        assert_eq!(self.coldeg, o.rowdeg, "inner degrees mismatch");
        let mut r = FormMatrix::zero(self.k, &self.rowdeg, &o.coldeg);
        let n = o.cols();
        // split the right factor into even and odd form-degree parts once
        let split: Vec<(PolyForm, PolyForm)> = o
            .entries
            .iter()
            .map(|e| {
                let mut ev = PolyForm::zero(e.k);
                let mut od = PolyForm::zero(e.k);
                for ((x, m), c) in &e.terms {
                    if m.count_ones() % 2 == 0 {
                        ev.add_term(x.clone(), *m, c.clone());
                    } else {
                        od.add_term(x.clone(), *m, c.clone());
                    }
                }
                (ev, od)
            })
            .collect();
        for i in 0..self.rows() {
            for s in 0..self.cols() {
                let a = self.get(i, s);
                if a.is_zero() {
                    continue;
                }
                let odd = (self.rowdeg[i] - self.coldeg[s]).rem_euclid(2) == 1;
                for c in 0..n {
                    let (ev, od) = &split[s * n + c];
                    if ev.is_zero() && od.is_zero() {
                        continue;
                    }
                    let mut t = a.wedge(ev);
                    let w = a.wedge(od);
                    if odd {
                        t.add_scaled(&w, &-one());
                    } else {
                        t.add_assign(&w);
                    }
                    r.entries[i * n + c].add_assign(&t);
                }
            }
        }
        r
    }

    pub fn d(&self) -> FormMatrix {
        self.map(|e| e.d(), self.k)
    }

    pub fn restrict(&self, face: &[usize]) -> FormMatrix {
        self.map(|e| e.restrict(face), face.len() - 1)
    }

    pub fn restrict_facet(&self, j: usize) -> FormMatrix {
        self.map(|e| e.restrict_facet(j), self.k - 1)
    }

    pub fn vertex_map_pullback(&self, l: usize, f: &[usize]) -> FormMatrix {
        self.map(|e| e.vertex_map_pullback(l, f), l)
    }

    pub fn pullback(&self, target_k: usize, images: &[PolyForm]) -> FormMatrix {
        self.map(|e| e.pullback(target_k, images), target_k)
    }

    pub fn substitute_coeffs(&self, images: &[PolyForm]) -> FormMatrix {
        self.map(|e| e.substitute_coeffs(images), self.k)
    }

    /// Entries whose form-degree parts do not sit in total degree `total`.
    pub fn degree_violations(&self, total: i64) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (r, c, e) in self.nonzero_entries() {
            for p in e.form_degrees() {
                if p as i64 + self.rowdeg[r] - self.coldeg[c] != total {
                    out.push((r, c, p));
                }
            }
        }
        out
    }

    pub fn max_form_degree(&self) -> Option<usize> {
        self.entries.iter().flat_map(|e| e.form_degrees()).max()
    }

    /// (id + n)^{-1} by the Neumann series; `None` if it does not terminate within `limit` terms.
    pub fn unipotent_inverse(g: &FormMatrix, limit: usize) -> Option<FormMatrix> {
        let id = FormMatrix::identity(g.k, &g.rowdeg);
        let n = g.sub(&id);
        let mut term = id.clone();
        let mut acc = id;
        let neg_n = n.scale(&-one());
        for _ in 0..limit {
            term = term.mul(&neg_n);
            if term.is_zero() {
                return Some(acc);
            }
            acc.add_assign(&term);
        }
        None
    }

    /// Constant part when every entry is a constant 0-form.
    pub fn as_const(&self) -> Option<Mat> {
        let mut m = Mat::zeros(self.rows(), self.cols());
        for (r, c, e) in self.nonzero_entries() {
            if e.terms.len() != 1 {
                return None;
            }
            let ((x, mask), v) = e.terms.iter().next().unwrap();
            if *mask != 0 || x.iter().any(|&p| p != 0) {
                return None;
            }
            m.set(r, c, v.clone());
        }
        Some(m)
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_zero()).count()
    }

    pub fn entries_zero_outside(&self, allowed: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
        self.nonzero_entries().filter(|(r, c, _)| !allowed(*r, *c)).map(|(r, c, _)| (r, c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn koszul_flatness_of_gauge() {
        // g = id + x1 E_{10} on degrees (0, 0); a = E_{21} on degrees (0,0,1)
        let deg = [0, 0, 1];
        let mut g = FormMatrix::identity(1, &deg);
        g.set(1, 0, PolyForm::var(1, 1));
        let a = FormMatrix::from_const(1, &Mat::from_i64(&[&[0, 0, 0], &[0, 0, 0], &[0, 1, 0]]), &deg, &deg);
        let gi = FormMatrix::unipotent_inverse(&g, 5).unwrap();
        assert_eq!(gi.mul(&g), FormMatrix::identity(1, &deg));
        let b = gi.mul(&g.d()).add(&gi.mul(&a).mul(&g));
        let curv = b.d().add(&b.mul(&b));
        assert!(curv.is_zero());
        assert!(b.degree_violations(1).is_empty());
    }

    #[test]
    fn odd_sign() {
        // E of degree 1 passing dx1 flips the sign
        let deg = [0, 1];
        let mut a = FormMatrix::zero(1, &deg, &deg);
        a.set(1, 0, PolyForm::constant(1, q(1)));
        let mut b = FormMatrix::zero(1, &deg, &deg);
        b.set(0, 0, PolyForm::dvar(1, 1));
        assert_eq!(a.mul(&b).get(1, 0), &PolyForm::dvar(1, 1).neg());
        assert_eq!(b.mul(&a).get(1, 0), &PolyForm::zero(1));
    }
}
