//! Combinatorial flat superconnections: coefficients a(σ), flatness residuals,
//! the signed CW boundary, extension by exact solving, Igusa conversion,
//! monomial checks, homology and edge holonomy.

use crate::linalg::{solve, Mat, Obstruction};
use crate::morse::LeafSystem;
use crate::rational::{fmt_q, one, q, sign, Q};
use crate::simplex::{BaseComplex, Simplex};
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatError {
    #[error("no coefficient on face {0}")]
    MissingFaceData(Simplex),
    #[error("no solution for a({simplex}); obstruction value {}", fmt_q(&.certificate.value))]
    Infeasible { simplex: Simplex, certificate: Obstruction },
    #[error("d does not square to zero")]
    NotADifferential,
    #[error("T_e is not a chain map on edge {0}")]
    ChainMapViolation(Simplex),
}

/// σ ↦ a(σ) as a dim V × dim V matrix; a(σ) for σ ∈ S_k has End-degree 1−k.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoefficientSystem {
    pub coeffs: BTreeMap<Simplex, Mat>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Violation {
    pub check: String,
    pub simplex: String,
    pub detail: String,
}

impl CoefficientSystem {
    pub fn get(&self, s: &Simplex) -> Result<&Mat, FlatError> {
        self.coeffs.get(s).ok_or_else(|| FlatError::MissingFaceData(s.clone()))
    }

    pub fn set(&mut self, s: Simplex, m: Mat) {
        self.coeffs.insert(s, m);
    }

    /// Σ_j (−1)^j a(σ_ĵ) + Σ_j (−1)^{k(j−1)} a(σ_{0..j}) a(σ_{j..k}), both sums over j = 0..k.
    pub fn residual(&self, sigma: &Simplex) -> Result<Mat, FlatError> {
        let k = sigma.dim() as i64;
        let top = self.get(sigma)?;
        let mut r = Mat::zeros(top.rows, top.cols);
        if k >= 1 {
            for j in 0..=k as usize {
                r = &r + &self.get(&sigma.delete(j))?.scale(&sign(j as i64));
            }
        }
        for j in 0..=k as usize {
            let p = self.get(&sigma.range(0, j))? * self.get(&sigma.range(j, k as usize))?;
            r = &r + &p.scale(&sign(k * (j as i64 - 1)));
        }
        Ok(r)
    }

    /// Block support, grading, vertex squares and residuals.
    pub fn validate(&self, s: &BaseComplex, l: &LeafSystem) -> Vec<Violation> {
        let mut out = Vec::new();
        for sigma in s.all() {
            let Ok(m) = self.get(sigma) else { continue };
            let allowed: BTreeSet<(usize, usize)> = l.allowed_blocks_chain(sigma).into_iter().collect();
            let mut bad = BTreeSet::new();
            for (r, c, _) in m.nonzeros() {
                let blk = (l.leaf_of(r), l.leaf_of(c));
                if !allowed.contains(&blk) && bad.insert(blk) {
                    out.push(Violation {
                        check: "TriangularityViolation".into(),
                        simplex: sigma.key(),
                        detail: format!("{}<-{}", l.leaves[blk.0].id, l.leaves[blk.1].id),
                    });
                }
            }
            let faces_present = sigma.faces().iter().all(|f| self.coeffs.contains_key(f));
            if !faces_present {
                continue;
            }
            let r = self.residual(sigma).expect("faces present");
            if !r.is_zero() {
                out.push(Violation {
                    check: if sigma.dim() == 0 { "VertexSquareNonzero".into() } else { "ResidualNonzero".into() },
                    simplex: sigma.key(),
                    detail: format!("{} nonzero entries", r.nonzeros().count()),
                });
            }
        }
        out
    }

    /// Solves the top-coefficient relation for a(σ), all faces given.
    /// Free variables are zero unless `rng` is supplied, in which case a random
    /// small integer kernel combination is added.
    pub fn extend<R: Rng>(&self, sigma: &Simplex, l: &LeafSystem, rng: Option<&mut R>) -> Result<Mat, FlatError> {
        let k = sigma.dim() as i64;
        assert!(k >= 1);
        let n = l.dim();
        let mut known = Mat::zeros(n, n);
        for j in 0..=k as usize {
            known = &known + &self.get(&sigma.delete(j))?.scale(&sign(j as i64));
        }
        for j in 1..k as usize {
            let p = self.get(&sigma.range(0, j))? * self.get(&sigma.range(j, k as usize))?;
            known = &known + &p.scale(&sign(k * (j as i64 - 1)));
        }
        let a0 = self.get(&sigma.range(0, 0))?.scale(&sign(k));
        let ak = self.get(&sigma.range(k as usize, k as usize))?;
        // unknown X_{rc} on allowed blocks; equation (−1)^k a0 X + X ak = −known
        let mut unknowns = Vec::new();
        for (a, b) in l.allowed_blocks_chain(sigma) {
            for r in l.block(a) {
                for c in l.block(b) {
                    unknowns.push((r, c));
                }
            }
        }
        let mut sys = Mat::zeros(n * n, unknowns.len());
        for (u, &(r, c)) in unknowns.iter().enumerate() {
            // a0 E_rc contributes a0[i][r] at (i, c); E_rc ak contributes ak[c][j] at (r, j)
            for i in 0..n {
                let v = a0.get(i, r);
                if !v.is_zero() {
                    *sys.get_mut(i * n + c, u) += v;
                }
            }
            for j in 0..n {
                let v = ak.get(c, j);
                if !v.is_zero() {
                    *sys.get_mut(r * n + j, u) += v;
                }
            }
        }
        let rhs: Vec<Q> = (0..n * n).map(|i| -known.get(i / n, i % n).clone()).collect();
        let mut x = solve(&sys, &rhs).map_err(|c| FlatError::Infeasible { simplex: sigma.clone(), certificate: c })?;
        if let Some(rng) = rng {
            for v in sys.kernel() {
                let t = q(rng.gen_range(-2..=2));
                for (xi, vi) in x.iter_mut().zip(&v) {
                    *xi += &t * vi;
                }
            }
        }
        let mut m = Mat::zeros(n, n);
        for ((r, c), v) in unknowns.into_iter().zip(x) {
            m.set(r, c, v);
        }
        Ok(m)
    }

    /// Fills every missing simplex up to dimension `to_dim`, skeleton by skeleton.
    pub fn extend_to_dim<R: Rng>(
        &mut self,
        s: &BaseComplex,
        l: &LeafSystem,
        to_dim: usize,
        mut rng: Option<&mut R>,
    ) -> Result<usize, FlatError> {
        let mut added = 0;
        for k in 1..=to_dim.min(s.dim().max(0) as usize) {
            for sigma in s.simplices(k) {
                if self.coeffs.contains_key(sigma) {
                    continue;
                }
                let m = self.extend(sigma, l, rng.as_deref_mut())?;
                self.set(sigma.clone(), m);
                added += 1;
            }
        }
        Ok(added)
    }
}

/// The signed CW boundary on the free module spanned by pairs (σ, basis index).
pub struct CwBoundary {
    pub cells: Vec<(Simplex, usize)>,
    pub matrix: Mat,
}

impl CwBoundary {
    /// Column (σ, i) holds ∂M_i(σ) = Σ_j (−1)^j M_i(σ_ĵ) + Σ_j (−1)^{k(j−1)} Σ_{i′} a(σ_{0..j})_{i i′} M_{i′}(σ_{j..k}).
    pub fn new(a: &CoefficientSystem, s: &BaseComplex, dim_v: usize) -> Result<CwBoundary, FlatError> {
        let cells: Vec<(Simplex, usize)> =
            s.all().filter(|x| a.coeffs.contains_key(*x)).flat_map(|x| (0..dim_v).map(move |i| (x.clone(), i))).collect();
        let index: BTreeMap<(Simplex, usize), usize> = cells.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        let mut m = Mat::zeros(cells.len(), cells.len());
        for (col, (sigma, i)) in cells.iter().enumerate() {
            let k = sigma.dim() as i64;
            if k >= 1 {
                for j in 0..=k as usize {
                    let row = index
                        .get(&(sigma.delete(j), *i))
                        .ok_or_else(|| FlatError::MissingFaceData(sigma.delete(j)))?;
                    *m.get_mut(*row, col) += sign(j as i64);
                }
            }
            for j in 0..=k as usize {
                let c = a.get(&sigma.range(0, j))?;
                let tail = sigma.range(j, k as usize);
                let sg = sign(k * (j as i64 - 1));
                for ip in 0..dim_v {
                    let v = c.get(*i, ip);
                    if !v.is_zero() {
                        let row = index[&(tail.clone(), ip)];
                        *m.get_mut(row, col) += &sg * v;
                    }
                }
            }
        }
        Ok(CwBoundary { cells, matrix: m })
    }

    pub fn squares_to_zero(&self) -> bool {
        (&self.matrix * &self.matrix).is_zero()
    }
}

/// e(v_0..v_k) = (−1)^{k(k−1)/2} a(σ_{v_0..v_k}) on increasing tuples.
#[derive(Clone, Debug)]
pub struct IgusaSystem {
    pub e: BTreeMap<Simplex, Mat>,
    pub dim_v: usize,
}

pub fn igusa_export(a: &CoefficientSystem, sigma: &Simplex) -> Result<IgusaSystem, FlatError> {
    let mut e = BTreeMap::new();
    let mut dim_v = 0;
    for f in sigma.faces() {
        let k = f.dim() as i64;
        let m = a.get(&f)?;
        dim_v = m.rows;
        e.insert(f, m.scale(&sign(k * (k - 1) / 2)));
    }
    Ok(IgusaSystem { e, dim_v })
}

impl IgusaSystem {
    fn at(&self, t: &Simplex) -> Mat {
        self.e.get(t).cloned().unwrap_or_else(|| Mat::zeros(self.dim_v, self.dim_v))
    }

    /// Σ_j (−1)^j (e(v_0..v_j) e(v_j..v_k) − e(v_0..v̂_j..v_k)) for one tuple.
    pub fn relation(&self, t: &Simplex) -> Mat {
        let k = t.dim() as usize;
        let mut r = Mat::zeros(self.dim_v, self.dim_v);
        for j in 0..=k {
            let term = &(&self.at(&t.range(0, j)) * &self.at(&t.range(j, k))) - &self.at(&t.delete(j));
            r = &r + &term.scale(&sign(j as i64));
        }
        r
    }

    /// Tuples on which the relation fails.
    pub fn check(&self) -> Vec<Simplex> {
        self.e.keys().filter(|t| !self.relation(t).is_zero()).cloned().collect()
    }
}

/// Betti numbers per degree of a degree +1 differential.
pub fn homology(d: &Mat, degrees: &[i64]) -> Result<BTreeMap<i64, usize>, FlatError> {
    if !(d * d).is_zero() {
        return Err(FlatError::NotADifferential);
    }
    let degs: BTreeSet<i64> = degrees.iter().copied().collect();
    let idx = |g: i64| -> Vec<usize> { (0..degrees.len()).filter(|&i| degrees[i] == g).collect() };
    let mut out = BTreeMap::new();
    for &g in &degs {
        let here = idx(g);
        let next = idx(g + 1);
        let prev = idx(g - 1);
        let out_rank = if next.is_empty() { 0 } else { d.submatrix(&next, &here).rank() };
        let in_rank = if prev.is_empty() { 0 } else { d.submatrix(&here, &prev).rank() };
        out.insert(g, here.len() - out_rank - in_rank);
    }
    Ok(out)
}

/// T_e = id + a(e); checks a(e_0) T_e = T_e a(e_1).
pub fn edge_transport(a: &CoefficientSystem, e: &Simplex) -> Result<Mat, FlatError> {
    let ae = a.get(e)?;
    let t = &Mat::identity(ae.rows) + ae;
    let lhs = a.get(&e.range(0, 0))? * &t;
    let rhs = &t * a.get(&e.range(1, 1))?;
    if lhs != rhs {
        return Err(FlatError::ChainMapViolation(e.clone()));
    }
    Ok(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyReport {
    pub simplex: String,
    pub homology_rank: usize,
    pub identity: bool,
}

/// T_{02}^{-1} T_{01} T_{12} on H(V, a(σ_2)); identity iff Mz − z ∈ im a(σ_2) for every cycle z.
pub fn holonomy_on_homology(a: &CoefficientSystem, tau: &Simplex) -> Result<HolonomyReport, FlatError> {
    let t01 = edge_transport(a, &tau.face(&[0, 1]).unwrap())?;
    let t12 = edge_transport(a, &tau.face(&[1, 2]).unwrap())?;
    let t02 = edge_transport(a, &tau.face(&[0, 2]).unwrap())?;
    let inv = t02.inverse().expect("id + nilpotent is invertible");
    let m = &(&inv * &t01) * &t12;
    let d2 = a.get(&tau.range(2, 2))?;
    let n = d2.rows;
    let cycles = d2.kernel();
    let image_rank = d2.rank();
    let mut identity = true;
    for z in &cycles {
        let mz = m.mul_vec(z);
        let diff: Vec<Q> = mz.iter().zip(z).map(|(x, y)| x - y).collect();
        let mut aug = Mat::zeros(n, n + 1);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, d2.get(r, c).clone());
            }
            aug.set(r, n, diff[r].clone());
        }
        if aug.rank() != image_rank {
            identity = false;
        }
    }
    Ok(HolonomyReport { simplex: tau.key(), homology_rank: cycles.len() - image_rank, identity })
}

#[derive(Clone, Debug, Serialize)]
pub struct MonomialReport {
    pub violations: Vec<Violation>,
    /// Per simplex, the nonzero entries (row, col, value) with the Igusa sign applied.
    pub functor_data: BTreeMap<String, Vec<(usize, usize, String)>>,
}

/// Every nonzero block must have at most one nonzero per row and column, each in `group`.
pub fn monomial_check(a: &CoefficientSystem, l: &LeafSystem, group: &[Q]) -> MonomialReport {
    let mut violations = Vec::new();
    let mut functor_data = BTreeMap::new();
    for (sigma, m) in &a.coeffs {
        let k = sigma.dim() as i64;
        let s = sign(k * (k - 1) / 2);
        let mut entries = Vec::new();
        for (r, c, v) in m.nonzeros() {
            entries.push((r, c, fmt_q(&(v * &s))));
            if !group.contains(v) {
                violations.push(Violation {
                    check: "NotInGroup".into(),
                    simplex: sigma.key(),
                    detail: format!("entry ({r},{c}) = {}", fmt_q(v)),
                });
            }
        }
        for a_ in 0..l.n_leaves() {
            for b in 0..l.n_leaves() {
                let (rows, cols) = (l.block(a_), l.block(b));
                for r in rows.clone() {
                    if cols.clone().filter(|&c| !m.get(r, c).is_zero()).count() > 1 {
                        violations.push(Violation {
                            check: "RowNotMonomial".into(),
                            simplex: sigma.key(),
                            detail: format!("block {}<-{} row {r}", l.leaves[a_].id, l.leaves[b].id),
                        });
                    }
                }
                for c in cols.clone() {
                    if rows.clone().filter(|&r| !m.get(r, c).is_zero()).count() > 1 {
                        violations.push(Violation {
                            check: "ColumnNotMonomial".into(),
                            simplex: sigma.key(),
                            detail: format!("block {}<-{} column {c}", l.leaves[a_].id, l.leaves[b].id),
                        });
                    }
                }
            }
        }
        functor_data.insert(sigma.key(), entries);
    }
    MonomialReport { violations, functor_data }
}

/// The sign group {±1}.
pub fn sign_group() -> Vec<Q> {
    vec![one(), -one()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::tests::leaves;
    use rand_chacha::ChaCha8Rng;

    fn none() -> Option<&'static mut ChaCha8Rng> {
        None
    }

    #[test]
    fn edge_residual_by_hand() {
        // two leaves of index 0 and 1, heights far apart
        let l = leaves(&[("b", 0, 1, &[0, 0]), ("a", 1, 1, &[5, 5])], q(1));
        let d = Mat::from_i64(&[&[0, 0], &[1, 0]]);
        let mut a = CoefficientSystem::default();
        a.set(Simplex::of(&[0]), d.clone());
        a.set(Simplex::of(&[1]), d.clone());
        a.set(Simplex::of(&[0, 1]), Mat::zeros(2, 2));
        let e = Simplex::of(&[0, 1]);
        let s = BaseComplex::build(&[vec![0, 1]]).unwrap();
        assert!(a.residual(&e).unwrap().is_zero());
        assert!(a.validate(&s, &l).is_empty());
        // direct expansion against a perturbed a(e)
        let mut b = a.clone();
        let ae = Mat::from_i64(&[&[7, 0], &[0, 0]]);
        b.set(e.clone(), ae.clone());
        let a0 = &d;
        let a1 = &d;
        let oracle = &(&(a1 - a0) - &(a0 * &ae)) + &(&ae * a1);
        assert_eq!(b.residual(&e).unwrap(), oracle);
    }

    #[test]
    fn extension_cases() {
        let s = BaseComplex::build(&[vec![0, 1]]).unwrap();
        let l = leaves(&[("b", 0, 1, &[0, 0]), ("g", 0, 1, &[5, 5])], q(1));
        let mut a = CoefficientSystem::default();
        a.set(Simplex::of(&[0]), Mat::zeros(2, 2));
        a.set(Simplex::of(&[1]), Mat::zeros(2, 2));
        a.extend_to_dim(&s, &l, 1, none()).unwrap();
        assert!(a.get(&Simplex::of(&[0, 1])).unwrap().is_zero());
        // unequal vertex differentials with no allowed blocks
        let l2 = leaves(&[("b", 0, 1, &[0, 0]), ("a", 1, 1, &[5, 5])], q(1));
        let mut c = CoefficientSystem::default();
        c.set(Simplex::of(&[0]), Mat::from_i64(&[&[0, 0], &[1, 0]]));
        c.set(Simplex::of(&[1]), Mat::zeros(2, 2));
        let err = c.extend(&Simplex::of(&[0, 1]), &l2, none()).unwrap_err();
        assert!(matches!(err, FlatError::Infeasible { .. }));
    }

    #[test]
    fn cw_boundary_edge() {
        let l = leaves(&[("b", 0, 1, &[0, 0]), ("a", 1, 1, &[5, 5])], q(1));
        let s = BaseComplex::build(&[vec![0, 1]]).unwrap();
        let d = Mat::from_i64(&[&[0, 0], &[1, 0]]);
        let mut a = CoefficientSystem::default();
        a.set(Simplex::of(&[0]), d.clone());
        a.set(Simplex::of(&[1]), d);
        a.set(Simplex::of(&[0, 1]), Mat::zeros(2, 2));
        let cw = CwBoundary::new(&a, &s, l.dim()).unwrap();
        assert!(cw.squares_to_zero());
        // ∂M_a(e) = M_a(v1) − M_a(v0) − Σ a(v0)_{aβ} M_β(e)
        let col = cw.cells.iter().position(|c| c == &(Simplex::of(&[0, 1]), 1)).unwrap();
        let at = |s: &[u32], i: usize| cw.matrix.get(cw.cells.iter().position(|c| c == &(Simplex::of(s), i)).unwrap(), col).clone();
        assert_eq!(at(&[1], 1), q(1));
        assert_eq!(at(&[0], 1), q(-1));
        assert_eq!(at(&[0, 1], 0), q(-1));
    }

    #[test]
    fn homology_examples() {
        assert_eq!(homology(&Mat::zeros(2, 2), &[0, 1]).unwrap(), BTreeMap::from([(0, 1), (1, 1)]));
        let d = Mat::from_i64(&[&[0, 0], &[1, 0]]);
        assert_eq!(homology(&d, &[0, 1]).unwrap(), BTreeMap::from([(0, 0), (1, 0)]));
        let bad = Mat::from_i64(&[&[1, 0], &[0, 0]]);
        assert_eq!(homology(&bad, &[0, 1]), Err(FlatError::NotADifferential));
    }

    #[test]
    fn igusa_signs_and_monomial() {
        let l = leaves(&[("b", 0, 1, &[0, 0, 0])], q(1));
        let mut a = CoefficientSystem::default();
        for f in Simplex::of(&[0, 1, 2]).faces() {
            a.set(f, Mat::from_i64(&[&[1]]));
        }
        let e = igusa_export(&a, &Simplex::of(&[0, 1, 2])).unwrap();
        assert_eq!(e.e[&Simplex::of(&[0])], Mat::from_i64(&[&[1]]));
        assert_eq!(e.e[&Simplex::of(&[0, 1, 2])], Mat::from_i64(&[&[-1]]));
        assert!(monomial_check(&a, &l, &sign_group()).violations.is_empty());
        let l2 = leaves(&[("b", 0, 2, &[0]), ("a", 1, 2, &[5])], q(1));
        let mut c = CoefficientSystem::default();
        c.set(Simplex::of(&[0]), Mat::from_i64(&[&[0, 0, 0, 0], &[0, 0, 0, 0], &[1, 1, 0, 0], &[0, 0, 0, 0]]));
        let rep = monomial_check(&c, &l2, &sign_group());
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].check, "RowNotMonomial");
    }

    #[test]
    fn trivial_transport() {
        let mut a = CoefficientSystem::default();
        a.set(Simplex::of(&[0]), Mat::zeros(1, 1));
        a.set(Simplex::of(&[1]), Mat::zeros(1, 1));
        a.set(Simplex::of(&[0, 1]), Mat::zeros(1, 1));
        assert!(edge_transport(&a, &Simplex::of(&[0, 1])).unwrap().is_identity());
    }
}
