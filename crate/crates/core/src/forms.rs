//! Polynomial differential forms on Δ_k in the chart x_1..x_k, with x_0 = 1 − Σ x_i
//! and dx_0 = −Σ dx_i eliminated.

use crate::linalg::{Factored, Mat};
use crate::rational::{one, q, sign, zero, Q};
use num_traits::Zero;
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("forms live on simplices of dimension {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("boundary data on facets {i} and {j} disagree on their common face")]
    IncompatibleBoundaryData { i: usize, j: usize, difference: PolyForm },
    #[error("no extension with polynomial degree at most {cap}")]
    ExtensionInfeasible { cap: usize },
    #[error("bad form JSON: {0}")]
    Parse(String),
}

/// Monomial exponents of x_1..x_k together with a dx mask (bit i−1 for dx_i).
pub type Key = (Vec<u16>, u32);

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PolyForm {
    pub k: usize,
    pub terms: BTreeMap<Key, Q>,
}

impl std::fmt::Debug for PolyForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self)
    }
}

impl std::fmt::Display for PolyForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for ((e, m), c) in &self.terms {
            let mut s = crate::rational::fmt_q(c);
            for (i, &p) in e.iter().enumerate() {
                if p > 0 {
                    s.push_str(&format!("*x{}", i + 1));
                    if p > 1 {
                        s.push_str(&format!("^{p}"));
                    }
                }
            }
            for i in 0..self.k {
                if m >> i & 1 == 1 {
                    s.push_str(&format!(" dx{}", i + 1));
                }
            }
            parts.push(s);
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// (−1) to the number of pairs (i ∈ a, j ∈ b) with i > j; zero when a and b overlap.
pub fn wedge_sign(a: u32, b: u32) -> Option<i64> {
    if a & b != 0 {
        return None;
    }
    let mut inv = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        inv += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    Some(if inv % 2 == 0 { 1 } else { -1 })
}

impl PolyForm {
    pub fn zero(k: usize) -> PolyForm {
        PolyForm { k, terms: BTreeMap::new() }
    }

    pub fn constant(k: usize, c: Q) -> PolyForm {
        let mut f = PolyForm::zero(k);
        f.add_term(vec![0; k], 0, c);
        f
    }

    pub fn one(k: usize) -> PolyForm {
        PolyForm::constant(k, one())
    }

    /// Barycentric coordinate x_i, i ∈ 0..=k.
    pub fn var(k: usize, i: usize) -> PolyForm {
        assert!(i <= k);
        if i == 0 {
            let mut f = PolyForm::one(k);
            for j in 1..=k {
                f.add_term(unit(k, j), 0, -one());
            }
            f
        } else {
            let mut f = PolyForm::zero(k);
            f.add_term(unit(k, i), 0, one());
            f
        }
    }

    /// dx_i, i ∈ 0..=k.
    pub fn dvar(k: usize, i: usize) -> PolyForm {
        PolyForm::var(k, i).d()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, e: Vec<u16>, m: u32, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((e, m)) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check(&self, other: &PolyForm) -> Result<(), FormError> {
        if self.k != other.k {
            return Err(FormError::DimensionMismatch(self.k, other.k));
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyForm) -> PolyForm {
        assert_eq!(self.k, other.k, "form dimension mismatch");
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn add_assign(&mut self, other: &PolyForm) {
        assert_eq!(self.k, other.k, "form dimension mismatch");
        for ((e, m), c) in &other.terms {
            self.add_term(e.clone(), *m, c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &PolyForm, s: &Q) {
        if s.is_zero() {
            return;
        }
        for ((e, m), c) in &other.terms {
            self.add_term(e.clone(), *m, c * s);
        }
    }

    pub fn sub(&self, other: &PolyForm) -> PolyForm {
        let mut r = self.clone();
        r.add_scaled(other, &-one());
        r
    }

    pub fn neg(&self) -> PolyForm {
        self.scale(&-one())
    }

    pub fn scale(&self, s: &Q) -> PolyForm {
        if s.is_zero() {
            return PolyForm::zero(self.k);
        }
        PolyForm { k: self.k, terms: self.terms.iter().map(|(key, c)| (key.clone(), c * s)).collect() }
    }

    pub fn try_wedge(&self, other: &PolyForm) -> Result<PolyForm, FormError> {
        self.check(other)?;
        Ok(self.wedge(other))
    }

    /// Graded-commutative product.
    pub fn wedge(&self, other: &PolyForm) -> PolyForm {
        assert_eq!(self.k, other.k, "form dimension mismatch");
        let mut r = PolyForm::zero(self.k);
        for ((e1, m1), c1) in &self.terms {
            for ((e2, m2), c2) in &other.terms {
                let Some(s) = wedge_sign(*m1, *m2) else { continue };
                let e: Vec<u16> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let c = c1 * c2;
                r.add_term(e, m1 | m2, if s > 0 { c } else { -c });
            }
        }
        r
    }

    pub fn d(&self) -> PolyForm {
        let mut r = PolyForm::zero(self.k);
        for ((e, m), c) in &self.terms {
            for i in 0..self.k {
                if e[i] == 0 || m >> i & 1 == 1 {
                    continue;
                }
                let mut e2 = e.clone();
                e2[i] -= 1;
                let below = (m & ((1u32 << i) - 1)).count_ones();
                let v = c * q(e[i] as i64);
                r.add_term(e2, m | 1 << i, if below % 2 == 0 { v } else { -v });
            }
        }
        r
    }

    /// Component of form degree p.
    pub fn part(&self, p: usize) -> PolyForm {
        PolyForm {
            k: self.k,
            terms: self.terms.iter().filter(|((_, m), _)| m.count_ones() as usize == p).map(|(a, b)| (a.clone(), b.clone())).collect(),
        }
    }

    pub fn form_degrees(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.keys().map(|(_, m)| m.count_ones() as usize).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn poly_degree(&self) -> usize {
        self.terms.keys().map(|(e, _)| e.iter().map(|&x| x as usize).sum()).max().unwrap_or(0)
    }

    /// Value of a 0-form at the point with chart coordinates `x`.
    pub fn eval0(&self, x: &[Q]) -> Q {
        let mut s = zero();
        for ((e, m), c) in &self.terms {
            if *m != 0 {
                continue;
            }
            let mut t = c.clone();
            for (xi, &p) in x.iter().zip(e) {
                for _ in 0..p {
                    t *= xi;
                }
            }
            s += t;
        }
        s
    }

    /// Pullback along x_i ↦ images[i−1] (0-forms in a chart of dimension `target_k`).
    pub fn pullback(&self, target_k: usize, images: &[PolyForm]) -> PolyForm {
        assert_eq!(images.len(), self.k);
        let diffs: Vec<PolyForm> = images.iter().map(|p| p.d()).collect();
        let mut powers: Vec<Vec<PolyForm>> = images.iter().map(|p| vec![PolyForm::one(target_k), p.clone()]).collect();
        let mut r = PolyForm::zero(target_k);
        for ((e, m), c) in &self.terms {
            let mut t = PolyForm::constant(target_k, c.clone());
            for i in 0..self.k {
                let p = e[i] as usize;
                if p == 0 {
                    continue;
                }
                while powers[i].len() <= p {
                    let next = powers[i].last().unwrap().wedge(&images[i]);
                    powers[i].push(next);
                }
                t = t.wedge(&powers[i][p]);
                if t.is_zero() {
                    break;
                }
            }
            for i in 0..self.k {
                if m >> i & 1 == 1 {
                    t = t.wedge(&diffs[i]);
                }
            }
            r.add_assign(&t);
        }
        r
    }

    /// Pullback along the affine map Δ_l → Δ_k sending vertex j to vertex f[j].
    pub fn vertex_map_pullback(&self, l: usize, f: &[usize]) -> PolyForm {
        assert_eq!(f.len(), l + 1);
        let images: Vec<PolyForm> = (1..=self.k)
            .map(|i| {
                let mut p = PolyForm::zero(l);
                for (j, &fj) in f.iter().enumerate() {
                    if fj == i {
                        p.add_assign(&PolyForm::var(l, j));
                    }
                }
                p
            })
            .collect();
        self.pullback(l, &images)
    }

    /// Restriction to the face with increasing vertex positions `face`.
    pub fn restrict(&self, face: &[usize]) -> PolyForm {
        self.vertex_map_pullback(face.len() - 1, face)
    }

    /// Restriction to facet j (vertex j deleted).
    pub fn restrict_facet(&self, j: usize) -> PolyForm {
        let face: Vec<usize> = (0..=self.k).filter(|&i| i != j).collect();
        self.restrict(&face)
    }

    /// Substitutes x_i ↦ images[i−1] in the coefficients only, leaving dx untouched.
    pub fn substitute_coeffs(&self, images: &[PolyForm]) -> PolyForm {
        let mut r = PolyForm::zero(self.k);
        for ((e, m), c) in &self.terms {
            let mut t = PolyForm::constant(self.k, c.clone());
            for i in 0..self.k {
                for _ in 0..e[i] {
                    t = t.wedge(&images[i]);
                }
            }
            for ((e2, m2), c2) in t.terms {
                debug_assert_eq!(m2, 0);
                r.add_term(e2, *m, c2);
            }
        }
        r
    }

    /// Cone contraction toward vertex `apex`: d h + h d = id − (evaluation at the apex).
    pub fn poincare_contract(&self, apex: usize) -> PolyForm {
        let k = self.k;
        // u = x − p with p the apex in chart coordinates
        let shift = |sgn: i64| -> Vec<PolyForm> {
            (1..=k)
                .map(|i| {
                    let mut v = PolyForm::var(k, i);
                    if i == apex {
                        v.add_term(vec![0; k], 0, q(sgn));
                    }
                    v
                })
                .collect()
        };
        let in_u = self.pullback(k, &shift(1));
        let mut h = PolyForm::zero(k);
        for ((e, m), c) in &in_u.terms {
            let p = m.count_ones() as usize;
            if p == 0 {
                continue;
            }
            let total: usize = e.iter().map(|&x| x as usize).sum::<usize>() + p;
            let c = c / q(total as i64);
            // ι_u dx_I = Σ_m (−1)^m u_{I_m} dx_{I∖I_m}
            let mut pos = 0;
            for i in 0..k {
                if m >> i & 1 == 0 {
                    continue;
                }
                let mut e2 = e.clone();
                e2[i] += 1;
                h.add_term(e2, m & !(1 << i), &c * sign(pos));
                pos += 1;
            }
        }
        h.pullback(k, &shift(-1))
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|((e, m), c)| {
                let mono: serde_json::Map<String, Value> =
                    e.iter().enumerate().filter(|(_, &p)| p > 0).map(|(i, &p)| (format!("x{}", i + 1), json!(p))).collect();
                let dx: Vec<usize> = (0..self.k).filter(|i| m >> i & 1 == 1).map(|i| i + 1).collect();
                json!({"mono": mono, "dx": dx, "coeff": crate::rational::fmt_q(c)})
            })
            .collect();
        json!({"k": self.k, "terms": terms})
    }

    pub fn from_json(v: &Value) -> Result<PolyForm, FormError> {
        let err = |s: &str| FormError::Parse(s.to_string());
        let k = v.get("k").and_then(|x| x.as_u64()).ok_or_else(|| err("missing k"))? as usize;
        let mut f = PolyForm::zero(k);
        for t in v.get("terms").and_then(|x| x.as_array()).ok_or_else(|| err("missing terms"))? {
            let mut e = vec![0u16; k];
            if let Some(mono) = t.get("mono").and_then(|x| x.as_object()) {
                for (name, p) in mono {
                    let i: usize = name.strip_prefix('x').and_then(|s| s.parse().ok()).ok_or_else(|| err("bad variable"))?;
                    let p = p.as_u64().ok_or_else(|| err("bad exponent"))? as u16;
                    if i == 0 || i > k {
                        return Err(err("variable out of range"));
                    }
                    e[i - 1] += p;
                }
            }
            let mut term = PolyForm::zero(k);
            term.add_term(e, 0, one());
            if let Some(dx) = t.get("dx").and_then(|x| x.as_array()) {
                for i in dx {
                    let i = i.as_u64().ok_or_else(|| err("bad dx index"))? as usize;
                    if i > k {
                        return Err(err("dx index out of range"));
                    }
                    term = term.wedge(&PolyForm::dvar(k, i));
                }
            }
            let c = crate::rational::serde_q::from_value(t.get("coeff").ok_or_else(|| err("missing coeff"))?).map_err(FormError::Parse)?;
            f.add_scaled(&term, &c);
        }
        Ok(f)
    }
}

fn unit(k: usize, i: usize) -> Vec<u16> {
    let mut e = vec![0; k];
    e[i - 1] = 1;
    e
}

/// All exponent vectors in `k` variables of total degree ≤ `d`, in graded lexicographic order.
pub fn monomials(k: usize, d: usize) -> Vec<Vec<u16>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for p in 0..=left {
            cur.push(p as u16);
            rec(k, left - p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, d, &mut Vec::new(), &mut out);
    out.sort_by_key(|e| (e.iter().map(|&x| x as usize).sum::<usize>(), e.clone()));
    out
}

/// dx masks with exactly p bits among k.
pub fn masks(k: usize, p: usize) -> Vec<u32> {
    (0u32..(1 << k)).filter(|m| m.count_ones() as usize == p).collect()
}

struct ExtensionSystem {
    unknowns: Vec<Key>,
    rows: HashMap<(usize, Key), usize>,
    factored: Factored,
}

type Cache = Mutex<HashMap<(usize, usize, usize), Arc<ExtensionSystem>>>;

fn cache() -> &'static Cache {
    static C: OnceLock<Cache> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn extension_system(k: usize, p: usize, d: usize) -> Arc<ExtensionSystem> {
    if let Some(s) = cache().lock().unwrap().get(&(k, p, d)) {
        return s.clone();
    }
    let mut unknowns = Vec::new();
    for e in monomials(k, d) {
        for m in masks(k, p) {
            unknowns.push((e.clone(), m));
        }
    }
    let mut rows: HashMap<(usize, Key), usize> = HashMap::new();
    let mut entries = Vec::new();
    for (u, key) in unknowns.iter().enumerate() {
        let mut f = PolyForm::zero(k);
        f.add_term(key.0.clone(), key.1, one());
        for j in 0..=k {
            for (tk, c) in f.restrict_facet(j).terms {
                let n = rows.len();
                let r = *rows.entry((j, tk)).or_insert(n);
                entries.push((r, u, c));
            }
        }
    }
    let mut a = Mat::zeros(rows.len(), unknowns.len());
    for (r, u, c) in entries {
        *a.get_mut(r, u) += c;
    }
    let s = Arc::new(ExtensionSystem { unknowns, rows, factored: Factored::new(&a) });
    cache().lock().unwrap().insert((k, p, d), s.clone());
    s
}

/// Checks that facets i and j agree on the face where both vertices are deleted.
pub fn check_boundary(data: &[PolyForm]) -> Result<(), FormError> {
    if data.iter().any(|f| f.k == 0) {
        return Ok(());
    }
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            // in facet i, vertex j sits at position j−1; in facet j, vertex i stays at i
            let a = data[i].restrict_facet(j - 1);
            let b = data[j].restrict_facet(i);
            if a != b {
                return Err(FormError::IncompatibleBoundaryData { i, j, difference: a.sub(&b) });
            }
        }
    }
    Ok(())
}

/// A form on Δ_k whose restriction to facet j is `data[j]`, of minimal polynomial degree,
/// never using the top form degree.
pub fn extend_from_boundary(k: usize, data: &[PolyForm], cap: usize) -> Result<PolyForm, FormError> {
    assert_eq!(data.len(), k + 1);
    assert!(k >= 1);
    for f in data {
        if f.k + 1 != k {
            return Err(FormError::DimensionMismatch(f.k + 1, k));
        }
    }
    check_boundary(data)?;
    let d0 = data.iter().map(|f| f.poly_degree()).max().unwrap_or(0);
    let mut degrees: Vec<usize> = data.iter().flat_map(|f| f.form_degrees()).collect();
    degrees.sort();
    degrees.dedup();
    let mut out = PolyForm::zero(k);
    for p in degrees {
        let parts: Vec<PolyForm> = data.iter().map(|f| f.part(p)).collect();
        if p >= k {
            return Err(FormError::ExtensionInfeasible { cap });
        }
        let mut found = None;
        for d in d0..=cap.max(d0) {
            let sys = extension_system(k, p, d);
            let mut rhs = vec![zero(); sys.rows.len()];
            let mut representable = true;
            for (j, f) in parts.iter().enumerate() {
                for (tk, c) in &f.terms {
                    match sys.rows.get(&(j, tk.clone())) {
                        Some(&r) => rhs[r] = c.clone(),
                        None => representable = false,
                    }
                }
            }
            if !representable {
                continue;
            }
            if let Some(x) = sys.factored.solve(&rhs) {
                let mut f = PolyForm::zero(k);
                for (key, v) in sys.unknowns.iter().zip(x) {
                    f.add_term(key.0.clone(), key.1, v);
                }
                found = Some(f);
                break;
            }
        }
        out.add_assign(&found.ok_or(FormError::ExtensionInfeasible { cap })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qf;

    #[test]
    fn d_examples() {
        assert_eq!(PolyForm::var(2, 1).d(), PolyForm::dvar(2, 1));
        let d0 = PolyForm::var(3, 0).d();
        let mut want = PolyForm::zero(3);
        for i in 1..=3 {
            want.add_scaled(&PolyForm::dvar(3, i), &-one());
        }
        assert_eq!(d0, want);
        assert!(PolyForm::dvar(2, 1).wedge(&PolyForm::dvar(2, 1)).is_zero());
        let w = PolyForm::dvar(2, 2).wedge(&PolyForm::dvar(2, 1));
        assert_eq!(w, PolyForm::dvar(2, 1).wedge(&PolyForm::dvar(2, 2)).neg());
    }

    #[test]
    fn restrict_examples() {
        assert_eq!(PolyForm::var(2, 2).restrict(&[0, 2]), PolyForm::var(1, 1));
        assert!(PolyForm::dvar(2, 1).restrict(&[0, 2]).is_zero());
        let f = PolyForm::var(2, 1).wedge(&PolyForm::var(2, 2)).add(&PolyForm::constant(2, q(3)));
        assert_eq!(f.restrict(&[1]).eval0(&[]), q(3));
        let g = PolyForm::var(2, 1).add(&PolyForm::constant(2, q(3)));
        assert_eq!(g.restrict(&[1]), PolyForm::constant(0, q(4)));
    }

    #[test]
    fn extend_examples() {
        let data = vec![PolyForm::constant(0, q(1)), PolyForm::zero(0)];
        // facet 0 is vertex 1, facet 1 is vertex 0
        assert_eq!(extend_from_boundary(1, &data, 4).unwrap(), PolyForm::var(1, 1));
        let zero_data = vec![PolyForm::zero(1); 3];
        assert!(extend_from_boundary(2, &zero_data, 4).unwrap().is_zero());
        let w0 = PolyForm::var(2, 1).wedge(&PolyForm::dvar(2, 2)).add(&PolyForm::var(2, 0).wedge(&PolyForm::var(2, 2)));
        let data: Vec<PolyForm> = (0..3).map(|j| w0.restrict_facet(j)).collect();
        let w = extend_from_boundary(2, &data, 6).unwrap();
        for j in 0..3 {
            assert_eq!(w.restrict_facet(j), data[j]);
        }
        let bad = vec![PolyForm::constant(0, q(1)), PolyForm::constant(0, q(2)), PolyForm::zero(0)];
        let bad: Vec<PolyForm> = bad.into_iter().map(|c| c.pullback(1, &[])).collect();
        assert!(matches!(extend_from_boundary(2, &bad, 4), Err(FormError::IncompatibleBoundaryData { .. })));
    }

    #[test]
    fn poincare_examples() {
        assert_eq!(PolyForm::dvar(1, 1).poincare_contract(0), PolyForm::var(1, 1));
        assert!(PolyForm::zero(2).poincare_contract(1).is_zero());
        let w = PolyForm::var(2, 2).wedge(&PolyForm::dvar(2, 1));
        for apex in 0..=2 {
            let h = w.poincare_contract(apex);
            let lhs = h.d().add(&w.d().poincare_contract(apex));
            assert_eq!(lhs, w);
        }
    }

    #[test]
    fn json_round_trip() {
        let w = PolyForm::var(2, 1).wedge(&PolyForm::dvar(2, 2)).scale(&qf(3, 7));
        assert_eq!(PolyForm::from_json(&w.to_json()).unwrap(), w);
    }
}
