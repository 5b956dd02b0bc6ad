//! The mixed superconnection a′(σ, σ′) and the chain-map family I′(σ, σ′),
//! built by induction over dim σ and descending induction over dim σ′.
//!
//! a′(σ, σ′) for σ′ a face of σ is stored once, under the smallest simplex on which it
//! is defined: σ′ together with the vertices of σ above max σ′. The domain is the
//! relative simplex |σ∖σ′|, parametrized in its own vertex order.

use crate::fiber::{rewrite, FiberModel};
use crate::flat::{CoefficientSystem, FlatError, Violation};
use crate::formmat::FormMatrix;
use crate::forms::{check_boundary, extend_from_boundary, FormError, PolyForm};
use crate::linalg::Mat;
use crate::morse::LeafSystem;
use crate::rational::{one, sign};
use crate::simplex::{BaseComplex, Simplex};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixedError {
    #[error("missing data for ({0}, {1})")]
    MissingLowerData(String, String),
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error("boundary data for ({simplex}, {face}) entry ({row},{col}) incompatible on facets {i} and {j}")]
    Incompatible { simplex: String, face: String, row: usize, col: usize, i: usize, j: usize },
    #[error("extension of ({simplex}, {face}) entry ({row},{col}) failed: {err}")]
    ExtensionInfeasible { simplex: String, face: String, row: usize, col: usize, err: FormError },
    #[error("entry ({row},{col}) of ({simplex}, {face}) is outside the allowed blocks or degrees")]
    Triangularity { simplex: String, face: String, row: usize, col: usize },
    #[error("gauge inverse on {0} does not terminate")]
    NotNilpotent(String),
    #[error("gauge output on {simplex} disagrees with a′({facet}, ∅)")]
    GaugeMismatch { simplex: String, facet: String },
    #[error("I′(∅) on {0} is not a chain map")]
    ChainIdentityViolation(String),
}

fn keyname(s: &Simplex, f: &Simplex) -> (String, String) {
    (s.key(), if f.is_empty() { "∅".into() } else { f.key() })
}

/// Key under which a′(σ, σ′) is stored.
pub fn storage_key(sigma: &Simplex, face: &Simplex) -> (Simplex, Simplex) {
    (sigma.initial_hull(face), face.clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub simplex: String,
    pub face: String,
    pub compatible: bool,
    pub max_poly_degree: usize,
}

/// Extends each entry of a matrix from facet data on Δ_{k}, enforcing block support and degree.
#[allow(clippy::too_many_arguments)]
fn extend_entries(
    k: usize,
    data: &[FormMatrix],
    allowed: impl Fn(usize, usize) -> Option<usize>,
    cap: usize,
    simplex: &Simplex,
    face: &Simplex,
    rowdeg: &[i64],
    coldeg: &[i64],
) -> Result<FormMatrix, MixedError> {
    let (sn, fname) = keyname(simplex, face);
    let mut out = FormMatrix::zero(k, rowdeg, coldeg);
    for r in 0..rowdeg.len() {
        for c in 0..coldeg.len() {
            let entries: Vec<PolyForm> = data.iter().map(|m| m.get(r, c).clone()).collect();
            let nonzero = entries.iter().any(|e| !e.is_zero());
            let Some(p) = allowed(r, c) else {
                if nonzero {
                    return Err(MixedError::Triangularity { simplex: sn, face: fname, row: r, col: c });
                }
                continue;
            };
            if !nonzero {
                continue;
            }
            if entries.iter().any(|e| e.form_degrees().iter().any(|&q| q != p)) {
                return Err(MixedError::Triangularity { simplex: sn, face: fname, row: r, col: c });
            }
            if let Err(FormError::IncompatibleBoundaryData { i, j, .. }) = check_boundary(&entries) {
                return Err(MixedError::Incompatible { simplex: sn, face: fname, row: r, col: c, i, j });
            }
            let f = extend_from_boundary(k, &entries, cap).map_err(|err| MixedError::ExtensionInfeasible {
                simplex: sn.clone(),
                face: fname.clone(),
                row: r,
                col: c,
                err,
            })?;
            out.set(r, c, f);
        }
    }
    Ok(out)
}

fn constant(k: usize, m: &Mat, deg: &[i64]) -> FormMatrix {
    FormMatrix::from_const(k, m, deg, deg)
}

/// All a′(σ, σ′) over a complex.
#[derive(Clone, Debug)]
pub struct MixedConnection {
    pub ap: BTreeMap<(Simplex, Simplex), FormMatrix>,
    pub vdeg: Vec<i64>,
    pub steps: Vec<StepRecord>,
}

impl MixedConnection {
    pub fn get(&self, sigma: &Simplex, face: &Simplex) -> Result<&FormMatrix, MixedError> {
        let key = storage_key(sigma, face);
        self.ap.get(&key).ok_or_else(|| {
            let (a, b) = keyname(sigma, face);
            MixedError::MissingLowerData(a, b)
        })
    }

    pub fn build(s: &BaseComplex, l: &LeafSystem, a: &CoefficientSystem, cap: usize) -> Result<MixedConnection, MixedError> {
        let mut m = MixedConnection { ap: BTreeMap::new(), vdeg: l.degrees(), steps: Vec::new() };
        for sigma in s.all() {
            m.build_simplex(sigma, l, a, cap)?;
        }
        Ok(m)
    }

    /// The right side of the recursion, giving a″(σ_{0..k−1}) on |σ_{k..l}|.
    pub fn a_doubleprime(&self, sigma: &Simplex, k: usize, a: &CoefficientSystem) -> Result<FormMatrix, MixedError> {
        let l = sigma.dim() as usize;
        let deg = &self.vdeg;
        let fk = l - k;
        let s1 = sign(k as i64 + 1);
        let top = sigma.range(0, k);
        let mut acc = FormMatrix::zero(fk, deg, deg);
        for j in 0..k {
            acc.add_scaled(self.get(sigma, &top.delete(j))?, &sign(j as i64));
        }
        acc.add_scaled(&constant(fk, a.get(&top)?, deg), &s1);
        for j in 1..=k {
            let t = constant(fk, a.get(&sigma.range(0, j))?, deg).mul(self.get(sigma, &sigma.range(j, k))?);
            acc.add_scaled(&t, &sign((k as i64 + 1) * (j as i64 - 1)));
        }
        let prev = self.get(sigma, &top)?;
        let dterm = prev.d().add(&constant(fk, a.get(&sigma.range(0, 0))?, deg).mul(prev));
        acc.add_scaled(&dterm, &s1);
        acc.add_assign(&prev.mul(self.get(&sigma.range(k, l), &Simplex::empty())?));
        Ok(acc.scale(&s1))
    }

    fn build_simplex(&mut self, sigma: &Simplex, l: &LeafSystem, a: &CoefficientSystem, cap: usize) -> Result<(), MixedError> {
        let dim = sigma.dim() as usize;
        let deg = self.vdeg.clone();
        self.ap.insert((sigma.clone(), sigma.clone()), FormMatrix::zero(0, &deg, &deg));
        if dim == 0 {
            self.ap.insert((sigma.clone(), Simplex::empty()), constant(0, a.get(sigma)?, &deg));
            return Ok(());
        }
        for k in (1..=dim).rev() {
            let face = sigma.range(0, k - 1);
            let a2 = self.a_doubleprime(sigma, k, a)?;
            let mut data = vec![a2];
            for i in 1..=dim - k + 1 {
                data.push(self.get(&sigma.delete(k - 1 + i), &face)?.clone());
            }
            let total = 1 - k as i64;
            let gdim = dim - k + 1;
            let allowed = |r: usize, c: usize| -> Option<usize> {
                let p = total - (deg[r] - deg[c]);
                let ok = l.prec(sigma, l.leaf_of(c), l.leaf_of(r)) && p >= 0 && (p as usize) < gdim;
                ok.then_some(p as usize)
            };
            let ext = extend_entries(gdim, &data, allowed, cap, sigma, &face, &deg, &deg)?;
            self.steps.push(StepRecord {
                simplex: sigma.key(),
                face: face.key(),
                compatible: true,
                max_poly_degree: (0..deg.len())
                    .flat_map(|r| (0..deg.len()).map(move |c| (r, c)))
                    .map(|(r, c)| ext.get(r, c).poly_degree())
                    .max()
                    .unwrap_or(0),
            });
            self.ap.insert((sigma.clone(), face), ext);
        }
        let out = self.gauge(sigma, a)?;
        for i in 0..=dim {
            let facet = sigma.delete(i);
            if out.restrict_facet(i) != *self.get(&facet, &Simplex::empty())? {
                return Err(MixedError::GaugeMismatch { simplex: sigma.key(), facet: facet.key() });
            }
        }
        self.steps.push(StepRecord { simplex: sigma.key(), face: "∅".into(), compatible: true, max_poly_degree: 0 });
        self.ap.insert((sigma.clone(), Simplex::empty()), out);
        Ok(())
    }

    /// g = id + a′(σ, σ_0); returns g^{-1} d g + g^{-1} a(σ_0) g.
    pub fn gauge(&self, sigma: &Simplex, a: &CoefficientSystem) -> Result<FormMatrix, MixedError> {
        let k = sigma.dim() as usize;
        let deg = &self.vdeg;
        let g = FormMatrix::identity(k, deg).add(self.get(sigma, &sigma.range(0, 0))?);
        let gi = FormMatrix::unipotent_inverse(&g, deg.len() + k + 1).ok_or_else(|| MixedError::NotNilpotent(sigma.key()))?;
        let a0 = constant(k, a.get(&sigma.range(0, 0))?, deg);
        Ok(gi.mul(&g.d()).add(&gi.mul(&a0).mul(&g)))
    }

    pub fn connection(&self, sigma: &Simplex) -> Result<&FormMatrix, MixedError> {
        self.get(sigma, &Simplex::empty())
    }

    /// d a′ + a′ a′ for a′ = a′(σ, ∅).
    pub fn verify_flat(&self, sigma: &Simplex) -> Result<FormMatrix, MixedError> {
        let c = self.connection(sigma)?;
        Ok(c.d().add(&c.mul(c)))
    }

    /// Flatness, face coherence, triangularity, total degree and the horizontal degree bound.
    pub fn verify(&self, l: &LeafSystem) -> Vec<Violation> {
        let mut out = Vec::new();
        for ((tau, face), m) in &self.ap {
            let (tn, fname) = keyname(tau, face);
            let v = |check: &str, detail: String| Violation { check: check.into(), simplex: format!("({tn}, {fname})"), detail };
            if face.is_empty() {
                match self.verify_flat(tau) {
                    Ok(r) if r.is_zero() => {}
                    _ => out.push(v("NotFlat", "d a′ + a′a′ ≠ 0".into())),
                }
            }
            let k = face.len() as i64;
            if !m.degree_violations(1 - k).is_empty() {
                out.push(v("TotalDegree", format!("expected {}", 1 - k)));
            }
            let bound = m.k as i64 - if face.is_empty() { 0 } else { 1 };
            if let Some(p) = m.max_form_degree() {
                if p as i64 > bound {
                    out.push(v("DegreeBound", format!("form degree {p} > {bound}")));
                }
            }
            for (r, c, _) in m.nonzero_entries() {
                if !l.prec(tau, l.leaf_of(c), l.leaf_of(r)) {
                    out.push(v("Triangularity", format!("entry ({r},{c})")));
                }
            }
            // restriction to σ∖σ′ for σ = τ minus a vertex above max σ′
            let dom = tau.relative(face).unwrap();
            let start = if face.is_empty() { 0 } else { 1 };
            for pos in start..dom.len() {
                let sub = tau.delete(tau.position_of(dom.vertex(pos)).unwrap());
                if sub.is_empty() || (!face.is_empty() && !face.is_face_of(&sub)) {
                    continue;
                }
                match self.get(&sub, face) {
                    Ok(other) if m.k >= 1 && m.restrict_facet(pos) == *other => {}
                    Ok(_) if m.k == 0 => {}
                    _ => out.push(v("FaceCoherence", format!("restriction to {}", sub.key()))),
                }
            }
        }
        out
    }
}

/// b-representation ψ = Σ_{σ″} b(σ″) I(σ″) of a map Ω → forms ⊗ V.
#[derive(Clone, Debug, PartialEq)]
pub struct BMap {
    pub k: usize,
    pub b: BTreeMap<Simplex, FormMatrix>,
}

impl BMap {
    pub fn zero(k: usize) -> BMap {
        BMap { k, b: BTreeMap::new() }
    }

    pub fn single(k: usize, s: Simplex, m: FormMatrix) -> BMap {
        let mut b = BMap::zero(k);
        b.b.insert(s, m);
        b
    }

    pub fn add_scaled(&mut self, o: &BMap, s: &crate::rational::Q) {
        for (t, m) in &o.b {
            match self.b.get_mut(t) {
                Some(x) => x.add_scaled(m, s),
                None => {
                    self.b.insert(t.clone(), m.scale(s));
                }
            }
        }
        self.prune();
    }

    fn prune(&mut self) {
        self.b.retain(|_, m| !m.is_zero());
    }

    pub fn scale(&self, s: &crate::rational::Q) -> BMap {
        let mut r = BMap::zero(self.k);
        r.add_scaled(self, s);
        r
    }

    pub fn left_mul(&self, m: &FormMatrix) -> BMap {
        let mut r = BMap { k: self.k, b: self.b.iter().map(|(t, x)| (t.clone(), m.mul(x))).collect() };
        r.prune();
        r
    }

    pub fn d(&self) -> BMap {
        let mut r = BMap { k: self.k, b: self.b.iter().map(|(t, x)| (t.clone(), x.d())).collect() };
        r.prune();
        r
    }

    /// ψ ∘ d_Ω, using I(σ″) d_Ω = Σ K(σ″, τ) I(τ).
    pub fn then_d(&self, a: &CoefficientSystem, deg: &[i64]) -> Result<BMap, FlatError> {
        let mut r = BMap::zero(self.k);
        for (t, x) in &self.b {
            for (tau, kmat) in rewrite(a, t)? {
                if tau.is_empty() {
                    continue;
                }
                let term = x.mul(&FormMatrix::from_const(self.k, &kmat, deg, deg));
                r.add_scaled(&BMap::single(self.k, tau, term), &one());
            }
        }
        Ok(r)
    }

    pub fn restrict_facet(&self, j: usize) -> BMap {
        let mut r = BMap { k: self.k - 1, b: self.b.iter().map(|(t, x)| (t.clone(), x.restrict_facet(j))).collect() };
        r.prune();
        r
    }

    pub fn get(&self, t: &Simplex, deg: &[i64]) -> FormMatrix {
        self.b.get(t).cloned().unwrap_or_else(|| FormMatrix::zero(self.k, deg, deg))
    }

    /// Σ b(σ″) I(σ″) as a V × Ω matrix of forms.
    pub fn expand(&self, fm: &FiberModel, deg: &[i64]) -> FormMatrix {
        let mut out = FormMatrix::zero(self.k, deg, &fm.degrees);
        for (t, x) in &self.b {
            let i = FormMatrix::from_const(self.k, &fm.integration(t, deg.len()), deg, &fm.degrees);
            out.add_assign(&x.mul(&i));
        }
        out
    }
}

/// All I′(σ, σ′) in b-representation, keyed like a′.
#[derive(Clone, Debug)]
pub struct ChainMapData {
    pub ip: BTreeMap<(Simplex, Simplex), BMap>,
    pub vdeg: Vec<i64>,
}

impl ChainMapData {
    pub fn get(&self, sigma: &Simplex, face: &Simplex) -> Result<&BMap, MixedError> {
        self.ip.get(&storage_key(sigma, face)).ok_or_else(|| {
            let (a, b) = keyname(sigma, face);
            MixedError::MissingLowerData(a, b)
        })
    }

    pub fn build(
        s: &BaseComplex,
        l: &LeafSystem,
        a: &CoefficientSystem,
        mc: &MixedConnection,
        fm: &FiberModel,
        cap: usize,
    ) -> Result<ChainMapData, MixedError> {
        let mut c = ChainMapData { ip: BTreeMap::new(), vdeg: l.degrees() };
        for sigma in s.all() {
            c.build_simplex(sigma, l, a, mc, cap)?;
            c.check_chain(sigma, a, mc, fm)?;
        }
        Ok(c)
    }

    /// The right side of the recursion, giving I″(σ_{0..k−1}) on |σ_{k..l}|.
    pub fn i_doubleprime(
        &self,
        sigma: &Simplex,
        k: usize,
        a: &CoefficientSystem,
        mc: &MixedConnection,
    ) -> Result<BMap, MixedError> {
        let l = sigma.dim() as usize;
        let deg = &self.vdeg;
        let fk = l - k;
        let s1 = sign(k as i64 + 1);
        let top = sigma.range(0, k);
        let mut acc = BMap::zero(fk);
        for j in 0..k {
            acc.add_scaled(self.get(sigma, &top.delete(j))?, &sign(j as i64));
        }
        acc.add_scaled(&BMap::single(fk, top.clone(), FormMatrix::identity(fk, deg)), &s1);
        for j in 1..=k {
            let t = self.get(sigma, &sigma.range(j, k))?.left_mul(&constant(fk, a.get(&sigma.range(0, j))?, deg));
            acc.add_scaled(&t, &sign((k as i64 + 1) * (j as i64 - 1)));
        }
        let prev = self.get(sigma, &top)?;
        acc.add_scaled(&prev.left_mul(&constant(fk, a.get(&sigma.range(0, 0))?, deg)), &s1);
        acc.add_scaled(&prev.d(), &s1);
        acc.add_scaled(&prev.then_d(a, deg)?, &-one());
        let tail = self.get(&sigma.range(k, l), &Simplex::empty())?;
        acc.add_scaled(&tail.left_mul(mc.get(sigma, &top)?), &one());
        Ok(acc.scale(&s1))
    }

    fn build_simplex(
        &mut self,
        sigma: &Simplex,
        l: &LeafSystem,
        a: &CoefficientSystem,
        mc: &MixedConnection,
        cap: usize,
    ) -> Result<(), MixedError> {
        let dim = sigma.dim() as usize;
        let deg = self.vdeg.clone();
        self.ip.insert((sigma.clone(), sigma.clone()), BMap::zero(0));
        if dim == 0 {
            self.ip.insert((sigma.clone(), Simplex::empty()), BMap::single(0, sigma.clone(), FormMatrix::identity(0, &deg)));
            return Ok(());
        }
        for k in (1..=dim).rev() {
            let face = sigma.range(0, k - 1);
            let i2 = self.i_doubleprime(sigma, k, a, mc)?;
            let mut data = vec![i2];
            for i in 1..=dim - k + 1 {
                data.push(self.get(&sigma.delete(k - 1 + i), &face)?.clone());
            }
            let gdim = dim - k + 1;
            let ext = self.extend_b(sigma, &face, &data, gdim, k as i64, l, cap)?;
            self.ip.insert((sigma.clone(), face), ext);
        }
        let out = self.gauge(sigma, a, mc)?;
        for i in 0..=dim {
            let facet = sigma.delete(i);
            if out.restrict_facet(i) != *self.get(&facet, &Simplex::empty())? {
                return Err(MixedError::GaugeMismatch { simplex: sigma.key(), facet: facet.key() });
            }
        }
        self.ip.insert((sigma.clone(), Simplex::empty()), out);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_b(
        &self,
        sigma: &Simplex,
        face: &Simplex,
        data: &[BMap],
        gdim: usize,
        k: i64,
        l: &LeafSystem,
        cap: usize,
    ) -> Result<BMap, MixedError> {
        let deg = &self.vdeg;
        let mut out = BMap::zero(gdim);
        let mut faces: Vec<Simplex> = data.iter().flat_map(|b| b.b.keys().cloned()).collect();
        faces.sort();
        faces.dedup();
        for t in faces {
            let j = t.dim() as i64;
            let mats: Vec<FormMatrix> = data.iter().map(|b| b.get(&t, deg)).collect();
            let allowed = |r: usize, c: usize| -> Option<usize> {
                let (lr, lc) = (l.leaf_of(r), l.leaf_of(c));
                let p = j - k - (deg[r] - deg[c]);
                let ok = (lr == lc || l.prec(sigma, lc, lr)) && p >= 0 && (p as usize) < gdim;
                ok.then_some(p as usize)
            };
            let m = extend_entries(gdim, &mats, allowed, cap, sigma, face, deg, deg)?;
            if !m.is_zero() {
                out.b.insert(t, m);
            }
        }
        Ok(out)
    }

    /// I″(∅) = g^{-1} (d J + a(σ_0) J + J d_Ω + I(σ_0)) with J = I′(σ, σ_0).
    fn gauge(&self, sigma: &Simplex, a: &CoefficientSystem, mc: &MixedConnection) -> Result<BMap, MixedError> {
        let k = sigma.dim() as usize;
        let deg = &self.vdeg;
        let v0 = sigma.range(0, 0);
        let g = FormMatrix::identity(k, deg).add(mc.get(sigma, &v0)?);
        let gi = FormMatrix::unipotent_inverse(&g, deg.len() + k + 1).ok_or_else(|| MixedError::NotNilpotent(sigma.key()))?;
        let j = self.get(sigma, &v0)?;
        let mut acc = j.d();
        acc.add_scaled(&j.left_mul(&constant(k, a.get(&v0)?, deg)), &one());
        acc.add_scaled(&j.then_d(a, deg)?, &one());
        acc.add_scaled(&BMap::single(k, v0, FormMatrix::identity(k, deg)), &one());
        Ok(acc.left_mul(&gi))
    }

    /// I′(σ,∅) d_Ω − d I′(σ,∅) − a′(σ,∅) I′(σ,∅) on the expanded matrices.
    pub fn chain_residual(&self, sigma: &Simplex, mc: &MixedConnection, fm: &FiberModel) -> Result<FormMatrix, MixedError> {
        let e = self.get(sigma, &Simplex::empty())?.expand(fm, &self.vdeg);
        let dom = FormMatrix::from_const(e.k, &fm.d, &fm.degrees, &fm.degrees);
        let lhs = e.mul(&dom);
        let rhs = e.d().add(&mc.connection(sigma)?.mul(&e));
        Ok(lhs.sub(&rhs))
    }

    fn check_chain(&self, sigma: &Simplex, _a: &CoefficientSystem, mc: &MixedConnection, fm: &FiberModel) -> Result<(), MixedError> {
        if !self.chain_residual(sigma, mc, fm)?.is_zero() {
            return Err(MixedError::ChainIdentityViolation(sigma.key()));
        }
        Ok(())
    }

    /// b-coefficient support, degrees, I′(σ,σ) = 0 and face coherence.
    pub fn verify(&self, l: &LeafSystem) -> Vec<Violation> {
        let mut out = Vec::new();
        let deg = &self.vdeg;
        for ((tau, face), bm) in &self.ip {
            let (tn, fname) = keyname(tau, face);
            let v = |check: &str, detail: String| Violation { check: check.into(), simplex: format!("({tn}, {fname})"), detail };
            if tau == face && !bm.b.is_empty() {
                out.push(v("SelfNonzero", "I′(σ,σ) ≠ 0".into()));
            }
            let k = face.len() as i64;
            for (t, m) in &bm.b {
                if !m.degree_violations(t.dim() as i64 - k).is_empty() {
                    out.push(v("BDegree", format!("b at {}", t.key())));
                }
                for (r, c, _) in m.nonzero_entries() {
                    let (lr, lc) = (l.leaf_of(r), l.leaf_of(c));
                    if !(lr == lc || l.prec(tau, lc, lr)) {
                        out.push(v("BSupport", format!("b at {} entry ({r},{c})", t.key())));
                    }
                }
            }
            let dom = tau.relative(face).unwrap();
            let start = if face.is_empty() { 0 } else { 1 };
            for pos in start..dom.len() {
                let sub = tau.delete(tau.position_of(dom.vertex(pos)).unwrap());
                if sub.is_empty() || bm.k == 0 {
                    continue;
                }
                match self.get(&sub, face) {
                    Ok(other) if bm.restrict_facet(pos) == *other => {}
                    _ => out.push(v("FaceCoherence", format!("restriction to {}", sub.key()))),
                }
            }
            let _ = deg;
        }
        out
    }

    /// For ω tagged above max_σ h_α − ε²: the α-component of I′(σ,σ′) ω vanishes for σ′ ≠ ∅,
    /// and for σ′ = ∅ it comes from the vertex terms b_{αα}(σ,∅,v) I_α(v) alone.
    pub fn locality_check(&self, fm: &FiberModel, l: &LeafSystem) -> Vec<Violation> {
        let mut out = Vec::new();
        let Some(tags) = &fm.tags else { return out };
        let deg = &self.vdeg;
        let eps2 = l.eps2();
        for ((tau, face), bm) in &self.ip {
            let full = bm.expand(fm, deg);
            let mut vertex_only = BMap::zero(bm.k);
            for (t, m) in &bm.b {
                if t.dim() == 0 {
                    let mut mm = FormMatrix::zero(bm.k, deg, deg);
                    for (r, c, e) in m.nonzero_entries() {
                        if l.leaf_of(r) == l.leaf_of(c) {
                            mm.set(r, c, e.clone());
                        }
                    }
                    vertex_only.b.insert(t.clone(), mm);
                }
            }
            let local = vertex_only.expand(fm, deg);
            for alpha in 0..l.n_leaves() {
                let hmax = tau.vertices().iter().map(|v| l.height(alpha, *v)).max().unwrap() - &eps2;
                for w in 0..fm.dim() {
                    if tags[w] <= hmax {
                        continue;
                    }
                    for r in l.block(alpha) {
                        let want = if face.is_empty() { local.get(r, w).clone() } else { PolyForm::zero(bm.k) };
                        if *full.get(r, w) != want {
                            out.push(Violation {
                                check: "Locality".into(),
                                simplex: format!("({}, {})", tau.key(), if face.is_empty() { "∅".into() } else { face.key() }),
                                detail: format!("leaf {} on {}", l.leaves[alpha].id, fm.labels[w]),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}
