//! Partitions of unity, the barycentric self-map φ̄, and the pulled-back family
//! a′_glob(σ) = φ̄* a′(σ, ∅) with the assembled chain map.
//!
//! On a simplex σ with chart x_1..x_k the partition is φ_v = N_v / Q with Q = Σ_v N_v,
//! so every pulled-back form is stored as a numerator over a power of Q.

use crate::fiber::FiberModel;
use crate::flat::{holonomy_on_homology, homology, CoefficientSystem, FlatError, Violation};
use crate::formmat::FormMatrix;
use crate::forms::{FormError, PolyForm};
use crate::mixed::{ChainMapData, MixedConnection, MixedError};
use crate::morse::LeafSystem;
use crate::rational::{q, Q};
use crate::simplex::{BaseComplex, Simplex};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;

/// The profile B with φ_v ∝ B(x_v).
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// B(t) = t²(3 − 2t), so B′(0) = 0.
    Smoothstep,
    /// B(t) = t; φ̄ is the identity and first-order matching generally fails.
    Linear,
}

#[derive(Clone, Debug)]
pub enum PartitionSpec {
    Profile(Profile),
    /// Per maximal simplex, a polynomial φ_v for each of its vertices.
    Explicit(BTreeMap<Simplex, BTreeMap<u32, PolyForm>>),
}

impl PartitionSpec {
    pub fn from_json(v: &Value) -> Result<PartitionSpec, String> {
        match v.get("kind").and_then(Value::as_str) {
            None | Some("default") | Some("smoothstep") => Ok(PartitionSpec::Profile(Profile::Smoothstep)),
            Some("linear") => Ok(PartitionSpec::Profile(Profile::Linear)),
            Some("explicit") => {
                let phi = v.get("phi").and_then(Value::as_object).ok_or("explicit partition needs \"phi\"")?;
                let mut out = BTreeMap::new();
                for (key, per) in phi {
                    let s = Simplex::parse_key(key)?;
                    let per = per.as_object().ok_or("phi entries must be objects")?;
                    let mut m = BTreeMap::new();
                    for (vk, f) in per {
                        let vert: u32 = vk.parse().map_err(|_| format!("bad vertex {vk:?}"))?;
                        m.insert(vert, PolyForm::from_json(f).map_err(|e: FormError| e.to_string())?);
                    }
                    out.insert(s, m);
                }
                Ok(PartitionSpec::Explicit(out))
            }
            Some(other) => Err(format!("unknown partition kind {other:?}")),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            PartitionSpec::Profile(Profile::Smoothstep) => serde_json::json!({"kind": "smoothstep"}),
            PartitionSpec::Profile(Profile::Linear) => serde_json::json!({"kind": "linear"}),
            PartitionSpec::Explicit(m) => {
                let phi: serde_json::Map<String, Value> = m
                    .iter()
                    .map(|(s, per)| (s.key(), Value::Object(per.iter().map(|(v, f)| (v.to_string(), f.to_json())).collect())))
                    .collect();
                serde_json::json!({"kind": "explicit", "phi": phi})
            }
        }
    }
}

fn profile(p: &Profile, t: &PolyForm) -> PolyForm {
    match p {
        Profile::Linear => t.clone(),
        Profile::Smoothstep => {
            let t2 = t.wedge(t);
            t2.scale(&q(3)).sub(&t2.wedge(t).scale(&q(2)))
        }
    }
}

/// φ_v|σ = num[i] / q for the i-th vertex of σ.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPartition {
    pub num: Vec<PolyForm>,
    pub q: PolyForm,
}

#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub local: BTreeMap<Simplex, LocalPartition>,
}

impl PartitionOfUnity {
    pub fn build(s: &BaseComplex, spec: &PartitionSpec) -> Result<PartitionOfUnity, String> {
        let mut local = BTreeMap::new();
        for sigma in s.all() {
            let k = sigma.dim() as usize;
            let lp = match spec {
                PartitionSpec::Profile(p) => {
                    let num: Vec<PolyForm> = (0..=k).map(|i| profile(p, &PolyForm::var(k, i))).collect();
                    let mut qq = PolyForm::zero(k);
                    for n in &num {
                        qq.add_assign(n);
                    }
                    LocalPartition { num, q: qq }
                }
                PartitionSpec::Explicit(m) => {
                    let top = s
                        .maximal()
                        .iter()
                        .find(|t| sigma.is_face_of(t))
                        .ok_or_else(|| format!("{sigma} lies in no maximal simplex"))?;
                    let per = m.get(top).ok_or_else(|| format!("no partition on {top}"))?;
                    let pos = sigma.positions_in(top).unwrap();
                    let num = sigma
                        .vertices()
                        .iter()
                        .map(|v| per.get(v).map(|f| f.restrict(&pos)).ok_or_else(|| format!("no φ_{v} on {top}")))
                        .collect::<Result<Vec<_>, _>>()?;
                    LocalPartition { num, q: PolyForm::one(k) }
                }
            };
            local.insert(sigma.clone(), lp);
        }
        Ok(PartitionOfUnity { local })
    }

    /// Σφ = 1, star support, agreement on shared faces, and dφ_v = 0 on {x_v = 0}.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let v = |check: &str, simplex: &Simplex, detail: String| Violation { check: check.into(), simplex: simplex.key(), detail };
        for (sigma, lp) in &self.local {
            let mut sum = PolyForm::zero(lp.q.k);
            for n in &lp.num {
                sum.add_assign(n);
            }
            if sum != lp.q {
                out.push(v("PartitionSum", sigma, "Σ φ_v ≠ 1".into()));
            }
            for (j, n) in lp.num.iter().enumerate() {
                if sigma.dim() == 0 {
                    continue;
                }
                let on_face = n.restrict_facet(j);
                if !on_face.is_zero() {
                    out.push(v("StarSupport", sigma, format!("φ_{} ≠ 0 on the opposite facet", sigma.vertex(j))));
                }
                // first-order flatness: d(N_v / Q) = (Q dN_v − N_v dQ)/Q² vanishes on {x_v = 0}
                let num = lp.q.wedge(&n.d()).sub(&n.wedge(&lp.q.d()));
                if !coeffs_vanish_on_facet(&num, j) {
                    out.push(v("PartitionFirstOrder", sigma, format!("dφ_{} ≠ 0 on {{x = 0}}", sigma.vertex(j))));
                }
            }
            if sigma.dim() >= 1 {
                for j in 0..=sigma.dim() as usize {
                    let face = sigma.delete(j);
                    let restricted = LocalPartition {
                        num: (0..lp.num.len()).filter(|&i| i != j).map(|i| lp.num[i].restrict_facet(j)).collect(),
                        q: lp.q.restrict_facet(j),
                    };
                    if Some(&restricted) != self.local.get(&face) {
                        out.push(v("PartitionFaceMismatch", sigma, format!("restriction to {}", face.key())));
                    }
                }
            }
        }
        out
    }

    /// φ̄ at a point of |σ| given in barycentric coordinates.
    pub fn phibar(&self, sigma: &Simplex, point: &[Q]) -> Vec<Q> {
        let lp = &self.local[sigma];
        let chart = &point[1..];
        let qv = lp.q.eval0(chart);
        lp.num.iter().map(|n| n.eval0(chart) / &qv).collect()
    }
}

/// Every coefficient polynomial of `f` vanishes on the facet {x_j = 0}; dx components are kept.
pub fn coeffs_vanish_on_facet(f: &PolyForm, j: usize) -> bool {
    let mut parts: BTreeMap<u32, PolyForm> = BTreeMap::new();
    for ((e, m), c) in &f.terms {
        parts.entry(*m).or_insert_with(|| PolyForm::zero(f.k)).add_term(e.clone(), 0, c.clone());
    }
    parts.values().all(|p| p.restrict_facet(j).is_zero())
}

/// num / Q^pow.
#[derive(Clone, Debug)]
pub struct RatMatrix {
    pub num: FormMatrix,
    pub pow: u32,
}

fn scalar_left(f: &PolyForm, m: &FormMatrix) -> FormMatrix {
    let mut diag = FormMatrix::zero(m.k, &m.rowdeg, &m.rowdeg);
    for i in 0..m.rows() {
        diag.set(i, i, f.clone());
    }
    diag.mul(m)
}

/// Pullback data for one simplex.
pub struct Chart<'a> {
    lp: &'a LocalPartition,
    k: usize,
    /// Numerators of dφ_i in the chart: Q dN_i − N_i dQ.
    dnum: Vec<PolyForm>,
    qpow: std::cell::RefCell<Vec<PolyForm>>,
}

impl<'a> Chart<'a> {
    pub fn new(lp: &'a LocalPartition) -> Chart<'a> {
        let k = lp.q.k;
        let dq = lp.q.d();
        let dnum = (1..=k).map(|i| lp.q.wedge(&lp.num[i].d()).sub(&lp.num[i].wedge(&dq))).collect();
        Chart { lp, k, dnum, qpow: std::cell::RefCell::new(vec![PolyForm::one(k)]) }
    }

    fn qp(&self, n: u32) -> PolyForm {
        let mut c = self.qpow.borrow_mut();
        while c.len() <= n as usize {
            let next = c.last().unwrap().wedge(&self.lp.q);
            c.push(next);
        }
        c[n as usize].clone()
    }

    /// Terms of φ̄* f, each with the power of Q in its denominator.
    fn pull_terms(&self, f: &PolyForm) -> Vec<(PolyForm, u32)> {
        let mut out = Vec::new();
        for ((e, m), c) in &f.terms {
            let mut t = PolyForm::constant(self.k, c.clone());
            let mut pow = 0u32;
            for i in 0..self.k {
                for _ in 0..e[i] {
                    t = t.wedge(&self.lp.num[i + 1]);
                }
                pow += e[i] as u32;
                if m >> i & 1 == 1 {
                    pow += 2;
                }
            }
            for i in 0..self.k {
                if m >> i & 1 == 1 {
                    t = t.wedge(&self.dnum[i]);
                }
            }
            out.push((t, pow));
        }
        out
    }

    /// φ̄* m over a common power of Q.
    pub fn pullback(&self, m: &FormMatrix) -> RatMatrix {
        let per: Vec<(usize, usize, Vec<(PolyForm, u32)>)> = m.nonzero_entries().map(|(r, c, e)| (r, c, self.pull_terms(e))).collect();
        let pow = per.iter().flat_map(|(_, _, t)| t.iter().map(|x| x.1)).max().unwrap_or(0);
        let mut num = FormMatrix::zero(self.k, &m.rowdeg, &m.coldeg);
        for (r, c, terms) in per {
            let mut acc = PolyForm::zero(self.k);
            for (t, p) in terms {
                acc.add_assign(&t.wedge(&self.qp(pow - p)));
            }
            num.set(r, c, acc);
        }
        RatMatrix { num, pow }
    }

    /// Numerator of d A + A A over Q^{2p}.
    pub fn curvature(&self, a: &RatMatrix) -> FormMatrix {
        let aa = a.num.mul(&a.num);
        if a.pow == 0 {
            return a.num.d().add(&aa);
        }
        let dq = self.lp.q.d().scale(&q(a.pow as i64));
        let da = scalar_left(&self.lp.q, &a.num.d()).sub(&scalar_left(&dq, &a.num));
        scalar_left(&self.qp(a.pow - 1), &da).add(&aa)
    }

    /// Numerator of E D − d E − A E over Q^{p+r+1}, for E = e.num/Q^r and A = a.num/Q^p.
    pub fn chain_residual(&self, e: &RatMatrix, a: &RatMatrix, dmat: &FormMatrix) -> FormMatrix {
        let (p, r) = (a.pow, e.pow);
        let ed = e.num.mul(dmat);
        // d(E) numerator over Q^{r+1}
        let de = scalar_left(&self.lp.q, &e.num.d()).sub(&scalar_left(&self.lp.q.d().scale(&q(r as i64)), &e.num));
        let ae = a.num.mul(&e.num);
        let lhs = scalar_left(&self.qp(p + 1), &ed);
        let rhs = scalar_left(&self.qp(p), &de).add(&scalar_left(&self.lp.q, &ae));
        lhs.sub(&rhs)
    }
}

fn restrict_rat(m: &RatMatrix, j: usize) -> RatMatrix {
    RatMatrix { num: m.num.restrict_facet(j), pow: m.pow }
}

/// x/Q^p = y/Q^r on a common chart.
fn rat_eq(x: &RatMatrix, y: &RatMatrix, ch: &Chart) -> bool {
    let (a, b) = (x.pow, y.pow);
    let m = a.max(b);
    scalar_left(&ch.qp(m - a), &x.num) == scalar_left(&ch.qp(m - b), &y.num)
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub check: String,
    pub passed: bool,
    pub failures: Vec<String>,
}

impl CheckLine {
    fn new(check: &str, failures: Vec<String>) -> CheckLine {
        CheckLine { check: check.into(), passed: failures.is_empty(), failures }
    }
}

pub struct GlobalSuperconnection {
    pub a: BTreeMap<Simplex, RatMatrix>,
}

/// a′_glob(σ) = φ̄* a′(σ, ∅) on every simplex of dimension ≥ 1.
pub fn pullback_global(s: &BaseComplex, mc: &MixedConnection, pu: &PartitionOfUnity) -> Result<GlobalSuperconnection, MixedError> {
    let mut a = BTreeMap::new();
    for sigma in s.all() {
        let ch = Chart::new(&pu.local[sigma]);
        a.insert(sigma.clone(), ch.pullback(mc.connection(sigma)?));
    }
    Ok(GlobalSuperconnection { a })
}

/// (i) flatness per simplex, (ii) C⁰ agreement on facets, (iii) first-order normal matching.
pub fn verify_global(s: &BaseComplex, mc: &MixedConnection, pu: &PartitionOfUnity, g: &GlobalSuperconnection) -> Vec<CheckLine> {
    let mut flat = Vec::new();
    let mut c0 = Vec::new();
    let mut first = Vec::new();
    for sigma in s.all() {
        let lp = &pu.local[sigma];
        let ch = Chart::new(lp);
        let a = &g.a[sigma];
        if !ch.curvature(a).is_zero() {
            flat.push(sigma.key());
        }
        if sigma.dim() == 0 {
            continue;
        }
        for j in 0..=sigma.dim() as usize {
            let face = sigma.delete(j);
            let fch = Chart::new(&pu.local[&face]);
            if !rat_eq(&restrict_rat(a, j), &g.a[&face], &fch) {
                c0.push(format!("{} on {}", sigma.key(), face.key()));
            }
            // D = a′(σ) − ρ* a′(τ) with ρ the vertex retraction onto τ. Since dφ̄ maps normals at τ
            // into Tτ, φ̄*D must vanish on τ in every component, normal ones included.
            let target = if j == 0 { 0 } else { j - 1 };
            let f: Vec<usize> = (0..=sigma.dim() as usize).map(|i| if i < j { i } else if i == j { target } else { i - 1 }).collect();
            let Ok(own) = mc.connection(sigma) else { continue };
            let Ok(theirs) = mc.connection(&face) else { continue };
            let diff = own.sub(&theirs.vertex_map_pullback(sigma.dim() as usize, &f));
            let pulled = ch.pullback(&diff);
            let bad = pulled.num.nonzero_entries().any(|(_, _, e)| !coeffs_vanish_on_facet(e, j));
            if bad {
                first.push(format!("{} across {}", sigma.key(), face.key()));
            }
        }
    }
    vec![CheckLine::new("Flatness", flat), CheckLine::new("C0Matching", c0), CheckLine::new("FirstOrderMatching", first)]
}

/// I_glob(σ) = Σ φ̄* b(σ, ∅, σ″) I(σ″), checked against I_glob d_Ω = (d + a′_glob) I_glob and across facets.
pub fn assemble_and_verify_i(
    s: &BaseComplex,
    cm: &ChainMapData,
    fm: &FiberModel,
    pu: &PartitionOfUnity,
    g: &GlobalSuperconnection,
) -> Result<Vec<CheckLine>, MixedError> {
    let mut chain = Vec::new();
    let mut c0 = Vec::new();
    let mut glob = BTreeMap::new();
    for sigma in s.all() {
        let ch = Chart::new(&pu.local[sigma]);
        let e = cm.get(sigma, &Simplex::empty())?.expand(fm, &cm.vdeg);
        let eg = ch.pullback(&e);
        let dmat = FormMatrix::from_const(e.k, &fm.d, &fm.degrees, &fm.degrees);
        if !ch.chain_residual(&eg, &g.a[sigma], &dmat).is_zero() {
            chain.push(sigma.key());
        }
        glob.insert(sigma.clone(), eg);
    }
    for sigma in s.all() {
        for j in 0..sigma.len() {
            if sigma.dim() == 0 {
                break;
            }
            let face = sigma.delete(j);
            let fch = Chart::new(&pu.local[&face]);
            if !rat_eq(&restrict_rat(&glob[sigma], j), &glob[&face], &fch) {
                c0.push(format!("{} on {}", sigma.key(), face.key()));
            }
        }
    }
    Ok(vec![CheckLine::new("ChainIdentity", chain), CheckLine::new("IC0Matching", c0)])
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiIsoReport {
    pub fiber_betti: BTreeMap<i64, usize>,
    pub vertex_betti: BTreeMap<String, BTreeMap<i64, usize>>,
    pub mismatches: Vec<String>,
    pub holonomy: Vec<(String, bool)>,
    pub passed: bool,
}

fn nonzero(b: &BTreeMap<i64, usize>) -> BTreeMap<i64, usize> {
    b.iter().filter(|(_, &v)| v > 0).map(|(k, v)| (*k, *v)).collect()
}

/// Betti(Ω, d_Ω) = Betti(V, a(v)) at every vertex and trivial homology holonomy on every 2-simplex.
pub fn quasi_iso_ranks(fm: &FiberModel, a: &CoefficientSystem, s: &BaseComplex, l: &LeafSystem) -> Result<QuasiIsoReport, FlatError> {
    let fiber_betti = nonzero(&fm.betti()?);
    let mut vertex_betti = BTreeMap::new();
    let mut mismatches = Vec::new();
    for v in s.simplices(0) {
        let b = nonzero(&homology(a.get(v)?, &l.degrees())?);
        if b != fiber_betti {
            mismatches.push(format!("vertex {}: {:?} vs {:?}", v.key(), b, fiber_betti));
        }
        if !fm.is_quasi_iso_at(v, a, l)? {
            mismatches.push(format!("I({}) is not a quasi-isomorphism", v.key()));
        }
        vertex_betti.insert(v.key(), b);
    }
    let mut holonomy = Vec::new();
    if s.dim() >= 2 {
        for t in s.simplices(2) {
            let h = holonomy_on_homology(a, t)?;
            holonomy.push((t.key(), h.identity));
        }
    }
    let passed = mismatches.is_empty() && holonomy.iter().all(|h| h.1);
    Ok(QuasiIsoReport { fiber_betti, vertex_betti, mismatches, holonomy, passed })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{instance, GenParams};
    use crate::rational::qf;

    #[test]
    fn default_partition_basics() {
        let s = BaseComplex::build(&[vec![0, 1, 2]]).unwrap();
        let pu = PartitionOfUnity::build(&s, &PartitionSpec::Profile(Profile::Smoothstep)).unwrap();
        assert!(pu.validate().is_empty());
        let e = Simplex::of(&[0, 1]);
        assert_eq!(pu.phibar(&e, &[qf(1, 2), qf(1, 2)]), vec![qf(1, 2), qf(1, 2)]);
        assert_eq!(pu.phibar(&Simplex::of(&[0, 1, 2]), &[q(0), q(1), q(0)]), vec![q(0), q(1), q(0)]);
        let lin = PartitionOfUnity::build(&s, &PartitionSpec::Profile(Profile::Linear)).unwrap();
        assert!(lin.validate().iter().any(|v| v.check == "PartitionFirstOrder"));
    }

    #[test]
    fn random_instances_smooth() {
        let p = GenParams { max_dim: 2, max_leaves: 3, max_rank: 2, max_index: 2 };
        let mut linear_failed = false;
        for seed in 0..6 {
            let g = instance(seed, &p);
            let mc = MixedConnection::build(&g.complex, &g.leaves, &g.coeffs, 8).unwrap();
            let fm = FiberModel::cochain_model(&g.complex, &g.leaves, &g.coeffs).unwrap();
            let cm = ChainMapData::build(&g.complex, &g.leaves, &g.coeffs, &mc, &fm, 8).unwrap();
            let pu = PartitionOfUnity::build(&g.complex, &PartitionSpec::Profile(Profile::Smoothstep)).unwrap();
            let gs = pullback_global(&g.complex, &mc, &pu).unwrap();
            for line in verify_global(&g.complex, &mc, &pu, &gs) {
                assert!(line.passed, "seed {seed}: {line:?}");
            }
            for line in assemble_and_verify_i(&g.complex, &cm, &fm, &pu, &gs).unwrap() {
                assert!(line.passed, "seed {seed}: {line:?}");
            }
            let lin = PartitionOfUnity::build(&g.complex, &PartitionSpec::Profile(Profile::Linear)).unwrap();
            let gl = pullback_global(&g.complex, &mc, &lin).unwrap();
            let lines = verify_global(&g.complex, &mc, &lin, &gl);
            assert!(lines[0].passed && lines[1].passed);
            linear_failed |= !lines[2].passed;
        }
        assert!(linear_failed);
    }
}
