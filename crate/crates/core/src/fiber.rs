//! Finite fiber models: a cochain complex (Ω, d_Ω) with integration maps I(σ): Ω → V.

use crate::flat::{homology, CoefficientSystem, FlatError, Violation};
use crate::linalg::Mat;
use crate::morse::LeafSystem;
use crate::rational::{fmt_q, q, sign, Q};
use crate::simplex::{BaseComplex, Simplex};
use num_traits::Zero;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct FiberModel {
    pub degrees: Vec<i64>,
    pub d: Mat,
    pub integ: BTreeMap<Simplex, Mat>,
    /// Optional height of each basis element, for locality checks.
    pub tags: Option<Vec<Q>>,
    /// Human-readable names of the basis elements.
    pub labels: Vec<String>,
}

/// I(σ) d_Ω written as Σ K(σ, τ) I(τ) with constant K:
/// I(σ) d_Ω = Σ_j (−1)^j I(σ_ĵ) + Σ_j (−1)^{k(j−1)} a(σ_{0..j}) I(σ_{j..k}).
/// A vertex gives a(v) I(v). The cochain model built from this is the transpose of the CW boundary.
pub fn rewrite(a: &CoefficientSystem, sigma: &Simplex) -> Result<Vec<(Simplex, Mat)>, FlatError> {
    let k = sigma.dim() as i64;
    if k == 0 {
        return Ok(vec![(sigma.clone(), a.get(sigma)?.clone())]);
    }
    let n = a.get(sigma)?.rows;
    let mut out = Vec::new();
    for j in 0..=k as usize {
        out.push((sigma.delete(j), Mat::identity(n).scale(&sign(j as i64))));
    }
    for j in 0..=k as usize {
        out.push((sigma.range(j, k as usize), a.get(&sigma.range(0, j))?.scale(&sign(k * (j as i64 - 1)))));
    }
    Ok(out)
}

impl FiberModel {
    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn integration(&self, s: &Simplex, dim_v: usize) -> Mat {
        self.integ.get(s).cloned().unwrap_or_else(|| Mat::zeros(dim_v, self.dim()))
    }

    /// Ω = ⊕_τ V over all simplices, I(σ) the projection to the σ-summand and d_Ω
    /// determined by the integration relations. Tags: h_α(v) on vertex summands,
    /// h_α(τ_0) − 2ε² on higher ones.
    pub fn cochain_model(s: &BaseComplex, l: &LeafSystem, a: &CoefficientSystem) -> Result<FiberModel, FlatError> {
        let n = l.dim();
        let simplices: Vec<Simplex> = s.all().cloned().collect();
        let pos: BTreeMap<&Simplex, usize> = simplices.iter().enumerate().map(|(i, t)| (t, i * n)).collect();
        let dim = simplices.len() * n;
        let mut degrees = Vec::with_capacity(dim);
        let mut tags = Vec::with_capacity(dim);
        let mut labels = Vec::with_capacity(dim);
        let eps2 = l.eps2();
        for t in &simplices {
            for i in 0..n {
                degrees.push(l.degree(i) + t.dim() as i64);
                let h = l.height(l.leaf_of(i), t.vertex(0)).clone();
                tags.push(if t.dim() == 0 { h } else { h - q(2) * &eps2 });
                labels.push(format!("{}:{}", t.key(), i));
            }
        }
        let mut d = Mat::zeros(dim, dim);
        let mut integ = BTreeMap::new();
        for t in &simplices {
            let mut m = Mat::zeros(n, dim);
            for i in 0..n {
                m.set(i, pos[t] + i, q(1));
            }
            integ.insert(t.clone(), m);
            for (tau, k) in rewrite(a, t)? {
                let Some(&c0) = pos.get(&tau) else { continue };
                for (r, c, v) in k.nonzeros() {
                    *d.get_mut(pos[t] + r, c0 + c) += v;
                }
            }
        }
        Ok(FiberModel { degrees, d, integ, tags: Some(tags), labels })
    }

    /// d_Ω² = 0, degrees of I(σ), and the integration relations.
    pub fn validate(&self, s: &BaseComplex, l: &LeafSystem, a: &CoefficientSystem) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = l.dim();
        if !(&self.d * &self.d).is_zero() {
            out.push(Violation { check: "NotADifferential".into(), simplex: String::new(), detail: "d_Ω² ≠ 0".into() });
        }
        for (r, c, _) in self.d.nonzeros() {
            if self.degrees[r] != self.degrees[c] + 1 {
                out.push(Violation { check: "DegreeMismatch".into(), simplex: String::new(), detail: format!("d_Ω entry ({r},{c})") });
                break;
            }
        }
        let vdeg = l.degrees();
        for sigma in s.all() {
            let i_s = self.integration(sigma, n);
            if let Some((r, c, _)) = i_s.nonzeros().find(|(r, c, _)| vdeg[*r] - self.degrees[*c] != -(sigma.dim() as i64)) {
                out.push(Violation {
                    check: "DegreeMismatch".into(),
                    simplex: sigma.key(),
                    detail: format!("I entry ({r},{c})"),
                });
            }
            let Ok(terms) = rewrite(a, sigma) else {
                out.push(Violation { check: "MissingFaceData".into(), simplex: sigma.key(), detail: String::new() });
                continue;
            };
            let lhs = &i_s * &self.d;
            let mut rhs = Mat::zeros(n, self.dim());
            for (tau, k) in terms {
                if tau.is_empty() {
                    continue;
                }
                rhs = &rhs + &(&k * &self.integration(&tau, n));
            }
            if lhs != rhs {
                out.push(Violation {
                    check: if sigma.dim() == 0 { "VertexChainMap".into() } else { "IntegrationRelation".into() },
                    simplex: sigma.key(),
                    detail: format!("{} entries differ", (&lhs - &rhs).nonzeros().count()),
                });
            }
        }
        out
    }

    pub fn betti(&self) -> Result<BTreeMap<i64, usize>, FlatError> {
        homology(&self.d, &self.degrees)
    }

    /// I(v) is a quasi-isomorphism iff its mapping cone is acyclic.
    pub fn is_quasi_iso_at(&self, v: &Simplex, a: &CoefficientSystem, l: &LeafSystem) -> Result<bool, FlatError> {
        let n = l.dim();
        let m = self.dim();
        let f = self.integration(v, n);
        let av = a.get(v)?;
        // cone^p = Ω^{p+1} ⊕ V^p, d(ω, x) = (−d ω, f ω + a x)
        let mut d = Mat::zeros(m + n, m + n);
        let mut deg = Vec::with_capacity(m + n);
        for (r, c, x) in self.d.nonzeros() {
            d.set(r, c, -x.clone());
        }
        for (r, c, x) in f.nonzeros() {
            d.set(m + r, c, x.clone());
        }
        for (r, c, x) in av.nonzeros() {
            d.set(m + r, m + c, x.clone());
        }
        deg.extend(self.degrees.iter().map(|g| g - 1));
        deg.extend(l.degrees());
        Ok(homology(&d, &deg)?.values().all(|&b| b == 0))
    }

    /// The fiber-side locality premise: if the tag of ω exceeds max_σ h_α − ε², then
    /// I_α(σ) ω = 0 for dim σ ≥ 1 and I_β(σ) ω = 0 for β ≺_σ α.
    pub fn locality_premise(&self, s: &BaseComplex, l: &LeafSystem) -> Vec<Violation> {
        let mut out = Vec::new();
        let Some(tags) = &self.tags else { return out };
        let eps2 = l.eps2();
        let n = l.dim();
        for sigma in s.all() {
            let i_s = self.integration(sigma, n);
            for alpha in 0..l.n_leaves() {
                let hmax = sigma.vertices().iter().map(|v| l.height(alpha, *v)).max().unwrap() - &eps2;
                for w in 0..self.dim() {
                    if tags[w] <= hmax {
                        continue;
                    }
                    for beta in 0..l.n_leaves() {
                        let must_vanish = (beta == alpha && sigma.dim() >= 1) || l.prec(sigma, beta, alpha);
                        if must_vanish && l.block(beta).any(|r| !i_s.get(r, w).is_zero()) {
                            out.push(Violation {
                                check: "LocalityPremise".into(),
                                simplex: sigma.key(),
                                detail: format!(
                                    "leaf {} component nonzero on {} (tag {}) above leaf {}",
                                    l.leaves[beta].id,
                                    self.labels[w],
                                    fmt_q(&tags[w]),
                                    l.leaves[alpha].id
                                ),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::tests::leaves;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cochain_model_on_edge() {
        let s = BaseComplex::build(&[vec![0, 1]]).unwrap();
        let l = leaves(&[("b", 0, 1, &[0, 0]), ("a", 1, 1, &[5, 5])], q(1));
        let dv = Mat::from_i64(&[&[0, 0], &[1, 0]]);
        let mut a = CoefficientSystem::default();
        a.set(Simplex::of(&[0]), dv.clone());
        a.set(Simplex::of(&[1]), dv);
        a.extend_to_dim(&s, &l, 1, None::<&mut ChaCha8Rng>).unwrap();
        let fm = FiberModel::cochain_model(&s, &l, &a).unwrap();
        assert!(fm.validate(&s, &l, &a).is_empty());
        assert_eq!(fm.betti().unwrap().values().sum::<usize>(), 0);
        assert!(fm.is_quasi_iso_at(&Simplex::of(&[0]), &a, &l).unwrap());
        assert!(fm.locality_premise(&s, &l).is_empty());
    }
}
