//! Critical leaves, heights, the scale ε and the derived orders ≺_σ.

use crate::linalg::Mat;
use crate::rational::{q, Q};
use crate::simplex::{BaseComplex, Simplex};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorseError {
    #[error("unknown leaf {0:?}")]
    UnknownLeaf(String),
    #[error("leaf {leaf:?} has no height at vertex {vertex}")]
    MissingHeight { leaf: String, vertex: u32 },
    #[error("leaf {0:?} has rank 0")]
    ZeroRank(String),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("leaf id {0:?} listed twice")]
    DuplicateLeaf(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Leaf {
    pub id: String,
    pub index: u32,
    pub rank: usize,
}

/// Leaves with per-vertex heights. Heights are affine over each simplex.
#[derive(Clone, Debug)]
pub struct LeafSystem {
    pub leaves: Vec<Leaf>,
    heights: Vec<BTreeMap<u32, Q>>,
    pub epsilon: Q,
    offsets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FinenessViolation {
    pub simplex: String,
    pub leaf: String,
    pub oscillation: String,
    pub bound: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderViolation {
    pub simplex: String,
    pub kind: String,
    pub leaves: Vec<String>,
}

impl LeafSystem {
    pub fn new(leaves: Vec<Leaf>, heights: Vec<BTreeMap<u32, Q>>, epsilon: Q) -> Result<LeafSystem, MorseError> {
        if epsilon <= q(0) {
            return Err(MorseError::NonPositiveEpsilon);
        }
        for (i, l) in leaves.iter().enumerate() {
            if l.rank == 0 {
                return Err(MorseError::ZeroRank(l.id.clone()));
            }
            if leaves[..i].iter().any(|m| m.id == l.id) {
                return Err(MorseError::DuplicateLeaf(l.id.clone()));
            }
        }
        assert_eq!(leaves.len(), heights.len());
        let mut offsets = Vec::with_capacity(leaves.len() + 1);
        let mut acc = 0;
        for l in &leaves {
            offsets.push(acc);
            acc += l.rank;
        }
        offsets.push(acc);
        Ok(LeafSystem { leaves, heights, epsilon, offsets })
    }

    /// Every leaf must have a height at every vertex of the complex.
    pub fn check_heights(&self, s: &BaseComplex) -> Result<(), MorseError> {
        for (a, l) in self.leaves.iter().enumerate() {
            for v in s.vertices() {
                if !self.heights[a].contains_key(&v) {
                    return Err(MorseError::MissingHeight { leaf: l.id.clone(), vertex: v });
                }
            }
        }
        Ok(())
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_index(&self, id: &str) -> Result<usize, MorseError> {
        self.leaves.iter().position(|l| l.id == id).ok_or_else(|| MorseError::UnknownLeaf(id.to_string()))
    }

    pub fn height(&self, leaf: usize, v: u32) -> &Q {
        &self.heights[leaf][&v]
    }

    pub fn heights_of(&self, leaf: usize) -> &BTreeMap<u32, Q> {
        &self.heights[leaf]
    }

    pub fn eps2(&self) -> Q {
        &self.epsilon * &self.epsilon
    }

    /// Total dimension of V.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Basis positions of V_α.
    pub fn block(&self, leaf: usize) -> std::ops::Range<usize> {
        self.offsets[leaf]..self.offsets[leaf + 1]
    }

    pub fn leaf_of(&self, basis: usize) -> usize {
        self.offsets.partition_point(|&o| o <= basis) - 1
    }

    /// Degree (Morse index) of a basis vector.
    pub fn degree(&self, basis: usize) -> i64 {
        self.leaves[self.leaf_of(basis)].index as i64
    }

    pub fn degrees(&self) -> Vec<i64> {
        (0..self.dim()).map(|i| self.degree(i)).collect()
    }

    pub fn validate(&self, s: &BaseComplex) -> Vec<FinenessViolation> {
        let bound = self.eps2() / q(2);
        let mut out = Vec::new();
        for (a, l) in self.leaves.iter().enumerate() {
            for sigma in s.maximal() {
                let hs: Vec<&Q> = sigma.vertices().iter().map(|v| self.height(a, *v)).collect();
                let max = hs.iter().max().unwrap();
                let min = hs.iter().min().unwrap();
                let osc = *max - *min;
                if osc >= bound {
                    out.push(FinenessViolation {
                        simplex: sigma.key(),
                        leaf: l.id.clone(),
                        oscillation: crate::rational::fmt_q(&osc),
                        bound: crate::rational::fmt_q(&bound),
                    });
                }
            }
        }
        out
    }

    /// α ≺_σ β: the height of β exceeds that of α by more than 2ε² somewhere on σ.
    pub fn prec(&self, sigma: &Simplex, alpha: usize, beta: usize) -> bool {
        let two = q(2) * self.eps2();
        sigma.vertices().iter().any(|v| self.height(beta, *v) - self.height(alpha, *v) > two)
    }

    pub fn prec_by_id(&self, sigma: &Simplex, alpha: &str, beta: &str) -> Result<bool, MorseError> {
        Ok(self.prec(sigma, self.leaf_index(alpha)?, self.leaf_index(beta)?))
    }

    pub fn check_partial_order(&self, sigma: &Simplex) -> Vec<OrderViolation> {
        let n = self.n_leaves();
        let id = |i: usize| self.leaves[i].id.clone();
        let mut out = Vec::new();
        for a in 0..n {
            if self.prec(sigma, a, a) {
                out.push(OrderViolation { simplex: sigma.key(), kind: "reflexive".into(), leaves: vec![id(a)] });
            }
            for b in 0..n {
                if a < b && self.prec(sigma, a, b) && self.prec(sigma, b, a) {
                    out.push(OrderViolation { simplex: sigma.key(), kind: "symmetric".into(), leaves: vec![id(a), id(b)] });
                }
                for c in 0..n {
                    if self.prec(sigma, a, b) && self.prec(sigma, b, c) && !self.prec(sigma, a, c) {
                        out.push(OrderViolation {
                            simplex: sigma.key(),
                            kind: "intransitive".into(),
                            leaves: vec![id(a), id(b), id(c)],
                        });
                    }
                }
            }
        }
        out
    }

    pub fn check_refinement(&self, sigma: &Simplex, face: &Simplex) -> Vec<OrderViolation> {
        let n = self.n_leaves();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.prec(face, a, b) && !self.prec(sigma, a, b) {
                    out.push(OrderViolation {
                        simplex: sigma.key(),
                        kind: format!("not refining {}", face.key()),
                        leaves: vec![self.leaves[a].id.clone(), self.leaves[b].id.clone()],
                    });
                }
            }
        }
        out
    }

    /// Blocks (α←β) of a strictly increasing endomorphism of End-degree `k` on σ.
    pub fn allowed_blocks(&self, sigma: &Simplex, k: i64) -> Vec<(usize, usize)> {
        let n = self.n_leaves();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.prec(sigma, b, a) && self.leaves[a].index as i64 == self.leaves[b].index as i64 + k {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Blocks permitted in the coefficient a(σ) of a simplex of dimension m.
    pub fn allowed_blocks_chain(&self, sigma: &Simplex) -> Vec<(usize, usize)> {
        self.allowed_blocks(sigma, 1 - sigma.dim() as i64)
    }

    pub fn grading_operator(&self) -> Mat {
        let mut m = Mat::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            m.set(i, i, q(self.degree(i)));
        }
        m
    }

    pub fn height_operator(&self, v: u32) -> Mat {
        let mut m = Mat::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            m.set(i, i, self.height(self.leaf_of(i), v).clone());
        }
        m
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rational::qf;

    pub fn leaves(table: &[(&str, u32, usize, &[i64])], eps: Q) -> LeafSystem {
        let ls = table.iter().map(|(id, i, r, _)| Leaf { id: id.to_string(), index: *i, rank: *r }).collect();
        let hs = table
            .iter()
            .map(|(_, _, _, h)| h.iter().enumerate().map(|(v, x)| (v as u32, q(*x))).collect())
            .collect();
        LeafSystem::new(ls, hs, eps).unwrap()
    }

    #[test]
    fn fineness() {
        let edge = BaseComplex::build(&[vec![0, 1]]).unwrap();
        assert!(leaves(&[("a", 0, 1, &[3, 3])], q(1)).validate(&edge).is_empty());
        let v = leaves(&[("a", 0, 1, &[0, 1])], q(1)).validate(&edge);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].bound, "1/2");
        assert!(leaves(&[("a", 0, 1, &[0, 1])], q(2)).validate(&edge).is_empty());
    }

    #[test]
    fn orders() {
        let s = Simplex::of(&[0]);
        let l = leaves(&[("a", 0, 1, &[0]), ("b", 0, 1, &[3]), ("c", 0, 1, &[2])], q(1));
        assert!(l.prec(&s, 0, 1));
        assert!(!l.prec(&s, 0, 2));
        assert!(!l.prec(&s, 0, 0));
        assert_eq!(l.prec_by_id(&s, "zz", "a"), Err(MorseError::UnknownLeaf("zz".into())));
        let chain = leaves(&[("a", 0, 1, &[0]), ("b", 0, 1, &[3]), ("c", 0, 1, &[6])], q(1));
        assert!(chain.check_partial_order(&s).is_empty());
        assert!(chain.prec(&s, 0, 2));
        let e = leaves(&[("a", 0, 1, &[0, 0]), ("b", 0, 1, &[2, 3])], qf(1, 1));
        assert!(e.check_refinement(&Simplex::of(&[0, 1]), &Simplex::of(&[1])).is_empty());
        assert!(e.prec(&Simplex::of(&[0, 1]), 0, 1) && !e.prec(&Simplex::of(&[0]), 0, 1));
    }

    #[test]
    fn blocks() {
        let l = leaves(&[("a0", 0, 1, &[0, 0]), ("a1", 1, 1, &[5, 5])], q(1));
        assert_eq!(l.allowed_blocks_chain(&Simplex::of(&[0])), vec![(1, 0)]);
        assert!(l.allowed_blocks_chain(&Simplex::of(&[0, 1])).is_empty());
        assert_eq!(l.leaf_of(1), 1);
        assert_eq!(l.degrees(), vec![0, 1]);
    }
}
