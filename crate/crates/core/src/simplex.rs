//! Ordered simplicial complexes, face maps and the boundary convention of standard simplices.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimplexError {
    #[error("simplex {0:?} listed twice")]
    DuplicateSimplex(Vec<u32>),
    #[error("vertex list {0:?} is not strictly increasing")]
    NonIncreasingVertices(Vec<u32>),
    #[error("face index {index} out of range for simplex of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: i32 },
    #[error("boundary of a vertex")]
    ZeroDimensional,
    #[error("simplex {0} is not in the complex")]
    SimplexNotInComplex(Simplex),
    #[error("{face} is not a face of {simplex}")]
    NotAFace { face: Simplex, simplex: Simplex },
}

/// Strictly increasing vertex ids. The empty list is the empty simplex of dimension -1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Simplex(Vec<u32>);

impl fmt::Debug for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

impl Simplex {
    pub fn new(vertices: Vec<u32>) -> Result<Simplex, SimplexError> {
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimplexError::NonIncreasingVertices(vertices));
        }
        Ok(Simplex(vertices))
    }

    /// Panics on unsorted input; for literals in code and tests.
    pub fn of(vertices: &[u32]) -> Simplex {
        Simplex::new(vertices.to_vec()).expect("strictly increasing vertices")
    }

    pub fn empty() -> Simplex {
        Simplex(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> i32 {
        self.0.len() as i32 - 1
    }

    pub fn vertices(&self) -> &[u32] {
        &self.0
    }

    pub fn vertex(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Key used in instance files: vertex ids joined by commas.
    pub fn key(&self) -> String {
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        s.join(",")
    }

    pub fn parse_key(s: &str) -> Result<Simplex, String> {
        if s.trim().is_empty() {
            return Ok(Simplex::empty());
        }
        let v: Result<Vec<u32>, _> = s.split(',').map(|t| t.trim().parse::<u32>()).collect();
        let v = v.map_err(|e| format!("bad simplex key {s:?}: {e}"))?;
        Simplex::new(v).map_err(|e| e.to_string())
    }

    /// σ_{i_0…i_l} for increasing positions.
    pub fn face(&self, indices: &[usize]) -> Result<Simplex, SimplexError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimplexError::NonIncreasingVertices(indices.iter().map(|&i| i as u32).collect()));
        }
        let mut v = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.0.len() {
                return Err(SimplexError::IndexOutOfRange { index: i, dim: self.dim() });
            }
            v.push(self.0[i]);
        }
        Ok(Simplex(v))
    }

    /// Vertices at positions `from..=to`.
    pub fn range(&self, from: usize, to: usize) -> Simplex {
        Simplex(self.0[from..=to].to_vec())
    }

    /// Drops the vertex at position `j`.
    pub fn delete(&self, j: usize) -> Simplex {
        let mut v = self.0.clone();
        v.remove(j);
        Simplex(v)
    }

    pub fn is_face_of(&self, other: &Simplex) -> bool {
        self.0.iter().all(|v| other.0.binary_search(v).is_ok())
    }

    /// Positions of this simplex's vertices inside `other`.
    pub fn positions_in(&self, other: &Simplex) -> Option<Vec<usize>> {
        self.0.iter().map(|v| other.0.binary_search(v).ok()).collect()
    }

    pub fn position_of(&self, v: u32) -> Option<usize> {
        self.0.binary_search(&v).ok()
    }

    /// All nonempty faces, ordered by dimension then lexicographically.
    pub fn faces(&self) -> Vec<Simplex> {
        let n = self.0.len();
        let mut out: Vec<Simplex> = (1u32..(1 << n))
            .map(|mask| Simplex((0..n).filter(|i| mask >> i & 1 == 1).map(|i| self.0[i]).collect()))
            .collect();
        out.sort_by(|a, b| a.dim().cmp(&b.dim()).then(a.cmp(b)));
        out
    }

    pub fn boundary_chain(&self) -> Result<SignedFaceChain, SimplexError> {
        if self.dim() < 1 {
            return Err(SimplexError::ZeroDimensional);
        }
        let terms = (0..self.len()).map(|j| (if j % 2 == 0 { 1 } else { -1 }, self.delete(j))).collect();
        Ok(SignedFaceChain { terms })
    }

    /// |σ∖σ′|: the vertices of σ from the last vertex of σ′ onwards.
    pub fn relative(&self, sub: &Simplex) -> Result<Simplex, SimplexError> {
        if sub.is_empty() {
            return Ok(self.clone());
        }
        let pos = sub
            .positions_in(self)
            .ok_or_else(|| SimplexError::NotAFace { face: sub.clone(), simplex: self.clone() })?;
        let last = *pos.last().unwrap();
        Ok(self.range(last, self.len() - 1))
    }

    /// The vertices of `sub` followed by every vertex of `self` above them.
    pub fn initial_hull(&self, sub: &Simplex) -> Simplex {
        match sub.0.last() {
            None => self.clone(),
            Some(&m) => {
                let mut v = sub.0.clone();
                v.extend(self.0.iter().copied().filter(|&x| x > m));
                Simplex(v)
            }
        }
    }
}

/// Formal sum of signed faces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedFaceChain {
    pub terms: Vec<(i64, Simplex)>,
}

impl SignedFaceChain {
    /// Net integer coefficients after applying the boundary to every term.
    pub fn boundary_coefficients(&self) -> BTreeMap<Simplex, i64> {
        let mut acc: BTreeMap<Simplex, i64> = BTreeMap::new();
        for (s, f) in &self.terms {
            if let Ok(ch) = f.boundary_chain() {
                for (t, g) in ch.terms {
                    *acc.entry(g).or_default() += s * t;
                }
            }
        }
        acc
    }
}

/// A face-closed set of ordered simplices.
#[derive(Clone, Debug)]
pub struct BaseComplex {
    by_dim: Vec<Vec<Simplex>>,
    all: BTreeSet<Simplex>,
    maximal: Vec<Simplex>,
}

impl BaseComplex {
    pub fn build(lists: &[Vec<u32>]) -> Result<BaseComplex, SimplexError> {
        let mut given = BTreeSet::new();
        for l in lists {
            let s = Simplex::new(l.clone())?;
            if s.is_empty() {
                continue;
            }
            if !given.insert(s) {
                return Err(SimplexError::DuplicateSimplex(l.clone()));
            }
        }
        let mut all = BTreeSet::new();
        for s in &given {
            all.extend(s.faces());
        }
        let maximal: Vec<Simplex> =
            all.iter().filter(|s| !all.iter().any(|t| t.dim() > s.dim() && s.is_face_of(t))).cloned().collect();
        let top = all.iter().map(|s| s.dim()).max().unwrap_or(-1);
        let mut by_dim = vec![Vec::new(); (top + 1) as usize];
        for s in &all {
            by_dim[s.dim() as usize].push(s.clone());
        }
        Ok(BaseComplex { by_dim, all, maximal })
    }

    pub fn dim(&self) -> i32 {
        self.by_dim.len() as i32 - 1
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        self.by_dim.get(k).map_or(&[], |v| v.as_slice())
    }

    pub fn all(&self) -> impl Iterator<Item = &Simplex> {
        self.by_dim.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.all.contains(s)
    }

    pub fn maximal(&self) -> &[Simplex] {
        &self.maximal
    }

    pub fn vertices(&self) -> Vec<u32> {
        self.simplices(0).iter().map(|s| s.vertex(0)).collect()
    }

    pub fn faces_of(&self, s: &Simplex) -> Result<Vec<Simplex>, SimplexError> {
        if !self.contains(s) {
            return Err(SimplexError::SimplexNotInComplex(s.clone()));
        }
        Ok(s.faces().into_iter().filter(|f| f != s).collect())
    }

    pub fn cofaces_of(&self, s: &Simplex) -> Result<Vec<Simplex>, SimplexError> {
        if !self.contains(s) {
            return Err(SimplexError::SimplexNotInComplex(s.clone()));
        }
        Ok(self.all().filter(|t| *t != s && s.is_face_of(t)).cloned().collect())
    }

    /// Combinatorial open star: every simplex having `s` as a face, `s` included.
    pub fn open_star(&self, s: &Simplex) -> Result<BTreeSet<Simplex>, SimplexError> {
        if !self.contains(s) {
            return Err(SimplexError::SimplexNotInComplex(s.clone()));
        }
        Ok(self.all().filter(|t| s.is_face_of(t)).cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_examples() {
        let c = BaseComplex::build(&[vec![0]]).unwrap();
        assert_eq!(c.simplices(0), &[Simplex::of(&[0])]);
        let t = BaseComplex::build(&[vec![0, 1, 2]]).unwrap();
        assert_eq!(t.simplices(1).len(), 3);
        assert_eq!(t.simplices(2), &[Simplex::of(&[0, 1, 2])]);
        let h = BaseComplex::build(&[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert!(h.simplices(2).is_empty());
        assert_eq!(h.simplices(1).len(), 3);
        assert_eq!(
            BaseComplex::build(&[vec![0, 1], vec![0, 1]]).unwrap_err(),
            SimplexError::DuplicateSimplex(vec![0, 1])
        );
        assert!(matches!(BaseComplex::build(&[vec![1, 0]]), Err(SimplexError::NonIncreasingVertices(_))));
    }

    #[test]
    fn faces_and_boundary() {
        let s = Simplex::of(&[3, 5, 8, 9]);
        assert_eq!(s.face(&[0, 1, 3]).unwrap(), Simplex::of(&[3, 5, 9]));
        assert_eq!(Simplex::of(&[0, 1, 2]).face(&[0, 2]).unwrap(), Simplex::of(&[0, 2]));
        assert_eq!(Simplex::of(&[0, 1, 2]).face(&[1]).unwrap(), Simplex::of(&[1]));
        assert!(matches!(s.face(&[4]), Err(SimplexError::IndexOutOfRange { .. })));
        let b = Simplex::of(&[0, 1]).boundary_chain().unwrap();
        assert_eq!(b.terms, vec![(1, Simplex::of(&[1])), (-1, Simplex::of(&[0]))]);
        let b = Simplex::of(&[0, 1, 2]).boundary_chain().unwrap();
        assert_eq!(
            b.terms,
            vec![(1, Simplex::of(&[1, 2])), (-1, Simplex::of(&[0, 2])), (1, Simplex::of(&[0, 1]))]
        );
        assert!(b.boundary_coefficients().values().all(|&c| c == 0));
        assert_eq!(Simplex::of(&[4]).boundary_chain(), Err(SimplexError::ZeroDimensional));
    }

    #[test]
    fn stars_and_relative() {
        let h = BaseComplex::build(&[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        let st = h.open_star(&Simplex::of(&[1])).unwrap();
        assert_eq!(st.into_iter().collect::<Vec<_>>(), vec![Simplex::of(&[0, 1]), Simplex::of(&[1]), Simplex::of(&[1, 2])]);
        let t = BaseComplex::build(&[vec![0, 1, 2]]).unwrap();
        assert_eq!(t.open_star(&Simplex::of(&[0, 1, 2])).unwrap().len(), 1);
        assert_eq!(t.open_star(&Simplex::of(&[0, 1])).unwrap().len(), 2);
        assert!(t.open_star(&Simplex::of(&[7])).is_err());
        let s = Simplex::of(&[0, 1, 2, 3]);
        assert_eq!(s.relative(&Simplex::of(&[0, 1])).unwrap(), Simplex::of(&[1, 2, 3]));
        assert_eq!(s.relative(&Simplex::empty()).unwrap(), s);
        let t = Simplex::of(&[0, 1, 2]);
        assert_eq!(t.relative(&t).unwrap(), Simplex::of(&[2]));
        assert!(t.relative(&Simplex::of(&[5])).is_err());
        assert_eq!(s.initial_hull(&Simplex::of(&[0, 2])), Simplex::of(&[0, 2, 3]));
    }
}
