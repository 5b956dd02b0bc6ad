//! Seeded random instances: base complex, leaves with fine heights, and vertex
//! differentials a(v) = g_v a* g_v^{-1} completed by `extend`.

use crate::flat::{CoefficientSystem, FlatError};
use crate::linalg::Mat;
use crate::morse::{Leaf, LeafSystem};
use crate::rational::{q, qf, Q};
use crate::simplex::{BaseComplex, Simplex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct GenParams {
    pub max_dim: usize,
    pub max_leaves: usize,
    pub max_rank: usize,
    pub max_index: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_dim: 3, max_leaves: 6, max_rank: 3, max_index: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub maximal: Vec<Vec<u32>>,
    pub complex: BaseComplex,
    pub leaves: LeafSystem,
    pub coeffs: CoefficientSystem,
}

/// Complexes with at most 20 simplices.
fn random_complex(rng: &mut ChaCha8Rng, max_dim: usize) -> Vec<Vec<u32>> {
    let d = rng.gen_range(1..=max_dim.max(1));
    let mut shapes: Vec<Vec<Vec<u32>>> = vec![(0..=d as u32).collect::<Vec<_>>()].into_iter().map(|s| vec![s]).collect();
    match d {
        1 => {
            shapes.push(vec![vec![0, 1], vec![1, 2]]);
            shapes.push(vec![vec![0, 1], vec![1, 2], vec![0, 2]]);
            shapes.push(vec![vec![0, 2], vec![1, 2], vec![2, 3]]);
        }
        2 => {
            shapes.push(vec![vec![0, 1, 2], vec![1, 2, 3]]);
            shapes.push(vec![vec![0, 1, 2], vec![2, 3]]);
            shapes.push(vec![vec![0, 1, 3], vec![1, 2, 3]]);
        }
        _ => {}
    }
    shapes.choose(rng).unwrap().clone()
}

fn random_leaves(rng: &mut ChaCha8Rng, verts: &[u32], p: &GenParams) -> LeafSystem {
    let n = rng.gen_range(1..=p.max_leaves);
    let mut leaves = Vec::new();
    let mut heights = Vec::new();
    for i in 0..n {
        leaves.push(Leaf { id: format!("L{i}"), index: rng.gen_range(0..=p.max_index), rank: rng.gen_range(1..=p.max_rank) });
        let base = q(rng.gen_range(0..=3 * n as i64));
        // oscillation ≤ 2/5 < ε²/2 with ε = 1
        heights.push(verts.iter().map(|&v| (v, &base + qf(rng.gen_range(0..=2), 5))).collect::<BTreeMap<u32, Q>>());
    }
    LeafSystem::new(leaves, heights, q(1)).unwrap()
}

/// β ≺ α at every vertex.
fn global_prec(l: &LeafSystem, verts: &[u32], beta: usize, alpha: usize) -> bool {
    verts.iter().all(|&v| l.prec(&Simplex::of(&[v]), beta, alpha))
}

pub fn vertex_differentials(rng: &mut ChaCha8Rng, l: &LeafSystem, verts: &[u32]) -> BTreeMap<u32, Mat> {
    let n = l.dim();
    // a*: a random partial matching along globally allowed degree-one blocks
    let mut pairs = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let (a, b) = (l.leaf_of(r), l.leaf_of(c));
            if l.degree(r) == l.degree(c) + 1 && global_prec(l, verts, b, a) {
                pairs.push((r, c));
            }
        }
    }
    pairs.shuffle(rng);
    let mut used = vec![false; n];
    let mut astar = Mat::zeros(n, n);
    for (r, c) in pairs {
        if !used[r] && !used[c] && rng.gen_bool(0.7) {
            used[r] = true;
            used[c] = true;
            astar.set(r, c, q(rng.gen_range(1..=2)));
        }
    }
    let mut out = BTreeMap::new();
    for &v in verts {
        let sv = Simplex::of(&[v]);
        let mut g = Mat::identity(n);
        for r in 0..n {
            for c in 0..n {
                if l.degree(r) == l.degree(c) && l.prec(&sv, l.leaf_of(c), l.leaf_of(r)) && rng.gen_bool(0.5) {
                    g.set(r, c, q(rng.gen_range(-1..=1)));
                }
            }
        }
        let gi = g.inverse().expect("unipotent");
        out.insert(v, &(&g * &astar) * &gi);
    }
    out
}

/// The instance for `seed`; retries with derived seeds when an extension is infeasible.
pub fn instance(seed: u64, p: &GenParams) -> Generated {
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(attempt));
        let maximal = random_complex(&mut rng, p.max_dim);
        let complex = BaseComplex::build(&maximal).unwrap();
        let verts = complex.vertices();
        let leaves = random_leaves(&mut rng, &verts, p);
        let mut coeffs = CoefficientSystem::default();
        for (v, m) in vertex_differentials(&mut rng, &leaves, &verts) {
            coeffs.set(Simplex::of(&[v]), m);
        }
        match coeffs.extend_to_dim(&complex, &leaves, complex.dim() as usize, Some(&mut rng)) {
            Ok(_) => return Generated { maximal, complex, leaves, coeffs },
            Err(FlatError::Infeasible { .. }) => continue,
            Err(e) => panic!("generator: {e}"),
        }
    }
    panic!("no feasible instance for seed {seed}")
}
