//! Property tests for the module invariants.

use ftsc::cli::validate;
use ftsc::fiber::FiberModel;
use ftsc::flat::{edge_transport, homology, igusa_export, CoefficientSystem, CwBoundary};
use ftsc::formmat::FormMatrix;
use ftsc::forms::{extend_from_boundary, PolyForm};
use ftsc::gen::{self, GenParams};
use ftsc::instance::Instance;
use ftsc::linalg::Mat;
use ftsc::mixed::{ChainMapData, MixedConnection};
use ftsc::rational::{q, qf, Q};
use ftsc::simplex::{BaseComplex, Simplex};
use ftsc::smoothing::{Chart, PartitionOfUnity, PartitionSpec, Profile};
use ftsc::wk;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn coeff() -> impl Strategy<Value = Q> {
    (-4i64..=4, 1i64..=3).prop_map(|(n, d)| qf(n, d))
}

/// Forms on Δ_k of polynomial degree ≤ 3, optionally without the top form degree.
fn form(k: usize, no_top: bool) -> impl Strategy<Value = PolyForm> {
    prop::collection::vec((prop::collection::vec(0u16..=3, k), 0u32..(1 << k), coeff()), 0..6).prop_map(move |terms| {
        let mut f = PolyForm::zero(k);
        for (e, m, c) in terms {
            let deg: u16 = e.iter().sum();
            if deg > 3 || (no_top && k > 0 && m.count_ones() as usize == k) {
                continue;
            }
            f.add_term(e, m, c);
        }
        f
    })
}

fn form_pair() -> impl Strategy<Value = (usize, PolyForm, PolyForm)> {
    (1usize..=3).prop_flat_map(|k| (Just(k), form(k, false), form(k, false)))
}

fn face_of(k: usize) -> impl Strategy<Value = Vec<usize>> {
    subsequence((0..=k).collect::<Vec<_>>(), 1..=k + 1)
}

/// d(ω∧η) assembled from homogeneous parts of ω.
fn leibniz_rhs(w: &PolyForm, e: &PolyForm) -> PolyForm {
    let mut out = PolyForm::zero(w.k);
    for p in w.form_degrees() {
        let wp = w.part(p);
        out.add_assign(&wp.d().wedge(e));
        let t = wp.wedge(&e.d());
        out.add_assign(&if p % 2 == 0 { t } else { t.neg() });
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn d_squares_to_zero((_k, w, _e) in form_pair()) {
        prop_assert!(w.d().d().is_zero());
    }

    #[test]
    fn graded_leibniz((_k, w, e) in form_pair()) {
        prop_assert_eq!(w.wedge(&e).d(), leibniz_rhs(&w, &e));
    }

    #[test]
    fn restriction_commutes((face, w, e) in form_pair().prop_flat_map(|(k, w, e)| (face_of(k), Just(w), Just(e)))) {
        prop_assert_eq!(w.d().restrict(&face), w.restrict(&face).d());
        prop_assert_eq!(w.wedge(&e).restrict(&face), w.restrict(&face).wedge(&e.restrict(&face)));
    }

    #[test]
    fn extension_round_trip((k, w) in (1usize..=3).prop_flat_map(|k| (Just(k), form(k, true)))) {
        let data: Vec<PolyForm> = (0..=k).map(|j| w.restrict_facet(j)).collect();
        let x = extend_from_boundary(k, &data, 8).unwrap();
        for (j, f) in data.iter().enumerate() {
            prop_assert_eq!(&x.restrict_facet(j), f);
        }
    }

    #[test]
    fn poincare_homotopy((k, w, apex) in (1usize..=3).prop_flat_map(|k| (Just(k), form(k, false), 0..=k))) {
        let mut p = vec![q(0); k];
        if apex > 0 {
            p[apex - 1] = q(1);
        }
        let lhs = w.poincare_contract(apex).d().add(&w.d().poincare_contract(apex));
        prop_assert_eq!(lhs, w.sub(&PolyForm::constant(k, w.eval0(&p))));
    }

    #[test]
    fn face_maps_compose(
        (s, i, j) in subsequence((0u32..8).collect::<Vec<_>>(), 1..=6)
            .prop_flat_map(|v| {
                let n = v.len();
                (Just(v), subsequence((0..n).collect::<Vec<_>>(), 1..=n))
            })
            .prop_flat_map(|(v, i)| {
                let m = i.len();
                (Just(v), Just(i), subsequence((0..m).collect::<Vec<_>>(), 1..=m))
            })
    ) {
        let sigma = Simplex::of(&s);
        let lhs = sigma.face(&i).unwrap().face(&j).unwrap();
        let composed: Vec<usize> = j.iter().map(|&x| i[x]).collect();
        prop_assert_eq!(lhs, sigma.face(&composed).unwrap());
    }

    #[test]
    fn boundary_of_boundary(v in subsequence((0u32..9).collect::<Vec<_>>(), 3..=7)) {
        let b = Simplex::of(&v).boundary_chain().unwrap().boundary_coefficients();
        prop_assert!(b.values().all(|&c| c == 0));
    }

    #[test]
    fn wk_face_compatibility(
        (k, face, y) in (1usize..=4)
            .prop_flat_map(|k| (Just(k), face_of(k)))
            .prop_flat_map(|(k, f)| {
                let l = f.len();
                (Just(k), Just(f), prop::collection::vec(1i64..=9, l))
            })
    ) {
        let total: i64 = y.iter().sum();
        let y: Vec<Q> = y.iter().map(|&a| qf(a, total)).collect();
        let pushed = wk::face_map(k, &face, &wk::wk_eval_exact(&y));
        let restricted = wk::wk_eval_exact(&wk::face_map(k, &face, &y));
        prop_assert_eq!(pushed, restricted);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wk_height_monotone((k, seed) in (1usize..=4, any::<u64>())) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x0 = wk::random_start(&mut rng, k);
        let t = wk::flow(&x0, false, &wk::FlowParams::default()).unwrap();
        prop_assert!(t.max_height_drop() <= 1e-9);
        prop_assert!(wk::lyapunov_rate(&x0) >= 0.0);
    }

    #[test]
    fn star_is_monotone(seed in 0u64..1000) {
        let g = gen::instance(seed, &GenParams::default());
        for tau in g.complex.all() {
            let big = g.complex.open_star(tau).unwrap();
            for sigma in tau.faces() {
                prop_assert!(g.complex.open_star(&sigma).unwrap().is_superset(&big));
            }
        }
    }

    #[test]
    fn leaf_order_properties(seed in 0u64..1000) {
        let g = gen::instance(seed, &GenParams::default());
        let l = &g.leaves;
        prop_assert!(l.validate(&g.complex).is_empty());
        for sigma in g.complex.all() {
            prop_assert!(l.check_partial_order(sigma).is_empty());
            if sigma.len() > 1 {
                for j in 0..sigma.len() {
                    prop_assert!(l.check_refinement(sigma, &sigma.delete(j)).is_empty());
                }
            }
            for e in -2..=2 {
                for (a, b) in l.allowed_blocks(sigma, e) {
                    let gap = sigma.vertices().iter().any(|&v| l.height(a, v) - l.height(b, v) > l.eps2() * q(2));
                    prop_assert!(gap);
                }
            }
        }
    }

    /// Generated systems are flat; a random single-entry perturbation is seen identically by both routes.
    #[test]
    fn flatness_iff_boundary_square(seed in 0u64..1000, pick in any::<u64>(), delta in 1i64..=3) {
        let g = gen::instance(seed, &GenParams::default());
        let n = g.leaves.dim();
        let both = |a: &CoefficientSystem| {
            let cw = CwBoundary::new(a, &g.complex, n).unwrap().squares_to_zero();
            let res = g.complex.all().all(|s| a.residual(s).unwrap().is_zero());
            (cw, res)
        };
        prop_assert_eq!(both(&g.coeffs), (true, true));
        let keys: Vec<Simplex> = g.coeffs.coeffs.keys().cloned().collect();
        let s = &keys[(pick % keys.len() as u64) as usize];
        let mut bad = g.coeffs.clone();
        let idx = (pick >> 16) as usize % (n * n);
        let m = bad.coeffs.get_mut(s).unwrap();
        *m.get_mut(idx / n, idx % n) += q(delta);
        let (cw, res) = both(&bad);
        prop_assert_eq!(cw, res);
    }

    #[test]
    fn igusa_iff_flat(seed in 0u64..1000, perturb in any::<bool>(), pick in any::<u64>()) {
        let g = gen::instance(seed, &GenParams::default());
        let mut a = g.coeffs.clone();
        if perturb {
            let keys: Vec<Simplex> = a.coeffs.keys().cloned().collect();
            let s = keys[(pick % keys.len() as u64) as usize].clone();
            let n = g.leaves.dim();
            let idx = (pick >> 16) as usize % (n * n);
            *a.coeffs.get_mut(&s).unwrap().get_mut(idx / n, idx % n) += q(1);
        }
        let flat = g.complex.all().all(|s| a.residual(s).unwrap().is_zero());
        let igusa = g.complex.maximal().iter().all(|m| igusa_export(&a, m).unwrap().check().is_empty());
        prop_assert_eq!(flat, igusa);
    }

    #[test]
    fn extension_and_transport(seed in 0u64..1000) {
        let g = gen::instance(seed, &GenParams::default());
        prop_assert!(g.coeffs.validate(&g.complex, &g.leaves).is_empty());
        for e in g.complex.simplices(1) {
            prop_assert!(edge_transport(&g.coeffs, e).is_ok());
        }
    }

    #[test]
    fn homology_conjugation_invariant(seed in 0u64..1000, entries in prop::collection::vec(-2i64..=2, 40)) {
        let g = gen::instance(seed, &GenParams::default());
        let l = &g.leaves;
        let n = l.dim();
        let mut t = Mat::identity(n);
        let mut it = entries.iter().cycle();
        for r in 0..n {
            for c in 0..r {
                if l.degree(r) == l.degree(c) {
                    t.set(r, c, q(*it.next().unwrap()));
                }
            }
        }
        let ti = t.inverse().unwrap();
        for v in g.complex.simplices(0) {
            let a = g.coeffs.get(v).unwrap();
            let conj = &(&t * a) * &ti;
            prop_assert_eq!(homology(a, &l.degrees()).unwrap(), homology(&conj, &l.degrees()).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mixed_invariants(seed in 0u64..1000) {
        let g = gen::instance(seed, &GenParams { max_dim: 2, max_leaves: 3, max_rank: 2, max_index: 2 });
        let mc = MixedConnection::build(&g.complex, &g.leaves, &g.coeffs, 8).unwrap();
        prop_assert!(mc.verify(&g.leaves).is_empty());
        prop_assert!(mc.steps.iter().all(|s| s.compatible));
        let fm = FiberModel::cochain_model(&g.complex, &g.leaves, &g.coeffs).unwrap();
        let cm = ChainMapData::build(&g.complex, &g.leaves, &g.coeffs, &mc, &fm, 8).unwrap();
        prop_assert!(cm.verify(&g.leaves).is_empty());
        for s in g.complex.all() {
            prop_assert!(cm.chain_residual(s, &mc, &fm).unwrap().is_zero());
        }
    }

    /// Curvature of φ̄*A equals φ̄*(dA + AA), cross-multiplied by powers of the denominator.
    #[test]
    fn pullback_preserves_curvature(
        (k, entries) in (1usize..=2).prop_flat_map(|k| (Just(k), prop::collection::vec(form(k, false), 4)))
    ) {
        let verts: Vec<u32> = (0..=k as u32).collect();
        let s = BaseComplex::build(&[verts.clone()]).unwrap();
        let pu = PartitionOfUnity::build(&s, &PartitionSpec::Profile(Profile::Smoothstep)).unwrap();
        let lp = &pu.local[&Simplex::of(&verts)];
        let ch = Chart::new(lp);
        let deg = [0i64, 1];
        let mut a = FormMatrix::zero(k, &deg, &deg);
        for (i, f) in entries.into_iter().enumerate() {
            a.set(i / 2, i % 2, f);
        }
        let pa = ch.pullback(&a);
        let curv = ch.curvature(&pa);
        let pc = ch.pullback(&a.d().add(&a.mul(&a)));
        let qpow = |n: u32| (0..n).fold(PolyForm::one(k), |acc, _| acc.wedge(&lp.q));
        let times = |f: &PolyForm, m: &FormMatrix| {
            let mut out = m.clone();
            for r in 0..2 {
                for c in 0..2 {
                    out.set(r, c, f.wedge(m.get(r, c)));
                }
            }
            out
        };
        prop_assert_eq!(times(&qpow(pc.pow), &curv), times(&qpow(2 * pa.pow), &pc.num));
    }

    #[test]
    fn partition_preserves_faces(seed in 0u64..1000, w in prop::collection::vec(1i64..=5, 4)) {
        let g = gen::instance(seed, &GenParams::default());
        let pu = PartitionOfUnity::build(&g.complex, &PartitionSpec::Profile(Profile::Smoothstep)).unwrap();
        prop_assert!(pu.validate().is_empty());
        for sigma in g.complex.all() {
            let n = sigma.len();
            for j in 0..n {
                if n == 1 {
                    break;
                }
                // a point on the facet x_j = 0
                let tot: i64 = (0..n).filter(|&i| i != j).map(|i| w[i % 4]).sum();
                let p: Vec<Q> = (0..n).map(|i| if i == j { q(0) } else { qf(w[i % 4], tot) }).collect();
                let img = pu.phibar(sigma, &p);
                prop_assert_eq!(&img[j], &q(0));
                prop_assert_eq!(img.iter().fold(q(0), |a, b| a + b), q(1));
            }
        }
    }

    #[test]
    fn reports_are_deterministic(seed in 0u64..1000) {
        let inst = Instance::from_generated(&gen::instance(seed, &GenParams::default()));
        let again = Instance::from_str(&inst.to_json_string()).unwrap();
        prop_assert_eq!(validate(&inst).to_json_deterministic(), validate(&again).to_json_deterministic());
    }
}
