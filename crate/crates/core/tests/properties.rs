mod common;

use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use phylo_ag::exact::{minors, rank, rank_nullspace, Determinant, Matrix, Mono, Poly, Rat, Var};
use phylo_ag::fourier::{
    binomials_up_to_degree, inverse_transform, monomial_map, support_classes, transform_params, transform_tensor,
    GroupSpec,
};
use phylo_ag::invariants::{
    interpolate_vanishing_forms, jacobian_dimension, vanishing_check, FourierView, Jacobian, PolyMap,
    VanishingMode,
};
use phylo_ag::models::{random_rat, ModelKind, ModelSpec, ParamAssignment, RootMode};
use phylo_ag::paramap::JointMap;
use phylo_ag::tree::Tree;

/// Random rooted tree on leaves `1..=n`. Binary trees merge pairs; others
/// merge two or three subtrees at a time.
fn random_newick(n: usize, binary: bool, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    parts.shuffle(&mut rng);
    while parts.len() > 1 {
        let take = if binary || parts.len() == 2 { 2 } else { rng.random_range(2..=parts.len().min(3)) };
        let mut group = Vec::new();
        for _ in 0..take {
            let i = rng.random_range(0..parts.len());
            group.push(parts.swap_remove(i));
        }
        parts.push(format!("({})", group.join(",")));
    }
    format!("{};", parts[0])
}

fn fib(m: usize) -> usize {
    let (mut a, mut b) = (1, 1);
    for _ in 2..m {
        (a, b) = (b, a + b);
    }
    if m <= 2 {
        1
    } else {
        b
    }
}

fn rat_strategy() -> impl Strategy<Value = Rat> {
    (-30i64..=30, 1i64..=12).prop_map(|(n, d)| Rat::new(n.into(), d.into()))
}

fn poly_strategy() -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(0u32..3, 3), rat_strategy()), 0..6).prop_map(|terms| {
        let vars = ["px", "py", "pz"].map(Var::new);
        Poly::from_terms(terms.into_iter().map(|(e, c)| (Mono::from_exponents(vars.iter().copied().zip(e)), c)))
    })
}

/// Row reduction written out plainly, as an oracle.
fn naive_rank(rows: &[Vec<Rat>]) -> usize {
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = &m[i][c] / &m[r][c];
                let pivot = m[r].clone();
                for (x, p) in m[i].iter_mut().zip(&pivot) {
                    *x -= p * &f;
                }
            }
        }
        r += 1;
    }
    r
}

fn cofactor_det(m: &[Vec<Rat>]) -> Rat {
    if m.is_empty() {
        return Rat::from_integer(1.into());
    }
    let mut total = Rat::zero();
    for c in 0..m.len() {
        let sub: Vec<Vec<Rat>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, x)| x.clone()).collect()).collect();
        let term = &m[0][c] * cofactor_det(&sub);
        if c % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

fn small_matrix(rows: usize, cols: usize, code: usize) -> Vec<Vec<Rat>> {
    (0..rows)
        .map(|r| (0..cols).map(|c| Rat::from_integer((((code / 5usize.pow((r * cols + c) as u32)) % 5) as i64 - 2).into())).collect())
        .collect()
}

#[test]
fn rank_matches_oracle_exhaustively_on_small_shapes() {
    for (r, c) in [(1, 1), (1, 3), (2, 2), (2, 3), (3, 2)] {
        for code in 0..5usize.pow((r * c) as u32) {
            let m = small_matrix(r, c, code);
            let mat = Matrix::from_rows(m.clone());
            let (rk, null) = rank_nullspace(&mat);
            assert_eq!(rk, naive_rank(&m));
            assert_eq!(rk, rank(&mat));
            assert_eq!(null.len(), c - rk);
            for v in &null {
                for row in &m {
                    assert!(row.iter().zip(v).map(|(a, b)| a * b).sum::<Rat>().is_zero());
                }
            }
        }
    }
}

fn subforest_brute_force(t: &Tree) -> BTreeSet<Vec<bool>> {
    let e = t.num_edges();
    (0..1usize << e)
        .map(|m| (0..e).map(|i| m >> i & 1 == 1).collect::<Vec<bool>>())
        .filter(|set| {
            // Degree within the edge set of every node.
            let mut deg = vec![0; t.num_nodes()];
            for (i, &on) in set.iter().enumerate() {
                if on {
                    let (u, v) = t.edge(i).unwrap();
                    deg[u] += 1;
                    deg[v] += 1;
                }
            }
            (0..t.num_nodes()).all(|v| deg[v] != 1 || t.is_leaf(v))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn poly_arithmetic_is_exact(p in poly_strategy(), q in poly_strategy(), seed in any::<u64>()) {
        prop_assert_eq!(&(&p + &q) - &q, p.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: HashMap<Var, Rat> = ["px", "py", "pz"].iter().map(|n| (Var::new(n), random_rat(&mut rng))).collect();
        prop_assert_eq!((&p * &q).eval(&vals).unwrap(), p.eval(&vals).unwrap() * q.eval(&vals).unwrap());
    }

    #[test]
    fn rank_matches_oracle_randomly(rows in 1usize..=4, cols in 1usize..=4, entries in prop::collection::vec(-2i64..=2, 16)) {
        let m: Vec<Vec<Rat>> = (0..rows).map(|r| (0..cols).map(|c| Rat::from_integer(entries[r * 4 + c].into())).collect()).collect();
        prop_assert_eq!(rank(&Matrix::from_rows(m.clone())), naive_rank(&m));
    }

    #[test]
    fn determinant_matches_cofactor_expansion(n in 1usize..=5, entries in prop::collection::vec(rat_strategy(), 25)) {
        let m: Vec<Vec<Rat>> = (0..n).map(|r| entries[r * 5..r * 5 + n].to_vec()).collect();
        let mat = Matrix::from_rows(m.clone());
        let oracle = cofactor_det(&m);
        prop_assert_eq!(&minors(&mat, n).unwrap()[0], &oracle);
        prop_assert_eq!(Determinant::det(&mat), oracle);
    }

    #[test]
    fn newick_round_trip_is_idempotent(n in 2usize..9, binary in any::<bool>(), seed in any::<u64>()) {
        let t = Tree::parse_newick(&random_newick(n, binary, seed)).unwrap();
        let once = t.to_newick();
        let again = Tree::parse_newick(&once).unwrap();
        prop_assert_eq!(again.to_newick(), once);
        prop_assert_eq!(again.leaf_labels(), t.leaf_labels());
    }

    #[test]
    fn subforest_enumeration_matches_brute_force(n in 2usize..8, binary in any::<bool>(), seed in any::<u64>()) {
        let t = Tree::parse_newick(&random_newick(n, binary, seed)).unwrap();
        prop_assume!(t.num_edges() <= 12);
        let listed: BTreeSet<Vec<bool>> = t.enumerate_subforests().into_iter().map(|s| s.0).collect();
        for s in &listed {
            prop_assert!(t.is_subforest(s));
        }
        prop_assert_eq!(listed, subforest_brute_force(&t));
    }

    #[test]
    fn binary_trees_have_fibonacci_many_subforests(n in 2usize..8, seed in any::<u64>()) {
        let t = Tree::parse_newick(&random_newick(n, true, seed)).unwrap();
        prop_assert_eq!(t.enumerate_subforests().len(), fib(2 * n - 1));
    }

    #[test]
    fn fourier_round_trip(n in 1u32..4, dna in any::<bool>(), entries in prop::collection::vec(rat_strategy(), 64)) {
        let k = if dna { 4 } else { 2 };
        let group = GroupSpec::for_states(k).unwrap();
        let p: Vec<Rat> = entries[..k.pow(n)].to_vec();
        let q = transform_tensor(&p, group).unwrap();
        prop_assert_eq!(inverse_transform(&q, group).unwrap(), p);
    }
}

#[test]
fn support_equals_subforests_for_binary_trees() {
    for n in 2..=6 {
        for seed in 0..6 {
            let t = Tree::parse_newick(&random_newick(n, true, seed)).unwrap();
            let support = support_classes(&t, GroupSpec::for_states(4).unwrap());
            assert_eq!(support, t.enumerate_subforests().into_iter().collect::<BTreeSet<_>>(), "{}", t.to_newick());
        }
    }
}

fn model_zoo(seed: u64) -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for (i, n) in [3usize, 4, 5].into_iter().enumerate() {
        let nw = random_newick(n, true, seed + i as u64);
        out.push(model(&nw, ModelKind::GeneralMarkov, RootMode::Free, Some(2)));
        out.push(model(&nw, ModelKind::JcBinary, RootMode::Uniform, None));
        out.push(model(&nw, ModelKind::Kimura3, RootMode::Uniform, None));
        out.push(model(&nw, ModelKind::Homogeneous(Box::new(ModelKind::GeneralMarkov)), RootMode::Free, Some(2)));
        if n <= 4 {
            out.push(model(&nw, ModelKind::GeneralMarkov, RootMode::Free, Some(3)));
            out.push(model(&nw, ModelKind::Reversible, RootMode::Uniform, Some(3)));
            out.push(model(&nw, ModelKind::Kimura2, RootMode::Uniform, None));
        }
    }
    let nw = random_newick(4, false, seed);
    out.push(model(&nw, ModelKind::JcDna, RootMode::Uniform, None));
    out.push(model(&nw, ModelKind::GeneralMarkov, RootMode::Free, Some(2)).without_hidden_nodes());
    out
}

#[test]
fn circuit_matches_expansion_and_is_multihomogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for m in model_zoo(3) {
        let map = JointMap::new(m.clone());
        let n = map.num_coordinates();
        let sample: Vec<usize> = (0..6).map(|_| rng.random_range(0..n)).chain([0, n - 1]).collect();
        for _ in 0..20 {
            let p = ParamAssignment::random(&m.parameters(), &mut rng);
            let fast = map.eval_exact(&p).unwrap();
            for &i in &sample {
                assert_eq!(fast[i], map.coordinate(i).eval(&p.values).unwrap(), "{} {}", m.kind, map.coordinate_name(i));
            }
        }
        let homogeneous = matches!(m.kind, ModelKind::Homogeneous(_));
        for &i in &sample {
            let c = map.coordinate(i);
            if c.is_zero() {
                continue;
            }
            if !homogeneous {
                for e in 0..m.tree.num_edges() {
                    assert_eq!(c.degree_in(&m.edge_family(e)), Some(1), "{} edge {e} in {c}", m.kind);
                }
            }
            if let phylo_ag::models::RootSpec::Free(pi) = &m.root {
                assert_eq!(c.degree_in(&pi.iter().copied().collect()), Some(1));
            }
            let cc = map.circuit_op_counts(i);
            let xc = map.expanded_op_counts(i);
            assert!(cc.multiplications <= xc.multiplications, "{}: {cc:?} vs {xc:?}", m.kind);
        }
    }
}

#[test]
fn transformed_tensor_is_the_monomial_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=5 {
        let nw = random_newick(n, n % 2 == 0, n as u64);
        for kind in [ModelKind::JcBinary, ModelKind::JcDna, ModelKind::Kimura2, ModelKind::Kimura3] {
            let m = model(&nw, kind, RootMode::Uniform, None);
            let map = JointMap::new(m.clone());
            let mm = monomial_map(&m).unwrap();
            let tp = transform_params(&m).unwrap();
            let group = GroupSpec::for_states(m.k).unwrap();
            let p = ParamAssignment::random(&m.parameters(), &mut rng);
            let q = transform_tensor(&map.eval_exact(&p).unwrap(), group).unwrap();
            let labelled: BTreeSet<usize> = mm.labellings.iter().flatten().copied().collect();
            for (i, x) in q.iter().enumerate() {
                if !labelled.contains(&i) {
                    assert!(x.is_zero(), "{nw} {}: raw index {i}", m.kind);
                }
            }
            assert_eq!(mm.reindex_raw(&q), mm.eval(&tp.evaluate(&p).unwrap()).unwrap(), "{nw} {}", m.kind);
        }
    }
}

#[test]
fn binomials_vanish_symbolically() {
    for nw in [JC3, JC4] {
        let mm = monomial_map(&jc_dna(nw)).unwrap();
        let b = binomials_up_to_degree(&mm, 3).unwrap();
        assert!(!b.is_empty());
        for f in &b {
            assert!(vanishing_check(f, &mm, VanishingMode::Symbolic).unwrap().vanishes, "{f}");
        }
    }
}

#[test]
fn randomized_and_symbolic_vanishing_agree() {
    for nw in [JC3, JC4] {
        let m = jc_dna(nw);
        let mm = monomial_map(&m).unwrap();
        let map = JointMap::new(m);
        let view = FourierView::new(&map, &mm).unwrap();
        let mut forms = binomials_up_to_degree(&mm, 2).unwrap();
        forms.truncate(6);
        // Non-invariants: perturbed binomials and a plain coordinate.
        let extra: Vec<Poly> = forms.iter().map(|f| f + &Poly::named(&mm.coordinate_name(0))).collect();
        forms.extend(extra);
        forms.push(Poly::named(&mm.coordinate_name(1)));
        for f in &forms {
            let s = vanishing_check(f, &mm, VanishingMode::Symbolic).unwrap().vanishes;
            let r = vanishing_check(f, &mm, VanishingMode::randomized(3)).unwrap().vanishes;
            let sv = vanishing_check(f, &view, VanishingMode::Symbolic).unwrap().vanishes;
            let rv = vanishing_check(f, &view, VanishingMode::randomized(4)).unwrap();
            assert_eq!(s, r, "{f}");
            assert_eq!(sv, rv.vanishes, "{f}");
            assert_eq!(s, sv, "{f}");
            assert_eq!(rv.witness.is_some(), !rv.vanishes);
        }
    }
}

#[test]
fn jacobian_rank_is_stable() {
    for m in [jc_dna(JC3), jc_dna(JC4), model("(1,2,3,4);", ModelKind::GeneralMarkov, RootMode::Free, Some(2))] {
        let d = jacobian_dimension(&JointMap::new(m), 10, 17).unwrap();
        let hits = d.ranks.iter().filter(|&&r| r == d.affine_rank).count();
        assert!(hits >= 8, "{:?}", d.ranks);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let m = model(JC3, ModelKind::GeneralMarkov, RootMode::Free, Some(2));
    let map = JointMap::new(m.clone());
    let jac = Jacobian::of(&map);
    let coords: Vec<Poly> = {
        let mut seen = BTreeSet::new();
        (0..map.num_coordinates()).map(|i| map.coordinate(i).clone()).filter(|p| !p.is_zero() && seen.insert(p.to_string())).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let point: HashMap<Var, f64> = jac.params.iter().map(|&v| (v, rng.random_range(0.1..1.0))).collect();
        let exact = jac.at_f64(&point).unwrap();
        for (r, c) in coords.iter().enumerate() {
            for (j, &v) in jac.params.iter().enumerate() {
                let h = 1e-5;
                let at = |dx: f64| {
                    let mut p = point.clone();
                    *p.get_mut(&v).unwrap() += dx;
                    c.eval_f64(&|x| p.get(&x).copied()).unwrap()
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let scale = exact[r][j].abs().max(1e-3);
                assert!((fd - exact[r][j]).abs() / scale < 1e-6, "d{}/d{}: {fd} vs {}", r, v.name(), exact[r][j]);
            }
        }
    }
}

fn homogeneous_three_leaf() -> JointMap {
    JointMap::new(model(JC3, ModelKind::Homogeneous(Box::new(ModelKind::GeneralMarkov)), RootMode::Free, Some(2)))
}

#[test]
fn interpolation_is_reproducible_and_sound() {
    let map = JointMap::new(jc_dna(JC3));
    let classes = map.accumulate_classes();
    let pm = PolyMap::new((0..classes.len()).map(|i| format!("acc{i}")).collect(), classes.iter().map(|c| c.poly.clone()).collect());
    let a = interpolate_vanishing_forms(&pm, 3, 1).unwrap();
    let b = interpolate_vanishing_forms(&pm, 3, 2).unwrap();
    assert_eq!(a.forms, b.forms);
    for f in &a.forms {
        assert!(vanishing_check(f, &pm, VanishingMode::Symbolic).unwrap().vanishes);
    }

    let h = homogeneous_three_leaf();
    let all = PolyMap::select(&h, &(0..8).collect::<Vec<_>>());
    let linear = interpolate_vanishing_forms(&all, 1, 4).unwrap();
    assert_eq!(linear.forms.len(), 2);
    let span: BTreeSet<String> = linear.forms.iter().map(|f| f.to_string()).collect();
    assert_eq!(span, BTreeSet::from(["p001 - p010".to_string(), "p101 - p110".to_string()]));
    let quad_a = interpolate_vanishing_forms(&PolyMap::select(&h, &[0, 1, 3, 4, 5, 7]), 2, 8).unwrap();
    let quad_b = interpolate_vanishing_forms(&PolyMap::select(&h, &[0, 1, 3, 4, 5, 7]), 2, 9).unwrap();
    assert_eq!(quad_a.forms, quad_b.forms);
}

#[test]
fn random_trees_parse_with_expected_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in 2..9 {
        let t = Tree::parse_newick(&random_newick(n, true, rng.random())).unwrap();
        assert_eq!(t.num_leaves(), n);
        assert_eq!(t.num_edges(), 2 * n - 2);
    }
}

#[test]
fn kimura3_cells_depend_on_the_group_sum() {
    let m = model(JC3, ModelKind::Kimura3, RootMode::Uniform, None);
    let g = GroupSpec::for_states(4).unwrap();
    for t in &m.edges {
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    assert_eq!(t.cell(a, b), t.cell(g.add(a, c), g.add(b, c)));
                }
            }
        }
    }
}

#[test]
fn jc_dna_rows_and_columns() {
    let m = jc_dna(JC4);
    for t in &m.edges {
        let syms: Vec<Var> = t.symbols();
        for i in 0..4 {
            let row: Vec<Var> = (0..4).map(|j| t.cell(i, j)).collect();
            let col: Vec<Var> = (0..4).map(|j| t.cell(j, i)).collect();
            for line in [row, col] {
                assert_eq!(line.iter().filter(|&&v| v == syms[0]).count(), 1);
                assert_eq!(line.iter().filter(|&&v| v == syms[1]).count(), 3);
            }
        }
    }
}
