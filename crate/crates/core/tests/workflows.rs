//! End-to-end workflows through the numeric pipeline.

mod common;

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use phylo_ag::exact::rat::{self, rat};
use phylo_ag::exact::Rat;
use phylo_ag::invariants::{flattening_rank, variety_membership_minors, NamedVariety};
use phylo_ag::models::{parameter_count, random_stochastic, validate_stochastic, ModelKind, ParamAssignment, RootMode};
use phylo_ag::paramap::JointMap;
use phylo_ag::pipeline::{
    exact_distribution, exact_split_ranks, sample_alignment, score_splits, tv_distance, Alignment, EmpiricalTensor,
    PipelineError,
};

fn labels() -> Vec<String> {
    ["1", "2", "3", "4"].iter().map(|s| s.to_string()).collect()
}

fn to_f64(xs: &[Rat]) -> Vec<f64> {
    xs.iter().map(rat::to_f64).collect()
}

#[test]
fn identity_edges_copy_the_root() {
    for newick in [JC3, JC4, JC5] {
        let m = model(newick, ModelKind::JcBinary, RootMode::Free, None);
        let map = JointMap::new(m.clone());
        let mut p = ParamAssignment::new();
        for e in 0..m.edges.len() {
            let letter = (b'a' + e as u8) as char;
            p.set_named(&format!("{letter}0"), Rat::one());
            p.set_named(&format!("{letter}1"), Rat::zero());
        }
        p.set_named("pi0", rat(2, 7));
        p.set_named("pi1", rat(5, 7));
        let d = exact_distribution(&map, &p).unwrap();
        let last = d.len() - 1;
        assert_eq!(d[0], rat(2, 7), "{newick}");
        assert_eq!(d[last], rat(5, 7), "{newick}");
        assert!(d[1..last].iter().all(Zero::is_zero), "{newick}");
    }
}

#[test]
fn maximal_mixing_is_uniform() {
    let map = JointMap::new(jc_dna(JC4));
    let d = exact_distribution(&map, &jc_params(&[(1, 4); 6])).unwrap();
    assert!(d.iter().all(|x| *x == rat(1, 256)));
}

#[test]
fn non_stochastic_points_are_rejected_but_still_evaluate() {
    let m = jc_dna(JC3);
    let map = JointMap::new(m.clone());
    let mut p = jc_params(&[(1, 4); 4]);
    p.set_named("a0", rat(2, 1));
    p.set_named("a1", rat(-1, 3));
    assert!(!validate_stochastic(&m, &p).unwrap().is_stochastic());
    assert!(matches!(exact_distribution(&map, &p), Err(PipelineError::NotStochastic(_))));
    assert_eq!(map.eval_exact(&p).unwrap().len(), 64);
}

#[test]
fn counts_and_frequencies_are_consistent() {
    let map = JointMap::new(jc_dna(JC4));
    let p = jc_params(&[(7, 10), (3, 5), (4, 5), (9, 10), (1, 2), (2, 3)]);
    for len in [1, 17, 1000] {
        let a = sample_alignment(&map, &p, len, 3).unwrap();
        let t = EmpiricalTensor::from_alignment(&a);
        assert_eq!(t.counts.iter().sum::<u64>(), len as u64);
        assert_eq!(t.frequencies_exact().iter().sum::<Rat>(), Rat::one());
        assert!((t.frequencies().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(t.to_csv().lines().count(), 257);
    }
}

#[test]
fn fasta_round_trip_preserves_counts() {
    let map = JointMap::new(jc_dna(JC5));
    let p = jc_params(&[(7, 10), (3, 5), (4, 5), (9, 10), (1, 2), (2, 3), (5, 6), (3, 4)]);
    let a = sample_alignment(&map, &p, 250, 9).unwrap();
    let b = Alignment::from_fasta(&a.to_fasta(), 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(EmpiricalTensor::from_alignment(&a), EmpiricalTensor::from_alignment(&b));
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    (xs[xs.len() / 2 - 1] + xs[xs.len() / 2]) / 2.0
}

#[test]
fn sampling_converges() {
    let map = JointMap::new(jc_dna(JC4));
    let p = jc_params(&[(4, 5), (7, 10), (9, 10), (3, 5), (17, 20), (3, 4)]);
    let exact = exact_distribution(&map, &p).unwrap();
    let mut prev = f64::INFINITY;
    for len in [1_000, 10_000, 100_000] {
        let tvs: Vec<f64> = (0..20)
            .map(|seed| {
                let t = EmpiricalTensor::from_alignment(&sample_alignment(&map, &p, len, seed).unwrap());
                tv_distance(&t.frequencies(), &exact)
            })
            .collect();
        let m = median(tvs);
        assert!(m <= prev, "median TV {m} at L = {len} exceeds {prev}");
        prev = m;
    }
    assert!(prev < 0.05);
}

#[test]
fn exact_general_markov_scores_identify_the_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = model(JC4, ModelKind::GeneralMarkov, RootMode::Free, Some(2));
    let map = JointMap::new(m.clone());
    for _ in 0..5 {
        let p = random_stochastic(&m, &mut rng);
        let d = exact_distribution(&map, &p).unwrap();
        let ranks = exact_split_ranks(&d, &labels()).unwrap();
        assert_eq!(ranks[0], ("1,2|3,4".to_string(), 2));
        assert!(ranks[1..].iter().all(|(_, r)| *r > 2), "{ranks:?}");
        assert!(variety_membership_minors(&d, &m.tree, 2, 2).unwrap());

        let s = score_splits(&to_f64(&d), &labels(), 2).unwrap();
        assert_eq!(s.best, vec!["1,2|3,4".to_string()]);
        assert!(s.scores[0].score < 1e-12, "{:?}", s.scores);
        assert!(s.scores[1].score > 1e-6 && s.scores[2].score > 1e-6, "{:?}", s.scores);
    }
}

#[test]
fn score_is_zero_exactly_when_rank_allows() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let m = model(JC4, ModelKind::GeneralMarkov, RootMode::Free, Some(2));
    let map = JointMap::new(m.clone());
    let d = exact_distribution(&map, &random_stochastic(&m, &mut rng)).unwrap();
    let f = to_f64(&d);
    for v in NamedVariety::ALL {
        let rank = flattening_rank(&d, 2, &v.split()).unwrap();
        for r in 1..4 {
            let s = score_splits(&f, &labels(), r).unwrap();
            let score = s.scores[NamedVariety::ALL.iter().position(|&w| w == v).unwrap()].score;
            assert_eq!(score < 1e-12, rank <= r, "{v:?} rank {rank} r {r} score {score}");
        }
    }
}

#[test]
fn symmetric_star_ties() {
    let map = JointMap::new(jc_dna("(1,2,3,4);"));
    let d = exact_distribution(&map, &jc_params(&[(4, 5); 4])).unwrap();
    let s = score_splits(&to_f64(&d), &labels(), 2).unwrap();
    let (lo, hi) = s.scores.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x.score), hi.max(x.score)));
    assert!(lo > 0.0);
    assert!(hi - lo <= 1e-9 * hi, "{:?}", s.scores);
    assert_eq!(s.best.len(), 3);
}

#[test]
fn sampled_quartet_recovers_the_split() {
    let p = jc_params(&[(17, 20), (4, 5), (3, 5), (17, 20), (4, 5), (9, 10)]);
    for (newick, split) in [(JC4, "1,2|3,4"), ("((1,3),(2,4));", "1,3|2,4"), ("((4,1),(2,3));", "4,1|2,3")] {
        let map = JointMap::new(jc_dna(newick));
        let a = sample_alignment(&map, &p, 10_000, 1).unwrap();
        let t = EmpiricalTensor::from_alignment(&a);
        let s = score_splits(&t.frequencies(), &a.labels, 4).unwrap();
        assert_eq!(s.best, vec![split.to_string()], "{newick}: {:?}", s.scores);
    }
}

#[test]
fn homogeneous_count_ignores_the_tree() {
    let kind = ModelKind::Homogeneous(Box::new(ModelKind::GeneralMarkov));
    for newick in [JC3, JC4, JC5, "(1,2,3,4,5,6);"] {
        let m = model(newick, kind.clone(), RootMode::Free, Some(2));
        assert_eq!(parameter_count(&m), 6, "{newick}");
        let u = model(newick, kind.clone(), RootMode::Uniform, Some(2));
        assert_eq!(parameter_count(&u), 4, "{newick}");
    }
}

#[test]
fn general_markov_count_formula() {
    for (newick, n) in [(JC3, 3), (JC4, 4), (JC5, 5)] {
        for k in 2..=4 {
            let m = model(newick, ModelKind::GeneralMarkov, RootMode::Free, Some(k));
            assert_eq!(parameter_count(&m), (2 * n - 2) * k * k + k, "{newick} k={k}");
        }
    }
}

#[test]
fn class_sums_span_one_dimension_per_subforest() {
    use phylo_ag::invariants::linear_relations;
    for (newick, classes, span) in [(JC3, 5, 5), (JC4, 15, 13), (JC5, 51, 34)] {
        let map = JointMap::new(jc_dna(newick));
        let polys: Vec<_> = map.accumulate_classes().into_iter().map(|c| c.poly).collect();
        assert_eq!(polys.len(), classes, "{newick}");
        let (rank, relations) = linear_relations(&polys);
        assert_eq!(rank, span, "{newick}");
        assert_eq!(relations.len(), classes - span, "{newick}");
        assert_eq!(span, tree(newick).enumerate_subforests().len(), "{newick}");
    }
}
