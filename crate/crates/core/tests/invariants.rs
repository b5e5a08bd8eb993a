use std::collections::HashSet;

use limitset::arcs::{arc_counts, ImmersedLoop};
use limitset::dimension::{flow_defect, laminarity_violations, level_masses, mass_distribution, VisualParams};
use limitset::floyd::{floyd_distance, FloydParams};
use limitset::graphcore::{hashimoto_radius, nb_paths_dfs, FiniteGraphCore};
use limitset::myrberg::{pairwise_tau, separator_triple, LoxodromicStream};
use limitset::qrtree::{build_tree, select_separated, Schedule};
use limitset::words::{independent, SphereIter};
use limitset::Word;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = Word> {
    "[aAbB]{0,7}".prop_map(|s| Word::parse(&s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_counts_match_dfs(seed in 0u64..500) {
        let core = FiniteGraphCore::random_regular(6, 3, seed).unwrap();
        let counts = core.nb_path_counts(9);
        for n in 1..=9 {
            prop_assert_eq!(counts[n], nb_paths_dfs(&core, n));
        }
        let h = hashimoto_radius(&core, 1e-10).unwrap();
        prop_assert!((h.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn separated_subsets_are_separated(skip in 0usize..60, take in 1usize..80, sep in 0usize..6) {
        let words: Vec<Word> = SphereIter::new(2, 5).skip(skip).take(take).collect();
        let sel = select_separated(&words, sep);
        for i in 0..sel.len() {
            for j in i + 1..sel.len() {
                prop_assert!(sel[i].dist(&sel[j]) > sep);
            }
        }
        for w in &words {
            prop_assert!(sel.iter().any(|s| s.dist(w) <= sep));
        }
    }

    #[test]
    fn floyd_equivariance_exact(x in word(), y in word(), g in word(), lambda in 0.05f64..0.95) {
        let p = FloydParams::new(lambda, Word::identity(), 2).unwrap();
        let a = floyd_distance(&x, &y, &p, 7).unwrap();
        let b = floyd_distance(&g.mul(&x), &g.mul(&y), &p.with_basepoint(g.clone()), 7).unwrap();
        prop_assert_eq!(a.length, b.length);
        prop_assert_eq!(a.value, b.value);
    }

    #[test]
    fn floyd_basepoint_bound(x in word(), y in word(), o in "[aAbB]{0,2}", lambda in 0.05f64..0.95) {
        prop_assume!(x != y);
        let o = Word::parse(&o).unwrap();
        let p = FloydParams::new(lambda, Word::identity(), 2).unwrap();
        let a = floyd_distance(&x, &y, &p, 7).unwrap();
        let b = floyd_distance(&x, &y, &p.with_basepoint(o.clone()), 9).unwrap();
        let d = o.len() as u32;
        prop_assert!(a.length.dominated_by_shift(&b.length, d) && b.length.dominated_by_shift(&a.length, d));
    }

    #[test]
    fn separator_triples_are_independent(skip in 0usize..30) {
        let avoid: Vec<Word> = LoxodromicStream::new(2).skip(skip).take(1).collect();
        let f = separator_triple(2, 2, &avoid).unwrap();
        for i in 0..3 {
            prop_assert!(f.elements[i].len() >= 2);
            prop_assert!(independent(&f.cores[i], &avoid[0]).unwrap());
            for j in i + 1..3 {
                prop_assert!(independent(&f.cores[i], &f.cores[j]).unwrap());
            }
        }
        prop_assert!(pairwise_tau(&f.cores) <= f.tau);
    }

    #[test]
    fn positive_trees_are_laminar_and_conserve_mass(a in 2usize..5, b in 2usize..5, s in 0.1f64..2.0) {
        let positive = |l: usize, n: usize| -> Vec<Word> { SphereIter::new(2, l).filter(|w| w.letters().iter().all(|x| x.is_positive())).take(n).collect() };
        let sch = Schedule::from_families(2, 0, vec![(positive(3, a), 0, 2, Word::parse("ab").unwrap()), (positive(4, b), 0, 1, Word::parse("b").unwrap())]).unwrap();
        let t = build_tree(&sch, 3, 1 << 16).unwrap();
        let words: HashSet<&Word> = t.nodes.iter().map(|n| &n.word).collect();
        prop_assert_eq!(words.len(), t.len());
        prop_assert!(laminarity_violations(&t, sch.r).is_empty());
        let nu = mass_distribution(&t, s, &VisualParams::default());
        prop_assert!(flow_defect(&t, &nu) < 1e-12);
        for m in level_masses(&t, &nu) {
            prop_assert!((m - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn arc_counts_are_reversal_symmetric() {
    let theta = FiniteGraphCore::theta();
    let g = ImmersedLoop::new(&theta, vec![0, 3]).unwrap();
    assert_eq!(arc_counts(&theta, &g, 14), arc_counts(&theta, &g.reversed(), 14));
}
