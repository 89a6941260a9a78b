use forest_homology::complex::{Engine, KoszulComplexDescriptor};
use forest_homology::linalg::{rank, rank_rational, read_triples, write_triples, HomologyResult, Rational, RankOptions, SparseRationalMatrix};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn matrix() -> impl Strategy<Value = SparseRationalMatrix> {
    (1usize..9, 1usize..9).prop_flat_map(|(r, c)| {
        prop::collection::vec((0..r, 0..c, -4i64..=4, 1i64..=3), 0..20).prop_map(move |entries| {
            let triplets = entries.into_iter().map(|(i, j, n, d)| (i, j, Rational::new(BigInt::from(n), BigInt::from(d))));
            SparseRationalMatrix::from_triplets(r, c, triplets).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn rank_of_transpose(m in matrix()) {
        let opts = RankOptions::default();
        prop_assert_eq!(rank(&m, &opts).rank, rank(&m.transpose(), &opts).rank);
        prop_assert_eq!(rank(&m, &opts).rank, rank_rational(&m));
    }

    #[test]
    fn triples_round_trip(m in matrix()) {
        let mut bytes = Vec::new();
        write_triples(&m, &mut bytes).unwrap();
        let back = read_triples(bytes.as_slice(), "memory").unwrap();
        prop_assert_eq!(back, m);
    }
}

fn shuffled(rng: &mut StdRng, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

#[test]
fn betti_numbers_ignore_basis_order() {
    let engine = Engine::default();
    let mut rng = StdRng::seed_from_u64(3);
    for (m, n, s, t) in [(2, 6, 2, 3), (3, 6, 3, 3), (2, 7, 1, 3), (3, 7, 2, 2)] {
        let c = engine.compute(&KoszulComplexDescriptor::new(m, n, s, t).unwrap()).unwrap();
        let dims = c.dims();
        let perms: Vec<Vec<usize>> = dims.iter().map(|&d| shuffled(&mut rng, d)).collect();
        let mut ranks = vec![0];
        let mut moved = vec![None];
        for k in 1..dims.len() {
            let d = c.differentials[k].matrix.permuted(&perms[k - 1], &perms[k]);
            ranks.push(rank(&d, &RankOptions::default()).rank);
            moved.push(Some(d));
        }
        for k in 1..dims.len() - 1 {
            let dd = moved[k].as_ref().unwrap().mul(moved[k + 1].as_ref().unwrap()).unwrap();
            assert!(dd.is_zero());
        }
        let h = HomologyResult::from_dims_and_ranks(&dims, &ranks).unwrap();
        assert_eq!(h, c.homology, "({m}, {n}, {s}, {t})");
    }
}
