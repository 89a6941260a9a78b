use forest_homology::arnold::basis_len;
use forest_homology::forests::{
    act, act_chain, enumerate_hat_surjections, enumerate_surjections, ForestPairGenerator, GroupElement, HatSurjection,
    Parities, Surjection,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn local_dim(alpha: &Surjection, beta: &HatSurjection) -> usize {
    alpha.fibers().iter().chain(beta.as_surjection().fibers().iter()).map(|f| basis_len(f.len() as u8)).product()
}

fn perms(n: u8) -> Vec<Vec<u8>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in perms(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n);
            out.push(q);
        }
    }
    out
}

fn all_elements(k: u8, s: u8, c: u8) -> Vec<GroupElement> {
    let mut out = Vec::new();
    for sigma in perms(k) {
        for tau in perms(s) {
            for rho in perms(c) {
                out.push(GroupElement::new(sigma.clone(), tau.clone(), rho.clone()).unwrap());
            }
        }
    }
    out
}

fn check(g: &GroupElement, h: &GroupElement, x: &ForestPairGenerator, p: Parities) {
    let lhs = act(&g.compose(h), x, p).unwrap();
    let rhs = act_chain(g, &act(h, x, p).unwrap(), p).unwrap();
    assert_eq!(lhs, rhs, "g = {g:?}, h = {h:?}, x = {x}, {p}");
}

#[test]
fn action_is_functorial_for_small_k() {
    let mut cases = 0;
    for k in 2..=3u8 {
        for s in 1..=k {
            for c in 1..=k / 2 {
                let group = all_elements(k, s, c);
                for alpha in enumerate_surjections(k, s) {
                    for beta in enumerate_hat_surjections(k, c) {
                        for idx in 0..local_dim(&alpha, &beta) {
                            let x = ForestPairGenerator::from_local_index(&alpha, &beta, idx);
                            for p in Parities::all() {
                                for g in &group {
                                    for h in &group {
                                        check(g, h, &x, p);
                                        cases += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    assert!(cases > 1000);
}

#[test]
fn identity_acts_trivially() {
    for alpha in enumerate_surjections(4, 2) {
        for beta in enumerate_hat_surjections(4, 2) {
            for idx in 0..local_dim(&alpha, &beta) {
                let x = ForestPairGenerator::from_local_index(&alpha, &beta, idx);
                let y = act(&GroupElement::identity(4, 2, 2), &x, Parities::new(1, 1)).unwrap();
                assert_eq!(y.len(), 1);
                assert_eq!(y.keys().next(), Some(&x));
            }
        }
    }
}

fn random_element(rng: &mut StdRng, k: u8, s: u8, c: u8) -> GroupElement {
    let mut shuffled = |n: u8| {
        let mut v: Vec<u8> = (1..=n).collect();
        v.shuffle(rng);
        v
    };
    let (sigma, tau, rho) = (shuffled(k), shuffled(s), shuffled(c));
    GroupElement::new(sigma, tau, rho).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn action_is_functorial(k in 2u8..=5, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let s = rng.gen_range(1..=k);
        let c = rng.gen_range(1..=k / 2);
        let alphas = enumerate_surjections(k, s);
        let betas = enumerate_hat_surjections(k, c);
        let alpha = alphas.choose(&mut rng).unwrap();
        let beta = betas.choose(&mut rng).unwrap();
        let x = ForestPairGenerator::from_local_index(alpha, beta, rng.gen_range(0..local_dim(alpha, beta)));
        let g = random_element(&mut rng, k, s, c);
        let h = random_element(&mut rng, k, s, c);
        let p = Parities::all()[rng.gen_range(0..4)];
        check(&g, &h, &x, p);
    }
}
