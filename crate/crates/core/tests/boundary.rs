use forest_homology::complex::{ambient_differential, ambient_differential_chain, probe_elements, Engine, KoszulComplexDescriptor};
use forest_homology::forests::{orbit_basis, Parities};

fn desc_for(p: Parities, s: u8, t: u8) -> KoszulComplexDescriptor {
    KoszulComplexDescriptor::new(2 + p.eps_m as u32, 6 + p.eps_n as u32, s, t).unwrap()
}

#[test]
fn ambient_square_is_zero() {
    for p in Parities::all() {
        for (s, t) in [(1, 2), (2, 2), (1, 3), (2, 3), (3, 3)] {
            for k in 2..=2 * t {
                for orbit in &orbit_basis(k, s, t, p).orbits {
                    for local in 0..orbit.local_dim {
                        let x = orbit.generator(local);
                        let dd = ambient_differential_chain(&ambient_differential(&x, p).unwrap(), p).unwrap();
                        assert!(dd.is_empty(), "d(d({x})) != 0 for {p}, s={s} t={t}");
                    }
                }
            }
        }
    }
}

#[test]
fn boundary_squares_to_zero_up_to_three() {
    let engine = Engine::default();
    for p in Parities::all() {
        for s in 0..=3 {
            for t in 0..=3 {
                let c = engine.compute(&desc_for(p, s, t)).unwrap();
                let top = c.differentials.len() - 1;
                for k in 1..top {
                    let dd = c.differentials[k].matrix.mul(&c.differentials[k + 1].matrix).unwrap();
                    assert!(dd.is_zero());
                }
                println!("{p} s={s} t={t} dims={:?} betti={:?}", c.dims(), c.bettis());
            }
        }
    }
}

#[test]
fn differential_is_equivariant() {
    let engine = Engine::default();
    for p in Parities::all() {
        for (s, t) in [(1, 2), (2, 2), (1, 3), (2, 3), (3, 3), (4, 3)] {
            let desc = desc_for(p, s, t);
            for k in 1..=2 * t as usize {
                let probes = probe_elements(k as u8, s, (k as u8).saturating_sub(t));
                engine.check_equivariance(&desc, k, &probes, 40).unwrap();
            }
        }
    }
}
