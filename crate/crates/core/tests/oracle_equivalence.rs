use forest_homology::forests::{orbit_basis, Parities};
use forest_homology::oracle::dense_symmetrization_dim;

#[test]
fn orbit_dims_match_dense_symmetrization() {
    for k in 0..=5u8 {
        for s in 0..=k {
            for t in 0..=k {
                for p in Parities::all() {
                    let dense = dense_symmetrization_dim(k, s, t, p).unwrap();
                    let orbit = orbit_basis(k, s, t, p).dim();
                    println!("k={k} s={s} t={t} {p}: dense={dense} orbit={orbit}");
                    assert_eq!(dense, orbit, "k={k} s={s} t={t} {p}");
                }
            }
        }
    }
}
