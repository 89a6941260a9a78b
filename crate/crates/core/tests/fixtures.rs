//! Frozen reference values. Dense-oracle dimensions were recorded from
//! `oracle::dense_symmetrization_dim`; homology values were recorded from the
//! pipeline after the oracle comparison passed. Set FOREST_HOMOLOGY_BLESS=1
//! to rewrite the files.

use std::path::PathBuf;

use forest_homology::complex::{Engine, KoszulComplexDescriptor};
use forest_homology::forests::{orbit_basis, Parities};
use forest_homology::oracle::dense_symmetrization_dim;
use serde::{Deserialize, Serialize};

#[derive(Debug, PartialEq, Eq, Serialize, Deserialize)]
struct OracleDim {
    eps_m: u8,
    eps_n: u8,
    k: u8,
    s: u8,
    t: u8,
    dim: usize,
}

#[derive(Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Homology {
    eps_m: u8,
    eps_n: u8,
    s: u8,
    t: u8,
    dims: Vec<usize>,
    ranks: Vec<usize>,
    betti: Vec<usize>,
}

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn compare<T: Serialize + for<'de> Deserialize<'de> + PartialEq + std::fmt::Debug>(name: &str, actual: Vec<T>) {
    let p = path(name);
    if std::env::var_os("FOREST_HOMOLOGY_BLESS").is_some() {
        std::fs::write(&p, serde_json::to_string_pretty(&actual).unwrap() + "\n").unwrap();
        return;
    }
    let frozen: Vec<T> = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(frozen.len(), actual.len());
    for (f, a) in frozen.iter().zip(&actual) {
        assert_eq!(f, a);
    }
}

#[test]
fn dense_oracle_dimensions() {
    let mut rows = Vec::new();
    for p in Parities::all() {
        for k in 0..=5u8 {
            for s in 0..=k {
                for t in 0..=k {
                    let dim = dense_symmetrization_dim(k, s, t, p).unwrap();
                    assert_eq!(dim, orbit_basis(k, s, t, p).dim());
                    if dim > 0 {
                        rows.push(OracleDim { eps_m: p.eps_m, eps_n: p.eps_n, k, s, t, dim });
                    }
                }
            }
        }
    }
    compare("oracle_dims.json", rows);
}

#[test]
fn homology_up_to_three() {
    let engine = Engine::default();
    let mut rows = Vec::new();
    for p in Parities::all() {
        for s in 0..=3u8 {
            for t in 0..=3u8 {
                let desc = KoszulComplexDescriptor::new(2 + p.eps_m as u32, 6 + p.eps_n as u32, s, t).unwrap();
                let c = engine.compute(&desc).unwrap();
                if c.dims().iter().all(|&d| d == 0) {
                    continue;
                }
                rows.push(Homology {
                    eps_m: p.eps_m,
                    eps_n: p.eps_n,
                    s,
                    t,
                    dims: c.dims(),
                    ranks: c.ranks.iter().map(|r| r.rank).collect(),
                    betti: c.bettis(),
                });
            }
        }
    }
    compare("homology.json", rows);
}
