//! Chain groups and differentials of `HH^{m,n}_{s,t}`.
//!
//! The differential is computed on ambient generators and pushed to the
//! coinvariant bases of [`crate::forests`]. For a pair `i < j` that is an
//! edge of the first forest joining two different fibers of `β`, the term
//! removes `u_{ij}`, `x_j`, the component letter of `β(j)` and the last
//! desuspension letter (each as a derivation from the left), identifies `j`
//! with `i`, and merges the two fibers of `β`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dashmap::DashMap;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forests::{
    act_raw, chain_add, generator_word, orbit_basis, Chain, ForestPairGenerator, GroupElement, Letter, Parities,
    SignedOrbitBasis, Word,
};
use crate::linalg::{rank, rational, HomologyResult, RankOptions, RankReport, Rational, SparseRationalMatrix};

pub const CACHE_VERSION: u32 = 1;

/// `HH^{m,n}_{s,t}` with its degree bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KoszulComplexDescriptor {
    pub m: u32,
    pub n: u32,
    pub s: u8,
    pub t: u8,
}

impl KoszulComplexDescriptor {
    pub fn new(m: u32, n: u32, s: u8, t: u8) -> Result<Self> {
        if m < 1 || n < 2 {
            return Err(Error::InvalidArgument(format!("need m >= 1 and n >= 2, got m = {m}, n = {n}")));
        }
        Ok(KoszulComplexDescriptor { m, n, s, t })
    }

    pub fn parities(&self) -> Parities {
        Parities::from_dims(self.m, self.n)
    }

    /// `(m-1)s - (n-1)t`, shared by every chain group.
    pub fn internal_degree(&self) -> i64 {
        (self.m as i64 - 1) * self.s as i64 - (self.n as i64 - 1) * self.t as i64
    }

    pub fn convergent(&self) -> bool {
        self.n > 2 * self.m + 1
    }

    /// Degree in `H_*(Emb_c(R^m, R^n))` fed by level `k`.
    pub fn emb_degree(&self, k: usize) -> i64 {
        -self.internal_degree() - k as i64
    }

    /// Highest level that can carry generators (one above the support so
    /// that the top differential is visible).
    pub fn max_level(&self) -> u8 {
        if self.t == 0 {
            self.s
        } else {
            2 * self.t + 1
        }
    }

    /// `max(s, t+1) <= k <= 2t` for `s, t >= 1`; `k = 0` for `s = t = 0`.
    pub fn in_support(&self, k: usize) -> bool {
        match (self.s, self.t) {
            (0, 0) => k == 0,
            (0, _) | (_, 0) => false,
            (s, t) => self.s as usize <= 2 * t as usize && k >= (s.max(t + 1)) as usize && k <= 2 * t as usize,
        }
    }
}

/// Total degree of a generator: `m` per component of the first forest, `1`
/// per edge, `-n` per vertex, `n` per component of the second forest, `-1`
/// per desuspension.
pub fn generator_degree(x: &ForestPairGenerator, m: u32, n: u32) -> i64 {
    generator_word(x)
        .into_iter()
        .map(|l| match l {
            Letter::Component1(_) => m as i64,
            Letter::Edge1(..) | Letter::Edge2(..) => 1,
            Letter::Vertex(_) => -(n as i64),
            Letter::Component2(_) => n as i64,
            Letter::Desuspension(_) => -1,
        })
        .sum()
}

/// The differential on one ambient generator, with integer coefficients.
pub fn ambient_differential_raw(x: &ForestPairGenerator, p: Parities) -> Result<Vec<(ForestPairGenerator, i64)>> {
    let k = x.k();
    let beta = x.beta().values();
    let mut out = Vec::new();
    for a in 1..=x.s() {
        for e in x.f1().fiber_edges(a) {
            let (i, j) = (e.lo(), e.hi());
            let (bi, bj) = (beta[i as usize - 1], beta[j as usize - 1]);
            if bi == bj {
                continue;
            }
            let mut w = Word::of(x);
            w.delete(Letter::Edge1(a, e), p)?;
            w.delete(Letter::Vertex(j), p)?;
            w.delete(Letter::Component2(bj), p)?;
            w.delete(Letter::Desuspension(k), p)?;

            let vert = |v: u8| match v.cmp(&j) {
                std::cmp::Ordering::Less => v,
                std::cmp::Ordering::Equal => i,
                std::cmp::Ordering::Greater => v - 1,
            };
            let shift = |r: u8| if r > bj { r - 1 } else { r };
            let comp = |r: u8| if r == bj { shift(bi) } else { shift(r) };
            w.letters = w
                .letters
                .into_iter()
                .map(|l| match l {
                    Letter::Edge1(a, e) => Letter::Edge1(a, e.map(vert)),
                    Letter::Vertex(v) => Letter::Vertex(vert(v)),
                    Letter::Component2(r) => Letter::Component2(comp(r)),
                    Letter::Edge2(r, e) => Letter::Edge2(comp(r), e.map(vert)),
                    other => other,
                })
                .collect();
            w.alpha.remove(j as usize - 1);
            w.beta.remove(j as usize - 1);
            for r in w.beta.iter_mut() {
                *r = comp(*r);
            }
            w.c -= 1;
            out.extend(w.normalize(p));
        }
    }
    Ok(out)
}

pub fn ambient_differential(x: &ForestPairGenerator, p: Parities) -> Result<Chain> {
    let mut out = Chain::new();
    for (y, c) in ambient_differential_raw(x, p)? {
        chain_add(&mut out, y, rational(c));
    }
    Ok(out)
}

/// Linear extension of [`ambient_differential`].
pub fn ambient_differential_chain(x: &Chain, p: Parities) -> Result<Chain> {
    let mut out = Chain::new();
    for (y, c) in x {
        for (z, d) in ambient_differential_raw(y, p)? {
            chain_add(&mut out, z, c * rational(d));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ChainGroup {
    pub k: usize,
    pub basis: Arc<SignedOrbitBasis>,
}

impl ChainGroup {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialMatrix {
    /// Source level; the matrix maps `C_k` to `C_{k-1}`.
    pub k: usize,
    pub matrix: SparseRationalMatrix,
}

/// Everything computed for one descriptor.
#[derive(Clone, Debug)]
pub struct ComputedComplex {
    pub desc: KoszulComplexDescriptor,
    pub groups: Vec<ChainGroup>,
    /// `differentials[k]` maps `C_k -> C_{k-1}`; entry 0 is the zero map.
    pub differentials: Vec<DifferentialMatrix>,
    pub ranks: Vec<RankReport>,
    pub homology: HomologyResult,
}

impl ComputedComplex {
    pub fn dims(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.dim()).collect()
    }

    pub fn bettis(&self) -> Vec<usize> {
        self.homology.levels.iter().map(|l| l.betti).collect()
    }
}

type BasisKey = (Parities, u8, u8, u8);

/// Builds chain groups and differentials, memoizing bases in memory and
/// optionally on disk.
#[derive(Debug, Default)]
pub struct Engine {
    pub rank_options: RankOptions,
    cache_dir: Option<PathBuf>,
    bases: DashMap<BasisKey, Arc<SignedOrbitBasis>>,
}

#[derive(Serialize, Deserialize)]
struct CachedBasis {
    version: u32,
    basis: SignedOrbitBasis,
}

pub fn cache_file_name(p: Parities, s: u8, t: u8, k: u8) -> String {
    format!("basis-v{CACHE_VERSION}-m{}-n{}-s{s}-t{t}-k{k}.json", p.eps_m, p.eps_n)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

impl Engine {
    pub fn new(rank_options: RankOptions, cache_dir: Option<PathBuf>) -> Self {
        Engine { rank_options, cache_dir, bases: DashMap::new() }
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    fn load_cached(&self, path: &Path, key: BasisKey) -> Option<SignedOrbitBasis> {
        let bytes = fs::read(path).ok()?;
        let cached: CachedBasis = serde_json::from_slice(&bytes).ok()?;
        let mut b = cached.basis;
        if cached.version != CACHE_VERSION || (b.parities, b.s, b.t, b.k) != key {
            return None;
        }
        b.rebuild_index();
        Some(b)
    }

    /// The coinvariant basis at level `k`, built on first use.
    pub fn basis(&self, p: Parities, s: u8, t: u8, k: u8) -> Result<Arc<SignedOrbitBasis>> {
        let key = (p, s, t, k);
        if let Some(b) = self.bases.get(&key) {
            return Ok(b.clone());
        }
        let path = self.cache_dir.as_ref().map(|d| d.join(cache_file_name(p, s, t, k)));
        let basis = match path.as_deref().and_then(|path| self.load_cached(path, key)) {
            Some(b) => b,
            None => {
                let b = orbit_basis(k, s, t, p);
                if let Some(path) = &path {
                    let dir = path.parent().expect("cache file has a directory");
                    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
                    let bytes = serde_json::to_vec(&CachedBasis { version: CACHE_VERSION, basis: b.clone() })
                        .map_err(|source| Error::Json { path: path.clone(), source })?;
                    write_atomic(path, &bytes)?;
                }
                b
            }
        };
        let basis = Arc::new(basis);
        self.bases.insert(key, basis.clone());
        Ok(basis)
    }

    pub fn chain_group(&self, desc: &KoszulComplexDescriptor, k: usize) -> Result<ChainGroup> {
        let k8 = u8::try_from(k).map_err(|_| Error::InvalidArgument(format!("level {k} too large")))?;
        Ok(ChainGroup { k, basis: self.basis(desc.parities(), desc.s, desc.t, k8)? })
    }

    /// Matrix of `d: C_k -> C_{k-1}` in the coinvariant bases.
    pub fn differential(&self, desc: &KoszulComplexDescriptor, k: usize) -> Result<DifferentialMatrix> {
        let target = if k == 0 {
            None
        } else {
            Some(self.chain_group(desc, k - 1)?)
        };
        let source = self.chain_group(desc, k)?;
        let rows = target.as_ref().map_or(0, |t| t.dim());
        let Some(target) = target else {
            return Ok(DifferentialMatrix { k, matrix: SparseRationalMatrix::zeros(0, source.dim()) });
        };
        let p = desc.parities();
        let columns: Vec<Vec<(usize, Rational)>> = (0..source.dim())
            .into_par_iter()
            .map(|col| -> Result<Vec<(usize, Rational)>> {
                let x = source.basis.basis_generator(col).expect("column in range");
                let image = ambient_differential(&x, p)?;
                let v = target.basis.project(image.iter())?;
                Ok(v.into_iter().map(|(r, c)| (r as usize, c)).collect())
            })
            .collect::<Result<_>>()?;
        Ok(DifferentialMatrix { k, matrix: SparseRationalMatrix::from_columns(rows, columns)? })
    }

    /// All chain groups and differentials, with `d∘d = 0` verified exactly.
    pub fn compute(&self, desc: &KoszulComplexDescriptor) -> Result<ComputedComplex> {
        let top = desc.max_level() as usize;
        let groups = (0..=top).map(|k| self.chain_group(desc, k)).collect::<Result<Vec<_>>>()?;
        let differentials = (0..=top).map(|k| self.differential(desc, k)).collect::<Result<Vec<_>>>()?;
        for k in 1..top {
            let dd = differentials[k].matrix.mul(&differentials[k + 1].matrix)?;
            if !dd.is_zero() {
                return Err(Error::BoundaryNotSquareZero {
                    s: desc.s as usize,
                    t: desc.t as usize,
                    k: k + 1,
                    nonzero: dd.nnz(),
                });
            }
        }
        for g in &groups {
            for x in g.basis.basis_generators() {
                let deg = generator_degree(&x, desc.m, desc.n);
                if deg != desc.internal_degree() {
                    return Err(Error::InvarianceViolated(format!(
                        "generator {x} has degree {deg}, expected {}",
                        desc.internal_degree()
                    )));
                }
            }
        }
        let ranks: Vec<RankReport> = differentials.par_iter().map(|d| rank(&d.matrix, &self.rank_options)).collect();
        let dims: Vec<usize> = groups.iter().map(|g| g.dim()).collect();
        let rank_values: Vec<usize> = ranks.iter().map(|r| r.rank).collect();
        let homology = HomologyResult::from_dims_and_ranks(&dims, &rank_values)?;
        Ok(ComputedComplex { desc: *desc, groups, differentials, ranks, homology })
    }

    /// Compares `[d(g·x)]` with `[d(x)]` for the given group elements and
    /// every local monomial of every orbit at level `k` (all of them, not
    /// only the basis monomials). Returns the number of comparisons made.
    pub fn check_equivariance(
        &self,
        desc: &KoszulComplexDescriptor,
        k: usize,
        extra: &[GroupElement],
        max_per_orbit: usize,
    ) -> Result<usize> {
        if k == 0 {
            return Ok(0);
        }
        let p = desc.parities();
        let source = self.chain_group(desc, k)?;
        let target = self.chain_group(desc, k - 1)?;
        let mut count = 0;
        for orbit in &source.basis.orbits {
            let c = orbit.beta.as_surjection().codomain();
            let mut group: Vec<GroupElement> = orbit.stabilizer.clone();
            group.extend(extra.iter().filter(|g| g.sigma.len() == k && g.tau.len() == desc.s as usize && g.rho.len() == c as usize).cloned());
            for local in 0..orbit.local_dim.min(max_per_orbit) {
                let x = orbit.generator(local);
                let base = target.basis.project(ambient_differential(&x, p)?.iter())?;
                for g in &group {
                    let mut moved = Chain::new();
                    for (y, d) in act_raw(g, &x, p)? {
                        chain_add(&mut moved, y, rational(d));
                    }
                    let image = crate::complex::ambient_differential_chain(&moved, p)?;
                    let v = target.basis.project(image.iter())?;
                    if v != base {
                        return Err(Error::InvarianceViolated(format!(
                            "HH_{{{},{}}} level {k}: class of d(g·x) differs from d(x) for x = {x}, g = {g:?}",
                            desc.s, desc.t
                        )));
                    }
                    count += 1;
                }
            }
        }
        Ok(count)
    }
}

/// A few group elements that are not in any particular stabilizer: the
/// transposition `(1 2)` and the long cycles on each factor.
pub fn probe_elements(k: u8, s: u8, c: u8) -> Vec<GroupElement> {
    let cycle = |n: u8| -> Vec<u8> { (1..=n).map(|v| v % n + 1).collect() };
    let id = GroupElement::identity(k, s, c);
    let mut out = Vec::new();
    if k >= 2 {
        let mut g = id.clone();
        g.sigma.swap(0, 1);
        out.push(g);
        out.push(GroupElement { sigma: cycle(k), ..id.clone() });
    }
    if s >= 2 {
        out.push(GroupElement { tau: cycle(s), ..id.clone() });
    }
    if c >= 2 {
        out.push(GroupElement { rho: cycle(c), ..id.clone() });
    }
    if k >= 2 && s >= 2 && c >= 2 {
        out.push(GroupElement { sigma: cycle(k), tau: cycle(s), rho: cycle(c) });
    }
    out
}

/// Whether a chain is zero.
pub fn chain_is_zero(c: &Chain) -> bool {
    c.values().all(|v| v.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_labels() {
        let d = KoszulComplexDescriptor::new(1, 4, 1, 1).unwrap();
        assert_eq!(d.emb_degree(2), 1);
        assert_eq!(d.internal_degree(), -3);
        assert!(d.convergent());
        let d = KoszulComplexDescriptor::new(2, 6, 1, 1).unwrap();
        assert_eq!(d.emb_degree(2), 6 - 2 - 2);
        assert!(KoszulComplexDescriptor::new(0, 4, 1, 1).is_err());
    }

    #[test]
    fn hh11() {
        let engine = Engine::default();
        for (m, n) in [(1, 4), (1, 5), (2, 6), (2, 7)] {
            let desc = KoszulComplexDescriptor::new(m, n, 1, 1).unwrap();
            let c = engine.compute(&desc).unwrap();
            if n % 2 == 0 {
                assert_eq!(c.dims(), vec![0, 0, 1, 0]);
                assert_eq!(c.bettis(), vec![0, 0, 1, 0]);
            } else {
                assert!(c.dims().iter().all(|&d| d == 0));
            }
        }
    }

    #[test]
    fn trivial_complex() {
        let engine = Engine::default();
        let desc = KoszulComplexDescriptor::new(1, 4, 0, 0).unwrap();
        let c = engine.compute(&desc).unwrap();
        assert_eq!(c.dims(), vec![1]);
        assert_eq!(c.bettis(), vec![1]);
        for (s, t) in [(0, 1), (2, 0)] {
            let desc = KoszulComplexDescriptor::new(1, 4, s, t).unwrap();
            assert!(engine.compute(&desc).unwrap().dims().iter().all(|&d| d == 0));
        }
    }

    #[test]
    fn hh12_levels() {
        // The top level is (L_4 ⊗ L_2 ⊗ L_2) over Σ_2 ≀ Σ_2; swapping the two
        // blocks acts by (-1)^(n-1) on L_2 ⊗ L_2, which kills it for n odd.
        let engine = Engine::default();
        for (m, n) in [(1, 4), (1, 5), (2, 4), (2, 5)] {
            let desc = KoszulComplexDescriptor::new(m, n, 1, 2).unwrap();
            let c = engine.compute(&desc).unwrap();
            let nonzero: Vec<usize> = c.dims().iter().enumerate().filter(|(_, &d)| d > 0).map(|(k, _)| k).collect();
            let expect = if n % 2 == 0 { vec![3, 4] } else { vec![3] };
            assert_eq!(nonzero, expect, "(m, n) = ({m}, {n}): {:?}", c.dims());
        }
    }
}
