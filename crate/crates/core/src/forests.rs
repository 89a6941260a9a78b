//! Pairs of decorated forests, the signed action of `Σ_k × Σ_s × Σ_{k-t}`,
//! and the orbit decomposition of the chain groups.
//!
//! A generator at level `k` is a surjection `α: {1..k} -> {1..s}` and a
//! surjection `β: {1..k} -> {1..k-t}` with fibers of size at least two, each
//! fiber carrying an admissible monomial. Signs come from the Koszul rule on
//! the generator word (see [`generator_word`]).
//!
//! Chain groups are coinvariants. They are computed orbit by orbit: the
//! orbits of index pairs `(α, β)` are classified by their meet matrix
//! `M[a][r] = |α⁻¹(a) ∩ β⁻¹(r)|` up to row and column permutations, and the
//! local space of a representative is divided by the relations `h·e - e` for
//! stabilizer generators `h`.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arnold::{basis_len, straighten_edges, AdmissibleMonomial, EdgeLetter};
use crate::error::{Error, Result};
use crate::linalg::{normalize_sparse, rational, Echelon, Rational};

/// Parities of `m` and `n`; nothing else about the dimensions enters the
/// complexes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Parities {
    pub eps_m: u8,
    pub eps_n: u8,
}

impl Parities {
    pub fn new(eps_m: u8, eps_n: u8) -> Self {
        Parities { eps_m: eps_m & 1, eps_n: eps_n & 1 }
    }

    pub fn from_dims(m: u32, n: u32) -> Self {
        Parities::new((m % 2) as u8, (n % 2) as u8)
    }

    pub fn all() -> [Parities; 4] {
        [Parities::new(0, 0), Parities::new(0, 1), Parities::new(1, 0), Parities::new(1, 1)]
    }
}

impl fmt::Display for Parities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}n{}", self.eps_m, self.eps_n)
    }
}

/// A surjection `{1..k} -> {1..codomain}`, stored as its values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Surjection {
    codomain: u8,
    values: Vec<u8>,
}

impl Surjection {
    pub fn new(codomain: u8, values: Vec<u8>) -> Result<Self> {
        let mut hit = vec![false; codomain as usize];
        for &v in &values {
            if v == 0 || v > codomain {
                return Err(Error::InvalidGenerator(format!("value {v} outside 1..{codomain}")));
            }
            hit[v as usize - 1] = true;
        }
        if hit.iter().any(|h| !h) {
            return Err(Error::InvalidGenerator(format!("{values:?} is not onto 1..{codomain}")));
        }
        Ok(Surjection { codomain, values })
    }

    pub fn domain(&self) -> u8 {
        self.values.len() as u8
    }

    pub fn codomain(&self) -> u8 {
        self.codomain
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Value at the 1-based vertex `v`.
    pub fn at(&self, v: u8) -> u8 {
        self.values[v as usize - 1]
    }

    /// Fibers in codomain order, each sorted ascending.
    pub fn fibers(&self) -> Vec<Vec<u8>> {
        fibers_of(&self.values, self.codomain as usize)
    }
}

fn fibers_of(values: &[u8], codomain: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new(); codomain];
    for (i, &v) in values.iter().enumerate() {
        out[v as usize - 1].push(i as u8 + 1);
    }
    out
}

/// A surjection all of whose fibers have at least two elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HatSurjection(Surjection);

impl HatSurjection {
    pub fn new(codomain: u8, values: Vec<u8>) -> Result<Self> {
        let s = Surjection::new(codomain, values)?;
        if s.fibers().iter().any(|f| f.len() < 2) {
            return Err(Error::InvalidGenerator(format!("{:?} has a fiber with fewer than two points", s.values)));
        }
        Ok(HatSurjection(s))
    }

    pub fn as_surjection(&self) -> &Surjection {
        &self.0
    }
}

fn enumerate_with_min_fiber(k: u8, s: u8, min: usize) -> Vec<Vec<u8>> {
    fn rec(pos: usize, k: usize, s: usize, min: usize, counts: &mut Vec<usize>, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let deficit: usize = counts.iter().map(|&c| min.saturating_sub(c)).sum();
        if deficit > k - pos {
            return;
        }
        if pos == k {
            out.push(cur.clone());
            return;
        }
        for v in 0..s {
            counts[v] += 1;
            cur.push(v as u8 + 1);
            rec(pos + 1, k, s, min, counts, cur, out);
            cur.pop();
            counts[v] -= 1;
        }
    }
    let mut out = Vec::new();
    if s == 0 {
        if k == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, k as usize, s as usize, min, &mut vec![0; s as usize], &mut Vec::new(), &mut out);
    out
}

/// All surjections `{1..k} -> {1..s}` in lexicographic order of values.
pub fn enumerate_surjections(k: u8, s: u8) -> Vec<Surjection> {
    enumerate_with_min_fiber(k, s, 1).into_iter().map(|values| Surjection { codomain: s, values }).collect()
}

/// All surjections `{1..k} -> {1..c}` whose fibers have at least two points.
pub fn enumerate_hat_surjections(k: u8, c: u8) -> Vec<HatSurjection> {
    enumerate_with_min_fiber(k, c, 2)
        .into_iter()
        .map(|values| HatSurjection(Surjection { codomain: c, values }))
        .collect()
}

/// Restricted growth strings: set partitions of `{1..k}` into exactly
/// `blocks` blocks of size at least `min`, blocks numbered by first element.
fn restricted_growth(k: usize, blocks: usize, min: usize) -> Vec<Vec<u8>> {
    fn rec(pos: usize, k: usize, blocks: usize, min: usize, sizes: &mut Vec<usize>, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let missing = blocks - sizes.len();
        let deficit: usize = sizes.iter().map(|&c| min.saturating_sub(c)).sum::<usize>() + missing * min;
        if deficit > k - pos {
            return;
        }
        if pos == k {
            if missing == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for b in 0..sizes.len() {
            sizes[b] += 1;
            cur.push(b as u8 + 1);
            rec(pos + 1, k, blocks, min, sizes, cur, out);
            cur.pop();
            sizes[b] -= 1;
        }
        if missing > 0 {
            sizes.push(1);
            cur.push(sizes.len() as u8);
            rec(pos + 1, k, blocks, min, sizes, cur, out);
            cur.pop();
            sizes.pop();
        }
    }
    let mut out = Vec::new();
    if blocks == 0 {
        if k == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, k, blocks, min, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// A surjection with an admissible monomial on each fiber, written in the
/// fiber's local labels `1..|fiber|` (fiber vertices in increasing order).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DecoratedForest {
    surj: Surjection,
    monomials: Vec<AdmissibleMonomial>,
}

impl DecoratedForest {
    pub fn new(surj: Surjection, monomials: Vec<AdmissibleMonomial>) -> Result<Self> {
        let fibers = surj.fibers();
        if fibers.len() != monomials.len() {
            return Err(Error::InvalidGenerator(format!("{} fibers but {} monomials", fibers.len(), monomials.len())));
        }
        for (f, m) in fibers.iter().zip(&monomials) {
            if f.len() != m.size() as usize {
                return Err(Error::InvalidGenerator(format!("monomial on {} vertices for a fiber of size {}", m.size(), f.len())));
            }
        }
        Ok(DecoratedForest { surj, monomials })
    }

    pub fn surjection(&self) -> &Surjection {
        &self.surj
    }

    pub fn monomials(&self) -> &[AdmissibleMonomial] {
        &self.monomials
    }

    /// Edges of fiber `a` (1-based) in global labels, in admissible order.
    pub fn fiber_edges(&self, a: u8) -> Vec<EdgeLetter> {
        let fiber: Vec<u8> = (1..=self.surj.domain()).filter(|&v| self.surj.at(v) == a).collect();
        self.monomials[a as usize - 1].edges().into_iter().map(|e| e.map(|x| fiber[x as usize - 1])).collect()
    }
}

/// A basis element of the ambient (unsymmetrized) space at level `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForestPairGenerator {
    f1: DecoratedForest,
    f2: DecoratedForest,
}

impl ForestPairGenerator {
    pub fn new(f1: DecoratedForest, f2: DecoratedForest) -> Result<Self> {
        if f1.surj.domain() != f2.surj.domain() {
            return Err(Error::SizeMismatch("the two forests have different vertex sets".into()));
        }
        HatSurjection::new(f2.surj.codomain, f2.surj.values.clone())?;
        Ok(ForestPairGenerator { f1, f2 })
    }

    /// The generator of the local space of `(α, β)` with the given index
    /// (mixed radix over the fibers of `α`, then of `β`, first fiber most
    /// significant).
    pub fn from_local_index(alpha: &Surjection, beta: &HatSurjection, mut index: usize) -> Self {
        let sizes1: Vec<u8> = alpha.fibers().iter().map(|f| f.len() as u8).collect();
        let sizes2: Vec<u8> = beta.0.fibers().iter().map(|f| f.len() as u8).collect();
        let mut monos: Vec<AdmissibleMonomial> = Vec::with_capacity(sizes1.len() + sizes2.len());
        for &size in sizes1.iter().chain(&sizes2).rev() {
            let radix = basis_len(size);
            monos.push(AdmissibleMonomial::from_index(size, index % radix));
            index /= radix;
        }
        monos.reverse();
        let m2 = monos.split_off(sizes1.len());
        ForestPairGenerator {
            f1: DecoratedForest { surj: alpha.clone(), monomials: monos },
            f2: DecoratedForest { surj: beta.0.clone(), monomials: m2 },
        }
    }

    pub fn local_index(&self) -> usize {
        self.f1
            .monomials
            .iter()
            .chain(&self.f2.monomials)
            .fold(0, |acc, m| acc * basis_len(m.size()) + m.index())
    }

    pub fn k(&self) -> u8 {
        self.f1.surj.domain()
    }

    pub fn s(&self) -> u8 {
        self.f1.surj.codomain
    }

    pub fn t(&self) -> u8 {
        self.k() - self.f2.surj.codomain
    }

    pub fn f1(&self) -> &DecoratedForest {
        &self.f1
    }

    pub fn f2(&self) -> &DecoratedForest {
        &self.f2
    }

    pub fn alpha(&self) -> &Surjection {
        &self.f1.surj
    }

    pub fn beta(&self) -> &Surjection {
        &self.f2.surj
    }
}

impl fmt::Display for ForestPairGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_forest = |forest: &DecoratedForest| -> String {
            (1..=forest.surj.codomain)
                .map(|a| {
                    let edges: Vec<String> = forest.fiber_edges(a).iter().map(|e| e.to_string()).collect();
                    let fiber: Vec<String> = forest.surj.fibers()[a as usize - 1].iter().map(|v| v.to_string()).collect();
                    format!("{{{}}}[{}]", fiber.join(","), edges.join(" "))
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        write!(f, "{} | {}", fmt_forest(&self.f1), fmt_forest(&self.f2))
    }
}

/// One letter of a generator word. Edge letters carry their fiber index and
/// global endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    Component1(u8),
    Edge1(u8, EdgeLetter),
    Vertex(u8),
    Component2(u8),
    Edge2(u8, EdgeLetter),
    Desuspension(u8),
}

impl Letter {
    pub fn parity(self, p: Parities) -> u8 {
        match self {
            Letter::Component1(_) => p.eps_m,
            Letter::Vertex(_) | Letter::Component2(_) => p.eps_n,
            Letter::Edge1(..) | Letter::Edge2(..) | Letter::Desuspension(_) => 1,
        }
    }

    /// Block and position within the block. Edge letters of one fiber share a
    /// key, so sorting keeps their relative order.
    fn key(self) -> (u8, u8) {
        match self {
            Letter::Component1(a) => (0, a),
            Letter::Edge1(a, _) => (1, a),
            Letter::Vertex(v) => (2, v),
            Letter::Component2(r) => (3, r),
            Letter::Edge2(r, _) => (4, r),
            Letter::Desuspension(i) => (5, i),
        }
    }
}

/// The canonical word: component letters of the first forest, its edges
/// fiber by fiber, vertex letters, component letters of the second forest,
/// its edges, and the desuspension letters.
pub fn generator_word(g: &ForestPairGenerator) -> Vec<Letter> {
    let k = g.k();
    let (s, c) = (g.f1.surj.codomain, g.f2.surj.codomain);
    let mut w = Vec::with_capacity(4 * k as usize + s as usize);
    w.extend((1..=s).map(Letter::Component1));
    for a in 1..=s {
        w.extend(g.f1.fiber_edges(a).into_iter().map(|e| Letter::Edge1(a, e)));
    }
    w.extend((1..=k).map(Letter::Vertex));
    w.extend((1..=c).map(Letter::Component2));
    for r in 1..=c {
        w.extend(g.f2.fiber_edges(r).into_iter().map(|e| Letter::Edge2(r, e)));
    }
    w.extend((1..=k).map(Letter::Desuspension));
    w
}

/// Sign of sorting the word into block order (stable), counting only swaps
/// of two odd letters.
fn koszul_sort(letters: &mut [Letter], p: Parities) -> i64 {
    let mut sign = 1;
    for i in 1..letters.len() {
        let mut j = i;
        while j > 0 && letters[j - 1].key() > letters[j].key() {
            if letters[j - 1].parity(p) & letters[j].parity(p) == 1 {
                sign = -sign;
            }
            letters.swap(j - 1, j);
            j -= 1;
        }
    }
    sign
}

/// A word over the letters together with the index pair it lives on, not yet
/// in normal form.
#[derive(Clone, Debug)]
pub struct Word {
    pub alpha: Vec<u8>,
    pub s: u8,
    pub beta: Vec<u8>,
    pub c: u8,
    pub letters: Vec<Letter>,
    pub sign: i64,
}

impl Word {
    pub fn of(g: &ForestPairGenerator) -> Self {
        Word {
            alpha: g.f1.surj.values.clone(),
            s: g.f1.surj.codomain,
            beta: g.f2.surj.values.clone(),
            c: g.f2.surj.codomain,
            letters: generator_word(g),
            sign: 1,
        }
    }

    /// Removes `letter` as an odd or even derivation acting from the left:
    /// the sign is that of moving it past everything in front of it.
    pub fn delete(&mut self, letter: Letter, p: Parities) -> Result<()> {
        let pos = self
            .letters
            .iter()
            .position(|&l| l == letter)
            .ok_or_else(|| Error::InvalidGenerator(format!("letter {letter:?} not in word")))?;
        if letter.parity(p) == 1 {
            let before: u32 = self.letters[..pos].iter().map(|l| l.parity(p) as u32).sum();
            if before % 2 == 1 {
                self.sign = -self.sign;
            }
        }
        self.letters.remove(pos);
        Ok(())
    }

    /// Sorts into block order and straightens every fiber, expanding into
    /// generators with integer coefficients.
    pub fn normalize(mut self, p: Parities) -> Vec<(ForestPairGenerator, i64)> {
        let sign = self.sign * koszul_sort(&mut self.letters, p);
        let alpha = Surjection { codomain: self.s, values: self.alpha };
        let beta = Surjection { codomain: self.c, values: self.beta };
        let mut e1 = vec![Vec::new(); self.s as usize];
        let mut e2 = vec![Vec::new(); self.c as usize];
        for l in &self.letters {
            match *l {
                Letter::Edge1(a, e) => e1[a as usize - 1].push(e),
                Letter::Edge2(r, e) => e2[r as usize - 1].push(e),
                _ => {}
            }
        }
        let mut factors: Vec<Vec<(u32, i64)>> = Vec::with_capacity(e1.len() + e2.len());
        let mut sizes: Vec<u8> = Vec::with_capacity(e1.len() + e2.len());
        for (surj, edges) in [(&alpha, &e1), (&beta, &e2)] {
            let mut local = vec![0u8; surj.values.len() + 1];
            for fiber in surj.fibers() {
                for (i, &v) in fiber.iter().enumerate() {
                    local[v as usize] = i as u8 + 1;
                }
            }
            for (fiber, edges) in surj.fibers().iter().zip(edges) {
                let loc: Vec<EdgeLetter> = edges.iter().map(|e| e.map(|v| local[v as usize])).collect();
                let size = fiber.len() as u8;
                let terms = straighten_edges(size, &loc).expect("fiber edges form a spanning tree");
                if terms.is_empty() {
                    return Vec::new();
                }
                factors.push(terms);
                sizes.push(size);
            }
        }
        let mut combos: Vec<(Vec<u32>, i64)> = vec![(Vec::new(), sign)];
        for f in &factors {
            let mut next = Vec::with_capacity(combos.len() * f.len());
            for (idx, c) in &combos {
                for &(i, d) in f {
                    let mut idx = idx.clone();
                    idx.push(i);
                    next.push((idx, c * d));
                }
            }
            combos = next;
        }
        let n1 = alpha.codomain as usize;
        combos
            .into_iter()
            .map(|(idx, c)| {
                let monos: Vec<AdmissibleMonomial> =
                    idx.iter().zip(&sizes).map(|(&i, &size)| AdmissibleMonomial::from_index(size, i as usize)).collect();
                let (m1, m2) = monos.split_at(n1);
                let g = ForestPairGenerator {
                    f1: DecoratedForest { surj: alpha.clone(), monomials: m1.to_vec() },
                    f2: DecoratedForest { surj: beta.clone(), monomials: m2.to_vec() },
                };
                (g, c)
            })
            .collect()
    }
}

/// `(σ, τ, ρ)` in `Σ_k × Σ_s × Σ_{k-t}`; each stored as its images of
/// `1..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement {
    pub sigma: Vec<u8>,
    pub tau: Vec<u8>,
    pub rho: Vec<u8>,
}

fn is_permutation(p: &[u8]) -> bool {
    let mut seen = vec![false; p.len()];
    for &v in p {
        if v == 0 || v as usize > p.len() || seen[v as usize - 1] {
            return false;
        }
        seen[v as usize - 1] = true;
    }
    true
}

fn compose_perm(g: &[u8], h: &[u8]) -> Vec<u8> {
    h.iter().map(|&v| g[v as usize - 1]).collect()
}

fn invert_perm(g: &[u8]) -> Vec<u8> {
    let mut out = vec![0; g.len()];
    for (i, &v) in g.iter().enumerate() {
        out[v as usize - 1] = i as u8 + 1;
    }
    out
}

impl GroupElement {
    pub fn new(sigma: Vec<u8>, tau: Vec<u8>, rho: Vec<u8>) -> Result<Self> {
        for p in [&sigma, &tau, &rho] {
            if !is_permutation(p) {
                return Err(Error::InvalidGenerator(format!("{p:?} is not a permutation")));
            }
        }
        Ok(GroupElement { sigma, tau, rho })
    }

    pub fn identity(k: u8, s: u8, c: u8) -> Self {
        GroupElement { sigma: (1..=k).collect(), tau: (1..=s).collect(), rho: (1..=c).collect() }
    }

    pub fn is_identity(&self) -> bool {
        [&self.sigma, &self.tau, &self.rho].iter().all(|p| p.iter().enumerate().all(|(i, &v)| v as usize == i + 1))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            sigma: compose_perm(&self.sigma, &other.sigma),
            tau: compose_perm(&self.tau, &other.tau),
            rho: compose_perm(&self.rho, &other.rho),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { sigma: invert_perm(&self.sigma), tau: invert_perm(&self.tau), rho: invert_perm(&self.rho) }
    }

    /// `(τ ∘ α ∘ σ⁻¹, ρ ∘ β ∘ σ⁻¹)`.
    pub fn act_on_pair(&self, alpha: &[u8], beta: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut a = vec![0; alpha.len()];
        let mut b = vec![0; beta.len()];
        for v in 0..alpha.len() {
            let w = self.sigma[v] as usize - 1;
            a[w] = self.tau[alpha[v] as usize - 1];
            b[w] = self.rho[beta[v] as usize - 1];
        }
        (a, b)
    }
}

static ACT_SIGN_MUTATION: AtomicBool = AtomicBool::new(false);

/// Test hook: when enabled, [`act`] negates its result whenever `σ` moves
/// vertex 1. This is not a group action; the check suite must notice.
#[doc(hidden)]
pub fn set_act_sign_mutation(enabled: bool) {
    ACT_SIGN_MUTATION.store(enabled, Ordering::SeqCst);
}

/// The signed action on a generator, with integer coefficients.
pub fn act_raw(g: &GroupElement, x: &ForestPairGenerator, p: Parities) -> Result<Vec<(ForestPairGenerator, i64)>> {
    let (k, s, c) = (x.k(), x.s(), x.f2.surj.codomain);
    if g.sigma.len() != k as usize || g.tau.len() != s as usize || g.rho.len() != c as usize {
        return Err(Error::SizeMismatch(format!(
            "group element of sizes ({}, {}, {}) acting on a generator of sizes ({k}, {s}, {c})",
            g.sigma.len(),
            g.tau.len(),
            g.rho.len()
        )));
    }
    let sig = |v: u8| g.sigma[v as usize - 1];
    let letters = generator_word(x)
        .into_iter()
        .map(|l| match l {
            Letter::Component1(a) => Letter::Component1(g.tau[a as usize - 1]),
            Letter::Edge1(a, e) => Letter::Edge1(g.tau[a as usize - 1], e.map(sig)),
            Letter::Vertex(v) => Letter::Vertex(sig(v)),
            Letter::Component2(r) => Letter::Component2(g.rho[r as usize - 1]),
            Letter::Edge2(r, e) => Letter::Edge2(g.rho[r as usize - 1], e.map(sig)),
            Letter::Desuspension(i) => Letter::Desuspension(i),
        })
        .collect();
    let (alpha, beta) = g.act_on_pair(&x.f1.surj.values, &x.f2.surj.values);
    let mut sign = 1;
    if ACT_SIGN_MUTATION.load(Ordering::Relaxed) && g.sigma[0] != 1 {
        sign = -1;
    }
    Ok(Word { alpha, s, beta, c, letters, sign }.normalize(p))
}

/// A finite rational combination of generators.
pub type Chain = BTreeMap<ForestPairGenerator, Rational>;

pub fn chain_add(chain: &mut Chain, g: ForestPairGenerator, c: Rational) {
    if c.is_zero() {
        return;
    }
    let zero = {
        let e = chain.entry(g.clone()).or_insert_with(Rational::zero);
        *e += c;
        e.is_zero()
    };
    if zero {
        chain.remove(&g);
    }
}

pub fn act(g: &GroupElement, x: &ForestPairGenerator, p: Parities) -> Result<Chain> {
    let mut out = Chain::new();
    for (y, c) in act_raw(g, x, p)? {
        chain_add(&mut out, y, rational(c));
    }
    Ok(out)
}

/// Linear extension of [`act`].
pub fn act_chain(g: &GroupElement, x: &Chain, p: Parities) -> Result<Chain> {
    let mut out = Chain::new();
    for (y, c) in x {
        for (z, d) in act_raw(g, y, p)? {
            chain_add(&mut out, z, c * rational(d));
        }
    }
    Ok(out)
}

/// `M[a][r] = |α⁻¹(a) ∩ β⁻¹(r)|`.
pub fn meet_matrix(alpha: &[u8], s: usize, beta: &[u8], c: usize) -> Vec<Vec<u8>> {
    let mut m = vec![vec![0u8; c]; s];
    for (a, b) in alpha.iter().zip(beta) {
        m[*a as usize - 1][*b as usize - 1] += 1;
    }
    m
}

fn permutations(n: usize) -> &'static [Vec<usize>] {
    static CACHE: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        (0..=8)
            .map(|n| {
                let mut out = Vec::new();
                let mut cur: Vec<usize> = (0..n).collect();
                loop {
                    out.push(cur.clone());
                    // next lexicographic permutation
                    let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
                    let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
                    cur.swap(i - 1, j);
                    cur[i..].reverse();
                }
                out
            })
            .collect()
    });
    &all[n]
}

/// Reorders the columns of `M` by `col` (new column `r'` is old column
/// `col[r']`), sorts the rows stably, and returns the resulting matrix with
/// the group element realizing the change on the index pair.
fn transform(alpha: &[u8], s: usize, beta: &[u8], c: usize, m: &[Vec<u8>], col: &[usize]) -> (Vec<Vec<u8>>, GroupElement) {
    let permuted: Vec<Vec<u8>> = m.iter().map(|row| col.iter().map(|&r| row[r]).collect()).collect();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&x, &y| permuted[x].cmp(&permuted[y]));
    let mut tau = vec![0u8; s];
    for (pos, &a) in order.iter().enumerate() {
        tau[a] = pos as u8 + 1;
    }
    let mut rho = vec![0u8; c];
    for (pos, &r) in col.iter().enumerate() {
        rho[r] = pos as u8 + 1;
    }
    let rows: Vec<Vec<u8>> = order.iter().map(|&a| permuted[a].clone()).collect();
    let mut start = vec![vec![0u8; c]; s];
    let mut next = 0u8;
    for a in 0..s {
        for r in 0..c {
            start[a][r] = next;
            next += rows[a][r];
        }
    }
    let mut sigma = vec![0u8; alpha.len()];
    for v in 0..alpha.len() {
        let a = tau[alpha[v] as usize - 1] as usize - 1;
        let r = rho[beta[v] as usize - 1] as usize - 1;
        sigma[v] = start[a][r] + 1;
        start[a][r] += 1;
    }
    (rows, GroupElement { sigma, tau, rho })
}

/// Canonical meet matrix of the orbit of `(α, β)` and a group element
/// carrying `(α, β)` to the orbit representative.
pub fn canonicalize(alpha: &[u8], s: usize, beta: &[u8], c: usize) -> (Vec<Vec<u8>>, GroupElement) {
    let m = meet_matrix(alpha, s, beta, c);
    let mut best: Option<(Vec<Vec<u8>>, &[usize])> = None;
    for col in permutations(c) {
        let mut rows: Vec<Vec<u8>> = m.iter().map(|row| col.iter().map(|&r| row[r]).collect()).collect();
        rows.sort();
        if best.as_ref().is_none_or(|(b, _)| rows < *b) {
            best = Some((rows, col));
        }
    }
    let (_, col) = best.expect("at least one column order");
    transform(alpha, s, beta, c, &m, col)
}

/// The representative index pair of a canonical meet matrix: cells are
/// filled with consecutive vertices in row-major order.
pub fn representative(meet: &[Vec<u8>]) -> (Vec<u8>, Vec<u8>) {
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    for (a, row) in meet.iter().enumerate() {
        for (r, &n) in row.iter().enumerate() {
            for _ in 0..n {
                alpha.push(a as u8 + 1);
                beta.push(r as u8 + 1);
            }
        }
    }
    (alpha, beta)
}

/// Generators of the stabilizer of the representative of `meet`.
pub fn stabilizer_generators(meet: &[Vec<u8>]) -> Vec<GroupElement> {
    let s = meet.len();
    let c = meet.first().map_or(0, |r| r.len());
    let (alpha, beta) = representative(meet);
    let k = alpha.len();
    let mut gens = Vec::new();

    // Lifts of a generating set of the column automorphisms; the rest of the
    // stabilizer fixes every column.
    let mut generated: HashSet<Vec<usize>> = HashSet::from([(0..c).collect()]);
    let mut col_gens: Vec<Vec<usize>> = Vec::new();
    for col in permutations(c) {
        if generated.contains(col) {
            continue;
        }
        let (rows, g) = transform(&alpha, s, &beta, c, meet, col);
        if rows != meet {
            continue;
        }
        gens.push(g);
        col_gens.push(col.clone());
        let mut frontier: Vec<Vec<usize>> = generated.iter().cloned().collect();
        while let Some(x) = frontier.pop() {
            for h in &col_gens {
                let y: Vec<usize> = x.iter().map(|&i| h[i]).collect();
                if generated.insert(y.clone()) {
                    frontier.push(y);
                }
            }
        }
    }

    let mut start = vec![vec![0usize; c]; s];
    let mut next = 0;
    for a in 0..s {
        for r in 0..c {
            start[a][r] = next;
            next += meet[a][r] as usize;
        }
    }
    for a in 0..s.saturating_sub(1) {
        if meet[a] == meet[a + 1] {
            let mut g = GroupElement::identity(k as u8, s as u8, c as u8);
            g.tau.swap(a, a + 1);
            for r in 0..c {
                for q in 0..meet[a][r] as usize {
                    let (x, y) = (start[a][r] + q, start[a + 1][r] + q);
                    g.sigma.swap(x, y);
                }
            }
            gens.push(g);
        }
    }
    for a in 0..s {
        for r in 0..c {
            for q in 1..meet[a][r] as usize {
                let mut g = GroupElement::identity(k as u8, s as u8, c as u8);
                g.sigma.swap(start[a][r] + q - 1, start[a][r] + q);
                gens.push(g);
            }
        }
    }
    gens.sort();
    gens.dedup();
    gens
}

/// One orbit of index pairs with its coinvariant data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orbit {
    /// Canonical meet matrix, `s` rows and `k - t` columns.
    pub meet: Vec<Vec<u8>>,
    pub alpha: Surjection,
    pub beta: HatSurjection,
    pub stabilizer: Vec<GroupElement>,
    /// Dimension of the local space `L_α ⊗ L_β`.
    pub local_dim: usize,
    /// Reduced echelon form of the relations `h·e - e`.
    pub relations: Echelon,
    /// Local indices of the monomials whose classes form the basis.
    pub free: Vec<u32>,
}

impl Orbit {
    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn generator(&self, local: usize) -> ForestPairGenerator {
        ForestPairGenerator::from_local_index(&self.alpha, &self.beta, local)
    }
}

fn build_orbit(meet: Vec<Vec<u8>>, p: Parities) -> Orbit {
    let (a, b) = representative(&meet);
    let s = meet.len() as u8;
    let c = meet.first().map_or(0, |r| r.len()) as u8;
    let alpha = Surjection { codomain: s, values: a };
    let beta = HatSurjection(Surjection { codomain: c, values: b });
    let stabilizer = stabilizer_generators(&meet);
    let local_dim: usize = alpha
        .fibers()
        .iter()
        .chain(beta.0.fibers().iter())
        .map(|f| basis_len(f.len() as u8))
        .product();
    let mut relations = Echelon::new(local_dim);
    for h in &stabilizer {
        let rows: Vec<Vec<(u32, Rational)>> = (0..local_dim)
            .into_par_iter()
            .map(|j| {
                let x = ForestPairGenerator::from_local_index(&alpha, &beta, j);
                let mut row: Vec<(u32, Rational)> = vec![(j as u32, rational(-1))];
                for (y, c) in act_raw(h, &x, p).expect("stabilizer sizes match") {
                    debug_assert_eq!(y.f1.surj, alpha);
                    row.push((y.local_index() as u32, rational(c)));
                }
                row
            })
            .collect();
        for row in rows {
            relations.insert(row);
            if relations.rank() == local_dim {
                break;
            }
        }
    }
    relations.make_reduced();
    let free = relations.free_columns();
    Orbit { meet, alpha, beta, stabilizer, local_dim, relations, free }
}

/// Coinvariant basis of one chain group, organized by orbits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignedOrbitBasis {
    pub parities: Parities,
    pub k: u8,
    pub s: u8,
    pub t: u8,
    pub orbits: Vec<Orbit>,
    offsets: Vec<usize>,
    dim: usize,
    #[serde(skip)]
    index: HashMap<Vec<Vec<u8>>, usize>,
    #[serde(skip)]
    free_pos: Vec<HashMap<u32, u32>>,
}

impl PartialEq for SignedOrbitBasis {
    fn eq(&self, other: &Self) -> bool {
        (self.parities, self.k, self.s, self.t) == (other.parities, other.k, other.s, other.t)
            && self.orbits == other.orbits
    }
}

impl SignedOrbitBasis {
    pub fn from_orbits(parities: Parities, k: u8, s: u8, t: u8, orbits: Vec<Orbit>) -> Self {
        let mut basis = SignedOrbitBasis {
            parities,
            k,
            s,
            t,
            orbits,
            offsets: Vec::new(),
            dim: 0,
            index: HashMap::new(),
            free_pos: Vec::new(),
        };
        basis.rebuild_index();
        basis
    }

    /// Restores the lookup tables after deserialization.
    pub fn rebuild_index(&mut self) {
        self.offsets.clear();
        self.index.clear();
        self.free_pos.clear();
        let mut dim = 0;
        for (i, o) in self.orbits.iter().enumerate() {
            self.offsets.push(dim);
            dim += o.dim();
            self.index.insert(o.meet.clone(), i);
            self.free_pos.push(o.free.iter().enumerate().map(|(p, &f)| (f, p as u32)).collect());
        }
        self.dim = dim;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self, orbit: usize) -> usize {
        self.offsets[orbit]
    }

    /// The generator whose class is basis vector `i`.
    pub fn basis_generator(&self, i: usize) -> Option<ForestPairGenerator> {
        let orbit = self.offsets.partition_point(|&o| o <= i).checked_sub(1)?;
        let o = &self.orbits[orbit];
        let pos = i - self.offsets[orbit];
        o.free.get(pos).map(|&f| o.generator(f as usize))
    }

    pub fn basis_generators(&self) -> Vec<ForestPairGenerator> {
        self.orbits.iter().flat_map(|o| o.free.iter().map(move |&f| o.generator(f as usize))).collect()
    }

    fn orbit_index(&self, meet: &[Vec<u8>]) -> Option<usize> {
        self.index.get(meet).copied()
    }

    /// Coordinates of a local vector of orbit `i` in the coinvariant basis.
    fn reduce_local(&self, i: usize, local: u32, c: &Rational, out: &mut Vec<(u32, Rational)>) {
        let o = &self.orbits[i];
        let off = self.offsets[i] as u32;
        match o.relations.row(local) {
            None => out.push((off + self.free_pos[i][&local], c.clone())),
            Some(row) => {
                for (f, v) in &row[1..] {
                    out.push((off + self.free_pos[i][f], -(c * v)));
                }
            }
        }
    }

    /// Class of an arbitrary combination of level-`k` generators in the
    /// coinvariant basis.
    pub fn project<'a>(&self, terms: impl IntoIterator<Item = (&'a ForestPairGenerator, &'a Rational)>) -> Result<Vec<(u32, Rational)>> {
        let mut out = Vec::new();
        for (x, c) in terms {
            if (x.k(), x.s(), x.t()) != (self.k, self.s, self.t) {
                return Err(Error::SizeMismatch(format!(
                    "generator of sizes (k, s, t) = ({}, {}, {}) projected onto level ({}, {}, {})",
                    x.k(),
                    x.s(),
                    x.t(),
                    self.k,
                    self.s,
                    self.t
                )));
            }
            let c_dim = x.f2.surj.codomain as usize;
            let (meet, g) = canonicalize(&x.f1.surj.values, self.s as usize, &x.f2.surj.values, c_dim);
            let i = self
                .orbit_index(&meet)
                .ok_or_else(|| Error::InvarianceViolated(format!("no orbit for meet matrix {meet:?}")))?;
            for (y, d) in act_raw(&g, x, self.parities)? {
                self.reduce_local(i, y.local_index() as u32, &(c * rational(d)), &mut out);
            }
        }
        Ok(normalize_sparse(out))
    }

    /// Stabilizer-averaged vector `Σ_h h·e` for basis vector `i`, expanded
    /// over the full stabilizer (found by closure). Meant for small cases.
    pub fn invariant_vector(&self, i: usize) -> Result<Chain> {
        let orbit = self.offsets.partition_point(|&o| o <= i) - 1;
        let o = &self.orbits[orbit];
        let x = o.generator(o.free[i - self.offsets[orbit]] as usize);
        let c = o.beta.0.codomain;
        let id = GroupElement::identity(self.k, self.s, c);
        let mut seen: HashSet<GroupElement> = HashSet::from([id.clone()]);
        let mut queue = VecDeque::from([id]);
        while let Some(g) = queue.pop_front() {
            for h in &o.stabilizer {
                let gh = g.compose(h);
                if seen.insert(gh.clone()) {
                    queue.push_back(gh);
                }
            }
        }
        let mut out = Chain::new();
        for g in seen {
            for (y, d) in act_raw(&g, &x, self.parities)? {
                chain_add(&mut out, y, rational(d));
            }
        }
        Ok(out)
    }
}

/// Meet matrices of all orbits at level `(k, s, t)`, in sorted order.
pub fn orbit_keys(k: u8, s: u8, t: u8) -> Vec<Vec<Vec<u8>>> {
    let Some(c) = k.checked_sub(t) else { return Vec::new() };
    let alphas = restricted_growth(k as usize, s as usize, 1);
    let betas = restricted_growth(k as usize, c as usize, 2);
    let mut keys: Vec<Vec<Vec<u8>>> = alphas
        .par_iter()
        .flat_map_iter(|a| betas.iter().map(move |b| canonicalize(a, s as usize, b, c as usize).0))
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

/// The coinvariant basis of the level-`k` chain group of `HH_{s,t}`.
pub fn orbit_basis(k: u8, s: u8, t: u8, p: Parities) -> SignedOrbitBasis {
    let orbits: Vec<Orbit> = orbit_keys(k, s, t).into_par_iter().map(|meet| build_orbit(meet, p)).collect();
    SignedOrbitBasis::from_orbits(p, k, s, t, orbits)
}
