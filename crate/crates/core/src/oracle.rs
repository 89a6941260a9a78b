//! Brute-force cross-checks that share nothing with the production path
//! except [`EdgeLetter`] and the rank routines.
//!
//! The Arnold quotient is rebuilt here from scratch: all labeled trees are
//! enumerated through Prüfer sequences, every tree monomial is written with
//! its edges sorted by `(lo, hi)`, and the relations are the Arnold relation
//! on each path of length two times the remaining edges. The symmetrization
//! oracle works on the full unsymmetrized space, with every function `α`
//! and `β` rather than orbit representatives, and a different canonical
//! letter order.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::Zero;

use crate::arnold::{straighten, EdgeLetter, TreeMonomial};
use crate::error::{Error, Result};
use crate::forests::Parities;
use crate::linalg::{rank, rank_mod_p, rational, Echelon, RankOptions, Rational, SparseRationalMatrix, DEFAULT_PRIMES};

/// Ambient dimension above which [`dense_symmetrization_dim`] refuses.
pub const DENSE_CAP: usize = 10_000;

/// Edge list sorted by `(lo, hi)`.
type Tree = Vec<(u8, u8)>;

fn key(e: EdgeLetter) -> (u8, u8) {
    (e.lo(), e.hi())
}

/// All labeled trees on `{1..k}` from Prüfer sequences.
pub fn all_trees(k: u8) -> Vec<Tree> {
    match k {
        0 => return Vec::new(),
        1 => return vec![Vec::new()],
        2 => return vec![vec![(1, 2)]],
        _ => {}
    }
    let n = k as usize;
    let len = n - 2;
    let total = n.pow(len as u32);
    let mut out = Vec::with_capacity(total);
    let mut seq = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for x in seq.iter_mut().rev() {
            *x = c % n;
            c /= n;
        }
        let mut degree = vec![1usize; n];
        for &x in &seq {
            degree[x] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        for &x in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
            edges.push(((leaf.min(x) + 1) as u8, (leaf.max(x) + 1) as u8));
            degree[leaf] -= 1;
            degree[x] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push(((rest[0] + 1) as u8, (rest[1] + 1) as u8));
        edges.sort();
        out.push(edges);
    }
    out.sort();
    out
}

/// Sorts an edge list into `(lo, hi)` order and returns the sign of the
/// permutation, computed from its cycle decomposition.
fn canonical_sign(edges: &[(u8, u8)]) -> (i64, Tree) {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| edges[i]);
    (permutation_sign(&order), order.iter().map(|&i| edges[i]).collect())
}

/// Sign of a permutation given as a list of images.
fn permutation_sign(p: &[usize]) -> i64 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = p[x];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Arnold relations in the tree space on `{1..k}`, one per (remaining
/// edges, triangle) pair.
fn relations(k: u8, trees: &[Tree], index: &HashMap<Tree, usize>) -> Vec<Vec<(u32, Rational)>> {
    let mut seen: BTreeSet<(Tree, (u8, u8, u8))> = BTreeSet::new();
    let mut out = Vec::new();
    for tree in trees {
        for b in 1..=k {
            let nbrs: Vec<u8> = tree
                .iter()
                .filter_map(|&(x, y)| if x == b { Some(y) } else if y == b { Some(x) } else { None })
                .collect();
            for (p, &a) in nbrs.iter().enumerate() {
                for &c in &nbrs[p + 1..] {
                    let e = |x: u8, y: u8| (x.min(y), x.max(y));
                    let rest: Tree = tree.iter().copied().filter(|&f| f != e(a, b) && f != e(b, c)).collect();
                    let mut tri = [a, b, c];
                    tri.sort();
                    if !seen.insert((rest.clone(), (tri[0], tri[1], tri[2]))) {
                        continue;
                    }
                    // u_ab u_bc + u_bc u_ca + u_ca u_ab, then the rest
                    let mut row = Vec::with_capacity(3);
                    for pair in [[e(a, b), e(b, c)], [e(b, c), e(c, a)], [e(c, a), e(a, b)]] {
                        let mut word = pair.to_vec();
                        word.extend(&rest);
                        let (sign, canon) = canonical_sign(&word);
                        row.push((index[&canon] as u32, rational(sign)));
                    }
                    out.push(row);
                }
            }
        }
    }
    out
}

/// The Arnold quotient on `{1..k}` with its reduced relations.
struct TreeQuotient {
    index: HashMap<Tree, usize>,
    echelon: Echelon,
    free_pos: HashMap<u32, usize>,
    free_trees: Vec<Tree>,
}

impl TreeQuotient {
    fn build(k: u8) -> Self {
        let trees = all_trees(k);
        let index: HashMap<Tree, usize> = trees.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let mut echelon = Echelon::new(trees.len());
        for row in relations(k, &trees, &index) {
            echelon.insert(row);
        }
        echelon.make_reduced();
        let free = echelon.free_columns();
        let free_trees = free.iter().map(|&c| trees[c as usize].clone()).collect();
        let free_pos = free.into_iter().enumerate().map(|(p, c)| (c, p)).collect();
        TreeQuotient { index, echelon, free_pos, free_trees }
    }

    fn dim(&self) -> usize {
        self.free_pos.len()
    }

    /// Coordinates of a tree monomial (edges in any order) in the quotient
    /// basis of free trees.
    fn reduce(&self, edges: &[(u8, u8)]) -> Vec<(usize, Rational)> {
        let (sign, canon) = canonical_sign(edges);
        let col = self.index[&canon] as u32;
        let s = rational(sign);
        match self.echelon.row(col) {
            None => vec![(self.free_pos[&col], s)],
            Some(row) => row[1..].iter().map(|(c, v)| (self.free_pos[c], -(v * &s))).collect(),
        }
    }

    /// Whether a vector over tree monomials vanishes in the quotient.
    fn in_ideal(&self, v: Vec<(u32, Rational)>) -> bool {
        self.echelon.reduce(v).is_empty()
    }
}

fn quotient(k: u8) -> Arc<TreeQuotient> {
    static CACHE: OnceLock<Mutex<HashMap<u8, Arc<TreeQuotient>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(q) = cache.lock().expect("oracle cache").get(&k) {
        return q.clone();
    }
    let q = Arc::new(TreeQuotient::build(k));
    cache.lock().expect("oracle cache").insert(k, q.clone());
    q
}

/// Dimension of the top degree of the Arnold quotient on `k` points,
/// computed from the tree space and all Arnold consequences.
pub fn arnold_ideal_dim(k: u8) -> Result<usize> {
    if !(2..=7).contains(&k) {
        return Err(Error::InvalidArgument(format!("arnold_ideal_dim needs 2 <= k <= 7, got {k}")));
    }
    let trees = all_trees(k);
    let index: HashMap<Tree, usize> = trees.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let rows = relations(k, &trees, &index);
    let m = SparseRationalMatrix::from_triplets(
        rows.len(),
        trees.len(),
        rows.into_iter().enumerate().flat_map(|(r, row)| row.into_iter().map(move |(c, v)| (r, c as usize, v))),
    )?;
    let r = if k <= 5 {
        rank(&m, &RankOptions { verify_rational: true, ..Default::default() }).rank
    } else {
        let ranks: Vec<Option<usize>> = DEFAULT_PRIMES.iter().map(|&p| rank_mod_p(&m, p)).collect();
        let first = ranks[0];
        if first.is_none() || ranks.iter().any(|&r| r != first) {
            return Err(Error::InvarianceViolated(format!("modular ranks disagree: {ranks:?}")));
        }
        first.expect("checked above")
    };
    Ok(trees.len() - r)
}

/// Whether `straighten(t) - t` lies in the Arnold ideal.
pub fn straighten_membership(t: &TreeMonomial) -> Result<bool> {
    let k = t.size();
    if k > 6 {
        return Err(Error::InvalidArgument(format!("straighten_membership needs k <= 6, got {k}")));
    }
    if k <= 2 {
        return Ok(true);
    }
    let q = quotient(k);
    let mut v: Vec<(u32, Rational)> = Vec::new();
    let edges: Vec<(u8, u8)> = t.edges().iter().map(|&e| key(e)).collect();
    let (sign, canon) = canonical_sign(&edges);
    v.push((q.index[&canon] as u32, rational(-sign)));
    for (m, c) in straighten(t).terms() {
        let edges: Vec<(u8, u8)> = m.edges().iter().map(|&e| key(e)).collect();
        let (sign, canon) = canonical_sign(&edges);
        v.push((q.index[&canon] as u32, c * rational(sign)));
    }
    Ok(q.in_ideal(v))
}

/// All functions `{1..k} -> {1..c}` that are onto, with fibers of size at
/// least `min`.
fn onto_functions(k: usize, c: usize, min: usize) -> Vec<Vec<u8>> {
    if c == 0 {
        return if k == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let total = c.pow(k as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut f = vec![0u8; k];
        let mut x = code;
        for v in f.iter_mut().rev() {
            *v = (x % c) as u8 + 1;
            x /= c;
        }
        let mut sizes = vec![0usize; c];
        for &v in &f {
            sizes[v as usize - 1] += 1;
        }
        if sizes.iter().all(|&n| n >= min) {
            out.push(f);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum DenseLetter {
    /// First-forest component `a`, or an edge in it.
    Comp1(u8),
    Edge1(u8, u8, u8),
    Vertex(u8),
    Comp2(u8),
    Edge2(u8, u8, u8),
}

impl DenseLetter {
    fn odd(self, p: Parities) -> bool {
        match self {
            DenseLetter::Comp1(_) => p.eps_m == 1,
            DenseLetter::Vertex(_) | DenseLetter::Comp2(_) => p.eps_n == 1,
            DenseLetter::Edge1(..) | DenseLetter::Edge2(..) => true,
        }
    }

    /// Oracle order: each component letter immediately followed by its
    /// edges, first forest, then vertices, then second forest.
    fn order(self) -> (u8, u8, u8, u8, u8) {
        match self {
            DenseLetter::Comp1(a) => (0, a, 0, 0, 0),
            DenseLetter::Edge1(a, lo, hi) => (0, a, 1, lo, hi),
            DenseLetter::Vertex(v) => (1, v, 0, 0, 0),
            DenseLetter::Comp2(r) => (2, r, 0, 0, 0),
            DenseLetter::Edge2(r, lo, hi) => (2, r, 1, lo, hi),
        }
    }
}

/// (α, β, one free-tree index per fiber of α then β).
type DenseKey = (Vec<u8>, Vec<u8>, Vec<usize>);

struct DenseSpace {
    k: usize,
    s: usize,
    c: usize,
    basis: Vec<DenseKey>,
    index: HashMap<DenseKey, usize>,
}

fn fibers(f: &[u8], c: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new(); c];
    for (v, &x) in f.iter().enumerate() {
        out[x as usize - 1].push(v as u8 + 1);
    }
    out
}

/// Ambient dimension `Σ_{α,β} Π_fibers (|fiber| - 1)!` without building
/// the space.
pub fn ambient_dim(k: u8, s: u8, t: u8) -> usize {
    let Some(c) = (k as usize).checked_sub(t as usize) else { return 0 };
    let fact = |n: usize| (1..=n).product::<usize>();
    let alphas = onto_functions(k as usize, s as usize, 1);
    let betas = onto_functions(k as usize, c, 2);
    let la: usize = alphas.iter().map(|a| fibers(a, s as usize).iter().map(|f| fact(f.len() - 1)).product::<usize>()).sum();
    let lb: usize = betas.iter().map(|b| fibers(b, c).iter().map(|f| fact(f.len() - 1)).product::<usize>()).sum();
    la * lb
}

impl DenseSpace {
    fn build(k: usize, s: usize, c: usize) -> Self {
        let mut basis = Vec::new();
        for alpha in onto_functions(k, s, 1) {
            for beta in onto_functions(k, c, 2) {
                let dims: Vec<usize> = fibers(&alpha, s)
                    .iter()
                    .chain(fibers(&beta, c).iter())
                    .map(|f| quotient(f.len() as u8).dim())
                    .collect();
                let mut choice = vec![0usize; dims.len()];
                loop {
                    basis.push((alpha.clone(), beta.clone(), choice.clone()));
                    let mut i = dims.len();
                    loop {
                        if i == 0 {
                            break;
                        }
                        i -= 1;
                        choice[i] += 1;
                        if choice[i] < dims[i] {
                            break;
                        }
                        choice[i] = 0;
                    }
                    if choice.iter().all(|&x| x == 0) {
                        break;
                    }
                }
            }
        }
        let index = basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        DenseSpace { k, s, c, basis, index }
    }

    /// Global edges of the free tree chosen on a fiber.
    fn fiber_tree(fiber: &[u8], choice: usize) -> Vec<(u8, u8)> {
        let q = quotient(fiber.len() as u8);
        q.free_trees[choice]
            .iter().map(|&(a, b)| (fiber[a as usize - 1], fiber[b as usize - 1])).collect()
    }

    fn word(&self, i: usize) -> Vec<DenseLetter> {
        let (alpha, beta, choice) = &self.basis[i];
        let f1 = fibers(alpha, self.s);
        let f2 = fibers(beta, self.c);
        let mut w = Vec::new();
        for (a, f) in f1.iter().enumerate() {
            w.push(DenseLetter::Comp1(a as u8 + 1));
            for (x, y) in Self::fiber_tree(f, choice[a]) {
                w.push(DenseLetter::Edge1(a as u8 + 1, x, y));
            }
        }
        w.extend((1..=self.k as u8).map(DenseLetter::Vertex));
        for (r, f) in f2.iter().enumerate() {
            w.push(DenseLetter::Comp2(r as u8 + 1));
            for (x, y) in Self::fiber_tree(f, choice[self.s + r]) {
                w.push(DenseLetter::Edge2(r as u8 + 1, x, y));
            }
        }
        w
    }

    /// `g · e_i` for `g = (σ, τ, ρ)`, as coordinates.
    fn apply(&self, i: usize, sigma: &[u8], tau: &[u8], rho: &[u8], p: Parities) -> Vec<(usize, Rational)> {
        let (alpha, beta, _) = &self.basis[i];
        let sg = |v: u8| sigma[v as usize - 1];
        let moved: Vec<DenseLetter> = self
            .word(i)
            .into_iter()
            .map(|l| match l {
                DenseLetter::Comp1(a) => DenseLetter::Comp1(tau[a as usize - 1]),
                DenseLetter::Edge1(a, x, y) => {
                    let (x, y) = (sg(x), sg(y));
                    DenseLetter::Edge1(tau[a as usize - 1], x.min(y), x.max(y))
                }
                DenseLetter::Vertex(v) => DenseLetter::Vertex(sg(v)),
                DenseLetter::Comp2(r) => DenseLetter::Comp2(rho[r as usize - 1]),
                DenseLetter::Edge2(r, x, y) => {
                    let (x, y) = (sg(x), sg(y));
                    DenseLetter::Edge2(rho[r as usize - 1], x.min(y), x.max(y))
                }
            })
            .collect();
        let mut new_alpha = vec![0u8; self.k];
        let mut new_beta = vec![0u8; self.k];
        for v in 0..self.k {
            let w = sigma[v] as usize - 1;
            new_alpha[w] = tau[alpha[v] as usize - 1];
            new_beta[w] = rho[beta[v] as usize - 1];
        }

        // sign of sorting the odd letters into oracle order
        let odd: Vec<DenseLetter> = moved.iter().copied().filter(|l| l.odd(p)).collect();
        let mut order: Vec<usize> = (0..odd.len()).collect();
        order.sort_by_key(|&j| odd[j].order());
        let sign = permutation_sign(&order);

        let f1 = fibers(&new_alpha, self.s);
        let f2 = fibers(&new_beta, self.c);
        let mut factors: Vec<Vec<(usize, Rational)>> = Vec::new();
        for (fs, is_first) in [(&f1, true), (&f2, false)] {
            for (r, fiber) in fs.iter().enumerate() {
                let mut local = HashMap::new();
                for (pos, &v) in fiber.iter().enumerate() {
                    local.insert(v, pos as u8 + 1);
                }
                let mut edges: Vec<(u8, u8)> = moved
                    .iter()
                    .filter_map(|l| match *l {
                        DenseLetter::Edge1(a, x, y) if is_first && a as usize == r + 1 => Some((x, y)),
                        DenseLetter::Edge2(b, x, y) if !is_first && b as usize == r + 1 => Some((x, y)),
                        _ => None,
                    })
                    .collect();
                edges.sort();
                let local_edges: Vec<(u8, u8)> = edges.iter().map(|(x, y)| (local[x], local[y])).collect();
                if fiber.len() == 1 {
                    factors.push(vec![(0, rational(1))]);
                } else {
                    factors.push(quotient(fiber.len() as u8).reduce(&local_edges));
                }
            }
        }
        let mut combos: Vec<(Vec<usize>, Rational)> = vec![(Vec::new(), rational(sign))];
        for f in &factors {
            let mut next = Vec::new();
            for (idx, c) in &combos {
                for (j, d) in f {
                    let mut idx = idx.clone();
                    idx.push(*j);
                    next.push((idx, c * d));
                }
            }
            combos = next;
        }
        combos
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(idx, c)| (self.index[&(new_alpha.clone(), new_beta.clone(), idx)], c))
            .collect()
    }
}

/// Dimension of the fixed space of the full signed action of
/// `Σ_k × Σ_s × Σ_{k-t}` on the unsymmetrized space, through the adjacent
/// transpositions of each factor.
pub fn dense_symmetrization_dim(k: u8, s: u8, t: u8, p: Parities) -> Result<usize> {
    let dim = ambient_dim(k, s, t);
    if dim > DENSE_CAP {
        return Err(Error::OracleCapExceeded { dim, cap: DENSE_CAP });
    }
    if dim == 0 {
        return Ok(0);
    }
    let c = k as usize - t as usize;
    let space = DenseSpace::build(k as usize, s as usize, c);
    debug_assert_eq!(space.basis.len(), dim);
    let ident = |n: usize| -> Vec<u8> { (1..=n as u8).collect() };
    let mut gens: Vec<(Vec<u8>, Vec<u8>, Vec<u8>)> = Vec::new();
    for (n, slot) in [(k as usize, 0), (s as usize, 1), (c, 2)] {
        for i in 1..n {
            let mut perm = ident(n);
            perm.swap(i - 1, i);
            let mut g = (ident(k as usize), ident(s as usize), ident(c));
            match slot {
                0 => g.0 = perm,
                1 => g.1 = perm,
                _ => g.2 = perm,
            }
            gens.push(g);
        }
    }
    let mut triplets = Vec::new();
    for (gi, (sigma, tau, rho)) in gens.iter().enumerate() {
        for j in 0..dim {
            triplets.push((gi * dim + j, j, rational(-1)));
            for (r, v) in space.apply(j, sigma, tau, rho, p) {
                triplets.push((gi * dim + r, j, v));
            }
        }
    }
    let m = SparseRationalMatrix::from_triplets(gens.len().max(1) * dim, dim, triplets)?;
    Ok(dim - rank(&m, &RankOptions::default()).rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cayley_counts() {
        for k in 1..=6u8 {
            let expect = if k <= 2 { 1 } else { (k as usize).pow(k as u32 - 2) };
            let trees = all_trees(k);
            assert_eq!(trees.len(), expect);
            let distinct: BTreeSet<_> = trees.iter().collect();
            assert_eq!(distinct.len(), expect);
        }
    }

    #[test]
    fn small_ideal_dims() {
        assert_eq!(arnold_ideal_dim(2).unwrap(), 1);
        assert_eq!(arnold_ideal_dim(3).unwrap(), 2);
        assert_eq!(arnold_ideal_dim(4).unwrap(), 6);
        assert!(arnold_ideal_dim(8).is_err());
    }

    #[test]
    fn membership() {
        let star = TreeMonomial::from_pairs(3, &[(3, 1), (3, 2)]).unwrap();
        assert!(straighten_membership(&star).unwrap());
        let path = TreeMonomial::from_pairs(4, &[(4, 2), (1, 4), (3, 1)]).unwrap();
        assert!(straighten_membership(&path).unwrap());
    }

    #[test]
    fn smallest_symmetrizations() {
        for p in Parities::all() {
            assert_eq!(dense_symmetrization_dim(2, 1, 1, p).unwrap(), if p.eps_n == 0 { 1 } else { 0 });
            assert_eq!(dense_symmetrization_dim(3, 1, 1, p).unwrap(), 0);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            dense_symmetrization_dim(8, 4, 4, Parities::new(0, 0)),
            Err(Error::OracleCapExceeded { .. })
        ));
    }
}
