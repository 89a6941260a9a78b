//! Top-degree part of the Arnold algebra on a vertex set `{1..k}`.
//!
//! A tree monomial is a product of odd generators `u_{i,j}` along the edges of
//! a spanning tree. Modulo the Arnold relation the top degree has the
//! admissible monomials as a basis: one factor `u_{v,j(v)}` with `j(v) < v`
//! for every vertex `v >= 2`, ordered by `v`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rational, Rational};

/// The generator `u_{hi,lo}`, with `hi > lo >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeLetter {
    hi: u8,
    lo: u8,
}

impl EdgeLetter {
    /// Accepts the endpoints in either order.
    pub fn new(a: u8, b: u8) -> Result<Self> {
        if a == b || a == 0 || b == 0 {
            return Err(Error::InvalidEdge(a, b));
        }
        Ok(EdgeLetter { hi: a.max(b), lo: a.min(b) })
    }

    pub(crate) fn new_unchecked(a: u8, b: u8) -> Self {
        debug_assert!(a != b);
        EdgeLetter { hi: a.max(b), lo: a.min(b) }
    }

    pub fn hi(self) -> u8 {
        self.hi
    }

    pub fn lo(self) -> u8 {
        self.lo
    }

    pub fn contains(self, v: u8) -> bool {
        self.hi == v || self.lo == v
    }

    pub fn map(self, f: impl Fn(u8) -> u8) -> Self {
        EdgeLetter::new_unchecked(f(self.hi), f(self.lo))
    }
}

impl fmt::Display for EdgeLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{},{}", self.hi, self.lo)
    }
}

/// Checks that `edges` is a spanning tree on `{1..size}`.
pub fn check_spanning_tree(size: u8, edges: &[EdgeLetter]) -> Result<()> {
    if size == 0 {
        return Err(Error::EmptyVertexSet);
    }
    if edges.len() + 1 != size as usize {
        return Err(Error::NotSpanningTree(format!("{} edges on {} vertices", edges.len(), size)));
    }
    let mut parent: Vec<u8> = (0..=size).collect();
    fn find(parent: &mut [u8], mut v: u8) -> u8 {
        while parent[v as usize] != v {
            parent[v as usize] = parent[parent[v as usize] as usize];
            v = parent[v as usize];
        }
        v
    }
    for e in edges {
        if e.hi > size {
            return Err(Error::NotSpanningTree(format!("{e} leaves the vertex set 1..{size}")));
        }
        let (a, b) = (find(&mut parent, e.hi), find(&mut parent, e.lo));
        if a == b {
            return Err(Error::NotSpanningTree(format!("{e} closes a cycle")));
        }
        parent[a as usize] = b;
    }
    Ok(())
}

/// An ordered product of edge generators forming a spanning tree on `{1..size}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreeMonomial {
    size: u8,
    edges: Vec<EdgeLetter>,
}

impl TreeMonomial {
    pub fn new(size: u8, edges: Vec<EdgeLetter>) -> Result<Self> {
        check_spanning_tree(size, &edges)?;
        Ok(TreeMonomial { size, edges })
    }

    /// Convenience constructor from endpoint pairs.
    pub fn from_pairs(size: u8, pairs: &[(u8, u8)]) -> Result<Self> {
        let edges = pairs.iter().map(|&(a, b)| EdgeLetter::new(a, b)).collect::<Result<Vec<_>>>()?;
        Self::new(size, edges)
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    pub fn edges(&self) -> &[EdgeLetter] {
        &self.edges
    }

    /// Contracts the factor `u_{i,j}` without straightening: removes it
    /// (sign `(-1)^(l-1)` for position `l`), identifies `max(i,j)` with
    /// `min(i,j)` and closes the gap in the labels. `None` if `{i,j}` is not
    /// an edge.
    pub fn contract(&self, i: u8, j: u8) -> Result<Option<(i64, TreeMonomial)>> {
        if i == j || i == 0 || j == 0 || i.max(j) > self.size {
            return Err(Error::InvalidPair(i, j));
        }
        let target = EdgeLetter::new_unchecked(i, j);
        let Some(pos) = self.edges.iter().position(|&e| e == target) else {
            return Ok(None);
        };
        let (keep, gone) = (target.lo, target.hi);
        let merge = |v: u8| match v.cmp(&gone) {
            std::cmp::Ordering::Less => v,
            std::cmp::Ordering::Equal => keep,
            std::cmp::Ordering::Greater => v - 1,
        };
        let edges = self.edges.iter().enumerate().filter(|(p, _)| *p != pos).map(|(_, e)| e.map(merge)).collect();
        let sign = if pos % 2 == 0 { 1 } else { -1 };
        Ok(Some((sign, TreeMonomial { size: self.size - 1, edges })))
    }
}

impl fmt::Display for TreeMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.edges.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.edges.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Admissible monomial on `{1..k}`: `parents[v-2] = j(v) < v` for `v = 2..k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdmissibleMonomial {
    parents: Vec<u8>,
}

impl AdmissibleMonomial {
    pub fn new(parents: Vec<u8>) -> Result<Self> {
        for (i, &p) in parents.iter().enumerate() {
            let v = i as u8 + 2;
            if p == 0 || p >= v {
                return Err(Error::InvalidEdge(v, p));
            }
        }
        Ok(AdmissibleMonomial { parents })
    }

    pub fn size(&self) -> u8 {
        self.parents.len() as u8 + 1
    }

    pub fn parents(&self) -> &[u8] {
        &self.parents
    }

    /// Factors in admissible order (ascending larger endpoint).
    pub fn edges(&self) -> Vec<EdgeLetter> {
        self.parents.iter().enumerate().map(|(i, &p)| EdgeLetter::new_unchecked(i as u8 + 2, p)).collect()
    }

    pub fn to_tree(&self) -> TreeMonomial {
        TreeMonomial { size: self.size(), edges: self.edges() }
    }

    /// Position in [`admissible_basis`].
    pub fn index(&self) -> usize {
        self.parents.iter().enumerate().fold(0, |acc, (i, &p)| acc * (i + 1) + (p as usize - 1))
    }

    pub fn from_index(size: u8, mut index: usize) -> Self {
        let mut parents = vec![0u8; size.saturating_sub(1) as usize];
        for i in (0..parents.len()).rev() {
            let radix = i + 1;
            parents[i] = (index % radix) as u8 + 1;
            index /= radix;
        }
        AdmissibleMonomial { parents }
    }
}

impl fmt::Display for AdmissibleMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_tree().fmt(f)
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// `(size - 1)!`, the dimension of the top degree on `size` vertices.
pub fn basis_len(size: u8) -> usize {
    factorial(size.saturating_sub(1) as usize)
}

/// All admissible monomials on `{1..size}` in lexicographic order of
/// `(j(2), ..., j(size))`.
pub fn admissible_basis(size: u8) -> Result<Vec<AdmissibleMonomial>> {
    if size == 0 {
        return Err(Error::EmptyVertexSet);
    }
    Ok((0..basis_len(size)).map(|i| AdmissibleMonomial::from_index(size, i)).collect())
}

/// A rational combination of admissible monomials on `{1..size}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LElement {
    size: u8,
    terms: BTreeMap<AdmissibleMonomial, Rational>,
}

impl LElement {
    pub fn zero(size: u8) -> Self {
        LElement { size, terms: BTreeMap::new() }
    }

    pub fn monomial(m: AdmissibleMonomial) -> Self {
        let size = m.size();
        LElement { size, terms: BTreeMap::from([(m, Rational::one())]) }
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&AdmissibleMonomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &AdmissibleMonomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, m: AdmissibleMonomial, c: Rational) {
        debug_assert_eq!(m.size(), self.size);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add_scaled(&mut self, other: &LElement, c: &Rational) -> Result<()> {
        if other.size != self.size {
            return Err(Error::SizeMismatch(format!("vertex sets of size {} and {}", self.size, other.size)));
        }
        for (m, v) in &other.terms {
            self.add_term(m.clone(), v * c);
        }
        Ok(())
    }

    pub fn scaled(&self, c: &Rational) -> LElement {
        let mut out = LElement::zero(self.size);
        if !c.is_zero() {
            out.terms = self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect();
        }
        out
    }

    /// Coefficient vector indexed by [`AdmissibleMonomial::index`].
    pub fn to_dense(&self) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); basis_len(self.size)];
        for (m, c) in &self.terms {
            v[m.index()] = c.clone();
        }
        v
    }

    fn from_indexed(size: u8, terms: &[(u32, i64)], sign: i64) -> LElement {
        let mut out = LElement::zero(size);
        for &(i, c) in terms {
            out.add_term(AdmissibleMonomial::from_index(size, i as usize), rational(c * sign));
        }
        out
    }
}

impl fmt::Display for LElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(m, c)| format!("({}) {}", c, m)).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Sign of the permutation sorting `v`, with `v` sorted in place. The
/// entries are assumed distinct.
pub(crate) fn sort_with_sign<T: Ord>(v: &mut [T]) -> i64 {
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    sign
}

type Straightened = Arc<Vec<(u32, i64)>>;

fn memo() -> &'static DashMap<(u8, Vec<EdgeLetter>), Straightened> {
    static MEMO: OnceLock<DashMap<(u8, Vec<EdgeLetter>), Straightened>> = OnceLock::new();
    MEMO.get_or_init(DashMap::new)
}

/// Straightens a sorted spanning-tree edge list.
fn straighten_sorted(size: u8, edges: &[EdgeLetter]) -> Straightened {
    let key = (size, edges.to_vec());
    if let Some(hit) = memo().get(&key) {
        return hit.clone();
    }

    // Largest vertex that is the larger endpoint of two factors.
    let mut target = None;
    for w in edges.windows(2).rev() {
        if w[0].hi == w[1].hi {
            target = Some(w[0].hi);
            break;
        }
    }

    let result = match target {
        None => {
            let parents: Vec<u8> = edges.iter().map(|e| e.lo).collect();
            Arc::new(vec![(AdmissibleMonomial { parents }.index() as u32, 1)])
        }
        Some(i) => {
            let p = edges.iter().position(|e| e.hi == i).expect("target vertex present");
            let q = p + 1;
            let (a, b) = (edges[p].lo, edges[q].lo);
            let ba = EdgeLetter::new_unchecked(b, a);
            // u_{ia} u_{ib} = u_{ia} u_{ba} + u_{ba} u_{ib}, factors kept in place.
            let mut acc: BTreeMap<u32, i64> = BTreeMap::new();
            for pos in [q, p] {
                let mut next = edges.to_vec();
                next[pos] = ba;
                let sign = sort_with_sign(&mut next);
                for &(idx, c) in straighten_sorted(size, &next).iter() {
                    let e = acc.entry(idx).or_insert(0);
                    *e = e.checked_add(sign * c).expect("straightening coefficient overflow");
                }
            }
            Arc::new(acc.into_iter().filter(|(_, c)| *c != 0).collect())
        }
    };
    memo().insert(key, result.clone());
    result
}

/// Straightens an edge sequence on `{1..size}` into admissible-basis indices
/// with integer coefficients.
pub fn straighten_edges(size: u8, edges: &[EdgeLetter]) -> Result<Vec<(u32, i64)>> {
    check_spanning_tree(size, edges)?;
    let mut sorted = edges.to_vec();
    let sign = sort_with_sign(&mut sorted);
    Ok(straighten_sorted(size, &sorted).iter().map(|&(i, c)| (i, sign * c)).collect())
}

/// Class of a tree monomial in the admissible basis.
pub fn straighten(t: &TreeMonomial) -> LElement {
    let mut sorted = t.edges.clone();
    let sign = sort_with_sign(&mut sorted);
    LElement::from_indexed(t.size, &straighten_sorted(t.size, &sorted), sign)
}

/// Linear extension of [`straighten`] to formal combinations.
pub fn straighten_combination(size: u8, terms: &[(TreeMonomial, Rational)]) -> Result<LElement> {
    let mut out = LElement::zero(size);
    for (t, c) in terms {
        if t.size != size {
            return Err(Error::SizeMismatch(format!("tree on {} vertices in a combination on {}", t.size, size)));
        }
        out.add_scaled(&straighten(t), c)?;
    }
    Ok(out)
}

/// Contracts the edge `{i,j}` in every monomial of `x`. The result lives on
/// `{1..k-1}`: `max(i,j)` is identified with `min(i,j)` and larger labels
/// shift down by one.
pub fn contract_edge(x: &LElement, i: u8, j: u8) -> Result<LElement> {
    if i == j || i == 0 || j == 0 || i.max(j) > x.size {
        return Err(Error::InvalidPair(i, j));
    }
    let mut out = LElement::zero(x.size - 1);
    for (m, c) in &x.terms {
        if let Some((sign, t)) = m.to_tree().contract(i, j)? {
            out.add_scaled(&straighten(&t), &(c * rational(sign)))?;
        }
    }
    Ok(out)
}

/// [`contract_edge`] with an explicit relabeling of `V \ {max(i,j)}`, given
/// as the images of the surviving vertices in increasing order. Only the
/// order-preserving bijection onto `{1..k-1}` is accepted.
pub fn contract_edge_with(x: &LElement, i: u8, j: u8, relabel: &[u8]) -> Result<LElement> {
    let k = x.size;
    if relabel.len() + 1 != k as usize || relabel.iter().enumerate().any(|(p, &v)| v as usize != p + 1) {
        return Err(Error::NotOrderPreserving(k.saturating_sub(1)));
    }
    contract_edge(x, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(size: u8, pairs: &[(u8, u8)]) -> TreeMonomial {
        TreeMonomial::from_pairs(size, pairs).unwrap()
    }

    fn adm(parents: &[u8]) -> AdmissibleMonomial {
        AdmissibleMonomial::new(parents.to_vec()).unwrap()
    }

    #[test]
    fn basis_sizes_and_order() {
        assert!(admissible_basis(0).is_err());
        assert_eq!(admissible_basis(1).unwrap(), vec![adm(&[])]);
        assert_eq!(admissible_basis(2).unwrap(), vec![adm(&[1])]);
        assert_eq!(admissible_basis(3).unwrap(), vec![adm(&[1, 1]), adm(&[1, 2])]);
        for k in 1..=7u8 {
            let b = admissible_basis(k).unwrap();
            assert_eq!(b.len(), factorial(k as usize - 1));
            for (i, m) in b.iter().enumerate() {
                assert_eq!(m.index(), i);
            }
            assert!(b.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn rejects_non_trees() {
        assert!(matches!(TreeMonomial::from_pairs(3, &[(1, 2), (2, 1)]), Err(Error::NotSpanningTree(_))));
        assert!(matches!(TreeMonomial::from_pairs(3, &[(1, 2)]), Err(Error::NotSpanningTree(_))));
        assert!(matches!(TreeMonomial::from_pairs(3, &[(1, 2), (4, 1)]), Err(Error::NotSpanningTree(_))));
        assert!(EdgeLetter::new(2, 2).is_err());
    }

    #[test]
    fn star_at_three() {
        let x = straighten(&tree(3, &[(3, 1), (3, 2)]));
        assert_eq!(x.coefficient(&adm(&[1, 2])), rational(1));
        assert_eq!(x.coefficient(&adm(&[1, 1])), rational(-1));
        assert_eq!(x.len(), 2);
    }

    #[test]
    fn admissible_is_fixed_and_transposition_negates() {
        for m in admissible_basis(5).unwrap() {
            assert_eq!(straighten(&m.to_tree()), LElement::monomial(m.clone()));
            let mut e = m.edges();
            e.swap(1, 3);
            let t = TreeMonomial::new(5, e).unwrap();
            assert_eq!(straighten(&t), LElement::monomial(m).scaled(&rational(-1)));
        }
    }

    #[test]
    fn arnold_relation_vanishes() {
        // u12 u23 + u23 u31 + u31 u12 on {1,2,3}, times u34 on {1,2,3,4}
        let terms = [
            (tree(4, &[(1, 2), (2, 3), (3, 4)]), rational(1)),
            (tree(4, &[(2, 3), (3, 1), (3, 4)]), rational(1)),
            (tree(4, &[(3, 1), (1, 2), (3, 4)]), rational(1)),
        ];
        assert!(straighten_combination(4, &terms).unwrap().is_zero());
    }

    #[test]
    fn contraction_examples() {
        let u21 = LElement::monomial(adm(&[1]));
        assert_eq!(contract_edge(&u21, 1, 2).unwrap(), LElement::monomial(adm(&[])));

        let x = LElement::monomial(adm(&[1, 1]));
        assert_eq!(contract_edge(&x, 1, 3).unwrap(), LElement::monomial(adm(&[1])).scaled(&rational(-1)));
        assert!(contract_edge(&x, 2, 3).unwrap().is_zero());
        assert!(contract_edge(&x, 2, 2).is_err());
        assert!(contract_edge_with(&x, 1, 3, &[1, 2]).is_ok());
        assert!(matches!(contract_edge_with(&x, 1, 3, &[2, 1]), Err(Error::NotOrderPreserving(_))));
    }

    #[test]
    fn straighten_edges_matches_straighten() {
        let t = tree(4, &[(4, 2), (3, 1), (4, 1)]);
        let ix = straighten_edges(4, t.edges()).unwrap();
        assert_eq!(LElement::from_indexed(4, &ix, 1), straighten(&t));
    }
}
