//! Exact linear algebra over Q for the sparse differentials.
//!
//! Ranks are computed modulo several word-sized primes and cross-checked; a
//! fraction-free elimination over the integers is the exact fallback. The
//! sparse [`Echelon`] form is used to build quotient coordinates (coinvariants)
//! and by the oracle.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Three primes just below 2^31, used in this order.
pub const DEFAULT_PRIMES: [u64; 3] = [2_147_483_647, 2_147_483_629, 2_147_483_587];

/// Extra primes tried when the default ones disagree.
pub const ESCALATION_PRIMES: [u64; 3] = [2_147_483_579, 2_147_483_563, 2_147_483_549];

/// Rational elimination is forced under `--verify-rational` for matrices with
/// at most this many nonzero entries.
pub const DEFAULT_RATIONAL_THRESHOLD: usize = 2000;

pub fn rational(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `num/den` with `den > 0`, always both parts.
pub fn format_fraction(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// `num` for integers, `num/den` otherwise.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format_fraction(q)
    }
}

pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => Some(Rational::from_integer(text.parse().ok()?)),
    }
}

/// Trial division; only used on word-sized candidates.
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p.is_multiple_of(2) {
        return p == 2;
    }
    let mut d = 3u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseRationalMatrix {
    rows: usize,
    cols: usize,
    /// Sorted by (row, col); no duplicates, no zeros.
    entries: Vec<(usize, usize, Rational)>,
}

impl SparseRationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseRationalMatrix { rows, cols, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseRationalMatrix { rows: n, cols: n, entries: (0..n).map(|i| (i, i, Rational::one())).collect() }
    }

    /// Builds a matrix from arbitrary triplets: duplicates are summed and
    /// zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: impl IntoIterator<Item = (usize, usize, Rational)>) -> Result<Self> {
        let mut acc: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::SizeMismatch(format!("entry ({r}, {c}) outside a {rows}x{cols} matrix")));
            }
            *acc.entry((r, c)).or_insert_with(Rational::zero) += v;
        }
        let entries = acc.into_iter().filter(|(_, v)| !v.is_zero()).map(|((r, c), v)| (r, c, v)).collect();
        Ok(SparseRationalMatrix { rows, cols, entries })
    }

    /// Column `j` of the result is `columns[j]`, given as (row, value) pairs.
    pub fn from_columns(rows: usize, columns: Vec<Vec<(usize, Rational)>>) -> Result<Self> {
        let cols = columns.len();
        let triplets = columns.into_iter().enumerate().flat_map(|(c, col)| col.into_iter().map(move |(r, v)| (r, c, v)));
        Self::from_triplets(rows, cols, triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, Rational)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|(r, c, v)| (*c, *r, v.clone())).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        SparseRationalMatrix { rows: self.cols, cols: self.rows, entries }
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &SparseRationalMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::SizeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut by_col: HashMap<usize, Vec<(usize, &Rational)>> = HashMap::new();
        for (r, c, v) in &self.entries {
            by_col.entry(*c).or_default().push((*r, v));
        }
        let mut acc: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        for (i, j, b) in &rhs.entries {
            if let Some(col) = by_col.get(i) {
                for (r, a) in col {
                    *acc.entry((*r, *j)).or_insert_with(Rational::zero) += *a * b;
                }
            }
        }
        let entries = acc.into_iter().filter(|(_, v)| !v.is_zero()).map(|((r, c), v)| (r, c, v)).collect();
        Ok(SparseRationalMatrix { rows: self.rows, cols: rhs.cols, entries })
    }

    /// Applies a row permutation and a column permutation:
    /// entry (r, c) moves to (row_perm[r], col_perm[c]).
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        let mut entries: Vec<_> =
            self.entries.iter().map(|(r, c, v)| (row_perm[*r], col_perm[*c], v.clone())).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        SparseRationalMatrix { rows: self.rows, cols: self.cols, entries }
    }

    fn sparse_rows(&self) -> Vec<Vec<(u32, &Rational)>> {
        let mut rows: Vec<Vec<(u32, &Rational)>> = vec![Vec::new(); self.rows];
        for (r, c, v) in &self.entries {
            rows[*r].push((*c as u32, v));
        }
        rows
    }
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    (a * b) % p
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

fn bigint_mod(n: &BigInt, p: u64) -> u64 {
    let r = n.mod_floor(&BigInt::from(p));
    r.to_u64().expect("residue fits in u64")
}

/// Reduces a rational modulo `p`; `None` when `p` divides the denominator.
pub fn rational_mod(q: &Rational, p: u64) -> Option<u64> {
    let den = bigint_mod(q.denom(), p);
    if den == 0 {
        return None;
    }
    Some(mul_mod(bigint_mod(q.numer(), p), inv_mod(den, p), p))
}

/// `row - factor * pivot` over GF(p); both inputs sorted by column.
fn sub_scaled_mod(row: &[(u32, u64)], pivot: &[(u32, u64)], factor: u64, p: u64) -> Vec<(u32, u64)> {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let take_row = j >= pivot.len() || (i < row.len() && row[i].0 < pivot[j].0);
        let take_piv = i >= row.len() || (j < pivot.len() && pivot[j].0 < row[i].0);
        if take_row {
            out.push(row[i]);
            i += 1;
        } else if take_piv {
            let v = (p - mul_mod(factor, pivot[j].1, p)) % p;
            if v != 0 {
                out.push((pivot[j].0, v));
            }
            j += 1;
        } else {
            let v = (row[i].1 + p - mul_mod(factor, pivot[j].1, p)) % p;
            if v != 0 {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Row-by-row elimination keyed on the leading column. Rows are fed sparsest
/// first, which keeps fill-in low on these matrices.
fn eliminate_mod(mut rows: Vec<Vec<(u32, u64)>>, p: u64) -> usize {
    rows.sort_by_key(|r| r.len());
    let mut pivots: HashMap<u32, Vec<(u32, u64)>> = HashMap::new();
    for mut row in rows {
        while let Some(&(lead, lv)) = row.first() {
            match pivots.get(&lead) {
                Some(piv) => row = sub_scaled_mod(&row, piv, lv, p),
                None => {
                    let inv = inv_mod(lv, p);
                    for e in row.iter_mut() {
                        e.1 = mul_mod(e.1, inv, p);
                    }
                    pivots.insert(lead, row);
                    break;
                }
            }
        }
    }
    pivots.len()
}

/// Rank over GF(p), or `None` if `p` divides some denominator.
pub fn rank_mod_p(m: &SparseRationalMatrix, p: u64) -> Option<usize> {
    let mut rows = Vec::with_capacity(m.rows);
    for row in m.sparse_rows() {
        let mut out = Vec::with_capacity(row.len());
        for (c, v) in row {
            let x = rational_mod(v, p)?;
            if x != 0 {
                out.push((c, x));
            }
        }
        if !out.is_empty() {
            rows.push(out);
        }
    }
    Some(eliminate_mod(rows, p))
}

fn content(row: &[(u32, BigInt)]) -> BigInt {
    row.iter().fold(BigInt::zero(), |g, (_, v)| g.gcd(v))
}

/// `a * row - b * pivot`, with both sorted by column.
fn combine_int(row: &[(u32, BigInt)], a: &BigInt, pivot: &[(u32, BigInt)], b: &BigInt) -> Vec<(u32, BigInt)> {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let v;
        let c;
        if j >= pivot.len() || (i < row.len() && row[i].0 < pivot[j].0) {
            c = row[i].0;
            v = a * &row[i].1;
            i += 1;
        } else if i >= row.len() || pivot[j].0 < row[i].0 {
            c = pivot[j].0;
            v = -(b * &pivot[j].1);
            j += 1;
        } else {
            c = row[i].0;
            v = a * &row[i].1 - b * &pivot[j].1;
            i += 1;
            j += 1;
        }
        if !v.is_zero() {
            out.push((c, v));
        }
    }
    out
}

/// Exact rank over Q by fraction-free elimination: rows are scaled to
/// primitive integer vectors and combined without division.
pub fn rank_rational(m: &SparseRationalMatrix) -> usize {
    let mut rows: Vec<Vec<(u32, BigInt)>> = Vec::with_capacity(m.rows);
    for row in m.sparse_rows() {
        if row.is_empty() {
            continue;
        }
        let lcm = row.iter().fold(BigInt::one(), |l, (_, v)| l.lcm(v.denom()));
        rows.push(row.into_iter().map(|(c, v)| (c, (v * &lcm).to_integer())).collect());
    }
    rows.sort_by_key(|r| r.len());
    let mut pivots: HashMap<u32, Vec<(u32, BigInt)>> = HashMap::new();
    for mut row in rows {
        while let Some((lead, lv)) = row.first().cloned() {
            match pivots.get(&lead) {
                Some(piv) => {
                    let pv = &piv[0].1;
                    let g = pv.gcd(&lv);
                    row = combine_int(&row, &(pv / &g), piv, &(&lv / &g));
                    let cont = content(&row);
                    if !cont.is_zero() && !cont.is_one() {
                        for e in row.iter_mut() {
                            e.1 = &e.1 / &cont;
                        }
                    }
                }
                None => {
                    pivots.insert(lead, row);
                    break;
                }
            }
        }
    }
    pivots.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankOptions {
    pub primes: Vec<u64>,
    /// Force rational elimination on matrices with at most
    /// `rational_threshold` nonzeros.
    pub verify_rational: bool,
    pub rational_threshold: usize,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            primes: DEFAULT_PRIMES.to_vec(),
            verify_rational: false,
            rational_threshold: DEFAULT_RATIONAL_THRESHOLD,
        }
    }
}

impl RankOptions {
    pub fn validate(&self) -> Result<()> {
        if self.primes.is_empty() {
            return Err(Error::InvalidArgument("at least one prime is required".into()));
        }
        for &p in &self.primes {
            if !is_prime(p) || p >= 1 << 31 {
                return Err(Error::InvalidArgument(format!("{p} is not a prime below 2^31")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    /// Rank modulo each prime tried; `None` when the prime divides a denominator.
    pub modular: Vec<(u64, Option<usize>)>,
    pub rational: Option<usize>,
}

/// Exact rank over Q.
///
/// The modular ranks are lower bounds. If every usable prime agrees (and at
/// least two were usable) that value is returned; otherwise more primes are
/// tried and the rational elimination settles the answer.
pub fn rank(m: &SparseRationalMatrix, opts: &RankOptions) -> RankReport {
    if m.is_zero() {
        return RankReport { rank: 0, modular: Vec::new(), rational: Some(0) };
    }
    let mut modular: Vec<(u64, Option<usize>)> = opts.primes.iter().map(|&p| (p, rank_mod_p(m, p))).collect();
    let force_rational = opts.verify_rational && m.nnz() <= opts.rational_threshold;

    let agreed = |modular: &[(u64, Option<usize>)]| -> Option<usize> {
        let ranks: Vec<usize> = modular.iter().filter_map(|(_, r)| *r).collect();
        if ranks.len() >= 2.min(modular.len()) && !ranks.is_empty() && ranks.iter().all(|&r| r == ranks[0]) {
            Some(ranks[0])
        } else {
            None
        }
    };

    if !force_rational {
        if let Some(r) = agreed(&modular) {
            return RankReport { rank: r, modular, rational: None };
        }
        for &p in ESCALATION_PRIMES.iter().filter(|p| !opts.primes.contains(p)) {
            modular.push((p, rank_mod_p(m, p)));
        }
    }
    let exact = rank_rational(m);
    RankReport { rank: exact, modular, rational: Some(exact) }
}

/// `a + coef * b` for sparse rational vectors sorted by index.
pub fn axpy(a: &[(u32, Rational)], coef: &Rational, b: &[(u32, Rational)]) -> Vec<(u32, Rational)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            out.push((b[j].0, coef * &b[j].1));
            j += 1;
        } else {
            let v = &a[i].1 + coef * &b[j].1;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Sorts by index, merges duplicates and drops zeros.
pub fn normalize_sparse(mut v: Vec<(u32, Rational)>) -> Vec<(u32, Rational)> {
    v.sort_by_key(|e| e.0);
    let mut out: Vec<(u32, Rational)> = Vec::with_capacity(v.len());
    for (c, x) in v {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += x,
            _ => out.push((c, x)),
        }
    }
    out.retain(|e| !e.1.is_zero());
    out
}

/// Row echelon form over Q for sparse rows, keyed by pivot column, with unit
/// leading coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Echelon {
    width: usize,
    rows: BTreeMap<u32, Vec<(u32, Rational)>>,
    reduced: bool,
}

impl Echelon {
    pub fn new(width: usize) -> Self {
        Echelon { width, rows: BTreeMap::new(), reduced: true }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Eliminates pivot columns from `v` (any order of entries accepted).
    pub fn reduce(&self, v: Vec<(u32, Rational)>) -> Vec<(u32, Rational)> {
        let mut v = normalize_sparse(v);
        let mut start = 0;
        loop {
            let Some(pos) = v[start..].iter().position(|(c, _)| self.rows.contains_key(c)) else {
                return v;
            };
            let pos = start + pos;
            let (c, coef) = v[pos].clone();
            let row = &self.rows[&c];
            v = axpy(&v, &-coef, row);
            start = pos.min(v.len());
        }
    }

    /// Adds a row to the span; returns whether the rank grew.
    pub fn insert(&mut self, v: Vec<(u32, Rational)>) -> bool {
        let mut v = normalize_sparse(v);
        loop {
            let Some((lead, lv)) = v.first().cloned() else { return false };
            match self.rows.get(&lead) {
                Some(row) => v = axpy(&v, &-lv, row),
                None => {
                    let inv = lv.recip();
                    for e in v.iter_mut() {
                        e.1 = &e.1 * &inv;
                    }
                    self.rows.insert(lead, v);
                    self.reduced = false;
                    return true;
                }
            }
        }
    }

    /// Back-substitutes so that every pivot column is zero in all other rows.
    pub fn make_reduced(&mut self) {
        if self.reduced {
            return;
        }
        let pivots: Vec<u32> = self.rows.keys().rev().copied().collect();
        for p in pivots {
            let row = self.rows.remove(&p).expect("pivot row");
            let mut head = vec![row[0].clone()];
            let tail = self.reduce(row[1..].to_vec());
            head.extend(tail);
            self.rows.insert(p, head);
        }
        self.reduced = true;
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn pivots(&self) -> impl Iterator<Item = u32> + '_ {
        self.rows.keys().copied()
    }

    pub fn row(&self, pivot: u32) -> Option<&[(u32, Rational)]> {
        self.rows.get(&pivot).map(|r| r.as_slice())
    }

    pub fn rows(&self) -> impl Iterator<Item = &Vec<(u32, Rational)>> {
        self.rows.values()
    }

    pub fn free_columns(&self) -> Vec<u32> {
        (0..self.width as u32).filter(|c| !self.rows.contains_key(c)).collect()
    }

    /// Rebuilds from rows already in reduced echelon form.
    pub fn from_reduced_rows(width: usize, rows: Vec<Vec<(u32, Rational)>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for row in rows {
            let Some((lead, lv)) = row.first() else {
                return Err(Error::InvalidArgument("empty echelon row".into()));
            };
            if !lv.is_one() || *lead as usize >= width {
                return Err(Error::InvalidArgument("echelon row without a unit pivot".into()));
            }
            map.insert(*lead, row);
        }
        let e = Echelon { width, rows: map, reduced: true };
        for row in e.rows.values() {
            if row[1..].iter().any(|(c, _)| e.rows.contains_key(c)) {
                return Err(Error::InvalidArgument("echelon rows are not reduced".into()));
            }
        }
        Ok(e)
    }
}

#[derive(Serialize, Deserialize)]
struct EchelonRepr {
    width: usize,
    rows: Vec<Vec<(u32, String)>>,
}

impl Serialize for Echelon {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut copy;
        let e = if self.reduced {
            self
        } else {
            copy = self.clone();
            copy.make_reduced();
            &copy
        };
        let rows = e.rows.values().map(|r| r.iter().map(|(c, v)| (*c, format_rational(v))).collect()).collect();
        EchelonRepr { width: e.width, rows }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Echelon {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = EchelonRepr::deserialize(deserializer)?;
        let mut rows = Vec::with_capacity(repr.rows.len());
        for row in repr.rows {
            let mut out = Vec::with_capacity(row.len());
            for (c, v) in row {
                let q = parse_rational(&v).ok_or_else(|| D::Error::custom(format!("bad rational {v:?}")))?;
                out.push((c, q));
            }
            rows.push(out);
        }
        Echelon::from_reduced_rows(repr.width, rows).map_err(D::Error::custom)
    }
}

/// Dimensions, ranks and Betti numbers of a bounded chain complex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyLevel {
    pub k: usize,
    pub dim: usize,
    /// Rank of the differential leaving this level, `C_k -> C_{k-1}`.
    pub rank: usize,
    pub betti: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub levels: Vec<HomologyLevel>,
}

impl HomologyResult {
    /// `dims[k]` and `ranks[k] = rank(d_k: C_k -> C_{k-1})`.
    pub fn from_dims_and_ranks(dims: &[usize], ranks: &[usize]) -> Result<Self> {
        if dims.len() != ranks.len() {
            return Err(Error::SizeMismatch("dims and ranks differ in length".into()));
        }
        let mut levels = Vec::with_capacity(dims.len());
        for k in 0..dims.len() {
            let next = ranks.get(k + 1).copied().unwrap_or(0);
            let betti = dims[k]
                .checked_sub(ranks[k] + next)
                .ok_or_else(|| Error::InvarianceViolated(format!("negative Betti number at k = {k}")))?;
            levels.push(HomologyLevel { k, dim: dims[k], rank: ranks[k], betti });
        }
        Ok(HomologyResult { levels })
    }

    pub fn euler_characteristic_chains(&self) -> i64 {
        self.levels.iter().map(|l| if l.k % 2 == 0 { l.dim as i64 } else { -(l.dim as i64) }).sum()
    }

    pub fn euler_characteristic_homology(&self) -> i64 {
        self.levels.iter().map(|l| if l.k % 2 == 0 { l.betti as i64 } else { -(l.betti as i64) }).sum()
    }
}

/// Writes the plain-text triple format: a `rows cols entries` header, one
/// `row col num/den` line per entry (1-based indices), and a `0 0 0`
/// terminator.
pub fn write_triples<W: Write>(m: &SparseRationalMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", m.rows, m.cols, m.entries.len())?;
    for (r, c, v) in &m.entries {
        writeln!(out, "{} {} {}", r + 1, c + 1, format_fraction(v))?;
    }
    writeln!(out, "0 0 0")
}

pub fn read_triples<R: BufRead>(input: R, source: &str) -> Result<SparseRationalMatrix> {
    let bad = |msg: String| Error::MatrixFormat { path: source.to_string(), msg };
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (_, header) = lines.next().ok_or_else(|| bad("missing header".into()))?;
    let header = header.map_err(|e| bad(e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(bad(format!("header must have three fields, got {:?}", header)));
    }
    let parse = |s: &str, what: &str| s.parse::<usize>().map_err(|_| bad(format!("bad {what} {s:?}")));
    let rows = parse(fields[0], "row count")?;
    let cols = parse(fields[1], "column count")?;
    let count = parse(fields[2], "entry count")?;

    let mut triplets = Vec::with_capacity(count);
    let mut terminated = false;
    for (lineno, line) in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(format!("line {lineno}: expected three fields")));
        }
        if f == ["0", "0", "0"] {
            terminated = true;
            break;
        }
        let r = parse(f[0], "row index")?;
        let c = parse(f[1], "column index")?;
        if r == 0 || c == 0 || r > rows || c > cols {
            return Err(bad(format!("line {lineno}: index ({r}, {c}) out of range")));
        }
        let v = parse_rational(f[2]).ok_or_else(|| bad(format!("line {lineno}: bad value {:?}", f[2])))?;
        triplets.push((r - 1, c - 1, v));
    }
    if !terminated {
        return Err(bad("missing 0 0 0 terminator".into()));
    }
    if triplets.len() != count {
        return Err(bad(format!("header announces {count} entries, found {}", triplets.len())));
    }
    SparseRationalMatrix::from_triplets(rows, cols, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, entries: &[(usize, usize, i64)]) -> SparseRationalMatrix {
        SparseRationalMatrix::from_triplets(rows, cols, entries.iter().map(|&(r, c, v)| (r, c, rational(v)))).unwrap()
    }

    #[test]
    fn fixed_primes_are_prime() {
        for p in DEFAULT_PRIMES.iter().chain(ESCALATION_PRIMES.iter()) {
            assert!(is_prime(*p), "{p}");
            assert!(*p < 1 << 31);
        }
    }

    #[test]
    fn zero_and_identity() {
        let opts = RankOptions::default();
        assert_eq!(rank(&SparseRationalMatrix::zeros(4, 7), &opts).rank, 0);
        assert_eq!(rank(&SparseRationalMatrix::identity(5), &opts).rank, 5);
        assert_eq!(rank_rational(&SparseRationalMatrix::identity(5)), 5);
    }

    #[test]
    fn rank_deficient_integer_matrix() {
        // third row = first + 2 * second
        let a = m(3, 3, &[(0, 0, 1), (0, 1, 2), (0, 2, 3), (1, 0, 4), (1, 1, 5), (1, 2, 6), (2, 0, 9), (2, 1, 12), (2, 2, 15)]);
        assert_eq!(rank_rational(&a), 2);
        assert_eq!(rank_mod_p(&a, DEFAULT_PRIMES[0]), Some(2));
        assert_eq!(rank(&a, &RankOptions::default()).rank, 2);
    }

    #[test]
    fn modular_rank_drops_at_small_prime() {
        // det = 6, so the rank mod 2 and mod 3 is 1 while the rank over Q is 2
        let a = m(2, 2, &[(0, 0, 2), (0, 1, 0), (1, 0, 0), (1, 1, 3)]);
        assert_eq!(rank_mod_p(&a, 2), Some(1));
        assert_eq!(rank_mod_p(&a, 3), Some(1));
        let opts = RankOptions { primes: vec![2, 3], ..Default::default() };
        let r = rank(&a, &opts);
        assert_eq!(r.rank, 1, "primes 2 and 3 agree, so the policy trusts them");
        let opts = RankOptions { primes: vec![2, 5], ..Default::default() };
        assert_eq!(rank(&a, &opts).rank, 2);
    }

    #[test]
    fn denominators_divisible_by_the_prime_are_skipped() {
        let a = SparseRationalMatrix::from_triplets(1, 1, [(0, 0, Rational::new(1.into(), 7.into()))]).unwrap();
        assert_eq!(rank_mod_p(&a, 7), None);
        let opts = RankOptions { primes: vec![7, 11, 13], ..Default::default() };
        assert_eq!(rank(&a, &opts).rank, 1);
    }

    #[test]
    fn verify_rational_forces_exact_elimination() {
        let a = m(2, 2, &[(0, 0, 1), (1, 1, 1)]);
        let opts = RankOptions { verify_rational: true, ..Default::default() };
        let r = rank(&a, &opts);
        assert_eq!(r.rational, Some(2));
    }

    #[test]
    fn multiplication_and_transpose() {
        let a = m(2, 3, &[(0, 0, 1), (0, 2, 2), (1, 1, -1)]);
        let b = m(3, 1, &[(0, 0, 2), (2, 0, -1)]);
        let ab = a.mul(&b).unwrap();
        assert!(ab.is_zero());
        assert_eq!(a.transpose().transpose(), a);
        assert!(a.mul(&a).is_err());
    }

    #[test]
    fn echelon_reduce_and_free_columns() {
        let mut e = Echelon::new(4);
        assert!(e.insert(vec![(0, rational(1)), (1, rational(-1))]));
        assert!(e.insert(vec![(1, rational(2)), (2, rational(-2))]));
        assert!(!e.insert(vec![(0, rational(1)), (2, rational(-1))]));
        e.make_reduced();
        assert_eq!(e.rank(), 2);
        assert_eq!(e.free_columns(), vec![2, 3]);
        let r = e.reduce(vec![(0, rational(3))]);
        assert_eq!(r, vec![(2, rational(3))]);
        let rows: Vec<_> = e.rows().cloned().collect();
        assert_eq!(Echelon::from_reduced_rows(4, rows).unwrap(), e);
    }

    #[test]
    fn triple_format_round_trip() {
        let a = SparseRationalMatrix::from_triplets(
            3,
            2,
            [(0, 1, Rational::new((-3).into(), 4.into())), (2, 0, rational(5))],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_triples(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "3 2 2\n1 2 -3/4\n3 1 5/1\n0 0 0\n");
        assert_eq!(read_triples(buf.as_slice(), "mem").unwrap(), a);
    }

    #[test]
    fn triple_format_rejects_garbage() {
        assert!(read_triples("2 2 1\n1 1 1/1\n".as_bytes(), "mem").is_err());
        assert!(read_triples("2 2 1\n3 1 1\n0 0 0\n".as_bytes(), "mem").is_err());
        assert!(read_triples("2 2 2\n1 1 1\n0 0 0\n".as_bytes(), "mem").is_err());
        assert!(read_triples("2 2 1\n1 1 1/0\n0 0 0\n".as_bytes(), "mem").is_err());
    }

    #[test]
    fn homology_from_ranks() {
        let h = HomologyResult::from_dims_and_ranks(&[0, 0, 1, 3, 2], &[0, 0, 0, 1, 2]).unwrap();
        let b: Vec<usize> = h.levels.iter().map(|l| l.betti).collect();
        assert_eq!(b, vec![0, 0, 0, 0, 0]);
        assert_eq!(h.euler_characteristic_chains(), h.euler_characteristic_homology());
        assert!(HomologyResult::from_dims_and_ranks(&[1], &[2]).is_err());
    }
}
