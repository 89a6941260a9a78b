//! Command-line front end: per-descriptor runs, Betti tables, the check
//! suite and matrix export.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::arnold::{admissible_basis, factorial, straighten, TreeMonomial};
use crate::complex::{cache_file_name, probe_elements, ComputedComplex, Engine, KoszulComplexDescriptor};
use crate::error::{Error, Result};
use crate::forests::{orbit_basis, orbit_keys, set_act_sign_mutation, Parities};
use crate::linalg::{rank_rational, write_triples, RankOptions, DEFAULT_RATIONAL_THRESHOLD};
use crate::oracle::{arnold_ideal_dim, dense_symmetrization_dim};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest complexity computed without `--allow-large`.
pub const DEFAULT_MAX_T: u8 = 3;
/// Largest complexity computed at all.
pub const HARD_MAX_T: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "forest-homology", version, about = "Rational homology of long-knot spaces from complexes of forests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Directory for cached bases (overridden by FOREST_HOMOLOGY_CACHE).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma-separated primes for modular ranks.
    #[arg(long, value_delimiter = ',')]
    pub primes: Option<Vec<u64>>,
    /// Also run exact rational elimination on small matrices.
    #[arg(long)]
    pub verify_rational: bool,
    /// Nonzero-entry threshold for --verify-rational.
    #[arg(long, default_value_t = DEFAULT_RATIONAL_THRESHOLD)]
    pub rational_threshold: usize,
    /// Permit complexity t = 4.
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct Space {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub n: u32,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct Bidegree {
    #[arg(long)]
    pub s: u8,
    #[arg(long)]
    pub t: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Homology of one complex HH^{m,n}_{s,t}.
    Compute {
        #[command(flatten)]
        dims: Space,
        #[command(flatten)]
        bideg: Bidegree,
        #[command(flatten)]
        common: Common,
    },
    /// Betti numbers of the embedding space up to a degree (needs n > 2m+1).
    Table {
        #[command(flatten)]
        dims: Space,
        #[arg(long)]
        max_degree: i64,
        #[command(flatten)]
        common: Common,
    },
    /// Chain group dimensions and orbit counts per level.
    Dims {
        #[command(flatten)]
        dims: Space,
        #[command(flatten)]
        bideg: Bidegree,
        #[command(flatten)]
        common: Common,
    },
    /// Run the consistency gates.
    Check {
        #[command(flatten)]
        common: Common,
        /// Flip the sign of the group action on elements moving vertex 1.
        #[arg(long, hide = true)]
        inject_act_sign_flip: bool,
    },
    /// Write the differential C_k -> C_{k-1} in triple format, plus basis
    /// metadata next to it.
    Export {
        #[command(flatten)]
        dims: Space,
        #[command(flatten)]
        bideg: Bidegree,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the admissible basis on k points, or straighten a tree given
    /// as "a-b,c-d,...".
    #[command(hide = true)]
    Arnold {
        #[arg(long)]
        k: u8,
        #[arg(long)]
        tree: Option<String>,
    },
}

/// One `(s, t, k)` row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiRow {
    pub s: u8,
    pub t: u8,
    pub k: usize,
    pub dim: usize,
    /// Rank of `d: C_k -> C_{k-1}`.
    pub rank: usize,
    pub betti: usize,
    /// Degree in `H_*(Emb_c(R^m, R^n))`.
    pub j: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiTable {
    pub schema: String,
    pub version: u32,
    pub m: u32,
    pub n: u32,
    pub convergent: bool,
    pub rows: Vec<BettiRow>,
    /// Total Betti number per degree `j`.
    pub totals: BTreeMap<i64, usize>,
    /// Present for `table`: the requested bound and the degree through which
    /// every contribution was computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complete_through: Option<i64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub skipped: Vec<(u8, u8)>,
}

impl BettiTable {
    fn new(m: u32, n: u32) -> Self {
        BettiTable {
            schema: "forest-homology/betti-table".into(),
            version: SCHEMA_VERSION,
            m,
            n,
            convergent: n > 2 * m + 1,
            rows: Vec::new(),
            totals: BTreeMap::new(),
            max_degree: None,
            complete_through: None,
            skipped: Vec::new(),
        }
    }

    fn push_complex(&mut self, c: &ComputedComplex, max_degree: Option<i64>) {
        for level in &c.homology.levels {
            let j = c.desc.emb_degree(level.k);
            if level.dim == 0 || max_degree.is_some_and(|d| j > d) {
                continue;
            }
            self.rows.push(BettiRow {
                s: c.desc.s,
                t: c.desc.t,
                k: level.k,
                dim: level.dim,
                rank: level.rank,
                betti: level.betti,
                j,
            });
            *self.totals.entry(j).or_insert(0) += level.betti;
        }
    }
}

fn build_engine(common: &Common) -> Result<Engine> {
    let primes = common.primes.clone().unwrap_or_else(|| RankOptions::default().primes);
    let rank_options = RankOptions { primes, verify_rational: common.verify_rational, rational_threshold: common.rational_threshold };
    rank_options.validate()?;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Error::InvalidArgument("--jobs must be positive".into()));
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let cache_dir = std::env::var_os("FOREST_HOMOLOGY_CACHE").map(PathBuf::from).or_else(|| common.cache_dir.clone());
    Ok(Engine::new(rank_options, cache_dir))
}

/// Rough peak memory for one `(s, t)`: local spaces times relation rows.
pub fn memory_estimate(s: u8, t: u8) -> u64 {
    let mut bytes = 0u64;
    for k in 0..=(2 * t + 1) {
        for meet in orbit_keys(k, s, t) {
            let local: u64 = meet
                .iter()
                .map(|row| row.iter().map(|&x| x as u64).sum::<u64>())
                .chain((0..meet[0].len()).map(|r| meet.iter().map(|row| row[r] as u64).sum()))
                .map(|size| factorial(size.saturating_sub(1) as usize) as u64)
                .product();
            bytes += local * 256;
        }
    }
    bytes
}

fn check_envelope(t: u8, allow_large: bool) -> Result<()> {
    if t > HARD_MAX_T {
        return Err(Error::Envelope(format!("complexity t = {t} is beyond the supported range (t <= {HARD_MAX_T})")));
    }
    if t > DEFAULT_MAX_T && !allow_large {
        return Err(Error::Envelope(format!("complexity t = {t} needs --allow-large")));
    }
    Ok(())
}

fn envelope_note(s: u8, t: u8, err: &mut dyn Write) {
    if t > DEFAULT_MAX_T {
        let kib = memory_estimate(s, t).div_ceil(1024);
        let _ = writeln!(err, "estimated memory for (s, t) = ({s}, {t}): about {kib} KiB");
    }
}

fn descriptor(dims: Space, bideg: Bidegree) -> Result<KoszulComplexDescriptor> {
    KoszulComplexDescriptor::new(dims.m, dims.n, bideg.s, bideg.t)
}

pub fn compute_table(engine: &Engine, dims: Space, bideg: Bidegree) -> Result<(BettiTable, ComputedComplex)> {
    let desc = descriptor(dims, bideg)?;
    let c = engine.compute(&desc)?;
    let mut table = BettiTable::new(dims.m, dims.n);
    table.push_complex(&c, None);
    Ok((table, c))
}

/// All `(s, t)` with `1 <= s <= 2t` whose degree range starts at or below
/// `max_degree`, in increasing `(t, s)` order.
pub fn table_bidegrees(m: u32, n: u32, max_degree: i64) -> Vec<(u8, u8)> {
    let (m, n) = (m as i64, n as i64);
    let mut out = Vec::new();
    let mut t = 1i64;
    while (n - 2 * m - 1) * t <= max_degree && t <= 255 / 2 {
        for s in 1..=2 * t {
            if (n - 3) * t - (m - 1) * s <= max_degree {
                out.push((s as u8, t as u8));
            }
        }
        t += 1;
    }
    out
}

pub fn betti_table(engine: &Engine, m: u32, n: u32, max_degree: i64, allow_large: bool, err: &mut dyn Write) -> Result<BettiTable> {
    if n <= 2 * m + 1 {
        return Err(Error::InvalidArgument(format!(
            "table needs n > 2m + 1 (got m = {m}, n = {n}); below that range the complexes do not compute the embedding space"
        )));
    }
    if max_degree < 0 {
        return Err(Error::InvalidArgument("--max-degree must be nonnegative".into()));
    }
    let mut table = BettiTable::new(m, n);
    table.max_degree = Some(max_degree);
    let unit = engine.compute(&KoszulComplexDescriptor::new(m, n, 0, 0)?)?;
    table.push_complex(&unit, Some(max_degree));
    let mut complete = max_degree;
    let limit = if allow_large { HARD_MAX_T } else { DEFAULT_MAX_T };
    for (s, t) in table_bidegrees(m, n, max_degree) {
        if t > limit {
            let lowest = (n as i64 - 3) * t as i64 - (m as i64 - 1) * s as i64;
            complete = complete.min(lowest - 1);
            table.skipped.push((s, t));
            continue;
        }
        envelope_note(s, t, err);
        let c = engine.compute(&KoszulComplexDescriptor::new(m, n, s, t)?)?;
        table.push_complex(&c, Some(max_degree));
    }
    table.complete_through = Some(complete);
    Ok(table)
}

fn write_rows_text(out: &mut dyn Write, rows: &[BettiRow]) -> std::io::Result<()> {
    writeln!(out, "{:>3} {:>3} {:>3} {:>8} {:>8} {:>6} {:>5}", "s", "t", "k", "dim", "rank", "betti", "j")?;
    for r in rows {
        writeln!(out, "{:>3} {:>3} {:>3} {:>8} {:>8} {:>6} {:>5}", r.s, r.t, r.k, r.dim, r.rank, r.betti, r.j)?;
    }
    Ok(())
}

pub fn render_table(table: &BettiTable, format: Format, out: &mut dyn Write) -> Result<()> {
    let io = |source| Error::Io { path: PathBuf::from("<stdout>"), source };
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(table).map_err(|source| Error::Json { path: "<stdout>".into(), source })?;
            writeln!(out, "{text}").map_err(io)?;
        }
        Format::Csv => {
            writeln!(out, "s,t,k,dim,rank,betti,j").map_err(io)?;
            for r in &table.rows {
                writeln!(out, "{},{},{},{},{},{},{}", r.s, r.t, r.k, r.dim, r.rank, r.betti, r.j).map_err(io)?;
            }
        }
        Format::Text => {
            writeln!(out, "m = {}, n = {}{}", table.m, table.n, if table.convergent { "" } else { " (n <= 2m+1)" }).map_err(io)?;
            write_rows_text(out, &table.rows).map_err(io)?;
            if table.max_degree.is_some() {
                writeln!(out).map_err(io)?;
                writeln!(out, "{:>5} {:>6}", "j", "dim H_j").map_err(io)?;
                for j in 0..=table.max_degree.unwrap_or(0) {
                    let marker = if table.complete_through.is_some_and(|c| j > c) { "  (partial)" } else { "" };
                    writeln!(out, "{:>5} {:>6}{}", j, table.totals.get(&j).copied().unwrap_or(0), marker).map_err(io)?;
                }
                if !table.skipped.is_empty() {
                    let list: Vec<String> = table.skipped.iter().map(|(s, t)| format!("({s},{t})")).collect();
                    writeln!(out, "not computed (beyond the envelope): {}", list.join(" ")).map_err(io)?;
                }
            }
        }
    }
    Ok(())
}

/// One line of the check report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub arnold_max_k: u8,
    pub oracle_max_k: u8,
    pub max_st: u8,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { arnold_max_k: 6, oracle_max_k: 5, max_st: 3 }
    }
}

fn item(name: impl Into<String>, result: Result<String>) -> CheckItem {
    match result {
        Ok(detail) => CheckItem { name: name.into(), passed: true, detail },
        Err(e) => CheckItem { name: name.into(), passed: false, detail: e.to_string() },
    }
}

/// Serialized bases and differential matrices for all `s, t <= max_st`, in a
/// fixed order. Depends only on the parities of `m` and `n`.
pub fn complex_bytes(m: u32, n: u32, max_st: u8) -> Result<Vec<u8>> {
    let engine = Engine::default();
    let mut bytes = Vec::new();
    for s in 0..=max_st {
        for t in 0..=max_st {
            let c = engine.compute(&KoszulComplexDescriptor::new(m, n, s, t)?)?;
            for (g, d) in c.groups.iter().zip(&c.differentials) {
                bytes.extend(serde_json::to_vec(&*g.basis).map_err(|source| Error::Json { path: "<memory>".into(), source })?);
                write_triples(&d.matrix, &mut bytes).map_err(|source| Error::Io { path: "<memory>".into(), source })?;
            }
        }
    }
    Ok(bytes)
}

/// Runs every gate and returns one item per gate.
pub fn run_checks(opts: &CheckOptions) -> Vec<CheckItem> {
    let mut items = Vec::new();

    items.push(item(
        format!("Arnold quotient dimensions, k = 2..{}", opts.arnold_max_k),
        (|| {
            for k in 2..=opts.arnold_max_k {
                let basis = admissible_basis(k)?.len();
                let oracle = arnold_ideal_dim(k)?;
                if basis != factorial(k as usize - 1) || oracle != basis {
                    return Err(Error::InvarianceViolated(format!("k = {k}: basis {basis}, oracle {oracle}")));
                }
            }
            Ok("basis and oracle agree with (k-1)!".into())
        })(),
    ));

    items.push(item(
        format!("orbit dimensions against dense symmetrization, k <= {}", opts.oracle_max_k),
        (|| {
            let mut n = 0;
            for k in 0..=opts.oracle_max_k {
                for s in 0..=k {
                    for t in 0..=k {
                        for p in Parities::all() {
                            let dense = dense_symmetrization_dim(k, s, t, p)?;
                            let orbit = orbit_basis(k, s, t, p).dim();
                            if dense != orbit {
                                return Err(Error::InvarianceViolated(format!(
                                    "(k, s, t) = ({k}, {s}, {t}), {p}: dense {dense}, orbits {orbit}"
                                )));
                            }
                            n += 1;
                        }
                    }
                }
            }
            Ok(format!("{n} cases"))
        })(),
    ));

    let engine = Engine::default();
    let mut computed = Vec::new();
    items.push(item(
        format!("d∘d = 0 for s, t <= {}, all parity classes", opts.max_st),
        (|| {
            for p in Parities::all() {
                for s in 0..=opts.max_st {
                    for t in 0..=opts.max_st {
                        let desc = KoszulComplexDescriptor::new(2 + p.eps_m as u32, 6 + p.eps_n as u32, s, t)?;
                        computed.push(engine.compute(&desc)?);
                    }
                }
            }
            Ok(format!("{} complexes", computed.len()))
        })(),
    ));

    items.push(item(
        "Euler characteristics",
        (|| {
            for c in &computed {
                let (a, b) = (c.homology.euler_characteristic_chains(), c.homology.euler_characteristic_homology());
                if a != b {
                    return Err(Error::InvarianceViolated(format!("s = {}, t = {}: {a} vs {b}", c.desc.s, c.desc.t)));
                }
            }
            Ok(format!("{} complexes", computed.len()))
        })(),
    ));

    items.push(item(
        "modular ranks against rational elimination",
        (|| {
            let mut n = 0;
            for c in &computed {
                for (d, r) in c.differentials.iter().zip(&c.ranks) {
                    if d.matrix.nnz() <= DEFAULT_RATIONAL_THRESHOLD {
                        let exact = rank_rational(&d.matrix);
                        if exact != r.rank {
                            return Err(Error::InvarianceViolated(format!("rank {} vs exact {exact}", r.rank)));
                        }
                        n += 1;
                    }
                }
            }
            Ok(format!("{n} matrices"))
        })(),
    ));

    items.push(item(
        "equivariance of the projected differential",
        (|| {
            let mut n = 0;
            for p in Parities::all() {
                for s in 1..=opts.max_st {
                    for t in 1..=opts.max_st {
                        let desc = KoszulComplexDescriptor::new(2 + p.eps_m as u32, 6 + p.eps_n as u32, s, t)?;
                        for k in 1..=desc.max_level() as usize {
                            let probes = probe_elements(k as u8, s, (k as u8).saturating_sub(t));
                            n += engine.check_equivariance(&desc, k, &probes, 24)?;
                        }
                    }
                }
            }
            Ok(format!("{n} comparisons"))
        })(),
    ));

    items.push(item(
        "parity invariance (1,4)~(3,6) and (1,6)~(3,4)",
        (|| {
            let st = opts.max_st;
            for ((m1, n1), (m2, n2)) in [((1, 4), (3, 6)), ((1, 6), (3, 4))] {
                if complex_bytes(m1, n1, st)? != complex_bytes(m2, n2, st)? {
                    return Err(Error::InvarianceViolated(format!("({m1},{n1}) and ({m2},{n2}) differ")));
                }
            }
            Ok(format!("bases and matrices identical for s, t <= {st}"))
        })(),
    ));

    items
}

fn write_export(engine: &Engine, desc: &KoszulComplexDescriptor, k: usize, out: &Path) -> Result<()> {
    let d = engine.differential(desc, k)?;
    let file = fs::File::create(out).map_err(|source| Error::Io { path: out.to_path_buf(), source })?;
    let mut w = BufWriter::new(file);
    write_triples(&d.matrix, &mut w)
        .and_then(|_| w.flush())
        .map_err(|source| Error::Io { path: out.to_path_buf(), source })?;

    #[derive(Serialize)]
    struct Level {
        k: usize,
        dim: usize,
        generators: Vec<String>,
        cache_key: String,
    }
    #[derive(Serialize)]
    struct Meta {
        schema: &'static str,
        version: u32,
        m: u32,
        n: u32,
        s: u8,
        t: u8,
        source: Level,
        target: Level,
    }
    let level = |k: usize| -> Result<Level> {
        let g = engine.chain_group(desc, k)?;
        let p = desc.parities();
        Ok(Level {
            k,
            dim: g.dim(),
            generators: g.basis.basis_generators().iter().map(|x| x.to_string()).collect(),
            cache_key: cache_file_name(p, desc.s, desc.t, k as u8),
        })
    };
    let meta = Meta {
        schema: "forest-homology/basis",
        version: SCHEMA_VERSION,
        m: desc.m,
        n: desc.n,
        s: desc.s,
        t: desc.t,
        source: level(k)?,
        target: if k == 0 { Level { k: 0, dim: 0, generators: Vec::new(), cache_key: String::new() } } else { level(k - 1)? },
    };
    let mut meta_path = out.as_os_str().to_owned();
    meta_path.push(".basis.json");
    let meta_path = PathBuf::from(meta_path);
    let text = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json { path: meta_path.clone(), source })?;
    fs::write(&meta_path, text + "\n").map_err(|source| Error::Io { path: meta_path, source })
}

fn parse_tree(k: u8, text: &str) -> Result<TreeMonomial> {
    let mut pairs = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part
            .split_once('-')
            .ok_or_else(|| Error::InvalidArgument(format!("edge {part:?} is not of the form a-b")))?;
        let parse = |x: &str| x.trim().parse::<u8>().map_err(|_| Error::InvalidArgument(format!("bad vertex {x:?}")));
        pairs.push((parse(a)?, parse(b)?));
    }
    TreeMonomial::from_pairs(k, &pairs)
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let io = |source| Error::Io { path: PathBuf::from("<stdout>"), source };
    match cli.command {
        Command::Compute { dims, bideg, common } => {
            check_envelope(bideg.t, common.allow_large)?;
            envelope_note(bideg.s, bideg.t, err);
            if dims.n <= 2 * dims.m + 1 {
                let _ = writeln!(
                    err,
                    "warning: n <= 2m+1; the result describes the limit of the Taylor tower, which need not be the embedding space"
                );
            }
            let engine = build_engine(&common)?;
            let (table, _) = compute_table(&engine, dims, bideg)?;
            render_table(&table, common.format, out)?;
        }
        Command::Table { dims, max_degree, common } => {
            let engine = build_engine(&common)?;
            let table = betti_table(&engine, dims.m, dims.n, max_degree, common.allow_large, err)?;
            render_table(&table, common.format, out)?;
        }
        Command::Dims { dims, bideg, common } => {
            check_envelope(bideg.t, common.allow_large)?;
            let engine = build_engine(&common)?;
            let desc = descriptor(dims, bideg)?;
            #[derive(Serialize)]
            struct Row {
                k: usize,
                orbits: usize,
                dim: usize,
            }
            let mut rows = Vec::new();
            for k in 0..=desc.max_level() as usize {
                let g = engine.chain_group(&desc, k)?;
                rows.push(Row { k, orbits: g.basis.orbits.len(), dim: g.dim() });
            }
            match common.format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&rows).map_err(|source| Error::Json { path: "<stdout>".into(), source })?;
                    writeln!(out, "{text}").map_err(io)?;
                }
                Format::Csv => {
                    writeln!(out, "k,orbits,dim").map_err(io)?;
                    for r in &rows {
                        writeln!(out, "{},{},{}", r.k, r.orbits, r.dim).map_err(io)?;
                    }
                }
                Format::Text => {
                    writeln!(out, "{:>3} {:>7} {:>8}", "k", "orbits", "dim").map_err(io)?;
                    for r in &rows {
                        writeln!(out, "{:>3} {:>7} {:>8}", r.k, r.orbits, r.dim).map_err(io)?;
                    }
                }
            }
        }
        Command::Check { common, inject_act_sign_flip } => {
            build_engine(&common)?;
            set_act_sign_mutation(inject_act_sign_flip);
            let items = run_checks(&CheckOptions::default());
            let failed = items.iter().filter(|i| !i.passed).count();
            match common.format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&items).map_err(|source| Error::Json { path: "<stdout>".into(), source })?;
                    writeln!(out, "{text}").map_err(io)?;
                }
                _ => {
                    for i in &items {
                        writeln!(out, "{} {}: {}", if i.passed { "PASS" } else { "FAIL" }, i.name, i.detail).map_err(io)?;
                    }
                    writeln!(out, "{} of {} checks passed", items.len() - failed, items.len()).map_err(io)?;
                }
            }
            return Ok(if failed == 0 { 0 } else { 1 });
        }
        Command::Export { dims, bideg, k, out: path, common } => {
            check_envelope(bideg.t, common.allow_large)?;
            let engine = build_engine(&common)?;
            let desc = descriptor(dims, bideg)?;
            write_export(&engine, &desc, k, &path)?;
        }
        Command::Arnold { k, tree } => match tree {
            None => {
                for (i, m) in admissible_basis(k)?.iter().enumerate() {
                    writeln!(out, "{i:>4}  {m}").map_err(io)?;
                }
            }
            Some(text) => {
                let t = parse_tree(k, &text)?;
                writeln!(out, "{t} = {}", straighten(&t)).map_err(io)?;
            }
        },
    }
    Ok(0)
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 1 for failed checks or I/O errors, 2 for usage errors and
/// refused requests, 3 for internal invariant failures.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return e.exit_code();
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_internal() {
                3
            } else if matches!(e, Error::InvalidArgument(_) | Error::Envelope(_)) {
                2
            } else {
                1
            }
        }
    }
}
