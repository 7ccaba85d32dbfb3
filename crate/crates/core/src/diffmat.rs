//! Difference matrices: verification, algebraic constructions, bounded
//! backtracking search and a verified registry.
//!
//! A `(G, k; 1)` difference matrix is a `k x |G|` table over `G` in which
//! every row pair's entrywise difference sequence is a permutation of `G`.
//! The inflation rule consumes them. Cyclic instances with
//! `gcd(m, (k-1)!) = 1` come from the multiplication table; products combine
//! coprime factors; everything else is found by a normalized depth-first
//! search and kept in a registry so downstream runs only re-verify.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abelian::{Elem, Group, Relabeling};
use crate::error::{Error, Result};
use crate::packing::{CertKind, Certificate, Failure};

pub const DEFAULT_BUDGET: u64 = 5_000_000;
pub const DEFAULT_SEED: u64 = 1;

/// Search is restricted to groups whose order fits a bitmask word.
const SEARCH_ORDER_LIMIT: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffMatrix {
    pub group: Group,
    pub k: usize,
    /// `k` rows of `|G|` entries each.
    pub rows: Vec<Vec<Elem>>,
}

impl DiffMatrix {
    pub fn new(group: Group, rows: Vec<Vec<Elem>>) -> Result<Self> {
        let k = rows.len();
        let order = group.order();
        for row in &rows {
            if row.len() != order {
                return Err(Error::DmShape {
                    rows: k,
                    cols: row.len(),
                    k,
                    order,
                });
            }
            for e in row {
                group.validate(e)?;
            }
        }
        Ok(DiffMatrix { group, k, rows })
    }

    /// First `k` rows.
    pub fn truncated(&self, k: usize) -> Result<DiffMatrix> {
        if k > self.k {
            return Err(Error::DmRowDeficit {
                need: k,
                have: self.k,
            });
        }
        Ok(DiffMatrix {
            group: self.group.clone(),
            k,
            rows: self.rows[..k].to_vec(),
        })
    }

    /// Applies a group relabeling entrywise.
    pub fn relabel(&self, rel: &Relabeling) -> Result<DiffMatrix> {
        if rel.src() != &self.group {
            return Err(Error::MixedGroups);
        }
        DiffMatrix::new(
            rel.dst().clone(),
            self.rows
                .iter()
                .map(|row| row.iter().map(|e| rel.map(e)).collect())
                .collect(),
        )
    }
}

/// Checks the row-pair difference-permutation property for all pairs.
pub fn verify_dm(d: &DiffMatrix) -> Certificate {
    let n = d.group.order();
    let mut cert = Certificate {
        kind: CertKind::Dm { k: d.k },
        group: d.group.moduli().to_vec(),
        ok: true,
        blocks_by_size: Default::default(),
        balanced: true,
        total_differences: d.k * (d.k.saturating_sub(1)) / 2 * n,
        max_multiplicity: 1,
        leave_size: 0,
        leave: Vec::new(),
        bound: None,
        failure: None,
        derivation: None,
    };
    for i in 0..d.k {
        for j in (i + 1)..d.k {
            let mut counts = vec![0u32; n];
            for l in 0..n {
                let diff = d
                    .group
                    .difference(&d.rows[i][l], &d.rows[j][l])
                    .expect("rows validated");
                counts[d.group.rank(&diff)] += 1;
            }
            if let Some(r) = (0..n).find(|&r| counts[r] != 1) {
                cert.ok = false;
                cert.max_multiplicity = counts[r];
                cert.failure = Some(Failure::DmPair {
                    row_a: i,
                    row_b: j,
                    elem: d.group.unrank(r).coords().to_vec(),
                    count: counts[r],
                });
                return cert;
            }
        }
    }
    cert
}

/// The multiplication-table matrix `d[i][l] = i*l (mod m)`, a
/// `(m, k; 1)` difference matrix whenever `gcd(m, (k-1)!) = 1`.
pub fn cdm_multiplication(m: u32, k: usize) -> Result<DiffMatrix> {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    for j in 2..k as u64 {
        if m > 1 && gcd(m as u64, j) != 1 {
            return Err(Error::DmGcd { m, kf: k - 1 });
        }
    }
    let group = Group::cyclic(m);
    let rows = (0..k)
        .map(|i| {
            (0..m)
                .map(|l| group.elem(&[(i as i64) * (l as i64)]).expect("valid"))
                .collect()
        })
        .collect();
    let d = DiffMatrix::new(group, rows)?;
    debug_assert!(verify_dm(&d).ok);
    Ok(d)
}

/// Product construction: columns indexed by column pairs,
/// `entry[i][(l1,l2)] = (d1[i][l1], d2[i][l2])`, a DM over `G x G'`.
pub fn dm_product(d1: &DiffMatrix, d2: &DiffMatrix, k: usize) -> Result<DiffMatrix> {
    let d1 = d1.truncated(k)?;
    let d2 = d2.truncated(k)?;
    let mut moduli = d1.group.moduli().to_vec();
    moduli.extend_from_slice(d2.group.moduli());
    let group = Group::new(moduli)?;
    let rows = (0..k)
        .map(|i| {
            let mut row = Vec::with_capacity(d1.group.order() * d2.group.order());
            for e1 in &d1.rows[i] {
                for e2 in &d2.rows[i] {
                    let mut coords = e1.coords().to_vec();
                    coords.extend_from_slice(e2.coords());
                    row.push(group.elem(&coords.iter().map(|&c| c as i64).collect::<Vec<_>>())
                        .expect("valid"));
                }
            }
            row
        })
        .collect();
    DiffMatrix::new(group, rows)
}

/// Result of a bounded search.
#[derive(Debug)]
pub enum SearchOutcome {
    Found(DiffMatrix),
    /// The whole normalized space was explored; no matrix exists.
    Exhausted { nodes: u64 },
    /// The node budget ran out first.
    OutOfBudget { nodes: u64 },
}

/// State for filling one free row as a permutation compatible with all
/// previously completed rows.
struct RowState {
    /// `cand[l]`: values still usable at column `l` of this row.
    cand: Vec<u128>,
    /// Sparse set of open columns (LIFO-restorable).
    open: Vec<u16>,
    open_pos: Vec<u16>,
    open_len: usize,
    /// Chosen value per column.
    values: Vec<u16>,
    /// Used difference masks against row 1 and each completed free row.
    pair_used: Vec<u128>,
    /// Undo log of `(column, previous mask)` entries.
    trail: Vec<(u16, u128)>,
}

struct SearchCtx {
    n: usize,
    free_rows: usize,
    sub: Vec<Vec<u16>>,
    order: Vec<u16>,
    /// Completed free rows.
    done: Vec<Vec<u16>>,
    nodes: u64,
    budget: u64,
}

enum Dfs {
    Found,
    NotHere,
    Budget,
}

impl SearchCtx {
    /// Initial per-column candidates for free row index `f`: the identity
    /// column consumes value 0 and difference 0 against row 1 and every
    /// completed row, so column `l` excludes `0`, `l` (row-1 difference 0)
    /// and each completed row's value at `l`.
    fn init_row(&self, _f: usize) -> RowState {
        let n = self.n;
        let full = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        let mut cand = vec![0u128; n];
        for l in 1..n {
            let mut mask = full & !1 & !(1u128 << l);
            for row in &self.done {
                mask &= !(1u128 << row[l]);
            }
            cand[l] = mask;
        }
        let open: Vec<u16> = (1..n as u16).collect();
        let mut open_pos = vec![u16::MAX; n];
        for (i, &l) in open.iter().enumerate() {
            open_pos[l as usize] = i as u16;
        }
        let open_len = open.len();
        RowState {
            cand,
            open,
            open_pos,
            open_len,
            values: vec![0u16; n],
            pair_used: vec![1u128; self.done.len() + 1],
            trail: Vec::new(),
        }
    }

    fn close_column(state: &mut RowState, l: usize) {
        let p = state.open_pos[l] as usize;
        let last = state.open_len - 1;
        let moved = state.open[last];
        state.open.swap(p, last);
        state.open_pos[moved as usize] = p as u16;
        state.open_pos[l] = last as u16;
        state.open_len = last;
    }

    fn reopen_column(state: &mut RowState) {
        state.open_len += 1;
    }

    /// Most constrained open column; `None` when a column has run dry.
    fn pick_column(state: &RowState) -> Option<usize> {
        let mut best = (u32::MAX, usize::MAX);
        for &l in &state.open[..state.open_len] {
            let c = state.cand[l as usize].count_ones();
            if c == 0 {
                return None;
            }
            if c < best.0 || (c == best.0 && (l as usize) < best.1) {
                best = (c, l as usize);
            }
        }
        if best.1 == usize::MAX {
            None
        } else {
            Some(best.1)
        }
    }

    /// After placing `v` at column `col` of the current row, remove from
    /// every open column: the value itself (row reuse) and the value that
    /// would repeat one of the consumed differences (against row 1 and each
    /// completed row).
    fn propagate(&self, state: &mut RowState, v: u16, diffs: &[u16]) -> bool {
        let mut alive = true;
        for i in 0..state.open_len {
            let l = state.open[i] as usize;
            let old = state.cand[l];
            let mut new = old & !(1u128 << v);
            // value aliasing the consumed row-1 difference: sub[l][w] = d1
            new &= !(1u128 << self.sub[l][diffs[0] as usize]);
            // same for each completed free row j: sub[done[j][l]][w] = d_j
            for (j, row) in self.done.iter().enumerate() {
                new &= !(1u128 << self.sub[row[l] as usize][diffs[j + 1] as usize]);
            }
            if new != old {
                state.trail.push((l as u16, old));
                state.cand[l] = new;
                if new == 0 {
                    alive = false;
                }
            }
        }
        alive
    }

    fn unwind(state: &mut RowState, mark: usize) {
        while state.trail.len() > mark {
            let (l, old) = state.trail.pop().expect("mark within trail");
            state.cand[l as usize] = old;
        }
    }

    /// Fills the current row cell by cell (most constrained column first),
    /// recursing into the next row on completion.
    fn fill_row(&mut self, state: &mut RowState) -> Dfs {
        if state.open_len == 0 {
            self.done.push(state.values.clone());
            let out = self.next_row();
            if !matches!(out, Dfs::Found) {
                self.done.pop();
            }
            return out;
        }
        let Some(col) = Self::pick_column(state) else {
            return Dfs::NotHere;
        };
        Self::close_column(state, col);
        // rows are interchangeable: canonicalize by sorting their values at
        // column 1 against the previous completed row
        let min_exclusive = if col == 1 {
            self.done.last().map_or(-1, |row| row[1] as i32)
        } else {
            -1
        };
        let base = state.cand[col];
        for idx in 0..self.n {
            let v = self.order[idx];
            if (v as i32) <= min_exclusive || base & (1u128 << v) == 0 {
                continue;
            }
            // differences against row 1 and each completed row
            let d1 = self.sub[col][v as usize];
            if state.pair_used[0] & (1u128 << d1) != 0 {
                continue;
            }
            let mut diffs = vec![d1];
            let mut ok = true;
            for (j, row) in self.done.iter().enumerate() {
                let d = self.sub[row[col] as usize][v as usize];
                if state.pair_used[j + 1] & (1u128 << d) != 0 {
                    ok = false;
                    break;
                }
                diffs.push(d);
            }
            if !ok {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return Dfs::Budget;
            }
            state.values[col] = v;
            for (slot, &d) in diffs.iter().enumerate() {
                state.pair_used[slot] |= 1u128 << d;
            }
            let mark = state.trail.len();
            let alive = self.propagate(state, v, &diffs);
            if alive {
                match self.fill_row(state) {
                    Dfs::Found => return Dfs::Found,
                    Dfs::Budget => return Dfs::Budget,
                    Dfs::NotHere => {}
                }
            }
            Self::unwind(state, mark);
            for (slot, &d) in diffs.iter().enumerate() {
                state.pair_used[slot] &= !(1u128 << d);
            }
        }
        Self::reopen_column(state);
        Dfs::NotHere
    }

    fn next_row(&mut self) -> Dfs {
        if self.done.len() == self.free_rows {
            return Dfs::Found;
        }
        let mut state = self.init_row(self.done.len());
        self.fill_row(&mut state)
    }
}

/// Number of seeded backtracking restarts in the first search phase.
const DFS_RESTARTS: u64 = 8;
/// Fraction of the budget given to the backtracking phase.
const DFS_SHARE: u64 = 2;

/// Seeded annealing over the free rows: keeps them permutations (with the
/// identity column fixed) and swaps entries to drive the number of repeated
/// differences to zero. Finds the dense-order instances that defeat plain
/// backtracking; cannot prove nonexistence.
fn anneal_rows(
    n: usize,
    free_rows: usize,
    sub: &[Vec<u16>],
    budget: u64,
    seed: u64,
    nodes: &mut u64,
) -> Option<Vec<Vec<u16>>> {
    if n < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b9).wrapping_add(0xA11))
        ;
    // pair p < q over row indices 0..=free_rows where row index 0 is the
    // fixed enumeration row; counts[pair][d] = multiplicity of difference d
    let rows_total = free_rows + 1;
    let pair_index = |p: usize, q: usize| -> usize {
        debug_assert!(p < q);
        p * rows_total - p * (p + 1) / 2 + (q - p - 1)
    };
    let pair_count = rows_total * (rows_total - 1) / 2;

    let mut rows: Vec<Vec<u16>> = Vec::new();
    let mut counts = vec![vec![0u16; n]; pair_count];
    let mut cost: i64 = 0;

    let mut init = |rows: &mut Vec<Vec<u16>>,
                    counts: &mut Vec<Vec<u16>>,
                    cost: &mut i64,
                    rng: &mut ChaCha8Rng| {
        rows.clear();
        rows.push((0..n as u16).collect()); // the fixed enumeration row
        for _ in 0..free_rows {
            let mut vals: Vec<u16> = (1..n as u16).collect();
            vals.shuffle(rng);
            let mut row = vec![0u16];
            row.extend(vals);
            rows.push(row);
        }
        for c in counts.iter_mut() {
            c.iter_mut().for_each(|x| *x = 0);
        }
        *cost = 0;
        for p in 0..rows_total {
            for q in (p + 1)..rows_total {
                let pi = pair_index(p, q);
                for l in 0..n {
                    let d = sub[rows[p][l] as usize][rows[q][l] as usize] as usize;
                    counts[pi][d] += 1;
                    if counts[pi][d] > 1 {
                        *cost += 1;
                    }
                }
            }
        }
    };
    init(&mut rows, &mut counts, &mut cost, &mut rng);

    let mut temperature = 1.0f64;
    let mut since_improvement = 0u64;
    let mut best = cost;
    while *nodes < budget {
        if cost == 0 {
            return Some(rows[1..].to_vec());
        }
        *nodes += 1;
        since_improvement += 1;
        // decay temperature; reheat with fresh rows on long stagnation
        if *nodes % 256 == 0 {
            temperature = (temperature * 0.9995).max(0.05);
        }
        if since_improvement > 200_000 {
            init(&mut rows, &mut counts, &mut cost, &mut rng);
            temperature = 1.0;
            since_improvement = 0;
            best = cost;
            continue;
        }
        // swap two non-identity entries of one free row
        let f = 1 + (rng.gen_range(0..free_rows));
        let l1 = 1 + rng.gen_range(0..n - 1);
        let mut l2 = 1 + rng.gen_range(0..n - 1);
        while l2 == l1 {
            l2 = 1 + rng.gen_range(0..n - 1);
        }
        let mut delta: i64 = 0;
        // remove old differences, add new ones, tracking the collision count
        let mut apply = |rows: &Vec<Vec<u16>>, counts: &mut Vec<Vec<u16>>, undo: bool| -> i64 {
            let mut d_cost = 0i64;
            for other in 0..rows_total {
                if other == f {
                    continue;
                }
                let (p, q, flip) = if other < f {
                    (other, f, false)
                } else {
                    (f, other, true)
                };
                let _ = flip;
                let pi = pair_index(p, q);
                for (la, lb) in [(l1, l2), (l2, l1)] {
                    // difference with rows[f] value currently at la moving to lb
                    let old_d = if other < f {
                        sub[rows[other][la] as usize][rows[f][la] as usize] as usize
                    } else {
                        sub[rows[f][la] as usize][rows[other][la] as usize] as usize
                    };
                    let new_d = if other < f {
                        sub[rows[other][la] as usize][rows[f][lb] as usize] as usize
                    } else {
                        sub[rows[f][lb] as usize][rows[other][la] as usize] as usize
                    };
                    if !undo {
                        if counts[pi][old_d] > 1 {
                            d_cost -= 1;
                        }
                        counts[pi][old_d] -= 1;
                        if counts[pi][new_d] >= 1 {
                            d_cost += 1;
                        }
                        counts[pi][new_d] += 1;
                    } else {
                        counts[pi][new_d] -= 1;
                        counts[pi][old_d] += 1;
                    }
                }
            }
            d_cost
        };
        delta += apply(&rows, &mut counts, false);
        let accept = delta <= 0 || {
            let p = (-(delta as f64) / temperature).exp();
            rng.gen::<f64>() < p
        };
        if accept {
            rows[f].swap(l1, l2);
            cost += delta;
            if cost < best {
                best = cost;
                since_improvement = 0;
            }
        } else {
            apply(&rows, &mut counts, true);
        }
    }
    None
}

/// Backtracking + annealing search for a `(G, k; 1)` difference matrix.
///
/// Phase one is a normalized depth-first search, row by row with forward
/// checking and most-constrained-column selection: row 0 is the identity
/// row, column 0 the identity column, row 1 enumerates the group in rank
/// order (any matrix can be translated and column-permuted into this form),
/// and the remaining rows are sorted by their value in column 1. Part of
/// the node budget is split across seeded restarts with shuffled value
/// orders; a restart that completes without hitting its budget is a
/// nonexistence proof (`Exhausted`).
///
/// Phase two spends the remaining budget on seeded annealing over the free
/// rows, which reliably finds the dense instances (orders 27 and up) that
/// backtracking cannot reach. Everything is deterministic in
/// `(group, k, budget, seed)`.
pub fn dm_search(g: &Group, k: usize, budget: u64, seed: u64) -> Result<SearchOutcome> {
    let n = g.order();
    if k > n {
        return Err(Error::DmInfeasible { k, order: n });
    }
    if n > SEARCH_ORDER_LIMIT {
        return Err(Error::DmTooLarge(n));
    }
    let build = |done: &[Vec<u16>]| -> DiffMatrix {
        let mut rows: Vec<Vec<Elem>> = Vec::with_capacity(k);
        rows.push((0..n).map(|_| g.identity()).collect());
        if k >= 2 {
            rows.push((0..n).map(|l| g.unrank(l)).collect());
        }
        for row in done {
            rows.push((0..n).map(|l| g.unrank(row[l] as usize)).collect());
        }
        DiffMatrix::new(g.clone(), rows).expect("search output well-formed")
    };

    let mut sub = vec![vec![0u16; n]; n];
    for a in 0..n {
        let ea = g.unrank(a);
        for b in 0..n {
            let d = g.difference(&ea, &g.unrank(b)).expect("same group");
            sub[a][b] = g.rank(&d) as u16;
        }
    }
    let free_rows = k.saturating_sub(2);
    if n == 1 || free_rows == 0 {
        let d = build(&[]);
        debug_assert!(verify_dm(&d).ok);
        return Ok(SearchOutcome::Found(d));
    }

    let mut total_nodes = 0u64;
    let dfs_budget = budget / DFS_SHARE;
    for restart in 0..DFS_RESTARTS {
        let remaining = dfs_budget.saturating_sub(total_nodes);
        if remaining == 0 {
            break;
        }
        let this_budget = if restart + 1 == DFS_RESTARTS {
            remaining
        } else {
            remaining.min((dfs_budget / DFS_RESTARTS).max(1))
        };
        let mut order: Vec<u16> = (0..n as u16).collect();
        if seed != 0 || restart != 0 {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b9).wrapping_add(restart));
            order.shuffle(&mut rng);
        }
        let mut ctx = SearchCtx {
            n,
            free_rows,
            sub: sub.clone(),
            order,
            done: Vec::new(),
            nodes: 0,
            budget: this_budget,
        };
        match ctx.next_row() {
            Dfs::Found => {
                let d = build(&ctx.done);
                debug_assert!(verify_dm(&d).ok);
                return Ok(SearchOutcome::Found(d));
            }
            Dfs::NotHere => {
                return Ok(SearchOutcome::Exhausted {
                    nodes: total_nodes + ctx.nodes,
                })
            }
            Dfs::Budget => {
                total_nodes += ctx.nodes;
            }
        }
    }
    if let Some(done) = anneal_rows(n, free_rows, &sub, budget, seed, &mut total_nodes) {
        let d = build(&done);
        let cert = verify_dm(&d);
        assert!(cert.ok, "annealing output must verify");
        return Ok(SearchOutcome::Found(d));
    }
    Ok(SearchOutcome::OutOfBudget { nodes: total_nodes })
}


// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// One stored difference matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DmDocument {
    pub moduli: Vec<u32>,
    pub k: usize,
    pub rows: Vec<Vec<Vec<u32>>>,
    pub seed: u64,
    pub generator: String,
    pub verified: bool,
}

impl DmDocument {
    pub fn from_matrix(d: &DiffMatrix, seed: u64, generator: &str) -> Self {
        DmDocument {
            moduli: d.group.moduli().to_vec(),
            k: d.k,
            rows: d
                .rows
                .iter()
                .map(|row| row.iter().map(|e| e.coords().to_vec()).collect())
                .collect(),
            seed,
            generator: generator.to_string(),
            verified: true,
        }
    }

    pub fn to_matrix(&self) -> Result<DiffMatrix> {
        let group = Group::new(self.moduli.clone())?;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|coords| {
                        group.elem(&coords.iter().map(|&c| c as i64).collect::<Vec<_>>())
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        DiffMatrix::new(group, rows)
    }
}

/// Pre-generated difference matrices shipped with the crate. Instances the
/// multiplication table cannot reach; each was found by `dm_search` with the
/// recorded seed and is re-verified on load.
const BUILTIN_DOCS: &[&str] = &[];

#[derive(Default)]
pub struct DmRegistry {
    entries: Vec<DmDocument>,
}

impl DmRegistry {
    pub fn empty() -> Self {
        DmRegistry::default()
    }

    pub fn builtin() -> Result<Self> {
        let mut reg = DmRegistry::default();
        for doc in BUILTIN_DOCS {
            reg.entries.push(serde_json::from_str(doc)?);
        }
        Ok(reg)
    }

    /// Loads every `*.json` document in a directory.
    pub fn from_dir(path: &std::path::Path) -> Result<Self> {
        let mut reg = DmRegistry::default();
        let mut paths: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p)?;
            reg.entries.push(serde_json::from_str(&text)?);
        }
        Ok(reg)
    }

    pub fn push(&mut self, doc: DmDocument) {
        self.entries.push(doc);
    }

    pub fn entries(&self) -> &[DmDocument] {
        &self.entries
    }

    fn lookup_exact(&self, moduli: &[u32], k: usize) -> Option<&DmDocument> {
        self.entries
            .iter()
            .find(|d| d.moduli == moduli && d.k >= k)
    }

    /// Match up to coordinate order; returns the document and the coordinate
    /// permutation `perm` with `doc.moduli[perm[i]] == moduli[i]`.
    fn lookup_permuted(&self, moduli: &[u32], k: usize) -> Option<(&DmDocument, Vec<usize>)> {
        let mut sorted: Vec<u32> = moduli.to_vec();
        sorted.sort_unstable();
        'entry: for doc in &self.entries {
            if doc.k < k || doc.moduli.len() != moduli.len() {
                continue;
            }
            let mut doc_sorted = doc.moduli.clone();
            doc_sorted.sort_unstable();
            if doc_sorted != sorted {
                continue;
            }
            let mut used = vec![false; moduli.len()];
            let mut perm = Vec::with_capacity(moduli.len());
            for &m in moduli {
                match (0..doc.moduli.len()).find(|&j| !used[j] && doc.moduli[j] == m) {
                    Some(j) => {
                        used[j] = true;
                        perm.push(j);
                    }
                    None => continue 'entry,
                }
            }
            return Some((doc, perm));
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Provider: the dispatch used by the engine
// ---------------------------------------------------------------------------

fn prime_power_factors(mut m: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2u32;
    while d * d <= m {
        if m % d == 0 {
            let mut q = 1u32;
            while m % d == 0 {
                q *= d;
                m /= d;
            }
            out.push(q);
        }
        d += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// The relabeling refining every coordinate into prime-power cyclic factors.
fn split_relabeling(g: &Group) -> Result<Relabeling> {
    let mut rel = Relabeling::identity(g);
    let mut i = 0;
    while i < rel.dst().arity() {
        let m = rel.dst().moduli()[i];
        let factors = prime_power_factors(m);
        if factors.len() > 1 {
            // split off all but the first factor, keeping positions adjacent
            let w: u32 = factors[1..].iter().product();
            let cur = rel.dst().clone();
            rel = rel.then(Relabeling::unmerge(&cur, i, i + 1, w)?)?;
        } else {
            i += 1;
        }
    }
    Ok(rel)
}

/// Resolves difference matrices: registry first (exact, permuted, or via the
/// prime-power split form), then the multiplication table, then products of
/// factor matrices, then bounded search. Every matrix handed out has passed
/// `verify_dm`.
pub struct DmProvider {
    registry: DmRegistry,
    pub budget: u64,
    pub seed: u64,
    cache: Mutex<HashMap<(Vec<u32>, usize), Option<DiffMatrix>>>,
}

impl DmProvider {
    pub fn new(registry: DmRegistry, budget: u64, seed: u64) -> Self {
        DmProvider {
            registry,
            budget,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_builtin() -> Result<Self> {
        Ok(DmProvider::new(
            DmRegistry::builtin()?,
            DEFAULT_BUDGET,
            DEFAULT_SEED,
        ))
    }

    pub fn registry(&self) -> &DmRegistry {
        &self.registry
    }

    pub fn available(&self, g: &Group, k: usize) -> bool {
        self.get(g, k).is_ok()
    }

    pub fn get(&self, g: &Group, k: usize) -> Result<DiffMatrix> {
        let key = (g.moduli().to_vec(), k);
        if let Some(cached) = self.cache.lock().unwrap().get(&key) {
            return match cached {
                Some(d) => Ok(d.clone()),
                None => Err(Error::DmUnavailable {
                    group: format!("{g}"),
                    k,
                }),
            };
        }
        let result = self.resolve(g, k);
        let mut cache = self.cache.lock().unwrap();
        match &result {
            Ok(d) => {
                cache.insert(key, Some(d.clone()));
            }
            Err(_) => {
                cache.insert(key, None);
            }
        }
        result
    }

    fn checked(&self, d: DiffMatrix, k: usize) -> Result<DiffMatrix> {
        let d = d.truncated(k)?;
        let cert = verify_dm(&d);
        if !cert.ok {
            return Err(Error::Certification {
                rule: "difference-matrix".into(),
                detail: format!("{:?}", cert.failure),
            });
        }
        Ok(d)
    }

    fn from_registry(&self, g: &Group, k: usize) -> Option<DiffMatrix> {
        if let Some(doc) = self.registry.lookup_exact(g.moduli(), k) {
            if let Ok(d) = doc.to_matrix() {
                return Some(d);
            }
        }
        if let Some((doc, perm)) = self.registry.lookup_permuted(g.moduli(), k) {
            if let Ok(d) = doc.to_matrix() {
                if let Ok(rel) = Relabeling::permute(&d.group, perm) {
                    if let Ok(d) = d.relabel(&rel) {
                        return Some(d);
                    }
                }
            }
        }
        // split form: e.g. Z_15 matches a stored Z_3 x Z_5 matrix
        if let Ok(split) = split_relabeling(g) {
            if split.dst() != g {
                let dst = split.dst().clone();
                if let Some(doc) = self.registry.lookup_exact(dst.moduli(), k) {
                    if let Ok(d) = doc.to_matrix() {
                        if let Ok(d) = d.relabel(&split.inverse()) {
                            return Some(d);
                        }
                    }
                }
                if let Some((doc, perm)) = self.registry.lookup_permuted(dst.moduli(), k) {
                    if let Ok(d) = doc.to_matrix() {
                        if let Ok(rel) = Relabeling::permute(&d.group, perm) {
                            if let Ok(d) = d.relabel(&rel) {
                                if let Ok(d) = d.relabel(&split.inverse()) {
                                    return Some(d);
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn resolve(&self, g: &Group, k: usize) -> Result<DiffMatrix> {
        if k > g.order() {
            return Err(Error::DmInfeasible {
                k,
                order: g.order(),
            });
        }
        if let Some(d) = self.from_registry(g, k) {
            return self.checked(d, k);
        }
        if g.arity() == 1 {
            if let Ok(d) = cdm_multiplication(g.moduli()[0], k) {
                return self.checked(d, k);
            }
        }
        // product of prime-power factor matrices
        if let Ok(split) = split_relabeling(g) {
            let dst = split.dst().clone();
            if dst.arity() >= 2 {
                let factors: Result<Vec<DiffMatrix>> = dst
                    .moduli()
                    .iter()
                    .map(|&q| self.get(&Group::cyclic(q), k))
                    .collect();
                if let Ok(factors) = factors {
                    let mut acc = factors[0].clone();
                    for f in &factors[1..] {
                        acc = dm_product(&acc, f, k)?;
                    }
                    let d = acc.relabel(&split.inverse())?;
                    return self.checked(d, k);
                }
            }
        }
        // bounded search
        if g.order() <= SEARCH_ORDER_LIMIT {
            if let SearchOutcome::Found(d) = dm_search(g, k, self.budget, self.seed)? {
                return self.checked(d, k);
            }
        }
        Err(Error::DmUnavailable {
            group: format!("{g}"),
            k,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplication_table_cases() {
        let d = cdm_multiplication(5, 5).unwrap();
        assert_eq!(d.rows.len(), 5);
        assert!(verify_dm(&d).ok);
        assert!(verify_dm(&cdm_multiplication(7, 5).unwrap()).ok);
        assert!(matches!(
            cdm_multiplication(15, 5),
            Err(Error::DmGcd { m: 15, .. })
        ));
    }

    #[test]
    fn verify_rejects_equal_columns() {
        let g = Group::cyclic(3);
        // duplicate column 0
        let rows = vec![
            vec![g.elem(&[0]).unwrap(), g.elem(&[0]).unwrap(), g.elem(&[0]).unwrap()],
            vec![g.elem(&[0]).unwrap(), g.elem(&[0]).unwrap(), g.elem(&[1]).unwrap()],
        ];
        let d = DiffMatrix::new(g, rows).unwrap();
        let cert = verify_dm(&d);
        assert!(!cert.ok);
        assert!(matches!(cert.failure, Some(Failure::DmPair { .. })));
    }

    #[test]
    fn product_of_cyclic_factors() {
        let d5 = cdm_multiplication(5, 5).unwrap();
        let d7 = cdm_multiplication(7, 5).unwrap();
        let prod = dm_product(&d5, &d7, 5).unwrap();
        assert_eq!(prod.group, Group::product2(5, 7));
        assert_eq!(prod.rows[0].len(), 35);
        assert!(verify_dm(&prod).ok);

        // CRT relabel to a cyclic (35, 5; 1) matrix
        let rel = Relabeling::merge(&prod.group, 0, 1).unwrap();
        let merged = prod.relabel(&rel).unwrap();
        assert_eq!(merged.group, Group::cyclic(35));
        assert!(verify_dm(&merged).ok);

        let square = dm_product(&d5, &d5, 5).unwrap();
        assert!(verify_dm(&square).ok);
    }

    #[test]
    fn product_with_trivial_group_is_isomorphic_copy() {
        let d5 = cdm_multiplication(5, 5).unwrap();
        let triv = cdm_multiplication(1, 5).unwrap();
        let prod = dm_product(&d5, &triv, 5).unwrap();
        assert!(verify_dm(&prod).ok);
        assert_eq!(prod.rows[0].len(), 5);
        for (i, row) in prod.rows.iter().enumerate() {
            for (l, e) in row.iter().enumerate() {
                assert_eq!(e.coords()[0], d5.rows[i][l].coords()[0]);
                assert_eq!(e.coords()[1], 0);
            }
        }
    }

    #[test]
    fn search_tiny() {
        // (Z_2, 2): rows (0,0) and (0,1)
        let g = Group::cyclic(2);
        match dm_search(&g, 2, 1000, 0).unwrap() {
            SearchOutcome::Found(d) => {
                assert!(verify_dm(&d).ok);
                assert_eq!(d.k, 2);
            }
            other => panic!("expected a matrix, got {other:?}"),
        }
    }

    #[test]
    fn search_finds_small_instances() {
        for moduli in [vec![2u32, 6], vec![3, 5]] {
            let g = Group::new(moduli.clone()).unwrap();
            match dm_search(&g, 5, DEFAULT_BUDGET, DEFAULT_SEED).unwrap() {
                SearchOutcome::Found(d) => {
                    assert!(verify_dm(&d).ok, "{moduli:?}");
                }
                other => panic!("no DM over {moduli:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn search_exhausts_z9() {
        // no (Z_9, 5; 1) difference matrix exists; the search proves it
        let g = Group::cyclic(9);
        match dm_search(&g, 5, u64::MAX, 0).unwrap() {
            SearchOutcome::Exhausted { .. } => {}
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn search_determinism() {
        let g = Group::product2(2, 6);
        let a = match dm_search(&g, 5, DEFAULT_BUDGET, 7).unwrap() {
            SearchOutcome::Found(d) => d,
            other => panic!("{other:?}"),
        };
        let b = match dm_search(&g, 5, DEFAULT_BUDGET, 7).unwrap() {
            SearchOutcome::Found(d) => d,
            other => panic!("{other:?}"),
        };
        assert_eq!(a, b);
    }

    #[test]
    fn provider_routes() {
        let provider = DmProvider::new(DmRegistry::empty(), DEFAULT_BUDGET, DEFAULT_SEED);
        // multiplication table route
        let d = provider.get(&Group::cyclic(7), 5).unwrap();
        assert!(verify_dm(&d).ok);
        // product route: 35 = 5 * 7
        let d = provider.get(&Group::cyclic(35), 5).unwrap();
        assert!(verify_dm(&d).ok);
        assert_eq!(d.group, Group::cyclic(35));
        // search route
        let d = provider.get(&Group::product2(2, 6), 5).unwrap();
        assert!(verify_dm(&d).ok);
        // unavailable: (Z_9, 5)
        assert!(provider.get(&Group::cyclic(9), 5).is_err());
    }

    #[test]
    #[ignore]
    fn diag_gf9_and_small() {
        // (Z_3 x Z_3, 5; 1) from the GF(9) multiplication table must verify
        let g = Group::product2(3, 3);
        // GF(9) = F_3[x]/(x^2+1); elements (a,b) = a + bx
        let mul = |p: (u32, u32), q: (u32, u32)| -> (u32, u32) {
            let (a, b) = (p.0 as i64, p.1 as i64);
            let (c, d) = (q.0 as i64, q.1 as i64);
            let re = (a * c - b * d).rem_euclid(3) as u32;
            let im = (a * d + b * c).rem_euclid(3) as u32;
            (re, im)
        };
        let elems: Vec<(u32, u32)> = (0..9u32).map(|r| (r / 3, r % 3)).collect();
        let rows: Vec<Vec<Elem>> = (0..5)
            .map(|i| {
                elems
                    .iter()
                    .map(|&e| {
                        let v = mul(elems[i], e);
                        g.elem(&[v.0 as i64, v.1 as i64]).unwrap()
                    })
                    .collect()
            })
            .collect();
        let d = DiffMatrix::new(g.clone(), rows).unwrap();
        assert!(verify_dm(&d).ok, "GF(9) table must be a DM");
        let out = dm_search(&g, 5, 10_000_000, 1).unwrap();
        match out {
            SearchOutcome::Found(d) => assert!(verify_dm(&d).ok),
            other => panic!("search failed on Z_3 x Z_3: {other:?}"),
        }
        println!("gf9 sanity ok");
    }

    /// Seed/budget sweep used to pick the shipped defaults; run manually:
    /// `cargo test -p diffpack --release -- --ignored calibrate --nocapture`
    #[test]
    #[ignore]
    fn calibrate_search_seeds() {
        for moduli in [
            vec![2u32, 6],
            vec![3, 5],
            vec![15],
            vec![3, 9],
            vec![9, 3],
            vec![27],
            vec![3, 27],
            vec![9, 9],
        ] {
            let g = Group::new(moduli.clone()).unwrap();
            for seed in [DEFAULT_SEED, 0, 2, 3, 4] {
                let start = std::time::Instant::now();
                match dm_search(&g, 5, 100_000_000, seed).unwrap() {
                    SearchOutcome::Found(d) => {
                        assert!(verify_dm(&d).ok);
                        println!("{moduli:?} seed {seed}: FOUND after {:?}", start.elapsed());
                        break;
                    }
                    SearchOutcome::Exhausted { nodes } => {
                        println!(
                            "{moduli:?} seed {seed}: EXHAUSTED after {nodes} nodes ({:?})",
                            start.elapsed()
                        );
                        break;
                    }
                    SearchOutcome::OutOfBudget { nodes } => {
                        println!(
                            "{moduli:?} seed {seed}: out of budget ({nodes} nodes, {:?})",
                            start.elapsed()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn registry_roundtrip_and_permutation() {
        let g = Group::product2(3, 5);
        let found = match dm_search(&g, 5, DEFAULT_BUDGET, DEFAULT_SEED).unwrap() {
            SearchOutcome::Found(d) => d,
            other => panic!("{other:?}"),
        };
        let doc = DmDocument::from_matrix(&found, DEFAULT_SEED, "search");
        let text = serde_json::to_string(&doc).unwrap();
        let parsed: DmDocument = serde_json::from_str(&text).unwrap();
        let back = parsed.to_matrix().unwrap();
        assert_eq!(back, found);

        let mut reg = DmRegistry::empty();
        reg.push(doc);
        let provider = DmProvider::new(reg, 0, 0);
        // exact orientation
        assert!(provider.get(&Group::product2(3, 5), 5).is_ok());
        // swapped orientation resolves through the stored permutation
        let swapped = provider.get(&Group::product2(5, 3), 5).unwrap();
        assert_eq!(swapped.group, Group::product2(5, 3));
        assert!(verify_dm(&swapped).ok);
        // merged cyclic form resolves through the split relabeling
        let merged = provider.get(&Group::cyclic(15), 5).unwrap();
        assert_eq!(merged.group, Group::cyclic(15));
        assert!(verify_dm(&merged).ok);
    }
}
