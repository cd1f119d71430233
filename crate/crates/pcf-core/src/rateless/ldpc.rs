//! Rate-0.95 (3,60) regular LDPC precode: seeded construction and systematic
//! encoding.

use super::bp::{BpState, CheckObs};
use super::RatelessError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// A (3,60) regular parity-check code of design rate 1 - 3/60 = 0.95.
///
/// Construction starts from a random stub interleaver and repairs duplicate
/// edges (always) and 4-cycles (whenever the size permits) by targeted edge
/// swaps that preserve both degree profiles. A 4-cycle-free graph needs
/// `3 * n_variables` distinct check pairs out of `C(n_checks, 2)`, so codes
/// shorter than 2420 variables keep some 4-cycles by necessity.
#[derive(Clone, Debug)]
pub struct LdpcCode {
    pub n_variables: usize,
    pub n_checks: usize,
    /// Check-major adjacency; each row holds 60 sorted distinct variables.
    pub adjacency: Vec<Vec<usize>>,
    pub seed: u64,
    encoder: SystematicEncoder,
}

impl LdpcCode {
    /// Number of free (information) positions in a systematic codeword.
    pub fn n_info(&self) -> usize {
        self.encoder.info_cols.len()
    }

    /// Codeword positions that carry the information bits verbatim.
    pub fn info_positions(&self) -> &[usize] {
        &self.encoder.info_cols
    }

    /// Systematic encoding: place `info` on the free positions and solve the
    /// reduced parity rows for the remaining ones.
    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        assert_eq!(
            info.len(),
            self.n_info(),
            "expected {} information bits",
            self.n_info()
        );
        self.encoder.encode(info, self.n_variables)
    }

    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        assert_eq!(codeword.len(), self.n_variables);
        self.encoder
            .info_cols
            .iter()
            .map(|&c| codeword[c] & 1)
            .collect()
    }

    /// Whether every parity check is satisfied by `word`.
    pub fn parity_ok(&self, word: &[u8]) -> bool {
        assert_eq!(word.len(), self.n_variables);
        self.adjacency
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ (word[v] & 1)) == 0)
    }

    /// Append every parity constraint to a decoder under construction.
    pub(crate) fn add_checks_to(&self, bp: &mut BpState) {
        for row in &self.adjacency {
            bp.add_check(CheckObs::Parity, row);
        }
    }
}

/// Build a (3,60) regular code over `n_variables` (a multiple of 20, at
/// least 80). The same seed always reproduces the same code; a handful of
/// internal retries absorb singular parity matrices before giving up.
pub fn build_regular_ldpc(n_variables: usize, seed: u64) -> Result<LdpcCode, RatelessError> {
    if n_variables == 0 || n_variables % 20 != 0 {
        return Err(RatelessError::InvalidParam(format!(
            "variable count {n_variables} is not a positive multiple of 20"
        )));
    }
    let n_checks = n_variables / 20;
    if n_checks < 4 {
        return Err(RatelessError::InvalidParam(format!(
            "{n_variables} variables leave only {n_checks} checks for variable degree 3"
        )));
    }
    let enforce_pairs = 3 * n_variables <= n_checks * (n_checks - 1) / 2;
    for attempt in 0..20u64 {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E3779B97F4A7C15)));
        let Some(var_adj) = try_structure(n_variables, n_checks, enforce_pairs, &mut rng) else {
            continue;
        };
        let mut adjacency = vec![Vec::with_capacity(60); n_checks];
        for (v, trio) in var_adj.iter().enumerate() {
            for &c in trio {
                adjacency[c].push(v);
            }
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        if let Some(encoder) = SystematicEncoder::from_checks(n_variables, &adjacency) {
            return Ok(LdpcCode {
                n_variables,
                n_checks,
                adjacency,
                seed,
                encoder,
            });
        }
    }
    Err(RatelessError::Construction(format!(
        "no full-rank (3,60) structure over {n_variables} variables after 20 attempts"
    )))
}

type Trio = [usize; 3];

fn trio_pairs(t: &Trio) -> [(usize, usize); 3] {
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    [key(t[0], t[1]), key(t[0], t[2]), key(t[1], t[2])]
}

/// Random stub interleaver followed by targeted swap repair. Returns the
/// per-variable check trios, duplicate-free, and 4-cycle-free when
/// `enforce_pairs` is set.
fn try_structure(
    n_vars: usize,
    n_checks: usize,
    enforce_pairs: bool,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Trio>> {
    let mut stubs: Vec<usize> = (0..n_checks).flat_map(|c| std::iter::repeat_n(c, 60)).collect();
    stubs.shuffle(rng);
    let mut adj: Vec<Trio> = stubs
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    debug_assert_eq!(adj.len(), n_vars);

    // Multiplicity of each check pair across variable trios; a count above
    // one is a 4-cycle. Only maintained when pair uniqueness is enforced.
    let mut pair_count: HashMap<(usize, usize), u32> = HashMap::new();
    if enforce_pairs {
        for trio in &adj {
            if trio_is_distinct(trio) {
                for p in trio_pairs(trio) {
                    *pair_count.entry(p).or_insert(0) += 1;
                }
            }
        }
    }

    for _sweep in 0..200 {
        let offenders = find_offenders(&adj, enforce_pairs);
        if offenders.is_empty() {
            return Some(adj);
        }
        for (v, slot) in offenders {
            let _ = repair_edge(&mut adj, &mut pair_count, enforce_pairs, v, slot, rng);
        }
    }
    None
}

fn trio_is_distinct(t: &Trio) -> bool {
    t[0] != t[1] && t[0] != t[2] && t[1] != t[2]
}

/// Edges that must move: one slot of every duplicated check within a trio,
/// and every non-first use of an over-used check pair.
fn find_offenders(adj: &[Trio], enforce_pairs: bool) -> Vec<(usize, usize)> {
    let mut offenders = Vec::new();
    for (v, trio) in adj.iter().enumerate() {
        if trio[0] == trio[1] || trio[1] == trio[2] {
            offenders.push((v, 1));
        } else if trio[0] == trio[2] {
            offenders.push((v, 2));
        }
    }
    if enforce_pairs {
        let mut seen: HashMap<(usize, usize), bool> = HashMap::new();
        for (v, trio) in adj.iter().enumerate() {
            if !trio_is_distinct(trio) {
                continue;
            }
            for p in trio_pairs(trio) {
                if seen.insert(p, true).is_some() {
                    let slot = trio.iter().position(|&c| c == p.1).unwrap();
                    offenders.push((v, slot));
                }
            }
        }
        offenders.sort_unstable();
        offenders.dedup();
    }
    offenders
}

/// Whether the edge `(v, slot)` still needs repair: its trio carries a
/// duplicate check, or (when pairs are enforced) one of its tracked pairs is
/// used by more than one variable.
fn edge_conflicted(
    adj: &[Trio],
    pair_count: &HashMap<(usize, usize), u32>,
    enforce_pairs: bool,
    v: usize,
) -> bool {
    if !trio_is_distinct(&adj[v]) {
        return true;
    }
    enforce_pairs
        && trio_pairs(&adj[v])
            .iter()
            .any(|p| pair_count.get(p).copied().unwrap_or(0) >= 2)
}

/// Swap the check endpoint of edge `(v, slot)` with a random other edge.
/// Duplicate-free trios are preserved outright; with pair enforcement a swap
/// is kept only if it strictly lowers the total pair over-use, or keeps it
/// level while fixing a duplicate, so every accepted move shrinks a potential
/// function and the repair cannot cycle.
fn repair_edge(
    adj: &mut [Trio],
    pair_count: &mut HashMap<(usize, usize), u32>,
    enforce_pairs: bool,
    v: usize,
    slot: usize,
    rng: &mut ChaCha8Rng,
) -> bool {
    if !edge_conflicted(adj, pair_count, enforce_pairs, v) {
        return true; // an earlier swap this sweep already cleaned it up
    }
    let n_vars = adj.len();
    for _ in 0..200 {
        let v2 = rng.random_range(0..n_vars);
        let slot2 = rng.random_range(0..3);
        if v2 == v {
            continue;
        }
        let ca = adj[v][slot];
        let cb = adj[v2][slot2];
        if ca == cb {
            continue;
        }
        if adj[v].contains(&cb) || adj[v2].contains(&ca) {
            continue;
        }
        if !enforce_pairs {
            adj[v][slot] = cb;
            adj[v2][slot2] = ca;
            return true;
        }
        let old_v = adj[v];
        let old_v2 = adj[v2];
        let mut new_v = old_v;
        new_v[slot] = cb;
        let mut new_v2 = old_v2;
        new_v2[slot2] = ca;
        // Pairs whose multiplicity the swap can change.
        let mut touched: Vec<(usize, usize)> = Vec::with_capacity(12);
        for trio in [&old_v, &old_v2, &new_v, &new_v2] {
            if trio_is_distinct(trio) {
                touched.extend_from_slice(&trio_pairs(trio));
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let overuse = |map: &HashMap<(usize, usize), u32>, pairs: &[(usize, usize)]| -> u32 {
            pairs
                .iter()
                .map(|p| map.get(p).copied().unwrap_or(0).saturating_sub(1))
                .sum()
        };
        let dups = |a: &Trio, b: &Trio| {
            u32::from(!trio_is_distinct(a)) + u32::from(!trio_is_distinct(b))
        };
        let before = overuse(pair_count, &touched);
        let dup_before = dups(&old_v, &old_v2);
        for trio in [&old_v, &old_v2] {
            if trio_is_distinct(trio) {
                for p in trio_pairs(trio) {
                    *pair_count.get_mut(&p).expect("tracked pair") -= 1;
                }
            }
        }
        for trio in [&new_v, &new_v2] {
            if trio_is_distinct(trio) {
                for p in trio_pairs(trio) {
                    *pair_count.entry(p).or_insert(0) += 1;
                }
            }
        }
        let after = overuse(pair_count, &touched);
        let dup_after = dups(&new_v, &new_v2);
        if after < before || (after == before && dup_after < dup_before) {
            adj[v][slot] = cb;
            adj[v2][slot2] = ca;
            return true;
        }
        // Not an improvement: undo the bookkeeping and try another partner.
        for trio in [&new_v, &new_v2] {
            if trio_is_distinct(trio) {
                for p in trio_pairs(trio) {
                    *pair_count.get_mut(&p).expect("tracked pair") -= 1;
                }
            }
        }
        for trio in [&old_v, &old_v2] {
            if trio_is_distinct(trio) {
                for p in trio_pairs(trio) {
                    *pair_count.entry(p).or_insert(0) += 1;
                }
            }
        }
    }
    false
}

/// Reduced row echelon form of the parity matrix over GF(2), kept as bit
/// rows. Each reduced row touches exactly one pivot column, so parity bits
/// follow from the information bits row by row.
#[derive(Clone, Debug)]
struct SystematicEncoder {
    words: usize,
    rows: Vec<Vec<u64>>,
    pivot_cols: Vec<usize>,
    info_cols: Vec<usize>,
}

impl SystematicEncoder {
    /// Returns `None` when the parity matrix is rank deficient.
    fn from_checks(n_vars: usize, adjacency: &[Vec<usize>]) -> Option<Self> {
        let words = n_vars.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = adjacency
            .iter()
            .map(|row| {
                let mut bits = vec![0u64; words];
                for &v in row {
                    bits[v / 64] |= 1 << (v % 64);
                }
                bits
            })
            .collect();
        let mut pivot_cols = Vec::with_capacity(rows.len());
        let mut rank = 0;
        for col in 0..n_vars {
            let (wi, bi) = (col / 64, col % 64);
            let Some(pr) = (rank..rows.len()).find(|&r| rows[r][wi] >> bi & 1 == 1) else {
                continue;
            };
            rows.swap(rank, pr);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[wi] >> bi & 1 == 1 {
                    for (w, p) in row.iter_mut().zip(&pivot_row) {
                        *w ^= p;
                    }
                }
            }
            pivot_cols.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        if rank < rows.len() {
            return None;
        }
        let mut is_pivot = vec![false; n_vars];
        for &c in &pivot_cols {
            is_pivot[c] = true;
        }
        let info_cols = (0..n_vars).filter(|&c| !is_pivot[c]).collect();
        Some(SystematicEncoder {
            words,
            rows,
            pivot_cols,
            info_cols,
        })
    }

    fn encode(&self, info: &[u8], n_vars: usize) -> Vec<u8> {
        let mut x = vec![0u64; self.words];
        for (&bit, &col) in info.iter().zip(&self.info_cols) {
            if bit & 1 == 1 {
                x[col / 64] |= 1 << (col % 64);
            }
        }
        for (row, &p) in self.rows.iter().zip(&self.pivot_cols) {
            // The pivot position itself is still zero in x, so the dot
            // product below runs over the row's free columns only.
            let parity = row
                .iter()
                .zip(&x)
                .fold(0u32, |acc, (r, b)| acc ^ (r & b).count_ones())
                & 1;
            if parity == 1 {
                x[p / 64] |= 1 << (p % 64);
            }
        }
        (0..n_vars).map(|c| (x[c / 64] >> (c % 64) & 1) as u8).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var_degrees(code: &LdpcCode) -> Vec<usize> {
        let mut deg = vec![0usize; code.n_variables];
        for row in &code.adjacency {
            for &v in row {
                deg[v] += 1;
            }
        }
        deg
    }

    fn max_pair_multiplicity(code: &LdpcCode) -> u32 {
        let mut var_adj: Vec<Vec<usize>> = vec![Vec::new(); code.n_variables];
        for (c, row) in code.adjacency.iter().enumerate() {
            for &v in row {
                var_adj[v].push(c);
            }
        }
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for trio in &var_adj {
            for i in 0..trio.len() {
                for j in i + 1..trio.len() {
                    let key = (trio[i].min(trio[j]), trio[i].max(trio[j]));
                    *counts.entry(key).or_insert(0) += 1;
                }
            }
        }
        counts.values().copied().max().unwrap_or(0)
    }

    #[test]
    fn full_size_code_is_regular_and_four_cycle_free() {
        let code = build_regular_ldpc(4220, 1).unwrap();
        assert_eq!(code.n_checks, 211);
        assert!(code.adjacency.iter().all(|row| row.len() == 60));
        assert!(var_degrees(&code).iter().all(|&d| d == 3));
        // Rows are sorted and duplicate-free.
        for row in &code.adjacency {
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        // 3 * 4220 = 12660 pairs fit in C(211, 2) = 22155, so uniqueness is
        // enforced: no two checks share more than one variable.
        assert_eq!(max_pair_multiplicity(&code), 1);
        assert_eq!(code.n_info(), 4220 - 211);
    }

    #[test]
    fn short_code_keeps_exact_degrees_without_girth_guarantee() {
        let code = build_regular_ldpc(1060, 2).unwrap();
        assert_eq!(code.n_checks, 53);
        assert!(code.adjacency.iter().all(|row| row.len() == 60));
        assert!(var_degrees(&code).iter().all(|&d| d == 3));
        for row in &code.adjacency {
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(code.n_info(), 1060 - 53);
    }

    #[test]
    fn design_rate_is_exact() {
        for n in [1060usize, 2420, 4220] {
            assert_eq!(3 * n, 60 * (n / 20));
        }
    }

    #[test]
    fn same_seed_reproduces_the_code() {
        let a = build_regular_ldpc(1060, 7).unwrap();
        let b = build_regular_ldpc(1060, 7).unwrap();
        assert_eq!(a.adjacency, b.adjacency);
        let c = build_regular_ldpc(1060, 8).unwrap();
        assert_ne!(a.adjacency, c.adjacency);
    }

    #[test]
    fn systematic_encoding_satisfies_every_check() {
        use rand::{Rng, SeedableRng};
        let code = build_regular_ldpc(1060, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..20 {
            let info: Vec<u8> = (0..code.n_info()).map(|_| rng.random_range(0..2)).collect();
            let word = code.encode(&info);
            assert_eq!(word.len(), code.n_variables);
            assert!(code.parity_ok(&word));
            assert_eq!(code.extract_info(&word), info);
        }
        let zero = code.encode(&vec![0; code.n_info()]);
        assert!(zero.iter().all(|&b| b == 0));
    }

    #[test]
    fn rejects_malformed_sizes() {
        assert!(build_regular_ldpc(50, 1).is_err());
        assert!(build_regular_ldpc(0, 1).is_err());
        assert!(build_regular_ldpc(60, 1).is_err());
    }
}
