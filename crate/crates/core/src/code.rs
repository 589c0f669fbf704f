//! Binary linear block codes: Hamming construction, shortening, systematic
//! encoding, syndromes and the Tanner-graph edge enumeration shared by every
//! decoder, trainer and op counter in the crate.
//!
//! Bits are carried as `u8` values in `{0, 1}`.

use std::ops::Range;

use crate::error::{Error, Result};

/// One edge of the Tanner graph, i.e. a one in `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub check: usize,
    pub var: usize,
}

/// A binary linear block code together with its Tanner graph.
///
/// Edges are enumerated check-major: all edges of check 0 in ascending
/// variable order, then check 1, and so on. Edge ids are stable for the
/// lifetime of the code and every per-edge vector in the crate uses them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    name: String,
    n: usize,
    k: usize,
    h: Vec<Vec<u8>>,
    g: Vec<Vec<u8>>,
    info_positions: Vec<usize>,
    cn_adj: Vec<Vec<usize>>,
    vn_adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cn_edge_ranges: Vec<Range<usize>>,
    vn_edges: Vec<Vec<usize>>,
}

impl LinearCode {
    /// Builds a code from its parity-check matrix. The generator is derived by
    /// Gaussian elimination over GF(2) with lowest-index pivoting; pivot
    /// columns become parity positions and the remaining columns, in ascending
    /// order, carry the message bits.
    pub fn from_parity_check(name: impl Into<String>, h: Vec<Vec<u8>>) -> Result<Self> {
        let rows = h.len();
        if rows == 0 {
            return Err(Error::param("parity-check matrix has no rows"));
        }
        let n = h[0].len();
        if n == 0 {
            return Err(Error::param("parity-check matrix has no columns"));
        }
        for (r, row) in h.iter().enumerate() {
            if row.len() != n {
                return Err(Error::param(format!(
                    "row {r} has {} columns, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|&b| b > 1) {
                return Err(Error::param(format!("row {r} has a non-binary entry")));
            }
        }

        let (reduced, pivots) = rref(&h);
        let k = n - pivots.len();
        if k == 0 {
            return Err(Error::param("code has dimension zero"));
        }
        let is_pivot = {
            let mut v = vec![false; n];
            for &p in &pivots {
                v[p] = true;
            }
            v
        };
        let info_positions: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
        let g = info_positions
            .iter()
            .map(|&j| {
                let mut row = vec![0u8; n];
                row[j] = 1;
                for (r, &p) in pivots.iter().enumerate() {
                    row[p] = reduced[r][j];
                }
                row
            })
            .collect();

        Self::from_parts(name.into(), h, g, info_positions)
    }

    fn from_parts(
        name: String,
        h: Vec<Vec<u8>>,
        g: Vec<Vec<u8>>,
        info_positions: Vec<usize>,
    ) -> Result<Self> {
        let n = h[0].len();
        let k = g.len();
        let cn_adj: Vec<Vec<usize>> = h
            .iter()
            .map(|row| (0..n).filter(|&v| row[v] == 1).collect())
            .collect();
        let mut vn_adj = vec![Vec::new(); n];
        let mut vn_edges = vec![Vec::new(); n];
        let mut edges = Vec::new();
        let mut cn_edge_ranges = Vec::with_capacity(cn_adj.len());
        for (c, vars) in cn_adj.iter().enumerate() {
            let start = edges.len();
            for &v in vars {
                vn_adj[v].push(c);
                vn_edges[v].push(edges.len());
                edges.push(Edge { check: c, var: v });
            }
            cn_edge_ranges.push(start..edges.len());
        }
        if let Some(v) = vn_adj.iter().position(|a| a.is_empty()) {
            return Err(Error::param(format!(
                "variable {v} is not covered by any check"
            )));
        }

        let code = LinearCode {
            name,
            n,
            k,
            h,
            g,
            info_positions,
            cn_adj,
            vn_adj,
            edges,
            cn_edge_ranges,
            vn_edges,
        };
        for (i, row) in code.g.iter().enumerate() {
            if code.syndrome_unchecked(row).iter().any(|&s| s != 0) {
                return Err(Error::Internal(format!(
                    "generator row {i} is not orthogonal to H"
                )));
            }
        }
        Ok(code)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Codeword length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Message length.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of parity checks (rows of `H`).
    pub fn num_checks(&self) -> usize {
        self.h.len()
    }

    /// Number of Tanner-graph edges.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn h(&self) -> &[Vec<u8>] {
        &self.h
    }

    pub fn g(&self) -> &[Vec<u8>] {
        &self.g
    }

    /// Codeword positions carrying message bits, in message order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// `N(c)`: variables attached to check `c`, ascending.
    pub fn check_neighbors(&self, c: usize) -> &[usize] {
        &self.cn_adj[c]
    }

    /// `M(v)`: checks attached to variable `v`, ascending.
    pub fn var_neighbors(&self, v: usize) -> &[usize] {
        &self.vn_adj[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Contiguous edge-id range of check `c`.
    pub fn check_edges(&self, c: usize) -> Range<usize> {
        self.cn_edge_ranges[c].clone()
    }

    /// Edge ids of variable `v`, ordered by check index.
    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.vn_edges[v]
    }

    pub fn edge_id(&self, check: usize, var: usize) -> Option<usize> {
        let vars = self.cn_adj.get(check)?;
        vars.binary_search(&var)
            .ok()
            .map(|i| self.cn_edge_ranges[check].start + i)
    }

    /// Systematic encoding: message bit `i` lands at `info_positions()[i]`.
    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        if msg.len() != self.k {
            return Err(Error::param(format!(
                "message has {} bits, expected {}",
                msg.len(),
                self.k
            )));
        }
        let mut word = vec![0u8; self.n];
        for (row, &bit) in self.g.iter().zip(msg) {
            if bit & 1 == 1 {
                for (w, &gb) in word.iter_mut().zip(row) {
                    *w ^= gb;
                }
            }
        }
        Ok(word)
    }

    /// `H · wordᵀ` over GF(2).
    pub fn syndrome(&self, word: &[u8]) -> Result<Vec<u8>> {
        if word.len() != self.n {
            return Err(Error::param(format!(
                "word has {} bits, expected {}",
                word.len(),
                self.n
            )));
        }
        Ok(self.syndrome_unchecked(word))
    }

    pub(crate) fn syndrome_unchecked(&self, word: &[u8]) -> Vec<u8> {
        self.cn_adj
            .iter()
            .map(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (word[v] & 1)))
            .collect()
    }

    pub fn syndrome_weight(&self, word: &[u8]) -> usize {
        self.cn_adj
            .iter()
            .filter(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (word[v] & 1)) == 1)
            .count()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n && self.syndrome_weight(word) == 0
    }

    /// Shortens the code by pinning the first `s` message positions to zero
    /// and deleting them.
    pub fn shorten(&self, s: usize) -> Result<Self> {
        if s >= self.k {
            return Err(Error::param(format!(
                "cannot shorten by {s}: code has k = {}",
                self.k
            )));
        }
        if s == 0 {
            return Ok(self.clone());
        }
        let removed = &self.info_positions[..s];
        let keep: Vec<usize> = (0..self.n).filter(|j| !removed.contains(j)).collect();
        let project = |row: &Vec<u8>| keep.iter().map(|&j| row[j]).collect::<Vec<u8>>();
        let h = self.h.iter().map(project).collect();
        let g = self.g[s..].iter().map(project).collect();
        let info_positions = self.info_positions[s..]
            .iter()
            .map(|p| keep.binary_search(p).expect("kept position"))
            .collect();
        let name = format!("{}_s{s}", self.name);
        Self::from_parts(name, h, g, info_positions)
    }

    /// Soft maximum-likelihood decoding by exhaustive enumeration of all
    /// `2^k` codewords; positive LLR favors bit 0. Ties keep the lowest
    /// message index.
    pub fn ml_decode_bruteforce(&self, llr: &[f64]) -> Result<Vec<u8>> {
        if self.k > 16 {
            return Err(Error::param(format!(
                "exhaustive ML decoding refused for k = {} (> 16)",
                self.k
            )));
        }
        if llr.len() != self.n {
            return Err(Error::param(format!(
                "llr has {} entries, expected {}",
                llr.len(),
                self.n
            )));
        }
        let mut best = vec![0u8; self.n];
        let mut best_score = f64::NEG_INFINITY;
        for word in self.codewords() {
            let score: f64 = word
                .iter()
                .zip(llr)
                .map(|(&x, &l)| if x == 0 { l } else { -l })
                .sum();
            if score > best_score {
                best_score = score;
                best = word;
            }
        }
        Ok(best)
    }

    /// Iterates over all codewords in message-index order. Only sensible for
    /// small `k`.
    pub fn codewords(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        let k = self.k;
        (0u64..(1u64 << k)).map(move |m| {
            let msg: Vec<u8> = (0..k).map(|i| ((m >> i) & 1) as u8).collect();
            self.encode(&msg).expect("message length matches k")
        })
    }
}

/// Reduced row echelon form over GF(2), pivoting on the lowest available row
/// of the lowest column. Returns the reduced rows (rank many) and pivot columns.
fn rref(h: &[Vec<u8>]) -> (Vec<Vec<u8>>, Vec<usize>) {
    let mut m: Vec<Vec<u8>> = h.to_vec();
    let n = m[0].len();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        if rank == m.len() {
            break;
        }
        let Some(r) = (rank..m.len()).find(|&r| m[r][col] == 1) else {
            continue;
        };
        m.swap(rank, r);
        let pivot_row = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != rank && row[col] == 1 {
                for (a, &b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    m.truncate(rank);
    (m, pivots)
}

/// The `(2^m − 1, 2^m − 1 − m)` Hamming code. Column `j` of `H` is the binary
/// representation of `j + 1` with the least significant bit in row 0.
pub fn build_hamming(m: u32) -> Result<LinearCode> {
    if !(2..=10).contains(&m) {
        return Err(Error::param(format!(
            "Hamming parameter m = {m} outside 2..=10"
        )));
    }
    let n = (1usize << m) - 1;
    let h = (0..m as usize)
        .map(|r| (1..=n).map(|col| ((col >> r) & 1) as u8).collect())
        .collect();
    let name = format!("hamming_{}_{}", n, n - m as usize);
    LinearCode::from_parity_check(name, h)
}

/// Resolves `hamming_<n>_<k>` names, shortening the smallest Hamming code
/// with `n − k` parity bits when `n < 2^(n−k) − 1`. `hamming_7_4` and
/// `hamming_71_64` are the two codes used throughout the experiments.
pub fn code_by_name(name: &str) -> Result<LinearCode> {
    let bad = || Error::param(format!("unknown code name {name:?}"));
    let rest = name.strip_prefix("hamming_").ok_or_else(bad)?;
    let (n, k) = rest.split_once('_').ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    let k: usize = k.parse().map_err(|_| bad())?;
    if k == 0 || k >= n {
        return Err(bad());
    }
    let m = (n - k) as u32;
    if !(2..=10).contains(&m) {
        return Err(bad());
    }
    let full = (1usize << m) - 1;
    if n > full || full - n >= full - m as usize {
        return Err(Error::param(format!(
            "{name:?} is not a (shortened) Hamming code"
        )));
    }
    Ok(build_hamming(m)?.shorten(full - n)?.with_name(name))
}
