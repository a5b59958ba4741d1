//! Contact-network generation and loading.
//!
//! Produces the simple undirected graphs the simulator spreads on: Erdős–Rényi
//! (by target mean degree), Barabási–Albert preferential attachment, and
//! whitespace-separated edge-list files. Also exposes the combinatorial
//! Laplacian used by the wavelet embedding.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum NetgenError {
    #[error("node count must be at least 2, got {0}")]
    TooFewNodes(usize),
    #[error("ER average degree must be in (0, n-1], got {avg_degree} for n={n}")]
    BadAverageDegree { n: usize, avg_degree: f64 },
    #[error("BA attachment parameter must satisfy 1 <= m < n, got m={m}, n={n}")]
    BadAttachment { n: usize, m: usize },
    #[error("cannot read edge list {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed edge list line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("graph is empty")]
    EmptyGraph,
}

/// How to obtain a contact network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkSpec {
    Er {
        n: usize,
        avg_degree: f64,
        rng_seed: u64,
    },
    Ba {
        n: usize,
        m: usize,
        rng_seed: u64,
    },
    File {
        path: String,
    },
}

impl NetworkSpec {
    pub fn realize(&self) -> Result<Graph, NetgenError> {
        match self {
            NetworkSpec::Er {
                n,
                avg_degree,
                rng_seed,
            } => generate_er(*n, *avg_degree, *rng_seed),
            NetworkSpec::Ba { n, m, rng_seed } => generate_ba(*n, *m, *rng_seed),
            NetworkSpec::File { path } => load_edge_list(path),
        }
    }
}

/// Immutable simple undirected graph.
///
/// Edges are stored once as `(u, v)` with `u < v` in generation order;
/// adjacency lists are sorted and symmetric. Construction rejects nothing at
/// this level — generators and loaders are responsible for dedup and
/// self-loop removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

impl Graph {
    /// Build from a deduplicated, self-loop-free edge list.
    pub fn from_edges(n: usize, mut edges: Vec<(u32, u32)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for nbrs in adjacency.iter_mut() {
            nbrs.sort_unstable();
        }
        Graph { n, edges, adjacency }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.iter().map(|a| a.len())
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    /// Canonical text form: a self-loop roster line per node, then the
    /// edges sorted. The roster pins node ids and isolated nodes across a
    /// save/load round trip; the loader registers loop endpoints as nodes
    /// and drops the loop itself.
    pub fn to_edge_list_string(&self) -> String {
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        let mut out = String::with_capacity((self.n + sorted.len()) * 12);
        let _ = writeln!(out, "# outbreak-edges v1 (self-loop roster registers ids, carries no edges)");
        for v in 0..self.n as u32 {
            let _ = writeln!(out, "{v} {v}");
        }
        for (u, v) in sorted {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// Content hash over node count and the canonical edge list. Used for
    /// embedding caches and checkpoint provenance.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.n.to_le_bytes());
        hasher.update(self.to_edge_list_string().as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }

    /// Connected components as lists of node ids (each list sorted).
    pub fn connected_components(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.n];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            seen[start] = true;
            stack.push(start as u32);
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in self.neighbors(u) {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }
}

/// Symmetric sparse matrix in CSR form. Only what the wavelet pipeline needs.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                dense[i][*c as usize] = *v;
            }
        }
        dense
    }
}

/// Erdős–Rényi G(n, p) with p = avg_degree / (n-1).
///
/// Pairs are visited in lexicographic order with geometric gap skipping, so
/// the cost is proportional to the number of edges drawn rather than n².
pub fn generate_er(n: usize, avg_degree: f64, rng_seed: u64) -> Result<Graph, NetgenError> {
    if n < 2 {
        return Err(NetgenError::TooFewNodes(n));
    }
    if avg_degree.is_nan() || avg_degree <= 0.0 || avg_degree > (n - 1) as f64 {
        return Err(NetgenError::BadAverageDegree { n, avg_degree });
    }
    let p = avg_degree / (n - 1) as f64;
    let mut rng = stream_rng(rng_seed, 0);
    let total_pairs = n as u64 * (n as u64 - 1) / 2;
    let mut edges = Vec::with_capacity((total_pairs as f64 * p * 1.1) as usize + 16);

    if p >= 1.0 {
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                edges.push((u, v));
            }
        }
        return Ok(Graph::from_edges(n, edges));
    }

    // Skip-sampling: the gap to the next present pair is geometric with
    // parameter p.
    let log1m_p = (1.0 - p).ln();
    let mut idx: u64 = 0;
    loop {
        let u: f64 = rng.gen::<f64>();
        // Draw in (0,1]; ln(0) would overflow the skip.
        let u = if u <= 0.0 { f64::MIN_POSITIVE } else { u };
        let skip = (u.ln() / log1m_p).floor() as u64;
        idx = match idx.checked_add(skip) {
            Some(next) if next < total_pairs => next,
            _ => break,
        };
        edges.push(pair_from_index(n as u64, idx));
        idx += 1;
        if idx >= total_pairs {
            break;
        }
    }
    Ok(Graph::from_edges(n, edges))
}

/// Decode a lexicographic pair index into (u, v), u < v.
fn pair_from_index(n: u64, idx: u64) -> (u32, u32) {
    // Row u starts at offset u*(n-1) - u*(u-1)/2; invert the quadratic
    // approximately, then correct by stepping.
    let c = (2 * n - 1) as f64;
    let mut u = ((c - (c * c - 8.0 * idx as f64).max(0.0).sqrt()) / 2.0).floor() as u64;
    let row_start = |u: u64| u * (n - 1) - u.saturating_sub(1) * u / 2;
    while u > 0 && row_start(u) > idx {
        u -= 1;
    }
    while u + 1 < n && row_start(u + 1) <= idx {
        u += 1;
    }
    let v = u + 1 + (idx - row_start(u));
    (u as u32, v as u32)
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a clique on the first m nodes; every later node attaches to m
/// distinct existing nodes chosen proportionally to degree (rejecting
/// duplicates within one node's attachment round).
pub fn generate_ba(n: usize, m: usize, rng_seed: u64) -> Result<Graph, NetgenError> {
    if n < 2 {
        return Err(NetgenError::TooFewNodes(n));
    }
    if m < 1 || m >= n {
        return Err(NetgenError::BadAttachment { n, m });
    }
    let mut rng = stream_rng(rng_seed, 0);
    let mut edges = Vec::with_capacity(m * (m - 1) / 2 + (n - m) * m);
    // Each edge endpoint appears once per incident edge, so sampling a
    // uniform entry is sampling proportional to degree.
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * (m * (m - 1) / 2 + (n - m) * m));

    for u in 0..m as u32 {
        for v in (u + 1)..m as u32 {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }

    let mut targets: Vec<u32> = Vec::with_capacity(m);
    for new_node in m as u32..n as u32 {
        targets.clear();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                // Only possible for m = 1 on the very first attachment:
                // the single seed node has degree zero.
                0
            } else {
                endpoints[rng.gen_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, new_node));
            endpoints.push(t);
            endpoints.push(new_node);
        }
    }
    Ok(Graph::from_edges(n, edges))
}

/// Parse an edge list: one `u v` pair per line, `#` comments and blank lines
/// allowed. Self-loops are dropped, duplicates merged, and node ids compacted
/// to 0..n-1 in order of first appearance.
pub fn load_edge_list<P: AsRef<Path>>(path: P) -> Result<Graph, NetgenError> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|source| NetgenError::Io {
        path: path_str.clone(),
        source,
    })?;
    parse_edge_list(BufReader::new(file)).map_err(|e| match e {
        NetgenError::Io { source, .. } => NetgenError::Io {
            path: path_str.clone(),
            source,
        },
        other => other,
    })
}

pub fn parse_edge_list<R: Read>(reader: R) -> Result<Graph, NetgenError> {
    let mut id_map: std::collections::HashMap<u64, u32> = std::collections::HashMap::new();
    let mut next_id: u32 = 0;
    let mut intern = |raw: u64| -> u32 {
        *id_map.entry(raw).or_insert_with(|| {
            let id = next_id;
            next_id += 1;
            id
        })
    };

    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for (line_no, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| NetgenError::Io {
            path: String::from("<reader>"),
            source,
        })?;
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let a = parts.next().ok_or_else(|| NetgenError::MalformedLine {
            line: line_no,
            reason: "missing endpoints".into(),
        })?;
        let b = parts.next().ok_or_else(|| NetgenError::MalformedLine {
            line: line_no,
            reason: "missing second endpoint".into(),
        })?;
        if parts.next().is_some() {
            return Err(NetgenError::MalformedLine {
                line: line_no,
                reason: "more than two fields".into(),
            });
        }
        let a: u64 = a.parse().map_err(|_| NetgenError::MalformedLine {
            line: line_no,
            reason: format!("not an integer: {a:?}"),
        })?;
        let b: u64 = b.parse().map_err(|_| NetgenError::MalformedLine {
            line: line_no,
            reason: format!("not an integer: {b:?}"),
        })?;
        // Intern both endpoints before dropping self-loops so an isolated
        // `u u` line still registers the node.
        let u = intern(a);
        let v = intern(b);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    if next_id == 0 {
        return Err(NetgenError::EmptyGraph);
    }
    Ok(Graph::from_edges(next_id as usize, edges))
}

/// Unnormalized combinatorial Laplacian L = D - A.
pub fn laplacian(graph: &Graph) -> Result<SparseMatrix, NetgenError> {
    if graph.n() == 0 {
        return Err(NetgenError::EmptyGraph);
    }
    let n = graph.n();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(2 * graph.edge_count() + n);
    let mut values = Vec::with_capacity(2 * graph.edge_count() + n);
    row_ptr.push(0);
    for i in 0..n as u32 {
        let nbrs = graph.neighbors(i);
        // Neighbor ids are sorted; splice the diagonal into place.
        let mut placed_diag = false;
        for &j in nbrs {
            if !placed_diag && j > i {
                col_idx.push(i);
                values.push(nbrs.len() as f64);
                placed_diag = true;
            }
            col_idx.push(j);
            values.push(-1.0);
        }
        if !placed_diag {
            col_idx.push(i);
            values.push(nbrs.len() as f64);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_forced_edge_at_p_one() {
        for seed in [0u64, 1, 99] {
            let g = generate_er(2, 1.0, seed).unwrap();
            assert_eq!(g.edges(), &[(0, 1)]);
        }
    }

    #[test]
    fn er_mean_degree_near_target() {
        let g = generate_er(10_000, 5.0, 1).unwrap();
        let mean = g.mean_degree();
        assert!((4.8..=5.2).contains(&mean), "mean degree {mean}");
    }

    #[test]
    fn er_edge_count_within_binomial_bounds() {
        // Binomial moments: mean = C(n,2) p, var = C(n,2) p (1-p).
        let n = 1000usize;
        let p = 5.0 / 999.0;
        let pairs = (n * (n - 1) / 2) as f64;
        let mean = pairs * p;
        let sigma = (mean * (1.0 - p)).sqrt();
        let g = generate_er(n, 5.0, 7).unwrap();
        let e = g.edge_count() as f64;
        assert!(
            (e - mean).abs() <= 3.0 * sigma,
            "edges {e}, expected {mean} +- {}",
            3.0 * sigma
        );
    }

    #[test]
    fn er_rejects_bad_parameters() {
        assert!(generate_er(1, 1.0, 0).is_err());
        assert!(generate_er(10, 0.0, 0).is_err());
        assert!(generate_er(10, -1.0, 0).is_err());
        assert!(generate_er(10, 10.0, 0).is_err());
    }

    #[test]
    fn ba_edge_count_forced_by_construction() {
        let g = generate_ba(10_000, 3, 1).unwrap();
        assert_eq!(g.edge_count(), 3 + 3 * (10_000 - 3));
    }

    #[test]
    fn ba_small_case_is_complete_graph() {
        for seed in [0u64, 5, 123] {
            let g = generate_ba(4, 3, seed).unwrap();
            assert_eq!(g.edge_count(), 6);
            for v in 0..4 {
                assert_eq!(g.degree(v), 3);
            }
        }
    }

    #[test]
    fn ba_min_degree_and_tail_exponent() {
        let g = generate_ba(5000, 3, 2).unwrap();
        for node in 3..5000u32 {
            assert!(g.degree(node) >= 3, "node {node} degree {}", g.degree(node));
        }
        // Continuous maximum-likelihood estimate of the tail exponent over
        // degrees >= 10 (Clauset-style, x_min correction 0.5).
        let dmin = 10.0f64;
        let tail: Vec<f64> = g
            .degrees()
            .filter(|&d| d >= 10)
            .map(|d| d as f64)
            .collect();
        assert!(tail.len() > 100, "tail too small: {}", tail.len());
        let s: f64 = tail.iter().map(|d| (d / (dmin - 0.5)).ln()).sum();
        let alpha = 1.0 + tail.len() as f64 / s;
        assert!(
            (2.5..=3.5).contains(&alpha),
            "tail exponent estimate {alpha}"
        );
    }

    #[test]
    fn ba_rejects_bad_m() {
        assert!(generate_ba(5, 0, 0).is_err());
        assert!(generate_ba(5, 5, 0).is_err());
    }

    #[test]
    fn edge_list_path_graph() {
        let g = parse_edge_list("0 1\n1 2".as_bytes()).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn edge_list_drops_self_loops() {
        let g = parse_edge_list("0 0\n0 1".as_bytes()).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn edge_list_dedups_and_compacts_ids() {
        let g = parse_edge_list("5 9\n9 5".as_bytes()).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn edge_list_reports_line_numbers() {
        let err = parse_edge_list("0 1\nnonsense".as_bytes()).unwrap_err();
        match err {
            NetgenError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn edge_list_comments_and_blanks_ok() {
        let g = parse_edge_list("# header\n\n0 1\n".as_bytes()).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn laplacian_of_path_two() {
        let g = Graph::from_edges(2, vec![(0, 1)]);
        let l = laplacian(&g).unwrap().to_dense();
        assert_eq!(l, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn laplacian_triangle_spectrum() {
        let g = Graph::from_edges(3, vec![(0, 1), (0, 2), (1, 2)]);
        let l = laplacian(&g).unwrap().to_dense();
        let flat: Vec<f64> = l.iter().flatten().copied().collect();
        let m = nalgebra::DMatrix::from_row_slice(3, 3, &flat);
        let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(eig[0].abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
        assert!((eig[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_annihilates_constant_vector() {
        let g = generate_er(200, 5.0, 11).unwrap();
        let l = laplacian(&g).unwrap();
        let ones = vec![1.0; 200];
        let mut out = vec![0.0; 200];
        l.matvec(&ones, &mut out);
        for v in out {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn save_load_round_trip_preserves_identity() {
        // Isolated node 3 and ids that would renumber without the roster.
        let g = Graph::from_edges(5, vec![(0, 2), (1, 4)]);
        let reloaded = parse_edge_list(g.to_edge_list_string().as_bytes()).unwrap();
        assert_eq!(reloaded.n(), 5);
        assert_eq!(reloaded.edges(), g.edges());
        assert_eq!(reloaded.content_hash(), g.content_hash());

        let er = generate_er(400, 3.0, 9).unwrap(); // low degree: isolated nodes likely
        let back = parse_edge_list(er.to_edge_list_string().as_bytes()).unwrap();
        assert_eq!(back.n(), er.n());
        assert_eq!(back.content_hash(), er.content_hash());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_er(500, 4.0, 42).unwrap();
        let b = generate_er(500, 4.0, 42).unwrap();
        assert_eq!(a.to_edge_list_string(), b.to_edge_list_string());
        let a = generate_ba(500, 3, 42).unwrap();
        let b = generate_ba(500, 3, 42).unwrap();
        assert_eq!(a.to_edge_list_string(), b.to_edge_list_string());
    }

    #[test]
    fn adjacency_symmetric_no_self_loops() {
        for g in [
            generate_er(300, 4.0, 3).unwrap(),
            generate_ba(300, 2, 3).unwrap(),
        ] {
            for u in 0..g.n() as u32 {
                for &v in g.neighbors(u) {
                    assert_ne!(u, v, "self loop at {u}");
                    assert!(g.neighbors(v).contains(&u), "asymmetric edge {u}-{v}");
                }
            }
        }
    }

    #[test]
    fn pair_index_roundtrip() {
        let n = 57u64;
        let mut idx = 0u64;
        for u in 0..57u32 {
            for v in (u + 1)..57u32 {
                assert_eq!(pair_from_index(n, idx), (u, v));
                idx += 1;
            }
        }
    }
}
