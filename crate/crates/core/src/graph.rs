//! Loop-free directed graphs, column partitions, and encrypted slices.
//!
//! `matrix[i][j] = 1` means an edge `i -> j`. The in-links of node `i` are
//! therefore column `i`, which is what the PageRank update sums over, and a
//! party owning column `j` holds every row of that column.

use std::fmt::Write as _;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hex::HexInt;
use crate::paillier::{Ciphertext, PaillierError, PrivateKey, PublicKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("self-loop on node {0}: adjacency diagonal must be zero")]
    SelfLoop(usize),
    #[error("node index {index} out of range for {node_count} nodes")]
    NodeOutOfRange { index: usize, node_count: usize },
    #[error("adjacency entry ({0}, {1}) is not 0 or 1")]
    NotBinary(usize, usize),
    #[error("adjacency matrix is not square")]
    NotSquare,
    #[error("edge probability {0} is not in (0, 1)")]
    InvalidProbability(f64),
    #[error("random graphs need at least 2 nodes")]
    TooFewNodes,
    #[error("party count {party_count} invalid for {node_count} columns")]
    PartyCountOutOfRange { party_count: usize, node_count: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("partition covers {plan} columns but the graph has {graph}")]
    DimensionMismatch { plan: usize, graph: usize },
    #[error("edge list line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("malformed slice: {0}")]
    MalformedSlice(String),
    #[error(transparent)]
    Crypto(#[from] PaillierError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    node_count: usize,
    // row-major, node_count * node_count
    matrix: Vec<u8>,
    out_degree: Vec<u64>,
}

impl AdjacencyGraph {
    /// Builds the binary adjacency matrix of `edges`. Duplicate edges
    /// collapse to a single entry; self-loops are rejected.
    pub fn from_edge_list(edges: &[(usize, usize)], node_count: usize) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut matrix = vec![0u8; node_count * node_count];
        for &(source, dest) in edges {
            for index in [source, dest] {
                if index >= node_count {
                    return Err(GraphError::NodeOutOfRange { index, node_count });
                }
            }
            if source == dest {
                return Err(GraphError::SelfLoop(source));
            }
            matrix[source * node_count + dest] = 1;
        }
        Ok(Self::from_validated(node_count, matrix))
    }

    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self, GraphError> {
        let node_count = rows.len();
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut matrix = Vec::with_capacity(node_count * node_count);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != node_count {
                return Err(GraphError::NotSquare);
            }
            for (j, &entry) in row.iter().enumerate() {
                if entry > 1 {
                    return Err(GraphError::NotBinary(i, j));
                }
                if i == j && entry != 0 {
                    return Err(GraphError::SelfLoop(i));
                }
            }
            matrix.extend_from_slice(row);
        }
        Ok(Self::from_validated(node_count, matrix))
    }

    fn from_validated(node_count: usize, matrix: Vec<u8>) -> Self {
        let out_degree = matrix
            .chunks(node_count)
            .map(|row| row.iter().map(|&e| e as u64).sum())
            .collect();
        AdjacencyGraph { node_count, matrix, out_degree }
    }

    /// Erdős–Rényi style directed graph: every off-diagonal entry is an
    /// independent coin flip with success `edge_probability`.
    pub fn random(node_count: usize, edge_probability: f64, seed: u64) -> Result<Self, GraphError> {
        if node_count < 2 {
            return Err(GraphError::TooFewNodes);
        }
        if !(edge_probability > 0.0 && edge_probability < 1.0) {
            return Err(GraphError::InvalidProbability(edge_probability));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut matrix = vec![0u8; node_count * node_count];
        for i in 0..node_count {
            for j in 0..node_count {
                if i != j && rng.gen::<f64>() < edge_probability {
                    matrix[i * node_count + j] = 1;
                }
            }
        }
        Ok(Self::from_validated(node_count, matrix))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn entry(&self, row: usize, col: usize) -> u8 {
        self.matrix[row * self.node_count + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.matrix[row * self.node_count..(row + 1) * self.node_count]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.matrix.chunks(self.node_count).map(<[u8]>::to_vec).collect()
    }

    pub fn out_degree(&self) -> &[u64] {
        &self.out_degree
    }

    /// Sources of the edges pointing at `node`.
    pub fn in_links(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count).filter(move |&j| self.entry(j, node) == 1)
    }

    pub fn edge_count(&self) -> usize {
        self.matrix.iter().filter(|&&e| e == 1).count()
    }

    /// Edges in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.node_count)
            .flat_map(|i| (0..self.node_count).map(move |j| (i, j)))
            .filter(|&(i, j)| self.entry(i, j) == 1)
            .collect()
    }

    pub fn has_dangling_nodes(&self) -> bool {
        self.out_degree.contains(&0)
    }

    pub fn is_strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.node_count];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                for (v, visited) in seen.iter_mut().enumerate() {
                    let linked = if forward { self.entry(u, v) } else { self.entry(v, u) };
                    if linked == 1 && !*visited {
                        *visited = true;
                        stack.push(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Parses the edge-list text format: `#` comments, then the node count
    /// on its own line, then one whitespace-separated `source dest` pair per
    /// line.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut node_count = None;
        let mut edges = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| GraphError::Parse { line, reason: format!("bad node index {s:?}") })
            };
            match (node_count, fields.as_slice()) {
                (None, [count]) => node_count = Some(parse(count)?),
                (None, _) => {
                    return Err(GraphError::Parse {
                        line,
                        reason: "expected the node count on its own line".into(),
                    })
                }
                (Some(_), [source, dest]) => edges.push((parse(source)?, parse(dest)?)),
                (Some(_), _) => {
                    return Err(GraphError::Parse { line, reason: "expected two node indices".into() })
                }
            }
        }
        let node_count = node_count.ok_or(GraphError::Parse {
            line: text.lines().count().max(1),
            reason: "missing node count".into(),
        })?;
        Self::from_edge_list(&edges, node_count)
    }

    pub fn to_edge_list(&self, header: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(header) = header {
            for line in header.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        let _ = writeln!(out, "{}", self.node_count);
        for (s, d) in self.edges() {
            let _ = writeln!(out, "{s} {d}");
        }
        out
    }
}

/// Assignment of every column to exactly one party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    party_count: usize,
    assignment: Vec<usize>,
    seed: u64,
}

impl PartitionPlan {
    /// Random column partition. The first `party_count` columns of a seeded
    /// shuffle go one to each party, the rest are assigned uniformly, so no
    /// party is ever empty.
    pub fn random(node_count: usize, party_count: usize, seed: u64) -> Result<Self, GraphError> {
        if party_count < 2 || party_count > node_count {
            return Err(GraphError::PartyCountOutOfRange { party_count, node_count });
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut columns: Vec<usize> = (0..node_count).collect();
        columns.shuffle(&mut rng);
        let mut assignment = vec![0; node_count];
        for (position, &column) in columns.iter().enumerate() {
            assignment[column] =
                if position < party_count { position } else { rng.gen_range(0..party_count) };
        }
        Ok(PartitionPlan { party_count, assignment, seed })
    }

    /// Degenerate plan giving every column to a single party.
    pub fn whole(node_count: usize) -> Self {
        PartitionPlan { party_count: 1, assignment: vec![0; node_count], seed: 0 }
    }

    pub fn from_assignment(assignment: Vec<usize>, party_count: usize) -> Result<Self, GraphError> {
        if party_count == 0 || party_count > assignment.len() {
            return Err(GraphError::PartyCountOutOfRange {
                party_count,
                node_count: assignment.len(),
            });
        }
        let mut owned = vec![0usize; party_count];
        for &owner in &assignment {
            if owner >= party_count {
                return Err(GraphError::InvalidPartition(format!("owner {owner} out of range")));
            }
            owned[owner] += 1;
        }
        if let Some(empty) = owned.iter().position(|&n| n == 0) {
            return Err(GraphError::InvalidPartition(format!("party {empty} owns no column")));
        }
        Ok(PartitionPlan { party_count, assignment, seed: 0 })
    }

    pub fn party_count(&self) -> usize {
        self.party_count
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn owner(&self, column: usize) -> usize {
        self.assignment[column]
    }

    /// Sorted columns owned by `party`.
    pub fn columns_of(&self, party: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&c| self.assignment[c] == party).collect()
    }
}

/// Free-function spelling of [`AdjacencyGraph::random`].
pub fn random_graph(
    node_count: usize,
    edge_probability: f64,
    seed: u64,
) -> Result<AdjacencyGraph, GraphError> {
    AdjacencyGraph::random(node_count, edge_probability, seed)
}

/// Free-function spelling of [`PartitionPlan::random`].
pub fn make_partition(
    node_count: usize,
    party_count: usize,
    seed: u64,
) -> Result<PartitionPlan, GraphError> {
    PartitionPlan::random(node_count, party_count, seed)
}

/// One party's encrypted columns: `cipher_matrix[row][k]` encrypts
/// `matrix[row][column_indices[k]]`. Zeros are encrypted too.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedSlice {
    pub party_id: usize,
    pub column_indices: Vec<usize>,
    pub cipher_matrix: Vec<Vec<Ciphertext>>,
    pub public_key: PublicKey,
}

#[derive(Serialize, Deserialize)]
struct SliceJson {
    party_id: usize,
    columns: Vec<usize>,
    cipher_rows: Vec<Vec<HexInt>>,
}

impl EncryptedSlice {
    pub fn row_count(&self) -> usize {
        self.cipher_matrix.len()
    }

    /// Decrypts into `values[row][k]` for the slice's own columns.
    pub fn decrypt(&self, key: &PrivateKey) -> Result<Vec<Vec<BigUint>>, GraphError> {
        self.cipher_matrix
            .iter()
            .map(|row| row.iter().map(|c| key.decrypt(c).map_err(GraphError::from)).collect())
            .collect()
    }

    /// `{"party_id": int, "columns": [int], "cipher_rows": [[hex]]}`.
    pub fn to_json(&self) -> String {
        let json = SliceJson {
            party_id: self.party_id,
            columns: self.column_indices.clone(),
            cipher_rows: self
                .cipher_matrix
                .iter()
                .map(|row| row.iter().map(|c| HexInt(c.value().clone())).collect())
                .collect(),
        };
        serde_json::to_string(&json).expect("slice json")
    }

    pub fn from_json(text: &str, public_key: &PublicKey) -> Result<Self, GraphError> {
        let json: SliceJson = serde_json::from_str(text)
            .map_err(|e| GraphError::MalformedSlice(e.to_string()))?;
        Self::from_parts(json.party_id, json.columns, json.cipher_rows, public_key)
    }

    pub(crate) fn from_parts(
        party_id: usize,
        columns: Vec<usize>,
        cipher_rows: Vec<Vec<HexInt>>,
        public_key: &PublicKey,
    ) -> Result<Self, GraphError> {
        if columns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GraphError::MalformedSlice("columns must be sorted and distinct".into()));
        }
        let cipher_matrix = cipher_rows
            .into_iter()
            .map(|row| {
                if row.len() != columns.len() {
                    return Err(GraphError::MalformedSlice("row width != column count".into()));
                }
                row.into_iter()
                    .map(|HexInt(v)| public_key.ciphertext_from_value(v).map_err(GraphError::from))
                    .collect()
            })
            .collect::<Result<Vec<Vec<Ciphertext>>, _>>()?;
        Ok(EncryptedSlice {
            party_id,
            column_indices: columns,
            cipher_matrix,
            public_key: public_key.clone(),
        })
    }
}

/// Encrypts every entry of every column under `public_key` and groups the
/// columns by owner. Columns are encrypted in parallel, each with its own
/// ChaCha stream seeded from `rng`.
pub fn encrypt_slices<R: RngCore + ?Sized>(
    graph: &AdjacencyGraph,
    plan: &PartitionPlan,
    public_key: &PublicKey,
    rng: &mut R,
) -> Result<Vec<EncryptedSlice>, GraphError> {
    let m = graph.node_count();
    if plan.node_count() != m {
        return Err(GraphError::DimensionMismatch { plan: plan.node_count(), graph: m });
    }
    let seeds: Vec<[u8; 32]> = (0..m)
        .map(|_| {
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            seed
        })
        .collect();
    let zero = BigUint::from(0u32);
    let one = BigUint::from(1u32);
    // columns[j][i] = Enc(matrix[i][j])
    let columns: Vec<Vec<Ciphertext>> = seeds
        .into_par_iter()
        .enumerate()
        .map(|(j, seed)| {
            let mut column_rng = ChaCha20Rng::from_seed(seed);
            (0..m)
                .map(|i| {
                    let bit = if graph.entry(i, j) == 1 { &one } else { &zero };
                    public_key.encrypt(bit, &mut column_rng)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    Ok((0..plan.party_count())
        .map(|party| {
            let column_indices = plan.columns_of(party);
            let cipher_matrix = (0..m)
                .map(|i| column_indices.iter().map(|&j| columns[j][i].clone()).collect())
                .collect();
            EncryptedSlice {
                party_id: party,
                column_indices,
                cipher_matrix,
                public_key: public_key.clone(),
            }
        })
        .collect())
}

/// Decrypts all slices and places every column back at its global index.
pub fn reassemble_matrix(
    slices: &[EncryptedSlice],
    key: &PrivateKey,
) -> Result<Vec<Vec<BigUint>>, GraphError> {
    let m = slices.first().map(EncryptedSlice::row_count).unwrap_or(0);
    let mut out: Vec<Vec<Option<BigUint>>> = vec![vec![None; m]; m];
    for slice in slices {
        let values = slice.decrypt(key)?;
        for (i, row) in values.into_iter().enumerate() {
            for (k, value) in row.into_iter().enumerate() {
                let j = slice.column_indices[k];
                if j >= m || out[i][j].replace(value).is_some() {
                    return Err(GraphError::InvalidPartition(format!("column {j} placed twice")));
                }
            }
        }
    }
    out.into_iter()
        .map(|row| {
            row.into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| GraphError::InvalidPartition("missing column".into()))
        })
        .collect()
}
