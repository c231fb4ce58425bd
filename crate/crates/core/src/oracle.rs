//! Plaintext PageRank.
//!
//! The update is the damped sum without dangling-mass redistribution:
//!
//! ```text
//! new[i] = (1 - d) / m + d * sum over j -> i of ranks[j] / out_degree[j]
//! ```
//!
//! Nodes with no out-links contribute nothing, so on graphs with dangling
//! nodes the ranks sum to less than one. [`quantized_step`] replays the same
//! update with each `ranks[j] / out_degree[j]` rounded through the
//! fixed-point codec, which is exactly what the encrypted protocol computes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{CodecError, FixedPointCodec};
use crate::graph::AdjacencyGraph;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("rank vector has length {got}, graph has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("damping {0} is not in (0, 1)")]
    DampingOutOfRange(f64),
    #[error("tolerance {0} must be positive")]
    InvalidTolerance(f64),
    #[error("max_iter must be at least 1")]
    InvalidMaxIter,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationParams {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for IterationParams {
    fn default() -> Self {
        IterationParams {
            damping: DEFAULT_DAMPING,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl IterationParams {
    pub fn validate(&self) -> Result<(), OracleError> {
        check_damping(self.damping)?;
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(OracleError::InvalidTolerance(self.tolerance));
        }
        if self.max_iter == 0 {
            return Err(OracleError::InvalidMaxIter);
        }
        Ok(())
    }
}

/// Rank vector after `iteration` updates; `last_delta` is the L1 change of
/// the most recent one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankState {
    pub ranks: Vec<f64>,
    pub iteration: usize,
    pub last_delta: f64,
}

impl PageRankState {
    pub fn uniform(node_count: usize) -> Self {
        PageRankState {
            ranks: vec![1.0 / node_count as f64; node_count],
            iteration: 0,
            last_delta: f64::INFINITY,
        }
    }

    pub fn converged(&self, tolerance: f64) -> bool {
        self.last_delta < tolerance
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn max_abs_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_damping(damping: f64) -> Result<(), OracleError> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(OracleError::DampingOutOfRange(damping));
    }
    Ok(())
}

fn check_len(graph: &AdjacencyGraph, ranks: &[f64]) -> Result<(), OracleError> {
    if ranks.len() != graph.node_count() {
        return Err(OracleError::DimensionMismatch {
            expected: graph.node_count(),
            got: ranks.len(),
        });
    }
    Ok(())
}

pub fn pagerank_step(
    graph: &AdjacencyGraph,
    ranks: &[f64],
    damping: f64,
) -> Result<Vec<f64>, OracleError> {
    check_damping(damping)?;
    check_len(graph, ranks)?;
    let m = graph.node_count();
    let degree = graph.out_degree();
    let teleport = (1.0 - damping) / m as f64;
    Ok((0..m)
        .map(|i| {
            let inflow: f64 = graph.in_links(i).map(|j| ranks[j] / degree[j] as f64).sum();
            teleport + damping * inflow
        })
        .collect())
}

/// One update with each per-source share quantized by `codec`, summed in
/// ascending source order.
pub fn quantized_step(
    graph: &AdjacencyGraph,
    ranks: &[f64],
    damping: f64,
    codec: &FixedPointCodec,
) -> Result<Vec<f64>, OracleError> {
    check_damping(damping)?;
    check_len(graph, ranks)?;
    let m = graph.node_count();
    let degree = graph.out_degree();
    let shares = (0..m)
        .map(|j| {
            if degree[j] == 0 {
                return Ok(0.0);
            }
            let encoded = codec.encode(ranks[j] / degree[j] as f64)?;
            codec.decode(&encoded)
        })
        .collect::<Result<Vec<f64>, CodecError>>()?;
    let teleport = (1.0 - damping) / m as f64;
    Ok((0..m)
        .map(|i| {
            let mut inflow = 0.0;
            for j in graph.in_links(i) {
                inflow += shares[j];
            }
            teleport + damping * inflow
        })
        .collect())
}

fn iterate<F>(
    graph: &AdjacencyGraph,
    params: &IterationParams,
    mut step: F,
) -> Result<Vec<PageRankState>, OracleError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, OracleError>,
{
    params.validate()?;
    let mut state = PageRankState::uniform(graph.node_count());
    let mut history = Vec::new();
    while state.iteration < params.max_iter {
        let next = step(&state.ranks)?;
        state = PageRankState {
            last_delta: l1_distance(&next, &state.ranks),
            ranks: next,
            iteration: state.iteration + 1,
        };
        history.push(state.clone());
        if state.converged(params.tolerance) {
            break;
        }
    }
    Ok(history)
}

/// Power iteration from the uniform vector until the L1 change drops below
/// `tolerance` or `max_iter` steps have run.
pub fn pagerank(
    graph: &AdjacencyGraph,
    damping: f64,
    tolerance: f64,
    max_iter: usize,
) -> Result<PageRankState, OracleError> {
    let params = IterationParams { damping, tolerance, max_iter };
    pagerank_history(graph, &params).map(|mut h| h.pop().expect("max_iter >= 1"))
}

pub fn pagerank_history(
    graph: &AdjacencyGraph,
    params: &IterationParams,
) -> Result<Vec<PageRankState>, OracleError> {
    iterate(graph, params, |ranks| pagerank_step(graph, ranks, params.damping))
}

/// Every state the encrypted protocol should pass through, computed in the
/// clear.
pub fn quantized_pagerank_history(
    graph: &AdjacencyGraph,
    params: &IterationParams,
    codec: &FixedPointCodec,
) -> Result<Vec<PageRankState>, OracleError> {
    iterate(graph, params, |ranks| quantized_step(graph, ranks, params.damping, codec))
}
